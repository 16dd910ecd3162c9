use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use lanelock::imagestore::{fetch, GeoPose, HttpTemplateProvider, ImageCache, Provider, Store, ViewRequest};
use lanelock::synth::{scenario_pose, RenderOptions, SynthProvider, SynthWorld};
use lanelock::{Error, Raster, Result};

fn request(pose: GeoPose) -> ViewRequest {
    ViewRequest {
        pose,
        width: 96,
        height: 64,
        fov: 90.0,
    }
}

fn synth_provider() -> SynthProvider {
    SynthProvider::new(SynthWorld::new(3, scenario_pose()), RenderOptions::default())
}

struct Failing;

impl Provider for Failing {
    fn fetch(&self, _: &ViewRequest) -> Result<Raster> {
        Err(Error::Unavailable("backend gone".into()))
    }
}

#[test]
fn cache_serves_repeat_requests() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::new(dir.path().join("cache"));
    let provider = synth_provider();
    let req = request(scenario_pose());

    let first = fetch(&cache, &provider, &req).unwrap();
    let second = fetch(&cache, &provider, &req).unwrap();
    assert_eq!(provider.calls(), 1);
    assert_eq!(first, second);
    assert_eq!(first, provider.fetch(&req).unwrap());

    let wider = ViewRequest { fov: 60.0, ..req };
    fetch(&cache, &provider, &wider).unwrap();
    assert_eq!(provider.calls(), 3);
}

#[test]
fn cache_outlives_backend() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::new(dir.path());
    let req = request(scenario_pose().with_heading(10.0));
    let fresh = fetch(&cache, &synth_provider(), &req).unwrap();

    assert_eq!(fetch(&cache, &Failing, &req).unwrap(), fresh);
    let other = request(scenario_pose().with_heading(11.0));
    assert!(matches!(fetch(&cache, &Failing, &other), Err(Error::Unavailable(_))));
    assert!(!cache.path_for(&other).exists());
}

#[test]
fn store_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let img = Raster::rgb_from_fn(20, 10, |x, y| [x as u8, y as u8, 7]);
    let pose = scenario_pose();
    {
        let mut store = Store::create(dir.path()).unwrap();
        store.add_raster("a", pose, "2016-06-01", &img).unwrap();
        assert!(matches!(
            store.add_raster("a", pose, "2016-06-01", &img),
            Err(Error::DuplicateId(_))
        ));
    }
    let store = Store::open(dir.path()).unwrap();
    assert_eq!(store.len(), 1);
    let rec = store.get("a").unwrap();
    assert_eq!(rec.pose, pose);
    assert_eq!(store.load_image(rec).unwrap(), img);
}

/// Answers `/view/<heading>` by the integer part of the heading: 1 serves a
/// PNG, 2 is 404, 3 is 500, anything else 400.
fn serve(png: Vec<u8>) -> u16 {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            loop {
                let mut header = String::new();
                if reader.read_line(&mut header).unwrap() == 0 || header == "\r\n" {
                    break;
                }
            }
            let path = line.split_whitespace().nth(1).unwrap_or("");
            let heading = path.trim_start_matches("/view/").split('.').next().unwrap_or("");
            let (status, body): (&str, &[u8]) = match heading {
                "1" => ("200 OK", &png),
                "2" => ("404 Not Found", b"none"),
                "3" => ("500 Internal Server Error", b"oops"),
                _ => ("400 Bad Request", b"bad"),
            };
            let head = format!(
                "HTTP/1.1 {status}\r\nContent-Length: {}\r\nContent-Type: image/png\r\nConnection: close\r\n\r\n",
                body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(body);
        }
    });
    port
}

#[test]
fn http_provider_maps_statuses() {
    let img = Raster::gray_from_fn(12, 9, |x, y| (x * 20 + y) as u8);
    let port = serve(img.encode_png().unwrap());
    let provider = HttpTemplateProvider::new(format!("http://127.0.0.1:{port}/view/{{heading}}"), None);
    let at = |heading: f64| request(scenario_pose().with_heading(heading));

    assert_eq!(provider.fetch(&at(1.0)).unwrap(), img);
    assert!(matches!(provider.fetch(&at(2.0)), Err(Error::NotFound(_))));
    let err = provider.fetch(&at(3.0)).unwrap_err();
    assert!(matches!(err, Error::Unavailable(_)));
    assert!(err.is_retryable());
    assert!(matches!(provider.fetch(&at(4.0)), Err(Error::InvalidArgument(_))));

    let dir = tempfile::tempdir().unwrap();
    let cache = ImageCache::new(dir.path());
    assert_eq!(fetch(&cache, &provider, &at(1.0)).unwrap(), img);
    assert!(cache.path_for(&at(1.0)).is_file());
    assert!(fetch(&cache, &provider, &at(2.0)).is_err());
    assert!(!cache.path_for(&at(2.0)).exists());
}
