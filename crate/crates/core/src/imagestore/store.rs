use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::provider::ImageCache;
use super::{planar_distance, GeoPose};
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const INDEX_FILE: &str = "index.jsonl";
const IMAGE_DIR: &str = "images";
const CACHE_DIR: &str = "cache";

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub pose: GeoPose,
    /// ISO-8601 capture date.
    pub captured: String,
    /// Image path relative to the store root.
    pub file: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    id: String,
    lat: f64,
    lon: f64,
    heading: f64,
    pitch: f64,
    captured: String,
    file: String,
}

impl From<&ImageRecord> for IndexLine {
    fn from(r: &ImageRecord) -> Self {
        IndexLine {
            id: r.id.clone(),
            lat: r.pose.lat,
            lon: r.pose.lon,
            heading: r.pose.heading,
            pitch: r.pose.pitch,
            captured: r.captured.clone(),
            file: r.file.to_string_lossy().replace('\\', "/"),
        }
    }
}

/// Handle over a store directory. Reads need only `&self`; adding records
/// requires `&mut self`.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    records: Vec<ImageRecord>,
}

impl Store {
    /// Opens an existing store directory. A directory without an index is an
    /// empty store.
    pub fn open(root: impl AsRef<Path>) -> Result<Store> {
        let root = root.as_ref().to_path_buf();
        let meta = fs::metadata(&root).map_err(|e| Error::io(&root, e))?;
        if !meta.is_dir() {
            return Err(Error::InvalidArgument(format!(
                "store path {} is not a directory",
                root.display()
            )));
        }
        let index = root.join(INDEX_FILE);
        let mut records = Vec::new();
        if index.exists() {
            let text = fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
            let mut seen = HashSet::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record = parse_line(line, i + 1)?;
                if !seen.insert(record.id.clone()) {
                    return Err(Error::IndexParse {
                        line: i + 1,
                        message: format!("duplicate id {}", record.id),
                    });
                }
                let path = root.join(&record.file);
                if !path.is_file() {
                    return Err(Error::MissingImage {
                        id: record.id,
                        path,
                    });
                }
                records.push(record);
            }
        }
        Ok(Store { root, records })
    }

    /// Creates the directory if needed, then opens it.
    pub fn create(root: impl AsRef<Path>) -> Result<Store> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn cache(&self) -> ImageCache {
        ImageCache::new(self.root.join(CACHE_DIR))
    }

    pub fn load_image(&self, record: &ImageRecord) -> Result<Raster> {
        let path = self.root.join(&record.file);
        if !path.is_file() {
            return Err(Error::MissingImage {
                id: record.id.clone(),
                path,
            });
        }
        Raster::load(&path)
    }

    /// Copies a PNG file into the store and appends its record.
    pub fn add_file(
        &mut self,
        id: &str,
        pose: GeoPose,
        captured: &str,
        source: &Path,
    ) -> Result<&ImageRecord> {
        self.check_new_id(id)?;
        let bytes = fs::read(source).map_err(|e| Error::io(source, e))?;
        if image::guess_format(&bytes).ok() != Some(image::ImageFormat::Png) {
            return Err(Error::UnsupportedFormat(source.to_path_buf()));
        }
        // Must decode, not merely carry a PNG signature.
        Raster::decode(&bytes)?;
        self.append(id, pose, captured, &bytes)
    }

    /// Encodes `image` as PNG into the store and appends its record.
    pub fn add_raster(
        &mut self,
        id: &str,
        pose: GeoPose,
        captured: &str,
        image: &Raster,
    ) -> Result<&ImageRecord> {
        self.check_new_id(id)?;
        let bytes = image.encode_png()?;
        self.append(id, pose, captured, &bytes)
    }

    fn check_new_id(&self, id: &str) -> Result<()> {
        if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
            return Err(Error::field("id", format!("{id:?} is not a valid record id")));
        }
        if self.get(id).is_some() {
            return Err(Error::DuplicateId(id.to_string()));
        }
        Ok(())
    }

    fn append(&mut self, id: &str, pose: GeoPose, captured: &str, png: &[u8]) -> Result<&ImageRecord> {
        let dir = self.root.join(IMAGE_DIR);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let file = PathBuf::from(IMAGE_DIR).join(format!("{id}.png"));
        let path = self.root.join(&file);
        fs::write(&path, png).map_err(|e| Error::io(&path, e))?;

        let record = ImageRecord {
            id: id.to_string(),
            pose,
            captured: captured.to_string(),
            file,
        };
        let mut line = serde_json::to_string(&IndexLine::from(&record))?;
        line.push('\n');
        let index = self.root.join(INDEX_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index)
            .map_err(|e| Error::io(&index, e))?;
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&index, e))?;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Nearest stored record to each point of an `n x n` lattice centred on
    /// `center` with spacing `step` degrees, in row-major lattice order
    /// (rows by latitude offset, then columns by longitude offset), with
    /// repeats removed.
    pub fn query_grid(&self, center: &GeoPose, step: f64, n: usize) -> Result<Vec<ImageRecord>> {
        Ok(self
            .grid_nearest(center, step, n)?
            .into_iter()
            .map(|hit| hit.record.clone())
            .fold(Vec::new(), |mut acc: Vec<ImageRecord>, r| {
                if !acc.iter().any(|a| a.id == r.id) {
                    acc.push(r);
                }
                acc
            }))
    }

    /// Per-lattice-point nearest record, without deduplication.
    pub fn grid_nearest(&self, center: &GeoPose, step: f64, n: usize) -> Result<Vec<GridHit<'_>>> {
        let lattice = grid_lattice(center, step, n)?;
        if self.records.is_empty() {
            return Ok(Vec::new());
        }
        Ok(lattice
            .into_iter()
            .map(|(lat, lon)| {
                let (record, distance) = self
                    .records
                    .iter()
                    .map(|r| (r, planar_distance(lat, lon, r.pose.lat, r.pose.lon)))
                    .fold(None, |best: Option<(&ImageRecord, f64)>, cur| match best {
                        Some(b) if b.1 <= cur.1 => Some(b),
                        _ => Some(cur),
                    })
                    .expect("non-empty store");
                GridHit {
                    lat,
                    lon,
                    record,
                    distance,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridHit<'a> {
    pub lat: f64,
    pub lon: f64,
    pub record: &'a ImageRecord,
    /// Planar distance in degrees from the lattice point to the record.
    pub distance: f64,
}

/// Lattice points `(lat, lon)` in row-major order.
pub fn grid_lattice(center: &GeoPose, step: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("grid size must be odd, got {n}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let half = (n / 2) as isize;
    let mut out = Vec::with_capacity(n * n);
    for r in -half..=half {
        for c in -half..=half {
            out.push((center.lat + r as f64 * step, center.lon + c as f64 * step));
        }
    }
    Ok(out)
}

fn parse_line(line: &str, lineno: usize) -> Result<ImageRecord> {
    let parsed: IndexLine = serde_json::from_str(line).map_err(|e| Error::IndexParse {
        line: lineno,
        message: e.to_string(),
    })?;
    let pose = GeoPose::new(parsed.lat, parsed.lon, parsed.heading, parsed.pitch).map_err(|e| {
        Error::IndexParse {
            line: lineno,
            message: e.to_string(),
        }
    })?;
    if parsed.id.is_empty() {
        return Err(Error::IndexParse {
            line: lineno,
            message: "empty id".into(),
        });
    }
    Ok(ImageRecord {
        id: parsed.id,
        pose,
        captured: parsed.captured,
        file: PathBuf::from(parsed.file),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Raster {
        Raster::gray_from_fn(4, 4, |x, y| (x * 16 + y) as u8)
    }

    fn pose(lat: f64, lon: f64) -> GeoPose {
        GeoPose::new(lat, lon, 10.0, 0.0).unwrap()
    }

    #[test]
    fn empty_directory_is_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(store.len(), 0);
        assert!(store.query_grid(&pose(1.0, 1.0), 1e-4, 3).unwrap().is_empty());
    }

    #[test]
    fn add_then_reopen_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let p = GeoPose::new(44.9745000, -93.2704977, 218.36, -1.25).unwrap();
        store.add_raster("a", p, "2015-07-01", &tiny()).unwrap();
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.records(), store.records());
        assert_eq!(reopened.records()[0].pose, p);
        assert_eq!(reopened.load_image(&reopened.records()[0]).unwrap(), tiny());
    }

    #[test]
    fn nine_records_preserved() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        for i in 0..9 {
            store
                .add_raster(&format!("r{i}"), pose(i as f64 * 0.001, 0.0), "2014-09-01", &tiny())
                .unwrap();
        }
        assert_eq!(Store::open(dir.path()).unwrap().len(), 9);
    }

    #[test]
    fn missing_lat_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.add_raster("ok", pose(0.0, 0.0), "2014-09-01", &tiny()).unwrap();
        let index = dir.path().join(INDEX_FILE);
        let mut text = fs::read_to_string(&index).unwrap();
        text.push_str(
            "{\"id\":\"bad\",\"lon\":1.0,\"heading\":0.0,\"pitch\":0.0,\"captured\":\"x\",\"file\":\"images/ok.png\"}\n",
        );
        fs::write(&index, text).unwrap();
        match Store::open(dir.path()) {
            Err(Error::IndexParse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("lat"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_image_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.add_raster("gone", pose(0.0, 0.0), "2014-09-01", &tiny()).unwrap();
        fs::remove_file(dir.path().join("images/gone.png")).unwrap();
        match Store::open(dir.path()) {
            Err(Error::MissingImage { id, .. }) => assert_eq!(id, "gone"),
            other => panic!("expected missing image, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_non_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.add_raster("a", pose(0.0, 0.0), "d", &tiny()).unwrap();
        assert!(matches!(
            store.add_raster("a", pose(0.0, 0.0), "d", &tiny()),
            Err(Error::DuplicateId(_))
        ));
        let junk = dir.path().join("junk.jpg");
        fs::write(&junk, b"\xff\xd8\xff\xe0not really").unwrap();
        assert!(matches!(
            store.add_file("b", pose(0.0, 0.0), "d", &junk),
            Err(Error::UnsupportedFormat(_))
        ));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn exact_lattice_returns_all_nine_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let step = 1e-4;
        let center = pose(44.97, -93.27);
        // Insert in a scrambled order; output must follow the lattice.
        let order = [4, 0, 8, 2, 6, 1, 3, 5, 7];
        for k in order {
            let (r, c) = (k / 3, k % 3);
            let p = pose(
                center.lat + (r as f64 - 1.0) * step,
                center.lon + (c as f64 - 1.0) * step,
            );
            store.add_raster(&format!("g{k}"), p, "d", &tiny()).unwrap();
        }
        let ids: Vec<String> = store
            .query_grid(&center, step, 3)
            .unwrap()
            .into_iter()
            .map(|r| r.id)
            .collect();
        let want: Vec<String> = (0..9).map(|k| format!("g{k}")).collect();
        assert_eq!(ids, want);
    }

    #[test]
    fn single_record_dedups() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.add_raster("only", pose(10.0, 10.0), "d", &tiny()).unwrap();
        let hits = store.query_grid(&pose(10.0, 10.0), 1e-4, 3).unwrap();
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn grid_arguments_validated() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.query_grid(&pose(0.0, 0.0), 1e-4, 2).is_err());
        assert!(store.query_grid(&pose(0.0, 0.0), 0.0, 3).is_err());
    }
}
