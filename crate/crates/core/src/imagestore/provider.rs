use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::GeoPose;
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Environment variable holding the API key for [`HttpTemplateProvider`].
pub const PROVIDER_KEY_ENV: &str = "SAFEDRIVE_PROVIDER_KEY";

/// A view to fetch: pose, output size, and horizontal field of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewRequest {
    pub pose: GeoPose,
    pub width: usize,
    pub height: usize,
    pub fov: f64,
}

/// Source of imagery for arbitrary poses.
///
/// Implementations return [`Error::NotFound`] when they hold no imagery for
/// the pose and [`Error::Unavailable`] for transient failures.
pub trait Provider: Send + Sync {
    fn fetch(&self, request: &ViewRequest) -> Result<Raster>;
}

impl<P: Provider + ?Sized> Provider for &P {
    fn fetch(&self, request: &ViewRequest) -> Result<Raster> {
        (**self).fetch(request)
    }
}

/// `<lat:8dp>_<lon:8dp>_<heading:2dp>_<pitch:2dp>_<w>x<h>_<fov:1dp>.png`
pub fn cache_file_name(req: &ViewRequest) -> String {
    format!(
        "{}_{}x{}_{:.1}.png",
        pose_key(&req.pose),
        req.width,
        req.height,
        req.fov
    )
}

fn pose_key(p: &GeoPose) -> String {
    format!("{:.8}_{:.8}_{:.2}_{:.2}", p.lat, p.lon, p.heading, p.pitch)
}

/// Directory of cached provider results.
#[derive(Debug, Clone)]
pub struct ImageCache {
    dir: PathBuf,
}

impl ImageCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, req: &ViewRequest) -> PathBuf {
        self.dir.join(cache_file_name(req))
    }

    pub fn get(&self, req: &ViewRequest) -> Result<Option<Raster>> {
        let path = self.path_for(req);
        if !path.is_file() {
            return Ok(None);
        }
        Raster::load(&path).map(Some)
    }

    /// Atomically stores `img` (temp file in the cache dir, then rename).
    pub fn put(&self, req: &ViewRequest, img: &Raster) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(req);
        let bytes = img.encode_png()?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(path)
    }
}

/// Returns the provider's image for `req`, served from `cache` when present
/// and written to it otherwise.
pub fn fetch(cache: &ImageCache, provider: &dyn Provider, req: &ViewRequest) -> Result<Raster> {
    if req.width == 0 || req.height == 0 {
        return Err(Error::InvalidArgument("fetch dimensions must be at least 1".into()));
    }
    if let Some(hit) = cache.get(req)? {
        return Ok(hit);
    }
    let img = provider.fetch(req)?;
    cache.put(req, &img)?;
    Ok(img)
}

/// Offline provider over a directory of PNG files named by quantized pose,
/// `<lat:8dp>_<lon:8dp>_<heading:2dp>_<pitch:2dp>.png`. Size and field of
/// view in the request are ignored; stored images are returned as-is.
#[derive(Debug, Clone)]
pub struct LocalDirProvider {
    dir: PathBuf,
}

impl LocalDirProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, pose: &GeoPose) -> PathBuf {
        self.dir.join(format!("{}.png", pose_key(pose)))
    }

    pub fn insert(&self, pose: &GeoPose, img: &Raster) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(pose);
        img.save_png(&path)?;
        Ok(path)
    }
}

impl Provider for LocalDirProvider {
    fn fetch(&self, req: &ViewRequest) -> Result<Raster> {
        let path = self.path_for(&req.pose);
        match fs::read(&path) {
            Ok(bytes) => Raster::decode(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::NotFound(format!("no local imagery for {}", req.pose)))
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

/// HTTP provider built from a URL template with `{lat}`, `{lon}`,
/// `{heading}`, `{pitch}`, `{fov}`, `{w}`, `{h}` and `{key}` placeholders.
pub struct HttpTemplateProvider {
    template: String,
    key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTemplateProvider {
    pub fn new(template: impl Into<String>, key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(30)))
            .build()
            .new_agent();
        Self {
            template: template.into(),
            key,
            agent,
        }
    }

    /// Reads the key from `SAFEDRIVE_PROVIDER_KEY`.
    pub fn from_env(template: impl Into<String>) -> Self {
        Self::new(template, std::env::var(PROVIDER_KEY_ENV).ok())
    }

    pub fn url_for(&self, req: &ViewRequest) -> Result<String> {
        if self.template.contains("{key}") && self.key.is_none() {
            return Err(Error::InvalidArgument(format!(
                "provider URL needs {{key}} but {PROVIDER_KEY_ENV} is not set"
            )));
        }
        let p = &req.pose;
        Ok(self
            .template
            .replace("{lat}", &format!("{:.8}", p.lat))
            .replace("{lon}", &format!("{:.8}", p.lon))
            .replace("{heading}", &format!("{:.2}", p.heading))
            .replace("{pitch}", &format!("{:.2}", p.pitch))
            .replace("{fov}", &format!("{:.1}", req.fov))
            .replace("{w}", &req.width.to_string())
            .replace("{h}", &req.height.to_string())
            .replace("{key}", self.key.as_deref().unwrap_or("")))
    }
}

impl Provider for HttpTemplateProvider {
    fn fetch(&self, req: &ViewRequest) -> Result<Raster> {
        let url = self.url_for(req)?;
        let mut resp = match self.agent.get(&url).call() {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(404)) => {
                return Err(Error::NotFound(format!("no imagery for {}", req.pose)))
            }
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) && code != 429 => {
                return Err(Error::InvalidArgument(format!("provider rejected request: HTTP {code}")))
            }
            Err(e) => return Err(Error::Unavailable(e.to_string())),
        };
        let bytes = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| Error::Unavailable(e.to_string()))?;
        Raster::decode(&bytes)
    }
}
