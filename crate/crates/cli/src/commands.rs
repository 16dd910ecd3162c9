use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use lanelock::alignment::PixelMask;
use lanelock::diagnostics::{diff_image, ssd};
use lanelock::fixture::{run_case, Manifest};
use lanelock::imagestore::{GeoPose, HttpTemplateProvider, LocalDirProvider, Provider, Store};
use lanelock::locator::locate as locate_pose;
use lanelock::pipeline::run_overlay;
use lanelock::{PipelineConfig, Raster};
use serde_json::json;

use crate::{Common, DiffArgs, EvalArgs, IndexArgs, RunArgs};

const REFUSED: u8 = 3;

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(path) => PipelineConfig::load(path).with_context(|| format!("config {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.ransac.seed = seed;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn provider(a: &RunArgs) -> Option<Box<dyn Provider>> {
    if let Some(dir) = &a.provider_dir {
        return Some(Box::new(LocalDirProvider::new(dir)));
    }
    a.provider_url
        .as_ref()
        .map(|t| Box::new(HttpTemplateProvider::from_env(t.clone())) as Box<dyn Provider>)
}

fn open_store(path: &Path) -> Result<Store> {
    let store = Store::open(path).with_context(|| format!("store {}", path.display()))?;
    if store.is_empty() {
        bail!("store {} has no records", path.display());
    }
    Ok(store)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn pretty(v: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn index(a: &IndexArgs) -> Result<ExitCode> {
    let mut store = match &a.image {
        Some(_) => Store::create(&a.store)?,
        None => Store::open(&a.store)?,
    };
    if let (Some(image), Some(id), Some(pose)) = (&a.image, &a.id, &a.pose) {
        let pose = GeoPose::parse(pose)?;
        store.add_file(id, pose, &a.captured, image)?;
    }
    println!("{}", store.len());
    Ok(ExitCode::SUCCESS)
}

pub fn locate(a: &RunArgs) -> Result<ExitCode> {
    let cfg = load_config(&a.common)?;
    let pose0 = GeoPose::parse(&a.pose)?;
    let store = open_store(&a.store)?;
    let current = Raster::load(&a.image)?;
    let provider = provider(a);
    let r = locate_pose(&current, &pose0, &store, provider.as_deref(), &cfg.locator_params())?;
    let text = pretty(&json!({
        "schema": lanelock::diagnostics::REPORT_SCHEMA,
        "id": r.best.record.id,
        "pose": r.pose,
        "inliers": r.best.inliers,
        "reliable": r.reliable,
        "h_feature": r.h_feature,
    }))?;
    print!("{text}");
    if let Some(out) = &a.out {
        write_text(out, &text)?;
    }
    Ok(if r.reliable { ExitCode::SUCCESS } else { ExitCode::from(REFUSED) })
}

fn report_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn overlay(a: &RunArgs) -> Result<ExitCode> {
    let cfg = load_config(&a.common)?;
    let pose0 = GeoPose::parse(&a.pose)?;
    let Some(out) = &a.out else {
        bail!("overlay needs --out");
    };
    let store = open_store(&a.store)?;
    let current = Raster::load(&a.image)?;
    let provider = provider(a);
    let outcome = run_overlay(&current, &pose0, &store, provider.as_deref(), &cfg)?;

    let text = outcome.report.to_json();
    print!("{text}");
    write_text(&report_path(out), &text)?;
    let Some(img) = &outcome.overlay else {
        eprintln!(
            "location unreliable: {} inliers (need {}); overlay not written",
            outcome.located.best.inliers, cfg.min_inliers
        );
        return Ok(ExitCode::from(REFUSED));
    };
    img.save_png(out)?;
    if let (Some(path), Some(al)) = (&a.diff, &outcome.alignment) {
        al.diff_image.save_png(path)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn diff(a: &DiffArgs) -> Result<ExitCode> {
    let p = Raster::load(&a.projected)?;
    let c = Raster::load(&a.current)?;
    let validity = match &a.mask {
        Some(path) => {
            let m = Raster::load(path)?.to_gray();
            PixelMask::from_fn(m.width(), m.height(), |x, y| m.get(x, y, 0) != 0)
        }
        None => PixelMask::full(c.width(), c.height()),
    };
    let d = diff_image(&p, &c, &validity)?;
    let (s, n) = ssd(&p, &c, &validity)?;
    d.save_png(&a.out)?;
    print!("{}", pretty(&json!({ "ssd": s, "valid_count": n }))?);
    Ok(ExitCode::SUCCESS)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |v| format!("{v:.prec$e}"))
}

pub fn eval(a: &EvalArgs) -> Result<ExitCode> {
    let cfg = load_config(&a.common)?;
    let manifest = Manifest::load(&a.fixture_dir)?;
    println!(
        "{:<18} {:>11} {:>11} {:>11} {:>11} {:>9}  result",
        "case", "pose_err", "h_dist", "ssd_before", "ssd_after", "runtime"
    );
    let mut all = true;
    for case in &manifest.cases {
        let o = run_case(&a.fixture_dir, case, &cfg).with_context(|| format!("case {}", case.name()))?;
        all &= o.passed;
        println!(
            "{:<18} {:>11} {:>11} {:>11} {:>11} {:>8.2}s  {}  ({})",
            o.name,
            opt(o.pose_error, 2),
            opt(o.h_distance, 2),
            opt(o.ssd_before, 3),
            opt(o.ssd_after, 3),
            o.runtime.as_secs_f64(),
            if o.passed { "pass" } else { "FAIL" },
            o.detail
        );
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(REFUSED) })
}
