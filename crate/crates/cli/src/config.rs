//! Run configuration: a TOML file with `[input]` paths and a `[tracker]`
//! table, layered under command-line overrides.

use std::path::{Path, PathBuf};

use courtsort::tracker::TrackerConfig;
use serde::Deserialize;
use toml::{Table, Value};

use crate::Failure;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub detections: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub correspondences: Option<PathBuf>,
    pub homography: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub name: Option<String>,
}

impl InputPaths {
    /// A sequence directory: `det.txt` plus whichever of `embeddings.txt`,
    /// `homography.txt`, `correspondences.txt` and `gt.txt` exist.
    pub fn from_dir(dir: &Path) -> Self {
        let opt = |n: &str| Some(dir.join(n)).filter(|p| p.exists());
        Self {
            detections: Some(dir.join("det.txt")),
            embeddings: opt("embeddings.txt"),
            correspondences: opt("correspondences.txt"),
            homography: opt("homography.txt"),
            gt: opt("gt.txt"),
            name: dir.file_name().map(|n| n.to_string_lossy().into_owned()),
        }
    }

    /// Fields of `other` win where set.
    pub fn overlay(self, other: InputPaths) -> Self {
        Self {
            detections: other.detections.or(self.detections),
            embeddings: other.embeddings.or(self.embeddings),
            correspondences: other.correspondences.or(self.correspondences),
            homography: other.homography.or(self.homography),
            gt: other.gt.or(self.gt),
            name: other.name.or(self.name),
        }
    }

    fn relative_to(mut self, base: &Path) -> Self {
        for p in [
            &mut self.detections,
            &mut self.embeddings,
            &mut self.correspondences,
            &mut self.homography,
            &mut self.gt,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: InputPaths,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub plot: bool,
    /// Any subset of the tracker parameters.
    #[serde(default)]
    pub tracker: Table,
}

impl RunConfig {
    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = courtsort::io::read_text(path)?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.input = cfg.input.relative_to(base);
        if let Some(out) = cfg.output.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        merge(&mut default_table(), &cfg.tracker, "tracker").map_err(Failure::Parse)?;
        Ok(cfg)
    }

    pub fn tracker(&self) -> Result<TrackerConfig<f64>, Failure> {
        let mut table = default_table();
        merge(&mut table, &self.tracker, "tracker").map_err(Failure::Parse)?;
        Value::Table(table)
            .try_into()
            .map_err(|e| Failure::Parse(format!("tracker: {e}")))
    }
}

fn default_table() -> Table {
    Table::try_from(TrackerConfig::<f64>::default()).expect("tracker config serializes")
}

/// Copies `src` into `dst`, refusing keys `dst` does not have.
fn merge(dst: &mut Table, src: &Table, path: &str) -> Result<(), String> {
    for (k, v) in src {
        let here = format!("{path}.{k}");
        match (dst.get_mut(k), v) {
            (None, _) => return Err(format!("unknown key {here}")),
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s, &here)?,
            (Some(slot), _) => *slot = v.clone(),
        }
    }
    Ok(())
}

/// Applies `key.path=value` assignments. Values are read as TOML literals,
/// falling back to a bare string.
pub fn apply_sets(cfg: TrackerConfig<f64>, sets: &[String]) -> Result<TrackerConfig<f64>, Failure> {
    if sets.is_empty() {
        return Ok(cfg);
    }
    let mut table = Table::try_from(cfg).expect("tracker config serializes");
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        let mut nested = value;
        for part in key.trim().rsplit('.') {
            let mut t = Table::new();
            t.insert(part.to_string(), nested);
            nested = Value::Table(t);
        }
        let Value::Table(src) = nested else { unreachable!() };
        merge(&mut table, &src, "tracker").map_err(Failure::Usage)?;
    }
    Value::Table(table)
        .try_into()
        .map_err(|e| Failure::Usage(format!("--set: {e}")))
}
