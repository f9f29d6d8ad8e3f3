//! Run configuration, deterministic artifact writing and manifests.

use crate::error::{GkdvError, Result};
use crate::nonlinearity::Nonlinearity;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const OUT_ENV: &str = "GKDV_OUT";
pub const DEFAULT_OUT: &str = "gkdv_out";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub half_length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// `eta1 = eta1_fraction * c*`.
    pub eta1_fraction: f64,
    /// `zeta1 = zeta1_fraction * eta1`.
    pub zeta1_fraction: f64,
    pub c6: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { eta1_fraction: 0.05, zeta1_fraction: 0.1, c6: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionParams {
    /// `L_dom / L_profile`.
    pub domain_factor: f64,
    pub n_dom: usize,
    pub dt: f64,
    pub horizon: f64,
    pub sample_dt: f64,
    /// `eta0 = eta0_fraction * c*`.
    pub eta0_fraction: f64,
    pub zeta0: f64,
    pub sponge: bool,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            domain_factor: 4.0,
            n_dom: 4096,
            dt: 0.25,
            horizon: 12000.0,
            sample_dt: 1.0,
            eta0_fraction: 1e-3,
            zeta0: 1e-7,
            sponge: true,
        }
    }
}

/// Single JSON document describing a run; CLI flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Nonlinearity in the textual form accepted by `Nonlinearity::from_str`.
    pub nonlinearity: String,
    pub speed: Option<f64>,
    pub grid: Option<GridParams>,
    pub branch: Option<(f64, f64)>,
    pub samples: usize,
    /// Optional override of the weight; defaults depend on the speed.
    pub mu: Option<f64>,
    pub thresholds: Thresholds,
    pub evolution: EvolutionParams,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nonlinearity: "kdv".into(),
            speed: None,
            grid: None,
            branch: None,
            samples: 24,
            mu: None,
            thresholds: Thresholds::default(),
            evolution: EvolutionParams::default(),
            output_dir: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GkdvError::Config(format!("{name} must be positive (got {v})")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GkdvError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn parse_nonlinearity(&self) -> Result<Nonlinearity> {
        self.nonlinearity.parse()
    }

    pub fn validate(&self) -> Result<()> {
        self.parse_nonlinearity()?;
        if let Some(c) = self.speed {
            positive("speed", c)?;
        }
        if let Some(g) = self.grid {
            positive("grid.half_length", g.half_length)?;
            if g.n < 11 {
                return Err(GkdvError::Config(format!("grid.n must be at least 11 (got {})", g.n)));
            }
        }
        if let Some((a, b)) = self.branch {
            positive("branch start", a)?;
            if !(b > a) {
                return Err(GkdvError::Config(format!("branch range [{a}, {b}] is empty")));
            }
        }
        if let Some(mu) = self.mu {
            positive("mu", mu)?;
            let c_min = self.branch.map(|r| r.0).into_iter().chain(self.speed).fold(f64::INFINITY, f64::min);
            if c_min.is_finite() && mu >= c_min.sqrt() {
                return Err(GkdvError::Config(format!("mu = {mu} must be below sqrt(c) = {} for all speeds", c_min.sqrt())));
            }
        }
        let t = &self.thresholds;
        positive("thresholds.eta1_fraction", t.eta1_fraction)?;
        positive("thresholds.zeta1_fraction", t.zeta1_fraction)?;
        if !(t.c6 >= 0.0) {
            return Err(GkdvError::Config("thresholds.c6 must be non-negative".into()));
        }
        let e = &self.evolution;
        positive("evolution.domain_factor", e.domain_factor)?;
        positive("evolution.dt", e.dt)?;
        positive("evolution.horizon", e.horizon)?;
        positive("evolution.sample_dt", e.sample_dt)?;
        positive("evolution.eta0_fraction", e.eta0_fraction)?;
        positive("evolution.zeta0", e.zeta0)?;
        if e.n_dom < 16 || e.n_dom % 2 != 0 {
            return Err(GkdvError::Config(format!("evolution.n_dom must be even and >= 16 (got {})", e.n_dom)));
        }
        if self.samples < 2 {
            return Err(GkdvError::Config("samples must be at least 2".into()));
        }
        Ok(())
    }

    /// Sorted-key JSON of the physical content; the output directory is excluded.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let v = serde_json::to_value(&c).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Flag, then `GKDV_OUT`, then the config field, then the default.
    pub fn resolve_output(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Ok(p) = std::env::var(OUT_ENV) {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// Float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| GkdvError::Io(format!("bad path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        GkdvError::from(e)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

/// Collects the artifacts of one command; removes them again unless finished.
pub struct ArtifactSet {
    dir: PathBuf,
    command: String,
    files: Vec<PathBuf>,
    timings: BTreeMap<String, f64>,
    finished: bool,
    created: bool,
}

impl ArtifactSet {
    pub fn new(dir: PathBuf, command: &str) -> Result<Self> {
        let created = !dir.exists();
        fs::create_dir_all(&dir)?;
        Ok(ArtifactSet { dir, command: command.into(), files: Vec::new(), timings: BTreeMap::new(), finished: false, created })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn add(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        if !self.files.contains(&path) {
            self.files.push(path.clone());
        }
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        self.add(name, csv_string(header, rows).as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| GkdvError::Io(e.to_string()))?;
        s.push('\n');
        self.add(name, s.as_bytes())
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f();
        self.timings.insert(stage.into(), t0.elapsed().as_secs_f64());
        out
    }

    pub fn finish(mut self, config: &RunConfig) -> Result<RunManifest> {
        let mut files = Vec::new();
        for p in &self.files {
            let meta = fs::metadata(p)?;
            files.push(FileEntry { name: p.file_name().unwrap_or_default().to_string_lossy().into(), bytes: meta.len() });
        }
        let manifest = RunManifest {
            command: self.command.clone(),
            config_hash: config.hash(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timings: self.timings.clone(),
            files,
        };
        let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| GkdvError::Io(e.to_string()))?;
        s.push('\n');
        write_atomic(&self.dir.join("manifest.json"), s.as_bytes())?;
        self.finished = true;
        Ok(manifest)
    }
}

impl Drop for ArtifactSet {
    fn drop(&mut self) {
        if !self.finished {
            for p in &self.files {
                let _ = fs::remove_file(p);
            }
            if self.created {
                let _ = fs::remove_dir(&self.dir);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_bit_exactly() {
        let mut c = RunConfig::default();
        c.speed = Some(0.1 + 0.2);
        c.mu = Some(1.0 / 3.0);
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.speed.unwrap().to_bits(), c.speed.unwrap().to_bits());
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn csv_has_seventeen_digits() {
        let s = csv_string(&["a"], &[vec![0.1]]);
        assert_eq!(s, "a\n1.0000000000000001e-1\n");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn rejects_bad_mu() {
        let c = RunConfig { speed: Some(0.04), mu: Some(0.3), ..Default::default() };
        assert!(matches!(c.validate(), Err(GkdvError::Config(_))));
    }

    #[test]
    fn unfinished_artifacts_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let path;
        {
            let mut set = ArtifactSet::new(dir.path().to_path_buf(), "t").unwrap();
            path = set.csv("x.csv", &["x"], &[vec![1.0]]).unwrap();
            assert!(path.exists());
        }
        assert!(!path.exists());
    }
}
