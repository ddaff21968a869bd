//! Subcommand implementations and shared plumbing.

pub mod benchmark;
pub mod profile;
pub mod report;
pub mod sample;
pub mod simulate;
pub mod train;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use loopsurro::error::{Error, Result};
use loopsurro::io::load_key_values;
use loopsurro::newton::ToleranceSpec;
use loopsurro::problems::Problem;
use loopsurro::sampling::InputBounds;

pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config: Option<PathBuf>,
}

impl Context {
    /// Resolves an optional flag against the config file: flag wins, then
    /// the config entry, then the built-in default.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(path) = &self.config {
            let entries = load_key_values(path)?;
            if let Some(raw) = entries.get(key) {
                return raw
                    .parse()
                    .map_err(|_| Error::Config(format!("bad config value for `{key}`: {raw}")));
            }
        }
        Ok(default)
    }

    pub fn out_path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(name))
    }
}

pub fn load_problem(name: &str) -> Result<Problem> {
    loopsurro::problems::by_name(name)
}

pub fn tolerance(atol: f64, rtol: f64, max_iter: usize) -> Result<ToleranceSpec> {
    ToleranceSpec::new(atol, rtol, max_iter)
}

/// Writes a bounds file: problem name, dimension count, one line per
/// dimension, and the margin.
pub fn save_bounds(path: &Path, problem: &str, bounds: &InputBounds) -> Result<()> {
    let mut entries = BTreeMap::new();
    entries.insert("problem".to_string(), problem.to_string());
    entries.insert("dims".to_string(), bounds.dim().to_string());
    entries.insert("margin".to_string(), loopsurro::io::format_f64(bounds.margin_fraction));
    for (i, &(lo, hi)) in bounds.raw().iter().enumerate() {
        entries.insert(
            format!("dim{i}"),
            format!("{} {}", loopsurro::io::format_f64(lo), loopsurro::io::format_f64(hi)),
        );
    }
    loopsurro::io::save_key_values(path, &entries)
}

pub fn load_bounds(path: &Path) -> Result<(String, InputBounds)> {
    let entries = load_key_values(path)?;
    let problem = entries
        .get("problem")
        .ok_or_else(|| Error::Parse(format!("{}: missing `problem`", path.display())))?
        .clone();
    let dims: usize = entries
        .get("dims")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: missing `dims`", path.display())))?;
    let mut pairs = Vec::with_capacity(dims);
    for i in 0..dims {
        let raw = entries
            .get(&format!("dim{i}"))
            .ok_or_else(|| Error::Parse(format!("{}: missing `dim{i}`", path.display())))?;
        let parts: Vec<&str> = raw.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("{}: bad bounds line `{raw}`", path.display())));
        }
        let lo: f64 = parts[0].parse().map_err(|_| Error::Parse(format!("bad float `{raw}`")))?;
        let hi: f64 = parts[1].parse().map_err(|_| Error::Parse(format!("bad float `{raw}`")))?;
        pairs.push((lo, hi));
    }
    let margin: f64 = entries.get("margin").and_then(|v| v.parse().ok()).unwrap_or(0.0);
    Ok((problem, InputBounds::new(pairs)?.with_margin(margin)))
}

/// The problem a data artifact was produced for, read from its manifest.
pub fn artifact_problem(artifact: &Path) -> Result<String> {
    let manifest = crate::manifest::manifest_path(artifact);
    let entries = load_key_values(&manifest).map_err(|_| {
        Error::Consistency(format!(
            "no manifest found at {} for artifact {}",
            manifest.display(),
            artifact.display()
        ))
    })?;
    entries.get("problem").cloned().ok_or_else(|| {
        Error::Consistency(format!("manifest {} does not name a problem", manifest.display()))
    })
}

/// Fails when an artifact's manifest names a different problem.
pub fn check_problem_consistency(artifact: &Path, expected: &str) -> Result<()> {
    let actual = artifact_problem(artifact)?;
    if actual != expected {
        return Err(Error::Consistency(format!(
            "problem mismatch: command targets `{expected}` but {} (per {}) was produced for `{actual}`",
            artifact.display(),
            crate::manifest::manifest_path(artifact).display(),
        )));
    }
    Ok(())
}
