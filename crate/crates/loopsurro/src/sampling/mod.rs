//! Input-space characterization and dataset generation.
//!
//! Residual training only needs input points, so dataset generation is just
//! sampling within profiled bounds. Supervised baselines additionally solve
//! the loop with Newton for every sample to produce labels, which is orders
//! of magnitude slower; `generate_labeled` captures that cost in
//! `generation_time`.

mod sobol;

pub use sobol::MAX_DIMENSIONS;

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::matrix::Matrix;
use crate::newton::{newton_solve, ToleranceSpec};
use crate::problems::{ResidualSystem, TrajectoryFn};

/// Per-dimension closed sampling intervals, with an optional symmetric
/// widening margin.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBounds {
    dims: Vec<(f64, f64)>,
    pub margin_fraction: f64,
}

impl InputBounds {
    pub fn new(dims: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(lo, hi)) in dims.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::Config(format!(
                    "bounds for dimension {i} are inverted: [{lo}, {hi}]"
                )));
            }
        }
        Ok(InputBounds { dims, margin_fraction: 0.0 })
    }

    pub fn with_margin(mut self, margin_fraction: f64) -> Self {
        self.margin_fraction = margin_fraction;
        self
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn raw(&self) -> &[(f64, f64)] {
        &self.dims
    }

    /// Bounds after applying the margin: each side moves out by
    /// `margin_fraction * width / 2`.
    pub fn widened(&self) -> Vec<(f64, f64)> {
        self.dims
            .iter()
            .map(|&(lo, hi)| {
                let pad = self.margin_fraction * (hi - lo) / 2.0;
                (lo - pad, hi + pad)
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let widened = self.widened();
        x.iter().zip(widened.iter()).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Sobol,
    Lhs,
    Trajectory,
}

impl SampleMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            SampleMethod::Sobol => "sobol",
            SampleMethod::Lhs => "lhs",
            SampleMethod::Trajectory => "trajectory",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sobol" => Ok(SampleMethod::Sobol),
            "lhs" => Ok(SampleMethod::Lhs),
            "trajectory" => Ok(SampleMethod::Trajectory),
            other => Err(Error::Parse(format!("unknown sample method `{other}`"))),
        }
    }
}

/// Sampled inputs, optional Newton labels, and how long generation took.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Matrix,
    pub labels: Option<Matrix>,
    pub generation_time: Duration,
    pub method: SampleMethod,
}

impl Dataset {
    pub fn inputs_only(inputs: Matrix, method: SampleMethod, generation_time: Duration) -> Self {
        Dataset { inputs, labels: None, generation_time, method }
    }

    pub fn len(&self) -> usize {
        self.inputs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Evaluates the trajectory on a uniform grid over `t_span` (endpoints
/// included) and records per-dimension extremes.
pub fn profile_bounds(
    system: &ResidualSystem,
    trajectory_fn: &TrajectoryFn,
    t_span: (f64, f64),
    num_steps: usize,
) -> Result<InputBounds> {
    if num_steps < 2 {
        return Err(Error::Config(format!("profiling needs at least 2 steps, got {num_steps}")));
    }
    let (t0, t1) = t_span;
    let mut dims = vec![(f64::INFINITY, f64::NEG_INFINITY); system.n_in()];
    for i in 0..num_steps {
        let t = t0 + (t1 - t0) * i as f64 / (num_steps - 1) as f64;
        let x = trajectory_fn(t);
        if x.len() != system.n_in() {
            return Err(Error::Shape(format!(
                "trajectory produced {} values, system `{}` expects {}",
                x.len(),
                system.name(),
                system.n_in()
            )));
        }
        for (d, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "non-finite input in dimension {d} at t = {t}"
                )));
            }
            if v < dims[d].0 {
                dims[d].0 = v;
            }
            if v > dims[d].1 {
                dims[d].1 = v;
            }
        }
    }
    InputBounds::new(dims)
}

/// Sobol points mapped affinely into the (widened) bounds. Deterministic;
/// `skip` drops the leading points of the sequence (the first point is the
/// all-zeros corner, a degenerate Newton seed, so callers usually skip 1).
pub fn sobol_sample(bounds: &InputBounds, n: usize, skip: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let dim = bounds.dim();
    if dim == 0 || dim > MAX_DIMENSIONS {
        return Err(Error::Config(format!(
            "sobol sampling supports 1..={MAX_DIMENSIONS} dimensions, got {dim}"
        )));
    }
    let widened = bounds.widened();
    let mut unit = Vec::new();
    sobol::sobol_unit_points(dim, n, skip, &mut unit);
    let mut out = Matrix::zeros(dim, n);
    for j in 0..n {
        let dst = out.column_mut(j);
        for d in 0..dim {
            let (lo, hi) = widened[d];
            dst[d] = lo + unit[j * dim + d] * (hi - lo);
        }
    }
    Ok(out)
}

/// Latin hypercube sample: one point per axis-aligned stratum per dimension,
/// with seeded stratum permutations and in-stratum jitter.
pub fn lhs_sample(bounds: &InputBounds, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let dim = bounds.dim();
    let widened = bounds.widened();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Matrix::zeros(dim, n);
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        strata.shuffle(&mut rng);
        let (lo, hi) = widened[d];
        for (j, &stratum) in strata.iter().enumerate() {
            let u: f64 = rng.random_range(0.0..1.0);
            let unit = (stratum as f64 + u) / n as f64;
            out.set(d, j, lo + unit * (hi - lo));
        }
    }
    Ok(out)
}

/// Output-space bounds estimated from Newton solves at a few inputs; used to
/// seed label generation.
fn estimate_output_bounds(
    system: &ResidualSystem,
    inputs: &Matrix,
    tol: &ToleranceSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let n_out = system.n_out();
    let probes = inputs.cols().min(16);
    let stride = (inputs.cols() / probes.max(1)).max(1);
    let mut lo = vec![f64::INFINITY; n_out];
    let mut hi = vec![f64::NEG_INFINITY; n_out];
    let mut found = false;
    for p in 0..probes {
        let x = inputs.column(p * stride % inputs.cols());
        for _ in 0..3 {
            let y0: Vec<f64> = (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect();
            let result = newton_solve(system, x, &y0, tol);
            if result.converged {
                found = true;
                for (i, &v) in result.y.iter().enumerate() {
                    lo[i] = lo[i].min(v);
                    hi[i] = hi[i].max(v);
                }
                break;
            }
        }
    }
    if !found {
        return vec![(-2.0, 2.0); n_out];
    }
    lo.iter()
        .zip(hi.iter())
        .map(|(&l, &h)| {
            let pad = 0.5 * (h - l) + 0.1;
            (l - pad, h + pad)
        })
        .collect()
}

/// Solves the loop for every input column to produce labels. Newton is
/// seeded from the estimated output bounds and redrawn up to `restarts`
/// times per sample on failure; failed samples are dropped and counted.
///
/// Errors out when more than half of the samples fail.
pub fn generate_labeled(
    system: &ResidualSystem,
    inputs: &Matrix,
    tol: &ToleranceSpec,
    restarts: usize,
    seed: u64,
) -> Result<(Dataset, usize)> {
    if inputs.cols() == 0 {
        return Err(Error::Config("need at least one input sample".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let output_bounds = estimate_output_bounds(system, inputs, tol, &mut rng);

    let mut kept_inputs = Vec::new();
    let mut labels = Vec::new();
    let mut failed = 0usize;
    for j in 0..inputs.cols() {
        let x = inputs.column(j);
        let mut solved = None;
        for _ in 0..=restarts {
            let y0: Vec<f64> = output_bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect();
            let result = newton_solve(system, x, &y0, tol);
            if result.converged {
                solved = Some(result.y);
                break;
            }
        }
        match solved {
            Some(y) => {
                kept_inputs.push(x.to_vec());
                labels.push(y);
            }
            None => failed += 1,
        }
    }
    if failed * 2 > inputs.cols() {
        return Err(Error::Generation(format!(
            "{failed} of {} samples failed all {} Newton attempts",
            inputs.cols(),
            restarts + 1
        )));
    }
    let dataset = Dataset {
        inputs: Matrix::from_columns(&kept_inputs)?,
        labels: Some(Matrix::from_columns(&labels)?),
        generation_time: start.elapsed(),
        method: SampleMethod::Sobol,
    };
    Ok((dataset, failed))
}

/// Clusters the label columns and returns, per cluster, the actual label
/// nearest that cluster's centroid. These are the guidance targets that
/// steer semi-supervised training toward one solution branch.
pub fn labels_to_cluster_targets(dataset: &Dataset, k: usize, seed: u64) -> Result<Matrix> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("clustering targets need a labeled dataset".into()))?;
    if k == 0 {
        return Err(Error::Config("need at least one cluster".into()));
    }
    if k > labels.cols() {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {} labels",
            labels.cols()
        )));
    }
    let model = crate::multimodel::kmeans(labels, k, seed, 200)?;
    let mut targets = Matrix::zeros(labels.rows(), k);
    for c in 0..k {
        let centroid = model.centroids.column(c);
        let mut best = None;
        for j in 0..labels.cols() {
            if model.assignments[j] != c {
                continue;
            }
            let d = crate::matrix::euclidean_distance(labels.column(j), centroid);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        let (_, j) = best.expect("kmeans leaves no cluster empty");
        targets.column_mut(c).copy_from_slice(labels.column(j));
    }
    Ok(targets)
}

/// Writes a dataset as CSV (`x0..`, optional `y0..`; one sample per row)
/// plus a sidecar `.meta` key-value file.
pub fn save_dataset(dataset: &Dataset, path: &Path, seed: u64) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let n_in = dataset.inputs.rows();
    let mut header: Vec<String> = (0..n_in).map(|d| format!("x{d}")).collect();
    if let Some(labels) = &dataset.labels {
        header.extend((0..labels.rows()).map(|d| format!("y{d}")));
    }
    writeln!(w, "{}", header.join(","))?;
    for j in 0..dataset.len() {
        let mut row: Vec<String> =
            dataset.inputs.column(j).iter().map(|&v| format_f64(v)).collect();
        if let Some(labels) = &dataset.labels {
            row.extend(labels.column(j).iter().map(|&v| format_f64(v)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    drop(w);

    let mut meta = std::collections::BTreeMap::new();
    meta.insert("method".to_string(), dataset.method.tag().to_string());
    meta.insert("seed".to_string(), seed.to_string());
    meta.insert("samples".to_string(), dataset.len().to_string());
    meta.insert("n_in".to_string(), n_in.to_string());
    meta.insert(
        "n_out".to_string(),
        dataset.labels.as_ref().map_or(0, Matrix::rows).to_string(),
    );
    meta.insert(
        "generation_time_ms".to_string(),
        format!("{:.6}", dataset.generation_time.as_secs_f64() * 1e3),
    );
    crate::io::save_key_values(&meta_path(path), &meta)
}

pub fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
    let columns: Vec<&str> = header.split(',').collect();
    let n_in = columns.iter().take_while(|c| c.starts_with('x')).count();
    let n_out = columns.len() - n_in;
    if n_in == 0 || !columns[n_in..].iter().all(|c| c.starts_with('y')) {
        return Err(Error::Parse(format!("bad dataset header `{header}`")));
    }

    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            line.split(',').map(str::trim).map(str::parse).collect();
        let values = values.map_err(|_| Error::Parse(format!("bad float in `{line}`")))?;
        if values.len() != columns.len() {
            return Err(Error::Parse(format!(
                "row has {} values, header declares {}",
                values.len(),
                columns.len()
            )));
        }
        inputs.push(values[..n_in].to_vec());
        if n_out > 0 {
            labels.push(values[n_in..].to_vec());
        }
    }
    if inputs.is_empty() {
        return Err(Error::Parse("dataset has no samples".into()));
    }

    let meta = crate::io::load_key_values(&meta_path(path)).ok();
    let method = meta
        .as_ref()
        .and_then(|m| m.get("method"))
        .map(|t| SampleMethod::from_tag(t))
        .transpose()?
        .unwrap_or(SampleMethod::Sobol);
    let generation_time = meta
        .as_ref()
        .and_then(|m| m.get("generation_time_ms"))
        .and_then(|v| v.parse::<f64>().ok())
        .map(|ms| Duration::from_secs_f64(ms / 1e3))
        .unwrap_or_default();

    Ok(Dataset {
        inputs: Matrix::from_columns(&inputs)?,
        labels: if n_out > 0 { Some(Matrix::from_columns(&labels)?) } else { None },
        generation_time,
        method,
    })
}
