//! Multiple surrogates for ambiguous and path-connected solution sets.
//!
//! A single network can only represent one solution branch. When the
//! solution set forms a connected manifold the simulation can drift between
//! branches, so several networks are trained on k-means partitions of the
//! output space and the one whose training centroid lies closest to the
//! previous accepted output makes the next prediction. Piecewise residuals
//! instead get one network per branch, selected by the residual's own branch
//! condition.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{euclidean_distance, Matrix};
use crate::nn::{load_network, save_network, MlpNetwork};
use crate::problems::{Problem, ResidualSystem};
use crate::sampling::Dataset;
use crate::training::{two_phase_train, TrainConfig, TrainReport};

/// k-means clustering result over output-space points (one column each).
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each Lloyd assignment pass; non-increasing.
    pub inertia_history: Vec<f64>,
    pub seed: u64,
}

/// Lloyd iterations from a k-means++ style seeded initialization. Runs until
/// the assignments stop changing or `max_iter` passes. Empty clusters are
/// re-seeded from the point farthest from its assigned centroid.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    let n = points.cols();
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Config(format!("cannot form {k} clusters from {n} points")));
    }
    let dim = points.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: first centroid uniform, the rest weighted by the
    // squared distance to the nearest centroid so far.
    let mut centroids = Matrix::zeros(dim, k);
    let first = rng.random_range(0..n);
    centroids.column_mut(0).copy_from_slice(points.column(first));
    let mut nearest_sq = vec![f64::INFINITY; n];
    for c in 1..k {
        for j in 0..n {
            let d = euclidean_distance(points.column(j), centroids.column(c - 1));
            nearest_sq[j] = nearest_sq[j].min(d * d);
        }
        let total: f64 = nearest_sq.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (j, &w) in nearest_sq.iter().enumerate() {
                if target < w {
                    pick = j;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.column_mut(c).copy_from_slice(points.column(chosen));
    }

    let mut assignments = vec![0usize; n];
    let mut inertia_history = Vec::new();
    for _ in 0..max_iter {
        // Assign each point to its nearest centroid.
        let mut changed = false;
        let mut pass_inertia = 0.0;
        for j in 0..n {
            let p = points.column(j);
            let mut best = 0usize;
            let mut best_d = euclidean_distance(p, centroids.column(0));
            for c in 1..k {
                let d = euclidean_distance(p, centroids.column(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            pass_inertia += best_d * best_d;
            if assignments[j] != best {
                assignments[j] = best;
                changed = true;
            }
        }
        inertia_history.push(pass_inertia);

        // Recompute centroids; re-seed empties from the farthest point.
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::zeros(dim, k);
        for j in 0..n {
            let c = assignments[j];
            counts[c] += 1;
            let dst = sums.column_mut(c);
            for (s, &v) in dst.iter_mut().zip(points.column(j).iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        let da = euclidean_distance(points.column(a), centroids.column(assignments[a]));
                        let db = euclidean_distance(points.column(b), centroids.column(assignments[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids.column_mut(c).copy_from_slice(points.column(farthest));
                changed = true;
            } else {
                let inv = 1.0 / counts[c] as f64;
                let src = sums.column(c);
                let dst = centroids.column_mut(c);
                for (d, &s) in dst.iter_mut().zip(src.iter()) {
                    *d = s * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Final assignment pass so every point ends on its nearest centroid.
    for j in 0..n {
        let p = points.column(j);
        let mut best = 0usize;
        let mut best_d = euclidean_distance(p, centroids.column(0));
        for c in 1..k {
            let d = euclidean_distance(p, centroids.column(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments[j] = best;
    }
    let inertia = (0..n)
        .map(|j| {
            let d = euclidean_distance(points.column(j), centroids.column(assignments[j]));
            d * d
        })
        .sum();

    Ok(ClusterModel { centroids, assignments, inertia, inertia_history, seed })
}

/// How a bundle picks the network for the next prediction.
#[derive(Debug, Clone)]
pub enum Selector {
    Single,
    /// Nearest centroid to the previous accepted output.
    ByCentroid(Matrix),
    /// The residual's own branch condition indexes the networks.
    ByBranch,
}

impl Selector {
    pub fn tag(&self) -> &'static str {
        match self {
            Selector::Single => "single",
            Selector::ByCentroid(_) => "by-centroid",
            Selector::ByBranch => "by-branch",
        }
    }
}

/// One or more trained networks plus the metadata needed to pick between
/// them during simulation.
#[derive(Debug, Clone)]
pub struct SurrogateBundle {
    pub networks: Vec<MlpNetwork>,
    pub selector: Selector,
    pub problem: String,
}

impl SurrogateBundle {
    pub fn single(network: MlpNetwork, problem: impl Into<String>) -> Self {
        SurrogateBundle { networks: vec![network], selector: Selector::Single, problem: problem.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks.is_empty() {
            return Err(Error::Config("bundle holds no networks".into()));
        }
        match &self.selector {
            Selector::Single => {
                if self.networks.len() != 1 {
                    return Err(Error::Config(format!(
                        "single selector with {} networks",
                        self.networks.len()
                    )));
                }
            }
            Selector::ByCentroid(centroids) => {
                if centroids.cols() != self.networks.len() {
                    return Err(Error::Config(format!(
                        "{} centroids for {} networks",
                        centroids.cols(),
                        self.networks.len()
                    )));
                }
            }
            Selector::ByBranch => {}
        }
        Ok(())
    }
}

/// Nearest-centroid selection; ties break toward the lowest index.
pub fn select_by_centroid(bundle: &SurrogateBundle, previous_output: &[f64]) -> Result<usize> {
    let centroids = match &bundle.selector {
        Selector::ByCentroid(c) => c,
        other => {
            return Err(Error::Selection(format!(
                "bundle selector is {}, not by-centroid",
                other.tag()
            )))
        }
    };
    let mut best = 0usize;
    let mut best_d = euclidean_distance(previous_output, centroids.column(0));
    for c in 1..centroids.cols() {
        let d = euclidean_distance(previous_output, centroids.column(c));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    Ok(best)
}

/// Branch-conditioned selection: the network index is the branch id of `x`.
pub fn select_by_branch(bundle: &SurrogateBundle, system: &ResidualSystem, x: &[f64]) -> Result<usize> {
    let branch = system
        .branch_of(x)
        .ok_or_else(|| Error::Selection(format!("system `{}` has no branch condition", system.name())))?;
    if branch >= bundle.networks.len() {
        return Err(Error::Selection(format!(
            "branch {branch} has no trained network (bundle holds {})",
            bundle.networks.len()
        )));
    }
    Ok(branch)
}

/// Clusters the labels of `dataset` into `k` regions and trains one network
/// per region with the two-phase schedule: supervised toward the cluster's
/// own labels first, then residual refinement on the cluster's inputs.
pub fn train_per_cluster(
    problem: &Problem,
    dataset: &Dataset,
    k: usize,
    layer_sizes: &[usize],
    config: &TrainConfig,
) -> Result<(SurrogateBundle, Vec<TrainReport>)> {
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("per-cluster training needs a labeled dataset".into()))?;
    let clusters = kmeans(labels, k, config.seed, 200)?;

    let mut networks = Vec::with_capacity(k);
    let mut reports = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> =
            (0..dataset.len()).filter(|&j| clusters.assignments[j] == c).collect();
        if members.len() < config.batch_size {
            return Err(Error::Config(format!(
                "cluster {c} has {} points, below the batch size {}; try a smaller k",
                members.len(),
                config.batch_size
            )));
        }
        let guidance = Dataset {
            inputs: dataset.inputs.select_columns(&members),
            labels: Some(labels.select_columns(&members)),
            generation_time: std::time::Duration::ZERO,
            method: dataset.method,
        };
        let net = crate::nn::init_network(
            layer_sizes,
            crate::nn::Activation::ReLU,
            config.seed.wrapping_add(c as u64),
        )?;
        let (trained, report) = two_phase_train(&problem.system, &guidance, &guidance, net, config)?;
        networks.push(trained);
        reports.push(report);
    }

    let bundle = SurrogateBundle {
        networks,
        selector: Selector::ByCentroid(clusters.centroids),
        problem: problem.system.name().to_string(),
    };
    bundle.validate()?;
    Ok((bundle, reports))
}

/// Trains one network per residual branch, each against its fixed-branch
/// system over the same input dataset.
///
/// In two-phase mode the guidance labels come from one classical simulation
/// of each branch system over the problem's time span, which pins every
/// network to the solution branch the reference simulation tracks. Plain
/// residual mode trains each branch unguided.
pub fn train_per_branch(
    problem: &Problem,
    dataset: &Dataset,
    layer_sizes: &[usize],
    config: &TrainConfig,
) -> Result<(SurrogateBundle, Vec<TrainReport>)> {
    let branches = problem
        .branches
        .as_ref()
        .ok_or_else(|| Error::Config(format!("problem `{}` has no branches", problem.system.name())))?;
    let two_phase = matches!(config.loss_mode, crate::training::LossMode::TwoPhase { .. });
    let mut networks = Vec::with_capacity(branches.len());
    let mut reports = Vec::with_capacity(branches.len());
    for (b, branch_system) in branches.iter().enumerate() {
        let net = crate::nn::init_network(
            layer_sizes,
            crate::nn::Activation::ReLU,
            config.seed.wrapping_add(b as u64),
        )?;
        let (trained, report) = if two_phase {
            let branch_problem = Problem {
                system: branch_system.clone(),
                driver: problem.driver.clone(),
                t_span: problem.t_span,
                initial_guess: problem.initial_guess.clone(),
                branches: None,
            };
            let steps = dataset.len().clamp(64, 512);
            let sim = crate::simulate::SimConfig::for_problem(&branch_problem, steps)?;
            let reference = crate::simulate::simulate_classical(&branch_problem, &sim)?;
            let guidance = Dataset {
                inputs: reference.x_values,
                labels: Some(reference.y_values),
                generation_time: std::time::Duration::ZERO,
                method: crate::sampling::SampleMethod::Trajectory,
            };
            two_phase_train(branch_system, &guidance, dataset, net, config)?
        } else {
            crate::training::train(branch_system, dataset, None, net, config)?
        };
        networks.push(trained);
        reports.push(report);
    }
    let bundle = SurrogateBundle {
        networks,
        selector: Selector::ByBranch,
        problem: problem.system.name().to_string(),
    };
    bundle.validate()?;
    Ok((bundle, reports))
}

/// Projects output-space points onto their top two principal components.
///
/// Returns the `2 x N` projection, the explained-variance fractions, and a
/// flag that is set when the data is effectively rank one (the second
/// component is then zero).
pub fn pca_project_2d(points: &Matrix) -> Result<(Matrix, [f64; 2], bool)> {
    let n = points.cols();
    let dim = points.rows();
    if n < 3 {
        return Err(Error::Config(format!("PCA needs at least 3 points, got {n}")));
    }
    if dim < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 dimensions, got {dim}")));
    }

    // Mean-center.
    let mut centered = points.clone();
    let mut mean = vec![0.0; dim];
    for j in 0..n {
        for (m, &v) in mean.iter_mut().zip(points.column(j).iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for j in 0..n {
        let col = centered.column_mut(j);
        for (v, &m) in col.iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }

    // Covariance (dim x dim).
    let mut cov = centered.matmul_transpose(&centered)?;
    let scale = 1.0 / (n as f64 - 1.0);
    for v in cov.data_mut() {
        *v *= scale;
    }
    let trace: f64 = (0..dim).map(|i| cov.get(i, i)).sum();

    let mut components = Matrix::zeros(dim, 2);
    let mut eigenvalues = [0.0f64; 2];
    let mut rank_warning = false;
    for comp in 0..2 {
        let (vector, value) = power_iteration(&cov, comp);
        if comp == 1 && (value <= 1e-12 * eigenvalues[0].max(1e-300) || value <= 0.0) {
            rank_warning = true;
            eigenvalues[1] = 0.0;
            break;
        }
        eigenvalues[comp] = value;
        components.column_mut(comp).copy_from_slice(&vector);
        // Deflate: cov -= value * v vᵀ
        for i in 0..dim {
            for j in 0..dim {
                let v = cov.get(i, j) - value * vector[i] * vector[j];
                cov.set(i, j, v);
            }
        }
    }

    let projection = components.transpose_matmul(&centered)?;
    let fractions = if trace > 0.0 {
        [eigenvalues[0] / trace, eigenvalues[1] / trace]
    } else {
        [0.0, 0.0]
    };
    Ok((projection, fractions, rank_warning))
}

/// Power iteration for the dominant eigenpair of a symmetric matrix, with a
/// deterministic start and a sign convention that makes the
/// largest-magnitude entry positive.
fn power_iteration(matrix: &Matrix, offset: usize) -> (Vec<f64>, f64) {
    let dim = matrix.rows();
    let mut v: Vec<f64> = (0..dim)
        .map(|i| (0.7 + (i + offset) as f64 * 0.37).sin() + 1e-3)
        .collect();
    normalize(&mut v);
    let mut value = 0.0;
    for _ in 0..1000 {
        let mut next = vec![0.0; dim];
        for j in 0..dim {
            for i in 0..dim {
                next[i] += matrix.get(i, j) * v[j];
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (v, 0.0);
        }
        for x in &mut next {
            *x /= norm;
        }
        let delta: f64 = next.iter().zip(v.iter()).map(|(a, b)| (a - b).abs()).sum();
        let flipped: f64 = next.iter().zip(v.iter()).map(|(a, b)| (a + b).abs()).sum();
        v = next;
        value = norm;
        if delta < 1e-14 || flipped < 1e-14 {
            break;
        }
    }
    // Sign convention.
    let lead = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if v[lead] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    (v, value)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

/// Saves a bundle as a directory: a key-value manifest, one network file per
/// member, and the centroid matrix as CSV when present.
pub fn save_bundle(bundle: &SurrogateBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut manifest = std::collections::BTreeMap::new();
    manifest.insert("problem".to_string(), bundle.problem.clone());
    manifest.insert("selector".to_string(), bundle.selector.tag().to_string());
    manifest.insert("networks".to_string(), bundle.networks.len().to_string());
    crate::io::save_key_values(&dir.join("bundle.meta"), &manifest)?;

    for (i, net) in bundle.networks.iter().enumerate() {
        save_network(net, &dir.join(format!("network{i}.mlp")))?;
    }
    if let Selector::ByCentroid(centroids) = &bundle.selector {
        let file = std::fs::File::create(dir.join("centroids.csv"))?;
        let mut w = std::io::BufWriter::new(file);
        use std::io::Write;
        for c in 0..centroids.cols() {
            let row: Vec<String> =
                centroids.column(c).iter().map(|&v| crate::io::format_f64(v)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<SurrogateBundle> {
    let manifest = crate::io::load_key_values(&dir.join("bundle.meta"))?;
    let problem = manifest
        .get("problem")
        .ok_or_else(|| Error::Parse("bundle manifest lacks `problem`".into()))?
        .clone();
    let selector_tag = manifest
        .get("selector")
        .ok_or_else(|| Error::Parse("bundle manifest lacks `selector`".into()))?;
    let count: usize = manifest
        .get("networks")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse("bundle manifest lacks a valid `networks` count".into()))?;

    let mut networks = Vec::with_capacity(count);
    for i in 0..count {
        networks.push(load_network(&dir.join(format!("network{i}.mlp")))?);
    }
    let selector = match selector_tag.as_str() {
        "single" => Selector::Single,
        "by-branch" => Selector::ByBranch,
        "by-centroid" => {
            let text = std::fs::read_to_string(dir.join("centroids.csv"))?;
            let mut columns = Vec::new();
            for line in text.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                let values: std::result::Result<Vec<f64>, _> =
                    line.split(',').map(str::trim).map(str::parse).collect();
                columns.push(values.map_err(|_| Error::Parse(format!("bad centroid row `{line}`")))?);
            }
            Selector::ByCentroid(Matrix::from_columns(&columns)?)
        }
        other => return Err(Error::Parse(format!("unknown selector tag `{other}`"))),
    };
    let bundle = SurrogateBundle { networks, selector, problem };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points_1d(values: &[f64]) -> Matrix {
        Matrix::from_columns(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn kmeans_separates_two_pairs() {
        let pts = points_1d(&[0.0, 0.1, 10.0, 10.1]);
        let model = kmeans(&pts, 2, 3, 100).unwrap();
        let mut centers: Vec<f64> = (0..2).map(|c| model.centroids.get(0, c)).collect();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((centers[0] - 0.05).abs() < 1e-12);
        assert!((centers[1] - 10.05).abs() < 1e-12);
    }

    #[test]
    fn kmeans_k1_is_the_mean() {
        let pts = points_1d(&[1.0, 2.0, 6.0]);
        let model = kmeans(&pts, 1, 0, 100).unwrap();
        assert!((model.centroids.get(0, 0) - 3.0).abs() < 1e-12);
        assert!(model.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn kmeans_k_equals_n_has_zero_inertia() {
        let pts = points_1d(&[1.0, 5.0, -3.0, 9.0]);
        let model = kmeans(&pts, 4, 1, 100).unwrap();
        assert_eq!(model.inertia, 0.0);
        let mut seen: Vec<usize> = model.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn kmeans_rejects_k_above_n() {
        let pts = points_1d(&[1.0, 2.0]);
        assert!(kmeans(&pts, 3, 0, 100).is_err());
        assert!(kmeans(&pts, 0, 0, 100).is_err());
    }

    #[test]
    fn kmeans_assignment_is_a_fixpoint() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cols: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let pts = Matrix::from_columns(&cols).unwrap();
        for k in [1usize, 2, 5, 9] {
            let model = kmeans(&pts, k, 13, 300).unwrap();
            for j in 0..pts.cols() {
                let assigned = euclidean_distance(
                    pts.column(j),
                    model.centroids.column(model.assignments[j]),
                );
                for c in 0..k {
                    let other = euclidean_distance(pts.column(j), model.centroids.column(c));
                    assert!(
                        assigned <= other + 1e-12,
                        "k={k} point {j}: assigned {assigned} > cluster {c} at {other}"
                    );
                }
            }
        }
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let pts = points_1d(&[0.4, 0.5, 3.3, 3.1, -2.0, -2.2]);
        let a = kmeans(&pts, 3, 5, 100).unwrap();
        let b = kmeans(&pts, 3, 5, 100).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.centroids, b.centroids);
    }

    fn centroid_bundle(centroids: Vec<Vec<f64>>) -> SurrogateBundle {
        let n = centroids.len();
        let net = crate::nn::init_network(&[2, 2], crate::nn::Activation::ReLU, 0).unwrap();
        SurrogateBundle {
            networks: vec![net; n],
            selector: Selector::ByCentroid(Matrix::from_columns(&centroids).unwrap()),
            problem: "test".into(),
        }
    }

    #[test]
    fn select_by_centroid_exact_and_ties() {
        let bundle = centroid_bundle(vec![
            vec![5.0, 5.0],
            vec![1.0, 0.0],
            vec![5.0, -5.0],
            vec![-1.0, 0.0],
        ]);
        // Exactly on a centroid.
        assert_eq!(select_by_centroid(&bundle, &[5.0, -5.0]).unwrap(), 2);
        // Equidistant between centroids 1 and 3: lowest index wins.
        assert_eq!(select_by_centroid(&bundle, &[0.0, 0.0]).unwrap(), 1);
        assert_eq!(select_by_centroid(&bundle, &[4.0, 4.0]).unwrap(), 0);
    }

    #[test]
    fn kmeans_inertia_history_is_non_increasing() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cols: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let pts = Matrix::from_columns(&cols).unwrap();
        let model = kmeans(&pts, 6, 21, 300).unwrap();
        assert!(!model.inertia_history.is_empty());
        for w in model.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "inertia grew: {:?}", model.inertia_history);
        }
    }

    #[test]
    fn select_by_centroid_is_scale_invariant() {
        let bundle = centroid_bundle(vec![vec![1.0, 1.0], vec![4.0, -2.0], vec![-3.0, 0.5]]);
        let doubled = centroid_bundle(vec![vec![2.0, 2.0], vec![8.0, -4.0], vec![-6.0, 1.0]]);
        for probe in [[0.5, 0.5], [3.0, -1.0], [-2.0, 0.0], [10.0, 10.0]] {
            let a = select_by_centroid(&bundle, &probe).unwrap();
            let scaled = [probe[0] * 2.0, probe[1] * 2.0];
            let b = select_by_centroid(&doubled, &scaled).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn select_by_branch_uses_the_residual_condition() {
        let problem = crate::problems::piecewiseloop(1.0, 1.2).unwrap();
        let net = crate::nn::init_network(&[2, 1], crate::nn::Activation::ReLU, 0).unwrap();
        let bundle = SurrogateBundle {
            networks: vec![net.clone(), net],
            selector: Selector::ByBranch,
            problem: "piecewiseloop".into(),
        };
        let sys = &problem.system;
        assert_eq!(select_by_branch(&bundle, sys, &[0.5, 2.0, 1.0]).unwrap(), 0);
        assert_eq!(select_by_branch(&bundle, sys, &[1.1, 2.0, 1.0]).unwrap(), 1);
        assert_eq!(select_by_branch(&bundle, sys, &[1.2, 2.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn select_by_branch_rejects_missing_networks() {
        let problem = crate::problems::piecewiseloop(1.0, 1.2).unwrap();
        let net = crate::nn::init_network(&[2, 1], crate::nn::Activation::ReLU, 0).unwrap();
        let bundle = SurrogateBundle {
            networks: vec![net],
            selector: Selector::ByBranch,
            problem: "piecewiseloop".into(),
        };
        assert!(select_by_branch(&bundle, &problem.system, &[1.1, 2.0, 1.0]).is_err());
    }

    #[test]
    fn pca_line_in_3d_is_rank_one() {
        let cols: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.25 - 5.0;
                vec![2.0 * t, -t, 0.5 * t]
            })
            .collect();
        let pts = Matrix::from_columns(&cols).unwrap();
        let (_proj, fractions, rank_warning) = pca_project_2d(&pts).unwrap();
        assert!(fractions[0] >= 0.999, "first component explains {}", fractions[0]);
        assert!(rank_warning);
    }

    #[test]
    fn pca_isotropic_gaussian_splits_evenly() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Box-Muller pairs give a seeded 2-D standard normal sample.
        let cols: Vec<Vec<f64>> = (0..4000)
            .map(|_| {
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = (-2.0 * u1.ln()).sqrt();
                vec![r * u2.cos(), r * u2.sin()]
            })
            .collect();
        let pts = Matrix::from_columns(&cols).unwrap();
        let (_proj, fractions, _) = pca_project_2d(&pts).unwrap();
        assert!((fractions[0] - 0.5).abs() < 0.1, "{fractions:?}");
        assert!((fractions[1] - 0.5).abs() < 0.1, "{fractions:?}");
    }

    #[test]
    fn pca_projection_preserves_planar_distances() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Points on a 2-D plane embedded in 4-D via an orthonormal basis.
        let b1 = [0.5, 0.5, 0.5, 0.5];
        let b2 = [0.5, -0.5, 0.5, -0.5];
        let coords: Vec<(f64, f64)> =
            (0..60).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let cols: Vec<Vec<f64>> = coords
            .iter()
            .map(|&(a, b)| (0..4).map(|i| a * b1[i] + b * b2[i]).collect())
            .collect();
        let pts = Matrix::from_columns(&cols).unwrap();
        let (proj, fractions, _) = pca_project_2d(&pts).unwrap();
        assert!(fractions[0] + fractions[1] > 0.999);
        for j in (0..60).step_by(7) {
            for l in (1..60).step_by(11) {
                let original = euclidean_distance(pts.column(j), pts.column(l));
                let projected = euclidean_distance(proj.column(j), proj.column(l));
                assert!(
                    (original - projected).abs() < 1e-9,
                    "pair ({j},{l}): {original} vs {projected}"
                );
            }
        }
    }

    #[test]
    fn bundle_roundtrip_through_directory() {
        let dir = std::env::temp_dir().join("loopsurro-bundle-test");
        let _ = std::fs::remove_dir_all(&dir);
        let bundle = centroid_bundle(vec![vec![1.0, 2.0], vec![-0.5, 0.25]]);
        save_bundle(&bundle, &dir).unwrap();
        let back = load_bundle(&dir).unwrap();
        assert_eq!(back.networks, bundle.networks);
        assert_eq!(back.problem, bundle.problem);
        match (&back.selector, &bundle.selector) {
            (Selector::ByCentroid(a), Selector::ByCentroid(b)) => assert_eq!(a, b),
            _ => panic!("selector type changed"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
