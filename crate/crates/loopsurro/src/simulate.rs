//! Hybrid time-stepped simulation.
//!
//! Each step evaluates the preceding equations to get `x`, resolves the loop
//! (classically with Newton, or by surrogate prediction with error-controlled
//! fallback), and advances any coupled ODE state by explicit Euler. A
//! surrogate prediction is accepted only when its residual norm passes the
//! fallback tolerance; otherwise Newton runs with the prediction as its
//! initial guess, so trajectory accuracy never depends on surrogate quality.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::matrix::{inf_norm, Matrix};
use crate::multimodel::{select_by_branch, select_by_centroid, Selector, SurrogateBundle};
use crate::newton::{newton_solve, NewtonResult, ToleranceSpec};
use crate::nn::forward;
use crate::problems::{Driver, Problem};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t_span: (f64, f64),
    pub num_steps: usize,
    pub newton_tol: ToleranceSpec,
    /// Seed Newton with the previous step's solution instead of the
    /// problem's fixed initial guess.
    pub warm_start: bool,
}

impl SimConfig {
    pub fn new(t_span: (f64, f64), num_steps: usize) -> Result<Self> {
        if !(t_span.0 < t_span.1) {
            return Err(Error::Config(format!(
                "time span must satisfy t0 < t1, got [{}, {}]",
                t_span.0, t_span.1
            )));
        }
        if num_steps == 0 {
            return Err(Error::Config("need at least one step".into()));
        }
        Ok(SimConfig {
            t_span,
            num_steps,
            newton_tol: ToleranceSpec::default(),
            warm_start: true,
        })
    }

    pub fn for_problem(problem: &Problem, num_steps: usize) -> Result<Self> {
        SimConfig::new(problem.t_span, num_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSource {
    /// Accepted surrogate prediction.
    Surrogate,
    /// Surrogate prediction rejected; Newton polished it.
    Fallback,
    /// Classical Newton solve.
    Newton,
}

impl StepSource {
    pub fn tag(&self) -> &'static str {
        match self {
            StepSource::Surrogate => "surrogate",
            StepSource::Fallback => "fallback",
            StepSource::Newton => "newton",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub source: StepSource,
    pub iterations: usize,
    pub residual_norm: f64,
    /// Model picked by the bundle selector, when one was involved.
    pub network_index: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x_values: Matrix,
    pub y_values: Matrix,
    pub steps: Vec<StepRecord>,
    pub wall_time: Duration,
    pub fallback_rate: f64,
}

impl Trajectory {
    pub fn total_newton_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

fn fail_at(step: usize, result: &NewtonResult) -> Error {
    Error::Simulation {
        step,
        reason: format!(
            "Newton failed ({:?}) with residual norm {:.3e} after {} iterations",
            result.failure, result.residual_norm, result.iterations
        ),
    }
}

/// Per-step loop resolution strategy.
enum LoopSolver<'a> {
    Classical,
    Surrogate { bundle: &'a SurrogateBundle, fallback_tol: ToleranceSpec, previous: Vec<f64> },
}

/// Shared stepping core for the classical and surrogate modes.
fn run_simulation(
    problem: &Problem,
    config: &SimConfig,
    mut solver: LoopSolver<'_>,
) -> Result<Trajectory> {
    let system = &problem.system;
    let (t0, t1) = config.t_span;
    let records = config.num_steps + 1;
    let dt = (t1 - t0) / config.num_steps as f64;

    let start = Instant::now();
    let mut times = Vec::with_capacity(records);
    let mut x_values = Matrix::zeros(system.n_in(), records);
    let mut y_values = Matrix::zeros(system.n_out(), records);
    let mut steps = Vec::with_capacity(records);

    let mut ode_state = match &problem.driver {
        Driver::Ode { state0, .. } => state0.clone(),
        Driver::Trajectory(_) => Vec::new(),
    };
    let mut previous_y: Option<Vec<f64>> = None;

    for i in 0..records {
        let t = t0 + dt * i as f64;
        let x = match &problem.driver {
            Driver::Trajectory(f) => f(t),
            Driver::Ode { to_input, .. } => to_input(&ode_state, t),
        };

        let (y, record) = match &mut solver {
            LoopSolver::Classical => {
                let seed = match (&previous_y, config.warm_start) {
                    (Some(prev), true) => prev.clone(),
                    _ => problem.initial_guess.clone(),
                };
                let result = newton_solve(system, &x, &seed, &config.newton_tol);
                if !result.converged {
                    return Err(fail_at(i, &result));
                }
                let record = StepRecord {
                    source: StepSource::Newton,
                    iterations: result.iterations,
                    residual_norm: result.residual_norm,
                    network_index: None,
                };
                (result.y, record)
            }
            LoopSolver::Surrogate { bundle, fallback_tol, previous } => {
                let index = match &bundle.selector {
                    Selector::Single => 0,
                    Selector::ByCentroid(_) => select_by_centroid(bundle, previous)?,
                    Selector::ByBranch => select_by_branch(bundle, system, &x)?,
                };
                let net = &bundle.networks[index];
                let sub: Vec<f64> = system.net_inputs().iter().map(|&d| x[d]).collect();
                let prediction = forward(net, &Matrix::from_vector(&sub))?;
                let yhat = prediction.column(0).to_vec();
                let residual = system.residual(&x, &yhat);
                let norm = inf_norm(&residual);
                let bound = fallback_tol.atol + fallback_tol.rtol * inf_norm(&yhat);

                let (y, record) = if norm <= bound {
                    let record = StepRecord {
                        source: StepSource::Surrogate,
                        iterations: 0,
                        residual_norm: norm,
                        network_index: Some(index),
                    };
                    (yhat, record)
                } else {
                    let result = newton_solve(system, &x, &yhat, &config.newton_tol);
                    if !result.converged {
                        return Err(fail_at(i, &result));
                    }
                    let record = StepRecord {
                        source: StepSource::Fallback,
                        iterations: result.iterations,
                        residual_norm: result.residual_norm,
                        network_index: Some(index),
                    };
                    (result.y, record)
                };
                previous.clear();
                previous.extend_from_slice(&y);
                (y, record)
            }
        };

        times.push(t);
        x_values.column_mut(i).copy_from_slice(&x);
        y_values.column_mut(i).copy_from_slice(&y);
        steps.push(record);

        // Advance the coupled state with the accepted solution.
        if i + 1 < records {
            if let Driver::Ode { deriv, .. } = &problem.driver {
                let ds = deriv(&ode_state, &y);
                for (s, d) in ode_state.iter_mut().zip(ds.iter()) {
                    *s += dt * d;
                }
            }
        }
        previous_y = Some(y);
    }

    let fallback_count = steps.iter().filter(|s| s.source == StepSource::Fallback).count();
    Ok(Trajectory {
        times,
        x_values,
        y_values,
        steps,
        wall_time: start.elapsed(),
        fallback_rate: fallback_count as f64 / records as f64,
    })
}

/// Reference simulation: Newton at every step.
pub fn simulate_classical(problem: &Problem, config: &SimConfig) -> Result<Trajectory> {
    run_simulation(problem, config, LoopSolver::Classical)
}

/// Surrogate simulation with error control. The previous-output state used
/// by centroid selection is initialized from one Newton solve at `t0`.
pub fn simulate_surrogate(
    problem: &Problem,
    bundle: &SurrogateBundle,
    fallback_tol: &ToleranceSpec,
    config: &SimConfig,
) -> Result<Trajectory> {
    bundle.validate()?;
    let system = &problem.system;
    if bundle.problem != system.name() {
        return Err(Error::Consistency(format!(
            "bundle was trained for `{}` but the problem is `{}`",
            bundle.problem,
            system.name()
        )));
    }
    let expected_in = system.net_inputs().len();
    for (i, net) in bundle.networks.iter().enumerate() {
        if net.input_dim() != expected_in || net.output_dim() != system.n_out() {
            return Err(Error::Config(format!(
                "network {i} is {}x{} but the system needs {}x{}",
                net.input_dim(),
                net.output_dim(),
                expected_in,
                system.n_out()
            )));
        }
    }

    let previous = match &bundle.selector {
        Selector::ByCentroid(_) => {
            let x0 = match &problem.driver {
                Driver::Trajectory(f) => f(config.t_span.0),
                Driver::Ode { state0, to_input, .. } => to_input(state0, config.t_span.0),
            };
            let result = newton_solve(system, &x0, &problem.initial_guess, &config.newton_tol);
            if !result.converged {
                return Err(fail_at(0, &result));
            }
            result.y
        }
        _ => vec![0.0; system.n_out()],
    };

    run_simulation(
        problem,
        config,
        LoopSolver::Surrogate { bundle, fallback_tol: *fallback_tol, previous },
    )
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub max_abs: f64,
    pub max_rel: f64,
    pub first_violation_step: Option<usize>,
}

/// Elementwise comparison of two trajectories on the same grid. A step
/// violates when `|a - b| > atol + rtol |a|` in any component.
pub fn compare_trajectories(
    a: &Trajectory,
    b: &Trajectory,
    tol: &ToleranceSpec,
) -> Result<CompareReport> {
    if a.times.len() != b.times.len() || a.times != b.times {
        return Err(Error::Consistency("trajectories use different time grids".into()));
    }
    if a.y_values.rows() != b.y_values.rows() {
        return Err(Error::Shape("trajectories have different output dimensions".into()));
    }
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    let mut first_violation_step = None;
    for j in 0..a.times.len() {
        let ya = a.y_values.column(j);
        let yb = b.y_values.column(j);
        let mut violated = false;
        for (&va, &vb) in ya.iter().zip(yb.iter()) {
            let abs = (va - vb).abs();
            max_abs = max_abs.max(abs);
            if va != 0.0 {
                max_rel = max_rel.max(abs / va.abs());
            }
            if abs > tol.atol + tol.rtol * va.abs() {
                violated = true;
            }
        }
        if violated && first_violation_step.is_none() {
            first_violation_step = Some(j);
        }
    }
    Ok(CompareReport { max_abs, max_rel, first_violation_step })
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub variant: String,
    pub run: usize,
    pub wall: Duration,
    pub total_newton_iterations: usize,
    pub fallback_rate: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub runs: Vec<BenchmarkRun>,
}

impl BenchmarkReport {
    pub fn variants(&self) -> Vec<String> {
        let mut names = Vec::new();
        for run in &self.runs {
            if !names.contains(&run.variant) {
                names.push(run.variant.clone());
            }
        }
        names
    }

    pub fn mean_wall(&self, variant: &str) -> Option<Duration> {
        let samples: Vec<Duration> = self
            .runs
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.wall)
            .collect();
        if samples.is_empty() {
            return None;
        }
        Some(samples.iter().sum::<Duration>() / samples.len() as u32)
    }

    pub fn mean_iterations(&self, variant: &str) -> Option<f64> {
        let samples: Vec<usize> = self
            .runs
            .iter()
            .filter(|r| r.variant == variant)
            .map(|r| r.total_newton_iterations)
            .collect();
        if samples.is_empty() {
            return None;
        }
        Some(samples.iter().sum::<usize>() as f64 / samples.len() as f64)
    }
}

/// Times the classical simulation against each surrogate variant, `repeats`
/// runs apiece, and collects wall clock, Newton-iteration totals, and
/// fallback rates.
pub fn benchmark(
    problem: &Problem,
    variants: &[(String, &SurrogateBundle, ToleranceSpec)],
    config: &SimConfig,
    repeats: usize,
) -> Result<BenchmarkReport> {
    if repeats == 0 {
        return Err(Error::Config("benchmark needs at least one repeat".into()));
    }
    let mut runs = Vec::new();
    for r in 0..repeats {
        let trajectory = simulate_classical(problem, config)?;
        runs.push(BenchmarkRun {
            variant: "classical".to_string(),
            run: r,
            wall: trajectory.wall_time,
            total_newton_iterations: trajectory.total_newton_iterations(),
            fallback_rate: 0.0,
        });
    }
    for (name, bundle, fallback_tol) in variants {
        for r in 0..repeats {
            let trajectory = simulate_surrogate(problem, bundle, fallback_tol, config)?;
            runs.push(BenchmarkRun {
                variant: name.clone(),
                run: r,
                wall: trajectory.wall_time,
                total_newton_iterations: trajectory.total_newton_iterations(),
                fallback_rate: trajectory.fallback_rate,
            });
        }
    }
    Ok(BenchmarkReport { runs })
}

/// Trajectory CSV: `t, x0.., y0.., source, iterations, residual_norm`, with
/// a first-line manifest-hash comment.
pub fn save_trajectory(trajectory: &Trajectory, path: &Path, manifest_hash: &str) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "# manifest {manifest_hash}")?;
    let mut header = vec!["t".to_string()];
    header.extend((0..trajectory.x_values.rows()).map(|d| format!("x{d}")));
    header.extend((0..trajectory.y_values.rows()).map(|d| format!("y{d}")));
    header.extend(["source".to_string(), "iterations".to_string(), "residual_norm".to_string()]);
    writeln!(w, "{}", header.join(","))?;
    for (i, &t) in trajectory.times.iter().enumerate() {
        let mut row = vec![format_f64(t)];
        row.extend(trajectory.x_values.column(i).iter().map(|&v| format_f64(v)));
        row.extend(trajectory.y_values.column(i).iter().map(|&v| format_f64(v)));
        let step = &trajectory.steps[i];
        row.push(step.source.tag().to_string());
        row.push(step.iterations.to_string());
        row.push(format_f64(step.residual_norm));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Benchmark CSV: `variant, run, wall_ms, total_newton_iters, fallback_rate`
/// with a first-line manifest-hash comment.
pub fn save_benchmark(report: &BenchmarkReport, path: &Path, manifest_hash: &str) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "# manifest {manifest_hash}")?;
    writeln!(w, "variant,run,wall_ms,total_newton_iters,fallback_rate")?;
    for run in &report.runs {
        writeln!(
            w,
            "{},{},{:.6},{},{:.6}",
            run.variant,
            run.run,
            run.wall.as_secs_f64() * 1e3,
            run.total_newton_iterations,
            run.fallback_rate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multimodel::SurrogateBundle;
    use crate::nn::{init_network, Activation};
    use crate::problems::{cubicloop_ode, piecewiseloop, simpleloop, simpleloop_roots};

    #[test]
    fn classical_simpleloop_tracks_the_closed_form_branch() {
        let p = simpleloop();
        let config = SimConfig::for_problem(&p, 200).unwrap();
        let trajectory = simulate_classical(&p, &config).unwrap();
        assert_eq!(trajectory.times.len(), 201);
        for i in 0..=200 {
            let x = trajectory.x_values.column(i);
            let (_, upper) = simpleloop_roots(x[1], x[2]);
            let y = trajectory.y_values.get(0, i);
            assert!(
                (y - upper).abs() < 1e-8,
                "step {i}: y = {y}, closed form = {upper}"
            );
        }
    }

    #[test]
    fn single_step_yields_two_records() {
        let p = simpleloop();
        let config = SimConfig::for_problem(&p, 1).unwrap();
        let trajectory = simulate_classical(&p, &config).unwrap();
        assert_eq!(trajectory.times.len(), 2);
        assert_eq!(trajectory.times[0], 0.0);
        assert_eq!(trajectory.times[1], 2.0);
    }

    #[test]
    fn warm_start_matches_cold_but_iterates_less() {
        let p = cubicloop_ode();
        let mut config = SimConfig::for_problem(&p, 100).unwrap();
        config.warm_start = true;
        let warm = simulate_classical(&p, &config).unwrap();
        config.warm_start = false;
        let cold = simulate_classical(&p, &config).unwrap();
        // Same trajectory up to solver tolerance; the iterates themselves
        // differ because the two runs take different Newton paths.
        let report = compare_trajectories(
            &warm,
            &cold,
            &ToleranceSpec::new(1e-7, 0.0, 1).unwrap(),
        )
        .unwrap();
        assert!(report.first_violation_step.is_none(), "max abs {}", report.max_abs);
        let mut strictly_less = false;
        for (w, c) in warm.steps.iter().zip(cold.steps.iter()).skip(1) {
            assert!(w.iterations <= c.iterations);
            if w.iterations < c.iterations {
                strictly_less = true;
            }
        }
        assert!(strictly_less, "warm start saved no iterations anywhere");
    }

    #[test]
    fn untrained_bundle_falls_back_everywhere_and_stays_accurate() {
        let p = cubicloop_ode();
        let net = init_network(&[1, 8, 1], Activation::ReLU, 123).unwrap();
        let bundle = SurrogateBundle::single(net, "cubicloop");
        let config = SimConfig::for_problem(&p, 150).unwrap();
        let fallback_tol = ToleranceSpec::new(1e-9, 0.0, 50).unwrap();
        let surrogate = simulate_surrogate(&p, &bundle, &fallback_tol, &config).unwrap();
        assert_eq!(surrogate.fallback_rate, 1.0);
        let classical = simulate_classical(&p, &config).unwrap();
        let report = compare_trajectories(
            &classical,
            &surrogate,
            &ToleranceSpec::new(1e-6, 0.0, 1).unwrap(),
        )
        .unwrap();
        assert!(report.first_violation_step.is_none(), "max abs {}", report.max_abs);
    }

    #[test]
    fn accepted_steps_respect_the_fallback_tolerance_for_any_bundle() {
        // Adversarial: a network with arbitrary weights on simpleloop.
        let p = simpleloop();
        let net = init_network(&[2, 16, 1], Activation::ReLU, 999).unwrap();
        let bundle = SurrogateBundle::single(net, "simpleloop");
        let config = SimConfig::for_problem(&p, 80).unwrap();
        let fallback_tol = ToleranceSpec::new(1e-4, 1e-4, 50).unwrap();
        let trajectory = simulate_surrogate(&p, &bundle, &fallback_tol, &config).unwrap();
        for (i, step) in trajectory.steps.iter().enumerate() {
            let x = trajectory.x_values.column(i);
            let y = trajectory.y_values.column(i);
            let norm = inf_norm(&p.system.residual(x, y));
            let bound = fallback_tol.atol + fallback_tol.rtol * inf_norm(y);
            match step.source {
                StepSource::Surrogate => assert!(norm <= bound, "step {i}: {norm} > {bound}"),
                // Fallback steps satisfy the Newton tolerance instead.
                _ => assert!(norm <= 10.0 * config.newton_tol.atol),
            }
        }
    }

    #[test]
    fn fallback_bookkeeping_is_exact() {
        let p = simpleloop();
        let net = init_network(&[2, 16, 1], Activation::ReLU, 5).unwrap();
        let bundle = SurrogateBundle::single(net, "simpleloop");
        let config = SimConfig::for_problem(&p, 64).unwrap();
        let fallback_tol = ToleranceSpec::new(0.5, 0.1, 50).unwrap();
        let trajectory = simulate_surrogate(&p, &bundle, &fallback_tol, &config).unwrap();
        let records = trajectory.times.len();
        let count = trajectory
            .steps
            .iter()
            .filter(|s| s.source == StepSource::Fallback)
            .count();
        assert_eq!(trajectory.fallback_rate * records as f64, count as f64);
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = cubicloop_ode();
        let config = SimConfig::for_problem(&p, 77).unwrap();
        let a = simulate_classical(&p, &config).unwrap();
        let b = simulate_classical(&p, &config).unwrap();
        assert_eq!(a.y_values, b.y_values);
        assert_eq!(a.times, b.times);
    }

    #[test]
    fn mismatched_bundle_is_rejected() {
        let p = simpleloop();
        let net = init_network(&[2, 4, 1], Activation::ReLU, 0).unwrap();
        let bundle = SurrogateBundle::single(net, "complexsqrt");
        let config = SimConfig::for_problem(&p, 10).unwrap();
        let tol = ToleranceSpec::default();
        assert!(matches!(
            simulate_surrogate(&p, &bundle, &tol, &config),
            Err(Error::Consistency(_))
        ));
        let wrong_shape = init_network(&[3, 4, 1], Activation::ReLU, 0).unwrap();
        let bundle = SurrogateBundle::single(wrong_shape, "simpleloop");
        assert!(matches!(
            simulate_surrogate(&p, &bundle, &tol, &config),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn piecewise_branch_selection_follows_the_window() {
        let p = piecewiseloop(1.0, 1.2).unwrap();
        let net = init_network(&[2, 8, 1], Activation::ReLU, 3).unwrap();
        let bundle = SurrogateBundle {
            networks: vec![net.clone(), net],
            selector: Selector::ByBranch,
            problem: "piecewiseloop".into(),
        };
        let config = SimConfig::for_problem(&p, 100).unwrap();
        // Wide-open tolerance so every prediction is accepted and the
        // network index is attributable per step.
        let tol = ToleranceSpec::new(1e9, 0.0, 50).unwrap();
        let trajectory = simulate_surrogate(&p, &bundle, &tol, &config).unwrap();
        for (i, step) in trajectory.steps.iter().enumerate() {
            let t = trajectory.times[i];
            let expected = usize::from((1.0..1.2).contains(&t));
            assert_eq!(step.network_index, Some(expected), "t = {t}");
        }
    }

    #[test]
    fn compare_trajectories_examples() {
        let p = cubicloop_ode();
        let config = SimConfig::for_problem(&p, 20).unwrap();
        let a = simulate_classical(&p, &config).unwrap();
        let report =
            compare_trajectories(&a, &a, &ToleranceSpec::new(1e-12, 0.0, 1).unwrap()).unwrap();
        assert_eq!(report.max_abs, 0.0);
        assert!(report.first_violation_step.is_none());

        let mut b = a.clone();
        for v in b.y_values.data_mut() {
            *v += 1e-6;
        }
        let report =
            compare_trajectories(&a, &b, &ToleranceSpec::new(1e-5, 0.0, 1).unwrap()).unwrap();
        assert!(report.first_violation_step.is_none());
        assert!((report.max_abs - 1e-6).abs() < 1e-12);

        let mut c = a.clone();
        let corrupt = 7;
        c.y_values.set(0, corrupt, c.y_values.get(0, corrupt) + 1.0);
        let report =
            compare_trajectories(&a, &c, &ToleranceSpec::new(1e-5, 0.0, 1).unwrap()).unwrap();
        assert_eq!(report.first_violation_step, Some(corrupt));

        let short_config = SimConfig::for_problem(&p, 10).unwrap();
        let d = simulate_classical(&p, &short_config).unwrap();
        assert!(compare_trajectories(&a, &d, &ToleranceSpec::default()).is_err());
    }

    #[test]
    fn benchmark_collects_repeats_per_variant() {
        let p = cubicloop_ode();
        let net = init_network(&[1, 8, 1], Activation::ReLU, 3).unwrap();
        let bundle = SurrogateBundle::single(net, "cubicloop");
        let config = SimConfig::for_problem(&p, 25).unwrap();
        let tol = ToleranceSpec::new(1e-6, 1e-4, 50).unwrap();
        let report =
            benchmark(&p, &[("surrogate".to_string(), &bundle, tol)], &config, 5).unwrap();
        assert_eq!(report.runs.len(), 10);
        let classical: Vec<_> =
            report.runs.iter().filter(|r| r.variant == "classical").collect();
        assert_eq!(classical.len(), 5);
        let mean = report.mean_wall("classical").unwrap();
        let manual: Duration =
            classical.iter().map(|r| r.wall).sum::<Duration>() / classical.len() as u32;
        assert_eq!(mean, manual);
    }

    #[test]
    fn trajectory_csv_starts_with_manifest_hash() {
        let p = cubicloop_ode();
        let config = SimConfig::for_problem(&p, 5).unwrap();
        let trajectory = simulate_classical(&p, &config).unwrap();
        let path = std::env::temp_dir().join("loopsurro-trajectory-test.csv");
        save_trajectory(&trajectory, &path, "deadbeef01234567").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# manifest deadbeef01234567\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("t,x0,y0,source"));
        assert_eq!(text.lines().count(), 8);
        std::fs::remove_file(&path).unwrap();
    }
}
