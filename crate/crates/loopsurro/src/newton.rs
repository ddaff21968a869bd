//! Damped Newton-Raphson for residual systems.
//!
//! Each step solves `J·Δ = f` through LU with partial pivoting and applies
//! `y ← y - Δ`, halving the step up to ten times while the residual norm
//! would grow. The residual is checked before the first step, so a seed that
//! already satisfies the tolerance reports zero iterations.

use crate::error::{Error, Result};
use crate::linalg::lu_solve;
use crate::matrix::{inf_norm, Matrix};
use crate::problems::ResidualSystem;

/// Absolute/relative tolerance pair plus an iteration cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    pub atol: f64,
    pub rtol: f64,
    pub max_iterations: usize,
}

impl ToleranceSpec {
    pub fn new(atol: f64, rtol: f64, max_iterations: usize) -> Result<Self> {
        if atol < 0.0 || rtol < 0.0 || atol + rtol <= 0.0 {
            return Err(Error::Config(format!(
                "tolerances must be nonnegative with atol + rtol > 0, got atol={atol} rtol={rtol}"
            )));
        }
        if max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(ToleranceSpec { atol, rtol, max_iterations })
    }
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec { atol: 1e-10, rtol: 1e-8, max_iterations: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonFailure {
    SingularJacobian,
    NonFinite,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub converged: bool,
    pub y: Vec<f64>,
    /// Completed Newton steps.
    pub iterations: usize,
    pub failure: Option<NewtonFailure>,
    /// Infinity norm of the residual at the returned `y`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Halve rejected steps (up to ten times). Disable for the textbook
    /// iteration.
    pub damping: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { damping: true }
    }
}

const MAX_HALVINGS: usize = 10;

pub fn newton_solve(
    system: &ResidualSystem,
    x: &[f64],
    y0: &[f64],
    tol: &ToleranceSpec,
) -> NewtonResult {
    newton_solve_with(system, x, y0, tol, NewtonOptions::default(), None)
}

/// As `newton_solve`, with explicit options and an optional trace of the
/// accepted residual norms (index 0 is the norm at `y0`).
pub fn newton_solve_with(
    system: &ResidualSystem,
    x: &[f64],
    y0: &[f64],
    tol: &ToleranceSpec,
    options: NewtonOptions,
    mut norm_trace: Option<&mut Vec<f64>>,
) -> NewtonResult {
    let n = system.n_out();
    debug_assert_eq!(y0.len(), n);

    let mut y = y0.to_vec();
    let mut residual = system.residual(x, &y);
    let mut norm = inf_norm(&residual);
    if let Some(trace) = norm_trace.as_deref_mut() {
        trace.push(norm);
    }

    let fail = |y: Vec<f64>, iterations, failure, residual_norm| NewtonResult {
        converged: false,
        y,
        iterations,
        failure: Some(failure),
        residual_norm,
    };

    if !norm.is_finite() {
        return fail(y, 0, NewtonFailure::NonFinite, norm);
    }
    if norm <= tol.atol {
        return NewtonResult { converged: true, y, iterations: 0, failure: None, residual_norm: norm };
    }

    let mut jac = Matrix::zeros(n, n);
    let mut candidate = vec![0.0; n];
    let mut cand_residual = vec![0.0; n];

    for k in 1..=tol.max_iterations {
        system.jacobian_into(x, &y, &mut jac);
        let delta = match lu_solve(&jac, &residual) {
            Some(d) => d,
            None => return fail(y, k - 1, NewtonFailure::SingularJacobian, norm),
        };
        if delta.iter().any(|v| !v.is_finite()) {
            return fail(y, k - 1, NewtonFailure::NonFinite, norm);
        }

        // Step control: shrink until the residual norm stops growing. A NaN
        // trial norm fails the acceptance comparison and keeps halving.
        let mut scale = 1.0;
        let mut accepted_norm;
        let mut halvings = 0;
        loop {
            for i in 0..n {
                candidate[i] = y[i] - scale * delta[i];
            }
            system.residual_into(x, &candidate, &mut cand_residual);
            accepted_norm = inf_norm(&cand_residual);
            let acceptable = accepted_norm <= norm;
            if !options.damping || acceptable || halvings >= MAX_HALVINGS {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        if !accepted_norm.is_finite() {
            return fail(y, k - 1, NewtonFailure::NonFinite, norm);
        }

        let step_ok = (0..n).all(|i| (scale * delta[i]).abs() <= tol.atol + tol.rtol * y[i].abs());
        y.copy_from_slice(&candidate);
        residual.copy_from_slice(&cand_residual);
        norm = accepted_norm;
        if let Some(trace) = norm_trace.as_deref_mut() {
            trace.push(norm);
        }

        if norm <= tol.atol || step_ok {
            return NewtonResult { converged: true, y, iterations: k, failure: None, residual_norm: norm };
        }
    }

    fail(y, tol.max_iterations, NewtonFailure::MaxIterations, norm)
}

/// Mean Newton iteration count over a batch of seeds, the metric used to
/// judge how much work a surrogate prediction saves. Samples that fail to
/// converge are counted at `max_iterations`.
pub fn newton_iterations_from(
    system: &ResidualSystem,
    x_batch: &Matrix,
    y0_batch: &Matrix,
    tol: &ToleranceSpec,
) -> Result<(f64, Vec<usize>)> {
    if x_batch.cols() == 0 {
        return Err(Error::Config("iteration metric needs a nonempty batch".into()));
    }
    if x_batch.cols() != y0_batch.cols() {
        return Err(Error::Shape(format!(
            "{} inputs vs {} seeds",
            x_batch.cols(),
            y0_batch.cols()
        )));
    }
    let mut counts = Vec::with_capacity(x_batch.cols());
    for j in 0..x_batch.cols() {
        let result = newton_solve(system, x_batch.column(j), y0_batch.column(j), tol);
        counts.push(if result.converged { result.iterations } else { tol.max_iterations });
    }
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    Ok((mean, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{complexsqrt, cubicloop_ode, simpleloop, simpleloop_roots, syntheticgrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tight() -> ToleranceSpec {
        ToleranceSpec::new(1e-12, 1e-12, 50).unwrap()
    }

    #[test]
    fn cubic_converges_quadratically() {
        let p = cubicloop_ode();
        let result = newton_solve(&p.system, &[2.0], &[2.0], &tight());
        assert!(result.converged);
        assert!((result.y[0] - 1.0).abs() < 1e-10);
        assert!(result.iterations <= 8, "took {} iterations", result.iterations);
    }

    #[test]
    fn undamped_first_iterate_matches_hand_arithmetic() {
        // simpleloop at r=1, s=0: f = 2y² - 1, f' = 4y. From y0 = 1 the
        // first Newton iterate is 1 - 1/4 = 0.75.
        let p = simpleloop();
        let tol = ToleranceSpec::new(1e-30, 0.0, 1).unwrap();
        let result = newton_solve_with(
            &p.system,
            &[0.0, 1.0, 0.0],
            &[1.0],
            &tol,
            NewtonOptions { damping: false },
            None,
        );
        assert_eq!(result.iterations, 1);
        assert!((result.y[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn exact_seed_reports_zero_iterations() {
        let p = cubicloop_ode();
        let result = newton_solve(&p.system, &[2.0], &[1.0], &tight());
        assert!(result.converged);
        assert_eq!(result.iterations, 0);
    }

    #[test]
    fn singular_jacobian_at_complexsqrt_origin() {
        let p = complexsqrt();
        let result = newton_solve(&p.system, &[3.0, 4.0], &[0.0, 0.0], &tight());
        assert!(!result.converged);
        assert_eq!(result.failure, Some(NewtonFailure::SingularJacobian));
    }

    #[test]
    fn max_iterations_is_reported() {
        let p = cubicloop_ode();
        let tol = ToleranceSpec::new(1e-300, 0.0, 2).unwrap();
        let result = newton_solve(&p.system, &[10.0], &[-50.0], &tol);
        assert!(!result.converged);
        assert_eq!(result.failure, Some(NewtonFailure::MaxIterations));
        assert_eq!(result.iterations, 2);
    }

    #[test]
    fn converges_for_seeded_cubic_starts_and_damping_is_monotone() {
        let p = cubicloop_ode();
        let tol = ToleranceSpec::new(1e-10, 1e-10, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let u = rng.random_range(0.0..2.5);
            let y0 = rng.random_range(-3.0..3.0);
            let mut trace = Vec::new();
            let result =
                newton_solve_with(&p.system, &[u], &[y0], &tol, NewtonOptions::default(), Some(&mut trace));
            assert!(result.converged, "u={u} y0={y0}");
            assert!(result.residual_norm <= 10.0 * tol.atol);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0], "residual grew within an accepted step: {trace:?}");
            }
        }
    }

    #[test]
    fn simpleloop_converges_to_a_closed_form_root() {
        let p = simpleloop();
        let tol = ToleranceSpec::new(1e-12, 1e-12, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t: f64 = rng.random_range(0.0..2.0);
            let x = vec![t, 1.0 + t, (0.9 * (2.0 - t)).sqrt()];
            let y0 = rng.random_range(-1.0..3.0);
            let result = newton_solve(&p.system, &x, &[y0], &tol);
            if !result.converged {
                continue; // flat spots can stall; failures are data here
            }
            let (lo, hi) = simpleloop_roots(x[1], x[2]);
            let y = result.y[0];
            let near =
                |root: f64| (y - root).abs() <= tol.atol + tol.rtol * root.abs() + 1e-10;
            assert!(near(lo) || near(hi), "y={y} not near {lo} or {hi}");
        }
    }

    #[test]
    fn deterministic_for_fixed_inputs() {
        let p = syntheticgrid(6, 9).unwrap();
        let x = vec![0.2; 16];
        let y0 = vec![1.5; 6];
        let a = newton_solve(&p.system, &x, &y0, &ToleranceSpec::default());
        let b = newton_solve(&p.system, &x, &y0, &ToleranceSpec::default());
        assert_eq!(a.y, b.y);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn batch_metric_zero_for_exact_seeds_and_positive_for_random() {
        let p = syntheticgrid(8, 4).unwrap();
        let tol = ToleranceSpec::new(1e-9, 1e-9, 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs = Vec::new();
        let mut solutions = Vec::new();
        let mut randoms = Vec::new();
        for _ in 0..20 {
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sol = newton_solve(&p.system, &x, &[0.0; 8], &tol);
            assert!(sol.converged);
            solutions.push(sol.y);
            randoms.push((0..8).map(|_| rng.random_range(-6.0..6.0)).collect::<Vec<f64>>());
            xs.push(x);
        }
        let x_batch = Matrix::from_columns(&xs).unwrap();
        let exact = Matrix::from_columns(&solutions).unwrap();
        let random = Matrix::from_columns(&randoms).unwrap();
        let (mean_exact, _) = newton_iterations_from(&p.system, &x_batch, &exact, &tol).unwrap();
        let (mean_random, counts) =
            newton_iterations_from(&p.system, &x_batch, &random, &tol).unwrap();
        assert_eq!(mean_exact, 0.0);
        assert!(mean_random > mean_exact);
        assert_eq!(counts.len(), 20);
    }

    #[test]
    fn single_sample_batch_mean_equals_count() {
        let p = cubicloop_ode();
        let tol = tight();
        let x = Matrix::from_vector(&[2.0]);
        let y0 = Matrix::from_vector(&[2.0]);
        let (mean, counts) = newton_iterations_from(&p.system, &x, &y0, &tol).unwrap();
        assert_eq!(mean, counts[0] as f64);
    }

    #[test]
    fn tolerance_spec_rejects_invalid() {
        assert!(ToleranceSpec::new(0.0, 0.0, 10).is_err());
        assert!(ToleranceSpec::new(-1.0, 1e-3, 10).is_err());
        assert!(ToleranceSpec::new(1e-6, 0.0, 0).is_err());
    }
}
