//! Residual systems and built-in problems.
//!
//! An algebraic loop is a set of equations solved simultaneously for unknowns
//! `y` given inputs `x`, written in residual form `f(x, y) = 0`. A
//! [`ResidualSystem`] packages the residual, its Jacobian with respect to `y`,
//! and metadata such as input bounds and an optional branch condition. A
//! [`Problem`] couples a system with the input driver used during simulation:
//! either a pure trajectory `x(t)` or an ODE state fed back from the loop
//! solution.

mod builtin;

pub use builtin::{
    complexsqrt, cubicloop_ode, piecewiseloop, simpleloop, simpleloop_roots, syntheticgrid,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub type ResidualFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64], &[f64], &mut Matrix) + Send + Sync>;
pub type BranchFn = Arc<dyn Fn(&[f64]) -> usize + Send + Sync>;
/// Maps simulation time to the input vector `x`.
pub type TrajectoryFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// An algebraic loop in residual form.
#[derive(Clone)]
pub struct ResidualSystem {
    name: String,
    n_in: usize,
    n_out: usize,
    residual_fn: ResidualFn,
    jacobian_fn: JacobianFn,
    input_bounds: Option<Vec<(f64, f64)>>,
    branch_fn: Option<BranchFn>,
    /// Indices of `x` the surrogate network consumes; defaults to all of them.
    net_inputs: Vec<usize>,
}

impl ResidualSystem {
    pub fn new(
        name: impl Into<String>,
        n_in: usize,
        n_out: usize,
        residual_fn: ResidualFn,
        jacobian_fn: JacobianFn,
    ) -> Self {
        ResidualSystem {
            name: name.into(),
            n_in,
            n_out,
            residual_fn,
            jacobian_fn,
            input_bounds: None,
            branch_fn: None,
            net_inputs: (0..n_in).collect(),
        }
    }

    pub fn with_input_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.input_bounds = Some(bounds);
        self
    }

    pub fn with_branch_fn(mut self, branch_fn: BranchFn) -> Self {
        self.branch_fn = Some(branch_fn);
        self
    }

    pub fn with_net_inputs(mut self, indices: Vec<usize>) -> Self {
        self.net_inputs = indices;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Static per-dimension input bounds, when the problem declares them.
    pub fn input_bounds(&self) -> Option<&[(f64, f64)]> {
        self.input_bounds.as_deref()
    }

    /// Branch id for input `x`, for piecewise-defined residuals.
    pub fn branch_of(&self, x: &[f64]) -> Option<usize> {
        self.branch_fn.as_ref().map(|f| f(x))
    }

    pub fn has_branches(&self) -> bool {
        self.branch_fn.is_some()
    }

    /// Indices of `x` that form the surrogate input vector.
    pub fn net_inputs(&self) -> &[usize] {
        &self.net_inputs
    }

    /// Evaluates `f(x, y)` into a fresh vector.
    pub fn residual(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_out];
        self.residual_into(x, y, &mut out);
        out
    }

    pub fn residual_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        debug_assert_eq!(y.len(), self.n_out);
        debug_assert_eq!(out.len(), self.n_out);
        (self.residual_fn)(x, y, out);
    }

    /// Evaluates the Jacobian of `f` with respect to `y`.
    pub fn jacobian(&self, x: &[f64], y: &[f64]) -> Matrix {
        let mut out = Matrix::zeros(self.n_out, self.n_out);
        self.jacobian_into(x, y, &mut out);
        out
    }

    pub fn jacobian_into(&self, x: &[f64], y: &[f64], out: &mut Matrix) {
        debug_assert_eq!(x.len(), self.n_in);
        debug_assert_eq!(y.len(), self.n_out);
        (self.jacobian_fn)(x, y, out);
    }

    /// Extracts the network input rows from a batch of full input columns.
    pub fn net_input_matrix(&self, x_batch: &Matrix) -> Matrix {
        if self.net_inputs.len() == self.n_in
            && self.net_inputs.iter().enumerate().all(|(i, &v)| i == v)
        {
            return x_batch.clone();
        }
        x_batch.select_rows(&self.net_inputs)
    }
}

impl std::fmt::Debug for ResidualSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResidualSystem")
            .field("name", &self.name)
            .field("n_in", &self.n_in)
            .field("n_out", &self.n_out)
            .finish()
    }
}

/// How the simulation produces `x` at each time step.
#[derive(Clone)]
pub enum Driver {
    /// `x = g(t)`, independent of the loop solution.
    Trajectory(TrajectoryFn),
    /// `x` is an ODE state integrated alongside the loop: after each solved
    /// step, `state' = deriv(state, y)` advances by explicit Euler.
    Ode {
        state0: Vec<f64>,
        deriv: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
        to_input: Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>,
    },
}

/// A residual system plus everything needed to simulate it.
#[derive(Clone)]
pub struct Problem {
    pub system: ResidualSystem,
    pub driver: Driver,
    pub t_span: (f64, f64),
    /// Default Newton seed; also picks the branch a classical reference
    /// simulation tracks when several solutions exist.
    pub initial_guess: Vec<f64>,
    /// Fixed-branch variants of a piecewise residual, indexed by branch id.
    pub branches: Option<Vec<ResidualSystem>>,
}

impl Problem {
    /// The input trajectory, for problems driven by a pure function of time.
    pub fn trajectory_fn(&self) -> Option<TrajectoryFn> {
        match &self.driver {
            Driver::Trajectory(f) => Some(f.clone()),
            Driver::Ode { .. } => None,
        }
    }
}

/// Central finite-difference Jacobian, column by column. The validation
/// oracle for every analytic Jacobian.
pub fn fd_jacobian(system: &ResidualSystem, x: &[f64], y: &[f64], h: f64) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    let n = system.n_out();
    let mut jac = Matrix::zeros(n, n);
    let mut y_pert = y.to_vec();
    let mut r_plus = vec![0.0; n];
    let mut r_minus = vec![0.0; n];
    for j in 0..n {
        y_pert[j] = y[j] + h;
        system.residual_into(x, &y_pert, &mut r_plus);
        y_pert[j] = y[j] - h;
        system.residual_into(x, &y_pert, &mut r_minus);
        y_pert[j] = y[j];
        for i in 0..n {
            let v = (r_plus[i] - r_minus[i]) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "non-finite residual while differencing column {j} of `{}`",
                    system.name()
                )));
            }
            jac.set(i, j, v);
        }
    }
    Ok(jac)
}

/// Looks a problem up by its registry name.
///
/// Known names: `simpleloop`, `complexsqrt`, `piecewiseloop`, `cubicloop`,
/// and `syntheticgrid:<n_out>:<seed>`.
pub fn by_name(name: &str) -> Result<Problem> {
    match name {
        "simpleloop" => Ok(simpleloop()),
        "complexsqrt" => Ok(complexsqrt()),
        "piecewiseloop" => piecewiseloop(1.0, 1.2),
        "cubicloop" => Ok(cubicloop_ode()),
        other => {
            if let Some(rest) = other.strip_prefix("syntheticgrid:") {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "expected syntheticgrid:<n_out>:<seed>, got `{other}`"
                    )));
                }
                let n_out: usize = parts[0].parse().map_err(|_| {
                    Error::Config(format!("bad n_out in `{other}`"))
                })?;
                let seed: u64 = parts[1]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad seed in `{other}`")))?;
                syntheticgrid(n_out, seed)
            } else {
                Err(Error::Config(format!("unknown problem `{other}`")))
            }
        }
    }
}
