//! The built-in problem library.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{Driver, Problem, ResidualSystem};

/// Closed-form roots of the simpleloop residual: `y = (r/2)(s ∓ sqrt(2 - s²))`.
/// Returns `(lower, upper)`. Only defined for `s² <= 2`.
pub fn simpleloop_roots(r: f64, s: f64) -> (f64, f64) {
    let d = (2.0 - s * s).sqrt();
    ((r / 2.0) * (s - d), (r / 2.0) * (s + d))
}

fn simpleloop_system() -> ResidualSystem {
    ResidualSystem::new(
        "simpleloop",
        3,
        1,
        Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            let (r, s) = (x[1], x[2]);
            let v = r * s - y[0];
            out[0] = y[0] * y[0] + v * v - r * r;
        }),
        Arc::new(|x: &[f64], y: &[f64], out: &mut Matrix| {
            let (r, s) = (x[1], x[2]);
            out.set(0, 0, 4.0 * y[0] - 2.0 * r * s);
        }),
    )
    .with_input_bounds(vec![(0.0, 2.0), (1.0, 3.0), (0.0, 1.8f64.sqrt())])
    .with_net_inputs(vec![1, 2])
}

/// Intersection of a growing circle and a moving line, torn down to a scalar
/// residual `f = y² + (rs - y)² - r²` with inputs `x = (t, r, s)`,
/// `r = 1 + t`, `s = sqrt(0.9 (2 - t))` over `t ∈ [0, 2]`.
///
/// The time component rides along in `x` but the surrogate consumes only
/// `(r, s)`.
pub fn simpleloop() -> Problem {
    Problem {
        system: simpleloop_system(),
        driver: Driver::Trajectory(Arc::new(|t: f64| {
            vec![t, 1.0 + t, (0.9 * (2.0 - t)).max(0.0).sqrt()]
        })),
        t_span: (0.0, 2.0),
        initial_guess: vec![1.0],
        branches: None,
    }
}

/// Square root of a complex number `a + ib` in residual form:
/// `f1 = y1² - y2² - a`, `f2 = 2 y1 y2 - b`. The solution set `±sqrt(a+ib)`
/// fills an annulus in the output plane as `(a, b)` ranges over the input
/// box, so the solutions are path-connected.
pub fn complexsqrt() -> Problem {
    let system = ResidualSystem::new(
        "complexsqrt",
        2,
        2,
        Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            out[0] = y[0] * y[0] - y[1] * y[1] - x[0];
            out[1] = 2.0 * y[0] * y[1] - x[1];
        }),
        Arc::new(|_x: &[f64], y: &[f64], out: &mut Matrix| {
            out.set(0, 0, 2.0 * y[0]);
            out.set(0, 1, -2.0 * y[1]);
            out.set(1, 0, 2.0 * y[1]);
            out.set(1, 1, 2.0 * y[0]);
        }),
    )
    .with_input_bounds(vec![(-4.0, 4.0), (-4.0, 4.0)]);

    // The reference input sweeps an arc of fixed modulus, so the continuous
    // solution rotates through roughly 105 degrees of the annulus and drifts
    // across one region of the clustered output space.
    let trajectory = Arc::new(|t: f64| {
        let phi = (-10.0 + 105.0 * t).to_radians();
        vec![3.5 * phi.cos(), 3.5 * phi.sin()]
    });

    Problem {
        system,
        driver: Driver::Trajectory(trajectory),
        t_span: (0.0, 2.0),
        initial_guess: vec![1.9, -0.2],
        branches: None,
    }
}

/// Simpleloop with a ground-fault style branch switch: inside the fault
/// window `[t_on, t_off)` the radius input is halved. `branch_of` returns 0
/// outside the window and 1 inside it.
pub fn piecewiseloop(t_on: f64, t_off: f64) -> Result<Problem> {
    if !(t_on < t_off) {
        return Err(Error::Config(format!(
            "fault window must satisfy t_on < t_off, got [{t_on}, {t_off})"
        )));
    }

    let residual_for = |r_scale: f64| {
        Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| {
            let (r, s) = (r_scale * x[1], x[2]);
            let v = r * s - y[0];
            out[0] = y[0] * y[0] + v * v - r * r;
        })
    };
    let jacobian_for = |r_scale: f64| {
        Arc::new(move |x: &[f64], y: &[f64], out: &mut Matrix| {
            let (r, s) = (r_scale * x[1], x[2]);
            out.set(0, 0, 4.0 * y[0] - 2.0 * r * s);
        })
    };
    let bounds = vec![(0.0, 2.0), (1.0, 3.0), (0.0, 1.8f64.sqrt())];

    let branch_a = ResidualSystem::new("piecewiseloop:normal", 3, 1, residual_for(1.0), jacobian_for(1.0))
        .with_input_bounds(bounds.clone())
        .with_net_inputs(vec![1, 2]);
    let branch_b = ResidualSystem::new("piecewiseloop:fault", 3, 1, residual_for(0.5), jacobian_for(0.5))
        .with_input_bounds(bounds.clone())
        .with_net_inputs(vec![1, 2]);

    let in_fault = move |t: f64| t >= t_on && t < t_off;
    let res_a = residual_for(1.0);
    let res_b = residual_for(0.5);
    let jac_a = jacobian_for(1.0);
    let jac_b = jacobian_for(0.5);
    let system = ResidualSystem::new(
        "piecewiseloop",
        3,
        1,
        Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| {
            if in_fault(x[0]) {
                res_b(x, y, out)
            } else {
                res_a(x, y, out)
            }
        }),
        Arc::new(move |x: &[f64], y: &[f64], out: &mut Matrix| {
            if in_fault(x[0]) {
                jac_b(x, y, out)
            } else {
                jac_a(x, y, out)
            }
        }),
    )
    .with_input_bounds(bounds)
    .with_net_inputs(vec![1, 2])
    .with_branch_fn(Arc::new(move |x: &[f64]| usize::from(in_fault(x[0]))));

    Ok(Problem {
        system,
        driver: Driver::Trajectory(Arc::new(|t: f64| {
            vec![t, 1.0 + t, (0.9 * (2.0 - t)).max(0.0).sqrt()]
        })),
        t_span: (0.0, 2.0),
        initial_guess: vec![1.0],
        branches: Some(vec![branch_a, branch_b]),
    })
}

/// A monotone cubic loop coupled to one ODE state: `f(u, y) = y³ + y - u`
/// with `du/dt = -y`. The cubic has a unique real root for every `u`, which
/// makes this the correctness workhorse for hybrid simulation tests.
pub fn cubicloop_ode() -> Problem {
    let system = ResidualSystem::new(
        "cubicloop",
        1,
        1,
        Arc::new(|x: &[f64], y: &[f64], out: &mut [f64]| {
            out[0] = y[0] * y[0] * y[0] + y[0] - x[0];
        }),
        Arc::new(|_x: &[f64], y: &[f64], out: &mut Matrix| {
            out.set(0, 0, 3.0 * y[0] * y[0] + 1.0);
        }),
    )
    .with_input_bounds(vec![(0.0, 2.5)]);

    Problem {
        system,
        driver: Driver::Ode {
            state0: vec![2.0],
            deriv: Arc::new(|_state: &[f64], y: &[f64]| vec![-y[0]]),
            to_input: Arc::new(|state: &[f64], _t: f64| state.to_vec()),
        },
        t_span: (0.0, 2.0),
        initial_guess: vec![1.0],
        branches: None,
    }
}

/// A scalable stand-in for a large torn loop: `f(x, y) = A y + 0.1 sin(y) +
/// B x - c` with a 16-dimensional input. `A` is seeded and strictly
/// diagonally dominant with a margin that survives the `0.1 cos` diagonal of
/// the Jacobian, so the solution is unique and the Jacobian never singular.
pub fn syntheticgrid(n_out: usize, seed: u64) -> Result<Problem> {
    if n_out < 2 {
        return Err(Error::Config(format!(
            "syntheticgrid needs n_out >= 2, got {n_out}"
        )));
    }
    const N_IN: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut a = Matrix::zeros(n_out, n_out);
    for i in 0..n_out {
        let mut row_sum = 0.0;
        for j in 0..n_out {
            if i != j {
                let v = rng.random_range(-0.004..0.004);
                a.set(i, j, v);
                row_sum += v.abs();
            }
        }
        // Margin 0.105 keeps A + 0.1 diag(cos y) strictly dominant for any y.
        a.set(i, i, row_sum + 0.105);
    }
    let mut b = Matrix::zeros(n_out, N_IN);
    for v in b.data_mut() {
        *v = rng.random_range(-0.015..0.015);
    }
    let c: Vec<f64> = (0..n_out).map(|_| rng.random_range(-0.25..0.25)).collect();

    let a_res = a.clone();
    let b_res = b.clone();
    let c_res = c.clone();
    let residual = Arc::new(move |x: &[f64], y: &[f64], out: &mut [f64]| {
        for i in 0..out.len() {
            let mut acc = 0.1 * y[i].sin() - c_res[i];
            for (j, &yj) in y.iter().enumerate() {
                acc += a_res.get(i, j) * yj;
            }
            for (j, &xj) in x.iter().enumerate() {
                acc += b_res.get(i, j) * xj;
            }
            out[i] = acc;
        }
    });
    let a_jac = a.clone();
    let jacobian = Arc::new(move |_x: &[f64], y: &[f64], out: &mut Matrix| {
        out.data_mut().copy_from_slice(a_jac.data());
        for (i, &yi) in y.iter().enumerate() {
            let v = out.get(i, i) + 0.1 * yi.cos();
            out.set(i, i, v);
        }
    });

    let system = ResidualSystem::new(format!("syntheticgrid:{n_out}:{seed}"), N_IN, n_out, residual, jacobian)
        .with_input_bounds(vec![(-1.0, 1.0); N_IN]);

    // A smooth input path inside the bounds for validation and simulation.
    let omegas: Vec<f64> = (0..N_IN).map(|_| rng.random_range(0.5..2.0)).collect();
    let phases: Vec<f64> =
        (0..N_IN).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let trajectory = Arc::new(move |t: f64| {
        omegas
            .iter()
            .zip(phases.iter())
            .map(|(&w, &p)| 0.9 * (w * t + p).sin())
            .collect()
    });

    Ok(Problem {
        system,
        driver: Driver::Trajectory(trajectory),
        t_span: (0.0, 2.0),
        initial_guess: vec![0.0; n_out],
        branches: None,
    })
}
