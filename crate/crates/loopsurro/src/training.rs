//! Loss functions and the training loop.
//!
//! The residual loss `L(ŷ) = 1/(2n) Σ ‖f(x, ŷ)‖²` trains the network without
//! labels: its gradient with respect to the prediction is `Jᵀf`, assembled
//! here column by column and injected into the network's backward pass. The
//! supervised MSE loss and the λ-blend of the two are also provided, along
//! with a two-phase schedule that guides the network toward a chosen solution
//! branch with a small labeled set before switching to pure residual
//! training.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::matrix::Matrix;
use crate::newton::{newton_iterations_from, ToleranceSpec};
use crate::nn::{
    adam_step, backward_with_output_gradient, forward, forward_cached, AdamState, LrSchedule,
    MlpNetwork,
};
use crate::problems::ResidualSystem;
use crate::sampling::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub enum LossMode {
    Residual,
    Supervised,
    SemiSupervised { lambda: f64 },
    TwoPhase { switch_epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopReason {
    #[default]
    Completed,
    AbsoluteTolReached,
    SuccessiveConverged,
    IterationTargetReached,
    /// Loss or gradient went non-finite; the report covers the epochs that
    /// ran.
    Diverged,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub loss_mode: LossMode,
    /// Tolerances for the convergence monitors and the Newton metric.
    pub tol: ToleranceSpec,
    /// Monitor cadence in epochs; 0 disables the monitors.
    pub metric_every: usize,
    pub seed: u64,
    /// Stop once the epoch training loss drops to this value.
    pub stop_on_loss_atol: Option<f64>,
    /// Stop once successive monitored predictions agree within `tol`.
    pub stop_on_successive: bool,
    /// Stop once the mean Newton iteration metric drops to this value.
    pub stop_on_iteration_target: Option<f64>,
}

impl TrainConfig {
    pub fn new(epochs: usize, schedule: LrSchedule, loss_mode: LossMode, seed: u64) -> Self {
        TrainConfig {
            epochs,
            batch_size: 128,
            schedule,
            loss_mode,
            tol: ToleranceSpec::default(),
            metric_every: 50,
            seed,
            stop_on_loss_atol: None,
            stop_on_successive: false,
            stop_on_iteration_target: None,
        }
    }

    fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if dataset_len > 0 && self.batch_size > dataset_len {
            return Err(Error::Config(format!(
                "batch size {} exceeds dataset size {dataset_len}",
                self.batch_size
            )));
        }
        if self.schedule.total_epochs < self.epochs {
            return Err(Error::Config(format!(
                "schedule covers {} epochs but the run wants {}",
                self.schedule.total_epochs, self.epochs
            )));
        }
        if let LossMode::SemiSupervised { lambda } = self.loss_mode {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::Config(format!("lambda must be in [0,1], got {lambda}")));
            }
        }
        if let LossMode::TwoPhase { switch_epoch } = self.loss_mode {
            if self.epochs > 0 && switch_epoch >= self.epochs {
                return Err(Error::Config(format!(
                    "switch epoch {switch_epoch} must come before the last epoch {}",
                    self.epochs
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Residual loss on the validation inputs per epoch (empty without a
    /// validation set). Always the residual loss, whatever the training
    /// mode, so supervised and residual curves share a scale.
    pub val_loss: Vec<f64>,
    pub lr_history: Vec<f64>,
    /// `(epochs_done, mean Newton iterations)` at each monitor point.
    pub newton_metric: Vec<(usize, f64)>,
    /// `(epochs_done, converged)` successive-prediction checks.
    pub successive: Vec<(usize, bool)>,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    /// Epoch at which a two-phase run switched to the residual loss.
    pub switch_epoch: Option<usize>,
    /// Exact full-dataset loss of the returned network.
    pub final_train_loss: f64,
}

/// `1/(2n) Σ_i ‖f(x_i, ŷ_i)‖²`.
pub fn residual_loss(system: &ResidualSystem, x_batch: &Matrix, yhat: &Matrix) -> Result<f64> {
    check_batch_shapes(system, x_batch, yhat)?;
    let n = x_batch.cols();
    let mut residual = vec![0.0; system.n_out()];
    let mut total = 0.0;
    for j in 0..n {
        system.residual_into(x_batch.column(j), yhat.column(j), &mut residual);
        let mut sq = 0.0;
        for &r in &residual {
            sq += r * r;
        }
        if !sq.is_finite() {
            return Err(Error::Diverged(format!("non-finite residual at sample {j}")));
        }
        total += sq;
    }
    Ok(total / (2.0 * n as f64))
}

/// Gradient of `residual_loss` with respect to the predictions: column `i`
/// is `Jᵀ(x_i, ŷ_i) f(x_i, ŷ_i) / n`.
pub fn residual_loss_gradient(
    system: &ResidualSystem,
    x_batch: &Matrix,
    yhat: &Matrix,
) -> Result<Matrix> {
    check_batch_shapes(system, x_batch, yhat)?;
    let n = x_batch.cols();
    let n_out = system.n_out();
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n_out, n);
    let mut residual = vec![0.0; n_out];
    let mut jac = Matrix::zeros(n_out, n_out);
    for j in 0..n {
        let x = x_batch.column(j);
        let y = yhat.column(j);
        system.residual_into(x, y, &mut residual);
        if residual.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("non-finite residual at sample {j}")));
        }
        system.jacobian_into(x, y, &mut jac);
        let dst = grad.column_mut(j);
        for row in 0..n_out {
            // (Jᵀ f)_row is the dot of J's column `row` with f; that column
            // is contiguous in the column-major layout.
            let jcol = &jac.data()[row * n_out..(row + 1) * n_out];
            let mut acc = 0.0;
            for (ji, &fi) in jcol.iter().zip(residual.iter()) {
                acc += ji * fi;
            }
            dst[row] = acc * inv_n;
        }
    }
    Ok(grad)
}

/// `1/(2n) Σ_i ‖ŷ_i - y_i‖²`.
pub fn mse_loss(yhat: &Matrix, targets: &Matrix) -> Result<f64> {
    if yhat.rows() != targets.rows() || yhat.cols() != targets.cols() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            yhat.rows(),
            yhat.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    let n = yhat.cols();
    let mut total = 0.0;
    for (&a, &b) in yhat.data().iter().zip(targets.data().iter()) {
        let d = a - b;
        total += d * d;
    }
    Ok(total / (2.0 * n as f64))
}

/// Gradient of `mse_loss`: `(ŷ - y) / n` per column.
pub fn mse_gradient(yhat: &Matrix, targets: &Matrix) -> Result<Matrix> {
    if yhat.rows() != targets.rows() || yhat.cols() != targets.cols() {
        return Err(Error::Shape("prediction and target shapes differ".into()));
    }
    let n = yhat.cols() as f64;
    let mut grad = yhat.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(targets.data().iter()) {
        *g = (*g - t) / n;
    }
    Ok(grad)
}

/// `λ`-blend of the residual and MSE losses. `λ = 1` reduces exactly to
/// `residual_loss` (targets may then be absent), `λ = 0` exactly to
/// `mse_loss`.
pub fn semi_supervised_loss(
    system: &ResidualSystem,
    x_batch: &Matrix,
    yhat: &Matrix,
    targets: Option<&Matrix>,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 1.0 {
        return residual_loss(system, x_batch, yhat);
    }
    let targets = targets.ok_or_else(|| {
        Error::Config(format!("semi-supervised loss with lambda = {lambda} needs targets"))
    })?;
    if lambda == 0.0 {
        return mse_loss(yhat, targets);
    }
    let res = residual_loss(system, x_batch, yhat)?;
    let mse = mse_loss(yhat, targets)?;
    Ok(lambda * res + (1.0 - lambda) * mse)
}

/// Gradient of `semi_supervised_loss` per column:
/// `λ Jᵀf / n + (1-λ)(ŷ - y) / n`.
pub fn semi_supervised_gradient(
    system: &ResidualSystem,
    x_batch: &Matrix,
    yhat: &Matrix,
    targets: Option<&Matrix>,
    lambda: f64,
) -> Result<Matrix> {
    check_lambda(lambda)?;
    if lambda == 1.0 {
        return residual_loss_gradient(system, x_batch, yhat);
    }
    let targets = targets.ok_or_else(|| {
        Error::Config(format!("semi-supervised gradient with lambda = {lambda} needs targets"))
    })?;
    if lambda == 0.0 {
        return mse_gradient(yhat, targets);
    }
    let res = residual_loss_gradient(system, x_batch, yhat)?;
    let mse = mse_gradient(yhat, targets)?;
    let mut grad = res;
    for (g, &m) in grad.data_mut().iter_mut().zip(mse.data().iter()) {
        *g = lambda * *g + (1.0 - lambda) * m;
    }
    Ok(grad)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda must be in [0,1], got {lambda}")));
    }
    Ok(())
}

fn check_batch_shapes(system: &ResidualSystem, x_batch: &Matrix, yhat: &Matrix) -> Result<()> {
    if x_batch.rows() != system.n_in() {
        return Err(Error::Shape(format!(
            "inputs have {} rows, system `{}` expects {}",
            x_batch.rows(),
            system.name(),
            system.n_in()
        )));
    }
    if yhat.rows() != system.n_out() {
        return Err(Error::Shape(format!(
            "predictions have {} rows, system `{}` expects {}",
            yhat.rows(),
            system.name(),
            system.n_out()
        )));
    }
    if x_batch.cols() != yhat.cols() {
        return Err(Error::Shape(format!(
            "{} inputs vs {} predictions",
            x_batch.cols(),
            yhat.cols()
        )));
    }
    Ok(())
}

/// True when every component satisfies
/// `|now - prev| <= atol + rtol |prev|`.
pub fn successive_convergence(prev: &Matrix, now: &Matrix, tol: &ToleranceSpec) -> bool {
    debug_assert_eq!(prev.rows(), now.rows());
    debug_assert_eq!(prev.cols(), now.cols());
    prev.data()
        .iter()
        .zip(now.data().iter())
        .all(|(&p, &c)| (c - p).abs() <= tol.atol + tol.rtol * p.abs())
}

/// Mean Newton iterations needed to polish the network's predictions over
/// the probe inputs.
pub fn iteration_metric(
    system: &ResidualSystem,
    net: &MlpNetwork,
    probe_inputs: &Matrix,
    tol: &ToleranceSpec,
) -> Result<f64> {
    let predictions = forward(net, &system.net_input_matrix(probe_inputs))?;
    let (mean, _) = newton_iterations_from(system, probe_inputs, &predictions, tol)?;
    Ok(mean)
}

/// One phase of a training run: which dataset to iterate and which gradient
/// to inject, from a given epoch on.
struct Phase<'a> {
    start_epoch: usize,
    data: &'a Dataset,
    mode: BatchMode,
}

#[derive(Clone, Copy)]
enum BatchMode {
    Residual,
    Supervised,
    Semi(f64),
}

/// Mini-batch training with the configured loss.
///
/// Validation loss is always computed with the residual loss so runs in
/// different modes stay comparable. The two-phase mode is driven through
/// [`two_phase_train`], which supplies the guidance set.
pub fn train(
    system: &ResidualSystem,
    dataset: &Dataset,
    validation: Option<&Dataset>,
    net: MlpNetwork,
    config: &TrainConfig,
) -> Result<(MlpNetwork, TrainReport)> {
    let mode = match config.loss_mode {
        LossMode::Residual => BatchMode::Residual,
        LossMode::Supervised => BatchMode::Supervised,
        LossMode::SemiSupervised { lambda } => BatchMode::Semi(lambda),
        LossMode::TwoPhase { .. } => {
            return Err(Error::Config(
                "two-phase training needs guidance targets; call two_phase_train".into(),
            ))
        }
    };
    let phases = [Phase { start_epoch: 0, data: dataset, mode }];
    run_phases(system, &phases, validation, net, config, None)
}

/// Phase one trains supervised on the (small, unambiguous) guidance set;
/// phase two continues with the residual loss on the full dataset. With
/// `switch_epoch = 0` this is plain residual training.
pub fn two_phase_train(
    system: &ResidualSystem,
    guidance: &Dataset,
    dataset: &Dataset,
    net: MlpNetwork,
    config: &TrainConfig,
) -> Result<(MlpNetwork, TrainReport)> {
    let switch_epoch = match config.loss_mode {
        LossMode::TwoPhase { switch_epoch } => switch_epoch,
        _ => {
            return Err(Error::Config(
                "two_phase_train requires the two-phase loss mode".into(),
            ))
        }
    };
    if switch_epoch > 0 && guidance.labels.is_none() {
        return Err(Error::Config("guidance dataset has no labels".into()));
    }
    let phases = [
        Phase { start_epoch: 0, data: guidance, mode: BatchMode::Supervised },
        Phase { start_epoch: switch_epoch, data: dataset, mode: BatchMode::Residual },
    ];
    let active: &[Phase] = if switch_epoch == 0 { &phases[1..] } else { &phases };
    run_phases(system, active, None, net, config, Some(switch_epoch))
}

fn run_phases(
    system: &ResidualSystem,
    phases: &[Phase<'_>],
    validation: Option<&Dataset>,
    mut net: MlpNetwork,
    config: &TrainConfig,
    switch_epoch: Option<usize>,
) -> Result<(MlpNetwork, TrainReport)> {
    for phase in phases {
        config.validate(phase.data.len())?;
        if phase.data.is_empty() {
            return Err(Error::Config("training dataset is empty".into()));
        }
        if !phase.data.inputs.is_finite() {
            return Err(Error::Config("training inputs contain non-finite values".into()));
        }
        if matches!(phase.mode, BatchMode::Supervised | BatchMode::Semi(_))
            && phase.data.labels.is_none()
        {
            return Err(Error::Config(
                "supervised or semi-supervised training needs a labeled dataset".into(),
            ));
        }
    }

    let mut report = TrainReport { switch_epoch, ..TrainReport::default() };
    let final_phase = phases.last().expect("at least one phase");
    if config.epochs == 0 {
        report.final_train_loss = full_loss(system, final_phase, &net)?;
        return Ok((net, report));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(&net);
    let validation_probe = validation.map(|v| {
        let probe = v.inputs.clone();
        let net_probe = system.net_input_matrix(&probe);
        (probe, net_probe)
    });
    let mut previous_monitor: Option<Matrix> = None;
    let mut stop = None;

    'epochs: for epoch in 0..config.epochs {
        let phase = phases
            .iter()
            .rev()
            .find(|p| p.start_epoch <= epoch)
            .expect("phase 0 starts at epoch 0");
        let data = phase.data;
        let n = data.len();
        let net_inputs_full = system.net_input_matrix(&data.inputs);

        let lr = config.schedule.lr_at_epoch(epoch)?;
        report.lr_history.push(lr);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x_mb = data.inputs.select_columns(batch);
            let net_x_mb = net_inputs_full.select_columns(batch);
            let targets_mb = data.labels.as_ref().map(|l| l.select_columns(batch));

            let cache = forward_cached(&net, &net_x_mb)?;
            let yhat = cache.output();

            let (loss, out_grad) = match phase.mode {
                BatchMode::Residual => (
                    residual_loss(system, &x_mb, yhat),
                    residual_loss_gradient(system, &x_mb, yhat),
                ),
                BatchMode::Supervised => {
                    let t = targets_mb.as_ref().expect("validated above");
                    (mse_loss(yhat, t), mse_gradient(yhat, t))
                }
                BatchMode::Semi(lambda) => (
                    semi_supervised_loss(system, &x_mb, yhat, targets_mb.as_ref(), lambda),
                    semi_supervised_gradient(system, &x_mb, yhat, targets_mb.as_ref(), lambda),
                ),
            };
            let loss = match loss {
                Ok(l) if l.is_finite() => l,
                Ok(_) | Err(Error::Diverged(_)) => {
                    stop = Some(StopReason::Diverged);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let out_grad = match out_grad {
                Ok(g) => g,
                Err(Error::Diverged(_)) => {
                    stop = Some(StopReason::Diverged);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            epoch_loss += loss * batch.len() as f64;

            let grads = backward_with_output_gradient(&net, &net_x_mb, &cache, &out_grad)?;
            match adam_step(&mut net, &grads, &mut adam, lr) {
                Ok(()) => {}
                Err(Error::Diverged(_)) => {
                    stop = Some(StopReason::Diverged);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        epoch_loss /= n as f64;
        report.train_loss.push(epoch_loss);
        report.epochs_run = epoch + 1;

        if let Some((probe, net_probe)) = &validation_probe {
            let predictions = forward(&net, net_probe)?;
            let vl = residual_loss(system, probe, &predictions).unwrap_or(f64::NAN);
            report.val_loss.push(vl);
        }

        if !epoch_loss.is_finite() {
            stop = Some(StopReason::Diverged);
            break 'epochs;
        }

        // Monitors.
        if config.metric_every > 0 && (epoch + 1) % config.metric_every == 0 {
            let (probe, net_probe) = match &validation_probe {
                Some(pair) => (pair.0.clone(), pair.1.clone()),
                None => {
                    let take: Vec<usize> = (0..n.min(200)).collect();
                    let probe = data.inputs.select_columns(&take);
                    let net_probe = net_inputs_full.select_columns(&take);
                    (probe, net_probe)
                }
            };
            let predictions = forward(&net, &net_probe)?;
            let (mean_iters, _) =
                newton_iterations_from(system, &probe, &predictions, &config.tol)?;
            report.newton_metric.push((epoch + 1, mean_iters));

            if let Some(prev) = &previous_monitor {
                let converged = prev.rows() == predictions.rows()
                    && prev.cols() == predictions.cols()
                    && successive_convergence(prev, &predictions, &config.tol);
                report.successive.push((epoch + 1, converged));
                if config.stop_on_successive && converged {
                    stop = Some(StopReason::SuccessiveConverged);
                }
            }
            previous_monitor = Some(predictions);

            if let Some(target) = config.stop_on_iteration_target {
                if mean_iters <= target {
                    stop = Some(StopReason::IterationTargetReached);
                }
            }
        }
        if let Some(atol) = config.stop_on_loss_atol {
            if epoch_loss <= atol {
                stop = Some(StopReason::AbsoluteTolReached);
            }
        }
        if stop.is_some() {
            break;
        }
    }

    report.stop_reason = stop.unwrap_or(StopReason::Completed);
    // A mid-epoch divergence leaves a dangling lr entry; keep the histories
    // aligned with epochs_run.
    report.lr_history.truncate(report.train_loss.len());
    let last_phase = phases
        .iter()
        .rev()
        .find(|p| p.start_epoch < report.epochs_run.max(1))
        .unwrap_or(final_phase);
    report.final_train_loss = full_loss(system, last_phase, &net)?;
    Ok((net, report))
}

/// Exact dataset-wide loss for the phase's mode.
fn full_loss(system: &ResidualSystem, phase: &Phase<'_>, net: &MlpNetwork) -> Result<f64> {
    let net_inputs = system.net_input_matrix(&phase.data.inputs);
    let yhat = forward(net, &net_inputs)?;
    let loss = match phase.mode {
        BatchMode::Residual => residual_loss(system, &phase.data.inputs, &yhat),
        BatchMode::Supervised => mse_loss(&yhat, phase.data.labels.as_ref().expect("labeled")),
        BatchMode::Semi(lambda) => semi_supervised_loss(
            system,
            &phase.data.inputs,
            &yhat,
            phase.data.labels.as_ref(),
            lambda,
        ),
    };
    match loss {
        Ok(v) => Ok(v),
        Err(Error::Diverged(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Writes the per-epoch history as CSV: `epoch, train_loss, val_loss, lr,
/// newton_metric`. Monitor columns are empty on epochs without a
/// measurement.
pub fn save_report(report: &TrainReport, path: &Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "epoch,train_loss,val_loss,lr,newton_metric")?;
    let metric: BTreeMap<usize, f64> = report.newton_metric.iter().copied().collect();
    for e in 0..report.epochs_run {
        let val = report
            .val_loss
            .get(e)
            .map(|&v| format_f64(v))
            .unwrap_or_default();
        let m = metric.get(&(e + 1)).map(|&v| format!("{v:.4}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            e,
            format_f64(report.train_loss[e]),
            val,
            format_f64(report.lr_history[e]),
            m
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{by_name, simpleloop, simpleloop_roots};
    use crate::sampling::{sobol_sample, InputBounds, SampleMethod};
    use std::time::Duration;

    fn x_single(t: f64, r: f64, s: f64) -> Matrix {
        Matrix::from_columns(&[vec![t, r, s]]).unwrap()
    }

    #[test]
    fn residual_loss_examples() {
        let p = simpleloop();
        // Exact root: zero loss.
        let x = x_single(0.0, 1.0, 0.0);
        let root = Matrix::from_vector(&[1.0 / 2.0f64.sqrt()]);
        assert!(residual_loss(&p.system, &x, &root).unwrap() < 1e-28);
        // f(y=1) = 2 - 1 = 1, loss = 1/2.
        let yhat = Matrix::from_vector(&[1.0]);
        assert!((residual_loss(&p.system, &x, &yhat).unwrap() - 0.5).abs() < 1e-15);
        // Batch of both: (0 + 0.5)/2 = 0.25 via the 1/(2n) average.
        let x2 = Matrix::from_columns(&[vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let y2 = Matrix::from_columns(&[vec![1.0 / 2.0f64.sqrt()], vec![1.0]]).unwrap();
        assert!((residual_loss(&p.system, &x2, &y2).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn residual_gradient_examples() {
        let p = simpleloop();
        let x = x_single(0.0, 1.0, 0.0);
        // dL/dy = f f' = 1 * 4 = 4 at y = 1.
        let g = residual_loss_gradient(&p.system, &x, &Matrix::from_vector(&[1.0])).unwrap();
        assert!((g.get(0, 0) - 4.0).abs() < 1e-12);
        // Zero at an exact root.
        let g = residual_loss_gradient(&p.system, &x, &Matrix::from_vector(&[1.0 / 2.0f64.sqrt()]))
            .unwrap();
        assert!(g.get(0, 0).abs() < 1e-14);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for name in ["simpleloop", "complexsqrt", "piecewiseloop", "cubicloop", "syntheticgrid:5:2"]
        {
            let p = by_name(name).unwrap();
            let system = &p.system;
            let bounds = system.input_bounds().unwrap();
            for _ in 0..50 {
                let x: Vec<f64> = bounds
                    .iter()
                    .map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..hi) })
                    .collect();
                let y: Vec<f64> =
                    (0..system.n_out()).map(|_| rng.random_range(-1.5..1.5)).collect();
                let xm = Matrix::from_vector(&x);
                let ym = Matrix::from_vector(&y);
                let grad = residual_loss_gradient(system, &xm, &ym).unwrap();
                let h = 1e-6;
                for i in 0..system.n_out() {
                    let mut plus = y.clone();
                    plus[i] += h;
                    let mut minus = y.clone();
                    minus[i] -= h;
                    let lp = residual_loss(system, &xm, &Matrix::from_vector(&plus)).unwrap();
                    let lm = residual_loss(system, &xm, &Matrix::from_vector(&minus)).unwrap();
                    let numeric = (lp - lm) / (2.0 * h);
                    let analytic = grad.get(i, 0);
                    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-6,
                        "{name} dim {i}: analytic {analytic} vs fd {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn mse_examples() {
        let yhat = Matrix::from_columns(&[vec![0.0], vec![0.0]]).unwrap();
        let targets = Matrix::from_columns(&[vec![1.0], vec![-1.0]]).unwrap();
        // Constant prediction at the mean of ambiguous targets:
        // loss = (1/4)(1 + 1) = 0.5 = half the empirical variance.
        assert!((mse_loss(&yhat, &targets).unwrap() - 0.5).abs() < 1e-15);
        let g = mse_gradient(&yhat, &targets).unwrap();
        assert!((g.get(0, 0) + g.get(0, 1)).abs() < 1e-15, "gradient sums to zero at the mean");
        // Identical prediction and target.
        assert_eq!(mse_loss(&targets, &targets).unwrap(), 0.0);
    }

    #[test]
    fn constant_predictor_minimum_is_the_mean_with_half_variance_loss() {
        // Direct 1-D minimization over the constant predictor c for targets
        // {+1, -1}: golden-section search down to 1e-9.
        let targets = [1.0f64, -1.0];
        let loss = |c: f64| targets.iter().map(|&t| (c - t) * (c - t)).sum::<f64>() / 4.0;
        let (mut lo, mut hi) = (-3.0f64, 3.0f64);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-9 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if loss(a) < loss(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let minimizer = 0.5 * (lo + hi);
        let mean = 0.0;
        let variance = 1.0;
        assert!((minimizer - mean).abs() < 1e-6);
        assert!((loss(minimizer) - 0.5 * variance).abs() < 1e-9);
    }

    #[test]
    fn semi_supervised_blend() {
        let p = simpleloop();
        let x = x_single(0.0, 1.0, 0.0);
        let yhat = Matrix::from_vector(&[1.0]);
        let target = Matrix::from_vector(&[1.0 / 2.0f64.sqrt()]);

        // Degenerate cases are bit-exact.
        let res = residual_loss(&p.system, &x, &yhat).unwrap();
        let mse = mse_loss(&yhat, &target).unwrap();
        assert_eq!(
            semi_supervised_loss(&p.system, &x, &yhat, Some(&target), 1.0).unwrap(),
            res
        );
        assert_eq!(
            semi_supervised_loss(&p.system, &x, &yhat, None, 1.0).unwrap(),
            res
        );
        assert_eq!(
            semi_supervised_loss(&p.system, &x, &yhat, Some(&target), 0.0).unwrap(),
            mse
        );

        // Hand value at lambda = 1/2: 0.5*0.5 + 0.5*0.5*(1 - 1/sqrt(2))².
        let expected = 0.25 + 0.5 * 0.5 * (1.0 - 1.0 / 2.0f64.sqrt()).powi(2);
        let got = semi_supervised_loss(&p.system, &x, &yhat, Some(&target), 0.5).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.27144).abs() < 1e-5);

        // Blend linearity over a lambda sweep.
        for i in 0..=10 {
            let lambda = i as f64 / 10.0;
            let blended =
                semi_supervised_loss(&p.system, &x, &yhat, Some(&target), lambda).unwrap();
            let manual = if lambda == 1.0 {
                res
            } else if lambda == 0.0 {
                mse
            } else {
                lambda * res + (1.0 - lambda) * mse
            };
            assert_eq!(blended, manual, "lambda {lambda}");
        }

        // Missing targets with lambda < 1 is an error.
        assert!(semi_supervised_loss(&p.system, &x, &yhat, None, 0.5).is_err());
    }

    #[test]
    fn semi_supervised_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let p = simpleloop();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for lambda in [0.0, 0.3, 0.7, 1.0] {
            for _ in 0..20 {
                let x = x_single(0.0, rng.random_range(1.0..3.0), rng.random_range(0.0..1.3));
                let y = vec![rng.random_range(-1.0..2.0)];
                let t = Matrix::from_vector(&[rng.random_range(-1.0..2.0)]);
                let ym = Matrix::from_vector(&y);
                let grad =
                    semi_supervised_gradient(&p.system, &x, &ym, Some(&t), lambda).unwrap();
                let h = 1e-6;
                let lp = semi_supervised_loss(
                    &p.system,
                    &x,
                    &Matrix::from_vector(&[y[0] + h]),
                    Some(&t),
                    lambda,
                )
                .unwrap();
                let lm = semi_supervised_loss(
                    &p.system,
                    &x,
                    &Matrix::from_vector(&[y[0] - h]),
                    Some(&t),
                    lambda,
                )
                .unwrap();
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grad.get(0, 0);
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!((analytic - numeric).abs() / denom < 1e-6, "lambda {lambda}");
            }
        }
    }

    #[test]
    fn successive_convergence_examples() {
        let tol = ToleranceSpec::new(1e-4, 1e-3, 1).unwrap();
        let prev = Matrix::from_vector(&[1.0]);
        let now = Matrix::from_vector(&[1.0005]);
        assert!(successive_convergence(&prev, &now, &tol));
        assert!(successive_convergence(&prev, &prev, &tol));
        // One violating component among many passing.
        let prev = Matrix::from_vector(&[1.0, 2.0, 3.0]);
        let now = Matrix::from_vector(&[1.0005, 2.001, 3.5]);
        assert!(!successive_convergence(&prev, &now, &tol));
    }

    fn small_sobol_dataset(n: usize) -> Dataset {
        let p = simpleloop();
        let bounds = InputBounds::new(p.system.input_bounds().unwrap().to_vec()).unwrap();
        Dataset::inputs_only(
            sobol_sample(&bounds, n, 1).unwrap(),
            SampleMethod::Sobol,
            Duration::ZERO,
        )
    }

    fn quick_config(epochs: usize, seed: u64) -> TrainConfig {
        let schedule = LrSchedule::new(3e-3, epochs.max(1)).unwrap();
        let mut config = TrainConfig::new(epochs, schedule, LossMode::Residual, seed);
        config.batch_size = 32;
        config.metric_every = 0;
        config
    }

    #[test]
    fn zero_epochs_returns_initial_net() {
        let p = simpleloop();
        let data = small_sobol_dataset(64);
        let net = crate::nn::init_network(&[2, 8, 1], crate::nn::Activation::ReLU, 1).unwrap();
        let before = net.clone();
        let (after, report) = train(&p.system, &data, None, net, &quick_config(0, 0)).unwrap();
        assert_eq!(after, before);
        assert_eq!(report.epochs_run, 0);
        assert!(report.train_loss.is_empty());
    }

    #[test]
    fn residual_training_reduces_the_loss() {
        let p = simpleloop();
        let data = small_sobol_dataset(256);
        let net = crate::nn::init_network(&[2, 32, 1], crate::nn::Activation::ReLU, 3).unwrap();
        let config = quick_config(60, 3);
        let initial = {
            let net_inputs = p.system.net_input_matrix(&data.inputs);
            let yhat = forward(&net, &net_inputs).unwrap();
            residual_loss(&p.system, &data.inputs, &yhat).unwrap()
        };
        let (_net, report) = train(&p.system, &data, None, net, &config).unwrap();
        assert_eq!(report.epochs_run, 60);
        assert!(
            report.final_train_loss < initial * 0.2,
            "loss {} vs initial {initial}",
            report.final_train_loss
        );
    }

    #[test]
    fn training_is_bit_reproducible() {
        let p = simpleloop();
        let data = small_sobol_dataset(128);
        let run = || {
            let net =
                crate::nn::init_network(&[2, 16, 1], crate::nn::Activation::ReLU, 9).unwrap();
            let mut config = quick_config(12, 42);
            config.metric_every = 5;
            let validation = small_sobol_dataset(32);
            train(&p.system, &data, Some(&validation), net, &config).unwrap()
        };
        let (net_a, report_a) = run();
        let (net_b, report_b) = run();
        assert_eq!(net_a, net_b);
        assert_eq!(report_a.train_loss, report_b.train_loss);
        assert_eq!(report_a.val_loss, report_b.val_loss);
        assert_eq!(report_a.newton_metric, report_b.newton_metric);
    }

    #[test]
    fn supervised_training_needs_labels() {
        let p = simpleloop();
        let data = small_sobol_dataset(64);
        let net = crate::nn::init_network(&[2, 8, 1], crate::nn::Activation::ReLU, 1).unwrap();
        let mut config = quick_config(5, 0);
        config.loss_mode = LossMode::Supervised;
        assert!(train(&p.system, &data, None, net, &config).is_err());
    }

    #[test]
    fn two_phase_switch_zero_equals_pure_residual() {
        let p = simpleloop();
        let data = small_sobol_dataset(128);
        let guidance = {
            let mut d = small_sobol_dataset(16);
            let labels: Vec<Vec<f64>> = (0..16)
                .map(|j| vec![simpleloop_roots(d.inputs.get(1, j), d.inputs.get(2, j)).1])
                .collect();
            d.labels = Some(Matrix::from_columns(&labels).unwrap());
            d
        };
        let net = crate::nn::init_network(&[2, 16, 1], crate::nn::Activation::ReLU, 5).unwrap();

        let mut two_phase_config = quick_config(10, 21);
        two_phase_config.loss_mode = LossMode::TwoPhase { switch_epoch: 0 };
        let (net_a, report_a) =
            two_phase_train(&p.system, &guidance, &data, net.clone(), &two_phase_config).unwrap();

        let residual_config = quick_config(10, 21);
        let (net_b, report_b) = train(&p.system, &data, None, net, &residual_config).unwrap();
        assert_eq!(net_a, net_b);
        assert_eq!(report_a.train_loss, report_b.train_loss);
    }

    #[test]
    fn two_phase_marks_switch_and_improves_in_phase_two() {
        let p = simpleloop();
        let data = small_sobol_dataset(256);
        let guidance = {
            let mut d = small_sobol_dataset(32);
            let labels: Vec<Vec<f64>> = (0..32)
                .map(|j| vec![simpleloop_roots(d.inputs.get(1, j), d.inputs.get(2, j)).1])
                .collect();
            d.labels = Some(Matrix::from_columns(&labels).unwrap());
            d
        };
        let net = crate::nn::init_network(&[2, 32, 1], crate::nn::Activation::ReLU, 8).unwrap();
        let mut config = quick_config(80, 4);
        config.batch_size = 16;
        config.loss_mode = LossMode::TwoPhase { switch_epoch: 20 };
        let (_net, report) = two_phase_train(&p.system, &guidance, &data, net, &config).unwrap();
        assert_eq!(report.switch_epoch, Some(20));
        // Residual-phase loss trends down after the switch.
        let at_switch = report.train_loss[20];
        let later = report.train_loss[70];
        assert!(later < at_switch, "no phase-2 progress: {at_switch} -> {later}");
    }

    #[test]
    fn early_stop_on_loss() {
        let p = simpleloop();
        let data = small_sobol_dataset(128);
        let net = crate::nn::init_network(&[2, 32, 1], crate::nn::Activation::ReLU, 3).unwrap();
        let mut config = quick_config(500, 3);
        config.stop_on_loss_atol = Some(5e-2);
        let (_net, report) = train(&p.system, &data, None, net, &config).unwrap();
        assert_eq!(report.stop_reason, StopReason::AbsoluteTolReached);
        assert!(report.epochs_run < 500);
    }

    #[test]
    fn report_csv_has_header_and_rows() {
        let p = simpleloop();
        let data = small_sobol_dataset(64);
        let net = crate::nn::init_network(&[2, 8, 1], crate::nn::Activation::ReLU, 2).unwrap();
        let mut config = quick_config(6, 1);
        config.metric_every = 3;
        let (_net, report) = train(&p.system, &data, None, net, &config).unwrap();
        let path = std::env::temp_dir().join("loopsurro-train-report.csv");
        save_report(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,val_loss,lr,newton_metric");
        assert_eq!(lines.len(), 7);
        std::fs::remove_file(&path).unwrap();
    }
}
