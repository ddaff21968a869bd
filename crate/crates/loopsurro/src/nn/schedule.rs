//! Staged learning-rate schedule.
//!
//! The rate stays at `initial_lr` for the first half of training and is then
//! multiplied by `decay_factor` at evenly spaced epochs. With the defaults and
//! 2000 total epochs the decay steps land at epochs 1000, 1400 and 1800.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub initial_lr: f64,
    pub total_epochs: usize,
    pub decay_factor: f64,
    pub decay_start_fraction: f64,
    pub decay_interval_fraction: f64,
}

impl LrSchedule {
    pub fn new(initial_lr: f64, total_epochs: usize) -> Result<Self> {
        let schedule = LrSchedule {
            initial_lr,
            total_epochs,
            decay_factor: 0.2,
            decay_start_fraction: 0.5,
            decay_interval_fraction: 0.2,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn constant(lr: f64, total_epochs: usize) -> Result<Self> {
        let schedule = LrSchedule {
            initial_lr: lr,
            total_epochs,
            decay_factor: 0.2,
            decay_start_fraction: 1.0,
            decay_interval_fraction: 0.2,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0) {
            return Err(Error::Config(format!(
                "initial learning rate must be positive, got {}",
                self.initial_lr
            )));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(Error::Config(format!(
                "decay factor must be in (0,1), got {}",
                self.decay_factor
            )));
        }
        if self.decay_interval_fraction <= 0.0 {
            return Err(Error::Config("decay interval fraction must be positive".into()));
        }
        Ok(())
    }

    /// First epoch at which the rate is below `initial_lr`.
    fn decay_start(&self) -> usize {
        (self.total_epochs as f64 * self.decay_start_fraction).round() as usize
    }

    fn decay_interval(&self) -> usize {
        ((self.total_epochs as f64 * self.decay_interval_fraction).round() as usize).max(1)
    }

    /// Piecewise-constant rate for the given epoch.
    pub fn lr_at_epoch(&self, epoch: usize) -> Result<f64> {
        if epoch >= self.total_epochs {
            return Err(Error::Config(format!(
                "epoch {epoch} out of range, schedule covers {} epochs",
                self.total_epochs
            )));
        }
        let start = self.decay_start();
        if epoch < start {
            return Ok(self.initial_lr);
        }
        let decays = 1 + (epoch - start) / self.decay_interval();
        Ok(self.initial_lr * self.decay_factor.powi(decays as i32))
    }
}
