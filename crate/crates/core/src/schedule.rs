//! One-cycle learning-rate policy: linear warm start, then cosine annealing.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

pub const MAX_LR: f64 = 1e-4;
pub const END_LR: f64 = 1e-6;
/// Forward iterations (at the configured batch size) spent warming up.
pub const WARMUP_ITERATIONS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub warmup_steps: usize,
    pub max_lr: f64,
    pub end_lr: f64,
    pub total_steps: usize,
}

impl ScheduleConfig {
    pub fn new(warmup_steps: usize, max_lr: f64, end_lr: f64, total_steps: usize) -> Result<Self> {
        let cfg = Self {
            warmup_steps,
            max_lr,
            end_lr,
            total_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference rates (max 1e-4, end 1e-6). The warm-up is clipped so that at
    /// least one annealing step remains.
    pub fn reference(warmup_steps: usize, total_steps: usize) -> Result<Self> {
        Self::new(
            warmup_steps.min(total_steps.saturating_sub(1)),
            MAX_LR,
            END_LR,
            total_steps,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be positive".into()));
        }
        if self.warmup_steps >= self.total_steps {
            return Err(Error::Config(format!(
                "warmup_steps {} must be below total_steps {}",
                self.warmup_steps, self.total_steps
            )));
        }
        if !(self.end_lr > 0.0 && self.end_lr.is_finite() && self.max_lr.is_finite()) {
            return Err(Error::Config("learning rates must be positive and finite".into()));
        }
        if self.end_lr > self.max_lr {
            return Err(Error::Config(format!(
                "end_lr {} exceeds max_lr {}",
                self.end_lr, self.max_lr
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize) -> Result<f64> {
        lr_at(step, self)
    }
}

/// Optimizer steps covering `600 * batch_size` images when every step
/// accumulates `grad_accum` batches: `ceil(600 / grad_accum)`.
pub fn reference_warmup_steps(batch_size: usize, grad_accum: usize) -> usize {
    assert!(batch_size >= 1 && grad_accum >= 1);
    WARMUP_ITERATIONS.div_ceil(grad_accum)
}

pub fn lr_at(step: usize, config: &ScheduleConfig) -> Result<f64> {
    let ScheduleConfig {
        warmup_steps,
        max_lr,
        end_lr,
        total_steps,
    } = *config;
    if step >= total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: total_steps,
        });
    }
    if step < warmup_steps {
        let frac = step as f64 / warmup_steps as f64;
        return Ok(end_lr + (max_lr - end_lr) * frac);
    }
    let span = total_steps - 1 - warmup_steps;
    if step == warmup_steps {
        // also covers span == 0, where the peak is the only annealing step
        return Ok(max_lr);
    }
    if step == total_steps - 1 {
        return Ok(end_lr);
    }
    let u = (step - warmup_steps) as f64 / span as f64;
    Ok(end_lr + 0.5 * (max_lr - end_lr) * (1.0 + (PI * u).cos()))
}

/// Writes `step,lr` rows for every step of the schedule.
pub fn write_schedule_csv<W: Write>(config: &ScheduleConfig, w: W) -> Result<()> {
    config.validate()?;
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["step", "lr"])?;
    for step in 0..config.total_steps {
        let lr = lr_at(step, config)?;
        w.write_record([step.to_string(), format!("{lr:e}")])?;
    }
    w.flush().map_err(|e| Error::io("<schedule writer>", e))?;
    Ok(())
}
