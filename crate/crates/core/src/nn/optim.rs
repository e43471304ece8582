use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleForm {
    Constant,
    InverseTime,
}

/// Learning-rate schedule.
///
/// The inverse-time form `base / (1 + n * decay)` with `decay > 0` has a divergent sum
/// and a convergent sum of squares, which is what stochastic-approximation
/// convergence arguments ask of a step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    #[serde(default)]
    pub decay: f64,
    pub form: ScheduleForm,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        LrSchedule { base, decay: 0.0, form: ScheduleForm::Constant }
    }

    pub fn inverse_time(base: f64, decay: f64) -> Self {
        LrSchedule { base, decay, form: ScheduleForm::InverseTime }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base.is_finite() && self.base >= 0.0) {
            return Err(Error::config(format!("learning rate base must be finite and >= 0, got {}", self.base)));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(Error::config(format!("learning rate decay must be finite and >= 0, got {}", self.decay)));
        }
        Ok(())
    }

    pub fn lr_at(&self, n: u64) -> f64 {
        match self.form {
            ScheduleForm::Constant => self.base,
            ScheduleForm::InverseTime => self.base / (1.0 + n as f64 * self.decay),
        }
    }
}

pub fn lr_at(schedule: &LrSchedule, n: u64) -> f64 {
    schedule.lr_at(n)
}

/// `params - lr * grad`.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    params.check_same_layout(grad)?;
    let values = params.values.iter().zip(&grad.values).map(|(p, g)| p - lr * g).collect();
    Ok(ParamVector { values, layout: params.layout.clone() })
}

/// In-place variant of [`sgd_step`].
pub fn sgd_step_in_place(params: &mut ParamVector, grad: &ParamVector, lr: f64) -> Result<()> {
    params.check_same_layout(grad)?;
    for (p, g) in params.values.iter_mut().zip(&grad.values) {
        *p -= lr * g;
    }
    Ok(())
}
