//! Learning-rate and momentum policies.
//!
//! Both policies are functions of the training progress `fraction` in
//! `[0, 1]`, so callers choose whether a step is an iteration or an epoch.
//!
//! * Poly: `lr = base_lr * (1 - fraction)^power` with constant momentum. The
//!   default power of 1.0 is a straight linear decay to zero; the common
//!   "poly" variant uses 0.9.
//! * One-cycle: over the first `warmup_fraction` of training the rate ramps
//!   from `base_lr / start_div` up to `base_lr` while momentum falls from
//!   `m_high` to `m_low`; for the rest the rate anneals to
//!   `base_lr / final_div` and momentum climbs back to `m_high`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::{Error, Result};

pub const DEFAULT_BASE_LR: f64 = 0.01;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePoint {
    pub step: usize,
    pub fraction: f64,
    pub learning_rate: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shape {
    #[default]
    Linear,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyParams {
    pub base_lr: f64,
    pub power: f64,
    pub momentum: f64,
}

impl Default for PolyParams {
    fn default() -> Self {
        Self {
            base_lr: DEFAULT_BASE_LR,
            power: 1.0,
            momentum: DEFAULT_MOMENTUM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneCycleParams {
    pub base_lr: f64,
    pub warmup_fraction: f64,
    pub start_div: f64,
    pub final_div: f64,
    pub m_high: f64,
    pub m_low: f64,
    pub shape: Shape,
}

impl Default for OneCycleParams {
    fn default() -> Self {
        Self {
            base_lr: DEFAULT_BASE_LR,
            warmup_fraction: 0.3,
            start_div: 10.0,
            final_div: 4.0,
            m_high: 0.9,
            m_low: 0.8,
            shape: Shape::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Poly(PolyParams),
    OneCycle(OneCycleParams),
}

impl Policy {
    /// `(learning_rate, momentum)` at `fraction`.
    pub fn eval(&self, fraction: f64) -> Result<(f64, f64)> {
        match self {
            Policy::Poly(p) => poly(fraction, p.base_lr, p.power).map(|(lr, _)| (lr, p.momentum)),
            Policy::OneCycle(p) => onecycle(fraction, p),
        }
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&fraction) {
        Ok(())
    } else {
        Err(Error::FractionOutOfRange(fraction))
    }
}

/// Polynomial decay with the default constant momentum of 0.9.
pub fn poly(fraction: f64, base_lr: f64, power: f64) -> Result<(f64, f64)> {
    check_fraction(fraction)?;
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if !positive(base_lr) || !positive(power) {
        return Err(Error::InvalidArgument(alloc::format!(
            "poly needs positive base_lr and power, got {base_lr} and {power}"
        )));
    }
    Ok((
        base_lr * Float::powf(1.0 - fraction, power),
        DEFAULT_MOMENTUM,
    ))
}

/// Moves from `from` to `to` as `t` goes 0 -> 1.
fn interpolate(from: f64, to: f64, t: f64, shape: Shape) -> f64 {
    match shape {
        Shape::Linear => from + (to - from) * t,
        Shape::Cosine => to + (from - to) * (1.0 + Float::cos(core::f64::consts::PI * t)) / 2.0,
    }
}

pub fn onecycle(fraction: f64, p: &OneCycleParams) -> Result<(f64, f64)> {
    check_fraction(fraction)?;
    let valid = p.base_lr > 0.0
        && p.warmup_fraction > 0.0
        && p.warmup_fraction < 1.0
        && p.start_div > 0.0
        && p.final_div > 0.0
        && (0.0..=1.0).contains(&p.m_low)
        && (0.0..=1.0).contains(&p.m_high);
    if !valid {
        return Err(Error::InvalidArgument(alloc::format!(
            "invalid one-cycle parameters {p:?}"
        )));
    }
    let start_lr = p.base_lr / p.start_div;
    let final_lr = p.base_lr / p.final_div;
    if fraction <= p.warmup_fraction {
        let t = fraction / p.warmup_fraction;
        Ok((
            interpolate(start_lr, p.base_lr, t, p.shape),
            interpolate(p.m_high, p.m_low, t, p.shape),
        ))
    } else {
        let t = (fraction - p.warmup_fraction) / (1.0 - p.warmup_fraction);
        Ok((
            interpolate(p.base_lr, final_lr, t, p.shape),
            interpolate(p.m_low, p.m_high, t, p.shape),
        ))
    }
}

/// Evaluates `policy` at `step / (total_steps - 1)` for every step.
pub fn tabulate(policy: &Policy, total_steps: usize) -> Result<Vec<SchedulePoint>> {
    if total_steps < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "a schedule table needs at least 2 steps, got {total_steps}"
        )));
    }
    let last = (total_steps - 1) as f64;
    (0..total_steps)
        .map(|step| {
            let fraction = step as f64 / last;
            let (learning_rate, momentum) = policy.eval(fraction)?;
            Ok(SchedulePoint {
                step,
                fraction,
                learning_rate,
                momentum,
            })
        })
        .collect()
}
