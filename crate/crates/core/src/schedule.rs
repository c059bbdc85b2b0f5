//! Per-tick actuation inside one sensor period.
//!
//! A sensor period holds `L * N` basic ticks. Fast actions are indexed by
//! `tick / L`; a switch tick splits the period into a head segment and the
//! new actions.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Fast PD retuned with the measured delay; holds the previous action
    /// until the new ones arrive.
    DelayDependent,
    /// Fixed-gain fast PD; acts from the start of the period using
    /// predicted actions.
    DelayIndependent,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::DelayDependent => "dd",
            Variant::DelayIndependent => "di",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// Estimates applied uniformly from tick 0.
    Uniform,
    /// Estimated head until arrival, then the received actions.
    EstimatedHead,
    /// Previous action held until the waiting time, then estimated actions.
    HeldEstimated,
    /// Previous action held until arrival, then the received actions.
    Held,
    /// No new information: previous action held over the whole period.
    HoldAll,
}

impl Pattern {
    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Uniform => "uniform",
            Pattern::EstimatedHead => "estimated_head",
            Pattern::HeldEstimated => "held_estimated",
            Pattern::Held => "held",
            Pattern::HoldAll => "hold_all",
        }
    }

    pub fn parse(s: &str) -> Option<Pattern> {
        [
            Pattern::Uniform,
            Pattern::EstimatedHead,
            Pattern::HeldEstimated,
            Pattern::Held,
            Pattern::HoldAll,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActuationSchedule {
    pub values: Vec<f64>,
    pub pattern: Pattern,
}

impl ActuationSchedule {
    pub fn hold_all(action: f64, ticks: usize) -> Self {
        ActuationSchedule {
            values: vec![action; ticks],
            pattern: Pattern::HoldAll,
        }
    }
}

fn split(
    head: impl Fn(usize) -> f64,
    tail: &[f64],
    switch: usize,
    l: usize,
) -> Vec<f64> {
    (0..l * tail.len())
        .map(|tick| if tick < switch { head(tick) } else { tail[tick / l] })
        .collect()
}

/// Builds the tick-level schedule for one sensor period.
///
/// `tau_ticks` is the arrival tick when `delivered`, or the waiting time
/// for a delay-dependent loss; it is ignored for a delay-independent loss.
pub fn build_schedule(
    variant: Variant,
    delivered: bool,
    tau_ticks: usize,
    new_actions: &[f64],
    stored_estimates: &[f64],
    last_prev_action: f64,
    l: usize,
) -> Result<ActuationSchedule> {
    let n = new_actions.len();
    if l == 0 || n == 0 {
        return Err(Error::Contract("schedule needs L >= 1 and N >= 1".into()));
    }
    if stored_estimates.len() != n {
        return Err(Error::Contract(format!(
            "{} stored estimates for {} fast samples",
            stored_estimates.len(),
            n
        )));
    }
    let ignored = variant == Variant::DelayIndependent && !delivered;
    if !ignored && tau_ticks >= l * n {
        return Err(Error::Contract(format!(
            "switch tick {tau_ticks} outside the period of {} ticks",
            l * n
        )));
    }
    let held = |_| last_prev_action;
    let (values, pattern) = match (variant, delivered) {
        (Variant::DelayIndependent, true) => (
            split(|tick| stored_estimates[tick / l], new_actions, tau_ticks, l),
            Pattern::EstimatedHead,
        ),
        (Variant::DelayIndependent, false) => (split(held, stored_estimates, 0, l), Pattern::Uniform),
        (Variant::DelayDependent, true) => (split(held, new_actions, tau_ticks, l), Pattern::Held),
        (Variant::DelayDependent, false) => (
            split(held, stored_estimates, tau_ticks, l),
            Pattern::HeldEstimated,
        ),
    };
    Ok(ActuationSchedule { values, pattern })
}
