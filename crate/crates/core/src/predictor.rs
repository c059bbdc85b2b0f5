//! Remote-side prediction cascade.
//!
//! Every sensor period the remote node chains `M` one-period-ahead model
//! simulations. Each iteration resets the model state (to the measurement
//! when one arrived, otherwise to the previous estimate), predicts the fast
//! PD actions the local side will apply, propagates the model over the
//! period and predicts the next slow PI action. The resulting packet
//! carries the current PI action plus `M` future ones.

use crate::controllers::{pd_actions, PidDesign, ScheduledGains};
use crate::error::{Error, Result};
use crate::plant::DiscretePlant;
use crate::schedule::{build_schedule, Variant};

/// Remote-to-local payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPacket {
    /// Sensor period index the packet was generated for.
    pub seq: u64,
    pub u_pi_current: f64,
    /// `u_pi_future[i - 1]` is the predicted PI action for period `seq + i`.
    pub u_pi_future: Vec<f64>,
    /// The current action was computed from an estimated output.
    pub estimated: bool,
}

impl ControlPacket {
    /// Packet assumed to be stored at the local side before the first
    /// delivery: zero action for period 0 and no predictions beyond it.
    pub fn at_rest() -> Self {
        ControlPacket {
            seq: 0,
            u_pi_current: 0.0,
            u_pi_future: Vec::new(),
            estimated: true,
        }
    }

    /// PI action this packet provides for `period`, if it covers it.
    pub fn action_for(&self, period: u64) -> Option<f64> {
        match period.checked_sub(self.seq)? {
            0 => Some(self.u_pi_current),
            d => self.u_pi_future.get(d as usize - 1).copied(),
        }
    }

    /// CSV row `k,u_pi_current,future_0..future_{M-1},estimated`.
    pub fn csv_row(&self) -> String {
        let mut row = format!("{},{:.16e}", self.seq, self.u_pi_current);
        for v in &self.u_pi_future {
            row.push_str(&format!(",{v:.16e}"));
        }
        row.push_str(if self.estimated { ",1" } else { ",0" });
        row
    }
}

/// Estimates carried between sensor periods.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PredictorState {
    /// Estimated state at the start of the current period.
    pub x_hat: [f64; 2],
    pub y_hat: f64,
    /// Estimated PI action for the current period.
    pub u_pi_hat: f64,
    /// PI action assumed converted at the local side in the previous period.
    pub pd_prev: f64,
    /// Last PD action assumed applied in the previous period.
    pub last_action: f64,
}

/// Model and timing used by the cascade.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub design: PidDesign,
    pub variant: Variant,
    pub horizon: usize,
    /// Model at the actuation period `T`.
    pub model_fast: DiscretePlant,
    /// Model at the basic period `t`.
    pub model_basic: DiscretePlant,
    pub l: usize,
    /// Delay-dependent only: gains and switch tick for the first iteration
    /// (delay mode) and for the rest (maximum waiting time).
    pub gains_first: ScheduledGains,
    pub gains_rest: ScheduledGains,
    pub switch_first: usize,
    pub switch_rest: usize,
}

/// Iteration-dependent reset: the actual-or-estimated current state for
/// the first iteration, the previous iteration's estimate afterwards.
pub fn reset_initial_state(i: usize, current: [f64; 2], previous_estimate: [f64; 2]) -> [f64; 2] {
    if i <= 1 {
        current
    } else {
        previous_estimate
    }
}

pub fn predict_pd_actions_independent(current: f64, previous: f64, design: &PidDesign) -> Vec<f64> {
    pd_actions(current, previous, &design.nominal_gains(), design.t_fast, design.n)
}

pub fn predict_pd_actions_dependent(
    current: f64,
    previous: f64,
    gains_first: &ScheduledGains,
    gains_rest: &ScheduledGains,
    i: usize,
    design: &PidDesign,
) -> Vec<f64> {
    let g = if i <= 1 { gains_first } else { gains_rest };
    pd_actions(current, previous, g, design.t_fast, design.n)
}

/// How one period of actions is applied to the model.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a> {
    /// N steps of the period-`T` model.
    Uniform { model_fast: &'a DiscretePlant },
    /// `L * N` steps of the period-`t` model, holding `prev_action` until
    /// `switch_ticks`.
    NonUniform {
        model_basic: &'a DiscretePlant,
        l: usize,
        switch_ticks: usize,
        prev_action: f64,
    },
}

pub fn propagate_state(x: [f64; 2], actions: &[f64], how: Propagation<'_>) -> Result<([f64; 2], f64)> {
    if actions.is_empty() {
        return Err(Error::Contract("no actions to propagate".into()));
    }
    let (mut x, mut y) = (x, 0.0);
    match how {
        Propagation::Uniform { model_fast } => {
            for &u in actions {
                (x, y) = model_fast.step(x, u);
            }
        }
        Propagation::NonUniform {
            model_basic,
            l,
            switch_ticks,
            prev_action,
        } => {
            let sched = build_schedule(
                Variant::DelayDependent,
                true,
                switch_ticks,
                actions,
                actions,
                prev_action,
                l,
            )?;
            for u in sched.values {
                (x, y) = model_basic.step(x, u);
            }
        }
    }
    Ok((x, y))
}

/// One PI prediction step:
/// `u_next = u_prev + K_PI ((r_next - y_next) - (1 - NT/Ti)(r_now - y_now))`.
pub fn predict_pi_action(
    u_prev: f64,
    r_now: f64,
    r_next: f64,
    y_now: f64,
    y_next_hat: f64,
    design: &PidDesign,
) -> f64 {
    u_prev + design.k_pi * ((r_next - y_next_hat) - design.pi_memory() * (r_now - y_now))
}

/// Actual-or-estimated values for the current period.
#[derive(Debug, Clone, Copy)]
pub struct CascadeInputs<'a> {
    pub u_pi_current: f64,
    pub x_current: [f64; 2],
    pub y_current: f64,
    pub estimated: bool,
    /// `r_k ..= r_{k+M}`.
    pub references: &'a [f64],
}

/// Packet plus the model trajectory it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub packet: ControlPacket,
    /// `predicted_outputs[i - 1]` is the estimated output at period `k + i`.
    pub predicted_outputs: Vec<f64>,
    pub predicted_states: Vec<[f64; 2]>,
}

impl Predictor {
    pub fn build_packet(&self, k: u64, inputs: CascadeInputs<'_>, state: &mut PredictorState) -> Result<Cascade> {
        let m = self.horizon;
        if inputs.references.len() != m + 1 {
            return Err(Error::Contract(format!(
                "reference window of {} values for horizon {m}",
                inputs.references.len()
            )));
        }
        let mut future = Vec::with_capacity(m);
        let mut outputs = Vec::with_capacity(m);
        let mut states = Vec::with_capacity(m);

        let mut x_est = inputs.x_current;
        let mut y_now = inputs.y_current;
        let mut u_now = inputs.u_pi_current;
        let mut u_before = state.pd_prev;
        let mut prev_action = state.last_action;
        let mut first_last_action = prev_action;

        for i in 1..=m {
            let x0 = reset_initial_state(i, inputs.x_current, x_est);
            let (x_next, y_next, actions) = match self.variant {
                Variant::DelayIndependent => {
                    let actions = predict_pd_actions_independent(u_now, u_before, &self.design);
                    let (x, y) = propagate_state(
                        x0,
                        &actions,
                        Propagation::Uniform {
                            model_fast: &self.model_fast,
                        },
                    )?;
                    (x, y, actions)
                }
                Variant::DelayDependent => {
                    let actions = predict_pd_actions_dependent(
                        u_now,
                        u_before,
                        &self.gains_first,
                        &self.gains_rest,
                        i,
                        &self.design,
                    );
                    let switch_ticks = if i == 1 { self.switch_first } else { self.switch_rest };
                    let (x, y) = propagate_state(
                        x0,
                        &actions,
                        Propagation::NonUniform {
                            model_basic: &self.model_basic,
                            l: self.l,
                            switch_ticks,
                            prev_action,
                        },
                    )?;
                    (x, y, actions)
                }
            };
            let last = *actions.last().expect("N >= 1");
            if i == 1 {
                first_last_action = last;
            }
            prev_action = last;

            let u_next = predict_pi_action(
                u_now,
                inputs.references[i - 1],
                inputs.references[i],
                y_now,
                y_next,
                &self.design,
            );
            future.push(u_next);
            outputs.push(y_next);
            states.push(x_next);

            u_before = u_now;
            u_now = u_next;
            y_now = y_next;
            x_est = x_next;
        }

        *state = PredictorState {
            x_hat: states[0],
            y_hat: outputs[0],
            u_pi_hat: future[0],
            pd_prev: inputs.u_pi_current,
            last_action: first_last_action,
        };

        Ok(Cascade {
            packet: ControlPacket {
                seq: k,
                u_pi_current: inputs.u_pi_current,
                u_pi_future: future,
                estimated: inputs.estimated,
            },
            predicted_outputs: outputs,
            predicted_states: states,
        })
    }
}
