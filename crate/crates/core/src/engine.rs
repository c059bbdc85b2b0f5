//! Fixed-step simulation of the networked loop on the basic-period grid.
//!
//! Per sensor period `k`, on every axis:
//!
//! 1. the sensor samples the plant state and output at `k NT`;
//! 2. the sensor packet crosses the local-to-remote link; the remote node
//!    runs the PI on the measurement, or on its own estimate when the
//!    packet is lost, then runs the prediction cascade;
//! 3. the control packet crosses the remote-to-local link;
//! 4. the local node builds the tick-level actuation schedule for the
//!    period and the plant is stepped at the basic period `t`.

use crate::controllers::{pd_actions, pi_step, schedule_gains, PiState, ScheduledGains};
use crate::error::{Error, Result};
use crate::network::{delay_mode, quantize_delay, ChannelRealization, ChannelState, Link};
use crate::plant::{clamp_input, discretize_zoh, DiscretePlant};
use crate::predictor::{CascadeInputs, ControlPacket, Predictor, PredictorState};
use crate::scenario::{ControllerVariant, ScenarioConfig, Timing};
use crate::schedule::{build_schedule, ActuationSchedule, Variant};
use crate::trace::{AxisTrace, PeriodEvent, SimTrace, TickRow};

/// Channel draws for every axis of a scenario, shared across variants.
pub fn draw_channels(cfg: &ScenarioConfig, timing: &Timing) -> Vec<ChannelRealization> {
    (0..cfg.reference.axes())
        .map(|axis| ChannelRealization::draw(&cfg.channel, cfg.seed, axis, timing.periods))
        .collect()
}

/// Runs one variant with its own channel draws (from the scenario seed).
pub fn run(cfg: &ScenarioConfig, variant: ControllerVariant) -> Result<SimTrace> {
    let timing = validate_for(cfg, &[variant])?;
    let channels = draw_channels(cfg, &timing);
    run_with_channels(cfg, variant, &channels, &timing)
}

fn validate_for(cfg: &ScenarioConfig, variants: &[ControllerVariant]) -> Result<Timing> {
    let mut c = cfg.clone();
    c.variants = variants.to_vec();
    c.validate()
}

/// Runs several variants against the same channel realization.
pub fn run_comparison(cfg: &ScenarioConfig, variants: &[ControllerVariant]) -> Result<Vec<SimTrace>> {
    let timing = validate_for(cfg, variants)?;
    let channels = draw_channels(cfg, &timing);
    variants
        .iter()
        .map(|v| run_with_channels(cfg, *v, &channels, &timing))
        .collect()
}

pub fn run_with_channels(
    cfg: &ScenarioConfig,
    variant: ControllerVariant,
    channels: &[ChannelRealization],
    timing: &Timing,
) -> Result<SimTrace> {
    if channels.len() != cfg.reference.axes() {
        return Err(Error::Contract(format!(
            "{} channel realizations for {} axes",
            channels.len(),
            cfg.reference.axes()
        )));
    }
    let axes = channels
        .iter()
        .enumerate()
        .map(|(axis, ch)| {
            let ideal;
            let ch = if variant.uses_network() {
                ch
            } else {
                ideal = ChannelRealization::ideal(timing.periods);
                &ideal
            };
            if ch.periods.len() < timing.periods {
                return Err(Error::Contract("channel realization shorter than the run".into()));
            }
            AxisLoop::new(cfg, variant, timing, axis)?.run(ch)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimTrace {
        variant,
        t_basic: timing.t_basic,
        ticks_per_period: timing.ticks_per_period(),
        axes,
    })
}

struct AxisLoop<'a> {
    cfg: &'a ScenarioConfig,
    variant: ControllerVariant,
    timing: &'a Timing,
    axis: usize,
    plant: DiscretePlant,
    predictor: Predictor,
    /// Delay-dependent: gains used after a loss, and the waiting time in ticks.
    wait_gains: ScheduledGains,
    wait_ticks: usize,
}

impl<'a> AxisLoop<'a> {
    fn new(cfg: &'a ScenarioConfig, variant: ControllerVariant, timing: &'a Timing, axis: usize) -> Result<Self> {
        let plant = discretize_zoh(&cfg.true_plant()?, timing.t_basic)?;
        let pd_variant = variant.pd_variant();
        let design = cfg.design;
        let (gains_first, gains_rest, switch_first, switch_rest) = match pd_variant {
            Variant::DelayDependent => {
                let mode = delay_mode(&cfg.channel.delay);
                (
                    schedule_gains(mode, &design, &cfg.schedule)?,
                    schedule_gains(cfg.dd_wait, &design, &cfg.schedule)?,
                    quantize_delay(mode, timing.t_basic),
                    quantize_delay(cfg.dd_wait, timing.t_basic),
                )
            }
            Variant::DelayIndependent => (design.nominal_gains(), design.nominal_gains(), 0, 0),
        };
        let predictor = Predictor {
            design,
            variant: pd_variant,
            horizon: cfg.channel.dropout.max_consecutive,
            model_fast: discretize_zoh(&cfg.model, timing.t_fast)?,
            model_basic: discretize_zoh(&cfg.model, timing.t_basic)?,
            l: timing.l,
            gains_first,
            gains_rest,
            switch_first,
            switch_rest,
        };
        Ok(AxisLoop {
            cfg,
            variant,
            timing,
            axis,
            plant,
            predictor,
            wait_gains: gains_rest,
            wait_ticks: switch_rest,
        })
    }

    fn reference_at_tick(&self, tick: usize) -> f64 {
        self.cfg.reference.value(self.axis, self.timing.tick_time(tick))
    }

    fn run(&self, channel: &ChannelRealization) -> Result<AxisTrace> {
        let timing = self.timing;
        let design = &self.cfg.design;
        let lnt = timing.ticks_per_period();
        let m = self.predictor.horizon;
        let prediction = self.variant.prediction();
        let pd_variant = self.variant.pd_variant();
        let t_basic = timing.t_basic;

        let mut trace = AxisTrace {
            ticks: Vec::with_capacity(timing.total_ticks()),
            events: Vec::with_capacity(timing.periods),
        };
        let mut x = [0.0, 0.0];

        // remote side
        let mut pi = PiState::default();
        let mut pstate = PredictorState::default();
        // local side
        let mut stored = ControlPacket::at_rest();
        let mut local_pd_prev = 0.0;
        let mut last_applied = 0.0;
        let mut seqs = ChannelState::default();

        for k in 0..timing.periods {
            let pc = channel.periods[k];
            let tick0 = k * lnt;
            let y = self.plant.output(x);
            let r_k = self.reference_at_tick(tick0);

            // remote node
            let remote = if pc.lr.delivered {
                seqs.record_delivery(Link::LocalToRemote, k as u64)?;
                let (u, next) = pi_step(pi, r_k, y, design);
                pi = next;
                Some((u, x, y, false, pc.tau_lr))
            } else if prediction {
                let u = pstate.u_pi_hat;
                pi = PiState {
                    u_prev: u,
                    e_prev: r_k - pstate.y_hat,
                };
                Some((u, pstate.x_hat, pstate.y_hat, true, self.cfg.channel.tau_max_lr))
            } else {
                None
            };

            let mut packet = None;
            let mut arrival = None;
            if let Some((u, xs, ys, estimated, ready)) = remote {
                let pk = if prediction {
                    let refs: Vec<f64> = (0..=m)
                        .map(|i| self.reference_at_tick((k + i) * lnt))
                        .collect();
                    self.predictor
                        .build_packet(
                            k as u64,
                            CascadeInputs {
                                u_pi_current: u,
                                x_current: xs,
                                y_current: ys,
                                estimated,
                                references: &refs,
                            },
                            &mut pstate,
                        )?
                        .packet
                } else {
                    ControlPacket {
                        seq: k as u64,
                        u_pi_current: u,
                        u_pi_future: Vec::new(),
                        estimated,
                    }
                };
                if pc.rl.delivered {
                    arrival = Some(ready + pc.tau_rl);
                }
                packet = Some(pk);
            }

            // local node
            let mut arrival_tick = None;
            let mut horizon_exhausted = false;
            let mut stored_estimate = |stored: &ControlPacket| match stored.action_for(k as u64) {
                Some(v) => v,
                None => {
                    horizon_exhausted = true;
                    // furthest estimate available
                    stored.u_pi_future.last().copied().unwrap_or(stored.u_pi_current)
                }
            };

            let schedule: ActuationSchedule = match pd_variant {
                Variant::DelayIndependent => {
                    let est_pi = stored_estimate(&stored);
                    let est = pd_actions(est_pi, local_pd_prev, &design.nominal_gains(), design.t_fast, design.n);
                    match (arrival, packet.as_ref()) {
                        (Some(at), Some(pk)) => {
                            let tick = quantize_delay(at, t_basic);
                            if tick >= lnt {
                                return Err(Error::Contract(format!(
                                    "control packet for period {k} arrives after the period ends"
                                )));
                            }
                            let new = pd_actions(pk.u_pi_current, local_pd_prev, &design.nominal_gains(), design.t_fast, design.n);
                            seqs.record_delivery(Link::RemoteToLocal, pk.seq)?;
                            arrival_tick = Some(tick);
                            local_pd_prev = pk.u_pi_current;
                            stored = pk.clone();
                            build_schedule(pd_variant, true, tick, &new, &est, last_applied, timing.l)?
                        }
                        _ => {
                            local_pd_prev = est_pi;
                            build_schedule(pd_variant, false, 0, &est, &est, last_applied, timing.l)?
                        }
                    }
                }
                Variant::DelayDependent => {
                    let in_time = arrival.filter(|at| *at <= self.cfg.dd_wait + 1e-12);
                    match (in_time, packet.as_ref()) {
                        (Some(at), Some(pk)) => {
                            let gains = schedule_gains(at, design, &self.cfg.schedule)?;
                            let tick = quantize_delay(at, t_basic);
                            let new = pd_actions(pk.u_pi_current, local_pd_prev, &gains, design.t_fast, design.n);
                            seqs.record_delivery(Link::RemoteToLocal, pk.seq)?;
                            arrival_tick = Some(tick);
                            local_pd_prev = pk.u_pi_current;
                            stored = pk.clone();
                            build_schedule(pd_variant, true, tick, &new, &new, last_applied, timing.l)?
                        }
                        _ if prediction => {
                            let est_pi = stored_estimate(&stored);
                            let est = pd_actions(est_pi, local_pd_prev, &self.wait_gains, design.t_fast, design.n);
                            local_pd_prev = est_pi;
                            build_schedule(pd_variant, false, self.wait_ticks, &est, &est, last_applied, timing.l)?
                        }
                        _ => ActuationSchedule::hold_all(last_applied, lnt),
                    }
                }
            };

            for (l, &u) in schedule.values.iter().enumerate() {
                let tick = tick0 + l;
                let applied = clamp_input(u, &self.cfg.actuator);
                trace.ticks.push(TickRow {
                    reference: self.reference_at_tick(tick),
                    output: self.plant.output(x),
                    u_cmd: u,
                    u_applied: applied,
                });
                (x, _) = self.plant.step(x, applied);
                if !(x[0].is_finite() && x[1].is_finite()) {
                    return Err(Error::Overflow {
                        time: timing.tick_time(tick),
                        axis: self.axis,
                    });
                }
            }
            last_applied = *schedule.values.last().expect("non-empty period");

            trace.events.push(PeriodEvent {
                k,
                tau: pc.tau,
                tau_lr: pc.tau_lr,
                tau_rl: pc.tau_rl,
                d_lr: pc.lr.delivered,
                d_rl: pc.rl.delivered,
                cap_forced_lr: pc.lr.cap_forced,
                cap_forced_rl: pc.rl.cap_forced,
                arrival_tick,
                pattern: schedule.pattern,
                packet,
                horizon_exhausted,
            });
        }
        Ok(trace)
    }
}
