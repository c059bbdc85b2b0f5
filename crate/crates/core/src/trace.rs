//! Simulation traces and their CSV form.
//!
//! Tick CSV columns: `tick,time`, then per axis `a` in `x, y`:
//! `reference_a,output_a,u_cmd_a,u_applied_a`. The output is the plant
//! position at the start of the tick; `u_cmd` is the scheduled PD action
//! and `u_applied` the value after saturation and dead zone.
//!
//! Event CSV columns, one row per sensor period and axis:
//! `k,axis,time,tau,tau_lr,tau_rl,d_lr,d_rl,cap_forced_lr,cap_forced_rl,`
//! `arrival_tick,pattern,horizon_exhausted` (`arrival_tick` is `-1` when no
//! control packet was used).
//!
//! Floats are written with 17 significant digits.

use crate::predictor::ControlPacket;
use crate::schedule::Pattern;
use crate::scenario::ControllerVariant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRow {
    pub reference: f64,
    pub output: f64,
    pub u_cmd: f64,
    pub u_applied: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEvent {
    pub k: usize,
    pub tau: f64,
    pub tau_lr: f64,
    pub tau_rl: f64,
    pub d_lr: bool,
    pub d_rl: bool,
    pub cap_forced_lr: bool,
    pub cap_forced_rl: bool,
    /// Tick at which a received control packet took effect.
    pub arrival_tick: Option<usize>,
    pub pattern: Pattern,
    /// Packet sent by the remote side this period, if any.
    pub packet: Option<ControlPacket>,
    /// The stored packet did not cover this period.
    pub horizon_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxisTrace {
    pub ticks: Vec<TickRow>,
    pub events: Vec<PeriodEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub variant: ControllerVariant,
    pub t_basic: f64,
    pub ticks_per_period: usize,
    pub axes: Vec<AxisTrace>,
}

const AXIS_NAMES: [&str; 2] = ["x", "y"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.axes.first().map_or(0, |a| a.ticks.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, tick: usize) -> f64 {
        tick as f64 * self.t_basic
    }

    /// Output samples of one axis.
    pub fn outputs(&self, axis: usize) -> impl Iterator<Item = f64> + '_ {
        self.axes[axis].ticks.iter().map(|r| r.output)
    }

    pub fn ticks_csv(&self) -> String {
        let mut out = String::from("tick,time");
        for name in AXIS_NAMES.iter().take(self.axes.len()) {
            out.push_str(&format!(
                ",reference_{name},output_{name},u_cmd_{name},u_applied_{name}"
            ));
        }
        out.push('\n');
        for tick in 0..self.len() {
            out.push_str(&format!("{tick},{}", num(self.time(tick))));
            for axis in &self.axes {
                let r = axis.ticks[tick];
                out.push_str(&format!(
                    ",{},{},{},{}",
                    num(r.reference),
                    num(r.output),
                    num(r.u_cmd),
                    num(r.u_applied)
                ));
            }
            out.push('\n');
        }
        out
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from(
            "k,axis,time,tau,tau_lr,tau_rl,d_lr,d_rl,cap_forced_lr,cap_forced_rl,\
             arrival_tick,pattern,horizon_exhausted\n",
        );
        let b = |v: bool| if v { "1" } else { "0" };
        for (ai, axis) in self.axes.iter().enumerate() {
            for e in &axis.events {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    e.k,
                    AXIS_NAMES[ai],
                    num(self.time(e.k * self.ticks_per_period)),
                    num(e.tau),
                    num(e.tau_lr),
                    num(e.tau_rl),
                    b(e.d_lr),
                    b(e.d_rl),
                    b(e.cap_forced_lr),
                    b(e.cap_forced_rl),
                    e.arrival_tick.map_or(-1, |t| t as i64),
                    e.pattern,
                    b(e.horizon_exhausted)
                ));
            }
        }
        out
    }

    /// Packets sent by the remote side: `axis,k,u_pi_current,future_0..,estimated`.
    pub fn packets_csv(&self, horizon: usize) -> String {
        let mut out = String::from("axis,k,u_pi_current");
        for i in 0..horizon {
            out.push_str(&format!(",future_{i}"));
        }
        out.push_str(",estimated\n");
        for (ai, axis) in self.axes.iter().enumerate() {
            for p in axis.events.iter().filter_map(|e| e.packet.as_ref()) {
                out.push_str(AXIS_NAMES[ai]);
                out.push(',');
                out.push_str(&p.csv_row());
                out.push('\n');
            }
        }
        out
    }
}
