//! Scenario configuration and its flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment. Every key is optional
//! and falls back to the crane defaults of [`ScenarioConfig::default`].
//! See the README for the full key list with units.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::controllers::{GainSchedule, PidDesign};
use crate::error::{Error, Result};
use crate::network::{check_no_disorder, ChannelConfig, DelayModel, DropoutModel};
use crate::plant::{ContinuousPlant, InputNonlinearity};
use crate::reference::ReferenceSpec;
use crate::schedule::Variant;

/// Controller configurations compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerVariant {
    /// No network: no delay, no dropout.
    Nominal,
    /// Delay-dependent PD without prediction.
    DdNp,
    /// Delay-dependent PD with prediction.
    DdP,
    /// Delay-independent PD with prediction.
    DiP,
}

impl ControllerVariant {
    pub const ALL: [ControllerVariant; 4] = [
        ControllerVariant::Nominal,
        ControllerVariant::DdNp,
        ControllerVariant::DdP,
        ControllerVariant::DiP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerVariant::Nominal => "nominal",
            ControllerVariant::DdNp => "dd_np",
            ControllerVariant::DdP => "dd_p",
            ControllerVariant::DiP => "di_p",
        }
    }

    pub fn pd_variant(self) -> Variant {
        match self {
            ControllerVariant::DdNp | ControllerVariant::DdP => Variant::DelayDependent,
            ControllerVariant::Nominal | ControllerVariant::DiP => Variant::DelayIndependent,
        }
    }

    pub fn prediction(self) -> bool {
        !matches!(self, ControllerVariant::DdNp)
    }

    pub fn uses_network(self) -> bool {
        !matches!(self, ControllerVariant::Nominal)
    }
}

impl fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsGrid {
    /// One sample per sensor period.
    Sensor,
    /// One sample per basic tick.
    Basic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// Simulated time in seconds.
    pub horizon: f64,
    pub t_basic: f64,
    /// Plant used by the controller design and the predictor.
    pub model: ContinuousPlant,
    /// Decrease of the true plant's static gain relative to the model, in %.
    pub perturb_q: f64,
    /// Decrease of the true plant's time constant relative to the model, in %.
    pub perturb_r: f64,
    pub design: PidDesign,
    pub schedule: GainSchedule,
    /// Waiting time of the delay-dependent PD before declaring a loss.
    pub dd_wait: f64,
    pub channel: ChannelConfig,
    pub actuator: InputNonlinearity,
    pub reference: ReferenceSpec,
    pub variants: Vec<ControllerVariant>,
    pub window_start: f64,
    pub metrics_grid: MetricsGrid,
    pub sweep_q: Vec<f64>,
    pub sweep_r: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let design = PidDesign::crane_default();
        let t_basic = 0.01;
        let dd_wait = design.t_fast - t_basic;
        let delay = DelayModel {
            eta: 0.04,
            phi: 0.012,
            tau_max: 0.08,
        };
        let reference = ReferenceSpec::default();
        ScenarioConfig {
            name: "paper_sec4".into(),
            seed: 1,
            horizon: 30.0,
            t_basic,
            model: ContinuousPlant::NOMINAL,
            perturb_q: 0.0,
            perturb_r: 0.0,
            design,
            schedule: GainSchedule::crane_default(dd_wait),
            dd_wait,
            channel: ChannelConfig {
                delay,
                dropout: DropoutModel {
                    p: 0.3,
                    max_consecutive: 3,
                },
                alpha: 0.5,
                tau_max_lr: 0.5 * delay.tau_max,
            },
            actuator: InputNonlinearity::default(),
            reference,
            variants: ControllerVariant::ALL.to_vec(),
            window_start: reference.settling_time(),
            metrics_grid: MetricsGrid::Sensor,
            sweep_q: vec![0.0, 20.0, 30.0],
            sweep_r: vec![0.0, 8.0, 12.0],
        }
    }
}

/// Derived integer timing of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub t_basic: f64,
    /// Basic ticks per actuation period.
    pub l: usize,
    /// Actuation periods per sensor period.
    pub n: usize,
    pub t_fast: f64,
    pub sensor_period: f64,
    pub periods: usize,
}

impl Timing {
    pub fn ticks_per_period(&self) -> usize {
        self.l * self.n
    }

    pub fn total_ticks(&self) -> usize {
        self.periods * self.ticks_per_period()
    }

    pub fn tick_time(&self, tick: usize) -> f64 {
        tick as f64 * self.t_basic
    }

    pub fn period_time(&self, k: usize) -> f64 {
        self.tick_time(k * self.ticks_per_period())
    }
}

impl ScenarioConfig {
    pub fn true_plant(&self) -> Result<ContinuousPlant> {
        self.model.perturb(self.perturb_q, self.perturb_r)
    }

    pub fn timing(&self) -> Result<Timing> {
        if !(self.t_basic > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "t_basic must be > 0, got {}",
                self.t_basic
            )));
        }
        let ratio = self.design.t_fast / self.t_basic;
        let l = ratio.round();
        if l < 1.0 || (ratio - l).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "T ({}) must be an integer multiple L of t_basic ({})",
                self.design.t_fast, self.t_basic
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be > 0, got {}", self.horizon)));
        }
        let nt = self.design.sensor_period();
        let periods = (self.horizon / nt - 1e-9).ceil().max(1.0) as usize;
        Ok(Timing {
            t_basic: self.t_basic,
            l: l as usize,
            n: self.design.n,
            t_fast: self.design.t_fast,
            sensor_period: nt,
            periods,
        })
    }

    /// Checks every invariant needed before a run; the error names the
    /// violated condition.
    pub fn validate(&self) -> Result<Timing> {
        self.design.validate()?;
        let timing = self.timing()?;
        self.channel.validate()?;
        self.actuator.validate()?;
        self.reference.validate()?;
        self.true_plant()?;
        let nt = timing.sensor_period;
        if !check_no_disorder(&self.channel.delay, nt) {
            return Err(Error::Disorder {
                tau_max: self.channel.delay.tau_max,
                nt,
            });
        }
        let worst = self.channel.worst_arrival();
        if !(worst < nt) {
            return Err(Error::InvalidConfig(format!(
                "control packets may arrive after the sensor period: \
                 remote wait + remote-to-local delay = {worst} s >= NT = {nt} s"
            )));
        }
        let needs_dd = self
            .variants
            .iter()
            .any(|v| v.pd_variant() == Variant::DelayDependent);
        if needs_dd {
            let limit = self.design.t_fast - self.t_basic;
            if !(self.dd_wait >= 0.0 && self.dd_wait <= limit + 1e-12) {
                return Err(Error::InvalidConfig(format!(
                    "delay-dependent waiting time {} s must lie in [0, T - t = {limit}] s",
                    self.dd_wait
                )));
            }
            if worst > self.dd_wait + 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "delay-dependent variants need every packet within the waiting time: \
                     worst arrival {worst} s > {} s",
                    self.dd_wait
                )));
            }
            if self.channel.delay.eta > self.schedule.tau_limit {
                return Err(Error::DelayOutOfRange {
                    tau: self.channel.delay.eta,
                    limit: self.schedule.tau_limit,
                });
            }
        }
        if !(self.window_start >= 0.0 && self.window_start < self.horizon) {
            return Err(Error::InvalidConfig(format!(
                "metrics window start {} must lie in [0, horizon)",
                self.window_start
            )));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("no variants selected".into()));
        }
        Ok(timing)
    }

    /// Parses scenario text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected 'key = value', got '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            cfg.set(key, value).map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line, msg },
                other => Error::Parse {
                    line,
                    msg: other.to_string(),
                },
            })?;
        }
        let design = cfg.design;
        if !seen.contains("pid.k_pd") {
            cfg.design.k_pd = design.kp;
        }
        if !seen.contains("delay.tau_max_lr") {
            cfg.channel.tau_max_lr = cfg.channel.alpha * cfg.channel.delay.tau_max;
        }
        if !seen.contains("schedule.dd_wait") {
            cfg.dd_wait = cfg.design.t_fast - cfg.t_basic;
        }
        cfg.schedule.tau_limit = cfg.dd_wait;
        if !seen.contains("metrics.window_start") {
            cfg.window_start = cfg.reference.settling_time();
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: String| Error::Parse { line: 0, msg };
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| bad(format!("'{key}' expects a number, got '{value}'")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| bad(format!("'{key}' expects a non-negative integer, got '{value}'")))
        };
        let list = || -> Result<Vec<f64>> {
            value
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(format!("'{key}' expects a comma-separated number list")))
                })
                .collect()
        };
        let flag = || -> Result<bool> {
            match value {
                "true" | "1" | "on" | "yes" => Ok(true),
                "false" | "0" | "off" | "no" => Ok(false),
                _ => Err(bad(format!("'{key}' expects true/false, got '{value}'"))),
            }
        };
        match key {
            "name" => self.name = value.to_string(),
            "seed" => self.seed = int()?,
            "horizon" => self.horizon = num()?,
            "t_basic" => self.t_basic = num()?,
            "T" => self.design.t_fast = num()?,
            "N" => self.design.n = int()? as usize,
            "plant.gain" => self.model.gain_num = num()?,
            "plant.pole" => self.model.pole = num()?,
            "plant.q" => self.perturb_q = num()?,
            "plant.r" => self.perturb_r = num()?,
            "pid.kp" => self.design.kp = num()?,
            "pid.td" => self.design.td = num()?,
            "pid.ti" => self.design.ti = num()?,
            "pid.k_pi" => self.design.k_pi = num()?,
            "pid.k_pd" => self.design.k_pd = num()?,
            "schedule.k_slope" => self.schedule.k_slope = num()?,
            "schedule.td_slope" => self.schedule.td_slope = num()?,
            "schedule.dd_wait" => self.dd_wait = num()?,
            "delay.eta" => self.channel.delay.eta = num()?,
            "delay.phi" => self.channel.delay.phi = num()?,
            "delay.tau_max" => self.channel.delay.tau_max = num()?,
            "delay.alpha" => self.channel.alpha = num()?,
            "delay.tau_max_lr" => self.channel.tau_max_lr = num()?,
            "dropout.p" => self.channel.dropout.p = num()?,
            "dropout.M" => self.channel.dropout.max_consecutive = int()? as usize,
            "actuator.saturation" => self.actuator.saturation = num()?,
            "actuator.dead_zone" => self.actuator.dead_zone = num()?,
            "actuator.dead_zone_enabled" => self.actuator.dead_zone_enabled = flag()?,
            "reference.kind" => {
                self.reference = match value {
                    "filtered_step" => ReferenceSpec::default(),
                    "lissajous" => ReferenceSpec::lissajous_default(),
                    other => return Err(bad(format!("unknown reference kind '{other}'"))),
                }
            }
            "variants" => {
                self.variants = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<ControllerVariant>>>()?
            }
            "metrics.window_start" => self.window_start = num()?,
            "metrics.grid" => {
                self.metrics_grid = match value {
                    "sensor" => MetricsGrid::Sensor,
                    "basic" => MetricsGrid::Basic,
                    other => return Err(bad(format!("unknown metrics grid '{other}'"))),
                }
            }
            "sweep.q" => self.sweep_q = list()?,
            "sweep.r" => self.sweep_r = list()?,
            _ if key.starts_with("reference.") => self.set_reference(&key["reference.".len()..], num()?)?,
            _ => return Err(bad(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn set_reference(&mut self, field: &str, v: f64) -> Result<()> {
        let kind = self.reference.kind();
        let unknown = || Error::Parse {
            line: 0,
            msg: format!(
                "key 'reference.{field}' does not apply to a {kind} reference (set reference.kind first)"
            ),
        };
        match &mut self.reference {
            ReferenceSpec::FilteredStep {
                amplitude,
                half_period,
                filter_tau,
            } => match field {
                "amplitude" => *amplitude = v,
                "half_period" => *half_period = v,
                "filter_tau" => *filter_tau = v,
                _ => return Err(unknown()),
            },
            ReferenceSpec::Lissajous {
                ax,
                ay,
                a,
                b,
                delta,
                omega,
            } => match field {
                "ax" => *ax = v,
                "ay" => *ay = v,
                "a" => *a = v,
                "b" => *b = v,
                "delta" => *delta = v,
                "omega" => *omega = v,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }

    /// Fully resolved configuration in the scenario text format, one key per
    /// line in a fixed order. Parsing it back yields an equal config.
    pub fn to_canonical_text(&self) -> String {
        let f = |v: f64| format!("{v:?}");
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(",");
        let mut kv: Vec<(&str, String)> = vec![
            ("name", self.name.clone()),
            ("seed", self.seed.to_string()),
            ("horizon", f(self.horizon)),
            ("t_basic", f(self.t_basic)),
            ("T", f(self.design.t_fast)),
            ("N", self.design.n.to_string()),
            ("plant.gain", f(self.model.gain_num)),
            ("plant.pole", f(self.model.pole)),
            ("plant.q", f(self.perturb_q)),
            ("plant.r", f(self.perturb_r)),
            ("pid.kp", f(self.design.kp)),
            ("pid.td", f(self.design.td)),
            ("pid.ti", f(self.design.ti)),
            ("pid.k_pi", f(self.design.k_pi)),
            ("pid.k_pd", f(self.design.k_pd)),
            ("schedule.k_slope", f(self.schedule.k_slope)),
            ("schedule.td_slope", f(self.schedule.td_slope)),
            ("schedule.dd_wait", f(self.dd_wait)),
            ("delay.eta", f(self.channel.delay.eta)),
            ("delay.phi", f(self.channel.delay.phi)),
            ("delay.tau_max", f(self.channel.delay.tau_max)),
            ("delay.alpha", f(self.channel.alpha)),
            ("delay.tau_max_lr", f(self.channel.tau_max_lr)),
            ("dropout.p", f(self.channel.dropout.p)),
            ("dropout.M", self.channel.dropout.max_consecutive.to_string()),
            ("actuator.saturation", f(self.actuator.saturation)),
            ("actuator.dead_zone", f(self.actuator.dead_zone)),
            ("actuator.dead_zone_enabled", self.actuator.dead_zone_enabled.to_string()),
            ("reference.kind", self.reference.kind().to_string()),
        ];
        match self.reference {
            ReferenceSpec::FilteredStep {
                amplitude,
                half_period,
                filter_tau,
            } => {
                kv.push(("reference.amplitude", f(amplitude)));
                kv.push(("reference.half_period", f(half_period)));
                kv.push(("reference.filter_tau", f(filter_tau)));
            }
            ReferenceSpec::Lissajous {
                ax,
                ay,
                a,
                b,
                delta,
                omega,
            } => {
                kv.push(("reference.ax", f(ax)));
                kv.push(("reference.ay", f(ay)));
                kv.push(("reference.a", f(a)));
                kv.push(("reference.b", f(b)));
                kv.push(("reference.delta", f(delta)));
                kv.push(("reference.omega", f(omega)));
            }
        }
        kv.push((
            "variants",
            self.variants
                .iter()
                .map(|v| v.as_str())
                .collect::<Vec<_>>()
                .join(","),
        ));
        kv.push(("metrics.window_start", f(self.window_start)));
        kv.push((
            "metrics.grid",
            match self.metrics_grid {
                MetricsGrid::Sensor => "sensor",
                MetricsGrid::Basic => "basic",
            }
            .into(),
        ));
        kv.push(("sweep.q", list(&self.sweep_q)));
        kv.push(("sweep.r", list(&self.sweep_r)));
        kv.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let t = ScenarioConfig::default().validate().unwrap();
        assert_eq!((t.l, t.n, t.periods), (10, 2, 150));
        assert!((t.sensor_period - 0.2).abs() < 1e-15);
    }

    #[test]
    fn disorder_is_rejected() {
        let cfg = ScenarioConfig::parse("delay.tau_max = 0.3\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, Error::Disorder { .. }));
        assert!(err.to_string().contains("tau_max"));
        assert!(err.to_string().contains("< NT"));
    }

    #[test]
    fn parse_comments_and_derived_values() {
        let cfg = ScenarioConfig::parse(
            "# crane\nname = x  # inline\n\ndelay.tau_max = 0.06\nT = 0.05\nt_basic = 0.005\n",
        )
        .unwrap();
        assert_eq!(cfg.name, "x");
        assert!((cfg.channel.tau_max_lr - 0.03).abs() < 1e-15);
        assert!((cfg.dd_wait - 0.045).abs() < 1e-15);
        assert_eq!(cfg.schedule.tau_limit, cfg.dd_wait);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = ScenarioConfig::parse("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = ScenarioConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(ScenarioConfig::parse("horizon = fast\n").is_err());
        assert!(ScenarioConfig::parse("reference.kind = spiral\n").is_err());
        assert!(ScenarioConfig::parse("reference.omega = 1\n").is_err());
        assert!(ScenarioConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn non_integer_l_is_rejected() {
        let cfg = ScenarioConfig::parse("t_basic = 0.03\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dd_needs_in_wait_delivery() {
        let cfg = ScenarioConfig::parse("delay.tau_max = 0.15\ndelay.tau_max_lr = 0.05\n").unwrap();
        assert!(cfg.validate().is_err());
        let di_only = ScenarioConfig::parse(
            "delay.tau_max = 0.15\ndelay.tau_max_lr = 0.05\nvariants = nominal,di_p\n",
        )
        .unwrap();
        assert!(di_only.validate().is_ok());
    }

    #[test]
    fn canonical_text_round_trips_lissajous() {
        let cfg = ScenarioConfig::parse("reference.kind = lissajous\nreference.omega = 0.5\nvariants = nominal,di_p\n")
            .unwrap();
        let again = ScenarioConfig::parse(&cfg.to_canonical_text()).unwrap();
        assert_eq!(cfg, again);
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(seed in any::<u64>(), p in 0.0f64..0.99, eta in 0.0f64..0.05,
                                      q in 0.0f64..50.0, dz in proptest::bool::ANY) {
            let mut cfg = ScenarioConfig::default();
            cfg.seed = seed;
            cfg.channel.dropout.p = p;
            cfg.channel.delay.eta = eta;
            cfg.perturb_q = q;
            cfg.actuator.dead_zone_enabled = dz;
            let again = ScenarioConfig::parse(&cfg.to_canonical_text()).unwrap();
            prop_assert_eq!(cfg, again);
        }
    }
}
