//! Simulated channel between the local (plant) side and the remote
//! (controller) side.
//!
//! Round-trip delays follow a shifted exponential density truncated to
//! `[eta, tau_max]`; losses are independent Bernoulli draws per link with a
//! hard cap on consecutive losses. All randomness for a run is drawn up
//! front into a [`ChannelRealization`] so that every controller variant
//! sees the same delays and losses.
//!
//! Stream derivation: each sub-stream is a ChaCha8 generator seeded with
//! the scenario seed and placed on stream `4 * axis + link_id`, where
//! `link_id` is 0 for delays, 1 for local-to-remote losses and 2 for
//! remote-to-local losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

/// Shifted exponential round-trip delay model, truncated at `tau_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub eta: f64,
    pub phi: f64,
    pub tau_max: f64,
}

impl DelayModel {
    /// A channel without delay.
    pub const ZERO: DelayModel = DelayModel {
        eta: 0.0,
        phi: 0.0,
        tau_max: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let degenerate = self.eta == 0.0 && self.phi == 0.0 && self.tau_max == 0.0;
        if degenerate {
            return Ok(());
        }
        if !(self.eta >= 0.0 && self.eta < self.tau_max) {
            return Err(Error::InvalidConfig(format!(
                "delay model requires 0 <= eta < tau_max (got eta={}, tau_max={})",
                self.eta, self.tau_max
            )));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delay scale phi must be >= 0 (got {})",
                self.phi
            )));
        }
        Ok(())
    }

    /// Mean of the truncated density.
    pub fn truncated_mean(&self) -> f64 {
        if self.phi == 0.0 {
            return self.eta;
        }
        let w = self.tau_max - self.eta;
        let tail = (-w / self.phi).exp();
        self.eta + self.phi - w * tail / (1.0 - tail)
    }
}

pub fn sample_delay<R: Rng + ?Sized>(rng: &mut R, dm: &DelayModel) -> f64 {
    if dm.phi == 0.0 {
        return dm.eta;
    }
    let exp = Exp::new(1.0 / dm.phi).expect("phi > 0");
    loop {
        let tau = dm.eta + exp.sample(rng);
        if tau <= dm.tau_max {
            return tau;
        }
    }
}

/// The density is maximal at its left endpoint.
pub fn delay_mode(dm: &DelayModel) -> f64 {
    dm.eta
}

/// Strict no-disorder condition `tau_max < NT`.
pub fn check_no_disorder(dm: &DelayModel, sensor_period: f64) -> bool {
    dm.tau_max < sensor_period
}

/// Number of basic ticks until a packet delayed by `tau` becomes visible.
pub fn quantize_delay(tau: f64, t_basic: f64) -> usize {
    let ticks = tau / t_basic;
    // absorb representation error, e.g. 0.04 / 0.01 = 4.000000000000001
    let snapped = ticks.round();
    if (ticks - snapped).abs() < 1e-9 {
        snapped.max(0.0) as usize
    } else {
        ticks.ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutModel {
    pub p: f64,
    pub max_consecutive: usize,
}

impl DropoutModel {
    pub const NONE: DropoutModel = DropoutModel {
        p: 0.0,
        max_consecutive: 1,
    };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::InvalidConfig(format!(
                "dropout probability must lie in [0, 1), got {}",
                self.p
            )));
        }
        if self.max_consecutive == 0 {
            return Err(Error::InvalidConfig(
                "consecutive dropout bound M must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    LocalToRemote,
    RemoteToLocal,
}

impl Link {
    fn index(self) -> usize {
        match self {
            Link::LocalToRemote => 0,
            Link::RemoteToLocal => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DropoutOutcome {
    pub delivered: bool,
    /// The Bernoulli draw said "drop" but the consecutive-loss cap forced delivery.
    pub cap_forced: bool,
}

/// Per-link loss bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct ChannelState {
    consecutive_drops: [usize; 2],
    last_seq_delivered: [Option<u64>; 2],
}

impl ChannelState {
    pub fn consecutive_drops(&self, link: Link) -> usize {
        self.consecutive_drops[link.index()]
    }

    pub fn last_seq_delivered(&self, link: Link) -> Option<u64> {
        self.last_seq_delivered[link.index()]
    }

    /// Records a delivery; sequence numbers must strictly increase per link.
    pub fn record_delivery(&mut self, link: Link, seq: u64) -> Result<()> {
        let slot = &mut self.last_seq_delivered[link.index()];
        if let Some(prev) = *slot {
            if seq <= prev {
                return Err(Error::Contract(format!(
                    "out-of-order delivery on {link:?}: seq {seq} after {prev}"
                )));
            }
        }
        *slot = Some(seq);
        Ok(())
    }
}

pub fn sample_dropout<R: Rng + ?Sized>(
    rng: &mut R,
    dm: &DropoutModel,
    cs: &mut ChannelState,
    link: Link,
) -> DropoutOutcome {
    let i = link.index();
    let drop = dm.p > 0.0 && rng.random::<f64>() < dm.p;
    let outcome = if drop && cs.consecutive_drops[i] >= dm.max_consecutive {
        DropoutOutcome {
            delivered: true,
            cap_forced: true,
        }
    } else {
        DropoutOutcome {
            delivered: !drop,
            cap_forced: false,
        }
    };
    if outcome.delivered {
        cs.consecutive_drops[i] = 0;
    } else {
        cs.consecutive_drops[i] += 1;
    }
    outcome
}

/// Full channel parameter set for one loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub delay: DelayModel,
    pub dropout: DropoutModel,
    /// Fraction of the round trip spent on the local-to-remote link.
    pub alpha: f64,
    /// Remote waiting time before a sensor packet is declared lost.
    pub tau_max_lr: f64,
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        ChannelConfig {
            delay: DelayModel::ZERO,
            dropout: DropoutModel::NONE,
            alpha: 0.5,
            tau_max_lr: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.delay.validate()?;
        self.dropout.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "delay split alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.tau_max_lr >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "remote waiting time must be >= 0, got {}",
                self.tau_max_lr
            )));
        }
        Ok(())
    }

    /// Latest possible arrival of a control packet, measured from the
    /// sensor instant.
    pub fn worst_arrival(&self) -> f64 {
        let lr = (self.alpha * self.delay.tau_max).max(self.tau_max_lr);
        lr + (1.0 - self.alpha) * self.delay.tau_max
    }
}

/// Channel draws for one sensor period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeriodChannel {
    pub tau: f64,
    pub tau_lr: f64,
    pub tau_rl: f64,
    pub lr: DropoutOutcome,
    pub rl: DropoutOutcome,
}

/// Pre-drawn channel behaviour for a whole run of one loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub periods: Vec<PeriodChannel>,
}

pub fn stream_rng(seed: u64, axis: usize, link_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4 * axis as u64 + link_id);
    rng
}

impl ChannelRealization {
    pub fn ideal(periods: usize) -> Self {
        let pc = PeriodChannel {
            lr: DropoutOutcome {
                delivered: true,
                cap_forced: false,
            },
            rl: DropoutOutcome {
                delivered: true,
                cap_forced: false,
            },
            ..Default::default()
        };
        ChannelRealization {
            periods: vec![pc; periods],
        }
    }

    pub fn draw(cfg: &ChannelConfig, seed: u64, axis: usize, periods: usize) -> Self {
        let mut delay_rng = stream_rng(seed, axis, 0);
        let mut lr_rng = stream_rng(seed, axis, 1);
        let mut rl_rng = stream_rng(seed, axis, 2);
        let mut state = ChannelState::default();
        let periods = (0..periods)
            .map(|_| {
                let tau = sample_delay(&mut delay_rng, &cfg.delay);
                let lr = sample_dropout(&mut lr_rng, &cfg.dropout, &mut state, Link::LocalToRemote);
                let rl = sample_dropout(&mut rl_rng, &cfg.dropout, &mut state, Link::RemoteToLocal);
                PeriodChannel {
                    tau,
                    tau_lr: cfg.alpha * tau,
                    tau_rl: (1.0 - cfg.alpha) * tau,
                    lr,
                    rl,
                }
            })
            .collect();
        ChannelRealization { periods }
    }

    /// Longest run of consecutive losses on `link`.
    pub fn longest_loss_run(&self, link: Link) -> usize {
        let mut best = 0;
        let mut run = 0;
        for p in &self.periods {
            let d = match link {
                Link::LocalToRemote => p.lr,
                Link::RemoteToLocal => p.rl,
            };
            if d.delivered {
                run = 0;
            } else {
                run += 1;
                best = best.max(run);
            }
        }
        best
    }
}
