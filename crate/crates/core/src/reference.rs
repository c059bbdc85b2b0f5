//! Reference trajectories.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSpec {
    /// Square wave `+A, -A, +A, ...` switching every `half_period`, passed
    /// through a first-order filter with time constant `filter_tau` that
    /// starts at rest.
    FilteredStep {
        amplitude: f64,
        half_period: f64,
        filter_tau: f64,
    },
    /// `x = Ax sin(a w t + delta)`, `y = Ay sin(b w t)`, one loop per axis.
    Lissajous {
        ax: f64,
        ay: f64,
        a: f64,
        b: f64,
        delta: f64,
        omega: f64,
    },
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::FilteredStep {
            amplitude: 0.04,
            half_period: 5.0,
            filter_tau: 0.3,
        }
    }
}

impl ReferenceSpec {
    pub fn lissajous_default() -> Self {
        ReferenceSpec::Lissajous {
            ax: 0.03,
            ay: 0.03,
            a: 1.0,
            b: 2.0,
            delta: FRAC_PI_2,
            omega: 2.0 * std::f64::consts::PI / 20.0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ReferenceSpec::FilteredStep { .. } => "filtered_step",
            ReferenceSpec::Lissajous { .. } => "lissajous",
        }
    }

    pub fn axes(&self) -> usize {
        match self {
            ReferenceSpec::FilteredStep { .. } => 1,
            ReferenceSpec::Lissajous { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceSpec::FilteredStep {
                amplitude,
                half_period,
                filter_tau,
            } => {
                if !(half_period > 0.0 && filter_tau >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "filtered step needs half_period > 0 and filter_tau >= 0 \
                         (got {half_period}, {filter_tau})"
                    )));
                }
            }
            ReferenceSpec::Lissajous {
                ax,
                ay,
                a,
                b,
                delta,
                omega,
            } => {
                if ![ax, ay, a, b, delta, omega].iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidConfig("lissajous parameters must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Time after which the reference filter is considered settled.
    pub fn settling_time(&self) -> f64 {
        match *self {
            ReferenceSpec::FilteredStep { filter_tau, .. } => 5.0 * filter_tau,
            ReferenceSpec::Lissajous { .. } => 0.0,
        }
    }

    pub fn value(&self, axis: usize, time: f64) -> f64 {
        let time = time.max(0.0);
        match *self {
            ReferenceSpec::FilteredStep {
                amplitude,
                half_period,
                filter_tau,
            } => filtered_square(amplitude, half_period, filter_tau, time),
            ReferenceSpec::Lissajous {
                ax,
                ay,
                a,
                b,
                delta,
                omega,
            } => {
                if axis == 0 {
                    ax * (a * omega * time + delta).sin()
                } else {
                    ay * (b * omega * time).sin()
                }
            }
        }
    }
}

fn filtered_square(amplitude: f64, half_period: f64, tau: f64, time: f64) -> f64 {
    let segment = (time / half_period).floor() as u64;
    let level = |j: u64| if j % 2 == 0 { amplitude } else { -amplitude };
    if tau == 0.0 {
        return level(segment);
    }
    let decay = (-half_period / tau).exp();
    let mut y = 0.0;
    for j in 0..segment {
        y = level(j) + (y - level(j)) * decay;
    }
    let dt = time - segment as f64 * half_period;
    level(segment) + (y - level(segment)) * (-dt / tau).exp()
}
