//! Dual-rate PID split: a slow-rate PI on the remote side, a hold-based
//! rate converter and a fast-rate PD on the local side.

use crate::error::{Error, Result};

/// Continuous PID gains `Kp (1 + Td s + 1 / (Ti s))` and the dual-rate
/// timing they are implemented with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidDesign {
    pub kp: f64,
    pub td: f64,
    pub ti: f64,
    /// Actuation period `T`.
    pub t_fast: f64,
    /// Multiplicity: the sensor period is `n * t_fast`.
    pub n: usize,
    pub k_pi: f64,
    pub k_pd: f64,
}

impl PidDesign {
    /// Gains tuned for the identified crane axis, `NT = 0.2 s`, `N = 2`.
    pub fn crane_default() -> Self {
        PidDesign {
            kp: 12.0,
            td: 0.01,
            ti: 3.5,
            t_fast: 0.1,
            n: 2,
            k_pi: 1.0,
            k_pd: 12.0,
        }
    }

    pub fn sensor_period(&self) -> f64 {
        self.n as f64 * self.t_fast
    }

    /// Coefficient `1 - NT / Ti` multiplying the previous error.
    pub fn pi_memory(&self) -> f64 {
        1.0 - self.sensor_period() / self.ti
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("multiplicity N must be >= 1".into()));
        }
        if !(self.t_fast > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "actuation period T must be > 0, got {}",
                self.t_fast
            )));
        }
        if !(self.td > 0.0 && self.ti > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Td and Ti must be > 0 (got Td={}, Ti={})",
                self.td, self.ti
            )));
        }
        if !(self.ti > self.sensor_period()) {
            return Err(Error::InvalidConfig(format!(
                "Ti ({}) must exceed NT ({})",
                self.ti,
                self.sensor_period()
            )));
        }
        let finite = [self.kp, self.k_pi, self.k_pd].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("controller gains must be finite".into()));
        }
        Ok(())
    }
}

/// Memory of the slow-rate PI difference equation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    pub u_prev: f64,
    pub e_prev: f64,
}

/// `u_k = u_{k-1} + K_PI (e_k - (1 - NT/Ti) e_{k-1})`, `e_k = r_k - y_k`.
pub fn pi_step(state: PiState, r: f64, y: f64, design: &PidDesign) -> (f64, PiState) {
    let e = r - y;
    let u = state.u_prev + design.k_pi * (e - design.pi_memory() * state.e_prev);
    (u, PiState { u_prev: u, e_prev: e })
}

/// Rate converter for step-wise references: one slow sample held for `n`
/// fast samples.
pub fn expand_and_hold(u_pi_slow: f64, n: usize) -> Vec<f64> {
    vec![u_pi_slow; n]
}

/// Memory of the fast-rate PD: the previous fast PI input sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdState {
    pub u_pi_prev: f64,
}

#[inline]
fn pd_difference(k: f64, td: f64, t: f64, u: f64, prev: f64) -> f64 {
    k * (1.0 + td / t) * u - k * (td / t) * prev
}

pub fn pd_step_independent(state: PdState, u_pi_fast: f64, design: &PidDesign) -> (f64, PdState) {
    let u = pd_difference(design.k_pd, design.td, design.t_fast, u_pi_fast, state.u_pi_prev);
    (u, PdState { u_pi_prev: u_pi_fast })
}

/// PD gains retuned for a given round-trip delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledGains {
    pub kpd_tau: f64,
    pub td_tau: f64,
}

/// Affine retuning law `K_PD(tau) = k_slope tau + K_PD`,
/// `Td(tau) = td_slope tau + Td`, valid for `tau` in `[0, tau_limit]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule {
    pub k_slope: f64,
    pub td_slope: f64,
    pub tau_limit: f64,
}

impl GainSchedule {
    pub fn crane_default(tau_limit: f64) -> Self {
        GainSchedule {
            k_slope: -50.0,
            td_slope: 0.5,
            tau_limit,
        }
    }
}

pub fn schedule_gains(tau: f64, design: &PidDesign, law: &GainSchedule) -> Result<ScheduledGains> {
    if !(tau >= 0.0 && tau <= law.tau_limit) {
        return Err(Error::DelayOutOfRange {
            tau,
            limit: law.tau_limit,
        });
    }
    let g = ScheduledGains {
        kpd_tau: law.k_slope * tau + design.k_pd,
        td_tau: law.td_slope * tau + design.td,
    };
    if !(g.kpd_tau > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "scheduled PD gain {} at tau={tau} is not positive",
            g.kpd_tau
        )));
    }
    Ok(g)
}

pub fn pd_step_dependent(
    state: PdState,
    u_pi_fast: f64,
    g: &ScheduledGains,
    t_fast: f64,
) -> (f64, PdState) {
    let u = pd_difference(g.kpd_tau, g.td_tau, t_fast, u_pi_fast, state.u_pi_prev);
    (u, PdState { u_pi_prev: u_pi_fast })
}

/// Runs the PD over one held PI value for `n` fast samples, starting from
/// `prev` as the previous fast PI input.
pub fn pd_actions(u_pi: f64, prev: f64, gains: &ScheduledGains, t_fast: f64, n: usize) -> Vec<f64> {
    let mut state = PdState { u_pi_prev: prev };
    expand_and_hold(u_pi, n)
        .into_iter()
        .map(|u| {
            let (out, next) = pd_step_dependent(state, u, gains, t_fast);
            state = next;
            out
        })
        .collect()
}

impl PidDesign {
    /// The fixed (delay-independent) PD gains as a gain pair.
    pub fn nominal_gains(&self) -> ScheduledGains {
        ScheduledGains {
            kpd_tau: self.k_pd,
            td_tau: self.td,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn design() -> PidDesign {
        PidDesign::crane_default()
    }

    fn law() -> GainSchedule {
        GainSchedule::crane_default(0.09)
    }

    #[test]
    fn pi_examples() {
        let d = design();
        let (u, s) = pi_step(PiState::default(), 0.3, 0.3, &d);
        assert_eq!(u, 0.0);
        assert_eq!(s, PiState::default());

        let (u1, s) = pi_step(PiState::default(), 1.0, 0.0, &d);
        assert_eq!(u1, 1.0);
        let (u2, _) = pi_step(s, 1.0, 0.0, &d);
        assert!((u2 - (2.0 - (1.0 - 0.2 / 3.5))).abs() < 1e-15);
        assert!((u2 - 1.057143).abs() < 1e-6);
    }

    #[test]
    fn pi_integrates_constant_error() {
        let d = design();
        let mut s = PiState::default();
        let mut last = 0.0;
        for k in 0..50 {
            let (u, n) = pi_step(s, 0.5, 0.0, &d);
            if k > 1 {
                assert!(((u - last) - 0.5 * 0.2 / 3.5).abs() < 1e-12);
            }
            last = u;
            s = n;
        }
    }

    /// Expansion (insert N-1 zeros) followed by the FIR hold filter
    /// `(1 - z^-N) / (1 - z^-1) = 1 + z^-1 + ... + z^-(N-1)`.
    fn expand_then_filter(slow: &[f64], n: usize) -> Vec<f64> {
        let mut expanded = vec![0.0; slow.len() * n];
        for (k, v) in slow.iter().enumerate() {
            expanded[k * n] = *v;
        }
        (0..expanded.len())
            .map(|i| (0..n).filter(|j| *j <= i).map(|j| expanded[i - j]).sum())
            .collect()
    }

    #[test]
    fn hold_examples() {
        assert_eq!(expand_and_hold(5.0, 2), vec![5.0, 5.0]);
        assert_eq!(expand_and_hold(0.0, 4), vec![0.0; 4]);
        let held: Vec<f64> = [1.5, -2.0]
            .iter()
            .flat_map(|v| expand_and_hold(*v, 2))
            .collect();
        assert_eq!(held, expand_then_filter(&[1.5, -2.0], 2));
        assert_eq!(held, vec![1.5, 1.5, -2.0, -2.0]);
    }

    #[test]
    fn pd_independent_examples() {
        let d = design();
        let (u, s) = pd_step_independent(PdState { u_pi_prev: 1.0 }, 1.0, &d);
        assert!((u - 12.0).abs() < 1e-12);
        assert_eq!(s.u_pi_prev, 1.0);
        let (u, _) = pd_step_independent(PdState::default(), 1.0, &d);
        assert!((u - 13.2).abs() < 1e-12);
        assert_eq!(pd_step_independent(PdState::default(), 0.0, &d).0, 0.0);
    }

    #[test]
    fn schedule_examples() {
        let d = design();
        let g0 = schedule_gains(0.0, &d, &law()).unwrap();
        assert_eq!((g0.kpd_tau, g0.td_tau), (12.0, 0.01));
        let g = schedule_gains(0.04, &d, &law()).unwrap();
        assert!((g.kpd_tau - 10.0).abs() < 1e-12 && (g.td_tau - 0.03).abs() < 1e-12);
        let g = schedule_gains(0.08, &d, &law()).unwrap();
        assert!((g.kpd_tau - 8.0).abs() < 1e-12 && (g.td_tau - 0.05).abs() < 1e-12);
        assert!(matches!(
            schedule_gains(-0.01, &d, &law()),
            Err(Error::DelayOutOfRange { .. })
        ));
        assert!(schedule_gains(0.1, &d, &law()).is_err());
    }

    #[test]
    fn schedule_is_affine() {
        let d = design();
        let a = schedule_gains(0.04, &d, &law()).unwrap();
        let b = schedule_gains(0.08, &d, &law()).unwrap();
        let m = schedule_gains(0.06, &d, &law()).unwrap();
        assert!((m.kpd_tau - 0.5 * (a.kpd_tau + b.kpd_tau)).abs() < 1e-12);
        assert!((m.td_tau - 0.5 * (a.td_tau + b.td_tau)).abs() < 1e-12);
    }

    #[test]
    fn pd_dependent_examples() {
        let g = ScheduledGains {
            kpd_tau: 10.0,
            td_tau: 0.03,
        };
        let (u, _) = pd_step_dependent(PdState::default(), 1.0, &g, 0.1);
        assert!((u - 13.0).abs() < 1e-12);
    }

    #[test]
    fn pd_actions_two_samples() {
        let d = design();
        let a = pd_actions(1.0, 0.0, &d.nominal_gains(), d.t_fast, 2);
        assert!((a[0] - 13.2).abs() < 1e-12 && (a[1] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn design_validation() {
        assert!(design().validate().is_ok());
        assert!(PidDesign { ti: 0.2, ..design() }.validate().is_err());
        assert!(PidDesign { n: 0, ..design() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn zero_delay_schedule_matches_fixed_gains(inputs in proptest::collection::vec(-2.0f64..2.0, 1..40)) {
            let d = design();
            let g = schedule_gains(0.0, &d, &law()).unwrap();
            let (mut a, mut b) = (PdState::default(), PdState::default());
            for u in inputs {
                let (ua, na) = pd_step_independent(a, u, &d);
                let (ub, nb) = pd_step_dependent(b, u, &g, d.t_fast);
                prop_assert_eq!(ua.to_bits(), ub.to_bits());
                a = na;
                b = nb;
            }
        }

        #[test]
        fn pd_static_gain(c in -2.0f64..2.0, tau in 0.0f64..0.09) {
            let d = design();
            let g = schedule_gains(tau, &d, &law()).unwrap();
            let (u, _) = pd_step_dependent(PdState { u_pi_prev: c }, c, &g, d.t_fast);
            prop_assert!((u - g.kpd_tau * c).abs() < 1e-12);
            let (u, _) = pd_step_independent(PdState { u_pi_prev: c }, c, &d);
            prop_assert!((u - d.k_pd * c).abs() < 1e-12);
        }

        #[test]
        fn hold_has_n_equal_entries(v in -10.0f64..10.0, n in 1usize..16) {
            let h = expand_and_hold(v, n);
            prop_assert_eq!(h.len(), n);
            prop_assert!(h.iter().all(|x| *x == v));
        }
    }
}
