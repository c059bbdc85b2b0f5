//! Plant model: a position servo `gain / (s (s + pole))`, its exact
//! zero-order-hold discretization and the actuator nonlinearities.

use crate::error::{Error, Result};

/// Continuous plant `G(s) = gain_num / (s (s + pole))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousPlant {
    pub gain_num: f64,
    pub pole: f64,
}

impl ContinuousPlant {
    /// Identified X-axis model of the Cartesian robot.
    pub const NOMINAL: ContinuousPlant = ContinuousPlant {
        gain_num: 6.3,
        pole: 17.7,
    };

    pub fn new(gain_num: f64, pole: f64) -> Result<Self> {
        if !(pole > 0.0 && pole.is_finite()) {
            return Err(Error::InvalidPlant(format!("pole must be > 0, got {pole}")));
        }
        if gain_num == 0.0 || !gain_num.is_finite() {
            return Err(Error::InvalidPlant(format!(
                "gain must be finite and non-zero, got {gain_num}"
            )));
        }
        Ok(ContinuousPlant { gain_num, pole })
    }

    /// Builds the plant from its static gain `K` and time constant `tau`,
    /// i.e. `K / (s (tau s + 1))`.
    pub fn from_gain_time_constant(static_gain: f64, time_constant: f64) -> Result<Self> {
        if !(time_constant > 0.0) {
            return Err(Error::InvalidPlant(format!(
                "time constant must be > 0, got {time_constant}"
            )));
        }
        Self::new(static_gain / time_constant, 1.0 / time_constant)
    }

    pub fn static_gain(&self) -> f64 {
        self.gain_num / self.pole
    }

    pub fn time_constant(&self) -> f64 {
        1.0 / self.pole
    }

    /// Decreases the static gain by `q_pct` percent and the time constant
    /// by `r_pct` percent.
    pub fn perturb(&self, q_pct: f64, r_pct: f64) -> Result<Self> {
        for (name, v) in [("q", q_pct), ("r", r_pct)] {
            if !(0.0..100.0).contains(&v) {
                return Err(Error::InvalidPlant(format!(
                    "{name} percentage must lie in [0, 100), got {v}"
                )));
            }
        }
        if q_pct == 0.0 && r_pct == 0.0 {
            return Ok(*self);
        }
        let k = self.static_gain() * (1.0 - q_pct / 100.0);
        let tau = self.time_constant() * (1.0 - r_pct / 100.0);
        Self::from_gain_time_constant(k, tau)
    }

    /// Continuous-time state derivative of the controllable realization
    /// `x = [position, velocity]`.
    pub fn derivative(&self, x: [f64; 2], u: f64) -> [f64; 2] {
        [x[1], -self.pole * x[1] + self.gain_num * u]
    }
}

/// Discrete state-space model `x+ = A x + B u`, `y = C x` at a fixed period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePlant {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub period: f64,
}

impl DiscretePlant {
    pub fn output(&self, x: [f64; 2]) -> f64 {
        self.c[0] * x[0] + self.c[1] * x[1]
    }

    /// Advances one period with `u` held; returns the next state and the
    /// output read from that next state.
    pub fn step(&self, x: [f64; 2], u: f64) -> ([f64; 2], f64) {
        let next = [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + self.b[0] * u,
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + self.b[1] * u,
        ];
        (next, self.output(next))
    }
}

/// Exact ZOH discretization of `plant` at period `h`.
///
/// With `A_c = [[0, 1], [0, -a]]` and `B_c = [0, g]`:
/// `exp(A_c h) = [[1, (1 - e^{-ah}) / a], [0, e^{-ah}]]` and
/// `B = g [(h - (1 - e^{-ah}) / a) / a, (1 - e^{-ah}) / a]`.
pub fn discretize_zoh(plant: &ContinuousPlant, h: f64) -> Result<DiscretePlant> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidPeriod(h));
    }
    let a = plant.pole;
    let g = plant.gain_num;
    let decay = (-a * h).exp();
    // (1 - e^{-ah}) / a without cancellation for small a*h
    let phi1 = -(-a * h).exp_m1() / a;
    let phi2 = (h - phi1) / a;
    let dp = DiscretePlant {
        a: [[1.0, phi1], [0.0, decay]],
        b: [g * phi2, g * phi1],
        c: [1.0, 0.0],
        period: h,
    };
    let finite = dp.a.iter().flatten().chain(dp.b.iter()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidPeriod(h));
    }
    Ok(dp)
}

/// Actuator saturation and dead zone, in control action units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputNonlinearity {
    pub saturation: f64,
    pub dead_zone: f64,
    pub dead_zone_enabled: bool,
}

impl Default for InputNonlinearity {
    fn default() -> Self {
        InputNonlinearity {
            saturation: 1.0,
            dead_zone: 0.06,
            dead_zone_enabled: false,
        }
    }
}

impl InputNonlinearity {
    pub fn validate(&self) -> Result<()> {
        if !(self.saturation > self.dead_zone && self.dead_zone >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "input nonlinearity requires saturation > dead_zone >= 0 (got {} and {})",
                self.saturation, self.dead_zone
            )));
        }
        Ok(())
    }
}

pub fn clamp_input(u: f64, nl: &InputNonlinearity) -> f64 {
    let sat = u.clamp(-nl.saturation, nl.saturation);
    if nl.dead_zone_enabled && sat.abs() < nl.dead_zone {
        0.0
    } else {
        sat
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::ContinuousPlant;

    /// Classical RK4 integration of the continuous plant with `u` held.
    pub fn rk4_hold(plant: &ContinuousPlant, x0: [f64; 2], u: f64, h: f64, dt: f64) -> [f64; 2] {
        let steps = (h / dt).round() as usize;
        let dt = h / steps as f64;
        let mut x = x0;
        let add = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
        for _ in 0..steps {
            let k1 = plant.derivative(x, u);
            let k2 = plant.derivative(add(x, k1, dt / 2.0), u);
            let k3 = plant.derivative(add(x, k2, dt / 2.0), u);
            let k4 = plant.derivative(add(x, k3, dt), u);
            for i in 0..2 {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: ContinuousPlant = ContinuousPlant::NOMINAL;

    #[test]
    fn zero_period_is_identity() {
        let dp = discretize_zoh(&P, 0.0).unwrap();
        assert_eq!(dp.a, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(dp.b, [0.0, 0.0]);
    }

    #[test]
    fn matrices_at_100ms_match_rk4() {
        let dp = discretize_zoh(&P, 0.1).unwrap();
        // columns of A from unforced responses, B from the forced one
        let col0 = oracle::rk4_hold(&P, [1.0, 0.0], 0.0, 0.1, 1e-6);
        let col1 = oracle::rk4_hold(&P, [0.0, 1.0], 0.0, 0.1, 1e-6);
        let b = oracle::rk4_hold(&P, [0.0, 0.0], 1.0, 0.1, 1e-6);
        for i in 0..2 {
            assert!((dp.a[i][0] - col0[i]).abs() < 1e-10);
            assert!((dp.a[i][1] - col1[i]).abs() < 1e-10);
            assert!((dp.b[i] - b[i]).abs() < 1e-10);
        }
        assert!((dp.a[0][1] - 0.046876).abs() < 1e-5);
        assert!((dp.a[1][1] - 0.17034).abs() < 1e-5);
        assert!((dp.b[0] - 0.018909).abs() < 1e-6);
        assert!((dp.b[1] - 0.29532).abs() < 1e-4);
    }

    #[test]
    fn composition_identity_at_sensor_period() {
        let t = discretize_zoh(&P, 0.1).unwrap();
        let nt = discretize_zoh(&P, 0.2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let sq = t.a[i][0] * t.a[0][j] + t.a[i][1] * t.a[1][j];
                assert!((nt.a[i][j] - sq).abs() < 1e-12);
            }
            let b = t.a[i][0] * t.b[0] + t.a[i][1] * t.b[1] + t.b[i];
            assert!((nt.b[i] - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_examples() {
        let dp = discretize_zoh(&P, 0.1).unwrap();
        assert_eq!(dp.step([0.0, 0.0], 0.0), ([0.0, 0.0], 0.0));
        let (_, y) = dp.step([0.0, 0.0], 1.0);
        assert!((y - 0.018909).abs() < 1e-6);
        let (x, y) = dp.step([1.0, 0.0], 0.0);
        assert_eq!(y, 1.0);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn rejects_bad_periods() {
        assert!(matches!(discretize_zoh(&P, -0.1), Err(Error::InvalidPeriod(_))));
        assert!(matches!(discretize_zoh(&P, f64::NAN), Err(Error::InvalidPeriod(_))));
        assert!(discretize_zoh(&P, f64::INFINITY).is_err());
    }

    #[test]
    fn clamp_examples() {
        let nl = InputNonlinearity::default();
        assert_eq!(clamp_input(1.5, &nl), 1.0);
        assert_eq!(clamp_input(-0.5, &nl), -0.5);
        let dz = InputNonlinearity {
            dead_zone_enabled: true,
            ..nl
        };
        assert_eq!(clamp_input(0.05, &dz), 0.0);
        assert_eq!(clamp_input(0.07, &dz), 0.07);
    }

    #[test]
    fn perturb_examples() {
        assert_eq!(P.perturb(0.0, 0.0).unwrap(), P);
        let p = P.perturb(30.0, 12.0).unwrap();
        let k = 0.7 * (6.3 / 17.7);
        let tau = 0.88 / 17.7;
        assert!((p.gain_num - k / tau).abs() < 1e-12);
        assert!((p.pole - 1.0 / tau).abs() < 1e-12);
        let p = P.perturb(20.0, 0.0).unwrap();
        assert!((p.pole - 17.7).abs() < 1e-12);
        assert!((p.gain_num - 0.8 * 6.3).abs() < 1e-12);
        assert!(P.perturb(100.0, 0.0).is_err());
    }

    #[test]
    fn invalid_plants() {
        assert!(ContinuousPlant::new(6.3, 0.0).is_err());
        assert!(ContinuousPlant::new(0.0, 17.7).is_err());
    }

    proptest! {
        #[test]
        fn zoh_composes(h1 in 0.001f64..0.3, h2 in 0.001f64..0.3, u in -1.0f64..1.0,
                        x0 in -0.1f64..0.1, x1 in -1.0f64..1.0) {
            let d1 = discretize_zoh(&P, h1).unwrap();
            let d2 = discretize_zoh(&P, h2).unwrap();
            let d12 = discretize_zoh(&P, h1 + h2).unwrap();
            let (mid, _) = d1.step([x0, x1], u);
            let (two, _) = d2.step(mid, u);
            let (one, _) = d12.step([x0, x1], u);
            prop_assert!((two[0] - one[0]).abs() < 1e-12);
            prop_assert!((two[1] - one[1]).abs() < 1e-12);
        }

        #[test]
        fn clamp_is_odd_and_idempotent(u in -5.0f64..5.0, dz in proptest::bool::ANY) {
            let nl = InputNonlinearity { dead_zone_enabled: dz, ..Default::default() };
            let c = clamp_input(u, &nl);
            prop_assert_eq!(clamp_input(-u, &nl), -c);
            prop_assert_eq!(clamp_input(c, &nl), c);
        }

        #[test]
        fn nominal_step_response_is_monotone(n in 1usize..200) {
            let dp = discretize_zoh(&P, 0.01).unwrap();
            let mut x = [0.0, 0.0];
            let mut last = 0.0;
            for _ in 0..n {
                let (nx, y) = dp.step(x, 1.0);
                prop_assert!(y >= last);
                last = y;
                x = nx;
            }
        }
    }
}
