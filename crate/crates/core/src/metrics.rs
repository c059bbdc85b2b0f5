//! Cost indexes: accumulated absolute error against the nominal output,
//! overshoot relative to the nominal extremes, and their normalized
//! improvements with respect to a designated worst case.

use crate::engine::{draw_channels, run_with_channels};
use crate::error::{Error, Result};
use crate::scenario::{ControllerVariant, MetricsGrid, ScenarioConfig};
use crate::trace::SimTrace;

/// Output samples of every axis inside the metrics window.
pub fn window_samples(trace: &SimTrace, cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    let stride = match cfg.metrics_grid {
        MetricsGrid::Sensor => trace.ticks_per_period,
        MetricsGrid::Basic => 1,
    };
    trace
        .axes
        .iter()
        .map(|axis| {
            axis.ticks
                .iter()
                .enumerate()
                .filter(|(tick, _)| tick % stride == 0 && trace.time(*tick) >= cfg.window_start - 1e-12)
                .map(|(_, row)| row.output)
                .collect()
        })
        .collect()
}

fn check_grid(trace: &[f64], nominal: &[f64]) -> Result<()> {
    if trace.len() != nominal.len() {
        return Err(Error::GridMismatch(format!(
            "{} samples against {} nominal samples",
            trace.len(),
            nominal.len()
        )));
    }
    Ok(())
}

/// `sum |y - y_nom|` over the window.
pub fn accumulated_error(trace: &[f64], nominal: &[f64]) -> Result<f64> {
    check_grid(trace, nominal)?;
    Ok(trace.iter().zip(nominal).map(|(y, n)| (y - n).abs()).sum())
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), x| (hi.max(*x), lo.min(*x)))
}

/// `max(|max y - max y_nom|, |min y - min y_nom|)` over the window.
pub fn overshoot(trace: &[f64], nominal: &[f64]) -> Result<f64> {
    check_grid(trace, nominal)?;
    if trace.is_empty() {
        return Ok(0.0);
    }
    let (hi, lo) = extremes(trace);
    let (nhi, nlo) = extremes(nominal);
    Ok((hi - nhi).abs().max((lo - nlo).abs()))
}

/// Improvement in percent over a worst-case value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub percent: f64,
    /// The worst case was zero: every compared trace matched the nominal one.
    pub degenerate: bool,
}

pub fn j_improvement(value: f64, worst: f64) -> Improvement {
    if worst > 0.0 {
        Improvement {
            percent: 100.0 - 100.0 * value / worst,
            degenerate: false,
        }
    } else {
        Improvement {
            percent: if value == 0.0 { 100.0 } else { f64::NAN },
            degenerate: true,
        }
    }
}

/// Multi-axis accumulated error and overshoot of one trace.
pub fn error_and_overshoot(trace: &SimTrace, nominal: &SimTrace, cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    let ys = window_samples(trace, cfg);
    let ns = window_samples(nominal, cfg);
    if ys.len() != ns.len() {
        return Err(Error::GridMismatch(format!("{} axes against {}", ys.len(), ns.len())));
    }
    let mut e = 0.0;
    let mut o: f64 = 0.0;
    for (y, n) in ys.iter().zip(&ns) {
        e += accumulated_error(y, n)?;
        o = o.max(overshoot(y, n)?);
    }
    Ok((e, o))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRow {
    pub label: String,
    pub error: f64,
    pub overshoot: f64,
    /// Improvement of the accumulated error, %.
    pub j_error: f64,
    /// Improvement of the overshoot, %.
    pub j_overshoot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    pub rows: Vec<IndexRow>,
    pub degenerate: bool,
}

impl IndexReport {
    pub fn row(&self, label: &str) -> Option<&IndexRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Table layout `output,E,J_E(%),O,J_O(%)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("output,E,J_E,O,J_O\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.label, r.error, r.j_error, r.overshoot, r.j_overshoot
            ));
        }
        out
    }

    /// Flat `key=value` lines for scripted checks.
    pub fn to_summary(&self, prefix: &str) -> String {
        let mut out = format!("{prefix}degenerate={}\n", self.degenerate);
        for r in &self.rows {
            out.push_str(&format!(
                "{prefix}{l}.E={:e}\n{prefix}{l}.O={:e}\n{prefix}{l}.J_E={:e}\n{prefix}{l}.J_O={:e}\n",
                r.error,
                r.overshoot,
                r.j_error,
                r.j_overshoot,
                l = r.label
            ));
        }
        out
    }
}

/// Builds an index report; `worst_label` names the normalizing trace.
pub fn index_report(entries: &[(String, f64, f64)], worst_label: &str) -> Result<IndexReport> {
    let worst = entries
        .iter()
        .find(|(l, _, _)| l == worst_label)
        .ok_or_else(|| Error::Contract(format!("no '{worst_label}' entry to normalize by")))?;
    let (we, wo) = (worst.1, worst.2);
    let mut degenerate = false;
    let rows = entries
        .iter()
        .map(|(label, e, o)| {
            let je = j_improvement(*e, we);
            let jo = j_improvement(*o, wo);
            degenerate |= je.degenerate || jo.degenerate;
            IndexRow {
                label: label.clone(),
                error: *e,
                overshoot: *o,
                j_error: je.percent,
                j_overshoot: jo.percent,
            }
        })
        .collect();
    Ok(IndexReport { rows, degenerate })
}

/// Comparison indexes of a set of traces that includes the nominal one,
/// normalized by the delay-dependent no-prediction trace.
pub fn comparison_report(traces: &[SimTrace], cfg: &ScenarioConfig) -> Result<IndexReport> {
    let nominal = traces
        .iter()
        .find(|t| t.variant == ControllerVariant::Nominal)
        .ok_or_else(|| Error::Contract("comparison needs the nominal trace".into()))?;
    let entries = traces
        .iter()
        .map(|t| {
            let (e, o) = error_and_overshoot(t, nominal, cfg)?;
            Ok((t.variant.as_str().to_string(), e, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = if traces.iter().any(|t| t.variant == ControllerVariant::DdNp) {
        ControllerVariant::DdNp
    } else {
        // fall back to the largest error
        traces
            .iter()
            .zip(&entries)
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(t, _)| t.variant)
            .expect("non-empty")
    };
    index_report(&entries, worst.as_str())
}

/// Model-mismatch sweep of the delay-independent controller.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub q_values: Vec<f64>,
    pub r_values: Vec<f64>,
    /// Indexed `[r][q]`.
    pub error: Vec<Vec<f64>>,
    pub overshoot: Vec<Vec<f64>>,
    pub j3: Vec<Vec<f64>>,
    pub j4: Vec<Vec<f64>>,
    pub degenerate: bool,
}

impl RobustnessReport {
    /// One table: header row of q values, one row per r value.
    pub fn table_csv(&self, values: &[Vec<f64>]) -> String {
        let mut out = String::from("r\\q");
        for q in &self.q_values {
            out.push_str(&format!(",{q}"));
        }
        out.push('\n');
        for (ir, r) in self.r_values.iter().enumerate() {
            out.push_str(&format!("{r}"));
            for v in &values[ir] {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the delay-independent controller with prediction for every
/// `(q, r)` plant perturbation, all with the base model and channel seed.
///
/// The `q = r = 0` cell is the nominal (network-free) output itself; the
/// cell with the largest `q` and `r` is the normalizing worst case.
pub fn robustness_grid(base: &ScenarioConfig, q_values: &[f64], r_values: &[f64]) -> Result<RobustnessReport> {
    if q_values.is_empty() || r_values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut nominal_cfg = base.clone();
    nominal_cfg.perturb_q = 0.0;
    nominal_cfg.perturb_r = 0.0;
    nominal_cfg.variants = vec![ControllerVariant::Nominal, ControllerVariant::DiP];
    let timing = nominal_cfg.validate()?;
    let channels = draw_channels(&nominal_cfg, &timing);
    let nominal = run_with_channels(&nominal_cfg, ControllerVariant::Nominal, &channels, &timing)?;

    let mut error = vec![vec![0.0; q_values.len()]; r_values.len()];
    let mut overshoot_v = error.clone();
    for (ir, &r) in r_values.iter().enumerate() {
        for (iq, &q) in q_values.iter().enumerate() {
            if q == 0.0 && r == 0.0 {
                continue;
            }
            let mut cell = nominal_cfg.clone();
            cell.perturb_q = q;
            cell.perturb_r = r;
            cell.validate()?;
            let trace = run_with_channels(&cell, ControllerVariant::DiP, &channels, &timing)?;
            let (e, o) = error_and_overshoot(&trace, &nominal, base)?;
            error[ir][iq] = e;
            overshoot_v[ir][iq] = o;
        }
    }

    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty")
    };
    let (wr, wq) = (argmax(r_values), argmax(q_values));
    let (we, wo) = (error[wr][wq], overshoot_v[wr][wq]);
    let mut degenerate = false;
    let mut norm = |vals: &Vec<Vec<f64>>, worst: f64| -> Vec<Vec<f64>> {
        vals.iter()
            .map(|row| {
                row.iter()
                    .map(|v| {
                        let j = j_improvement(*v, worst);
                        degenerate |= j.degenerate;
                        j.percent
                    })
                    .collect()
            })
            .collect()
    };
    let j3 = norm(&error, we);
    let j4 = norm(&overshoot_v, wo);
    Ok(RobustnessReport {
        q_values: q_values.to_vec(),
        r_values: r_values.to_vec(),
        error,
        overshoot: overshoot_v,
        j3,
        j4,
        degenerate,
    })
}
