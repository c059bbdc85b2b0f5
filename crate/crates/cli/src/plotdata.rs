//! Plot-ready extracts of trace CSVs: output overlays, dropout markers and
//! XY paths for two-axis runs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use sha2::{Digest, Sha256};

use crate::{Outputs, RunManifest};

/// Numeric columns of one trace file.
#[derive(Debug, Clone)]
pub struct TraceTable {
    pub label: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn axes(&self) -> Vec<&'static str> {
        ["x", "y"]
            .into_iter()
            .filter(|a| self.col(&format!("output_{a}")).is_some())
            .collect()
    }
}

/// `trace_dd_p.csv` -> `dd_p`.
fn label_of(path: &Path) -> String {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    stem.strip_prefix("trace_").map_or(stem.clone(), str::to_string)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let columns = rd.headers()?.iter().map(str::to_string).collect();
    let rows = rd
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("malformed CSV {}", path.display()))?;
    Ok((columns, rows))
}

pub fn read_trace(path: &Path) -> Result<TraceTable> {
    let (columns, records) = read_table(path)?;
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            rec.iter()
                .map(|v| {
                    v.parse::<f64>()
                        .with_context(|| format!("{} row {}: '{v}' is not a number", path.display(), i + 2))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let t = TraceTable {
        label: label_of(path),
        columns,
        rows,
    };
    ensure!(t.col("time").is_some(), "{}: no time column", path.display());
    ensure!(!t.axes().is_empty(), "{}: no output columns", path.display());
    ensure!(!t.rows.is_empty(), "{}: trace is empty", path.display());
    ensure!(
        t.rows.iter().all(|r| r.len() == t.columns.len()),
        "{}: ragged rows",
        path.display()
    );
    Ok(t)
}

/// Dropout markers from an events file: one row per lost packet with the
/// length of the loss run it belongs to so far.
fn markers_csv(events: &Path) -> Result<String> {
    let (columns, records) = read_table(events)?;
    let idx = |name: &str| {
        columns
            .iter()
            .position(|c| c == name)
            .with_context(|| format!("{}: missing column {name}", events.display()))
    };
    let (ti, ai, lri, rli) = (idx("time")?, idx("axis")?, idx("d_lr")?, idx("d_rl")?);
    let mut runs: HashMap<(String, &str), usize> = HashMap::new();
    let mut out = String::from("time,axis,link,consecutive\n");
    for rec in &records {
        let axis = rec.get(ai).unwrap_or("").to_string();
        for (link, col) in [("lr", lri), ("rl", rli)] {
            let run = runs.entry((axis.clone(), link)).or_insert(0);
            if rec.get(col) == Some("0") {
                *run += 1;
                writeln!(out, "{},{axis},{link},{run}", rec.get(ti).unwrap_or("")).unwrap();
            } else {
                *run = 0;
            }
        }
    }
    Ok(out)
}

/// Writes `overlay.csv`, `markers_<label>.csv` (when the matching events
/// file sits next to the trace) and `xy_<label>.csv` for two-axis traces.
/// Every `stride`-th tick is kept. Nothing is written if any input is
/// unusable.
pub fn cmd_plotdata(traces: &[PathBuf], out_dir: &Path, stride: usize) -> Result<RunManifest> {
    ensure!(!traces.is_empty(), "no trace files given");
    ensure!(stride >= 1, "stride must be >= 1");
    let tables = traces.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
    let first = &tables[0];
    for t in &tables[1..] {
        if t.rows.len() != first.rows.len() || t.axes() != first.axes() {
            bail!(
                "traces '{}' and '{}' are not on a common grid",
                first.label,
                t.label
            );
        }
    }
    let mut markers = Vec::new();
    for (path, t) in traces.iter().zip(&tables) {
        let events = path.with_file_name(format!("events_{}.csv", t.label));
        if events.is_file() {
            markers.push((t.label.clone(), markers_csv(&events)?));
        }
    }

    let axes = first.axes();
    let time = first.col("time").expect("checked");
    let mut overlay = String::from("time");
    for a in &axes {
        write!(overlay, ",reference_{a}").unwrap();
        for t in &tables {
            write!(overlay, ",{}_{a}", t.label).unwrap();
        }
    }
    overlay.push('\n');
    for i in (0..first.rows.len()).step_by(stride) {
        write!(overlay, "{}", first.rows[i][time]).unwrap();
        for a in &axes {
            match first.col(&format!("reference_{a}")) {
                Some(c) => write!(overlay, ",{}", first.rows[i][c]).unwrap(),
                None => overlay.push(','),
            }
            for t in &tables {
                let c = t.col(&format!("output_{a}")).expect("checked");
                write!(overlay, ",{}", t.rows[i][c]).unwrap();
            }
        }
        overlay.push('\n');
    }

    let mut out = Outputs::create(out_dir)?;
    out.write("overlay.csv", &overlay)?;
    for (label, m) in &markers {
        out.write(&format!("markers_{label}.csv"), m)?;
    }
    if axes.len() == 2 {
        for t in &tables {
            let c = |n: &str| t.col(n).expect("checked");
            let (ox, oy) = (c("output_x"), c("output_y"));
            let refs = (t.col("reference_x"), t.col("reference_y"));
            let mut xy = String::from("time,x,y,reference_x,reference_y\n");
            for i in (0..t.rows.len()).step_by(stride) {
                let r = &t.rows[i];
                let (rx, ry) = match refs {
                    (Some(a), Some(b)) => (r[a].to_string(), r[b].to_string()),
                    _ => (String::new(), String::new()),
                };
                writeln!(xy, "{},{},{},{rx},{ry}", r[time], r[ox], r[oy]).unwrap();
            }
            out.write(&format!("xy_{}.csv", t.label), &xy)?;
        }
    }

    let mut hasher = Sha256::new();
    for p in traces {
        hasher.update(std::fs::read(p)?);
    }
    let names: Vec<String> = traces.iter().map(|p| p.display().to_string()).collect();
    out.finish(RunManifest {
        scenario: names.join(","),
        config_sha256: hex::encode(hasher.finalize()),
        seeds: Vec::new(),
        out_dir: PathBuf::new(),
        command: "plotdata".into(),
        variants: None,
        grid: None,
        files: Vec::new(),
    })
}
