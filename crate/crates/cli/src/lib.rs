//! Command implementations behind the `dualrate` binary.
//!
//! Every command writes into one output directory and finishes by writing
//! `manifest.txt`, which lists the resolved configuration hash and every
//! file produced.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dualrate_ncs::engine::run_comparison;
use dualrate_ncs::metrics::{comparison_report, robustness_grid, IndexReport, RobustnessReport};
use dualrate_ncs::{ControllerVariant, ScenarioConfig};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub mod plotdata;

/// Environment variable naming the root for default output directories.
pub const OUT_ENV: &str = "DUALRATE_OUT";

const BUNDLED: [(&str, &str); 5] = [
    ("nominal", include_str!("../scenarios/nominal.scenario")),
    ("paper_sec4", include_str!("../scenarios/paper_sec4.scenario")),
    ("robustness", include_str!("../scenarios/robustness.scenario")),
    ("experiment_like", include_str!("../scenarios/experiment_like.scenario")),
    ("lissajous", include_str!("../scenarios/lissajous.scenario")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".scenario").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// A scenario file path, or the name of a bundled scenario.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig> {
    let path = Path::new(spec);
    let text = if path.is_file() {
        fs::read_to_string(path).with_context(|| format!("reading {spec}"))?
    } else if let Some(t) = bundled_text(spec) {
        t.to_string()
    } else {
        bail!(
            "no scenario file '{spec}' and no bundled scenario of that name (bundled: {})",
            bundled_names().collect::<Vec<_>>().join(", ")
        );
    };
    ScenarioConfig::parse(&text).with_context(|| format!("parsing scenario '{spec}'"))
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_canonical_text().as_bytes()))
}

/// Output directory: the explicit one, else `<root>/<scenario>_<command>`
/// under `$DUALRATE_OUT` or `./out`.
pub fn resolve_out_dir(explicit: Option<&Path>, cfg: &ScenarioConfig, command: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from);
            root.join(format!("{}_{command}", cfg.name))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub scenario: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub command: String,
    /// Variant override, if any (comma separated).
    pub variants: Option<String>,
    /// Grid override of `sweep`, if any.
    pub grid: Option<String>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.txt";

    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut out = format!(
            "scenario={}\nconfig_sha256={}\nseeds={}\nout_dir={}\ncommand={}\n",
            self.scenario,
            self.config_sha256,
            seeds.join(","),
            self.out_dir.display(),
            self.command
        );
        if let Some(v) = &self.variants {
            out.push_str(&format!("variants={v}\n"));
        }
        if let Some(g) = &self.grid {
            out.push_str(&format!("grid={g}\n"));
        }
        for f in &self.files {
            out.push_str(&format!("file={f}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest {
            scenario: String::new(),
            config_sha256: String::new(),
            seeds: Vec::new(),
            out_dir: PathBuf::new(),
            command: String::new(),
            variants: None,
            grid: None,
            files: Vec::new(),
        };
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("manifest line {}: expected key=value", i + 1))?;
            match k {
                "scenario" => m.scenario = v.to_string(),
                "config_sha256" => m.config_sha256 = v.to_string(),
                "seeds" => {
                    m.seeds = v
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().with_context(|| format!("bad seed '{s}'")))
                        .collect::<Result<_>>()?
                }
                "out_dir" => m.out_dir = PathBuf::from(v),
                "command" => m.command = v.to_string(),
                "variants" => m.variants = Some(v.to_string()),
                "grid" => m.grid = Some(v.to_string()),
                "file" => m.files.push(v.to_string()),
                other => bail!("manifest line {}: unknown key '{other}'", i + 1),
            }
        }
        ensure!(!m.scenario.is_empty(), "manifest has no scenario");
        Ok(m)
    }

    /// Loads the scenario named by the manifest and checks its hash.
    pub fn load_config(&self) -> Result<ScenarioConfig> {
        let mut cfg = load_scenario(&self.scenario)?;
        if let Some(seed) = self.seeds.first() {
            cfg.seed = *seed;
        }
        let hash = config_hash(&cfg);
        ensure!(
            hash == self.config_sha256,
            "scenario '{}' no longer matches the manifest (hash {hash}, manifest {})",
            self.scenario,
            self.config_sha256
        );
        Ok(cfg)
    }
}

/// Collects written files relative to the output directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        self.files.push(RunManifest::FILE.to_string());
        manifest.out_dir = self.dir.clone();
        manifest.files = self.files;
        fs::write(self.dir.join(RunManifest::FILE), manifest.to_text())?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub scenario: String,
    pub seeds: Vec<u64>,
    /// Replaces the scenario's variant list; the nominal trace is always
    /// computed.
    pub variants: Option<Vec<ControllerVariant>>,
    pub out_dir: Option<PathBuf>,
}

impl RunRequest {
    /// Request reproducing a recorded run; the scenario must still hash to
    /// the recorded value.
    pub fn from_manifest(m: &RunManifest, out_dir: Option<PathBuf>) -> Result<Self> {
        m.load_config()?;
        let variants = m
            .variants
            .as_deref()
            .map(|v| v.split(',').map(str::parse).collect::<std::result::Result<Vec<ControllerVariant>, _>>())
            .transpose()?;
        Ok(RunRequest {
            scenario: m.scenario.clone(),
            seeds: m.seeds.clone(),
            variants,
            out_dir,
        })
    }
}

/// Result of one seed of `run`/`compare`.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub report: IndexReport,
}

fn run_variants(cfg: &ScenarioConfig, over: Option<&[ControllerVariant]>) -> Vec<ControllerVariant> {
    let mut vs = over.map_or_else(|| cfg.variants.clone(), <[_]>::to_vec);
    if !vs.contains(&ControllerVariant::Nominal) {
        vs.insert(0, ControllerVariant::Nominal);
    }
    vs
}

fn seed_prefix(seeds: &[u64], seed: u64) -> String {
    if seeds.len() > 1 {
        format!("seed_{seed}/")
    } else {
        String::new()
    }
}

/// Simulates the scenario for every seed and writes traces, reports and
/// the manifest. With several seeds each one gets a `seed_<n>/` folder and
/// a `seeds.csv` summary is added.
pub fn cmd_run(req: &RunRequest, command: &str) -> Result<(RunManifest, Vec<SeedResult>)> {
    let base = load_scenario(&req.scenario)?;
    let seeds = if req.seeds.is_empty() { vec![base.seed] } else { req.seeds.clone() };
    let variants = run_variants(&base, req.variants.as_deref());
    let mut check = base.clone();
    check.variants = variants.clone();
    check.validate().context("scenario validation failed")?;

    let per_seed: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = check.clone();
            cfg.seed = seed;
            let traces = run_comparison(&cfg, &variants)?;
            let report = comparison_report(&traces, &cfg)?;
            Ok((seed, traces, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut first_cfg = check.clone();
    first_cfg.seed = seeds[0];
    let out_dir = resolve_out_dir(req.out_dir.as_deref(), &first_cfg, command);
    let mut out = Outputs::create(&out_dir)?;
    out.write("scenario.resolved", &first_cfg.to_canonical_text())?;
    let horizon = first_cfg.channel.dropout.max_consecutive;
    let mut results = Vec::new();
    for (seed, traces, report) in per_seed {
        let p = seed_prefix(&seeds, seed);
        for t in &traces {
            let v = t.variant.as_str();
            out.write(&format!("{p}trace_{v}.csv"), &t.ticks_csv())?;
            out.write(&format!("{p}events_{v}.csv"), &t.events_csv())?;
            if t.variant.prediction() {
                out.write(&format!("{p}packets_{v}.csv"), &t.packets_csv(horizon))?;
            }
        }
        out.write(&format!("{p}report.csv"), &report.to_csv())?;
        let dropped: usize = traces
            .iter()
            .find(|t| t.variant.uses_network())
            .map_or(0, |t| t.axes.iter().flat_map(|a| &a.events).filter(|e| !e.d_lr || !e.d_rl).count());
        let summary = format!(
            "scenario={}\nseed={seed}\nconfig_sha256={}\nperiods_with_dropout={dropped}\n{}",
            first_cfg.name,
            config_hash(&first_cfg),
            report.to_summary("")
        );
        out.write(&format!("{p}summary.txt"), &summary)?;
        results.push(SeedResult { seed, report });
    }
    if seeds.len() > 1 {
        out.write("seeds.csv", &seeds_csv(&results))?;
    }
    let mut hashed = base.clone();
    hashed.seed = seeds[0];
    let manifest = out.finish(RunManifest {
        scenario: req.scenario.clone(),
        config_sha256: config_hash(&hashed),
        seeds: seeds.clone(),
        out_dir: PathBuf::new(),
        command: command.to_string(),
        variants: req
            .variants
            .as_ref()
            .map(|vs| vs.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(",")),
        grid: None,
        files: Vec::new(),
    })?;
    Ok((manifest, results))
}

/// Per-seed `E` and `J_E` of every variant plus a mean row.
pub fn seeds_csv(results: &[SeedResult]) -> String {
    let labels: Vec<String> = results[0].report.rows.iter().map(|r| r.label.clone()).collect();
    let mut out = String::from("seed");
    for l in &labels {
        write!(out, ",E_{l},J_E_{l}").unwrap();
    }
    out.push('\n');
    let mut sums = vec![0.0; labels.len() * 2];
    for r in results {
        write!(out, "{}", r.seed).unwrap();
        for (i, l) in labels.iter().enumerate() {
            let row = r.report.row(l).expect("same variants per seed");
            write!(out, ",{:.16e},{:.16e}", row.error, row.j_error).unwrap();
            sums[2 * i] += row.error;
            sums[2 * i + 1] += row.j_error;
        }
        out.push('\n');
    }
    out.push_str("mean");
    for s in sums {
        write!(out, ",{:.16e}", s / results.len() as f64).unwrap();
    }
    out.push('\n');
    out
}

/// `q=0,20,30;r=0,8,12`
pub fn parse_grid(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut q, mut r) = (None, None);
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').with_context(|| format!("grid part '{part}' is not key=values"))?;
        let vals = v
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value '{s}'")))
            .collect::<Result<Vec<_>>>()?;
        match k.trim() {
            "q" => q = Some(vals),
            "r" => r = Some(vals),
            other => bail!("unknown grid axis '{other}' (expected q or r)"),
        }
    }
    Ok((
        q.context("grid is missing q values")?,
        r.context("grid is missing r values")?,
    ))
}

pub fn format_grid(q: &[f64], r: &[f64]) -> String {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    format!("q={};r={}", join(q), join(r))
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub scenario: String,
    pub grid: Option<(Vec<f64>, Vec<f64>)>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub reports: Vec<(u64, RobustnessReport)>,
    pub degenerate: bool,
}

fn mean_spread(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let spread = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, spread)
}

/// Robustness grid for every seed; cell statistics over seeds.
pub fn cmd_sweep(req: &SweepRequest) -> Result<(RunManifest, SweepResult)> {
    let base = load_scenario(&req.scenario)?;
    let (q, r) = req
        .grid
        .clone()
        .unwrap_or_else(|| (base.sweep_q.clone(), base.sweep_r.clone()));
    let seeds = if req.seeds.is_empty() { vec![base.seed] } else { req.seeds.clone() };
    let mut check = base.clone();
    check.variants = vec![ControllerVariant::Nominal, ControllerVariant::DiP];
    check.validate().context("scenario validation failed")?;

    let reports = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = check.clone();
            cfg.seed = seed;
            Ok((seed, robustness_grid(&cfg, &q, &r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate = reports.iter().any(|(_, rep)| rep.degenerate);

    let mut first_cfg = check.clone();
    first_cfg.seed = seeds[0];
    first_cfg.sweep_q = q.clone();
    first_cfg.sweep_r = r.clone();
    let out_dir = resolve_out_dir(req.out_dir.as_deref(), &first_cfg, "sweep");
    let mut out = Outputs::create(&out_dir)?;
    out.write("scenario.resolved", &first_cfg.to_canonical_text())?;

    let mut cells = String::from("r,q,E_mean,E_spread,O_mean,O_spread,J3_mean,J3_spread,J4_mean,J4_spread\n");
    let mut tables: [Vec<Vec<f64>>; 4] = std::array::from_fn(|_| vec![vec![0.0; q.len()]; r.len()]);
    for (ir, rv) in r.iter().enumerate() {
        for (iq, qv) in q.iter().enumerate() {
            write!(cells, "{rv},{qv}").unwrap();
            let picks: [fn(&RobustnessReport) -> &Vec<Vec<f64>>; 4] =
                [|x| &x.error, |x| &x.overshoot, |x| &x.j3, |x| &x.j4];
            for (ti, pick) in picks.iter().enumerate() {
                let vals: Vec<f64> = reports.iter().map(|(_, rep)| pick(rep)[ir][iq]).collect();
                let (m, s) = mean_spread(&vals);
                tables[ti][ir][iq] = m;
                write!(cells, ",{m:.16e},{s:.16e}").unwrap();
            }
            cells.push('\n');
        }
    }
    out.write("sweep_cells.csv", &cells)?;
    let shape = &reports[0].1;
    for (name, table) in ["E_w", "O_w", "J3", "J4"].iter().zip(&tables) {
        out.write(&format!("table_{name}.csv"), &shape.table_csv(table))?;
    }
    for (seed, rep) in &reports {
        if seeds.len() > 1 {
            out.write(&format!("seed_{seed}/table_J3.csv"), &rep.table_csv(&rep.j3))?;
            out.write(&format!("seed_{seed}/table_J4.csv"), &rep.table_csv(&rep.j4))?;
        }
    }
    let seeds_txt: Vec<String> = seeds.iter().map(u64::to_string).collect();
    out.write(
        "summary.txt",
        &format!(
            "scenario={}\nseeds={}\ncells={}\ndegenerate={degenerate}\n",
            first_cfg.name,
            seeds_txt.join(","),
            q.len() * r.len()
        ),
    )?;
    let mut hashed = base.clone();
    hashed.seed = seeds[0];
    let manifest = out.finish(RunManifest {
        scenario: req.scenario.clone(),
        config_sha256: config_hash(&hashed),
        seeds: seeds.clone(),
        out_dir: PathBuf::new(),
        command: "sweep".into(),
        variants: None,
        grid: req.grid.as_ref().map(|(q, r)| format_grid(q, r)),
        files: Vec::new(),
    })?;
    Ok((manifest, SweepResult { reports, degenerate }))
}

/// Resolved configuration and derived timing, for `validate`.
pub fn cmd_validate(scenario: &str) -> Result<String> {
    let cfg = load_scenario(scenario)?;
    let timing = cfg.validate().context("scenario validation failed")?;
    Ok(format!(
        "{}# L = {}, N = {}, NT = {} s, periods = {}, ticks = {}\n# config_sha256 = {}\n",
        cfg.to_canonical_text(),
        timing.l,
        timing.n,
        timing.sensor_period,
        timing.periods,
        timing.total_ticks(),
        config_hash(&cfg)
    ))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunManifest::parse(&text)
}
