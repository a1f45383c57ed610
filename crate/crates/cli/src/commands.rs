use std::fs;
use std::path::{Path, PathBuf};

use hyperpurify::schedule::{
    adaptive_run, find_threshold, recycle_compare, run_sequence, search_sequences, yield_estimate, ScheduleError, StepRecord, SwitchEvent,
    Trajectory, Verdict, YieldLedger,
};
use hyperpurify::verify::{verify_all, VerifyOptions, VerifyReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigFile, RunConfig};
use crate::CliError;

fn numerical(e: ScheduleError) -> CliError {
    CliError::Numerical(e.to_string())
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        Ok(p)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &bytes)
    }
}

/// Single results are written bare, several as an array.
fn one_or_many<T: Serialize>(mut items: Vec<T>) -> serde_json::Value {
    if items.len() == 1 {
        serde_json::to_value(items.remove(0))
    } else {
        serde_json::to_value(items)
    }
    .expect("serializable")
}

fn name(cfg: &ConfigFile, default: &str, ext: &str) -> String {
    cfg.output.clone().unwrap_or_else(|| format!("{default}.{ext}"))
}

fn stem(file: &str) -> &str {
    file.rsplit_once('.').map_or(file, |(s, _)| s)
}

fn par_cases<T: Send>(cfg: &ConfigFile, f: impl Fn(&RunConfig) -> Result<T, CliError> + Sync + Send) -> Result<Vec<T>, CliError> {
    cfg.cases.par_iter().map(f).collect()
}

#[derive(Serialize)]
struct StepRow<'a> {
    label: &'a str,
    step: usize,
    repetition: usize,
    color: &'a str,
    fidelity: f64,
    keep_probability: f64,
    p_keep: f64,
    p_minus: f64,
}

fn step_rows<'a>(label: &'a str, steps: &'a [StepRecord]) -> impl Iterator<Item = StepRow<'a>> {
    steps.iter().map(move |s| StepRow {
        label,
        step: s.step,
        repetition: s.repetition,
        color: &s.color,
        fidelity: s.fidelity,
        keep_probability: s.keep_probability,
        p_keep: s.p_keep,
        p_minus: s.p_minus,
    })
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    label: &'a str,
    noise: String,
    p: f64,
    policy: String,
    initial_fidelity: f64,
    final_fidelity: f64,
    verdict: Verdict,
    repetition_fidelities: &'a [f64],
}

fn summary<'a>(c: &'a RunConfig, p: f64, t: &'a Trajectory) -> TrajectorySummary<'a> {
    TrajectorySummary {
        label: c.label(),
        noise: c.noise.to_string(),
        p,
        policy: c.policy_name(),
        initial_fidelity: t.initial_fidelity,
        final_fidelity: t.steps.last().map_or(t.initial_fidelity, |s| s.fidelity),
        verdict: t.verdict,
        repetition_fidelities: &t.repetition_fidelities,
    }
}

pub fn run(cfg: &ConfigFile, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let results = par_cases(cfg, |c| {
        let protocol = c.protocol()?;
        let sigma = c.initial_state(&protocol)?;
        let p = c.noise_parameter(protocol.target().n_vertices())?;
        let t = run_sequence(&protocol, &sigma, &c.sequence, &c.convergence(), false).map_err(numerical)?;
        Ok((p, t))
    })?;
    let rows: Vec<StepRow> = cfg
        .cases
        .iter()
        .zip(&results)
        .flat_map(|(c, (_, t))| step_rows(c.label(), &t.steps))
        .collect();
    let file = name(cfg, "run", "csv");
    let summaries: Vec<_> = cfg.cases.iter().zip(&results).map(|(c, (p, t))| summary(c, *p, t)).collect();
    Ok(vec![
        out.csv(&file, &rows)?,
        out.json(&format!("{}_summary.json", stem(&file)), &one_or_many(summaries))?,
    ])
}

#[derive(Serialize)]
struct ThresholdRow {
    label: String,
    n: usize,
    noise: String,
    policy: String,
    p_min: f64,
    p_fail: f64,
    evaluations: usize,
    violations: usize,
}

#[derive(Serialize)]
struct ThresholdJson {
    label: String,
    n: usize,
    noise: String,
    policy: String,
    p_min: f64,
    p_fail: f64,
    evaluations: usize,
    violations: Vec<f64>,
}

pub fn threshold(cfg: &ConfigFile, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let results = par_cases(cfg, |c| {
        let protocol = c.protocol()?;
        let r = find_threshold(&protocol, c.noise, &c.policy_spec(), &c.threshold_options()).map_err(numerical)?;
        Ok(ThresholdJson {
            label: c.label().into(),
            n: protocol.target().n_vertices(),
            noise: c.noise.to_string(),
            policy: c.policy_name(),
            p_min: r.p_min,
            p_fail: r.p_fail,
            evaluations: r.evaluations,
            violations: r.violations,
        })
    })?;
    let rows: Vec<ThresholdRow> = results
        .iter()
        .map(|r| ThresholdRow {
            label: r.label.clone(),
            n: r.n,
            noise: r.noise.clone(),
            policy: r.policy.clone(),
            p_min: r.p_min,
            p_fail: r.p_fail,
            evaluations: r.evaluations,
            violations: r.violations.len(),
        })
        .collect();
    let file = name(cfg, "threshold", "json");
    Ok(vec![
        out.json(&file, &one_or_many(results))?,
        out.csv(&format!("{}.csv", stem(&file)), &rows)?,
    ])
}

#[derive(Serialize)]
struct SearchRow {
    label: String,
    rank: usize,
    sequence: String,
    p_min: f64,
    violations: usize,
}

pub fn search(cfg: &ConfigFile, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for c in &cfg.cases {
        let protocol = c.protocol()?;
        let entries = search_sequences(&protocol, c.noise, c.search.length, c.search.space, &c.threshold_options()).map_err(numerical)?;
        rows.extend(entries.into_iter().enumerate().map(|(i, e)| SearchRow {
            label: c.label().into(),
            rank: i + 1,
            sequence: e.sequence.to_string(),
            p_min: e.p_min,
            violations: e.violations,
        }));
    }
    Ok(vec![out.csv(&name(cfg, "search", "csv"), &rows)?])
}

#[derive(Serialize)]
struct AdaptiveJson<'a> {
    #[serde(flatten)]
    summary: TrajectorySummary<'a>,
    switch: Option<SwitchEvent>,
    steps: &'a [StepRecord],
}

pub fn adaptive(cfg: &ConfigFile, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let results = par_cases(cfg, |c| {
        let protocol = c.adaptive_protocol()?;
        let sigma = c.initial_state(&protocol)?;
        let p = c.noise_parameter(protocol.target().n_vertices())?;
        let o = adaptive_run(&protocol, &sigma, &c.adaptive_config(), c.estimator(), &c.convergence()).map_err(numerical)?;
        Ok((p, o))
    })?;
    let json: Vec<AdaptiveJson> = cfg
        .cases
        .iter()
        .zip(&results)
        .map(|(c, (p, o))| {
            let mut s = summary(c, *p, &o.trajectory);
            s.policy = "adaptive".into();
            AdaptiveJson {
                summary: s,
                switch: o.switch.clone(),
                steps: &o.trajectory.steps,
            }
        })
        .collect();
    let rows: Vec<StepRow> = cfg
        .cases
        .iter()
        .zip(&results)
        .flat_map(|(c, (_, o))| step_rows(c.label(), &o.trajectory.steps))
        .collect();
    let file = name(cfg, "adaptive", "json");
    Ok(vec![
        out.json(&file, &one_or_many(json))?,
        out.csv(&format!("{}.csv", stem(&file)), &rows)?,
    ])
}

#[derive(Serialize)]
struct YieldJson {
    label: String,
    #[serde(flatten)]
    ledger: YieldLedger,
}

pub fn yields(cfg: &ConfigFile, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let results = par_cases(cfg, |c| {
        let protocol = c.protocol()?;
        let sigma = c.initial_state(&protocol)?;
        let ledger = yield_estimate(&protocol, &sigma, &c.sequence, &c.yield_options()).map_err(numerical)?;
        Ok(YieldJson {
            label: c.label().into(),
            ledger,
        })
    })?;
    Ok(vec![out.json(&name(cfg, "yield", "json"), &one_or_many(results))?])
}

#[derive(Serialize)]
struct RecycleCsvRow {
    label: String,
    f0: f64,
    p: f64,
    reference_fidelity: f64,
    outputs_plain: f64,
    outputs_recycled: f64,
    extra_fraction: f64,
}

pub fn recycle(cfg: &ConfigFile, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let mut rows = Vec::new();
    for c in &cfg.cases {
        let protocol = c.protocol()?;
        let r = &c.recycle;
        for row in recycle_compare(&protocol, &c.sequence, &r.f0, r.rounds, r.max_steps).map_err(numerical)? {
            rows.push(RecycleCsvRow {
                label: c.label().into(),
                f0: row.f0,
                p: row.p,
                reference_fidelity: row.reference_fidelity,
                outputs_plain: row.outputs_plain,
                outputs_recycled: row.outputs_recycled,
                extra_fraction: row.extra_fraction,
            });
        }
    }
    Ok(vec![out.csv(&name(cfg, "recycle_compare", "csv"), &rows)?])
}

pub fn verify_options(path: Option<&Path>, seed: Option<u64>) -> Result<VerifyOptions, CliError> {
    let mut opts: VerifyOptions = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => VerifyOptions::default(),
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    Ok(opts)
}

pub fn verify(opts: &VerifyOptions, out: Option<&Output>) -> Result<(VerifyReport, Vec<PathBuf>), CliError> {
    let report = verify_all(opts);
    let files = match out {
        Some(o) => vec![o.json("verify.json", &report)?],
        None => Vec::new(),
    };
    Ok((report, files))
}
