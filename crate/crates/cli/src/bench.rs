//! Benchmark sweeps: a TOML file lists instances and a parameter grid; each
//! grid cell becomes one CSV row, written as soon as it finishes.
//!
//! ```toml
//! workers = 1                      # parallel solver slots (default 1)
//!
//! [grid]
//! methods = ["bcp", "cp"]
//! scenarios = [1000, 20000]        # ignored for instances given as scenario files
//! k = [10]
//! gamma = ["auto", 1.0]
//! time_limit_sec = 600.0           # also: beta, eps, delta, mu_bar
//!
//! [[instance]]
//! name = "port1"
//! orlib = "data/port1.txt"         # or `synthetic = 25`, or `scenarios = "file.txt"`
//! scale = 100.0
//! seed = 7
//! ```

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ccvar::driver::{self, SolverConfig};
use ccvar::ingest;
use ccvar::model::uniform_probs;

use crate::report::{AutoOr, CliMethod};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    #[serde(default = "one")]
    workers: usize,
    grid: Grid,
    #[serde(rename = "instance")]
    instances: Vec<InstanceSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    methods: Vec<CliMethod>,
    #[serde(default)]
    scenarios: Vec<usize>,
    k: Vec<usize>,
    #[serde(default = "auto_list")]
    gamma: Vec<AutoOr>,
    #[serde(default = "default_beta")]
    beta: f64,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default = "default_delta")]
    delta: f64,
    #[serde(default = "default_time_limit")]
    time_limit_sec: f64,
    #[serde(default = "auto")]
    mu_bar: AutoOr,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceSpec {
    name: String,
    orlib: Option<PathBuf>,
    synthetic: Option<usize>,
    scenarios: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "unit_scale")]
    scale: f64,
}

fn one() -> usize {
    1
}
fn auto() -> AutoOr {
    AutoOr::AUTO
}
fn auto_list() -> Vec<AutoOr> {
    vec![AutoOr::AUTO]
}
fn default_beta() -> f64 {
    driver::DEFAULT_BETA
}
fn default_eps() -> f64 {
    driver::DEFAULT_EPS
}
fn default_delta() -> f64 {
    driver::DEFAULT_DELTA
}
fn default_time_limit() -> f64 {
    driver::DEFAULT_TIME_LIMIT
}
fn unit_scale() -> f64 {
    1.0
}

/// One CSV line.
#[derive(Debug, Serialize)]
struct Row {
    instance: String,
    method: String,
    #[serde(rename = "S")]
    s: String,
    k: usize,
    gamma: String,
    obj: Option<f64>,
    gap_pct: Option<f64>,
    time_sec: Option<f64>,
    nodes: Option<u64>,
    cuts: Option<usize>,
    status: String,
}

type Scenarios = Arc<(Vec<Vec<f64>>, Vec<f64>)>;

struct Job {
    instance: String,
    s_label: String,
    data: std::result::Result<Scenarios, String>,
    k: usize,
    gamma: AutoOr,
    method: CliMethod,
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.grid.methods.is_empty() || self.grid.k.is_empty() || self.grid.gamma.is_empty() {
            bail!("grid needs at least one method, k and gamma");
        }
        for inst in &self.instances {
            let sources = [inst.orlib.is_some(), inst.synthetic.is_some(), inst.scenarios.is_some()];
            if sources.iter().filter(|b| **b).count() != 1 {
                bail!("instance {:?} needs exactly one of orlib, synthetic, scenarios", inst.name);
            }
            if inst.scenarios.is_none() && self.grid.scenarios.is_empty() {
                bail!("instance {:?} is sampled but grid.scenarios is empty", inst.name);
            }
        }
        Ok(())
    }
}

/// Scenario sets for an instance, one per scenario count.
fn load(inst: &InstanceSpec, base: &Path, counts: &[usize]) -> Vec<(String, std::result::Result<Scenarios, String>)> {
    let rel = |p: &Path| base.join(p);
    if let Some(path) = &inst.scenarios {
        let path = rel(path);
        let data = crate::read(&path)
            .and_then(|t| ingest::parse_scenarios(&t).with_context(|| format!("in {}", path.display())))
            .map_err(|e| format!("{e:#}"));
        let label = data.as_ref().map_or_else(|_| "-".to_string(), |d| d.0.len().to_string());
        return vec![(label, data.map(Arc::new))];
    }
    let moments = crate::load_moments(inst.orlib.as_deref().map(rel).as_deref(), inst.synthetic.map(|n| (n, inst.seed)), inst.scale);
    counts
        .iter()
        .map(|&s| {
            let data = match &moments {
                Ok(m) => ingest::generate_scenarios(m, s, inst.seed)
                    .map(|rows| Arc::new((rows, uniform_probs(s))))
                    .map_err(|e| e.to_string()),
                Err(e) => Err(format!("{e:#}")),
            };
            (s.to_string(), data)
        })
        .collect()
}

fn run_job(job: &Job, grid: &Grid) -> Row {
    let mut row = Row {
        instance: job.instance.clone(),
        method: job.method.to_string(),
        s: job.s_label.clone(),
        k: job.k,
        gamma: job.gamma.to_string(),
        obj: None,
        gap_pct: None,
        time_sec: None,
        nodes: None,
        cuts: None,
        status: String::new(),
    };
    let result = job.data.clone().map_err(anyhow::Error::msg).and_then(|data| {
        let (rows, probs) = (*data).clone();
        let instance = driver::prepare_instance(rows, probs, job.k, grid.beta, job.gamma.value(), grid.mu_bar.value())?;
        row.gamma = instance.gamma().to_string();
        let cfg = SolverConfig {
            eps: grid.eps,
            delta: grid.delta,
            time_limit: grid.time_limit_sec,
            ..SolverConfig::default()
        };
        Ok(driver::solve(&instance, &cfg, job.method.into())?)
    });
    match result {
        Ok(r) => {
            row.obj = r.obj;
            row.gap_pct = r.gap_pct;
            row.time_sec = Some(r.time_sec);
            row.nodes = Some(r.nodes);
            row.cuts = Some(r.cuts);
            row.status = format!("{:?}", r.status);
        }
        Err(e) => {
            log::error!("{} {} S={} k={}: {e:#}", row.instance, row.method, row.s, row.k);
            row.status = "Error".into();
        }
    }
    row
}

pub fn run(config_path: &Path, out: &Path) -> Result<()> {
    let text = crate::read(config_path)?;
    let cfg: BenchConfig = toml::from_str(&text).with_context(|| format!("in {}", config_path.display()))?;
    cfg.validate()?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let mut jobs = Vec::new();
    for inst in &cfg.instances {
        for (s_label, data) in load(inst, base, &cfg.grid.scenarios) {
            for &k in &cfg.grid.k {
                for &gamma in &cfg.grid.gamma {
                    for &method in &cfg.grid.methods {
                        jobs.push(Job {
                            instance: inst.name.clone(),
                            s_label: s_label.clone(),
                            data: data.clone(),
                            k,
                            gamma,
                            method,
                        });
                    }
                }
            }
        }
    }

    let file = File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    let mut writer = csv::Writer::from_writer(file);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Row>();
    thread::scope(|scope| -> Result<()> {
        for _ in 0..cfg.workers.min(jobs.len().max(1)) {
            let tx = tx.clone();
            let (jobs, next, grid) = (&jobs, &next, &cfg.grid);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                if tx.send(run_job(job, grid)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        if jobs.is_empty() {
            writer.write_record(["instance", "method", "S", "k", "gamma", "obj", "gap_pct", "time_sec", "nodes", "cuts", "status"])?;
        }
        for row in rx {
            writer.serialize(&row)?;
            writer.flush()?;
        }
        Ok(())
    })?;
    writer.flush()?;
    Ok(())
}
