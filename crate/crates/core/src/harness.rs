//! Replicated experiments: the heterogeneity/bias sweep and the behavioural
//! preset comparison, with CSV output and trend tests.
//!
//! Every replicate's seed is derived up front from `(master_seed, cell,
//! replicate)`, so the worker count never changes a single output byte.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::seed::{self, role};
use crate::simulation::{run, GroupPreset, SimulationConfig};
use crate::stats::{mean, sample_std, spearman_permutation_test, CorrelationTest};

pub const RAW_HEADER: &str = "nu,beta,group,replicate,seed,decision_true_utility,convergence,entropy_bits,distinct_types,population_size,events,skipped_events";
pub const SUMMARY_HEADER: &str =
    "nu,beta,group,R,mean_utility,std_utility,mean_convergence,std_convergence";

pub const DEFAULT_REPLICATES: usize = 50;
pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// `0.0, 0.2, ..., 1.2`.
pub fn default_grid() -> Vec<f64> {
    (0..=6).map(|i| f64::from(i) / 5.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub nu_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub replicates: usize,
    /// Everything except `nu`, `beta`, the group and the seed is taken from here.
    pub base: SimulationConfig,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            nu_values: default_grid(),
            beta_values: default_grid(),
            replicates: DEFAULT_REPLICATES,
            base: SimulationConfig::default(),
            master_seed: 0,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub groups: Vec<GroupPreset>,
    pub replicates: usize,
    /// `nu` is forced to 0 unless `heterogeneity` overrides it.
    pub base: SimulationConfig,
    pub heterogeneity: Option<f64>,
    pub master_seed: u64,
    pub jobs: usize,
}

impl Default for GroupSpec {
    fn default() -> Self {
        Self {
            groups: GroupPreset::ALL.to_vec(),
            replicates: DEFAULT_REPLICATES,
            base: SimulationConfig::default(),
            heterogeneity: None,
            master_seed: 0,
            jobs: 0,
        }
    }
}

/// One replicate's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub nu: f64,
    pub beta: f64,
    pub group: GroupPreset,
    pub replicate: usize,
    pub seed: u64,
    pub decision_true_utility: f64,
    pub convergence: f64,
    pub entropy_bits: f64,
    pub distinct_types: usize,
    pub population_size: usize,
    pub events: usize,
    pub skipped_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub nu: f64,
    pub beta: f64,
    pub group: GroupPreset,
    pub replicates: usize,
    pub mean_utility: f64,
    pub std_utility: f64,
    pub mean_convergence: f64,
    pub std_convergence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<RawRow>,
    pub summaries: Vec<CellSummary>,
}

struct Task {
    cell: usize,
    config: SimulationConfig,
    replicate: usize,
}

fn validate_values(key: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(key, "needs at least one value"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::config(key, "values must be non-negative"));
    }
    Ok(())
}

fn run_tasks(tasks: Vec<Task>, cells: usize, jobs: usize) -> Result<ExperimentOutput> {
    let exec = |t: &Task| -> Result<RawRow> {
        let res = run(&t.config).map_err(|e| Error::Task {
            context: format!(
                "nu={} beta={} group={} replicate={}",
                t.config.heterogeneity, t.config.bias, t.config.group, t.replicate
            ),
            source: Box::new(e),
        })?;
        let m = res.metrics;
        Ok(RawRow {
            nu: t.config.heterogeneity,
            beta: t.config.bias,
            group: t.config.group,
            replicate: t.replicate,
            seed: t.config.master_seed,
            decision_true_utility: m.decision_true_utility,
            convergence: m.convergence,
            entropy_bits: m.entropy_bits,
            distinct_types: m.distinct_types,
            population_size: m.population_size,
            events: res.log.events.len(),
            skipped_events: res.skipped_events(),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let rows: Vec<RawRow> = pool.install(|| tasks.par_iter().map(exec).collect::<Result<_>>())?;

    let mut per_cell: Vec<Vec<&RawRow>> = vec![Vec::new(); cells];
    for (task, row) in tasks.iter().zip(&rows) {
        per_cell[task.cell].push(row);
    }
    let summaries = per_cell.iter().map(|rows| summarize(rows)).collect();
    Ok(ExperimentOutput { rows, summaries })
}

/// Aggregate the replicates of one cell.
pub fn summarize(rows: &[&RawRow]) -> CellSummary {
    let utility: Vec<f64> = rows.iter().map(|r| r.decision_true_utility).collect();
    let conv: Vec<f64> = rows.iter().map(|r| r.convergence).collect();
    let first = rows.first().expect("cells always have replicates");
    CellSummary {
        nu: first.nu,
        beta: first.beta,
        group: first.group,
        replicates: rows.len(),
        mean_utility: mean(&utility),
        std_utility: sample_std(&utility),
        mean_convergence: mean(&conv),
        std_convergence: sample_std(&conv),
    }
}

/// Balanced (G0) groups over every `(nu, beta)` cell, `replicates` runs each.
pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentOutput> {
    validate_values("nu_values", &spec.nu_values)?;
    validate_values("beta_values", &spec.beta_values)?;
    if spec.replicates < 1 {
        return Err(Error::config("R", "must be at least 1"));
    }
    let mut tasks = Vec::new();
    let mut cell = 0;
    for &nu in &spec.nu_values {
        for &beta in &spec.beta_values {
            let cell_seed = seed::derive_seed(spec.master_seed, role::CELL, cell as u64);
            for replicate in 0..spec.replicates {
                let config = SimulationConfig {
                    heterogeneity: nu,
                    bias: beta,
                    group: GroupPreset::G0,
                    master_seed: seed::derive_seed(cell_seed, role::REPLICATE, replicate as u64),
                    ..spec.base.clone()
                };
                tasks.push(Task {
                    cell,
                    config,
                    replicate,
                });
            }
            cell += 1;
        }
    }
    if let Some(t) = tasks.first() {
        t.config.validate()?;
    }
    run_tasks(tasks, cell, spec.jobs)
}

/// `replicates` runs per behavioural preset, `nu = 0` unless overridden.
pub fn run_group_comparison(spec: &GroupSpec) -> Result<ExperimentOutput> {
    if spec.groups.is_empty() {
        return Err(Error::config("groups", "needs at least one group"));
    }
    if spec.replicates < 1 {
        return Err(Error::config("R", "must be at least 1"));
    }
    let nu = spec.heterogeneity.unwrap_or(0.0);
    let mut tasks = Vec::new();
    for (cell, &group) in spec.groups.iter().enumerate() {
        let group_seed = seed::derive_seed(spec.master_seed, role::GROUP, group as u64);
        for replicate in 0..spec.replicates {
            let config = SimulationConfig {
                heterogeneity: nu,
                group,
                master_seed: seed::derive_seed(group_seed, role::REPLICATE, replicate as u64),
                ..spec.base.clone()
            };
            tasks.push(Task {
                cell,
                config,
                replicate,
            });
        }
    }
    if let Some(t) = tasks.first() {
        t.config.validate()?;
    }
    run_tasks(tasks, spec.groups.len(), spec.jobs)
}

pub fn raw_csv(rows: &[RawRow]) -> String {
    let mut out = format!("{RAW_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            sig17(r.nu),
            sig17(r.beta),
            r.group,
            r.replicate,
            r.seed,
            sig17(r.decision_true_utility),
            sig17(r.convergence),
            sig17(r.entropy_bits),
            r.distinct_types,
            r.population_size,
            r.events,
            r.skipped_events
        );
    }
    out
}

pub fn summary_csv(summaries: &[CellSummary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig17(s.nu),
            sig17(s.beta),
            s.group,
            s.replicates,
            sig17(s.mean_utility),
            sig17(s.std_utility),
            sig17(s.mean_convergence),
            sig17(s.std_convergence)
        );
    }
    out
}

/// Parse rows written by [`raw_csv`]; `#` lines are skipped.
pub fn parse_raw_csv(text: &str) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let bad = |reason: String| Error::MalformedLog {
            line: i + 1,
            reason,
        };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != RAW_HEADER {
                return Err(bad("expected raw CSV header".into()));
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(bad(format!("expected 12 fields, found {}", f.len())));
        }
        fn p<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("cannot parse `{s}`"))
        }
        let row = (|| -> std::result::Result<RawRow, String> {
            Ok(RawRow {
                nu: p(f[0])?,
                beta: p(f[1])?,
                group: f[2].parse().map_err(|e: Error| e.to_string())?,
                replicate: p(f[3])?,
                seed: p(f[4])?,
                decision_true_utility: p(f[5])?,
                convergence: p(f[6])?,
                entropy_bits: p(f[7])?,
                distinct_types: p(f[8])?,
                population_size: p(f[9])?,
                events: p(f[10])?,
                skipped_events: p(f[11])?,
            })
        })()
        .map_err(bad)?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Utility,
    Convergence,
}

/// Which parameter varies while the other is held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Heterogeneity,
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendResult {
    pub factor: Factor,
    pub metric: Metric,
    pub test: CorrelationTest,
}

impl TrendResult {
    pub fn name(&self) -> &'static str {
        match (self.factor, self.metric) {
            (Factor::Heterogeneity, Metric::Utility) => "nu->utility|beta=0",
            (Factor::Bias, Metric::Utility) => "beta->utility|nu=0",
            (Factor::Heterogeneity, Metric::Convergence) => "nu->convergence|beta=0",
            (Factor::Bias, Metric::Convergence) => "beta->convergence|nu=0",
        }
    }

    /// Significantly negative at level `alpha` (one-sided).
    pub fn negative_at(&self, alpha: f64) -> bool {
        self.test.defined && self.test.rho < 0.0 && self.test.p_negative < alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub results: Vec<TrendResult>,
}

impl TrendReport {
    pub fn get(&self, factor: Factor, metric: Metric) -> &TrendResult {
        self.results
            .iter()
            .find(|r| r.factor == factor && r.metric == metric)
            .expect("all four trends are always computed")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("test,rho,p_negative,p_two_sided,n\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.name(),
                sig17(r.test.rho),
                sig17(r.test.p_negative),
                sig17(r.test.p_two_sided),
                r.test.n
            );
        }
        out
    }
}

/// Spearman trends of both metrics along each axis of the sweep, the other axis at 0.
pub fn trend_tests(rows: &[RawRow], permutations: usize, seed: u64) -> Result<TrendReport> {
    let mut results = Vec::with_capacity(4);
    let combos = [
        (Factor::Heterogeneity, Metric::Utility),
        (Factor::Bias, Metric::Utility),
        (Factor::Heterogeneity, Metric::Convergence),
        (Factor::Bias, Metric::Convergence),
    ];
    for (i, (factor, metric)) in combos.into_iter().enumerate() {
        let selected: Vec<&RawRow> = rows
            .iter()
            .filter(|r| match factor {
                Factor::Heterogeneity => r.beta == 0.0,
                Factor::Bias => r.nu == 0.0,
            })
            .collect();
        let xs: Vec<f64> = selected
            .iter()
            .map(|r| match factor {
                Factor::Heterogeneity => r.nu,
                Factor::Bias => r.beta,
            })
            .collect();
        let ys: Vec<f64> = selected
            .iter()
            .map(|r| match metric {
                Metric::Utility => r.decision_true_utility,
                Metric::Convergence => r.convergence,
            })
            .collect();
        let mut distinct = xs.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut result = TrendResult {
            factor,
            metric,
            test: CorrelationTest {
                rho: 0.0,
                p_negative: 1.0,
                p_two_sided: 1.0,
                n: 0,
                defined: false,
            },
        };
        if distinct.len() < 2 {
            return Err(Error::InsufficientRows(result.name().to_string()));
        }
        let mut rng = seed::stream(seed, role::TREND, i as u64);
        result.test = spearman_permutation_test(&xs, &ys, permutations, &mut rng);
        results.push(result);
    }
    Ok(TrendReport { results })
}
