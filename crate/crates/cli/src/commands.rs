use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ideaevo::genealogy::build_genealogy;
use ideaevo::harness::{
    self, raw_csv, run_group_comparison, run_sweep, summary_csv, trend_tests, GroupSpec, RawRow,
    SweepSpec,
};
use ideaevo::numfmt::sig17;
use ideaevo::seed::{self, role};
use ideaevo::simulation::{init_simulation, parse_kv_lines, GroupPreset, CONFIG_KEYS};
use ideaevo::stats::mean_difference_permutation_test;
use ideaevo::{Error, EventLog, SimulationConfig};

use crate::{
    Command, GenealogyArgs, GroupsArgs, HarnessArgs, OracleArgs, RunArgs, SimArgs, SweepArgs,
};

#[derive(Debug)]
pub enum CliError {
    Config(Error),
    Runtime(Error),
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Io { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) | CliError::Runtime(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

/// Sort library errors into configuration problems and runtime failures.
fn classify(e: Error) -> CliError {
    match e {
        Error::Config { .. }
        | Error::TooManyRepresentatives { .. }
        | Error::TooFewRepresentatives(_)
        | Error::Dimension { .. }
        | Error::EnumerationCap { .. }
        | Error::UnknownGroup(_)
        | Error::InsufficientRows(_) => CliError::Config(e),
        Error::Task { ref source, .. } if matches!(**source, Error::Config { .. }) => {
            CliError::Config(e)
        }
        _ => CliError::Runtime(e),
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Groups(a) => cmd_groups(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Genealogy(a) => cmd_genealogy(&a),
    }
}

const HARNESS_KEYS: [&str; 6] = [
    "R",
    "jobs",
    "permutations",
    "nu_values",
    "beta_values",
    "groups",
];

/// Everything a config file and the flags resolve to.
struct Resolved {
    sim: SimulationConfig,
    /// Keys explicitly given, by file or flag.
    set: BTreeSet<String>,
    harness: Vec<(String, String)>,
}

impl Resolved {
    fn harness_value(&self, key: &str) -> Option<&str> {
        self.harness
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(sim: &SimArgs, harness_flags: &[(&str, Option<&String>)]) -> CliResult<Resolved> {
    let mut cfg = SimulationConfig::default();
    let mut set = BTreeSet::new();
    let mut harness = Vec::new();
    if let Some(path) = &sim.config {
        let text = read(path)?;
        parse_kv_lines(&text, |_, key, value| {
            if HARNESS_KEYS.contains(&key) {
                harness.push((key.to_string(), value.to_string()));
                return Ok(());
            }
            cfg.set(key, value)?;
            set.insert(key.to_string());
            Ok(())
        })
        .map_err(CliError::Config)?;
    }
    for (key, value) in sim.overrides() {
        cfg.set(key, &value).map_err(CliError::Config)?;
        set.insert(key.to_string());
    }
    for (key, value) in harness_flags {
        if let Some(v) = value {
            harness.push((key.to_string(), v.to_string()));
        }
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(Resolved {
        sim: cfg,
        set,
        harness,
    })
}

fn parse_harness<T: std::str::FromStr>(r: &Resolved, key: &str, default: T) -> CliResult<T> {
    match r.harness_value(key) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(Error::config(key, format!("cannot parse `{v}`")))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, text: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                CliError::Config(Error::config(key, format!("cannot parse `{}`", s.trim())))
            })
        })
        .collect()
}

fn harness_flags(h: &HarnessArgs) -> Vec<(&'static str, Option<&String>)> {
    vec![
        ("R", h.replicates.as_ref()),
        ("jobs", h.jobs.as_ref()),
        ("permutations", h.permutations.as_ref()),
    ]
}

fn preamble(command: &str, lines: &str) -> String {
    let mut out = format!("# ideaevo {} {command}\n", env!("CARGO_PKG_VERSION"));
    for l in lines.lines() {
        let _ = writeln!(out, "# {l}");
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let resolved = resolve(&args.sim, &[])?;
    let cfg = &resolved.sim;
    let result = ideaevo::run(cfg).map_err(classify)?;
    let m = result.metrics;
    let row = RawRow {
        nu: cfg.heterogeneity,
        beta: cfg.bias,
        group: cfg.group,
        replicate: 0,
        seed: cfg.master_seed,
        decision_true_utility: m.decision_true_utility,
        convergence: m.convergence,
        entropy_bits: m.entropy_bits,
        distinct_types: m.distinct_types,
        population_size: m.population_size,
        events: result.log.events.len(),
        skipped_events: result.skipped_events(),
    };
    let kv = cfg.to_kv();
    let head = preamble("run", &kv);
    ensure_dir(&args.out)?;
    write(&args.out, "config.txt", &kv)?;
    write(
        &args.out,
        "metrics.csv",
        &format!("{head}{}", raw_csv(&[row])),
    )?;
    write(
        &args.out,
        "events.log",
        &format!("{head}{}", result.log.to_text()),
    )?;
    println!(
        "decision_true_utility={} convergence={} events={}",
        sig17(m.decision_true_utility),
        sig17(m.convergence),
        result.log.events.len()
    );
    Ok(())
}

fn sweep_spec(args: &SweepArgs) -> CliResult<(SweepSpec, usize, String)> {
    let mut flags = harness_flags(&args.harness);
    flags.push(("nu_values", args.nu_values.as_ref()));
    flags.push(("beta_values", args.beta_values.as_ref()));
    let r = resolve(&args.sim, &flags)?;
    let defaults = SweepSpec::default();
    let nu_values = match r.harness_value("nu_values") {
        Some(v) => parse_list("nu_values", v)?,
        None => defaults.nu_values,
    };
    let beta_values = match r.harness_value("beta_values") {
        Some(v) => parse_list("beta_values", v)?,
        None => defaults.beta_values,
    };
    let spec = SweepSpec {
        nu_values,
        beta_values,
        replicates: parse_harness(&r, "R", harness::DEFAULT_REPLICATES)?,
        master_seed: r.sim.master_seed,
        jobs: parse_harness(&r, "jobs", 0)?,
        base: r.sim.clone(),
    };
    let permutations = parse_harness(&r, "permutations", harness::DEFAULT_PERMUTATIONS)?;
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut kv = r.sim.to_kv();
    let _ = writeln!(kv, "R={}", spec.replicates);
    let _ = writeln!(kv, "nu_values={}", list(&spec.nu_values));
    let _ = writeln!(kv, "beta_values={}", list(&spec.beta_values));
    let _ = writeln!(kv, "permutations={permutations}");
    Ok((spec, permutations, kv))
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let (spec, permutations, kv) = sweep_spec(args)?;
    let out = run_sweep(&spec).map_err(classify)?;
    let report = trend_tests(&out.rows, permutations, spec.master_seed).map_err(classify)?;
    let head = preamble("sweep", &kv);
    ensure_dir(&args.out)?;
    write(&args.out, "config.txt", &kv)?;
    write(
        &args.out,
        "raw.csv",
        &format!("{head}{}", raw_csv(&out.rows)),
    )?;
    write(
        &args.out,
        "summary.csv",
        &format!("{head}{}", summary_csv(&out.summaries)),
    )?;
    write(
        &args.out,
        "trends.csv",
        &format!("{head}{}", report.to_text()),
    )?;
    println!("{} cells, {} runs", out.summaries.len(), out.rows.len());
    Ok(())
}

pub fn cmd_groups(args: &GroupsArgs) -> CliResult<()> {
    let mut flags = harness_flags(&args.harness);
    flags.push(("groups", args.groups.as_ref()));
    let r = resolve(&args.sim, &flags)?;
    let groups: Vec<GroupPreset> = match r.harness_value("groups") {
        Some(v) => parse_list("groups", v)?,
        None => GroupPreset::ALL.to_vec(),
    };
    let spec = GroupSpec {
        groups,
        replicates: parse_harness(&r, "R", harness::DEFAULT_REPLICATES)?,
        heterogeneity: r.set.contains("nu").then_some(r.sim.heterogeneity),
        master_seed: r.sim.master_seed,
        jobs: parse_harness(&r, "jobs", 0)?,
        base: r.sim.clone(),
    };
    let permutations = parse_harness(&r, "permutations", harness::DEFAULT_PERMUTATIONS)?;
    let out = run_group_comparison(&spec).map_err(classify)?;

    let mut kv = SimulationConfig {
        heterogeneity: spec.heterogeneity.unwrap_or(0.0),
        ..r.sim.clone()
    }
    .to_kv();
    let names: Vec<&str> = spec.groups.iter().map(|g| g.label()).collect();
    let _ = writeln!(kv, "R={}", spec.replicates);
    let _ = writeln!(kv, "groups={}", names.join(","));
    let _ = writeln!(kv, "permutations={permutations}");

    let utilities = |g: GroupPreset| -> Vec<f64> {
        out.rows
            .iter()
            .filter(|row| row.group == g)
            .map(|row| row.decision_true_utility)
            .collect()
    };
    let mut comparison =
        String::from("group,mean_utility,difference_vs_G0,p_G0_greater,p_two_sided\n");
    if spec.groups.contains(&GroupPreset::G0) {
        let g0 = utilities(GroupPreset::G0);
        for (i, s) in out.summaries.iter().enumerate() {
            if s.group == GroupPreset::G0 {
                continue;
            }
            let mut rng = seed::stream(spec.master_seed, role::TREND, i as u64);
            let t =
                mean_difference_permutation_test(&g0, &utilities(s.group), permutations, &mut rng);
            let _ = writeln!(
                comparison,
                "{},{},{},{},{}",
                s.group,
                sig17(s.mean_utility),
                sig17(t.difference),
                sig17(t.p_greater),
                sig17(t.p_two_sided)
            );
        }
    }

    let head = preamble("groups", &kv);
    ensure_dir(&args.out)?;
    write(&args.out, "config.txt", &kv)?;
    write(
        &args.out,
        "raw.csv",
        &format!("{head}{}", raw_csv(&out.rows)),
    )?;
    write(
        &args.out,
        "summary.csv",
        &format!("{head}{}", summary_csv(&out.summaries)),
    )?;
    write(&args.out, "comparison.csv", &format!("{head}{comparison}"))?;
    println!("{} groups, {} runs", out.summaries.len(), out.rows.len());
    Ok(())
}

pub fn cmd_oracle(args: &OracleArgs) -> CliResult<()> {
    let r = resolve(&args.sim, &[])?;
    let state = init_simulation(&r.sim).map_err(classify)?;
    let landscape = if args.master {
        &state.master
    } else {
        &state.truth
    };
    let table = landscape.enumerate(args.cap).map_err(classify)?;
    let mut kv = r.sim.to_kv();
    let _ = writeln!(
        kv,
        "landscape={}",
        if args.master { "master" } else { "true" }
    );
    let head = preamble("oracle", &kv);

    let mut dump = String::from("encoding,value\n");
    for (e, v) in table.values.iter().enumerate() {
        let _ = writeln!(dump, "{e},{}", sig17(*v));
    }
    let optimum = format!(
        "argmax={}\nargmax_value={}\nargmin={}\nargmin_value={}\n",
        table.argmax.0,
        sig17(table.values[table.argmax.0 as usize]),
        table.argmin.0,
        sig17(table.values[table.argmin.0 as usize]),
    );
    ensure_dir(&args.out)?;
    write(
        &args.out,
        "landscape.txt",
        &format!("{head}{}", landscape.to_text()),
    )?;
    write(&args.out, "enumeration.csv", &format!("{head}{dump}"))?;
    write(&args.out, "optimum.txt", &format!("{head}{optimum}"))?;
    print!("{optimum}");
    Ok(())
}

pub fn cmd_genealogy(args: &GenealogyArgs) -> CliResult<()> {
    let text = read(&args.log)?;
    let log = EventLog::parse(&text).map_err(CliError::Runtime)?;
    let dag = build_genealogy(&log).map_err(CliError::Runtime)?;
    let s = dag.stats();
    // Carry the log's provenance comments forward.
    let provenance: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with('#') && !l.starts_with("# initial="))
        .map(|l| l.trim_start_matches('#').trim_start())
        .collect();
    let mut kv = provenance.join("\n");
    if !kv.is_empty() {
        kv.push('\n');
    }
    let _ = writeln!(kv, "log={}", args.log.display());

    let stats = format!(
        "roots={}\nnodes={}\nedges={}\nbranching_ratio={}\nmax_depth={}\n",
        s.roots,
        s.nodes,
        s.edges,
        sig17(s.branching_ratio),
        s.max_depth
    );
    let dot_head: String = kv.lines().map(|l| format!("// {l}\n")).collect();
    ensure_dir(&args.out)?;
    write(
        &args.out,
        "genealogy.dot",
        &format!("{dot_head}{}", dag.to_dot()),
    )?;
    write(
        &args.out,
        "genealogy_stats.txt",
        &format!("{}{stats}", preamble("genealogy", &kv)),
    )?;
    print!("{stats}");
    Ok(())
}
