//! Agents, behavioural presets and the run loop.
//!
//! `N` agents share one idea population. In every iteration each agent, always
//! in the same order, draws an operator from its own frequency profile and
//! applies it once, so a run consists of exactly `N * T` events.
//!
//! Sub-seeds come from [`crate::seed::derive_seed`] over `(master_seed, role, index)`:
//! the true landscape, the bias step, each agent's utility key, the initial
//! population and the run dynamics each get their own stream.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::error::{Error, Result};
use crate::evolution::{apply, Instance, OperatorKind, OperatorParams, Population};
use crate::genealogy::{EventLog, EvolutionaryEvent};
use crate::landscape::{
    apply_bias, generate_true_landscape, make_individual_utility, random_idea, space_size,
    IndividualUtility, UtilityLandscape, MAX_DIMS,
};
use crate::metrics::{outcome_metrics, OutcomeMetrics};
use crate::seed::{self, role, SimRng};

/// Relative operator frequencies, indexed by [`OperatorKind::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorWeights(pub [f64; 6]);

impl OperatorWeights {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config("weights", "weights must be non-negative"));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "weights",
                format!("weights sum to {sum}, not 1"),
            ));
        }
        Ok(())
    }

    pub fn get(&self, kind: OperatorKind) -> f64 {
        self.0[kind.index()]
    }
}

/// The eight behavioural presets shared by all members of a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupPreset {
    G0,
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
    G7,
}

impl GroupPreset {
    pub const ALL: [GroupPreset; 8] = [
        GroupPreset::G0,
        GroupPreset::G1,
        GroupPreset::G2,
        GroupPreset::G3,
        GroupPreset::G4,
        GroupPreset::G5,
        GroupPreset::G6,
        GroupPreset::G7,
    ];

    /// Operators the preset favours; empty for the balanced group.
    pub fn designated(self) -> &'static [OperatorKind] {
        use OperatorKind::*;
        match self {
            GroupPreset::G0 => &[],
            GroupPreset::G1 => &[Replication, SubtractiveSelection],
            GroupPreset::G2 => &[SubtractiveSelection, RandomPointMutation],
            GroupPreset::G3 => &[Replication, Recombination],
            GroupPreset::G4 => &[Recombination],
            GroupPreset::G5 => &[Recombination, IntelligentPointMutation],
            GroupPreset::G6 => &[IntelligentPointMutation, RandomGeneration],
            GroupPreset::G7 => &[RandomGeneration],
        }
    }

    /// Balanced: 1/6 each. One favoured operator: 0.95 and 0.01 for the rest.
    /// Two favoured: 0.48 each and 0.01 for the rest.
    pub fn weights(self) -> OperatorWeights {
        let designated = self.designated();
        let favoured = match designated.len() {
            0 => return OperatorWeights([1.0 / 6.0; 6]),
            1 => 0.95,
            _ => 0.48,
        };
        let mut w = [0.01; 6];
        for k in designated {
            w[k.index()] = favoured;
        }
        OperatorWeights(w)
    }

    pub fn label(self) -> &'static str {
        match self {
            GroupPreset::G0 => "G0",
            GroupPreset::G1 => "G1",
            GroupPreset::G2 => "G2",
            GroupPreset::G3 => "G3",
            GroupPreset::G4 => "G4",
            GroupPreset::G5 => "G5",
            GroupPreset::G6 => "G6",
            GroupPreset::G7 => "G7",
        }
    }
}

impl fmt::Display for GroupPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GroupPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GroupPreset::ALL
            .into_iter()
            .find(|g| g.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownGroup(s.to_string()))
    }
}

pub fn preset_profiles(label: &str) -> Result<OperatorWeights> {
    label.parse::<GroupPreset>().map(GroupPreset::weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentProfile {
    pub weights: OperatorWeights,
    pub agent_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Aspects of the problem (`M`).
    pub dims: u32,
    /// Representative ideas (`n`).
    pub representatives: usize,
    /// Agents (`N`).
    pub agents: usize,
    /// Initial ideas (`k`).
    pub initial_ideas: usize,
    /// Full rotations (`T`).
    pub iterations: usize,
    /// Within-group heterogeneity (`nu`).
    pub heterogeneity: f64,
    /// Group-level bias (`beta`).
    pub bias: f64,
    pub params: OperatorParams,
    pub group: GroupPreset,
    pub master_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dims: 10,
            representatives: 20,
            agents: 4,
            initial_ideas: 10,
            iterations: 50,
            heterogeneity: 0.0,
            bias: 0.0,
            params: OperatorParams::default(),
            group: GroupPreset::G0,
            master_seed: 0,
        }
    }
}

/// Keys accepted in `key=value` config files, in rendering order.
pub const CONFIG_KEYS: [&str; 13] = [
    "M", "n", "N", "k", "T", "nu", "beta", "rp", "pm", "rm", "ps", "group", "seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", value.trim())))
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIMS).contains(&self.dims) {
            return Err(Error::config("M", format!("must lie in 1..={MAX_DIMS}")));
        }
        if self.representatives < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        if (self.representatives as u128) > u128::from(space_size(self.dims)) {
            return Err(Error::config(
                "n",
                format!(
                    "{} exceeds 2^M = {}",
                    self.representatives,
                    space_size(self.dims)
                ),
            ));
        }
        if self.agents < 1 {
            return Err(Error::config("N", "must be at least 1"));
        }
        if self.initial_ideas < 1 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(self.heterogeneity.is_finite() && self.heterogeneity >= 0.0) {
            return Err(Error::config("nu", "must be a non-negative number"));
        }
        if !(self.bias.is_finite() && self.bias >= 0.0) {
            return Err(Error::config("beta", "must be a non-negative number"));
        }
        self.params.validate()
    }

    /// Set one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "M" => self.dims = parse_value(key, value)?,
            "n" => self.representatives = parse_value(key, value)?,
            "N" => self.agents = parse_value(key, value)?,
            "k" => self.initial_ideas = parse_value(key, value)?,
            "T" => self.iterations = parse_value(key, value)?,
            "nu" => self.heterogeneity = parse_value(key, value)?,
            "beta" => self.bias = parse_value(key, value)?,
            "rp" => self.params.sample_size = parse_value(key, value)?,
            "pm" => self.params.mutation_rate = parse_value(key, value)?,
            "rm" => self.params.mutation_offspring = parse_value(key, value)?,
            "ps" => self.params.swap_rate = parse_value(key, value)?,
            "group" => {
                self.group = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("unknown preset `{}`", value.trim())))?
            }
            "seed" => self.master_seed = parse_value(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "M" => self.dims.to_string(),
            "n" => self.representatives.to_string(),
            "N" => self.agents.to_string(),
            "k" => self.initial_ideas.to_string(),
            "T" => self.iterations.to_string(),
            "nu" => self.heterogeneity.to_string(),
            "beta" => self.bias.to_string(),
            "rp" => self.params.sample_size.to_string(),
            "pm" => self.params.mutation_rate.to_string(),
            "rm" => self.params.mutation_offspring.to_string(),
            "ps" => self.params.swap_rate.to_string(),
            "group" => self.group.to_string(),
            "seed" => self.master_seed.to_string(),
            _ => return None,
        })
    }

    /// Resolved configuration, one `key=value` per line in [`CONFIG_KEYS`] order.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("known key"));
        }
        out
    }
}

/// Parse `key=value` lines. Blank lines and `#` comments are skipped. The
/// callback sees `(line number, key, value)`.
pub fn parse_kv_lines(
    text: &str,
    mut each: impl FnMut(usize, &str, &str) -> Result<()>,
) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(line, format!("line {}: expected `key=value`", i + 1)))?;
        each(i + 1, key.trim(), value.trim())?;
    }
    Ok(())
}

impl FromStr for SimulationConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = SimulationConfig::default();
        parse_kv_lines(text, |_, k, v| cfg.set(k, v))?;
        Ok(cfg)
    }
}

pub struct Agent {
    pub profile: AgentProfile,
    pub utility: IndividualUtility,
    chooser: WeightedIndex<f64>,
}

impl Agent {
    fn new(profile: AgentProfile, utility: IndividualUtility) -> Result<Self> {
        profile.weights.validate()?;
        let chooser = WeightedIndex::new(profile.weights.0)
            .map_err(|e| Error::config("weights", e.to_string()))?;
        Ok(Self {
            profile,
            utility,
            chooser,
        })
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> OperatorKind {
        OperatorKind::ALL[self.chooser.sample(rng)]
    }
}

pub struct SimulationState {
    pub config: SimulationConfig,
    pub truth: Arc<UtilityLandscape>,
    pub master: Arc<UtilityLandscape>,
    pub agents: Vec<Agent>,
    pub population: Population,
    pub initial: Vec<Instance>,
    rng: SimRng,
}

pub fn init_simulation(cfg: &SimulationConfig) -> Result<SimulationState> {
    cfg.validate()?;
    let seed = cfg.master_seed;
    let truth = generate_true_landscape(
        cfg.dims,
        cfg.representatives,
        &mut seed::stream(seed, role::TRUE_LANDSCAPE, 0),
    )?;
    let master = Arc::new(apply_bias(
        &truth,
        cfg.bias,
        &mut seed::stream(seed, role::BIAS, 0),
    ));
    let weights = cfg.group.weights();
    let agents = (0..cfg.agents)
        .map(|j| {
            let agent_seed = seed::derive_seed(seed, role::AGENT, j as u64);
            Agent::new(
                AgentProfile {
                    weights,
                    agent_seed,
                },
                make_individual_utility(master.clone(), cfg.heterogeneity, agent_seed),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut init_rng = seed::stream(seed, role::INITIAL_POPULATION, 0);
    let population = Population::new(
        cfg.dims,
        (0..cfg.initial_ideas).map(|_| random_idea(cfg.dims, &mut init_rng)),
    );
    Ok(SimulationState {
        config: cfg.clone(),
        truth: Arc::new(truth),
        master,
        agents,
        initial: population.instances().to_vec(),
        population,
        rng: seed::stream(seed, role::DYNAMICS, 0),
    })
}

impl SimulationState {
    /// One full rotation; every agent acts once, in order.
    fn rotate(&mut self, iteration: u64, log: &mut Vec<EvolutionaryEvent>) -> Result<()> {
        for (j, agent) in self.agents.iter().enumerate() {
            let kind = agent.choose(&mut self.rng);
            let outcome = apply(
                kind,
                &mut self.population,
                &agent.utility,
                &self.config.params,
                &mut self.rng,
            )?;
            let step = log.len() as u64 + 1;
            log.push(EvolutionaryEvent::from_outcome(
                outcome,
                step,
                iteration,
                j + 1,
            ));
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<SimulationResult> {
        let total = self.config.agents * self.config.iterations;
        let mut events = Vec::with_capacity(total);
        for t in 1..=self.config.iterations {
            self.rotate(t as u64, &mut events)?;
        }
        let metrics = outcome_metrics(&self.population, &self.truth)?;
        Ok(SimulationResult {
            config: self.config,
            log: EventLog {
                initial: self.initial,
                events,
            },
            final_population: self.population,
            metrics,
            truth: self.truth,
            master: self.master,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub final_population: Population,
    pub log: EventLog,
    pub metrics: OutcomeMetrics,
    pub truth: Arc<UtilityLandscape>,
    pub master: Arc<UtilityLandscape>,
}

impl SimulationResult {
    pub fn skipped_events(&self) -> usize {
        self.log.events.iter().filter(|e| e.skipped).count()
    }
}

pub fn run(cfg: &SimulationConfig) -> Result<SimulationResult> {
    init_simulation(cfg)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Idea;

    fn small() -> SimulationConfig {
        SimulationConfig {
            iterations: 5,
            agents: 3,
            master_seed: 17,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn preset_weights() {
        assert_eq!(preset_profiles("G0").unwrap().0, [1.0 / 6.0; 6]);
        let g4 = preset_profiles("G4").unwrap();
        assert_eq!(g4.get(OperatorKind::Recombination), 0.95);
        assert_eq!(g4.0.iter().filter(|&&w| w == 0.01).count(), 5);
        let g1 = preset_profiles("G1").unwrap();
        assert_eq!(g1.get(OperatorKind::Replication), 0.48);
        assert_eq!(g1.get(OperatorKind::SubtractiveSelection), 0.48);
        assert_eq!(g1.0.iter().filter(|&&w| w == 0.01).count(), 4);
        for g in GroupPreset::ALL {
            g.weights().validate().unwrap();
        }
        assert!(matches!(preset_profiles("G8"), Err(Error::UnknownGroup(_))));
    }

    #[test]
    fn weight_validation() {
        assert!(OperatorWeights([0.5, 0.5, 0.0, 0.0, 0.0, 0.0])
            .validate()
            .is_ok());
        assert!(OperatorWeights([0.5, 0.6, 0.0, 0.0, 0.0, 0.0])
            .validate()
            .is_err());
        assert!(OperatorWeights([1.5, -0.5, 0.0, 0.0, 0.0, 0.0])
            .validate()
            .is_err());
    }

    #[test]
    fn config_kv_round_trip() {
        let cfg = SimulationConfig {
            heterogeneity: 0.6,
            bias: 1.2,
            group: GroupPreset::G5,
            master_seed: 99,
            ..SimulationConfig::default()
        };
        let text = cfg.to_kv();
        assert!(text.starts_with("M=10\nn=20\nN=4\nk=10\nT=50\nnu=0.6\nbeta=1.2\n"));
        assert_eq!(text.parse::<SimulationConfig>().unwrap(), cfg);
    }

    #[test]
    fn config_errors_name_the_key() {
        let err = "M=4\nn=20\n"
            .parse::<SimulationConfig>()
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "n"));
        let err = "pm=lots".parse::<SimulationConfig>().unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "pm"));
        let err = "colour=blue".parse::<SimulationConfig>().unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "colour"));
        let err = SimulationConfig {
            heterogeneity: -0.1,
            ..small()
        }
        .validate()
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "nu"));
    }

    #[test]
    fn homogeneous_unbiased_views_equal_truth() {
        let state = init_simulation(&small()).unwrap();
        assert_eq!(*state.master, *state.truth);
        for agent in &state.agents {
            for e in 0..1024 {
                assert_eq!(
                    agent.utility.eval(Idea(e)).unwrap(),
                    state.truth.eval(Idea(e)).unwrap()
                );
            }
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small();
        let a = init_simulation(&cfg).unwrap();
        let b = init_simulation(&cfg).unwrap();
        assert_eq!(a.population, b.population);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.population.len(), 10);
        let seeds: Vec<_> = a.agents.iter().map(|x| x.profile.agent_seed).collect();
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        assert_eq!(unique.len(), seeds.len());
    }

    #[test]
    fn zero_iterations_leave_population_untouched() {
        let cfg = SimulationConfig {
            iterations: 0,
            ..small()
        };
        let init = init_simulation(&cfg).unwrap();
        let before = init.population.clone();
        let res = init.run_to_end().unwrap();
        assert!(res.log.events.is_empty());
        assert_eq!(res.final_population, before);
    }

    #[test]
    fn schedule_and_accounting() {
        let res = run(&small()).unwrap();
        assert_eq!(res.log.events.len(), 15);
        for (i, e) in res.log.events.iter().enumerate() {
            assert_eq!(e.step, i as u64 + 1);
            assert_eq!(e.agent, i % 3 + 1);
            assert_eq!(e.iteration, (i / 3) as u64 + 1);
        }
        let delta: i64 = res.log.events.iter().map(|e| e.size_delta()).sum();
        assert_eq!(res.final_population.len() as i64, 10 + delta);
    }
}
