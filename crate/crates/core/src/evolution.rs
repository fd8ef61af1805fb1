//! The idea population and the six operators agents apply to it.
//!
//! Operators act on single instances, never on the equivalence class of an
//! encoding, so an idea held in many copies is proportionally more likely to
//! be sampled by the preferential search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::landscape::{flip_mask, random_idea, Idea, IndividualUtility, UtilityLandscape};

pub type InstanceId = u64;

/// Anything an agent can rank ideas with.
pub trait Utility {
    fn utility(&self, idea: Idea) -> f64;
}

impl Utility for IndividualUtility {
    fn utility(&self, idea: Idea) -> f64 {
        self.eval_unchecked(idea)
    }
}

impl Utility for UtilityLandscape {
    fn utility(&self, idea: Idea) -> f64 {
        self.eval_unchecked(idea)
    }
}

impl<F: Fn(Idea) -> f64> Utility for F {
    fn utility(&self, idea: Idea) -> f64 {
        self(idea)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub id: InstanceId,
    pub idea: Idea,
}

/// Multiset of idea instances. Ids are handed out in increasing order and never reused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    dims: u32,
    instances: Vec<Instance>,
    next_id: InstanceId,
}

impl Population {
    /// Seed a population; the initial instances get ids `0..ideas.len()`.
    pub fn new(dims: u32, ideas: impl IntoIterator<Item = Idea>) -> Self {
        let mut pop = Self {
            dims,
            instances: Vec::new(),
            next_id: 0,
        };
        for idea in ideas {
            pop.push(idea);
        }
        pop
    }

    pub fn dims(&self) -> u32 {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, index: usize) -> &Instance {
        &self.instances[index]
    }

    pub fn next_id(&self) -> InstanceId {
        self.next_id
    }

    pub fn push(&mut self, idea: Idea) -> InstanceId {
        let id = self.next_id;
        self.next_id += 1;
        self.instances.push(Instance { id, idea });
        id
    }

    pub fn remove_at(&mut self, index: usize) -> Instance {
        self.instances.remove(index)
    }

    /// Copy count per encoding.
    pub fn counts(&self) -> BTreeMap<Idea, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.idea).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorKind {
    Replication,
    RandomPointMutation,
    IntelligentPointMutation,
    Recombination,
    SubtractiveSelection,
    RandomGeneration,
}

impl OperatorKind {
    /// Canonical order; operator weight vectors are indexed by it.
    pub const ALL: [OperatorKind; 6] = [
        OperatorKind::Replication,
        OperatorKind::RandomPointMutation,
        OperatorKind::IntelligentPointMutation,
        OperatorKind::Recombination,
        OperatorKind::SubtractiveSelection,
        OperatorKind::RandomGeneration,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Replication => "replication",
            OperatorKind::RandomPointMutation => "random_point_mutation",
            OperatorKind::IntelligentPointMutation => "intelligent_point_mutation",
            OperatorKind::Recombination => "recombination",
            OperatorKind::SubtractiveSelection => "subtractive_selection",
            OperatorKind::RandomGeneration => "random_generation",
        }
    }

    /// Whether a successful application adds an instance.
    pub fn adds(self) -> bool {
        self != OperatorKind::SubtractiveSelection
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown operator `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    /// Instances drawn by each preferential search (`r_p`).
    pub sample_size: usize,
    /// Per-bit flip probability of point mutation (`p_m`).
    pub mutation_rate: f64,
    /// Offspring generated by intelligent point mutation (`r_m`).
    pub mutation_offspring: usize,
    /// Per-aspect swap probability of crossover (`p_s`).
    pub swap_rate: f64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            sample_size: 5,
            mutation_rate: 0.1,
            mutation_offspring: 5,
            swap_rate: 0.5,
        }
    }
}

impl OperatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 1 {
            return Err(Error::config("rp", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("pm", "must lie in [0, 1]"));
        }
        if self.mutation_offspring < 1 {
            return Err(Error::config("rm", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.swap_rate) {
            return Err(Error::config("ps", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Best,
    Worst,
}

/// Result of one operator application, before it is stamped with step and actor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub operator: OperatorKind,
    pub parents: Vec<InstanceId>,
    pub child: Option<Instance>,
    pub removed: Option<InstanceId>,
    pub skipped: bool,
}

impl Outcome {
    fn created(operator: OperatorKind, parents: Vec<InstanceId>, child: Instance) -> Self {
        Self {
            operator,
            parents,
            child: Some(child),
            removed: None,
            skipped: false,
        }
    }
}

/// Pick among the candidates with the extreme utility; ties are broken uniformly.
fn rank_extreme<U, R, I>(candidates: I, u: &U, direction: Direction, rng: &mut R) -> usize
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
    I: IntoIterator<Item = (usize, Idea)>,
{
    let mut tied: Vec<usize> = Vec::new();
    let mut extreme = 0.0;
    for (slot, idea) in candidates {
        let value = u.utility(idea);
        let better = match direction {
            Direction::Best => value > extreme,
            Direction::Worst => value < extreme,
        };
        if tied.is_empty() || better {
            tied.clear();
            tied.push(slot);
            extreme = value;
        } else if value == extreme {
            tied.push(slot);
        }
    }
    match tied.len() {
        0 => unreachable!("rank_extreme called without candidates"),
        1 => tied[0],
        n => tied[rng.gen_range(0..n)],
    }
}

fn pick_excluding<U, R>(
    pop: &Population,
    u: &U,
    sample_size: usize,
    direction: Direction,
    exclude: Option<usize>,
    rng: &mut R,
) -> usize
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    let pool = pop.len() - usize::from(exclude.is_some());
    debug_assert!(pool > 0);
    let amount = sample_size.clamp(1, pool);
    let drawn = index::sample(rng, pool, amount);
    let candidates: Vec<(usize, Idea)> = drawn
        .iter()
        .map(|s| match exclude {
            Some(x) if s >= x => s + 1,
            _ => s,
        })
        .map(|i| (i, pop.instances[i].idea))
        .collect();
    rank_extreme(candidates, u, direction, rng)
}

/// Preferential search: sample `min(sample_size, len)` distinct instances and
/// return the index of the best (or worst) one under `u`.
pub fn preferential_pick<U, R>(
    pop: &Population,
    u: &U,
    sample_size: usize,
    direction: Direction,
    rng: &mut R,
) -> Result<usize>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    Ok(pick_excluding(pop, u, sample_size, direction, None, rng))
}

fn best_of<U, R>(ideas: &[Idea], u: &U, rng: &mut R) -> Idea
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    let slot = rank_extreme(ideas.iter().copied().enumerate(), u, Direction::Best, rng);
    ideas[slot]
}

pub fn op_replicate<U, R>(
    pop: &mut Population,
    u: &U,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Outcome>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    let parent = *pop.get(preferential_pick(
        pop,
        u,
        params.sample_size,
        Direction::Best,
        rng,
    )?);
    let id = pop.push(parent.idea);
    Ok(Outcome::created(
        OperatorKind::Replication,
        vec![parent.id],
        Instance {
            id,
            idea: parent.idea,
        },
    ))
}

pub fn op_mutate_random<U, R>(
    pop: &mut Population,
    u: &U,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Outcome>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    let parent = *pop.get(preferential_pick(
        pop,
        u,
        params.sample_size,
        Direction::Best,
        rng,
    )?);
    let idea = parent.idea.mutate(pop.dims, params.mutation_rate, rng);
    let id = pop.push(idea);
    Ok(Outcome::created(
        OperatorKind::RandomPointMutation,
        vec![parent.id],
        Instance { id, idea },
    ))
}

/// Mutate the preferred parent `r_m` times and keep the offspring the agent likes
/// best. The parent itself is not a candidate.
pub fn op_mutate_intelligent<U, R>(
    pop: &mut Population,
    u: &U,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Outcome>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    let parent = *pop.get(preferential_pick(
        pop,
        u,
        params.sample_size,
        Direction::Best,
        rng,
    )?);
    let offspring: Vec<Idea> = (0..params.mutation_offspring.max(1))
        .map(|_| parent.idea.mutate(pop.dims, params.mutation_rate, rng))
        .collect();
    let idea = best_of(&offspring, u, rng);
    let id = pop.push(idea);
    Ok(Outcome::created(
        OperatorKind::IntelligentPointMutation,
        vec![parent.id],
        Instance { id, idea },
    ))
}

/// Uniform crossover of two ideas; returns the two complementary offspring.
pub fn crossover(first: Idea, second: Idea, mask: u64) -> (Idea, Idea) {
    (
        Idea((first.0 & !mask) | (second.0 & mask)),
        Idea((second.0 & !mask) | (first.0 & mask)),
    )
}

/// One parent uniformly at random, the other by preferential search over the
/// remaining instances; the better of the two crossover offspring is kept.
/// With a single instance this degrades to replicating it.
pub fn op_recombine<U, R>(
    pop: &mut Population,
    u: &U,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Outcome>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    match pop.len() {
        0 => return Err(Error::EmptyPopulation),
        1 => {
            let sole = *pop.get(0);
            let id = pop.push(sole.idea);
            return Ok(Outcome::created(
                OperatorKind::Recombination,
                vec![sole.id],
                Instance {
                    id,
                    idea: sole.idea,
                },
            ));
        }
        _ => {}
    }
    let first_idx = rng.gen_range(0..pop.len());
    let second_idx = pick_excluding(
        pop,
        u,
        params.sample_size,
        Direction::Best,
        Some(first_idx),
        rng,
    );
    let first = *pop.get(first_idx);
    let second = *pop.get(second_idx);
    let mask = flip_mask(pop.dims, params.swap_rate, rng);
    let (a, b) = crossover(first.idea, second.idea, mask);
    let idea = if a == b { a } else { best_of(&[a, b], u, rng) };
    let id = pop.push(idea);
    Ok(Outcome::created(
        OperatorKind::Recombination,
        vec![first.id, second.id],
        Instance { id, idea },
    ))
}

/// Remove the worst instance found by preferential search. A population of
/// one is left alone and the outcome is marked skipped.
pub fn op_subtract<U, R>(
    pop: &mut Population,
    u: &U,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Outcome>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let (removed, skipped) = if pop.len() >= 2 {
        let idx = preferential_pick(pop, u, params.sample_size, Direction::Worst, rng)?;
        (Some(pop.remove_at(idx).id), false)
    } else {
        (None, true)
    };
    Ok(Outcome {
        operator: OperatorKind::SubtractiveSelection,
        parents: Vec::new(),
        child: None,
        removed,
        skipped,
    })
}

pub fn op_generate_random<R>(pop: &mut Population, rng: &mut R) -> Outcome
where
    R: Rng + ?Sized,
{
    let idea = random_idea(pop.dims, rng);
    let id = pop.push(idea);
    Outcome::created(
        OperatorKind::RandomGeneration,
        Vec::new(),
        Instance { id, idea },
    )
}

/// Dispatch one operator.
pub fn apply<U, R>(
    kind: OperatorKind,
    pop: &mut Population,
    u: &U,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Outcome>
where
    U: Utility + ?Sized,
    R: Rng + ?Sized,
{
    match kind {
        OperatorKind::Replication => op_replicate(pop, u, params, rng),
        OperatorKind::RandomPointMutation => op_mutate_random(pop, u, params, rng),
        OperatorKind::IntelligentPointMutation => op_mutate_intelligent(pop, u, params, rng),
        OperatorKind::Recombination => op_recombine(pop, u, params, rng),
        OperatorKind::SubtractiveSelection => op_subtract(pop, u, params, rng),
        OperatorKind::RandomGeneration => Ok(op_generate_random(pop, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    const A: Idea = Idea(0b1010);
    const B: Idea = Idea(0b0101);

    fn ab_utility(idea: Idea) -> f64 {
        match idea {
            A => 0.9,
            B => 0.1,
            _ => 0.5,
        }
    }

    fn params(sample_size: usize) -> OperatorParams {
        OperatorParams {
            sample_size,
            ..OperatorParams::default()
        }
    }

    #[test]
    fn operator_names_round_trip() {
        for k in OperatorKind::ALL {
            assert_eq!(k.name().parse::<OperatorKind>().unwrap(), k);
            assert_eq!(OperatorKind::ALL[k.index()], k);
        }
        assert!("crossover".parse::<OperatorKind>().is_err());
    }

    #[test]
    fn pick_on_empty_population_fails() {
        let pop = Population::new(4, []);
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(
            preferential_pick(&pop, &ab_utility, 3, Direction::Best, &mut rng),
            Err(Error::EmptyPopulation)
        );
    }

    #[test]
    fn exhaustive_pick_finds_extremes() {
        let pop = Population::new(4, [B, Idea(3), A, Idea(7)]);
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..50 {
            let best = preferential_pick(&pop, &ab_utility, 10, Direction::Best, &mut rng).unwrap();
            let worst =
                preferential_pick(&pop, &ab_utility, 4, Direction::Worst, &mut rng).unwrap();
            assert_eq!(pop.get(best).idea, A);
            assert_eq!(pop.get(worst).idea, B);
        }
    }

    #[test]
    fn ties_are_broken_across_instances() {
        let pop = Population::new(4, [A, A, A]);
        let mut rng = SimRng::seed_from_u64(2);
        let mut seen = [0usize; 3];
        for _ in 0..3_000 {
            seen[preferential_pick(&pop, &ab_utility, 3, Direction::Best, &mut rng).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800), "{seen:?}");
    }

    #[test]
    fn replicate_singleton() {
        let mut pop = Population::new(4, [A]);
        let mut rng = SimRng::seed_from_u64(3);
        let out = op_replicate(&mut pop, &ab_utility, &params(5), &mut rng).unwrap();
        assert_eq!(
            pop.instances().iter().map(|i| i.idea).collect::<Vec<_>>(),
            vec![A, A]
        );
        assert_eq!(out.parents, vec![0]);
        assert_eq!(out.child, Some(Instance { id: 1, idea: A }));
    }

    #[test]
    fn replicate_prefers_better_idea_when_exhaustive() {
        let mut pop = Population::new(4, [A, B]);
        let mut rng = SimRng::seed_from_u64(4);
        let before = pop.counts();
        op_replicate(&mut pop, &ab_utility, &params(2), &mut rng).unwrap();
        let after = pop.counts();
        assert_eq!(after[&A], before[&A] + 1);
        assert_eq!(after[&B], before[&B]);
    }

    #[test]
    fn mutation_rate_extremes() {
        let mut rng = SimRng::seed_from_u64(5);
        let mut pop = Population::new(4, [A]);
        let zero = OperatorParams {
            mutation_rate: 0.0,
            ..params(1)
        };
        let out = op_mutate_random(&mut pop, &ab_utility, &zero, &mut rng).unwrap();
        assert_eq!(out.child.unwrap().idea, A);
        let one = OperatorParams {
            mutation_rate: 1.0,
            ..params(1)
        };
        let mut pop = Population::new(4, [A]);
        let out = op_mutate_random(&mut pop, &ab_utility, &one, &mut rng).unwrap();
        assert_eq!(out.child.unwrap().idea, Idea(!A.0 & 0b1111));
    }

    #[test]
    fn intelligent_mutation_without_flips_copies_parent() {
        let mut rng = SimRng::seed_from_u64(6);
        let mut pop = Population::new(4, [A, B]);
        let p = OperatorParams {
            mutation_rate: 0.0,
            mutation_offspring: 7,
            ..params(2)
        };
        let out = op_mutate_intelligent(&mut pop, &ab_utility, &p, &mut rng).unwrap();
        assert_eq!(out.child.unwrap().idea, A);
        assert_eq!(out.parents, vec![0]);
    }

    #[test]
    fn intelligent_mutation_with_one_offspring_matches_random_mutation() {
        let p = OperatorParams {
            mutation_offspring: 1,
            mutation_rate: 0.3,
            ..params(3)
        };
        let u = |i: Idea| f64::from(i.0.count_ones()) / 8.0;
        for seed in 0..50 {
            let start = Population::new(8, (0..6).map(|e| Idea(e * 37 % 256)));
            let mut pa = start.clone();
            let mut pb = start.clone();
            let a =
                op_mutate_intelligent(&mut pa, &u, &p, &mut SimRng::seed_from_u64(seed)).unwrap();
            let b = op_mutate_random(&mut pb, &u, &p, &mut SimRng::seed_from_u64(seed)).unwrap();
            assert_eq!(a.child, b.child);
            assert_eq!(a.parents, b.parents);
        }
    }

    #[test]
    fn crossover_extremes() {
        assert_eq!(crossover(A, B, 0), (A, B));
        assert_eq!(crossover(A, B, 0b1111), (B, A));
        assert_eq!(crossover(A, A, 0b0110), (A, A));
    }

    #[test]
    fn recombination_without_swaps_keeps_better_parent() {
        let p = OperatorParams {
            swap_rate: 0.0,
            ..params(5)
        };
        let mut rng = SimRng::seed_from_u64(7);
        for _ in 0..20 {
            let mut pop = Population::new(4, [A, B]);
            let out = op_recombine(&mut pop, &ab_utility, &p, &mut rng).unwrap();
            assert_eq!(out.parents.len(), 2);
            assert_ne!(out.parents[0], out.parents[1]);
            assert_eq!(out.child.unwrap().idea, A);
        }
    }

    #[test]
    fn recombination_of_equal_parents_copies_them() {
        let mut rng = SimRng::seed_from_u64(8);
        let mut pop = Population::new(4, [B, B]);
        let out = op_recombine(&mut pop, &ab_utility, &params(5), &mut rng).unwrap();
        assert_eq!(out.child.unwrap().idea, B);
    }

    #[test]
    fn recombination_on_singleton_degrades_to_replication() {
        let mut rng = SimRng::seed_from_u64(9);
        let mut pop = Population::new(4, [B]);
        let out = op_recombine(&mut pop, &ab_utility, &params(5), &mut rng).unwrap();
        assert_eq!(out.operator, OperatorKind::Recombination);
        assert_eq!(out.parents, vec![0]);
        assert_eq!(out.child, Some(Instance { id: 1, idea: B }));
    }

    #[test]
    fn subtract_removes_worst_and_guards_singleton() {
        let mut rng = SimRng::seed_from_u64(10);
        let mut pop = Population::new(4, [A, B]);
        let out = op_subtract(&mut pop, &ab_utility, &params(2), &mut rng).unwrap();
        assert_eq!(out.removed, Some(1));
        assert!(!out.skipped);
        assert_eq!(pop.instances(), &[Instance { id: 0, idea: A }]);

        let out = op_subtract(&mut pop, &ab_utility, &params(2), &mut rng).unwrap();
        assert!(out.skipped);
        assert_eq!(out.removed, None);
        assert_eq!(pop.len(), 1);
    }

    #[test]
    fn random_generation_appends_parentless_idea() {
        let mut rng = SimRng::seed_from_u64(11);
        let mut pop = Population::new(3, [Idea(1)]);
        let out = op_generate_random(&mut pop, &mut rng);
        assert!(out.parents.is_empty());
        assert_eq!(pop.len(), 2);
        assert!(out.child.unwrap().idea.fits(3));
    }

    #[test]
    fn ids_are_never_reused() {
        let mut rng = SimRng::seed_from_u64(12);
        let mut pop = Population::new(4, [A, B, A]);
        let u = ab_utility;
        let mut issued = std::collections::HashSet::new();
        for i in pop.instances() {
            issued.insert(i.id);
        }
        for step in 0..500 {
            let kind = OperatorKind::ALL[step % 6];
            let out = apply(kind, &mut pop, &u, &params(3), &mut rng).unwrap();
            if let Some(c) = out.child {
                assert!(issued.insert(c.id), "id {} reused", c.id);
                assert!(c.idea.fits(4));
            }
        }
    }
}
