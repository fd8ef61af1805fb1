//! Utility landscapes over the `M`-bit idea space.
//!
//! A landscape is defined by `n` representative ideas with anchor values. Every
//! other idea is valued by inverse-squared-Hamming-distance weighting of the
//! anchors, so the surface is smooth around the representatives and always
//! stays inside the anchors' value range.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::seed::keyed_unit;

/// Largest supported aspect count. Encodings are `u64` and `2^M` must fit.
pub const MAX_DIMS: u32 = 63;

/// Default refusal threshold for full enumeration.
pub const DEFAULT_ENUMERATION_CAP: u32 = 20;

/// One idea: bit `i` is the choice made for aspect `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Idea(pub u64);

impl Idea {
    pub fn encoding(self) -> u64 {
        self.0
    }

    pub fn bit(self, aspect: u32) -> bool {
        (self.0 >> aspect) & 1 == 1
    }

    pub fn hamming(self, other: Idea) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// Flip each of the lowest `dims` bits independently with probability `p`.
    pub fn mutate<R: Rng + ?Sized>(self, dims: u32, p: f64, rng: &mut R) -> Idea {
        Idea(self.0 ^ flip_mask(dims, p, rng))
    }

    pub fn fits(self, dims: u32) -> bool {
        self.0 < space_size(dims)
    }
}

/// `2^dims`, the number of distinct ideas.
pub fn space_size(dims: u32) -> u64 {
    1u64 << dims
}

/// A mask over the lowest `dims` bits where each bit is set with probability `p`.
pub fn flip_mask<R: Rng + ?Sized>(dims: u32, p: f64, rng: &mut R) -> u64 {
    let p = p.clamp(0.0, 1.0);
    (0..dims).fold(0u64, |mask, i| {
        if rng.gen_bool(p) {
            mask | (1u64 << i)
        } else {
            mask
        }
    })
}

pub fn random_idea<R: Rng + ?Sized>(dims: u32, rng: &mut R) -> Idea {
    Idea(rng.gen_range(0..space_size(dims)))
}

fn check_dims(dims: u32) -> Result<()> {
    if (1..=MAX_DIMS).contains(&dims) {
        Ok(())
    } else {
        Err(Error::Dimension {
            dims,
            max: MAX_DIMS,
        })
    }
}

/// An anchor of the interpolation: a representative idea and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub idea: Idea,
    pub value: f64,
}

/// The representative ideas of a landscape, all distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    anchors: Vec<Anchor>,
}

impl RepresentativeSet {
    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.anchors
            .iter()
            .map(|a| a.value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.anchors
            .iter()
            .map(|a| a.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityLandscape {
    dims: u32,
    reps: RepresentativeSet,
}

impl UtilityLandscape {
    /// Build a landscape from explicit anchors. Anchors must be distinct and fit in `dims` bits.
    pub fn from_anchors(dims: u32, anchors: Vec<Anchor>) -> Result<Self> {
        check_dims(dims)?;
        if anchors.len() < 2 {
            return Err(Error::TooFewRepresentatives(anchors.len()));
        }
        let mut seen = HashSet::with_capacity(anchors.len());
        for a in &anchors {
            if !a.idea.fits(dims) {
                return Err(Error::DimensionMismatch {
                    encoding: a.idea.0,
                    dims,
                });
            }
            if !seen.insert(a.idea) {
                return Err(Error::config(
                    "anchors",
                    format!("representative idea {} appears twice", a.idea.0),
                ));
            }
        }
        Ok(Self {
            dims,
            reps: RepresentativeSet { anchors },
        })
    }

    pub fn dims(&self) -> u32 {
        self.dims
    }

    pub fn representatives(&self) -> &RepresentativeSet {
        &self.reps
    }

    /// Interpolated utility of `v`. Exact matches return the stored anchor value.
    pub fn eval(&self, v: Idea) -> Result<f64> {
        if !v.fits(self.dims) {
            return Err(Error::DimensionMismatch {
                encoding: v.0,
                dims: self.dims,
            });
        }
        Ok(self.eval_unchecked(v))
    }

    pub(crate) fn eval_unchecked(&self, v: Idea) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in &self.reps.anchors {
            let d = a.idea.hamming(v);
            if d == 0 {
                return a.value;
            }
            let w = 1.0 / f64::from(d * d);
            num += a.value * w;
            den += w;
        }
        num / den
    }

    /// Full table of the landscape, refusing when `2^M` would exceed `2^cap`.
    pub fn enumerate(&self, cap: u32) -> Result<Enumeration> {
        if self.dims > cap {
            return Err(Error::EnumerationCap {
                dims: self.dims,
                cap,
            });
        }
        let values: Vec<f64> = (0..space_size(self.dims))
            .map(|e| self.eval_unchecked(Idea(e)))
            .collect();
        // Strict comparisons keep the smallest encoding on ties.
        let mut argmax = 0usize;
        let mut argmin = 0usize;
        for (i, &v) in values.iter().enumerate() {
            if v > values[argmax] {
                argmax = i;
            }
            if v < values[argmin] {
                argmin = i;
            }
        }
        Ok(Enumeration {
            values,
            argmax: Idea(argmax as u64),
            argmin: Idea(argmin as u64),
        })
    }

    /// Plain-text form: `M=<int> n=<int>` then one `<encoding> <value>` line per anchor.
    pub fn to_text(&self) -> String {
        let mut out = format!("M={} n={}\n", self.dims, self.reps.len());
        for a in &self.reps.anchors {
            let _ = writeln!(out, "{} {}", a.idea.0, sig17(a.value));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::MalformedLandscape {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut dims = None;
        let mut count = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("M", v)) => dims = v.parse::<u32>().ok(),
                Some(("n", v)) => count = v.parse::<usize>().ok(),
                _ => return Err(bad(hline, "expected `M=<int> n=<int>`")),
            }
        }
        let (dims, count) = match (dims, count) {
            (Some(d), Some(n)) => (d, n),
            _ => return Err(bad(hline, "expected `M=<int> n=<int>`")),
        };
        let mut anchors = Vec::with_capacity(count);
        for (lineno, line) in lines {
            let mut parts = line.split_whitespace();
            let (Some(enc), Some(val), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(lineno, "expected `<encoding> <value>`"));
            };
            let enc: u64 = enc.parse().map_err(|_| bad(lineno, "bad encoding"))?;
            let value: f64 = val.parse().map_err(|_| bad(lineno, "bad value"))?;
            anchors.push(Anchor {
                idea: Idea(enc),
                value,
            });
        }
        if anchors.len() != count {
            return Err(bad(
                hline,
                &format!(
                    "header declares n={count} but found {} anchors",
                    anchors.len()
                ),
            ));
        }
        Self::from_anchors(dims, anchors)
    }
}

/// Brute-force table of a landscape.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// `values[e]` is the utility of the idea with encoding `e`.
    pub values: Vec<f64>,
    pub argmax: Idea,
    pub argmin: Idea,
}

/// Sample a ground-truth landscape: `n` distinct ideas, the first anchored at
/// 1, the second at 0, the rest uniform in `(0, 1)`.
pub fn generate_true_landscape<R: Rng + ?Sized>(
    dims: u32,
    n: usize,
    rng: &mut R,
) -> Result<UtilityLandscape> {
    check_dims(dims)?;
    if n < 2 {
        return Err(Error::TooFewRepresentatives(n));
    }
    if (n as u128) > (1u128 << dims) {
        return Err(Error::TooManyRepresentatives { n, dims });
    }
    let mut seen = HashSet::with_capacity(n);
    let mut anchors = Vec::with_capacity(n);
    while anchors.len() < n {
        let idea = random_idea(dims, rng);
        if !seen.insert(idea) {
            continue;
        }
        let value = match anchors.len() {
            0 => 1.0,
            1 => 0.0,
            _ => open_unit(rng),
        };
        anchors.push(Anchor { idea, value });
    }
    Ok(UtilityLandscape {
        dims,
        reps: RepresentativeSet { anchors },
    })
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Derive the group's master landscape from the true one.
///
/// Each representative's bits flip with probability `min(0.25 * beta, 1)`
/// (resampled until the idea is distinct from those already placed), each
/// anchor value gets uniform noise in `[-beta, beta]`, and the values are then
/// min-max rescaled back onto `[0, 1]`.
pub fn apply_bias<R: Rng + ?Sized>(
    truth: &UtilityLandscape,
    beta: f64,
    rng: &mut R,
) -> UtilityLandscape {
    let flip_p = (0.25 * beta).clamp(0.0, 1.0);
    let dims = truth.dims;
    let mut placed = HashSet::with_capacity(truth.reps.len());
    let mut anchors = Vec::with_capacity(truth.reps.len());
    for a in &truth.reps.anchors {
        let idea = loop {
            let candidate = a.idea.mutate(dims, flip_p, rng);
            if placed.insert(candidate) {
                break candidate;
            }
        };
        let noise = (rng.gen::<f64>() * 2.0 - 1.0) * beta;
        anchors.push(Anchor {
            idea,
            value: a.value + noise,
        });
    }
    let lo = anchors
        .iter()
        .map(|a| a.value)
        .fold(f64::INFINITY, f64::min);
    let hi = anchors
        .iter()
        .map(|a| a.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for a in &mut anchors {
        a.value = if span > 0.0 {
            (a.value - lo) / span
        } else {
            0.5
        };
    }
    UtilityLandscape {
        dims,
        reps: RepresentativeSet { anchors },
    }
}

/// An agent's private, noisy view of the master landscape.
///
/// The value of idea `v` is drawn uniformly from
/// `[max(U(v) - nu, 0), min(U(v) + nu, 1)]` using a keyed draw on
/// `(agent_seed, v)`, so the whole function exists without being tabulated and
/// repeated queries agree.
#[derive(Debug, Clone)]
pub struct IndividualUtility {
    base: Arc<UtilityLandscape>,
    heterogeneity: f64,
    agent_seed: u64,
}

impl IndividualUtility {
    pub fn new(base: Arc<UtilityLandscape>, heterogeneity: f64, agent_seed: u64) -> Self {
        Self {
            base,
            heterogeneity,
            agent_seed,
        }
    }

    pub fn base(&self) -> &UtilityLandscape {
        &self.base
    }

    pub fn heterogeneity(&self) -> f64 {
        self.heterogeneity
    }

    pub fn agent_seed(&self) -> u64 {
        self.agent_seed
    }

    pub fn eval(&self, v: Idea) -> Result<f64> {
        let master = self.base.eval(v)?;
        Ok(self.perturb(master, v))
    }

    pub(crate) fn eval_unchecked(&self, v: Idea) -> f64 {
        self.perturb(self.base.eval_unchecked(v), v)
    }

    fn perturb(&self, master: f64, v: Idea) -> f64 {
        if self.heterogeneity == 0.0 {
            return master;
        }
        let lo = (master - self.heterogeneity).max(0.0);
        let hi = (master + self.heterogeneity).min(1.0);
        (lo + keyed_unit(self.agent_seed, v.0) * (hi - lo)).clamp(lo, hi)
    }
}

pub fn make_individual_utility(
    master: Arc<UtilityLandscape>,
    heterogeneity: f64,
    agent_seed: u64,
) -> IndividualUtility {
    IndividualUtility::new(master, heterogeneity, agent_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn anchors(pairs: &[(u64, f64)]) -> Vec<Anchor> {
        pairs
            .iter()
            .map(|&(e, value)| Anchor {
                idea: Idea(e),
                value,
            })
            .collect()
    }

    #[test]
    fn one_bit_space_is_fully_covered() {
        let mut rng = SimRng::seed_from_u64(0);
        let l = generate_true_landscape(1, 2, &mut rng).unwrap();
        let reps = l.representatives().anchors();
        assert_ne!(reps[0].idea, reps[1].idea);
        assert_eq!(reps[0].value, 1.0);
        assert_eq!(reps[1].value, 0.0);
        assert_eq!(l.eval(reps[0].idea).unwrap(), 1.0);
        assert_eq!(l.eval(reps[1].idea).unwrap(), 0.0);
    }

    #[test]
    fn generated_set_has_one_max_and_one_min() {
        let mut rng = SimRng::seed_from_u64(42);
        let l = generate_true_landscape(10, 20, &mut rng).unwrap();
        let reps = l.representatives().anchors();
        let distinct: HashSet<_> = reps.iter().map(|a| a.idea).collect();
        assert_eq!(distinct.len(), 20);
        assert_eq!(reps.iter().filter(|a| a.value == 1.0).count(), 1);
        assert_eq!(reps.iter().filter(|a| a.value == 0.0).count(), 1);
        assert!(reps.iter().all(|a| a.idea.fits(10)));
    }

    #[test]
    fn rejects_impossible_counts() {
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(
            generate_true_landscape(4, 20, &mut rng),
            Err(Error::TooManyRepresentatives { n: 20, dims: 4 })
        );
        assert_eq!(
            generate_true_landscape(4, 1, &mut rng),
            Err(Error::TooFewRepresentatives(1))
        );
        assert!(generate_true_landscape(0, 2, &mut rng).is_err());
        assert!(generate_true_landscape(4, 16, &mut rng).is_ok());
    }

    #[test]
    fn hand_evaluated_points() {
        let l = UtilityLandscape::from_anchors(3, anchors(&[(0b000, 1.0), (0b111, 0.0)])).unwrap();
        assert!((l.eval(Idea(0b001)).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(l.eval(Idea(0b000)).unwrap(), 1.0);
        let l = UtilityLandscape::from_anchors(3, anchors(&[(0b000, 1.0), (0b011, 0.0)])).unwrap();
        assert_eq!(l.eval(Idea(0b010)).unwrap(), 0.5);
    }

    #[test]
    fn eval_rejects_foreign_dimension() {
        let l = UtilityLandscape::from_anchors(3, anchors(&[(0, 1.0), (7, 0.0)])).unwrap();
        assert!(matches!(
            l.eval(Idea(8)),
            Err(Error::DimensionMismatch {
                encoding: 8,
                dims: 3
            })
        ));
    }

    #[test]
    fn enumeration_of_one_bit() {
        let l = UtilityLandscape::from_anchors(1, anchors(&[(1, 1.0), (0, 0.0)])).unwrap();
        let e = l.enumerate(DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(e.values, vec![0.0, 1.0]);
        assert_eq!(e.argmax, Idea(1));
        assert_eq!(e.argmin, Idea(0));
    }

    #[test]
    fn enumeration_ties_pick_smallest_encoding() {
        // Both anchors are 1.0, so every idea ties at 1.0.
        let l = UtilityLandscape::from_anchors(2, anchors(&[(0b01, 1.0), (0b10, 1.0)])).unwrap();
        let e = l.enumerate(4).unwrap();
        assert_eq!(e.argmax, Idea(0));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let mut rng = SimRng::seed_from_u64(1);
        let l = generate_true_landscape(12, 10, &mut rng).unwrap();
        assert_eq!(
            l.enumerate(10),
            Err(Error::EnumerationCap { dims: 12, cap: 10 })
        );
    }

    #[test]
    fn zero_bias_is_identity() {
        let mut rng = SimRng::seed_from_u64(3);
        let truth = generate_true_landscape(10, 20, &mut rng).unwrap();
        let master = apply_bias(&truth, 0.0, &mut rng);
        assert_eq!(master, truth);
    }

    #[test]
    fn bias_keeps_representative_invariants() {
        for (seed, beta) in [(1u64, 0.2), (2, 0.6), (3, 1.2), (4, 4.0), (5, 10.0)] {
            let mut rng = SimRng::seed_from_u64(seed);
            let truth = generate_true_landscape(6, 30, &mut rng).unwrap();
            let before = truth.clone();
            let master = apply_bias(&truth, beta, &mut rng);
            assert_eq!(truth, before);
            let reps = master.representatives();
            let distinct: HashSet<_> = reps.anchors().iter().map(|a| a.idea).collect();
            assert_eq!(distinct.len(), 30);
            assert_eq!(reps.min_value(), 0.0);
            assert_eq!(reps.max_value(), 1.0);
        }
    }

    #[test]
    fn bias_saturated_space_still_distinct() {
        let mut rng = SimRng::seed_from_u64(8);
        let truth = generate_true_landscape(3, 8, &mut rng).unwrap();
        let master = apply_bias(&truth, 1.2, &mut rng);
        let distinct: HashSet<_> = master
            .representatives()
            .anchors()
            .iter()
            .map(|a| a.idea)
            .collect();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn bias_flip_rate_tracks_quarter_beta() {
        let mut rng = SimRng::seed_from_u64(11);
        let truth = generate_true_landscape(40, 200, &mut rng).unwrap();
        let master = apply_bias(&truth, 1.2, &mut rng);
        let flips: u32 = truth
            .representatives()
            .anchors()
            .iter()
            .zip(master.representatives().anchors())
            .map(|(a, b)| a.idea.hamming(b.idea))
            .sum();
        let rate = f64::from(flips) / (40.0 * 200.0);
        assert!((rate - 0.3).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn zero_heterogeneity_is_identity() {
        let mut rng = SimRng::seed_from_u64(5);
        let master = Arc::new(generate_true_landscape(8, 20, &mut rng).unwrap());
        let u = make_individual_utility(master.clone(), 0.0, 1234);
        for e in 0..256 {
            assert_eq!(u.eval(Idea(e)).unwrap(), master.eval(Idea(e)).unwrap());
        }
    }

    #[test]
    fn wide_noise_spans_unit_interval() {
        // U(v) = 0.5 everywhere on the segment between two equidistant anchors.
        let master = Arc::new(
            UtilityLandscape::from_anchors(3, anchors(&[(0b000, 1.0), (0b011, 0.0)])).unwrap(),
        );
        assert_eq!(master.eval(Idea(0b010)).unwrap(), 0.5);
        let mut lo: f64 = 1.0;
        let mut hi: f64 = 0.0;
        for agent in 0..5_000 {
            let v = make_individual_utility(master.clone(), 1.2, agent)
                .eval(Idea(0b010))
                .unwrap();
            assert!((0.0..=1.0).contains(&v));
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo < 0.01 && hi > 0.99, "[{lo}, {hi}]");
    }

    #[test]
    fn individual_utility_is_repeatable() {
        let mut rng = SimRng::seed_from_u64(5);
        let master = Arc::new(generate_true_landscape(8, 20, &mut rng).unwrap());
        let u = make_individual_utility(master, 0.4, 77);
        for e in 0..256 {
            assert_eq!(u.eval(Idea(e)).unwrap(), u.eval(Idea(e)).unwrap());
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let mut rng = SimRng::seed_from_u64(9);
        let truth = generate_true_landscape(10, 20, &mut rng).unwrap();
        let master = apply_bias(&truth, 0.8, &mut rng);
        let text = master.to_text();
        assert!(text.starts_with("M=10 n=20\n"));
        assert_eq!(UtilityLandscape::from_text(&text).unwrap(), master);
    }

    #[test]
    fn text_parse_errors_name_the_line() {
        let err = UtilityLandscape::from_text("M=3 n=2\n0 1.0\nseven 0.0\n").unwrap_err();
        assert!(matches!(err, Error::MalformedLandscape { line: 3, .. }));
        let err = UtilityLandscape::from_text("M=3 n=3\n0 1.0\n7 0.0\n").unwrap_err();
        assert!(matches!(err, Error::MalformedLandscape { line: 1, .. }));
    }

    proptest! {
        #[test]
        fn eval_stays_within_anchor_range(seed in any::<u64>(), dims in 2u32..12, v in any::<u64>()) {
            let mut rng = SimRng::seed_from_u64(seed);
            let n = 2 + (seed % 14) as usize;
            let n = n.min(1usize << dims);
            let l = generate_true_landscape(dims, n, &mut rng).unwrap();
            let v = Idea(v % space_size(dims));
            let u = l.eval(v).unwrap();
            let reps = l.representatives();
            prop_assert!(u >= reps.min_value() && u <= reps.max_value());
            for a in reps.anchors() {
                prop_assert_eq!(l.eval(a.idea).unwrap(), a.value);
            }
        }

        #[test]
        fn individual_values_stay_in_envelope(seed in any::<u64>(), nu in 0.0f64..1.5, agent in any::<u64>(), v in 0u64..1024) {
            let mut rng = SimRng::seed_from_u64(seed);
            let master = Arc::new(generate_true_landscape(10, 20, &mut rng).unwrap());
            let u = make_individual_utility(master.clone(), nu, agent);
            let m = master.eval(Idea(v)).unwrap();
            let x = u.eval(Idea(v)).unwrap();
            prop_assert!(x >= (m - nu).max(0.0) && x <= (m + nu).min(1.0));
        }
    }
}
