//! Outcome measures on a final population: the true quality of the decision and
//! how far the group has converged on it.

use crate::error::{Error, Result};
use crate::evolution::Population;
use crate::landscape::{Idea, UtilityLandscape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeMetrics {
    pub most_supported: Idea,
    pub decision_true_utility: f64,
    pub entropy_bits: f64,
    pub convergence: f64,
    pub distinct_types: usize,
    pub population_size: usize,
}

/// Shannon entropy (bits) of the distribution of encodings in the population.
pub fn entropy(pop: &Population) -> Result<f64> {
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let total = pop.len() as f64;
    let h: f64 = pop
        .counts()
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // A single type gives -1 * log2(1) = -0.0.
    Ok(h.max(0.0))
}

/// `(M - H) / M`: 1 when everyone holds the same idea, 0 at maximal disorder.
pub fn convergence(pop: &Population, dims: u32) -> Result<f64> {
    let m = f64::from(dims);
    Ok((m - entropy(pop)?) / m)
}

/// The encoding with the most copies; ties go to the smallest encoding.
pub fn most_supported(pop: &Population) -> Result<Idea> {
    pop.counts()
        .into_iter()
        // BTreeMap iterates ascending, and max_by_key keeps the last maximum,
        // so iterate in reverse to keep the smallest encoding.
        .rev()
        .max_by_key(|&(_, c)| c)
        .map(|(idea, _)| idea)
        .ok_or(Error::EmptyPopulation)
}

/// True utility of the most supported idea. Always scored on the ground-truth
/// landscape, never on a biased or individual view.
pub fn decision_quality(pop: &Population, truth: &UtilityLandscape) -> Result<f64> {
    truth.eval(most_supported(pop)?)
}

pub fn outcome_metrics(pop: &Population, truth: &UtilityLandscape) -> Result<OutcomeMetrics> {
    let most_supported = most_supported(pop)?;
    let entropy_bits = entropy(pop)?;
    let dims = truth.dims();
    debug_assert!(entropy_bits <= f64::from(dims) + 1e-9);
    Ok(OutcomeMetrics {
        most_supported,
        decision_true_utility: truth.eval(most_supported)?,
        entropy_bits,
        convergence: (f64::from(dims) - entropy_bits) / f64::from(dims),
        distinct_types: pop.counts().len(),
        population_size: pop.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::Anchor;
    use proptest::prelude::*;

    fn pop(encodings: &[u64]) -> Population {
        Population::new(10, encodings.iter().map(|&e| Idea(e)))
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&pop(&[1, 1, 1, 1])).unwrap(), 0.0);
        assert_eq!(entropy(&pop(&[1, 1, 2, 2])).unwrap(), 1.0);
        assert_eq!(entropy(&pop(&[1, 2, 3, 3])).unwrap(), 1.5);
        assert_eq!(entropy(&pop(&[])), Err(Error::EmptyPopulation));
    }

    #[test]
    fn convergence_examples() {
        assert_eq!(convergence(&pop(&[9, 9, 9]), 10).unwrap(), 1.0);
        assert!((convergence(&pop(&[1, 1, 2, 2]), 10).unwrap() - 0.9).abs() < 1e-15);
        let full = Population::new(4, (0..16).map(Idea));
        assert_eq!(entropy(&full).unwrap(), 4.0);
        assert_eq!(convergence(&full, 4).unwrap(), 0.0);
    }

    #[test]
    fn most_supported_tie_rule() {
        assert_eq!(most_supported(&pop(&[4, 4, 6])).unwrap(), Idea(4));
        assert_eq!(most_supported(&pop(&[5, 3])).unwrap(), Idea(3));
        assert_eq!(
            most_supported(&pop(&[7, 7, 7, 2, 2, 2, 9])).unwrap(),
            Idea(2)
        );
        assert_eq!(most_supported(&pop(&[])), Err(Error::EmptyPopulation));
    }

    #[test]
    fn decision_quality_uses_anchor_value() {
        let truth = UtilityLandscape::from_anchors(
            10,
            vec![
                Anchor {
                    idea: Idea(3),
                    value: 0.25,
                },
                Anchor {
                    idea: Idea(900),
                    value: 1.0,
                },
                Anchor {
                    idea: Idea(0),
                    value: 0.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(decision_quality(&pop(&[3, 3, 900]), &truth).unwrap(), 0.25);
        let m = outcome_metrics(&pop(&[3, 3, 900]), &truth).unwrap();
        assert_eq!(m.distinct_types, 2);
        assert_eq!(m.population_size, 3);
    }

    proptest! {
        #[test]
        fn entropy_bounds_and_invariances(mut encodings in prop::collection::vec(0u64..64, 1..200), dup in 2usize..4) {
            let p = Population::new(6, encodings.iter().map(|&e| Idea(e)));
            let h = entropy(&p).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (p.len() as f64).log2().min(6.0) + 1e-12);

            let ms = most_supported(&p).unwrap();
            encodings.reverse();
            let rev = Population::new(6, encodings.iter().map(|&e| Idea(e)));
            prop_assert_eq!(entropy(&rev).unwrap(), h);
            prop_assert_eq!(most_supported(&rev).unwrap(), ms);

            let scaled = Population::new(6, encodings.iter().flat_map(|&e| std::iter::repeat_n(Idea(e), dup)));
            prop_assert!((entropy(&scaled).unwrap() - h).abs() < 1e-12);
        }
    }
}
