//! Summary statistics, Spearman rank correlation and permutation tests.

use rand::seq::SliceRandom;
use rand::Rng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has no variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationTest {
    /// Spearman coefficient; 0 when undefined (a constant variable).
    pub rho: f64,
    /// One-sided p-value for a negative association.
    pub p_negative: f64,
    pub p_two_sided: f64,
    pub n: usize,
    pub defined: bool,
}

/// Spearman's rho with permutation p-values. The `+1` correction keeps the
/// smallest attainable p at `1 / (permutations + 1)`.
pub fn spearman_permutation_test<R: Rng + ?Sized>(
    xs: &[f64],
    ys: &[f64],
    permutations: usize,
    rng: &mut R,
) -> CorrelationTest {
    let rx = average_ranks(xs);
    let mut ry = average_ranks(ys);
    let Some(rho) = pearson(&rx, &ry) else {
        return CorrelationTest {
            rho: 0.0,
            p_negative: 1.0,
            p_two_sided: 1.0,
            n: xs.len(),
            defined: false,
        };
    };
    // Ranks are shuffled in place; rounding slack keeps exact ties counted.
    let eps = 1e-12;
    let mut below = 0usize;
    let mut beyond = 0usize;
    for _ in 0..permutations {
        ry.shuffle(rng);
        let r = pearson(&rx, &ry).unwrap_or(0.0);
        if r <= rho + eps {
            below += 1;
        }
        if r.abs() >= rho.abs() - eps {
            beyond += 1;
        }
    }
    let denom = (permutations + 1) as f64;
    CorrelationTest {
        rho,
        p_negative: (below + 1) as f64 / denom,
        p_two_sided: (beyond + 1) as f64 / denom,
        n: xs.len(),
        defined: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanDifferenceTest {
    /// `mean(a) - mean(b)`.
    pub difference: f64,
    /// One-sided p-value for `mean(a) > mean(b)`.
    pub p_greater: f64,
    pub p_two_sided: f64,
}

/// Two-sample permutation test on the difference of means.
pub fn mean_difference_permutation_test<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    rng: &mut R,
) -> MeanDifferenceTest {
    let observed = mean(a) - mean(b);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let eps = 1e-12;
    let mut greater = 0usize;
    let mut beyond = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(rng);
        let (pa, pb) = pooled.split_at(a.len());
        let d = mean(pa) - mean(pb);
        if d >= observed - eps {
            greater += 1;
        }
        if d.abs() >= observed.abs() - eps {
            beyond += 1;
        }
    }
    let denom = (permutations + 1) as f64;
    MeanDifferenceTest {
        difference: observed,
        p_greater: (greater + 1) as f64 / denom,
        p_two_sided: (beyond + 1) as f64 / denom,
    }
}
