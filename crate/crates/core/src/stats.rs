//! Statistical comparisons for experiment summaries: Vargha-Delaney effect
//! size, the Mann-Whitney U test, and Pearson correlation.
//!
//! The U test is exact (full permutation enumeration, correct under ties)
//! whenever the smaller sample has at most [`EXACT_LIMIT`] observations,
//! and falls back to the tie-corrected normal approximation with
//! continuity correction otherwise.

/// Largest size of the smaller sample for which the exact test runs.
pub const EXACT_LIMIT: usize = 8;

/// Probability that a random draw from `a` beats one from `b`, ties
/// counting half. 0.5 means no effect; values above favour `a`.
pub fn vargha_delaney_a12(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.5;
    }
    let mut wins = 0.0f64;
    for &x in a {
        for &y in b {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    wins / (a.len() as f64 * b.len() as f64)
}

/// Two-sided Mann-Whitney p-value.
pub fn mann_whitney_p(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    if a.len().min(b.len()) <= EXACT_LIMIT {
        mann_whitney_p_exact(a, b)
    } else {
        mann_whitney_p_normal(a, b)
    }
}

fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0f64;
    for &x in a {
        for &y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Exact two-sided p by enumerating every assignment of the pooled sample
/// into two groups of the observed sizes. Ties need no special treatment:
/// the permutation distribution of U is computed on the data as they are.
/// p = min(1, 2 * min(P(U <= u_obs), P(U >= u_obs))).
pub fn mann_whitney_p_exact(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let u_obs = u_statistic(a, b);

    let mut le = 0u64;
    let mut ge = 0u64;
    let mut total = 0u64;
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    enumerate_choices(pooled.len(), n, 0, &mut chosen, &mut |group_a: &[usize]| {
        let mut in_a = vec![false; pooled.len()];
        for &i in group_a {
            in_a[i] = true;
        }
        let ga: Vec<f64> = (0..pooled.len()).filter(|&i| in_a[i]).map(|i| pooled[i]).collect();
        let gb: Vec<f64> = (0..pooled.len()).filter(|&i| !in_a[i]).map(|i| pooled[i]).collect();
        let u = u_statistic(&ga, &gb);
        total += 1;
        // Tolerance absorbs float accumulation in the half-credit sums.
        if u <= u_obs + 1e-9 {
            le += 1;
        }
        if u >= u_obs - 1e-9 {
            ge += 1;
        }
    });

    let p_le = le as f64 / total as f64;
    let p_ge = ge as f64 / total as f64;
    (2.0 * p_le.min(p_ge)).min(1.0)
}

fn enumerate_choices(
    total: usize,
    pick: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if chosen.len() == pick {
        visit(chosen);
        return;
    }
    let remaining = pick - chosen.len();
    for i in start..=total - remaining {
        chosen.push(i);
        enumerate_choices(total, pick, i + 1, chosen, visit);
        chosen.pop();
    }
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
pub fn mann_whitney_p_normal(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let m = b.len() as f64;
    let big_n = n + m;
    let u = u_statistic(a, b);
    let mean = n * m / 2.0;

    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0f64;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = n * m / 12.0 * (big_n + 1.0 - tie_term / (big_n * (big_n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let diff = u - mean;
    let corrected = if diff > 0.0 {
        diff - 0.5
    } else if diff < 0.0 {
        diff + 0.5
    } else {
        0.0
    };
    let z = corrected / variance.sqrt();
    (2.0 * (1.0 - normal_cdf(z.abs()))).min(1.0)
}

/// Pearson correlation coefficient; `None` if either side has no variance
/// or fewer than two observations.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "paired samples required");
    if x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

/// Standard normal CDF via a rational erf approximation; absolute error
/// is below 1.5e-7, plenty for reporting p-values.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a12_counts_ties_as_half() {
        let got = vargha_delaney_a12(&[1.0, 2.0], &[1.0, 3.0]);
        assert!((got - 0.375).abs() < 1e-12);
    }

    #[test]
    fn a12_of_identical_samples_is_half() {
        let xs = [0.2, 0.4, 0.4, 0.9];
        assert!((vargha_delaney_a12(&xs, &xs) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn a12_of_dominating_sample_is_one() {
        assert_eq!(vargha_delaney_a12(&[5.0, 6.0], &[1.0, 2.0]), 1.0);
        assert_eq!(vargha_delaney_a12(&[1.0, 2.0], &[5.0, 6.0]), 0.0);
    }

    #[test]
    fn identical_samples_give_p_one() {
        let xs = [0.5, 0.5, 0.5];
        assert_eq!(mann_whitney_p(&xs, &xs), 1.0);
    }

    #[test]
    fn fully_separated_small_samples() {
        // U_obs = 0; among C(6,3) = 20 assignments exactly one has U <= 0
        // and that same extreme on the other side, so p = 2/20.
        let p = mann_whitney_p(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]);
        assert!((p - 0.1).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn exact_and_normal_agree_for_moderate_samples() {
        let a = [0.1, 0.3, 0.35, 0.5, 0.55, 0.7, 0.8, 0.9];
        let b = [0.2, 0.25, 0.4, 0.45, 0.6, 0.65, 0.75, 0.85];
        let exact = mann_whitney_p_exact(&a, &b);
        let approx = mann_whitney_p_normal(&a, &b);
        assert!((exact - approx).abs() < 0.02, "exact {exact} vs normal {approx}");
    }

    #[test]
    fn exact_and_normal_agree_with_ties() {
        // Heavy ties in a tiny sample are the approximation's worst case;
        // the two paths still land close together.
        let a = [0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0, 0.25];
        let b = [0.0, 0.5, 0.5, 0.5, 1.0, 0.75, 0.25, 0.25];
        let exact = mann_whitney_p_exact(&a, &b);
        let approx = mann_whitney_p_normal(&a, &b);
        assert!((exact - approx).abs() < 0.03, "exact {exact} vs normal {approx}");
    }

    #[test]
    fn pearson_of_linear_data_is_signed_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let down: Vec<f64> = x.iter().map(|v| -0.5 * v).collect();
        assert!((pearson_r(&x, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_r(&x, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_of_constant_data_is_undefined() {
        assert_eq!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.959963985) - 0.975).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.158655254).abs() < 1e-6);
    }

    #[test]
    fn median_of_even_and_odd_lengths() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
