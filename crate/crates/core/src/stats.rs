//! Empirical distributions and the goodness-of-fit tests used to compare
//! simulated laws.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::{Error, Result};

/// Minimum expected count per chi-square bin after merging.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical distribution needs a sample".into(),
            ));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("NaN in sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// The `p`-quantile (lower empirical inverse).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let i = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[i - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GofResult {
    pub test_name: String,
    pub statistic: f64,
    /// Asymptotic p-value of the statistic.
    pub p_value: f64,
    pub sample_sizes: Vec<usize>,
    /// Degrees of freedom, for chi-square tests.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value with the Stephens small-sample correction.
fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<GofResult> {
    let a = EmpiricalDistribution::new(a.to_vec())?;
    let b = EmpiricalDistribution::new(b.to_vec())?;
    Ok(ks_two_sample_sorted(&a, &b))
}

/// Sup distance between two ECDFs by a merge scan over both sorted samples.
pub fn ks_two_sample_sorted(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> GofResult {
    let (xa, xb) = (a.sorted_samples(), b.sorted_samples());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    GofResult {
        test_name: "ks-two-sample".into(),
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
        sample_sizes: vec![xa.len(), xb.len()],
        dof: None,
    }
}

/// One-sample KS distance `sup |F_n - F|` against a continuous CDF.
pub fn ks_against_cdf(dist: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> Result<GofResult> {
    let n = dist.count() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in dist.sorted_samples().iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::ContractViolation(format!(
                "cdf({x}) = {f} outside [0, 1]"
            )));
        }
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(GofResult {
        test_name: "ks-one-sample".into(),
        statistic: d,
        p_value: ks_p_value(d, n),
        sample_sizes: vec![dist.count()],
        dof: None,
    })
}

/// Rayleigh CDF `1 - exp(-x^2 / 2)`.
pub fn rayleigh_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-0.5 * x * x).exp_m1()
    }
}

/// Bins of consecutive categories, each with expected count at least
/// [`MIN_EXPECTED_PER_BIN`]; the last bin absorbs everything beyond.
fn merge_bins(expected: &[f64]) -> Vec<(usize, usize)> {
    let mut bins = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, &e) in expected.iter().enumerate() {
        acc += e;
        if acc >= MIN_EXPECTED_PER_BIN {
            bins.push((start, i + 1));
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < expected.len() {
        match bins.last_mut() {
            Some(last) => last.1 = expected.len(),
            None => bins.push((start, expected.len())),
        }
    }
    bins
}

/// Pearson chi-square of category counts (`observed[i]` = number of
/// samples equal to `i`) against a pmf on the non-negative integers. The
/// tail beyond the observed range is folded into the last category, then
/// adjacent categories are merged until every bin expects at least 5.
pub fn chi_square_counts(observed: &[u64], pmf: impl Fn(usize) -> f64) -> Result<GofResult> {
    let total: u64 = observed.iter().sum();
    if observed.is_empty() || total == 0 {
        return Err(Error::TestSkipped("no observations".into()));
    }
    let n = total as f64;
    let mut probs: Vec<f64> = (0..observed.len()).map(&pmf).collect();
    let head: f64 = probs[..probs.len() - 1].iter().sum();
    *probs.last_mut().unwrap() = (1.0 - head).max(0.0);
    let expected: Vec<f64> = probs.iter().map(|p| p * n).collect();
    let bins = merge_bins(&expected);
    if bins.len() < 2
        || bins
            .iter()
            .any(|&(a, b)| expected[a..b].iter().sum::<f64>() < MIN_EXPECTED_PER_BIN)
    {
        return Err(Error::TestSkipped(format!(
            "only {} bin(s) reach the expected-count floor",
            bins.len()
        )));
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(a, b)| {
            let o: f64 = observed[a..b].iter().sum::<u64>() as f64;
            let e: f64 = expected[a..b].iter().sum();
            (o - e).powi(2) / e
        })
        .sum();
    let dof = bins.len() - 1;
    Ok(GofResult {
        test_name: "chi-square-gof".into(),
        statistic,
        p_value: chi_square_sf(statistic, dof),
        sample_sizes: vec![total as usize],
        dof: Some(dof),
    })
}

fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).unwrap().sf(statistic)
}

/// Pearson chi-square test of independence on a contingency table of
/// paired non-negative integer observations. Adjacent values of each
/// margin are pooled until every margin bin holds at least `sqrt(5 n)`
/// observations, so every expected cell count is at least 5.
pub fn chi_square_independence(pairs: &[(usize, usize)]) -> Result<GofResult> {
    if pairs.is_empty() {
        return Err(Error::TestSkipped("no observations".into()));
    }
    let n = pairs.len() as f64;
    let floor = (MIN_EXPECTED_PER_BIN * n).sqrt();
    let margin_bins = |values: Vec<usize>| {
        let max = values.iter().copied().max().unwrap();
        let mut counts = vec![0.0; max + 1];
        for v in values {
            counts[v] += MIN_EXPECTED_PER_BIN / floor;
        }
        let bins = merge_bins(&counts);
        let mut lookup = vec![0usize; max + 1];
        for (b, &(lo, hi)) in bins.iter().enumerate() {
            lookup[lo..hi].iter_mut().for_each(|x| *x = b);
        }
        (bins.len(), lookup)
    };
    let (rows, row_of) = margin_bins(pairs.iter().map(|p| p.0).collect());
    let (cols, col_of) = margin_bins(pairs.iter().map(|p| p.1).collect());
    if rows < 2 || cols < 2 {
        return Err(Error::TestSkipped(format!(
            "table collapsed to {rows} x {cols}"
        )));
    }
    let mut table = vec![vec![0.0; cols]; rows];
    for p in pairs {
        table[row_of[p.0]][col_of[p.1]] += 1.0;
    }
    let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<f64> = (0..cols)
        .map(|c| table.iter().map(|r| r[c]).sum())
        .collect();
    let mut statistic = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &o) in row.iter().enumerate() {
            let e = row_totals[r] * col_totals[c] / n;
            statistic += (o - e).powi(2) / e;
        }
    }
    let dof = (rows - 1) * (cols - 1);
    Ok(GofResult {
        test_name: "chi-square-independence".into(),
        statistic,
        p_value: chi_square_sf(statistic, dof),
        sample_sizes: vec![pairs.len()],
        dof: Some(dof),
    })
}

/// Sample mean and the half-width of its normal-approximation confidence
/// interval at `level` (e.g. 0.95).
pub fn mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "mean_ci needs at least two samples".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    let (mean, se) = mean_se(samples);
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    Ok((mean, z * se))
}

/// Sample mean and its standard error.
pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
