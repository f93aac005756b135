//! Conditional moments of `X_k` given the coding excursion, and the Gamma
//! order-statistics behind the time change.
//!
//! Given `e`, with points `s_1..s_q` uniform and `Delta_r` their spanning
//! increments,
//!
//! ```text
//! E[X_k^q | e] = q! E_s[ int_{x_1 > .. > x_q > 0} exp(-sum_r Delta_r x_r^k / k!) dx ].
//! ```
//!
//! Points snap to the grid of the excursion; cells of zero height are
//! rejected, so every expectation here is over `s` uniform on the cells
//! where `e > 0`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use serde::Serialize;
use statrs::function::gamma::{gamma, gamma_lr, ln_gamma};

use crate::excursion::Excursion;
use crate::quadrature::integrate;
use crate::stats::{chi_square_counts, chi_square_independence, mean_se, GofResult};
use crate::{Error, Result};

/// Absolute tolerance of every x-integral.
pub const QUADRATURE_TOL: f64 = 1e-8;
const QUADRATURE_REL_TOL: f64 = 1e-11;
/// The outermost x-integral stops where `Delta_1 x^k / k! = OUTER_EXPONENT`.
const OUTER_EXPONENT: f64 = 60.0;
/// Width of the endpoint strata in the first-moment estimator.
pub const ENDPOINT_STRATUM: f64 = 1e-3;
pub const MAX_MOMENT_ORDER: usize = 3;
const MAX_RESAMPLES: usize = 10_000;

/// `P(Gamma(k, 1) > t) = e^{-t} sum_{j<k} t^j / j!`.
pub fn gamma_tail(k: usize, t: f64) -> f64 {
    assert!(k >= 1, "gamma_tail needs k >= 1");
    if t <= 0.0 {
        return 1.0;
    }
    if t < k as f64 {
        return 1.0 - gamma_cdf(k, t);
    }
    let mut term = (-t).exp();
    let mut sum = term;
    for j in 1..k {
        term *= t / j as f64;
        sum += term;
    }
    sum
}

/// `P(Gamma(k, 1) <= t)`, by the lower series `e^{-t} sum_{j>=k} t^j / j!`
/// when `t < k` so that small probabilities keep full precision.
pub fn gamma_cdf(k: usize, t: f64) -> f64 {
    assert!(k >= 1, "gamma_cdf needs k >= 1");
    if t <= 0.0 {
        return 0.0;
    }
    if t >= k as f64 {
        return 1.0 - gamma_tail(k, t);
    }
    let mut term = (k as f64 * t.ln() - ln_gamma(k as f64 + 1.0) - t).exp();
    let mut sum = 0.0;
    let mut j = k;
    while term > sum * 1e-17 {
        sum += term;
        j += 1;
        term *= t / j as f64;
    }
    sum
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentEstimate {
    pub k: f64,
    pub q: usize,
    pub estimate: f64,
    pub standard_error: f64,
    pub sample_count: usize,
}

fn check_k(k: f64) -> Result<()> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(Error::InvalidArgument(format!("k = {k} must be >= 1")));
    }
    Ok(())
}

/// The part of `[0, 1]` that snaps to cells of positive height, as
/// `(weight, height)` per cell.
fn positive_cells(e: &Excursion) -> Vec<(f64, f64)> {
    let v = e.values();
    let n = e.grid_size() as f64;
    v.iter()
        .enumerate()
        .filter(|(_, &h)| h > 0.0)
        .map(|(i, &h)| {
            let w = if i == 0 || i == v.len() - 1 {
                0.5 / n
            } else {
                1.0 / n
            };
            (w, h)
        })
        .collect()
}

/// `Gamma(1 + 1/k) (k!)^{1/k} E_s[e_s^{-1/k}]`, summed exactly over cells.
pub fn first_moment_closed_form(e: &Excursion, k: f64) -> Result<f64> {
    check_k(k)?;
    let cells = positive_cells(e);
    if cells.is_empty() {
        return Err(Error::InvalidArgument(
            "excursion vanishes identically".into(),
        ));
    }
    let mass: f64 = cells.iter().map(|c| c.0).sum();
    let integral: f64 = cells
        .iter()
        .map(|&(w, h)| w * h.powf(-1.0 / k))
        .sum::<f64>()
        / mass;
    Ok(first_moment_constant(k) * integral)
}

/// `Gamma(1 + 1/k) (k!)^{1/k}`.
fn first_moment_constant(k: f64) -> f64 {
    gamma(1.0 + 1.0 / k) * gamma(k + 1.0).powf(1.0 / k)
}

/// Support of the sampled `s`: `[0, 1]` minus zero-height endpoint cells.
fn sampling_window(e: &Excursion) -> (f64, f64) {
    let v = e.values();
    let half = 0.5 / e.grid_size() as f64;
    let lo = if v[0] > 0.0 { 0.0 } else { half };
    let hi = if *v.last().unwrap() > 0.0 {
        1.0
    } else {
        1.0 - half
    };
    (lo, hi)
}

/// Monte Carlo estimate of `E[X_k | e]` from the integrand
/// `Gamma(1 + 1/k) (k!)^{1/k} e_s^{-1/k}`, with antithetic pairs inside
/// three strata that isolate the endpoints, where the integrand blows up.
pub fn first_moment_given_excursion<R: Rng + ?Sized>(
    e: &Excursion,
    k: f64,
    mc_samples: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    check_k(k)?;
    if mc_samples == 0 {
        return Err(Error::InvalidArgument("mcSamples must be >= 1".into()));
    }
    let (lo, hi) = sampling_window(e);
    let width = hi - lo;
    let d = ENDPOINT_STRATUM.min(width / 4.0);
    let strata = [(lo, lo + d), (lo + d, hi - d), (hi - d, hi)];
    let pairs = mc_samples.div_ceil(2).max(3);
    let edge_pairs = (pairs / 10).max(1);
    let allocation = [
        edge_pairs,
        pairs.saturating_sub(2 * edge_pairs).max(1),
        edge_pairs,
    ];
    let f = |s: f64| {
        let h = e.value_at(s);
        (h > 0.0).then(|| h.powf(-1.0 / k))
    };
    let constant = first_moment_constant(k);
    let (mut estimate, mut variance) = (0.0, 0.0);
    for (&(a, b), &count) in strata.iter().zip(&allocation) {
        let weight = (b - a) / width;
        let mut values = Vec::with_capacity(count);
        while values.len() < count {
            let mut attempts = 0;
            let pair = loop {
                let s = a + (b - a) * rng.random::<f64>();
                if let (Some(x), Some(y)) = (f(s), f(a + b - s)) {
                    break 0.5 * (x + y);
                }
                attempts += 1;
                if attempts >= MAX_RESAMPLES {
                    return Err(Error::ContractViolation(
                        "excursion vanishes on a stratum".into(),
                    ));
                }
            };
            values.push(pair);
        }
        let (m, se) = mean_se(&values);
        estimate += weight * m;
        variance += (weight * se).powi(2);
    }
    Ok(MomentEstimate {
        k,
        q: 1,
        estimate: constant * estimate,
        standard_error: constant * variance.sqrt(),
        sample_count: 2 * allocation.iter().sum::<usize>(),
    })
}

/// `int_0^y exp(-c x^k) dx = c^{-1/k} Gamma(1 + 1/k) P(1/k, c y^k)`.
fn truncated_stretched_exp(c: f64, k: f64, y: f64) -> f64 {
    if c == 0.0 {
        return y;
    }
    if y <= 0.0 {
        return 0.0;
    }
    if y.is_infinite() {
        return c.powf(-1.0 / k) * gamma(1.0 + 1.0 / k);
    }
    c.powf(-1.0 / k) * gamma(1.0 + 1.0 / k) * gamma_lr(1.0 / k, c * y.powf(k))
}

fn ordered_integral_below(rates: &[f64], k: f64, y: f64) -> f64 {
    match rates {
        [c] => truncated_stretched_exp(*c, k, y),
        [c, rest @ ..] => {
            integrate(
                |x| (-c * x.powf(k)).exp() * ordered_integral_below(rest, k, x),
                0.0,
                y,
                QUADRATURE_TOL,
                QUADRATURE_REL_TOL,
            )
            .value
        }
        [] => 1.0,
    }
}

/// `int_{x_1 > .. > x_q > 0} exp(-sum_r Delta_r x_r^k / k!) dx`, by nested
/// adaptive quadrature with the innermost variable in closed form.
pub fn ordered_integral(deltas: &[f64], k: f64) -> Result<f64> {
    check_k(k)?;
    if deltas.is_empty() || deltas.len() > MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "moment order {} not in 1..={MAX_MOMENT_ORDER}",
            deltas.len()
        )));
    }
    if !(deltas[0] > 0.0) || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "deltas {deltas:?}: need Delta_1 > 0, all >= 0"
        )));
    }
    let factorial = gamma(k + 1.0);
    let rates: Vec<f64> = deltas.iter().map(|d| d / factorial).collect();
    if rates.len() == 1 {
        return Ok(truncated_stretched_exp(rates[0], k, f64::INFINITY));
    }
    let cutoff = (OUTER_EXPONENT / rates[0]).powf(1.0 / k);
    Ok(ordered_integral_below(&rates, k, cutoff))
}

fn factorial(q: usize) -> f64 {
    (1..=q).product::<usize>() as f64
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    match q {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
    }
}

/// `q!` times the ordered integral, averaged over all orderings of the
/// points. Each ordering has the same expectation; averaging makes the
/// integrand symmetric in `s`.
pub fn symmetrized_integrand(e: &Excursion, points: &[f64], k: f64) -> Result<f64> {
    let q = points.len();
    if q == 0 || q > MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "moment order {q} not in 1..={MAX_MOMENT_ORDER}"
        )));
    }
    let perms = permutations(q);
    let mut total = 0.0;
    for perm in &perms {
        let ordered: Vec<f64> = perm.iter().map(|&i| points[i]).collect();
        let inc = e.spanning_increments(&ordered)?;
        total += ordered_integral(&inc.deltas, k)?;
    }
    Ok(factorial(q) * total / perms.len() as f64)
}

/// Monte Carlo over `s` of the symmetrized moment integrand.
pub fn moment_given_excursion<R: Rng + ?Sized>(
    e: &Excursion,
    k: f64,
    q: usize,
    mc_samples: usize,
    rng: &mut R,
) -> Result<MomentEstimate> {
    check_k(k)?;
    if !(1..=MAX_MOMENT_ORDER).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "moment order {q} not in 1..={MAX_MOMENT_ORDER}"
        )));
    }
    if mc_samples == 0 {
        return Err(Error::InvalidArgument("mcSamples must be >= 1".into()));
    }
    if positive_cells(e).is_empty() {
        return Err(Error::InvalidArgument(
            "excursion vanishes identically".into(),
        ));
    }
    let mut values = Vec::with_capacity(mc_samples);
    let mut points = vec![0.0; q];
    for _ in 0..mc_samples {
        for p in points.iter_mut() {
            *p = loop {
                let s: f64 = rng.random();
                if e.value_at(s) > 0.0 {
                    break s;
                }
            };
        }
        values.push(symmetrized_integrand(e, &points, k)?);
    }
    let (estimate, standard_error) = mean_se(&values);
    Ok(MomentEstimate {
        k,
        q,
        estimate,
        standard_error,
        sample_count: mc_samples,
    })
}

/// How the `m` Gamma variables are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaSampling {
    /// All `m` variables explicitly.
    Direct,
    /// Only those below the largest `t`: a binomial count, then draws from
    /// the Gamma law truncated to `[0, a_m t_max]`.
    Thinned,
}

/// `N_m(t) = #{i <= m : G_i <= t}` for each `t` of the sorted grid, with
/// `G_i ~ Gamma(k, 1/a_m)` and `a_m = (a/m)^{1/k}`.
pub fn sample_gamma_counts<R: Rng + ?Sized>(
    m: u64,
    a: f64,
    k: usize,
    t_grid: &[f64],
    method: GammaSampling,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if m == 0 || k == 0 || !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need m >= 1, k >= 1, a > 0 (got {m}, {k}, {a})"
        )));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0))
        || t_grid.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::InvalidArgument(
            "tGrid must be sorted and non-negative".into(),
        ));
    }
    let scale = (a / m as f64).powf(1.0 / k as f64);
    let Some(&t_max) = t_grid.last() else {
        return Ok(Vec::new());
    };
    let cap = scale * t_max;
    let gamma_k = Gamma::new(k as f64, 1.0).unwrap();
    let below: Vec<f64> = match method {
        GammaSampling::Direct => (0..m)
            .map(|_| gamma_k.sample(rng))
            .filter(|&y| y <= cap)
            .collect(),
        GammaSampling::Thinned => {
            let count = Binomial::new(m, gamma_cdf(k, cap)).unwrap().sample(rng);
            (0..count)
                .map(|_| truncated_gamma(k, cap, &gamma_k, rng))
                .collect()
        }
    };
    Ok(t_grid
        .iter()
        .map(|&t| below.iter().filter(|&&y| y <= scale * t).count() as u64)
        .collect())
}

/// `Gamma(k, 1)` conditioned on `<= c`. For small `c` the density is nearly
/// `y^{k-1}`: propose `c U^{1/k}` and accept with probability `e^{-y}`.
fn truncated_gamma<R: Rng + ?Sized>(k: usize, c: f64, gamma_k: &Gamma<f64>, rng: &mut R) -> f64 {
    if c >= k as f64 {
        loop {
            let y = gamma_k.sample(rng);
            if y <= c {
                return y;
            }
        }
    }
    loop {
        let y = c * rng.random::<f64>().powf(1.0 / k as f64);
        if rng.random::<f64>() < (-y).exp() {
            return y;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PoissonFit {
    pub t: f64,
    /// `a t^k / k!`.
    pub poisson_mean: f64,
    pub empirical_mean: f64,
    pub gof: Option<GofResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IncrementIndependence {
    pub t1: f64,
    pub t2: f64,
    pub gof: Option<GofResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GammaPoissonReport {
    pub m: u64,
    pub a: f64,
    pub k: usize,
    pub sims: usize,
    pub fits: Vec<PoissonFit>,
    pub independence: Vec<IncrementIndependence>,
}

pub fn poisson_pmf(mean: f64, j: usize) -> f64 {
    if mean == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    (j as f64 * mean.ln() - mean - ln_gamma(j as f64 + 1.0)).exp()
}

/// Fits the counts of [`sample_gamma_counts`] over `sims` replications
/// against Poisson(`a t^k / k!`) at every `t`, and tests independence of
/// the increments over each pair of consecutive positive grid points.
pub fn gamma_poisson_check<R: Rng + ?Sized>(
    m: u64,
    a: f64,
    k: usize,
    t_grid: &[f64],
    sims: usize,
    method: GammaSampling,
    rng: &mut R,
) -> Result<GammaPoissonReport> {
    let runs: Vec<Vec<u64>> = (0..sims)
        .map(|_| sample_gamma_counts(m, a, k, t_grid, method, rng))
        .collect::<Result<_>>()?;
    gamma_poisson_report(m, a, k, t_grid, &runs)
}

/// The report of [`gamma_poisson_check`] for replications drawn elsewhere;
/// `runs[i][j]` is `N_m(t_j)` in replication `i`.
pub fn gamma_poisson_report(
    m: u64,
    a: f64,
    k: usize,
    t_grid: &[f64],
    runs: &[Vec<u64>],
) -> Result<GammaPoissonReport> {
    let sims = runs.len();
    if sims == 0 {
        return Err(Error::InvalidArgument("sims must be >= 1".into()));
    }
    if runs.iter().any(|r| r.len() != t_grid.len()) {
        return Err(Error::InvalidArgument(
            "every run needs one count per grid point".into(),
        ));
    }
    let k_factorial = (1..=k).map(|j| j as f64).product::<f64>();
    let fits = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let column: Vec<u64> = runs.iter().map(|r| r[i]).collect();
            let poisson_mean = a * t.powi(k as i32) / k_factorial;
            let mut histogram = vec![0u64; *column.iter().max().unwrap() as usize + 1];
            for &c in &column {
                histogram[c as usize] += 1;
            }
            let (gof, skipped) = split(chi_square_counts(&histogram, |j| {
                poisson_pmf(poisson_mean, j)
            }))?;
            Ok(PoissonFit {
                t,
                poisson_mean,
                empirical_mean: column.iter().sum::<u64>() as f64 / sims as f64,
                gof,
                skipped,
            })
        })
        .collect::<Result<_>>()?;
    let positive: Vec<usize> = (0..t_grid.len()).filter(|&i| t_grid[i] > 0.0).collect();
    let independence = positive
        .windows(2)
        .map(|w| {
            let pairs: Vec<(usize, usize)> = runs
                .iter()
                .map(|r| (r[w[0]] as usize, (r[w[1]] - r[w[0]]) as usize))
                .collect();
            let (gof, skipped) = split(chi_square_independence(&pairs))?;
            Ok(IncrementIndependence {
                t1: t_grid[w[0]],
                t2: t_grid[w[1]],
                gof,
                skipped,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GammaPoissonReport {
        m,
        a,
        k,
        sims,
        fits,
        independence,
    })
}

fn split(r: Result<GofResult>) -> Result<(Option<GofResult>, Option<String>)> {
    match r {
        Ok(g) => Ok((Some(g), None)),
        Err(Error::TestSkipped(why)) => Ok((None, Some(why))),
        Err(e) => Err(e),
    }
}
