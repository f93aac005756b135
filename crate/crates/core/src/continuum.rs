//! The limit functional `X_k` on the Brownian CRT.
//!
//! The mass of the root component of the Aldous-Pitman fragmentation at
//! time `s` is `(1 + L_s)^-1` with `L` a stable-1/2 subordinator, and
//!
//! ```text
//! X_k = Gamma(k+1)^(1/k) / k * int_0^inf (1 + L_s)^-1 s^(1/k - 1) ds.
//! ```
//!
//! The subordinator lives on a uniform grid; each step integrates
//! `s^(1/k - 1)` exactly and freezes `L` at the left endpoint, which
//! over-estimates the integral because `L` is non-decreasing.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::excursion::SpanningIncrements;
use crate::{Error, Result};

pub const DEFAULT_HORIZON: f64 = 200.0;
pub const DEFAULT_STEP_COUNT: usize = 10_000;
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-4;

/// Horizon extensions allowed before giving up on the tail threshold.
const MAX_EXTENSIONS: usize = 1_000;

/// Stable-1/2 subordinator with `E exp(-lambda L_t) = exp(-t sqrt(2 lambda))`,
/// sampled on the grid `t_j = j * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    step: f64,
    values: Vec<f64>,
}

/// Increment over a step of length `step` given a standard normal draw:
/// the first passage of Brownian motion to level `step` is `step^2 / Z^2`.
pub fn stable_half_increment(step: f64, z: f64) -> f64 {
    step * step / (z * z)
}

fn nonzero_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z != 0.0 {
            return z;
        }
    }
}

pub fn sample_subordinator<R: Rng + ?Sized>(
    step_count: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    if step_count == 0 || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need step count >= 1 and a positive horizon, got {step_count}, {horizon}"
        )));
    }
    let mut path = SubordinatorPath {
        step: horizon / step_count as f64,
        values: Vec::with_capacity(step_count + 1),
    };
    path.values.push(0.0);
    path.extend(step_count, rng);
    Ok(path)
}

impl SubordinatorPath {
    /// A path from explicit grid values, for injecting test inputs.
    pub fn from_values(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || values.len() < 2 || values[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "need step > 0, L_0 = 0 and at least one step".into(),
            ));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvalidArgument(
                "subordinator values must be non-decreasing".into(),
            ));
        }
        Ok(Self { step, values })
    }

    /// Appends `steps` further increments of the same step length.
    pub fn extend<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        let mut l = *self.values.last().unwrap();
        for _ in 0..steps {
            l += stable_half_increment(self.step, nonzero_normal(rng));
            self.values.push(l);
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn step_count(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.step_count() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, j: usize) -> f64 {
        self.step * j as f64
    }

    /// Root-component mass `(1 + L_T)^-1` at the horizon.
    pub fn terminal_mass(&self) -> f64 {
        1.0 / (1.0 + self.values.last().unwrap())
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Sum over steps of `mass(L) * (t_{j+1}^(1/k) - t_j^(1/k))`, with `L`
    /// read at the left (`right = false`) or right end of each step.
    fn riemann_sum(&self, k: f64, right: bool) -> f64 {
        let inv = 1.0 / k;
        let mut prev_pow = 0.0;
        let mut total = 0.0;
        for j in 0..self.step_count() {
            let next_pow = self.time(j + 1).powf(inv);
            let l = if right {
                self.values[j + 1]
            } else {
                self.values[j]
            };
            total += (next_pow - prev_pow) / (1.0 + l);
            prev_pow = next_pow;
        }
        total
    }

    /// Lower and upper Riemann bounds on the truncated `X_k` integral.
    pub fn xk_bracket(&self, k: f64) -> (f64, f64) {
        let c = gamma(k + 1.0).powf(1.0 / k);
        (
            c * self.riemann_sum(k, true),
            c * self.riemann_sum(k, false),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubordinatorConfig {
    pub step_count: usize,
    pub horizon: f64,
    #[serde(default = "default_tail_threshold")]
    pub tail_threshold: f64,
}

fn default_tail_threshold() -> f64 {
    DEFAULT_TAIL_THRESHOLD
}

impl Default for SubordinatorConfig {
    fn default() -> Self {
        Self {
            step_count: DEFAULT_STEP_COUNT,
            horizon: DEFAULT_HORIZON,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuumSample {
    pub k: f64,
    pub value: f64,
    pub truncation_tail: f64,
    pub horizon: f64,
    pub step_count: usize,
}

/// Evaluates `X_k` on one subordinator path with the left-point rule.
pub fn sample_xk(k: f64, path: &SubordinatorPath, tail_threshold: f64) -> Result<ContinuumSample> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("k must be >= 1, got {k}")));
    }
    let achieved = path.terminal_mass();
    if !(achieved < tail_threshold) {
        return Err(Error::HorizonTooShort {
            achieved,
            threshold: tail_threshold,
        });
    }
    let c = gamma(k + 1.0).powf(1.0 / k);
    let horizon = path.horizon();
    Ok(ContinuumSample {
        k,
        value: c * path.riemann_sum(k, false),
        truncation_tail: c * achieved * horizon.powf(1.0 / k),
        horizon,
        step_count: path.step_count(),
    })
}

/// Samples one subordinator path, lengthening it block by block until its
/// terminal mass drops below the tail threshold, and evaluates `X_k` on it
/// for every `k` in `ks`.
pub fn sample_continuum<R: Rng + ?Sized>(
    ks: &[f64],
    config: &SubordinatorConfig,
    rng: &mut R,
) -> Result<Vec<ContinuumSample>> {
    let path = sample_path_to_threshold(config, rng)?;
    ks.iter()
        .map(|&k| sample_xk(k, &path, config.tail_threshold))
        .collect()
}

pub fn sample_path_to_threshold<R: Rng + ?Sized>(
    config: &SubordinatorConfig,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    let mut path = sample_subordinator(config.step_count, config.horizon, rng)?;
    let mut extensions = 0;
    while !(path.terminal_mass() < config.tail_threshold) {
        if extensions == MAX_EXTENSIONS {
            return Err(Error::HorizonTooShort {
                achieved: path.terminal_mass(),
                threshold: config.tail_threshold,
            });
        }
        path.extend(config.step_count, rng);
        extensions += 1;
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundEntry {
    pub k: f64,
    /// `k Gamma(k+1)^(-1/k) X_k`.
    pub lhs: f64,
    /// `k + X_1`.
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
    pub holds: bool,
}

/// Checks `k Gamma(k+1)^(-1/k) X_k <= k + X_1 + tol` for samples that were
/// all computed on one subordinator path (a `k = 1` sample is required).
pub fn check_bound(samples: &[ContinuumSample], tol: f64) -> Result<BoundReport> {
    let x1 = samples
        .iter()
        .find(|s| s.k == 1.0)
        .ok_or_else(|| Error::InvalidArgument("bound check needs the k = 1 sample".into()))?;
    if samples
        .iter()
        .any(|s| s.horizon != x1.horizon || s.step_count != x1.step_count)
    {
        return Err(Error::ContractViolation(
            "samples come from different paths".into(),
        ));
    }
    let entries: Vec<BoundEntry> = samples
        .iter()
        .map(|s| {
            let lhs = s.k * gamma(s.k + 1.0).powf(-1.0 / s.k) * s.value;
            let rhs = s.k + x1.value;
            BoundEntry {
                k: s.k,
                lhs,
                rhs,
                slack: rhs - lhs,
            }
        })
        .collect();
    let holds = entries.iter().all(|e| e.slack >= -tol);
    Ok(BoundReport { entries, holds })
}

/// Separation times from the root of marked points on a reduced CRT.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCutTimes {
    /// One per marked point; `+inf` when the root path has zero length.
    pub separation_times: Vec<f64>,
}

impl ReducedCutTimes {
    pub fn point_count(&self) -> usize {
        self.separation_times.len()
    }

    /// Whether point `r` is never separated from the root.
    pub fn is_never(&self, r: usize) -> bool {
        self.separation_times[r] == f64::INFINITY
    }
}

/// Segments of the reduced tree, stored as height intervals, and each
/// point's root path as a list of segment ids.
struct ReducedGeometry {
    segments: Vec<(f64, f64)>,
    paths: Vec<Vec<usize>>,
}

impl ReducedGeometry {
    fn build(inc: &SpanningIncrements) -> Self {
        let mut geo = Self {
            segments: Vec::new(),
            paths: Vec::with_capacity(inc.len()),
        };
        for r in 0..inc.len() {
            let h = inc.heights[r];
            let (mut path, base) = match inc.attachments[r] {
                None => (Vec::new(), 0.0),
                Some(a) => (geo.prefix(a.onto, a.height), a.height),
            };
            if h > base {
                geo.segments.push((base, h));
                path.push(geo.segments.len() - 1);
            }
            geo.paths.push(path);
        }
        geo
    }

    /// Segments of `path[owner]` below `height`, splitting the one that
    /// straddles it.
    fn prefix(&mut self, owner: usize, height: f64) -> Vec<usize> {
        let straddling = self.paths[owner]
            .iter()
            .copied()
            .find(|&id| self.segments[id].0 < height && height < self.segments[id].1);
        if let Some(id) = straddling {
            let (lo, hi) = self.segments[id];
            self.segments[id] = (lo, height);
            self.segments.push((height, hi));
            let upper = self.segments.len() - 1;
            for path in &mut self.paths {
                if let Some(pos) = path.iter().position(|&x| x == id) {
                    path.insert(pos + 1, upper);
                }
            }
        }
        self.paths[owner]
            .iter()
            .copied()
            .filter(|&id| self.segments[id].1 <= height)
            .collect()
    }
}

/// Draws the separation times of the marked points under the time-changed
/// cut process restricted to their reduced tree: each segment of length `l`
/// gets `E ~ Exp(mean 1/l)` and point `r` is separated at
/// `min over its root path of (k! E)^(1/k)`.
pub fn sample_reduced_cut_times<R: Rng + ?Sized>(
    increments: &SpanningIncrements,
    k: f64,
    rng: &mut R,
) -> Result<ReducedCutTimes> {
    if increments.is_empty() {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    if !(k >= 1.0) {
        return Err(Error::InvalidArgument(format!("k must be >= 1, got {k}")));
    }
    let geo = ReducedGeometry::build(increments);
    let clocks: Vec<f64> = geo
        .segments
        .iter()
        .map(|&(lo, hi)| {
            let e: f64 = Exp1.sample(rng);
            e / (hi - lo)
        })
        .collect();
    let kfact = gamma(k + 1.0);
    let separation_times = geo
        .paths
        .iter()
        .map(|path| {
            let first = path
                .iter()
                .map(|&id| clocks[id])
                .fold(f64::INFINITY, f64::min);
            if first.is_infinite() {
                f64::INFINITY
            } else {
                (kfact * first).powf(1.0 / k)
            }
        })
        .collect();
    Ok(ReducedCutTimes { separation_times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::sample_excursion;
    use crate::streams::derive_stream;
    use approx::assert_abs_diff_eq;

    fn flat_path(horizon: f64, steps: usize) -> SubordinatorPath {
        SubordinatorPath::from_values(horizon / steps as f64, vec![0.0; steps + 1]).unwrap()
    }

    #[test]
    fn increment_formula() {
        assert_abs_diff_eq!(stable_half_increment(0.5, 2.0), 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn one_step_path_is_first_passage() {
        let mut a = derive_stream(1, 0);
        let mut b = derive_stream(1, 0);
        let p = sample_subordinator(1, 3.0, &mut a).unwrap();
        let z: f64 = StandardNormal.sample(&mut b);
        assert_eq!(p.values(), &[0.0, 9.0 / (z * z)]);
    }

    #[test]
    fn invalid_paths_rejected() {
        let mut rng = derive_stream(0, 0);
        assert!(sample_subordinator(0, 1.0, &mut rng).is_err());
        assert!(sample_subordinator(1, 0.0, &mut rng).is_err());
        assert!(SubordinatorPath::from_values(1.0, vec![0.0, 2.0, 1.0]).is_err());
        assert!(SubordinatorPath::from_values(1.0, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn unit_time_law() {
        // L_1 = 1/Z^2, so P(L_1 <= 1) = P(|Z| >= 1) = 0.31731.
        let p = 0.317_310_507_862_914_1;
        let sims = 100_000;
        let mut rng = derive_stream(2, 0);
        let hits = (0..sims)
            .filter(|_| {
                *sample_subordinator(4, 1.0, &mut rng)
                    .unwrap()
                    .values()
                    .last()
                    .unwrap()
                    <= 1.0
            })
            .count() as f64
            / sims as f64;
        let se = (p * (1.0 - p) / sims as f64).sqrt();
        assert!((hits - p).abs() < 3.0 * se, "{hits}");
    }

    #[test]
    fn paths_are_monotone() {
        let p = sample_subordinator(1000, 10.0, &mut derive_stream(3, 0)).unwrap();
        assert_eq!(p.values()[0], 0.0);
        assert!(p.values().windows(2).all(|w| w[1] >= w[0]));
        assert_abs_diff_eq!(p.horizon(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_path_closed_form() {
        for k in [1.0, 1.5, 2.0, 3.0] {
            let p = flat_path(50.0, 100);
            let s = sample_xk(k, &p, 2.0).unwrap();
            let exact = (gamma(k + 1.0) * 50.0).powf(1.0 / k);
            assert_abs_diff_eq!(s.value, exact, epsilon = 1e-10 * exact);
        }
        let s = sample_xk(1.0, &flat_path(7.0, 3), 2.0).unwrap();
        assert_abs_diff_eq!(s.value, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn single_jump_closed_form() {
        // L = c 1{t >= a}, a on the grid: X_k = Gamma(k+1)^(1/k) [a^(1/k) + (T^(1/k) - a^(1/k)) / (1 + c)].
        let (step, steps, c, jump_at) = (0.25, 40usize, 3.0, 12usize);
        let values: Vec<f64> = (0..=steps)
            .map(|j| if j >= jump_at { c } else { 0.0 })
            .collect();
        let p = SubordinatorPath::from_values(step, values).unwrap();
        let (a, t) = (step * jump_at as f64, step * steps as f64);
        for k in [1.0, 2.0, 2.5] {
            let exact = gamma(k + 1.0).powf(1.0 / k)
                * (a.powf(1.0 / k) + (t.powf(1.0 / k) - a.powf(1.0 / k)) / (1.0 + c));
            let got = sample_xk(k, &p, 0.5).unwrap().value;
            assert_abs_diff_eq!(got, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_horizon_reports_achieved_mass() {
        let p = flat_path(1.0, 10);
        match sample_xk(1.0, &p, 1e-4) {
            Err(Error::HorizonTooShort { achieved, .. }) => assert_eq!(achieved, 1.0),
            other => panic!("{other:?}"),
        }
        assert!(sample_xk(0.5, &p, 2.0).is_err());
    }

    #[test]
    fn extension_meets_threshold() {
        let cfg = SubordinatorConfig {
            step_count: 100,
            horizon: 1.0,
            tail_threshold: 1e-4,
        };
        let mut rng = derive_stream(4, 0);
        for _ in 0..50 {
            let p = sample_path_to_threshold(&cfg, &mut rng).unwrap();
            assert!(p.terminal_mass() < 1e-4);
            assert_eq!(p.step_count() % 100, 0);
        }
    }

    #[test]
    fn bracket_tightens_with_refinement() {
        // One fine path of 10^5 steps; coarser grids use its sub-sampled values.
        let fine = sample_subordinator(100_000, 200.0, &mut derive_stream(5, 0)).unwrap();
        let coarsen = |m: usize| {
            let stride = 100_000 / m;
            let v: Vec<f64> = (0..=m).map(|j| fine.values()[j * stride]).collect();
            SubordinatorPath::from_values(200.0 / m as f64, v).unwrap()
        };
        let mut widths = Vec::new();
        for m in [1_000, 10_000, 100_000] {
            let p = coarsen(m);
            for k in [1.0, 2.0] {
                let (lo, hi) = p.xk_bracket(k);
                assert!(lo <= hi);
                if k == 1.0 {
                    widths.push(hi - lo);
                }
            }
        }
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    #[test]
    fn bound_on_flat_path() {
        // k T^(1/k) <= k + T for T >= 1.
        for t in [1.0, 2.0, 10.0, 150.0] {
            let p = flat_path(t, 50);
            let samples: Vec<_> = [1.0, 2.0, 3.0, 4.0]
                .iter()
                .map(|&k| sample_xk(k, &p, 2.0).unwrap())
                .collect();
            let report = check_bound(&samples, 1e-9).unwrap();
            assert!(report.holds);
            for (e, k) in report.entries.iter().zip([1.0f64, 2.0, 3.0, 4.0]) {
                assert_abs_diff_eq!(e.lhs, k * t.powf(1.0 / k), epsilon = 1e-9 * e.lhs);
            }
            assert_abs_diff_eq!(report.entries[0].slack, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bound_on_random_paths() {
        let cfg = SubordinatorConfig {
            step_count: 2_000,
            horizon: 200.0,
            tail_threshold: 1e-4,
        };
        let mut rng = derive_stream(6, 0);
        for _ in 0..100 {
            let s = sample_continuum(&[1.0, 2.0, 3.0, 4.0], &cfg, &mut rng).unwrap();
            let report = check_bound(&s, 1e-6).unwrap();
            assert!(report.holds, "{report:?}");
            assert!(report.entries[1..].iter().all(|e| e.slack > 0.0));
        }
    }

    #[test]
    fn bound_needs_x1() {
        let p = flat_path(4.0, 4);
        let s = vec![sample_xk(2.0, &p, 2.0).unwrap()];
        assert!(check_bound(&s, 0.0).is_err());
    }

    #[test]
    fn increments_halves_are_identically_distributed() {
        use crate::stats::ks_two_sample;
        let p = sample_subordinator(20_000, 20.0, &mut derive_stream(7, 0)).unwrap();
        let inc = p.increments();
        let (a, b) = inc.split_at(10_000);
        let ks = ks_two_sample(a, b).unwrap();
        assert!(ks.p_value > 0.001, "{ks:?}");
    }

    #[test]
    fn single_point_median_separation() {
        // eps^k / k! ~ Exp(rate d): median eps = (k! ln 2 / d)^(1/k).
        let median = (2.0 * 2f64.ln()).sqrt();
        assert_abs_diff_eq!(median, 1.17741, epsilon = 1e-5);
        let inc = SpanningIncrements::from_deltas(vec![1.0]).unwrap();
        let mut rng = derive_stream(8, 0);
        let sims = 40_000;
        let below = (0..sims)
            .filter(|_| {
                sample_reduced_cut_times(&inc, 2.0, &mut rng)
                    .unwrap()
                    .separation_times[0]
                    <= median
            })
            .count() as f64
            / sims as f64;
        assert!(
            (below - 0.5).abs() < 3.0 * (0.25 / sims as f64).sqrt(),
            "{below}"
        );
    }

    #[test]
    fn k1_separation_is_exponential_with_rate_height() {
        let e = sample_excursion(2000, &mut derive_stream(9, 0)).unwrap();
        let s = 0.37;
        let h = e.value_at(s);
        assert_eq!(h, e.crt_distance(0.0, s));
        let inc = e.spanning_increments(&[s]).unwrap();
        let mut rng = derive_stream(9, 1);
        let sims = 50_000;
        let mean = (0..sims)
            .map(|_| {
                sample_reduced_cut_times(&inc, 1.0, &mut rng)
                    .unwrap()
                    .separation_times[0]
            })
            .sum::<f64>()
            / sims as f64;
        let se = 1.0 / h / (sims as f64).sqrt();
        assert!((mean - 1.0 / h).abs() < 3.0 * se, "{mean} vs {}", 1.0 / h);
    }

    #[test]
    fn unit_rate_k1_mean() {
        let inc = SpanningIncrements::from_deltas(vec![1.0]).unwrap();
        let mut rng = derive_stream(10, 0);
        let sims = 50_000;
        let mean = (0..sims)
            .map(|_| {
                sample_reduced_cut_times(&inc, 1.0, &mut rng)
                    .unwrap()
                    .separation_times[0]
            })
            .sum::<f64>()
            / sims as f64;
        assert!((mean - 1.0).abs() < 3.0 / (sims as f64).sqrt());
    }

    #[test]
    fn zero_length_paths_never_separate() {
        let inc = SpanningIncrements::from_deltas(vec![0.0, 0.0]).unwrap();
        let t = sample_reduced_cut_times(&inc, 2.0, &mut derive_stream(0, 0)).unwrap();
        assert!(t.is_never(0) && t.is_never(1));
        assert_eq!(t.point_count(), 2);
    }

    #[test]
    fn joint_survival_of_two_points() {
        // For t1 > t2: P(eps_1 > t1, eps_2 > t2) = exp(-(D1 t1^k + D2 t2^k) / k!).
        let e = sample_excursion(1000, &mut derive_stream(11, 0)).unwrap();
        let inc = e.spanning_increments(&[0.3, 0.6]).unwrap();
        let (d1, d2) = (inc.deltas[0], inc.deltas[1]);
        let k = 2.0;
        let mut rng = derive_stream(11, 1);
        let sims = 100_000;
        let draws: Vec<ReducedCutTimes> = (0..sims)
            .map(|_| sample_reduced_cut_times(&inc, k, &mut rng).unwrap())
            .collect();
        for (t1, t2) in [(1.0, 0.5), (0.8, 0.2), (1.5, 1.0)] {
            let p = (-(d1 * t1 * t1 + d2 * t2 * t2) / 2.0).exp();
            let hits = draws
                .iter()
                .filter(|d| d.separation_times[0] > t1 && d.separation_times[1] > t2)
                .count() as f64
                / sims as f64;
            let se = (p * (1.0 - p) / sims as f64).sqrt();
            assert!((hits - p).abs() < 4.0 * se, "({t1},{t2}): {hits} vs {p}");
        }
    }

    #[test]
    fn geometry_splits_shared_edges() {
        // Point 0 at height 2; point 1 branches off it at height 1 and reaches 3.
        let e = crate::excursion::Excursion::from_grid(vec![0.0, 2.0, 1.0, 3.0, 0.5, 0.0]).unwrap();
        let inc = e.spanning_increments_at(&[1, 3]).unwrap();
        let geo = ReducedGeometry::build(&inc);
        let len = |p: &Vec<usize>| {
            p.iter()
                .map(|&i| geo.segments[i].1 - geo.segments[i].0)
                .sum::<f64>()
        };
        assert_eq!(len(&geo.paths[0]), 2.0);
        assert_eq!(len(&geo.paths[1]), 3.0);
        let shared: Vec<_> = geo.paths[0]
            .iter()
            .filter(|i| geo.paths[1].contains(i))
            .collect();
        assert_eq!(shared.len(), 1);
        assert_eq!(geo.segments[*shared[0]], (0.0, 1.0));
    }

    #[test]
    fn separation_is_monotone_along_nested_paths() {
        // Point 1 sits on the root path of point 0, so it can only separate later.
        let e = sample_excursion(500, &mut derive_stream(12, 0)).unwrap();
        let mut rng = derive_stream(12, 1);
        for _ in 0..200 {
            let i = rng.random_range(1..500);
            let l = rng.random_range(0..i);
            // The argmin of e over [l, i] codes an ancestor of i.
            let j = (l..=i)
                .min_by(|&a, &b| e.values()[a].total_cmp(&e.values()[b]))
                .unwrap();
            let inc = e.spanning_increments_at(&[i, j]).unwrap();
            assert_eq!(inc.deltas[1], 0.0);
            let t = sample_reduced_cut_times(&inc, 2.0, &mut rng).unwrap();
            assert!(t.separation_times[0] <= t.separation_times[1]);
        }
    }
}
