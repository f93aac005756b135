//! The discrete k-cut process.
//!
//! Vertex `v` rings at times `eta[v][1] < ... < eta[v][k]` and is removed at
//! `eta[v][k]`. Its `r`-th ring is a cut (an `r`-record) iff no strict
//! ancestor has been removed yet, i.e. `eta[v][r] < min_{w < v} eta[w][k]`.
//! Because trees are stored in preorder, that ancestor minimum is
//! propagated in a single forward scan.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::gwtree::{ReducedSubtree, RootedTree};
use crate::{Error, Result};

/// Per-vertex Poisson jump times, stored vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockAssignment {
    k: usize,
    jumps: Vec<f64>,
}

impl ClockAssignment {
    /// Builds clocks from exponential inter-arrival times, `k` per vertex.
    pub fn from_increments(k: usize, increments: &[f64]) -> Result<Self> {
        if k == 0 || !increments.len().is_multiple_of(k) {
            return Err(Error::InvalidArgument(format!(
                "{} increments do not split into blocks of k = {k}",
                increments.len()
            )));
        }
        if increments.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidArgument("increments must be positive".into()));
        }
        let mut jumps = Vec::with_capacity(increments.len());
        for block in increments.chunks(k) {
            let mut t = 0.0;
            for x in block {
                t += x;
                jumps.push(t);
            }
        }
        Ok(Self { k, jumps })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.jumps.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    /// All `k` jump times of `v`.
    pub fn jumps(&self, v: usize) -> &[f64] {
        &self.jumps[v * self.k..(v + 1) * self.k]
    }

    /// The `r`-th jump of `v`, `r` in `1..=k`.
    pub fn jump(&self, v: usize, r: usize) -> f64 {
        self.jumps[v * self.k + r - 1]
    }

    pub fn removal_time(&self, v: usize) -> f64 {
        self.jump(v, self.k)
    }

    /// Inter-arrival times recovered from the cumulative jumps.
    pub fn increments(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.jumps.len());
        for block in self.jumps.chunks(self.k) {
            let mut prev = 0.0;
            for &t in block {
                out.push(t - prev);
                prev = t;
            }
        }
        out
    }
}

/// Draws `k` unit exponentials per vertex, vertex by vertex.
pub fn sample_clocks<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<ClockAssignment> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and k >= 1".into()));
    }
    let mut jumps = Vec::with_capacity(n * k);
    for _ in 0..n {
        let mut t = 0.0;
        for _ in 0..k {
            t += draw_exp(rng);
            jumps.push(t);
        }
    }
    Ok(ClockAssignment { k, jumps })
}

fn draw_exp<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = Exp1.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutStatistics {
    pub k: usize,
    /// `X_k(T)`, the number of `(v, r)` record pairs.
    pub total_cuts: u64,
    /// `X_{k,r}(T)` for `r = 1..=k`.
    pub record_counts: Vec<u64>,
    pub root_isolation_time: f64,
}

impl CutStatistics {
    /// Cuts beyond the first ring, `X_k - X_{k,1}`.
    pub fn higher_records(&self) -> u64 {
        self.total_cuts - self.record_counts[0]
    }
}

fn check_sizes(tree: &RootedTree, clocks: &ClockAssignment) -> Result<()> {
    if tree.len() != clocks.len() {
        return Err(Error::ContractViolation(format!(
            "tree has {} vertices but clocks cover {}",
            tree.len(),
            clocks.len()
        )));
    }
    Ok(())
}

/// `A[v] = min over strict ancestors w of eta[w][k]`, `+inf` at the root.
fn ancestor_minima(tree: &RootedTree, clocks: &ClockAssignment) -> Vec<f64> {
    let mut a = vec![f64::INFINITY; tree.len()];
    for v in 1..tree.len() {
        let p = tree.parents()[v];
        a[v] = a[p].min(clocks.removal_time(p));
    }
    a
}

pub fn count_records(tree: &RootedTree, clocks: &ClockAssignment) -> Result<CutStatistics> {
    check_sizes(tree, clocks)?;
    let k = clocks.k();
    let a = ancestor_minima(tree, clocks);
    let mut record_counts = vec![0u64; k];
    for (v, &limit) in a.iter().enumerate() {
        for (r, &t) in clocks.jumps(v).iter().enumerate() {
            if t >= limit {
                break;
            }
            record_counts[r] += 1;
        }
    }
    Ok(CutStatistics {
        k,
        total_cuts: record_counts.iter().sum(),
        record_counts,
        root_isolation_time: clocks.removal_time(tree.root()),
    })
}

/// Draws clocks and counts records in one pass without materializing the
/// clock array. Consumes the random stream exactly as [`sample_clocks`]
/// does, so both routes give identical statistics.
pub fn simulate_cuts<R: Rng + ?Sized>(
    tree: &RootedTree,
    k: usize,
    rng: &mut R,
) -> Result<CutStatistics> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n = tree.len();
    // a[v] holds min(A[v], eta[v][k]) once v is processed; children read a[parent].
    let mut a = vec![f64::INFINITY; n];
    let mut record_counts = vec![0u64; k];
    let mut root_isolation_time = 0.0;
    for v in 0..n {
        let limit = match tree.parent(v) {
            Some(p) => a[p],
            None => f64::INFINITY,
        };
        let mut t = 0.0;
        for count in record_counts.iter_mut() {
            t += draw_exp(rng);
            if t < limit {
                *count += 1;
            }
        }
        a[v] = limit.min(t);
        if v == 0 {
            root_isolation_time = t;
        }
    }
    Ok(CutStatistics {
        k,
        total_cuts: record_counts.iter().sum(),
        record_counts,
        root_isolation_time,
    })
}

/// Separation times of every vertex from the root component.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTrajectory {
    /// `eps_v = min(A[v], eta[v][k])`, ascending.
    pub separation_times: Vec<f64>,
    /// `min(eps_v, eta[v][1])`, ascending.
    pub zero_cut_times: Vec<f64>,
}

pub fn survival_trajectory(
    tree: &RootedTree,
    clocks: &ClockAssignment,
) -> Result<SurvivalTrajectory> {
    check_sizes(tree, clocks)?;
    let a = ancestor_minima(tree, clocks);
    let mut separation_times: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(v, &x)| x.min(clocks.removal_time(v)))
        .collect();
    let mut zero_cut_times: Vec<f64> = separation_times
        .iter()
        .enumerate()
        .map(|(v, &e)| e.min(clocks.jump(v, 1)))
        .collect();
    separation_times.sort_by(f64::total_cmp);
    zero_cut_times.sort_by(f64::total_cmp);
    Ok(SurvivalTrajectory {
        separation_times,
        zero_cut_times,
    })
}

fn fraction_above(sorted: &[f64], x: f64) -> f64 {
    let below = sorted.partition_point(|&t| t <= x);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// `(mu_n(delta t), a_n(delta t) / n)`.
pub fn evaluate_mass(trajectory: &SurvivalTrajectory, t: f64, delta: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need t >= 0 and delta > 0, got {t}, {delta}"
        )));
    }
    let x = delta * t;
    Ok((
        fraction_above(&trajectory.separation_times, x),
        fraction_above(&trajectory.zero_cut_times, x),
    ))
}

/// `delta_n = sigma^(1/k) n^(-1/2k)`, the clock-time scale.
pub fn time_scale(n: usize, sigma: f64, k: f64) -> f64 {
    sigma.powf(1.0 / k) * (n as f64).powf(-0.5 / k)
}

/// `n * delta_n = sigma^(1/k) n^(1 - 1/2k)`, the cut-count scale.
pub fn cut_scale(n: usize, sigma: f64, k: f64) -> f64 {
    n as f64 * time_scale(n, sigma, k)
}

pub fn scaled_cut_statistic(stats: &CutStatistics, n: usize, sigma: f64, k: usize) -> f64 {
    stats.total_cuts as f64 / cut_scale(n, sigma, k as f64)
}

/// Time of the first removal among the members of the reduced subtree.
pub fn first_cut_time_on_reduced_tree(
    tree: &RootedTree,
    clocks: &ClockAssignment,
    reduced: &ReducedSubtree,
) -> Result<f64> {
    check_sizes(tree, clocks)?;
    if reduced.member_flags().len() != tree.len() {
        return Err(Error::ContractViolation(
            "reduced subtree built from another tree".into(),
        ));
    }
    Ok(reduced
        .members()
        .map(|v| clocks.removal_time(v))
        .fold(f64::INFINITY, f64::min))
}
