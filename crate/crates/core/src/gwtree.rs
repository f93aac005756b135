//! Critical offspring laws, exact sampling of Galton-Watson trees
//! conditioned on their size, and reduced subtrees spanned by marked
//! vertices.
//!
//! Trees are stored with vertices numbered in depth-first preorder, so a
//! parent always has a smaller index than its children and ancestor
//! quantities can be propagated by one forward scan.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parent entry of the root.
pub const NO_PARENT: usize = usize::MAX;

/// Rejection rounds allowed before a size is declared unattainable.
pub const MAX_REJECTION_ROUNDS: u64 = 1_000_000;

const PMF_SUM_TOL: f64 = 1e-12;
const MEAN_TOL: f64 = 1e-9;
const DEFAULT_TRUNCATION: usize = 64;

/// How an offspring law is named in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LawSpec {
    Binary,
    GeometricHalf,
    #[serde(rename = "poisson-1-truncated")]
    PoissonTruncated {
        #[serde(default = "default_cutoff")]
        cutoff: usize,
    },
    Explicit {
        pmf: Vec<f64>,
    },
}

fn default_cutoff() -> usize {
    DEFAULT_TRUNCATION
}

/// A critical offspring distribution with finite positive variance.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    pmf: Vec<f64>,
    mean: f64,
    sigma: f64,
    truncation_error: f64,
}

impl OffspringLaw {
    /// Validates an explicit probability vector `pmf[p] = P(xi = p)`.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        Self::with_truncation(pmf, 0.0)
    }

    fn with_truncation(mut pmf: Vec<f64>, truncation_error: f64) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidLaw(
                "pmf entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidLaw(format!("pmf sums to {total}, not 1")));
        }
        while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
            pmf.pop();
        }
        let mean: f64 = pmf.iter().enumerate().map(|(p, x)| p as f64 * x).sum();
        if (mean - 1.0).abs() > MEAN_TOL {
            return Err(Error::InvalidLaw(format!(
                "mean {mean} is not 1 (law is not critical)"
            )));
        }
        let second: f64 = pmf
            .iter()
            .enumerate()
            .map(|(p, x)| p as f64 * (p as f64 - 1.0) * x)
            .sum();
        if !(second.is_finite() && second > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "sigma^2 = {second} must be positive"
            )));
        }
        Ok(Self {
            pmf,
            mean,
            sigma: second.sqrt(),
            truncation_error,
        })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `sigma = (sum p(p-1) xi(p))^(1/2)`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Probability mass discarded when an infinite-support law was truncated.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    /// The gcd of the positive offspring values in the support. Trees of
    /// size `n` need `period | n - 1`.
    pub fn period(&self) -> usize {
        self.pmf
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &x)| x > 0.0)
            .fold(0, |g, (p, _)| gcd(g, p))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Truncates an infinite pmf at `cutoff`, renormalizes, and records the
/// discarded tail mass (summed from the far tail, not as `1 - head`).
fn truncated(term: impl Fn(usize) -> f64, cutoff: usize) -> Result<OffspringLaw> {
    let head: Vec<f64> = (0..=cutoff).map(&term).collect();
    let tail: f64 = (cutoff + 1..cutoff + 200).rev().map(&term).sum();
    let total: f64 = head.iter().sum();
    let pmf = head.into_iter().map(|x| x / total).collect();
    OffspringLaw::with_truncation(pmf, tail)
}

pub fn make_offspring_law(spec: &LawSpec) -> Result<OffspringLaw> {
    match spec {
        LawSpec::Binary => OffspringLaw::from_pmf(vec![0.5, 0.0, 0.5]),
        LawSpec::GeometricHalf => truncated(|p| 0.5f64.powi(p as i32 + 1), DEFAULT_TRUNCATION),
        LawSpec::PoissonTruncated { cutoff } => {
            if *cutoff < 2 {
                return Err(Error::InvalidLaw(
                    "Poisson cutoff must be at least 2".into(),
                ));
            }
            truncated(
                |p| {
                    let ln_fact: f64 = (1..=p).map(|j| (j as f64).ln()).sum();
                    (-1.0 - ln_fact).exp()
                },
                *cutoff,
            )
        }
        LawSpec::Explicit { pmf } => OffspringLaw::from_pmf(pmf.clone()),
    }
}

/// A rooted plane tree with vertices in depth-first preorder (root = 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    parent: Vec<usize>,
    child_offsets: Vec<usize>,
    children: Vec<usize>,
}

impl RootedTree {
    /// Builds a tree from parent indices; `parent[0]` must be [`NO_PARENT`]
    /// and every other vertex must have a parent with a smaller index.
    pub fn from_parents(parent: Vec<usize>) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "tree needs at least one vertex".into(),
            ));
        }
        if parent[0] != NO_PARENT {
            return Err(Error::InvalidArgument("vertex 0 must be the root".into()));
        }
        for (v, &p) in parent.iter().enumerate().skip(1) {
            if p >= v {
                return Err(Error::InvalidArgument(format!(
                    "parent of {v} is {p}; parents must precede children"
                )));
            }
        }
        let mut degree = vec![0usize; n];
        for &p in &parent[1..] {
            degree[p] += 1;
        }
        let mut child_offsets = Vec::with_capacity(n + 1);
        child_offsets.push(0);
        for d in &degree {
            child_offsets.push(child_offsets.last().unwrap() + d);
        }
        let mut fill = child_offsets[..n].to_vec();
        let mut children = vec![0usize; n - 1];
        for (v, &p) in parent.iter().enumerate().skip(1) {
            children[fill[p]] = v;
            fill[p] += 1;
        }
        Ok(Self {
            parent,
            child_offsets,
            children,
        })
    }

    /// Builds the tree whose preorder offspring counts are `degrees`.
    /// The sequence must be a valid Lukasiewicz word.
    pub fn from_preorder_degrees(degrees: &[usize]) -> Result<Self> {
        let n = degrees.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty degree sequence".into()));
        }
        let mut parent = vec![NO_PARENT; n];
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (v, &d) in degrees.iter().enumerate() {
            if v > 0 {
                let top = open.last_mut().ok_or_else(|| {
                    Error::InvalidArgument("degree sequence closes before the end".into())
                })?;
                parent[v] = top.0;
                top.1 -= 1;
                if top.1 == 0 {
                    open.pop();
                }
            }
            if d > 0 {
                open.push((v, d));
            }
        }
        if !open.is_empty() {
            return Err(Error::InvalidArgument(
                "degree sequence leaves open slots".into(),
            ));
        }
        Self::from_parents(parent)
    }

    pub fn single_vertex() -> Self {
        Self::from_parents(vec![NO_PARENT]).unwrap()
    }

    /// A path of `n` vertices, `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let parent = (0..n)
            .map(|v| if v == 0 { NO_PARENT } else { v - 1 })
            .collect();
        Self::from_parents(parent).unwrap()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[self.child_offsets[v]..self.child_offsets[v + 1]]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.child_offsets[v + 1] - self.child_offsets[v]
    }

    /// Vertices in depth-first preorder, via an explicit stack.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root()];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.children(v).iter().rev());
        }
        order
    }

    /// Offspring counts read in preorder.
    pub fn preorder_degrees(&self) -> Vec<usize> {
        self.preorder()
            .into_iter()
            .map(|v| self.out_degree(v))
            .collect()
    }

    /// The Lukasiewicz walk `S_j = sum_{i<j} (c_i - 1)`, `j = 0..=n`.
    pub fn lukasiewicz_path(&self) -> Vec<i64> {
        let mut walk = Vec::with_capacity(self.len() + 1);
        let mut s = 0i64;
        walk.push(s);
        for d in self.preorder_degrees() {
            s += d as i64 - 1;
            walk.push(s);
        }
        walk
    }

    /// Number of vertices on the root path of `v`, both ends included.
    pub fn height(&self, mut v: usize) -> usize {
        let mut h = 1;
        while let Some(p) = self.parent(v) {
            v = p;
            h += 1;
        }
        h
    }

    /// One CSV line: `n` followed by the parent of every vertex (root `-1`).
    pub fn to_parent_csv(&self) -> String {
        let mut line = self.len().to_string();
        for &p in &self.parent {
            line.push(',');
            if p == NO_PARENT {
                line.push_str("-1");
            } else {
                line.push_str(&p.to_string());
            }
        }
        line
    }
}

/// Draws multinomial counts `(N_0, ..., N_P)` of `n` i.i.d. offspring values
/// by sequential binomial splitting.
fn multinomial_counts<R: Rng + ?Sized>(pmf: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; pmf.len()];
    let mut remaining = n;
    let mut residual = 1.0f64;
    for (p, &mass) in pmf.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p + 1 == pmf.len() || residual <= mass {
            counts[p] = remaining;
            break;
        }
        let prob = (mass / residual).clamp(0.0, 1.0);
        let c = if prob == 0.0 {
            0
        } else {
            Binomial::new(remaining, prob).unwrap().sample(rng)
        };
        counts[p] = c;
        remaining -= c;
        residual -= mass;
    }
    counts
}

/// Rotates a degree sequence with `sum (c_i - 1) = -1` so its Lukasiewicz
/// walk stays non-negative until the final step: the rotation starts right
/// after the first index where the walk attains its minimum.
pub fn cycle_lemma_rotate(degrees: &mut [usize]) {
    let mut s = 0i64;
    let mut min = i64::MAX;
    let mut argmin = 0;
    for (i, &d) in degrees.iter().enumerate() {
        s += d as i64 - 1;
        if s < min {
            min = s;
            argmin = i;
        }
    }
    degrees.rotate_left((argmin + 1) % degrees.len());
}

/// Samples a Galton-Watson tree with offspring law `law` conditioned to have
/// exactly `n` vertices.
///
/// Offspring counts of `n` i.i.d. vertices are drawn as a multinomial vector
/// and rejected until they sum to `n - 1`; the accepted multiset is shuffled
/// uniformly and rotated by the cycle lemma into a valid preorder encoding.
pub fn sample_conditioned_gw<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
) -> Result<RootedTree> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "tree size must be at least 1".into(),
        ));
    }
    if n == 1 {
        return Ok(RootedTree::single_vertex());
    }
    let period = law.period();
    if period == 0 || !(n - 1).is_multiple_of(period) {
        return Err(Error::UnattainableSize { n });
    }
    let target = (n - 1) as u64;
    for _ in 0..MAX_REJECTION_ROUNDS {
        let counts = multinomial_counts(law.pmf(), n as u64, rng);
        let total: u64 = counts.iter().enumerate().map(|(p, &c)| p as u64 * c).sum();
        if total != target {
            continue;
        }
        let mut degrees = Vec::with_capacity(n);
        for (p, &c) in counts.iter().enumerate() {
            degrees.extend(std::iter::repeat_n(p, c as usize));
        }
        degrees.shuffle(rng);
        cycle_lemma_rotate(&mut degrees);
        return RootedTree::from_preorder_degrees(&degrees);
    }
    Err(Error::UnattainableSize { n })
}

/// The subtree spanned by the root and a set of marked vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedSubtree {
    member: Vec<bool>,
    vertex_count: usize,
    marked: Vec<usize>,
}

impl ReducedSubtree {
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn is_member(&self, v: usize) -> bool {
        self.member[v]
    }

    pub fn member_flags(&self) -> &[bool] {
        &self.member
    }

    pub fn marked_points(&self) -> &[usize] {
        &self.marked
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
    }

    /// `(sigma / sqrt(n)) * #R`, the discrete proxy for the length of the
    /// reduced continuum tree.
    pub fn scaled_length(&self, sigma: f64) -> f64 {
        sigma / (self.member.len() as f64).sqrt() * self.vertex_count as f64
    }
}

pub fn reduced_subtree(tree: &RootedTree, points: &[usize]) -> Result<ReducedSubtree> {
    let n = tree.len();
    if let Some(&bad) = points.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidArgument(format!(
            "vertex {bad} out of range for n = {n}"
        )));
    }
    let mut member = vec![false; n];
    member[tree.root()] = true;
    let mut vertex_count = 1;
    for &start in points {
        let mut v = start;
        while !member[v] {
            member[v] = true;
            vertex_count += 1;
            v = tree.parent[v];
        }
    }
    Ok(ReducedSubtree {
        member,
        vertex_count,
        marked: points.to_vec(),
    })
}

pub fn scaled_reduced_length(tree: &RootedTree, points: &[usize], sigma: f64) -> Result<f64> {
    Ok(reduced_subtree(tree, points)?.scaled_length(sigma))
}
