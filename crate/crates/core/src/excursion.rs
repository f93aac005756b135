//! Grid-discretized Brownian excursion coding the Brownian CRT.
//!
//! Values are twice a standard normalized excursion, so that
//! `d(s, t) = e_s + e_t - 2 b(s, t)` with `b` the range minimum is the CRT
//! distance and `e_s` is the height of the point coded by `s`.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rmq::SparseTable;
use crate::{Error, Result};

/// Ratio between the coding function and a standard normalized excursion.
pub const EXCURSION_SCALE: f64 = 2.0;

/// A Brownian bridge from 0 to 0 on the grid `i / N`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianBridge {
    values: Vec<f64>,
}

impl BrownianBridge {
    pub fn sample<R: Rng + ?Sized>(grid_size: usize, rng: &mut R) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::InvalidArgument(
                "grid size must be at least 2".into(),
            ));
        }
        let sd = (1.0 / grid_size as f64).sqrt();
        let mut walk = Vec::with_capacity(grid_size + 1);
        walk.push(0.0);
        let mut w = 0.0;
        for _ in 0..grid_size {
            let z: f64 = StandardNormal.sample(rng);
            w += sd * z;
            walk.push(w);
        }
        let end = w;
        let n = grid_size as f64;
        let values = walk
            .into_iter()
            .enumerate()
            .map(|(i, x)| x - i as f64 / n * end)
            .collect::<Vec<_>>();
        let mut bridge = Self { values };
        bridge.values[grid_size] = 0.0;
        Ok(bridge)
    }

    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Halves the mesh by drawing each midpoint from its conditional law
    /// given the two neighbours, so the coarse values are kept exactly.
    pub fn refine<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let n = self.grid_size();
        let sd = (0.25 / n as f64).sqrt();
        let mut values = Vec::with_capacity(2 * n + 1);
        for w in self.values.windows(2) {
            values.push(w[0]);
            let z: f64 = StandardNormal.sample(rng);
            values.push(0.5 * (w[0] + w[1]) + sd * z);
        }
        values.push(0.0);
        Self { values }
    }

    /// Vervaat transform: cyclically shift the bridge to start at its
    /// minimum, then scale by [`EXCURSION_SCALE`].
    pub fn vervaat(&self) -> Excursion {
        let n = self.grid_size();
        let cyc = &self.values[..n];
        let (m, &low) = cyc
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let mut values: Vec<f64> = (0..n)
            .map(|i| EXCURSION_SCALE * (cyc[(m + i) % n] - low))
            .collect();
        values.push(0.0);
        Excursion::from_trusted(values)
    }
}

/// Excursion values on the uniform grid `s_i = i / N`.
#[derive(Debug)]
pub struct Excursion {
    values: Vec<f64>,
    rmq: OnceLock<SparseTable>,
}

impl Clone for Excursion {
    fn clone(&self) -> Self {
        Self {
            values: self.values.clone(),
            rmq: self.rmq.clone(),
        }
    }
}

impl PartialEq for Excursion {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

pub fn sample_excursion<R: Rng + ?Sized>(grid_size: usize, rng: &mut R) -> Result<Excursion> {
    Ok(BrownianBridge::sample(grid_size, rng)?.vervaat())
}

impl Excursion {
    fn from_trusted(values: Vec<f64>) -> Self {
        Self {
            values,
            rmq: OnceLock::new(),
        }
    }

    /// Wraps arbitrary non-negative grid values. Endpoints need not vanish,
    /// which lets tests inject constant or monotone coding functions.
    pub fn from_grid(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidArgument(
                "need at least 3 grid values (N >= 2)".into(),
            ));
        }
        if values.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument(
                "grid values must be finite and non-negative".into(),
            ));
        }
        Ok(Self::from_trusted(values))
    }

    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether this is a proper excursion: zero at both ends, non-negative.
    pub fn is_normalized(&self) -> bool {
        self.values[0] == 0.0 && *self.values.last().unwrap() == 0.0
    }

    /// Grid index nearest to `s`, clamped to `[0, N]`.
    pub fn index_of(&self, s: f64) -> usize {
        let n = self.grid_size();
        ((s * n as f64).round().max(0.0) as usize).min(n)
    }

    pub fn value_at(&self, s: f64) -> f64 {
        self.values[self.index_of(s)]
    }

    /// Builds the range-minimum table now instead of on first query.
    pub fn prepare(&self) -> &SparseTable {
        self.rmq.get_or_init(|| SparseTable::new(&self.values))
    }

    pub fn range_min_index(&self, i: usize, j: usize) -> f64 {
        self.prepare().min(i, j)
    }

    /// `b(s, t)`: minimum of the grid values between the snapped indices.
    pub fn range_min(&self, s: f64, t: f64) -> f64 {
        self.range_min_index(self.index_of(s), self.index_of(t))
    }

    pub fn crt_distance(&self, s: f64, t: f64) -> f64 {
        let (i, j) = (self.index_of(s), self.index_of(t));
        self.values[i] + self.values[j] - 2.0 * self.range_min_index(i, j)
    }

    /// `int_0^1 e_s ds` by the trapezoid rule.
    pub fn area(&self) -> f64 {
        let n = self.grid_size() as f64;
        let inner: f64 = self.values[1..self.values.len() - 1].iter().sum();
        (inner + 0.5 * (self.values[0] + self.values[self.values.len() - 1])) / n
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn spanning_increments(&self, points: &[f64]) -> Result<SpanningIncrements> {
        let indices: Vec<usize> = points.iter().map(|&s| self.index_of(s)).collect();
        let mut inc = self.spanning_increments_at(&indices)?;
        inc.points = points.to_vec();
        Ok(inc)
    }

    /// Spanning increments for points given directly as grid indices.
    pub fn spanning_increments_at(&self, indices: &[usize]) -> Result<SpanningIncrements> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("need at least one point".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i > self.grid_size()) {
            return Err(Error::InvalidArgument(format!(
                "grid index {bad} out of range"
            )));
        }
        let n = self.grid_size() as f64;
        let mut deltas = Vec::with_capacity(indices.len());
        let mut heights = Vec::with_capacity(indices.len());
        let mut attachments = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            let h = self.values[i];
            heights.push(h);
            if r == 0 {
                deltas.push(h);
                attachments.push(None);
                continue;
            }
            let mut best = (0usize, f64::NEG_INFINITY);
            for (p, &j) in indices[..r].iter().enumerate() {
                let b = self.range_min_index(i, j);
                if b > best.1 {
                    best = (p, b);
                }
            }
            let raw = h - best.1;
            debug_assert!(raw > -1e-9, "negative spanning increment {raw}");
            deltas.push(raw.max(0.0));
            attachments.push(Some(Attachment {
                onto: best.0,
                height: best.1,
            }));
        }
        Ok(SpanningIncrements {
            points: indices.iter().map(|&i| i as f64 / n).collect(),
            deltas,
            heights,
            attachments,
        })
    }
}

/// Where point `r` joins the subtree spanned by the earlier points: at the
/// given height along the root path of point `onto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachment {
    pub onto: usize,
    pub height: f64,
}

/// Lengths added to the reduced tree as points are inserted one by one.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningIncrements {
    pub points: Vec<f64>,
    /// `Delta_1 = e_{s_1}`, `Delta_r = e_{s_r} - max_{i<r} b(s_i, s_r)`.
    pub deltas: Vec<f64>,
    /// `e_{s_r}`, the distance of point `r` from the root.
    pub heights: Vec<f64>,
    pub attachments: Vec<Option<Attachment>>,
}

impl SpanningIncrements {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Total length of the reduced tree spanned by all points.
    pub fn total_length(&self) -> f64 {
        self.deltas.iter().sum()
    }

    /// Builds increments from explicit lengths, with point `r` hanging off
    /// the tip of point `r - 1`. Used to inject test inputs.
    pub fn from_deltas(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidArgument(
                "deltas must be non-empty and non-negative".into(),
            ));
        }
        let mut heights = Vec::with_capacity(deltas.len());
        let mut attachments = Vec::with_capacity(deltas.len());
        let mut h = 0.0;
        for (r, d) in deltas.iter().enumerate() {
            let base = h;
            h += d;
            heights.push(h);
            attachments.push(if r == 0 {
                None
            } else {
                Some(Attachment {
                    onto: r - 1,
                    height: base,
                })
            });
        }
        Ok(Self {
            points: vec![f64::NAN; deltas.len()],
            deltas,
            heights,
            attachments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::derive_stream;
    use approx::assert_abs_diff_eq;

    fn scan_min(e: &Excursion, i: usize, j: usize) -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        e.values()[lo..=hi]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn endpoints_vanish_and_values_are_nonnegative() {
        let mut rng = derive_stream(1, 0);
        for n in [2usize, 3, 10, 1000] {
            let e = sample_excursion(n, &mut rng).unwrap();
            assert_eq!(e.grid_size(), n);
            assert_eq!(e.values()[0], 0.0);
            assert_eq!(e.values()[n], 0.0);
            assert!(e.values().iter().all(|&x| x >= 0.0));
            assert!(e.is_normalized());
        }
        assert!(sample_excursion(1, &mut rng).is_err());
    }

    #[test]
    fn scale_constant_is_two() {
        assert_eq!(EXCURSION_SCALE, 2.0);
        let bridge = BrownianBridge {
            values: vec![0.0, -0.5, 0.25, 0.0],
        };
        let e = bridge.vervaat();
        // Rotated at index 1: (-0.5, 0.25, 0.0) - (-0.5) = (0, 0.75, 0.5), times 2.
        assert_eq!(e.values(), &[0.0, 1.5, 1.0, 0.0]);
    }

    #[test]
    fn refinement_keeps_coarse_values() {
        let mut rng = derive_stream(2, 0);
        let b = BrownianBridge::sample(64, &mut rng).unwrap();
        let f = b.refine(&mut rng);
        assert_eq!(f.grid_size(), 128);
        for i in 0..=64 {
            assert_eq!(f.values()[2 * i], b.values()[i]);
        }
    }

    #[test]
    fn max_and_area_means() {
        // For a standard excursion E[max] = sqrt(pi/2) and E[area] = sqrt(pi/8).
        // The grid minimum of the bridge overshoots the continuous one by
        // about 0.5826 sqrt(1/N), which lowers the whole excursion (times
        // the scale); that offset is added back to both means.
        let samples = 10_000;
        let n = 10_000;
        let mut rng = derive_stream(3, 0);
        let mut maxes = Vec::with_capacity(samples);
        let mut areas = Vec::with_capacity(samples);
        for _ in 0..samples {
            let e = sample_excursion(n, &mut rng).unwrap();
            maxes.push(e.max());
            areas.push(e.area());
        }
        let stat = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, (var / v.len() as f64).sqrt())
        };
        let (m, se) = stat(&maxes);
        let corrected = m + EXCURSION_SCALE * 0.5826 / (n as f64).sqrt();
        let target = EXCURSION_SCALE * (std::f64::consts::PI / 2.0).sqrt();
        assert_abs_diff_eq!(target, 2.5066, epsilon = 1e-4);
        assert!(
            (corrected - target).abs() < 3.0 * se,
            "max mean {corrected} vs {target}"
        );
        let (m, se) = stat(&areas);
        let m = m + EXCURSION_SCALE * 0.5826 / (n as f64).sqrt();
        let target = EXCURSION_SCALE * (std::f64::consts::PI / 8.0).sqrt();
        assert!((m - target).abs() < 3.0 * se, "area mean {m} vs {target}");
    }

    #[test]
    fn range_min_cases() {
        let e = Excursion::from_grid(vec![0.0, 1.0, 2.0, 3.0, 1.5, 0.0]).unwrap();
        assert_eq!(e.range_min(0.4, 0.4), e.value_at(0.4));
        // Increasing on [0.2, 0.6]: minimum at the left end.
        assert_eq!(e.range_min(0.2, 0.6), 1.0);
        assert_eq!(e.range_min(0.6, 0.2), 1.0);
        assert_eq!(e.range_min(0.6, 0.8), 1.5);
    }

    #[test]
    fn range_min_matches_scan_on_random_excursions() {
        let mut rng = derive_stream(4, 0);
        let e = sample_excursion(5000, &mut rng).unwrap();
        for _ in 0..2000 {
            let (s, t): (f64, f64) = (rng.random(), rng.random());
            let got = e.range_min(s, t);
            assert_eq!(got, scan_min(&e, e.index_of(s), e.index_of(t)));
            assert!(got <= e.value_at(s).min(e.value_at(t)));
        }
    }

    #[test]
    fn crt_distance_is_a_pseudometric() {
        let mut rng = derive_stream(5, 0);
        let e = sample_excursion(4096, &mut rng).unwrap();
        for _ in 0..1000 {
            let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            assert_eq!(e.crt_distance(a, a), 0.0);
            assert_eq!(e.crt_distance(a, b), e.crt_distance(b, a));
            assert!(e.crt_distance(a, b) >= 0.0);
            assert!(e.crt_distance(a, c) <= e.crt_distance(a, b) + e.crt_distance(b, c) + 1e-12);
        }
        // b(s, t) attained at t: distance is the height difference.
        let e = Excursion::from_grid(vec![0.0, 3.0, 1.0, 2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(e.crt_distance(0.25, 0.5), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.crt_distance(0.0, 0.25), 3.0, epsilon = 1e-15);
    }

    #[test]
    fn spanning_increments_small_cases() {
        let mut rng = derive_stream(6, 0);
        let e = sample_excursion(1000, &mut rng).unwrap();
        let one = e.spanning_increments(&[0.3]).unwrap();
        assert_eq!(one.deltas, vec![e.value_at(0.3)]);
        let two = e.spanning_increments(&[0.3, 0.3]).unwrap();
        assert_eq!(two.deltas[1], 0.0);
        assert!(e.spanning_increments(&[]).is_err());
    }

    fn brute_increments(e: &Excursion, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(r, &i)| {
                let h = e.values()[i];
                let m = idx[..r]
                    .iter()
                    .map(|&j| scan_min(e, i, j))
                    .fold(f64::NEG_INFINITY, f64::max);
                if r == 0 {
                    h
                } else {
                    h - m
                }
            })
            .collect()
    }

    #[test]
    fn spanning_increments_match_brute_force() {
        let mut rng = derive_stream(7, 0);
        let e = sample_excursion(2000, &mut rng).unwrap();
        for _ in 0..500 {
            let s: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let inc = e.spanning_increments(&s).unwrap();
            let idx: Vec<usize> = s.iter().map(|&x| e.index_of(x)).collect();
            assert_eq!(inc.deltas, brute_increments(&e, &idx));
            assert!(inc.deltas.iter().all(|&d| d >= 0.0));
        }
    }

    #[test]
    fn total_length_is_order_independent() {
        let mut rng = derive_stream(8, 0);
        let e = sample_excursion(3000, &mut rng).unwrap();
        for _ in 0..300 {
            let mut s: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let a = e.spanning_increments(&s).unwrap().total_length();
            s.reverse();
            s.swap(0, 2);
            let b = e.spanning_increments(&s).unwrap().total_length();
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn partial_sums_are_pairwise_spanning_lengths() {
        // Two points: length = e_1 + e_2 - b(s_1, s_2).
        let mut rng = derive_stream(9, 0);
        let e = sample_excursion(1000, &mut rng).unwrap();
        for _ in 0..200 {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let inc = e.spanning_increments(&[a, b]).unwrap();
            let direct = e.value_at(a) + e.value_at(b) - e.range_min(a, b);
            assert_abs_diff_eq!(inc.total_length(), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn refinement_diagnostic_shrinks() {
        // Change in the spanned length under N -> 2N, averaged over paths.
        let pts = [0.13, 0.37, 0.52, 0.81];
        let mean_change = |n: usize| {
            let mut rng = derive_stream(10, n as u64);
            let mut total = 0.0;
            for _ in 0..200 {
                let b = BrownianBridge::sample(n, &mut rng).unwrap();
                let fine = b.refine(&mut rng);
                let l0 = b
                    .vervaat()
                    .spanning_increments(&pts)
                    .unwrap()
                    .total_length();
                let l1 = fine
                    .vervaat()
                    .spanning_increments(&pts)
                    .unwrap()
                    .total_length();
                total += (l1 - l0).abs();
            }
            total / 200.0
        };
        let coarse = mean_change(64);
        let fine = mean_change(4096);
        assert!(fine < coarse, "{fine} vs {coarse}");
    }

    #[test]
    fn from_grid_validation() {
        assert!(Excursion::from_grid(vec![0.0, 1.0]).is_err());
        assert!(Excursion::from_grid(vec![0.0, -1.0, 0.0]).is_err());
        let c = Excursion::from_grid(vec![2.0; 5]).unwrap();
        assert!(!c.is_normalized());
        assert_eq!(c.range_min(0.1, 0.9), 2.0);
    }

    #[test]
    fn injected_deltas_form_a_path() {
        let inc = SpanningIncrements::from_deltas(vec![1.0, 0.5, 2.0]).unwrap();
        assert_eq!(inc.heights, vec![1.0, 1.5, 3.5]);
        assert_eq!(
            inc.attachments[2],
            Some(Attachment {
                onto: 1,
                height: 1.5
            })
        );
        assert!(SpanningIncrements::from_deltas(vec![]).is_err());
    }
}
