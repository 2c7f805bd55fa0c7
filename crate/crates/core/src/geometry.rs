//! Points of the standard simplex, effort weights and the weighted path
//! distance `delta` from an outcome to the best vertex.
//!
//! Classes are always ordered best first: vertex 0 is the outcome where every
//! product sits in the top class.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Largest deviation of a frequency vector's sum from 1 that is silently
/// renormalized. Anything further off is rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-9;

/// Exact per-class product counts, best class first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassCount(Vec<u64>);

impl ClassCount {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::TooFewClasses(counts.len()));
        }
        Ok(Self(counts))
    }

    pub fn zeros(classes: usize) -> Self {
        Self(vec![0; classes])
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Adds `other` class by class. Both must have the same number of classes.
    pub fn accumulate(&mut self, other: &[u64]) -> Result<()> {
        check_dims(self.0.len(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += b;
        }
        Ok(())
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.0
    }
}

impl AsRef<[u64]> for ClassCount {
    fn as_ref(&self) -> &[u64] {
        &self.0
    }
}

/// Relative frequencies over the classes: a point of the standard simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentPoint {
    freqs: Vec<f64>,
}

impl AssessmentPoint {
    /// Builds a point from real frequencies. A sum within
    /// [`RENORMALIZE_TOLERANCE`] of 1 is rescaled to 1; anything further off
    /// is an error.
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if freqs.len() < 2 {
            return Err(Error::TooFewClasses(freqs.len()));
        }
        for (index, &value) in freqs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if value < 0.0 {
                return Err(Error::NegativeFrequency { index, value });
            }
        }
        let sum: f64 = freqs.iter().sum();
        if libm::fabs(sum - 1.0) > RENORMALIZE_TOLERANCE {
            return Err(Error::NotNormalized(sum));
        }
        let freqs = if sum == 1.0 {
            freqs
        } else {
            freqs.into_iter().map(|x| x / sum).collect()
        };
        Ok(Self { freqs })
    }

    /// Normalizes exact counts once. Fails when every count is zero.
    pub fn from_counts(counts: &ClassCount) -> Result<Self> {
        let total = counts.total();
        if total == 0 {
            return Err(Error::EmptyCounts);
        }
        let total = total as f64;
        let freqs = counts.as_slice().iter().map(|&c| c as f64 / total).collect();
        Ok(Self { freqs })
    }

    /// The indicator point of class `index` (0-based, best first).
    pub fn vertex(classes: usize, index: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        if index >= classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                found: index + 1,
            });
        }
        let mut freqs = vec![0.0; classes];
        freqs[index] = 1.0;
        Ok(Self { freqs })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn classes(&self) -> usize {
        self.freqs.len()
    }
}

/// Named weight choices for five-class (VQR style) assessments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightPreset {
    /// Every upgrade costs the same.
    A,
    /// Upgrades into the top three classes cost three times the last one.
    B,
    /// The C to B upgrade costs half again as much as the others.
    C,
}

impl WeightPreset {
    pub const ALL: [WeightPreset; 3] = [WeightPreset::A, WeightPreset::B, WeightPreset::C];

    pub fn weights(self) -> EffortWeights {
        let w = match self {
            WeightPreset::A => vec![1.0, 1.0, 1.0, 1.0],
            WeightPreset::B => vec![3.0, 3.0, 3.0, 1.0],
            WeightPreset::C => vec![1.0, 1.0, 1.5, 1.0],
        };
        EffortWeights(w)
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightPreset::A => "A",
            WeightPreset::B => "B",
            WeightPreset::C => "C",
        }
    }
}

impl fmt::Display for WeightPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(WeightPreset::A),
            "B" | "b" => Ok(WeightPreset::B),
            "C" | "c" => Ok(WeightPreset::C),
            other => Err(Error::UnknownPreset(other.into())),
        }
    }
}

/// Positive effort constants; entry `i` is the cost of moving a product from
/// class `i + 1` up to class `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortWeights(Vec<f64>);

impl EffortWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::TooFewClasses(1));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        Ok(Self(weights))
    }

    /// All-ones weights for `classes` classes.
    pub fn unit(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        Ok(Self(vec![1.0; classes - 1]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Number of classes these weights apply to.
    pub fn classes(&self) -> usize {
        self.0.len() + 1
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Returns a copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * factor).collect())
    }

    /// `delta` evaluated directly on integer counts.
    ///
    /// Computed as `sum_i a_i * (products worse than class i) / total`, which
    /// is the same value as [`delta`] on the normalized point. Every caller
    /// comparing aggregates of equal size goes through this so identical
    /// counts always give bit-identical values.
    pub fn delta_counts(&self, counts: &[u64]) -> Result<f64> {
        check_dims(self.classes(), counts.len())?;
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyCounts);
        }
        let mut below = total;
        let mut acc = 0.0;
        for (a, c) in self.0.iter().zip(counts) {
            below -= c;
            acc += a * below as f64;
        }
        Ok(acc / total as f64)
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Weighted path length from `p` to the best vertex.
///
/// `sum(a) - sum_j (a_j + ... + a_n) x_j`. Lies in `[0, sum(a)]`, zero only
/// at the best vertex.
pub fn delta(p: &AssessmentPoint, w: &EffortWeights) -> Result<f64> {
    check_dims(w.classes(), p.classes())?;
    let mut suffix = w.total();
    let mut acc = suffix;
    for (x, a) in p.freqs.iter().zip(&w.0) {
        acc -= suffix * x;
        suffix -= a;
    }
    // rounding can leave a tiny negative at the best vertex
    Ok(if acc < 0.0 { 0.0 } else { acc })
}

/// [`delta`] with every weight equal to one.
pub fn delta_unit(p: &AssessmentPoint) -> f64 {
    let n = p.classes() - 1;
    let mut acc = n as f64;
    for (j, x) in p.freqs[..n].iter().enumerate() {
        acc -= (n - j) as f64 * x;
    }
    if acc < 0.0 {
        0.0
    } else {
        acc
    }
}

/// Length of a displacement in the metric where the edge vectors
/// `e1, e2 - e1, ..., e_{n+1} - e_n` are orthogonal with lengths
/// `1, a_1, ..., a_n`.
fn edge_metric_norm(v: &[f64], w: &[f64]) -> f64 {
    // coordinates in the edge basis are the suffix sums of v
    let mut coeff = 0.0;
    let mut sq = 0.0;
    for j in (0..v.len()).rev() {
        coeff += v[j];
        let len = if j == 0 { 1.0 } else { w[j - 1] };
        sq += coeff * coeff * len * len;
    }
    libm::sqrt(sq)
}

/// Path length of the explicit natural-path construction.
///
/// Each step slides from the current best vertex along its first edge to the
/// slice through the point parallel to the opposite facet, then rescales
/// that slice (a smaller simplex with the remaining weights) back to a
/// standard simplex and repeats. Segment lengths are measured with the edge
/// metric, not read off a formula, so this is an independent check on
/// [`delta`].
pub fn delta_path_oracle(p: &AssessmentPoint, w: &EffortWeights) -> Result<f64> {
    check_dims(w.classes(), p.classes())?;
    let mut point: Vec<f64> = p.freqs.clone();
    let mut weights: &[f64] = &w.0;
    let mut scale = 1.0;
    let mut length = 0.0;
    while point.len() >= 2 {
        let top = point[0];
        let rest: f64 = point[1..].iter().sum();
        // from the best vertex to top * P1 + rest * P2
        let mut segment = vec![0.0; point.len()];
        segment[0] = top - 1.0;
        segment[1] = rest;
        length += scale * edge_metric_norm(&segment, weights);
        if rest <= 0.0 {
            break;
        }
        point = point[1..].iter().map(|x| x / rest).collect();
        weights = &weights[1..];
        scale *= rest;
    }
    Ok(length)
}

/// Partial sums `(x1, x1 + x2, ..., 1)`: the ordered-tuple image of a point.
pub fn cumulative_map(p: &AssessmentPoint) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .freqs
        .iter()
        .map(|x| {
            acc += x;
            libm::fmin(acc, 1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Checks that the unit-weight `delta` equals the L1 distance between the
/// cumulative images of `p` and of the best vertex.
pub fn minkowski_identity_check(p: &AssessmentPoint) -> bool {
    let cumulative = cumulative_map(p);
    let n = p.classes() - 1;
    let l1: f64 = cumulative[..n].iter().map(|s| libm::fabs(s - 1.0)).sum();
    libm::fabs(delta_unit(p) - l1) <= 1e-12
}

/// `|delta(p) - delta(q)|`. Symmetric and satisfies the triangle inequality,
/// but is zero for distinct points on the same level hyperplane.
pub fn pseudo_distance(p: &AssessmentPoint, q: &AssessmentPoint, w: &EffortWeights) -> Result<f64> {
    check_dims(p.classes(), q.classes())?;
    Ok(libm::fabs(delta(p, w)? - delta(q, w)?))
}

/// Whether `p` and `q` lie on the same level set of `delta`, up to `tol`.
pub fn same_score_class(
    p: &AssessmentPoint,
    q: &AssessmentPoint,
    w: &EffortWeights,
    tol: f64,
) -> Result<bool> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::OutOfRange {
            name: "tolerance",
            value: tol,
        });
    }
    Ok(pseudo_distance(p, q, w)? <= tol)
}
