//! Stratified populations, aggregate composition profiles and class score
//! scales.
//!
//! Counts are the single source of truth. Integrity violations (a row whose
//! class counts do not add up to its expected total, a profile demanding more
//! than a stratum holds) are reported, never patched.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{AssessmentPoint, ClassCount};

/// Products per class for one stratum, summed over all institutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumPopulation {
    id: String,
    counts: ClassCount,
    expected_total: u64,
}

impl StratumPopulation {
    /// Fails unless the class counts add up to `expected_total`.
    pub fn new(id: impl Into<String>, counts: ClassCount, expected_total: u64) -> Result<Self> {
        let id = id.into();
        if expected_total == 0 {
            return Err(Error::ZeroTotal(id));
        }
        let sum = counts.total();
        if sum != expected_total {
            return Err(Error::RowSumMismatch {
                stratum: id,
                sum,
                expected: expected_total,
            });
        }
        Ok(Self {
            id,
            counts,
            expected_total,
        })
    }

    /// Uses the class-count sum as the total.
    pub fn from_counts(id: impl Into<String>, counts: ClassCount) -> Result<Self> {
        let total = counts.total();
        Self::new(id, counts, total)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn counts(&self) -> &ClassCount {
        &self.counts
    }

    pub fn expected_total(&self) -> u64 {
        self.expected_total
    }
}

/// The sampling universe: every stratum of one area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AreaPopulation {
    id: String,
    class_labels: Vec<String>,
    strata: Vec<StratumPopulation>,
}

impl AreaPopulation {
    pub fn new(
        id: impl Into<String>,
        class_labels: Vec<String>,
        strata: Vec<StratumPopulation>,
    ) -> Result<Self> {
        if strata.is_empty() {
            return Err(Error::NoStrata);
        }
        if class_labels.len() < 2 {
            return Err(Error::TooFewClasses(class_labels.len()));
        }
        for (i, s) in strata.iter().enumerate() {
            if s.counts.classes() != class_labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: class_labels.len(),
                    found: s.counts.classes(),
                });
            }
            if strata[..i].iter().any(|t| t.id == s.id) {
                return Err(Error::DuplicateStratum(s.id.clone()));
            }
        }
        Ok(Self {
            id: id.into(),
            class_labels,
            strata,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn strata(&self) -> &[StratumPopulation] {
        &self.strata
    }

    /// Position and data of the stratum called `id`.
    pub fn stratum(&self, id: &str) -> Option<(usize, &StratumPopulation)> {
        self.strata.iter().enumerate().find(|(_, s)| s.id == id)
    }

    /// Class counts summed over every stratum.
    pub fn pooled_counts(&self) -> ClassCount {
        let mut pooled = ClassCount::zeros(self.classes());
        for s in &self.strata {
            // dimensions were checked at construction
            let _ = pooled.accumulate(s.counts.as_slice());
        }
        pooled
    }
}

/// One institution: how many products it owes in each stratum and,
/// optionally, how its products were actually classified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateProfile {
    id: String,
    demand: BTreeMap<String, u64>,
    observed: Option<ClassCount>,
}

impl AggregateProfile {
    pub fn new(
        id: impl Into<String>,
        demand: BTreeMap<String, u64>,
        observed: Option<ClassCount>,
    ) -> Self {
        Self {
            id: id.into(),
            demand,
            observed,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn demand(&self) -> &BTreeMap<String, u64> {
        &self.demand
    }

    pub fn observed(&self) -> Option<&ClassCount> {
        self.observed.as_ref()
    }

    pub fn set_observed(&mut self, observed: Option<ClassCount>) {
        self.observed = observed;
    }

    pub fn total_demand(&self) -> u64 {
        self.demand.values().sum()
    }

    /// Checks the profile against `pop` and resolves stratum names to
    /// positions.
    pub fn validate(&self, pop: &AreaPopulation) -> Result<CompositionPlan> {
        let mut entries = Vec::with_capacity(self.demand.len());
        for (stratum, &demand) in &self.demand {
            let (index, s) = pop.stratum(stratum).ok_or_else(|| Error::UnknownStratum {
                aggregate: self.id.clone(),
                stratum: stratum.clone(),
            })?;
            if demand > s.expected_total {
                return Err(Error::OverDemand {
                    aggregate: self.id.clone(),
                    stratum: stratum.clone(),
                    demand,
                    available: s.expected_total,
                });
            }
            if demand > 0 {
                entries.push((index, demand));
            }
        }
        entries.sort_unstable();
        if let Some(observed) = &self.observed {
            if observed.classes() != pop.classes() {
                return Err(Error::DimensionMismatch {
                    expected: pop.classes(),
                    found: observed.classes(),
                });
            }
            let total = self.total_demand();
            if observed.total() != total {
                return Err(Error::ObservedTotalMismatch {
                    aggregate: self.id.clone(),
                    observed: observed.total(),
                    demand: total,
                });
            }
        }
        Ok(CompositionPlan { entries })
    }
}

/// A profile's demand resolved against a population: `(stratum index,
/// demand)` pairs in stratum order, zero demands dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionPlan {
    entries: Vec<(usize, u64)>,
}

impl CompositionPlan {
    pub fn entries(&self) -> &[(usize, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, d)| d).sum()
    }
}

/// The aggregate's observed outcome as a simplex point.
pub fn observed_point(profile: &AggregateProfile) -> Result<AssessmentPoint> {
    let observed = profile
        .observed()
        .ok_or_else(|| Error::MissingObserved(profile.id.clone()))?;
    AssessmentPoint::from_counts(observed)
}

/// Numeric score attached to each class, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScoreScale(Vec<f64>);

impl ClassScoreScale {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::TooFewClasses(scores.len()));
        }
        let in_range = scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s));
        let decreasing = scores.windows(2).all(|w| w[0] > w[1]);
        if !(in_range && decreasing) {
            return Err(Error::InvalidScale);
        }
        Ok(Self(scores))
    }

    /// A 1, B 0.7, C 0.4, D 0.1, E 0.
    pub fn vqr() -> Self {
        Self(alloc::vec![1.0, 0.7, 0.4, 0.1, 0.0])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    /// Total score of `counts` (not divided by the number of products).
    pub fn total_score(&self, counts: &[u64]) -> Result<f64> {
        if counts.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                found: counts.len(),
            });
        }
        Ok(self.0.iter().zip(counts).map(|(s, &c)| s * c as f64).sum())
    }

    pub fn mean_score(&self, counts: &[u64]) -> Result<f64> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptyCounts);
        }
        Ok(self.total_score(counts)? / n as f64)
    }
}

impl Default for ClassScoreScale {
    fn default() -> Self {
        Self::vqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn labels() -> Vec<String> {
        ["A", "B", "C", "D", "E"].iter().map(|s| s.to_string()).collect()
    }

    fn counts(c: &[u64]) -> ClassCount {
        ClassCount::new(c.to_vec()).unwrap()
    }

    fn toy_area() -> AreaPopulation {
        AreaPopulation::new(
            "01/A",
            labels(),
            vec![
                StratumPopulation::new("MAT/01", counts(&[25, 20, 7, 12, 8]), 72).unwrap(),
                StratumPopulation::new("MAT/04", counts(&[18, 45, 28, 20, 21]), 132).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn row_sum_mismatch_is_reported() {
        let err = StratumPopulation::new("SECS-S/02", counts(&[11, 10, 5, 5, 11]), 45).unwrap_err();
        assert_eq!(
            err,
            Error::RowSumMismatch {
                stratum: "SECS-S/02".into(),
                sum: 42,
                expected: 45
            }
        );
        assert!(StratumPopulation::new("X", counts(&[0, 0]), 0).is_err());
    }

    #[test]
    fn area_rejects_duplicates_and_empty() {
        let s = StratumPopulation::from_counts("MAT/01", counts(&[1, 1, 1, 1, 1])).unwrap();
        assert_eq!(
            AreaPopulation::new("x", labels(), vec![s.clone(), s.clone()]),
            Err(Error::DuplicateStratum("MAT/01".into()))
        );
        assert_eq!(AreaPopulation::new("x", labels(), vec![]), Err(Error::NoStrata));
        let short = StratumPopulation::from_counts("MAT/02", counts(&[1, 1])).unwrap();
        assert!(AreaPopulation::new("x", labels(), vec![s, short]).is_err());
    }

    #[test]
    fn profile_validation() {
        let area = toy_area();
        let ok = AggregateProfile::new(
            "U",
            [("MAT/01".to_string(), 10), ("MAT/04".to_string(), 0)].into_iter().collect(),
            Some(counts(&[2, 2, 2, 2, 2])),
        );
        let plan = ok.validate(&area).unwrap();
        assert_eq!(plan.entries(), &[(0, 10)]);

        let over = AggregateProfile::new("U", [("MAT/01".to_string(), 100)].into_iter().collect(), None);
        assert!(matches!(over.validate(&area), Err(Error::OverDemand { demand: 100, available: 72, .. })));

        let unknown = AggregateProfile::new("U", [("MAT/99".to_string(), 1)].into_iter().collect(), None);
        assert!(matches!(unknown.validate(&area), Err(Error::UnknownStratum { .. })));

        let bad_total = AggregateProfile::new(
            "U",
            [("MAT/01".to_string(), 3)].into_iter().collect(),
            Some(counts(&[1, 1, 0, 0, 0])),
        );
        assert!(matches!(bad_total.validate(&area), Err(Error::ObservedTotalMismatch { .. })));
    }

    #[test]
    fn observed_point_examples() {
        let mk = |c: &[u64]| AggregateProfile::new("U", BTreeMap::new(), Some(counts(c)));
        assert_eq!(observed_point(&mk(&[10, 0, 0, 0, 0])).unwrap().freqs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let p = observed_point(&mk(&[25, 20, 7, 12, 8])).unwrap();
        for (x, c) in p.freqs().iter().zip([25.0, 20.0, 7.0, 12.0, 8.0]) {
            assert!((x - c / 72.0).abs() < 1e-15);
        }
        assert_eq!(observed_point(&mk(&[1; 5])).unwrap().freqs(), &[0.2; 5]);
        let missing = AggregateProfile::new("U", BTreeMap::new(), None);
        assert_eq!(observed_point(&missing), Err(Error::MissingObserved("U".into())));
    }

    #[test]
    fn scale_validation() {
        assert!(ClassScoreScale::new(vec![1.0, 0.7, 0.7]).is_err());
        assert!(ClassScoreScale::new(vec![1.5, 0.0]).is_err());
        let s = ClassScoreScale::vqr();
        assert!((s.mean_score(&[1, 1, 1, 1, 1]).unwrap() - 0.44).abs() < 1e-12);
    }

    #[test]
    fn pooled_counts_sum_strata() {
        assert_eq!(toy_area().pooled_counts().as_slice(), &[43, 65, 35, 32, 29]);
    }
}
