//! Geometric-score estimation, exact enumeration, replicate sizing, the
//! R-score baseline and rankings.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::geometry::{EffortWeights, WeightPreset};
use crate::population::{AggregateProfile, AreaPopulation, ClassScoreScale, CompositionPlan};
use crate::sampler::{SamplerSeed, StratifiedSampler};

/// Replicates used when nothing else is requested.
pub const DEFAULT_REPLICATES: u64 = 200_000;
/// Half-width targeted when sizing replicates automatically.
pub const DEFAULT_EPSILON: f64 = 0.005;
/// Tail probability targeted when sizing replicates automatically.
pub const DEFAULT_TAIL_BOUND: f64 = 4.54e-5;
/// Default cap on configurations visited by [`exact_geometric_score`].
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Relative tolerance under which two deltas count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// True when `candidate` is strictly worse (larger delta) than `reference`.
/// Differences within [`TIE_TOLERANCE`] are ties, and ties are not worse.
pub fn strictly_worse(candidate: f64, reference: f64) -> bool {
    let scale = libm::fmax(1.0, libm::fabs(reference));
    candidate - reference > TIE_TOLERANCE * scale
}

/// `exp(-2 N eps^2)`: Hoeffding bound on the chance that the mean of `n`
/// Bernoulli draws overshoots its expectation by `epsilon` or more.
pub fn hoeffding_bound(n: u64, epsilon: f64) -> f64 {
    libm::exp(-2.0 * n as f64 * epsilon * epsilon)
}

/// Smallest replicate count whose Hoeffding bound at `epsilon` is at most
/// `tail_bound`. Never less than one.
pub fn hoeffding_replicates(epsilon: f64, tail_bound: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
        });
    }
    if !(tail_bound > 0.0 && tail_bound <= 1.0) {
        return Err(Error::OutOfRange {
            name: "tail_bound",
            value: tail_bound,
        });
    }
    let estimate = libm::ceil(libm::log(1.0 / tail_bound) / (2.0 * epsilon * epsilon));
    let mut n = if estimate < 1.0 { 1 } else { estimate as u64 };
    // settle rounding in the closed form by direct evaluation
    while n > 1 && hoeffding_bound(n - 1, epsilon) <= tail_bound {
        n -= 1;
    }
    while hoeffding_bound(n, epsilon) > tail_bound {
        n += 1;
    }
    Ok(n)
}

/// Deviation `epsilon` guaranteed with probability `1 - tail_bound` after
/// `n` replicates.
pub fn hoeffding_half_width(n: u64, tail_bound: f64) -> Result<f64> {
    if !(tail_bound > 0.0 && tail_bound <= 1.0) {
        return Err(Error::OutOfRange {
            name: "tail_bound",
            value: tail_bound,
        });
    }
    if n == 0 {
        return Err(Error::OutOfRange {
            name: "replicates",
            value: 0.0,
        });
    }
    Ok(libm::sqrt(libm::log(1.0 / tail_bound) / (2.0 * n as f64)))
}

/// Name used in reports for a weight vector: the preset letter when it
/// matches one, otherwise the weights joined by `:`.
pub fn weights_label(w: &EffortWeights) -> String {
    for preset in WeightPreset::ALL {
        if preset.weights() == *w {
            return preset.name().into();
        }
    }
    let parts: Vec<String> = w.as_slice().iter().map(|a| format!("{a}")).collect();
    parts.join(":")
}

/// Monte-Carlo estimate of an aggregate's geometric score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEstimate {
    pub aggregate_id: String,
    pub delta_value: f64,
    pub worse: u64,
    pub replicates: u64,
    pub geo_score: f64,
    pub master_seed: u64,
    pub weights_preset: String,
}

/// Everything needed to evaluate replicates for one aggregate and one weight
/// vector. Replicate ranges can be counted independently and summed.
#[derive(Debug, Clone)]
pub struct GeometricScorer<'a> {
    aggregate_id: String,
    sampler: StratifiedSampler<'a>,
    weights: EffortWeights,
    observed_delta: f64,
}

impl<'a> GeometricScorer<'a> {
    pub fn new(
        profile: &AggregateProfile,
        pop: &'a AreaPopulation,
        weights: &EffortWeights,
    ) -> Result<Self> {
        if weights.classes() != pop.classes() {
            return Err(Error::DimensionMismatch {
                expected: pop.classes(),
                found: weights.classes(),
            });
        }
        let plan = profile.validate(pop)?;
        let observed = profile
            .observed()
            .ok_or_else(|| Error::MissingObserved(profile.id().into()))?;
        if plan.total() == 0 {
            return Err(Error::EmptyAggregate(profile.id().into()));
        }
        let observed_delta = weights.delta_counts(observed.as_slice())?;
        Ok(Self {
            aggregate_id: profile.id().into(),
            sampler: StratifiedSampler::from_plan(plan, pop),
            weights: weights.clone(),
            observed_delta,
        })
    }

    pub fn observed_delta(&self) -> f64 {
        self.observed_delta
    }

    /// Number of replicates in `range` whose ideal aggregate is strictly
    /// worse than the observed one.
    pub fn count_worse(&self, master_seed: u64, range: Range<u64>) -> u64 {
        let classes = self.sampler.classes();
        let mut pooled = vec![0; classes];
        let mut scratch = vec![0; classes];
        let mut worse = 0;
        for replicate in range {
            self.sampler
                .draw_pooled(SamplerSeed::new(master_seed, replicate), &mut pooled, &mut scratch);
            let d = self
                .weights
                .delta_counts(&pooled)
                .expect("plan total is positive");
            if strictly_worse(d, self.observed_delta) {
                worse += 1;
            }
        }
        worse
    }

    /// Packages a worse-count over `replicates` replicates.
    pub fn estimate(&self, worse: u64, replicates: u64, master_seed: u64) -> ScoreEstimate {
        ScoreEstimate {
            aggregate_id: self.aggregate_id.clone(),
            delta_value: self.observed_delta,
            worse,
            replicates,
            geo_score: worse as f64 / replicates as f64,
            master_seed,
            weights_preset: weights_label(&self.weights),
        }
    }
}

/// Fraction of `n_reps` seeded ideal aggregates whose delta is strictly
/// larger than the observed one. Sequential; the `geoscore` crate fans the
/// same replicates out over threads with identical results.
pub fn geometric_score(
    profile: &AggregateProfile,
    pop: &AreaPopulation,
    w: &EffortWeights,
    n_reps: u64,
    master_seed: u64,
) -> Result<ScoreEstimate> {
    if n_reps == 0 {
        return Err(Error::OutOfRange {
            name: "replicates",
            value: 0.0,
        });
    }
    let scorer = GeometricScorer::new(profile, pop, w)?;
    let worse = scorer.count_worse(master_seed, 0..n_reps);
    Ok(scorer.estimate(worse, n_reps, master_seed))
}

/// Exact geometric score as a count of ideal aggregates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactScore {
    /// Ideal aggregates strictly worse than the observed one.
    pub worse: BigUint,
    /// All ideal aggregates: the product over strata of `C(total, demand)`.
    pub total: BigUint,
}

impl ExactScore {
    pub fn ratio(&self) -> Ratio<BigUint> {
        Ratio::new(self.worse.clone(), self.total.clone())
    }

    pub fn to_f64(&self) -> f64 {
        let r = self.ratio();
        // numerator and denominator can exceed f64 range separately
        let shift = r.denom().bits().saturating_sub(960);
        let num = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let den = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        num / den
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Every way to split `demand` draws over classes holding `population`
/// items, with the number of subsets realising each split.
fn stratum_configurations(population: &[u64], demand: u64, cap: u128) -> Result<Vec<(Vec<u64>, BigUint)>> {
    let binomials: Vec<Vec<BigUint>> = population
        .iter()
        .map(|&m| (0..=m.min(demand)).map(|k| binomial(m, k)).collect())
        .collect();
    // suffix capacities prune splits that cannot be completed
    let mut capacity_after = vec![0u64; population.len() + 1];
    for j in (0..population.len()).rev() {
        capacity_after[j] = capacity_after[j + 1] + population[j];
    }
    let mut out = Vec::new();
    let mut current = vec![0u64; population.len()];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        j: usize,
        remaining: u64,
        population: &[u64],
        capacity_after: &[u64],
        binomials: &[Vec<BigUint>],
        current: &mut Vec<u64>,
        weight: BigUint,
        out: &mut Vec<(Vec<u64>, BigUint)>,
        cap: u128,
    ) -> Result<()> {
        if j == population.len() {
            if remaining == 0 {
                if out.len() as u128 >= cap {
                    return Err(Error::EnumerationCap {
                        size: out.len() as u128 + 1,
                        cap,
                    });
                }
                out.push((current.clone(), weight));
            }
            return Ok(());
        }
        let lo = remaining.saturating_sub(capacity_after[j + 1]);
        let hi = population[j].min(remaining);
        for k in lo..=hi {
            current[j] = k;
            let w = &weight * &binomials[j][k as usize];
            walk(j + 1, remaining - k, population, capacity_after, binomials, current, w, out, cap)?;
        }
        current[j] = 0;
        Ok(())
    }
    walk(
        0,
        demand,
        population,
        &capacity_after,
        &binomials,
        &mut current,
        BigUint::one(),
        &mut out,
        cap,
    )?;
    Ok(out)
}

/// Exact geometric score by exhaustive enumeration, with the default cap.
pub fn exact_geometric_score(
    profile: &AggregateProfile,
    pop: &AreaPopulation,
    w: &EffortWeights,
) -> Result<ExactScore> {
    exact_geometric_score_capped(profile, pop, w, DEFAULT_ENUMERATION_CAP)
}

/// Exact geometric score. Enumerates every class split of every stratum,
/// weights each by its number of realising subsets, convolves the strata
/// into pooled counts and counts pooled outcomes strictly worse than the
/// observed one. Fails once more than `cap` stratum-split combinations
/// would be needed.
pub fn exact_geometric_score_capped(
    profile: &AggregateProfile,
    pop: &AreaPopulation,
    w: &EffortWeights,
    cap: u128,
) -> Result<ExactScore> {
    if w.classes() != pop.classes() {
        return Err(Error::DimensionMismatch {
            expected: pop.classes(),
            found: w.classes(),
        });
    }
    let plan = profile.validate(pop)?;
    let observed = profile
        .observed()
        .ok_or_else(|| Error::MissingObserved(profile.id().into()))?;
    if plan.total() == 0 {
        return Err(Error::EmptyAggregate(profile.id().into()));
    }
    let observed_delta = w.delta_counts(observed.as_slice())?;
    let pooled = pooled_distribution(&plan, pop, cap)?;

    let mut worse = BigUint::zero();
    let mut total = BigUint::zero();
    for (counts, weight) in &pooled {
        total += weight;
        let d = w.delta_counts(counts)?;
        if strictly_worse(d, observed_delta) {
            worse += weight;
        }
    }
    debug_assert_eq!(
        total,
        plan.entries()
            .iter()
            .map(|&(i, d)| binomial(pop.strata()[i].expected_total(), d))
            .product::<BigUint>()
    );
    Ok(ExactScore { worse, total })
}

/// Pooled class counts of every ideal aggregate, with multiplicities.
fn pooled_distribution(
    plan: &CompositionPlan,
    pop: &AreaPopulation,
    cap: u128,
) -> Result<BTreeMap<Vec<u64>, BigUint>> {
    let mut pooled: BTreeMap<Vec<u64>, BigUint> = BTreeMap::new();
    pooled.insert(vec![0; pop.classes()], BigUint::one());
    let mut combinations: u128 = 1;
    for &(index, demand) in plan.entries() {
        let stratum = &pop.strata()[index];
        let configs = stratum_configurations(stratum.counts().as_slice(), demand, cap)?;
        combinations = combinations.saturating_mul(configs.len() as u128);
        if combinations > cap {
            return Err(Error::EnumerationCap {
                size: combinations,
                cap,
            });
        }
        let mut next: BTreeMap<Vec<u64>, BigUint> = BTreeMap::new();
        for (acc, acc_weight) in &pooled {
            for (split, weight) in &configs {
                let key: Vec<u64> = acc.iter().zip(split).map(|(a, b)| a + b).collect();
                *next.entry(key).or_insert_with(BigUint::zero) += acc_weight * weight;
            }
        }
        pooled = next;
    }
    Ok(pooled)
}

/// Reference mean used as the R-score denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RDenominator {
    /// Mean over every product in the area.
    Area,
    /// Stratum means weighted by the aggregate's demand.
    #[default]
    StratumWeighted,
}

/// Mean class score of the aggregate's products over the reference mean.
/// Above 1 means better than average.
pub fn r_score(
    profile: &AggregateProfile,
    pop: &AreaPopulation,
    scale: &ClassScoreScale,
) -> Result<f64> {
    r_score_with(profile, pop, scale, RDenominator::default())
}

pub fn r_score_with(
    profile: &AggregateProfile,
    pop: &AreaPopulation,
    scale: &ClassScoreScale,
    denominator: RDenominator,
) -> Result<f64> {
    if scale.classes() != pop.classes() {
        return Err(Error::DimensionMismatch {
            expected: pop.classes(),
            found: scale.classes(),
        });
    }
    let plan = profile.validate(pop)?;
    let observed = profile
        .observed()
        .ok_or_else(|| Error::MissingObserved(profile.id().into()))?;
    let numerator = scale.mean_score(observed.as_slice())?;
    let reference = match denominator {
        RDenominator::Area => scale.mean_score(pop.pooled_counts().as_slice())?,
        RDenominator::StratumWeighted => {
            let total = plan.total();
            if total == 0 {
                return Err(Error::EmptyAggregate(profile.id().into()));
            }
            let mut acc = 0.0;
            for &(index, demand) in plan.entries() {
                let counts = pop.strata()[index].counts().as_slice();
                acc += demand as f64 * scale.mean_score(counts)?;
            }
            acc / total as f64
        }
    };
    if reference == 0.0 {
        return Err(Error::UndefinedRScore);
    }
    Ok(numerator / reference)
}

/// Competition ranks ("1, 1, 3") of `values`, largest first.
pub fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|other| *other > v).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub aggregate_id: String,
    pub r_score: f64,
    pub r_rank: usize,
    pub geo_score: f64,
    pub geo_rank: usize,
    pub delta_value: f64,
}

/// Aggregates with both rankings, ordered by R rank (input order within
/// ties).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
}

pub fn rank(estimates: &[ScoreEstimate], r_scores: &[f64]) -> Result<RankTable> {
    if estimates.len() != r_scores.len() {
        return Err(Error::LengthMismatch {
            what: "estimates vs R scores",
            left: estimates.len(),
            right: r_scores.len(),
        });
    }
    let geo: Vec<f64> = estimates.iter().map(|e| e.geo_score).collect();
    let geo_ranks = competition_ranks(&geo);
    let r_ranks = competition_ranks(r_scores);
    let mut rows: Vec<RankRow> = estimates
        .iter()
        .zip(r_scores)
        .zip(geo_ranks.into_iter().zip(r_ranks))
        .map(|((e, &r), (geo_rank, r_rank))| RankRow {
            aggregate_id: e.aggregate_id.to_string(),
            r_score: r,
            r_rank,
            geo_score: e.geo_score,
            geo_rank,
            delta_value: e.delta_value,
        })
        .collect();
    rows.sort_by_key(|row| row.r_rank);
    Ok(RankTable { rows })
}
