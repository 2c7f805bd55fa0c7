//! Reproducible multivariate hypergeometric sampling of ideal aggregates.
//!
//! A stratum draw picks `demand` products without replacement from the
//! stratum's population. The class counts are generated by sequential
//! conditioning: the top-class count from a univariate hypergeometric, the
//! next class from what remains, and so on.
//!
//! Every draw is a pure function of `(master_seed, replicate_index,
//! stratum_index)`. The master seed keys a ChaCha8 generator, the replicate
//! selects its stream and the stratum selects a disjoint block range within
//! it, so replicates can run in any order on any number of threads.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::ClassCount;
use crate::population::{AggregateProfile, AreaPopulation, CompositionPlan, StratumPopulation};

/// Word offset between stratum substreams (2^32 blocks of 16 words).
const STRATUM_WORD_STRIDE: u128 = 1 << 36;

/// Seed material for one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SamplerSeed {
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl SamplerSeed {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self {
            master_seed,
            replicate_index,
        }
    }

    /// Generator for the given stratum of this replicate.
    pub fn rng(&self, stratum_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        self.reposition(&mut rng, stratum_index);
        rng
    }

    fn reposition(&self, rng: &mut ChaCha8Rng, stratum_index: usize) {
        rng.set_stream(self.replicate_index);
        rng.set_word_pos(stratum_index as u128 * STRATUM_WORD_STRIDE);
    }
}

/// `ln(k!)`, tabulated up to the largest population in use.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn up_to(max: u64) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        table.push(0.0);
        for k in 1..=max {
            table.push(libm::lgamma(k as f64 + 1.0));
        }
        Self { table }
    }

    pub fn ln_factorial(&self, k: u64) -> f64 {
        match self.table.get(k as usize) {
            Some(&v) => v,
            None => libm::lgamma(k as f64 + 1.0),
        }
    }

    fn ln_choose(&self, n: u64, k: u64) -> f64 {
        self.ln_factorial(n) - self.ln_factorial(k) - self.ln_factorial(n - k)
    }

    /// Number of successes when drawing `draws` items without replacement
    /// from `total` items of which `successes` are marked.
    ///
    /// Exact inversion: the support is visited starting at the mode and
    /// growing toward whichever neighbour has more mass, subtracting
    /// probabilities from one uniform variate. Any fixed visiting order gives
    /// the exact distribution; this one needs O(standard deviation) steps,
    /// so no separate large-parameter method is needed.
    pub fn hypergeometric<R: RngCore + ?Sized>(
        &self,
        total: u64,
        successes: u64,
        draws: u64,
        rng: &mut R,
    ) -> u64 {
        debug_assert!(successes <= total && draws <= total);
        let failures = total - successes;
        let lo = draws.saturating_sub(failures);
        let hi = successes.min(draws);
        if lo == hi {
            return lo;
        }
        let mode = (((draws + 1) as u128 * (successes + 1) as u128) / (total + 2) as u128) as u64;
        let mode = mode.clamp(lo, hi);
        let p_mode = libm::exp(
            self.ln_choose(successes, mode) + self.ln_choose(failures, draws - mode)
                - self.ln_choose(total, draws),
        );

        let (s_f, f_f, d_f) = (successes as f64, failures as f64, draws as f64);
        // p(k+1) / p(k)
        let up = |k: u64| {
            let k = k as f64;
            (s_f - k) * (d_f - k) / ((k + 1.0) * (f_f - d_f + k + 1.0))
        };
        // p(k-1) / p(k)
        let down = |k: u64| {
            let k = k as f64;
            k * (f_f - d_f + k) / ((s_f - k + 1.0) * (d_f - k + 1.0))
        };

        let mut u: f64 = rng.random();
        u -= p_mode;
        if u < 0.0 {
            return mode;
        }
        let mut left = mode;
        let mut right = mode;
        let mut p_left = p_mode;
        let mut p_right = p_mode;
        let mut next_left = if left > lo { p_left * down(left) } else { -1.0 };
        let mut next_right = if right < hi { p_right * up(right) } else { -1.0 };
        loop {
            if next_left < 0.0 && next_right < 0.0 {
                // mass exhausted through rounding
                return mode;
            }
            if next_left >= next_right {
                left -= 1;
                p_left = next_left;
                u -= p_left;
                if u < 0.0 {
                    return left;
                }
                next_left = if left > lo { p_left * down(left) } else { -1.0 };
            } else {
                right += 1;
                p_right = next_right;
                u -= p_right;
                if u < 0.0 {
                    return right;
                }
                next_right = if right < hi { p_right * up(right) } else { -1.0 };
            }
        }
    }

    /// Splits `demand` draws from a stratum across its classes, writing the
    /// counts into `out`.
    pub fn multivariate<R: RngCore + ?Sized>(
        &self,
        population: &[u64],
        demand: u64,
        rng: &mut R,
        out: &mut [u64],
    ) {
        debug_assert_eq!(population.len(), out.len());
        let mut remaining_total: u64 = population.iter().sum();
        let mut remaining_draws = demand;
        let last = population.len() - 1;
        for (j, &in_class) in population.iter().enumerate() {
            let drawn = if remaining_draws == 0 {
                0
            } else if j == last {
                remaining_draws
            } else {
                self.hypergeometric(remaining_total, in_class, remaining_draws, rng)
            };
            assert!(drawn <= in_class, "drew {drawn} from a class of {in_class}");
            out[j] = drawn;
            remaining_total -= in_class;
            remaining_draws -= drawn;
        }
    }
}

/// One hypothetical aggregate drawn from the population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdealAggregate {
    pub class_counts: ClassCount,
    pub per_stratum: BTreeMap<String, ClassCount>,
}

/// Draws ideal aggregates for one validated profile.
#[derive(Debug, Clone)]
pub struct StratifiedSampler<'a> {
    pop: &'a AreaPopulation,
    plan: CompositionPlan,
    ln_factorials: LnFactorials,
}

impl<'a> StratifiedSampler<'a> {
    pub fn new(profile: &AggregateProfile, pop: &'a AreaPopulation) -> Result<Self> {
        let plan = profile.validate(pop)?;
        Ok(Self::from_plan(plan, pop))
    }

    pub fn from_plan(plan: CompositionPlan, pop: &'a AreaPopulation) -> Self {
        let max = plan
            .entries()
            .iter()
            .map(|&(i, _)| pop.strata()[i].expected_total())
            .max()
            .unwrap_or(0);
        Self {
            pop,
            plan,
            ln_factorials: LnFactorials::up_to(max),
        }
    }

    pub fn plan(&self) -> &CompositionPlan {
        &self.plan
    }

    pub fn classes(&self) -> usize {
        self.pop.classes()
    }

    /// Pooled class counts of one replicate, written into `pooled`. `scratch`
    /// must have the same length.
    pub fn draw_pooled(&self, seed: SamplerSeed, pooled: &mut [u64], scratch: &mut [u64]) {
        pooled.iter_mut().for_each(|c| *c = 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
        for &(index, demand) in self.plan.entries() {
            seed.reposition(&mut rng, index);
            let stratum = &self.pop.strata()[index];
            self.ln_factorials
                .multivariate(stratum.counts().as_slice(), demand, &mut rng, scratch);
            for (p, s) in pooled.iter_mut().zip(scratch.iter()) {
                *p += s;
            }
        }
    }

    pub fn draw(&self, seed: SamplerSeed) -> IdealAggregate {
        let classes = self.classes();
        let mut pooled = ClassCount::zeros(classes);
        let mut per_stratum = BTreeMap::new();
        let mut buf = vec![0; classes];
        for &(index, demand) in self.plan.entries() {
            let stratum = &self.pop.strata()[index];
            let mut rng = seed.rng(index);
            self.ln_factorials
                .multivariate(stratum.counts().as_slice(), demand, &mut rng, &mut buf);
            let _ = pooled.accumulate(&buf);
            let drawn = ClassCount::new(buf.clone()).expect("population has at least two classes");
            per_stratum.insert(String::from(stratum.id()), drawn);
        }
        IdealAggregate {
            class_counts: pooled,
            per_stratum,
        }
    }
}

/// Draws `demand` products from a single stratum (substream 0 of `seed`).
pub fn draw_stratum(pop: &StratumPopulation, demand: u64, seed: SamplerSeed) -> Result<ClassCount> {
    draw_stratum_at(pop, demand, seed, 0)
}

/// [`draw_stratum`] on the substream of stratum `stratum_index`.
pub fn draw_stratum_at(
    pop: &StratumPopulation,
    demand: u64,
    seed: SamplerSeed,
    stratum_index: usize,
) -> Result<ClassCount> {
    if demand > pop.expected_total() {
        return Err(Error::OverDemand {
            aggregate: String::new(),
            stratum: pop.id().into(),
            demand,
            available: pop.expected_total(),
        });
    }
    let table = LnFactorials::up_to(pop.expected_total());
    let mut out = vec![0; pop.counts().classes()];
    let mut rng = seed.rng(stratum_index);
    table.multivariate(pop.counts().as_slice(), demand, &mut rng, &mut out);
    ClassCount::new(out)
}

/// One ideal aggregate matching `profile`'s per-stratum demand.
pub fn draw_ideal(
    profile: &AggregateProfile,
    pop: &AreaPopulation,
    seed: SamplerSeed,
) -> Result<IdealAggregate> {
    Ok(StratifiedSampler::new(profile, pop)?.draw(seed))
}
