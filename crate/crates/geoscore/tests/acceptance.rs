//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails unexpectedly.
//!
//! Criterion 7 cannot pass on the bundled data: seven printed totals disagree
//! with their own class counts. It is reported as FAIL, and the run only
//! accepts that outcome when exactly those seven rows are surfaced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use geoscore::io::{self, PopulationTable, TotalPolicy};
use geoscore_core::engine::{
    competition_ranks, exact_geometric_score, geometric_score, hoeffding_bound, hoeffding_replicates,
};
use geoscore_core::geometry::{
    cumulative_map, delta, delta_path_oracle, delta_unit, minkowski_identity_check, pseudo_distance,
};
use geoscore_core::sampler::{draw_stratum, StratifiedSampler};
use geoscore_core::{
    AggregateProfile, AreaPopulation, AssessmentPoint, ClassCount, EffortWeights, SamplerSeed, StratumPopulation,
    WeightPreset,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const AREA_01A: [(&str, u64, [u64; 5]); 9] = [
    ("MAT/01", 72, [25, 20, 7, 12, 8]),
    ("MAT/02", 319, [67, 97, 59, 32, 64]),
    ("MAT/03", 800, [246, 190, 106, 82, 176]),
    ("MAT/04", 132, [18, 45, 28, 20, 21]),
    ("MAT/05", 1545, [616, 388, 220, 94, 227]),
    ("MAT/06", 255, [97, 71, 42, 22, 23]),
    ("MAT/07", 609, [197, 147, 98, 88, 79]),
    ("MAT/08", 563, [245, 143, 83, 36, 56]),
    ("MAT/09", 230, [169, 68, 30, 14, 16]),
];

const AREA_13D: [(&str, u64, [u64; 5]); 6] = [
    ("SECS-S/01", 794, [241, 209, 94, 91, 109]),
    ("SECS-S/02", 45, [11, 10, 5, 5, 11]),
    ("SECS-S/03", 281, [44, 61, 41, 45, 67]),
    ("SECS-S/04", 131, [28, 24, 14, 29, 27]),
    ("SECS-S/05", 130, [20, 22, 33, 27, 21]),
    ("SECS-S/06", 776, [152, 208, 85, 89, 142]),
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Pass,
    Fail,
    /// Fails for a documented data reason; the attainable part held.
    KnownFail,
}

struct Check {
    id: u32,
    title: &'static str,
    verdict: Verdict,
    detail: String,
}

fn check(id: u32, title: &'static str, ok: bool, detail: String) -> Check {
    Check {
        id,
        title,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn trusted_population(file: &str) -> AreaPopulation {
    let path = data_dir().join(file);
    let table = PopulationTable::read(file, io::open(&path).unwrap()).unwrap();
    table.into_population(TotalPolicy::TrustCounts).unwrap().0
}

fn random_point(rng: &mut ChaCha8Rng, classes: usize) -> AssessmentPoint {
    loop {
        let raw: Vec<f64> = (0..classes)
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let sum: f64 = raw.iter().sum();
        if sum > 0.0 {
            return AssessmentPoint::new(raw.iter().map(|x| x / sum).collect()).unwrap();
        }
    }
}

fn closed_form_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let classes = rng.random_range(2..=12);
        let p = random_point(&mut rng, classes);
        let w = EffortWeights::new((1..classes).map(|_| rng.random_range(0.01..10.0)).collect()).unwrap();
        let diff = (delta(&p, &w).unwrap() - delta_path_oracle(&p, &w).unwrap()).abs();
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    check(
        1,
        "closed form equals path construction",
        worst <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("10000 pairs, max |diff| {worst:.3e}, {elapsed:.2?}"),
    )
}

fn worked_example() -> Check {
    let w = EffortWeights::new(vec![2f64.sqrt(), 2f64.sqrt()]).unwrap();
    let p = AssessmentPoint::new(vec![0.25, 0.75, 0.0]).unwrap();
    let q = AssessmentPoint::new(vec![0.5, 0.25, 0.25]).unwrap();
    let want = 3.0 * 2f64.sqrt() / 4.0;
    let (dp, dq) = (delta(&p, &w).unwrap(), delta(&q, &w).unwrap());
    let d = pseudo_distance(&p, &q, &w).unwrap();
    check(
        2,
        "worked example with weights (sqrt2, sqrt2)",
        (dp - want).abs() <= 1e-12 && (dq - want).abs() <= 1e-12 && d <= 1e-12,
        format!("delta {dp:.15} and {dq:.15}, target {want:.15}, pseudo-distance {d:.1e}"),
    )
}

fn minkowski() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut flagged = 0;
    for _ in 0..10_000 {
        let classes = rng.random_range(2..=12);
        let p = random_point(&mut rng, classes);
        // cumulative coordinates of the best vertex are all 1
        let l1: f64 = cumulative_map(&p).iter().map(|s| (1.0 - s).abs()).sum();
        worst = worst.max((delta_unit(&p) - l1).abs());
        if !minkowski_identity_check(&p) {
            flagged += 1;
        }
    }
    check(
        3,
        "unit delta equals cumulative L1 distance",
        worst <= 1e-12 && flagged == 0,
        format!("10000 points, max |diff| {worst:.3e}, identity check failures {flagged}"),
    )
}

fn hoeffding() -> Check {
    let bound = hoeffding_bound(200_000, 0.005);
    let n = hoeffding_replicates(0.005, 4.54e-5).unwrap();
    let shown = format!("{bound:.6e}");
    check(
        4,
        "Hoeffding figures",
        shown == "4.539993e-5" && n == 200_000,
        format!("bound(200000, 0.005) = {shown}, replicates(0.005, 4.54e-5) = {n}"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng, index: usize) -> (AreaPopulation, AggregateProfile) {
    let strata = rng.random_range(1..=3usize);
    let mut budget = 12u64;
    let mut rows = Vec::new();
    for s in 0..strata {
        let size = rng.random_range(1..=(budget / 2).clamp(1, 6));
        budget -= size;
        let mut counts = vec![0u64; 5];
        for _ in 0..size {
            counts[rng.random_range(0..5)] += 1;
        }
        rows.push(StratumPopulation::from_counts(format!("S{s}"), ClassCount::new(counts).unwrap()).unwrap());
    }
    let mut left = 6u64;
    let mut demand = BTreeMap::new();
    for s in &rows {
        let d = rng.random_range(0..=s.expected_total().min(left));
        left -= d;
        demand.insert(s.id().to_string(), d);
    }
    if demand.values().all(|d| *d == 0) {
        demand.insert("S0".into(), 1);
    }
    let n: u64 = demand.values().sum();
    let mut observed = vec![0u64; 5];
    for _ in 0..n {
        observed[rng.random_range(0..5)] += 1;
    }
    let labels = ["A", "B", "C", "D", "E"].map(String::from).to_vec();
    let pop = AreaPopulation::new("T", labels, rows).unwrap();
    let profile = AggregateProfile::new(format!("U{index}"), demand, Some(ClassCount::new(observed).unwrap()));
    (pop, profile)
}

fn monte_carlo_against_exact() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut instances: Vec<(AreaPopulation, AggregateProfile, EffortWeights)> = (0..24)
        .map(|i| {
            let (pop, prof) = random_instance(&mut rng, i);
            (pop, prof, WeightPreset::ALL[i % 3].weights())
        })
        .collect();
    let toy = {
        let labels = ["A", "B", "C", "D", "E"].map(String::from).to_vec();
        let s = StratumPopulation::from_counts("S", ClassCount::new(vec![1, 1, 0, 0, 1]).unwrap()).unwrap();
        let pop = AreaPopulation::new("T", labels, vec![s]).unwrap();
        let prof = AggregateProfile::new(
            "toy",
            [("S".to_string(), 2)].into_iter().collect(),
            Some(ClassCount::new(vec![1, 1, 0, 0, 0]).unwrap()),
        );
        (pop, prof, EffortWeights::unit(5).unwrap())
    };
    instances.push(toy);
    let mut toy_result = (0.0, 0.0);
    for (i, (pop, prof, w)) in instances.iter().enumerate() {
        let exact = exact_geometric_score(prof, pop, w).unwrap().to_f64();
        let est = geometric_score(prof, pop, w, 200_000, 2024 + i as u64).unwrap().geo_score;
        worst = worst.max((est - exact).abs());
        if prof.id() == "toy" {
            toy_result = (est, exact);
        }
    }
    let elapsed = start.elapsed();
    let toy_ok = (toy_result.1 - 2.0 / 3.0).abs() < 1e-15 && (toy_result.0 - 2.0 / 3.0).abs() <= 0.01;
    check(
        5,
        "Monte Carlo agrees with enumeration",
        worst <= 0.01 && toy_ok && elapsed < Duration::from_secs(60),
        format!(
            "{} instances at N=200000, max |S - exact| {worst:.4}, toy {:.4} vs 2/3, {elapsed:.2?}",
            instances.len(),
            toy_result.0
        ),
    )
}

fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64 - p * n as f64).powi(2) / (p * n as f64))
        .sum();
    1.0 - ChiSquared::new((observed.len() - 1) as f64).unwrap().cdf(stat)
}

fn sampler_exactness() -> Check {
    let toy = StratumPopulation::from_counts("S", ClassCount::new(vec![1, 1, 0, 0, 1]).unwrap()).unwrap();
    let outcomes: [[u64; 5]; 3] = [[1, 1, 0, 0, 0], [1, 0, 0, 0, 1], [0, 1, 0, 0, 1]];
    let mut tally = [0u64; 3];
    let mut impossible = 0;
    for r in 0..100_000 {
        let c = draw_stratum(&toy, 2, SamplerSeed::new(6, r)).unwrap();
        match outcomes.iter().position(|o| o == c.as_slice()) {
            Some(i) => tally[i] += 1,
            None => impossible += 1,
        }
    }
    let p = chi_square_p(&tally, &[1.0 / 3.0; 3]);

    let pop = trusted_population("population_01A.csv");
    let demand: BTreeMap<String, u64> = pop
        .strata()
        .iter()
        .map(|s| (s.id().to_string(), s.expected_total() / 10 + 1))
        .collect();
    let prof = AggregateProfile::new("U", demand.clone(), None);
    let sampler = StratifiedSampler::new(&prof, &pop).unwrap();
    let reps = 100_000u64;
    let mut sums: BTreeMap<String, [f64; 5]> = BTreeMap::new();
    for r in 0..reps {
        for (id, counts) in sampler.draw(SamplerSeed::new(66, r)).per_stratum {
            let acc = sums.entry(id).or_insert([0.0; 5]);
            for (a, &c) in acc.iter_mut().zip(counts.as_slice()) {
                *a += c as f64;
            }
        }
    }
    let mut worst_z = 0.0f64;
    for s in pop.strata() {
        let (m, d) = (s.expected_total() as f64, demand[s.id()] as f64);
        for (j, &count) in s.counts().as_slice().iter().enumerate() {
            let p = count as f64 / m;
            let se = (d * p * (1.0 - p) * (m - d) / (m - 1.0) / reps as f64).sqrt();
            let z = (sums[s.id()][j] / reps as f64 - d * p).abs() / se;
            worst_z = worst_z.max(z);
        }
    }
    check(
        6,
        "sampler matches hypergeometric law",
        p > 0.001 && impossible == 0 && worst_z <= 4.0,
        format!("toy chi-square p = {p:.4} over 100000 draws; worst marginal mean {worst_z:.2} SE over 9 strata"),
    )
}

fn read_rows(file: &str) -> Vec<(String, u64, Vec<u64>)> {
    let table = PopulationTable::read(file, io::open(&data_dir().join(file)).unwrap()).unwrap();
    table
        .rows
        .into_iter()
        .map(|r| (r.stratum, r.expected_total, r.counts))
        .collect()
}

fn data_integrity() -> Check {
    let mut verbatim = true;
    let mut mismatched = Vec::new();
    for (file, printed) in [
        ("population_01A.csv", &AREA_01A[..]),
        ("population_13D.csv", &AREA_13D[..]),
    ] {
        let rows = read_rows(file);
        verbatim &= rows.len() == printed.len();
        for ((id, total, counts), (pid, ptotal, pcounts)) in rows.iter().zip(printed) {
            verbatim &= id == pid && total == ptotal && counts == pcounts;
            if counts.iter().sum::<u64>() != *total {
                mismatched.push(id.clone());
            }
        }
    }
    let mut surfaced = Vec::new();
    let mut exit_codes = Vec::new();
    for file in ["population_01A.csv", "population_13D.csv"] {
        let out = Command::new(env!("CARGO_BIN_EXE_geoscore"))
            .args(["validate", "--population"])
            .arg(data_dir().join(file))
            .output()
            .unwrap();
        exit_codes.push(out.status.code());
        for line in String::from_utf8(out.stdout).unwrap().lines() {
            if let Some(id) = line.split('`').nth(1) {
                surfaced.push(id.to_string());
            }
        }
    }
    let all_surfaced = surfaced == mismatched && exit_codes.iter().all(|c| *c == Some(1));
    let detail = format!(
        "transcription verbatim: {}; rows whose counts miss the printed total: {} ({}); surfaced by validate: {}",
        if verbatim { "yes" } else { "no" },
        mismatched.len(),
        mismatched.join(", "),
        if all_surfaced { "all" } else { "NOT all" },
    );
    let expected: Vec<&str> = vec![
        "MAT/09", "SECS-S/01", "SECS-S/02", "SECS-S/03", "SECS-S/04", "SECS-S/05", "SECS-S/06",
    ];
    let verdict = if mismatched.is_empty() && verbatim && all_surfaced {
        Verdict::Pass
    } else if verbatim && all_surfaced && mismatched == expected {
        Verdict::KnownFail
    } else {
        Verdict::Fail
    };
    Check {
        id: 7,
        title: "bundled populations match their printed totals",
        verdict,
        detail,
    }
}

/// A population file plus profiles and outcomes for `aggregates` synthetic
/// universities over area 01/A.
fn synthetic_inputs(dir: &Path, aggregates: usize, seed: u64) -> Vec<String> {
    let pop = trusted_population("population_01A.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profiles = Vec::new();
    let mut outcomes = Vec::new();
    for a in 0..aggregates {
        let mut demand = BTreeMap::new();
        let mut observed = vec![0u64; 5];
        for s in pop.strata() {
            let d = if rng.random_bool(0.3) { 0 } else { rng.random_range(0..=s.expected_total() / 15) };
            demand.insert(s.id().to_string(), d);
            for _ in 0..d {
                observed[rng.random_range(0..5)] += 1;
            }
        }
        if observed.iter().sum::<u64>() == 0 {
            demand.insert("MAT/05".into(), 1);
            observed[0] = 1;
        }
        let id = format!("University {a:02}");
        profiles.push(AggregateProfile::new(id.clone(), demand, None));
        outcomes.push(io::Outcome {
            line: 0,
            aggregate: id,
            counts: ClassCount::new(observed).unwrap(),
        });
    }
    let write = |name: &str, f: &dyn Fn(&mut std::fs::File)| {
        let path = dir.join(name);
        f(&mut std::fs::File::create(&path).unwrap());
        path.display().to_string()
    };
    let p = write("population.csv", &|f| io::write_population(&pop, f).unwrap());
    let f = write("profiles.csv", &|f| io::write_profiles(&profiles, f).unwrap());
    let o = write("outcomes.csv", &|f| io::write_outcomes(pop.class_labels(), &outcomes, f).unwrap());
    vec!["--population".into(), p, "--profiles".into(), f, "--outcomes".into(), o]
}

fn thread_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synthetic_inputs(dir.path(), 3, 8);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_geoscore"))
            .args(["score", "--seed", "20240101", "--threads", threads])
            .args(&inputs)
            .env_remove("GEOSCORE_THREADS")
            .output()
            .unwrap()
    };
    let start = Instant::now();
    let one = run("1");
    let eight = run("8");
    let elapsed = start.elapsed();
    let ok = one.status.success() && eight.status.success() && one.stdout == eight.stdout && !one.stdout.is_empty();
    check(
        8,
        "score output independent of thread count",
        ok,
        format!(
            "3 aggregates x presets A,B,C at N=200000: --threads 1 and 8 {} ({} bytes, {elapsed:.2?} for both)",
            if one.stdout == eight.stdout { "byte-identical" } else { "DIFFER" },
            one.stdout.len()
        ),
    )
}

fn performance() -> Check {
    let pop = trusted_population("population_01A.csv");
    let pooled: u64 = pop.strata().iter().map(|s| s.expected_total()).sum();
    // 500 products spread over the 9 strata roughly in proportion to size
    let mut demand: BTreeMap<String, u64> = pop
        .strata()
        .iter()
        .map(|s| (s.id().to_string(), (500 * s.expected_total() / pooled).max(1)))
        .collect();
    let short = 500 - demand.values().sum::<u64>();
    *demand.get_mut("MAT/05").unwrap() += short;
    let mut observed = pop.pooled_counts().into_vec();
    observed.iter_mut().for_each(|c| *c = *c * 500 / pooled);
    observed[0] += 500 - observed.iter().sum::<u64>();
    let prof = AggregateProfile::new("U", demand, Some(ClassCount::new(observed).unwrap()));
    let start = Instant::now();
    let est = geometric_score(&prof, &pop, &WeightPreset::A.weights(), 200_000, 9).unwrap();
    let elapsed = start.elapsed();
    check(
        9,
        "500 products over 9 strata, 200000 replicates, one thread",
        prof.total_demand() == 500 && elapsed < Duration::from_secs(60),
        format!("{elapsed:.2?} (geo_score {:.4})", est.geo_score),
    )
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn rank_table_and_compositions() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let inputs = synthetic_inputs(dir.path(), 50, 10);
    let out = Command::new(env!("CARGO_BIN_EXE_geoscore"))
        .args(["rank", "--seed", "7", "--replicates", "5000"])
        .args(&inputs)
        .env_remove("GEOSCORE_THREADS")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let (header, rows) = csv_rows(&text);
    let mut want = vec!["aggregate".to_string(), "R".into(), "R_rank".into()];
    for l in ["A", "B", "C"] {
        want.extend([format!("delta_{l}"), format!("geo_score_{l}"), format!("geo_rank_{l}")]);
    }
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let numbers = |name: &str| -> Vec<f64> { rows.iter().map(|r| r[col(name)].parse().unwrap()).collect() };
    let ranks = |name: &str| -> Vec<usize> { rows.iter().map(|r| r[col(name)].parse().unwrap()).collect() };
    let mut structural = out.status.success() && header == want && rows.len() == 50;
    if structural {
        let r_rank = ranks("R_rank");
        structural &= r_rank.windows(2).all(|w| w[0] <= w[1]);
        structural &= r_rank == competition_ranks(&numbers("R"));
        for l in ["A", "B", "C"] {
            structural &= ranks(&format!("geo_rank_{l}")) == competition_ranks(&numbers(&format!("geo_score_{l}")));
        }
    }

    let pop = trusted_population("population_13D.csv");
    let path = data_dir().join("profiles_13D_composition.csv");
    let profiles = io::load_profiles("profiles_13D_composition.csv", io::open(&path).unwrap(), &pop).unwrap();
    let vectors: Vec<Vec<u64>> = profiles.iter().map(|p| p.demand().values().copied().collect()).collect();
    let compositions = vectors == [vec![40, 4, 13, 7, 4, 33], vec![53, 0, 0, 0, 0, 47]]
        && profiles.iter().all(|p| p.validate(&pop).is_ok());
    check(
        10,
        "rank table structure and 13/D composition profiles",
        structural && compositions,
        format!(
            "50-row rank table {}; La Sapienza 40/4/13/7/4/33 and Milano Politecnico 53/0/0/0/0/47 {}",
            if structural { "well formed" } else { "MALFORMED" },
            if compositions { "validate" } else { "do NOT validate" }
        ),
    )
}

fn main() {
    let checks: [fn() -> Check; 10] = [
        closed_form_matches_oracle,
        worked_example,
        minkowski,
        hoeffding,
        monte_carlo_against_exact,
        sampler_exactness,
        data_integrity,
        thread_determinism,
        performance,
        rank_table_and_compositions,
    ];
    let mut unexpected = 0;
    for f in checks {
        let c = f();
        let label = match c.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                unexpected += 1;
                "FAIL"
            }
            Verdict::KnownFail => "FAIL (known data defect)",
        };
        println!("{label} criterion {:>2}: {}: {}", c.id, c.title, c.detail);
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion check(s) failed");
        std::process::exit(1);
    }
}
