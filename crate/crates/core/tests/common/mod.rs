#![allow(dead_code)]

use geoscore_core::{AggregateProfile, AreaPopulation, ClassCount, StratumPopulation};

/// Area 01/A class counts (A..E) per sector. MAT/09's printed total (230)
/// disagrees with its counts, so totals here are the count sums.
pub const MATHEMATICS: [(&str, [u64; 5]); 9] = [
    ("MAT/01", [25, 20, 7, 12, 8]),
    ("MAT/02", [67, 97, 59, 32, 64]),
    ("MAT/03", [246, 190, 106, 82, 176]),
    ("MAT/04", [18, 45, 28, 20, 21]),
    ("MAT/05", [616, 388, 220, 94, 227]),
    ("MAT/06", [97, 71, 42, 22, 23]),
    ("MAT/07", [197, 147, 98, 88, 79]),
    ("MAT/08", [245, 143, 83, 36, 56]),
    ("MAT/09", [169, 68, 30, 14, 16]),
];

pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
}

pub fn area(strata: &[(&str, &[u64])]) -> AreaPopulation {
    let classes = strata[0].1.len();
    AreaPopulation::new(
        "T",
        labels(classes),
        strata
            .iter()
            .map(|(id, c)| StratumPopulation::from_counts(*id, ClassCount::new(c.to_vec()).unwrap()).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn mathematics() -> AreaPopulation {
    let rows: Vec<(&str, &[u64])> = MATHEMATICS.iter().map(|(id, c)| (*id, &c[..])).collect();
    area(&rows)
}

pub fn profile(id: &str, demand: &[(&str, u64)], observed: Option<&[u64]>) -> AggregateProfile {
    AggregateProfile::new(
        id,
        demand.iter().map(|(s, d)| (s.to_string(), *d)).collect(),
        observed.map(|o| ClassCount::new(o.to_vec()).unwrap()),
    )
}
