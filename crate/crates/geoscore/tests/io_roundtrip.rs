use geoscore::io::{self, load_population, write_outcomes, write_population, write_profiles, Outcome};
use geoscore_core::{AggregateProfile, AreaPopulation, ClassCount, StratumPopulation};
use proptest::prelude::*;

fn population() -> impl Strategy<Value = AreaPopulation> {
    (2..=7usize, 1..=6usize).prop_flat_map(|(classes, strata)| {
        prop::collection::vec(prop::collection::vec(0..500u64, classes), strata).prop_map(move |rows| {
            let labels: Vec<String> = (0..classes).map(|j| format!("c{j}")).collect();
            let strata = rows
                .into_iter()
                .enumerate()
                .map(|(i, mut counts)| {
                    counts[0] += 1;
                    StratumPopulation::from_counts(format!("S/{i:02}"), ClassCount::new(counts).unwrap()).unwrap()
                })
                .collect();
            AreaPopulation::new("area 1", labels, strata).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn population_round_trips(pop in population()) {
        let mut text = Vec::new();
        write_population(&pop, &mut text).unwrap();
        let back = load_population("p.csv", text.as_slice()).unwrap();
        prop_assert_eq!(&back, &pop);
        let mut again = Vec::new();
        write_population(&back, &mut again).unwrap();
        prop_assert_eq!(text, again);
    }

    #[test]
    fn profiles_and_outcomes_round_trip(pop in population(), picks in prop::collection::vec(any::<u64>(), 1..5)) {
        let profiles: Vec<AggregateProfile> = picks
            .iter()
            .enumerate()
            .map(|(a, seed)| {
                let demand = pop
                    .strata()
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.id().to_string(), seed.rotate_left(i as u32 * 7) % (s.expected_total() + 1)))
                    .collect();
                AggregateProfile::new(format!("U{a}"), demand, None)
            })
            .collect();
        let mut text = Vec::new();
        write_profiles(&profiles, &mut text).unwrap();
        let back = io::load_profiles("f.csv", text.as_slice(), &pop).unwrap();
        prop_assert_eq!(&back, &profiles);

        let outcomes: Vec<Outcome> = picks
            .iter()
            .enumerate()
            .map(|(a, seed)| {
                let mut counts: Vec<u64> = (0..pop.classes()).map(|j| seed.rotate_right(j as u32 * 5) % 40).collect();
                counts[0] += 1;
                Outcome { line: a as u64 + 2, aggregate: format!("U{a}"), counts: ClassCount::new(counts).unwrap() }
            })
            .collect();
        let mut text = Vec::new();
        write_outcomes(pop.class_labels(), &outcomes, &mut text).unwrap();
        let back = io::load_outcomes("o.csv", text.as_slice(), Some(pop.class_labels())).unwrap();
        prop_assert_eq!(back, outcomes);
    }
}

#[test]
fn bundled_populations_parse_verbatim() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    for (file, rows) in [("population_01A.csv", 9), ("population_13D.csv", 6)] {
        let path = std::path::Path::new(dir).join(file);
        let table = io::PopulationTable::read(file, io::open(&path).unwrap()).unwrap();
        assert_eq!(table.rows.len(), rows);
        assert_eq!(table.class_labels, ["A", "B", "C", "D", "E"]);
    }
}
