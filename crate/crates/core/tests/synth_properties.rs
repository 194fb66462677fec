use exportscore::dataset::{classify_patterns, derive_predictors, label, write_csv, LabelDefinition};
use exportscore::synth::{allocate, generate, pattern_generate, GeneratorSpec, Layout, Missingness, PatternMix};
use exportscore::FirmPanel;
use proptest::prelude::*;

const DEPENDS_ON: [(&str, &[&str]); 12] = [
    ("capital_intensity", &["fixed_assets", "employees"]),
    ("labour_productivity", &["value_added", "employees"]),
    ("icr", &["ebit", "interest_paid"]),
    ("financial_constraints", &["interest_paid", "cash_flow"]),
    ("roa", &["ebitda", "total_assets"]),
    ("financial_sustainability", &["financial_expenses", "operating_revenue"]),
    ("size_age", &["total_assets", "incorporation_year"]),
    ("capital_adequacy", &["shareholders_funds", "loans", "long_term_debt"]),
    ("liquidity_ratio", &["current_assets", "stocks", "current_liabilities"]),
    ("liquidity_returns", &["cash_flow", "total_assets"]),
    ("size", &["employees"]),
    ("avg_wage_bill", &["costs_of_employees", "employees"]),
];

fn csv_bytes(p: &FirmPanel) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(p, &mut buf, &[]).unwrap();
    buf
}

fn small(seed: u64, missingness: Missingness) -> GeneratorSpec {
    GeneratorSpec { n_firms: 80, years: 3, missingness, seed, ..GeneratorSpec::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn derived_cells_are_missing_when_an_input_is(seed in 0u64..10_000, rate in 0.05f64..0.6) {
        let s = generate(&small(seed, Missingness::Mcar { rate })).unwrap();
        let p = derive_predictors(&s.panel).unwrap();
        for (derived, inputs) in DEPENDS_ON {
            let out = p.numeric(derived).unwrap();
            for r in 0..p.n_rows() {
                if inputs.iter().any(|c| p.numeric(c).unwrap().missing[r]) {
                    prop_assert!(out.missing[r], "{derived} present at row {r} with a missing input");
                }
            }
        }
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in 0u64..10_000) {
        let spec = small(seed, Missingness::Mnar { rate: 0.2, informativeness: 2.0 });
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        prop_assert_eq!(csv_bytes(&a.panel), csv_bytes(&b.panel));
        prop_assert_eq!(&a.truth.label, &b.truth.label);
        let c = generate(&GeneratorSpec { seed: seed + 1, ..spec }).unwrap();
        prop_assert_ne!(csv_bytes(&a.panel), csv_bytes(&c.panel));
    }

    #[test]
    fn labels_match_the_revenue_columns(seed in 0u64..10_000) {
        let s = generate(&small(seed, Missingness::Mcar { rate: 0.1 })).unwrap();
        let labels = label(&s.panel, LabelDefinition::PositiveRevenue).unwrap();
        prop_assert_eq!(&labels.labels, &s.truth.label);
        let prevalence = s.truth.prevalence();
        prop_assert!((0.05..=0.95).contains(&prevalence));
    }

    #[test]
    fn allocation_is_exact_and_patterns_round_trip(
        w in prop::collection::vec(0.0f64..1.0, 5),
        n in 10usize..120,
        years in 3usize..7,
        seed in 0u64..1000,
    ) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 0.0);
        let mix = PatternMix {
            constant_exporter: w[0] / total,
            non_exporter: w[1] / total,
            switching_exporter: w[2] / total,
            switching_non_exporter: w[3] / total,
            discontinuous: w[4] / total,
        };
        let counts = allocate(&mix, n, years).unwrap();
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        let spec = GeneratorSpec {
            n_firms: n,
            years,
            layout: Layout::Generic { p: 3 },
            missingness: Missingness::Mcar { rate: 0.0 },
            seed,
            ..GeneratorSpec::default()
        };
        let s = pattern_generate(&spec, &mix).unwrap();
        let labels = label(&s.panel, LabelDefinition::PositiveRevenue).unwrap();
        let classes = classify_patterns(&labels).unwrap();
        let names = ["non_exporter", "switching_non_exporter", "discontinuous", "switching_exporter", "constant_exporter"];
        for (name, want) in names.iter().zip(counts) {
            prop_assert_eq!(classes.iter().filter(|c| c.category.name() == *name).count(), want);
        }
    }
}

#[test]
fn extreme_prevalence_is_a_spec_error() {
    for intercept in [-8.0, 8.0] {
        let spec = GeneratorSpec { intercept: Some(intercept), ..small(1, Missingness::Mcar { rate: 0.0 }) };
        assert_eq!(generate(&spec).unwrap_err().kind(), "spec");
    }
}

#[test]
fn infeasible_mixes_are_rejected() {
    let mix = PatternMix {
        constant_exporter: 0.5,
        non_exporter: 0.0,
        switching_exporter: 0.0,
        switching_non_exporter: 0.0,
        discontinuous: 0.5,
    };
    assert!(allocate(&mix, 100, 2).is_err());
    let bad = PatternMix { constant_exporter: 0.7, ..mix };
    assert!(allocate(&bad, 100, 5).is_err());
}
