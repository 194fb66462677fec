//! Shared fixtures for the benchmarks.

use exportscore::dataset::{label, LabelDefinition};
use exportscore::synth::{generate, GeneratorSpec, Layout, Missingness};
use exportscore::{Dataset, FirmPanel};

/// A generated panel with its full-row dataset.
pub struct Fixture {
    pub panel: FirmPanel,
    pub data: Dataset,
}

pub fn fixture(n_firms: usize, years: usize, layout: Layout, missingness: Missingness) -> Fixture {
    let spec = GeneratorSpec { n_firms, years, layout, missingness, seed: 11, ..GeneratorSpec::default() };
    let s = generate(&spec).expect("valid generator spec");
    let labels = label(&s.panel, LabelDefinition::PositiveRevenue).expect("labels");
    let data = Dataset::from_panel(&s.panel, &labels, &spec.predictors(), None).expect("dataset");
    Fixture { panel: s.panel, data }
}
