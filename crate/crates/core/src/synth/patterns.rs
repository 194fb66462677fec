use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{assemble, latent, GeneratorSpec, Synthetic};
use crate::error::{Error, Result};
use crate::stats::derive_seed;

/// Requested shares of the five exporting-pattern categories.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternMix {
    pub constant_exporter: f64,
    pub non_exporter: f64,
    pub switching_exporter: f64,
    pub switching_non_exporter: f64,
    pub discontinuous: f64,
}

impl PatternMix {
    /// Shares ordered from the least to the most export-prone category.
    fn shares(&self) -> [f64; 5] {
        [
            self.non_exporter,
            self.switching_non_exporter,
            self.discontinuous,
            self.switching_exporter,
            self.constant_exporter,
        ]
    }
}

// indices into PatternMix::shares
const NEVER: usize = 0;
const STOPPING: usize = 1;
const DISCONTINUOUS: usize = 2;
const STARTING: usize = 3;
const CONSTANT: usize = 4;

/// Firm counts per category (same order as the shares) by largest
/// remainders, so `round(share * n)` is hit exactly whenever it sums to n.
pub fn allocate(mix: &PatternMix, n: usize, years: usize) -> Result<[usize; 5]> {
    let shares = mix.shares();
    if shares.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Spec("pattern shares must be non-negative".into()));
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Spec(format!("pattern shares sum to {total}, not 1")));
    }
    if years < 2 && (shares[STOPPING] > 0.0 || shares[STARTING] > 0.0) {
        return Err(Error::Spec("switching patterns need at least 2 years".into()));
    }
    if years < 3 && shares[DISCONTINUOUS] > 0.0 {
        return Err(Error::Spec("discontinuous patterns need at least 3 years".into()));
    }
    let exact: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if shares[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    Ok([counts[0], counts[1], counts[2], counts[3], counts[4]])
}

fn path(category: usize, t: usize, slot: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    match category {
        NEVER => vec![false; t],
        CONSTANT => vec![true; t],
        STARTING => (0..t).map(|y| y >= 1 + slot % (t - 1)).collect(),
        STOPPING => (0..t).map(|y| y < 1 + slot % (t - 1)).collect(),
        _ => {
            // two or more switches at distinct year boundaries
            let k = rng.random_range(2..t);
            let mut bounds: Vec<usize> = (1..t).collect();
            bounds.shuffle(rng);
            let mut cuts = bounds[..k].to_vec();
            cuts.sort_unstable();
            let mut state = rng.random::<bool>();
            let mut out = Vec::with_capacity(t);
            let mut next = 0;
            for y in 0..t {
                if next < cuts.len() && cuts[next] == y {
                    state = !state;
                    next += 1;
                }
                out.push(state);
            }
            out
        }
    }
}

/// Panel whose label paths follow the requested category mix. Firms are
/// ranked by their mean true exporting probability and the categories are
/// handed out from the least to the most export-prone, so predictors stay
/// informative. Switching firms cycle through every start / stop year.
pub fn pattern_generate(spec: &GeneratorSpec, mix: &PatternMix) -> Result<Synthetic> {
    let t = spec.years;
    let counts = allocate(mix, spec.n_firms, t)?;
    let lat = latent(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, crate::stats::streams::SIMULATE ^ 0x7061_7474));
    let mut firms: Vec<(usize, f64)> = (0..spec.n_firms)
        .map(|f| (f, lat.probability[f * t..(f + 1) * t].iter().sum::<f64>()))
        .collect();
    firms.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut labels = vec![false; spec.n_firms * t];
    let mut at = 0;
    for (category, &count) in counts.iter().enumerate() {
        let mut group: Vec<usize> = firms[at..at + count].iter().map(|f| f.0).collect();
        at += count;
        group.shuffle(&mut rng);
        for (slot, f) in group.into_iter().enumerate() {
            labels[f * t..(f + 1) * t].copy_from_slice(&path(category, t, slot, &mut rng));
        }
    }
    assemble(spec, lat, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{classify_patterns, label, LabelDefinition, PatternCategory};
    use crate::synth::{Layout, Missingness};
    use std::collections::BTreeMap;

    fn spec(n: usize, years: usize) -> GeneratorSpec {
        GeneratorSpec {
            n_firms: n,
            years,
            layout: Layout::Generic { p: 3 },
            missingness: Missingness::Mcar { rate: 0.0 },
            ..GeneratorSpec::default()
        }
    }

    fn category_counts(s: &Synthetic) -> BTreeMap<&'static str, usize> {
        let l = label(&s.panel, LabelDefinition::PositiveRevenue).unwrap();
        let mut out = BTreeMap::new();
        for c in classify_patterns(&l).unwrap() {
            *out.entry(c.category.name()).or_default() += 1;
        }
        out
    }

    #[test]
    fn constant_only() {
        let s = pattern_generate(&spec(50, 9), &PatternMix { constant_exporter: 1.0, ..Default::default() }).unwrap();
        assert_eq!(category_counts(&s), BTreeMap::from([("constant_exporter", 50)]));
    }

    #[test]
    fn exact_discontinuous_share() {
        let mix = PatternMix { discontinuous: 0.3, non_exporter: 0.7, ..Default::default() };
        let s = pattern_generate(&spec(1000, 9), &mix).unwrap();
        assert_eq!(category_counts(&s)["discontinuous"], 300);
        let l = label(&s.panel, LabelDefinition::PositiveRevenue).unwrap();
        for c in classify_patterns(&l).unwrap() {
            if let PatternCategory::Discontinuous { export_years } = c.category {
                assert!(export_years >= 1);
            }
        }
    }

    #[test]
    fn start_years_cover_timeline() {
        let mix = PatternMix { switching_exporter: 1.0, ..Default::default() };
        let s = pattern_generate(&spec(40, 5), &mix).unwrap();
        let l = label(&s.panel, LabelDefinition::PositiveRevenue).unwrap();
        let starts: std::collections::BTreeSet<i32> = classify_patterns(&l)
            .unwrap()
            .into_iter()
            .map(|c| match c.category {
                PatternCategory::SwitchingExporter { start_year } => start_year,
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(starts.into_iter().collect::<Vec<_>>(), vec![2011, 2012, 2013, 2014]);
    }

    #[test]
    fn infeasible_mixes_rejected() {
        let d = PatternMix { discontinuous: 1.0, ..Default::default() };
        assert!(matches!(pattern_generate(&spec(10, 2), &d), Err(Error::Spec(_))));
        let s = PatternMix { switching_exporter: 1.0, ..Default::default() };
        assert!(matches!(pattern_generate(&spec(10, 1), &s), Err(Error::Spec(_))));
        let bad = PatternMix { constant_exporter: 0.5, ..Default::default() };
        assert!(matches!(allocate(&bad, 10, 5), Err(Error::Spec(_))));
    }

    #[test]
    fn allocation_is_exact_when_possible() {
        let mix = PatternMix {
            constant_exporter: 0.25,
            non_exporter: 0.35,
            switching_exporter: 0.1,
            switching_non_exporter: 0.1,
            discontinuous: 0.2,
        };
        assert_eq!(allocate(&mix, 1000, 9).unwrap(), [350, 100, 200, 100, 250]);
        assert_eq!(allocate(&mix, 7, 9).unwrap().iter().sum::<usize>(), 7);
    }
}
