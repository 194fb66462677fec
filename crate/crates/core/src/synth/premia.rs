use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::columns::{INDUSTRY, INDUSTRY4, REGION};
use crate::dataset::{CategoricalColumn, FirmPanel, NumericColumn, RowKey};
use crate::error::{Error, Result};
use crate::features::PredictionTable;
use crate::scoring::{score, ScoreTable};
use crate::stats::{derive_seed, streams};

/// Outcome column written by [`simulate_premia`].
pub const PREMIA_OUTCOME: &str = "cash";

/// Log-linear resource process with risk-class, size, year, industry and
/// region effects plus a firm random effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PremiaSimSpec {
    pub n_firms: usize,
    pub first_year: i32,
    pub years: usize,
    pub intercept: f64,
    /// Effect of each risk class 2..=10 relative to class 1.
    pub theta: Vec<f64>,
    pub size_coefficient: f64,
    pub regions: usize,
    pub industries: usize,
    pub firm_sd: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for PremiaSimSpec {
    fn default() -> Self {
        Self {
            n_firms: 200,
            first_year: 2010,
            years: 8,
            intercept: 11.6338,
            theta: (2..=10).map(|c| 0.12 * (c - 1) as f64).collect(),
            size_coefficient: 0.8,
            regions: 4,
            industries: 5,
            firm_sd: 0.5,
            noise_sd: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PremiaSim {
    pub panel: FirmPanel,
    pub scores: ScoreTable,
    /// True value of every coefficient, named as in the fitted model.
    pub truth: BTreeMap<String, f64>,
}

/// Simulates a panel and score table from known premia coefficients.
/// Scores move around a firm-level level so risk classes are persistent
/// within firms; reference levels (class 1, first year, first industry and
/// region code) carry zero effects.
pub fn simulate_premia(spec: &PremiaSimSpec) -> Result<PremiaSim> {
    if spec.theta.len() != 9 {
        return Err(Error::Spec(format!("expected 9 risk-class effects, got {}", spec.theta.len())));
    }
    if spec.n_firms < 2 || spec.years < 2 || spec.regions == 0 || spec.industries == 0 {
        return Err(Error::Spec("premia simulation needs at least 2 firms, 2 years, 1 region and 1 industry".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, streams::SIMULATE));
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let region_codes: Vec<String> = (0..spec.regions).map(|r| format!("R{r:02}")).collect();
    let industry_codes: Vec<String> = (0..spec.industries).map(|s| format!("{:04}", 1000 + 100 * s)).collect();
    let region_fx: Vec<f64> = (0..spec.regions).map(|r| if r == 0 { 0.0 } else { 0.3 * normal() }).collect();
    let industry_fx: Vec<f64> = (0..spec.industries).map(|s| if s == 0 { 0.0 } else { 0.3 * normal() }).collect();
    let year_fx: Vec<f64> = (0..spec.years).map(|t| 0.04 * t as f64).collect();

    let mut truth = BTreeMap::new();
    truth.insert("intercept".to_string(), spec.intercept);
    for (i, th) in spec.theta.iter().enumerate() {
        truth.insert(format!("risk_{}", i + 2), *th);
    }
    truth.insert("log_size".to_string(), spec.size_coefficient);
    for t in 1..spec.years {
        truth.insert(format!("year_{}", spec.first_year + t as i32), year_fx[t]);
    }
    for s in 1..spec.industries {
        truth.insert(format!("industry_{}", industry_codes[s]), industry_fx[s]);
    }
    for r in 1..spec.regions {
        truth.insert(format!("region_{}", region_codes[r]), region_fx[r]);
    }

    let rows = spec.n_firms * spec.years;
    let mut ids = Vec::with_capacity(rows);
    let mut years = Vec::with_capacity(rows);
    let mut keys = Vec::with_capacity(rows);
    let mut probs = Vec::with_capacity(rows);
    let mut employees = Vec::with_capacity(rows);
    let mut region = Vec::with_capacity(rows);
    let mut industry = Vec::with_capacity(rows);
    let mut raw = Vec::with_capacity(rows);
    for f in 0..spec.n_firms {
        // round-robin codes keep every level populated
        let r = f % spec.regions;
        let s = (f / spec.regions) % spec.industries;
        let level = normal();
        let effect = spec.firm_sd * normal();
        let log_emp0 = 3.0 + 0.8 * normal();
        for t in 0..spec.years {
            let id = format!("P{f:04}");
            let year = spec.first_year + t as i32;
            let p = crate::stats::normal_cdf(0.8 * level + 0.6 * normal());
            let log_emp = log_emp0 + 0.2 * normal();
            keys.push(RowKey::new(id.clone(), year));
            ids.push(id);
            years.push(year);
            probs.push(p);
            employees.push(log_emp.exp());
            region.push(Some(region_codes[r].clone()));
            industry.push(Some(industry_codes[s].clone()));
            raw.push((log_emp, t, s, r, effect));
        }
    }
    let scores = score(&PredictionTable { keys, scores: probs })?;
    let outcome: Vec<Option<f64>> = raw
        .iter()
        .zip(&scores.rows)
        .map(|(&(log_emp, t, s, r, effect), row)| {
            let theta = if row.risk_class == 1 { 0.0 } else { spec.theta[row.risk_class as usize - 2] };
            let y = spec.intercept
                + theta
                + spec.size_coefficient * log_emp
                + year_fx[t]
                + industry_fx[s]
                + region_fx[r]
                + effect
                + spec.noise_sd * normal();
            Some(y.exp())
        })
        .collect();
    let two_digit: Vec<Option<String>> = industry.iter().map(|c| c.as_ref().map(|s| s[..2].to_string())).collect();
    let panel = FirmPanel::new(
        ids,
        years,
        vec![
            NumericColumn::from_options(PREMIA_OUTCOME, outcome),
            NumericColumn::from_options("employees", employees.into_iter().map(Some)),
        ],
        vec![
            CategoricalColumn { name: REGION.into(), values: region },
            CategoricalColumn { name: INDUSTRY.into(), values: two_digit },
            CategoricalColumn { name: INDUSTRY4.into(), values: industry },
        ],
    )?;
    Ok(PremiaSim { panel, scores, truth })
}
