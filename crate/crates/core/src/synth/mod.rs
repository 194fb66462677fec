//! Synthetic firm panels with a known probit ground truth and controllable
//! missingness, pattern-injected panels, and a simulator for the premia
//! regression.

mod patterns;
mod premia;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::columns::{
    default_predictors, AUXILIARY, EXPORT_REVENUE, FLAGS, INDUSTRY, INDUSTRY4, PRECOMPUTED, RAW_ACCOUNTS, REGION,
    TOTAL_REVENUE,
};
use crate::dataset::{derive_predictors, CategoricalColumn, FirmPanel, NumericColumn, RowKey};
use crate::error::{Error, Result};
use crate::stats::{derive_seed, mean, normal_cdf, sample_sd};

pub use patterns::{allocate, pattern_generate, PatternMix};
pub use premia::{simulate_premia, PremiaSim, PremiaSimSpec, PREMIA_OUTCOME};

/// Bounds on the implied share of exporting firm-years.
pub const PREVALENCE_BOUNDS: (f64, f64) = (0.05, 0.95);
pub const DEFAULT_INFORMATIVENESS: f64 = 2.0;

/// Region codes (NUTS-2 style) and their sampling weights.
pub const REGIONS: [(&str, f64); 13] = [
    ("FR10", 0.22),
    ("FRB0", 0.05),
    ("FRC1", 0.05),
    ("FRC2", 0.04),
    ("FRD1", 0.05),
    ("FRD2", 0.04),
    ("FRE1", 0.08),
    ("FRE2", 0.03),
    ("FRF1", 0.06),
    ("FRG0", 0.07),
    ("FRH0", 0.06),
    ("FRI1", 0.10),
    ("FRK2", 0.15),
];

/// Two-digit manufacturing industry codes.
pub const INDUSTRIES: [&str; 12] = ["10", "13", "20", "21", "22", "24", "25", "26", "27", "28", "29", "32"];

const FACTORS: usize = 3;

fn default_informativeness() -> f64 {
    DEFAULT_INFORMATIVENESS
}

/// How predictor cells are masked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Missingness {
    /// Every maskable cell independently with probability `rate`.
    Mcar { rate: f64 },
    /// A firm-year reports incomplete accounts with probability
    /// `logistic(logit(rate) - w * (size_z + (2y - 1)))`, where `w` is the
    /// informativeness; incomplete rows lose each maskable cell with
    /// probability one half (at least one cell). With `w = 0` this is
    /// independent of size and label.
    Mnar {
        rate: f64,
        #[serde(default = "default_informativeness")]
        informativeness: f64,
    },
}

impl Missingness {
    fn validate(&self) -> Result<()> {
        let rate = match *self {
            Missingness::Mcar { rate } => rate,
            Missingness::Mnar { rate, informativeness } => {
                if !(informativeness >= 0.0 && informativeness.is_finite()) {
                    return Err(Error::Spec(format!("informativeness must be non-negative, got {informativeness}")));
                }
                if rate <= 0.0 || rate >= 1.0 {
                    return Err(Error::Spec(format!("MNAR rate must lie in (0, 1), got {rate}")));
                }
                rate
            }
        };
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Spec(format!("missingness rate must lie in [0, 1), got {rate}")));
        }
        Ok(())
    }
}

/// Which columns the generator writes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    /// Financial accounts, flags, TFP and markup, then the derived
    /// indicators: 52 predictors.
    Accounts,
    /// Factor-correlated standard-normal predictors `x1..xp`.
    Generic { p: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_firms: usize,
    pub first_year: i32,
    pub years: usize,
    pub layout: Layout,
    /// Probit coefficients on the drivers; layout defaults when absent.
    pub coefficients: Option<Vec<f64>>,
    pub intercept: Option<f64>,
    /// Coefficient on the product of the first two drivers.
    pub interaction: Option<f64>,
    /// Scale of the latent probit error.
    pub noise: f64,
    /// Year-to-year autocorrelation of the latent factors.
    pub persistence: f64,
    pub missingness: Missingness,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            n_firms: 1000,
            first_year: 2010,
            years: 8,
            layout: Layout::Accounts,
            coefficients: None,
            intercept: None,
            interaction: None,
            noise: 1.0,
            persistence: 0.8,
            missingness: Missingness::Mnar {
                rate: 0.2,
                informativeness: DEFAULT_INFORMATIVENESS,
            },
            seed: 0,
        }
    }
}

/// Accounts-layout drivers of the probit index, by name.
pub const ACCOUNT_DRIVERS: [&str; 5] = ["log_employees", "tfp", "log_labour_productivity", "leverage", "outward_fdi"];

impl GeneratorSpec {
    /// Model predictors present in generated panels.
    pub fn predictors(&self) -> Vec<String> {
        match self.layout {
            Layout::Accounts => default_predictors(),
            Layout::Generic { p } => (1..=p).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn drivers(&self) -> Vec<String> {
        match self.layout {
            Layout::Accounts => ACCOUNT_DRIVERS.iter().map(|s| s.to_string()).collect(),
            Layout::Generic { .. } => self.predictors(),
        }
    }

    pub fn resolved_coefficients(&self) -> Vec<f64> {
        if let Some(c) = &self.coefficients {
            return c.clone();
        }
        match self.layout {
            Layout::Accounts => vec![0.8, 0.5, 0.3, -0.3, 0.4],
            Layout::Generic { p } => {
                let base = [1.0, -0.6, 0.5, 0.3, -0.2];
                (0..p).map(|j| base.get(j).copied().unwrap_or(0.0)).collect()
            }
        }
    }

    pub fn resolved_intercept(&self) -> f64 {
        self.intercept.unwrap_or(match self.layout {
            Layout::Accounts => -0.3,
            Layout::Generic { .. } => 0.0,
        })
    }

    pub fn resolved_interaction(&self) -> f64 {
        self.interaction.unwrap_or(match self.layout {
            Layout::Accounts => 0.2,
            Layout::Generic { .. } => 0.0,
        })
    }

    /// A copy with every optional coefficient filled in.
    pub fn resolved(&self) -> GeneratorSpec {
        GeneratorSpec {
            coefficients: Some(self.resolved_coefficients()),
            intercept: Some(self.resolved_intercept()),
            interaction: Some(self.resolved_interaction()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_firms == 0 || self.years == 0 {
            return Err(Error::Spec("need at least one firm and one year".into()));
        }
        if let Layout::Generic { p } = self.layout {
            if p < 2 {
                return Err(Error::Spec(format!("generic layout needs p >= 2, got {p}")));
            }
        }
        let k = self.drivers().len();
        if self.resolved_coefficients().len() != k {
            return Err(Error::Spec(format!(
                "expected {k} coefficients, got {}",
                self.resolved_coefficients().len()
            )));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::Spec(format!("noise scale must be positive, got {}", self.noise)));
        }
        if !(0.0..1.0).contains(&self.persistence) {
            return Err(Error::Spec(format!("persistence must lie in [0, 1), got {}", self.persistence)));
        }
        self.missingness.validate()
    }
}

/// True exporting probabilities and the realized labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub keys: Vec<RowKey>,
    pub probability: Vec<f64>,
    pub label: Vec<bool>,
    /// Any predictor cell of the row was masked by the generator.
    pub masked: Vec<bool>,
}

impl GroundTruth {
    pub fn prevalence(&self) -> f64 {
        mean(&self.probability)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}").map_err(|e| Error::io("<truth>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["firm_id", "year", "probability", "label", "masked"])?;
        for i in 0..self.keys.len() {
            w.write_record([
                self.keys[i].firm_id.clone(),
                self.keys[i].year.to_string(),
                self.probability[i].to_string(),
                (self.label[i] as u8).to_string(),
                (self.masked[i] as u8).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<truth>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub panel: FirmPanel,
    pub truth: GroundTruth,
}

/// Fully observed columns and the probit index before labels and masking.
pub(crate) struct Latent {
    pub firm_ids: Vec<String>,
    pub years: Vec<i32>,
    /// Maskable columns.
    pub columns: Vec<(String, Vec<f64>)>,
    pub regions: Vec<String>,
    pub industries: Vec<String>,
    pub industries4: Vec<String>,
    pub total_revenue: Vec<f64>,
    /// Standardized size driving MNAR masking.
    pub size_z: Vec<f64>,
    pub probability: Vec<f64>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    let s = sample_sd(v);
    let s = if s > 0.0 { s } else { 1.0 };
    v.iter().map(|x| (x - m) / s).collect()
}

fn pick_region(rng: &mut ChaCha8Rng) -> &'static str {
    let total: f64 = REGIONS.iter().map(|r| r.1).sum();
    let mut u = rng.random::<f64>() * total;
    for (code, w) in REGIONS {
        if u < w {
            return code;
        }
        u -= w;
    }
    REGIONS[REGIONS.len() - 1].0
}

/// AR(1) path of length `t` with unit marginal variance, starting from
/// `start`.
fn ar_path(rng: &mut ChaCha8Rng, start: f64, t: usize, rho: f64) -> Vec<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(t);
    let mut v = start;
    for _ in 0..t {
        out.push(v);
        v = rho * v + innov * normal(rng);
    }
    out
}

pub(crate) fn latent(spec: &GeneratorSpec) -> Result<Latent> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, crate::stats::streams::SIMULATE));
    let (n, t) = (spec.n_firms, spec.years);
    let width = n.to_string().len().max(4);
    let mut firm_ids = Vec::with_capacity(n * t);
    let mut years = Vec::with_capacity(n * t);
    let mut regions = Vec::with_capacity(n * t);
    let mut industries = Vec::with_capacity(n * t);
    let mut industries4 = Vec::with_capacity(n * t);
    // factor paths, per factor, row-major over firm-years
    let mut factors: Vec<Vec<f64>> = vec![Vec::with_capacity(n * t); FACTORS];
    let mut firm_level: Vec<[f64; FACTORS]> = Vec::with_capacity(n);
    for f in 0..n {
        let region = pick_region(&mut rng);
        let industry = INDUSTRIES[rng.random_range(0..INDUSTRIES.len())];
        let industry4 = format!("{industry}{}", rng.random_range(1..=3) * 10);
        let mut base = [0.0; FACTORS];
        for (k, fac) in factors.iter_mut().enumerate() {
            base[k] = normal(&mut rng);
            fac.extend(ar_path(&mut rng, base[k], t, spec.persistence));
        }
        firm_level.push(base);
        for y in 0..t {
            firm_ids.push(format!("F{f:0width$}"));
            years.push(spec.first_year + y as i32);
            regions.push(region.to_string());
            industries.push(industry.to_string());
            industries4.push(industry4.clone());
        }
    }
    let rows = n * t;

    let (columns, drivers, size_raw, total_revenue) = match spec.layout {
        Layout::Generic { p } => {
            let mut cols = Vec::with_capacity(p);
            for j in 0..p {
                let mut load = [0.2; FACTORS];
                load[j % FACTORS] = 0.7;
                let idio_sd = (1.0 - load.iter().map(|l| l * l).sum::<f64>()).sqrt();
                let mut v = Vec::with_capacity(rows);
                for f in 0..n {
                    let start = normal(&mut rng);
                    let idio = ar_path(&mut rng, start, t, spec.persistence);
                    for (y, e) in idio.iter().enumerate() {
                        let r = f * t + y;
                        let common: f64 = (0..FACTORS).map(|k| load[k] * factors[k][r]).sum();
                        v.push(common + idio_sd * e);
                    }
                }
                cols.push((format!("x{}", j + 1), v));
            }
            let drivers: Vec<Vec<f64>> = cols.iter().map(|c| c.1.clone()).collect();
            let size = cols[0].1.clone();
            let revenue: Vec<f64> = (0..rows).map(|r| 1e6 * (0.5 * factors[0][r] + 0.3 * normal(&mut rng)).exp()).collect();
            (cols, drivers, size, revenue)
        }
        Layout::Accounts => accounts(&mut rng, &factors, &firm_level, n, t, spec.first_year),
    };

    let beta = spec.resolved_coefficients();
    let b0 = spec.resolved_intercept();
    let gamma = spec.resolved_interaction();
    let z: Vec<Vec<f64>> = drivers
        .iter()
        .map(|d| if is_binary(d) { d.clone() } else { standardize(d) })
        .collect();
    let probability: Vec<f64> = (0..rows)
        .map(|r| {
            let eta = b0 + beta.iter().zip(&z).map(|(b, d)| b * d[r]).sum::<f64>() + gamma * z[0][r] * z[1][r];
            normal_cdf(eta / spec.noise)
        })
        .collect();
    let prevalence = mean(&probability);
    if prevalence <= PREVALENCE_BOUNDS.0 || prevalence >= PREVALENCE_BOUNDS.1 {
        return Err(Error::Spec(format!(
            "implied export prevalence {prevalence:.4} outside ({}, {})",
            PREVALENCE_BOUNDS.0, PREVALENCE_BOUNDS.1
        )));
    }
    Ok(Latent {
        firm_ids,
        years,
        columns,
        regions,
        industries,
        industries4,
        total_revenue,
        size_z: standardize(&size_raw),
        probability,
    })
}

fn is_binary(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0 || x == 1.0)
}

type AccountsOut = (Vec<(String, Vec<f64>)>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Accounts in euro, log-normal around the size (factor 0), productivity
/// (factor 1) and financial-structure (factor 2) factors.
fn accounts(
    rng: &mut ChaCha8Rng,
    factors: &[Vec<f64>],
    firm_level: &[[f64; FACTORS]],
    n: usize,
    t: usize,
    first_year: i32,
) -> AccountsOut {
    let rows = n * t;
    let mut c: std::collections::BTreeMap<&str, Vec<f64>> = std::collections::BTreeMap::new();
    let mut push = |name: &'static str, v: f64| c.entry(name).or_default().push(v);
    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut total_revenue = Vec::with_capacity(rows);
    let mut lev = Vec::with_capacity(rows);
    for f in 0..n {
        let fl = firm_level[f];
        let flag = |rng: &mut ChaCha8Rng, shift: f64| (rng.random::<f64>() < normal_cdf(shift)) as u8 as f64;
        let control = flag(rng, 0.6 * fl[0] - 0.8);
        let patents = flag(rng, 0.5 * fl[0] + 0.6 * fl[1] - 1.2);
        let consolidated = flag(rng, 0.7 * fl[0] - 0.4);
        let inward = flag(rng, 0.6 * fl[0] - 1.4);
        let outward = flag(rng, 0.6 * fl[0] + 0.4 * fl[1] - 1.3);
        let age0 = (2.6 + 0.3 * fl[0] + 0.5 * normal(rng)).exp().round().clamp(1.0, 110.0);
        let incorporation = (first_year as f64 - age0).max(1900.0);
        for y in 0..t {
            let r = f * t + y;
            let (s, q, h) = (factors[0][r], factors[1][r], factors[2][r]);
            let noise = |rng: &mut ChaCha8Rng, sd: f64| (sd * normal(rng)).exp();
            let employees = (2.8 + 1.1 * s + 0.15 * normal(rng)).exp().round().max(1.0);
            let tfp = 0.8 * q + 0.2 * normal(rng);
            let total_assets = employees * (11.5 + 0.3 * q + 0.2 * h + 0.25 * normal(rng)).exp();
            let fa_share = logistic(-0.6 + 0.5 * h + 0.3 * normal(rng));
            let fixed_assets = total_assets * fa_share;
            let intangible = fixed_assets * logistic(-1.8 + 0.5 * q + 0.3 * normal(rng));
            let tangible = fixed_assets - intangible;
            let depreciation = 0.08 * fixed_assets * noise(rng, 0.2);
            let current_assets = total_assets - fixed_assets;
            let stocks = current_assets * logistic(-0.9 + 0.3 * normal(rng));
            let debtors = (current_assets - stocks) * logistic(0.3 + 0.3 * normal(rng));
            let cash = current_assets - stocks - debtors;
            let sales = total_assets * (0.1 + 0.3 * q + 0.2 * normal(rng)).exp();
            let operating_revenue = sales * (1.0 + 0.03 * rng.random::<f64>());
            let material_costs = sales * logistic(0.2 - 0.3 * q + 0.2 * normal(rng));
            let costs_of_employees = employees * 38_000.0 * (0.25 * q + 0.1 * normal(rng)).exp();
            let value_added = operating_revenue - material_costs;
            let ebitda = value_added - costs_of_employees;
            let ebit = ebitda - depreciation;
            let equity_share = logistic(-0.2 - 0.7 * h + 0.3 * normal(rng));
            let funds = total_assets * equity_share;
            let debt = total_assets - funds;
            let long_term_debt = debt * logistic(-0.5 + 0.3 * normal(rng));
            let current_liabilities = debt - long_term_debt;
            let loans = debt * logistic(-0.8 + 0.3 * normal(rng));
            let creditors = current_liabilities * logistic(0.0 + 0.3 * normal(rng));
            let interest_paid = 0.035 * debt * noise(rng, 0.2);
            let financial_expenses = interest_paid * (1.0 + 0.3 * rng.random::<f64>());
            let financial_revenues = 0.01 * cash * noise(rng, 0.5);
            let taxation = (0.28 * ebit).max(0.0);
            let cash_flow = ebit - taxation + depreciation;
            let markup = (0.15 + 0.08 * q + 0.05 * normal(rng)).exp();
            push("value_added", value_added);
            push("depreciation", depreciation);
            push("creditors", creditors);
            push("current_assets", current_assets);
            push("current_liabilities", current_liabilities);
            push("non_current_liabilities", long_term_debt);
            push("current_ratio", current_assets / current_liabilities);
            push("debtors", debtors);
            push("operating_revenue", operating_revenue);
            push("material_costs", material_costs);
            push("costs_of_employees", costs_of_employees);
            push("taxation", taxation);
            push("financial_revenues", financial_revenues);
            push("financial_expenses", financial_expenses);
            push("interest_paid", interest_paid);
            push("employees", employees);
            push("cash_flow", cash_flow);
            push("ebitda", ebitda);
            push("total_assets", total_assets);
            push("fixed_assets", fixed_assets);
            push("intangible_fixed_assets", intangible);
            push("tangible_fixed_assets", tangible);
            push("shareholders_funds", funds);
            push("long_term_debt", long_term_debt);
            push("loans", loans);
            push("sales", sales);
            push("solvency_ratio", 100.0 * equity_share);
            push("working_capital", current_assets - current_liabilities);
            push("corporate_control", control);
            push("patents", patents);
            push("consolidated_accounts", consolidated);
            push("inward_fdi", inward);
            push("outward_fdi", outward);
            push("tfp", tfp);
            push("markup", markup);
            push("ebit", ebit);
            push("stocks", stocks);
            push("cash", cash);
            push("incorporation_year", incorporation);
            total_revenue.push(operating_revenue);
            lev.push(debt / total_assets);
        }
    }
    let order = RAW_ACCOUNTS.iter().chain(&FLAGS).chain(&PRECOMPUTED).chain(&AUXILIARY);
    let columns: Vec<(String, Vec<f64>)> = order.map(|&name| (name.to_string(), c.remove(name).expect("generated"))).collect();
    let get = |name: &str| &columns.iter().find(|c| c.0 == name).expect("generated").1;
    let emp = get("employees");
    let va = get("value_added");
    let size: Vec<f64> = emp.iter().map(|e| e.ln()).collect();
    let lp: Vec<f64> = va.iter().zip(emp).map(|(v, e)| (v.max(1.0) / e).ln()).collect();
    let drivers = vec![size.clone(), get("tfp").clone(), lp, lev, get("outward_fdi").clone()];
    (columns, drivers, size, total_revenue)
}

fn draw_labels(rng: &mut ChaCha8Rng, probability: &[f64]) -> Vec<bool> {
    probability.iter().map(|&p| rng.random::<f64>() < p).collect()
}

/// Masks cells, attaches outcome columns and derives indicators.
pub(crate) fn assemble(spec: &GeneratorSpec, lat: Latent, labels: Vec<bool>) -> Result<Synthetic> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, crate::stats::streams::SIMULATE ^ 0x6d61_736b));
    let rows = lat.firm_ids.len();
    let k = lat.columns.len();
    let mut mask = vec![vec![false; rows]; k];
    let mut masked = vec![false; rows];
    match spec.missingness {
        Missingness::Mcar { rate } => {
            for r in 0..rows {
                for col in mask.iter_mut() {
                    if rng.random::<f64>() < rate {
                        col[r] = true;
                        masked[r] = true;
                    }
                }
            }
        }
        Missingness::Mnar { rate, informativeness: w } => {
            let base = (rate / (1.0 - rate)).ln();
            for r in 0..rows {
                let signal = lat.size_z[r] + if labels[r] { 1.0 } else { -1.0 };
                let pi = 1.0 / (1.0 + (-(base - w * signal)).exp());
                if rng.random::<f64>() < pi {
                    masked[r] = true;
                    let mut any = false;
                    for col in mask.iter_mut() {
                        if rng.random::<f64>() < 0.5 {
                            col[r] = true;
                            any = true;
                        }
                    }
                    if !any {
                        mask[rng.random_range(0..k)][r] = true;
                    }
                }
            }
        }
    }

    let mut numeric: Vec<NumericColumn> = lat
        .columns
        .iter()
        .zip(&mask)
        .map(|((name, v), m)| NumericColumn::from_options(name.clone(), v.iter().zip(m).map(|(&x, &mi)| (!mi).then_some(x))))
        .collect();
    let exports: Vec<Option<f64>> = (0..rows)
        .map(|r| Some(if labels[r] { lat.total_revenue[r] * (0.02 + 0.6 * rng.random::<f64>()) } else { 0.0 }))
        .collect();
    numeric.push(NumericColumn::from_options(EXPORT_REVENUE, exports));
    numeric.push(NumericColumn::from_options(TOTAL_REVENUE, lat.total_revenue.iter().map(|&v| Some(v))));
    let categorical = vec![
        CategoricalColumn { name: REGION.into(), values: lat.regions.into_iter().map(Some).collect() },
        CategoricalColumn { name: INDUSTRY.into(), values: lat.industries.into_iter().map(Some).collect() },
        CategoricalColumn { name: INDUSTRY4.into(), values: lat.industries4.into_iter().map(Some).collect() },
    ];
    let keys = lat.firm_ids.iter().zip(&lat.years).map(|(f, &y)| RowKey::new(f.clone(), y)).collect();
    let mut panel = FirmPanel::new(lat.firm_ids, lat.years, numeric, categorical)?;
    if spec.layout == Layout::Accounts {
        panel = derive_predictors(&panel)?;
    }
    Ok(Synthetic {
        panel,
        truth: GroundTruth {
            keys,
            probability: lat.probability,
            label: labels,
            masked,
        },
    })
}

/// Draws a panel from the probit ground truth and masks it per the
/// missingness regime.
pub fn generate(spec: &GeneratorSpec) -> Result<Synthetic> {
    let lat = latent(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, crate::stats::streams::SIMULATE ^ 0x6c61_6265));
    let labels = draw_labels(&mut rng, &lat.probability);
    assemble(spec, lat, labels)
}

/// Columns the generator may mask, for the layout.
pub fn maskable_columns(layout: Layout) -> Vec<String> {
    match layout {
        Layout::Accounts => RAW_ACCOUNTS
            .iter()
            .chain(&FLAGS)
            .chain(&PRECOMPUTED)
            .chain(&AUXILIARY)
            .map(|s| s.to_string())
            .collect(),
        Layout::Generic { p } => (1..=p).map(|j| format!("x{j}")).collect(),
    }
}

/// Plug-in mutual information (nats) between two binary sequences.
pub fn mutual_information(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len() as f64;
    let mut joint = [[0.0f64; 2]; 2];
    for (&x, &y) in a.iter().zip(b) {
        joint[x as usize][y as usize] += 1.0;
    }
    let pa = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let pb = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut mi = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            if joint[i][j] > 0.0 {
                mi += joint[i][j] / n * (joint[i][j] * n / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi
}
