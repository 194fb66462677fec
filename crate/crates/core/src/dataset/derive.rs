use std::collections::HashMap;

use super::columns::{EXPORT_REVENUE, INDUSTRY, REGION};
use super::{FirmPanel, NumericColumn};
use crate::error::Result;

/// Columns appended by [`derive_predictors`], in order.
pub const DERIVED_COLUMNS: [&str; 17] = [
    "age",
    "productive_capacity",
    "capital_intensity",
    "labour_productivity",
    "icr",
    "financial_constraints",
    "roa",
    "financial_sustainability",
    "size_age",
    "capital_adequacy",
    "liquidity_ratio",
    "liquidity_returns",
    "regional_spillover",
    "industrial_spillover",
    "external_scale",
    "size",
    "avg_wage_bill",
];

const REQUIRED: [&str; 20] = [
    "fixed_assets",
    "depreciation",
    "employees",
    "value_added",
    "ebit",
    "interest_paid",
    "cash_flow",
    "ebitda",
    "total_assets",
    "financial_expenses",
    "operating_revenue",
    "shareholders_funds",
    "loans",
    "long_term_debt",
    "current_assets",
    "stocks",
    "current_liabilities",
    "costs_of_employees",
    "incorporation_year",
    EXPORT_REVENUE,
];

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(n), Some(d)) if d != 0.0 => Some(n / d).filter(|v| v.is_finite()),
        _ => None,
    }
}

fn ln(x: Option<f64>) -> Option<f64> {
    x.filter(|&v| v > 0.0).map(f64::ln)
}

/// Computes the derived financial indicators and spillover shares and
/// appends them to the panel (replacing same-named columns).
///
/// A derived cell is missing whenever one of its inputs is missing, a
/// denominator is zero, or a logarithm argument is not positive.
pub fn derive_predictors(panel: &FirmPanel) -> Result<FirmPanel> {
    for name in REQUIRED {
        panel.require_numeric(name)?;
    }
    let region = panel.require_categorical(REGION)?;
    let industry = panel.require_categorical(INDUSTRY)?;

    let col = |name: &str| panel.numeric(name).expect("checked above");
    let fa = col("fixed_assets");
    let dep = col("depreciation");
    let emp = col("employees");
    let va = col("value_added");
    let ebit = col("ebit");
    let interest = col("interest_paid");
    let cf = col("cash_flow");
    let ebitda = col("ebitda");
    let ta = col("total_assets");
    let fin_exp = col("financial_expenses");
    let op_rev = col("operating_revenue");
    let funds = col("shareholders_funds");
    let loans = col("loans");
    let ltd = col("long_term_debt");
    let ca = col("current_assets");
    let stocks = col("stocks");
    let cl = col("current_liabilities");
    let wages = col("costs_of_employees");
    let inc = col("incorporation_year");
    let exports = col(EXPORT_REVENUE);

    let n = panel.n_rows();
    let index = panel.row_index();
    let lag = |r: usize| -> Option<usize> {
        index
            .get(&(panel.firm_ids[r].as_str(), panel.years[r] - 1))
            .copied()
    };

    let mut out: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); DERIVED_COLUMNS.len()];
    for r in 0..n {
        let age = inc.get(r).map(|y| (panel.years[r] as f64 - y).max(0.0));
        let productive_capacity = lag(r).and_then(|l| {
            let den = match (fa.get(l), dep.get(l)) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
            ratio(fa.get(r), den)
        });
        let log_ta = ln(ta.get(r));
        let size_age = match (log_ta, age) {
            (Some(l), Some(a)) => Some(-0.737 * l + 0.043 * l * l - 0.040 * a),
            _ => None,
        };
        let debt = match (loans.get(r), ltd.get(r)) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        let quick = match (ca.get(r), stocks.get(r)) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        let row = [
            age,
            productive_capacity,
            ratio(fa.get(r), emp.get(r)),
            ratio(va.get(r), emp.get(r)),
            ratio(ebit.get(r), interest.get(r)),
            ratio(interest.get(r), cf.get(r)),
            ratio(ebitda.get(r), ta.get(r)),
            ratio(fin_exp.get(r), op_rev.get(r)),
            size_age,
            ratio(funds.get(r), debt),
            ratio(quick, cl.get(r)),
            ratio(cf.get(r), ta.get(r)),
            None,
            None,
            None,
            ln(emp.get(r)),
            ln(ratio(wages.get(r), emp.get(r))),
        ];
        for (k, v) in row.into_iter().enumerate() {
            out[k].push(v);
        }
    }

    // Exporter shares among firms with known export status, per year.
    let is_exporter = |r: usize| exports.get(r).map(|v| v > 0.0);
    let shares = |key: &dyn Fn(usize) -> Option<String>| -> Vec<Option<f64>> {
        let mut counts: HashMap<(String, i32), (usize, usize)> = HashMap::new();
        for r in 0..n {
            if let (Some(k), Some(e)) = (key(r), is_exporter(r)) {
                let c = counts.entry((k, panel.years[r])).or_default();
                c.0 += usize::from(e);
                c.1 += 1;
            }
        }
        (0..n)
            .map(|r| {
                let k = key(r)?;
                let &(exp, tot) = counts.get(&(k, panel.years[r]))?;
                ratio(Some(exp as f64), Some(tot as f64))
            })
            .collect()
    };
    out[12] = shares(&|r| region.get(r).map(str::to_string));
    out[13] = shares(&|r| industry.get(r).map(str::to_string));
    out[14] = shares(&|r| match (region.get(r), industry.get(r)) {
        (Some(a), Some(b)) => Some(format!("{a}\u{1f}{b}")),
        _ => None,
    });

    let mut derived = panel.clone();
    for (name, cells) in DERIVED_COLUMNS.iter().zip(out) {
        derived.put_numeric(NumericColumn::from_options(*name, cells));
    }
    Ok(derived)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::columns::BASE_NUMERIC;
    use crate::dataset::CategoricalColumn;

    /// Panel with every base column set to `fill`, then per-cell overrides.
    fn panel(
        rows: &[(&str, i32, &str)],
        fill: f64,
        overrides: &[(&str, usize, Option<f64>)],
    ) -> FirmPanel {
        let n = rows.len();
        let numeric = BASE_NUMERIC
            .iter()
            .map(|name| {
                let cells = (0..n).map(|r| {
                    overrides
                        .iter()
                        .find(|(c, row, _)| c == name && *row == r)
                        .map(|(_, _, v)| *v)
                        .unwrap_or(Some(fill))
                });
                NumericColumn::from_options(*name, cells.collect::<Vec<_>>())
            })
            .collect();
        let cat = |name: &str, f: &dyn Fn(&(&str, i32, &str)) -> String| CategoricalColumn {
            name: name.into(),
            values: rows.iter().map(|r| Some(f(r))).collect(),
        };
        FirmPanel::new(
            rows.iter().map(|r| r.0.to_string()).collect(),
            rows.iter().map(|r| r.1).collect(),
            numeric,
            vec![
                cat("region", &|r| r.2.to_string()),
                cat("industry", &|_| "10".to_string()),
                cat("industry4", &|_| "1011".to_string()),
            ],
        )
        .unwrap()
    }

    fn value(p: &FirmPanel, col: &str, row: usize) -> Option<f64> {
        p.numeric(col).unwrap().get(row)
    }

    #[test]
    fn productive_capacity_uses_lagged_values() {
        let p = panel(
            &[("a", 2010, "R1"), ("a", 2011, "R1")],
            1.0,
            &[
                ("fixed_assets", 0, Some(100.0)),
                ("depreciation", 0, Some(10.0)),
                ("fixed_assets", 1, Some(110.0)),
            ],
        );
        let d = derive_predictors(&p).unwrap();
        assert_eq!(value(&d, "productive_capacity", 0), None);
        assert_eq!(value(&d, "productive_capacity", 1), Some(1.0));
    }

    #[test]
    fn size_age_index() {
        let ta = 10f64.exp();
        let p = panel(
            &[("a", 2010, "R1")],
            1.0,
            &[
                ("total_assets", 0, Some(ta)),
                ("incorporation_year", 0, Some(2005.0)),
            ],
        );
        let d = derive_predictors(&p).unwrap();
        let v = value(&d, "size_age", 0).unwrap();
        assert!((v - (-3.27)).abs() < 1e-9, "{v}");
        assert_eq!(value(&d, "age", 0), Some(5.0));
    }

    #[test]
    fn age_floored_at_zero() {
        let p = panel(&[("a", 2010, "R1")], 1.0, &[("incorporation_year", 0, Some(2015.0))]);
        let d = derive_predictors(&p).unwrap();
        assert_eq!(value(&d, "age", 0), Some(0.0));
    }

    #[test]
    fn regional_spillover_share() {
        let rows: Vec<(String, i32, &str)> =
            (0..80).map(|i| (format!("f{i:02}"), 2010, "R1")).collect();
        let rows_ref: Vec<(&str, i32, &str)> =
            rows.iter().map(|(a, b, c)| (a.as_str(), *b, *c)).collect();
        let overrides: Vec<(&str, usize, Option<f64>)> = (20..80)
            .map(|r| (EXPORT_REVENUE, r, Some(0.0)))
            .collect();
        let p = panel(&rows_ref, 5.0, &overrides);
        let d = derive_predictors(&p).unwrap();
        assert_eq!(value(&d, "regional_spillover", 0), Some(0.25));
        assert_eq!(value(&d, "external_scale", 79), Some(0.25));
    }

    #[test]
    fn zero_denominator_and_missing_input_yield_missing() {
        let p = panel(
            &[("a", 2010, "R1"), ("b", 2010, "R1")],
            2.0,
            &[("employees", 0, Some(0.0)), ("value_added", 1, None)],
        );
        let d = derive_predictors(&p).unwrap();
        assert_eq!(value(&d, "capital_intensity", 0), None);
        assert_eq!(value(&d, "size", 0), None);
        assert_eq!(value(&d, "labour_productivity", 1), None);
        assert_eq!(value(&d, "capital_intensity", 1), Some(1.0));
    }

    #[test]
    fn missing_base_column_is_schema_error() {
        let mut p = panel(&[("a", 2010, "R1")], 1.0, &[]);
        p.numeric.retain(|c| c.name != "ebit");
        assert!(matches!(
            derive_predictors(&p).unwrap_err(),
            crate::Error::Schema(_)
        ));
    }

    #[test]
    fn rederiving_replaces_columns() {
        let p = panel(&[("a", 2010, "R1")], 1.0, &[]);
        let once = derive_predictors(&p).unwrap();
        let twice = derive_predictors(&once).unwrap();
        assert_eq!(once.numeric.len(), twice.numeric.len());
    }
}
