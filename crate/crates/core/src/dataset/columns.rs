//! Canonical column names of the financial-accounts layout.

/// Original financial accounts in euro (employees is a head count; the two
/// ratios are as reported).
pub const RAW_ACCOUNTS: [&str; 28] = [
    "value_added",
    "depreciation",
    "creditors",
    "current_assets",
    "current_liabilities",
    "non_current_liabilities",
    "current_ratio",
    "debtors",
    "operating_revenue",
    "material_costs",
    "costs_of_employees",
    "taxation",
    "financial_revenues",
    "financial_expenses",
    "interest_paid",
    "employees",
    "cash_flow",
    "ebitda",
    "total_assets",
    "fixed_assets",
    "intangible_fixed_assets",
    "tangible_fixed_assets",
    "shareholders_funds",
    "long_term_debt",
    "loans",
    "sales",
    "solvency_ratio",
    "working_capital",
];

/// Binary ownership/innovation flags stored as 0/1 numerics.
pub const FLAGS: [&str; 5] = [
    "corporate_control",
    "patents",
    "consolidated_accounts",
    "inward_fdi",
    "outward_fdi",
];

/// Precomputed productivity measures accepted as plain inputs.
pub const PRECOMPUTED: [&str; 2] = ["tfp", "markup"];

/// Inputs used by derivations or scoring but not fed to the models.
pub const AUXILIARY: [&str; 4] = ["ebit", "stocks", "cash", "incorporation_year"];

pub const EXPORT_REVENUE: &str = "export_revenue";
pub const TOTAL_REVENUE: &str = "total_revenue";

pub const REGION: &str = "region";
pub const INDUSTRY: &str = "industry";
pub const INDUSTRY4: &str = "industry4";

pub const CATEGORICAL: [&str; 3] = [REGION, INDUSTRY, INDUSTRY4];

/// Every non-derived numeric column of the accounts layout, in file order.
pub const BASE_NUMERIC: [&str; 41] = [
    "value_added",
    "depreciation",
    "creditors",
    "current_assets",
    "current_liabilities",
    "non_current_liabilities",
    "current_ratio",
    "debtors",
    "operating_revenue",
    "material_costs",
    "costs_of_employees",
    "taxation",
    "financial_revenues",
    "financial_expenses",
    "interest_paid",
    "employees",
    "cash_flow",
    "ebitda",
    "total_assets",
    "fixed_assets",
    "intangible_fixed_assets",
    "tangible_fixed_assets",
    "shareholders_funds",
    "long_term_debt",
    "loans",
    "sales",
    "solvency_ratio",
    "working_capital",
    "corporate_control",
    "patents",
    "consolidated_accounts",
    "inward_fdi",
    "outward_fdi",
    "tfp",
    "markup",
    "ebit",
    "stocks",
    "cash",
    "incorporation_year",
    EXPORT_REVENUE,
    TOTAL_REVENUE,
];

/// The 52 model predictors: raw accounts, flags, TFP, markup and every
/// derived indicator.
pub fn default_predictors() -> Vec<String> {
    RAW_ACCOUNTS
        .iter()
        .chain(FLAGS.iter())
        .chain(PRECOMPUTED.iter())
        .chain(super::DERIVED_COLUMNS.iter())
        .map(|s| s.to_string())
        .collect()
}
