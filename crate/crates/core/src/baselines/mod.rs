//! Comparison classifiers: logit, lasso-logit with EBIC selection, CART and
//! random forest. All of them train and score on complete rows only.

mod cart;
mod forest;
mod lasso;
mod logit;
mod tree;

pub use cart::{fit_cart, CartConfig, CartModel};
pub use forest::{default_mtry, fit_forest, ForestConfig, ForestModel, ForestTree};
pub use lasso::{ebic, fit_lasso_logit, lambda_grid, LassoConfig, LassoFit, PathPoint};
pub use logit::{fit_logit, FitStatus, LogitModel, MAX_ITERATIONS, TOLERANCE};
pub use tree::{ClassNode, ClassTree};
