//! Uniform training, scoring and JSON persistence over every model kind.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bart::{self, BartConfig, BartModel, NodeRecord, PredictorMeta, Tree};
use crate::baselines::{
    fit_cart, fit_forest, fit_lasso_logit, fit_logit, CartConfig, CartModel, ForestConfig,
    ForestModel, LassoConfig, LassoFit, LogitModel,
};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Probit BART with missingness-aware splits, trained on all rows.
    BartMia,
    /// Probit BART on complete cases.
    Bart,
    Logit,
    Lasso,
    Cart,
    Forest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::BartMia,
        ModelKind::Bart,
        ModelKind::Logit,
        ModelKind::Lasso,
        ModelKind::Cart,
        ModelKind::Forest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::BartMia => "bart_mia",
            ModelKind::Bart => "bart",
            ModelKind::Logit => "logit",
            ModelKind::Lasso => "lasso",
            ModelKind::Cart => "cart",
            ModelKind::Forest => "forest",
        }
    }

    pub fn uses_missing(&self) -> bool {
        matches!(self, ModelKind::BartMia)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A model kind with hyperparameters for every family; only the block for
/// `kind` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub bart: BartConfig,
    pub lasso: LassoConfig,
    pub cart: CartConfig,
    pub forest: ForestConfig,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::BartMia,
            bart: BartConfig::default(),
            lasso: LassoConfig::default(),
            cart: CartConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

impl ModelSpec {
    pub fn of(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::BartMia | ModelKind::Bart => self.bart.validate(),
            ModelKind::Lasso => self.lasso.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Bart { mia: bool, model: BartModel, n_dropped: usize },
    Logit(LogitModel),
    Lasso(LassoFit),
    Cart(CartModel),
    Forest(ForestModel),
}

/// Fits `spec` with every stochastic component seeded from `seed`.
pub fn train(spec: &ModelSpec, x: &FeatureMatrix, y: &[bool], seed: u64) -> Result<Model> {
    spec.validate()?;
    Ok(match spec.kind {
        ModelKind::BartMia => {
            // `bart.mia = false` keeps the full rows, so missing cells fail the fit
            let cfg = BartConfig { seed, ..spec.bart.clone() };
            Model::Bart { mia: cfg.mia, model: bart::fit(x, y, &cfg)?, n_dropped: 0 }
        }
        ModelKind::Bart => {
            let rows = x.complete_rows();
            let y_cc: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
            let cfg = BartConfig { mia: false, seed, ..spec.bart.clone() };
            Model::Bart {
                mia: false,
                model: bart::fit(&x.select_rows(&rows), &y_cc, &cfg)?,
                n_dropped: x.n_rows() - rows.len(),
            }
        }
        ModelKind::Logit => Model::Logit(fit_logit(x, y)?),
        ModelKind::Lasso => Model::Lasso(fit_lasso_logit(x, y, &spec.lasso)?),
        ModelKind::Cart => Model::Cart(fit_cart(x, y, &CartConfig { seed, ..spec.cart.clone() })?),
        ModelKind::Forest => {
            Model::Forest(fit_forest(x, y, &ForestConfig { seed, ..spec.forest.clone() })?)
        }
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Bart { mia: true, .. } => ModelKind::BartMia,
            Model::Bart { mia: false, .. } => ModelKind::Bart,
            Model::Logit(_) => ModelKind::Logit,
            Model::Lasso(_) => ModelKind::Lasso,
            Model::Cart(_) => ModelKind::Cart,
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn predictor_names(&self) -> Vec<String> {
        match self {
            Model::Bart { model, .. } => model.predictor_names(),
            Model::Logit(m) => m.names.clone(),
            Model::Lasso(m) => m.model.names.clone(),
            Model::Cart(m) => m.names.clone(),
            Model::Forest(m) => m.names.clone(),
        }
    }

    /// Training rows discarded for missing predictors.
    pub fn n_dropped(&self) -> usize {
        match self {
            Model::Bart { n_dropped, .. } => *n_dropped,
            Model::Logit(m) => m.n_dropped,
            Model::Lasso(m) => m.model.n_dropped,
            Model::Cart(m) => m.n_dropped,
            Model::Forest(m) => m.n_dropped,
        }
    }

    /// Scores per row; `None` for rows a complete-case model cannot score.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Option<f64>>> {
        match self {
            Model::Bart { mia: true, model, .. } => Ok(model.predict(x)?.into_iter().map(Some).collect()),
            Model::Bart { mia: false, model, .. } => {
                let x = x.aligned_to(&model.predictor_names())?;
                let rows = x.complete_rows();
                let scores = model.predict(&x.select_rows(&rows))?;
                let mut out = vec![None; x.n_rows()];
                for (r, s) in rows.into_iter().zip(scores) {
                    out[r] = Some(s);
                }
                Ok(out)
            }
            Model::Logit(m) => m.predict(x),
            Model::Lasso(m) => m.model.predict(x),
            Model::Cart(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let payload = match self {
            Model::Bart { model, n_dropped, .. } => serde_json::to_value(BartDocument::from_model(model, *n_dropped))?,
            Model::Logit(m) => serde_json::to_value(m)?,
            Model::Lasso(m) => serde_json::to_value(m)?,
            Model::Cart(m) => serde_json::to_value(m)?,
            Model::Forest(m) => serde_json::to_value(m)?,
        };
        let doc = Document {
            format_version: FORMAT_VERSION,
            model_kind: self.kind(),
            model: payload,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        Ok(match doc.model_kind {
            kind @ (ModelKind::BartMia | ModelKind::Bart) => {
                let d: BartDocument = serde_json::from_value(doc.model)?;
                let n_dropped = d.n_dropped;
                let model = d.into_model()?;
                if model.config.mia != (kind == ModelKind::BartMia) {
                    return Err(Error::Document("model_kind disagrees with the mia flag".into()));
                }
                Model::Bart { mia: model.config.mia, model, n_dropped }
            }
            ModelKind::Logit => Model::Logit(serde_json::from_value(doc.model)?),
            ModelKind::Lasso => Model::Lasso(serde_json::from_value(doc.model)?),
            ModelKind::Cart => Model::Cart(serde_json::from_value(doc.model)?),
            ModelKind::Forest => Model::Forest(serde_json::from_value(doc.model)?),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format_version: u32,
    model_kind: ModelKind,
    model: serde_json::Value,
}

/// Serialized BART posterior: draws are lists of trees, each tree a preorder
/// node list.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BartDocument {
    config: BartConfig,
    predictors: Vec<PredictorMeta>,
    n_dropped: usize,
    draws: Vec<Vec<Vec<NodeRecord>>>,
}

impl BartDocument {
    fn from_model(m: &BartModel, n_dropped: usize) -> Self {
        Self {
            config: m.config.clone(),
            predictors: m.predictors.clone(),
            n_dropped,
            draws: m
                .draws
                .iter()
                .map(|e| e.iter().map(Tree::to_records).collect())
                .collect(),
        }
    }

    fn into_model(self) -> Result<BartModel> {
        self.config.validate()?;
        let p = self.predictors.len();
        if self.draws.len() != self.config.post_burn {
            return Err(Error::Document(format!(
                "{} draws stored but post_burn is {}",
                self.draws.len(),
                self.config.post_burn
            )));
        }
        let draws = self
            .draws
            .iter()
            .map(|e| {
                if e.len() != self.config.trees {
                    return Err(Error::Document(format!(
                        "draw holds {} trees, expected {}",
                        e.len(),
                        self.config.trees
                    )));
                }
                e.iter()
                    .map(|recs| {
                        let t = Tree::from_records(recs)?;
                        if t.rules().any(|r| r.predictor() >= p) {
                            return Err(Error::Document("split on unknown predictor index".into()));
                        }
                        Ok(t)
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<Tree>>>>()?;
        Ok(BartModel {
            config: self.config,
            predictors: self.predictors,
            draws,
        })
    }
}
