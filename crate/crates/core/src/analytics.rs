//! Competitiveness diagnostics: the potential-exporter set, regional
//! location quotients with bootstrap intervals, grouped score summaries and
//! replicated variable inclusion proportions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bart::{self, BartConfig};
use crate::dataset::{LabelSet, RowKey};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scoring::ScoreTable;
use crate::stats::{derive_seed, lower_median, mean, nearest_rank, sample_sd, sort_f64};

/// Non-exporters with their scores and the subset scoring above the median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSet {
    /// Non-exporting firm (or firm-year) keys with scores.
    pub non_exporters: Vec<(RowKey, f64)>,
    /// Lower median of non-exporter scores; absent with no non-exporters.
    pub median: Option<f64>,
    /// Keys of non-exporters scoring strictly above the median.
    pub potential: BTreeSet<RowKey>,
}

impl PotentialSet {
    pub fn contains_firm(&self, firm_id: &str) -> bool {
        self.potential.iter().any(|k| k.firm_id == firm_id)
    }
}

/// Non-exporters whose score is strictly above the lower median of all
/// non-exporter scores. With `latest_only`, each firm is represented by its
/// latest scored year, and it counts as a non-exporter by that year's label.
pub fn potential_set(scores: &ScoreTable, labels: &LabelSet, latest_only: bool) -> Result<PotentialSet> {
    let status: HashMap<&RowKey, bool> = labels.keys.iter().zip(labels.labels.iter().copied()).collect();
    let mut rows: Vec<(RowKey, f64)> = scores.rows.iter().map(|r| (RowKey::new(r.firm_id.clone(), r.year), r.score)).collect();
    if latest_only {
        let mut latest: BTreeMap<String, (RowKey, f64)> = BTreeMap::new();
        for (k, s) in rows {
            match latest.get(&k.firm_id) {
                Some((prev, _)) if prev.year >= k.year => {}
                _ => {
                    latest.insert(k.firm_id.clone(), (k, s));
                }
            }
        }
        rows = latest.into_values().collect();
    }
    let mut non_exporters = Vec::new();
    for (k, s) in rows {
        let exporter = *status
            .get(&k)
            .ok_or_else(|| Error::Alignment(format!("no label for firm {} year {}", k.firm_id, k.year)))?;
        if !exporter {
            non_exporters.push((k, s));
        }
    }
    non_exporters.sort_by(|a, b| a.0.cmp(&b.0));
    let mut sorted: Vec<f64> = non_exporters.iter().map(|(_, s)| *s).collect();
    sort_f64(&mut sorted);
    let median = (!sorted.is_empty()).then(|| lower_median(&sorted));
    let potential = match median {
        Some(m) => non_exporters.iter().filter(|(_, s)| *s > m).map(|(k, _)| k.clone()).collect(),
        None => BTreeSet::new(),
    };
    Ok(PotentialSet {
        non_exporters,
        median,
        potential,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionQuotient {
    pub region: String,
    /// Potential exporters and all non-exporters in the region.
    pub potential: usize,
    pub firms: usize,
    pub lq: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// The interval excludes one.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationQuotients {
    pub regions: Vec<RegionQuotient>,
    pub potential_total: usize,
    pub firms_total: usize,
    pub reps: usize,
    pub seed: u64,
}

/// `(P_j / I_j) / (P / I)`; absent when a denominator is zero.
pub fn quotient(p_j: usize, i_j: usize, p: usize, i: usize) -> Option<f64> {
    (i_j > 0 && p > 0 && i > 0).then(|| (p_j as f64 / i_j as f64) / (p as f64 / i as f64))
}

fn counts(firms: &[(usize, bool)], n_regions: usize) -> (Vec<usize>, Vec<usize>) {
    let mut p = vec![0; n_regions];
    let mut i = vec![0; n_regions];
    for &(r, pot) in firms {
        i[r] += 1;
        p[r] += pot as usize;
    }
    (p, i)
}

/// Location quotients of the potential set across regions. `firms` lists
/// every non-exporter as (region, in potential set). Intervals come from
/// resampling firms with replacement from the national pool and taking the
/// nearest-rank 5th and 95th percentiles of the replicate quotients.
pub fn location_quotients(firms: &[(String, bool)], reps: usize, seed: u64) -> LocationQuotients {
    let names: Vec<String> = firms.iter().map(|(r, _)| r.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let coded: Vec<(usize, bool)> = firms.iter().map(|(r, p)| (index[r.as_str()], *p)).collect();
    let k = names.len();
    let (p, i) = counts(&coded, k);
    let p_tot: usize = p.iter().sum();
    let i_tot = coded.len();

    let replicates: Vec<Vec<Option<f64>>> = (0..reps)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b as u64));
            let sample: Vec<(usize, bool)> = (0..i_tot).map(|_| coded[rng.random_range(0..i_tot)]).collect();
            let (pb, ib) = counts(&sample, k);
            let ptb: usize = pb.iter().sum();
            (0..k).map(|j| quotient(pb[j], ib[j], ptb, i_tot)).collect()
        })
        .collect();

    let regions = (0..k)
        .map(|j| {
            let lq = quotient(p[j], i[j], p_tot, i_tot);
            let mut draws: Vec<f64> = replicates.iter().filter_map(|r| r[j]).collect();
            sort_f64(&mut draws);
            let (lo, hi) = if draws.is_empty() || lq.is_none() {
                (None, None)
            } else {
                (Some(nearest_rank(&draws, 5.0)), Some(nearest_rank(&draws, 95.0)))
            };
            let significant = matches!((lo, hi), (Some(l), Some(h)) if l > 1.0 || h < 1.0);
            RegionQuotient {
                region: names[j].clone(),
                potential: p[j],
                firms: i[j],
                lq,
                ci_low: lo,
                ci_high: hi,
                significant,
            }
        })
        .collect();
    LocationQuotients {
        regions,
        potential_total: p_tot,
        firms_total: i_tot,
        reps,
        seed,
    }
}

impl LocationQuotients {
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}").map_err(|e| Error::io("<lq>", e))?;
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["region", "potential", "firms", "lq", "ci_low", "ci_high", "significant"])?;
        for r in &self.regions {
            w.write_record([
                r.region.clone(),
                r.potential.to_string(),
                r.firms.to_string(),
                opt(r.lq),
                opt(r.ci_low),
                opt(r.ci_high),
                r.significant.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<lq>", e))?;
        Ok(())
    }
}

/// Boxplot statistics of one group's scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub min: f64,
    /// Nearest-rank 25th percentile.
    pub q1: f64,
    /// Lower median.
    pub median: f64,
    /// Nearest-rank 75th percentile.
    pub q3: f64,
    pub max: f64,
    /// Scores strictly above the national median.
    pub above_median: usize,
    /// `above_median / count`.
    pub share_within: f64,
    /// `above_median` over the national count above the median.
    pub share_of_national: Option<f64>,
}

/// Summaries per group; `national_median` defaults to the lower median of
/// all scores.
pub fn aggregate_scores(rows: &[(String, f64)], national_median: Option<f64>) -> Vec<GroupSummary> {
    let mut all: Vec<f64> = rows.iter().map(|(_, s)| *s).collect();
    sort_f64(&mut all);
    if all.is_empty() {
        return vec![];
    }
    let m = national_median.unwrap_or_else(|| lower_median(&all));
    let above_total = all.iter().filter(|&&s| s > m).count();
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (g, s) in rows {
        groups.entry(g).or_default().push(*s);
    }
    groups
        .into_iter()
        .map(|(g, mut v)| {
            sort_f64(&mut v);
            let above = v.iter().filter(|&&s| s > m).count();
            GroupSummary {
                group: g.to_string(),
                count: v.len(),
                min: v[0],
                q1: nearest_rank(&v, 25.0),
                median: lower_median(&v),
                q3: nearest_rank(&v, 75.0),
                max: v[v.len() - 1],
                above_median: above,
                share_within: above as f64 / v.len() as f64,
                share_of_national: (above_total > 0).then(|| above as f64 / above_total as f64),
            }
        })
        .collect()
}

pub fn write_group_summaries<W: Write>(rows: &[GroupSummary], mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io("<groups>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "group",
        "count",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "above_median",
        "share_within",
        "share_of_national",
    ])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.count.to_string(),
            r.min.to_string(),
            r.q1.to_string(),
            r.median.to_string(),
            r.q3.to_string(),
            r.max.to_string(),
            r.above_median.to_string(),
            r.share_within.to_string(),
            r.share_of_national.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<groups>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VipSummary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub replications: usize,
    /// Per-replication proportions, one row per seed.
    pub runs: Vec<Vec<f64>>,
}

/// Share threshold for the reported subset of predictors.
pub const VIP_REPORT_THRESHOLD: f64 = 0.01;

impl VipSummary {
    /// Predictors whose mean inclusion is at least 1%, by decreasing mean.
    pub fn reported(&self) -> Vec<(String, f64, f64)> {
        let mut v: Vec<(String, f64, f64)> = (0..self.names.len())
            .filter(|&j| self.mean[j] >= VIP_REPORT_THRESHOLD)
            .map(|j| (self.names[j].clone(), self.mean[j], self.sd[j]))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}").map_err(|e| Error::io("<vip>", e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["predictor", "mean", "sd", "reported"])?;
        for j in 0..self.names.len() {
            w.write_record([
                self.names[j].clone(),
                self.mean[j].to_string(),
                self.sd[j].to_string(),
                (self.mean[j] >= VIP_REPORT_THRESHOLD).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<vip>", e))?;
        Ok(())
    }
}

/// Aggregates per-run inclusion proportions.
pub fn summarize_vip(names: Vec<String>, runs: Vec<Vec<f64>>) -> VipSummary {
    let p = names.len();
    let col = |j: usize| runs.iter().map(|r| r[j]).collect::<Vec<f64>>();
    VipSummary {
        mean: (0..p).map(|j| mean(&col(j))).collect(),
        sd: (0..p).map(|j| sample_sd(&col(j))).collect(),
        replications: runs.len(),
        names,
        runs,
    }
}

/// Refits the model once per seed on the same rows and summarizes the
/// inclusion proportions.
pub fn vip_replicate(x: &FeatureMatrix, y: &[bool], config: &BartConfig, seeds: &[u64]) -> Result<VipSummary> {
    if seeds.len() < 2 {
        return Err(Error::Parameter("VIP replication needs at least two seeds".into()));
    }
    let runs = seeds
        .par_iter()
        .map(|&s| Ok(bart::fit(x, y, &BartConfig { seed: s, ..config.clone() })?.vip()))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_vip(x.names.clone(), runs))
}
