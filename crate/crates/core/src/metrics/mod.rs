//! Threshold accuracy measures, ROC / PR areas and rank correlation.

pub mod harness;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// The three threshold measures; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMeasures {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub n_obs: usize,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Alignment(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Counts with "predicted exporter" meaning `score > threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    check_lengths(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s > threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn accuracy_measures(c: &ConfusionCounts) -> AccuracyMeasures {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let balanced_accuracy = match (sensitivity, specificity) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    AccuracyMeasures {
        sensitivity,
        specificity,
        balanced_accuracy,
    }
}

/// Doubled mid-ranks (1-based), so ties stay integral.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged, doubled
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// ROC area as the Mann-Whitney statistic, ties between a positive and a
/// negative counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC AUC needs both classes present".into(),
        ));
    }
    let ranks = doubled_midranks(scores);
    let r2: u64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y)
        .map(|(&r, _)| r)
        .sum();
    // 2 * U = 2 * R_pos - n_pos (n_pos + 1)
    let u2 = r2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Area under the precision-recall curve with step interpolation: the sum
/// over distinct score thresholds (descending) of recall gain times
/// precision at that threshold.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("PR AUC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut gained = 0;
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                gained += 1;
            }
            seen += 1;
            i += 1;
        }
        tp += gained;
        if gained > 0 {
            area += (gained as f64 / n_pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(area)
}

/// Pearson correlation of mid-ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} vs {} scores", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedMetric(
            "rank correlation needs at least two rows".into(),
        ));
    }
    let ra: Vec<f64> = doubled_midranks(a).iter().map(|&r| r as f64 / 2.0).collect();
    let rb: Vec<f64> = doubled_midranks(b).iter().map(|&r| r as f64 / 2.0).collect();
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedMetric(
            "rank correlation of a constant vector".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Full report. Curve areas are absent when a class is missing.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricsReport> {
    let counts = confusion(scores, labels, threshold)?;
    let m = accuracy_measures(&counts);
    Ok(MetricsReport {
        threshold,
        n_obs: labels.len(),
        counts,
        sensitivity: m.sensitivity,
        specificity: m.specificity,
        balanced_accuracy: m.balanced_accuracy,
        roc_auc: roc_auc(scores, labels).ok(),
        pr_auc: pr_auc(scores, labels).ok(),
    })
}

/// One report per distinct group label, in sorted group order.
pub fn evaluate_by_group(
    scores: &[f64],
    labels: &[bool],
    groups: &[String],
    threshold: f64,
) -> Result<Vec<(String, MetricsReport)>> {
    check_lengths(scores, labels)?;
    if groups.len() != labels.len() {
        return Err(Error::Alignment(format!(
            "{} group labels for {} rows",
            groups.len(),
            labels.len()
        )));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    members
        .into_iter()
        .map(|(g, rows)| {
            let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
            let y: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
            Ok((g.to_string(), evaluate(&s, &y, threshold)?))
        })
        .collect()
}

/// Pairwise rank correlations; entry (i, j) correlates vectors i and j.
pub fn spearman_matrix(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = vectors.len();
    let mut m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let r = spearman(&vectors[i], &vectors[j])?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}

/// A labelled report row in the tabular output.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub group: String,
    pub fold: usize,
    pub report: MetricsReport,
}

pub const REPORT_HEADER: [&str; 14] = [
    "model",
    "group",
    "fold",
    "specificity",
    "sensitivity",
    "balanced_accuracy",
    "auc",
    "pr",
    "n_obs",
    "threshold",
    "tp",
    "fp",
    "fn",
    "tn",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes report rows as CSV after `# ` comment lines; absent measures are
/// empty cells.
pub fn write_reports<W: Write>(rows: &[ReportRow], mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}").map_err(|e| Error::io("<report>", e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        let m = &r.report;
        w.write_record([
            r.model.clone(),
            r.group.clone(),
            r.fold.to_string(),
            opt(m.specificity),
            opt(m.sensitivity),
            opt(m.balanced_accuracy),
            opt(m.roc_auc),
            opt(m.pr_auc),
            m.n_obs.to_string(),
            m.threshold.to_string(),
            m.counts.tp.to_string(),
            m.counts.fp.to_string(),
            m.counts.fn_.to_string(),
            m.counts.tn.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&[0.9, 0.8, 0.4, 0.2], &[true, false, true, false], 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 });
        let c = confusion(&[1.0; 3], &[true; 3], 0.5).unwrap();
        assert_eq!(c.tp, 3);
        let c = confusion(&[1.0, 0.3], &[true, false], 1.0).unwrap();
        assert_eq!(c.tp + c.fp, 0);
        // a score equal to the threshold is predicted 0
        assert_eq!(confusion(&[0.5], &[true], 0.5).unwrap().fn_, 1);
        assert!(matches!(confusion(&[0.5], &[], 0.5), Err(Error::Alignment(_))));
    }

    #[test]
    fn measure_examples() {
        let m = accuracy_measures(&ConfusionCounts { tp: 3, fp: 1, fn_: 2, tn: 4 });
        assert!((m.sensitivity.unwrap() - 0.6).abs() < 1e-15);
        assert!((m.specificity.unwrap() - 0.8).abs() < 1e-15);
        assert!((m.balanced_accuracy.unwrap() - 0.7).abs() < 1e-15);
        let m = accuracy_measures(&ConfusionCounts { tp: 5, fp: 0, fn_: 1, tn: 0 });
        assert_eq!(m.specificity, None);
        assert_eq!(m.balanced_accuracy, None);
        let m = accuracy_measures(&ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 5 });
        assert_eq!(m.balanced_accuracy, Some(1.0));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        // positive at 0.5 ties one negative and beats two: (2 + 0.5) / 3
        let a = roc_auc(&[0.5, 0.5, 0.2, 0.1], &[true, false, false, false]).unwrap();
        assert!((a - 2.5 / 3.0).abs() < 1e-15);
        assert!(matches!(roc_auc(&[0.1], &[true]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn pr_examples() {
        assert_eq!(pr_auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        // ranking: +, -, + -> 1/2 * 1 + 1/2 * 2/3
        let a = pr_auc(&[0.9, 0.5, 0.1], &[true, false, true]).unwrap();
        assert!((a - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(pr_auc(&[0.1], &[false]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn single_class_groups() {
        let scores = [0.9, 0.2, 0.7, 0.1];
        let labels = [true, true, false, false];
        let groups: Vec<String> = ["c", "c", "n", "n"].iter().map(|s| s.to_string()).collect();
        let r = evaluate_by_group(&scores, &labels, &groups, 0.5).unwrap();
        assert_eq!(r[0].1.sensitivity, Some(0.5));
        assert_eq!(r[0].1.specificity, None);
        assert_eq!(r[0].1.roc_auc, None);
        assert_eq!(r[1].1.specificity, Some(0.5));
        assert_eq!(r[1].1.sensitivity, None);
    }

    #[test]
    fn report_csv_layout() {
        let rep = evaluate(&[0.9, 0.1], &[true, false], 0.5).unwrap();
        let mut buf = Vec::new();
        write_reports(
            &[ReportRow { model: "m".into(), group: "all".into(), fold: 0, report: rep }],
            &mut buf,
            &["x".into()],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# x");
        assert!(lines[1].starts_with("model,group,fold,specificity,sensitivity,balanced_accuracy,auc,pr,n_obs"));
        assert_eq!(lines[2], "m,all,0,1,1,1,1,1,2,0.5,1,0,0,1");
    }
}
