//! Classifier evaluation: AUC, accuracy, sensitivity, specificity and
//! precision per fold, aggregated as mean ± population standard deviation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const SCORES_HEADER: [&str; 6] = ["record_index", "neuron_id", "point_id", "fold", "label", "score"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub record_index: u64,
    pub neuron_id: u64,
    pub point_id: u64,
    pub fold: usize,
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let t = ScoreTable { rows };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.label > 1 {
                return Err(Error::Metrics(format!("row {i}: label {} is not binary", r.label)));
            }
            if !(0.0..=1.0).contains(&r.score) {
                return Err(Error::Metrics(format!("row {i}: score {} outside [0, 1]", r.score)));
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != SCORES_HEADER {
            return Err(Error::Metrics(format!(
                "scores header must be {:?}, got {header:?}",
                SCORES_HEADER.join(",")
            )));
        }
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
        ScoreTable::new(rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(SCORES_HEADER)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows grouped by fold index, folds ascending.
    pub fn by_fold(&self) -> BTreeMap<usize, Vec<ScoreRow>> {
        let mut out: BTreeMap<usize, Vec<ScoreRow>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.fold).or_default().push(*r);
        }
        out
    }
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Metrics(format!("label {l} is not binary")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metrics("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metrics("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the sum of positive midranks, so tied groups stay integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        // ranks i+1 ..= j share the midrank (i + 1 + j) / 2
        rank_sum2 += pos_in_group * (i as u128 + 1 + j as u128);
        i = j;
    }
    let u2 = rank_sum2 - (n_pos as u128) * (n_pos as u128 + 1);
    Ok(u2 as f64 / (2 * n_pos as u128 * n_neg as u128) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }
}

/// Confusion counts with prediction = 1 iff `score >= threshold`.
pub fn confusion_at(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::Metrics("no rows".into()));
    }
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub rows: usize,
    pub confusion: Confusion,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    /// Specificity over the additional control-only population, when given.
    pub specificity2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    /// Folds that contributed.
    pub folds: usize,
}

impl Summary {
    /// Unweighted mean and population standard deviation of the present values.
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Option<Summary> {
        let vals: Vec<f64> = values.into_iter().flatten().collect();
        if vals.is_empty() {
            return None;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
            folds: vals.len(),
        })
    }

    /// Percentages with one decimal, e.g. `94.9±1.4`.
    pub fn render(&self) -> String {
        format!("{:.1}±{:.1}", self.mean * 100.0, self.std * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub folds: Vec<FoldMetrics>,
    pub auc: Option<Summary>,
    pub accuracy: Option<Summary>,
    pub sensitivity: Option<Summary>,
    pub specificity: Option<Summary>,
    pub precision: Option<Summary>,
    pub specificity2: Option<Summary>,
    pub warnings: Vec<String>,
}

pub fn report(table: &ScoreTable, threshold: f64) -> Result<MetricsReport> {
    report_with_population(table, None, threshold)
}

/// Like [`report`], additionally measuring specificity on `other`, a
/// population of control points scored by the same model.
pub fn report_with_population(table: &ScoreTable, other: Option<&ScoreTable>, threshold: f64) -> Result<MetricsReport> {
    table.validate()?;
    let other_folds = other.map(ScoreTable::by_fold).unwrap_or_default();
    let mut warnings = Vec::new();
    let mut folds = Vec::new();
    for (fold, rows) in table.by_fold() {
        let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
        let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
        let auc = match roc_auc(&scores, &labels) {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("fold {fold} has a single class; AUC excluded");
                log::warn!("{msg}");
                warnings.push(msg);
                None
            }
        };
        let confusion = confusion_at(&scores, &labels, threshold)?;
        let specificity2 = match other_folds.get(&fold) {
            Some(rows) => {
                let s: Vec<f64> = rows.iter().map(|r| r.score).collect();
                let l: Vec<u8> = rows.iter().map(|r| r.label).collect();
                confusion_at(&s, &l, threshold)?.specificity()
            }
            None => None,
        };
        folds.push(FoldMetrics {
            fold,
            rows: rows.len(),
            confusion,
            auc,
            accuracy: confusion.accuracy(),
            sensitivity: confusion.sensitivity(),
            specificity: confusion.specificity(),
            precision: confusion.precision(),
            specificity2,
        });
    }
    if !folds.iter().any(|f| f.auc.is_some()) {
        return Err(Error::Metrics("no fold contains both classes".into()));
    }
    Ok(MetricsReport {
        threshold,
        auc: Summary::of(folds.iter().map(|f| f.auc)),
        accuracy: Summary::of(folds.iter().map(|f| f.accuracy)),
        sensitivity: Summary::of(folds.iter().map(|f| f.sensitivity)),
        specificity: Summary::of(folds.iter().map(|f| f.specificity)),
        precision: Summary::of(folds.iter().map(|f| f.precision)),
        specificity2: Summary::of(folds.iter().map(|f| f.specificity2)),
        folds,
        warnings,
    })
}

fn cell(s: &Option<Summary>) -> String {
    s.map(|s| s.render()).unwrap_or_else(|| "n/a".to_string())
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header and one row of `mean±std` cells, in percent.
    pub fn row(&self, name: &str) -> (Vec<String>, Vec<String>) {
        let mut header = vec![
            "Network".to_string(),
            "AUC (%)".into(),
            "Accuracy (%)".into(),
            "Sensitivity (%)".into(),
            "Specificity (%)".into(),
            "Precision (%)".into(),
        ];
        let mut row = vec![
            name.to_string(),
            cell(&self.auc),
            cell(&self.accuracy),
            cell(&self.sensitivity),
            cell(&self.specificity),
            cell(&self.precision),
        ];
        if self.specificity2.is_some() {
            header.push("Specificity2 (%)".into());
            row.push(cell(&self.specificity2));
        }
        (header, row)
    }

    /// Aligned text table with a single model row.
    pub fn render_table(&self, name: &str) -> String {
        let (header, row) = self.row(name);
        render_rows(&header, &[row])
    }
}

/// Column-aligned `|`-separated table.
pub fn render_rows(header: &[String], rows: &[Vec<String>]) -> String {
    let width = |i: usize| {
        std::iter::once(&header[i])
            .chain(rows.iter().map(|r| &r[i]))
            .map(|s| s.chars().count())
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..header.len()).map(width).collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            let pad = widths[i] - c.chars().count();
            s.push_str(c);
            s.extend(std::iter::repeat_n(' ', pad));
        }
        s.trim_end().to_string()
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(header));
    let sep: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", line(&sep).replace(" | ", "-|-"));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out
}
