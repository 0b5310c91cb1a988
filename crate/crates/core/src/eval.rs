//! Tagging metrics: ROC AUC averaged over tags (AUC-T) and over clips
//! (AUC-C), and top-K precision.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRECISION_KS: [usize; 5] = [3, 6, 9, 12, 15];

/// Mann-Whitney AUC; tied scores count one half. `None` when the labels
/// hold a single class.
pub fn auc_binary(scores: ArrayView1<f64>, labels: ArrayView1<f64>) -> Option<f64> {
    let n = scores.len();
    let positives = labels.iter().filter(|&&y| y > 0.5).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of (doubled) midranks of the positives keeps the arithmetic exact
    let mut doubled_rank_sum = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled midrank = i + j + 2
        let mid2 = (i + j + 2) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] > 0.5).count() as u64;
        doubled_rank_sum += mid2 * pos_in_group;
        i = j + 1;
    }
    let p = positives as u64;
    // 2 * U = doubled rank sum - P(P+1)
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Some(doubled_u as f64 / (2 * p * negatives as u64) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub mean: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

fn mean_auc<'a>(pairs: impl Iterator<Item = (ArrayView1<'a, f64>, ArrayView1<'a, f64>)>) -> Result<AucSummary> {
    let (mut sum, mut evaluated, mut skipped) = (0.0, 0, 0);
    for (s, y) in pairs {
        match auc_binary(s, y) {
            Some(a) => {
                sum += a;
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(Error::NoEvaluableTags);
    }
    Ok(AucSummary {
        mean: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}

fn check_shapes(scores: &ArrayView2<f64>, labels: &ArrayView2<f64>) -> Result<()> {
    if scores.dim() != labels.dim() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    Ok(())
}

/// Mean AUC over tag columns.
pub fn auc_tag(scores: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<AucSummary> {
    check_shapes(&scores, &labels)?;
    mean_auc(scores.columns().into_iter().zip(labels.columns()))
}

/// Mean AUC over clip rows.
pub fn auc_clip(scores: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<AucSummary> {
    check_shapes(&scores, &labels)?;
    mean_auc(scores.rows().into_iter().zip(labels.rows()))
}

/// Clip-averaged fraction of each clip's `k` best-scored tags that are
/// true. Ties go to the lower tag index.
pub fn precision_at_k(scores: ArrayView2<f64>, labels: ArrayView2<f64>, k: usize) -> Result<f64> {
    check_shapes(&scores, &labels)?;
    if k == 0 || k > scores.ncols() {
        return Err(Error::Config(format!(
            "k = {k} needs between 1 and {} tags",
            scores.ncols()
        )));
    }
    let mut total = 0.0;
    for (s, y) in scores.rows().into_iter().zip(labels.rows()) {
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let hits = order[..k].iter().filter(|&&j| y[j] > 0.5).count();
        total += hits as f64 / k as f64;
    }
    Ok(total / scores.nrows() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub auc_tag: AucSummary,
    pub auc_clip: AucSummary,
    /// `(k, precision)` for every `k` that fits the tag count.
    pub precision: Vec<(usize, f64)>,
}

pub fn evaluate(scores: ArrayView2<f64>, labels: ArrayView2<f64>) -> Result<Report> {
    let precision = PRECISION_KS
        .iter()
        .filter(|&&k| k <= scores.ncols())
        .map(|&k| precision_at_k(scores, labels, k).map(|p| (k, p)))
        .collect::<Result<_>>()?;
    Ok(Report {
        auc_tag: auc_tag(scores, labels)?,
        auc_clip: auc_clip(scores, labels)?,
        precision,
    })
}

impl Report {
    /// One header line and one value line, tab separated.
    pub fn to_delimited(&self) -> String {
        let mut head = String::from("auc_t\tauc_c");
        let mut row = format!("{:.6}\t{:.6}", self.auc_tag.mean, self.auc_clip.mean);
        for (k, p) in &self.precision {
            write!(head, "\tp{k}").unwrap();
            write!(row, "\t{p:.6}").unwrap();
        }
        format!("{head}\n{row}\n")
    }

    pub fn to_table(&self) -> String {
        let mut head = format!("| {:>6} | {:>6} |", "AUC-T", "AUC-C");
        let mut row = format!("| {:>6.4} | {:>6.4} |", self.auc_tag.mean, self.auc_clip.mean);
        for (k, p) in &self.precision {
            write!(head, " {:>6} |", format!("P{k}")).unwrap();
            write!(row, " {p:>6.4} |").unwrap();
        }
        let rule: String = head.chars().map(|c| if c == '|' { '|' } else { '-' }).collect();
        format!(
            "{head}\n{rule}\n{row}\n(tags skipped: {}, clips skipped: {})\n",
            self.auc_tag.skipped, self.auc_clip.skipped
        )
    }
}

/// Convenience for building label matrices from bit rows.
pub fn labels_from_bits(rows: &[Vec<bool>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| if rows[i][j] { 1.0 } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::{array, Array1};
    use proptest::prelude::*;
    use rand::Rng;

    /// O(n^2) enumeration of positive/negative pairs.
    fn pair_count_auc(s: &[f64], y: &[f64]) -> Option<f64> {
        let (mut num, mut pairs) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if y[i] > 0.5 && y[j] < 0.5 {
                    pairs += 1.0;
                    num += if s[i] > s[j] {
                        1.0
                    } else if s[i] == s[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        (pairs > 0.0).then(|| num / pairs)
    }

    fn auc(s: &[f64], y: &[f64]) -> Option<f64> {
        auc_binary(ArrayView1::from(s), ArrayView1::from(y))
    }

    #[test]
    fn perfect_reversed_and_tied_rankings() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1.0, 1.0, 0.0, 0.0]), Some(1.0));
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0.0, 0.0, 1.0, 1.0]), Some(0.0));
        assert_eq!(auc(&[0.5; 4], &[1.0, 0.0, 1.0, 0.0]), Some(0.5));
    }

    #[test]
    fn single_class_is_skipped() {
        assert_eq!(auc(&[0.1, 0.2], &[1.0, 1.0]), None);
        assert_eq!(auc(&[0.1, 0.2], &[0.0, 0.0]), None);
    }

    #[test]
    fn matches_pair_enumeration_on_random_instances() {
        let mut r = rng::seeded(8);
        for _ in 0..200 {
            // coarse scores so that ties occur
            let s: Vec<f64> = (0..20).map(|_| (r.random_range(0..8) as f64) / 8.0).collect();
            let y: Vec<f64> = (0..20).map(|_| if r.random::<bool>() { 1.0 } else { 0.0 }).collect();
            assert_eq!(auc(&s, &y), pair_count_auc(&s, &y));
        }
    }

    #[test]
    fn perfect_thresholded_scores_give_one_for_both_axes() {
        let y = array![[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s = &y * 0.8 + 0.1;
        assert_eq!(auc_tag(s.view(), y.view()).unwrap().mean, 1.0);
        assert_eq!(auc_clip(s.view(), y.view()).unwrap().mean, 1.0);
    }

    #[test]
    fn random_scores_average_near_half() {
        let mut r = rng::seeded(3);
        let s = Array2::from_shape_fn((200, 20), |_| r.random::<f64>());
        let y = Array2::from_shape_fn((200, 20), |_| if r.random::<bool>() { 1.0 } else { 0.0 });
        let t = auc_tag(s.view(), y.view()).unwrap().mean;
        let c = auc_clip(s.view(), y.view()).unwrap().mean;
        assert!((t - 0.5).abs() < 0.05, "{t}");
        assert!((c - 0.5).abs() < 0.05, "{c}");
    }

    #[test]
    fn transposition_swaps_tag_and_clip_averages() {
        let mut r = rng::seeded(4);
        let s = Array2::from_shape_fn((15, 9), |_| r.random::<f64>());
        let y = Array2::from_shape_fn((15, 9), |_| if r.random::<f64>() < 0.3 { 1.0 } else { 0.0 });
        assert_eq!(auc_tag(s.view(), y.view()).unwrap(), auc_clip(s.t(), y.t()).unwrap());
        assert_eq!(auc_clip(s.view(), y.view()).unwrap(), auc_tag(s.t(), y.t()).unwrap());
    }

    #[test]
    fn all_single_class_columns_is_an_error() {
        let y = Array2::ones((4, 3));
        let s = Array2::zeros((4, 3));
        assert_eq!(auc_tag(s.view(), y.view()).unwrap_err().to_string(), "no evaluable tags");
    }

    #[test]
    fn skipped_columns_are_reported() {
        let y = array![[1.0, 1.0], [0.0, 1.0]];
        let s = array![[0.9, 0.1], [0.1, 0.2]];
        let summary = auc_tag(s.view(), y.view()).unwrap();
        assert_eq!((summary.evaluated, summary.skipped), (1, 1));
    }

    #[test]
    fn precision_edge_cases() {
        let s = array![[0.9, 0.8, 0.7, 0.1], [0.9, 0.8, 0.7, 0.1]];
        let y = array![[1.0, 1.0, 1.0, 0.0], [0.0, 0.0, 0.0, 0.0]];
        assert_eq!(precision_at_k(s.slice(ndarray::s![0..1, ..]), y.slice(ndarray::s![0..1, ..]), 3).unwrap(), 1.0);
        assert_eq!(precision_at_k(s.slice(ndarray::s![1..2, ..]), y.slice(ndarray::s![1..2, ..]), 3).unwrap(), 0.0);
        assert_eq!(precision_at_k(s.view(), y.view(), 3).unwrap(), 0.5);
    }

    #[test]
    fn precision_ties_prefer_lower_index() {
        let s = array![[0.5, 0.5, 0.5, 0.5]];
        let y = array![[0.0, 1.0, 0.0, 1.0]];
        // top-2 by index: tags 0 and 1
        assert_eq!(precision_at_k(s.view(), y.view(), 2).unwrap(), 0.5);
        let y = array![[1.0, 1.0, 0.0, 0.0]];
        assert_eq!(precision_at_k(s.view(), y.view(), 2).unwrap(), 1.0);
    }

    #[test]
    fn report_renders_all_columns() {
        let mut r = rng::seeded(5);
        let s = Array2::from_shape_fn((10, 16), |_| r.random::<f64>());
        let y = Array2::from_shape_fn((10, 16), |(i, j)| if (i + j) % 3 == 0 { 1.0 } else { 0.0 });
        let report = evaluate(s.view(), y.view()).unwrap();
        assert_eq!(report.precision.len(), 5);
        let text = report.to_delimited();
        assert!(text.starts_with("auc_t\tauc_c\tp3\tp6\tp9\tp12\tp15\n"));
        assert!(report.to_table().contains("P15"));
    }

    proptest! {
        #[test]
        fn monotone_invariance_and_complement(
            scores in proptest::collection::vec(-5.0f64..5.0, 12),
            bits in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let y: Array1<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let s = Array1::from(scores);
            if let Some(a) = auc_binary(s.view(), y.view()) {
                let transformed = s.mapv(|v| (0.7 * v).exp() + 3.0);
                prop_assert_eq!(auc_binary(transformed.view(), y.view()), Some(a));
                let flipped = s.mapv(|v| 1.0 - v);
                let b = auc_binary(flipped.view(), y.view()).unwrap();
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }
            let s2 = s.clone().insert_axis(ndarray::Axis(0));
            let y2 = y.clone().insert_axis(ndarray::Axis(0));
            let t2 = s2.mapv(|v| v * v * v);
            for k in [3, 6, 9, 12] {
                prop_assert_eq!(
                    precision_at_k(s2.view(), y2.view(), k).unwrap(),
                    precision_at_k(t2.view(), y2.view(), k).unwrap()
                );
            }
        }
    }
}
