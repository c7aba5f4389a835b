//! Counting metrics (MAE, off-by-one accuracy) and segmentation metrics
//! (matched-segment IoU, mean boundary error in frames).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decode::{PredictionSource, SegmentPrediction};
use crate::error::{Error, Result};
use crate::skeleton::{Population, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountMetrics {
    pub mae_abs: f64,
    /// Mean of `|p - g| / max(g, 1)`.
    pub mae_norm: f64,
    pub obo: f64,
}

pub fn count_metrics(preds: &[usize], gts: &[usize]) -> Result<CountMetrics> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch { expected: gts.len(), actual: preds.len() });
    }
    if gts.is_empty() {
        return Err(Error::EmptyInput("count metrics"));
    }
    let n = gts.len() as f64;
    let (mut abs, mut norm, mut obo) = (0.0, 0.0, 0usize);
    for (&p, &g) in preds.iter().zip(gts) {
        let e = p.abs_diff(g);
        abs += e as f64;
        norm += e as f64 / g.max(1) as f64;
        obo += usize::from(e <= 1);
    }
    Ok(CountMetrics { mae_abs: abs / n, mae_norm: norm / n, obo: obo as f64 / n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
}

impl SegmentMatching {
    pub fn total_iou(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }
}

/// Greedy one-to-one matching in order of decreasing IoU (ties by ground
/// truth index, then prediction index). Non-overlapping pairs never match.
pub fn match_segments(gt: &[Segment], pred: &[Segment]) -> SegmentMatching {
    let mut candidates: Vec<MatchedPair> = Vec::new();
    for (g, gs) in gt.iter().enumerate() {
        for (p, ps) in pred.iter().enumerate() {
            let iou = gs.iou(ps);
            if iou > 0.0 {
                candidates.push(MatchedPair { gt: g, pred: p, iou });
            }
        }
    }
    candidates.sort_by(|a, b| b.iou.total_cmp(&a.iou).then(a.gt.cmp(&b.gt)).then(a.pred.cmp(&b.pred)));
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !gt_used[c.gt] && !pred_used[c.pred] {
            gt_used[c.gt] = true;
            pred_used[c.pred] = true;
            pairs.push(c);
        }
    }
    pairs.sort_by_key(|p| p.gt);
    let unused = |used: &[bool]| used.iter().enumerate().filter(|(_, &u)| !u).map(|(i, _)| i).collect();
    SegmentMatching { pairs, unmatched_gt: unused(&gt_used), unmatched_pred: unused(&pred_used) }
}

/// Sum of matched IoUs over `max(|gt|, |pred|)`; 1 when both lists are empty.
pub fn segmentation_iou(gt: &[Segment], pred: &[Segment]) -> f64 {
    let denom = gt.len().max(pred.len());
    if denom == 0 {
        return 1.0;
    }
    match_segments(gt, pred).total_iou() / denom as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    /// Mean over matched pairs of the averaged start and end deviations.
    pub mae_f: f64,
    /// Matched pairs over `max(|gt|, |pred|)`.
    pub coverage: f64,
}

pub fn mae_frames(gt: &[Segment], pred: &[Segment]) -> Result<FrameError> {
    let m = match_segments(gt, pred);
    if m.pairs.is_empty() {
        return Err(Error::NoMatchedPairs);
    }
    let total: f64 = m
        .pairs
        .iter()
        .map(|p| {
            let (g, q) = (gt[p.gt], pred[p.pred]);
            (g.start.abs_diff(q.start) + g.end.abs_diff(q.end)) as f64 / 2.0
        })
        .sum();
    Ok(FrameError {
        mae_f: total / m.pairs.len() as f64,
        coverage: m.pairs.len() as f64 / gt.len().max(pred.len()) as f64,
    })
}

/// Scores of one evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub sample_id: String,
    pub exercise: String,
    pub population: Population,
    pub gt_count: usize,
    pub pred_count: usize,
    /// `None` for count-head predictions, which carry no segments.
    pub iou: Option<f64>,
    /// `None` when no pair matched or no segments were predicted.
    pub mae_f: Option<f64>,
    pub coverage: Option<f64>,
}

impl SampleMetrics {
    pub fn score(
        sample_id: &str,
        exercise: &str,
        population: Population,
        gt: &[Segment],
        pred: &SegmentPrediction,
    ) -> Self {
        let segmented = pred.source != PredictionSource::CountHead;
        let frames = if segmented { mae_frames(gt, &pred.segments).ok() } else { None };
        Self {
            sample_id: sample_id.to_string(),
            exercise: exercise.to_string(),
            population,
            gt_count: gt.len(),
            pred_count: pred.count,
            iou: segmented.then(|| segmentation_iou(gt, &pred.segments)),
            mae_f: frames.map(|f| f.mae_f),
            coverage: frames.map(|f| f.coverage),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Overall,
    PerExercise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub grouping: Grouping,
    /// `"overall"` or the exercise id.
    pub group: String,
    pub n_samples: usize,
    pub mae_abs: f64,
    pub mae_norm: f64,
    pub obo: f64,
    pub iou: Option<f64>,
    pub mae_f: Option<f64>,
    /// Samples excluded from MAE-F because nothing matched.
    pub mae_f_excluded: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(group: &str, grouping: Grouping, samples: &[&SampleMetrics]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::EmptyGroup(group.to_string()));
    }
    let preds: Vec<usize> = samples.iter().map(|s| s.pred_count).collect();
    let gts: Vec<usize> = samples.iter().map(|s| s.gt_count).collect();
    let counts = count_metrics(&preds, &gts)?;
    let segmented: Vec<&&SampleMetrics> = samples.iter().filter(|s| s.iou.is_some()).collect();
    Ok(MetricsReport {
        grouping,
        group: group.to_string(),
        n_samples: samples.len(),
        mae_abs: counts.mae_abs,
        mae_norm: counts.mae_norm,
        obo: counts.obo,
        iou: mean(samples.iter().filter_map(|s| s.iou)),
        mae_f: mean(samples.iter().filter_map(|s| s.mae_f)),
        mae_f_excluded: segmented.iter().filter(|s| s.mae_f.is_none()).count(),
    })
}

/// Unweighted means over samples, either pooled or one row per exercise.
pub fn aggregate(samples: &[SampleMetrics], grouping: Grouping) -> Result<Vec<MetricsReport>> {
    match grouping {
        Grouping::Overall => {
            let all: Vec<&SampleMetrics> = samples.iter().collect();
            Ok(vec![summarize("overall", grouping, &all)?])
        }
        Grouping::PerExercise => {
            if samples.is_empty() {
                return Err(Error::EmptyGroup("per-exercise".into()));
            }
            let mut groups: BTreeMap<&str, Vec<&SampleMetrics>> = BTreeMap::new();
            for s in samples {
                groups.entry(s.exercise.as_str()).or_default().push(s);
            }
            groups.iter().map(|(ex, members)| summarize(ex, grouping, members)).collect()
        }
    }
}

/// CSV in table form: one row per metric, one column per exercise plus the total.
pub fn report_csv(method: &str, overall: &MetricsReport, per_exercise: &[MetricsReport]) -> String {
    let mut out = String::from("method,metric");
    for r in per_exercise {
        write!(out, ",{}", r.group).unwrap();
    }
    out.push_str(",total\n");
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.4}"));
    type Getter = fn(&MetricsReport) -> Option<f64>;
    let rows: [(&str, Getter); 5] = [
        ("mae_abs", |r| Some(r.mae_abs)),
        ("mae_norm", |r| Some(r.mae_norm)),
        ("obo", |r| Some(r.obo)),
        ("iou", |r| r.iou),
        ("mae_f", |r| r.mae_f),
    ];
    for (name, get) in rows {
        write!(out, "{method},{name}").unwrap();
        for r in per_exercise {
            write!(out, ",{}", fmt(get(r))).unwrap();
        }
        writeln!(out, ",{}", fmt(get(overall))).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(v: &[(usize, usize)]) -> Vec<Segment> {
        v.iter().map(|&s| s.into()).collect()
    }

    #[test]
    fn count_examples() {
        let m = count_metrics(&[3, 4, 5], &[3, 4, 5]).unwrap();
        assert_eq!((m.mae_abs, m.mae_norm, m.obo), (0.0, 0.0, 1.0));
        let m = count_metrics(&[5], &[7]).unwrap();
        assert_eq!((m.mae_abs, m.obo), (2.0, 0.0));
        assert!((m.mae_norm - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(count_metrics(&[4, 6], &[5, 5]).unwrap().obo, 1.0);
        assert_eq!(count_metrics(&[1], &[0]).unwrap().mae_norm, 1.0);
        assert!(matches!(count_metrics(&[1], &[1, 2]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(count_metrics(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn matching_examples() {
        let a = segs(&[(0, 10), (12, 20), (25, 40)]);
        let m = match_segments(&a, &a);
        assert_eq!(m.pairs.len(), 3);
        assert!(m.pairs.iter().all(|p| p.iou == 1.0 && p.gt == p.pred));
        let m = match_segments(&segs(&[(0, 5)]), &segs(&[(5, 9)]));
        assert!(m.pairs.is_empty());
        assert_eq!((m.unmatched_gt, m.unmatched_pred), (vec![0], vec![0]));
    }

    #[test]
    fn iou_examples() {
        let a = segs(&[(0, 10), (20, 30)]);
        assert_eq!(segmentation_iou(&a, &a), 1.0);
        assert!((segmentation_iou(&segs(&[(0, 10)]), &segs(&[(5, 15)])) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(segmentation_iou(&a, &segs(&[(0, 10)])), 0.5);
        assert_eq!(segmentation_iou(&[], &[]), 1.0);
        assert_eq!(segmentation_iou(&a, &[]), 0.0);
    }

    #[test]
    fn mae_frames_examples() {
        let a = segs(&[(5, 15), (20, 35)]);
        let f = mae_frames(&a, &a).unwrap();
        assert_eq!((f.mae_f, f.coverage), (0.0, 1.0));
        let shifted: Vec<Segment> = a.iter().map(|s| s.shifted(3)).collect();
        assert_eq!(mae_frames(&a, &shifted).unwrap().mae_f, 3.0);
        assert!(matches!(mae_frames(&a, &segs(&[(40, 50)])), Err(Error::NoMatchedPairs)));
        let half = mae_frames(&a, &a[..1]).unwrap();
        assert_eq!(half.coverage, 0.5);
    }

    #[test]
    fn aggregate_single_and_groups() {
        let s = |id: &str, ex: &str, g: usize, p: usize, iou: f64| SampleMetrics {
            sample_id: id.into(),
            exercise: ex.into(),
            population: Population::Unknown,
            gt_count: g,
            pred_count: p,
            iou: Some(iou),
            mae_f: Some(iou * 10.0),
            coverage: Some(1.0),
        };
        let one = [s("a", "x", 4, 5, 0.5)];
        let r = &aggregate(&one, Grouping::Overall).unwrap()[0];
        assert_eq!((r.n_samples, r.mae_abs, r.obo, r.iou, r.mae_f), (1, 1.0, 1.0, Some(0.5), Some(5.0)));

        let two = [s("a", "x", 4, 5, 0.5), s("b", "y", 4, 7, 0.9)];
        let overall = &aggregate(&two, Grouping::Overall).unwrap()[0];
        let per = aggregate(&two, Grouping::PerExercise).unwrap();
        assert_eq!(per.len(), 2);
        assert_eq!(overall.mae_abs, (per[0].mae_abs + per[1].mae_abs) / 2.0);
        assert!((overall.iou.unwrap() - 0.7).abs() < 1e-12);
        assert!(matches!(aggregate(&[], Grouping::Overall), Err(Error::EmptyGroup(_))));

        let csv = report_csv("density", overall, &per);
        assert!(csv.starts_with("method,metric,x,y,total\n"));
        assert!(csv.contains("density,obo,1.0000,0.0000,0.5000"));
    }
}
