//! Turning per-frame model outputs into repetition segments and counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Binary,
    Density,
    CountHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub binary_threshold: f64,
    pub min_segment_frames: usize,
    pub min_gap_frames: usize,
    /// Minimum peak prominence as a fraction of the map's maximum.
    pub peak_min_prominence: f64,
    pub peak_min_distance_frames: usize,
    /// Density segments end where the map drops below this fraction of
    /// their peak height.
    pub boundary_floor: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            binary_threshold: 0.5,
            min_segment_frames: 5,
            min_gap_frames: 1,
            peak_min_prominence: 0.05,
            peak_min_distance_frames: 10,
            boundary_floor: 0.01,
        }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.binary_threshold > 0.0 && self.binary_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("binary threshold {}", self.binary_threshold)));
        }
        if !(0.0..1.0).contains(&self.boundary_floor) {
            return Err(Error::InvalidConfig(format!("boundary floor {}", self.boundary_floor)));
        }
        if !(self.peak_min_prominence >= 0.0) {
            return Err(Error::InvalidConfig(format!("peak prominence {}", self.peak_min_prominence)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub segments: Vec<Segment>,
    /// Peak height (density) or mean `1 - prob` (binary), one per segment.
    pub confidence: Vec<f64>,
    pub count: usize,
    pub source: PredictionSource,
}

impl SegmentPrediction {
    fn from_segments(segments: Vec<Segment>, confidence: Vec<f64>, source: PredictionSource) -> Self {
        Self { count: segments.len(), segments, confidence, source }
    }

    /// Count-head output: a count without segments.
    pub fn from_scalar(value: f64) -> Self {
        Self {
            segments: Vec::new(),
            confidence: Vec::new(),
            count: count_from_prediction(Prediction::Scalar(value)),
            source: PredictionSource::CountHead,
        }
    }
}

/// Maximal zero runs of a bit string, as half-open intervals.
fn zero_runs(bits: &[bool]) -> Vec<Segment> {
    let mut runs = Vec::new();
    let mut start = None;
    for (t, &one) in bits.iter().enumerate() {
        match (one, start) {
            (false, None) => start = Some(t),
            (true, Some(s)) => {
                runs.push(Segment::new(s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(Segment::new(s, bits.len()));
    }
    runs
}

/// Thresholds `probs` (1 = between repetitions) and returns the zero runs,
/// dropping runs shorter than `min_segment_frames` and then merging runs
/// separated by fewer than `min_gap_frames` frames.
pub fn segments_from_binary(probs: &[f64], params: &DecodeParams) -> SegmentPrediction {
    let bits: Vec<bool> = probs.iter().map(|&p| p >= params.binary_threshold).collect();
    let mut segments: Vec<Segment> = Vec::new();
    for run in zero_runs(&bits).into_iter().filter(|r| r.len() >= params.min_segment_frames) {
        match segments.last_mut() {
            Some(prev) if run.start - prev.end < params.min_gap_frames => prev.end = run.end,
            _ => segments.push(run),
        }
    }
    let confidence = segments
        .iter()
        .map(|s| probs[s.start..s.end].iter().map(|p| 1.0 - p).sum::<f64>() / s.len() as f64)
        .collect();
    SegmentPrediction::from_segments(segments, confidence, PredictionSource::Binary)
}

/// A local maximum; plateaus are reported once with their edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub left_edge: usize,
    pub right_edge: usize,
    pub height: f64,
}

/// Interior local maxima. Flat peaks are placed at the (lower) middle of the
/// plateau; the first and last samples are never peaks.
pub fn local_maxima(x: &[f64]) -> Vec<Peak> {
    let n = x.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    let mut i = 1;
    while i < n - 1 {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                let right_edge = ahead - 1;
                peaks.push(Peak { index: (i + right_edge) / 2, left_edge: i, right_edge, height: x[i] });
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

/// Height above the higher of the two bases reached before a taller sample
/// or the signal edge.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..=peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Keeps the tallest peaks first, suppressing any peak closer than `distance`.
fn filter_by_distance(peaks: Vec<Peak>, distance: usize) -> Vec<Peak> {
    if distance <= 1 {
        return peaks;
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[b].height.total_cmp(&peaks[a].height).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        for (j, other) in peaks.iter().enumerate() {
            if j != i && keep[j] && other.index.abs_diff(peaks[i].index) < distance {
                keep[j] = false;
            }
        }
    }
    peaks.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

/// Peaks surviving the distance and relative-prominence filters, in order.
pub fn find_peaks(density: &[f64], params: &DecodeParams) -> Vec<Peak> {
    let max = density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let min_prominence = params.peak_min_prominence * max;
    filter_by_distance(local_maxima(density), params.peak_min_distance_frames)
        .into_iter()
        .filter(|p| prominence(density, p.index) >= min_prominence)
        .collect()
}

/// Lowest frame strictly between two peaks, the first one on ties.
fn valley(density: &[f64], left: usize, right: usize) -> usize {
    (left + 1..right).min_by(|&a, &b| density[a].total_cmp(&density[b])).unwrap_or(right)
}

/// One segment per density peak. A segment grows outward from its peak
/// until the map drops below `boundary_floor` times the peak height, and
/// never past the valley separating it from a neighbouring peak. The valley
/// frame itself may only join the right-hand segment.
pub fn segments_from_density(density: &[f64], params: &DecodeParams) -> SegmentPrediction {
    let n = density.len();
    let peaks = find_peaks(density, params);
    let splits: Vec<usize> = peaks.windows(2).map(|w| valley(density, w[0].index, w[1].index)).collect();
    let mut segments = Vec::with_capacity(peaks.len());
    for (k, peak) in peaks.iter().enumerate() {
        let lo = if k > 0 { splits[k - 1] } else { 0 };
        let hi = splits.get(k).copied().unwrap_or(n);
        let floor = params.boundary_floor * peak.height;
        let mut start = peak.index;
        while start > lo && density[start - 1] >= floor {
            start -= 1;
        }
        let mut end = peak.index + 1;
        while end < hi && density[end] >= floor {
            end += 1;
        }
        segments.push(Segment::new(start, end));
    }
    let confidence = peaks.iter().map(|p| p.height).collect();
    SegmentPrediction::from_segments(segments, confidence, PredictionSource::Density)
}

pub enum Prediction<'a> {
    Segments(&'a SegmentPrediction),
    Scalar(f64),
}

/// Number of segments, or the scalar rounded half away from zero and clipped at 0.
pub fn count_from_prediction(pred: Prediction<'_>) -> usize {
    match pred {
        Prediction::Segments(p) => p.segments.len(),
        Prediction::Scalar(v) if v.is_finite() => v.round().max(0.0) as usize,
        Prediction::Scalar(_) => 0,
    }
}

/// Segment output file: the annotation layout plus source and confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFile {
    pub length: usize,
    pub segments: Vec<Segment>,
    pub confidence: Vec<f64>,
    pub count: usize,
    pub source: PredictionSource,
    #[serde(default)]
    pub exercise: String,
    #[serde(default)]
    pub subject: String,
}

impl SegmentFile {
    pub fn new(pred: &SegmentPrediction, length: usize, exercise: &str, subject: &str) -> Self {
        Self {
            length,
            segments: pred.segments.clone(),
            confidence: pred.confidence.clone(),
            count: pred.count,
            source: pred.source,
            exercise: exercise.to_string(),
            subject: subject.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(min_seg: usize, min_gap: usize) -> DecodeParams {
        DecodeParams { min_segment_frames: min_seg, min_gap_frames: min_gap, ..Default::default() }
    }

    #[test]
    fn binary_examples() {
        let probs = [0.9, 0.8, 0.1, 0.2, 0.3, 0.7, 0.95];
        let p = segments_from_binary(&probs, &params(1, 1));
        assert_eq!(p.segments, vec![Segment::new(2, 5)]);
        assert_eq!(p.count, 1);
        assert!((p.confidence[0] - 0.8).abs() < 1e-12);
        assert_eq!(segments_from_binary(&[0.9; 8], &params(1, 1)).count, 0);
    }

    #[test]
    fn binary_drop_then_merge() {
        // runs: [0,3) len 3, [4,5) len 1, [6,9) len 3
        let bits = [0, 0, 0, 1, 0, 1, 0, 0, 0, 1];
        let probs: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let p = segments_from_binary(&probs, &params(2, 1));
        assert_eq!(p.segments, vec![Segment::new(0, 3), Segment::new(6, 9)]);
        let p = segments_from_binary(&probs, &params(2, 4));
        assert_eq!(p.segments, vec![Segment::new(0, 9)]);
    }

    #[test]
    fn local_maxima_plateaus_and_edges() {
        let x = [3.0, 1.0, 2.0, 2.0, 1.0, 0.0, 5.0];
        let p = local_maxima(&x);
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].index, p[0].left_edge, p[0].right_edge), (2, 2, 3));
        assert!(local_maxima(&[1.0, 1.0, 1.0]).is_empty());
    }

    #[test]
    fn prominence_matches_hand_values() {
        let x = [0.0, 2.0, 1.0, 3.0, 0.5, 1.5, 0.0];
        assert_eq!(prominence(&x, 1), 1.0);
        assert_eq!(prominence(&x, 3), 3.0);
        assert_eq!(prominence(&x, 5), 1.0);
    }

    #[test]
    fn density_zero_and_single_bump() {
        assert_eq!(segments_from_density(&[0.0; 40], &DecodeParams::default()).count, 0);
        let bump: Vec<f64> = (0..40).map(|t| (-((t as f64 - 17.0) / 4.0).powi(2)).exp()).collect();
        let p = segments_from_density(&bump, &DecodeParams::default());
        assert_eq!(p.count, 1);
        // exp(-(d/4)^2) >= 0.01 for |d| <= 8.58
        assert_eq!(p.segments, vec![Segment::new(9, 26)]);
        assert_eq!(p.confidence, vec![1.0]);
    }

    #[test]
    fn density_neighbours_split_at_valley() {
        // touching bumps with peaks at 10 and 30 and the valley at 19
        let mut x = vec![0.0; 41];
        for t in 1..19 {
            x[t] = 1.0 - (t as f64 - 10.0).abs() / 10.0;
        }
        x[19] = 0.05;
        for t in 20..40 {
            x[t] = 1.0 - (t as f64 - 30.0).abs() / 11.0;
        }
        let p = segments_from_density(&x, &DecodeParams::default());
        assert_eq!(p.segments, vec![Segment::new(1, 19), Segment::new(19, 40)]);
        // a noisy shoulder does not stop the walk
        let mut y = vec![0.0; 40];
        for t in 5..35 {
            y[t] = 1.0 - (t as f64 - 20.0).abs() / 16.0;
        }
        y[12] -= 0.1;
        let p = segments_from_density(&y, &DecodeParams::default());
        assert_eq!(p.segments, vec![Segment::new(5, 35)]);
    }

    #[test]
    fn distance_filter_keeps_taller_peak() {
        let mut x = vec![0.0; 30];
        x[10] = 1.0;
        x[14] = 0.8;
        x[25] = 0.5;
        let p = find_peaks(&x, &DecodeParams { peak_min_distance_frames: 10, ..Default::default() });
        assert_eq!(p.iter().map(|p| p.index).collect::<Vec<_>>(), vec![10, 25]);
    }

    #[test]
    fn scalar_counts() {
        let three = SegmentPrediction::from_segments(
            vec![Segment::new(0, 2), Segment::new(3, 5), Segment::new(6, 9)],
            vec![1.0; 3],
            PredictionSource::Density,
        );
        assert_eq!(count_from_prediction(Prediction::Segments(&three)), 3);
        assert_eq!(count_from_prediction(Prediction::Scalar(4.5)), 5);
        assert_eq!(count_from_prediction(Prediction::Scalar(4.49)), 4);
        assert_eq!(count_from_prediction(Prediction::Scalar(-0.3)), 0);
        assert_eq!(SegmentPrediction::from_scalar(2.6).count, 3);
    }
}
