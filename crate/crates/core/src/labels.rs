//! Training targets derived from a repetition annotation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::RepetitionAnnotation;

pub const DEFAULT_SIGMA_FRACTION: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBundle {
    pub binary: Vec<u8>,
    pub density: Vec<f64>,
    pub count: usize,
}

impl LabelBundle {
    pub fn from_annotation(ann: &RepetitionAnnotation, sigma_fraction: f64) -> Result<Self> {
        Ok(Self {
            binary: binary_labels(ann),
            density: density_map(ann, sigma_fraction)?,
            count: count_label(ann),
        })
    }

    pub fn len(&self) -> usize {
        self.binary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.binary.is_empty()
    }
}

/// 0 inside any repetition, 1 elsewhere.
pub fn binary_labels(ann: &RepetitionAnnotation) -> Vec<u8> {
    let mut out = vec![1u8; ann.length];
    for s in &ann.segments {
        out[s.start..s.end].fill(0);
    }
    out
}

/// One unit of truncated Gaussian mass per repetition, centred on the
/// segment midpoint with standard deviation `sigma_fraction * len`.
pub fn density_map(ann: &RepetitionAnnotation, sigma_fraction: f64) -> Result<Vec<f64>> {
    if !(sigma_fraction > 0.0 && sigma_fraction.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma fraction {sigma_fraction}")));
    }
    let mut out = vec![0.0; ann.length];
    for s in &ann.segments {
        if s.is_empty() {
            return Err(Error::ZeroLengthSegment((s.start, s.end)));
        }
        let mu = s.midpoint();
        let sigma = sigma_fraction * s.len() as f64;
        let slot = &mut out[s.start..s.end];
        for (k, v) in slot.iter_mut().enumerate() {
            let z = ((s.start + k) as f64 - mu) / sigma;
            *v = (-0.5 * z * z).exp();
        }
        let mass: f64 = slot.iter().sum();
        slot.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(out)
}

pub fn count_label(ann: &RepetitionAnnotation) -> usize {
    ann.count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::Segment;

    fn ann(segs: &[(usize, usize)], len: usize) -> RepetitionAnnotation {
        RepetitionAnnotation::new(segs.iter().map(|&s| s.into()).collect(), len).unwrap()
    }

    #[test]
    fn binary_examples() {
        assert_eq!(binary_labels(&ann(&[(2, 5)], 7)), vec![1, 1, 0, 0, 0, 1, 1]);
        assert_eq!(binary_labels(&ann(&[], 4)), vec![1, 1, 1, 1]);
        assert_eq!(binary_labels(&ann(&[(0, 3), (3, 6)], 6)), vec![0; 6]);
    }

    #[test]
    fn density_full_span_is_unimodal() {
        for t in [5usize, 6, 31, 60] {
            let d = density_map(&ann(&[(0, t)], t), DEFAULT_SIGMA_FRACTION).unwrap();
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let max = d.iter().cloned().fold(f64::MIN, f64::max);
            let argmax = d.iter().position(|&v| v == max).unwrap();
            assert_eq!(argmax, (t - 1) / 2);
            let rises = d.windows(2).take_while(|w| w[1] >= w[0]).count();
            assert!(d[rises..].windows(2).all(|w| w[1] <= w[0]), "not unimodal for T={t}");
        }
    }

    #[test]
    fn density_mass_additive() {
        let d = density_map(&ann(&[(3, 20), (30, 41)], 50), DEFAULT_SIGMA_FRACTION).unwrap();
        assert!((d.iter().sum::<f64>() - 2.0).abs() < 1e-6);
        assert!(d[..3].iter().chain(&d[20..30]).chain(&d[41..]).all(|&v| v == 0.0));
    }

    #[test]
    fn zero_length_segment_rejected() {
        let bad = RepetitionAnnotation { length: 10, segments: vec![Segment::new(4, 4)], exercise: String::new(), subject: String::new() };
        assert!(matches!(density_map(&bad, 0.2), Err(Error::ZeroLengthSegment(_))));
        assert!(density_map(&ann(&[], 3), 0.0).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(count_label(&ann(&[], 10)), 0);
        assert_eq!(count_label(&ann(&[(0, 5)], 10)), 1);
        let ten: Vec<_> = (0..10).map(|i| (i * 10, i * 10 + 8)).collect();
        assert_eq!(count_label(&ann(&ten, 100)), 10);
    }
}
