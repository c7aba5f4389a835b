//! Per-frame feature extraction: raw joints, joint angles, and both
//! concatenated, plus train-split standardization.

use std::path::Path;

use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonSequence;

const DEFAULT_ANGLES: &str = include_str!("../config/default_angles.json");

/// Bone vectors shorter than this are treated as degenerate.
pub const MIN_BONE_LENGTH: f64 = 1e-9;
/// Lower bound applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureVariant {
    Raw,
    Angles,
    Concat,
}

impl FeatureVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Angles => "angles",
            Self::Concat => "concat",
        }
    }
}

impl std::str::FromStr for FeatureVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "angles" => Ok(Self::Angles),
            "concat" => Ok(Self::Concat),
            _ => Err(Error::InvalidConfig(format!("unknown feature variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    /// `T x D`, one row per frame.
    pub values: Array2<f64>,
    pub variant: FeatureVariant,
    /// Frames in which at least one angle had a degenerate bone.
    pub degenerate_frames: Vec<usize>,
}

impl FeatureSequence {
    pub fn new(values: Array2<f64>, variant: FeatureVariant) -> Self {
        Self { values, variant, degenerate_frames: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// One angle feature. `Triplet` is the angle at `b` between `a-b` and `c-b`;
/// `Vertical` is the angle between the bone `a -> b` and the +y axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AngleDef {
    Triplet { a: usize, b: usize, c: usize },
    Vertical { a: usize, b: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleSpec {
    pub entries: Vec<AngleDef>,
}

impl Default for AngleSpec {
    /// 43 bilateral shoulder, elbow, wrist, hip, knee, ankle and trunk angles
    /// for the 25-joint Kinect skeleton.
    fn default() -> Self {
        serde_json::from_str(DEFAULT_ANGLES).expect("bundled angle spec is valid")
    }
}

impl AngleSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self, num_joints: usize) -> Result<()> {
        for entry in &self.entries {
            let (idx, distinct): (&[usize], bool) = match entry {
                AngleDef::Triplet { a, b, c } => (&[*a, *b, *c][..], a != b && b != c),
                AngleDef::Vertical { a, b } => (&[*a, *b][..], a != b),
            };
            if let Some(&index) = idx.iter().find(|&&i| i >= num_joints) {
                return Err(Error::InvalidJointIndex { index, joints: num_joints });
            }
            if !distinct {
                return Err(Error::InvalidConfig(format!("angle {entry:?} repeats a joint")));
            }
        }
        Ok(())
    }
}

/// Row `t` is frame `t` flattened joint-major (`x, y, z` per joint).
pub fn raw_features(seq: &SkeletonSequence) -> FeatureSequence {
    let values = Array2::from_shape_vec((seq.num_frames(), seq.num_joints() * 3), seq.coords().to_vec())
        .expect("coords are T x J x 3");
    FeatureSequence::new(values, FeatureVariant::Raw)
}

fn sub(p: [f64; 3], q: [f64; 3]) -> [f64; 3] {
    [p[0] - q[0], p[1] - q[1], p[2] - q[2]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Angle in `[0, pi]` between two vectors; `None` if either is degenerate.
pub fn vector_angle(u: [f64; 3], v: [f64; 3]) -> Option<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu < MIN_BONE_LENGTH || nv < MIN_BONE_LENGTH {
        return None;
    }
    let cos = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv);
    Some(cos.clamp(-1.0, 1.0).acos())
}

/// Evaluates every angle of `spec` on every frame. Degenerate bones yield 0
/// and flag the frame.
pub fn angle_features(seq: &SkeletonSequence, spec: &AngleSpec) -> Result<FeatureSequence> {
    spec.validate(seq.num_joints())?;
    let (t_len, d) = (seq.num_frames(), spec.len());
    let mut values = Array2::zeros((t_len, d));
    let mut degenerate_frames = Vec::new();
    for t in 0..t_len {
        let mut flagged = false;
        for (k, entry) in spec.entries.iter().enumerate() {
            let angle = match *entry {
                AngleDef::Triplet { a, b, c } => {
                    let vertex = seq.joint(t, b);
                    vector_angle(sub(seq.joint(t, a), vertex), sub(seq.joint(t, c), vertex))
                }
                AngleDef::Vertical { a, b } => {
                    vector_angle(sub(seq.joint(t, b), seq.joint(t, a)), [0.0, 1.0, 0.0])
                }
            };
            values[[t, k]] = angle.unwrap_or_else(|| {
                flagged = true;
                0.0
            });
        }
        if flagged {
            degenerate_frames.push(t);
        }
    }
    Ok(FeatureSequence { values, variant: FeatureVariant::Angles, degenerate_frames })
}

/// Raw columns first, then angle columns.
pub fn concat_features(raw: &FeatureSequence, angles: &FeatureSequence) -> Result<FeatureSequence> {
    if raw.len() != angles.len() {
        return Err(Error::LengthMismatch { expected: raw.len(), actual: angles.len() });
    }
    let values = concatenate(Axis(1), &[raw.values.view(), angles.values.view()])
        .expect("row counts checked");
    let mut degenerate_frames = raw.degenerate_frames.clone();
    degenerate_frames.extend(&angles.degenerate_frames);
    degenerate_frames.sort_unstable();
    degenerate_frames.dedup();
    Ok(FeatureSequence { values, variant: FeatureVariant::Concat, degenerate_frames })
}

pub fn extract(seq: &SkeletonSequence, variant: FeatureVariant, spec: &AngleSpec) -> Result<FeatureSequence> {
    match variant {
        FeatureVariant::Raw => Ok(raw_features(seq)),
        FeatureVariant::Angles => angle_features(seq, spec),
        FeatureVariant::Concat => concat_features(&raw_features(seq), &angle_features(seq, spec)?),
    }
}

/// Per-dimension mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, fs: &FeatureSequence) -> Result<FeatureSequence> {
        apply_standardize(self, fs)
    }
}

/// Statistics over all frames of the training sequences pooled together.
pub fn fit_standardize<'a>(train: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<StandardizationStats> {
    let mut iter = train.into_iter().peekable();
    let dim = iter.peek().ok_or(Error::EmptyInput("standardization training set"))?.dim();
    let mut sum = Array1::<f64>::zeros(dim);
    let mut frames = 0usize;
    let seqs: Vec<&FeatureSequence> = iter.collect();
    for fs in &seqs {
        if fs.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: fs.dim() });
        }
        sum += &fs.values.sum_axis(Axis(0));
        frames += fs.len();
    }
    if frames == 0 {
        return Err(Error::EmptyInput("standardization training frames"));
    }
    let mean = sum / frames as f64;
    let mut sq = Array1::<f64>::zeros(dim);
    for fs in &seqs {
        for row in fs.values.rows() {
            let centred = &row - &mean;
            sq += &(&centred * &centred);
        }
    }
    let std = (sq / frames as f64).mapv(|v| v.sqrt().max(STD_FLOOR));
    Ok(StandardizationStats { mean: mean.to_vec(), std: std.to_vec() })
}

pub fn apply_standardize(stats: &StandardizationStats, fs: &FeatureSequence) -> Result<FeatureSequence> {
    if fs.dim() != stats.dim() {
        return Err(Error::DimensionMismatch { expected: stats.dim(), actual: fs.dim() });
    }
    let mean = Array1::from(stats.mean.clone());
    let std = Array1::from(stats.std.clone());
    let values = (&fs.values - &mean) / &std;
    Ok(FeatureSequence { values, variant: fs.variant, degenerate_frames: fs.degenerate_frames.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::SequenceMeta;
    use std::f64::consts::PI;

    fn seq_from(frames: &[Vec<[f64; 3]>]) -> SkeletonSequence {
        let j = frames[0].len();
        let coords = frames.iter().flatten().flat_map(|p| p.iter().copied()).collect();
        SkeletonSequence::new(coords, j, SequenceMeta::default()).unwrap()
    }

    #[test]
    fn default_spec_has_43_entries() {
        let spec = AngleSpec::default();
        assert_eq!(spec.len(), 43);
        spec.validate(25).unwrap();
    }

    #[test]
    fn raw_layout() {
        let mut frame = vec![[0.0; 3]; 25];
        frame[0] = [1.0, 2.0, 3.0];
        let seq = seq_from(&[frame.clone(), vec![[0.0; 3]; 25], vec![[0.0; 3]; 25]]);
        let f = raw_features(&seq);
        assert_eq!(f.values.dim(), (3, 75));
        assert_eq!(f.values.row(0).to_vec()[..4], [1.0, 2.0, 3.0, 0.0]);
        assert!(f.values.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn straight_and_right_angles() {
        let straight = vec![[-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let right = vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let seq = seq_from(&[straight, right]);
        let spec = AngleSpec { entries: vec![AngleDef::Triplet { a: 0, b: 1, c: 2 }, AngleDef::Vertical { a: 1, b: 2 }] };
        let f = angle_features(&seq, &spec).unwrap();
        assert!((f.values[[0, 0]] - PI).abs() < 1e-12);
        assert!((f.values[[1, 0]] - PI / 2.0).abs() < 1e-12);
        assert!((f.values[[0, 1]] - PI / 2.0).abs() < 1e-12);
        assert!(f.values[[1, 1]].abs() < 1e-12);
        assert!(f.degenerate_frames.is_empty());
    }

    #[test]
    fn degenerate_bone_flags_frame() {
        let ok = vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let bad = vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let seq = seq_from(&[ok, bad]);
        let spec = AngleSpec { entries: vec![AngleDef::Triplet { a: 0, b: 1, c: 2 }] };
        let f = angle_features(&seq, &spec).unwrap();
        assert_eq!(f.values[[1, 0]], 0.0);
        assert_eq!(f.degenerate_frames, vec![1]);
    }

    #[test]
    fn concat_dims_and_mismatch() {
        let raw = FeatureSequence::new(Array2::ones((4, 75)), FeatureVariant::Raw);
        let ang = FeatureSequence::new(Array2::zeros((4, 43)), FeatureVariant::Angles);
        assert_eq!(concat_features(&raw, &ang).unwrap().dim(), 118);
        let empty = FeatureSequence::new(Array2::zeros((4, 0)), FeatureVariant::Angles);
        assert_eq!(concat_features(&raw, &empty).unwrap().values, raw.values);
        let short = FeatureSequence::new(Array2::zeros((3, 43)), FeatureVariant::Angles);
        assert!(matches!(concat_features(&raw, &short), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn standardize_constant_column_and_foreign_stats() {
        let a = FeatureSequence::new(ndarray::array![[1.0, 5.0], [3.0, 5.0]], FeatureVariant::Raw);
        let stats = fit_standardize([&a]).unwrap();
        let out = stats.apply(&a).unwrap();
        assert!(out.values.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(out.values.column(0).to_vec(), vec![-1.0, 1.0]);
        // a test sequence is scaled with the training statistics, not its own
        let test = FeatureSequence::new(ndarray::array![[11.0, 5.0], [13.0, 5.0]], FeatureVariant::Raw);
        assert_eq!(stats.apply(&test).unwrap().values.column(0).to_vec(), vec![9.0, 11.0]);
        assert!(matches!(fit_standardize(std::iter::empty()), Err(Error::EmptyInput(_))));
    }
}
