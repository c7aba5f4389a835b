//! Synthetic skeleton recordings with known repetition boundaries.
//!
//! Each recording is a 25-joint rest pose animated by one exercise. A
//! repetition is a half sine of the exercise's joint rotations, so the pose
//! leaves rest at the segment start, peaks mid-segment and returns at the
//! end. Repetitions are separated by rest gaps, with one gap before the first
//! and one after the last.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use crate::error::{Error, Result};
use crate::skeleton::joint::*;
use crate::skeleton::{Population, RepetitionAnnotation, Segment, SequenceMeta, SkeletonSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthExercise {
    ArmRaise,
    ElbowFlexion,
    Squat,
    TrunkTilt,
}

impl SynthExercise {
    pub const ALL: [SynthExercise; 4] =
        [SynthExercise::ArmRaise, SynthExercise::ElbowFlexion, SynthExercise::Squat, SynthExercise::TrunkTilt];

    pub fn as_str(self) -> &'static str {
        match self {
            SynthExercise::ArmRaise => "arm_raise",
            SynthExercise::ElbowFlexion => "elbow_flexion",
            SynthExercise::Squat => "squat",
            SynthExercise::TrunkTilt => "trunk_tilt",
        }
    }

    /// Peak rotation in radians.
    fn amplitude(self) -> f64 {
        match self {
            SynthExercise::ArmRaise => 150f64.to_radians(),
            SynthExercise::ElbowFlexion => 120f64.to_radians(),
            SynthExercise::Squat => 80f64.to_radians(),
            SynthExercise::TrunkTilt => 35f64.to_radians(),
        }
    }

    /// Rotations applied child first, each scaled by the current angle.
    fn rotations(self) -> Vec<Rotation> {
        const X: [f64; 3] = [1.0, 0.0, 0.0];
        const Z: [f64; 3] = [0.0, 0.0, 1.0];
        match self {
            SynthExercise::ArmRaise => vec![
                Rotation { pivot: SHOULDER_LEFT, moving: &LEFT_ARM, axis: Z, scale: 1.0 },
                Rotation { pivot: SHOULDER_RIGHT, moving: &RIGHT_ARM, axis: Z, scale: -1.0 },
            ],
            SynthExercise::ElbowFlexion => vec![
                Rotation { pivot: ELBOW_LEFT, moving: &LEFT_FOREARM, axis: X, scale: 1.0 },
                Rotation { pivot: ELBOW_RIGHT, moving: &RIGHT_FOREARM, axis: X, scale: 1.0 },
                Rotation { pivot: SHOULDER_LEFT, moving: &LEFT_ARM, axis: X, scale: 0.15 },
                Rotation { pivot: SHOULDER_RIGHT, moving: &RIGHT_ARM, axis: X, scale: 0.15 },
            ],
            SynthExercise::Squat => vec![
                Rotation { pivot: KNEE_LEFT, moving: &LEFT_SHANK, axis: X, scale: -1.6 },
                Rotation { pivot: KNEE_RIGHT, moving: &RIGHT_SHANK, axis: X, scale: -1.6 },
                Rotation { pivot: HIP_LEFT, moving: &LEFT_THIGH, axis: X, scale: 1.0 },
                Rotation { pivot: HIP_RIGHT, moving: &RIGHT_THIGH, axis: X, scale: 1.0 },
                Rotation { pivot: SPINE_BASE, moving: &UPPER_BODY, axis: X, scale: -0.5 },
            ],
            SynthExercise::TrunkTilt => {
                vec![Rotation { pivot: SPINE_BASE, moving: &UPPER_BODY, axis: Z, scale: 1.0 }]
            }
        }
    }

    /// Whether the pose is shifted so the left ankle stays planted.
    fn grounded(self) -> bool {
        self == SynthExercise::Squat
    }
}

const LEFT_ARM: [usize; 5] = [ELBOW_LEFT, WRIST_LEFT, HAND_LEFT, HAND_TIP_LEFT, THUMB_LEFT];
const RIGHT_ARM: [usize; 5] = [ELBOW_RIGHT, WRIST_RIGHT, HAND_RIGHT, HAND_TIP_RIGHT, THUMB_RIGHT];
const LEFT_FOREARM: [usize; 4] = [WRIST_LEFT, HAND_LEFT, HAND_TIP_LEFT, THUMB_LEFT];
const RIGHT_FOREARM: [usize; 4] = [WRIST_RIGHT, HAND_RIGHT, HAND_TIP_RIGHT, THUMB_RIGHT];
const LEFT_THIGH: [usize; 3] = [KNEE_LEFT, ANKLE_LEFT, FOOT_LEFT];
const RIGHT_THIGH: [usize; 3] = [KNEE_RIGHT, ANKLE_RIGHT, FOOT_RIGHT];
const LEFT_SHANK: [usize; 2] = [ANKLE_LEFT, FOOT_LEFT];
const RIGHT_SHANK: [usize; 2] = [ANKLE_RIGHT, FOOT_RIGHT];
const UPPER_BODY: [usize; 16] = [
    SPINE_MID,
    SPINE_SHOULDER,
    NECK,
    HEAD,
    SHOULDER_LEFT,
    ELBOW_LEFT,
    WRIST_LEFT,
    HAND_LEFT,
    HAND_TIP_LEFT,
    THUMB_LEFT,
    SHOULDER_RIGHT,
    ELBOW_RIGHT,
    WRIST_RIGHT,
    HAND_RIGHT,
    HAND_TIP_RIGHT,
    THUMB_RIGHT,
];

struct Rotation {
    pivot: usize,
    moving: &'static [usize],
    axis: [f64; 3],
    scale: f64,
}

/// Rest pose in metres: x towards the subject's left, y up, z towards the
/// camera's far side.
fn rest_pose() -> [[f64; 3]; 25] {
    let mut p = [[0.0; 3]; 25];
    p[SPINE_BASE] = [0.0, 1.00, 0.0];
    p[SPINE_MID] = [0.0, 1.25, 0.0];
    p[SPINE_SHOULDER] = [0.0, 1.45, 0.0];
    p[NECK] = [0.0, 1.52, 0.0];
    p[HEAD] = [0.0, 1.65, 0.02];
    for (sign, sh, el, wr, ha, tip, th, hip, kn, an, ft) in [
        (1.0, SHOULDER_LEFT, ELBOW_LEFT, WRIST_LEFT, HAND_LEFT, HAND_TIP_LEFT, THUMB_LEFT, HIP_LEFT, KNEE_LEFT, ANKLE_LEFT, FOOT_LEFT),
        (
            -1.0,
            SHOULDER_RIGHT,
            ELBOW_RIGHT,
            WRIST_RIGHT,
            HAND_RIGHT,
            HAND_TIP_RIGHT,
            THUMB_RIGHT,
            HIP_RIGHT,
            KNEE_RIGHT,
            ANKLE_RIGHT,
            FOOT_RIGHT,
        ),
    ] {
        p[sh] = [sign * 0.18, 1.42, 0.0];
        p[el] = [sign * 0.20, 1.14, 0.0];
        p[wr] = [sign * 0.21, 0.90, 0.0];
        p[ha] = [sign * 0.21, 0.82, 0.0];
        p[tip] = [sign * 0.21, 0.74, 0.0];
        p[th] = [sign * 0.19, 0.80, -0.03];
        p[hip] = [sign * 0.09, 0.98, 0.0];
        p[kn] = [sign * 0.10, 0.55, 0.0];
        p[an] = [sign * 0.10, 0.10, 0.0];
        p[ft] = [sign * 0.10, 0.05, -0.10];
    }
    p
}

/// Rotates `p` about the line through `c` along unit `k` (Rodrigues).
fn rotate_about(p: [f64; 3], c: [f64; 3], k: [f64; 3], theta: f64) -> [f64; 3] {
    let v = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let (s, co) = theta.sin_cos();
    let cross = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
    let dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = c[i] + v[i] * co + cross[i] * s + k[i] * dot * (1.0 - co);
    }
    out
}

fn pose(exercise: SynthExercise, angle: f64) -> [[f64; 3]; 25] {
    let rest = rest_pose();
    let mut p = rest;
    if angle == 0.0 {
        return p;
    }
    for rot in exercise.rotations() {
        let c = p[rot.pivot];
        for &j in rot.moving {
            p[j] = rotate_about(p[j], c, rot.axis, rot.scale * angle);
        }
    }
    if exercise.grounded() {
        let d: Vec<f64> = (0..3).map(|i| p[ANKLE_LEFT][i] - rest[ANKLE_LEFT][i]).collect();
        for q in p.iter_mut() {
            for i in 0..3 {
                q[i] -= d[i];
            }
        }
    }
    p
}

/// Generator settings. Durations are `(mean, jitter)` pairs in frames, drawn
/// uniformly from `[mean - jitter, mean + jitter]` and rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_sequences: usize,
    /// Inclusive repetition count range.
    pub reps_range: (usize, usize),
    pub rep_duration_frames: (f64, f64),
    pub gap_frames: (f64, f64),
    /// Gaussian coordinate noise in metres.
    pub joint_noise_std: f64,
    /// Relative per-repetition amplitude jitter.
    pub amplitude_variation: f64,
    pub frame_rate: f64,
    pub n_subjects: usize,
    pub patient_fraction: f64,
    pub exercises: Vec<SynthExercise>,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_sequences: 100,
            reps_range: (3, 12),
            rep_duration_frames: (36.0, 10.0),
            gap_frames: (12.0, 6.0),
            joint_noise_std: 0.01,
            amplitude_variation: 0.2,
            frame_rate: 30.0,
            n_subjects: 20,
            patient_fraction: 0.5,
            exercises: SynthExercise::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let (lo, hi) = self.reps_range;
        if lo == 0 || lo > hi {
            return bad(format!("reps_range ({lo}, {hi})"));
        }
        let (rep, rep_j) = self.rep_duration_frames;
        if !(rep_j >= 0.0) || !(rep - rep_j >= 2.0) {
            return bad(format!("rep_duration_frames ({rep}, {rep_j}) allows reps shorter than 2 frames"));
        }
        let (gap, gap_j) = self.gap_frames;
        if !(gap_j >= 0.0) || !(gap - gap_j >= 0.0) {
            return bad(format!("gap_frames ({gap}, {gap_j}) allows negative gaps"));
        }
        if !(0.0..1.0).contains(&self.amplitude_variation) {
            return bad(format!("amplitude_variation {} outside [0, 1)", self.amplitude_variation));
        }
        if !(self.joint_noise_std >= 0.0) || !(self.frame_rate > 0.0) {
            return bad("joint_noise_std must be >= 0 and frame_rate > 0".into());
        }
        if self.n_subjects == 0 || self.exercises.is_empty() {
            return bad("need at least one subject and one exercise".into());
        }
        if !(0.0..=1.0).contains(&self.patient_fraction) {
            return bad(format!("patient_fraction {}", self.patient_fraction));
        }
        Ok(())
    }
}

struct Subject {
    id: String,
    population: Population,
    scale: f64,
    offset: [f64; 3],
    yaw: f64,
    speed: f64,
    reach: f64,
}

fn subject(params: &SynthParams, s: usize) -> Subject {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1 << 40 | s as u64);
    let patient = rng.random_bool(params.patient_fraction);
    Subject {
        id: format!("subject_{s:03}"),
        population: if patient { Population::Patient } else { Population::Healthy },
        scale: rng.random_range(0.9..1.1),
        offset: [rng.random_range(-0.3..0.3), rng.random_range(-0.1..0.1), rng.random_range(2.0..3.0)],
        yaw: rng.random_range(-15f64..15.0).to_radians(),
        speed: if patient { 1.2 } else { 1.0 },
        reach: if patient { 0.8 } else { 1.0 },
    }
}

fn jittered(rng: &mut ChaCha8Rng, (mean, jitter): (f64, f64)) -> f64 {
    if jitter > 0.0 {
        rng.random_range(mean - jitter..=mean + jitter)
    } else {
        mean
    }
}

/// The `index`-th recording. Independent of `n_sequences`, so smaller runs
/// are prefixes of larger ones.
pub fn synth_sample(params: &SynthParams, index: usize) -> Result<Sample> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(index as u64 + 1);
    let exercise = params.exercises[index % params.exercises.len()];
    let subj = subject(params, rng.random_range(0..params.n_subjects));
    let reps = rng.random_range(params.reps_range.0..=params.reps_range.1);

    let mut angles = Vec::new();
    let mut segments = Vec::with_capacity(reps);
    let gap = |rng: &mut ChaCha8Rng| jittered(rng, params.gap_frames).round() as usize;
    angles.resize(gap(&mut rng), 0.0);
    for r in 0..reps {
        let (mean, jitter) = params.rep_duration_frames;
        let len = (jittered(&mut rng, (mean * subj.speed, jitter)).round() as usize).max(2);
        let amp = exercise.amplitude() * subj.reach * jittered(&mut rng, (1.0, params.amplitude_variation));
        let start = angles.len();
        angles.extend((0..len).map(|t| amp * (PI * (t as f64 + 0.5) / len as f64).sin()));
        segments.push(Segment::new(start, start + len));
        if r + 1 < reps {
            angles.resize(angles.len() + gap(&mut rng), 0.0);
        }
    }
    angles.resize(angles.len() + gap(&mut rng), 0.0);

    let noise = Normal::new(0.0, params.joint_noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let (sy, cy) = subj.yaw.sin_cos();
    let mut coords = Vec::with_capacity(angles.len() * 75);
    for &a in &angles {
        for p in pose(exercise, a) {
            let (x, y, z) = (p[0] * subj.scale, p[1] * subj.scale, p[2] * subj.scale);
            let rotated = [cy * x + sy * z, y, -sy * x + cy * z];
            for (r, o) in rotated.iter().zip(subj.offset) {
                coords.push(r + o + noise.sample(&mut rng));
            }
        }
    }
    let meta = SequenceMeta {
        frame_rate: params.frame_rate,
        subject_id: subj.id.clone(),
        exercise_id: exercise.as_str().to_string(),
        dataset_id: "synthetic".to_string(),
        population: subj.population,
    };
    let skeleton = SkeletonSequence::new(coords, 25, meta)?;
    let mut annotation = RepetitionAnnotation::new(segments, angles.len())?;
    annotation.exercise = exercise.as_str().to_string();
    annotation.subject = subj.id;
    Sample::new(format!("synth_{index:04}"), skeleton, annotation)
}

pub fn synth_generate(params: &SynthParams) -> Result<Vec<Sample>> {
    (0..params.n_sequences).map(|i| synth_sample(params, i)).collect()
}
