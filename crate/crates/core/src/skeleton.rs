//! Skeleton sequences, repetition annotations and the on-disk interchange
//! format.
//!
//! A sample is stored as three files sharing a stem:
//!
//! * `<stem>.csv`: one row per frame, header
//!   `frame,<joint0>_x,<joint0>_y,<joint0>_z,...`.
//! * `<stem>.meta.json`: [`SequenceMeta`] (frame rate, subject, exercise,
//!   dataset, population tag). Optional; defaults are used when missing.
//! * `<stem>.ann.json`: `{"length": T, "segments": [[start, end], ...],
//!   "exercise": "...", "subject": "..."}` with half-open segments.
//!
//! Converting a dataset's native files into this layout is a preprocessing
//! step outside this crate (see the README for recipes).

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};

/// Joint names of the 25-joint Kinect v2 skeleton, in stream order.
pub const KINECT_JOINTS: [&str; 25] = [
    "spine_base",
    "spine_mid",
    "neck",
    "head",
    "shoulder_left",
    "elbow_left",
    "wrist_left",
    "hand_left",
    "shoulder_right",
    "elbow_right",
    "wrist_right",
    "hand_right",
    "hip_left",
    "knee_left",
    "ankle_left",
    "foot_left",
    "hip_right",
    "knee_right",
    "ankle_right",
    "foot_right",
    "spine_shoulder",
    "hand_tip_left",
    "thumb_left",
    "hand_tip_right",
    "thumb_right",
];

/// Indices into [`KINECT_JOINTS`].
pub mod joint {
    pub const SPINE_BASE: usize = 0;
    pub const SPINE_MID: usize = 1;
    pub const NECK: usize = 2;
    pub const HEAD: usize = 3;
    pub const SHOULDER_LEFT: usize = 4;
    pub const ELBOW_LEFT: usize = 5;
    pub const WRIST_LEFT: usize = 6;
    pub const HAND_LEFT: usize = 7;
    pub const SHOULDER_RIGHT: usize = 8;
    pub const ELBOW_RIGHT: usize = 9;
    pub const WRIST_RIGHT: usize = 10;
    pub const HAND_RIGHT: usize = 11;
    pub const HIP_LEFT: usize = 12;
    pub const KNEE_LEFT: usize = 13;
    pub const ANKLE_LEFT: usize = 14;
    pub const FOOT_LEFT: usize = 15;
    pub const HIP_RIGHT: usize = 16;
    pub const KNEE_RIGHT: usize = 17;
    pub const ANKLE_RIGHT: usize = 18;
    pub const FOOT_RIGHT: usize = 19;
    pub const SPINE_SHOULDER: usize = 20;
    pub const HAND_TIP_LEFT: usize = 21;
    pub const THUMB_LEFT: usize = 22;
    pub const HAND_TIP_RIGHT: usize = 23;
    pub const THUMB_RIGHT: usize = 24;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Healthy,
    Patient,
    #[default]
    Unknown,
}

impl Population {
    pub fn as_str(self) -> &'static str {
        match self {
            Population::Healthy => "healthy",
            Population::Patient => "patient",
            Population::Unknown => "unknown",
        }
    }
}

/// Sidecar metadata of a skeleton recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceMeta {
    pub frame_rate: f64,
    pub subject_id: String,
    pub exercise_id: String,
    pub dataset_id: String,
    pub population: Population,
}

impl Default for SequenceMeta {
    fn default() -> Self {
        Self {
            frame_rate: 30.0,
            subject_id: String::new(),
            exercise_id: String::new(),
            dataset_id: String::new(),
            population: Population::Unknown,
        }
    }
}

/// `T` frames of `J` joints with 3D coordinates, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    coords: Vec<f64>,
    num_frames: usize,
    num_joints: usize,
    joint_names: Vec<String>,
    pub meta: SequenceMeta,
}

impl SkeletonSequence {
    /// Builds a sequence from frame-major coordinates (`frame, joint, xyz`).
    pub fn new(coords: Vec<f64>, num_joints: usize, meta: SequenceMeta) -> Result<Self> {
        let names = default_joint_names(num_joints);
        Self::with_joint_names(coords, names, meta)
    }

    pub fn with_joint_names(
        coords: Vec<f64>,
        joint_names: Vec<String>,
        meta: SequenceMeta,
    ) -> Result<Self> {
        let num_joints = joint_names.len();
        if num_joints == 0 {
            return Err(Error::InconsistentJointCount("no joints".into()));
        }
        if !coords.len().is_multiple_of(num_joints * 3) {
            return Err(Error::InconsistentJointCount(format!(
                "{} coordinates is not a multiple of {} joints x 3",
                coords.len(),
                num_joints
            )));
        }
        let num_frames = coords.len() / (num_joints * 3);
        if num_frames < 2 {
            return Err(Error::EmptySequence(num_frames));
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedRow {
                row: pos / (num_joints * 3),
                reason: "non-finite coordinate".into(),
            });
        }
        if !(meta.frame_rate.is_finite() && meta.frame_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("frame rate {}", meta.frame_rate)));
        }
        Ok(Self { coords, num_frames, num_joints, joint_names, meta })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_joints(&self) -> usize {
        self.num_joints
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    /// Flattened coordinates of frame `t` (length `J*3`).
    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.num_joints * 3;
        &self.coords[t * w..(t + 1) * w]
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let f = self.frame(t);
        [f[3 * j], f[3 * j + 1], f[3 * j + 2]]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.num_joints * 3)
    }

    /// Returns a copy with every coordinate mapped through `f`.
    pub fn map_coords(&self, mut f: impl FnMut(usize, usize, [f64; 3]) -> [f64; 3]) -> Result<Self> {
        let mut coords = self.coords.clone();
        for t in 0..self.num_frames {
            for j in 0..self.num_joints {
                let i = (t * self.num_joints + j) * 3;
                let p = f(t, j, [coords[i], coords[i + 1], coords[i + 2]]);
                coords[i..i + 3].copy_from_slice(&p);
            }
        }
        Self::with_joint_names(coords, self.joint_names.clone(), self.meta.clone())
    }
}

fn default_joint_names(num_joints: usize) -> Vec<String> {
    if num_joints == KINECT_JOINTS.len() {
        KINECT_JOINTS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..num_joints).map(|j| format!("joint{j}")).collect()
    }
}

/// Parses the frame CSV. Metadata comes from the sidecar and is passed in.
pub fn parse_skeleton(reader: impl Read, meta: SequenceMeta) -> Result<SkeletonSequence> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("frame") {
        return Err(Error::MalformedRow { row: 0, reason: "first header column must be `frame`".into() });
    }
    let cols = header.len() - 1;
    if cols == 0 || cols % 3 != 0 {
        return Err(Error::InconsistentJointCount(format!(
            "header has {cols} coordinate columns, not a multiple of 3"
        )));
    }
    let mut joint_names = Vec::with_capacity(cols / 3);
    for j in 0..cols / 3 {
        let mut name = None;
        for (k, axis) in ["_x", "_y", "_z"].iter().enumerate() {
            let col = &header[1 + 3 * j + k];
            let stem = col.strip_suffix(axis).ok_or_else(|| Error::MalformedRow {
                row: 0,
                reason: format!("column `{col}` should end in `{axis}`"),
            })?;
            match name {
                None => name = Some(stem.to_string()),
                Some(ref n) if n == stem => {}
                Some(ref n) => {
                    return Err(Error::MalformedRow {
                        row: 0,
                        reason: format!("column `{col}` does not belong to joint `{n}`"),
                    })
                }
            }
        }
        joint_names.push(name.unwrap_or_default());
    }

    let mut coords = Vec::new();
    let mut last_frame: Option<i64> = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::InconsistentJointCount(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }
        let frame: i64 = record[0].parse().map_err(|_| Error::MalformedRow {
            row,
            reason: format!("frame index `{}` is not an integer", &record[0]),
        })?;
        if last_frame.is_some_and(|prev| frame <= prev) {
            return Err(Error::MalformedRow { row, reason: "frame indices must increase".into() });
        }
        last_frame = Some(frame);
        for cell in record.iter().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::MalformedRow {
                row,
                reason: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow { row, reason: format!("`{cell}` is not finite") });
            }
            coords.push(v);
        }
    }
    SkeletonSequence::with_joint_names(coords, joint_names, meta)
}

/// Writes the frame CSV. Values use shortest round-trip formatting.
pub fn write_skeleton(seq: &SkeletonSequence, mut writer: impl Write) -> Result<()> {
    let mut line = String::from("frame");
    for name in seq.joint_names() {
        write!(line, ",{name}_x,{name}_y,{name}_z").unwrap();
    }
    line.push('\n');
    for (t, frame) in seq.frames().enumerate() {
        write!(line, "{t}").unwrap();
        for v in frame {
            write!(line, ",{v:?}").unwrap();
        }
        line.push('\n');
    }
    writer.write_all(line.as_bytes()).map_err(|e| Error::io("<writer>", e))
}

/// A half-open frame interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Frame at the centre, `(start + end - 1) / 2`.
    pub fn midpoint(&self) -> f64 {
        (self.start + self.end) as f64 / 2.0 - 0.5
    }

    pub fn intersection(&self, other: &Segment) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    pub fn iou(&self, other: &Segment) -> f64 {
        let inter = self.intersection(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn shifted(&self, by: isize) -> Segment {
        Segment::new(
            (self.start as isize + by) as usize,
            (self.end as isize + by) as usize,
        )
    }
}

impl From<[usize; 2]> for Segment {
    fn from([start, end]: [usize; 2]) -> Self {
        Segment { start, end }
    }
}

impl From<Segment> for [usize; 2] {
    fn from(s: Segment) -> Self {
        [s.start, s.end]
    }
}

impl From<(usize, usize)> for Segment {
    fn from((start, end): (usize, usize)) -> Self {
        Segment { start, end }
    }
}

/// Checks that segments are sorted, non-empty, disjoint and inside `[0, length)`.
pub fn validate_segments(segments: &[Segment], length: usize) -> Result<()> {
    for s in segments {
        if s.is_empty() {
            return Err(Error::ZeroLengthSegment((s.start, s.end)));
        }
        if s.end > length {
            return Err(Error::OutOfRangeSegment { segment: (s.start, s.end), length });
        }
    }
    for w in segments.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::OverlappingSegments {
                first: (w[0].start, w[0].end),
                second: (w[1].start, w[1].end),
            });
        }
    }
    Ok(())
}

/// Ground-truth repetitions of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionAnnotation {
    pub length: usize,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub exercise: String,
    #[serde(default)]
    pub subject: String,
}

impl RepetitionAnnotation {
    /// Validates and sorts. Unsorted input is accepted and sorted by start.
    pub fn new(mut segments: Vec<Segment>, length: usize) -> Result<Self> {
        segments.sort();
        validate_segments(&segments, length)?;
        Ok(Self { length, segments, exercise: String::new(), subject: String::new() })
    }

    pub fn count(&self) -> usize {
        self.segments.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }
}

pub fn parse_annotation(text: &str) -> Result<RepetitionAnnotation> {
    let raw: RepetitionAnnotation = serde_json::from_str(text)?;
    let mut ann = RepetitionAnnotation::new(raw.segments, raw.length)?;
    ann.exercise = raw.exercise;
    ann.subject = raw.subject;
    Ok(ann)
}

/// Root translation plus scale normalization of a skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub root_joint: usize,
    pub scale_pair: (usize, usize),
    pub enabled: bool,
}

impl Default for NormalizationSpec {
    /// Spine base as the root, trunk length (spine base to spine shoulder) as the scale.
    fn default() -> Self {
        Self {
            root_joint: joint::SPINE_BASE,
            scale_pair: (joint::SPINE_BASE, joint::SPINE_SHOULDER),
            enabled: true,
        }
    }
}

impl NormalizationSpec {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self, num_joints: usize) -> Result<()> {
        for index in [self.root_joint, self.scale_pair.0, self.scale_pair.1] {
            if index >= num_joints {
                return Err(Error::InvalidJointIndex { index, joints: num_joints });
            }
        }
        if self.scale_pair.0 == self.scale_pair.1 {
            return Err(Error::InvalidConfig("scale pair joints must differ".into()));
        }
        Ok(())
    }
}

/// Translates the root joint to the origin in every frame and divides by the
/// mean scale-pair distance over the sequence.
pub fn normalize(seq: &SkeletonSequence, spec: &NormalizationSpec) -> Result<SkeletonSequence> {
    if !spec.enabled {
        return Ok(seq.clone());
    }
    spec.validate(seq.num_joints())?;
    let (a, b) = spec.scale_pair;
    let scale = (0..seq.num_frames())
        .map(|t| dist(seq.joint(t, a), seq.joint(t, b)))
        .sum::<f64>()
        / seq.num_frames() as f64;
    if scale < 1e-9 {
        return Err(Error::DegenerateScale(scale));
    }
    let roots: Vec<[f64; 3]> = (0..seq.num_frames()).map(|t| seq.joint(t, spec.root_joint)).collect();
    seq.map_coords(|t, _, p| {
        let r = roots[t];
        [(p[0] - r[0]) / scale, (p[1] - r[1]) / scale, (p[2] - r[2]) / scale]
    })
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Paths of the three files making up a sample.
#[derive(Debug, Clone)]
pub struct SamplePaths {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub annotation: PathBuf,
}

impl SamplePaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        Self {
            csv: dir.join(format!("{stem}.csv")),
            meta: dir.join(format!("{stem}.meta.json")),
            annotation: dir.join(format!("{stem}.ann.json")),
        }
    }

    /// Sidecar paths next to an arbitrary CSV file.
    pub fn for_csv(csv: &Path) -> Self {
        let dir = csv.parent().unwrap_or(Path::new("."));
        let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let mut p = Self::new(dir, stem);
        p.csv = csv.to_path_buf();
        p
    }
}

/// Reads a skeleton CSV and its optional `.meta.json` sidecar.
pub fn read_skeleton(csv_path: &Path) -> Result<SkeletonSequence> {
    let paths = SamplePaths::for_csv(csv_path);
    let meta = if paths.meta.exists() {
        let text = fs::read_to_string(&paths.meta).map_err(|e| Error::io(&paths.meta, e))?;
        serde_json::from_str(&text).map_err(Error::from).context_with(|| paths.meta.display().to_string())?
    } else {
        SequenceMeta::default()
    };
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    parse_skeleton(std::io::BufReader::new(file), meta)
        .context_with(|| csv_path.display().to_string())
}

pub fn read_annotation(path: &Path) -> Result<RepetitionAnnotation> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotation(&text).context_with(|| path.display().to_string())
}

/// Writes `<stem>.csv`, `<stem>.meta.json` and, if given, `<stem>.ann.json`.
pub fn write_sample(
    dir: &Path,
    stem: &str,
    seq: &SkeletonSequence,
    ann: Option<&RepetitionAnnotation>,
) -> Result<SamplePaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = SamplePaths::new(dir, stem);
    let mut buf = Vec::new();
    write_skeleton(seq, &mut buf)?;
    fs::write(&paths.csv, buf).map_err(|e| Error::io(&paths.csv, e))?;
    let meta = serde_json::to_string_pretty(&seq.meta)?;
    fs::write(&paths.meta, meta).map_err(|e| Error::io(&paths.meta, e))?;
    if let Some(ann) = ann {
        fs::write(&paths.annotation, ann.to_json()).map_err(|e| Error::io(&paths.annotation, e))?;
    }
    Ok(paths)
}
