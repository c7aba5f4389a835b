use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::skeleton::{read_annotation, read_skeleton, write_sample, Population, RepetitionAnnotation, SamplePaths, SkeletonSequence};

/// A recording with its ground-truth repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub skeleton: SkeletonSequence,
    pub annotation: RepetitionAnnotation,
}

impl Sample {
    pub fn new(id: impl Into<String>, skeleton: SkeletonSequence, annotation: RepetitionAnnotation) -> Result<Self> {
        let id = id.into();
        if annotation.length != skeleton.num_frames() {
            return Err(Error::LengthMismatch { expected: skeleton.num_frames(), actual: annotation.length })
                .context_with(|| format!("sample {id}: annotation length"));
        }
        Ok(Self { id, skeleton, annotation })
    }

    /// Exercise id from the metadata, falling back to the annotation.
    pub fn exercise(&self) -> &str {
        if self.skeleton.meta.exercise_id.is_empty() {
            &self.annotation.exercise
        } else {
            &self.skeleton.meta.exercise_id
        }
    }

    pub fn subject(&self) -> &str {
        if self.skeleton.meta.subject_id.is_empty() {
            &self.annotation.subject
        } else {
            &self.skeleton.meta.subject_id
        }
    }

    pub fn population(&self) -> Population {
        self.skeleton.meta.population
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub exercise: String,
    pub subject: String,
    pub frames: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub samples: Vec<ManifestEntry>,
}

/// Loads every `<id>.csv` in `dir` (sorted by id) with its sidecars. Each
/// CSV must have an `<id>.ann.json`.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems: Vec<String> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    if stems.is_empty() {
        return Err(Error::EmptyInput("dataset directory has no .csv samples"));
    }
    stems
        .into_iter()
        .map(|stem| {
            let paths = SamplePaths::new(dir, &stem);
            let skeleton = read_skeleton(&paths.csv)?;
            let annotation = read_annotation(&paths.annotation)?;
            Sample::new(stem, skeleton, annotation)
        })
        .collect()
}

/// Writes samples in the interchange layout plus a `manifest.json`.
pub fn write_dataset(dir: &Path, samples: &[Sample]) -> Result<Manifest> {
    let mut manifest = Manifest { version: 1, samples: Vec::with_capacity(samples.len()) };
    for s in samples {
        write_sample(dir, &s.id, &s.skeleton, Some(&s.annotation))?;
        manifest.samples.push(ManifestEntry {
            id: s.id.clone(),
            exercise: s.exercise().to_string(),
            subject: s.subject().to_string(),
            frames: s.skeleton.num_frames(),
            count: s.annotation.count(),
        });
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
