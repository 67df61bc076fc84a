//! Skeleton motion data: pose frames, sequences, annotations and the
//! preprocessing steps applied before feature extraction.

mod convert;
pub mod io;
mod preprocess;
mod segment;

use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::actions::{ActionCatalog, ActionType, PatternId};
use crate::error::{Error, Result};
use crate::skeleton::{JointId, JOINT_COUNT};

pub use convert::{convert_17_to_24, simulate_joint, ExtremityLengths, SEVENTEEN_JOINTS};
pub use preprocess::{facing_direction, normalize_skeleton, preprocess, rotate_to_z_plus};
pub use segment::{segment_instances, MAX_PASSTHROUGH_SECS, MIN_REMAINDER_SECS, SPLIT_WINDOW_SECS};

pub type Vec3 = Vector3<f64>;

pub const DEFAULT_SAMPLE_RATE: f64 = 60.0;

/// One skeleton pose: 24 joint positions in metres and a timestamp in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub positions: [Vec3; JOINT_COUNT],
    pub timestamp: f64,
}

impl PoseFrame {
    pub fn new(positions: [Vec3; JOINT_COUNT], timestamp: f64) -> Self {
        Self { positions, timestamp }
    }

    pub fn joint(&self, j: JointId) -> Vec3 {
        self.positions[j.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.timestamp.is_finite()
            && self.positions.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Left/right mirror image across the sagittal (x = 0) plane.
    pub fn mirrored(&self) -> Self {
        let mut positions = [Vec3::zeros(); JOINT_COUNT];
        for j in JointId::all() {
            let p = self.positions[j.mirror().index()];
            positions[j.index()] = Vec3::new(-p.x, p.y, p.z);
        }
        Self { positions, timestamp: self.timestamp }
    }

    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self { positions: self.positions.map(f), timestamp: self.timestamp }
    }
}

/// An ordered, validated sequence of pose frames sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: Vec<PoseFrame>,
    sample_rate: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<PoseFrame>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::validation(format!("sample rate must be positive, got {sample_rate}")));
        }
        if frames.is_empty() {
            return Err(Error::InsufficientFrames { needed: 1, got: 0 });
        }
        for (i, f) in frames.iter().enumerate() {
            if !f.is_finite() {
                return Err(Error::validation(format!("frame {i}: non-finite value")));
            }
            if i > 0 && f.timestamp <= frames[i - 1].timestamp {
                return Err(Error::validation(format!("frame {i}: timestamps must strictly increase")));
            }
        }
        Ok(Self { frames, sample_rate })
    }

    /// Build from positions only; timestamps are `i / sample_rate`.
    pub fn from_positions(positions: Vec<[Vec3; JOINT_COUNT]>, sample_rate: f64) -> Result<Self> {
        let frames = positions
            .into_iter()
            .enumerate()
            .map(|(i, p)| PoseFrame::new(p, i as f64 / sample_rate))
            .collect();
        Self::new(frames, sample_rate)
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Nominal duration, `T / sample_rate`.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.sample_rate
    }

    /// Frames `start..end` as a new sequence (timestamps kept).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::validation(format!(
                "slice {start}..{end} out of bounds for {} frames",
                self.len()
            )));
        }
        Ok(Self { frames: self.frames[start..end].to_vec(), sample_rate: self.sample_rate })
    }

    /// Apply a per-position map to every frame. Rigid maps keep the sequence valid.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            frames: self.frames.iter().map(|fr| fr.map_positions(&f)).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub(crate) fn with_frames(&self, frames: Vec<PoseFrame>) -> Self {
        Self { frames, sample_rate: self.sample_rate }
    }
}

/// A labelled action instance inside a sequence: `onset..offset` frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub action_type: ActionType,
    #[serde(rename = "patterns")]
    pub pattern_indices: BTreeSet<PatternId>,
    pub onset: usize,
    pub offset: usize,
}

impl Annotation {
    pub fn len(&self) -> usize {
        self.offset.saturating_sub(self.onset)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, catalog: &ActionCatalog, frame_count: usize) -> Result<()> {
        if self.onset >= self.offset || self.offset > frame_count {
            return Err(Error::validation(format!(
                "annotation {}..{} invalid for {frame_count} frames",
                self.onset, self.offset
            )));
        }
        catalog.check(self.action_type, &self.pattern_indices)
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use crate::skeleton::REST_OFFSETS;
    use rand::Rng;

    /// Rest pose positions with the root at `root`.
    pub fn rest_pose(root: Vec3) -> [Vec3; JOINT_COUNT] {
        let mut p = [Vec3::zeros(); JOINT_COUNT];
        p[0] = root;
        for j in JointId::bones() {
            let parent = j.parent().unwrap().index();
            p[j.index()] = p[parent] + Vec3::from(REST_OFFSETS[j.index()]);
        }
        p
    }

    /// Random pose: every bone a random direction with a random length.
    pub fn random_pose(rng: &mut impl Rng) -> [Vec3; JOINT_COUNT] {
        let mut p = [Vec3::zeros(); JOINT_COUNT];
        p[0] = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0));
        for j in JointId::bones() {
            let parent = j.parent().unwrap().index();
            let dir = loop {
                let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if v.norm() > 0.1 {
                    break v.normalize();
                }
            };
            p[j.index()] = p[parent] + dir * rng.gen_range(0.05..0.5);
        }
        p
    }

    pub fn random_sequence(rng: &mut impl Rng, frames: usize) -> MotionSequence {
        let positions = (0..frames).map(|_| random_pose(rng)).collect();
        MotionSequence::from_positions(positions, DEFAULT_SAMPLE_RATE).unwrap()
    }
}
