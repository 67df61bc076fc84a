//! The 24-joint skeleton: joint ids, names, the parent tree and a default
//! canonical set of bone lengths.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JOINT_COUNT: usize = 24;
pub const BONE_COUNT: usize = JOINT_COUNT - 1;

/// Index of a joint in the 24-joint skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointId(u8);

impl JointId {
    pub const HIP: JointId = JointId(0);
    pub const SPINE: JointId = JointId(1);
    pub const SPINE1: JointId = JointId(2);
    pub const SPINE2: JointId = JointId(3);
    pub const NECK: JointId = JointId(4);
    pub const NECK1: JointId = JointId(5);
    pub const HEAD: JointId = JointId(6);
    pub const HEAD_END: JointId = JointId(7);
    pub const LEFT_SHOULDER: JointId = JointId(8);
    pub const LEFT_ARM: JointId = JointId(9);
    pub const LEFT_FOREARM: JointId = JointId(10);
    pub const LEFT_HAND: JointId = JointId(11);
    pub const RIGHT_SHOULDER: JointId = JointId(12);
    pub const RIGHT_ARM: JointId = JointId(13);
    pub const RIGHT_FOREARM: JointId = JointId(14);
    pub const RIGHT_HAND: JointId = JointId(15);
    pub const LEFT_UPPERLEG: JointId = JointId(16);
    pub const LEFT_LEG: JointId = JointId(17);
    pub const LEFT_FOOT: JointId = JointId(18);
    pub const LEFT_FOOT_END: JointId = JointId(19);
    pub const RIGHT_UPPERLEG: JointId = JointId(20);
    pub const RIGHT_LEG: JointId = JointId(21);
    pub const RIGHT_FOOT: JointId = JointId(22);
    pub const RIGHT_FOOT_END: JointId = JointId(23);

    pub const ROOT: JointId = JointId::HIP;

    pub fn new(index: usize) -> Result<Self> {
        if index < JOINT_COUNT {
            Ok(JointId(index as u8))
        } else {
            Err(Error::Validation(format!("joint index {index} out of range 0..{JOINT_COUNT}")))
        }
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        JOINT_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        JOINT_NAMES.iter().position(|n| *n == name).map(|i| JointId(i as u8))
    }

    /// Parent in the kinematic tree; `None` for the root.
    pub fn parent(self) -> Option<JointId> {
        PARENTS[self.index()].map(JointId)
    }

    /// Left/right counterpart; joints on the midline map to themselves.
    pub fn mirror(self) -> JointId {
        JointId(MIRROR[self.index()])
    }

    pub fn all() -> impl Iterator<Item = JointId> {
        (0..JOINT_COUNT as u8).map(JointId)
    }

    /// Every non-root joint, in index order. Each is the child end of one bone.
    pub fn bones() -> impl Iterator<Item = JointId> {
        (1..JOINT_COUNT as u8).map(JointId)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "hip",
    "spine",
    "spine1",
    "spine2",
    "neck",
    "neck1",
    "head",
    "head_end",
    "left_shoulder",
    "left_arm",
    "left_forearm",
    "left_hand",
    "right_shoulder",
    "right_arm",
    "right_forearm",
    "right_hand",
    "left_upperleg",
    "left_leg",
    "left_foot",
    "left_foot_end",
    "right_upperleg",
    "right_leg",
    "right_foot",
    "right_foot_end",
];

// Parents always have a lower index than their children, so a forward
// sweep over indices visits every parent before its children.
const PARENTS: [Option<u8>; JOINT_COUNT] = [
    None,
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(3),
    Some(8),
    Some(9),
    Some(10),
    Some(3),
    Some(12),
    Some(13),
    Some(14),
    Some(0),
    Some(16),
    Some(17),
    Some(18),
    Some(0),
    Some(20),
    Some(21),
    Some(22),
];

const MIRROR: [u8; JOINT_COUNT] = [
    0, 1, 2, 3, 4, 5, 6, 7, 12, 13, 14, 15, 8, 9, 10, 11, 20, 21, 22, 23, 16, 17, 18, 19,
];

/// Rest offsets (parent to child, metres) of an adult standing in T-less
/// neutral pose, facing +Z with +Y up and the left side on +X.
pub const REST_OFFSETS: [[f64; 3]; JOINT_COUNT] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.10, 0.0],
    [0.0, 0.12, 0.0],
    [0.0, 0.12, 0.0],
    [0.0, 0.14, 0.0],
    [0.0, 0.05, 0.0],
    [0.0, 0.05, 0.0],
    [0.0, 0.16, 0.0],
    [0.08, 0.08, 0.0],
    [0.10, 0.0, 0.0],
    [0.0, -0.28, 0.0],
    [0.0, -0.25, 0.0],
    [-0.08, 0.08, 0.0],
    [-0.10, 0.0, 0.0],
    [0.0, -0.28, 0.0],
    [0.0, -0.25, 0.0],
    [0.09, -0.04, 0.0],
    [0.0, -0.42, 0.0],
    [0.0, -0.41, 0.0],
    [0.0, -0.04, 0.14],
    [-0.09, -0.04, 0.0],
    [0.0, -0.42, 0.0],
    [0.0, -0.41, 0.0],
    [0.0, -0.04, 0.14],
];

/// Target bone lengths for skeleton normalisation, indexed by child joint.
/// Entry 0 (the root) is unused and kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSkeleton {
    lengths: [f64; JOINT_COUNT],
}

impl CanonicalSkeleton {
    pub fn new(bone_lengths: [f64; JOINT_COUNT]) -> Result<Self> {
        for j in JointId::bones() {
            let len = bone_lengths[j.index()];
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::Validation(format!(
                    "bone length for {j} must be positive and finite, got {len}"
                )));
            }
        }
        let mut lengths = bone_lengths;
        lengths[0] = 0.0;
        Ok(Self { lengths })
    }

    /// Bone lengths of the built-in rest skeleton.
    pub fn standard() -> Self {
        let mut lengths = [0.0; JOINT_COUNT];
        for j in JointId::bones() {
            lengths[j.index()] = Vector3::from(REST_OFFSETS[j.index()]).norm();
        }
        Self { lengths }
    }

    pub fn bone_length(&self, child: JointId) -> f64 {
        self.lengths[child.index()]
    }

    pub fn lengths(&self) -> &[f64; JOINT_COUNT] {
        &self.lengths
    }
}

impl Default for CanonicalSkeleton {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_distinct_and_round_trip() {
        let names: HashSet<_> = JOINT_NAMES.iter().collect();
        assert_eq!(names.len(), JOINT_COUNT);
        for j in JointId::all() {
            assert_eq!(JointId::from_name(j.name()), Some(j));
        }
        assert!(JointId::new(24).is_err());
    }

    #[test]
    fn parent_graph_is_a_tree_rooted_at_hip() {
        assert_eq!(JointId::HIP.parent(), None);
        for j in JointId::bones() {
            let mut cur = j;
            let mut steps = 0;
            while let Some(p) = cur.parent() {
                assert!(p.index() < cur.index());
                cur = p;
                steps += 1;
                assert!(steps < JOINT_COUNT);
            }
            assert_eq!(cur, JointId::ROOT);
        }
    }

    #[test]
    fn mirror_is_an_involution_preserving_parents() {
        for j in JointId::all() {
            assert_eq!(j.mirror().mirror(), j);
            assert_eq!(j.parent().map(JointId::mirror), j.mirror().parent());
        }
    }

    #[test]
    fn canonical_rejects_non_positive_bones() {
        let mut lengths = *CanonicalSkeleton::standard().lengths();
        lengths[5] = 0.0;
        assert!(CanonicalSkeleton::new(lengths).is_err());
    }
}
