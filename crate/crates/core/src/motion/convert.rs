//! Conversion of 17-joint poses (as produced by monocular video pose
//! estimators) to the 24-joint skeleton.
//!
//! Extremities missing from the 17-joint layout are simulated from their
//! nearest known joint: `P = A + (AB / |AB|) * d`, where `A` is the known
//! joint, `AB` points along the known bone through `A` and `d` is the
//! extremity length. `neck1` is the mean of `neck` and `head`; `spine1` is the
//! mean of `spine` and `spine2`.

use super::{MotionSequence, Vec3};
use crate::error::{Error, Result};
use crate::skeleton::{JointId, JOINT_COUNT, REST_OFFSETS};

/// The 17 input joints, in input order.
pub const SEVENTEEN_JOINTS: [JointId; 17] = [
    JointId::HIP,
    JointId::SPINE,
    JointId::SPINE2,
    JointId::NECK,
    JointId::HEAD,
    JointId::LEFT_SHOULDER,
    JointId::LEFT_ARM,
    JointId::LEFT_FOREARM,
    JointId::RIGHT_SHOULDER,
    JointId::RIGHT_ARM,
    JointId::RIGHT_FOREARM,
    JointId::LEFT_UPPERLEG,
    JointId::LEFT_LEG,
    JointId::LEFT_FOOT,
    JointId::RIGHT_UPPERLEG,
    JointId::RIGHT_LEG,
    JointId::RIGHT_FOOT,
];

/// Distance from the anchor joint to each simulated extremity, in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremityLengths {
    pub head_end: f64,
    pub left_hand: f64,
    pub right_hand: f64,
    pub left_foot_end: f64,
    pub right_foot_end: f64,
}

impl ExtremityLengths {
    pub fn zero() -> Self {
        Self { head_end: 0.0, left_hand: 0.0, right_hand: 0.0, left_foot_end: 0.0, right_foot_end: 0.0 }
    }
}

impl Default for ExtremityLengths {
    fn default() -> Self {
        let len = |j: JointId| Vec3::from(REST_OFFSETS[j.index()]).norm();
        Self {
            head_end: len(JointId::HEAD_END),
            left_hand: len(JointId::LEFT_HAND),
            right_hand: len(JointId::RIGHT_HAND),
            left_foot_end: len(JointId::LEFT_FOOT_END),
            right_foot_end: len(JointId::RIGHT_FOOT_END),
        }
    }
}

/// `a + (b - a) / |b - a| * d`.
pub fn simulate_joint(a: Vec3, b: Vec3, d: f64) -> Option<Vec3> {
    let ab = b - a;
    let n = ab.norm();
    (n > 1e-12).then(|| a + ab / n * d)
}

pub fn convert_17_to_24(
    frames: &[[Vec3; 17]],
    sample_rate: f64,
    lengths: &ExtremityLengths,
) -> Result<MotionSequence> {
    let extremities = [
        (JointId::HEAD_END, JointId::HEAD, JointId::NECK, lengths.head_end),
        (JointId::LEFT_HAND, JointId::LEFT_FOREARM, JointId::LEFT_ARM, lengths.left_hand),
        (JointId::RIGHT_HAND, JointId::RIGHT_FOREARM, JointId::RIGHT_ARM, lengths.right_hand),
        (JointId::LEFT_FOOT_END, JointId::LEFT_FOOT, JointId::LEFT_LEG, lengths.left_foot_end),
        (JointId::RIGHT_FOOT_END, JointId::RIGHT_FOOT, JointId::RIGHT_LEG, lengths.right_foot_end),
    ];
    let mut out = Vec::with_capacity(frames.len());
    for (i, f17) in frames.iter().enumerate() {
        let mut p = [Vec3::zeros(); JOINT_COUNT];
        for (src, j) in f17.iter().zip(SEVENTEEN_JOINTS) {
            p[j.index()] = *src;
        }
        p[JointId::NECK1.index()] = (p[JointId::NECK.index()] + p[JointId::HEAD.index()]) * 0.5;
        p[JointId::SPINE1.index()] = (p[JointId::SPINE.index()] + p[JointId::SPINE2.index()]) * 0.5;
        for (missing, anchor, parent, d) in extremities {
            let a = p[anchor.index()];
            // continue the parent -> anchor bone past the anchor
            let b = a + (a - p[parent.index()]);
            p[missing.index()] = simulate_joint(a, b, d).ok_or_else(|| Error::DegeneratePose {
                frame: i,
                message: format!("{parent} and {anchor} coincide; cannot place {missing}"),
            })?;
        }
        out.push(p);
    }
    MotionSequence::from_positions(out, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::test_util::rest_pose;

    fn seventeen_from(p: &[Vec3; JOINT_COUNT]) -> [Vec3; 17] {
        SEVENTEEN_JOINTS.map(|j| p[j.index()])
    }

    #[test]
    fn formula_hand_computation() {
        let hand = simulate_joint(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.3, 1.0, 0.0), 0.2).unwrap();
        assert!((hand - Vec3::new(0.2, 1.0, 0.0)).norm() < 1e-12);
        assert!(simulate_joint(Vec3::zeros(), Vec3::zeros(), 1.0).is_none());
    }

    #[test]
    fn neck1_is_mean_of_neck_and_head() {
        let mut p = rest_pose(Vec3::zeros());
        p[JointId::NECK.index()] = Vec3::new(0.0, 1.4, 0.0);
        p[JointId::HEAD.index()] = Vec3::new(0.0, 1.6, 0.0);
        let seq = convert_17_to_24(&[seventeen_from(&p)], 60.0, &ExtremityLengths::default()).unwrap();
        let neck1 = seq.frames()[0].joint(JointId::NECK1);
        assert!((neck1 - Vec3::new(0.0, 1.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rest_pose_extremities_are_recovered_where_collinear() {
        let p = rest_pose(Vec3::new(0.0, 1.0, 0.0));
        let seq = convert_17_to_24(&[seventeen_from(&p)], 60.0, &ExtremityLengths::default()).unwrap();
        let f = &seq.frames()[0];
        // hands and head end lie on the continuation of their parent bone in the rest pose
        for j in [JointId::LEFT_HAND, JointId::RIGHT_HAND, JointId::HEAD_END] {
            assert!((f.joint(j) - p[j.index()]).norm() < 1e-12, "{j}");
        }
        let d = (f.joint(JointId::LEFT_FOOT_END) - f.joint(JointId::LEFT_FOOT)).norm();
        assert!((d - ExtremityLengths::default().left_foot_end).abs() < 1e-12);
    }

    #[test]
    fn zero_lengths_put_extremities_on_anchors() {
        let p = rest_pose(Vec3::zeros());
        let seq = convert_17_to_24(&[seventeen_from(&p)], 60.0, &ExtremityLengths::zero()).unwrap();
        let f = &seq.frames()[0];
        assert_eq!(f.joint(JointId::HEAD_END), f.joint(JointId::HEAD));
        assert_eq!(f.joint(JointId::LEFT_HAND), f.joint(JointId::LEFT_FOREARM));
        assert_eq!(f.joint(JointId::RIGHT_FOOT_END), f.joint(JointId::RIGHT_FOOT));
    }

    #[test]
    fn coincident_bone_is_degenerate() {
        let mut p = rest_pose(Vec3::zeros());
        p[JointId::RIGHT_FOREARM.index()] = p[JointId::RIGHT_ARM.index()];
        let frames = [seventeen_from(&rest_pose(Vec3::zeros())), seventeen_from(&p)];
        let err = convert_17_to_24(&frames, 60.0, &ExtremityLengths::default()).unwrap_err();
        assert!(matches!(err, Error::DegeneratePose { frame: 1, .. }));
    }
}
