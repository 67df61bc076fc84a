use nalgebra::{Rotation3, Vector3};

use super::{MotionSequence, PoseFrame, Vec3};
use crate::error::{Error, Result};
use crate::skeleton::{CanonicalSkeleton, JointId, JOINT_COUNT};

const MIN_BONE: f64 = 1e-9;

/// Retarget every frame onto `canon`: the root stays put and each
/// parent-to-child vector keeps its direction but takes the canonical length.
pub fn normalize_skeleton(seq: &MotionSequence, canon: &CanonicalSkeleton) -> Result<MotionSequence> {
    let mut frames = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames().iter().enumerate() {
        let mut out = [Vec3::zeros(); JOINT_COUNT];
        out[JointId::ROOT.index()] = f.joint(JointId::ROOT);
        for j in JointId::bones() {
            let parent = j.parent().expect("non-root joint").index();
            let bone = f.positions[j.index()] - f.positions[parent];
            let len = bone.norm();
            if len < MIN_BONE {
                return Err(Error::DegeneratePose {
                    frame: i,
                    message: format!("zero-length bone {} -> {j}", JointId::new(parent)?),
                });
            }
            out[j.index()] = out[parent] + bone * (canon.bone_length(j) / len);
        }
        frames.push(PoseFrame::new(out, f.timestamp));
    }
    Ok(seq.with_frames(frames))
}

/// Horizontal body-facing direction of a pose (unit length), from the
/// shoulder line and the hip line crossed with the up axis.
pub fn facing_direction(frame: &PoseFrame) -> Option<Vec3> {
    let up = Vector3::y();
    let shoulders = frame.joint(JointId::LEFT_SHOULDER) - frame.joint(JointId::RIGHT_SHOULDER);
    let hips = frame.joint(JointId::LEFT_UPPERLEG) - frame.joint(JointId::RIGHT_UPPERLEG);
    let mut f = (shoulders.cross(&up) + hips.cross(&up)) * 0.5;
    f.y = 0.0;
    let n = f.norm();
    (n > 1e-9).then(|| f / n)
}

/// Rotate the whole sequence about the vertical axis so that the body faces
/// +Z at frame 0. One rotation is applied to every frame.
pub fn rotate_to_z_plus(seq: &MotionSequence) -> Result<MotionSequence> {
    let facing = facing_direction(&seq.frames()[0]).ok_or_else(|| Error::DegeneratePose {
        frame: 0,
        message: "facing direction has no horizontal component".into(),
    })?;
    let angle = facing.x.atan2(facing.z);
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), -angle);
    Ok(seq.map_positions(|p| rot * p))
}

/// Skeleton normalisation followed by Z+ alignment.
pub fn preprocess(seq: &MotionSequence, canon: &CanonicalSkeleton) -> Result<MotionSequence> {
    rotate_to_z_plus(&normalize_skeleton(seq, canon)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::test_util::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &MotionSequence, b: &MotionSequence) -> f64 {
        a.frames()
            .iter()
            .zip(b.frames())
            .flat_map(|(x, y)| x.positions.iter().zip(&y.positions).map(|(p, q)| (p - q).amax()))
            .fold(0.0, f64::max)
    }

    fn rest_sequence(frames: usize) -> MotionSequence {
        MotionSequence::from_positions(vec![rest_pose(Vec3::new(0.3, 0.95, -0.2)); frames], 60.0).unwrap()
    }

    #[test]
    fn canonical_input_is_a_fixed_point() {
        let seq = rest_sequence(5);
        let out = normalize_skeleton(&seq, &CanonicalSkeleton::standard()).unwrap();
        assert!(max_abs_diff(&seq, &out) < 1e-9);
    }

    #[test]
    fn random_pose_takes_canonical_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let seq = random_sequence(&mut rng, 3);
            let mut lengths = [0.0; JOINT_COUNT];
            for l in lengths.iter_mut().skip(1) {
                *l = rng.gen_range(0.02..0.6);
            }
            let canon = CanonicalSkeleton::new(lengths).unwrap();
            let out = normalize_skeleton(&seq, &canon).unwrap();
            for (fi, fo) in seq.frames().iter().zip(out.frames()) {
                assert_eq!(fi.joint(JointId::ROOT), fo.joint(JointId::ROOT));
                for j in JointId::bones() {
                    let p = j.parent().unwrap();
                    let bone_out = fo.joint(j) - fo.joint(p);
                    assert!((bone_out.norm() - canon.bone_length(j)).abs() < 1e-6);
                    let bone_in = fi.joint(j) - fi.joint(p);
                    assert!((bone_out.normalize() - bone_in.normalize()).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn scaling_input_only_moves_the_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let seq = random_sequence(&mut rng, 4);
        let canon = CanonicalSkeleton::standard();
        let a = normalize_skeleton(&seq, &canon).unwrap();
        let b = normalize_skeleton(&seq.map_positions(|p| p * 2.0), &canon).unwrap();
        let rel = |s: &MotionSequence| {
            MotionSequence::new(
                s.frames().iter().map(|f| f.map_positions(|p| p - f.joint(JointId::ROOT))).collect(),
                s.sample_rate(),
            )
            .unwrap()
        };
        assert!(max_abs_diff(&rel(&a), &rel(&b)) < 1e-9);
    }

    #[test]
    fn coincident_joints_are_degenerate() {
        let mut p = rest_pose(Vec3::zeros());
        p[JointId::LEFT_HAND.index()] = p[JointId::LEFT_FOREARM.index()];
        let seq = MotionSequence::from_positions(vec![rest_pose(Vec3::zeros()), p], 60.0).unwrap();
        let err = normalize_skeleton(&seq, &CanonicalSkeleton::standard()).unwrap_err();
        assert!(matches!(err, Error::DegeneratePose { frame: 1, .. }));
    }

    #[test]
    fn facing_plus_z_is_identity() {
        let seq = rest_sequence(3);
        assert!((facing_direction(&seq.frames()[0]).unwrap() - Vec3::z()).norm() < 1e-12);
        let out = rotate_to_z_plus(&seq).unwrap();
        assert!(max_abs_diff(&seq, &out) < 1e-9);
    }

    #[test]
    fn facing_minus_z_is_turned_around() {
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI);
        let seq = rest_sequence(2).map_positions(|p| rot * p);
        assert!(facing_direction(&seq.frames()[0]).unwrap().z < -0.999);
        let out = rotate_to_z_plus(&seq).unwrap();
        assert!(facing_direction(&out.frames()[0]).unwrap().dot(&Vec3::z()) >= 1.0 - 1e-9);
    }

    #[test]
    fn vertical_shoulder_and_hip_lines_are_degenerate() {
        let mut p = rest_pose(Vec3::zeros());
        for (l, r) in [(JointId::LEFT_SHOULDER, JointId::RIGHT_SHOULDER), (JointId::LEFT_UPPERLEG, JointId::RIGHT_UPPERLEG)] {
            let mid = (p[l.index()] + p[r.index()]) * 0.5;
            p[l.index()] = mid + Vec3::y() * 0.1;
            p[r.index()] = mid - Vec3::y() * 0.1;
        }
        let seq = MotionSequence::from_positions(vec![p], 60.0).unwrap();
        assert!(matches!(rotate_to_z_plus(&seq), Err(Error::DegeneratePose { frame: 0, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn y_rotation_preserves_pairwise_distances(seed in any::<u64>(), angle in -3.2f64..3.2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
            let seq = random_sequence(&mut rng, 3).map_positions(|p| rot * p);
            if let Ok(out) = rotate_to_z_plus(&seq) {
                for (a, b) in seq.frames().iter().zip(out.frames()) {
                    for i in 0..JOINT_COUNT {
                        for j in 0..JOINT_COUNT {
                            let da = (a.positions[i] - a.positions[j]).norm();
                            let db = (b.positions[i] - b.positions[j]).norm();
                            prop_assert!((da - db).abs() < 1e-9);
                        }
                    }
                }
                let f = facing_direction(&out.frames()[0]).unwrap();
                prop_assert!(f.dot(&Vec3::z()) > 1.0 - 1e-9);
            }
        }

        #[test]
        fn pipeline_is_invariant_to_y_rotation_and_translation(
            seed in any::<u64>(),
            angle in -3.2f64..3.2,
            tx in -5.0f64..5.0, ty in -1.0f64..1.0, tz in -5.0f64..5.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = random_sequence(&mut rng, 4);
            let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
            let moved = seq.map_positions(|p| rot * p + Vec3::new(tx, ty, tz));
            let canon = CanonicalSkeleton::standard();
            let (Ok(a), Ok(b)) = (preprocess(&seq, &canon), preprocess(&moved, &canon)) else {
                return Ok(());
            };
            let root0 = |s: &MotionSequence| s.frames()[0].joint(JointId::ROOT);
            let (ra, rb) = (root0(&a), root0(&b));
            for (fa, fb) in a.frames().iter().zip(b.frames()) {
                for (p, q) in fa.positions.iter().zip(&fb.positions) {
                    prop_assert!(((p - ra) - (q - rb)).norm() < 1e-6);
                }
            }
        }
    }
}
