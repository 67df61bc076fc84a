//! The 287 per-frame baseline features:
//!
//! | block            | width | content                                           |
//! |------------------|-------|---------------------------------------------------|
//! | root             | 4     | yaw velocity, x/z velocity (rad or m per frame), root height |
//! | relative position| 69    | joint - root, 23 non-root joints                  |
//! | rotation (6D)    | 138   | first two columns of each bone's global rotation  |
//! | velocity         | 72    | per-frame position difference, all 24 joints      |
//! | foot contact     | 4     | left foot, left foot end, right foot, right foot end |
//!
//! Velocities are forward differences; the last frame repeats the previous
//! difference so the matrix keeps one row per frame.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::motion::{facing_direction, MotionSequence, PoseFrame, Vec3};
use crate::skeleton::{JointId, BONE_COUNT, JOINT_COUNT, REST_OFFSETS};

pub const ROOT_DIM: usize = 4;
pub const REL_POS_DIM: usize = BONE_COUNT * 3;
pub const ROT6D_DIM: usize = BONE_COUNT * 6;
pub const VEL_DIM: usize = JOINT_COUNT * 3;
pub const CONTACT_DIM: usize = 4;
pub const BASELINE_DIM: usize = ROOT_DIM + REL_POS_DIM + ROT6D_DIM + VEL_DIM + CONTACT_DIM;

const _: () = assert!(BASELINE_DIM == 287);

pub const CONTACT_JOINTS: [JointId; CONTACT_DIM] =
    [JointId::LEFT_FOOT, JointId::LEFT_FOOT_END, JointId::RIGHT_FOOT, JointId::RIGHT_FOOT_END];

/// Foot-contact thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactThresholds {
    /// Maximum vertical speed, metres per frame.
    pub max_vertical_speed: f64,
    /// Maximum height above the lowest foot position of the sequence, metres.
    pub max_height: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        Self { max_vertical_speed: 0.005, max_height: 0.05 }
    }
}

pub fn baseline_features(seq: &MotionSequence, contact: &ContactThresholds) -> Result<Array2<f64>> {
    let t_len = seq.len();
    if t_len < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: t_len });
    }
    let frames = seq.frames();
    let next = |t: usize| if t + 1 < t_len { (t, t + 1) } else { (t - 1, t) };
    let yaw: Vec<f64> = facing_yaws(frames);
    let floor = frames
        .iter()
        .flat_map(|f| CONTACT_JOINTS.iter().map(move |&j| f.joint(j).y))
        .fold(f64::INFINITY, f64::min);

    let mut out = Array2::zeros((t_len, BASELINE_DIM));
    for t in 0..t_len {
        let f = &frames[t];
        let (a, b) = next(t);
        let (fa, fb) = (&frames[a], &frames[b]);
        let mut row = out.row_mut(t);
        let root = f.joint(JointId::ROOT);

        let root_vel = fb.joint(JointId::ROOT) - fa.joint(JointId::ROOT);
        row[0] = wrap_angle(yaw[b] - yaw[a]);
        row[1] = root_vel.x;
        row[2] = root_vel.z;
        row[3] = root.y;

        let mut c = ROOT_DIM;
        for j in JointId::bones() {
            let rel = f.joint(j) - root;
            row[c] = rel.x;
            row[c + 1] = rel.y;
            row[c + 2] = rel.z;
            c += 3;
        }

        let root_frame = root_frame(f);
        for j in JointId::bones() {
            let r = bone_rotation(f, j, &root_frame);
            for (k, v) in [r[(0, 0)], r[(1, 0)], r[(2, 0)], r[(0, 1)], r[(1, 1)], r[(2, 1)]].into_iter().enumerate() {
                row[c + k] = v;
            }
            c += 6;
        }

        for j in JointId::all() {
            let v = fb.joint(j) - fa.joint(j);
            row[c] = v.x;
            row[c + 1] = v.y;
            row[c + 2] = v.z;
            c += 3;
        }

        for j in CONTACT_JOINTS {
            let vy = fb.joint(j).y - fa.joint(j).y;
            let on_floor = vy.abs() < contact.max_vertical_speed && f.joint(j).y - floor < contact.max_height;
            row[c] = if on_floor { 1.0 } else { 0.0 };
            c += 1;
        }
        debug_assert_eq!(c, BASELINE_DIM);
    }
    Ok(out)
}

fn facing_yaws(frames: &[PoseFrame]) -> Vec<f64> {
    let mut prev = 0.0;
    frames
        .iter()
        .map(|f| {
            if let Some(dir) = facing_direction(f) {
                prev = dir.x.atan2(dir.z);
            }
            prev
        })
        .collect()
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if r == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        r
    }
}

/// Orthonormal body frame at the hip: x along the hip line (right to left),
/// z forward, y up. Falls back to the world frame when degenerate.
fn root_frame(f: &PoseFrame) -> Rotation3<f64> {
    let lateral = f.joint(JointId::LEFT_UPPERLEG) - f.joint(JointId::RIGHT_UPPERLEG);
    let up = f.joint(JointId::SPINE) - f.joint(JointId::ROOT);
    let (Some(x), Some(z)) = (normalized(lateral), normalized(lateral.cross(&up))) else {
        return Rotation3::identity();
    };
    let y = z.cross(&x);
    Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]))
}

/// Global rotation of bone `j`: the root frame followed by the minimal
/// rotation taking the bone's rest direction to its current direction
/// (expressed in the root frame).
fn bone_rotation(f: &PoseFrame, j: JointId, root: &Rotation3<f64>) -> Matrix3<f64> {
    let parent = j.parent().expect("bone has a parent");
    let rest = Vector3::from(REST_OFFSETS[j.index()]).normalize();
    let Some(cur) = normalized(f.joint(j) - f.joint(parent)) else {
        return *root.matrix();
    };
    let local = root.inverse() * cur;
    root.matrix() * swing(rest, local)
}

/// Minimal rotation mapping unit vector `a` onto unit vector `b`.
fn swing(a: Vec3, b: Vec3) -> Matrix3<f64> {
    let c = a.dot(&b);
    if c < -1.0 + 1e-12 {
        let ortho = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let axis = Unit::new_normalize(a.cross(&ortho));
        return *Rotation3::from_axis_angle(&axis, std::f64::consts::PI).matrix();
    }
    let k = a.cross(&b);
    let kx = k.cross_matrix();
    Matrix3::identity() + kx + kx * kx / (1.0 + c)
}

fn normalized(v: Vec3) -> Option<Vec3> {
    let n = v.norm();
    (n > 1e-12).then(|| v / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::s;
    use crate::motion::test_util::{random_pose, rest_pose};
    use rand::SeedableRng;

    const VEL_START: usize = ROOT_DIM + REL_POS_DIM + ROT6D_DIM;
    const CONTACT_START: usize = VEL_START + VEL_DIM;

    #[test]
    fn static_pose_has_zero_velocity() {
        let seq = MotionSequence::from_positions(vec![rest_pose(Vec3::new(0.0, 0.93, 0.0)); 5], 60.0).unwrap();
        let m = baseline_features(&seq, &ContactThresholds::default()).unwrap();
        assert_eq!(m.dim(), (5, 287));
        for t in 0..5 {
            assert_eq!(m[(t, 0)], 0.0);
            assert_eq!(m[(t, 1)], 0.0);
            assert_eq!(m[(t, 2)], 0.0);
            assert!(m.slice(s![t, VEL_START..CONTACT_START]).iter().all(|&v| v == 0.0));
            assert!(m.slice(s![t, CONTACT_START..]).iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn rest_pose_rotations_are_identity() {
        let seq = MotionSequence::from_positions(vec![rest_pose(Vec3::zeros()); 2], 60.0).unwrap();
        let m = baseline_features(&seq, &ContactThresholds::default()).unwrap();
        let rot = m.slice(s![0, ROOT_DIM + REL_POS_DIM..VEL_START]);
        for bone in rot.as_slice().unwrap().chunks(6) {
            let expect = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
            for (a, b) in bone.iter().zip(expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vertical_translation_lifts_root_and_breaks_contact() {
        let step = 0.02;
        let frames: Vec<_> = (0..6).map(|t| rest_pose(Vec3::new(0.0, 0.93 + step * t as f64, 0.0))).collect();
        let seq = MotionSequence::from_positions(frames, 60.0).unwrap();
        let m = baseline_features(&seq, &ContactThresholds::default()).unwrap();
        for t in 0..6 {
            assert!(m.slice(s![t, CONTACT_START..]).iter().all(|&v| v == 0.0));
            if t > 0 {
                assert!((m[(t, 3)] - m[(t - 1, 3)] - step).abs() < 1e-12);
            }
            let root_vel_y = m[(t, VEL_START + 1)];
            assert!((root_vel_y - step).abs() < 1e-12);
        }
    }

    #[test]
    fn rotations_are_orthonormal_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let frames = (0..3).map(|_| random_pose(&mut rng)).collect();
        let seq = MotionSequence::from_positions(frames, 60.0).unwrap();
        let m = baseline_features(&seq, &ContactThresholds::default()).unwrap();
        for t in 0..3 {
            let rot = m.slice(s![t, ROOT_DIM + REL_POS_DIM..VEL_START]).to_vec();
            for b in rot.chunks(6) {
                let u = Vec3::new(b[0], b[1], b[2]);
                let v = Vec3::new(b[3], b[4], b[5]);
                assert!((u.norm() - 1.0).abs() < 1e-9 && (v.norm() - 1.0).abs() < 1e-9);
                assert!(u.dot(&v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn yaw_velocity_tracks_turning() {
        let rate = 0.05;
        let frames: Vec<_> = (0..4)
            .map(|t| {
                let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), rate * t as f64);
                rest_pose(Vec3::new(0.0, 0.93, 0.0)).map(|p| rot * p)
            })
            .collect();
        let seq = MotionSequence::from_positions(frames, 60.0).unwrap();
        let m = baseline_features(&seq, &ContactThresholds::default()).unwrap();
        for t in 0..4 {
            assert!((m[(t, 0)] - rate).abs() < 1e-9);
        }
    }

    #[test]
    fn single_frame_is_rejected() {
        let seq = MotionSequence::from_positions(vec![rest_pose(Vec3::zeros())], 60.0).unwrap();
        assert!(matches!(
            baseline_features(&seq, &ContactThresholds::default()),
            Err(Error::InsufficientFrames { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.1) + 0.1).abs() < 1e-15);
        assert!((wrap_angle(2.0 * std::f64::consts::PI - 0.1) + 0.1).abs() < 1e-12);
    }
}
