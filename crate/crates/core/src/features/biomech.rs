//! The 28 per-frame biomechanical features: bilateral balance (2),
//! inter-joint angles (15), inter-line angle (1), inter-joint distances (8)
//! and inter-joint distance ratios (2).

use crate::motion::{PoseFrame, Vec3};
use crate::skeleton::JointId as J;

pub const BIOMECH_DIM: usize = 28;

/// Joint triples `(a, b, c)` for the 15 inter-joint angles `∠(a, b, c)`.
pub const IJA_TRIPLES: [(J, J, J); 15] = [
    (J::LEFT_SHOULDER, J::SPINE2, J::SPINE1),
    (J::RIGHT_SHOULDER, J::SPINE2, J::SPINE1),
    (J::SPINE2, J::SPINE1, J::SPINE),
    (J::SPINE1, J::SPINE, J::HIP),
    (J::SPINE1, J::HIP, J::LEFT_UPPERLEG),
    (J::SPINE1, J::HIP, J::RIGHT_UPPERLEG),
    (J::SPINE1, J::HIP, J::LEFT_LEG),
    (J::SPINE1, J::HIP, J::RIGHT_LEG),
    (J::LEFT_UPPERLEG, J::LEFT_LEG, J::LEFT_FOOT),
    (J::RIGHT_UPPERLEG, J::RIGHT_LEG, J::RIGHT_FOOT),
    (J::LEFT_SHOULDER, J::SPINE2, J::HIP),
    (J::RIGHT_SHOULDER, J::SPINE2, J::HIP),
    (J::LEFT_SHOULDER, J::HIP, J::RIGHT_SHOULDER),
    (J::LEFT_LEG, J::LEFT_FOOT, J::LEFT_FOOT_END),
    (J::RIGHT_LEG, J::RIGHT_FOOT, J::RIGHT_FOOT_END),
];

/// Index of the left/right knee angle within the IJA block.
pub const IJA_LEFT_KNEE: usize = 8;
pub const IJA_RIGHT_KNEE: usize = 9;

/// The inter-line angle `∠(a, b, c, d)` between lines `ab` and `cd`.
pub const ILA_JOINTS: (J, J, J, J) = (J::LEFT_SHOULDER, J::RIGHT_SHOULDER, J::LEFT_UPPERLEG, J::RIGHT_UPPERLEG);

pub const IJD_PAIRS: [(J, J); 8] = [
    (J::LEFT_SHOULDER, J::HIP),
    (J::RIGHT_SHOULDER, J::HIP),
    (J::HIP, J::LEFT_FOOT),
    (J::HIP, J::RIGHT_FOOT),
    (J::LEFT_FOREARM, J::LEFT_LEG),
    (J::LEFT_FOREARM, J::RIGHT_LEG),
    (J::RIGHT_FOREARM, J::LEFT_LEG),
    (J::RIGHT_FOREARM, J::RIGHT_LEG),
];

/// Ratios as `(numerator index, denominator index)` into [`IJD_PAIRS`].
pub const IJR_RATIOS: [(usize, usize); 2] = [(5, 4), (6, 7)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiomechFeatures {
    pub values: [f64; BIOMECH_DIM],
    /// Set when an angle had a zero-length arm or a ratio a zero denominator.
    pub degenerate: bool,
}

/// Angle between two vectors as `atan2(|u × v|, u · v)`, in `[0, π]`.
/// Returns `None` if either vector has zero length.
pub fn vector_angle(u: Vec3, v: Vec3) -> Option<f64> {
    if u.norm_squared() == 0.0 || v.norm_squared() == 0.0 {
        return None;
    }
    Some(u.cross(&v).norm().atan2(u.dot(&v)))
}

pub fn biomech_features(frame: &PoseFrame) -> BiomechFeatures {
    let p = |j: J| frame.joint(j);
    let d = |a: J, b: J| (p(a) - p(b)).norm();
    let mut degenerate = false;
    let mut angle = |u: Vec3, v: Vec3| {
        vector_angle(u, v).unwrap_or_else(|| {
            degenerate = true;
            0.0
        })
    };

    let mut out = [0.0; BIOMECH_DIM];
    out[0] = d(J::LEFT_FOREARM, J::SPINE2) - d(J::RIGHT_FOREARM, J::SPINE2);
    out[1] = d(J::LEFT_FOOT, J::HIP) - d(J::RIGHT_FOOT, J::HIP) + d(J::LEFT_LEG, J::HIP)
        - d(J::RIGHT_LEG, J::HIP);

    for (k, &(a, b, c)) in IJA_TRIPLES.iter().enumerate() {
        out[2 + k] = angle(p(b) - p(a), p(c) - p(b));
    }
    let (a, b, c, e) = ILA_JOINTS;
    out[17] = angle(p(b) - p(a), p(e) - p(c));

    let mut ijd = [0.0; 8];
    for (k, &(a, b)) in IJD_PAIRS.iter().enumerate() {
        ijd[k] = d(a, b);
    }
    out[18..26].copy_from_slice(&ijd);
    for (k, &(num, den)) in IJR_RATIOS.iter().enumerate() {
        out[26 + k] = if ijd[den] > 0.0 {
            ijd[num] / ijd[den]
        } else {
            degenerate = true;
            1.0
        };
    }
    BiomechFeatures { values: out, degenerate }
}
