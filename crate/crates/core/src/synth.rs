//! Synthetic motion generator for desk-scale experiments.
//!
//! A forward-kinematics rig over the rest skeleton is driven by joint-angle
//! profiles, one template per action type. Movement patterns perturb the
//! profiles. Per-instance randomness covers amplitude, tempo, phase, body
//! size, heading, start position and a slow per-angle wobble, all drawn from
//! a seeded generator so the output is a pure function of its [`SynthSpec`].

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actions::{ActionCatalog, ActionType, PatternId};
use crate::error::{Error, Result};
use crate::motion::{Annotation, MotionSequence, Vec3, DEFAULT_SAMPLE_RATE};
use crate::skeleton::{JointId, JOINT_COUNT, REST_OFFSETS};

/// Joint-angle channels of the rig, in radians except the root offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dof {
    SpineFlex,
    SpineLat,
    SpineRot,
    NeckFlex,
    NeckLat,
    ShoulderFlexL,
    ShoulderFlexR,
    ShoulderAbdL,
    ShoulderAbdR,
    ElbowL,
    ElbowR,
    HipFlexL,
    HipFlexR,
    HipAbdL,
    HipAbdR,
    KneeL,
    KneeR,
    AnkleL,
    AnkleR,
    RootPitch,
    RootRoll,
    RootYaw,
    /// Sideways root shift in metres.
    RootShift,
}

const DOF_COUNT: usize = Dof::RootShift as usize + 1;

type Dofs = [f64; DOF_COUNT];

#[derive(Debug, Clone, Copy)]
enum Wave {
    Const,
    /// `sin(2πu)` over the cycle.
    Sine,
    /// `(1 - cos(2πu)) / 2`, zero at the cycle start.
    Bump,
    /// Smooth 0 to 1 transition between two fractions of the instance.
    Ramp(f64, f64),
    /// Smooth 1 to 0 transition.
    RampDown(f64, f64),
    /// Half-sine hump spanning the given fractions of the instance.
    Hump(f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Channel {
    dof: Dof,
    amp: f64,
    wave: Wave,
    phase: f64,
}

const fn ch(dof: Dof, amp: f64, wave: Wave) -> Channel {
    Channel { dof, amp, wave, phase: 0.0 }
}

const fn chp(dof: Dof, amp: f64, wave: Wave, phase: f64) -> Channel {
    Channel { dof, amp, wave, phase }
}

struct Template {
    period: f64,
    /// Forward walking speed, metres per second.
    speed: f64,
    channels: Vec<Channel>,
}

use Dof::*;
use Wave::*;

fn gait(hip: f64, knee: f64, arm: f64) -> Vec<Channel> {
    vec![
        chp(HipFlexL, hip, Sine, 0.0),
        chp(HipFlexR, hip, Sine, 0.5),
        chp(KneeL, knee, Bump, 0.75),
        chp(KneeR, knee, Bump, 0.25),
        chp(ShoulderFlexL, arm, Sine, 0.5),
        chp(ShoulderFlexR, arm, Sine, 0.0),
        ch(ElbowL, 0.2, Const),
        ch(ElbowR, 0.2, Const),
    ]
}

fn quadruped() -> Vec<Channel> {
    vec![
        ch(RootPitch, FRAC_PI_2, Const),
        ch(HipFlexL, FRAC_PI_2, Const),
        ch(HipFlexR, FRAC_PI_2, Const),
        ch(KneeL, FRAC_PI_2, Const),
        ch(KneeR, FRAC_PI_2, Const),
        ch(ShoulderFlexL, FRAC_PI_2, Const),
        ch(ShoulderFlexR, FRAC_PI_2, Const),
        ch(NeckFlex, -0.3, Const),
    ]
}

fn template(action: ActionType) -> Template {
    let (period, speed, channels) = match action.get() {
        1 => (
            1.6,
            0.0,
            vec![
                ch(SpineFlex, 0.35, Const),
                ch(KneeL, 0.15, Const),
                ch(KneeR, 0.15, Const),
                ch(ShoulderFlexL, 0.7, Const),
                ch(ShoulderFlexR, 0.5, Const),
                ch(ShoulderFlexL, 0.35, Sine),
                ch(ShoulderFlexR, 0.35, Sine),
                ch(ElbowL, 0.5, Const),
                ch(ElbowR, 0.7, Const),
                ch(SpineRot, 0.3, Sine),
            ],
        ),
        2 => {
            let mut c = gait(0.3, 0.45, 0.0);
            c.extend([
                ch(ShoulderFlexL, 0.35, Const),
                ch(ShoulderFlexR, 0.35, Const),
                ch(ElbowL, 1.2, Const),
                ch(ElbowR, 1.2, Const),
                ch(ShoulderAbdL, -0.2, Const),
                ch(ShoulderAbdR, -0.2, Const),
                ch(SpineFlex, -0.1, Const),
            ]);
            (1.3, 0.7, c)
        }
        3 => (
            3.0,
            0.0,
            vec![
                ch(SpineFlex, 1.2, Bump),
                ch(HipFlexL, 0.5, Bump),
                ch(HipFlexR, 0.5, Bump),
                ch(KneeL, 0.8, Bump),
                ch(KneeR, 0.8, Bump),
                ch(ShoulderFlexR, 1.1, Bump),
                ch(ElbowR, 0.3, Bump),
            ],
        ),
        4 => (
            1.0,
            0.0,
            vec![
                ch(HipFlexL, 1.45, Ramp(0.2, 0.65)),
                ch(HipFlexR, 1.45, Ramp(0.2, 0.65)),
                ch(KneeL, 1.5, Ramp(0.2, 0.65)),
                ch(KneeR, 1.5, Ramp(0.2, 0.65)),
                ch(SpineFlex, 0.6, Hump(0.15, 0.75)),
                ch(ShoulderFlexL, 0.4, Hump(0.15, 0.75)),
                ch(ShoulderFlexR, 0.4, Hump(0.15, 0.75)),
            ],
        ),
        5 => (
            1.0,
            0.0,
            vec![
                ch(HipFlexL, 1.65, Ramp(0.2, 0.55)),
                ch(HipFlexR, 1.65, Ramp(0.2, 0.55)),
                ch(KneeL, 1.75, Ramp(0.2, 0.55)),
                ch(KneeR, 1.75, Ramp(0.2, 0.55)),
                ch(SpineFlex, 0.4, Hump(0.15, 0.55)),
                ch(SpineFlex, -0.35, Ramp(0.5, 0.8)),
                ch(ShoulderAbdL, 0.3, Ramp(0.5, 0.8)),
                ch(ShoulderAbdR, 0.3, Ramp(0.5, 0.8)),
            ],
        ),
        6 => (
            1.0,
            0.0,
            vec![
                ch(HipFlexL, 1.45, RampDown(0.3, 0.8)),
                ch(HipFlexR, 1.45, RampDown(0.3, 0.8)),
                ch(KneeL, 1.5, RampDown(0.3, 0.8)),
                ch(KneeR, 1.5, RampDown(0.3, 0.8)),
                ch(SpineFlex, 0.7, Hump(0.1, 0.7)),
                ch(ShoulderFlexL, 0.5, Hump(0.1, 0.7)),
                ch(ShoulderFlexR, 0.5, Hump(0.1, 0.7)),
            ],
        ),
        7 => (
            1.0,
            0.0,
            vec![
                ch(RootPitch, -FRAC_PI_2, Ramp(0.3, 0.8)),
                ch(HipFlexL, 1.3, Hump(0.1, 0.9)),
                ch(HipFlexR, 1.3, Hump(0.1, 0.9)),
                ch(KneeL, 1.4, Hump(0.1, 0.9)),
                ch(KneeR, 1.4, Hump(0.1, 0.9)),
                ch(ShoulderAbdL, 0.5, Hump(0.2, 0.7)),
                ch(ElbowL, 0.8, Hump(0.2, 0.7)),
            ],
        ),
        8 => (
            1.0,
            0.0,
            vec![
                ch(RootPitch, -FRAC_PI_2, RampDown(0.2, 0.7)),
                ch(HipFlexL, 1.3, Hump(0.1, 0.9)),
                ch(HipFlexR, 1.3, Hump(0.1, 0.9)),
                ch(KneeL, 1.4, Hump(0.1, 0.9)),
                ch(KneeR, 1.4, Hump(0.1, 0.9)),
                ch(SpineFlex, 0.5, Hump(0.2, 0.8)),
                ch(ShoulderAbdR, 0.5, Hump(0.3, 0.8)),
                ch(ElbowR, 0.8, Hump(0.3, 0.8)),
            ],
        ),
        9 => (1.1, 1.2, gait(0.4, 0.65, 0.35)),
        10 => {
            let mut c = gait(0.3, 0.35, 0.25);
            c.extend([ch(AnkleL, 0.45, Const), ch(AnkleR, 0.45, Const), ch(SpineFlex, 0.1, Const)]);
            (0.9, 0.6, c)
        }
        11 => {
            let mut c = gait(0.2, 0.25, 0.1);
            c.extend([
                chp(AnkleL, 0.35, Sine, 0.25),
                chp(AnkleR, 0.35, Sine, 0.75),
                ch(ShoulderAbdL, 0.3, Const),
                ch(ShoulderAbdR, 0.3, Const),
            ]);
            (1.5, 0.35, c)
        }
        12 => {
            let mut c = quadruped();
            c.extend([ch(ShoulderFlexL, 1.2, Bump), ch(NeckFlex, -0.25, Bump)]);
            (3.0, 0.0, c)
        }
        13 => {
            let mut c = quadruped();
            c.extend([ch(HipFlexR, -1.4, Bump), ch(KneeR, -1.4, Bump)]);
            (3.0, 0.0, c)
        }
        14 => (
            2.5,
            0.0,
            vec![
                ch(ShoulderFlexL, 1.3, Bump),
                ch(ShoulderFlexR, 1.3, Bump),
                ch(ShoulderAbdL, -0.7, Bump),
                ch(ShoulderAbdR, -0.7, Bump),
                ch(ElbowL, 1.4, Bump),
                ch(ElbowR, 1.4, Bump),
                ch(SpineFlex, 0.2, Bump),
            ],
        ),
        15 | 16 => {
            let (hip, knee, abd) = if action.get() == 15 { (HipFlexL, KneeL, ShoulderAbdR) } else { (HipFlexR, KneeR, ShoulderAbdL) };
            (
                2.5,
                0.0,
                vec![
                    ch(hip, 1.3, Bump),
                    ch(knee, 1.3, Bump),
                    ch(abd, 0.5, Const),
                    ch(ElbowL, 0.3, Const),
                    ch(ElbowR, 0.3, Const),
                ],
            )
        }
        17 => (
            4.0,
            0.0,
            vec![
                ch(SpineLat, 0.5, Sine),
                ch(ShoulderAbdL, 0.5, Const),
                ch(ShoulderAbdR, 0.5, Const),
                chp(ShoulderAbdL, 0.35, Sine, 0.5),
                ch(ShoulderAbdR, 0.35, Sine),
                ch(ElbowL, 0.4, Const),
                ch(ElbowR, 0.4, Const),
            ],
        ),
        18 => (
            2.0,
            0.0,
            vec![
                ch(ShoulderAbdL, FRAC_PI_2, Const),
                ch(ShoulderAbdR, FRAC_PI_2, Const),
                ch(ShoulderFlexL, 1.3, Bump),
                ch(ShoulderFlexR, 1.3, Bump),
                ch(ElbowL, 0.3, Const),
                ch(ElbowR, 0.3, Const),
            ],
        ),
        19 => (
            3.0,
            0.0,
            vec![
                ch(SpineFlex, 1.35, Bump),
                ch(SpineRot, 0.35, Sine),
                ch(ShoulderFlexL, 0.9, Bump),
                ch(ShoulderFlexR, 0.9, Bump),
                ch(HipAbdL, 0.3, Const),
                ch(HipAbdR, 0.3, Const),
            ],
        ),
        20 => (
            2.5,
            0.0,
            vec![
                ch(HipFlexL, 1.4, Bump),
                ch(HipFlexR, 1.4, Bump),
                ch(KneeL, 1.9, Bump),
                ch(KneeR, 1.9, Bump),
                ch(AnkleL, 0.5, Bump),
                ch(AnkleR, 0.5, Bump),
                ch(SpineFlex, 0.45, Bump),
                ch(ShoulderFlexL, 1.4, Bump),
                ch(ShoulderFlexR, 1.4, Bump),
                ch(HipAbdL, 0.15, Const),
                ch(HipAbdR, 0.15, Const),
            ],
        ),
        21 => (
            3.0,
            0.0,
            vec![
                ch(RootPitch, -FRAC_PI_2, Const),
                ch(RootPitch, -0.5, Bump),
                ch(HipFlexL, 1.0, Const),
                ch(HipFlexR, 1.0, Const),
                ch(HipFlexL, -0.5, Bump),
                ch(HipFlexR, -0.5, Bump),
                ch(KneeL, 1.8, Const),
                ch(KneeR, 1.8, Const),
                ch(ShoulderAbdL, 0.4, Const),
                ch(ShoulderAbdR, 0.4, Const),
            ],
        ),
        22 => (
            3.0,
            0.0,
            vec![
                ch(HipFlexL, 1.2, Bump),
                ch(KneeL, 1.4, Bump),
                ch(HipFlexR, -0.45, Bump),
                ch(KneeR, 1.3, Bump),
                ch(AnkleR, -0.4, Bump),
                ch(ShoulderAbdL, 0.25, Const),
                ch(ShoulderAbdR, 0.25, Const),
            ],
        ),
        23 => (
            3.0,
            0.0,
            vec![
                ch(SpineRot, 0.75, Sine),
                ch(ShoulderAbdL, 1.2, Const),
                ch(ShoulderAbdR, 1.2, Const),
                ch(ElbowL, 1.3, Const),
                ch(ElbowR, 1.3, Const),
                ch(KneeL, 0.1, Const),
                ch(KneeR, 0.1, Const),
            ],
        ),
        24 => (
            2.5,
            0.0,
            vec![
                ch(RootPitch, -FRAC_PI_2, Const),
                ch(NeckFlex, 0.8, Bump),
                ch(SpineFlex, 0.15, Bump),
                ch(HipFlexL, 0.8, Const),
                ch(HipFlexR, 0.8, Const),
                ch(KneeL, 1.5, Const),
                ch(KneeR, 1.5, Const),
            ],
        ),
        25 => (
            3.0,
            0.0,
            vec![
                ch(RootPitch, FRAC_PI_2, Const),
                ch(SpineFlex, -0.6, Bump),
                ch(NeckFlex, -0.3, Bump),
                ch(ShoulderFlexL, 2.6, Const),
                ch(ShoulderFlexR, 2.6, Const),
                ch(ShoulderFlexL, 0.3, Bump),
                ch(ShoulderFlexR, 0.3, Bump),
            ],
        ),
        _ => unreachable!("action types are 1..=25"),
    };
    Template { period, speed, channels }
}

#[derive(Debug, Clone, Copy)]
enum Effect {
    Add(Dof, f64),
    Scale(Dof, f64),
    SwapArmSwing,
}

use Effect::*;

fn pattern_effects(p: PatternId) -> &'static [Effect] {
    match p.get() {
        1 => &[Add(SpineFlex, 0.35)],
        2 => &[Add(SpineFlex, -0.3)],
        3 => &[Add(SpineFlex, 0.4), Scale(HipFlexL, 0.5), Scale(HipFlexR, 0.5)],
        4 => &[Add(SpineRot, 0.35)],
        5 => &[Add(RootShift, 0.06), Add(SpineLat, -0.15)],
        6 => &[Add(SpineFlex, -0.3), Add(NeckFlex, -0.2)],
        7 => &[Add(NeckLat, 0.35)],
        8 => &[Add(AnkleL, -0.4), Add(AnkleR, -0.4), Add(RootPitch, 0.1)],
        9 => &[Scale(SpineFlex, 0.3), Scale(SpineLat, 0.3), Scale(SpineRot, 0.3)],
        10 => &[Add(KneeL, 0.45), Add(KneeR, 0.45)],
        11 => &[Add(SpineFlex, -0.25), Add(RootPitch, 0.15)],
        12 => &[Add(SpineFlex, -0.3), Add(HipFlexL, -0.15), Add(HipFlexR, -0.15)],
        13 => &[Add(SpineLat, 0.25)],
        14 => &[Add(HipFlexL, 0.4), Add(HipFlexR, 0.4)],
        15 => &[Add(NeckFlex, 0.3), Add(SpineFlex, 0.2), Add(ShoulderFlexL, -0.2), Add(ShoulderFlexR, -0.2)],
        16 => &[Add(RootRoll, 0.15)],
        17 => &[Add(SpineLat, 0.35)],
        18 => &[Add(SpineFlex, 0.45)],
        19 => &[Add(KneeL, 0.3), Add(KneeR, 0.3), Add(AnkleL, 0.3), Add(AnkleR, 0.3)],
        20 => &[Scale(SpineFlex, 0.2)],
        21 => &[Scale(HipFlexL, 1.3), Scale(HipFlexR, 1.3), Scale(KneeL, 1.2), Scale(KneeR, 1.2)],
        22 => &[Scale(HipFlexL, 0.5), Scale(HipFlexR, 0.5), Scale(KneeL, 0.5), Scale(KneeR, 0.5)],
        23 => &[Add(KneeR, 0.3), Add(SpineLat, 0.1)],
        24 => &[Add(SpineFlex, -0.3), Add(ShoulderFlexL, 0.2), Add(ShoulderFlexR, 0.2)],
        25 => &[Add(AnkleL, -0.35), Add(AnkleR, -0.35)],
        26 => &[Add(SpineFlex, 0.4), Add(RootPitch, 0.1)],
        27 => &[Scale(KneeL, 0.4), Scale(KneeR, 0.4)],
        28 => &[Add(SpineFlex, -0.3)],
        29 => &[SwapArmSwing],
        30 => &[Add(NeckFlex, 0.4)],
        31 => &[Add(HipFlexL, 0.35), Add(HipFlexR, 0.35)],
        32 => &[Add(KneeL, -0.5), Add(KneeR, -0.5)],
        33 => &[Add(HipFlexL, -0.35), Add(HipFlexR, -0.35), Add(SpineFlex, -0.2)],
        _ => &[],
    }
}

/// Request for one synthetic action instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub action: ActionType,
    pub patterns: BTreeSet<PatternId>,
    pub duration_s: f64,
    pub seed: u64,
    /// Selects the body proportions; instances of one participant share them.
    pub participant: u32,
    pub sample_rate: f64,
}

impl SynthSpec {
    pub fn new(action: ActionType, duration_s: f64, seed: u64) -> Self {
        Self { action, patterns: BTreeSet::new(), duration_s, seed, participant: 0, sample_rate: DEFAULT_SAMPLE_RATE }
    }

    pub fn with_patterns(mut self, patterns: impl IntoIterator<Item = PatternId>) -> Self {
        self.patterns = patterns.into_iter().collect();
        self
    }

    pub fn with_participant(mut self, participant: u32) -> Self {
        self.participant = participant;
        self
    }
}

/// Per-bone rest offsets of one body.
fn body_offsets(participant: u32) -> [Vec3; JOINT_COUNT] {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_B0D1_0000_0000 ^ u64::from(participant));
    let scale = rng.gen_range(0.9..1.1);
    let mut out = [Vec3::zeros(); JOINT_COUNT];
    for j in JointId::bones() {
        let jitter = rng.gen_range(0.95..1.05);
        out[j.index()] = Vec3::from(REST_OFFSETS[j.index()]) * scale * jitter;
    }
    for j in JointId::bones() {
        let m = j.mirror();
        if m.index() < j.index() {
            let o = out[m.index()];
            out[j.index()] = Vec3::new(-o.x, o.y, o.z);
        }
    }
    out
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn wave_value(wave: Wave, cycle: f64, progress: f64) -> f64 {
    match wave {
        Const => 1.0,
        Sine => (TAU * cycle).sin(),
        Bump => 0.5 * (1.0 - (TAU * cycle).cos()),
        Ramp(a, b) => smoothstep((progress - a) / (b - a)),
        RampDown(a, b) => 1.0 - smoothstep((progress - a) / (b - a)),
        Hump(a, b) => {
            let x = (progress - a) / (b - a);
            if (0.0..=1.0).contains(&x) {
                (PI * x).sin()
            } else {
                0.0
            }
        }
    }
}

fn rx(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::x_axis(), a)
}

fn ry(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::y_axis(), a)
}

fn rz(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::z_axis(), a)
}

/// Joint positions for one set of joint angles, root at the origin.
fn forward_kinematics(d: &Dofs, offsets: &[Vec3; JOINT_COUNT]) -> [Vec3; JOINT_COUNT] {
    let g = |dof: Dof| d[dof as usize];
    let spine = ry(g(SpineRot) / 3.0) * rx(g(SpineFlex) / 3.0) * rz(-g(SpineLat) / 3.0);
    let mut local = [Rotation3::identity(); JOINT_COUNT];
    local[JointId::HIP.index()] = ry(g(RootYaw)) * rx(g(RootPitch)) * rz(g(RootRoll));
    local[JointId::SPINE.index()] = spine;
    local[JointId::SPINE1.index()] = spine;
    local[JointId::SPINE2.index()] = spine;
    local[JointId::NECK.index()] = rx(g(NeckFlex)) * rz(-g(NeckLat));
    local[JointId::LEFT_ARM.index()] = rz(g(ShoulderAbdL)) * rx(-g(ShoulderFlexL));
    local[JointId::RIGHT_ARM.index()] = rz(-g(ShoulderAbdR)) * rx(-g(ShoulderFlexR));
    local[JointId::LEFT_FOREARM.index()] = rx(-g(ElbowL));
    local[JointId::RIGHT_FOREARM.index()] = rx(-g(ElbowR));
    local[JointId::LEFT_UPPERLEG.index()] = rz(g(HipAbdL)) * rx(-g(HipFlexL));
    local[JointId::RIGHT_UPPERLEG.index()] = rz(-g(HipAbdR)) * rx(-g(HipFlexR));
    local[JointId::LEFT_LEG.index()] = rx(g(KneeL));
    local[JointId::RIGHT_LEG.index()] = rx(g(KneeR));
    local[JointId::LEFT_FOOT.index()] = rx(-g(AnkleL));
    local[JointId::RIGHT_FOOT.index()] = rx(-g(AnkleR));

    let mut global = [Rotation3::identity(); JOINT_COUNT];
    let mut pos = [Vec3::zeros(); JOINT_COUNT];
    global[0] = local[0];
    for j in JointId::bones() {
        let p = j.parent().expect("non-root").index();
        pos[j.index()] = pos[p] + global[p] * offsets[j.index()];
        global[j.index()] = global[p] * local[j.index()];
    }
    pos
}

struct Wobble {
    amp: f64,
    freq: f64,
    phase: f64,
}

/// Generate one instance. The annotation spans the whole sequence.
pub fn synthesize_action(spec: &SynthSpec, catalog: &ActionCatalog) -> Result<(MotionSequence, Annotation)> {
    catalog.check(spec.action, &spec.patterns)?;
    if !(spec.duration_s.is_finite() && spec.duration_s > 0.0) {
        return Err(Error::validation(format!("duration must be positive, got {}", spec.duration_s)));
    }
    if !(spec.sample_rate.is_finite() && spec.sample_rate > 0.0) {
        return Err(Error::validation(format!("sample rate must be positive, got {}", spec.sample_rate)));
    }
    let frames = (spec.duration_s * spec.sample_rate).round() as usize;
    if frames < 2 {
        return Err(Error::InsufficientFrames { needed: 2, got: frames });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tpl = template(spec.action);
    let offsets = body_offsets(spec.participant);
    let period = tpl.period * rng.gen_range(0.85..1.15);
    let cycle0: f64 = rng.gen();
    let shift: f64 = rng.gen_range(-0.05..0.05);
    let amps: Vec<f64> = tpl.channels.iter().map(|_| rng.gen_range(0.85..1.15)).collect();
    let speed = tpl.speed * rng.gen_range(0.85..1.15);
    let heading = rng.gen_range(-PI..PI);
    let start = Vec3::new(rng.gen_range(-2.0..2.0), 0.0, rng.gen_range(-2.0..2.0));
    let wobble: Vec<Wobble> = (0..DOF_COUNT)
        .map(|k| Wobble {
            amp: if k == RootShift as usize { 0.01 } else { 0.03 },
            freq: rng.gen_range(0.15..0.5),
            phase: rng.gen_range(0.0..TAU),
        })
        .collect();
    let effects: Vec<Effect> = spec.patterns.iter().flat_map(|&p| pattern_effects(p).iter().copied()).collect();
    let forward = ry(heading) * Vec3::z();

    let mut positions = Vec::with_capacity(frames);
    for i in 0..frames {
        let t = i as f64 / spec.sample_rate;
        let progress = (t / spec.duration_s + shift).clamp(0.0, 1.0);
        let mut d: Dofs = [0.0; DOF_COUNT];
        for (c, amp) in tpl.channels.iter().zip(&amps) {
            let cycle = t / period + cycle0 + c.phase;
            d[c.dof as usize] += c.amp * amp * wave_value(c.wave, cycle, progress);
        }
        for e in &effects {
            match *e {
                Add(dof, v) => d[dof as usize] += v,
                Scale(dof, v) => d[dof as usize] *= v,
                SwapArmSwing => d.swap(ShoulderFlexL as usize, ShoulderFlexR as usize),
            }
        }
        for (k, w) in wobble.iter().enumerate() {
            d[k] += w.amp * (TAU * w.freq * t + w.phase).sin();
        }
        d[RootYaw as usize] += heading;

        let local = forward_kinematics(&d, &offsets);
        let floor = local.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let side = ry(heading) * Vec3::x() * d[RootShift as usize];
        let root = start + forward * (speed * t) + side - Vec3::new(0.0, floor, 0.0);
        positions.push(local.map(|p| p + root));
    }
    let seq = MotionSequence::from_positions(positions, spec.sample_rate)?;
    let ann = Annotation { action_type: spec.action, pattern_indices: spec.patterns.clone(), onset: 0, offset: frames };
    Ok((seq, ann))
}

/// Settings for a whole synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub actions: Vec<ActionType>,
    /// Number of participants; each performs every action once.
    pub participants: u32,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Probability that each candidate pattern of an action is injected.
    pub pattern_probability: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            actions: ActionType::all().collect(),
            participants: 40,
            min_duration_s: 3.0,
            max_duration_s: 5.0,
            pattern_probability: 0.25,
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub id: String,
    pub participant: u32,
    pub spec: SynthSpec,
    pub sequence: MotionSequence,
    pub annotation: Annotation,
}

/// Every participant performing every listed action once.
pub fn synthesize_corpus(cfg: &CorpusConfig, catalog: &ActionCatalog) -> Result<Vec<SynthInstance>> {
    if cfg.min_duration_s <= 0.0 || cfg.max_duration_s < cfg.min_duration_s {
        return Err(Error::validation("invalid synthetic duration range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.actions.len() * cfg.participants as usize);
    for participant in 0..cfg.participants {
        for &action in &cfg.actions {
            let duration = if cfg.max_duration_s > cfg.min_duration_s {
                rng.gen_range(cfg.min_duration_s..cfg.max_duration_s)
            } else {
                cfg.min_duration_s
            };
            let patterns: Vec<PatternId> = catalog
                .candidates(action)
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(cfg.pattern_probability))
                .collect();
            let spec = SynthSpec {
                action,
                patterns: patterns.into_iter().collect(),
                duration_s: (duration * cfg.sample_rate).round() / cfg.sample_rate,
                seed: rng.gen(),
                participant,
                sample_rate: cfg.sample_rate,
            };
            let (sequence, annotation) = synthesize_action(&spec, catalog)?;
            out.push(SynthInstance {
                id: format!("p{participant:03}_{}", action.slug()),
                participant,
                spec,
                sequence,
                annotation,
            });
        }
    }
    Ok(out)
}

/// Three templated descriptions of a synthetic instance, standing in for
/// annotator text.
pub fn synthetic_descriptions(action: ActionType, patterns: &BTreeSet<PatternId>) -> [String; 3] {
    let name = action.name();
    if patterns.is_empty() {
        return [
            format!("The person performs {name} correctly."),
            format!("This individual does {name} with no visible compensation."),
            format!("A clean execution of {name}."),
        ];
    }
    let names: Vec<&str> = patterns.iter().map(|p| p.name()).collect();
    let listed = match names.as_slice() {
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
        [] => unreachable!(),
    };
    [
        format!("The person performs {name} with {listed}."),
        format!("This individual shows {listed} during {name}."),
        format!("During {name}, {listed} can be observed."),
    ]
}
