#[path = "common/biomech_oracle.rs"]
mod biomech_oracle;

use std::time::Instant;

use kinetext::features::{biomech_features, extract, FEATURE_DIM};
use kinetext::motion::{MotionSequence, PoseFrame, Vec3};
use kinetext::skeleton::JOINT_COUNT;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_positions(rng: &mut impl Rng) -> [Vec3; JOINT_COUNT] {
    let mut p = [Vec3::zeros(); JOINT_COUNT];
    for q in p.iter_mut() {
        *q = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0));
    }
    p
}

#[test]
fn biomech_matches_naive_transcription_on_1000_random_poses() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let frame = PoseFrame::new(random_positions(&mut rng), 0.0);
        let fast = biomech_features(&frame);
        let slow = biomech_oracle::naive(&frame);
        assert!(!fast.degenerate);
        assert_eq!(slow.len(), 28);
        for (k, (a, b)) in fast.values.iter().zip(&slow).enumerate() {
            assert!((a - b).abs() <= 1e-9, "feature {k}: {a} vs {b}");
        }
    }
}

#[test]
fn extraction_throughput() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frames = 3000;
    let seq = MotionSequence::from_positions((0..frames).map(|_| random_positions(&mut rng)).collect(), 60.0).unwrap();
    let start = Instant::now();
    let m = extract(&seq).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(m.data().dim(), (frames, FEATURE_DIM));
    let rate = frames as f64 / secs;
    println!("feature extraction: {rate:.0} frames/s");
    assert!(rate >= 900.0, "{rate:.0} frames/s");
}
