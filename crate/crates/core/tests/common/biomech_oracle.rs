//! Straight transcription of the biomechanical feature definitions, used as an
//! independent oracle for the optimized extractor.

use kinetext::motion::PoseFrame;
use kinetext::skeleton::JointId;

type P = [f64; 3];

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dist(a: P, b: P) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn angle_between(u: P, v: P) -> f64 {
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot)
}

/// Straight transcription of the balance, angle, line-angle, distance and
/// ratio definitions, looking joints up by name.
pub fn naive(frame: &PoseFrame) -> Vec<f64> {
    let j = |name: &str| -> P {
        let p = frame.joint(JointId::from_name(name).unwrap());
        [p.x, p.y, p.z]
    };
    let d = |a: &str, b: &str| dist(j(a), j(b));
    let ang3 = |a: &str, b: &str, c: &str| angle_between(sub(j(b), j(a)), sub(j(c), j(b)));
    let ang4 = |a: &str, b: &str, c: &str, e: &str| angle_between(sub(j(b), j(a)), sub(j(e), j(c)));

    let mut v = vec![
        d("left_forearm", "spine2") - d("right_forearm", "spine2"),
        d("left_foot", "hip") - d("right_foot", "hip") + d("left_leg", "hip") - d("right_leg", "hip"),
        ang3("left_shoulder", "spine2", "spine1"),
        ang3("right_shoulder", "spine2", "spine1"),
        ang3("spine2", "spine1", "spine"),
        ang3("spine1", "spine", "hip"),
        ang3("spine1", "hip", "left_upperleg"),
        ang3("spine1", "hip", "right_upperleg"),
        ang3("spine1", "hip", "left_leg"),
        ang3("spine1", "hip", "right_leg"),
        ang3("left_upperleg", "left_leg", "left_foot"),
        ang3("right_upperleg", "right_leg", "right_foot"),
        ang3("left_shoulder", "spine2", "hip"),
        ang3("right_shoulder", "spine2", "hip"),
        ang3("left_shoulder", "hip", "right_shoulder"),
        ang3("left_leg", "left_foot", "left_foot_end"),
        ang3("right_leg", "right_foot", "right_foot_end"),
        ang4("left_shoulder", "right_shoulder", "left_upperleg", "right_upperleg"),
    ];
    let ijd = [
        d("left_shoulder", "hip"),
        d("right_shoulder", "hip"),
        d("hip", "left_foot"),
        d("hip", "right_foot"),
        d("left_forearm", "left_leg"),
        d("left_forearm", "right_leg"),
        d("right_forearm", "left_leg"),
        d("right_forearm", "right_leg"),
    ];
    v.extend_from_slice(&ijd);
    v.push(d("left_forearm", "right_leg") / d("left_forearm", "left_leg"));
    v.push(d("right_forearm", "left_leg") / d("right_forearm", "right_leg"));
    v
}
