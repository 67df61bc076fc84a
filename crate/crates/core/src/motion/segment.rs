use super::{Annotation, MotionSequence};
use crate::error::{Error, Result};

/// Instances up to this long are passed through unchanged.
pub const MAX_PASSTHROUGH_SECS: f64 = 20.0;
/// Longer instances are cut into non-overlapping windows of this length.
pub const SPLIT_WINDOW_SECS: f64 = 15.0;
/// A trailing remainder shorter than this is dropped.
pub const MIN_REMAINDER_SECS: f64 = 2.0;

/// Cut one sub-sequence per annotation. Annotations longer than 20 s are
/// split into 15 s windows. The returned annotations keep onset/offset in the
/// frame indices of the source sequence.
pub fn segment_instances(
    seq: &MotionSequence,
    anns: &[Annotation],
) -> Result<Vec<(MotionSequence, Annotation)>> {
    let mut sorted: Vec<&Annotation> = anns.iter().collect();
    sorted.sort_by_key(|a| a.onset);
    for a in &sorted {
        if a.onset >= a.offset || a.offset > seq.len() {
            return Err(Error::validation(format!(
                "annotation {}..{} outside sequence of {} frames",
                a.onset,
                a.offset,
                seq.len()
            )));
        }
    }
    for w in sorted.windows(2) {
        if w[1].onset < w[0].offset {
            return Err(Error::validation(format!(
                "annotations {}..{} and {}..{} overlap",
                w[0].onset, w[0].offset, w[1].onset, w[1].offset
            )));
        }
    }

    let rate = seq.sample_rate();
    let window = (SPLIT_WINDOW_SECS * rate).round() as usize;
    let min_remainder = (MIN_REMAINDER_SECS * rate).round() as usize;
    let mut out = Vec::new();
    for a in anns {
        if a.len() as f64 / rate <= MAX_PASSTHROUGH_SECS {
            out.push((seq.slice(a.onset, a.offset)?, a.clone()));
            continue;
        }
        let mut start = a.onset;
        while start < a.offset {
            let end = (start + window).min(a.offset);
            if end - start == window || end - start >= min_remainder {
                let piece = Annotation { onset: start, offset: end, ..a.clone() };
                out.push((seq.slice(start, end)?, piece));
            }
            start = end;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ActionType;
    use crate::motion::test_util::rest_pose;
    use crate::motion::Vec3;

    fn still(frames: usize) -> MotionSequence {
        MotionSequence::from_positions(vec![rest_pose(Vec3::zeros()); frames], 60.0).unwrap()
    }

    fn ann(onset: usize, offset: usize) -> Annotation {
        Annotation { action_type: ActionType::new(1).unwrap(), pattern_indices: Default::default(), onset, offset }
    }

    fn durations(out: &[(MotionSequence, Annotation)]) -> Vec<f64> {
        out.iter().map(|(s, _)| s.duration()).collect()
    }

    #[test]
    fn short_instance_passes_through() {
        let out = segment_instances(&still(700), &[ann(50, 650)]).unwrap();
        assert_eq!(durations(&out), vec![10.0]);
        assert_eq!(out[0].1, ann(50, 650));
    }

    #[test]
    fn twenty_seconds_is_not_split() {
        let out = segment_instances(&still(1200), &[ann(0, 1200)]).unwrap();
        assert_eq!(durations(&out), vec![20.0]);
    }

    #[test]
    fn forty_five_seconds_gives_three_windows() {
        let out = segment_instances(&still(2700), &[ann(0, 2700)]).unwrap();
        assert_eq!(durations(&out), vec![15.0, 15.0, 15.0]);
        assert_eq!((out[2].1.onset, out[2].1.offset), (1800, 2700));
    }

    #[test]
    fn short_remainder_is_dropped() {
        let out = segment_instances(&still(1860), &[ann(0, 1860)]).unwrap();
        assert_eq!(durations(&out), vec![15.0, 15.0]);
    }

    #[test]
    fn long_remainder_is_kept() {
        // 33 s: two windows plus a 3 s tail
        let out = segment_instances(&still(1980), &[ann(0, 1980)]).unwrap();
        assert_eq!(durations(&out), vec![15.0, 15.0, 3.0]);
    }

    #[test]
    fn overlap_and_bounds_are_rejected() {
        let seq = still(600);
        assert!(segment_instances(&seq, &[ann(0, 300), ann(299, 500)]).is_err());
        assert!(segment_instances(&seq, &[ann(0, 601)]).is_err());
        assert!(segment_instances(&seq, &[ann(10, 10)]).is_err());
        assert_eq!(segment_instances(&seq, &[ann(300, 600), ann(0, 300)]).unwrap().len(), 2);
    }

    #[test]
    fn output_durations_respect_the_window_rule() {
        for total in [120usize, 1199, 1201, 1500, 2000, 3000, 4321] {
            let out = segment_instances(&still(total), &[ann(0, total)]).unwrap();
            for d in durations(&out) {
                if total as f64 / 60.0 <= MAX_PASSTHROUGH_SECS {
                    assert!(d <= MAX_PASSTHROUGH_SECS);
                } else {
                    assert!((MIN_REMAINDER_SECS..=SPLIT_WINDOW_SECS).contains(&d), "{total}: {d}");
                }
            }
        }
    }
}
