//! Per-frame feature extraction: 287 baseline columns followed by 28
//! biomechanical columns (315 in total), plus training-set statistics for
//! Z-normalisation.

mod baseline;
mod biomech;
mod stats;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::motion::io::{read_matrix, write_matrix, FEATURE_MAGIC};
use crate::motion::MotionSequence;

pub use baseline::{baseline_features, ContactThresholds, BASELINE_DIM, CONTACT_JOINTS};
pub use biomech::{
    biomech_features, vector_angle, BiomechFeatures, BIOMECH_DIM, IJA_LEFT_KNEE, IJA_RIGHT_KNEE, IJA_TRIPLES,
    IJD_PAIRS, IJR_RATIOS, ILA_JOINTS,
};
pub use stats::{apply_z, fit_stats, FeatureStats, STD_FLOOR};

pub const FEATURE_DIM: usize = BASELINE_DIM + BIOMECH_DIM;
const _: () = assert!(FEATURE_DIM == 315);

/// Named column ranges of a feature row.
pub const LAYOUT: [(&str, Range<usize>); 11] = [
    ("root", 0..4),
    ("relative_position", 4..73),
    ("rotation_6d", 73..211),
    ("velocity", 211..283),
    ("foot_contact", 283..287),
    ("bb_upper", 287..288),
    ("bb_lower", 288..289),
    ("ija", 289..304),
    ("ila", 304..305),
    ("ijd", 305..313),
    ("ijr", 313..315),
];

pub const BASELINE_RANGE: Range<usize> = 0..BASELINE_DIM;
pub const BIOMECH_RANGE: Range<usize> = BASELINE_DIM..FEATURE_DIM;

/// Column range of a named layout slice.
pub fn layout_range(name: &str) -> Option<Range<usize>> {
    LAYOUT.iter().find(|(n, _)| *n == name).map(|(_, r)| r.clone())
}

/// A `T x 315` feature matrix, one row per source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
    sample_rate: f64,
    degenerate_frames: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>, sample_rate: f64) -> Result<Self> {
        if data.ncols() != FEATURE_DIM {
            return Err(Error::Shape(format!("feature width {} != {FEATURE_DIM}", data.ncols())));
        }
        Ok(Self { data, sample_rate, degenerate_frames: Vec::new() })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Frames whose biomechanical block hit a zero-length vector.
    pub fn degenerate_frames(&self) -> &[usize] {
        &self.degenerate_frames
    }

    pub fn baseline(&self) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., BASELINE_RANGE])
    }

    pub fn biomech(&self) -> ArrayView2<'_, f64> {
        self.data.slice(s![.., BIOMECH_RANGE])
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let rows = self.data.rows().into_iter().map(|r| r.to_vec());
        write_matrix(&mut w, FEATURE_MAGIC, FEATURE_DIM, FEATURE_DIM as u32, self.sample_rate as f32, self.rows(), rows)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, data) = read_matrix(BufReader::new(File::open(path)?), FEATURE_MAGIC, |c| c as usize)?;
        if header.count as usize != FEATURE_DIM {
            return Err(Error::format(format!("{}: feature count {} != {FEATURE_DIM}", path.display(), header.count)));
        }
        let data = Array2::from_shape_vec((header.rows, FEATURE_DIM), data.into_iter().map(f64::from).collect())
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data, header.sample_rate as f64)
    }
}

/// Feature extraction settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeatureExtractor {
    pub contact: ContactThresholds,
}

impl FeatureExtractor {
    /// Baseline and biomechanical features for a preprocessed sequence.
    pub fn extract(&self, seq: &MotionSequence) -> Result<FeatureMatrix> {
        let base = baseline_features(seq, &self.contact)?;
        let mut data = Array2::zeros((seq.len(), FEATURE_DIM));
        data.slice_mut(s![.., BASELINE_RANGE]).assign(&base);
        let mut degenerate_frames = Vec::new();
        for (t, frame) in seq.frames().iter().enumerate() {
            let bio = biomech_features(frame);
            if bio.degenerate {
                degenerate_frames.push(t);
            }
            for (k, v) in bio.values.iter().enumerate() {
                data[(t, BASELINE_DIM + k)] = *v;
            }
        }
        Ok(FeatureMatrix { data, sample_rate: seq.sample_rate(), degenerate_frames })
    }
}

pub fn extract(seq: &MotionSequence) -> Result<FeatureMatrix> {
    FeatureExtractor::default().extract(seq)
}
