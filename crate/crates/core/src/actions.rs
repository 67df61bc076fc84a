//! Action types, movement patterns and the per-action candidate pattern map.
//!
//! The 25 action names and their candidate pattern lists are shipped as data.
//! Pattern names follow the clinical reference table (33 patterns); the
//! candidate map is illustrative and can be replaced without code changes by
//! loading a JSON file with [`ActionCatalog::from_json`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ACTION_COUNT: usize = 25;
pub const PATTERN_COUNT: usize = 33;

/// Action type, 1-based (1..=25).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ActionType(u8);

impl ActionType {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=ACTION_COUNT as u8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::validation(format!("action type {value} outside 1..={ACTION_COUNT}")))
        }
    }

    /// From a 0-based class index as used by the classifier.
    pub fn from_class_index(index: usize) -> Result<Self> {
        if index >= ACTION_COUNT {
            return Err(Error::validation(format!("class index {index} outside 0..{ACTION_COUNT}")));
        }
        Self::new(index as u8 + 1)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn class_index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = ActionType> {
        (1..=ACTION_COUNT as u8).map(ActionType)
    }

    pub fn name(self) -> &'static str {
        ACTION_NAMES[self.class_index()]
    }

    /// Short identifier used on the command line (`side_bend`, ...).
    pub fn slug(self) -> &'static str {
        ACTION_SLUGS[self.class_index()]
    }

    pub fn from_slug(slug: &str) -> Option<Self> {
        ACTION_SLUGS.iter().position(|s| *s == slug).map(|i| ActionType(i as u8 + 1))
    }
}

impl TryFrom<u8> for ActionType {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        ActionType::new(v)
    }
}

impl From<ActionType> for u8 {
    fn from(a: ActionType) -> u8 {
        a.0
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Movement pattern index, 1-based (1..=33).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PatternId(u8);

impl PatternId {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=PATTERN_COUNT as u8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::validation(format!("movement pattern {value} outside 1..={PATTERN_COUNT}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        PATTERN_NAMES[self.0 as usize - 1]
    }
}

impl TryFrom<u8> for PatternId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        PatternId::new(v)
    }
}

impl From<PatternId> for u8 {
    fn from(p: PatternId) -> u8 {
        p.0
    }
}

pub const ACTION_NAMES: [&str; ACTION_COUNT] = [
    "sweeping the floor",
    "carrying a heavy object",
    "picking up an object from the floor",
    "sitting down on a chair",
    "sitting down on a sofa",
    "standing up from a chair",
    "lying down on the bed",
    "getting up from the bed",
    "walking",
    "heel walking",
    "heel-to-toe walking",
    "hand lift in kneeling position",
    "leg lift in kneeling position",
    "shoulder wrap",
    "left-leg lift in standing position",
    "right-leg lift in standing position",
    "side bend",
    "chest fly",
    "alternating toe touch",
    "squat",
    "bridge",
    "lunge",
    "standing trunk rotation",
    "head lift in supine position",
    "prone back extension",
];

pub const ACTION_SLUGS: [&str; ACTION_COUNT] = [
    "sweep",
    "carry",
    "pick_up",
    "sit_chair",
    "sit_sofa",
    "stand_up",
    "lie_down",
    "get_up",
    "walk",
    "heel_walk",
    "heel_toe_walk",
    "kneel_hand_lift",
    "kneel_leg_lift",
    "shoulder_wrap",
    "left_leg_lift",
    "right_leg_lift",
    "side_bend",
    "chest_fly",
    "toe_touch",
    "squat",
    "bridge",
    "lunge",
    "trunk_rotation",
    "head_lift",
    "back_extension",
];

pub const PATTERN_NAMES: [&str; PATTERN_COUNT] = [
    "lumbar flexion/extension",
    "lumbar hyperextension after lifting heavy objects",
    "getting up directly from / lying down directly into a supine position",
    "trunk rotation",
    "hip lateral shift",
    "spinal extension",
    "cervical lateral flexion compensation",
    "on tiptoes/pelvic tilt",
    "no trunk activity",
    "knee flexion compensation",
    "lumbar hyperextension/pelvic anterior tilt",
    "lumbar hyperextension/swayback",
    "trunk deviation from midline/trunk lateral shift",
    "hip hyperflexion",
    "upper chest depression",
    "hip tilt",
    "lumbar lateral flexion",
    "trunk flexion",
    "excessive anterior knee displacement",
    "upright trunk squat",
    "excessive hip and knee flexion angle/too deep squat",
    "shallow squat",
    "uneven bilateral loading",
    "thoracic hyperextension compensating for shoulder joint movement",
    "insufficient ankle dorsiflexion",
    "trunk anterior lean",
    "incorrect walking pattern",
    "lumbar lift off the bed",
    "same-side hand and foot movement",
    "head not touching the ground",
    "thigh not perpendicular to the floor",
    "calf not parallel to the bed surface/calf dangling",
    "hip hyperextension leading to lumbar hyperextension",
];

const DEFAULT_CANDIDATES: [&[u8]; ACTION_COUNT] = [
    &[1, 4, 10, 18],
    &[1, 2, 13, 23],
    &[1, 2, 10, 18],
    &[1, 18, 26],
    &[1, 18, 26],
    &[1, 13, 18, 26],
    &[3, 4],
    &[3, 4],
    &[13, 27, 29],
    &[8, 25, 27],
    &[5, 13, 27],
    &[4, 12, 13, 31],
    &[4, 12, 14, 33],
    &[11, 15, 24],
    &[5, 9, 13, 16],
    &[5, 9, 13, 16],
    &[4, 5, 7, 10, 17],
    &[11, 15, 24],
    &[1, 4, 10],
    &[8, 19, 20, 21, 22],
    &[28, 32, 33],
    &[13, 19, 31],
    &[5, 9, 13],
    &[6, 28, 30],
    &[6, 12, 33],
];

/// Which movement patterns may be annotated for each action type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCatalog {
    candidates: Vec<BTreeSet<PatternId>>,
}

impl ActionCatalog {
    pub fn candidates(&self, action: ActionType) -> &BTreeSet<PatternId> {
        &self.candidates[action.class_index()]
    }

    pub fn check(&self, action: ActionType, patterns: &BTreeSet<PatternId>) -> Result<()> {
        let allowed = self.candidates(action);
        match patterns.iter().find(|p| !allowed.contains(p)) {
            Some(p) => Err(Error::validation(format!(
                "pattern {} ({}) is not a candidate for action {} ({})",
                p.get(),
                p.name(),
                action.get(),
                action.name()
            ))),
            None => Ok(()),
        }
    }

    /// Load a candidate map: a JSON object `{"1": [1, 4], ...}` keyed by action type.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: std::collections::BTreeMap<u8, Vec<u8>> = serde_json::from_str(text)?;
        let mut candidates = vec![BTreeSet::new(); ACTION_COUNT];
        for (action, patterns) in raw {
            let action = ActionType::new(action)?;
            for p in patterns {
                candidates[action.class_index()].insert(PatternId::new(p)?);
            }
        }
        Ok(Self { candidates })
    }
}

impl Default for ActionCatalog {
    fn default() -> Self {
        let candidates = DEFAULT_CANDIDATES
            .iter()
            .map(|ps| ps.iter().map(|&p| PatternId(p)).collect())
            .collect();
        Self { candidates }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_range_is_enforced() {
        assert!(ActionType::new(0).is_err());
        assert!(ActionType::new(26).is_err());
        assert_eq!(ActionType::new(25).unwrap().class_index(), 24);
        assert_eq!(ActionType::all().count(), ACTION_COUNT);
    }

    #[test]
    fn slugs_round_trip() {
        for a in ActionType::all() {
            assert_eq!(ActionType::from_slug(a.slug()), Some(a));
        }
    }

    #[test]
    fn default_catalog_accepts_listed_and_rejects_others() {
        let cat = ActionCatalog::default();
        let side_bend = ActionType::from_slug("side_bend").unwrap();
        let ok: BTreeSet<_> = [PatternId::new(10).unwrap()].into();
        assert!(cat.check(side_bend, &ok).is_ok());
        let bad: BTreeSet<_> = [PatternId::new(30).unwrap()].into();
        assert!(cat.check(side_bend, &bad).is_err());
    }

    #[test]
    fn catalog_loads_from_json() {
        let cat = ActionCatalog::from_json(r#"{"1": [1, 2], "25": [33]}"#).unwrap();
        assert_eq!(cat.candidates(ActionType::new(1).unwrap()).len(), 2);
        assert!(cat.candidates(ActionType::new(2).unwrap()).is_empty());
        assert!(ActionCatalog::from_json(r#"{"26": [1]}"#).is_err());
    }
}
