use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actions::{ActionType, ACTION_COUNT};
use crate::error::{Error, Result};

/// Expert feedback for one action type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub action_type: u8,
    pub low_demand: String,
    pub high_demand: String,
}

/// Feedback entries indexed by action type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    entries: BTreeMap<u8, KnowledgeEntry>,
}

const SEED_JSONL: &str = include_str!("../../data/knowledge_seed.jsonl");

impl KnowledgeBase {
    pub fn from_entries(entries: impl IntoIterator<Item = KnowledgeEntry>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in entries {
            ActionType::new(e.action_type)?;
            if e.low_demand.trim().is_empty() || e.high_demand.trim().is_empty() {
                return Err(Error::validation(format!("knowledge for action type {} has an empty field", e.action_type)));
            }
            let key = e.action_type;
            if map.insert(key, e).is_some() {
                return Err(Error::validation(format!("duplicate knowledge entry for action type {key}")));
            }
        }
        Ok(Self { entries: map })
    }

    pub fn from_jsonl_str(text: &str, origin: &Path) -> Result<Self> {
        Self::from_entries(crate::jsonl::from_reader::<KnowledgeEntry>(text.as_bytes(), origin)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_entries(crate::jsonl::read::<KnowledgeEntry>(path)?)
    }

    /// The bundled illustrative base: one entry per action type, written for
    /// testing and demonstration, not clinical advice.
    pub fn seed() -> Self {
        Self::from_jsonl_str(SEED_JSONL, Path::new("knowledge_seed.jsonl")).expect("bundled knowledge base is valid")
    }

    pub fn seed_jsonl() -> &'static str {
        SEED_JSONL
    }

    pub fn retrieve(&self, action: ActionType) -> Result<&KnowledgeEntry> {
        self.entries.get(&action.get()).ok_or(Error::KnowledgeNotFound(action.get()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every action type has an entry.
    pub fn is_complete(&self) -> bool {
        self.entries.len() == ACTION_COUNT
    }

    pub fn entries(&self) -> impl Iterator<Item = &KnowledgeEntry> {
        self.entries.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Physiotherapist,
    FitnessCoach,
}

impl Role {
    pub fn title(self) -> &'static str {
        match self {
            Role::Physiotherapist => "physiotherapist",
            Role::FitnessCoach => "fitness coach",
        }
    }
}

/// Who the feedback is for. `role` is the persona the model adopts:
/// physiotherapist for patients, fitness coach for healthy users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub age: u32,
    /// Self-reported pain, 0..=10.
    pub pain: u8,
    /// Timed-Up-and-Go, seconds.
    pub tug: f64,
    pub role: Role,
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        if self.age == 0 || self.age > 130 {
            return Err(Error::validation(format!("age {} outside 1..=130", self.age)));
        }
        if self.pain > 10 {
            return Err(Error::validation(format!("pain score {} outside 0..=10", self.pain)));
        }
        if !(self.tug.is_finite() && self.tug > 0.0) {
            return Err(Error::validation(format!("TUG time {} must be a positive number of seconds", self.tug)));
        }
        Ok(())
    }

    /// `(age: 32, reported pain score: 4 (0-10), Time-Up-and-Go score: 12 seconds)`
    pub fn describe(&self) -> String {
        format!(
            "(age: {}, reported pain score: {} (0-10), Time-Up-and-Go score: {} seconds)",
            self.age, self.pain, self.tug
        )
    }
}

/// Build the feedback prompt. With `knowledge` absent the preamble no longer
/// announces a knowledge block and none is emitted.
pub fn assemble_feedback_prompt(
    profile: &UserProfile,
    knowledge: Option<&KnowledgeEntry>,
    description: &str,
) -> Result<String> {
    profile.validate()?;
    let description = description.trim();
    if description.is_empty() {
        return Err(Error::validation("action description is empty"));
    }
    let role = profile.role.title();
    let mut out = format!("You are now a {role} to support the daily functioning and exercise of a person. ");
    match knowledge {
        Some(_) => out.push_str(
            "In the following, you will receive the <knowledge> specifying the pre-defined low-demand and high-demand feedbacks for the action, ",
        ),
        None => out.push_str("In the following, you will receive the "),
    }
    out.push_str(
        "<user profile> indicating the age, self-reported pain score (0-10), and Timed-Up-and-Go (TUG) score, \
         <action description> detailing the action type and movement patterns of the person. \
         You need to return the <instant feedback> in a vivid tongue.\n\n",
    );
    if let Some(k) = knowledge {
        out.push_str(&format!(
            "<knowledge>\nlow-demand: {}\nhigh-demand: {}\n</knowledge>\n",
            k.low_demand.trim(),
            k.high_demand.trim()
        ));
    }
    out.push_str(&format!("<user profile>\n{}\n</user profile>\n", profile.describe()));
    out.push_str(&format!("<action description>\n{description}\n</action description>\n"));
    out.push_str("<instant feedback>\n");
    Ok(out)
}
