use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::actions::{ActionType, ACTION_COUNT, ACTION_NAMES};
use crate::error::{Error, Result};

pub const DEFAULT_TASK_PROMPT: &str = "I want you to act as an action interpreter. Given the type of human action and tokens representing the action, please generate a natural language description of the action.";

/// Opening of the condition sentence that follows the task prompt.
pub const CONDITION_LEAD: &str = "The action you need to describe is as following";

/// Descriptions longer than this draw a lint warning.
pub const MAX_DESCRIPTION_WORDS: usize = 25;

/// How instructions are rendered: task prompt, action label table and token
/// spelling. The defaults reproduce the published wording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionTemplate {
    pub task_prompt: String,
    /// Text for action types 1..=25, in order.
    pub labels: Vec<String>,
    pub token_prefix: String,
    pub token_suffix: String,
    /// Tokens must be below this (the codebook size).
    pub vocab_size: usize,
}

impl Default for InstructionTemplate {
    fn default() -> Self {
        Self {
            task_prompt: DEFAULT_TASK_PROMPT.to_string(),
            labels: ACTION_NAMES.iter().map(|s| s.to_string()).collect(),
            token_prefix: "<motion_id_".to_string(),
            token_suffix: ">".to_string(),
            vocab_size: 512,
        }
    }
}

impl InstructionTemplate {
    /// Replace the label table with one read from a JSON array of 25 strings.
    pub fn with_labels_json(mut self, text: &str) -> Result<Self> {
        let labels: Vec<String> = serde_json::from_str(text)?;
        if labels.len() != ACTION_COUNT {
            return Err(Error::validation(format!("label table has {} entries, expected {ACTION_COUNT}", labels.len())));
        }
        if let Some(i) = labels.iter().position(|l| l.trim().is_empty()) {
            return Err(Error::validation(format!("label for action type {} is empty", i + 1)));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn label(&self, action: ActionType) -> &str {
        &self.labels[action.class_index()]
    }

    pub fn render_token(&self, token: usize) -> String {
        format!("{}{token}{}", self.token_prefix, self.token_suffix)
    }

    pub fn render_tokens(&self, tokens: &[usize]) -> Result<String> {
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::validation(format!("token {bad} outside codebook of size {}", self.vocab_size)));
        }
        Ok(tokens.iter().map(|&t| self.render_token(t)).collect::<Vec<_>>().join(" "))
    }

    /// Task prompt, a newline, then the condition sentence. Without an action
    /// type the `type:` clause is left out.
    pub fn instruction(&self, action: Option<ActionType>, tokens: &[usize]) -> Result<String> {
        if tokens.is_empty() {
            return Err(Error::validation("cannot describe an empty token sequence"));
        }
        let rendered = self.render_tokens(tokens)?;
        let condition = match action {
            Some(y) => format!("{CONDITION_LEAD}, type: {}, tokens: {rendered}.", self.label(y)),
            None => format!("{CONDITION_LEAD}, tokens: {rendered}."),
        };
        Ok(format!("{}\n{condition}", self.task_prompt))
    }
}

/// One annotated description of an action instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionLabel {
    pub text: String,
    pub action: ActionType,
    #[serde(default)]
    pub patterns: Vec<u8>,
}

impl DescriptionLabel {
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Prompt pieces and target text for one fine-tuning example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub task_prompt: String,
    pub action_text: Option<String>,
    pub tokens: Vec<usize>,
    pub target: String,
}

/// Serialized fine-tuning record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub input: String,
    pub output: String,
}

/// An action instance with its tokens and annotated descriptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneInstance {
    pub id: String,
    /// `None` exports tokens-only instructions.
    pub action: Option<ActionType>,
    pub tokens: Vec<usize>,
    pub descriptions: Vec<DescriptionLabel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub records: usize,
    pub skipped_empty: usize,
    pub over_length: usize,
}

/// Build the record list: one per non-empty description.
pub fn finetune_records(
    instances: &[FinetuneInstance],
    template: &InstructionTemplate,
) -> Result<(Vec<FinetuneRecord>, ExportSummary)> {
    let mut out = Vec::new();
    let mut summary = ExportSummary::default();
    for inst in instances {
        if inst.descriptions.is_empty() {
            return Err(Error::validation(format!("instance {} has no descriptions", inst.id)));
        }
        let input = template.instruction(inst.action, &inst.tokens)?;
        for (i, d) in inst.descriptions.iter().enumerate() {
            let text = d.text.trim();
            if text.is_empty() {
                log::warn!("instance {}: description {} is empty, skipped", inst.id, i);
                summary.skipped_empty += 1;
                continue;
            }
            if d.word_count() > MAX_DESCRIPTION_WORDS {
                log::warn!(
                    "instance {}: description {} has {} words (over {MAX_DESCRIPTION_WORDS})",
                    inst.id,
                    i,
                    d.word_count()
                );
                summary.over_length += 1;
            }
            out.push(FinetuneRecord { input: input.clone(), output: text.to_string() });
        }
    }
    summary.records = out.len();
    Ok((out, summary))
}

/// Write the fine-tuning set as JSON lines `{"input", "output"}`.
pub fn export_finetune_dataset(
    instances: &[FinetuneInstance],
    template: &InstructionTemplate,
    w: &mut impl Write,
) -> Result<ExportSummary> {
    let (records, summary) = finetune_records(instances, template)?;
    crate::jsonl::to_writer(w, &records)?;
    Ok(summary)
}

impl InstructionPair {
    pub fn new(template: &InstructionTemplate, action: Option<ActionType>, tokens: Vec<usize>, target: String) -> Self {
        Self {
            task_prompt: template.task_prompt.clone(),
            action_text: action.map(|y| template.label(y).to_string()),
            tokens,
            target,
        }
    }

    /// Render with the token spelling of `template` but this pair's own task
    /// prompt and action text.
    pub fn to_record(&self, template: &InstructionTemplate) -> Result<FinetuneRecord> {
        if self.tokens.is_empty() {
            return Err(Error::validation("cannot describe an empty token sequence"));
        }
        let rendered = template.render_tokens(&self.tokens)?;
        let condition = match &self.action_text {
            Some(y) => format!("{CONDITION_LEAD}, type: {y}, tokens: {rendered}."),
            None => format!("{CONDITION_LEAD}, tokens: {rendered}."),
        };
        Ok(FinetuneRecord { input: format!("{}\n{condition}", self.task_prompt), output: self.target.clone() })
    }
}
