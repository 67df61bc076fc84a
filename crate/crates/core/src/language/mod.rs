//! From tokens to text: instruction prompts for a description model, the
//! fine-tuning export, the feedback knowledge base, feedback prompts and a
//! chat-completion client.

mod client;
mod feedback;
mod instruction;

pub use client::{mock_reply, LlmClient, LlmConfig, DEFAULT_API_KEY_ENV, DEFAULT_TIMEOUT};
pub use feedback::{assemble_feedback_prompt, KnowledgeBase, KnowledgeEntry, Role, UserProfile};
pub use instruction::{
    export_finetune_dataset, finetune_records, DescriptionLabel, ExportSummary, FinetuneInstance, FinetuneRecord,
    InstructionPair, InstructionTemplate, CONDITION_LEAD, DEFAULT_TASK_PROMPT, MAX_DESCRIPTION_WORDS,
};
