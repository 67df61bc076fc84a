//! Frozen inputs for the prompt and export golden files.

use std::path::{Path, PathBuf};

use kinetext::actions::ActionType;
use kinetext::language::{
    assemble_feedback_prompt, export_finetune_dataset, DescriptionLabel, ExportSummary, FinetuneInstance,
    InstructionTemplate, KnowledgeBase, Role, UserProfile,
};

pub const TOKENS: [usize; 8] = [3, 3, 7, 511, 0, 42, 42, 128];

pub const DESCRIPTION: &str = "This individual compensates for the body side bend with bended knees.";

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}

pub fn side_bend() -> ActionType {
    ActionType::from_slug("side_bend").unwrap()
}

pub fn profile(role: Role) -> UserProfile {
    UserProfile { age: 32, pain: 4, tug: 12.0, role }
}

pub fn conditioned_instruction() -> String {
    InstructionTemplate::default().instruction(Some(side_bend()), &TOKENS).unwrap()
}

pub fn tokens_only_instruction() -> String {
    InstructionTemplate::default().instruction(None, &TOKENS).unwrap()
}

pub fn feedback_with_knowledge() -> String {
    let kb = KnowledgeBase::seed();
    assemble_feedback_prompt(&profile(Role::Physiotherapist), Some(kb.retrieve(side_bend()).unwrap()), DESCRIPTION)
        .unwrap()
}

pub fn feedback_without_knowledge() -> String {
    assemble_feedback_prompt(&profile(Role::Physiotherapist), None, DESCRIPTION).unwrap()
}

pub fn feedback_fitness_coach() -> String {
    let kb = KnowledgeBase::seed();
    let squat = ActionType::from_slug("squat").unwrap();
    assemble_feedback_prompt(
        &UserProfile { age: 27, pain: 0, tug: 7.5, role: Role::FitnessCoach },
        Some(kb.retrieve(squat).unwrap()),
        "The person squats too deep with the knees passing the toes.",
    )
    .unwrap()
}

/// Ten instances with three descriptions each.
pub fn export_instances() -> Vec<FinetuneInstance> {
    (0..10u8)
        .map(|i| {
            let y = ActionType::new(i + 1).unwrap();
            FinetuneInstance {
                id: format!("inst{i}"),
                action: Some(y),
                tokens: vec![i as usize, 2 * i as usize + 1],
                descriptions: (0..3)
                    .map(|k| DescriptionLabel { text: format!("Description {k} of {}.", y.name()), action: y, patterns: vec![] })
                    .collect(),
            }
        })
        .collect()
}

pub fn export_text() -> (ExportSummary, String) {
    let mut buf = Vec::new();
    let summary = export_finetune_dataset(&export_instances(), &InstructionTemplate::default(), &mut buf).unwrap();
    (summary, String::from_utf8(buf).unwrap())
}

pub fn export_first_instance() -> String {
    export_text().1.lines().take(3).map(|l| format!("{l}\n")).collect()
}

/// Every golden file with its freshly rendered content.
pub fn golden_cases() -> Vec<(&'static str, String)> {
    vec![
        ("instruction_conditioned.txt", conditioned_instruction()),
        ("instruction_tokens_only.txt", tokens_only_instruction()),
        ("feedback_knowledge.txt", feedback_with_knowledge()),
        ("feedback_no_knowledge.txt", feedback_without_knowledge()),
        ("feedback_coach.txt", feedback_fitness_coach()),
        ("export_first_instance.jsonl", export_first_instance()),
    ]
}
