//! System prompts shipped as resource files.

/// System prompt for caption rewriting.
pub const REWRITER_SYSTEM_PROMPT: &str = include_str!("../../resources/prompts/rewriter_system.txt");

/// System prompt for the rejection-sampling judge.
pub const REJECTION_SYSTEM_PROMPT: &str = include_str!("../../resources/prompts/rejection_system.txt");
