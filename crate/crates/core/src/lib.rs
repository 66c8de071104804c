//! Harness for judging AI-generated responses against gold-standard
//! responses with an LLM judge.
//!
//! The pipeline renders a judging prompt per record, collects the judge's
//! JSON verdict, turns it into a pass/fail decision under a configurable
//! policy, and scores whole runs against human labels (human alignment
//! rate). A statistics layer compares score distributions across judge
//! models with a one-way ANOVA and Tukey HSD pairwise tests, both computed
//! from first principles.

pub mod dataset;
pub mod gateway;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod report;
pub mod stats;
pub mod verdict;

pub use model::{
    DecisionPolicy, EvalRecord, JudgedRecord, PromptKind, RunResult, Verdict, VerdictOutcome,
};
