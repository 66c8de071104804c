//! Deterministic in-process judge for tests, demos, and offline runs.
//!
//! In its default mode the mock reads the candidate and gold responses back
//! out of the rendered prompt and acts as an exact-match judge: identical
//! responses earn a perfect verdict; any difference is reported as one
//! missed critical fact with a low, input-derived score. The same prompt
//! always yields byte-identical output, which is what makes cached replays
//! and parallelism tests reproducible.

use super::{AttemptError, ChatBackend, JudgeRequest};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::sync::Mutex;

/// One scripted reply for [`MockBackend::scripted`].
#[derive(Debug)]
pub enum MockReply {
    Text(String),
    Error(AttemptError),
}

pub struct MockBackend {
    script: Option<Mutex<VecDeque<MockReply>>>,
}

impl MockBackend {
    /// Exact-match judge mode.
    pub fn new() -> Self {
        MockBackend { script: None }
    }

    /// Replay `replies` in order, one per call; further calls fail. Used to
    /// exercise retry and error paths without a network.
    pub fn scripted(replies: Vec<MockReply>) -> Self {
        MockBackend {
            script: Some(Mutex::new(replies.into())),
        }
    }
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

const AI_MARKER: &str = "AI Response: ";
const GOLD_MARKER: &str = "\n\nGold Response: ";
// Everything after the gold response in the builtin templates starts with
// one of these two lines.
const END_MARKERS: [&str; 2] = [
    "\n\nDoes the AI response match the gold response?",
    "\n\nProvide your evaluation in the following JSON format:",
];

/// Pull `(ai, gold)` back out of a prompt rendered from either builtin
/// template. Returns `None` for templates that moved the markers.
fn extract_pair(prompt: &str) -> Option<(&str, &str)> {
    let ai_start = prompt.find(AI_MARKER)? + AI_MARKER.len();
    let gold_marker_at = prompt[ai_start..].find(GOLD_MARKER)? + ai_start;
    let ai = &prompt[ai_start..gold_marker_at];
    let gold_start = gold_marker_at + GOLD_MARKER.len();
    let gold_end = END_MARKERS
        .iter()
        .filter_map(|m| prompt[gold_start..].find(m))
        .min()?
        + gold_start;
    Some((ai, &prompt[gold_start..gold_end]))
}

fn verdict_json(ai: &str, gold: &str) -> String {
    if ai == gold {
        return concat!(
            "{\n",
            "  \"semantic_similarity\": 1.0,\n",
            "  \"fact_match_ratio\": 1.0,\n",
            "  \"critical_facts_missed\": 0,\n",
            "  \"supporting_facts_missed\": 0,\n",
            "  \"trivial_facts_missed\": 0,\n",
            "  \"final_score\": 1.0,\n",
            "  \"explanation\": \"mock judge: responses are identical\"\n",
            "}"
        )
        .to_string();
    }
    // Derive a stable pseudo-score in [0, 0.40] from the pair so distinct
    // mismatches spread out instead of collapsing onto one value.
    let mut hasher = Sha256::new();
    hasher.update(ai.as_bytes());
    hasher.update([0x1f]);
    hasher.update(gold.as_bytes());
    let digest = hasher.finalize();
    let word = u32::from_be_bytes([digest[0], digest[1], digest[2], digest[3]]);
    let score = f64::from(word % 41) / 100.0;
    let supporting = digest[4] % 2;
    let trivial = digest[5] % 3;
    format!(
        "{{\n  \"semantic_similarity\": {score:.2},\n  \"fact_match_ratio\": {score:.2},\n  \"critical_facts_missed\": 1,\n  \"supporting_facts_missed\": {supporting},\n  \"trivial_facts_missed\": {trivial},\n  \"final_score\": {score:.2},\n  \"explanation\": \"mock judge: responses differ (digest {:02x}{:02x}{:02x}{:02x})\"\n}}",
        digest[0], digest[1], digest[2], digest[3]
    )
}

impl ChatBackend for MockBackend {
    fn send(&self, request: &JudgeRequest) -> Result<String, AttemptError> {
        if let Some(script) = &self.script {
            return match script.lock().unwrap().pop_front() {
                Some(MockReply::Text(text)) => Ok(text),
                Some(MockReply::Error(err)) => Err(err),
                None => Err(AttemptError::Fatal("mock script exhausted".into())),
            };
        }
        match extract_pair(&request.prompt) {
            Some((ai, gold)) => Ok(verdict_json(ai, gold)),
            None => Ok(
                "{\n  \"semantic_similarity\": 0.0,\n  \"fact_match_ratio\": 0.0,\n  \"critical_facts_missed\": 1,\n  \"supporting_facts_missed\": 0,\n  \"trivial_facts_missed\": 0,\n  \"final_score\": 0.0,\n  \"explanation\": \"mock judge: could not locate the response pair in the prompt\"\n}"
                    .to_string(),
            ),
        }
    }
}
