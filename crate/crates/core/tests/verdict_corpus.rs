//! Replays the verdict-parsing corpus: each `caseNN_*.txt` is raw judge
//! output, and the matching `.json` file records exactly what the parser
//! must produce — a verdict plus warnings, or a specific error code.

use judgekit_core::model::Verdict;
use judgekit_core::verdict::{parse_llm_output, RangeHandling, ValidationPolicy};
use serde_json::Value;
use std::fs;
use std::path::PathBuf;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/verdict_corpus")
}

#[test]
fn corpus_round_trip() {
    let mut names: Vec<String> = fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            name.strip_suffix(".txt").map(str::to_string)
        })
        .collect();
    names.sort();
    assert_eq!(names.len(), 28, "corpus should hold 28 cases");

    for name in names {
        let input = fs::read_to_string(corpus_dir().join(format!("{name}.txt"))).unwrap();
        let expected: Value =
            serde_json::from_str(&fs::read_to_string(corpus_dir().join(format!("{name}.json"))).unwrap())
                .unwrap();

        let policy = match expected.get("policy").and_then(Value::as_str) {
            Some("reject") => ValidationPolicy {
                range_handling: RangeHandling::Reject,
                ..ValidationPolicy::default()
            },
            _ => ValidationPolicy::default(),
        };

        let outcome = parse_llm_output(&input, &policy);
        match expected["expect"].as_str().unwrap() {
            "verdict" => {
                let parsed = outcome.unwrap_or_else(|e| panic!("{name}: unexpected error {e}"));
                let want: Verdict = serde_json::from_value(expected["verdict"].clone()).unwrap();
                assert_eq!(parsed.verdict, want, "{name}: verdict mismatch");

                let mut got_warnings: Vec<String> =
                    parsed.warnings.iter().map(|w| w.code()).collect();
                got_warnings.sort();
                let mut want_warnings: Vec<String> = expected
                    .get("warnings")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().map(|v| v.as_str().unwrap().to_string()).collect())
                    .unwrap_or_default();
                want_warnings.sort();
                assert_eq!(got_warnings, want_warnings, "{name}: warning mismatch");
            }
            "error" => {
                let err = outcome.expect_err(&format!("{name}: expected an error"));
                assert_eq!(
                    err.to_string(),
                    expected["error"].as_str().unwrap(),
                    "{name}: error code mismatch"
                );
            }
            other => panic!("{name}: unknown expectation kind {other}"),
        }
    }
}
