use std::path::PathBuf;

use cemrag::prompt::{FINAL_INSTRUCTION, INSTRUCTION, TASK};
use cemrag::solver::Keyword;
use cemrag::{build_prompt, ConceptSet, PromptSpec, Strategy};

fn golden_path(strategy: Strategy) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{strategy}.txt"))
}

fn keywords() -> ConceptSet {
    let terms = [
        ("pleural effusion", 0.42),
        ("cardiac silhouette", 0.31),
        ("pulmonary edema", 0.17),
        ("basilar atelectasis", 0.09),
        ("hilar congestion", 0.04),
    ];
    ConceptSet::new(
        terms
            .iter()
            .map(|(t, c)| Keyword {
                term: t.to_string(),
                coefficient: *c,
            })
            .collect(),
        5,
    )
}

fn reports() -> Vec<String> {
    vec![
        "Small left pleural effusion. Heart size is normal.".into(),
        "Mild pulmonary edema.\nNo pneumothorax.".into(),
        "No acute cardiopulmonary process.".into(),
    ]
}

pub fn spec(strategy: Strategy) -> PromptSpec {
    let spec = PromptSpec::new(strategy);
    let spec = if strategy.uses_concepts() {
        spec.with_keywords(keywords())
    } else {
        spec
    };
    if strategy.uses_retrieval() {
        spec.with_reports(reports())
    } else {
        spec
    }
}

#[test]
fn prompts_match_golden_files() {
    for strategy in Strategy::ALL {
        let prompt = build_prompt(&spec(strategy)).unwrap();
        assert!(!prompt.degraded);
        let path = golden_path(strategy);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &prompt.text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(prompt.text, golden, "{strategy}");
    }
}

#[test]
fn instruction_strings_are_verbatim() {
    assert_eq!(
        INSTRUCTION,
        "Provide a description of the findings in the radiology image"
    );
    let cemrag = build_prompt(&spec(Strategy::Cemrag)).unwrap().text;
    assert!(cemrag.contains(TASK));
    assert!(cemrag.contains(FINAL_INSTRUCTION));
    for s in [Strategy::ImageOnly, Strategy::Concepts, Strategy::Rag] {
        assert!(build_prompt(&spec(s)).unwrap().text.contains(INSTRUCTION));
    }
}
