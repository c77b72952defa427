//! Prompt rendering for the four generation strategies.
//!
//! | strategy     | layout                                                  |
//! |--------------|---------------------------------------------------------|
//! | `image_only` | instruction                                             |
//! | `concepts`   | instruction, keyword section                            |
//! | `rag`        | instruction, findings section                           |
//! | `cemrag`     | task, keyword section, findings section, final instruction |
//!
//! Sections are separated by one blank line. The keyword section is
//! `KEYWORDS:` followed by one `- term` line per keyword; the findings
//! section numbers each retrieved report as `FINDINGS i:` and separates
//! consecutive reports with a `---` line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::ConceptSet;

pub const INSTRUCTION: &str = "Provide a description of the findings in the radiology image";
pub const TASK: &str = "Write the report of the radiology image taking information from similar FINDINGS. \
Consider as more relevant sentences that contain any of the KEYWORDS in the FINDINGS";
pub const FINAL_INSTRUCTION: &str = "Write a paragraph with only the report relying in detail on the FINDINGS";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("strategy {strategy} requires {field}")]
    MissingField { strategy: Strategy, field: &'static str },
    #[error("strategy {strategy} does not accept {field}")]
    ForbiddenField { strategy: Strategy, field: &'static str },
    #[error("strategy concepts needs at least one keyword")]
    EmptyKeywords,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ImageOnly,
    Concepts,
    Rag,
    Cemrag,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::ImageOnly, Strategy::Concepts, Strategy::Rag, Strategy::Cemrag];

    pub fn uses_concepts(self) -> bool {
        matches!(self, Strategy::Concepts | Strategy::Cemrag)
    }

    pub fn uses_retrieval(self) -> bool {
        matches!(self, Strategy::Rag | Strategy::Cemrag)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::ImageOnly => "image_only",
            Strategy::Concepts => "concepts",
            Strategy::Rag => "rag",
            Strategy::Cemrag => "cemrag",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| PromptError::UnknownStrategy(s.to_string()))
    }
}

/// Instruction sentences; any key missing from an override file keeps its
/// default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Templates {
    pub instruction: String,
    pub task: String,
    pub final_instruction: String,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            instruction: INSTRUCTION.to_string(),
            task: TASK.to_string(),
            final_instruction: FINAL_INSTRUCTION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub strategy: Strategy,
    pub keywords: Option<ConceptSet>,
    pub retrieved_reports: Option<Vec<String>>,
    pub templates: Templates,
}

impl PromptSpec {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            keywords: None,
            retrieved_reports: None,
            templates: Templates::default(),
        }
    }

    pub fn with_keywords(mut self, keywords: ConceptSet) -> Self {
        self.keywords = Some(keywords);
        self
    }

    pub fn with_reports(mut self, reports: Vec<String>) -> Self {
        self.retrieved_reports = Some(reports);
        self
    }

    pub fn with_templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    /// Set when a `cemrag` prompt had no keywords and was rendered with the
    /// `rag` layout instead.
    pub degraded: bool,
}

pub fn build_prompt(spec: &PromptSpec) -> Result<Prompt, PromptError> {
    let strategy = spec.strategy;
    let missing = |field| PromptError::MissingField { strategy, field };
    let forbidden = |field| PromptError::ForbiddenField { strategy, field };

    let keywords = match (strategy.uses_concepts(), &spec.keywords) {
        (true, None) => return Err(missing("keywords")),
        (false, Some(_)) => return Err(forbidden("keywords")),
        (_, k) => k.as_ref(),
    };
    let reports = match (strategy.uses_retrieval(), &spec.retrieved_reports) {
        (true, None) => return Err(missing("retrieved_reports")),
        (true, Some(r)) if r.is_empty() => return Err(missing("retrieved_reports")),
        (false, Some(_)) => return Err(forbidden("retrieved_reports")),
        (_, r) => r.as_deref(),
    };

    let t = &spec.templates;
    let (text, degraded) = match (strategy, keywords, reports) {
        (Strategy::ImageOnly, _, _) => (t.instruction.clone(), false),
        (Strategy::Concepts, Some(k), _) => {
            if k.is_empty() {
                return Err(PromptError::EmptyKeywords);
            }
            (format!("{}\n\n{}", t.instruction, keyword_section(k)), false)
        }
        (Strategy::Rag, _, Some(r)) => (format!("{}\n\n{}", t.instruction, findings_section(r)), false),
        (Strategy::Cemrag, Some(k), Some(r)) if k.is_empty() => {
            log::warn!("no active concepts; cemrag prompt rendered with the rag layout");
            (format!("{}\n\n{}", t.instruction, findings_section(r)), true)
        }
        (Strategy::Cemrag, Some(k), Some(r)) => (
            format!(
                "{}\n\n{}\n{}\n{}",
                t.task,
                keyword_section(k),
                findings_section(r),
                t.final_instruction
            ),
            false,
        ),
        _ => unreachable!("required fields checked above"),
    };
    Ok(Prompt { text, degraded })
}

fn keyword_section(k: &ConceptSet) -> String {
    let mut s = String::from("KEYWORDS:\n");
    for term in k.terms() {
        s.push_str("- ");
        s.push_str(term);
        s.push('\n');
    }
    s
}

fn findings_section(reports: &[String]) -> String {
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| format!("FINDINGS {}:\n{}\n", i + 1, r))
        .collect::<Vec<_>>()
        .join("---\n")
}
