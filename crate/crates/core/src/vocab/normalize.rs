use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{defaults, VocabError};

/// Stopwords, excluded acronyms and the lemma lookup table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TextNormalizationConfig {
    stopwords: BTreeSet<String>,
    acronym_exclusions: BTreeSet<String>,
    lemma_table: BTreeMap<String, String>,
}

impl Default for TextNormalizationConfig {
    fn default() -> Self {
        Self::new(
            defaults::STOPWORDS.iter().map(|s| s.to_string()),
            defaults::ACRONYMS.iter().map(|s| s.to_string()),
            defaults::LEMMAS.iter().map(|(k, v)| (k.to_string(), v.to_string())),
        )
        .expect("shipped normalisation lists are valid")
    }
}

impl TextNormalizationConfig {
    /// Every entry must be lowercase and every lemma must lemmatize to
    /// itself.
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        acronym_exclusions: impl IntoIterator<Item = String>,
        lemma_table: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, VocabError> {
        let cfg = Self {
            stopwords: stopwords.into_iter().collect(),
            acronym_exclusions: acronym_exclusions.into_iter().collect(),
            lemma_table: lemma_table.into_iter().collect(),
        };
        let all = cfg
            .stopwords
            .iter()
            .chain(&cfg.acronym_exclusions)
            .chain(cfg.lemma_table.keys())
            .chain(cfg.lemma_table.values());
        for entry in all {
            if *entry != entry.to_lowercase() {
                return Err(VocabError::Config(format!("entry {entry:?} is not lowercase")));
            }
        }
        for lemma in cfg.lemma_table.values() {
            if lemma.is_empty() || !lemma.chars().all(char::is_alphanumeric) {
                return Err(VocabError::Config(format!("lemma {lemma:?} is not a single token")));
            }
            let again = cfg.lemmatize(lemma);
            if again != *lemma {
                return Err(VocabError::Config(format!(
                    "lemma {lemma:?} is not a fixed point (maps to {again:?})"
                )));
            }
        }
        Ok(cfg)
    }

    /// No stopwords, no acronyms, empty lemma table (suffix rules still apply).
    pub fn empty() -> Self {
        Self::new([], [], []).expect("empty config is valid")
    }

    pub fn with_stopwords<S: AsRef<str>>(mut self, words: &[S]) -> Result<Self, VocabError> {
        self.stopwords = words.iter().map(|w| w.as_ref().to_string()).collect();
        Self::new(self.stopwords, self.acronym_exclusions, self.lemma_table)
    }

    pub fn with_acronyms<S: AsRef<str>>(mut self, words: &[S]) -> Result<Self, VocabError> {
        self.acronym_exclusions = words.iter().map(|w| w.as_ref().to_string()).collect();
        Self::new(self.stopwords, self.acronym_exclusions, self.lemma_table)
    }

    pub fn with_lemmas<S: AsRef<str>>(mut self, pairs: &[(S, S)]) -> Result<Self, VocabError> {
        self.lemma_table = pairs
            .iter()
            .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
            .collect();
        Self::new(self.stopwords, self.acronym_exclusions, self.lemma_table)
    }

    /// Reads a word list, one entry per line; `#` starts a comment.
    pub fn read_word_list(path: &Path) -> Result<Vec<String>, VocabError> {
        Ok(fs::read_to_string(path)?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect())
    }

    /// Reads `token<TAB>lemma` lines.
    pub fn read_lemma_table(path: &Path) -> Result<Vec<(String, String)>, VocabError> {
        let text = fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| VocabError::Config(format!("lemma file line {}: expected token<TAB>lemma", i + 1)))?;
            out.push((k.trim().to_lowercase(), v.trim().to_lowercase()));
        }
        Ok(out)
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn acronym_exclusions(&self) -> &BTreeSet<String> {
        &self.acronym_exclusions
    }

    pub fn lemma_table(&self) -> &BTreeMap<String, String> {
        &self.lemma_table
    }

    fn is_excluded(&self, token: &str) -> bool {
        self.stopwords.contains(token) || self.acronym_exclusions.contains(token)
    }

    /// Table lookup, falling back to suffix rules (whose output is looked up
    /// again so table entries win).
    pub fn lemmatize(&self, token: &str) -> String {
        if let Some(l) = self.lemma_table.get(token) {
            return l.clone();
        }
        let stripped = strip_suffix(token);
        match self.lemma_table.get(&stripped) {
            Some(l) => l.clone(),
            None => stripped,
        }
    }

    /// Short hex digest of the three lists, for recording in result files.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (tag, set) in [("stop", &self.stopwords), ("acro", &self.acronym_exclusions)] {
            h.update(tag.as_bytes());
            for w in set {
                h.update(w.as_bytes());
                h.update([0]);
            }
        }
        h.update(b"lemma");
        for (k, v) in &self.lemma_table {
            h.update(k.as_bytes());
            h.update([1]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Tokens of each sentence, after filtering and lemmatization.
    ///
    /// Any non-alphanumeric character separates tokens; `.`, `;`, `!`, `?`
    /// and line breaks also end the sentence.
    pub fn normalize_sentences(&self, text: &str) -> Vec<Vec<String>> {
        let lowered = text.to_lowercase();
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        let mut word = String::new();
        for ch in lowered.chars() {
            if ch.is_alphanumeric() {
                word.push(ch);
                continue;
            }
            self.flush(&mut word, &mut current);
            if is_sentence_break(ch) && !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
        }
        self.flush(&mut word, &mut current);
        if !current.is_empty() {
            sentences.push(current);
        }
        sentences
    }

    fn flush(&self, word: &mut String, out: &mut Vec<String>) {
        if word.is_empty() {
            return;
        }
        let token = std::mem::take(word);
        if self.is_excluded(&token) {
            return;
        }
        let lemma = self.lemmatize(&token);
        if !self.is_excluded(&lemma) {
            out.push(lemma);
        }
    }
}

/// Lowercased, punctuation-stripped, filtered and lemmatized tokens.
pub fn normalize_text(text: &str, config: &TextNormalizationConfig) -> Vec<String> {
    config.normalize_sentences(text).into_iter().flatten().collect()
}

fn is_sentence_break(ch: char) -> bool {
    matches!(ch, '.' | ';' | '!' | '?' | '\n' | '\r')
}

// -ies -> -y; -sses/-xes/-ches/-shes drop "es"; otherwise a trailing -s is
// dropped when at least three characters remain and the word does not end
// in -ss, -us or -is. Every output is a fixed point of this function.
fn strip_suffix(token: &str) -> String {
    let n = token.chars().count();
    if n > 4 && token.ends_with("ies") {
        return format!("{}y", &token[..token.len() - 3]);
    }
    if ["sses", "xes", "ches", "shes"].iter().any(|s| token.ends_with(s)) && n > 4 {
        return token[..token.len() - 2].to_string();
    }
    if token.ends_with('s') && !token.ends_with("ss") && !token.ends_with("us") && !token.ends_with("is") && n > 3 {
        return token[..token.len() - 1].to_string();
    }
    token.to_string()
}
