//! Ranked bigram vocabulary built from a report corpus.

mod defaults;
mod normalize;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normalize::{normalize_text, TextNormalizationConfig};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("vocabulary size must be positive")]
    ZeroSize,
    #[error("invalid normalisation config: {0}")]
    Config(String),
    #[error("vocabulary file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of the corpus input format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    pub report: String,
}

/// Concept terms ordered by corpus frequency (descending), then
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    frequencies: Vec<u64>,
}

impl Vocabulary {
    pub fn from_ranked(pairs: Vec<(String, u64)>) -> Self {
        let (terms, frequencies) = pairs.into_iter().unzip();
        Self { terms, frequencies }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn rank_of(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// The `m` highest-ranked terms.
    pub fn prefix(&self, m: usize) -> Self {
        let m = m.min(self.len());
        Self {
            terms: self.terms[..m].to_vec(),
            frequencies: self.frequencies[..m].to_vec(),
        }
    }

    /// `term<TAB>count` per line in rank order.
    pub fn write_tsv(&self, mut w: impl Write) -> std::io::Result<()> {
        for (t, c) in self.terms.iter().zip(&self.frequencies) {
            writeln!(w, "{t}\t{c}")?;
        }
        w.flush()
    }

    pub fn read_tsv(r: impl BufRead) -> Result<Self, VocabError> {
        let mut pairs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let format = |msg: &str| VocabError::Format {
                line: i + 1,
                msg: msg.to_string(),
            };
            let (term, count) = line.split_once('\t').ok_or_else(|| format("expected term<TAB>count"))?;
            let count = count.trim().parse().map_err(|_| format("count is not an integer"))?;
            pairs.push((term.to_string(), count));
        }
        Ok(Self::from_ranked(pairs))
    }
}

/// Counts adjacent token pairs within each normalized sentence over the
/// whole corpus, sorted by count descending then lexicographically.
pub fn extract_bigrams<S: AsRef<str>>(corpus: &[S], config: &TextNormalizationConfig) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for doc in corpus {
        for sentence in config.normalize_sentences(doc.as_ref()) {
            for pair in sentence.windows(2) {
                *counts.entry(format!("{} {}", pair[0], pair[1])).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// The top-`m` bigrams of the corpus. Returns fewer terms, with a warning,
/// when the corpus has fewer than `m` distinct bigrams.
pub fn build_vocabulary<S: AsRef<str>>(
    corpus: &[S],
    m: usize,
    config: &TextNormalizationConfig,
) -> Result<Vocabulary, VocabError> {
    if m == 0 {
        return Err(VocabError::ZeroSize);
    }
    let mut ranked = extract_bigrams(corpus, config);
    if ranked.len() < m {
        log::warn!(
            "corpus has only {} distinct bigrams; vocabulary truncated below requested size {m}",
            ranked.len()
        );
    }
    ranked.truncate(m);
    Ok(Vocabulary::from_ranked(ranked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stop(words: &[&str]) -> TextNormalizationConfig {
        TextNormalizationConfig::empty().with_stopwords(words).unwrap()
    }

    #[test]
    fn bigrams_of_two_documents() {
        let corpus = ["pleural effusion is small", "small pleural effusion"];
        let got = extract_bigrams(&corpus, &stop(&["is"]));
        let want = vec![
            ("pleural effusion".to_string(), 2),
            ("effusion small".to_string(), 1),
            ("small pleural".to_string(), 1),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn single_token_document_has_no_bigrams() {
        assert!(extract_bigrams(&["effusion"], &TextNormalizationConfig::empty()).is_empty());
    }

    #[test]
    fn bigram_present_in_every_document_ranks_first() {
        let corpus = [
            "heart size normal. lungs clear",
            "lungs clear. no pneumothorax seen",
            "bony structures intact. lungs clear",
        ];
        let got = extract_bigrams(&corpus, &TextNormalizationConfig::default());
        assert_eq!(got[0], ("lung clear".to_string(), 3));
    }

    #[test]
    fn sentence_boundary_breaks_adjacency() {
        let got = extract_bigrams(&["left lung. right lung"], &TextNormalizationConfig::empty());
        let terms: Vec<_> = got.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(terms, ["left lung", "right lung"]);
    }

    #[test]
    fn four_document_vocabulary() {
        // Hand enumeration with stopwords {is, the, of}:
        //   d1: pleural effusion | effusion small          (sentence 1)
        //   d2: cardiac silhouette | silhouette normal ; pleural effusion
        //   d3: small pleural | pleural effusion ; cardiac silhouette | silhouette enlarged
        //   d4: lung clear
        // counts: pleural effusion 3, cardiac silhouette 2, then five 1-count
        // terms ordered lexicographically, led by "effusion small".
        let corpus = [
            "Pleural effusion is small.",
            "The cardiac silhouette is normal. Pleural effusion.",
            "Small pleural effusion; the cardiac silhouette is enlarged",
            "Lung clear",
        ];
        let cfg = stop(&["is", "the", "of"]);
        let v = build_vocabulary(&corpus, 3, &cfg).unwrap();
        assert_eq!(v.terms(), ["pleural effusion", "cardiac silhouette", "effusion small"]);
        assert_eq!(v.frequencies(), [3, 2, 1]);
    }

    #[test]
    fn oversize_request_returns_everything() {
        let v = build_vocabulary(&["a b c"], 10, &TextNormalizationConfig::empty()).unwrap();
        assert_eq!(v.terms(), ["a b", "b c"]);
        assert!(matches!(
            build_vocabulary(&["a b"], 0, &TextNormalizationConfig::empty()),
            Err(VocabError::ZeroSize)
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let v = Vocabulary::from_ranked(vec![("pleural effusion".into(), 9), ("lung clear".into(), 4)]);
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "pleural effusion\t9\nlung clear\t4\n"
        );
        assert_eq!(Vocabulary::read_tsv(buf.as_slice()).unwrap(), v);
        assert!(Vocabulary::read_tsv("no tab here\n".as_bytes()).is_err());
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
        let word = prop::sample::select(vec![
            "pleural",
            "effusion",
            "lung",
            "clear",
            "the",
            "is",
            "small",
            "cardiac",
            "silhouette",
            "normal",
        ]);
        let sentence = prop::collection::vec(word, 0..8).prop_map(|w| w.join(" "));
        prop::collection::vec(prop::collection::vec(sentence, 1..3).prop_map(|s| s.join(". ")), 0..8)
    }

    proptest! {
        #[test]
        fn counts_ignore_document_order(corpus in corpus_strategy(), seed in any::<u64>()) {
            let cfg = TextNormalizationConfig::default();
            let mut shuffled = corpus.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.reverse();
            }
            prop_assert_eq!(extract_bigrams(&corpus, &cfg), extract_bigrams(&shuffled, &cfg));
        }

        #[test]
        fn smaller_vocabulary_is_a_prefix(corpus in corpus_strategy(), m1 in 1usize..6, extra in 0usize..6) {
            let cfg = TextNormalizationConfig::default();
            let small = build_vocabulary(&corpus, m1, &cfg).unwrap();
            let large = build_vocabulary(&corpus, m1 + extra, &cfg).unwrap();
            prop_assert_eq!(small.terms(), &large.terms()[..small.len()]);
        }

        #[test]
        fn terms_are_unique_token_pairs(corpus in corpus_strategy()) {
            let v = build_vocabulary(&corpus, 50, &TextNormalizationConfig::default()).unwrap();
            let mut seen = std::collections::HashSet::new();
            for t in v.terms() {
                prop_assert_eq!(t.split(' ').count(), 2);
                prop_assert!(seen.insert(t.clone()));
            }
        }
    }
}
