// Shipped normalisation lists. Ablation outputs record a fingerprint of the
// lists actually used, so edits here show up in result headers.

pub const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "ain",
    "all",
    "also",
    "am",
    "an",
    "and",
    "any",
    "are",
    "aren",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "couldn",
    "d",
    "did",
    "didn",
    "do",
    "does",
    "doesn",
    "doing",
    "don",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "hadn",
    "has",
    "hasn",
    "have",
    "haven",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "isn",
    "it",
    "its",
    "itself",
    "just",
    "ll",
    "m",
    "ma",
    "may",
    "me",
    "might",
    "more",
    "most",
    "must",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "o",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "re",
    "s",
    "same",
    "she",
    "should",
    "shouldn",
    "so",
    "some",
    "such",
    "t",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "ve",
    "very",
    "was",
    "wasn",
    "we",
    "were",
    "weren",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "won",
    "would",
    "wouldn",
    "y",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

pub const ACRONYMS: &[&str] = &["ap", "pa", "ct", "ij", "svc", "cabg"];

/// Irregular radiology plurals and words the suffix rules would mangle.
pub const LEMMAS: &[(&str, &str)] = &[
    ("apices", "apex"),
    ("axes", "axis"),
    ("bronchi", "bronchus"),
    ("diagnoses", "diagnosis"),
    ("emboli", "embolus"),
    ("hila", "hilum"),
    ("hilar", "hilar"),
    ("indices", "index"),
    ("lucencies", "lucency"),
    ("media", "medium"),
    ("metastases", "metastasis"),
    ("nodi", "nodus"),
    ("series", "series"),
    ("stenoses", "stenosis"),
    ("sulci", "sulcus"),
    ("vertebrae", "vertebra"),
    ("vertices", "vertex"),
];
