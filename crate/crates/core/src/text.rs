//! Tokenization shared by keyword tagging and lexicon scoring.

/// Lowercased word tokens: maximal runs of alphanumeric characters. Any
/// other character, including a hashtag's `#`, is a boundary.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
