/// Lowercases, splits on whitespace and strips non-alphanumeric characters from
/// both ends of every token. Interior punctuation is kept and nothing is dropped
/// apart from tokens that end up empty.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}
