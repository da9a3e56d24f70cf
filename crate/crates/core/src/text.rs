//! Text normalization used by similarity scoring and textual action comparison.

/// Lowercases, strips ASCII punctuation (apostrophes are kept), collapses
/// whitespace runs to a single space and trims both ends.
pub fn normalize_text(s: &str) -> String {
    let lowered = s.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut words = lowered
        .split_whitespace()
        .map(|w| w.chars().filter(|c| !is_stripped(*c)).collect::<String>())
        .filter(|w| !w.is_empty());
    if let Some(first) = words.next() {
        out.push_str(&first);
        for w in words {
            out.push(' ');
            out.push_str(&w);
        }
    }
    out
}

fn is_stripped(c: char) -> bool {
    c.is_ascii_punctuation() && c != '\''
}

/// Whitespace tokens of the normalized text.
pub fn tokens(s: &str) -> Vec<String> {
    normalize_text(s)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Equality after normalization.
pub fn text_eq(a: &str, b: &str) -> bool {
    normalize_text(a) == normalize_text(b)
}
