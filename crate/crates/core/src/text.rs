//! Character-level helpers shared by every module.
//!
//! The unit of length everywhere is the Unicode scalar value (`char`), never
//! the byte. Words are maximal runs of non-whitespace.

/// Number of characters in `s`.
#[inline]
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `n`-th character (or `s.len()` if `n` is past the end).
pub fn byte_offset(s: &str, n: usize) -> usize {
    s.char_indices().nth(n).map_or(s.len(), |(i, _)| i)
}

/// First `n` characters of `s`.
pub fn take_chars(s: &str, n: usize) -> &str {
    &s[..byte_offset(s, n)]
}

/// Length in characters of the longest common prefix of `a` and `b`.
pub fn lcp_chars(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

/// Byte offsets at which a word starts.
pub fn word_starts(s: &str) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut prev_ws = true;
    for (i, c) in s.char_indices() {
        let ws = c.is_whitespace();
        if prev_ws && !ws {
            starts.push(i);
        }
        prev_ws = ws;
    }
    starts
}

/// Number of whitespace-delimited words.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Splits `s` into pieces of the form `\s*\S+`, with any trailing whitespace
/// run emitted as a final piece of its own. Concatenating the pieces gives `s`.
pub fn pieces(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut in_word = false;
    for (i, c) in s.char_indices() {
        let ws = c.is_whitespace();
        if ws && in_word {
            out.push(&s[start..i]);
            start = i;
        }
        in_word = !ws;
    }
    if start < s.len() {
        out.push(&s[start..]);
    }
    out
}
