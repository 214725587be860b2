//! Fixed toy vocabulary and a greedy longest-match tokenizer.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::{NgcError, Result};

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const ANS: usize = 2;
pub const QUERY: usize = 3;
pub const SEP: usize = 4;
pub const FILL: usize = 5;
pub const META: usize = 6;
pub const TAG_OPEN: usize = 7;
pub const TAG_CLOSE: usize = 8;
pub const PERCENT: usize = 9;
pub const DOT: usize = 10;
pub const DIGIT0: usize = 11;
pub const PLUS: usize = 21;
pub const MINUS: usize = 22;
pub const TIMES: usize = 23;
pub const LETTER_A: usize = 24;
pub const N_LETTERS: usize = 16;
pub const CLOCK0: usize = LETTER_A + N_LETTERS;
/// Countdown tokens `@0 .. @{N_CLOCK-1}` that pace the thinking phase.
pub const N_CLOCK: usize = 24;
pub const PAIR0: usize = CLOCK0 + N_CLOCK;
/// Keys available to the bound `key=value` tokens.
pub const N_PAIR_KEYS: usize = 8;
pub const VOCAB_SIZE: usize = PAIR0 + N_PAIR_KEYS * 10;

fn build() -> Vec<String> {
    let mut v: Vec<String> = [
        "<bos>",
        "<eos>",
        "<ans>",
        "<query>",
        "<sep>",
        "<fill>",
        "<meta>",
        "<eviction_rate>",
        "</eviction_rate>",
        "%",
        ".",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend((0..10).map(|d| d.to_string()));
    v.extend(["+", "-", "*"].iter().map(|s| s.to_string()));
    v.extend((0..N_LETTERS as u8).map(|i| ((b'a' + i) as char).to_string()));
    v.extend((0..N_CLOCK).map(|i| format!("@{i}")));
    for k in 0..N_PAIR_KEYS as u8 {
        v.extend((0..10).map(|d| format!("{}={d}", (b'a' + k) as char)));
    }
    v
}

fn strings() -> &'static [String] {
    static VOCAB: OnceLock<Vec<String>> = OnceLock::new();
    VOCAB.get_or_init(build)
}

fn lookup() -> &'static HashMap<&'static str, usize> {
    static MAP: OnceLock<HashMap<&'static str, usize>> = OnceLock::new();
    MAP.get_or_init(|| strings().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect())
}

pub fn digit(d: usize) -> usize {
    DIGIT0 + d
}

pub fn letter(i: usize) -> usize {
    LETTER_A + i
}

pub fn clock(i: usize) -> usize {
    CLOCK0 + i
}

/// Single token binding key letter `k` to digit `d`.
pub fn pair(k: usize, d: usize) -> usize {
    PAIR0 + k * 10 + d
}

pub fn token_str(id: usize) -> Option<&'static str> {
    strings().get(id).map(String::as_str)
}

/// Splits `text` into vocabulary tokens, always taking the longest match.
/// Whitespace between tokens is ignored.
pub fn tokenize(text: &str) -> Result<Vec<usize>> {
    let longest = strings().iter().map(String::len).max().unwrap_or(1);
    let map = lookup();
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let trimmed = rest.trim_start();
        if trimmed.len() != rest.len() {
            rest = trimmed;
            continue;
        }
        let found = (1..=longest.min(rest.len()))
            .rev()
            .filter(|&n| rest.is_char_boundary(n))
            .find_map(|n| map.get(&rest[..n]).map(|&id| (id, n)));
        match found {
            Some((id, n)) => {
                out.push(id);
                rest = &rest[n..];
            }
            None => {
                let snippet: String = rest.chars().take(12).collect();
                return Err(NgcError::Usage(format!("cannot tokenize {snippet:?}")));
            }
        }
    }
    Ok(out)
}

pub fn detokenize(tokens: &[usize]) -> String {
    tokens.iter().map(|&t| token_str(t).unwrap_or("<?>")).collect()
}
