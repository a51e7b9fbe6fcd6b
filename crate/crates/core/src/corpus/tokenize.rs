//! Short-message tokenizer.
//!
//! Rules, applied per whitespace-delimited chunk:
//! * chunks starting with a URL scheme (`http://`, `https://`, `www.`) are dropped,
//!   and a URL embedded later in a chunk truncates the chunk;
//! * an `@mention` (the `@` plus following word characters) is dropped;
//! * everything else is split on non-alphanumeric characters, except that a
//!   single hyphen between two alphanumerics stays inside the token (`i-10`);
//! * tokens are lowercased. `#` is punctuation, so hashtags lose it for free.

use serde::{Deserialize, Serialize};

/// Normalized tokens of one message with byte offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedTweet {
    pub tweet_id: String,
    pub tokens: Vec<String>,
    /// `[start, end)` byte offsets of each token in the original text.
    pub char_spans: Vec<(usize, usize)>,
}

impl TokenizedTweet {
    pub fn new(tweet_id: impl Into<String>, text: &str) -> Self {
        let (tokens, char_spans) = tokenize_with_spans(text).into_iter().unzip();
        TokenizedTweet {
            tweet_id: tweet_id.into(),
            tokens,
            char_spans,
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_spans(text).into_iter().map(|(t, _)| t).collect()
}

pub fn tokenize_with_spans(text: &str) -> Vec<(String, (usize, usize))> {
    let mut out = Vec::new();
    for (start, chunk) in whitespace_chunks(text) {
        let chunk = strip_url(chunk);
        tokenize_chunk(chunk, start, &mut out);
    }
    out
}

fn whitespace_chunks(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = text;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        if trimmed.is_empty() {
            return None;
        }
        let end = trimmed
            .find(char::is_whitespace)
            .unwrap_or(trimmed.len());
        let item = (offset, &trimmed[..end]);
        offset += end;
        rest = &trimmed[end..];
        Some(item)
    })
}

const URL_MARKERS: [&str; 3] = ["http://", "https://", "www."];

fn strip_url(chunk: &str) -> &str {
    let lower = chunk.to_ascii_lowercase();
    let cut = URL_MARKERS
        .iter()
        .filter_map(|m| lower.find(m))
        .min()
        .unwrap_or(chunk.len());
    &chunk[..cut]
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric()
}

fn tokenize_chunk(chunk: &str, base: usize, out: &mut Vec<(String, (usize, usize))>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        if c == '@' {
            // skip the mention handle
            i += 1;
            while i < chars.len() && (is_word(chars[i].1) || chars[i].1 == '_') {
                i += 1;
            }
            continue;
        }
        if !is_word(c) {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() {
            let c = chars[i].1;
            let inner_hyphen = c == '-' && i + 1 < chars.len() && is_word(chars[i + 1].1) && i > start;
            if is_word(c) || inner_hyphen {
                i += 1;
            } else {
                break;
            }
        }
        let from = chars[start].0;
        let to = chars.get(i).map_or(chunk.len(), |&(b, _)| b);
        let token: String = chunk[from..to].to_lowercase();
        out.push((token, (base + from, base + to)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_urls_mentions_and_hashes() {
        assert_eq!(
            tokenize("Need RESCUE at #Houston http://t.co/x @fema"),
            ["need", "rescue", "at", "houston"]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
        assert!(tokenize("@someone https://x.y !!!").is_empty());
    }

    #[test]
    fn keeps_internal_hyphens() {
        assert_eq!(tokenize("I-10 closed!!"), ["i-10", "closed"]);
        assert_eq!(tokenize("-a- b--c"), ["a", "b", "c"]);
    }

    #[test]
    fn spans_point_into_source() {
        let text = "Road  CLOSED near I-45, @kprc2 see www.x.com";
        let toks = tokenize_with_spans(text);
        for (tok, (s, e)) in &toks {
            assert_eq!(&text[*s..*e].to_lowercase(), tok);
        }
        let spans: Vec<_> = toks.iter().map(|(_, s)| *s).collect();
        assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0));
        let words: Vec<_> = toks.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(words, ["road", "closed", "near", "i-45", "see"]);
    }

    #[test]
    fn unicode_and_url_mid_chunk() {
        assert_eq!(tokenize("Évacuation!! go:https://t.co/a"), ["évacuation", "go"]);
        assert_eq!(tokenize("@user_1's house"), ["s", "house"]);
    }
}
