//! Tokenization shared by ingestion, indexing and query parsing.
//!
//! Plain text is lowercased, split on non-alphanumerics, and tokens shorter than two
//! characters are dropped. Hashtag bodies additionally split on camel-case boundaries
//! and segment run-together words (`#redshoes`) against a lexicon of known words.

use std::collections::HashSet;

pub const MIN_TOKEN_LEN: usize = 2;

/// Lowercase, split on non-alphanumerics, drop short tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= MIN_TOKEN_LEN)
        .collect()
}

/// Splits content text into sentences on `.`, `!`, `?` and newlines, tokenizing each.
/// Sentences without tokens are dropped.
pub fn sentences(text: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?', '\n'])
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect()
}

/// A set of known words used for segmenting run-together hashtag bodies.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashSet<String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str) {
        if word.chars().count() >= MIN_TOKEN_LEN {
            self.words.insert(word.to_owned());
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Segments `piece` into the fewest lexicon words (each at least two characters).
    /// Returns `None` when `piece` is itself a word or cannot be fully segmented into
    /// two or more words.
    pub fn segment(&self, piece: &str) -> Option<Vec<String>> {
        if self.contains(piece) {
            return None;
        }
        let chars: Vec<(usize, char)> = piece.char_indices().collect();
        let n = chars.len();
        let byte_at = |i: usize| if i == n { piece.len() } else { chars[i].0 };
        // best[i] = (segments covering chars[..i], start of the last segment)
        let mut best: Vec<Option<(usize, usize)>> = vec![None; n + 1];
        best[0] = Some((0, 0));
        for end in MIN_TOKEN_LEN..=n {
            // Earlier starts mean a longer final segment; keep the first minimum found.
            for start in 0..=end - MIN_TOKEN_LEN {
                let Some((count, _)) = best[start] else { continue };
                if !self.contains(&piece[byte_at(start)..byte_at(end)]) {
                    continue;
                }
                let candidate = count + 1;
                if best[end].is_none_or(|(c, _)| candidate < c) {
                    best[end] = Some((candidate, start));
                }
            }
        }
        let (count, _) = best[n]?;
        if count < 2 {
            return None;
        }
        let mut out = Vec::with_capacity(count);
        let mut end = n;
        while end > 0 {
            let (_, start) = best[end].expect("reconstruction follows filled cells");
            out.push(piece[byte_at(start)..byte_at(end)].to_owned());
            end = start;
        }
        out.reverse();
        Some(out)
    }

    /// Tokenizes free text, then segments tokens unknown to the lexicon.
    pub fn tokenize_query(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for tok in tokenize(text) {
            match self.segment(&tok) {
                Some(parts) => out.extend(parts),
                None => out.push(tok),
            }
        }
        out
    }
}

/// Returns the body of a hashtag (text after the leading `#`), or `None` when the
/// string is not a hashtag.
pub fn hashtag_body(tag: &str) -> Option<&str> {
    let body = tag.strip_prefix('#')?;
    if body.chars().any(char::is_alphanumeric) {
        Some(body)
    } else {
        None
    }
}

/// Words of a hashtag's own text: `#`-stripped, camel-case split, lowercased, and
/// run-together pieces segmented against `lexicon`. Duplicates are kept in order of
/// appearance only once.
pub fn hashtag_words(tag: &str, lexicon: &Lexicon) -> Vec<String> {
    let body = tag.strip_prefix('#').unwrap_or(tag);
    let mut out: Vec<String> = Vec::new();
    for piece in body.split(|c: char| !c.is_alphanumeric()).filter(|p| !p.is_empty()) {
        for part in camel_split(piece) {
            let lower = part.to_lowercase();
            if lower.chars().count() < MIN_TOKEN_LEN {
                continue;
            }
            let words = lexicon.segment(&lower).unwrap_or_else(|| vec![lower]);
            for w in words {
                if !out.contains(&w) {
                    out.push(w);
                }
            }
        }
    }
    out
}

/// Splits `RedShoes` into `Red`, `Shoes` and `HTMLParser` into `HTML`, `Parser`.
fn camel_split(piece: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = piece.char_indices().collect();
    let mut parts = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let (prev, cur) = (chars[i - 1].1, chars[i].1);
        let next_lower = chars.get(i + 1).is_some_and(|(_, c)| c.is_lowercase());
        let boundary =
            (prev.is_lowercase() && cur.is_uppercase()) || (prev.is_uppercase() && cur.is_uppercase() && next_lower);
        if boundary {
            parts.push(&piece[start..chars[i].0]);
            start = chars[i].0;
        }
    }
    parts.push(&piece[start..]);
    parts
}

/// Case- and whitespace-insensitive form used to match keywords against category names.
pub fn normalize_name(name: &str) -> String {
    tokenize(name).join(" ")
}
