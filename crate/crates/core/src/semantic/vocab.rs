use std::collections::HashMap;

use crate::text::Lexicon;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

/// Frozen token ↔ id mapping. Ids 0 and 1 are reserved for padding and unknown tokens;
/// word `i` (in insertion order) has id `i + 2`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from distinct words. Later duplicates are ignored.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self::default();
        for w in words {
            let w = w.as_ref();
            if !v.ids.contains_key(w) {
                v.ids.insert(w.to_owned(), v.words.len() as u32 + 2);
                v.words.push(w.to_owned());
            }
        }
        v
    }

    /// Size including the two reserved ids.
    pub fn len(&self) -> usize {
        self.words.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            PAD => Some("<pad>"),
            UNK => Some("<unk>"),
            _ => self.words.get(id as usize - 2).map(String::as_str),
        }
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn lexicon(&self) -> Lexicon {
        let mut lx = Lexicon::new();
        for w in &self.words {
            lx.insert(w);
        }
        lx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_and_bijection() {
        let v = Vocab::from_words(["red", "shoes", "red"]);
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("red"), 2);
        assert_eq!(v.id("shoes"), 3);
        assert_eq!(v.id("boots"), UNK);
        for id in 2..v.len() as u32 {
            assert_eq!(v.id(v.token(id).unwrap()), id);
        }
        assert_eq!(v.token(PAD), Some("<pad>"));
        assert_eq!(v.encode(&["shoes", "zzz"]), vec![3, UNK]);
    }
}
