use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::score::{rerank, similarity, RankingOptions, ScoredHashtag};
use super::trending::{histogram, trending, HISTOGRAM_BUCKETS};
use super::RankError;
use crate::graph::NodeId;
use crate::index::{HashtagRecord, LookupMode};
use crate::snapshot::ModelSnapshot;
use crate::text::{normalize_name, Lexicon};

/// Which user preference stands in for the (absent) querying user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserContext {
    /// One global mean preference for every candidate.
    #[default]
    GlobalMean,
    /// Each candidate uses the mean preference of the users who posted it.
    HashtagUsers,
}

/// A resolved query keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    pub vector: Vec<f64>,
    /// Category ordinal when the keyword names a linked category.
    pub category: Option<usize>,
    /// Known token ids, used for candidate lookup.
    pub tokens: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub hashtag: String,
    pub trend: f64,
    pub buckets: [u64; HISTOGRAM_BUCKETS],
}

/// Read-only query side over one snapshot.
#[derive(Debug, Clone)]
pub struct SearchEngine {
    snapshot: ModelSnapshot,
    context: UserContext,
    lexicon: Lexicon,
    hashtag_vectors: Vec<Vec<f64>>,
    category_ids: HashMap<String, usize>,
    category_names: HashMap<String, usize>,
}

impl SearchEngine {
    pub fn new(snapshot: ModelSnapshot, context: UserContext) -> Self {
        let lexicon = snapshot.encoder.vocab.lexicon();
        let hashtag_vectors = snapshot
            .index
            .records()
            .map(|r| {
                let node = snapshot
                    .embeddings
                    .vector(r.node)
                    .expect("indexed hashtag has a vector");
                if r.tokens.is_empty() {
                    return node.to_vec();
                }
                let sem = snapshot
                    .encoder
                    .encode_ids(std::slice::from_ref(&r.tokens))
                    .expect("indexed tokens are in the vocabulary");
                node.iter().zip(&sem).map(|(a, b)| 0.5 * (a + b)).collect()
            })
            .collect();
        let mut category_ids = HashMap::new();
        let mut category_names = HashMap::new();
        for (i, c) in snapshot.categories.iter().enumerate() {
            category_ids.entry(c.id.clone()).or_insert(i);
            category_names.entry(normalize_name(&c.name)).or_insert(i);
        }
        Self {
            snapshot,
            context,
            lexicon,
            hashtag_vectors,
            category_ids,
            category_names,
        }
    }

    pub fn snapshot(&self) -> &ModelSnapshot {
        &self.snapshot
    }

    pub fn context(&self) -> UserContext {
        self.context
    }

    /// Graph vector averaged with the semantic encoding of the hashtag's words.
    pub fn hashtag_vector(&self, id: u32) -> Option<&[f64]> {
        self.hashtag_vectors.get(id as usize).map(Vec::as_slice)
    }

    /// `(hashtag preference, content preference)` used when scoring `id`.
    pub fn user_context(&self, id: u32) -> (&[f64], &[f64]) {
        let uc = &self.snapshot.user_context;
        match self.context {
            UserContext::GlobalMean => (&uc.global_hashtag, &uc.global_content),
            UserContext::HashtagUsers => {
                let (h, c) = &uc.per_hashtag[id as usize];
                (h, c)
            }
        }
    }

    pub fn category_by_id(&self, id: &str) -> Option<usize> {
        self.category_ids.get(id).copied()
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.lexicon.tokenize_query(text)
    }

    fn category_keyword(&self, cat: usize) -> Keyword {
        let entry = &self.snapshot.categories[cat];
        let words = self.tokenize(&entry.name);
        let tokens = self.known_tokens(&words);
        if entry.hashtags.is_empty() {
            return Keyword {
                vector: self.snapshot.encoder.encode_phrase(&words),
                category: None,
                tokens,
            };
        }
        let node = NodeId::category(cat as u32);
        Keyword {
            vector: self.snapshot.embeddings.vector(node).expect("category node").to_vec(),
            category: Some(cat),
            tokens,
        }
    }

    fn known_tokens(&self, words: &[String]) -> Vec<u32> {
        let set: BTreeSet<u32> = words
            .iter()
            .filter_map(|w| self.snapshot.encoder.vocab.get(w))
            .collect();
        set.into_iter().collect()
    }

    /// The category node vector when `keyword` names a linked category, otherwise the
    /// semantic encoding of the keyword text.
    pub fn keyword(&self, keyword: &str) -> Result<Keyword, RankError> {
        if let Some(&cat) = self.category_names.get(&normalize_name(keyword)) {
            let kw = self.category_keyword(cat);
            if kw.category.is_some() {
                return Ok(kw);
            }
        }
        let words = self.tokenize(keyword);
        if words.is_empty() {
            return Err(RankError::EmptyQuery);
        }
        Ok(Keyword {
            vector: self.snapshot.encoder.encode_phrase(&words),
            category: None,
            tokens: self.known_tokens(&words),
        })
    }

    pub fn score(&self, id: u32, keyword: &Keyword) -> f64 {
        let (uh, uc) = self.user_context(id);
        let h = self.hashtag_vector(id).expect("indexed hashtag");
        similarity(uh, uc, h, &keyword.vector, &self.snapshot.fusion).expect("snapshot shapes are consistent")
    }

    /// Token postings united with the hashtags linked to the matched category.
    /// With `fallback`, an empty union becomes every record.
    pub fn candidates(&self, keyword: &Keyword, fallback: bool) -> Vec<u32> {
        let mut ids: BTreeSet<u32> = self
            .snapshot
            .index
            .lookup(&keyword.tokens, LookupMode::Any)
            .into_iter()
            .collect();
        if let Some(cat) = keyword.category {
            ids.extend(self.snapshot.categories[cat].hashtags.iter().copied());
        }
        if ids.is_empty() && fallback {
            return self.snapshot.index.records().map(|r| r.id).collect();
        }
        ids.into_iter().collect()
    }

    fn rank_keyword(
        &self,
        kw: &Keyword,
        opts: &RankingOptions,
        fallback: bool,
    ) -> Result<Vec<ScoredHashtag>, RankError> {
        opts.validate()?;
        if opts.top_n == 0 {
            return Ok(Vec::new());
        }
        let scored: Vec<(&HashtagRecord, f64)> = self
            .candidates(kw, fallback)
            .into_iter()
            .filter_map(|id| self.snapshot.index.record(id))
            .filter(|r| opts.admits(r.post_count))
            .map(|r| (r, self.score(r.id, kw)))
            .collect();
        Ok(rerank(&scored, opts))
    }

    /// Hashtags for a free-text keyword, falling back to every record when no token
    /// or category matches.
    pub fn rank_hashtags(&self, keyword: &str, opts: &RankingOptions) -> Result<Vec<ScoredHashtag>, RankError> {
        let kw = self.keyword(keyword)?;
        self.rank_keyword(&kw, opts, true)
    }

    /// Hashtags for a category id from the taxonomy.
    pub fn rank_for_category(&self, category_id: &str, opts: &RankingOptions) -> Result<Vec<ScoredHashtag>, RankError> {
        let cat = self
            .category_by_id(category_id)
            .ok_or_else(|| RankError::UnknownCategory(category_id.to_owned()))?;
        let kw = self.category_keyword(cat);
        self.rank_keyword(&kw, opts, true)
    }

    /// Global search: like [`Self::rank_hashtags`] without the fallback, so a query
    /// that matches nothing returns nothing.
    pub fn search(&self, query: &str, opts: &RankingOptions) -> Result<Vec<ScoredHashtag>, RankError> {
        let kw = self.keyword(query)?;
        self.rank_keyword(&kw, opts, false)
    }

    pub fn trending(&self, hashtag: &str, start: i64, end: i64) -> Result<TrendReport, RankError> {
        let text = if hashtag.starts_with('#') {
            hashtag.to_owned()
        } else {
            format!("#{hashtag}")
        };
        let rec = self
            .snapshot
            .index
            .find_text(&text)
            .ok_or_else(|| RankError::UnknownHashtag(hashtag.to_owned()))?;
        Ok(TrendReport {
            hashtag: rec.text.clone(),
            trend: trending(&rec.timestamps, start, end)?,
            buckets: histogram(&rec.timestamps, start, end)?,
        })
    }
}
