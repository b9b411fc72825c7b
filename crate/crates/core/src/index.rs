//! In-process inverted index from token ids to hashtag records.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::codec::{ByteReader, ByteWriter};
use crate::graph::{NodeId, NodeKind};
use crate::snapshot::SnapshotError;

/// Metadata of one indexed hashtag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashtagRecord {
    pub id: u32,
    /// Including the leading `#`.
    pub text: String,
    pub tokens: Vec<u32>,
    pub post_count: u64,
    /// Sorted epoch seconds, one per post.
    pub timestamps: Vec<i64>,
    pub node: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookupMode {
    #[default]
    Any,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate record id {0}")]
    DuplicateId(u32),
    #[error("record {id}: post_count {post_count} does not match {timestamps} timestamps")]
    CountMismatch {
        id: u32,
        post_count: u64,
        timestamps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InvertedIndex {
    postings: BTreeMap<u32, Vec<u32>>,
    records: BTreeMap<u32, HashtagRecord>,
}

pub fn build_index(records: impl IntoIterator<Item = HashtagRecord>) -> Result<InvertedIndex, IndexError> {
    let mut postings: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for r in records {
        if r.post_count != r.timestamps.len() as u64 {
            return Err(IndexError::CountMismatch {
                id: r.id,
                post_count: r.post_count,
                timestamps: r.timestamps.len(),
            });
        }
        for &t in &r.tokens {
            postings.entry(t).or_default().insert(r.id);
        }
        if out.insert(r.id, r.clone()).is_some() {
            return Err(IndexError::DuplicateId(r.id));
        }
    }
    Ok(InvertedIndex {
        postings: postings
            .into_iter()
            .map(|(t, ids)| (t, ids.into_iter().collect()))
            .collect(),
        records: out,
    })
}

impl InvertedIndex {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: u32) -> Option<&HashtagRecord> {
        self.records.get(&id)
    }

    /// Records in ascending id order.
    pub fn records(&self) -> impl Iterator<Item = &HashtagRecord> {
        self.records.values()
    }

    pub fn postings(&self, token: u32) -> &[u32] {
        self.postings.get(&token).map_or(&[], Vec::as_slice)
    }

    pub fn tokens(&self) -> impl Iterator<Item = u32> + '_ {
        self.postings.keys().copied()
    }

    pub fn find_text(&self, text: &str) -> Option<&HashtagRecord> {
        self.records.values().find(|r| r.text == text)
    }

    /// Union (`Any`) or intersection (`All`) of the tokens' postings, ascending.
    pub fn lookup(&self, tokens: &[u32], mode: LookupMode) -> Vec<u32> {
        let mut lists = tokens.iter().map(|&t| self.postings(t));
        match mode {
            LookupMode::Any => {
                let set: BTreeSet<u32> = lists.flatten().copied().collect();
                set.into_iter().collect()
            }
            LookupMode::All => {
                let Some(first) = lists.next() else {
                    return Vec::new();
                };
                let mut acc: Vec<u32> = first.to_vec();
                for l in lists {
                    acc.retain(|id| l.binary_search(id).is_ok());
                }
                acc
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("index serializes")
    }

    /// Records, then postings: each as length-prefixed sequences of little-endian
    /// integers.
    pub fn encode(&self, w: &mut ByteWriter) {
        w.len32(self.records.len());
        for r in self.records.values() {
            w.u32(r.id);
            w.str(&r.text);
            w.u8(r.node.kind.index() as u8);
            w.u32(r.node.ordinal);
            w.len32(r.tokens.len());
            for &t in &r.tokens {
                w.u32(t);
            }
            w.u64(r.post_count);
            w.len32(r.timestamps.len());
            for &t in &r.timestamps {
                w.i64(t);
            }
        }
        w.len32(self.postings.len());
        for (token, ids) in &self.postings {
            w.u32(*token);
            w.len32(ids.len());
            for &id in ids {
                w.u32(id);
            }
        }
    }

    /// Decodes and rebuilds postings, rejecting a stored posting table that
    /// disagrees with the records.
    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self, SnapshotError> {
        let corrupt = |reason: String| SnapshotError::Corrupt {
            section: "INDX",
            reason,
        };
        let n = r.len32()?;
        let mut records = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let id = r.u32()?;
            let text = r.str()?;
            let kind = *NodeKind::ALL
                .get(r.u8()? as usize)
                .ok_or_else(|| corrupt("bad node kind".into()))?;
            let node = NodeId::new(kind, r.u32()?);
            let nt = r.len32()?;
            let tokens = (0..nt).map(|_| r.u32()).collect::<Result<_, _>>()?;
            let post_count = r.u64()?;
            let ns = r.len32()?;
            let timestamps = (0..ns).map(|_| r.i64()).collect::<Result<_, _>>()?;
            records.push(HashtagRecord {
                id,
                text,
                tokens,
                post_count,
                timestamps,
                node,
            });
        }
        let np = r.len32()?;
        let mut postings = BTreeMap::new();
        for _ in 0..np {
            let token = r.u32()?;
            let k = r.len32()?;
            let ids: Vec<u32> = (0..k).map(|_| r.u32()).collect::<Result<_, _>>()?;
            postings.insert(token, ids);
        }
        let index = build_index(records).map_err(|e| corrupt(e.to_string()))?;
        if index.postings != postings {
            return Err(corrupt("postings disagree with records".into()));
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: u32, text: &str, tokens: &[u32]) -> HashtagRecord {
        HashtagRecord {
            id,
            text: text.into(),
            tokens: tokens.to_vec(),
            post_count: 1,
            timestamps: vec![100 + id as i64],
            node: NodeId::hashtag(id),
        }
    }

    #[test]
    fn empty_and_single_record() {
        let idx = build_index(Vec::new()).unwrap();
        assert!(idx.is_empty());
        assert!(idx.lookup(&[1], LookupMode::Any).is_empty());
        // "#redshoes" with red = 2, shoes = 3.
        let idx = build_index([rec(0, "#redshoes", &[2, 3])]).unwrap();
        assert_eq!(idx.postings(2), &[0]);
        assert_eq!(idx.postings(3), &[0]);
        assert_eq!(idx.tokens().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn duplicates_and_counts_are_rejected() {
        assert_eq!(
            build_index([rec(1, "#a", &[]), rec(1, "#b", &[])]).unwrap_err(),
            IndexError::DuplicateId(1)
        );
        let mut r = rec(0, "#a", &[]);
        r.post_count = 3;
        assert!(matches!(build_index([r]), Err(IndexError::CountMismatch { .. })));
    }

    #[test]
    fn rebuild_is_identical_and_round_trips() {
        let recs = vec![
            rec(0, "#redshoes", &[2, 3]),
            rec(4, "#red", &[2]),
            rec(2, "#glow", &[5]),
        ];
        let a = build_index(recs.clone()).unwrap();
        let b = build_index(recs).unwrap();
        assert_eq!(a, b);
        let mut w = ByteWriter::new();
        a.encode(&mut w);
        let bytes = w.into_bytes();
        let mut r = ByteReader::new(&bytes, "INDX");
        assert_eq!(InvertedIndex::decode(&mut r).unwrap(), a);
        r.finish().unwrap();
        assert_eq!(a.to_json()["postings"]["2"], serde_json::json!([0, 4]));
    }

    #[test]
    fn truncated_index_fails() {
        let a = build_index([rec(0, "#redshoes", &[2, 3])]).unwrap();
        let mut w = ByteWriter::new();
        a.encode(&mut w);
        let bytes = w.into_bytes();
        let mut r = ByteReader::new(&bytes[..bytes.len() - 2], "INDX");
        assert!(matches!(
            InvertedIndex::decode(&mut r),
            Err(SnapshotError::Truncated { .. })
        ));
    }

    proptest! {
        #[test]
        fn lookup_matches_set_oracles(
            token_sets in prop::collection::vec(prop::collection::btree_set(0u32..12, 0..5), 0..30),
            query in prop::collection::vec(0u32..14, 1..5),
        ) {
            let recs: Vec<_> = token_sets
                .iter()
                .enumerate()
                .map(|(i, ts)| rec(i as u32, &format!("#t{i}"), &ts.iter().copied().collect::<Vec<_>>()))
                .collect();
            let idx = build_index(recs.clone()).unwrap();
            let any: Vec<u32> = recs.iter().filter(|r| query.iter().any(|q| r.tokens.contains(q))).map(|r| r.id).collect();
            let all: Vec<u32> = recs.iter().filter(|r| query.iter().all(|q| r.tokens.contains(q))).map(|r| r.id).collect();
            let got_any = idx.lookup(&query, LookupMode::Any);
            let got_all = idx.lookup(&query, LookupMode::All);
            prop_assert_eq!(&got_any, &any);
            prop_assert_eq!(&got_all, &all);
            prop_assert!(got_all.iter().all(|id| got_any.contains(id)));
            prop_assert!(got_any.iter().all(|&id| idx.record(id).is_some()));
            prop_assert_eq!(idx.lookup(&query[..1], LookupMode::All), idx.lookup(&query[..1], LookupMode::Any));
        }
    }
}
