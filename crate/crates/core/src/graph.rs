//! Typed behavior graph over users, hashtags, contents, words and categories.
//!
//! Nodes get dense per-kind ordinals in order of first appearance. Edges are
//! undirected and stored on both endpoints; neighbor lists are sorted and
//! duplicate-free. After construction the graph is immutable.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::Fnv64;
use crate::ingest::{CategoryRecord, Corpus, PostRecord, Rejection};
use crate::text::{self, Lexicon};

/// Two tokens co-occur when they fall inside one window of this many tokens.
pub const WORD_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    User,
    Hashtag,
    Content,
    Word,
    Category,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [
        NodeKind::User,
        NodeKind::Hashtag,
        NodeKind::Content,
        NodeKind::Word,
        NodeKind::Category,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::User => "user",
            NodeKind::Hashtag => "hashtag",
            NodeKind::Content => "content",
            NodeKind::Word => "word",
            NodeKind::Category => "category",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub ordinal: u32,
}

impl NodeId {
    pub fn new(kind: NodeKind, ordinal: u32) -> Self {
        Self { kind, ordinal }
    }

    pub fn user(ordinal: u32) -> Self {
        Self::new(NodeKind::User, ordinal)
    }

    pub fn hashtag(ordinal: u32) -> Self {
        Self::new(NodeKind::Hashtag, ordinal)
    }

    pub fn content(ordinal: u32) -> Self {
        Self::new(NodeKind::Content, ordinal)
    }

    pub fn word(ordinal: u32) -> Self {
        Self::new(NodeKind::Word, ordinal)
    }

    pub fn category(ordinal: u32) -> Self {
        Self::new(NodeKind::Category, ordinal)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.name(), self.ordinal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    UserHashtag,
    UserContent,
    HashtagContent,
    HashtagWord,
    HashtagCategory,
    WordWord,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 6] = [
        EdgeKind::UserHashtag,
        EdgeKind::UserContent,
        EdgeKind::HashtagContent,
        EdgeKind::HashtagWord,
        EdgeKind::HashtagCategory,
        EdgeKind::WordWord,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        use NodeKind::*;
        match self {
            EdgeKind::UserHashtag => (User, Hashtag),
            EdgeKind::UserContent => (User, Content),
            EdgeKind::HashtagContent => (Hashtag, Content),
            EdgeKind::HashtagWord => (Hashtag, Word),
            EdgeKind::HashtagCategory => (Hashtag, Category),
            EdgeKind::WordWord => (Word, Word),
        }
    }

    /// The edge kind joining nodes of kinds `a` and `b`, in either order.
    pub fn between(a: NodeKind, b: NodeKind) -> Option<EdgeKind> {
        EdgeKind::ALL.into_iter().find(|k| {
            let (x, y) = k.endpoints();
            (x, y) == (a, b) || (y, x) == (a, b)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("edge kind {kind:?} cannot join {a} and {b}")]
    EdgeKindMismatch { kind: EdgeKind, a: NodeId, b: NodeId },
    #[error("self-loop on {0} is not allowed")]
    SelfLoop(NodeId),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

type EdgeLists = [Vec<NodeId>; 6];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeteroGraph {
    labels: [Vec<String>; 5],
    lookup: [HashMap<String, u32>; 5],
    adjacency: [Vec<EdgeLists>; 5],
    edge_counts: [usize; 6],
}

/// Step-wise graph construction. Edge insertion is idempotent.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    labels: [Vec<String>; 5],
    lookup: [HashMap<String, u32>; 5],
    adjacency: [Vec<[BTreeSet<u32>; 6]>; 5],
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the node labelled `label`, creating it if needed.
    pub fn node(&mut self, kind: NodeKind, label: &str) -> NodeId {
        let k = kind.index();
        if let Some(&ord) = self.lookup[k].get(label) {
            return NodeId::new(kind, ord);
        }
        let ord = u32::try_from(self.labels[k].len()).expect("node count exceeds u32");
        self.labels[k].push(label.to_owned());
        self.lookup[k].insert(label.to_owned(), ord);
        self.adjacency[k].push(Default::default());
        NodeId::new(kind, ord)
    }

    pub fn find(&self, kind: NodeKind, label: &str) -> Option<NodeId> {
        self.lookup[kind.index()].get(label).map(|&ord| NodeId::new(kind, ord))
    }

    fn contains(&self, n: NodeId) -> bool {
        (n.ordinal as usize) < self.labels[n.kind.index()].len()
    }

    /// Adds the undirected edge `a`–`b`. Returns `false` if it already existed.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId, kind: EdgeKind) -> Result<bool, GraphError> {
        for n in [a, b] {
            if !self.contains(n) {
                return Err(GraphError::UnknownNode(n));
            }
        }
        if EdgeKind::between(a.kind, b.kind) != Some(kind) {
            return Err(GraphError::EdgeKindMismatch { kind, a, b });
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        let e = kind.index();
        let inserted = self.adjacency[a.kind.index()][a.ordinal as usize][e].insert(b.ordinal);
        self.adjacency[b.kind.index()][b.ordinal as usize][e].insert(a.ordinal);
        Ok(inserted)
    }

    pub fn build(self) -> HeteroGraph {
        let mut edge_counts = [0usize; 6];
        let mut adjacency: [Vec<EdgeLists>; 5] = Default::default();
        for kind in NodeKind::ALL {
            let k = kind.index();
            adjacency[k] = self.adjacency[k]
                .iter()
                .map(|lists| {
                    std::array::from_fn(|e| {
                        let edge = EdgeKind::ALL[e];
                        let (x, y) = edge.endpoints();
                        let other = if x == kind { y } else { x };
                        edge_counts[e] += lists[e].len();
                        lists[e].iter().map(|&o| NodeId::new(other, o)).collect()
                    })
                })
                .collect();
        }
        // Every edge was counted once per endpoint.
        for c in &mut edge_counts {
            *c /= 2;
        }
        HeteroGraph {
            labels: self.labels,
            lookup: self.lookup,
            adjacency,
            edge_counts,
        }
    }
}

/// Output of [`build_graph`]: the graph plus the per-node metadata later stages need.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingestion {
    pub graph: HeteroGraph,
    /// Indexed by hashtag ordinal.
    pub hashtags: Vec<HashtagInfo>,
    /// Indexed by content ordinal.
    pub contents: Vec<ContentInfo>,
    /// Indexed by category ordinal.
    pub categories: Vec<CategoryRecord>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashtagInfo {
    pub text: String,
    pub words: Vec<String>,
    /// Sorted post timestamps, one per distinct post.
    pub timestamps: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentInfo {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
}

impl HeteroGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::new()
    }

    pub fn node_count(&self, kind: NodeKind) -> usize {
        self.labels[kind.index()].len()
    }

    pub fn node_counts(&self) -> [usize; 5] {
        std::array::from_fn(|k| self.labels[k].len())
    }

    pub fn total_nodes(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edge_counts[kind.index()]
    }

    pub fn edge_counts(&self) -> [usize; 6] {
        self.edge_counts
    }

    pub fn total_edges(&self) -> usize {
        self.edge_counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_nodes() == 0
    }

    pub fn contains(&self, n: NodeId) -> bool {
        (n.ordinal as usize) < self.labels[n.kind.index()].len()
    }

    pub fn label(&self, n: NodeId) -> Result<&str, GraphError> {
        self.labels[n.kind.index()]
            .get(n.ordinal as usize)
            .map(String::as_str)
            .ok_or(GraphError::UnknownNode(n))
    }

    pub fn labels(&self, kind: NodeKind) -> &[String] {
        &self.labels[kind.index()]
    }

    pub fn find(&self, kind: NodeKind, label: &str) -> Option<NodeId> {
        self.lookup[kind.index()].get(label).map(|&ord| NodeId::new(kind, ord))
    }

    /// Sorted, duplicate-free neighbors of `n` under edge kind `k`.
    pub fn neighbors(&self, n: NodeId, k: EdgeKind) -> Result<&[NodeId], GraphError> {
        self.adjacency[n.kind.index()]
            .get(n.ordinal as usize)
            .map(|lists| lists[k.index()].as_slice())
            .ok_or(GraphError::UnknownNode(n))
    }

    /// Neighbors across every edge kind, in edge-kind order.
    pub fn all_neighbors(&self, n: NodeId) -> Result<impl Iterator<Item = NodeId> + '_, GraphError> {
        let lists = self.adjacency[n.kind.index()]
            .get(n.ordinal as usize)
            .ok_or(GraphError::UnknownNode(n))?;
        Ok(lists.iter().flatten().copied())
    }

    pub fn degree(&self, n: NodeId) -> Result<usize, GraphError> {
        let lists = self.adjacency[n.kind.index()]
            .get(n.ordinal as usize)
            .ok_or(GraphError::UnknownNode(n))?;
        Ok(lists.iter().map(Vec::len).sum())
    }

    /// Position of `n` in the global order: users, hashtags, contents, words, categories.
    pub fn global_index(&self, n: NodeId) -> usize {
        self.labels[..n.kind.index()].iter().map(Vec::len).sum::<usize>() + n.ordinal as usize
    }

    /// Every node in global order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        NodeKind::ALL
            .into_iter()
            .flat_map(move |kind| (0..self.node_count(kind) as u32).map(move |o| NodeId::new(kind, o)))
    }

    /// 64-bit FNV-1a checksum over node counts and the canonical sorted edge list.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv64::new();
        for count in self.node_counts() {
            h.write_u64(count as u64);
        }
        for a in self.nodes() {
            let ga = self.global_index(a);
            for kind in EdgeKind::ALL {
                for &b in &self.adjacency[a.kind.index()][a.ordinal as usize][kind.index()] {
                    if ga < self.global_index(b) {
                        h.write(&[kind as u8, a.kind as u8]);
                        h.write(&a.ordinal.to_le_bytes());
                        h.write(&[b.kind as u8]);
                        h.write(&b.ordinal.to_le_bytes());
                    }
                }
            }
        }
        h.finish()
    }

    /// Uniform random walk of at most `length` nodes from `start`.
    ///
    /// The choice at step `t` is drawn from a counter-based generator keyed by
    /// `(seed, start, t)`, so a walk never depends on what was sampled before it.
    /// Stops early at a node without neighbors.
    pub fn random_walk(&self, start: NodeId, length: usize, seed: u64) -> Result<Walk, GraphError> {
        if !self.contains(start) {
            return Err(GraphError::UnknownNode(start));
        }
        if length == 0 {
            return Err(GraphError::InvalidArgument("walk length must be positive".into()));
        }
        let key = walk_key(seed, start);
        let mut nodes = Vec::with_capacity(length);
        nodes.push(start);
        let mut current = start;
        for step in 1..length {
            let lists = &self.adjacency[current.kind.index()][current.ordinal as usize];
            let degree: usize = lists.iter().map(Vec::len).sum();
            if degree == 0 {
                break;
            }
            let draw = splitmix64(key ^ splitmix64(step as u64));
            let mut pick = ((u128::from(draw) * degree as u128) >> 64) as usize;
            for list in lists {
                if pick < list.len() {
                    current = list[pick];
                    break;
                }
                pick -= list.len();
            }
            nodes.push(current);
        }
        Ok(Walk { nodes, seed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<NodeId>,
    pub seed: u64,
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn walk_key(seed: u64, start: NodeId) -> u64 {
    let node = (u64::from(start.kind as u8) << 32) | u64::from(start.ordinal);
    splitmix64(splitmix64(seed) ^ node)
}

/// Builds the behavior graph from both corpora.
///
/// Edge rules:
/// - user–hashtag when the user posted with the hashtag,
/// - user–content for authorship, hashtag–content for annotation,
/// - hashtag–word for words of the hashtag's own text and of every content it annotates,
/// - hashtag–category when a hashtag word equals a category-name word, or when the
///   hashtag body and the joined category name contain one another (3+ characters),
/// - word–word for distinct words within [`WORD_WINDOW`] tokens of each other in one content.
///
/// Posts and categories are keyed by id: exact duplicates merge silently, conflicting
/// duplicates and hashtags lacking a leading `#` are reported in
/// [`Ingestion::rejected`] and skipped.
pub fn build_graph(corpus: &Corpus) -> Ingestion {
    let mut b = GraphBuilder::new();
    let mut rejected = Vec::new();
    let reject = |rejected: &mut Vec<Rejection>, file: &str, line: usize, reason: String| {
        log::warn!("{file}:{line}: {reason}");
        rejected.push(Rejection {
            file: file.to_owned(),
            line,
            reason,
        });
    };

    // Categories first so their ordinals follow the file order.
    let mut categories: Vec<CategoryRecord> = Vec::new();
    let mut category_lines: Vec<usize> = Vec::new();
    for loc in &corpus.categories {
        let rec = &loc.record;
        if let Some(existing) = b.find(NodeKind::Category, &rec.id) {
            if &categories[existing.ordinal as usize] != rec {
                let reason = format!("conflicting duplicate category id {:?}", rec.id);
                reject(&mut rejected, &corpus.categories_source, loc.line, reason);
            }
            continue;
        }
        b.node(NodeKind::Category, &rec.id);
        categories.push(rec.clone());
        category_lines.push(loc.line);
    }
    for i in 0..categories.len() {
        let Some(parent) = categories[i].parent.clone() else {
            continue;
        };
        let reason = if b.find(NodeKind::Category, &parent).is_none() {
            Some(format!("unknown parent category {parent:?}; treated as root"))
        } else if parent_cycle(&categories, &b, i) {
            Some(format!(
                "category {:?} is its own ancestor; treated as root",
                categories[i].id
            ))
        } else {
            None
        };
        if let Some(reason) = reason {
            reject(&mut rejected, &corpus.categories_source, category_lines[i], reason);
            categories[i].parent = None;
        }
    }

    // Accept posts, merging exact duplicates.
    let mut accepted: Vec<(usize, &PostRecord)> = Vec::new();
    let mut seen: HashMap<&str, &PostRecord> = HashMap::new();
    for loc in &corpus.posts {
        let rec = &loc.record;
        match seen.get(rec.id.as_str()) {
            Some(prev) if *prev == rec => {}
            Some(_) => {
                let reason = format!("conflicting duplicate post id {:?}", rec.id);
                reject(&mut rejected, &corpus.posts_source, loc.line, reason);
            }
            None => {
                seen.insert(&rec.id, rec);
                accepted.push((loc.line, rec));
            }
        }
    }

    let mut lexicon = Lexicon::new();
    for (_, post) in &accepted {
        for tok in text::tokenize(&post.text) {
            lexicon.insert(&tok);
        }
    }
    for cat in &categories {
        for tok in text::tokenize(&cat.name) {
            lexicon.insert(&tok);
        }
    }

    let mut hashtags: Vec<HashtagInfo> = Vec::new();
    let mut contents: Vec<ContentInfo> = Vec::new();
    let add = |b: &mut GraphBuilder, x: NodeId, y: NodeId, k: EdgeKind| {
        b.add_edge(x, y, k).expect("ingestion only joins valid kinds");
    };

    for (line, post) in accepted {
        let user = b.node(NodeKind::User, &post.user);
        let content = b.node(NodeKind::Content, &post.id);
        debug_assert_eq!(content.ordinal as usize, contents.len());
        contents.push(ContentInfo {
            id: post.id.clone(),
            sentences: text::sentences(&post.text),
        });
        add(&mut b, user, content, EdgeKind::UserContent);

        let tokens = text::tokenize(&post.text);
        let words: Vec<NodeId> = tokens.iter().map(|t| b.node(NodeKind::Word, t)).collect();
        for i in 0..words.len() {
            for j in i + 1..words.len().min(i + WORD_WINDOW) {
                if words[i] != words[j] {
                    add(&mut b, words[i], words[j], EdgeKind::WordWord);
                }
            }
        }

        let mut tags_in_post = HashSet::new();
        for tag in &post.hashtags {
            if text::hashtag_body(tag).is_none() {
                let reason = format!("post {:?}: hashtag {tag:?} does not start with '#'", post.id);
                reject(&mut rejected, &corpus.posts_source, line, reason);
                continue;
            }
            if !tags_in_post.insert(tag.as_str()) {
                continue;
            }
            let is_new = b.find(NodeKind::Hashtag, tag).is_none();
            let h = b.node(NodeKind::Hashtag, tag);
            if is_new {
                let own = text::hashtag_words(tag, &lexicon);
                for w in &own {
                    let wn = b.node(NodeKind::Word, w);
                    add(&mut b, h, wn, EdgeKind::HashtagWord);
                }
                hashtags.push(HashtagInfo {
                    text: tag.clone(),
                    words: own,
                    timestamps: Vec::new(),
                });
            }
            hashtags[h.ordinal as usize].timestamps.push(post.timestamp);
            add(&mut b, user, h, EdgeKind::UserHashtag);
            add(&mut b, h, content, EdgeKind::HashtagContent);
            for &w in &words {
                add(&mut b, h, w, EdgeKind::HashtagWord);
            }
        }
    }

    let category_words: Vec<(Vec<String>, String)> = categories
        .iter()
        .map(|c| {
            let toks = text::tokenize(&c.name);
            let joined = toks.concat();
            (toks, joined)
        })
        .collect();
    for (ho, info) in hashtags.iter_mut().enumerate() {
        info.timestamps.sort_unstable();
        let body: String = text::tokenize(text::hashtag_body(&info.text).unwrap_or_default()).concat();
        for (co, (toks, joined)) in category_words.iter().enumerate() {
            if hashtag_matches_category(&info.words, &body, toks, joined) {
                add(
                    &mut b,
                    NodeId::hashtag(ho as u32),
                    NodeId::category(co as u32),
                    EdgeKind::HashtagCategory,
                );
            }
        }
    }

    Ingestion {
        graph: b.build(),
        hashtags,
        contents,
        categories,
        rejected,
    }
}

const MIN_SUBSTRING_MATCH: usize = 3;

fn hashtag_matches_category(words: &[String], body: &str, cat_tokens: &[String], joined: &str) -> bool {
    if words.iter().any(|w| cat_tokens.contains(w)) {
        return true;
    }
    if joined.is_empty() || body.is_empty() {
        return false;
    }
    (joined.chars().count() >= MIN_SUBSTRING_MATCH && body.contains(joined))
        || (body.chars().count() >= MIN_SUBSTRING_MATCH && joined.contains(body))
}

/// True when following parent links from `start` leads back to `start`.
fn parent_cycle(categories: &[CategoryRecord], b: &GraphBuilder, start: usize) -> bool {
    let mut cur = start;
    for _ in 0..categories.len() {
        let Some(p) = categories[cur]
            .parent
            .as_ref()
            .and_then(|p| b.find(NodeKind::Category, p))
        else {
            return false;
        };
        cur = p.ordinal as usize;
        if cur == start {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Corpus;

    fn post(id: &str, user: &str, text: &str, tags: &[&str], ts: i64) -> PostRecord {
        PostRecord {
            id: id.into(),
            user: user.into(),
            text: text.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            timestamp: ts,
        }
    }

    fn cat(id: &str, name: &str, parent: Option<&str>) -> CategoryRecord {
        CategoryRecord {
            id: id.into(),
            name: name.into(),
            parent: parent.map(Into::into),
        }
    }

    fn single_post_corpus() -> Corpus {
        Corpus::from_records(
            vec![post("c0", "u0", "great shoes", &["#shoes"], 100)],
            vec![cat("shoes", "shoes", None)],
        )
    }

    fn edge_set(g: &HeteroGraph) -> BTreeSet<(EdgeKind, String, String)> {
        let mut out = BTreeSet::new();
        for a in g.nodes() {
            for k in EdgeKind::ALL {
                for &b in g.neighbors(a, k).unwrap() {
                    if g.global_index(a) < g.global_index(b) {
                        let la = format!("{}:{}", a.kind.name(), g.label(a).unwrap());
                        let lb = format!("{}:{}", b.kind.name(), g.label(b).unwrap());
                        out.insert((k, la, lb));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn single_post_matches_hand_applied_edge_rules() {
        let ing = build_graph(&single_post_corpus());
        let g = &ing.graph;
        assert_eq!(g.node_counts(), [1, 1, 1, 2, 1]);
        let expected: BTreeSet<(EdgeKind, String, String)> = [
            (EdgeKind::UserHashtag, "user:u0", "hashtag:#shoes"),
            (EdgeKind::UserContent, "user:u0", "content:c0"),
            (EdgeKind::HashtagContent, "hashtag:#shoes", "content:c0"),
            (EdgeKind::HashtagWord, "hashtag:#shoes", "word:great"),
            (EdgeKind::HashtagWord, "hashtag:#shoes", "word:shoes"),
            (EdgeKind::HashtagCategory, "hashtag:#shoes", "category:shoes"),
            (EdgeKind::WordWord, "word:great", "word:shoes"),
        ]
        .into_iter()
        .map(|(k, a, b)| (k, a.to_string(), b.to_string()))
        .collect();
        assert_eq!(edge_set(g), expected);
        assert_eq!(g.total_edges(), 7);
        assert!(ing.rejected.is_empty());
    }

    #[test]
    fn hashtag_word_neighbors_are_sorted() {
        let ing = build_graph(&single_post_corpus());
        let g = &ing.graph;
        let tag = g.find(NodeKind::Hashtag, "#shoes").unwrap();
        let words: Vec<&str> = g
            .neighbors(tag, EdgeKind::HashtagWord)
            .unwrap()
            .iter()
            .map(|&w| g.label(w).unwrap())
            .collect();
        assert_eq!(words, vec!["great", "shoes"]);
    }

    #[test]
    fn empty_corpus_gives_empty_graph() {
        let ing = build_graph(&Corpus::default());
        assert!(ing.graph.is_empty());
        assert_eq!(ing.graph.node_counts(), [0; 5]);
        assert_eq!(ing.graph.edge_counts(), [0; 6]);
    }

    #[test]
    fn duplicate_ingestion_is_idempotent() {
        let once = single_post_corpus();
        let mut twice = once.clone();
        twice.posts.extend(once.posts.clone());
        twice.categories.extend(once.categories.clone());
        let a = build_graph(&once);
        let b = build_graph(&twice);
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.hashtags, b.hashtags);
        assert!(b.rejected.is_empty());
    }

    #[test]
    fn hashtag_without_hash_is_rejected_and_ingestion_continues() {
        let corpus = Corpus::from_records(
            vec![
                post("p1", "u0", "red shoes", &["shoes", "#red"], 1),
                post("p2", "u1", "blue", &["#blue"], 2),
            ],
            vec![],
        );
        let ing = build_graph(&corpus);
        assert_eq!(ing.rejected.len(), 1);
        assert_eq!(ing.rejected[0].line, 1);
        assert!(ing.rejected[0].reason.contains("\"shoes\""));
        assert_eq!(ing.graph.node_count(NodeKind::Hashtag), 2);
        assert_eq!(ing.graph.node_count(NodeKind::User), 2);
    }

    #[test]
    fn conflicting_duplicates_are_reported() {
        let corpus = Corpus::from_records(
            vec![
                post("p1", "u0", "a text", &["#x"], 1),
                post("p1", "u0", "other", &["#x"], 1),
            ],
            vec![cat("c", "x", None), cat("c", "y", None), cat("d", "z", Some("missing"))],
        );
        let ing = build_graph(&corpus);
        assert_eq!(ing.rejected.len(), 3);
        assert_eq!(ing.categories[1].parent, None);
    }

    #[test]
    fn category_cycles_are_broken() {
        let corpus = Corpus::from_records(
            vec![],
            vec![
                cat("a", "a", Some("b")),
                cat("b", "b", Some("a")),
                cat("c", "c", Some("a")),
            ],
        );
        let ing = build_graph(&corpus);
        // "a" is detected first and becomes a root, which also breaks "b"'s cycle.
        assert_eq!(ing.categories[0].parent, None);
        assert_eq!(ing.categories[1].parent.as_deref(), Some("a"));
        assert_eq!(ing.categories[2].parent.as_deref(), Some("a"));
        assert_eq!(ing.rejected.len(), 1);
    }

    #[test]
    fn run_together_hashtag_matches_category_by_substring() {
        let corpus = Corpus::from_records(
            vec![post("p", "u", "glow tips", &["#BeautyTips", "#skinglow"], 1)],
            vec![cat("b", "Beauty", None), cat("s", "skin care", None)],
        );
        let ing = build_graph(&corpus);
        let g = &ing.graph;
        let beauty_tags = g.neighbors(NodeId::category(0), EdgeKind::HashtagCategory).unwrap();
        assert_eq!(beauty_tags, &[NodeId::hashtag(0)]);
        // "skinglow" segments into [skin, glow] with the lexicon, matching "skin".
        assert_eq!(ing.hashtags[1].words, vec!["skin", "glow"]);
        let skin_tags = g.neighbors(NodeId::category(1), EdgeKind::HashtagCategory).unwrap();
        assert_eq!(skin_tags, &[NodeId::hashtag(1)]);
    }

    #[test]
    fn word_window_limits_cooccurrence() {
        let corpus = Corpus::from_records(vec![post("p", "u", "aa bb cc dd ee ff", &[], 1)], vec![]);
        let g = build_graph(&corpus).graph;
        let aa = g.find(NodeKind::Word, "aa").unwrap();
        let labels: Vec<&str> = g
            .neighbors(aa, EdgeKind::WordWord)
            .unwrap()
            .iter()
            .map(|&n| g.label(n).unwrap())
            .collect();
        assert_eq!(labels, vec!["bb", "cc", "dd", "ee"]);
    }

    #[test]
    fn neighbors_symmetric_after_add() {
        let mut b = HeteroGraph::builder();
        let u = b.node(NodeKind::User, "u0");
        let h = b.node(NodeKind::Hashtag, "#a");
        let lonely = b.node(NodeKind::Word, "lonely");
        assert!(b.add_edge(u, h, EdgeKind::UserHashtag).unwrap());
        assert!(!b.add_edge(h, u, EdgeKind::UserHashtag).unwrap());
        let g = b.build();
        assert_eq!(g.neighbors(u, EdgeKind::UserHashtag).unwrap(), &[h]);
        assert_eq!(g.neighbors(h, EdgeKind::UserHashtag).unwrap(), &[u]);
        assert!(g.neighbors(lonely, EdgeKind::WordWord).unwrap().is_empty());
        assert_eq!(g.edge_count(EdgeKind::UserHashtag), 1);
    }

    #[test]
    fn invalid_edges_and_lookups_fail() {
        let mut b = HeteroGraph::builder();
        let u = b.node(NodeKind::User, "u0");
        let w = b.node(NodeKind::Word, "w");
        assert!(matches!(
            b.add_edge(u, w, EdgeKind::UserHashtag),
            Err(GraphError::EdgeKindMismatch { .. })
        ));
        assert!(matches!(
            b.add_edge(w, w, EdgeKind::WordWord),
            Err(GraphError::SelfLoop(_))
        ));
        let g = b.build();
        let ghost = NodeId::hashtag(9);
        assert_eq!(
            g.neighbors(ghost, EdgeKind::UserHashtag),
            Err(GraphError::UnknownNode(ghost))
        );
        assert_eq!(g.random_walk(ghost, 3, 0).unwrap_err(), GraphError::UnknownNode(ghost));
    }

    #[test]
    fn walk_from_isolated_node_is_just_start() {
        let mut b = HeteroGraph::builder();
        let w = b.node(NodeKind::Word, "w");
        let g = b.build();
        assert_eq!(g.random_walk(w, 5, 1).unwrap().nodes, vec![w]);
    }

    #[test]
    fn two_node_walk_alternates() {
        let mut b = HeteroGraph::builder();
        let u = b.node(NodeKind::User, "u0");
        let h = b.node(NodeKind::Hashtag, "#a");
        b.add_edge(u, h, EdgeKind::UserHashtag).unwrap();
        let g = b.build();
        for seed in [0, 1, 99, u64::MAX] {
            assert_eq!(g.random_walk(u, 4, seed).unwrap().nodes, vec![u, h, u, h]);
        }
    }

    #[test]
    fn digest_changes_with_edges_and_not_with_duplicates() {
        let a = build_graph(&single_post_corpus()).graph;
        let mut twice = single_post_corpus();
        twice.posts.push(twice.posts[0].clone());
        assert_eq!(a.digest(), build_graph(&twice).graph.digest());
        let other = Corpus::from_records(
            vec![post("c0", "u0", "great red shoes", &["#shoes"], 100)],
            vec![cat("shoes", "shoes", None)],
        );
        assert_ne!(a.digest(), build_graph(&other).graph.digest());
    }
}
