//! The immutable bundle the query side loads: embeddings, learned weights, encoder,
//! index, category tree and build metadata.
//!
//! File layout: the 8-byte magic `HBSNAP01`, then nine sections in fixed order, each
//! a 4-byte ASCII tag, a little-endian `u64` payload length and the payload, then an
//! FNV-1a 64 checksum over everything before it. Floats are stored as little-endian
//! `f32`. `docs/snapshot-format.md` lists every field.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::codec::{fnv64, ByteReader, ByteWriter};
use crate::embed::{AggregationWeights, EmbeddingTable, TrainConfig};
use crate::graph::NodeKind;
use crate::index::InvertedIndex;
use crate::linalg::{Activation, Matrix};
use crate::rank::FusionLayer;
use crate::semantic::{BiGru, GruParams, TextEncoder, Vocab};

pub const MAGIC: &[u8; 8] = b"HBSNAP01";
pub const FORMAT_VERSION: u32 = 1;
pub const SECTIONS: [&str; 9] = ["HEAD", "EMBD", "VOCB", "SEMN", "FUSN", "UCTX", "INDX", "CATS", "META"];

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot format version {0}")]
    UnsupportedVersion(u32),
    #[error("section {section}: truncated, needed {needed} bytes but {available} remain")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("expected section {expected}, found {found:?}")]
    MissingSection { expected: &'static str, found: String },
    #[error("section {section}: {reason}")]
    Corrupt { section: &'static str, reason: String },
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeta {
    pub digest: u64,
    /// Latest post timestamp of the training corpus; keeps rebuilds byte-identical.
    pub created_at: i64,
    pub config_hash: u64,
    pub config: TrainConfig,
}

/// Preference vectors used as query-time user context.
#[derive(Debug, Clone, PartialEq)]
pub struct UserContexts {
    /// Mean over users with at least one hashtag; zero when there are none.
    pub global_hashtag: Vec<f64>,
    pub global_content: Vec<f64>,
    /// Per hashtag ordinal: mean preference of the users who posted it.
    pub per_hashtag: Vec<(Vec<f64>, Vec<f64>)>,
}

/// One category; its node ordinal is its position in [`ModelSnapshot::categories`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryEntry {
    pub id: String,
    pub name: String,
    pub parent: Option<String>,
    /// Hashtag ordinals sharing an edge with the category.
    pub hashtags: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryTreeNode {
    pub id: String,
    pub name: String,
    pub hashtag_count: usize,
    pub children: Vec<CategoryTreeNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub meta: SnapshotMeta,
    /// Input vectors only; context vectors are a training artifact and are not kept.
    pub embeddings: EmbeddingTable,
    pub aggregation: AggregationWeights,
    pub encoder: TextEncoder,
    pub fusion: FusionLayer,
    pub user_context: UserContexts,
    pub index: InvertedIndex,
    pub categories: Vec<CategoryEntry>,
}

fn corrupt(section: &'static str, reason: impl Into<String>) -> SnapshotError {
    SnapshotError::Corrupt {
        section,
        reason: reason.into(),
    }
}

fn matrix(r: &mut ByteReader<'_>, section: &'static str, rows: usize, cols: usize) -> Result<Matrix, SnapshotError> {
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| corrupt(section, "matrix size overflow"))?;
    Matrix::from_vec(rows, cols, r.f32s(n)?).map_err(|e| corrupt(section, e.to_string()))
}

fn activation(r: &mut ByteReader<'_>, section: &'static str) -> Result<Activation, SnapshotError> {
    let c = r.u8()?;
    Activation::from_code(c).ok_or_else(|| corrupt(section, format!("unknown activation code {c}")))
}

/// Word vectors as encoder token embeddings: reserved rows zero, then word ordinals.
pub fn token_embeddings(table: &EmbeddingTable) -> Matrix {
    let rows = table.kind_rows(NodeKind::Word);
    let mut m = Matrix::zeros(rows.len() + 2, table.dim());
    for (i, r) in rows.enumerate() {
        m.row_mut(i + 2).copy_from_slice(table.vectors().row(r));
    }
    m
}

fn write_gru(w: &mut ByteWriter, p: &GruParams) {
    for t in p.tensors() {
        w.f32s(t);
    }
}

fn read_gru(r: &mut ByteReader<'_>, input: usize, hidden: usize) -> Result<GruParams, SnapshotError> {
    let mut p = GruParams::zeros(input, hidden);
    let flat = r.f32s(p.param_count())?;
    p.load_flat(&flat);
    Ok(p)
}

impl ModelSnapshot {
    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    /// Rounds every stored float through `f32`, matching what a reload yields.
    pub fn quantized(&self) -> Result<Self, SnapshotError> {
        Self::from_bytes(&self.to_bytes())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dim();
        let mut out = ByteWriter::new();
        out.bytes(MAGIC);
        let mut sections: Vec<ByteWriter> = (0..SECTIONS.len()).map(|_| ByteWriter::new()).collect();

        let w = &mut sections[0];
        w.u32(FORMAT_VERSION);
        w.u64(self.meta.digest);
        w.i64(self.meta.created_at);
        w.u64(self.meta.config_hash);

        let w = &mut sections[1];
        w.len32(dim);
        for c in self.embeddings.node_counts() {
            w.len32(c);
        }
        w.f32s(self.embeddings.vectors().as_slice());
        w.f32s(self.aggregation.hashtag.as_slice());
        w.f32s(self.aggregation.content.as_slice());

        let w = &mut sections[2];
        w.len32(self.encoder.vocab.words().len());
        for word in self.encoder.vocab.words() {
            w.str(word);
        }

        let w = &mut sections[3];
        w.len32(self.encoder.word.input_dim());
        w.len32(self.encoder.word.hidden_dim());
        w.len32(self.encoder.sentence.hidden_dim());
        for level in [&self.encoder.word, &self.encoder.sentence] {
            write_gru(w, &level.forward);
            write_gru(w, &level.backward);
        }

        let w = &mut sections[4];
        w.u8(self.fusion.activation.code());
        w.f32s(self.fusion.weight.as_slice());
        w.f32s(&self.fusion.bias);

        let w = &mut sections[5];
        w.f32s(&self.user_context.global_hashtag);
        w.f32s(&self.user_context.global_content);
        w.len32(self.user_context.per_hashtag.len());
        for (h, c) in &self.user_context.per_hashtag {
            w.f32s(h);
            w.f32s(c);
        }

        self.index.encode(&mut sections[6]);

        let w = &mut sections[7];
        w.len32(self.categories.len());
        for c in &self.categories {
            w.str(&c.id);
            w.str(&c.name);
            match &c.parent {
                Some(p) => {
                    w.u8(1);
                    w.str(p);
                }
                None => w.u8(0),
            }
            w.len32(c.hashtags.len());
            for &h in &c.hashtags {
                w.u32(h);
            }
        }

        let w = &mut sections[8];
        w.str(&serde_json::to_string(&self.meta.config).expect("config serializes"));

        for (tag, body) in SECTIONS.iter().zip(sections) {
            out.bytes(tag.as_bytes());
            out.u64(body.len() as u64);
            out.bytes(&body.into_bytes());
        }
        let mut bytes = out.into_bytes();
        let sum = fnv64(&bytes);
        bytes.extend_from_slice(&sum.to_le_bytes());
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let mut outer = ByteReader::new(&bytes[MAGIC.len()..], "file");
        let mut payloads = Vec::with_capacity(SECTIONS.len());
        for &name in &SECTIONS {
            let tag = outer.take(4).map_err(|_| SnapshotError::Truncated {
                section: name,
                needed: 4,
                available: outer.remaining(),
            })?;
            if tag != name.as_bytes() {
                return Err(SnapshotError::MissingSection {
                    expected: name,
                    found: String::from_utf8_lossy(tag).into_owned(),
                });
            }
            let len = outer.u64().map_err(|_| SnapshotError::Truncated {
                section: name,
                needed: 8,
                available: outer.remaining(),
            })?;
            let len = usize::try_from(len).map_err(|_| corrupt(name, "section length overflow"))?;
            let body = outer.take(len).map_err(|_| SnapshotError::Truncated {
                section: name,
                needed: len,
                available: outer.remaining(),
            })?;
            payloads.push(ByteReader::new(body, name));
        }
        let stored = outer.u64().map_err(|_| SnapshotError::Truncated {
            section: "checksum",
            needed: 8,
            available: outer.remaining(),
        })?;
        outer.finish()?;
        let computed = fnv64(&bytes[..bytes.len() - 8]);
        if stored != computed {
            return Err(SnapshotError::Checksum { stored, computed });
        }
        let mut it = payloads.into_iter();
        let mut next = || it.next().expect("nine sections");

        let mut r = next();
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let digest = r.u64()?;
        let created_at = r.i64()?;
        let config_hash = r.u64()?;
        r.finish()?;

        let mut r = next();
        let dim = r.len32()?;
        let mut counts = [0usize; 5];
        for c in &mut counts {
            *c = r.len32()?;
        }
        let total: usize = counts.iter().sum();
        let vectors = matrix(&mut r, "EMBD", total, dim)?;
        let aggregation = AggregationWeights {
            hashtag: matrix(&mut r, "EMBD", dim, dim)?,
            content: matrix(&mut r, "EMBD", dim, dim)?,
        };
        r.finish()?;
        let embeddings = EmbeddingTable::from_parts(counts, vectors, Matrix::zeros(0, dim));

        let mut r = next();
        let n = r.len32()?;
        let words = (0..n).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        let vocab = Vocab::from_words(&words);
        if vocab.words().len() != words.len() || words.len() != counts[NodeKind::Word.index()] {
            return Err(corrupt("VOCB", "vocabulary does not match the word nodes"));
        }

        let mut r = next();
        let e = r.len32()?;
        let h_word = r.len32()?;
        let h_sent = r.len32()?;
        if e != dim {
            return Err(corrupt("SEMN", format!("token width {e} differs from dimension {dim}")));
        }
        let word = BiGru::new(read_gru(&mut r, e, h_word)?, read_gru(&mut r, e, h_word)?)
            .map_err(|err| corrupt("SEMN", err.to_string()))?;
        let sentence = BiGru::new(
            read_gru(&mut r, 2 * h_word, h_sent)?,
            read_gru(&mut r, 2 * h_word, h_sent)?,
        )
        .map_err(|err| corrupt("SEMN", err.to_string()))?;
        r.finish()?;
        let encoder = TextEncoder::new(vocab, token_embeddings(&embeddings), word, sentence)
            .map_err(|err| corrupt("SEMN", err.to_string()))?;

        let mut r = next();
        let act = activation(&mut r, "FUSN")?;
        let weight = matrix(&mut r, "FUSN", dim, 2 * dim)?;
        let bias = r.f32s(dim)?;
        r.finish()?;
        let fusion = FusionLayer::new(weight, bias, act).map_err(|err| corrupt("FUSN", err.to_string()))?;

        let mut r = next();
        let global_hashtag = r.f32s(dim)?;
        let global_content = r.f32s(dim)?;
        let n = r.len32()?;
        if n != counts[NodeKind::Hashtag.index()] {
            return Err(corrupt("UCTX", "one context per hashtag expected"));
        }
        let per_hashtag = (0..n)
            .map(|_| Ok((r.f32s(dim)?, r.f32s(dim)?)))
            .collect::<Result<Vec<_>, SnapshotError>>()?;
        r.finish()?;
        let user_context = UserContexts {
            global_hashtag,
            global_content,
            per_hashtag,
        };

        let mut r = next();
        let index = InvertedIndex::decode(&mut r)?;
        r.finish()?;

        let mut r = next();
        let n = r.len32()?;
        if n != counts[NodeKind::Category.index()] {
            return Err(corrupt("CATS", "one entry per category node expected"));
        }
        let mut categories = Vec::with_capacity(n);
        for _ in 0..n {
            let id = r.str()?;
            let name = r.str()?;
            let parent = match r.u8()? {
                0 => None,
                1 => Some(r.str()?),
                f => return Err(corrupt("CATS", format!("bad parent flag {f}"))),
            };
            let k = r.len32()?;
            let hashtags = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
            categories.push(CategoryEntry {
                id,
                name,
                parent,
                hashtags,
            });
        }
        r.finish()?;

        let mut r = next();
        let json = r.str()?;
        r.finish()?;
        let config: TrainConfig = serde_json::from_str(&json).map_err(|err| corrupt("META", err.to_string()))?;

        Ok(Self {
            meta: SnapshotMeta {
                digest,
                created_at,
                config_hash,
                config,
            },
            embeddings,
            aggregation,
            encoder,
            fusion,
            user_context,
            index,
            categories,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        fs::write(path, self.to_bytes()).map_err(|source| SnapshotError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        let bytes = fs::read(path).map_err(|source| SnapshotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Roots in file order, children nested under their parents.
    pub fn category_tree(&self) -> Vec<CategoryTreeNode> {
        fn build(all: &[CategoryEntry], parent: Option<&str>) -> Vec<CategoryTreeNode> {
            all.iter()
                .filter(|c| c.parent.as_deref() == parent)
                .map(|c| CategoryTreeNode {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    hashtag_count: c.hashtags.len(),
                    children: build(all, Some(&c.id)),
                })
                .collect()
        }
        build(&self.categories, None)
    }
}
