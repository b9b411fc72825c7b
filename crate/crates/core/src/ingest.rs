//! Line-delimited JSON ingestion of posts and categories.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{file}:{line}: malformed record: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

/// One micro-video post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub user: String,
    pub text: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    pub timestamp: i64,
}

/// One node of the (multilevel) category taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRecord {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
}

/// A record together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Located<T> {
    pub line: usize,
    pub record: T,
}

/// A record (or part of one) skipped during graph construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub file: String,
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.line, self.reason)
    }
}

/// Both ingestion corpora, kept separate as they arrive from different platforms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub posts_source: String,
    pub posts: Vec<Located<PostRecord>>,
    pub categories_source: String,
    pub categories: Vec<Located<CategoryRecord>>,
}

impl Corpus {
    /// In-memory corpus; line numbers are 1-based positions.
    pub fn from_records(posts: Vec<PostRecord>, categories: Vec<CategoryRecord>) -> Self {
        Self {
            posts_source: "<posts>".into(),
            posts: locate(posts),
            categories_source: "<categories>".into(),
            categories: locate(categories),
        }
    }

    pub fn load(posts: &Path, categories: &Path) -> Result<Self, IngestError> {
        Ok(Self {
            posts_source: posts.display().to_string(),
            posts: read_jsonl(posts)?,
            categories_source: categories.display().to_string(),
            categories: read_jsonl(categories)?,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty() && self.categories.is_empty()
    }
}

fn locate<T>(records: Vec<T>) -> Vec<Located<T>> {
    records
        .into_iter()
        .enumerate()
        .map(|(i, record)| Located { line: i + 1, record })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<Located<T>>, IngestError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        file: file.clone(),
        source,
    })?;
    parse_jsonl(&text, &file)
}

/// Parses line-delimited JSON. Blank lines are skipped; any other unparsable line is an
/// error naming `file` and the 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, file: &str) -> Result<Vec<Located<T>>, IngestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| IngestError::Malformed {
            file: file.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(Located { line: i + 1, record });
    }
    Ok(out)
}
