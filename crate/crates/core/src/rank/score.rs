use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::trending::trending;
use super::{FusionLayer, RankError};
use crate::index::HashtagRecord;
use crate::linalg::dot;
use crate::ShapeError;

/// Weights of the three normalized signals in the re-ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankWeights {
    pub similarity: f64,
    pub popularity: f64,
    pub trend: f64,
}

impl Default for RerankWeights {
    fn default() -> Self {
        Self {
            similarity: 0.6,
            popularity: 0.3,
            trend: 0.1,
        }
    }
}

impl RerankWeights {
    pub const SIMILARITY_ONLY: RerankWeights = RerankWeights {
        similarity: 1.0,
        popularity: 0.0,
        trend: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingOptions {
    pub top_n: usize,
    pub min_post_count: Option<u64>,
    pub max_post_count: Option<u64>,
    /// Half-open `[start, end)` in epoch seconds.
    pub trend_window: Option<(i64, i64)>,
    pub rerank_weights: RerankWeights,
}

impl Default for RankingOptions {
    fn default() -> Self {
        Self {
            top_n: 10,
            min_post_count: None,
            max_post_count: None,
            trend_window: None,
            rerank_weights: RerankWeights::default(),
        }
    }
}

impl RankingOptions {
    pub fn top(n: usize) -> Self {
        Self {
            top_n: n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RankError> {
        if let (Some(lo), Some(hi)) = (self.min_post_count, self.max_post_count) {
            if lo > hi {
                return Err(RankError::InvalidOptions(format!(
                    "min_post_count {lo} exceeds max_post_count {hi}"
                )));
            }
        }
        let w = self.rerank_weights;
        let parts = [w.similarity, w.popularity, w.trend];
        if parts.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RankError::InvalidOptions("rerank weights must be non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RankError::InvalidOptions(format!("rerank weights sum to {sum}, not 1")));
        }
        if let Some((start, end)) = self.trend_window {
            if start >= end {
                return Err(RankError::InvalidWindow { start, end });
            }
        }
        Ok(())
    }

    pub fn admits(&self, post_count: u64) -> bool {
        self.min_post_count.is_none_or(|lo| post_count >= lo) && self.max_post_count.is_none_or(|hi| post_count <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHashtag {
    pub hashtag: String,
    pub similarity: f64,
    pub rerank_score: f64,
    pub post_count: u64,
    /// Record id in the inverted index.
    pub index_ref: u32,
    /// No data source exists; always null.
    pub search_volume: Option<f64>,
}

/// `fuse(u_content, u_hashtag) · keyword + hashtag · keyword`.
pub fn similarity(
    u_hashtag: &[f64],
    u_content: &[f64],
    hashtag: &[f64],
    keyword: &[f64],
    layer: &FusionLayer,
) -> Result<f64, ShapeError> {
    let d = layer.dim();
    for (what, v) in [("hashtag vector", hashtag), ("keyword vector", keyword)] {
        if v.len() != d {
            return Err(ShapeError::new(what, d, v.len()));
        }
    }
    let user = layer.fuse(u_content, u_hashtag)?;
    Ok(dot(&user, keyword) + dot(hashtag, keyword))
}

/// Maps `values` onto `[0, 1]`; all zeros when they are all equal.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    values
        .iter()
        .map(|v| if range > 0.0 { (v - lo) / range } else { 0.0 })
        .collect()
}

/// Descending score, then ascending hashtag text.
pub fn result_order(a: &ScoredHashtag, b: &ScoredHashtag) -> Ordering {
    b.rerank_score
        .total_cmp(&a.rerank_score)
        .then_with(|| a.hashtag.cmp(&b.hashtag))
}

/// Re-ranks already filtered candidates and keeps the best `opts.top_n`.
pub fn rerank(candidates: &[(&HashtagRecord, f64)], opts: &RankingOptions) -> Vec<ScoredHashtag> {
    if opts.top_n == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let sims: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    let pops: Vec<f64> = candidates.iter().map(|c| (c.0.post_count as f64).ln_1p()).collect();
    let trends: Vec<f64> = candidates
        .iter()
        .map(|c| match opts.trend_window {
            Some((s, e)) => trending(&c.0.timestamps, s, e).unwrap_or(0.0),
            None => 0.0,
        })
        .collect();
    let (zs, zp, zt) = (min_max(&sims), min_max(&pops), min_max(&trends));
    let w = opts.rerank_weights;
    let mut out: Vec<ScoredHashtag> = candidates
        .iter()
        .enumerate()
        .map(|(i, (r, sim))| ScoredHashtag {
            hashtag: r.text.clone(),
            similarity: *sim,
            rerank_score: w.similarity * zs[i] + w.popularity * zp[i] + w.trend * zt[i],
            post_count: r.post_count,
            index_ref: r.id,
            search_volume: None,
        })
        .collect();
    out.sort_by(result_order);
    out.truncate(opts.top_n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;
    use crate::linalg::{Activation, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(id: u32, posts: u64) -> HashtagRecord {
        HashtagRecord {
            id,
            text: format!("#h{id:02}"),
            tokens: vec![],
            post_count: posts,
            timestamps: (0..posts as i64).collect(),
            node: NodeId::hashtag(id),
        }
    }

    #[test]
    fn similarity_cases() {
        let zero = FusionLayer::new(Matrix::zeros(2, 4), vec![0.0; 2], Activation::Identity).unwrap();
        let e1 = [1.0, 0.0];
        assert_eq!(
            similarity(&[0.3, 0.2], &[0.1, 0.9], &[0.5, 0.5], &[0.0, 0.0], &zero).unwrap(),
            0.0
        );
        assert_eq!(similarity(&[0.3, 0.2], &[0.1, 0.9], &e1, &e1, &zero).unwrap(), 1.0);
        assert!(similarity(&[0.0; 2], &[0.0; 2], &[1.0], &e1, &zero).is_err());
    }

    #[test]
    fn similarity_matches_scripted_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 3;
        let layer = FusionLayer::init(d, 0.7, Activation::Tanh, &mut rng);
        let mut v = || (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (uh, uc, h, k) = (v(), v(), v(), v());
        let mut expected = 0.0;
        for i in 0..d {
            let mut pre = layer.bias[i];
            for j in 0..d {
                pre += layer.weight.get(i, j) * uc[j] + layer.weight.get(i, d + j) * uh[j];
            }
            expected += pre.tanh() * k[i] + h[i] * k[i];
        }
        let got = similarity(&uh, &uc, &h, &k, &layer).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn options_validation() {
        assert!(RankingOptions::default().validate().is_ok());
        let mut o = RankingOptions::top(3);
        o.min_post_count = Some(5);
        o.max_post_count = Some(2);
        assert!(o.validate().is_err());
        let mut o = RankingOptions::top(3);
        o.rerank_weights.trend = 0.2;
        assert!(o.validate().is_err());
        let mut o = RankingOptions::top(3);
        o.trend_window = Some((4, 4));
        assert!(matches!(o.validate(), Err(RankError::InvalidWindow { .. })));
        let mut o = RankingOptions::top(3);
        o.min_post_count = Some(2);
        assert!(!o.admits(1) && o.admits(2) && o.admits(1000));
    }

    #[test]
    fn rerank_orders_and_truncates() {
        let recs: Vec<_> = (0..5).map(|i| rec(i, i as u64 + 1)).collect();
        let cands: Vec<_> = recs.iter().zip([0.5, 0.9, 0.5, -1.0, 0.2]).collect();
        let mut opts = RankingOptions::top(0);
        assert!(rerank(&cands, &opts).is_empty());
        opts.top_n = 10;
        opts.rerank_weights = RerankWeights::SIMILARITY_ONLY;
        let names: Vec<_> = rerank(&cands, &opts).into_iter().map(|s| s.hashtag).collect();
        // Equal similarity ties break on the hashtag text.
        assert_eq!(names, ["#h01", "#h00", "#h02", "#h04", "#h03"]);
        opts.top_n = 2;
        assert_eq!(rerank(&cands, &opts).len(), 2);
        assert_eq!(min_max(&[3.0, 3.0]), vec![0.0, 0.0]);
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    }
}
