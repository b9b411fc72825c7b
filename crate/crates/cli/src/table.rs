use std::fmt::Write;

use hashbridge_core::ScoredHashtag;

pub const HEADER: [&str; 5] = ["rank", "hashtag", "similarity", "rerank_score", "post_count"];

/// Fixed-width rows, scores to six decimals. The hashtag column widens to fit.
pub fn render(rows: &[ScoredHashtag]) -> String {
    let w = rows
        .iter()
        .map(|r| r.hashtag.chars().count())
        .max()
        .unwrap_or(0)
        .max(HEADER[1].len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4}  {:<w$}  {:>12}  {:>12}  {:>10}",
        HEADER[0], HEADER[1], HEADER[2], HEADER[3], HEADER[4]
    );
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>4}  {:<w$}  {:>12.6}  {:>12.6}  {:>10}",
            i + 1,
            r.hashtag,
            r.similarity,
            r.rerank_score,
            r.post_count
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_line_up() {
        let row = |h: &str, s: f64| ScoredHashtag {
            hashtag: h.into(),
            similarity: s,
            rerank_score: 0.5,
            post_count: 12,
            index_ref: 0,
            search_volume: None,
        };
        let t = render(&[row("#a", 1.0), row("#muchlongerhashtag", -0.25)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
        assert!(lines[2].contains("-0.250000"));
        assert!(render(&[]).starts_with("rank"));
    }
}
