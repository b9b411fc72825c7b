use super::RankError;

pub const HISTOGRAM_BUCKETS: usize = 10;

fn check(start: i64, end: i64) -> Result<(), RankError> {
    if start >= end {
        return Err(RankError::InvalidWindow { start, end });
    }
    Ok(())
}

/// Window midpoint; the first half is `[start, mid)`, the second `[mid, end)`.
pub fn midpoint(start: i64, end: i64) -> i64 {
    start + ((end as i128 - start as i128) / 2) as i64
}

/// Relative growth between the halves of the half-open window `[start, end)`:
/// `(second − first) / max(1, first)`.
pub fn trending(timestamps: &[i64], start: i64, end: i64) -> Result<f64, RankError> {
    check(start, end)?;
    let mid = midpoint(start, end);
    let (mut first, mut second) = (0u64, 0u64);
    for &t in timestamps {
        if t >= start && t < mid {
            first += 1;
        } else if t >= mid && t < end {
            second += 1;
        }
    }
    Ok((second as f64 - first as f64) / first.max(1) as f64)
}

/// Ten equal-width buckets over `[start, end)`; bucket `i` covers
/// `[start + i·w, start + (i+1)·w)` with `w = (end − start) / 10` in exact arithmetic.
pub fn histogram(timestamps: &[i64], start: i64, end: i64) -> Result<[u64; HISTOGRAM_BUCKETS], RankError> {
    check(start, end)?;
    let width = end as i128 - start as i128;
    let mut out = [0u64; HISTOGRAM_BUCKETS];
    for &t in timestamps {
        if t >= start && t < end {
            let b = (t as i128 - start as i128) * HISTOGRAM_BUCKETS as i128 / width;
            out[b as usize] += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(trending(&[], 0, 100).unwrap(), 0.0);
        assert_eq!(trending(&[500], 0, 100).unwrap(), 0.0);
        assert_eq!(trending(&[1, 2, 60, 70, 80, 90], 0, 100).unwrap(), 1.0);
        assert_eq!(trending(&[10], 0, 100).unwrap(), -1.0);
        assert_eq!(trending(&[99, 99, 99], 0, 100).unwrap(), 3.0);
        assert!(matches!(trending(&[], 5, 5), Err(RankError::InvalidWindow { .. })));
        assert!(histogram(&[], 9, 2).is_err());
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0, 9, 10, 99, 100, -1], 0, 100).unwrap();
        assert_eq!(h, [2, 1, 0, 0, 0, 0, 0, 0, 0, 1]);
        // Narrow windows still place every in-window post.
        let h = histogram(&[3, 4, 5], 3, 6).unwrap();
        assert_eq!(h.iter().sum::<u64>(), 3);
        let h = histogram(&[i64::MIN, i64::MAX - 1], i64::MIN, i64::MAX).unwrap();
        assert_eq!((h[0], h[9]), (1, 1));
    }
}
