use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based rank of candidate `truth`: one plus the candidates that score
/// higher, plus those that tie and sort before it by id.
pub fn frank<S: AsRef<str>>(scores: &[f64], ids: &[S], truth: usize) -> usize {
    let (ts, tid) = (scores[truth], ids[truth].as_ref());
    1 + scores
        .iter()
        .zip(ids)
        .enumerate()
        .filter(|&(j, (&s, id))| j != truth && (s > ts || (s == ts && id.as_ref() < tid)))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub r_at_1: f64,
    pub r_at_5: f64,
    pub r_at_10: f64,
    pub mrr: f64,
    pub queries: usize,
    /// Candidates per query, true snippet included.
    pub pool_size: usize,
    pub seed: u64,
    pub pool_policy: String,
}

impl EvalReport {
    /// Metrics from 1-based ranks: R@k counts ranks `<= k`.
    pub fn from_ranks(ranks: &[usize], pool_size: usize, seed: u64) -> Self {
        let n = ranks.len();
        let frac = |k: usize| if n == 0 { 0.0 } else { ranks.iter().filter(|&&r| r <= k).count() as f64 / n as f64 };
        let mrr = if n == 0 { 0.0 } else { ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n as f64 };
        EvalReport {
            r_at_1: frac(1),
            r_at_5: frac(5),
            r_at_10: frac(10),
            mrr,
            queries: n,
            pool_size,
            seed,
            pool_policy: "per-query".into(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8}", "metric", "value")?;
        writeln!(f, "{:<10} {:>8.4}", "R@1", self.r_at_1)?;
        writeln!(f, "{:<10} {:>8.4}", "R@5", self.r_at_5)?;
        writeln!(f, "{:<10} {:>8.4}", "R@10", self.r_at_10)?;
        writeln!(f, "{:<10} {:>8.4}", "MRR", self.mrr)?;
        writeln!(f, "{:<10} {:>8}", "queries", self.queries)?;
        writeln!(f, "{:<10} {:>8}", "pool", self.pool_size)?;
        write!(f, "{:<10} {:>8}  ({} pools)", "seed", self.seed, self.pool_policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let r = EvalReport::from_ranks(&[1, 3, 12], 1000, 0);
        assert!((r.r_at_5 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.mrr - 17.0 / 36.0).abs() < 1e-15);
        assert!((r.r_at_1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.r_at_10 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_first() {
        let r = EvalReport::from_ranks(&[1; 7], 10, 3);
        assert_eq!((r.r_at_1, r.r_at_5, r.r_at_10, r.mrr), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn ties_break_by_id() {
        let ids = ["b", "a", "c"];
        assert_eq!(frank(&[0.5, 0.5, 0.5], &ids, 0), 2);
        assert_eq!(frank(&[0.5, 0.5, 0.5], &ids, 1), 1);
        assert_eq!(frank(&[0.1, 0.9, 0.5], &ids, 0), 3);
    }

    #[test]
    fn table_and_json() {
        let r = EvalReport::from_ranks(&[2], 5, 9);
        assert!(r.to_string().contains("MRR"));
        assert_eq!(r.to_json()["mrr"], 0.5);
        assert_eq!(r.to_json()["pool_size"], 5);
    }
}
