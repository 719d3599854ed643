use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::estimator::hungarian;
use crate::scene::{Point, TargetKind};

/// Outcome for one true target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    /// Index into the estimate list.
    pub estimate: Option<usize>,
    /// Distance to the matched estimate; `None` when unmatched.
    pub error: Option<f64>,
    pub hit: bool,
}

/// Minimum total distance one-to-one matching of estimates to truths;
/// missing estimates never match.
pub fn match_and_score(truth: &[Point], estimates: &[Option<Point>], hit_radius: f64) -> Vec<MatchScore> {
    let valid: Vec<(usize, Point)> = estimates.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
    let miss = MatchScore { estimate: None, error: None, hit: false };
    if valid.is_empty() {
        return vec![miss; truth.len()];
    }
    let cost: Vec<Vec<f64>> = truth.iter().map(|t| valid.iter().map(|(_, p)| t.distance(p)).collect()).collect();
    hungarian(&cost)
        .into_iter()
        .enumerate()
        .map(|(t, m)| match m {
            Some(j) => {
                let d = cost[t][j];
                MatchScore { estimate: Some(valid[j].0), error: Some(d), hit: d <= hit_radius }
            }
            None => miss,
        })
        .collect()
}

/// One scored target of one method in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTarget {
    pub method: String,
    pub snr_index: usize,
    pub snr_db: f64,
    pub trial: usize,
    pub target: usize,
    pub kind: TargetKind,
    pub truth: Point,
    pub estimate: Option<Point>,
    pub error: Option<f64>,
    pub hit: bool,
    pub associated: bool,
    pub objective: Option<f64>,
    pub degenerate: bool,
}

/// Aggregated metrics per (method, SNR, target class).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub method: String,
    pub snr_db: f64,
    pub class: TargetKind,
    pub targets: usize,
    pub hits: usize,
    pub hit_rate: f64,
    /// Targets hit by every method; the RMSE population.
    pub common_hits: usize,
    /// `None` when no target was hit by every method.
    pub rmse: Option<f64>,
    /// Median error over all targets, unmatched ones counted as infinite.
    pub median_error: f64,
}

type TargetKey = (usize, usize, usize);

/// Hit rate and common-hit RMSE per (method, SNR, class). Output is sorted
/// by method, SNR index, class.
pub fn aggregate(rows: &[ScoredTarget]) -> Vec<MetricsRecord> {
    let methods: BTreeSet<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    let mut hits_by_key: BTreeMap<TargetKey, usize> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.hit) {
        *hits_by_key.entry((r.snr_index, r.trial, r.target)).or_default() += 1;
    }
    let common = |r: &ScoredTarget| hits_by_key.get(&(r.snr_index, r.trial, r.target)) == Some(&methods.len());

    let mut groups: BTreeMap<(&str, usize, TargetKind), Vec<&ScoredTarget>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.as_str(), r.snr_index, r.kind)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, _, class), members)| {
            let hits = members.iter().filter(|r| r.hit).count();
            let common_sq: Vec<f64> =
                members.iter().filter(|r| common(r)).map(|r| r.error.expect("hits carry an error").powi(2)).collect();
            let rmse = (!common_sq.is_empty()).then(|| (common_sq.iter().sum::<f64>() / common_sq.len() as f64).sqrt());
            let errors: Vec<f64> = members.iter().map(|r| r.error.unwrap_or(f64::INFINITY)).collect();
            MetricsRecord {
                method: method.to_string(),
                snr_db: members[0].snr_db,
                class,
                targets: members.len(),
                hits,
                hit_rate: hits as f64 / members.len() as f64,
                common_hits: common_sq.len(),
                rmse,
                median_error: median(errors),
            }
        })
        .collect()
}

/// Median with the mean of the two central values for even counts.
pub fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        let (a, b) = (values[n / 2 - 1], values[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, trial: usize, target: usize, error: Option<f64>, radius: f64) -> ScoredTarget {
        ScoredTarget {
            method: method.into(),
            snr_index: 0,
            snr_db: 10.0,
            trial,
            target,
            kind: TargetKind::Client,
            truth: Point::new(0.0, 0.0),
            estimate: error.map(|e| Point::new(e, 0.0)),
            error,
            hit: error.is_some_and(|e| e <= radius),
            associated: false,
            objective: None,
            degenerate: false,
        }
    }

    #[test]
    fn radius_rule() {
        let t = [Point::new(0.0, 0.0)];
        assert!(match_and_score(&t, &[Some(Point::new(1.5, 0.0))], 2.0)[0].hit);
        assert!(!match_and_score(&t, &[Some(Point::new(2.5, 0.0))], 2.0)[0].hit);
        assert!(!match_and_score(&t, &[None], 2.0)[0].hit);
    }

    #[test]
    fn optimal_matching_beats_order() {
        let truth = [Point::new(0.0, 0.0), Point::new(4.0, 0.0)];
        let est = [Some(Point::new(3.5, 0.0)), Some(Point::new(0.4, 0.0))];
        let s = match_and_score(&truth, &est, 2.0);
        assert_eq!(s[0].estimate, Some(1));
        assert_eq!(s[1].estimate, Some(0));
        // Enumerated alternative: identity matching costs 3.5 + 3.6.
        let total: f64 = s.iter().map(|m| m.error.unwrap()).sum();
        assert!(total < 3.5 + 3.6);
        assert!(s.iter().all(|m| m.hit));
    }

    #[test]
    fn common_hit_rule() {
        let rows = vec![
            row("a", 0, 0, Some(1.0), 2.0),
            row("b", 0, 0, Some(0.5), 2.0),
            row("a", 1, 0, Some(1.0), 2.0),
            row("b", 1, 0, Some(3.0), 2.0),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].common_hits, 1);
        assert_eq!(agg[1].common_hits, 1);
        assert!((agg[0].rmse.unwrap() - 1.0).abs() < 1e-12);
        assert!((agg[1].rmse.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(agg[1].hit_rate, 0.5);
    }

    #[test]
    fn no_common_hits_is_undefined() {
        let rows = vec![row("a", 0, 0, Some(5.0), 2.0), row("b", 0, 0, None, 2.0)];
        assert!(aggregate(&rows).iter().all(|m| m.rmse.is_none()));
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![1.0, f64::INFINITY]), f64::INFINITY);
    }
}
