//! Latency/bandwidth trade-off frontiers.

use serde::{Deserialize, Serialize};

/// One operating point of a scheme: latency percentile (s) and mean
/// bandwidth per user (Hz) obtained at quantile target `p_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub scheme: String,
    pub p_s: f64,
    pub latency_s: f64,
    pub bandwidth_hz: f64,
}

impl ParetoPoint {
    pub fn new(scheme: impl Into<String>, p_s: f64, latency_s: f64, bandwidth_hz: f64) -> Self {
        Self {
            scheme: scheme.into(),
            p_s,
            latency_s,
            bandwidth_hz,
        }
    }

    /// Strictly better in both metrics. Ties in either metric never
    /// dominate.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.latency_s < other.latency_s && self.bandwidth_hz < other.bandwidth_hz
    }
}

/// Points not dominated by any other point, sorted by latency then
/// bandwidth.
pub fn pareto_frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut front: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(p)))
        .cloned()
        .collect();
    front.sort_by(|a, b| {
        a.latency_s
            .total_cmp(&b.latency_s)
            .then(a.bandwidth_hz.total_cmp(&b.bandwidth_hz))
    });
    front
}

/// Bandwidth saving of `candidate` over `reference` at matched latency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedReduction {
    pub latency_s: f64,
    pub reference_hz: f64,
    pub candidate_hz: f64,
    /// `1 - candidate / reference`.
    pub reduction: f64,
}

/// For every point of the `reference` frontier, the cheapest `candidate`
/// point whose latency is no worse. Reference points that no candidate
/// matches are skipped.
pub fn matched_reductions(reference: &[ParetoPoint], candidate: &[ParetoPoint]) -> Vec<MatchedReduction> {
    reference
        .iter()
        .filter_map(|r| {
            candidate
                .iter()
                .filter(|c| c.latency_s <= r.latency_s)
                .map(|c| c.bandwidth_hz)
                .min_by(f64::total_cmp)
                .map(|best| MatchedReduction {
                    latency_s: r.latency_s,
                    reference_hz: r.bandwidth_hz,
                    candidate_hz: best,
                    reduction: 1.0 - best / r.bandwidth_hz,
                })
        })
        .collect()
}

/// Mean of [`matched_reductions`]; `None` when nothing matches.
pub fn mean_matched_reduction(reference: &[ParetoPoint], candidate: &[ParetoPoint]) -> Option<f64> {
    let r = matched_reductions(reference, candidate);
    if r.is_empty() {
        None
    } else {
        Some(r.iter().map(|m| m.reduction).sum::<f64>() / r.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(l: f64, b: f64) -> ParetoPoint {
        ParetoPoint::new("x", 0.9, l, b)
    }

    #[test]
    fn single_point() {
        assert_eq!(pareto_frontier(&[pt(1.0, 1.0)]), vec![pt(1.0, 1.0)]);
    }

    #[test]
    fn ties_never_dominate() {
        let front = pareto_frontier(&[pt(2.0, 2.0), pt(1.0, 2.0), pt(2.0, 1.0)]);
        assert_eq!(front, vec![pt(1.0, 2.0), pt(2.0, 1.0), pt(2.0, 2.0)]);
        let front = pareto_frontier(&[pt(2.0, 2.0), pt(1.0, 1.0)]);
        assert_eq!(front, vec![pt(1.0, 1.0)]);
    }

    #[test]
    fn matched_reduction_examples() {
        let ind = vec![pt(0.02, 10.0), pt(0.03, 8.0)];
        let agg = vec![pt(0.015, 9.0), pt(0.025, 6.0)];
        let r = matched_reductions(&ind, &agg);
        assert_eq!(r.len(), 2);
        assert!((r[0].reduction - 0.1).abs() < 1e-12);
        assert!((r[1].reduction - 0.25).abs() < 1e-12);
        assert!(mean_matched_reduction(&[pt(0.01, 1.0)], &agg).is_none());
    }

    proptest! {
        #[test]
        fn frontier_properties(raw in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..30)) {
            let pts: Vec<ParetoPoint> = raw.iter().map(|&(l, b)| pt(l, b)).collect();
            let front = pareto_frontier(&pts);
            prop_assert!(!front.is_empty());
            prop_assert_eq!(pareto_frontier(&front), front.clone());
            for p in &front {
                prop_assert!(!pts.iter().any(|q| q.dominates(p)));
            }
            // A point dominated by a frontier member changes nothing.
            let mut more = pts.clone();
            more.push(pt(front[0].latency_s + 1.0, front[0].bandwidth_hz + 1.0));
            prop_assert_eq!(pareto_frontier(&more), front);
        }
    }
}
