//! Prediction accuracy, top-k utility over workflow rankings, and the
//! success-rate-by-size breakdown.

mod plot;

pub use plot::{bar_chart_svg, line_chart_svg, Series};

use std::collections::{BTreeMap, HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledSample;
use crate::graph::WorkflowGraph;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("no samples to score")]
    Empty,
    #[error("k = {k} outside [1, {workflows}]")]
    KOutOfRange { k: usize, workflows: usize },
    #[error("workflow {0} has no test samples")]
    MissingWorkflow(String),
}

/// Exact fraction of positions where prediction and label agree.
pub fn accuracy_ratio(preds: &[bool], labels: &[bool]) -> Result<Ratio<usize>, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = preds.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(Ratio::new(hits, preds.len()))
}

pub fn accuracy(preds: &[bool], labels: &[bool]) -> Result<f64, MetricsError> {
    accuracy_ratio(preds, labels).map(|r| ratio_f64(&r))
}

pub fn ratio_f64(r: &Ratio<usize>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `max(1, ceil(n / 10))`.
pub fn default_k(workflows: usize) -> usize {
    workflows.div_ceil(10).max(1)
}

/// One scored test pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub workflow: String,
    pub predicted: bool,
    pub actual: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingResult {
    /// Top-k workflows by ground-truth success rate.
    pub true_top: Vec<String>,
    /// Top-k workflows by predicted success rate.
    pub predicted_top: Vec<String>,
    pub k: usize,
    pub utility: Ratio<usize>,
}

impl RankingResult {
    pub fn value(&self) -> f64 {
        ratio_f64(&self.utility)
    }
}

/// Orders ids by rate, highest first, ties by ascending id.
pub fn rank_by_rate(rates: &HashMap<&str, Ratio<usize>>) -> Vec<String> {
    let mut ids: Vec<(&str, Ratio<usize>)> = rates.iter().map(|(k, v)| (*k, *v)).collect();
    ids.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ids.into_iter().map(|(id, _)| id.to_owned()).collect()
}

/// Per-workflow success rates averaged over the pairs present for that
/// workflow, ranked both ways; utility is the top-k overlap divided by k.
pub fn utility_at_k(universe: &[String], outcomes: &[Outcome], k: usize) -> Result<RankingResult, MetricsError> {
    if k == 0 || k > universe.len() {
        return Err(MetricsError::KOutOfRange { k, workflows: universe.len() });
    }
    let mut tally: HashMap<&str, (usize, usize, usize)> = universe.iter().map(|w| (w.as_str(), (0, 0, 0))).collect();
    for o in outcomes {
        let e = tally.get_mut(o.workflow.as_str()).ok_or_else(|| MetricsError::MissingWorkflow(o.workflow.clone()))?;
        e.0 += usize::from(o.predicted);
        e.1 += usize::from(o.actual);
        e.2 += 1;
    }
    let mut predicted = HashMap::new();
    let mut actual = HashMap::new();
    for w in universe {
        let (p, a, n) = tally[w.as_str()];
        if n == 0 {
            return Err(MetricsError::MissingWorkflow(w.clone()));
        }
        predicted.insert(w.as_str(), Ratio::new(p, n));
        actual.insert(w.as_str(), Ratio::new(a, n));
    }
    let true_top: Vec<String> = rank_by_rate(&actual).into_iter().take(k).collect();
    let predicted_top: Vec<String> = rank_by_rate(&predicted).into_iter().take(k).collect();
    let truth: HashSet<&String> = true_top.iter().collect();
    let overlap = predicted_top.iter().filter(|w| truth.contains(w)).count();
    Ok(RankingResult { true_top, predicted_top, k, utility: Ratio::new(overlap, k) })
}

/// Mean label per node count; buckets without samples are omitted.
pub fn success_by_node_count(graphs: &[WorkflowGraph], labels: &[LabeledSample]) -> BTreeMap<usize, f64> {
    let size: HashMap<&str, usize> = graphs.iter().map(|g| (g.id.as_str(), g.node_count())).collect();
    let mut buckets: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for s in labels {
        if let Some(&n) = size.get(s.workflow.as_str()) {
            let b = buckets.entry(n).or_default();
            b.0 += usize::from(s.label);
            b.1 += 1;
        }
    }
    buckets.into_iter().map(|(n, (hit, tot))| (n, hit as f64 / tot as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub domain: String,
    pub model: String,
    pub value: f64,
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("metric,domain,model,value\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.metric, r.domain, r.model, r.value));
    }
    s
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("metric,domain,model,value") {
        return Err("missing metrics header".into());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(format!("line {}: expected 4 fields", i + 2));
            }
            let value = f[3].parse().map_err(|e| format!("line {}: {e}", i + 2))?;
            Ok(MetricRow { metric: f[0].into(), domain: f[1].into(), model: f[2].into(), value })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn o(w: &str, p: bool, a: bool) -> Outcome {
        Outcome { workflow: w.into(), predicted: p, actual: a }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[true, false], &[true, false]).unwrap(), 1.0);
        assert_eq!(accuracy_ratio(&[true, false, true], &[true, true, true]).unwrap(), Ratio::new(2, 3));
        assert_eq!(accuracy(&[true], &[]), Err(MetricsError::LengthMismatch { preds: 1, labels: 0 }));
        assert_eq!(accuracy(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn identical_and_disjoint_rankings() {
        let u = ids(4);
        let same: Vec<Outcome> = (0..4).map(|i| o(&u[i], i < 2, i < 2)).collect();
        assert_eq!(utility_at_k(&u, &same, 2).unwrap().value(), 1.0);
        let flipped: Vec<Outcome> = (0..4).map(|i| o(&u[i], i >= 2, i < 2)).collect();
        let r = utility_at_k(&u, &flipped, 2).unwrap();
        assert_eq!(r.utility, Ratio::new(0, 1));
        assert_eq!(r.true_top, vec!["w0", "w1"]);
        assert_eq!(r.predicted_top, vec!["w2", "w3"]);
    }

    #[test]
    fn ranking_errors() {
        let u = ids(3);
        let outs: Vec<Outcome> = u.iter().map(|w| o(w, true, true)).collect();
        assert_eq!(utility_at_k(&u, &outs, 0).unwrap_err(), MetricsError::KOutOfRange { k: 0, workflows: 3 });
        assert!(matches!(utility_at_k(&u, &outs, 4), Err(MetricsError::KOutOfRange { .. })));
        assert_eq!(utility_at_k(&u, &outs[..2], 1).unwrap_err(), MetricsError::MissingWorkflow("w2".into()));
        assert!(matches!(utility_at_k(&u[..2], &outs, 1), Err(MetricsError::MissingWorkflow(_))));
    }

    #[test]
    fn ties_break_by_id() {
        let u: Vec<String> = ["b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let outs = vec![o("b", true, true), o("a", true, true), o("c", false, false)];
        let r = utility_at_k(&u, &outs, 1).unwrap();
        assert_eq!(r.true_top, vec!["a"]);
    }

    #[test]
    fn default_k_values() {
        assert_eq!(default_k(1), 1);
        assert_eq!(default_k(10), 1);
        assert_eq!(default_k(11), 2);
        assert_eq!(default_k(200), 20);
    }

    #[test]
    fn node_count_buckets() {
        let g1 = WorkflowGraph::from_parts("a", &[(1, "x")], &[]);
        let g2 = WorkflowGraph::from_parts("b", &[(1, "x"), (2, "y")], &[(1, 2)]);
        let l = |w: &str, v: bool| LabeledSample { workflow: w.into(), task: "t".into(), label: v };
        assert_eq!(success_by_node_count(&[g1.clone()], &[l("a", true), l("a", true)]), BTreeMap::from([(1, 1.0)]));
        let t = success_by_node_count(&[g1, g2], &[l("a", true), l("a", false), l("b", true), l("b", true), l("b", false), l("b", true)]);
        assert_eq!(t, BTreeMap::from([(1, 0.5), (2, 0.75)]));
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![MetricRow { metric: "accuracy".into(), domain: "synthetic".into(), model: "gcn".into(), value: 0.9125 }];
        let text = metrics_csv(&rows);
        assert_eq!(text, "metric,domain,model,value\naccuracy,synthetic,gcn,0.9125\n");
        assert_eq!(parse_metrics_csv(&text).unwrap(), rows);
    }

    fn table() -> impl Strategy<Value = (usize, Vec<(usize, bool, bool)>, usize)> {
        (1usize..=8).prop_flat_map(|n| {
            (Just(n), proptest::collection::vec((0..n, any::<bool>(), any::<bool>()), n..n * 6), 1..=n)
        })
    }

    /// Brute force: compare all pairs of workflows to place each in order.
    fn brute_top(u: &[String], rates: &[(usize, usize)], k: usize) -> Vec<String> {
        let mut pos: Vec<(usize, String)> = (0..u.len())
            .map(|i| {
                let better = (0..u.len())
                    .filter(|&j| {
                        let lhs = rates[j].0 * rates[i].1;
                        let rhs = rates[i].0 * rates[j].1;
                        lhs > rhs || (lhs == rhs && u[j] < u[i])
                    })
                    .count();
                (better, u[i].clone())
            })
            .collect();
        pos.sort();
        pos.into_iter().take(k).map(|p| p.1).collect()
    }

    proptest! {
        #[test]
        fn utility_matches_brute_force((n, rows, k) in table()) {
            let u = ids(n);
            let mut outs: Vec<Outcome> = rows.iter().map(|&(w, p, a)| o(&u[w], p, a)).collect();
            // ensure coverage
            for w in &u {
                outs.push(o(w, false, true));
            }
            let mut pr = vec![(0, 0); n];
            let mut ar = vec![(0, 0); n];
            for x in &outs {
                let i: usize = x.workflow[1..].parse().unwrap();
                pr[i].0 += usize::from(x.predicted);
                pr[i].1 += 1;
                ar[i].0 += usize::from(x.actual);
                ar[i].1 += 1;
            }
            let (tp, pp) = (brute_top(&u, &ar, k), brute_top(&u, &pr, k));
            let overlap = pp.iter().filter(|w| tp.contains(w)).count();
            let r = utility_at_k(&u, &outs, k).unwrap();
            prop_assert_eq!(&r.true_top, &tp);
            prop_assert_eq!(&r.predicted_top, &pp);
            prop_assert_eq!(r.utility, Ratio::new(overlap, k));
            prop_assert_eq!(utility_at_k(&u, &outs, n).unwrap().value(), 1.0);
        }

        #[test]
        fn accuracy_ignores_order(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..50), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let split = |v: &[(bool, bool)]| -> (Vec<bool>, Vec<bool>) { v.iter().copied().unzip() };
            let (a, b) = split(&pairs);
            let (c, d) = split(&shuffled);
            prop_assert_eq!(accuracy_ratio(&a, &b).unwrap(), accuracy_ratio(&c, &d).unwrap());
        }

        #[test]
        fn only_the_induced_order_matters((n, rows, k) in table()) {
            // duplicating every outcome keeps all rates, hence all rankings
            let u = ids(n);
            let mut outs: Vec<Outcome> = rows.iter().map(|&(w, p, a)| o(&u[w], p, a)).collect();
            outs.extend(u.iter().map(|w| o(w, true, false)));
            let doubled: Vec<Outcome> = outs.iter().chain(&outs).cloned().collect();
            prop_assert_eq!(utility_at_k(&u, &outs, k).unwrap(), utility_at_k(&u, &doubled, k).unwrap());
        }
    }
}
