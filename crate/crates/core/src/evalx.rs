//! Completeness and positional accuracy of placed objects against a reference.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::make_frame;
use crate::placer::PlacedObject;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub match_radius_m: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { match_radius_m: 5.0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.match_radius_m > 0.0 && self.match_radius_m.is_finite()) {
            return Err(Error::Config("eval: match_radius_m must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pair {
    pub pred: usize,
    pub reference: usize,
    pub distance_m: f64,
}

/// One-to-one assignment of predictions to reference objects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    /// Sorted by reference index.
    pub pairs: Vec<Pair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_ref: Vec<usize>,
}

/// Ground distance in metres between two placements.
pub fn ground_distance(a: &PlacedObject, b: &PlacedObject) -> f64 {
    match make_frame(b.position).and_then(|f| f.project(a.position)) {
        Ok(p) => p.norm(),
        Err(_) => f64::INFINITY,
    }
}

fn compatible(p: &PlacedObject, r: &PlacedObject) -> bool {
    p.category == r.category
        && p.intersection_id == r.intersection_id
        && match (&p.subtype, &r.subtype) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
}

/// Pair predictions with reference objects of the same category (and
/// subtype when both carry one) lying within `radius_m`.
///
/// Pairs are taken globally nearest first, ties broken by prediction then
/// reference index. Augmenting paths then add any pair the greedy pass missed,
/// so the number of pairs is always the largest possible.
pub fn match_objects(pred: &[PlacedObject], refs: &[PlacedObject], radius_m: f64) -> Pairing {
    let mut edges: Vec<Pair> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, r) in refs.iter().enumerate() {
            if !compatible(p, r) {
                continue;
            }
            let d = ground_distance(p, r);
            if d <= radius_m {
                edges.push(Pair {
                    pred: i,
                    reference: j,
                    distance_m: d,
                });
            }
        }
    }
    edges.sort_by(|a, b| {
        a.distance_m
            .total_cmp(&b.distance_m)
            .then(a.pred.cmp(&b.pred))
            .then(a.reference.cmp(&b.reference))
    });
    let mut ref_of: Vec<Option<usize>> = vec![None; pred.len()];
    let mut pred_of: Vec<Option<usize>> = vec![None; refs.len()];
    for e in &edges {
        if ref_of[e.pred].is_none() && pred_of[e.reference].is_none() {
            ref_of[e.pred] = Some(e.reference);
            pred_of[e.reference] = Some(e.pred);
        }
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); pred.len()];
    for e in &edges {
        adj[e.pred].push(e.reference);
    }
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        ref_of: &mut [Option<usize>],
        pred_of: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if pred_of[v].is_none_or(|w| augment(w, adj, seen, ref_of, pred_of)) {
                ref_of[u] = Some(v);
                pred_of[v] = Some(u);
                return true;
            }
        }
        false
    }
    for u in 0..pred.len() {
        if ref_of[u].is_none() && !adj[u].is_empty() {
            let mut seen = vec![false; refs.len()];
            augment(u, &adj, &mut seen, &mut ref_of, &mut pred_of);
        }
    }

    let pairs: Vec<Pair> = pred_of
        .iter()
        .enumerate()
        .filter_map(|(j, p)| {
            p.map(|i| Pair {
                pred: i,
                reference: j,
                distance_m: ground_distance(&pred[i], &refs[j]),
            })
        })
        .collect();
    Pairing {
        pairs,
        unmatched_pred: (0..pred.len()).filter(|i| ref_of[*i].is_none()).collect(),
        unmatched_ref: (0..refs.len()).filter(|j| pred_of[*j].is_none()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryStats {
    /// Absent when there is no reference object.
    pub completeness: Option<f64>,
    pub mean_err_m: Option<f64>,
    pub median_err_m: Option<f64>,
    pub rmse_m: Option<f64>,
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
}

impl CategoryStats {
    pub fn from_errors(errors: &[f64], missed: usize, spurious: usize) -> Self {
        let matched = errors.len();
        let n = matched as f64;
        let (mean, median, rmse) = if errors.is_empty() {
            (None, None, None)
        } else {
            let mut s = errors.to_vec();
            s.sort_by(f64::total_cmp);
            let median = if s.len() % 2 == 1 {
                s[s.len() / 2]
            } else {
                0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2])
            };
            (
                Some(s.iter().sum::<f64>() / n),
                Some(median),
                Some((s.iter().map(|e| e * e).sum::<f64>() / n).sqrt()),
            )
        };
        CategoryStats {
            completeness: (matched + missed > 0).then(|| matched as f64 / (matched + missed) as f64),
            mean_err_m: mean,
            median_err_m: median,
            rmse_m: rmse,
            matched,
            missed,
            spurious,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall: CategoryStats,
    pub per_category: BTreeMap<String, CategoryStats>,
}

pub fn report(pairing: &Pairing, pred: &[PlacedObject], refs: &[PlacedObject]) -> EvalReport {
    let mut errs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut missed: BTreeMap<String, usize> = BTreeMap::new();
    let mut spurious: BTreeMap<String, usize> = BTreeMap::new();
    for o in pred.iter().chain(refs) {
        errs.entry(o.category.to_string()).or_default();
    }
    for p in &pairing.pairs {
        errs.entry(refs[p.reference].category.to_string())
            .or_default()
            .push(p.distance_m);
    }
    for j in &pairing.unmatched_ref {
        *missed.entry(refs[*j].category.to_string()).or_default() += 1;
    }
    for i in &pairing.unmatched_pred {
        *spurious.entry(pred[*i].category.to_string()).or_default() += 1;
    }
    let per_category = errs
        .iter()
        .map(|(c, e)| {
            let stats = CategoryStats::from_errors(
                e,
                missed.get(c).copied().unwrap_or(0),
                spurious.get(c).copied().unwrap_or(0),
            );
            (c.clone(), stats)
        })
        .collect();
    let all: Vec<f64> = pairing.pairs.iter().map(|p| p.distance_m).collect();
    EvalReport {
        overall: CategoryStats::from_errors(&all, pairing.unmatched_ref.len(), pairing.unmatched_pred.len()),
        per_category,
    }
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<15} {:>12} {:>8} {:>8} {:>8} {:>8} {:>7} {:>9}",
            "category", "completeness", "mean_m", "median_m", "rmse_m", "matched", "missed", "spurious"
        )
        .unwrap();
        let rows = self
            .per_category
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("overall", &self.overall)));
        for (name, st) in rows {
            writeln!(
                s,
                "{:<15} {:>12} {:>8} {:>8} {:>8} {:>8} {:>7} {:>9}",
                name,
                cell(st.completeness, 4),
                cell(st.mean_err_m, 2),
                cell(st.median_err_m, 2),
                cell(st.rmse_m, 2),
                st.matched,
                st.missed,
                st.spurious
            )
            .unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}
