//! Evaluation metrics.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::depth::medoid_objectives;
use crate::error::{Error, Result};
use crate::oracle::DistanceOracle;
use crate::proxgraph::EstimatedGraph;
use crate::statements::ObjectId;

/// `(D(estimate) - D(medoid)) / D(medoid)` for the summed-distance objective.
pub fn relative_error(o: &DistanceOracle, estimate: ObjectId) -> Result<f64> {
    let objectives = medoid_objectives(o);
    relative_error_from(&objectives, estimate)
}

/// As [`relative_error`] with precomputed objectives.
pub fn relative_error_from(objectives: &[f64], estimate: ObjectId) -> Result<f64> {
    let best = objectives.iter().copied().fold(f64::INFINITY, f64::min);
    let Some(&value) = objectives.get(estimate.index()) else {
        return Err(Error::IdOutOfRange {
            id: estimate.index(),
            n: objectives.len(),
        });
    };
    if !(best > 0.0) {
        return Err(Error::DegenerateObjective);
    }
    Ok((value - best) / best)
}

/// Mean over rows of the Hamming distance between adjacency rows. Each
/// disagreeing unordered pair counts in both of its matrix cells.
pub fn hamming_error(truth: &EstimatedGraph, estimate: &EstimatedGraph) -> Result<f64> {
    if truth.n() != estimate.n() {
        return Err(Error::SizeMismatch(truth.n(), estimate.n()));
    }
    if truth.n() == 0 {
        return Ok(0.0);
    }
    let (a, b) = (truth.edges(), estimate.edges());
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let disagreeing = a.len() + b.len() - 2 * common;
    Ok(2.0 * disagreeing as f64 / truth.n() as f64)
}

/// Fraction of keys where the prediction differs from the truth.
pub fn zero_one_loss(pred: &BTreeMap<usize, usize>, truth: &BTreeMap<usize, usize>) -> Result<f64> {
    if pred.len() != truth.len() || pred.keys().zip(truth.keys()).any(|(a, b)| a != b) {
        let missing = truth.keys().find(|k| !pred.contains_key(k));
        let extra = pred.keys().find(|k| !truth.contains_key(k));
        return Err(Error::KeyMismatch(format!(
            "first missing prediction {missing:?}, first unexpected prediction {extra:?}"
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let wrong = pred.iter().filter(|(k, v)| truth[k] != **v).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// `(1/n) Σ_clusters max_class |cluster ∩ class|`.
pub fn purity(assignment: &[usize], truth: &[usize]) -> Result<f64> {
    if assignment.len() != truth.len() {
        return Err(Error::KeyMismatch(format!(
            "{} clustered objects but {} class labels",
            assignment.len(),
            truth.len()
        )));
    }
    if assignment.is_empty() {
        return Ok(0.0);
    }
    let mut table: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
    for (&c, &t) in assignment.iter().zip(truth) {
        *table.entry(c).or_default().entry(t).or_default() += 1;
    }
    let hits: usize = table.values().map(|row| row.values().copied().max().unwrap_or(0)).sum();
    Ok(hits as f64 / assignment.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub name: String,
    pub value: f64,
    pub context: Vec<(String, String)>,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        MetricReport {
            name: name.into(),
            value,
            context: Vec::new(),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.context.push((key.into(), value.to_string()));
        self
    }
}

/// `name,value[,key=value...]`
impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.name, self.value)?;
        for (k, v) in &self.context {
            write!(f, ",{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line() -> DistanceOracle {
        DistanceOracle::line(&[0.0, 1.0, 3.0, 7.0]).unwrap()
    }

    #[test]
    fn relative_error_examples() {
        assert_eq!(relative_error(&line(), ObjectId(1)).unwrap(), 0.0);
        assert_eq!(relative_error(&line(), ObjectId(2)).unwrap(), 0.0);
        assert!((relative_error(&line(), ObjectId(3)).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        let single = DistanceOracle::line(&[1.0]).unwrap();
        assert_eq!(relative_error(&single, ObjectId(0)), Err(Error::DegenerateObjective));
        assert!(relative_error(&line(), ObjectId(9)).is_err());
    }

    #[test]
    fn uniform_estimate_mean_is_average() {
        let o = line();
        let per: Vec<f64> = (0..4).map(|i| relative_error(&o, ObjectId(i)).unwrap()).collect();
        let mean = per.iter().sum::<f64>() / 4.0;
        // (2/9 + 0 + 0 + 8/9) / 4
        assert!((mean - 10.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn hamming_examples() {
        let complete = EstimatedGraph::from_edges(4, (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))));
        let empty = EstimatedGraph::from_edges(4, []);
        assert_eq!(hamming_error(&complete, &complete).unwrap(), 0.0);
        assert_eq!(hamming_error(&complete, &empty).unwrap(), 3.0);
        let path = EstimatedGraph::from_edges(4, [(0, 1), (1, 2)]);
        assert_eq!(hamming_error(&path, &empty).unwrap(), 2.0 * 2.0 / 4.0);
        let other = EstimatedGraph::from_edges(4, [(1, 2), (2, 3)]);
        assert_eq!(hamming_error(&path, &other).unwrap(), 1.0);
        assert_eq!(
            hamming_error(&path, &EstimatedGraph::from_edges(5, [])),
            Err(Error::SizeMismatch(4, 5))
        );
    }

    #[test]
    fn zero_one_examples() {
        let truth: BTreeMap<usize, usize> = [(0, 1), (1, 0), (5, 1), (7, 0)].into();
        assert_eq!(zero_one_loss(&truth, &truth).unwrap(), 0.0);
        let wrong: BTreeMap<_, _> = truth.iter().map(|(&k, &v)| (k, 1 - v)).collect();
        assert_eq!(zero_one_loss(&wrong, &truth).unwrap(), 1.0);
        let mut one = truth.clone();
        one.insert(5, 0);
        assert_eq!(zero_one_loss(&one, &truth).unwrap(), 0.25);
        let mut shifted = truth.clone();
        shifted.remove(&7);
        shifted.insert(8, 0);
        assert!(matches!(zero_one_loss(&shifted, &truth), Err(Error::KeyMismatch(_))));
    }

    #[test]
    fn purity_examples() {
        let classes = [0, 0, 0, 1, 1, 1];
        assert_eq!(purity(&[4, 4, 4, 2, 2, 2], &classes).unwrap(), 1.0);
        let ten: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        assert_eq!(purity(&[0; 10], &ten).unwrap(), 0.6);
        let singletons: Vec<usize> = (0..10).collect();
        assert_eq!(purity(&singletons, &ten).unwrap(), 1.0);
        assert!(matches!(purity(&[0, 1], &[0]), Err(Error::KeyMismatch(_))));
    }

    #[test]
    fn report_format() {
        let r = MetricReport::new("purity", 0.75).with("k", 5).with("seed", 3);
        assert_eq!(r.to_string(), "purity,0.75,k=5,seed=3");
    }

    proptest! {
        #[test]
        fn purity_bounds_and_relabeling(
            pairs in proptest::collection::vec((0usize..5, 0usize..3), 1..60),
            shift in 1usize..7,
        ) {
            let (assign, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let p = purity(&assign, &truth).unwrap();
            let mut used = assign.clone();
            used.sort();
            used.dedup();
            let n = assign.len() as f64;
            prop_assert!(p <= 1.0 && p >= used.len() as f64 / n - 1e-12);
            let relabeled: Vec<usize> = assign.iter().map(|c| (c + shift) * 11).collect();
            prop_assert_eq!(purity(&relabeled, &truth).unwrap(), p);
        }

        #[test]
        fn hamming_bounds(
            n in 1usize..12,
            a in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
            b in proptest::collection::vec((0usize..12, 0usize..12), 0..40),
        ) {
            let clip = |v: &[(usize, usize)]| v.iter().map(|&(i, j)| (i % n, j % n)).collect::<Vec<_>>();
            let ga = EstimatedGraph::from_edges(n, clip(&a));
            let gb = EstimatedGraph::from_edges(n, clip(&b));
            let h = hamming_error(&ga, &gb).unwrap();
            // brute force over the full matrices
            let mut cells = 0;
            for i in 0..n {
                for j in 0..n {
                    if ga.has_edge(i, j) != gb.has_edge(i, j) && i != j {
                        cells += 1;
                    }
                }
            }
            prop_assert_eq!(h, cells as f64 / n as f64);
            prop_assert!(h >= 0.0 && h <= (n - 1) as f64);
        }

        #[test]
        fn zero_one_is_order_free(labels in proptest::collection::vec((0usize..3, 0usize..3), 1..30)) {
            let truth: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(i, l)| (i, l.0)).collect();
            let pred: BTreeMap<usize, usize> = labels.iter().enumerate().rev().map(|(i, l)| (i, l.1)).collect();
            let wrong = labels.iter().filter(|l| l.0 != l.1).count();
            prop_assert_eq!(zero_one_loss(&pred, &truth).unwrap(), wrong as f64 / labels.len() as f64);
        }
    }
}
