//! Partial C4.5 trees over five-level nominal attributes.
//!
//! A node is split on the attribute with the highest gain ratio among those
//! whose information gain is at least the mean positive gain. Children are
//! expanded in order of increasing entropy; expansion of the remaining
//! siblings stops at the first child that does not end up as a leaf. When all
//! children of a node are leaves, the node itself is collapsed into a leaf if
//! its pessimistic error is no larger than the summed error of the children.

use std::cmp::Ordering;

use statrs::distribution::{ContinuousCDF, Normal};

use super::InductionParams;
use crate::corpus::Label;
use crate::skipgram::{FeatureTable, Level};

pub(crate) const CLASSES: usize = 2;
const LEVELS: usize = 5;
const TIE_EPS: f64 = 1e-12;

pub type Counts = [usize; CLASSES];

/// Column-major view of a feature table.
pub(crate) struct Data<'a> {
    pub keys: &'a [String],
    pub columns: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl<'a> Data<'a> {
    pub fn new(table: &'a FeatureTable) -> Self {
        let mut columns = vec![Vec::with_capacity(table.len()); table.keys.len()];
        for row in &table.rows {
            for (col, level) in columns.iter_mut().zip(&row.levels) {
                col.push(level.index() as u8);
            }
        }
        Data {
            keys: &table.keys,
            columns,
            labels: table.rows.iter().map(|r| r.label.index() as u8).collect(),
        }
    }

    pub fn counts(&self, rows: &[usize]) -> Counts {
        let mut c = [0; CLASSES];
        for &r in rows {
            c[self.labels[r] as usize] += 1;
        }
        c
    }
}

/// Entropy in bits of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Index of the largest count; ties go to the lower class index.
pub fn majority(counts: &Counts) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Extra errors added by the pessimistic estimate: the upper limit of the
/// binomial error rate at confidence `cf`, times `n`, minus the observed
/// errors `e`. Uses the exact bound for zero errors, linear interpolation
/// for `0 < e < 1` and near `e = n`, and the normal approximation with
/// continuity correction elsewhere. A confidence above 0.5 disables pruning
/// (no extra errors).
pub fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    if cf > 0.5 || n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (added_errors(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    r * n - e
}

/// Observed plus added errors of a leaf with these class counts.
pub fn leaf_error(counts: &Counts, cf: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n - counts[majority(counts)];
    e as f64 + added_errors(n as f64, e as f64, cf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitStats {
    pub attribute: usize,
    pub gain: f64,
    pub gain_ratio: f64,
    /// Per-level class counts.
    pub distribution: [Counts; LEVELS],
}

fn split_stats(data: &Data<'_>, rows: &[usize], attribute: usize) -> SplitStats {
    let mut distribution = [[0usize; CLASSES]; LEVELS];
    let col = &data.columns[attribute];
    for &r in rows {
        distribution[col[r] as usize][data.labels[r] as usize] += 1;
    }
    let n = rows.len() as f64;
    let mut parent = [0; CLASSES];
    let mut sizes = [0usize; LEVELS];
    let mut children = 0.0;
    for (l, d) in distribution.iter().enumerate() {
        sizes[l] = d.iter().sum();
        for c in 0..CLASSES {
            parent[c] += d[c];
        }
        children += sizes[l] as f64 / n * entropy(d);
    }
    let gain = entropy(&parent) - children;
    let split_info = entropy(&sizes);
    let gain_ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
    SplitStats {
        attribute,
        gain,
        gain_ratio,
        distribution,
    }
}

/// A split is usable when at least two branches receive `min_instances`
/// instances or more.
fn is_valid(stats: &SplitStats, min_instances: usize) -> bool {
    stats
        .distribution
        .iter()
        .filter(|d| d.iter().sum::<usize>() >= min_instances.max(1))
        .count()
        >= 2
}

/// Chooses the split attribute for `rows`, or `None` when the node must be a
/// leaf.
///
/// Candidates are the valid splits with positive gain whose gain is at least
/// their mean gain; among them the highest gain ratio wins, ties going to the
/// lexicographically smallest key. If the node is impure and every valid
/// split has zero gain, the valid split with the smallest key is used so that
/// label-consistent data can still be separated.
pub(crate) fn choose_split(data: &Data<'_>, rows: &[usize], params: &InductionParams) -> Option<SplitStats> {
    let counts = data.counts(rows);
    let m = params.min_instances.max(1);
    if rows.len() < 2 * m || counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return None;
    }
    let valid: Vec<SplitStats> = (0..data.columns.len())
        .map(|a| split_stats(data, rows, a))
        .filter(|s| is_valid(s, m))
        .collect();
    let positive: Vec<&SplitStats> = valid.iter().filter(|s| s.gain > TIE_EPS).collect();
    if positive.is_empty() {
        return valid
            .into_iter()
            .min_by(|a, b| data.keys[a.attribute].cmp(&data.keys[b.attribute]));
    }
    let mean = positive.iter().map(|s| s.gain).sum::<f64>() / positive.len() as f64;
    let mut best: Option<&SplitStats> = None;
    for s in positive.into_iter().filter(|s| s.gain >= mean - TIE_EPS) {
        best = match best {
            None => Some(s),
            Some(b) => {
                let better = if (s.gain_ratio - b.gain_ratio).abs() <= TIE_EPS {
                    data.keys[s.attribute] < data.keys[b.attribute]
                } else {
                    s.gain_ratio > b.gain_ratio
                };
                Some(if better { s } else { b })
            }
        };
    }
    best.cloned()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialNode {
    pub counts: Counts,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf,
    Split {
        attribute: usize,
        /// Non-empty branches in level order; `None` marks a branch that was
        /// never expanded.
        branches: Vec<(Level, Option<PartialNode>)>,
    },
}

impl PartialNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }
}

pub(crate) fn build_partial_tree(data: &Data<'_>, rows: &[usize], params: &InductionParams) -> PartialNode {
    let counts = data.counts(rows);
    let Some(split) = choose_split(data, rows, params) else {
        return PartialNode {
            counts,
            kind: NodeKind::Leaf,
        };
    };

    let col = &data.columns[split.attribute];
    let mut subsets: Vec<(Level, Vec<usize>)> = Level::ALL
        .iter()
        .map(|&l| (l, rows.iter().copied().filter(|&r| col[r] as usize == l.index()).collect()))
        .filter(|(_, s): &(Level, Vec<usize>)| !s.is_empty())
        .collect();

    let mut order: Vec<usize> = (0..subsets.len()).collect();
    let entropies: Vec<f64> = subsets
        .iter()
        .map(|(_, s)| entropy(&data.counts(s)))
        .collect();
    order.sort_by(|&a, &b| {
        entropies[a]
            .partial_cmp(&entropies[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut children: Vec<Option<PartialNode>> = vec![None; subsets.len()];
    let mut all_leaves = true;
    for &i in &order {
        let child = build_partial_tree(data, &subsets[i].1, params);
        let leaf = child.is_leaf();
        children[i] = Some(child);
        if !leaf {
            all_leaves = false;
            break;
        }
    }

    if all_leaves {
        let subtree: f64 = children
            .iter()
            .flatten()
            .map(|c| leaf_error(&c.counts, params.confidence))
            .sum();
        if leaf_error(&counts, params.confidence) <= subtree + TIE_EPS {
            return PartialNode {
                counts,
                kind: NodeKind::Leaf,
            };
        }
    }

    let branches = subsets
        .iter_mut()
        .zip(children)
        .map(|((level, _), child)| (*level, child))
        .collect();
    PartialNode {
        counts,
        kind: NodeKind::Split {
            attribute: split.attribute,
            branches,
        },
    }
}

/// An expanded leaf and the tests on its root path.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LeafPath {
    pub tests: Vec<(usize, Level)>,
    pub counts: Counts,
}

pub(crate) fn leaves(node: &PartialNode) -> Vec<LeafPath> {
    fn walk(node: &PartialNode, path: &mut Vec<(usize, Level)>, out: &mut Vec<LeafPath>) {
        match &node.kind {
            NodeKind::Leaf => out.push(LeafPath {
                tests: path.clone(),
                counts: node.counts,
            }),
            NodeKind::Split { attribute, branches } => {
                for (level, child) in branches {
                    if let Some(child) = child {
                        path.push((*attribute, *level));
                        walk(child, path, out);
                        path.pop();
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(node, &mut Vec::new(), &mut out);
    out
}

/// Leaf ranking for rule extraction: larger coverage, then higher accuracy,
/// then fewer tests, then the lexicographically smaller path.
pub(crate) fn best_leaf<'p>(keys: &[String], candidates: &'p [LeafPath]) -> Option<&'p LeafPath> {
    let key_path = |p: &LeafPath| -> Vec<(String, Level)> {
        p.tests.iter().map(|&(a, l)| (keys[a].clone(), l)).collect()
    };
    candidates.iter().min_by(|a, b| {
        let (na, nb) = (a.counts.iter().sum::<usize>(), b.counts.iter().sum::<usize>());
        let (ca, cb) = (a.counts[majority(&a.counts)], b.counts[majority(&b.counts)]);
        nb.cmp(&na)
            .then((cb * na).cmp(&(ca * nb)))
            .then(a.tests.len().cmp(&b.tests.len()))
            .then_with(|| key_path(a).cmp(&key_path(b)))
    })
}

pub(crate) fn class_of(counts: &Counts) -> Label {
    Label::from_index(majority(counts)).expect("two classes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skipgram::FeatureRow;

    fn table(keys: &[&str], rows: &[(&[Level], Label)]) -> FeatureTable {
        FeatureTable {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            rows: rows
                .iter()
                .enumerate()
                .map(|(i, (levels, label))| FeatureRow {
                    doc_id: format!("d{i}"),
                    label: *label,
                    levels: levels.to_vec(),
                })
                .collect(),
        }
    }

    use Label::{NonSeptic as N, Septic as S};
    use Level::{Plus as P, PlusPlus as PP, Zero as Z};

    #[test]
    fn pessimistic_error_reference_value() {
        assert!((added_errors(10.0, 0.0, 0.25) - 1.29449).abs() < 1e-5);
        assert_eq!(added_errors(10.0, 3.0, 0.75), 0.0);
        assert_eq!(added_errors(4.0, 4.0, 0.25), 0.0);
        // interpolation between e = 0 and e = 1
        let mid = added_errors(10.0, 0.5, 0.25);
        let (lo, hi) = (added_errors(10.0, 0.0, 0.25), added_errors(10.0, 1.0, 0.25));
        assert!((mid - (lo + hi) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn normal_approximation_branch() {
        // n = 20, e = 4, CF = 0.25: z = 0.6745
        let z: f64 = 0.674_489_750_196_081_7;
        let (n, e) = (20.0, 4.0);
        let f = (e + 0.5) / n;
        let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
            / (1.0 + z * z / n);
        assert!((added_errors(n, e, 0.25) - (r * n - e)).abs() < 1e-9);
        assert!(added_errors(n, e, 0.1) > added_errors(n, e, 0.25));
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let t = table(&["a"], &[(&[Z], S), (&[P], S), (&[PP], S)]);
        let data = Data::new(&t);
        let tree = build_partial_tree(&data, &[0, 1, 2], &InductionParams::unpruned());
        assert!(tree.is_leaf());
        assert_eq!(tree.counts, [0, 3]);
    }

    #[test]
    fn too_few_instances_is_a_leaf() {
        let t = table(&["a"], &[(&[Z], S), (&[P], N), (&[PP], S)]);
        let data = Data::new(&t);
        let params = InductionParams {
            confidence: 0.25,
            min_instances: 2,
        };
        let tree = build_partial_tree(&data, &[0, 1, 2], &params);
        assert!(tree.is_leaf());
        assert_eq!(class_of(&tree.counts), S);
    }

    #[test]
    fn xor_is_separated_without_pruning() {
        let t = table(
            &["a", "b"],
            &[(&[Z, Z], N), (&[Z, PP], S), (&[PP, Z], S), (&[PP, PP], N)],
        );
        let data = Data::new(&t);
        let tree = build_partial_tree(&data, &[0, 1, 2, 3], &InductionParams::unpruned());
        let split = choose_split(&data, &[0, 1, 2, 3], &InductionParams::unpruned()).unwrap();
        assert_eq!(split.attribute, 0);
        assert!(!tree.is_leaf());
        let found = leaves(&tree);
        assert!(found.iter().all(|l| l.counts.iter().filter(|&&c| c > 0).count() == 1));
    }

    #[test]
    fn gain_ratio_prefers_fewer_branches_at_equal_gain() {
        // both attributes separate the classes perfectly; "b" uses three
        // branches so its split information is larger
        let t = table(
            &["a", "b"],
            &[(&[Z, Z], N), (&[Z, P], N), (&[PP, PP], S), (&[PP, PP], S)],
        );
        let data = Data::new(&t);
        let split = choose_split(&data, &[0, 1, 2, 3], &InductionParams::unpruned()).unwrap();
        assert_eq!(split.attribute, 0);
    }

    #[test]
    fn best_leaf_prefers_coverage_then_accuracy() {
        let keys = vec!["a".to_string(), "b".to_string()];
        let leaves = vec![
            LeafPath {
                tests: vec![(0, Z)],
                counts: [2, 8],
            },
            LeafPath {
                tests: vec![(0, P), (1, Z)],
                counts: [0, 10],
            },
            LeafPath {
                tests: vec![(0, PP)],
                counts: [3, 0],
            },
        ];
        assert_eq!(best_leaf(&keys, &leaves).unwrap().counts, [0, 10]);
    }
}
