//! Exact graph edit distance between small unlabeled, undirected trees.
//!
//! The search assigns the nodes of the first tree, one at a time, either to
//! an unused node of the second tree or to deletion. Partial assignments are
//! expanded best-first (A*) under an admissible lower bound, so the first
//! complete assignment popped is optimal.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::stats::spearman;
use crate::structprobe::ParsedSentence;
use crate::tree::DepTree;
use crate::{Error, Result};

pub const DEFAULT_NODE_CAP: usize = 10;
pub const DEFAULT_EXPANSION_BUDGET: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GedCostModel {
    pub node_insert: f64,
    pub node_delete: f64,
    pub edge_insert: f64,
    pub edge_delete: f64,
}

impl Default for GedCostModel {
    fn default() -> Self {
        GedCostModel {
            node_insert: 1.0,
            node_delete: 1.0,
            edge_insert: 1.0,
            edge_delete: 1.0,
        }
    }
}

impl GedCostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.node_insert, self.node_delete, self.edge_insert, self.edge_delete];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(format!("edit costs must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        GedCostModel {
            node_insert: self.node_insert * factor,
            node_delete: self.node_delete * factor,
            edge_insert: self.edge_insert * factor,
            edge_delete: self.edge_delete * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GedLimits {
    pub node_cap: usize,
    pub expansion_budget: usize,
}

impl Default for GedLimits {
    fn default() -> Self {
        GedLimits {
            node_cap: DEFAULT_NODE_CAP,
            expansion_budget: DEFAULT_EXPANSION_BUDGET,
        }
    }
}

/// Order in which nodes of `t` are assigned: breadth-first from the node of
/// highest degree (lowest index on ties). Neighbours of assigned nodes come
/// early, so edge costs are charged as soon as possible.
fn search_order(t: &DepTree) -> Vec<usize> {
    let deg = t.degrees();
    let start = (0..t.n()).fold(0, |best, v| if deg[v] > deg[best] { v } else { best });
    let adj = t.adjacency();
    let mut seen = vec![false; t.n()];
    let mut order = Vec::with_capacity(t.n());
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order
}

struct State {
    f: f64,
    g: f64,
    /// Image of `order[..depth]`; `None` means deleted.
    map: Vec<Option<usize>>,
    used: u32,
    seq: u64,
    complete: bool,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    // BinaryHeap is a max-heap: the "greatest" state is the one to expand,
    // i.e. lowest f, then complete, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.complete.cmp(&other.complete))
            .then(self.map.len().cmp(&other.map.len()))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Exact edit distance with the default expansion budget.
pub fn ged(a: &DepTree, b: &DepTree, costs: &GedCostModel, node_cap: usize) -> Result<f64> {
    ged_with_limits(
        a,
        b,
        costs,
        GedLimits {
            node_cap,
            ..GedLimits::default()
        },
    )
}

pub fn ged_with_limits(a: &DepTree, b: &DepTree, costs: &GedCostModel, limits: GedLimits) -> Result<f64> {
    costs.validate()?;
    if limits.node_cap > 32 {
        return Err(Error::Config(format!("node cap {} above the supported 32", limits.node_cap)));
    }
    for t in [a, b] {
        if t.n() > limits.node_cap {
            return Err(Error::NodeCapExceeded {
                n: t.n(),
                cap: limits.node_cap,
            });
        }
    }
    let order = search_order(a);
    let (na, nb) = (a.n(), b.n());
    // position of each a-node in the assignment order
    let mut pos = vec![0; na];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let a_adj = a.adjacency();

    // a-edges with at least one endpoint beyond `depth`
    let open_a_edges = |depth: usize| -> usize {
        a.edges().iter().filter(|&&(x, y)| pos[x].max(pos[y]) >= depth).count()
    };
    let open_a: Vec<usize> = (0..=na).map(open_a_edges).collect();

    let heuristic = |depth: usize, used: u32| -> f64 {
        let ra = na - depth;
        let rb = nb - used.count_ones() as usize;
        let node = if ra > rb {
            (ra - rb) as f64 * costs.node_delete
        } else {
            (rb - ra) as f64 * costs.node_insert
        };
        let eb_open = b
            .edges()
            .iter()
            .filter(|&&(x, y)| used & (1 << x) == 0 || used & (1 << y) == 0)
            .count();
        let edge = if open_a[depth] > eb_open {
            (open_a[depth] - eb_open) as f64 * costs.edge_delete
        } else {
            (eb_open - open_a[depth]) as f64 * costs.edge_insert
        };
        node + edge
    };

    // cost of inserting what remains of b once every a-node is assigned
    let completion = |used: u32| -> f64 {
        let nodes = (0..nb).filter(|&x| used & (1 << x) == 0).count();
        let edges = b
            .edges()
            .iter()
            .filter(|&&(x, y)| used & (1 << x) == 0 || used & (1 << y) == 0)
            .count();
        nodes as f64 * costs.node_insert + edges as f64 * costs.edge_insert
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    if na == 0 {
        return Ok(completion(0));
    }
    heap.push(State {
        f: heuristic(0, 0),
        g: 0.0,
        map: Vec::new(),
        used: 0,
        seq,
        complete: false,
    });
    let mut expansions = 0usize;

    while let Some(state) = heap.pop() {
        if state.complete {
            return Ok(state.g);
        }
        expansions += 1;
        if expansions > limits.expansion_budget {
            return Err(Error::SearchBudgetExceeded {
                budget: limits.expansion_budget,
            });
        }
        let depth = state.map.len();
        let u = order[depth];
        let candidates = (0..nb).filter(|&x| state.used & (1 << x) == 0).map(Some).chain([None]);
        for image in candidates {
            let mut g = state.g;
            match image {
                None => {
                    g += costs.node_delete;
                    // every edge from u back to an assigned node is deleted
                    g += a_adj[u].iter().filter(|&&v| pos[v] < depth).count() as f64 * costs.edge_delete;
                }
                Some(x) => {
                    for (i, img) in state.map.iter().enumerate() {
                        let v = order[i];
                        let in_a = a.has_edge(u, v);
                        let in_b = img.is_some_and(|y| b.has_edge(x, y));
                        if in_a && !in_b {
                            g += costs.edge_delete;
                        } else if in_b && !in_a {
                            g += costs.edge_insert;
                        }
                    }
                }
            }
            let used = image.map_or(state.used, |x| state.used | (1 << x));
            let mut map = state.map.clone();
            map.push(image);
            seq += 1;
            let complete = depth + 1 == na;
            let (g, f) = if complete {
                let total = g + completion(used);
                (total, total)
            } else {
                (g, g + heuristic(depth + 1, used))
            };
            heap.push(State {
                f,
                g,
                map,
                used,
                seq,
                complete,
            });
        }
    }
    unreachable!("the all-deleted assignment is always reachable")
}

/// AHU canonical string of an unordered tree, rooted at its center(s).
/// Two trees are isomorphic exactly when their canonical forms match.
pub fn canonical_form(t: &DepTree) -> String {
    let adj = t.adjacency();
    let n = t.n();
    // peel leaves to find the center(s)
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&v| deg[v] <= 1).collect();
    let mut remaining = n;
    while remaining > 2 {
        remaining -= layer.len();
        let mut next = Vec::new();
        for &leaf in &layer {
            for &v in &adj[leaf] {
                deg[v] -= 1;
                if deg[v] == 1 {
                    next.push(v);
                }
            }
        }
        layer = next;
    }
    fn encode(v: usize, parent: Option<usize>, adj: &[Vec<usize>]) -> String {
        let mut kids: Vec<String> = adj[v]
            .iter()
            .filter(|&&c| Some(c) != parent)
            .map(|&c| encode(c, Some(v), adj))
            .collect();
        kids.sort();
        format!("({})", kids.concat())
    }
    layer
        .iter()
        .map(|&c| encode(c, None, &adj))
        .min()
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GedRecord {
    pub id: String,
    pub n_cs: usize,
    pub n_es: usize,
    pub n_en: usize,
    pub ged_cs_es: f64,
    pub ged_cs_en: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GedSummary {
    pub retained: usize,
    pub excluded: usize,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GedComparison {
    pub records: Vec<GedRecord>,
    pub summary: GedSummary,
}

pub const GED_CSV_HEADER: &str = "id,n_cs,n_es,n_en,ged_cs_es,ged_cs_en";

impl GedComparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(GED_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.id, r.n_cs, r.n_es, r.n_en, r.ged_cs_es, r.ged_cs_en
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Pairs parses by id, drops every record where any of the three parses
/// exceeds the cap (or is missing), and correlates GED(cs, es) with
/// GED(cs, en) across the retained records.
pub fn ged_compare(
    cs: &[ParsedSentence],
    es: &[ParsedSentence],
    en: &[ParsedSentence],
    costs: &GedCostModel,
    limits: GedLimits,
) -> Result<GedComparison> {
    costs.validate()?;
    let index = |ps: &[ParsedSentence]| -> std::collections::BTreeMap<String, DepTree> {
        ps.iter().map(|p| (p.id.clone(), p.tree.clone())).collect()
    };
    let (es_by_id, en_by_id) = (index(es), index(en));
    let mut cs_sorted: Vec<&ParsedSentence> = cs.iter().collect();
    cs_sorted.sort_by(|x, y| x.id.cmp(&y.id));
    cs_sorted.dedup_by(|x, y| x.id == y.id);

    let mut jobs = Vec::new();
    let mut excluded = 0;
    for p in cs_sorted {
        let (Some(t_es), Some(t_en)) = (es_by_id.get(&p.id), en_by_id.get(&p.id)) else {
            warn!("record '{}' lacks a parse in one language; excluded", p.id);
            excluded += 1;
            continue;
        };
        if [&p.tree, t_es, t_en].iter().any(|t| t.n() > limits.node_cap) {
            excluded += 1;
            continue;
        }
        jobs.push((p, t_es, t_en));
    }
    if jobs.is_empty() {
        return Err(Error::Empty(format!(
            "no record has all three parses within {} nodes",
            limits.node_cap
        )));
    }
    let records = jobs
        .par_iter()
        .map(|(p, t_es, t_en)| {
            let named = |e: Error| match e {
                Error::SearchBudgetExceeded { .. } => {
                    Error::Validation(format!("record '{}': {e}", p.id))
                }
                other => other,
            };
            Ok(GedRecord {
                id: p.id.clone(),
                n_cs: p.tree.n(),
                n_es: t_es.n(),
                n_en: t_en.n(),
                ged_cs_es: ged_with_limits(&p.tree, t_es, costs, limits).map_err(named)?,
                ged_cs_en: ged_with_limits(&p.tree, t_en, costs, limits).map_err(named)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = records.iter().map(|r| r.ged_cs_es).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.ged_cs_en).collect();
    let rho = spearman(&xs, &ys)?;
    Ok(GedComparison {
        summary: GedSummary {
            retained: records.len(),
            excluded,
            spearman: rho,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn t(n: usize, edges: &[(usize, usize)]) -> DepTree {
        DepTree::from_edges(n, edges.iter().copied()).unwrap()
    }

    /// Minimum over every partial injective map from a-nodes to b-nodes,
    /// completed with insertions of whatever b has left over.
    fn brute_force(a: &DepTree, b: &DepTree, c: &GedCostModel) -> f64 {
        fn go(i: usize, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, a: &DepTree, b: &DepTree, c: &GedCostModel, best: &mut f64) {
            if i == a.n() {
                let mut cost = 0.0;
                for m in map.iter() {
                    if m.is_none() {
                        cost += c.node_delete;
                    }
                }
                cost += used.iter().filter(|u| !**u).count() as f64 * c.node_insert;
                for &(x, y) in a.edges() {
                    match (map[x], map[y]) {
                        (Some(p), Some(q)) if b.has_edge(p, q) => {}
                        _ => cost += c.edge_delete,
                    }
                }
                let mut inv = vec![None; b.n()];
                for (x, m) in map.iter().enumerate() {
                    if let Some(p) = m {
                        inv[*p] = Some(x);
                    }
                }
                for &(p, q) in b.edges() {
                    match (inv[p], inv[q]) {
                        (Some(x), Some(y)) if a.has_edge(x, y) => {}
                        _ => cost += c.edge_insert,
                    }
                }
                *best = best.min(cost);
                return;
            }
            map.push(None);
            go(i + 1, map, used, a, b, c, best);
            map.pop();
            for p in 0..b.n() {
                if !used[p] {
                    used[p] = true;
                    map.push(Some(p));
                    go(i + 1, map, used, a, b, c, best);
                    map.pop();
                    used[p] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(0, &mut Vec::new(), &mut vec![false; b.n()], a, b, c, &mut best);
        best
    }

    fn random_tree(rng: &mut crate::SeededRng, n: usize) -> DepTree {
        let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
        DepTree::from_edges(n, edges).unwrap()
    }

    #[test]
    fn chain_versus_star() {
        let chain = t(3, &[(0, 1), (1, 2)]);
        let star = t(3, &[(0, 1), (0, 2)]);
        // Both are paths on three nodes. Under the identity mapping the
        // cost would be 2, but relabeling the star's center makes it free.
        assert_eq!(ged(&chain, &star, &GedCostModel::default(), 10).unwrap(), 0.0);
        assert_eq!(brute_force(&chain, &star, &GedCostModel::default()), 0.0);
        let chain4 = t(4, &[(0, 1), (1, 2), (2, 3)]);
        let star4 = t(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(ged(&chain4, &star4, &GedCostModel::default(), 10).unwrap(), 2.0);
        assert_eq!(brute_force(&chain4, &star4, &GedCostModel::default()), 2.0);
    }

    #[test]
    fn identical_and_single_node() {
        let a = t(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]);
        assert_eq!(ged(&a, &a, &GedCostModel::default(), 10).unwrap(), 0.0);
        let one = t(1, &[]);
        // delete 4 nodes and 4 edges
        assert_eq!(ged(&a, &one, &GedCostModel::default(), 10).unwrap(), 8.0);
        assert_eq!(ged(&one, &a, &GedCostModel::default(), 10).unwrap(), 8.0);
    }

    #[test]
    fn matches_brute_force_on_small_random_pairs() {
        let mut rng = crate::seeded_rng(9);
        let costs = [
            GedCostModel::default(),
            GedCostModel {
                node_insert: 2.0,
                node_delete: 0.5,
                edge_insert: 1.5,
                edge_delete: 0.25,
            },
        ];
        for _ in 0..150 {
            let a = { let n = rng.random_range(1..=5); random_tree(&mut rng, n) };
            let b = { let n = rng.random_range(1..=5); random_tree(&mut rng, n) };
            for c in &costs {
                assert_eq!(ged(&a, &b, c, 10).unwrap(), brute_force(&a, &b, c), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn cap_and_budget_errors() {
        let big = t(11, &(1..11).map(|v| (0, v)).collect::<Vec<_>>());
        let small = t(2, &[(0, 1)]);
        assert!(matches!(
            ged(&big, &small, &GedCostModel::default(), 10),
            Err(Error::NodeCapExceeded { n: 11, cap: 10 })
        ));
        let a = t(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let b = t(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        let limits = GedLimits {
            node_cap: 10,
            expansion_budget: 3,
        };
        assert!(matches!(
            ged_with_limits(&a, &b, &GedCostModel::default(), limits),
            Err(Error::SearchBudgetExceeded { budget: 3 })
        ));
        let bad = GedCostModel {
            node_insert: -1.0,
            ..GedCostModel::default()
        };
        assert!(ged(&a, &b, &bad, 10).is_err());
    }

    #[test]
    fn ten_node_trees_finish() {
        let mut rng = crate::seeded_rng(4);
        for _ in 0..5 {
            let a = random_tree(&mut rng, 10);
            let b = random_tree(&mut rng, 10);
            let d = ged(&a, &b, &GedCostModel::default(), 10).unwrap();
            assert!(d >= 0.0);
        }
    }

    #[test]
    fn canonical_form_detects_isomorphism() {
        let a = t(4, &[(0, 1), (1, 2), (2, 3)]);
        let b = t(4, &[(2, 0), (0, 3), (3, 1)]);
        let star = t(4, &[(0, 1), (0, 2), (0, 3)]);
        assert_eq!(canonical_form(&a), canonical_form(&b));
        assert_ne!(canonical_form(&a), canonical_form(&star));
    }

    fn parsed(id: &str, tree: DepTree) -> ParsedSentence {
        ParsedSentence { id: id.into(), tree }
    }

    #[test]
    fn compare_filters_and_correlates() {
        let mut rng = crate::seeded_rng(2);
        let mut cs = Vec::new();
        let mut es = Vec::new();
        for i in 0..8 {
            let n = rng.random_range(2..=7);
            cs.push(parsed(&format!("r{i}"), random_tree(&mut rng, n)));
            es.push(parsed(&format!("r{i}"), { let n = rng.random_range(2..=7); random_tree(&mut rng, n) }));
        }
        cs.push(parsed("big", random_tree(&mut rng, 12)));
        es.push(parsed("big", random_tree(&mut rng, 4)));
        cs.push(parsed("orphan", random_tree(&mut rng, 4)));
        let en: Vec<ParsedSentence> = es.clone();
        let cmp = ged_compare(&cs, &es, &en, &GedCostModel::default(), GedLimits::default()).unwrap();
        assert_eq!(cmp.summary.retained, 8);
        assert_eq!(cmp.summary.excluded, 2);
        assert!((cmp.summary.spearman - 1.0).abs() < 1e-12);
        assert!(cmp.to_csv().starts_with("id,n_cs,n_es,n_en,ged_cs_es,ged_cs_en\nr0,"));

        let none = ged_compare(&cs[8..9], &es[8..9], &en[8..9], &GedCostModel::default(), GedLimits::default());
        assert!(matches!(none, Err(Error::Empty(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn metric_properties(seed in 0u64..10_000) {
            let mut rng = crate::seeded_rng(seed);
            let c = GedCostModel::default();
            let a = { let n = rng.random_range(1..=5); random_tree(&mut rng, n) };
            let b = { let n = rng.random_range(1..=5); random_tree(&mut rng, n) };
            let z = { let n = rng.random_range(1..=5); random_tree(&mut rng, n) };
            let ab = ged(&a, &b, &c, 10).unwrap();
            prop_assert_eq!(ab, ged(&b, &a, &c, 10).unwrap());
            prop_assert_eq!(ged(&a, &a, &c, 10).unwrap(), 0.0);
            let az = ged(&a, &z, &c, 10).unwrap();
            let zb = ged(&z, &b, &c, 10).unwrap();
            prop_assert!(ab <= az + zb);
            prop_assert!(ab >= (a.n() as f64 - b.n() as f64).abs());
            prop_assert_eq!(ged(&a, &b, &c.scaled(2.0), 10).unwrap(), 2.0 * ab);
            prop_assert_eq!(ab == 0.0, canonical_form(&a) == canonical_form(&b));
        }
    }
}
