//! Commuting Pauli strings and the decision-tree branches built from them.
//!
//! Everything is constructed for the seed X⊗…⊗X and relabeled afterwards.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{AxisPermutation, PauliAxis, PauliString, MAX_LEN};

/// Largest N for which every maximal string is enumerated.
pub const EXHAUSTIVE_MAX_N: usize = 5;
/// How many strings the bounded search collects for larger N.
pub const CAPPED_STRINGS: usize = 16;
const SEARCH_BUDGET: u64 = 20_000_000;

/// ½(3^N − 1) − Odd(N).
pub fn commutant_size(n: usize) -> usize {
    (3usize.pow(n as u32) - 1) / 2 - (n % 2)
}

/// 2^(N−1) + Even(N).
pub fn maximal_length(n: usize) -> usize {
    (1usize << (n - 1)) + usize::from(n.is_multiple_of(2))
}

/// Full-weight words other than X^N that commute with X^N, alphabetically.
pub fn commutant_of_seed(n: usize) -> Vec<PauliString> {
    assert!((1..=MAX_LEN).contains(&n));
    let seed = PauliString::uniform(PauliAxis::X, n);
    PauliString::all_full_weight(n)
        .into_iter()
        .filter(|s| *s != seed && !s.anticommutes_unchecked(&seed))
        .collect()
}

/// A set of mutually commuting full-weight words, seed first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommutingString {
    pub ops: Vec<PauliString>,
}

impl CommutingString {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn is_commuting(&self) -> bool {
        self.ops.iter().enumerate().all(|(i, a)| self.ops[i + 1..].iter().all(|b| !a.anticommutes_unchecked(b)))
    }

    pub fn as_set(&self) -> std::collections::BTreeSet<PauliString> {
        self.ops.iter().copied().collect()
    }

    pub fn relabel(&self, perm: &AxisPermutation) -> CommutingString {
        CommutingString { ops: self.ops.iter().map(|s| s.relabel(perm)).collect() }
    }
}

// --- search ---------------------------------------------------------------

struct Search {
    verts: Vec<PauliString>,
    id: HashMap<PauliString, usize>,
    adj: Vec<FixedBitSet>,
    seed: PauliString,
    target: usize,
    cap: Option<usize>,
    found: Vec<FixedBitSet>,
    best: usize,
    steps: u64,
}

impl Search {
    fn new(n: usize, cap: Option<usize>) -> Self {
        let verts = commutant_of_seed(n);
        let id = verts.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let adj = verts
            .iter()
            .map(|a| {
                let mut b = FixedBitSet::with_capacity(verts.len());
                for (j, v) in verts.iter().enumerate() {
                    if v != a && !a.anticommutes_unchecked(v) {
                        b.insert(j);
                    }
                }
                b
            })
            .collect();
        Search {
            verts,
            id,
            adj,
            seed: PauliString::uniform(PauliAxis::X, n),
            target: maximal_length(n) - 1,
            cap,
            found: Vec::new(),
            best: 0,
            steps: 0,
        }
    }

    fn done(&self) -> bool {
        self.cap.is_some_and(|c| self.found.len() >= c) || self.steps > SEARCH_BUDGET
    }

    // `group` holds every product of chosen words and the seed (phases dropped);
    // `r` its full-weight members. A maximal set contains every full-weight
    // product of its members, so a branch that would need an excluded word dies.
    fn dfs(&mut self, r: &FixedBitSet, group: &[PauliString], mut p: FixedBitSet, mut x: FixedBitSet) {
        self.steps += 1;
        let size = r.count_ones(..);
        if p.is_clear() {
            self.best = self.best.max(size);
            if size >= self.target {
                self.found.push(r.clone());
            }
            return;
        }
        let candidates: Vec<usize> = p.ones().collect();
        for v in candidates {
            if size + p.count_ones(..) < self.target || self.done() {
                return;
            }
            let word = self.verts[v];
            let mut new_group = group.to_vec();
            let mut r2 = r.clone();
            let mut blocked = false;
            for g in group {
                let h = word.product(g).expect("same length");
                new_group.push(h);
                if let Some(&u) = self.id.get(&h) {
                    if x.contains(u) {
                        blocked = true;
                        break;
                    }
                    r2.insert(u);
                }
            }
            if !blocked {
                let mut p2 = p.clone();
                p2.intersect_with(&self.adj[v]);
                p2.difference_with(&r2);
                let mut x2 = x.clone();
                x2.intersect_with(&self.adj[v]);
                self.dfs(&r2, &new_group, p2, x2);
            }
            p.set(v, false);
            x.insert(v);
        }
    }

    fn run(mut self) -> (Vec<Vec<PauliString>>, usize) {
        let all = {
            let mut b = FixedBitSet::with_capacity(self.verts.len());
            b.insert_range(..);
            b
        };
        let empty = FixedBitSet::with_capacity(self.verts.len());
        let identity = PauliString::uniform(PauliAxis::I, self.seed.len());
        let group = vec![identity, self.seed];
        self.dfs(&empty, &group, all, empty.clone());
        let sets = self
            .found
            .iter()
            .map(|b| std::iter::once(self.seed).chain(b.ones().map(|i| self.verts[i])).collect())
            .collect();
        (sets, self.best + 1)
    }
}

/// Maximal mutually commuting strings through X^N, arranged and sorted so
/// that consecutive strings share the longest possible prefix.
///
/// Exhaustive up to N=5; above that a bounded depth-first search returns up
/// to [`CAPPED_STRINGS`] strings and fails if none reaches the expected length.
pub fn maximal_commuting_strings(n: usize) -> Result<Vec<CommutingString>> {
    if !(2..=8).contains(&n) {
        return Err(Error::OutOfRange(format!("N={n} (strings are built for 2..=8)")));
    }
    let cap = (n > EXHAUSTIVE_MAX_N).then_some(CAPPED_STRINGS);
    let (sets, best) = Search::new(n, cap).run();
    let expected = maximal_length(n);
    if sets.is_empty() {
        return Err(Error::StringSearch { n, expected, found: best });
    }
    Ok(arrange(n, sets))
}

// --- arrangement ------------------------------------------------------------

/// t-subsets of {1..n} (bit i-1 for element i) in a revolving-door order:
/// G(n,t) = G(n−1,t) followed by G(n−1,t−1) ∪ {n}, the second part rotated
/// so that it starts one swap away from the last set of the first part.
pub fn revolving_door(n: usize, t: usize) -> Vec<u64> {
    if t == 0 {
        return vec![0];
    }
    if n < t {
        return vec![];
    }
    if n == t {
        return vec![(1u64 << t) - 1];
    }
    if t == 1 {
        return (0..n).map(|i| 1u64 << i).collect();
    }
    let mut head = revolving_door(n - 1, t);
    let tail: Vec<u64> = revolving_door(n - 1, t - 1).into_iter().map(|s| s | 1 << (n - 1)).collect();
    let k = head
        .last()
        .and_then(|last| tail.iter().position(|s| (s ^ last).count_ones() == 2))
        .unwrap_or(0);
    head.extend(tail[k..].iter().chain(&tail[..k]));
    head
}

type ElementKey = (usize, usize, Vec<u8>);

struct Arranger {
    n: usize,
    ranks: HashMap<usize, HashMap<u64, usize>>,
}

impl Arranger {
    fn new(n: usize) -> Self {
        let ranks = (0..=n)
            .map(|t| (t, revolving_door(n, t).into_iter().enumerate().map(|(i, m)| (m, i)).collect()))
            .collect();
        Arranger { n, ranks }
    }

    // Non-X positions counted from the right, so the rightmost party is element 1.
    // Among letters, Z sorts before Y.
    fn key(&self, s: &PauliString) -> ElementKey {
        let mut mask = 0u64;
        let mut letters = Vec::new();
        for (p, a) in s.axes().enumerate() {
            if a != PauliAxis::X {
                mask |= 1 << (self.n - 1 - p);
                letters.push(if a == PauliAxis::Z { 0 } else { 1 });
            }
        }
        let t = mask.count_ones() as usize;
        (t, self.ranks[&t][&mask], letters)
    }
}

/// Elements within a string go by (weight, door rank, letters). Strings are
/// then compared element by element on (weight, letters, door rank), which
/// puts strings made of X and Z only ahead of those containing Y.
/// (weight, letters, door rank) per element of a string.
type StringKey = Vec<(usize, Vec<u8>, usize)>;

fn arrange(n: usize, sets: Vec<Vec<PauliString>>) -> Vec<CommutingString> {
    let arr = Arranger::new(n);
    let mut keyed: Vec<(StringKey, CommutingString)> = sets
        .into_iter()
        .map(|mut ops| {
            ops.sort_by_cached_key(|s| arr.key(s));
            let string_key = ops
                .iter()
                .map(|s| {
                    let (t, rank, letters) = arr.key(s);
                    (t, letters, rank)
                })
                .collect();
            (string_key, CommutingString { ops })
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, s)| s).collect()
}

// --- branches ---------------------------------------------------------------

/// Decision-tree graph. Nodes are tree positions, so a word may label several nodes.
/// Each node has at most one solid (value big) and one dashed (value small) successor.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeBranch {
    n: usize,
    nodes: Vec<PauliString>,
    solid: Vec<Option<usize>>,
    dashed: Vec<Option<usize>>,
}

/// `{"n": N, "nodes": ["XXX", …], "solid": [[i, j], …], "dashed": [[i, j], …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchJson {
    pub n: usize,
    pub nodes: Vec<PauliString>,
    pub solid: Vec<[usize; 2]>,
    pub dashed: Vec<[usize; 2]>,
}

impl TreeBranch {
    /// Root is node 0.
    pub fn from_edges(n: usize, nodes: Vec<PauliString>, solid: &[[usize; 2]], dashed: &[[usize; 2]]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidPauli("empty tree".into()));
        }
        for s in &nodes {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            if !s.is_full_weight() {
                return Err(Error::NotFullWeight(s.to_string()));
            }
        }
        let mut t = TreeBranch { n, solid: vec![None; nodes.len()], dashed: vec![None; nodes.len()], nodes };
        for (edges, solid) in [(solid, true), (dashed, false)] {
            for &[i, j] in edges {
                if i >= t.nodes.len() || j >= t.nodes.len() {
                    return Err(Error::OutOfRange(format!("edge [{i}, {j}]")));
                }
                let slot = if solid { &mut t.solid[i] } else { &mut t.dashed[i] };
                if slot.replace(j).is_some() {
                    return Err(Error::OutOfRange(format!("node {i} has two edges of one kind")));
                }
            }
        }
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[PauliString] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> PauliString {
        self.nodes[0]
    }

    pub fn solid_child(&self, i: usize) -> Option<usize> {
        self.solid[i]
    }

    pub fn dashed_child(&self, i: usize) -> Option<usize> {
        self.dashed[i]
    }

    pub fn solid_edges(&self) -> Vec<[usize; 2]> {
        self.solid.iter().enumerate().filter_map(|(i, c)| c.map(|j| [i, j])).collect()
    }

    pub fn dashed_edges(&self) -> Vec<[usize; 2]> {
        self.dashed.iter().enumerate().filter_map(|(i, c)| c.map(|j| [i, j])).collect()
    }

    /// Words along the solid chain from the root.
    pub fn solid_chain(&self) -> Vec<PauliString> {
        let mut out = vec![self.nodes[0]];
        let mut i = 0;
        while let Some(j) = self.solid[i] {
            out.push(self.nodes[j]);
            i = j;
        }
        out
    }

    pub fn distinct_words(&self) -> HashSet<PauliString> {
        self.nodes.iter().copied().collect()
    }

    pub fn relabel(&self, perm: &AxisPermutation) -> TreeBranch {
        TreeBranch { nodes: self.nodes.iter().map(|s| s.relabel(perm)).collect(), ..self.clone() }
    }

    pub fn to_json(&self) -> BranchJson {
        BranchJson { n: self.n, nodes: self.nodes.clone(), solid: self.solid_edges(), dashed: self.dashed_edges() }
    }

    pub fn from_json(json: &BranchJson) -> Result<Self> {
        Self::from_edges(json.n, json.nodes.clone(), &json.solid, &json.dashed)
    }
}

/// Links sorted strings: S_1 as a solid chain, then each S_j enters by a
/// dashed edge at the first position where it differs from S_{j−1}.
pub fn branch_from_strings(n: usize, strings: &[CommutingString]) -> Result<TreeBranch> {
    let first = strings.first().ok_or(Error::StringSearch { n, expected: maximal_length(n), found: 0 })?;
    let mut nodes = Vec::new();
    let mut solid = Vec::new();
    let mut dashed = Vec::new();
    let mut prev_ids: Vec<usize> = Vec::new();
    for (p, s) in first.ops.iter().enumerate() {
        nodes.push(*s);
        prev_ids.push(p);
        if p > 0 {
            solid.push([p - 1, p]);
        }
    }
    for pair in strings.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let Some(d) = a.ops.iter().zip(&b.ops).position(|(x, y)| x != y) else {
            continue;
        };
        let mut ids = prev_ids[..d].to_vec();
        for (p, s) in b.ops.iter().enumerate().skip(d) {
            let id = nodes.len();
            nodes.push(*s);
            if p == d {
                dashed.push([prev_ids[d], id]);
            } else {
                solid.push([id - 1, id]);
            }
            ids.push(id);
        }
        prev_ids = ids;
    }
    TreeBranch::from_edges(n, nodes, &solid, &dashed)
}

/// The relabeling used for a uniform seed when none is given: swap X with the seed axis.
pub fn default_relabel(seed_axis: PauliAxis) -> AxisPermutation {
    AxisPermutation::transposition(PauliAxis::X, seed_axis)
}

/// Branch of the decision tree that starts at `seed` = a⊗…⊗a.
///
/// The X^N branch is relabeled with `perm`, which must send X to a; by
/// default X and a are swapped.
pub fn build_branch(n: usize, seed: &PauliString, perm: Option<AxisPermutation>) -> Result<TreeBranch> {
    if seed.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: seed.len() });
    }
    let a = seed.axis(0);
    if a == PauliAxis::I || seed.axes().any(|b| b != a) {
        return Err(Error::InvalidPauli(format!("{seed} (seed must be a uniform full-weight word)")));
    }
    let perm = perm.unwrap_or_else(|| default_relabel(a));
    if perm.apply(PauliAxis::X) != a {
        return Err(Error::InvalidPauli(format!("relabeling {perm} does not send X to {a}")));
    }
    let strings = maximal_commuting_strings(n)?;
    Ok(branch_from_strings(n, &strings)?.relabel(&perm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn door_orders() {
        let to_sets = |v: Vec<u64>| -> Vec<Vec<usize>> {
            v.into_iter().map(|m| (0..64).filter(|i| m >> i & 1 == 1).map(|i| i + 1).collect()).collect()
        };
        assert_eq!(to_sets(revolving_door(4, 2)), vec![vec![1, 2], vec![1, 3], vec![2, 3], vec![2, 4], vec![3, 4], vec![1, 4]]);
        for n in 1..=8 {
            for t in 0..=n {
                let g = revolving_door(n, t);
                let uniq: HashSet<u64> = g.iter().copied().collect();
                assert_eq!(uniq.len(), g.len());
                assert!(g.iter().all(|m| m.count_ones() as usize == t));
            }
        }
    }

    #[test]
    fn small_counts() {
        assert_eq!(commutant_size(3), 12);
        assert_eq!(maximal_length(4), 9);
        assert_eq!(maximal_commuting_strings(2).unwrap().len(), 2);
    }
}
