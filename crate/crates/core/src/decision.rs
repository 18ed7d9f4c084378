//! Adaptive measurement sessions.
//!
//! A session recommends the next full-weight setting, accepts the measured
//! value, and keeps the running Σ T². Recommendations walk a decision tree
//! (solid edge when |T| ≥ t, dashed otherwise). Once the tree runs out, the
//! unmeasured setting with the least squared correlation already seen on
//! anticommuting settings goes next.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::{exceeds, propagated_error};
use crate::error::{Error, Result};
use crate::pauli::{AxisPermutation, PauliAxis, PauliString};
use crate::state::QuantumState;
use crate::strings::{build_branch, TreeBranch};
use crate::tensor::{correlation, sample_from_value, shot_stderr, VALUE_TOL};

pub const TWO_QUBIT_THRESHOLD: f64 = 0.4;
pub const BRANCH_THRESHOLD: f64 = 0.5;
/// Largest N a session accepts (3^8 settings).
pub const MAX_SESSION_QUBITS: usize = 8;

pub fn default_threshold(n: usize) -> f64 {
    if n == 2 {
        TWO_QUBIT_THRESHOLD
    } else {
        BRANCH_THRESHOLD
    }
}

/// The two-qubit tree. ZZ, then YY, then XX whatever the outcomes; after
/// three small values it tries ZX, and from there either YZ, XY (ZX big) or
/// XZ, YX, ZY (ZX small, XZ big). Other exits hand over to the priority rule.
pub fn two_qubit_tree() -> TreeBranch {
    let w = |s: &str| s.parse::<PauliString>().unwrap();
    let nodes = ["ZZ", "YY", "YY", "XX", "XX", "XX", "XX", "ZX", "YZ", "XZ", "XY", "YX", "ZY"].map(w).to_vec();
    let solid = [[0, 1], [1, 3], [2, 5], [7, 8], [8, 10], [9, 11], [11, 12]];
    let dashed = [[0, 2], [1, 4], [2, 6], [6, 7], [7, 9], [8, 10], [11, 12]];
    TreeBranch::from_edges(2, nodes, &solid, &dashed).expect("static tree is well formed")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Two-qubit tree for N=2 unless a seed is given; otherwise the branch
    /// seeded by `seed` (default X^N), relabeled by `relabel`.
    Tree {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<PauliString>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relabel: Option<AxisPermutation>,
    },
    /// Uniformly shuffled order; X^N goes first when N > 2.
    Random { rng_seed: u64 },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Tree { seed: None, relabel: None }
    }
}

#[derive(Debug)]
enum Plan {
    Tree { tree: Arc<TreeBranch>, follow_other: bool },
    Order(Vec<PauliString>),
}

#[derive(Debug)]
pub struct DecisionPolicy {
    n_qubits: usize,
    threshold: f64,
    strategy: Strategy,
    plan: Plan,
}

type BranchKey = (usize, PauliString, Option<AxisPermutation>);

fn branch_cache() -> &'static Mutex<HashMap<BranchKey, Arc<TreeBranch>>> {
    static CACHE: OnceLock<Mutex<HashMap<BranchKey, Arc<TreeBranch>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Memoized [`build_branch`].
pub fn cached_branch(n: usize, seed: &PauliString, perm: Option<AxisPermutation>) -> Result<Arc<TreeBranch>> {
    let key = (n, *seed, perm);
    if let Some(t) = branch_cache().lock().unwrap().get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(build_branch(n, seed, perm)?);
    branch_cache().lock().unwrap().insert(key, t.clone());
    Ok(t)
}

/// Shuffled full-weight settings, X^N pinned first for N > 2.
pub fn random_order(n: usize, rng_seed: u64) -> Vec<PauliString> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut all = PauliString::all_full_weight(n);
    if n > 2 {
        let rest = &mut all[1..];
        rest.shuffle(&mut rng);
    } else {
        all.shuffle(&mut rng);
    }
    all
}

impl DecisionPolicy {
    pub fn new(n_qubits: usize, threshold: Option<f64>, strategy: Strategy) -> Result<Self> {
        if !(2..=MAX_SESSION_QUBITS).contains(&n_qubits) {
            return Err(Error::OutOfRange(format!("n_qubits={n_qubits} not in 2..={MAX_SESSION_QUBITS}")));
        }
        let threshold = threshold.unwrap_or_else(|| default_threshold(n_qubits));
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::OutOfRange(format!("threshold={threshold} not in (0, 1)")));
        }
        let plan = match &strategy {
            Strategy::Tree { seed: None, relabel: None } if n_qubits == 2 => {
                Plan::Tree { tree: Arc::new(two_qubit_tree()), follow_other: false }
            }
            Strategy::Tree { seed, relabel } => {
                let seed = match (seed, relabel) {
                    (Some(s), _) => *s,
                    (None, Some(p)) => PauliString::uniform(p.apply(PauliAxis::X), n_qubits),
                    (None, None) => PauliString::uniform(PauliAxis::X, n_qubits),
                };
                Plan::Tree { tree: cached_branch(n_qubits, &seed, *relabel)?, follow_other: true }
            }
            Strategy::Random { rng_seed } => Plan::Order(random_order(n_qubits, *rng_seed)),
        };
        Ok(DecisionPolicy { n_qubits, threshold, strategy, plan })
    }

    /// Custom tree. With `follow_other`, a node missing the preferred edge uses
    /// its other edge before handing over to the priority rule.
    pub fn with_tree(tree: TreeBranch, threshold: f64, follow_other: bool) -> Result<Self> {
        let n_qubits = tree.n_qubits();
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::OutOfRange(format!("threshold={threshold} not in (0, 1)")));
        }
        let strategy = Strategy::Tree { seed: Some(tree.root()), relabel: None };
        Ok(DecisionPolicy { n_qubits, threshold, strategy, plan: Plan::Tree { tree: Arc::new(tree), follow_other } })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn tree(&self) -> Option<&TreeBranch> {
        match &self.plan {
            Plan::Tree { tree, .. } => Some(tree),
            Plan::Order(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Running,
    Entangled,
    Exhausted,
}

impl SessionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SessionStatus::Running => "running",
            SessionStatus::Entangled => "entangled",
            SessionStatus::Exhausted => "exhausted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub setting: PauliString,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub sum: f64,
    pub status: SessionStatus,
    /// Tree node that recommended the setting, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cursor {
    Node(usize),
    Fallback,
    Order(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub setting: PauliString,
    pub value: f64,
    pub sum: f64,
    pub status: SessionStatus,
}

#[derive(Clone, Debug)]
pub struct Session {
    policy: Arc<DecisionPolicy>,
    log: Vec<Entry>,
    sum: f64,
    status: SessionStatus,
    measured: Vec<Option<f64>>,
    priority: Vec<f64>,
    cursor: Cursor,
    next: Option<PauliString>,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.log == other.log && self.status == other.status && self.next == other.next && self.sum == other.sum
    }
}

fn fidx(s: &PauliString) -> usize {
    s.full_index().expect("full-weight setting")
}

impl Session {
    pub fn new(policy: Arc<DecisionPolicy>) -> Self {
        let total = 3usize.pow(policy.n_qubits as u32);
        let cursor = match &policy.plan {
            Plan::Tree { .. } => Cursor::Node(0),
            Plan::Order(_) => Cursor::Order(0),
        };
        let mut s = Session {
            policy,
            log: Vec::new(),
            sum: 0.0,
            status: SessionStatus::Running,
            measured: vec![None; total],
            priority: vec![0.0; total],
            cursor,
            next: None,
        };
        s.next = s.compute_next();
        s
    }

    pub fn policy(&self) -> &Arc<DecisionPolicy> {
        &self.policy
    }

    pub fn n_qubits(&self) -> usize {
        self.policy.n_qubits
    }

    pub fn log(&self) -> &[Entry] {
        &self.log
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    /// ±Δ of the sum from the recorded standard errors; `None` if none were given.
    pub fn sum_stderr(&self) -> Option<f64> {
        if self.log.iter().all(|e| e.stderr.is_none()) {
            return None;
        }
        Some(propagated_error(&self.log.iter().map(|e| (e.value, e.stderr.unwrap_or(0.0))).collect::<Vec<_>>()))
    }

    /// Number of settings measured when the sum first crossed 1.
    pub fn detection_step(&self) -> Option<usize> {
        self.log.iter().position(|e| e.status == SessionStatus::Entangled).map(|i| i + 1)
    }

    pub fn value_of(&self, s: &PauliString) -> Option<f64> {
        s.full_index().and_then(|i| self.measured.get(i).copied().flatten())
    }

    pub fn next_setting(&self) -> Result<PauliString> {
        match (self.status, self.next) {
            (SessionStatus::Running, Some(s)) => Ok(s),
            (st, _) => Err(Error::SessionFinished(st.as_str().into())),
        }
    }

    /// Tree node behind the current recommendation, if the walk is still in the tree.
    pub fn current_node(&self) -> Option<usize> {
        match (self.status, self.cursor) {
            (SessionStatus::Running, Cursor::Node(i)) => Some(i),
            _ => None,
        }
    }

    fn compute_next(&self) -> Option<PauliString> {
        match (&self.policy.plan, self.cursor) {
            (Plan::Tree { tree, .. }, Cursor::Node(i)) => Some(tree.nodes()[i]),
            (_, Cursor::Order(pos)) => match &self.policy.plan {
                Plan::Order(order) => order[pos..].iter().find(|s| self.measured[fidx(s)].is_none()).copied(),
                _ => unreachable!(),
            },
            _ => {
                let n = self.policy.n_qubits;
                let best = (0..self.measured.len())
                    .filter(|&i| self.measured[i].is_none())
                    .min_by(|&a, &b| self.priority[a].total_cmp(&self.priority[b]).then(a.cmp(&b)))?;
                Some(PauliString::from_full_index(best, n))
            }
        }
    }

    fn check_value(value: f64, stderr: Option<f64>) -> Result<()> {
        if !value.is_finite() || value.abs() > 1.0 + VALUE_TOL {
            return Err(Error::ValueOutOfRange(value));
        }
        if let Some(e) = stderr {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::ValueOutOfRange(e));
            }
        }
        Ok(())
    }

    fn check_setting(&self, setting: &PauliString) -> Result<()> {
        if self.status != SessionStatus::Running {
            return Err(Error::SessionFinished(self.status.as_str().into()));
        }
        if setting.len() != self.policy.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.policy.n_qubits, got: setting.len() });
        }
        if !setting.is_full_weight() {
            return Err(Error::NotFullWeight(setting.to_string()));
        }
        if self.measured[fidx(setting)].is_some() {
            return Err(Error::DuplicateSetting(setting.to_string()));
        }
        Ok(())
    }

    /// Appends a measured value for the recommended setting.
    pub fn record(&mut self, setting: &PauliString, value: f64, stderr: Option<f64>) -> Result<&Entry> {
        self.check_setting(setting)?;
        Self::check_value(value, stderr)?;
        let expected = self.next.expect("running session has a recommendation");
        if *setting != expected {
            return Err(Error::OutOfOrder { expected: expected.to_string(), got: setting.to_string() });
        }
        let node = self.current_node();
        self.measured[fidx(setting)] = Some(value);
        self.sum += value * value;
        for (i, p) in self.priority.iter_mut().enumerate() {
            if self.measured[i].is_none() && setting.anticommutes_unchecked(&PauliString::from_full_index(i, setting.len())) {
                *p += value * value;
            }
        }
        self.advance(value);
        self.next = self.compute_next();
        self.status = if exceeds(self.sum) {
            SessionStatus::Entangled
        } else if self.next.is_none() {
            SessionStatus::Exhausted
        } else {
            SessionStatus::Running
        };
        self.log.push(Entry { setting: *setting, value, stderr, sum: self.sum, status: self.status, node });
        Ok(self.log.last().unwrap())
    }

    fn advance(&mut self, mut value: f64) {
        match (&self.policy.plan, self.cursor) {
            (Plan::Tree { tree, follow_other }, Cursor::Node(mut i)) => loop {
                let big = value.abs() >= self.policy.threshold;
                let (pref, other) = if big {
                    (tree.solid_child(i), tree.dashed_child(i))
                } else {
                    (tree.dashed_child(i), tree.solid_child(i))
                };
                match pref.or(if *follow_other { other } else { None }) {
                    None => {
                        self.cursor = Cursor::Fallback;
                        return;
                    }
                    Some(c) => match self.measured[fidx(&tree.nodes()[c])] {
                        Some(w) => {
                            i = c;
                            value = w;
                        }
                        None => {
                            self.cursor = Cursor::Node(c);
                            return;
                        }
                    },
                }
            },
            (_, Cursor::Order(pos)) => self.cursor = Cursor::Order(pos + 1),
            _ => {}
        }
    }

    /// The sum and status that recording `value` at `setting` would give. Never mutates.
    pub fn whatif(&self, setting: &PauliString, value: f64) -> Result<WhatIf> {
        self.check_setting(setting)?;
        Self::check_value(value, None)?;
        let sum = self.sum + value * value;
        let remaining = self.measured.iter().filter(|m| m.is_none()).count();
        let status = if exceeds(sum) {
            SessionStatus::Entangled
        } else if remaining == 1 {
            SessionStatus::Exhausted
        } else {
            SessionStatus::Running
        };
        Ok(WhatIf { setting: *setting, value, sum, status })
    }

    /// Records recommendations until the session ends, taking values from `measure`.
    pub fn run_with<F>(&mut self, mut measure: F) -> Result<()>
    where
        F: FnMut(&PauliString) -> Result<(f64, Option<f64>)>,
    {
        while self.status == SessionStatus::Running {
            let s = self.next_setting()?;
            let (v, e) = measure(&s)?;
            self.record(&s, v, e)?;
        }
        Ok(())
    }
}

/// Remaining settings ordered by P(s) = Σ T² over measured settings that
/// anticommute with s; ties alphabetical. For two qubits this is
/// P_ij = Σ_{k≠i} T²_kj + Σ_{l≠j} T²_il.
pub fn priorities(measured: &[(PauliString, f64)], remaining: &[PauliString]) -> Result<Vec<(PauliString, f64)>> {
    let mut out = Vec::with_capacity(remaining.len());
    for r in remaining {
        let mut p = 0.0;
        for (m, v) in measured {
            if r.anticommutes(m)? {
                p += v * v;
            }
        }
        out.push((*r, p));
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureMode {
    Exact,
    Shots(u64),
}

/// Closed-loop run: the policy picks, the state answers.
pub fn run_auto<R: Rng + ?Sized>(
    state: &QuantumState,
    policy: Arc<DecisionPolicy>,
    mode: MeasureMode,
    rng: &mut R,
) -> Result<Session> {
    if state.n_qubits() != policy.n_qubits {
        return Err(Error::DimensionMismatch { expected: policy.n_qubits, got: state.n_qubits() });
    }
    let mut session = Session::new(policy);
    session.run_with(|s| {
        let t = correlation(state, s)?;
        Ok(match mode {
            MeasureMode::Exact => (t, None),
            MeasureMode::Shots(m) => {
                let v = sample_from_value(t, m, rng);
                (v, Some(shot_stderr(v, m)))
            }
        })
    })?;
    Ok(session)
}

/// Random-order session for `state` in exact mode.
pub fn random_baseline(state: &QuantumState, rng_seed: u64) -> Result<Session> {
    let policy = Arc::new(DecisionPolicy::new(state.n_qubits(), None, Strategy::Random { rng_seed })?);
    run_auto(state, policy, MeasureMode::Exact, &mut ChaCha8Rng::seed_from_u64(0))
}

/// Correlation matrices of maximally entangled states with Schmidt vectors
/// along x, y or z: the 24 signed permutation matrices of determinant −1.
pub fn axis_aligned_maximally_entangled() -> Vec<[[f64; 3]; 3]> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..8u32 {
            let mut m = [[0.0; 3]; 3];
            for (i, &j) in p.iter().enumerate() {
                m[i][j] = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
            }
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            if det < 0.0 {
                out.push(m);
            }
        }
    }
    out
}

/// Marks tree nodes visited while detecting each axis-aligned maximally
/// entangled state, together with how many of those states needed the
/// priority rule after leaving the tree.
pub fn axis_aligned_subtree(policy: Arc<DecisionPolicy>) -> Result<(Vec<bool>, usize)> {
    let tree = policy.tree().ok_or_else(|| Error::Config("policy has no tree".into()))?;
    if policy.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: policy.n_qubits() });
    }
    let mut flags = vec![false; tree.len()];
    let mut left_tree = 0;
    for m in axis_aligned_maximally_entangled() {
        let mut s = Session::new(policy.clone());
        s.run_with(|p| {
            let (i, j) = (p.axis(0).local_index().unwrap(), p.axis(1).local_index().unwrap());
            Ok((m[i][j], None))
        })?;
        if s.log().iter().any(|e| e.node.is_none()) {
            left_tree += 1;
        }
        for e in s.log() {
            if let Some(i) = e.node {
                flags[i] = true;
            }
        }
    }
    Ok((flags, left_tree))
}
