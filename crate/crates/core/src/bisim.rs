//! Weak bisimilarity of finite filtered LTSs.
//!
//! Both LTSs are placed side by side and the coarsest weak bisimulation of
//! the union is computed by signature refinement: internal cycles are
//! collapsed first, then each state is split by the set of
//! `(label, block)` pairs it can reach weakly, until no block splits.

use crate::engine::StateId;
use crate::filter::{AbstractAction, FilteredLts};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BisimVerdict {
    Bisimilar,
    Distinguished,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisimResult {
    pub verdict: BisimVerdict,
    /// Classes of the greatest weak bisimulation that meet both sides, as
    /// `(states of the first LTS, states of the second)`. Present unless distinguished.
    pub witness: Option<Vec<(Vec<StateId>, Vec<StateId>)>>,
    /// A weak trace playable on exactly one side, when the two differ in traces.
    pub trace: Option<Vec<AbstractAction>>,
}

impl BisimResult {
    /// The witness as an explicit relation between the two state spaces.
    pub fn witness_pairs(&self) -> Vec<(StateId, StateId)> {
        let mut out = Vec::new();
        for (xs, ys) in self.witness.iter().flatten() {
            for &x in xs {
                for &y in ys {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let witness = self.witness.as_ref().map(|classes| {
            classes.iter().map(|(a, b)| serde_json::json!({ "left": a, "right": b })).collect::<Vec<_>>()
        });
        let trace = self.trace.as_ref().map(|t| t.iter().map(|a| a.to_string()).collect::<Vec<_>>());
        serde_json::json!({ "verdict": self.verdict, "witness": witness, "trace": trace })
    }
}

const TAU: usize = 0;

/// Edge lists of an LTS with interned labels; label 0 is the silent action.
struct Labelled {
    size: usize,
    edges: Vec<Vec<(usize, usize)>>,
}

struct Interner {
    labels: Vec<AbstractAction>,
    index: HashMap<AbstractAction, usize>,
}

impl Interner {
    fn new() -> Interner {
        let tau = AbstractAction::tau();
        Interner { labels: vec![tau.clone()], index: HashMap::from([(tau, TAU)]) }
    }

    fn get(&mut self, a: &AbstractAction) -> usize {
        if let Some(&i) = self.index.get(a) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(a.clone());
        self.index.insert(a.clone(), i);
        i
    }
}

fn union(a: &FilteredLts, b: &FilteredLts, names: &mut Interner) -> Labelled {
    let size = a.len() + b.len();
    let mut edges = vec![Vec::new(); size];
    for (s, act, t) in &a.edges {
        edges[*s].push((names.get(act), *t));
    }
    for (s, act, t) in &b.edges {
        edges[a.len() + *s].push((names.get(act), a.len() + *t));
    }
    Labelled { size, edges }
}

/// Strongly connected components of the silent-step graph, numbered so that
/// every silent edge leads to a component with a smaller or equal number.
fn tau_sccs(l: &Labelled) -> (Vec<usize>, usize) {
    let n = l.size;
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut count = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            let succ = &l.edges[v];
            let mut advanced = false;
            while *pos < succ.len() {
                let (lab, w) = succ[*pos];
                *pos += 1;
                if lab != TAU {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp[w] = count;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    (comp, count)
}

fn merge_into(dst: &mut Vec<u32>, src: &[u32]) {
    if src.is_empty() {
        return;
    }
    let mut out = Vec::with_capacity(dst.len() + src.len());
    let (mut i, mut j) = (0, 0);
    while i < dst.len() && j < src.len() {
        match dst[i].cmp(&src[j]) {
            std::cmp::Ordering::Less => {
                out.push(dst[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(src[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(dst[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&dst[i..]);
    out.extend_from_slice(&src[j..]);
    *dst = out;
}

type Signature = (u32, Vec<u32>, Vec<(usize, Vec<u32>)>);

/// Block number per state of the coarsest weak bisimulation.
fn partition(l: &Labelled) -> Vec<u32> {
    let (comp, ncomp) = tau_sccs(l);
    // Condensed edges: silent edges between components, visible edges out of components.
    let mut tau_succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncomp];
    let mut vis: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ncomp];
    for s in 0..l.size {
        for &(lab, t) in &l.edges[s] {
            if lab == TAU {
                if comp[s] != comp[t] {
                    tau_succ[comp[s]].insert(comp[t]);
                }
            } else {
                vis[comp[s]].push((lab, comp[t]));
            }
        }
    }
    for v in &mut vis {
        v.sort_unstable();
        v.dedup();
    }

    let mut block = vec![0u32; ncomp];
    let mut blocks = 1usize;
    loop {
        // Tarjan numbers components in reverse topological order, so
        // ascending order visits silent successors first.
        let mut wtau: Vec<Vec<u32>> = vec![Vec::new(); ncomp];
        for c in 0..ncomp {
            let mut set = vec![block[c]];
            for &d in &tau_succ[c] {
                merge_into(&mut set, &wtau[d]);
            }
            wtau[c] = set;
        }
        let mut weak: Vec<BTreeMap<usize, Vec<u32>>> = vec![BTreeMap::new(); ncomp];
        for c in 0..ncomp {
            let mut map: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
            for &(lab, d) in &vis[c] {
                merge_into(map.entry(lab).or_default(), &wtau[d]);
            }
            for &d in &tau_succ[c] {
                for (lab, set) in &weak[d] {
                    merge_into(map.entry(*lab).or_default(), set);
                }
            }
            weak[c] = map;
        }
        let mut ids: HashMap<Signature, u32> = HashMap::new();
        let mut next = vec![0u32; ncomp];
        for c in 0..ncomp {
            let sig: Signature = (block[c], wtau[c].clone(), weak[c].iter().map(|(k, v)| (*k, v.clone())).collect());
            let fresh = ids.len() as u32;
            next[c] = *ids.entry(sig).or_insert(fresh);
        }
        let count = ids.len();
        block = next;
        if count == blocks {
            break;
        }
        blocks = count;
    }
    (0..l.size).map(|s| block[comp[s]]).collect()
}

/// Decides `a ≈ b` from their initial states.
pub fn check_weak_bisim(a: &FilteredLts, b: &FilteredLts) -> BisimResult {
    let mut names = Interner::new();
    let l = union(a, b, &mut names);
    let block = partition(&l);
    if block[a.initial] != block[a.len() + b.initial] {
        return BisimResult {
            verdict: BisimVerdict::Distinguished,
            witness: None,
            trace: distinguishing_trace(a, b, DISTINGUISH_CAP),
        };
    }
    let mut classes: BTreeMap<u32, (Vec<StateId>, Vec<StateId>)> = BTreeMap::new();
    for s in 0..a.len() {
        classes.entry(block[s]).or_default().0.push(s);
    }
    for s in 0..b.len() {
        classes.entry(block[a.len() + s]).or_default().1.push(s);
    }
    let witness: Vec<(Vec<StateId>, Vec<StateId>)> =
        classes.into_values().filter(|(x, y)| !x.is_empty() && !y.is_empty()).collect();
    let verdict = if a.truncated || b.truncated { BisimVerdict::Inconclusive } else { BisimVerdict::Bisimilar };
    BisimResult { verdict, witness: Some(witness), trace: None }
}

const DISTINGUISH_CAP: usize = 200_000;

fn tau_closure(l: &FilteredLts, from: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    let mut seen = from.clone();
    let mut queue: VecDeque<StateId> = from.iter().copied().collect();
    let adj = adjacency(l);
    while let Some(s) = queue.pop_front() {
        for (a, t) in &adj[s] {
            if a.is_tau() && seen.insert(*t) {
                queue.push_back(*t);
            }
        }
    }
    seen
}

fn adjacency(l: &FilteredLts) -> Vec<Vec<(&AbstractAction, StateId)>> {
    let mut adj = vec![Vec::new(); l.len()];
    for (s, a, t) in &l.edges {
        adj[*s].push((a, *t));
    }
    adj
}

/// Shortest weak trace accepted by exactly one side, searching at most
/// `cap` subset pairs.
pub fn distinguishing_trace(a: &FilteredLts, b: &FilteredLts, cap: usize) -> Option<Vec<AbstractAction>> {
    let adj_a = adjacency(a);
    let adj_b = adjacency(b);
    let close = |adj: &[Vec<(&AbstractAction, StateId)>], set: BTreeSet<StateId>| {
        let mut seen = set.clone();
        let mut queue: VecDeque<StateId> = set.into_iter().collect();
        while let Some(s) = queue.pop_front() {
            for (act, t) in &adj[s] {
                if act.is_tau() && seen.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        seen
    };
    let post = |adj: &[Vec<(&AbstractAction, StateId)>], set: &BTreeSet<StateId>, lab: &AbstractAction| {
        let mut out = BTreeSet::new();
        for &s in set {
            for (act, t) in &adj[s] {
                if *act == lab {
                    out.insert(*t);
                }
            }
        }
        out
    };
    let start = (close(&adj_a, BTreeSet::from([a.initial])), close(&adj_b, BTreeSet::from([b.initial])));
    let mut seen: HashSet<(BTreeSet<StateId>, BTreeSet<StateId>)> = HashSet::new();
    let mut queue: VecDeque<((BTreeSet<StateId>, BTreeSet<StateId>), Vec<AbstractAction>)> = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back((start, Vec::new()));
    while let Some(((sa, sb), path)) = queue.pop_front() {
        let mut labels: BTreeSet<&AbstractAction> = BTreeSet::new();
        for &s in &sa {
            labels.extend(adj_a[s].iter().map(|(x, _)| *x).filter(|x| !x.is_tau()));
        }
        for &s in &sb {
            labels.extend(adj_b[s].iter().map(|(x, _)| *x).filter(|x| !x.is_tau()));
        }
        for lab in labels {
            let na = close(&adj_a, post(&adj_a, &sa, lab));
            let nb = close(&adj_b, post(&adj_b, &sb, lab));
            let mut p = path.clone();
            p.push(lab.clone());
            if na.is_empty() != nb.is_empty() {
                return Some(p);
            }
            if na.is_empty() {
                continue;
            }
            let key = (na, nb);
            if !seen.contains(&key) {
                if seen.len() >= cap {
                    return None;
                }
                seen.insert(key.clone());
                queue.push_back((key, p));
            }
        }
    }
    None
}

/// Whether `trace` can be played weakly from the initial state of `l`.
pub fn accepts_weak_trace(l: &FilteredLts, trace: &[AbstractAction]) -> bool {
    let adj = adjacency(l);
    let mut cur = tau_closure(l, &BTreeSet::from([l.initial]));
    for lab in trace {
        let mut next = BTreeSet::new();
        for &s in &cur {
            for (act, t) in &adj[s] {
                if *act == lab {
                    next.insert(*t);
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        cur = tau_closure(l, &next);
    }
    true
}

/// The weak transition relation: `s ⇒τ̂ t` for every silent path (including
/// the empty one) and `s ⇒a t` for `τ* a τ*`.
pub fn weak_closure(l: &FilteredLts) -> FilteredLts {
    let adj = adjacency(l);
    let closures: Vec<BTreeSet<StateId>> = (0..l.len()).map(|s| tau_closure(l, &BTreeSet::from([s]))).collect();
    let mut edges = Vec::new();
    for s in 0..l.len() {
        for &t in &closures[s] {
            edges.push((s, AbstractAction::tau(), t));
            for (act, u) in &adj[t] {
                if !act.is_tau() {
                    for &w in &closures[*u] {
                        edges.push((s, (*act).clone(), w));
                    }
                }
            }
        }
    }
    let mut out = FilteredLts::from_edges(l.len(), edges, l.initial);
    out.states = l.states.clone();
    out.truncated = l.truncated;
    out
}

/// Checks the weak transfer property of `pairs` directly: every strong move
/// of one side is answered by a weak move of the other into a related pair.
pub fn verify_witness(a: &FilteredLts, b: &FilteredLts, pairs: &[(StateId, StateId)]) -> bool {
    let rel: BTreeSet<(StateId, StateId)> = pairs.iter().copied().collect();
    if !rel.contains(&(a.initial, b.initial)) {
        return false;
    }
    let weak = |l: &FilteredLts| {
        let mut m: BTreeMap<(StateId, AbstractAction), BTreeSet<StateId>> = BTreeMap::new();
        for (s, act, t) in weak_closure(l).edges {
            m.entry((s, act)).or_default().insert(t);
        }
        m
    };
    let (wa, wb) = (weak(a), weak(b));
    let (adj_a, adj_b) = (adjacency(a), adjacency(b));
    let empty = BTreeSet::new();
    for &(x, y) in &rel {
        for (act, x2) in &adj_a[x] {
            let answers = wb.get(&(y, (*act).clone())).unwrap_or(&empty);
            if !answers.iter().any(|y2| rel.contains(&(*x2, *y2))) {
                return false;
            }
        }
        for (act, y2) in &adj_b[y] {
            let answers = wa.get(&(x, (*act).clone())).unwrap_or(&empty);
            if !answers.iter().any(|x2| rel.contains(&(*x2, *y2))) {
                return false;
            }
        }
    }
    true
}
