//! Canonical forms standing in for structural congruence.
//!
//! A normalised system is a set of restricted channel names over a sorted
//! list of atoms. Parallel composition is flattened (also inside monitor
//! blocks, so every block holds one sequential monitor), `stop` is dropped,
//! restrictions are hoisted to the top, unused restrictions are discarded and
//! all bound names are renamed canonically.

use crate::name::{fresh_name, Name};
use crate::syntax::{Proc, System};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// A process whose head is a prefix, conditional or replication.
    Proc { loc: Name, body: Proc },
    /// A sequential monitor block hosted at `loc` with context `(ctx_loc, ctx_idx)`.
    Monitor { loc: Name, ctx_loc: Name, ctx_idx: Name, body: Proc },
    Trace { loc: Name, chan: Name, args: Vec<Name>, ts: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormSystem {
    pub bound: Vec<Name>,
    pub atoms: Vec<Atom>,
    /// Location of a dropped `stop` when nothing else is left, kept for printing.
    pub residue: Option<Name>,
}

const MAX_TIE_ORDERINGS: usize = 720;
const VAR_HINT: &str = "x";
const CHAN_HINT: &str = "ch";

impl Atom {
    pub fn loc(&self) -> &Name {
        match self {
            Atom::Proc { loc, .. } | Atom::Monitor { loc, .. } | Atom::Trace { loc, .. } => loc,
        }
    }

    pub fn to_system(&self) -> System {
        match self {
            Atom::Proc { loc, body } => System::located(loc.clone(), body.clone()),
            Atom::Monitor { loc, ctx_loc, ctx_idx, body } => {
                System::located(loc.clone(), Proc::monitor(body.clone(), ctx_loc.clone(), ctx_idx.clone()))
            }
            Atom::Trace { loc, chan, args, ts } => {
                System::located(loc.clone(), Proc::Trace { chan: chan.clone(), args: args.clone(), ts: *ts })
            }
        }
    }

    fn free_names(&self) -> BTreeSet<Name> {
        let mut out = match self {
            Atom::Proc { body, .. } => body.free_names(),
            Atom::Monitor { ctx_loc, ctx_idx, body, .. } => {
                let mut s = body.free_names();
                s.extend([ctx_loc.clone(), ctx_idx.clone()].into_iter().filter(Name::is_ident));
                s
            }
            Atom::Trace { chan, args, .. } => {
                let mut s: BTreeSet<Name> = args.iter().filter(|a| a.is_ident()).cloned().collect();
                s.insert(chan.clone());
                s
            }
        };
        out.insert(self.loc().clone());
        out
    }

    fn rename(&self, map: &BTreeMap<Name, Name>) -> Atom {
        let r = |n: &Name| map.get(n).cloned().unwrap_or_else(|| n.clone());
        match self {
            Atom::Proc { loc, body } => Atom::Proc { loc: r(loc), body: body.subst_map(map) },
            Atom::Monitor { loc, ctx_loc, ctx_idx, body } => Atom::Monitor {
                loc: r(loc),
                ctx_loc: r(ctx_loc),
                ctx_idx: r(ctx_idx),
                body: body.subst_map(map),
            },
            Atom::Trace { loc, chan, args, ts } => {
                Atom::Trace { loc: r(loc), chan: r(chan), args: args.iter().map(r).collect(), ts: *ts }
            }
        }
    }
}

/// Every name in a non-binding position, in traversal order with repeats.
fn visit_names(p: &Proc, f: &mut dyn FnMut(&Name)) {
    match p {
        Proc::Stop | Proc::Ok | Proc::Fail => {}
        Proc::Out { subject, args, cont } => {
            f(subject);
            args.iter().for_each(&mut *f);
            visit_names(cont, f);
        }
        Proc::In { subject, cont, .. } | Proc::Query { subject, cont, .. } => {
            f(subject);
            visit_names(cont, f);
        }
        Proc::New { body, .. } | Proc::Repeat { body, .. } => visit_names(body, f),
        Proc::GetI { cont, .. } => visit_names(cont, f),
        Proc::If { lhs, rhs, then, els } => {
            f(lhs);
            f(rhs);
            visit_names(then, f);
            visit_names(els, f);
        }
        Proc::Par(a, b) => {
            visit_names(a, f);
            visit_names(b, f);
        }
        Proc::Monitor { body, ctx_loc, ctx_idx } => {
            f(ctx_loc);
            f(ctx_idx);
            visit_names(body, f);
        }
        Proc::Trace { chan, args, .. } => {
            f(chan);
            args.iter().for_each(f);
        }
        Proc::Sync { loc, cont } | Proc::Go { loc, cont } => {
            f(loc);
            visit_names(cont, f);
        }
        Proc::SetI { loc, idx, cont } => {
            f(loc);
            f(idx);
            visit_names(cont, f);
        }
    }
}

/// Positions in `temps` of every occurrence of a temp name in `a`.
fn temp_occurrences(a: &Atom, temps: &[Name]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut f = |n: &Name| {
        if let Ok(i) = temps.binary_search(n) {
            out.push(i);
        }
    };
    match a {
        Atom::Proc { loc, body } => {
            f(loc);
            visit_names(body, &mut f);
        }
        Atom::Monitor { loc, ctx_loc, ctx_idx, body } => {
            f(loc);
            f(ctx_loc);
            f(ctx_idx);
            visit_names(body, &mut f);
        }
        Atom::Trace { loc, chan, args, .. } => {
            f(loc);
            f(chan);
            args.iter().for_each(f);
        }
    }
    out
}

/// An un-normalised component handed to [`NormSystem::build`].
#[derive(Debug, Clone)]
pub enum Piece {
    Proc { loc: Name, body: Proc },
    Monitor { loc: Name, ctx_loc: Name, ctx_idx: Name, body: Proc },
    Atom(Atom),
}

struct Flattener {
    next_temp: usize,
    bound: Vec<Name>,
    atoms: Vec<Atom>,
    stops: Vec<Name>,
}

impl Flattener {
    fn temp(&mut self) -> Name {
        self.next_temp += 1;
        // Not a valid identifier, so it can never clash with a user name.
        Name::id(&format!("\u{1}{}", self.next_temp))
    }

    fn bind(&mut self, chan: &Name, body: &Proc) -> Proc {
        let t = self.temp();
        self.bound.push(t.clone());
        body.subst_map(&BTreeMap::from([(chan.clone(), t)]))
    }

    fn system(&mut self, s: &System) {
        match s {
            System::Located { loc, body } => self.process(loc, body),
            System::Par(a, b) => {
                self.system(a);
                self.system(b);
            }
            System::New { chan, body } => {
                let t = self.temp();
                self.bound.push(t.clone());
                let renamed = rename_system(body, chan, &t);
                self.system(&renamed);
            }
        }
    }

    fn process(&mut self, loc: &Name, p: &Proc) {
        match p {
            Proc::Stop => self.stops.push(loc.clone()),
            Proc::Par(a, b) => {
                self.process(loc, a);
                self.process(loc, b);
            }
            Proc::New { chan, body } => {
                let body = self.bind(chan, body);
                self.process(loc, &body);
            }
            Proc::Monitor { body, ctx_loc, ctx_idx } => self.monitor(loc, ctx_loc, ctx_idx, body),
            Proc::Trace { chan, args, ts } => {
                self.atoms.push(Atom::Trace { loc: loc.clone(), chan: chan.clone(), args: args.clone(), ts: *ts })
            }
            other => self.atoms.push(Atom::Proc { loc: loc.clone(), body: other.clone() }),
        }
    }

    fn monitor(&mut self, loc: &Name, ctx_loc: &Name, ctx_idx: &Name, p: &Proc) {
        match p {
            Proc::Stop => self.stops.push(loc.clone()),
            Proc::Par(a, b) => {
                self.monitor(loc, ctx_loc, ctx_idx, a);
                self.monitor(loc, ctx_loc, ctx_idx, b);
            }
            Proc::New { chan, body } => {
                let body = self.bind(chan, body);
                self.monitor(loc, ctx_loc, ctx_idx, &body);
            }
            Proc::Monitor { .. } | Proc::Trace { .. } => self.process(loc, p),
            other => self.atoms.push(Atom::Monitor {
                loc: loc.clone(),
                ctx_loc: ctx_loc.clone(),
                ctx_idx: ctx_idx.clone(),
                body: other.clone(),
            }),
        }
    }
}

fn rename_system(s: &System, from: &Name, to: &Name) -> System {
    let map = BTreeMap::from([(from.clone(), to.clone())]);
    rename_system_map(s, &map)
}

fn rename_system_map(s: &System, map: &BTreeMap<Name, Name>) -> System {
    match s {
        System::Located { loc, body } => System::Located {
            loc: map.get(loc).cloned().unwrap_or_else(|| loc.clone()),
            body: body.subst_map(map),
        },
        System::Par(a, b) => System::par(rename_system_map(a, map), rename_system_map(b, map)),
        System::New { chan, body } => {
            if map.contains_key(chan) {
                let mut inner = map.clone();
                inner.remove(chan);
                System::new_chan(chan.clone(), rename_system_map(body, &inner))
            } else {
                // Temp names are unique and never valid identifiers, so no capture.
                System::new_chan(chan.clone(), rename_system_map(body, map))
            }
        }
    }
}

/// Renames every binder inside `p` to the canonical variable sequence.
fn canon_binders(p: &Proc, depth: usize, vars: &mut VarSupply) -> Proc {
    let under = |names: &[Name], cont: &Proc, depth: usize, vars: &mut VarSupply| -> (Vec<Name>, Proc) {
        let fresh: Vec<Name> = (0..names.len()).map(|i| vars.get(depth + i)).collect();
        let map: BTreeMap<Name, Name> =
            names.iter().cloned().zip(fresh.iter().cloned()).filter(|(a, b)| a != b).collect();
        let renamed = cont.subst_map(&map);
        (fresh, canon_binders(&renamed, depth + names.len(), vars))
    };
    let b = |x: &Proc, vars: &mut VarSupply| Box::new(canon_binders(x, depth, vars));
    match p {
        Proc::Stop | Proc::Ok | Proc::Fail | Proc::Trace { .. } => p.clone(),
        Proc::Out { subject, args, cont } => {
            Proc::Out { subject: subject.clone(), args: args.clone(), cont: b(cont, vars) }
        }
        Proc::In { subject, params, cont } => {
            let (params, cont) = under(params, cont, depth, vars);
            Proc::In { subject: subject.clone(), params, cont: Box::new(cont) }
        }
        Proc::Query { subject, params, cont } => {
            let (params, cont) = under(params, cont, depth, vars);
            Proc::Query { subject: subject.clone(), params, cont: Box::new(cont) }
        }
        Proc::New { chan, body } => {
            let (mut c, body) = under(std::slice::from_ref(chan), body, depth, vars);
            Proc::New { chan: c.remove(0), body: Box::new(body) }
        }
        Proc::GetI { loc_var, idx_var, cont } => {
            let (mut v, cont) = under(&[loc_var.clone(), idx_var.clone()], cont, depth, vars);
            let idx_var = v.pop().expect("two binders");
            let loc_var = v.pop().expect("two binders");
            Proc::GetI { loc_var, idx_var, cont: Box::new(cont) }
        }
        Proc::If { lhs, rhs, then, els } => Proc::If {
            lhs: lhs.clone(),
            rhs: rhs.clone(),
            then: b(then, vars),
            els: b(els, vars),
        },
        Proc::Par(x, y) => Proc::Par(b(x, vars), b(y, vars)),
        Proc::Repeat { body, fuel } => Proc::Repeat { body: b(body, vars), fuel: *fuel },
        Proc::Monitor { body, ctx_loc, ctx_idx } => {
            Proc::Monitor { body: b(body, vars), ctx_loc: ctx_loc.clone(), ctx_idx: ctx_idx.clone() }
        }
        Proc::Sync { loc, cont } => Proc::Sync { loc: loc.clone(), cont: b(cont, vars) },
        Proc::Go { loc, cont } => Proc::Go { loc: loc.clone(), cont: b(cont, vars) },
        Proc::SetI { loc, idx, cont } => {
            Proc::SetI { loc: loc.clone(), idx: idx.clone(), cont: b(cont, vars) }
        }
    }
}

/// Canonical variable names `x, x_1, x_2, ...` skipping free names.
struct VarSupply {
    avoid: BTreeSet<Name>,
    names: Vec<Name>,
}

impl VarSupply {
    fn get(&mut self, i: usize) -> Name {
        while self.names.len() <= i {
            let n = fresh_name(VAR_HINT, &self.avoid);
            self.avoid.insert(n.clone());
            self.names.push(n);
        }
        self.names[i].clone()
    }
}

fn canon_atom(a: &Atom, vars: &mut VarSupply) -> Atom {
    match a {
        Atom::Proc { loc, body } => Atom::Proc { loc: loc.clone(), body: canon_binders(body, 0, vars) },
        Atom::Monitor { loc, ctx_loc, ctx_idx, body } => Atom::Monitor {
            loc: loc.clone(),
            ctx_loc: ctx_loc.clone(),
            ctx_idx: ctx_idx.clone(),
            body: canon_binders(body, 0, vars),
        },
        Atom::Trace { .. } => a.clone(),
    }
}

fn is_temp(n: &Name) -> bool {
    n.as_ident().is_some_and(|s| s.starts_with('\u{1}'))
}

/// Distinct orderings of each group, where equal atoms are interchangeable.
/// Groups whose atoms carry no bound name keep their sorted order.
fn orderings_within_groups(groups: &[Vec<usize>], atoms: &[Atom], bound: &BTreeSet<Name>) -> Vec<Vec<usize>> {
    let mut orders: Vec<Vec<usize>> = vec![Vec::new()];
    for g in groups {
        let binds = g.len() > 1 && g.iter().any(|&i| atoms[i].free_names().iter().any(|n| bound.contains(n)));
        let perms = if binds { multiset_permutations(g, atoms) } else { vec![g.clone()] };
        let mut next = Vec::with_capacity(orders.len() * perms.len());
        for o in &orders {
            for p in &perms {
                let mut v = o.clone();
                v.extend_from_slice(p);
                next.push(v);
            }
        }
        orders = next;
    }
    orders
}

/// Classes of equal atoms inside a group, as index lists.
fn classes(g: &[usize], atoms: &[Atom]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in g {
        match out.iter_mut().find(|c| atoms[c[0]] == atoms[i]) {
            Some(c) => c.push(i),
            None => out.push(vec![i]),
        }
    }
    out
}

fn multiset_permutations(g: &[usize], atoms: &[Atom]) -> Vec<Vec<usize>> {
    fn go(left: &mut [usize], cur: &mut Vec<usize>, total: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == total {
            out.push(cur.clone());
            return;
        }
        for c in 0..left.len() {
            if left[c] > 0 {
                left[c] -= 1;
                cur.push(c);
                go(left, cur, total, out);
                cur.pop();
                left[c] += 1;
            }
        }
    }
    let cls = classes(g, atoms);
    let mut left: Vec<usize> = cls.iter().map(Vec::len).collect();
    let mut seqs = Vec::new();
    go(&mut left, &mut Vec::new(), g.len(), &mut seqs);
    seqs.into_iter()
        .map(|seq| {
            let mut next = vec![0usize; cls.len()];
            seq.into_iter()
                .map(|c| {
                    next[c] += 1;
                    cls[c][next[c] - 1]
                })
                .collect()
        })
        .collect()
}

fn group_orderings(g: &[usize], atoms: &[Atom], bound: &BTreeSet<Name>) -> usize {
    if g.len() <= 1 || !g.iter().any(|&i| atoms[i].free_names().iter().any(|n| bound.contains(n))) {
        return 1;
    }
    if g.len() > 12 {
        return usize::MAX;
    }
    let fact = |k: usize| (1..=k).product::<usize>();
    let cls = classes(g, atoms);
    cls.iter().fold(fact(g.len()), |acc, c| acc / fact(c.len()))
}

impl NormSystem {
    pub fn from_system(s: &System) -> NormSystem {
        let mut fl = Flattener { next_temp: 0, bound: Vec::new(), atoms: Vec::new(), stops: Vec::new() };
        fl.system(s);
        Self::finish(fl)
    }

    /// Re-normalises after a transition rewrote some components.
    pub fn build(bound: &[Name], pieces: Vec<Piece>) -> NormSystem {
        let mut fl = Flattener { next_temp: 0, bound: Vec::new(), atoms: Vec::new(), stops: Vec::new() };
        let mut map = BTreeMap::new();
        for b in bound {
            let t = fl.temp();
            fl.bound.push(t.clone());
            map.insert(b.clone(), t);
        }
        for piece in pieces {
            match piece {
                Piece::Proc { loc, body } => fl.process(&loc, &body.subst_map(&map)),
                Piece::Monitor { loc, ctx_loc, ctx_idx, body } => {
                    let r = |n: Name| map.get(&n).cloned().unwrap_or(n);
                    fl.monitor(&loc, &r(ctx_loc), &r(ctx_idx), &body.subst_map(&map))
                }
                Piece::Atom(a) => fl.atoms.push(a.rename(&map)),
            }
        }
        Self::finish(fl)
    }

    fn finish(fl: Flattener) -> NormSystem {
        let Flattener { bound, atoms, stops, .. } = fl;
        let mut free: BTreeSet<Name> = BTreeSet::new();
        for a in &atoms {
            free.extend(a.free_names().into_iter().filter(|n| !is_temp(n)));
        }
        let mut vars = VarSupply { avoid: free.clone(), names: Vec::new() };
        let atoms: Vec<Atom> = atoms.iter().map(|a| canon_atom(a, &mut vars)).collect();

        let mut used_temps: BTreeSet<Name> = BTreeSet::new();
        for a in &atoms {
            used_temps.extend(a.free_names().into_iter().filter(|n| bound.contains(n)));
        }

        let mut avoid = free;
        avoid.extend(vars.names.iter().cloned());

        let placeholder = Name::id("\u{1}");
        let to_placeholder: BTreeMap<Name, Name> =
            used_temps.iter().map(|t| (t.clone(), placeholder.clone())).collect();
        let mut keyed: Vec<(Atom, usize)> =
            atoms.iter().enumerate().map(|(i, a)| (a.rename(&to_placeholder), i)).collect();
        keyed.sort();

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, (key, idx)) in keyed.iter().enumerate() {
            if i > 0 && keyed[i - 1].0 == *key {
                groups.last_mut().expect("group").push(*idx);
            } else {
                groups.push(vec![*idx]);
            }
        }
        let orderings: Option<usize> = groups
            .iter()
            .map(|g| group_orderings(g, &atoms, &used_temps))
            .try_fold(1usize, |acc, f| acc.checked_mul(f).filter(|v| *v <= MAX_TIE_ORDERINGS));
        let candidates = if used_temps.is_empty() || orderings.is_none() {
            vec![groups.concat()]
        } else {
            orderings_within_groups(&groups, &atoms, &used_temps)
        };

        // Each atom is fixed by its group and the ranks of its temp occurrences,
        // so orderings are compared on those signatures alone.
        let temps: Vec<Name> = used_temps.iter().cloned().collect();
        let occ: Vec<Vec<usize>> = atoms.iter().map(|a| temp_occurrences(a, &temps)).collect();
        let mut group_of = vec![0usize; atoms.len()];
        for (gi, g) in groups.iter().enumerate() {
            for &i in g {
                group_of[i] = gi;
            }
        }
        let mut best: Option<(Vec<(usize, Vec<usize>)>, Vec<usize>)> = None;
        for order in candidates {
            let mut rank = vec![usize::MAX; temps.len()];
            let mut next = 0;
            for &i in &order {
                for &t in &occ[i] {
                    if rank[t] == usize::MAX {
                        rank[t] = next;
                        next += 1;
                    }
                }
            }
            let mut sig: Vec<(usize, Vec<usize>)> =
                order.iter().map(|&i| (group_of[i], occ[i].iter().map(|&t| rank[t]).collect())).collect();
            sig.sort();
            if best.as_ref().map_or(true, |(b, _)| sig < *b) {
                best = Some((sig, rank));
            }
        }
        let mut supply = avoid;
        let fresh: Vec<Name> = (0..temps.len())
            .map(|_| {
                let n = fresh_name(CHAN_HINT, &supply);
                supply.insert(n.clone());
                n
            })
            .collect();
        let rank = best.map(|(_, r)| r).unwrap_or_default();
        let map: BTreeMap<Name, Name> = temps.iter().cloned().zip(rank.iter().map(|&r| fresh[r].clone())).collect();
        let mut renamed: Vec<Atom> = atoms.iter().map(|a| a.rename(&map)).collect();
        renamed.sort();
        let (atoms, mut bound) = (renamed, fresh);
        bound.sort();
        let residue = if atoms.is_empty() { stops.into_iter().min() } else { None };
        NormSystem { bound, atoms, residue }
    }

    pub fn to_system(&self) -> Option<System> {
        let body = System::par_all(self.atoms.iter().map(Atom::to_system).collect())
            .or_else(|| self.residue.clone().map(|l| System::located(l, Proc::Stop)))?;
        Some(System::new_chans(&self.bound, body))
    }

    pub fn free_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            out.extend(a.free_names());
        }
        for b in &self.bound {
            out.remove(b);
        }
        out
    }

    /// Locations hosting atoms or targeted by a monitoring context.
    pub fn locations(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            out.insert(a.loc().clone());
            if let Atom::Monitor { ctx_loc, .. } = a {
                if ctx_loc.is_ident() {
                    out.insert(ctx_loc.clone());
                }
            }
        }
        out.extend(self.residue.iter().cloned());
        out
    }

    pub fn traces(&self) -> impl Iterator<Item = (&Name, &Name, &[Name], u64)> {
        self.atoms.iter().filter_map(|a| match a {
            Atom::Trace { loc, chan, args, ts } => Some((loc, chan, args.as_slice(), *ts)),
            _ => None,
        })
    }
}

impl fmt::Display for NormSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_system() {
            Some(s) => write!(f, "{s}"),
            None => f.write_str("0"),
        }
    }
}

impl Serialize for NormSystem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// Normal form of a system, converted back to a term.
pub fn normalize(s: &System) -> System {
    let n = NormSystem::from_system(s);
    n.to_system().unwrap_or_else(|| s.clone())
}
