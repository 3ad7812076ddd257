//! Compilation of contracts into monitor systems.
//!
//! Every sub-contract is compiled against a start channel, on which it
//! receives the monitoring context from which to look for a match, and a
//! match channel, on which it reports the context just past each match.

use crate::engine::ClockMap;
use crate::name::{fresh_name, Name};
use crate::syntax::{Contract, Proc, System};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("nested migrating monitors need a sequence of basic events")]
    NestedShape,
    #[error("placement key `{0}` does not name a star or choice node")]
    UnknownNode(String),
}

/// Initial index given to the dummy contexts of compiled blocks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CtxInit {
    /// Index 1 everywhere.
    #[default]
    Literal,
    /// The clock of the block's own location (missing locations read 0).
    Clock(ClockMap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    /// Host of orchestrated and (initially) migrating monitors.
    pub central: Name,
    /// Location emitting the initial start signal in choreographies.
    pub start: Name,
    /// Overrides keyed by the preorder index of a star or choice node:
    /// `N` places both helpers, `N.comb` and `N.bifurc` one of them.
    pub overrides: BTreeMap<String, Name>,
    pub ctx_init: CtxInit,
}

impl Placement {
    pub fn at(central: impl Into<Name>) -> Placement {
        let central = central.into();
        Placement { start: central.clone(), central, overrides: BTreeMap::new(), ctx_init: CtxInit::Literal }
    }

    fn index_for(&self, loc: &Name) -> Name {
        match &self.ctx_init {
            CtxInit::Literal => Name::Idx(1),
            CtxInit::Clock(c) => Name::Idx(c.get(loc).copied().unwrap_or(0)),
        }
    }

    fn names(&self) -> BTreeSet<Name> {
        let mut out: BTreeSet<Name> = [self.central.clone(), self.start.clone()].into();
        out.extend(self.overrides.values().cloned());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Orchestration,
    Choreography,
    Migration,
}

/// Binder names used inside compiled monitors, chosen apart from the
/// contract's own names.
#[derive(Debug, Clone)]
struct Vars {
    loc: Name,
    idx: Name,
    vals: Vec<Name>,
}

impl Vars {
    fn signal(&self) -> Vec<Name> {
        vec![self.loc.clone(), self.idx.clone()]
    }

    fn for_values(&self, n: usize) -> &[Name] {
        &self.vals[..n]
    }
}

struct Supply {
    used: BTreeSet<Name>,
}

impl Supply {
    fn fresh(&mut self, hint: &str) -> Name {
        let n = fresh_name(hint, &self.used);
        self.used.insert(n.clone());
        n
    }
}

fn setup(e: &Contract, p: &Placement) -> (Vars, Supply) {
    let mut used = e.names();
    used.extend(p.names());
    let mut sup = Supply { used };
    let width = e.events().iter().map(|(_, v, _)| v.len()).max().unwrap_or(0);
    let loc = sup.fresh("xloc");
    let idx = sup.fresh("xidx");
    let vals = (0..width).map(|_| sup.fresh("x")).collect();
    (Vars { loc, idx, vals }, sup)
}

/// `!(f1?(x̄).f!<x̄>) | !(f2?(x̄).f!<x̄>)`.
pub fn build_comb(f1: &Name, f2: &Name, f: &Name, params: &[Name]) -> Proc {
    let fwd = |src: &Name| Proc::repeat(Proc::input(src.clone(), params.to_vec(), Proc::out(f.clone(), params.to_vec(), Proc::Stop)));
    Proc::par(fwd(f1), fwd(f2))
}

/// `!(s?(x̄).(s1!<x̄> | s2!<x̄>))`.
pub fn build_bifurc(s: &Name, s1: &Name, s2: &Name, params: &[Name]) -> Proc {
    let both = Proc::par(Proc::out(s1.clone(), params.to_vec(), Proc::Stop), Proc::out(s2.clone(), params.to_vec(), Proc::Stop));
    Proc::repeat(Proc::input(s.clone(), params.to_vec(), both))
}

/// Nested conditionals comparing `xs` with `vs` pairwise; `stop` on any mismatch.
fn guard(xs: &[Name], vs: &[Name], then: Proc) -> Proc {
    xs.iter().zip(vs).rev().fold(then, |acc, (x, v)| Proc::if_eq(x.clone(), v.clone(), acc, Proc::Stop))
}

/// `!(c?*(x̄). if x̄ = v̄ then getI(xloc,xidx).f!<xloc,xidx>)`.
pub fn build_trg(c: &Name, vals: &[Name], f: &Name, loc_var: &Name, idx_var: &Name, params: &[Name]) -> Proc {
    let report = Proc::get_i(
        loc_var.clone(),
        idx_var.clone(),
        Proc::out(f.clone(), vec![loc_var.clone(), idx_var.clone()], Proc::Stop),
    );
    Proc::repeat(Proc::query(c.clone(), params.to_vec(), guard(params, vals, report)))
}

fn listener(s: &Name, f: &Name, c: &Name, vals: &[Name], k: &Name, vars: &Vars, migrate: bool) -> Proc {
    let trg = || build_trg(c, vals, f, &vars.loc, &vars.idx, vars.for_values(vals.len()));
    let align = Proc::if_eq(
        k.clone(),
        vars.loc.clone(),
        Proc::set_i(vars.loc.clone(), vars.idx.clone(), trg()),
        Proc::sync(k.clone(), trg()),
    );
    let body = if migrate { Proc::go(k.clone(), align) } else { align };
    Proc::repeat(Proc::input(s.clone(), vars.signal(), body))
}

/// The network for `e` as one parallel term (orchestration and flat migration).
fn compile_local(s: &Name, f: &Name, e: &Contract, vars: &Vars, sup: &mut Supply, migrate: bool) -> Proc {
    match e {
        Contract::Event { chan, values, loc } => listener(s, f, chan, values, loc, vars, migrate),
        Contract::Seq(a, b) => {
            let m = sup.fresh("m");
            let left = compile_local(s, &m, a, vars, sup, migrate);
            let right = compile_local(&m, f, b, vars, sup, migrate);
            Proc::new_chan(m, Proc::par(left, right))
        }
        Contract::Star(a) => {
            let c = sup.fresh("c");
            let s2 = sup.fresh("s'");
            let f2 = sup.fresh("f'");
            let inner = compile_local(&s2, &f2, a, vars, sup, migrate);
            let body = Proc::par_all(vec![build_comb(s, &f2, &c, &vars.signal()), build_bifurc(&c, &s2, f, &vars.signal()), inner]);
            news(&[c, s2, f2], body)
        }
        Contract::Choice(a, b) => {
            let (s1, s2, f1, f2) = (sup.fresh("s1"), sup.fresh("s2"), sup.fresh("f1"), sup.fresh("f2"));
            let left = compile_local(&s1, &f1, a, vars, sup, migrate);
            let right = compile_local(&s2, &f2, b, vars, sup, migrate);
            let body = Proc::par_all(vec![
                build_bifurc(s, &s1, &s2, &vars.signal()),
                left,
                right,
                build_comb(&f1, &f2, f, &vars.signal()),
            ]);
            news(&[s1, s2, f1, f2], body)
        }
    }
}

fn news(chans: &[Name], body: Proc) -> Proc {
    chans.iter().rev().fold(body, |acc, c| Proc::new_chan(c.clone(), acc))
}

/// `h[[ new s,f.(s!<h,1> | network | f?(x̄).fail) ]]@(h,1)`.
fn wrap_central(p: &Placement, vars: &Vars, sup: &mut Supply, network: impl FnOnce(&Name, &Name, &mut Supply) -> Proc) -> System {
    let h = &p.central;
    let s = sup.fresh("s");
    let f = sup.fresh("f");
    let idx = p.index_for(h);
    let net = network(&s, &f, sup);
    let body = Proc::par_all(vec![
        Proc::out(s.clone(), vec![h.clone(), idx.clone()], Proc::Stop),
        net,
        Proc::input(f.clone(), vars.signal(), Proc::Fail),
    ]);
    System::located(h.clone(), Proc::monitor(news(&[s, f], body), h.clone(), idx))
}

pub fn compile_orch(e: &Contract, p: &Placement) -> System {
    let (vars, mut sup) = setup(e, p);
    wrap_central(p, &vars, &mut sup, |s, f, sup| compile_local(s, f, e, &vars, sup, false))
}

/// Flat migrating monitors: listeners move to their event's location once started.
pub fn compile_mig(e: &Contract, p: &Placement) -> System {
    let (vars, mut sup) = setup(e, p);
    wrap_central(p, &vars, &mut sup, |s, f, sup| compile_local(s, f, e, &vars, sup, true))
}

/// A single migrating monitor chaining the events of a sequence, moving
/// to each event's location only when that event becomes relevant. With
/// `align`, every move is followed by `sync` at the destination; a
/// consecutive event at the same location continues from the log position
/// just past the previous match.
pub fn compile_mig_nested(e: &Contract, p: &Placement, align: bool) -> Result<System, CompileError> {
    let mut events = Vec::new();
    seq_events(e, &mut events)?;
    let (vars, _) = setup(e, p);
    let mut body = Proc::Fail;
    for (i, (c, vals, loc)) in events.iter().enumerate().rev() {
        let params = vars.for_values(vals.len()).to_vec();
        let mut step = Proc::query((*c).clone(), params.clone(), guard(&params, vals, body));
        let moved = i == 0 || events[i - 1].2 != *loc;
        if moved {
            if align {
                step = Proc::sync((*loc).clone(), step);
            }
            step = Proc::go((*loc).clone(), step);
        }
        body = step;
    }
    let h = &p.central;
    let idx = p.index_for(h);
    Ok(System::located(h.clone(), Proc::monitor(body, h.clone(), idx)))
}

fn seq_events<'a>(e: &'a Contract, out: &mut Vec<(&'a Name, &'a [Name], &'a Name)>) -> Result<(), CompileError> {
    match e {
        Contract::Event { chan, values, loc } => {
            out.push((chan, values, loc));
            Ok(())
        }
        Contract::Seq(a, b) => {
            seq_events(a, out)?;
            seq_events(b, out)
        }
        _ => Err(CompileError::NestedShape),
    }
}

fn leftmost_loc(e: &Contract) -> &Name {
    match e {
        Contract::Event { loc, .. } => loc,
        Contract::Seq(a, _) | Contract::Choice(a, _) | Contract::Star(a) => leftmost_loc(a),
    }
}

/// Preorder indices of star and choice nodes.
fn operator_nodes(e: &Contract) -> BTreeSet<usize> {
    fn walk(e: &Contract, next: &mut usize, out: &mut BTreeSet<usize>) {
        let me = *next;
        *next += 1;
        match e {
            Contract::Event { .. } => {}
            Contract::Star(a) => {
                out.insert(me);
                walk(a, next, out);
            }
            Contract::Seq(a, b) | Contract::Choice(a, b) => {
                if matches!(e, Contract::Choice(..)) {
                    out.insert(me);
                }
                walk(a, next, out);
                walk(b, next, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(e, &mut 0, &mut out);
    out
}

struct Chor<'a> {
    p: &'a Placement,
    vars: &'a Vars,
    next_node: usize,
}

impl Chor<'_> {
    fn place(&self, node: usize, helper: &str, default: &Name) -> Name {
        let o = &self.p.overrides;
        o.get(&format!("{node}.{helper}")).or_else(|| o.get(&node.to_string())).cloned().unwrap_or_else(|| default.clone())
    }

    fn block(&self, loc: &Name, body: Proc) -> System {
        System::located(loc.clone(), Proc::monitor(body, loc.clone(), self.p.index_for(loc)))
    }

    fn compile(&mut self, s: &Name, f: &Name, e: &Contract, sup: &mut Supply) -> System {
        let node = self.next_node;
        self.next_node += 1;
        let sig = self.vars.signal();
        match e {
            Contract::Event { chan, values, loc } => self.block(loc, listener(s, f, chan, values, loc, self.vars, false)),
            Contract::Seq(a, b) => {
                let m = sup.fresh("m");
                let left = self.compile(s, &m, a, sup);
                let right = self.compile(&m, f, b, sup);
                System::new_chan(m, System::par(left, right))
            }
            Contract::Star(a) => {
                let c = sup.fresh("c");
                let s2 = sup.fresh("s'");
                let f2 = sup.fresh("f'");
                let default = leftmost_loc(a).clone();
                let comb_at = self.place(node, "comb", &default);
                let bif_at = self.place(node, "bifurc", &default);
                let inner = self.compile(&s2, &f2, a, sup);
                let body = System::par_all(vec![
                    self.block(&comb_at, build_comb(s, &f2, &c, &sig)),
                    self.block(&bif_at, build_bifurc(&c, &s2, f, &sig)),
                    inner,
                ])
                .expect("nonempty");
                System::new_chans(&[c, s2, f2], body)
            }
            Contract::Choice(a, b) => {
                let (s1, s2, f1, f2) = (sup.fresh("s1"), sup.fresh("s2"), sup.fresh("f1"), sup.fresh("f2"));
                let default = leftmost_loc(b).clone();
                let bif_at = self.place(node, "bifurc", &default);
                let comb_at = self.place(node, "comb", &default);
                let left = self.compile(&s1, &f1, a, sup);
                let right = self.compile(&s2, &f2, b, sup);
                let body = System::par_all(vec![
                    self.block(&bif_at, build_bifurc(s, &s1, &s2, &sig)),
                    left,
                    right,
                    self.block(&comb_at, build_comb(&f1, &f2, f, &sig)),
                ])
                .expect("nonempty");
                System::new_chans(&[s1, s2, f1, f2], body)
            }
        }
    }
}

/// Choreography: listeners at their event's location, helpers per placement,
/// start signal and failure report at the start location.
pub fn compile_chor(e: &Contract, p: &Placement) -> Result<System, CompileError> {
    let ops = operator_nodes(e);
    for key in p.overrides.keys() {
        let node = key.split('.').next().unwrap_or_default();
        let helper_ok = key.split_once('.').map_or(true, |(_, h)| h == "comb" || h == "bifurc");
        if !helper_ok || !node.parse::<usize>().is_ok_and(|n| ops.contains(&n)) {
            return Err(CompileError::UnknownNode(key.clone()));
        }
    }
    let (vars, mut sup) = setup(e, p);
    let s = sup.fresh("s");
    let f = sup.fresh("f");
    let k = &p.start;
    let idx = p.index_for(k);
    let starter = Proc::par(
        Proc::out(s.clone(), vec![k.clone(), idx.clone()], Proc::Stop),
        Proc::input(f.clone(), vars.signal(), Proc::Fail),
    );
    let mut chor = Chor { p, vars: &vars, next_node: 0 };
    let network = chor.compile(&s, &f, e, &mut sup);
    let top = System::par(System::located(k.clone(), Proc::monitor(starter, k.clone(), idx)), network);
    Ok(System::new_chans(&[s, f], top))
}

pub fn compile(e: &Contract, strategy: Strategy, p: &Placement) -> Result<System, CompileError> {
    match strategy {
        Strategy::Orchestration => Ok(compile_orch(e, p)),
        Strategy::Choreography => compile_chor(e, p),
        Strategy::Migration => Ok(compile_mig(e, p)),
    }
}
