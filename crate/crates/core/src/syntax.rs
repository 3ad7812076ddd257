//! Abstract syntax of systems, processes, monitors and contracts.

use crate::name::{fresh_name, Name};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Located systems composed in parallel under channel restriction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum System {
    Located { loc: Name, body: Proc },
    Par(Box<System>, Box<System>),
    New { chan: Name, body: Box<System> },
}

/// Processes and monitors share one tree; monitor-only constructs are
/// rejected outside a monitor block by [`validate_system`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Proc {
    Stop,
    Out { subject: Name, args: Vec<Name>, cont: Box<Proc> },
    In { subject: Name, params: Vec<Name>, cont: Box<Proc> },
    New { chan: Name, body: Box<Proc> },
    If { lhs: Name, rhs: Name, then: Box<Proc>, els: Box<Proc> },
    Par(Box<Proc>, Box<Proc>),
    /// `fuel` is the remaining unfolding budget during exploration; `None`
    /// for terms that come from the parser or compiler.
    Repeat { body: Box<Proc>, fuel: Option<u32> },
    /// A monitor block with its monitoring context (location, log index).
    Monitor { body: Box<Proc>, ctx_loc: Name, ctx_idx: Name },
    Trace { chan: Name, args: Vec<Name>, ts: u64 },
    Query { subject: Name, params: Vec<Name>, cont: Box<Proc> },
    Sync { loc: Name, cont: Box<Proc> },
    GetI { loc_var: Name, idx_var: Name, cont: Box<Proc> },
    SetI { loc: Name, idx: Name, cont: Box<Proc> },
    Go { loc: Name, cont: Box<Proc> },
    Ok,
    Fail,
}

/// Regular-expression contracts over located events.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Contract {
    Event { chan: Name, values: Vec<Name>, loc: Name },
    Seq(Box<Contract>, Box<Contract>),
    Star(Box<Contract>),
    Choice(Box<Contract>, Box<Contract>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("substitution arity mismatch: {vars} variables, {vals} values")]
    ArityMismatch { vars: usize, vals: usize },
    #[error("binder repeats variable `{0}`")]
    DuplicateBinder(Name),
    #[error("`{0}` may only appear inside a monitor block")]
    MonitorOnly(&'static str),
    #[error("trace entities may not appear inside a monitor block")]
    TraceInMonitor,
    #[error("monitor blocks may not be nested")]
    NestedMonitor,
}

impl Proc {
    pub fn out(subject: impl Into<Name>, args: Vec<Name>, cont: Proc) -> Proc {
        Proc::Out { subject: subject.into(), args, cont: Box::new(cont) }
    }

    pub fn input(subject: impl Into<Name>, params: Vec<Name>, cont: Proc) -> Proc {
        Proc::In { subject: subject.into(), params, cont: Box::new(cont) }
    }

    pub fn query(subject: impl Into<Name>, params: Vec<Name>, cont: Proc) -> Proc {
        Proc::Query { subject: subject.into(), params, cont: Box::new(cont) }
    }

    pub fn new_chan(chan: impl Into<Name>, body: Proc) -> Proc {
        Proc::New { chan: chan.into(), body: Box::new(body) }
    }

    pub fn if_eq(lhs: impl Into<Name>, rhs: impl Into<Name>, then: Proc, els: Proc) -> Proc {
        Proc::If { lhs: lhs.into(), rhs: rhs.into(), then: Box::new(then), els: Box::new(els) }
    }

    pub fn par(left: Proc, right: Proc) -> Proc {
        Proc::Par(Box::new(left), Box::new(right))
    }

    /// Right-nested parallel composition; `Stop` for an empty list.
    pub fn par_all(mut items: Vec<Proc>) -> Proc {
        let Some(mut acc) = items.pop() else { return Proc::Stop };
        while let Some(p) = items.pop() {
            acc = Proc::par(p, acc);
        }
        acc
    }

    pub fn repeat(body: Proc) -> Proc {
        Proc::Repeat { body: Box::new(body), fuel: None }
    }

    pub fn monitor(body: Proc, ctx_loc: impl Into<Name>, ctx_idx: impl Into<Name>) -> Proc {
        Proc::Monitor { body: Box::new(body), ctx_loc: ctx_loc.into(), ctx_idx: ctx_idx.into() }
    }

    pub fn sync(loc: impl Into<Name>, cont: Proc) -> Proc {
        Proc::Sync { loc: loc.into(), cont: Box::new(cont) }
    }

    pub fn get_i(loc_var: impl Into<Name>, idx_var: impl Into<Name>, cont: Proc) -> Proc {
        Proc::GetI { loc_var: loc_var.into(), idx_var: idx_var.into(), cont: Box::new(cont) }
    }

    pub fn set_i(loc: impl Into<Name>, idx: impl Into<Name>, cont: Proc) -> Proc {
        Proc::SetI { loc: loc.into(), idx: idx.into(), cont: Box::new(cont) }
    }

    pub fn go(loc: impl Into<Name>, cont: Proc) -> Proc {
        Proc::Go { loc: loc.into(), cont: Box::new(cont) }
    }

    /// Free identifiers (index literals excluded).
    pub fn free_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        let add = |n: &Name, bound: &Vec<Name>, out: &mut BTreeSet<Name>| {
            if n.is_ident() && !bound.contains(n) {
                out.insert(n.clone());
            }
        };
        match self {
            Proc::Stop | Proc::Ok | Proc::Fail => {}
            Proc::Out { subject, args, cont } => {
                add(subject, bound, out);
                args.iter().for_each(|a| add(a, bound, out));
                cont.collect_free(bound, out);
            }
            Proc::In { subject, params, cont } | Proc::Query { subject, params, cont } => {
                add(subject, bound, out);
                with_bound(bound, params, |b| cont.collect_free(b, out));
            }
            Proc::New { chan, body } => {
                with_bound(bound, std::slice::from_ref(chan), |b| body.collect_free(b, out))
            }
            Proc::If { lhs, rhs, then, els } => {
                add(lhs, bound, out);
                add(rhs, bound, out);
                then.collect_free(bound, out);
                els.collect_free(bound, out);
            }
            Proc::Par(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Proc::Repeat { body, .. } => body.collect_free(bound, out),
            Proc::Monitor { body, ctx_loc, ctx_idx } => {
                add(ctx_loc, bound, out);
                add(ctx_idx, bound, out);
                body.collect_free(bound, out);
            }
            Proc::Trace { chan, args, .. } => {
                add(chan, bound, out);
                args.iter().for_each(|a| add(a, bound, out));
            }
            Proc::Sync { loc, cont } | Proc::Go { loc, cont } => {
                add(loc, bound, out);
                cont.collect_free(bound, out);
            }
            Proc::GetI { loc_var, idx_var, cont } => {
                with_bound(bound, &[loc_var.clone(), idx_var.clone()], |b| cont.collect_free(b, out))
            }
            Proc::SetI { loc, idx, cont } => {
                add(loc, bound, out);
                add(idx, bound, out);
                cont.collect_free(bound, out);
            }
        }
    }

    /// Every identifier occurring anywhere, bound or free.
    pub fn all_names(&self, out: &mut BTreeSet<Name>) {
        let add = |n: &Name, out: &mut BTreeSet<Name>| {
            if n.is_ident() {
                out.insert(n.clone());
            }
        };
        match self {
            Proc::Stop | Proc::Ok | Proc::Fail => {}
            Proc::Out { subject, args, cont }
            | Proc::In { subject, params: args, cont }
            | Proc::Query { subject, params: args, cont } => {
                add(subject, out);
                args.iter().for_each(|a| add(a, out));
                cont.all_names(out);
            }
            Proc::New { chan, body } => {
                add(chan, out);
                body.all_names(out);
            }
            Proc::If { lhs, rhs, then, els } => {
                add(lhs, out);
                add(rhs, out);
                then.all_names(out);
                els.all_names(out);
            }
            Proc::Par(a, b) => {
                a.all_names(out);
                b.all_names(out);
            }
            Proc::Repeat { body, .. } => body.all_names(out),
            Proc::Monitor { body, ctx_loc, ctx_idx } => {
                add(ctx_loc, out);
                add(ctx_idx, out);
                body.all_names(out);
            }
            Proc::Trace { chan, args, .. } => {
                add(chan, out);
                args.iter().for_each(|a| add(a, out));
            }
            Proc::Sync { loc, cont } | Proc::Go { loc, cont } => {
                add(loc, out);
                cont.all_names(out);
            }
            Proc::GetI { loc_var: a, idx_var: b, cont } | Proc::SetI { loc: a, idx: b, cont } => {
                add(a, out);
                add(b, out);
                cont.all_names(out);
            }
        }
    }

    /// Capture-avoiding simultaneous substitution of `vals` for `vars`.
    pub fn substitute(&self, vars: &[Name], vals: &[Name]) -> Result<Proc, SyntaxError> {
        if vars.len() != vals.len() {
            return Err(SyntaxError::ArityMismatch { vars: vars.len(), vals: vals.len() });
        }
        let map: BTreeMap<Name, Name> = vars.iter().cloned().zip(vals.iter().cloned()).collect();
        Ok(self.subst_map(&map))
    }

    pub(crate) fn subst_map(&self, map: &BTreeMap<Name, Name>) -> Proc {
        if map.is_empty() {
            return self.clone();
        }
        let r = |n: &Name| map.get(n).cloned().unwrap_or_else(|| n.clone());
        let rs = |ns: &[Name]| ns.iter().map(r).collect::<Vec<_>>();
        match self {
            Proc::Stop => Proc::Stop,
            Proc::Ok => Proc::Ok,
            Proc::Fail => Proc::Fail,
            Proc::Out { subject, args, cont } => {
                Proc::Out { subject: r(subject), args: rs(args), cont: Box::new(cont.subst_map(map)) }
            }
            Proc::In { subject, params, cont } => {
                let (params, cont) = subst_under(params, cont, map);
                Proc::In { subject: r(subject), params, cont: Box::new(cont) }
            }
            Proc::Query { subject, params, cont } => {
                let (params, cont) = subst_under(params, cont, map);
                Proc::Query { subject: r(subject), params, cont: Box::new(cont) }
            }
            Proc::New { chan, body } => {
                let (mut chans, body) = subst_under(std::slice::from_ref(chan), body, map);
                Proc::New { chan: chans.remove(0), body: Box::new(body) }
            }
            Proc::If { lhs, rhs, then, els } => Proc::If {
                lhs: r(lhs),
                rhs: r(rhs),
                then: Box::new(then.subst_map(map)),
                els: Box::new(els.subst_map(map)),
            },
            Proc::Par(a, b) => Proc::Par(Box::new(a.subst_map(map)), Box::new(b.subst_map(map))),
            Proc::Repeat { body, fuel } => Proc::Repeat { body: Box::new(body.subst_map(map)), fuel: *fuel },
            Proc::Monitor { body, ctx_loc, ctx_idx } => Proc::Monitor {
                body: Box::new(body.subst_map(map)),
                ctx_loc: r(ctx_loc),
                ctx_idx: r(ctx_idx),
            },
            Proc::Trace { chan, args, ts } => Proc::Trace { chan: r(chan), args: rs(args), ts: *ts },
            Proc::Sync { loc, cont } => Proc::Sync { loc: r(loc), cont: Box::new(cont.subst_map(map)) },
            Proc::Go { loc, cont } => Proc::Go { loc: r(loc), cont: Box::new(cont.subst_map(map)) },
            Proc::GetI { loc_var, idx_var, cont } => {
                let (mut vs, cont) = subst_under(&[loc_var.clone(), idx_var.clone()], cont, map);
                let idx_var = vs.pop().expect("two binders");
                let loc_var = vs.pop().expect("two binders");
                Proc::GetI { loc_var, idx_var, cont: Box::new(cont) }
            }
            Proc::SetI { loc, idx, cont } => {
                Proc::SetI { loc: r(loc), idx: r(idx), cont: Box::new(cont.subst_map(map)) }
            }
        }
    }

    /// Replaces the fuel of every replication with `fuel`.
    pub fn with_fuel(&self, fuel: Option<u32>) -> Proc {
        self.map_children(&|p| p.with_fuel(fuel), fuel)
    }

    fn map_children(&self, f: &dyn Fn(&Proc) -> Proc, fuel: Option<u32>) -> Proc {
        let b = |p: &Proc| Box::new(f(p));
        match self {
            Proc::Stop | Proc::Ok | Proc::Fail | Proc::Trace { .. } => self.clone(),
            Proc::Out { subject, args, cont } => Proc::Out { subject: subject.clone(), args: args.clone(), cont: b(cont) },
            Proc::In { subject, params, cont } => Proc::In { subject: subject.clone(), params: params.clone(), cont: b(cont) },
            Proc::Query { subject, params, cont } => {
                Proc::Query { subject: subject.clone(), params: params.clone(), cont: b(cont) }
            }
            Proc::New { chan, body } => Proc::New { chan: chan.clone(), body: b(body) },
            Proc::If { lhs, rhs, then, els } => {
                Proc::If { lhs: lhs.clone(), rhs: rhs.clone(), then: b(then), els: b(els) }
            }
            Proc::Par(x, y) => Proc::Par(b(x), b(y)),
            Proc::Repeat { body, .. } => Proc::Repeat { body: b(body), fuel },
            Proc::Monitor { body, ctx_loc, ctx_idx } => {
                Proc::Monitor { body: b(body), ctx_loc: ctx_loc.clone(), ctx_idx: ctx_idx.clone() }
            }
            Proc::Sync { loc, cont } => Proc::Sync { loc: loc.clone(), cont: b(cont) },
            Proc::Go { loc, cont } => Proc::Go { loc: loc.clone(), cont: b(cont) },
            Proc::GetI { loc_var, idx_var, cont } => {
                Proc::GetI { loc_var: loc_var.clone(), idx_var: idx_var.clone(), cont: b(cont) }
            }
            Proc::SetI { loc, idx, cont } => Proc::SetI { loc: loc.clone(), idx: idx.clone(), cont: b(cont) },
        }
    }
}

fn with_bound<R>(bound: &mut Vec<Name>, names: &[Name], f: impl FnOnce(&mut Vec<Name>) -> R) -> R {
    let depth = bound.len();
    bound.extend(names.iter().cloned());
    let r = f(bound);
    bound.truncate(depth);
    r
}

/// Substitutes under a binder, alpha-renaming any binder that would capture
/// a name introduced by the substitution.
fn subst_under(binders: &[Name], body: &Proc, map: &BTreeMap<Name, Name>) -> (Vec<Name>, Proc) {
    // No binder is renamed or reached by the substitution: no capture possible.
    if binders.iter().all(|b| !map.contains_key(b) && !map.values().any(|v| v == b)) {
        return (binders.to_vec(), body.subst_map(map));
    }
    let body_free = body.free_names();
    let mut inner: BTreeMap<Name, Name> = map
        .iter()
        .filter(|(k, _)| !binders.contains(k) && body_free.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return (binders.to_vec(), body.clone());
    }
    let incoming: BTreeSet<Name> = inner.values().cloned().collect();
    let mut used: BTreeSet<Name> = body_free;
    used.extend(incoming.iter().cloned());
    used.extend(binders.iter().cloned());
    used.extend(inner.keys().cloned());
    let mut new_binders = Vec::with_capacity(binders.len());
    for b in binders {
        if incoming.contains(b) {
            let hint = b.as_ident().map(base_hint).unwrap_or("x");
            let fresh = fresh_name(hint, &used);
            used.insert(fresh.clone());
            inner.insert(b.clone(), fresh.clone());
            new_binders.push(fresh);
        } else {
            new_binders.push(b.clone());
        }
    }
    (new_binders, body.subst_map(&inner))
}

/// Strips a trailing `_N` suffix added by [`fresh_name`].
pub(crate) fn base_hint(text: &str) -> &str {
    match text.rsplit_once('_') {
        Some((base, digits)) if !base.is_empty() && !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => base,
        _ => text,
    }
}

impl System {
    pub fn located(loc: impl Into<Name>, body: Proc) -> System {
        System::Located { loc: loc.into(), body }
    }

    pub fn par(left: System, right: System) -> System {
        System::Par(Box::new(left), Box::new(right))
    }

    pub fn par_all(mut items: Vec<System>) -> Option<System> {
        let mut acc = items.pop()?;
        while let Some(s) = items.pop() {
            acc = System::par(s, acc);
        }
        Some(acc)
    }

    pub fn new_chan(chan: impl Into<Name>, body: System) -> System {
        System::New { chan: chan.into(), body: Box::new(body) }
    }

    pub fn new_chans(chans: &[Name], body: System) -> System {
        chans.iter().rev().fold(body, |acc, c| System::new_chan(c.clone(), acc))
    }

    pub fn free_names(&self) -> BTreeSet<Name> {
        match self {
            System::Located { loc, body } => {
                let mut out = body.free_names();
                if loc.is_ident() {
                    out.insert(loc.clone());
                }
                out
            }
            System::Par(a, b) => {
                let mut out = a.free_names();
                out.extend(b.free_names());
                out
            }
            System::New { chan, body } => {
                let mut out = body.free_names();
                out.remove(chan);
                out
            }
        }
    }

    pub fn all_names(&self, out: &mut BTreeSet<Name>) {
        match self {
            System::Located { loc, body } => {
                if loc.is_ident() {
                    out.insert(loc.clone());
                }
                body.all_names(out);
            }
            System::Par(a, b) => {
                a.all_names(out);
                b.all_names(out);
            }
            System::New { chan, body } => {
                out.insert(chan.clone());
                body.all_names(out);
            }
        }
    }

    pub fn with_fuel(&self, fuel: Option<u32>) -> System {
        match self {
            System::Located { loc, body } => System::Located { loc: loc.clone(), body: body.with_fuel(fuel) },
            System::Par(a, b) => System::par(a.with_fuel(fuel), b.with_fuel(fuel)),
            System::New { chan, body } => System::new_chan(chan.clone(), body.with_fuel(fuel)),
        }
    }
}

impl Contract {
    pub fn event(chan: impl Into<Name>, values: Vec<Name>, loc: impl Into<Name>) -> Contract {
        Contract::Event { chan: chan.into(), values, loc: loc.into() }
    }

    pub fn seq(a: Contract, b: Contract) -> Contract {
        Contract::Seq(Box::new(a), Box::new(b))
    }

    pub fn star(a: Contract) -> Contract {
        Contract::Star(Box::new(a))
    }

    pub fn choice(a: Contract, b: Contract) -> Contract {
        Contract::Choice(Box::new(a), Box::new(b))
    }

    /// Replaces `var` by `val` in every channel, value and location position.
    pub fn substitute(&self, var: &Name, val: &Name) -> Contract {
        let r = |n: &Name| if n == var { val.clone() } else { n.clone() };
        match self {
            Contract::Event { chan, values, loc } => {
                Contract::Event { chan: r(chan), values: values.iter().map(r).collect(), loc: r(loc) }
            }
            Contract::Seq(a, b) => Contract::seq(a.substitute(var, val), b.substitute(var, val)),
            Contract::Star(a) => Contract::star(a.substitute(var, val)),
            Contract::Choice(a, b) => Contract::choice(a.substitute(var, val), b.substitute(var, val)),
        }
    }

    /// Basic events in left-to-right order.
    pub fn events(&self) -> Vec<(&Name, &[Name], &Name)> {
        let mut out = Vec::new();
        self.collect_events(&mut out);
        out
    }

    fn collect_events<'a>(&'a self, out: &mut Vec<(&'a Name, &'a [Name], &'a Name)>) {
        match self {
            Contract::Event { chan, values, loc } => out.push((chan, values, loc)),
            Contract::Seq(a, b) | Contract::Choice(a, b) => {
                a.collect_events(out);
                b.collect_events(out);
            }
            Contract::Star(a) => a.collect_events(out),
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for (c, vs, l) in self.events() {
            out.insert(c.clone());
            out.insert(l.clone());
            out.extend(vs.iter().filter(|v| v.is_ident()).cloned());
        }
        out
    }

    /// Operator nesting depth; a basic event has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Contract::Event { .. } => 0,
            Contract::Seq(a, b) | Contract::Choice(a, b) => 1 + a.depth().max(b.depth()),
            Contract::Star(a) => 1 + a.depth(),
        }
    }
}

/// Checks the well-formedness conditions the grammar alone cannot express.
pub fn validate_system(s: &System) -> Result<(), SyntaxError> {
    match s {
        System::Located { body, .. } => validate_proc(body, false),
        System::Par(a, b) => {
            validate_system(a)?;
            validate_system(b)
        }
        System::New { body, .. } => validate_system(body),
    }
}

fn validate_proc(p: &Proc, in_monitor: bool) -> Result<(), SyntaxError> {
    let distinct = |names: &[Name]| -> Result<(), SyntaxError> {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(SyntaxError::DuplicateBinder(n.clone()));
            }
        }
        Ok(())
    };
    let monitor_only = |what: &'static str| -> Result<(), SyntaxError> {
        if in_monitor {
            Ok(())
        } else {
            Err(SyntaxError::MonitorOnly(what))
        }
    };
    match p {
        Proc::Stop => Ok(()),
        Proc::Ok => monitor_only("ok"),
        Proc::Fail => monitor_only("fail"),
        Proc::Out { cont, .. } => validate_proc(cont, in_monitor),
        Proc::In { params, cont, .. } => {
            distinct(params)?;
            validate_proc(cont, in_monitor)
        }
        Proc::Query { params, cont, .. } => {
            monitor_only("trace query")?;
            distinct(params)?;
            validate_proc(cont, in_monitor)
        }
        Proc::New { body, .. } | Proc::Repeat { body, .. } => validate_proc(body, in_monitor),
        Proc::If { then, els, .. } => {
            validate_proc(then, in_monitor)?;
            validate_proc(els, in_monitor)
        }
        Proc::Par(a, b) => {
            validate_proc(a, in_monitor)?;
            validate_proc(b, in_monitor)
        }
        Proc::Monitor { body, .. } => {
            if in_monitor {
                return Err(SyntaxError::NestedMonitor);
            }
            validate_proc(body, true)
        }
        Proc::Trace { .. } => {
            if in_monitor {
                Err(SyntaxError::TraceInMonitor)
            } else {
                Ok(())
            }
        }
        Proc::Sync { cont, .. } | Proc::Go { cont, .. } | Proc::SetI { cont, .. } => {
            monitor_only(match p {
                Proc::Sync { .. } => "sync",
                Proc::Go { .. } => "go",
                _ => "setI",
            })?;
            validate_proc(cont, in_monitor)
        }
        Proc::GetI { loc_var, idx_var, cont } => {
            monitor_only("getI")?;
            distinct(&[loc_var.clone(), idx_var.clone()])?;
            validate_proc(cont, in_monitor)
        }
    }
}
