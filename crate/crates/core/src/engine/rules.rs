//! Transition rules.
//!
//! Every atom of a configuration contributes capabilities: outputs,
//! inputs (with a continuation awaiting values) and internal steps. Process
//! and trace outputs, communications, skips and external actions are then
//! assembled from those capabilities at system level.

use super::{Action, ActionKind, ClockMap, Config, EngineOptions, Tag, TagKind, Verdict};
use crate::name::{fresh_name, Name};
use crate::normal::{Atom, NormSystem, Piece};
use crate::syntax::Proc;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
struct OutCap {
    subject: Name,
    payload: Vec<Name>,
    kind: TagKind,
    from: Name,
    ts: Option<u64>,
    residual: Vec<Piece>,
    /// Location whose log records this output (process outputs only).
    traced_at: Option<Name>,
    fresh: Vec<Name>,
}

#[derive(Debug, Clone)]
enum InCont {
    Proc { loc: Name, params: Vec<Name>, body: Proc },
    Monitor { loc: Name, ctx_loc: Name, ctx_idx: Name, params: Vec<Name>, body: Proc },
}

#[derive(Debug, Clone)]
struct InCap {
    subject: Name,
    arity: usize,
    kind: TagKind,
    from: Option<Name>,
    to: Name,
    ts: Option<u64>,
    cont: InCont,
    extra: Vec<Piece>,
    fresh: Vec<Name>,
}

impl InCap {
    fn instantiate(&self, values: &[Name]) -> Vec<Piece> {
        let mut out = self.extra.clone();
        match &self.cont {
            InCont::Proc { loc, params, body } => {
                let body = body.substitute(params, values).expect("arity checked");
                out.push(Piece::Proc { loc: loc.clone(), body });
            }
            InCont::Monitor { loc, ctx_loc, ctx_idx, params, body } => {
                let body = body.substitute(params, values).expect("arity checked");
                out.push(Piece::Monitor { loc: loc.clone(), ctx_loc: ctx_loc.clone(), ctx_idx: ctx_idx.clone(), body });
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct TauCap {
    tag: Tag,
    residual: Vec<Piece>,
    verdict: Option<(Name, Verdict)>,
    fresh: Vec<Name>,
}

#[derive(Debug, Clone, Default)]
struct Caps {
    outs: Vec<OutCap>,
    ins: Vec<InCap>,
    taus: Vec<TauCap>,
    /// Query channels offered by a monitor block.
    queries: Vec<Name>,
    /// Capabilities a replication would offer if it had budget left.
    spent: Option<Box<Caps>>,
}

impl Caps {
    fn is_empty(&self) -> bool {
        self.outs.is_empty() && self.ins.is_empty() && self.taus.is_empty()
    }

    fn extend(&mut self, other: Caps) {
        self.outs.extend(other.outs);
        self.ins.extend(other.ins);
        self.taus.extend(other.taus);
        self.queries.extend(other.queries);
        if let Some(sp) = other.spent {
            self.spent.get_or_insert_with(Default::default).extend(*sp);
        }
    }

    /// Everything this component could do with unlimited replication.
    fn all_spent(&self) -> Caps {
        let mut out = Caps::default();
        if let Some(sp) = &self.spent {
            out.extend((**sp).clone());
        }
        out.spent = None;
        out
    }

    fn add_residual(&mut self, extra: &[Piece], fresh: &[Name]) {
        for o in &mut self.outs {
            o.residual.extend_from_slice(extra);
            o.fresh.extend_from_slice(fresh);
        }
        for i in &mut self.ins {
            i.extra.extend_from_slice(extra);
            i.fresh.extend_from_slice(fresh);
        }
        for t in &mut self.taus {
            t.residual.extend_from_slice(extra);
            t.fresh.extend_from_slice(fresh);
        }
    }
}

/// Monitoring context of a block: `(location, index)`.
#[derive(Debug, Clone)]
struct Ctx {
    loc: Name,
    idx: Name,
}

struct Env<'a> {
    clocks: &'a ClockMap,
    used: BTreeSet<Name>,
}

impl Env<'_> {
    fn fresh(&mut self, hint: &Name) -> Name {
        let base = hint.as_ident().map(crate::syntax::base_hint).unwrap_or("ch").to_string();
        let n = fresh_name(&base, &self.used);
        self.used.insert(n.clone());
        n
    }
}

fn piece(loc: &Name, ctx: Option<&Ctx>, body: Proc) -> Piece {
    match ctx {
        None => Piece::Proc { loc: loc.clone(), body },
        Some(c) => Piece::Monitor { loc: loc.clone(), ctx_loc: c.loc.clone(), ctx_idx: c.idx.clone(), body },
    }
}

/// Capabilities of one sequential component at `loc`, inside a monitor
/// block when `ctx` is set.
fn caps_of(loc: &Name, ctx: Option<&Ctx>, body: &Proc, env: &mut Env<'_>) -> Caps {
    let mut caps = Caps::default();
    let kind = if ctx.is_some() { TagKind::M } else { TagKind::P };
    let local = Tag::local(kind, loc);
    match body {
        Proc::Out { subject, args, cont } => caps.outs.push(OutCap {
            subject: subject.clone(),
            payload: args.clone(),
            kind,
            from: loc.clone(),
            ts: None,
            residual: vec![piece(loc, ctx, (**cont).clone())],
            traced_at: ctx.is_none().then(|| loc.clone()),
            fresh: Vec::new(),
        }),
        Proc::In { subject, params, cont } => caps.ins.push(InCap {
            subject: subject.clone(),
            arity: params.len(),
            kind,
            from: None,
            to: loc.clone(),
            ts: None,
            cont: match ctx {
                None => InCont::Proc { loc: loc.clone(), params: params.clone(), body: (**cont).clone() },
                Some(c) => InCont::Monitor {
                    loc: loc.clone(),
                    ctx_loc: c.loc.clone(),
                    ctx_idx: c.idx.clone(),
                    params: params.clone(),
                    body: (**cont).clone(),
                },
            },
            extra: Vec::new(),
            fresh: Vec::new(),
        }),
        Proc::If { lhs, rhs, then, els } => {
            let next = if lhs == rhs { then } else { els };
            caps.taus.push(TauCap { tag: local, residual: vec![piece(loc, ctx, (**next).clone())], verdict: None, fresh: Vec::new() });
        }
        Proc::Repeat { body: inner, fuel } => {
            let copy = caps_of_copy(loc, ctx, inner, env);
            if *fuel == Some(0) {
                caps.queries = copy.queries.clone();
                let mut spent = copy.all_spent();
                spent.extend(Caps { spent: None, ..copy });
                caps.spent = Some(Box::new(spent));
                return caps;
            }
            let residual_fuel = fuel.map(|f| f - 1);
            let replica = |ctx: Option<&Ctx>| piece(loc, ctx, Proc::Repeat { body: inner.clone(), fuel: residual_fuel });
            let mut copy = copy;
            for o in &mut copy.outs {
                o.residual.push(replica(ctx));
            }
            for t in &mut copy.taus {
                t.residual.push(replica(ctx));
            }
            for i in &mut copy.ins {
                // A replicated query hands the log position it consumed on to the replica.
                let advanced = match (ctx, i.kind) {
                    (Some(c), TagKind::T) => Some(Ctx { loc: c.loc.clone(), idx: next_index(&c.idx) }),
                    _ => ctx.cloned(),
                };
                i.extra.push(replica(advanced.as_ref()));
            }
            caps.extend(copy);
        }
        Proc::Query { subject, params, cont } => {
            if let Some(c) = ctx {
                caps.queries.push(subject.clone());
                if let Name::Idx(n) = c.idx {
                    caps.ins.push(InCap {
                        subject: subject.clone(),
                        arity: params.len(),
                        kind: TagKind::T,
                        from: Some(c.loc.clone()),
                        to: loc.clone(),
                        ts: Some(n),
                        cont: InCont::Monitor {
                            loc: loc.clone(),
                            ctx_loc: c.loc.clone(),
                            ctx_idx: Name::Idx(n + 1),
                            params: params.clone(),
                            body: (**cont).clone(),
                        },
                        extra: Vec::new(),
                        fresh: Vec::new(),
                    });
                }
            }
        }
        Proc::Sync { loc: target, cont } => {
            if ctx.is_some() && target.is_ident() {
                let at = env.clocks.get(target).copied().unwrap_or(0);
                let c = Ctx { loc: target.clone(), idx: Name::Idx(at) };
                caps.taus.push(TauCap { tag: local, residual: vec![piece(loc, Some(&c), (**cont).clone())], verdict: None, fresh: Vec::new() });
            }
        }
        Proc::GetI { loc_var, idx_var, cont } => {
            if let Some(c) = ctx {
                let next = cont
                    .substitute(&[loc_var.clone(), idx_var.clone()], &[c.loc.clone(), c.idx.clone()])
                    .expect("two binders");
                caps.taus.push(TauCap { tag: local, residual: vec![piece(loc, ctx, next)], verdict: None, fresh: Vec::new() });
            }
        }
        Proc::SetI { loc: target, idx, cont } => {
            if ctx.is_some() && target.is_ident() && idx.as_index().is_some() {
                let c = Ctx { loc: target.clone(), idx: idx.clone() };
                caps.taus.push(TauCap { tag: local, residual: vec![piece(loc, Some(&c), (**cont).clone())], verdict: None, fresh: Vec::new() });
            }
        }
        Proc::Go { loc: target, cont } => {
            if ctx.is_some() && target.is_ident() {
                caps.taus.push(TauCap {
                    tag: Tag::new(TagKind::M, Some(loc.clone()), Some(target.clone()), None),
                    residual: vec![piece(target, ctx, (**cont).clone())],
                    verdict: None,
                    fresh: Vec::new(),
                });
            }
        }
        Proc::Ok | Proc::Fail => {
            if ctx.is_some() {
                let v = if matches!(body, Proc::Ok) { Verdict::Ok } else { Verdict::Fail };
                caps.taus.push(TauCap { tag: local, residual: Vec::new(), verdict: Some((loc.clone(), v)), fresh: Vec::new() });
            }
        }
        // Normalised atoms never start with these; replicated copies are split first.
        Proc::Stop | Proc::Par(..) | Proc::New { .. } | Proc::Monitor { .. } | Proc::Trace { .. } => {}
    }
    caps
}

fn next_index(idx: &Name) -> Name {
    match idx {
        Name::Idx(n) => Name::Idx(n + 1),
        other => other.clone(),
    }
}

/// Capabilities of one unfolded copy of a replicated body. The copy is split
/// into sequential components; each component's step leaves its siblings in
/// the residual. Restrictions inside the copy are opened with fresh names.
fn caps_of_copy(loc: &Name, ctx: Option<&Ctx>, body: &Proc, env: &mut Env<'_>) -> Caps {
    let mut parts = Vec::new();
    let mut fresh = Vec::new();
    split_copy(body, env, &mut parts, &mut fresh);
    if parts.len() == 1 && fresh.is_empty() {
        return caps_of(loc, ctx, &parts[0], env);
    }
    let mut all = Caps::default();
    for (i, p) in parts.iter().enumerate() {
        let mut c = caps_of(loc, ctx, p, env);
        let siblings: Vec<Piece> = parts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| piece(loc, ctx, q.clone()))
            .collect();
        c.add_residual(&siblings, &fresh);
        all.extend(c);
    }
    all
}

fn split_copy(body: &Proc, env: &mut Env<'_>, parts: &mut Vec<Proc>, fresh: &mut Vec<Name>) {
    match body {
        Proc::Stop => {}
        Proc::Par(a, b) => {
            split_copy(a, env, parts, fresh);
            split_copy(b, env, parts, fresh);
        }
        Proc::New { chan, body } => {
            let f = env.fresh(chan);
            fresh.push(f.clone());
            let renamed = body.subst_map(&BTreeMap::from([(chan.clone(), f)]));
            split_copy(&renamed, env, parts, fresh);
        }
        other => parts.push(other.clone()),
    }
}

fn atom_caps(atom: &Atom, env: &mut Env<'_>) -> Caps {
    match atom {
        Atom::Proc { loc, body } => caps_of(loc, None, body, env),
        Atom::Monitor { loc, ctx_loc, ctx_idx, body } => {
            let ctx = Ctx { loc: ctx_loc.clone(), idx: ctx_idx.clone() };
            caps_of(loc, Some(&ctx), body, env)
        }
        Atom::Trace { loc, chan, args, ts } => Caps {
            outs: vec![OutCap {
                subject: chan.clone(),
                payload: args.clone(),
                kind: TagKind::T,
                from: loc.clone(),
                ts: Some(*ts),
                residual: vec![Piece::Atom(atom.clone())],
                traced_at: None,
                fresh: Vec::new(),
            }],
            ..Caps::default()
        },
    }
}

/// The result of expanding one configuration.
#[derive(Debug, Clone, Default)]
pub struct Successors {
    pub transitions: Vec<(Action, Config)>,
    /// Some replication ran out of unfolding budget while it could still act.
    pub blocked: bool,
}

struct Builder<'a> {
    config: &'a Config,
}

impl Builder<'_> {
    fn target(
        &self,
        replaced: &[(usize, Vec<Piece>)],
        traced: Option<(&Name, &Name, &[Name])>,
        extra_bound: &[Name],
        unbind: &[Name],
        verdict: Option<&(Name, Verdict)>,
    ) -> Config {
        let sys = &self.config.system;
        let mut clocks = self.config.clocks.clone();
        let mut pieces: Vec<Piece> = Vec::with_capacity(sys.atoms.len() + 2);
        for (i, a) in sys.atoms.iter().enumerate() {
            match replaced.iter().find(|(j, _)| *j == i) {
                Some((_, rep)) => pieces.extend(rep.iter().cloned()),
                None => pieces.push(Piece::Atom(a.clone())),
            }
        }
        if let Some((loc, chan, args)) = traced {
            let ts = clocks.entry(loc.clone()).or_insert(0);
            pieces.push(Piece::Atom(Atom::Trace { loc: loc.clone(), chan: chan.clone(), args: args.to_vec(), ts: *ts }));
            *ts += 1;
        }
        let mut bound: Vec<Name> = sys.bound.iter().chain(extra_bound).filter(|b| !unbind.contains(b)).cloned().collect();
        bound.dedup();
        let mut verdicts = self.config.verdicts.clone();
        if let Some(v) = verdict {
            verdicts.push(v.clone());
            verdicts.sort();
        }
        Config::from_norm(NormSystem::build(&bound, pieces), clocks, verdicts)
    }
}

/// Checks whether an output and an input capability can synchronise and
/// returns the shared tag. Open endpoints match any location.
pub fn match_communication(out: &Action, inp: &Action) -> Option<Tag> {
    if out.kind != ActionKind::Output || inp.kind != ActionKind::Input {
        return None;
    }
    if out.subject != inp.subject || out.payload.len() != inp.payload.len() || out.payload != inp.payload {
        return None;
    }
    combine_tags(&out.tag, &inp.tag)
}

fn combine_tags(out: &Tag, inp: &Tag) -> Option<Tag> {
    if out.kind != inp.kind {
        return None;
    }
    let endpoint = |a: &Option<Name>, b: &Option<Name>| match (a, b) {
        (Some(x), Some(y)) if x != y => None,
        (Some(x), _) | (None, Some(x)) => Some(Some(x.clone())),
        (None, None) => Some(None),
    };
    let from = endpoint(&out.from, &inp.from)?;
    let to = endpoint(&out.to, &inp.to)?;
    if out.kind == TagKind::T && out.ts != inp.ts {
        return None;
    }
    Some(Tag { kind: out.kind, from, to, ts: out.ts.or(inp.ts) })
}

fn out_tag(o: &OutCap) -> Tag {
    Tag::new(o.kind, Some(o.from.clone()), None, o.ts)
}

fn in_tag(i: &InCap) -> Tag {
    Tag::new(i.kind, i.from.clone(), Some(i.to.clone()), i.ts)
}

fn cartesian(values: &[Name], arity: usize) -> Vec<Vec<Name>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Whether an exhausted replication could take part in some step.
fn budget_hit(caps: &[Caps], bound: &[Name], opts: &EngineOptions) -> bool {
    let spent: Vec<Caps> = caps.iter().map(Caps::all_spent).collect();
    if spent.iter().all(Caps::is_empty) {
        return false;
    }
    let restricted = |n: &Name, fresh: &[Name]| bound.contains(n) || fresh.contains(n);
    let pairs = |o: &OutCap, i: &InCap| {
        i.subject == o.subject && i.arity == o.payload.len() && combine_tags(&out_tag(o), &in_tag(i)).is_some()
    };
    for (k, sp) in spent.iter().enumerate() {
        if !sp.taus.is_empty() {
            return true;
        }
        for o in &sp.outs {
            let shown = if o.kind == TagKind::T { opts.trace_outputs } else { opts.open_outputs };
            if shown && !restricted(&o.subject, &o.fresh) {
                return true;
            }
            let any_reader = caps.iter().chain(&spent).enumerate().any(|(j, c)| j % caps.len() != k && c.ins.iter().any(|i| pairs(o, i)));
            if any_reader {
                return true;
            }
        }
        for i in &sp.ins {
            if !opts.env_values.is_empty() && i.kind != TagKind::T && !restricted(&i.subject, &i.fresh) {
                return true;
            }
            let any_writer = caps.iter().chain(&spent).enumerate().any(|(j, c)| j % caps.len() != k && c.outs.iter().any(|o| pairs(o, i)));
            if any_writer {
                return true;
            }
        }
    }
    false
}

/// All transitions of `config`, plus whether a replication budget was hit.
pub fn successors(config: &Config, opts: &EngineOptions) -> Successors {
    let sys = &config.system;
    let mut used = BTreeSet::new();
    for a in &sys.atoms {
        a.to_system().all_names(&mut used);
    }
    used.extend(sys.bound.iter().cloned());
    let mut env = Env { clocks: &config.clocks, used };
    let caps: Vec<Caps> = sys.atoms.iter().map(|a| atom_caps(a, &mut env)).collect();
    let b = Builder { config };
    let bound: &[Name] = &sys.bound;
    let mut out = Successors { transitions: Vec::new(), blocked: budget_hit(&caps, bound, opts) };

    // Internal steps of single components.
    for (i, c) in caps.iter().enumerate() {
        for t in &c.taus {
            let target = b.target(&[(i, t.residual.clone())], None, &t.fresh, &[], t.verdict.as_ref());
            let action = match (&t.verdict, opts.observe_verdicts) {
                (Some((_, v)), true) => Action {
                    kind: ActionKind::Output,
                    tag: t.tag.clone(),
                    subject: Some(Name::id(&v.to_string())),
                    payload: Vec::new(),
                    extruded: Vec::new(),
                },
                _ => Action::tau(t.tag.clone()),
            };
            out.transitions.push((action, target));
        }
    }

    // Communication between two distinct components.
    for (i, ci) in caps.iter().enumerate() {
        for o in &ci.outs {
            for (j, cj) in caps.iter().enumerate() {
                if i == j {
                    continue;
                }
                for inp in &cj.ins {
                    if inp.subject != o.subject || inp.arity != o.payload.len() {
                        continue;
                    }
                    let Some(tag) = combine_tags(&out_tag(o), &in_tag(inp)) else { continue };
                    let mut fresh = o.fresh.clone();
                    fresh.extend(inp.fresh.iter().cloned());
                    let replaced = [(i, o.residual.clone()), (j, inp.instantiate(&o.payload))];
                    let traced = o.traced_at.as_ref().map(|l| (l, &o.subject, o.payload.as_slice()));
                    let target = b.target(&replaced, traced, &fresh, &[], None);
                    out.transitions.push((Action::tau(tag), target));
                }
            }
        }
    }

    // Skip: a monitor moves past a log entry on a channel it is not querying.
    for (j, a) in sys.atoms.iter().enumerate() {
        let Atom::Monitor { loc, ctx_loc, ctx_idx: Name::Idx(n), body } = a else { continue };
        if caps[j].queries.is_empty() {
            continue;
        }
        let entry = sys.traces().find(|(l, _, _, ts)| *l == ctx_loc && *ts == *n);
        if let Some((_, chan, _, _)) = entry {
            if !caps[j].queries.contains(chan) {
                let moved = Piece::Monitor { loc: loc.clone(), ctx_loc: ctx_loc.clone(), ctx_idx: Name::Idx(n + 1), body: body.clone() };
                let target = b.target(&[(j, vec![moved])], None, &[], &[], None);
                let tag = Tag::new(TagKind::T, Some(ctx_loc.clone()), Some(loc.clone()), Some(*n));
                out.transitions.push((Action::tau(tag), target));
            }
        }
    }

    // External outputs.
    if opts.open_outputs || opts.trace_outputs {
        for (i, c) in caps.iter().enumerate() {
            for o in &c.outs {
                let shown = if o.kind == TagKind::T { opts.trace_outputs } else { opts.open_outputs };
                if !shown {
                    continue;
                }
                let restricted = |n: &Name| bound.contains(n) || o.fresh.contains(n);
                if restricted(&o.subject) {
                    continue;
                }
                let mut extruded: Vec<Name> = Vec::new();
                for p in &o.payload {
                    if restricted(p) && !extruded.contains(p) {
                        extruded.push(p.clone());
                    }
                }
                let traced = o.traced_at.as_ref().map(|l| (l, &o.subject, o.payload.as_slice()));
                let target = b.target(&[(i, o.residual.clone())], traced, &o.fresh, &extruded, None);
                let action = Action {
                    kind: ActionKind::Output,
                    tag: out_tag(o),
                    subject: Some(o.subject.clone()),
                    payload: o.payload.clone(),
                    extruded,
                };
                out.transitions.push((action, target));
            }
        }
    }

    // External inputs from a finite value universe.
    if !opts.env_values.is_empty() {
        for (j, c) in caps.iter().enumerate() {
            for inp in &c.ins {
                if inp.kind == TagKind::T || bound.contains(&inp.subject) || inp.fresh.contains(&inp.subject) {
                    continue;
                }
                for values in cartesian(&opts.env_values, inp.arity) {
                    let target = b.target(&[(j, inp.instantiate(&values))], None, &inp.fresh, &[], None);
                    let action = Action {
                        kind: ActionKind::Input,
                        tag: in_tag(inp),
                        subject: Some(inp.subject.clone()),
                        payload: values,
                        extruded: Vec::new(),
                    };
                    out.transitions.push((action, target));
                }
            }
        }
    }

    out.transitions.sort();
    out.transitions.dedup();
    out
}

/// Every transition derivable from `config`; a stuck configuration yields none.
pub fn enabled_transitions(config: &Config, opts: &EngineOptions) -> Vec<(Action, Config)> {
    successors(config, opts).transitions
}
