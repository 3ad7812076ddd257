//! Pretty-printer emitting the concrete grammar accepted by [`crate::parse`].

use crate::name::Name;
use crate::syntax::{Contract, Proc, System};
use std::fmt::{self, Display, Write};

fn list(names: &[Name]) -> String {
    let mut s = String::new();
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{n}");
    }
    s
}

/// Collects a run of nested restrictions `new a.new b.P` into `([a,b], P)`.
fn proc_news(p: &Proc) -> (Vec<&Name>, &Proc) {
    let mut chans = Vec::new();
    let mut cur = p;
    while let Proc::New { chan, body } = cur {
        chans.push(chan);
        cur = body;
    }
    (chans, cur)
}

fn sys_news(s: &System) -> (Vec<&Name>, &System) {
    let mut chans = Vec::new();
    let mut cur = s;
    while let System::New { chan, body } = cur {
        chans.push(chan);
        cur = body;
    }
    (chans, cur)
}

fn join(names: &[&Name]) -> String {
    names.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

fn write_proc(p: &Proc, out: &mut String) {
    match p {
        Proc::Par(a, b) => {
            if matches!(**a, Proc::Par(..)) {
                out.push('(');
                write_proc(a, out);
                out.push(')');
            } else {
                write_prefix(a, out);
            }
            out.push_str(" | ");
            write_proc(b, out);
        }
        other => write_prefix(other, out),
    }
}

/// Writes a term in prefix position; parallel compositions get parentheses.
fn write_prefix(p: &Proc, out: &mut String) {
    match p {
        Proc::Par(..) => {
            out.push('(');
            write_proc(p, out);
            out.push(')');
        }
        Proc::Stop => out.push_str("stop"),
        Proc::Ok => out.push_str("ok"),
        Proc::Fail => out.push_str("fail"),
        Proc::Out { subject, args, cont } => {
            let _ = write!(out, "{subject}!<{}>", list(args));
            if **cont != Proc::Stop {
                out.push('.');
                write_prefix(cont, out);
            }
        }
        Proc::In { subject, params, cont } => {
            let _ = write!(out, "{subject}?({}).", list(params));
            write_prefix(cont, out);
        }
        Proc::Query { subject, params, cont } => {
            let _ = write!(out, "{subject}?*({}).", list(params));
            write_prefix(cont, out);
        }
        Proc::New { .. } => {
            let (chans, body) = proc_news(p);
            let _ = write!(out, "new {}.", join(&chans));
            write_prefix(body, out);
        }
        Proc::If { lhs, rhs, then, els } => {
            let _ = write!(out, "if {lhs} = {rhs} then ");
            write_prefix(then, out);
            out.push_str(" else ");
            write_prefix(els, out);
        }
        Proc::Repeat { body, .. } => {
            out.push_str("!(");
            write_proc(body, out);
            out.push(')');
        }
        Proc::Monitor { body, ctx_loc, ctx_idx } => {
            out.push_str("{ ");
            write_proc(body, out);
            let _ = write!(out, " }}@({ctx_loc},{ctx_idx})");
        }
        Proc::Trace { chan, args, ts } => {
            let _ = write!(out, "trace {chan}<{}>@{ts}", list(args));
        }
        Proc::Sync { loc, cont } => {
            let _ = write!(out, "sync {loc}.");
            write_prefix(cont, out);
        }
        Proc::Go { loc, cont } => {
            let _ = write!(out, "go {loc}.");
            write_prefix(cont, out);
        }
        Proc::GetI { loc_var, idx_var, cont } => {
            let _ = write!(out, "getI({loc_var},{idx_var}).");
            write_prefix(cont, out);
        }
        Proc::SetI { loc, idx, cont } => {
            let _ = write!(out, "setI({loc},{idx}).");
            write_prefix(cont, out);
        }
    }
}

fn write_system(s: &System, out: &mut String) {
    match s {
        System::Par(a, b) => {
            if matches!(**a, System::Par(..)) {
                out.push('(');
                write_system(a, out);
                out.push(')');
            } else {
                write_system(a, out);
            }
            out.push_str(" | ");
            write_system(b, out);
        }
        System::New { .. } => {
            let (chans, body) = sys_news(s);
            let _ = write!(out, "new {}.(", join(&chans));
            write_system(body, out);
            out.push(')');
        }
        System::Located { loc, body: Proc::Monitor { body, ctx_loc, ctx_idx } } => {
            let _ = write!(out, "{loc}[[ ");
            write_proc(body, out);
            let _ = write!(out, " ]]@({ctx_loc},{ctx_idx})");
        }
        System::Located { loc, body } => {
            let _ = write!(out, "{loc}[[ ");
            write_proc(body, out);
            out.push_str(" ]]");
        }
    }
}

fn write_contract(c: &Contract, out: &mut String) {
    match c {
        Contract::Event { chan, values, loc } => {
            if values.len() == 1 {
                let _ = write!(out, "({chan},{})@{loc}", values[0]);
            } else {
                let _ = write!(out, "({chan},({}))@{loc}", list(values));
            }
        }
        Contract::Seq(a, b) => {
            paren_if(a, matches!(**a, Contract::Seq(..) | Contract::Choice(..)), out);
            out.push_str(" . ");
            paren_if(b, matches!(**b, Contract::Choice(..)), out);
        }
        Contract::Choice(a, b) => {
            paren_if(a, matches!(**a, Contract::Choice(..)), out);
            out.push_str(" + ");
            write_contract(b, out);
        }
        Contract::Star(a) => {
            paren_if(a, matches!(**a, Contract::Seq(..) | Contract::Choice(..)), out);
            out.push('*');
        }
    }
}

fn paren_if(c: &Contract, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_contract(c, out);
        out.push(')');
    } else {
        write_contract(c, out);
    }
}

impl Display for Proc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_proc(self, &mut s);
        f.write_str(&s)
    }
}

impl Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_system(self, &mut s);
        f.write_str(&s)
    }
}

impl Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_contract(self, &mut s);
        f.write_str(&s)
    }
}
