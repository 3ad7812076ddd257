//! Recursive-descent parser for systems and contracts.

use crate::name::{Name, KEYWORDS};
use crate::syntax::{validate_system, Contract, Proc, SyntaxError, System};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("empty index set in generalised sum over `{0}`")]
    EmptySum(String),
    #[error(transparent)]
    Invalid(#[from] SyntaxError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    Keyword(&'static str),
    OpenLoc,
    CloseLoc,
    Bar,
    Dot,
    Comma,
    LParen,
    RParen,
    Lt,
    Gt,
    Bang,
    QueryMark,
    Question,
    Eq,
    At,
    LBrace,
    RBrace,
    Plus,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Nat(n) => write!(f, "number `{n}`"),
            Tok::Keyword(k) => write!(f, "`{k}`"),
            Tok::OpenLoc => f.write_str("`[[`"),
            Tok::CloseLoc => f.write_str("`]]`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::QueryMark => f.write_str("`?*`"),
            Tok::Question => f.write_str("`?`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::At => f.write_str("`@`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two = |a: char, b: char| c == a && chars.get(i + 1) == Some(&b);
        let tok = if two('[', '[') {
            advance(2, &mut i, &mut col);
            Tok::OpenLoc
        } else if two(']', ']') {
            advance(2, &mut i, &mut col);
            Tok::CloseLoc
        } else if two('?', '*') {
            advance(2, &mut i, &mut col);
            Tok::QueryMark
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            col += i - start;
            let word: String = chars[start..i].iter().collect();
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse().map_err(|_| ParseError::Syntax {
                line: start_line,
                col: start_col,
                msg: format!("number `{digits}` out of range"),
            })?;
            Tok::Nat(n)
        } else {
            let t = match c {
                '|' => Tok::Bar,
                '.' => Tok::Dot,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '!' => Tok::Bang,
                '?' => Tok::Question,
                '=' => Tok::Eq,
                '@' => Tok::At,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '+' => Tok::Plus,
                '*' => Tok::Star,
                other => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        msg: format!("unexpected character `{other}`"),
                    })
                }
            };
            advance(1, &mut i, &mut col);
            t
        };
        out.push(Spanned { tok, line: start_line, col: start_col });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(text: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let s = &self.toks[self.pos];
        Err(ParseError::Syntax { line: s.line, col: s.col, msg: msg.into() })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, k: &'static str) -> PResult<()> {
        self.expect(Tok::Keyword(k))
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Name::id(&s))
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.unexpected("number"),
        }
    }

    /// An identifier or an index literal.
    fn value(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Name::id(&s))
            }
            Tok::Nat(n) => {
                self.bump();
                Ok(Name::idx(n))
            }
            _ => self.unexpected("identifier or number"),
        }
    }

    fn comma_list<T>(&mut self, close: Tok, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(&close) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn idents_until_dot(&mut self) -> PResult<Vec<Name>> {
        let mut out = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            out.push(self.ident()?);
        }
        self.expect(Tok::Dot)?;
        Ok(out)
    }

    // ---- systems ----

    fn system(&mut self) -> PResult<System> {
        let first = self.system_item()?;
        if self.eat(&Tok::Bar) {
            let rest = self.system()?;
            Ok(System::par(first, rest))
        } else {
            Ok(first)
        }
    }

    fn system_item(&mut self) -> PResult<System> {
        match self.peek().clone() {
            Tok::Keyword("new") => {
                self.bump();
                let chans = self.idents_until_dot()?;
                self.expect(Tok::LParen)?;
                let body = self.system()?;
                self.expect(Tok::RParen)?;
                Ok(System::new_chans(&chans, body))
            }
            Tok::LParen => {
                self.bump();
                let s = self.system()?;
                self.expect(Tok::RParen)?;
                Ok(s)
            }
            Tok::Ident(_) => {
                let loc = self.ident()?;
                self.expect(Tok::OpenLoc)?;
                let body = self.proc()?;
                self.expect(Tok::CloseLoc)?;
                if self.eat(&Tok::At) {
                    let (ctx_loc, ctx_idx) = self.context()?;
                    Ok(System::located(loc, Proc::Monitor { body: Box::new(body), ctx_loc, ctx_idx }))
                } else {
                    Ok(System::located(loc, body))
                }
            }
            _ => self.unexpected("located process, `new` or `(`"),
        }
    }

    fn context(&mut self) -> PResult<(Name, Name)> {
        self.expect(Tok::LParen)?;
        let loc = self.value()?;
        self.expect(Tok::Comma)?;
        let idx = self.value()?;
        self.expect(Tok::RParen)?;
        Ok((loc, idx))
    }

    // ---- processes and monitors ----

    fn proc(&mut self) -> PResult<Proc> {
        let first = self.prefix_term()?;
        if self.eat(&Tok::Bar) {
            Ok(Proc::par(first, self.proc()?))
        } else {
            Ok(first)
        }
    }

    fn continuation(&mut self) -> PResult<Proc> {
        self.expect(Tok::Dot)?;
        self.prefix_term()
    }

    fn prefix_term(&mut self) -> PResult<Proc> {
        match self.peek().clone() {
            Tok::Keyword("stop") => {
                self.bump();
                Ok(Proc::Stop)
            }
            Tok::Keyword("ok") => {
                self.bump();
                Ok(Proc::Ok)
            }
            Tok::Keyword("fail") => {
                self.bump();
                Ok(Proc::Fail)
            }
            Tok::Keyword("if") => {
                self.bump();
                let lhs = self.value()?;
                self.expect(Tok::Eq)?;
                let rhs = self.value()?;
                self.keyword("then")?;
                let then = self.prefix_term()?;
                let els = if self.eat(&Tok::Keyword("else")) { self.prefix_term()? } else { Proc::Stop };
                Ok(Proc::if_eq(lhs, rhs, then, els))
            }
            Tok::Bang => {
                self.bump();
                Ok(Proc::repeat(self.prefix_term()?))
            }
            Tok::Keyword("new") => {
                self.bump();
                let chans = self.idents_until_dot()?;
                let body = self.prefix_term()?;
                Ok(chans.into_iter().rev().fold(body, |acc, c| Proc::new_chan(c, acc)))
            }
            Tok::Keyword("trace") => {
                self.bump();
                let chan = self.ident()?;
                self.expect(Tok::Lt)?;
                let args = self.comma_list(Tok::Gt, Self::value)?;
                self.expect(Tok::At)?;
                let ts = self.nat()?;
                Ok(Proc::Trace { chan, args, ts })
            }
            Tok::Keyword("sync") => {
                self.bump();
                let loc = self.ident()?;
                Ok(Proc::sync(loc, self.continuation()?))
            }
            Tok::Keyword("go") => {
                self.bump();
                let loc = self.ident()?;
                Ok(Proc::go(loc, self.continuation()?))
            }
            Tok::Keyword("getI") => {
                self.bump();
                self.expect(Tok::LParen)?;
                let a = self.ident()?;
                self.expect(Tok::Comma)?;
                let b = self.ident()?;
                self.expect(Tok::RParen)?;
                Ok(Proc::get_i(a, b, self.continuation()?))
            }
            Tok::Keyword("setI") => {
                self.bump();
                let (loc, idx) = self.context()?;
                Ok(Proc::set_i(loc, idx, self.continuation()?))
            }
            Tok::LBrace => {
                self.bump();
                let body = self.proc()?;
                self.expect(Tok::RBrace)?;
                self.expect(Tok::At)?;
                let (ctx_loc, ctx_idx) = self.context()?;
                Ok(Proc::Monitor { body: Box::new(body), ctx_loc, ctx_idx })
            }
            Tok::LParen => {
                self.bump();
                let p = self.proc()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(_) => {
                let subject = self.ident()?;
                match self.bump() {
                    Tok::Bang => {
                        self.expect(Tok::Lt)?;
                        let args = self.comma_list(Tok::Gt, Self::value)?;
                        let cont = if *self.peek() == Tok::Dot { self.continuation()? } else { Proc::Stop };
                        Ok(Proc::Out { subject, args, cont: Box::new(cont) })
                    }
                    Tok::Question => {
                        self.expect(Tok::LParen)?;
                        let params = self.comma_list(Tok::RParen, Self::ident)?;
                        Ok(Proc::input(subject, params, self.continuation()?))
                    }
                    Tok::QueryMark => {
                        self.expect(Tok::LParen)?;
                        let params = self.comma_list(Tok::RParen, Self::ident)?;
                        Ok(Proc::query(subject, params, self.continuation()?))
                    }
                    _ => {
                        self.pos -= 1;
                        self.unexpected("`!`, `?` or `?*` after channel")
                    }
                }
            }
            _ => self.unexpected("process"),
        }
    }

    // ---- contracts ----

    fn contract_sum(&mut self) -> PResult<Contract> {
        if *self.peek() == Tok::Keyword("sum") {
            self.bump();
            let var = self.ident()?;
            self.keyword("in")?;
            self.expect(Tok::LBrace)?;
            let set = self.comma_list(Tok::RBrace, Self::value)?;
            let body = self.contract_sum()?;
            let mut alts = set.iter().map(|v| body.substitute(&var, v)).collect::<Vec<_>>();
            let Some(mut acc) = alts.pop() else {
                return Err(ParseError::EmptySum(var.to_string()));
            };
            while let Some(a) = alts.pop() {
                acc = Contract::choice(a, acc);
            }
            Ok(acc)
        } else {
            self.contract_choice()
        }
    }

    fn contract_choice(&mut self) -> PResult<Contract> {
        let left = self.contract_seq()?;
        if self.eat(&Tok::Plus) {
            Ok(Contract::choice(left, self.contract_sum()?))
        } else {
            Ok(left)
        }
    }

    fn contract_seq(&mut self) -> PResult<Contract> {
        let left = self.contract_star()?;
        if self.eat(&Tok::Dot) {
            let right = if *self.peek() == Tok::Keyword("sum") { self.contract_sum()? } else { self.contract_seq()? };
            Ok(Contract::seq(left, right))
        } else {
            Ok(left)
        }
    }

    fn contract_star(&mut self) -> PResult<Contract> {
        let mut c = self.contract_atom()?;
        while self.eat(&Tok::Star) {
            c = Contract::star(c);
        }
        Ok(c)
    }

    fn contract_atom(&mut self) -> PResult<Contract> {
        self.expect(Tok::LParen)?;
        let is_event = matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Comma;
        if !is_event {
            let c = self.contract_sum()?;
            self.expect(Tok::RParen)?;
            return Ok(c);
        }
        let chan = self.ident()?;
        self.expect(Tok::Comma)?;
        let values = if self.eat(&Tok::LParen) {
            let vs = self.comma_list(Tok::RParen, Self::value)?;
            self.expect(Tok::RParen)?;
            vs
        } else {
            self.comma_list(Tok::RParen, Self::value)?
        };
        self.expect(Tok::At)?;
        let loc = self.ident()?;
        Ok(Contract::Event { chan, values, loc })
    }

    fn finish(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.unexpected("end of input")
        }
    }
}

/// Parses one system and checks monitor/process well-formedness.
pub fn parse_system(text: &str) -> Result<System, ParseError> {
    let mut p = Parser::new(text)?;
    let s = p.system()?;
    p.finish()?;
    validate_system(&s)?;
    Ok(s)
}

/// Parses a contract, expanding generalised sums into nested choices.
pub fn parse_contract(text: &str) -> Result<Contract, ParseError> {
    let mut p = Parser::new(text)?;
    let c = p.contract_sum()?;
    p.finish()?;
    Ok(c)
}

/// Parses a bare process or monitor term (no location).
pub fn parse_proc(text: &str) -> Result<Proc, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.proc()?;
    p.finish()?;
    Ok(t)
}
