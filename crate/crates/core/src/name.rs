//! Identifiers of the calculus.
//!
//! Channels, locations and variables share a single identifier namespace:
//! values communicated at runtime are identifiers of any sort (a location
//! read with `getI` is later used as a location by `setI` or in a
//! conditional), so equality has to be total across sorts. Log indices are
//! kept apart as natural-number literals.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// The syntactic sort of a name, as far as it can be told from the name itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameKind {
    /// A channel, location or variable identifier.
    Ident,
    /// A log index literal.
    Index,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Name {
    Id(Arc<str>),
    Idx(u64),
}

impl serde::Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Name {
    pub fn id(text: &str) -> Name {
        Name::Id(Arc::from(text))
    }

    pub fn idx(n: u64) -> Name {
        Name::Idx(n)
    }

    pub fn kind(&self) -> NameKind {
        match self {
            Name::Id(_) => NameKind::Ident,
            Name::Idx(_) => NameKind::Index,
        }
    }

    pub fn as_ident(&self) -> Option<&str> {
        match self {
            Name::Id(s) => Some(s),
            Name::Idx(_) => None,
        }
    }

    pub fn as_index(&self) -> Option<u64> {
        match self {
            Name::Idx(n) => Some(*n),
            Name::Id(_) => None,
        }
    }

    pub fn is_ident(&self) -> bool {
        matches!(self, Name::Id(_))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Name::Id(s) => f.write_str(s),
            Name::Idx(n) => write!(f, "{n}"),
        }
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::id(s)
    }
}

impl From<u64> for Name {
    fn from(n: u64) -> Self {
        Name::Idx(n)
    }
}

/// Reserved words of the concrete syntax; never valid identifiers.
pub const KEYWORDS: &[&str] = &[
    "stop", "if", "then", "else", "new", "trace", "sync", "getI", "setI", "go", "ok", "fail",
    "sum", "in",
];

/// Whether `text` is a well-formed identifier (`[a-zA-Z_][a-zA-Z0-9_']*`, not a keyword).
pub fn is_valid_ident(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'') && !KEYWORDS.contains(&text)
}

/// Returns `hint` if unused, otherwise `hint_n` for the least `n >= 1` not in `used`.
pub fn fresh_name(hint: &str, used: &BTreeSet<Name>) -> Name {
    let base = Name::id(hint);
    if !used.contains(&base) {
        return base;
    }
    (1u64..)
        .map(|n| Name::id(&format!("{hint}_{n}")))
        .find(|candidate| !used.contains(candidate))
        .expect("unbounded suffix search")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<Name> {
        names.iter().map(|n| Name::id(n)).collect()
    }

    #[test]
    fn fresh_name_returns_hint_when_unused() {
        assert_eq!(fresh_name("m", &set(&[])), Name::id("m"));
    }

    #[test]
    fn fresh_name_takes_least_suffix() {
        assert_eq!(fresh_name("m", &set(&["m"])), Name::id("m_1"));
        assert_eq!(fresh_name("s", &set(&["s", "s_1"])), Name::id("s_2"));
        assert_eq!(fresh_name("s", &set(&["s", "s_2"])), Name::id("s_1"));
    }

    #[test]
    fn identifiers_and_indices_never_collide() {
        assert_ne!(Name::id("1"), Name::idx(1));
        assert_eq!(Name::idx(3).kind(), NameKind::Index);
        assert_eq!(Name::id("l").kind(), NameKind::Ident);
    }

    #[test]
    fn identifier_validity() {
        assert!(is_valid_ident("s'"));
        assert!(is_valid_ident("_x1"));
        assert!(!is_valid_ident("1x"));
        assert!(!is_valid_ident("stop"));
        assert!(!is_valid_ident(""));
    }
}
