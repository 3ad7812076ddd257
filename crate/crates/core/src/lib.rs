//! A calculus of located processes, monitors and trace logs: syntax,
//! tagged transition semantics, observation filters, weak bisimulation and
//! compilation of trace contracts into monitors.

pub mod bisim;
pub mod compile;
pub mod corpus;
pub mod engine;
pub mod filter;
pub mod name;
pub mod normal;
pub mod oracle;
pub mod parse;
pub mod pretty;
pub mod simulate;
pub mod syntax;
pub mod verify;

pub use engine::{
    enabled_transitions, explore, explore_sequential, initial_config, Action, ActionKind, ClockMap, Config, EngineOptions, ExploreBounds,
    LtsGraph, Tag, TagKind, Verdict,
};
pub use name::{fresh_name, Name};
pub use normal::{normalize, NormSystem};
pub use parse::{parse_contract, parse_proc, parse_system, ParseError};
pub use syntax::{Contract, Proc, SyntaxError, System};
