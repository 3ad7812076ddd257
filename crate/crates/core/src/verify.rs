//! Checks compiled monitors against the reference matcher and each other.

use crate::bisim::{check_weak_bisim, BisimVerdict};
use crate::compile::{compile, CompileError, Placement, Strategy};
use crate::corpus::CorpusCase;
use crate::engine::{explore, ClockMap, EngineOptions, ExploreBounds, LtsGraph, StateId, Verdict};
use crate::filter::{Filter, FilteredLts};
use crate::oracle::{location_logs, oracle_match_prefix, some_linearization_violates, LocatedEvent};
use crate::syntax::{Contract, System};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

pub const STRATEGIES: [Strategy; 3] = [Strategy::Orchestration, Strategy::Choreography, Strategy::Migration];

/// States whose fail verdict no order-consistent linearization of their
/// logs justifies.
pub fn soundness_violations(e: &Contract, g: &LtsGraph) -> Vec<StateId> {
    let mut memo: HashMap<BTreeMap<_, Vec<LocatedEvent>>, bool> = HashMap::new();
    g.states
        .iter()
        .enumerate()
        .filter(|(_, c)| c.has_verdict(Verdict::Fail))
        .filter(|(_, c)| {
            let logs = location_logs(c);
            !*memo.entry(logs.clone()).or_insert_with(|| some_linearization_violates(e, &logs))
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn fail_reachable(g: &LtsGraph) -> bool {
    g.states.iter().any(|c| c.has_verdict(Verdict::Fail))
}

/// Monitored system for one strategy.
pub fn monitored(e: &Contract, system: &System, strategy: Strategy, p: &Placement) -> Result<System, CompileError> {
    Ok(System::par(system.clone(), compile(e, strategy, p)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRun {
    pub strategy: String,
    pub states: usize,
    pub edges: usize,
    pub truncated: bool,
    pub fail_reachable: bool,
    pub soundness_violations: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCheck {
    pub left: String,
    pub right: String,
    pub verdict: BisimVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub id: usize,
    pub contract: String,
    pub system: String,
    pub single_location: bool,
    pub runs: Vec<StrategyRun>,
    pub pairs: Vec<PairCheck>,
    /// Oracle verdict on the forced local trace, for single-location cases.
    pub oracle_on_script: Option<bool>,
}

impl CaseReport {
    pub fn truncated(&self) -> bool {
        self.runs.iter().any(|r| r.truncated)
    }

    pub fn all_bisimilar(&self) -> bool {
        self.pairs.iter().all(|p| p.verdict == BisimVerdict::Bisimilar)
    }

    pub fn soundness_violations(&self) -> usize {
        self.runs.iter().map(|r| r.soundness_violations).sum()
    }

    /// Whether fail reachability disagrees with the oracle on a
    /// non-truncated single-location run.
    pub fn completeness_mismatch(&self) -> bool {
        match self.oracle_on_script {
            Some(expected) => self.runs.iter().any(|r| !r.truncated && r.fail_reachable != expected),
            None => false,
        }
    }
}

pub fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Orchestration => "orch",
        Strategy::Choreography => "chor",
        Strategy::Migration => "mig",
    }
}

/// Explores the case under every strategy, checks soundness on each graph
/// and compares all pairs under the tag-erasing filter.
pub fn verify_case(case: &CorpusCase, p: &Placement, clocks: &ClockMap, bounds: &ExploreBounds) -> Result<CaseReport, CompileError> {
    let opts = EngineOptions::default();
    let ntg = Filter::ntg();
    let mut runs = Vec::new();
    let mut lts = Vec::new();
    for s in STRATEGIES {
        let t = Instant::now();
        let g = explore(&monitored(&case.contract, &case.system, s, p)?, clocks, &opts, bounds);
        runs.push(StrategyRun {
            strategy: strategy_name(s).to_string(),
            states: g.states.len(),
            edges: g.edges.len(),
            truncated: g.truncated,
            fail_reachable: fail_reachable(&g),
            soundness_violations: soundness_violations(&case.contract, &g).len(),
            elapsed: t.elapsed(),
        });
        lts.push(FilteredLts::from_graph(&g, &ntg));
    }
    let mut pairs = Vec::new();
    for i in 0..lts.len() {
        for j in i + 1..lts.len() {
            pairs.push(PairCheck {
                left: runs[i].strategy.clone(),
                right: runs[j].strategy.clone(),
                verdict: check_weak_bisim(&lts[i], &lts[j]).verdict,
            });
        }
    }
    let oracle_on_script = case.single_location.then(|| oracle_match_prefix(&case.contract, &case.script));
    Ok(CaseReport {
        id: case.id,
        contract: case.contract.to_string(),
        system: case.system.to_string(),
        single_location: case.single_location,
        runs,
        pairs,
        oracle_on_script,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractReport {
    pub strategy: String,
    pub states: usize,
    pub truncated: bool,
    pub fail_reachable: bool,
    pub soundness_violations: Vec<StateId>,
}

/// Compiles, composes and explores one contract against one system.
pub fn verify_contract(
    e: &Contract,
    system: &System,
    strategy: Strategy,
    p: &Placement,
    clocks: &ClockMap,
    bounds: &ExploreBounds,
) -> Result<ContractReport, CompileError> {
    let g = explore(&monitored(e, system, strategy, p)?, clocks, &EngineOptions::default(), bounds);
    Ok(ContractReport {
        strategy: strategy_name(strategy).to_string(),
        states: g.states.len(),
        truncated: g.truncated,
        fail_reachable: fail_reachable(&g),
        soundness_violations: soundness_violations(e, &g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::name::Name;
    use crate::parse::{parse_contract, parse_system};

    fn clocks() -> ClockMap {
        ["l", "k", "h"].iter().map(|l| (Name::id(l), 1)).collect()
    }

    #[test]
    fn violating_system_reaches_fail() {
        let e = parse_contract("(c,v)@k").unwrap();
        let sys = parse_system("k[[ c!<v> ]]").unwrap();
        for s in STRATEGIES {
            let r = verify_contract(&e, &sys, s, &Placement::at("h"), &clocks(), &ExploreBounds::default()).unwrap();
            assert!(r.fail_reachable && !r.truncated && r.soundness_violations.is_empty(), "{r:?}");
        }
    }

    #[test]
    fn silent_system_never_fails() {
        let e = parse_contract("(c,v)@k").unwrap();
        let sys = parse_system("k[[ d!<v> ]]").unwrap();
        for s in STRATEGIES {
            let r = verify_contract(&e, &sys, s, &Placement::at("h"), &clocks(), &ExploreBounds::default()).unwrap();
            assert!(!r.fail_reachable && !r.truncated, "{r:?}");
        }
    }
}
