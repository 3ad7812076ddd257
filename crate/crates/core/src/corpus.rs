//! Seeded generator of contracts paired with scripted systems.
//!
//! Every case draws a contract over three locations and two channels, samples
//! one word of its language, sprinkles in noise events and turns the result
//! into one sequential output process per location.

use crate::name::Name;
use crate::oracle::LocatedEvent;
use crate::syntax::{Contract, Proc, System};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const LOCATIONS: [&str; 3] = ["l", "k", "h"];
pub const CHANNELS: [&str; 2] = ["c", "d"];
pub const VALUES: [&str; 2] = ["v", "w"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusParams {
    pub max_depth: usize,
    pub max_events: usize,
    /// One case in `single_every` keeps all events at one location.
    pub single_every: usize,
    pub max_star_iterations: usize,
    pub max_contract_events: usize,
    /// Chance that a node with spare depth is wrapped in the (single) star.
    pub star_prob: f64,
    pub noise: f64,
    /// Chance that one event of the sampled word is replaced at random.
    pub perturb: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams { max_depth: 3, max_events: 5, single_every: 3, max_star_iterations: 2, max_contract_events: 4, star_prob: 0.15, noise: 0.3, perturb: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusCase {
    pub id: usize,
    pub contract: Contract,
    pub system: System,
    /// The scripted word in the order it was sampled.
    pub script: Vec<LocatedEvent>,
    pub single_location: bool,
}

impl CorpusCase {
    /// Events each location emits, in program order.
    pub fn local_scripts(&self) -> BTreeMap<Name, Vec<LocatedEvent>> {
        let mut out: BTreeMap<Name, Vec<LocatedEvent>> = BTreeMap::new();
        for e in &self.script {
            out.entry(e.loc.clone()).or_default().push(e.clone());
        }
        out
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    params: &'a CorpusParams,
}

impl Gen<'_> {
    fn event(&mut self, loc: Option<&str>) -> Contract {
        let chan = *CHANNELS.choose(&mut self.rng).expect("channels");
        let values = if self.rng.gen_bool(0.5) { vec![Name::id(VALUES.choose(&mut self.rng).expect("values"))] } else { Vec::new() };
        let loc = loc.unwrap_or_else(|| LOCATIONS.choose(&mut self.rng).expect("locations"));
        Contract::event(chan, values, loc)
    }

    fn contract(&mut self, loc: Option<&str>) -> Contract {
        let events = *[1, 2, 2, 3, 3, 4].choose(&mut self.rng).expect("sizes");
        let mut star_left = true;
        self.shape(self.params.max_depth, events.min(self.params.max_contract_events), loc, &mut star_left)
    }

    /// A contract with exactly `events` basic events and depth at most `depth`.
    fn shape(&mut self, depth: usize, events: usize, loc: Option<&str>, star_left: &mut bool) -> Contract {
        let needed = usize::BITS as usize - (events - 1).leading_zeros() as usize;
        if depth > needed && *star_left && self.rng.gen_bool(self.params.star_prob) {
            *star_left = false;
            return Contract::star(self.shape(depth - 1, events, loc, star_left));
        }
        if events == 1 {
            return self.event(loc);
        }
        let max_left = events - 1;
        let half = 1usize << (depth - 1).min(usize::BITS as usize - 1);
        let lo = events.saturating_sub(half).max(1);
        let left = self.rng.gen_range(lo..=max_left.min(half));
        let (a, b) = (self.shape(depth - 1, left, loc, star_left), self.shape(depth - 1, events - left, loc, star_left));
        if self.rng.gen_bool(0.6) {
            Contract::seq(a, b)
        } else {
            Contract::choice(a, b)
        }
    }

    fn word(&mut self, e: &Contract, out: &mut Vec<LocatedEvent>) {
        match e {
            Contract::Event { chan, values, loc } => out.push(LocatedEvent { loc: loc.clone(), chan: chan.clone(), values: values.clone() }),
            Contract::Seq(a, b) => {
                self.word(a, out);
                self.word(b, out);
            }
            Contract::Choice(a, b) => {
                let pick = if self.rng.gen_bool(0.5) { a } else { b };
                self.word(pick, out);
            }
            Contract::Star(a) => {
                for _ in 0..self.rng.gen_range(0..=self.params.max_star_iterations) {
                    self.word(a, out);
                }
            }
        }
    }

    fn noise_event(&mut self, loc: Option<&str>) -> LocatedEvent {
        match self.event(loc) {
            Contract::Event { chan, values, loc } => LocatedEvent { loc, chan, values },
            _ => unreachable!("event builder"),
        }
    }

    fn script(&mut self, e: &Contract, loc: Option<&str>) -> Vec<LocatedEvent> {
        let mut word = Vec::new();
        for _ in 0..8 {
            word.clear();
            self.word(e, &mut word);
            if word.len() <= self.params.max_events {
                break;
            }
        }
        word.truncate(self.params.max_events);
        if !word.is_empty() && self.rng.gen_bool(self.params.perturb) {
            let at = self.rng.gen_range(0..word.len());
            word[at] = self.noise_event(loc);
        }
        while word.len() < self.params.max_events && self.rng.gen_bool(self.params.noise) {
            let at = self.rng.gen_range(0..=word.len());
            let ev = self.noise_event(loc);
            word.insert(at, ev);
        }
        if word.is_empty() {
            word.push(self.noise_event(loc));
        }
        word
    }
}

/// One sequential output process per location, locations in a fixed order.
pub fn scripted_system(script: &[LocatedEvent]) -> System {
    let mut per_loc: Vec<(Name, Vec<&LocatedEvent>)> = Vec::new();
    for e in script {
        match per_loc.iter_mut().find(|(l, _)| *l == e.loc) {
            Some((_, evs)) => evs.push(e),
            None => per_loc.push((e.loc.clone(), vec![e])),
        }
    }
    per_loc.sort_by_key(|(l, _)| LOCATIONS.iter().position(|x| Name::id(x) == *l).unwrap_or(usize::MAX));
    let parts = per_loc
        .into_iter()
        .map(|(loc, evs)| {
            let body = evs.into_iter().rev().fold(Proc::Stop, |cont, e| Proc::out(e.chan.clone(), e.values.clone(), cont));
            System::located(loc, body)
        })
        .collect();
    System::par_all(parts).expect("nonempty script")
}

/// A deterministic corpus of `count` cases.
pub fn generate(seed: u64, count: usize, params: &CorpusParams) -> Vec<CorpusCase> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), params };
    (0..count)
        .map(|id| {
            let single = params.single_every > 0 && id % params.single_every == 0;
            let loc = single.then(|| *LOCATIONS.choose(&mut g.rng).expect("locations"));
            let contract = g.contract(loc);
            let script = g.script(&contract, loc);
            let system = scripted_system(&script);
            CorpusCase { id, contract, system, script, single_location: single }
        })
        .collect()
}
