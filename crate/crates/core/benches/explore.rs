use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdpi::compile::{compile, Placement, Strategy};
use mdpi::{explore, explore_sequential, parse_contract, parse_system, ClockMap, EngineOptions, ExploreBounds, Name, System};

fn workloads() -> Vec<(&'static str, System, ClockMap)> {
    let clocks: ClockMap = [("l", 5), ("k", 9), ("h", 1)].iter().map(|(l, t)| (Name::id(l), *t)).collect();
    let sys = parse_system(include_str!("../../../data/relay.mdpi")).unwrap();
    let orch = parse_system(include_str!("../../../data/relay_monitor_orch.mdpi")).unwrap();
    let contract = parse_contract("((c,v)@k . (d,w)@l) + (c,w)@h").unwrap();
    let scripted = parse_system("l[[ d!<w>.c!<v> ]] | k[[ c!<v>.d!<> ]] | h[[ c!<w> ]]").unwrap();
    let monitor = compile(&contract, Strategy::Choreography, &Placement::at("h")).unwrap();
    vec![
        ("relay-orch", System::par(sys, orch), clocks.clone()),
        ("scripted-chor", System::par(scripted, monitor), clocks),
    ]
}

fn bench_explore(c: &mut Criterion) {
    let opts = EngineOptions::default();
    let bounds = ExploreBounds::default();
    let mut group = c.benchmark_group("explore");
    group.sample_size(10);
    for (name, system, clocks) in workloads() {
        group.bench_with_input(BenchmarkId::new("parallel", name), &system, |b, s| b.iter(|| explore(s, &clocks, &opts, &bounds)));
        group.bench_with_input(BenchmarkId::new("sequential", name), &system, |b, s| {
            b.iter(|| explore_sequential(s, &clocks, &opts, &bounds))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_explore);
criterion_main!(benches);
