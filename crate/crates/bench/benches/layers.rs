use criterion::{black_box, criterion_group, criterion_main, Criterion};
use e2gn2_core::autodiff::Tape;
use e2gn2_core::nets::{GraphNode, GraphState, NetConfig, NetworkKind, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(n: usize) -> GraphState {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let nodes = (0..n)
        .map(|_| GraphNode {
            h: (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            coords: (0..2)
                .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                .collect(),
        })
        .collect();
    GraphState::new(nodes, GraphState::fully_connected_edges(n)).unwrap()
}

fn bench_layers(c: &mut Criterion) {
    for kind in [NetworkKind::Gnn, NetworkKind::Egnn, NetworkKind::E2gn2] {
        let net = NetworkParams::init(NetConfig::graph(kind, 10, 2, 2, 0), 3).unwrap();
        let g = graph(6);

        c.bench_function(&format!("{}_forward", kind.name()), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let mut binder = net.binder();
                let emb = net.forward(&mut tape, &mut binder, black_box(&g)).unwrap();
                black_box(tape.value(emb.h).data[0]);
            })
        });

        c.bench_function(&format!("{}_forward_backward", kind.name()), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let mut binder = net.binder();
                let emb = net.forward(&mut tape, &mut binder, black_box(&g)).unwrap();
                let loss = tape.mean_all(emb.h).unwrap();
                black_box(tape.backward(loss).unwrap());
            })
        });
    }
}

criterion_group!(benches, bench_layers);
criterion_main!(benches);
