mod common;

use common::{make_axonal, matches_oracle, oracle_forward, random_instance, Instance};
use proptest::prelude::*;
use synaptic_delays::delayq::{run_backend, Backend, BackendOptions, BackendRun, WvuMatrix};
use synaptic_delays::{forward_dense, DelaySet, DelayWeights, NetworkModel, Raster, SimTrace};

const SUITE: u64 = 200;

fn opts(wvu_filter: bool) -> BackendOptions {
    BackendOptions {
        wvu_filter,
        record_events: true,
        ..BackendOptions::default()
    }
}

fn run(backend: Backend, inst: &Instance, o: &BackendOptions) -> BackendRun {
    run_backend(backend, &inst.model, &inst.raster, o).unwrap()
}

fn presynaptic(inst: &Instance, trace: &SimTrace, c: usize, t: usize) -> Vec<bool> {
    if c == 0 {
        inst.raster.frame(t).to_vec()
    } else {
        trace.layers[c - 1].spikes_at(t).to_vec()
    }
}

fn assert_same(a: &SimTrace, b: &SimTrace, what: &str) {
    assert!(
        a.bitwise_eq(b),
        "{what}: first difference at {:?}",
        a.first_difference(b)
    );
}

#[test]
fn dense_executor_matches_the_naive_oracle() {
    for seed in 0..SUITE {
        let inst = random_instance(seed);
        let trace = forward_dense(&inst.model, &inst.raster).unwrap();
        let oracle = oracle_forward(&inst.model, &inst.raster);
        if let Err(e) = matches_oracle(&trace, &oracle) {
            panic!("seed {seed}: {e}");
        }
    }
}

#[test]
fn suite_exercises_spiking_in_every_layer() {
    let active = (0..SUITE)
        .filter(|&seed| {
            let inst = random_instance(seed);
            let trace = forward_dense(&inst.model, &inst.raster).unwrap();
            trace.layers.iter().all(|l| l.spike_count() > 0)
        })
        .count();
    assert!(
        active as u64 >= SUITE / 2,
        "only {active} instances spike in every layer"
    );
}

#[test]
fn event_backends_are_bit_identical_to_dense() {
    for seed in 0..SUITE {
        let inst = random_instance(seed);
        let dense = forward_dense(&inst.model, &inst.raster).unwrap();
        for filter in [true, false] {
            let scdq = run(Backend::Scdq, &inst, &opts(filter));
            assert_same(
                &scdq.trace,
                &dense,
                &format!("seed {seed} scdq filter={filter}"),
            );
        }
        let ring = run(Backend::Ring, &inst, &opts(true));
        assert_same(&ring.trace, &dense, &format!("seed {seed} ring"));
    }
}

#[test]
fn shared_queue_is_bit_identical_on_axonal_models() {
    for seed in 0..SUITE {
        let mut inst = random_instance(seed);
        make_axonal(&mut inst.model, seed);
        assert!(synaptic_delays::delayq::is_axonal(&inst.model));
        let dense = forward_dense(&inst.model, &inst.raster).unwrap();
        let shared = run(Backend::SharedQ, &inst, &opts(true));
        assert_same(&shared.trace, &dense, &format!("seed {seed} sharedq"));
        let scdq = run(Backend::Scdq, &inst, &opts(true));
        assert_same(&scdq.trace, &dense, &format!("seed {seed} scdq on axonal"));
    }
}

#[test]
fn wvu_filter_changes_nothing_but_the_traffic() {
    for seed in 0..SUITE {
        let inst = random_instance(seed);
        let on = run(Backend::Scdq, &inst, &opts(true));
        let off = run(Backend::Scdq, &inst, &opts(false));
        assert_same(&on.trace, &off.trace, &format!("seed {seed}"));
        for (c, (a, b)) in on.queues.iter().zip(&off.queues).enumerate() {
            assert!(a.deliveries <= b.deliveries, "seed {seed} connection {c}");
            assert!(
                a.recirculations <= b.recirculations,
                "seed {seed} connection {c}"
            );
        }
        // the filtered queue delivers exactly the useful events the dense
        // executor reads from its spike history
        let dense = run(Backend::Dense, &inst, &opts(true));
        assert_eq!(
            on.events.as_ref().unwrap().canonical(),
            dense.events.as_ref().unwrap().canonical(),
            "seed {seed}"
        );
    }
}

#[test]
fn scdq_occupancy_stays_within_the_analytic_bound() {
    for seed in 0..SUITE {
        let inst = random_instance(seed);
        for filter in [true, false] {
            let r = run(Backend::Scdq, &inst, &opts(filter));
            for (c, (q, act)) in r.queues.iter().zip(&r.activity).enumerate() {
                let slots = inst.model.connection(c).delays().max_level() + 1;
                // alpha * I is the peak number of simultaneously active sources
                let bound = act.max_active * (2 * slots - 1);
                assert!(
                    q.peak_occupancy() <= bound,
                    "seed {seed} connection {c}: {} > {bound}",
                    q.peak_occupancy()
                );
                let alpha = act.max_activation_fraction();
                assert!(
                    q.peak_occupancy() as f64
                        <= alpha * act.presynaptic as f64 * (2 * slots - 1) as f64 + 1e-9
                );
            }
        }
    }
}

/// Every spike is either queued or dropped, and a queued event from source
/// `i` pushed at `t` recirculates `min(r_i, T - t)` times, where `r_i` is the
/// largest useful delay of `i`.
#[test]
fn scdq_traffic_follows_the_residency_rule() {
    for seed in 0..SUITE {
        let inst = random_instance(seed);
        let steps = inst.model.timesteps();
        for filter in [true, false] {
            let r = run(Backend::Scdq, &inst, &opts(filter));
            for (c, w) in inst.model.connections().iter().enumerate() {
                let wvu = if filter {
                    WvuMatrix::build(w)
                } else {
                    WvuMatrix::all_ones(w.pre(), w.num_levels())
                };
                let levels = w.delays().levels();
                let (mut spikes, mut dropped, mut recirc) = (0u64, 0u64, 0u64);
                for t in 0..steps {
                    for (i, _) in presynaptic(&inst, &r.trace, c, t)
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s)
                    {
                        spikes += 1;
                        match wvu.max_residency(i) {
                            k if k < 0 => dropped += 1,
                            k => recirc += levels[k as usize].min(steps - t) as u64,
                        }
                    }
                }
                let q = &r.queues[c];
                assert_eq!(q.pushes + q.dropped, spikes, "seed {seed} connection {c}");
                assert_eq!(q.dropped, dropped, "seed {seed} connection {c}");
                assert_eq!(q.recirculations, recirc, "seed {seed} connection {c}");
                assert_eq!(r.activity[c].total_spikes, spikes);
            }
        }
    }
}

#[test]
fn suite_runs_within_a_minute() {
    let start = std::time::Instant::now();
    for seed in 0..SUITE {
        let inst = random_instance(seed);
        for b in [Backend::Dense, Backend::Scdq, Backend::Ring] {
            run(b, &inst, &opts(true));
        }
    }
    assert!(start.elapsed().as_secs() < 60);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Spikes at or after `t` cannot influence anything before `t`.
    #[test]
    fn traces_are_causal(seed in any::<u64>(), cut in 1usize..32) {
        let inst = random_instance(seed);
        let steps = inst.model.timesteps();
        let cut = cut.min(steps);
        let full = forward_dense(&inst.model, &inst.raster).unwrap();
        let mut short = inst.model.clone();
        short.set_timesteps(cut).unwrap();
        let prefix = forward_dense(&short, &inst.raster.truncated(cut)).unwrap();
        let mut altered = inst.raster.clone();
        for t in cut..steps {
            for c in 0..altered.channels() {
                altered.set(t, c, !altered.get(t, c));
            }
        }
        let other = forward_dense(&inst.model, &altered).unwrap();
        for (l, layer) in prefix.layers.iter().enumerate() {
            let n = layer.spikes.len();
            prop_assert_eq!(&layer.spikes[..], &full.layers[l].spikes[..n]);
            prop_assert_eq!(&layer.vmem[..], &full.layers[l].vmem[..n]);
            prop_assert_eq!(&other.layers[l].spikes[..n], &full.layers[l].spikes[..n]);
        }
    }

    /// Weights only at delay 0 reduce the network to a delay-free one.
    #[test]
    fn zero_delay_weights_reduce_to_a_plain_network(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let mut only_zero = inst.model.clone();
        for w in only_zero.connections_mut() {
            let per_level = w.pre() * w.post();
            let first = w.delays().levels()[0];
            w.update_live(|idx, v| if idx < per_level && first == 0 { v } else { 0.0 });
        }
        let plain_sets: Vec<DelaySet> = (0..only_zero.num_layers()).map(|_| DelaySet::zero()).collect();
        let mut plain = NetworkModel::zeros(only_zero.widths(), &plain_sets, only_zero.neurons()[0], only_zero.timesteps()).unwrap();
        plain.set_neurons(only_zero.neurons().to_vec()).unwrap();
        plain.set_readout(only_zero.readout());
        for (dst, src) in plain.connections_mut().iter_mut().zip(only_zero.connections()) {
            let per_level = src.pre() * src.post();
            let zero_row: Vec<f64> = if src.delays().levels()[0] == 0 {
                src.weights()[..per_level].to_vec()
            } else {
                vec![0.0; per_level]
            };
            *dst = DelayWeights::from_parts(DelaySet::zero(), src.pre(), src.post(), zero_row, vec![true; per_level]).unwrap();
        }
        let a = forward_dense(&only_zero, &inst.raster).unwrap();
        let b = forward_dense(&plain, &inst.raster).unwrap();
        prop_assert!(a.bitwise_eq(&b), "{:?}", a.first_difference(&b));
        let q = run_backend(Backend::Scdq, &only_zero, &inst.raster, &opts(true)).unwrap();
        prop_assert!(q.trace.bitwise_eq(&b));
    }

    #[test]
    fn executors_are_deterministic(seed in any::<u64>()) {
        let inst = random_instance(seed);
        for b in [Backend::Dense, Backend::Scdq, Backend::Ring] {
            let x = run(b, &inst, &opts(true));
            let y = run(b, &inst, &opts(true));
            prop_assert!(x.trace.bitwise_eq(&y.trace));
            prop_assert_eq!(x.queues, y.queues);
            prop_assert_eq!(x.events, y.events);
        }
    }
}

#[test]
fn empty_raster_produces_no_traffic() {
    let inst = random_instance(3);
    let silent = Raster::new(inst.model.timesteps(), inst.model.input_width());
    let quiet = Instance {
        model: inst.model,
        raster: silent,
    };
    let r = run(Backend::Scdq, &quiet, &opts(true));
    assert!(r
        .queues
        .iter()
        .all(|q| q.pushes == 0 && q.peak_occupancy() == 0));
    assert!(r.trace.layers.iter().all(|l| l.spike_count() == 0));
}
