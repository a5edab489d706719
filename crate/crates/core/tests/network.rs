mod common;

use common::{direct_q, fd_gradient, max_relative_error, random_topology, random_vec};
use dqlab::network::{
    ball_point, forward, local_lipschitz, q_bound_check, q_gradient, q_values, ActivationKind, Checkpoint,
    Initializer, StreamState, Topology,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..200 {
        let t = random_topology(&mut rng, None);
        let theta = random_vec(&mut rng, t.num_weights(), 1.0);
        let x = random_vec(&mut rng, t.input_dim(), 2.0);
        let q = q_values(&t, &theta, &x).unwrap();
        for (a, &qa) in q.iter().enumerate() {
            let direct = direct_q(&t, &theta, &x, a);
            assert!((qa - direct).abs() <= 1e-14 * (1.0 + direct.abs()), "{qa} vs {direct}");
        }
    }
}

#[test]
fn two_hidden_layer_net_matches_direct_evaluation() {
    let t = Topology::uniform(3, &[5, 4], ActivationKind::Tanh, 2, 3, ActivationKind::Sigmoid).unwrap();
    let theta = Initializer::UniformFanIn.initialize(&t, 9).unwrap();
    let x = [0.3, -1.2, 0.8];
    let q = q_values(&t, &theta, &x).unwrap();
    for a in 0..2 {
        assert!((q[a] - direct_q(&t, &theta, &x, a)).abs() <= 1e-14);
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let t = random_topology(&mut rng, None);
        let theta = random_vec(&mut rng, t.num_weights(), 1.0);
        let x = random_vec(&mut rng, t.input_dim(), 1.5);
        let a = rng.gen_range(0..t.num_actions());
        let g = q_gradient(&t, &theta, &x, a).unwrap();
        worst = worst.max(max_relative_error(&g, &fd_gradient(&t, &theta, &x, a, 1e-5)));
    }
    assert!(worst <= 1e-5, "max relative error {worst}");
}

#[test]
fn gradient_is_zero_outside_the_chosen_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..50 {
        let t = random_topology(&mut rng, None);
        let theta = random_vec(&mut rng, t.num_weights(), 1.0);
        let x = random_vec(&mut rng, t.input_dim(), 1.0);
        for a in 0..t.num_actions() {
            let g = q_gradient(&t, &theta, &x, a).unwrap();
            for b in (0..t.num_actions()).filter(|&b| b != a) {
                assert!(t.action_block(b).all(|i| g[i] == 0.0));
            }
        }
    }
}

#[test]
fn zero_output_weights_kill_hidden_gradients() {
    let t = Topology::uniform(2, &[3, 3], ActivationKind::Gelu, 2, 2, ActivationKind::Tanh).unwrap();
    let mut theta = Initializer::UniformFanIn.initialize(&t, 4).unwrap().into_inner();
    for a in 0..2 {
        for i in t.output_weights(a) {
            theta[i] = 0.0;
        }
    }
    let g = q_gradient(&t, &theta, &[0.5, -0.5], 1).unwrap();
    let first_output = t.output_weights(1).start;
    assert!(g[..first_output].iter().all(|&v| v == 0.0));
    assert!(g[first_output..].iter().any(|&v| v != 0.0));
}

#[test]
fn forward_trace_recomputes_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..50 {
        let t = random_topology(&mut rng, None);
        let theta = random_vec(&mut rng, t.num_weights(), 1.0);
        let x = random_vec(&mut rng, t.input_dim(), 1.0);
        let trace = forward(&t, &theta, &x).unwrap();
        let again = forward(&t, &theta, &trace.input).unwrap();
        assert_eq!(trace, again);
    }
}

#[test]
fn squashing_bound_survives_a_randomized_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut probes = 0;
    while probes < 10_000 {
        let kind = if rng.gen_bool(0.5) {
            ActivationKind::Sigmoid
        } else {
            ActivationKind::Tanh
        };
        let t = random_topology(&mut rng, Some(kind));
        let scale = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
        let theta = random_vec(&mut rng, t.num_weights(), scale);
        let states: Vec<Vec<f64>> = (0..10).map(|_| random_vec(&mut rng, t.input_dim(), 5.0)).collect();
        let report = q_bound_check(&t, &theta, &states).unwrap();
        assert!(report.passed(), "{:?}", report.violations.first());
        assert!(report.max_tight_ratio <= 1.0 + 1e-12);
        probes += report.probes;
    }
}

#[test]
fn zero_theta_meets_the_bound() {
    let t = Topology::uniform(2, &[3], ActivationKind::Sigmoid, 2, 2, ActivationKind::Sigmoid).unwrap();
    let report = q_bound_check(&t, &vec![0.0; t.num_weights()], &[vec![1.0, -1.0]]).unwrap();
    assert!(report.passed());
}

#[test]
fn local_lipschitz_estimate_bounds_fresh_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..5 {
        let t = random_topology(&mut rng, None);
        let theta = random_vec(&mut rng, t.num_weights(), 1.0);
        let x = random_vec(&mut rng, t.input_dim(), 1.0);
        let a = rng.gen_range(0..t.num_actions());
        let radius = 0.1;
        // Gradient sup over the ball, inflated by a margin for unprobed points.
        let l = 1.1 * local_lipschitz(&t, &theta, &x, a, radius, 1000, &mut rng).unwrap();
        for _ in 0..1000 {
            let p1 = ball_point(&theta, radius, &mut rng);
            let p2 = ball_point(&theta, radius, &mut rng);
            let dq = (direct_q(&t, &p1, &x, a) - direct_q(&t, &p2, &x, a)).abs();
            let dist = p1.iter().zip(&p2).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            assert!(dq <= l * dist + 1e-15, "{dq} > {l} · {dist}");
        }
    }
}

#[test]
fn initializer_is_seeded() {
    let t = Topology::uniform(3, &[4], ActivationKind::Tanh, 2, 2, ActivationKind::Tanh).unwrap();
    let a = Initializer::UniformFanIn.initialize(&t, 1).unwrap();
    let b = Initializer::UniformFanIn.initialize(&t, 1).unwrap();
    let c = Initializer::UniformFanIn.initialize(&t, 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #[test]
    fn activations_are_finite_and_squashing_kinds_are_bounded(u in -1e6f64..1e6) {
        for kind in common::ALL_KINDS {
            prop_assert!(kind.value(u).is_finite());
            prop_assert!(kind.derivative(u).is_finite());
            if let Some(c) = kind.bound() {
                prop_assert!(kind.value(u).abs() <= c);
            }
        }
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(seed in any::<u64>(), steps in 0u64..1_000_000, skip in 0u32..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_topology(&mut rng, None);
        let theta: Vec<f64> = (0..t.num_weights())
            .map(|_| f64::from_bits(rng.gen::<u64>() >> 2) * if rng.gen() { 1.0 } else { -1.0 })
            .map(|v| if v.is_finite() { v } else { 0.0 })
            .collect();
        for _ in 0..skip {
            rng.gen::<u32>();
        }
        let ck = Checkpoint {
            topology: t.clone(),
            theta: theta.clone(),
            step: steps,
            streams: vec![StreamState::capture(&rng)],
            state: Some(0),
            replay: None,
        };
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        prop_assert_eq!(&back.topology, &t);
        prop_assert!(back.theta.iter().zip(&theta).all(|(a, b)| a.to_bits() == b.to_bits()));
        let mut resumed = back.streams[0].restore().unwrap();
        prop_assert_eq!(resumed.gen::<u64>(), rng.gen::<u64>());
    }
}
