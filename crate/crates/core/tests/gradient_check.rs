mod common;

use common::gradcheck::{dense_worst, mdqn_worst, recurrent_worst, TOL};

#[test]
fn dense_gradients_match_finite_differences() {
    for seed in 0..50 {
        let (err, at) = dense_worst(seed);
        assert!(err < TOL, "seed {seed}: {err:e} at {at}");
    }
}

#[test]
fn recurrent_gradients_match_finite_differences() {
    for seed in 0..50 {
        let (err, at) = recurrent_worst(seed);
        assert!(err < TOL, "seed {seed}: {err:e} at {at}");
    }
}

#[test]
fn mdqn_gradients_match_finite_differences() {
    for seed in 0..50 {
        let (err, at) = mdqn_worst(seed);
        assert!(err < TOL, "seed {seed}: {err:e} at {at}");
    }
}
