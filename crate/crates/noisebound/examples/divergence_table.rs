//! Closed-form divergence kernels checked against numerical quadrature.
//!
//! Run: cargo run --release --example divergence_table
//!
//! For each additive-noise family (Gaussian, Laplace, Uniform) and each
//! divergence (KL, TV, χ²), the library has a closed-form kernel giving the
//! divergence between the channel output at two inputs a given shift apart.
//! Some kernels are exact, others are upper bounds; a slow adaptive
//! quadrature oracle computes the true one-dimensional divergence
//! independently so both kinds can be checked: exact forms must agree with
//! the oracle, upper bounds must sit at or above it.

use noisebound::noise::{
    cost, oracle_divergence_1d, Exactness, QuadratureSpec, ALL_DIVERGENCES, ALL_NOISE,
};

fn main() -> noisebound::Result<()> {
    let shifts = [0.0, 0.5, 1.0, 2.5];
    let mag = 1.0;
    let quad = QuadratureSpec::default();

    println!(
        "{:<9} {:<5} {:>6} {:>13} {:>13} {:>10}  exactness",
        "noise", "div", "shift", "closed_form", "oracle", "abs_diff"
    );
    for noise in ALL_NOISE {
        for f in ALL_DIVERGENCES {
            for shift in shifts {
                let closed = cost(f, noise, &[shift], &[0.0], mag)?;
                let oracle = oracle_divergence_1d(f, noise, shift, mag, quad)?;
                let diff = if closed.value.is_infinite() && oracle.is_infinite() {
                    0.0
                } else {
                    (closed.value - oracle).abs()
                };
                println!(
                    "{:<9} {:<5} {:>6.2} {:>13.6e} {:>13.6e} {:>10.2e}  {}",
                    noise.name(),
                    f.name(),
                    shift,
                    closed.value,
                    oracle,
                    diff,
                    closed.exactness.name(),
                );
                match closed.exactness {
                    Exactness::Exact => assert!(
                        diff <= 1e-3 * (1.0 + closed.value.min(f64::MAX)),
                        "exact kernel disagrees with the oracle"
                    ),
                    Exactness::UpperBound => assert!(
                        oracle <= closed.value + 1e-3,
                        "oracle exceeds the claimed upper bound"
                    ),
                }
            }
        }
        println!();
    }
    println!("every exact kernel matches the oracle; every upper bound dominates it");
    Ok(())
}
