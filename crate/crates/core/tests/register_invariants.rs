//! Numerical invariants across random registers and protocols: unitarity,
//! agreement of the fast and dense propagator paths, eigenvector
//! orthonormality, the eigenphase-sum identity, trace preservation, and
//! bit-level determinism of repeated runs.

use std::f64::consts::PI;

use adpulse_core::linalg::{determinant, gram_error, unitarity_error};
use adpulse_core::units::khz_to_rad_per_s;
use adpulse_core::{
    bath5, build_sequence, fast_dense_agreement, floquet_decompose, fold_phase,
    make_initial_state, one_period_propagator, random_register, run_sweep, ElectronInit,
    FoldWindow, Method, NuclearInit, ProtocolFamily, ProtocolSpec, Reinit, SpinOperators,
    SpinSystem, SweepSchedule,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn protocol_from_index(index: usize) -> ProtocolSpec {
    match index {
        0 => ProtocolSpec::ideal(ProtocolFamily::Cpmg),
        1 => ProtocolSpec::polcpmg(0.25 * PI).unwrap(),
        _ => ProtocolSpec::ideal(ProtocolFamily::PulsePol),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn propagators_keep_their_invariants(
        seed in 0u64..1_000,
        n in 1usize..=3,
        tau_ns in 200.0f64..2_500.0,
        family in 0usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nuclei = random_register(
            n,
            (khz_to_rad_per_s(15.0), khz_to_rad_per_s(60.0)),
            (khz_to_rad_per_s(-60.0), khz_to_rad_per_s(60.0)),
            &mut rng,
        ).unwrap();
        let system = SpinSystem::new(khz_to_rad_per_s(431.5), nuclei).unwrap();
        let protocol = protocol_from_index(family);
        let ops = SpinOperators::build(n);
        let sequence = build_sequence(&protocol, tau_ns * 1e-9).unwrap();

        let propagator =
            one_period_propagator(&system, &ops, &sequence, Method::Fast).unwrap();
        prop_assert!(unitarity_error(&propagator.matrix) < 1e-10);
        prop_assert!(fast_dense_agreement(&system, &ops, &sequence).unwrap() < 1e-10);

        let point = floquet_decompose(&propagator, &ops).unwrap();
        prop_assert!(gram_error(&point.eigenvectors) < 1e-8);

        // The eigenphases of a unitary sum to the argument of its
        // determinant, modulo 2 pi.
        let phase_sum: f64 = point.eigenphases.iter().sum();
        let det_arg = determinant(&propagator.matrix).arg();
        prop_assert!(fold_phase(phase_sum - det_arg, FoldWindow::Full).abs() < 1e-8);
    }
}

#[test]
fn sweeps_preserve_the_state_trace() {
    let system = SpinSystem::new(khz_to_rad_per_s(431.5), bath5()).unwrap();
    let protocol = ProtocolSpec::ideal(ProtocolFamily::Cpmg);
    let schedule =
        SweepSchedule::new(1.05e-6, 1.15e-6, 2e-9, 2, 2, Reinit::ToXPlus).unwrap();
    let initial =
        make_initial_state(&ElectronInit::XPlus, &NuclearInit::MaximallyMixed, 5).unwrap();
    let trajectory = run_sweep(&system, &protocol, &schedule, &initial).unwrap();
    let trace = trajectory.final_state.rho().trace();
    assert!((trace.re - 1.0).abs() < 1e-10);
    assert!(trace.im.abs() < 1e-12);
    for step in &trajectory.steps {
        assert!(step.obs.purity <= 1.0 + 1e-9);
    }
}

#[test]
fn identical_runs_are_bit_identical() {
    let system = SpinSystem::new(
        khz_to_rad_per_s(431.5),
        vec![
            adpulse_core::registry_nucleus("C1").unwrap(),
            adpulse_core::registry_nucleus("C4").unwrap(),
        ],
    )
    .unwrap();
    let protocol = ProtocolSpec::polcpmg(0.25 * PI).unwrap();
    let schedule =
        SweepSchedule::new(0.80e-6, 0.86e-6, 1e-9, 1, 2, Reinit::ToXPlus).unwrap();
    let initial =
        make_initial_state(&ElectronInit::XPlus, &NuclearInit::MaximallyMixed, 2).unwrap();

    let first = run_sweep(&system, &protocol, &schedule, &initial).unwrap();
    let second = run_sweep(&system, &protocol, &schedule, &initial).unwrap();
    assert_eq!(first.steps.len(), second.steps.len());
    for (a, b) in first.steps.iter().zip(second.steps.iter()) {
        assert_eq!(a.obs.polarization.to_bits(), b.obs.polarization.to_bits());
        assert_eq!(a.obs.coherence.to_bits(), b.obs.coherence.to_bits());
        assert_eq!(a.obs.purity.to_bits(), b.obs.purity.to_bits());
        for (x, y) in a.obs.per_spin_two_iz.iter().zip(&b.obs.per_spin_two_iz) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.t.to_bits(), b.t.to_bits());
    }
}
