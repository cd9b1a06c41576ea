use std::f64::consts::PI;

use num_complex::Complex64;
use stam_core::diagnostics::{bound_report, checkpoint_fidelities, u_deviation};
use stam_core::dynamics::{propagate_lindblad, propagate_unitary, propagator_of, LindbladModel};
use stam_core::models::{BosonicModel, CoupledQubitModel, Interpolation, LambdaModel, Model};
use stam_core::protocol::{compile, validate_clusters, Schedule};
use stam_core::qla::{op_fidelity, DensityMatrix, Operator};

fn models() -> Vec<(Model, f64)> {
    vec![
        (Model::Bosonic(BosonicModel::new(24, 1.0, Complex64::new(0.6, 0.3))), 1.0),
        (Model::Lambda(LambdaModel::resonant(1.0, 0.7).unwrap()), PI / 2.0),
        (Model::Lambda(LambdaModel::new(2, 5, 3.0, -0.4).unwrap()), PI / 3.0),
        (Model::CoupledQubits(CoupledQubitModel::new(0.7, Interpolation::Trig)), PI / 4.0),
        (Model::CoupledQubits(CoupledQubitModel::new(1.3, Interpolation::Cot)), PI / 4.0),
    ]
}

#[test]
fn every_checkpoint_reproduces_the_adiabatic_propagator() {
    for (model, theta) in models() {
        let spec = model.spec().unwrap();
        validate_clusters(&spec).unwrap();
        for n in 1..=6 {
            let seq = compile(&spec, &Schedule::equal(n, theta).unwrap()).unwrap();
            let fids = checkpoint_fidelities(&spec, &seq).unwrap();
            assert_eq!(fids.len(), n);
            for (t, f) in fids {
                assert!(f >= 1.0 - 1e-10, "{} n={n} theta={t}: {f}", model.id());
            }
        }
    }
}

#[test]
fn custom_spacing_checkpoints() {
    let model = LambdaModel::resonant(1.0, 0.0).unwrap();
    let spec = Model::Lambda(model).spec().unwrap();
    let seq = compile(&spec, &Schedule::custom(vec![0.1, 0.3, 0.45, 0.9]).unwrap()).unwrap();
    for &theta in seq.schedule().thetas() {
        let d = u_deviation(&spec, &seq, theta).unwrap();
        assert!(d.max_abs_diff(&Operator::identity(3)) < 1e-10, "{theta}");
    }
}

#[test]
fn bound_is_respected_along_compiled_paths() {
    for (model, theta) in models() {
        let spec = model.spec().unwrap();
        let seq = compile(&spec, &Schedule::equal(3, theta).unwrap()).unwrap();
        for k in 0..=24 {
            let lambda = theta * k as f64 / 24.0;
            let r = bound_report(&spec, &seq, lambda).unwrap();
            assert!(r.holds(), "{} at {lambda}: {r:?}", model.id());
        }
    }
}

#[test]
fn lindblad_without_noise_tracks_unitary_on_all_models() {
    for (model, theta) in models().into_iter().skip(1) {
        let spec = model.spec().unwrap();
        let seq = compile(&spec, &Schedule::equal(2, theta).unwrap()).unwrap();
        let psi = spec.initial_state(0).unwrap();
        let rho = propagate_lindblad(seq.pulses(), &DensityMatrix::from_pure(&psi).unwrap(), &LindbladModel::closed())
            .unwrap();
        let out = propagate_unitary(seq.pulses(), &psi).unwrap();
        assert!((rho.fidelity_with(&out).unwrap() - 1.0).abs() < 1e-8, "{}", model.id());
    }
}

#[test]
fn propagators_are_unitary() {
    for (model, theta) in models() {
        let spec = model.spec().unwrap();
        let seq = compile(&spec, &Schedule::equal(4, theta).unwrap()).unwrap();
        let u = propagator_of(seq.pulses(), spec.dim()).unwrap();
        assert!(u.unitarity_deviation() < 1e-10, "{}", model.id());
        assert!(op_fidelity(&u, &u).unwrap() > 1.0 - 1e-12);
    }
}
