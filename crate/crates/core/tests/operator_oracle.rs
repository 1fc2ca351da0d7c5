mod support;

use std::f64::consts::PI;

use casimir_grating::coupling::build_coupling_matrices;
use casimir_grating::{build_basis, FermiStepParams, FourierProfile, Frequency};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::pseudospectral::{
    apply_operator, assembled, max_operator_mismatch, relative_error, Oracle, TrialField,
};

type C = Complex64;

#[test]
fn coupling_matches_real_space_operator() {
    let (worst, evaluated) = max_operator_mismatch(24, 7);
    println!("max relative mismatch {worst:e} over {evaluated} samples");
    assert!(evaluated >= 20);
    assert!(worst < 1e-6, "max relative mismatch {worst:e}");
}

#[test]
fn oracle_detects_a_perturbed_operator() {
    let params = FermiStepParams::REFERENCE;
    let profile = FourierProfile::fermi_step(params).unwrap();
    let basis = build_basis(Frequency::imaginary(0.7), 0.2, 0.3, 1, params.period).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let field = TrialField::random(&mut rng, 1);
    let o = Oracle::new(profile, basis);
    let z = 1.95;
    let mut c = build_coupling_matrices(&o.profile, &o.basis, z);
    c.d1[(2, 5)] += C::new(1e-3, 0.0);
    let f = field.derivative(0, z);
    let fp = field.derivative(1, z);
    let fpp = field.derivative(2, z);
    let perturbed = &c.leading * (-fpp + &c.d1 * fp + &c.d0 * f);
    assert!(relative_error(&apply_operator(&o, &field, z), &perturbed) > 1e-6);
}

#[test]
fn vacuum_operator_is_helmholtz() {
    let profile = FourierProfile::vacuum(2.0 * PI, 2.0);
    let basis = build_basis(Frequency::real(1.1), 0.1, 0.4, 2, 2.0 * PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = TrialField::random(&mut rng, 2);
    let o = Oracle::new(profile, basis);
    let err = relative_error(
        &apply_operator(&o, &field, 0.7),
        &assembled(&o, &field, 0.7),
    );
    assert!(err < 1e-9, "{err:e}");
}
