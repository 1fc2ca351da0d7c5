use std::f64::consts::PI;

use casimir_grating::casimir::{
    energy_sweep, integrand, node_reflection, round_trip_log_det, slab_energy, EnergySettings,
    GeometryConfig, SlabBaseline, REALNESS_TOL,
};
use casimir_grating::quadrature::QuadratureSpec;
use casimir_grating::smatrix::ChannelSettings;
use casimir_grating::{FermiStepParams, FourierProfile};
use proptest::prelude::*;

const L: f64 = 2.0 * PI;
const N: usize = 2;

fn grating() -> FourierProfile {
    FourierProfile::fermi_step(FermiStepParams::REFERENCE).unwrap()
}

fn coarse() -> QuadratureSpec {
    QuadratureSpec {
        n_kappa: 1,
        n_kx: 1,
        n_ky: 1,
        ..Default::default()
    }
}

#[test]
fn integrand_is_real_and_nonpositive_on_coarse_grid() {
    let p = grating();
    let settings = ChannelSettings::for_profile(&p);
    let geometries = [
        GeometryConfig::new(5.0, 0.0),
        GeometryConfig::new(5.0, L / 2.0),
    ];
    for node in coarse().nodes(L).unwrap() {
        let refl = node_reflection(&p, node.kappa, node.kx0, node.ky0, N, &settings).unwrap();
        for g in &geometries {
            let v = round_trip_log_det(&refl, g).unwrap();
            assert!(
                v.im.abs() / v.re.abs().max(1e-12) < REALNESS_TOL,
                "{node:?} {v}"
            );
            assert!(v.re <= 0.0, "{node:?} {v}");
        }
    }
}

#[test]
fn integrand_decays_with_separation() {
    let p = grating();
    let settings = ChannelSettings::for_profile(&p);
    let at = |dz: f64| {
        integrand(
            &p,
            0.5,
            0.1,
            0.1,
            N,
            &GeometryConfig::new(dz, 0.0),
            &settings,
        )
        .unwrap()
    };
    let (near, far) = (at(6.0), at(12.0));
    assert!(near < 0.0 && far < 0.0);
    // slowest channel decays as exp(-2 q dz) with q = |k| of harmonic 0
    let q = (0.5f64.powi(2) + 0.1f64.powi(2) + 0.1f64.powi(2)).sqrt();
    let ratio = far / near;
    let envelope = (-2.0 * q * 6.0).exp();
    assert!(
        ratio < 2.0 * envelope,
        "ratio {ratio:e} envelope {envelope:e}"
    );
    assert!(
        ratio > 0.1 * envelope,
        "ratio {ratio:e} envelope {envelope:e}"
    );
}

#[test]
fn integrand_is_periodic_and_even_in_lateral_shift() {
    let p = grating();
    let settings = ChannelSettings::for_profile(&p);
    let (kappa, kx0, ky0) = (0.3, 0.2, 0.4);
    let f = |kx: f64, dx: f64| {
        integrand(
            &p,
            kappa,
            kx,
            ky0,
            N,
            &GeometryConfig::new(5.5, dx),
            &settings,
        )
        .unwrap()
    };
    let base = f(kx0, 0.7);
    let tol = 1e-8 * base.abs();
    assert!((f(kx0, 0.7 + L) - base).abs() < tol);
    // mirror symmetry of the profile: kx0 -> -kx0 with dx -> -dx
    assert!((f(-kx0, -0.7) - base).abs() < 1e-6 * base.abs());
    // evenness in kx0 used to fold the Brillouin zone
    let mirrored = f(-kx0, 0.7) + f(kx0, -0.7);
    assert!((mirrored - 2.0 * base).abs() < 1e-6 * base.abs());
}

#[test]
fn vacuum_energy_vanishes() {
    let p = FourierProfile::vacuum(L, 2.0);
    let q = coarse();
    let mut settings = EnergySettings::for_profile(&p, &q, 2.0);
    settings.n_trunc = 1;
    let res = energy_sweep(&p, &[GeometryConfig::new(5.0, 0.0)], &q, &settings).unwrap();
    assert_eq!(res.points[0].energy, 0.0);
}

#[test]
fn slab_energy_is_negative_and_decreasing() {
    let slab = SlabBaseline {
        permittivity: 4.0,
        half_width: 2.0,
    };
    let q = QuadratureSpec::default();
    let values: Vec<f64> = [5.0, 5.5, 6.0, 6.5, 7.0, 8.0]
        .iter()
        .map(|dz| slab_energy(&slab, L, N, *dz, &q).unwrap())
        .collect();
    assert!(values.iter().all(|v| *v < 0.0));
    assert!(
        values.windows(2).all(|w| w[0].abs() > w[1].abs()),
        "{values:?}"
    );
}

#[test]
fn slab_energy_without_contrast_is_zero() {
    let slab = SlabBaseline {
        permittivity: 1.0,
        half_width: 2.0,
    };
    let e = slab_energy(&slab, L, N, 6.0, &QuadratureSpec::default()).unwrap();
    assert_eq!(e, 0.0);
}

#[test]
fn slab_energy_regression_anchor() {
    const ANCHOR: f64 = -2.113_678_542_048_960_6e-4;
    let slab = SlabBaseline {
        permittivity: 4.0,
        half_width: 2.0,
    };
    let doubled = QuadratureSpec {
        n_kappa: 12,
        n_kx: 8,
        n_ky: 12,
        ..Default::default()
    };
    let e = slab_energy(&slab, L, N, 6.0, &doubled).unwrap();
    assert!((e - ANCHOR).abs() < 1e-12 * ANCHOR.abs(), "{e:e}");
    // the default grid is already close to the anchor
    let d = slab_energy(&slab, L, N, 6.0, &QuadratureSpec::default()).unwrap();
    assert!((d - ANCHOR).abs() < 1e-4 * ANCHOR.abs(), "{d:e}");
}

#[test]
fn refinement_pass_reports_error_estimate() {
    let p = FourierProfile::step_slab(L, 2.0, 16.0, 4.0).unwrap();
    let q = QuadratureSpec {
        n_kappa: 2,
        n_kx: 1,
        n_ky: 1,
        ..Default::default()
    };
    let mut settings = EnergySettings::for_profile(&p, &q, 2.0);
    settings.n_trunc = 0;
    settings.refinement_tol = Some(1e-12);
    let res = energy_sweep(&p, &[GeometryConfig::new(6.0, 0.0)], &q, &settings).unwrap();
    let pt = res.points[0];
    assert!(pt.est_error.is_finite() && pt.est_error > 0.0);
    assert_eq!(res.converged, Some(false));
    assert_eq!(
        res.integrand_evaluations,
        res.node_count + q.halved().nodes(L).unwrap().len()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn slab_energy_falls_off_with_distance(dz in 4.5f64..12.0, step in 0.1f64..3.0, eps in 1.5f64..8.0) {
        let slab = SlabBaseline { permittivity: eps, half_width: 2.0 };
        let q = QuadratureSpec { n_kappa: 3, n_kx: 2, n_ky: 3, ..Default::default() };
        let near = slab_energy(&slab, L, 1, dz, &q).unwrap();
        let far = slab_energy(&slab, L, 1, dz + step, &q).unwrap();
        prop_assert!(near < 0.0);
        prop_assert!(far.abs() < near.abs());
    }
}
