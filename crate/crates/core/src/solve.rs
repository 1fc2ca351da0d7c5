//! Integration of the factorized outgoing and regular solutions.
//!
//! The outgoing solution is written `F = G exp(i K z)` and integrated inward
//! from the vacuum region with `G = 1`, `G' = 0`. The transposed regular
//! solution is written `Phi^T = exp(+-i M K z) H` and integrated outward from
//! `z = 0` with `H = h_pm`, `H' = 1`. `K` is the diagonal of `k_z` values.

use nalgebra::{DMatrix, DMatrixView, DVector};
use num_complex::Complex64;

use crate::basis::ModeBasis;
use crate::coupling::CouplingAssembler;
use crate::error::{Error, Result};
use crate::ode::{DormandPrince, OdeError, State, Stats};
use crate::profile::FourierProfile;

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Symmetric (`+`) or antisymmetric (`-`) channel under `z -> -z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    Outgoing,
    Regular(Parity),
}

#[derive(Debug, Clone)]
pub struct CoupledSolution {
    pub kind: SolutionKind,
    pub value: CMat,
    pub derivative: CMat,
    pub at_z: f64,
    pub stats: Stats,
}

/// Integrator controls shared by all channel integrations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 200_000,
        }
    }
}

impl OdeSettings {
    fn stepper(&self) -> DormandPrince {
        DormandPrince {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
        }
    }
}

/// Initial value of the regular solution: a diagonal matrix with `(-i k_z)^{-1}`
/// on the x, y components (even parity) or on the z components (odd parity),
/// and zero elsewhere.
pub fn regular_initial_value(parity: Parity, basis: &ModeBasis) -> DVector<Complex64> {
    DVector::from_fn(basis.dim(), |i, _| {
        let is_z = i % 3 == 2;
        let active = match parity {
            Parity::Even => !is_z,
            Parity::Odd => is_z,
        };
        if active {
            (-I * basis.kz_diag[i]).inv()
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn stack(value: &CMat, derivative: &CMat) -> State {
    let n2 = value.len();
    let mut y = State::zeros(2 * n2);
    y.as_mut_slice()[..n2].copy_from_slice(value.as_slice());
    y.as_mut_slice()[n2..].copy_from_slice(derivative.as_slice());
    y
}

fn unstack(y: &State, dim: usize) -> (CMat, CMat) {
    let n2 = dim * dim;
    (
        CMat::from_column_slice(dim, dim, &y.as_slice()[..n2]),
        CMat::from_column_slice(dim, dim, &y.as_slice()[n2..]),
    )
}

fn map_ode_error(err: OdeError, basis: &ModeBasis) -> Error {
    match err {
        OdeError::StepUnderflow { t } => Error::StepUnderflow {
            z: t,
            channel: basis.tag(),
        },
        OdeError::TooManySteps { t, max_steps } => Error::TooManySteps {
            max_steps,
            z: t,
            channel: basis.tag(),
        },
    }
}

/// Outgoing factor `G` and `G'` at `z_fit`, integrated inward from `z_start`.
pub fn integrate_outgoing(
    profile: &FourierProfile,
    basis: &ModeBasis,
    z_start: f64,
    z_fit: f64,
    settings: &OdeSettings,
) -> Result<CoupledSolution> {
    if !(z_start >= z_fit && z_fit > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need z_start >= z_fit > 0, got z_start={z_start}, z_fit={z_fit}"
        )));
    }
    let dim = basis.dim();
    let n2 = dim * dim;
    let assembler = CouplingAssembler::new(profile, basis);
    let ikz = basis.kz_diag.map(|kz| I * kz);
    let kz2 = basis.kz_diag.map(|kz| kz * kz);

    // G'' = (D1 G - 2 G') iK + D1 G' + D0 G + G K^2
    let rhs = |z: f64, y: &State, dy: &mut State| {
        let g = DMatrixView::from_slice(&y.as_slice()[..n2], dim, dim);
        let gp = DMatrixView::from_slice(&y.as_slice()[n2..], dim, dim);
        let c = assembler.at(z, false);
        let mut acc = &c.d1 * g;
        acc -= gp * Complex64::new(2.0, 0.0);
        for (j, mut col) in acc.column_iter_mut().enumerate() {
            col *= ikz[j];
        }
        acc += &c.d1 * gp;
        acc += &c.d0 * g;
        for j in 0..dim {
            for i in 0..dim {
                acc[(i, j)] += g[(i, j)] * kz2[j];
            }
        }
        dy.as_mut_slice()[..n2].copy_from_slice(&y.as_slice()[n2..]);
        dy.as_mut_slice()[n2..].copy_from_slice(acc.as_slice());
    };
    let y0 = stack(&CMat::identity(dim, dim), &CMat::zeros(dim, dim));
    let (y, stats) = settings
        .stepper()
        .integrate_through(rhs, z_start, z_fit, y0, &profile.breakpoints())
        .map_err(|e| map_ode_error(e, basis))?;
    let (value, derivative) = unstack(&y, dim);
    Ok(CoupledSolution {
        kind: SolutionKind::Outgoing,
        value,
        derivative,
        at_z: z_fit,
        stats,
    })
}

/// Regular factor `H` and `H'` at `z_fit`, integrated outward from `z = 0`
/// starting from `h0` and `h0'`.
/// Closed form of the regular equation without a scatterer. Entry `(i, j)`
/// obeys `h'' = 2 a_i h' + (kz_i^2 - kz_j^2) h` with `a_i = -s i m_i kz_i`,
/// whose characteristic roots are `a_i +- i kz_j`.
fn vacuum_regular(
    parity: Parity,
    basis: &ModeBasis,
    h0: &CMat,
    h0_prime: &CMat,
    z: f64,
) -> CoupledSolution {
    let dim = basis.dim();
    let s = parity.sign();
    let mut value = CMat::zeros(dim, dim);
    let mut derivative = CMat::zeros(dim, dim);
    for i in 0..dim {
        let a = -I * s * basis.m_diag[i] * basis.kz_diag[i];
        for j in 0..dim {
            let b = I * basis.kz_diag[j];
            let (r1, r2) = (a + b, a - b);
            // h = c1 e^{r1 z} + c2 e^{r2 z}, matched to h(0) and h'(0)
            let c1 = (h0_prime[(i, j)] - r2 * h0[(i, j)]) / (r1 - r2);
            let c2 = h0[(i, j)] - c1;
            let (e1, e2) = ((r1 * z).exp(), (r2 * z).exp());
            value[(i, j)] = c1 * e1 + c2 * e2;
            derivative[(i, j)] = c1 * r1 * e1 + c2 * r2 * e2;
        }
    }
    CoupledSolution {
        kind: SolutionKind::Regular(parity),
        value,
        derivative,
        at_z: z,
        stats: Stats::default(),
    }
}

pub fn integrate_regular_from(
    parity: Parity,
    profile: &FourierProfile,
    basis: &ModeBasis,
    h0: &CMat,
    h0_prime: &CMat,
    z_fit: f64,
    settings: &OdeSettings,
) -> Result<CoupledSolution> {
    if !(z_fit > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fitting point must be positive, got {z_fit}"
        )));
    }
    if profile.is_vacuum() {
        return Ok(vacuum_regular(parity, basis, h0, h0_prime, z_fit));
    }
    integrate_regular_ode(parity, profile, basis, h0, h0_prime, z_fit, settings)
}

fn integrate_regular_ode(
    parity: Parity,
    profile: &FourierProfile,
    basis: &ModeBasis,
    h0: &CMat,
    h0_prime: &CMat,
    z_fit: f64,
    settings: &OdeSettings,
) -> Result<CoupledSolution> {
    let dim = basis.dim();
    let n2 = dim * dim;
    let assembler = CouplingAssembler::new(profile, basis);
    let s = parity.sign();
    // -s i M K
    let mk = DVector::from_fn(dim, |i, _| -I * s * basis.m_diag[i] * basis.kz_diag[i]);
    let kz2 = basis.kz_diag.map(|kz| kz * kz);

    // H'' = -s i M K (H D1 + 2 H') - H' D1 + H (D0 - D1') + K^2 H
    let rhs = |z: f64, y: &State, dy: &mut State| {
        let h = DMatrixView::from_slice(&y.as_slice()[..n2], dim, dim);
        let hp = DMatrixView::from_slice(&y.as_slice()[n2..], dim, dim);
        let c = assembler.at(z, true);
        let mut acc = h * &c.d1;
        acc += hp * Complex64::new(2.0, 0.0);
        for (i, mut row) in acc.row_iter_mut().enumerate() {
            row *= mk[i];
        }
        acc -= hp * &c.d1;
        acc += h * (&c.d0 - &c.d1_dz);
        for j in 0..dim {
            for i in 0..dim {
                acc[(i, j)] += kz2[i] * h[(i, j)];
            }
        }
        dy.as_mut_slice()[..n2].copy_from_slice(&y.as_slice()[n2..]);
        dy.as_mut_slice()[n2..].copy_from_slice(acc.as_slice());
    };
    let (y, stats) = settings
        .stepper()
        .integrate_through(rhs, 0.0, z_fit, stack(h0, h0_prime), &profile.breakpoints())
        .map_err(|e| map_ode_error(e, basis))?;
    let (value, derivative) = unstack(&y, dim);
    Ok(CoupledSolution {
        kind: SolutionKind::Regular(parity),
        value,
        derivative,
        at_z: z_fit,
        stats,
    })
}

/// Regular factor with the standard boundary data `H(0) = h_pm`, `H'(0) = 1`.
pub fn integrate_regular(
    parity: Parity,
    profile: &FourierProfile,
    basis: &ModeBasis,
    z_fit: f64,
    settings: &OdeSettings,
) -> Result<CoupledSolution> {
    let dim = basis.dim();
    let h0 = CMat::from_diagonal(&regular_initial_value(parity, basis));
    integrate_regular_from(
        parity,
        profile,
        basis,
        &h0,
        &CMat::identity(dim, dim),
        z_fit,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, Frequency};
    use crate::linalg::max_abs;
    use crate::profile::FermiStepParams;
    use std::f64::consts::PI;

    const L: f64 = 2.0 * PI;

    #[test]
    fn regular_initial_values() {
        // k_z = 2 at normal incidence with k = 2
        let b = build_basis(Frequency::real(2.0), 0.0, 0.0, 0, L).unwrap();
        let even = regular_initial_value(Parity::Even, &b);
        assert_eq!(even[0], Complex64::new(0.0, 0.5));
        assert_eq!(even[1], Complex64::new(0.0, 0.5));
        assert_eq!(even[2], Complex64::new(0.0, 0.0));
        let odd = regular_initial_value(Parity::Odd, &b);
        assert_eq!(odd[0], Complex64::new(0.0, 0.0));
        assert_eq!(odd[1], Complex64::new(0.0, 0.0));
        assert_eq!(odd[2], Complex64::new(0.0, 0.5));
    }

    #[test]
    fn vacuum_closed_form_matches_integration() {
        let vac = FourierProfile::vacuum(L, 2.0);
        let tight = OdeSettings {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 1_000_000,
        };
        for freq in [Frequency::real(1.3), Frequency::imaginary(0.6)] {
            let b = build_basis(freq, 0.2, 0.1, 1, L).unwrap();
            let dim = b.dim();
            // a full, non-diagonal start exercises the (kz_i, kz_j) mixing
            let h0 = CMat::from_fn(dim, dim, |i, j| {
                Complex64::new(1.0 + i as f64, 0.3 * j as f64 - 0.5)
            });
            let h0p = CMat::from_fn(dim, dim, |i, j| {
                Complex64::new(0.1 * (i + 2 * j) as f64, -0.2)
            });
            for parity in [Parity::Even, Parity::Odd] {
                let exact = vacuum_regular(parity, &b, &h0, &h0p, 2.0);
                let ode = integrate_regular_ode(parity, &vac, &b, &h0, &h0p, 2.0, &tight).unwrap();
                let scale = max_abs(&exact.value).max(max_abs(&exact.derivative));
                assert!(max_abs(&(&exact.value - &ode.value)) < 1e-9 * scale);
                assert!(max_abs(&(&exact.derivative - &ode.derivative)) < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn vacuum_outgoing_is_identity() {
        let vac = FourierProfile::vacuum(L, 2.0);
        let b = build_basis(Frequency::imaginary(0.9), 0.2, 0.4, 2, L).unwrap();
        let sol = integrate_outgoing(&vac, &b, 8.0, 2.0, &OdeSettings::default()).unwrap();
        let dim = b.dim();
        assert!(max_abs(&(&sol.value - CMat::identity(dim, dim))) < 1e-12);
        assert!(max_abs(&sol.derivative) < 1e-12);
    }

    #[test]
    fn outgoing_is_insensitive_to_start_point() {
        let p = FourierProfile::fermi_step(FermiStepParams::REFERENCE).unwrap();
        let settings = OdeSettings::default();
        for freq in [Frequency::real(1.3), Frequency::imaginary(0.7)] {
            let b = build_basis(freq, 0.2, 0.1, 2, L).unwrap();
            let a = integrate_outgoing(&p, &b, 8.0, 2.0, &settings).unwrap();
            let c = integrate_outgoing(&p, &b, 12.0, 2.0, &settings).unwrap();
            let scale = max_abs(&a.value);
            assert!(max_abs(&(&a.value - &c.value)) < 10.0 * settings.rtol * scale);
        }
    }

    #[test]
    fn outgoing_tolerance_refinement() {
        let p = FourierProfile::fermi_step(FermiStepParams::REFERENCE).unwrap();
        let b = build_basis(Frequency::imaginary(1.1), 0.3, 0.6, 2, L).unwrap();
        let tol = 1e-7;
        let coarse = OdeSettings {
            rtol: tol,
            atol: tol * 1e-2,
            ..Default::default()
        };
        let fine = OdeSettings {
            rtol: tol / 10.0,
            atol: tol * 1e-3,
            ..Default::default()
        };
        let a = integrate_outgoing(&p, &b, 8.0, 2.0, &coarse).unwrap();
        let c = integrate_outgoing(&p, &b, 8.0, 2.0, &fine).unwrap();
        assert!(max_abs(&(&a.value - &c.value)) < 20.0 * tol * max_abs(&c.value));
    }

    #[test]
    fn regular_solution_is_linear_in_initial_data() {
        let p = FourierProfile::fermi_step(FermiStepParams::REFERENCE).unwrap();
        let b = build_basis(Frequency::real(0.8), 0.1, 0.3, 1, L).unwrap();
        let dim = b.dim();
        let settings = OdeSettings {
            rtol: 1e-10,
            atol: 1e-14,
            ..Default::default()
        };
        let h0 = CMat::from_diagonal(&regular_initial_value(Parity::Even, &b));
        let id = CMat::identity(dim, dim);
        let alpha = Complex64::new(0.3, -1.7);
        let base = integrate_regular_from(Parity::Even, &p, &b, &h0, &id, 2.0, &settings).unwrap();
        let scaled = integrate_regular_from(
            Parity::Even,
            &p,
            &b,
            &(&h0 * alpha),
            &(&id * alpha),
            2.0,
            &settings,
        )
        .unwrap();
        let diff = &scaled.value - &base.value * alpha;
        assert!(max_abs(&diff) < 1e-8 * max_abs(&scaled.value));
    }
}
