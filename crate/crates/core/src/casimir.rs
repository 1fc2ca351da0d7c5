//! Round-trip log-determinant integrand, energy quadrature and the planar
//! slab baseline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, Frequency, ModeBasis};
use crate::error::{Error, Result};
use crate::linalg::log_det_one_minus;
use crate::profile::FourierProfile;
use crate::quadrature::{Node, QuadratureSpec};
use crate::smatrix::{scatter_basis, ChannelSettings};

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative bound on the imaginary part of the round-trip log-determinant.
pub const REALNESS_TOL: f64 = 1e-6;
const REALNESS_FLOOR: f64 = 1e-12;

/// Placement of the second grating relative to the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Separation of the center planes.
    pub delta_z: f64,
    /// Lateral displacement along the periodic direction.
    pub delta_x: f64,
}

impl GeometryConfig {
    pub fn new(delta_z: f64, delta_x: f64) -> Self {
        GeometryConfig { delta_z, delta_x }
    }

    /// Rejects overlapping supports. Returns a warning when the gap between
    /// the nominal profile edges is smaller than `margin`.
    pub fn validate(&self, half_width: f64, margin: f64) -> Result<Option<String>> {
        if !(self.delta_z.is_finite() && self.delta_x.is_finite()) {
            return Err(Error::InvalidParameter("geometry must be finite".into()));
        }
        if self.delta_z <= 2.0 * half_width {
            return Err(Error::InvalidParameter(format!(
                "separation {} must exceed twice the half-width {}",
                self.delta_z, half_width
            )));
        }
        if self.delta_z < 2.0 * half_width + margin {
            return Ok(Some(format!(
                "separation {} leaves a gap below {} between the profiles",
                self.delta_z, margin
            )));
        }
        Ok(None)
    }
}

/// Default harmonic truncation: harmonics with `|kx - kx0| <= k_max`.
pub fn default_truncation(period: f64, k_max: f64) -> usize {
    (period * k_max / (2.0 * std::f64::consts::PI)).floor() as usize
}

/// Diagonal of the translation matrix in TE/TM coordinates:
/// `exp(i kx dx + i kz dz)` per harmonic, repeated for both polarizations.
pub fn translation_matrix(basis: &ModeBasis, delta_z: f64, delta_x: f64) -> DVector<Complex64> {
    let nh = basis.n_harmonics();
    DVector::from_fn(2 * nh, |i, _| {
        let slot = i / 2;
        (I * (basis.kx[slot] * delta_x + basis.kz_harmonic[slot] * delta_z)).exp()
    })
}

/// Reflection data of one imaginary-axis node, reusable for any geometry.
#[derive(Debug, Clone)]
pub struct NodeReflection {
    pub kappa: f64,
    pub kx0: f64,
    pub ky0: f64,
    pub basis: ModeBasis,
    /// Basis at `(-kx0, -ky0)` with harmonics reordered `n -> -n`.
    pub return_basis: ModeBasis,
    pub r: CMat,
    pub condition: f64,
    pub ode_steps: usize,
}

/// Basis of the return trip at `(-kx0, -ky0)`, harmonics ordered so that
/// slot `j` holds `-n`. Only the wavevector data are meaningful.
pub fn return_basis(
    frequency: Frequency,
    kx0: f64,
    ky0: f64,
    n_trunc: usize,
    period: f64,
) -> Result<ModeBasis> {
    let mut basis = build_basis(frequency, -kx0, ky0.abs(), n_trunc, period)?;
    basis.ky0 = -ky0;
    Ok(reversed_harmonics(basis))
}

fn reversed_harmonics(mut basis: ModeBasis) -> ModeBasis {
    basis.kx.reverse();
    basis.kz_harmonic.reverse();
    let nh = basis.n_harmonics();
    let perm =
        |v: &DVector<Complex64>| DVector::from_fn(v.len(), |i, _| v[3 * (nh - 1 - i / 3) + i % 3]);
    basis.kz_diag = perm(&basis.kz_diag);
    basis.flux_diag = perm(&basis.flux_diag);
    basis
}

pub fn node_reflection(
    profile: &FourierProfile,
    kappa: f64,
    kx0: f64,
    ky0: f64,
    n_trunc: usize,
    settings: &ChannelSettings,
) -> Result<NodeReflection> {
    let freq = Frequency::imaginary(kappa);
    let basis = build_basis(freq, kx0, ky0, n_trunc, profile.period())?;
    let return_basis = return_basis(freq, kx0, ky0, n_trunc, profile.period())?;
    if profile.is_vacuum() {
        let n = 2 * basis.n_harmonics();
        return Ok(NodeReflection {
            kappa,
            kx0,
            ky0,
            basis,
            return_basis,
            r: CMat::zeros(n, n),
            condition: 1.0,
            ode_steps: 0,
        });
    }
    let res = scatter_basis(profile, &basis, settings).map_err(|e| e.at(basis.tag()))?;
    Ok(NodeReflection {
        kappa,
        kx0,
        ky0,
        basis,
        return_basis,
        r: res.r_transverse,
        condition: res.condition,
        ode_steps: res.ode_steps,
    })
}

/// `log det [1 - U(kx0, ky0) r U(-kx0, -ky0) r]`.
pub fn round_trip_log_det(node: &NodeReflection, geometry: &GeometryConfig) -> Result<Complex64> {
    let up = translation_matrix(&node.basis, geometry.delta_z, geometry.delta_x);
    let down = translation_matrix(&node.return_basis, geometry.delta_z, geometry.delta_x);
    let n = node.r.nrows();
    let ur = CMat::from_fn(n, n, |i, j| up[i] * node.r[(i, j)]);
    let dr = CMat::from_fn(n, n, |i, j| down[i] * node.r[(i, j)]);
    log_det_one_minus(&(ur * dr))
}

/// Real part of the round-trip log-determinant after checking that the
/// imaginary part is negligible.
pub fn real_log_det(value: Complex64, node: &NodeReflection) -> Result<f64> {
    if value.im.abs() >= REALNESS_TOL * value.re.abs() + REALNESS_FLOOR || !value.re.is_finite() {
        return Err(Error::ComplexLogDet {
            real: value.re,
            imag: value.im,
        }
        .at(node.basis.tag()));
    }
    Ok(value.re)
}

pub fn integrand(
    profile: &FourierProfile,
    kappa: f64,
    kx0: f64,
    ky0: f64,
    n_trunc: usize,
    geometry: &GeometryConfig,
    settings: &ChannelSettings,
) -> Result<f64> {
    let node = node_reflection(profile, kappa, kx0, ky0, n_trunc, settings)?;
    real_log_det(round_trip_log_det(&node, geometry)?, &node)
}

/// TE and TM reflection of a sharp slab of permittivity `eps` and half-width
/// `w`, referenced to its center plane. `kz` is the channel's `k_z` and
/// `rho2` its squared transverse wavenumber.
pub fn slab_reflection(
    eps: f64,
    w: f64,
    frequency: Frequency,
    kz: Complex64,
    rho2: f64,
) -> (Complex64, Complex64) {
    let k2 = frequency.squared();
    let mut beta = (k2 * eps - rho2).sqrt();
    if beta.im < 0.0 || (beta.im == 0.0 && beta.re < 0.0) {
        beta = -beta;
    }
    let one = Complex64::new(1.0, 0.0);
    let round = (4.0 * I * beta * w).exp();
    let reference = (-2.0 * I * kz * w).exp();
    let gamma_te = (kz - beta) / (kz + beta);
    let gamma_tm = (kz * eps - beta) / (kz * eps + beta);
    let amp = |g: Complex64| g * (one - round) / (one - g * g * round) * reference;
    (amp(gamma_te), -amp(gamma_tm))
}

/// Slab round-trip `log det` on the same channel: the determinant factorizes
/// into `1 - r^2 exp(-2 q dz)` per harmonic and polarization.
pub fn slab_log_det(basis: &ModeBasis, eps: f64, w: f64, delta_z: f64) -> f64 {
    let mut sum = 0.0;
    for slot in 0..basis.n_harmonics() {
        let kz = basis.kz_harmonic[slot];
        let rho2 = basis.kx[slot].powi(2) + basis.ky0.powi(2);
        let (te, tm) = slab_reflection(eps, w, basis.frequency, kz, rho2);
        let decay = (2.0 * I * kz * delta_z).exp();
        for r in [te, tm] {
            let x = r * r * decay;
            // ln(1 - x), accurate for tiny x
            sum += if x.norm() < 1e-3 {
                -(x + x * x / 2.0 + x * x * x / 3.0 + x * x * x * x / 4.0).re
            } else {
                (Complex64::new(1.0, 0.0) - x).ln().re
            };
        }
    }
    sum
}

/// Per-node contributions for a list of geometries, before weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeValues {
    pub grating: Vec<f64>,
    pub slab: Vec<f64>,
    /// Largest `|Im log det| / |Re log det|` over the geometries.
    pub imag_ratio: f64,
    pub condition: f64,
    pub ode_steps: usize,
}

/// Which reflection enters the energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabBaseline {
    pub permittivity: f64,
    pub half_width: f64,
}

pub fn node_values(
    profile: &FourierProfile,
    node: &Node,
    n_trunc: usize,
    geometries: &[GeometryConfig],
    slab: &SlabBaseline,
    settings: &ChannelSettings,
) -> Result<NodeValues> {
    let refl = node_reflection(profile, node.kappa, node.kx0, node.ky0, n_trunc, settings)?;
    let mut grating = Vec::with_capacity(geometries.len());
    let mut imag_ratio: f64 = 0.0;
    for g in geometries {
        let v = round_trip_log_det(&refl, g)?;
        imag_ratio = imag_ratio.max(v.im.abs() / v.re.abs().max(REALNESS_FLOOR));
        grating.push(real_log_det(v, &refl)?);
    }
    let slab = slab_values(&refl.basis, geometries, slab);
    Ok(NodeValues {
        grating,
        slab,
        imag_ratio,
        condition: refl.condition,
        ode_steps: refl.ode_steps,
    })
}

pub fn slab_values(
    basis: &ModeBasis,
    geometries: &[GeometryConfig],
    slab: &SlabBaseline,
) -> Vec<f64> {
    geometries
        .iter()
        .map(|g| slab_log_det(basis, slab.permittivity, slab.half_width, g.delta_z))
        .collect()
}

/// Weighted sums over the nodes in the given order, one per geometry.
pub fn reduce(nodes: &[Node], values: &[Vec<f64>]) -> Vec<f64> {
    let n = values.first().map_or(0, |v| v.len());
    let mut out = vec![0.0; n];
    for (node, vals) in nodes.iter().zip(values) {
        for (o, v) in out.iter_mut().zip(vals) {
            *o += node.weight * v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub delta_z: f64,
    pub delta_x: f64,
    pub energy: f64,
    pub slab_energy: f64,
    pub ratio: f64,
    /// Change under node-count refinement, `NaN` when not estimated.
    pub est_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySweepResult {
    pub points: Vec<EnergyPoint>,
    pub n_trunc: usize,
    pub node_count: usize,
    pub integrand_evaluations: usize,
    pub max_condition: f64,
    /// True when every point's refinement change is within tolerance.
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySettings {
    pub channel: ChannelSettings,
    pub n_trunc: usize,
    pub slab: SlabBaseline,
    /// Relative tolerance of the refinement check; `None` skips the coarse pass.
    pub refinement_tol: Option<f64>,
}

impl EnergySettings {
    /// Truncation from the quadrature's upper bound and a slab of
    /// permittivity `2h` matching the profile's half-width.
    pub fn for_profile(profile: &FourierProfile, quadrature: &QuadratureSpec, height: f64) -> Self {
        EnergySettings {
            channel: ChannelSettings::for_profile(profile),
            n_trunc: default_truncation(
                profile.period(),
                quadrature.kappa_max.max(quadrature.ky_max),
            ),
            slab: SlabBaseline {
                permittivity: 2.0 * height,
                half_width: profile.half_width(),
            },
            refinement_tol: None,
        }
    }
}

fn sweep_sums(
    profile: &FourierProfile,
    nodes: &[Node],
    geometries: &[GeometryConfig],
    settings: &EnergySettings,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut grating = Vec::with_capacity(nodes.len());
    let mut slab = Vec::with_capacity(nodes.len());
    let mut max_condition: f64 = 0.0;
    for node in nodes {
        let v = node_values(
            profile,
            node,
            settings.n_trunc,
            geometries,
            &settings.slab,
            &settings.channel,
        )?;
        max_condition = max_condition.max(v.condition);
        grating.push(v.grating);
        slab.push(v.slab);
    }
    Ok((reduce(nodes, &grating), reduce(nodes, &slab), max_condition))
}

/// Assembles sweep points from weighted sums and optional coarse sums.
pub fn assemble_points(
    geometries: &[GeometryConfig],
    energy: &[f64],
    slab: &[f64],
    coarse_energy: Option<&[f64]>,
) -> Vec<EnergyPoint> {
    geometries
        .iter()
        .enumerate()
        .map(|(i, g)| EnergyPoint {
            delta_z: g.delta_z,
            delta_x: g.delta_x,
            energy: energy[i],
            slab_energy: slab[i],
            ratio: energy[i] / slab[i],
            est_error: coarse_energy.map_or(f64::NAN, |c| (energy[i] - c[i]).abs()),
        })
        .collect()
}

/// Energy per area for every geometry, sequentially in node order.
pub fn energy_sweep(
    profile: &FourierProfile,
    geometries: &[GeometryConfig],
    quadrature: &QuadratureSpec,
    settings: &EnergySettings,
) -> Result<EnergySweepResult> {
    let nodes = quadrature.nodes(profile.period())?;
    let (energy, slab, mut max_condition) = sweep_sums(profile, &nodes, geometries, settings)?;
    let mut evaluations = nodes.len();
    let mut coarse = None;
    if settings.refinement_tol.is_some() {
        let coarse_nodes = quadrature.halved().nodes(profile.period())?;
        let (c, _, cond) = sweep_sums(profile, &coarse_nodes, geometries, settings)?;
        max_condition = max_condition.max(cond);
        evaluations += coarse_nodes.len();
        coarse = Some(c);
    }
    let points = assemble_points(geometries, &energy, &slab, coarse.as_deref());
    let converged = settings
        .refinement_tol
        .map(|tol| points.iter().all(|p| p.est_error <= tol * p.energy.abs()));
    Ok(EnergySweepResult {
        points,
        n_trunc: settings.n_trunc,
        node_count: nodes.len(),
        integrand_evaluations: evaluations,
        max_condition,
        converged,
    })
}

/// Analytic slab energy per area on the same grid and harmonics; needs no
/// differential equation solves.
pub fn slab_energy(
    slab: &SlabBaseline,
    period: f64,
    n_trunc: usize,
    delta_z: f64,
    quadrature: &QuadratureSpec,
) -> Result<f64> {
    let nodes = quadrature.nodes(period)?;
    let geometry = [GeometryConfig::new(delta_z, 0.0)];
    let mut sum = 0.0;
    for node in &nodes {
        let basis = build_basis(
            Frequency::imaginary(node.kappa),
            node.kx0,
            node.ky0,
            n_trunc,
            period,
        )?;
        sum += node.weight * slab_values(&basis, &geometry, slab)[0];
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::RuleKind;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const L: f64 = 2.0 * PI;

    #[test]
    fn translation_examples() {
        let b = build_basis(Frequency::imaginary(1.0), 0.0, 0.0, 0, L).unwrap();
        let u = translation_matrix(&b, 3.0, 0.0);
        assert_relative_eq!(u[0].re, (-3.0f64).exp(), max_relative = 1e-14);
        assert_eq!(u[0], u[1]);
        let b = build_basis(Frequency::imaginary(0.4), 0.3, 0.2, 2, L).unwrap();
        let id = translation_matrix(&b, 0.0, 0.0);
        assert!(id.iter().all(|z| (z - 1.0).norm() < 1e-15));
        let a = translation_matrix(&b, 5.0, 0.0);
        let c = translation_matrix(&b, 5.0, L);
        // period shift multiplies every entry by exp(i kx0 L)
        let bloch = (I * 0.3 * L).exp();
        for i in 0..a.len() {
            assert!((c[i] - a[i] * bloch).norm() < 1e-14);
        }
    }

    #[test]
    fn return_basis_negates_wavevectors() {
        let b = build_basis(Frequency::imaginary(0.4), 0.3, 0.2, 2, L).unwrap();
        let back = return_basis(Frequency::imaginary(0.4), 0.3, 0.2, 2, L).unwrap();
        for slot in 0..b.n_harmonics() {
            assert_relative_eq!(back.kx[slot], -b.kx[slot], max_relative = 1e-14);
            assert_eq!(back.kz_harmonic[slot], b.kz_harmonic[slot]);
        }
    }

    #[test]
    fn vacuum_integrand_vanishes() {
        let vac = FourierProfile::vacuum(L, 2.0);
        let settings = ChannelSettings::for_profile(&vac);
        let v = integrand(
            &vac,
            0.5,
            0.1,
            0.1,
            1,
            &GeometryConfig::new(5.0, 0.0),
            &settings,
        )
        .unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn slab_reflection_examples() {
        // normal incidence, eps = 4: Gamma = -1/3 and the thin-slab factor
        let kz = Complex64::new(1.0, 0.0);
        let (te, tm) = slab_reflection(4.0, 0.1, Frequency::real(1.0), kz, 0.0);
        let beta = 2.0;
        let g = Complex64::new(-1.0 / 3.0, 0.0);
        let round = (4.0 * I * beta * 0.1).exp();
        let expected = g * (1.0 - round) / (1.0 - g * g * round) * (-2.0 * I * 0.1).exp();
        assert!((te - expected).norm() < 1e-14);
        // TE and TM coincide at normal incidence
        assert!((te - tm).norm() < 1e-14);
        // no contrast
        let (te, tm) = slab_reflection(
            1.0,
            2.0,
            Frequency::imaginary(0.3),
            Complex64::new(0.0, 0.5),
            0.16,
        );
        assert!(te.norm() < 1e-15 && tm.norm() < 1e-15);
        // Fabry-Perot transparency: 4 beta w = 2 pi
        let (te, _) = slab_reflection(4.0, PI / 4.0, Frequency::real(1.0), kz, 0.0);
        assert!(te.norm() < 1e-14);
    }

    #[test]
    fn slab_energy_is_negative_and_decays() {
        let slab = SlabBaseline {
            permittivity: 4.0,
            half_width: 2.0,
        };
        let q = QuadratureSpec {
            n_kappa: 4,
            n_kx: 2,
            n_ky: 4,
            ..Default::default()
        };
        let e: Vec<f64> = [5.0, 6.0, 7.0]
            .iter()
            .map(|dz| slab_energy(&slab, L, 2, *dz, &q).unwrap())
            .collect();
        assert!(e.iter().all(|v| *v < 0.0));
        assert!(e[0].abs() > e[1].abs() && e[1].abs() > e[2].abs());
        let none = SlabBaseline {
            permittivity: 1.0,
            half_width: 2.0,
        };
        assert_eq!(slab_energy(&none, L, 2, 5.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn geometry_validation() {
        assert!(GeometryConfig::new(4.0, 0.0).validate(2.0, 0.5).is_err());
        assert!(GeometryConfig::new(4.2, 0.0)
            .validate(2.0, 0.5)
            .unwrap()
            .is_some());
        assert!(GeometryConfig::new(5.0, 0.0)
            .validate(2.0, 0.5)
            .unwrap()
            .is_none());
    }

    #[test]
    fn default_truncation_for_reference_period() {
        assert_eq!(default_truncation(L, 2.5), 2);
        assert_eq!(default_truncation(L, 1.0), 1);
    }

    #[test]
    fn vacuum_sweep_is_zero() {
        let vac = FourierProfile::vacuum(L, 2.0);
        let q = QuadratureSpec {
            n_kappa: 1,
            n_kx: 1,
            n_ky: 1,
            rule: RuleKind::GaussLegendrePanels,
            ..Default::default()
        };
        let mut settings = EnergySettings::for_profile(&vac, &q, 2.0);
        settings.n_trunc = 0;
        let res = energy_sweep(&vac, &[GeometryConfig::new(5.0, 0.0)], &q, &settings).unwrap();
        assert!(res.points[0].energy.abs() < 1e-14);
        assert!(res.points[0].slab_energy < 0.0);
    }
}
