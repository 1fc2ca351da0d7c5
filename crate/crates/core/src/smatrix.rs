//! Wronskian extraction of parity-channel S-matrices, the reflection matrix
//! and its TE/TM projection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::{self, build_basis, Frequency, ModeBasis};
use crate::coupling::{CouplingAssembler, CouplingMatrices};
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs};
use crate::profile::FourierProfile;
use crate::solve::{integrate_outgoing, integrate_regular, CoupledSolution, OdeSettings, Parity};

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Condition number above which a Wronskian is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Per-channel numerical controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSettings {
    pub ode: OdeSettings,
    /// Start of the inward integration, in the numerical vacuum.
    pub z_start: f64,
    /// Common fitting point of the inward and outward integrations.
    pub z_fit: f64,
}

impl ChannelSettings {
    /// Integration from `4w` inward and from the origin outward to `w`.
    pub fn for_profile(profile: &FourierProfile) -> Self {
        let w = profile.half_width();
        ChannelSettings {
            ode: OdeSettings::default(),
            z_start: 4.0 * w,
            z_fit: w,
        }
    }
}

/// Wronskian with the explicit exponential factors stripped:
/// `H (G' + G iK) - (s i M K H + H') G - H D1 G`.
pub fn reduced_wronskian(
    parity: Parity,
    regular: &CoupledSolution,
    outgoing: &CoupledSolution,
    coupling: &CouplingMatrices,
    basis: &ModeBasis,
) -> CMat {
    let s = parity.sign();
    let h = &regular.value;
    let hp = &regular.derivative;
    let g = &outgoing.value;
    let gp = &outgoing.derivative;
    let ikz = basis.kz_diag.map(|kz| I * kz);
    let smk = DVector::from_fn(basis.dim(), |i, _| {
        I * s * basis.m_diag[i] * basis.kz_diag[i]
    });

    let mut g_shift = gp.clone();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            g_shift[(i, j)] += g[(i, j)] * ikz[j];
        }
    }
    let mut phi_prime = hp.clone();
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            phi_prime[(i, j)] += smk[i] * h[(i, j)];
        }
    }
    h * g_shift - phi_prime * g - h * (&coupling.d1 * g)
}

/// Generalized Wronskian
/// `[Phi^T F' - (Phi^T)' F - Phi^T D1 F] N` at the common fitting point, with
/// `Phi^T = exp(s i M K z) H` and `F = G exp(i K z)`.
pub fn wronskian(
    parity: Parity,
    regular: &CoupledSolution,
    outgoing: &CoupledSolution,
    coupling: &CouplingMatrices,
    basis: &ModeBasis,
) -> CMat {
    let z = outgoing.at_z;
    let s = parity.sign();
    let left = DVector::from_fn(basis.dim(), |i, _| {
        (I * s * basis.m_diag[i] * basis.kz_diag[i] * z).exp()
    });
    let right = basis
        .kz_diag
        .zip_map(&basis.flux_diag, |kz, n| (I * kz * z).exp() * n);
    let reduced = reduced_wronskian(parity, regular, outgoing, coupling, basis);
    linalg::scale_rows_cols(&left, &reduced, &right)
}

fn check_condition(cond: f64, basis: &ModeBasis) -> Result<()> {
    if cond <= MAX_CONDITION {
        Ok(())
    } else {
        Err(Error::IllConditioned {
            cond,
            channel: basis.tag(),
        })
    }
}

/// `S = W(k)^{-1} M W(-k) M` by a linear solve. Condition numbers are those
/// of the row- and column-equilibrated Wronskian.
pub fn s_matrix(w_plus_k: &CMat, w_minus_k: &CMat, basis: &ModeBasis) -> Result<CMat> {
    let m = basis.m_diag.map(|v| Complex64::new(v, 0.0));
    let rhs = linalg::scale_rows_cols(&m, w_minus_k, &m);
    let (x, cond) = linalg::solve_equilibrated(w_plus_k, &rhs, "Wronskian")?;
    check_condition(cond, basis)?;
    Ok(x)
}

/// Same S-matrix from the reduced Wronskians at `z_fit`, keeping the
/// exponential factors out of the linear solve. Returns `(S, cond)`.
pub fn s_matrix_reduced(
    parity: Parity,
    reduced_plus_k: &CMat,
    reduced_minus_k: &CMat,
    basis: &ModeBasis,
    z_fit: f64,
) -> Result<(CMat, f64)> {
    let s = parity.sign();
    let dim = basis.dim();
    let one = DVector::from_element(dim, Complex64::new(1.0, 0.0));
    // M exp(-2 s i M K z)
    let middle = DVector::from_fn(dim, |i, _| {
        let m = basis.m_diag[i];
        (-2.0 * I * s * m * basis.kz_diag[i] * z_fit).exp() * m
    });
    let rhs = linalg::scale_rows_cols(&middle, reduced_minus_k, &one);
    let (x, cond) = linalg::solve_equilibrated(reduced_plus_k, &rhs, "Wronskian")?;
    check_condition(cond, basis)?;
    // N^{-1} e^{-iKz} X e^{-iKz} N M
    let left = basis
        .kz_diag
        .zip_map(&basis.flux_diag, |kz, n| (-I * kz * z_fit).exp() / n);
    let right = DVector::from_fn(dim, |i, _| {
        (-I * basis.kz_diag[i] * z_fit).exp() * basis.flux_diag[i] * basis.m_diag[i]
    });
    Ok((linalg::scale_rows_cols(&left, &x, &right), cond))
}

pub fn reflection(s_plus: &CMat, s_minus: &CMat) -> CMat {
    (s_plus - s_minus) * Complex64::new(0.5, 0.0)
}

/// TE/TM coordinates `T^T r T`, with `T` the transverse columns. `T^T` is
/// the left inverse of `T` that annihilates the longitudinal modes.
pub fn project_reflection(r_full: &CMat, transverse: &CMat) -> CMat {
    transverse.transpose() * r_full * transverse
}

/// TE/TM coordinates using the Moore-Penrose pairing `T^+ r T`. Agrees with
/// [`project_reflection`] whenever `r` leaves the transverse subspace invariant.
pub fn project_reflection_pinv(r_full: &CMat, transverse: &CMat) -> Result<CMat> {
    Ok(linalg::pseudo_inverse(transverse)? * r_full * transverse)
}

#[derive(Debug, Clone)]
pub struct ScatteringResult {
    /// Channel basis at `+k`.
    pub basis: ModeBasis,
    pub s_plus: CMat,
    pub s_minus: CMat,
    pub r_full: CMat,
    pub r_transverse: CMat,
    /// Largest condition number among the reduced Wronskians at `+k`.
    pub condition: f64,
    pub ode_steps: usize,
}

/// Everything produced at one frequency sign of one channel.
#[derive(Debug, Clone)]
pub struct SignedChannel {
    pub basis: ModeBasis,
    pub outgoing: CoupledSolution,
    pub regular: [CoupledSolution; 2],
    pub coupling: CouplingMatrices,
}

impl SignedChannel {
    pub fn solve(
        profile: &FourierProfile,
        basis: ModeBasis,
        z_start: f64,
        z_fit: f64,
        ode: &OdeSettings,
    ) -> Result<Self> {
        let outgoing = integrate_outgoing(profile, &basis, z_start, z_fit, ode)?;
        let even = integrate_regular(Parity::Even, profile, &basis, z_fit, ode)?;
        let odd = integrate_regular(Parity::Odd, profile, &basis, z_fit, ode)?;
        let coupling = CouplingAssembler::new(profile, &basis).at(z_fit, false);
        Ok(SignedChannel {
            basis,
            outgoing,
            regular: [even, odd],
            coupling,
        })
    }

    fn regular(&self, parity: Parity) -> &CoupledSolution {
        match parity {
            Parity::Even => &self.regular[0],
            Parity::Odd => &self.regular[1],
        }
    }

    pub fn reduced_wronskian(&self, parity: Parity) -> CMat {
        reduced_wronskian(
            parity,
            self.regular(parity),
            &self.outgoing,
            &self.coupling,
            &self.basis,
        )
    }

    pub fn wronskian(&self, parity: Parity) -> CMat {
        wronskian(
            parity,
            self.regular(parity),
            &self.outgoing,
            &self.coupling,
            &self.basis,
        )
    }

    fn steps(&self) -> usize {
        self.outgoing.stats.accepted + self.regular.iter().map(|r| r.stats.accepted).sum::<usize>()
    }
}

/// Both frequency signs of a channel, integrated independently.
pub fn solve_channel_pair(
    profile: &FourierProfile,
    basis: &ModeBasis,
    settings: &ChannelSettings,
) -> Result<[SignedChannel; 2]> {
    let plus = SignedChannel::solve(
        profile,
        basis.clone(),
        settings.z_start,
        settings.z_fit,
        &settings.ode,
    )?;
    let minus = SignedChannel::solve(
        profile,
        basis.flipped(),
        settings.z_start,
        settings.z_fit,
        &settings.ode,
    )?;
    Ok([plus, minus])
}

/// Full per-channel pipeline: integrations, Wronskians, S-matrices and the
/// projected reflection matrix.
pub fn scatter_channel(
    profile: &FourierProfile,
    frequency: Frequency,
    kx0: f64,
    ky0: f64,
    n_trunc: usize,
    settings: &ChannelSettings,
) -> Result<ScatteringResult> {
    let basis = build_basis(frequency, kx0, ky0, n_trunc, profile.period())?;
    scatter_basis(profile, &basis, settings).map_err(|e| e.at(basis.tag()))
}

pub fn scatter_basis(
    profile: &FourierProfile,
    basis: &ModeBasis,
    settings: &ChannelSettings,
) -> Result<ScatteringResult> {
    let [plus, minus] = solve_channel_pair(profile, basis, settings)?;
    let mut condition: f64 = 0.0;
    let mut s = Vec::with_capacity(2);
    for parity in [Parity::Even, Parity::Odd] {
        let (sp, cond) = s_matrix_reduced(
            parity,
            &plus.reduced_wronskian(parity),
            &minus.reduced_wronskian(parity),
            basis,
            settings.z_fit,
        )?;
        condition = condition.max(cond);
        s.push(sp);
    }
    let s_minus = s.pop().unwrap();
    let s_plus = s.pop().unwrap();
    let r_full = reflection(&s_plus, &s_minus);
    let r_transverse = project_reflection(&r_full, &basis::transverse_basis(basis));
    Ok(ScatteringResult {
        basis: basis.clone(),
        s_plus,
        s_minus,
        r_full,
        r_transverse,
        condition,
        ode_steps: plus.steps() + minus.steps(),
    })
}

/// `max |S_pp^dagger S_pp - 1|` over the propagating block (real axis).
pub fn unitarity_defect(s: &CMat, basis: &ModeBasis) -> Result<f64> {
    let mask = basis::propagating_mask(basis)?;
    let idx: Vec<usize> = (0..basis.dim()).filter(|i| mask[i / 3]).collect();
    if idx.is_empty() {
        return Ok(0.0);
    }
    let block = CMat::from_fn(idx.len(), idx.len(), |a, b| s[(idx[a], idx[b])]);
    let defect = block.adjoint() * &block - CMat::identity(idx.len(), idx.len());
    Ok(max_abs(&defect))
}

/// `max |[S, P]| / max |S|`.
pub fn commutator_defect(s: &CMat, projector: &CMat) -> f64 {
    let scale = max_abs(s);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(s * projector - projector * s)) / scale
}

/// Largest entry of `W(z1) - W(z2)` relative to the largest entry of `W(z1)`,
/// maximized over both parities.
pub fn wronskian_drift(
    profile: &FourierProfile,
    basis: &ModeBasis,
    settings: &ChannelSettings,
    z_other: f64,
) -> Result<f64> {
    let a = SignedChannel::solve(
        profile,
        basis.clone(),
        settings.z_start,
        settings.z_fit,
        &settings.ode,
    )?;
    let b = SignedChannel::solve(
        profile,
        basis.clone(),
        settings.z_start,
        z_other,
        &settings.ode,
    )?;
    let mut drift: f64 = 0.0;
    for parity in [Parity::Even, Parity::Odd] {
        let wa = a.wronskian(parity);
        let wb = b.wronskian(parity);
        drift = drift.max(max_abs(&(&wa - &wb)) / max_abs(&wa));
    }
    Ok(drift)
}
