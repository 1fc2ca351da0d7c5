//! Coupled-channel basis for one Bloch channel.
//!
//! A channel is fixed by the frequency argument and the Bloch momenta
//! `(kx0, ky0)`. Harmonics `n in [-N, N]` carry `k_x = kx0 + 2 pi n / L`, and
//! every harmonic has three Cartesian field components, so the flattened
//! index is `3 (n + N) + c` with `c = 0, 1, 2` for `x, y, z`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{ChannelTag, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Real,
    Imaginary,
}

/// Frequency argument: `k = sign * magnitude` on the real axis or
/// `k = sign * i * magnitude` on the imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub axis: Axis,
    pub magnitude: f64,
    pub sign: i8,
}

impl Frequency {
    pub fn real(k: f64) -> Self {
        Frequency {
            axis: Axis::Real,
            magnitude: k,
            sign: 1,
        }
    }

    pub fn imaginary(kappa: f64) -> Self {
        Frequency {
            axis: Axis::Imaginary,
            magnitude: kappa,
            sign: 1,
        }
    }

    /// Same magnitude and axis, opposite sign.
    pub fn flipped(self) -> Self {
        Frequency {
            sign: -self.sign,
            ..self
        }
    }

    pub fn value(&self) -> Complex64 {
        let s = f64::from(self.sign);
        match self.axis {
            Axis::Real => Complex64::new(s * self.magnitude, 0.0),
            Axis::Imaginary => Complex64::new(0.0, s * self.magnitude),
        }
    }

    /// `k^2`, independent of the sign.
    pub fn squared(&self) -> Complex64 {
        match self.axis {
            Axis::Real => Complex64::new(self.magnitude * self.magnitude, 0.0),
            Axis::Imaginary => Complex64::new(-self.magnitude * self.magnitude, 0.0),
        }
    }
}

/// Diagonal data of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    pub frequency: Frequency,
    pub kx0: f64,
    pub ky0: f64,
    pub n_trunc: usize,
    pub period: f64,
    /// `kx0 + 2 pi n / L` for `n = -N..=N`.
    pub kx: Vec<f64>,
    /// `k_z` per harmonic (sign applied).
    pub kz_harmonic: Vec<Complex64>,
    /// `k_z` per flattened index.
    pub kz_diag: DVector<Complex64>,
    /// `+1` for x, y components and `-1` for z.
    pub m_diag: DVector<f64>,
    /// Flux normalization `sqrt(k / k_z)` per flattened index.
    pub flux_diag: DVector<Complex64>,
}

impl ModeBasis {
    pub fn n_harmonics(&self) -> usize {
        2 * self.n_trunc + 1
    }

    pub fn dim(&self) -> usize {
        3 * self.n_harmonics()
    }

    pub fn harmonic(&self, slot: usize) -> i64 {
        slot as i64 - self.n_trunc as i64
    }

    pub fn k(&self) -> Complex64 {
        self.frequency.value()
    }

    pub fn tag(&self) -> ChannelTag {
        ChannelTag {
            imaginary_axis: self.frequency.axis == Axis::Imaginary,
            magnitude: self.frequency.magnitude,
            sign: self.frequency.sign,
            kx0: self.kx0,
            ky0: self.ky0,
            n_trunc: self.n_trunc,
        }
    }

    /// The same channel at the opposite frequency sign.
    pub fn flipped(&self) -> ModeBasis {
        ModeBasis {
            frequency: self.frequency.flipped(),
            kz_harmonic: self.kz_harmonic.iter().map(|k| -k).collect(),
            kz_diag: -&self.kz_diag,
            ..self.clone()
        }
    }

    /// Basis vectors of one harmonic: TE, TM and longitudinal 3-vectors.
    pub fn mode_vectors(&self, slot: usize) -> ModeVectors {
        let k = self.k();
        let kx = Complex64::new(self.kx[slot], 0.0);
        let ky = Complex64::new(self.ky0, 0.0);
        let kz = self.kz_harmonic[slot];
        let rho = self.kx[slot].hypot(self.ky0);
        let longitudinal = [kx / k, ky / k, kz / k];
        if rho == 0.0 {
            // normal incidence: limit ky -> 0+ at kx = 0
            return ModeVectors {
                te: [ONE, ZERO, ZERO],
                tm: [ZERO, kz / k, ZERO],
                longitudinal,
            };
        }
        let rho = Complex64::new(rho, 0.0);
        ModeVectors {
            te: [ky / rho, -kx / rho, ZERO],
            tm: [
                kz * kx / (k * rho),
                kz * ky / (k * rho),
                (kz * kz / k - k) / rho,
            ],
            longitudinal,
        }
    }
}

/// TE (`M`), TM (`N`) and longitudinal (`L`) polarization vectors of one
/// harmonic. They are orthonormal under the bilinear form `a^T b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeVectors {
    pub te: [Complex64; 3],
    pub tm: [Complex64; 3],
    pub longitudinal: [Complex64; 3],
}

/// `k_z` with `Re k_z > 0` for propagating modes and `Im k_z > 0` otherwise.
fn kz_branch(freq: &Frequency, rho2: f64) -> Complex64 {
    match freq.axis {
        Axis::Real => {
            let d = freq.magnitude * freq.magnitude - rho2;
            if d >= 0.0 {
                Complex64::new(d.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, (-d).sqrt())
            }
        }
        Axis::Imaginary => Complex64::new(0.0, (freq.magnitude * freq.magnitude + rho2).sqrt()),
    }
}

pub fn build_basis(
    frequency: Frequency,
    kx0: f64,
    ky0: f64,
    n_trunc: usize,
    period: f64,
) -> Result<ModeBasis> {
    if !(period > 0.0) {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    if !(frequency.magnitude > 0.0) || frequency.sign.abs() != 1 {
        return Err(Error::InvalidParameter(
            "frequency magnitude must be positive with sign +-1".into(),
        ));
    }
    // tiny slack so that kx0 = pi / L computed in floating point is accepted
    if kx0.abs() > PI / period * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "|kx0| = {} exceeds pi/L",
            kx0.abs()
        )));
    }
    if !(ky0 >= 0.0) {
        return Err(Error::InvalidParameter("ky0 must be non-negative".into()));
    }
    let nh = 2 * n_trunc + 1;
    let g = 2.0 * PI / period;
    let kx: Vec<f64> = (0..nh)
        .map(|slot| kx0 + g * (slot as f64 - n_trunc as f64))
        .collect();
    let sign = f64::from(frequency.sign);
    let mut kz_harmonic = Vec::with_capacity(nh);
    for (slot, &kxn) in kx.iter().enumerate() {
        let kz = kz_branch(&frequency, kxn * kxn + ky0 * ky0);
        if kz == ZERO {
            return Err(Error::Grazing {
                harmonic: slot as i64 - n_trunc as i64,
                channel: ChannelTag {
                    imaginary_axis: frequency.axis == Axis::Imaginary,
                    magnitude: frequency.magnitude,
                    sign: frequency.sign,
                    kx0,
                    ky0,
                    n_trunc,
                },
            });
        }
        kz_harmonic.push(kz * sign);
    }
    let k = frequency.value();
    let kz_diag = DVector::from_fn(3 * nh, |i, _| kz_harmonic[i / 3]);
    let m_diag = DVector::from_fn(3 * nh, |i, _| if i % 3 == 2 { -1.0 } else { 1.0 });
    let flux_diag = DVector::from_fn(3 * nh, |i, _| {
        let kz = kz_harmonic[i / 3];
        match frequency.axis {
            // k / k_z = kappa / q, taken real and positive
            Axis::Imaginary => Complex64::new((k.im / kz.im).sqrt(), 0.0),
            Axis::Real => (k / kz).sqrt(),
        }
    });
    Ok(ModeBasis {
        frequency,
        kx0,
        ky0,
        n_trunc,
        period,
        kx,
        kz_harmonic,
        kz_diag,
        m_diag,
        flux_diag,
    })
}

/// Harmonics with real positive `k_z` (propagating waves), in slot order.
pub fn propagating_mask(basis: &ModeBasis) -> Result<Vec<bool>> {
    if basis.frequency.axis == Axis::Imaginary {
        return Err(Error::ImaginaryAxis);
    }
    let sign = f64::from(basis.frequency.sign);
    Ok(basis
        .kz_harmonic
        .iter()
        .map(|kz| kz.im == 0.0 && sign * kz.re > 0.0)
        .collect())
}

/// Largest `|n|` satisfying the conservative propagation bound
/// `|n| < (L / 2 pi)(|k| - sqrt(kx0^2 + ky0^2))`, or `None` when no harmonic does.
pub fn propagating_cutoff(k: f64, kx0: f64, ky0: f64, period: f64) -> Option<usize> {
    let bound = period / (2.0 * PI) * (k.abs() - kx0.hypot(ky0));
    if bound <= 0.0 {
        return None;
    }
    let n = bound.ceil() - 1.0;
    Some(n.max(0.0) as usize)
}

/// Columns `[TE_n, TM_n]` for every harmonic: a `dim x 2(2N+1)` matrix whose
/// column `2 slot + p` is nonzero only on the three rows of harmonic `slot`.
pub fn transverse_basis(basis: &ModeBasis) -> DMatrix<Complex64> {
    let nh = basis.n_harmonics();
    let mut t = DMatrix::zeros(3 * nh, 2 * nh);
    for slot in 0..nh {
        let v = basis.mode_vectors(slot);
        for c in 0..3 {
            t[(3 * slot + c, 2 * slot)] = v.te[c];
            t[(3 * slot + c, 2 * slot + 1)] = v.tm[c];
        }
    }
    t
}

/// Projector onto the TE/TM subspace along the longitudinal direction,
/// `1 - L L^T` per harmonic block.
pub fn transverse_projector(basis: &ModeBasis) -> DMatrix<Complex64> {
    let nh = basis.n_harmonics();
    let mut p = DMatrix::identity(3 * nh, 3 * nh);
    for slot in 0..nh {
        let l = basis.mode_vectors(slot).longitudinal;
        for a in 0..3 {
            for b in 0..3 {
                p[(3 * slot + a, 3 * slot + b)] -= l[a] * l[b];
            }
        }
    }
    p
}

/// `exp(i kz z)` per flattened index.
pub fn phase_diag(basis: &ModeBasis, z: f64) -> DVector<Complex64> {
    basis.kz_diag.map(|kz| (I * kz * z).exp())
}
