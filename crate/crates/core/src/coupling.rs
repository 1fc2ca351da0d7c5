//! Coupling matrices of the generalized Helmholtz operator
//! `curl curl E - eps grad div (eps E) - k^2 eps E` in a channel basis.
//!
//! With `E = sum_n F_n(z) exp(i k_n x + i ky y)` the operator becomes
//! `A (-F'' + D1 F' + D0 F)`, where `A` is the identity on x, y rows and the
//! Toeplitz matrix of `eps^2` on z rows. `D0` and `D1` returned here are
//! already multiplied by `A^{-1}`.
//!
//! Products with `eps` are truncated to the retained harmonics after every
//! multiplication (Galerkin truncation). With that choice the truncated
//! operator still splits exactly into transverse and longitudinal parts.
//! In vacuum the assembly reduces to `D1 = 0`, `D0 = -k_z^2` bit for bit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::ModeBasis;
use crate::linalg;
use crate::profile::FourierProfile;

type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct CouplingMatrices {
    pub d0: CMat,
    pub d1: CMat,
    /// Analytic z-derivative of `d1`; empty when not requested.
    pub d1_dz: CMat,
    /// Leading coefficient `A` of `-F''` in the raw operator.
    pub leading: CMat,
    pub evaluated_at: f64,
}

/// Precomputed channel data for repeated assembly along z.
#[derive(Debug, Clone)]
pub struct CouplingAssembler<'a> {
    profile: &'a FourierProfile,
    basis: &'a ModeBasis,
    kx: CMat,
    kx2: CMat,
    minus_kz2: Vec<Complex64>,
    ky: Complex64,
    k: Complex64,
    k2: Complex64,
    vacuum: bool,
}

/// Toeplitz matrices of the deviation `eps - 1` and its z-derivatives.
struct ToeplitzJets {
    d: CMat,
    dp: CMat,
    dpp: CMat,
    vacuum: bool,
}

impl<'a> CouplingAssembler<'a> {
    pub fn new(profile: &'a FourierProfile, basis: &'a ModeBasis) -> Self {
        let nh = basis.n_harmonics();
        let kx = CMat::from_diagonal(&nalgebra::DVector::from_fn(nh, |i, _| {
            Complex64::new(basis.kx[i], 0.0)
        }));
        let kx2 = &kx * &kx;
        let minus_kz2 = basis.kz_harmonic.iter().map(|kz| -(kz * kz)).collect();
        CouplingAssembler {
            profile,
            basis,
            kx,
            kx2,
            minus_kz2,
            ky: Complex64::new(basis.ky0, 0.0),
            k: basis.k(),
            k2: basis.frequency.squared(),
            vacuum: profile.is_vacuum(),
        }
    }

    pub fn basis(&self) -> &ModeBasis {
        self.basis
    }

    fn jets(&self, z: f64) -> ToeplitzJets {
        let nh = self.basis.n_harmonics();
        let mut d = CMat::zeros(nh, nh);
        let mut dp = CMat::zeros(nh, nh);
        let mut dpp = CMat::zeros(nh, nh);
        if self.vacuum {
            return ToeplitzJets {
                d,
                dp,
                dpp,
                vacuum: true,
            };
        }
        let span = nh as i64 - 1;
        let mut any = false;
        for m in -span..=span {
            let jet = self.profile.eval_jet(m, self.k, z);
            if jet.value == Complex64::new(0.0, 0.0)
                && jet.dz == Complex64::new(0.0, 0.0)
                && jet.dz2 == Complex64::new(0.0, 0.0)
            {
                continue;
            }
            any = true;
            for i in 0..nh {
                let j = i as i64 - m;
                if j >= 0 && (j as usize) < nh {
                    let j = j as usize;
                    d[(i, j)] = jet.value;
                    dp[(i, j)] = jet.dz;
                    dpp[(i, j)] = jet.dz2;
                }
            }
        }
        ToeplitzJets {
            d,
            dp,
            dpp,
            vacuum: !any,
        }
    }

    /// Coupling matrices at `z`; `d1_dz` is filled only when `with_dz` is set.
    pub fn at(&self, z: f64, with_dz: bool) -> CouplingMatrices {
        let nh = self.basis.n_harmonics();
        let dim = 3 * nh;
        let jets = self.jets(z);
        let mut d0 = CMat::zeros(dim, dim);
        for (slot, v) in self.minus_kz2.iter().enumerate() {
            for c in 0..3 {
                d0[(3 * slot + c, 3 * slot + c)] = *v;
            }
        }
        if jets.vacuum {
            return CouplingMatrices {
                d0,
                d1: CMat::zeros(dim, dim),
                d1_dz: if with_dz {
                    CMat::zeros(dim, dim)
                } else {
                    CMat::zeros(0, 0)
                },
                leading: CMat::identity(dim, dim),
                evaluated_at: z,
            };
        }

        let ToeplitzJets { d, dp, dpp, .. } = jets;
        let id = CMat::identity(nh, nh);
        let e = &id + &d;
        let (kx, kx2, ky, k2) = (&self.kx, &self.kx2, self.ky, self.k2);

        // eps K eps - K and eps eps - 1
        let dk = &d * kx;
        let ekd = &dk + kx * &d + &dk * &d;
        let dd2 = &d * Complex64::new(2.0, 0.0) + &d * &d;
        let dk2 = &d * kx2;
        let ek2d = &dk2 + kx2 * &d + &dk2 * &d;
        let e_dp = &e * &dp;
        let ek_dp = &e * kx * &dp;
        let e_dpp = &e * &dpp;

        let minus_i_ekd = &ekd * (-I);
        let minus_i_ky_dd2 = &dd2 * (-I * ky);

        // x row
        add_block(&mut d0, 0, 0, &(&ek2d - &d * k2));
        add_block(&mut d0, 0, 1, &(&ekd * ky));
        add_block(&mut d0, 0, 2, &(&ek_dp * (-I)));
        // y row
        add_block(&mut d0, 1, 0, &(&ekd * ky));
        add_block(&mut d0, 1, 1, &(&dd2 * (ky * ky) - &d * k2));
        add_block(&mut d0, 1, 2, &(&e_dp * (-I * ky)));
        // z row
        add_block(&mut d0, 2, 0, &(&ek_dp * (-I)));
        add_block(&mut d0, 2, 1, &(&e_dp * (-I * ky)));
        add_block(&mut d0, 2, 2, &(-&e_dpp - &d * k2));

        let mut d1 = CMat::zeros(dim, dim);
        add_block(&mut d1, 0, 2, &minus_i_ekd);
        add_block(&mut d1, 1, 2, &minus_i_ky_dd2);
        add_block(&mut d1, 2, 0, &minus_i_ekd);
        add_block(&mut d1, 2, 1, &minus_i_ky_dd2);
        add_block(&mut d1, 2, 2, &(&e_dp * Complex64::new(-2.0, 0.0)));

        let a_zz = &id + &dd2;
        let mut leading = CMat::identity(dim, dim);
        set_block(&mut leading, 2, 2, &a_zz);

        let lu = a_zz.clone().lu();
        normalize_z_rows(&lu, &mut d0);
        normalize_z_rows(&lu, &mut d1);

        let d1_dz = if with_dz {
            let ekd_dz = &dp * kx * &e + &e * kx * &dp;
            let dd2_dz = &dp * &e + &e * &dp;
            let mut raw = CMat::zeros(dim, dim);
            add_block(&mut raw, 0, 2, &(&ekd_dz * (-I)));
            add_block(&mut raw, 1, 2, &(&dd2_dz * (-I * ky)));
            add_block(&mut raw, 2, 0, &(&ekd_dz * (-I)));
            add_block(&mut raw, 2, 1, &(&dd2_dz * (-I * ky)));
            add_block(
                &mut raw,
                2,
                2,
                &((&dp * &dp + &e_dpp) * Complex64::new(-2.0, 0.0)),
            );
            // (A^{-1} R)' = A^{-1} (R' - A' D1) on the z rows
            let d1_z = z_rows(&d1);
            let correction = &dd2_dz * &d1_z;
            for (r, slot) in (0..nh).map(|s| (3 * s + 2, s)) {
                for col in 0..dim {
                    raw[(r, col)] -= correction[(slot, col)];
                }
            }
            normalize_z_rows(&lu, &mut raw);
            raw
        } else {
            CMat::zeros(0, 0)
        };

        CouplingMatrices {
            d0,
            d1,
            d1_dz,
            leading,
            evaluated_at: z,
        }
    }
}

pub fn build_coupling_matrices(
    profile: &FourierProfile,
    basis: &ModeBasis,
    z: f64,
) -> CouplingMatrices {
    CouplingAssembler::new(profile, basis).at(z, true)
}

fn add_block(m: &mut CMat, rc: usize, cc: usize, block: &CMat) {
    let nh = block.nrows();
    for i in 0..nh {
        for j in 0..nh {
            m[(3 * i + rc, 3 * j + cc)] += block[(i, j)];
        }
    }
}

fn set_block(m: &mut CMat, rc: usize, cc: usize, block: &CMat) {
    let nh = block.nrows();
    for i in 0..nh {
        for j in 0..nh {
            m[(3 * i + rc, 3 * j + cc)] = block[(i, j)];
        }
    }
}

fn z_rows(m: &CMat) -> CMat {
    let nh = m.nrows() / 3;
    CMat::from_fn(nh, m.ncols(), |s, c| m[(3 * s + 2, c)])
}

fn normalize_z_rows(lu: &linalg::Lu, m: &mut CMat) {
    let nh = m.nrows() / 3;
    let solved = lu
        .solve(&z_rows(m))
        .expect("eps^2 Toeplitz matrix is positive definite");
    for s in 0..nh {
        for c in 0..m.ncols() {
            m[(3 * s + 2, c)] = solved[(s, c)];
        }
    }
}
