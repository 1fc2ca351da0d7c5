//! Sharp-slab reflection written with incidence and refraction angles, and a
//! scan comparing it with the scattering pipeline on a steep step.

use std::f64::consts::PI;

use casimir_grating::smatrix::{scatter_channel, ChannelSettings};
use casimir_grating::{FourierProfile, Frequency};
use num_complex::Complex64;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// `(TE, TM)` reflection of a slab of permittivity `eps` occupying `|z| < w`,
/// referenced to `z = 0`, for wavenumber `k` (real or `i kappa`), normal
/// component `kz` and in-plane magnitude `rho`.
pub fn slab_fresnel(eps: f64, w: f64, k: C, kz: C, rho: f64) -> (C, C) {
    let cos_i = kz / k;
    let sin_i = rho / k;
    let sqrt_eps = eps.sqrt();
    let sin_t = sin_i / sqrt_eps;
    let mut cos_t = (C::new(1.0, 0.0) - sin_t * sin_t).sqrt();
    let mut beta = k * sqrt_eps * cos_t;
    if beta.im < 0.0 || (beta.im == 0.0 && beta.re < 0.0) {
        cos_t = -cos_t;
        beta = -beta;
    }
    let gamma = |p: f64| {
        let e = eps.powf(p);
        (cos_i - e * cos_t) / (cos_i + e * cos_t)
    };
    let round = (4.0 * I * beta * w).exp();
    let phase = (-2.0 * I * kz * w).exp();
    let r = |g: C| g * (1.0 - round) / (1.0 - g * g * round) * phase;
    (r(gamma(0.5)), -r(gamma(-0.5)))
}

#[derive(Debug, Clone, Copy)]
pub struct FresnelPoint {
    pub magnitude: f64,
    pub angle_deg: f64,
    pub err_te: f64,
    pub err_tm: f64,
}

/// Relative TE/TM errors of the pipeline on an x-independent step of
/// steepness `s` against the sharp slab, on a frequency-by-angle grid. On the
/// imaginary axis the angle sets `rho = kappa tan(angle)`.
pub fn fresnel_scan(
    imaginary: bool,
    steepness: f64,
    eps: f64,
    magnitudes: &[f64],
    angles_deg: &[f64],
) -> Vec<FresnelPoint> {
    let period = 2.0 * PI;
    let w = 2.0;
    let profile = FourierProfile::step_slab(period, w, steepness, eps).unwrap();
    let mut settings = ChannelSettings::for_profile(&profile);
    settings.ode.rtol = 1e-10;
    settings.ode.atol = 1e-12;
    let mut out = Vec::new();
    for &m in magnitudes {
        for &a in angles_deg {
            let t = a.to_radians();
            let (freq, rho) = if imaginary {
                (Frequency::imaginary(m), m * t.tan())
            } else {
                (Frequency::real(m), m * t.sin())
            };
            // in-plane direction at 30 degrees from the grating vector
            let (kx0, ky0) = (rho * (PI / 6.0).cos(), rho * (PI / 6.0).sin());
            let res = scatter_channel(&profile, freq, kx0, ky0, 0, &settings).unwrap();
            let b = &res.basis;
            let (te, tm) = slab_fresnel(eps, w, b.k(), b.kz_harmonic[0], rho);
            out.push(FresnelPoint {
                magnitude: m,
                angle_deg: a,
                err_te: (res.r_transverse[(0, 0)] - te).norm() / te.norm(),
                err_tm: (res.r_transverse[(1, 1)] - tm).norm() / tm.norm(),
            });
        }
    }
    out
}
