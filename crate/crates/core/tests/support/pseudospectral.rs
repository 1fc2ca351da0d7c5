//! Independent real-space evaluation of the wave operator
//! `curl curl E - eps grad div(eps E) - k^2 eps E` on analytic trial fields,
//! compared with the assembled coupling matrices.
//!
//! Products with `eps` are taken pointwise on an x-grid and projected back
//! onto the retained harmonics; x-derivatives are spectral, z-derivatives use
//! nested 9-point central differences.

use std::f64::consts::PI;
use std::sync::Arc;

use casimir_grating::coupling::build_coupling_matrices;
use casimir_grating::{build_basis, FermiStepParams, FourierProfile, Frequency, ModeBasis};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

type C = Complex64;

const NX: usize = 64;
const H: f64 = 1.0 / 256.0;
const STENCIL: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const I: C = C::new(0.0, 1.0);

/// Per-harmonic, per-component trial field `a exp(b z)`.
pub struct TrialField {
    n_trunc: usize,
    a: Vec<C>,
    b: Vec<C>,
}

impl TrialField {
    pub fn random(rng: &mut ChaCha8Rng, n_trunc: usize) -> Self {
        let dim = 3 * (2 * n_trunc + 1);
        let mut c = |scale: f64| C::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
        let a = (0..dim).map(|_| c(1.0)).collect();
        let b = (0..dim).map(|_| c(1.0)).collect();
        TrialField { n_trunc, a, b }
    }

    pub fn derivative(&self, order: i32, z: f64) -> DVector<C> {
        DVector::from_fn(self.a.len(), |i, _| {
            self.a[i] * self.b[i].powi(order) * (self.b[i] * z).exp()
        })
    }
}

/// Harmonic coefficients of the three components, in FFT order.
#[derive(Clone)]
struct Field([Vec<C>; 3]);

impl Field {
    fn zero() -> Self {
        Field([
            vec![C::new(0.0, 0.0); NX],
            vec![C::new(0.0, 0.0); NX],
            vec![C::new(0.0, 0.0); NX],
        ])
    }
}

fn fft_index(n: i64) -> usize {
    n.rem_euclid(NX as i64) as usize
}

fn signed(m: usize) -> i64 {
    if m < NX / 2 {
        m as i64
    } else {
        m as i64 - NX as i64
    }
}

pub struct Oracle {
    pub profile: FourierProfile,
    pub basis: ModeBasis,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Oracle {
    pub fn new(profile: FourierProfile, basis: ModeBasis) -> Self {
        let mut planner = FftPlanner::new();
        Oracle {
            forward: planner.plan_fft_forward(NX),
            inverse: planner.plan_fft_inverse(NX),
            profile,
            basis,
        }
    }

    fn kx(&self, m: usize) -> f64 {
        self.basis.kx0 + 2.0 * PI * signed(m) as f64 / self.basis.period
    }

    fn sample(&self, field: &TrialField, z: f64) -> Field {
        let values = field.derivative(0, z);
        let mut out = Field::zero();
        let n = field.n_trunc as i64;
        for h in -n..=n {
            for c in 0..3 {
                out.0[c][fft_index(h)] = values[3 * (h + n) as usize + c];
            }
        }
        out
    }

    /// `P_N(eps u)` at height `z`.
    fn eps_times(&self, u: &Field, z: f64) -> Field {
        let k = self.basis.k();
        let eps: Vec<C> = (0..NX)
            .map(|j| {
                let x = self.basis.period * j as f64 / NX as f64;
                self.profile.eval_total(k, x, z)
            })
            .collect();
        let mut out = Field::zero();
        for c in 0..3 {
            // coefficients -> periodic samples
            let mut buf = u.0[c].clone();
            self.inverse.process(&mut buf);
            for (v, e) in buf.iter_mut().zip(&eps) {
                *v *= e;
            }
            self.forward.process(&mut buf);
            for (m, v) in buf.iter().enumerate() {
                if signed(m).unsigned_abs() as usize <= self.basis.n_trunc {
                    out.0[c][m] = v / NX as f64;
                }
            }
        }
        out
    }

    fn dx(&self, u: &[C]) -> Vec<C> {
        u.iter()
            .enumerate()
            .map(|(m, v)| I * self.kx(m) * v)
            .collect()
    }

    fn dy(&self, u: &[C]) -> Vec<C> {
        u.iter().map(|v| I * self.basis.ky0 * v).collect()
    }
}

/// Central first derivative at index `j` of a profile sampled with spacing `H`.
fn dz(samples: &[Vec<C>], j: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); NX];
    for (s, w) in STENCIL.iter().enumerate() {
        let up = &samples[j + s + 1];
        let down = &samples[j - s - 1];
        for m in 0..NX {
            out[m] += (up[m] - down[m]) * (w / H);
        }
    }
    out
}

fn add(a: &[C], b: &[C], sa: f64, sb: f64) -> Vec<C> {
    a.iter().zip(b).map(|(x, y)| x * sa + y * sb).collect()
}

fn curl(o: &Oracle, fields: &[Field], j: usize) -> Field {
    let f = &fields[j];
    let comp = |c: usize| fields.iter().map(|g| g.0[c].clone()).collect::<Vec<_>>();
    let dz_x = dz(&comp(0), j);
    let dz_y = dz(&comp(1), j);
    Field([
        add(&o.dy(&f.0[2]), &dz_y, 1.0, -1.0),
        add(&dz_x, &o.dx(&f.0[2]), 1.0, -1.0),
        add(&o.dx(&f.0[1]), &o.dy(&f.0[0]), 1.0, -1.0),
    ])
}

/// Harmonic coefficients of the wave operator applied to the trial field at `z0`.
pub fn apply_operator(o: &Oracle, field: &TrialField, z0: f64) -> DVector<C> {
    let zs: Vec<f64> = (-8..=8).map(|j| z0 + j as f64 * H).collect();
    let e: Vec<Field> = zs.iter().map(|z| o.sample(field, *z)).collect();
    let de: Vec<Field> = zs.iter().zip(&e).map(|(z, f)| o.eps_times(f, *z)).collect();

    // inner points 4..=12 carry first derivatives, the center 8 the second
    let inner = 4..=12;
    let div: Vec<Vec<C>> = (0..17)
        .map(|j| {
            if !inner.contains(&j) {
                return vec![C::new(0.0, 0.0); NX];
            }
            let dz_z = dz(&de.iter().map(|f| f.0[2].clone()).collect::<Vec<_>>(), j);
            let s = add(&o.dx(&de[j].0[0]), &o.dy(&de[j].0[1]), 1.0, 1.0);
            add(&s, &dz_z, 1.0, 1.0)
        })
        .collect();
    let grad_div = Field([o.dx(&div[8]), o.dy(&div[8]), dz(&div, 8)]);
    let eps_grad_div = o.eps_times(&grad_div, z0);

    let curls: Vec<Field> = (0..17)
        .map(|j| {
            if inner.contains(&j) {
                curl(o, &e, j)
            } else {
                Field::zero()
            }
        })
        .collect();
    let curl_curl = curl(o, &curls, 8);

    let k2 = o.basis.frequency.squared();
    let eps_e = &de[8];
    let n = o.basis.n_trunc as i64;
    DVector::from_fn(o.basis.dim(), |i, _| {
        let h = i as i64 / 3 - n;
        let c = i % 3;
        let m = fft_index(h);
        curl_curl.0[c][m] - eps_grad_div.0[c][m] - k2 * eps_e.0[c][m]
    })
}

pub fn relative_error(a: &DVector<C>, b: &DVector<C>) -> f64 {
    let scale = a
        .iter()
        .chain(b.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    diff / scale
}

pub fn assembled(o: &Oracle, field: &TrialField, z: f64) -> DVector<C> {
    let c = build_coupling_matrices(&o.profile, &o.basis, z);
    let f = field.derivative(0, z);
    let fp = field.derivative(1, z);
    let fpp = field.derivative(2, z);
    &c.leading * (-fpp + &c.d1 * fp + &c.d0 * f)
}

/// Largest relative mismatch over `samples` random channels, heights and
/// fields, with the number of samples actually evaluated.
pub fn max_operator_mismatch(samples: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = FermiStepParams::REFERENCE;
    let profile = FourierProfile::fermi_step(params).unwrap();
    let mut worst: f64 = 0.0;
    let mut evaluated = 0;
    for i in 0..samples {
        let n_trunc = 1 + i % 2;
        let freq = if i % 2 == 0 {
            Frequency::real(rng.gen_range(0.2..2.5))
        } else {
            Frequency::imaginary(rng.gen_range(0.05..2.5))
        };
        let kx0 = rng.gen_range(-0.5..0.5);
        let ky0 = rng.gen_range(0.0..2.0);
        let basis = match build_basis(freq, kx0, ky0, n_trunc, params.period) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let z = rng.gen_range(0.0..3.0);
        let field = TrialField::random(&mut rng, n_trunc);
        let oracle = Oracle::new(profile.clone(), basis);
        let err = relative_error(
            &apply_operator(&oracle, &field, z),
            &assembled(&oracle, &field, z),
        );
        worst = worst.max(err);
        evaluated += 1;
    }
    (worst, evaluated)
}
