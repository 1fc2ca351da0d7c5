//! Adaptive Dormand-Prince 5(4) integrator for complex state vectors.
//!
//! Matrix ODEs are integrated by flattening the matrices into one state
//! vector. The integrator runs in either direction of the independent
//! variable.

use nalgebra::DVector;
use num_complex::Complex64;

pub type State = DVector<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeError {
    StepUnderflow { t: f64 },
    TooManySteps { t: f64, max_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for DormandPrince {
    fn default() -> Self {
        DormandPrince {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 200_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `out = y + h * sum_i coeff_i * k_i`
fn combine(out: &mut State, y: &State, h: f64, terms: &[(f64, &State)]) {
    let out = out.as_mut_slice();
    out.copy_from_slice(y.as_slice());
    for (coeff, k) in terms {
        if *coeff == 0.0 {
            continue;
        }
        let c = h * coeff;
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += v * c;
        }
    }
}

impl DormandPrince {
    fn error_norm(&self, err: &State, y: &State, y_new: &State) -> f64 {
        let sum: f64 = err
            .iter()
            .zip(y.iter().zip(y_new.iter()))
            .map(|(e, (a, b))| {
                let scale = self.atol + self.rtol * a.norm().max(b.norm());
                (e.norm() / scale).powi(2)
            })
            .sum();
        (sum / err.len().max(1) as f64).sqrt()
    }

    fn scaled_norm(&self, v: &State, y: &State) -> f64 {
        let sum: f64 = v
            .iter()
            .zip(y.iter())
            .map(|(e, a)| (e.norm() / (self.atol + self.rtol * a.norm())).powi(2))
            .sum();
        (sum / v.len().max(1) as f64).sqrt()
    }

    /// Like [`integrate`](Self::integrate), restarting the step-size control at
    /// every breakpoint strictly between `t0` and `t1` so that features narrower
    /// than the current step are not stepped over.
    pub fn integrate_through<F>(
        &self,
        mut f: F,
        t0: f64,
        t1: f64,
        y0: State,
        breakpoints: &[f64],
    ) -> Result<(State, Stats), OdeError>
    where
        F: FnMut(f64, &State, &mut State),
    {
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| *b > lo && *b < hi)
            .collect();
        cuts.sort_by(f64::total_cmp);
        if t1 < t0 {
            cuts.reverse();
        }
        cuts.dedup();
        cuts.push(t1);
        let mut total = Stats::default();
        let mut y = y0;
        let mut t = t0;
        for cut in cuts {
            let budget = DormandPrince {
                max_steps: self
                    .max_steps
                    .saturating_sub(total.accepted + total.rejected),
                ..*self
            };
            let (y_next, stats) = budget.integrate(&mut f, t, cut, y)?;
            total.accepted += stats.accepted;
            total.rejected += stats.rejected;
            total.evaluations += stats.evaluations;
            y = y_next;
            t = cut;
        }
        Ok((y, total))
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1`; `f` writes into its last argument.
    pub fn integrate<F>(
        &self,
        mut f: F,
        t0: f64,
        t1: f64,
        y0: State,
    ) -> Result<(State, Stats), OdeError>
    where
        F: FnMut(f64, &State, &mut State),
    {
        let mut stats = Stats::default();
        if t0 == t1 {
            return Ok((y0, stats));
        }
        let n = y0.len();
        let dir = (t1 - t0).signum();
        let span = (t1 - t0).abs();
        let mut y = y0;
        let mut t = t0;

        let mut k1 = State::zeros(n);
        let mut k2 = State::zeros(n);
        let mut k3 = State::zeros(n);
        let mut k4 = State::zeros(n);
        let mut k5 = State::zeros(n);
        let mut k6 = State::zeros(n);
        let mut k7 = State::zeros(n);
        let mut tmp = State::zeros(n);
        let mut y_new = State::zeros(n);
        let mut err = State::zeros(n);

        f(t, &y, &mut k1);
        stats.evaluations += 1;

        // starting step (Hairer, Norsett & Wanner, II.4)
        let mut h = {
            let d0 = self.scaled_norm(&y, &y);
            let d1 = self.scaled_norm(&k1, &y);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
            .min(span);
            combine(&mut tmp, &y, dir * h0, &[(1.0, &k1)]);
            f(t + dir * h0, &tmp, &mut k2);
            stats.evaluations += 1;
            err.copy_from(&k2);
            err -= &k1;
            let d2 = self.scaled_norm(&err, &y) / h0;
            let h1 = if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            };
            (100.0 * h0).min(h1).min(span)
        };
        let h_min = 1e-14 * t0.abs().max(t1.abs()).max(1.0);

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(OdeError::TooManySteps {
                    t,
                    max_steps: self.max_steps,
                });
            }
            let remaining = (t1 - t).abs();
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = dir * h;

            combine(&mut tmp, &y, hs, &[(A21, &k1)]);
            f(t + C2 * hs, &tmp, &mut k2);
            combine(&mut tmp, &y, hs, &[(A31, &k1), (A32, &k2)]);
            f(t + C3 * hs, &tmp, &mut k3);
            combine(&mut tmp, &y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            f(t + C4 * hs, &tmp, &mut k4);
            combine(
                &mut tmp,
                &y,
                hs,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            );
            f(t + C5 * hs, &tmp, &mut k5);
            combine(
                &mut tmp,
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            f(t + hs, &tmp, &mut k6);
            combine(
                &mut y_new,
                &y,
                hs,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let t_new = if last { t1 } else { t + hs };
            f(t_new, &y_new, &mut k7);
            stats.evaluations += 6;

            for (i, e_i) in err.as_mut_slice().iter_mut().enumerate() {
                *e_i =
                    (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                        * hs;
            }
            let err_norm = self.error_norm(&err, &y, &y_new);
            if !err_norm.is_finite() {
                h *= 0.2;
                stats.rejected += 1;
                if h < h_min {
                    return Err(OdeError::StepUnderflow { t });
                }
                continue;
            }

            if err_norm <= 1.0 {
                stats.accepted += 1;
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                if last {
                    return Ok((y, stats));
                }
                let factor = if err_norm == 0.0 {
                    5.0
                } else {
                    (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
                };
                h *= factor;
            } else {
                stats.rejected += 1;
                h *= (0.9 * err_norm.powf(-0.2)).clamp(0.1, 1.0);
                if h < h_min {
                    return Err(OdeError::StepUnderflow { t });
                }
            }
        }
    }
}
