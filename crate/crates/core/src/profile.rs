//! Periodic, z-symmetric dielectric backgrounds.
//!
//! A profile is stored as its Fourier components in x, each a function of
//! `(k, z)`. Components hold the deviation from vacuum, so every component
//! decays to zero far from the grating and the total dielectric is
//! `1 + sum_n eps_n(k, z) exp(2 pi i n x / L)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the smooth-step grating
/// `eps_0 = 2 eps_1 = 2 eps_{-1} = h / (1 + exp[s(|z| - w)])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FermiStepParams {
    pub h: f64,
    pub w: f64,
    pub s: f64,
    #[serde(rename = "L")]
    pub period: f64,
}

impl FermiStepParams {
    /// Height 2, half-width 2, steepness 16, period 2 pi (lengths in units of l0).
    pub const REFERENCE: FermiStepParams = FermiStepParams {
        h: 2.0,
        w: 2.0,
        s: 16.0,
        period: 2.0 * PI,
    };

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.h, "height must be positive"),
            (self.w, "width must be positive"),
            (self.s, "steepness must be positive"),
            (self.period, "period must be positive"),
        ];
        for (value, message) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(message.into()));
            }
        }
        Ok(())
    }
}

/// Half-extent of a Fermi transition in units of `1 / s`.
const TRANSITION_WIDTHS: f64 = 20.0;

/// z-dependence of one Fourier component.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentShape {
    /// `amplitude / (1 + exp[s(|z| - w)])`.
    Fermi {
        amplitude: Complex64,
        half_width: f64,
        steepness: f64,
    },
    /// Piecewise-linear in `|z|` on an ascending grid starting at `z = 0`;
    /// zero beyond the last node.
    Tabulated { z: Vec<f64>, values: Vec<Complex64> },
}

/// Value and first two z-derivatives of a component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: Complex64,
    pub dz: Complex64,
    pub dz2: Complex64,
}

impl ComponentShape {
    fn jet(&self, z: f64) -> Jet {
        match self {
            ComponentShape::Fermi {
                amplitude,
                half_width,
                steepness,
            } => {
                let t = steepness * (z.abs() - half_width);
                let f = logistic(t);
                let g = logistic(-t); // 1 - f without cancellation
                let sign = if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Jet {
                    value: amplitude * f,
                    dz: amplitude * (-steepness * sign * f * g),
                    dz2: amplitude * (steepness * steepness * f * g * (g - f)),
                }
            }
            ComponentShape::Tabulated { z: grid, values } => {
                let u = z.abs();
                let last = grid.len() - 1;
                if u > grid[last] {
                    return Jet::default();
                }
                // index of the interval [grid[i], grid[i + 1]] containing u
                let i = match grid.partition_point(|&g| g <= u) {
                    0 => 0,
                    p => (p - 1).min(last.saturating_sub(1)),
                };
                if last == 0 {
                    return Jet {
                        value: values[0],
                        ..Jet::default()
                    };
                }
                let width = grid[i + 1] - grid[i];
                let slope = (values[i + 1] - values[i]) / width;
                let sign = if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                Jet {
                    value: values[i] + slope * (u - grid[i]),
                    dz: slope * sign,
                    dz2: Complex64::new(0.0, 0.0),
                }
            }
        }
    }

    fn conj(&self) -> Self {
        match self {
            ComponentShape::Fermi {
                amplitude,
                half_width,
                steepness,
            } => ComponentShape::Fermi {
                amplitude: amplitude.conj(),
                half_width: *half_width,
                steepness: *steepness,
            },
            ComponentShape::Tabulated { z, values } => ComponentShape::Tabulated {
                z: z.clone(),
                values: values.iter().map(|v| v.conj()).collect(),
            },
        }
    }
}

/// `1 / (1 + e^t)`, stable for large `|t|`.
fn logistic(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// Dielectric background periodic in x with period `L`, independent of y,
/// and symmetric in z.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProfile {
    period: f64,
    half_width: f64,
    components: BTreeMap<i64, ComponentShape>,
}

impl FourierProfile {
    /// Empty space with the given lattice period.
    pub fn vacuum(period: f64, half_width: f64) -> Self {
        FourierProfile {
            period,
            half_width,
            components: BTreeMap::new(),
        }
    }

    pub fn fermi_step(params: FermiStepParams) -> Result<Self> {
        params.validate()?;
        let shape = |amp: f64| ComponentShape::Fermi {
            amplitude: Complex64::new(amp, 0.0),
            half_width: params.w,
            steepness: params.s,
        };
        let components = BTreeMap::from([
            (-1, shape(0.5 * params.h)),
            (0, shape(params.h)),
            (1, shape(0.5 * params.h)),
        ]);
        Ok(FourierProfile {
            period: params.period,
            half_width: params.w,
            components,
        })
    }

    /// x-independent smooth slab of height `h` over vacuum: only `eps_0` is present.
    pub fn uniform_slab(params: FermiStepParams) -> Result<Self> {
        params.validate()?;
        let components = BTreeMap::from([(
            0,
            ComponentShape::Fermi {
                amplitude: Complex64::new(params.h, 0.0),
                half_width: params.w,
                steepness: params.s,
            },
        )]);
        Ok(FourierProfile {
            period: params.period,
            half_width: params.w,
            components,
        })
    }

    /// x-independent step of permittivity `permittivity` and the Fermi shape
    /// of the given half-width and steepness.
    pub fn step_slab(
        period: f64,
        half_width: f64,
        steepness: f64,
        permittivity: f64,
    ) -> Result<Self> {
        FermiStepParams {
            h: 1.0,
            w: half_width,
            s: steepness,
            period,
        }
        .validate()?;
        if !(permittivity >= 1.0) || !permittivity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "slab permittivity must be at least 1, got {permittivity}"
            )));
        }
        let components = BTreeMap::from([(
            0,
            ComponentShape::Fermi {
                amplitude: Complex64::new(permittivity - 1.0, 0.0),
                half_width,
                steepness,
            },
        )]);
        Ok(FourierProfile {
            period,
            half_width,
            components,
        })
    }

    /// Profile from per-harmonic tables over `z >= 0`. Harmonics given only for
    /// one sign of `n` are mirrored by complex conjugation.
    pub fn tabulated(
        period: f64,
        half_width: f64,
        z: Vec<f64>,
        tables: BTreeMap<i64, Vec<Complex64>>,
    ) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidParameter("period must be positive".into()));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidParameter("width must be positive".into()));
        }
        if z.is_empty() || z[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "tabulated grid must start at z = 0".into(),
            ));
        }
        if z.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidParameter(
                "tabulated grid must be strictly increasing".into(),
            ));
        }
        let mut components = BTreeMap::new();
        for (n, values) in tables {
            if values.len() != z.len() {
                return Err(Error::InvalidParameter(format!(
                    "table for n={n} has {} values, grid has {}",
                    values.len(),
                    z.len()
                )));
            }
            components.insert(
                n,
                ComponentShape::Tabulated {
                    z: z.clone(),
                    values,
                },
            );
        }
        let missing: Vec<(i64, ComponentShape)> = components
            .iter()
            .filter(|(n, _)| **n != 0 && !components.contains_key(&-**n))
            .map(|(n, shape)| (-n, shape.conj()))
            .collect();
        components.extend(missing);
        Ok(FourierProfile {
            period,
            half_width,
            components,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Characteristic half-width of the structure; the default fitting point.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Largest `|n|` with a stored component (0 for vacuum).
    pub fn max_harmonic(&self) -> usize {
        self.components
            .keys()
            .map(|n| n.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn harmonics(&self) -> impl Iterator<Item = i64> + '_ {
        self.components.keys().copied()
    }

    pub fn is_vacuum(&self) -> bool {
        self.components.is_empty()
    }

    /// True when only `eps_0` is stored.
    pub fn is_x_independent(&self) -> bool {
        self.components.keys().all(|&n| n == 0)
    }

    /// Positive `z` values where the profile changes on a short scale:
    /// the edges and centers of Fermi transitions and the nodes of tables.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for shape in self.components.values() {
            match shape {
                ComponentShape::Fermi {
                    half_width,
                    steepness,
                    ..
                } => {
                    let edge = TRANSITION_WIDTHS / steepness;
                    out.extend([half_width - edge, *half_width, half_width + edge]);
                }
                ComponentShape::Tabulated { z, .. } => out.extend(z.iter().copied()),
            }
        }
        out.retain(|z| *z > 0.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn eval_component(&self, n: i64, k: Complex64, z: f64) -> Complex64 {
        self.eval_jet(n, k, z).value
    }

    pub fn eval_component_dz(&self, n: i64, k: Complex64, z: f64) -> Complex64 {
        self.eval_jet(n, k, z).dz
    }

    pub fn eval_component_dz2(&self, n: i64, k: Complex64, z: f64) -> Complex64 {
        self.eval_jet(n, k, z).dz2
    }

    /// Component value with its first and second z-derivatives.
    pub fn eval_jet(&self, n: i64, _k: Complex64, z: f64) -> Jet {
        self.components
            .get(&n)
            .map(|shape| shape.jet(z))
            .unwrap_or_default()
    }

    /// Total dielectric `1 + sum_n eps_n(k, z) exp(2 pi i n x / L)`.
    pub fn eval_total(&self, k: Complex64, x: f64, z: f64) -> Complex64 {
        let g = 2.0 * PI / self.period;
        self.harmonics().fold(Complex64::new(1.0, 0.0), |acc, n| {
            acc + self.eval_component(n, k, z) * Complex64::from_polar(1.0, g * n as f64 * x)
        })
    }
}

/// Outcome of one numerical invariant check: the worst observed value
/// against its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub limit: f64,
}

impl CheckResult {
    pub fn new(name: &str, worst: f64, limit: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: worst < limit,
            worst,
            limit,
        }
    }
}

const VACUUM_LIMIT: f64 = 1e-8;
const FD_LIMIT: f64 = 1e-6;

impl FourierProfile {
    /// Sample points between successive breakpoints, away from the points
    /// themselves, on `(0, 4w]`.
    fn sample_points(&self) -> Vec<f64> {
        let mut edges = vec![0.0];
        edges.extend(
            self.breakpoints()
                .into_iter()
                .filter(|z| *z < 4.0 * self.half_width),
        );
        edges.push(4.0 * self.half_width);
        let mut out = Vec::new();
        for pair in edges.windows(2) {
            for f in [0.2, 0.4, 0.6, 0.8] {
                out.push(pair[0] + f * (pair[1] - pair[0]));
            }
        }
        out
    }

    /// Vacuum asymptotics, z-parity, conjugate symmetry, derivative against
    /// a five-point stencil and realness of the total dielectric.
    pub fn invariant_checks(&self) -> Vec<CheckResult> {
        let k = Complex64::new(1.0, 0.0);
        let w = self.half_width;
        let harmonics: Vec<i64> = self.harmonics().collect();

        let mut far: f64 = 0.0;
        for n in &harmonics {
            for z in [4.0 * w, 5.0 * w, 8.0 * w, 100.0 * w] {
                far = far.max(self.eval_component(*n, k, z).norm());
            }
        }

        let samples = self.sample_points();
        let mut parity: f64 = 0.0;
        let mut conjugate: f64 = 0.0;
        for n in &harmonics {
            for z in &samples {
                let a = self.eval_jet(*n, k, *z);
                let b = self.eval_jet(*n, k, -*z);
                parity = parity
                    .max((a.value - b.value).norm())
                    .max((a.dz + b.dz).norm());
                let m = self.eval_component(-*n, k, *z);
                conjugate = conjugate.max((m - a.value.conj()).norm());
            }
        }

        let mut spacing = f64::INFINITY;
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints());
        for pair in edges.windows(2) {
            spacing = spacing.min(pair[1] - pair[0]);
        }
        let h = 1e-3 * spacing.min(w);
        // errors relative to each component's largest slope
        let mut fd: f64 = 0.0;
        for n in &harmonics {
            let mut scale: f64 = 0.0;
            let mut err: f64 = 0.0;
            for z in &samples {
                let f = |dz: f64| self.eval_component(*n, k, z + dz);
                let stencil = (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
                let exact = self.eval_component_dz(*n, k, *z);
                scale = scale.max(exact.norm());
                err = err.max((stencil - exact).norm());
            }
            if scale > 0.0 {
                fd = fd.max(err / scale);
            }
        }

        let mut imag: f64 = 0.0;
        for z in &samples {
            for i in 0..16 {
                let x = self.period * i as f64 / 16.0;
                imag = imag.max(self.eval_total(k, x, *z).im.abs());
            }
        }

        vec![
            CheckResult::new("vacuum_asymptotics", far, VACUUM_LIMIT),
            CheckResult::new("z_parity", parity, 1e-15),
            CheckResult::new("conjugate_symmetry", conjugate, 1e-15),
            CheckResult::new("derivative_matches_stencil", fd, FD_LIMIT),
            CheckResult::new("total_is_real", imag, 1e-12),
        ]
    }

    fn sampled_totals(&self) -> impl Iterator<Item = f64> + '_ {
        let k = Complex64::new(1.0, 0.0);
        let mut zs = self.sample_points();
        zs.push(0.0);
        zs.extend(self.breakpoints());
        zs.into_iter().flat_map(move |z| {
            (0..64).map(move |i| self.eval_total(k, self.period * i as f64 / 64.0, z).re)
        })
    }

    /// Smallest total dielectric over a sampled period and `z` range.
    pub fn min_total(&self) -> f64 {
        self.sampled_totals().fold(f64::INFINITY, f64::min)
    }

    /// Largest total dielectric over a sampled period and `z` range.
    pub fn max_total(&self) -> f64 {
        self.sampled_totals().fold(f64::NEG_INFINITY, f64::max)
    }
}
