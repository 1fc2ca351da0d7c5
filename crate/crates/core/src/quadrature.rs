//! One-dimensional quadrature rules and the three-dimensional product grid
//! over `(kappa, kx0, ky0)`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// `n`-point Gauss-Legendre rule on `[a, b]`, nodes in increasing order.
pub fn gauss_legendre(a: f64, b: f64, n: usize) -> Result<Rule> {
    let degree = NonZeroUsize::new(n)
        .ok_or_else(|| Error::InvalidParameter("quadrature needs at least one node".into()))?;
    let rule = GaussLegendre::new(degree);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Composite Gauss-Legendre rule with `n` nodes on each panel.
pub fn gauss_legendre_panels(breaks: &[f64], n: usize) -> Result<Rule> {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in breaks.windows(2) {
        let r = gauss_legendre(pair[0], pair[1], n)?;
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Ok(Rule { nodes, weights })
}

/// Panel edges in geometric progression from `a` to `b`.
pub fn geometric_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let ratio = (b / a).powf(1.0 / panels as f64);
    let mut out: Vec<f64> = (0..panels).map(|i| a * ratio.powi(i as i32)).collect();
    out.push(b);
    out
}

/// Trapezoid rule with `n >= 2` equally spaced nodes including both ends.
pub fn trapezoid(a: f64, b: f64, n: usize) -> Result<Rule> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "trapezoid rule needs at least two nodes".into(),
        ));
    }
    let h = (b - a) / (n - 1) as f64;
    let nodes = (0..n).map(|i| a + h * i as f64).collect();
    let weights = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect();
    Ok(Rule { nodes, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    GaussLegendrePanels,
    Trapezoid,
}

pub const PANELS: usize = 4;
pub const K_MIN: f64 = 0.0078125;
pub const K_MAX: f64 = 2.5;

/// Bounds and node counts of the `(kappa, kx0, ky0)` grid. For panel rules
/// `n_kappa` and `n_ky` count nodes per panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub ky_min: f64,
    pub ky_max: f64,
    pub n_kappa: usize,
    pub n_kx: usize,
    pub n_ky: usize,
    pub rule: RuleKind,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            kappa_min: K_MIN,
            kappa_max: K_MAX,
            ky_min: K_MIN,
            ky_max: K_MAX,
            n_kappa: 6,
            n_kx: 4,
            n_ky: 6,
            rule: RuleKind::GaussLegendrePanels,
        }
    }
}

/// One grid point with its full weight, prefactor included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub kappa: f64,
    pub kx0: f64,
    pub ky0: f64,
    pub weight: f64,
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let bounds_ok = |lo: f64, hi: f64| lo > 0.0 && hi > lo && hi.is_finite();
        if !bounds_ok(self.kappa_min, self.kappa_max) {
            return Err(Error::InvalidParameter(format!(
                "kappa bounds must satisfy 0 < min < max, got [{}, {}]",
                self.kappa_min, self.kappa_max
            )));
        }
        if !bounds_ok(self.ky_min, self.ky_max) {
            return Err(Error::InvalidParameter(format!(
                "ky bounds must satisfy 0 < min < max, got [{}, {}]",
                self.ky_min, self.ky_max
            )));
        }
        let min_nodes = match self.rule {
            RuleKind::GaussLegendrePanels => 1,
            RuleKind::Trapezoid => 2,
        };
        for (name, n) in [
            ("n_kappa", self.n_kappa),
            ("n_kx", self.n_kx),
            ("n_ky", self.n_ky),
        ] {
            if n < min_nodes {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be at least {min_nodes}, got {n}"
                )));
            }
        }
        Ok(())
    }

    fn wavenumber_rule(&self, lo: f64, hi: f64, n: usize) -> Result<Rule> {
        match self.rule {
            RuleKind::GaussLegendrePanels => {
                gauss_legendre_panels(&geometric_breaks(lo, hi, PANELS), n)
            }
            RuleKind::Trapezoid => trapezoid(lo, hi, n),
        }
    }

    pub fn kappa_rule(&self) -> Result<Rule> {
        self.wavenumber_rule(self.kappa_min, self.kappa_max, self.n_kappa)
    }

    pub fn ky_rule(&self) -> Result<Rule> {
        self.wavenumber_rule(self.ky_min, self.ky_max, self.n_ky)
    }

    /// Rule on `[0, pi/L]`; the trapezoid variant includes both ends.
    pub fn kx_rule(&self, period: f64) -> Result<Rule> {
        let edge = PI / period;
        match self.rule {
            RuleKind::GaussLegendrePanels => gauss_legendre(0.0, edge, self.n_kx),
            RuleKind::Trapezoid => trapezoid(0.0, edge, self.n_kx),
        }
    }

    /// Product grid in fixed order (kappa outermost, then kx0, then ky0).
    /// Weights carry the `1 / 4 pi^3` prefactor and the factor 2 from the
    /// evenness in `kx0`.
    pub fn nodes(&self, period: f64) -> Result<Vec<Node>> {
        self.validate()?;
        let kappa = self.kappa_rule()?;
        let kx = self.kx_rule(period)?;
        let ky = self.ky_rule()?;
        let prefactor = 2.0 / (4.0 * PI.powi(3));
        let mut out = Vec::with_capacity(kappa.len() * kx.len() * ky.len());
        for (a, wa) in kappa.nodes.iter().zip(&kappa.weights) {
            for (b, wb) in kx.nodes.iter().zip(&kx.weights) {
                for (c, wc) in ky.nodes.iter().zip(&ky.weights) {
                    out.push(Node {
                        kappa: *a,
                        kx0: *b,
                        ky0: *c,
                        weight: prefactor * wa * wb * wc,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Grid with roughly half the nodes along every axis, used as the
    /// coarse member of a refinement pair.
    pub fn halved(&self) -> QuadratureSpec {
        let min_nodes = match self.rule {
            RuleKind::GaussLegendrePanels => 1,
            RuleKind::Trapezoid => 2,
        };
        let half = |n: usize| match self.rule {
            RuleKind::GaussLegendrePanels => (n / 2).max(min_nodes),
            // keeps every other node of the fine grid when n is odd
            RuleKind::Trapezoid => (n.div_ceil(2)).max(min_nodes),
        };
        QuadratureSpec {
            n_kappa: half(self.n_kappa),
            n_kx: half(self.n_kx),
            n_ky: half(self.n_ky),
            ..*self
        }
    }
}
