//! Run configuration: strict TOML schema, command-line overrides and the
//! resolved values every command works from.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use casimir_grating::casimir::{default_truncation, GeometryConfig, SlabBaseline};
use casimir_grating::quadrature::QuadratureSpec;
use casimir_grating::smatrix::ChannelSettings;
use casimir_grating::solve::OdeSettings;
use casimir_grating::{FermiStepParams, FourierProfile};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Bumped whenever cached node values would change meaning.
pub const CACHE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileConfig,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub parallelism: ParallelismSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileConfig {
    FermiStep(FermiStepParams),
    TabulatedFourier(TabulatedProfile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedProfile {
    #[serde(rename = "L")]
    pub period: f64,
    /// Nominal half-width; sets the integration window.
    pub w: f64,
    /// Grid over `z >= 0`, starting at 0.
    pub z: Vec<f64>,
    pub components: Vec<ComponentTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentTable {
    pub n: i64,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub delta_z: Vec<f64>,
    /// Defaults to nine points across one period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_x: Option<Vec<f64>>,
    /// Gap between profile edges below which a warning is printed.
    pub overlap_margin: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            delta_z: vec![5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0],
            delta_x: None,
            overlap_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub max_steps: usize,
    /// Inward integration start; defaults to `4w`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_start: Option<f64>,
    /// Fitting point; defaults to `w`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_fit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trunc: Option<usize>,
    /// Defaults to the peak deviation of the profile from vacuum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slab_permittivity: Option<f64>,
    /// Rerun on a halved grid to estimate the quadrature error.
    pub estimate_error: bool,
    /// Relative change above which the sweep is flagged as unconverged.
    pub refinement_tol: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let ode = OdeSettings::default();
        NumericsSection {
            ode_rtol: ode.rtol,
            ode_atol: ode.atol,
            max_steps: ode.max_steps,
            z_start: None,
            z_fit: None,
            n_trunc: None,
            slab_permittivity: None,
            estimate_error: true,
            refinement_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Node cache; defaults to `<dir>/work`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub work_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub energy_csv: String,
    pub energy_json: String,
    pub diagnostics_csv: String,
    pub slab_csv: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("results"),
            work_dir: None,
            formats: vec![Format::Csv, Format::Json],
            energy_csv: "energy.csv".into(),
            energy_json: "energy.json".into(),
            diagnostics_csv: "diagnostics.csv".into(),
            slab_csv: "slab_baseline.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelismSection {
    /// Worker threads; absent means all available cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Values given on the command line; each replaces its config entry.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub delta_z: Option<Vec<f64>>,
    pub delta_x: Option<Vec<f64>>,
    pub n_kappa: Option<usize>,
    pub n_kx: Option<usize>,
    pub n_ky: Option<usize>,
    pub n_trunc: Option<usize>,
    pub ode_rtol: Option<f64>,
    pub ode_atol: Option<f64>,
    pub slab_permittivity: Option<f64>,
    pub estimate_error: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub work_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.delta_z {
            self.geometry.delta_z = v.clone();
        }
        if let Some(v) = &o.delta_x {
            self.geometry.delta_x = Some(v.clone());
        }
        if let Some(v) = o.n_kappa {
            self.quadrature.n_kappa = v;
        }
        if let Some(v) = o.n_kx {
            self.quadrature.n_kx = v;
        }
        if let Some(v) = o.n_ky {
            self.quadrature.n_ky = v;
        }
        if let Some(v) = o.n_trunc {
            self.numerics.n_trunc = Some(v);
        }
        if let Some(v) = o.ode_rtol {
            self.numerics.ode_rtol = v;
        }
        if let Some(v) = o.ode_atol {
            self.numerics.ode_atol = v;
        }
        if let Some(v) = o.slab_permittivity {
            self.numerics.slab_permittivity = Some(v);
        }
        if let Some(v) = o.estimate_error {
            self.numerics.estimate_error = v;
        }
        if let Some(v) = &o.output_dir {
            self.output.dir = v.clone();
        }
        if let Some(v) = &o.work_dir {
            self.output.work_dir = Some(v.clone());
        }
        if let Some(v) = o.workers {
            self.parallelism.workers = Some(v);
        }
    }

    pub fn period(&self) -> f64 {
        match &self.profile {
            ProfileConfig::FermiStep(p) => p.period,
            ProfileConfig::TabulatedFourier(t) => t.period,
        }
    }

    pub fn build_profile(&self) -> Result<FourierProfile, CliError> {
        let profile = match &self.profile {
            ProfileConfig::FermiStep(p) => FourierProfile::fermi_step(*p)?,
            ProfileConfig::TabulatedFourier(t) => {
                let mut tables = BTreeMap::new();
                for c in &t.components {
                    let im = c.im.clone().unwrap_or_else(|| vec![0.0; c.re.len()]);
                    if im.len() != c.re.len() {
                        return Err(CliError::Config(format!(
                            "component n={}: re has {} values, im has {}",
                            c.n,
                            c.re.len(),
                            im.len()
                        )));
                    }
                    let values =
                        c.re.iter()
                            .zip(&im)
                            .map(|(r, i)| Complex64::new(*r, *i))
                            .collect();
                    if tables.insert(c.n, values).is_some() {
                        return Err(CliError::Config(format!("component n={} given twice", c.n)));
                    }
                }
                FourierProfile::tabulated(t.period, t.w, t.z.clone(), tables)?
            }
        };
        Ok(profile)
    }

    /// Checks everything that does not need a solve and fills in defaults.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let profile = self.build_profile()?;
        let w = profile.half_width();
        let period = profile.period();
        let bad = |msg: String| Err(CliError::Config(msg));

        let q = &self.quadrature;
        q.validate()?;
        for (name, n) in [("n_kappa", q.n_kappa), ("n_kx", q.n_kx), ("n_ky", q.n_ky)] {
            if n < 2 {
                return bad(format!("quadrature.{name} must be at least 2, got {n}"));
            }
        }

        let num = &self.numerics;
        if !(num.ode_rtol > 0.0 && num.ode_atol > 0.0) {
            return bad("numerics.ode_rtol and ode_atol must be positive".into());
        }
        if num.max_steps == 0 {
            return bad("numerics.max_steps must be positive".into());
        }
        let z_start = num.z_start.unwrap_or(4.0 * w);
        let z_fit = num.z_fit.unwrap_or(w);
        if !(z_fit > 0.0 && z_start > z_fit) {
            return bad(format!(
                "numerics needs 0 < z_fit < z_start, got z_fit = {z_fit}, z_start = {z_start}"
            ));
        }
        if !(num.refinement_tol > 0.0) {
            return bad("numerics.refinement_tol must be positive".into());
        }

        let slab_eps = match num.slab_permittivity {
            Some(e) => e,
            None => match &self.profile {
                ProfileConfig::FermiStep(p) => 2.0 * p.h,
                ProfileConfig::TabulatedFourier(_) => profile.max_total() - 1.0,
            },
        };
        if !(slab_eps >= 1.0 && slab_eps.is_finite()) {
            return bad(format!(
                "slab permittivity must be at least 1, got {slab_eps}"
            ));
        }

        if self.geometry.delta_z.is_empty() {
            return bad("geometry.delta_z must not be empty".into());
        }
        let delta_x = self
            .geometry
            .delta_x
            .clone()
            .unwrap_or_else(|| (0..9).map(|i| period * i as f64 / 8.0).collect());
        if delta_x.is_empty() {
            return bad("geometry.delta_x must not be empty".into());
        }
        if !(self.geometry.overlap_margin >= 0.0) {
            return bad("geometry.overlap_margin must not be negative".into());
        }
        let mut geometries = Vec::new();
        let mut warnings = Vec::new();
        for dz in &self.geometry.delta_z {
            if !(*dz > 0.0) {
                return bad(format!(
                    "geometry.delta_z entries must be positive, got {dz}"
                ));
            }
            for dx in &delta_x {
                let g = GeometryConfig::new(*dz, *dx);
                if let Some(msg) = g.validate(w, self.geometry.overlap_margin)? {
                    if !warnings.contains(&msg) {
                        warnings.push(msg);
                    }
                }
                geometries.push(g);
            }
        }

        if self.parallelism.workers == Some(0) {
            return bad("parallelism.workers must be at least 1".into());
        }

        let n_trunc = num
            .n_trunc
            .unwrap_or_else(|| default_truncation(period, q.kappa_max.max(q.ky_max)));
        let channel = ChannelSettings {
            ode: OdeSettings {
                rtol: num.ode_rtol,
                atol: num.ode_atol,
                max_steps: num.max_steps,
            },
            z_start,
            z_fit,
        };
        let slab = SlabBaseline {
            permittivity: slab_eps,
            half_width: w,
        };
        let hash = config_hash(self, &geometries, n_trunc, slab_eps);
        Ok(Resolved {
            config: self.clone(),
            profile,
            geometries,
            delta_z: self.geometry.delta_z.clone(),
            delta_x,
            channel,
            n_trunc,
            slab,
            warnings,
            hash,
        })
    }
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub profile: FourierProfile,
    /// Row-major over `(delta_z, delta_x)`.
    pub geometries: Vec<GeometryConfig>,
    pub delta_z: Vec<f64>,
    pub delta_x: Vec<f64>,
    pub channel: ChannelSettings,
    pub n_trunc: usize,
    pub slab: SlabBaseline,
    pub warnings: Vec<String>,
    pub hash: String,
}

impl Resolved {
    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.config.quadrature
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.config.output.dir.join(name)
    }

    pub fn work_dir(&self) -> PathBuf {
        self.config
            .output
            .work_dir
            .clone()
            .unwrap_or_else(|| self.config.output.dir.join("work"))
    }

    pub fn writes(&self, f: Format) -> bool {
        self.config.output.formats.contains(&f)
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    format: u32,
    profile: &'a ProfileConfig,
    geometries: Vec<(f64, f64)>,
    quadrature: &'a QuadratureSpec,
    numerics: &'a NumericsSection,
    n_trunc: usize,
    slab_permittivity: f64,
}

/// SHA-256 of everything that influences computed values; output paths and
/// worker counts are left out.
fn config_hash(
    cfg: &RunConfig,
    geometries: &[GeometryConfig],
    n_trunc: usize,
    slab: f64,
) -> String {
    let input = HashInput {
        format: CACHE_FORMAT,
        profile: &cfg.profile,
        geometries: geometries.iter().map(|g| (g.delta_z, g.delta_x)).collect(),
        quadrature: &cfg.quadrature,
        numerics: &cfg.numerics,
        n_trunc,
        slab_permittivity: slab,
    };
    let bytes = serde_json::to_vec(&input).expect("hash input serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Configuration of the reference grating with the default sweep.
pub fn reference_config() -> RunConfig {
    RunConfig {
        profile: ProfileConfig::FermiStep(FermiStepParams::REFERENCE),
        geometry: GeometrySection::default(),
        quadrature: QuadratureSpec::default(),
        numerics: NumericsSection::default(),
        output: OutputSection::default(),
        parallelism: ParallelismSection::default(),
    }
}
