//! Per-channel scattering health: unitarity, transverse commutation,
//! Wronskian drift and conditioning on sampled channels.

use casimir_grating::basis::{propagating_mask, transverse_projector};
use casimir_grating::smatrix::{
    commutator_defect, scatter_channel, unitarity_defect, wronskian_drift, ChannelSettings,
};
use casimir_grating::{build_basis, Axis, FourierProfile, Frequency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Limit applied to unitarity, commutator and drift defects.
pub const DEFECT_LIMIT: f64 = 1e-6;

/// Channels closer than this to grazing are not sampled.
const GRAZING_GAP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AxisChoice {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub k_min: f64,
    pub k_max: f64,
    pub max_propagating: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: 50,
            seed: 1,
            k_min: 0.3,
            k_max: 2.4,
            max_propagating: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub frequency: Frequency,
    pub kx0: f64,
    pub ky0: f64,
}

/// Real-axis channels with between one and `max_propagating` open
/// harmonics. The imaginary axis uses the same `(|k|, kx0, ky0)` triples.
pub fn sample_channels(
    axis: AxisChoice,
    spec: &SampleSpec,
    period: f64,
    n_trunc: usize,
) -> Vec<Channel> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half_zone = std::f64::consts::PI / period;
    let mut out = Vec::with_capacity(spec.count);
    let mut attempts = 0usize;
    while out.len() < spec.count && attempts < 10_000 * spec.count.max(1) {
        attempts += 1;
        let k = rng.gen_range(spec.k_min..spec.k_max);
        let kx0 = rng.gen_range(-half_zone..half_zone);
        let ky0 = rng.gen_range(0.0..0.8) * k;
        let frequency = Frequency::real(k);
        let Ok(basis) = build_basis(frequency, kx0, ky0, n_trunc, period) else {
            continue;
        };
        let Ok(mask) = propagating_mask(&basis) else {
            continue;
        };
        let open = mask.iter().filter(|p| **p).count();
        let grazing = basis.kz_harmonic.iter().any(|kz| kz.norm() < GRAZING_GAP);
        if open >= 1 && open <= spec.max_propagating && !grazing {
            out.push(Channel {
                frequency,
                kx0,
                ky0,
            });
        }
    }
    if axis == AxisChoice::Imaginary {
        for c in &mut out {
            c.frequency = Frequency::imaginary(c.frequency.magnitude);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRecord {
    pub axis: AxisChoice,
    pub k: f64,
    pub kx0: f64,
    pub ky0: f64,
    pub propagating: usize,
    /// Empty on the imaginary axis.
    pub unitarity_defect: Option<f64>,
    pub commutator_defect: Option<f64>,
    pub wronskian_drift: Option<f64>,
    pub condition: Option<f64>,
    pub error: Option<String>,
}

impl ChannelRecord {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.unitarity_defect.is_none_or(|d| d < DEFECT_LIMIT)
            && self.commutator_defect.is_some_and(|d| d < DEFECT_LIMIT)
            && self.wronskian_drift.is_some_and(|d| d < DEFECT_LIMIT)
    }
}

pub fn channel_record(
    profile: &FourierProfile,
    channel: &Channel,
    n_trunc: usize,
    settings: &ChannelSettings,
) -> ChannelRecord {
    let axis = match channel.frequency.axis {
        Axis::Real => AxisChoice::Real,
        Axis::Imaginary => AxisChoice::Imaginary,
    };
    let mut rec = ChannelRecord {
        axis,
        k: channel.frequency.magnitude,
        kx0: channel.kx0,
        ky0: channel.ky0,
        propagating: 0,
        unitarity_defect: None,
        commutator_defect: None,
        wronskian_drift: None,
        condition: None,
        error: None,
    };
    let result = (|| -> casimir_grating::Result<()> {
        let res = scatter_channel(
            profile,
            channel.frequency,
            channel.kx0,
            channel.ky0,
            n_trunc,
            settings,
        )?;
        if axis == AxisChoice::Real {
            rec.propagating = propagating_mask(&res.basis)?.iter().filter(|p| **p).count();
            rec.unitarity_defect = Some(
                unitarity_defect(&res.s_plus, &res.basis)?
                    .max(unitarity_defect(&res.s_minus, &res.basis)?),
            );
        }
        let p = transverse_projector(&res.basis);
        rec.commutator_defect =
            Some(commutator_defect(&res.s_plus, &p).max(commutator_defect(&res.s_minus, &p)));
        rec.condition = Some(res.condition);
        rec.wronskian_drift = Some(wronskian_drift(
            profile,
            &res.basis,
            settings,
            1.5 * settings.z_fit,
        )?);
        Ok(())
    })();
    if let Err(e) = result {
        rec.error = Some(e.to_string());
    }
    rec
}

/// Records in sample order.
pub fn run_diagnostics(
    profile: &FourierProfile,
    channels: &[Channel],
    n_trunc: usize,
    settings: &ChannelSettings,
    pool: &rayon::ThreadPool,
) -> Vec<ChannelRecord> {
    pool.install(|| {
        channels
            .par_iter()
            .map(|c| channel_record(profile, c, n_trunc, settings))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub channels: usize,
    pub failed: usize,
    pub errors: usize,
    pub max_unitarity_defect: Option<f64>,
    pub max_commutator_defect: f64,
    pub max_wronskian_drift: f64,
    pub max_condition: f64,
}

pub fn summarize(records: &[ChannelRecord]) -> Summary {
    let max = |f: &dyn Fn(&ChannelRecord) -> Option<f64>| {
        records
            .iter()
            .filter_map(f)
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
    };
    Summary {
        channels: records.len(),
        failed: records.iter().filter(|r| !r.passed()).count(),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
        max_unitarity_defect: max(&|r| r.unitarity_defect),
        max_commutator_defect: max(&|r| r.commutator_defect).unwrap_or(f64::NAN),
        max_wronskian_drift: max(&|r| r.wronskian_drift).unwrap_or(f64::NAN),
        max_condition: max(&|r| r.condition).unwrap_or(f64::NAN),
    }
}
