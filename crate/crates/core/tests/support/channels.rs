//! Random channel samples and per-channel health metrics.

use casimir_grating::basis::{propagating_mask, transverse_projector};
use casimir_grating::smatrix::{
    commutator_defect, scatter_channel, unitarity_defect, wronskian_drift, ChannelSettings,
};
use casimir_grating::{build_basis, Axis, FourierProfile, Frequency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N_TRUNC: usize = 2;

#[derive(Debug, Clone, Copy)]
pub struct Channel {
    pub frequency: Frequency,
    pub kx0: f64,
    pub ky0: f64,
}

/// Real-axis channels with 1 to 5 propagating harmonics, none closer than
/// `0.05` to grazing.
pub fn real_axis_sample(count: usize, seed: u64, period: f64) -> Vec<Channel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let k: f64 = rng.gen_range(0.3..2.4);
        let kx0 = rng.gen_range(-0.5..0.5);
        let ky0 = rng.gen_range(0.0..0.8) * k;
        let frequency = Frequency::real(k);
        let Ok(basis) = build_basis(frequency, kx0, ky0, N_TRUNC, period) else {
            continue;
        };
        let open = propagating_mask(&basis)
            .unwrap()
            .iter()
            .filter(|p| **p)
            .count();
        let near_grazing = basis.kz_harmonic.iter().any(|kz| kz.norm() < 0.05);
        if (1..=5).contains(&open) && !near_grazing {
            out.push(Channel {
                frequency,
                kx0,
                ky0,
            });
        }
    }
    out
}

pub fn imaginary_axis_sample(count: usize, seed: u64) -> Vec<Channel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Channel {
            frequency: Frequency::imaginary(rng.gen_range(0.0078125..2.5)),
            kx0: rng.gen_range(0.0..0.5),
            ky0: rng.gen_range(0.0078125..2.5),
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ChannelReport {
    pub channel: Channel,
    /// Worst over both parities; `None` on the imaginary axis.
    pub unitarity: Option<f64>,
    pub commutator: f64,
    pub drift: f64,
    pub condition: f64,
}

pub fn channel_report(profile: &FourierProfile, channel: Channel) -> ChannelReport {
    channel_report_with(profile, channel, &ChannelSettings::for_profile(profile))
}

pub fn channel_report_with(
    profile: &FourierProfile,
    channel: Channel,
    settings: &ChannelSettings,
) -> ChannelReport {
    let res = scatter_channel(
        profile,
        channel.frequency,
        channel.kx0,
        channel.ky0,
        N_TRUNC,
        settings,
    )
    .unwrap();
    let p = transverse_projector(&res.basis);
    let unitarity = match channel.frequency.axis {
        Axis::Real => Some(
            unitarity_defect(&res.s_plus, &res.basis)
                .unwrap()
                .max(unitarity_defect(&res.s_minus, &res.basis).unwrap()),
        ),
        Axis::Imaginary => None,
    };
    let commutator = commutator_defect(&res.s_plus, &p).max(commutator_defect(&res.s_minus, &p));
    let drift = wronskian_drift(profile, &res.basis, settings, 1.5 * settings.z_fit).unwrap();
    ChannelReport {
        channel,
        unitarity,
        commutator,
        drift,
        condition: res.condition,
    }
}

/// The same `(|k|, kx0, ky0)` moved to the imaginary frequency axis.
pub fn imaginary_counterparts(real: &[Channel]) -> Vec<Channel> {
    real.iter()
        .map(|c| Channel {
            frequency: Frequency::imaginary(c.frequency.magnitude),
            ..*c
        })
        .collect()
}

/// Integration tolerance at which the scattering checks are run.
pub fn tight_settings(profile: &FourierProfile) -> ChannelSettings {
    let mut s = ChannelSettings::for_profile(profile);
    s.ode.rtol = 1e-11;
    s.ode.atol = 1e-13;
    s.ode.max_steps = 2_000_000;
    s
}
