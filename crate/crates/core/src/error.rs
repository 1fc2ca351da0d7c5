use std::fmt;

use thiserror::Error;

/// Coordinates of one coupled-channel problem, attached to numerical failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTag {
    pub imaginary_axis: bool,
    pub magnitude: f64,
    pub sign: i8,
    pub kx0: f64,
    pub ky0: f64,
    pub n_trunc: usize,
}

impl fmt::Display for ChannelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axis = if self.imaginary_axis { "kappa" } else { "k" };
        write!(
            f,
            "{axis}={}{:.6e}, kx0={:.6e}, ky0={:.6e}, N={}",
            if self.sign < 0 { "-" } else { "" },
            self.magnitude,
            self.kx0,
            self.ky0,
            self.n_trunc
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grazing threshold: harmonic n={harmonic} has k_z = 0 at {channel}")]
    Grazing { harmonic: i64, channel: ChannelTag },

    #[error("no propagating modes on the imaginary axis")]
    ImaginaryAxis,

    #[error("step size underflow at z={z:.6e} ({channel})")]
    StepUnderflow { z: f64, channel: ChannelTag },

    #[error("step budget of {max_steps} exhausted at z={z:.6e} ({channel})")]
    TooManySteps {
        max_steps: usize,
        z: f64,
        channel: ChannelTag,
    },

    #[error("ill-conditioned Wronskian (cond = {cond:.3e}) at {channel}")]
    IllConditioned { cond: f64, channel: ChannelTag },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("log det has imaginary part {imag:.3e} against real part {real:.3e}")]
    ComplexLogDet { real: f64, imag: f64 },

    #[error("{source} [{channel}]")]
    Channel {
        channel: ChannelTag,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, channel: ChannelTag) -> Self {
        match self {
            Error::Channel { .. }
            | Error::Grazing { .. }
            | Error::StepUnderflow { .. }
            | Error::TooManySteps { .. }
            | Error::IllConditioned { .. } => self,
            other => Error::Channel {
                channel,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
