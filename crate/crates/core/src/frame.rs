//! Waveform-agnostic view of an AFDM or OTFS frame.

use crate::afdm::{self, AfdmConfig, Daft};
use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::matrix::{CMat, CVec};
use crate::otfs::{self, OtfsConfig, OtfsModem, Pulse};
use crate::scalar::Real;
use crate::sparse::SparseMat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Afdm,
    Otfs,
}

impl std::fmt::Display for Waveform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Waveform::Afdm => "afdm",
            Waveform::Otfs => "otfs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "waveform", rename_all = "snake_case")]
pub enum FrameConfig {
    Afdm(AfdmConfig),
    Otfs(OtfsConfig),
}

impl FrameConfig {
    pub fn waveform(&self) -> Waveform {
        match self {
            FrameConfig::Afdm(_) => Waveform::Afdm,
            FrameConfig::Otfs(_) => Waveform::Otfs,
        }
    }

    /// Number of symbols (and time samples) per frame.
    pub fn size(&self) -> usize {
        match self {
            FrameConfig::Afdm(c) => c.n,
            FrameConfig::Otfs(c) => c.size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FrameConfig::Afdm(c) => c.validate(),
            FrameConfig::Otfs(c) => c.validate(),
        }
    }

    /// True when the transmit chain has a time-domain representation; the
    /// bi-orthogonal OTFS channel is defined only in the delay-Doppler domain.
    pub fn has_time_domain(&self) -> bool {
        !matches!(self, FrameConfig::Otfs(OtfsConfig { pulse: Pulse::BiOrthogonal, .. }))
    }

    /// Modulation-domain response of the single integer path `h Δ^k Π^l`.
    pub fn path_response(&self, gain: Complex64, k: i64, l: i64) -> SparseMat {
        match self {
            FrameConfig::Afdm(c) => afdm::path_response(c, gain, k, l),
            FrameConfig::Otfs(c) => otfs::path_response(c, gain, k, l),
        }
    }

    /// Closed-form modulation-domain channel (integer Doppler only).
    pub fn sparse_channel(&self, ch: &ChannelRealization) -> Result<SparseMat> {
        match self {
            FrameConfig::Afdm(c) => afdm::sparse_effective_channel(ch, c),
            FrameConfig::Otfs(c) => otfs::sparse_effective_channel(ch, c),
        }
    }

    /// Exact dense modulation-domain channel.
    pub fn dense_channel<T: Real>(&self, ch: &ChannelRealization) -> Result<CMat<T>> {
        match self {
            FrameConfig::Afdm(c) => Ok(afdm::afdm_effective_channel(ch, c)?.matrix),
            FrameConfig::Otfs(c) => otfs::otfs_effective_channel(ch, c),
        }
    }
}

/// Cached modulator/demodulator for a frame configuration.
pub enum Modem<T: Real> {
    Afdm(Daft<T>),
    Otfs(OtfsModem<T>),
}

impl<T: Real> Modem<T> {
    pub fn new(cfg: &FrameConfig) -> Result<Self> {
        Ok(match cfg {
            FrameConfig::Afdm(c) => Modem::Afdm(Daft::new(c)?),
            FrameConfig::Otfs(c) => Modem::Otfs(OtfsModem::new(c)?),
        })
    }

    /// Modulation-domain symbols to time samples.
    pub fn modulate(&self, x: &CVec<T>) -> Result<CVec<T>> {
        match self {
            Modem::Afdm(m) => m.inverse(x),
            Modem::Otfs(m) => m.modulate_vec(x),
        }
    }

    /// Time samples to modulation-domain observations.
    pub fn demodulate(&self, d: &CVec<T>) -> Result<CVec<T>> {
        match self {
            Modem::Afdm(m) => m.forward(d),
            Modem::Otfs(m) => m.demodulate_vec(d),
        }
    }
}
