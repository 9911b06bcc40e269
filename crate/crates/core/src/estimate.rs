//! Embedded-pilot frame layouts and a single-pilot threshold estimator.
//!
//! Every layout reserves a pilot and guard region whose size equals the
//! matching [`overhead`] value; the rest of the frame carries data. The
//! estimator reads the guard cells reached by the pilot through each candidate
//! integer path and keeps the ones above `threshold·√n0`. It is a simple
//! stand-in for diagonal-reconstruction estimators and only handles
//! integer-grid channels.

use crate::cdds::{overhead, OverheadParams, Scheme};
use crate::error::{Error, Result};
use crate::frame::{FrameConfig, Waveform};
use crate::matrix::CVec;
use crate::sparse::SparseMat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default detection threshold in units of the noise standard deviation.
pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Pilot,
    Guard,
    Data,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Pilot => "pilot",
            Role::Guard => "guard",
            Role::Data => "data",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotLayout {
    pub waveform: Waveform,
    pub scheme: Scheme,
    pub roles: Vec<Role>,
    /// `(l_ext, k_ext)` covered by a single-pilot layout; `None` when the
    /// layout has several pilots or a non-integer Doppler extent.
    pub extents: Option<(usize, usize)>,
}

impl PilotLayout {
    pub fn size(&self) -> usize {
        self.roles.len()
    }

    fn indices(&self, role: Role) -> Vec<usize> {
        (0..self.roles.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn pilots(&self) -> Vec<usize> {
        self.indices(Role::Pilot)
    }

    pub fn guard(&self) -> Vec<usize> {
        self.indices(Role::Guard)
    }

    pub fn data(&self) -> Vec<usize> {
        self.indices(Role::Data)
    }

    /// `|pilot ∪ guard|`.
    pub fn overhead(&self) -> usize {
        self.roles.iter().filter(|r| **r != Role::Data).count()
    }

    /// One `index role` line per frame position.
    pub fn to_text(&self) -> String {
        self.roles.iter().enumerate().map(|(i, r)| format!("{i} {r}\n")).collect()
    }

    /// A layout with no pilot: every position carries data.
    pub fn all_data(waveform: Waveform, size: usize) -> Self {
        PilotLayout { waveform, scheme: Scheme::Siso, roles: vec![Role::Data; size], extents: None }
    }
}

/// Builds the pilot/guard arrangement of `scheme` on `frame`.
///
/// AFDM places a contiguous region starting at DAFT index 0: single-pilot
/// schemes centre the pilot, MIMO spaces `N_t` pilots `(l_max+1)(2k_max+1)`
/// apart. OTFS places a delay × Doppler rectangle at the grid origin: single
/// pilot at `(2k_ext, l_ext)`, MIMO pilots along the delay axis `l_max+1` apart.
pub fn build_layout(frame: &FrameConfig, scheme: Scheme, p: &OverheadParams) -> Result<PilotLayout> {
    frame.validate()?;
    let ov = overhead(frame.waveform(), scheme, p)? as usize;
    let (l, k, nt) = (p.l_max as usize, p.k_max as usize, p.n_t as usize);
    let extents = match scheme {
        Scheme::Siso => Some((l, k)),
        Scheme::Cdds => Some((l + p.l_tilde_max.unwrap_or(0) as usize, k + p.k_tilde_max.unwrap_or(0) as usize)),
        Scheme::Cdd => Some((l + nt - 1, k)),
        Scheme::Mimo | Scheme::Dodd => None,
    };
    let too_small = |what: String| Error::FrameTooSmall(what);
    let mut roles = vec![Role::Data; frame.size()];
    match frame {
        FrameConfig::Afdm(c) => {
            if ov > c.n {
                return Err(too_small(format!("pilot and guard need {ov} of {} DAFT bins", c.n)));
            }
            for r in roles.iter_mut().take(ov) {
                *r = Role::Guard;
            }
            if scheme == Scheme::Mimo {
                let block = (l + 1) * (2 * k + 1);
                for t in 0..nt {
                    roles[block - 1 + t * block] = Role::Pilot;
                }
            } else {
                roles[ov / 2] = Role::Pilot;
            }
        }
        FrameConfig::Otfs(c) => {
            let (width_l, width_k, pilots): (usize, usize, Vec<(usize, usize)>) = match scheme {
                Scheme::Mimo => (nt * (l + 1) + l, 4 * k + 1, (0..nt).map(|t| (2 * k, l + t * (l + 1))).collect()),
                Scheme::Dodd => (2 * l + 1, 4 * k + 2 * nt + 1, vec![(2 * k + nt, l)]),
                _ => {
                    let (le, ke) = extents.expect("single-pilot scheme");
                    (2 * le + 1, 4 * ke + 1, vec![(2 * ke, le)])
                }
            };
            debug_assert_eq!(width_l * width_k, ov);
            if width_l > c.l || width_k > c.k {
                return Err(too_small(format!(
                    "guard needs {width_k} Doppler × {width_l} delay bins, grid is {} × {}",
                    c.k, c.l
                )));
            }
            for u in 0..width_l {
                for kk in 0..width_k {
                    roles[c.vec_index(kk, u)] = Role::Guard;
                }
            }
            for (kk, u) in pilots {
                roles[c.vec_index(kk, u)] = Role::Pilot;
            }
        }
    }
    Ok(PilotLayout { waveform: frame.waveform(), scheme, roles, extents })
}

/// A detected integer path of the effective channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedTap {
    pub gain: Complex64,
    pub doppler: i64,
    pub delay: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub taps: Vec<EstimatedTap>,
    /// `Σ ĥ · path_response(k, l)` over the detected taps.
    pub matrix: SparseMat,
}

/// Single-pilot estimator with the pilot's per-path cells precomputed.
#[derive(Debug, Clone)]
pub struct EpaEstimator {
    frame: FrameConfig,
    pilot: usize,
    /// `(k, l, row, unit response at (row, pilot))`.
    cells: Vec<(i64, i64, usize, Complex64)>,
}

impl EpaEstimator {
    pub fn new(layout: &PilotLayout, frame: &FrameConfig) -> Result<Self> {
        let (l_ext, k_ext) = layout
            .extents
            .ok_or_else(|| Error::Config(format!("{:?} layouts have no single-pilot estimator", layout.scheme)))?;
        if layout.size() != frame.size() || layout.waveform != frame.waveform() {
            return Err(Error::Config("layout does not match the frame".into()));
        }
        if let FrameConfig::Afdm(c) = frame {
            if c.c1_num != 2 * k_ext as i64 + 1 {
                return Err(Error::Config(format!(
                    "pilot guard assumes 2N·c1 = {}, frame uses {}",
                    2 * k_ext + 1,
                    c.c1_num
                )));
            }
        }
        let pilots = layout.pilots();
        let pilot = pilots[0];
        let mut cells = Vec::new();
        for l in 0..=l_ext as i64 {
            for k in -(k_ext as i64)..=k_ext as i64 {
                let resp = frame.path_response(Complex64::new(1.0, 0.0), k, l);
                let hit = (0..resp.rows())
                    .find_map(|r| resp.row(r).iter().find(|(c, _)| *c == pilot).map(|(_, v)| (r, *v)))
                    .expect("every path response is a permutation");
                cells.push((k, l, hit.0, hit.1));
            }
        }
        Ok(EpaEstimator { frame: *frame, pilot, cells })
    }

    pub fn pilot_index(&self) -> usize {
        self.pilot
    }

    /// Taps with `|y[cell]| > threshold·√n0`, gains `y[cell] / (x_p · unit)`.
    pub fn estimate(&self, y: &CVec<f64>, pilot: Complex64, threshold: f64, n0: f64) -> Result<ChannelEstimate> {
        if y.len() != self.frame.size() {
            return Err(Error::Dimension { expected: self.frame.size(), found: y.len() });
        }
        let level = threshold * n0.max(0.0).sqrt();
        let taps: Vec<EstimatedTap> = self
            .cells
            .iter()
            .filter(|(_, _, row, _)| y[*row].norm() > level)
            .map(|&(k, l, row, unit)| EstimatedTap { gain: y[row] / (pilot * unit), doppler: k, delay: l })
            .collect();
        if taps.is_empty() {
            return Err(Error::EstimateFailure);
        }
        let n = self.frame.size();
        let mut matrix = SparseMat::zeros(n, n);
        for t in &taps {
            matrix.add_assign(&self.frame.path_response(t.gain, t.doppler, t.delay))?;
        }
        Ok(ChannelEstimate { taps, matrix })
    }
}

/// One-shot [`EpaEstimator`] run.
pub fn epa_estimate(
    y: &CVec<f64>,
    layout: &PilotLayout,
    frame: &FrameConfig,
    pilot: Complex64,
    threshold: f64,
    n0: f64,
) -> Result<ChannelEstimate> {
    EpaEstimator::new(layout, frame)?.estimate(y, pilot, threshold, n0)
}

/// Pilot amplitude giving pilot SNR `snrp_db` at noise variance `n0`.
pub fn pilot_amplitude(snrp_db: f64, n0: f64) -> f64 {
    (10f64.powf(snrp_db / 10.0) * n0).sqrt()
}
