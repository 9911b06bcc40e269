//! Monte-Carlo BER simulation of CDDS-precoded AFDM and OTFS links.
//!
//! Each frame draws from its own [`Rng`] stream keyed by
//! `(master_seed, snr_index, frame_index)`. Frames run in fixed-size batches
//! and the stop rule is only checked between batches, so results do not
//! depend on the number of worker threads.

use crate::analysis::{min_rank_over_pairs, sampled_min_rank, DiversityReport, EquivalentSiso};
use crate::cdds::{modulation_domain_precoder, DdProfile, precoder, CddsPlan, CddsStep, OverheadParams, Precoder, PrecoderKind, Scheme};
use crate::channel::{propagate, ChannelModel, MimoChannel};
use crate::detect::{ml_detect, mp_detect, Alphabet, MpOptions, StackedSystem, ML_SEARCH_CAP};
use crate::error::{Error, Result};
use crate::estimate::{build_layout, pilot_amplitude, EpaEstimator, PilotLayout, DEFAULT_THRESHOLD};
use crate::frame::{FrameConfig, Modem};
use crate::matrix::CVec;
use crate::rng::Rng;
use crate::sparse::SparseMat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Schema version accepted by [`SimConfig::from_json`].
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorConfig {
    Ml,
    Mp(MpOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Csi {
    #[default]
    Perfect,
    Estimated {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// The receiver knows the equivalent single-antenna path model: every
    /// effective path with the gain seen by the symbol at `reference`.
    PathModel {
        #[serde(default)]
        reference: usize,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

/// Embedded pilot and guard sized for the given channel and CDDS extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotSpec {
    pub l_max: usize,
    pub k_max: usize,
    #[serde(default)]
    pub l_tilde_max: usize,
    #[serde(default)]
    pub k_tilde_max: usize,
    #[serde(default = "default_snrp")]
    pub snrp_db: f64,
}

fn default_snrp() -> f64 {
    40.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    pub max_frames: u64,
    /// Frames simulated between stop-rule checks.
    #[serde(default = "default_batch")]
    pub batch_frames: u64,
}

fn default_min_errors() -> u64 {
    200
}

fn default_batch() -> u64 {
    64
}

fn default_one() -> usize {
    1
}

fn default_precoder() -> PrecoderKind {
    PrecoderKind::TdCdds
}

fn default_alphabet() -> Alphabet {
    Alphabet::Bpsk
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub version: u32,
    pub frame: FrameConfig,
    pub channel: ChannelModel,
    #[serde(default = "default_one")]
    pub n_r: usize,
    /// One CDDS step per transmit antenna; absent means a single antenna.
    #[serde(default)]
    pub plan: Option<CddsPlan>,
    #[serde(default = "default_precoder")]
    pub precoder: PrecoderKind,
    #[serde(default = "default_alphabet")]
    pub alphabet: Alphabet,
    pub detector: DetectorConfig,
    pub snr_grid_db: Vec<f64>,
    #[serde(default)]
    pub csi: Csi,
    #[serde(default)]
    pub pilot: Option<PilotSpec>,
    pub stop: StopRule,
    pub master_seed: u64,
    /// Reject plans whose shifted channel supports may overlap.
    #[serde(default)]
    pub assert_optimal_diversity: bool,
}

impl SimConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn plan(&self) -> CddsPlan {
        self.plan.clone().unwrap_or_else(CddsPlan::single)
    }

    pub fn n_t(&self) -> usize {
        self.plan().n_t()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("version: expected {CONFIG_VERSION}, found {}", self.version));
        }
        self.frame.validate()?;
        self.channel.validate()?;
        if self.n_r == 0 {
            return bad("n_r: must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db: must not be empty".into());
        }
        if self.snr_grid_db.windows(2).any(|w| !(w[1] > w[0])) || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid_db: must be finite and strictly increasing".into());
        }
        if self.stop.min_errors == 0 || self.stop.max_frames == 0 || self.stop.batch_frames == 0 {
            return bad("stop: min_errors, max_frames and batch_frames must be positive".into());
        }
        if self.channel.l_max() >= self.frame.size() {
            return bad("channel: delay spread does not fit the frame".into());
        }
        let plan = self.plan();
        for s in plan.steps() {
            precoder(self.precoder, *s, &self.frame).map_err(|e| Error::Config(format!("plan: {e}")))?;
        }
        if !self.frame.has_time_domain() && !self.channel.is_integer_grid() {
            return bad("channel: bi-orthogonal OTFS frames need integer Doppler".into());
        }
        if self.precoder == PrecoderKind::MdCddsAfdmUncompensated && !self.channel.is_integer_grid() {
            // The dense route handles it, but keep the comparison on the integer grid.
            return bad("precoder: the uncompensated shift is only simulated on integer-Doppler channels".into());
        }
        if let Csi::Estimated { threshold } = self.csi {
            if self.pilot.is_none() {
                return bad("pilot: estimated CSI needs a pilot specification".into());
            }
            if !self.channel.is_integer_grid() {
                return bad("csi: the estimator handles integer-Doppler channels only".into());
            }
            if !(threshold > 0.0) {
                return bad("csi.threshold: must be positive".into());
            }
        }
        if let Csi::PathModel { reference } = self.csi {
            if !self.channel.is_integer_grid() {
                return bad("csi: the path model needs integer-Doppler channels".into());
            }
            if reference >= self.frame.size() {
                return bad(format!("csi.reference: {reference} lies outside the frame"));
            }
        }
        if let Some(p) = &self.pilot {
            self.check_pilot_extents(p, &plan)?;
        }
        let data = self.layout()?.data().len();
        if let DetectorConfig::Ml = self.detector {
            let bits = (data * self.alphabet.bits_per_symbol()) as u32;
            if bits >= 128 || (1u128 << bits) > ML_SEARCH_CAP {
                return bad(format!("detector: ML over {data} symbols exceeds the search cap {ML_SEARCH_CAP}"));
            }
        }
        if self.assert_optimal_diversity && !supports_disjoint(&self.channel, &plan, self.frame.size()) {
            return bad("plan: shifted channel supports may overlap (assert_optimal_diversity is set)".into());
        }
        Ok(())
    }

    fn check_pilot_extents(&self, p: &PilotSpec, plan: &CddsPlan) -> Result<()> {
        let l_need = self.channel.l_max() as i64 + plan.l_tilde_max();
        let k_need = plan.steps().iter().map(|s| s.k.abs()).max().unwrap_or(0) as f64 + self.channel.k_max();
        if ((p.l_max + p.l_tilde_max) as i64) < l_need || ((p.k_max + p.k_tilde_max) as f64) < k_need.ceil() {
            return Err(Error::Config(format!(
                "pilot: guard extents ({}, {}) do not cover the effective channel ({l_need}, {k_need})",
                p.l_max + p.l_tilde_max,
                p.k_max + p.k_tilde_max
            )));
        }
        Ok(())
    }

    /// Pilot/guard/data arrangement of the frame.
    pub fn layout(&self) -> Result<PilotLayout> {
        match &self.pilot {
            None => Ok(PilotLayout::all_data(self.frame.waveform(), self.frame.size())),
            Some(p) => {
                let scheme = if p.l_tilde_max == 0 && p.k_tilde_max == 0 { Scheme::Siso } else { Scheme::Cdds };
                let params = OverheadParams::new(p.l_max as u64, p.k_max as u64, self.n_t() as u64)
                    .with_cdds(p.l_tilde_max as u64, p.k_tilde_max as u64);
                build_layout(&self.frame, scheme, &params)
            }
        }
    }
}

/// True when every channel realization keeps the `N_t` shifted supports
/// disjoint: exact for fixed profiles, via the delay/Doppler bounding box
/// otherwise.
fn supports_disjoint(model: &ChannelModel, plan: &CddsPlan, n: usize) -> bool {
    if let ChannelModel::Fixed { profile } = model {
        if let Ok(p) = DdProfile::new(profile.iter().map(|&(k, l)| (k.round() as i64, l as i64)).collect())
        {
            if model.is_integer_grid() {
                return crate::cdds::check_non_overlap(&p, plan, n);
            }
        }
    }
    let (l, k) = (model.l_max() as i64, model.k_max());
    let steps = plan.steps();
    steps.iter().enumerate().all(|(i, a)| {
        steps[i + 1..].iter().all(|b| {
            let dl = (a.l - b.l).abs();
            let dk = (a.k - b.k).abs() as f64;
            dl > l || if model.is_integer_grid() { dk > 2.0 * k } else { dk > 2.0 * k.ceil() }
        })
    })
}

/// The per-frame transmit/receive chain shared by simulation and tests.
pub struct Link {
    frame: FrameConfig,
    kind: PrecoderKind,
    steps: Vec<CddsStep>,
    tx: Vec<Precoder>,
    md: Vec<SparseMat>,
    modem: Modem<f64>,
    n_r: usize,
}

impl Link {
    pub fn new(frame: &FrameConfig, plan: &CddsPlan, kind: PrecoderKind, n_r: usize) -> Result<Self> {
        let steps = plan.steps().to_vec();
        let tx = steps.iter().map(|s| precoder(kind, *s, frame)).collect::<Result<Vec<_>>>()?;
        let md = steps.iter().map(|s| modulation_domain_precoder(kind, *s, frame)).collect::<Result<Vec<_>>>()?;
        Ok(Link { frame: *frame, kind, steps, tx, md, modem: Modem::new(frame)?, n_r })
    }

    pub fn n_t(&self) -> usize {
        self.steps.len()
    }

    fn power_scale(&self) -> f64 {
        1.0 / (self.n_t() as f64).sqrt()
    }

    /// Received modulation-domain vectors `y_r`, one per receive antenna.
    /// Each antenna transmits with power `1/N_t`; noise is `CN(0, n0)`.
    pub fn transmit(&self, x: &CVec<f64>, ch: &MimoChannel, n0: f64, rng: &mut Rng) -> Result<Vec<CVec<f64>>> {
        let md_kind = self.kind != PrecoderKind::TdCdds;
        let scale = Complex64::new(self.power_scale(), 0.0);
        let precoded: Vec<CVec<f64>> = self
            .tx
            .iter()
            .map(|c| if md_kind { c.apply(x) } else { Ok(x.clone()) })
            .collect::<Result<_>>()?;
        let n = self.frame.size();
        let mut out = Vec::with_capacity(self.n_r);
        if self.frame.has_time_domain() {
            let signals: Vec<CVec<f64>> = precoded
                .iter()
                .zip(&self.tx)
                .map(|(xt, c)| {
                    let s = self.modem.modulate(xt)?;
                    Ok(if md_kind { s } else { c.apply(&s)? }.scale(scale))
                })
                .collect::<Result<_>>()?;
            for r in 0..self.n_r {
                let mut d = CVec::zeros(n);
                for (t, s) in signals.iter().enumerate() {
                    d = &d + &propagate(s, &ch.link(r, t))?;
                }
                add_noise(&mut d, n0, rng);
                out.push(self.modem.demodulate(&d)?);
            }
        } else {
            for r in 0..self.n_r {
                let mut y = CVec::zeros(n);
                for t in 0..self.n_t() {
                    let h = self.frame.sparse_channel(&ch.link(r, t))?.matmul(&self.md[t])?;
                    y = &y + &h.mul_vec(x).scale(scale);
                }
                add_noise(&mut y, n0, rng);
                out.push(y);
            }
        }
        Ok(out)
    }

    /// Exact effective channels `H̄_r = N_t^{-1/2} Σ_t H_{r,t} C_t` in the
    /// modulation domain. Integer-Doppler links use the closed-form sparse
    /// responses; fractional Doppler falls back to the dense transform.
    pub fn effective_channels(&self, ch: &MimoChannel) -> Result<Vec<SparseMat>> {
        let n = self.frame.size();
        let scale = Complex64::new(self.power_scale(), 0.0);
        (0..self.n_r)
            .map(|r| {
                let mut h = SparseMat::zeros(n, n);
                for t in 0..self.n_t() {
                    let link = ch.link(r, t);
                    let hrt = if link.is_integer_grid() {
                        self.frame.sparse_channel(&link)?
                    } else {
                        SparseMat::from_dense(&self.frame.dense_channel::<f64>(&link)?, 0.0)
                    };
                    h.add_assign(&hrt.matmul(&self.md[t])?)?;
                }
                Ok(h.scale(scale))
            })
            .collect()
    }
}

impl Link {
    /// Channels rebuilt from the equivalent single-antenna path model: each
    /// precoded path `(k + k̃, l + l̃)` carries the gain observed by the symbol
    /// at `reference`. Equal to [`Link::effective_channels`] whenever every
    /// symbol sees the same effective gain.
    pub fn path_model_channels(&self, ch: &MimoChannel, reference: usize) -> Result<Vec<SparseMat>> {
        let n = self.frame.size();
        if reference >= n {
            return Err(Error::Dimension { expected: n, found: reference });
        }
        let one = Complex64::new(1.0, 0.0);
        let scale = Complex64::new(self.power_scale(), 0.0);
        (0..self.n_r)
            .map(|r| {
                let mut h = SparseMat::zeros(n, n);
                for (t, step) in self.steps.iter().enumerate() {
                    for (i, &(doppler, delay)) in ch.support().iter().enumerate() {
                        if doppler.fract() != 0.0 {
                            return Err(Error::Channel("the path model needs integer Doppler".into()));
                        }
                        let (k, l) = (doppler as i64, delay as i64);
                        let seen = self
                            .frame
                            .path_response(ch.gain(r, t, i), k, l)
                            .matmul(&self.md[t])?
                            .column(reference);
                        let (kb, lb) = (k + step.k, l + step.l);
                        let unit = self.frame.path_response(one, kb, lb).column(reference);
                        let row = (0..n)
                            .max_by(|&a, &b| unit[a].norm().total_cmp(&unit[b].norm()))
                            .expect("frame is not empty");
                        h.add_assign(&self.frame.path_response(seen[row] / unit[row], kb, lb))?;
                    }
                }
                Ok(h.scale(scale))
            })
            .collect()
    }
}

fn add_noise(v: &mut CVec<f64>, n0: f64, rng: &mut Rng) {
    if n0 > 0.0 {
        for z in v.as_mut_slice() {
            *z += rng.complex_normal(n0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct FrameStats {
    bit_errors: u64,
    bits: u64,
    estimate_failures: u64,
}

impl std::ops::Add for FrameStats {
    type Output = FrameStats;
    fn add(self, o: FrameStats) -> FrameStats {
        FrameStats {
            bit_errors: self.bit_errors + o.bit_errors,
            bits: self.bits + o.bits,
            estimate_failures: self.estimate_failures + o.estimate_failures,
        }
    }
}

struct Simulator<'a> {
    cfg: &'a SimConfig,
    link: Link,
    layout: PilotLayout,
    data: Vec<usize>,
    estimator: Option<EpaEstimator>,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        let link = Link::new(&cfg.frame, &cfg.plan(), cfg.precoder, cfg.n_r)?;
        let layout = cfg.layout()?;
        let data = layout.data();
        let estimator = match cfg.csi {
            Csi::Estimated { .. } => Some(EpaEstimator::new(&layout, &cfg.frame)?),
            Csi::Perfect | Csi::PathModel { .. } => None,
        };
        Ok(Simulator { cfg, link, layout, data, estimator })
    }

    fn frame(&self, snr_index: usize, n0: f64, frame_index: u64) -> Result<FrameStats> {
        let cfg = self.cfg;
        let mut rng = Rng::new(cfg.master_seed, Rng::frame_stream(snr_index, frame_index));
        let ch = MimoChannel::generate(&cfg.channel, self.link.n_t(), cfg.n_r, &mut rng)?;
        let (labels, symbols) = cfg.alphabet.random_frame(self.data.len(), &mut rng);
        let n = cfg.frame.size();
        let mut x = CVec::zeros(n);
        for (i, &d) in self.data.iter().enumerate() {
            x[d] = symbols[i];
        }
        let pilot = self.layout.pilots().first().copied();
        let amp = Complex64::new(cfg.pilot.map_or(0.0, |p| pilot_amplitude(p.snrp_db, n0)), 0.0);
        if let Some(p) = pilot {
            x[p] = amp;
        }
        let ys = self.link.transmit(&x, &ch, n0, &mut rng)?;

        let mut failures = 0;
        let channels: Vec<SparseMat> = match (&self.estimator, cfg.csi) {
            (Some(est), Csi::Estimated { threshold }) => ys
                .iter()
                .map(|y| match est.estimate(y, amp, threshold, n0) {
                    Ok(e) => Ok(e.matrix),
                    Err(Error::EstimateFailure) => {
                        failures += 1;
                        Ok(SparseMat::zeros(n, n))
                    }
                    Err(e) => Err(e),
                })
                .collect::<Result<_>>()?,
            (_, Csi::PathModel { reference }) => self.link.path_model_channels(&ch, reference)?,
            _ => self.link.effective_channels(&ch)?,
        };
        let blocks: Vec<(SparseMat, CVec<f64>)> = channels
            .iter()
            .zip(&ys)
            .map(|(h, y)| {
                let y = match pilot {
                    Some(p) => y - &h.column(p).scale(amp),
                    None => y.clone(),
                };
                (h.select_columns(&self.data), y)
            })
            .collect();
        let sys = StackedSystem::stack(&blocks, n0)?;
        let decided = match cfg.detector {
            DetectorConfig::Ml => ml_detect(&sys, cfg.alphabet)?,
            DetectorConfig::Mp(opts) => mp_detect(&sys, cfg.alphabet, &opts)?.symbols,
        };
        let bit_errors = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| cfg.alphabet.bit_errors(l, cfg.alphabet.demap(decided[i])))
            .sum();
        Ok(FrameStats {
            bit_errors,
            bits: (self.data.len() * cfg.alphabet.bits_per_symbol()) as u64,
            estimate_failures: failures,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frames: u64,
    pub estimate_failures: u64,
}

impl BerPoint {
    /// Binomial standard error of `ber`.
    pub fn std_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BerCurve {
    pub points: Vec<BerPoint>,
}

pub const CSV_HEADER: &str = "snr_db,ber,bit_errors,bits,frames";

impl BerCurve {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{},{}\n", p.snr_db, p.ber, p.bit_errors, p.bits, p.frames));
        }
        s
    }

    pub fn point(&self, snr_db: f64) -> Option<&BerPoint> {
        self.points.iter().find(|p| p.snr_db == snr_db)
    }

    /// SNR at which the curve crosses `target`, interpolating `log10(BER)`
    /// linearly between the bracketing points.
    pub fn snr_at_ber(&self, target: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.ber >= target && b.ber <= target && a.ber > 0.0 && b.ber > 0.0 && a.ber > b.ber {
                let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
                Some(a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db))
            } else {
                None
            }
        })
    }
}

/// Runs the configured simulation on the current rayon pool.
pub fn run_ber(cfg: &SimConfig) -> Result<BerCurve> {
    let sim = Simulator::new(cfg)?;
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for (si, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let n0 = 10f64.powf(-snr_db / 10.0);
        let mut total = FrameStats::default();
        let mut frames = 0u64;
        while frames < cfg.stop.max_frames && total.bit_errors < cfg.stop.min_errors {
            let batch = cfg.stop.batch_frames.min(cfg.stop.max_frames - frames);
            let stats = (frames..frames + batch)
                .into_par_iter()
                .map(|f| sim.frame(si, n0, f))
                .collect::<Result<Vec<_>>>()?;
            total = stats.into_iter().fold(total, |a, b| a + b);
            frames += batch;
        }
        points.push(BerPoint {
            snr_db,
            ber: total.bit_errors as f64 / total.bits as f64,
            bit_errors: total.bit_errors,
            bits: total.bits,
            frames,
            estimate_failures: total.estimate_failures,
        });
    }
    Ok(BerCurve { points })
}

/// [`run_ber`] on a dedicated pool of `workers` threads.
pub fn run_ber_with_workers(cfg: &SimConfig, workers: usize) -> Result<BerCurve> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    pool.install(|| run_ber(cfg))
}

/// Negated least-squares slope of `log10(BER)` against `SNR_dB/10` over the
/// points with `lo ≤ snr ≤ hi` and nonzero BER.
pub fn diversity_slope(curve: &BerCurve, window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.snr_db >= window.0 && p.snr_db <= window.1 && p.ber > 0.0)
        .map(|p| (p.snr_db / 10.0, p.ber.log10()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints(1));
    }
    Ok(-sxy / sxx)
}

/// Rank-criterion report for a fixed integer profile: exhaustive over
/// BPSK difference vectors, `samples` random pairs for larger alphabets.
pub fn diversity_report(cfg: &SimConfig, samples: u64) -> Result<DiversityReport> {
    let ChannelModel::Fixed { profile } = &cfg.channel else {
        return Err(Error::Config("channel: diversity analysis needs a fixed profile".into()));
    };
    if !cfg.channel.is_integer_grid() {
        return Err(Error::Config("channel: diversity analysis needs integer Doppler".into()));
    }
    let profile = DdProfile::new(profile.iter().map(|&(k, l)| (k as i64, l as i64)).collect())?;
    let sys = EquivalentSiso::from_plan(&cfg.frame, &profile, &cfg.plan(), cfg.precoder)?;
    match cfg.alphabet {
        Alphabet::Bpsk => min_rank_over_pairs(&sys, cfg.alphabet),
        _ => sampled_min_rank(&sys, cfg.alphabet, samples, &mut Rng::new(cfg.master_seed, 0)),
    }
}
