//! Cyclic delay-Doppler shift (CDDS) precoding.
//!
//! Transmit antenna `t` sends a cyclically delay/Doppler shifted copy of the
//! frame, so the receiver sees one equivalent channel whose paths are the
//! union of the shifted delay-Doppler profiles. All three precoders are
//! phase-compensated permutations:
//!
//! * time domain: `C = Δ_N^{k̃} Π_N^{l̃}` applied after modulation;
//! * OTFS modulation domain: `(I_L ⊗ Π_K^{k̃}) Π_{KL}^{K l̃}`;
//! * AFDM modulation domain: `Π_N^{m̃} P` with `m̃ = k̃ − 2Nc1·l̃` and a
//!   diagonal phase compensation `P`.

use crate::afdm::AfdmConfig;
use crate::channel::{ChannelRealization, DdPath};
use crate::error::{Error, Result};
use crate::frame::{FrameConfig, Waveform};
use crate::matrix::{CMat, CVec};
use crate::scalar::{cast, cis, ratio_turns, wrap, Real};
use crate::sparse::SparseMat;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// A `[k̃, l̃]` shift: Doppler step `k` (any sign) and cyclic delay `l ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i64, i64)", into = "(i64, i64)")]
pub struct CddsStep {
    pub k: i64,
    pub l: i64,
}

impl CddsStep {
    pub const ZERO: CddsStep = CddsStep { k: 0, l: 0 };

    pub fn new(k: i64, l: i64) -> Self {
        CddsStep { k, l }
    }
}

impl From<(i64, i64)> for CddsStep {
    fn from((k, l): (i64, i64)) -> Self {
        CddsStep { k, l }
    }
}

impl From<CddsStep> for (i64, i64) {
    fn from(s: CddsStep) -> Self {
        (s.k, s.l)
    }
}

impl std::fmt::Display for CddsStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{},{}]", self.k, self.l)
    }
}

/// One step per transmit antenna; antenna 1 is never shifted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CddsStep>", into = "Vec<CddsStep>")]
pub struct CddsPlan {
    steps: Vec<CddsStep>,
}

impl CddsPlan {
    pub fn new(steps: Vec<CddsStep>) -> Result<Self> {
        match steps.first() {
            None => return Err(Error::Config("a CDDS plan needs at least one antenna".into())),
            Some(s) if *s != CddsStep::ZERO => {
                return Err(Error::Config(format!("the first antenna must use step [0,0], got {s}")))
            }
            _ => {}
        }
        if let Some(s) = steps.iter().find(|s| s.l < 0) {
            return Err(Error::Config(format!("cyclic delay steps must be non-negative, got {s}")));
        }
        Ok(CddsPlan { steps })
    }

    /// Plan for `[0,0]` followed by the given steps.
    pub fn from_extra(extra: &[(i64, i64)]) -> Result<Self> {
        let mut steps = vec![CddsStep::ZERO];
        steps.extend(extra.iter().map(|&s| CddsStep::from(s)));
        CddsPlan::new(steps)
    }

    /// A single unshifted antenna.
    pub fn single() -> Self {
        CddsPlan { steps: vec![CddsStep::ZERO] }
    }

    pub fn steps(&self) -> &[CddsStep] {
        &self.steps
    }

    pub fn n_t(&self) -> usize {
        self.steps.len()
    }

    /// `l̃_max = max_t l̃_t`.
    pub fn l_tilde_max(&self) -> i64 {
        self.steps.iter().map(|s| s.l).max().unwrap_or(0)
    }
}

impl TryFrom<Vec<CddsStep>> for CddsPlan {
    type Error = Error;

    fn try_from(steps: Vec<CddsStep>) -> Result<Self> {
        CddsPlan::new(steps)
    }
}

impl From<CddsPlan> for Vec<CddsStep> {
    fn from(p: CddsPlan) -> Self {
        p.steps
    }
}

/// Set of integer `(k, l)` path positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(i64, i64)>", into = "Vec<(i64, i64)>")]
pub struct DdProfile {
    paths: Vec<(i64, i64)>,
}

impl DdProfile {
    pub fn new(paths: Vec<(i64, i64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &paths {
            if !seen.insert(*p) {
                return Err(Error::Channel(format!("duplicate profile entry {p:?}")));
            }
        }
        Ok(DdProfile { paths })
    }

    pub fn paths(&self) -> &[(i64, i64)] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn contains(&self, p: (i64, i64)) -> bool {
        self.paths.contains(&p)
    }

    pub fn k_max(&self) -> i64 {
        self.paths.iter().map(|p| p.0.abs()).max().unwrap_or(0)
    }

    pub fn l_max(&self) -> i64 {
        self.paths.iter().map(|p| p.1).max().unwrap_or(0)
    }
}

impl TryFrom<Vec<(i64, i64)>> for DdProfile {
    type Error = Error;

    fn try_from(paths: Vec<(i64, i64)>) -> Result<Self> {
        DdProfile::new(paths)
    }
}

impl From<DdProfile> for Vec<(i64, i64)> {
    fn from(p: DdProfile) -> Self {
        p.paths
    }
}

/// `k̄ = k + k̃`, `l̄ = l + l̃` for every path.
pub fn effective_profile(profile: &DdProfile, step: CddsStep) -> DdProfile {
    DdProfile { paths: profile.paths.iter().map(|&(k, l)| (k + step.k, l + step.l)).collect() }
}

/// Size of the union of all shifted profiles.
pub fn union_cardinality(profile: &DdProfile, plan: &CddsPlan) -> usize {
    plan.steps
        .iter()
        .flat_map(|s| effective_profile(profile, *s).paths)
        .collect::<HashSet<_>>()
        .len()
}

/// Shifted profiles are pairwise disjoint and `N_t·P ≤ N`.
pub fn check_non_overlap(profile: &DdProfile, plan: &CddsPlan, n: usize) -> bool {
    let total = plan.n_t() * profile.len();
    total <= n && union_cardinality(profile, plan) == total
}

/// Smallest `k_space` keeping every shifted path inside its original delay
/// block: `max{k_max, k_{2,max}, …} − k_max` with
/// `k_{t,max} = max_i |k_i + k̃_t|`. This is also `k̃_max`.
pub fn required_k_space(profile: &DdProfile, plan: &CddsPlan) -> i64 {
    plan.steps.iter().map(|s| step_k_space(profile, *s)).max().unwrap_or(0)
}

fn step_k_space(profile: &DdProfile, step: CddsStep) -> i64 {
    let k_max = profile.k_max();
    let kt = profile.paths.iter().map(|p| (p.0 + step.k).abs()).max().unwrap_or(0);
    (kt.max(k_max)) - k_max
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    TdCdds,
    MdCddsOtfs,
    MdCddsAfdm,
    /// The AFDM DAFT-domain shift without its phase compensation.
    MdCddsAfdmUncompensated,
}

/// A square matrix with exactly one unit-modulus entry per row and column,
/// stored as `row r ↦ (column, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    kind: PrecoderKind,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl Precoder {
    pub fn kind(&self) -> PrecoderKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.cols.len()
    }

    /// `(column, value)` of the single nonzero in row `r`.
    pub fn entry(&self, r: usize) -> (usize, Complex64) {
        (self.cols[r], self.values[r])
    }

    pub fn matrix<T: Real>(&self) -> CMat<T> {
        let n = self.size();
        let mut m = CMat::zeros(n, n);
        for r in 0..n {
            m[(r, self.cols[r])] = cast(self.values[r]);
        }
        m
    }

    pub fn sparse(&self) -> SparseMat {
        let n = self.size();
        let mut s = SparseMat::zeros(n, n);
        for r in 0..n {
            s.push(r, self.cols[r], self.values[r]);
        }
        s
    }

    /// `C x` in `O(N)`.
    pub fn apply<T: Real>(&self, x: &CVec<T>) -> Result<CVec<T>> {
        if x.len() != self.size() {
            return Err(Error::Dimension { expected: self.size(), found: x.len() });
        }
        Ok(CVec::from_fn(x.len(), |r| cast::<T>(self.values[r]) * x[self.cols[r]]))
    }

    /// One nonzero per row and column, each of modulus one within `eps`.
    pub fn is_phase_permutation(&self, eps: f64) -> bool {
        let mut seen = vec![false; self.size()];
        for (c, v) in self.cols.iter().zip(&self.values) {
            if seen[*c] || (v.norm() - 1.0).abs() > eps {
                return false;
            }
            seen[*c] = true;
        }
        true
    }
}

fn check_step(step: CddsStep, limit: usize, what: &str) -> Result<()> {
    if step.l < 0 || step.l as usize >= limit {
        return Err(Error::Domain(format!("cyclic delay step {} must lie in [0, {limit}) for {what}", step.l)));
    }
    Ok(())
}

/// `C = Δ_N^{k̃} Π_N^{l̃}`: row `r` takes sample `(r − l̃)_N` with phase
/// `e^{j2πk̃r/N}`.
pub fn td_cdds(step: CddsStep, n: usize) -> Result<Precoder> {
    check_step(step, n, "the frame length")?;
    let l = step.l as usize;
    Ok(Precoder {
        kind: PrecoderKind::TdCdds,
        cols: (0..n).map(|r| (r + n - l) % n).collect(),
        values: (0..n).map(|r| cis(ratio_turns(step.k, r as i64, n as i64))).collect(),
    })
}

/// `(I_L ⊗ Π_K^{k̃}) Π_{KL}^{K l̃}`, which maps `X[k,l]` to `X[(k−k̃)_K, (l−l̃)_L]`.
pub fn md_cdds_otfs(step: CddsStep, k: usize, l: usize) -> Result<Precoder> {
    check_step(step, l, "the delay axis")?;
    let n = k * l;
    let cols = (0..n)
        .map(|r| {
            let (kk, ll) = (r % k, r / k);
            let src_l = (ll + l - step.l as usize) % l;
            src_l * k + wrap(kk as i64 - step.k, k)
        })
        .collect();
    Ok(Precoder { kind: PrecoderKind::MdCddsOtfs, cols, values: vec![Complex64::new(1.0, 0.0); n] })
}

/// DAFT-domain step `m̃ = k̃ − 2Nc1·l̃` (signed).
pub fn daft_step(step: CddsStep, cfg: &AfdmConfig) -> i64 {
    step.k - cfg.c1_num * step.l
}

/// `Π_N^{m̃} P` with `P = diag(ℰ*(m̄))` and
/// `ℰ(m̄) = e^{j(2π/N)(m̄ l̃ + N c2 ((m̄+m̃)_N² − m̄²))}`.
pub fn md_cdds_afdm(step: CddsStep, cfg: &AfdmConfig) -> Result<Precoder> {
    md_cdds_afdm_with(step, cfg, true)
}

/// The AFDM modulation-domain shift `Π_N^{m̃}` without phase compensation.
pub fn md_cdds_afdm_uncompensated(step: CddsStep, cfg: &AfdmConfig) -> Result<Precoder> {
    md_cdds_afdm_with(step, cfg, false)
}

fn md_cdds_afdm_with(step: CddsStep, cfg: &AfdmConfig, compensate: bool) -> Result<Precoder> {
    cfg.validate()?;
    let n = cfg.n;
    check_step(step, n, "the frame length")?;
    let m_tilde = wrap(daft_step(step, cfg), n);
    let mut cols = vec![0; n];
    let mut values = vec![Complex64::new(1.0, 0.0); n];
    for m_bar in 0..n {
        let r = (m_bar + m_tilde) % n;
        cols[r] = m_bar;
        if compensate {
            let (mb, ri) = (m_bar as i64, r as i64);
            let turns = ratio_turns(mb, step.l, n as i64) + cfg.c2 * ((ri * ri - mb * mb) as f64);
            values[r] = cis(-turns);
        }
    }
    let kind = if compensate { PrecoderKind::MdCddsAfdm } else { PrecoderKind::MdCddsAfdmUncompensated };
    Ok(Precoder { kind, cols, values })
}

/// Builds the precoder of `kind` for one antenna step.
pub fn precoder(kind: PrecoderKind, step: CddsStep, frame: &FrameConfig) -> Result<Precoder> {
    match (kind, frame) {
        (PrecoderKind::TdCdds, f) => td_cdds(step, f.size()),
        (PrecoderKind::MdCddsOtfs, FrameConfig::Otfs(c)) => md_cdds_otfs(step, c.k, c.l),
        (PrecoderKind::MdCddsAfdm, FrameConfig::Afdm(c)) => md_cdds_afdm(step, c),
        (PrecoderKind::MdCddsAfdmUncompensated, FrameConfig::Afdm(c)) => md_cdds_afdm_uncompensated(step, c),
        (k, f) => Err(Error::Config(format!("{k:?} does not apply to {} frames", f.waveform()))),
    }
}

/// Precoder action seen in the modulation domain. Time-domain CDDS acts as the
/// single-path channel `Δ^{k̃}Π^{l̃}`; modulation-domain precoders act directly.
pub fn modulation_domain_precoder(kind: PrecoderKind, step: CddsStep, frame: &FrameConfig) -> Result<SparseMat> {
    match kind {
        PrecoderKind::TdCdds => {
            check_step(step, frame.size(), "the frame length")?;
            Ok(frame.path_response(Complex64::new(1.0, 0.0), step.k, step.l))
        }
        _ => Ok(precoder(kind, step, frame)?.sparse()),
    }
}

/// Effective gains `h̄_i` seen after precoding with `step`; `|h̄_i| = |h_i|`.
pub fn effective_gains(
    ch: &ChannelRealization,
    step: CddsStep,
    kind: PrecoderKind,
    frame: &FrameConfig,
) -> Result<Vec<Complex64>> {
    let integer = |p: &DdPath| {
        p.integer_doppler()
            .ok_or_else(|| Error::Channel("modulation-domain CDDS gains need integer Doppler".into()))
    };
    ch.paths()
        .iter()
        .map(|p| {
            let l = p.delay as i64;
            let turns = match (kind, frame) {
                (PrecoderKind::TdCdds, f) => -ratio_turns(step.k, l, f.size() as i64),
                (PrecoderKind::MdCddsOtfs, FrameConfig::Otfs(c)) => {
                    let k = integer(p)?;
                    ratio_turns(1, k * step.l + step.k * l + step.k * step.l, c.size() as i64)
                }
                (PrecoderKind::MdCddsAfdm, FrameConfig::Afdm(c)) => {
                    integer(p)?;
                    let m_tilde = daft_step(step, c);
                    -ratio_turns(1, c.c1_num * (2 * l * step.l + step.l * step.l) + 2 * m_tilde * l, 2 * c.n as i64)
                }
                (PrecoderKind::MdCddsAfdmUncompensated, _) => {
                    return Err(Error::Config("uncompensated AFDM shifts have no single-path effective form".into()))
                }
                (k, f) => return Err(Error::Config(format!("{k:?} does not apply to {} frames", f.waveform()))),
            };
            Ok(p.gain * cis::<f64>(turns))
        })
        .collect()
}

/// Paths `(h̄_i, k̄_i, l̄_i)` of the effective channel after precoding.
pub fn effective_paths(
    ch: &ChannelRealization,
    step: CddsStep,
    kind: PrecoderKind,
    frame: &FrameConfig,
) -> Result<Vec<DdPath>> {
    let gains = effective_gains(ch, step, kind, frame)?;
    Ok(ch
        .paths()
        .iter()
        .zip(gains)
        .map(|(p, g)| DdPath::new(g, p.doppler + step.k as f64, p.delay + step.l as usize))
        .collect())
}

/// `Σ h Δ^k Π^l` over arbitrary paths, delays taken modulo `N`.
pub fn paths_time_matrix<T: Real>(paths: &[DdPath], n: usize) -> CMat<T> {
    let mut h = CMat::zeros(n, n);
    for p in paths {
        let g: Complex<T> = cast(p.gain);
        for c in 0..n {
            let r = (c + p.delay) % n;
            h[(r, c)] += g * crate::matrix::doppler_phase::<T>(n, p.doppler, r);
        }
    }
    h
}

/// Modulation-domain matrix of arbitrary integer paths.
pub fn paths_modulation_matrix(paths: &[DdPath], frame: &FrameConfig) -> Result<SparseMat> {
    let n = frame.size();
    let mut h = SparseMat::zeros(n, n);
    for p in paths {
        let k = p
            .integer_doppler()
            .ok_or_else(|| Error::Channel("closed-form response needs integer Doppler".into()))?;
        h.add_assign(&frame.path_response(p.gain, k, p.delay as i64))?;
    }
    Ok(h)
}

/// Channel estimation schemes compared in the overhead table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Siso,
    Mimo,
    Cdd,
    Dodd,
    Cdds,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "siso" => Scheme::Siso,
            "mimo" => Scheme::Mimo,
            "cdd" => Scheme::Cdd,
            "dodd" => Scheme::Dodd,
            "cdds" => Scheme::Cdds,
            other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OverheadParams {
    pub l_max: u64,
    pub k_max: u64,
    #[serde(default = "one")]
    pub n_t: u64,
    #[serde(default)]
    pub l_tilde_max: Option<u64>,
    #[serde(default)]
    pub k_tilde_max: Option<u64>,
}

fn one() -> u64 {
    1
}

impl OverheadParams {
    pub fn new(l_max: u64, k_max: u64, n_t: u64) -> Self {
        OverheadParams { l_max, k_max, n_t, l_tilde_max: None, k_tilde_max: None }
    }

    pub fn with_cdds(mut self, l_tilde_max: u64, k_tilde_max: u64) -> Self {
        self.l_tilde_max = Some(l_tilde_max);
        self.k_tilde_max = Some(k_tilde_max);
        self
    }
}

/// Number of pilot and guard symbols needed for embedded-pilot estimation.
pub fn overhead(waveform: Waveform, scheme: Scheme, p: &OverheadParams) -> Result<u64> {
    let (l, k, nt) = (p.l_max, p.k_max, p.n_t);
    if nt == 0 {
        return Err(Error::Config("n_t must be at least 1".into()));
    }
    let cdds = || match (p.l_tilde_max, p.k_tilde_max) {
        (Some(lt), Some(kt)) => Ok((lt, kt)),
        _ => Err(Error::Config("the CDDS scheme needs l_tilde_max and k_tilde_max".into())),
    };
    Ok(match (waveform, scheme) {
        (Waveform::Afdm, Scheme::Siso) => 2 * (l + 1) * (2 * k + 1) - 1,
        (Waveform::Afdm, Scheme::Mimo) => (nt + 1) * (l + 1) * (2 * k + 1) - 1,
        (Waveform::Afdm, Scheme::Cdd) => 2 * (l + nt) * (2 * k + 1) - 1,
        (Waveform::Afdm, Scheme::Dodd) => 2 * (l + 1) * (2 * k + nt + 1) - 1,
        (Waveform::Afdm, Scheme::Cdds) => {
            let (lt, kt) = cdds()?;
            2 * (l + lt + 1) * (2 * (k + kt) + 1) - 1
        }
        (Waveform::Otfs, Scheme::Siso) => (2 * l + 1) * (4 * k + 1),
        (Waveform::Otfs, Scheme::Mimo) => (nt * (l + 1) + l) * (4 * k + 1),
        (Waveform::Otfs, Scheme::Cdd) => (2 * (l + nt - 1) + 1) * (4 * k + 1),
        (Waveform::Otfs, Scheme::Dodd) => (2 * l + 1) * (4 * k + 2 * nt + 1),
        (Waveform::Otfs, Scheme::Cdds) => {
            let (lt, kt) = cdds()?;
            (2 * (l + lt) + 1) * (4 * (k + kt) + 1)
        }
    })
}

/// CDDS overhead of a concrete plan, with `k̃_max = required_k_space`.
pub fn plan_overhead(waveform: Waveform, profile: &DdProfile, plan: &CddsPlan) -> u64 {
    let params = OverheadParams::new(profile.l_max() as u64, profile.k_max() as u64, plan.n_t() as u64)
        .with_cdds(plan.l_tilde_max() as u64, required_k_space(profile, plan) as u64);
    overhead(waveform, Scheme::Cdds, &params).expect("CDDS extents are set")
}

/// Candidate steps considered by [`plan_steps`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub k_lo: i64,
    pub k_hi: i64,
    /// Largest cyclic delay step; steps use `0..=l_hi`.
    pub l_hi: i64,
    /// Frame size for the `N_t·P ≤ N` check.
    pub frame_size: Option<usize>,
}

impl SearchWindow {
    /// `k̃ ∈ [−(k_max+N_t), k_max+N_t]`, `l̃ ∈ [0, min(N_t(l_max+1), delay_bins−1)]`.
    pub fn default_for(profile: &DdProfile, n_t: usize, delay_bins: usize, frame_size: usize) -> Self {
        let kb = profile.k_max() + n_t as i64;
        let lb = (n_t as i64 * (profile.l_max() + 1)).min(delay_bins as i64 - 1).max(0);
        SearchWindow { k_lo: -kb, k_hi: kb, l_hi: lb, frame_size: Some(frame_size) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedSteps {
    pub plan: CddsPlan,
    pub overhead: u64,
    pub k_tilde_max: i64,
    pub l_tilde_max: i64,
    pub union_size: usize,
    /// False when the shifted profiles overlap.
    pub valid: bool,
}

impl PlannedSteps {
    fn from_plan(waveform: Waveform, profile: &DdProfile, plan: CddsPlan, valid: bool) -> Self {
        PlannedSteps {
            overhead: plan_overhead(waveform, profile, &plan),
            k_tilde_max: required_k_space(profile, &plan),
            l_tilde_max: plan.l_tilde_max(),
            union_size: union_cardinality(profile, &plan),
            plan,
            valid,
        }
    }
}

const PLANNER_NODE_CAP: u64 = 20_000_000;

/// Minimum-overhead non-overlapping plan within `window`.
///
/// Extents `(k̃_max, l̃_max)` are visited in increasing overhead (ties by
/// `k̃_max`, then `l̃_max`); inside each extent box, step tuples are searched in
/// lexicographic order. Because overhead is strictly increasing in both
/// extents, the first feasible plan found is optimal. When no plan fits, the
/// error carries the greedy best partial plan, flagged invalid.
pub fn plan_steps(profile: &DdProfile, n_t: usize, window: &SearchWindow, waveform: Waveform) -> Result<PlannedSteps> {
    if n_t == 0 {
        return Err(Error::Config("n_t must be at least 1".into()));
    }
    if profile.is_empty() {
        return Err(Error::Channel("profile is empty".into()));
    }
    if window.k_lo > window.k_hi || window.l_hi < 0 {
        return Err(Error::Config("empty CDDS search window".into()));
    }
    let all: Vec<CddsStep> = (window.k_lo..=window.k_hi)
        .flat_map(|k| (0..=window.l_hi).map(move |l| CddsStep::new(k, l)))
        .collect();
    let fits = window.frame_size.is_none_or(|n| n_t * profile.len() <= n);
    if fits {
        let diffs: HashSet<(i64, i64)> = profile
            .paths
            .iter()
            .flat_map(|a| profile.paths.iter().map(move |b| (a.0 - b.0, a.1 - b.1)))
            .collect();
        let conflict = |a: CddsStep, b: CddsStep| diffs.contains(&(a.k - b.k, a.l - b.l));
        let usable: Vec<CddsStep> = all.iter().copied().filter(|s| !conflict(*s, CddsStep::ZERO)).collect();
        let ks_hi = usable.iter().map(|s| step_k_space(profile, *s)).max().unwrap_or(0);
        let mut boxes: Vec<(u64, i64, i64)> = (0..=ks_hi)
            .flat_map(|kb| (0..=window.l_hi).map(move |lb| (kb, lb)))
            .map(|(kb, lb)| {
                let p = OverheadParams::new(profile.l_max() as u64, profile.k_max() as u64, n_t as u64)
                    .with_cdds(lb as u64, kb as u64);
                (overhead(waveform, Scheme::Cdds, &p).expect("extents set"), kb, lb)
            })
            .collect();
        boxes.sort();
        let mut nodes = 0u64;
        for (_, kb, lb) in boxes {
            let cands: Vec<CddsStep> =
                usable.iter().copied().filter(|s| s.l <= lb && step_k_space(profile, *s) <= kb).collect();
            let mut chosen = vec![CddsStep::ZERO];
            if search(&cands, 0, n_t, &mut chosen, &conflict, &mut nodes)? {
                let plan = CddsPlan::new(chosen)?;
                return Ok(PlannedSteps::from_plan(waveform, profile, plan, true));
            }
        }
    }
    let best = greedy_plan(profile, n_t, &all);
    Err(Error::InfeasiblePlan(Box::new(PlannedSteps::from_plan(waveform, profile, best, false))))
}

fn search(
    cands: &[CddsStep],
    start: usize,
    n_t: usize,
    chosen: &mut Vec<CddsStep>,
    conflict: &impl Fn(CddsStep, CddsStep) -> bool,
    nodes: &mut u64,
) -> Result<bool> {
    if chosen.len() == n_t {
        return Ok(true);
    }
    let need = n_t - chosen.len();
    for i in start..cands.len() {
        if cands.len() - i < need {
            break;
        }
        *nodes += 1;
        if *nodes > PLANNER_NODE_CAP {
            return Err(Error::SearchSpace { size: *nodes as u128, cap: PLANNER_NODE_CAP as u128 });
        }
        let c = cands[i];
        if chosen.iter().any(|s| conflict(*s, c)) {
            continue;
        }
        chosen.push(c);
        if search(cands, i + 1, n_t, chosen, conflict, nodes)? {
            return Ok(true);
        }
        chosen.pop();
    }
    Ok(false)
}

fn greedy_plan(profile: &DdProfile, n_t: usize, all: &[CddsStep]) -> CddsPlan {
    let mut steps = vec![CddsStep::ZERO];
    let mut covered: HashSet<(i64, i64)> = profile.paths.iter().copied().collect();
    while steps.len() < n_t {
        let best = all
            .iter()
            .filter(|s| !steps.contains(s))
            .max_by_key(|s| {
                let gain = effective_profile(profile, **s).paths.iter().filter(|p| !covered.contains(p)).count();
                (gain, std::cmp::Reverse(**s))
            })
            .copied()
            .unwrap_or(CddsStep::ZERO);
        covered.extend(effective_profile(profile, best).paths);
        steps.push(best);
    }
    CddsPlan { steps }
}
