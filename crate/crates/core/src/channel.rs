//! Doubly selective channel realizations.
//!
//! A realization is a short list of paths, each a complex gain together with an
//! integer delay (in samples) and a Doppler shift in cycles per frame. The
//! time-domain channel matrix is `H̃ = Σ h_i Δ_N^{k_i} Π_N^{l_i}`; the prefix is
//! modeled as exact cyclic convolution and never materialized.

use crate::cdds::DdProfile;
use crate::error::{Error, Result};
use crate::matrix::{doppler_phase, CMat, CVec};
use crate::rng::Rng;
use crate::scalar::{cast, Real};
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdPath {
    pub gain: Complex64,
    /// Integer delay in samples.
    pub delay: usize,
    /// Doppler in cycles per frame; may be fractional.
    pub doppler: f64,
}

impl DdPath {
    pub fn new(gain: Complex64, doppler: f64, delay: usize) -> Self {
        DdPath { gain, delay, doppler }
    }

    pub fn integer_doppler(&self) -> Option<i64> {
        (self.doppler.fract() == 0.0).then_some(self.doppler as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    paths: Vec<DdPath>,
    l_max: usize,
    k_max: f64,
}

impl ChannelRealization {
    /// Builds a realization from explicit paths. Extents are taken from the
    /// paths themselves.
    pub fn from_paths(paths: Vec<DdPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Channel("a realization needs at least one path".into()));
        }
        let l_max = paths.iter().map(|p| p.delay).max().unwrap_or(0);
        let k_max = paths.iter().map(|p| p.doppler.abs()).fold(0.0, f64::max);
        let ch = ChannelRealization { paths, l_max, k_max };
        ch.check_distinct()?;
        Ok(ch)
    }

    fn with_bounds(paths: Vec<DdPath>, l_max: usize, k_max: f64) -> Result<Self> {
        let ch = ChannelRealization { paths, l_max, k_max };
        ch.check_distinct()?;
        Ok(ch)
    }

    fn check_distinct(&self) -> Result<()> {
        if self.is_integer_grid() {
            let mut seen = HashSet::new();
            for p in &self.paths {
                if !seen.insert((p.doppler as i64, p.delay)) {
                    return Err(Error::Channel(format!(
                        "duplicate path at (k={}, l={})",
                        p.doppler, p.delay
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn paths(&self) -> &[DdPath] {
        &self.paths
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn is_integer_grid(&self) -> bool {
        self.paths.iter().all(|p| p.doppler.fract() == 0.0)
    }

    /// The `(k, l)` support, or `None` when some Doppler is fractional.
    pub fn profile(&self) -> Option<DdProfile> {
        if !self.is_integer_grid() {
            return None;
        }
        DdProfile::new(self.paths.iter().map(|p| (p.doppler as i64, p.delay as i64)).collect()).ok()
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// Delay taps used for the EVA profile on a 15-sample delay grid.
///
/// Standard EVA delays (0, 30, 150, 310, 370, 710, 1090, 1730, 2510 ns) are
/// scaled so the last tap lands on sample 15 and rounded; taps that round onto
/// an occupied sample are moved to the next free one.
pub const EVA_DELAYS: [usize; 9] = [0, 1, 2, 3, 4, 5, 7, 10, 15];
/// Relative tap powers in dB.
pub const EVA_POWER_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];
pub const EVA_L_MAX: usize = 15;
pub const EVA_K_MAX: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ChannelModel {
    /// Fixed `(k, l)` support with fresh `CN(0, 1/P)` gains.
    Fixed { profile: Vec<(f64, usize)> },
    /// Random delays on `{0..l_max}` (distinct) and Jakes Dopplers.
    Jakes {
        paths: usize,
        l_max: usize,
        k_max: f64,
        #[serde(default)]
        integer_doppler: bool,
    },
    /// Extended Vehicular A: nine taps, `l_max = 15`, `k_max = 6`.
    Eva {
        #[serde(default)]
        integer_doppler: bool,
    },
}

impl ChannelModel {
    pub fn fixed(profile: &[(f64, usize)]) -> Self {
        ChannelModel::Fixed { profile: profile.to_vec() }
    }

    pub fn num_paths(&self) -> usize {
        match self {
            ChannelModel::Fixed { profile } => profile.len(),
            ChannelModel::Jakes { paths, .. } => *paths,
            ChannelModel::Eva { .. } => EVA_DELAYS.len(),
        }
    }

    pub fn l_max(&self) -> usize {
        match self {
            ChannelModel::Fixed { profile } => profile.iter().map(|p| p.1).max().unwrap_or(0),
            ChannelModel::Jakes { l_max, .. } => *l_max,
            ChannelModel::Eva { .. } => EVA_L_MAX,
        }
    }

    pub fn k_max(&self) -> f64 {
        match self {
            ChannelModel::Fixed { profile } => profile.iter().map(|p| p.0.abs()).fold(0.0, f64::max),
            ChannelModel::Jakes { k_max, .. } => *k_max,
            ChannelModel::Eva { .. } => EVA_K_MAX,
        }
    }

    /// True when every realization lies on the integer DD grid.
    pub fn is_integer_grid(&self) -> bool {
        match self {
            ChannelModel::Fixed { profile } => profile.iter().all(|p| p.0.fract() == 0.0),
            ChannelModel::Jakes { integer_doppler, k_max, .. } => *integer_doppler || *k_max == 0.0,
            ChannelModel::Eva { integer_doppler } => *integer_doppler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelModel::Fixed { profile } => {
                if profile.is_empty() {
                    return Err(Error::Channel("fixed profile is empty".into()));
                }
                let mut seen = HashSet::new();
                for (k, l) in profile {
                    if !k.is_finite() || !seen.insert((k.to_bits(), *l)) {
                        return Err(Error::Channel(format!("duplicate or invalid profile entry ({k}, {l})")));
                    }
                }
                Ok(())
            }
            ChannelModel::Jakes { paths, l_max, k_max, .. } => {
                if *paths == 0 {
                    return Err(Error::Channel("Jakes model needs at least one path".into()));
                }
                if *paths > l_max + 1 {
                    return Err(Error::Channel(format!(
                        "{paths} distinct delays do not fit in 0..={l_max}"
                    )));
                }
                if !(k_max.is_finite() && *k_max >= 0.0) {
                    return Err(Error::Channel(format!("k_max must be non-negative, got {k_max}")));
                }
                Ok(())
            }
            ChannelModel::Eva { .. } => Ok(()),
        }
    }

    /// Relative per-path powers, normalized to unit sum.
    fn powers(&self) -> Vec<f64> {
        match self {
            ChannelModel::Eva { .. } => {
                let lin: Vec<f64> = EVA_POWER_DB.iter().map(|db| 10f64.powf(db / 10.0)).collect();
                let total: f64 = lin.iter().sum();
                lin.iter().map(|p| p / total).collect()
            }
            _ => vec![1.0 / self.num_paths() as f64; self.num_paths()],
        }
    }

    /// Draws the `(doppler, delay)` support for one realization.
    fn draw_support(&self, rng: &mut Rng) -> Vec<(f64, usize)> {
        let jakes = |rng: &mut Rng, k_max: f64, integer: bool| {
            let theta = std::f64::consts::PI * (2.0 * rng.uniform() - 1.0);
            let k = k_max * theta.cos();
            if integer {
                k.round()
            } else {
                k
            }
        };
        match self {
            ChannelModel::Fixed { profile } => profile.clone(),
            ChannelModel::Jakes { paths, l_max, k_max, integer_doppler } => {
                let mut delays: Vec<usize> = Vec::with_capacity(*paths);
                while delays.len() < *paths {
                    let l = rng.int_inclusive(0, *l_max as i64) as usize;
                    if !delays.contains(&l) {
                        delays.push(l);
                    }
                }
                delays.into_iter().map(|l| (jakes(rng, *k_max, *integer_doppler), l)).collect()
            }
            ChannelModel::Eva { integer_doppler } => EVA_DELAYS
                .iter()
                .map(|&l| (jakes(rng, EVA_K_MAX, *integer_doppler), l))
                .collect(),
        }
    }

    fn bounds(&self) -> (usize, f64) {
        (self.l_max(), self.k_max())
    }
}

/// Draws one SISO realization.
pub fn generate(model: &ChannelModel, rng: &mut Rng) -> Result<ChannelRealization> {
    model.validate()?;
    let support = model.draw_support(rng);
    let powers = model.powers();
    let paths = support
        .iter()
        .zip(&powers)
        .map(|(&(k, l), &p)| DdPath::new(rng.complex_normal(p), k, l))
        .collect();
    let (l_max, k_max) = model.bounds();
    ChannelRealization::with_bounds(paths, l_max, k_max)
}

/// Channels between every (receive, transmit) antenna pair. All pairs share
/// one delay/Doppler support; gains are drawn independently per pair and path.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    n_t: usize,
    n_r: usize,
    support: Vec<(f64, usize)>,
    /// Indexed `[(r * n_t + t) * P + i]`.
    gains: Vec<Complex64>,
    l_max: usize,
    k_max: f64,
}

impl MimoChannel {
    pub fn generate(model: &ChannelModel, n_t: usize, n_r: usize, rng: &mut Rng) -> Result<Self> {
        model.validate()?;
        if n_t == 0 || n_r == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        let support = model.draw_support(rng);
        let powers = model.powers();
        let mut gains = Vec::with_capacity(n_r * n_t * support.len());
        for _ in 0..n_r * n_t {
            for p in &powers {
                gains.push(rng.complex_normal(*p));
            }
        }
        let (l_max, k_max) = model.bounds();
        Ok(MimoChannel { n_t, n_r, support, gains, l_max, k_max })
    }

    pub fn from_parts(n_t: usize, n_r: usize, support: Vec<(f64, usize)>, gains: Vec<Complex64>) -> Result<Self> {
        if gains.len() != n_t * n_r * support.len() {
            return Err(Error::Dimension { expected: n_t * n_r * support.len(), found: gains.len() });
        }
        let l_max = support.iter().map(|s| s.1).max().unwrap_or(0);
        let k_max = support.iter().map(|s| s.0.abs()).fold(0.0, f64::max);
        Ok(MimoChannel { n_t, n_r, support, gains, l_max, k_max })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn num_paths(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[(f64, usize)] {
        &self.support
    }

    pub fn gain(&self, r: usize, t: usize, i: usize) -> Complex64 {
        self.gains[(r * self.n_t + t) * self.support.len() + i]
    }

    /// The SISO channel from transmit antenna `t` to receive antenna `r`.
    pub fn link(&self, r: usize, t: usize) -> ChannelRealization {
        let paths = self
            .support
            .iter()
            .enumerate()
            .map(|(i, &(k, l))| DdPath::new(self.gain(r, t, i), k, l))
            .collect();
        ChannelRealization { paths, l_max: self.l_max, k_max: self.k_max }
    }
}

fn check_delays(ch: &ChannelRealization, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("frame length must be positive".into()));
    }
    if let Some(p) = ch.paths.iter().find(|p| p.delay >= n) {
        return Err(Error::Channel(format!("delay {} does not fit a frame of {n} samples", p.delay)));
    }
    Ok(())
}

/// `H̃ = Σ h_i Δ_N^{k_i} Π_N^{l_i}`.
pub fn time_channel_matrix<T: Real>(ch: &ChannelRealization, n: usize) -> Result<CMat<T>> {
    check_delays(ch, n)?;
    let mut h = CMat::zeros(n, n);
    for p in &ch.paths {
        let g: Complex<T> = cast(p.gain);
        for c in 0..n {
            let r = (c + p.delay) % n;
            h[(r, c)] += g * doppler_phase::<T>(n, p.doppler, r);
        }
    }
    Ok(h)
}

/// Noiseless `H̃ s`, evaluated path by path.
pub fn propagate<T: Real>(s: &CVec<T>, ch: &ChannelRealization) -> Result<CVec<T>> {
    let n = s.len();
    check_delays(ch, n)?;
    let mut d = CVec::zeros(n);
    add_paths(&mut d, s, ch.paths.iter().copied());
    Ok(d)
}

/// Accumulates `Σ h Δ^k Π^l s` into `d`. Delays are taken modulo the frame length.
pub(crate) fn add_paths<T: Real>(d: &mut CVec<T>, s: &CVec<T>, paths: impl IntoIterator<Item = DdPath>) {
    let n = s.len();
    for p in paths {
        let g: Complex<T> = cast(p.gain);
        let l = p.delay % n;
        for i in 0..n {
            let src = (i + n - l) % n;
            d[i] += g * doppler_phase::<T>(n, p.doppler, i) * s[src];
        }
    }
}

/// `d = H̃ s + w` with `w ~ CN(0, n0 I)`, evaluated path by path.
pub fn apply_channel<T: Real>(s: &CVec<T>, ch: &ChannelRealization, n0: f64, rng: &mut Rng) -> Result<CVec<T>> {
    let n = s.len();
    let mut d = propagate(s, ch)?;
    if n0 > 0.0 {
        for i in 0..n {
            d[i] += cast::<T>(rng.complex_normal(n0));
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{forward_cyclic_shift, Tolerance};

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn fixed_profile_support() {
        let m = ChannelModel::fixed(&[(0.0, 0), (-1.0, 1)]);
        let ch = generate(&m, &mut Rng::new(1, 0)).unwrap();
        assert_eq!(ch.num_paths(), 2);
        assert_eq!(ch.paths()[1].doppler, -1.0);
        assert_eq!(ch.paths()[1].delay, 1);
        assert_eq!(ch.profile().unwrap().len(), 2);
    }

    #[test]
    fn fixed_profile_rejects_duplicates() {
        let m = ChannelModel::fixed(&[(1.0, 2), (1.0, 2)]);
        assert!(generate(&m, &mut Rng::new(1, 0)).is_err());
    }

    #[test]
    fn eva_profile() {
        let ch = generate(&ChannelModel::Eva { integer_doppler: true }, &mut Rng::new(3, 0)).unwrap();
        assert_eq!(ch.num_paths(), 9);
        assert_eq!(ch.l_max(), 15);
        assert_eq!(ch.k_max(), 6.0);
        let delays: Vec<usize> = ch.paths().iter().map(|p| p.delay).collect();
        assert_eq!(delays, EVA_DELAYS);
        assert!(ch.paths().iter().all(|p| p.doppler.abs() <= 6.0 && p.doppler.fract() == 0.0));
        let powers = ChannelModel::Eva { integer_doppler: true }.powers();
        assert!((powers.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let ratio_db = 10.0 * (powers[4] / powers[0]).log10();
        assert!((ratio_db + 0.6).abs() < 1e-9);
    }

    #[test]
    fn degenerate_jakes_is_flat() {
        let m = ChannelModel::Jakes { paths: 1, l_max: 0, k_max: 0.0, integer_doppler: false };
        let ch = generate(&m, &mut Rng::new(9, 9)).unwrap();
        assert_eq!(ch.num_paths(), 1);
        assert_eq!(ch.paths()[0].delay, 0);
        assert_eq!(ch.paths()[0].doppler.abs(), 0.0);
    }

    #[test]
    fn jakes_rejects_too_many_paths() {
        let m = ChannelModel::Jakes { paths: 3, l_max: 1, k_max: 1.0, integer_doppler: false };
        assert!(m.validate().is_err());
    }

    #[test]
    fn jakes_bounds_and_distinct_delays() {
        let m = ChannelModel::Jakes { paths: 4, l_max: 4, k_max: 3.0, integer_doppler: false };
        let mut rng = Rng::new(11, 0);
        for _ in 0..2000 {
            let ch = generate(&m, &mut rng).unwrap();
            assert!(ch.paths().iter().all(|p| p.doppler.abs() <= 3.0 && p.delay <= 4));
            let mut d: Vec<usize> = ch.paths().iter().map(|p| p.delay).collect();
            d.sort();
            d.dedup();
            assert_eq!(d.len(), 4);
        }
    }

    #[test]
    fn unit_average_power() {
        let models = [
            ChannelModel::fixed(&[(0.0, 0), (-1.0, 1)]),
            ChannelModel::Jakes { paths: 2, l_max: 4, k_max: 3.0, integer_doppler: true },
            ChannelModel::Eva { integer_doppler: false },
        ];
        for m in &models {
            let mut rng = Rng::new(21, 0);
            let trials = 10_000;
            let mean: f64 = (0..trials).map(|_| generate(m, &mut rng).unwrap().total_power()).sum::<f64>() / trials as f64;
            assert!((mean - 1.0).abs() < 0.02, "{m:?}: {mean}");
        }
    }

    #[test]
    fn mimo_gains_uncorrelated() {
        let m = ChannelModel::fixed(&[(0.0, 0), (-1.0, 1)]);
        let mut rng = Rng::new(4, 0);
        let trials = 10_000;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut p0 = 0.0;
        let mut p1 = 0.0;
        for _ in 0..trials {
            let ch = MimoChannel::generate(&m, 2, 2, &mut rng).unwrap();
            let a = ch.gain(0, 0, 0);
            let b = ch.gain(1, 1, 0);
            acc += a * b.conj();
            p0 += a.norm_sqr();
            p1 += b.norm_sqr();
        }
        let corr = acc.norm() / (p0 * p1).sqrt();
        assert!(corr < 0.05, "corr = {corr}");
    }

    #[test]
    fn identity_and_delay_matrices() {
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 0.0, 0)]).unwrap();
        let h: CMat<f64> = time_channel_matrix(&ch, 4).unwrap();
        assert!(h.approx_eq(&CMat::identity(4), Tolerance::EXACT));
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 0.0, 1)]).unwrap();
        let h: CMat<f64> = time_channel_matrix(&ch, 3).unwrap();
        assert!(h.approx_eq(&forward_cyclic_shift(3, 1).unwrap(), Tolerance::EXACT));
    }

    #[test]
    fn two_path_matrix_entry() {
        let ch = ChannelRealization::from_paths(vec![
            DdPath::new(one(), 0.0, 0),
            DdPath::new(Complex64::new(0.5, 0.0), 1.0, 1),
        ])
        .unwrap();
        let h: CMat<f64> = time_channel_matrix(&ch, 4).unwrap();
        assert!((h[(1, 0)] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!((h[(0, 0)] - one()).norm() < 1e-15);
    }

    #[test]
    fn delay_beyond_frame_rejected() {
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 0.0, 4)]).unwrap();
        assert!(time_channel_matrix::<f64>(&ch, 4).is_err());
        assert!(apply_channel(&CVec::<f64>::zeros(4), &ch, 0.0, &mut Rng::new(0, 0)).is_err());
    }

    #[test]
    fn apply_matches_matrix() {
        let mut rng = Rng::new(2, 0);
        let m = ChannelModel::Jakes { paths: 3, l_max: 5, k_max: 2.5, integer_doppler: false };
        for _ in 0..20 {
            let ch = generate(&m, &mut rng).unwrap();
            let s = CVec::from_fn(16, |_| rng.complex_normal(1.0));
            let d = apply_channel(&s, &ch, 0.0, &mut rng).unwrap();
            let h: CMat<f64> = time_channel_matrix(&ch, 16).unwrap();
            assert!(d.max_abs_diff(&h.mul_vec(&s)) < 1e-12);
        }
    }

    #[test]
    fn pure_delay_shifts_signal() {
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 0.0, 1)]).unwrap();
        let s = CVec::from_vec(vec![one(), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]);
        let d = apply_channel(&s, &ch, 0.0, &mut Rng::new(0, 0)).unwrap();
        assert_eq!(d[1], one());
        assert_eq!(d[0].norm(), 0.0);
    }
}
