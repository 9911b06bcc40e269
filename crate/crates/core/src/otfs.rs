//! Orthogonal time frequency space modulation.
//!
//! A frame is a `K × L` delay-Doppler grid `X[k, l]` (row `k` is Doppler,
//! column `l` is delay), vectorized delay-major: `vec(X)[l·K + k] = X[k, l]`.
//! Modulation is the ISFFT followed by a rectangular-pulse Heisenberg
//! transform sampled at the delay resolution, which reduces to a `K`-point
//! IDFT along the Doppler axis of each delay column:
//! `s[nL + l] = K^{-1/2} Σ_k X[k, l] e^{j2πnk/K}`.
//!
//! Ideal bi-orthogonal pulses have no finite-sample realization. In
//! [`Pulse::BiOrthogonal`] mode the modulator and demodulator are the same
//! discrete pair, and the channel is imposed directly in the delay-Doppler
//! domain via [`otfs_effective_channel`].

use crate::channel::{propagate, ChannelRealization};
use crate::error::{Error, Result};
use crate::matrix::{CMat, CVec};
use crate::scalar::{cis, ratio_turns, wrap, Real};
use crate::sparse::SparseMat;
use num_complex::{Complex, Complex64};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pulse {
    Rectangular,
    BiOrthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtfsConfig {
    /// Doppler bins.
    pub k: usize,
    /// Delay bins.
    pub l: usize,
    pub pulse: Pulse,
}

impl OtfsConfig {
    pub fn new(k: usize, l: usize, pulse: Pulse) -> Result<Self> {
        let cfg = OtfsConfig { k, l, pulse };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::Domain(format!("OTFS grid must be non-empty (K={}, L={})", self.k, self.l)));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.k * self.l
    }

    /// Position of grid cell `(k, l)` in `vec(X)`.
    pub fn vec_index(&self, k: usize, l: usize) -> usize {
        l * self.k + k
    }
}

/// Delay-Doppler symbol grid stored in `vec` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid<T: Real> {
    k: usize,
    l: usize,
    data: CVec<T>,
}

impl<T: Real> DdGrid<T> {
    pub fn zeros(k: usize, l: usize) -> Self {
        DdGrid { k, l, data: CVec::zeros(k * l) }
    }

    pub fn from_fn(k: usize, l: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        DdGrid { k, l, data: CVec::from_fn(k * l, |i| f(i % k, i / k)) }
    }

    /// Inverse of [`DdGrid::vec`].
    pub fn from_vec(k: usize, l: usize, v: CVec<T>) -> Result<Self> {
        if v.len() != k * l {
            return Err(Error::Dimension { expected: k * l, found: v.len() });
        }
        Ok(DdGrid { k, l, data: v })
    }

    pub fn from_matrix(x: &CMat<T>) -> Self {
        DdGrid::from_fn(x.rows(), x.cols(), |k, l| x[(k, l)])
    }

    pub fn doppler_bins(&self) -> usize {
        self.k
    }

    pub fn delay_bins(&self) -> usize {
        self.l
    }

    pub fn get(&self, k: usize, l: usize) -> Complex<T> {
        self.data[l * self.k + k]
    }

    pub fn set(&mut self, k: usize, l: usize, v: Complex<T>) {
        self.data[l * self.k + k] = v;
    }

    pub fn vec(&self) -> &CVec<T> {
        &self.data
    }

    pub fn into_vec(self) -> CVec<T> {
        self.data
    }

    pub fn to_matrix(&self) -> CMat<T> {
        CMat::from_fn(self.k, self.l, |k, l| self.get(k, l))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.norm()
    }
}

/// Cached transforms for one grid size.
pub struct OtfsModem<T: Real> {
    cfg: OtfsConfig,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> OtfsModem<T> {
    pub fn new(cfg: &OtfsConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(OtfsModem {
            cfg: *cfg,
            fwd: planner.plan_fft_forward(cfg.k),
            inv: planner.plan_fft_inverse(cfg.k),
            scale: T::from_f64_lossy(1.0 / (cfg.k as f64).sqrt()),
        })
    }

    pub fn config(&self) -> &OtfsConfig {
        &self.cfg
    }

    /// `s = M vec(X)`.
    pub fn modulate_vec(&self, x: &CVec<T>) -> Result<CVec<T>> {
        let (k, l) = (self.cfg.k, self.cfg.l);
        if x.len() != k * l {
            return Err(Error::Dimension { expected: k * l, found: x.len() });
        }
        let mut s = CVec::zeros(k * l);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); k];
        for u in 0..l {
            buf.copy_from_slice(&x.as_slice()[u * k..(u + 1) * k]);
            self.inv.process(&mut buf);
            for (n, v) in buf.iter().enumerate() {
                s[n * l + u] = *v * self.scale;
            }
        }
        Ok(s)
    }

    /// `vec(Y) = D d` with `D = Mᴴ`.
    pub fn demodulate_vec(&self, d: &CVec<T>) -> Result<CVec<T>> {
        let (k, l) = (self.cfg.k, self.cfg.l);
        if d.len() != k * l {
            return Err(Error::Dimension { expected: k * l, found: d.len() });
        }
        let mut y = CVec::zeros(k * l);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); k];
        for u in 0..l {
            for (n, b) in buf.iter_mut().enumerate() {
                *b = d[n * l + u];
            }
            self.fwd.process(&mut buf);
            for (kk, v) in buf.iter().enumerate() {
                y[u * k + kk] = *v * self.scale;
            }
        }
        Ok(y)
    }
}

pub fn otfs_modulate<T: Real>(x: &DdGrid<T>, cfg: &OtfsConfig) -> Result<CVec<T>> {
    if x.k != cfg.k || x.l != cfg.l {
        return Err(Error::Dimension { expected: cfg.size(), found: x.k * x.l });
    }
    OtfsModem::new(cfg)?.modulate_vec(&x.data)
}

pub fn otfs_demodulate<T: Real>(d: &CVec<T>, cfg: &OtfsConfig) -> Result<DdGrid<T>> {
    let y = OtfsModem::new(cfg)?.demodulate_vec(d)?;
    DdGrid::from_vec(cfg.k, cfg.l, y)
}

/// Dense modulation matrix `M` with `s = M vec(X)`.
pub fn modulation_matrix<T: Real>(cfg: &OtfsConfig) -> Result<CMat<T>> {
    cfg.validate()?;
    let (k, l) = (cfg.k, cfg.l);
    let scale = T::from_f64_lossy(1.0 / (k as f64).sqrt());
    let mut m = CMat::zeros(k * l, k * l);
    for u in 0..l {
        for n in 0..k {
            for kk in 0..k {
                m[(n * l + u, u * k + kk)] = cis::<T>(ratio_turns(n as i64, kk as i64, k as i64)) * scale;
            }
        }
    }
    Ok(m)
}

/// Dense demodulation matrix `D = Mᴴ`.
pub fn demodulation_matrix<T: Real>(cfg: &OtfsConfig) -> Result<CMat<T>> {
    Ok(modulation_matrix::<T>(cfg)?.adjoint())
}

/// Delay-Doppler channel mapping `vec(X)` to `vec(Y)`.
///
/// Rectangular mode is `D H̃ M` (exact, fractional Doppler allowed).
/// Bi-orthogonal mode imposes `Y[k,l] = Σ h_i e^{-j2πk_i l_i/(KL)} X[(k−k_i)_K, (l−l_i)_L]`
/// and needs integer Doppler.
pub fn otfs_effective_channel<T: Real>(ch: &ChannelRealization, cfg: &OtfsConfig) -> Result<CMat<T>> {
    match cfg.pulse {
        Pulse::Rectangular => {
            let modem = OtfsModem::<T>::new(cfg)?;
            let n = cfg.size();
            let mut h = CMat::zeros(n, n);
            for c in 0..n {
                let y = modem.demodulate_vec(&propagate(&modem.modulate_vec(&CVec::basis(n, c))?, ch)?)?;
                for r in 0..n {
                    h[(r, c)] = y[r];
                }
            }
            Ok(h)
        }
        Pulse::BiOrthogonal => {
            let h = sparse_effective_channel(ch, cfg)?.to_dense();
            Ok(h.map(|z| Complex::new(T::from_f64_lossy(z.re), T::from_f64_lossy(z.im))))
        }
    }
}

/// Closed-form delay-Doppler response of one integer path `h Δ^k Π^l`.
///
/// With `l = aL + b` (`0 ≤ b < L`), rectangular pulses give
/// `Y[κ,u] = h e^{j2πk u/(KL)} e^{-j2π(a+w)(κ−k)_K/K} X[(κ−k)_K, (u−b)_L]`
/// where `w = 1` for `u < b`; bi-orthogonal pulses give the imposed map
/// described on [`otfs_effective_channel`].
pub fn path_response(cfg: &OtfsConfig, gain: Complex64, k: i64, l: i64) -> SparseMat {
    let (kk, ll) = (cfg.k, cfg.l);
    let n = kk * ll;
    let mut s = SparseMat::zeros(n, n);
    let a = l.div_euclid(ll as i64);
    let b = l.rem_euclid(ll as i64) as usize;
    for u in 0..ll {
        let src_u = (u + ll - b) % ll;
        for kappa in 0..kk {
            let src_k = wrap(kappa as i64 - k, kk);
            let phase = match cfg.pulse {
                Pulse::Rectangular => {
                    let w = i64::from(u < b);
                    ratio_turns(k, u as i64, n as i64) - ratio_turns(a + w, src_k as i64, kk as i64)
                }
                Pulse::BiOrthogonal => -ratio_turns(k, l, n as i64),
            };
            s.push(cfg.vec_index(kappa, u), cfg.vec_index(src_k, src_u), gain * cis::<f64>(phase));
        }
    }
    s
}

/// Sum of [`path_response`] over an integer-grid channel.
pub fn sparse_effective_channel(ch: &ChannelRealization, cfg: &OtfsConfig) -> Result<SparseMat> {
    cfg.validate()?;
    let n = cfg.size();
    let mut h = SparseMat::zeros(n, n);
    for p in ch.paths() {
        let k = p
            .integer_doppler()
            .ok_or_else(|| Error::Channel("closed-form delay-Doppler response needs integer Doppler".into()))?;
        h.add_assign(&path_response(cfg, p.gain, k, p.delay as i64))?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate, ChannelModel, DdPath};
    use crate::matrix::Tolerance;
    use crate::rng::Rng;

    fn cfg(pulse: Pulse) -> OtfsConfig {
        OtfsConfig::new(4, 3, pulse).unwrap()
    }

    fn random_grid(rng: &mut Rng, k: usize, l: usize) -> DdGrid<f64> {
        DdGrid::from_fn(k, l, |_, _| rng.complex_normal(1.0))
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn vec_layout_is_delay_major() {
        let g = DdGrid::<f64>::from_fn(4, 3, |k, l| Complex64::new(k as f64, l as f64));
        assert_eq!(g.vec()[2 * 4 + 1], Complex64::new(1.0, 2.0));
        let back = DdGrid::from_matrix(&g.to_matrix());
        assert_eq!(back, g);
        assert_eq!(DdGrid::from_vec(4, 3, g.vec().clone()).unwrap(), g);
    }

    #[test]
    fn trivial_modulations() {
        let c = cfg(Pulse::Rectangular);
        assert!(otfs_modulate(&DdGrid::<f64>::zeros(4, 3), &c).unwrap().norm() == 0.0);
        let c1 = OtfsConfig::new(1, 1, Pulse::Rectangular).unwrap();
        let g = DdGrid::from_fn(1, 1, |_, _| Complex64::new(0.3, -2.0));
        assert_eq!(otfs_modulate(&g, &c1).unwrap()[0], Complex64::new(0.3, -2.0));
    }

    #[test]
    fn single_symbol_spreads_over_doppler() {
        // X = e_(0,0) puts 1/√K at delay sample 0 of every time slot.
        let c = cfg(Pulse::Rectangular);
        let mut g = DdGrid::<f64>::zeros(4, 3);
        g.set(0, 0, one());
        let s = otfs_modulate(&g, &c).unwrap();
        for t in 0..12 {
            let expect = if t % 3 == 0 { 0.5 } else { 0.0 };
            assert!((s[t] - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fast_matches_matrices() {
        let mut rng = Rng::new(1, 0);
        let c = OtfsConfig::new(5, 4, Pulse::Rectangular).unwrap();
        let m: CMat<f64> = modulation_matrix(&c).unwrap();
        let d: CMat<f64> = demodulation_matrix(&c).unwrap();
        assert!(d.matmul(&m).approx_eq(&CMat::identity(20), Tolerance::EXACT));
        let x = random_grid(&mut rng, 5, 4);
        let s = otfs_modulate(&x, &c).unwrap();
        assert!(s.approx_eq(&m.mul_vec(x.vec()), Tolerance::EXACT));
        assert!((s.norm() - x.frobenius_norm()).abs() < 1e-12);
        let y = otfs_demodulate(&s, &c).unwrap();
        assert!(y.vec().approx_eq(x.vec(), Tolerance::EXACT));
    }

    #[test]
    fn noise_energy_preserved() {
        let mut rng = Rng::new(2, 0);
        let c = OtfsConfig::new(16, 16, Pulse::Rectangular).unwrap();
        let x = random_grid(&mut rng, 16, 16);
        let s = otfs_modulate(&x, &c).unwrap();
        let w = CVec::from_fn(256, |_| rng.complex_normal(0.1));
        let y = otfs_demodulate(&(&s + &w), &c).unwrap();
        let noise = y.vec() - x.vec();
        assert!((noise.norm_sqr() / w.norm_sqr() - 1.0).abs() < 0.01);
    }

    #[test]
    fn identity_channel_both_pulses() {
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 0.0, 0)]).unwrap();
        for p in [Pulse::Rectangular, Pulse::BiOrthogonal] {
            let h: CMat<f64> = otfs_effective_channel(&ch, &cfg(p)).unwrap();
            assert!(h.approx_eq(&CMat::identity(12), Tolerance::EXACT));
        }
    }

    #[test]
    fn biorthogonal_single_path() {
        let c = cfg(Pulse::BiOrthogonal);
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 1.0, 1)]).unwrap();
        let h: CMat<f64> = otfs_effective_channel(&ch, &c).unwrap();
        let mut rng = Rng::new(3, 0);
        let x = random_grid(&mut rng, 4, 3);
        let y = DdGrid::from_vec(4, 3, h.mul_vec(x.vec())).unwrap();
        let ph = cis::<f64>(-1.0 / 12.0);
        for k in 0..4 {
            for l in 0..3 {
                let expect = ph * x.get((k + 3) % 4, (l + 2) % 3);
                assert!((y.get(k, l) - expect).norm() < 1e-12);
            }
        }
        for r in 0..12 {
            assert_eq!(h.row_nonzeros(r, 1e-12).len(), 1);
        }
    }

    #[test]
    fn rectangular_closed_form_matches_dense() {
        let mut rng = Rng::new(4, 0);
        let c = OtfsConfig::new(6, 5, Pulse::Rectangular).unwrap();
        let m = ChannelModel::Jakes { paths: 3, l_max: 4, k_max: 3.0, integer_doppler: true };
        for _ in 0..20 {
            let ch = generate(&m, &mut rng).unwrap();
            let dense: CMat<f64> = otfs_effective_channel(&ch, &c).unwrap();
            let sparse = sparse_effective_channel(&ch, &c).unwrap();
            assert!(sparse.to_dense().approx_eq(&dense, Tolerance::EXACT));
        }
        // Delays beyond one delay block wrap into the previous time slot.
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), -2.0, 7)]).unwrap();
        let dense: CMat<f64> = otfs_effective_channel(&ch, &c).unwrap();
        assert!(sparse_effective_channel(&ch, &c).unwrap().to_dense().approx_eq(&dense, Tolerance::EXACT));
    }

    #[test]
    fn rectangular_and_biorthogonal_share_support() {
        let m = ChannelModel::fixed(&[(0.0, 0), (-1.0, 1)]);
        let ch = generate(&m, &mut Rng::new(5, 0)).unwrap();
        let rect: CMat<f64> = otfs_effective_channel(&ch, &cfg(Pulse::Rectangular)).unwrap();
        let bi: CMat<f64> = otfs_effective_channel(&ch, &cfg(Pulse::BiOrthogonal)).unwrap();
        for r in 0..12 {
            assert_eq!(rect.row_nonzeros(r, 1e-12), bi.row_nonzeros(r, 1e-12));
            for c in rect.row_nonzeros(r, 1e-12) {
                assert!((rect[(r, c)].norm() - bi[(r, c)].norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fractional_doppler_needs_rectangular() {
        let ch = ChannelRealization::from_paths(vec![DdPath::new(one(), 0.4, 1)]).unwrap();
        assert!(otfs_effective_channel::<f64>(&ch, &cfg(Pulse::BiOrthogonal)).is_err());
        let h: CMat<f64> = otfs_effective_channel(&ch, &cfg(Pulse::Rectangular)).unwrap();
        assert!(h.is_unitary(Tolerance::EXACT));
    }

    #[test]
    fn single_precision_round_trip() {
        let c = cfg(Pulse::Rectangular);
        let x = DdGrid::<f32>::from_fn(4, 3, |k, l| Complex::new(k as f32, l as f32));
        let y = otfs_demodulate(&otfs_modulate(&x, &c).unwrap(), &c).unwrap();
        assert!(y.vec().max_abs_diff(x.vec()) < 1e-5);
    }
}
