//! Affine frequency division multiplexing.
//!
//! The DAFT is `A = Λ_{c2} F Λ_{c1}` with `Λ_c = diag(e^{-j2πcq²})`. Only the
//! regime where `2N·c1` is an integer and `N` is even is supported; there the
//! chirp-periodic prefix is an ordinary cyclic prefix and the channel acts as a
//! cyclic convolution.

use crate::channel::{propagate, ChannelRealization};
use crate::error::{Error, Result};
use crate::matrix::{CMat, CVec};
use crate::scalar::{cis, ratio_turns, wrap, Real};
use crate::sparse::SparseMat;
use num_complex::{Complex, Complex64};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfdmConfig {
    /// Number of chirp subcarriers; must be even.
    pub n: usize,
    /// `2N·c1`, so that `c1 = c1_num / (2N)`.
    pub c1_num: i64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub k_max: i64,
    #[serde(default)]
    pub k_space: i64,
    #[serde(default)]
    pub l_max: usize,
}

impl AfdmConfig {
    /// A configuration with explicit chirp parameters and no channel extents.
    pub fn new(n: usize, c1_num: i64, c2: f64) -> Result<Self> {
        let cfg = AfdmConfig { n, c1_num, c2, k_max: 0, k_space: 0, l_max: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `c1 = (2(k_max + k_space) + 1) / (2N)` and `c2 = 0`.
    pub fn optimal(n: usize, k_max: i64, k_space: i64, l_max: usize) -> Result<Self> {
        let c1 = optimal_c1(k_max, k_space, n)?;
        let cfg = AfdmConfig { n, c1_num: c1.numerator, c2: 0.0, k_max, k_space, l_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_c2(mut self, c2: f64) -> Self {
        self.c2 = c2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::Domain(format!("AFDM needs an even, positive N (got {})", self.n)));
        }
        if self.k_max < 0 || self.k_space < 0 {
            return Err(Error::Domain("k_max and k_space must be non-negative".into()));
        }
        if !self.c2.is_finite() {
            return Err(Error::Domain("c2 must be finite".into()));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        self.c1_num as f64 / (2 * self.n) as f64
    }

    /// `N ≥ (l_max + 1)(2(k_max + k_space) + 1)`.
    pub fn frame_condition_holds(&self) -> bool {
        frame_condition(self.n, self.k_max, self.k_space, self.l_max)
    }
}

fn frame_condition(n: usize, k_max: i64, k_space: i64, l_max: usize) -> bool {
    (l_max as i64 + 1) * (2 * (k_max + k_space) + 1) <= n as i64
}

/// `c1 = numerator / denominator`, unreduced, with `denominator = 2N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimalC1 {
    pub numerator: i64,
    pub denominator: i64,
    /// Whether the frame is long enough for all paths to stay separable.
    pub frame_condition: bool,
}

impl OptimalC1 {
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn reduced(&self) -> (i64, i64) {
        let g = gcd(self.numerator, self.denominator);
        (self.numerator / g, self.denominator / g)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Chirp rate giving each delay tap its own block of `2(k_max+k_space)+1`
/// DAFT bins. The frame condition is checked with `l_max = 0`; use
/// [`AfdmConfig::frame_condition_holds`] for a specific delay spread.
pub fn optimal_c1(k_max: i64, k_space: i64, n: usize) -> Result<OptimalC1> {
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    if k_max < 0 || k_space < 0 {
        return Err(Error::Domain("k_max and k_space must be non-negative".into()));
    }
    Ok(OptimalC1 {
        numerator: 2 * (k_max + k_space) + 1,
        denominator: 2 * n as i64,
        frame_condition: frame_condition(n, k_max, k_space, 0),
    })
}

/// `ind = (2N·c1·l − k) mod N`.
pub fn index_indicator(l: i64, k: i64, cfg: &AfdmConfig) -> usize {
    wrap(cfg.c1_num * l - k, cfg.n)
}

/// Chirp phase `e^{-j2π c q²}` of `Λ_{c1}` at index `q`.
fn chirp1<T: Real>(cfg: &AfdmConfig, q: usize) -> Complex<T> {
    let q = q as i64;
    cis(-ratio_turns(cfg.c1_num, q * q, 2 * cfg.n as i64))
}

fn chirp2<T: Real>(cfg: &AfdmConfig, q: usize) -> Complex<T> {
    let q2 = (q * q) as f64;
    cis(-(cfg.c2 * q2))
}

/// Fast DAFT: chirp, FFT, chirp.
pub struct Daft<T: Real> {
    cfg: AfdmConfig,
    c1: Vec<Complex<T>>,
    c2: Vec<Complex<T>>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> Daft<T> {
    pub fn new(cfg: &AfdmConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n;
        let mut planner = FftPlanner::new();
        Ok(Daft {
            cfg: *cfg,
            c1: (0..n).map(|q| chirp1(cfg, q)).collect(),
            c2: (0..n).map(|q| chirp2(cfg, q)).collect(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            scale: T::from_f64_lossy(1.0 / (n as f64).sqrt()),
        })
    }

    pub fn config(&self) -> &AfdmConfig {
        &self.cfg
    }

    fn check(&self, v: &CVec<T>) -> Result<()> {
        if v.len() != self.cfg.n {
            return Err(Error::Dimension { expected: self.cfg.n, found: v.len() });
        }
        Ok(())
    }

    /// `y = A d`.
    pub fn forward(&self, d: &CVec<T>) -> Result<CVec<T>> {
        self.check(d)?;
        let mut buf: Vec<Complex<T>> = d.iter().zip(&self.c1).map(|(a, b)| *a * *b).collect();
        self.fwd.process(&mut buf);
        Ok(CVec::from_vec(buf.iter().zip(&self.c2).map(|(a, b)| *a * *b * self.scale).collect()))
    }

    /// `s = Aᴴ x`.
    pub fn inverse(&self, x: &CVec<T>) -> Result<CVec<T>> {
        self.check(x)?;
        let mut buf: Vec<Complex<T>> = x.iter().zip(&self.c2).map(|(a, b)| *a * b.conj()).collect();
        self.inv.process(&mut buf);
        Ok(CVec::from_vec(buf.iter().zip(&self.c1).map(|(a, b)| *a * b.conj() * self.scale).collect()))
    }
}

/// Dense DAFT matrix `A = Λ_{c2} F Λ_{c1}`.
pub fn daft_matrix<T: Real>(cfg: &AfdmConfig) -> Result<CMat<T>> {
    cfg.validate()?;
    let n = cfg.n as i64;
    let scale = T::from_f64_lossy(1.0 / (n as f64).sqrt());
    Ok(CMat::from_fn(cfg.n, cfg.n, |m, q| {
        let (m, q) = (m as i64, q as i64);
        // mn/N + c1 n² share the denominator 2N.
        let turns = ratio_turns(1, 2 * m * q + cfg.c1_num * q * q, 2 * n);
        chirp2::<T>(cfg, m as usize) * cis::<T>(-turns) * scale
    }))
}

/// `s = Aᴴ x`.
pub fn afdm_modulate<T: Real>(x: &CVec<T>, cfg: &AfdmConfig) -> Result<CVec<T>> {
    Daft::new(cfg)?.inverse(x)
}

/// `y = A d`.
pub fn afdm_demodulate<T: Real>(d: &CVec<T>, cfg: &AfdmConfig) -> Result<CVec<T>> {
    Daft::new(cfg)?.forward(d)
}

/// DAFT-domain channel with, for integer-Doppler paths, each path's index
/// indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct DaftDomainChannel<T: Real> {
    pub matrix: CMat<T>,
    /// `Some(ind_i)` for integer-Doppler paths, `None` for fractional ones.
    pub indicators: Vec<Option<usize>>,
}

/// `H_AFDM = A H̃ Aᴴ`, built column by column through the fast transform.
/// Exact for fractional Doppler.
pub fn afdm_effective_channel<T: Real>(ch: &ChannelRealization, cfg: &AfdmConfig) -> Result<DaftDomainChannel<T>> {
    let daft = Daft::<T>::new(cfg)?;
    let n = cfg.n;
    let mut m = CMat::zeros(n, n);
    for c in 0..n {
        let s = daft.inverse(&CVec::basis(n, c))?;
        let y = daft.forward(&propagate(&s, ch)?)?;
        for r in 0..n {
            m[(r, c)] = y[r];
        }
    }
    let indicators = ch
        .paths()
        .iter()
        .map(|p| p.integer_doppler().map(|k| index_indicator(p.delay as i64, k, cfg)))
        .collect();
    Ok(DaftDomainChannel { matrix: m, indicators })
}

/// Closed-form DAFT-domain response of one integer path `h Δ^k Π^l`:
/// row `m` has a single entry at `m' = (m + ind)_N` with phase
/// `e^{j(2π/N)(N c1 l² − m' l + N c2 (m'² − m²))}`.
pub fn path_response(cfg: &AfdmConfig, gain: Complex64, k: i64, l: i64) -> SparseMat {
    let n = cfg.n;
    let ind = index_indicator(l, k, cfg);
    let mut s = SparseMat::zeros(n, n);
    for m in 0..n {
        let mp = (m + ind) % n;
        let (mi, mpi) = (m as i64, mp as i64);
        let exact = ratio_turns(1, cfg.c1_num * l * l - 2 * mpi * l, 2 * n as i64);
        let chirp = cfg.c2 * ((mpi * mpi - mi * mi) as f64);
        s.push(m, mp, gain * cis::<f64>(exact + chirp));
    }
    s
}

/// Sum of [`path_response`] over the paths of an integer-grid channel.
pub fn sparse_effective_channel(ch: &ChannelRealization, cfg: &AfdmConfig) -> Result<SparseMat> {
    let mut h = SparseMat::zeros(cfg.n, cfg.n);
    for p in ch.paths() {
        let k = p
            .integer_doppler()
            .ok_or_else(|| Error::Channel("closed-form DAFT response needs integer Doppler".into()))?;
        h.add_assign(&path_response(cfg, p.gain, k, p.delay as i64))?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, generate, time_channel_matrix, ChannelModel, DdPath};
    use crate::matrix::{dft_matrix, Tolerance};
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn cfg12() -> AfdmConfig {
        AfdmConfig::new(12, 3, 0.0).unwrap()
    }

    fn random_vec(rng: &mut Rng, n: usize) -> CVec<f64> {
        CVec::from_fn(n, |_| rng.complex_normal(1.0))
    }

    #[test]
    fn chirpless_daft_is_dft() {
        let cfg = AfdmConfig::new(8, 0, 0.0).unwrap();
        let a: CMat<f64> = daft_matrix(&cfg).unwrap();
        assert!(a.approx_eq(&dft_matrix(8).unwrap(), Tolerance::EXACT));
    }

    #[test]
    fn daft_unitary_and_row_zero() {
        let cfg = cfg12();
        let a: CMat<f64> = daft_matrix(&cfg).unwrap();
        assert!(a.is_unitary(Tolerance::new(1e-12).unwrap()));
        for q in 0..12 {
            let expect = cis::<f64>(-((q * q) as f64) / 8.0) / 12f64.sqrt();
            assert!((a[(0, q)] - expect).norm() < 1e-12);
        }
        let a32: CMat<f32> = daft_matrix(&cfg).unwrap();
        assert!(a32.is_unitary(Tolerance::new(1e-5).unwrap()));
    }

    #[test]
    fn fast_transform_matches_matrix() {
        let mut rng = Rng::new(3, 0);
        for cfg in [cfg12(), AfdmConfig::new(16, 5, 0.013).unwrap(), AfdmConfig::new(2, 1, 0.0).unwrap()] {
            let a: CMat<f64> = daft_matrix(&cfg).unwrap();
            let x = random_vec(&mut rng, cfg.n);
            assert!(afdm_demodulate(&x, &cfg).unwrap().approx_eq(&a.mul_vec(&x), Tolerance::EXACT));
            assert!(afdm_modulate(&x, &cfg).unwrap().approx_eq(&a.adjoint().mul_vec(&x), Tolerance::EXACT));
        }
    }

    #[test]
    fn modulate_unit_vector() {
        let cfg = AfdmConfig::new(12, 0, 0.0).unwrap();
        let s = afdm_modulate(&CVec::<f64>::basis(12, 0), &cfg).unwrap();
        assert!(s.iter().all(|v| (v - Complex64::new(1.0 / 12f64.sqrt(), 0.0)).norm() < 1e-12));

        let cfg = AfdmConfig::new(12, 3, 0.02).unwrap();
        for m in [0usize, 1, 7] {
            let s = afdm_modulate(&CVec::<f64>::basis(12, m), &cfg).unwrap();
            for n in 0..12 {
                let turns = cfg.c2 * (m * m) as f64 + (m * n) as f64 / 12.0 + cfg.c1() * (n * n) as f64;
                assert!((s[n] - cis::<f64>(turns) / 12f64.sqrt()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_and_norm() {
        let cfg = cfg12();
        let mut rng = Rng::new(4, 0);
        let x = random_vec(&mut rng, 12);
        let s = afdm_modulate(&x, &cfg).unwrap();
        assert!((s.norm() - x.norm()).abs() < 1e-12);
        assert!(afdm_demodulate(&s, &cfg).unwrap().approx_eq(&x, Tolerance::new(1e-12).unwrap()));
    }

    #[test]
    fn odd_frame_rejected() {
        assert!(AfdmConfig::new(7, 1, 0.0).is_err());
        assert!(afdm_modulate(&CVec::<f64>::zeros(4), &cfg12()).is_err());
    }

    #[test]
    fn optimal_c1_examples() {
        let c = optimal_c1(1, 0, 12).unwrap();
        assert_eq!((c.numerator, c.denominator), (3, 24));
        assert_eq!(c.reduced(), (1, 8));
        assert_eq!(optimal_c1(3, 0, 1024).unwrap().reduced(), (7, 2048));
        assert_eq!(optimal_c1(0, 0, 2).unwrap().reduced(), (1, 4));
        let cfg = AfdmConfig::optimal(12, 1, 0, 1).unwrap();
        assert!(cfg.frame_condition_holds());
        assert!(!AfdmConfig::optimal(12, 1, 1, 2).unwrap().frame_condition_holds());
    }

    #[test]
    fn index_indicator_examples() {
        let cfg = cfg12();
        assert_eq!(index_indicator(0, 0, &cfg), 0);
        assert_eq!(index_indicator(1, -1, &cfg), 4);
        assert_eq!(index_indicator(2, 1, &cfg), 5);
    }

    #[test]
    fn identity_channel_is_identity() {
        let ch = ChannelRealization::from_paths(vec![DdPath::new(Complex64::new(1.0, 0.0), 0.0, 0)]).unwrap();
        let h = afdm_effective_channel::<f64>(&ch, &cfg12()).unwrap();
        assert!(h.matrix.approx_eq(&CMat::identity(12), Tolerance::EXACT));
    }

    #[test]
    fn pure_doppler_is_phased_permutation() {
        let cfg = cfg12();
        let ch = ChannelRealization::from_paths(vec![DdPath::new(Complex64::new(1.0, 0.0), 2.0, 0)]).unwrap();
        let h = afdm_effective_channel::<f64>(&ch, &cfg).unwrap();
        assert_eq!(h.indicators, vec![Some(10)]);
        for m in 0..12 {
            let nz = h.matrix.row_nonzeros(m, 1e-9);
            assert_eq!(nz, vec![(m + 10) % 12]);
            assert!((h.matrix[(m, nz[0])].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_path_sparsity() {
        let cfg = cfg12();
        let m = ChannelModel::fixed(&[(0.0, 0), (-1.0, 1)]);
        let ch = generate(&m, &mut Rng::new(5, 0)).unwrap();
        let h = afdm_effective_channel::<f64>(&ch, &cfg).unwrap();
        let inds: Vec<usize> = h.indicators.iter().map(|i| i.unwrap()).collect();
        assert_eq!(inds, vec![0, 4]);
        for r in 0..12 {
            let mut expect: Vec<usize> = inds.iter().map(|i| (r + i) % 12).collect();
            expect.sort();
            assert_eq!(h.matrix.row_nonzeros(r, 1e-9), expect);
        }
    }

    #[test]
    fn dense_matches_matrix_product() {
        let cfg = AfdmConfig::new(16, 5, 0.0).unwrap();
        let mut rng = Rng::new(6, 0);
        let m = ChannelModel::Jakes { paths: 3, l_max: 3, k_max: 2.0, integer_doppler: false };
        let ch = generate(&m, &mut rng).unwrap();
        let a: CMat<f64> = daft_matrix(&cfg).unwrap();
        let ht: CMat<f64> = time_channel_matrix(&ch, 16).unwrap();
        let oracle = a.matmul(&ht).matmul(&a.adjoint());
        let h = afdm_effective_channel::<f64>(&ch, &cfg).unwrap();
        assert!(h.matrix.approx_eq(&oracle, Tolerance::CHAINED));
        assert!(h.indicators.iter().all(|i| i.is_none()));
    }

    #[test]
    fn separable_indicators_under_optimal_c1() {
        let mut rng = Rng::new(7, 0);
        for _ in 0..200 {
            let l_max = 3;
            let k_max = 2;
            let cfg = AfdmConfig::optimal(40, k_max, 0, l_max).unwrap();
            assert!(cfg.frame_condition_holds());
            let m = ChannelModel::Jakes { paths: 4, l_max, k_max: k_max as f64, integer_doppler: true };
            let ch = generate(&m, &mut rng).unwrap();
            let mut inds: Vec<usize> = ch
                .paths()
                .iter()
                .map(|p| index_indicator(p.delay as i64, p.doppler as i64, &cfg))
                .collect();
            inds.sort();
            inds.dedup();
            assert_eq!(inds.len(), 4);
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_transmission(seed in 0u64..1000, c1_num in 0i64..6, c2_milli in 0i64..40) {
            let cfg = AfdmConfig::new(12, c1_num, c2_milli as f64 / 1000.0).unwrap();
            let mut rng = Rng::new(seed, 1);
            let m = ChannelModel::Jakes { paths: 3, l_max: 4, k_max: 3.0, integer_doppler: true };
            let ch = generate(&m, &mut rng).unwrap();
            let x = random_vec(&mut rng, 12);
            let s = afdm_modulate(&x, &cfg).unwrap();
            let y = afdm_demodulate(&apply_channel(&s, &ch, 0.0, &mut rng).unwrap(), &cfg).unwrap();
            let closed = sparse_effective_channel(&ch, &cfg).unwrap().mul_vec(&x);
            prop_assert!(y.max_abs_diff(&closed) < 1e-9);
        }

        #[test]
        fn demodulation_preserves_norm(seed in 0u64..1000) {
            let mut rng = Rng::new(seed, 2);
            let d = random_vec(&mut rng, 12);
            let y = afdm_demodulate(&d, &cfg12()).unwrap();
            prop_assert!((y.norm() - d.norm()).abs() < 1e-12);
        }
    }
}
