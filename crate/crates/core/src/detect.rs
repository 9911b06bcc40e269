//! Maximum-likelihood and message-passing detection on stacked
//! modulation-domain systems `y = H x + w`, where `H` stacks the equivalent
//! channel of every receive antenna.

use crate::error::{Error, Result};
use crate::matrix::{CMat, CVec};
use crate::rng::Rng;
use crate::sparse::SparseMat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alphabet {
    Bpsk,
    /// Gray-mapped QPSK with unit average energy.
    Qam4,
}

impl Alphabet {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Alphabet::Bpsk => 1,
            Alphabet::Qam4 => 2,
        }
    }

    /// Points in bit-label order.
    pub fn points(&self) -> Vec<Complex64> {
        match self {
            Alphabet::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            Alphabet::Qam4 => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                vec![
                    Complex64::new(a, a),
                    Complex64::new(-a, a),
                    Complex64::new(a, -a),
                    Complex64::new(-a, -a),
                ]
            }
        }
    }

    /// Symbol for label `bits` (bit 0 = in-phase sign, bit 1 = quadrature sign).
    pub fn map(&self, bits: usize) -> Complex64 {
        self.points()[bits]
    }

    /// Label of the nearest point.
    pub fn demap(&self, z: Complex64) -> usize {
        match self {
            Alphabet::Bpsk => usize::from(z.re < 0.0),
            Alphabet::Qam4 => usize::from(z.re < 0.0) | (usize::from(z.im < 0.0) << 1),
        }
    }

    pub fn slice(&self, z: Complex64) -> Complex64 {
        self.map(self.demap(z))
    }

    /// Uniformly random symbols, returning `(labels, symbols)`.
    pub fn random_frame(&self, n: usize, rng: &mut Rng) -> (Vec<usize>, CVec<f64>) {
        let labels: Vec<usize> = (0..n)
            .map(|_| (0..self.bits_per_symbol()).fold(0, |acc, b| acc | (usize::from(rng.bit()) << b)))
            .collect();
        let x = CVec::from_fn(n, |i| self.map(labels[i]));
        (labels, x)
    }

    /// Number of differing bits between two labels.
    pub fn bit_errors(&self, a: usize, b: usize) -> u64 {
        (a ^ b).count_ones() as u64
    }
}

/// `y = H x + w` with `w ~ CN(0, n0 I)`; rows grouped by receive antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSystem {
    h: SparseMat,
    y: CVec<f64>,
    n0: f64,
}

impl StackedSystem {
    pub fn new(h: SparseMat, y: CVec<f64>, n0: f64) -> Result<Self> {
        if h.rows() != y.len() {
            return Err(Error::Dimension { expected: h.rows(), found: y.len() });
        }
        if !(n0 >= 0.0) {
            return Err(Error::Domain(format!("noise variance must be non-negative, got {n0}")));
        }
        Ok(StackedSystem { h, y, n0 })
    }

    pub fn from_dense(h: &CMat<f64>, y: CVec<f64>, n0: f64) -> Result<Self> {
        StackedSystem::new(SparseMat::from_dense(h, 0.0), y, n0)
    }

    /// Stacks per-antenna `(H̄_r, y_r)` blocks.
    pub fn stack(blocks: &[(SparseMat, CVec<f64>)], n0: f64) -> Result<Self> {
        let h = SparseMat::vstack(&blocks.iter().map(|b| b.0.clone()).collect::<Vec<_>>())?;
        let y = CVec::from_vec(blocks.iter().flat_map(|b| b.1.iter().copied()).collect());
        StackedSystem::new(h, y, n0)
    }

    pub fn channel(&self) -> &SparseMat {
        &self.h
    }

    pub fn observation(&self) -> &CVec<f64> {
        &self.y
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn num_symbols(&self) -> usize {
        self.h.cols()
    }

    pub fn residual(&self, x: &CVec<f64>) -> f64 {
        (&self.y - &self.h.mul_vec(x)).norm_sqr()
    }
}

/// Largest joint search space accepted by [`ml_detect`].
pub const ML_SEARCH_CAP: u128 = 1 << 14;

/// Exhaustive ML search `argmin_x ‖y − Hx‖²`.
///
/// The problem is rewritten over `±1` variables `z` (BPSK: `x = z`; QAM4:
/// `x = (z_re + j z_im)/√2`) with metric `zᵀGz − 2bᵀz`, and candidates are
/// visited in Gray-code order starting from all `+1` so each step costs `O(n)`.
/// Only half the space is walked: `z` and `−z` share `zᵀGz`, so each step
/// scores both. Ties keep the first candidate visited, `z` before `−z`.
pub fn ml_detect(sys: &StackedSystem, alphabet: Alphabet) -> Result<CVec<f64>> {
    let n = sys.num_symbols();
    let bits = n * alphabet.bits_per_symbol();
    let size = 1u128.checked_shl(bits as u32).unwrap_or(u128::MAX);
    if bits >= 128 || size > ML_SEARCH_CAP {
        return Err(Error::SearchSpace { size, cap: ML_SEARCH_CAP });
    }
    if n == 0 {
        return Ok(CVec::zeros(0));
    }
    // Columns of the real-variable model: B = [H] or a[H, jH].
    let h = sys.h.to_dense();
    let cols: Vec<CVec<f64>> = match alphabet {
        Alphabet::Bpsk => (0..n).map(|c| h.column(c)).collect(),
        Alphabet::Qam4 => {
            let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let j = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
            (0..n).map(|c| h.column(c).scale(a)).chain((0..n).map(|c| h.column(c).scale(j))).collect()
        }
    };
    let dot = |u: &CVec<f64>, v: &CVec<f64>| -> f64 { u.iter().zip(v.iter()).map(|(a, b)| (a.conj() * b).re).sum() };
    let g: Vec<Vec<f64>> = (0..bits).map(|i| (0..bits).map(|k| dot(&cols[i], &cols[k])).collect()).collect();
    let b: Vec<f64> = cols.iter().map(|c| dot(c, &sys.y)).collect();

    // Gray code over the first bits−1 variables with the last one fixed at
    // +1; each visited z also scores −z, whose quadratic term is the same.
    let mut z = vec![1.0f64; bits];
    let mut gz: Vec<f64> = g.iter().map(|row| row.iter().sum()).collect();
    let mut quad: f64 = gz.iter().sum();
    let mut lin: f64 = b.iter().sum();
    let mut best = quad - 2.0 * lin.abs();
    let mut best_z = z.clone();
    let mut best_sign = if lin >= 0.0 { 1.0 } else { -1.0 };
    for i in 1u64..(1u64 << (bits - 1)) {
        let j = i.trailing_zeros() as usize;
        let zj = z[j];
        quad += -4.0 * zj * gz[j] + 4.0 * g[j][j];
        lin -= 2.0 * zj * b[j];
        // G is symmetric, so row j doubles as column j.
        let step = 2.0 * zj;
        for (gk, gjk) in gz.iter_mut().zip(&g[j]) {
            *gk -= step * gjk;
        }
        z[j] = -zj;
        let metric = quad - 2.0 * lin.abs();
        if metric < best {
            best = metric;
            best_z.copy_from_slice(&z);
            best_sign = if lin >= 0.0 { 1.0 } else { -1.0 };
        }
    }
    for v in &mut best_z {
        *v *= best_sign;
    }
    Ok(match alphabet {
        Alphabet::Bpsk => CVec::from_fn(n, |i| Complex64::new(best_z[i], 0.0)),
        Alphabet::Qam4 => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            CVec::from_fn(n, |i| Complex64::new(a * best_z[i], a * best_z[n + i]))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpOptions {
    pub max_iter: usize,
    /// Weight kept on the previous message (0 = undamped).
    pub damping: f64,
    pub tol: f64,
    /// Taps below this fraction of the largest magnitude are dropped.
    pub tap_prune_eps: f64,
}

impl Default for MpOptions {
    fn default() -> Self {
        MpOptions { max_iter: 30, damping: 0.6, tol: 1e-6, tap_prune_eps: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpOutput {
    pub symbols: CVec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Confidence above which a variable counts as decided.
const CONFIDENT: f64 = 0.99;

/// Gaussian-approximation message passing on the factor graph of `H`.
///
/// Each observation treats the interference from its other variables as
/// Gaussian; each variable combines the likelihoods from its other
/// observations into a distribution over the alphabet. The returned decision
/// is the best iterate by fraction of confident variables; `converged` is
/// false when `max_iter` is reached first.
pub fn mp_detect(sys: &StackedSystem, alphabet: Alphabet, opts: &MpOptions) -> Result<MpOutput> {
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::Config(format!("damping must lie in [0, 1), got {}", opts.damping)));
    }
    let h = sys.h.pruned(opts.tap_prune_eps);
    let n = h.cols();
    let rows = h.rows();
    let pts = alphabet.points();
    let q = pts.len();
    let n0 = sys.n0.max(1e-12);
    let energy: Vec<f64> = pts.iter().map(|s| s.norm_sqr()).collect();

    // Edges in row-major order, so each row owns a contiguous range.
    let mut edge_row = Vec::new();
    let mut edge_h = Vec::new();
    let mut row_ptr = Vec::with_capacity(rows + 1);
    let mut col_count = vec![0usize; n + 1];
    let mut edge_col = Vec::new();
    row_ptr.push(0);
    for r in 0..rows {
        for &(c, v) in h.row(r) {
            edge_row.push(r);
            edge_col.push(c);
            edge_h.push(v);
            col_count[c + 1] += 1;
        }
        row_ptr.push(edge_h.len());
    }
    let ne = edge_h.len();
    // Column adjacency in compressed form.
    for c in 0..n {
        col_count[c + 1] += col_count[c];
    }
    let col_ptr = col_count;
    let mut fill = col_ptr.clone();
    let mut col_list = vec![0usize; ne];
    for (e, &c) in edge_col.iter().enumerate() {
        col_list[fill[c]] = e;
        fill[c] += 1;
    }

    let uniform = 1.0 / q as f64;
    let mut p = vec![uniform; ne * q];
    let mut mu = vec![Complex64::new(0.0, 0.0); ne];
    let mut var = vec![0.0; ne];
    let mut loglik = vec![0.0; ne * q];
    let mut total = vec![0.0; q];
    let mut ext = vec![0.0; q];
    let mut decisions = vec![0usize; n];
    let mut best = vec![0usize; n];
    let mut best_score = -1.0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter.max(1) {
        iterations = it + 1;
        // Observation to variable: Gaussian interference statistics. The
        // per-edge contribution is parked in mu/var, then turned into the
        // leave-one-out value in place.
        for r in 0..rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            let mut tot_mu = Complex64::new(0.0, 0.0);
            let mut tot_var = 0.0;
            for e in lo..hi {
                let pe = &p[e * q..(e + 1) * q];
                let mut mean = Complex64::new(0.0, 0.0);
                let mut second = 0.0;
                for a in 0..q {
                    mean += pts[a] * pe[a];
                    second += pe[a] * energy[a];
                }
                let m = edge_h[e] * mean;
                let v = edge_h[e].norm_sqr() * (second - mean.norm_sqr()).max(0.0);
                tot_mu += m;
                tot_var += v;
                mu[e] = m;
                var[e] = v;
            }
            for e in lo..hi {
                mu[e] = tot_mu - mu[e];
                var[e] = (tot_var - var[e]).max(0.0) + n0;
            }
        }
        for e in 0..ne {
            let resid = sys.y[edge_row[e]] - mu[e];
            let inv = 1.0 / var[e];
            for (a, s) in pts.iter().enumerate() {
                loglik[e * q + a] = -(resid - edge_h[e] * s).norm_sqr() * inv;
            }
        }
        // Variable to observation, with damping and leave-one-out sums.
        let mut change: f64 = 0.0;
        let mut confident = 0usize;
        for c in 0..n {
            let edges = &col_list[col_ptr[c]..col_ptr[c + 1]];
            total.fill(0.0);
            for &e in edges {
                for a in 0..q {
                    total[a] += loglik[e * q + a];
                }
            }
            ext.copy_from_slice(&total);
            normalize_in_place(&mut ext);
            let (arg, pmax) = ext.iter().enumerate().fold((0, -1.0), |acc, (a, &v)| if v > acc.1 { (a, v) } else { acc });
            decisions[c] = arg;
            if pmax > CONFIDENT {
                confident += 1;
            }
            for &e in edges {
                for a in 0..q {
                    ext[a] = total[a] - loglik[e * q + a];
                }
                normalize_in_place(&mut ext);
                for a in 0..q {
                    let old = p[e * q + a];
                    let new = opts.damping * old + (1.0 - opts.damping) * ext[a];
                    change = change.max((new - old).abs());
                    p[e * q + a] = new;
                }
            }
        }
        let score = if n == 0 { 1.0 } else { confident as f64 / n as f64 };
        if score > best_score {
            best_score = score;
            best.copy_from_slice(&decisions);
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(MpOutput { symbols: CVec::from_fn(n, |c| pts[best[c]]), converged, iterations })
}

fn normalize_in_place(logp: &mut [f64]) {
    let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in logp.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in logp.iter_mut() {
        *v /= s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afdm::{sparse_effective_channel, AfdmConfig};
    use crate::channel::{generate, ChannelModel};

    fn random_dense(rng: &mut Rng, rows: usize, cols: usize) -> CMat<f64> {
        CMat::from_fn(rows, cols, |_, _| rng.complex_normal(1.0))
    }

    fn noisy(h: &CMat<f64>, x: &CVec<f64>, n0: f64, rng: &mut Rng) -> CVec<f64> {
        let y = h.mul_vec(x);
        CVec::from_fn(y.len(), |i| y[i] + rng.complex_normal(n0))
    }

    /// Independent exhaustive search over the alphabet directly.
    fn brute_force(h: &CMat<f64>, y: &CVec<f64>, alphabet: Alphabet) -> CVec<f64> {
        let pts = alphabet.points();
        let n = h.cols();
        let total = pts.len().pow(n as u32);
        let mut best = (f64::INFINITY, CVec::zeros(n));
        for idx in 0..total {
            let mut rem = idx;
            let x = CVec::from_fn(n, |_| {
                let s = pts[rem % pts.len()];
                rem /= pts.len();
                s
            });
            let r = (y - &h.mul_vec(&x)).norm_sqr();
            if r < best.0 {
                best = (r, x);
            }
        }
        best.1
    }

    #[test]
    fn alphabets_have_unit_energy() {
        for a in [Alphabet::Bpsk, Alphabet::Qam4] {
            let pts = a.points();
            let e: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((e - 1.0).abs() < 1e-15);
            for (label, p) in pts.iter().enumerate() {
                assert_eq!(a.demap(*p), label);
            }
        }
        assert_eq!(Alphabet::Qam4.bit_errors(0, 3), 2);
    }

    #[test]
    fn ml_noiseless_recovery() {
        let mut rng = Rng::new(1, 0);
        for alphabet in [Alphabet::Bpsk, Alphabet::Qam4] {
            let n = if alphabet == Alphabet::Bpsk { 10 } else { 5 };
            let h = random_dense(&mut rng, n + 2, n);
            let (_, x) = alphabet.random_frame(n, &mut rng);
            let sys = StackedSystem::from_dense(&h, h.mul_vec(&x), 0.0).unwrap();
            assert!(ml_detect(&sys, alphabet).unwrap().max_abs_diff(&x) < 1e-12);
        }
    }

    #[test]
    fn ml_identity_slicing() {
        let mut rng = Rng::new(2, 0);
        let h = CMat::identity(8);
        let (_, x) = Alphabet::Qam4.random_frame(7, &mut rng);
        let h = h.select_columns(&(0..7).collect::<Vec<_>>());
        let mut y = h.mul_vec(&x);
        for i in 0..7 {
            y[i] += Complex64::new(0.2, -0.2);
        }
        let sys = StackedSystem::from_dense(&h, y, 0.1).unwrap();
        assert!(ml_detect(&sys, Alphabet::Qam4).unwrap().max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn ml_matches_brute_force() {
        let mut rng = Rng::new(3, 0);
        for trial in 0..30 {
            let alphabet = if trial % 2 == 0 { Alphabet::Bpsk } else { Alphabet::Qam4 };
            let n = if alphabet == Alphabet::Bpsk { 8 } else { 4 };
            let h = random_dense(&mut rng, n, n);
            let (_, x) = alphabet.random_frame(n, &mut rng);
            let y = noisy(&h, &x, 1.0, &mut rng);
            let sys = StackedSystem::from_dense(&h, y.clone(), 1.0).unwrap();
            let got = ml_detect(&sys, alphabet).unwrap();
            let want = brute_force(&h, &y, alphabet);
            assert!((sys.residual(&got) - sys.residual(&want)).abs() < 1e-9);
        }
    }

    #[test]
    fn ml_rejects_large_search() {
        let h = CMat::identity(15);
        let sys = StackedSystem::from_dense(&h, CVec::zeros(15), 1.0).unwrap();
        assert!(matches!(ml_detect(&sys, Alphabet::Bpsk), Err(Error::SearchSpace { .. })));
        let h = CMat::identity(14);
        let sys = StackedSystem::from_dense(&h, CVec::zeros(14), 1.0).unwrap();
        assert!(ml_detect(&sys, Alphabet::Bpsk).is_ok());
    }

    #[test]
    fn ml_global_phase_invariance() {
        let mut rng = Rng::new(4, 0);
        let h = random_dense(&mut rng, 6, 6);
        let (_, x) = Alphabet::Bpsk.random_frame(6, &mut rng);
        let y = noisy(&h, &x, 2.0, &mut rng);
        let ph = Complex64::from_polar(1.0, 0.7);
        let a = ml_detect(&StackedSystem::from_dense(&h, y.clone(), 2.0).unwrap(), Alphabet::Bpsk).unwrap();
        let b = ml_detect(&StackedSystem::from_dense(&h.scale(ph), y.scale(ph), 2.0).unwrap(), Alphabet::Bpsk).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_block_stack_is_unchanged() {
        let mut rng = Rng::new(5, 0);
        let h = random_dense(&mut rng, 6, 6);
        let y = CVec::from_fn(6, |_| rng.complex_normal(1.0));
        let direct = StackedSystem::from_dense(&h, y.clone(), 0.5).unwrap();
        let stacked = StackedSystem::stack(&[(SparseMat::from_dense(&h, 0.0), y)], 0.5).unwrap();
        assert_eq!(direct, stacked);
        assert_eq!(ml_detect(&direct, Alphabet::Bpsk).unwrap(), ml_detect(&stacked, Alphabet::Bpsk).unwrap());
    }

    #[test]
    fn mp_diagonal_is_slicing() {
        let mut rng = Rng::new(6, 0);
        let n = 16;
        let d: Vec<Complex64> = (0..n).map(|_| rng.complex_normal(1.0)).collect();
        let h = CMat::from_diag(&d);
        for alphabet in [Alphabet::Bpsk, Alphabet::Qam4] {
            let (_, x) = alphabet.random_frame(n, &mut rng);
            let y = noisy(&h, &x, 0.5, &mut rng);
            let out = mp_detect(&StackedSystem::from_dense(&h, y.clone(), 0.5).unwrap(), alphabet, &MpOptions::default())
                .unwrap();
            for i in 0..n {
                assert_eq!(out.symbols[i], alphabet.slice(y[i] / d[i]));
            }
        }
    }

    #[test]
    fn mp_agrees_with_ml_on_small_afdm() {
        let mut rng = Rng::new(7, 0);
        let cfg = AfdmConfig::new(12, 3, 0.0).unwrap();
        let model = ChannelModel::fixed(&[(0.0, 0), (-1.0, 1)]);
        let n0 = 10f64.powf(-1.4);
        let (mut agree, mut total) = (0usize, 0usize);
        for _ in 0..300 {
            let ch = generate(&model, &mut rng).unwrap();
            let h = sparse_effective_channel(&ch, &cfg).unwrap();
            let (_, x) = Alphabet::Bpsk.random_frame(12, &mut rng);
            let hx = h.mul_vec(&x);
            let y = CVec::from_fn(12, |i| hx[i] + rng.complex_normal(n0));
            let sys = StackedSystem::new(h, y, n0).unwrap();
            let ml = ml_detect(&sys, Alphabet::Bpsk).unwrap();
            let mp = mp_detect(&sys, Alphabet::Bpsk, &MpOptions::default()).unwrap();
            agree += (0..12).filter(|&i| ml[i] == mp.symbols[i]).count();
            total += 12;
        }
        assert!(agree as f64 / total as f64 >= 0.99, "agreement {agree}/{total}");
    }

    #[test]
    fn damping_validated() {
        let sys = StackedSystem::from_dense(&CMat::identity(2), CVec::zeros(2), 1.0).unwrap();
        let opts = MpOptions { damping: 1.0, ..MpOptions::default() };
        assert!(mp_detect(&sys, Alphabet::Bpsk, &opts).is_err());
    }
}
