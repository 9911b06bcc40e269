//! Rank-criterion diversity analysis of the equivalent single-antenna system
//! `y = Φ(x) h + w`, where column `(t, i)` of `Φ(x)` is `H̄_i^{[t]} x`.
//!
//! Because `Φ` is linear, `Φ(x) − Φ(x̂) = Φ(x − x̂)`, so the minimum rank over
//! codeword pairs is found by enumerating nonzero difference vectors.

use crate::cdds::{modulation_domain_precoder, CddsPlan, DdProfile, PrecoderKind};
use crate::detect::Alphabet;
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::matrix::{CMat, CVec};
use crate::rng::Rng;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-8;

/// Largest difference-vector enumeration accepted by [`min_rank_over_pairs`].
pub const DIFF_ENUM_CAP: u128 = 59_049;

/// Unit-gain subchannels `H̄_i^{[t]}`, stored t-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentSiso {
    n: usize,
    n_t: usize,
    p: usize,
    subchannels: Vec<CMat<f64>>,
}

impl EquivalentSiso {
    pub fn new(n: usize, n_t: usize, p: usize, subchannels: Vec<CMat<f64>>) -> Result<Self> {
        if subchannels.len() != n_t * p {
            return Err(Error::Dimension { expected: n_t * p, found: subchannels.len() });
        }
        if let Some(bad) = subchannels.iter().find(|m| m.rows() != n || m.cols() != n) {
            return Err(Error::Dimension { expected: n, found: bad.rows().max(bad.cols()) });
        }
        Ok(EquivalentSiso { n, n_t, p, subchannels })
    }

    /// Subchannels `H_i · C_t` of a profile precoded with `plan`, each path at
    /// unit gain, built exactly in the modulation domain.
    pub fn from_plan(frame: &FrameConfig, profile: &DdProfile, plan: &CddsPlan, kind: PrecoderKind) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        let mut subs = Vec::with_capacity(plan.n_t() * profile.len());
        for step in plan.steps() {
            let c = modulation_domain_precoder(kind, *step, frame)?;
            for &(k, l) in profile.paths() {
                subs.push(frame.path_response(one, k, l).matmul(&c)?.to_dense());
            }
        }
        EquivalentSiso::new(frame.size(), plan.n_t(), profile.len(), subs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `H̄_i^{[t]}` at flat index `t·P + i`.
    pub fn subchannels(&self) -> &[CMat<f64>] {
        &self.subchannels
    }

    /// `H̄_i^{[t]}` multiplied by per-column phases `e^{jφ}`.
    pub fn with_phases(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.subchannels.len() {
            return Err(Error::Dimension { expected: self.subchannels.len(), found: phases.len() });
        }
        let subs = self
            .subchannels
            .iter()
            .zip(phases)
            .map(|(m, ph)| m.scale(Complex64::from_polar(1.0, *ph)))
            .collect();
        EquivalentSiso::new(self.n, self.n_t, self.p, subs)
    }
}

/// `Φ(x)`: `N × (N_t·P)` with column `t·P + i` equal to `H̄_i^{[t]} x`.
pub fn build_phi(x: &CVec<f64>, sys: &EquivalentSiso) -> Result<CMat<f64>> {
    if x.len() != sys.n {
        return Err(Error::Dimension { expected: sys.n, found: x.len() });
    }
    let cols: Vec<CVec<f64>> = sys.subchannels.iter().map(|m| m.mul_vec(x)).collect();
    Ok(CMat::from_fn(sys.n, cols.len(), |r, c| cols[c][r]))
}

/// Singular values in decreasing order.
pub fn singular_values(m: &CMat<f64>) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    let a = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `RANK_RTOL · σ_max`.
pub fn numerical_rank(m: &CMat<f64>) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|v| **v > RANK_RTOL * top).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub theta_min: usize,
    /// Difference vector `x − x̂` attaining `theta_min` (first in enumeration order).
    pub argmin_pair: Vec<Complex64>,
    pub pairs_checked: u64,
}

/// Differences between alphabet points, excluding zero; `0` is prepended so
/// digit 0 always means "no difference".
fn difference_set(alphabet: Alphabet) -> Vec<Complex64> {
    let pts = alphabet.points();
    let mut d = vec![Complex64::new(0.0, 0.0)];
    for a in &pts {
        for b in &pts {
            let v = a - b;
            if v.norm() > 1e-12 && !d.iter().any(|u| (u - v).norm() < 1e-12) {
                d.push(v);
            }
        }
    }
    d
}

fn diff_vector(mut idx: u64, digits: &[Complex64], n: usize) -> CVec<f64> {
    let q = digits.len() as u64;
    CVec::from_fn(n, |_| {
        let d = digits[(idx % q) as usize];
        idx /= q;
        d
    })
}

/// `θ_min = min_{e ≠ 0} rank Φ(e)` over all difference vectors of the
/// alphabet (`{0, ±2}^N` for BPSK). Enumeration runs in parallel; ties go
/// to the lowest enumeration index, so the report does not depend on
/// scheduling.
pub fn min_rank_over_pairs(sys: &EquivalentSiso, alphabet: Alphabet) -> Result<DiversityReport> {
    let digits = difference_set(alphabet);
    let size = (digits.len() as u128).checked_pow(sys.n as u32).unwrap_or(u128::MAX).saturating_sub(1);
    if size > DIFF_ENUM_CAP {
        return Err(Error::SearchSpace { size, cap: DIFF_ENUM_CAP });
    }
    let (rank, idx) = (1..=size as u64)
        .into_par_iter()
        .map(|idx| {
            let phi = build_phi(&diff_vector(idx, &digits, sys.n), sys).expect("dimensions checked");
            (numerical_rank(&phi), idx)
        })
        .min()
        .ok_or_else(|| Error::Domain("empty difference set".into()))?;
    Ok(DiversityReport { theta_min: rank, argmin_pair: diff_vector(idx, &digits, sys.n).into_vec(), pairs_checked: size as u64 })
}

/// Minimum rank over `samples` random codeword pairs (for alphabets too large
/// to enumerate). Pairs with `x = x̂` are redrawn.
pub fn sampled_min_rank(sys: &EquivalentSiso, alphabet: Alphabet, samples: u64, rng: &mut Rng) -> Result<DiversityReport> {
    let mut best: Option<(usize, CVec<f64>)> = None;
    for _ in 0..samples {
        let e = loop {
            let (_, a) = alphabet.random_frame(sys.n, rng);
            let (_, b) = alphabet.random_frame(sys.n, rng);
            let e = &a - &b;
            if e.norm_sqr() > 0.0 {
                break e;
            }
        };
        let r = numerical_rank(&build_phi(&e, sys)?);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, e));
        }
    }
    let (theta_min, e) = best.ok_or_else(|| Error::Domain("no samples requested".into()))?;
    Ok(DiversityReport { theta_min, argmin_pair: e.into_vec(), pairs_checked: samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PepRegime {
    Finite,
    HighSnr,
}

/// Upper bound on the pairwise error probability given the singular values of
/// the difference matrix, with gains `CN(0, 1/(N_t·P))`.
///
/// `Finite`: `(1/12)Π 1/(1+λ²/(4n0·N_tP)) + (1/4)Π 1/(1+λ²/(3n0·N_tP))`.
/// `HighSnr`: `(Π λ²/(N_tP))⁻¹ · (4^θ + 3^{θ+1})/12 · n0^θ` over the θ nonzero λ.
pub fn pep_bound(singular_values: &[f64], n0: f64, n_t: usize, p: usize, regime: PepRegime) -> Result<f64> {
    if !(n0 > 0.0) {
        return Err(Error::Domain(format!("n0 must be positive, got {n0}")));
    }
    if singular_values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain("singular values must be non-negative".into()));
    }
    let ntp = (n_t * p) as f64;
    Ok(match regime {
        PepRegime::Finite => {
            let prod = |c: f64| singular_values.iter().map(|l| 1.0 / (1.0 + l * l / (c * n0 * ntp))).product::<f64>();
            prod(4.0) / 12.0 + prod(3.0) / 4.0
        }
        PepRegime::HighSnr => {
            let top = singular_values.iter().copied().fold(0.0, f64::max);
            let nz: Vec<f64> = singular_values.iter().copied().filter(|l| *l > RANK_RTOL * top && *l > 0.0).collect();
            let theta = nz.len() as i32;
            let coding: f64 = nz.iter().map(|l| l * l / ntp).product();
            (4f64.powi(theta) + 3f64.powi(theta + 1)) / 12.0 * n0.powi(theta) / coding
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afdm::AfdmConfig;
    use crate::cdds::{check_non_overlap, CddsStep};
    use crate::otfs::{OtfsConfig, Pulse};
    use nalgebra::SymmetricEigen;

    fn va_profile() -> DdProfile {
        DdProfile::new(vec![(0, 0), (-1, 1)]).unwrap()
    }

    fn afdm8() -> FrameConfig {
        let c2 = 1.0 / (16.0 * std::f64::consts::PI);
        FrameConfig::Afdm(AfdmConfig::optimal(8, 1, 0, 1).unwrap().with_c2(c2))
    }

    fn plan(k: i64, l: i64) -> CddsPlan {
        CddsPlan::new(vec![CddsStep::ZERO, CddsStep::new(k, l)]).unwrap()
    }

    #[test]
    fn phi_examples() {
        let sys = EquivalentSiso::new(4, 1, 1, vec![CMat::identity(4)]).unwrap();
        let x = CVec::from_fn(4, |i| Complex64::new(i as f64, 1.0));
        let phi = build_phi(&x, &sys).unwrap();
        assert_eq!(phi.column(0), x);
        let zero = build_phi(&CVec::zeros(4), &sys).unwrap();
        assert_eq!(zero, CMat::zeros(4, 1));
    }

    #[test]
    fn phi_is_linear() {
        let sys = EquivalentSiso::from_plan(&afdm8(), &va_profile(), &plan(1, 0), PrecoderKind::MdCddsAfdm).unwrap();
        let mut rng = Rng::new(3, 0);
        let (_, a) = Alphabet::Qam4.random_frame(8, &mut rng);
        let (_, b) = Alphabet::Qam4.random_frame(8, &mut rng);
        let lhs = &build_phi(&a, &sys).unwrap() - &build_phi(&b, &sys).unwrap();
        let rhs = build_phi(&(&a - &b), &sys).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn flat_siso_has_rank_one() {
        let profile = DdProfile::new(vec![(0, 0)]).unwrap();
        let sys = EquivalentSiso::from_plan(&afdm8(), &profile, &CddsPlan::single(), PrecoderKind::TdCdds).unwrap();
        let rep = min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap();
        assert_eq!(rep.theta_min, 1);
        assert_eq!(rep.pairs_checked, 3u64.pow(8) - 1);
    }

    #[test]
    fn non_overlapping_step_gives_full_rank() {
        let frame = afdm8();
        let good = plan(1, 0);
        assert!(check_non_overlap(&va_profile(), &good, 8));
        let sys = EquivalentSiso::from_plan(&frame, &va_profile(), &good, PrecoderKind::MdCddsAfdm).unwrap();
        assert_eq!(min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap().theta_min, 4);
        let bad = plan(0, 0);
        assert!(!check_non_overlap(&va_profile(), &bad, 8));
        let sys = EquivalentSiso::from_plan(&frame, &va_profile(), &bad, PrecoderKind::MdCddsAfdm).unwrap();
        assert!(min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap().theta_min < 4);
    }

    #[test]
    fn chirp_offset_zero_loses_diversity() {
        // With c2 = 0 the DAFT-domain responses of l = 0 paths are bare
        // permutations, and an all-equal difference vector collapses them.
        let frame = FrameConfig::Afdm(AfdmConfig::optimal(8, 1, 0, 1).unwrap());
        let sys = EquivalentSiso::from_plan(&frame, &va_profile(), &plan(1, 0), PrecoderKind::MdCddsAfdm).unwrap();
        assert_eq!(min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap().theta_min, 2);
    }

    #[test]
    fn full_rank_for_every_separable_plan_n10() {
        let profile = va_profile();
        let c2 = 1.0 / (20.0 * std::f64::consts::PI);
        let mut checked = 0;
        for k in -3..=3 {
            for l in 0..=2 {
                let p = plan(k, l);
                let ks = crate::cdds::required_k_space(&profile, &p);
                let cfg = AfdmConfig::optimal(10, 1, ks, (1 + l) as usize).unwrap().with_c2(c2);
                if !cfg.frame_condition_holds() {
                    continue;
                }
                let sys = EquivalentSiso::from_plan(&FrameConfig::Afdm(cfg), &profile, &p, PrecoderKind::MdCddsAfdm).unwrap();
                let theta = min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap().theta_min;
                if check_non_overlap(&profile, &p, 10) {
                    assert_eq!(theta, 4, "step ({k},{l})");
                    checked += 1;
                } else {
                    assert!(theta < 4);
                }
            }
        }
        assert!(checked >= 3, "{checked}");
    }

    #[test]
    fn report_is_deterministic() {
        let sys = EquivalentSiso::from_plan(&afdm8(), &va_profile(), &plan(0, 0), PrecoderKind::TdCdds).unwrap();
        let a = min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| min_rank_over_pairs(&sys, Alphabet::Bpsk).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn enumeration_cap() {
        let sys = EquivalentSiso::new(12, 1, 1, vec![CMat::identity(12)]).unwrap();
        assert!(matches!(min_rank_over_pairs(&sys, Alphabet::Bpsk), Err(Error::SearchSpace { .. })));
    }

    #[test]
    fn gain_phases_do_not_change_rank() {
        let frame = FrameConfig::Otfs(OtfsConfig::new(4, 2, Pulse::BiOrthogonal).unwrap());
        let profile = DdProfile::new(vec![(0, 0), (1, 1)]).unwrap();
        let sys = EquivalentSiso::from_plan(&frame, &profile, &plan(2, 0), PrecoderKind::MdCddsOtfs).unwrap();
        let turned = sys.with_phases(&[0.3, -1.1, 2.0, 0.7]).unwrap();
        let digits = difference_set(Alphabet::Bpsk);
        for idx in 1..3u64.pow(8) {
            let e = diff_vector(idx, &digits, 8);
            assert_eq!(
                numerical_rank(&build_phi(&e, &sys).unwrap()),
                numerical_rank(&build_phi(&e, &turned).unwrap())
            );
        }
    }

    #[test]
    fn omega_eigenvalues_match_singular_values() {
        let sys = EquivalentSiso::from_plan(&afdm8(), &va_profile(), &plan(1, 0), PrecoderKind::TdCdds).unwrap();
        let mut rng = Rng::new(9, 0);
        for _ in 0..20 {
            let (_, a) = Alphabet::Bpsk.random_frame(8, &mut rng);
            let (_, b) = Alphabet::Bpsk.random_frame(8, &mut rng);
            let delta = build_phi(&(&a - &b), &sys).unwrap();
            let omega = delta.adjoint().matmul(&delta);
            let m = DMatrix::from_row_slice(4, 4, omega.as_slice());
            let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            eig.sort_by(|x, y| y.total_cmp(x));
            assert!(eig.iter().all(|v| *v > -1e-9));
            let s = singular_values(&delta);
            for (e, sv) in eig.iter().zip(&s) {
                assert!((e - sv * sv).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qam_sampling_finds_full_rank_only_when_expected() {
        let sys = EquivalentSiso::from_plan(&afdm8(), &va_profile(), &plan(1, 0), PrecoderKind::MdCddsAfdm).unwrap();
        let mut rng = Rng::new(10, 0);
        let rep = sampled_min_rank(&sys, Alphabet::Qam4, 2000, &mut rng).unwrap();
        assert!(rep.theta_min <= 4 && rep.theta_min >= 1);
    }

    #[test]
    fn pep_examples() {
        assert!((pep_bound(&[0.0, 0.0], 0.1, 2, 1, PepRegime::Finite).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let v = pep_bound(&[1.0], 0.01, 1, 1, PepRegime::HighSnr).unwrap();
        assert!((v - 13.0 / 1200.0).abs() < 1e-15);
        let fin = pep_bound(&[1.0], 1e-4, 1, 1, PepRegime::Finite).unwrap();
        let high = pep_bound(&[1.0], 1e-4, 1, 1, PepRegime::HighSnr).unwrap();
        assert!(high >= fin);
        assert!(fin / high > 0.95);
        assert!(pep_bound(&[1.0], 0.0, 1, 1, PepRegime::Finite).is_err());
    }
}
