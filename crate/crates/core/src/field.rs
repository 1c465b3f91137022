//! Exact joint Gaussian sampling of the reflected circle-average process of
//! the free-boundary GFF.
//!
//! The chaos constructions only ever read the field through circle averages
//! at finitely many probes, and for circles the pairwise covariances reduce
//! to one-dimensional integrals with closed forms in the disjoint and
//! nested configurations. Probes are therefore sampled exactly from the
//! analytic covariance (after a triangular factorization with a small
//! jitter), with no field mesh anywhere.
//!
//! Writing m(a, eps; b, del) for the mutual log-energy of uniform circle
//! measures and A_eps(z) for the circle average of log|t| 1_{|t| >= 1},
//! the reflected average has
//!   cov(G_eps(z), G_del(w)) = -m(z, eps; w, del) - m(z, eps; conj w, del)
//!                             + 2 A_eps(z) + 2 A_del(w),
//! which specializes to the closed variance forms
//!   var = -log eps - log(2 Im z) + l_eps(z)   (Im z > eps)
//!   var = -2 log eps + l_eps(z)               (z real)
//! with l_eps(z) -> l(z) = 4 log|z| 1_{|z| >= 1}.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::par_map_indexed;
use crate::quad;

/// Relative tolerance for the circle-overlap correction integrals.
const OVERLAP_TOL: f64 = 1e-9;
/// Initial Cholesky jitter, as a fraction of the largest diagonal entry.
const JITTER_START: f64 = 1e-12;
/// Jitter ceiling before the ensemble is declared ill-conditioned.
const JITTER_MAX: f64 = 1e-6;

/// One circle-average probe: a centre in the closed upper half-plane and a
/// radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub re: f64,
    pub im: f64,
    pub radius: f64,
}

impl Probe {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Self {
            re: center.re,
            im: center.im,
            radius,
        }
    }

    #[inline]
    pub fn center(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Parameter(format!(
                "probe radius must be positive, got {}",
                self.radius
            )));
        }
        if self.im < 0.0 || !self.re.is_finite() || !self.im.is_finite() {
            return Err(Error::Domain(format!(
                "probe centre must lie in the closed upper half-plane, got {} + {}i",
                self.re, self.im
            )));
        }
        Ok(())
    }
}

/// Free-boundary covariance kernel
/// -log|z-w| - log|z - conj w| + 2 log|z| 1_{|z|>=1} + 2 log|w| 1_{|w|>=1}.
pub fn free_cov(z: Complex64, w: Complex64) -> Result<f64> {
    if z == w {
        return Err(Error::Domain(
            "free_cov is singular on the diagonal z = w".into(),
        ));
    }
    if z == w.conj() && z.im != 0.0 {
        return Err(Error::Domain(
            "free_cov is singular at the reflection z = conj w".into(),
        ));
    }
    Ok(-(z - w).norm().ln() - (z - w.conj()).norm().ln() + indicator_log(z) + indicator_log(w))
}

#[inline]
fn indicator_log(z: Complex64) -> f64 {
    let r = z.norm();
    if r >= 1.0 {
        2.0 * r.ln()
    } else {
        0.0
    }
}

/// l(z) = 4 log|z| 1_{|z| >= 1}, the limit of the variance correction.
pub fn l_function(z: Complex64) -> f64 {
    2.0 * indicator_log(z)
}

/// Mean of log|. - w| over the circle of radius `eps` about `z0`:
/// log max(|z0 - w|, eps), by harmonicity outside and constancy inside.
pub fn log_circle_average(z0: Complex64, eps: f64, w: Complex64) -> f64 {
    (z0 - w).norm().max(eps).ln()
}

/// Mutual log-energy of the uniform measures on two circles,
/// m = iint log|s - t| rho_eps^a(ds) rho_del^b(dt).
///
/// Reduces exactly to int log max(|a - t|, eps) rho_del^b(dt); closed form
/// unless the eps-disc boundary crosses the del-circle, in which case the
/// correction is a single smooth arc integral.
fn circle_cross_energy(a: Complex64, eps: f64, b: Complex64, del: f64) -> f64 {
    let r = (a - b).norm();
    if r >= eps + del {
        return r.max(del).ln();
    }
    if r + del <= eps {
        return eps.ln();
    }
    if r == 0.0 {
        // concentric, del > eps here: averages to log del
        return del.ln();
    }
    // base term plus the nonnegative correction over the arc inside the disc
    let base = r.max(del).ln();
    let q = ((eps * eps - r * r - del * del) / (2.0 * r * del)).clamp(-1.0, 1.0);
    let theta0 = q.acos();
    let correction = quad::integrate(
        |theta| {
            let d2 = r * r + del * del + 2.0 * r * del * theta.cos();
            eps.ln() - 0.5 * d2.max(1e-300).ln()
        },
        theta0,
        std::f64::consts::PI,
        OVERLAP_TOL,
    ) / std::f64::consts::PI;
    base + correction
}

/// Circle average of log|t| 1_{|t| >= 1} over the radius-`eps` circle about
/// `z`: the normalization term of the whole-plane field pinned on the unit
/// circle.
fn unit_circle_log_term(z: Complex64, eps: f64) -> f64 {
    let r = z.norm();
    if r + eps <= 1.0 {
        return 0.0;
    }
    if r - eps >= 1.0 {
        return r.ln();
    }
    if r == 0.0 {
        // circle about the origin: |t| = eps everywhere
        return if eps >= 1.0 { eps.ln() } else { 0.0 };
    }
    // the circle crosses the unit circle: integrate over the outside arc
    let q = ((1.0 - r * r - eps * eps) / (2.0 * r * eps)).clamp(-1.0, 1.0);
    let theta1 = q.acos();
    quad::integrate(
        |theta| {
            let d2 = r * r + eps * eps + 2.0 * r * eps * theta.cos();
            0.5 * d2.max(1e-300).ln()
        },
        0.0,
        theta1,
        OVERLAP_TOL,
    ) / std::f64::consts::PI
}

/// Exact covariance of two reflected circle-average probes.
pub fn probe_covariance(p: &Probe, q: &Probe) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    let z = p.center();
    let w = q.center();
    let cov = -circle_cross_energy(z, p.radius, w, q.radius)
        - circle_cross_energy(z, p.radius, w.conj(), q.radius)
        + 2.0 * unit_circle_log_term(z, p.radius)
        + 2.0 * unit_circle_log_term(w, q.radius);
    if !cov.is_finite() {
        return Err(Error::Covariance {
            i: 0,
            j: 0,
            reason: format!("non-finite covariance for probes {p:?}, {q:?}"),
        });
    }
    Ok(cov)
}

/// Closed-form variance of a circle average, valid for interior probes with
/// Im z > eps and for boundary probes (z real), with the correction l_eps
/// replaced by its limit l(z).
pub fn variance_closed_form(z: Complex64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {eps}")));
    }
    if z.im == 0.0 {
        return Ok(-2.0 * eps.ln() + l_function(z));
    }
    if z.im > eps {
        return Ok(-eps.ln() - (2.0 * z.im).ln() + l_function(z));
    }
    Err(Error::Regime {
        radius: eps,
        min: 0.0,
        max: z.im,
    })
}

/// A probe set with its covariance matrix and triangular factor, ready for
/// repeated sampling.
#[derive(Debug, Clone)]
pub struct ProbeEnsemble {
    probes: Vec<Probe>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter: f64,
}

/// Assemble the dense covariance (parallel over entries) and factorize with
/// an escalating jitter.
pub fn build_ensemble(probes: Vec<Probe>) -> Result<ProbeEnsemble> {
    for p in &probes {
        p.validate()?;
    }
    for i in 0..probes.len() {
        for j in (i + 1)..probes.len() {
            if probes[i] == probes[j] {
                return Err(Error::Parameter(format!(
                    "duplicate probes at indices {i} and {j}"
                )));
            }
        }
    }
    let n = probes.len();
    if n == 0 {
        return Ok(ProbeEnsemble {
            probes,
            covariance: DMatrix::zeros(0, 0),
            factor: DMatrix::zeros(0, 0),
            jitter: 0.0,
        });
    }
    // upper triangle, row-major pair index
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .collect();
    let entries = par_map_indexed(pairs.len(), |k| {
        let (i, j) = pairs[k];
        probe_covariance(&probes[i], &probes[j]).map_err(|e| (i, j, e))
    });
    let mut cov = DMatrix::zeros(n, n);
    for (k, e) in entries.into_iter().enumerate() {
        let (i, j) = pairs[k];
        match e {
            Ok(v) => {
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
            Err((i, j, _)) => {
                return Err(Error::Covariance {
                    i,
                    j,
                    reason: "entry evaluation failed".into(),
                })
            }
        }
    }
    let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0_f64, f64::max).max(1.0);
    let mut jitter = JITTER_START * max_diag;
    loop {
        let mut jittered = cov.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = jittered.cholesky() {
            return Ok(ProbeEnsemble {
                probes,
                covariance: cov,
                factor: chol.l(),
                jitter,
            });
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * max_diag {
            return Err(Error::IllConditioned { jitter });
        }
    }
}

impl ProbeEnsemble {
    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Variance of probe `i`, read from the assembled diagonal (this is the
    /// value chaos weights must use so that algebraic identities between
    /// normalizations stay exact).
    pub fn variance(&self, i: usize) -> f64 {
        self.covariance[(i, i)]
    }

    /// Max-norm residual of the factorization, ||L L^T - Sigma||_max.
    pub fn factorization_residual(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let recon = &self.factor * self.factor.transpose();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut target = self.covariance[(i, j)];
                if i == j {
                    target += self.jitter;
                }
                worst = worst.max((recon[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Jointly Gaussian field values aligned with an ensemble's probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Draw one exact sample: factor times a standard normal vector, seeded.
pub fn sample_field(ensemble: &ProbeEnsemble, seed: u64) -> FieldSample {
    let n = ensemble.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi: Vec<f64> = (0..n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut values = vec![0.0; n];
    let l = &ensemble.factor;
    for i in 0..n {
        let mut acc = 0.0;
        for (j, xj) in xi.iter().enumerate().take(i + 1) {
            acc += l[(i, j)] * xj;
        }
        values[i] = acc;
    }
    FieldSample { values, seed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_cov_closed_values() {
        // z = 2i, w = i: -log 1 - log 3 + 2 log 2 + 0 = log(4/3)
        let v = free_cov(Complex64::new(0.0, 2.0), Complex64::new(0.0, 1.0)).unwrap();
        assert!((v - (4.0_f64 / 3.0).ln()).abs() < 1e-14);
        assert!((v - 0.28768).abs() < 1e-5);
    }

    #[test]
    fn free_cov_is_symmetric() {
        let pts = [
            Complex64::new(0.3, 0.4),
            Complex64::new(-1.2, 0.7),
            Complex64::new(2.0, 1.5),
            Complex64::new(0.1, 2.2),
        ];
        for (i, &z) in pts.iter().enumerate() {
            for &w in pts.iter().skip(i + 1) {
                let a = free_cov(z, w).unwrap();
                let b = free_cov(w, z).unwrap();
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn free_cov_inside_unit_disc_has_no_normalization_terms() {
        let z = Complex64::new(0.2, 0.3);
        let w = Complex64::new(-0.1, 0.4);
        let v = free_cov(z, w).unwrap();
        let expected = -(z - w).norm().ln() - (z - w.conj()).norm().ln();
        assert_eq!(v, expected);
    }

    #[test]
    fn free_cov_rejects_singular_configurations() {
        let z = Complex64::new(0.5, 0.5);
        assert!(free_cov(z, z).is_err());
        assert!(free_cov(z, z.conj()).is_err());
    }

    #[test]
    fn log_circle_average_values() {
        // |z0 - w| = 5, eps = 1 -> log 5
        let v = log_circle_average(Complex64::new(0.0, 0.0), 1.0, Complex64::new(3.0, 4.0));
        assert!((v - 5.0_f64.ln()).abs() < 1e-15);
        // w = z0 -> log eps
        let v = log_circle_average(Complex64::new(1.0, 1.0), 0.25, Complex64::new(1.0, 1.0));
        assert!((v - 0.25_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_circle_average_matches_trapezoid_quadrature() {
        let configs = [
            (Complex64::new(0.4, 0.7), 0.3, Complex64::new(1.0, 0.2)),
            (Complex64::new(-0.5, 1.1), 0.8, Complex64::new(-0.2, 1.0)),
            (Complex64::new(2.0, 0.5), 0.1, Complex64::new(2.0, 0.55)),
        ];
        for &(z0, eps, w) in &configs {
            let n = 1 << 14;
            let mut acc = 0.0;
            for k in 0..n {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                let s = z0 + eps * Complex64::new(th.cos(), th.sin());
                acc += (s - w).norm().ln();
            }
            acc /= n as f64;
            let v = log_circle_average(z0, eps, w);
            assert!(
                (v - acc).abs() < 1e-8,
                "mismatch at {z0}, {eps}, {w}: {v} vs {acc}"
            );
        }
    }

    #[test]
    fn interior_variance_matches_closed_form() {
        // probe (0.5i, 0.1): var = -log 0.1 - log 1 = 2.302585
        let p = Probe::new(Complex64::new(0.0, 0.5), 0.1);
        let v = probe_covariance(&p, &p).unwrap();
        assert!((v - 2.302585092994046).abs() < 1e-10);
        let cf = variance_closed_form(p.center(), p.radius).unwrap();
        assert!((v - cf).abs() < 1e-10);
    }

    #[test]
    fn boundary_variance_matches_closed_form() {
        // x = 0, eps = 0.1: var = -2 log 0.1 = 4.60517
        let p = Probe::new(Complex64::new(0.0, 0.0), 0.1);
        let v = probe_covariance(&p, &p).unwrap();
        assert!((v - 4.605170185988091).abs() < 1e-10);
    }

    #[test]
    fn variance_away_from_origin_includes_l() {
        // z = 3i, eps = 0.01: -log 0.01 - log 6 + 4 log 3
        let z = Complex64::new(0.0, 3.0);
        let v = variance_closed_form(z, 0.01).unwrap();
        let expected = -(0.01_f64.ln()) - 6.0_f64.ln() + 4.0 * 3.0_f64.ln();
        assert!((v - expected).abs() < 1e-12);
        let p = Probe::new(z, 0.01);
        let pv = probe_covariance(&p, &p).unwrap();
        assert!((pv - expected).abs() < 1e-3);
        // l vanishes inside the unit disc
        assert_eq!(l_function(Complex64::new(0.0, 0.5)), 0.0);
    }

    #[test]
    fn closed_form_rejects_shallow_interior_probes() {
        assert!(variance_closed_form(Complex64::new(0.0, 0.05), 0.1).is_err());
        // but the exact covariance still works there
        let p = Probe::new(Complex64::new(0.0, 0.05), 0.1);
        assert!(probe_covariance(&p, &p).unwrap().is_finite());
    }

    #[test]
    fn agreement_with_closed_form_for_separated_interior_probes() {
        // probes whose circles stay clear of the unit circle, where
        // l_eps = l exactly and the only difference is quadrature
        for &(im, eps) in &[(1.5, 0.1), (0.5, 0.05), (2.5, 0.2)] {
            let z = Complex64::new(0.3, im);
            let p = Probe::new(z, eps);
            let v = probe_covariance(&p, &p).unwrap();
            let cf = variance_closed_form(z, eps).unwrap();
            assert!(
                (v - cf).abs() < 1e-3,
                "Im {im}, eps {eps}: {v} vs {cf}"
            );
        }
        // straddling the unit circle the discrepancy is the genuine
        // l_eps - l gap, of order eps, and shrinks with it
        let z = Complex64::new(0.3, 1.0);
        let gap = |eps: f64| {
            (probe_covariance(&Probe::new(z, eps), &Probe::new(z, eps)).unwrap()
                - variance_closed_form(z, eps).unwrap())
            .abs()
        };
        assert!(gap(0.01) < gap(0.1));
        assert!(gap(0.01) < 0.02);
    }

    #[test]
    fn covariance_approaches_free_cov_as_radii_shrink() {
        let z = Complex64::new(0.4, 0.8);
        let w = Complex64::new(-0.3, 0.6);
        let target = free_cov(z, w).unwrap();
        let mut errs = Vec::new();
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let v = probe_covariance(&Probe::new(z, eps), &Probe::new(w, eps)).unwrap();
            errs.push((v - target).abs());
        }
        assert!(errs[1] <= errs[0] + 1e-12);
        assert!(errs[2] <= errs[1] + 1e-12);
        assert!(errs[2] < 1e-6);
    }

    #[test]
    fn far_separated_probes_reduce_to_free_cov() {
        let z = Complex64::new(-2.0, 1.5);
        let w = Complex64::new(3.0, 2.0);
        let v = probe_covariance(&Probe::new(z, 1e-3), &Probe::new(w, 1e-3)).unwrap();
        assert!((v - free_cov(z, w).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn overlapping_probe_covariance_is_finite_and_symmetric() {
        let p = Probe::new(Complex64::new(0.0, 0.3), 0.25);
        let q = Probe::new(Complex64::new(0.1, 0.35), 0.2);
        let a = probe_covariance(&p, &q).unwrap();
        let b = probe_covariance(&q, &p).unwrap();
        assert!(a.is_finite());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ensemble_assembly_and_sampling() {
        let probes = vec![
            Probe::new(Complex64::new(0.0, 0.5), 0.1),
            Probe::new(Complex64::new(0.2, 0.6), 0.1),
            Probe::new(Complex64::new(-0.3, 0.4), 0.05),
        ];
        let ens = build_ensemble(probes).unwrap();
        assert_eq!(ens.len(), 3);
        assert!(ens.factorization_residual() <= ens.jitter() * 10.0);
        let s1 = sample_field(&ens, 99);
        let s2 = sample_field(&ens, 99);
        assert_eq!(s1.values, s2.values);
        let s3 = sample_field(&ens, 100);
        assert_ne!(s1.values, s3.values);
    }

    #[test]
    fn empty_probe_list_yields_empty_sample() {
        let ens = build_ensemble(Vec::new()).unwrap();
        let s = sample_field(&ens, 1);
        assert!(s.values.is_empty());
    }

    #[test]
    fn duplicate_probes_are_rejected() {
        let p = Probe::new(Complex64::new(0.0, 0.5), 0.1);
        assert!(build_ensemble(vec![p, p]).is_err());
    }

    #[test]
    fn single_probe_sample_variance_matches_oracle() {
        let ens = build_ensemble(vec![Probe::new(Complex64::new(0.0, 0.5), 0.1)]).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let v = sample_field(&ens, i as u64).values[0];
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let target = 2.302585092994046; // -log 0.1 - log 1
        let se = target * (2.0 / n as f64).sqrt();
        assert!(
            (var - target).abs() < 3.0 * se,
            "sample var {var} vs {target} (se {se})"
        );
    }

    #[test]
    fn ensemble_matrix_is_nearly_positive_definite_before_jitter() {
        // a moderately crowded probe set, including boundary probes
        let mut probes = Vec::new();
        for k in 0..8 {
            probes.push(Probe::new(Complex64::new(-0.6 + 0.2 * k as f64, 0.4), 0.15));
        }
        for k in 0..4 {
            probes.push(Probe::new(Complex64::new(-0.3 + 0.2 * k as f64, 0.0), 0.1));
        }
        let ens = build_ensemble(probes).unwrap();
        let eig = nalgebra::SymmetricEigen::new(ens.covariance().clone());
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_diag = (0..ens.len())
            .map(|i| ens.covariance()[(i, i)])
            .fold(0.0_f64, f64::max);
        assert!(
            min_eig >= -1e-8 * max_diag,
            "min eigenvalue {min_eig} vs diag {max_diag}"
        );
    }

    #[test]
    fn wick_exponential_has_unit_mean() {
        let probes = vec![
            Probe::new(Complex64::new(0.0, 0.5), 0.1),
            Probe::new(Complex64::new(0.5, 0.7), 0.15),
        ];
        let ens = build_ensemble(probes).unwrap();
        let gamma: f64 = 1.5;
        let n = 200_000;
        let mut sums = [0.0_f64; 2];
        let mut sumsq = [0.0_f64; 2];
        for i in 0..n {
            let s = sample_field(&ens, i as u64);
            for k in 0..2 {
                let w = (0.5 * gamma * s.values[k]
                    - gamma * gamma / 8.0 * ens.variance(k))
                .exp();
                sums[k] += w;
                sumsq[k] += w * w;
            }
        }
        for k in 0..2 {
            let mean = sums[k] / n as f64;
            let var = sumsq[k] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - 1.0).abs() < 3.0 * se,
                "probe {k}: mean {mean}, se {se}"
            );
        }
    }
}
