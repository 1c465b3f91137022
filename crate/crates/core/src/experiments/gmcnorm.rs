//! Chaos normalization suites: Wick mean-one over sampled fields, the exact
//! boundary identity between the eps-power and tilted Wick normalizations,
//! the tilt mismatch at atoms away from the origin, and the closed-form
//! algebra gates (exponent identity, Green normalization).

use num_complex::Complex64;

use super::config::ExperimentConfig;
use super::record::{Estimate, ResultRecord};
use super::stats;
use crate::chaos::{chaos_measure_from_values, relation_nu_mu_tilde, ChaosConfig, Normalization};
use crate::error::Result;
use crate::field::{build_ensemble, sample_field, Probe};
use crate::green;
use crate::measures::{MeasureKind, Provenance, WeightedMeasure};
use crate::parallel::par_map_indexed;
use crate::params::KappaParams;
use crate::seeds::{leaf_seed, Stream};

pub fn run_gmc_normalization(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let params = KappaParams::new(cfg.kappa)?;
    let gc = &cfg.gmc_norm;
    let hash = cfg.hash();
    let mut record = ResultRecord::new("gmc-norm", &hash, cfg.seed);

    // --- Wick mean-one on a fixed interior reference ---
    let interior_atoms = [
        Complex64::new(-0.2, 0.5),
        Complex64::new(0.1, 0.8),
        Complex64::new(0.4, 0.6),
    ];
    let mut reference = WeightedMeasure::new(
        MeasureKind::Pushforward { alpha: 0.0 },
        Provenance::default(),
    );
    for &z in &interior_atoms {
        reference.push(z, 1.0);
    }
    let probes: Vec<Probe> = interior_atoms
        .iter()
        .map(|&z| Probe::new(z, gc.epsilon))
        .collect();
    let ensemble = build_ensemble(probes)?;
    let vars: Vec<f64> = (0..ensemble.len()).map(|i| ensemble.variance(i)).collect();
    for (gi, &gamma) in gc.gammas.iter().enumerate() {
        let chaos_cfg = ChaosConfig::new(gamma, gc.epsilon, Normalization::Wick)?;
        let masses = par_map_indexed(gc.fields, |j| {
            let seed = leaf_seed(cfg.seed, Stream::Field, (gi * gc.fields + j) as u64);
            let field = sample_field(&ensemble, seed);
            chaos_measure_from_values(&reference, &field.values, Some(&vars), &chaos_cfg)
                .map(|out| out.measure.total_mass())
                .unwrap_or(f64::NAN)
        });
        let (mean, se) = stats::mean_se(&masses);
        let target = reference.total_mass();
        record.estimates.push(
            Estimate::report(format!("wick_mean_one[gamma={gamma}]"), mean / target)
                .with_se(se / target)
                .gated_by((mean - target).abs() <= 3.0 * se),
        );
    }

    // --- exact boundary identity inside the unit interval ---
    let xs = [-0.8, -0.45, -0.1, 0.25, 0.6];
    let mut boundary = WeightedMeasure::new(
        MeasureKind::BoundaryInterval { lo: -0.8, hi: 0.6 },
        Provenance::default(),
    );
    for &x in &xs {
        boundary.push(Complex64::new(x, 0.0), 0.28);
    }
    let bprobes: Vec<Probe> = xs
        .iter()
        .map(|&x| Probe::new(Complex64::new(x, 0.0), gc.epsilon))
        .collect();
    let bensemble = build_ensemble(bprobes)?;
    let bvars: Vec<f64> = (0..bensemble.len()).map(|i| bensemble.variance(i)).collect();
    let field = sample_field(&bensemble, leaf_seed(cfg.seed, Stream::Field, u64::MAX / 2));
    let gamma_id = params.gamma.min(1.9);
    let (lhs, rhs) = relation_nu_mu_tilde(&boundary, &field.values, &bvars, gamma_id, gc.epsilon)?;
    let mut worst = 0.0_f64;
    for i in 0..lhs.len() {
        worst = worst.max((lhs[i] - rhs[i]).abs() / lhs[i].abs().max(rhs[i].abs()));
    }
    record.estimates.push(
        Estimate::report("boundary_identity_rel_gap", worst)
            .gated_by(worst <= gc.identity_tolerance),
    );

    // --- tilt mismatch at an off-origin atom ---
    let x_far = 2.0;
    let eps_far = 1e-3;
    let far = build_ensemble(vec![Probe::new(Complex64::new(x_far, 0.0), eps_far)])?;
    let l_eps = far.variance(0) + 2.0 * eps_far.ln();
    let l_exact = crate::field::l_function(Complex64::new(x_far, 0.0));
    let tilt_err = ((gamma_id * gamma_id / 8.0 * (l_eps - l_exact)).exp() - 1.0).abs();
    record.estimates.push(
        Estimate::report("tilt_mismatch[x=2,eps=1e-3]", tilt_err)
            .gated_by(tilt_err < gc.tilt_tolerance),
    );

    // --- closed-form algebra gates ---
    let mut worst_exponent = 0.0_f64;
    for &kappa in &[0.5, 1.0, 2.0, 8.0 / 3.0, 3.0, 4.0] {
        for &delta in &[1e-6, 1e-3, 0.05, 0.2] {
            if delta < 2.0 / kappa {
                worst_exponent =
                    worst_exponent.max(green::exponent_identity_residual(kappa, delta)?.abs());
            }
        }
    }
    record.estimates.push(
        Estimate::report("gamma_delta_exponent_residual", worst_exponent)
            .gated_by(worst_exponent <= gc.algebra_tolerance),
    );
    let mut worst_norm = 0.0_f64;
    for &kappa in &[0.5, 1.0, 2.0, 8.0 / 3.0, 3.0, 4.0] {
        let c = green::c_star(kappa)?;
        let integral = crate::quad::integrate(
            |x| x.sin().powf(8.0 / kappa),
            0.0,
            std::f64::consts::PI,
            1e-12,
        );
        worst_norm = worst_norm.max((c / 2.0 * integral - 1.0).abs());
    }
    record.estimates.push(
        Estimate::report("c_star_normalization_residual", worst_norm)
            .gated_by(worst_norm <= gc.algebra_tolerance),
    );
    record.finalize();
    Ok(record)
}
