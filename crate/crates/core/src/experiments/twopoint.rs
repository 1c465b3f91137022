//! Two-point correlation scaling: the joint probability of two points both
//! reaching small conformal radius against the bound
//! c e^{2r(d-2)} |z - w|^{d-2}.

use std::path::Path;

use num_complex::Complex64;

use super::config::ExperimentConfig;
use super::record::{Estimate, ResultRecord, ScatterStore};
use super::stats;
use crate::error::{Error, Result};
use crate::loewner::{resolve_probe, HitOutcome, ResolutionPolicy};
use crate::parallel::par_map_indexed;
use crate::params::KappaParams;

pub fn run_two_point_scaling(
    cfg: &ExperimentConfig,
    scatter_dir: Option<&Path>,
) -> Result<ResultRecord> {
    let params = KappaParams::new(cfg.kappa)?;
    let tc = &cfg.two_point;
    if tc.base.1 < 1.0 {
        return Err(Error::Parameter("two_point.base needs Im >= 1".into()));
    }
    if tc.separations.iter().any(|&s| s <= 0.0) {
        return Err(Error::Parameter(
            "separations must be positive (z = w is degenerate)".into(),
        ));
    }
    if tc.radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("radii must be strictly descending".into()));
    }
    let base = Complex64::new(tc.base.0, tc.base.1);
    let points: Vec<Complex64> = std::iter::once(base)
        .chain(tc.separations.iter().map(|&s| base + s))
        .collect();
    let policy = ResolutionPolicy::default();
    let hash = cfg.hash();
    let n_r = tc.radii.len();
    let width = points.len() * n_r;

    let sample_row = |i: usize| -> Vec<f64> {
        let driver = match super::sample_curve(cfg, &params, i) {
            Ok(d) => d,
            Err(_) => return vec![f64::NAN; width],
        };
        let mut row = Vec::with_capacity(width);
        for &z in &points {
            let res = resolve_probe(&driver, z, &tc.radii, &policy);
            for k in 0..n_r {
                let v = if res.swallowed {
                    f64::NAN
                } else {
                    match res.hits[k] {
                        HitOutcome::Hit => 1.0,
                        HitOutcome::Miss => 0.0,
                        HitOutcome::Unresolved => f64::NAN,
                    }
                };
                row.push(v);
            }
        }
        row
    };
    let rows: Vec<Vec<f64>> = match scatter_dir {
        Some(dir) => {
            let mut store =
                ScatterStore::open(&dir.join("two_point.scatter.csv"), &hash, width)?;
            let done = store.cursor();
            if done < tc.samples {
                let fresh = par_map_indexed(tc.samples - done, |k| sample_row(done + k));
                store.append(fresh)?;
            }
            store.rows()[..tc.samples].to_vec()
        }
        None => par_map_indexed(tc.samples, sample_row),
    };

    let mut record = ResultRecord::new("two-point", &hash, cfg.seed);
    let d = params.d;
    // joint hit frequencies per (separation, radius)
    let mut p_hat = vec![vec![0.0_f64; n_r]; tc.separations.len()];
    let mut se = vec![vec![0.0_f64; n_r]; tc.separations.len()];
    for (s_idx, _) in tc.separations.iter().enumerate() {
        for k in 0..n_r {
            let mut hits = 0usize;
            let mut valid = 0usize;
            for row in &rows {
                let a = row[k];
                let b = row[(s_idx + 1) * n_r + k];
                if a.is_nan() || b.is_nan() {
                    record.exclusions.unresolved_cr += 1;
                    continue;
                }
                valid += 1;
                if a == 1.0 && b == 1.0 {
                    hits += 1;
                }
            }
            let p = hits as f64 / valid.max(1) as f64;
            p_hat[s_idx][k] = p;
            se[s_idx][k] = stats::binomial_se(p, valid.max(1));
        }
    }
    for (s_idx, &sep) in tc.separations.iter().enumerate() {
        for (k, &radius) in tc.radii.iter().enumerate() {
            record.estimates.push(
                Estimate::report(
                    format!("p_joint[s={sep},e^-r={radius}]"),
                    p_hat[s_idx][k],
                )
                .with_se(se[s_idx][k]),
            );
        }
    }

    // separation exponent at the finest radius: slope of log p against
    // log s must not fall below (d - 2) - slack
    let k_fine = n_r - 1;
    let usable: Vec<usize> = (0..tc.separations.len())
        .filter(|&s| p_hat[s][k_fine] > 0.0)
        .collect();
    if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|&s| tc.separations[s].ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|&s| p_hat[s][k_fine].ln()).collect();
        let slope = stats::slope(&xs, &ys);
        record.estimates.push(
            Estimate::report("separation_exponent", slope)
                .gated_by(slope >= (d - 2.0) - tc.exponent_slack),
        );
    } else {
        record
            .notes
            .push("too few nonzero joint frequencies for the separation fit".into());
    }

    // bound check: fit c once at the coarsest radius, then require
    // p <= c e^{2r(d-2)} s^{d-2} (+2 SE) everywhere else
    let r0 = -(tc.radii[0].ln());
    let mut c_hat = 0.0_f64;
    for (s_idx, &sep) in tc.separations.iter().enumerate() {
        let rhs = (2.0 * r0 * (d - 2.0)).exp() * sep.powf(d - 2.0);
        c_hat = c_hat.max(p_hat[s_idx][0] / rhs);
    }
    record
        .estimates
        .push(Estimate::report("fitted_bound_constant", c_hat));
    let mut respected = true;
    for (s_idx, &sep) in tc.separations.iter().enumerate() {
        for (k, &radius) in tc.radii.iter().enumerate().skip(1) {
            let r = -(radius.ln());
            let rhs = c_hat * (2.0 * r * (d - 2.0)).exp() * sep.powf(d - 2.0);
            if p_hat[s_idx][k] > rhs + 2.0 * se[s_idx][k] {
                respected = false;
                record.notes.push(format!(
                    "bound violated at s={sep}, e^-r={radius}: {} > {rhs}",
                    p_hat[s_idx][k]
                ));
            }
        }
    }
    record
        .estimates
        .push(Estimate::report("bound_respected", if respected { 1.0 } else { 0.0 }).gated_by(respected));

    // r-exponent: per separation, slope of log p on r; gate the median
    let mut r_slopes = Vec::new();
    for s_idx in 0..tc.separations.len() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (k, &radius) in tc.radii.iter().enumerate() {
            if p_hat[s_idx][k] > 0.0 {
                xs.push(-(radius.ln()));
                ys.push(p_hat[s_idx][k].ln());
            }
        }
        if xs.len() >= 2 {
            r_slopes.push(stats::slope(&xs, &ys));
        }
    }
    if !r_slopes.is_empty() {
        let med = stats::median(&r_slopes);
        record.estimates.push(
            Estimate::report("r_exponent", med).gated(2.0 * (d - 2.0), tc.r_exponent_tolerance),
        );
    }
    record.finalize();
    Ok(record)
}
