//! Minkowski-content experiments: left/right equality of the one-sided
//! conformal approximants, the expectation identity against the Green
//! quadrature, and the two independent estimators of the constant relating
//! conformal to Euclidean content.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::record::{Estimate, ResultRecord, ScatterStore};
use super::stats;
use crate::error::{Error, Result};
use crate::green::green_function;
use crate::loewner::{
    resolve_probe, trace_curve_prefix, HitOutcome, ResolutionPolicy, Side,
};
use crate::measures::GridSpec;
use crate::parallel::par_map_indexed;
use crate::params::KappaParams;
use crate::seeds::{leaf_rng, leaf_seed, Stream};

/// Deterministic midpoint quadrature of (1/2) int_D G over the grid
/// rectangle, on a refinement of the measurement grid.
fn half_green_mass(grid: &GridSpec, params: &KappaParams) -> f64 {
    let refine = 8;
    let fine = GridSpec {
        nx: grid.nx * refine,
        ny: grid.ny * refine,
        ..*grid
    };
    let mut acc = 0.0;
    for k in 0..fine.num_cells() {
        let z = fine.center(k);
        acc += green_function(z, params).unwrap_or(0.0);
    }
    0.5 * acc * fine.cell_area()
}

/// Per-path one-sided masses on the grid for every u in the sweep.
/// Row layout: [mass_L(u_0), mass_R(u_0), mass_L(u_1), ...]; NaN row when
/// the path failed quality checks.
fn mass_row(
    cfg: &ExperimentConfig,
    params: &KappaParams,
    grid: &GridSpec,
    u_sweep: &[f64],
    policy: &ResolutionPolicy,
    index: usize,
) -> Vec<f64> {
    let width = 2 * u_sweep.len();
    let driver = match super::sample_curve(cfg, params, index) {
        Ok(d) => d,
        Err(_) => return vec![f64::NAN; width],
    };
    let res = par_map_indexed(grid.num_cells(), |k| {
        resolve_probe(&driver, grid.center(k), u_sweep, policy)
    });
    let mut excluded = 0usize;
    let mut counts = vec![0usize; width];
    for r in &res {
        if r.swallowed {
            excluded += 1;
            continue;
        }
        for (ui, h) in r.hits.iter().enumerate() {
            match h {
                HitOutcome::Hit => match r.side.side {
                    Some(Side::Left) => counts[2 * ui] += 1,
                    Some(Side::Right) => counts[2 * ui + 1] += 1,
                    None => excluded += 1,
                },
                HitOutcome::Miss => {}
                HitOutcome::Unresolved => excluded += 1,
            }
        }
    }
    let active: usize = counts.iter().sum::<usize>() + excluded;
    if active > 0 && excluded as f64 > cfg.exclusion_cap * active as f64 {
        return vec![f64::NAN; width];
    }
    let area = grid.cell_area();
    let mut row = Vec::with_capacity(width);
    for (ui, &u) in u_sweep.iter().enumerate() {
        let scale = u.powf(-params.codim()) * area;
        row.push(counts[2 * ui] as f64 * scale);
        row.push(counts[2 * ui + 1] as f64 * scale);
    }
    row
}

pub fn run_minkowski_lr(
    cfg: &ExperimentConfig,
    scatter_dir: Option<&Path>,
) -> Result<ResultRecord> {
    let params = KappaParams::new(cfg.kappa)?;
    let mc = &cfg.mink_lr;
    if mc.u_sweep.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("u_sweep must be strictly descending".into()));
    }
    if mc.expectation_u_index >= mc.u_sweep.len() {
        return Err(Error::Config("expectation_u_index out of range".into()));
    }
    let grid = mc.rect.grid(mc.nx, mc.ny)?;
    let policy = ResolutionPolicy::default();
    let hash = cfg.hash();
    let width = 2 * mc.u_sweep.len();
    let rows: Vec<Vec<f64>> = match scatter_dir {
        Some(dir) => {
            let mut store = ScatterStore::open(&dir.join("mink_lr.scatter.csv"), &hash, width)?;
            let done = store.cursor();
            if done < mc.samples {
                let fresh = par_map_indexed(mc.samples - done, |k| {
                    mass_row(cfg, &params, &grid, &mc.u_sweep, &policy, done + k)
                });
                store.append(fresh)?;
            }
            store.rows()[..mc.samples].to_vec()
        }
        None => par_map_indexed(mc.samples, |i| {
            mass_row(cfg, &params, &grid, &mc.u_sweep, &policy, i)
        }),
    };

    let mut record = ResultRecord::new("mink-lr", &hash, cfg.seed);
    record.exclusions.skipped_samples = rows.iter().filter(|r| r[0].is_nan()).count();

    let mut iqrs = Vec::new();
    for (ui, &u) in mc.u_sweep.iter().enumerate() {
        let ratios: Vec<f64> = rows
            .iter()
            .filter(|r| !r[0].is_nan() && r[2 * ui] > 0.0 && r[2 * ui + 1] > 0.0)
            .map(|r| r[2 * ui] / r[2 * ui + 1])
            .collect();
        if ratios.is_empty() {
            record.notes.push(format!("no two-sided paths at u = {u}"));
            continue;
        }
        let med = stats::median(&ratios);
        let log_ratios: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        let iqr = stats::iqr(&log_ratios);
        iqrs.push(iqr);
        let ci = stats::bootstrap_median_ci(
            &ratios,
            mc.bootstrap,
            leaf_seed(cfg.seed, Stream::Bootstrap, ui as u64),
            0.95,
        );
        let mut est = Estimate::report(format!("lr_median_ratio[u={u}]"), med).with_ci(ci);
        if ui == mc.u_sweep.len() - 1 {
            est = est.gated(1.0, mc.median_tolerance);
        }
        record.estimates.push(est);
        record
            .estimates
            .push(Estimate::report(format!("lr_log_iqr[u={u}]"), iqr));
    }
    // dispersion must shrink along the sweep
    let shrinking = iqrs.windows(2).all(|w| w[1] <= w[0]);
    record.estimates.push(
        Estimate::report("lr_iqr_monotone", if shrinking { 1.0 } else { 0.0 })
            .gated_by(shrinking),
    );

    // expectation identity at the configured u
    let target = half_green_mass(&grid, &params);
    let ui = mc.expectation_u_index;
    for (q, off) in [("L", 0usize), ("R", 1usize)] {
        let masses: Vec<f64> = rows
            .iter()
            .filter(|r| !r[0].is_nan())
            .map(|r| r[2 * ui + off])
            .collect();
        let (mean, se) = stats::mean_se(&masses);
        record.estimates.push(
            Estimate::report(
                format!("expectation[q={q},u={}]", mc.u_sweep[ui]),
                mean / target,
            )
            .with_se(se / target)
            .gated(1.0, mc.expectation_tolerance),
        );
    }
    record
        .estimates
        .push(Estimate::report("half_green_quadrature", target));
    record.finalize();
    Ok(record)
}

/// Disc-distance row for the second estimator: the minimum of
/// |phi(curve)| where phi maps the half-plane onto the unit disc sending a
/// boundary-anchored triple so that the target interior point goes to the
/// origin.
fn disc_min_row(
    cfg: &ExperimentConfig,
    params: &KappaParams,
    trace_horizon: f64,
    substeps: usize,
    index: usize,
) -> f64 {
    // theta with density (1/2) sin(theta): inverse CDF of (1-cos)/2
    let mut rng = leaf_rng(cfg.seed, Stream::Scatter, (1u64 << 32) + index as u64);
    let u: f64 = rng.gen();
    let theta = (1.0 - 2.0 * u).acos();
    let anchor = Complex64::from_polar(1.0, std::f64::consts::PI - theta);
    let seed = leaf_seed(cfg.seed, Stream::Scatter, (2u64 << 32) + index as u64);
    let driver = match crate::loewner::sample_driving(params, cfg.horizon, cfg.dt, seed) {
        Ok(d) => d.extended(cfg.extension),
        Err(_) => return f64::NAN,
    };
    let trace = match trace_curve_prefix(&driver, trace_horizon, substeps) {
        Ok(t) => t,
        Err(_) => return f64::NAN,
    };
    let mut min_mod = f64::INFINITY;
    for i in 0..trace.len() {
        let w = trace.point(i);
        let num = (w - anchor).norm();
        let den = (w - anchor.conj()).norm();
        if den > 0.0 {
            min_mod = min_mod.min(num / den);
        }
    }
    min_mod
}

pub fn run_k_kappa(cfg: &ExperimentConfig, scatter_dir: Option<&Path>) -> Result<ResultRecord> {
    let params = KappaParams::new(cfg.kappa)?;
    let kc = &cfg.k_kappa;
    if kc.u_sweep.windows(2).any(|w| w[1] >= w[0])
        || kc.disc_u_sweep.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Parameter("u sweeps must be strictly descending".into()));
    }
    let grid = kc.rect.grid(kc.nx, kc.ny)?;
    let policy = ResolutionPolicy::default();
    let hash = cfg.hash();
    let mut record = ResultRecord::new("k-kappa", &hash, cfg.seed);

    // (a) per-path ratio of one-sided conformal mass to euclidean tube mass
    let width_a = kc.u_sweep.len() * 3; // mass_L, mass_R, euclid per u
    let tube_row = |i: usize| -> Vec<f64> {
        let width = width_a;
        let driver = match super::sample_curve(cfg, &params, i) {
            Ok(d) => d,
            Err(_) => return vec![f64::NAN; width],
        };
        let trace = match trace_curve_prefix(&driver, kc.trace_horizon, kc.trace_substeps) {
            Ok(t) => t,
            Err(_) => return vec![f64::NAN; width],
        };
        let res = par_map_indexed(grid.num_cells(), |k| {
            resolve_probe(&driver, grid.center(k), &kc.u_sweep, &policy)
        });
        let area = grid.cell_area();
        let mut row = Vec::with_capacity(width);
        for (ui, &u) in kc.u_sweep.iter().enumerate() {
            let scale = u.powf(-params.codim()) * area;
            let mut l = 0.0;
            let mut r = 0.0;
            for cell in &res {
                if cell.swallowed {
                    continue;
                }
                if cell.hits[ui] == HitOutcome::Hit {
                    match cell.side.side {
                        Some(Side::Left) => l += scale,
                        Some(Side::Right) => r += scale,
                        None => {}
                    }
                }
            }
            let mut e = 0.0;
            for k in 0..grid.num_cells() {
                if trace.dist_to(grid.center(k)) < u {
                    e += scale;
                }
            }
            row.push(l);
            row.push(r);
            row.push(e);
        }
        row
    };
    let rows_a: Vec<Vec<f64>> = match scatter_dir {
        Some(dir) => {
            let mut store =
                ScatterStore::open(&dir.join("k_kappa_tube.scatter.csv"), &hash, width_a)?;
            let done = store.cursor();
            if done < kc.samples {
                let fresh = par_map_indexed(kc.samples - done, |k| tube_row(done + k));
                store.append(fresh)?;
            }
            store.rows()[..kc.samples].to_vec()
        }
        None => par_map_indexed(kc.samples, tube_row),
    };
    let mut k_a = f64::NAN;
    for (ui, &u) in kc.u_sweep.iter().enumerate() {
        let mut ratios = Vec::new();
        for r in &rows_a {
            if r[0].is_nan() {
                continue;
            }
            let e = r[3 * ui + 2];
            if e > 0.0 {
                for off in 0..2 {
                    let m = r[3 * ui + off];
                    if m > 0.0 {
                        ratios.push(m / e);
                    }
                }
            }
        }
        if ratios.is_empty() {
            record.notes.push(format!("no usable tube ratios at u = {u}"));
            continue;
        }
        let med = stats::median(&ratios);
        let ci = stats::bootstrap_median_ci(
            &ratios,
            kc.bootstrap,
            leaf_seed(cfg.seed, Stream::Bootstrap, 100 + ui as u64),
            0.95,
        );
        record
            .estimates
            .push(Estimate::report(format!("k_tube_median[u={u}]"), med).with_ci(ci));
        k_a = med;
    }

    // (b) disc-distance estimator with Richardson extrapolation over the
    // radius sweep (halved per the defining normalization of 2K)
    let mins: Vec<f64> = match scatter_dir {
        Some(dir) => {
            let mut store = ScatterStore::open(&dir.join("k_kappa_disc.scatter.csv"), &hash, 1)?;
            let done = store.cursor();
            if done < kc.disc_samples {
                let fresh = par_map_indexed(kc.disc_samples - done, |k| {
                    vec![disc_min_row(
                        cfg,
                        &params,
                        kc.trace_horizon,
                        kc.trace_substeps,
                        done + k,
                    )]
                });
                store.append(fresh)?;
            }
            store.rows()[..kc.disc_samples].iter().map(|r| r[0]).collect()
        }
        None => par_map_indexed(kc.disc_samples, |i| {
            disc_min_row(cfg, &params, kc.trace_horizon, kc.trace_substeps, i)
        }),
    };
    let valid: Vec<f64> = mins.iter().copied().filter(|m| m.is_finite()).collect();
    record.exclusions.skipped_samples += mins.len() - valid.len();
    let k_of = |sample: &[f64], u: f64| -> f64 {
        let p = sample.iter().filter(|&&m| m < u).count() as f64 / sample.len() as f64;
        u.powf(-params.codim()) * p / 2.0
    };
    let k_levels: Vec<f64> = kc.disc_u_sweep.iter().map(|&u| k_of(&valid, u)).collect();
    for (i, &u) in kc.disc_u_sweep.iter().enumerate() {
        record
            .estimates
            .push(Estimate::report(format!("k_disc[u={u}]"), k_levels[i]));
    }
    let richardson: Vec<f64> = k_levels
        .windows(2)
        .map(|w| 2.0 * w[1] - w[0])
        .collect();
    let k_b = *richardson.last().unwrap_or(&f64::NAN);
    // bootstrap CI for the final Richardson value
    let ci = {
        let mut rng = ChaCha8Rng::seed_from_u64(leaf_seed(cfg.seed, Stream::Bootstrap, 999));
        let mut vals = Vec::with_capacity(kc.bootstrap);
        let mut resample = vec![0.0; valid.len()];
        for _ in 0..kc.bootstrap {
            for slot in resample.iter_mut() {
                *slot = valid[rng.gen_range(0..valid.len())];
            }
            let ks: Vec<f64> = kc.disc_u_sweep.iter().map(|&u| k_of(&resample, u)).collect();
            vals.push(
                ks.windows(2)
                    .map(|w| 2.0 * w[1] - w[0])
                    .last()
                    .unwrap_or(f64::NAN),
            );
        }
        vals.sort_by(f64::total_cmp);
        (vals[kc.bootstrap / 40], vals[kc.bootstrap - 1 - kc.bootstrap / 40])
    };
    record
        .estimates
        .push(Estimate::report("k_disc_extrapolated", k_b).with_ci(ci));
    // Richardson self-consistency: successive estimates inside the interval
    if richardson.len() >= 2 {
        let prev = richardson[richardson.len() - 2];
        record.estimates.push(
            Estimate::report("richardson_consistent", prev)
                .gated_by(prev >= ci.0 && prev <= ci.1),
        );
    }
    record
        .estimates
        .push(Estimate::report("k_positive", k_a.min(k_b)).gated_by(k_a > 0.0 && k_b > 0.0));
    let agree = (k_a / k_b - 1.0).abs() <= kc.agreement_tolerance;
    record.estimates.push(
        Estimate::report("estimator_agreement", k_a / k_b).gated_by(agree),
    );
    if !agree {
        record
            .notes
            .push(format!("estimators disagree: tube {k_a}, disc {k_b}"));
    }
    record.finalize();
    Ok(record)
}
