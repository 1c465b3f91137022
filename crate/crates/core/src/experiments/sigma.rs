//! Convergence of the power-law smoothing to a multiple of the one-sided
//! content: per-path ratios sigma^{q,delta}(D) / m^{q,u}(D) should approach
//! 1 - kappa/8 along a joint (delta, u) refinement.

use std::path::Path;

use super::config::ExperimentConfig;
use super::record::{Estimate, ResultRecord, ScatterStore};
use super::stats;
use crate::error::{Error, Result};
use crate::loewner::{resolve_probe, HitOutcome, ResolutionPolicy, Side};
use crate::parallel::par_map_indexed;
use crate::params::KappaParams;
use crate::seeds::{leaf_seed, Stream};

pub fn run_sigma_convergence(
    cfg: &ExperimentConfig,
    scatter_dir: Option<&Path>,
) -> Result<ResultRecord> {
    let params = KappaParams::new(cfg.kappa)?;
    let sc = &cfg.sigma_conv;
    if sc.sweep.is_empty() {
        return Err(Error::Config("sigma_conv.sweep must be nonempty".into()));
    }
    for &(delta, u) in &sc.sweep {
        if !(delta > 0.0 && delta < params.gamma / 2.0) {
            return Err(Error::Parameter(format!(
                "delta {delta} outside (0, gamma/2)"
            )));
        }
        if !(u > 0.0) {
            return Err(Error::Parameter(format!("u {u} must be positive")));
        }
    }
    let grid = sc.rect.grid(sc.nx, sc.ny)?;
    // one walker pass serves every sweep point: thresholds are the distinct
    // u values in descending order
    let mut thresholds: Vec<f64> = sc.sweep.iter().map(|p| p.1).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let u_index: Vec<usize> = sc
        .sweep
        .iter()
        .map(|p| thresholds.iter().position(|&t| t == p.1).unwrap())
        .collect();
    let policy = ResolutionPolicy::default();
    let hash = cfg.hash();
    let width = 4 * sc.sweep.len(); // sigma_L, mink_L, sigma_R, mink_R

    let row_fn = |i: usize| -> Vec<f64> {
        let driver = match super::sample_curve(cfg, &params, i) {
            Ok(d) => d,
            Err(_) => return vec![f64::NAN; width],
        };
        let res = par_map_indexed(grid.num_cells(), |k| {
            resolve_probe(&driver, grid.center(k), &thresholds, &policy)
        });
        let mut excluded = 0usize;
        let area = grid.cell_area();
        let mut row = vec![0.0_f64; width];
        for cell in &res {
            if cell.swallowed || !cell.cr_resolved {
                excluded += 1;
                continue;
            }
            let side = match cell.side.side {
                Some(s) => s,
                None => {
                    excluded += 1;
                    continue;
                }
            };
            for (sp, &(delta, u)) in sc.sweep.iter().enumerate() {
                let sigma_w = delta * cell.cr.powf(params.d - 2.0 + delta) * area;
                let hit = cell.hits[u_index[sp]] == HitOutcome::Hit;
                let mink_w = if hit {
                    u.powf(-params.codim()) * area
                } else {
                    0.0
                };
                let base = 4 * sp + if side == Side::Left { 0 } else { 2 };
                row[base] += sigma_w;
                row[base + 1] += mink_w;
            }
        }
        if excluded as f64 > cfg.exclusion_cap * grid.num_cells() as f64 {
            return vec![f64::NAN; width];
        }
        row
    };

    let rows: Vec<Vec<f64>> = match scatter_dir {
        Some(dir) => {
            let mut store =
                ScatterStore::open(&dir.join("sigma_conv.scatter.csv"), &hash, width)?;
            let done = store.cursor();
            if done < sc.samples {
                let fresh = par_map_indexed(sc.samples - done, |k| row_fn(done + k));
                store.append(fresh)?;
            }
            store.rows()[..sc.samples].to_vec()
        }
        None => par_map_indexed(sc.samples, row_fn),
    };

    let mut record = ResultRecord::new("sigma-conv", &hash, cfg.seed);
    record.exclusions.skipped_samples = rows.iter().filter(|r| r[0].is_nan()).count();
    let target = 1.0 - params.kappa / 8.0;
    let last = sc.sweep.len() - 1;
    for (sp, &(delta, u)) in sc.sweep.iter().enumerate() {
        for (q, off) in [("L", 0usize), ("R", 2usize)] {
            let ratios: Vec<f64> = rows
                .iter()
                .filter(|r| !r[0].is_nan() && r[4 * sp + off + 1] > 0.0)
                .map(|r| r[4 * sp + off] / r[4 * sp + off + 1])
                .collect();
            if ratios.is_empty() {
                record
                    .notes
                    .push(format!("no usable paths at (delta={delta}, u={u}, q={q})"));
                continue;
            }
            let med = stats::median(&ratios);
            let ci = stats::bootstrap_median_ci(
                &ratios,
                sc.bootstrap,
                leaf_seed(cfg.seed, Stream::Bootstrap, (sp * 2 + off) as u64),
                0.95,
            );
            let mut est = Estimate::report(
                format!("sigma_ratio[delta={delta},u={u},q={q}]"),
                med,
            )
            .with_ci(ci);
            if sp == last {
                est = est.gated(target, sc.tolerance * target);
            }
            record.estimates.push(est);
        }
    }
    record
        .estimates
        .push(Estimate::report("target", target));
    record.finalize();
    Ok(record)
}
