//! Sharp one-point estimate: the frequency of {T_r(z) < infinity, side q},
//! rescaled by 2 e^{r(2-d)} / G(z), should approach one.

use std::path::Path;

use num_complex::Complex64;

use super::config::ExperimentConfig;
use super::record::{Estimate, ResultRecord, ScatterStore};
use super::stats;
use crate::error::{Error, Result};
use crate::green::green_function;
use crate::loewner::{resolve_probe, HitOutcome, ResolutionPolicy, Side};
use crate::parallel::par_map_indexed;
use crate::params::KappaParams;

// per-(sample, point) state codes stored in the scatter rows
const MISS: f64 = 0.0;
const HIT_LEFT: f64 = 1.0;
const HIT_RIGHT: f64 = 2.0;
const HIT_UNDECIDED: f64 = 3.0;
const UNRESOLVED: f64 = 4.0;
const SWALLOWED: f64 = 5.0;

pub fn run_onepoint_green(
    cfg: &ExperimentConfig,
    scatter_dir: Option<&Path>,
) -> Result<ResultRecord> {
    let params = KappaParams::new(cfg.kappa)?;
    let oc = &cfg.onepoint;
    if oc.points.is_empty() {
        return Err(Error::Config("onepoint.points must be nonempty".into()));
    }
    for &(_, im) in &oc.points {
        if !(im > 0.0) {
            return Err(Error::Parameter("probe points need Im z > 0".into()));
        }
    }
    let points: Vec<Complex64> = oc.points.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
    let thresholds: Vec<f64> = points
        .iter()
        .map(|z| oc.radius_fraction * 2.0 * z.im)
        .collect();
    let policy = ResolutionPolicy::default();
    let hash = cfg.hash();

    let sample_row = |i: usize| -> Vec<f64> {
        let driver = match super::sample_curve(cfg, &params, i) {
            Ok(d) => d,
            Err(_) => return vec![SWALLOWED; points.len()],
        };
        points
            .iter()
            .zip(thresholds.iter())
            .map(|(&z, &thr)| {
                let res = resolve_probe(&driver, z, &[thr], &policy);
                if res.swallowed {
                    return SWALLOWED;
                }
                match res.hits[0] {
                    HitOutcome::Hit => match res.side.side {
                        Some(Side::Left) => HIT_LEFT,
                        Some(Side::Right) => HIT_RIGHT,
                        None => HIT_UNDECIDED,
                    },
                    HitOutcome::Miss => MISS,
                    HitOutcome::Unresolved => UNRESOLVED,
                }
            })
            .collect()
    };
    let rows: Vec<Vec<f64>> = match scatter_dir {
        Some(dir) => {
            let mut store =
                ScatterStore::open(&dir.join("onepoint.scatter.csv"), &hash, points.len())?;
            let done = store.cursor();
            if done < oc.samples {
                let fresh = par_map_indexed(oc.samples - done, |k| sample_row(done + k));
                store.append(fresh)?;
            }
            store.rows()[..oc.samples].to_vec()
        }
        None => par_map_indexed(oc.samples, sample_row),
    };
    aggregate(cfg, &params, &points, &thresholds, &rows, &hash)
}

fn aggregate(
    cfg: &ExperimentConfig,
    params: &KappaParams,
    points: &[Complex64],
    thresholds: &[f64],
    rows: &[Vec<f64>],
    hash: &str,
) -> Result<ResultRecord> {
    let oc = &cfg.onepoint;
    let n = rows.len();
    let mut record = ResultRecord::new("onepoint", hash, cfg.seed);
    let gate = oc.radius_fraction <= oc.report_only_above_fraction;
    if !gate {
        record
            .notes
            .push("radius fraction outside the sharp regime: report-only".into());
    }
    for (p, (&z, &thr)) in points.iter().zip(thresholds.iter()).enumerate() {
        let states: Vec<f64> = rows.iter().map(|r| r[p]).collect();
        let hits_l = states.iter().filter(|&&s| s == HIT_LEFT).count();
        let hits_r = states.iter().filter(|&&s| s == HIT_RIGHT).count();
        let undecided = states.iter().filter(|&&s| s == HIT_UNDECIDED).count();
        let unresolved = states.iter().filter(|&&s| s == UNRESOLVED).count();
        let swallowed = states.iter().filter(|&&s| s == SWALLOWED).count();
        record.exclusions.undecided_side += undecided;
        record.exclusions.unresolved_cr += unresolved;
        record.exclusions.swallowed += swallowed;
        let hits_total = hits_l + hits_r + undecided;
        if hits_total > 0 && (undecided as f64) > oc.undecided_cap * hits_total as f64 {
            return Err(Error::Quality(format!(
                "undecided sides on {undecided}/{hits_total} radius hits at z = {z}"
            )));
        }
        let g = green_function(z, params)?;
        let r_level = -(thr.ln());
        let scale = 2.0 * (r_level * params.codim()).exp() / g;
        for (q, hits) in [("L", hits_l), ("R", hits_r)] {
            let p_hat = hits as f64 / n as f64;
            let ratio = scale * p_hat;
            let se = scale * stats::binomial_se(p_hat, n);
            let label = format!("ratio[z={}+{}i,q={}]", z.re, z.im, q);
            let mut est = Estimate::report(label, ratio).with_se(se);
            if gate {
                let mid = 0.5 * (oc.ratio_band.0 + oc.ratio_band.1);
                let half = 0.5 * (oc.ratio_band.1 - oc.ratio_band.0);
                est = est.gated(mid, half);
            }
            record.estimates.push(est);
        }
        // left/right agreement through the per-sample difference
        let diffs: Vec<f64> = states
            .iter()
            .map(|&s| {
                if s == HIT_LEFT {
                    1.0
                } else if s == HIT_RIGHT {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        let (dmean, dse) = stats::mean_se(&diffs);
        let mut est = Estimate::report(
            format!("lr_diff[z={}+{}i]", z.re, z.im),
            dmean * scale,
        )
        .with_se(dse * scale);
        if gate {
            est = est.gated_by(dmean.abs() <= 2.0 * dse);
        }
        record.estimates.push(est);
    }
    record.finalize();
    Ok(record)
}
