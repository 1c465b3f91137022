//! Curve tracing by composition of inverse slit maps.
//!
//! The tip grown during cell k sits at w_k + 2i sqrt(dt_k) in the domain of
//! that cell; welding it back down through the earlier cells yields the
//! curve point in the original coordinates. Cost is quadratic in the cell
//! count, which is why ensemble estimators avoid the trace unless they need
//! Euclidean distances.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::driving::DrivingPath;
use super::sqrt_upper;
use crate::error::{Error, Result};

/// Sampled curve points on a capacity-time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveTrace {
    pub capacity_times: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub driver_seed: u64,
}

impl CurveTrace {
    #[inline]
    pub fn point(&self, i: usize) -> Complex64 {
        Complex64::new(self.points[i].0, self.points[i].1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `z` to the polyline through points `[i0, i1]`.
    pub fn dist_to_range(&self, z: Complex64, i0: usize, i1: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in i0..i1.min(self.len() - 1) {
            let a = self.point(i);
            let b = self.point(i + 1);
            best = best.min(segment_dist(z, a, b));
        }
        if i0 == i1 || i1 >= self.len() {
            best = best.min((z - self.point(i0.min(self.len() - 1))).norm());
        }
        best
    }

    /// Distance from `z` to the whole traced polyline.
    pub fn dist_to(&self, z: Complex64) -> f64 {
        self.dist_to_range(z, 0, self.len() - 1)
    }

    /// Index of the trace node nearest to `z`.
    pub fn nearest_node(&self, z: Complex64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.len() {
            let d = (z - self.point(i)).norm_sqr();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }
}

#[inline]
fn segment_dist(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let denom = ab.norm_sqr();
    if denom == 0.0 {
        return (z - a).norm();
    }
    let t = ((z - a).re * ab.re + (z - a).im * ab.im) / denom;
    let t = t.clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

/// Trace the curve at every grid node.
pub fn trace_curve(driver: &DrivingPath) -> Result<CurveTrace> {
    trace_curve_sampled(driver, 1)
}

/// Trace only up to capacity time `t_max`; welding is quadratic in the cell
/// count, so long extended drivers should be truncated to the horizon the
/// caller actually needs distances for.
pub fn trace_curve_prefix(
    driver: &DrivingPath,
    t_max: f64,
    substeps: usize,
) -> Result<CurveTrace> {
    let n_cells = driver
        .times()
        .iter()
        .filter(|&&t| t > 0.0 && t <= t_max * (1.0 + 1e-12))
        .count();
    trace_cells(driver, n_cells, substeps)
}

/// Trace with `substeps` intermediate points per grid cell. Sub-cell points
/// sit at partial capacity on the cell's slit before welding, which keeps
/// the polyline's sagitta error quadratically small for distance queries.
pub fn trace_curve_sampled(driver: &DrivingPath, substeps: usize) -> Result<CurveTrace> {
    trace_cells(driver, driver.num_cells(), substeps)
}

fn trace_cells(driver: &DrivingPath, n: usize, substeps: usize) -> Result<CurveTrace> {
    let substeps = substeps.max(1);
    let times = driver.times();
    let mut capacity_times = Vec::with_capacity(n * substeps + 1);
    let mut points = Vec::with_capacity(n * substeps + 1);
    capacity_times.push(0.0);
    points.push((0.0, 0.0));
    for k in 1..=n {
        let (wk, dtk, _) = driver.cell(k);
        for s in 1..=substeps {
            let frac = s as f64 / substeps as f64;
            let mut y = Complex64::new(wk, 2.0 * (dtk * frac).sqrt());
            for j in (1..k).rev() {
                let (wj, dtj, _) = driver.cell(j);
                let u = y - wj;
                y = wj + sqrt_upper(u * u - 4.0 * dtj);
            }
            if !y.re.is_finite() || !y.im.is_finite() {
                return Err(Error::Trace { step: k });
            }
            capacity_times.push(times[k - 1] + dtk * frac);
            points.push((y.re, y.im.max(0.0)));
        }
    }
    Ok(CurveTrace {
        capacity_times,
        points,
        driver_seed: driver.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::KappaParams;

    #[test]
    fn zero_driver_traces_the_vertical_slit() {
        let d = DrivingPath::zero(1.0, 1e-3, 4.0).unwrap();
        let trace = trace_curve(&d).unwrap();
        assert_eq!(trace.point(0), Complex64::new(0.0, 0.0));
        let dt: f64 = 1e-3;
        for (i, &t) in trace.capacity_times.iter().enumerate() {
            let p = trace.point(i);
            let expected = Complex64::new(0.0, 2.0 * t.sqrt());
            assert!(
                (p - expected).norm() < 10.0 * dt.sqrt() * 1e-10 + 1e-12,
                "node {i} off the slit: {p} vs {expected}"
            );
        }
        let tip = trace.point(trace.len() - 1);
        assert!((tip.im - 2.0).abs() < 1e-10);
    }

    #[test]
    fn trace_points_stay_in_the_closed_half_plane() {
        let p = KappaParams::new(8.0 / 3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 1e-3, 17).unwrap();
        let trace = trace_curve(&d).unwrap();
        assert_eq!(trace.point(0), Complex64::new(0.0, 0.0));
        for i in 0..trace.len() {
            assert!(trace.point(i).im >= 0.0);
        }
    }

    #[test]
    fn scale_covariance_is_exact_for_dyadic_lambda() {
        let p = KappaParams::new(3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 2e-3, 23).unwrap();
        let scaled = d.scaled(2.0);
        let t1 = trace_curve(&d).unwrap();
        let t2 = trace_curve(&scaled).unwrap();
        assert_eq!(t1.len(), t2.len());
        for i in 0..t1.len() {
            let a = t1.point(i) * 2.0;
            let b = t2.point(i);
            assert_eq!(a.re, b.re, "node {i} re");
            assert_eq!(a.im, b.im, "node {i} im");
        }
    }

    #[test]
    fn scale_covariance_holds_for_generic_lambda() {
        let p = KappaParams::new(2.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 0.5, 5e-3, 29).unwrap();
        let lam = 3.0;
        let scaled = d.scaled(lam);
        let t1 = trace_curve(&d).unwrap();
        let t2 = trace_curve(&scaled).unwrap();
        for i in 0..t1.len() {
            let a = t1.point(i) * lam;
            let b = t2.point(i);
            assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn substeps_refine_the_polyline() {
        let p = KappaParams::new(3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 0.25, 1e-2, 31).unwrap();
        let coarse = trace_curve(&d).unwrap();
        let fine = trace_curve_sampled(&d, 4).unwrap();
        assert_eq!(fine.len(), 4 * (coarse.len() - 1) + 1);
        // every coarse node appears among the fine nodes
        for (i, &t) in coarse.capacity_times.iter().enumerate() {
            let j = 4 * i;
            if i > 0 {
                assert!((fine.capacity_times[j] - t).abs() < 1e-14);
                assert!((fine.point(j) - coarse.point(i)).norm() < 1e-12);
            }
        }
    }
}
