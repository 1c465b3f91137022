//! Forward evaluation of the Loewner maps at interior points.
//!
//! Two routes are provided. [`flow_point`] integrates the Loewner ODE
//! dg/dt = 2/(g - W) together with d(log g')/dt = -2/(g - W)^2 using an
//! embedded Cash-Karp 4(5) pair; the step proposal scales with
//! |g - W|^2 and is capped by the grid cell, and log g' is obtained as a
//! coupled ODE so that no finite differencing happens near the curve.
//! [`SlitWalker`] applies the exact per-cell slit-map update of the
//! piecewise-constant chain; it is the hot path for ensembles and the
//! cross-check route for the ODE.

use num_complex::Complex64;

use super::driving::DrivingPath;
use super::sqrt_upper;
use crate::error::{Error, Result};

/// Below this distance from the driver a point counts as swallowed.
pub const SWALLOW_THRESHOLD: f64 = 1e-7;

/// Result of evaluating the forward flow at one point and time.
#[derive(Debug, Clone, Copy)]
pub struct FlowResult {
    /// g_t(z), or the last computed value if the point was swallowed.
    pub g: Complex64,
    /// log g_t'(z), branch continuous along the flow, starting at 0.
    pub log_dg: Complex64,
    /// Evaluation time actually reached.
    pub t: f64,
    /// Point absorbed before the requested time.
    pub swallowed: bool,
    /// Driver value at the evaluation time.
    pub w_t: f64,
}

#[derive(Clone, Copy)]
struct State {
    g: Complex64,
    ld: Complex64,
}

#[inline]
fn rhs(s: State, w: f64) -> State {
    let u = s.g - w;
    let inv = 2.0 / u;
    State {
        g: inv,
        ld: -inv * inv * 0.5, // -2/u^2
    }
}

// Cash-Karp 4(5) coefficients.
const A: [[f64; 5]; 5] = [
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [0.3, -0.9, 1.2, 0.0, 0.0],
    [-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    0.25,
];

const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-13;
/// Step proposal coefficient for h ~ c |g - W|^2.
const STEP_SCALE: f64 = 0.12;

/// Integrate one grid cell (constant driver `w`) from `state` over `span`.
/// Returns the end state, or the swallow time.
fn integrate_cell(mut state: State, w: f64, span: f64) -> std::result::Result<State, (State, f64)> {
    let mut remaining = span;
    let mut elapsed = 0.0;
    let mut h = {
        let u2 = (state.g - w).norm_sqr();
        (STEP_SCALE * u2).min(remaining)
    };
    while remaining > 0.0 {
        let u2 = (state.g - w).norm_sqr();
        if u2 < SWALLOW_THRESHOLD * SWALLOW_THRESHOLD {
            return Err((state, elapsed));
        }
        h = h.min(remaining).min(STEP_SCALE * u2).max(1e-300);
        // one embedded step
        let k1 = rhs(state, w);
        let mut ks = [k1, k1, k1, k1, k1, k1];
        let mut ok = true;
        for i in 0..5 {
            let mut yg = state.g;
            let mut yl = state.ld;
            for (j, kj) in ks.iter().enumerate().take(i + 1) {
                yg += h * A[i][j] * kj.g;
                yl += h * A[i][j] * kj.ld;
            }
            if (yg - w).norm_sqr() < SWALLOW_THRESHOLD * SWALLOW_THRESHOLD {
                ok = false;
                break;
            }
            ks[i + 1] = rhs(State { g: yg, ld: yl }, w);
        }
        if !ok {
            // a stage hit the singularity: shrink hard
            h *= 0.1;
            if h < 1e-15 * span.max(1.0) {
                return Err((state, elapsed));
            }
            continue;
        }
        let mut g5 = state.g;
        let mut l5 = state.ld;
        let mut g4 = state.g;
        let mut l4 = state.ld;
        for (i, k) in ks.iter().enumerate() {
            g5 += h * B5[i] * k.g;
            l5 += h * B5[i] * k.ld;
            g4 += h * B4[i] * k.g;
            l4 += h * B4[i] * k.ld;
        }
        let err_g = (g5 - g4).norm() / (ATOL + RTOL * g5.norm());
        let err_l = (l5 - l4).norm() / (ATOL + RTOL * (1.0 + l5.norm()));
        let err = err_g.max(err_l);
        if err <= 1.0 {
            state = State { g: g5, ld: l5 };
            remaining -= h;
            elapsed += h;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok(state)
}

/// Evaluate g_t(z) and log g_t'(z) by adaptive Runge-Kutta integration of
/// the Loewner ODE along the piecewise-constant driver.
pub fn flow_point(driver: &DrivingPath, z: Complex64, t: f64) -> Result<FlowResult> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("flow_point requires Im z > 0, got {z}")));
    }
    if !(t >= 0.0) || t > driver.horizon() * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!(
            "time {t} outside driver horizon {}",
            driver.horizon()
        )));
    }
    let mut state = State {
        g: z,
        ld: Complex64::new(0.0, 0.0),
    };
    if t == 0.0 {
        return Ok(FlowResult {
            g: z,
            log_dg: state.ld,
            t: 0.0,
            swallowed: false,
            w_t: driver.value_at(0.0),
        });
    }
    let times = driver.times();
    let mut reached = 0.0;
    for j in 1..=driver.num_cells() {
        let (w, dt, t_end) = driver.cell(j);
        let span = if t < t_end { t - times[j - 1] } else { dt };
        if span <= 0.0 {
            break;
        }
        match integrate_cell(state, w, span) {
            Ok(s) => {
                state = s;
                reached = times[j - 1] + span;
            }
            Err((s, elapsed)) => {
                return Ok(FlowResult {
                    g: s.g,
                    log_dg: s.ld,
                    t: times[j - 1] + elapsed,
                    swallowed: true,
                    w_t: w,
                });
            }
        }
        if t <= t_end {
            break;
        }
    }
    Ok(FlowResult {
        g: state.g,
        log_dg: state.ld,
        t: reached,
        swallowed: false,
        w_t: driver.value_at(t),
    })
}

/// Centred map f_t(z) = g_t(z) - W_t via [`flow_point`].
pub fn centered_map(driver: &DrivingPath, z: Complex64, t: f64) -> Result<Complex64> {
    let fr = flow_point(driver, z, t)?;
    if fr.swallowed {
        return Err(Error::Swallowed { t: fr.t });
    }
    Ok(fr.g - fr.w_t)
}

/// Exact per-cell evaluation of the piecewise-constant Loewner chain at one
/// point. Tracks g and the conformal radius multiplicatively; |g'| is
/// recovered from the pair, so the inner loop runs without transcendental
/// calls.
#[derive(Debug, Clone, Copy)]
pub struct SlitWalker {
    pub g: Complex64,
    /// Conformal radius of the point in the current complement domain.
    pub cr: f64,
    pub swallowed: bool,
}

impl SlitWalker {
    pub fn new(z: Complex64) -> Self {
        Self {
            g: z,
            cr: 2.0 * z.im,
            swallowed: false,
        }
    }

    /// Advance across one cell with driver value `w` and length `dt`.
    #[inline]
    pub fn advance_cell(&mut self, w: f64, dt: f64) {
        let u = self.g - w;
        let u_norm2 = u.norm_sqr();
        if u_norm2 < SWALLOW_THRESHOLD * SWALLOW_THRESHOLD {
            self.swallowed = true;
            return;
        }
        let s = u * u + 4.0 * dt;
        let un = sqrt_upper(s);
        // CR = 2 Im g / |g'| picks up (Im u' / Im u) * |u'| / |u| per cell,
        // since the cell map contributes |u| / |u'| to |g'|
        let ratio = (un.im / u.im) * (s.norm() / u_norm2).sqrt();
        self.g = w + un;
        self.cr *= ratio;
    }

    /// |g_t'(z)|, recovered from the invariant cr = 2 Im g / |g'|.
    #[inline]
    pub fn abs_dg(&self) -> f64 {
        2.0 * self.g.im / self.cr
    }
}

/// Slit-composition route for (g_t(z), log |g_t'(z)|): the direct evaluation
/// through the composed elementary maps.
pub fn flow_point_slit(driver: &DrivingPath, z: Complex64, t: f64) -> Result<(Complex64, f64)> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!(
            "flow_point_slit requires Im z > 0, got {z}"
        )));
    }
    let j_end = driver.cell_containing(t)?;
    let times = driver.times();
    let mut walker = SlitWalker::new(z);
    for j in 1..=j_end {
        let (w, dt, t_end) = driver.cell(j);
        let span = if t < t_end { t - times[j - 1] } else { dt };
        if span <= 0.0 {
            break;
        }
        walker.advance_cell(w, span);
        if walker.swallowed {
            return Err(Error::Swallowed { t: times[j - 1] });
        }
    }
    Ok((walker.g, walker.abs_dg().ln()))
}

/// Conformal radius CR(z, H \ curve([0, t])) = 2 Im g_t(z) / |g_t'(z)|,
/// evaluated through the slit chain.
pub fn conformal_radius(driver: &DrivingPath, z: Complex64, t: f64) -> Result<f64> {
    if t == 0.0 {
        if !(z.im > 0.0) {
            return Err(Error::Domain("conformal_radius requires Im z > 0".into()));
        }
        return Ok(2.0 * z.im);
    }
    let j_end = driver.cell_containing(t)?;
    let times = driver.times();
    let mut walker = SlitWalker::new(z);
    for j in 1..=j_end {
        let (w, dt, t_end) = driver.cell(j);
        let span = if t < t_end { t - times[j - 1] } else { dt };
        if span <= 0.0 {
            break;
        }
        walker.advance_cell(w, span);
        if walker.swallowed {
            return Err(Error::Swallowed { t: times[j - 1] });
        }
    }
    Ok(walker.cr)
}

/// g_t(z) - z, accumulated in increments so that the hydrodynamic residual
/// g_t(z) - z - 2t/z survives at large |z| where direct subtraction would
/// cancel catastrophically.
pub fn flow_delta(driver: &DrivingPath, z: Complex64, t: f64) -> Result<Complex64> {
    let j_end = driver.cell_containing(t)?;
    let times = driver.times();
    let mut v = Complex64::new(0.0, 0.0);
    for j in 1..=j_end {
        let (w, dt, t_end) = driver.cell(j);
        let span = if t < t_end { t - times[j - 1] } else { dt };
        if span <= 0.0 {
            break;
        }
        let a = z + v - w;
        // g' - g = sqrt(a^2 + 4 dt) - a, in cancellation-free form
        v += 4.0 * span / (sqrt_upper(a * a + 4.0 * span) + a);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::KappaParams;

    fn zero_driver(horizon: f64, dt: f64) -> DrivingPath {
        DrivingPath::zero(horizon, dt, 8.0 / 3.0).unwrap()
    }

    /// Closed form for the zero driver: g_t(z) = sqrt(z^2 + 4t).
    fn oracle_g(z: Complex64, t: f64) -> Complex64 {
        sqrt_upper(z * z + 4.0 * t)
    }

    #[test]
    fn identity_at_time_zero() {
        let d = zero_driver(1.0, 1e-2);
        let z = Complex64::new(0.7, 0.4);
        let fr = flow_point(&d, z, 0.0).unwrap();
        assert_eq!(fr.g, z);
        assert_eq!(fr.log_dg, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn matches_slit_oracle_at_one_plus_i() {
        let d = zero_driver(1.0, 1e-3);
        let z = Complex64::new(1.0, 1.0);
        let fr = flow_point(&d, z, 1.0).unwrap();
        let expected = oracle_g(z, 1.0); // sqrt(4 + 2i) = 2.058171 + 0.485868i
        assert!((fr.g - expected).norm() < 1e-8 * expected.norm());
        assert!((fr.g.re - 2.05817103).abs() < 1e-6);
        assert!((fr.g.im - 0.48586827).abs() < 1e-6);
        // log g' = log(z / g)
        let expected_ld = (z / expected).ln();
        assert!((fr.log_dg - expected_ld).norm() < 1e-8);
        assert!(!fr.swallowed);
    }

    #[test]
    fn rk_and_slit_routes_agree_on_random_drivers() {
        let p = KappaParams::new(3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 1e-3, 21).unwrap();
        for &z in &[
            Complex64::new(0.4, 0.9),
            Complex64::new(-1.1, 0.5),
            Complex64::new(2.0, 2.0),
        ] {
            let fr = flow_point(&d, z, 1.0).unwrap();
            let (gs, log_abs) = flow_point_slit(&d, z, 1.0).unwrap();
            assert!(
                (fr.g - gs).norm() < 1e-8 * (1.0 + gs.norm()),
                "g mismatch at z = {z}: {} vs {}",
                fr.g,
                gs
            );
            assert!((fr.log_dg.re - log_abs).abs() < 1e-7);
        }
    }

    #[test]
    fn hydrodynamic_expansion_at_large_z() {
        let p = KappaParams::new(2.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 1e-3, 5).unwrap();
        let z = Complex64::new(700.0, 714.0); // |z| ~ 1e3
        let v = flow_delta(&d, z, 1.0).unwrap();
        let resid = v - 2.0 / z;
        // after removing the 2t/z term the remainder is the O(|z|^-2) tail,
        // whose coefficient is driver-dependent but order one
        assert!(resid.norm() < 20.0 / z.norm_sqr(), "resid = {resid}");
        assert!(resid.norm() > 1e-12 / z.norm_sqr());
    }

    #[test]
    fn imaginary_part_contracts_under_centred_map() {
        let p = KappaParams::new(8.0 / 3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 1e-3, 33).unwrap();
        for &z in &[
            Complex64::new(0.3, 0.8),
            Complex64::new(-0.7, 1.3),
            Complex64::new(1.5, 0.4),
        ] {
            for &t in &[0.25, 0.5, 1.0] {
                let f = centered_map(&d, z, t).unwrap();
                assert!(f.im <= z.im + 1e-12, "Im grew at z = {z}, t = {t}");
                assert!(f.im > 0.0);
            }
        }
    }

    #[test]
    fn conformal_radius_closed_form() {
        let d = zero_driver(1.0, 1e-3);
        let z = Complex64::new(1.0, 1.0);
        // CR at t = 0 is 2 Im z
        assert!((conformal_radius(&d, z, 0.0).unwrap() - 2.0).abs() < 1e-15);
        let g = oracle_g(z, 1.0);
        let dg = z / g;
        let expected = 2.0 * g.im / dg.norm();
        let cr = conformal_radius(&d, z, 1.0).unwrap();
        assert!((cr - expected).abs() < 1e-10 * expected);
        assert!((cr - 1.4531).abs() < 1e-4);
    }

    #[test]
    fn conformal_radius_monotone_along_random_paths() {
        let p = KappaParams::new(3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 1e-3, 8).unwrap();
        let z = Complex64::new(0.2, 0.6);
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let t = k as f64 * 0.1;
            let cr = conformal_radius(&d, z, t).unwrap();
            assert!(cr <= prev + 1e-12);
            prev = cr;
        }
    }

    #[test]
    fn time_beyond_horizon_is_rejected() {
        let d = zero_driver(1.0, 1e-2);
        assert!(flow_point(&d, Complex64::new(0.0, 1.0), 1.5).is_err());
    }

    #[test]
    fn point_on_slit_path_is_swallowed() {
        // With the zero driver, points on the imaginary axis are absorbed
        // once 4t >= |z|^2 brings the slit past them.
        let d = zero_driver(1.0, 1e-3);
        let fr = flow_point(&d, Complex64::new(0.0, 0.5), 1.0).unwrap();
        assert!(fr.swallowed);
        assert!(fr.t <= 0.5 * 0.5 / 4.0 + 1e-2);
    }
}
