//! Discretized reference measures on grids.
//!
//! Every measure here is a finite atom list on cell centres with
//! cell-area weighting: one-sided conformal Minkowski approximants
//! (rescaled indicator of a small limiting conformal radius on one side of
//! the curve), the Euclidean analogue against the traced polyline, the
//! power-law smoothing sigma^{q,delta}, the boundary Lebesgue approximant
//! delta (2 Im z)^{delta - 1}, pushforwards under the centred map, and the
//! pairwise energy statistic used to monitor uniform integrability.
//!
//! Grid cells whose side or radius could not be resolved are excluded and
//! counted; a run fails when exclusions exceed the configured fraction of
//! the active support. Note one finite-size artefact of the conformal
//! variants: CR(z, H \ curve) <= 2 Im z, so cells within Im z < u/2 enter
//! the indicator regardless of the curve. Keep grids above that strip
//! unless the strip is wanted.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loewner::{
    resolve_probe, CurveTrace, DrivingPath, ProbeResolution, ResolutionPolicy, Side, SlitWalker,
};
use crate::parallel::par_map_indexed;
use crate::params::KappaParams;
use crate::field::free_cov;

/// Rectangular grid [x0, x1] x [y0, y1] split into nx * ny equal cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        let g = Self {
            x0,
            x1,
            y0,
            y1,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 1 || self.ny < 1 {
            return Err(Error::Parameter("grid needs nx, ny >= 1".into()));
        }
        if !(self.x1 > self.x0) || !(self.y1 > self.y0) || self.y0 < 0.0 {
            return Err(Error::Parameter(format!(
                "grid rectangle invalid: [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }

    pub fn cell_area(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64 * ((self.y1 - self.y0) / self.ny as f64)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Centre of the linear cell index (row-major in x, then y).
    pub fn center(&self, k: usize) -> Complex64 {
        let i = k % self.nx;
        let j = k / self.nx;
        let dx = (self.x1 - self.x0) / self.nx as f64;
        let dy = (self.y1 - self.y0) / self.ny as f64;
        Complex64::new(
            self.x0 + (i as f64 + 0.5) * dx,
            self.y0 + (j as f64 + 0.5) * dy,
        )
    }

    /// Exact integral of delta (2y)^{delta - 1} over cell `k` (analytic in
    /// y, constant in x).
    fn lebesgue_cell_weight(&self, k: usize, delta: f64) -> f64 {
        let j = k / self.nx;
        let dy = (self.y1 - self.y0) / self.ny as f64;
        let ylo = self.y0 + j as f64 * dy;
        let yhi = ylo + dy;
        let dx = (self.x1 - self.x0) / self.nx as f64;
        // int delta (2y)^{delta-1} dy = 2^{delta-1} (yhi^delta - ylo^delta)
        dx * 2.0_f64.powf(delta - 1.0) * (yhi.powf(delta) - ylo.powf(delta))
    }
}

/// What a weighted measure discretizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasureKind {
    MinkOneSided { side: Side, u: f64 },
    MinkEuclidean { u: f64 },
    SigmaDelta { side: Side, delta: f64 },
    LebesgueDelta { delta: f64 },
    /// Lebesgue length atoms on a boundary interval.
    BoundaryInterval { lo: f64, hi: f64 },
    Chaos {
        gamma: f64,
        epsilon: f64,
        normalization: String,
    },
    Pushforward { alpha: f64 },
}

impl MeasureKind {
    /// Chaos approximants may carry signed atoms (the critical one does);
    /// every reference measure is nonnegative.
    pub fn allows_signed_atoms(&self) -> bool {
        matches!(self, MeasureKind::Chaos { .. })
    }
}

/// Where a measure came from, for reproducibility audits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub driver_seed: Option<u64>,
    pub config_hash: String,
}

/// Cells (or atoms) dropped during construction, by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub undecided_side: usize,
    pub unresolved_cr: usize,
    pub swallowed: usize,
    pub dropped_atoms: usize,
}

impl ExclusionCounts {
    pub fn total(&self) -> usize {
        self.undecided_side + self.unresolved_cr + self.swallowed + self.dropped_atoms
    }
}

/// An atom list with bookkeeping. The sole measure representation in the
/// crate; no continuum objects anywhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedMeasure {
    pub atoms: Vec<(f64, f64, f64)>,
    pub kind: MeasureKind,
    pub provenance: Provenance,
    pub exclusions: ExclusionCounts,
}

impl WeightedMeasure {
    pub fn new(kind: MeasureKind, provenance: Provenance) -> Self {
        Self {
            atoms: Vec::new(),
            kind,
            provenance,
            exclusions: ExclusionCounts::default(),
        }
    }

    pub fn push(&mut self, point: Complex64, weight: f64) {
        self.atoms.push((point.re, point.im, weight));
    }

    pub fn point(&self, i: usize) -> Complex64 {
        Complex64::new(self.atoms[i].0, self.atoms[i].1)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms[i].2
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.2).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.atoms.iter().enumerate() {
            if !a.0.is_finite() || !a.1.is_finite() || !a.2.is_finite() {
                return Err(Error::Quality(format!("non-finite atom {i}")));
            }
            if !self.kind.allows_signed_atoms() && a.2 < 0.0 {
                return Err(Error::Quality(format!(
                    "negative weight {} on atom {i} of a reference measure",
                    a.2
                )));
            }
        }
        Ok(())
    }

    /// Restrict to atoms satisfying a predicate, preserving bookkeeping.
    pub fn filtered<F: Fn(Complex64, f64) -> bool>(&self, keep: F) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .copied()
                .filter(|a| keep(Complex64::new(a.0, a.1), a.2))
                .collect(),
            kind: self.kind.clone(),
            provenance: self.provenance.clone(),
            exclusions: self.exclusions,
        }
    }
}

/// A curve ready for whole-curve probe queries: pre-extended driver plus
/// the resolution policy and the exclusion cap.
#[derive(Debug, Clone)]
pub struct CurveContext {
    pub driver: DrivingPath,
    pub policy: ResolutionPolicy,
    /// Maximum tolerated fraction of excluded cells among the active
    /// support before construction fails.
    pub exclusion_cap: f64,
}

impl CurveContext {
    pub fn new(driver: DrivingPath) -> Self {
        Self {
            driver,
            policy: ResolutionPolicy::default(),
            exclusion_cap: 0.01,
        }
    }

    /// Resolve every grid cell centre against the curve, in parallel.
    pub fn resolve_grid(&self, grid: &GridSpec, thresholds: &[f64]) -> Vec<ProbeResolution> {
        par_map_indexed(grid.num_cells(), |k| {
            resolve_probe(&self.driver, grid.center(k), thresholds, &self.policy)
        })
    }

    /// Resolve an arbitrary probe list (used by tube-restricted pipelines).
    pub fn resolve_points(&self, points: &[Complex64], thresholds: &[f64]) -> Vec<ProbeResolution> {
        par_map_indexed(points.len(), |k| {
            resolve_probe(&self.driver, points[k], thresholds, &self.policy)
        })
    }
}

fn check_exclusions(
    excl: &ExclusionCounts,
    included: usize,
    cap: f64,
    what: &str,
) -> Result<()> {
    let active = included + excl.total();
    if active > 0 && (excl.total() as f64) > cap * active as f64 {
        return Err(Error::Quality(format!(
            "{what}: {} of {} active cells excluded (cap {:.2}%)",
            excl.total(),
            active,
            cap * 100.0
        )));
    }
    Ok(())
}

/// Assemble the one-sided conformal Minkowski approximant from
/// pre-computed resolutions. `threshold_index` selects which entry of the
/// resolution's hit list corresponds to `u`.
pub fn minkowski_onesided_from(
    resolutions: &[ProbeResolution],
    centers: impl Fn(usize) -> Complex64,
    cell_area: f64,
    u: f64,
    threshold_index: usize,
    side: Side,
    params: &KappaParams,
    cap: f64,
    provenance: Provenance,
) -> Result<WeightedMeasure> {
    let mut m = WeightedMeasure::new(MeasureKind::MinkOneSided { side, u }, provenance);
    let w = u.powf(-params.codim()) * cell_area;
    for (k, res) in resolutions.iter().enumerate() {
        if res.swallowed {
            m.exclusions.swallowed += 1;
            continue;
        }
        match res.hits[threshold_index] {
            crate::loewner::HitOutcome::Hit => match res.side.side {
                Some(s) => {
                    if s == side {
                        m.push(centers(k), w);
                    }
                }
                None => m.exclusions.undecided_side += 1,
            },
            crate::loewner::HitOutcome::Miss => {}
            crate::loewner::HitOutcome::Unresolved => m.exclusions.unresolved_cr += 1,
        }
    }
    check_exclusions(&m.exclusions, m.len(), cap, "minkowski_onesided")?;
    Ok(m)
}

/// One-sided conformal Minkowski approximant m^{q,u} on a grid.
pub fn minkowski_onesided(
    ctx: &CurveContext,
    grid: &GridSpec,
    u: f64,
    side: Side,
    params: &KappaParams,
) -> Result<WeightedMeasure> {
    if !(u > 0.0) {
        return Err(Error::Parameter(format!("u must be positive, got {u}")));
    }
    grid.validate()?;
    let res = ctx.resolve_grid(grid, &[u]);
    minkowski_onesided_from(
        &res,
        |k| grid.center(k),
        grid.cell_area(),
        u,
        0,
        side,
        params,
        ctx.exclusion_cap,
        Provenance {
            driver_seed: Some(ctx.driver.seed()),
            config_hash: String::new(),
        },
    )
}

/// Euclidean Minkowski approximant: rescaled indicator of distance-u tubes
/// around the traced polyline, no side restriction.
pub fn minkowski_euclidean(
    trace: &CurveTrace,
    grid: &GridSpec,
    u: f64,
    params: &KappaParams,
) -> Result<WeightedMeasure> {
    if !(u > 0.0) {
        return Err(Error::Parameter(format!("u must be positive, got {u}")));
    }
    grid.validate()?;
    // the trace must have escaped the grid's neighbourhood, otherwise
    // distances near the top are still falling
    let tip = trace.point(trace.len() - 1);
    let corner_near = tip.re.clamp(grid.x0, grid.x1);
    let corner_im = tip.im.clamp(grid.y0, grid.y1);
    let gap = (tip - Complex64::new(corner_near, corner_im)).norm();
    if gap < 10.0 * u {
        return Err(Error::Quality(format!(
            "trace tip within {gap:.3} of the grid; distances not stabilized at u = {u}"
        )));
    }
    let mut m = WeightedMeasure::new(
        MeasureKind::MinkEuclidean { u },
        Provenance {
            driver_seed: Some(trace.driver_seed),
            config_hash: String::new(),
        },
    );
    let w = u.powf(-params.codim()) * grid.cell_area();
    let hits = par_map_indexed(grid.num_cells(), |k| trace.dist_to(grid.center(k)) < u);
    for (k, hit) in hits.into_iter().enumerate() {
        if hit {
            m.push(grid.center(k), w);
        }
    }
    Ok(m)
}

/// Power-law smoothing sigma^{q,delta}: weight delta CR^{d-2+delta} per
/// side-q cell.
pub fn sigma_delta_measure(
    ctx: &CurveContext,
    grid: &GridSpec,
    delta: f64,
    side: Side,
    params: &KappaParams,
) -> Result<WeightedMeasure> {
    if !(delta > 0.0 && delta < params.gamma / 2.0) {
        return Err(Error::Parameter(format!(
            "delta must lie in (0, gamma/2) = (0, {}), got {delta}",
            params.gamma / 2.0
        )));
    }
    grid.validate()?;
    let res = ctx.resolve_grid(grid, &[]);
    sigma_delta_from(&res, |k| grid.center(k), grid.cell_area(), delta, side, params, ctx)
}

/// As [`sigma_delta_measure`] from pre-computed resolutions.
pub fn sigma_delta_from(
    resolutions: &[ProbeResolution],
    centers: impl Fn(usize) -> Complex64,
    cell_area: f64,
    delta: f64,
    side: Side,
    params: &KappaParams,
    ctx: &CurveContext,
) -> Result<WeightedMeasure> {
    let mut m = WeightedMeasure::new(
        MeasureKind::SigmaDelta { side, delta },
        Provenance {
            driver_seed: Some(ctx.driver.seed()),
            config_hash: String::new(),
        },
    );
    let expo = params.d - 2.0 + delta;
    for (k, res) in resolutions.iter().enumerate() {
        if res.swallowed {
            m.exclusions.swallowed += 1;
            continue;
        }
        if !res.cr_resolved {
            m.exclusions.unresolved_cr += 1;
            continue;
        }
        match res.side.side {
            Some(s) => {
                if s == side {
                    m.push(centers(k), delta * res.cr.powf(expo) * cell_area);
                }
            }
            None => m.exclusions.undecided_side += 1,
        }
    }
    check_exclusions(&m.exclusions, m.len(), ctx.exclusion_cap, "sigma_delta")?;
    Ok(m)
}

/// Boundary Lebesgue approximant delta (2 Im z)^{delta-1} dz with exact
/// per-cell integrals.
pub fn lebesgue_delta_measure(grid: &GridSpec, delta: f64) -> Result<WeightedMeasure> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    grid.validate()?;
    let mut m = WeightedMeasure::new(
        MeasureKind::LebesgueDelta { delta },
        Provenance::default(),
    );
    for k in 0..grid.num_cells() {
        m.push(grid.center(k), grid.lebesgue_cell_weight(k, delta));
    }
    Ok(m)
}

/// Push a measure forward through the centred map at time `t_map`, with
/// weights multiplied by |f'(z)|^{-alpha} (alpha = gamma^2/8 for the chaos
/// change of coordinates, 0 for the plain pushforward).
pub fn pushforward(
    measure: &WeightedMeasure,
    driver: &DrivingPath,
    t_map: f64,
    alpha: f64,
) -> Result<WeightedMeasure> {
    let times = driver.times();
    let j_end = driver.cell_containing(t_map.max(f64::MIN_POSITIVE))?;
    let w_t = driver.value_at(t_map);
    let moved = par_map_indexed(measure.len(), |i| {
        let z = measure.point(i);
        if t_map == 0.0 {
            return Some((z, measure.weight(i)));
        }
        let mut walker = SlitWalker::new(z);
        for j in 1..=j_end {
            let (w, dt, t_end) = driver.cell(j);
            let span = if t_map < t_end {
                t_map - times[j - 1]
            } else {
                dt
            };
            if span <= 0.0 {
                break;
            }
            walker.advance_cell(w, span);
            if walker.swallowed {
                return None;
            }
        }
        let factor = if alpha == 0.0 {
            1.0
        } else {
            walker.abs_dg().powf(-alpha)
        };
        Some((walker.g - w_t, measure.weight(i) * factor))
    });
    let mut out = WeightedMeasure::new(
        MeasureKind::Pushforward { alpha },
        measure.provenance.clone(),
    );
    out.exclusions = measure.exclusions;
    for item in moved {
        match item {
            Some((p, w)) => out.push(p, w),
            None => out.exclusions.dropped_atoms += 1,
        }
    }
    Ok(out)
}

/// Off-diagonal pairwise energy sum_{i != j} e^{beta G(z_i, z_j)} w_i w_j.
/// Pairs at the reflection singularity are skipped and counted. The
/// diagonal is excluded by construction; callers comparing against
/// continuum energies must budget for that omission.
pub struct EnergyEstimate {
    pub value: f64,
    pub skipped_pairs: usize,
}

pub fn energy_estimate(measure: &WeightedMeasure, beta_tilde: f64) -> Result<EnergyEstimate> {
    if !(beta_tilde > 0.0) {
        return Err(Error::Parameter(format!(
            "beta must be positive, got {beta_tilde}"
        )));
    }
    let n = measure.len();
    let rows = par_map_indexed(n, |i| {
        let zi = measure.point(i);
        let wi = measure.weight(i);
        let mut acc = 0.0;
        let mut skipped = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let zj = measure.point(j);
            match free_cov(zi, zj) {
                Ok(g) => acc += (beta_tilde * g).exp() * wi * measure.weight(j),
                Err(_) => skipped += 1,
            }
        }
        (acc, skipped)
    });
    let mut value = 0.0;
    let mut skipped = 0;
    for (v, s) in rows {
        value += v;
        skipped += s;
    }
    Ok(EnergyEstimate {
        value,
        skipped_pairs: skipped,
    })
}

/// Write atoms as CSV rows `re,im,weight` with shortest-roundtrip floats.
pub fn write_atoms_csv<W: std::io::Write>(m: &WeightedMeasure, mut out: W) -> Result<()> {
    writeln!(out, "re,im,weight")?;
    for a in &m.atoms {
        writeln!(out, "{},{},{}", a.0, a.1, a.2)?;
    }
    Ok(())
}

/// Read atoms back from [`write_atoms_csv`] output.
pub fn read_atoms_csv<R: std::io::BufRead>(
    input: R,
    kind: MeasureKind,
    provenance: Provenance,
) -> Result<WeightedMeasure> {
    let mut m = WeightedMeasure::new(kind, provenance);
    for (ln, line) in input.lines().enumerate() {
        let line = line?;
        if ln == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = || -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| Error::Config(format!("short row {ln}")))?
                .parse()
                .map_err(|e| Error::Config(format!("row {ln}: {e}")))
        };
        let re = next()?;
        let im = next()?;
        let w = next()?;
        m.atoms.push((re, im, w));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loewner::ExtensionPolicy;

    fn long_zero_ctx() -> CurveContext {
        CurveContext::new(DrivingPath::zero_extended(1.0, 1e-3, 13, 4.0).unwrap())
    }

    fn sampled_ctx(seed: u64) -> CurveContext {
        let p = KappaParams::new(8.0 / 3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 1.0, 2e-3, seed)
            .unwrap()
            .extended(ExtensionPolicy::default());
        CurveContext::new(d)
    }

    #[test]
    fn lebesgue_mass_is_exact() {
        // K = [0,1] x (0,1]: total mass 2^{delta-1}
        let grid = GridSpec::new(0.0, 1.0, 0.0, 1.0, 10, 50).unwrap();
        for &delta in &[1.0, 0.5, 1e-3] {
            let m = lebesgue_delta_measure(&grid, delta).unwrap();
            let expected = 2.0_f64.powf(delta - 1.0);
            assert!(
                (m.total_mass() - expected).abs() < 1e-12,
                "delta {delta}: {} vs {expected}",
                m.total_mass()
            );
        }
        // delta = 1e-3 within 0.1% of 1/2 (half the interval length)
        let m = lebesgue_delta_measure(&grid, 1e-3).unwrap();
        assert!((m.total_mass() - 0.5).abs() / 0.5 < 1e-3);
    }

    #[test]
    fn lebesgue_mass_is_additive_over_disjoint_rectangles() {
        let delta = 0.13;
        let whole = GridSpec::new(-1.0, 1.0, 0.0, 1.0, 40, 30).unwrap();
        let left = GridSpec::new(-1.0, 0.0, 0.0, 1.0, 20, 30).unwrap();
        let right = GridSpec::new(0.0, 1.0, 0.0, 1.0, 20, 30).unwrap();
        let mw = lebesgue_delta_measure(&whole, delta).unwrap().total_mass();
        let ml = lebesgue_delta_measure(&left, delta).unwrap().total_mass();
        let mr = lebesgue_delta_measure(&right, delta).unwrap().total_mass();
        assert!((mw - ml - mr).abs() < 1e-12 * mw);
    }

    #[test]
    fn one_sided_weights_and_mirror_symmetry_on_the_slit() {
        let ctx = long_zero_ctx();
        let params = KappaParams::new(4.0).unwrap();
        // grid hugging the slit i[0,2], symmetric about the imaginary axis
        let grid = GridSpec::new(-0.5, 0.5, 0.5, 1.5, 20, 10).unwrap();
        let u = 0.4;
        let right = minkowski_onesided(&ctx, &grid, u, Side::Right, &params).unwrap();
        let left = minkowski_onesided(&ctx, &grid, u, Side::Left, &params).unwrap();
        assert!(!right.is_empty());
        assert_eq!(right.len(), left.len());
        let w = u.powf(-params.codim()) * grid.cell_area();
        for i in 0..right.len() {
            assert!((right.weight(i) - w).abs() < 1e-14 * w);
        }
        // mirror: atoms of left are reflections of atoms of right
        let mut lefts: Vec<(i64, i64)> = left
            .atoms
            .iter()
            .map(|a| ((-a.0 * 1e9).round() as i64, (a.1 * 1e9).round() as i64))
            .collect();
        let mut rights: Vec<(i64, i64)> = right
            .atoms
            .iter()
            .map(|a| ((a.0 * 1e9).round() as i64, (a.1 * 1e9).round() as i64))
            .collect();
        lefts.sort_unstable();
        rights.sort_unstable();
        assert_eq!(lefts, rights);
        assert!((right.total_mass() - left.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn sigma_weights_follow_the_power_law() {
        let ctx = long_zero_ctx();
        let params = KappaParams::new(4.0).unwrap();
        let grid = GridSpec::new(0.3, 0.9, 0.5, 1.1, 3, 3).unwrap();
        let delta = 0.05;
        let m = sigma_delta_measure(&ctx, &grid, delta, Side::Right, &params).unwrap();
        assert_eq!(m.len(), grid.num_cells());
        // weights are delta * CR^{d-2+delta} * area with CR from the walker;
        // doubling CR scales the weight by 2^{d-2+delta}
        let expo = params.d - 2.0 + delta;
        for i in 0..m.len() {
            let cr = (m.weight(i) / (delta * grid.cell_area())).powf(1.0 / expo);
            assert!(cr > 0.0 && cr < 2.0 * grid.center(0).im + 3.0);
        }
        // delta out of range rejected
        assert!(sigma_delta_measure(&ctx, &grid, params.gamma / 2.0, Side::Right, &params).is_err());
    }

    #[test]
    fn pushforward_conserves_mass_at_alpha_zero_and_matches_slit_oracle() {
        let params = KappaParams::new(3.0).unwrap();
        let driver = DrivingPath::zero(1.0, 1e-3, params.kappa).unwrap();
        let mut m = WeightedMeasure::new(
            MeasureKind::BoundaryInterval { lo: 0.0, hi: 1.0 },
            Provenance::default(),
        );
        m.push(Complex64::new(1.0, 1.0), 0.7);
        m.push(Complex64::new(-0.5, 1.5), 0.3);
        let plain = pushforward(&m, &driver, 1.0, 0.0).unwrap();
        assert!((plain.total_mass() - m.total_mass()).abs() < 1e-14);
        // atom at 1+i maps to sqrt((1+i)^2 + 4), weight scaled by |g'|^{-alpha}
        let alpha = params.gamma * params.gamma / 8.0;
        let weighted = pushforward(&m, &driver, 1.0, alpha).unwrap();
        let g = Complex64::new(2.0581710272714924, 0.48586827175664565);
        assert!((weighted.point(0) - g).norm() < 1e-9);
        let expected_w = 0.7 * 1.162862693573092;
        assert!((weighted.weight(0) - expected_w).abs() < 1e-9);
        // identity map at t = 0
        let id = pushforward(&m, &driver, 0.0, alpha).unwrap();
        assert_eq!(id.point(0), m.point(0));
        assert_eq!(id.weight(0), m.weight(0));
    }

    #[test]
    fn energy_of_two_atoms_matches_hand_computation() {
        let mut m = WeightedMeasure::new(
            MeasureKind::BoundaryInterval { lo: 0.0, hi: 1.0 },
            Provenance::default(),
        );
        m.push(Complex64::new(0.0, 2.0), 1.0);
        m.push(Complex64::new(0.0, 1.0), 1.0);
        let e = energy_estimate(&m, 1.0).unwrap();
        assert!((e.value - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(e.skipped_pairs, 0);
        // single atom: empty off-diagonal sum
        let mut single = WeightedMeasure::new(
            MeasureKind::BoundaryInterval { lo: 0.0, hi: 1.0 },
            Provenance::default(),
        );
        single.push(Complex64::new(0.0, 1.0), 1.0);
        assert_eq!(energy_estimate(&single, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn lebesgue_energy_is_uniformly_bounded_in_delta() {
        let grid = GridSpec::new(-1.0, 1.0, 0.0, 1.0, 30, 30).unwrap();
        let mut values = Vec::new();
        for &delta in &[0.1, 0.03, 0.01] {
            let m = lebesgue_delta_measure(&grid, delta).unwrap();
            values.push(energy_estimate(&m, 0.4).unwrap().value);
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0_f64, f64::max);
        assert!(hi / lo < 2.0, "energy swept {values:?}");
    }

    #[test]
    fn koebe_inclusion_of_conformal_tubes_in_euclidean_tubes() {
        let params = KappaParams::new(8.0 / 3.0).unwrap();
        let ctx = sampled_ctx(301);
        let trace = crate::loewner::trace_curve_sampled(&ctx.driver, 2).unwrap();
        let grid = GridSpec::new(-1.2, 1.2, 0.3, 1.8, 24, 15).unwrap();
        let u = 0.15;
        let e = minkowski_euclidean(&trace, &grid, u, &params).unwrap();
        let euclid: std::collections::HashSet<(i64, i64)> = e
            .atoms
            .iter()
            .map(|a| ((a.0 * 1e9).round() as i64, (a.1 * 1e9).round() as i64))
            .collect();
        for side in [Side::Left, Side::Right] {
            let m = minkowski_onesided(&ctx, &grid, u, side, &params).unwrap();
            for a in &m.atoms {
                let key = ((a.0 * 1e9).round() as i64, (a.1 * 1e9).round() as i64);
                assert!(
                    euclid.contains(&key),
                    "CR-hit cell ({}, {}) missing from the euclidean tube",
                    a.0,
                    a.1
                );
            }
        }
    }

    #[test]
    fn atoms_round_trip_through_csv_bit_exactly() {
        let ctx = sampled_ctx(302);
        let params = KappaParams::new(8.0 / 3.0).unwrap();
        let grid = GridSpec::new(-1.0, 1.0, 0.5, 1.5, 10, 6).unwrap();
        let m = sigma_delta_measure(&ctx, &grid, 0.05, Side::Left, &params).unwrap();
        let mut buf = Vec::new();
        write_atoms_csv(&m, &mut buf).unwrap();
        let back = read_atoms_csv(
            std::io::BufReader::new(buf.as_slice()),
            m.kind.clone(),
            m.provenance.clone(),
        )
        .unwrap();
        assert_eq!(m.atoms, back.atoms);
    }

    #[test]
    fn euclidean_tube_requires_an_escaped_trace() {
        let params = KappaParams::new(8.0 / 3.0).unwrap();
        // short horizon: the tip is still inside the grid's neighbourhood
        let p = KappaParams::new(8.0 / 3.0).unwrap();
        let d = crate::loewner::sample_driving(&p, 0.05, 1e-3, 1).unwrap();
        let trace = crate::loewner::trace_curve(&d).unwrap();
        let grid = GridSpec::new(-1.0, 1.0, 0.1, 1.0, 10, 10).unwrap();
        assert!(minkowski_euclidean(&trace, &grid, 0.2, &params).is_err());
    }
}
