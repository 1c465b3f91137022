//! Sampled Brownian driving functions on a capacity-time grid.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::KappaParams;
use crate::seeds::{leaf_rng, Stream};

/// How a driving path is continued past its initial horizon when a probe
/// needs more capacity time to resolve.
///
/// Each extension block doubles the covered horizon. With `coarsen` set the
/// grid step doubles along with it, so the total cell count grows only
/// linearly in the number of doublings while the horizon grows
/// geometrically.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtensionPolicy {
    pub max_doublings: u32,
    pub coarsen: bool,
}

impl Default for ExtensionPolicy {
    fn default() -> Self {
        Self {
            max_doublings: 13,
            coarsen: true,
        }
    }
}

/// A discretized driving function W on an ascending capacity-time grid.
///
/// The driver is interpreted as piecewise constant: on the cell
/// `(times[j-1], times[j]]` it takes the value `values[j-1]`. All Loewner
/// objects in this module are exact functions of that piecewise-constant
/// chain; convergence to SLE is in the grid step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrivingPath {
    times: Vec<f64>,
    values: Vec<f64>,
    kappa: f64,
    seed: u64,
    /// Index one past the last cell of the originally sampled horizon
    /// (extension cells follow it).
    base_len: usize,
}

/// Draw a driving path with i.i.d. Gaussian increments of variance
/// kappa * dt, deterministically from `seed`.
pub fn sample_driving(
    params: &KappaParams,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<DrivingPath> {
    if !(horizon > 0.0) || !(dt > 0.0) || dt > horizon {
        return Err(Error::Parameter(format!(
            "need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}"
        )));
    }
    let n = (horizon / dt).round().max(1.0) as usize;
    let n = if (n as f64) * dt < horizon - 1e-12 * horizon {
        n + 1
    } else {
        n
    };
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    times.push(0.0);
    values.push(0.0);
    let mut rng = leaf_rng(seed, Stream::Driver, 0);
    let mut w = 0.0;
    for j in 1..=n {
        let t = if j == n { horizon } else { j as f64 * dt };
        let step = t - times[j - 1];
        let xi: f64 = StandardNormal.sample(&mut rng);
        w += (params.kappa * step).sqrt() * xi;
        times.push(t);
        values.push(w);
    }
    Ok(DrivingPath {
        times,
        values,
        kappa: params.kappa,
        seed,
        base_len: n,
    })
}

impl DrivingPath {
    /// Build a path directly from grid data. Used for deterministic drivers
    /// in tests and oracles (for example W = 0).
    pub fn from_grid(times: Vec<f64>, values: Vec<f64>, kappa: f64, seed: u64) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::Parameter(
                "times and values must have equal length >= 2".into(),
            ));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Parameter("grid must start at t = 0 with W = 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("times must be strictly increasing".into()));
        }
        let base_len = times.len() - 1;
        Ok(Self {
            times,
            values,
            kappa,
            seed,
            base_len,
        })
    }

    /// Zero driver on a uniform grid: the deterministic vertical-slit chain.
    pub fn zero(horizon: f64, dt: f64, kappa: f64) -> Result<Self> {
        let n = (horizon / dt).round().max(1.0) as usize;
        let times = (0..=n).map(|j| j as f64 * horizon / n as f64).collect();
        let values = vec![0.0; n + 1];
        Self::from_grid(times, values, kappa, 0)
    }

    /// Zero driver covering a geometrically extended horizon, on the same
    /// block layout that [`DrivingPath::extended`] produces. Deterministic
    /// oracle for whole-curve quantities.
    pub fn zero_extended(h0: f64, dt: f64, doublings: u32, kappa: f64) -> Result<Self> {
        let mut times = vec![0.0];
        let mut t = 0.0;
        while t < h0 - dt / 2.0 {
            t += dt;
            times.push(t);
        }
        for k in 1..=doublings {
            let step = dt * (1u64 << (k - 1)) as f64;
            let end = h0 * (1u64 << k) as f64;
            while t < end - step / 2.0 {
                t += step;
                times.push(t);
            }
        }
        let values = vec![0.0; times.len()];
        Self::from_grid(times, values, kappa, 0)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of grid cells.
    pub fn num_cells(&self) -> usize {
        self.times.len() - 1
    }

    /// Final grid time.
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Horizon of the originally sampled path, before any extension.
    pub fn base_horizon(&self) -> f64 {
        self.times[self.base_len]
    }

    /// Cell data for cell `j` in `1..=num_cells()`: (w, dt, t_end) where `w`
    /// is the driver value used on the cell.
    #[inline]
    pub fn cell(&self, j: usize) -> (f64, f64, f64) {
        (
            self.values[j - 1],
            self.times[j] - self.times[j - 1],
            self.times[j],
        )
    }

    /// Driver value at time `t` under the piecewise-constant-left convention
    /// (grid nodes take their nodal value).
    pub fn value_at(&self, t: f64) -> f64 {
        match self
            .times
            .binary_search_by(|probe| probe.total_cmp(&t))
        {
            Ok(j) => self.values[j],
            Err(j) => {
                // t lies in cell j, which uses the left nodal value
                self.values[(j - 1).min(self.values.len() - 1)]
            }
        }
    }

    /// Index of the cell containing `t` (1-based), requiring `t` within the
    /// horizon.
    pub fn cell_containing(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || t > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::Parameter(format!(
                "time {t} outside driver horizon {}",
                self.horizon()
            )));
        }
        let j = match self.times.binary_search_by(|probe| probe.total_cmp(&t)) {
            Ok(j) => j,
            Err(j) => j,
        };
        Ok(j.clamp(1, self.num_cells()))
    }

    /// Extend by doubling blocks with fresh Brownian increments, derived
    /// deterministically from the path seed. Returns a new path; the
    /// original grid is a prefix of the result.
    pub fn extended(&self, policy: ExtensionPolicy) -> Self {
        let mut times = self.times.clone();
        let mut values = self.values.clone();
        let h0 = self.base_horizon();
        let dt0 = self.times[1] - self.times[0];
        let mut w = *values.last().unwrap();
        // skip blocks the path already covers (idempotent re-extension)
        let mut covered = self.horizon();
        for k in 1..=policy.max_doublings {
            let block_end = h0 * (1u64 << k) as f64;
            if block_end <= covered * (1.0 + 1e-12) {
                continue;
            }
            let block_start = covered;
            let step = if policy.coarsen {
                dt0 * (1u64 << (k - 1)) as f64
            } else {
                dt0
            };
            let cells = ((block_end - block_start) / step).ceil().max(1.0) as usize;
            let mut rng = leaf_rng(self.seed, Stream::DriverExtension, k as u64);
            for c in 1..=cells {
                let t = if c == cells {
                    block_end
                } else {
                    block_start + c as f64 * step
                };
                let dt = t - times.last().unwrap();
                let xi: f64 = StandardNormal.sample(&mut rng);
                w += (self.kappa * dt).sqrt() * xi;
                times.push(t);
                values.push(w);
            }
            covered = block_end;
        }
        Self {
            times,
            values,
            kappa: self.kappa,
            seed: self.seed,
            base_len: self.base_len,
        }
    }

    /// Refine every cell in two by Brownian-bridge midpoints, drawn from the
    /// refinement stream at the given level. Two refinements of the same
    /// path at the same level are identical.
    pub fn refined(&self, level: u64) -> Self {
        let mut rng = leaf_rng(self.seed, Stream::DriverRefinement, level);
        let n = self.num_cells();
        let mut times = Vec::with_capacity(2 * n + 1);
        let mut values = Vec::with_capacity(2 * n + 1);
        times.push(0.0);
        values.push(0.0);
        for j in 1..=n {
            let t0 = self.times[j - 1];
            let t1 = self.times[j];
            let w0 = self.values[j - 1];
            let w1 = self.values[j];
            let tm = 0.5 * (t0 + t1);
            let xi: f64 = StandardNormal.sample(&mut rng);
            // bridge: mean is the linear interpolant, variance kappa (t1-t0)/4
            let wm = 0.5 * (w0 + w1) + (self.kappa * (t1 - t0) / 4.0).sqrt() * xi;
            times.push(tm);
            values.push(wm);
            times.push(t1);
            values.push(w1);
        }
        Self {
            times,
            values,
            kappa: self.kappa,
            seed: self.seed,
            base_len: 2 * self.base_len,
        }
    }

    /// The path scaled by lambda: capacity times by lambda^2, values by
    /// lambda. The Loewner chain commutes with this rescaling.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t * lambda * lambda).collect(),
            values: self.values.iter().map(|w| w * lambda).collect(),
            kappa: self.kappa,
            seed: self.seed,
            base_len: self.base_len,
        }
    }
}
