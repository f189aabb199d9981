//! Problem data: grid, metric, obstacle ψ and exterior datum f.

use crate::error::{input, Result};
use crate::grid::{CellLabel, Grid2, ScalarField};
use crate::metric::MetricField;

/// "No obstacle" sentinel is `-BIG_FACTOR · scale`.
pub const BIG_FACTOR: f64 = 1e12;

/// Obstacle value meaning "unconstrained" for data of magnitude `scale`.
pub fn no_obstacle(scale: f64) -> f64 {
    -BIG_FACTOR * scale.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    grid: Grid2,
    metric: MetricField,
    psi: ScalarField,
    f: ScalarField,
    holder_alpha: Option<f64>,
}

impl ProblemSpec {
    /// Validates shapes and the compatibility condition f ≥ ψ on the
    /// boundary band. Inside Ω, f is only an extension and may lie below ψ.
    pub fn new(grid: Grid2, metric: MetricField, psi: ScalarField, f: ScalarField) -> Result<Self> {
        let dims = grid.dims();
        if metric.dims() != dims || psi.dims() != dims || f.dims() != dims {
            return input(format!(
                "shape mismatch: grid {:?}, metric {:?}, psi {:?}, f {:?}",
                dims,
                metric.dims(),
                psi.dims(),
                f.dims()
            ));
        }
        if let Some(k) = f.as_slice().iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.coords(k);
            return input(format!("f is not finite at cell ({i}, {j})"));
        }
        if let Some(k) = psi.as_slice().iter().position(|&v| v == f64::INFINITY) {
            let (i, j) = grid.coords(k);
            return input(format!("psi is +inf at cell ({i}, {j})"));
        }
        for k in 0..grid.len() {
            if grid.label(k) == CellLabel::Boundary && f[k] < psi[k] {
                let (i, j) = grid.coords(k);
                return input(format!(
                    "compatibility violated at cell ({i}, {j}): f = {} < psi = {}",
                    f[k], psi[k]
                ));
            }
        }
        Ok(ProblemSpec { grid, metric, psi, f, holder_alpha: None })
    }

    pub fn with_holder_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return input(format!("Hölder exponent must lie in (0, 1], got {alpha}"));
        }
        self.holder_alpha = Some(alpha);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn psi(&self) -> &ScalarField {
        &self.psi
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn holder_alpha(&self) -> Option<f64> {
        self.holder_alpha
    }

    /// Same problem with different data on the same grid and metric.
    pub fn with_data(&self, psi: ScalarField, f: ScalarField) -> Result<Self> {
        let mut p = ProblemSpec::new(self.grid.clone(), self.metric.clone(), psi, f)?;
        p.holder_alpha = self.holder_alpha;
        Ok(p)
    }

    /// (c·ψ, c·f) for c > 0.
    pub fn scaled_data(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return input(format!("data scale must be positive, got {c}"));
        }
        self.with_data(self.psi.map(|v| c * v), self.f.map(|v| c * v))
    }

    /// Largest |f| and finite |ψ| above the no-obstacle sentinel.
    pub fn field_scale(&self) -> f64 {
        let fs = self.f.max_abs();
        let ps = self
            .psi
            .as_slice()
            .iter()
            .filter(|v| v.is_finite() && **v > -1e-3 * BIG_FACTOR)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        fs.max(ps)
    }

    /// Whether ψ is an active constraint anywhere in Ω, i.e. exceeds the
    /// smallest boundary datum.
    pub fn obstacle_is_trivial(&self) -> bool {
        let (lo, _) = self.data_bounds();
        (0..self.grid.len()).all(|k| !self.grid.is_interior(k) || self.psi[k] <= lo)
    }

    /// `(m, M)`: every minimiser can be truncated into `[max(ψ, m), M]`, with
    /// `m` the least boundary datum and `M` the larger of the greatest
    /// boundary datum and the greatest interior obstacle value.
    pub fn data_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.grid.len() {
            match self.grid.label(k) {
                CellLabel::Boundary => {
                    lo = lo.min(self.f[k]);
                    hi = hi.max(self.f[k]);
                }
                CellLabel::Interior => hi = hi.max(self.psi[k]),
                CellLabel::Exterior => {}
            }
        }
        (lo, hi)
    }
}
