//! Anisotropic norm fields φ(x, ·) sampled per grid cell.
//!
//! Three families are supported:
//!
//! * `euclidean-weighted`: φ(x, ξ) = a(x)|ξ|, dual |p| / a(x)
//! * `ell1-weighted`: φ(x, ξ) = a(x)(|ξ₁| + |ξ₂|), dual max(|p₁|, |p₂|) / a(x)
//! * `riemannian`: φ(x, ξ) = √(ξᵀM(x)ξ), dual √(pᵀM(x)⁻¹p)
//!
//! Every family is a norm in ξ for each cell, and the field stores the tightest
//! constant `alpha` with `alpha·|ξ| ≤ φ(x, ξ) ≤ |ξ| / alpha` over all cells.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Smallest admissible weight a(x).
pub const MIN_WEIGHT: f64 = 1e-12;
/// Largest admissible condition number of a Riemannian matrix.
pub const MAX_CONDITION: f64 = 1e6;
/// Absolute floor below which φ_ξ is treated as undefined.
pub const EPS_GRAD: f64 = 1e-12;

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    EuclideanWeighted,
    Ell1Weighted,
    Riemannian,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::EuclideanWeighted => "euclidean-weighted",
            MetricKind::Ell1Weighted => "ell1-weighted",
            MetricKind::Riemannian => "riemannian",
        }
    }

    /// Whether the discrete φ-perimeter decouples into per-edge terms.
    pub fn is_separable(self) -> bool {
        matches!(self, MetricKind::Ell1Weighted)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean-weighted" => Ok(MetricKind::EuclideanWeighted),
            "ell1-weighted" => Ok(MetricKind::Ell1Weighted),
            "riemannian" => Ok(MetricKind::Riemannian),
            other => Err(Error::Input(format!("unknown metric kind `{other}`"))),
        }
    }
}

/// Symmetric positive-definite 2×2 matrix `[[m11, m12], [m12, m22]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spd2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl Spd2 {
    pub const IDENTITY: Spd2 = Spd2 { m11: 1.0, m12: 0.0, m22: 1.0 };

    pub fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Spd2 { m11, m12, m22 }
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        Spd2 { m11: d1, m12: 0.0, m22: d2 }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        [self.m11 * v[0] + self.m12 * v[1], self.m12 * v[0] + self.m22 * v[1]]
    }

    pub fn quad(&self, v: Vec2) -> f64 {
        dot(v, self.apply(v))
    }

    pub fn inverse(&self) -> Spd2 {
        let d = self.det();
        Spd2 { m11: self.m22 / d, m12: -self.m12 / d, m22: self.m11 / d }
    }

    /// Eigenvalues `(larger, smaller)` and the unit eigenvector of the larger one.
    pub fn eigen(&self) -> (f64, f64, Vec2) {
        let half_tr = 0.5 * (self.m11 + self.m22);
        let half_diff = 0.5 * (self.m11 - self.m22);
        let r = half_diff.hypot(self.m12);
        let (l1, l2) = (half_tr + r, half_tr - r);
        let v = if r == 0.0 {
            [1.0, 0.0]
        } else if half_diff >= 0.0 {
            // (λ₁ − m22, m12) is well conditioned when m11 ≥ m22
            let v = [l1 - self.m22, self.m12];
            let n = norm(v);
            [v[0] / n, v[1] / n]
        } else {
            let v = [self.m12, l1 - self.m11];
            let n = norm(v);
            [v[0] / n, v[1] / n]
        };
        (l1, l2, v)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum MetricData {
    Euclidean(Vec<f64>),
    Ell1(Vec<f64>),
    Riemannian { m: Vec<Spd2>, inv: Vec<Spd2> },
}

/// Per-cell anisotropic norm. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    nx: usize,
    ny: usize,
    data: MetricData,
    alpha: f64,
}

impl MetricField {
    pub fn euclidean_weighted(nx: usize, ny: usize, weight: Vec<f64>) -> Result<Self> {
        check_weights(nx, ny, &weight)?;
        let (lo, hi) = min_max(&weight);
        let alpha = lo.min(1.0 / hi);
        Ok(MetricField { nx, ny, data: MetricData::Euclidean(weight), alpha })
    }

    pub fn ell1_weighted(nx: usize, ny: usize, weight: Vec<f64>) -> Result<Self> {
        check_weights(nx, ny, &weight)?;
        let (lo, hi) = min_max(&weight);
        // a|ξ| ≤ a|ξ|₁ ≤ √2·a|ξ|
        let alpha = lo.min(1.0 / (std::f64::consts::SQRT_2 * hi));
        Ok(MetricField { nx, ny, data: MetricData::Ell1(weight), alpha })
    }

    pub fn riemannian(nx: usize, ny: usize, matrices: Vec<Spd2>) -> Result<Self> {
        if matrices.len() != nx * ny {
            return Err(Error::Input(format!(
                "metric has {} matrices, grid has {} cells",
                matrices.len(),
                nx * ny
            )));
        }
        let mut sqrt_lo = f64::INFINITY;
        let mut sqrt_hi = 0.0f64;
        for (k, m) in matrices.iter().enumerate() {
            if ![m.m11, m.m12, m.m22].iter().all(|v| v.is_finite()) {
                return Err(Error::Input(format!("non-finite metric matrix at cell {k}")));
            }
            let (l1, l2, _) = m.eigen();
            if l2 <= 0.0 {
                return Err(Error::Input(format!("metric matrix at cell {k} is not positive definite")));
            }
            if l1 / l2 > MAX_CONDITION {
                return Err(Error::Input(format!(
                    "metric matrix at cell {k} has condition number {:e} > {MAX_CONDITION:e}",
                    l1 / l2
                )));
            }
            sqrt_lo = sqrt_lo.min(l2.sqrt());
            sqrt_hi = sqrt_hi.max(l1.sqrt());
        }
        let alpha = sqrt_lo.min(1.0 / sqrt_hi);
        let inv = matrices.iter().map(Spd2::inverse).collect();
        Ok(MetricField { nx, ny, data: MetricData::Riemannian { m: matrices, inv }, alpha })
    }

    pub fn uniform(kind: MetricKind, nx: usize, ny: usize, a: f64) -> Result<Self> {
        match kind {
            MetricKind::EuclideanWeighted => Self::euclidean_weighted(nx, ny, vec![a; nx * ny]),
            MetricKind::Ell1Weighted => Self::ell1_weighted(nx, ny, vec![a; nx * ny]),
            MetricKind::Riemannian => {
                Self::riemannian(nx, ny, vec![Spd2::diag(a * a, a * a); nx * ny])
            }
        }
    }

    pub fn kind(&self) -> MetricKind {
        match self.data {
            MetricData::Euclidean(_) => MetricKind::EuclideanWeighted,
            MetricData::Ell1(_) => MetricKind::Ell1Weighted,
            MetricData::Riemannian { .. } => MetricKind::Riemannian,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Certified ellipticity constant.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Weight field a(x) for the weighted families.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.data {
            MetricData::Euclidean(w) | MetricData::Ell1(w) => Some(w),
            MetricData::Riemannian { .. } => None,
        }
    }

    pub fn matrices(&self) -> Option<&[Spd2]> {
        match &self.data {
            MetricData::Riemannian { m, .. } => Some(m),
            _ => None,
        }
    }

    /// True when φ does not depend on x.
    pub fn is_uniform(&self) -> bool {
        match &self.data {
            MetricData::Euclidean(w) | MetricData::Ell1(w) => w.iter().all(|&a| a == w[0]),
            MetricData::Riemannian { m, .. } => m.iter().all(|x| *x == m[0]),
        }
    }

    /// Multiplies the field by `c > 0` (a ↦ c·a, M ↦ c²·M).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Input(format!("metric scale must be positive, got {c}")));
        }
        match &self.data {
            MetricData::Euclidean(w) => {
                Self::euclidean_weighted(self.nx, self.ny, w.iter().map(|a| a * c).collect())
            }
            MetricData::Ell1(w) => {
                Self::ell1_weighted(self.nx, self.ny, w.iter().map(|a| a * c).collect())
            }
            MetricData::Riemannian { m, .. } => Self::riemannian(
                self.nx,
                self.ny,
                m.iter()
                    .map(|x| Spd2::new(x.m11 * c * c, x.m12 * c * c, x.m22 * c * c))
                    .collect(),
            ),
        }
    }

    /// Restriction of the field to the cells of a sub-rectangle.
    pub fn crop(&self, i0: usize, j0: usize, nx: usize, ny: usize) -> Result<Self> {
        let pick = |k: usize| (j0 + k / nx) * self.nx + i0 + k % nx;
        if i0 + nx > self.nx || j0 + ny > self.ny {
            return Err(Error::Input("crop rectangle exceeds the metric field".into()));
        }
        match &self.data {
            MetricData::Euclidean(w) => {
                Self::euclidean_weighted(nx, ny, (0..nx * ny).map(|k| w[pick(k)]).collect())
            }
            MetricData::Ell1(w) => {
                Self::ell1_weighted(nx, ny, (0..nx * ny).map(|k| w[pick(k)]).collect())
            }
            MetricData::Riemannian { m, .. } => {
                Self::riemannian(nx, ny, (0..nx * ny).map(|k| m[pick(k)]).collect())
            }
        }
    }

    fn cell(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::Index { i: i as isize, j: j as isize, nx: self.nx, ny: self.ny });
        }
        Ok(j * self.nx + i)
    }

    // ---- checked operations -------------------------------------------

    /// φ(x, ξ) at cell (i, j).
    pub fn eval(&self, i: usize, j: usize, xi: Vec2) -> Result<f64> {
        check_finite(xi)?;
        Ok(self.phi(self.cell(i, j)?, xi))
    }

    /// φ⁰(x, p) at cell (i, j).
    pub fn dual_eval(&self, i: usize, j: usize, p: Vec2) -> Result<f64> {
        check_finite(p)?;
        Ok(self.dual(self.cell(i, j)?, p))
    }

    /// φ_ξ(x, ξ) at cell (i, j). Fails for |ξ| < [`EPS_GRAD`].
    pub fn grad_xi(&self, i: usize, j: usize, xi: Vec2) -> Result<Vec2> {
        check_finite(xi)?;
        let k = self.cell(i, j)?;
        let n = norm(xi);
        if n < EPS_GRAD {
            return Err(Error::DegenerateDirection { norm: n });
        }
        Ok(self.grad_xi_at(k, xi))
    }

    /// Euclidean projection of `p` onto {q : φ⁰(x, q) ≤ 1} at cell (i, j).
    pub fn project_dual_ball(&self, i: usize, j: usize, p: Vec2) -> Result<Vec2> {
        check_finite(p)?;
        Ok(self.project_dual(self.cell(i, j)?, p))
    }

    // ---- unchecked kernels (flat cell index) ----------------------------

    #[inline]
    pub fn phi(&self, k: usize, xi: Vec2) -> f64 {
        match &self.data {
            MetricData::Euclidean(w) => w[k] * norm(xi),
            MetricData::Ell1(w) => w[k] * (xi[0].abs() + xi[1].abs()),
            MetricData::Riemannian { m, .. } => m[k].quad(xi).max(0.0).sqrt(),
        }
    }

    #[inline]
    pub fn dual(&self, k: usize, p: Vec2) -> f64 {
        match &self.data {
            MetricData::Euclidean(w) => norm(p) / w[k],
            MetricData::Ell1(w) => p[0].abs().max(p[1].abs()) / w[k],
            MetricData::Riemannian { inv, .. } => inv[k].quad(p).max(0.0).sqrt(),
        }
    }

    /// φ_ξ(x, ξ); the caller guarantees ξ ≠ 0. On the axes of the ℓ¹ family
    /// the zero component of the sign vector is kept (a subgradient selection).
    #[inline]
    pub fn grad_xi_at(&self, k: usize, xi: Vec2) -> Vec2 {
        match &self.data {
            MetricData::Euclidean(w) => {
                let n = norm(xi);
                [w[k] * xi[0] / n, w[k] * xi[1] / n]
            }
            MetricData::Ell1(w) => [w[k] * sign0(xi[0]), w[k] * sign0(xi[1])],
            MetricData::Riemannian { m, .. } => {
                let mx = m[k].apply(xi);
                let n = dot(xi, mx).sqrt();
                [mx[0] / n, mx[1] / n]
            }
        }
    }

    #[inline]
    pub fn project_dual(&self, k: usize, p: Vec2) -> Vec2 {
        match &self.data {
            MetricData::Euclidean(w) => {
                let n = norm(p);
                if n <= w[k] {
                    p
                } else {
                    [p[0] * w[k] / n, p[1] * w[k] / n]
                }
            }
            MetricData::Ell1(w) => [p[0].clamp(-w[k], w[k]), p[1].clamp(-w[k], w[k])],
            MetricData::Riemannian { m, inv } => {
                if inv[k].quad(p) <= 1.0 {
                    p
                } else {
                    project_ellipse(&m[k], &inv[k], p)
                }
            }
        }
    }

    /// φ(x, e_axis): the metric length of a unit step along an axis.
    #[inline]
    pub fn axis_norm(&self, k: usize, axis: usize) -> f64 {
        match &self.data {
            MetricData::Euclidean(w) | MetricData::Ell1(w) => w[k],
            MetricData::Riemannian { m, .. } => {
                if axis == 0 {
                    m[k].m11.sqrt()
                } else {
                    m[k].m22.sqrt()
                }
            }
        }
    }

    /// Largest t with φ⁰(x, t·e_axis) ≤ 1.
    #[inline]
    pub fn axis_dual_radius(&self, k: usize, axis: usize) -> f64 {
        match &self.data {
            MetricData::Euclidean(w) | MetricData::Ell1(w) => w[k],
            MetricData::Riemannian { inv, .. } => {
                let d = if axis == 0 { inv[k].m11 } else { inv[k].m22 };
                1.0 / d.sqrt()
            }
        }
    }
}

#[inline]
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_finite(v: Vec2) -> Result<()> {
    if v[0].is_finite() && v[1].is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("non-finite vector ({}, {})", v[0], v[1])))
    }
}

fn check_weights(nx: usize, ny: usize, w: &[f64]) -> Result<()> {
    if w.len() != nx * ny {
        return Err(Error::Input(format!(
            "metric has {} weights, grid has {} cells",
            w.len(),
            nx * ny
        )));
    }
    if let Some(k) = w.iter().position(|a| !(a.is_finite() && *a >= MIN_WEIGHT)) {
        return Err(Error::Input(format!(
            "metric weight at cell {k} is {} (must be finite and >= {MIN_WEIGHT:e})",
            w[k]
        )));
    }
    Ok(())
}

fn min_max(w: &[f64]) -> (f64, f64) {
    w.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)))
}

/// Projects `p` (outside the ellipse) onto {q : qᵀM⁻¹q ≤ 1}.
///
/// In the eigenbasis of M the projection is y_i = λ_i p_i / (λ_i + μ) with
/// μ ≥ 0 the root of Σ λ_i p_i² / (λ_i + μ)² = 1, found by Newton from μ = 0
/// (monotone from the left since the secular function is convex decreasing).
fn project_ellipse(m: &Spd2, inv: &Spd2, p: Vec2) -> Vec2 {
    let (l1, l2, v) = m.eigen();
    let w = [-v[1], v[0]];
    let y = [dot(p, v), dot(p, w)];
    let lam = [l1, l2];
    let mut mu = 0.0f64;
    for _ in 0..200 {
        let mut f = -1.0;
        let mut df = 0.0;
        for i in 0..2 {
            let d = lam[i] + mu;
            let t = lam[i] * y[i] * y[i] / (d * d);
            f += t;
            df -= 2.0 * t / d;
        }
        if f <= 0.0 || df == 0.0 {
            break;
        }
        let step = f / df;
        mu -= step;
        if step.abs() <= 1e-15 * (1.0 + mu.abs()) {
            break;
        }
    }
    let z = [lam[0] * y[0] / (lam[0] + mu), lam[1] * y[1] / (lam[1] + mu)];
    let q = [z[0] * v[0] + z[1] * w[0], z[0] * v[1] + z[1] * w[1]];
    let r = inv.quad(q).max(0.0).sqrt();
    if r > 1.0 {
        [q[0] / r, q[1] / r]
    } else {
        q
    }
}
