//! Reference problems on the unit square and on a disk.
//!
//! The unit square `[0, 1]²` is resolved by `n × n` interior cells of size
//! `h = 1/n`, surrounded by a one-cell exterior ring, so the lattice is
//! `(n + 2) × (n + 2)`. Data callbacks receive coordinates relative to the
//! square, i.e. the lower-left interior cell has centre `(h/2, h/2)`.

use crate::error::Result;
use crate::grid::{Grid2, ScalarField};
use crate::metric::{MetricField, MetricKind};
use crate::problem::{no_obstacle, ProblemSpec};

/// Default disk radius and centre in square coordinates.
pub const DISK_RADIUS: f64 = 0.4;
pub const DISK_CENTER: (f64, f64) = (0.5, 0.5);

fn square_grid(n: usize) -> Result<Grid2> {
    let m = n + 2;
    let mask: Vec<bool> = (0..m * m)
        .map(|k| {
            let (i, j) = (k % m, k / m);
            (1..=n).contains(&i) && (1..=n).contains(&j)
        })
        .collect();
    Grid2::new(m, m, 1.0 / n as f64, &mask)
}

/// Samples `g(x, y)` in square coordinates on every lattice cell.
pub fn sample_square(grid: &Grid2, g: impl Fn(f64, f64) -> f64) -> ScalarField {
    let h = grid.h();
    ScalarField::sample(grid, |x, y| g(x - h, y - h))
}

/// Unit-square problem with a uniform metric of weight 1.
pub fn unit_square(
    n: usize,
    kind: MetricKind,
    f: impl Fn(f64, f64) -> f64,
    psi: impl Fn(f64, f64) -> f64,
) -> Result<ProblemSpec> {
    let grid = square_grid(n)?;
    let (nx, ny) = grid.dims();
    let metric = MetricField::uniform(kind, nx, ny, 1.0)?;
    let f = sample_square(&grid, f);
    let psi = sample_square(&grid, psi);
    ProblemSpec::new(grid, metric, psi, f)
}

/// f ≡ c, no obstacle.
pub fn constant(n: usize, kind: MetricKind, c: f64) -> Result<ProblemSpec> {
    let big = no_obstacle(c);
    unit_square(n, kind, |_, _| c, |_, _| big)
}

/// f = 0 for x < 1/2 and 1 otherwise, no obstacle.
pub fn step(n: usize, kind: MetricKind) -> Result<ProblemSpec> {
    let big = no_obstacle(1.0);
    unit_square(n, kind, |x, _| if x < 0.5 { 0.0 } else { 1.0 }, |_, _| big)
}

/// f ≡ 0, ψ = 1 on the cells whose centres lie in the centred 0.2 × 0.2
/// block, no obstacle elsewhere.
pub fn block_obstacle(n: usize, kind: MetricKind) -> Result<ProblemSpec> {
    let big = no_obstacle(1.0);
    let inside = |x: f64, y: f64| (0.4..=0.6).contains(&x) && (0.4..=0.6).contains(&y);
    unit_square(n, kind, |_, _| 0.0, |x, y| if inside(x, y) { 1.0 } else { big })
}

/// Disk of radius [`DISK_RADIUS`] inside the unit square, with the analytic
/// signed distance attached to the grid.
pub fn disk_grid(n: usize) -> Result<Grid2> {
    let m = n + 2;
    let h = 1.0 / n as f64;
    let (cx, cy) = (DISK_CENTER.0 + h, DISK_CENTER.1 + h);
    Grid2::from_signed_distance(m, m, h, |x, y| DISK_RADIUS - (x - cx).hypot(y - cy))
}

/// Disk problem with uniform metric and caller-supplied data in square
/// coordinates.
pub fn disk(
    n: usize,
    kind: MetricKind,
    a: f64,
    f: impl Fn(f64, f64) -> f64,
    psi: impl Fn(f64, f64) -> f64,
) -> Result<ProblemSpec> {
    let grid = disk_grid(n)?;
    let (nx, ny) = grid.dims();
    let metric = MetricField::uniform(kind, nx, ny, a)?;
    let f = sample_square(&grid, f);
    let psi = sample_square(&grid, psi);
    ProblemSpec::new(grid, metric, psi, f)
}

/// Polar angle about the disk centre.
pub fn disk_angle(x: f64, y: f64) -> f64 {
    (y - DISK_CENTER.1).atan2(x - DISK_CENTER.0)
}

/// Square circumscribing the disk of [`disk_grid`] on the same lattice (no
/// curvature on its sides), with its exact signed distance.
pub fn square_grid_exact(n: usize) -> Result<Grid2> {
    let m = n + 2;
    let h = 1.0 / n as f64;
    let (cx, cy) = (DISK_CENTER.0 + h, DISK_CENTER.1 + h);
    Grid2::from_signed_distance(m, m, h, |x, y| {
        let qx = (x - cx).abs() - DISK_RADIUS;
        let qy = (y - cy).abs() - DISK_RADIUS;
        let outside = qx.max(0.0).hypot(qy.max(0.0));
        let inside = qx.max(qy).min(0.0);
        -(outside + inside)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_layout() {
        let p = step(8, MetricKind::Ell1Weighted).unwrap();
        let g = p.grid();
        assert_eq!(g.dims(), (10, 10));
        assert_eq!(g.interior_count(), 64);
        // left half of the exterior ring is 0, right half is 1
        assert_eq!(p.f()[g.index(0, 5)], 0.0);
        assert_eq!(p.f()[g.index(9, 5)], 1.0);
        assert_eq!(p.f()[g.index(4, 0)], 0.0);
        assert_eq!(p.f()[g.index(5, 0)], 1.0);
    }

    #[test]
    fn block_has_twelve_cells_at_64() {
        let p = block_obstacle(64, MetricKind::EuclideanWeighted).unwrap();
        let active = p.psi().as_slice().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(active, 144);
    }

    #[test]
    fn square_distance_matches_mask() {
        let g = square_grid_exact(16).unwrap();
        let d = g.signed_distance();
        for k in 0..g.len() {
            assert_eq!(d[k] > 0.0, g.is_interior(k));
        }
        // side 0.8 at h = 1/16: cells whose centres lie strictly inside
        assert_eq!(g.interior_count(), 12 * 12);
    }

    #[test]
    fn disk_is_inside_the_lattice() {
        let g = disk_grid(64).unwrap();
        let area = g.interior_area();
        let exact = std::f64::consts::PI * DISK_RADIUS * DISK_RADIUS;
        assert!((area - exact).abs() < 0.02);
    }
}
