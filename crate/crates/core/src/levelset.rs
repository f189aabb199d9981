//! Level-set oracle: for a threshold t, the superlevel set {u > t} of a
//! minimiser solves
//!
//! ```text
//! min P_φ(E; Ω)  over E with E = L_t outside Ω and E ⊇ O_t,
//! L_t = {f > t},  O_t = {ψ > t},
//! ```
//!
//! with the relaxed boundary term counted on interface edges. Each threshold
//! is a pairwise binary energy, minimised exactly by a graph cut; stacking the
//! sets reconstructs u.
//!
//! Edge weights per stencil:
//!
//! * 4-stencil: edge `(c, c + e_a)` costs `h·φ(x, e_a)` at the backward
//!   endpoint, or at the interior endpoint for interface edges. For the ℓ¹ family this reproduces
//!   [`perimeter_phi`](crate::grid::perimeter_phi) exactly; for the Euclidean
//!   family it is the ℓ¹ surrogate. Not defined for Riemannian metrics.
//! * 8-stencil: Cauchy–Crofton weights `δ²·|e|²·det D·Δθ / (2·(eᵀDe)^{3/2})`
//!   with `Δθ = π/4` and `D` the tangent-length tensor of φ (`a²I` for the
//!   Euclidean family, `det(M)·M⁻¹` for Riemannian), evaluated at the edge
//!   midpoint. Straight interfaces read between −5.2% (axis) and +2.6%
//!   (diagonal) of their Euclidean length.

use std::f64::consts::PI;

use crate::error::{input, Error, Result};
use crate::grid::{boundary_term, perimeter_phi, Grid2, Region, ScalarField};
use crate::maxflow::FlowGraph;
use crate::metric::{MetricField, MetricKind, Spd2};
use crate::par;
use crate::problem::ProblemSpec;

/// Terminal capacities enforcing constraints are this multiple of the
/// largest finite capacity.
pub const BIG_MULTIPLE: f64 = 1e9;

/// Largest number of unconstrained cells accepted by [`brute_levelset`].
pub const BRUTE_MAX_FREE: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stencil {
    Four,
    Eight,
}

impl Stencil {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Stencil::Four),
            8 => Ok(Stencil::Eight),
            _ => input(format!("stencil must be 4 or 8, got {n}")),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Stencil::Four => 4,
            Stencil::Eight => 8,
        }
    }
}

/// Pairwise binary energy over the interior cells:
/// `Σ_pairs w·[x_a ≠ x_b] + Σ_c (x_c ? cost_in[c] : cost_out[c])`,
/// with `forced[c]` pinning x_c = 1.
#[derive(Clone, Debug)]
pub struct CutModel {
    /// Interior cell index per node.
    pub cells: Vec<usize>,
    pub pairs: Vec<(usize, usize, f64)>,
    pub cost_in: Vec<f64>,
    pub cost_out: Vec<f64>,
    pub forced: Vec<bool>,
    /// Exterior datum L_t over the whole lattice.
    pub outside: Vec<bool>,
}

impl CutModel {
    pub fn build(problem: &ProblemSpec, t: f64, stencil: Stencil) -> Result<Self> {
        if !t.is_finite() {
            return input(format!("threshold must be finite, got {t}"));
        }
        let g = problem.grid();
        let m = problem.metric();
        if stencil == Stencil::Four && m.kind() == MetricKind::Riemannian {
            return Err(Error::Unsupported("riemannian metric with the 4-stencil".into()));
        }
        let n = g.len();
        let mut node = vec![usize::MAX; n];
        let mut cells = Vec::new();
        for k in 0..n {
            if g.is_interior(k) {
                node[k] = cells.len();
                cells.push(k);
            }
        }
        let outside: Vec<bool> = (0..n).map(|k| !g.is_interior(k) && problem.f()[k] > t).collect();
        let forced: Vec<bool> = cells.iter().map(|&k| problem.psi()[k] > t).collect();
        let mut pairs = Vec::new();
        let mut cost_in = vec![0.0; cells.len()];
        let mut cost_out = vec![0.0; cells.len()];
        let (nx, ny) = g.dims();
        let mut link = |a: usize, b: usize, w: f64| {
            if w <= 0.0 {
                return;
            }
            match (g.is_interior(a), g.is_interior(b)) {
                (true, true) => pairs.push((node[a], node[b], w)),
                (true, false) | (false, true) => {
                    let (inner, outer) = if g.is_interior(a) { (a, b) } else { (b, a) };
                    if outside[outer] {
                        cost_out[node[inner]] += w;
                    } else {
                        cost_in[node[inner]] += w;
                    }
                }
                (false, false) => {}
            }
        };
        let h = g.h();
        for k in 0..n {
            let (i, j) = g.coords(k);
            match stencil {
                Stencil::Four => {
                    // interior edges use the backward cell, interface edges
                    // the interior one
                    let owner = |k2: usize| if g.is_interior(k) { k } else { k2 };
                    if i + 1 < nx {
                        link(k, k + 1, h * m.axis_norm(owner(k + 1), 0));
                    }
                    if j + 1 < ny {
                        link(k, k + nx, h * m.axis_norm(owner(k + nx), 1));
                    }
                }
                Stencil::Eight => {
                    for (di, dj) in [(1i64, 0i64), (0, 1), (1, 1), (-1, 1)] {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii < 0 || ii >= nx as i64 || jj >= ny as i64 {
                            continue;
                        }
                        let k2 = jj as usize * nx + ii as usize;
                        let e = [di as f64 * h, dj as f64 * h];
                        link(k, k2, crofton_weight(m, k, k2, e, h));
                    }
                }
            }
        }
        Ok(CutModel { cells, pairs, cost_in, cost_out, forced, outside })
    }

    pub fn node_count(&self) -> usize {
        self.cells.len()
    }

    /// Energy of a node labelling (ignores `forced`).
    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e = 0.0;
        for &(a, b, w) in &self.pairs {
            if x[a] != x[b] {
                e += w;
            }
        }
        for (c, &xc) in x.iter().enumerate() {
            e += if xc { self.cost_in[c] } else { self.cost_out[c] };
        }
        e
    }

    fn max_finite_capacity(&self) -> f64 {
        let p = self.pairs.iter().fold(0.0f64, |m, e| m.max(e.2));
        let t = self.cost_in.iter().chain(&self.cost_out).fold(0.0f64, |m, &v| m.max(v));
        p.max(t)
    }

    /// Maximal minimiser via min-cut; returns `(labels, energy)`.
    pub fn solve(&self) -> Result<(Vec<bool>, f64)> {
        let nn = self.node_count();
        let (s, t) = (nn, nn + 1);
        let big = BIG_MULTIPLE * self.max_finite_capacity().max(1.0);
        let mut g = FlowGraph::new(nn + 2);
        for &(a, b, w) in &self.pairs {
            g.add_edge(a, b, w, w);
        }
        for c in 0..nn {
            let out = self.cost_out[c] + if self.forced[c] { big } else { 0.0 };
            if out > 0.0 {
                g.add_edge(s, c, out, 0.0);
            }
            if self.cost_in[c] > 0.0 {
                g.add_edge(c, t, self.cost_in[c], 0.0);
            }
        }
        let cut = g.max_flow(s, t);
        let x: Vec<bool> = cut.source_side[..nn].to_vec();
        if self.forced.iter().zip(&x).any(|(&f, &v)| f && !v) || cut.value >= big {
            return Err(Error::Config("a constraint edge was severed by the minimum cut".into()));
        }
        Ok((x, cut.value))
    }

    /// Exhaustive minimum over the unconstrained nodes, ties resolved toward
    /// the larger set.
    pub fn brute_force(&self) -> Result<(Vec<bool>, f64)> {
        let free: Vec<usize> = (0..self.node_count()).filter(|&c| !self.forced[c]).collect();
        if free.len() > BRUTE_MAX_FREE {
            return Err(Error::Size(format!(
                "{} unconstrained cells exceed the enumeration limit of {BRUTE_MAX_FREE}",
                free.len()
            )));
        }
        // neighbour lists for O(degree) flip updates
        let nn = self.node_count();
        let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nn];
        for &(a, b, w) in &self.pairs {
            nbrs[a].push((b, w));
            nbrs[b].push((a, w));
        }
        let mut x = self.forced.clone();
        let mut e = self.energy(&x);
        let tol = 1e-12 * self.max_finite_capacity().max(1.0) * (nn.max(1) as f64);
        let mut best = (e, 0usize, x.clone());
        let mut size = 0usize;
        for step in 1u64..(1u64 << free.len()) {
            let c = free[step.trailing_zeros() as usize];
            let mut d = if x[c] { self.cost_out[c] - self.cost_in[c] } else { self.cost_in[c] - self.cost_out[c] };
            for &(o, w) in &nbrs[c] {
                // currently equal → will differ, and vice versa
                d += if x[o] == x[c] { w } else { -w };
            }
            x[c] = !x[c];
            if x[c] {
                size += 1;
            } else {
                size -= 1;
            }
            e += d;
            if e < best.0 - tol || (e <= best.0 + tol && size > best.1) {
                best = (e, size, x.clone());
            }
        }
        // report the energy recomputed from scratch to shed accumulated rounding
        let energy = self.energy(&best.2);
        Ok((best.2, energy))
    }

    /// Full-lattice 0/1 field: the node labels inside Ω, L_t outside.
    pub fn to_field(&self, grid: &Grid2, x: &[bool]) -> ScalarField {
        let mut set: Vec<bool> = self.outside.clone();
        for (c, &k) in self.cells.iter().enumerate() {
            set[k] = x[c];
        }
        ScalarField::indicator(grid.nx(), grid.ny(), &set)
    }
}

/// Tangent-length tensor D with `φ(ν) = √(tᵀ D t)` for the unit tangent `t`
/// orthogonal to `ν`.
fn tangent_tensor(m: &MetricField, k: usize) -> Spd2 {
    match m.kind() {
        MetricKind::Riemannian => {
            let a = m.matrices().expect("riemannian")[k];
            Spd2::new(a.m22, -a.m12, a.m11)
        }
        _ => {
            let a = m.weights().expect("weighted")[k];
            Spd2::diag(a * a, a * a)
        }
    }
}

fn crofton_weight(m: &MetricField, a: usize, b: usize, e: [f64; 2], h: f64) -> f64 {
    let da = tangent_tensor(m, a);
    let db = tangent_tensor(m, b);
    let d = Spd2::new(0.5 * (da.m11 + db.m11), 0.5 * (da.m12 + db.m12), 0.5 * (da.m22 + db.m22));
    let e2 = e[0] * e[0] + e[1] * e[1];
    h * h * e2 * d.det() * (PI / 4.0) / (2.0 * d.quad(e).powf(1.5))
}

// ---------------------------------------------------------------------------
// public operations

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    pub t: f64,
    /// 0/1 over the lattice: E inside Ω, L_t outside.
    pub set: ScalarField,
    /// Minimum of the discrete energy (the cut value).
    pub cut_value: f64,
}

/// Maximal minimiser of the threshold-t perimeter problem by min-cut.
pub fn solve_levelset(problem: &ProblemSpec, t: f64, stencil: Stencil) -> Result<LevelSet> {
    let model = CutModel::build(problem, t, stencil)?;
    let (x, value) = model.solve()?;
    Ok(LevelSet { t, set: model.to_field(problem.grid(), &x), cut_value: value })
}

/// Maximal minimiser by exhaustive enumeration (4-stencil energy for the
/// separable families, 8-stencil for Riemannian).
pub fn brute_levelset(problem: &ProblemSpec, t: f64) -> Result<LevelSet> {
    let stencil = if problem.metric().kind() == MetricKind::Riemannian { Stencil::Eight } else { Stencil::Four };
    brute_levelset_with(problem, t, stencil)
}

pub fn brute_levelset_with(problem: &ProblemSpec, t: f64, stencil: Stencil) -> Result<LevelSet> {
    let model = CutModel::build(problem, t, stencil)?;
    let (x, value) = model.brute_force()?;
    Ok(LevelSet { t, set: model.to_field(problem.grid(), &x), cut_value: value })
}

/// Relaxed perimeter energy of a 0/1 lattice field at threshold t:
/// φ-perimeter inside Ω plus the interface mismatch against L_t.
pub fn levelset_energy(problem: &ProblemSpec, t: f64, set: &ScalarField) -> Result<f64> {
    let g = problem.grid();
    let l = problem.f().map(|v| if v > t { 1.0 } else { 0.0 });
    Ok(perimeter_phi(g, problem.metric(), set, Region::Interior)? + boundary_term(g, problem.metric(), set, &l)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestednessReport {
    /// Cells of E_{t_{j+1}} outside E_{t_j}, per consecutive pair.
    pub per_pair: Vec<usize>,
    pub violations: usize,
}

/// Counts nesting violations in sets ordered by increasing threshold.
pub fn nestedness_check(sets: &[ScalarField]) -> NestednessReport {
    let per_pair: Vec<usize> = sets
        .windows(2)
        .map(|w| {
            w[1].as_slice().iter().zip(w[0].as_slice()).filter(|(&hi, &lo)| hi > 0.5 && lo < 0.5).count()
        })
        .collect();
    let violations = per_pair.iter().sum();
    NestednessReport { per_pair, violations }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StackResult {
    /// Layer-cake reconstruction; equals f outside Ω.
    pub u: ScalarField,
    pub levels: Vec<LevelSet>,
    /// Nesting violations before enforcement.
    pub nestedness: NestednessReport,
}

/// `count` equally spaced thresholds spanning the truncation range of the
/// data.
pub fn uniform_thresholds(problem: &ProblemSpec, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return input("at least one threshold is required");
    }
    let (lo, hi) = problem.data_bounds();
    if count == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    Ok((0..count).map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64).collect())
}

/// Layer-cake stacking `u = t₀ + Σ_j (t_{j+1} − t_j)·χ_{E_{t_j}}` of the
/// per-threshold cuts (solved concurrently). Sets are intersected with their
/// predecessor before stacking; violations are reported. With a single
/// threshold, `u = t₀ + χ_{E_{t₀}}`.
pub fn stack_levelsets(problem: &ProblemSpec, thresholds: &[f64], stencil: Stencil) -> Result<StackResult> {
    if thresholds.is_empty() {
        return input("at least one threshold is required");
    }
    if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return input("thresholds must be finite and strictly increasing");
    }
    let results = par::map_indexed(thresholds.len(), |j| solve_levelset(problem, thresholds[j], stencil));
    let levels: Vec<LevelSet> = results.into_iter().collect::<Result<_>>()?;
    let sets: Vec<ScalarField> = levels.iter().map(|l| l.set.clone()).collect();
    let nestedness = nestedness_check(&sets);

    let g = problem.grid();
    let mut u = vec![thresholds[0]; g.len()];
    let mut current = vec![true; g.len()];
    for (j, l) in levels.iter().enumerate() {
        let dt = if j + 1 < thresholds.len() { thresholds[j + 1] - thresholds[j] } else if thresholds.len() == 1 { 1.0 } else { 0.0 };
        for k in 0..g.len() {
            current[k] = current[k] && l.set[k] > 0.5;
            if current[k] {
                u[k] += dt;
            }
        }
    }
    for k in 0..g.len() {
        if !g.is_interior(k) {
            u[k] = problem.f()[k];
        }
    }
    Ok(StackResult { u: ScalarField::new(g.nx(), g.ny(), u)?, levels, nestedness })
}

/// Relative perimeter error of a stencil on a disk of radius `r` (in cells)
/// for the unit Euclidean metric: `(cut / 2πr·h) − 1`.
pub fn stencil_bias(stencil: Stencil, r_cells: f64) -> Result<f64> {
    let n = (2.0 * r_cells).ceil() as usize + 6;
    let h = 1.0;
    let c = 0.5 * n as f64;
    // the disk is the set to measure; Ω is the whole lattice minus a ring
    let mut mask = vec![false; n * n];
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            mask[j * n + i] = true;
        }
    }
    let g = Grid2::new(n, n, h, &mask)?;
    let m = MetricField::uniform(MetricKind::EuclideanWeighted, n, n, 1.0)?;
    let model = CutModel::build(
        &ProblemSpec::new(
            g.clone(),
            m,
            ScalarField::filled(n, n, crate::problem::no_obstacle(1.0)),
            ScalarField::zeros(n, n),
        )?,
        0.5,
        stencil,
    )?;
    let x: Vec<bool> = model
        .cells
        .iter()
        .map(|&k| {
            let (x, y) = g.center(k);
            (x - c).hypot(y - c) < r_cells
        })
        .collect();
    let cut = model.energy(&x);
    Ok(cut / (2.0 * PI * r_cells * h) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::no_obstacle;
    use crate::scenarios;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_problem(nx: usize, ny: usize, kind: MetricKind, f: Vec<f64>, psi: Vec<f64>, w: Vec<f64>) -> ProblemSpec {
        let mask: Vec<bool> = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
            })
            .collect();
        let g = Grid2::new(nx, ny, 1.0, &mask).unwrap();
        let m = match kind {
            MetricKind::EuclideanWeighted => MetricField::euclidean_weighted(nx, ny, w).unwrap(),
            MetricKind::Ell1Weighted => MetricField::ell1_weighted(nx, ny, w).unwrap(),
            MetricKind::Riemannian => MetricField::riemannian(
                nx,
                ny,
                w.iter().map(|&a| Spd2::new(a, 0.25 * a, 1.5 * a)).collect(),
            )
            .unwrap(),
        };
        ProblemSpec::new(
            g,
            m,
            ScalarField::new(nx, ny, psi).unwrap(),
            ScalarField::new(nx, ny, f).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn everything_when_exterior_is_full() {
        let p = scenarios::constant(6, MetricKind::Ell1Weighted, 1.0).unwrap();
        let l = solve_levelset(&p, 0.5, Stencil::Four).unwrap();
        assert!(l.set.as_slice().iter().all(|&v| v == 1.0));
        assert_eq!(l.cut_value, 0.0);
        let l = solve_levelset(&p, 1.5, Stencil::Four).unwrap();
        assert!(l.set.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_cut_is_right_half() {
        let p = scenarios::step(64, MetricKind::Ell1Weighted).unwrap();
        let l = solve_levelset(&p, 0.5, Stencil::Four).unwrap();
        assert_eq!(l.cut_value, 1.0);
        let expected = scenarios::sample_square(p.grid(), |x, _| if x < 0.5 { 0.0 } else { 1.0 });
        assert_eq!(l.set, expected);
    }

    #[test]
    fn block_cut_is_the_block() {
        let p = scenarios::block_obstacle(64, MetricKind::Ell1Weighted).unwrap();
        let l = solve_levelset(&p, 0.5, Stencil::Four).unwrap();
        let block = p.psi().map(|v| if v > 0.5 { 1.0 } else { 0.0 });
        assert_eq!(l.set, block);
        // 12×12 cells of side 1/64
        assert_eq!(l.cut_value, 48.0 / 64.0);
    }

    #[test]
    fn coarse_step_and_block_match_enumeration() {
        let p = scenarios::step(4, MetricKind::Ell1Weighted).unwrap();
        let a = solve_levelset(&p, 0.5, Stencil::Four).unwrap();
        let b = brute_levelset(&p, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cut_value, 1.0);
        let p = scenarios::block_obstacle(5, MetricKind::Ell1Weighted).unwrap();
        let a = solve_levelset(&p, 0.5, Stencil::Four).unwrap();
        let b = brute_levelset(&p, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_constrained_instance() {
        let big = no_obstacle(1.0);
        let mut psi = vec![big; 25];
        for k in [6, 7, 8, 11, 12, 13, 16, 17, 18] {
            psi[k] = 2.0;
        }
        let p = small_problem(5, 5, MetricKind::Ell1Weighted, vec![3.0; 25], psi, vec![1.0; 25]);
        let a = brute_levelset(&p, 1.0).unwrap();
        assert!(a.set.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn riemannian_needs_eight_neighbours() {
        let p = small_problem(5, 5, MetricKind::Riemannian, vec![0.0; 25], vec![no_obstacle(1.0); 25], vec![1.0; 25]);
        assert!(matches!(solve_levelset(&p, 0.5, Stencil::Four), Err(Error::Unsupported(_))));
        assert!(solve_levelset(&p, 0.5, Stencil::Eight).is_ok());
    }

    #[test]
    fn brute_force_size_limit() {
        let p = scenarios::constant(6, MetricKind::Ell1Weighted, 0.0).unwrap();
        assert!(matches!(brute_levelset(&p, 0.5), Err(Error::Size(_))));
    }

    #[test]
    fn cut_value_is_the_relaxed_perimeter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let (nx, ny) = (rng.random_range(3..9), rng.random_range(3..9));
            let f: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(0..4) as f64).collect();
            let psi: Vec<f64> = (0..nx * ny)
                .map(|k| if rng.random_bool(0.2) { f[k].min(rng.random_range(0..4) as f64) } else { -10.0 })
                .collect();
            let w: Vec<f64> = (0..nx * ny).map(|_| rng.random_range(1..8) as f64 * 0.25).collect();
            let p = small_problem(nx, ny, MetricKind::Ell1Weighted, f, psi, w);
            for t in [0.5, 1.5, 2.5] {
                let l = solve_levelset(&p, t, Stencil::Four).unwrap();
                let e = levelset_energy(&p, t, &l.set).unwrap();
                assert!((e - l.cut_value).abs() <= 1e-10, "{e} vs {}", l.cut_value);
                for k in 0..p.grid().len() {
                    if p.grid().is_interior(k) && p.psi()[k] > t {
                        assert_eq!(l.set[k], 1.0);
                    }
                    if !p.grid().is_interior(k) {
                        assert_eq!(l.set[k], (p.f()[k] > t) as u8 as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn stack_reproduces_step_and_constants() {
        let p = scenarios::step(16, MetricKind::Ell1Weighted).unwrap();
        let s = stack_levelsets(&p, &[0.5], Stencil::Four).unwrap();
        let step = scenarios::sample_square(p.grid(), |x, _| if x < 0.5 { 0.5 } else { 1.5 });
        let g = p.grid();
        for k in 0..g.len() {
            if g.is_interior(k) {
                assert_eq!(s.u[k], step[k]);
            }
        }
        let thresholds: Vec<f64> = (0..9).map(|j| j as f64 / 8.0).collect();
        let s = stack_levelsets(&p, &thresholds, Stencil::Four).unwrap();
        assert_eq!(s.nestedness.violations, 0);
        let exact = scenarios::sample_square(g, |x, _| if x < 0.5 { 0.0 } else { 1.0 });
        assert_eq!(s.u, exact);

        let c = scenarios::constant(8, MetricKind::EuclideanWeighted, 2.0).unwrap();
        let s = stack_levelsets(&c, &[0.0, 1.0, 2.0, 3.0], Stencil::Eight).unwrap();
        assert!(s.u.as_slice().iter().all(|&v| v == 2.0));
        assert!(stack_levelsets(&c, &[1.0, 1.0], Stencil::Four).is_err());
    }

    #[test]
    fn nestedness_examples() {
        let a = ScalarField::indicator(2, 2, &[true, true, false, true]);
        assert_eq!(nestedness_check(&[a.clone(), a.clone()]).violations, 0);
        let b = ScalarField::indicator(2, 2, &[true, true, true, true]);
        assert_eq!(nestedness_check(&[a, b]).violations, 1);
    }

    #[test]
    fn crofton_bias_is_small() {
        let b8 = stencil_bias(Stencil::Eight, 24.0).unwrap();
        assert!(b8.abs() < 0.03, "{b8}");
        let b4 = stencil_bias(Stencil::Four, 24.0).unwrap();
        // the ℓ¹ surrogate overestimates a circle by 4/π
        assert!((b4 - (4.0 / PI - 1.0)).abs() < 0.03, "{b4}");
    }

    #[test]
    fn crofton_weights_for_unit_metric() {
        let m = MetricField::uniform(MetricKind::EuclideanWeighted, 3, 3, 1.0).unwrap();
        let h = 0.5;
        assert!((crofton_weight(&m, 0, 1, [h, 0.0], h) - PI * h / 8.0).abs() < 1e-15);
        assert!((crofton_weight(&m, 0, 4, [h, h], h) - PI * h / (8.0 * 2f64.sqrt())).abs() < 1e-15);
        let r = MetricField::uniform(MetricKind::Riemannian, 3, 3, 1.0).unwrap();
        assert!((crofton_weight(&r, 0, 4, [h, h], h) - PI * h / (8.0 * 2f64.sqrt())).abs() < 1e-15);
    }
}
