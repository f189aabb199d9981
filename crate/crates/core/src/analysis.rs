//! Empirical checks of qualitative properties of solutions: comparison,
//! stability under increasing obstacles, the barrier condition on ∂Ω,
//! explicit boundary barriers, and Hölder moduli.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::grid::{CellLabel, Grid2, ScalarField};
use crate::metric::{norm, MetricField, Vec2};
use crate::par;
use crate::problem::ProblemSpec;
use crate::solver::{solve_relaxed, Solution, SolverParams};

// ---------------------------------------------------------------------------
// comparison

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// sup over the boundary band of |f1 − f2|.
    pub sup_boundary_diff: f64,
    /// max over Ω of |u1 − u2|.
    pub max_diff: f64,
    /// max over Ω of (|u1 − u2| − sup_boundary_diff)₊.
    pub excess: f64,
    /// max over Ω of (u1 − u2)₊, when f2 ≥ f1 on every non-interior cell.
    pub order_violation: Option<f64>,
    /// Discrete Lipschitz constant of the data on non-interior cells.
    pub lip: f64,
    /// 5h·Lip(f).
    pub tol: f64,
}

impl ComparisonReport {
    pub fn passes(&self) -> bool {
        self.excess <= self.tol && self.order_violation.is_none_or(|v| v <= self.tol)
    }

    pub fn to_lines(&self) -> Vec<String> {
        vec![
            format!("sup_boundary_diff={:e}", self.sup_boundary_diff),
            format!("max_diff={:e}", self.max_diff),
            format!("excess={:e}", self.excess),
            match self.order_violation {
                Some(v) => format!("order_violation={v:e}"),
                None => "order_violation=n/a".to_string(),
            },
            format!("lip={:e}", self.lip),
            format!("tol={:e}", self.tol),
            format!("pass={}", self.passes() as u8),
        ]
    }
}

/// Largest |f(c) − f(c')|/h over 4-neighbour pairs of non-interior cells.
pub fn data_lipschitz(grid: &Grid2, f: &ScalarField) -> f64 {
    let (nx, ny) = grid.dims();
    let mut lip = 0.0f64;
    for k in 0..grid.len() {
        if grid.is_interior(k) {
            continue;
        }
        let (i, j) = grid.coords(k);
        for nb in [(i + 1 < nx).then(|| k + 1), (j + 1 < ny).then(|| k + nx)].into_iter().flatten() {
            if !grid.is_interior(nb) {
                lip = lip.max((f[nb] - f[k]).abs() / grid.h());
            }
        }
    }
    lip
}

/// Compares two solutions of problems sharing grid, metric and obstacle.
pub fn check_comparison(p1: &ProblemSpec, p2: &ProblemSpec, u1: &ScalarField, u2: &ScalarField) -> Result<ComparisonReport> {
    let g = p1.grid();
    if g != p2.grid() || p1.metric() != p2.metric() {
        return input("problems must share grid and metric");
    }
    if p1.psi() != p2.psi() {
        return input("problems must share the obstacle");
    }
    if u1.dims() != g.dims() || u2.dims() != g.dims() {
        return input("solutions do not match the grid");
    }
    let (f1, f2) = (p1.f(), p2.f());
    let mut sup = 0.0f64;
    let mut ordered = true;
    for k in 0..g.len() {
        match g.label(k) {
            CellLabel::Boundary => sup = sup.max((f1[k] - f2[k]).abs()),
            CellLabel::Interior => continue,
            CellLabel::Exterior => {}
        }
        ordered &= f2[k] >= f1[k];
    }
    let mut max_diff = 0.0f64;
    let mut order = 0.0f64;
    for k in 0..g.len() {
        if g.is_interior(k) {
            max_diff = max_diff.max((u1[k] - u2[k]).abs());
            order = order.max(u1[k] - u2[k]);
        }
    }
    let lip = data_lipschitz(g, f1).max(data_lipschitz(g, f2));
    Ok(ComparisonReport {
        sup_boundary_diff: sup,
        max_diff,
        excess: (max_diff - sup).max(0.0),
        order_violation: ordered.then_some(order.max(0.0)),
        lip,
        tol: 5.0 * g.h() * lip,
    })
}

// ---------------------------------------------------------------------------
// stability

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// ‖u_k − u‖₁·h² over Ω for each obstacle of the sequence.
    pub distances: Vec<f64>,
    pub non_increasing: bool,
    /// 10h·area(Ω).
    pub tol: f64,
    pub all_converged: bool,
}

impl StabilityReport {
    pub fn passes(&self) -> bool {
        self.non_increasing && self.distances.last().is_some_and(|&d| d <= self.tol)
    }
}

/// Solves with each obstacle ψ_k of an increasing sequence bounded by the
/// problem's ψ and measures the L¹ distance to the limit solution.
pub fn check_stability(problem: &ProblemSpec, obstacles: &[ScalarField], params: &SolverParams) -> Result<StabilityReport> {
    let g = problem.grid();
    let psi = problem.psi();
    for (n, o) in obstacles.iter().enumerate() {
        if o.dims() != g.dims() {
            return input(format!("obstacle {n} does not match the grid"));
        }
        for k in 0..g.len() {
            if !g.is_interior(k) {
                continue;
            }
            if o[k] > psi[k] {
                return input(format!("obstacle {n} exceeds the limit obstacle at cell {k}"));
            }
            if n > 0 && obstacles[n - 1][k] > o[k] {
                return input(format!("obstacle sequence decreases at step {n}, cell {k}"));
            }
        }
    }
    let limit = solve_relaxed(problem, params)?;
    let sols: Vec<Result<Solution>> = par::map_indexed(obstacles.len(), |n| {
        let p = problem.with_data(obstacles[n].clone(), problem.f().clone())?;
        solve_relaxed(&p, params)
    });
    let sols: Vec<Solution> = sols.into_iter().collect::<Result<_>>()?;
    let h2 = g.h() * g.h();
    let distances: Vec<f64> = sols
        .iter()
        .map(|s| {
            (0..g.len())
                .filter(|&k| g.is_interior(k))
                .map(|k| (s.u[k] - limit.u[k]).abs() * h2)
                .sum()
        })
        .collect();
    let slack = 1e-9 * g.interior_area() * problem.field_scale().max(1.0);
    let non_increasing = distances.windows(2).all(|w| w[1] <= w[0] + slack);
    Ok(StabilityReport {
        distances,
        non_increasing,
        tol: 10.0 * g.h() * g.interior_area(),
        all_converged: limit.converged && sols.iter().all(|s| s.converged),
    })
}

// ---------------------------------------------------------------------------
// finite-difference operator ℒv = div φ_ξ(x, ∇v)

/// Centred gradient with step `s` cells.
fn centred_grad(g: &Grid2, v: &[f64], k: usize, s: usize) -> Option<Vec2> {
    let (i, j) = g.coords(k);
    let (nx, ny) = g.dims();
    if i < s || j < s || i + s >= nx || j + s >= ny {
        return None;
    }
    let d = 2.0 * s as f64 * g.h();
    Some([(v[k + s] - v[k - s]) / d, (v[k + s * nx] - v[k - s * nx]) / d])
}

/// div φ_ξ(x, ∇v) at `k` by nested centred differences with step `s` cells.
/// `None` near the lattice edge or where ∇v vanishes.
fn operator_at(g: &Grid2, m: &MetricField, v: &[f64], k: usize, s: usize) -> Option<f64> {
    let flux = |c: usize| -> Option<Vec2> {
        let gr = centred_grad(g, v, c, s)?;
        if norm(gr) < 1e-12 {
            return None;
        }
        Some(m.grad_xi_at(c, gr))
    };
    let (i, j) = g.coords(k);
    let (nx, ny) = g.dims();
    if i < s || j < s || i + s >= nx || j + s >= ny {
        return None;
    }
    let nxs = s * nx;
    let d = 2.0 * s as f64 * g.h();
    let fx = (flux(k + s)?[0] - flux(k - s)?[0]) / d;
    let fy = (flux(k + nxs)?[1] - flux(k - nxs)?[1]) / d;
    Some(fx + fy)
}

/// Value and truncation estimate (Richardson, steps h and 2h) of ℒv.
fn operator_with_error(g: &Grid2, m: &MetricField, v: &[f64], k: usize) -> Option<(f64, f64)> {
    let a = operator_at(g, m, v, k, 1)?;
    let b = operator_at(g, m, v, k, 2)?;
    // second-order scheme: error(h) ≈ (L_2h − L_h)/3
    Some((a, (b - a).abs() / 3.0))
}

/// Rounding floor for second differences of a field of magnitude `scale`.
fn fd_noise(scale: f64, h: f64) -> f64 {
    256.0 * f64::EPSILON * scale.max(1.0) / (h * h)
}

// ---------------------------------------------------------------------------
// barrier condition

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Marginal,
    Fails,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Marginal => "marginal",
            Verdict::Fails => "fails",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fraction of significantly positive samples required for "satisfied".
pub const DENSE_FRACTION: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSample {
    pub cell: usize,
    /// −div φ_ξ(x, ∇d).
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierReport {
    pub samples: Vec<BarrierSample>,
    pub skipped: usize,
    pub min: f64,
    pub fraction_positive: f64,
    pub fraction_negative: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl BarrierReport {
    pub fn to_lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("samples={}", self.samples.len()),
            format!("skipped={}", self.skipped),
            format!("min={:e}", self.min),
            format!("fraction_positive={}", self.fraction_positive),
            format!("fraction_negative={}", self.fraction_negative),
            format!("verdict={}", self.verdict),
        ];
        v.extend(self.notes.iter().map(|n| format!("note={n}")));
        v
    }
}

/// Evaluates −div φ_ξ(x, ∇d) one cell inside ∂Ω at up to `n_samples`
/// randomly chosen interface cells (all of them when fewer exist).
///
/// A sample counts as positive when it exceeds three times its truncation
/// estimate (plus a rounding floor), negative when below minus that. The
/// verdict is "satisfied" when at least 95% of valid samples are positive,
/// "fails" when more than 5% are negative, "marginal" otherwise.
pub fn barrier_condition_check(problem: &ProblemSpec, n_samples: usize, seed: u64) -> Result<BarrierReport> {
    if n_samples == 0 {
        return input("at least one sample is required");
    }
    let g = problem.grid();
    let m = problem.metric();
    let d = g.signed_distance();
    let mut notes = Vec::new();
    if !g.has_exact_distance() {
        notes.push("signed distance is swept (first order); curvature estimates are coarse".to_string());
    }
    let mut candidates: Vec<usize> = g.interface_edges().iter().map(|e| e.inner).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let chosen: Vec<usize> = if n_samples >= candidates.len() {
        candidates.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = sample(&mut rng, candidates.len(), n_samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| candidates[i]).collect()
    };
    let dscale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let noise = fd_noise(dscale, g.h()) * m.alpha().recip();
    let mut samples = Vec::new();
    let mut skipped = 0;
    for &k in &chosen {
        let Some(gr) = centred_grad(g, d, k, 1) else {
            skipped += 1;
            continue;
        };
        if norm(gr) < 0.5 {
            skipped += 1;
            continue;
        }
        match operator_with_error(g, m, d, k) {
            Some((l, err)) => samples.push(BarrierSample { cell: k, value: -l, threshold: 3.0 * err + noise }),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        notes.push(format!("{skipped} samples skipped (|grad d| < 0.5 or stencil leaves the grid)"));
    }
    let n = samples.len();
    if n == 0 {
        return Err(Error::Input("no valid barrier samples".into()));
    }
    let pos = samples.iter().filter(|s| s.value > s.threshold).count();
    let neg = samples.iter().filter(|s| s.value < -s.threshold).count();
    let fp = pos as f64 / n as f64;
    let fneg = neg as f64 / n as f64;
    let verdict = if fp >= DENSE_FRACTION {
        Verdict::Satisfied
    } else if fneg > 1.0 - DENSE_FRACTION {
        Verdict::Fails
    } else {
        Verdict::Marginal
    };
    let min = samples.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    Ok(BarrierReport { samples, skipped, min, fraction_positive: fp, fraction_negative: fneg, verdict, notes })
}

// ---------------------------------------------------------------------------
// explicit barriers

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierSign {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSpec {
    /// Boundary point (lattice coordinates).
    pub x0: (f64, f64),
    /// `None` applies the recipe K = max(‖f‖_{C^{0,α}}, (‖u‖∞ + |f(x0)|)/δ^α).
    pub k: Option<f64>,
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
    pub sign: BarrierSign,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierResult {
    /// w = ±K·v^{α/2} + f(x0) with v = |x − x0|² + λ·d(x), on the patch;
    /// f(x0) elsewhere.
    pub w: ScalarField,
    pub patch: Vec<bool>,
    pub k: f64,
    /// Value of f at x0 (datum at the nearest boundary-band cell).
    pub f_x0: f64,
    /// min |∇w| over the patch (must be positive).
    pub min_grad: f64,
    /// Fraction of patch cells where ℒw has the required sign
    /// (ℒw⁺ < 0, ℒw⁻ > 0), among cells where it could be evaluated.
    pub operator_sign_fraction: f64,
    /// Largest ℒw⁺ (or −ℒw⁻) on the patch, i.e. the largest ℒv; negative
    /// when (v) holds.
    pub operator_worst: f64,
    /// Boundary ordering on ∂(patch): max of (u − w⁺)₊ (or (w⁻ − u)₊) over
    /// patch cells next to the ball boundary and (f − w⁺)₊ over band cells
    /// inside the ball. `None` without a solution.
    pub boundary_violation: Option<f64>,
    /// Same ordering over the whole patch.
    pub patch_violation: Option<f64>,
}

/// Discrete Hölder seminorm of f over pairs of boundary-band cells.
fn holder_seminorm(g: &Grid2, f: &ScalarField, alpha: f64) -> f64 {
    let band: Vec<usize> = (0..g.len()).filter(|&k| g.label(k) == CellLabel::Boundary).collect();
    let mut best = 0.0f64;
    for (a, &k1) in band.iter().enumerate() {
        let (x1, y1) = g.center(k1);
        for &k2 in &band[a + 1..] {
            let (x2, y2) = g.center(k2);
            let r = (x1 - x2).hypot(y1 - y2);
            best = best.max((f[k1] - f[k2]).abs() / r.powf(alpha));
        }
    }
    best
}

/// Builds the boundary barrier at `x0` and checks its defining properties.
pub fn build_barrier(problem: &ProblemSpec, spec: &BarrierSpec, u: Option<&ScalarField>) -> Result<BarrierResult> {
    if !(spec.lambda > 2.0 * spec.delta) {
        return Err(Error::Config(format!("lambda = {} must exceed 2*delta = {}", spec.lambda, 2.0 * spec.delta)));
    }
    if !(spec.alpha > 0.0 && spec.alpha <= 1.0) || !(spec.delta > 0.0) {
        return Err(Error::Config("alpha must lie in (0, 1] and delta must be positive".into()));
    }
    let g = problem.grid();
    let m = problem.metric();
    let h = g.h();
    let (nx, ny) = g.dims();
    // datum at x0: nearest boundary-band cell
    let band_nearest = (0..g.len())
        .filter(|&k| g.label(k) == CellLabel::Boundary)
        .min_by(|&a, &b| {
            let da = dist(g.center(a), spec.x0);
            let db = dist(g.center(b), spec.x0);
            da.total_cmp(&db)
        })
        .ok_or_else(|| Error::Input("problem has no boundary band".into()))?;
    if dist(g.center(band_nearest), spec.x0) > 2.0 * h {
        return Err(Error::Config("x0 is not on the interface".into()));
    }
    let f_x0 = problem.f()[band_nearest];
    let k_const = match spec.k {
        Some(k) if k > 0.0 => k,
        Some(k) => return Err(Error::Config(format!("K must be positive, got {k}"))),
        None => {
            let unorm = u.map_or(problem.f().max_abs(), |u| {
                (0..g.len()).filter(|&k| g.is_interior(k)).fold(0.0f64, |a, k| a.max(u[k].abs()))
            });
            holder_seminorm(g, problem.f(), spec.alpha).max((unorm + f_x0.abs()) / spec.delta.powf(spec.alpha))
        }
    };
    let sgn = match spec.sign {
        BarrierSign::Upper => 1.0,
        BarrierSign::Lower => -1.0,
    };
    let d = g.signed_distance();
    // v itself is smooth across ∂Ω and feeds the operator; for w, cells
    // outside Ω stand for their boundary point, where d = 0
    let v: Vec<f64> = (0..g.len())
        .map(|k| {
            let r = dist(g.center(k), spec.x0);
            r * r + spec.lambda * d[k]
        })
        .collect();
    let v_clamped: Vec<f64> = (0..g.len())
        .map(|k| {
            let r = dist(g.center(k), spec.x0);
            r * r + spec.lambda * d[k].max(0.0)
        })
        .collect();
    let w: Vec<f64> = v_clamped.iter().map(|&vv| sgn * k_const * vv.powf(0.5 * spec.alpha) + f_x0).collect();
    let patch: Vec<bool> = (0..g.len()).map(|k| g.is_interior(k) && dist(g.center(k), spec.x0) < spec.delta).collect();

    let mut min_grad = f64::INFINITY;
    let mut good = 0usize;
    let mut evaluated = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for k in (0..g.len()).filter(|&k| patch[k]) {
        if let Some(gr) = centred_grad(g, &w, k, 1) {
            min_grad = min_grad.min(norm(gr));
        }
        // φ_ξ is odd and 0-homogeneous: ℒw⁺ = ℒv and ℒw⁻ = −ℒv, so both
        // barriers need ℒv < 0
        if let Some(l) = operator_at(g, m, &v, k, 1) {
            evaluated += 1;
            worst = worst.max(l);
            if l < 0.0 {
                good += 1;
            }
        }
    }
    let ordering = |k: usize, value: f64| sgn * (value - w[k]);
    let (boundary_violation, patch_violation) = match u {
        None => (None, None),
        Some(u) => {
            let mut bnd = 0.0f64;
            let mut all = 0.0f64;
            for k in 0..g.len() {
                let inside_ball = dist(g.center(k), spec.x0) < spec.delta;
                if patch[k] {
                    all = all.max(ordering(k, u[k]));
                    let (i, j) = g.coords(k);
                    let rim = [(i + 1, j), (i.wrapping_sub(1), j), (i, j + 1), (i, j.wrapping_sub(1))]
                        .iter()
                        .any(|&(a, b)| a < nx && b < ny && g.is_interior(b * nx + a) && !patch[b * nx + a]);
                    if rim {
                        bnd = bnd.max(ordering(k, u[k]));
                    }
                } else if inside_ball && g.label(k) == CellLabel::Boundary {
                    bnd = bnd.max(ordering(k, problem.f()[k]));
                }
            }
            (Some(bnd.max(0.0)), Some(all.max(0.0)))
        }
    };
    Ok(BarrierResult {
        w: ScalarField::new(nx, ny, w)?,
        patch,
        k: k_const,
        f_x0,
        min_grad: if min_grad.is_finite() { min_grad } else { 0.0 },
        operator_sign_fraction: if evaluated == 0 { 0.0 } else { good as f64 / evaluated as f64 },
        operator_worst: worst,
        boundary_violation,
        patch_violation,
    })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

// ---------------------------------------------------------------------------
// Hölder modulus

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusReport {
    /// Least-squares slope of log|u(x) − u(y)| against log|x − y| over the
    /// sampled pairs; +∞ for a constant field.
    pub exponent: f64,
    /// exp(intercept) of the same fit.
    pub constant: f64,
    /// Pairs entering the fit.
    pub pairs: usize,
    /// Sampled pairs with |u(x) − u(y)| at rounding level, left out of the
    /// logarithmic fit.
    pub flat_pairs: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Slope of the largest oscillation per scale (a sup-modulus estimate,
    /// more sensitive to isolated singular points).
    pub envelope_exponent: f64,
    pub target: f64,
    /// exponent ≥ target − [`EXPONENT_SLACK`].
    pub meets_target: bool,
}

impl ModulusReport {
    pub fn to_lines(&self) -> Vec<String> {
        vec![
            format!("exponent={}", self.exponent),
            format!("constant={}", self.constant),
            format!("pairs={}", self.pairs),
            format!("flat_pairs={}", self.flat_pairs),
            format!("scale_min={}", self.scale_min),
            format!("scale_max={}", self.scale_max),
            format!("envelope_exponent={}", self.envelope_exponent),
            format!("target={}", self.target),
            format!("meets_target={}", self.meets_target as u8),
        ]
    }
}

/// Slack allowed below the target exponent.
pub const EXPONENT_SLACK: f64 = 0.1;
/// Smallest pair count [`holder_modulus`] accepts.
pub const MIN_MODULUS_PAIRS: usize = 10_000;
const ENVELOPE_SCALES: usize = 8;
const ENVELOPE_DIRECTIONS: usize = 16;
const ENVELOPE_ANCHORS: usize = 2000;

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 2 {
        return (f64::INFINITY, 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return (f64::INFINITY, 0.0);
    }
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

/// Estimates the Hölder exponent of `u` on the cells of `region` from
/// `n_pairs` (at least [`MIN_MODULUS_PAIRS`]) seeded random cell pairs with
/// separation in [4h, diam/4], by a least-squares fit of log|u(x) − u(y)|
/// against log|x − y|.
pub fn holder_modulus(grid: &Grid2, u: &ScalarField, region: &[bool], target: f64, n_pairs: usize, seed: u64) -> Result<ModulusReport> {
    if region.len() != grid.len() || u.dims() != grid.dims() {
        return input("region and field must match the grid");
    }
    if n_pairs < MIN_MODULUS_PAIRS {
        return input(format!("at least {MIN_MODULUS_PAIRS} pairs are required, got {n_pairs}"));
    }
    let cells: Vec<usize> = (0..grid.len()).filter(|&k| region[k]).collect();
    if cells.len() < 2 {
        return input("region needs at least two cells");
    }
    if let Some(&k) = cells.iter().find(|&&k| !u[k].is_finite()) {
        return input(format!("u is not finite at cell {k}"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &k in &cells {
        let (x, y) = grid.center(k);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let h = grid.h();
    let diam = (x1 - x0).hypot(y1 - y0);
    let (lo, hi) = (4.0 * h, diam / 4.0);
    if !(hi > lo) {
        return input("region is too small for the [4h, diam/4] scale window");
    }
    let scale = cells.iter().fold(0.0f64, |a, &k| a.max(u[k].abs()));
    let flat = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n_pairs);
    let mut flat_pairs = 0usize;
    let mut drawn = 0usize;
    let mut attempts = 0usize;
    while drawn < n_pairs && attempts < 1000 * n_pairs {
        attempts += 1;
        let a = cells[rng.random_range(0..cells.len())];
        let b = cells[rng.random_range(0..cells.len())];
        let r = dist(grid.center(a), grid.center(b));
        if r < lo || r > hi {
            continue;
        }
        drawn += 1;
        let d = (u[a] - u[b]).abs();
        if d <= flat {
            flat_pairs += 1;
        } else {
            pts.push((r.ln(), d.ln()));
        }
    }
    if drawn < n_pairs {
        return input("could not draw enough pairs in the [4h, diam/4] window");
    }
    let (exponent, constant) = least_squares(&pts);
    let envelope_exponent = envelope(grid, u, region, &cells, lo, hi, seed);
    Ok(ModulusReport {
        exponent,
        constant,
        pairs: pts.len(),
        flat_pairs,
        scale_min: lo,
        scale_max: hi,
        envelope_exponent,
        target,
        meets_target: exponent >= target - EXPONENT_SLACK,
    })
}

/// Slope of the largest oscillation at lattice offsets of geometric lengths
/// in [lo, hi], probed from a seeded subset of anchor cells.
fn envelope(grid: &Grid2, u: &ScalarField, region: &[bool], cells: &[usize], lo: f64, hi: f64, seed: u64) -> f64 {
    let h = grid.h();
    let mut scales: Vec<(Vec<(i64, i64)>, f64)> = Vec::new();
    for s in 0..ENVELOPE_SCALES {
        let r = lo * (hi / lo).powf(s as f64 / (ENVELOPE_SCALES - 1) as f64) / h;
        let mut offs: Vec<(i64, i64)> = (0..ENVELOPE_DIRECTIONS)
            .map(|d| {
                let t = std::f64::consts::PI * d as f64 / ENVELOPE_DIRECTIONS as f64;
                ((r * t.cos()).round() as i64, (r * t.sin()).round() as i64)
            })
            .collect();
        offs.sort_unstable();
        offs.dedup();
        let mean = offs.iter().map(|&(a, b)| (a as f64).hypot(b as f64)).sum::<f64>() / offs.len() as f64;
        scales.push((offs, mean * h));
    }
    let anchors: Vec<usize> = if ENVELOPE_ANCHORS >= cells.len() {
        cells.to_vec()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        sample(&mut rng, cells.len(), ENVELOPE_ANCHORS).into_iter().map(|i| cells[i]).collect()
    };
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let maxima: Vec<f64> = par::map_indexed(scales.len(), |s| {
        let mut best = 0.0f64;
        for &k in &anchors {
            let (i, j) = grid.coords(k);
            for &(di, dj) in &scales[s].0 {
                // the direction set covers a half-turn
                for sg in [1, -1] {
                    let (a, b) = (i as i64 + sg * di, j as i64 + sg * dj);
                    if a < 0 || b < 0 || a >= nx || b >= ny {
                        continue;
                    }
                    let q = (b * nx + a) as usize;
                    if region[q] {
                        best = best.max((u[k] - u[q]).abs());
                    }
                }
            }
        }
        best
    });
    let pts: Vec<(f64, f64)> = maxima
        .iter()
        .zip(&scales)
        .filter(|(m, _)| **m > 0.0)
        .map(|(m, s)| (s.1.ln(), m.ln()))
        .collect();
    least_squares(&pts).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricKind;
    use crate::problem::no_obstacle;
    use crate::scenarios;

    #[test]
    fn identical_problems_compare_exactly() {
        let p = scenarios::step(8, MetricKind::EuclideanWeighted).unwrap();
        let u = scenarios::sample_square(p.grid(), |x, y| x + y);
        let r = check_comparison(&p, &p, &u, &u).unwrap();
        assert_eq!(r.excess, 0.0);
        assert_eq!(r.order_violation, Some(0.0));
        assert_eq!(r.max_diff, 0.0);
        assert!(r.passes());
    }

    #[test]
    fn comparison_rejects_mismatched_problems() {
        let p = scenarios::step(8, MetricKind::EuclideanWeighted).unwrap();
        let q = scenarios::step(9, MetricKind::EuclideanWeighted).unwrap();
        let u = ScalarField::zeros(10, 10);
        assert!(check_comparison(&p, &q, &u, &u).is_err());
    }

    #[test]
    fn shifted_data_without_obstacle() {
        let p1 = scenarios::step(16, MetricKind::EuclideanWeighted).unwrap();
        let p2 = p1.with_data(p1.psi().clone(), p1.f().map(|v| v + 0.5)).unwrap();
        let params = SolverParams { max_iters: Some(20_000), tol_gap: 1e-7, ..Default::default() };
        let s1 = solve_relaxed(&p1, &params).unwrap();
        let s2 = solve_relaxed(&p2, &params).unwrap();
        let r = check_comparison(&p1, &p2, &s1.u, &s2.u).unwrap();
        assert!((r.sup_boundary_diff - 0.5).abs() < 1e-15);
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn stability_rejects_bad_sequences() {
        let p = scenarios::block_obstacle(8, MetricKind::Ell1Weighted).unwrap();
        let up = p.psi().map(|v| v + 1.0);
        assert!(check_stability(&p, &[up], &SolverParams::default()).is_err());
        let a = p.psi().map(|v| v - 0.1);
        let b = p.psi().map(|v| v - 0.5);
        assert!(check_stability(&p, &[a, b], &SolverParams::default()).is_err());
    }

    #[test]
    fn stability_with_inactive_obstacles() {
        let s = scenarios::step(8, MetricKind::Ell1Weighted).unwrap();
        let below = |c: f64| ScalarField::filled(10, 10, c);
        let p = s.with_data(below(-1.0), s.f().clone()).unwrap();
        let params = SolverParams { max_iters: Some(20_000), tol_gap: 1e-8, ..Default::default() };
        let r = check_stability(&p, &[below(-3.0), below(-2.0), below(-1.0)], &params).unwrap();
        for d in &r.distances {
            assert!(*d < 1e-5, "{d}");
        }
    }

    #[test]
    fn disk_barrier_is_satisfied() {
        let p = scenarios::disk(64, MetricKind::EuclideanWeighted, 1.0, |_, _| 0.0, |_, _| no_obstacle(1.0)).unwrap();
        let r = barrier_condition_check(&p, 64, 42).unwrap();
        assert_eq!(r.verdict, Verdict::Satisfied);
        let inv_r = 1.0 / scenarios::DISK_RADIUS;
        assert!((r.min - inv_r).abs() < 0.2 * inv_r, "{}", r.min);
        // scaling the metric keeps every sample's sign
        let q = scenarios::disk(64, MetricKind::EuclideanWeighted, 3.0, |_, _| 0.0, |_, _| no_obstacle(1.0)).unwrap();
        let s = barrier_condition_check(&q, 64, 42).unwrap();
        assert_eq!(s.verdict, r.verdict);
        for (a, b) in r.samples.iter().zip(&s.samples) {
            assert_eq!(a.cell, b.cell);
            assert_eq!(a.value > a.threshold, b.value > b.threshold);
        }
    }

    #[test]
    fn square_barrier_is_not_satisfied() {
        let g = scenarios::square_grid_exact(64).unwrap();
        let (nx, ny) = g.dims();
        let m = MetricField::uniform(MetricKind::EuclideanWeighted, nx, ny, 1.0).unwrap();
        let p = ProblemSpec::new(g, m, ScalarField::filled(nx, ny, no_obstacle(1.0)), ScalarField::zeros(nx, ny)).unwrap();
        let r = barrier_condition_check(&p, 1000, 42).unwrap();
        assert_ne!(r.verdict, Verdict::Satisfied);
    }

    #[test]
    fn barrier_construction() {
        let p = scenarios::disk(64, MetricKind::EuclideanWeighted, 1.0, |_, _| 0.0, |_, _| no_obstacle(1.0)).unwrap();
        let h = p.grid().h();
        let x0 = (0.5 + h + scenarios::DISK_RADIUS, 0.5 + h);
        let spec = BarrierSpec { x0, k: Some(1.0), lambda: 4.0, alpha: 1.0, delta: 0.1, sign: BarrierSign::Upper };
        let b = build_barrier(&p, &spec, None).unwrap();
        assert!(b.min_grad > 0.0);
        assert_eq!(b.operator_sign_fraction, 1.0, "worst {}", b.operator_worst);
        // w(x0) = f(x0): v vanishes at x0
        let mut at_x0 = spec.clone();
        at_x0.k = Some(5.0);
        let b = build_barrier(&p, &at_x0, None).unwrap();
        assert_eq!(b.f_x0, 0.0);
        let lower = BarrierSpec { sign: BarrierSign::Lower, ..spec.clone() };
        let b = build_barrier(&p, &lower, None).unwrap();
        assert_eq!(b.operator_sign_fraction, 1.0);
        let bad = BarrierSpec { lambda: 0.1, ..spec };
        assert!(matches!(build_barrier(&p, &bad, None), Err(Error::Config(_))));
    }

    #[test]
    fn modulus_of_ramp_and_constant() {
        let p = scenarios::step(64, MetricKind::EuclideanWeighted).unwrap();
        let g = p.grid();
        let region = g.interior_mask();
        let ramp = scenarios::sample_square(g, |x, y| 2.0 * x - y);
        let r = holder_modulus(g, &ramp, &region, 1.0, 20_000, 1).unwrap();
        // lattice quantisation of small separations biases the pair fit low
        assert!((r.exponent - 1.0).abs() < EXPONENT_SLACK, "{}", r.exponent);
        assert!((r.envelope_exponent - 1.0).abs() < 0.05, "{}", r.envelope_exponent);
        assert!(r.meets_target);
        assert!(r.pairs >= 19_000);
        let c = ScalarField::filled(g.nx(), g.ny(), 4.0);
        let r = holder_modulus(g, &c, &region, 1.0, 10_000, 1).unwrap();
        assert_eq!(r.exponent, f64::INFINITY);
        assert_eq!(r.flat_pairs, 10_000);
        assert!(holder_modulus(g, &c, &region, 1.0, 100, 1).is_err());
        // singular line through cell centres: the envelope sees the square root
        let x0 = 0.5 + 0.5 * g.h();
        let sq = scenarios::sample_square(g, |x, _| (x - x0).abs().sqrt());
        let r = holder_modulus(g, &sq, &region, 0.5, 20_000, 1).unwrap();
        assert!((r.envelope_exponent - 0.5).abs() < 0.1, "{}", r.envelope_exponent);
        assert!(r.exponent >= 0.5 - EXPONENT_SLACK, "{}", r.exponent);
    }

    #[test]
    fn modulus_is_deterministic() {
        let p = scenarios::step(32, MetricKind::EuclideanWeighted).unwrap();
        let g = p.grid();
        let f = scenarios::sample_square(g, |x, y| (3.0 * x).sin() * y);
        let a = holder_modulus(g, &f, &g.interior_mask(), 1.0, 10_000, 9).unwrap();
        let b = holder_modulus(g, &f, &g.interior_mask(), 1.0, 10_000, 9).unwrap();
        assert_eq!(a, b);
    }
}
