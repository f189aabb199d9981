//! Primal–dual solver for the relaxed obstacle least-gradient problem
//!
//! ```text
//! min_{u ≥ ψ in Ω, u = f outside}  Σ_Ω h²·φ(x, ∇u) + Σ_∂Ω h·φ(x, ν)·|u_in − f_out|
//! ```
//!
//! written as the saddle problem `min_u max_{p ∈ C} ⟨∇u, p⟩` with a single
//! collocated dual field `p`. The slot `p[c][a]` belongs to the forward edge
//! of cell `c` along axis `a`:
//!
//! * interior edges carry φ-TV; when both slots of a cell are interior the
//!   pair is projected jointly onto the dual ball `{φ⁰(x, ·) ≤ 1}`, otherwise
//!   the lone slot is clamped to `±φ(x, e_a)`, the extent of that ball along
//!   the axis;
//! * interface edges carry the boundary flux, clamped to `±φ(x_in, e_a)`;
//! * every other slot is held at zero.
//!
//! With that layout `div p` at an interior cell already contains the flux
//! through its boundary faces, and the dual variable at convergence is the
//! calibrating field `T`.

use crate::error::{input, Error, Result};
use crate::grid::{self, boundary_term, tv_phi, EdgeKind, Grid2, Region, ScalarField, VectorField};
use crate::metric::{dot, norm, Vec2, EPS_GRAD};
use crate::par;
use crate::problem::ProblemSpec;

/// Operator-norm bound ‖∇‖² ≤ 8/h² for the 2-D forward-difference stencil.
pub const GRAD_NORM_SQ_TIMES_H2: f64 = 8.0;

pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    /// Primal step; `None` selects h/(2√2).
    pub tau: Option<f64>,
    /// Dual step; `None` selects h/(2√2).
    pub sigma: Option<f64>,
    pub theta: f64,
    /// `None` selects max([`DEFAULT_MAX_ITERS`], 50·max(nx, ny)).
    pub max_iters: Option<usize>,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Stop early when max |u_k − u_{k−1}| falls below this times the data
    /// scale; 0 disables the test.
    pub tol_change: f64,
    /// Iterations between gap evaluations.
    pub check_every: usize,
    /// Restart from the better of the current and averaged iterate whenever
    /// the duality gap has dropped enough since the last restart.
    pub restart: bool,
    /// Rebalance τ/σ at restarts (product kept fixed).
    pub primal_weight: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tau: None,
            sigma: None,
            theta: 1.0,
            max_iters: None,
            tol_gap: 1e-6,
            tol_change: 0.0,
            check_every: 10,
            restart: true,
            primal_weight: true,
        }
    }
}

/// Step sizes and limits after defaults are applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedParams {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    pub max_iters: usize,
    pub tol_gap: f64,
    pub tol_change: f64,
    pub check_every: usize,
    pub restart: bool,
    pub primal_weight: bool,
}

impl SolverParams {
    pub fn resolve(&self, grid: &Grid2) -> Result<ResolvedParams> {
        let h = grid.h();
        let default_step = h / (2.0 * std::f64::consts::SQRT_2);
        let tau = self.tau.unwrap_or(default_step);
        let sigma = self.sigma.unwrap_or(default_step);
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
            return Err(Error::Config(format!("step sizes must be positive: tau={tau}, sigma={sigma}")));
        }
        let product = tau * sigma * GRAD_NORM_SQ_TIMES_H2 / (h * h);
        if product > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "tau*sigma*8/h^2 = {product} exceeds 1 (tau={tau}, sigma={sigma}, h={h})"
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.tol_gap >= 0.0) || !(self.tol_change >= 0.0) {
            return Err(Error::Config("tolerances must be nonnegative".into()));
        }
        let max_iters = self.max_iters.unwrap_or(DEFAULT_MAX_ITERS.max(50 * grid.nx().max(grid.ny())));
        Ok(ResolvedParams {
            tau,
            sigma,
            theta: self.theta,
            max_iters,
            tol_gap: self.tol_gap,
            tol_change: self.tol_change,
            check_every: self.check_every.max(1),
            restart: self.restart,
            primal_weight: self.primal_weight,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub u: ScalarField,
    pub t: VectorField,
    pub primal_energy: f64,
    pub dual_energy: f64,
    /// Absolute gap, primal minus dual.
    pub gap: f64,
    pub iters: usize,
    pub converged: bool,
    /// `(iteration, relative gap)` at every evaluation.
    pub history: Vec<(usize, f64)>,
}

impl Solution {
    pub fn relative_gap(&self) -> f64 {
        relative(self.gap, self.primal_energy, self.dual_energy)
    }
}

fn relative(gap: f64, p: f64, d: f64) -> f64 {
    let denom = p.abs().max(d.abs());
    if gap <= 0.0 {
        0.0
    } else if denom == 0.0 {
        f64::INFINITY
    } else {
        gap / denom
    }
}

// ---------------------------------------------------------------------------
// dual slot layout

#[derive(Clone, Copy, Debug, PartialEq)]
enum Slot {
    /// Both slots on interior edges: joint dual-ball projection.
    Joint,
    /// Independent clamps `|p_a| ≤ bound[a]` (0 pins the slot).
    Clamp([f64; 2]),
}

/// Per-cell constraint sets for the dual field.
#[derive(Clone, Debug)]
pub struct DualLayout {
    slots: Vec<Slot>,
}

impl DualLayout {
    pub fn new(problem: &ProblemSpec) -> Self {
        let g = problem.grid();
        let m = problem.metric();
        let nx = g.nx();
        let slots = (0..g.len())
            .map(|k| {
                let kinds = g.edge_kinds(k);
                if kinds == [EdgeKind::Interior; 2] {
                    return Slot::Joint;
                }
                let mut b = [0.0; 2];
                for a in 0..2 {
                    let nb = if a == 0 { k + 1 } else { k + nx };
                    b[a] = match kinds[a] {
                        EdgeKind::Interior => m.axis_norm(k, a),
                        EdgeKind::Interface => {
                            let inner = if g.is_interior(k) { k } else { nb };
                            m.axis_norm(inner, a)
                        }
                        EdgeKind::Inactive | EdgeKind::Absent => 0.0,
                    };
                }
                Slot::Clamp(b)
            })
            .collect();
        DualLayout { slots }
    }

    #[inline]
    fn project(&self, problem: &ProblemSpec, k: usize, p: Vec2) -> Vec2 {
        match self.slots[k] {
            Slot::Joint => problem.metric().project_dual(k, p),
            Slot::Clamp(b) => [p[0].clamp(-b[0], b[0]), p[1].clamp(-b[1], b[1])],
        }
    }

    /// Scaled dual norm of the slot pair: φ⁰ for joint cells, `max |p_a|/b_a`
    /// otherwise (0/0 counts as 0, x/0 as +∞).
    fn norm(&self, problem: &ProblemSpec, k: usize, p: Vec2) -> f64 {
        match self.slots[k] {
            Slot::Joint => problem.metric().dual(k, p),
            Slot::Clamp(b) => {
                let r = |v: f64, bound: f64| {
                    if v == 0.0 {
                        0.0
                    } else if bound == 0.0 {
                        f64::INFINITY
                    } else {
                        v.abs() / bound
                    }
                };
                r(p[0], b[0]).max(r(p[1], b[1]))
            }
        }
    }

    /// Projects a whole field in place.
    pub fn project_field(&self, problem: &ProblemSpec, p: &mut VectorField) {
        let nx = problem.grid().nx();
        par::for_each_row_mut(p.as_mut_slice(), nx, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = self.project(problem, j * nx + i, *v);
            }
        });
    }
}

// ---------------------------------------------------------------------------
// energies

/// Feasibility of a primal candidate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Feasibility {
    /// Interior cells with u < ψ − 1e-12.
    pub obstacle_violations: usize,
    pub max_obstacle_violation: f64,
    /// Exterior cells with u ≠ f.
    pub exterior_mismatches: usize,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.obstacle_violations == 0
    }
}

pub fn feasibility(problem: &ProblemSpec, u: &ScalarField) -> Feasibility {
    let g = problem.grid();
    let mut rep = Feasibility::default();
    for k in 0..g.len() {
        if g.is_interior(k) {
            let v = problem.psi()[k] - u[k];
            if v > 1e-12 {
                rep.obstacle_violations += 1;
                rep.max_obstacle_violation = rep.max_obstacle_violation.max(v);
            }
        } else if u[k] != problem.f()[k] {
            rep.exterior_mismatches += 1;
        }
    }
    rep
}

/// Relaxed objective; +∞ when `u` violates the obstacle. Exterior values of
/// `u` are ignored (the datum f is used there).
pub fn primal_energy(problem: &ProblemSpec, u: &ScalarField) -> Result<f64> {
    if u.dims() != problem.grid().dims() {
        return input("u does not match the problem grid");
    }
    if !feasibility(problem, u).is_feasible() {
        return Ok(f64::INFINITY);
    }
    let mut uf = u.clone();
    pin_exterior(problem, uf.as_mut_slice());
    Ok(unchecked_primal(problem, &uf))
}

fn unchecked_primal(problem: &ProblemSpec, u: &ScalarField) -> f64 {
    let g = problem.grid();
    let m = problem.metric();
    tv_phi(g, m, u, Region::Interior).expect("shapes checked") + boundary_term(g, m, u, problem.f()).expect("shapes checked")
}

fn pin_exterior(problem: &ProblemSpec, u: &mut [f64]) {
    let g = problem.grid();
    for (k, v) in u.iter_mut().enumerate() {
        if !g.is_interior(k) {
            *v = problem.f()[k];
        }
    }
}

/// Lower bound `min_{u ∈ K} ⟨∇u, p⟩` over the truncated admissible set
/// `K = {max(ψ, m) ≤ u ≤ M in Ω, u = f outside}`; `div` is `div p`.
fn bounded_dual(problem: &ProblemSpec, div: &[f64]) -> f64 {
    let g = problem.grid();
    let h2 = g.h() * g.h();
    let (lo, hi) = problem.data_bounds();
    let nx = g.nx();
    par::sum_rows(nx, g.ny(), |j| {
        let mut s = 0.0;
        for k in j * nx..(j + 1) * nx {
            let w = -h2 * div[k];
            if g.is_interior(k) {
                let l = problem.psi()[k].max(lo);
                s += if w >= 0.0 { w * l } else { w * hi.max(l) };
            } else if div[k] != 0.0 {
                s += w * problem.f()[k];
            }
        }
        s
    })
}

/// Tolerance on (div T)₊ for dual feasibility: 1e-6·‖T‖∞/h.
pub fn tol_div(t: &VectorField, h: f64) -> f64 {
    1e-6 * t.max_abs() / h
}

/// Dual objective of a field `T`. Returns −∞ when `div T` exceeds
/// [`tol_div`] at some interior cell; otherwise the truncated lower bound
/// used for the duality gap.
pub fn dual_energy(problem: &ProblemSpec, t: &VectorField) -> Result<f64> {
    let g = problem.grid();
    if t.dims() != g.dims() {
        return input("T does not match the problem grid");
    }
    let d = grid::div(t, g.h());
    let tol = tol_div(t, g.h());
    if (0..g.len()).any(|k| g.is_interior(k) && d[k] > tol) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(bounded_dual(problem, d.as_slice()))
}

/// The truncated lower bound of [`dual_energy`] without the feasibility
/// test; this is the dual value reported in [`Solution`].
pub fn bounded_dual_energy(problem: &ProblemSpec, t: &VectorField) -> Result<f64> {
    let g = problem.grid();
    if t.dims() != g.dims() {
        return input("T does not match the problem grid");
    }
    let d = grid::div(t, g.h());
    Ok(bounded_dual(problem, d.as_slice()))
}

// ---------------------------------------------------------------------------
// solver

/// Runs the primal–dual iteration from `u = max(f, ψ)` in Ω and `p = 0`.
pub fn solve_relaxed(problem: &ProblemSpec, params: &SolverParams) -> Result<Solution> {
    let g = problem.grid();
    let u0 = ScalarField::from_fn(g.nx(), g.ny(), |i, j| {
        let k = g.index(i, j);
        if g.is_interior(k) {
            // start from the nearest-exterior-datum-free guess: the mean of f
            // over the boundary band, lifted onto the obstacle
            problem.psi()[k].max(boundary_mean(problem))
        } else {
            problem.f()[k]
        }
    });
    solve_relaxed_from(problem, params, u0, VectorField::zeros(g.nx(), g.ny()))
}

fn boundary_mean(problem: &ProblemSpec) -> f64 {
    let g = problem.grid();
    let (mut s, mut n) = (0.0, 0usize);
    for e in g.interface_edges() {
        s += problem.f()[e.outer];
        n += 1;
    }
    s / n as f64
}

/// Warm-started variant.
pub fn solve_relaxed_from(
    problem: &ProblemSpec,
    params: &SolverParams,
    mut u: ScalarField,
    mut p: VectorField,
) -> Result<Solution> {
    let g = problem.grid();
    let rp = params.resolve(g)?;
    let (nx, ny) = g.dims();
    let n = nx * ny;
    let h = g.h();
    if u.dims() != (nx, ny) || p.dims() != (nx, ny) {
        return input("initial guess does not match the problem grid");
    }
    let layout = DualLayout::new(problem);
    let psi = problem.psi().as_slice();
    let f = problem.f().as_slice();
    let interior: Vec<bool> = g.interior_mask();
    {
        let us = u.as_mut_slice();
        for k in 0..n {
            us[k] = if interior[k] { us[k].max(psi[k]) } else { f[k] };
        }
    }
    layout.project_field(problem, &mut p);

    let scale = problem.field_scale().max(f64::MIN_POSITIVE);
    let mut div_buf = vec![0.0; n];
    let mut history = Vec::new();

    let (pe, de) = evaluate(problem, &u, &p, &mut div_buf);
    let rel0 = relative(pe - de, pe, de);
    history.push((0, rel0));
    if rel0 <= rp.tol_gap {
        return Ok(solution(u, p, pe, de, 0, true, history));
    }

    // step sizes τ = η/ω, σ = η·ω; ω rebalances primal and dual progress
    let eta = (rp.tau * rp.sigma).sqrt();
    let mut omega = (rp.sigma / rp.tau).sqrt();
    let mut ubar = u.clone();
    let mut u_prev = u.clone();
    let mut grad_buf = vec![[0.0; 2]; n];
    let mut u_sum = vec![0.0; n];
    let mut p_sum = vec![[0.0; 2]; n];
    let mut count = 0usize;
    let mut anchor = (u.clone(), p.clone());
    let mut restart_gap = pe - de;
    let mut prev_cand_gap = f64::INFINITY;
    let mut since_restart = 0usize;
    let mut best = Candidate { u: u.clone(), p: p.clone(), primal: pe, dual: de };
    let mut iters = 0;
    let mut converged = false;

    for it in 1..=rp.max_iters {
        iters = it;
        since_restart += 1;
        let tau = eta / omega;
        let sigma = eta * omega;
        // dual ascent
        grid::grad_into(ubar.as_slice(), nx, ny, h, &mut grad_buf);
        {
            let gb = &grad_buf;
            par::for_each_row_mut(p.as_mut_slice(), nx, |j, row| {
                for (i, v) in row.iter_mut().enumerate() {
                    let k = j * nx + i;
                    let q = [v[0] + sigma * gb[k][0], v[1] + sigma * gb[k][1]];
                    *v = layout.project(problem, k, q);
                }
            });
        }
        // primal descent with obstacle projection
        grid::div_into(p.as_slice(), nx, ny, h, &mut div_buf);
        u_prev.as_mut_slice().copy_from_slice(u.as_slice());
        let mut change = 0.0f64;
        {
            let us = u.as_mut_slice();
            let ub = ubar.as_mut_slice();
            let up = u_prev.as_slice();
            for k in 0..n {
                if interior[k] {
                    let v = (up[k] + tau * div_buf[k]).max(psi[k]);
                    us[k] = v;
                    ub[k] = v + rp.theta * (v - up[k]);
                    change = change.max((v - up[k]).abs());
                }
            }
        }
        if !change.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        if rp.restart {
            count += 1;
            for (s, v) in u_sum.iter_mut().zip(u.as_slice()) {
                *s += v;
            }
            for (s, v) in p_sum.iter_mut().zip(p.as_slice()) {
                s[0] += v[0];
                s[1] += v[1];
            }
        }
        let stalled = rp.tol_change > 0.0 && change < rp.tol_change * scale;
        if it % rp.check_every != 0 && it != rp.max_iters && !stalled {
            continue;
        }

        let (pe, de) = evaluate(problem, &u, &p, &mut div_buf);
        if !pe.is_finite() || !de.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        let mut cand = Candidate { u: u.clone(), p: p.clone(), primal: pe, dual: de };
        let mut from_average = false;
        if rp.restart && count > 1 {
            let inv = 1.0 / count as f64;
            let mut au = u.clone();
            for (k, v) in au.as_mut_slice().iter_mut().enumerate() {
                if interior[k] {
                    *v = u_sum[k] * inv;
                }
            }
            let ap = VectorField::new(nx, ny, p_sum.iter().map(|s| [s[0] * inv, s[1] * inv]).collect())?;
            let (ape, ade) = evaluate(problem, &au, &ap, &mut div_buf);
            if ape - ade < pe - de {
                cand = Candidate { u: au, p: ap, primal: ape, dual: ade };
                from_average = true;
            }
        }
        let cand_gap = cand.gap();
        if cand_gap < best.gap() {
            best = cand.clone();
        }
        let rel = relative(best.gap(), best.primal, best.dual);
        history.push((it, rel));
        if rel <= rp.tol_gap {
            converged = true;
            break;
        }
        if stalled {
            break;
        }
        if rp.restart {
            let sufficient = cand_gap <= RESTART_SUFFICIENT * restart_gap;
            let necessary = cand_gap <= RESTART_NECESSARY * restart_gap && cand_gap > prev_cand_gap;
            let long = since_restart as f64 >= RESTART_ARTIFICIAL * it as f64;
            if sufficient || necessary || long {
                if rp.primal_weight {
                    let du = l2_distance(cand.u.as_slice(), anchor.0.as_slice());
                    let dp = l2_distance_vec(cand.p.as_slice(), anchor.1.as_slice());
                    if du > 1e-14 && dp > 1e-14 {
                        omega = (0.5 * (dp / du).ln() + 0.5 * omega.ln()).exp();
                    }
                }
                u = cand.u.clone();
                p = cand.p.clone();
                ubar.as_mut_slice().copy_from_slice(u.as_slice());
                anchor = (u.clone(), p.clone());
                u_sum.iter_mut().for_each(|s| *s = 0.0);
                p_sum.iter_mut().for_each(|s| *s = [0.0; 2]);
                count = 0;
                restart_gap = cand_gap;
                prev_cand_gap = f64::INFINITY;
                since_restart = 0;
                let _ = from_average;
                continue;
            }
            prev_cand_gap = cand_gap;
        }
    }
    let Candidate { u, p, primal, dual } = best;
    Ok(solution(u, p, primal, dual, iters, converged, history))
}

/// Restart when the gap fell below this fraction of its value at the last
/// restart.
const RESTART_SUFFICIENT: f64 = 0.2;
/// ... or below this fraction while no longer improving.
const RESTART_NECESSARY: f64 = 0.8;
/// ... or when the current epoch exceeds this fraction of all iterations.
const RESTART_ARTIFICIAL: f64 = 0.36;

#[derive(Clone)]
struct Candidate {
    u: ScalarField,
    p: VectorField,
    primal: f64,
    dual: f64,
}

impl Candidate {
    fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn l2_distance_vec(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn evaluate(problem: &ProblemSpec, u: &ScalarField, p: &VectorField, div_buf: &mut [f64]) -> (f64, f64) {
    let g = problem.grid();
    grid::div_into(p.as_slice(), g.nx(), g.ny(), g.h(), div_buf);
    (unchecked_primal(problem, u), bounded_dual(problem, div_buf))
}

fn solution(
    u: ScalarField,
    t: VectorField,
    primal: f64,
    dual: f64,
    iters: usize,
    converged: bool,
    history: Vec<(usize, f64)>,
) -> Solution {
    Solution { u, t, primal_energy: primal, dual_energy: dual, gap: primal - dual, iters, converged, history }
}

// ---------------------------------------------------------------------------
// certificate

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateOptions {
    /// Contact tolerance; `None` selects 1e-3·(max u − min u) over Ω.
    pub tol_contact: Option<f64>,
    /// Calibration is measured where |∇u| ≥ this fraction of max |∇u|
    /// (and always above the gradient floor).
    pub calibration_fraction: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions { tol_contact: None, calibration_fraction: 0.1 }
    }
}

/// Pass thresholds for [`CertificateReport::passes`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateThresholds {
    pub dual_infeasibility: f64,
    pub positive_divergence: f64,
    pub divergence_off_contact: f64,
    pub calibration: f64,
    pub boundary_consistency: f64,
}

impl Default for CertificateThresholds {
    fn default() -> Self {
        CertificateThresholds {
            dual_infeasibility: 1e-6,
            positive_divergence: 1e-3,
            divergence_off_contact: 1e-3,
            calibration: 1e-2,
            boundary_consistency: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    /// max (φ⁰(x, T) − 1)₊ over Ω, plus interface-flux excess over φ(x, ν).
    pub max_dual_infeasibility: f64,
    /// max (div T)₊·h over Ω.
    pub max_positive_divergence: f64,
    /// max |div T|·h over {u > ψ + tol_contact}.
    pub max_divergence_off_contact: f64,
    /// max |φ(x, ∇u) − T·∇u| / |∇u| over cells with significant gradient.
    pub max_calibration_residual: f64,
    /// max |φ(x, ν)·sign(f − u) − T·ν| over detached interface edges off contact.
    pub boundary_consistency_residual: f64,
    /// Fraction of Ω in the discrete contact set.
    pub contact_fraction: f64,
    pub tol_contact: f64,
    /// Cells entering the calibration maximum.
    pub calibration_cells: usize,
    /// Interface edges entering the boundary maximum.
    pub boundary_edges: usize,
}

impl CertificateReport {
    pub fn passes(&self, th: &CertificateThresholds) -> bool {
        self.max_dual_infeasibility <= th.dual_infeasibility
            && self.max_positive_divergence <= th.positive_divergence
            && self.max_divergence_off_contact <= th.divergence_off_contact
            && self.max_calibration_residual <= th.calibration
            && self.boundary_consistency_residual <= th.boundary_consistency
    }

    /// `key=value` lines.
    pub fn to_lines(&self) -> Vec<String> {
        vec![
            format!("max_dual_infeasibility={:e}", self.max_dual_infeasibility),
            format!("max_positive_divergence={:e}", self.max_positive_divergence),
            format!("max_divergence_off_contact={:e}", self.max_divergence_off_contact),
            format!("max_calibration_residual={:e}", self.max_calibration_residual),
            format!("boundary_consistency_residual={:e}", self.boundary_consistency_residual),
            format!("contact_fraction={}", self.contact_fraction),
            format!("tol_contact={:e}", self.tol_contact),
            format!("calibration_cells={}", self.calibration_cells),
            format!("boundary_edges={}", self.boundary_edges),
        ]
    }
}

/// Region-restricted forward difference at an interior cell.
fn interior_grad(g: &Grid2, u: &[f64], k: usize) -> Vec2 {
    let kinds = g.edge_kinds(k);
    let inv_h = 1.0 / g.h();
    let gx = if kinds[0] == EdgeKind::Interior { (u[k + 1] - u[k]) * inv_h } else { 0.0 };
    let gy = if kinds[1] == EdgeKind::Interior { (u[k + g.nx()] - u[k]) * inv_h } else { 0.0 };
    [gx, gy]
}

/// Measures the optimality conditions satisfied by the calibrating field.
pub fn extract_certificate(problem: &ProblemSpec, u: &ScalarField, t: &VectorField, opts: &CertificateOptions) -> Result<CertificateReport> {
    let g = problem.grid();
    let m = problem.metric();
    if u.dims() != g.dims() || t.dims() != g.dims() {
        return input("solution does not match the problem grid");
    }
    let h = g.h();
    let layout = DualLayout::new(problem);
    let psi = problem.psi();
    let f = problem.f();
    let us = u.as_slice();

    let (mut umin, mut umax) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..g.len() {
        if g.is_interior(k) {
            umin = umin.min(u[k]);
            umax = umax.max(u[k]);
        }
    }
    let tol_contact = opts.tol_contact.unwrap_or(1e-3 * (umax - umin));
    let d = grid::div(t, h);

    let mut dual_inf = 0.0f64;
    let mut pos_div = 0.0f64;
    let mut off_contact = 0.0f64;
    let mut contact = 0usize;
    let mut n_int = 0usize;
    let mut gmax = 0.0f64;
    let grads: Vec<Vec2> = (0..g.len())
        .map(|k| if g.is_interior(k) { interior_grad(g, us, k) } else { [0.0; 2] })
        .collect();
    for k in 0..g.len() {
        if !g.is_interior(k) {
            continue;
        }
        n_int += 1;
        // interior-edge slots only; interface slots are checked per edge below
        let kinds = g.edge_kinds(k);
        let tk = [
            if kinds[0] == EdgeKind::Interior { t[k][0] } else { 0.0 },
            if kinds[1] == EdgeKind::Interior { t[k][1] } else { 0.0 },
        ];
        let nrm = if kinds == [EdgeKind::Interior; 2] {
            m.dual(k, tk)
        } else {
            layout.norm(problem, k, tk)
        };
        dual_inf = dual_inf.max(nrm - 1.0);
        pos_div = pos_div.max(d[k] * h);
        if u[k] > psi[k] + tol_contact {
            off_contact = off_contact.max(d[k].abs() * h);
        } else {
            contact += 1;
        }
        gmax = gmax.max(norm(grads[k]));
    }
    for e in g.interface_edges() {
        let q = t[e.owner()][e.axis];
        dual_inf = dual_inf.max(q.abs() - m.axis_norm(e.inner, e.axis));
    }

    let floor = (opts.calibration_fraction * gmax).max(EPS_GRAD * problem.field_scale().max(1.0) / h);
    let mut calib = 0.0f64;
    let mut calib_cells = 0usize;
    for k in 0..g.len() {
        if !g.is_interior(k) {
            continue;
        }
        let gk = grads[k];
        let gn = norm(gk);
        if gn >= floor && gn > 0.0 {
            calib_cells += 1;
            let kinds = g.edge_kinds(k);
            let tk = [
                if kinds[0] == EdgeKind::Interior { t[k][0] } else { 0.0 },
                if kinds[1] == EdgeKind::Interior { t[k][1] } else { 0.0 },
            ];
            calib = calib.max((m.phi(k, gk) - dot(tk, gk)).abs() / gn);
        }
    }

    let mut bnd = 0.0f64;
    let mut bnd_edges = 0usize;
    for e in g.interface_edges() {
        let gap = f[e.outer] - u[e.inner];
        if gap.abs() > tol_contact && u[e.inner] > psi[e.inner] + tol_contact {
            bnd_edges += 1;
            let q = f64::from(e.outward) * t[e.owner()][e.axis];
            let target = m.axis_norm(e.inner, e.axis) * gap.signum();
            bnd = bnd.max((target - q).abs());
        }
    }

    Ok(CertificateReport {
        max_dual_infeasibility: dual_inf.max(0.0),
        max_positive_divergence: pos_div.max(0.0),
        max_divergence_off_contact: off_contact,
        max_calibration_residual: calib,
        boundary_consistency_residual: bnd,
        contact_fraction: contact as f64 / n_int.max(1) as f64,
        tol_contact,
        calibration_cells: calib_cells,
        boundary_edges: bnd_edges,
    })
}

// ---------------------------------------------------------------------------
// minimality spot check

#[derive(Clone, Debug, PartialEq)]
pub struct MinimalityReport {
    /// `E(candidate) − E(u)` per candidate; `None` for skipped candidates.
    pub margins: Vec<Option<f64>>,
    pub notes: Vec<String>,
    pub tol: f64,
}

impl MinimalityReport {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self) -> bool {
        self.margins.iter().flatten().all(|&m| m >= -self.tol)
    }
}

/// Checks that no feasible candidate has a lower relaxed energy than `u`.
/// `tol` absorbs the solver's residual gap.
pub fn check_minimality_spotcheck(
    problem: &ProblemSpec,
    u: &ScalarField,
    candidates: &[ScalarField],
    tol: f64,
) -> Result<MinimalityReport> {
    let base = primal_energy(problem, u)?;
    if !base.is_finite() {
        return input("solution violates the obstacle");
    }
    let mut margins = Vec::with_capacity(candidates.len());
    let mut notes = Vec::new();
    for (n, c) in candidates.iter().enumerate() {
        if c.dims() != u.dims() {
            notes.push(format!("candidate {n}: shape mismatch, skipped"));
            margins.push(None);
            continue;
        }
        let fe = feasibility(problem, c);
        if !fe.is_feasible() || fe.exterior_mismatches > 0 {
            notes.push(format!(
                "candidate {n}: infeasible ({} obstacle violations, {} exterior mismatches), skipped",
                fe.obstacle_violations, fe.exterior_mismatches
            ));
            margins.push(None);
            continue;
        }
        margins.push(Some(primal_energy(problem, c)? - base));
    }
    Ok(MinimalityReport { margins, notes, tol })
}
