//! Plain-text problem (`LGP1`), solution (`LGS1`) and field (`LGF1`) files.
//!
//! Arrays are written row by row (`j = 0` first), `nx` values per line, with
//! `%.17g` rendering so that reading back reproduces every value exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid2, ScalarField, VectorField};
use crate::metric::{MetricField, MetricKind, Spd2};
use crate::problem::ProblemSpec;
use crate::solver::Solution;

pub const PROBLEM_MAGIC: &str = "LGP1";
pub const SOLUTION_MAGIC: &str = "LGS1";
pub const FIELD_MAGIC: &str = "LGF1";

/// C's `%.17g`.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mant), sign, exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_f64(tok: &str, line: usize, allow_neg_inf: bool) -> Result<f64> {
    let v = match tok {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => tok
            .parse::<f64>()
            .map_err(|_| Error::Parse { line, msg: format!("`{tok}` is not a number") })?,
    };
    if v.is_nan() || v == f64::INFINITY || (v == f64::NEG_INFINITY && !allow_neg_inf) {
        return Err(Error::Parse { line, msg: format!("value `{tok}` is not allowed here") });
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// reader

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let last_line = text.lines().count().max(1);
        Lines { lines, pos: 0, last_line }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let l = self.lines.get(self.pos).copied().ok_or_else(|| Error::Parse {
            line: self.last_line,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok(l)
    }

    fn expect_keyword(&mut self, key: &str) -> Result<usize> {
        let (n, l) = self.next(&format!("section `{key}`")).map_err(|e| match e {
            Error::Parse { line, .. } => Error::Parse { line, msg: format!("missing section `{key}`") },
            e => e,
        })?;
        if l != key {
            return Err(Error::Parse { line: n, msg: format!("expected section `{key}`, found `{l}`") });
        }
        Ok(n)
    }

    fn rows<T>(&mut self, name: &str, nx: usize, ny: usize, mut tok: impl FnMut(&str, usize) -> Result<T>) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(nx * ny);
        for r in 0..ny {
            let (n, l) = self.next(&format!("row {} of section `{name}`", r + 1))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != nx {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("section `{name}` row {} has {} values, expected {nx}", r + 1, toks.len()),
                });
            }
            for t in toks {
                out.push(tok(t, n)?);
            }
        }
        Ok(out)
    }

    fn floats(&mut self, name: &str, nx: usize, ny: usize, allow_neg_inf: bool) -> Result<Vec<f64>> {
        self.rows(name, nx, ny, |t, n| parse_f64(t, n, allow_neg_inf))
    }

    fn finish(&self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some((n, l)) => Err(Error::Parse { line: n, msg: format!("unexpected content `{l}`") }),
        }
    }
}

fn parse_magic(lines: &mut Lines<'_>, magic: &str) -> Result<()> {
    let (n, l) = lines.next(&format!("magic `{magic}`"))?;
    if l != magic {
        return Err(Error::Parse { line: n, msg: format!("expected magic `{magic}`, found `{l}`") });
    }
    Ok(())
}

fn parse_grid_line(lines: &mut Lines<'_>) -> Result<(usize, usize, f64)> {
    let (n, l) = lines.next("grid line")?;
    let toks: Vec<&str> = l.split_whitespace().collect();
    let bad = || Error::Parse { line: n, msg: format!("expected `grid <nx> <ny> <h>`, found `{l}`") };
    if toks.len() != 4 || toks[0] != "grid" {
        return Err(bad());
    }
    let nx: usize = toks[1].parse().map_err(|_| bad())?;
    let ny: usize = toks[2].parse().map_err(|_| bad())?;
    let h = parse_f64(toks[3], n, false)?;
    if nx == 0 || ny == 0 || !(h > 0.0) {
        return Err(Error::Parse { line: n, msg: "grid dimensions and h must be positive".into() });
    }
    Ok((nx, ny, h))
}

/// Wraps a validation error with the line where the offending section began.
fn at_line<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::Parse { line, msg: other.to_string() },
    })
}

// ---------------------------------------------------------------------------
// problem files

pub fn read_problem(text: &str) -> Result<ProblemSpec> {
    let mut lines = Lines::new(text);
    parse_magic(&mut lines, PROBLEM_MAGIC)?;
    let (nx, ny, h) = parse_grid_line(&mut lines)?;
    let (mline, l) = lines.next("metric line")?;
    let kind = match l.split_whitespace().collect::<Vec<_>>()[..] {
        ["metric", k] => k.parse::<MetricKind>().map_err(|e| Error::Parse { line: mline, msg: e.to_string() })?,
        _ => return Err(Error::Parse { line: mline, msg: format!("expected `metric <kind>`, found `{l}`") }),
    };
    let metric = match kind {
        MetricKind::EuclideanWeighted | MetricKind::Ell1Weighted => {
            let n = lines.expect_keyword("weight")?;
            let w = lines.floats("weight", nx, ny, false)?;
            at_line(
                n,
                if kind == MetricKind::EuclideanWeighted {
                    MetricField::euclidean_weighted(nx, ny, w)
                } else {
                    MetricField::ell1_weighted(nx, ny, w)
                },
            )?
        }
        MetricKind::Riemannian => {
            let n = lines.expect_keyword("m11")?;
            let m11 = lines.floats("m11", nx, ny, false)?;
            lines.expect_keyword("m12")?;
            let m12 = lines.floats("m12", nx, ny, false)?;
            lines.expect_keyword("m22")?;
            let m22 = lines.floats("m22", nx, ny, false)?;
            let mats = (0..nx * ny).map(|k| Spd2::new(m11[k], m12[k], m22[k])).collect();
            at_line(n, MetricField::riemannian(nx, ny, mats))?
        }
    };
    let mask_line = lines.expect_keyword("mask")?;
    let mask = lines.rows("mask", nx, ny, |t, n| match t {
        "I" => Ok(true),
        "E" => Ok(false),
        _ => Err(Error::Parse { line: n, msg: format!("mask token `{t}` is not I or E") }),
    })?;
    lines.expect_keyword("f")?;
    let f = lines.floats("f", nx, ny, false)?;
    let psi_line = lines.expect_keyword("psi")?;
    let psi = lines.floats("psi", nx, ny, true)?;
    let mut grid = at_line(mask_line, Grid2::new(nx, ny, h, &mask))?;
    if let Some((n, "sdist")) = lines.peek() {
        lines.next("sdist")?;
        let d = lines.floats("sdist", nx, ny, false)?;
        grid = at_line(n, grid.with_signed_distance(d))?;
    }
    lines.finish()?;
    at_line(
        psi_line,
        ProblemSpec::new(grid, metric, ScalarField::new(nx, ny, psi)?, ScalarField::new(nx, ny, f)?),
    )
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    read_problem(&std::fs::read_to_string(path)?)
}

fn write_rows(out: &mut String, nx: usize, values: impl Iterator<Item = String>) {
    for (k, v) in values.enumerate() {
        out.push_str(&v);
        out.push(if (k + 1) % nx == 0 { '\n' } else { ' ' });
    }
}

fn write_section(out: &mut String, name: &str, nx: usize, values: &[f64]) {
    out.push_str(name);
    out.push('\n');
    write_rows(out, nx, values.iter().map(|&v| fmt_g17(v)));
}

pub fn write_problem(p: &ProblemSpec) -> String {
    let g = p.grid();
    let (nx, ny) = g.dims();
    let m = p.metric();
    let mut out = String::new();
    let _ = writeln!(out, "{PROBLEM_MAGIC}\ngrid {nx} {ny} {}\nmetric {}", fmt_g17(g.h()), m.kind());
    match (m.weights(), m.matrices()) {
        (Some(w), _) => write_section(&mut out, "weight", nx, w),
        (None, Some(mats)) => {
            write_section(&mut out, "m11", nx, &mats.iter().map(|a| a.m11).collect::<Vec<_>>());
            write_section(&mut out, "m12", nx, &mats.iter().map(|a| a.m12).collect::<Vec<_>>());
            write_section(&mut out, "m22", nx, &mats.iter().map(|a| a.m22).collect::<Vec<_>>());
        }
        (None, None) => unreachable!("metric stores weights or matrices"),
    }
    out.push_str("mask\n");
    write_rows(&mut out, nx, g.labels().iter().map(|l| if l.is_interior() { "I" } else { "E" }.to_string()));
    write_section(&mut out, "f", nx, p.f().as_slice());
    write_section(&mut out, "psi", nx, p.psi().as_slice());
    if g.has_exact_distance() {
        write_section(&mut out, "sdist", nx, g.signed_distance());
    }
    debug_assert_eq!(out.lines().count(), 3 + count_sections(p) * (ny + 1));
    out
}

fn count_sections(p: &ProblemSpec) -> usize {
    let metric = if p.metric().kind() == MetricKind::Riemannian { 3 } else { 1 };
    metric + 3 + p.grid().has_exact_distance() as usize
}

pub fn save_problem(path: &Path, p: &ProblemSpec) -> Result<()> {
    Ok(std::fs::write(path, write_problem(p))?)
}

// ---------------------------------------------------------------------------
// solution files

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFile {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub u: ScalarField,
    pub t: VectorField,
    pub energy: f64,
    pub dual: f64,
    pub gap: f64,
    pub iters: usize,
    pub converged: bool,
}

impl SolutionFile {
    pub fn from_solution(grid: &Grid2, s: &Solution) -> Self {
        SolutionFile {
            nx: grid.nx(),
            ny: grid.ny(),
            h: grid.h(),
            u: s.u.clone(),
            t: s.t.clone(),
            energy: s.primal_energy,
            dual: s.dual_energy,
            gap: s.gap,
            iters: s.iters,
            converged: s.converged,
        }
    }

    pub fn matches(&self, grid: &Grid2) -> bool {
        self.nx == grid.nx() && self.ny == grid.ny() && self.h == grid.h()
    }
}

pub fn write_solution(s: &SolutionFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SOLUTION_MAGIC}\ngrid {} {} {}", s.nx, s.ny, fmt_g17(s.h));
    write_section(&mut out, "u", s.nx, s.u.as_slice());
    write_section(&mut out, "Tx", s.nx, s.t.component(0).as_slice());
    write_section(&mut out, "Ty", s.nx, s.t.component(1).as_slice());
    let _ = writeln!(
        out,
        "energy={} dual={} gap={} iters={} converged={}",
        fmt_g17(s.energy),
        fmt_g17(s.dual),
        fmt_g17(s.gap),
        s.iters,
        s.converged as u8
    );
    out
}

pub fn read_solution(text: &str) -> Result<SolutionFile> {
    let mut lines = Lines::new(text);
    parse_magic(&mut lines, SOLUTION_MAGIC)?;
    let (nx, ny, h) = parse_grid_line(&mut lines)?;
    lines.expect_keyword("u")?;
    let u = lines.floats("u", nx, ny, false)?;
    lines.expect_keyword("Tx")?;
    let tx = lines.floats("Tx", nx, ny, false)?;
    lines.expect_keyword("Ty")?;
    let ty = lines.floats("Ty", nx, ny, false)?;
    let (n, footer) = lines.next("footer").map_err(|e| match e {
        Error::Parse { line, .. } => Error::Parse { line, msg: "missing footer".into() },
        e => e,
    })?;
    let mut vals: [Option<&str>; 5] = [None; 5];
    const KEYS: [&str; 5] = ["energy", "dual", "gap", "iters", "converged"];
    for tok in footer.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: n, msg: format!("footer token `{tok}` is not key=value") })?;
        let slot = KEYS
            .iter()
            .position(|&key| key == k)
            .ok_or_else(|| Error::Parse { line: n, msg: format!("unknown footer key `{k}`") })?;
        vals[slot] = Some(v);
    }
    let get = |i: usize| vals[i].ok_or_else(|| Error::Parse { line: n, msg: format!("footer lacks `{}`", KEYS[i]) });
    let num = |i: usize| -> Result<f64> {
        let s = get(i)?;
        match s {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => s.parse().map_err(|_| Error::Parse { line: n, msg: format!("footer `{}` is not a number", KEYS[i]) }),
        }
    };
    let (energy, dual, gap) = (num(0)?, num(1)?, num(2)?);
    let iters: usize = get(3)?.parse().map_err(|_| Error::Parse { line: n, msg: "footer `iters` is not an integer".into() })?;
    let converged = match get(4)? {
        "0" => false,
        "1" => true,
        other => return Err(Error::Parse { line: n, msg: format!("footer `converged` must be 0 or 1, found `{other}`") }),
    };
    lines.finish()?;
    let t = (0..nx * ny).map(|k| [tx[k], ty[k]]).collect();
    Ok(SolutionFile {
        nx,
        ny,
        h,
        u: ScalarField::new(nx, ny, u)?,
        t: VectorField::new(nx, ny, t)?,
        energy,
        dual,
        gap,
        iters,
        converged,
    })
}

pub fn load_solution(path: &Path) -> Result<SolutionFile> {
    read_solution(&std::fs::read_to_string(path)?)
}

pub fn save_solution(path: &Path, s: &SolutionFile) -> Result<()> {
    Ok(std::fs::write(path, write_solution(s))?)
}

// ---------------------------------------------------------------------------
// field files

/// Writes a single named scalar field; binary fields are rendered as 0/1.
pub fn write_field(name: &str, h: f64, f: &ScalarField) -> String {
    let (nx, ny) = f.dims();
    let mut out = String::new();
    let _ = writeln!(out, "{FIELD_MAGIC}\ngrid {nx} {ny} {}", fmt_g17(h));
    write_section(&mut out, name, nx, f.as_slice());
    out
}

pub fn read_field(text: &str) -> Result<(String, f64, ScalarField)> {
    let mut lines = Lines::new(text);
    parse_magic(&mut lines, FIELD_MAGIC)?;
    let (nx, ny, h) = parse_grid_line(&mut lines)?;
    let (_, name) = lines.next("field name")?;
    let v = lines.floats(name, nx, ny, true)?;
    lines.finish()?;
    Ok((name.to_string(), h, ScalarField::new(nx, ny, v)?))
}
