use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lgo_core::{io, VectorField};
use tempfile::TempDir;

fn lgo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgo")).args(args).output().expect("spawn lgo")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn example(dir: &TempDir, name: &str, n: usize, metric: &str) -> PathBuf {
    let out = path(dir, &format!("{name}-{n}-{metric}.txt"));
    let o = lgo(&["example", name, "--n", &n.to_string(), "--metric", metric, "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn solve(problem: &Path, out: &Path) -> Output {
    lgo(&["solve", "--problem", s(problem), "--out", s(out)])
}

#[test]
fn constant_data_solves_with_zero_gap() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "constant", 16, "euclidean-weighted");
    let o = solve(&p, &path(&dir, "sol.txt"));
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(value(&out, "gap").parse::<f64>().unwrap(), 0.0);
    assert_eq!(value(&out, "energy").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn step_energy_and_verification() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "step", 32, "ell1-weighted");
    let sol = path(&dir, "sol.txt");
    let o = solve(&p, &sol);
    assert_eq!(o.status.code(), Some(0));
    let energy: f64 = value(&stdout(&o), "energy").parse().unwrap();
    assert!((energy - 1.0).abs() <= 5.0 / 32.0, "energy {energy}");

    let v = lgo(&["verify", "--problem", s(&p), "--solution", s(&sol)]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    let text = stdout(&v);
    assert_eq!(value(&text, "pass"), "1");
    assert!(value(&text, "footer_residual").parse::<f64>().unwrap() <= 1e-12);

    // doubling the flux breaks dual feasibility
    let mut f = io::load_solution(&sol).unwrap();
    let doubled: Vec<[f64; 2]> = f.t.as_slice().iter().map(|&[a, b]| [2.0 * a, 2.0 * b]).collect();
    f.t = VectorField::new(f.nx, f.ny, doubled).unwrap();
    let bad = path(&dir, "bad.txt");
    io::save_solution(&bad, &f).unwrap();
    let v = lgo(&["verify", "--problem", s(&p), "--solution", s(&bad)]);
    assert_eq!(v.status.code(), Some(3));
    assert_eq!(value(&stdout(&v), "pass"), "0");
}

#[test]
fn truncated_problem_names_the_missing_section() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "step", 8, "euclidean-weighted");
    let text = std::fs::read_to_string(&p).unwrap();
    let cut: String = text.lines().take_while(|l| !l.starts_with("psi")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&p, cut).unwrap();
    let o = solve(&p, &path(&dir, "sol.txt"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("psi"), "{err}");
}

#[test]
fn solution_on_another_grid_is_rejected() {
    let dir = TempDir::new().unwrap();
    let p8 = example(&dir, "step", 8, "euclidean-weighted");
    let p16 = example(&dir, "step", 16, "euclidean-weighted");
    let sol = path(&dir, "sol.txt");
    solve(&p8, &sol);
    let o = lgo(&["verify", "--problem", s(&p16), "--solution", s(&sol)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not match"));
}

#[test]
fn levelset_of_the_step_is_the_right_half() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "step", 16, "ell1-weighted");
    let o = lgo(&["levelset", "--problem", s(&p), "--t", "0.5", "--stencil", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(value(&text, "cut_value").parse::<f64>().unwrap(), 1.0);
    assert_eq!(value(&text, "cells_in_set"), "128");
}

#[test]
fn comparing_a_problem_with_itself_passes() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "block", 16, "ell1-weighted");
    let o = lgo(&["compare", "--problem", s(&p), "--problem2", s(&p)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn square_fails_the_barrier_check() {
    let dir = TempDir::new().unwrap();
    let sq = example(&dir, "square", 64, "euclidean-weighted");
    assert_eq!(lgo(&["barrier-check", "--problem", s(&sq)]).status.code(), Some(4));
    let disk = example(&dir, "disk", 64, "euclidean-weighted");
    assert_eq!(lgo(&["barrier-check", "--problem", s(&disk)]).status.code(), Some(0));
}

#[test]
fn solves_are_deterministic_and_footers_consistent() {
    let dir = TempDir::new().unwrap();
    let p = example(&dir, "block", 16, "euclidean-weighted");
    let (a, b) = (path(&dir, "a.txt"), path(&dir, "b.txt"));
    let oa = solve(&p, &a);
    solve(&p, &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let f = io::load_solution(&a).unwrap();
    let out = stdout(&oa);
    assert_eq!(value(&out, "energy").parse::<f64>().unwrap(), f.energy);
    assert_eq!(value(&out, "iters").parse::<usize>().unwrap(), f.iters);
}

#[test]
fn malformed_arguments_exit_nonzero() {
    let o = lgo(&["levelset", "--problem", "/nonexistent/problem.txt", "--t", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
}
