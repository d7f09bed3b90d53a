//! End-to-end acceptance checks for the whole pipeline. Each test prints a
//! single PASS/FAIL line; run with `cargo test --test acceptance -- --nocapture`
//! to see them all.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use concave_tent::bnb::{brute_force, solve, BnBConfig, RoundingMode};
use concave_tent::conic::DEFAULT_SOLVER_TOL;
use concave_tent::generator::{generate, GenerationRecipe};
use concave_tent::objective::{
    evaluate_f_oracle, evaluate_f_sdp, RobustQuadraticInstance,
};
use concave_tent::relaxation::{lower_bound, Fixing, RelaxationStatus};
use concave_tent::rounding::{closest_feasible, linear_minimize_over_x};
use concave_tent::tent::{build_tent, build_tent01, evaluate_tent, ClassicalTent, TentProgram};

const TOL: f64 = DEFAULT_SOLVER_TOL;

fn report(id: u32, desc: &str, ok: bool) {
    println!("[{id:02}] {desc} ... {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "[{id:02}] {desc}");
}

fn point(vals: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(vals)
}

fn grid01() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// Two-piece data whose tent has the closed form 1 - x.
const W1: [f64; 2] = [1.0, -8.0];
const W2: [f64; 2] = [-2.0, 2.0];

fn eval01(tp: &TentProgram, x: f64) -> f64 {
    evaluate_tent(tp, &point(&[x]), TOL).unwrap().value
}

/// Evaluates the tent, relaxing the solver tolerance when the interior-point
/// method stalls at the tight default.
fn eval_robust(tp: &TentProgram, x: &DVector<f64>) -> concave_tent::tent::TentEvaluation {
    for tol in [TOL, 1e-7, 1e-6] {
        if let Ok(ev) = evaluate_tent(tp, x, tol) {
            return ev;
        }
    }
    evaluate_tent(tp, x, 1e-5).unwrap()
}

/// Random feasible sign vector with eᵀx inside the window.
fn random_vertex(rng: &mut ChaCha8Rng, n: usize, l: i64, u: i64) -> DVector<f64> {
    loop {
        let y: DVector<f64> =
            DVector::from_fn(n, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let s = y.sum().round() as i64;
        if s >= l && s <= u {
            return y;
        }
    }
}

/// Random point of conv(X) as a convex combination of feasible vertices.
fn random_hull_point(rng: &mut ChaCha8Rng, n: usize, l: i64, u: i64) -> DVector<f64> {
    let k = 3;
    let mut w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|wi| *wi /= s);
    let mut x = DVector::zeros(n);
    for wi in w {
        x += random_vertex(rng, n, l, u) * wi;
    }
    x
}

#[test]
fn a01_two_piece_tent_closed_form() {
    let start = Instant::now();
    let tp = build_tent01(W1, W2, false);
    let err = grid01()
        .iter()
        .map(|&x| (eval01(&tp, x) - (1.0 - x)).abs())
        .fold(0.0_f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        &format!("two-piece tent equals 1-x on [0,1] grid (max err {err:.2e}, {elapsed:.2}s)"),
        err <= 1e-5 && elapsed < 1.0,
    );
}

#[test]
fn a02_two_piece_relaxed_closed_form() {
    let tp = build_tent01(W1, W2, true);
    let err = grid01()
        .iter()
        .map(|&x| {
            let want = 3.0 * (1.0 - x).sqrt() + 2.0 * x - 2.0;
            (eval01(&tp, x) - want).abs()
        })
        .fold(0.0_f64, f64::max);
    report(
        2,
        &format!("relaxed two-piece tent equals 3*sqrt(1-x)+2x-2 (max err {err:.2e})"),
        err <= 1e-5,
    );
}

#[test]
fn a03_two_piece_dual_point() {
    // Dual point: alpha = delta = eps = pi = 3, beta = gamma = -3. The dual
    // matrix is 3vv' with v = (1,-1,-1), so feasibility and the objective
    // value 1 - x are arithmetic identities.
    let (alpha, beta, gamma, delta, eps, pi): (f64, f64, f64, f64, f64, f64) =
        (3.0, -3.0, -3.0, 3.0, 3.0, 3.0);
    let m = DMatrix::from_row_slice(3, 3, &[alpha, beta, gamma, beta, delta, eps, gamma, eps, pi]);
    let min_eig = m
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let psd = min_eig >= -1e-12;
    let lin = (3.0 + 2.0 * beta + delta).abs() <= 1e-12;
    let ineq = 2.0 * eps <= 10.0 + 1e-12;
    let obj_err = grid01()
        .iter()
        .map(|&x| {
            let obj = x * (2.0 * gamma + pi + 2.0) + alpha - 2.0;
            (obj - (1.0 - x)).abs()
        })
        .fold(0.0_f64, f64::max);
    report(
        3,
        &format!("dual point feasible, objective = 1-x (max err {obj_err:.2e})"),
        psd && lin && ineq && obj_err <= 1e-12,
    );
}

#[test]
fn a04_tent_agrees_with_f_on_vertices() {
    let start = Instant::now();
    let recipe = GenerationRecipe::default();
    let mut worst = 0.0_f64;
    for rep in 0..20u64 {
        let n = 4 + (rep as usize % 5);
        let q = 2 + (rep as usize % 3);
        let w = (n as i64) - 2;
        let inst = generate(&recipe, n, q, -w, w, 200 + rep, rep).unwrap();
        let tp = build_tent(&inst, true).unwrap();
        for x in inst.enumerate_feasible() {
            let g = eval_robust(&tp, &x).value;
            let (f, _) = evaluate_f_oracle(&inst, &x);
            worst = worst.max((g - f).abs() / (1.0 + f.abs()));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        4,
        &format!("tent equals f on all vertices, 20 instances (max rel err {worst:.2e}, {elapsed:.1}s)"),
        worst <= 1e-4 && elapsed < 300.0,
    );
}

#[test]
fn a05_tent_concavity_midpoints() {
    let recipe = GenerationRecipe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for rep in 0..5u64 {
        let n = 4 + (rep as usize % 3);
        let w = (n as i64) - 2;
        let inst = generate(&recipe, n, 3, -w, w, 500 + rep, rep).unwrap();
        let tp = build_tent(&inst, true).unwrap();
        let verts = inst.enumerate_feasible();
        let gv: Vec<f64> = verts
            .iter()
            .map(|x| evaluate_tent(&tp, x, TOL).unwrap().value)
            .collect();
        for _ in 0..200 {
            let i = rng.gen_range(0..verts.len());
            let j = rng.gen_range(0..verts.len());
            let t: f64 = rng.gen();
            let xm = &verts[i] * t + &verts[j] * (1.0 - t);
            let gm = eval_robust(&tp, &xm).value;
            worst = worst.max(t * gv[i] + (1.0 - t) * gv[j] - gm);
        }
    }
    report(
        5,
        &format!("tent concave along vertex chords (max violation {worst:.2e})"),
        worst <= 1e-6,
    );
}

#[test]
fn a06_supergradient_inequality() {
    let recipe = GenerationRecipe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for rep in 0..3u64 {
        let n = 5;
        let inst = generate(&recipe, n, 3, -3, 3, 600 + rep, rep).unwrap();
        let tp = build_tent(&inst, true).unwrap();
        for _ in 0..4 {
            let xbar = random_hull_point(&mut rng, n, inst.l, inst.u);
            let ev = eval_robust(&tp, &xbar);
            for _ in 0..50 {
                let x = random_hull_point(&mut rng, n, inst.l, inst.u);
                let g = eval_robust(&tp, &x).value;
                let rhs = ev.value + ev.supergradient.dot(&(&x - &xbar)) + ev.epsilon;
                worst = worst.max(g - rhs);
            }
        }
    }
    report(
        6,
        &format!("epsilon-supergradient inequality holds (max violation {worst:.2e})"),
        worst <= 1e-6,
    );
}

#[test]
fn a07_sdp_matches_eigen_oracle() {
    let recipe = GenerationRecipe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for rep in 0..100u64 {
        let n = 3 + (rep as usize % 6);
        let q = 1 + (rep as usize % 4);
        let w = n as i64;
        let inst = generate(&recipe, n, q, -w, w, 700 + rep, rep).unwrap();
        let x = random_vertex(&mut rng, n, inst.l, inst.u);
        let (f_sdp, _) = evaluate_f_sdp(&inst, &x).unwrap();
        let (f_eig, _) = evaluate_f_oracle(&inst, &x);
        worst = worst.max((f_sdp - f_eig).abs() / (1.0 + f_eig.abs()));
    }
    report(
        7,
        &format!("SDP evaluation matches eigen oracle, 100 trials (max rel err {worst:.2e})"),
        worst <= 1e-6,
    );
}

#[test]
fn a08_root_bound_below_optimum() {
    let recipe = GenerationRecipe::default();
    let mut worst = f64::NEG_INFINITY;
    for rep in 0..50u64 {
        let n = 4 + (rep as usize % 7);
        let q = 2 + (rep as usize % 3);
        let w = (n as i64) - 2 + (rep as i64 % 3);
        let inst = generate(&recipe, n, q, -w, w.min(n as i64), 800 + rep, rep).unwrap();
        let res = lower_bound(&inst, &Fixing::new(), TOL).unwrap();
        assert!(matches!(res.status, RelaxationStatus::Optimal));
        let (_, opt) = brute_force(&inst).unwrap();
        worst = worst.max((res.bound - opt) / (1.0 + opt.abs()));
    }
    report(
        8,
        &format!("root relaxation bounds optimum from below, 50 instances (max excess {worst:.2e})"),
        worst <= 1e-5,
    );
}

#[test]
fn a09_combinatorial_rounding_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.gen_range(2..=12usize);
        let mut l = rng.gen_range(-(n as i64)..=n as i64);
        let mut u = rng.gen_range(-(n as i64)..=n as i64);
        if l > u {
            std::mem::swap(&mut l, &mut u);
        }
        let vertices: Vec<DVector<f64>> = (0..(1usize << n))
            .map(|mask| {
                DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
            })
            .filter(|x| {
                let s: i64 = x.iter().sum::<f64>().round() as i64;
                s >= l && s <= u
            })
            .collect();

        let y: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let best_lin = vertices.iter().map(|x| y.dot(x)).fold(f64::INFINITY, f64::min);
        match linear_minimize_over_x(&y, l, u) {
            Some((x, v)) => {
                ok &= (v - best_lin).abs() <= 1e-12 && (y.dot(&x) - v).abs() <= 1e-12;
            }
            None => ok &= vertices.is_empty(),
        }

        let x0: DVector<f64> = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
        let best_dist = vertices
            .iter()
            .map(|x| (x - &x0).norm_squared())
            .fold(f64::INFINITY, f64::min);
        match closest_feasible(&x0, l, u) {
            Some(x) => ok &= ((&x - &x0).norm_squared() - best_dist).abs() <= 1e-12,
            None => ok &= vertices.is_empty(),
        }
    }
    report(9, "linear minimization and snapping match enumeration, 200 trials", ok);
}

#[test]
fn a10_branch_and_bound_matches_enumeration() {
    let recipe = GenerationRecipe::default();
    let mut worst = 0.0_f64;
    let mut bound_ok = true;
    for rep in 0..30u64 {
        let n = 4 + (rep as usize % 7);
        let q = 2 + (rep as usize % 3);
        let w = (n as i64) - 2;
        let inst = generate(&recipe, n, q, -w, w, 1000 + rep, rep).unwrap();
        let (_, opt) = brute_force(&inst).unwrap();
        for mode in [RoundingMode::Classical, RoundingMode::TentGuided] {
            let res = solve(&inst, &BnBConfig { mode, ..Default::default() }).unwrap();
            assert!(res.proven);
            worst = worst.max((res.optimum - opt).abs());
            for rec in &res.node_log {
                if rec.pruned {
                    bound_ok &= rec.bound >= res.optimum - 1e-6;
                }
            }
        }
    }
    report(
        10,
        &format!("both rounding modes reach the enumeration optimum, 30 instances (max err {worst:.2e})"),
        worst <= 1e-5 && bound_ok,
    );
}

#[test]
fn a11_conic_tent_dominated_by_classical() {
    let recipe = GenerationRecipe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::NEG_INFINITY;
    for rep in 0..10u64 {
        let n = 4 + (rep as usize % 3);
        let q = 2;
        let base = generate(&recipe, n, q, -(n as i64) + 2, n as i64 - 2, 1100 + rep, rep).unwrap();
        // decoupled uncertainty: B = 0, C = -I
        let inst = RobustQuadraticInstance::new(
            base.a_mat.clone(),
            base.a_vec.clone(),
            DMatrix::zeros(q, n),
            -DMatrix::identity(q, q),
            base.c_vec.clone(),
            base.l,
            base.u,
            None,
        )
        .unwrap();
        let tp = build_tent(&inst, true).unwrap();
        let ct = ClassicalTent::with_default_multipliers(&inst).unwrap();
        for _ in 0..100 {
            let x = random_hull_point(&mut rng, n, inst.l, inst.u);
            let g = eval_robust(&tp, &x).value;
            worst = worst.max(g - ct.value(&x));
        }
    }
    report(
        11,
        &format!("conic tent never above the classical tent (max excess {worst:.2e})"),
        worst <= 1e-5,
    );
}

#[test]
fn a12_cuts_only_tighten() {
    let recipe = GenerationRecipe::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = f64::NEG_INFINITY;
    for rep in 0..4u64 {
        let n = 4 + (rep as usize % 3);
        let inst = generate(&recipe, n, 3, -(n as i64) + 2, n as i64 - 2, 1200 + rep, rep).unwrap();
        let with = build_tent(&inst, true).unwrap();
        let without = build_tent(&inst, false).unwrap();
        for _ in 0..25 {
            let x = random_hull_point(&mut rng, n, inst.l, inst.u);
            let gw = eval_robust(&with, &x).value;
            let go = eval_robust(&without, &x).value;
            worst = worst.max(gw - go);
        }
    }
    report(
        12,
        &format!("extra SOC rows only lower the tent (max excess {worst:.2e})"),
        worst <= 1e-6,
    );
}

#[test]
fn a13_scale_smoke() {
    let recipe = GenerationRecipe::default();

    let big = generate(&recipe, 30, 10, -20, 20, 1300, 0).unwrap();
    let start = Instant::now();
    let res = lower_bound(&big, &Fixing::new(), TOL).unwrap();
    let root_s = start.elapsed().as_secs_f64();
    let root_ok =
        matches!(res.status, RelaxationStatus::Optimal) && res.bound.is_finite() && root_s < 60.0;

    let mid = generate(&recipe, 14, 3, -8, 8, 1301, 0).unwrap();
    let mut counts = Vec::new();
    let mut full_ok = true;
    let mut opts = Vec::new();
    for mode in [RoundingMode::Classical, RoundingMode::TentGuided] {
        let r = solve(&mid, &BnBConfig { mode, ..Default::default() }).unwrap();
        full_ok &= r.proven && r.node_count <= 10_000;
        counts.push(r.node_count);
        opts.push(r.optimum);
    }
    full_ok &= (opts[0] - opts[1]).abs() <= 1e-5 * (1.0 + opts[0].abs());

    report(
        13,
        &format!(
            "n=30 root solve in {root_s:.1}s; n=14 search nodes: classical {} vs tent-guided {}",
            counts[0], counts[1]
        ),
        root_ok && full_ok,
    );
}
