//! Semidefinite lower bounds on min f over the discrete box, with partial
//! variable fixings for branch and bound.

use crate::conic::{ConeSpec, ConicError, SolveOutcome, Sense};
use crate::lifted::build_gx;
use crate::model::{Expr, ModelBuilder};
use crate::objective::{evaluate_f_sdp, window_feasible, InstanceError, RobustQuadraticInstance};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Partial assignment of coordinates to +1/-1.
#[derive(Debug, Clone, Default)]
pub struct Fixing {
    values: BTreeMap<usize, f64>,
}

impl Fixing {
    pub fn new() -> Self {
        Fixing::default()
    }

    pub fn fix(&mut self, idx: usize, value: f64) {
        assert!(value == 1.0 || value == -1.0, "fixings must be +1 or -1");
        let prev = self.values.insert(idx, value);
        assert!(prev.is_none() || prev == Some(value), "conflicting fixing at {idx}");
    }

    pub fn with(&self, idx: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.fix(idx, value);
        out
    }

    pub fn get(&self, idx: usize) -> Option<f64> {
        self.values.get(&idx).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&i, &v)| (i, v))
    }

    /// Completes a relaxed point into a full vector, filling fixed slots.
    pub fn complete(&self, n: usize, free_vals: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        let mut it = free_vals.iter();
        for i in 0..n {
            out[i] = match self.get(i) {
                Some(v) => v,
                None => *it.next().expect("free value count mismatch"),
            };
        }
        assert!(it.next().is_none(), "free value count mismatch");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxationStatus {
    Optimal,
    /// The fixed coordinates cannot be extended to a feasible point.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct RelaxationResult {
    /// Lower bound on min f over points consistent with the fixing;
    /// `INFINITY` when no such point exists.
    pub bound: f64,
    /// Relaxed solution on the full coordinate set (fixings substituted).
    pub x_rel: DVector<f64>,
    /// Lifted matrix of the free block.
    pub x_mat: DMatrix<f64>,
    pub status: RelaxationStatus,
}

fn infeasible(n: usize) -> RelaxationResult {
    RelaxationResult {
        bound: f64::INFINITY,
        x_rel: DVector::zeros(n),
        x_mat: DMatrix::zeros(0, 0),
        status: RelaxationStatus::Infeasible,
    }
}

/// Solves the semidefinite relaxation of min f over the sign vectors in the
/// cardinality window, with the coordinates in `fixing` pinned. Fixed
/// coordinates are substituted out, so the program is over the free block
/// only.
pub fn lower_bound(
    inst: &RobustQuadraticInstance,
    fixing: &Fixing,
    tol: f64,
) -> Result<RelaxationResult, ConicError> {
    let n = inst.n;
    for (i, _) in fixing.iter() {
        assert!(i < n, "fixing index {i} out of range");
    }
    let free: Vec<usize> = (0..n).filter(|i| fixing.get(*i).is_none()).collect();
    let m = free.len();
    let s: f64 = fixing.iter().map(|(_, v)| v).sum();

    // cardinality window available to the free block
    let mut lo = inst.l as f64 - s;
    let mut hi = inst.u as f64 - s;
    let mf = m as f64;
    lo = lo.max(-mf);
    hi = hi.min(mf);
    // coordinate sums over m signs share the parity of m
    let parity = |v: f64| (v + mf).rem_euclid(2.0) == 0.0;
    let lo_i = {
        let mut v = lo.ceil();
        if !parity(v) {
            v += 1.0;
        }
        v
    };
    let hi_i = {
        let mut v = hi.floor();
        if !parity(v) {
            v -= 1.0;
        }
        v
    };
    if lo_i > hi_i {
        return Ok(infeasible(n));
    }

    if m == 0 {
        let x = fixing.complete(n, &[]);
        if !window_feasible(n, inst.l, inst.u) || s < inst.l as f64 - 0.5 || s > inst.u as f64 + 0.5
        {
            return Ok(infeasible(n));
        }
        let (value, _) = evaluate_f_sdp(inst, &x)?;
        return Ok(RelaxationResult {
            bound: value,
            x_rel: x,
            x_mat: DMatrix::zeros(0, 0),
            status: RelaxationStatus::Optimal,
        });
    }

    // reduced data: quadratic over the free block, linear and uncertainty
    // shifts from the fixed one
    let x_fixed: Vec<f64> = (0..n).filter_map(|i| fixing.get(i)).collect();
    let fixed: Vec<usize> = (0..n).filter(|i| fixing.get(*i).is_some()).collect();
    let mut a_red = DMatrix::zeros(m, m);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a_red[(r, c)] = inst.a_mat[(i, j)];
        }
    }
    let mut a_lin = DVector::zeros(m);
    for (r, &i) in free.iter().enumerate() {
        let mut v = inst.a_vec[i];
        for (k, &j) in fixed.iter().enumerate() {
            v += inst.a_mat[(i, j)] * x_fixed[k];
        }
        a_lin[r] = v;
    }
    let mut constant = 0.0;
    for (k1, &i) in fixed.iter().enumerate() {
        constant += 2.0 * inst.a_vec[i] * x_fixed[k1];
        for (k2, &j) in fixed.iter().enumerate() {
            constant += inst.a_mat[(i, j)] * x_fixed[k1] * x_fixed[k2];
        }
    }
    // c_red = c + B_fixed' x_fixed feeds the sup-term block
    let mut c_red = inst.c_vec.clone();
    for (k, &j) in fixed.iter().enumerate() {
        for t in 0..inst.q {
            c_red[t] += inst.b_mat[(t, j)] * x_fixed[k];
        }
    }

    let gx = build_gx(m, lo_i as i64, hi_i as i64).map_err(|e: InstanceError| {
        ConicError::NumericalFailure(format!("reduced window rejected: {e}"))
    })?;

    let mut mb = ModelBuilder::new(Sense::Min);
    let x_vars = mb.vars(m);
    let x_lift = mb.sym_vars(m);
    let x_exprs: Vec<Expr> = x_vars.iter().map(|&v| Expr::var(v)).collect();
    gx.append(&mut mb, &x_exprs, &x_lift);

    // sup-term epigraph: [[alpha, (Bx + c_red)'], [., -C - lam I]] psd, lam <= 0
    let alpha = mb.var();
    let lam = mb.var();
    let q = inst.q;
    mb.add_psd_block(q + 1, |r, c| {
        if r == 0 && c == 0 {
            Expr::var(alpha)
        } else if r == 0 {
            let j = c - 1;
            let mut e = Expr::constant(c_red[j]);
            for (k, &i) in free.iter().enumerate() {
                if inst.b_mat[(j, i)] != 0.0 {
                    e.terms.push((x_vars[k], inst.b_mat[(j, i)]));
                }
            }
            e
        } else {
            let mut e = Expr::constant(-inst.c_mat[(r - 1, c - 1)]);
            if r == c {
                e.terms.push((lam, -1.0));
            }
            e
        }
    });
    mb.add_block(ConeSpec::nonnegative(1), vec![Expr::var_scaled(lam, -1.0)]);

    let mut obj = x_lift.frob(&a_red);
    for k in 0..m {
        if a_lin[k] != 0.0 {
            obj.terms.push((x_vars[k], 2.0 * a_lin[k]));
        }
    }
    obj.terms.push((alpha, 1.0));
    obj.terms.push((lam, -1.0));
    obj = obj + Expr::constant(constant);
    mb.set_objective(obj);

    let prog = mb.finish().instantiate(&[]);
    let sol = prog.solve(tol)?;
    match sol.status {
        SolveOutcome::Optimal => {}
        SolveOutcome::Infeasible => return Ok(infeasible(n)),
        other => {
            return Err(ConicError::NumericalFailure(format!(
                "relaxation ended with {other:?}"
            )))
        }
    }

    let free_vals: Vec<f64> = x_vars.iter().map(|&v| sol.primal[v]).collect();
    let x_rel = fixing.complete(n, &free_vals);
    let x_mat = x_lift.extract(&sol.primal);
    Ok(RelaxationResult {
        bound: sol.objective_value,
        x_rel,
        x_mat,
        status: RelaxationStatus::Optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::brute_force;
    use crate::conic::DEFAULT_SOLVER_TOL;
    use crate::generator::{generate, GenerationRecipe};

    #[test]
    fn bound_below_enumeration_optimum() {
        for seed in 0..10u64 {
            let inst = generate(&GenerationRecipe::default(), 6, 3, -4, 4, seed, 1).unwrap();
            let r = lower_bound(&inst, &Fixing::new(), DEFAULT_SOLVER_TOL).unwrap();
            assert_eq!(r.status, RelaxationStatus::Optimal);
            let (_, opt) = brute_force(&inst).unwrap();
            assert!(
                r.bound <= opt + 1e-5 * (1.0 + opt.abs()),
                "seed {seed}: bound {} above optimum {opt}",
                r.bound
            );
        }
    }

    #[test]
    fn all_fixed_equals_f() {
        let inst = generate(&GenerationRecipe::default(), 4, 2, -2, 2, 40, 0).unwrap();
        let mut fixing = Fixing::new();
        for (i, v) in [(0, 1.0), (1, -1.0), (2, 1.0), (3, -1.0)] {
            fixing.fix(i, v);
        }
        let r = lower_bound(&inst, &fixing, DEFAULT_SOLVER_TOL).unwrap();
        let x = fixing.complete(4, &[]);
        let (f, _) = crate::objective::evaluate_f_sdp(&inst, &x).unwrap();
        assert!((r.bound - f).abs() <= 1e-5 * (1.0 + f.abs()));
        assert_eq!(r.x_rel, x);
    }

    #[test]
    fn infeasible_fixing_gives_sentinel() {
        // window (2, 4): fixing three of four coordinates to -1 caps e'x at -2
        let inst = generate(&GenerationRecipe::default(), 4, 2, 2, 4, 41, 0).unwrap();
        let mut fixing = Fixing::new();
        fixing.fix(0, -1.0);
        fixing.fix(1, -1.0);
        fixing.fix(2, -1.0);
        let r = lower_bound(&inst, &fixing, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(r.status, RelaxationStatus::Infeasible);
        assert_eq!(r.bound, f64::INFINITY);
    }

    #[test]
    fn bound_monotone_under_fixing() {
        let inst = generate(&GenerationRecipe::default(), 6, 3, -2, 4, 42, 0).unwrap();
        let parent = lower_bound(&inst, &Fixing::new(), DEFAULT_SOLVER_TOL).unwrap();
        for value in [-1.0, 1.0] {
            let child =
                lower_bound(&inst, &Fixing::new().with(2, value), DEFAULT_SOLVER_TOL).unwrap();
            if child.status == RelaxationStatus::Optimal {
                assert!(child.bound >= parent.bound - 1e-6);
            }
        }
    }

    #[test]
    fn fixed_coordinates_exact_in_x_rel() {
        let inst = generate(&GenerationRecipe::default(), 5, 2, -3, 3, 43, 0).unwrap();
        let fixing = Fixing::new().with(1, -1.0).with(3, 1.0);
        let r = lower_bound(&inst, &fixing, DEFAULT_SOLVER_TOL).unwrap();
        assert_eq!(r.x_rel[1], -1.0);
        assert_eq!(r.x_rel[3], 1.0);
        for i in [0, 2, 4] {
            assert!(r.x_rel[i].abs() <= 1.0 + 1e-6);
        }
    }
}
