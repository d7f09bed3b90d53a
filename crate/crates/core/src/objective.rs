//! The robust quadratic objective with ball uncertainty, its SDP and
//! trust-region evaluations, and the Pasch-Hausdorff envelope of
//! max-of-affine functions.

use crate::conic::{ConeSpec, ConicError, SolveOutcome, DEFAULT_SOLVER_TOL};
use crate::model::{Expr, ModelBuilder};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("matrix {0} is not symmetric (max asymmetry {1})")]
    Asymmetric(&'static str, f64),
    #[error("dimension mismatch in field {0}")]
    Dimension(&'static str),
    #[error("window [{l}, {u}] contains no achievable value of e'x for n = {n}")]
    EmptyWindow { n: usize, l: i64, u: i64 },
}

/// True iff some x in {-1,1}^n has l <= e'x <= u. Achievable sums are
/// {-n, -n+2, ..., n}.
pub fn window_feasible(n: usize, l: i64, u: i64) -> bool {
    if l > u {
        return false;
    }
    let n = n as i64;
    let lo = l.max(-n);
    let hi = u.min(n);
    if lo > hi {
        return false;
    }
    // any value in [lo, hi] with the parity of n?
    let first = if (lo + n) % 2 == 0 { lo } else { lo + 1 };
    first <= hi
}

/// Problem data for `min_{x in X} x'Ax + 2a'x + sup_{|u|<=1} 2u'Bx + u'Cu + 2c'u`
/// with `X = {x in {-1,1}^n : l <= e'x <= u}`.
#[derive(Debug, Clone)]
pub struct RobustQuadraticInstance {
    pub n: usize,
    pub q: usize,
    pub a_mat: DMatrix<f64>,
    pub a_vec: DVector<f64>,
    pub b_mat: DMatrix<f64>,
    pub c_mat: DMatrix<f64>,
    pub c_vec: DVector<f64>,
    pub l: i64,
    pub u: i64,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    q: usize,
    l: i64,
    u: i64,
    #[serde(rename = "A")]
    a_mat: Vec<Vec<f64>>,
    a: Vec<f64>,
    #[serde(rename = "B")]
    b_mat: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c_mat: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn to_dense(rows: &[Vec<f64>], nr: usize, nc: usize, name: &'static str) -> Result<DMatrix<f64>, InstanceError> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(InstanceError::Dimension(name));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

/// Symmetrizes by averaging with the transpose; errors if the asymmetry
/// exceeds 1e-9.
fn symmetrize(m: DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>, InstanceError> {
    let asym = (&m - m.transpose()).abs().max();
    if asym > 1e-9 {
        return Err(InstanceError::Asymmetric(name, asym));
    }
    Ok((&m + m.transpose()) * 0.5)
}

impl RobustQuadraticInstance {
    pub fn new(
        a_mat: DMatrix<f64>,
        a_vec: DVector<f64>,
        b_mat: DMatrix<f64>,
        c_mat: DMatrix<f64>,
        c_vec: DVector<f64>,
        l: i64,
        u: i64,
        seed: Option<u64>,
    ) -> Result<Self, InstanceError> {
        let n = a_mat.nrows();
        let q = c_mat.nrows();
        let a_mat = symmetrize(a_mat, "A")?;
        let c_mat = symmetrize(c_mat, "C")?;
        if a_vec.len() != n {
            return Err(InstanceError::Dimension("a"));
        }
        if b_mat.nrows() != q || b_mat.ncols() != n {
            return Err(InstanceError::Dimension("B"));
        }
        if c_vec.len() != q {
            return Err(InstanceError::Dimension("c"));
        }
        if !window_feasible(n, l, u) {
            return Err(InstanceError::EmptyWindow { n, l, u });
        }
        Ok(RobustQuadraticInstance { n, q, a_mat, a_vec, b_mat, c_mat, c_vec, l, u, seed })
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let raw: RawInstance = serde_json::from_str(s).map_err(|e| e.to_string())?;
        let a_mat = to_dense(&raw.a_mat, raw.n, raw.n, "A").map_err(|e| e.to_string())?;
        let b_mat = to_dense(&raw.b_mat, raw.q, raw.n, "B").map_err(|e| e.to_string())?;
        let c_mat = to_dense(&raw.c_mat, raw.q, raw.q, "C").map_err(|e| e.to_string())?;
        RobustQuadraticInstance::new(
            a_mat,
            DVector::from_vec(raw.a.clone()),
            b_mat,
            c_mat,
            DVector::from_vec(raw.c.clone()),
            raw.l,
            raw.u,
            raw.seed,
        )
        .map_err(|e| e.to_string())
    }

    pub fn to_json(&self) -> String {
        let mat = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
        };
        let raw = RawInstance {
            n: self.n,
            q: self.q,
            l: self.l,
            u: self.u,
            a_mat: mat(&self.a_mat),
            a: self.a_vec.iter().cloned().collect(),
            b_mat: mat(&self.b_mat),
            c_mat: mat(&self.c_mat),
            c: self.c_vec.iter().cloned().collect(),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&raw).expect("instance serialization")
    }

    /// The deterministic quadratic part `x'Ax + 2a'x`.
    pub fn quadratic_part(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.a_mat * x)[(0, 0)] + 2.0 * self.a_vec.dot(x)
    }

    /// Vertices of X, enumerated in lexicographic order with -1 < 1.
    /// Guarded to n <= 22.
    pub fn enumerate_feasible(&self) -> Vec<DVector<f64>> {
        assert!(self.n <= 22, "enumeration guard");
        let mut out = Vec::new();
        for k in 0..(1u64 << self.n) {
            let x: DVector<f64> = DVector::from_fn(self.n, |i, _| {
                if (k >> (self.n - 1 - i)) & 1 == 1 {
                    1.0
                } else {
                    -1.0
                }
            });
            let s = x.sum().round() as i64;
            if s >= self.l && s <= self.u {
                out.push(x);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// SDP evaluation of f

/// Optimal `(alpha, lambda)` of the S-Lemma block certifying the sup term.
#[derive(Debug, Clone, Copy)]
pub struct SupCertificate {
    pub alpha: f64,
    pub lambda: f64,
}

/// Evaluates `f(x)` by the semidefinite characterization of the sup term:
/// `min alpha - lambda` over the PSD block `[[alpha, g'], [g, -C - lambda I]]`
/// with `g = Bx + c` and `lambda <= 0`.
pub fn evaluate_f_sdp(
    inst: &RobustQuadraticInstance,
    x: &DVector<f64>,
) -> Result<(f64, SupCertificate), ConicError> {
    assert_eq!(x.len(), inst.n);
    let g = &inst.b_mat * x + &inst.c_vec;
    let sup = sup_term_sdp(&inst.c_mat, &g)?;
    Ok((inst.quadratic_part(x) + sup.0, sup.1))
}

/// `sup_{|u|<=1} u'Cu + 2g'u` by SDP.
pub fn sup_term_sdp(c_mat: &DMatrix<f64>, g: &DVector<f64>) -> Result<(f64, SupCertificate), ConicError> {
    let q = g.len();
    let mut mb = ModelBuilder::new(crate::conic::Sense::Min);
    let alpha = mb.var();
    let lambda = mb.var();
    mb.add_psd_block(q + 1, |r, c| {
        if r == 0 && c == 0 {
            Expr::var(alpha)
        } else if r == 0 {
            Expr::constant(g[c - 1])
        } else {
            let mut e = Expr::constant(-c_mat[(r - 1, c - 1)]);
            if r == c {
                e = e + Expr::var_scaled(lambda, -1.0);
            }
            e
        }
    });
    mb.add_block(ConeSpec::nonnegative(1), vec![-Expr::var(lambda)]);
    mb.set_objective(Expr::var(alpha) - Expr::var(lambda));
    let prog = mb.finish().base;
    let sol = prog.solve(DEFAULT_SOLVER_TOL)?;
    if sol.status != SolveOutcome::Optimal {
        return Err(ConicError::NumericalFailure(format!(
            "sup-term SDP ended with {:?}",
            sol.status
        )));
    }
    Ok((
        sol.objective_value,
        SupCertificate { alpha: sol.primal[alpha], lambda: sol.primal[lambda] },
    ))
}

// ---------------------------------------------------------------------------
// trust-region oracle for f

/// Eigen-based oracle for `max_{|u|<=1} u'Cu + 2g'u`, reusable across many
/// right-hand sides g (the eigendecomposition of C is computed once).
pub struct TrustRegionOracle {
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl TrustRegionOracle {
    pub fn new(c_mat: &DMatrix<f64>) -> Self {
        let se = c_mat.clone().symmetric_eigen();
        TrustRegionOracle { eigvals: se.eigenvalues, eigvecs: se.eigenvectors }
    }

    /// Returns `(value, u_star)` with `|u_star| <= 1 + 1e-9`.
    pub fn maximize(&self, g: &DVector<f64>) -> (f64, DVector<f64>) {
        let q = g.len();
        if q == 0 {
            return (0.0, DVector::zeros(0));
        }
        let ghat = self.eigvecs.transpose() * g;
        let lam_max = self.eigvals.max();
        let eig_tol = 1e-10 * (1.0 + lam_max.abs());

        // squared norm of u(t) with components ghat_i / (t - lam_i)
        let norm2 = |t: f64| -> f64 {
            (0..q).map(|i| (ghat[i] / (t - self.eigvals[i])).powi(2)).sum()
        };
        let u_from_t = |t: f64| -> DVector<f64> {
            DVector::from_fn(q, |i, _| ghat[i] / (t - self.eigvals[i]))
        };

        // interior stationary point exists only when C is negative definite
        if lam_max < -eig_tol {
            let u0 = u_from_t(0.0);
            if u0.norm() <= 1.0 {
                let u = &self.eigvecs * &u0;
                let val = (0..q).map(|i| self.eigvals[i] * u0[i] * u0[i] + 2.0 * ghat[i] * u0[i]).sum();
                return (val, u);
            }
        }

        let t_lb = lam_max.max(0.0);
        let leading_g: f64 = (0..q)
            .filter(|&i| self.eigvals[i] >= lam_max - eig_tol)
            .map(|i| ghat[i] * ghat[i])
            .sum();

        // norm2 limit as t -> t_lb from above, over the non-leading part only
        let tail_norm2_at = |t: f64| -> f64 {
            (0..q)
                .filter(|&i| self.eigvals[i] < lam_max - eig_tol)
                .map(|i| (ghat[i] / (t - self.eigvals[i])).powi(2))
                .sum()
        };

        let hard_case = t_lb <= lam_max + eig_tol
            && leading_g.sqrt() <= 1e-9 * (1.0 + g.norm())
            && tail_norm2_at(lam_max + eig_tol.max(1e-300)) <= 1.0;
        if hard_case {
            // boundary multiplier pins t at lam_max; fill the leading
            // eigenspace to reach the ball boundary
            let t = lam_max;
            let mut uhat = DVector::zeros(q);
            for i in 0..q {
                if self.eigvals[i] < lam_max - eig_tol {
                    uhat[i] = ghat[i] / (t - self.eigvals[i]);
                }
            }
            let lead = (0..q).find(|&i| self.eigvals[i] >= lam_max - eig_tol).unwrap();
            let tau = (1.0 - uhat.norm_squared()).max(0.0).sqrt();
            uhat[lead] += tau;
            let val = (0..q).map(|i| self.eigvals[i] * uhat[i] * uhat[i] + 2.0 * ghat[i] * uhat[i]).sum();
            return (val, &self.eigvecs * uhat);
        }

        // secular equation |u(t)| = 1 on (t_lb, inf); norm2 decreases in t
        let mut lo = t_lb;
        let mut hi = t_lb.max(1e-12) * 2.0 + g.norm() + 1.0;
        while norm2(hi) > 1.0 {
            hi = 2.0 * hi + 1.0;
        }
        // safeguarded bisection on the monotone secular function
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm2(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = hi;
        let uhat = u_from_t(t);
        let uhat = if uhat.norm() > 1.0 { &uhat / uhat.norm() } else { uhat };
        let val = (0..q).map(|i| self.eigvals[i] * uhat[i] * uhat[i] + 2.0 * ghat[i] * uhat[i]).sum();
        (val, &self.eigvecs * uhat)
    }
}

/// Evaluates `f(x)` by the trust-region oracle; independent of the conic
/// solver path.
pub fn evaluate_f_oracle(inst: &RobustQuadraticInstance, x: &DVector<f64>) -> (f64, DVector<f64>) {
    let oracle = TrustRegionOracle::new(&inst.c_mat);
    evaluate_f_with_oracle(inst, &oracle, x)
}

pub fn evaluate_f_with_oracle(
    inst: &RobustQuadraticInstance,
    oracle: &TrustRegionOracle,
    x: &DVector<f64>,
) -> (f64, DVector<f64>) {
    let g = &inst.b_mat * x + &inst.c_vec;
    let (sup, u_star) = oracle.maximize(&g);
    (inst.quadratic_part(x) + sup, u_star)
}

// ---------------------------------------------------------------------------
// Pasch-Hausdorff envelope for max-of-affine functions

/// `f(x) = max_i u_i'x - b_i` together with a Lipschitz bound `beta`.
#[derive(Debug, Clone)]
pub struct AffinePieces {
    pub slopes: Vec<DVector<f64>>,
    pub intercepts: Vec<f64>,
    pub beta: f64,
}

impl AffinePieces {
    pub fn new(slopes: Vec<DVector<f64>>, intercepts: Vec<f64>, beta: f64) -> Self {
        assert!(!slopes.is_empty(), "need at least one piece");
        assert_eq!(slopes.len(), intercepts.len());
        assert!(beta > 0.0);
        AffinePieces { slopes, intercepts, beta }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(u, b)| u.dot(x) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evaluates the Pasch-Hausdorff envelope `f_beta(x)` as the optimum of a
/// small conic program: maximize `x'(U lam) - b'lam` over the simplex with
/// `|U lam| <= beta`.
pub fn pasch_hausdorff(pieces: &AffinePieces, x: &DVector<f64>) -> Result<f64, ConicError> {
    let k = pieces.slopes.len();
    let dim = pieces.slopes[0].len();
    let mut mb = ModelBuilder::new(crate::conic::Sense::Max);
    let lam = mb.vars(k);

    // simplex
    let mut sum = Expr::constant(-1.0);
    for &v in &lam {
        sum = sum + Expr::var(v);
    }
    mb.add_block(ConeSpec::zero(1), vec![sum]);
    mb.add_block(
        ConeSpec::nonnegative(k),
        lam.iter().map(|&v| Expr::var(v)).collect(),
    );

    // |U lam| <= beta
    let mut soc = vec![Expr::constant(pieces.beta)];
    for d in 0..dim {
        let mut e = Expr::zero();
        for (j, u) in pieces.slopes.iter().enumerate() {
            if u[d] != 0.0 {
                e.terms.push((lam[j], u[d]));
            }
        }
        soc.push(e);
    }
    mb.add_block(ConeSpec::second_order(dim + 1), soc);

    let mut obj = Expr::zero();
    for (j, (u, b)) in pieces.slopes.iter().zip(&pieces.intercepts).enumerate() {
        obj.terms.push((lam[j], u.dot(x) - b));
    }
    mb.set_objective(obj);

    let sol = mb.finish().base.solve(DEFAULT_SOLVER_TOL)?;
    if sol.status != SolveOutcome::Optimal {
        return Err(ConicError::NumericalFailure(format!(
            "envelope program ended with {:?}",
            sol.status
        )));
    }
    Ok(sol.objective_value)
}
