//! Concave tents as optimal-value functions of conic programs.
//!
//! A tent program is a max-sense conic program in the lifted variables
//! (Psi, u, U, X) in which the evaluation point x enters only through
//! right-hand sides and an additive objective term. The dual of any
//! instantiation is therefore affine in x, which is what yields
//! epsilon-supergradients directly from solver-reported multipliers.

use crate::conic::{ConeSpec, ConicError, SolveOutcome, Sense};
use crate::lifted::{build_gball, build_gx};
use crate::model::{Expr, ModelBuilder, ParamProgram};
use crate::objective::{InstanceError, RobustQuadraticInstance, TrustRegionOracle};
use nalgebra::{DMatrix, DVector};

/// Conic program computing g(x) with x as parameter vector.
#[derive(Debug, Clone)]
pub struct TentProgram {
    pub program: ParamProgram,
    pub n: usize,
    pub with_cuts: bool,
}

/// One evaluation of the tent: value, supergradient, and the certificate it
/// came from.
#[derive(Debug, Clone)]
pub struct TentEvaluation {
    /// g(x); `f64::NEG_INFINITY` when x lies outside dom g.
    pub value: f64,
    pub supergradient: DVector<f64>,
    /// Optimality gap of the certificate; nonnegative up to solver noise.
    pub epsilon: f64,
    pub certificate: DualCertificate,
}

impl TentEvaluation {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Affine majorant `g(x) <= intercept + slope'x` assembled from the dual
/// multipliers of the rows in which x appears.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub intercept: f64,
    pub slope: DVector<f64>,
    /// Raw multipliers, one per constraint row.
    pub dual: Vec<f64>,
}

/// Builds the lifted tent program for the robust instance: big PSD
/// block over (1, u, x), G(U) rows, G_X rows, and (optionally) the three
/// perspectification SOC families.
pub fn build_tent(
    inst: &RobustQuadraticInstance,
    with_cuts: bool,
) -> Result<TentProgram, InstanceError> {
    let (n, q) = (inst.n, inst.q);
    let gx = build_gx(n, inst.l, inst.u)?;
    let gball = build_gball(q);

    let mut mb = ModelBuilder::new(Sense::Max);
    let x_par = mb.params(n);
    let u_vars = mb.vars(q);
    let u_lift = mb.sym_vars(q);
    // psi[i][j] lifts x_i * u_j
    let psi: Vec<Vec<usize>> = (0..n).map(|_| mb.vars(q)).collect();
    let x_lift = mb.sym_vars(n);

    // order of the big block: (1, u_1..u_q, x_1..x_n)
    mb.add_psd_block(n + q + 1, |r, c| {
        let entry_of = |k: usize| -> Expr {
            if k == 0 {
                Expr::constant(1.0)
            } else if k <= q {
                Expr::var(u_vars[k - 1])
            } else {
                Expr::param(x_par[k - 1 - q])
            }
        };
        if r == 0 {
            entry_of(c)
        } else if c <= q {
            u_lift.entry(r - 1, c - 1)
        } else if r <= q {
            Expr::var(psi[c - 1 - q][r - 1])
        } else {
            x_lift.entry(r - 1 - q, c - 1 - q)
        }
    });

    gball.append(&mut mb, &u_vars, &u_lift);
    let x_exprs: Vec<Expr> = x_par.iter().map(|&p| Expr::param(p)).collect();
    gx.append(&mut mb, &x_exprs, &x_lift);

    if with_cuts {
        let (hi, lo) = (inst.u as f64, inst.l as f64);
        // || u_win * u - Psi'e || <= u_win - e'x
        let mut head = Expr::constant(hi);
        for &p in &x_par {
            head = head + Expr::param_scaled(p, -1.0);
        }
        let mut soc = vec![head];
        for j in 0..q {
            let mut e = Expr::var_scaled(u_vars[j], hi);
            for row in psi.iter() {
                e.terms.push((row[j], -1.0));
            }
            soc.push(e);
        }
        mb.add_block(ConeSpec::second_order(q + 1), soc);

        // || l_win * u - Psi'e || <= e'x - l_win
        let mut head = Expr::constant(-lo);
        for &p in &x_par {
            head = head + Expr::param(p);
        }
        let mut soc = vec![head];
        for j in 0..q {
            let mut e = Expr::var_scaled(u_vars[j], lo);
            for row in psi.iter() {
                e.terms.push((row[j], -1.0));
            }
            soc.push(e);
        }
        mb.add_block(ConeSpec::second_order(q + 1), soc);

        // || u + Psi'e_i || <= 1 + x_i for each coordinate
        for i in 0..n {
            let head = Expr::constant(1.0) + Expr::param(x_par[i]);
            let mut soc = vec![head];
            for j in 0..q {
                let mut e = Expr::var(u_vars[j]);
                e.terms.push((psi[i][j], 1.0));
                soc.push(e);
            }
            mb.add_block(ConeSpec::second_order(q + 1), soc);
        }
    }

    // A . X + 2a'x + 2 B' . Psi + C . U + 2c'u
    let mut obj = x_lift.frob(&inst.a_mat) + u_lift.frob(&inst.c_mat);
    for i in 0..n {
        obj = obj + Expr::param_scaled(x_par[i], 2.0 * inst.a_vec[i]);
        for j in 0..q {
            if inst.b_mat[(j, i)] != 0.0 {
                obj.terms.push((psi[i][j], 2.0 * inst.b_mat[(j, i)]));
            }
        }
    }
    for j in 0..q {
        if inst.c_vec[j] != 0.0 {
            obj.terms.push((u_vars[j], 2.0 * inst.c_vec[j]));
        }
    }
    mb.set_objective(obj);

    Ok(TentProgram { program: mb.finish(), n, with_cuts })
}

/// Evaluates the tent at x. Infeasibility is reported through the
/// `NEG_INFINITY` sentinel (x outside dom g), not as an error.
pub fn evaluate_tent(tp: &TentProgram, x: &DVector<f64>, tol: f64) -> Result<TentEvaluation, ConicError> {
    assert_eq!(x.len(), tp.n);
    let prog = tp.program.instantiate(x.as_slice());
    let sol = prog.solve(tol)?;
    match sol.status {
        SolveOutcome::Optimal => {}
        SolveOutcome::Infeasible => {
            return Ok(TentEvaluation {
                value: f64::NEG_INFINITY,
                supergradient: DVector::zeros(tp.n),
                epsilon: 0.0,
                certificate: DualCertificate {
                    intercept: 0.0,
                    slope: DVector::zeros(tp.n),
                    dual: sol.dual,
                },
            });
        }
        other => {
            return Err(ConicError::NumericalFailure(format!("tent solve ended with {other:?}")));
        }
    }

    let (intercept, slope) = tp.program.affine_majorant(&sol.dual);
    let slope = DVector::from_vec(slope);
    let value = sol.objective_value;
    let mut epsilon = intercept + slope.dot(x) - value;
    if epsilon < -10.0 * tol {
        log::warn!("tent certificate gap {epsilon} below -10*tol; clamping");
    }
    if epsilon < 0.0 {
        epsilon = 0.0;
    }
    Ok(TentEvaluation {
        value,
        supergradient: slope.clone(),
        epsilon,
        certificate: DualCertificate { intercept, slope, dual: sol.dual },
    })
}

// ---------------------------------------------------------------------------
// scalar 0/1 tent for max-of-two-affine objectives

/// Tent over {0,1} for `f(x) = max { w1.(1, x), w2.(1, x) }`, built from the
/// V-representation of the two-point uncertainty set. Substituting the
/// convex combination `u in [0,1]` of the two pieces gives the objective
/// `d0*u + d1*u*x + w2_0 + w2_1*x` with `d = w1 - w2`, and the lifted
/// program uses variables (u, U, psi) with X eliminated through diag(X) = x.
/// The `relaxed` flag drops the rows `u >= U` and `u <= 1`, keeping only
/// `U <= 1`.
pub fn build_tent01(w1: [f64; 2], w2: [f64; 2], relaxed: bool) -> TentProgram {
    let d = [w1[0] - w2[0], w1[1] - w2[1]];
    let mut mb = ModelBuilder::new(Sense::Max);
    let x = mb.param();
    let u = mb.var();
    let u_lift = mb.var();
    let psi = mb.var();

    mb.add_psd_block(3, |r, c| match (r, c) {
        (0, 0) => Expr::constant(1.0),
        (0, 1) => Expr::var(u),
        (0, 2) => Expr::param(x),
        (1, 1) => Expr::var(u_lift),
        (1, 2) => Expr::var(psi),
        (2, 2) => Expr::param(x),
        _ => unreachable!(),
    });

    if relaxed {
        mb.add_block(ConeSpec::nonnegative(1), vec![Expr::constant(1.0) - Expr::var(u_lift)]);
    } else {
        mb.add_block(
            ConeSpec::nonnegative(2),
            vec![
                Expr::var(u) - Expr::var(u_lift),
                Expr::constant(1.0) - Expr::var(u),
            ],
        );
    }
    mb.add_block(ConeSpec::nonnegative(1), vec![Expr::var(psi)]);

    let obj = Expr::var_scaled(u, d[0])
        + Expr::var_scaled(psi, d[1])
        + Expr::param_scaled(x, w2[1])
        + Expr::constant(w2[0]);
    mb.set_objective(obj);

    TentProgram { program: mb.finish(), n: 1, with_cuts: !relaxed }
}

// ---------------------------------------------------------------------------
// classical tent from concave quadratic updates

/// The classical tent `g_c(x) = f(x) - sum_i lambda_i (x_i^2 - 1)` for
/// instances whose sup term is constant in x (B = 0), so that f is an
/// explicit quadratic plus a constant and concavity of g_c is certifiable
/// by eigenvalues of `A - Diag(lambda)`.
#[derive(Debug, Clone)]
pub struct ClassicalTent {
    quad: DMatrix<f64>,
    lin: DVector<f64>,
    constant: f64,
    pub multipliers: DVector<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ClassicalTentError {
    #[error("classical tent needs B = 0 (max |B| = {0})")]
    CoupledUncertainty(f64),
    #[error("A - Diag(lambda) is not negative semidefinite (max eigenvalue {0})")]
    NotConcave(f64),
}

impl ClassicalTent {
    pub fn new(
        inst: &RobustQuadraticInstance,
        multipliers: DVector<f64>,
    ) -> Result<Self, ClassicalTentError> {
        assert_eq!(multipliers.len(), inst.n);
        let bmax = inst.b_mat.abs().max();
        if bmax > 1e-12 {
            return Err(ClassicalTentError::CoupledUncertainty(bmax));
        }
        let mut quad = inst.a_mat.clone();
        for i in 0..inst.n {
            quad[(i, i)] -= multipliers[i];
        }
        let max_eig = quad.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max_eig > 1e-9 {
            return Err(ClassicalTentError::NotConcave(max_eig));
        }
        // constant sup term: max_{|u|<=1} u'Cu + 2c'u
        let oracle = TrustRegionOracle::new(&inst.c_mat);
        let (sup_const, _) = oracle.maximize(&inst.c_vec);
        Ok(ClassicalTent {
            quad,
            lin: inst.a_vec.clone(),
            constant: sup_const + multipliers.sum(),
            multipliers,
        })
    }

    /// A canonical concave choice: `lambda_i = lambda_max(A) + 1` for all i.
    pub fn with_default_multipliers(
        inst: &RobustQuadraticInstance,
    ) -> Result<Self, ClassicalTentError> {
        let lam_max = inst
            .a_mat
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        ClassicalTent::new(inst, DVector::from_element(inst.n, lam_max + 1.0))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.quad * x)[(0, 0)] + 2.0 * self.lin.dot(x) + self.constant
    }
}
