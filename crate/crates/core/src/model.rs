//! Small modeling layer on top of [`crate::conic`].
//!
//! Expressions are affine in the decision variables and in a set of
//! *parameters*. Parameters may only enter right-hand sides and the
//! objective, which keeps the dual of the materialized program affine in
//! them; this is what makes supergradient extraction from solver duals
//! possible.

use crate::conic::{svec_len, ConeSpec, ConicProgram, Sense};
use nalgebra::DMatrix;
use std::ops::{Add, Mul, Neg, Sub};

/// Affine expression `sum coeff*var + sum pcoeff*param + constant`.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    pub terms: Vec<(usize, f64)>,
    pub params: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }
    pub fn constant(c: f64) -> Self {
        Expr { constant: c, ..Default::default() }
    }
    pub fn var(i: usize) -> Self {
        Expr { terms: vec![(i, 1.0)], ..Default::default() }
    }
    pub fn var_scaled(i: usize, c: f64) -> Self {
        Expr { terms: vec![(i, c)], ..Default::default() }
    }
    pub fn param(j: usize) -> Self {
        Expr { params: vec![(j, 1.0)], ..Default::default() }
    }
    pub fn param_scaled(j: usize, c: f64) -> Self {
        Expr { params: vec![(j, c)], ..Default::default() }
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(mut self, rhs: Expr) -> Expr {
        self.terms.extend(rhs.terms);
        self.params.extend(rhs.params);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(mut self) -> Expr {
        for t in &mut self.terms {
            t.1 = -t.1;
        }
        for p in &mut self.params {
            p.1 = -p.1;
        }
        self.constant = -self.constant;
        self
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(mut self, k: f64) -> Expr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        for p in &mut self.params {
            p.1 *= k;
        }
        self.constant *= k;
        self
    }
}

/// Variable indices of a symmetric matrix block, one variable per
/// upper-triangle entry.
#[derive(Debug, Clone)]
pub struct SymVars {
    pub order: usize,
    vars: Vec<usize>,
}

impl SymVars {
    pub fn idx(&self, r: usize, c: usize) -> usize {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        self.vars[c * (c + 1) / 2 + r]
    }

    pub fn entry(&self, r: usize, c: usize) -> Expr {
        Expr::var(self.idx(r, c))
    }

    /// Frobenius product `M . X` as an expression in the block variables.
    pub fn frob(&self, m: &DMatrix<f64>) -> Expr {
        assert_eq!(m.nrows(), self.order);
        let mut e = Expr::zero();
        for c in 0..self.order {
            for r in 0..=c {
                let coeff = if r == c { m[(r, c)] } else { m[(r, c)] + m[(c, r)] };
                if coeff != 0.0 {
                    e.terms.push((self.idx(r, c), coeff));
                }
            }
        }
        e
    }

    /// Extracts the matrix from a primal solution vector.
    pub fn extract(&self, primal: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.order, self.order);
        for c in 0..self.order {
            for r in 0..=c {
                let v = primal[self.idx(r, c)];
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }
}

struct RowExpr {
    expr: Expr,
}

pub struct ModelBuilder {
    num_vars: usize,
    num_params: usize,
    rows: Vec<RowExpr>,
    cone_map: Vec<ConeSpec>,
    objective: Expr,
    sense: Sense,
}

impl ModelBuilder {
    pub fn new(sense: Sense) -> Self {
        ModelBuilder {
            num_vars: 0,
            num_params: 0,
            rows: Vec::new(),
            cone_map: Vec::new(),
            objective: Expr::zero(),
            sense,
        }
    }

    pub fn var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn vars(&mut self, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.var()).collect()
    }

    pub fn sym_vars(&mut self, order: usize) -> SymVars {
        SymVars { order, vars: self.vars(svec_len(order)) }
    }

    pub fn param(&mut self) -> usize {
        self.num_params += 1;
        self.num_params - 1
    }

    pub fn params(&mut self, k: usize) -> Vec<usize> {
        (0..k).map(|_| self.param()).collect()
    }

    /// Constrains the expressions to lie in the given cone.
    pub fn add_block(&mut self, spec: ConeSpec, exprs: Vec<Expr>) {
        assert_eq!(exprs.len(), spec.len(), "cone block size mismatch");
        self.cone_map.push(spec);
        self.rows.extend(exprs.into_iter().map(|expr| RowExpr { expr }));
    }

    /// PSD block of the given order; `entry(r, c)` supplies the upper
    /// triangle (`r <= c`). Scaled vectorization is applied here.
    pub fn add_psd_block(&mut self, order: usize, mut entry: impl FnMut(usize, usize) -> Expr) {
        let mut exprs = Vec::with_capacity(svec_len(order));
        for c in 0..order {
            for r in 0..=c {
                let e = entry(r, c);
                exprs.push(if r == c { e } else { e * std::f64::consts::SQRT_2 });
            }
        }
        self.add_block(ConeSpec::psd_triangle(order), exprs);
    }

    pub fn set_objective(&mut self, expr: Expr) {
        self.objective = expr;
    }

    pub fn finish(self) -> ParamProgram {
        let mut objective = vec![0.0; self.num_vars];
        for (v, c) in &self.objective.terms {
            objective[*v] += c;
        }
        let mut obj_params = vec![0.0; self.num_params];
        for (p, c) in &self.objective.params {
            obj_params[*p] += c;
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut rhs = Vec::with_capacity(self.rows.len());
        let mut rhs_params = Vec::new();
        for (i, row) in self.rows.into_iter().enumerate() {
            // expr in K  <=>  s = -constant - P.p  + ... ; slack form is
            // s = rhs - A y with A = -coeffs, rhs = constant + params
            let mut coeffs: Vec<(usize, f64)> = row.expr.terms;
            for t in &mut coeffs {
                t.1 = -t.1;
            }
            rows.push(coeffs);
            rhs.push(row.expr.constant);
            for (p, c) in row.expr.params {
                if c != 0.0 {
                    rhs_params.push((i, p, c));
                }
            }
        }
        ParamProgram {
            base: ConicProgram {
                num_vars: self.num_vars,
                objective,
                obj_offset: self.objective.constant,
                sense: self.sense,
                rows,
                rhs,
                cone_map: self.cone_map,
            },
            rhs_params,
            obj_params,
            num_params: self.num_params,
        }
    }
}

/// A conic program whose right-hand sides and objective are affine in a
/// parameter vector. Instantiating at a parameter value yields an ordinary
/// [`ConicProgram`]; the dual of any instantiation gives an affine bound on
/// the optimal value as a function of the parameters.
#[derive(Debug, Clone)]
pub struct ParamProgram {
    pub base: ConicProgram,
    /// Sparse `(row, param, coeff)` contributions to the right-hand side.
    pub rhs_params: Vec<(usize, usize, f64)>,
    pub obj_params: Vec<f64>,
    pub num_params: usize,
}

impl ParamProgram {
    pub fn instantiate(&self, p: &[f64]) -> ConicProgram {
        assert_eq!(p.len(), self.num_params);
        let mut prog = self.base.clone();
        for &(row, param, coeff) in &self.rhs_params {
            prog.rhs[row] += coeff * p[param];
        }
        for (j, c) in self.obj_params.iter().enumerate() {
            prog.obj_offset += c * p[j];
        }
        prog
    }

    /// Affine majorant of the optimal-value function from a dual vector of
    /// any instantiation: for a max-sense program, `value(p) <= intercept +
    /// slope' p` for every parameter vector `p`. Weak conic duality; only
    /// meaningful for max sense.
    pub fn affine_majorant(&self, dual: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(self.base.sense, Sense::Max);
        assert_eq!(dual.len(), self.base.num_rows());
        let intercept = self
            .base
            .rhs
            .iter()
            .zip(dual)
            .map(|(b, z)| b * z)
            .sum::<f64>()
            + self.base.obj_offset;
        let mut slope = self.obj_params.clone();
        for &(row, param, coeff) in &self.rhs_params {
            slope[param] += coeff * dual[row];
        }
        (intercept, slope)
    }
}
