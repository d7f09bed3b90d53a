//! Constraint blocks for the lifted sets: the exact description of G(U) for
//! the unit ball, and the tractable outer approximation G_X of G(X) for the
//! cardinality-windowed hypercube X = {x in {-1,1}^n : l <= e'x <= u}.

use crate::conic::ConeSpec;
use crate::model::{Expr, ModelBuilder, SymVars};
use crate::objective::{window_feasible, InstanceError};
use nalgebra::{DMatrix, DVector};

/// Rows describing G(U) for the unit ball: `[[1, u'], [u, U]] >= 0` and
/// `trace(U) <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct GBallBlock {
    pub q: usize,
}

pub fn build_gball(q: usize) -> GBallBlock {
    assert!(q >= 1);
    GBallBlock { q }
}

impl GBallBlock {
    /// Appends the block rows for given `u` variables and lifted matrix.
    pub fn append(&self, mb: &mut ModelBuilder, u_vars: &[usize], u_lift: &SymVars) {
        assert_eq!(u_vars.len(), self.q);
        assert_eq!(u_lift.order, self.q);
        mb.add_psd_block(self.q + 1, |r, c| {
            if r == 0 && c == 0 {
                Expr::constant(1.0)
            } else if r == 0 {
                Expr::var(u_vars[c - 1])
            } else {
                u_lift.entry(r - 1, c - 1)
            }
        });
        let mut trace = Expr::constant(1.0);
        for i in 0..self.q {
            trace.terms.push((u_lift.idx(i, i), -1.0));
        }
        mb.add_block(ConeSpec::nonnegative(1), vec![trace]);
    }

    /// Violations of `(u, U)` against the block description, within `tol`.
    pub fn check_point(&self, u: &DVector<f64>, u_lift: &DMatrix<f64>, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let mut m = DMatrix::zeros(self.q + 1, self.q + 1);
        m[(0, 0)] = 1.0;
        for i in 0..self.q {
            m[(0, i + 1)] = u[i];
            m[(i + 1, 0)] = u[i];
            for j in 0..self.q {
                m[(i + 1, j + 1)] = u_lift[(i, j)];
            }
        }
        let min_eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -tol {
            out.push(format!("lifted ball matrix has min eigenvalue {min_eig}"));
        }
        let tr = u_lift.trace();
        if tr > 1.0 + tol {
            out.push(format!("trace(U) = {tr} exceeds 1"));
        }
        out
    }
}

/// Extra variables created when a G_X block is appended to a model: the two
/// window slacks `s`, the x-slack cross block `V` (n x 2), and the slack
/// lifting `S` (2 x 2).
#[derive(Debug, Clone)]
pub struct GxVars {
    pub s: [usize; 2],
    /// v[i][k] lifts x_i * s_k.
    pub v: Vec<[usize; 2]>,
    pub s_lift: SymVars,
}

/// The slack-lifted description of G_X. The extended vector is
/// `z = [x', u - e'x, e'x - l]` with `e_u = [e', 1, 0]` and `e_l = [e', 0, -1]`.
#[derive(Debug, Clone, Copy)]
pub struct GXBlock {
    pub n: usize,
    pub l: i64,
    pub u: i64,
}

pub fn build_gx(n: usize, l: i64, u: i64) -> Result<GXBlock, InstanceError> {
    if !window_feasible(n, l, u) {
        return Err(InstanceError::EmptyWindow { n, l, u });
    }
    Ok(GXBlock { n, l, u })
}

impl GXBlock {
    /// Appends all rows of the G_X description. `x` supplies the first n
    /// entries of z as expressions (variables or parameters), `x_lift` the
    /// matrix identified with X on those indices.
    pub fn append(&self, mb: &mut ModelBuilder, x: &[Expr], x_lift: &SymVars) -> GxVars {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(x_lift.order, n);
        let (lo, hi) = (self.l as f64, self.u as f64);

        let s = [mb.var(), mb.var()];
        let v: Vec<[usize; 2]> = (0..n).map(|_| [mb.var(), mb.var()]).collect();
        let s_lift = mb.sym_vars(2);

        // z entry as expression
        let z = |i: usize| -> Expr {
            if i < n {
                x[i].clone()
            } else {
                Expr::var(s[i - n])
            }
        };
        // Z entry (i, j) as expression
        let z_lift = |i: usize, j: usize| -> Expr {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            if j < n {
                x_lift.entry(i, j)
            } else if i < n {
                Expr::var(v[i][j - n])
            } else {
                s_lift.entry(i - n, j - n)
            }
        };

        // [[1, z'], [z, Z]] psd
        mb.add_psd_block(n + 3, |r, c| {
            if r == 0 && c == 0 {
                Expr::constant(1.0)
            } else if r == 0 {
                z(c - 1)
            } else {
                z_lift(r - 1, c - 1)
            }
        });

        // e_u'z = u,  e_l'z = l
        let mut eu_z = Expr::constant(-hi) + z(n);
        let mut el_z = Expr::constant(-lo) - z(n + 1);
        for i in 0..n {
            eu_z = eu_z + z(i);
            el_z = el_z + z(i);
        }
        mb.add_block(ConeSpec::zero(2), vec![eu_z, el_z]);

        // e_u e_u' . Z = u^2,  e_l e_l' . Z = l^2
        let mut eu_zz = Expr::constant(-hi * hi) + z_lift(n, n);
        let mut el_zz = Expr::constant(-lo * lo) + z_lift(n + 1, n + 1);
        for i in 0..n {
            eu_zz = eu_zz + z_lift(i, n) * 2.0;
            el_zz = el_zz - z_lift(i, n + 1) * 2.0;
            for j in 0..n {
                eu_zz = eu_zz + z_lift(i, j);
                el_zz = el_zz + z_lift(i, j);
            }
        }
        mb.add_block(ConeSpec::zero(2), vec![eu_zz, el_zz]);

        // slack entries and their lifted block are nonnegative
        mb.add_block(
            ConeSpec::nonnegative(5),
            vec![
                Expr::var(s[0]),
                Expr::var(s[1]),
                s_lift.entry(0, 0),
                s_lift.entry(0, 1),
                s_lift.entry(1, 1),
            ],
        );

        // diag(X) = e
        mb.add_block(
            ConeSpec::zero(n),
            (0..n).map(|i| x_lift.entry(i, i) - Expr::constant(1.0)).collect(),
        );

        GxVars { s, v, s_lift }
    }

    /// The lifted point `(z, z z')` associated with a vertex `x in X`.
    pub fn lift_vertex(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        assert_eq!(x.len(), self.n);
        let sum = x.sum();
        let mut z = DVector::zeros(self.n + 2);
        for i in 0..self.n {
            z[i] = x[i];
        }
        z[self.n] = self.u as f64 - sum;
        z[self.n + 1] = sum - self.l as f64;
        let zz = &z * z.transpose();
        (z, zz)
    }
}

/// Report of the rank-one collapse conditions for a G_X block: the lifted
/// equality rows hold at sampled vertices, and the identity matrix is a
/// positive combination of the diagonal constraint matrices.
#[derive(Debug, Clone)]
pub struct NecReport {
    pub vertex_rows_exact: bool,
    pub vertices_checked: usize,
    pub positive_combination: bool,
    pub min_eig_of_combination: f64,
}

pub fn check_nec_conditions(block: &GXBlock) -> NecReport {
    let n = block.n;
    // enumerate X when small, otherwise sample the two parity-feasible
    // extremes and random sign patterns
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    if n <= 12 {
        for k in 0..(1u64 << n) {
            let x: DVector<f64> = DVector::from_fn(n, |i, _| if (k >> i) & 1 == 1 { 1.0 } else { -1.0 });
            let s = x.sum().round() as i64;
            if s >= block.l && s <= block.u {
                vertices.push(x);
            }
        }
    }
    let mut exact = true;
    for x in &vertices {
        // A(xx', x) = b is diag(xx') = e here
        for i in 0..n {
            if (x[i] * x[i] - 1.0).abs() > 0.0 {
                exact = false;
            }
        }
        let (z, zz) = block.lift_vertex(x);
        let hi = block.u as f64;
        let lo = block.l as f64;
        let mut eu = DVector::from_element(n + 2, 1.0);
        eu[n + 1] = 0.0;
        let mut el = DVector::from_element(n + 2, 1.0);
        el[n] = 0.0;
        el[n + 1] = -1.0;
        if (eu.dot(&z) - hi).abs() > 1e-12 * (1.0 + hi.abs())
            || (el.dot(&z) - lo).abs() > 1e-12 * (1.0 + lo.abs())
            || ((eu.transpose() * &zz * &eu)[(0, 0)] - hi * hi).abs() > 1e-9 * (1.0 + hi * hi)
            || ((el.transpose() * &zz * &el)[(0, 0)] - lo * lo).abs() > 1e-9 * (1.0 + lo * lo)
        {
            exact = false;
        }
    }
    // (Nec2) with lambda = e: sum_i e_i e_i' = I
    let combo = DMatrix::<f64>::identity(n, n);
    let min_eig = combo.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    NecReport {
        vertex_rows_exact: exact,
        vertices_checked: vertices.len(),
        positive_combination: min_eig > 0.0,
        min_eig_of_combination: min_eig,
    }
}
