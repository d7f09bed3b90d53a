//! Linear conic programs over a product of cones and a solver adapter.
//!
//! A program is stored in slack form: for every constraint row `i` the
//! residual `s_i = rhs_i - sum_j coeffs[i][j] * y_j` must lie in the cone
//! block that owns row `i`. PSD blocks use the scaled symmetric
//! vectorization (upper triangle, column-major, off-diagonal entries
//! multiplied by sqrt(2)) so inner products of vectorized matrices equal
//! Frobenius products.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;
use thiserror::Error;

pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;
/// Tolerance for downstream assertions on solver output.
pub const DEFAULT_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
    PsdTriangle,
}

/// One cone block. For `PsdTriangle`, `dim` is the matrix order `d` and the
/// block occupies `d (d + 1) / 2` scalar rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dim: usize,
}

impl ConeSpec {
    pub fn zero(dim: usize) -> Self {
        ConeSpec { kind: ConeKind::Zero, dim }
    }
    pub fn nonnegative(dim: usize) -> Self {
        ConeSpec { kind: ConeKind::Nonnegative, dim }
    }
    pub fn second_order(dim: usize) -> Self {
        ConeSpec { kind: ConeKind::SecondOrder, dim }
    }
    pub fn psd_triangle(order: usize) -> Self {
        ConeSpec { kind: ConeKind::PsdTriangle, dim: order }
    }

    /// Number of scalar rows this block occupies.
    pub fn len(&self) -> usize {
        match self.kind {
            ConeKind::PsdTriangle => svec_len(self.dim),
            _ => self.dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            ConeKind::Zero => "zero",
            ConeKind::Nonnegative => "nonneg",
            ConeKind::SecondOrder => "soc",
            ConeKind::PsdTriangle => "psd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// Immutable linear conic program. Construct through [`crate::model::ModelBuilder`]
/// or directly for small hand-built models.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub num_vars: usize,
    /// Dense objective coefficients over the variables.
    pub objective: Vec<f64>,
    pub obj_offset: f64,
    pub sense: Sense,
    /// Sparse rows; `rows[i]` lists `(var, coeff)` of row `i`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    /// Cone blocks in row order; block `k` owns the rows following the rows
    /// of blocks `0..k`.
    pub cone_map: Vec<ConeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveOutcome,
    pub primal: Vec<f64>,
    /// One multiplier per constraint row, as reported by the backend for the
    /// minimization form of the program.
    pub dual: Vec<f64>,
    pub objective_value: f64,
    /// Reported primal-dual gap (absolute).
    pub gap: f64,
}

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("malformed program: {0:?}")]
    Malformed(Vec<String>),
    #[error("solver reported numerical failure ({0:?})")]
    NumericalFailure(String),
}

// ---------------------------------------------------------------------------
// scaled symmetric vectorization

pub fn svec_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Slot of entry (r, c), r <= c, in the upper-triangle column-major layout.
pub fn svec_index(r: usize, c: usize) -> usize {
    let (r, c) = if r <= c { (r, c) } else { (c, r) };
    c * (c + 1) / 2 + r
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(svec_len(d));
    for c in 0..d {
        for r in 0..=c {
            if r == c {
                v.push(m[(r, c)]);
            } else {
                v.push((m[(r, c)] + m[(c, r)]) * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
    }
    v
}

pub fn smat(v: &[f64], order: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(order));
    let mut m = DMatrix::zeros(order, order);
    let mut idx = 0;
    for c in 0..order {
        for r in 0..=c {
            if r == c {
                m[(r, c)] = v[idx];
            } else {
                let x = v[idx] * std::f64::consts::FRAC_1_SQRT_2;
                m[(r, c)] = x;
                m[(c, r)] = x;
            }
            idx += 1;
        }
    }
    m
}

// ---------------------------------------------------------------------------

impl ConicProgram {
    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Checks all structural invariants; empty iff the program is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut covered = 0usize;
        for (k, spec) in self.cone_map.iter().enumerate() {
            if spec.dim < 1 {
                out.push(format!("cone block {k}: dim must be >= 1"));
            }
            if spec.kind == ConeKind::SecondOrder && spec.dim < 2 {
                out.push(format!("cone block {k}: second-order cone needs dim >= 2"));
            }
            covered += spec.len();
        }
        if covered != self.num_rows() {
            out.push(format!(
                "cone blocks cover {covered} rows but the program has {} rows",
                self.num_rows()
            ));
        }
        if self.rows.len() != self.rhs.len() {
            out.push(format!(
                "row count {} does not match rhs count {}",
                self.rows.len(),
                self.rhs.len()
            ));
        }
        if self.objective.len() != self.num_vars {
            out.push(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            ));
        }
        let mut referenced = vec![false; self.num_vars];
        for (i, row) in self.rows.iter().enumerate() {
            for &(v, _) in row {
                if v >= self.num_vars {
                    out.push(format!("row {i}: variable index {v} out of range"));
                } else {
                    referenced[v] = true;
                }
            }
        }
        for (v, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                referenced[v] = true;
            }
        }
        for (v, r) in referenced.iter().enumerate() {
            if !r {
                out.push(format!("variable {v} is referenced by no row and not the objective"));
            }
        }
        out
    }

    /// Text dump, one row per line, for diffing hand-built models.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(
            s,
            "# {} vars, {} rows, sense {:?}, offset {}",
            self.num_vars,
            self.num_rows(),
            self.sense,
            self.obj_offset
        )
        .unwrap();
        write!(s, "obj:").unwrap();
        for (v, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                write!(s, " {c}*y{v}").unwrap();
            }
        }
        writeln!(s).unwrap();
        let mut row = 0;
        for spec in &self.cone_map {
            for slot in 0..spec.len() {
                write!(s, "{}[{}]:", spec.tag(), slot).unwrap();
                for &(v, c) in &self.rows[row] {
                    write!(s, " {c}*y{v}").unwrap();
                }
                writeln!(s, " | rhs {}", self.rhs[row]).unwrap();
                row += 1;
            }
        }
        s
    }

    /// Residual slacks `s = rhs - A y` at a candidate point.
    pub fn slacks(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.num_vars);
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| b - row.iter().map(|&(v, c)| c * y[v]).sum::<f64>())
            .collect()
    }

    /// Per-block feasibility violations of a candidate point, within `tol`.
    pub fn feasibility_violations(&self, y: &[f64], tol: f64) -> Vec<String> {
        let s = self.slacks(y);
        let mut out = Vec::new();
        let mut row = 0;
        for (k, spec) in self.cone_map.iter().enumerate() {
            let block = &s[row..row + spec.len()];
            match spec.kind {
                ConeKind::Zero => {
                    for (i, v) in block.iter().enumerate() {
                        if v.abs() > tol {
                            out.push(format!("block {k} (zero) slot {i}: residual {v}"));
                        }
                    }
                }
                ConeKind::Nonnegative => {
                    for (i, v) in block.iter().enumerate() {
                        if *v < -tol {
                            out.push(format!("block {k} (nonneg) slot {i}: value {v}"));
                        }
                    }
                }
                ConeKind::SecondOrder => {
                    let norm = block[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > block[0] + tol {
                        out.push(format!(
                            "block {k} (soc): ||tail|| = {norm} exceeds head {}",
                            block[0]
                        ));
                    }
                }
                ConeKind::PsdTriangle => {
                    let m = smat(block, spec.dim);
                    let min_eig = m
                        .symmetric_eigenvalues()
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    if min_eig < -tol {
                        out.push(format!("block {k} (psd): min eigenvalue {min_eig}"));
                    }
                }
            }
            row += spec.len();
        }
        out
    }

    /// Solves the program with the Clarabel backend.
    ///
    /// Dual multipliers are reported in the minimization convention: for a
    /// max-sense program `sup { c'y : b - Ay in K }` and any returned dual
    /// `z`, the affine function `b' z` of the right-hand side upper bounds
    /// the optimal value.
    pub fn solve(&self, tol: f64) -> Result<ConicSolution, ConicError> {
        assert!(tol > 0.0);
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(ConicError::Malformed(violations));
        }

        let m = self.num_rows();
        let n = self.num_vars;

        // assemble A in CSC order
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, c) in row {
                if c != 0.0 {
                    triplets.push((v, r, c));
                }
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut colptr = vec![0usize; n + 1];
        let mut rowval = Vec::with_capacity(triplets.len());
        let mut nzval = Vec::with_capacity(triplets.len());
        {
            let mut t = 0;
            for col in 0..n {
                colptr[col] = rowval.len();
                while t < triplets.len() && triplets[t].0 == col {
                    // merge duplicates within a column/row pair
                    let (c, r, mut v) = triplets[t];
                    t += 1;
                    while t < triplets.len() && triplets[t].0 == c && triplets[t].1 == r {
                        v += triplets[t].2;
                        t += 1;
                    }
                    rowval.push(r);
                    nzval.push(v);
                }
            }
            colptr[n] = rowval.len();
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((n, n));

        let q: Vec<f64> = match self.sense {
            Sense::Min => self.objective.clone(),
            Sense::Max => self.objective.iter().map(|c| -c).collect(),
        };

        let cones: Vec<SupportedConeT<f64>> = self
            .cone_map
            .iter()
            .map(|spec| match spec.kind {
                ConeKind::Zero => SupportedConeT::ZeroConeT(spec.dim),
                ConeKind::Nonnegative => SupportedConeT::NonnegativeConeT(spec.dim),
                ConeKind::SecondOrder => SupportedConeT::SecondOrderConeT(spec.dim),
                ConeKind::PsdTriangle => SupportedConeT::PSDTriangleConeT(spec.dim),
            })
            .collect();

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .build()
            .expect("solver settings");

        let mut solver = DefaultSolver::new(&p, &q, &a, &self.rhs, &cones, settings);
        solver.solve();
        let sol = &solver.solution;

        let gap = (sol.obj_val - sol.obj_val_dual).abs();
        let status = match sol.status {
            SolverStatus::Solved => SolveOutcome::Optimal,
            // accept a reduced-accuracy answer when its gap is still within
            // the tolerance downstream checks run at
            SolverStatus::AlmostSolved if gap <= DEFAULT_CHECK_TOL => SolveOutcome::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveOutcome::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveOutcome::Unbounded
            }
            other => {
                return Err(ConicError::NumericalFailure(format!("{other:?}")));
            }
        };

        let objective_value = match self.sense {
            Sense::Min => sol.obj_val + self.obj_offset,
            Sense::Max => -sol.obj_val + self.obj_offset,
        };

        Ok(ConicSolution {
            status,
            primal: sol.x.clone(),
            dual: sol.z.clone(),
            objective_value,
            gap,
        })
    }
}
