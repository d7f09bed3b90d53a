//! Branch and bound for min f over sign vectors in the cardinality window.

use crate::conic::{ConicError, DEFAULT_SOLVER_TOL};
use crate::objective::{RobustQuadraticInstance, TrustRegionOracle};
use crate::relaxation::{lower_bound, Fixing, RelaxationStatus};
use crate::rounding::{primal_heuristic, round_classical, RoundingMethod, RoundingOutcome};
use crate::tent::{build_tent, TentProgram};
use nalgebra::DVector;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingMode {
    Classical,
    TentGuided,
}

#[derive(Debug, Clone)]
pub struct BnBConfig {
    pub mode: RoundingMode,
    pub prune_tol: f64,
    pub max_nodes: usize,
    /// Run the primal heuristic at every node, not just the root.
    pub round_every_node: bool,
    pub solver_tol: f64,
    /// Build the tent with the perspectification cuts.
    pub tent_cuts: bool,
}

impl Default for BnBConfig {
    fn default() -> Self {
        BnBConfig {
            mode: RoundingMode::TentGuided,
            prune_tol: 1e-6,
            max_nodes: 10_000,
            round_every_node: true,
            solver_tol: DEFAULT_SOLVER_TOL,
            tent_cuts: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub node_id: usize,
    pub depth: usize,
    pub bound: f64,
    pub incumbent: f64,
    pub pruned: bool,
    pub rounding_method: Option<RoundingMethod>,
    pub rounded_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BnBResult {
    pub optimum: f64,
    pub x_star: DVector<f64>,
    pub node_count: usize,
    pub wall_time_s: f64,
    pub node_log: Vec<NodeRecord>,
    /// False when the node budget ran out before the gap closed.
    pub proven: bool,
}

struct Node {
    fixing: Fixing,
    bound: f64,
    x_rel: DVector<f64>,
    depth: usize,
}

fn branch_coordinate(fixing: &Fixing, x_rel: &DVector<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..x_rel.len() {
        if fixing.get(i).is_some() {
            continue;
        }
        let frac = x_rel[i].abs();
        match best {
            Some((_, bf)) if bf <= frac => {}
            _ => best = Some((i, frac)),
        }
    }
    best.map(|(i, _)| i)
}

/// Runs depth-first branch and bound. Relaxation bounds are computed when a
/// node is created; the child with the better (smaller) bound is explored
/// first.
pub fn solve(inst: &RobustQuadraticInstance, cfg: &BnBConfig) -> Result<BnBResult, ConicError> {
    let start = Instant::now();
    let tol = cfg.solver_tol;
    let tent: Option<TentProgram> = match cfg.mode {
        RoundingMode::TentGuided => Some(
            build_tent(inst, cfg.tent_cuts)
                .map_err(|e| ConicError::NumericalFailure(format!("tent build: {e}")))?,
        ),
        RoundingMode::Classical => None,
    };

    let mut node_log = Vec::new();
    let mut incumbent = f64::INFINITY;
    let mut x_star = DVector::zeros(inst.n);
    let mut node_count = 0usize;
    let mut next_id = 0usize;

    let root_rel = lower_bound(inst, &Fixing::new(), tol)?;
    if root_rel.status == RelaxationStatus::Infeasible {
        return Ok(BnBResult {
            optimum: f64::INFINITY,
            x_star,
            node_count: 1,
            wall_time_s: start.elapsed().as_secs_f64(),
            node_log,
            proven: true,
        });
    }

    // warm-start the incumbent by snapping the root relaxation
    if let Some(out) = round_classical(inst, &root_rel.x_rel, tol)? {
        incumbent = out.f_value;
        x_star = out.x_ub;
    }

    let mut stack = vec![Node {
        fixing: Fixing::new(),
        bound: root_rel.bound,
        x_rel: root_rel.x_rel,
        depth: 0,
    }];
    let mut exhausted = false;

    while let Some(node) = stack.pop() {
        if node_count >= cfg.max_nodes {
            exhausted = true;
            break;
        }
        node_count += 1;
        let node_id = next_id;
        next_id += 1;

        if node.bound >= incumbent - cfg.prune_tol {
            node_log.push(NodeRecord {
                node_id,
                depth: node.depth,
                bound: node.bound,
                incumbent,
                pruned: true,
                rounding_method: None,
                rounded_value: None,
            });
            continue;
        }

        let mut method = None;
        let mut rounded = None;
        if cfg.round_every_node || node.depth == 0 {
            let outcome: Option<RoundingOutcome> = match (&tent, cfg.mode) {
                (Some(t), RoundingMode::TentGuided) => {
                    primal_heuristic(inst, t, &node.x_rel, tol)?
                }
                _ => round_classical(inst, &node.x_rel, tol)?,
            };
            if let Some(out) = outcome {
                method = Some(out.method);
                rounded = Some(out.f_value);
                if out.f_value < incumbent {
                    incumbent = out.f_value;
                    x_star = out.x_ub;
                }
            }
        }

        node_log.push(NodeRecord {
            node_id,
            depth: node.depth,
            bound: node.bound,
            incumbent,
            pruned: false,
            rounding_method: method,
            rounded_value: rounded,
        });

        let Some(branch) = branch_coordinate(&node.fixing, &node.x_rel) else {
            continue; // leaf: every coordinate fixed
        };

        let mut children = Vec::with_capacity(2);
        for value in [-1.0, 1.0] {
            let fixing = node.fixing.with(branch, value);
            let rel = lower_bound(inst, &fixing, tol)?;
            if rel.status == RelaxationStatus::Infeasible || rel.bound >= incumbent - cfg.prune_tol
            {
                continue;
            }
            children.push(Node {
                fixing,
                bound: rel.bound,
                x_rel: rel.x_rel,
                depth: node.depth + 1,
            });
        }
        // LIFO stack: push the better-bound child last so it pops first;
        // on ties the +1 child is explored first
        children.sort_by(|a, b| b.bound.partial_cmp(&a.bound).unwrap());
        for child in children {
            stack.push(child);
        }
    }

    Ok(BnBResult {
        optimum: incumbent,
        x_star,
        node_count,
        wall_time_s: start.elapsed().as_secs_f64(),
        node_log,
        proven: !exhausted,
    })
}

/// Exhaustive minimum of f over the feasible sign vectors; ties broken
/// lexicographically with -1 before +1. Only for small n.
pub fn brute_force(inst: &RobustQuadraticInstance) -> Option<(DVector<f64>, f64)> {
    assert!(inst.n <= 22, "brute force capped at n = 22");
    let oracle = TrustRegionOracle::new(&inst.c_mat);
    let mut best: Option<(DVector<f64>, f64)> = None;
    for x in inst.enumerate_feasible() {
        let g = &inst.b_mat * &x + &inst.c_vec;
        let (sup, _) = oracle.maximize(&g);
        let value = inst.quadratic_part(&x) + sup;
        if best.as_ref().map_or(true, |(_, bv)| value < bv - 1e-12) {
            best = Some((x, value));
        }
    }
    best
}
