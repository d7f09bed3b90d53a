//! Rounding relaxed points to feasible sign vectors and the tent-guided
//! primal heuristic.

use crate::conic::ConicError;
use crate::objective::{evaluate_f_sdp, RobustQuadraticInstance};
use crate::tent::{evaluate_tent, TentProgram};
use nalgebra::DVector;

/// Minimizes `y'x` exactly over sign vectors with coordinate sum in
/// `[l, u]`. A point with k entries at +1 has coordinate sum 2k - n, so the
/// window translates into a range of allowed k; for each k the best choice
/// puts +1 on the k smallest entries of y. Returns `None` when the window
/// admits no point.
pub fn linear_minimize_over_x(
    y: &DVector<f64>,
    l: i64,
    u: i64,
) -> Option<(DVector<f64>, f64)> {
    let n = y.len();
    let ni = n as i64;
    let k_lo = ((l + ni) as f64 / 2.0).ceil() as i64;
    let k_hi = ((u + ni) as f64 / 2.0).floor() as i64;
    let k_lo = k_lo.max(0);
    let k_hi = k_hi.min(ni);
    if k_lo > k_hi {
        return None;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| y[i].partial_cmp(&y[j]).unwrap().then(i.cmp(&j)));

    // value at k = -sum(y) + 2 * (sum of k smallest entries)
    let total: f64 = y.iter().sum();
    let mut prefix = 0.0;
    let mut best: Option<(i64, f64)> = None;
    // unconstrained optimum flips exactly the negative entries
    let k0 = y.iter().filter(|&&v| v < 0.0).count() as i64;
    let mut vals = Vec::with_capacity((k_hi - k_lo + 1) as usize);
    for k in 0..=k_hi {
        if k >= k_lo {
            vals.push((k, -total + 2.0 * prefix));
        }
        if k < ni {
            prefix += y[order[k as usize]];
        }
    }
    for (k, v) in vals {
        let better = match best {
            None => true,
            Some((bk, bv)) => {
                v < bv - 1e-15 || (v <= bv + 1e-15 && (k - k0).abs() < (bk - k0).abs())
            }
        };
        if better {
            best = Some((k, v));
        }
    }
    let (k_best, v_best) = best?;
    let mut x = DVector::from_element(n, -1.0);
    for &i in order.iter().take(k_best as usize) {
        x[i] = 1.0;
    }
    Some((x, v_best))
}

/// Feasible sign vector closest to x0 in Euclidean distance (equivalently,
/// the one maximizing the inner product with x0).
pub fn closest_feasible(x0: &DVector<f64>, l: i64, u: i64) -> Option<DVector<f64>> {
    linear_minimize_over_x(&(-x0), l, u).map(|(x, _)| x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingMethod {
    /// Minimized the tent supergradient over the feasible set.
    TentGuided,
    /// Snapped the relaxed point to the nearest feasible sign vector.
    Classical,
}

#[derive(Debug, Clone)]
pub struct RoundingOutcome {
    pub x_ub: DVector<f64>,
    pub f_value: f64,
    pub method: RoundingMethod,
    /// Tent value and certificate gap at the relaxed point, when available.
    pub tent_value: Option<f64>,
    pub tent_epsilon: Option<f64>,
}

/// Classical rounding: snap the relaxed point to the feasible set and
/// evaluate f there.
pub fn round_classical(
    inst: &RobustQuadraticInstance,
    x_rel: &DVector<f64>,
    _tol: f64,
) -> Result<Option<RoundingOutcome>, ConicError> {
    let Some(x) = closest_feasible(x_rel, inst.l, inst.u) else {
        return Ok(None);
    };
    let (f_value, _) = evaluate_f_sdp(inst, &x)?;
    Ok(Some(RoundingOutcome {
        x_ub: x,
        f_value,
        method: RoundingMethod::Classical,
        tent_value: None,
        tent_epsilon: None,
    }))
}

/// Tent-guided rounding: evaluate the tent at the relaxed point, minimize
/// the resulting supergradient over the feasible set, and evaluate f at the
/// minimizer. Falls back to classical rounding when the relaxed point lies
/// outside the tent's domain.
pub fn primal_heuristic(
    inst: &RobustQuadraticInstance,
    tent: &TentProgram,
    x_rel: &DVector<f64>,
    tol: f64,
) -> Result<Option<RoundingOutcome>, ConicError> {
    let eval = evaluate_tent(tent, x_rel, tol)?;
    if !eval.is_finite() {
        return round_classical(inst, x_rel, tol);
    }
    let Some((x, _)) = linear_minimize_over_x(&eval.supergradient, inst.l, inst.u) else {
        return Ok(None);
    };
    let (f_value, _) = evaluate_f_sdp(inst, &x)?;
    Ok(Some(RoundingOutcome {
        x_ub: x,
        f_value,
        method: RoundingMethod::TentGuided,
        tent_value: Some(eval.value),
        tent_epsilon: Some(eval.epsilon),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::DEFAULT_SOLVER_TOL;
    use crate::generator::{generate, GenerationRecipe};
    use crate::relaxation::{lower_bound, Fixing};
    use crate::tent::build_tent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn enumerate_min(y: &DVector<f64>, l: i64, u: i64) -> Option<f64> {
        let n = y.len();
        let mut best = None;
        for k in 0..(1u64 << n) {
            let x: DVector<f64> =
                DVector::from_fn(n, |i, _| if (k >> i) & 1 == 1 { 1.0 } else { -1.0 });
            let s = x.sum() as i64;
            if s < l || s > u {
                continue;
            }
            let v = y.dot(&x);
            if best.map_or(true, |b| v < b) {
                best = Some(v);
            }
        }
        best
    }

    #[test]
    fn linear_minimize_spec_points() {
        let y = DVector::from_vec(vec![3.0, -1.0, 2.0]);
        let (x, v) = linear_minimize_over_x(&y, -1, 1).unwrap();
        assert_eq!(x.as_slice(), &[-1.0, 1.0, -1.0]);
        assert_eq!(v, -6.0);

        // forced point
        let y = DVector::from_element(3, 1.0);
        let (x, _) = linear_minimize_over_x(&y, 3, 3).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0, 1.0]);

        // infeasible window
        assert!(linear_minimize_over_x(&y, 4, 9).is_none());
    }

    #[test]
    fn linear_minimize_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let n = rng.gen_range(1..=12);
            let ni = n as i64;
            let l = rng.gen_range(-ni..=ni);
            let u = rng.gen_range(l..=ni);
            let y = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let mine = linear_minimize_over_x(&y, l, u).map(|(_, v)| v);
            let brute = enumerate_min(&y, l, u);
            match (mine, brute) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() < 1e-12, "trial {trial}: {a} vs {b}")
                }
                other => panic!("trial {trial}: disagree on feasibility: {other:?}"),
            }
        }
    }

    #[test]
    fn closest_feasible_spec_points() {
        // already feasible stays put
        let x0 = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        assert_eq!(closest_feasible(&x0, -3, 3).unwrap(), x0);

        let x0 = DVector::from_vec(vec![0.9, -0.2, 0.1]);
        let x = closest_feasible(&x0, 1, 3).unwrap();
        assert_eq!(x.as_slice(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn closest_feasible_matches_enumeration_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let ni = n as i64;
            let l = rng.gen_range(-ni..=ni);
            let u = rng.gen_range(l..=ni);
            let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
            let Some(x) = closest_feasible(&x0, l, u) else {
                assert!(enumerate_min(&(-&x0), l, u).is_none());
                continue;
            };
            let best_ip = -enumerate_min(&(-&x0), l, u).unwrap();
            assert!((x0.dot(&x) - best_ip).abs() < 1e-12);
        }
    }

    #[test]
    fn heuristic_returns_feasible_points_with_true_f() {
        let inst = generate(&GenerationRecipe::default(), 5, 3, -1, 3, 50, 0).unwrap();
        let tent = build_tent(&inst, true).unwrap();
        let rel = lower_bound(&inst, &Fixing::new(), DEFAULT_SOLVER_TOL).unwrap();
        for out in [
            primal_heuristic(&inst, &tent, &rel.x_rel, DEFAULT_SOLVER_TOL).unwrap().unwrap(),
            round_classical(&inst, &rel.x_rel, DEFAULT_SOLVER_TOL).unwrap().unwrap(),
        ] {
            let s = out.x_ub.sum() as i64;
            assert!(out.x_ub.iter().all(|&v| v == 1.0 || v == -1.0));
            assert!(s >= inst.l && s <= inst.u);
            let (f, _) = evaluate_f_sdp(&inst, &out.x_ub).unwrap();
            assert!((f - out.f_value).abs() < 1e-9);
        }
    }

    #[test]
    fn heuristic_falls_back_outside_domain() {
        let inst = generate(&GenerationRecipe::default(), 3, 2, -1, 1, 51, 0).unwrap();
        let tent = build_tent(&inst, true).unwrap();
        // e'x = 3 is outside the window, tent infeasible there
        let x = DVector::from_element(3, 1.0);
        let out = primal_heuristic(&inst, &tent, &x, DEFAULT_SOLVER_TOL).unwrap().unwrap();
        assert_eq!(out.method, RoundingMethod::Classical);
    }
}
