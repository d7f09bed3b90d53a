use concave_tent::bnb::{self, BnBConfig, RoundingMode};
use concave_tent::generator::{generate, GenerationRecipe};
use concave_tent::objective::evaluate_f_sdp;
use concave_tent::relaxation::{lower_bound, Fixing};
use concave_tent::tent::{build_tent, build_tent01, evaluate_tent};
use nalgebra::DVector;

fn main() {
    let full = build_tent01([1.0, -8.0], [-2.0, 2.0], false);
    let rel = build_tent01([1.0, -8.0], [-2.0, 2.0], true);
    for &xv in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let x = DVector::from_element(1, xv);
        let ef = evaluate_tent(&full, &x, 1e-8).unwrap();
        let er = evaluate_tent(&rel, &x, 1e-8).unwrap();
        println!(
            "x={xv:.2} g={:.6} (expect {:.6})  g_rel={:.6} (expect {:.6}) slope={:.4} eps={:.2e}",
            ef.value,
            1.0 - xv,
            er.value,
            3.0 * (1.0 - xv).sqrt() + 2.0 * xv - 2.0,
            ef.supergradient[0],
            ef.epsilon
        );
    }

    let inst = generate(&GenerationRecipe::default(), 4, 2, -2, 2, 7, 0).unwrap();
    let tent = build_tent(&inst, true).unwrap();
    let x = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
    let (fx, _) = evaluate_f_sdp(&inst, &x).unwrap();
    let g = evaluate_tent(&tent, &x, 1e-8).unwrap();
    println!("vertex: f={fx:.8} g={:.8} eps={:.2e}", g.value, g.epsilon);
    let xm = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.0]);
    let gm = evaluate_tent(&tent, &xm, 1e-8).unwrap();
    println!("interior: g={:.8} slope={:?}", gm.value, gm.supergradient.as_slice());

    let r = lower_bound(&inst, &Fixing::new(), 1e-8).unwrap();
    let (xb, fb) = bnb::brute_force(&inst).unwrap();
    println!("root bound={:.8} brute={:.8} at {:?}", r.bound, fb, xb.as_slice());

    for mode in [RoundingMode::Classical, RoundingMode::TentGuided] {
        let cfg = BnBConfig { mode, ..Default::default() };
        let res = bnb::solve(&inst, &cfg).unwrap();
        println!(
            "bnb {mode:?}: opt={:.8} nodes={} proven={} x={:?}",
            res.optimum, res.node_count, res.proven, res.x_star.as_slice()
        );
    }
}
