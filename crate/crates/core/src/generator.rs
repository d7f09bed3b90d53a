//! Random instance generation with reproducible streams.

use crate::objective::{InstanceError, RobustQuadraticInstance};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sampling recipe. Entries of the quadratic blocks are uniform on the given
/// intervals, then scaled down by dimension so that the three objective
/// pieces stay comparable in magnitude.
#[derive(Debug, Clone)]
pub struct GenerationRecipe {
    /// Interval for the raw entries of A and a (A symmetrized, both / n^2).
    pub a_range: (f64, f64),
    /// Interval for the raw entries of C and c (C symmetrized / q^2, c / q^2).
    pub c_range: (f64, f64),
    /// Interval for the raw entries of B (scaled by 1 / (q n)).
    pub b_range: (f64, f64),
}

impl Default for GenerationRecipe {
    fn default() -> Self {
        GenerationRecipe {
            a_range: (-0.5, 0.5),
            c_range: (0.0, 1.0),
            b_range: (0.0, 1.0),
        }
    }
}

/// Draws an instance. `seed` and `stream` select an independent random
/// stream, so distinct (seed, stream) pairs give independent instances and
/// re-running with the same pair reproduces the draw exactly.
pub fn generate(
    recipe: &GenerationRecipe,
    n: usize,
    q: usize,
    l: i64,
    u: i64,
    seed: u64,
    stream: u64,
) -> Result<RobustQuadraticInstance, InstanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let nf = n as f64;
    let qf = q as f64;

    let raw_a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(recipe.a_range.0..recipe.a_range.1));
    let a_mat = (&raw_a + raw_a.transpose()) / (2.0 * nf * nf);
    let a_vec = DVector::from_fn(n, |_, _| {
        rng.gen_range(recipe.a_range.0..recipe.a_range.1) / (nf * nf)
    });
    let raw_b = DMatrix::from_fn(q, n, |_, _| rng.gen_range(recipe.b_range.0..recipe.b_range.1));
    let b_mat = raw_b / (qf * nf);
    let raw_c = DMatrix::from_fn(q, q, |_, _| rng.gen_range(recipe.c_range.0..recipe.c_range.1));
    let c_mat = (&raw_c + raw_c.transpose()) / (2.0 * qf * qf);
    let c_vec = DVector::from_fn(q, |_, _| {
        rng.gen_range(recipe.c_range.0..recipe.c_range.1) / (qf * qf)
    });

    RobustQuadraticInstance::new(a_mat, a_vec, b_mat, c_mat, c_vec, l, u, Some(seed))
}
