#![allow(dead_code)]

use diracgb::potential::{PolynomialField, Quadratic};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..scale))
}

pub fn quadratic(rng: &mut impl Rng, scale: f64) -> Quadratic {
    let q = Matrix3::from_fn(|_, _| rng.random_range(-scale..scale));
    Quadratic::new(rng.random_range(-scale..scale), vec3(rng, scale), q)
}

/// Random quadratic `V` and `A`.
pub fn random_field(rng: &mut impl Rng, scale: f64) -> PolynomialField {
    PolynomialField {
        electric: quadratic(rng, scale),
        magnetic: [quadratic(rng, scale), quadratic(rng, scale), quadratic(rng, scale)],
    }
}

/// Random quadratic `V` with `A = 0`.
pub fn random_electric(rng: &mut impl Rng, scale: f64) -> PolynomialField {
    PolynomialField {
        electric: quadratic(rng, scale),
        magnetic: [Quadratic::zero(), Quadratic::zero(), Quadratic::zero()],
    }
}

fn planar_quadratic(rng: &mut impl Rng, scale: f64) -> Quadratic {
    let mut q = quadratic(rng, scale);
    q.b[2] = 0.0;
    for i in 0..3 {
        q.q[(2, i)] = 0.0;
        q.q[(i, 2)] = 0.0;
    }
    q
}

/// Field depending only on `(x₁, x₂)`, for reduced 2D runs.
pub fn planar_field(rng: &mut impl Rng, scale: f64) -> PolynomialField {
    PolynomialField {
        electric: planar_quadratic(rng, scale),
        magnetic: [
            planar_quadratic(rng, scale),
            planar_quadratic(rng, scale),
            planar_quadratic(rng, scale),
        ],
    }
}
