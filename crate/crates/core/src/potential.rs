//! Static external fields: the electric potential `V` and the magnetic
//! vector potential `A`, together with their first and second derivatives.
//!
//! All models are defined on ℝ³. Problems in reduced dimension evaluate them
//! at points padded with zeros and only read the first `d` derivative
//! components, so a model used for a reduced problem must not depend on the
//! dropped coordinates.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Values and derivatives of `(V, A)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub v: f64,
    pub grad_v: Vector3<f64>,
    pub hess_v: Matrix3<f64>,
    pub a: Vector3<f64>,
    /// `jac_a[(j, k)] = ∂_{x_j} A_k`.
    pub jac_a: Matrix3<f64>,
    /// `hess_a[k][(i, j)] = ∂_{x_i} ∂_{x_j} A_k`.
    pub hess_a: [Matrix3<f64>; 3],
}

impl FieldSample {
    pub fn zero() -> Self {
        Self {
            v: 0.0,
            grad_v: Vector3::zeros(),
            hess_v: Matrix3::zeros(),
            a: Vector3::zeros(),
            jac_a: Matrix3::zeros(),
            hess_a: [Matrix3::zeros(); 3],
        }
    }
}

pub trait PotentialModel: Send + Sync {
    fn name(&self) -> &str;

    fn sample(&self, x: &Vector3<f64>) -> FieldSample;

    fn electric(&self, x: &Vector3<f64>) -> f64 {
        self.sample(x).v
    }

    fn magnetic(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.sample(x).a
    }

    /// `false` lets solvers skip the magnetic factors entirely.
    fn has_magnetic(&self) -> bool {
        true
    }

    /// `false` when both fields vanish identically.
    fn is_free(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl PotentialModel for ZeroField {
    fn name(&self) -> &str {
        "zero"
    }

    fn sample(&self, _x: &Vector3<f64>) -> FieldSample {
        FieldSample::zero()
    }

    fn electric(&self, _x: &Vector3<f64>) -> f64 {
        0.0
    }

    fn magnetic(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn has_magnetic(&self) -> bool {
        false
    }

    fn is_free(&self) -> bool {
        true
    }
}

/// `V(x) = ½ ω² |x − c|²`, `A = 0`.
#[derive(Clone, Debug)]
pub struct Harmonic {
    pub omega: f64,
    pub center: Vector3<f64>,
}

impl Default for Harmonic {
    fn default() -> Self {
        Self {
            omega: 1.0,
            center: Vector3::zeros(),
        }
    }
}

impl PotentialModel for Harmonic {
    fn name(&self) -> &str {
        "harmonic"
    }

    fn sample(&self, x: &Vector3<f64>) -> FieldSample {
        let w2 = self.omega * self.omega;
        let r = x - self.center;
        FieldSample {
            v: 0.5 * w2 * r.norm_squared(),
            grad_v: r * w2,
            hess_v: Matrix3::identity() * w2,
            ..FieldSample::zero()
        }
    }

    fn electric(&self, x: &Vector3<f64>) -> f64 {
        0.5 * self.omega * self.omega * (x - self.center).norm_squared()
    }

    fn magnetic(&self, _x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn has_magnetic(&self) -> bool {
        false
    }
}

/// A second-degree polynomial `c + b·x + ½ xᵀ Q x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub c: f64,
    pub b: Vector3<f64>,
    pub q: Matrix3<f64>,
}

impl Quadratic {
    pub fn zero() -> Self {
        Self {
            c: 0.0,
            b: Vector3::zeros(),
            q: Matrix3::zeros(),
        }
    }

    /// `Q` is symmetrized so that the Hessian is symmetric by construction.
    pub fn new(c: f64, b: Vector3<f64>, q: Matrix3<f64>) -> Self {
        Self {
            c,
            b,
            q: (q + q.transpose()) * 0.5,
        }
    }

    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        self.c + self.b.dot(x) + 0.5 * x.dot(&(self.q * x))
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.b + self.q * x
    }

    fn is_zero(&self) -> bool {
        self.c == 0.0 && self.b == Vector3::zeros() && self.q == Matrix3::zeros()
    }
}

/// The "custom-polynomial" model: `V` and each `A_k` quadratic polynomials.
#[derive(Clone, Debug)]
pub struct PolynomialField {
    pub electric: Quadratic,
    pub magnetic: [Quadratic; 3],
}

impl PotentialModel for PolynomialField {
    fn name(&self) -> &str {
        "custom-polynomial"
    }

    fn sample(&self, x: &Vector3<f64>) -> FieldSample {
        let mut jac_a = Matrix3::zeros();
        let mut a = Vector3::zeros();
        for (k, ak) in self.magnetic.iter().enumerate() {
            a[k] = ak.value(x);
            jac_a.set_column(k, &ak.gradient(x));
        }
        FieldSample {
            v: self.electric.value(x),
            grad_v: self.electric.gradient(x),
            hess_v: self.electric.q,
            a,
            jac_a,
            hess_a: [self.magnetic[0].q, self.magnetic[1].q, self.magnetic[2].q],
        }
    }

    fn electric(&self, x: &Vector3<f64>) -> f64 {
        self.electric.value(x)
    }

    fn magnetic(&self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.magnetic[0].value(x),
            self.magnetic[1].value(x),
            self.magnetic[2].value(x),
        )
    }

    fn has_magnetic(&self) -> bool {
        self.magnetic.iter().any(|q| !q.is_zero())
    }

    fn is_free(&self) -> bool {
        self.electric.is_zero() && !self.has_magnetic()
    }
}

/// Named parameters accepted by [`potential_by_name`].
#[derive(Clone, Debug, Default)]
pub struct PotentialParams {
    pub omega: Option<f64>,
    pub center: Option<Vector3<f64>>,
    pub electric: Option<Quadratic>,
    pub magnetic: Option<[Quadratic; 3]>,
}

/// Registry used by the configuration layer: `zero`, `harmonic`,
/// `custom-polynomial`.
pub fn potential_by_name(name: &str, params: &PotentialParams) -> Result<Box<dyn PotentialModel>> {
    match name {
        "zero" => Ok(Box::new(ZeroField)),
        "harmonic" => {
            let omega = params.omega.unwrap_or(1.0);
            if !(omega.is_finite() && omega > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "harmonic omega must be positive, got {omega}"
                )));
            }
            Ok(Box::new(Harmonic {
                omega,
                center: params.center.unwrap_or_else(Vector3::zeros),
            }))
        }
        "custom-polynomial" => Ok(Box::new(PolynomialField {
            electric: params.electric.clone().unwrap_or_else(Quadratic::zero),
            magnetic: params
                .magnetic
                .clone()
                .unwrap_or_else(|| [Quadratic::zero(), Quadratic::zero(), Quadratic::zero()]),
        })),
        other => Err(Error::InvalidInput(format!("unknown potential '{other}'"))),
    }
}
