//! Dirac algebra and the eigen-structure of the Dirac symbol
//! `D(x, ξ) = α·(ξ − A(x)) + β + V(x)`.
//!
//! The 4×4 algebra is intrinsically three dimensional. Reduced problems in
//! `d < 3` dimensions embed positions and momenta into ℝ³ with zero padding
//! and keep only the first `d` components of every derivative.

use nalgebra::{Matrix3, Matrix4, SMatrix, SVector, Vector3, Vector4};
use num_complex::Complex64;

use crate::potential::{FieldSample, PotentialModel};

pub type C64 = Complex64;
pub type Matrix4C = Matrix4<C64>;
pub type Spinor = Vector4<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Energy band: `h± = ±λ + V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }

    pub fn opposite(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn from_symbol(c: &str) -> Option<Branch> {
        match c {
            "+" | "plus" => Some(Branch::Plus),
            "-" | "minus" => Some(Branch::Minus),
            _ => None,
        }
    }
}

/// A point `(x, ξ)` of phase space in `D` dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint<const D: usize> {
    pub x: SVector<f64, D>,
    pub xi: SVector<f64, D>,
}

impl<const D: usize> PhasePoint<D> {
    pub fn new(x: SVector<f64, D>, xi: SVector<f64, D>) -> Self {
        Self { x, xi }
    }
}

/// Zero-pads a `D`-vector into ℝ³.
pub fn pad3<const D: usize>(v: &SVector<f64, D>) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for i in 0..D.min(3) {
        out[i] = v[i];
    }
    out
}

/// The Dirac matrices `(α¹, α², α³, β)` in the standard representation.
#[derive(Clone, Debug)]
pub struct DiracMatrices {
    pub alpha: [Matrix4C; 3],
    pub beta: Matrix4C,
}

pub fn dirac_matrices() -> DiracMatrices {
    let pauli = [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ];
    let alpha = pauli.map(|s| {
        let mut m = Matrix4C::zeros();
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c + 2)] = s[r][c];
                m[(r + 2, c)] = s[r][c];
            }
        }
        m
    });
    let beta = Matrix4C::from_diagonal(&Vector4::new(ONE, ONE, -ONE, -ONE));
    DiracMatrices { alpha, beta }
}

pub fn beta() -> Matrix4C {
    Matrix4C::from_diagonal(&Vector4::new(ONE, ONE, -ONE, -ONE))
}

/// `α·v` in closed form.
pub fn alpha_dot(v: &Vector3<f64>) -> Matrix4C {
    let a = C64::new(v[0], -v[1]);
    let b = C64::new(v[0], v[1]);
    let z = C64::new(v[2], 0.0);
    let mut m = Matrix4C::zeros();
    m[(0, 2)] = z;
    m[(0, 3)] = a;
    m[(1, 2)] = b;
    m[(1, 3)] = -z;
    m[(2, 0)] = z;
    m[(2, 1)] = a;
    m[(3, 0)] = b;
    m[(3, 1)] = -z;
    m
}

/// `(α·v) ψ` without forming the matrix.
pub fn alpha_dot_apply(v: &Vector3<f64>, psi: &Spinor) -> Spinor {
    let a = C64::new(v[0], -v[1]);
    let b = C64::new(v[0], v[1]);
    let z = v[2];
    Spinor::new(
        psi[2] * z + psi[3] * a,
        psi[2] * b - psi[3] * z,
        psi[0] * z + psi[1] * a,
        psi[0] * b - psi[1] * z,
    )
}

pub fn is_hermitian(m: &Matrix4C, tol: f64) -> bool {
    (m - m.adjoint()).iter().all(|e| e.norm() <= tol)
}

/// Kinetic momentum `ξ − A(x)` in ℝ³.
fn kinetic_momentum<const D: usize>(p: &PhasePoint<D>, a: &Vector3<f64>) -> Vector3<f64> {
    pad3(&p.xi) - a
}

pub fn dirac_symbol<const D: usize>(p: &PhasePoint<D>, pot: &dyn PotentialModel) -> Matrix4C {
    let x = pad3(&p.x);
    let q = kinetic_momentum(p, &pot.magnetic(&x));
    alpha_dot(&q) + beta() + Matrix4C::identity() * C64::from(pot.electric(&x))
}

pub fn lambda<const D: usize>(p: &PhasePoint<D>, pot: &dyn PotentialModel) -> f64 {
    let x = pad3(&p.x);
    (kinetic_momentum(p, &pot.magnetic(&x)).norm_squared() + 1.0).sqrt()
}

pub fn eigenvalue_h<const D: usize>(b: Branch, p: &PhasePoint<D>, pot: &dyn PotentialModel) -> f64 {
    let x = pad3(&p.x);
    b.sign() * lambda(p, pot) + pot.electric(&x)
}

/// `Π± = ½ (I ± (D − V)/λ)`.
pub fn projector<const D: usize>(b: Branch, p: &PhasePoint<D>, pot: &dyn PotentialModel) -> Matrix4C {
    let x = pad3(&p.x);
    projector_from_momentum(b, &kinetic_momentum(p, &pot.magnetic(&x)))
}

/// Projector as a function of the kinetic momentum `q = ξ − A` alone.
pub fn projector_from_momentum(b: Branch, q: &Vector3<f64>) -> Matrix4C {
    let lam = (q.norm_squared() + 1.0).sqrt();
    let s = C64::from(0.5 * b.sign() / lam);
    Matrix4C::identity() * C64::from(0.5) + (alpha_dot(q) + beta()) * s
}

/// First and second derivatives of `h±` restricted to the first `D`
/// coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianDerivatives<const D: usize> {
    pub h: f64,
    pub lambda: f64,
    pub grad_y: SVector<f64, D>,
    pub grad_xi: SVector<f64, D>,
    pub yy: SMatrix<f64, D, D>,
    /// `y_xi[(i, j)] = ∂²h / ∂y_i ∂ξ_j`.
    pub y_xi: SMatrix<f64, D, D>,
    pub xi_xi: SMatrix<f64, D, D>,
}

impl<const D: usize> HamiltonianDerivatives<D> {
    /// `xi_y[(i, j)] = ∂²h / ∂ξ_i ∂y_j`.
    pub fn xi_y(&self) -> SMatrix<f64, D, D> {
        self.y_xi.transpose()
    }
}

/// Closed-form derivatives of `h± = ±√(|ξ − A|² + 1) + V`.
pub fn h_derivatives<const D: usize>(
    b: Branch,
    p: &PhasePoint<D>,
    pot: &dyn PotentialModel,
) -> HamiltonianDerivatives<D> {
    let x = pad3(&p.x);
    let f = pot.sample(&x);
    h_derivatives_from_sample(b, p, &f)
}

pub fn h_derivatives_from_sample<const D: usize>(
    b: Branch,
    p: &PhasePoint<D>,
    f: &FieldSample,
) -> HamiltonianDerivatives<D> {
    let s = b.sign();
    let q = pad3(&p.xi) - f.a;
    let lam = (q.norm_squared() + 1.0).sqrt();
    let inv = 1.0 / lam;
    let inv3 = inv * inv * inv;
    // n[j] = Σ_k q_k ∂_j A_k, so that ∂_j λ = −n[j] / λ.
    let n: Vector3<f64> = f.jac_a * q;

    let mut out = HamiltonianDerivatives {
        h: s * lam + f.v,
        lambda: lam,
        grad_y: SVector::zeros(),
        grad_xi: SVector::zeros(),
        yy: SMatrix::zeros(),
        y_xi: SMatrix::zeros(),
        xi_xi: SMatrix::zeros(),
    };
    for i in 0..D {
        out.grad_xi[i] = s * q[i] * inv;
        out.grad_y[i] = -s * n[i] * inv + f.grad_v[i];
        for j in 0..D {
            let delta = if i == j { 1.0 } else { 0.0 };
            out.xi_xi[(i, j)] = s * (delta * inv - q[i] * q[j] * inv3);
            // ∂_{y_i} of ±q_j/λ.
            out.y_xi[(i, j)] = s * (-f.jac_a[(i, j)] * inv + q[j] * n[i] * inv3);
            let mut second = 0.0;
            for k in 0..3 {
                second += f.jac_a[(i, k)] * f.jac_a[(j, k)] - q[k] * f.hess_a[k][(i, j)];
            }
            out.yy[(i, j)] = s * (second * inv - n[i] * n[j] * inv3) + f.hess_v[(i, j)];
        }
    }
    out
}

/// Which variant of the transport matrix to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportForm {
    /// The four-term expression exactly as commonly printed, identical for
    /// both branches up to `∇h±`.
    #[default]
    Printed,
    /// Uses `h± − V = ±λ` instead of `λ` in the `α·∇h±` coefficient. This
    /// keeps `Π∓ u± = 0` along `−` beams in a nonzero electric field.
    BranchSigned,
}

/// The transport matrix `A±(x, ξ)` of the amplitude equation.
pub fn transport_matrix<const D: usize>(
    b: Branch,
    p: &PhasePoint<D>,
    pot: &dyn PotentialModel,
    form: TransportForm,
) -> Matrix4C {
    let x = pad3(&p.x);
    let f = pot.sample(&x);
    transport_matrix_from_sample(b, &pad3(&p.xi), &f, form)
}

pub fn transport_matrix_from_sample(b: Branch, xi3: &Vector3<f64>, f: &FieldSample, form: TransportForm) -> Matrix4C {
    let s = b.sign();
    let q = xi3 - f.a;
    let lam = (q.norm_squared() + 1.0).sqrt();
    // w[l] = Σ_k q_k ∂_l A_k
    let w: Vector3<f64> = f.jac_a * q;
    let grad_h: Vector3<f64> = -w * (s / lam) + f.grad_v;

    let mut m = Matrix4C::zeros();
    if f.jac_a != Matrix3::zeros() {
        let dm = dirac_matrices();
        for k in 0..3 {
            for l in 0..3 {
                if k != l && f.jac_a[(k, l)] != 0.0 {
                    m += dm.alpha[k] * dm.alpha[l] * C64::from(f.jac_a[(k, l)] / (2.0 * lam));
                }
            }
        }
    }
    let grad_coeff = match form {
        TransportForm::Printed => -0.5 / lam,
        TransportForm::BranchSigned => -0.5 / (s * lam),
    };
    m += alpha_dot(&(grad_h * grad_coeff - w * (0.5 / (lam * lam))));
    let scalar = q.dot(&(w + grad_h * lam)) / (2.0 * lam * lam * lam);
    for i in 0..4 {
        m[(i, i)] += C64::from(scalar);
    }
    m
}

/// Particle density `ρ = |ψ|²` and current `j_k = ⟨ψ, αᵏ ψ⟩`.
pub fn observables(psi: &Spinor) -> (f64, Vector3<f64>) {
    let rho = psi.norm_squared();
    let mut j = Vector3::zeros();
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        j[k] = psi.dotc(&alpha_dot_apply(&e, psi)).re;
    }
    (rho, j)
}

/// Observables of a whole field, pointwise.
pub fn field_observables(values: &[Spinor]) -> (Vec<f64>, Vec<Vector3<f64>>) {
    values.iter().map(observables).unzip()
}
