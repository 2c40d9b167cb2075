//! WKB initial data `Ψ(0, x) = u_I(x) e^{i S_I(x)/ε}` for the benchmark
//! problems.

use std::f64::consts::PI;

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};

use crate::dirac::{Spinor, C64};

/// Initial amplitude and phase with analytic phase derivatives.
pub trait InitialData<const D: usize>: Send + Sync {
    fn phase(&self, y: &SVector<f64, D>) -> f64;
    fn phase_gradient(&self, y: &SVector<f64, D>) -> SVector<f64, D>;
    fn phase_hessian(&self, y: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn amplitude(&self, y: &SVector<f64, D>) -> Spinor;

    /// The full oscillatory initial wave function at `y`.
    fn wave(&self, y: &SVector<f64, D>, epsilon: f64) -> Spinor {
        let phase = C64::from_polar(1.0, self.phase(y) / epsilon);
        self.amplitude(y) * phase
    }
}

pub fn spin_up() -> Spinor {
    Spinor::new(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    )
}

/// Gaussian envelope `e^{−|x−c|²/4d²} χ` with the quadratic phase
/// `S_I = k·(x−c) + ½ (x−c)ᵀ K (x−c)`.
#[derive(Clone, Debug)]
pub struct GaussianPacket<const D: usize> {
    pub center: SVector<f64, D>,
    pub width: f64,
    pub momentum: SVector<f64, D>,
    pub chirp: SMatrix<f64, D, D>,
    pub spinor: Spinor,
}

impl<const D: usize> GaussianPacket<D> {
    /// Example 1 data: `S_I = 0`, `χ = (1,0,0,0)`, `d = 1/16`, centered at 0.
    pub fn example1() -> Self {
        Self::at_rest(SVector::zeros())
    }

    pub fn at_rest(center: SVector<f64, D>) -> Self {
        Self {
            center,
            width: 1.0 / 16.0,
            momentum: SVector::zeros(),
            chirp: SMatrix::zeros(),
            spinor: spin_up(),
        }
    }

    pub fn envelope(&self, y: &SVector<f64, D>) -> f64 {
        (-(y - self.center).norm_squared() / (4.0 * self.width * self.width)).exp()
    }
}

impl GaussianPacket<3> {
    /// Example 3 data: the Example 1 packet displaced to `(0.1, −0.1, 0)`.
    pub fn example3() -> Self {
        Self::at_rest(SVector::<f64, 3>::new(0.1, -0.1, 0.0))
    }
}

impl<const D: usize> InitialData<D> for GaussianPacket<D> {
    fn phase(&self, y: &SVector<f64, D>) -> f64 {
        let r = y - self.center;
        self.momentum.dot(&r) + 0.5 * r.dot(&(self.chirp * r))
    }

    fn phase_gradient(&self, y: &SVector<f64, D>) -> SVector<f64, D> {
        self.momentum + self.chirp * (y - self.center)
    }

    fn phase_hessian(&self, _y: &SVector<f64, D>) -> SMatrix<f64, D, D> {
        self.chirp
    }

    fn amplitude(&self, y: &SVector<f64, D>) -> Spinor {
        self.spinor * C64::from(self.envelope(y))
    }
}

/// Example 2 data in the `(x₁, x₂)` plane:
/// `S₀ = (1 + cos 2πx₁)(1 + cos 2πx₂)/40` and the two-component spinor
/// `χ = (½(√(|∇S₀|²+1) + 1), 0, 0, ½(∂₁S₀ + ∂₂S₀))`.
#[derive(Clone, Debug)]
pub struct CosinePhasePacket {
    pub width: f64,
}

impl Default for CosinePhasePacket {
    fn default() -> Self {
        Self { width: 1.0 / 16.0 }
    }
}

impl InitialData<2> for CosinePhasePacket {
    fn phase(&self, y: &Vector2<f64>) -> f64 {
        (1.0 + (2.0 * PI * y[0]).cos()) * (1.0 + (2.0 * PI * y[1]).cos()) / 40.0
    }

    fn phase_gradient(&self, y: &Vector2<f64>) -> Vector2<f64> {
        let (s1, c1) = (2.0 * PI * y[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * y[1]).sin_cos();
        let k = 2.0 * PI / 40.0;
        Vector2::new(-k * s1 * (1.0 + c2), -k * s2 * (1.0 + c1))
    }

    fn phase_hessian(&self, y: &Vector2<f64>) -> Matrix2<f64> {
        let (s1, c1) = (2.0 * PI * y[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * y[1]).sin_cos();
        let k2 = 4.0 * PI * PI / 40.0;
        let off = k2 * s1 * s2;
        Matrix2::new(-k2 * c1 * (1.0 + c2), off, off, -k2 * c2 * (1.0 + c1))
    }

    fn amplitude(&self, y: &Vector2<f64>) -> Spinor {
        let g = self.phase_gradient(y);
        let env = (-y.norm_squared() / (4.0 * self.width * self.width)).exp();
        let upper = 0.5 * ((g.norm_squared() + 1.0).sqrt() + 1.0);
        let lower = 0.5 * (g[0] + g[1]);
        Spinor::new(
            C64::from(env * upper),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::from(env * lower),
        )
    }
}
