//! Lagrangian Gaussian beams: initialization on an equidistant mesh of
//! centers and RK4 evolution of `(y, ξ, S, P, R, u₀)` along the Hamiltonian
//! flow of `h±`.
//!
//! The complex Hessian is carried in factored form `M = R P⁻¹`, where `(P, R)`
//! solve a linear system that stays regular through caustics.

use nalgebra::{Cholesky, SMatrix, SVector};
use rayon::prelude::*;

use crate::dirac::{
    h_derivatives_from_sample, pad3, projector, transport_matrix_from_sample, Branch, HamiltonianDerivatives, Matrix4C,
    PhasePoint, Spinor, TransportForm, C64,
};
use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::potential::PotentialModel;
use crate::small;

pub type CMatrix<const D: usize> = SMatrix<C64, D, D>;

/// `|det P|` below this is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;
/// Relative asymmetry tolerated in `M = R P⁻¹`.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Beams whose amplitude is below this fraction of the largest are dropped.
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-8;

/// How `∇_y · ω` is evaluated along a beam.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DivergenceMode {
    /// Total derivative through `ξ = ∇S`: `tr(∇ξy h) + tr(∇ξξ h M)`.
    #[default]
    Total,
    /// Partial derivative in `y` at fixed `ξ`: `tr(∇ξy h)`.
    Partial,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BeamOptions {
    pub divergence: DivergenceMode,
    pub transport: TransportForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamState<const D: usize> {
    pub y: SVector<f64, D>,
    pub xi: SVector<f64, D>,
    pub s: f64,
    pub p: CMatrix<D>,
    pub r: CMatrix<D>,
    pub u0: Spinor,
    pub branch: Branch,
    pub y0: SVector<f64, D>,
    /// Quadrature weight `Δy₀ᵈ`.
    pub weight: f64,
}

/// Time derivative of the dynamic part of a [`BeamState`].
#[derive(Clone, Debug, PartialEq)]
pub struct BeamDerivative<const D: usize> {
    pub y: SVector<f64, D>,
    pub xi: SVector<f64, D>,
    pub s: f64,
    pub p: CMatrix<D>,
    pub r: CMatrix<D>,
    pub u0: Spinor,
}

impl<const D: usize> BeamState<D> {
    pub fn phase_point(&self) -> PhasePoint<D> {
        PhasePoint::new(self.y, self.xi)
    }

    fn advanced(&self, k: &BeamDerivative<D>, h: f64) -> Self {
        let hc = C64::from(h);
        Self {
            y: self.y + k.y * h,
            xi: self.xi + k.xi * h,
            s: self.s + k.s * h,
            p: self.p + k.p * hc,
            r: self.r + k.r * hc,
            u0: self.u0 + k.u0 * hc,
            ..self.clone()
        }
    }

    fn rk4_combine(&self, k: [&BeamDerivative<D>; 4], h: f64) -> Self {
        let w = h / 6.0;
        let wc = C64::from(w);
        let two = C64::from(2.0);
        Self {
            y: self.y + (k[0].y + k[1].y * 2.0 + k[2].y * 2.0 + k[3].y) * w,
            xi: self.xi + (k[0].xi + k[1].xi * 2.0 + k[2].xi * 2.0 + k[3].xi) * w,
            s: self.s + (k[0].s + 2.0 * k[1].s + 2.0 * k[2].s + k[3].s) * w,
            p: self.p + (k[0].p + k[1].p * two + k[2].p * two + k[3].p) * wc,
            r: self.r + (k[0].r + k[1].r * two + k[2].r * two + k[3].r) * wc,
            u0: self.u0 + (k[0].u0 + k[1].u0 * two + k[2].u0 * two + k[3].u0) * wc,
            ..self.clone()
        }
    }

    /// `PᵀR − RᵀP`, conserved by the exact flow.
    pub fn symplectic_defect(&self) -> CMatrix<D> {
        self.p.transpose() * self.r - self.r.transpose() * self.p
    }

    pub fn energy(&self, pot: &dyn PotentialModel) -> f64 {
        crate::dirac::eigenvalue_h(self.branch, &self.phase_point(), pot)
    }

    /// `‖Π∓ u₀‖ / ‖u₀‖` at the current phase point.
    pub fn projector_leak(&self, pot: &dyn PotentialModel) -> f64 {
        let n = self.u0.norm();
        if n == 0.0 {
            return 0.0;
        }
        (projector(self.branch.opposite(), &self.phase_point(), pot) * self.u0).norm() / n
    }
}

/// The weighted beam ensemble at a common time.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamSet<const D: usize> {
    /// Ordered by branch (`+` first), then by mesh index.
    pub beams: Vec<BeamState<D>>,
    pub epsilon: f64,
    pub t: f64,
}

impl<const D: usize> BeamSet<D> {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn count(&self, branch: Branch) -> usize {
        self.beams.iter().filter(|b| b.branch == branch).count()
    }
}

/// Equidistant mesh of initial beam centers `c + kΔy₀`, `|k_i| ≤ n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamMesh<const D: usize> {
    pub center: SVector<f64, D>,
    pub spacing: f64,
    pub half_count: usize,
}

impl<const D: usize> BeamMesh<D> {
    /// Mesh of spacing `Δy₀` covering `[c − L, c + L]ᵈ`.
    pub fn covering(center: SVector<f64, D>, half_width: f64, spacing: f64) -> Self {
        let half_count = if spacing > 0.0 {
            (half_width / spacing + 1e-9).floor() as usize
        } else {
            0
        };
        Self {
            center,
            spacing,
            half_count,
        }
    }

    pub fn nodes_per_axis(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis().pow(D as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, mut index: usize) -> SVector<f64, D> {
        let n = self.nodes_per_axis();
        let mut y = self.center;
        for axis in (0..D).rev() {
            let k = (index % n) as f64 - self.half_count as f64;
            index /= n;
            y[axis] += k * self.spacing;
        }
        y
    }

    pub fn weight(&self) -> f64 {
        self.spacing.powi(D as i32)
    }
}

/// Builds both branches of beams from WKB initial data.
pub fn init_beams<const D: usize>(
    data: &dyn InitialData<D>,
    mesh: &BeamMesh<D>,
    epsilon: f64,
    pot: &dyn PotentialModel,
    drop_threshold: f64,
) -> Result<BeamSet<D>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(mesh.spacing > 0.0 && mesh.spacing.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beam mesh spacing must be positive, got {}",
            mesh.spacing
        )));
    }
    let weight = mesh.weight();
    let projected = |branch: Branch, index: usize| {
        let y0 = mesh.node(index);
        let xi = data.phase_gradient(&y0);
        let u0 = projector(branch, &PhasePoint::new(y0, xi), pot) * data.amplitude(&y0);
        (y0, xi, u0)
    };
    let max = Branch::BOTH
        .iter()
        .flat_map(|&b| (0..mesh.len()).map(move |i| (b, i)))
        .map(|(b, i)| projected(b, i).2.norm())
        .fold(0.0, f64::max);
    let cutoff = drop_threshold * max;
    let mut beams = Vec::new();
    for branch in Branch::BOTH {
        for index in 0..mesh.len() {
            let (y0, xi, u0) = projected(branch, index);
            let norm = u0.norm();
            if norm == 0.0 || norm < cutoff {
                continue;
            }
            beams.push(BeamState {
                y: y0,
                xi,
                s: data.phase(&y0),
                p: CMatrix::identity(),
                r: data.phase_hessian(&y0).map(C64::from) + CMatrix::identity() * C64::i(),
                u0,
                branch,
                y0,
                weight,
            });
        }
    }
    Ok(BeamSet { beams, epsilon, t: 0.0 })
}

fn singular_p<const D: usize>(s: &BeamState<D>) -> Error {
    Error::SingularP {
        index: 0,
        branch: s.branch.symbol(),
        t: f64::NAN,
        det: small::det(&s.p).norm(),
    }
}

/// `M = R P⁻¹` without symmetry checks.
pub fn raw_hessian<const D: usize>(s: &BeamState<D>) -> Option<CMatrix<D>> {
    if small::det(&s.p).norm() <= SINGULAR_DET {
        return None;
    }
    s.p.try_inverse().map(|inv| s.r * inv)
}

fn asymmetry<const D: usize>(m: &CMatrix<D>) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1.0)
}

/// `M = R P⁻¹`, symmetrized after checking the asymmetry.
pub fn hessian_of<const D: usize>(s: &BeamState<D>) -> Result<CMatrix<D>> {
    let m = raw_hessian(s).ok_or_else(|| singular_p(s))?;
    let asym = asymmetry(&m);
    if asym > SYMMETRY_TOL {
        return Err(Error::AsymmetricHessian {
            index: 0,
            branch: s.branch.symbol(),
            t: f64::NAN,
            asymmetry: asym,
        });
    }
    Ok((m + m.transpose()) * C64::from(0.5))
}

/// Smallest eigenvalue of `Im M` (symmetric part).
pub fn min_imag_eigenvalue<const D: usize>(m: &CMatrix<D>) -> f64 {
    let im = m.map(|z| z.im);
    let sym = (im + im.transpose()) * 0.5;
    small::symmetric_eigenvalues(&sym)[0]
}

fn is_positive_definite<const D: usize>(m: &CMatrix<D>) -> bool {
    let im = m.map(|z| z.im);
    Cholesky::new((im + im.transpose()) * 0.5).is_some()
}

/// Divergence of the ray velocity along the beam.
pub fn divergence<const D: usize>(hd: &HamiltonianDerivatives<D>, m: &CMatrix<D>, mode: DivergenceMode) -> C64 {
    let partial = C64::from(hd.y_xi.trace());
    match mode {
        DivergenceMode::Partial => partial,
        DivergenceMode::Total => partial + (hd.xi_xi.map(C64::from) * m).trace(),
    }
}

/// Right-hand side of the beam ODE system.
pub fn beam_rhs<const D: usize>(
    s: &BeamState<D>,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
) -> Result<BeamDerivative<D>> {
    let m = raw_hessian(s).ok_or_else(|| singular_p(s))?;
    let sample = pot.sample(&pad3(&s.y));
    let hd = h_derivatives_from_sample(s.branch, &s.phase_point(), &sample);
    let xi_y = hd.xi_y().map(C64::from);
    let y_xi = hd.y_xi.map(C64::from);
    let xi_xi = hd.xi_xi.map(C64::from);
    let yy = hd.yy.map(C64::from);

    let div = divergence(&hd, &m, opts.divergence);
    let mut gen: Matrix4C = if pot.is_free() {
        Matrix4C::zeros()
    } else {
        transport_matrix_from_sample(s.branch, &pad3(&s.xi), &sample, opts.transport)
    };
    for i in 0..4 {
        gen[(i, i)] -= div * 0.5;
    }

    Ok(BeamDerivative {
        y: hd.grad_xi,
        xi: -hd.grad_y,
        s: hd.grad_xi.dot(&s.xi) - hd.h,
        p: xi_y * s.p + xi_xi * s.r,
        r: -(yy * s.p) - y_xi * s.r,
        u0: gen * s.u0,
    })
}

/// One classical RK4 step of size `h`.
pub fn rk4_step<const D: usize>(
    s: &BeamState<D>,
    h: f64,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
) -> Result<BeamState<D>> {
    let k1 = beam_rhs(s, pot, opts)?;
    let k2 = beam_rhs(&s.advanced(&k1, 0.5 * h), pot, opts)?;
    let k3 = beam_rhs(&s.advanced(&k2, 0.5 * h), pot, opts)?;
    let k4 = beam_rhs(&s.advanced(&k3, h), pot, opts)?;
    Ok(s.rk4_combine([&k1, &k2, &k3, &k4], h))
}

fn check_invariants<const D: usize>(s: &BeamState<D>) -> Result<()> {
    let m = raw_hessian(s).ok_or_else(|| singular_p(s))?;
    let asym = asymmetry(&m);
    if asym > SYMMETRY_TOL {
        return Err(Error::AsymmetricHessian {
            index: 0,
            branch: s.branch.symbol(),
            t: f64::NAN,
            asymmetry: asym,
        });
    }
    if !is_positive_definite(&m) {
        return Err(Error::LostPositivity {
            index: 0,
            branch: s.branch.symbol(),
            t: f64::NAN,
        });
    }
    Ok(())
}

fn locate(err: Error, index: usize, time: f64) -> Error {
    match err {
        Error::SingularP { branch, det, .. } => Error::SingularP {
            index,
            branch,
            t: time,
            det,
        },
        Error::LostPositivity { branch, .. } => Error::LostPositivity { index, branch, t: time },
        Error::AsymmetricHessian { branch, asymmetry, .. } => Error::AsymmetricHessian {
            index,
            branch,
            t: time,
            asymmetry,
        },
        other => other,
    }
}

/// Step times from `t0` to `t_final` with nominal step `dt`, the last one
/// shortened to land exactly on `t_final`.
pub fn step_sizes(t0: f64, t_final: f64, dt: f64) -> Vec<f64> {
    let mut steps = Vec::new();
    let span = t_final - t0;
    if span <= 0.0 {
        return steps;
    }
    let full = (span / dt * (1.0 - 1e-12)).floor() as usize;
    steps.resize(full, dt);
    let rest = span - full as f64 * dt;
    if rest > 1e-14 * t_final.abs().max(1.0) {
        steps.push(rest);
    }
    steps
}

/// Advances every beam from `bs.t` to `t_final` with RK4.
pub fn evolve<const D: usize>(
    bs: &mut BeamSet<D>,
    t_final: f64,
    dt: f64,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if t_final < bs.t {
        return Err(Error::InvalidInput(format!(
            "cannot evolve backwards from t={} to t={t_final}",
            bs.t
        )));
    }
    let steps = step_sizes(bs.t, t_final, dt);
    let t0 = bs.t;
    bs.beams
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(index, beam)| -> Result<()> {
            let mut t = t0;
            for &h in &steps {
                *beam = rk4_step(beam, h, pot, opts).map_err(|e| locate(e, index, t))?;
                t += h;
                check_invariants(beam).map_err(|e| locate(e, index, t))?;
            }
            Ok(())
        })?;
    bs.t = t_final;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::GaussianPacket;
    use crate::potential::{Harmonic, ZeroField};
    use nalgebra::{Matrix1, Vector1, Vector3};

    fn rest_beam<const D: usize>() -> BeamState<D> {
        BeamState {
            y: SVector::zeros(),
            xi: SVector::zeros(),
            s: 0.0,
            p: CMatrix::identity(),
            r: CMatrix::identity() * C64::i(),
            u0: crate::initial::spin_up(),
            branch: Branch::Plus,
            y0: SVector::zeros(),
            weight: 1.0,
        }
    }

    #[test]
    fn init_example1_origin() {
        let data = GaussianPacket::<3>::example1();
        let mesh = BeamMesh::covering(Vector3::zeros(), 0.2, 0.05);
        let bs = init_beams(&data, &mesh, 1.0 / 256.0, &ZeroField, DEFAULT_DROP_THRESHOLD).unwrap();
        let origin = bs.beams.iter().find(|b| b.y0 == Vector3::zeros()).unwrap();
        assert_eq!(origin.branch, Branch::Plus);
        assert_eq!(origin.xi, Vector3::zeros());
        assert_eq!(origin.s, 0.0);
        assert_eq!(hessian_of(origin).unwrap(), CMatrix::<3>::identity() * C64::i());
        assert!((origin.u0 - crate::initial::spin_up()).norm() < 1e-15);
        // Π⁻ u_I vanishes at ξ = 0, so every minus beam is dropped.
        assert_eq!(bs.count(Branch::Minus), 0);
        assert_eq!(bs.count(Branch::Plus), mesh.len());
        assert!((origin.weight - 0.05f64.powi(3)).abs() < 1e-18);
    }

    #[test]
    fn init_quadratic_phase() {
        let mut data = GaussianPacket::<3>::example1();
        data.width = 10.0;
        data.chirp = nalgebra::Matrix3::identity();
        let mesh = BeamMesh::covering(Vector3::zeros(), 1.0, 1.0);
        let bs = init_beams(&data, &mesh, 0.01, &ZeroField, 0.0).unwrap();
        let beam = bs
            .beams
            .iter()
            .find(|b| b.y0 == Vector3::new(1.0, 0.0, 0.0) && b.branch == Branch::Plus)
            .unwrap();
        assert_eq!(beam.xi, Vector3::new(1.0, 0.0, 0.0));
        let m = hessian_of(beam).unwrap();
        let expect = CMatrix::<3>::identity() * C64::new(1.0, 1.0);
        assert!((m - expect).norm() < 1e-15);
    }

    #[test]
    fn init_rejects_bad_input() {
        let data = GaussianPacket::<1>::example1();
        let mesh = BeamMesh::covering(Vector1::zeros(), 0.2, 0.05);
        assert!(init_beams(&data, &mesh, 0.0, &ZeroField, 1e-8).is_err());
        let bad = BeamMesh::covering(Vector1::zeros(), 0.2, 0.0);
        assert!(init_beams(&data, &bad, 0.1, &ZeroField, 1e-8).is_err());
    }

    #[test]
    fn rhs_free_at_rest() {
        let d = beam_rhs(&rest_beam::<3>(), &ZeroField, &BeamOptions::default()).unwrap();
        assert_eq!(d.y, Vector3::zeros());
        assert_eq!(d.xi, Vector3::zeros());
        assert_eq!(d.s, -1.0);
        assert!((d.p - CMatrix::<3>::identity() * C64::i()).norm() < 1e-15);
        assert_eq!(d.r, CMatrix::<3>::zeros());
        // −½ tr(∇ξξh M) = −½ · 3i
        assert!((d.u0[0] - C64::new(0.0, -1.5)).norm() < 1e-15);
    }

    #[test]
    fn rhs_free_moving() {
        let mut b = rest_beam::<3>();
        b.xi = Vector3::new(1.0, 0.0, 0.0);
        let d = beam_rhs(&b, &ZeroField, &BeamOptions::default()).unwrap();
        let r2 = 2f64.sqrt();
        assert!((d.y - Vector3::new(1.0 / r2, 0.0, 0.0)).norm() < 1e-15);
        assert!((d.s - (1.0 / r2 - r2)).abs() < 1e-15);
    }

    #[test]
    fn rhs_harmonic_force() {
        let mut b = rest_beam::<3>();
        b.y = Vector3::new(0.3, -0.2, 0.1);
        b.xi = Vector3::new(0.4, 0.4, 0.0);
        let d = beam_rhs(&b, &Harmonic::default(), &BeamOptions::default()).unwrap();
        assert!((d.xi + b.y).norm() < 1e-15);
    }

    #[test]
    fn free_hessian_closed_form() {
        let mut bs = BeamSet {
            beams: vec![rest_beam::<1>()],
            epsilon: 0.01,
            t: 0.0,
        };
        evolve(&mut bs, 1.0, 0.05, &ZeroField, &BeamOptions::default()).unwrap();
        let beam = &bs.beams[0];
        assert!((beam.p[(0, 0)] - C64::new(1.0, 1.0)).norm() < 1e-12);
        assert!((beam.r[(0, 0)] - C64::i()).norm() < 1e-12);
        let m = hessian_of(beam).unwrap();
        assert!((m[(0, 0)] - C64::new(0.5, 0.5)).norm() < 1e-12);
        assert!((beam.s + 1.0).abs() < 1e-12);
        assert_eq!(beam.y, Vector1::zeros());
    }

    #[test]
    fn hessian_examples() {
        let b = rest_beam::<2>();
        assert_eq!(hessian_of(&b).unwrap(), CMatrix::<2>::identity() * C64::i());
        let mut b1 = rest_beam::<1>();
        b1.p = Matrix1::new(C64::new(1.0, 1.0));
        assert!((hessian_of(&b1).unwrap()[(0, 0)] - C64::new(0.5, 0.5)).norm() < 1e-15);
        b1.p = Matrix1::new(C64::new(0.0, 0.0));
        assert!(matches!(hessian_of(&b1), Err(Error::SingularP { .. })));
    }

    #[test]
    fn step_sizes_land_on_final_time() {
        let steps = step_sizes(0.0, 1.0, 0.3);
        assert_eq!(steps.len(), 4);
        assert!((steps.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(step_sizes(0.0, 1.0, 0.25).len(), 4);
        assert!(step_sizes(1.0, 1.0, 0.1).is_empty());
    }

    #[test]
    fn evolve_rejects_nonpositive_dt() {
        let mut bs = BeamSet {
            beams: vec![rest_beam::<1>()],
            epsilon: 0.01,
            t: 0.0,
        };
        assert!(evolve(&mut bs, 1.0, 0.0, &ZeroField, &BeamOptions::default()).is_err());
    }

    #[test]
    fn mesh_nodes() {
        let mesh = BeamMesh::covering(Vector3::new(0.1, 0.0, 0.0), 0.1, 0.05);
        assert_eq!(mesh.nodes_per_axis(), 5);
        assert_eq!(mesh.len(), 125);
        assert!((mesh.node(0) - Vector3::new(0.0, -0.1, -0.1)).norm() < 1e-15);
        assert!((mesh.node(62) - Vector3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
    }
}
