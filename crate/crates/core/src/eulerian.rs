//! Eulerian Gaussian beams on a phase-space grid `(y, ξ)` for `d ∈ {1, 2}`.
//!
//! The level-set vector `φ`, the phase `S` and the amplitude `u₀` are
//! transported by the Liouville operator of `h±` with a semi-Lagrangian
//! scheme. Hessians come from derivatives of `φ`, and the field is rebuilt
//! by a discretized delta function on the zero level set of `Re φ`.

use nalgebra::SVector;
use rayon::prelude::*;

use crate::dirac::{h_derivatives, projector, transport_matrix, Branch, PhasePoint, Spinor, C64};
use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::lagrangian::{divergence, min_imag_eigenvalue, step_sizes, BeamOptions, CMatrix};
use crate::potential::PotentialModel;
use crate::small;
use crate::summation::{default_theta, superpose, EvalGrid, Field, GridAxis, PreparedBeam};

/// `|det ∇ξφ|` below this is treated as singular.
pub const SINGULAR_JACOBIAN: f64 = 1e-10;

/// Tensor grid over `(y, ξ)`. Flat indices run over `y` first (slowest)
/// and then `ξ`, each row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid<const D: usize> {
    pub y: [GridAxis; D],
    pub xi: [GridAxis; D],
}

/// Multilinear interpolation weights at one point.
struct Stencil {
    idx: [usize; 16],
    w: [f64; 16],
    len: usize,
    clamped: bool,
}

impl<const D: usize> PhaseGrid<D> {
    pub fn new(y: [GridAxis; D], xi: [GridAxis; D]) -> Result<Self> {
        if D == 0 || D > 2 {
            return Err(Error::InvalidInput(format!(
                "phase-space grids support d = 1 or 2, got {D}"
            )));
        }
        for a in y.iter().chain(&xi) {
            if a.count < 3 || !(a.max > a.min) {
                return Err(Error::InvalidInput(format!(
                    "phase-space axis needs at least 3 nodes and max > min, got {a:?}"
                )));
            }
        }
        Ok(Self { y, xi })
    }

    /// `[lo_y, hi_y]ᵈ × [lo_ξ, hi_ξ]ᵈ` with `ny` and `nxi` nodes per axis.
    pub fn cube(y: (f64, f64, usize), xi: (f64, f64, usize)) -> Result<Self> {
        Self::new([GridAxis::new(y.0, y.1, y.2); D], [GridAxis::new(xi.0, xi.1, xi.2); D])
    }

    fn axis(&self, k: usize) -> &GridAxis {
        if k < D {
            &self.y[k]
        } else {
            &self.xi[k - D]
        }
    }

    pub fn len(&self) -> usize {
        self.y.iter().chain(&self.xi).map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Phase-space cell volume `ΔyᵈΔξᵈ`.
    pub fn cell_volume(&self) -> f64 {
        self.y.iter().chain(&self.xi).map(|a| a.spacing()).product()
    }

    fn split(&self, mut index: usize) -> [usize; 4] {
        let mut out = [0; 4];
        for k in (0..2 * D).rev() {
            let n = self.axis(k).count;
            out[k] = index % n;
            index /= n;
        }
        out
    }

    fn join(&self, mi: &[usize; 4]) -> usize {
        (0..2 * D).fold(0, |acc, k| acc * self.axis(k).count + mi[k])
    }

    fn stride(&self, k: usize) -> usize {
        (k + 1..2 * D).map(|j| self.axis(j).count).product()
    }

    pub fn node(&self, index: usize) -> (SVector<f64, D>, SVector<f64, D>) {
        let mi = self.split(index);
        (
            SVector::from_fn(|k, _| self.y[k].coord(mi[k])),
            SVector::from_fn(|k, _| self.xi[k].coord(mi[D + k])),
        )
    }

    /// Whether `index` lies within `margin` nodes of a `ξ` boundary.
    pub fn near_xi_boundary(&self, index: usize, margin: usize) -> bool {
        let mi = self.split(index);
        (0..D).any(|k| mi[D + k] < margin || mi[D + k] + margin >= self.xi[k].count)
    }

    fn stencil(&self, y: &SVector<f64, D>, xi: &SVector<f64, D>) -> Stencil {
        let mut base = [0usize; 4];
        let mut frac = [0f64; 4];
        let mut clamped = false;
        for k in 0..2 * D {
            let a = self.axis(k);
            let x = if k < D { y[k] } else { xi[k - D] };
            let xc = x.clamp(a.min, a.max);
            clamped |= xc != x;
            let pos = (xc - a.min) / a.spacing();
            let i0 = (pos.floor() as usize).min(a.count - 2);
            base[k] = i0;
            frac[k] = pos - i0 as f64;
        }
        let len = 1 << (2 * D);
        let mut st = Stencil {
            idx: [0; 16],
            w: [0.0; 16],
            len,
            clamped,
        };
        for corner in 0..len {
            let mut mi = base;
            let mut w = 1.0;
            for k in 0..2 * D {
                if corner >> k & 1 == 1 {
                    mi[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            st.idx[corner] = self.join(&mi);
            st.w[corner] = w;
        }
        st
    }
}

/// Where the initial amplitude is projected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProjectAt {
    /// `Π±(y, ξ)` at every phase-space node.
    #[default]
    Node,
    /// `Π±(y, ∇S_I(y))`, constant in `ξ`.
    PhaseGradient,
}

/// Level-set fields of one branch.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceFields<const D: usize> {
    pub grid: PhaseGrid<D>,
    pub phi: Vec<SVector<C64, D>>,
    pub s: Vec<f64>,
    pub u0: Vec<Spinor>,
    pub branch: Branch,
    pub t: f64,
    /// Characteristic feet that left the grid and were clamped, cumulative.
    pub clamped_feet: usize,
}

pub fn init_phase_fields<const D: usize>(
    data: &dyn InitialData<D>,
    grid: &PhaseGrid<D>,
    branch: Branch,
    pot: &dyn PotentialModel,
    project: ProjectAt,
) -> PhaseSpaceFields<D> {
    let nodes: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (y, xi) = grid.node(i);
            let grad = data.phase_gradient(&y);
            let phi = SVector::from_fn(|k, _| C64::new(xi[k] - grad[k], -y[k]));
            let at = match project {
                ProjectAt::Node => xi,
                ProjectAt::PhaseGradient => grad,
            };
            let u0 = projector(branch, &PhasePoint::new(y, at), pot) * data.amplitude(&y);
            (phi, data.phase(&y), u0)
        })
        .collect();
    let mut f = PhaseSpaceFields {
        grid: grid.clone(),
        phi: Vec::with_capacity(nodes.len()),
        s: Vec::with_capacity(nodes.len()),
        u0: Vec::with_capacity(nodes.len()),
        branch,
        t: 0.0,
        clamped_feet: 0,
    };
    for (phi, s, u0) in nodes {
        f.phi.push(phi);
        f.s.push(s);
        f.u0.push(u0);
    }
    f
}

/// `(∂φ/∂y, ∂φ/∂ξ)` with entry `(k, j) = ∂φ_k/∂·_j`: centered differences
/// inside, second-order one-sided at the edges.
fn levelset_jacobians<const D: usize>(f: &PhaseSpaceFields<D>, index: usize) -> (CMatrix<D>, CMatrix<D>) {
    let g = &f.grid;
    let mi = g.split(index);
    let mut jy = CMatrix::<D>::zeros();
    let mut jxi = CMatrix::<D>::zeros();
    let c = C64::from;
    for (axis, &i) in mi.iter().enumerate().take(2 * D) {
        let n = g.axis(axis).count;
        let h = g.axis(axis).spacing();
        let st = g.stride(axis);
        let d: SVector<C64, D> = if i == 0 {
            (f.phi[index] * c(-3.0) + f.phi[index + st] * c(4.0) - f.phi[index + 2 * st]) * c(0.5 / h)
        } else if i == n - 1 {
            (f.phi[index] * c(3.0) - f.phi[index - st] * c(4.0) + f.phi[index - 2 * st]) * c(0.5 / h)
        } else {
            (f.phi[index + st] - f.phi[index - st]) * c(0.5 / h)
        };
        let target = if axis < D { &mut jy } else { &mut jxi };
        target.set_column(axis % D, &d);
    }
    (jy, jxi)
}

/// `M = −(∇ξφ)⁻¹ ∇yφ` at a node, symmetrized.
pub fn hessian_from_levelset<const D: usize>(f: &PhaseSpaceFields<D>, index: usize) -> Result<CMatrix<D>> {
    let (jy, jxi) = levelset_jacobians(f, index);
    let det = small::det(&jxi).norm();
    let singular = || {
        let (y, xi) = f.grid.node(index);
        Error::SingularJacobian {
            y: y.iter().copied().collect(),
            xi: xi.iter().copied().collect(),
            det,
        }
    };
    if det <= SINGULAR_JACOBIAN {
        return Err(singular());
    }
    let inv = jxi.try_inverse().ok_or_else(singular)?;
    let m = -(inv * jy);
    Ok((m + m.transpose()) * C64::from(0.5))
}

fn characteristic_rhs<const D: usize>(
    b: Branch,
    y: &SVector<f64, D>,
    xi: &SVector<f64, D>,
    pot: &dyn PotentialModel,
) -> (SVector<f64, D>, SVector<f64, D>) {
    let hd = h_derivatives(b, &PhasePoint::new(*y, *xi), pot);
    (hd.grad_xi, -hd.grad_y)
}

/// RK4 along the Hamiltonian flow for a signed time `h`.
pub fn trace_characteristic<const D: usize>(
    b: Branch,
    y: &SVector<f64, D>,
    xi: &SVector<f64, D>,
    h: f64,
    pot: &dyn PotentialModel,
) -> (SVector<f64, D>, SVector<f64, D>) {
    let (ky1, kx1) = characteristic_rhs(b, y, xi, pot);
    let (ky2, kx2) = characteristic_rhs(b, &(y + ky1 * (0.5 * h)), &(xi + kx1 * (0.5 * h)), pot);
    let (ky3, kx3) = characteristic_rhs(b, &(y + ky2 * (0.5 * h)), &(xi + kx2 * (0.5 * h)), pot);
    let (ky4, kx4) = characteristic_rhs(b, &(y + ky3 * h), &(xi + kx3 * h), pot);
    (
        y + (ky1 + ky2 * 2.0 + ky3 * 2.0 + ky4) * (h / 6.0),
        xi + (kx1 + kx2 * 2.0 + kx3 * 2.0 + kx4) * (h / 6.0),
    )
}

/// Amplitude generator `−½ div + A±` and the Riccati right side at a
/// phase-space point.
fn amplitude_generator<const D: usize>(
    b: Branch,
    p: &PhasePoint<D>,
    m: &CMatrix<D>,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
) -> (crate::dirac::Matrix4C, CMatrix<D>, f64) {
    let hd = h_derivatives(b, p, pot);
    let div = divergence(&hd, m, opts.divergence);
    let mut gen = if pot.is_free() {
        crate::dirac::Matrix4C::zeros()
    } else {
        transport_matrix(b, p, pot, opts.transport)
    };
    for i in 0..4 {
        gen[(i, i)] -= div * 0.5;
    }
    let c = |a: &nalgebra::SMatrix<f64, D, D>| a.map(C64::from);
    let riccati = -c(&hd.yy) - c(&hd.y_xi) * m - m * c(&hd.xi_y()) - m * c(&hd.xi_xi) * m;
    let source = hd.grad_xi.dot(&p.xi) - hd.h;
    (gen, riccati, source)
}

/// One semi-Lagrangian step of size `dt`.
pub fn liouville_step<const D: usize>(
    f: &PhaseSpaceFields<D>,
    dt: f64,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
) -> Result<PhaseSpaceFields<D>> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be non-negative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(f.clone());
    }
    let g = &f.grid;
    let b = f.branch;
    let hessians: Vec<CMatrix<D>> = (0..g.len())
        .into_par_iter()
        .map(|i| hessian_from_levelset(f, i).unwrap_or_else(|_| CMatrix::zeros()))
        .collect();

    let updated: Vec<_> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let (y, xi) = g.node(i);
            let (yf, xif) = trace_characteristic(b, &y, &xi, -dt, pot);
            let (ym, xim) = trace_characteristic(b, &y, &xi, -0.5 * dt, pot);
            let st = g.stencil(&yf, &xif);
            let mut phi = SVector::<C64, D>::zeros();
            let mut s = 0.0;
            let mut u = Spinor::zeros();
            let mut m = CMatrix::<D>::zeros();
            for c in 0..st.len {
                let (j, w) = (st.idx[c], st.w[c]);
                phi += f.phi[j] * C64::from(w);
                s += f.s[j] * w;
                u += f.u0[j] * C64::from(w);
                m += hessians[j] * C64::from(w);
            }
            let foot = PhasePoint::new(yf, xif);
            let mid = PhasePoint::new(ym, xim);
            let (gen_f, ric_f, _) = amplitude_generator(b, &foot, &m, pot, opts);
            let m_half = m + ric_f * C64::from(0.5 * dt);
            let (gen_m, _, source_m) = amplitude_generator(b, &mid, &m_half, pot, opts);
            let u_half = u + gen_f * u * C64::from(0.5 * dt);
            let u_new = u + gen_m * u_half * C64::from(dt);
            (phi, s + dt * source_m, u_new, st.clamped)
        })
        .collect();

    let mut out = PhaseSpaceFields {
        grid: g.clone(),
        phi: Vec::with_capacity(updated.len()),
        s: Vec::with_capacity(updated.len()),
        u0: Vec::with_capacity(updated.len()),
        branch: b,
        t: f.t + dt,
        clamped_feet: f.clamped_feet,
    };
    for (phi, s, u, clamped) in updated {
        out.phi.push(phi);
        out.s.push(s);
        out.u0.push(u);
        out.clamped_feet += clamped as usize;
    }
    let clamped = out.clamped_feet - f.clamped_feet;
    if clamped > 0 {
        log::debug!("{clamped} characteristic feet clamped to the phase grid at t={}", out.t);
    }
    Ok(out)
}

/// Steps from `f.t` to `t_final`, the last step shortened to land on it.
pub fn evolve_fields<const D: usize>(
    f: &PhaseSpaceFields<D>,
    t_final: f64,
    dt: f64,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
) -> Result<PhaseSpaceFields<D>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if t_final < f.t {
        return Err(Error::InvalidInput(format!(
            "cannot evolve backwards from t={} to t={t_final}",
            f.t
        )));
    }
    let mut cur = f.clone();
    for h in step_sizes(f.t, t_final, dt) {
        cur = liouville_step(&cur, h, pot, opts)?;
    }
    cur.t = t_final;
    Ok(cur)
}

/// Cosine kernel `Π_k (1 + cos(π r_k/w_k)) / (2w_k)` on `|r_k| < w_k`.
pub fn cosine_delta<const D: usize>(r: &SVector<f64, D>, width: &SVector<f64, D>) -> f64 {
    let mut out = 1.0;
    for k in 0..D {
        if r[k].abs() >= width[k] {
            return 0.0;
        }
        out *= (1.0 + (std::f64::consts::PI * r[k] / width[k]).cos()) / (2.0 * width[k]);
    }
    out
}

/// Result of an Eulerian reconstruction.
#[derive(Clone, Debug)]
pub struct Reconstruction<const D: usize> {
    pub field: Field<D>,
    /// Phase-space nodes inside the delta support.
    pub support_nodes: usize,
    /// Support nodes within two cells of a `ξ` boundary.
    pub near_boundary: usize,
    pub theta: f64,
}

/// Beams carried by the support of the discretized delta on `Re φ = 0`.
pub fn delta_beams<const D: usize>(
    f: &PhaseSpaceFields<D>,
    width: Option<SVector<f64, D>>,
) -> Result<(Vec<PreparedBeam<D>>, usize)> {
    let g = &f.grid;
    let width = width.unwrap_or_else(|| SVector::from_fn(|k, _| 2.0 * g.xi[k].spacing()));
    let vol = g.cell_volume();
    let picked: Vec<_> = (0..g.len())
        .into_par_iter()
        .filter_map(|i| {
            let re = f.phi[i].map(|z| z.re);
            let delta = cosine_delta(&re, &width);
            (delta > 0.0).then_some((i, delta))
        })
        .collect();
    let mut near = 0;
    let mut beams = Vec::with_capacity(picked.len());
    for (i, delta) in picked {
        if g.near_xi_boundary(i, 2) {
            near += 1;
        }
        let m = hessian_from_levelset(f, i)?;
        let (y, xi) = g.node(i);
        beams.push(PreparedBeam {
            y,
            xi,
            s: f.s[i],
            mu: min_imag_eigenvalue(&m),
            m,
            u0: f.u0[i],
            weight: delta * vol,
        });
    }
    Ok((beams, near))
}

/// `Φ(x) = (2πε)^{−d/2} Σ r_θ(x−y) u₀ e^{iT/ε} δ_w(Re φ) ΔyᵈΔξᵈ` over the
/// given branches. `width` defaults to `2Δξ` per component and `theta` to
/// [`default_theta`].
pub fn reconstruct<const D: usize>(
    branches: &[&PhaseSpaceFields<D>],
    grid: &EvalGrid<D>,
    epsilon: f64,
    theta: Option<f64>,
    width: Option<SVector<f64, D>>,
) -> Result<Reconstruction<D>> {
    let t = branches.first().map_or(0.0, |f| f.t);
    if branches.iter().any(|f| (f.t - t).abs() > 1e-12) {
        return Err(Error::InvalidInput("branches must be at a common time".into()));
    }
    let mut beams = Vec::new();
    let mut near = 0;
    for f in branches {
        let (b, n) = delta_beams(f, width)?;
        beams.extend(b);
        near += n;
    }
    if near > 0 {
        log::warn!("{near} level-set nodes lie within two cells of the xi boundary at t={t}");
    }
    let mu_min = beams.iter().map(|b| b.mu).fold(f64::INFINITY, f64::min);
    let theta = theta.unwrap_or_else(|| default_theta(epsilon, mu_min));
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "truncation radius must be positive, got {theta}"
        )));
    }
    Ok(Reconstruction {
        field: superpose(&beams, grid, epsilon, theta, t),
        support_nodes: beams.len(),
        near_boundary: near,
        theta,
    })
}
