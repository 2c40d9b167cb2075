//! Time-splitting spectral reference solver on periodic boxes.
//!
//! Each Strang step applies the potential factor for `Δt/2`, propagates the
//! free Dirac operator exactly in Fourier space, and applies the potential
//! factor for another `Δt/2`. Both substeps are unitary.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{SVector, Vector3};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::dirac::{alpha_dot, alpha_dot_apply, beta, pad3, Matrix4C, Spinor, C64};
use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::lagrangian::step_sizes;
use crate::potential::PotentialModel;
use crate::summation::{EvalGrid, Field, GridAxis};

/// Periodic axis `[min, max)` with `count` nodes at `min + jL/count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl PeriodicAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.count as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.min + j as f64 * self.spacing()
    }

    /// Angular wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.count as isize;
        let j = j as isize;
        let m = if j < n / 2 { j } else { j - n };
        2.0 * PI * m as f64 / self.length()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid<const D: usize> {
    pub axes: [PeriodicAxis; D],
}

impl<const D: usize> UniformGrid<D> {
    pub fn new(axes: [PeriodicAxis; D]) -> Result<Self> {
        for a in &axes {
            if a.count < 4 || a.count % 2 != 0 || !(a.max > a.min) {
                return Err(Error::InvalidInput(format!(
                    "periodic axis needs an even count >= 4 and max > min, got {a:?}"
                )));
            }
        }
        Ok(Self { axes })
    }

    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new([PeriodicAxis::new(lo, hi, n); D])
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    fn multi_index(&self, mut index: usize) -> [usize; D] {
        let mut out = [0; D];
        for axis in (0..D).rev() {
            out[axis] = index % self.axes[axis].count;
            index /= self.axes[axis].count;
        }
        out
    }

    pub fn node(&self, index: usize) -> SVector<f64, D> {
        let mi = self.multi_index(index);
        SVector::from_fn(|k, _| self.axes[k].coord(mi[k]))
    }

    pub fn wavevector(&self, index: usize) -> SVector<f64, D> {
        let mi = self.multi_index(index);
        SVector::from_fn(|k, _| self.axes[k].wavenumber(mi[k]))
    }

    /// Bytes needed by a solve: the field plus component planes and FFT
    /// scratch.
    pub fn estimated_bytes(&self) -> usize {
        self.len() * std::mem::size_of::<Spinor>() * 3
    }

    /// The evaluation grid made of every `stride`-th node.
    pub fn subgrid(&self, stride: usize) -> Result<EvalGrid<D>> {
        let mut axes = [GridAxis::fixed(0.0); D];
        for (k, a) in self.axes.iter().enumerate() {
            if stride == 0 || a.count % stride != 0 {
                return Err(Error::InvalidInput(format!(
                    "stride {stride} does not divide axis count {}",
                    a.count
                )));
            }
            let n = a.count / stride;
            axes[k] = GridAxis::new(a.min, a.coord((n - 1) * stride), n);
        }
        EvalGrid::new(axes)
    }
}

/// Spinor values on a [`UniformGrid`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinorGridField<const D: usize> {
    pub grid: UniformGrid<D>,
    pub values: Vec<Spinor>,
    pub epsilon: f64,
    pub t: f64,
}

impl<const D: usize> SpinorGridField<D> {
    pub fn from_initial(data: &dyn InitialData<D>, grid: UniformGrid<D>, epsilon: f64) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| data.wave(&grid.node(i), epsilon))
            .collect();
        Self {
            grid,
            values,
            epsilon,
            t: 0.0,
        }
    }

    /// `∫ |Ψ|² dx` by the periodic rectangle rule.
    pub fn mass(&self) -> f64 {
        crate::analysis::deterministic_sum(&self.values, |v| v.norm_squared()) * self.grid.cell_volume()
    }

    /// Samples every `stride`-th node as a [`Field`].
    pub fn to_field(&self, stride: usize) -> Result<Field<D>> {
        let eval = self.grid.subgrid(stride)?;
        let mut values = Vec::with_capacity(eval.len());
        for i in 0..eval.len() {
            let mi = eval.multi_index(i);
            let src = mi
                .iter()
                .zip(&self.grid.axes)
                .fold(0, |acc, (&m, a)| acc * a.count + m * stride);
            values.push(self.values[src]);
        }
        Ok(Field {
            grid: eval,
            values,
            t: self.t,
            epsilon: self.epsilon,
        })
    }
}

/// `exp(−iτ(α·ξ + β))` for `τ = Δt/ε`, by `(α·ξ+β)² = λ² I`.
pub fn kinetic_multiplier(xi: &Vector3<f64>, tau: f64) -> Matrix4C {
    let lam = (xi.norm_squared() + 1.0).sqrt();
    let (s, c) = (lam * tau).sin_cos();
    Matrix4C::identity() * C64::from(c) - (alpha_dot(xi) + beta()) * C64::new(0.0, s / lam)
}

/// `exp(−iτ(V − α·A))` for `τ = Δt/ε`.
pub fn potential_multiplier(v: f64, a: &Vector3<f64>, tau: f64) -> Matrix4C {
    let phase = C64::from_polar(1.0, -v * tau);
    let na = a.norm();
    if na < 1e-14 {
        return Matrix4C::identity() * phase;
    }
    let (s, c) = (na * tau).sin_cos();
    (Matrix4C::identity() * C64::from(c) + alpha_dot(&(a / na)) * C64::new(0.0, s)) * phase
}

fn apply_potential(psi: &Spinor, v: f64, a: &Vector3<f64>, tau: f64) -> Spinor {
    let phase = C64::from_polar(1.0, -v * tau);
    let na = a.norm();
    if na < 1e-14 {
        return psi * phase;
    }
    let (s, c) = (na * tau).sin_cos();
    let rotated = psi * C64::from(c) + alpha_dot_apply(&(a / na), psi) * C64::new(0.0, s);
    rotated * phase
}

/// Planned transforms along each axis.
struct FftPlan<const D: usize> {
    forward: [Arc<dyn Fft<f64>>; D],
    inverse: [Arc<dyn Fft<f64>>; D],
}

impl<const D: usize> FftPlan<D> {
    fn new(grid: &UniformGrid<D>) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: std::array::from_fn(|k| planner.plan_fft_forward(grid.axes[k].count)),
            inverse: std::array::from_fn(|k| planner.plan_fft_inverse(grid.axes[k].count)),
        }
    }
}

/// In-place unnormalized FFT over all axes of a row-major array.
fn fft_nd<const D: usize>(data: &mut [C64], grid: &UniformGrid<D>, plans: &[Arc<dyn Fft<f64>>; D]) {
    let counts: [usize; D] = grid.axes.map(|a| a.count);
    for axis in 0..D {
        let n = counts[axis];
        let inner: usize = counts[axis + 1..].iter().product();
        let fft = &plans[axis];
        if inner == 1 {
            data.par_chunks_mut(n).for_each_init(
                || vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()],
                |scratch, line| fft.process_with_scratch(line, scratch),
            );
            continue;
        }
        // Batch lines of one block so that gathers touch contiguous memory.
        const BATCH: usize = 16;
        data.par_chunks_mut(n * inner).for_each(|block| {
            let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let mut lines = vec![C64::new(0.0, 0.0); n * BATCH];
            let mut j0 = 0;
            while j0 < inner {
                let width = BATCH.min(inner - j0);
                for i in 0..n {
                    let row = &block[i * inner + j0..i * inner + j0 + width];
                    for (b, v) in row.iter().enumerate() {
                        lines[b * n + i] = *v;
                    }
                }
                fft.process_with_scratch(&mut lines[..n * width], &mut scratch);
                for i in 0..n {
                    let row = &mut block[i * inner + j0..i * inner + j0 + width];
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = lines[b * n + i];
                    }
                }
                j0 += width;
            }
        });
    }
}

fn split_components(values: &[Spinor]) -> [Vec<C64>; 4] {
    std::array::from_fn(|c| values.par_iter().map(|v| v[c]).collect())
}

/// Exact free-Dirac propagation over `Δt` in Fourier space.
pub fn kinetic_step<const D: usize>(f: &mut SpinorGridField<D>, dt: f64) {
    let plan = FftPlan::new(&f.grid);
    kinetic_step_planned(f, dt, &plan);
}

fn kinetic_step_planned<const D: usize>(f: &mut SpinorGridField<D>, dt: f64, plan: &FftPlan<D>) {
    if dt == 0.0 {
        return;
    }
    let mut planes = split_components(&f.values);
    for plane in planes.iter_mut() {
        fft_nd(plane, &f.grid, &plan.forward);
    }
    let tau = dt / f.epsilon;
    let eps = f.epsilon;
    let norm = 1.0 / f.grid.len() as f64;
    let grid = &f.grid;
    let [p0, p1, p2, p3] = &mut planes;
    p0.par_iter_mut()
        .zip(p1.par_iter_mut())
        .zip(p2.par_iter_mut())
        .zip(p3.par_iter_mut())
        .enumerate()
        .for_each(|(i, (((a, b), c), d))| {
            let xi = pad3(&grid.wavevector(i)) * eps;
            let u = kinetic_multiplier(&xi, tau) * Spinor::new(*a, *b, *c, *d) * C64::from(norm);
            *a = u[0];
            *b = u[1];
            *c = u[2];
            *d = u[3];
        });
    for plane in planes.iter_mut() {
        fft_nd(plane, &f.grid, &plan.inverse);
    }
    f.values.par_iter_mut().enumerate().for_each(|(i, v)| {
        *v = Spinor::new(planes[0][i], planes[1][i], planes[2][i], planes[3][i]);
    });
    f.t += dt;
}

/// Pointwise exact propagation of the potential part over `Δt`.
pub fn potential_step<const D: usize>(f: &mut SpinorGridField<D>, dt: f64, pot: &dyn PotentialModel) {
    if dt == 0.0 || pot.is_free() {
        return;
    }
    let tau = dt / f.epsilon;
    let grid = &f.grid;
    let magnetic = pot.has_magnetic();
    f.values.par_iter_mut().enumerate().for_each(|(i, psi)| {
        let x = pad3(&grid.node(i));
        let a = if magnetic { pot.magnetic(&x) } else { Vector3::zeros() };
        *psi = apply_potential(psi, pot.electric(&x), &a, tau);
    });
}

/// Strang splitting from `init.t` to `t_final` with step `dt` (last step
/// shortened to land on `t_final`).
pub fn strang_solve<const D: usize>(
    init: &SpinorGridField<D>,
    t_final: f64,
    dt: f64,
    pot: &dyn PotentialModel,
) -> Result<SpinorGridField<D>> {
    if !(t_final > init.t) {
        return Err(Error::InvalidInput(format!(
            "final time {t_final} must exceed the initial time {}",
            init.t
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let plan = FftPlan::new(&init.grid);
    let mut f = init.clone();
    let t0 = f.t;
    let mut t = t0;
    for h in step_sizes(t0, t_final, dt) {
        potential_step(&mut f, 0.5 * h, pot);
        kinetic_step_planned(&mut f, h, &plan);
        potential_step(&mut f, 0.5 * h, pot);
        t += h;
        f.t = t;
    }
    f.t = t_final;
    Ok(f)
}
