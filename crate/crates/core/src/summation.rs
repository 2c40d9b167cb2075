//! Beam superposition on physical-space grids.

use std::f64::consts::PI;

use nalgebra::SVector;
use rayon::prelude::*;

use crate::dirac::{Spinor, C64};
use crate::error::{Error, Result};
use crate::lagrangian::{hessian_of, min_imag_eigenvalue, BeamSet, BeamState, CMatrix};

/// One axis of an evaluation grid. A degenerate axis (`count == 1`,
/// `min == max`) pins that coordinate, e.g. the `x₃ = 0` slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn fixed(value: f64) -> Self {
        Self {
            min: value,
            max: value,
            count: 1,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.count == 1
    }

    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    /// Indices `i` with `|coord(i) − c| ≤ r`.
    fn index_range(&self, c: f64, r: f64) -> Option<(usize, usize)> {
        if self.is_fixed() {
            return ((self.min - c).abs() <= r).then_some((0, 0));
        }
        let h = self.spacing();
        let lo = ((c - r - self.min) / h).ceil().max(0.0);
        let hi = ((c + r - self.min) / h).floor().min((self.count - 1) as f64);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    fn validate(&self) -> Result<()> {
        let ok = if self.count == 1 {
            self.min == self.max && self.min.is_finite()
        } else {
            self.count >= 2 && self.max > self.min && self.min.is_finite() && self.max.is_finite()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad grid axis {self:?}")))
        }
    }
}

/// Uniform tensor grid in ℝᴰ, nodes ordered row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalGrid<const D: usize> {
    pub axes: [GridAxis; D],
}

impl<const D: usize> EvalGrid<D> {
    pub fn new(axes: [GridAxis; D]) -> Result<Self> {
        for a in &axes {
            a.validate()?;
        }
        Ok(Self { axes })
    }

    /// `[lo, hi]ᴰ` with `n` points per axis.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new([GridAxis::new(lo, hi, n); D])
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut index: usize) -> [usize; D] {
        let mut out = [0; D];
        for axis in (0..D).rev() {
            out[axis] = index % self.axes[axis].count;
            index /= self.axes[axis].count;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize; D]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.count + i)
    }

    pub fn node(&self, index: usize) -> SVector<f64, D> {
        let mi = self.multi_index(index);
        SVector::from_fn(|k, _| self.axes[k].coord(mi[k]))
    }

    /// Header form `min:max:count` per axis, comma separated.
    pub fn describe(&self) -> String {
        self.axes
            .iter()
            .map(|a| format!("{}:{}:{}", a.min, a.max, a.count))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// A spinor field sampled on an [`EvalGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<const D: usize> {
    pub grid: EvalGrid<D>,
    pub values: Vec<Spinor>,
    pub t: f64,
    pub epsilon: f64,
}

impl<const D: usize> Field<D> {
    pub fn zeros(grid: EvalGrid<D>, t: f64, epsilon: f64) -> Self {
        let values = vec![Spinor::zeros(); grid.len()];
        Self {
            grid,
            values,
            t,
            epsilon,
        }
    }

    pub fn from_fn(grid: EvalGrid<D>, t: f64, epsilon: f64, f: impl Fn(&SVector<f64, D>) -> Spinor + Sync) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.node(i))).collect();
        Self {
            grid,
            values,
            t,
            epsilon,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `C²` cut-off: 1 on `|r| ≤ θ`, 0 on `|r| ≥ 2θ`, quintic smoothstep between.
pub fn truncation_r<const D: usize>(r: &SVector<f64, D>, theta: f64) -> f64 {
    truncation_radial(r.norm(), theta)
}

pub fn truncation_radial(dist: f64, theta: f64) -> f64 {
    if dist <= theta {
        1.0
    } else if dist >= 2.0 * theta {
        0.0
    } else {
        let s = (dist - theta) / theta;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// `u₀ e^{iT/ε}` with the second-order Taylor phase
/// `T = S + ξ·(x−y) + ½ (x−y)ᵀ M (x−y)`.
pub fn evaluate_beam<const D: usize>(s: &BeamState<D>, x: &SVector<f64, D>, epsilon: f64) -> Result<Spinor> {
    let m = hessian_of(s)?;
    Ok(beam_value(&s.y, &s.xi, s.s, &m, &s.u0, x, epsilon))
}

fn beam_value<const D: usize>(
    y: &SVector<f64, D>,
    xi: &SVector<f64, D>,
    s: f64,
    m: &CMatrix<D>,
    u0: &Spinor,
    x: &SVector<f64, D>,
    epsilon: f64,
) -> Spinor {
    u0 * beam_phase_factor(y, xi, s, m, x, epsilon)
}

/// `e^{iT/ε}` for a complex quadratic phase centered at `y`.
pub fn beam_phase_factor<const D: usize>(
    y: &SVector<f64, D>,
    xi: &SVector<f64, D>,
    s: f64,
    m: &CMatrix<D>,
    x: &SVector<f64, D>,
    epsilon: f64,
) -> C64 {
    let d = x - y;
    let mut quad = C64::new(0.0, 0.0);
    for i in 0..D {
        for j in 0..D {
            quad += m[(i, j)] * (d[i] * d[j]);
        }
    }
    let t = C64::from(s + xi.dot(&d)) + quad * 0.5;
    let arg = t / epsilon;
    C64::from_polar((-arg.im).exp(), arg.re)
}

/// Default cut-off radius `max(3√(ε/μ), 5√ε)` for the smallest `Im M`
/// eigenvalue `μ` of the ensemble.
pub fn default_theta(epsilon: f64, mu_min: f64) -> f64 {
    let by_decay = if mu_min > 0.0 {
        3.0 * (epsilon / mu_min).sqrt()
    } else {
        f64::INFINITY
    };
    by_decay.max(5.0 * epsilon.sqrt())
}

/// A beam reduced to what summation needs.
#[derive(Clone, Debug)]
pub struct PreparedBeam<const D: usize> {
    pub y: SVector<f64, D>,
    pub xi: SVector<f64, D>,
    pub s: f64,
    pub m: CMatrix<D>,
    pub u0: Spinor,
    pub weight: f64,
    pub mu: f64,
}

pub fn prepare_beams<const D: usize>(bs: &BeamSet<D>) -> Result<Vec<PreparedBeam<D>>> {
    bs.beams
        .iter()
        .enumerate()
        .map(|(index, b)| {
            let m = hessian_of(b).map_err(|e| match e {
                Error::SingularP { branch, det, .. } => Error::SingularP {
                    index,
                    branch,
                    t: bs.t,
                    det,
                },
                Error::AsymmetricHessian { branch, asymmetry, .. } => Error::AsymmetricHessian {
                    index,
                    branch,
                    t: bs.t,
                    asymmetry,
                },
                other => other,
            })?;
            Ok(PreparedBeam {
                y: b.y,
                xi: b.xi,
                s: b.s,
                mu: min_imag_eigenvalue(&m),
                m,
                u0: b.u0,
                weight: b.weight,
            })
        })
        .collect()
}

/// Superposes every beam (both branches) onto `grid`:
/// `Φ(x) = (2πε)^{−d/2} Σ_j r_θ(x − y_j) u₀ʲ e^{iTʲ/ε} wʲ`.
///
/// `theta = None` selects [`default_theta`]. Per node, contributions are
/// accumulated in beam order, so the result does not depend on the number
/// of worker threads.
pub fn sum_beams<const D: usize>(bs: &BeamSet<D>, grid: &EvalGrid<D>, theta: Option<f64>) -> Result<Field<D>> {
    let beams = prepare_beams(bs)?;
    let mu_min = beams.iter().map(|b| b.mu).fold(f64::INFINITY, f64::min);
    let theta = theta.unwrap_or_else(|| default_theta(bs.epsilon, mu_min));
    if !(theta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "truncation radius must be positive, got {theta}"
        )));
    }
    Ok(superpose(&beams, grid, bs.epsilon, theta, bs.t))
}

/// Sum of prepared Gaussian kernels; shared by the Lagrangian and Eulerian
/// reconstructions.
pub fn superpose<const D: usize>(
    beams: &[PreparedBeam<D>],
    grid: &EvalGrid<D>,
    epsilon: f64,
    theta: f64,
    t: f64,
) -> Field<D> {
    let mut field = Field::zeros(grid.clone(), t, epsilon);
    if beams.is_empty() || grid.is_empty() {
        return field;
    }
    let prefactor = (2.0 * PI * epsilon).powf(-(D as f64) / 2.0);
    let reach = 2.0 * theta;
    let slab = grid.len() / grid.axes[0].count;
    let axes = &grid.axes;

    field.values.par_chunks_mut(slab).enumerate().for_each(|(i0, out)| {
        let x0 = axes[0].coord(i0);
        for b in beams {
            if (x0 - b.y[0]).abs() > reach {
                continue;
            }
            let mut ranges = [(0usize, 0usize); D];
            ranges[0] = (i0, i0);
            let mut inside = true;
            for k in 1..D {
                match axes[k].index_range(b.y[k], reach) {
                    Some(r) => ranges[k] = r,
                    None => {
                        inside = false;
                        break;
                    }
                }
            }
            if !inside {
                continue;
            }
            let scale = prefactor * b.weight;
            let mut idx: [usize; D] = ranges.map(|r| r.0);
            'points: loop {
                let x = SVector::<f64, D>::from_fn(|k, _| axes[k].coord(idx[k]));
                let cut = truncation_r(&(x - b.y), theta);
                if cut > 0.0 {
                    let phase = beam_phase_factor(&b.y, &b.xi, b.s, &b.m, &x, epsilon);
                    let local = idx[1..]
                        .iter()
                        .zip(&axes[1..])
                        .fold(0, |acc, (&i, a)| acc * a.count + i);
                    out[local] += b.u0 * (phase * (cut * scale));
                }
                // odometer over axes 1..D
                let mut k = D - 1;
                loop {
                    if k == 0 {
                        break 'points;
                    }
                    if idx[k] < ranges[k].1 {
                        idx[k] += 1;
                        break;
                    }
                    idx[k] = ranges[k].0;
                    k -= 1;
                }
            }
        }
    });
    field
}
