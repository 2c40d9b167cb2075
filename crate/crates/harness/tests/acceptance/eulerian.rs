//! One-dimensional level-set checks.

use std::f64::consts::PI;

use diracgb::analysis::{convergence_rate, error_norms};
use diracgb::dirac::*;
use diracgb::eulerian::*;
use diracgb::initial::{spin_up, InitialData};
use diracgb::lagrangian::*;
use diracgb::potential::ZeroField;
use diracgb::summation::{sum_beams, EvalGrid, Field};
use nalgebra::{Matrix1, Vector1};

use crate::{ensure, Check};

/// `S_I = (1 + cos 2πy)/20` under a Gaussian envelope.
struct Compressive;

impl InitialData<1> for Compressive {
    fn phase(&self, y: &Vector1<f64>) -> f64 {
        (1.0 + (2.0 * PI * y[0]).cos()) / 20.0
    }
    fn phase_gradient(&self, y: &Vector1<f64>) -> Vector1<f64> {
        Vector1::new(-PI / 10.0 * (2.0 * PI * y[0]).sin())
    }
    fn phase_hessian(&self, y: &Vector1<f64>) -> Matrix1<f64> {
        Matrix1::new(-PI * PI / 5.0 * (2.0 * PI * y[0]).cos())
    }
    fn amplitude(&self, y: &Vector1<f64>) -> Spinor {
        spin_up() * C64::from((-y[0] * y[0] / 0.04).exp())
    }
}

fn grid(n: usize) -> Result<PhaseGrid<1>, String> {
    PhaseGrid::cube((-0.5, 0.5, n), (-0.5, 0.5, n)).map_err(|e| e.to_string())
}

fn rate(hs: &[f64], errs: &[f64]) -> Result<f64, String> {
    let pairs: Vec<_> = hs.iter().copied().zip(errs.iter().copied()).collect();
    Ok(convergence_rate(&pairs).map_err(|e| e.to_string())?.slope)
}

fn initial_hessian() -> Check {
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for n in [21, 41, 81, 161] {
        let f = init_phase_fields(&Compressive, &grid(n)?, Branch::Plus, &ZeroField, ProjectAt::Node);
        let mut worst: f64 = 0.0;
        for i in 0..f.grid.len() {
            let (y, _) = f.grid.node(i);
            let exact = C64::new(Compressive.phase_hessian(&y)[0], 1.0);
            let m = hessian_from_levelset(&f, i).map_err(|e| e.to_string())?;
            worst = worst.max((m[(0, 0)] - exact).norm());
        }
        hs.push(f.grid.y[0].spacing());
        errs.push(worst);
    }
    let p = rate(&hs, &errs)?;
    ensure(p > 1.8, format!("Hessian rate {p:.2}, errors {errs:?}"))?;
    Ok(format!("t=0 Hessian rate {p:.2}"))
}

fn free_transport() -> Check {
    let t = 0.3;
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for n in [33, 65, 129] {
        let g = grid(n)?;
        let f0 = init_phase_fields(&Compressive, &g, Branch::Plus, &ZeroField, ProjectAt::Node);
        let f = evolve_fields(&f0, t, 0.05, &ZeroField, &BeamOptions::default()).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for i in 0..g.len() {
            let (y, xi) = g.node(i);
            let lam = (xi[0] * xi[0] + 1.0).sqrt();
            let foot = y[0] - t * xi[0] / lam;
            if foot.abs() > 0.45 {
                continue;
            }
            let phi = C64::new(xi[0] - Compressive.phase_gradient(&Vector1::new(foot))[0], -foot);
            let s = Compressive.phase(&Vector1::new(foot)) + t * (xi[0] * xi[0] / lam - lam);
            worst = worst.max((f.phi[i][0] - phi).norm()).max((f.s[i] - s).abs());
        }
        hs.push(g.y[0].spacing());
        errs.push(worst);
    }
    let p = rate(&hs, &errs)?;
    ensure(p > 1.8, format!("transport rate {p:.2}, errors {errs:?}"))?;
    Ok(format!("transport rate {p:.2}"))
}

fn eulerian_field(n: usize, eps: f64, t: f64, x: &EvalGrid<1>) -> Result<Field<1>, String> {
    let g = grid(n)?;
    let dt = 0.5 * eps.sqrt();
    let mut fields = Vec::new();
    for b in Branch::BOTH {
        let f0 = init_phase_fields(&Compressive, &g, b, &ZeroField, ProjectAt::Node);
        fields.push(evolve_fields(&f0, t, dt, &ZeroField, &BeamOptions::default()).map_err(|e| e.to_string())?);
    }
    let refs: Vec<_> = fields.iter().collect();
    Ok(reconstruct(&refs, x, eps, None, None).map_err(|e| e.to_string())?.field)
}

fn against_lagrangian() -> Check {
    let (eps, t): (f64, f64) = (1.0 / 256.0, 0.3);
    let x = EvalGrid::<1>::cube(-0.3, 0.3, 121).map_err(|e| e.to_string())?;
    let mesh = BeamMesh::covering(Vector1::zeros(), 0.5, 0.25 * eps.sqrt());
    let mut bs = init_beams(&Compressive, &mesh, eps, &ZeroField, DEFAULT_DROP_THRESHOLD).map_err(|e| e.to_string())?;
    evolve(&mut bs, t, 0.5 * eps.sqrt(), &ZeroField, &BeamOptions::default()).map_err(|e| e.to_string())?;
    let lagrangian = sum_beams(&bs, &x, None).map_err(|e| e.to_string())?;
    let scale = lagrangian.max_norm();
    let mut gaps = Vec::new();
    for n in [65, 129, 257] {
        let e = error_norms(&eulerian_field(n, eps, t, &x)?, &lagrangian).map_err(|e| e.to_string())?;
        gaps.push(e.linf / scale);
    }
    ensure(gaps[2] <= 0.05, format!("finest gap {:.3}", gaps[2]))?;
    ensure(
        gaps[0] > gaps[1] && gaps[1] > gaps[2],
        format!("gaps not decreasing {gaps:.3?}"),
    )?;
    Ok(format!("Eulerian/Lagrangian gaps {gaps:.4?}"))
}

pub fn run() -> Check {
    let mut notes = Vec::new();
    for part in [initial_hessian, free_transport, against_lagrangian] {
        notes.push(part()?);
    }
    Ok(notes.join("; "))
}
