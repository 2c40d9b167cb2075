//! Beam ODE invariants.

use diracgb::dirac::*;
use diracgb::initial::{CosinePhasePacket, GaussianPacket, InitialData};
use diracgb::lagrangian::*;
use diracgb::potential::{Harmonic, PotentialModel, ZeroField};
use nalgebra::{Matrix3, SMatrix, SVector, Vector2, Vector3};

use crate::{ensure, Check};

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn beams<const D: usize>(
    data: &dyn InitialData<D>,
    half: f64,
    dy: f64,
    eps: f64,
    pot: &dyn PotentialModel,
) -> BeamSet<D> {
    init_beams(
        data,
        &BeamMesh::covering(SVector::zeros(), half, dy),
        eps,
        pot,
        DEFAULT_DROP_THRESHOLD,
    )
    .expect("beam initialization")
}

/// Evolves in slices of 0.1 up to `t_end`, calling `check` after each.
fn sweep<const D: usize>(
    bs: &mut BeamSet<D>,
    t_end: f64,
    dt: f64,
    pot: &dyn PotentialModel,
    opts: &BeamOptions,
    mut check: impl FnMut(&BeamSet<D>),
) -> Result<(), String> {
    check(bs);
    while bs.t < t_end - 1e-12 {
        let t = (bs.t + 0.1).min(t_end);
        evolve(bs, t, dt, pot, opts).map_err(|e| e.to_string())?;
        check(bs);
    }
    Ok(())
}

fn symplectic_defect<const D: usize>(mut bs: BeamSet<D>, pot: &dyn PotentialModel) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    sweep(&mut bs, 1.0, 0.02, pot, &BeamOptions::default(), |s| {
        for b in &s.beams {
            worst = worst.max(b.symplectic_defect().norm());
        }
    })?;
    Ok(worst)
}

fn symplectic() -> Check {
    let harmonic = Harmonic::default();
    let worst = [
        symplectic_defect(
            beams(&GaussianPacket::<3>::example1(), 0.2, 0.1, 0.01, &ZeroField),
            &ZeroField,
        )?,
        symplectic_defect(
            beams(&CosinePhasePacket::default(), 0.3, 0.05, 0.01, &ZeroField),
            &ZeroField,
        )?,
        symplectic_defect(
            beams(&GaussianPacket::<3>::example3(), 0.2, 0.1, 0.01, &harmonic),
            &harmonic,
        )?,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    ensure(worst < 1e-8, format!("symplectic defect {worst:.2e}"))?;
    Ok(format!("symplectic {worst:.1e}"))
}

fn caustic_positivity() -> Check {
    let mut smallest = f64::INFINITY;
    let mut count = 0;
    for eps in [1.0 / 512.0, 1.0_f64 / 1024.0] {
        let dy = 0.5 * eps.sqrt();
        let mut bs = beams(&CosinePhasePacket::default(), 0.5, dy, eps, &ZeroField);
        count += bs.len();
        for t in [0.1, 0.2, 0.3, 0.38, 0.45, 0.5, 0.53, 0.56] {
            evolve(&mut bs, t, dy, &ZeroField, &BeamOptions::default()).map_err(|e| e.to_string())?;
            for b in &bs.beams {
                let m = hessian_of(b).map_err(|e| e.to_string())?;
                smallest = smallest.min(min_imag_eigenvalue(&m));
            }
        }
    }
    ensure(smallest > 0.0, format!("Im M eigenvalue {smallest:.2e}"))?;
    Ok(format!("min eig Im M {smallest:.2e} over {count} beams"))
}

/// Direct RK4 of `(y, ξ, M)` under `dM/dt = −H_yy − H_yξ M − M H_ξy − M H_ξξ M`.
fn riccati_rhs<const D: usize>(
    b: Branch,
    y: &SVector<f64, D>,
    xi: &SVector<f64, D>,
    m: &SMatrix<C64, D, D>,
    pot: &dyn PotentialModel,
) -> (SVector<f64, D>, SVector<f64, D>, SMatrix<C64, D, D>) {
    let hd = h_derivatives(b, &PhasePoint::new(*y, *xi), pot);
    let cm = |a: SMatrix<f64, D, D>| a.map(c);
    let dm = -cm(hd.yy) - cm(hd.y_xi) * m - m * cm(hd.xi_y()) - m * cm(hd.xi_xi) * m;
    (hd.grad_xi, -hd.grad_y, dm)
}

fn beam_at<const D: usize>(
    data: &dyn InitialData<D>,
    y0: SVector<f64, D>,
    b: Branch,
    pot: &dyn PotentialModel,
) -> BeamState<D> {
    let xi = data.phase_gradient(&y0);
    BeamState {
        y: y0,
        xi,
        s: data.phase(&y0),
        p: SMatrix::identity(),
        r: data.phase_hessian(&y0).map(c) + SMatrix::identity() * C64::i(),
        u0: projector(b, &PhasePoint::new(y0, xi), pot) * data.amplitude(&y0),
        branch: b,
        y0,
        weight: 1.0,
    }
}

fn riccati_gap<const D: usize>(beam: BeamState<D>, pot: &dyn PotentialModel) -> Result<f64, String> {
    let dt = 1e-3;
    let (mut y, mut xi) = (beam.y, beam.xi);
    let mut m = beam.r * beam.p.try_inverse().ok_or("singular P")?;
    let b = beam.branch;
    let mut bs = BeamSet {
        beams: vec![beam],
        epsilon: 0.01,
        t: 0.0,
    };
    let mut worst: f64 = 0.0;
    for k in 1..=10 {
        evolve(&mut bs, k as f64 * 0.1, dt, pot, &BeamOptions::default()).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let h = c(dt);
            let (y1, x1, m1) = riccati_rhs(b, &y, &xi, &m, pot);
            let (y2, x2, m2) = riccati_rhs(
                b,
                &(y + y1 * (dt / 2.0)),
                &(xi + x1 * (dt / 2.0)),
                &(m + m1 * h / c(2.0)),
                pot,
            );
            let (y3, x3, m3) = riccati_rhs(
                b,
                &(y + y2 * (dt / 2.0)),
                &(xi + x2 * (dt / 2.0)),
                &(m + m2 * h / c(2.0)),
                pot,
            );
            let (y4, x4, m4) = riccati_rhs(b, &(y + y3 * dt), &(xi + x3 * dt), &(m + m3 * h), pot);
            y += (y1 + y2 * 2.0 + y3 * 2.0 + y4) * (dt / 6.0);
            xi += (x1 + x2 * 2.0 + x3 * 2.0 + x4) * (dt / 6.0);
            m += (m1 + m2 * c(2.0) + m3 * c(2.0) + m4) * c(dt / 6.0);
        }
        let got = hessian_of(&bs.beams[0]).map_err(|e| e.to_string())?;
        worst = worst.max((got - m).norm());
    }
    Ok(worst)
}

fn moving_packet3() -> GaussianPacket<3> {
    let mut p = GaussianPacket::<3>::example3();
    p.momentum = Vector3::new(0.5, -0.2, 0.3);
    p.chirp = Matrix3::new(-0.4, 0.1, 0.0, 0.1, 0.3, 0.0, 0.0, 0.0, -0.2);
    p
}

fn riccati() -> Check {
    let harmonic = Harmonic::default();
    let mut worst: f64 = 0.0;
    for b in Branch::BOTH {
        worst = worst.max(riccati_gap(
            beam_at(&moving_packet3(), Vector3::new(0.1, 0.05, -0.1), b, &harmonic),
            &harmonic,
        )?);
        worst = worst.max(riccati_gap(
            beam_at(&CosinePhasePacket::default(), Vector2::new(0.2, -0.1), b, &ZeroField),
            &ZeroField,
        )?);
    }
    ensure(worst < 1e-8, format!("Riccati gap {worst:.2e}"))?;
    Ok(format!("Riccati {worst:.1e}"))
}

fn max_leak<const D: usize>(mut bs: BeamSet<D>, pot: &dyn PotentialModel) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    sweep(&mut bs, 1.0, 0.02, pot, &BeamOptions::default(), |s| {
        for b in &s.beams {
            worst = worst.max(b.projector_leak(pot));
        }
    })?;
    Ok(worst)
}

fn projector_preservation() -> Check {
    let harmonic = Harmonic::default();
    let mut ex3 = beams(&moving_packet3(), 0.2, 0.1, 0.01, &harmonic);
    ex3.beams.retain(|b| b.branch == Branch::Plus);
    let ex2 = beams(&CosinePhasePacket::default(), 0.3, 0.05, 0.01, &ZeroField);
    ensure(ex2.count(Branch::Minus) > 0, "no minus beams in the cosine-phase data")?;
    let worst = [
        max_leak(
            beams(&GaussianPacket::<3>::example1(), 0.2, 0.1, 0.01, &ZeroField),
            &ZeroField,
        )?,
        max_leak(ex2, &ZeroField)?,
        max_leak(ex3, &harmonic)?,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    ensure(worst <= 1e-6, format!("projector leak {worst:.2e}"))?;
    Ok(format!("leak {worst:.1e}"))
}

fn energy_drift(dt: f64) -> Result<f64, String> {
    let harmonic = Harmonic::default();
    let mut packet = GaussianPacket::<3>::example3();
    packet.momentum = Vector3::new(0.8, 0.0, -0.4);
    let beam = beam_at(&packet, Vector3::new(0.3, 0.0, 0.1), Branch::Plus, &harmonic);
    let h0 = beam.energy(&harmonic);
    let mut bs = BeamSet {
        beams: vec![beam],
        epsilon: 0.01,
        t: 0.0,
    };
    let mut worst: f64 = 0.0;
    sweep(&mut bs, 2.0, dt, &harmonic, &BeamOptions::default(), |s| {
        worst = worst.max((s.beams[0].energy(&harmonic) - h0).abs());
    })?;
    Ok(worst)
}

fn drift_order() -> Check {
    let ratio = energy_drift(0.05)? / energy_drift(0.025)?;
    ensure((11.0..=22.0).contains(&ratio), format!("drift ratio {ratio:.1}"))?;
    Ok(format!("drift ratio {ratio:.1}"))
}

pub fn run() -> Check {
    let mut notes = Vec::new();
    for part in [
        symplectic,
        caustic_positivity,
        riccati,
        projector_preservation,
        drift_order,
    ] {
        notes.push(part()?);
    }
    Ok(notes.join("; "))
}
