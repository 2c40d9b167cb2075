//! Algebraic and spectral identities.

use diracgb::dirac::*;
use diracgb::initial::CosinePhasePacket;
use diracgb::potential::{Harmonic, PolynomialField, PotentialModel, Quadratic, ZeroField};
use diracgb::spectral::*;
use nalgebra::linalg::SymmetricEigen;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::{ensure, rng, Check};

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn vec3(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..scale))
}

fn quadratic(rng: &mut impl Rng, scale: f64) -> Quadratic {
    let q = Matrix3::from_fn(|_, _| rng.random_range(-scale..scale));
    Quadratic::new(rng.random_range(-scale..scale), vec3(rng, scale), q)
}

pub fn random_field(rng: &mut impl Rng, scale: f64, magnetic: bool) -> PolynomialField {
    let mut a = || {
        if magnetic {
            quadratic(rng, scale)
        } else {
            Quadratic::zero()
        }
    };
    let magnetic = [a(), a(), a()];
    PolynomialField {
        electric: quadratic(rng, scale),
        magnetic,
    }
}

/// `(x₁, x₂)`-only field for reduced 2D runs.
pub fn planar_field(rng: &mut impl Rng, scale: f64) -> PolynomialField {
    let mut f = random_field(rng, scale, true);
    for q in std::iter::once(&mut f.electric).chain(f.magnetic.iter_mut()) {
        q.b[2] = 0.0;
        for i in 0..3 {
            q.q[(2, i)] = 0.0;
            q.q[(i, 2)] = 0.0;
        }
    }
    f
}

fn algebra() -> Check {
    let m = dirac_matrices();
    let id = Matrix4C::identity();
    for j in 0..3 {
        for k in 0..3 {
            let ac = m.alpha[j] * m.alpha[k] + m.alpha[k] * m.alpha[j];
            let expect = if j == k { id * c(2.0) } else { Matrix4C::zeros() };
            ensure(ac == expect, format!("alpha_{j} alpha_{k} anticommutator"))?;
        }
        ensure(
            m.alpha[j] * m.beta + m.beta * m.alpha[j] == Matrix4C::zeros(),
            "alpha beta anticommutator",
        )?;
    }
    ensure(m.beta * m.beta == id, "beta squared")?;
    Ok("anticommutators exact".into())
}

fn projectors() -> Check {
    let mut rng = rng(7);
    let id = Matrix4C::identity();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let pot = random_field(&mut rng, 1.0, true);
        let p = PhasePoint::new(vec3(&mut rng, 2.0), vec3(&mut rng, 3.0));
        let plus = projector(Branch::Plus, &p, &pot);
        let minus = projector(Branch::Minus, &p, &pot);
        for e in [
            plus * plus - plus,
            minus * minus - minus,
            plus * minus,
            minus * plus,
            plus + minus - id,
        ] {
            worst = worst.max(e.norm());
        }
    }
    ensure(worst < 1e-13, format!("projector defect {worst:.2e}"))?;
    Ok(format!("projector defect {worst:.1e}"))
}

fn shift(p: &PhasePoint<3>, in_xi: bool, k: usize, h: f64) -> PhasePoint<3> {
    let mut q = *p;
    if in_xi {
        q.xi[k] += h;
    } else {
        q.x[k] += h;
    }
    q
}

fn derivatives() -> Check {
    let mut rng = rng(11);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut rel = |fd: f64, exact: f64| worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    for _ in 0..300 {
        let pot = random_field(&mut rng, 0.8, true);
        let p = PhasePoint::new(vec3(&mut rng, 1.0), vec3(&mut rng, 2.0));
        for b in Branch::BOTH {
            let hd = h_derivatives(b, &p, &pot);
            let grad = |q: &PhasePoint<3>, in_xi: bool| {
                let d = h_derivatives(b, q, &pot);
                if in_xi {
                    d.grad_xi
                } else {
                    d.grad_y
                }
            };
            for k in 0..3 {
                for (in_xi, exact) in [(false, hd.grad_y[k]), (true, hd.grad_xi[k])] {
                    let fd = (eigenvalue_h(b, &shift(&p, in_xi, k, h), &pot)
                        - eigenvalue_h(b, &shift(&p, in_xi, k, -h), &pot))
                        / (2.0 * h);
                    rel(fd, exact);
                }
                let dy = (grad(&shift(&p, false, k, h), false) - grad(&shift(&p, false, k, -h), false)) / (2.0 * h);
                let dxi = (grad(&shift(&p, true, k, h), true) - grad(&shift(&p, true, k, -h), true)) / (2.0 * h);
                let dxi_y = (grad(&shift(&p, false, k, h), true) - grad(&shift(&p, false, k, -h), true)) / (2.0 * h);
                for i in 0..3 {
                    rel(dy[i], hd.yy[(i, k)]);
                    rel(dxi[i], hd.xi_xi[(i, k)]);
                    rel(dxi_y[i], hd.y_xi[(k, i)]);
                }
            }
        }
    }
    ensure(worst < 1e-6, format!("h derivative error {worst:.2e}"))?;
    Ok(format!("h derivatives rel {worst:.1e}"))
}

fn transport() -> Check {
    let mut rng = rng(5);
    let m = dirac_matrices();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let pot = random_field(&mut rng, 1.0, false);
        let p = PhasePoint::new(vec3(&mut rng, 2.0), vec3(&mut rng, 3.0));
        let grad_v = pot.sample(&p.x).grad_v;
        let lam = (p.xi.norm_squared() + 1.0).sqrt();
        let mut expect = Matrix4C::identity() * c(p.xi.dot(&grad_v) / (2.0 * lam * lam));
        for k in 0..3 {
            expect -= m.alpha[k] * c(grad_v[k] / (2.0 * lam));
        }
        for b in Branch::BOTH {
            worst = worst.max((transport_matrix(b, &p, &pot, TransportForm::Printed) - expect).norm());
        }
    }
    ensure(worst < 1e-12, format!("transport reduction {worst:.2e}"))?;
    Ok(format!("A=0 transport {worst:.1e}"))
}

fn expm_hermitian(h: &Matrix4C, tau: f64) -> Matrix4C {
    let eig = SymmetricEigen::new(*h);
    let q = eig.eigenvectors;
    q * Matrix4C::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, -l * tau))) * q.adjoint()
}

fn multipliers() -> Check {
    let mut rng = rng(21);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let xi = vec3(&mut rng, 2.0);
        let tau = rng.random_range(-20.0..20.0);
        let kinetic = alpha_dot(&xi) + beta();
        worst = worst.max((kinetic_multiplier(&xi, tau) - expm_hermitian(&kinetic, tau)).norm());
        let v = rng.random_range(-1.0..1.0);
        let a = vec3(&mut rng, 1.0);
        let hv = Matrix4C::identity() * c(v) - alpha_dot(&a);
        worst = worst.max((potential_multiplier(v, &a, tau) - expm_hermitian(&hv, tau)).norm());
    }
    ensure(worst < 1e-12, format!("multiplier error {worst:.2e}"))?;
    Ok(format!("multipliers {worst:.1e}"))
}

fn mass_and_free_steps() -> Check {
    let eps = 1.0 / 64.0;
    let grid = UniformGrid::<2>::cube(-0.5, 0.5, 64).map_err(|e| e.to_string())?;
    let init = SpinorGridField::from_initial(&CosinePhasePacket::default(), grid, eps);
    let m0 = init.mass();
    let mut rng = rng(4);
    let pots: [Box<dyn PotentialModel>; 2] = [
        Box::new(Harmonic {
            omega: 2.0,
            ..Default::default()
        }),
        Box::new(planar_field(&mut rng, 1.0)),
    ];
    let mut drift: f64 = 0.0;
    for pot in &pots {
        let out = strang_solve(&init, 0.3, 0.01, pot.as_ref()).map_err(|e| e.to_string())?;
        drift = drift.max((out.mass() - m0).abs() / m0);
    }
    ensure(drift < 1e-12, format!("mass drift {drift:.2e}"))?;
    let one = strang_solve(&init, 0.4, 0.4, &ZeroField).map_err(|e| e.to_string())?;
    let many = strang_solve(&init, 0.4, 0.013, &ZeroField).map_err(|e| e.to_string())?;
    let gap = one
        .values
        .iter()
        .zip(&many.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ensure(gap < 1e-10, format!("free step dependence {gap:.2e}"))?;
    Ok(format!("mass {drift:.1e}, free dt gap {gap:.1e}"))
}

pub fn run() -> Check {
    let start = std::time::Instant::now();
    let parts = [
        algebra(),
        projectors(),
        derivatives(),
        transport(),
        multipliers(),
        mass_and_free_steps(),
    ];
    let mut notes = Vec::new();
    for p in parts {
        notes.push(p?);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    notes.push(format!("{secs:.1} s"));
    Ok(notes.join("; "))
}
