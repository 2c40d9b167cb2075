//! The experiment pipeline: initialize, evolve to each output time,
//! reconstruct, compare, and write `errors.csv`, `rates.csv`,
//! `trajectory.csv`, snapshots and `run.meta` into the output directory.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use diracgb::analysis::{convergence_rate, error_norms, exact_example1, ErrorReport, RateFit};
use diracgb::dirac::{eigenvalue_h, Branch, PhasePoint};
use diracgb::eulerian::{evolve_fields, init_phase_fields, reconstruct, PhaseGrid, PhaseSpaceFields, ProjectAt};
use diracgb::initial::{CosinePhasePacket, GaussianPacket, InitialData};
use diracgb::io::{write_beams, write_field};
use diracgb::lagrangian::{evolve, init_beams, BeamMesh, BeamOptions, BeamSet, BeamState};
use diracgb::potential::{potential_by_name, PotentialModel, PotentialParams, Quadratic};
use diracgb::spectral::{strang_solve, SpinorGridField, UniformGrid};
use diracgb::summation::{sum_beams, EvalGrid, Field, GridAxis};
use nalgebra::{Matrix3, SVector, Vector3};

use crate::config::{format_epsilon, Compare, Example, ExperimentConfig, Method, Named, QuadraticSpec};
use crate::error::{HarnessError, Result};

const GIB: f64 = (1u64 << 30) as f64;

/// One line of `errors.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub linf_rel: Option<f64>,
    pub variant: String,
    pub method: String,
    pub example: String,
    pub t: f64,
}

pub const ERRORS_HEADER: &str = "epsilon,l1,l2,linf,linf_rel,variant,method,example,t";

impl ErrorRow {
    /// The three variants of a report: `mean` (node-averaged l¹/l²),
    /// `sum` (raw sums), both with `l∞` relative to the approximation, and
    /// `mean-refnorm` with `l∞` relative to the reference.
    pub fn from_report(r: &ErrorReport, method: Method, example: Example, t: f64) -> Vec<ErrorRow> {
        let row = |l1, l2, rel, variant: &str| ErrorRow {
            epsilon: r.epsilon,
            l1,
            l2,
            linf: r.linf,
            linf_rel: rel,
            variant: variant.into(),
            method: method.name().into(),
            example: example.name().into(),
            t,
        };
        vec![
            row(r.l1, r.l2, r.linf_rel_a, "mean"),
            row(r.l1_sum, r.l2_sum, r.linf_rel_a, "sum"),
            row(r.l1, r.l2, r.linf_rel, "mean-refnorm"),
        ]
    }

    pub fn to_csv(&self) -> String {
        let rel = self.linf_rel.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epsilon, self.l1, self.l2, self.linf, rel, self.variant, self.method, self.example, self.t
        )
    }

    pub fn parse(line: usize, s: &str) -> Result<ErrorRow> {
        let f: Vec<&str> = s.split(',').map(str::trim).collect();
        let key = format!("line {line}");
        if f.len() != 9 {
            return Err(HarnessError::config(
                &key,
                format!("expected 9 columns, got {}", f.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| HarnessError::config(&key, format!("'{}' is not a number", f[i])))
        };
        Ok(ErrorRow {
            epsilon: num(0)?,
            l1: num(1)?,
            l2: num(2)?,
            linf: num(3)?,
            linf_rel: if f[4].is_empty() { None } else { Some(num(4)?) },
            variant: f[5].into(),
            method: f[6].into(),
            example: f[7].into(),
            t: num(8)?,
        })
    }
}

pub fn read_errors(text: &str) -> Result<Vec<ErrorRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && l.trim() != ERRORS_HEADER)
        .map(|(n, l)| ErrorRow::parse(n + 1, l))
        .collect()
}

/// A fitted rate for one `(method, example, t, variant, norm)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub method: String,
    pub example: String,
    pub t: f64,
    pub variant: String,
    pub norm: &'static str,
    pub fit: RateFit,
}

pub const RATES_HEADER: &str = "method,example,t,variant,norm,rate,intercept,residual,points";

impl RateRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.method,
            self.example,
            self.t,
            self.variant,
            self.norm,
            self.fit.slope,
            self.fit.intercept,
            self.fit.residual,
            self.fit.pairs.len()
        )
    }
}

/// Rates over `ε` for every group holding at least two distinct `ε`.
pub fn fit_rates(rows: &[ErrorRow]) -> Vec<RateRow> {
    let mut groups: Vec<(&str, &str, f64, &str)> = Vec::new();
    for r in rows {
        let g = (r.method.as_str(), r.example.as_str(), r.t, r.variant.as_str());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    type Norm = (&'static str, fn(&ErrorRow) -> Option<f64>);
    let norms: [Norm; 4] = [
        ("l1", |r| Some(r.l1)),
        ("l2", |r| Some(r.l2)),
        ("linf", |r| Some(r.linf)),
        ("linf_rel", |r| r.linf_rel),
    ];
    let mut out = Vec::new();
    for (method, example, t, variant) in groups {
        let members: Vec<&ErrorRow> = rows
            .iter()
            .filter(|r| r.method == method && r.example == example && r.t == t && r.variant == variant)
            .collect();
        for (norm, get) in norms {
            let pairs: Option<Vec<(f64, f64)>> = members.iter().map(|r| get(r).map(|v| (r.epsilon, v))).collect();
            if let Some(fit) = pairs.and_then(|p| convergence_rate(&p).ok()) {
                out.push(RateRow {
                    method: method.into(),
                    example: example.into(),
                    t,
                    variant: variant.into(),
                    norm,
                    fit,
                });
            }
        }
    }
    out
}

/// Position of a tracked beam at an output time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub epsilon: f64,
    pub t: f64,
    pub branch: Branch,
    pub y0: Vec<f64>,
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub h: f64,
}

/// Everything computed for one `ε`.
#[derive(Clone, Debug, Default)]
pub struct EpsilonRun {
    pub epsilon: f64,
    /// Beams after the drop threshold, or level-set support nodes at the
    /// final time.
    pub beams: usize,
    pub comparisons: Vec<(f64, ErrorReport)>,
    pub trajectory: Vec<TrajectoryRow>,
    /// Largest pre-allocation memory estimate, bytes.
    pub estimated_bytes: f64,
    /// Largest `|h(t) − h(0)|` over all beams and output times.
    pub energy_drift: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub runs: Vec<EpsilonRun>,
    pub errors: Vec<ErrorRow>,
    pub rates: Vec<RateRow>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| HarnessError::config("output.threads", e.to_string()))?;
        pool.install(|| run_all(cfg))
    } else {
        run_all(cfg)
    }
}

fn run_all(cfg: &ExperimentConfig) -> Result<RunSummary> {
    fs::create_dir_all(&cfg.out).map_err(|e| HarnessError::io(&cfg.out, e))?;
    let mut summary = RunSummary::default();
    for &eps in &cfg.epsilons {
        log::info!(
            "{} {} epsilon={}",
            cfg.example.name(),
            cfg.method.name(),
            format_epsilon(eps)
        );
        let run = run_epsilon(cfg, eps)?;
        for (t, r) in &run.comparisons {
            summary
                .errors
                .extend(ErrorRow::from_report(r, cfg.method, cfg.example, *t));
        }
        summary.runs.push(run);
    }
    summary.rates = fit_rates(&summary.errors);
    write_outputs(cfg, &summary)?;
    Ok(summary)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn write_outputs(cfg: &ExperimentConfig, s: &RunSummary) -> Result<()> {
    let mut errors = format!("{ERRORS_HEADER}\n");
    for r in &s.errors {
        errors.push_str(&r.to_csv());
        errors.push('\n');
    }
    write_text(&cfg.out.join("errors.csv"), &errors)?;

    let mut rates = format!("{RATES_HEADER}\n");
    for r in &s.rates {
        rates.push_str(&r.to_csv());
        rates.push('\n');
    }
    write_text(&cfg.out.join("rates.csv"), &rates)?;

    let rows: Vec<&TrajectoryRow> = s.runs.iter().flat_map(|r| &r.trajectory).collect();
    if let Some(first) = rows.first() {
        let d = first.y.len();
        let axis = |p: &str| (1..=d).map(|k| format!("{p}{k}")).collect::<Vec<_>>().join(",");
        let mut text = format!("epsilon,t,branch,{},{},{},h\n", axis("y0_"), axis("y"), axis("xi"));
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        for r in rows {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{}",
                r.epsilon,
                r.t,
                r.branch.symbol(),
                join(&r.y0),
                join(&r.y),
                join(&r.xi),
                r.h
            );
        }
        write_text(&cfg.out.join("trajectory.csv"), &text)?;
    }

    let mut meta = crate::config::serialize(cfg);
    meta.push('\n');
    for r in &s.runs {
        let _ = writeln!(
            meta,
            "# epsilon={} beams={} estimated_gib={:.4} energy_drift={:.3e}",
            format_epsilon(r.epsilon),
            r.beams,
            r.estimated_bytes / GIB,
            r.energy_drift
        );
    }
    write_text(&cfg.out.join("run.meta"), &meta)
}

fn guard(cfg: &ExperimentConfig, what: &str, bytes: f64) -> Result<f64> {
    let cap = cfg.memory_cap_gib * GIB;
    if bytes > cap {
        return Err(HarnessError::Memory {
            what: what.into(),
            needed_gib: bytes / GIB,
            cap_gib: cfg.memory_cap_gib,
        });
    }
    Ok(bytes)
}

fn quadratic(q: &QuadraticSpec) -> Quadratic {
    Quadratic::new(q.c, Vector3::from(q.b), Matrix3::from_row_slice(&q.q))
}

pub fn build_potential(cfg: &ExperimentConfig) -> Result<Box<dyn PotentialModel>> {
    let params = PotentialParams {
        omega: Some(cfg.omega),
        center: Some(Vector3::from(cfg.potential_center)),
        electric: Some(quadratic(&cfg.electric)),
        magnetic: Some([
            quadratic(&cfg.magnetic[0]),
            quadratic(&cfg.magnetic[1]),
            quadratic(&cfg.magnetic[2]),
        ]),
    };
    potential_by_name(&cfg.potential, &params).map_err(|e| HarnessError::config("potential.name", e.to_string()))
}

fn packet<const D: usize>(cfg: &ExperimentConfig) -> GaussianPacket<D> {
    let mut p = GaussianPacket::<D>::at_rest(SVector::from_iterator(cfg.center.iter().copied()));
    p.momentum = SVector::from_iterator(cfg.momentum.iter().copied());
    p.width = cfg.width;
    p
}

fn run_epsilon(cfg: &ExperimentConfig, eps: f64) -> Result<EpsilonRun> {
    let pot = build_potential(cfg)?;
    match (cfg.example, cfg.dimension) {
        (Example::Example2, 2) => run_dim::<2>(cfg, eps, &CosinePhasePacket::default(), &*pot),
        (_, 1) => run_dim::<1>(cfg, eps, &packet::<1>(cfg), &*pot),
        (_, 2) => run_dim::<2>(cfg, eps, &packet::<2>(cfg), &*pot),
        (_, 3) => run_dim::<3>(cfg, eps, &packet::<3>(cfg), &*pot),
        (_, d) => Err(HarnessError::config(
            "experiment.dimension",
            format!("unsupported dimension {d}"),
        )),
    }
}

enum State<const D: usize> {
    Beams(BeamSet<D>),
    Levels(Vec<PhaseSpaceFields<D>>),
    Grid(SpinorGridField<D>),
}

fn eval_grid<const D: usize>(cfg: &ExperimentConfig) -> Result<EvalGrid<D>> {
    let hw = cfg.half_width;
    let mut axes = [GridAxis::new(-hw, hw, cfg.eval_points); D];
    if D == 3 && cfg.slice {
        axes[2] = GridAxis::fixed(0.0);
    }
    Ok(EvalGrid::new(axes)?)
}

/// Advances a spectral field to `t`: one step when the field is free,
/// otherwise steps of `reference_dt` (default `ε/4`).
fn advance_spectral<const D: usize>(
    f: &SpinorGridField<D>,
    t: f64,
    cfg: &ExperimentConfig,
    pot: &dyn PotentialModel,
) -> Result<SpinorGridField<D>> {
    if t <= f.t {
        return Ok(f.clone());
    }
    let dt = match cfg.reference_dt.value() {
        Some(dt) => dt,
        None if pot.is_free() => t - f.t,
        None => f.epsilon / 4.0,
    };
    Ok(strang_solve(f, t, dt, pot)?)
}

fn nearest<const D: usize>(bs: &BeamSet<D>, b: Branch, c: &SVector<f64, D>) -> Option<usize> {
    bs.beams
        .iter()
        .enumerate()
        .filter(|(_, s)| s.branch == b)
        .min_by(|x, y| (x.1.y0 - c).norm().total_cmp(&(y.1.y0 - c).norm()))
        .map(|(i, _)| i)
}

fn trajectory_row<const D: usize>(eps: f64, t: f64, s: &BeamState<D>, pot: &dyn PotentialModel) -> TrajectoryRow {
    TrajectoryRow {
        epsilon: eps,
        t,
        branch: s.branch,
        y0: s.y0.iter().copied().collect(),
        y: s.y.iter().copied().collect(),
        xi: s.xi.iter().copied().collect(),
        h: eigenvalue_h(s.branch, &PhasePoint::new(s.y, s.xi), pot),
    }
}

fn snapshot_name(kind: &str, eps: f64, t: f64) -> String {
    format!("{kind}_eps{}_t{t}.csv", format_epsilon(eps).replace('/', "_"))
}

fn write_snapshot(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> diracgb::error::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn run_dim<const D: usize>(
    cfg: &ExperimentConfig,
    eps: f64,
    data: &dyn InitialData<D>,
    pot: &dyn PotentialModel,
) -> Result<EpsilonRun> {
    let center: SVector<f64, D> = SVector::from_iterator(cfg.center.iter().copied());
    let opts = BeamOptions {
        divergence: cfg.divergence,
        transport: cfg.transport,
    };
    let dt = cfg.dt_factor * eps.sqrt();
    let mut run = EpsilonRun {
        epsilon: eps,
        ..Default::default()
    };
    let need_reference = cfg.compare == Compare::Spectral || cfg.method == Method::Spectral;
    let periodic = if need_reference {
        let g = UniformGrid::<D>::cube(-cfg.half_width, cfg.half_width, cfg.reference_points)?;
        run.estimated_bytes = guard(cfg, "spectral grid", g.estimated_bytes() as f64)?;
        Some(g)
    } else {
        None
    };

    let mut state = match cfg.method {
        Method::Lagrangian => {
            let mesh = BeamMesh::covering(center, cfg.beam_half_width, cfg.dy_factor * eps.sqrt());
            let bytes = mesh.len() as f64 * std::mem::size_of::<BeamState<D>>() as f64;
            run.estimated_bytes = run.estimated_bytes.max(guard(cfg, "beam mesh", bytes)?);
            let bs = init_beams(data, &mesh, eps, pot, cfg.drop_threshold)?;
            run.beams = bs.len();
            State::Beams(bs)
        }
        Method::Eulerian => {
            let axes = |lo: &dyn Fn(usize) -> f64, w: f64| {
                std::array::from_fn(|k| GridAxis::new(lo(k) - w, lo(k) + w, cfg.phase_points))
            };
            let grid = PhaseGrid::<D>::new(
                axes(&|k| center[k], cfg.beam_half_width),
                axes(&|_| 0.0, cfg.xi_half_width),
            )?;
            let per_node = (std::mem::size_of::<SVector<diracgb::dirac::C64, D>>() + 8 + 64) as f64;
            let bytes = grid.len() as f64 * per_node * 4.0;
            run.estimated_bytes = run.estimated_bytes.max(guard(cfg, "phase-space grid", bytes)?);
            let fields = Branch::BOTH
                .iter()
                .map(|&b| init_phase_fields(data, &grid, b, pot, ProjectAt::Node))
                .collect();
            State::Levels(fields)
        }
        Method::Spectral => State::Grid(SpinorGridField::from_initial(
            data,
            periodic.clone().expect("spectral grid"),
            eps,
        )),
    };
    let mut reference = match (cfg.compare, &periodic) {
        (Compare::Spectral, Some(g)) => Some(SpinorGridField::from_initial(data, g.clone(), eps)),
        _ => None,
    };

    let tracked: Vec<usize> = match &state {
        State::Beams(bs) => Branch::BOTH.iter().filter_map(|&b| nearest(bs, b, &center)).collect(),
        _ => vec![],
    };
    let energies: Vec<f64> = match &state {
        State::Beams(bs) => bs.beams.iter().map(|b| b.energy(pot)).collect(),
        _ => vec![],
    };
    let need_field = cfg.write_fields || cfg.compare != Compare::None;

    for t in cfg.output_times() {
        if let Some(r) = &reference {
            reference = Some(advance_spectral(r, t, cfg, pot)?);
        }
        let grid = match (&reference, &state) {
            (Some(r), _) => r.grid.subgrid(cfg.reference_stride)?,
            (None, State::Grid(f)) => f.grid.subgrid(cfg.reference_stride)?,
            _ => eval_grid::<D>(cfg)?,
        };
        let approx = match &mut state {
            State::Beams(bs) => {
                if t > bs.t {
                    evolve(bs, t, dt, pot, &opts)?;
                }
                for &i in &tracked {
                    run.trajectory.push(trajectory_row(eps, t, &bs.beams[i], pot));
                }
                for (b, h0) in bs.beams.iter().zip(&energies) {
                    run.energy_drift = run.energy_drift.max((b.energy(pot) - h0).abs());
                }
                if cfg.write_beams {
                    let path = cfg.out.join(snapshot_name("beams", eps, t));
                    write_snapshot(&path, |w| write_beams(w, bs))?;
                }
                if !need_field {
                    continue;
                }
                sum_beams(bs, &grid, cfg.theta.value())?
            }
            State::Levels(fields) => {
                for f in fields.iter_mut() {
                    if t > f.t {
                        *f = evolve_fields(f, t, dt, pot, &opts)?;
                    }
                }
                let refs: Vec<&PhaseSpaceFields<D>> = fields.iter().collect();
                let r = reconstruct(&refs, &grid, eps, cfg.theta.value(), None)?;
                run.beams = r.support_nodes;
                r.field
            }
            State::Grid(f) => {
                *f = advance_spectral(f, t, cfg, pot)?;
                f.to_field(cfg.reference_stride)?
            }
        };
        if cfg.write_fields {
            let path = cfg.out.join(snapshot_name("field", eps, t));
            write_snapshot(&path, |w| write_field(w, &approx))?;
        }
        let exact: Option<Field<D>> = match cfg.compare {
            Compare::Exact => Some(Field::from_fn(grid.clone(), t, eps, |x| {
                exact_example1(t, x, eps, cfg.width)
            })),
            Compare::Spectral => reference
                .as_ref()
                .map(|r| r.to_field(cfg.reference_stride))
                .transpose()?,
            Compare::None => None,
        };
        if let Some(exact) = exact {
            let report = error_norms(&approx, &exact)?;
            log::info!(
                "t={t} epsilon={} linf={:.4e} l1={:.4e} l2={:.4e}",
                format_epsilon(eps),
                report.linf,
                report.l1,
                report.l2
            );
            run.comparisons.push((t, report));
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_rows_round_trip() {
        let row = ErrorRow {
            epsilon: 1.0 / 256.0,
            l1: 0.1,
            l2: 0.2,
            linf: 0.5,
            linf_rel: None,
            variant: "mean".into(),
            method: "lagrangian".into(),
            example: "example1".into(),
            t: 0.5,
        };
        let text = format!("{ERRORS_HEADER}\n{}\n", row.to_csv());
        assert_eq!(read_errors(&text).unwrap(), vec![row]);
        assert!(read_errors("1,2,3\n").is_err());
    }

    #[test]
    fn rates_group_by_time_and_variant() {
        let mk = |eps: f64, t: f64| ErrorRow {
            epsilon: eps,
            l1: eps,
            l2: eps.sqrt(),
            linf: eps.powf(0.8),
            linf_rel: Some(eps),
            variant: "mean".into(),
            method: "lagrangian".into(),
            example: "example2".into(),
            t,
        };
        let rows = vec![mk(0.01, 0.38), mk(0.001, 0.38), mk(0.01, 0.56)];
        let rates = fit_rates(&rows);
        assert_eq!(rates.len(), 4);
        let linf = rates.iter().find(|r| r.norm == "linf").unwrap();
        assert!((linf.fit.slope - 0.8).abs() < 1e-12);
        assert_eq!(linf.t, 0.38);
    }
}
