//! Snapshot formats.
//!
//! CSV snapshots start with `# key=value` header lines followed by a
//! `# columns=` line and plain comma-separated rows. Floats are written in
//! shortest round-trip form, so a write/read cycle is lossless.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use nalgebra::SVector;

use crate::dirac::{Branch, Spinor, C64};
use crate::error::{Error, Result};
use crate::eulerian::{PhaseGrid, PhaseSpaceFields};
use crate::lagrangian::{BeamSet, BeamState, CMatrix};
use crate::spectral::{PeriodicAxis, SpinorGridField, UniformGrid};
use crate::summation::{EvalGrid, Field, GridAxis};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Header lines and data rows of a CSV snapshot.
struct Csv {
    header: BTreeMap<String, (usize, String)>,
    rows: Vec<(usize, Vec<f64>, Vec<String>)>,
}

impl Csv {
    fn read(reader: impl BufRead) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| parse_err(lineno, "header line without '='"))?;
                header.insert(k.trim().to_string(), (lineno, v.trim().to_string()));
                continue;
            }
            let cells: Vec<String> = trimmed.split(',').map(|c| c.trim().to_string()).collect();
            let nums = cells.iter().map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect();
            rows.push((lineno, nums, cells));
        }
        Ok(Self { header, rows })
    }

    fn get(&self, key: &str) -> Result<(usize, &str)> {
        self.header
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| parse_err(0, format!("missing header '{key}'")))
    }

    fn number(&self, key: &str) -> Result<f64> {
        let (line, v) = self.get(key)?;
        v.parse()
            .map_err(|_| parse_err(line, format!("'{key}' is not a number: {v}")))
    }

    fn integer(&self, key: &str) -> Result<usize> {
        let (line, v) = self.get(key)?;
        v.parse()
            .map_err(|_| parse_err(line, format!("'{key}' is not an integer: {v}")))
    }
}

fn parse_axes(line: usize, text: &str) -> Result<Vec<GridAxis>> {
    text.split(',')
        .map(|part| {
            let f: Vec<&str> = part.split(':').collect();
            if f.len() != 3 {
                return Err(parse_err(line, format!("axis '{part}' is not min:max:count")));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("bad number '{s}' in axis '{part}'")))
            };
            let count = f[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err(line, format!("bad count in axis '{part}'")))?;
            Ok(GridAxis::new(num(f[0])?, num(f[1])?, count))
        })
        .collect()
}

fn axes_array<const D: usize>(line: usize, axes: Vec<GridAxis>) -> Result<[GridAxis; D]> {
    let n = axes.len();
    axes.try_into()
        .map_err(|_| parse_err(line, format!("expected {D} axes, found {n}")))
}

fn describe_axes(axes: &[GridAxis]) -> String {
    axes.iter()
        .map(|a| format!("{}:{}:{}", a.min, a.max, a.count))
        .collect::<Vec<_>>()
        .join(",")
}

fn spinor_columns() -> Vec<String> {
    (1..=4).flat_map(|k| [format!("re{k}"), format!("im{k}")]).collect()
}

fn push_spinor(row: &mut Vec<String>, v: &Spinor) {
    for z in v.iter() {
        row.push(z.re.to_string());
        row.push(z.im.to_string());
    }
}

fn take_spinor(nums: &[f64]) -> Spinor {
    Spinor::from_fn(|k, _| C64::new(nums[2 * k], nums[2 * k + 1]))
}

fn write_row(w: &mut impl Write, row: &[String]) -> Result<()> {
    writeln!(w, "{}", row.join(","))?;
    Ok(())
}

fn check_row(line: usize, nums: &[f64], expect: usize) -> Result<()> {
    if nums.len() != expect {
        return Err(parse_err(
            line,
            format!("expected {expect} columns, found {}", nums.len()),
        ));
    }
    if let Some(k) = nums.iter().position(|v| v.is_nan()) {
        return Err(parse_err(line, format!("column {} is not a number", k + 1)));
    }
    Ok(())
}

/// Number of axes declared in a field snapshot, read from its header.
pub fn field_dimension(reader: impl BufRead) -> Result<usize> {
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(v) = line.trim().strip_prefix("# grid=") {
            return Ok(parse_axes(n + 1, v)?.len());
        }
        if !line.trim_start().starts_with('#') && !line.trim().is_empty() {
            break;
        }
    }
    Err(parse_err(0, "missing header 'grid'"))
}

pub fn write_field<const D: usize>(w: &mut impl Write, f: &Field<D>) -> Result<()> {
    writeln!(w, "# t={}", f.t)?;
    writeln!(w, "# epsilon={}", f.epsilon)?;
    writeln!(w, "# grid={}", f.grid.describe())?;
    let mut cols: Vec<String> = (1..=D).map(|k| format!("x{k}")).collect();
    cols.extend(spinor_columns());
    writeln!(w, "# columns={}", cols.join(","))?;
    for (i, v) in f.values.iter().enumerate() {
        let x = f.grid.node(i);
        let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        push_spinor(&mut row, v);
        write_row(w, &row)?;
    }
    Ok(())
}

pub fn read_field<const D: usize>(reader: impl BufRead) -> Result<Field<D>> {
    let csv = Csv::read(reader)?;
    let (gl, gtext) = csv.get("grid")?;
    let grid = EvalGrid::new(axes_array::<D>(gl, parse_axes(gl, gtext)?)?)?;
    if csv.rows.len() != grid.len() {
        return Err(parse_err(
            csv.rows.last().map_or(gl, |r| r.0),
            format!("grid has {} nodes but {} rows were read", grid.len(), csv.rows.len()),
        ));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (i, (line, nums, _)) in csv.rows.iter().enumerate() {
        check_row(*line, nums, D + 8)?;
        let x = grid.node(i);
        let scale = x.norm().max(1.0);
        if (0..D).any(|k| (nums[k] - x[k]).abs() > 1e-9 * scale) {
            return Err(parse_err(*line, "node coordinates do not match the grid header"));
        }
        values.push(take_spinor(&nums[D..]));
    }
    Ok(Field {
        grid,
        values,
        t: csv.number("t")?,
        epsilon: csv.number("epsilon")?,
    })
}

fn matrix_columns<const D: usize>(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..=D {
        for j in 1..=D {
            out.push(format!("{name}{i}{j}_re"));
            out.push(format!("{name}{i}{j}_im"));
        }
    }
    out
}

/// Beam snapshot: one row per beam with
/// `branch, y, ξ, S, P, R (row-major re/im), u₀ (re/im), weight, y₀`.
pub fn write_beams<const D: usize>(w: &mut impl Write, bs: &BeamSet<D>) -> Result<()> {
    writeln!(w, "# t={}", bs.t)?;
    writeln!(w, "# epsilon={}", bs.epsilon)?;
    writeln!(w, "# dim={D}")?;
    let mut cols = vec!["t".to_string(), "branch".to_string()];
    cols.extend((1..=D).map(|k| format!("y{k}")));
    cols.extend((1..=D).map(|k| format!("xi{k}")));
    cols.push("s".into());
    cols.extend(matrix_columns::<D>("p"));
    cols.extend(matrix_columns::<D>("r"));
    cols.extend(spinor_columns().into_iter().map(|c| format!("u{c}")));
    cols.push("weight".into());
    cols.extend((1..=D).map(|k| format!("y0_{k}")));
    writeln!(w, "# columns={}", cols.join(","))?;
    for b in &bs.beams {
        let mut row = vec![bs.t.to_string(), b.branch.symbol().to_string()];
        row.extend(b.y.iter().map(|v| v.to_string()));
        row.extend(b.xi.iter().map(|v| v.to_string()));
        row.push(b.s.to_string());
        for m in [&b.p, &b.r] {
            for i in 0..D {
                for j in 0..D {
                    row.push(m[(i, j)].re.to_string());
                    row.push(m[(i, j)].im.to_string());
                }
            }
        }
        push_spinor(&mut row, &b.u0);
        row.push(b.weight.to_string());
        row.extend(b.y0.iter().map(|v| v.to_string()));
        write_row(w, &row)?;
    }
    Ok(())
}

pub fn read_beams<const D: usize>(reader: impl BufRead) -> Result<BeamSet<D>> {
    let csv = Csv::read(reader)?;
    let dim = csv.integer("dim")?;
    if dim != D {
        return Err(parse_err(
            csv.get("dim")?.0,
            format!("snapshot has dim {dim}, expected {D}"),
        ));
    }
    let width = 2 + 3 * D + 1 + 4 * D * D + 8 + 1;
    let mut beams = Vec::with_capacity(csv.rows.len());
    for (line, nums, cells) in &csv.rows {
        if cells.len() != width {
            return Err(parse_err(
                *line,
                format!("expected {width} columns, found {}", cells.len()),
            ));
        }
        let branch =
            Branch::from_symbol(&cells[1]).ok_or_else(|| parse_err(*line, format!("unknown branch '{}'", cells[1])))?;
        let v = &nums[2..];
        check_row(*line, v, width - 2)?;
        let vec_at = |o: usize| SVector::<f64, D>::from_fn(|k, _| v[o + k]);
        let mat_at =
            |o: usize| CMatrix::<D>::from_fn(|i, j| C64::new(v[o + 2 * (i * D + j)], v[o + 2 * (i * D + j) + 1]));
        let s_at = 2 * D;
        let p_at = s_at + 1;
        let r_at = p_at + 2 * D * D;
        let u_at = r_at + 2 * D * D;
        beams.push(BeamState {
            y: vec_at(0),
            xi: vec_at(D),
            s: v[s_at],
            p: mat_at(p_at),
            r: mat_at(r_at),
            u0: take_spinor(&v[u_at..]),
            branch,
            weight: v[u_at + 8],
            y0: vec_at(u_at + 9),
        });
    }
    Ok(BeamSet {
        beams,
        epsilon: csv.number("epsilon")?,
        t: csv.number("t")?,
    })
}

/// Phase-space snapshot: one row per node with `y, ξ, φ (re/im), S, u₀`.
pub fn write_phase_fields<const D: usize>(w: &mut impl Write, f: &PhaseSpaceFields<D>) -> Result<()> {
    writeln!(w, "# t={}", f.t)?;
    writeln!(w, "# branch={}", f.branch.symbol())?;
    writeln!(w, "# ygrid={}", describe_axes(&f.grid.y))?;
    writeln!(w, "# xigrid={}", describe_axes(&f.grid.xi))?;
    writeln!(w, "# clamped={}", f.clamped_feet)?;
    let mut cols: Vec<String> = (1..=D).map(|k| format!("y{k}")).collect();
    cols.extend((1..=D).map(|k| format!("xi{k}")));
    for k in 1..=D {
        cols.push(format!("phi{k}_re"));
        cols.push(format!("phi{k}_im"));
    }
    cols.push("s".into());
    cols.extend(spinor_columns().into_iter().map(|c| format!("u{c}")));
    writeln!(w, "# columns={}", cols.join(","))?;
    for i in 0..f.grid.len() {
        let (y, xi) = f.grid.node(i);
        let mut row: Vec<String> = y.iter().chain(xi.iter()).map(|v| v.to_string()).collect();
        for z in f.phi[i].iter() {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        row.push(f.s[i].to_string());
        push_spinor(&mut row, &f.u0[i]);
        write_row(w, &row)?;
    }
    Ok(())
}

pub fn read_phase_fields<const D: usize>(reader: impl BufRead) -> Result<PhaseSpaceFields<D>> {
    let csv = Csv::read(reader)?;
    let (yl, ytext) = csv.get("ygrid")?;
    let (xl, xtext) = csv.get("xigrid")?;
    let grid = PhaseGrid::new(
        axes_array::<D>(yl, parse_axes(yl, ytext)?)?,
        axes_array::<D>(xl, parse_axes(xl, xtext)?)?,
    )?;
    let (bl, btext) = csv.get("branch")?;
    let branch = Branch::from_symbol(btext).ok_or_else(|| parse_err(bl, format!("unknown branch '{btext}'")))?;
    if csv.rows.len() != grid.len() {
        return Err(parse_err(
            yl,
            format!("grid has {} nodes but {} rows were read", grid.len(), csv.rows.len()),
        ));
    }
    let mut f = PhaseSpaceFields {
        grid,
        phi: Vec::with_capacity(csv.rows.len()),
        s: Vec::with_capacity(csv.rows.len()),
        u0: Vec::with_capacity(csv.rows.len()),
        branch,
        t: csv.number("t")?,
        clamped_feet: csv.integer("clamped")?,
    };
    for (line, nums, _) in &csv.rows {
        check_row(*line, nums, 4 * D + 9)?;
        f.phi.push(SVector::from_fn(|k, _| {
            C64::new(nums[2 * D + 2 * k], nums[2 * D + 2 * k + 1])
        }));
        f.s.push(nums[4 * D]);
        f.u0.push(take_spinor(&nums[4 * D + 1..]));
    }
    Ok(f)
}

const MAGIC: &[u8; 8] = b"DGBSPNR1";

/// Little-endian binary dump of a spectral field: magic, `d`, per axis
/// `(count: u64, min: f64, max: f64)`, `ε`, `t`, then 8 `f64` per node.
pub fn write_spinor_binary<const D: usize>(w: &mut impl Write, f: &SpinorGridField<D>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(D as u32).to_le_bytes())?;
    for a in &f.grid.axes {
        w.write_all(&(a.count as u64).to_le_bytes())?;
        w.write_all(&a.min.to_le_bytes())?;
        w.write_all(&a.max.to_le_bytes())?;
    }
    w.write_all(&f.epsilon.to_le_bytes())?;
    w.write_all(&f.t.to_le_bytes())?;
    for v in &f.values {
        for z in v.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_spinor_binary<const D: usize>(r: &mut impl Read) -> Result<SpinorGridField<D>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(parse_err(0, "not a spinor field dump"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    if d != D {
        return Err(parse_err(0, format!("dump has dimension {d}, expected {D}")));
    }
    let mut word = |r: &mut dyn Read| -> Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let mut axes = [PeriodicAxis::new(0.0, 1.0, 4); D];
    for a in axes.iter_mut() {
        let count = u64::from_le_bytes(word(r)?) as usize;
        let min = f64::from_le_bytes(word(r)?);
        let max = f64::from_le_bytes(word(r)?);
        *a = PeriodicAxis::new(min, max, count);
    }
    let epsilon = f64::from_le_bytes(word(r)?);
    let t = f64::from_le_bytes(word(r)?);
    let grid = UniformGrid::new(axes)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = vec![0u8; 64];
    for _ in 0..grid.len() {
        r.read_exact(&mut buf)?;
        let x = |k: usize| f64::from_le_bytes(buf[8 * k..8 * k + 8].try_into().unwrap());
        values.push(Spinor::from_fn(|c, _| C64::new(x(2 * c), x(2 * c + 1))));
    }
    Ok(SpinorGridField {
        grid,
        values,
        epsilon,
        t,
    })
}
