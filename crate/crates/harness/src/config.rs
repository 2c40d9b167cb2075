//! Sectioned `key = value` experiment files:
//!
//! ```text
//! [experiment]
//! method = lagrangian
//! example = example1
//! epsilon = 1/256, 1/512
//!
//! [output]
//! dir = out/table1
//! ```
//!
//! Keys left out take the defaults of the chosen example. `serialize`
//! writes every resolved key, so its output parses back to the same config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use diracgb::dirac::TransportForm;
use diracgb::lagrangian::{DivergenceMode, DEFAULT_DROP_THRESHOLD};

use crate::error::{HarnessError, Result};

pub trait Named: Copy + PartialEq + Sized + 'static {
    const NAMES: &'static [(&'static str, Self)];

    fn name(self) -> &'static str {
        Self::NAMES
            .iter()
            .find(|(_, v)| *v == self)
            .map(|(n, _)| *n)
            .unwrap_or("?")
    }

    fn parse_named(key: &str, s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(n, _)| *n == s)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let options: Vec<_> = Self::NAMES.iter().map(|(n, _)| *n).collect();
                HarnessError::config(
                    key,
                    format!("unknown value '{s}', expected one of {}", options.join(", ")),
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Lagrangian,
    Eulerian,
    Spectral,
}

impl Named for Method {
    const NAMES: &'static [(&'static str, Self)] = &[
        ("lagrangian", Method::Lagrangian),
        ("eulerian", Method::Eulerian),
        ("spectral", Method::Spectral),
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example {
    Example1,
    Example2,
    Example3,
    Custom,
}

impl Named for Example {
    const NAMES: &'static [(&'static str, Self)] = &[
        ("example1", Example::Example1),
        ("example2", Example::Example2),
        ("example3", Example::Example3),
        ("custom", Example::Custom),
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Compare {
    Exact,
    Spectral,
    None,
}

impl Named for Compare {
    const NAMES: &'static [(&'static str, Self)] = &[
        ("exact", Compare::Exact),
        ("spectral", Compare::Spectral),
        ("none", Compare::None),
    ];
}

impl Named for DivergenceMode {
    const NAMES: &'static [(&'static str, Self)] =
        &[("total", DivergenceMode::Total), ("partial", DivergenceMode::Partial)];
}

impl Named for TransportForm {
    const NAMES: &'static [(&'static str, Self)] = &[
        ("printed", TransportForm::Printed),
        ("branch-signed", TransportForm::BranchSigned),
    ];
}

/// A scalar that may be left to a rule (`auto`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

impl Auto {
    pub fn value(self) -> Option<f64> {
        match self {
            Auto::Auto => None,
            Auto::Value(v) => Some(v),
        }
    }
}

/// Quadratic `c + b·x + ½ xᵀQx`, as config values.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSpec {
    pub c: f64,
    pub b: [f64; 3],
    pub q: [f64; 9],
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            c: 0.0,
            b: [0.0; 3],
            q: [0.0; 9],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    // [experiment]
    pub method: Method,
    pub example: Example,
    pub dimension: usize,
    pub epsilons: Vec<f64>,
    pub t_final: f64,
    /// Extra output times before `t_final`.
    pub snapshots: Vec<f64>,
    pub compare: Compare,
    /// Custom packet: center, momentum, envelope width.
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
    pub width: f64,

    // [potential]
    pub potential: String,
    pub omega: f64,
    pub potential_center: [f64; 3],
    pub electric: QuadraticSpec,
    pub magnetic: [QuadraticSpec; 3],

    // [discretization]
    pub dt_factor: f64,
    pub dy_factor: f64,
    pub theta: Auto,
    /// Evaluation and reference box `[−L, L]ᵈ`.
    pub half_width: f64,
    /// Beam mesh and phase-grid `y` box around the packet center.
    pub beam_half_width: f64,
    pub eval_points: usize,
    /// Compare 3D runs on the `x₃ = 0` plane only.
    pub slice: bool,
    pub reference_points: usize,
    pub reference_stride: usize,
    pub reference_dt: Auto,
    pub phase_points: usize,
    pub xi_half_width: f64,
    pub divergence: DivergenceMode,
    pub transport: TransportForm,
    pub drop_threshold: f64,

    // [output]
    pub out: PathBuf,
    pub memory_cap_gib: f64,
    pub threads: usize,
    pub write_fields: bool,
    pub write_beams: bool,
}

impl ExperimentConfig {
    /// Defaults of `example` run with `method`.
    pub fn preset(example: Example, method: Method) -> Self {
        let mut c = Self {
            method,
            example,
            dimension: 3,
            epsilons: vec![1.0 / 256.0],
            t_final: 0.5,
            snapshots: vec![],
            compare: Compare::Exact,
            center: vec![0.0; 3],
            momentum: vec![0.0; 3],
            width: 1.0 / 16.0,
            potential: "zero".into(),
            omega: 1.0,
            potential_center: [0.0; 3],
            electric: QuadraticSpec::default(),
            magnetic: Default::default(),
            dt_factor: 0.5,
            dy_factor: 0.5,
            theta: Auto::Auto,
            half_width: 0.5,
            beam_half_width: 0.5,
            eval_points: 101,
            slice: true,
            reference_points: 256,
            reference_stride: 1,
            reference_dt: Auto::Auto,
            phase_points: 129,
            xi_half_width: 0.5,
            divergence: DivergenceMode::Total,
            transport: TransportForm::Printed,
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            out: PathBuf::from("out"),
            memory_cap_gib: 8.0,
            threads: 0,
            write_fields: false,
            write_beams: false,
        };
        match example {
            Example::Example1 | Example::Custom => {}
            Example::Example2 => {
                c.dimension = 2;
                c.center = vec![0.0; 2];
                c.momentum = vec![0.0; 2];
                c.epsilons = vec![1.0 / 512.0, 1.0 / 1024.0];
                c.t_final = 0.56;
                c.snapshots = vec![0.38];
                c.compare = Compare::Spectral;
                c.reference_points = 2048;
                c.reference_stride = 4;
            }
            Example::Example3 => {
                c.epsilons = vec![1.0 / 512.0];
                c.t_final = 8.0;
                c.snapshots = (0..8).map(f64::from).collect();
                c.compare = Compare::None;
                c.center = vec![0.1, -0.1, 0.0];
                c.potential = "harmonic".into();
            }
        }
        c
    }

    /// All output times in increasing order, `t_final` last.
    pub fn output_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.snapshots.iter().copied().filter(|&s| s < self.t_final).collect();
        t.push(self.t_final);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if !(1..=3).contains(&d) {
            return Err(HarnessError::config(
                "experiment.dimension",
                format!("must be 1, 2 or 3, got {d}"),
            ));
        }
        match self.example {
            Example::Example2 if d != 2 => {
                return Err(HarnessError::config(
                    "experiment.dimension",
                    "example2 is posed in 2 dimensions",
                ));
            }
            Example::Example3 if d != 3 => {
                return Err(HarnessError::config(
                    "experiment.dimension",
                    "example3 is posed in 3 dimensions",
                ));
            }
            _ => {}
        }
        if self.epsilons.is_empty() {
            return Err(HarnessError::config(
                "experiment.epsilon",
                "at least one value required",
            ));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(HarnessError::config(
                "experiment.epsilon",
                format!("must be positive, got {e}"),
            ));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(HarnessError::config(
                "experiment.t",
                format!("must be non-negative, got {}", self.t_final),
            ));
        }
        if self.snapshots.iter().any(|s| !(*s >= 0.0)) {
            return Err(HarnessError::config(
                "experiment.snapshots",
                "times must be non-negative",
            ));
        }
        if self.center.len() != d || self.momentum.len() != d {
            return Err(HarnessError::config(
                "experiment.center",
                format!("center and momentum need {d} components"),
            ));
        }
        if self.method == Method::Eulerian && d > 2 {
            return Err(HarnessError::config(
                "experiment.method",
                "eulerian runs support dimension 1 or 2 only",
            ));
        }
        if self.compare == Compare::Exact && self.example != Example::Example1 {
            return Err(HarnessError::config(
                "experiment.compare",
                "an exact solution is only known for example1",
            ));
        }
        if self.compare == Compare::Spectral && self.method == Method::Spectral {
            return Err(HarnessError::config(
                "experiment.compare",
                "spectral method compared with itself",
            ));
        }
        let spectral = self.method == Method::Spectral || self.compare == Compare::Spectral;
        if spectral && d == 3 {
            if let Some(e) = self.epsilons.iter().find(|e| **e < 1.0 / 128.0) {
                return Err(HarnessError::config(
                    "experiment.epsilon",
                    format!(
                        "3D spectral runs are limited to epsilon >= 1/128, got {}",
                        format_epsilon(*e)
                    ),
                ));
            }
        }
        for (key, v) in [
            ("discretization.dt_factor", self.dt_factor),
            ("discretization.dy_factor", self.dy_factor),
            ("discretization.half_width", self.half_width),
            ("discretization.beam_half_width", self.beam_half_width),
            ("discretization.xi_half_width", self.xi_half_width),
            ("experiment.width", self.width),
            ("output.memory_cap_gib", self.memory_cap_gib),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::config(key, format!("must be positive, got {v}")));
            }
        }
        for (key, v) in [
            ("discretization.theta", self.theta),
            ("discretization.reference_dt", self.reference_dt),
        ] {
            if let Auto::Value(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(HarnessError::config(key, format!("must be positive or auto, got {x}")));
                }
            }
        }
        if !(0.0..1.0).contains(&self.drop_threshold) {
            return Err(HarnessError::config(
                "discretization.drop_threshold",
                "must lie in [0, 1)",
            ));
        }
        if self.eval_points < 2 {
            return Err(HarnessError::config(
                "discretization.eval_points",
                "need at least 2 points",
            ));
        }
        if self.phase_points < 3 {
            return Err(HarnessError::config(
                "discretization.phase_points",
                "need at least 3 points",
            ));
        }
        if self.reference_points < 4 || !self.reference_points.is_multiple_of(2) {
            return Err(HarnessError::config(
                "discretization.reference_points",
                "must be even and at least 4",
            ));
        }
        if self.reference_stride == 0 || !self.reference_points.is_multiple_of(self.reference_stride) {
            return Err(HarnessError::config(
                "discretization.reference_stride",
                "must be positive and divide reference_points",
            ));
        }
        if !["zero", "harmonic", "custom-polynomial"].contains(&self.potential.as_str()) {
            return Err(HarnessError::config(
                "potential.name",
                format!("unknown potential '{}'", self.potential),
            ));
        }
        Ok(())
    }
}

/// `1/n` when `ε` is an exact reciprocal of an integer.
pub fn format_epsilon(e: f64) -> String {
    let inv = (1.0 / e).round();
    if (1.0..1e15).contains(&inv) && 1.0 / inv == e {
        format!("1/{inv}")
    } else {
        format!("{e}")
    }
}

pub fn parse_epsilon(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => parse_f64(key, a)? / parse_f64(key, b)?,
        None => parse_f64(key, s)?,
    };
    Ok(v)
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| HarnessError::config(key, format!("'{}' is not a number", s.trim())))
}

fn parse_list(key: &str, s: &str, item: impl Fn(&str, &str) -> Result<f64>) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| item(key, p))
        .collect()
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| HarnessError::config(key, format!("'{}' is not a non-negative integer", s.trim())))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(HarnessError::config(key, format!("'{other}' is not a boolean"))),
    }
}

fn parse_auto(key: &str, s: &str) -> Result<Auto> {
    if s.trim() == "auto" {
        Ok(Auto::Auto)
    } else {
        parse_f64(key, s).map(Auto::Value)
    }
}

fn parse_fixed<const N: usize>(key: &str, s: &str) -> Result<[f64; N]> {
    let v = parse_list(key, s, parse_f64)?;
    v.try_into()
        .map_err(|v: Vec<f64>| HarnessError::config(key, format!("expected {N} values, got {}", v.len())))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn show_auto(a: Auto) -> String {
    match a {
        Auto::Auto => "auto".into(),
        Auto::Value(v) => v.to_string(),
    }
}

const SECTIONS: [&str; 4] = ["experiment", "potential", "discretization", "output"];

/// Reads `section.key → (line, value)`, rejecting unknown sections,
/// duplicates and malformed lines.
fn read_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    let mut section: Option<&str> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(HarnessError::config(name, format!("unknown section at line {}", n + 1)));
            }
            section = Some(SECTIONS.iter().find(|s| **s == name).copied().unwrap_or_default());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::config(
                line,
                format!("line {} is not 'key = value'", n + 1),
            ));
        };
        let Some(sec) = section else {
            return Err(HarnessError::config(
                k.trim(),
                format!("line {} precedes any section", n + 1),
            ));
        };
        let key = format!("{sec}.{}", k.trim());
        if out.insert(key.clone(), (n + 1, v.trim().to_string())).is_some() {
            return Err(HarnessError::config(&key, format!("duplicate key at line {}", n + 1)));
        }
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let mut entries = read_entries(text)?;
    let mut take = |key: &str| entries.remove(key).map(|(_, v)| v);

    let example = match take("experiment.example") {
        Some(v) => Example::parse_named("experiment.example", &v)?,
        None => Example::Example1,
    };
    let method = match take("experiment.method") {
        Some(v) => Method::parse_named("experiment.method", &v)?,
        None => Method::Lagrangian,
    };
    let mut c = ExperimentConfig::preset(example, method);
    if let Some(v) = take("experiment.dimension") {
        c.dimension = parse_usize("experiment.dimension", &v)?;
        if c.example == Example::Example1 || c.example == Example::Custom {
            c.center = vec![0.0; c.dimension];
            c.momentum = vec![0.0; c.dimension];
        }
    }

    macro_rules! set {
        ($key:literal, $field:expr, $parse:expr) => {
            if let Some(v) = take($key) {
                $field = $parse($key, &v)?;
            }
        };
    }
    set!("experiment.epsilon", c.epsilons, |k, v| parse_list(k, v, parse_epsilon));
    set!("experiment.t", c.t_final, parse_f64);
    set!("experiment.snapshots", c.snapshots, |k, v| parse_list(k, v, parse_f64));
    set!("experiment.compare", c.compare, Compare::parse_named);
    set!("experiment.center", c.center, |k, v| parse_list(k, v, parse_f64));
    set!("experiment.momentum", c.momentum, |k, v| parse_list(k, v, parse_f64));
    set!("experiment.width", c.width, parse_f64);

    set!("potential.name", c.potential, |_: &str, v: &str| Ok::<_, HarnessError>(
        v.to_string()
    ));
    set!("potential.omega", c.omega, parse_f64);
    set!("potential.center", c.potential_center, parse_fixed::<3>);
    set!("potential.electric_c", c.electric.c, parse_f64);
    set!("potential.electric_b", c.electric.b, parse_fixed::<3>);
    set!("potential.electric_q", c.electric.q, parse_fixed::<9>);
    for (k, m) in c.magnetic.iter_mut().enumerate() {
        let key = |part: &str| format!("potential.magnetic{}_{part}", k + 1);
        if let Some(v) = take(&key("c")) {
            m.c = parse_f64(&key("c"), &v)?;
        }
        if let Some(v) = take(&key("b")) {
            m.b = parse_fixed::<3>(&key("b"), &v)?;
        }
        if let Some(v) = take(&key("q")) {
            m.q = parse_fixed::<9>(&key("q"), &v)?;
        }
    }

    set!("discretization.dt_factor", c.dt_factor, parse_f64);
    set!("discretization.dy_factor", c.dy_factor, parse_f64);
    set!("discretization.theta", c.theta, parse_auto);
    set!("discretization.half_width", c.half_width, parse_f64);
    set!("discretization.beam_half_width", c.beam_half_width, parse_f64);
    set!("discretization.eval_points", c.eval_points, parse_usize);
    set!("discretization.slice", c.slice, parse_bool);
    set!("discretization.reference_points", c.reference_points, parse_usize);
    set!("discretization.reference_stride", c.reference_stride, parse_usize);
    set!("discretization.reference_dt", c.reference_dt, parse_auto);
    set!("discretization.phase_points", c.phase_points, parse_usize);
    set!("discretization.xi_half_width", c.xi_half_width, parse_f64);
    set!("discretization.divergence", c.divergence, DivergenceMode::parse_named);
    set!("discretization.transport", c.transport, TransportForm::parse_named);
    set!("discretization.drop_threshold", c.drop_threshold, parse_f64);

    set!("output.dir", c.out, |_: &str, v: &str| Ok::<_, HarnessError>(
        PathBuf::from(v)
    ));
    set!("output.memory_cap_gib", c.memory_cap_gib, parse_f64);
    set!("output.threads", c.threads, parse_usize);
    set!("output.write_fields", c.write_fields, parse_bool);
    set!("output.write_beams", c.write_beams, parse_bool);

    if let Some((key, (line, _))) = entries.into_iter().next() {
        return Err(HarnessError::config(&key, format!("unknown key at line {line}")));
    }
    c.validate()?;
    Ok(c)
}

pub fn serialize(c: &ExperimentConfig) -> String {
    let mut s = String::new();
    let eps: Vec<String> = c.epsilons.iter().map(|e| format_epsilon(*e)).collect();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "method = {}", c.method.name());
    let _ = writeln!(s, "example = {}", c.example.name());
    let _ = writeln!(s, "dimension = {}", c.dimension);
    let _ = writeln!(s, "epsilon = {}", eps.join(", "));
    let _ = writeln!(s, "t = {}", c.t_final);
    let _ = writeln!(s, "snapshots = {}", join(&c.snapshots));
    let _ = writeln!(s, "compare = {}", c.compare.name());
    let _ = writeln!(s, "center = {}", join(&c.center));
    let _ = writeln!(s, "momentum = {}", join(&c.momentum));
    let _ = writeln!(s, "width = {}", c.width);

    let _ = writeln!(s, "\n[potential]");
    let _ = writeln!(s, "name = {}", c.potential);
    let _ = writeln!(s, "omega = {}", c.omega);
    let _ = writeln!(s, "center = {}", join(&c.potential_center));
    let _ = writeln!(s, "electric_c = {}", c.electric.c);
    let _ = writeln!(s, "electric_b = {}", join(&c.electric.b));
    let _ = writeln!(s, "electric_q = {}", join(&c.electric.q));
    for (k, m) in c.magnetic.iter().enumerate() {
        let _ = writeln!(s, "magnetic{}_c = {}", k + 1, m.c);
        let _ = writeln!(s, "magnetic{}_b = {}", k + 1, join(&m.b));
        let _ = writeln!(s, "magnetic{}_q = {}", k + 1, join(&m.q));
    }

    let _ = writeln!(s, "\n[discretization]");
    let _ = writeln!(s, "dt_factor = {}", c.dt_factor);
    let _ = writeln!(s, "dy_factor = {}", c.dy_factor);
    let _ = writeln!(s, "theta = {}", show_auto(c.theta));
    let _ = writeln!(s, "half_width = {}", c.half_width);
    let _ = writeln!(s, "beam_half_width = {}", c.beam_half_width);
    let _ = writeln!(s, "eval_points = {}", c.eval_points);
    let _ = writeln!(s, "slice = {}", c.slice);
    let _ = writeln!(s, "reference_points = {}", c.reference_points);
    let _ = writeln!(s, "reference_stride = {}", c.reference_stride);
    let _ = writeln!(s, "reference_dt = {}", show_auto(c.reference_dt));
    let _ = writeln!(s, "phase_points = {}", c.phase_points);
    let _ = writeln!(s, "xi_half_width = {}", c.xi_half_width);
    let _ = writeln!(s, "divergence = {}", c.divergence.name());
    let _ = writeln!(s, "transport = {}", c.transport.name());
    let _ = writeln!(s, "drop_threshold = {}", c.drop_threshold);

    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {}", c.out.display());
    let _ = writeln!(s, "memory_cap_gib = {}", c.memory_cap_gib);
    let _ = writeln!(s, "threads = {}", c.threads);
    let _ = writeln!(s, "write_fields = {}", c.write_fields);
    let _ = writeln!(s, "write_beams = {}", c.write_beams);
    s
}
