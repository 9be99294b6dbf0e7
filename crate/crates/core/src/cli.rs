//! Command-line front end: configuration files, field export and the
//! verification suites behind `sparsefield verify`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::charfunc;
use crate::dir::{self, DirFactor, Direction, FracFactor, LatticeLines, MarginalRule, OperatorSpec};
use crate::frac;
use crate::grid::{CField, Field, Grid};
use crate::levy::{LevyMeasure, LevyTriplet, ProbabilityLaw};
use crate::synth::{self, FieldRealization};
use crate::valid::{self, Bullet};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SPARSEFIELD_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {msg}")]
    Config { path: String, line: usize, msg: String },
    #[error("{0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Stable,
    VarianceGamma,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    Dirac,
    Uniform,
    Gaussian,
    TwoPoint,
}

/// Parsed `simulate` configuration. Every key has a default except `shape`
/// and `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub name: String,
    pub family: Family,
    pub mu: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub scale: f64,
    pub lambda: f64,
    pub rate: f64,
    pub law: Law,
    pub law_a0: f64,
    pub law_lo: f64,
    pub law_hi: f64,
    pub law_mean: f64,
    pub law_var: f64,
    pub law_p_hi: f64,
    pub shape: Vec<usize>,
    pub h: f64,
    pub seed: u64,
    pub realization: u64,
    pub gamma: Option<f64>,
    pub k: Option<usize>,
    /// `(direction, alpha)` in the order `L = (-Delta)^{g/2} F_1 ... F_n`.
    pub factors: Vec<(Vec<i64>, f64)>,
}

/// Keys written to the sidecar for information only; accepted and ignored
/// when a sidecar is read back as a config.
const INFO_KEYS: [&str; 7] = ["min", "max", "p_min", "p_max", "k_certified", "csv", "pgm"];

impl SimConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let mut c = SimConfig {
            name: "field".into(),
            family: Family::Gaussian,
            mu: 0.0,
            sigma2: f64::NAN,
            alpha: 1.5,
            scale: 1.0,
            lambda: 1.0,
            rate: 1.0,
            law: Law::Gaussian,
            law_a0: 1.0,
            law_lo: -1.0,
            law_hi: 1.0,
            law_mean: 0.0,
            law_var: 1.0,
            law_p_hi: 0.5,
            shape: Vec::new(),
            h: f64::NAN,
            seed: 0,
            realization: 0,
            gamma: None,
            k: None,
            factors: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| CliError::Config {
                path: path.to_string(),
                line,
                msg,
            };
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{body}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(format!("{key}: '{v}' is not a number")))
            };
            let int = |v: &str| {
                v.parse::<u64>()
                    .map_err(|_| err(format!("{key}: '{v}' is not an integer")))
            };
            match key {
                "name" => {
                    if value.is_empty() || value.contains(['/', '\\']) {
                        return Err(err(format!("name: '{value}' is not a plain file stem")));
                    }
                    c.name = value.to_string()
                }
                "family" => {
                    c.family = match value {
                        "gaussian" => Family::Gaussian,
                        "stable" => Family::Stable,
                        "vg" => Family::VarianceGamma,
                        "poisson" => Family::Poisson,
                        _ => {
                            return Err(err(format!(
                                "family: unknown '{value}' (gaussian, stable, vg, poisson)"
                            )))
                        }
                    }
                }
                "law" => {
                    c.law = match value {
                        "dirac" => Law::Dirac,
                        "uniform" => Law::Uniform,
                        "gaussian" => Law::Gaussian,
                        "twopoint" => Law::TwoPoint,
                        _ => {
                            return Err(err(format!(
                                "law: unknown '{value}' (dirac, uniform, gaussian, twopoint)"
                            )))
                        }
                    }
                }
                "mu" => c.mu = num(value)?,
                "sigma2" => c.sigma2 = num(value)?,
                "alpha" => c.alpha = num(value)?,
                "scale" => c.scale = num(value)?,
                "lambda" => c.lambda = num(value)?,
                "rate" => c.rate = num(value)?,
                "law_a0" => c.law_a0 = num(value)?,
                "law_lo" => c.law_lo = num(value)?,
                "law_hi" => c.law_hi = num(value)?,
                "law_mean" => c.law_mean = num(value)?,
                "law_var" => c.law_var = num(value)?,
                "law_p_hi" => c.law_p_hi = num(value)?,
                "h" => c.h = num(value)?,
                "seed" => c.seed = int(value)?,
                "realization" => c.realization = int(value)?,
                "gamma" => c.gamma = Some(num(value)?),
                "k" => c.k = Some(int(value)? as usize),
                "shape" => {
                    c.shape = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>().map_err(|_| err(format!("shape: '{value}'"))))
                        .collect::<Result<_, _>>()?;
                }
                "factor" => {
                    let mut parts = value.split_whitespace();
                    let (Some(d), Some(a), None) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(err(format!("factor: expected '<n1,n2[,n3]> <alpha>', got '{value}'")));
                    };
                    let n = d
                        .split(',')
                        .map(|s| {
                            s.parse::<i64>()
                                .map_err(|_| err(format!("factor: direction '{d}' is not integer")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    c.factors.push((n, num(a)?));
                }
                "generator" => {
                    if value != synth::GENERATOR {
                        return Err(err(format!("generator '{value}' differs from {}", synth::GENERATOR)));
                    }
                }
                k if INFO_KEYS.contains(&k) => {}
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
        }
        let err = |msg: &str| CliError::Config {
            path: path.to_string(),
            line: 0,
            msg: msg.to_string(),
        };
        if c.shape.is_empty() {
            return Err(err("missing key 'shape'"));
        }
        if c.h.is_nan() {
            return Err(err("missing key 'h'"));
        }
        if c.sigma2.is_nan() {
            c.sigma2 = if c.family == Family::Gaussian { 1.0 } else { 0.0 };
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn triplet(&self) -> Result<LevyTriplet, CliError> {
        let law = match self.law {
            Law::Dirac => ProbabilityLaw::Dirac { a0: self.law_a0 },
            Law::Uniform => ProbabilityLaw::Uniform {
                lo: self.law_lo,
                hi: self.law_hi,
            },
            Law::Gaussian => ProbabilityLaw::Gaussian {
                mean: self.law_mean,
                var: self.law_var,
            },
            Law::TwoPoint => ProbabilityLaw::TwoPoint {
                lo: self.law_lo,
                hi: self.law_hi,
                p_hi: self.law_p_hi,
            },
        };
        let v = match self.family {
            Family::Gaussian => None,
            Family::Stable => Some(LevyMeasure::Stable {
                alpha: self.alpha,
                scale: self.scale,
            }),
            Family::VarianceGamma => Some(LevyMeasure::VarianceGamma { lambda: self.lambda }),
            Family::Poisson => Some(LevyMeasure::CompoundPoisson { rate: self.rate, law }),
        };
        LevyTriplet::new(self.mu, self.sigma2, v).map_err(|e| CliError::Model(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::centered(&self.shape, self.h).map_err(|e| CliError::Model(e.to_string()))
    }

    /// `None` when neither a fractional order nor factors are given.
    pub fn operator(&self) -> Result<Option<OperatorSpec>, CliError> {
        if self.gamma.is_none() && self.factors.is_empty() {
            return Ok(None);
        }
        let mut factors = Vec::new();
        for (n, a) in &self.factors {
            let dir = Direction::new(n).map_err(|e| CliError::Model(e.to_string()))?;
            factors.push(DirFactor::new(dir, Complex64::new(*a, 0.0)));
        }
        Ok(Some(OperatorSpec {
            frac: self.gamma.map(|gamma| FracFactor { gamma, k: self.k }),
            factors,
            rule: MarginalRule::Rectangle,
        }))
    }

    /// Canonical `key = value` lines; parsing them back gives the same config.
    pub fn to_lines(&self) -> Vec<String> {
        let mut out = vec![format!("name = {}", self.name)];
        let family = match self.family {
            Family::Gaussian => "gaussian",
            Family::Stable => "stable",
            Family::VarianceGamma => "vg",
            Family::Poisson => "poisson",
        };
        out.push(format!("family = {family}"));
        out.push(format!("mu = {}", self.mu));
        out.push(format!("sigma2 = {}", self.sigma2));
        match self.family {
            Family::Gaussian => {}
            Family::Stable => {
                out.push(format!("alpha = {}", self.alpha));
                out.push(format!("scale = {}", self.scale));
            }
            Family::VarianceGamma => out.push(format!("lambda = {}", self.lambda)),
            Family::Poisson => {
                out.push(format!("rate = {}", self.rate));
                let (law, keys): (&str, Vec<(&str, f64)>) = match self.law {
                    Law::Dirac => ("dirac", vec![("law_a0", self.law_a0)]),
                    Law::Uniform => ("uniform", vec![("law_lo", self.law_lo), ("law_hi", self.law_hi)]),
                    Law::Gaussian => ("gaussian", vec![("law_mean", self.law_mean), ("law_var", self.law_var)]),
                    Law::TwoPoint => (
                        "twopoint",
                        vec![
                            ("law_lo", self.law_lo),
                            ("law_hi", self.law_hi),
                            ("law_p_hi", self.law_p_hi),
                        ],
                    ),
                };
                out.push(format!("law = {law}"));
                out.extend(keys.iter().map(|(k, v)| format!("{k} = {v}")));
            }
        }
        let shape: Vec<String> = self.shape.iter().map(|n| n.to_string()).collect();
        out.push(format!("shape = {}", shape.join(",")));
        out.push(format!("h = {}", self.h));
        out.push(format!("seed = {}", self.seed));
        out.push(format!("realization = {}", self.realization));
        if let Some(g) = self.gamma {
            out.push(format!("gamma = {g}"));
        }
        if let Some(k) = self.k {
            out.push(format!("k = {k}"));
        }
        for (n, a) in &self.factors {
            let n: Vec<String> = n.iter().map(|c| c.to_string()).collect();
            out.push(format!("factor = {} {a}", n.join(",")));
        }
        out
    }
}

/// Innovation (density `w / h^d`) or synthesized process for a config.
pub fn realize(cfg: &SimConfig) -> Result<FieldRealization, CliError> {
    let t = cfg.triplet()?;
    let grid = cfg.grid()?;
    let model = |e: synth::SynthError| CliError::Model(e.to_string());
    match cfg.operator()? {
        None => {
            let mut r = synth::sample_innovation(&t, &grid, cfg.seed).map_err(model)?;
            if cfg.realization != 0 {
                r.field = synth::innovation_cells(&t, &grid, cfg.seed, cfg.realization).map_err(model)?;
                r.provenance.realization = cfg.realization;
            }
            r.field = r.field.scaled(1.0 / grid.cell_volume());
            Ok(r)
        }
        Some(spec) => synth::synthesize(&t, &spec, &grid, cfg.seed, cfg.realization).map_err(model),
    }
}

/// CSV with header `i,value`, `i,j,value` or `i,j,l,value`, row-major,
/// values at 17 significant digits.
pub fn csv_bytes(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let d = g.dims();
    let mut out = String::with_capacity(g.len() * 32);
    out.push_str(["i,value", "i,j,value", "i,j,l,value"][d - 1]);
    out.push('\n');
    for (flat, v) in f.values().iter().enumerate() {
        let idx = g.unflatten(flat);
        for i in &idx[..d] {
            out.push_str(&i.to_string());
            out.push(',');
        }
        out.push_str(&format!("{v:.16e}\n"));
    }
    out.into_bytes()
}

/// Binary 16-bit PGM of a 1-D or 2-D field, values mapped affinely from
/// `[min, max]` to `[0, 65535]`. Rows follow the first axis.
pub fn pgm_bytes(f: &Field) -> Option<Vec<u8>> {
    let g = f.grid();
    let (rows, cols) = match g.dims() {
        1 => (1, g.shape()[0]),
        2 => (g.shape()[0], g.shape()[1]),
        _ => return None,
    };
    let (lo, hi) = value_range(f);
    let mut out = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    for &v in f.values() {
        let level = if hi > lo {
            ((v - lo) / (hi - lo) * 65535.0).round() as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    Some(out)
}

fn value_range(f: &Field) -> (f64, f64) {
    f.values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

/// Writes to a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e.error,
    })?;
    Ok(())
}

/// Files written by [`simulate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub csv: PathBuf,
    pub pgm: Option<PathBuf>,
    pub sidecar: PathBuf,
}

pub fn simulate(cfg: &SimConfig, out_dir: &Path) -> Result<Outputs, CliError> {
    let r = realize(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv = out_dir.join(format!("{}.csv", cfg.name));
    write_atomic(&csv, &csv_bytes(&r.field))?;
    let pgm = match pgm_bytes(&r.field) {
        Some(bytes) => {
            let p = out_dir.join(format!("{}.pgm", cfg.name));
            write_atomic(&p, &bytes)?;
            Some(p)
        }
        None => None,
    };
    let mut lines = cfg.to_lines();
    lines.push(format!("generator = {}", synth::GENERATOR));
    let (lo, hi) = value_range(&r.field);
    lines.push(format!("min = {lo:.16e}"));
    lines.push(format!("max = {hi:.16e}"));
    if let Some(c) = &r.provenance.certificate {
        lines.push(format!("p_min = {}", c.p_min));
        lines.push(format!("p_max = {}", c.p_max));
        if let Some(k) = c.k {
            lines.push(format!("k_certified = {k}"));
        }
    }
    lines.push(format!("csv = {}.csv", cfg.name));
    lines.push(format!(
        "pgm = {}",
        if pgm.is_some() {
            format!("{}.pgm", cfg.name)
        } else {
            "none".into()
        }
    ));
    let sidecar = out_dir.join(format!("{}.txt", cfg.name));
    write_atomic(&sidecar, (lines.join("\n") + "\n").as_bytes())?;
    Ok(Outputs { csv, pgm, sidecar })
}

/// One named line of a verification report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: impl Into<String>, r: Result<(bool, String), String>) -> Self {
        match r {
            Ok((p, d)) => Self::new(name, p, d),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Bounds,
    Psd,
    Inverses,
    Adjoints,
    Ecf,
    Certificates,
    All,
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Bounds => suite_bounds(seed),
        Suite::Psd => suite_psd(seed),
        Suite::Inverses => suite_inverses(seed),
        Suite::Adjoints => suite_adjoints(seed),
        Suite::Ecf => suite_ecf(seed),
        Suite::Certificates => suite_certificates(),
        Suite::All => [
            Suite::Bounds,
            Suite::Psd,
            Suite::Inverses,
            Suite::Adjoints,
            Suite::Ecf,
            Suite::Certificates,
        ]
        .into_iter()
        .flat_map(|s| run_suite(s, seed))
        .collect(),
    }
}

fn e<E: fmt::Display>(x: E) -> String {
    x.to_string()
}

/// The innovation families exercised by the suites.
pub fn families() -> Vec<(&'static str, LevyTriplet)> {
    let cp = |rate, law| LevyTriplet::compound_poisson(rate, law).expect("static triplet");
    vec![
        ("gaussian", LevyTriplet::gaussian(0.3, 1.0).expect("static triplet")),
        ("sas-0.7", LevyTriplet::stable(0.7, 1.0).expect("static triplet")),
        ("sas-1.2", LevyTriplet::stable(1.2, 1.0).expect("static triplet")),
        ("sas-1.8", LevyTriplet::stable(1.8, 1.0).expect("static triplet")),
        ("vg", LevyTriplet::variance_gamma(1.5).expect("static triplet")),
        ("cp-symmetric", cp(3.0, ProbabilityLaw::Uniform { lo: -2.0, hi: 2.0 })),
        (
            "cp-asymmetric",
            cp(2.0, ProbabilityLaw::Gaussian { mean: 0.7, var: 0.4 }),
        ),
    ]
}

fn random_bump<R: Rng>(grid: &Grid, rng: &mut R) -> Field {
    let d = grid.dims();
    let c: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let s = 0.2 + 0.8 * rng.random::<f64>();
    let a = 6.0 * rng.random::<f64>() - 3.0;
    Field::from_fn(grid, |r| {
        let q: f64 = (0..d).map(|k| (r[k] - c[k]).powi(2)).sum();
        a * (-q / (2.0 * s * s)).exp()
    })
}

fn suite_bounds(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let lemma = charfunc::lemma_checks(10_000, seed);
    out.push(Check::new(
        "bounds/lemma-pointwise",
        lemma.pointwise == 0,
        format!("violations={}", lemma.pointwise),
    ));
    out.push(Check::new(
        "bounds/lemma-summed",
        lemma.summed == 0,
        format!("violations={}", lemma.summed),
    ));
    out.push(Check::new(
        "bounds/lemma-interpolation",
        lemma.interpolation == 0,
        format!("violations={}", lemma.interpolation),
    ));
    let line = Grid::centered(&[128], 0.1).expect("static grid");
    for (name, t) in families()
        .into_iter()
        .filter(|(n, _)| *n != "gaussian" && *n != "cp-symmetric")
    {
        let bc = valid::compatibility_certificate(&t, &OperatorSpec::default(), 1, None)
            .map_err(e)
            .and_then(|c| charfunc::bound_constants(&t, c.p_min, c.p_max).map_err(e));
        let bc = match bc {
            Ok(bc) => bc,
            Err(msg) => {
                out.push(Check::new(format!("bounds/{name}"), false, msg));
                continue;
            }
        };
        out.push(Check::from_result(
            format!("bounds/g-bound/{name}"),
            charfunc::verify_g_bound(&t, &bc, 1000, seed, 20.0)
                .map(|r| {
                    (
                        r.passed(),
                        format!("p=({}, {}) max_ratio={:.6}", bc.p_min, bc.p_max, r.max_ratio),
                    )
                })
                .map_err(e),
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let cont = (|| {
            let mut worst: f64 = 0.0;
            let mut fails = 0;
            for _ in 0..1000 {
                let (f, g) = (random_bump(&line, &mut rng), random_bump(&line, &mut rng));
                let r = charfunc::verify_continuity_bound(&t, &bc, &f, &g).map_err(e)?;
                worst = worst.max(r.ratio);
                fails += usize::from(!r.passed);
            }
            Ok((
                fails == 0,
                format!("draws=1000 violations={fails} max_ratio={worst:.6}"),
            ))
        })();
        out.push(Check::from_result(format!("bounds/continuity/{name}"), cont));
    }
    out
}

fn suite_psd(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let line = Grid::centered(&[128], 0.1).expect("static grid");
    for (name, t) in families() {
        let zero = charfunc::generalized_exponent(&t, &Field::zeros(&line));
        let at0 = t.exponent(0.0);
        let ok =
            matches!((&zero, &at0), (Ok(z), Ok(a)) if *z == Complex64::new(0.0, 0.0) && *a == Complex64::new(0.0, 0.0));
        out.push(Check::new(
            format!("psd/normalized/{name}"),
            ok,
            "f(0) = 0 and F(0) = 0",
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
        let r = (|| {
            let mut worst = f64::INFINITY;
            let mut fails = 0;
            for set in 0..50 {
                let n = 1 + set % 8;
                let phis: Vec<Field> = (0..n).map(|_| random_bump(&line, &mut rng)).collect();
                let g = charfunc::psd_gram_check(&t, &phis, 16, seed + set as u64).map_err(e)?;
                worst = worst.min(g.min_eigenvalue / n as f64);
                fails += usize::from(!g.passed);
            }
            Ok((
                fails == 0,
                format!("sets=50 failures={fails} min_eig_per_n={worst:.3e}"),
            ))
        })();
        out.push(Check::from_result(format!("psd/gram/{name}"), r));
    }
    out
}

fn he3(t: f64) -> f64 {
    t * t * t - 3.0 * t
}

/// `He_3(x/s) He_3(y/s) e^{-|r|^2 / 2 s^2}`: all moments of order <= 5 vanish.
pub fn moment_killed(grid: &Grid, s: f64, c: [f64; 2]) -> Field {
    Field::from_fn(grid, |r| {
        let (x, y) = ((r[0] - c[0]) / s, (r[1] - c[1]) / s);
        he3(x) * he3(y) * (-(x * x + y * y) / 2.0).exp()
    })
}

fn rel_err(a: &Field, b: &Field) -> f64 {
    let num = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    num / b.max_abs()
}

/// `max |I_{g,k} (-Delta)^{g/2} phi - phi| / max |phi|` on 256^2 for
/// `phi = |w|^{-g} psi` with a moment-killed `psi`.
pub fn frac_left_inverse_error(gamma: f64, k: usize, center: [f64; 2]) -> Result<f64, String> {
    let g = Grid::centered(&[256, 256], 1.0 / 32.0).map_err(e)?;
    let psi = moment_killed(&g, 4.0 / 32.0, center);
    let phi = frac::riesz(&psi, gamma).map_err(e)?;
    let lap = frac::frac_laplacian(&phi, gamma).map_err(e)?;
    Ok(rel_err(&frac::corrected_riesz(&lap, gamma, k).map_err(e)?, &phi))
}

/// `max |I_{g,0} phi_2 (r) - 2^{-g} I_{g,0} phi (2 r)| / max |I_{g,0} phi_2|`
/// with `phi_2(r) = phi(2 r)`, near the origin of a 256^2 grid.
pub fn frac_scale_error(gamma: f64) -> Result<f64, String> {
    let n = 256usize;
    let g = Grid::centered(&[n, n], 1.0 / 32.0).map_err(e)?;
    let s = 6.0 / 32.0;
    let a = frac::corrected_riesz(&moment_killed(&g, s / 2.0, [0.0, 0.0]), gamma, 0).map_err(e)?;
    let b = frac::corrected_riesz(&moment_killed(&g, s, [0.0, 0.0]), gamma, 0).map_err(e)?;
    let o = n / 2;
    let mut num: f64 = 0.0;
    for i in o - 60..o + 60 {
        for j in o - 60..o + 60 {
            let rhs = 2f64.powf(-gamma) * b.values()[(2 * i - o) * n + (2 * j - o)];
            num = num.max((a.values()[i * n + j] - rhs).abs());
        }
    }
    Ok(num / a.max_abs())
}

/// Grid `[-2, 2]^2` with spacing `h`, probe bump and direction `(2, 1)`.
fn marginal_setup(h: f64) -> Result<(Grid, CField, Direction), String> {
    let n = (4.0 / h).round() as usize;
    let g = Grid::centered(&[n, n], h).map_err(e)?;
    let phi = Field::from_fn(&g, |r| (-((r[0] - 0.1).powi(2) + (r[1] + 0.05).powi(2)) / 0.08).exp());
    Ok((g, phi.to_complex(), Direction::new(&[2, 1]).map_err(e)?))
}

fn max_diff(a: &CField, b: &CField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Errors of the three marginal identities at spacing `h`:
/// `(D_u - j w0) J phi = phi` by centered differences along lattice lines,
/// `J* (D_u - j w0)* phi = phi`, and the normalized pairing gap
/// `|<J phi, psi> - <phi, J* psi>| / |phi|_2 |psi|_2`.
pub fn marginal_errors(h: f64, w0: f64) -> Result<[f64; 3], String> {
    let (g, phi, u) = marginal_setup(h)?;
    let rule = MarginalRule::Trapezoid;
    let j = dir::marginal_right_inverse(&phi, u, w0, rule).map_err(e)?;
    let lines = LatticeLines::new(&g, u).map_err(e)?;
    let jw = Complex64::new(0.0, w0);
    let mut right: f64 = 0.0;
    for line in &lines.lines {
        for t in 1..line.len().saturating_sub(1) {
            let d = (j.values()[line[t + 1]] - j.values()[line[t - 1]]) / (2.0 * lines.step);
            right = right.max((d - jw * j.values()[line[t]] - phi.values()[line[t]]).norm());
        }
    }
    let du = dir::directional_derivative(&phi, u).map_err(e)?;
    let adj = du.zip_with(&phi, |a, b| -a - jw * b).map_err(e)?;
    let back = dir::marginal_adjoint_left_inverse(&adj, u, w0, rule).map_err(e)?;
    let left = max_diff(&back, &phi);
    let psi = Field::from_fn(&g, |r| (-((r[0] + 0.15).powi(2) + (r[1] - 0.2).powi(2)) / 0.08).exp()).to_complex();
    let jpsi = dir::marginal_adjoint_left_inverse(&psi, u, w0, rule).map_err(e)?;
    let gap = (j.dot(&psi).map_err(e)? - phi.dot(&jpsi).map_err(e)?).norm() / (phi.norm(2.0) * psi.norm(2.0));
    Ok([right, left, gap])
}

/// Spacings of the marginal convergence study.
pub const MARGINAL_HS: [f64; 3] = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];

/// Errors of the three identities at each spacing in [`MARGINAL_HS`].
pub fn marginal_study(w0: f64) -> Result<[[f64; 3]; 3], String> {
    let mut out = [[0.0; 3]; 3];
    for (i, &h) in MARGINAL_HS.iter().enumerate() {
        let errs = marginal_errors(h, w0)?;
        for (which, err) in errs.into_iter().enumerate() {
            out[which][i] = err;
        }
    }
    Ok(out)
}

/// Observed order `log2(e_i / e_{i+1})`, minimum over halvings.
pub fn min_order(errs: &[f64]) -> f64 {
    errs.windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .fold(f64::INFINITY, f64::min)
}

/// `max |(D_u - alpha) I_{u,alpha} phi - phi|` on a band-limited bump.
pub fn stable_identity_error() -> Result<f64, String> {
    let g = Grid::centered(&[128, 128], 1.0 / 32.0).map_err(e)?;
    let phi = Field::from_fn(&g, |r| (-((r[0] - 0.2).powi(2) + (r[1] + 0.3).powi(2)) / 0.08).exp()).to_complex();
    let mut worst: f64 = 0.0;
    for n in [[1, 0], [2, 1], [2, -1]] {
        let u = Direction::new(&n).map_err(e)?;
        for alpha in [
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(-0.5, 1.5),
        ] {
            let inv = dir::stable_inverse(&phi, u, alpha).map_err(e)?;
            let d = dir::directional_derivative(&inv, u).map_err(e)?;
            let back = d.zip_with(&inv, |a, b| a - alpha * b).map_err(e)?;
            worst = worst.max(max_diff(&back, &phi));
        }
    }
    Ok(worst)
}

fn suite_inverses(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = [0.04 * (rng.random::<f64>() - 0.5), 0.04 * (rng.random::<f64>() - 0.5)];
    for gamma in [0.5, 1.3, 2.7] {
        let kmax = frac::k_count(2, gamma).unwrap_or(0);
        let r = (|| {
            let mut worst: f64 = 0.0;
            for k in 0..=kmax {
                worst = worst.max(frac_left_inverse_error(gamma, k, center)?);
            }
            Ok((worst <= 1e-10, format!("k=0..={kmax} max_rel={worst:.3e}")))
        })();
        out.push(Check::from_result(
            format!("inverses/frac-left-inverse/gamma={gamma}"),
            r,
        ));
    }
    for gamma in [0.5, 1.3] {
        let r = frac_scale_error(gamma).map(|x| (x <= 1e-6, format!("rel={x:.3e}")));
        out.push(Check::from_result(
            format!("inverses/frac-scale-invariance/gamma={gamma}"),
            r,
        ));
    }
    out.push(Check::from_result(
        "inverses/stable-identity",
        stable_identity_error().map(|x| (x <= 1e-10, format!("max={x:.3e}"))),
    ));
    for w0 in [0.0, 3.0] {
        match marginal_study(w0) {
            Ok(errs) => {
                for (which, name) in [(0, "J-right-inverse"), (1, "Jstar-left-inverse")] {
                    let (o, last) = (min_order(&errs[which]), errs[which][2]);
                    out.push(Check::new(
                        format!("inverses/{name}/w0={w0}"),
                        o >= 0.9 && last <= 5e-3,
                        format!(
                            "errors={:.3e},{:.3e},{:.3e} order={o:.2}",
                            errs[which][0], errs[which][1], last
                        ),
                    ));
                }
            }
            Err(msg) => out.push(Check::new(format!("inverses/marginal/w0={w0}"), false, msg)),
        }
    }
    out
}

fn suite_adjoints(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Grid::centered(&[96, 80], 1.0 / 16.0).expect("static grid");
    let bump = |c: [f64; 2], s: f64| {
        Field::from_fn(&g, |r| {
            (-((r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2)) / (2.0 * s * s)).exp()
        })
        .to_complex()
    };
    let c1 = [0.5 * rng.random::<f64>(), 0.3 * rng.random::<f64>()];
    let phi = bump(c1, 0.3);
    let psi = bump([-0.6, 0.1], 0.25);
    let stable = (|| {
        let mut worst: f64 = 0.0;
        for n in [[1, 0], [2, -1]] {
            let u = Direction::new(&n).map_err(e)?;
            for alpha in [Complex64::new(-1.0, 0.5), Complex64::new(1.5, 0.0)] {
                let lhs = dir::stable_inverse(&phi, u, alpha).map_err(e)?.dot(&psi).map_err(e)?;
                let rhs = phi
                    .dot(&dir::stable_inverse_adjoint(&psi, u, alpha).map_err(e)?)
                    .map_err(e)?;
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok((worst <= 1e-12, format!("max={worst:.3e}")))
    })();
    out.push(Check::from_result("adjoints/stable-pairing", stable));
    let rect = (|| {
        let mut worst: f64 = 0.0;
        for n in [[1, 0], [2, 1], [2, -1]] {
            let u = Direction::new(&n).map_err(e)?;
            for w0 in [0.0, 1.7] {
                let jphi = dir::marginal_right_inverse(&phi, u, w0, MarginalRule::Rectangle).map_err(e)?;
                let jpsi = dir::marginal_adjoint_left_inverse(&psi, u, w0, MarginalRule::Rectangle).map_err(e)?;
                let (l, r) = (jphi.dot(&psi).map_err(e)?, phi.dot(&jpsi).map_err(e)?);
                worst = worst.max((l - r).norm() / (1.0 + l.norm()));
            }
        }
        Ok((worst <= 1e-12, format!("max_rel={worst:.3e}")))
    })();
    out.push(Check::from_result("adjoints/rectangle-transpose", rect));
    for w0 in [0.0, 3.0] {
        let r = marginal_study(w0).map(|errs| {
            let (o, last) = (min_order(&errs[2]), errs[2][2]);
            (
                o >= 0.9 && last <= 5e-3,
                format!("errors={:.3e},{:.3e},{:.3e} order={o:.2}", errs[2][0], errs[2][1], last),
            )
        });
        out.push(Check::from_result(format!("adjoints/marginal-pairing/w0={w0}"), r));
    }
    out
}

fn probe_bumps(grid: &Grid, specs: &[([f64; 2], f64, f64)]) -> Vec<Field> {
    specs
        .iter()
        .map(|&(c, s, a)| {
            Field::from_fn(grid, |r| {
                a * (-((r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2)) / (2.0 * s * s)).exp()
            })
        })
        .collect()
}

/// The three end-to-end models: `(name, triplet, operator)`.
pub fn ecf_models() -> Vec<(&'static str, LevyTriplet, OperatorSpec)> {
    let mondrian = OperatorSpec::directional(vec![
        DirFactor::marginal(Direction::axis(2, 0), 0.0),
        DirFactor::marginal(Direction::axis(2, 1), 0.0),
    ]);
    vec![
        (
            "gaussian-laplacian",
            LevyTriplet::gaussian(0.0, 1.0).expect("static"),
            OperatorSpec::fractional(1.0, None),
        ),
        (
            "sas1.5-laplacian",
            LevyTriplet::stable(1.5, 1.0).expect("static"),
            OperatorSpec::fractional(1.0, None),
        ),
        (
            "poisson-mondrian",
            LevyTriplet::compound_poisson(4.0, ProbabilityLaw::Gaussian { mean: 0.0, var: 1.0 }).expect("static"),
            mondrian,
        ),
    ]
}

/// Probe functions for the end-to-end ECF comparison on a `[-2, 2]^2` grid.
pub fn ecf_probes(grid: &Grid) -> Vec<Field> {
    probe_bumps(
        grid,
        &[
            ([0.0, 0.0], 0.15, 3.0),
            ([0.25, -0.125], 0.12, -4.0),
            ([-0.3, 0.2], 0.1, 5.0),
        ],
    )
}

fn suite_ecf(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let n = 2000;
    let grid = Grid::centered(&[32, 32], 0.125).expect("static grid");
    let probes = ecf_probes(&grid);
    let gauss = LevyTriplet::gaussian(0.0, 1.0).expect("static");
    let r = valid::ecf_vs_analytic(&gauss, None, &grid, &probes, n, seed, 5e-3)
        .map(|r| (r.passed(), format!("n={n} max_diff={:.4}", r.max_diff())))
        .map_err(e);
    out.push(Check::from_result("ecf/gaussian-innovation", r));
    for (name, t, spec) in ecf_models() {
        let r = valid::ecf_vs_analytic(&t, Some(&spec), &grid, &probes, n, seed, 5e-3)
            .map(|r| {
                (
                    r.passed(),
                    format!("n={n} max_diff={:.4} tol={:.4}", r.max_diff(), r.rows[0].tol),
                )
            })
            .map_err(e);
        out.push(Check::from_result(format!("ecf/{name}"), r));
    }
    let (_, cp, mondrian) = ecf_models().pop().expect("three models");
    let tele = (|| {
        let s = synth::synthesize(&cp, &mondrian, &grid, seed, 0).map_err(e)?;
        let w = synth::innovation_cells(&cp, &grid, seed, 0).map_err(e)?;
        let d = synth::mixed_backward_difference(&s.field);
        let worst = (0..grid.len())
            .filter(|&f| synth::has_all_predecessors(&grid, f))
            .map(|f| (d.values()[f] - w.values()[f]).abs())
            .fold(0.0, f64::max);
        Ok((worst <= 1e-10, format!("max={worst:.3e}")))
    })();
    out.push(Check::from_result("ecf/mondrian-telescoping", tele));

    let phi = &probes[0];
    let st = valid::stationarity_test(&LevyTriplet::stable(1.3, 1.0).expect("static"), None, phi, &[3, -2])
        .map(|r| (r.stationary(1e-12), format!("diff={:.3e}", r.diff)))
        .map_err(e);
    out.push(Check::from_result("ecf/stationary-innovation", st));
    let stable = OperatorSpec::directional(vec![
        DirFactor::new(Direction::new(&[2, 1]).expect("static"), Complex64::new(-1.0, 0.0)),
        DirFactor::new(Direction::new(&[2, -1]).expect("static"), Complex64::new(-2.0, 0.0)),
    ]);
    let st = valid::stationarity_test(&gauss, Some(&stable), phi, &[4, 1])
        .map(|r| (r.stationary(1e-10), format!("diff={:.3e}", r.diff)))
        .map_err(e);
    out.push(Check::from_result("ecf/stationary-stable-factors", st));
    let st = valid::stationarity_test(&cp, Some(&mondrian), phi, &[4, 1])
        .map(|r| (!r.stationary(1e-3), format!("diff={:.3e}", r.diff)))
        .map_err(e);
    out.push(Check::from_result("ecf/nonstationary-marginal-factors", st));
    out
}

/// `(name, triplet, spec, d, requested orders, expected rejection)`.
type CertCase = (
    &'static str,
    LevyTriplet,
    OperatorSpec,
    usize,
    Option<(f64, f64)>,
    Option<Bullet>,
);

/// Triggering and non-triggering cases for each rule of the compatibility
/// conditions.
pub fn certificate_cases() -> Vec<CertCase> {
    let id = OperatorSpec::default;
    let vg =
        |mu, sigma2| LevyTriplet::new(mu, sigma2, Some(LevyMeasure::VarianceGamma { lambda: 1.0 })).expect("static");
    let sas = |a| LevyTriplet::stable(a, 1.0).expect("static");
    let marginal = OperatorSpec::directional(vec![DirFactor::marginal(Direction::axis(2, 0), 0.0)]);
    vec![
        (
            "measure-class/trigger",
            sas(1.2),
            id(),
            2,
            Some((1.3, 1.5)),
            Some(Bullet::MeasureClass),
        ),
        ("measure-class/clear", sas(1.2), id(), 2, Some((1.0, 1.5)), None),
        (
            "drift/trigger",
            vg(0.5, 0.0),
            id(),
            2,
            Some((1.2, 1.5)),
            Some(Bullet::DriftOrAsymmetry),
        ),
        ("drift/clear", vg(0.0, 0.0), id(), 2, Some((1.2, 1.5)), None),
        (
            "gaussian/trigger",
            vg(0.0, 1.0),
            id(),
            2,
            Some((1.0, 1.5)),
            Some(Bullet::Gaussian),
        ),
        ("gaussian/clear", vg(0.0, 0.0), id(), 2, Some((1.0, 1.5)), None),
        (
            "range/trigger-sas0.5-frac",
            sas(0.5),
            OperatorSpec::fractional(0.5, None),
            1,
            None,
            Some(Bullet::OperatorRange),
        ),
        (
            "range/clear-sas0.8-frac",
            sas(0.8),
            OperatorSpec::fractional(0.5, None),
            1,
            None,
            None,
        ),
        (
            "range/forbidden-order",
            sas(1.0),
            OperatorSpec::fractional(0.5, None),
            1,
            Some((0.9, 2.0)),
            Some(Bullet::OperatorRange),
        ),
        ("sparse/sas0.5-directional", sas(0.5), marginal, 2, None, None),
    ]
}

fn suite_certificates() -> Vec<Check> {
    certificate_cases()
        .into_iter()
        .map(|(name, t, spec, d, req, want)| {
            let got = valid::compatibility_certificate(&t, &spec, d, req);
            let (passed, detail) = match (&got, want) {
                (Ok(c), None) => (true, format!("accepted p_min={} p_max={}", c.p_min, c.p_max)),
                (Err(r), Some(b)) => (r.bullet == b, format!("rejected [{}]", r.bullet)),
                (Ok(c), Some(b)) => (
                    false,
                    format!("accepted p_min={} p_max={}, expected [{b}]", c.p_min, c.p_max),
                ),
                (Err(r), None) => (false, format!("unexpected rejection [{}]: {}", r.bullet, r.detail)),
            };
            Check::new(format!("certificates/{name}"), passed, detail)
        })
        .collect()
}
