//! Grid sampling of innovations and synthesis of `s` with `L s = w`.
//!
//! Each cell (of volume `h^d`) carries the innovation integral `<w, 1_cell>`,
//! drawn from the exact infinitely divisible law with characteristic function
//! `exp(h^d f(w))`. Every cell owns an independent ChaCha stream selected by
//! its flat index, so a field depends only on `(seed, realization)` and never
//! on the thread schedule.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::dir::{self, DirError, FracFactor, OperatorSpec};
use crate::grid::{Field, Grid, GridError};
use crate::levy::{LevyError, LevyMeasure, LevyTriplet};
use crate::valid::{self, Certificate, Rejection};

/// Tag recorded in every provenance; bump when the sampled values change.
pub const GENERATOR: &str = "chacha8-cell/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Dir(#[from] DirError),
    #[error("no exact sampler for the custom measure {0}")]
    Unsupported(String),
    #[error("factor with alpha = {0} yields a complex-valued process")]
    ComplexFactor(num_complex::Complex64),
    #[error("incompatible model: {0}")]
    Incompatible(Box<Rejection>),
}

/// Everything needed to regenerate a field bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub triplet: LevyTriplet,
    /// `None` for the innovation itself.
    pub operator: Option<OperatorSpec>,
    pub seed: u64,
    pub realization: u64,
    pub generator: &'static str,
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldRealization {
    pub field: Field,
    pub provenance: Provenance,
}

impl FieldRealization {
    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one cell of one realization.
pub fn cell_rng(seed: u64, realization: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed) ^ splitmix(!realization));
    rng.set_stream(cell as u64);
    rng
}

/// Symmetric standard stable variate, characteristic function `e^{-|w|^alpha}`
/// (Chambers, Mallows and Stuck).
pub fn standard_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let v = (rng.random::<f64>() - 0.5) * 2.0 * half;
    if alpha == 1.0 {
        return v.tan();
    }
    let w = -(1.0 - rng.random::<f64>()).ln();
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Exact sampler of the cell law `exp(vol f(w))`.
#[derive(Clone, Debug)]
pub struct CellSampler {
    mean: f64,
    sd: f64,
    jumps: Jumps,
}

#[derive(Clone, Debug)]
enum Jumps {
    None,
    Stable {
        alpha: f64,
        scale: f64,
    },
    Gamma(Gamma<f64>),
    Poisson {
        count: Poisson<f64>,
        law: crate::levy::ProbabilityLaw,
    },
}

impl CellSampler {
    pub fn new(t: &LevyTriplet, vol: f64) -> Result<Self, SynthError> {
        t.validate()?;
        let mut mean = t.mu * vol;
        let bad = |e: String| SynthError::Levy(LevyError::InvalidParameter(e));
        let jumps = match &t.v {
            None => Jumps::None,
            Some(LevyMeasure::Stable { alpha, scale }) => Jumps::Stable {
                alpha: *alpha,
                scale: scale * vol.powf(1.0 / alpha),
            },
            Some(LevyMeasure::VarianceGamma { lambda }) => {
                Jumps::Gamma(Gamma::new(vol, 1.0 / lambda).map_err(|e| bad(e.to_string()))?)
            }
            Some(LevyMeasure::CompoundPoisson { rate, law }) => {
                mean -= rate * law.inner_mean() * vol;
                let count = Poisson::new(rate * vol).map_err(|e| bad(e.to_string()))?;
                Jumps::Poisson {
                    count,
                    law: law.clone(),
                }
            }
            Some(LevyMeasure::Custom(c)) => return Err(SynthError::Unsupported(c.name().to_string())),
        };
        Ok(Self {
            mean,
            sd: (t.sigma2 * vol).sqrt(),
            jumps,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut x = self.mean;
        if self.sd > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            x += self.sd * z;
        }
        match &self.jumps {
            Jumps::None => {}
            Jumps::Stable { alpha, scale } => x += scale * standard_sas(*alpha, rng),
            Jumps::Gamma(g) => x += g.sample(rng) - g.sample(rng),
            Jumps::Poisson { count, law } => {
                let n = count.sample(rng) as u64;
                for _ in 0..n {
                    x += law.sample(rng);
                }
            }
        }
        x
    }
}

/// Cell integrals of the innovation for one realization.
pub fn innovation_cells(t: &LevyTriplet, grid: &Grid, seed: u64, realization: u64) -> Result<Field, SynthError> {
    let sampler = CellSampler::new(t, grid.cell_volume())?;
    let vals = (0..grid.len())
        .into_par_iter()
        .map(|cell| sampler.sample(&mut cell_rng(seed, realization, cell)))
        .collect();
    Ok(Field::new(grid.clone(), vals)?)
}

pub fn sample_innovation(t: &LevyTriplet, grid: &Grid, seed: u64) -> Result<FieldRealization, SynthError> {
    let field = innovation_cells(t, grid, seed, 0)?;
    let provenance = Provenance {
        triplet: t.clone(),
        operator: None,
        seed,
        realization: 0,
        generator: GENERATOR,
        certificate: None,
    };
    Ok(FieldRealization { field, provenance })
}

fn require_real_factors(spec: &OperatorSpec) -> Result<(), SynthError> {
    match spec.factors.iter().find(|f| f.alpha.im != 0.0) {
        Some(f) => Err(SynthError::ComplexFactor(f.alpha)),
        None => Ok(()),
    }
}

/// `L^{-1}` applied to the innovation density `w / h^d`.
pub fn invert(spec: &OperatorSpec, cells: &Field) -> Result<Field, SynthError> {
    require_real_factors(spec)?;
    let density = cells.scaled(1.0 / cells.grid().cell_volume());
    let s = dir::compose_right_inverse(spec, &density.to_complex())?;
    Ok(s.re())
}

/// Certifies `(t, spec)` and returns the spec with the certified correction
/// index filled in.
pub fn certify(t: &LevyTriplet, spec: &OperatorSpec, d: usize) -> Result<(OperatorSpec, Certificate), SynthError> {
    let cert = valid::compatibility_certificate(t, spec, d, None).map_err(|r| SynthError::Incompatible(Box::new(r)))?;
    let mut spec = spec.clone();
    if let (Some(fr), Some(k)) = (spec.frac.as_mut(), cert.k) {
        fr.k = Some(k);
    }
    Ok((spec, cert))
}

/// One realization of `s = L^{-1} w` for a certified model.
pub fn synthesize(
    t: &LevyTriplet,
    spec: &OperatorSpec,
    grid: &Grid,
    seed: u64,
    realization: u64,
) -> Result<FieldRealization, SynthError> {
    spec.check(grid)?;
    require_real_factors(spec)?;
    let (spec, cert) = certify(t, spec, grid.dims())?;
    let cells = innovation_cells(t, grid, seed, realization)?;
    let field = invert(&spec, &cells)?;
    let provenance = Provenance {
        triplet: t.clone(),
        operator: Some(spec),
        seed,
        realization,
        generator: GENERATOR,
        certificate: Some(cert),
    };
    Ok(FieldRealization { field, provenance })
}

/// `s = |w|^{-gamma} (w / h^d)` with the DC bin zeroed.
pub fn synthesize_self_similar(
    t: &LevyTriplet,
    gamma: f64,
    grid: &Grid,
    seed: u64,
) -> Result<FieldRealization, SynthError> {
    let spec = OperatorSpec {
        frac: Some(FracFactor { gamma, k: None }),
        ..OperatorSpec::default()
    };
    synthesize(t, &spec, grid, seed, 0)
}

/// Directional process; marginal factors integrate with anchored rectangle sums.
pub fn synthesize_directional(
    t: &LevyTriplet,
    spec: &OperatorSpec,
    grid: &Grid,
    seed: u64,
) -> Result<FieldRealization, SynthError> {
    synthesize(t, spec, grid, seed, 0)
}

/// Backward mixed difference `Delta_1 ... Delta_d s`, zero on cells that lack
/// a predecessor on some axis.
pub fn mixed_backward_difference(s: &Field) -> Field {
    let grid = s.grid().clone();
    let mut cur = s.values().to_vec();
    let strides = grid.strides();
    for a in 0..grid.dims() {
        let prev = cur.clone();
        for (flat, v) in cur.iter_mut().enumerate() {
            let i = grid.unflatten(flat);
            *v = if i[a] == 0 {
                0.0
            } else {
                prev[flat] - prev[flat - strides[a]]
            };
        }
    }
    Field::new(grid, cur).expect("length preserved")
}

/// Interior cells where [`mixed_backward_difference`] is defined.
pub fn has_all_predecessors(grid: &Grid, flat: usize) -> bool {
    let i = grid.unflatten(flat);
    (0..grid.dims()).all(|a| i[a] > 0)
}
