//! Synthetic PARAFAC2 data.
//!
//! Ground truth follows a common benchmark design: `A` has folded standard
//! normal entries, `D` is uniform on `[0.1, 1.1)`, and every `B_k` is the
//! blueprint `B̂` with its rows cyclically shifted by `k`. Row permutations
//! preserve `B_kᵀB_k`, so the clean data satisfy the PARAFAC2 constraint
//! exactly.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, stream_seed, Rng};
use crate::tensor::{sq_frobenius, Matrix, Pf2Factors, SliceStack};

/// Number of jumps in every piecewise-constant blueprint column.
pub const TV_JUMPS: usize = 6;

const NOISE_STREAM: u64 = 0x6e6f_6973_65;

/// Blueprint family for the evolving mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Setup {
    /// Folded-normal entries (nonnegative, unstructured).
    TruncatedNormal = 1,
    /// Smooth spectra made of Gaussian bumps.
    SmoothSpectra = 2,
    /// Piecewise-constant profiles with six zero-sum jumps.
    PiecewiseConstant = 3,
}

impl From<Setup> for u8 {
    fn from(s: Setup) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for Setup {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Setup::TruncatedNormal),
            2 => Ok(Setup::SmoothSpectra),
            3 => Ok(Setup::PiecewiseConstant),
            _ => Err(Error::config(format!(
                "unknown simulation setup {v}; expected 1, 2 or 3"
            ))),
        }
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("setup must be 1, 2 or 3, got '{s}'")))?;
        Setup::try_from(v)
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub rank: usize,
    pub setup: Setup,
    pub eta: f64,
    pub seed: u64,
}

impl SimSpec {
    /// Desk-scale defaults: `I = 30, J = 40, K = 15, R = 3`.
    pub fn new(setup: Setup, eta: f64, seed: u64) -> Self {
        SimSpec {
            i: 30,
            j: 40,
            k: 15,
            rank: 3,
            setup,
            eta,
            seed,
        }
    }

    pub fn with_dims(mut self, i: usize, j: usize, k: usize, rank: usize) -> Self {
        self.i = i;
        self.j = j;
        self.k = k;
        self.rank = rank;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.i == 0 || self.j == 0 || self.k == 0 || self.rank == 0 {
            return Err(Error::config("all dimensions must be at least one"));
        }
        if self.j < self.rank {
            return Err(Error::config(format!(
                "J = {} is smaller than R = {}",
                self.j, self.rank
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!(
                "noise level must be nonnegative, got {}",
                self.eta
            )));
        }
        if self.setup == Setup::PiecewiseConstant && self.j <= TV_JUMPS {
            return Err(Error::config(format!(
                "piecewise-constant blueprints need J > {TV_JUMPS}, got {}",
                self.j
            )));
        }
        Ok(())
    }
}

/// A generated dataset: truth, its clean reconstruction and the noisy data.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: Pf2Factors,
    pub clean: SliceStack,
    pub noisy: SliceStack,
}

fn folded_normal(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        v.abs()
    })
}

/// Row `j` of the result is row `(j + k) mod J` of `blueprint`.
pub fn cyclic_shift_blueprint(blueprint: &Matrix, k: usize) -> Matrix {
    let j = blueprint.nrows();
    Matrix::from_fn(j, blueprint.ncols(), |row, r| blueprint[((row + k) % j, r)])
}

/// Columns that are positive mixtures of two or three Gaussian bumps.
///
/// Component `r` is centred around `(r + ½)·J/R`; distances wrap around the
/// row index so that cyclic shifts stay smooth.
pub fn smooth_spectra_blueprint(rng: &mut Rng, j: usize, rank: usize) -> Matrix {
    let jf = j as f64;
    let spacing = jf / rank as f64;
    let mut out = Matrix::zeros(j, rank);
    for r in 0..rank {
        let base = (r as f64 + 0.5) * spacing;
        let bumps = rng.random_range(2..=3);
        for _ in 0..bumps {
            let offset = Uniform::new(-0.3, 0.3).expect("valid range").sample(rng) * spacing;
            let center = (base + offset).rem_euclid(jf);
            let width = Uniform::new(0.06, 0.14).expect("valid range").sample(rng) * jf;
            let weight = Uniform::new(0.5, 1.5).expect("valid range").sample(rng);
            for row in 0..j {
                let dist = (row as f64 - center).abs();
                let dist = dist.min(jf - dist);
                out[(row, r)] += weight * (-0.5 * (dist / width).powi(2)).exp();
            }
        }
    }
    out
}

/// Columns with exactly six jumps whose level changes sum to zero.
///
/// Jump positions are distinct rows in `1..J`; five changes are standard
/// normal and the sixth cancels their sum, so the first and last levels agree.
pub fn piecewise_constant_blueprint(rng: &mut Rng, j: usize, rank: usize) -> Matrix {
    assert!(j > TV_JUMPS, "need more rows than jumps");
    let mut out = Matrix::zeros(j, rank);
    for r in 0..rank {
        let mut positions: Vec<usize> = sample(rng, j - 1, TV_JUMPS).into_iter().map(|p| p + 1).collect();
        positions.sort_unstable();
        let mut changes: Vec<f64> = (0..TV_JUMPS - 1).map(|_| StandardNormal.sample(rng)).collect();
        changes.push(-changes.iter().sum::<f64>());
        let mut level = 0.0;
        let mut next = 0;
        for row in 0..j {
            while next < TV_JUMPS && positions[next] == row {
                level += changes[next];
                next += 1;
            }
            out[(row, r)] = level;
        }
    }
    out
}

pub fn gen_blueprint(rng: &mut Rng, setup: Setup, j: usize, rank: usize) -> Matrix {
    match setup {
        Setup::TruncatedNormal => folded_normal(rng, j, rank),
        Setup::SmoothSpectra => smooth_spectra_blueprint(rng, j, rank),
        Setup::PiecewiseConstant => piecewise_constant_blueprint(rng, j, rank),
    }
}

/// Ground-truth factors for `spec`, deterministic in `spec.seed`.
pub fn gen_factors(spec: &SimSpec) -> Result<Pf2Factors> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let a = folded_normal(&mut rng, spec.i, spec.rank);
    let uniform = Uniform::new(0.1, 1.1).expect("valid range");
    let d = Matrix::from_fn(spec.k, spec.rank, |_, _| uniform.sample(&mut rng));
    let blueprint = gen_blueprint(&mut rng, spec.setup, spec.j, spec.rank);
    let b = (0..spec.k).map(|k| cyclic_shift_blueprint(&blueprint, k)).collect();
    Pf2Factors::new(a, d, b)
}

/// `X + η‖X‖ E/‖E‖` with `E` standard normal; norms span the whole stack.
pub fn add_noise(stack: &SliceStack, eta: f64, seed: u64) -> Result<SliceStack> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::config(format!("noise level must be nonnegative, got {eta}")));
    }
    if eta == 0.0 {
        return Ok(stack.clone());
    }
    let mut rng = rng_from_seed(seed);
    let noise: Vec<Matrix> = stack
        .slices()
        .iter()
        .map(|x| Matrix::from_fn(x.nrows(), x.ncols(), |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let noise_norm = noise.iter().map(sq_frobenius).sum::<f64>().sqrt();
    let scale = eta * stack.sq_norm().sqrt() / noise_norm;
    let slices = stack.slices().iter().zip(&noise).map(|(x, e)| x + e * scale).collect();
    SliceStack::new(slices)
}

/// Generate truth, clean data and noisy data for `spec`.
pub fn simulate(spec: &SimSpec) -> Result<Simulation> {
    let truth = gen_factors(spec)?;
    let clean = SliceStack::new(truth.reconstruct())?;
    let noisy = add_noise(&clean, spec.eta, stream_seed(spec.seed, NOISE_STREAM))?;
    Ok(Simulation { truth, clean, noisy })
}
