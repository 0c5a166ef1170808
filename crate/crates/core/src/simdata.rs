//! Simulation designs: AR(1), block-diagonal and independent covariances.
//!
//! In every design the first 50 variables carry a class +1 mean shift
//! `c * (sqrt(50), sqrt(49), ..., sqrt(1))` and class -1 has mean zero. The
//! constant `c` makes the population Mahalanobis distance between the class
//! means equal to `signal` (or its square, with `signal_is_squared`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Class, LabeledMatrix};
use crate::error::{Error, Result};

/// Number of variables with a mean shift.
pub const NON_NULL: usize = 50;
const BLOCK: usize = 10;
const BLOCKS: usize = 5;
const BLOCK_ENTRY: f64 = -0.8;
const BLOCK_ENTRIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Ar1,
    BlockDiagonal,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub design: Design,
    pub d: usize,
    pub n_per_class: usize,
    /// Lag-one correlation of the AR(1) design.
    pub rho: f64,
    pub signal: f64,
    /// Calibrate the squared distance `v' S^-1 v` to `signal` instead.
    pub signal_is_squared: bool,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(design: Design, d: usize, n_per_class: usize, seed: u64) -> SimSpec {
        SimSpec {
            design,
            d,
            n_per_class,
            rho: -0.8,
            signal: 2.5,
            signal_is_squared: false,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if !(self.signal > 0.0) || !self.signal.is_finite() {
            return Err(Error::InvalidArgument(format!("signal must be positive, got {}", self.signal)));
        }
        if self.d < NON_NULL {
            return Err(Error::InvalidArgument(format!(
                "d must be at least {NON_NULL}, got {}",
                self.d
            )));
        }
        if self.n_per_class < 2 {
            return Err(Error::InvalidArgument("need at least 2 samples per class".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub non_null: Vec<bool>,
}

impl GroundTruth {
    pub fn standard(d: usize) -> GroundTruth {
        GroundTruth {
            non_null: (0..d).map(|k| k < NON_NULL).collect(),
        }
    }

    pub fn from_indices(d: usize, indices: &[usize]) -> Result<GroundTruth> {
        let mut non_null = vec![false; d];
        for &k in indices {
            *non_null.get_mut(k).ok_or_else(|| {
                Error::InvalidArgument(format!("non-null index {k} outside 0..{d}"))
            })? = true;
        }
        Ok(GroundTruth { non_null })
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.non_null.len()).filter(|&k| self.non_null[k]).collect()
    }

    pub fn is_non_null(&self, k: usize) -> bool {
        self.non_null.get(k).copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: LabeledMatrix,
    pub truth: GroundTruth,
    /// Population mean of class +1 (class -1 is zero).
    pub mean_shift: Vec<f64>,
}

/// The unscaled shift pattern `(sqrt(50), ..., sqrt(1), 0, ..., 0)`.
pub fn shift_pattern(d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| if k < NON_NULL { ((NON_NULL - k) as f64).sqrt() } else { 0.0 })
        .collect()
}

/// `v' S^-1 v` for the stationary unit-variance AR(1) covariance, using the
/// tridiagonal precision matrix.
pub fn ar1_quad_form(v: &[f64], rho: f64) -> f64 {
    let d = v.len();
    if d == 1 {
        return v[0] * v[0];
    }
    let mut diag = 0.0;
    for (k, &x) in v.iter().enumerate() {
        let w = if k == 0 || k == d - 1 { 1.0 } else { 1.0 + rho * rho };
        diag += w * x * x;
    }
    let off: f64 = v.windows(2).map(|w| w[0] * w[1]).sum();
    (diag - 2.0 * rho * off) / (1.0 - rho * rho)
}

/// The 10x10 block: unit diagonal, four random upper entries at -0.8,
/// diagonal shifted by `|min(lambda_min, 0)| + 0.05`, all divided by `1 + shift`.
/// Returns the block and the shift.
pub fn block_covariance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, f64) {
    let mut s = DMatrix::<f64>::identity(BLOCK, BLOCK);
    let upper: Vec<(usize, usize)> = (0..BLOCK)
        .flat_map(|i| (i + 1..BLOCK).map(move |j| (i, j)))
        .collect();
    for k in index::sample(rng, upper.len(), BLOCK_ENTRIES) {
        let (i, j) = upper[k];
        s[(i, j)] = BLOCK_ENTRY;
        s[(j, i)] = BLOCK_ENTRY;
    }
    let shift = block_shift(&s);
    for k in 0..BLOCK {
        s[(k, k)] += shift;
    }
    (s / (1.0 + shift), shift)
}

/// `|min(lambda_min(s), 0)| + 0.05`.
pub fn block_shift(s: &DMatrix<f64>) -> f64 {
    let lambda_min = SymmetricEigen::new(s.clone()).eigenvalues.min();
    lambda_min.min(0.0).abs() + 0.05
}

enum Covariance {
    Ar1(f64),
    Blocks(DMatrix<f64>),
    Identity,
}

impl Covariance {
    fn for_spec(spec: &SimSpec) -> Covariance {
        match spec.design {
            Design::Ar1 => Covariance::Ar1(spec.rho),
            Design::BlockDiagonal => {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(1);
                Covariance::Blocks(block_covariance(&mut rng).0)
            }
            Design::Independent => Covariance::Identity,
        }
    }

    fn quad_form(&self, v: &[f64]) -> f64 {
        match self {
            Covariance::Ar1(rho) => ar1_quad_form(v, *rho),
            Covariance::Blocks(block) => {
                let chol = block.clone().cholesky().expect("block covariance is positive definite");
                let mut q = 0.0;
                for b in 0..BLOCKS {
                    let x = DVector::from_column_slice(&v[b * BLOCK..(b + 1) * BLOCK]);
                    q += x.dot(&chol.solve(&x));
                }
                q + v[BLOCKS * BLOCK..].iter().map(|x| x * x).sum::<f64>()
            }
            Covariance::Identity => v.iter().map(|x| x * x).sum(),
        }
    }

    fn dense(&self, d: usize) -> DMatrix<f64> {
        match self {
            Covariance::Ar1(rho) => DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32)),
            Covariance::Blocks(block) => {
                let mut s = DMatrix::identity(d, d);
                for b in 0..BLOCKS {
                    s.view_mut((b * BLOCK, b * BLOCK), (BLOCK, BLOCK)).copy_from(block);
                }
                s
            }
            Covariance::Identity => DMatrix::identity(d, d),
        }
    }

    /// Writes one zero-mean draw into `row`.
    fn sample_row(&self, rng: &mut ChaCha8Rng, chol: Option<&DMatrix<f64>>, row: &mut [f64]) {
        for x in row.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        match self {
            Covariance::Ar1(rho) => {
                let innovation = (1.0 - rho * rho).sqrt();
                for k in 1..row.len() {
                    row[k] = rho * row[k - 1] + innovation * row[k];
                }
            }
            Covariance::Blocks(_) => {
                let l = chol.expect("cholesky factor");
                for b in 0..BLOCKS {
                    let z = DVector::from_column_slice(&row[b * BLOCK..(b + 1) * BLOCK]);
                    row[b * BLOCK..(b + 1) * BLOCK].copy_from_slice((l * z).as_slice());
                }
            }
            Covariance::Identity => {}
        }
    }
}

/// Population covariance of the design, as a dense `d x d` matrix.
pub fn population_covariance(spec: &SimSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    Ok(Covariance::for_spec(spec).dense(spec.d))
}

/// Calibration constant `c` for the shift pattern.
pub fn calibration(spec: &SimSpec) -> Result<f64> {
    spec.validate()?;
    let q = Covariance::for_spec(spec).quad_form(&shift_pattern(spec.d));
    Ok(if spec.signal_is_squared {
        (spec.signal / q).sqrt()
    } else {
        spec.signal / q.sqrt()
    })
}

/// Draws a data set; class +1 rows come first.
pub fn generate(spec: &SimSpec) -> Result<Simulated> {
    spec.validate()?;
    let cov = Covariance::for_spec(spec);
    let c = calibration(spec)?;
    let mean_shift: Vec<f64> = shift_pattern(spec.d).iter().map(|v| c * v).collect();
    let chol = match &cov {
        Covariance::Blocks(b) => Some(
            b.clone()
                .cholesky()
                .expect("block covariance is positive definite")
                .l(),
        ),
        _ => None,
    };

    let (n, d) = (2 * spec.n_per_class, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let mut values = DMatrix::<f64>::zeros(n, d);
    let mut row = vec![0.0; d];
    for r in 0..n {
        cov.sample_row(&mut rng, chol.as_ref(), &mut row);
        let shifted = r < spec.n_per_class;
        for k in 0..d {
            values[(r, k)] = if shifted { row[k] + mean_shift[k] } else { row[k] };
        }
    }
    let mut labels = vec![Class::Positive; spec.n_per_class];
    labels.extend(std::iter::repeat_n(Class::Negative, spec.n_per_class));
    Ok(Simulated {
        data: LabeledMatrix::new(values, labels)?,
        truth: GroundTruth::standard(d),
        mean_shift,
    })
}

/// Same design with AR(1) marked explicitly; see [`generate`].
pub fn generate_ar1(spec: &SimSpec) -> Result<Simulated> {
    expect_design(spec, Design::Ar1)?;
    generate(spec)
}

pub fn generate_block_diagonal(spec: &SimSpec) -> Result<Simulated> {
    expect_design(spec, Design::BlockDiagonal)?;
    generate(spec)
}

pub fn generate_independent(spec: &SimSpec) -> Result<Simulated> {
    expect_design(spec, Design::Independent)?;
    generate(spec)
}

fn expect_design(spec: &SimSpec, design: Design) -> Result<()> {
    if spec.design != design {
        return Err(Error::InvalidArgument(format!(
            "expected design {design:?}, got {:?}",
            spec.design
        )));
    }
    Ok(())
}
