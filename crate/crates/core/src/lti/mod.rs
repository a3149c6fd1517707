//! Dense continuous-time LTI state-space algebra.
//!
//! Everything downstream (plants, residual generators, filters) is carried
//! around as a [`StateSpace`] realization `(A, B, C, D)`.

pub(crate) mod compose;
mod expm;
mod freq;
pub(crate) mod linalg;
mod sim;
mod zeros;

pub use compose::{block_diag, compose, feedback, parallel, series, Composition};
pub use expm::mat_exp;
pub use freq::{
    dc_gain, freq_response, is_hurwitz, left_invertible, normal_rank, normal_rank_with,
    spectral_abscissa, NORMAL_RANK_TOL, NORMAL_RANK_TRIALS,
};
pub use sim::{discretize_zoh, simulate, Discretized};
pub use zeros::{invariant_zeros, square_zeros};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Continuous-time realization `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `y = Du`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    pub fn identity(k: usize) -> Self {
        Self::static_gain(DMatrix::identity(k, k))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }
    pub fn ninputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn noutputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.b, self.c, self.d)
    }

    /// Keeps the listed input channels, in the given order.
    pub fn select_inputs(&self, idx: &[usize]) -> Result<Self> {
        let m = self.ninputs();
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(Error::Dimension(format!("input index {bad} out of range ({m})")));
        }
        Ok(Self {
            a: self.a.clone(),
            b: self.b.select_columns(idx),
            c: self.c.clone(),
            d: self.d.select_columns(idx),
        })
    }

    /// Keeps the listed output channels, in the given order.
    pub fn select_outputs(&self, idx: &[usize]) -> Result<Self> {
        let p = self.noutputs();
        if let Some(&bad) = idx.iter().find(|&&i| i >= p) {
            return Err(Error::Dimension(format!("output index {bad} out of range ({p})")));
        }
        Ok(Self {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.select_rows(idx),
            d: self.d.select_rows(idx),
        })
    }

    /// Left-multiplies the output by a static matrix: `y' = K y`.
    pub fn premultiply(&self, k: &DMatrix<f64>) -> Result<Self> {
        if k.ncols() != self.noutputs() {
            return Err(Error::Dimension("premultiply: column count must equal outputs".into()));
        }
        Self::new(self.a.clone(), self.b.clone(), k * &self.c, k * &self.d)
    }

    /// Right-multiplies the input by a static matrix: `u = K u'`.
    pub fn postmultiply(&self, k: &DMatrix<f64>) -> Result<Self> {
        if k.nrows() != self.ninputs() {
            return Err(Error::Dimension("postmultiply: row count must equal inputs".into()));
        }
        Self::new(self.a.clone(), &self.b * k, self.c.clone(), &self.d * k)
    }
}

/// Uniformly sampled multichannel signal; row `k` holds the sample at `k * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    step: f64,
    samples: DMatrix<f64>,
}

impl SignalTrace {
    pub fn new(step: f64, samples: DMatrix<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Invalid(format!("sample step must be positive, got {step}")));
        }
        Ok(Self { step, samples })
    }

    /// Builds a trace by evaluating `f(t)` on `len` grid points.
    pub fn from_fn(step: f64, len: usize, channels: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Result<Self> {
        let mut samples = DMatrix::zeros(len, channels);
        for k in 0..len {
            let v = f(k as f64 * step);
            if v.len() != channels {
                return Err(Error::Dimension(format!(
                    "sample generator returned {} channels, expected {channels}",
                    v.len()
                )));
            }
            for (j, x) in v.into_iter().enumerate() {
                samples[(k, j)] = x;
            }
        }
        Self::new(step, samples)
    }

    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }
    pub fn channels(&self) -> usize {
        self.samples.ncols()
    }
    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
    /// Euclidean norm of sample `k` across channels.
    pub fn norm_at(&self, k: usize) -> f64 {
        self.samples.row(k).norm()
    }
}
