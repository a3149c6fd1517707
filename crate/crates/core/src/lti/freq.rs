use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{eigenvalues, rank_rel, singular_values_c, solve, solve_c, spectral_radius, to_complex, C64};
use super::StateSpace;
use crate::error::{Error, Result};

pub const NORMAL_RANK_TRIALS: usize = 5;
pub const NORMAL_RANK_TOL: f64 = 1e-9;
const NORMAL_RANK_SEED: u64 = 0x6e72_616e_6b00;

/// `G(s) = C (sI − A)⁻¹ B + D`, evaluated with a linear solve.
pub fn freq_response(sys: &StateSpace, s: C64) -> Result<DMatrix<C64>> {
    let n = sys.nstates();
    let d = to_complex(sys.d());
    if n == 0 {
        return Ok(d);
    }
    let mut pencil = to_complex(sys.a()).map(|x| -x);
    for i in 0..n {
        pencil[(i, i)] += s;
    }
    let x = solve_c(&pencil, &to_complex(sys.b()), "sI - A")?;
    Ok(to_complex(sys.c()) * x + d)
}

/// Max real part of the spectrum; `-∞` for an empty matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &DMatrix<f64>, margin: f64) -> Result<bool> {
    if margin < 0.0 {
        return Err(Error::Invalid(format!("stability margin must be non-negative, got {margin}")));
    }
    Ok(spectral_abscissa(a)? < -margin)
}

/// Static gain `−C A⁻¹ B + D` of a stable system.
pub fn dc_gain(sys: &StateSpace) -> Result<DMatrix<f64>> {
    if sys.nstates() == 0 {
        return Ok(sys.d().clone());
    }
    if !is_hurwitz(sys.a(), 0.0)? {
        return Err(Error::NotHurwitz(format!(
            "DC gain needs a stable system (spectral abscissa {:.3e})",
            spectral_abscissa(sys.a())?
        )));
    }
    let x = solve(sys.a(), sys.b(), "A in dc_gain")?;
    Ok(sys.d() - sys.c() * x)
}

/// Normal rank with the default trial count and tolerance.
pub fn normal_rank(sys: &StateSpace) -> Result<usize> {
    normal_rank_with(sys, NORMAL_RANK_TRIALS, NORMAL_RANK_TOL)
}

/// Maximum numerical rank of `G(s)` over `trials` pseudo-random points on
/// the circle `|s| = 1 + ρ(A)` (which keeps every point off the spectrum).
pub fn normal_rank_with(sys: &StateSpace, trials: usize, tol: f64) -> Result<usize> {
    if trials < 3 {
        return Err(Error::Invalid(format!("normal_rank needs at least 3 trials, got {trials}")));
    }
    if sys.noutputs() == 0 || sys.ninputs() == 0 {
        return Ok(0);
    }
    let radius = 1.0 + spectral_radius(sys.a())?;
    let mut rng = ChaCha8Rng::seed_from_u64(NORMAL_RANK_SEED);
    let mut best = 0;
    for _ in 0..trials {
        let theta = rng.random_range(0.05..(2.0 * PI - 0.05));
        let s = C64::from_polar(radius, theta);
        let g = freq_response(sys, s)?;
        best = best.max(rank_rel(&singular_values_c(&g), tol));
    }
    Ok(best)
}

/// Left invertibility over the rational functions: normal rank equals the
/// input dimension.
pub fn left_invertible(sys: &StateSpace) -> Result<bool> {
    Ok(normal_rank(sys)? == sys.ninputs())
}
