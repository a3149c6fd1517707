//! Observer-form continuous algebraic Riccati equation
//! `A P + P Aᵀ − P Cᵀ R⁻¹ C P + Q = 0` and the LQR-style gain `H = P Cᵀ R⁻¹`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::linalg::{eigenvalues, real_schur, singular_values_c, solve, spectral_radius, to_complex};
use crate::lti::{is_hurwitz, spectral_abscissa};

const MAX_NEWTON: usize = 200;
const PBH_TOL: f64 = 1e-9;

/// Data of the observer Riccati equation.
#[derive(Debug, Clone)]
pub struct CareProblem {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl CareProblem {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let p = c.nrows();
        if c.ncols() != n || q.shape() != (n, n) || r.shape() != (p, p) {
            return Err(Error::Dimension(format!(
                "CARE data: A {n}x{n}, C {}x{}, Q {}x{}, R {}x{}",
                c.nrows(),
                c.ncols(),
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&c, "C"), (&q, "Q"), (&r, "R")] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        check_symmetric(&q, "Q")?;
        check_symmetric(&r, "R")?;
        if n > 0 && q.clone().symmetric_eigen().eigenvalues.min() < -1e-12 * q.norm().max(1.0) {
            return Err(Error::Invalid("Q must be positive semidefinite".into()));
        }
        if p > 0 && r.clone().cholesky().is_none() {
            return Err(Error::Invalid("R must be positive definite".into()));
        }
        if !is_detectable(&a, &c)? {
            return Err(Error::NotDetectable("an eigenvalue with Re ≥ 0 fails the PBH rank test".into()));
        }
        Ok(Self { a, c, q, r })
    }

    /// `Q = q·I`, `R = r·I`.
    pub fn scaled(a: DMatrix<f64>, c: DMatrix<f64>, q: f64, r: f64) -> Result<Self> {
        if !(q >= 0.0) {
            return Err(Error::Invalid(format!("state weight must be non-negative, got {q}")));
        }
        if !(r > 0.0) {
            return Err(Error::Invalid(format!("output weight must be positive, got {r}")));
        }
        let (n, p) = (a.nrows(), c.nrows());
        Self::new(a, c, DMatrix::identity(n, n) * q, DMatrix::identity(p, p) * r)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Frobenius norm of the Riccati residual at `p`.
    pub fn residual(&self, p: &DMatrix<f64>) -> f64 {
        let rc = solve(&self.r, &self.c, "R").unwrap_or_else(|_| DMatrix::zeros(self.c.nrows(), self.c.ncols()));
        let res = &self.a * p + p * self.a.transpose() - p * self.c.transpose() * rc * p + &self.q;
        res.norm()
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
        return Err(Error::Invalid(format!("{name} must be symmetric")));
    }
    Ok(())
}

/// PBH test: `[λI − A; C]` has full column rank at every eigenvalue with
/// non-negative real part.
pub fn is_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    let ac = to_complex(a);
    let cc = to_complex(c);
    for lam in eigenvalues(a)? {
        if lam.re < 0.0 {
            continue;
        }
        let mut pbh = DMatrix::zeros(n + c.nrows(), n);
        pbh.view_mut((0, 0), (n, n)).copy_from(&(-&ac));
        for i in 0..n {
            pbh[(i, i)] += lam;
        }
        pbh.view_mut((n, 0), (c.nrows(), n)).copy_from(&cc);
        // Scale-aware threshold: compare against the pencil's magnitude.
        let sv = singular_values_c(&pbh);
        let scale = a.norm().max(c.norm()).max(lam.norm()).max(1.0);
        let rank = sv.iter().filter(|&&s| s > PBH_TOL * scale).count();
        if rank < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Solves `A X + X B = C` by Bartels–Stewart on the real Schur forms.
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = (a.nrows(), b.nrows());
    if a.ncols() != n || b.ncols() != m || c.shape() != (n, m) {
        return Err(Error::Dimension("Sylvester data dimensions".into()));
    }
    if n == 0 || m == 0 {
        return Ok(DMatrix::zeros(n, m));
    }
    let (qa, ta) = real_schur(a)?;
    let (qb, tb) = real_schur(b)?;
    let f = qa.transpose() * c * &qb;
    let mut y = DMatrix::<f64>::zeros(n, m);
    let eye_n = DMatrix::<f64>::identity(n, n);
    let mut j = 0;
    while j < m {
        // Diagonal block of Tb: extend while the subdiagonal is nonzero.
        let mut size = 1;
        while j + size < m && tb[(j + size, j + size - 1)] != 0.0 {
            size += 1;
        }
        let mut rhs = f.columns(j, size).into_owned();
        if j > 0 {
            rhs -= y.columns(0, j) * tb.view((0, j), (j, size));
        }
        let sol = if size == 1 {
            solve(&(&ta + &eye_n * tb[(j, j)]), &rhs, "Sylvester diagonal block")?
        } else {
            // (I ⊗ Ta + Tbᵀ ⊗ I) vec(Y) = vec(R) on the block.
            let blk = tb.view((j, j), (size, size));
            let mut k = DMatrix::<f64>::zeros(n * size, n * size);
            for s in 0..size {
                k.view_mut((s * n, s * n), (n, n)).copy_from(&ta);
                for t in 0..size {
                    let coef = blk[(t, s)];
                    if coef != 0.0 {
                        let mut view = k.view_mut((s * n, t * n), (n, n));
                        view += &eye_n * coef;
                    }
                }
            }
            let vec_r = DMatrix::from_column_slice(n * size, 1, rhs.as_slice());
            let v = solve(&k, &vec_r, "Sylvester 2x2 block")?;
            DMatrix::from_column_slice(n, size, v.as_slice())
        };
        y.columns_mut(j, size).copy_from(&sol);
        j += size;
    }
    Ok(qa * y * qb.transpose())
}

/// Solves `A X + X Aᵀ + Q = 0`; the result is symmetrized.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = solve_sylvester(a, &a.transpose(), &(-q))?;
    Ok((&x + x.transpose()) * 0.5)
}

const START_MARGIN: f64 = 1e-6;

/// Stabilizing solution `P` of the observer CARE.
pub fn solve_care(prob: &CareProblem) -> Result<DMatrix<f64>> {
    let a = &prob.a;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // A start gain whose closed loop sits on the imaginary axis up to
    // rounding makes the first Lyapunov solve useless, hence the margin.
    let margin = START_MARGIN * a.norm().max(1.0);
    let start = if is_hurwitz(a, margin)? {
        DMatrix::zeros(n, prob.c.nrows())
    } else {
        let bass = bass_gain(a, &prob.c)?;
        if is_hurwitz(&(a - &bass * &prob.c), margin)? {
            bass
        } else {
            continuation_gain(prob)?
        }
    };
    let (p, _) = newton(prob, a, start)?;
    let scale = 1.0 + p.norm();
    let res = prob.residual(&p);
    if res > 1e-8 * scale {
        return Err(Error::NoConvergence(format!("CARE residual {res:.3e} after Newton iteration")));
    }
    Ok(p)
}

/// Observer gain `H = P Cᵀ / r` for weights `Q = qI`, `R = rI`.
pub fn design_observer_gain(a: &DMatrix<f64>, c: &DMatrix<f64>, q: f64, r: f64) -> Result<DMatrix<f64>> {
    let prob = CareProblem::scaled(a.clone(), c.clone(), q, r)?;
    let p = solve_care(&prob)?;
    Ok(p * c.transpose() / r)
}

/// Newton–Kleinman on `A_s = a` (possibly shifted) from a stabilizing gain.
fn newton(prob: &CareProblem, a: &DMatrix<f64>, mut gain: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let c = &prob.c;
    let rinv_c = solve(&prob.r, c, "R")?;
    let mut prev: Option<DMatrix<f64>> = None;
    for _ in 0..MAX_NEWTON {
        let acl = a - &gain * c;
        if !is_hurwitz(&acl, 0.0)? {
            return Err(Error::NoConvergence(format!(
                "Newton iterate lost stability (abscissa {:.3e})",
                spectral_abscissa(&acl)?
            )));
        }
        let rhs = &prob.q + &gain * &prob.r * gain.transpose();
        let p = solve_lyapunov(&acl, &rhs)?;
        gain = &p * rinv_c.transpose();
        if let Some(old) = &prev {
            if (&p - old).norm() <= 1e-14 * (1.0 + p.norm()) {
                return Ok((p, gain));
            }
        }
        prev = Some(p);
    }
    let p = prev.expect("at least one Newton step");
    // Slow tail convergence is acceptable when the residual is already tiny.
    if prob.residual(&p) <= 1e-9 * (1.0 + p.norm()) {
        return Ok((p, gain));
    }
    Err(Error::NoConvergence(format!("{MAX_NEWTON} Newton steps")))
}

/// Bass's stabilizing gain for the dual pair: with `β > ρ(A)`,
/// `(A + βI)ᵀ`-shifted Lyapunov solution `Z` gives `L = Z⁻¹ Cᵀ`.
fn bass_gain(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let beta = spectral_radius(a)? + 1.0;
    let shifted = a + DMatrix::<f64>::identity(n, n) * beta;
    // (A + βI) Z + Z (A + βI)ᵀ = 2 Cᵀ C, written as a Lyapunov equation for −(A + βI).
    let z = solve_lyapunov(&(-shifted.transpose()), &(c.transpose() * c * 2.0))?;
    let z = (&z + z.transpose()) * 0.5;
    Ok(crate::lti::linalg::pinv(&z, 1e-12) * c.transpose())
}

/// Fallback for pairs where Bass's gain fails (detectable but unobservable):
/// track the stabilizing solution along `A − σI` as σ shrinks to zero.
fn continuation_gain(prob: &CareProblem) -> Result<DMatrix<f64>> {
    let a = &prob.a;
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut sigma = spectral_radius(a)? + 1.0;
    let mut gain = DMatrix::zeros(n, prob.c.nrows());
    let mut step = sigma / 2.0;
    for _ in 0..400 {
        if sigma == 0.0 {
            return Ok(gain);
        }
        let next = if sigma - step < 1e-6 { 0.0 } else { sigma - step };
        let shifted = a - &eye * next;
        if is_hurwitz(&(&shifted - &gain * &prob.c), 0.0)? {
            let (_, g) = newton(prob, &shifted, gain.clone())?;
            gain = g;
            sigma = next;
            step = (step * 2.0).min(sigma.max(1e-6));
        } else {
            step /= 2.0;
            if step < 1e-12 {
                break;
            }
        }
    }
    Err(Error::NoConvergence("no stabilizing start for Newton iteration".into()))
}
