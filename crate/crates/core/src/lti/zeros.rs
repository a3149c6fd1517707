//! Invariant zeros by repeated output deflation.
//!
//! While the feedthrough is singular, outputs are rotated so that the
//! singular part of `D` becomes a block of zero rows `[C2 0]`. Those outputs
//! pin the state to `ker C2`; the state is restricted to that subspace and
//! the constraint `C2 ẋ = 0` replaces them. Each pass drops at least one
//! state, so the loop terminates with either an invertible `D` (zeros are
//! `eig(A − B D⁻¹ C)`) or a rank-deficient pencil.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{eigenvalues, row_space_split, singular_values, singular_values_c, solve, to_complex, vstack, C64};
use super::StateSpace;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;
const MATCH_TOL: f64 = 1e-6;
const PENCIL_TOL: f64 = 1e-6;
const SQUARING_SEEDS: [u64; 3] = [11, 23, 37];

fn scale_of(sys: &StateSpace) -> f64 {
    [sys.a(), sys.b(), sys.c(), sys.d()]
        .iter()
        .map(|m| m.norm())
        .fold(1.0, f64::max)
}

/// Zeros of a square system (`p = m`).
pub fn square_zeros(sys: &StateSpace) -> Result<Vec<C64>> {
    if sys.noutputs() != sys.ninputs() {
        return Err(Error::Dimension(format!(
            "square_zeros needs p = m, got p = {}, m = {}",
            sys.noutputs(),
            sys.ninputs()
        )));
    }
    let m = sys.ninputs();
    if m == 0 {
        return eigenvalues(sys.a());
    }
    let tol = RANK_TOL * scale_of(sys);
    let (mut a, mut b, mut c, mut d) = sys.clone().into_parts();
    loop {
        let svd = d.clone().svd(true, false);
        let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        let r = sv.iter().filter(|&&s| s > tol).count();
        if r == m {
            let dc = solve(&d, &c, "feedthrough in square_zeros")?;
            return eigenvalues(&(&a - &b * dc));
        }
        let n = a.nrows();
        if n == 0 {
            return Err(Error::SingularPencil("feedthrough singular with no states left".into()));
        }
        // Order left singular vectors by decreasing singular value.
        let u = svd.u.expect("requested U");
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
        let u = u.select_columns(&order);
        let ct = u.transpose() * &c;
        let dt = u.transpose() * &d;
        let c1 = ct.rows(0, r).into_owned();
        let d1 = dt.rows(0, r).into_owned();
        let c2 = ct.rows(r, m - r).into_owned();
        let k = m - r;
        let sv2 = singular_values(&c2);
        let smax2 = sv2.iter().copied().fold(0.0, f64::max);
        if sv2.iter().filter(|&&s| s > tol).count() < k {
            return Err(Error::SingularPencil(format!(
                "{k} output(s) vanish identically on the remaining {n}-state subspace"
            )));
        }
        let (z_perp, z) = row_space_split(&c2, tol / smax2);
        if z_perp.ncols() != k {
            return Err(Error::SingularPencil("rank drop in output deflation".into()));
        }
        let az = &a * &z;
        let new_c = vstack(&[&(&c1 * &z), &(z_perp.transpose() * &az)]);
        let new_d = vstack(&[&d1, &(z_perp.transpose() * &b)]);
        a = z.transpose() * az;
        b = z.transpose() * &b;
        c = new_c;
        d = new_d;
    }
}

/// `σ_min / σ_max` of the Rosenbrock matrix `[A − sI, B; C, D]`; near zero
/// exactly when `s` drops its rank.
fn pencil_gap(sys: &StateSpace, s: C64) -> f64 {
    let n = sys.nstates();
    let (p, m) = (sys.noutputs(), sys.ninputs());
    let mut r = DMatrix::<C64>::zeros(n + p, n + m);
    let mut top = to_complex(sys.a());
    for i in 0..n {
        top[(i, i)] -= s;
    }
    r.view_mut((0, 0), (n, n)).copy_from(&top);
    r.view_mut((0, n), (n, m)).copy_from(&to_complex(sys.b()));
    r.view_mut((n, 0), (p, n)).copy_from(&to_complex(sys.c()));
    r.view_mut((n, n), (p, m)).copy_from(&to_complex(sys.d()));
    let sv = singular_values_c(&r);
    sv.iter().copied().fold(f64::INFINITY, f64::min) / sv.iter().copied().fold(0.0, f64::max)
}

/// Invariant zeros of `sys`. Nonsquare systems are squared down with
/// fixed-seed random static matrices; zeros common to every squaring are
/// kept if they also drop the rank of the original pencil. Decoupling
/// modes on the narrow side survive every squaring but are not zeros.
pub fn invariant_zeros(sys: &StateSpace) -> Result<Vec<C64>> {
    let (p, m) = (sys.noutputs(), sys.ninputs());
    if p == m {
        return square_zeros(sys);
    }
    let mut common: Option<Vec<C64>> = None;
    for seed in SQUARING_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let squared = if p > m {
            let k = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
            sys.premultiply(&k)?
        } else {
            let k = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
            sys.postmultiply(&k)?
        };
        let zs = square_zeros(&squared)?;
        common = Some(match common {
            None => zs,
            Some(prev) => intersect(&prev, &zs),
        });
    }
    Ok(common
        .unwrap_or_default()
        .into_iter()
        .filter(|&z| pencil_gap(sys, z) < PENCIL_TOL)
        .collect())
}

/// Multiset intersection with tolerance `MATCH_TOL · max(1, |z|)`.
fn intersect(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut used = vec![false; b.len()];
    let mut out = Vec::new();
    for za in a {
        let hit = b
            .iter()
            .enumerate()
            .filter(|(j, zb)| !used[*j] && (*za - **zb).norm() < MATCH_TOL * za.norm().max(1.0))
            .min_by(|x, y| (*za - *x.1).norm().partial_cmp(&(*za - *y.1).norm()).unwrap());
        if let Some((j, _)) = hit {
            used[j] = true;
            out.push(*za);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::series;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, d),
        )
        .unwrap()
    }

    fn sorted_re(mut z: Vec<C64>) -> Vec<f64> {
        z.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        z.into_iter().map(|z| z.re).collect()
    }

    /// Smallest singular value of the Rosenbrock matrix at `s`, relative.
    #[test]
    fn biproper_scalar_zero() {
        let z = invariant_zeros(&scalar(-1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - C64::new(-2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn strictly_proper_scalar_has_no_zeros() {
        assert!(invariant_zeros(&scalar(-1.0, 1.0, 1.0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn relative_degree_two_chain() {
        // 1/((s+1)(s+2)) has no finite zeros; (s+3)/((s+1)(s+2)) has one.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let sys = StateSpace::new(a.clone(), b.clone(), DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), DMatrix::zeros(1, 1))
            .unwrap();
        assert!(invariant_zeros(&sys).unwrap().is_empty());
        // C = [1, 1] gives (s+3)/((s+1)(s+2)).
        let sys = StateSpace::new(a, b, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DMatrix::zeros(1, 1)).unwrap();
        let z = invariant_zeros(&sys).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - C64::new(-3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn cascade_zeros_are_union() {
        let g1 = scalar(-1.0, 1.0, 1.0, 1.0); // (s+2)/(s+1)
        let g2 = scalar(-5.0, 1.0, -2.0, 1.0); // (s+3)/(s+5)
        let z = sorted_re(invariant_zeros(&series(&g1, &g2).unwrap()).unwrap());
        assert_eq!(z.len(), 2);
        assert!((z[0] + 3.0).abs() < 1e-8 && (z[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn mimo_zeros_drop_pencil_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let sys = StateSpace::new(
                DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0)),
                DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0)),
                DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0)),
                DMatrix::zeros(2, 2),
            )
            .unwrap();
            let z = invariant_zeros(&sys).unwrap();
            // Generic 4-state 2×2 strictly proper system: n − m = 2 zeros.
            assert_eq!(z.len(), 2);
            for s in z {
                assert!(pencil_gap(&sys, s) < 1e-8, "not a zero: {s}");
            }
        }
    }

    #[test]
    fn tall_system_keeps_common_zero() {
        // Both outputs share the zero at −2; a second output with another
        // zero location removes any squaring-dependent zero.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 2.0]);
        let d = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let sys = StateSpace::new(a, b, c, d).unwrap();
        let z = invariant_zeros(&sys).unwrap();
        for s in &z {
            assert!(pencil_gap(&sys, *s) < 1e-8);
        }
    }

    #[test]
    fn singular_pencil_is_reported() {
        let sys = StateSpace::static_gain(DMatrix::zeros(1, 1));
        assert!(matches!(invariant_zeros(&sys), Err(Error::SingularPencil(_))));
    }

    #[test]
    fn uncontrollable_mode_of_tall_system_is_not_a_zero() {
        // Mode −3 is invisible to the input; every squaring keeps it as a
        // zero, but the tall pencil keeps full column rank there.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let sys = StateSpace::new(a, b, c, DMatrix::zeros(2, 1)).unwrap();
        for seed in SQUARING_SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = DMatrix::from_fn(1, 2, |_, _| rng.random_range(-1.0..1.0));
            let zs = square_zeros(&sys.premultiply(&k).unwrap()).unwrap();
            assert!(zs.iter().any(|z| (z - C64::new(-3.0, 0.0)).norm() < 1e-9));
        }
        assert!(invariant_zeros(&sys).unwrap().is_empty());
    }
}
