use nalgebra::DMatrix;

use super::linalg::{block_diag_mat, condition_number, hstack, solve, vstack};
use super::StateSpace;
use crate::error::{Error, Result};

/// Algebraic loops with condition number above this are rejected.
pub(crate) const ILL_POSED_COND: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// Chain in list order: the first system is applied first.
    Series,
    Parallel,
    /// Negative unity feedback of the second system around the first.
    Feedback,
    BlockDiag,
}

/// `y = G2 (G1 u)`.
pub fn series(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    if g1.noutputs() != g2.ninputs() {
        return Err(Error::Dimension(format!(
            "series: first system has {} outputs, second has {} inputs",
            g1.noutputs(),
            g2.ninputs()
        )));
    }
    let (n1, n2) = (g1.nstates(), g2.nstates());
    let mut a = block_diag_mat(&[g1.a(), g2.a()]);
    a.view_mut((n1, 0), (n2, n1)).copy_from(&(g2.b() * g1.c()));
    let b = vstack(&[g1.b(), &(g2.b() * g1.d())]);
    let c = hstack(&[&(g2.d() * g1.c()), g2.c()]);
    StateSpace::new(a, b, c, g2.d() * g1.d())
}

/// `y = G1 u + G2 u`.
pub fn parallel(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    if g1.ninputs() != g2.ninputs() || g1.noutputs() != g2.noutputs() {
        return Err(Error::Dimension("parallel: port dimensions differ".into()));
    }
    StateSpace::new(
        block_diag_mat(&[g1.a(), g2.a()]),
        vstack(&[g1.b(), g2.b()]),
        hstack(&[g1.c(), g2.c()]),
        g1.d() + g2.d(),
    )
}

/// Closed loop `y = G1 e`, `e = u + sign · G2 y`. Use `sign = -1.0` for
/// negative feedback.
pub fn feedback(g1: &StateSpace, g2: &StateSpace, sign: f64) -> Result<StateSpace> {
    let (p, m) = (g1.noutputs(), g1.ninputs());
    if g2.ninputs() != p || g2.noutputs() != m {
        return Err(Error::Dimension("feedback: loop ports do not match".into()));
    }
    let loop_m = DMatrix::<f64>::identity(p, p) - g1.d() * g2.d() * sign;
    let cond = condition_number(&loop_m);
    if cond > ILL_POSED_COND {
        return Err(Error::IllPosed { cond });
    }
    // y = Cy x + Dy u, then e = Cu x + Du u.
    let (n1, n2) = (g1.nstates(), g2.nstates());
    let rhs_c = hstack(&[g1.c(), &(g1.d() * g2.c() * sign)]);
    let cy = solve(&loop_m, &rhs_c, "feedback loop")?;
    let dy = solve(&loop_m, g1.d(), "feedback loop")?;
    let mut cu = g2.d() * &cy * sign;
    {
        let mut tail = cu.view_mut((0, n1), (m, n2));
        tail += g2.c() * sign;
    }
    let du = DMatrix::<f64>::identity(m, m) + g2.d() * &dy * sign;
    let a = block_diag_mat(&[g1.a(), g2.a()]) + vstack(&[&(g1.b() * &cu), &(g2.b() * &cy)]);
    let b = vstack(&[&(g1.b() * &du), &(g2.b() * &dy)]);
    StateSpace::new(a, b, cy, dy)
}

pub fn block_diag(systems: &[StateSpace]) -> Result<StateSpace> {
    let pick = |f: fn(&StateSpace) -> &DMatrix<f64>| systems.iter().map(f).collect::<Vec<_>>();
    StateSpace::new(
        block_diag_mat(&pick(StateSpace::a)),
        block_diag_mat(&pick(StateSpace::b)),
        block_diag_mat(&pick(StateSpace::c)),
        block_diag_mat(&pick(StateSpace::d)),
    )
}

pub fn compose(kind: Composition, systems: &[StateSpace]) -> Result<StateSpace> {
    let (first, rest) = systems
        .split_first()
        .ok_or_else(|| Error::Invalid("compose needs at least one system".into()))?;
    match kind {
        Composition::BlockDiag => block_diag(systems),
        Composition::Series => rest.iter().try_fold(first.clone(), |acc, g| series(&acc, g)),
        Composition::Parallel => rest.iter().try_fold(first.clone(), |acc, g| parallel(&acc, g)),
        Composition::Feedback => match rest {
            [g2] => feedback(first, g2, -1.0),
            _ => Err(Error::Invalid(format!("feedback takes exactly two systems, got {}", systems.len()))),
        },
    }
}

/// Closes a static interconnection `v = L w` around `g`, whose inputs are
/// `[e; v]` (with `ext_in` external channels) and outputs `[z; w]` (with
/// `ext_out` external channels). The result maps `e` to `[z; w; v]`.
pub(crate) fn close_static(g: &StateSpace, ext_in: usize, ext_out: usize, l: &DMatrix<f64>) -> Result<StateSpace> {
    let (m, p) = (g.ninputs(), g.noutputs());
    if ext_in > m || ext_out > p {
        return Err(Error::Dimension("close_static: external ports exceed system ports".into()));
    }
    let (nv, nw) = (m - ext_in, p - ext_out);
    if l.shape() != (nv, nw) {
        return Err(Error::Dimension(format!(
            "interconnection is {}x{}, expected {nv}x{nw}",
            l.nrows(),
            l.ncols()
        )));
    }
    let n = g.nstates();
    let be = g.b().columns(0, ext_in).into_owned();
    let bv = g.b().columns(ext_in, nv).into_owned();
    let cz = g.c().rows(0, ext_out).into_owned();
    let cw = g.c().rows(ext_out, nw).into_owned();
    let dze = g.d().view((0, 0), (ext_out, ext_in)).into_owned();
    let dzv = g.d().view((0, ext_in), (ext_out, nv)).into_owned();
    let dwe = g.d().view((ext_out, 0), (nw, ext_in)).into_owned();
    let dwv = g.d().view((ext_out, ext_in), (nw, nv)).into_owned();

    let loop_m = DMatrix::<f64>::identity(nv, nv) - l * &dwv;
    let cond = condition_number(&loop_m);
    if cond > ILL_POSED_COND {
        return Err(Error::IllPosed { cond });
    }
    // v = Kx x + Ke e
    let kx = solve(&loop_m, &(l * &cw), "interconnection loop")?;
    let ke = solve(&loop_m, &(l * &dwe), "interconnection loop")?;
    let a = g.a() + &bv * &kx;
    let b = be + &bv * &ke;
    let c = vstack(&[&(cz + &dzv * &kx), &(cw + &dwv * &kx), &kx]);
    let d = vstack(&[&(dze + &dzv * &ke), &(dwe + &dwv * &ke), &ke]);
    debug_assert_eq!(a.nrows(), n);
    StateSpace::new(a, b, c, d)
}
