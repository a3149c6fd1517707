use nalgebra::{DMatrix, DVector};

use super::linalg::{hstack, vstack};
use super::{mat_exp, SignalTrace, StateSpace};
use crate::error::{Error, Result};

/// Zero-order-hold discretization of a realization.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
}

/// `Ad = e^{Ah}`, `Bd = ∫₀ʰ e^{Aτ} dτ B`, both read off the exponential of
/// the augmented matrix `[[A, B], [0, 0]]`.
pub fn discretize_zoh(sys: &StateSpace, h: f64) -> Result<Discretized> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("discretization step must be positive, got {h}")));
    }
    let (n, m) = (sys.nstates(), sys.ninputs());
    let top = hstack(&[sys.a(), sys.b()]);
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n + m)).copy_from(&top);
    let e = mat_exp(&aug, h)?;
    Ok(Discretized {
        ad: e.view((0, 0), (n, n)).into_owned(),
        bd: e.view((0, n), (n, m)).into_owned(),
    })
}

/// Exact ZOH response on the input's time grid. Returns the output trace
/// (same length as the input) and the state after the last interval.
pub fn simulate(sys: &StateSpace, input: &SignalTrace, x0: &DVector<f64>) -> Result<(SignalTrace, DVector<f64>)> {
    if input.channels() != sys.ninputs() {
        return Err(Error::Dimension(format!(
            "input has {} channels, system has {} inputs",
            input.channels(),
            sys.ninputs()
        )));
    }
    if x0.len() != sys.nstates() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, system has {} states",
            x0.len(),
            sys.nstates()
        )));
    }
    let disc = discretize_zoh(sys, input.step())?;
    // One stacked map per step: [x⁺; y] = [[Ad, Bd], [C, D]] [x; u].
    let step_map = {
        let bottom = hstack(&[sys.c(), sys.d()]);
        let top = hstack(&[&disc.ad, &disc.bd]);
        vstack(&[&top, &bottom])
    };
    let (n, p) = (sys.nstates(), sys.noutputs());
    let mut out = DMatrix::zeros(input.len(), p);
    let mut xu = DVector::zeros(n + sys.ninputs());
    let mut x = x0.clone();
    for k in 0..input.len() {
        xu.rows_mut(0, n).copy_from(&x);
        xu.rows_mut(n, sys.ninputs()).copy_from(&input.samples().row(k).transpose());
        let next = &step_map * &xu;
        x.copy_from(&next.rows(0, n));
        out.row_mut(k).copy_from(&next.rows(n, p).transpose());
    }
    Ok((SignalTrace::new(input.step(), out)?, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, d),
        )
        .unwrap()
    }

    #[test]
    fn integrator_discretization() {
        let sys = StateSpace::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let d = discretize_zoh(&sys, 0.5).unwrap();
        assert!((d.ad - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
        assert!((d.bd - DMatrix::<f64>::identity(2, 2) * 0.5).norm() < 1e-15);
    }

    #[test]
    fn scalar_closed_form() {
        let d = discretize_zoh(&scalar(-1.0, 1.0, 1.0, 0.0), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((d.ad[(0, 0)] - e).abs() < 1e-14);
        assert!((d.bd[(0, 0)] - (1.0 - e)).abs() < 1e-14);
    }

    #[test]
    fn tiny_step_limit() {
        let sys = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, 0.5, -2.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let d = discretize_zoh(&sys, 1e-9).unwrap();
        assert!((d.ad - DMatrix::<f64>::identity(2, 2)).norm() < 1e-8);
        assert!(d.bd.norm() < 1e-8);
    }

    #[test]
    fn zero_input_zero_state() {
        let sys = scalar(-2.0, 1.0, 3.0, 0.5);
        let u = SignalTrace::new(0.01, DMatrix::zeros(100, 1)).unwrap();
        let (y, xf) = simulate(&sys, &u, &DVector::zeros(1)).unwrap();
        assert!(y.samples().iter().all(|&v| v == 0.0));
        assert_eq!(xf[0], 0.0);
    }

    #[test]
    fn step_response_matches_closed_form() {
        let sys = scalar(-1.0, 1.0, 1.0, 0.0);
        let h = 1e-3;
        let u = SignalTrace::new(h, DMatrix::from_element(5000, 1, 1.0)).unwrap();
        let (y, _) = simulate(&sys, &u, &DVector::zeros(1)).unwrap();
        for k in (0..5000).step_by(97) {
            let t = k as f64 * h;
            assert!((y.samples()[(k, 0)] - (1.0 - (-t).exp())).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let sys = scalar(-1.0, 1.0, 1.0, 0.0);
        let u = SignalTrace::new(0.1, DMatrix::zeros(3, 2)).unwrap();
        assert!(matches!(
            simulate(&sys, &u, &DVector::zeros(1)),
            Err(Error::Dimension(_))
        ));
        let u = SignalTrace::new(0.1, DMatrix::zeros(3, 1)).unwrap();
        assert!(simulate(&sys, &u, &DVector::zeros(2)).is_err());
    }
}
