// State-space algebra on a pair of first-order lags: composition, frequency
// response, step response, and invariant zeros.

use nalgebra::{Complex, DMatrix, DVector};
use retrodetect::lti::{dc_gain, feedback, freq_response, invariant_zeros, mat_exp, series, simulate};
use retrodetect::{SignalTrace, StateSpace};

fn lag(tau: f64) -> retrodetect::Result<StateSpace> {
    let m = |x: f64| DMatrix::from_element(1, 1, x);
    StateSpace::new(m(-1.0 / tau), m(1.0 / tau), m(1.0), m(0.0))
}

pub fn run_example() -> retrodetect::Result<()> {
    let g1 = lag(0.5)?;
    let g2 = lag(2.0)?;
    let chain = series(&g1, &g2)?;
    let loop_ = feedback(&chain, &StateSpace::identity(1), -1.0)?;
    println!("closed loop DC gain: {:.4}", dc_gain(&loop_)?[(0, 0)]);

    for w in [0.1, 1.0, 10.0] {
        let g = freq_response(&chain, Complex::new(0.0, w))?[(0, 0)];
        println!("|G(j{w})| = {:.4}, phase {:.1} deg", g.norm(), g.arg().to_degrees());
    }

    let h = 0.01;
    let step = SignalTrace::from_fn(h, 1001, 1, |_| vec![1.0])?;
    let (y, _) = simulate(&g1, &step, &DVector::zeros(1))?;
    let exact = 1.0 - (-1.0f64).exp();
    println!("lag step at t=0.5: {:.6} (closed form {exact:.6})", y.samples()[(50, 0)]);

    let phi = mat_exp(g1.a(), 0.5)?;
    println!("e^(A*0.5) = {:.6}", phi[(0, 0)]);

    // (s + 2)/(s + 1) has a single zero at -2.
    let m = |x: f64| DMatrix::from_element(1, 1, x);
    let lead = StateSpace::new(m(-1.0), m(1.0), m(1.0), m(1.0))?;
    println!("zeros of (s+2)/(s+1): {:?}", invariant_zeros(&lead)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
