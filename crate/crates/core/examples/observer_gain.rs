// Observer gains from the filter Riccati equation, including the two scalar
// cases with closed-form solutions.

use nalgebra::DMatrix;
use retrodetect::lti::spectral_abscissa;
use retrodetect::riccati::{design_observer_gain, solve_care, CareProblem};

pub fn run_example() -> retrodetect::Result<()> {
    let s = |x: f64| DMatrix::from_element(1, 1, x);
    // a = 0: P = 1.  a = -1: P = sqrt(2) - 1.
    for (a, expected) in [(0.0, 1.0), (-1.0, 2f64.sqrt() - 1.0)] {
        let prob = CareProblem::scaled(s(a), s(1.0), 1.0, 1.0)?;
        let p = solve_care(&prob)?;
        println!("a = {a:>4}: P = {:.12} (closed form {expected:.12})", p[(0, 0)]);
    }

    // Mass-spring chain measured at the first position only.
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        -2.0, -0.1, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        1.0, 0.0, -1.0, -0.1,
    ]);
    let c = DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]);
    println!("plant abscissa: {:.4}", spectral_abscissa(&a)?);
    for q in [0.1, 1.0, 10.0, 100.0] {
        let h = design_observer_gain(&a, &c, q, 1.0)?;
        let err = &a - &h * &c;
        println!("q = {q:>5}: error abscissa {:.4}, |H| = {:.3}", spectral_abscissa(&err)?, h.norm());
    }

    // Undetectable pairs are refused rather than solved.
    let blind = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let c0 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    match design_observer_gain(&blind, &c0, 1.0, 1.0) {
        Ok(_) => println!("unexpected: gain for an undetectable pair"),
        Err(e) => println!("refused: {e}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
