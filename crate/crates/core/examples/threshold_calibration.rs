// Calibrating a static threshold from the steady attack-to-residual gain
// and reading alarm times off simulated residuals.

use nalgebra::{DMatrix, DVector};
use retrodetect::detector::{calibrate_threshold, evaluate};
use retrodetect::lti::simulate;
use retrodetect::netsys::{Interconnection, Subsystem, SubsystemMatrices};
use retrodetect::resgen::{analyze_attack_to_residual, build_naive, build_retrofit, GeneratorBank, LocalGenerator};
use retrodetect::riccati::design_observer_gain;
use retrodetect::SignalTrace;

pub fn run_example() -> retrodetect::Result<()> {
    // Slow first-order plant, attack added to the input.
    let mut m = SubsystemMatrices::zeros(1, 1, 0, 1, 1, 0);
    m.a[(0, 0)] = -0.5;
    m.b[(0, 0)] = 0.5;
    m.x[(0, 0)] = 0.5;
    m.c[(0, 0)] = 1.0;
    let sub = Subsystem::new(m.clone())?;
    let subs = vec![sub.clone()];
    let l = Interconnection::zero_for(&subs);
    let a_bar = 0.1;

    let mut cases: Vec<(String, LocalGenerator)> = vec![("naive".into(), build_naive(&sub))];
    for q in [1.0, 10.0] {
        let h = design_observer_gain(&m.a, &m.c, q, 1.0)?;
        cases.push((format!("retrofit q={q}"), build_retrofit(&sub, &h)?));
    }
    for (name, local) in cases {
        let bank = GeneratorBank::new(vec![local], l.clone())?;
        let map = analyze_attack_to_residual(&subs, &l, &bank, &[0])?.map;
        let gamma = 0.9 * calibrate_threshold(&map, 0, a_bar)?;
        let step = SignalTrace::from_fn(1e-3, 10_000, 1, |_| vec![a_bar])?;
        let (eps, _) = simulate(&map, &step, &DVector::zeros(map.nstates()))?;
        let alarm = evaluate(&eps, gamma)?;
        println!("{name:>14}: gamma = {gamma:.4}, alarm at {:.3} s", alarm.unwrap_or(f64::NAN));
    }

    let silent = SignalTrace::new(1e-3, DMatrix::from_element(5, 1, 0.01))?;
    println!("sub-threshold residual alarms: {:?}", evaluate(&silent, 0.05)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
