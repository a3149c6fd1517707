// Why a decentralized Luenberger bank is not enough: removing one subsystem
// destabilizes it, while the retrofit bank with identical gains survives.

use nalgebra::DMatrix;
use retrodetect::lti::spectral_abscissa;
use retrodetect::netsys::Subsystem;
use retrodetect::resgen::{build_luenberger, build_retrofit, luenberger_counterexample, GeneratorBank, LocalGenerator};
use retrodetect::riccati::design_observer_gain;

type Builder = fn(&Subsystem, &DMatrix<f64>) -> retrodetect::Result<LocalGenerator>;

pub fn run_example() -> retrodetect::Result<()> {
    let (subs, l, q) = luenberger_counterexample()?;
    let gains = subs
        .iter()
        .zip(&q)
        .map(|(s, &q)| design_observer_gain(&s.matrices().a, &s.matrices().c, q, 1.0))
        .collect::<retrodetect::Result<Vec<_>>>()?;
    println!("gains: {:?}", gains.iter().map(|h| h[(0, 0)]).collect::<Vec<_>>());

    let builders: [(&str, Builder); 2] = [("luenberger", build_luenberger), ("retrofit", build_retrofit)];
    for (name, build) in builders {
        let locals = subs.iter().zip(&gains).map(|(s, h)| build(s, h)).collect::<retrodetect::Result<Vec<_>>>()?;
        let bank = GeneratorBank::new(locals, l.clone())?;
        for set in [vec![0, 1], vec![0]] {
            let abscissa = spectral_abscissa(bank.assemble_on(&set)?.a())?;
            let label: Vec<usize> = set.iter().map(|i| i + 1).collect();
            let verdict = if abscissa < 0.0 { "stable" } else { "UNSTABLE" };
            println!("{name:>10} on {label:?}: abscissa {abscissa:+.4} ({verdict})");
        }
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
