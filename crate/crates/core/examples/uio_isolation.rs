// Isolation filter for one subsystem: the filtered residual ignores the
// interaction input but still sees a local attack.

use nalgebra::{Complex, DMatrix};
use retrodetect::isolation::{build_isolation_filter, build_uio, check_isolation_existence, interaction_realization};
use retrodetect::lti::{freq_response, series, spectral_abscissa};
use retrodetect::netsys::{Port, Subsystem, SubsystemMatrices};
use retrodetect::resgen::realize_mi;
use retrodetect::riccati::design_observer_gain;

pub fn run_example() -> retrodetect::Result<()> {
    // Interaction drives state 1, the attack drives state 2, both measured.
    let mut m = SubsystemMatrices::zeros(2, 0, 1, 1, 2, 0);
    m.a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.2, -2.0]);
    m.u = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    m.x = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    m.c = DMatrix::identity(2, 2);
    let sub = Subsystem::new(m.clone())?;
    println!("isolation possible: {}", check_isolation_existence(&sub)?);

    let h = design_observer_gain(&m.a, &m.c, 1.0, 1.0)?;
    let (a_t, u_t, c_t) = interaction_realization(&sub, &h)?;
    let uio = build_uio(&a_t, &u_t, &c_t)?;
    println!(
        "observer abscissa {:.4}, extra output injection: {}",
        spectral_abscissa(&uio.f())?,
        uio.feedback_gain.is_some()
    );

    let s = build_isolation_filter(&sub, &h)?;
    let mi = realize_mi(&sub, &h)?;
    let from_v = series(&series(&sub.local_map(Port::V, Port::Y), &mi)?, &s)?;
    let from_a = series(&series(&sub.local_map(Port::A, Port::Y), &mi)?, &s)?;
    for w in [0.0, 0.5, 5.0] {
        let z = Complex::new(0.0, w);
        println!(
            "w = {w:>3}: |S M G_yv| = {:.1e}, |S M G_ya| = {:.3}",
            freq_response(&from_v, z)?.norm(),
            freq_response(&from_a, z)?.norm()
        );
    }

    // Sharing one input column makes attack and interaction indistinguishable.
    let mut shared = m;
    shared.x = shared.u.clone();
    let shared = Subsystem::new(shared)?;
    println!("shared column isolation possible: {}", check_isolation_existence(&shared)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
