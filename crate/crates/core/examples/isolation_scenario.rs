// Isolation filters keep the unattacked subsystem silent: only the
// detector next to the attacked inverter raises an alarm. Writes CSV and
// SVG artifacts to a temporary directory.

use retrodetect::scenario::cli::simulate_to_dir;
use retrodetect::scenario::{FilterChoice, ScenarioConfig};

pub fn run_example() -> retrodetect::Result<()> {
    let mut cfg = ScenarioConfig::minimal("R18");
    cfg.filters = FilterChoice::IsolationBessel;
    cfg.noise.std = 0.0;
    let dir = tempfile::tempdir()?;
    let result = simulate_to_dir(&cfg, 0, dir.path())?;
    for i in 0..result.nsubsystems() {
        let peak = result.residual_norms.column(i).iter().filter(|v| v.is_finite()).fold(0.0f64, |m, &v| m.max(v));
        let alarm = result.alarms[i].map_or("none".to_string(), |t| format!("{t:.3} s"));
        println!("subsystem {}: peak |eps|/gamma = {peak:.3e}, alarm {alarm}", i + 1);
    }
    let mut files: Vec<String> = std::fs::read_dir(dir.path())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    files.sort();
    println!("artifacts: {}", files.join(", "));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
