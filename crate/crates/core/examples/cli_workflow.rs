// The command-line workflow driven in-process: check, design, simulate a
// three-gain sweep, then compare the runs.

use retrodetect::resgen::GeneratorKind;
use retrodetect::scenario::{cli, ScenarioConfig};

fn invoke(args: &[&str]) -> retrodetect::Result<String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(args.iter().copied(), &mut out, &mut err);
    if code != 0 {
        let msg = format!("`{}` exited with {code}: {}", args.join(" "), String::from_utf8_lossy(&err));
        return Err(retrodetect::Error::Invalid(msg));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

pub fn run_example() -> retrodetect::Result<()> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let mut results = Vec::new();
    for (tag, kind, q) in [("naive", GeneratorKind::Naive, 1.0), ("q1", GeneratorKind::Retrofit, 1.0), ("q10", GeneratorKind::Retrofit, 10.0)] {
        let mut cfg = ScenarioConfig::minimal("R18");
        cfg.generator_kind = kind;
        cfg.gain_q = q;
        cfg.horizon_s = 8.0;
        let path = root.join(format!("{tag}.json"));
        cfg.save(&path)?;
        let out = root.join(tag);
        let (p, o) = (path.to_string_lossy().into_owned(), out.to_string_lossy().into_owned());
        if tag == "naive" {
            print!("{}", invoke(&["retrodetect", "check", "--config", &p])?);
            invoke(&["retrodetect", "design", "--config", &p, "--out", &o])?;
        }
        invoke(&["retrodetect", "simulate", "--config", &p, "--out", &o, "--seed", "1"])?;
        results.push(o);
    }
    let mut args = vec!["retrodetect", "analyze"];
    for r in &results {
        args.extend(["--result", r.as_str()]);
    }
    print!("{}", invoke(&args)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
