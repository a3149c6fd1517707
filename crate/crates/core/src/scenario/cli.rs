//! `retrodetect` command line. Exit codes: 0 success, 1 validation or usage
//! error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{load_config, FilterChoice, ScenarioConfig};
use super::engine::{check_design, design, set_label, simulate_design, Design, SimResult};
use super::export::{export_csv, read_series_csv, render_svg};
use crate::error::{Error, Result};
use crate::lti::spectral_abscissa;
use crate::resgen::GeneratorKind;

#[derive(Debug, Parser)]
#[command(name = "retrodetect", version, about = "Attack detection and isolation on a distribution feeder")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the structural checks and print one line per check.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute gains, filters and thresholds and write `design.json`.
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the scenario and write CSV, SVG and `summary.json`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `noise.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize one or more simulation output directories.
    Analyze {
        #[arg(long = "result", required = true)]
        result: Vec<PathBuf>,
    },
}

/// Matrix as a list of rows.
fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct FilterJson {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DesignJson {
    generator_kind: GeneratorKind,
    filters_kind: FilterChoice,
    attacked_bus: String,
    attacked_subsystem: usize,
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    gains: Vec<Vec<Vec<f64>>>,
    filters: Vec<Option<FilterJson>>,
}

/// Stability margin of the bank on one index set.
#[derive(Debug, Serialize, Deserialize)]
pub struct Margin {
    pub set: Vec<usize>,
    pub spectral_abscissa: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub generator_kind: GeneratorKind,
    pub gain_q: f64,
    pub filters: FilterChoice,
    pub seed: u64,
    pub attack_bus: String,
    pub attack_t0_s: f64,
    pub amplitude: f64,
    pub gamma: Vec<f64>,
    /// First crossing per subsystem, seconds.
    pub alarms: Vec<Option<f64>>,
    pub first_alarm: Option<f64>,
    pub margins: Vec<Margin>,
}

fn design_json(cfg: &ScenarioConfig, d: &Design) -> DesignJson {
    let grid = &d.compiled.grid_pu;
    DesignJson {
        generator_kind: cfg.generator_kind,
        filters_kind: cfg.filters,
        attacked_bus: grid.name(d.attacked_bus).to_string(),
        attacked_subsystem: d.attacked_subsystem + 1,
        gamma: d.detector.gamma().to_vec(),
        alpha: d.alpha.clone(),
        gains: d.gains.iter().map(rows).collect(),
        filters: d
            .filters
            .iter()
            .map(|f| {
                f.as_ref().map(|s| FilterJson {
                    a: rows(s.a()),
                    b: rows(s.b()),
                    c: rows(s.c()),
                    d: rows(s.d()),
                })
            })
            .collect(),
    }
}

fn margins(d: &Design) -> Result<Vec<Margin>> {
    d.family
        .sets()
        .iter()
        .map(|set| {
            Ok(Margin {
                set: set.iter().map(|i| i + 1).collect(),
                spectral_abscissa: spectral_abscissa(d.bank.assemble_on(set)?.a())?,
            })
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn load(path: &Path) -> Result<(ScenarioConfig, Design)> {
    let cfg = load_config(path)?;
    let (grid, part) = cfg.grid()?;
    let d = design(&cfg, &grid, &part)?;
    Ok((cfg, d))
}

fn cmd_check(config: &Path, out: &mut dyn Write) -> Result<bool> {
    let cfg = load_config(config)?;
    let (grid, part) = cfg.grid()?;
    let d = design(&cfg, &grid, &part)?;
    let lines = check_design(&grid, &part, &d)?;
    for l in &lines {
        let mark = if l.passed { "PASS" } else { "FAIL" };
        if l.detail.is_empty() {
            writeln!(out, "{mark} {}", l.name)?;
        } else {
            writeln!(out, "{mark} {}: {}", l.name, l.detail)?;
        }
    }
    Ok(lines.iter().all(|l| l.passed))
}

fn cmd_design(config: &Path, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let (cfg, d) = load(config)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join("design.json");
    write_json(&path, &design_json(&cfg, &d))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

/// Runs one simulation and writes every artifact into `dir`.
pub fn simulate_to_dir(cfg: &ScenarioConfig, seed: u64, dir: &Path) -> Result<SimResult> {
    let (grid, part) = cfg.grid()?;
    let d = design(cfg, &grid, &part)?;
    let result = simulate_design(cfg, &d, seed)?;
    export_csv(&result, dir)?;
    render_svg(&result, dir)?;
    let summary = Summary {
        generator_kind: cfg.generator_kind,
        gain_q: cfg.gain_q,
        filters: cfg.filters,
        seed,
        attack_bus: cfg.attack.bus.clone(),
        attack_t0_s: cfg.attack.t0_s,
        amplitude: cfg.attack.amplitude,
        gamma: result.gamma.clone(),
        alarms: result.alarms.clone(),
        first_alarm: result.first_alarm(),
        margins: margins(&d)?,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(result)
}

fn cmd_simulate(config: &Path, dir: &Path, seed: Option<u64>, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(cfg.noise.seed);
    let result = simulate_to_dir(&cfg, seed, dir)?;
    match result.first_alarm() {
        Some(t) => writeln!(out, "first alarm at {t:.3} s")?,
        None => writeln!(out, "no alarm")?,
    }
    writeln!(out, "wrote {}", dir.display())?;
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "none".into(), |t| format!("{t:.3} s"))
}

/// Spelling used in config files.
fn config_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_owned)).unwrap_or_default()
}

fn cmd_analyze(dirs: &[PathBuf], out: &mut dyn Write) -> Result<()> {
    let mut firsts = Vec::new();
    for dir in dirs {
        let text = std::fs::read_to_string(dir.join("summary.json"))?;
        let s: Summary = serde_json::from_str(&text)?;
        let (_, _, volt) = read_series_csv(&dir.join("voltages.csv"))?;
        let dev = volt.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        writeln!(
            out,
            "{}: {} q={} filters={} seed={}",
            dir.display(),
            config_name(&s.generator_kind),
            s.gain_q,
            config_name(&s.filters),
            s.seed
        )?;
        let alarms: Vec<String> = s
            .alarms
            .iter()
            .enumerate()
            .map(|(i, t)| format!("eps_{}={}", i + 1, fmt_time(*t)))
            .collect();
        writeln!(out, "  alarms: {}", alarms.join(", "))?;
        writeln!(out, "  first alarm: {}", fmt_time(s.first_alarm))?;
        writeln!(out, "  max voltage deviation: {dev:.6} pu")?;
        for m in &s.margins {
            let set: Vec<usize> = m.set.iter().map(|i| i - 1).collect();
            writeln!(out, "  margin on {}: {:.4}", set_label(&set), -m.spectral_abscissa)?;
        }
        firsts.push(s.first_alarm);
    }
    if firsts.len() > 1 {
        let decreasing = firsts.iter().all(Option::is_some)
            && firsts.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
        writeln!(
            out,
            "detection order: {}",
            if decreasing { "strictly decreasing" } else { "not strictly decreasing" }
        )?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let outcome = match &cli.cmd {
        Command::Check { config } => cmd_check(config, out).map(|ok| if ok { 0 } else { 1 }),
        Command::Design { config, out: dir } => cmd_design(config, dir, out).map(|_| 0),
        Command::Simulate { config, out: dir, seed } => cmd_simulate(config, dir, *seed, out).map(|_| 0),
        Command::Analyze { result } => cmd_analyze(result, out).map(|_| 0),
    };
    outcome.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        exit_code(&e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_str(&["retrodetect"]).0, 1);
        assert_eq!(run_str(&["retrodetect", "simulate", "--config"]).0, 1);
        assert_eq!(run_str(&["retrodetect", "analyze"]).0, 1);
        let (code, out, _) = run_str(&["retrodetect", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("simulate"));
    }

    #[test]
    fn bad_config_exits_one_and_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"attack": {"bus": "R18"}, "step_s": -1}"#).unwrap();
        let (code, _, err) = run_str(&["retrodetect", "check", "--config", path.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(err.contains("step_s"), "{err}");
        let (code, _, _) = run_str(&["retrodetect", "check", "--config", "/nonexistent/c.json"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn design_then_simulate_then_analyze() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig::minimal("R18");
        cfg.horizon_s = 0.5;
        cfg.step_s = 1e-2;
        cfg.attack.t0_s = 0.1;
        let path = dir.path().join("c.json");
        cfg.save(&path).unwrap();
        let p = path.to_str().unwrap();
        let (code, out, err) = run_str(&["retrodetect", "check", "--config", p]);
        assert_eq!(code, 0, "{out}{err}");
        assert!(out.lines().all(|l| l.starts_with("PASS")));

        let d = dir.path().join("design");
        assert_eq!(run_str(&["retrodetect", "design", "--config", p, "--out", d.to_str().unwrap()]).0, 0);
        let dj: DesignJson = serde_json::from_str(&std::fs::read_to_string(d.join("design.json")).unwrap()).unwrap();
        assert_eq!(dj.gamma.len(), 2);

        let s = dir.path().join("sim");
        let sp = s.to_str().unwrap();
        let (code, _, err) = run_str(&["retrodetect", "simulate", "--config", p, "--out", sp, "--seed", "3"]);
        assert_eq!(code, 0, "{err}");
        for f in ["residuals.csv", "voltages.csv", "events.csv", "residuals.svg", "voltages.svg", "summary.json"] {
            assert!(s.join(f).exists(), "{f}");
        }
        let (code, out, _) = run_str(&["retrodetect", "analyze", "--result", sp, "--result", sp]);
        assert_eq!(code, 0);
        assert!(out.contains("max voltage deviation"));
        assert!(out.contains("not strictly decreasing"));
    }
}
