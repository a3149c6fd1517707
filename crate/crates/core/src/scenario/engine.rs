use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{FilterChoice, ScenarioConfig};
use crate::detector::{dc_sensitivity, DetectorConfig};
use crate::distflow::{build_subsystems, check_passivity_stability, AttackPorts, CompiledGrid, Partition, RadialGrid};
use crate::error::{Error, Result};
use crate::isolation::{build_isolation_filter, cascade_filters, check_isolation_existence, design_bessel2};
use crate::lti::linalg::solve;
use crate::lti::{block_diag, discretize_zoh, invariant_zeros, spectral_abscissa, StateSpace};
use crate::netsys::{check_assumption1, check_assumption2, check_well_posed, DisconnectionFamily, PortLayout};
use crate::resgen::{build_luenberger, build_naive, build_retrofit, monitor, GeneratorBank, GeneratorKind, LocalGenerator};
use crate::riccati::design_observer_gain;

/// Everything fixed before the run: plant, bank, thresholds.
#[derive(Debug, Clone)]
pub struct Design {
    /// Plant with a single attack port on the attacked bus.
    pub compiled: CompiledGrid,
    pub gains: Vec<DMatrix<f64>>,
    pub filters: Vec<Option<StateSpace>>,
    pub bank: GeneratorBank,
    pub detector: DetectorConfig,
    /// DC sensitivities behind the thresholds.
    pub alpha: Vec<f64>,
    /// `(subsystem, bus)` of the attack.
    pub attacked_subsystem: usize,
    pub attacked_bus: usize,
    pub family: DisconnectionFamily,
}

fn local_generator(kind: GeneratorKind, sub: &crate::netsys::Subsystem, h: &DMatrix<f64>) -> Result<LocalGenerator> {
    match kind {
        GeneratorKind::Naive => Ok(build_naive(sub)),
        GeneratorKind::Luenberger => build_luenberger(sub, h),
        GeneratorKind::Retrofit => build_retrofit(sub, h),
    }
}

/// `a_I → ε_I` of the monitor on `set`, with `r = 0` and no noise.
fn attack_map(compiled: &CompiledGrid, bank: &GeneratorBank, set: &[usize]) -> Result<StateSpace> {
    let (subs, l) = (&compiled.subsystems, &compiled.interconnection);
    let mon = monitor(subs, l, bank, set)?;
    let layout = PortLayout::new(subs, set);
    let ne: usize = bank.residual_spans(set).iter().map(|s| s.1).sum();
    let cols: Vec<usize> = (layout.n_r()..layout.n_r() + layout.n_a()).collect();
    let rows: Vec<usize> = (mon.noutputs() - ne..mon.noutputs()).collect();
    mon.select_inputs(&cols)?.select_outputs(&rows)
}

pub fn design(cfg: &ScenarioConfig, grid: &RadialGrid, partition: &Partition) -> Result<Design> {
    let attacked_bus = grid
        .index_of(&cfg.attack.bus)
        .ok_or_else(|| Error::validation("attack.bus", format!("unknown bus {}", cfg.attack.bus)))?;
    let compiled = build_subsystems(grid, partition, &AttackPorts::Buses(vec![attacked_bus]))?;
    let n = compiled.subsystems.len();
    let family = cfg.family(n)?;
    let gains = compiled
        .subsystems
        .iter()
        .map(|s| match cfg.generator_kind {
            GeneratorKind::Naive => Ok(DMatrix::zeros(s.nstates(), s.dim_y())),
            _ => design_observer_gain(&s.matrices().a, &s.matrices().c, cfg.gain_q, cfg.gain_r),
        })
        .collect::<Result<Vec<_>>>()?;
    let bessel = if cfg.filters.bessel() {
        Some(design_bessel2(cfg.bessel_cutoff_hz)?)
    } else {
        None
    };
    let mut filters = Vec::with_capacity(n);
    let mut locals = Vec::with_capacity(n);
    for (sub, h) in compiled.subsystems.iter().zip(&gains) {
        let p = sub.dim_y();
        let filter = match (cfg.filters, &bessel) {
            (FilterChoice::None, _) => None,
            (FilterChoice::Bessel, Some(b)) => Some(block_diag(&vec![b.clone(); p])?),
            (FilterChoice::Isolation, _) => Some(build_isolation_filter(sub, h)?),
            (FilterChoice::IsolationBessel, Some(b)) => Some(cascade_filters(&build_isolation_filter(sub, h)?, b)?),
            _ => unreachable!("bessel filter designed whenever requested"),
        };
        let mut g = local_generator(cfg.generator_kind, sub, h)?;
        if let Some(s) = &filter {
            g = g.with_filter(s.clone())?;
        }
        filters.push(filter);
        locals.push(g);
    }
    let bank = GeneratorBank::new(locals, compiled.interconnection.clone())?;
    let (attacked_subsystem, port) = compiled
        .attack_port(attacked_bus)
        .ok_or_else(|| Error::validation("attack.bus", format!("{} has no generation", cfg.attack.bus)))?;

    // Thresholds: the attacked subsystem is calibrated on the attacked port,
    // the others on the most sensitive of their own generation buses.
    let all: Vec<usize> = (0..n).collect();
    let spans = bank.residual_spans(&all);
    let own_rows = |i: usize| -> Vec<usize> { (spans[i].0..spans[i].0 + spans[i].1).collect() };
    let design_map = attack_map(&compiled, &bank, &all)?;
    let every_port = build_subsystems(grid, partition, &AttackPorts::AllGeneration)?;
    let every_map = attack_map(&every_port, &bank, &all)?;
    let every_layout = PortLayout::new(&every_port.subsystems, &all);
    let n_r = every_layout.n_r();
    let mut alpha = Vec::with_capacity(n);
    for i in 0..n {
        let a = if i == attacked_subsystem {
            dc_sensitivity(&design_map.select_outputs(&own_rows(i))?, port)?
        } else {
            let map = every_map.select_outputs(&own_rows(i))?;
            let (off, len) = every_layout.a[i];
            (off - n_r..off - n_r + len)
                .map(|c| dc_sensitivity(&map, c))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max)
        };
        if !(a > 0.0) {
            return Err(Error::Assumption(format!(
                "residual of subsystem {} does not respond to attacks at steady state",
                i + 1
            )));
        }
        alpha.push(a);
    }
    let a_bar = cfg.calibration_amplitude();
    let gamma = alpha.iter().map(|a| cfg.threshold_scale * a_bar * a).collect();
    Ok(Design {
        compiled,
        gains,
        filters,
        bank,
        detector: DetectorConfig::new(gamma, a_bar)?,
        alpha,
        attacked_subsystem,
        attacked_bus,
        family,
    })
}

/// One line of the pre-flight report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub(crate) fn set_label(set: &[usize]) -> String {
    let s: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", s.join(","))
}

/// Structural checks the run depends on, one line per check and index set.
pub fn check_design(grid: &RadialGrid, partition: &Partition, d: &Design) -> Result<Vec<CheckLine>> {
    let (subs, l) = (&d.compiled.subsystems, &d.compiled.interconnection);
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| out.push(CheckLine { name, passed, detail });
    for set in d.family.sets() {
        let wp = check_well_posed(subs, set, l)?;
        push(format!("well-posed {}", set_label(set)), wp, String::new());
    }
    let pass = check_passivity_stability(grid, partition, &d.family)?;
    push(
        "reactance sensitivity X positive definite".into(),
        pass.x_min_eigenvalue > 0.0 && pass.x_asymmetry < 1e-10,
        format!("min eigenvalue {:.3e}", pass.x_min_eigenvalue),
    );
    for c in check_assumption1(subs, l, &d.family).checks {
        let detail = c.value.map_or_else(|| c.error.clone().unwrap_or_default(), |v| format!("spectral abscissa {v:.4}"));
        push(format!("plant stable {}", set_label(&c.set)), c.passed, detail);
    }
    for c in check_assumption2(subs, l, &d.family).checks {
        let detail = c.value.map_or_else(|| c.error.clone().unwrap_or_default(), |v| {
            if v == 0.0 && c.passed {
                "no attack ports".to_string()
            } else {
                format!("normal rank {v}")
            }
        });
        push(format!("attack left invertible {}", set_label(&c.set)), c.passed, detail);
    }
    for set in d.family.sets() {
        let bank = d.bank.assemble_on(set)?;
        let s = spectral_abscissa(bank.a())?;
        push(format!("generator bank stable {}", set_label(set)), s < 0.0, format!("spectral abscissa {s:.4}"));
    }
    for (i, sub) in subs.iter().enumerate() {
        let ok = check_isolation_existence(sub)?;
        push(format!("isolation filter exists for {}", i + 1), ok, String::new());
    }
    for set in d.family.sets() {
        if !set.contains(&d.attacked_subsystem) {
            continue;
        }
        let map = attack_map(&d.compiled, &d.bank.separate_to(set)?, set)?;
        let zeros = invariant_zeros(&map)?;
        let worst = zeros.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let detail = if zeros.is_empty() {
            "no invariant zeros".to_string()
        } else {
            format!("{} zeros, max real part {worst:.4}", zeros.len())
        };
        push(format!("attack-to-residual zeros stable {}", set_label(set)), zeros.iter().all(|z| z.re < 0.0), detail);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    AttackOnset { bus: String },
    Alarm { subsystem: usize },
    Disconnection { removed: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn type_name(&self) -> &'static str {
        match self.kind {
            EventKind::AttackOnset { .. } => "attack",
            EventKind::Alarm { .. } => "alarm",
            EventKind::Disconnection { .. } => "disconnection",
        }
    }

    /// Human-readable detail with 1-based subsystem numbers.
    pub fn detail(&self) -> String {
        match &self.kind {
            EventKind::AttackOnset { bus } => format!("bus {bus}"),
            EventKind::Alarm { subsystem } => format!("subsystem {}", subsystem + 1),
            EventKind::Disconnection { removed } => format!("removed {}", set_label(removed)),
        }
    }
}

/// Sampled outcome of one scenario. Residuals are per-unit of `γ_i`,
/// voltages are `v_k − v̄₀` per-unit of `v̄₀`; samples of removed
/// subsystems are NaN.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub step: f64,
    pub time: Vec<f64>,
    pub residual_norms: DMatrix<f64>,
    pub residuals: Vec<DMatrix<f64>>,
    pub bus_names: Vec<String>,
    pub voltages: DMatrix<f64>,
    pub gamma: Vec<f64>,
    pub alarms: Vec<Option<f64>>,
    pub events: Vec<Event>,
}

impl SimResult {
    pub fn nsubsystems(&self) -> usize {
        self.residual_norms.ncols()
    }

    /// First alarm time over all detectors.
    pub fn first_alarm(&self) -> Option<f64> {
        self.alarms.iter().flatten().copied().reduce(f64::min)
    }

    /// `max |v_k − v̄₀|` over buses and the samples in `[from, to)`, ignoring NaN.
    pub fn max_voltage_deviation(&self, from: f64, to: f64) -> f64 {
        let mut m = 0.0f64;
        for (k, &t) in self.time.iter().enumerate() {
            if t >= from && t < to {
                for v in self.voltages.row(k).iter().filter(|v| v.is_finite()) {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }
}

/// Equilibrium `z* = −A⁻¹ B u`.
fn equilibrium(sys: &StateSpace, u: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = -(sys.b() * u);
    let z = solve(sys.a(), &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), "equilibrium")?;
    Ok(z.column(0).into_owned())
}

struct Phase {
    set: Vec<usize>,
    bank: GeneratorBank,
    layout: PortLayout,
    step_map: DMatrix<f64>,
    /// Output offset of each residual.
    eps: Vec<(usize, usize)>,
    nstates: usize,
    nplant: usize,
}

impl Phase {
    fn new(d: &Design, bank: GeneratorBank, set: Vec<usize>, step: f64) -> Result<Self> {
        let (subs, l) = (&d.compiled.subsystems, &d.compiled.interconnection);
        let mon = monitor(subs, l, &bank, &set)?;
        let disc = discretize_zoh(&mon, step)?;
        let (n, m, p) = (mon.nstates(), mon.ninputs(), mon.noutputs());
        let mut step_map = DMatrix::zeros(n + p, n + m);
        step_map.view_mut((0, 0), (n, n)).copy_from(&disc.ad);
        step_map.view_mut((0, n), (n, m)).copy_from(&disc.bd);
        step_map.view_mut((n, 0), (p, n)).copy_from(mon.c());
        step_map.view_mut((n, n), (p, m)).copy_from(mon.d());
        let layout = PortLayout::new(subs, &set);
        let ne: usize = bank.residual_spans(&set).iter().map(|s| s.1).sum();
        let eps = bank.residual_spans(&set).iter().map(|&(o, len)| (p - ne + o, len)).collect();
        let nplant = layout.x.iter().map(|s| s.1).sum();
        Ok(Self {
            set,
            bank,
            layout,
            step_map,
            eps,
            nstates: n,
            nplant,
        })
    }

    fn input(&self, d: &Design, attack: f64, noise: &[DVector<f64>]) -> DVector<f64> {
        let mut u = Vec::new();
        for &i in &self.set {
            u.extend(d.compiled.nominal_reference(i).iter());
        }
        for &i in &self.set {
            let na = d.compiled.subsystems[i].dim_a();
            u.extend((0..na).map(|_| if i == d.attacked_subsystem { attack } else { 0.0 }));
        }
        for &i in &self.set {
            u.extend(noise[i].iter());
        }
        DVector::from_vec(u)
    }
}

/// Refuses to run when the plant or the bank is unstable on some set of the family.
pub fn preflight(d: &Design) -> Result<()> {
    let (subs, l) = (&d.compiled.subsystems, &d.compiled.interconnection);
    let a1 = check_assumption1(subs, l, &d.family);
    if !a1.passed() {
        let sets: Vec<String> = a1.failures().iter().map(|c| set_label(&c.set)).collect();
        return Err(Error::Assumption(format!("plant unstable on {}", sets.join(", "))));
    }
    let a2 = check_assumption2(subs, l, &d.family);
    if !a2.passed() {
        let sets: Vec<String> = a2.failures().iter().map(|c| set_label(&c.set)).collect();
        return Err(Error::Assumption(format!("attack not left invertible on {}", sets.join(", "))));
    }
    for set in d.family.sets() {
        let s = spectral_abscissa(d.bank.assemble_on(set)?.a())?;
        if s >= 0.0 {
            return Err(Error::Assumption(format!(
                "residual generator bank unstable on {} (spectral abscissa {s:.4})",
                set_label(set)
            )));
        }
    }
    Ok(())
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimResult> {
    let (grid, partition) = cfg.grid()?;
    let d = design(cfg, &grid, &partition)?;
    simulate_design(cfg, &d, cfg.noise.seed)
}

/// The attack/detection/separation timeline for a fixed design.
pub fn simulate_design(cfg: &ScenarioConfig, d: &Design, seed: u64) -> Result<SimResult> {
    preflight(d)?;
    let n = d.compiled.subsystems.len();
    let h = cfg.step_s;
    let samples = ((cfg.horizon_s / h).round() as usize).max(1);
    let k0 = (cfg.attack.t0_s / h).round() as usize;
    let gamma = d.detector.gamma().to_vec();
    let grid = &d.compiled.grid_pu;
    let buses = grid.non_root();
    let bus_names: Vec<String> = buses.iter().map(|&b| grid.name(b).to_string()).collect();
    let normal = Normal::new(0.0, cfg.noise.std).map_err(|e| Error::validation("noise.std", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ny: Vec<usize> = d.compiled.subsystems.iter().map(|s| s.dim_y()).collect();

    let mut residual_norms = DMatrix::from_element(samples, n, f64::NAN);
    let mut residuals: Vec<DMatrix<f64>> = (0..n)
        .map(|i| DMatrix::from_element(samples, d.bank.locals()[i].residual_dim(), f64::NAN))
        .collect();
    let mut voltages = DMatrix::from_element(samples, buses.len(), f64::NAN);
    let mut alarms = vec![None; n];
    let mut events = Vec::new();

    let all: Vec<usize> = (0..n).collect();
    let mut phase = Phase::new(d, d.bank.separate_to(&all)?, all, h)?;
    let zero_noise: Vec<DVector<f64>> = ny.iter().map(|&p| DVector::zeros(p)).collect();
    let mut z = equilibrium(
        &monitor(&d.compiled.subsystems, &d.compiled.interconnection, &phase.bank, &phase.set)?,
        &phase.input(d, 0.0, &zero_noise),
    )?;
    let mut xu = DVector::zeros(0);
    for k in 0..samples {
        let t = k as f64 * h;
        if k == k0 + 1 {
            events.push(Event {
                time: t,
                kind: EventKind::AttackOnset { bus: cfg.attack.bus.clone() },
            });
        }
        let attack = if k > k0 { cfg.attack.amplitude } else { 0.0 };
        // Noise for every subsystem, so the stream does not depend on separation.
        let noise: Vec<DVector<f64>> = ny
            .iter()
            .map(|&p| DVector::from_fn(p, |_, _| if cfg.noise.std > 0.0 { normal.sample(&mut rng) } else { 0.0 }))
            .collect();
        let u = phase.input(d, attack, &noise);
        let (ns, nu) = (phase.nstates, u.len());
        if xu.len() != ns + nu {
            xu = DVector::zeros(ns + nu);
        }
        xu.rows_mut(0, ns).copy_from(&z);
        xu.rows_mut(ns, nu).copy_from(&u);
        let next = &phase.step_map * &xu;
        let out = next.rows(ns, next.len() - ns);

        let mut fired = Vec::new();
        for (pos, &i) in phase.set.iter().enumerate() {
            let (o, len) = phase.eps[pos];
            let e = out.rows(o, len);
            residuals[i].row_mut(k).copy_from(&(e.transpose() / gamma[i]));
            let norm = e.norm();
            residual_norms[(k, i)] = norm / gamma[i];
            if alarms[i].is_none() && norm > gamma[i] {
                alarms[i] = Some(t);
                fired.push(i);
            }
            let (wo, _) = phase.layout.w[pos];
            for (j, &b) in d.compiled.groups[i].buses.iter().enumerate() {
                let col = buses.iter().position(|&x| x == b).expect("non-root bus");
                voltages[(k, col)] = out[wo + j].max(0.0).sqrt() - grid.v0();
            }
        }
        z = next.rows(0, ns).into_owned();
        if fired.is_empty() {
            continue;
        }
        let mut removed: Vec<usize> = Vec::new();
        for &i in &fired {
            events.push(Event {
                time: t,
                kind: EventKind::Alarm { subsystem: i },
            });
            removed.extend(d.family.removed_on_alarm(i).into_iter().filter(|j| phase.set.contains(j)));
        }
        removed.sort_unstable();
        removed.dedup();
        if removed.is_empty() {
            continue;
        }
        events.push(Event {
            time: t,
            kind: EventKind::Disconnection { removed: removed.clone() },
        });
        let remaining: Vec<usize> = phase.set.iter().copied().filter(|i| !removed.contains(i)).collect();
        if remaining.is_empty() {
            break;
        }
        if !d.family.contains(&remaining) {
            return Err(Error::Assumption(format!(
                "separation leaves {} which is outside the disconnection family",
                set_label(&remaining)
            )));
        }
        // Carry plant and bank states of the survivors over verbatim.
        let bank_spans = phase.bank.state_spans(&phase.set);
        let mut carried = Vec::new();
        for (pos, &i) in phase.set.iter().enumerate() {
            if remaining.contains(&i) {
                let (o, len) = phase.layout.x[pos];
                carried.extend(z.rows(o, len).iter());
            }
        }
        for (pos, &i) in phase.set.iter().enumerate() {
            if remaining.contains(&i) {
                let (o, len) = bank_spans[pos];
                carried.extend(z.rows(phase.nplant + o, len).iter());
            }
        }
        let bank = phase.bank.separate(&removed)?;
        phase = Phase::new(d, bank, remaining, h)?;
        z = DVector::from_vec(carried);
    }
    Ok(SimResult {
        step: h,
        time: (0..samples).map(|k| k as f64 * h).collect(),
        residual_norms,
        residuals,
        bus_names,
        voltages,
        gamma,
        alarms,
        events,
    })
}
