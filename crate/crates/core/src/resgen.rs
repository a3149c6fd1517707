//! Local residual generators and the distributed bank they form.
//!
//! Every local generator `i` reads the measured output `y_i`, the known
//! reference `r_i` and the communicated interaction estimate `v̂_i`, and
//! produces a residual `ε_i` plus an interaction estimate `ŵ_i`. The bank
//! closes `v̂ = L̂ ŵ` with `L̂ = L` over the active index set.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::compose::close_static;
use crate::lti::linalg::{block_diag_mat, hstack, vstack, C64};
use crate::lti::{
    block_diag, invariant_zeros, is_hurwitz, left_invertible, series, spectral_abscissa, StateSpace,
};
use crate::netsys::{assemble, check_index_set, Interconnection, Port, PortLayout, Subsystem, SubsystemMatrices};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Open-loop model copy, no error feedback.
    Naive,
    /// Decentralized observer with error feedback `μ = H(y − ŷ)` entering the state.
    Luenberger,
    /// Observer whose communicated estimate is rectified by an auxiliary state.
    Retrofit,
}

#[derive(Debug, Clone)]
pub struct LocalGenerator {
    kind: GeneratorKind,
    base: Subsystem,
    h: DMatrix<f64>,
    filter: Option<StateSpace>,
}

pub fn build_naive(sub: &Subsystem) -> LocalGenerator {
    LocalGenerator {
        kind: GeneratorKind::Naive,
        base: sub.clone(),
        h: DMatrix::zeros(sub.nstates(), sub.dim_y()),
        filter: None,
    }
}

/// Observer with error dynamics `A − HC`. The feedback enters as
/// `+H(y − ŷ)` so that `A − HC` is the error matrix.
pub fn build_luenberger(sub: &Subsystem, h: &DMatrix<f64>) -> Result<LocalGenerator> {
    build_with_gain(sub, h, GeneratorKind::Luenberger)
}

pub fn build_retrofit(sub: &Subsystem, h: &DMatrix<f64>) -> Result<LocalGenerator> {
    build_with_gain(sub, h, GeneratorKind::Retrofit)
}

fn build_with_gain(sub: &Subsystem, h: &DMatrix<f64>, kind: GeneratorKind) -> Result<LocalGenerator> {
    if h.shape() != (sub.nstates(), sub.dim_y()) {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, expected {}x{}",
            h.nrows(),
            h.ncols(),
            sub.nstates(),
            sub.dim_y()
        )));
    }
    let m = sub.matrices();
    let err = &m.a - h * &m.c;
    if !is_hurwitz(&err, 0.0)? {
        return Err(Error::NotHurwitz(format!(
            "A - HC has spectral abscissa {:.4e}",
            spectral_abscissa(&err)?
        )));
    }
    Ok(LocalGenerator {
        kind,
        base: sub.clone(),
        h: h.clone(),
        filter: None,
    })
}

/// `M_i = (A − HC, H, −C, I)`, the map from raw output error to residual.
pub fn realize_mi(sub: &Subsystem, h: &DMatrix<f64>) -> Result<StateSpace> {
    let m = sub.matrices();
    let p = sub.dim_y();
    StateSpace::new(&m.a - h * &m.c, h.clone(), -m.c.clone(), DMatrix::identity(p, p))
}

impl LocalGenerator {
    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.h
    }
    pub fn base(&self) -> &Subsystem {
        &self.base
    }
    pub fn filter(&self) -> Option<&StateSpace> {
        self.filter.as_ref()
    }

    /// Attaches `S_i`, acting on the raw residual `y − ŷ`. Requires `S_i`
    /// stable and `S_i M_i G_{y_i a_i}` left invertible.
    pub fn with_filter(mut self, s: StateSpace) -> Result<Self> {
        if s.ninputs() != self.base.dim_y() {
            return Err(Error::Dimension(format!(
                "filter has {} inputs, residual has {} channels",
                s.ninputs(),
                self.base.dim_y()
            )));
        }
        if s.nstates() > 0 && !is_hurwitz(s.a(), 0.0)? {
            return Err(Error::NotHurwitz("residual filter must be stable".into()));
        }
        // Only the attack channel has to survive the filter; an isolation
        // filter annihilates the interaction directions on purpose.
        if self.base.dim_a() > 0 {
            let ga = self.base.local_map(Port::A, Port::Y);
            let chain = series(&series(&ga, &realize_mi(&self.base, &self.h)?)?, &s)?;
            if !left_invertible(&chain)? {
                return Err(Error::Invalid("filtered attack channel S M G_ya is not left invertible".into()));
            }
        }
        self.filter = Some(s);
        Ok(self)
    }

    pub fn residual_dim(&self) -> usize {
        self.filter.as_ref().map_or(self.base.dim_y(), StateSpace::noutputs)
    }

    pub fn nstates(&self) -> usize {
        let n = self.base.nstates();
        let core = if self.kind == GeneratorKind::Retrofit { 2 * n } else { n };
        core + self.filter.as_ref().map_or(0, StateSpace::nstates)
    }

    /// Unfiltered core: inputs `[y; r; v̂]`, outputs `[y − ŷ; ŵ]`.
    fn core(&self) -> StateSpace {
        let m = self.base.matrices();
        let (n, p) = (self.base.nstates(), self.base.dim_y());
        let dw = self.base.dim_w();
        let h = &self.h;
        // Observer state x̂.
        let ax = &m.a - h * &m.c;
        let bx = hstack(&[h, &(&m.b - h * &m.d), &(&m.u - h * &m.v)]);
        let ce = -m.c.clone();
        let de = hstack(&[&DMatrix::identity(p, p), &(-&m.d), &(-&m.v)]);
        let cw = m.e.clone();
        let dw_ = hstack(&[&DMatrix::zeros(dw, p), &m.f, &m.w]);
        let d = vstack(&[&de, &dw_]);
        match self.kind {
            GeneratorKind::Naive | GeneratorKind::Luenberger => {
                let (a, b) = if self.kind == GeneratorKind::Naive {
                    (m.a.clone(), hstack(&[&DMatrix::zeros(n, p), &m.b, &m.u]))
                } else {
                    (ax, bx)
                };
                StateSpace::new(a, b, vstack(&[&ce, &cw]), d).expect("consistent generator blocks")
            }
            GeneratorKind::Retrofit => {
                // χ̂' = A χ̂ + H(y − ŷ), ŵ gains −E χ̂.
                let mut a = block_diag_mat(&[&ax, &m.a]);
                a.view_mut((n, 0), (n, n)).copy_from(&(-(h * &m.c)));
                let bchi = hstack(&[h, &(-(h * &m.d)), &(-(h * &m.v))]);
                let b = vstack(&[&bx, &bchi]);
                let c = vstack(&[&hstack(&[&ce, &DMatrix::zeros(p, n)]), &hstack(&[&cw, &(-&m.e)])]);
                StateSpace::new(a, b, c, d).expect("consistent generator blocks")
            }
        }
    }

    /// Inputs `[y; r; v̂]`, outputs `[ε; ŵ]` with the filter applied to ε.
    pub fn realization(&self) -> Result<StateSpace> {
        let core = self.core();
        match &self.filter {
            None => Ok(core),
            Some(s) => {
                let pass = StateSpace::identity(self.base.dim_w());
                series(&core, &block_diag(&[s.clone(), pass])?)
            }
        }
    }
}

/// Local generators coupled by `L̂ = L` over an active set.
#[derive(Debug, Clone)]
pub struct GeneratorBank {
    locals: Vec<LocalGenerator>,
    l_hat: Interconnection,
    active: Vec<usize>,
}

impl GeneratorBank {
    pub fn new(locals: Vec<LocalGenerator>, l: Interconnection) -> Result<Self> {
        if locals.len() != l.len() {
            return Err(Error::Dimension(format!(
                "{} generators for {} interconnection blocks",
                locals.len(),
                l.len()
            )));
        }
        for (i, g) in locals.iter().enumerate() {
            let (vi, wi) = (l.block(i, i).nrows(), l.block(i, i).ncols());
            if vi != g.base.dim_v() || wi != g.base.dim_w() {
                return Err(Error::Dimension(format!("generator {i} ports do not match L")));
            }
        }
        let active = (0..locals.len()).collect();
        Ok(Self {
            locals,
            l_hat: l,
            active,
        })
    }

    pub fn locals(&self) -> &[LocalGenerator] {
        &self.locals
    }
    pub fn active(&self) -> &[usize] {
        &self.active
    }
    pub fn interconnection(&self) -> &Interconnection {
        &self.l_hat
    }

    /// Bank on the active set: inputs `(y_I, r_I)`, outputs `(ε_I, ŵ_I, v̂_I)`.
    pub fn assemble(&self) -> Result<StateSpace> {
        self.assemble_on(&self.active)
    }

    /// Bank restricted to `set` (which must lie inside the active set).
    pub fn assemble_on(&self, set: &[usize]) -> Result<StateSpace> {
        check_index_set(set, self.locals.len())?;
        if let Some(bad) = set.iter().find(|i| !self.active.contains(i)) {
            return Err(Error::Invalid(format!("generator {bad} is not active")));
        }
        let parts = set
            .iter()
            .map(|&i| self.locals[i].realization())
            .collect::<Result<Vec<_>>>()?;
        let stacked = block_diag(&parts)?;
        let mut cols = Vec::new();
        for pick in 0..3 {
            let mut off = 0;
            for &i in set {
                let b = &self.locals[i].base;
                let sizes = [b.dim_y(), b.dim_r(), b.dim_v()];
                let start = off + sizes[..pick].iter().sum::<usize>();
                cols.extend(start..start + sizes[pick]);
                off += sizes.iter().sum::<usize>();
            }
        }
        let mut rows = Vec::new();
        for pick in 0..2 {
            let mut off = 0;
            for &i in set {
                let g = &self.locals[i];
                let sizes = [g.residual_dim(), g.base.dim_w()];
                let start = off + sizes[..pick].iter().sum::<usize>();
                rows.extend(start..start + sizes[pick]);
                off += sizes.iter().sum::<usize>();
            }
        }
        let g = stacked.select_inputs(&cols)?.select_outputs(&rows)?;
        let ext_in: usize = set.iter().map(|&i| self.locals[i].base.dim_y() + self.locals[i].base.dim_r()).sum();
        let ext_out: usize = set.iter().map(|&i| self.locals[i].residual_dim()).sum();
        let li = self.l_hat.restrict(set)?;
        close_static(&g, ext_in, ext_out, li.matrix())
    }

    /// Switches off the communication of `removed`; the remaining
    /// generators keep their state layout.
    pub fn separate(&self, removed: &[usize]) -> Result<Self> {
        if let Some(bad) = removed.iter().find(|i| !self.active.contains(i)) {
            return Err(Error::Invalid(format!("generator {bad} is not active")));
        }
        let active: Vec<usize> = self.active.iter().copied().filter(|i| !removed.contains(i)).collect();
        if active.is_empty() {
            return Err(Error::Invalid("separation would remove every generator".into()));
        }
        Ok(Self {
            locals: self.locals.clone(),
            l_hat: self.l_hat.clone(),
            active,
        })
    }

    /// Bank with exactly `set` active.
    pub fn separate_to(&self, set: &[usize]) -> Result<Self> {
        let removed: Vec<usize> = self.active().iter().copied().filter(|i| !set.contains(i)).collect();
        if removed.is_empty() {
            Ok(self.clone())
        } else {
            self.separate(&removed)
        }
    }

    /// `(offset, len)` of each generator's state in a bank assembled on `set`.
    pub fn state_spans(&self, set: &[usize]) -> Vec<(usize, usize)> {
        let mut off = 0;
        set.iter()
            .map(|&i| {
                let len = self.locals[i].nstates();
                let s = (off, len);
                off += len;
                s
            })
            .collect()
    }

    /// `(offset, len)` of each residual inside `ε_I`.
    pub fn residual_spans(&self, set: &[usize]) -> Vec<(usize, usize)> {
        let mut off = 0;
        set.iter()
            .map(|&i| {
                let len = self.locals[i].residual_dim();
                let s = (off, len);
                off += len;
                s
            })
            .collect()
    }
}

/// Plant and bank on one active set, fed by the same `r` with measurement
/// noise `n` added to `y` before the bank. Inputs `[r_I; a_I; n_I]`,
/// outputs `[y_I; w_I; v_I; ε_I]`; state `[x_plant; x_bank]`.
pub fn monitor(subs: &[Subsystem], l: &Interconnection, bank: &GeneratorBank, set: &[usize]) -> Result<StateSpace> {
    let plant = assemble(subs, l, set)?;
    let layout = PortLayout::new(subs, set);
    let bk = bank.assemble_on(set)?;
    let (nr, na, ny) = (layout.n_r(), layout.n_a(), layout.n_y());
    let ne: usize = bank.residual_spans(set).iter().map(|s| s.1).sum();
    let (np, nb) = (plant.nstates(), bk.nstates());
    let cy = plant.c().rows(0, ny).into_owned();
    let dyr = plant.d().view((0, 0), (ny, nr)).into_owned();
    let dya = plant.d().view((0, nr), (ny, na)).into_owned();
    let bky = bk.b().columns(0, ny).into_owned();
    let bkr = bk.b().columns(ny, nr).into_owned();
    let ck = bk.c().rows(0, ne).into_owned();
    let dky = bk.d().view((0, 0), (ne, ny)).into_owned();
    let dkr = bk.d().view((0, ny), (ne, nr)).into_owned();

    let mut a = block_diag_mat(&[plant.a(), bk.a()]);
    a.view_mut((np, 0), (nb, np)).copy_from(&(&bky * &cy));
    let bp = hstack(&[plant.b(), &DMatrix::zeros(np, ny)]);
    let bb = hstack(&[&(&bky * &dyr + &bkr), &(&bky * &dya), &bky]);
    let b = vstack(&[&bp, &bb]);
    let c = vstack(&[
        &hstack(&[plant.c(), &DMatrix::zeros(plant.noutputs(), nb)]),
        &hstack(&[&(&dky * &cy), &ck]),
    ]);
    let d = vstack(&[
        &hstack(&[plant.d(), &DMatrix::zeros(plant.noutputs(), ny)]),
        &hstack(&[&(&dky * &dyr + &dkr), &(&dky * &dya), &dky]),
    ]);
    StateSpace::new(a, b, c, d)
}

/// Structural report of the attack-to-residual map on one index set.
#[derive(Debug, Clone)]
pub struct AttackAnalysis {
    /// `a_I → ε_I` with `r_I = 0`.
    pub map: StateSpace,
    pub abscissa: f64,
    pub stable: bool,
    pub left_invertible: bool,
    pub zeros: Vec<C64>,
    pub zeros_stable: bool,
}

pub fn analyze_attack_to_residual(
    subs: &[Subsystem],
    l: &Interconnection,
    bank: &GeneratorBank,
    set: &[usize],
) -> Result<AttackAnalysis> {
    let full = monitor(subs, l, bank, set)?;
    let layout = PortLayout::new(subs, set);
    let (nr, na) = (layout.n_r(), layout.n_a());
    let plant_out = full.noutputs() - bank.residual_spans(set).iter().map(|s| s.1).sum::<usize>();
    let cols: Vec<usize> = (nr..nr + na).collect();
    let rows: Vec<usize> = (plant_out..full.noutputs()).collect();
    let map = full.select_inputs(&cols)?.select_outputs(&rows)?;
    let abscissa = spectral_abscissa(map.a())?;
    let zeros = invariant_zeros(&map)?;
    let zeros_stable = zeros.iter().all(|z| z.re < 0.0);
    Ok(AttackAnalysis {
        left_invertible: left_invertible(&map)?,
        stable: abscissa < 0.0,
        abscissa,
        zeros,
        zeros_stable,
        map,
    })
}

/// Two scalar subsystems on which a decentralized Luenberger bank is stable
/// with both present but unstable once subsystem 2 is removed, while the
/// retrofit bank with the same gains stays stable on both sets.
///
/// Returns the subsystems, `L`, and the state weights `q_i` (with `r = 1`)
/// whose Riccati gains are exactly `H_i = 1`.
pub fn luenberger_counterexample() -> Result<(Vec<Subsystem>, Interconnection, Vec<f64>)> {
    let scalar = |a: f64, v: f64| {
        let mut m = SubsystemMatrices::zeros(1, 0, 1, 0, 1, 1);
        m.a[(0, 0)] = a;
        m.u[(0, 0)] = 1.0;
        m.c[(0, 0)] = 1.0;
        m.v[(0, 0)] = v;
        m.e[(0, 0)] = 1.0;
        Subsystem::new(m)
    };
    let subs = vec![scalar(-1.0, -5.0)?, scalar(-3.0, 0.0)?];
    let l = Interconnection::new(DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 1.0, 0.0]), vec![1, 1], vec![1, 1])?;
    Ok((subs, l, vec![3.0, 7.0]))
}
