//! Networked subsystems `Σ_i` coupled through a static interconnection
//! `v = L w`, with disconnection by index-set restriction.
//!
//! Subsystem indices are 0-based positions in the subsystem list. An index
//! set is kept sorted ascending, which fixes the stacking order of every
//! assembled signal.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::compose::close_static;
use crate::lti::linalg::{block_diag_mat, condition_number};
use crate::lti::{block_diag, left_invertible, spectral_abscissa, StateSpace};

/// Coefficient blocks of
/// `ẋ = Ax + Br + Uv + Xa`, `y = Cx + Dr + Vv + Ya`, `w = Ex + Fr + Wv + Za`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl SubsystemMatrices {
    /// All-zero blocks with the given state and port sizes.
    pub fn zeros(n: usize, dim_r: usize, dim_v: usize, dim_a: usize, dim_y: usize, dim_w: usize) -> Self {
        let z = DMatrix::zeros;
        Self {
            a: z(n, n),
            b: z(n, dim_r),
            u: z(n, dim_v),
            x: z(n, dim_a),
            c: z(dim_y, n),
            d: z(dim_y, dim_r),
            v: z(dim_y, dim_v),
            y: z(dim_y, dim_a),
            e: z(dim_w, n),
            f: z(dim_w, dim_r),
            w: z(dim_w, dim_v),
            z: z(dim_w, dim_a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    m: SubsystemMatrices,
}

impl Subsystem {
    pub fn new(m: SubsystemMatrices) -> Result<Self> {
        let n = m.a.nrows();
        if m.a.ncols() != n {
            return Err(Error::NotSquare {
                rows: m.a.nrows(),
                cols: m.a.ncols(),
            });
        }
        let (dr, dv, da) = (m.b.ncols(), m.u.ncols(), m.x.ncols());
        let (dy, dw) = (m.c.nrows(), m.e.nrows());
        let expect = [
            ("B", &m.b, (n, dr)),
            ("U", &m.u, (n, dv)),
            ("X", &m.x, (n, da)),
            ("C", &m.c, (dy, n)),
            ("D", &m.d, (dy, dr)),
            ("V", &m.v, (dy, dv)),
            ("Y", &m.y, (dy, da)),
            ("E", &m.e, (dw, n)),
            ("F", &m.f, (dw, dr)),
            ("W", &m.w, (dw, dv)),
            ("Z", &m.z, (dw, da)),
        ];
        for (name, mat, shape) in expect {
            if mat.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    mat.nrows(),
                    mat.ncols(),
                    shape.0,
                    shape.1
                )));
            }
        }
        let all = [&m.a, &m.b, &m.u, &m.x, &m.c, &m.d, &m.v, &m.y, &m.e, &m.f, &m.w, &m.z];
        if all.iter().any(|mat| mat.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("subsystem matrices"));
        }
        Ok(Self { m })
    }

    pub fn matrices(&self) -> &SubsystemMatrices {
        &self.m
    }

    pub fn nstates(&self) -> usize {
        self.m.a.nrows()
    }
    pub fn dim_r(&self) -> usize {
        self.m.b.ncols()
    }
    pub fn dim_v(&self) -> usize {
        self.m.u.ncols()
    }
    pub fn dim_a(&self) -> usize {
        self.m.x.ncols()
    }
    pub fn dim_y(&self) -> usize {
        self.m.c.nrows()
    }
    pub fn dim_w(&self) -> usize {
        self.m.e.nrows()
    }

    /// Realization with inputs `[r; a; v]` and outputs `[y; w]`.
    pub fn realization(&self) -> StateSpace {
        let m = &self.m;
        let cat = |blocks: &[&DMatrix<f64>]| crate::lti::linalg::hstack(blocks);
        let b = cat(&[&m.b, &m.x, &m.u]);
        let c = crate::lti::linalg::vstack(&[&m.c, &m.e]);
        let d = crate::lti::linalg::vstack(&[&cat(&[&m.d, &m.y, &m.v]), &cat(&[&m.f, &m.z, &m.w])]);
        StateSpace::new(m.a.clone(), b, c, d).expect("validated subsystem")
    }

    /// Local transfer `G_{y·}` from the selected input port(s).
    pub fn local_map(&self, from: Port, to: Port) -> StateSpace {
        let g = self.realization();
        let (dr, da, dv) = (self.dim_r(), self.dim_a(), self.dim_v());
        let cols: Vec<usize> = match from {
            Port::R => (0..dr).collect(),
            Port::A => (dr..dr + da).collect(),
            Port::V => (dr + da..dr + da + dv).collect(),
            _ => Vec::new(),
        };
        let rows: Vec<usize> = match to {
            Port::Y => (0..self.dim_y()).collect(),
            Port::W => (self.dim_y()..self.dim_y() + self.dim_w()).collect(),
            _ => Vec::new(),
        };
        g.select_inputs(&cols)
            .and_then(|g| g.select_outputs(&rows))
            .expect("port indices within range")
    }
}

/// Port names for [`Subsystem::local_map`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    R,
    V,
    A,
    Y,
    W,
}

/// Constant interconnection `v = L w` with per-subsystem block sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Interconnection {
    l: DMatrix<f64>,
    v_dims: Vec<usize>,
    w_dims: Vec<usize>,
}

impl Interconnection {
    pub fn new(l: DMatrix<f64>, v_dims: Vec<usize>, w_dims: Vec<usize>) -> Result<Self> {
        if v_dims.len() != w_dims.len() {
            return Err(Error::Dimension("v and w block lists differ in length".into()));
        }
        let (rows, cols) = (v_dims.iter().sum::<usize>(), w_dims.iter().sum::<usize>());
        if l.shape() != (rows, cols) {
            return Err(Error::Dimension(format!(
                "L is {}x{}, block sizes imply {rows}x{cols}",
                l.nrows(),
                l.ncols()
            )));
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("L"));
        }
        Ok(Self { l, v_dims, w_dims })
    }

    /// Interconnection sized for `subs` with every block zero.
    pub fn zero_for(subs: &[Subsystem]) -> Self {
        let v_dims: Vec<usize> = subs.iter().map(Subsystem::dim_v).collect();
        let w_dims: Vec<usize> = subs.iter().map(Subsystem::dim_w).collect();
        let l = DMatrix::zeros(v_dims.iter().sum(), w_dims.iter().sum());
        Self { l, v_dims, w_dims }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }
    pub fn len(&self) -> usize {
        self.v_dims.len()
    }
    pub fn is_empty(&self) -> bool {
        self.v_dims.is_empty()
    }

    fn offsets(dims: &[usize]) -> Vec<usize> {
        dims.iter()
            .scan(0, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect()
    }

    /// Block `L_{ij}` mapping `w_j` into `v_i`.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let ro = Self::offsets(&self.v_dims);
        let co = Self::offsets(&self.w_dims);
        self.l.view((ro[i], co[j]), (self.v_dims[i], self.w_dims[j])).into_owned()
    }

    /// `pattern[i][j]` is true when `L_{ij}` has a nonzero entry.
    pub fn pattern(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.block(i, j).iter().any(|&x| x != 0.0)).collect())
            .collect()
    }

    /// `L_I`: the blocks with both indices in `set`, relabeled in order.
    pub fn restrict(&self, set: &[usize]) -> Result<Self> {
        check_index_set(set, self.len())?;
        let ro = Self::offsets(&self.v_dims);
        let co = Self::offsets(&self.w_dims);
        let rows: Vec<usize> = set.iter().flat_map(|&i| ro[i]..ro[i] + self.v_dims[i]).collect();
        let cols: Vec<usize> = set.iter().flat_map(|&j| co[j]..co[j] + self.w_dims[j]).collect();
        Ok(Self {
            l: self.l.select_rows(&rows).select_columns(&cols),
            v_dims: set.iter().map(|&i| self.v_dims[i]).collect(),
            w_dims: set.iter().map(|&i| self.w_dims[i]).collect(),
        })
    }
}

pub(crate) fn check_index_set(set: &[usize], n: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Invalid("index set must be nonempty".into()));
    }
    if set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!("index set {set:?} must be strictly ascending")));
    }
    if let Some(&bad) = set.iter().find(|&&i| i >= n) {
        return Err(Error::Invalid(format!("index {bad} out of range for {n} subsystems")));
    }
    Ok(())
}

/// The admissible remaining-index sets and the removal triggered by each
/// subsystem's alarm.
#[derive(Debug, Clone, PartialEq)]
pub struct DisconnectionFamily {
    n: usize,
    sets: Vec<Vec<usize>>,
    alarm_map: BTreeMap<usize, Vec<usize>>,
}

impl DisconnectionFamily {
    pub fn new(n: usize, sets: Vec<Vec<usize>>, alarm_map: BTreeMap<usize, Vec<usize>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Invalid("disconnection family is empty".into()));
        }
        for s in &sets {
            check_index_set(s, n)?;
        }
        for (&k, removed) in &alarm_map {
            if k >= n {
                return Err(Error::Invalid(format!("alarm map key {k} out of range")));
            }
            check_index_set(removed, n)?;
        }
        Ok(Self { n, sets, alarm_map })
    }

    /// Every nonempty subset of `0..n`.
    pub fn all_subsets(n: usize) -> Self {
        let sets = (1u64..(1 << n))
            .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
            .collect();
        Self {
            n,
            sets,
            alarm_map: BTreeMap::new(),
        }
    }

    /// Only the full set.
    pub fn nominal(n: usize) -> Self {
        Self {
            n,
            sets: vec![(0..n).collect()],
            alarm_map: BTreeMap::new(),
        }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn contains(&self, set: &[usize]) -> bool {
        self.sets.iter().any(|s| s == set)
    }

    /// Subsystems removed when detector `i` alarms (default `{i}`).
    pub fn removed_on_alarm(&self, i: usize) -> Vec<usize> {
        self.alarm_map.get(&i).cloned().unwrap_or_else(|| vec![i])
    }

    pub fn size(&self) -> usize {
        self.n
    }
}

/// Offsets of each subsystem's signals inside an assembled realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PortLayout {
    pub set: Vec<usize>,
    pub x: Vec<(usize, usize)>,
    pub r: Vec<(usize, usize)>,
    pub a: Vec<(usize, usize)>,
    pub y: Vec<(usize, usize)>,
    pub w: Vec<(usize, usize)>,
    pub v: Vec<(usize, usize)>,
}

impl PortLayout {
    /// Input order `(r_I, a_I)`, output order `(y_I, w_I, v_I)`, each
    /// entry `(offset, len)` in the respective vector.
    pub fn new(subs: &[Subsystem], set: &[usize]) -> Self {
        let spans = |f: fn(&Subsystem) -> usize, start: usize| {
            let mut off = start;
            set.iter()
                .map(|&i| {
                    let len = f(&subs[i]);
                    let s = (off, len);
                    off += len;
                    s
                })
                .collect::<Vec<_>>()
        };
        let total = |f: fn(&Subsystem) -> usize| set.iter().map(|&i| f(&subs[i])).sum::<usize>();
        let nr = total(Subsystem::dim_r);
        let (ny, nw) = (total(Subsystem::dim_y), total(Subsystem::dim_w));
        Self {
            set: set.to_vec(),
            x: spans(Subsystem::nstates, 0),
            r: spans(Subsystem::dim_r, 0),
            a: spans(Subsystem::dim_a, nr),
            y: spans(Subsystem::dim_y, 0),
            w: spans(Subsystem::dim_w, ny),
            v: spans(Subsystem::dim_v, ny + nw),
        }
    }

    /// Position of subsystem `id` inside the set.
    pub fn position(&self, id: usize) -> Option<usize> {
        self.set.iter().position(|&i| i == id)
    }

    pub fn n_r(&self) -> usize {
        self.r.iter().map(|s| s.1).sum()
    }
    pub fn n_a(&self) -> usize {
        self.a.iter().map(|s| s.1).sum()
    }
    pub fn n_y(&self) -> usize {
        self.y.iter().map(|s| s.1).sum()
    }
}

/// True iff `I − L_I diag(W_i)` is invertible with condition number below 1e12.
pub fn check_well_posed(subs: &[Subsystem], set: &[usize], l: &Interconnection) -> Result<bool> {
    let li = l.restrict(set)?;
    let ws: Vec<&DMatrix<f64>> = set.iter().map(|&i| &subs[i].matrices().w).collect();
    let w = block_diag_mat(&ws);
    let nv = li.matrix().nrows();
    let m = DMatrix::<f64>::identity(nv, nv) - li.matrix() * w;
    Ok(condition_number(&m) < crate::lti::compose::ILL_POSED_COND)
}

fn check_sizes(subs: &[Subsystem], l: &Interconnection) -> Result<()> {
    let vd: Vec<usize> = subs.iter().map(Subsystem::dim_v).collect();
    let wd: Vec<usize> = subs.iter().map(Subsystem::dim_w).collect();
    if vd != l.v_dims || wd != l.w_dims {
        return Err(Error::Dimension("interconnection block sizes do not match the subsystems".into()));
    }
    Ok(())
}

/// Realization `Σ_I` with inputs `(r_I, a_I)` and outputs `(y_I, w_I, v_I)`.
pub fn assemble(subs: &[Subsystem], l: &Interconnection, set: &[usize]) -> Result<StateSpace> {
    check_sizes(subs, l)?;
    let li = l.restrict(set)?;
    let parts: Vec<StateSpace> = set.iter().map(|&i| subs[i].realization()).collect();
    let stacked = block_diag(&parts)?;
    // Reorder inputs from [r1 a1 v1 r2 a2 v2 ..] to [r.. a.. v..] and
    // outputs from [y1 w1 y2 w2 ..] to [y.. w..].
    let mut cols = Vec::new();
    for pick in 0..3 {
        let mut off = 0;
        for &i in set {
            let s = &subs[i];
            let sizes = [s.dim_r(), s.dim_a(), s.dim_v()];
            let start = off + sizes[..pick].iter().sum::<usize>();
            cols.extend(start..start + sizes[pick]);
            off += sizes.iter().sum::<usize>();
        }
    }
    let mut rows = Vec::new();
    for pick in 0..2 {
        let mut off = 0;
        for &i in set {
            let s = &subs[i];
            let sizes = [s.dim_y(), s.dim_w()];
            let start = off + sizes[..pick].iter().sum::<usize>();
            rows.extend(start..start + sizes[pick]);
            off += sizes.iter().sum::<usize>();
        }
    }
    let g = stacked.select_inputs(&cols)?.select_outputs(&rows)?;
    let layout = PortLayout::new(subs, set);
    close_static(&g, layout.n_r() + layout.n_a(), layout.n_y(), li.matrix())
}

/// Attack-to-measurement map `T_{y_I a_I}` of the assembled network.
pub fn attack_to_output(subs: &[Subsystem], l: &Interconnection, set: &[usize]) -> Result<StateSpace> {
    let sys = assemble(subs, l, set)?;
    let layout = PortLayout::new(subs, set);
    let nr = layout.n_r();
    let cols: Vec<usize> = (nr..nr + layout.n_a()).collect();
    let rows: Vec<usize> = (0..layout.n_y()).collect();
    sys.select_inputs(&cols)?.select_outputs(&rows)
}

/// Outcome of one index set in an assumption sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SetCheck {
    pub set: Vec<usize>,
    pub passed: bool,
    /// Spectral abscissa for stability checks, normal rank for invertibility checks.
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<SetCheck>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn failures(&self) -> Vec<&SetCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn sweep(family: &DisconnectionFamily, f: impl Fn(&[usize]) -> Result<(bool, f64)>) -> AssumptionReport {
    let checks = family
        .sets()
        .iter()
        .map(|set| match f(set) {
            Ok((passed, value)) => SetCheck {
                set: set.clone(),
                passed,
                value: Some(value),
                error: None,
            },
            Err(e) => SetCheck {
                set: set.clone(),
                passed: false,
                value: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    AssumptionReport { checks }
}

/// Internal stability of `Σ_I` for every `I` in the family.
pub fn check_assumption1(subs: &[Subsystem], l: &Interconnection, family: &DisconnectionFamily) -> AssumptionReport {
    sweep(family, |set| {
        let sys = assemble(subs, l, set)?;
        let abscissa = spectral_abscissa(sys.a())?;
        Ok((abscissa < 0.0, abscissa))
    })
}

/// Left invertibility of `T_{y_I a_I}` for every `I` in the family.
pub fn check_assumption2(subs: &[Subsystem], l: &Interconnection, family: &DisconnectionFamily) -> AssumptionReport {
    sweep(family, |set| {
        let t = attack_to_output(subs, l, set)?;
        let rank = crate::lti::normal_rank(&t)?;
        Ok((left_invertible(&t)?, rank as f64))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::freq_response;
    use crate::lti::linalg::C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_sub(a: f64, u: f64, e: f64, w: f64) -> Subsystem {
        let mut m = SubsystemMatrices::zeros(1, 1, 1, 1, 1, 1);
        m.a[(0, 0)] = a;
        m.b[(0, 0)] = 1.0;
        m.u[(0, 0)] = u;
        m.x[(0, 0)] = 1.0;
        m.c[(0, 0)] = 1.0;
        m.e[(0, 0)] = e;
        m.w[(0, 0)] = w;
        Subsystem::new(m).unwrap()
    }

    fn random_sub(rng: &mut ChaCha8Rng, n: usize) -> Subsystem {
        let mut r = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let m = SubsystemMatrices {
            a: r(n, n) - DMatrix::identity(n, n) * 2.5,
            b: r(n, 1),
            u: r(n, 1),
            x: r(n, 1),
            c: r(2, n),
            d: r(2, 1),
            v: r(2, 1),
            y: r(2, 1),
            e: r(1, n),
            f: r(1, 1),
            w: r(1, 1) * 0.3,
            z: r(1, 1),
        };
        Subsystem::new(m).unwrap()
    }

    #[test]
    fn dimension_errors() {
        let mut m = SubsystemMatrices::zeros(2, 1, 1, 1, 1, 1);
        m.v = DMatrix::zeros(2, 1);
        assert!(matches!(Subsystem::new(m), Err(Error::Dimension(_))));
    }

    #[test]
    fn restrict_cases() {
        let l = Interconnection::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), vec![1, 1], vec![1, 1]).unwrap();
        assert_eq!(l.restrict(&[0, 1]).unwrap(), l);
        assert_eq!(l.restrict(&[0]).unwrap().matrix()[(0, 0)], 1.0);
        assert!(l.restrict(&[]).is_err());
        assert!(l.restrict(&[1, 0]).is_err());
    }

    #[test]
    fn restrict_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dims = vec![1, 2, 1, 3];
        let l = Interconnection::new(DMatrix::from_fn(7, 7, |_, _| rng.random_range(-1.0..1.0)), dims.clone(), dims).unwrap();
        let i1 = vec![0, 1, 3];
        // {1, 3} inside i1 are positions 1 and 2.
        let twice = l.restrict(&i1).unwrap().restrict(&[1, 2]).unwrap();
        assert_eq!(twice, l.restrict(&[1, 3]).unwrap());
    }

    #[test]
    fn well_posedness_cases() {
        let one = Interconnection::new(DMatrix::from_element(1, 1, 1.0), vec![1], vec![1]).unwrap();
        assert!(check_well_posed(&[scalar_sub(-1.0, 1.0, 1.0, 0.0)], &[0], &one).unwrap());
        assert!(!check_well_posed(&[scalar_sub(-1.0, 1.0, 1.0, 1.0)], &[0], &one).unwrap());
        assert!(check_well_posed(&[scalar_sub(-1.0, 1.0, 1.0, 0.5)], &[0], &one).unwrap());
        let subs = [scalar_sub(-1.0, 1.0, 1.0, 1.0)];
        assert!(matches!(assemble(&subs, &one, &[0]), Err(Error::IllPosed { .. })));
    }

    #[test]
    fn zero_interconnection_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let subs = vec![random_sub(&mut rng, 2), random_sub(&mut rng, 3)];
        let sys = assemble(&subs, &Interconnection::zero_for(&subs), &[0, 1]).unwrap();
        let expect = block_diag_mat(&[&subs[0].matrices().a, &subs[1].matrices().a]);
        assert_eq!(sys.a(), &expect);
        // v channel is identically zero.
        assert!(sys.c().rows(6, 2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn singleton_without_self_loop_is_the_subsystem() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let subs = vec![random_sub(&mut rng, 2), random_sub(&mut rng, 2)];
        let l = Interconnection::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), vec![1, 1], vec![1, 1]).unwrap();
        let sys = assemble(&subs, &l, &[1]).unwrap();
        let m = subs[1].matrices();
        assert_eq!(sys.a(), &m.a);
        assert_eq!(sys.b(), &crate::lti::linalg::hstack(&[&m.b, &m.x]));
    }

    #[test]
    fn assembled_transfer_matches_frequency_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let subs = vec![random_sub(&mut rng, 2), random_sub(&mut rng, 3)];
        let l = Interconnection::new(DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.8..0.8)), vec![1, 1], vec![1, 1]).unwrap();
        let sys = assemble(&subs, &l, &[0, 1]).unwrap();
        let lc = l.matrix().map(|x| C64::new(x, 0.0));
        for k in 0..10 {
            let s = C64::new(0.3, 0.5 + k as f64);
            let diag = |from: Port, to: Port| {
                let g: Vec<_> = subs.iter().map(|x| freq_response(&x.local_map(from, to), s).unwrap()).collect();
                let (r, c) = (g[0].nrows() + g[1].nrows(), g[0].ncols() + g[1].ncols());
                let mut out = DMatrix::<C64>::zeros(r, c);
                out.view_mut((0, 0), g[0].shape()).copy_from(&g[0]);
                out.view_mut(g[0].shape(), g[1].shape()).copy_from(&g[1]);
                out
            };
            let (gyr, gyv, gwr, gwv) = (diag(Port::R, Port::Y), diag(Port::V, Port::Y), diag(Port::R, Port::W), diag(Port::V, Port::W));
            let q = &lc * (DMatrix::<C64>::identity(2, 2) - &gwv * &lc).try_inverse().unwrap();
            let expect = &gyr + &gyv * q * &gwr;
            let got = freq_response(&sys, s).unwrap().view((0, 0), (4, 2)).into_owned();
            assert!((&got - &expect).norm() < 1e-10 * expect.norm());
        }
    }

    #[test]
    fn assumption1_cases() {
        // Subsystem 0 is unstable alone and stabilized only through coupling.
        let subs = vec![scalar_sub(0.5, 1.0, 1.0, 0.0), scalar_sub(-3.0, 1.0, 1.0, 0.0)];
        let l = Interconnection::new(DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]), vec![1, 1], vec![1, 1]).unwrap();
        assert!(check_assumption1(&subs, &l, &DisconnectionFamily::nominal(2)).passed());
        let rep = check_assumption1(&subs, &l, &DisconnectionFamily::all_subsets(2));
        assert!(!rep.passed());
        let failed: Vec<_> = rep.failures().iter().map(|c| c.set.clone()).collect();
        assert_eq!(failed, vec![vec![0]]);
    }

    #[test]
    fn assumption2_cases() {
        // Attack through a square invertible Y: static left inverse.
        let mut m = SubsystemMatrices::zeros(1, 0, 0, 2, 2, 0);
        m.a[(0, 0)] = -1.0;
        m.y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        m.c = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let subs = vec![Subsystem::new(m.clone()).unwrap()];
        let l = Interconnection::zero_for(&subs);
        assert!(check_assumption2(&subs, &l, &DisconnectionFamily::nominal(1)).passed());
        // Two attacks on one scalar output.
        let mut m2 = SubsystemMatrices::zeros(1, 0, 0, 2, 1, 0);
        m2.a[(0, 0)] = -1.0;
        m2.y = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let subs = vec![Subsystem::new(m2).unwrap()];
        assert!(!check_assumption2(&subs, &Interconnection::zero_for(&subs), &DisconnectionFamily::nominal(1)).passed());
    }

    #[test]
    fn family_defaults() {
        let f = DisconnectionFamily::all_subsets(2);
        assert_eq!(f.sets().len(), 3);
        assert!(f.contains(&[0]) && f.contains(&[1]) && f.contains(&[0, 1]));
        assert_eq!(f.removed_on_alarm(1), vec![1]);
        let mut map = BTreeMap::new();
        map.insert(0, vec![0, 1]);
        let f = DisconnectionFamily::new(2, vec![vec![0, 1]], map).unwrap();
        assert_eq!(f.removed_on_alarm(0), vec![0, 1]);
        assert!(DisconnectionFamily::new(2, vec![vec![]], BTreeMap::new()).is_err());
        assert!(DisconnectionFamily::new(2, vec![vec![2]], BTreeMap::new()).is_err());
    }
}
