use nalgebra::{DMatrix, DVector};

use super::{Partition, PerUnitBase, RadialGrid};
use crate::error::{Error, Result};
use crate::lti::linalg::{eigenvalues, solve, vstack};
use crate::netsys::{
    check_assumption1, check_well_posed, AssumptionReport, DisconnectionFamily, Interconnection, Subsystem,
    SubsystemMatrices,
};

/// Matrix form of the lossless branch-flow equations,
/// `−M P + M_DG P_DG = 0` and `Mᵀ v² + m v̄₀² = 2 D_R P + 2 D_X Q`.
///
/// Rows of `m_mat` and `m_dg` run over non-root buses, columns of `m_mat`
/// over branches; both in [`RadialGrid::non_root`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinDistFlow {
    pub m_mat: DMatrix<f64>,
    pub m_root: DVector<f64>,
    pub d_r: DMatrix<f64>,
    pub d_x: DMatrix<f64>,
    pub m_dg: DMatrix<f64>,
}

pub fn lindistflow_matrices(grid: &RadialGrid) -> LinDistFlow {
    let nr = grid.non_root();
    let n = nr.len();
    let pos = |k: usize| nr.iter().position(|&j| j == k);
    let mut m_mat = DMatrix::zeros(n, n);
    let mut m_root = DVector::zeros(n);
    let (mut d_r, mut d_x) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
    for (col, &k) in nr.iter().enumerate() {
        m_mat[(col, col)] = -1.0;
        let p = grid.parent(k).expect("non-root bus has a parent");
        match pos(p) {
            Some(row) => m_mat[(row, col)] = 1.0,
            None => m_root[col] = 1.0,
        }
        let (r, x) = grid.branch(k).expect("non-root bus has a branch");
        d_r[(col, col)] = r;
        d_x[(col, col)] = x;
    }
    let dg = grid.dg_buses();
    let m_dg = DMatrix::from_fn(n, dg.len(), |row, j| if nr[row] == dg[j] { 1.0 } else { 0.0 });
    LinDistFlow {
        m_mat,
        m_root,
        d_r,
        d_x,
        m_dg,
    }
}

/// Rows and columns of [`LinDistFlow`] belonging to one group:
/// `−M_N P_N − M_ND P_D + M_DG P_DG = 0` and
/// `M_Nᵀ v²_N + M_NUᵀ v²_U + m_N v̄₀² = 2 D_R P_N + 2 D_X Q_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubnetworkMatrices {
    pub m_n: DMatrix<f64>,
    pub m_nd: DMatrix<f64>,
    /// `M_{U N}`; enters the voltage equation transposed.
    pub m_un: DMatrix<f64>,
    pub m_root: DVector<f64>,
    pub m_dg: DMatrix<f64>,
    pub d_r: DMatrix<f64>,
    pub d_x: DMatrix<f64>,
}

pub fn subnetwork_matrices(grid: &RadialGrid, partition: &Partition, i: usize) -> SubnetworkMatrices {
    let full = lindistflow_matrices(grid);
    let nr = grid.non_root();
    let idx = |buses: &[usize]| -> Vec<usize> {
        buses
            .iter()
            .map(|b| nr.iter().position(|k| k == b).expect("partition buses are non-root"))
            .collect()
    };
    let n = idx(&partition.groups()[i]);
    let d = idx(partition.downstream(i));
    let u = idx(partition.upstream(i));
    let dg: Vec<usize> = grid
        .dg_buses()
        .iter()
        .enumerate()
        .filter(|(_, b)| partition.groups()[i].contains(b))
        .map(|(j, _)| j)
        .collect();
    SubnetworkMatrices {
        m_n: full.m_mat.select_rows(&n).select_columns(&n),
        m_nd: full.m_mat.select_rows(&n).select_columns(&d),
        m_un: full.m_mat.select_rows(&u).select_columns(&n),
        m_root: full.m_root.select_rows(&n),
        m_dg: full.m_dg.select_rows(&n).select_columns(&dg),
        d_r: full.d_r.select_rows(&n).select_columns(&n),
        d_x: full.d_x.select_rows(&n).select_columns(&n),
    }
}

/// `v²_DG = X q_DG` with all references zero: `X_jk` is twice the reactance
/// shared by the root paths of `j` and `k`. In the grid's own units.
pub fn x_matrix(grid: &RadialGrid) -> DMatrix<f64> {
    let dg = grid.dg_buses();
    let paths: Vec<Vec<usize>> = dg.iter().map(|&k| grid.path_to_root(k)).collect();
    DMatrix::from_fn(dg.len(), dg.len(), |j, k| {
        paths[j]
            .iter()
            .filter(|b| paths[k].contains(b))
            .map(|&b| 2.0 * grid.branch(b).expect("non-root").1)
            .sum()
    })
}

/// Which generation buses carry an attack input on their voltage reference.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackPorts {
    AllGeneration,
    Buses(Vec<usize>),
}

impl AttackPorts {
    fn includes(&self, bus: usize) -> bool {
        match self {
            AttackPorts::AllGeneration => true,
            AttackPorts::Buses(b) => b.contains(&bus),
        }
    }
}

/// Bus bookkeeping for one compiled group.
///
/// `x = q_dg`, `y = x`, `r = [v̄₀²; v̄²_dg; p^g; p^c; q^c]`,
/// `v = [v²_upstream; P_downstream; Q_downstream]`, `w = [v²_buses; P_buses; Q_buses]`,
/// `a` indexed by `attacked`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSignals {
    pub buses: Vec<usize>,
    pub dg: Vec<usize>,
    pub upstream: Vec<usize>,
    pub downstream: Vec<usize>,
    pub attacked: Vec<usize>,
}

/// A feeder compiled into per-unit subsystems and their interconnection.
#[derive(Debug, Clone)]
pub struct CompiledGrid {
    pub subsystems: Vec<Subsystem>,
    pub interconnection: Interconnection,
    pub groups: Vec<GroupSignals>,
    pub base: PerUnitBase,
    /// The grid on `base`.
    pub grid_pu: RadialGrid,
}

impl CompiledGrid {
    pub fn into_parts(self) -> (Vec<Subsystem>, Interconnection) {
        (self.subsystems, self.interconnection)
    }

    /// Operating-point reference `r_i` with every set-point at `v̄₀`.
    pub fn nominal_reference(&self, i: usize) -> DVector<f64> {
        let g = &self.groups[i];
        let nd = g.dg.len();
        let mut r = DVector::zeros(1 + 4 * nd);
        r[0] = self.grid_pu.v0() * self.grid_pu.v0();
        for (j, &k) in g.dg.iter().enumerate() {
            let d = self.grid_pu.dg(k).expect("dg bus");
            r[1 + j] = r[0];
            r[1 + nd + j] = d.p_g_w;
            r[1 + 2 * nd + j] = d.p_c_w;
            r[1 + 3 * nd + j] = d.q_c_var;
        }
        r
    }

    /// Subsystem and attack-port position of an attacked generation bus.
    pub fn attack_port(&self, bus: usize) -> Option<(usize, usize)> {
        self.groups
            .iter()
            .enumerate()
            .find_map(|(i, g)| g.attacked.iter().position(|&b| b == bus).map(|p| (i, p)))
    }
}

fn selector(rows: usize, offset: usize, total: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, total, |r, c| if c == offset + r { 1.0 } else { 0.0 })
}

fn compile_group(grid: &RadialGrid, partition: &Partition, i: usize, ports: &AttackPorts) -> Result<(Subsystem, GroupSignals)> {
    let buses = partition.groups()[i].clone();
    let dg: Vec<usize> = grid.dg_buses().into_iter().filter(|b| buses.contains(b)).collect();
    let attacked: Vec<usize> = dg.iter().copied().filter(|&b| ports.includes(b)).collect();
    let sig = GroupSignals {
        buses,
        dg,
        upstream: partition.upstream(i).to_vec(),
        downstream: partition.downstream(i).to_vec(),
        attacked,
    };
    let sm = subnetwork_matrices(grid, partition, i);
    let (nn, nd, nu, nds, na) = (sig.buses.len(), sig.dg.len(), sig.upstream.len(), sig.downstream.len(), sig.attacked.len());
    let (dr, dv) = (1 + 4 * nd, nu + 2 * nds);
    // Signal vector s = [x; r; v; a].
    let (ox, or, ov, oa) = (0, nd, nd + dr, nd + dr + dv);
    let ns = oa + na;
    let e = |rows, off| selector(rows, off, ns);
    let (ex, er0, evbar) = (e(nd, ox), e(1, or), e(nd, or + 1));
    let (epg, epc, eqc) = (e(nd, or + 1 + nd), e(nd, or + 1 + 2 * nd), e(nd, or + 1 + 3 * nd));
    let (ev2u, epd, eqd) = (e(nu, ov), e(nds, ov + nu), e(nds, ov + nu + nds));

    let singular = |_| Error::Grid(format!("power-flow matrix of group {} is singular", i + 1));
    let p_rhs = -&sm.m_nd * epd + &sm.m_dg * (epg - &epc);
    let q_rhs = -&sm.m_nd * eqd + &sm.m_dg * (&ex - eqc);
    let p = solve(&(-&sm.m_n), &(-p_rhs), "group flow").map_err(singular)?;
    let q = solve(&(-&sm.m_n), &(-q_rhs), "group flow").map_err(singular)?;
    let v_rhs = -sm.m_un.transpose() * ev2u - &sm.m_root * er0 + 2.0 * &sm.d_r * &p + 2.0 * &sm.d_x * &q;
    let v2 = solve(&sm.m_n.transpose(), &v_rhs, "group voltage").map_err(singular)?;
    let w = vstack(&[&v2, &p, &q]);

    let dg_rows: Vec<usize> = sig
        .dg
        .iter()
        .map(|b| sig.buses.iter().position(|k| k == b).expect("dg inside group"))
        .collect();
    let recs: Vec<_> = sig.dg.iter().map(|&b| grid.dg(b).expect("dg record")).collect();
    let inv_t = DMatrix::from_diagonal(&DVector::from_iterator(nd, recs.iter().map(|d| 1.0 / d.t_s)));
    let k_t = DMatrix::from_diagonal(&DVector::from_iterator(nd, recs.iter().map(|d| d.k / d.t_s)));
    let s_a = DMatrix::from_fn(nd, na, |r, c| if sig.dg[r] == sig.attacked[c] { 1.0 } else { 0.0 });
    let ea = e(na, oa);
    // q̇ = −q/T + (K/T)(v̄² + a − v²)
    let dyn_ = -&inv_t * &ex + &k_t * (evbar + s_a * ea - v2.select_rows(&dg_rows));

    let split = |m: &DMatrix<f64>, off: usize, len: usize| m.columns(off, len).into_owned();
    let mut mats = SubsystemMatrices::zeros(nd, dr, dv, na, nd, 3 * nn);
    mats.a = split(&dyn_, ox, nd);
    mats.b = split(&dyn_, or, dr);
    mats.u = split(&dyn_, ov, dv);
    mats.x = split(&dyn_, oa, na);
    mats.c = DMatrix::identity(nd, nd);
    mats.e = split(&w, ox, nd);
    mats.f = split(&w, or, dr);
    mats.w = split(&w, ov, dv);
    mats.z = split(&w, oa, na);
    Ok((Subsystem::new(mats)?, sig))
}

/// Compile every group of `partition` into a per-unit subsystem, with `L`
/// routing upstream squared voltages and downstream flows between groups.
pub fn build_subsystems(grid: &RadialGrid, partition: &Partition, ports: &AttackPorts) -> Result<CompiledGrid> {
    if let AttackPorts::Buses(b) = ports {
        if let Some(&bad) = b.iter().find(|k| grid.dg(**k).is_none()) {
            return Err(Error::Grid(format!("attacked bus {} has no generation", grid.names().get(bad).map_or("?", |s| s))));
        }
    }
    let base = grid.per_unit_base();
    let pu = grid.to_per_unit(&base);
    let mut subs = Vec::with_capacity(partition.len());
    let mut groups = Vec::with_capacity(partition.len());
    for i in 0..partition.len() {
        let (s, g) = compile_group(&pu, partition, i, ports)?;
        subs.push(s);
        groups.push(g);
    }
    let v_dims: Vec<usize> = subs.iter().map(Subsystem::dim_v).collect();
    let w_dims: Vec<usize> = subs.iter().map(Subsystem::dim_w).collect();
    let w_off: Vec<usize> = w_dims.iter().scan(0, |acc, &d| Some(std::mem::replace(acc, *acc + d))).collect();
    let locate = |bus: usize| -> (usize, usize) {
        let j = partition.group_of(bus).expect("partition covers every non-root bus");
        (j, groups[j].buses.iter().position(|&b| b == bus).expect("bus in its group"))
    };
    let mut l = DMatrix::zeros(v_dims.iter().sum(), w_dims.iter().sum());
    let mut row = 0;
    for g in &groups {
        for &u in &g.upstream {
            let (j, p) = locate(u);
            l[(row, w_off[j] + p)] = 1.0;
            row += 1;
        }
        for part in 1..3 {
            for &d in &g.downstream {
                let (j, p) = locate(d);
                l[(row, w_off[j] + part * groups[j].buses.len() + p)] = 1.0;
                row += 1;
            }
        }
    }
    let interconnection = Interconnection::new(l, v_dims, w_dims)?;
    let all: Vec<usize> = (0..subs.len()).collect();
    if !check_well_posed(&subs, &all, &interconnection)? {
        return Err(Error::Grid("compiled feeder interconnection is ill-posed".into()));
    }
    Ok(CompiledGrid {
        subsystems: subs,
        interconnection,
        groups,
        base,
        grid_pu: pu,
    })
}

/// Positive definiteness of `X` and internal stability of every `Σ_I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PassivityReport {
    /// Smallest eigenvalue of the per-unit `X`.
    pub x_min_eigenvalue: f64,
    /// `max |X − Xᵀ|`.
    pub x_asymmetry: f64,
    pub stability: AssumptionReport,
}

impl PassivityReport {
    pub fn passed(&self) -> bool {
        self.x_min_eigenvalue > 0.0 && self.x_asymmetry < 1e-10 && self.stability.passed()
    }
}

pub fn check_passivity_stability(grid: &RadialGrid, partition: &Partition, family: &DisconnectionFamily) -> Result<PassivityReport> {
    let compiled = build_subsystems(grid, partition, &AttackPorts::AllGeneration)?;
    let x = x_matrix(&compiled.grid_pu);
    let x_asymmetry = (&x - x.transpose()).amax();
    let x_min_eigenvalue = if x.nrows() == 0 {
        f64::INFINITY
    } else {
        let sym = (&x + x.transpose()) * 0.5;
        eigenvalues(&sym)?.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    };
    let stability = check_assumption1(&compiled.subsystems, &compiled.interconnection, family);
    Ok(PassivityReport {
        x_min_eigenvalue,
        x_asymmetry,
        stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distflow::{cigre_residential, BranchRecord, DgRecord, GridOverrides};
    use crate::lti::linalg::spectral_radius;
    use crate::netsys::{assemble, PortLayout};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn br(from: usize, to: usize, r: f64, x: f64) -> BranchRecord {
        BranchRecord {
            from: format!("b{from}"),
            to: format!("b{to}"),
            r_ohm: r,
            x_ohm: x,
        }
    }

    fn dg(bus: usize, k: f64) -> DgRecord {
        DgRecord {
            bus: format!("b{bus}"),
            t_s: 2.0,
            k,
            p_g_w: 1.0,
            p_c_w: 0.5,
            q_c_var: 0.1,
        }
    }

    fn grid(n: usize, branches: Vec<BranchRecord>, dgs: Vec<DgRecord>) -> RadialGrid {
        RadialGrid::new((0..n).map(|k| format!("b{k}")).collect(), branches, dgs, 1.0).unwrap()
    }

    fn random_tree(rng: &mut ChaCha8Rng) -> RadialGrid {
        let n = rng.random_range(2..=15);
        let mut branches = Vec::new();
        for k in 1..n {
            let from = rng.random_range(0..k);
            branches.push(br(from, k, rng.random_range(0.01..1.0), rng.random_range(0.01..1.0)));
        }
        let mut dgs = Vec::new();
        for k in 1..n {
            if rng.random_bool(0.5) {
                dgs.push(dg(k, rng.random_range(0.0..3.0)));
            }
        }
        if dgs.is_empty() {
            dgs.push(dg(n - 1, 1.0));
        }
        grid(n, branches, dgs)
    }

    #[test]
    fn worked_example_patterns() {
        // b0 root, b1 upstream, group {2,3,4}, downstream {5,6}, generation at b3.
        let g = grid(
            7,
            vec![br(0, 1, 1.0, 1.0), br(1, 2, 1.0, 1.0), br(2, 3, 1.0, 1.0), br(3, 4, 1.0, 1.0), br(4, 5, 1.0, 1.0), br(2, 6, 1.0, 1.0)],
            vec![dg(3, 1.0)],
        );
        let part = Partition::new(&g, vec![vec![1], vec![2, 3, 4], vec![5], vec![6]]).unwrap();
        assert_eq!(part.upstream(1), [1]);
        assert_eq!(part.downstream(1), [5, 6]);
        let sm = subnetwork_matrices(&g, &part, 1);
        let neg_mn = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 1.0]);
        assert_eq!(-&sm.m_n, neg_mn);
        let neg_mnd = DMatrix::from_row_slice(3, 2, &[0.0, -1.0, 0.0, 0.0, -1.0, 0.0]);
        assert_eq!(-&sm.m_nd, neg_mnd);
        assert_eq!(sm.m_dg, DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]));
        assert_eq!(sm.m_un.transpose(), DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
        assert_eq!(sm.m_root, DVector::zeros(3));
        let c = build_subsystems(&g, &part, &AttackPorts::AllGeneration).unwrap();
        assert_eq!(c.subsystems[1].dim_v(), 5);
        assert_eq!(c.subsystems[1].dim_w(), 9);
    }

    #[test]
    fn single_branch_drop() {
        let g = grid(2, vec![br(0, 1, 0.3, 0.2)], vec![]);
        let f = lindistflow_matrices(&g);
        assert_eq!(f.m_mat, DMatrix::from_element(1, 1, -1.0));
        assert_eq!(f.m_root[0], 1.0);
        // Load drawing (P, Q): v₁² = v̄₀² − 2(RP + XQ).
        let (p, q, v0sq) = (0.7, 0.4, 1.1);
        let rhs = 2.0 * (&f.d_r * p + &f.d_x * q) - &f.m_root * v0sq;
        let v1 = solve(&f.m_mat.transpose(), &DMatrix::from_column_slice(1, 1, rhs.as_slice()), "t").unwrap();
        assert!((v1[(0, 0)] - (v0sq - 2.0 * (0.3 * p + 0.2 * q))).abs() < 1e-14);
    }

    #[test]
    fn path_incidence_nonsingular() {
        let g = grid(4, vec![br(0, 1, 1.0, 1.0), br(1, 2, 1.0, 1.0), br(2, 3, 1.0, 1.0)], vec![]);
        let m = lindistflow_matrices(&g).m_mat;
        for i in 0..3 {
            assert_eq!(m[(i, i)], -1.0);
            if i > 0 {
                assert_eq!(m[(i - 1, i)], 1.0);
            }
        }
        assert!((m.determinant().abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn x_matrix_small_cases() {
        let one = grid(2, vec![br(0, 1, 0.1, 0.25)], vec![dg(1, 1.0)]);
        assert_eq!(x_matrix(&one), DMatrix::from_element(1, 1, 0.5));
        let shared = grid(4, vec![br(0, 1, 0.1, 0.3), br(1, 2, 0.1, 0.2), br(1, 3, 0.1, 0.7)], vec![dg(2, 1.0), dg(3, 1.0)]);
        let x = x_matrix(&shared);
        assert!((x[(0, 1)] - 0.6).abs() < 1e-15 && (x[(1, 0)] - 0.6).abs() < 1e-15);
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15 && (x[(1, 1)] - 2.0).abs() < 1e-15);
    }

    // Squared DG voltages from the full flow equations, zero references.
    fn dg_voltages(g: &RadialGrid, q: &DVector<f64>) -> DVector<f64> {
        let f = lindistflow_matrices(g);
        let qflow = f.m_mat.clone().lu().solve(&(&f.m_dg * q)).unwrap();
        let v2 = f.m_mat.transpose().lu().solve(&(2.0 * &f.d_x * qflow)).unwrap();
        let nr = g.non_root();
        DVector::from_iterator(
            q.len(),
            g.dg_buses().iter().map(|b| v2[nr.iter().position(|k| k == b).unwrap()]),
        )
    }

    #[test]
    fn x_matrix_finite_difference_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd15f);
        for _ in 0..20 {
            let g = random_tree(&mut rng);
            let x = x_matrix(&g);
            let nd = x.nrows();
            assert!((&x - x.transpose()).amax() < 1e-10);
            let min_eig = eigenvalues(&x).unwrap().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            assert!(min_eig > 0.0);
            let q0 = DVector::from_fn(nd, |_, _| rng.random_range(-1.0..1.0));
            let base = dg_voltages(&g, &q0);
            for j in 0..nd {
                let mut q = q0.clone();
                q[j] += 1e-6;
                let col = (dg_voltages(&g, &q) - &base) / 1e-6;
                let err = (&col - x.column(j)).norm();
                assert!(err <= 1e-6 * x.column(j).norm(), "column {j}: {err}");
            }
        }
    }

    #[test]
    fn monolithic_group_matches_direct_flow() {
        let (g, _) = cigre_residential(&GridOverrides::default()).unwrap();
        let part = Partition::single(&g);
        let c = build_subsystems(&g, &part, &AttackPorts::AllGeneration).unwrap();
        assert_eq!(c.interconnection.matrix().nrows(), 0);
        let sub = &c.subsystems[0];
        let r = c.nominal_reference(0);
        let q = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3, -0.1]);
        let m = sub.matrices();
        let w = &m.e * &q + &m.f * &r;
        let pu = &c.grid_pu;
        let f = lindistflow_matrices(pu);
        let recs = pu.dg_records();
        let pdg = DVector::from_iterator(5, recs.iter().map(|d| d.p_g_w - d.p_c_w));
        let qdg = DVector::from_iterator(5, recs.iter().enumerate().map(|(j, d)| q[j] - d.q_c_var));
        let minv = f.m_mat.clone().try_inverse().unwrap();
        let p = &minv * &f.m_dg * pdg;
        let qq = &minv * &f.m_dg * qdg;
        let v2 = f.m_mat.transpose().try_inverse().unwrap() * (2.0 * &f.d_r * &p + 2.0 * &f.d_x * &qq - &f.m_root);
        let n = pu.nbuses() - 1;
        assert!((w.rows(0, n) - v2).amax() < 1e-12);
        assert!((w.rows(n, n) - p).amax() < 1e-12);
        assert!((w.rows(2 * n, n) - qq).amax() < 1e-12);
    }

    #[test]
    fn zero_droop_decouples() {
        let (g, part) = cigre_residential(&GridOverrides {
            k: Some(0.0),
            ..Default::default()
        })
        .unwrap();
        let c = build_subsystems(&g, &part, &AttackPorts::AllGeneration).unwrap();
        let sys = assemble(&c.subsystems, &c.interconnection, &[0, 1]).unwrap();
        assert_eq!(sys.nstates(), 5);
        assert!((sys.a() + DMatrix::identity(5, 5) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn single_generator_closed_form() {
        let (k, t, xl) = (1.5, 2.0, 0.3);
        let mut d = dg(1, k);
        d.t_s = t;
        let g = grid(2, vec![br(0, 1, 0.1, xl)], vec![d]);
        let c = build_subsystems(&g, &Partition::single(&g), &AttackPorts::AllGeneration).unwrap();
        let x11 = 2.0 * xl / c.base.z_ohm();
        let a = c.subsystems[0].matrices().a[(0, 0)];
        assert!((a + (1.0 + k * x11) / t).abs() < 1e-14);
    }

    #[test]
    fn partition_independent_voltage_map() {
        let (g, part) = cigre_residential(&GridOverrides::default()).unwrap();
        let singletons = Partition::new(&g, g.non_root().into_iter().map(|k| vec![k]).collect()).unwrap();
        for p in [part, Partition::single(&g), singletons] {
            let c = build_subsystems(&g, &p, &AttackPorts::AllGeneration).unwrap();
            let x = x_matrix(&c.grid_pu);
            let all: Vec<usize> = (0..p.len()).collect();
            let sys = assemble(&c.subsystems, &c.interconnection, &all).unwrap();
            let layout = PortLayout::new(&c.subsystems, &all);
            let state_bus: Vec<usize> = c.groups.iter().flat_map(|gs| gs.dg.clone()).collect();
            let dg = g.dg_buses();
            for (s, &bus_s) in state_bus.iter().enumerate() {
                for &bus_o in &dg {
                    let gi = p.group_of(bus_o).unwrap();
                    let row = layout.w[gi].0 + c.groups[gi].buses.iter().position(|&b| b == bus_o).unwrap();
                    let want = x[(dg.iter().position(|&b| b == bus_o).unwrap(), dg.iter().position(|&b| b == bus_s).unwrap())];
                    assert!((sys.c()[(row, s)] - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn cigre_passes_stability_on_all_subsets() {
        let (g, part) = cigre_residential(&GridOverrides::default()).unwrap();
        let rep = check_passivity_stability(&g, &part, &DisconnectionFamily::all_subsets(2)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let c = build_subsystems(&g, &part, &AttackPorts::AllGeneration).unwrap();
        let sys = assemble(&c.subsystems, &c.interconnection, &[0, 1]).unwrap();
        assert_eq!(sys.nstates(), 5);
        assert!(spectral_radius(sys.a()).unwrap() < 10.0);
    }

    #[test]
    fn fuzzed_trees_stable_under_disconnection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7ee);
        for _ in 0..10 {
            let g = random_tree(&mut rng);
            let nr = g.non_root();
            let cut = rng.random_range(1..=nr.len());
            let groups = if cut == nr.len() { vec![nr] } else { vec![nr[..cut].to_vec(), nr[cut..].to_vec()] };
            let n = groups.len();
            let p = Partition::new(&g, groups).unwrap();
            let rep = check_passivity_stability(&g, &p, &DisconnectionFamily::all_subsets(n)).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn attack_port_selection() {
        let (g, part) = cigre_residential(&GridOverrides::default()).unwrap();
        let r18 = g.index_of("R18").unwrap();
        let c = build_subsystems(&g, &part, &AttackPorts::Buses(vec![r18])).unwrap();
        assert_eq!(c.subsystems[0].dim_a(), 1);
        assert_eq!(c.subsystems[1].dim_a(), 0);
        assert_eq!(c.attack_port(r18), Some((0, 0)));
        let r2 = g.index_of("R2").unwrap();
        assert!(build_subsystems(&g, &part, &AttackPorts::Buses(vec![r2])).is_err());
    }
}
