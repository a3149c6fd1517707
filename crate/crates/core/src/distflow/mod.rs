//! Radial low-voltage feeders under the lossless LinDistFlow approximation,
//! with first-order droop inverters at the generation buses.
//!
//! Grid data is kept in SI units (V, W, VAr, Ω). Everything handed to the
//! networked-system layer is per-unit on the base `(v̄₀, max p^g)`.

mod cigre;
mod model;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cigre::{cigre_residential, GridOverrides, CIGRE_RESIDENTIAL_JSON};
pub use model::{
    build_subsystems, check_passivity_stability, lindistflow_matrices, subnetwork_matrices, x_matrix, AttackPorts,
    CompiledGrid, GroupSignals, LinDistFlow, PassivityReport, SubnetworkMatrices,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: String,
    pub to: String,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgRecord {
    pub bus: String,
    pub t_s: f64,
    pub k: f64,
    pub p_g_w: f64,
    pub p_c_w: f64,
    pub q_c_var: f64,
}

/// On-disk grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub v0_volts: f64,
    pub buses: Vec<String>,
    pub branches: Vec<BranchRecord>,
    pub dg: Vec<DgRecord>,
    pub partition: Vec<Vec<String>>,
}

impl GridFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<(RadialGrid, Partition)> {
        let grid = RadialGrid::new(self.buses.clone(), self.branches.clone(), self.dg.clone(), self.v0_volts)?;
        let partition = Partition::from_names(&grid, &self.partition)?;
        Ok((grid, partition))
    }
}

/// A tree of buses rooted at the substation.
///
/// Bus `k`'s incoming branch is identified with `k` itself, so flows and
/// impedances are indexed by the child bus.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    names: Vec<String>,
    v0: f64,
    root: usize,
    parent: Vec<Option<usize>>,
    r: Vec<f64>,
    x: Vec<f64>,
    /// DG records sorted by bus index.
    dg: Vec<(usize, DgRecord)>,
}

impl RadialGrid {
    pub fn new(buses: Vec<String>, branches: Vec<BranchRecord>, dg: Vec<DgRecord>, v0_volts: f64) -> Result<Self> {
        if !(v0_volts > 0.0 && v0_volts.is_finite()) {
            return Err(Error::Grid(format!("substation voltage must be positive, got {v0_volts}")));
        }
        let nb = buses.len();
        if nb < 2 {
            return Err(Error::Grid("a feeder needs at least two buses".into()));
        }
        let mut index = HashMap::new();
        for (k, name) in buses.iter().enumerate() {
            if index.insert(name.as_str(), k).is_some() {
                return Err(Error::Grid(format!("duplicate bus {name}")));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Grid(format!("unknown bus {name}")))
        };
        if branches.len() != nb - 1 {
            return Err(Error::Grid(format!(
                "{} branches for {nb} buses: a tree has exactly {}",
                branches.len(),
                nb - 1
            )));
        }
        let mut parent = vec![None; nb];
        let (mut r, mut x) = (vec![0.0; nb], vec![0.0; nb]);
        for b in &branches {
            let (from, to) = (lookup(&b.from)?, lookup(&b.to)?);
            if from == to {
                return Err(Error::Grid(format!("self-loop at {}", b.from)));
            }
            if parent[to].is_some() {
                return Err(Error::Grid(format!("bus {} has two incoming branches", b.to)));
            }
            if !(b.r_ohm > 0.0 && b.x_ohm > 0.0 && b.r_ohm.is_finite() && b.x_ohm.is_finite()) {
                return Err(Error::Grid(format!("branch {}-{} needs positive finite R and X", b.from, b.to)));
            }
            parent[to] = Some(from);
            r[to] = b.r_ohm;
            x[to] = b.x_ohm;
        }
        let roots: Vec<usize> = (0..nb).filter(|&k| parent[k].is_none()).collect();
        let root = match roots.as_slice() {
            [only] => *only,
            _ => return Err(Error::Grid(format!("expected one root, found {}", roots.len()))),
        };
        // n−1 branches with one parent each: connected iff every bus reaches the root.
        for (start, name) in buses.iter().enumerate() {
            let (mut k, mut steps) = (start, 0);
            while let Some(p) = parent[k] {
                k = p;
                steps += 1;
                if steps > nb {
                    return Err(Error::Grid(format!("cycle through bus {name}")));
                }
            }
        }
        let mut dg_idx = Vec::with_capacity(dg.len());
        for rec in dg {
            let k = lookup(&rec.bus)?;
            if k == root {
                return Err(Error::Grid("the substation bus cannot host generation".into()));
            }
            if dg_idx.iter().any(|(j, _)| *j == k) {
                return Err(Error::Grid(format!("bus {} has two generation records", rec.bus)));
            }
            if !(rec.t_s > 0.0 && rec.t_s.is_finite()) {
                return Err(Error::Grid(format!("time constant at {} must be positive", rec.bus)));
            }
            if !(rec.k >= 0.0 && rec.k.is_finite()) {
                return Err(Error::Grid(format!("droop gain at {} must be nonnegative", rec.bus)));
            }
            if ![rec.p_g_w, rec.p_c_w, rec.q_c_var].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("generation record"));
            }
            dg_idx.push((k, rec));
        }
        dg_idx.sort_by_key(|(k, _)| *k);
        Ok(Self {
            names: buses,
            v0: v0_volts,
            root,
            parent,
            r,
            x,
            dg: dg_idx,
        })
    }

    pub fn nbuses(&self) -> usize {
        self.names.len()
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
    pub fn root(&self) -> usize {
        self.root
    }
    pub fn v0(&self) -> f64 {
        self.v0
    }
    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }
    pub fn children(&self, k: usize) -> Vec<usize> {
        (0..self.nbuses()).filter(|&c| self.parent[c] == Some(k)).collect()
    }
    /// Resistance and reactance of the branch feeding bus `k`.
    pub fn branch(&self, k: usize) -> Option<(f64, f64)> {
        self.parent[k].map(|_| (self.r[k], self.x[k]))
    }
    /// Non-root buses in declaration order; also the branch order.
    pub fn non_root(&self) -> Vec<usize> {
        (0..self.nbuses()).filter(|&k| k != self.root).collect()
    }
    pub fn dg_buses(&self) -> Vec<usize> {
        self.dg.iter().map(|(k, _)| *k).collect()
    }
    pub fn dg(&self, k: usize) -> Option<&DgRecord> {
        self.dg.iter().find(|(j, _)| *j == k).map(|(_, d)| d)
    }
    /// Buses on the path from the root to `k`, excluding the root.
    pub fn path_to_root(&self, k: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = k;
        while let Some(p) = self.parent[cur] {
            path.push(cur);
            cur = p;
        }
        path
    }

    pub fn branches(&self) -> Vec<BranchRecord> {
        self.non_root()
            .into_iter()
            .map(|k| BranchRecord {
                from: self.names[self.parent[k].expect("non-root")].clone(),
                to: self.names[k].clone(),
                r_ohm: self.r[k],
                x_ohm: self.x[k],
            })
            .collect()
    }

    pub fn dg_records(&self) -> Vec<DgRecord> {
        self.dg.iter().map(|(_, d)| d.clone()).collect()
    }

    /// Base `(v̄₀, max |p^g|)`; the power base falls back to 1 W without generation.
    pub fn per_unit_base(&self) -> PerUnitBase {
        let s = self.dg.iter().map(|(_, d)| d.p_g_w.abs()).fold(0.0, f64::max);
        PerUnitBase {
            v_volts: self.v0,
            s_va: if s > 0.0 { s } else { 1.0 },
        }
    }

    /// Same grid expressed on `base`. Droop gains are taken as already per-unit.
    pub fn to_per_unit(&self, base: &PerUnitBase) -> Self {
        self.rescaled(1.0 / base.v_volts, 1.0 / base.s_va, 1.0 / base.z_ohm())
    }

    pub fn from_per_unit(&self, base: &PerUnitBase) -> Self {
        self.rescaled(base.v_volts, base.s_va, base.z_ohm())
    }

    fn rescaled(&self, v: f64, s: f64, z: f64) -> Self {
        let mut out = self.clone();
        out.v0 *= v;
        out.r.iter_mut().for_each(|r| *r *= z);
        out.x.iter_mut().for_each(|x| *x *= z);
        for (_, d) in &mut out.dg {
            d.p_g_w *= s;
            d.p_c_w *= s;
            d.q_c_var *= s;
        }
        out
    }

    pub fn to_file(&self, partition: &Partition) -> GridFile {
        GridFile {
            description: None,
            v0_volts: self.v0,
            buses: self.names.clone(),
            branches: self.branches(),
            dg: self.dg_records(),
            partition: partition
                .groups()
                .iter()
                .map(|g| g.iter().map(|&k| self.names[k].clone()).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerUnitBase {
    pub v_volts: f64,
    pub s_va: f64,
}

impl PerUnitBase {
    pub fn z_ohm(&self) -> f64 {
        self.v_volts * self.v_volts / self.s_va
    }
}

/// Disjoint bus groups, one per subsystem, with their boundary buses.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    upstream: Vec<Vec<usize>>,
    downstream: Vec<Vec<usize>>,
}

impl Partition {
    /// Every non-root bus must belong to exactly one group.
    pub fn new(grid: &RadialGrid, groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Grid("partition has no groups".into()));
        }
        let nb = grid.nbuses();
        let mut owner = vec![None; nb];
        let mut sorted = Vec::with_capacity(groups.len());
        for (i, g) in groups.into_iter().enumerate() {
            if g.is_empty() {
                return Err(Error::Grid(format!("group {} is empty", i + 1)));
            }
            let mut g = g;
            g.sort_unstable();
            for &k in &g {
                if k >= nb {
                    return Err(Error::Grid(format!("bus index {k} out of range")));
                }
                if k == grid.root() {
                    return Err(Error::Grid("the substation bus is held constant and cannot join a group".into()));
                }
                if owner[k].replace(i).is_some() {
                    return Err(Error::Grid(format!("bus {} appears in two groups", grid.name(k))));
                }
            }
            sorted.push(g);
        }
        if let Some(k) = grid.non_root().into_iter().find(|&k| owner[k].is_none()) {
            let what = if grid.dg(k).is_some() { "generation bus" } else { "bus" };
            return Err(Error::Grid(format!("{what} {} is outside every group", grid.name(k))));
        }
        let upstream = sorted
            .iter()
            .map(|g| {
                let mut u: Vec<usize> = g
                    .iter()
                    .filter_map(|&k| grid.parent(k))
                    .filter(|p| *p != grid.root() && !g.contains(p))
                    .collect();
                u.sort_unstable();
                u.dedup();
                u
            })
            .collect();
        let downstream = sorted
            .iter()
            .map(|g| {
                let mut d: Vec<usize> = (0..nb)
                    .filter(|&c| grid.parent(c).is_some_and(|p| g.contains(&p)) && !g.contains(&c))
                    .collect();
                d.sort_unstable();
                d
            })
            .collect();
        Ok(Self {
            groups: sorted,
            upstream,
            downstream,
        })
    }

    pub fn from_names(grid: &RadialGrid, groups: &[Vec<String>]) -> Result<Self> {
        let groups = groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|n| grid.index_of(n).ok_or_else(|| Error::Grid(format!("unknown bus {n} in partition"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, groups)
    }

    /// All non-root buses in one group.
    pub fn single(grid: &RadialGrid) -> Self {
        Self::new(grid, vec![grid.non_root()]).expect("covering single group")
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
    /// Parents of the group that lie outside it (the root excluded).
    pub fn upstream(&self, i: usize) -> &[usize] {
        &self.upstream[i]
    }
    /// Children of the group that lie outside it.
    pub fn downstream(&self, i: usize) -> &[usize] {
        &self.downstream[i]
    }
    pub fn group_of(&self, bus: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&bus))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn branch(from: &str, to: &str, r: f64, x: f64) -> BranchRecord {
        BranchRecord {
            from: from.into(),
            to: to.into(),
            r_ohm: r,
            x_ohm: x,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("b{k}")).collect()
    }

    #[test]
    fn rejects_non_trees() {
        let cycle = vec![branch("b0", "b1", 1.0, 1.0), branch("b1", "b2", 1.0, 1.0), branch("b2", "b1", 1.0, 1.0)];
        assert!(matches!(RadialGrid::new(names(3), cycle, vec![], 1.0), Err(Error::Grid(_))));
        let split = vec![branch("b0", "b1", 1.0, 1.0), branch("b2", "b3", 1.0, 1.0), branch("b3", "b2", 1.0, 1.0)];
        assert!(RadialGrid::new(names(4), split, vec![], 1.0).is_err());
        let short = vec![branch("b0", "b1", 1.0, 1.0)];
        assert!(RadialGrid::new(names(3), short, vec![], 1.0).is_err());
        let neg = vec![branch("b0", "b1", -1.0, 1.0)];
        assert!(RadialGrid::new(names(2), neg, vec![], 1.0).is_err());
    }

    #[test]
    fn per_unit_round_trip() {
        let grid = crate::distflow::cigre_residential(&GridOverrides::default()).unwrap().0;
        let base = grid.per_unit_base();
        assert_eq!(base.s_va, 5500.0);
        let pu = grid.to_per_unit(&base);
        assert!((pu.v0() - 1.0).abs() < 1e-15);
        let back = pu.from_per_unit(&base);
        for (a, b) in grid.branches().iter().zip(back.branches()) {
            assert!((a.r_ohm - b.r_ohm).abs() <= 1e-12 * a.r_ohm);
            assert!((a.x_ohm - b.x_ohm).abs() <= 1e-12 * a.x_ohm);
        }
        for (a, b) in grid.dg_records().iter().zip(back.dg_records()) {
            assert!((a.p_g_w - b.p_g_w).abs() <= 1e-12 * a.p_g_w.abs());
            assert!((a.p_c_w - b.p_c_w).abs() <= 1e-12 * a.p_c_w.abs());
            assert!((a.q_c_var - b.q_c_var).abs() <= 1e-12 * a.q_c_var.abs());
        }
        assert!((back.v0() - grid.v0()).abs() <= 1e-12 * grid.v0());
    }

    #[test]
    fn partition_boundaries() {
        let (grid, part) = crate::distflow::cigre_residential(&GridOverrides::default()).unwrap();
        let nm = |ks: &[usize]| ks.iter().map(|&k| grid.name(k).to_string()).collect::<Vec<_>>();
        assert_eq!(nm(part.upstream(0)), ["R8"]);
        assert!(part.downstream(0).is_empty());
        assert!(part.upstream(1).is_empty());
        assert_eq!(nm(part.downstream(1)), ["R9"]);
        let dup = vec![vec![1, 2], vec![2]];
        assert!(Partition::new(&grid, dup).is_err());
        let missing = vec![grid.non_root()[..5].to_vec()];
        assert!(Partition::new(&grid, missing).is_err());
    }
}
