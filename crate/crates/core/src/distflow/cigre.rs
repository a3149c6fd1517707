use serde::{Deserialize, Serialize};

use super::{BranchRecord, GridFile, Partition, RadialGrid};
use crate::error::{Error, Result};

/// Residential feeder of the CIGRE European low-voltage benchmark.
///
/// The impedances are representative cable data, not the benchmark's exact
/// per-segment values.
pub const CIGRE_RESIDENTIAL_JSON: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/cigre_residential.json"));

/// Optional replacements applied on top of the bundled feeder.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverrides {
    /// Droop gain for every inverter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Time constant for every inverter, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
    /// Replacement impedances, matched on `(from, to)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<BranchRecord>,
}

impl GridOverrides {
    pub fn apply(&self, file: &mut GridFile) -> Result<()> {
        for d in &mut file.dg {
            if let Some(k) = self.k {
                d.k = k;
            }
            if let Some(t) = self.t_s {
                d.t_s = t;
            }
        }
        for o in &self.branches {
            let target = file
                .branches
                .iter_mut()
                .find(|b| b.from == o.from && b.to == o.to)
                .ok_or_else(|| Error::validation("branches", format!("no branch {}-{} in the feeder", o.from, o.to)))?;
            *target = o.clone();
        }
        Ok(())
    }
}

pub fn cigre_residential(overrides: &GridOverrides) -> Result<(RadialGrid, Partition)> {
    let mut file = GridFile::parse(CIGRE_RESIDENTIAL_JSON)?;
    overrides.apply(&mut file)?;
    file.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_feeder() {
        let (grid, part) = cigre_residential(&GridOverrides::default()).unwrap();
        assert_eq!(grid.nbuses(), 18);
        assert_eq!(grid.name(grid.root()), "R1");
        let dg: Vec<&str> = grid.dg_buses().iter().map(|&k| grid.name(k)).collect();
        assert_eq!(dg, ["R11", "R15", "R16", "R17", "R18"]);
        let pg: Vec<f64> = grid.dg_records().iter().map(|d| d.p_g_w).collect();
        assert_eq!(pg, [3500.0, 5500.0, 4000.0, 4500.0, 3000.0]);
        let pc: Vec<f64> = grid.dg_records().iter().map(|d| d.p_c_w).collect();
        assert_eq!(pc, [2295.0, 5440.0, 5440.0, 2295.0, 2720.0]);
        let qc: Vec<f64> = grid.dg_records().iter().map(|d| d.q_c_var).collect();
        assert_eq!(qc, [300.0, 960.0, 480.0, 600.0, 400.0]);
        assert!(grid.dg_records().iter().all(|d| d.t_s == 2.0 && d.k == 2.0));
        assert_eq!(part.len(), 2);
        assert_eq!(part.groups()[0].len(), 4);
        assert_eq!(part.groups()[1].len(), 13);
    }

    #[test]
    fn overrides() {
        let o = GridOverrides {
            k: Some(0.0),
            branches: vec![BranchRecord {
                from: "R1".into(),
                to: "R2".into(),
                r_ohm: 0.01,
                x_ohm: 0.02,
            }],
            ..Default::default()
        };
        let (grid, _) = cigre_residential(&o).unwrap();
        assert!(grid.dg_records().iter().all(|d| d.k == 0.0));
        assert_eq!(grid.branch(grid.index_of("R2").unwrap()), Some((0.01, 0.02)));
        let bad = GridOverrides {
            branches: vec![BranchRecord {
                from: "R2".into(),
                to: "R1".into(),
                r_ohm: 0.01,
                x_ohm: 0.02,
            }],
            ..Default::default()
        };
        assert!(cigre_residential(&bad).unwrap_err().is_validation());
        assert!(serde_json::from_str::<GridOverrides>(r#"{"gain": 1}"#).is_err());
    }
}
