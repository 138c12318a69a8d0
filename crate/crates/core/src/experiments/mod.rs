//! Configured breakage, aggregation and lid-driven-cavity experiments.

mod config;
mod initial;
mod report;
mod run;

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use config::{
    AggregationBlock, BreakageBlock, ExperimentConfig, ExperimentKind, InitialConfig,
    InitialParameters, Method, Numerics, OutputConfig, Profile, SpatialConfig, VolumeConfig,
};
pub use initial::{
    initial_moments, initial_sectional, spatial_mass, spatial_profile, truncated_number,
    volume_density,
};
pub use report::{read_samples, relative_l2_error, Checks, RunReport, SolverCounters, Timings};
pub use run::{run, run_partial};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub order: usize,
    pub seconds: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
}

/// Runs `config` once per order and reports wall-clock time and `E₂` against
/// the sectional reference, which is computed once.
pub fn sweep_orders(config: &ExperimentConfig, orders: &[usize]) -> Result<(RunReport, Vec<SweepRow>)> {
    let mut reference_config = config.clone();
    reference_config.closure = Method::Fvs;
    let reference = run(&reference_config)?;
    let rows = sweep_against(config, orders, &reference)?;
    Ok((reference, rows))
}

/// [`sweep_orders`] with a precomputed reference run.
pub fn sweep_against(
    config: &ExperimentConfig,
    orders: &[usize],
    reference: &RunReport,
) -> Result<Vec<SweepRow>> {
    if config.closure == Method::Fvs {
        return Err(Error::Config("order sweeps need a moment closure".into()));
    }
    orders
        .iter()
        .map(|&order| {
            let mut c = config.clone();
            c.order = order;
            let start = Instant::now();
            let report = run(&c)?;
            let seconds = start.elapsed().as_secs_f64();
            Ok(SweepRow {
                order,
                seconds,
                e2: report.error_against(reference)?,
            })
        })
        .collect()
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_order_sweep() {
        let mut c = ExperimentConfig::preset(ExperimentKind::Breakage, Profile::Desk);
        c.closure = Method::Pn;
        c.numerics.n_v = 100;
        c.numerics.n_q = 20;
        c.numerics.t_end = 0.1;
        let (reference, rows) = sweep_orders(&c, &[1]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].e2 >= 0.0 && rows[0].e2 < 0.1);
        assert_eq!(reference.method, Method::Fvs);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep(&path, &rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("order,seconds,E2\n1,"));

        c.closure = Method::Fvs;
        assert!(sweep_against(&c, &[1], &reference).is_err());
    }
}
