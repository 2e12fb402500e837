//! Output records written by the `gridrisk` binary.

use std::io::Write;

use gridrisk::risk::{LossConfig, RiskProfile, RiskRow};
use gridrisk::sim::Cooperation;
use gridrisk::{FilterConfig, GridSpec};
use serde::{Deserialize, Serialize};

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    /// Root of every random stream in the run.
    pub seed: u64,
    pub mode: Cooperation,
    pub scenario: String,
    pub grid: GridSpec,
    pub duration: f64,
    pub epochs: u64,
    pub filter: FilterConfig,
    pub loss: LossConfig,
    pub snapshot_epochs: Vec<u64>,
    pub accumulation: String,
    pub max_weight_discrepancy: f64,
    pub peak_particles: usize,
    pub final_epoch: Option<RiskRow>,
}

impl RunRecord {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)
    }
}

/// One line of `compare.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub epoch: u64,
    pub t: f64,
    pub ego_acc_mean: f64,
    pub ego_acc_plus_2sigma: f64,
    pub coop_acc_mean: f64,
    pub coop_acc_plus_2sigma: f64,
}

impl CompareRow {
    pub fn pair(ego: &RiskProfile, coop: &RiskProfile) -> Vec<CompareRow> {
        ego.rows
            .iter()
            .zip(&coop.rows)
            .map(|(e, c)| CompareRow {
                epoch: e.epoch,
                t: e.t,
                ego_acc_mean: e.acc_mean,
                ego_acc_plus_2sigma: e.acc_plus_2sigma,
                coop_acc_mean: c.acc_mean,
                coop_acc_plus_2sigma: c.acc_plus_2sigma,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(rows: &[CompareRow], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
