//! Collision risk over an ego trajectory.
//!
//! Instantaneous risk is `R_k = sum_c r(c,k) * p_ego(c,k) * L_c`, with a
//! kinetic-energy loss `L_c` normalized by cell area and epoch length. The
//! variance reported alongside it is the spread induced by the Beta
//! uncertainty of each `r(c,k)`, cells being independent.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::beta::BetaState;
use crate::error::{Error, Result};
use crate::filter::DynamicGridFilter;
use crate::geom::{clipped_area, OrientedRect, Vec2};
use crate::grid::{CellIndex, GridMap, GridSpec};
use crate::rng::{stream_rng, Stream};
use crate::sensor::Pose;

pub const DEFAULT_CELL_MASS: f64 = 80.0;
pub const DEFAULT_EGO_MASS: f64 = 1500.0;
pub const DEFAULT_EGO_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub pose: Pose,
    pub velocity: Vec2,
    pub footprint: Footprint,
    pub mass: f64,
}

impl EgoState {
    pub fn validate(&self) -> Result<()> {
        if !(self.footprint.length > 0.0 && self.footprint.width > 0.0) {
            return Err(Error::invalid("footprint", "dimensions must be positive"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid("mass", "must be positive"));
        }
        Ok(())
    }

    fn rect_at(&self, position: Vec2, heading: f64) -> OrientedRect {
        OrientedRect {
            center: position,
            heading,
            length: self.footprint.length,
            width: self.footprint.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LossMode {
    /// `C1 = m_ego m_c / (2 (m_ego + m_c))`, `C2 = m_c / 2`.
    KineticEnergy,
    Explicit {
        c1: f64,
        c2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Mass attributed to an occupied cell (kg).
    pub cell_mass: f64,
    #[serde(flatten)]
    pub mode: LossMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            cell_mass: DEFAULT_CELL_MASS,
            mode: LossMode::KineticEnergy,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_mass > 0.0 && self.cell_mass.is_finite()) {
            return Err(Error::invalid("loss.cell_mass", "must be positive"));
        }
        if let LossMode::Explicit { c1, c2 } = self.mode {
            if !(c1 >= 0.0 && c2 >= 0.0) {
                return Err(Error::invalid("loss.c1", "constants must be non-negative"));
            }
        }
        Ok(())
    }

    /// `(C1, C2)` for an ego of mass `ego_mass`.
    pub fn constants(&self, ego_mass: f64) -> (f64, f64) {
        match self.mode {
            LossMode::KineticEnergy => {
                let mc = self.cell_mass;
                (ego_mass * mc / (2.0 * (ego_mass + mc)), mc / 2.0)
            }
            LossMode::Explicit { c1, c2 } => (c1, c2),
        }
    }
}

/// Loss for colliding with the point object in one cell, scaled by cell
/// area and epoch duration.
pub fn cell_loss(
    ego: &EgoState,
    mean_velocity: Vec2,
    velocity_second_moment: f64,
    loss: &LossConfig,
    spec: &GridSpec,
) -> f64 {
    let (c1, c2) = loss.constants(ego.mass);
    (c1 * (ego.velocity - mean_velocity).norm_squared() + c2 * velocity_second_moment) * spec.cell_area() * spec.tau
}

/// A lattice cell that may lie outside the grid (column/row can be negative
/// or past the edge).
pub type LatticeCell = (i64, i64);

/// Probability that the ego occupies each lattice cell, plus the area
/// fraction of each cell under the noise-free footprint. The covered part of
/// a cell is excluded from the risk sum.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoOccupancy {
    pub probability: BTreeMap<LatticeCell, f64>,
    pub mask: BTreeMap<LatticeCell, f64>,
}

impl EgoOccupancy {
    pub fn get(&self, cell: LatticeCell) -> f64 {
        self.probability.get(&cell).copied().unwrap_or(0.0)
    }

    /// In-grid part as a dense map.
    pub fn to_grid(&self, spec: &GridSpec) -> GridMap<f64> {
        GridMap::from_fn(*spec, |i| self.get((i.col as i64, i.row as i64)))
    }

    /// Fraction of `cell` under the noise-free footprint.
    pub fn masked(&self, cell: LatticeCell) -> f64 {
        self.mask.get(&cell).copied().unwrap_or(0.0)
    }

    /// Cells with non-zero exposure, in lattice order, paired with
    /// `p_ego` times the uncovered fraction of the cell.
    pub fn exposed(&self) -> impl Iterator<Item = (LatticeCell, f64)> + '_ {
        self.probability
            .iter()
            .map(|(c, p)| (*c, p * (1.0 - self.masked(*c))))
            .filter(|(_, p)| *p > 0.0)
    }
}

/// Fraction of each lattice cell covered by `rect`.
pub fn rasterize(spec: &GridSpec, rect: &OrientedRect) -> Vec<(LatticeCell, f64)> {
    let corners = rect.corners();
    let (lo, hi) = rect.bounds();
    let cs = spec.cell_size;
    let c0 = ((lo.x - spec.origin.x) / cs).floor() as i64;
    let c1 = ((hi.x - spec.origin.x) / cs).floor() as i64;
    let r0 = ((lo.y - spec.origin.y) / cs).floor() as i64;
    let r1 = ((hi.y - spec.origin.y) / cs).floor() as i64;
    let area = spec.cell_area();
    let mut out = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            let clo = spec.origin + Vec2::new(col as f64, row as f64) * cs;
            let chi = clo + Vec2::new(cs, cs);
            let a = clipped_area(&corners, clo, chi) / area;
            if a > 0.0 {
                out.push(((col, row), a.min(1.0)));
            }
        }
    }
    out
}

/// Samples `samples` ego poses and averages their footprint coverage.
pub fn ego_occupancy(ego: &EgoState, spec: &GridSpec, samples: usize, seed: u64) -> Result<EgoOccupancy> {
    ego.validate()?;
    if samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    let mask: BTreeMap<LatticeCell, f64> = rasterize(spec, &ego.rect_at(ego.pose.position, ego.pose.heading))
        .into_iter()
        .collect();
    if ego.pose.is_exact() {
        let probability = mask.clone();
        return Ok(EgoOccupancy { probability, mask });
    }
    let mut probability = BTreeMap::new();
    let sampler = ego.pose.sampler();
    let mut rng = stream_rng(seed, Stream::EgoPose, &[]);
    let inc = 1.0 / samples as f64;
    for _ in 0..samples {
        let (pos, heading) = sampler.sample(&mut rng);
        for (c, a) in rasterize(spec, &ego.rect_at(pos, heading)) {
            *probability.entry(c).or_insert(0.0) += a * inc;
        }
    }
    for p in probability.values_mut() {
        *p = p.min(1.0);
    }
    Ok(EgoOccupancy { probability, mask })
}

/// Mean and variance of the instantaneous risk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RiskSample {
    pub mean: f64,
    pub variance: f64,
}

/// One exposed cell's contribution: occupancy Beta and the loss-weighted
/// ego probability `p_ego * L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskTerm {
    pub cell: LatticeCell,
    pub occupancy: BetaState,
    pub exposure: f64,
}

/// Lists the exposed cells with their occupancy and `p_ego * L`. Cells off
/// the grid carry the ignorant prior with no motion.
pub fn risk_terms(
    filter: &DynamicGridFilter,
    ego: &EgoState,
    occupancy: &EgoOccupancy,
    loss: &LossConfig,
) -> Vec<RiskTerm> {
    let spec = filter.spec();
    occupancy
        .exposed()
        .map(|(cell, p)| {
            let (beta, v, v2) = match in_grid(spec, cell) {
                Some(idx) => {
                    let c = &filter.cells()[idx];
                    (c.beta, c.mean_velocity, c.velocity_second_moment)
                }
                None => (BetaState::IGNORANT, Vec2::ZERO, 0.0),
            };
            RiskTerm {
                cell,
                occupancy: beta,
                exposure: p * cell_loss(ego, v, v2, loss, spec),
            }
        })
        .collect()
}

fn in_grid(spec: &GridSpec, (col, row): LatticeCell) -> Option<CellIndex> {
    (col >= 0 && row >= 0 && (col as usize) < spec.width && (row as usize) < spec.height)
        .then(|| CellIndex::new(col as usize, row as usize))
}

/// Sums risk terms in their (lattice) order.
pub fn combine_terms(terms: &[RiskTerm]) -> RiskSample {
    let mut out = RiskSample::default();
    for t in terms {
        out.mean += t.occupancy.mean() * t.exposure;
        out.variance += t.exposure * t.exposure * t.occupancy.variance();
    }
    out
}

pub fn instantaneous_risk(
    filter: &DynamicGridFilter,
    ego: &EgoState,
    occupancy: &EgoOccupancy,
    loss: &LossConfig,
) -> Result<RiskSample> {
    ego.validate()?;
    loss.validate()?;
    Ok(combine_terms(&risk_terms(filter, ego, occupancy, loss)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub epoch: u64,
    pub t: f64,
    pub risk_mean: f64,
    pub risk_var: f64,
    pub acc_mean: f64,
    pub acc_var: f64,
    pub acc_plus_2sigma: f64,
}

/// Per-epoch and accumulated risk. Epochs are treated as independent when
/// accumulating the variance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RiskProfile {
    pub rows: Vec<RiskRow>,
}

impl RiskProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accumulate(&mut self, t: f64, sample: RiskSample) -> &RiskRow {
        let (acc_mean, acc_var) = self.rows.last().map_or((0.0, 0.0), |r| (r.acc_mean, r.acc_var));
        let acc_mean = acc_mean + sample.mean;
        let acc_var = acc_var + sample.variance;
        self.rows.push(RiskRow {
            epoch: self.rows.len() as u64,
            t,
            risk_mean: sample.mean,
            risk_var: sample.variance,
            acc_mean,
            acc_var,
            acc_plus_2sigma: acc_mean + 2.0 * acc_var.sqrt(),
        });
        self.rows.last().unwrap()
    }

    pub fn last(&self) -> Option<&RiskRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean per-epoch risk over a range of epochs. Returns NaN for an empty range.
    pub fn mean_risk(&self, epochs: std::ops::Range<usize>) -> f64 {
        let rows = &self.rows[epochs.start.min(self.rows.len())..epochs.end.min(self.rows.len())];
        rows.iter().map(|r| r.risk_mean).sum::<f64>() / rows.len() as f64
    }

    /// Mean per-epoch risk over the first, middle and last thirds of the run.
    pub fn third_means(&self) -> [f64; 3] {
        let n = self.rows.len();
        let a = n / 3;
        let b = 2 * n / 3;
        [self.mean_risk(0..a), self.mean_risk(a..b), self.mean_risk(b..n)]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<RiskRow>, _>>()?;
        Ok(RiskProfile { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::diagonal_covariance;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(Vec2::ZERO, 1.0, n, n, 1.0).unwrap()
    }

    fn ego_at(x: f64, y: f64, length: f64, width: f64) -> EgoState {
        EgoState {
            pose: Pose::exact(Vec2::new(x, y), 0.0),
            velocity: Vec2::new(10.0, 0.0),
            footprint: Footprint { length, width },
            mass: 2.0,
        }
    }

    #[test]
    fn exact_pose_single_cell() {
        let occ = ego_occupancy(&ego_at(2.5, 2.5, 1.0, 1.0), &spec(5), 10, 0).unwrap();
        assert_eq!(occ.probability.len(), 1);
        assert!((occ.get((2, 2)) - 1.0).abs() < 1e-12);
        assert_eq!(occ.masked((2, 2)), 1.0);
        assert_eq!(occ.exposed().count(), 0);
    }

    #[test]
    fn exact_pose_split_cells() {
        let occ = ego_occupancy(&ego_at(3.0, 2.5, 1.0, 1.0), &spec(5), 10, 0).unwrap();
        assert!((occ.get((2, 2)) - 0.5).abs() < 1e-12);
        assert!((occ.get((3, 2)) - 0.5).abs() < 1e-12);
        let total: f64 = occ.probability.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn footprint_off_grid_is_kept_on_lattice() {
        let occ = ego_occupancy(&ego_at(0.0, 0.5, 1.0, 1.0), &spec(5), 10, 0).unwrap();
        assert!((occ.get((-1, 0)) - 0.5).abs() < 1e-12);
        assert!((occ.to_grid(&spec(5))[CellIndex::new(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noisy_occupancy_is_deterministic() {
        let mut ego = ego_at(2.5, 2.5, 2.0, 1.0);
        ego.pose.covariance = diagonal_covariance(0.5, 0.05);
        let a = ego_occupancy(&ego, &spec(5), 50, 9).unwrap();
        let b = ego_occupancy(&ego, &spec(5), 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.probability.values().all(|&p| (0.0..=1.0).contains(&p)));
        let total: f64 = a.probability.values().sum();
        assert!((total - 2.0).abs() < 1e-9);
    }

    #[test]
    fn loss_examples() {
        let s = spec(1);
        let loss = LossConfig {
            cell_mass: 2.0,
            mode: LossMode::KineticEnergy,
        };
        assert_eq!(loss.constants(2.0), (0.5, 1.0));
        let mut ego = ego_at(0.5, 0.5, 1.0, 1.0);
        assert!((cell_loss(&ego, Vec2::ZERO, 0.0, &loss, &s) - 50.0).abs() < 1e-12);
        ego.velocity = Vec2::new(2.0, 0.0);
        // 0.5 * |(2,0)|^2 + 1 * 1
        assert!((cell_loss(&ego, Vec2::ZERO, 1.0, &loss, &s) - 3.0).abs() < 1e-12);
        assert_eq!(cell_loss(&ego, Vec2::new(2.0, 0.0), 0.0, &loss, &s), 0.0);
        let half = GridSpec::new(Vec2::ZERO, 0.5, 1, 1, 0.1).unwrap();
        assert!((cell_loss(&ego, Vec2::ZERO, 1.0, &loss, &half) - 3.0 * 0.025).abs() < 1e-12);
    }

    #[test]
    fn combine_examples() {
        let one = |alpha, beta, exposure| RiskTerm {
            cell: (0, 0),
            occupancy: BetaState { alpha, beta },
            exposure,
        };
        // r = 1 is approached by a very concentrated Beta
        let r = combine_terms(&[one(1e12, 1e-3, 50.0)]);
        assert!((r.mean - 50.0).abs() < 1e-9 && r.variance < 1e-9);
        let r = combine_terms(&[one(1.0, 1.0, 50.0)]);
        assert!((r.mean - 25.0).abs() < 1e-12);
        assert!((r.variance - 2500.0 / 12.0).abs() < 1e-9);
        // (r=0.5, p*L=0.2*10) and (r=0.1, p*L=1*5)
        let r = combine_terms(&[one(1.0, 1.0, 2.0), one(1.0, 9.0, 5.0)]);
        assert!((r.mean - 1.5).abs() < 1e-12);
    }

    #[test]
    fn accumulate_examples() {
        let mut p = RiskProfile::new();
        let row = *p.accumulate(
            0.0,
            RiskSample {
                mean: 2.0,
                variance: 0.5,
            },
        );
        assert_eq!((row.acc_mean, row.acc_var), (2.0, 0.5));
        let row = *p.accumulate(
            0.1,
            RiskSample {
                mean: 3.0,
                variance: 0.5,
            },
        );
        assert_eq!((row.acc_mean, row.acc_var), (5.0, 1.0));
        assert_eq!(row.acc_plus_2sigma, 7.0);
        assert_eq!(row.epoch, 1);
    }

    #[test]
    fn profile_csv_round_trip() {
        let mut p = RiskProfile::new();
        p.accumulate(
            0.0,
            RiskSample {
                mean: 0.1,
                variance: 0.01,
            },
        );
        p.accumulate(
            0.1,
            RiskSample {
                mean: 1.0 / 3.0,
                variance: 2e-17,
            },
        );
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,t,risk_mean,risk_var,acc_mean,acc_var,acc_plus_2sigma\n"));
        let back = RiskProfile::read_csv(&buf[..]).unwrap();
        assert_eq!(back, p);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(again, buf);
    }
}
