//! Particle-based dynamic occupancy filter.
//!
//! Each cell is an independent Bernoulli random finite set: empty with
//! probability `1 - r`, or holding one point object whose position/velocity
//! density is carried by weighted particles. The particle weights in a cell
//! always sum to its occupancy `r`, and `r` itself is the mean of the cell's
//! Beta posterior.
//!
//! One epoch is `predict` (advect particles, re-center the Beta prior on the
//! advected mass), `update` (fuse sensor pseudo-counts, rescale persistent
//! particles, spawn newborns) and `resample` (cap particles per cell).

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta::{pseudo_counts, BetaState, SensorModel, DEFAULT_DISCOUNT};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::grid::{CellFields, CellIndex, GridMap, GridSpec};
use crate::rng::{stream_rng, Stream};
use crate::sensor::MeasurementGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec2,
    pub velocity: Vec2,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub particles_per_cell_max: usize,
    /// Fraction `p_B` of a cell's posterior mass given to newborn particles.
    pub birth_fraction: f64,
    /// Per-epoch survival probability `p_S`.
    pub survival_probability: f64,
    /// Per-epoch position process noise (m).
    pub position_noise: f64,
    /// Per-epoch velocity process noise (m/s).
    pub velocity_noise: f64,
    /// Standard deviation of newborn velocities (m/s).
    pub newborn_velocity_sigma: f64,
    /// Particles spawned per cell for each birth cohort.
    pub newborn_particles: usize,
    /// Evidence retention `gamma` per epoch.
    pub discount: f64,
    /// Predicted mass is capped at `1 - mass_epsilon`.
    pub mass_epsilon: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            particles_per_cell_max: 30,
            birth_fraction: 0.02,
            survival_probability: 0.99,
            position_noise: 0.1,
            velocity_noise: 0.5,
            newborn_velocity_sigma: 2.0,
            newborn_particles: 2,
            discount: DEFAULT_DISCOUNT,
            mass_epsilon: 1e-3,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("filter.{field}"), reason))
            }
        };
        check(
            self.particles_per_cell_max >= 1,
            "particles_per_cell_max",
            "must be at least 1",
        )?;
        check(
            (0.0..1.0).contains(&self.birth_fraction),
            "birth_fraction",
            "must lie in [0, 1)",
        )?;
        check(
            self.survival_probability > 0.0 && self.survival_probability <= 1.0,
            "survival_probability",
            "must lie in (0, 1]",
        )?;
        for (v, name) in [
            (self.position_noise, "position_noise"),
            (self.velocity_noise, "velocity_noise"),
            (self.newborn_velocity_sigma, "newborn_velocity_sigma"),
        ] {
            check(
                v >= 0.0 && v.is_finite(),
                name,
                "must be a non-negative finite deviation",
            )?;
        }
        check(self.newborn_particles >= 1, "newborn_particles", "must be at least 1")?;
        check((0.0..=1.0).contains(&self.discount), "discount", "must lie in [0, 1]")?;
        check(
            self.mass_epsilon > 0.0 && self.mass_epsilon < 1.0,
            "mass_epsilon",
            "must lie in (0, 1)",
        )?;
        Ok(())
    }
}

/// Per-cell filter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDynamicState {
    pub beta: BetaState,
    /// Occupancy probability `r`, the mean of `beta`.
    pub occupancy: f64,
    /// Weighted mean particle velocity.
    pub mean_velocity: Vec2,
    /// Weighted `E[|v - mean_velocity|^2]` over the cell's particles.
    pub velocity_second_moment: f64,
    /// Particle-predicted mass `m_pred` from the last predict step.
    pub predicted_mass: f64,
}

impl Default for CellDynamicState {
    fn default() -> Self {
        CellDynamicState {
            beta: BetaState::IGNORANT,
            occupancy: 0.5,
            mean_velocity: Vec2::ZERO,
            velocity_second_moment: 0.0,
            predicted_mass: 0.0,
        }
    }
}

impl CellFields for CellDynamicState {
    fn field_names() -> &'static [&'static str] {
        &["alpha", "beta", "r", "vx", "vy", "v2"]
    }
    fn field_values(&self) -> Vec<f64> {
        vec![
            self.beta.alpha,
            self.beta.beta,
            self.occupancy,
            self.mean_velocity.x,
            self.mean_velocity.y,
            self.velocity_second_moment,
        ]
    }
}

/// Occupancy and velocity statistics of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStatistics {
    pub occupancy: f64,
    pub occupancy_variance: f64,
    pub mean_velocity: Vec2,
    pub velocity_second_moment: f64,
}

/// Weighted mean velocity and central second moment; zeros for an empty or
/// massless set.
pub fn velocity_moments(particles: &[Particle]) -> (Vec2, f64) {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if particles.is_empty() || total <= 0.0 {
        return (Vec2::ZERO, 0.0);
    }
    let mut mean = Vec2::ZERO;
    for p in particles {
        mean += p.velocity * p.weight;
    }
    mean = mean * (1.0 / total);
    let second = particles
        .iter()
        .map(|p| p.weight * (p.velocity - mean).norm_squared())
        .sum::<f64>()
        / total;
    (mean, second)
}

fn gaussian2<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec2 {
    if sigma == 0.0 {
        return Vec2::ZERO;
    }
    Vec2::new(
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
    )
}

/// The dynamic occupancy grid filter.
#[derive(Debug, Clone)]
pub struct DynamicGridFilter {
    config: FilterConfig,
    cells: GridMap<CellDynamicState>,
    particles: GridMap<Vec<Particle>>,
    epoch: u64,
}

impl DynamicGridFilter {
    pub fn new(spec: GridSpec, config: FilterConfig) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        Ok(DynamicGridFilter {
            config,
            cells: GridMap::new(spec),
            particles: GridMap::new(spec),
            epoch: 0,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        self.cells.spec()
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn cells(&self) -> &GridMap<CellDynamicState> {
        &self.cells
    }

    pub fn particles(&self) -> &GridMap<Vec<Particle>> {
        &self.particles
    }

    pub fn particle_count(&self) -> usize {
        self.particles.cells().iter().map(Vec::len).sum()
    }

    /// Replaces the state of one cell. Intended for tests and for seeding a
    /// filter from an external map; particles must lie inside the cell.
    pub fn set_cell(&mut self, idx: CellIndex, beta: BetaState, particles: Vec<Particle>) -> Result<()> {
        let spec = *self.spec();
        spec.check_index(idx)?;
        if particles
            .iter()
            .any(|p| spec.world_to_cell(p.position) != Some(idx) || !(p.weight >= 0.0 && p.weight.is_finite()))
        {
            return Err(Error::invalid(
                "particles",
                "must lie inside the cell with finite non-negative weight",
            ));
        }
        let (mean_velocity, velocity_second_moment) = velocity_moments(&particles);
        self.cells[idx] = CellDynamicState {
            beta,
            occupancy: beta.mean(),
            mean_velocity,
            velocity_second_moment,
            predicted_mass: 0.0,
        };
        self.particles[idx] = particles;
        Ok(())
    }

    /// Advances particles by `tau` seconds under a constant-velocity model
    /// and forms the Beta prior for the next update.
    pub fn predict(&mut self, tau: f64) {
        self.epoch += 1;
        let cfg = self.config;
        let spec = *self.spec();
        let epoch = self.epoch;

        let moved: Vec<Vec<(usize, Particle)>> = self
            .particles
            .cells_mut()
            .par_iter_mut()
            .enumerate()
            .map(|(cell, parts)| {
                let mut rng = stream_rng(cfg.seed, Stream::Predict, &[epoch, cell as u64]);
                let mut out = Vec::with_capacity(parts.len());
                for mut p in parts.drain(..) {
                    p.position += p.velocity * tau + gaussian2(&mut rng, cfg.position_noise);
                    p.velocity += gaussian2(&mut rng, cfg.velocity_noise);
                    p.weight *= cfg.survival_probability;
                    if let Some(dest) = spec.world_to_cell(p.position) {
                        out.push((spec.linear(dest), p));
                    }
                }
                out
            })
            .collect();

        // scatter in source-cell order so the binning is schedule independent
        let bins = self.particles.cells_mut();
        for batch in moved {
            for (dest, p) in batch {
                bins[dest].push(p);
            }
        }

        let max_mass = 1.0 - cfg.mass_epsilon;
        self.cells
            .cells_mut()
            .par_iter_mut()
            .zip(self.particles.cells().par_iter())
            .for_each(|(cell, parts)| {
                let mass: f64 = parts.iter().map(|p| p.weight).sum();
                let m_pred = mass.min(max_mass);
                let kappa = (cfg.discount * (cell.beta.alpha + cell.beta.beta - 2.0)).max(0.0);
                cell.beta = BetaState {
                    alpha: 1.0 + kappa * m_pred,
                    beta: 1.0 + kappa * (1.0 - m_pred),
                };
                cell.occupancy = cell.beta.mean();
                cell.predicted_mass = m_pred;
                let (v, v2) = velocity_moments(parts);
                cell.mean_velocity = v;
                cell.velocity_second_moment = v2;
            });
    }

    /// Fuses one epoch of per-sensor measurements. `measurements[i]` is
    /// weighted by `models[i]`.
    pub fn update(&mut self, measurements: &[MeasurementGrid], models: &[SensorModel]) -> Result<()> {
        if measurements.len() != models.len() {
            return Err(Error::invalid(
                "models",
                format!(
                    "{} measurement grids but {} sensor models",
                    measurements.len(),
                    models.len()
                ),
            ));
        }
        let spec = *self.spec();
        if measurements.iter().any(|m| *m.spec() != spec) {
            return Err(Error::SpecMismatch);
        }
        let cfg = self.config;
        let epoch = self.epoch;

        self.cells
            .cells_mut()
            .par_iter_mut()
            .zip(self.particles.cells_mut().par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (cell, parts))| -> Result<()> {
                let obs = models.iter().zip(measurements).map(|(model, grid)| {
                    let c = grid.cells()[i];
                    (model, c.det, c.miss)
                });
                let (da, db) = pseudo_counts(obs, &cell.beta)?;
                cell.beta = cell.beta.conjugate_update(da, db);
                let r = cell.beta.mean();
                cell.occupancy = r;

                let mass: f64 = parts.iter().map(|p| p.weight).sum();
                let newborn_mass = if mass > 0.0 {
                    let scale = r * (1.0 - cfg.birth_fraction) / mass;
                    for p in parts.iter_mut() {
                        p.weight *= scale;
                    }
                    r * cfg.birth_fraction
                } else {
                    parts.clear();
                    r
                };
                if newborn_mass > 0.0 {
                    let mut rng = stream_rng(cfg.seed, Stream::Birth, &[epoch, i as u64]);
                    let (lo, _) = spec.cell_bounds(spec.index_of(i));
                    let n = cfg.newborn_particles;
                    let w = newborn_mass / n as f64;
                    for _ in 0..n {
                        let offset = Vec2::new(rng.random::<f64>(), rng.random::<f64>()) * spec.cell_size;
                        parts.push(Particle {
                            position: lo + offset,
                            velocity: gaussian2(&mut rng, cfg.newborn_velocity_sigma),
                            weight: w,
                        });
                    }
                }
                let (v, v2) = velocity_moments(parts);
                cell.mean_velocity = v;
                cell.velocity_second_moment = v2;
                Ok(())
            })
    }

    /// Systematic resampling of every cell holding more particles than the
    /// configured cap. Cell weight totals are preserved.
    pub fn resample(&mut self) {
        let cfg = self.config;
        let epoch = self.epoch;
        let cap = cfg.particles_per_cell_max;
        self.cells
            .cells_mut()
            .par_iter_mut()
            .zip(self.particles.cells_mut().par_iter_mut())
            .enumerate()
            .for_each(|(i, (cell, parts))| {
                if parts.len() <= cap {
                    return;
                }
                let mut rng = stream_rng(cfg.seed, Stream::Resample, &[epoch, i as u64]);
                *parts = systematic_resample(parts, cap, &mut rng);
                let (v, v2) = velocity_moments(parts);
                cell.mean_velocity = v;
                cell.velocity_second_moment = v2;
            });
    }

    /// Runs predict (skipped at epoch zero), update and resample.
    pub fn step(
        &mut self,
        tau: f64,
        measurements: &[MeasurementGrid],
        models: &[SensorModel],
        first: bool,
    ) -> Result<()> {
        if !first {
            self.predict(tau);
        }
        self.update(measurements, models)?;
        self.resample();
        Ok(())
    }

    pub fn cell_statistics(&self, idx: CellIndex) -> Result<CellStatistics> {
        let cell = self.cells.get(idx)?;
        Ok(CellStatistics {
            occupancy: cell.beta.mean(),
            occupancy_variance: cell.beta.variance(),
            mean_velocity: cell.mean_velocity,
            velocity_second_moment: cell.velocity_second_moment,
        })
    }

    /// Largest `|sum of particle weights - r|` over all cells.
    pub fn max_weight_discrepancy(&self) -> f64 {
        self.cells
            .cells()
            .iter()
            .zip(self.particles.cells())
            .map(|(c, ps)| (ps.iter().map(|p| p.weight).sum::<f64>() - c.occupancy).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_snapshot_csv<W: Write>(&self, out: W) -> Result<()> {
        self.cells.write_csv(out)
    }

    /// Debug dump: `col,row,x,y,vx,vy,w` per particle.
    pub fn write_particles_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["col", "row", "x", "y", "vx", "vy", "w"])?;
        for (idx, parts) in self.particles.iter() {
            for p in parts {
                w.write_record(&[
                    idx.col.to_string(),
                    idx.row.to_string(),
                    p.position.x.to_string(),
                    p.position.y.to_string(),
                    p.velocity.x.to_string(),
                    p.velocity.y.to_string(),
                    p.weight.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `n` equally weighted particles by systematic resampling; the output
/// weights sum to the input total.
pub fn systematic_resample<R: Rng + ?Sized>(particles: &[Particle], n: usize, rng: &mut R) -> Vec<Particle> {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if particles.is_empty() || n == 0 || total <= 0.0 {
        return particles.to_vec();
    }
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = particles[0].weight;
    let mut j = 0;
    for _ in 0..n {
        while u > acc && j + 1 < particles.len() {
            j += 1;
            acc += particles[j].weight;
        }
        out.push(Particle {
            weight: step,
            ..particles[j]
        });
        u += step;
    }
    out
}
