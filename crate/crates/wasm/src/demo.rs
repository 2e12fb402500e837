//! Plain Rust side of the browser demo. Everything here runs natively;
//! the wasm exports in the crate root only translate types.

use gridrisk::risk::{LossConfig, RiskRow};
use gridrisk::scenarios::occluded_intersection;
use gridrisk::sensor::cast_ray;
use gridrisk::sim::{Cooperation, RunOptions, Simulation, Solid};
use gridrisk::{BetaState, FilterConfig, GridSpec, Result, Vec2};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaCurve {
    pub alpha: f64,
    pub beta: f64,
    pub mean: f64,
    pub variance: f64,
    pub prior_mean: f64,
    /// Evaluation points, midpoints of `points` equal bins on (0, 1).
    pub x: Vec<f64>,
    pub prior: Vec<f64>,
    pub posterior: Vec<f64>,
}

fn beta_pdf(state: &BetaState, x: f64) -> f64 {
    let (a, b) = (state.alpha, state.beta);
    let ln_norm = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b);
    (ln_norm + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()).exp()
}

/// Prior and conjugate posterior after `detections` and `misses`.
pub fn beta_posterior(alpha: f64, beta: f64, detections: f64, misses: f64, points: usize) -> Result<BetaCurve> {
    let prior = BetaState::new(alpha, beta)?;
    let post = BetaState::new(alpha + detections, beta + misses)?;
    let x: Vec<f64> = (0..points.max(2))
        .map(|i| (i as f64 + 0.5) / points.max(2) as f64)
        .collect();
    Ok(BetaCurve {
        alpha: post.alpha,
        beta: post.beta,
        mean: post.mean(),
        variance: post.variance(),
        prior_mean: prior.mean(),
        prior: x.iter().map(|&x| beta_pdf(&prior, x)).collect(),
        posterior: x.iter().map(|&x| beta_pdf(&post, x)).collect(),
        x,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RayCells {
    /// `[col, row]` of every cell crossed before the endpoint cell.
    pub traversed: Vec<[usize; 2]>,
    pub terminal: Option<[usize; 2]>,
}

/// Cells visited by a ray on a `width` x `height` grid anchored at the origin.
pub fn ray_cells(
    width: usize,
    height: usize,
    cell_size: f64,
    origin: [f64; 2],
    angle: f64,
    range: f64,
) -> Result<RayCells> {
    let spec = GridSpec::new(Vec2::ZERO, cell_size, width, height, 0.1)?;
    let trace = cast_ray(&spec, Vec2::new(origin[0], origin[1]), Vec2::from_angle(angle), range)?;
    Ok(RayCells {
        traversed: trace.traversed.iter().map(|c| [c.col, c.row]).collect(),
        terminal: trace.terminal.map(|c| [c.col, c.row]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outline {
    Polygon { id: String, points: Vec<[f64; 2]> },
    Circle { id: String, center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub epochs: u64,
}

/// The bundled occluded-intersection scenario, advanced one epoch at a time.
pub struct ScenarioRun {
    sim: Simulation,
}

impl ScenarioRun {
    pub fn new(cooperative: bool, seed: u64, cell_size: f64) -> Result<Self> {
        let scenario = occluded_intersection().with_cell_size(cell_size)?;
        let options = RunOptions {
            cooperation: if cooperative {
                Cooperation::Cooperative
            } else {
                Cooperation::EgoOnly
            },
            seed,
            ..RunOptions::default()
        };
        Ok(ScenarioRun {
            sim: Simulation::new(&scenario, FilterConfig::default(), LossConfig::default(), options)?,
        })
    }

    pub fn grid(&self) -> GridInfo {
        let s = self.sim.scenario();
        GridInfo {
            origin: [s.spec.origin.x, s.spec.origin.y],
            cell_size: s.spec.cell_size,
            width: s.spec.width,
            height: s.spec.height,
            epochs: s.epochs(),
        }
    }

    pub fn step(&mut self) -> Result<Option<RiskRow>> {
        self.sim.step()
    }

    pub fn rows(&self) -> &[RiskRow] {
        &self.sim.profile().rows
    }

    /// Occupancy probability per cell, row-major from the grid origin.
    pub fn occupancy(&self) -> Vec<f32> {
        self.sim
            .filter()
            .cells()
            .cells()
            .iter()
            .map(|c| c.occupancy as f32)
            .collect()
    }

    /// Ground-truth outlines at the time of the last completed epoch.
    pub fn outlines(&self) -> Result<Vec<Outline>> {
        let s = self.sim.scenario();
        let epoch = self.sim.epoch().saturating_sub(1);
        let t = (epoch as f64 * s.spec.tau).min(s.duration);
        let ids = s.vehicles.iter().map(|v| &v.id).chain(s.objects.iter().map(|o| &o.id));
        Ok(s.solids_at(t, None)?
            .into_iter()
            .zip(ids)
            .map(|(solid, id)| match solid {
                Solid::Rect(r) => Outline::Polygon {
                    id: id.clone(),
                    points: r.corners().map(|p| [p.x, p.y]).to_vec(),
                },
                Solid::Circle { center, radius } => Outline::Circle {
                    id: id.clone(),
                    center: [center.x, center.y],
                    radius,
                },
            })
            .collect())
    }
}
