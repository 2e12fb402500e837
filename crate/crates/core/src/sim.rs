//! Synthetic scenario engine: scripted vehicles and objects, exact
//! first-hit beam returns per vehicle, and the epoch loop that feeds the
//! filter and the risk evaluation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::beta::SensorModel;
use crate::error::{Error, Result};
use crate::filter::{CellDynamicState, DynamicGridFilter, FilterConfig};
use crate::geom::{normalize_angle, ray_circle_hit, OrientedRect, Vec2};
use crate::grid::{GridMap, GridSpec};
use crate::risk::{
    ego_occupancy, instantaneous_risk, EgoState, Footprint, LossConfig, RiskProfile, RiskRow, DEFAULT_EGO_MASS,
    DEFAULT_EGO_SAMPLES,
};
use crate::rng::{derive_seed, Stream};
use crate::sensor::{sample_beams, validate_covariance, BeamReturn, BeamSampling, Pose, DEFAULT_SAMPLES_PER_BEAM};

/// Root seed used when none is given.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec2,
    #[serde(default)]
    pub heading: f64,
}

/// Timestamped poses, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Trajectory(pub Vec<Waypoint>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
}

impl Trajectory {
    pub fn stationary(position: Vec2, heading: f64, end: f64) -> Self {
        Trajectory(vec![
            Waypoint {
                t: 0.0,
                position,
                heading,
            },
            Waypoint {
                t: end,
                position,
                heading,
            },
        ])
    }

    /// Straight line at constant speed from `start` along `heading`.
    pub fn straight(start: Vec2, heading: f64, speed: f64, end: f64) -> Self {
        Trajectory(vec![
            Waypoint {
                t: 0.0,
                position: start,
                heading,
            },
            Waypoint {
                t: end,
                position: start + Vec2::from_angle(heading) * (speed * end),
                heading,
            },
        ])
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.0.first()?.t, self.0.last()?.t))
    }

    pub fn validate(&self, field: &str, duration: f64) -> Result<()> {
        let Some((start, end)) = self.span() else {
            return Err(Error::invalid(field, "trajectory has no waypoints"));
        };
        if self
            .0
            .windows(2)
            .any(|w| w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::invalid(field, "waypoint times must be strictly increasing"));
        }
        if self.0.iter().any(|w| {
            !(w.t.is_finite() && w.position.x.is_finite() && w.position.y.is_finite() && w.heading.is_finite())
        }) {
            return Err(Error::invalid(field, "waypoints must be finite"));
        }
        if start > 0.0 || end < duration {
            return Err(Error::invalid(
                field,
                format!("must cover [0, {duration}] (covers [{start}, {end}])"),
            ));
        }
        Ok(())
    }

    /// Linear position, shortest-arc heading, and the velocity of the
    /// segment containing `t`.
    pub fn interpolate(&self, t: f64) -> Result<TrajectorySample> {
        let (start, end) = self
            .span()
            .ok_or_else(|| Error::invalid("trajectory", "no waypoints"))?;
        if !(t >= start && t <= end) {
            return Err(Error::TimeOutOfSpan { t, start, end });
        }
        let pts = &self.0;
        if pts.len() == 1 {
            return Ok(TrajectorySample {
                position: pts[0].position,
                heading: normalize_angle(pts[0].heading),
                velocity: Vec2::ZERO,
            });
        }
        let seg = pts.partition_point(|w| w.t <= t).clamp(1, pts.len() - 1) - 1;
        let (a, b) = (pts[seg], pts[seg + 1]);
        let dt = b.t - a.t;
        let s = (t - a.t) / dt;
        let position = if s == 0.0 {
            a.position
        } else if s == 1.0 {
            b.position
        } else {
            a.position + (b.position - a.position) * s
        };
        let heading = normalize_angle(a.heading + normalize_angle(b.heading - a.heading) * s);
        Ok(TrajectorySample {
            position,
            heading,
            velocity: (b.position - a.position) * (1.0 / dt),
        })
    }
}

pub fn interpolate_trajectory(trajectory: &Trajectory, t: f64) -> Result<TrajectorySample> {
    trajectory.interpolate(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum Role {
    Ego,
    Collaborator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SensorConfig {
    pub beam_count: usize,
    /// Field of view in radians, centered on the heading.
    pub fov: f64,
    pub max_range: f64,
    pub range_sigma: f64,
    /// Covariance over (x, y, heading) of the vehicle pose.
    pub pose_covariance: [[f64; 3]; 3],
    #[serde(default = "default_samples_per_beam")]
    pub samples_per_beam: usize,
    #[serde(default = "default_lr_det")]
    pub lr_det: f64,
    #[serde(default = "default_lr_miss")]
    pub lr_miss: f64,
}

fn default_samples_per_beam() -> usize {
    DEFAULT_SAMPLES_PER_BEAM
}
fn default_lr_det() -> f64 {
    DEFAULT_LR_DET
}
fn default_lr_miss() -> f64 {
    DEFAULT_LR_MISS
}
fn default_mass() -> f64 {
    DEFAULT_EGO_MASS
}

pub const DEFAULT_LR_DET: f64 = 4.0;
pub const DEFAULT_LR_MISS: f64 = 3.0;

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            beam_count: 180,
            fov: std::f64::consts::PI,
            max_range: 30.0,
            range_sigma: 0.05,
            pose_covariance: crate::sensor::diagonal_covariance(0.3, 0.01),
            samples_per_beam: DEFAULT_SAMPLES_PER_BEAM,
            lr_det: DEFAULT_LR_DET,
            lr_miss: DEFAULT_LR_MISS,
        }
    }
}

impl SensorConfig {
    pub fn sampling(&self) -> BeamSampling {
        BeamSampling {
            range_sigma: self.range_sigma,
            samples_per_beam: self.samples_per_beam,
            max_range: self.max_range,
        }
    }

    /// Beam azimuths, centered in equal slices of the field of view.
    pub fn azimuths(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.beam_count as f64;
        (0..self.beam_count).map(move |i| -0.5 * self.fov + (i as f64 + 0.5) * self.fov / n)
    }

    fn validate(&self, field: &str) -> Result<()> {
        let f = |name: &str| format!("{field}.{name}");
        if self.beam_count == 0 {
            return Err(Error::invalid(f("beam_count"), "must be at least 1"));
        }
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::TAU) {
            return Err(Error::invalid(f("fov"), "must lie in (0, 2*pi]"));
        }
        self.sampling().validate().map_err(|e| prefix_field(e, field))?;
        validate_covariance(&self.pose_covariance).map_err(|e| prefix_field(e, field))?;
        SensorModel::new("", self.lr_det, self.lr_miss).map_err(|e| prefix_field(e, field))?;
        Ok(())
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Vehicle {
    pub id: String,
    pub role: Role,
    pub trajectory: Trajectory,
    pub footprint: Footprint,
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub sensor: SensorConfig,
}

impl Vehicle {
    fn body(&self, at: &TrajectorySample) -> OrientedRect {
        OrientedRect {
            center: at.position,
            heading: at.heading,
            length: self.footprint.length,
            width: self.footprint.width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum Shape {
    Rectangle { length: f64, width: f64 },
    Circle { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    pub trajectory: Trajectory,
    /// Marks objects placed to block lines of sight. Every object blocks
    /// beams; the flag is descriptive.
    #[serde(default)]
    pub is_occluder: bool,
}

/// A placed solid at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Solid {
    Rect(OrientedRect),
    Circle { center: Vec2, radius: f64 },
}

impl Solid {
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match self {
            Solid::Rect(r) => r.ray_hit(origin, dir),
            Solid::Circle { center, radius } => ray_circle_hit(origin, dir, *center, *radius),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Solid::Rect(r) => r.contains(p),
            Solid::Circle { center, radius } => (p - *center).norm() <= *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub struct Scenario {
    pub spec: GridSpec,
    /// Scenario length (s).
    pub duration: f64,
    pub vehicles: Vec<Vehicle>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

/// Readings of one vehicle's sensor at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub vehicle_id: String,
    pub epoch: u64,
    pub pose: Pose,
    pub returns: Vec<BeamReturn>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "must be positive"));
        }
        let egos = self.vehicles.iter().filter(|v| v.role == Role::Ego).count();
        if egos != 1 {
            return Err(Error::invalid(
                "vehicles",
                format!("exactly one ego required, found {egos}"),
            ));
        }
        let mut ids = BTreeSet::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            let field = format!("vehicles[{i}]");
            if !ids.insert(v.id.as_str()) {
                return Err(Error::invalid(
                    format!("{field}.id"),
                    format!("duplicate id `{}`", v.id),
                ));
            }
            v.trajectory.validate(&format!("{field}.trajectory"), self.duration)?;
            v.sensor.validate(&format!("{field}.sensor"))?;
            if !(v.footprint.length > 0.0 && v.footprint.width > 0.0) {
                return Err(Error::invalid(
                    format!("{field}.footprint"),
                    "dimensions must be positive",
                ));
            }
            if !(v.mass > 0.0 && v.mass.is_finite()) {
                return Err(Error::invalid(format!("{field}.mass"), "must be positive"));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            let field = format!("objects[{i}]");
            o.trajectory.validate(&format!("{field}.trajectory"), self.duration)?;
            let ok = match o.shape {
                Shape::Rectangle { length, width } => length > 0.0 && width > 0.0,
                Shape::Circle { radius } => radius > 0.0,
            };
            if !ok {
                return Err(Error::invalid(format!("{field}.shape"), "dimensions must be positive"));
            }
        }
        Ok(())
    }

    pub fn epochs(&self) -> u64 {
        (self.duration / self.spec.tau).round() as u64
    }

    pub fn ego(&self) -> &Vehicle {
        self.vehicles
            .iter()
            .find(|v| v.role == Role::Ego)
            .expect("validated scenario has an ego")
    }

    pub fn vehicle(&self, id: &str) -> Result<&Vehicle> {
        self.vehicles
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| Error::UnknownVehicle(id.to_string()))
    }

    /// Every solid present at time `t` except the vehicle `exclude`.
    pub fn solids_at(&self, t: f64, exclude: Option<&str>) -> Result<Vec<Solid>> {
        let mut out = Vec::with_capacity(self.vehicles.len() + self.objects.len());
        for v in &self.vehicles {
            if Some(v.id.as_str()) == exclude {
                continue;
            }
            out.push(Solid::Rect(v.body(&v.trajectory.interpolate(t)?)));
        }
        for o in &self.objects {
            let at = o.trajectory.interpolate(t)?;
            out.push(match o.shape {
                Shape::Rectangle { length, width } => Solid::Rect(OrientedRect {
                    center: at.position,
                    heading: at.heading,
                    length,
                    width,
                }),
                Shape::Circle { radius } => Solid::Circle {
                    center: at.position,
                    radius,
                },
            });
        }
        Ok(out)
    }

    /// Ideal first-hit returns for one vehicle's sensor at `epoch`.
    pub fn simulate_frame(&self, vehicle_id: &str, epoch: u64) -> Result<SensorFrame> {
        let vehicle = self.vehicle(vehicle_id)?;
        let t = epoch as f64 * self.spec.tau;
        if t > self.duration + 1e-9 {
            return Err(Error::TimeOutOfSpan {
                t,
                start: 0.0,
                end: self.duration,
            });
        }
        let at = vehicle.trajectory.interpolate(t.min(self.duration))?;
        let solids = self.solids_at(t.min(self.duration), Some(vehicle_id))?;
        let sensor = &vehicle.sensor;
        let returns = sensor
            .azimuths()
            .map(|azimuth| {
                let dir = Vec2::from_angle(at.heading + azimuth);
                let range = solids
                    .iter()
                    .filter_map(|s| s.ray_hit(at.position, dir))
                    .fold(f64::INFINITY, f64::min);
                BeamReturn {
                    azimuth,
                    range: (range <= sensor.max_range).then_some(range),
                }
            })
            .collect();
        Ok(SensorFrame {
            vehicle_id: vehicle_id.to_string(),
            epoch,
            pose: Pose::with_covariance(at.position, at.heading, sensor.pose_covariance)?,
            returns,
        })
    }

    /// Same scenario with a different cell size over the same extent.
    pub fn with_cell_size(&self, cell_size: f64) -> Result<Scenario> {
        let extent = self.spec.extent_max() - self.spec.origin;
        let mut out = self.clone();
        out.spec.cell_size = cell_size;
        out.spec.width = (extent.x / cell_size).round().max(1.0) as usize;
        out.spec.height = (extent.y / cell_size).round().max(1.0) as usize;
        out.validate()?;
        Ok(out)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Scenario> {
        let mut out = self.clone();
        out.spec.tau = tau;
        out.validate()?;
        Ok(out)
    }

    /// Shifts every trajectory and the grid origin by `offset`.
    pub fn translated(&self, offset: Vec2) -> Scenario {
        let mut out = self.clone();
        out.spec.origin += offset;
        let shift = |t: &mut Trajectory| t.0.iter_mut().for_each(|w| w.position += offset);
        out.vehicles.iter_mut().for_each(|v| shift(&mut v.trajectory));
        out.objects.iter_mut().for_each(|o| shift(&mut o.trajectory));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cooperation {
    EgoOnly,
    Cooperative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub cooperation: Cooperation,
    pub seed: u64,
    /// Pose samples for the ego occupancy at each epoch.
    pub ego_samples: usize,
    /// Epochs at which a map snapshot is kept.
    pub snapshot_epochs: BTreeSet<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            cooperation: Cooperation::Cooperative,
            seed: DEFAULT_SEED,
            ego_samples: DEFAULT_EGO_SAMPLES,
            snapshot_epochs: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: u64,
    pub cells: GridMap<CellDynamicState>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub profile: RiskProfile,
    pub snapshots: Vec<Snapshot>,
    /// Largest `|sum of particle weights - r|` seen after any epoch.
    pub max_weight_discrepancy: f64,
    pub peak_particles: usize,
}

/// Stepwise driver of one scenario run.
pub struct Simulation {
    scenario: Scenario,
    loss: LossConfig,
    options: RunOptions,
    filter: DynamicGridFilter,
    sensing: Vec<usize>,
    models: Vec<SensorModel>,
    profile: RiskProfile,
    epoch: u64,
}

impl Simulation {
    pub fn new(
        scenario: &Scenario,
        filter_config: FilterConfig,
        loss: LossConfig,
        options: RunOptions,
    ) -> Result<Self> {
        scenario.validate()?;
        loss.validate()?;
        if options.ego_samples == 0 {
            return Err(Error::invalid("ego_samples", "must be at least 1"));
        }
        let config = FilterConfig {
            seed: options.seed,
            ..filter_config
        };
        let filter = DynamicGridFilter::new(scenario.spec, config)?;
        let sensing: Vec<usize> = scenario
            .vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.role == Role::Ego || options.cooperation == Cooperation::Cooperative)
            .map(|(i, _)| i)
            .collect();
        let models = sensing
            .iter()
            .map(|&i| {
                let v = &scenario.vehicles[i];
                SensorModel::new(v.id.clone(), v.sensor.lr_det, v.sensor.lr_miss)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulation {
            scenario: scenario.clone(),
            loss,
            options,
            filter,
            sensing,
            models,
            profile: RiskProfile::new(),
            epoch: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn filter(&self) -> &DynamicGridFilter {
        &self.filter
    }

    pub fn profile(&self) -> &RiskProfile {
        &self.profile
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.scenario.epochs()
    }

    /// Ego state at the current epoch.
    pub fn ego_state(&self) -> Result<EgoState> {
        let ego = self.scenario.ego();
        let at = ego.trajectory.interpolate(self.time())?;
        Ok(EgoState {
            pose: Pose::with_covariance(at.position, at.heading, ego.sensor.pose_covariance)?,
            velocity: at.velocity,
            footprint: ego.footprint,
            mass: ego.mass,
        })
    }

    fn time(&self) -> f64 {
        (self.epoch as f64 * self.scenario.spec.tau).min(self.scenario.duration)
    }

    /// Runs one epoch; returns `None` once the scenario is exhausted.
    pub fn step(&mut self) -> Result<Option<RiskRow>> {
        if self.is_done() {
            return Ok(None);
        }
        let spec = self.scenario.spec;
        let seed = self.options.seed;
        let k = self.epoch;
        if k > 0 {
            self.filter.predict(spec.tau);
        }
        let mut grids = Vec::with_capacity(self.sensing.len());
        for &vi in &self.sensing {
            let vehicle = &self.scenario.vehicles[vi];
            let frame = self.scenario.simulate_frame(&vehicle.id, k)?;
            let frame_seed = derive_seed(seed, Stream::Beam, &[k, vi as u64]);
            grids.push(sample_beams(
                &spec,
                &frame.pose,
                &frame.returns,
                &vehicle.sensor.sampling(),
                frame_seed,
            )?);
        }
        self.filter.update(&grids, &self.models)?;
        self.filter.resample();

        let ego = self.ego_state()?;
        let occupancy = ego_occupancy(
            &ego,
            &spec,
            self.options.ego_samples,
            derive_seed(seed, Stream::EgoPose, &[k]),
        )?;
        let risk = instantaneous_risk(&self.filter, &ego, &occupancy, &self.loss)?;
        let row = *self.profile.accumulate(k as f64 * spec.tau, risk);
        self.epoch += 1;
        Ok(Some(row))
    }

    pub fn run(mut self) -> Result<RunOutput> {
        let mut snapshots = Vec::new();
        let mut max_weight_discrepancy: f64 = 0.0;
        let mut peak_particles = 0;
        while let Some(row) = self.step()? {
            max_weight_discrepancy = max_weight_discrepancy.max(self.filter.max_weight_discrepancy());
            peak_particles = peak_particles.max(self.filter.particle_count());
            if self.options.snapshot_epochs.contains(&row.epoch) {
                snapshots.push(Snapshot {
                    epoch: row.epoch,
                    cells: self.filter.cells().clone(),
                });
            }
        }
        Ok(RunOutput {
            profile: self.profile,
            snapshots,
            max_weight_discrepancy,
            peak_particles,
        })
    }
}

/// Runs a whole scenario under one cooperation mode.
pub fn run(scenario: &Scenario, filter: FilterConfig, loss: LossConfig, options: RunOptions) -> Result<RunOutput> {
    Simulation::new(scenario, filter, loss, options)?.run()
}
