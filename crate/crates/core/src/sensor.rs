//! Monte Carlo beam measurement model.
//!
//! Each physical beam is replaced by `K` sampled beams drawn under pose and
//! range noise. Every sampled beam adds `1/K` of a miss to each cell it
//! passes through and `1/K` of a detection to the cell where it ends, giving
//! per-cell expected detection and miss counts.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, Vec2};
use crate::grid::{CellFields, CellIndex, GridMap, GridSpec};
use crate::rng::{stream_rng, Stream};

pub const DEFAULT_SAMPLES_PER_BEAM: usize = 10;

/// Sensor or vehicle pose with Gaussian uncertainty over `(x, y, heading)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
    pub covariance: [[f64; 3]; 3],
}

impl Pose {
    pub fn exact(position: Vec2, heading: f64) -> Self {
        Pose {
            position,
            heading: normalize_angle(heading),
            covariance: [[0.0; 3]; 3],
        }
    }

    pub fn with_covariance(position: Vec2, heading: f64, covariance: [[f64; 3]; 3]) -> Result<Self> {
        validate_covariance(&covariance)?;
        Ok(Pose {
            position,
            heading: normalize_angle(heading),
            covariance,
        })
    }

    /// Draws perturbed poses from the pose distribution.
    pub fn sampler(&self) -> PoseSampler {
        PoseSampler {
            mean: *self,
            sqrt_cov: matrix_sqrt(&self.covariance),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.covariance.iter().flatten().all(|&v| v == 0.0)
    }
}

/// Diagonal covariance from standard deviations.
pub fn diagonal_covariance(sigma_xy: f64, sigma_heading: f64) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    c[0][0] = sigma_xy * sigma_xy;
    c[1][1] = sigma_xy * sigma_xy;
    c[2][2] = sigma_heading * sigma_heading;
    c
}

pub fn validate_covariance(cov: &[[f64; 3]; 3]) -> Result<()> {
    let m = Matrix3::from_fn(|i, j| cov[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("pose_covariance", "entries must be finite"));
    }
    if m.iter()
        .zip(m.transpose().iter())
        .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(Error::invalid("pose_covariance", "must be symmetric"));
    }
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::invalid("pose_covariance", "must be positive semidefinite"));
    }
    Ok(())
}

/// Symmetric square root; negative round-off eigenvalues are clamped to zero,
/// so rank-deficient covariances are fine.
fn matrix_sqrt(cov: &[[f64; 3]; 3]) -> Matrix3<f64> {
    let m = Matrix3::from_fn(|i, j| cov[i][j]);
    if m.iter().all(|&v| v == 0.0) {
        return Matrix3::zeros();
    }
    let eig = SymmetricEigen::new(m);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose()
}

#[derive(Debug, Clone)]
pub struct PoseSampler {
    mean: Pose,
    sqrt_cov: Matrix3<f64>,
}

impl PoseSampler {
    /// Returns `(position, heading)` of one draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec2, f64) {
        if self.sqrt_cov == Matrix3::zeros() {
            return (self.mean.position, self.mean.heading);
        }
        let z = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let d = self.sqrt_cov * z;
        (self.mean.position + Vec2::new(d[0], d[1]), self.mean.heading + d[2])
    }
}

/// One physical beam: azimuth relative to the sensor heading and the
/// measured range, or `None` when nothing was hit within max range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamReturn {
    pub azimuth: f64,
    pub range: Option<f64>,
}

/// Expected detection and miss counts in one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Counts {
    pub det: f64,
    pub miss: f64,
}

impl CellFields for Counts {
    fn field_names() -> &'static [&'static str] {
        &["det", "miss"]
    }
    fn field_values(&self) -> Vec<f64> {
        vec![self.det, self.miss]
    }
}

/// Per-cell expected counts from one sensor at one epoch.
pub type MeasurementGrid = GridMap<Counts>;

/// Result of walking a ray through the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RayTrace {
    pub traversed: Vec<CellIndex>,
    pub terminal: Option<CellIndex>,
}

/// Walks the segment from `origin` along `direction` for `range` meters,
/// listing the cells crossed before the endpoint cell.
pub fn cast_ray(spec: &GridSpec, origin: Vec2, direction: Vec2, range: f64) -> Result<RayTrace> {
    let mut traversed = Vec::new();
    let terminal = walk_ray(spec, origin, direction, range, |i| traversed.push(spec.index_of(i)))?;
    Ok(RayTrace {
        traversed,
        terminal: terminal.map(|i| spec.index_of(i)),
    })
}

/// Boundary crossings closer than this along the ray (m) are a corner tie.
const CORNER_TIE: f64 = 1e-9;

/// Visits linear indices of the cells crossed by the segment (excluding the
/// endpoint cell) and returns the endpoint cell when it is on the grid.
/// Ties at cell corners step in x before y.
pub(crate) fn walk_ray(
    spec: &GridSpec,
    origin: Vec2,
    direction: Vec2,
    range: f64,
    mut visit: impl FnMut(usize),
) -> Result<Option<usize>> {
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("direction", "must be a non-zero finite vector"));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::invalid("range", "must be positive and finite"));
    }
    let dir = direction * (1.0 / norm);
    let end = origin + dir * range;
    let terminal = spec.world_to_cell(end).map(|c| spec.linear(c));

    // clip [0, range] to the grid box
    let lo = spec.origin;
    let hi = spec.extent_max();
    let mut t0: f64 = 0.0;
    let mut t1 = range;
    for (o, d, l, h) in [(origin.x, dir.x, lo.x, hi.x), (origin.y, dir.y, lo.y, hi.y)] {
        if d == 0.0 {
            if o < l || o >= h {
                return Ok(None);
            }
        } else {
            let a = (l - o) / d;
            let b = (h - o) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t0 > t1 || (t0 == t1 && terminal.is_none()) {
        return Ok(terminal);
    }

    let cs = spec.cell_size;
    let start = origin + dir * t0;
    let start_cell = |p: f64, o: f64, d: f64, n: usize| -> i64 {
        let u = (p - o) / cs;
        let mut c = u.floor();
        if d < 0.0 && u == c {
            c -= 1.0;
        }
        (c as i64).clamp(0, n as i64 - 1)
    };
    let mut col = start_cell(start.x, lo.x, dir.x, spec.width);
    let mut row = start_cell(start.y, lo.y, dir.y, spec.height);

    let axis = |o: f64, d: f64, c: i64, l: f64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, (l + (c + 1) as f64 * cs - o) / d, cs / d)
        } else if d < 0.0 {
            (-1, (l + c as f64 * cs - o) / d, -cs / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_max_x, dt_x) = axis(origin.x, dir.x, col, lo.x);
    let (step_y, mut t_max_y, dt_y) = axis(origin.y, dir.y, row, lo.y);

    let (w, h) = (spec.width as i64, spec.height as i64);
    let mut last = None;
    loop {
        let here = (row * w + col) as usize;
        if let Some(prev) = last {
            visit(prev);
        }
        last = Some(here);
        if t_max_x.min(t_max_y) >= t1 {
            break;
        }
        if t_max_x <= t_max_y + CORNER_TIE {
            col += step_x;
            t_max_x += dt_x;
        } else {
            row += step_y;
            t_max_y += dt_y;
        }
        if col < 0 || col >= w || row < 0 || row >= h {
            break;
        }
    }
    if let Some(last) = last {
        if Some(last) != terminal {
            visit(last);
        }
    }
    Ok(terminal)
}

/// Noise and sampling parameters for [`sample_beams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSampling {
    /// Range noise standard deviation (m).
    pub range_sigma: f64,
    pub samples_per_beam: usize,
    pub max_range: f64,
}

impl BeamSampling {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_sigma >= 0.0 && self.range_sigma.is_finite()) {
            return Err(Error::invalid("range_sigma", "must be non-negative"));
        }
        if self.samples_per_beam == 0 {
            return Err(Error::invalid("samples_per_beam", "must be at least 1"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::invalid("max_range", "must be positive"));
        }
        Ok(())
    }
}

enum Hit {
    Miss(usize),
    Det(usize),
}

/// Converts one sensor frame into expected per-cell detection and miss
/// counts. Beam `i` draws from its own stream keyed by `(seed, i)` and the
/// per-beam tallies are reduced in beam order, so the output is
/// bit-identical for a given seed regardless of thread count.
pub fn sample_beams(
    spec: &GridSpec,
    pose: &Pose,
    returns: &[BeamReturn],
    sampling: &BeamSampling,
    seed: u64,
) -> Result<MeasurementGrid> {
    sampling.validate()?;
    let sampler = pose.sampler();
    let k = sampling.samples_per_beam;
    let per_beam: Vec<Result<Vec<Hit>>> = returns
        .par_iter()
        .enumerate()
        .map(|(i, ret)| {
            let mut rng = stream_rng(seed, Stream::Beam, &[i as u64]);
            let mut hits = Vec::new();
            for _ in 0..k {
                let (pos, heading) = sampler.sample(&mut rng);
                let dir = Vec2::from_angle(heading + ret.azimuth);
                match ret.range {
                    Some(r) => {
                        let noise: f64 = if sampling.range_sigma > 0.0 {
                            sampling.range_sigma * rng.sample::<f64, _>(StandardNormal)
                        } else {
                            0.0
                        };
                        let r = (r + noise).clamp(1e-6, sampling.max_range);
                        let term = walk_ray(spec, pos, dir, r, |c| hits.push(Hit::Miss(c)))?;
                        if let Some(c) = term {
                            hits.push(Hit::Det(c));
                        }
                    }
                    None => {
                        let term = walk_ray(spec, pos, dir, sampling.max_range, |c| hits.push(Hit::Miss(c)))?;
                        if let Some(c) = term {
                            hits.push(Hit::Miss(c));
                        }
                    }
                }
            }
            Ok(hits)
        })
        .collect();

    let inc = 1.0 / k as f64;
    let mut grid = MeasurementGrid::new(*spec);
    let cells = grid.cells_mut();
    for beam in per_beam {
        for hit in beam? {
            match hit {
                Hit::Miss(c) => cells[c].miss += inc,
                Hit::Det(c) => cells[c].det += inc,
            }
        }
    }
    Ok(grid)
}

/// Bundles per-sensor measurement grids that share one grid spec. Counts are
/// kept separate because each sensor carries its own weights.
pub fn merge(grids: Vec<MeasurementGrid>) -> Result<Vec<MeasurementGrid>> {
    if let Some(first) = grids.first() {
        let spec = *first.spec();
        if grids.iter().any(|g| *g.spec() != spec) {
            return Err(Error::SpecMismatch);
        }
    }
    Ok(grids)
}
