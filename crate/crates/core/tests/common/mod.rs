//! Independent reference implementations shared by the integration tests
//! and the acceptance target.
#![allow(dead_code)]

use gridrisk::risk::{EgoOccupancy, LatticeCell};
use gridrisk::{BetaState, CellIndex, GridSpec, Particle, Vec2};
use rand::Rng;
use rand_distr::{Beta, Distribution};

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// `∫_0^{1/2} ρ^(a-1) (1-ρ)^(b-1) dρ` after substituting `ρ = t^q`, which
/// removes the endpoint singularity when `a < 1`.
fn half_integral(a: f64, b: f64, n: usize) -> f64 {
    let q = (2.0 / a).max(1.0);
    let upper = 0.5f64.powf(1.0 / q);
    simpson(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let rho = t.powf(q);
            (q.ln() + (q * a - 1.0) * t.ln() + (b - 1.0) * (-rho).ln_1p()).exp()
        },
        0.0,
        upper,
        n,
    )
}

/// Numerical `∫_0^1 ρ^(a-1) (1-ρ)^(b-1) dρ`, split at 1/2 so each half has
/// its own substitution.
pub fn beta_integral(a: f64, b: f64, n: usize) -> f64 {
    half_integral(a, b, n) + half_integral(b, a, n)
}

/// Posterior mean after `k` detections and `m` misses on a Beta(α, β) prior,
/// by integrating the unnormalized posterior.
pub fn integrated_posterior_mean(alpha: f64, beta: f64, k: u32, m: u32, n: usize) -> f64 {
    let a = alpha + k as f64;
    let b = beta + m as f64;
    beta_integral(a + 1.0, b, n) / beta_integral(a, b, n)
}

/// Cells touched by the segment, found by sampling it every
/// `cell_size / 1000` and bisecting any step that jumps between cells that
/// do not share an edge. A jump that survives bisection is an exact corner
/// crossing and is resolved x first.
pub fn dense_ray_cells(spec: &GridSpec, origin: Vec2, dir: Vec2, range: f64) -> Vec<CellIndex> {
    let dir = dir * (1.0 / dir.norm());
    let at = |t: f64| spec.world_to_cell(origin + dir * t);
    let step = spec.cell_size / 1000.0;
    let n = (range / step).ceil() as usize;
    let mut out: Vec<CellIndex> = Vec::new();
    let push = |out: &mut Vec<CellIndex>, c: Option<CellIndex>| {
        if let Some(c) = c {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
    };
    let mut prev_t = 0.0;
    let mut prev = at(0.0);
    push(&mut out, prev);
    for i in 1..=n {
        let t = (i as f64 * step).min(range);
        let c = at(t);
        if c != prev {
            refine(&at, prev_t, prev, t, c, &mut out, &push);
        }
        prev_t = t;
        prev = c;
    }
    out
}

fn refine(
    at: &impl Fn(f64) -> Option<CellIndex>,
    ta: f64,
    ca: Option<CellIndex>,
    tb: f64,
    cb: Option<CellIndex>,
    out: &mut Vec<CellIndex>,
    push: &impl Fn(&mut Vec<CellIndex>, Option<CellIndex>),
) {
    let adjacent = match (ca, cb) {
        (Some(a), Some(b)) => a.col.abs_diff(b.col) + a.row.abs_diff(b.row) == 1,
        _ => false,
    };
    if adjacent {
        push(out, cb);
        return;
    }
    if tb - ta < 1e-9 {
        // the segment passes through a cell corner: step x before y
        if let (Some(a), Some(b)) = (ca, cb) {
            if a.col != b.col && a.row != b.row {
                push(out, Some(CellIndex::new(b.col, a.row)));
            }
        }
        push(out, cb);
        return;
    }
    let tm = 0.5 * (ta + tb);
    let cm = at(tm);
    if cm == ca {
        refine(at, tm, cm, tb, cb, out, push);
    } else if cm == cb {
        refine(at, ta, ca, tm, cm, out, push);
    } else {
        refine(at, ta, ca, tm, cm, out, push);
        refine(at, tm, cm, tb, cb, out, push);
    }
}

/// Weighted mean velocity and central second moment.
pub fn moments(particles: &[Particle]) -> (Vec2, f64) {
    let w: f64 = particles.iter().map(|p| p.weight).sum();
    if w <= 0.0 {
        return (Vec2::ZERO, 0.0);
    }
    let mx = particles.iter().map(|p| p.weight * p.velocity.x).sum::<f64>() / w;
    let my = particles.iter().map(|p| p.weight * p.velocity.y).sum::<f64>() / w;
    let m2 = particles
        .iter()
        .map(|p| p.weight * ((p.velocity.x - mx).powi(2) + (p.velocity.y - my).powi(2)))
        .sum::<f64>()
        / w;
    (Vec2::new(mx, my), m2)
}

/// Kinetic-energy loss constants for the given masses.
pub fn kinetic_constants(ego_mass: f64, cell_mass: f64) -> (f64, f64) {
    (ego_mass * cell_mass / (2.0 * (ego_mass + cell_mass)), cell_mass / 2.0)
}

/// One risk summand as seen by the oracles.
#[derive(Debug, Clone, Copy)]
pub struct Exposure {
    pub occupancy: BetaState,
    pub weight: f64,
}

/// Builds the per-cell summands `(Beta, p_ego·(1-mask)·L)` from first
/// principles: velocity moments are recomputed from raw particles and
/// lattice cells outside the grid use Beta(1,1) and a still cell.
#[allow(clippy::too_many_arguments)]
pub fn exposures(
    spec: &GridSpec,
    beta_of: impl Fn(CellIndex) -> BetaState,
    particles_of: impl Fn(CellIndex) -> Vec<Particle>,
    occupancy: &EgoOccupancy,
    ego_velocity: Vec2,
    ego_mass: f64,
    cell_mass: f64,
) -> Vec<Exposure> {
    let (c1, c2) = kinetic_constants(ego_mass, cell_mass);
    let mut out = Vec::new();
    for (&(col, row), &p) in &occupancy.probability {
        let uncovered = 1.0 - occupancy.mask.get(&(col, row)).copied().unwrap_or(0.0);
        let inside = col >= 0 && row >= 0 && (col as usize) < spec.width && (row as usize) < spec.height;
        let (beta, v, m2) = if inside {
            let idx = CellIndex::new(col as usize, row as usize);
            let (v, m2) = moments(&particles_of(idx));
            (beta_of(idx), v, m2)
        } else {
            (BetaState::IGNORANT, Vec2::ZERO, 0.0)
        };
        let dv = ego_velocity - v;
        let loss = (c1 * (dv.x * dv.x + dv.y * dv.y) + c2 * m2) * spec.cell_size * spec.cell_size * spec.tau;
        let weight = p * uncovered * loss;
        if weight > 0.0 {
            out.push(Exposure {
                occupancy: beta,
                weight,
            });
        }
    }
    out
}

/// Monte Carlo estimate of the risk mean and of the variance of the
/// conditional mean `E[loss | r]`, each with a standard error.
#[derive(Debug, Clone, Copy)]
pub struct McRisk {
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
}

/// Draws `r_c ~ Beta`, then `o_c ~ Bernoulli(r_c)`, and sums `o_c·w_c`.
/// The variance of `E[loss | r]` is recovered with the law of total
/// variance: sample variance of the loss minus the mean conditional
/// Bernoulli variance `Σ w_c² r_c (1 - r_c)`. Standard errors use batch
/// means over `batches` equal batches.
pub fn monte_carlo_risk<R: Rng>(terms: &[Exposure], trials: usize, batches: usize, rng: &mut R) -> McRisk {
    let dists: Vec<Beta<f64>> = terms
        .iter()
        .map(|t| Beta::new(t.occupancy.alpha, t.occupancy.beta).unwrap())
        .collect();
    let per_batch = trials / batches;
    let mut batch_means = Vec::with_capacity(batches);
    let mut batch_vars = Vec::with_capacity(batches);
    let (mut sum, mut sum_sq, mut cond) = (0.0, 0.0, 0.0);
    for _ in 0..batches {
        let (mut s, mut s2, mut c) = (0.0, 0.0, 0.0);
        for _ in 0..per_batch {
            let mut loss = 0.0;
            let mut bern = 0.0;
            for (t, d) in terms.iter().zip(&dists) {
                let r: f64 = d.sample(rng);
                if rng.random::<f64>() < r {
                    loss += t.weight;
                }
                bern += t.weight * t.weight * r * (1.0 - r);
            }
            s += loss;
            s2 += loss * loss;
            c += bern;
        }
        let n = per_batch as f64;
        let m = s / n;
        batch_means.push(m);
        batch_vars.push((s2 - n * m * m) / (n - 1.0) - c / n);
        sum += s;
        sum_sq += s2;
        cond += c;
    }
    let n = (per_batch * batches) as f64;
    let mean = sum / n;
    let variance = (sum_sq - n * mean * mean) / (n - 1.0) - cond / n;
    let se = |xs: &[f64]| {
        let k = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / k;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    };
    McRisk {
        mean,
        mean_se: se(&batch_means),
        variance,
        variance_se: se(&batch_vars),
    }
}

/// Brute-force ego occupancy: for each noisy footprint, tests one uniform
/// point in every candidate cell. The hit rate is an unbiased estimate of
/// the expected covered fraction.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_occupancy<R: Rng>(
    spec: &GridSpec,
    center: Vec2,
    heading: f64,
    length: f64,
    width: f64,
    sigma_xy: f64,
    samples: usize,
    cells: &[LatticeCell],
    rng: &mut R,
) -> Vec<f64> {
    use rand_distr::StandardNormal;
    let (s, co) = heading.sin_cos();
    let mut hits = vec![0u64; cells.len()];
    for _ in 0..samples {
        let cx = center.x + rng.sample::<f64, _>(StandardNormal) * sigma_xy;
        let cy = center.y + rng.sample::<f64, _>(StandardNormal) * sigma_xy;
        for (slot, &(col, row)) in hits.iter_mut().zip(cells) {
            let px = spec.origin.x + (col as f64 + rng.random::<f64>()) * spec.cell_size;
            let py = spec.origin.y + (row as f64 + rng.random::<f64>()) * spec.cell_size;
            let (rx, ry) = (px - cx, py - cy);
            let u = rx * co + ry * s;
            let v = -rx * s + ry * co;
            if u.abs() <= length / 2.0 && v.abs() <= width / 2.0 {
                *slot += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / samples as f64).collect()
}
