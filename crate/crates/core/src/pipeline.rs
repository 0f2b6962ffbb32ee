//! Tube relations, tube energies, cone-neighbourhood masses, good sets, heavy tuple
//! extraction and the restricted sublevel measure.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::covers::{five_r_reduce, Ball, BallCover, CoverError};
use crate::geom3::{refined_length, DirectionCurve, GeomError, Interval, ProjectionFamily, Vec3};
use crate::measure::{MeasureError, WeightedPointCloud};
use crate::util::compensated_sum;

/// Relative slack when checking chain inequalities that hold exactly in real arithmetic.
pub const CHAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("projected point {point} at θ = {theta} lies in no tube")]
    Coverage { theta: f64, point: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

pub type PipelineResult<T> = Result<T, PipelineError>;

/// Per-θ covers of a projected cloud by balls of radius `5δ`, and the induced relation
/// `x ~_θ y` (the projections share a ball).
#[derive(Debug, Clone)]
pub struct TubeSystem {
    thetas: Vec<f64>,
    weights: Vec<f64>,
    delta: f64,
    sigma: f64,
    covers: Vec<BallCover>,
    /// `members[θ][i]`: sorted indices of the balls of `covers[θ]` containing point `i`.
    members: Vec<Vec<Vec<u32>>>,
    tube_masses: Vec<Vec<f64>>,
    n_points: usize,
}

impl TubeSystem {
    /// Greedy `δ`-net of each projection, reduced by the 5r rule.
    pub fn build(
        cloud: &WeightedPointCloud,
        family: &ProjectionFamily,
        thetas: Vec<f64>,
        weights: Vec<f64>,
        delta: f64,
        sigma: f64,
    ) -> PipelineResult<Self> {
        if thetas.is_empty() || thetas.len() != weights.len() {
            return Err(PipelineError::InvalidArgument(format!(
                "{} θ values with {} weights",
                thetas.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(PipelineError::InvalidArgument("θ weights must be non-negative".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(PipelineError::InvalidArgument(format!("δ = {delta} must be positive")));
        }
        let per_theta: Vec<(BallCover, Vec<Vec<u32>>, Vec<f64>)> = thetas
            .par_iter()
            .map(|&theta| {
                let proj = cloud.pushforward(family, theta)?;
                let cover = five_r_reduce(&delta_net(&proj, delta)?)?;
                let members = memberships(&proj, &cover);
                if let Some(point) = members.iter().position(|m| m.is_empty()) {
                    return Err(PipelineError::Coverage { theta, point });
                }
                let mut masses = vec![Vec::new(); cover.len()];
                for (i, m) in members.iter().enumerate() {
                    for &t in m {
                        masses[t as usize].push(proj.masses()[i]);
                    }
                }
                let masses = masses.into_iter().map(compensated_sum).collect();
                Ok((cover, members, masses))
            })
            .collect::<PipelineResult<_>>()?;
        let mut covers = Vec::with_capacity(per_theta.len());
        let mut members = Vec::with_capacity(per_theta.len());
        let mut tube_masses = Vec::with_capacity(per_theta.len());
        for (c, m, t) in per_theta {
            covers.push(c);
            members.push(m);
            tube_masses.push(t);
        }
        Ok(Self {
            thetas,
            weights,
            delta,
            sigma,
            covers,
            members,
            tube_masses,
            n_points: cloud.len(),
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covers(&self) -> &[BallCover] {
        &self.covers
    }

    pub fn num_points(&self) -> usize {
        self.n_points
    }

    /// Whether points `i` and `j` share a tube at the `t`-th θ.
    pub fn related(&self, t: usize, i: usize, j: usize) -> bool {
        share(&self.members[t][i], &self.members[t][j])
    }

    /// `Σ_θ w_θ 1[i ~_θ j]`.
    pub fn relation_measure(&self, i: usize, j: usize) -> f64 {
        compensated_sum(
            (0..self.thetas.len())
                .filter(|&t| self.related(t, i, j))
                .map(|t| self.weights[t]),
        )
    }

    /// `max_θ N_θ δ^σ`, the constant in `N_θ ≤ C δ^{-σ}`.
    pub fn fitted_count_constant(&self) -> f64 {
        self.covers
            .iter()
            .map(|c| c.len() as f64 * self.delta.powf(self.sigma))
            .fold(0.0, f64::max)
    }
}

fn delta_net(proj: &WeightedPointCloud, delta: f64) -> PipelineResult<BallCover> {
    let dim = proj.dim();
    let key = |p: &[f64; 3]| {
        let mut k = [0i64; 3];
        for i in 0..dim {
            k[i] = (p[i] / delta).floor() as i64;
        }
        k
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut centers: Vec<[f64; 3]> = Vec::new();
    for p in proj.points() {
        let k = key(p);
        let mut covered = false;
        'scan: for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                for dz in -1..=1i64 {
                    let n = [k[0] + dx, k[1] + dy, k[2] + dz];
                    if let Some(v) = grid.get(&n) {
                        if v.iter().any(|&c| dist(&centers[c], p) <= delta) {
                            covered = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if !covered {
            grid.entry(k).or_default().push(centers.len());
            centers.push(*p);
        }
    }
    Ok(BallCover::new(
        dim,
        centers.into_iter().map(|c| Ball::new(c, delta)).collect(),
    )?)
}

fn memberships(proj: &WeightedPointCloud, cover: &BallCover) -> Vec<Vec<u32>> {
    proj.points()
        .par_iter()
        .map(|p| {
            cover
                .balls
                .iter()
                .enumerate()
                .filter(|(_, b)| b.contains(p))
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect()
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn share(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    false
}

/// One inequality `lhs ≤ rhs` of the energy chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub delta: f64,
    /// Constant fitted from the data, where the row depends on one.
    pub fitted: Option<f64>,
}

impl ChainRow {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + CHAIN_SLACK * self.rhs.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeEnergy {
    /// `Σ_θ w_θ (μ×μ){x ~_θ y}`.
    pub theta_first: f64,
    /// `Σ_{x,y} m_x m_y Σ_θ w_θ 1[x ~_θ y]`.
    pub pair_first: f64,
    pub chain: Vec<ChainRow>,
}

struct ThetaStats {
    pair_mass: f64,
    n_tubes: usize,
    max_overlap: usize,
    sum_mass: f64,
    sum_sq: f64,
    union_mass: f64,
}

/// Tube energy computed both ways, plus the lower-bound chain
/// `μ(∪)²/(N M) ≤ (Σ μ(T))²/(N M) ≤ Σ μ(T)²/M ≤ (μ×μ){~_θ}` summed over θ.
pub fn tube_energy(cloud: &WeightedPointCloud, system: &TubeSystem) -> PipelineResult<TubeEnergy> {
    if cloud.len() != system.n_points {
        return Err(PipelineError::InvalidArgument(format!(
            "cloud has {} points but the system was built for {}",
            cloud.len(),
            system.n_points
        )));
    }
    let m = cloud.masses();
    let n = m.len();
    let stats: Vec<ThetaStats> = (0..system.thetas.len())
        .into_par_iter()
        .map(|t| {
            let mem = &system.members[t];
            let pair_mass = compensated_sum((0..n).map(|i| {
                m[i] * compensated_sum(
                    (0..n).filter(|&j| share(&mem[i], &mem[j])).map(|j| m[j]),
                )
            }));
            let tm = &system.tube_masses[t];
            ThetaStats {
                pair_mass,
                n_tubes: tm.len(),
                max_overlap: mem.iter().map(Vec::len).max().unwrap_or(0),
                sum_mass: compensated_sum(tm.iter().copied()),
                sum_sq: compensated_sum(tm.iter().map(|x| x * x)),
                union_mass: compensated_sum(
                    (0..n).filter(|&i| !mem[i].is_empty()).map(|i| m[i]),
                ),
            }
        })
        .collect();
    let w = &system.weights;
    let theta_first = compensated_sum(stats.iter().zip(w).map(|(s, w)| w * s.pair_mass));
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            compensated_sum((0..n).map(|j| m[i] * m[j] * system.relation_measure(i, j)))
        })
        .collect();
    let pair_first = compensated_sum(rows);

    let delta = system.delta;
    let sum_w = |f: &dyn Fn(&ThetaStats) -> f64| {
        compensated_sum(stats.iter().zip(w).map(|(s, w)| w * f(s)))
    };
    let cs_lhs = sum_w(&|s| s.sum_mass * s.sum_mass / s.n_tubes as f64);
    let cs_rhs = sum_w(&|s| s.sum_sq);
    let ov_rhs = sum_w(&|s| s.max_overlap as f64 * s.pair_mass);
    let union_lhs = sum_w(&|s| s.union_mass.powi(2) / (s.n_tubes * s.max_overlap) as f64);
    let c_fit = system.fitted_count_constant();
    let m_max = stats.iter().map(|s| s.max_overlap).max().unwrap_or(1) as f64;
    let sigma_lhs = delta.powf(system.sigma) / (c_fit * m_max) * sum_w(&|s| s.union_mass.powi(2));
    let chain = vec![
        ChainRow {
            name: "cauchy_schwarz",
            lhs: cs_lhs,
            rhs: cs_rhs,
            delta,
            fitted: None,
        },
        ChainRow {
            name: "overlap",
            lhs: cs_rhs,
            rhs: ov_rhs,
            delta,
            fitted: Some(m_max),
        },
        ChainRow {
            name: "union_lower",
            lhs: union_lhs,
            rhs: theta_first,
            delta,
            fitted: None,
        },
        ChainRow {
            name: "sigma_chain",
            lhs: sigma_lhs,
            rhs: theta_first,
            delta,
            fitted: Some(c_fit),
        },
    ];
    Ok(TubeEnergy {
        theta_first,
        pair_first,
        chain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Lines `span γ(θ)`.
    Curve,
    /// Lines `span (γ × γ')(θ)`.
    Binormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    TwoSided,
    /// Only the part with non-negative height.
    Plus,
}

/// Thickened union of lines through the origin, one per θ in a grid.
#[derive(Debug, Clone)]
pub struct ConeField {
    generator: Generator,
    thetas: Vec<f64>,
    dirs: Vec<Vec3>,
    radius: f64,
    side: Side,
    /// `max gap/2 × Lipschitz constant of θ ↦ direction`.
    slack_rate: f64,
}

impl ConeField {
    pub fn new(
        curve: &DirectionCurve,
        generator: Generator,
        thetas: Vec<f64>,
        radius: f64,
        side: Side,
    ) -> PipelineResult<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PipelineError::InvalidArgument(format!(
                "thickening {radius} must be positive"
            )));
        }
        if thetas.is_empty() {
            return Err(PipelineError::InvalidArgument("empty θ grid".into()));
        }
        let dirs = thetas
            .iter()
            .map(|&t| {
                let j = curve.eval(t)?;
                let v = match generator {
                    Generator::Curve => j.g,
                    Generator::Binormal => j.binormal(),
                };
                v.unit()
                    .ok_or_else(|| GeomError::Degenerate(format!("direction vanishes at θ = {t}")))
            })
            .collect::<Result<Vec<_>, GeomError>>()?;
        let mut slack_rate = 0.0f64;
        for w in thetas.windows(2).zip(dirs.windows(2)) {
            let gap = (w.0[1] - w.0[0]).abs();
            if gap > 0.0 {
                // Lines are unoriented: compare with the closer of ±direction.
                let d = (w.1[1] - w.1[0]).norm().min((w.1[1] + w.1[0]).norm());
                slack_rate = slack_rate.max(d / 2.0 * 1.5);
            }
        }
        Ok(Self {
            generator,
            thetas,
            dirs,
            radius,
            side,
            slack_rate,
        })
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn with_side(&self, side: Side) -> Self {
        Self { side, ..self.clone() }
    }

    /// Distance from `x` to the sampled lines.
    pub fn distance(&self, x: Vec3) -> f64 {
        self.dirs
            .iter()
            .map(|&d| x.dist_to_span(d))
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on how far the sampled distance can exceed the distance to the
    /// continuous family.
    pub fn grid_correction(&self, x: Vec3) -> f64 {
        x.norm() * self.slack_rate
    }

    pub fn contains(&self, x: Vec3) -> bool {
        (self.side == Side::TwoSided || x.z >= 0.0) && self.distance(x) <= self.radius
    }
}

/// `μ(y + field)`.
pub fn cone_mass(cloud: &WeightedPointCloud, field: &ConeField, y: Vec3) -> f64 {
    let flags: Vec<bool> = (0..cloud.len())
        .into_par_iter()
        .map(|i| field.contains(cloud.point_vec3(i) - y))
        .collect();
    compensated_sum(
        flags
            .iter()
            .zip(cloud.masses())
            .filter(|(f, _)| **f)
            .map(|(_, m)| *m),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodSet {
    /// Atoms `y` with `μ(y + 𝒞) ≥ δ^τ`.
    pub g: Vec<usize>,
    /// Atoms with `μ(y + 𝒞⁺) ≥ δ^τ/2`.
    pub g_plus: Vec<usize>,
    /// Atoms with `μ(y − 𝒞⁺) ≥ δ^τ/2`.
    pub g_minus: Vec<usize>,
    pub mass_g: f64,
    pub mass_plus: f64,
    pub mass_minus: f64,
}

/// Good sets over the support atoms, using the two-sided and `+` versions of `field`.
pub fn good_set(cloud: &WeightedPointCloud, field: &ConeField, delta: f64, tau: f64) -> GoodSet {
    let full = field.with_side(Side::TwoSided);
    let plus = field.with_side(Side::Plus);
    let thr = delta.powf(tau);
    let n = cloud.len();
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = cloud.point_vec3(j);
            let mut acc = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..n {
                let x = cloud.point_vec3(i);
                let m = cloud.masses()[i];
                if full.contains(x - y) {
                    acc.0.push(m);
                }
                if plus.contains(x - y) {
                    acc.1.push(m);
                }
                if plus.contains(y - x) {
                    acc.2.push(m);
                }
            }
            (
                compensated_sum(acc.0),
                compensated_sum(acc.1),
                compensated_sum(acc.2),
            )
        })
        .collect();
    let pick = |f: &dyn Fn(&(f64, f64, f64)) -> bool| -> Vec<usize> {
        (0..n).filter(|&j| f(&rows[j])).collect()
    };
    let g = pick(&|r| r.0 >= thr);
    let g_plus = pick(&|r| r.1 >= thr / 2.0);
    let g_minus = pick(&|r| r.2 >= thr / 2.0);
    let mass = |s: &[usize]| compensated_sum(s.iter().map(|&j| cloud.masses()[j]));
    GoodSet {
        mass_g: mass(&g),
        mass_plus: mass(&g_plus),
        mass_minus: mass(&g_minus),
        g,
        g_plus,
        g_minus,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTuple {
    pub tuple: Option<Vec<usize>>,
    pub points: Option<Vec<Vec3>>,
    /// `μ(∩ (x_i + field))` for the returned tuple.
    pub mass: f64,
    /// `A = Σ_{i₁..i_k} m_{i₁}⋯m_{i_k} μ(∩ (x_i + field)) = Σ_j m_j c_j^k`.
    pub aggregate: f64,
    /// `(Σ_j m_j c_j)^k ≤ A`, where `c_j = μ(x_j − field)`.
    pub holder_rhs: f64,
    pub examined: usize,
    pub exhaustive: bool,
}

/// Search the support for `k` points, pairwise at least `sep` apart, whose translated
/// fields share at least `thresh` of the mass.
///
/// Tuples are enumerated in lexicographic order when there are at most `budget` of
/// them; otherwise `budget` tuples are drawn with a seeded generator.
pub fn heavy_tuple_search(
    cloud: &WeightedPointCloud,
    field: &ConeField,
    k: usize,
    sep: f64,
    thresh: f64,
    budget: usize,
    seed: u64,
) -> PipelineResult<HeavyTuple> {
    if !(k == 2 || k == 3) {
        return Err(PipelineError::InvalidArgument(format!("k = {k} must be 2 or 3")));
    }
    if !(sep > 0.0 && sep < 1.0 && thresh > 0.0 && thresh < 1.0) {
        return Err(PipelineError::InvalidArgument(format!(
            "sep = {sep} and thresh = {thresh} must lie in (0, 1)"
        )));
    }
    if k == 2 && field.side() != Side::Plus {
        return Err(PipelineError::Precondition(
            "pair search needs the one-sided field".into(),
        ));
    }
    let n = cloud.len();
    let m = cloud.masses();
    let pts: Vec<Vec3> = (0..n).map(|i| cloud.point_vec3(i)).collect();
    // hit[i][j]: x_j ∈ x_i + field.
    let hit: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| field.contains(pts[j] - pts[i])).collect())
        .collect();
    let c: Vec<f64> = (0..n)
        .map(|j| compensated_sum((0..n).filter(|&i| hit[i][j]).map(|i| m[i])))
        .collect();
    let aggregate = compensated_sum((0..n).map(|j| m[j] * c[j].powi(k as i32)));
    let holder_rhs = compensated_sum((0..n).map(|j| m[j] * c[j])).powi(k as i32);

    let mass_of = |t: &[usize]| {
        compensated_sum((0..n).filter(|&j| t.iter().all(|&i| hit[i][j])).map(|j| m[j]))
    };
    let separated = |t: &[usize]| {
        t.iter()
            .enumerate()
            .all(|(a, &i)| t[a + 1..].iter().all(|&j| pts[i].dist(pts[j]) >= sep))
    };
    let total = binomial(n, k);
    let exhaustive = total <= budget as u128;
    let mut examined = 0usize;
    let mut found: Option<(Vec<usize>, f64)> = None;
    let mut consider = |t: Vec<usize>| -> bool {
        examined += 1;
        if separated(&t) {
            let mass = mass_of(&t);
            if mass >= thresh {
                found = Some((t, mass));
                return true;
            }
        }
        false
    };
    if exhaustive {
        'outer: for i in 0..n {
            for j in i + 1..n {
                if k == 2 {
                    if consider(vec![i, j]) {
                        break 'outer;
                    }
                    continue;
                }
                for l in j + 1..n {
                    if consider(vec![i, j, l]) {
                        break 'outer;
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..budget {
            let mut t = sample(&mut rng, n, k).into_vec();
            t.sort_unstable();
            if consider(t) {
                break;
            }
        }
    }
    let (tuple, points, mass) = match found {
        Some((t, mass)) => {
            let p = t.iter().map(|&i| pts[i]).collect();
            (Some(t), Some(p), mass)
        }
        None => (None, None, 0.0),
    };
    Ok(HeavyTuple {
        tuple,
        points,
        mass,
        aggregate,
        holder_rhs,
        examined,
        exhaustive,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// θ-length of `{θ ∈ E : |(x−y)·γ(θ)| ≤ δ and |(x−y)·γ'(θ)| ≥ floor·δ^τ}`.
///
/// `field` is the cone `C^E(δ^τ)`; `x − y` must lie outside it.
#[allow(clippy::too_many_arguments)]
pub fn restricted_sublevel(
    x: Vec3,
    y: Vec3,
    curve: &DirectionCurve,
    field: &ConeField,
    e: Interval,
    delta: f64,
    tau: f64,
    floor: f64,
    theta_grid: usize,
) -> PipelineResult<f64> {
    if !(delta > 0.0 && delta < 1.0) || !(tau > 0.0 && tau < 0.5) {
        return Err(PipelineError::InvalidArgument(format!(
            "need δ ∈ (0,1) and τ ∈ (0,1/2), got δ = {delta}, τ = {tau}"
        )));
    }
    if !curve.domain().contains_interval(&e) {
        return Err(PipelineError::InvalidArgument("E must lie in the curve domain".into()));
    }
    let v = x - y;
    let d = field.distance(v);
    if d <= field.radius() {
        return Err(PipelineError::Precondition(format!(
            "x − y lies within {d:.3e} of the cone, inside its {:.3e}-neighbourhood",
            field.radius()
        )));
    }
    if e.is_empty() {
        return Ok(0.0);
    }
    let lower = floor * delta.powf(tau);
    let f = |t: f64| {
        let j = curve.jet(t);
        (v.dot(j.g).abs() - delta, lower - v.dot(j.dg).abs())
    };
    // |d/dθ (v·γ)| ≤ |v| max|γ'|; sample so that a dip of depth δ is resolved.
    let speed = e
        .grid(257)
        .into_iter()
        .map(|t| curve.jet(t).dg.norm().max(curve.jet(t).ddg.norm()))
        .fold(0.0, f64::max);
    let resolved = (e.len() * 1.5 * v.norm() * speed / delta).ceil() as usize;
    Ok(refined_length(e, theta_grid.max(resolved).max(16), &f))
}
