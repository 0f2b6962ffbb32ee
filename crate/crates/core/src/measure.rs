//! Discrete probability measures: point clouds, IFS attractor samples, growth
//! exponents, Riesz energies and the disc mass bound.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::geom3::{FamilyKind, GeomError, Projection, ProjectionFamily, Vec3};
use crate::util::{compensated_sum, least_squares};

/// Tolerance on the total mass of a cloud.
pub const MASS_TOL: f64 = 1e-9;
/// Default cap on the number of points `generate_ifs` may produce.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid cloud: {0}")]
    InvalidCloud(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("IFS needs {needed} points but the budget is {budget}")]
    Budget { needed: u128, budget: usize },
    #[error("points {i} and {j} coincide; the energy is singular")]
    SingularPair { i: usize, j: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

pub type MeasureResult<T> = Result<T, MeasureError>;

/// Finitely supported probability measure on R¹, R² or R³.
///
/// Points are stored as `[f64; 3]` with unused trailing coordinates set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointCloud {
    dim: usize,
    points: Vec<[f64; 3]>,
    masses: Vec<f64>,
    similarity_dimension: Option<f64>,
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

impl WeightedPointCloud {
    pub fn new(dim: usize, points: Vec<[f64; 3]>, masses: Vec<f64>) -> MeasureResult<Self> {
        if !(1..=3).contains(&dim) {
            return Err(MeasureError::InvalidCloud(format!("dimension {dim} not in 1..=3")));
        }
        if points.is_empty() {
            return Err(MeasureError::InvalidCloud("no points".into()));
        }
        if points.len() != masses.len() {
            return Err(MeasureError::InvalidCloud(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        let mut points = points;
        for (i, p) in points.iter_mut().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(MeasureError::InvalidCloud(format!("point {i} is not finite")));
            }
            for c in p.iter_mut().skip(dim) {
                *c = 0.0;
            }
            if dim == 3 && dist3(p, &[0.0; 3]) > 1.0 + 1e-12 {
                return Err(MeasureError::InvalidCloud(format!(
                    "point {i} lies outside the unit ball"
                )));
            }
        }
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(MeasureError::InvalidCloud(format!("mass {i} is negative or not finite")));
        }
        let total = compensated_sum(masses.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::InvalidCloud(format!("masses sum to {total}, not 1")));
        }
        Ok(Self {
            dim,
            points,
            masses,
            similarity_dimension: None,
        })
    }

    /// Equal masses `1/n` on the given points.
    pub fn uniform(dim: usize, points: Vec<[f64; 3]>) -> MeasureResult<Self> {
        let n = points.len().max(1);
        let masses = vec![1.0 / n as f64; points.len()];
        Self::new(dim, points, masses)
    }

    pub fn from_vec3(points: &[Vec3], masses: Vec<f64>) -> MeasureResult<Self> {
        Self::new(3, points.iter().map(|p| p.to_array()).collect(), masses)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn point_vec3(&self, i: usize) -> Vec3 {
        Vec3::from_array(self.points[i])
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.masses.iter().copied())
    }

    /// Similarity dimension of the generating IFS, when the cloud came from one.
    pub fn similarity_dimension(&self) -> Option<f64> {
        self.similarity_dimension
    }

    /// Product measure on `R^(d1 + d2)`; needs `d1 + d2 <= 3`.
    pub fn product(&self, other: &Self) -> MeasureResult<Self> {
        let dim = self.dim + other.dim;
        if dim > 3 {
            return Err(MeasureError::InvalidArgument(format!(
                "product dimension {dim} exceeds 3"
            )));
        }
        let mut points = Vec::with_capacity(self.len() * other.len());
        let mut masses = Vec::with_capacity(self.len() * other.len());
        for (p, m) in self.points.iter().zip(&self.masses) {
            for (q, w) in other.points.iter().zip(&other.masses) {
                let mut x = [0.0; 3];
                x[..self.dim].copy_from_slice(&p[..self.dim]);
                x[self.dim..dim].copy_from_slice(&q[..other.dim]);
                points.push(x);
                masses.push(m * w);
            }
        }
        Self::new(dim, points, masses)
    }

    /// Pushforward under `proj_θ`; masses are copied unchanged.
    pub fn pushforward(&self, family: &ProjectionFamily, theta: f64) -> MeasureResult<Self> {
        if self.dim != 3 {
            return Err(MeasureError::InvalidArgument(
                "pushforward needs a 3D cloud".into(),
            ));
        }
        let jet = family.curve().eval(theta)?;
        let dim = if family.kind() == FamilyKind::Line { 1 } else { 2 };
        let points = self
            .points
            .iter()
            .map(|p| {
                Ok(match family.project_jet(&jet, Vec3::from_array(*p))? {
                    Projection::Scalar(s) => [s, 0.0, 0.0],
                    Projection::Pair([u, v]) => [u, v, 0.0],
                })
            })
            .collect::<Result<Vec<_>, GeomError>>()?;
        Ok(Self {
            dim,
            points,
            masses: self.masses.clone(),
            similarity_dimension: None,
        })
    }

    /// Mass of the closed ball `B(center, radius)`.
    pub fn ball_mass(&self, center: &[f64; 3], radius: f64) -> f64 {
        compensated_sum(
            self.points
                .iter()
                .zip(&self.masses)
                .filter(|(p, _)| dist3(p, center) <= radius)
                .map(|(_, m)| *m),
        )
    }

    /// Plain-text form: a `count dim` header, then one `coords... mass` row per point.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.len(), self.dim);
        for (p, m) in self.points.iter().zip(&self.masses) {
            for c in &p[..self.dim] {
                let _ = write!(s, "{c} ");
            }
            let _ = writeln!(s, "{m}");
        }
        s
    }

    pub fn from_text(text: &str) -> MeasureResult<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(MeasureError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_, _>>()
            .map_err(|e| MeasureError::Parse {
                line: 1,
                msg: format!("{e}"),
            })?;
        let [count, dim] = head[..] else {
            return Err(MeasureError::Parse {
                line: 1,
                msg: "header must be `count dim`".into(),
            });
        };
        let mut points = Vec::with_capacity(count);
        let mut masses = Vec::with_capacity(count);
        for (i, l) in lines {
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|e| MeasureError::Parse {
                    line: i + 1,
                    msg: format!("{e}"),
                })?;
            if vals.len() != dim + 1 {
                return Err(MeasureError::Parse {
                    line: i + 1,
                    msg: format!("expected {} values, got {}", dim + 1, vals.len()),
                });
            }
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(&vals[..dim]);
            points.push(p);
            masses.push(vals[dim]);
        }
        if points.len() != count {
            return Err(MeasureError::Parse {
                line: 1,
                msg: format!("header says {count} points, found {}", points.len()),
            });
        }
        Self::new(dim, points, masses)
    }
}

/// Equal-ratio similarity IFS `x ↦ r·x + t_i` without rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSpec {
    ratio: f64,
    translations: Vec<Vec3>,
}

impl IfsSpec {
    pub fn new(ratio: f64, translations: Vec<Vec3>) -> MeasureResult<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(MeasureError::InvalidArgument(format!(
                "ratio {ratio} not in (0, 1)"
            )));
        }
        if translations.is_empty() {
            return Err(MeasureError::InvalidArgument("IFS needs at least one map".into()));
        }
        for (i, t) in translations.iter().enumerate() {
            if !t.is_finite() || ratio + t.norm() > 1.0 + 1e-12 {
                return Err(MeasureError::InvalidArgument(format!(
                    "map {i} does not send B(0,1) into itself"
                )));
            }
        }
        Ok(Self { ratio, translations })
    }

    /// Four maps of ratio 1/3 in the plane `z = 0`; a product of two Cantor sets.
    pub fn four_corner_thirds() -> Self {
        let k = 1.0 / 3.0;
        let t = [(-k, -k), (-k, k), (k, -k), (k, k)]
            .iter()
            .map(|&(x, y)| Vec3::new(x, y, 0.0))
            .collect();
        Self::new(k, t).expect("preset is valid")
    }

    /// Sierpinski triangle (three maps of ratio 1/2) in a tilted plane.
    pub fn tilted_sierpinski() -> Self {
        let n = Vec3::new(0.3, -0.2, 1.0).unit().expect("nonzero");
        let e1 = Vec3::new(1.0, 0.0, 0.0);
        let e1 = (e1 - n * e1.dot(n)).unit().expect("nonzero");
        let e2 = n.cross(e1);
        let t = (0..3)
            .map(|i| {
                let a = 0.35 + 2.0 * std::f64::consts::PI * i as f64 / 3.0;
                (e1 * a.cos() + e2 * a.sin()) * 0.5
            })
            .collect();
        Self::new(0.5, t).expect("preset is valid")
    }

    /// Eight maps of ratio 1/2 whose attractor is the cube `[-1/2, 1/2]³`.
    pub fn cube_corners() -> Self {
        let mut t = Vec::with_capacity(8);
        for sx in [-0.25, 0.25] {
            for sy in [-0.25, 0.25] {
                for sz in [-0.25, 0.25] {
                    t.push(Vec3::new(sx, sy, sz));
                }
            }
        }
        Self::new(0.5, t).expect("preset is valid")
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn translations(&self) -> &[Vec3] {
        &self.translations
    }

    pub fn num_maps(&self) -> usize {
        self.translations.len()
    }

    /// `log N / log(1/r)`.
    pub fn similarity_dimension(&self) -> f64 {
        (self.num_maps() as f64).ln() / (1.0 / self.ratio).ln()
    }
}

/// Sample the attractor at `depth` with the default point budget.
pub fn generate_ifs(spec: &IfsSpec, depth: u32) -> MeasureResult<WeightedPointCloud> {
    generate_ifs_with_budget(spec, depth, DEFAULT_POINT_BUDGET)
}

/// One point `S_w(0)` per word `w` of length `depth`, in lexicographic word order,
/// each with mass `N^-depth`.
pub fn generate_ifs_with_budget(
    spec: &IfsSpec,
    depth: u32,
    budget: usize,
) -> MeasureResult<WeightedPointCloud> {
    if depth == 0 {
        return Err(MeasureError::InvalidArgument("depth must be positive".into()));
    }
    let n = spec.num_maps() as u128;
    let needed = n.checked_pow(depth).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(MeasureError::Budget { needed, budget });
    }
    let mut pts = vec![Vec3::zero()];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(pts.len() * spec.num_maps());
        for t in &spec.translations {
            for p in &pts {
                next.push(*t + *p * spec.ratio);
            }
        }
        pts = next;
    }
    let m = 1.0 / pts.len() as f64;
    let masses = vec![m; pts.len()];
    let mut cloud = WeightedPointCloud::from_vec3(&pts, masses)?;
    cloud.similarity_dimension = Some(spec.similarity_dimension());
    Ok(cloud)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrostmanFit {
    /// Fitted growth exponent `s`.
    pub s_hat: f64,
    /// Fitted constant `C` in `max_x μ(B(x,r)) ≈ C r^s`.
    pub c_hat: f64,
    pub r2: f64,
    /// Set when the cloud is a single atom and no fit was made.
    pub degenerate: bool,
}

/// Largest ball mass `max_x μ(B(x, r))` over support points, for each radius.
pub fn max_ball_masses(cloud: &WeightedPointCloud, radii: &[f64]) -> Vec<f64> {
    let per_point: Vec<Vec<f64>> = cloud
        .points
        .par_iter()
        .map(|x| {
            let mut acc = vec![0.0; radii.len()];
            for (y, m) in cloud.points.iter().zip(&cloud.masses) {
                let d = dist3(x, y);
                for (a, r) in acc.iter_mut().zip(radii) {
                    if d <= *r {
                        *a += m;
                    }
                }
            }
            acc
        })
        .collect();
    (0..radii.len())
        .map(|k| per_point.iter().map(|v| v[k]).fold(0.0, f64::max))
        .collect()
}

/// Log-log fit of `max_x μ(B(x, r))` against `r`.
pub fn frostman_exponent(cloud: &WeightedPointCloud, radii: &[f64]) -> MeasureResult<FrostmanFit> {
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(MeasureError::InvalidArgument("radii must be positive".into()));
    }
    let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = radii.iter().copied().fold(0.0, f64::max);
    if radii.len() < 2 || hi / lo < 4.0 {
        return Err(MeasureError::InvalidArgument(
            "radii must span at least two dyadic octaves".into(),
        ));
    }
    if cloud.len() < 2 {
        return Ok(FrostmanFit {
            s_hat: 0.0,
            c_hat: 1.0,
            r2: 1.0,
            degenerate: true,
        });
    }
    let masses = max_ball_masses(cloud, radii);
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    Ok(FrostmanFit {
        s_hat: slope,
        c_hat: intercept.exp(),
        r2,
        degenerate: false,
    })
}

/// Off-diagonal Riesz sum `Σ_{i≠j} m_i m_j |x_i - x_j|^-s`.
///
/// Row sums run in parallel and are combined in index order, so the result does not
/// depend on the number of worker threads.
pub fn riesz_energy(cloud: &WeightedPointCloud, s: f64) -> MeasureResult<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(MeasureError::InvalidArgument(format!("s must be positive, got {s}")));
    }
    let n = cloud.len();
    let rows: Vec<Result<f64, usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &cloud.points[i];
            let mut terms = Vec::with_capacity(n - i - 1);
            for j in i + 1..n {
                let d = dist3(xi, &cloud.points[j]);
                if d == 0.0 {
                    return Err(j);
                }
                terms.push(cloud.masses[j] * d.powf(-s));
            }
            Ok(cloud.masses[i] * compensated_sum(terms))
        })
        .collect();
    let mut sums = Vec::with_capacity(n);
    for (i, r) in rows.into_iter().enumerate() {
        match r {
            Ok(v) => sums.push(v),
            Err(j) => return Err(MeasureError::SingularPair { i, j }),
        }
    }
    Ok(2.0 * compensated_sum(sums))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Compare `ν(B)` with `I_s(ν)^{1/2} d(B)^{s/2}` for the ball `B(center, radius)`.
pub fn mass_bound_check(
    cloud: &WeightedPointCloud,
    center: &[f64; 3],
    radius: f64,
    s: f64,
) -> MeasureResult<MassBound> {
    let energy = riesz_energy(cloud, s)?;
    Ok(mass_bound_with_energy(cloud, energy, center, radius, s))
}

/// [`mass_bound_check`] with a precomputed energy.
pub fn mass_bound_with_energy(
    cloud: &WeightedPointCloud,
    energy: f64,
    center: &[f64; 3],
    radius: f64,
    s: f64,
) -> MassBound {
    let lhs = cloud.ball_mass(center, radius);
    let rhs = energy.sqrt() * (2.0 * radius).powf(s / 2.0);
    MassBound {
        lhs,
        rhs,
        ok: lhs <= rhs,
    }
}
