//! The right circular cone `C = {x² + y² = z²}` and the three-cones covering decision.
//!
//! All cones here are two-sided. `C + p` is the translate with vertex `p`; its radical
//! plane with `C` is where the two quadratic equations agree.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use thiserror::Error;

use crate::geom3::Vec3;

/// Default constant `R` in the separation threshold `3Rδ^{1-c}`.
pub const DEFAULT_R: f64 = 8.0;
/// Default exponent `c` of the output line neighbourhoods.
pub const DEFAULT_C: f64 = 0.15;
/// Default collinearity exponent: pairs with `dist(p, span q) ≤ δ^τ` try separation first.
pub const DEFAULT_COLLINEAR_TAU: f64 = 0.75;
/// Default exponent `e` of the near-cone test `dist(p, C) ≤ δ^e` in [`three_cones_cover`].
pub const DEFAULT_NEAR_CONE_EXPONENT: f64 = 0.75;
/// Default cone distance of `ξ` below which [`three_cones_cover`] treats the line
/// direction as lying on `C`.
pub const DEFAULT_DIRECTION_TOL: f64 = 1e-9;

const PARALLEL_TOL: f64 = 1e-12;
const PROJECTION_ITERS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThreeConesError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("wrong branch: {0}")]
    WrongBranch(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("normals are parallel; the planes do not meet in a line")]
    NoLine,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type ThreeConesResult<T> = Result<T, ThreeConesError>;

/// `x² + y² − z²`.
pub fn cone_form(v: Vec3) -> f64 {
    v.x * v.x + v.y * v.y - v.z * v.z
}

/// `(x, y, −z)`, the gradient of [`cone_form`] up to a factor 2.
pub fn cone_dual(v: Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, -v.z)
}

/// Exact Euclidean distance from `x` to `C`.
pub fn cone_distance(x: Vec3) -> f64 {
    (x.x.hypot(x.y) - x.z.abs()).abs() * FRAC_1_SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3 {
    pub base: Vec3,
    pub normal: Vec3,
}

impl Plane3 {
    pub fn new(base: Vec3, normal: Vec3) -> ThreeConesResult<Self> {
        let normal = normal
            .unit()
            .ok_or_else(|| ThreeConesError::Degenerate("zero plane normal".into()))?;
        Ok(Self { base, normal })
    }

    /// Offset `d` in the equation `normal · x = d`.
    pub fn offset(&self) -> f64 {
        self.normal.dot(self.base)
    }

    pub fn signed_distance(&self, x: Vec3) -> f64 {
        self.normal.dot(x) - self.offset()
    }

    pub fn distance(&self, x: Vec3) -> f64 {
        self.signed_distance(x).abs()
    }

    pub fn project(&self, x: Vec3) -> Vec3 {
        x - self.normal * self.signed_distance(x)
    }
}

/// A line through the origin contained in `C`, stored with its `+z` direction
/// `(cos φ, sin φ, 1)/√2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeLine {
    pub direction: Vec3,
}

impl ConeLine {
    pub fn from_azimuth(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            direction: Vec3::new(c * FRAC_1_SQRT_2, s * FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.direction.y.atan2(self.direction.x)
    }

    pub fn distance(&self, x: Vec3) -> f64 {
        x.dist_to_span(self.direction)
    }

    /// Residual of the cone equation for the stored direction.
    pub fn cone_residual(&self) -> f64 {
        cone_form(self.direction).abs()
    }
}

/// Cone line closest to `x`. The sign of `z` picks the nappe and `z = 0` counts as `+`;
/// on the axis the azimuth is 0.
pub fn nearest_cone_line(x: Vec3) -> ConeLine {
    let (px, py) = if x.z >= 0.0 { (x.x, x.y) } else { (-x.x, -x.y) };
    let phi = if px == 0.0 && py == 0.0 { 0.0 } else { py.atan2(px) };
    ConeLine::from_azimuth(phi)
}

/// Plane containing `C ∩ (C + p)`: through `p/2` with normal `∝ (p₁, p₂, −p₃)`.
pub fn radical_plane(p: Vec3) -> ThreeConesResult<Plane3> {
    if p.norm() == 0.0 || !p.is_finite() {
        return Err(ThreeConesError::Degenerate("p = 0 has no radical plane".into()));
    }
    Plane3::new(p * 0.5, cone_dual(p))
}

/// Thickening of the radical plane that contains `C(δ) ∩ (C + p)(δ) ∩ B(0, 1)`.
pub fn radical_plane_width(p: Vec3, delta: f64) -> f64 {
    3.0 * delta / p.norm()
}

/// Near-cone branch: the cone line nearest `p` with radius `δ^c`.
pub fn tangent_line_cover(p: Vec3, delta: f64, c: f64) -> ThreeConesResult<(ConeLine, f64)> {
    check_scale(delta, c)?;
    let d = cone_distance(p);
    let reach = delta.powf(0.25);
    if d > reach {
        return Err(ThreeConesError::WrongBranch(format!(
            "dist(p, C) = {d:.3e} exceeds δ^(1/4) = {reach:.3e}"
        )));
    }
    let radius = delta.powf(c);
    if p.norm() < radius {
        return Err(ThreeConesError::Precondition(format!(
            "|p| = {:.3e} is below δ^c = {radius:.3e}",
            p.norm()
        )));
    }
    Ok((nearest_cone_line(p), radius))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub separated: bool,
    /// Cheap lower bound on the distance between the two plane discs.
    pub lower_bound: f64,
    /// Exact disc distance; `None` when the lower bound already decided.
    pub distance: Option<f64>,
    pub threshold: f64,
    /// `dist(ξ₃, {±1/√2})` for `ξ = q/|q|`.
    pub xi3_gap: f64,
    pub r_const: f64,
}

/// Whether `V_p ∩ B(0,1)` and `V_q ∩ B(0,1)` are more than `3Rδ^{1-c}` apart.
pub fn separation_test(
    p: Vec3,
    q: Vec3,
    delta: f64,
    c: f64,
    tau: f64,
    r_const: f64,
) -> ThreeConesResult<Separation> {
    check_scale(delta, c)?;
    let reach = delta.powf(0.25);
    for (name, v) in [("p", p), ("q", q)] {
        let d = cone_distance(v);
        if d <= reach {
            return Err(ThreeConesError::Precondition(format!(
                "{name} is within δ^(1/4) of C (distance {d:.3e})"
            )));
        }
    }
    let floor = delta.powf(c);
    let m = p.norm().min(q.norm()).min((p - q).norm());
    if m < floor {
        return Err(ThreeConesError::Precondition(format!(
            "min(|p|, |q|, |p-q|) = {m:.3e} is below δ^c = {floor:.3e}"
        )));
    }
    let off = p.dist_to_span(q);
    if off > delta.powf(tau) {
        return Err(ThreeConesError::Precondition(format!(
            "dist(p, span q) = {off:.3e} exceeds δ^τ"
        )));
    }

    let qn = q.norm();
    let xi = q / qn;
    let r = p.dot(xi);
    let e = (p - xi * r).norm();
    let slack = e * (1.0 + 1.0 / r.abs()) + e * e / (2.0 * r.abs());
    let lower_bound = (r - qn).abs() * (1.0 - 2.0 * xi.z * xi.z).abs() / 2.0 - slack;
    let xi3_gap = (xi.z.abs() - FRAC_1_SQRT_2).abs();
    let threshold = 3.0 * r_const * delta.powf(1.0 - c);

    if lower_bound > threshold {
        return Ok(Separation {
            separated: true,
            lower_bound,
            distance: None,
            threshold,
            xi3_gap,
            r_const,
        });
    }
    let distance = disc_distance(&radical_plane(p)?, &radical_plane(q)?);
    Ok(Separation {
        separated: distance > threshold,
        lower_bound,
        distance: Some(distance),
        threshold,
        xi3_gap,
        r_const,
    })
}

/// Distance between `P₁ ∩ B(0,1)` and `P₂ ∩ B(0,1)`; `+∞` if either is empty.
pub fn disc_distance(p1: &Plane3, p2: &Plane3) -> f64 {
    let (Some(d1), Some(d2)) = (Disc::of(p1), Disc::of(p2)) else {
        return f64::INFINITY;
    };
    let mut x = d1.center;
    let mut y = d2.project(x);
    for _ in 0..PROJECTION_ITERS {
        let nx = d1.project(y);
        let ny = d2.project(nx);
        let moved = (nx - x).norm() + (ny - y).norm();
        x = nx;
        y = ny;
        if moved < 1e-15 {
            break;
        }
    }
    (x - y).norm()
}

struct Disc {
    plane: Plane3,
    center: Vec3,
    radius: f64,
}

impl Disc {
    fn of(plane: &Plane3) -> Option<Self> {
        let center = plane.project(Vec3::zero());
        let r2 = 1.0 - center.norm2();
        (r2 >= 0.0).then(|| Self {
            plane: *plane,
            center,
            radius: r2.sqrt(),
        })
    }

    fn project(&self, x: Vec3) -> Vec3 {
        let y = self.plane.project(x);
        let d = (y - self.center).norm();
        if d <= self.radius {
            y
        } else {
            self.center + (y - self.center) * (self.radius / d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneLine {
    /// Point of the line closest to the origin.
    pub point: Vec3,
    pub direction: Vec3,
    pub radius: f64,
    /// Sine of the angle between the two plane normals.
    pub sin_angle: f64,
}

impl PlaneLine {
    pub fn distance(&self, x: Vec3) -> f64 {
        (x - self.point).dist_to_span(self.direction)
    }
}

/// `V_p ∩ V_q` with radius `δ^c`.
pub fn plane_pair_line(p: Vec3, q: Vec3, delta: f64, c: f64) -> ThreeConesResult<PlaneLine> {
    check_scale(delta, c)?;
    let vp = radical_plane(p)?;
    let vq = radical_plane(q)?;
    let u = vp.normal.cross(vq.normal);
    let s = u.norm();
    if s < PARALLEL_TOL {
        return Err(ThreeConesError::NoLine);
    }
    let d1 = vp.offset();
    let d2 = vq.offset();
    let point = (vq.normal.cross(u) * d1 + u.cross(vp.normal) * d2) / (s * s);
    Ok(PlaneLine {
        point,
        direction: u / s,
        radius: delta.powf(c),
        sin_angle: s,
    })
}

/// Cone lines covering `C(δ) ∩ L(δ^c)` for the line `L = {base + rξ}`, each with radius
/// `δ^{c²/5}`.
///
/// A direction within `δ^{c/4}` of `C` is handled by the nearest-line mechanism at the
/// point of `L ∩ B(0, 1 + δ^c)` closest to `C`. Otherwise the quadratic in `r` is solved
/// and intersection points outside `B(0, 1 + δ^c)` are dropped.
pub fn line_cone_cover(
    base: Vec3,
    xi: Vec3,
    delta: f64,
    c: f64,
) -> ThreeConesResult<Vec<(ConeLine, f64)>> {
    line_cone_cover_with(base, xi, delta, c, delta.powf(c / 4.0))
}

/// [`line_cone_cover`] with an explicit threshold for the near-cone direction test.
pub fn line_cone_cover_with(
    base: Vec3,
    xi: Vec3,
    delta: f64,
    c: f64,
    direction_tol: f64,
) -> ThreeConesResult<Vec<(ConeLine, f64)>> {
    check_scale(delta, c)?;
    if ((xi.norm() - 1.0).abs()) > 1e-9 {
        return Err(ThreeConesError::InvalidArgument(format!(
            "direction must be a unit vector, |ξ| = {}",
            xi.norm()
        )));
    }
    let radius = delta.powf(c * c / 5.0);
    let clip = 1.0 + delta.powf(c);
    if cone_distance(xi) <= direction_tol {
        return Ok(closest_point_on_line(base, xi, clip, delta.powf(c) + delta)
            .map(|x| vec![(nearest_cone_line(x), radius)])
            .unwrap_or_default());
    }

    let a = cone_form(xi);
    let bh = cone_dual(xi).dot(base);
    let cq = cone_form(base);
    let disc = bh * bh - a * cq;
    let roots = if disc >= 0.0 {
        let sq = disc.sqrt();
        // Stable form: avoid cancelling `−bh` against `±sq`.
        let qq = -(bh + bh.signum() * sq);
        if qq == 0.0 {
            vec![0.0]
        } else {
            vec![qq / a, cq / qq]
        }
    } else {
        let r = -bh / a;
        if cone_distance(base + xi * r) <= delta.powf(c) {
            vec![r]
        } else {
            Vec::new()
        }
    };
    let mut lines: Vec<(ConeLine, f64)> = Vec::new();
    for r in roots {
        let x = base + xi * r;
        if x.norm() > clip {
            continue;
        }
        let line = nearest_cone_line(x);
        if !lines
            .iter()
            .any(|(l, _)| (l.direction - line.direction).norm() < 1e-12)
        {
            lines.push((line, radius));
        }
    }
    Ok(lines)
}

/// Point of `{base + rξ} ∩ B(0, clip)` minimising the distance to `C`, if that distance
/// is at most `reach`.
fn closest_point_on_line(base: Vec3, xi: Vec3, clip: f64, reach: f64) -> Option<Vec3> {
    // |base + rξ|² = clip² solved for r.
    let b = base.dot(xi);
    let disc = b * b - (base.norm2() - clip * clip);
    if disc < 0.0 {
        return None;
    }
    let (lo, hi) = (-b - disc.sqrt(), -b + disc.sqrt());
    const N: usize = 4096;
    let step = (hi - lo) / N as f64;
    let dist = |r: f64| cone_distance(base + xi * r);
    let mut best = (0..=N)
        .map(|i| lo + step * i as f64)
        .min_by(|&r, &s| dist(r).total_cmp(&dist(s)))?;
    // Golden-section polish inside the bracketing cells.
    let (mut a, mut z) = ((best - step).max(lo), (best + step).min(hi));
    const PHI: f64 = 0.618_033_988_749_894_8;
    for _ in 0..80 {
        let m1 = z - PHI * (z - a);
        let m2 = a + PHI * (z - a);
        if dist(m1) <= dist(m2) {
            z = m2;
        } else {
            a = m1;
        }
    }
    let polished = 0.5 * (a + z);
    if dist(polished) < dist(best) {
        best = polished;
    }
    (dist(best) <= reach).then(|| base + xi * best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    NearCone,
    Separated,
    Generic,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::NearCone => "near-cone",
            Branch::Separated => "separated",
            Branch::Generic => "generic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeConesParams {
    pub c: f64,
    pub r_const: f64,
    pub collinear_tau: f64,
    pub near_cone_exponent: f64,
    /// `None` uses `δ^{c/4}`.
    pub direction_tol: Option<f64>,
}

impl Default for ThreeConesParams {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            r_const: DEFAULT_R,
            collinear_tau: DEFAULT_COLLINEAR_TAU,
            near_cone_exponent: DEFAULT_NEAR_CONE_EXPONENT,
            direction_tol: Some(DEFAULT_DIRECTION_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeConesReport {
    /// Empty means `C(δ) ∩ (C + p)(δ) ∩ (C + q)(δ) ∩ B(0,1)` was certified empty.
    pub lines: Vec<ConeLine>,
    pub radius: f64,
    pub branch: Branch,
    pub separation: Option<Separation>,
    pub plane_line: Option<PlaneLine>,
    pub delta: f64,
    pub params: ThreeConesParams,
}

impl ThreeConesReport {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn contains(&self, x: Vec3) -> bool {
        self.lines.iter().any(|l| l.distance(x) <= self.radius)
    }
}

/// Cover `C(δ) ∩ (C + p)(δ) ∩ (C + q)(δ) ∩ B(0,1)` by at most two `δ^c`-neighbourhoods
/// of cone lines, or certify it empty.
pub fn three_cones_cover(
    p: Vec3,
    q: Vec3,
    delta: f64,
    params: ThreeConesParams,
) -> ThreeConesResult<ThreeConesReport> {
    let c = params.c;
    check_scale(delta, c)?;
    let radius = delta.powf(c);
    for (name, v) in [("|p|", p.norm()), ("|q|", q.norm()), ("|p-q|", (p - q).norm())] {
        if v < radius {
            return Err(ThreeConesError::Precondition(format!(
                "{name} = {v:.3e} is below δ^c = {radius:.3e}"
            )));
        }
    }
    for (name, v) in [("|p|", p.norm()), ("|q|", q.norm())] {
        if v > 1.0 + 1e-12 {
            return Err(ThreeConesError::Precondition(format!("{name} = {v} exceeds 1")));
        }
    }
    let mut report = ThreeConesReport {
        lines: Vec::new(),
        radius,
        branch: Branch::Generic,
        separation: None,
        plane_line: None,
        delta,
        params,
    };

    let (dp, dq) = (cone_distance(p), cone_distance(q));
    if dp.min(dq) <= delta.powf(params.near_cone_exponent.max(0.25)) {
        let near = if dp <= dq { p } else { q };
        let (line, _) = tangent_line_cover(near, delta, c)?;
        report.lines.push(line);
        report.branch = Branch::NearCone;
        return Ok(report);
    }

    if p.dist_to_span(q) <= delta.powf(params.collinear_tau) {
        let sep = separation_test(p, q, delta, c, params.collinear_tau, params.r_const)?;
        report.separation = Some(sep);
        if sep.separated {
            report.branch = Branch::Separated;
            return Ok(report);
        }
    }

    let line = match plane_pair_line(p, q, delta, c) {
        Ok(l) => l,
        Err(ThreeConesError::NoLine) => {
            let d = disc_distance(&radical_plane(p)?, &radical_plane(q)?);
            let need = radical_plane_width(p, delta) + radical_plane_width(q, delta);
            if d > need {
                report.branch = Branch::Separated;
                return Ok(report);
            }
            return Err(ThreeConesError::Degenerate(format!(
                "parallel radical planes only {d:.3e} apart"
            )));
        }
        Err(e) => return Err(e),
    };
    report.plane_line = Some(line);
    let tol = params.direction_tol.unwrap_or(delta.powf(c / 4.0));
    report.lines = line_cone_cover_with(line.point, line.direction, delta, c, tol)?
        .into_iter()
        .map(|(l, _)| l)
        .collect();
    Ok(report)
}

/// Whether `x` lies within `r` of the finite set `a`.
pub fn in_neighborhood(a: &[Vec3], r: f64, x: Vec3) -> bool {
    a.iter().any(|&y| (x - y).norm() <= r)
}

/// `|ρ − |z||`-band of `C(δ)` in the `(ρ, z)` half-plane: `C(δ) = {|ρ − |z|| ≤ √2 δ}`.
pub fn cone_band(delta: f64) -> f64 {
    SQRT_2 * delta
}

fn check_scale(delta: f64, c: f64) -> ThreeConesResult<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ThreeConesError::InvalidArgument(format!("δ = {delta} not in (0, 1)")));
    }
    if !(c > 0.0 && c <= 0.25) {
        return Err(ThreeConesError::InvalidArgument(format!("c = {c} not in (0, 1/4]")));
    }
    Ok(())
}
