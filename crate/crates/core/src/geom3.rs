//! Vectors in R³, direction curves on S², the three projection families and
//! θ-sublevel measurement.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::util::{linspace, nonpositive_fraction};

/// Tolerance for unit vectors produced by [`Vec3::unit`].
pub const UNIT_TOL: f64 = 1e-12;
/// Tolerance for `|γ(θ)| = 1` on sampled curves.
pub const CURVE_UNIT_TOL: f64 = 1e-9;
/// Relative agreement required between successive sublevel refinements.
pub const SUBLEVEL_REL_TOL: f64 = 0.01;
/// Largest θ-grid the sublevel refinement will evaluate.
pub const SUBLEVEL_MAX_CELLS: usize = 1 << 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("theta = {theta} lies outside the curve domain [{lo}, {hi}]")]
    Domain { theta: f64, lo: f64, hi: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type GeomResult<T> = Result<T, GeomError>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the direction of `self`, or `None` for the zero vector.
    pub fn unit(self) -> Option<Self> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Determinant of the matrix with rows `a`, `b`, `c`.
    pub fn det(a: Self, b: Self, c: Self) -> f64 {
        a.dot(b.cross(c))
    }

    /// Distance from `self` to the full line `span(dir)`; `dir` need not be unit.
    pub fn dist_to_span(self, dir: Self) -> f64 {
        let d2 = dir.norm2();
        if d2 == 0.0 {
            return self.norm();
        }
        let t = self.dot(dir) / d2;
        (self - dir * t).norm()
    }
}

impl Add for Vec3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Self;
    fn div(self, s: f64) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> GeomResult<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(GeomError::InvalidArgument(format!(
                "interval [{lo}, {hi}] is not a finite closed interval"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Interval of half-length `radius` around `center`.
    pub fn around(center: f64, radius: f64) -> GeomResult<Self> {
        Self::new(center - radius, center + radius)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Membership with a relative slack of a few ulps at the endpoints.
    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.lo.abs().max(self.hi.abs()));
        x >= self.lo - slack && x <= self.hi + slack
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.contains(o.lo) && self.contains(o.hi)
    }

    /// `n` equally spaced samples including both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        linspace(self.lo, self.hi, n)
    }
}

/// `(γ(θ), γ′(θ), γ″(θ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub g: Vec3,
    pub dg: Vec3,
    pub ddg: Vec3,
}

impl CurveJet {
    /// `det[γ, γ′, γ″]`.
    pub fn det(&self) -> f64 {
        Vec3::det(self.g, self.dg, self.ddg)
    }

    /// `γ × γ′`, spanning the kernel of the bad-plane projection.
    pub fn binormal(&self) -> Vec3 {
        self.g.cross(self.dg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Special,
    Custom,
}

type Evaluator = Arc<dyn Fn(f64) -> CurveJet + Send + Sync>;

/// A C³ curve `θ ↦ γ(θ) ∈ S²` on a closed domain `J`, with analytic derivatives.
#[derive(Clone)]
pub struct DirectionCurve {
    domain: Interval,
    kind: CurveKind,
    name: String,
    eval: Option<Evaluator>,
}

impl fmt::Debug for DirectionCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirectionCurve")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .finish()
    }
}

fn special_jet(theta: f64) -> CurveJet {
    let (s, c) = theta.sin_cos();
    let k = FRAC_1_SQRT_2;
    CurveJet {
        g: Vec3::new(c * k, s * k, k),
        dg: Vec3::new(-s * k, c * k, 0.0),
        ddg: Vec3::new(-c * k, -s * k, 0.0),
    }
}

impl DirectionCurve {
    /// `γ(θ) = (cos θ, sin θ, 1)/√2` on `domain`.
    pub fn special(domain: Interval) -> Self {
        Self {
            domain,
            kind: CurveKind::Special,
            name: "special".into(),
            eval: None,
        }
    }

    /// The special curve on `[0, 2π]`.
    pub fn special_full() -> Self {
        Self::special(Interval { lo: 0.0, hi: 2.0 * PI })
    }

    /// A curve given by an analytic jet evaluator.
    pub fn custom<F>(name: &str, domain: Interval, f: F) -> Self
    where
        F: Fn(f64) -> CurveJet + Send + Sync + 'static,
    {
        Self {
            domain,
            kind: CurveKind::Custom,
            name: name.into(),
            eval: Some(Arc::new(f)),
        }
    }

    /// `γ(θ) = (cos θ, sin θ, 0)`: a great circle, degenerate everywhere.
    pub fn planar(domain: Interval) -> Self {
        Self::custom("planar", domain, |t| {
            let (s, c) = t.sin_cos();
            CurveJet {
                g: Vec3::new(c, s, 0.0),
                dg: Vec3::new(-s, c, 0.0),
                ddg: Vec3::new(-c, -s, 0.0),
            }
        })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Same curve on a sub-interval of the current domain.
    pub fn restricted(&self, j: Interval) -> GeomResult<Self> {
        if !self.domain.contains_interval(&j) {
            return Err(GeomError::InvalidArgument(format!(
                "[{}, {}] is not inside the curve domain [{}, {}]",
                j.lo, j.hi, self.domain.lo, self.domain.hi
            )));
        }
        let mut c = self.clone();
        c.domain = j;
        Ok(c)
    }

    /// Jet at `θ`, checking `θ ∈ J`.
    pub fn eval(&self, theta: f64) -> GeomResult<CurveJet> {
        if !self.domain.contains(theta) {
            return Err(GeomError::Domain {
                theta,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        Ok(self.jet(theta))
    }

    /// Jet at `θ` without the domain check.
    pub fn jet(&self, theta: f64) -> CurveJet {
        match &self.eval {
            None => special_jet(theta),
            Some(f) => f(theta),
        }
    }

    /// Largest `||γ(θ)| - 1|` over a uniform grid of `samples` points.
    pub fn max_unit_deviation(&self, samples: usize) -> f64 {
        self.domain
            .grid(samples.max(2))
            .into_iter()
            .map(|t| (self.jet(t).g.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of [`DirectionCurve::eval`].
pub fn eval_curve(curve: &DirectionCurve, theta: f64) -> GeomResult<(Vec3, Vec3, Vec3)> {
    let j = curve.eval(theta)?;
    Ok((j.g, j.dg, j.ddg))
}

/// Minimum of `|det[γ, γ′, γ″]|` over a uniform grid of `samples` points of `J`.
pub fn nondegeneracy_margin(curve: &DirectionCurve, samples: usize) -> GeomResult<f64> {
    Ok(margin_range(curve, samples)?.0)
}

/// `(min, max)` of `|det[γ, γ′, γ″]|` over the grid.
pub fn margin_range(curve: &DirectionCurve, samples: usize) -> GeomResult<(f64, f64)> {
    if samples < 2 {
        return Err(GeomError::InvalidArgument(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for t in curve.domain().grid(samples) {
        let d = curve.eval(t)?.det().abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// `ρ_θ(x) = x·γ(θ)`.
    Line,
    /// `π_θ`: orthogonal projection onto `γ(θ)^⊥`.
    Plane,
    /// `π̃_θ`: orthogonal projection onto `(γ × γ′)^⊥`.
    BadPlane,
}

impl FamilyKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "line" | "rho" => Some(Self::Line),
            "plane" | "pi" => Some(Self::Plane),
            "badplane" | "bad-plane" | "pitilde" => Some(Self::BadPlane),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Line => "line",
            Self::Plane => "plane",
            Self::BadPlane => "badplane",
        }
    }
}

/// Value of a projection: a scalar for the line family, frame coordinates otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Scalar(f64),
    Pair([f64; 2]),
}

impl Projection {
    pub fn norm(&self) -> f64 {
        match self {
            Self::Scalar(s) => s.abs(),
            Self::Pair([u, v]) => u.hypot(*v),
        }
    }

    pub fn pair(&self) -> Option<[f64; 2]> {
        match self {
            Self::Pair(p) => Some(*p),
            Self::Scalar(_) => None,
        }
    }
}

const FRAME_SEEDS: [Vec3; 3] = [
    Vec3::new(0.0, 0.0, 1.0),
    Vec3::new(1.0, 0.0, 0.0),
    Vec3::new(0.0, 1.0, 0.0),
];

/// Orthonormal basis of `n^⊥` for a unit `n`, by Gram–Schmidt from the first seed
/// that is not close to `n`.
pub fn complement_frame(n: Vec3) -> [Vec3; 2] {
    for s in FRAME_SEEDS {
        let u = s - n * s.dot(n);
        // Some seed always has |u|² ≥ 2/3.
        if u.norm2() >= 1.0 / 3.0 {
            let e1 = u / u.norm();
            let e2 = n.cross(e1);
            return [e1, e2];
        }
    }
    unreachable!("a unit vector is far from at least one coordinate axis")
}

#[derive(Debug, Clone)]
pub struct ProjectionFamily {
    kind: FamilyKind,
    curve: DirectionCurve,
}

impl ProjectionFamily {
    pub fn new(kind: FamilyKind, curve: DirectionCurve) -> Self {
        Self { kind, curve }
    }

    pub fn line(curve: DirectionCurve) -> Self {
        Self::new(FamilyKind::Line, curve)
    }

    pub fn plane(curve: DirectionCurve) -> Self {
        Self::new(FamilyKind::Plane, curve)
    }

    pub fn bad_plane(curve: DirectionCurve) -> Self {
        Self::new(FamilyKind::BadPlane, curve)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn curve(&self) -> &DirectionCurve {
        &self.curve
    }

    /// Unit normal of the codomain plane (`γ` or `b̂`), `None` for the line family.
    pub fn normal(&self, theta: f64) -> GeomResult<Option<Vec3>> {
        let j = self.curve.eval(theta)?;
        Ok(match self.kind {
            FamilyKind::Line => None,
            FamilyKind::Plane => Some(unit_or_err(j.g, "gamma")?),
            FamilyKind::BadPlane => Some(unit_or_err(j.binormal(), "gamma x gamma'")?),
        })
    }

    /// Orthonormal frame of the codomain plane at `θ`.
    pub fn frame(&self, theta: f64) -> GeomResult<Option<[Vec3; 2]>> {
        let j = self.curve.eval(theta)?;
        Ok(match self.kind {
            FamilyKind::Line => None,
            FamilyKind::Plane => Some(complement_frame(unit_or_err(j.g, "gamma")?)),
            FamilyKind::BadPlane => Some([
                unit_or_err(j.g, "gamma")?,
                unit_or_err(j.dg, "gamma'")?,
            ]),
        })
    }

    pub fn project(&self, theta: f64, x: Vec3) -> GeomResult<Projection> {
        let j = self.curve.eval(theta)?;
        self.project_jet(&j, x)
    }

    pub(crate) fn project_jet(&self, j: &CurveJet, x: Vec3) -> GeomResult<Projection> {
        Ok(match self.kind {
            FamilyKind::Line => Projection::Scalar(x.dot(j.g)),
            FamilyKind::Plane => {
                let [e1, e2] = complement_frame(unit_or_err(j.g, "gamma")?);
                Projection::Pair([x.dot(e1), x.dot(e2)])
            }
            FamilyKind::BadPlane => {
                let e1 = unit_or_err(j.g, "gamma")?;
                let e2 = unit_or_err(j.dg, "gamma'")?;
                Projection::Pair([x.dot(e1), x.dot(e2)])
            }
        })
    }

    /// `|proj_θ(x)|` from the jet, computed as a distance so it stays accurate near zero.
    pub(crate) fn proj_norm(&self, j: &CurveJet, x: Vec3) -> f64 {
        match self.kind {
            FamilyKind::Line => x.dot(j.g).abs() / j.g.norm(),
            FamilyKind::Plane => x.dist_to_span(j.g),
            FamilyKind::BadPlane => x.dist_to_span(j.binormal()),
        }
    }

    /// Upper bound for the θ-Lipschitz constant of `|proj_θ(x)|` on the domain.
    fn lipschitz_bound(&self, x: Vec3) -> f64 {
        let xn = x.norm();
        let mut l = 0.0f64;
        for t in self.curve.domain().grid(1025) {
            let j = self.curve.jet(t);
            let rate = match self.kind {
                FamilyKind::Line | FamilyKind::Plane => j.dg.norm() / j.g.norm(),
                FamilyKind::BadPlane => {
                    let b = j.binormal().norm();
                    if b > 0.0 {
                        j.g.cross(j.ddg).norm() / b
                    } else {
                        0.0
                    }
                }
            };
            l = l.max(rate);
        }
        1.5 * xn * l.max(1e-12)
    }
}

fn unit_or_err(v: Vec3, what: &str) -> GeomResult<Vec3> {
    v.unit()
        .ok_or_else(|| GeomError::Degenerate(format!("{what} vanishes")))
}

/// θ-length of `{θ ∈ J : f(θ).0 ≤ 0 and f(θ).1 ≤ 0}` on a uniform grid of `cells`
/// cells, using the linear interpolant of both constraints on each cell.
pub(crate) fn grid_length<F>(j: Interval, cells: usize, f: &F) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let h = j.len() / cells as f64;
    let mut total = 0.0;
    let mut prev = f(j.lo);
    for i in 1..=cells {
        let t = if i == cells { j.hi } else { j.lo + h * i as f64 };
        let cur = f(t);
        if let (Some((a0, a1)), Some((b0, b1))) = (
            nonpositive_fraction(prev.0, cur.0),
            nonpositive_fraction(prev.1, cur.1),
        ) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += (hi - lo) * h;
            }
        }
        prev = cur;
    }
    total
}

/// Refine `grid_length` by doubling from `n0` cells until two successive estimates
/// agree to [`SUBLEVEL_REL_TOL`].
pub(crate) fn refined_length<F>(j: Interval, n0: usize, f: &F) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let mut n = n0.clamp(1, SUBLEVEL_MAX_CELLS / 2);
    let mut prev = grid_length(j, n, f);
    loop {
        n *= 2;
        let cur = grid_length(j, n, f);
        let scale = prev.max(cur);
        if scale == 0.0 || (cur - prev).abs() <= SUBLEVEL_REL_TOL * scale || n >= SUBLEVEL_MAX_CELLS
        {
            return cur;
        }
        prev = cur;
    }
}

/// θ-length of `{θ ∈ J : |proj_θ(x)| ≤ δ}`.
///
/// The starting grid is the larger of `theta_grid` and the resolution at which a
/// dip of depth `δ` cannot fall between two nodes.
pub fn sublevel_measure(
    family: &ProjectionFamily,
    x: Vec3,
    delta: f64,
    theta_grid: usize,
) -> GeomResult<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(GeomError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if x.norm() == 0.0 || !x.is_finite() {
        return Err(GeomError::Degenerate(
            "x = 0: the sublevel set is all of J".into(),
        ));
    }
    if theta_grid == 0 {
        return Err(GeomError::InvalidArgument("theta_grid must be positive".into()));
    }
    let j = family.curve().domain();
    if j.is_empty() {
        return Ok(0.0);
    }
    let lip = family.lipschitz_bound(x);
    let resolved = (j.len() * lip / delta).ceil() as usize;
    let n0 = theta_grid.max(resolved).max(16);
    let f = |t: f64| {
        let jet = family.curve().jet(t);
        (family.proj_norm(&jet, x) - delta, -1.0)
    };
    Ok(refined_length(j, n0, &f))
}
