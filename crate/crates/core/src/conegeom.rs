//! Graph cones `{(t, h f(t/h), h)}` over a convex profile, slice differences,
//! special points and the two-cones covering algorithm.
//!
//! All slice computations happen in a *frame*: a signed permutation of the world
//! axes in which the cone opens upward and its unit-height section is the graph of
//! a convex function. Covers are mapped back to world coordinates on output.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::covers::{Ball, BallCover, CoverError};
use crate::geom3::{CurveKind, DirectionCurve, GeomError, Interval, Vec3};

/// Grid used when validating profiles and curves.
const PROFILE_GRID: usize = 513;
/// Grid used by the per-slab transversality scan.
const TRANSVERSALITY_GRID: usize = 1024;
/// Heights and abscissae sampled by the case detection scan.
const CASE_SCAN_GRID: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate curve: {0}")]
    Degenerate(String),
    #[error("cannot write the cone as a graph over J; shrink J ({0})")]
    ShrinkJ(String),
    #[error("transversality fails at h = {h}, t = {t} (d = {d}, d' = {dprime}); use the degenerate branch")]
    DegenerateShift { h: f64, t: f64, d: f64, dprime: f64 },
    #[error("slice domain is empty at h = {h}")]
    EmptySlice { h: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty domain: the two graphs have disjoint intervals")]
    EmptyDomain,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

pub type ConeResult<T> = Result<T, ConeError>;

/// Signed permutation taking world coordinates to frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AxisFrame {
    pub swap_xy: bool,
    pub flip_y: bool,
    pub flip_z: bool,
}

impl AxisFrame {
    pub fn to_frame(&self, v: Vec3) -> Vec3 {
        let (x, mut y) = if self.swap_xy { (v.y, v.x) } else { (v.x, v.y) };
        let mut z = v.z;
        if self.flip_y {
            y = -y;
        }
        if self.flip_z {
            z = -z;
        }
        Vec3::new(x, y, z)
    }

    pub fn to_world(&self, v: Vec3) -> Vec3 {
        let mut y = v.y;
        let mut z = v.z;
        if self.flip_y {
            y = -y;
        }
        if self.flip_z {
            z = -z;
        }
        if self.swap_xy {
            Vec3::new(y, v.x, z)
        } else {
            Vec3::new(v.x, y, z)
        }
    }
}

/// Section profile evaluated from a direction curve by inverting `θ ↦ λ₁(θ)`.
#[derive(Debug, Clone)]
pub struct CurveProfile {
    curve: DirectionCurve,
    j: Interval,
    frame: AxisFrame,
}

/// `λ = (γ₁/γ₃, γ₂/γ₃)` in frame coordinates, with first and second derivatives.
#[derive(Debug, Clone, Copy)]
struct PlaneJet {
    l: [f64; 2],
    dl: [f64; 2],
    ddl: [f64; 2],
}

impl CurveProfile {
    fn plane_jet(&self, theta: f64) -> PlaneJet {
        let jet = self.curve.jet(theta);
        let g = self.frame.to_frame(jet.g);
        let dg = self.frame.to_frame(jet.dg);
        let ddg = self.frame.to_frame(jet.ddg);
        let (d, d1, d2) = (g.z, dg.z, ddg.z);
        let quot = |n: f64, n1: f64, n2: f64| {
            let q = n / d;
            let q1 = (n1 * d - n * d1) / (d * d);
            let q2 = (n2 * d - n * d2) / (d * d) - 2.0 * d1 * (n1 * d - n * d1) / (d * d * d);
            (q, q1, q2)
        };
        let (x, x1, x2) = quot(g.x, dg.x, ddg.x);
        let (y, y1, y2) = quot(g.y, dg.y, ddg.y);
        PlaneJet {
            l: [x, y],
            dl: [x1, y1],
            ddl: [x2, y2],
        }
    }

    /// θ with `λ₁(θ) = u`, by bisection on the monotone map.
    fn theta_of(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (self.j.lo, self.j.hi);
        let increasing = self.plane_jet(hi).l[0] > self.plane_jet(lo).l[0];
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let v = self.plane_jet(mid).l[0];
            if (v < u) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn eval(&self, u: f64) -> (f64, f64, f64) {
        let pj = self.plane_jet(self.theta_of(u));
        let [x1, y1] = pj.dl;
        let [x2, y2] = pj.ddl;
        (pj.l[1], y1 / x1, (y2 * x1 - x2 * y1) / (x1 * x1 * x1))
    }
}

#[derive(Debug, Clone)]
pub enum Profile {
    /// `f(u) = -√(1 - u²)`.
    Circle,
    Curve(Box<CurveProfile>),
}

/// The cone `{(t, h f(t/h), h) : h ≥ 0, t/h ∈ [u_min, u_max]}` in frame coordinates.
#[derive(Debug, Clone)]
pub struct GraphCone {
    profile: Profile,
    pub u_min: f64,
    pub u_max: f64,
    /// `min f″` on the validation grid.
    pub eta: f64,
    /// `max |f′|`.
    pub lip: f64,
    /// `max |(u, f(u), 1)|`, the stretch factor along generators.
    pub lambda_max: f64,
    pub frame: AxisFrame,
}

impl GraphCone {
    /// `f(u) = -√(1 - u²)` on `[-1/2, 1/2]`: the special curve near `θ = 3π/2`.
    pub fn default_circle() -> Self {
        Self::circle(-0.5, 0.5, AxisFrame::default()).expect("default profile is valid")
    }

    pub fn circle(u_min: f64, u_max: f64, frame: AxisFrame) -> ConeResult<Self> {
        if !(u_min < u_max && u_min > -1.0 && u_max < 1.0) {
            return Err(ConeError::Precondition(format!(
                "circle profile needs -1 < u_min < u_max < 1, got [{u_min}, {u_max}]"
            )));
        }
        Self::finish(Profile::Circle, u_min, u_max, frame)
    }

    fn finish(profile: Profile, u_min: f64, u_max: f64, frame: AxisFrame) -> ConeResult<Self> {
        let mut cone = Self {
            profile,
            u_min,
            u_max,
            eta: 0.0,
            lip: 0.0,
            lambda_max: 0.0,
            frame,
        };
        let mut eta = f64::INFINITY;
        let mut lip = 0.0f64;
        let mut lam = 0.0f64;
        for u in cone.interval().grid(PROFILE_GRID) {
            let (f, f1, f2) = cone.eval_inside(u);
            eta = eta.min(f2);
            lip = lip.max(f1.abs());
            lam = lam.max((1.0 + u * u + f * f).sqrt());
        }
        if !(eta > 0.0) {
            return Err(ConeError::Degenerate(format!(
                "profile is not strictly convex (min f'' = {eta})"
            )));
        }
        cone.eta = eta;
        cone.lip = lip;
        cone.lambda_max = lam;
        Ok(cone)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.u_min,
            hi: self.u_max,
        }
    }

    fn eval_inside(&self, u: f64) -> (f64, f64, f64) {
        match &self.profile {
            Profile::Circle => {
                let s = (1.0 - u * u).sqrt();
                (-s, u / s, 1.0 / (s * s * s))
            }
            Profile::Curve(c) => c.eval(u),
        }
    }

    /// `(f, f′, f″)` on `I`, continued linearly outside it.
    pub fn f(&self, u: f64) -> (f64, f64, f64) {
        if u < self.u_min {
            let (f, f1, _) = self.eval_inside(self.u_min);
            (f + f1 * (u - self.u_min), f1, 0.0)
        } else if u > self.u_max {
            let (f, f1, _) = self.eval_inside(self.u_max);
            (f + f1 * (u - self.u_max), f1, 0.0)
        } else {
            self.eval_inside(u)
        }
    }

    /// Graph function `g₁(t) = h f(t/h)` of the slice at height `h`.
    pub fn g1(&self, h: f64, t: f64) -> f64 {
        h * self.f(t / h).0
    }

    /// Point `(t, h f(t/h), h)` in world coordinates.
    pub fn world_point(&self, h: f64, t: f64) -> Vec3 {
        self.frame.to_world(Vec3::new(t, self.g1(h, t), h))
    }
}

/// Translation parameters: `C + p` is the graph `(h + a) f((t + b)/(h + a)) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeShift {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ConeShift {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Shift for the translation `p`, given in frame coordinates.
    pub fn from_p(p: Vec3) -> Self {
        Self::new(-p.z, -p.x, p.y)
    }

    /// The translation `p` in frame coordinates.
    pub fn to_p(&self) -> Vec3 {
        Vec3::new(-self.b, self.c, -self.a)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    /// `hb/a`, the only possible zero of `d′_h`; `±∞` when `a = 0`, with the sign
    /// chosen so that `d_h` is increasing to its left.
    pub fn pivot(&self, h: f64) -> f64 {
        if self.a != 0.0 {
            h * self.b / self.a
        } else if self.b <= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `I_h`: where both slice graphs are defined. `None` when empty.
pub fn slice_domain(cone: &GraphCone, shift: &ConeShift, h: f64) -> Option<Interval> {
    let ha = h + shift.a;
    let lo = (h * cone.u_min).max(ha * cone.u_min - shift.b);
    let hi = (h * cone.u_max).min(ha * cone.u_max - shift.b);
    (lo <= hi).then_some(Interval { lo, hi })
}

/// `(d_h(t), d′_h(t))` with the profile continued linearly outside `I`.
pub fn slice_difference_ext(cone: &GraphCone, shift: &ConeShift, h: f64, t: f64) -> (f64, f64) {
    let ha = h + shift.a;
    let (f1, df1, _) = cone.f(t / h);
    let (f2, df2, _) = cone.f((t + shift.b) / ha);
    (h * f1 - (ha * f2 + shift.c), df1 - df2)
}

/// `(d_h(t), d′_h(t))`, checking `min{h, h + a} ≥ height_floor` and `t ∈ I_h`.
pub fn slice_difference(
    cone: &GraphCone,
    shift: &ConeShift,
    h: f64,
    t: f64,
    height_floor: f64,
) -> ConeResult<(f64, f64)> {
    if h.min(h + shift.a) < height_floor || h.min(h + shift.a) <= 0.0 {
        return Err(ConeError::Domain(format!(
            "height h = {h} with a = {} is below the floor {height_floor}",
            shift.a
        )));
    }
    match slice_domain(cone, shift, h) {
        Some(ih) if ih.contains(t) => Ok(slice_difference_ext(cone, shift, h, t)),
        Some(ih) => Err(ConeError::Domain(format!(
            "t = {t} outside I_h = [{}, {}]",
            ih.lo, ih.hi
        ))),
        None => Err(ConeError::EmptySlice { h }),
    }
}

/// Build the graph cone of `{rγ(θ) : r ≥ 0, θ ∈ J}`.
///
/// The special curve gets the closed-form circular profile; any other curve gets a
/// numeric profile evaluated through `λ = (γ₁/γ₃, γ₂/γ₃)`.
pub fn graph_cone_from_curve(curve: &DirectionCurve, j: Interval) -> ConeResult<GraphCone> {
    build_graph_cone(curve, j, curve.kind() == CurveKind::Special)
}

/// [`graph_cone_from_curve`] without the closed-form shortcut.
pub fn graph_cone_numeric(curve: &DirectionCurve, j: Interval) -> ConeResult<GraphCone> {
    build_graph_cone(curve, j, false)
}

fn build_graph_cone(curve: &DirectionCurve, j: Interval, closed_form: bool) -> ConeResult<GraphCone> {
    let curve = curve.restricted(j)?;
    if j.is_empty() {
        return Err(ConeError::Precondition("J has zero length".into()));
    }
    let grid = j.grid(PROFILE_GRID);
    let jets: Vec<_> = grid.iter().map(|&t| curve.jet(t)).collect();
    let g3_min = jets.iter().map(|q| q.g.z).fold(f64::INFINITY, f64::min);
    let g3_max = jets.iter().map(|q| q.g.z).fold(f64::NEG_INFINITY, f64::max);
    let flip_z = if g3_min >= 0.05 {
        false
    } else if g3_max <= -0.05 {
        true
    } else {
        return Err(ConeError::Precondition(format!(
            "gamma_3 ranges over [{g3_min}, {g3_max}]; the curve must stay in one hemisphere"
        )));
    };
    if let Some(q) = jets.iter().find(|q| q.det().abs() < 1e-12) {
        return Err(ConeError::Degenerate(format!(
            "lambda'' vanishes (det[g, g', g''] = {})",
            q.det()
        )));
    }
    let base = CurveProfile {
        curve: curve.clone(),
        j,
        frame: AxisFrame {
            swap_xy: false,
            flip_y: false,
            flip_z,
        },
    };
    let pjs: Vec<_> = grid.iter().map(|&t| base.plane_jet(t)).collect();
    // Monotonicity margin of each candidate graph variable.
    let margin = |k: usize| {
        let lo = pjs.iter().map(|p| p.dl[k]).fold(f64::INFINITY, f64::min);
        let hi = pjs.iter().map(|p| p.dl[k]).fold(f64::NEG_INFINITY, f64::max);
        if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        }
    };
    let (mx, my) = (margin(0), margin(1));
    if mx <= 1e-9 && my <= 1e-9 {
        return Err(ConeError::ShrinkJ(
            "neither coordinate of lambda is monotone on J".into(),
        ));
    }
    let swap_xy = my > mx;
    let (k, o) = if swap_xy { (1, 0) } else { (0, 1) };
    let f2_first = {
        let p = pjs[grid.len() / 2];
        (p.ddl[o] * p.dl[k] - p.ddl[k] * p.dl[o]) / p.dl[k].powi(3)
    };
    let frame = AxisFrame {
        swap_xy,
        flip_y: f2_first < 0.0,
        flip_z,
    };
    let mut prof = base;
    prof.frame = frame;
    let ends = [prof.plane_jet(j.lo).l[0], prof.plane_jet(j.hi).l[0]];
    let (u_min, u_max) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
    if closed_form {
        GraphCone::circle(u_min, u_max, frame)
    } else {
        GraphCone::finish(Profile::Curve(Box::new(prof)), u_min, u_max, frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Zero,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialPoints {
    pub s1: f64,
    pub s2: f64,
    pub kinds: [PointKind; 2],
    /// `|s_i - hb/a|` for the points that are zeros.
    pub pivot_gaps: [Option<f64>; 2],
}

fn bisect_zero<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, tol: f64, f: F) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) <= 0.0) == (flo <= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zero of `d` on a piece where it is monotone, if the endpoint values straddle 0.
fn piece_zero<F: Fn(f64) -> f64>(lo: f64, hi: f64, tol: f64, f: &F) -> Option<f64> {
    if lo > hi {
        return None;
    }
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        Some(lo)
    } else if fhi == 0.0 {
        Some(hi)
    } else if (flo < 0.0) != (fhi < 0.0) {
        Some(bisect_zero(lo, hi, tol, f))
    } else {
        None
    }
}

/// Check `|d| ≤ δ^τ ⇒ |d′| ≥ δ^τ` on a grid of `I_h` plus the pivot.
pub fn transversality_scan(
    cone: &GraphCone,
    shift: &ConeShift,
    h: f64,
    ih: Interval,
    thr: f64,
    samples: usize,
) -> ConeResult<()> {
    let pivot = shift.pivot(h);
    let mut ts = ih.grid(samples.max(2));
    if ih.contains(pivot) {
        ts.push(pivot);
    }
    for t in ts {
        let (d, dp) = slice_difference_ext(cone, shift, h, t);
        if d.abs() <= thr && dp.abs() < thr {
            return Err(ConeError::DegenerateShift { h, t, d, dprime: dp });
        }
    }
    Ok(())
}

/// The two special points of the slice at height `h`: zeros of `d_h` on either side
/// of `hb/a`, or the endpoints of `I_h` where no such zero exists.
pub fn special_points(
    cone: &GraphCone,
    shift: &ConeShift,
    h: f64,
    delta: f64,
    tau: f64,
) -> ConeResult<SpecialPoints> {
    if !(h > 0.0 && h + shift.a > 0.0) {
        return Err(ConeError::Domain(format!(
            "heights h = {h}, h + a = {} must be positive",
            h + shift.a
        )));
    }
    let ih = slice_domain(cone, shift, h).ok_or(ConeError::EmptySlice { h })?;
    transversality_scan(cone, shift, h, ih, delta.powf(tau), TRANSVERSALITY_GRID)?;
    let pivot = shift.pivot(h);
    let d = |t: f64| slice_difference_ext(cone, shift, h, t).0;
    let tol = delta * delta;
    let left = piece_zero(ih.lo, pivot.min(ih.hi), tol, &d);
    let right = piece_zero(pivot.max(ih.lo), ih.hi, tol, &d);
    let gap = |z: f64| if pivot.is_finite() { (z - pivot).abs() } else { f64::INFINITY };
    let (s1, k1, g1) = match left {
        Some(z) => (z, PointKind::Zero, Some(gap(z))),
        None => (ih.lo, PointKind::Endpoint, None),
    };
    let (s2, k2, g2) = match right {
        Some(z) => (z, PointKind::Zero, Some(gap(z))),
        None => (ih.hi, PointKind::Endpoint, None),
    };
    Ok(SpecialPoints {
        s1,
        s2: s2.max(s1),
        kinds: [k1, k2],
        pivot_gaps: [g1, g2],
    })
}

/// Closed intervals of `[lo, hi]` containing every `t` with `|f(t)| ≤ thr`, for `f`
/// Lipschitz with constant `lip`. Cells are refined down to `min_width`; a cell is
/// dropped only when the Lipschitz bound proves `|f| > thr` on all of it.
pub fn certified_sublevel<F: Fn(f64) -> f64>(
    lo: f64,
    hi: f64,
    lip: f64,
    thr: f64,
    min_width: f64,
    f: &F,
) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    if lo > hi {
        return out;
    }
    if lo == hi {
        if f(lo).abs() <= thr {
            out.push((lo, hi));
        }
        return out;
    }
    let coarse = 64usize;
    let step = (hi - lo) / coarse as f64;
    let mut stack: Vec<(f64, f64)> = (0..coarse)
        .rev()
        .map(|i| {
            let a = lo + step * i as f64;
            let b = if i + 1 == coarse { hi } else { lo + step * (i + 1) as f64 };
            (a, b)
        })
        .collect();
    while let Some((a, b)) = stack.pop() {
        let m = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        if f(m).abs() - lip * hw > thr {
            continue;
        }
        if b - a <= min_width {
            match out.last_mut() {
                Some(last) if last.1 >= a => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        } else {
            stack.push((m, b));
            stack.push((a, m));
        }
    }
    out
}

/// A graph over an interval, for [`graph_intersection_cover`].
pub struct Graph<'a> {
    pub domain: Interval,
    pub g: &'a dyn Fn(f64) -> f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphCover {
    /// Superset of `{t ∈ I₁ ∩ I₂ : |g₁ - g₂| ≤ 6Lδ}`.
    pub intervals: Vec<(f64, f64)>,
    /// 2D balls covering the `6Lδ`-neighbourhood of `g₁` over `intervals`.
    pub cover: BallCover,
}

/// Cover of `Γ₁(δ) ∩ Γ₂(δ)` for two `L`-Lipschitz graphs.
pub fn graph_intersection_cover(
    g1: &Graph<'_>,
    g2: &Graph<'_>,
    delta: f64,
    lip: f64,
) -> ConeResult<GraphCover> {
    if !(lip >= 1.0) {
        return Err(ConeError::Precondition(format!("L must be at least 1, got {lip}")));
    }
    if !(delta > 0.0) {
        return Err(ConeError::Precondition("delta must be positive".into()));
    }
    let lo = g1.domain.lo.max(g2.domain.lo);
    let hi = g1.domain.hi.min(g2.domain.hi);
    if lo > hi {
        return Err(ConeError::EmptyDomain);
    }
    let thr = 6.0 * lip * delta;
    let diff = |t: f64| (g1.g)(t) - (g2.g)(t);
    let intervals = certified_sublevel(lo, hi, 2.0 * lip, thr, delta / 8.0, &diff);
    let stretch = (1.0 + lip * lip).sqrt();
    let mut balls = Vec::new();
    for &(a, b) in &intervals {
        let pieces = ((b - a) / delta).ceil().max(1.0) as usize;
        let step = (b - a) / pieces as f64;
        for k in 0..pieces {
            let m = a + step * (k as f64 + 0.5);
            balls.push(Ball::new([m, (g1.g)(m), 0.0], 0.5 * step * stretch + thr));
        }
    }
    Ok(GraphCover {
        intervals,
        cover: BallCover::new(2, balls)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    A,
    B,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A => "a",
            Self::B => "b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoConesParams {
    /// Exponent multiplier `C` in the slab width `δ^(1/2 + 2τ + Cε)`.
    pub slab_c: f64,
    /// Cap heights are `cap_scale · δ^ε`.
    pub cap_scale: f64,
}

impl Default for TwoConesParams {
    fn default() -> Self {
        Self {
            slab_c: 4.0,
            cap_scale: 0.1,
        }
    }
}

/// `τ(ε) = 4ε + 0.01`, the smallest admissible `τ`.
pub fn tau_floor(eps: f64) -> f64 {
    4.0 * eps + 0.01
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoConesReport {
    pub case: CaseTag,
    /// Main balls, world coordinates.
    pub cover: BallCover,
    /// Slab height (frame coordinates) of each main ball.
    pub slab_heights: Vec<f64>,
    /// Balls around `0` and `p` covering the heights below the cap floor.
    pub caps: [Ball; 2],
    pub cap_height: f64,
    pub slab_width: f64,
    pub n_slabs: usize,
    /// `(h, t)` where the degeneracy `|d| ≤ δ^τ ∧ |d′| ≤ δ^τ` was found.
    pub degeneracy_witness: Option<(f64, f64)>,
    pub shift: ConeShift,
    pub delta: f64,
    pub eps: f64,
    pub tau: f64,
    pub params: TwoConesParams,
    pub max_radius: f64,
    /// `count · δ^e` where `e` is the target count exponent for the case.
    pub k_count: f64,
    /// `max diameter / δ^e'` where `e'` is the target diameter exponent.
    pub k_diam: f64,
}

impl TwoConesReport {
    pub fn all_balls(&self) -> impl Iterator<Item = &Ball> {
        self.caps.iter().chain(self.cover.balls.iter())
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        self.all_balls().any(|b| b.contains(x))
    }

    /// Rows `cx cy cz radius slab_h case_tag`; cap balls use `slab_h = nan` and tag `cap`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for b in &self.caps {
            let c = b.center;
            let _ = writeln!(s, "{} {} {} {} NaN cap", c[0], c[1], c[2], b.radius);
        }
        for (b, h) in self.cover.balls.iter().zip(&self.slab_heights) {
            let c = b.center;
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                c[0],
                c[1],
                c[2],
                b.radius,
                h,
                self.case.as_str()
            );
        }
        s
    }
}

struct SlabSetup<'a> {
    cone: &'a GraphCone,
    shift: ConeShift,
    delta: f64,
    tau: f64,
    width: f64,
}

impl SlabSetup<'_> {
    /// Horizontal thickening of both slices that absorbs the slab and `δ`.
    fn rho(&self) -> f64 {
        self.delta + (0.5 * self.width + self.delta) * self.cone.lambda_max
    }

    /// Certified parameter set `{t₁}` for the slab centred at `h`.
    fn cells(&self, h: f64) -> Vec<(f64, f64)> {
        let cone = self.cone;
        let (a, b) = (self.shift.a, self.shift.b);
        let rho = self.rho();
        let lip = cone.lip;
        let thr = (2.0 + 2.0 * lip) * rho;
        let i2lo = (h + a) * cone.u_min - b;
        let i2hi = (h + a) * cone.u_max - b;
        let lo = (h * cone.u_min).max(i2lo - 2.0 * rho).max(-1.0 - rho);
        let hi = (h * cone.u_max).min(i2hi + 2.0 * rho).min(1.0 + rho);
        let d = |t: f64| slice_difference_ext(cone, &self.shift, h, t).0;
        certified_sublevel(lo, hi, 2.0 * lip, thr, self.delta / 4.0, &d)
    }

    fn ball(&self, h: f64, s: f64, reach: f64) -> (Ball, f64) {
        let stretch = (1.0 + self.cone.lip * self.cone.lip).sqrt();
        let c = self.cone.world_point(h, s);
        let r = reach * stretch + self.rho() + 0.5 * self.width;
        (Ball::new(c.to_array(), r), h)
    }

    fn slab_a(&self, h: f64) -> ConeResult<Vec<(Ball, f64)>> {
        let cells = self.cells(h);
        if cells.is_empty() {
            return Ok(Vec::new());
        }
        let centers = match slice_domain(self.cone, &self.shift, h) {
            Some(_) => {
                let sp = special_points(self.cone, &self.shift, h, self.delta, self.tau)?;
                [sp.s1, sp.s2]
            }
            None => [cells[0].0, cells[cells.len() - 1].1],
        };
        let split = 0.5 * (centers[0] + centers[1]);
        let mut reach = [None::<f64>; 2];
        for &(l, r) in &cells {
            if l <= split {
                let far = (l - centers[0]).abs().max((r.min(split) - centers[0]).abs());
                reach[0] = Some(reach[0].unwrap_or(0.0).max(far));
            }
            if r >= split {
                let far = (r - centers[1]).abs().max((l.max(split) - centers[1]).abs());
                reach[1] = Some(reach[1].unwrap_or(0.0).max(far));
            }
        }
        Ok((0..2)
            .filter_map(|i| reach[i].map(|rc| self.ball(h, centers[i], rc)))
            .collect())
    }

    fn slab_b(&self, h: f64) -> Vec<(Ball, f64)> {
        let cells = self.cells(h);
        if cells.is_empty() {
            return Vec::new();
        }
        let cone = self.cone;
        let (a, b) = (self.shift.a, self.shift.b);
        let ratio = if a != 0.0 {
            b / a
        } else {
            self.shift.pivot(1.0)
        };
        let t = ((h + a) * ratio.clamp(cone.u_min, cone.u_max) - b)
            .clamp(h * cone.u_min, h * cone.u_max);
        let reach = cells
            .iter()
            .map(|&(l, r)| (l - t).abs().max((r - t).abs()))
            .fold(0.0, f64::max);
        vec![self.ball(h, t, reach)]
    }
}

/// Scan heights and abscissae for `|d| ≤ δ^τ ∧ |d′| ≤ δ^τ`.
fn detect_degeneracy(
    cone: &GraphCone,
    shift: &ConeShift,
    h_lo: f64,
    h_hi: f64,
    thr: f64,
) -> Option<(f64, f64)> {
    if h_lo > h_hi {
        return None;
    }
    let hs = Interval { lo: h_lo, hi: h_hi }.grid(CASE_SCAN_GRID);
    for h in hs {
        let Some(ih) = slice_domain(cone, shift, h) else {
            continue;
        };
        let mut ts = ih.grid(CASE_SCAN_GRID);
        let pivot = shift.pivot(h);
        if ih.contains(pivot) {
            ts.push(pivot);
        }
        for t in ts {
            let (d, dp) = slice_difference_ext(cone, shift, h, t);
            if d.abs() <= thr && dp.abs() <= thr {
                return Some((h, t));
            }
        }
    }
    None
}

/// Cover `𝒞 ∩ (𝒞 + p) ∩ B(0,1)` where `𝒞` is the `δ`-neighbourhood of the one-sided
/// cone over `γ(J)`.
#[allow(clippy::too_many_arguments)]
pub fn two_cones_cover(
    curve: &DirectionCurve,
    j: Interval,
    p: Vec3,
    delta: f64,
    eps: f64,
    tau: f64,
    params: TwoConesParams,
) -> ConeResult<TwoConesReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ConeError::Precondition(format!("delta = {delta} not in (0, 1)")));
    }
    if !(eps > 0.0) {
        return Err(ConeError::Precondition(format!("eps = {eps} must be positive")));
    }
    let pn = p.norm();
    if pn < delta.powf(eps) || pn > 1.0 {
        return Err(ConeError::Precondition(format!(
            "|p| = {pn} outside [delta^eps, 1] = [{}, 1]",
            delta.powf(eps)
        )));
    }
    if !(tau >= tau_floor(eps) && tau < 0.5) {
        return Err(ConeError::Precondition(format!(
            "tau = {tau} outside [{}, 1/2)",
            tau_floor(eps)
        )));
    }
    if !(params.cap_scale > 0.0 && params.slab_c >= 0.0) {
        return Err(ConeError::Precondition("cap_scale must be positive, slab_c nonnegative".into()));
    }
    let cone = graph_cone_from_curve(curve, j)?;
    let pf = cone.frame.to_frame(p);
    let shift = ConeShift::from_p(pf);
    let cap_height = params.cap_scale * delta.powf(eps);
    let cap_r = (cap_height + delta) * cone.lambda_max + delta;
    let caps = [
        Ball::new([0.0; 3], cap_r),
        Ball::new(p.to_array(), cap_r),
    ];
    let z_lo = cap_height + (-shift.a).max(0.0);
    let z_hi = 1.0;
    let thr = delta.powf(tau);
    let mut witness = detect_degeneracy(&cone, &shift, z_lo, z_hi, thr);

    let build = |case: CaseTag| -> ConeResult<(Vec<(Ball, f64)>, f64, usize)> {
        let exponent = match case {
            CaseTag::A => 0.5 + 2.0 * tau + params.slab_c * eps,
            CaseTag::B => tau / 4.0,
        };
        let w_max = delta.powf(exponent);
        if z_lo >= z_hi {
            return Ok((Vec::new(), w_max, 0));
        }
        let n = ((z_hi - z_lo) / w_max).ceil().max(1.0) as usize;
        let width = (z_hi - z_lo) / n as f64;
        let setup = SlabSetup {
            cone: &cone,
            shift,
            delta,
            tau,
            width,
        };
        let per_slab: Vec<ConeResult<Vec<(Ball, f64)>>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let h = z_lo + width * (k as f64 + 0.5);
                match case {
                    CaseTag::A => setup.slab_a(h),
                    CaseTag::B => Ok(setup.slab_b(h)),
                }
            })
            .collect();
        let mut balls = Vec::new();
        for r in per_slab {
            balls.extend(r?);
        }
        Ok((balls, width, n))
    };

    let (case, (balls, width, n_slabs)) = if witness.is_some() {
        (CaseTag::B, build(CaseTag::B)?)
    } else {
        match build(CaseTag::A) {
            Ok(v) => (CaseTag::A, v),
            Err(ConeError::DegenerateShift { h, t, .. }) => {
                witness = Some((h, t));
                (CaseTag::B, build(CaseTag::B)?)
            }
            Err(e) => return Err(e),
        }
    };
    let (slab_heights, balls): (Vec<f64>, Vec<Ball>) = balls.into_iter().map(|(b, h)| (h, b)).unzip();
    let max_radius = balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    let (count_exp, diam_exp) = match case {
        CaseTag::A => (0.5 + 2.0 * tau, 0.5),
        CaseTag::B => (tau / 4.0, tau / 4.0),
    };
    Ok(TwoConesReport {
        case,
        k_count: balls.len() as f64 * delta.powf(count_exp),
        k_diam: 2.0 * max_radius / delta.powf(diam_exp),
        cover: BallCover::new(3, balls)?,
        slab_heights,
        caps,
        cap_height,
        slab_width: width,
        n_slabs,
        degeneracy_witness: witness,
        shift,
        delta,
        eps,
        tau,
        params,
        max_radius,
    })
}

/// The default patch `J = [3π/2 - π/6, 3π/2 + π/6]` of the special curve.
pub fn default_patch() -> Interval {
    Interval {
        lo: 1.5 * PI - PI / 6.0,
        hi: 1.5 * PI + PI / 6.0,
    }
}
