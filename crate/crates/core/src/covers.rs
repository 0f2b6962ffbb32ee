//! Ball covers, the greedy 5r reduction, box counting and the scale pigeonhole.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::measure::WeightedPointCloud;
use crate::util::least_squares;

/// `6/π²`, so that `Σ_k c₀ k⁻² = 1`.
pub const PIGEONHOLE_C0: f64 = 6.0 / (PI * PI);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("scale window: {0}")]
    ScaleWindow(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type CoverResult<T> = Result<T, CoverError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 3], radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn dist_to_center(&self, x: &[f64; 3]) -> f64 {
        let d: f64 = (0..3).map(|i| (self.center[i] - x[i]).powi(2)).sum();
        d.sqrt()
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        self.dist_to_center(x) <= self.radius
    }

    pub fn intersects(&self, o: &Ball) -> bool {
        self.dist_to_center(&o.center) <= self.radius + o.radius
    }

    pub fn dilate(&self, factor: f64) -> Self {
        Self::new(self.center, self.radius * factor)
    }
}

/// A finite family of balls in R^dim, optionally tagged with a dyadic scale `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallCover {
    pub dim: usize,
    pub balls: Vec<Ball>,
    pub scale: Option<i32>,
}

impl BallCover {
    pub fn new(dim: usize, balls: Vec<Ball>) -> CoverResult<Self> {
        if !(1..=3).contains(&dim) {
            return Err(CoverError::InvalidArgument(format!("dimension {dim} not in 1..=3")));
        }
        if let Some(i) = balls.iter().position(|b| !(b.radius > 0.0 && b.radius.is_finite())) {
            return Err(CoverError::InvalidArgument(format!("ball {i} has a non-positive radius")));
        }
        Ok(Self {
            dim,
            balls,
            scale: None,
        })
    }

    /// Tag the cover with scale `k`, checking every radius lies in `[2^-k, 5·2^-k]`.
    pub fn with_scale(mut self, k: i32) -> CoverResult<Self> {
        let lo = 2f64.powi(-k);
        let hi = 5.0 * lo;
        if let Some(i) = self
            .balls
            .iter()
            .position(|b| b.radius < lo * (1.0 - 1e-12) || b.radius > hi * (1.0 + 1e-12))
        {
            return Err(CoverError::InvalidArgument(format!(
                "ball {i} radius {} outside [{lo}, {hi}]",
                self.balls[i].radius
            )));
        }
        self.scale = Some(k);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        self.balls.iter().any(|b| b.contains(x))
    }

    /// Index of the first ball containing `x`.
    pub fn find(&self, x: &[f64; 3]) -> Option<usize> {
        self.balls.iter().position(|b| b.contains(x))
    }

    /// Largest number of balls meeting any single ball of the family (itself included).
    pub fn overlap_bound(&self) -> usize {
        self.balls
            .par_iter()
            .map(|b| self.balls.iter().filter(|o| b.intersects(o)).count())
            .max()
            .unwrap_or(0)
    }
}

/// Indices of the greedy disjoint subfamily: balls are visited by decreasing radius,
/// ties by index, and kept when disjoint from everything kept so far.
pub fn five_r_select(cover: &BallCover) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cover.len()).collect();
    order.sort_by(|&i, &j| {
        cover.balls[j]
            .radius
            .total_cmp(&cover.balls[i].radius)
            .then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let b = &cover.balls[i];
        if kept.iter().all(|&k| !b.intersects(&cover.balls[k])) {
            kept.push(i);
        }
    }
    kept
}

/// 5× dilates of the greedy disjoint subfamily, in selection order.
pub fn five_r_reduce(cover: &BallCover) -> CoverResult<BallCover> {
    if cover.is_empty() {
        return Err(CoverError::InvalidArgument("empty cover".into()));
    }
    let balls = five_r_select(cover)
        .into_iter()
        .map(|i| cover.balls[i].dilate(5.0))
        .collect();
    BallCover::new(cover.dim, balls)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDimension {
    pub slope: f64,
    /// `r²` of the log-log fit.
    pub fit_quality: f64,
    /// `(k, N(2^-k))` for each scale.
    pub counts: Vec<(i32, usize)>,
}

/// Number of dyadic cells of side `2^-k` meeting the support.
pub fn occupied_cells(cloud: &WeightedPointCloud, k: i32) -> usize {
    let scale = 2f64.powi(k);
    let dim = cloud.dim();
    let mut cells: Vec<[i64; 3]> = cloud
        .points()
        .iter()
        .map(|p| {
            let mut c = [0i64; 3];
            for i in 0..dim {
                c[i] = (p[i] * scale).floor() as i64;
            }
            c
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells.len()
}

/// Slope of `log N(2^-k)` against `k log 2` over `k_min..=k_max`.
///
/// The finest scale must leave the cloud unsaturated: `N(2^-k_max)` may not exceed
/// half the number of points.
pub fn box_dimension(cloud: &WeightedPointCloud, k_min: i32, k_max: i32) -> CoverResult<BoxDimension> {
    if k_max - k_min < 4 {
        return Err(CoverError::InvalidArgument(format!(
            "scale range [{k_min}, {k_max}] spans fewer than 4 octaves"
        )));
    }
    let counts: Vec<(i32, usize)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| (k, occupied_cells(cloud, k)))
        .collect();
    if cloud.len() == 1 {
        return Ok(BoxDimension {
            slope: 0.0,
            fit_quality: 1.0,
            counts,
        });
    }
    let finest = counts.last().map(|c| c.1).unwrap_or(0);
    if 2 * finest > cloud.len() {
        return Err(CoverError::ScaleWindow(format!(
            "{finest} occupied cells at k = {k_max} for {} points; the cloud is too coarse",
            cloud.len()
        )));
    }
    let xs: Vec<f64> = counts.iter().map(|(k, _)| *k as f64 * 2f64.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let (slope, _, r2) = least_squares(&xs, &ys);
    Ok(BoxDimension {
        slope,
        fit_quality: r2,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleReport {
    pub k: u32,
    pub mass: f64,
    pub threshold: f64,
}

/// Smallest `k` with `m_k >= c₀ k⁻²`.
pub fn pigeonhole_scale(mass_per_scale: &BTreeMap<u32, f64>) -> CoverResult<ScaleReport> {
    if mass_per_scale.contains_key(&0) {
        return Err(CoverError::InvalidArgument("scales start at k = 1".into()));
    }
    let total: f64 = mass_per_scale.values().sum();
    if total < 1.0 - 1e-9 {
        return Err(CoverError::Precondition(format!("total mass {total} is below 1")));
    }
    mass_per_scale
        .iter()
        .map(|(&k, &m)| ScaleReport {
            k,
            mass: m,
            threshold: PIGEONHOLE_C0 / (k as f64 * k as f64),
        })
        .find(|r| r.mass >= r.threshold)
        .ok_or_else(|| CoverError::Precondition("no scale reaches its threshold".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_reduction() {
        let c = BallCover::new(
            3,
            vec![
                Ball::new([0.0; 3], 1.0),
                Ball::new([0.1, 0.0, 0.0], 1.0),
                Ball::new([3.0, 0.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        let r = five_r_reduce(&c).unwrap();
        assert_eq!(
            r.balls,
            vec![Ball::new([0.0; 3], 5.0), Ball::new([3.0, 0.0, 0.0], 5.0)]
        );
    }

    #[test]
    fn pigeonhole_examples() {
        let m: BTreeMap<u32, f64> = [(10, 1.0)].into();
        assert_eq!(pigeonhole_scale(&m).unwrap().k, 10);
        let m: BTreeMap<u32, f64> = [(4, 0.1), (5, 0.5), (6, 0.2), (7, 0.2)].into();
        assert_eq!(pigeonhole_scale(&m).unwrap().k, 4);
        let m: BTreeMap<u32, f64> = [(3, 0.5)].into();
        assert!(pigeonhole_scale(&m).is_err());
    }
}
