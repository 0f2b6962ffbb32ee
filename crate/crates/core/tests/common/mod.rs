//! Brute-force grid oracles shared by the integration tests.
#![allow(dead_code)]

use rayon::prelude::*;
use rproj::Vec3;

const PAD: f64 = 1e-9;

/// Exact distance to the double cone `C + v`.
pub fn double_cone_distance(x: Vec3, v: Vec3) -> f64 {
    let d = x - v;
    (d.x.hypot(d.y) - d.z.abs()).abs() / std::f64::consts::SQRT_2
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo <= hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// `y`-intervals of the column `(x, ·, z)` inside `(C + v)(δ)`.
fn double_cone_window(x: f64, z: f64, v: Vec3, delta: f64) -> Vec<(f64, f64)> {
    let b = std::f64::consts::SQRT_2 * delta + PAD;
    let dx = x - v.x;
    let dz = (z - v.z).abs();
    let hi = (dz + b).powi(2) - dx * dx;
    if hi < 0.0 {
        return Vec::new();
    }
    let lo = if dz > b { (dz - b).powi(2) - dx * dx } else { 0.0 };
    let (r0, r1) = (lo.max(0.0).sqrt(), hi.sqrt());
    if r0 == 0.0 {
        vec![(v.y - r1, v.y + r1)]
    } else {
        vec![(v.y - r1, v.y - r0), (v.y + r0, v.y + r1)]
    }
}

/// Grid points (pitch `pitch`, aligned at the origin) of
/// `∩_v (C + v)(δ) ∩ B(0,1)` for right circular double cones with vertices `vertices`.
pub fn double_cone_grid(vertices: &[Vec3], delta: f64, pitch: f64) -> Vec<Vec3> {
    let n = (1.0 / pitch).ceil() as i64;
    (-n..=n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let z = k as f64 * pitch;
            let mut pts = Vec::new();
            let rz = 1.0 - z * z;
            if rz < 0.0 {
                return pts.into_iter();
            }
            let (mut xlo, mut xhi) = (-rz.sqrt(), rz.sqrt());
            for v in vertices {
                let r = (z - v.z).abs() + std::f64::consts::SQRT_2 * delta + PAD;
                xlo = xlo.max(v.x - r);
                xhi = xhi.min(v.x + r);
            }
            if xlo > xhi {
                return pts.into_iter();
            }
            for i in (xlo / pitch).floor() as i64..=(xhi / pitch).ceil() as i64 {
                let x = i as f64 * pitch;
                let ry = 1.0 - x * x - z * z;
                if ry < 0.0 {
                    continue;
                }
                let mut win = vec![(-ry.sqrt(), ry.sqrt())];
                for v in vertices {
                    win = intersect(&win, &double_cone_window(x, z, *v, delta));
                    if win.is_empty() {
                        break;
                    }
                }
                for (lo, hi) in win {
                    for j in (lo / pitch).floor() as i64..=(hi / pitch).ceil() as i64 {
                        let p = Vec3::new(x, j as f64 * pitch, z);
                        if p.norm() <= 1.0
                            && vertices
                                .iter()
                                .all(|v| double_cone_distance(p, *v) <= delta)
                        {
                            pts.push(p);
                        }
                    }
                }
            }
            pts.dedup();
            pts.into_iter()
        })
        .collect()
}

/// Exact distance from `x` to the one-sided cone over the arc of the special curve with
/// azimuths in `[center − half, center + half]`.
pub fn patch_distance(x: Vec3, center: f64, half: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let phi = x.y.atan2(x.x);
    let mut d = (phi - center).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    let theta = center + d.clamp(-half, half);
    let g = Vec3::new(theta.cos(), theta.sin(), 1.0) / std::f64::consts::SQRT_2;
    let t = x.dot(g);
    if t <= 0.0 {
        x.norm()
    } else {
        (x.norm2() - t * t).max(0.0).sqrt()
    }
}

/// `y`-window of the column `(x, ·, z)` in the `δ`-neighbourhood of the patch cone with
/// vertex `v`, for the patch centred at azimuth `3π/2` with half-width `half`.
fn patch_window(x: f64, z: f64, v: Vec3, delta: f64, half: f64) -> Option<(f64, f64)> {
    let (dx, dz) = (x - v.x, z - v.z);
    let zmax = dz + delta;
    if zmax < 0.0 {
        return None;
    }
    let zmin = (dz - delta).max(0.0);
    let (s, c) = half.sin_cos();
    // Cone points Y with |Y − (dx, ·, dz)| ≤ δ have Y_z ∈ [zmin, zmax], |Y_x| ≤ Y_z sin(half).
    if dx.abs() > zmax * s + delta {
        return None;
    }
    let xabs_min = if dx.abs() <= delta { 0.0 } else { dx.abs() - delta };
    let xabs_max = dx.abs() + delta;
    let y_low = -(zmax * zmax - xabs_min.min(zmax * s).powi(2)).max(0.0).sqrt();
    let y_high = -((zmin * zmin - xabs_max * xabs_max).max(zmin * zmin * c * c)).max(0.0).sqrt();
    Some((v.y + y_low - delta - PAD, v.y + y_high + delta + PAD))
}

/// Grid points of `𝒞 ∩ (𝒞 + p) ∩ B(0,1)` where `𝒞` is the `δ`-neighbourhood of the
/// one-sided cone over azimuths `3π/2 ± half`.
pub fn patch_pair_grid(p: Vec3, delta: f64, pitch: f64, half: f64) -> Vec<Vec3> {
    let center = 1.5 * std::f64::consts::PI;
    let n = (1.0 / pitch).ceil() as i64;
    let verts = [Vec3::zero(), p];
    (-n..=n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let z = k as f64 * pitch;
            let mut pts = Vec::new();
            let rz = 1.0 - z * z;
            if rz < 0.0 {
                return pts.into_iter();
            }
            let (mut xlo, mut xhi) = (-rz.sqrt(), rz.sqrt());
            for v in &verts {
                let r = ((z - v.z) + delta).max(0.0) * half.sin() + 2.0 * delta;
                xlo = xlo.max(v.x - r);
                xhi = xhi.min(v.x + r);
            }
            if xlo > xhi {
                return pts.into_iter();
            }
            for i in (xlo / pitch).floor() as i64..=(xhi / pitch).ceil() as i64 {
                let x = i as f64 * pitch;
                let mut win = (-1.0f64, 1.0f64);
                let mut ok = true;
                for v in &verts {
                    match patch_window(x, z, *v, delta, half) {
                        Some((a, b)) => {
                            win = (win.0.max(a), win.1.min(b));
                        }
                        None => ok = false,
                    }
                }
                if !ok || win.0 > win.1 {
                    continue;
                }
                for j in (win.0 / pitch).floor() as i64..=(win.1 / pitch).ceil() as i64 {
                    let q = Vec3::new(x, j as f64 * pitch, z);
                    if q.norm() <= 1.0
                        && patch_distance(q, center, half) <= delta
                        && patch_distance(q - p, center, half) <= delta
                    {
                        pts.push(q);
                    }
                }
            }
            pts.into_iter()
        })
        .collect()
}

/// Full-cube brute force of the same set, for validating the windowed oracle.
pub fn patch_pair_brute(p: Vec3, delta: f64, pitch: f64, half: f64) -> Vec<Vec3> {
    let center = 1.5 * std::f64::consts::PI;
    let n = (1.0 / pitch).ceil() as i64;
    (-n..=n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut pts = Vec::new();
            for i in -n..=n {
                for j in -n..=n {
                    let q = Vec3::new(i as f64, j as f64, k as f64) * pitch;
                    if q.norm() <= 1.0
                        && patch_distance(q, center, half) <= delta
                        && patch_distance(q - p, center, half) <= delta
                    {
                        pts.push(q);
                    }
                }
            }
            pts.into_iter()
        })
        .collect()
}

/// Brute force of the double-cone intersection over the whole cube.
pub fn double_cone_brute(vertices: &[Vec3], delta: f64, pitch: f64) -> Vec<Vec3> {
    let n = (1.0 / pitch).ceil() as i64;
    (-n..=n)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut pts = Vec::new();
            for i in -n..=n {
                for j in -n..=n {
                    let q = Vec3::new(i as f64, j as f64, k as f64) * pitch;
                    if q.norm() <= 1.0
                        && vertices.iter().all(|v| double_cone_distance(q, *v) <= delta)
                    {
                        pts.push(q);
                    }
                }
            }
            pts.into_iter()
        })
        .collect()
}

pub fn sorted(mut v: Vec<Vec3>) -> Vec<Vec3> {
    v.sort_by(|a, b| {
        a.z.total_cmp(&b.z)
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
    });
    v
}

fn patch_generator(t: f64) -> Vec3 {
    Vec3::new(t.cos(), t.sin(), 1.0) / std::f64::consts::SQRT_2
}

/// Vertices `p = s γ(θ₁) − r γ(θ₂)` with `θ₁, θ₂` in the patch `3π/2 ± half` and
/// `|p| ∈ [norm_lo, 1]`, so that `s γ(θ₁)` lies on both cones.
pub fn meeting_vertices(seed: u64, half: f64, norm_lo: f64) -> impl Iterator<Item = Vec3> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c = 1.5 * std::f64::consts::PI;
    std::iter::from_fn(move || loop {
        let a = patch_generator(rng.gen_range(c - half..c + half)) * rng.gen_range(0.0..1.0);
        let b = patch_generator(rng.gen_range(c - half..c + half)) * rng.gen_range(0.0..1.5);
        let p = a - b;
        if (norm_lo..=1.0).contains(&p.norm()) {
            return Some(p);
        }
    })
}
