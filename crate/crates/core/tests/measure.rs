use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rproj::measure::{
    frostman_exponent, generate_ifs, mass_bound_check, mass_bound_with_energy, riesz_energy,
    IfsSpec, MeasureError,
};
use rproj::{DirectionCurve, ProjectionFamily, Vec3, WeightedPointCloud};

fn segment(n: usize) -> WeightedPointCloud {
    let pts = (0..n).map(|i| [(i as f64 + 0.5) / n as f64, 0.0, 0.0]).collect();
    WeightedPointCloud::uniform(1, pts).unwrap()
}

fn random_segment(n: usize, seed: u64) -> WeightedPointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n).map(|_| [rng.gen_range(0.0..1.0), 0.0, 0.0]).collect();
    WeightedPointCloud::uniform(1, pts).unwrap()
}

/// Plain double loop, no compensation and no parallelism.
fn naive_energy(c: &WeightedPointCloud, s: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            if i != j {
                let d = c.point_vec3(i).dist(c.point_vec3(j));
                e += c.masses()[i] * c.masses()[j] * d.powf(-s);
            }
        }
    }
    e
}

#[test]
fn single_map_gives_one_atom() {
    let spec = IfsSpec::new(0.5, vec![Vec3::new(0.1, 0.0, 0.0)]).unwrap();
    let c = generate_ifs(&spec, 6).unwrap();
    assert_eq!(c.len(), 1);
    assert_abs_diff_eq!(c.total_mass(), 1.0, epsilon = 1e-15);
}

#[test]
fn four_corner_dimension() {
    let c = generate_ifs(&IfsSpec::four_corner_thirds(), 3).unwrap();
    assert_abs_diff_eq!(
        c.similarity_dimension().unwrap(),
        4f64.ln() / 3f64.ln(),
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(c.similarity_dimension().unwrap(), 1.26186, epsilon = 1e-5);
}

#[test]
fn cube_corners_tile_the_cube() {
    let d = 3;
    let c = generate_ifs(&IfsSpec::cube_corners(), d).unwrap();
    assert_eq!(c.len(), 8usize.pow(d));
    let side = 2f64.powi(-(d as i32));
    let mut cells: Vec<[i64; 3]> = c
        .points()
        .iter()
        .map(|p| {
            let mut k = [0i64; 3];
            for i in 0..3 {
                k[i] = ((p[i] + 0.5) / side).floor() as i64;
                assert!((0..8).contains(&k[i]));
            }
            k
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    assert_eq!(cells.len(), 512);
}

#[test]
fn frostman_examples() {
    let radii: Vec<f64> = (3..=8).map(|k| 2f64.powi(-k)).collect();
    let f = frostman_exponent(&segment(1024), &radii).unwrap();
    assert!((f.s_hat - 1.0).abs() <= 0.05, "{}", f.s_hat);

    let one = WeightedPointCloud::uniform(3, vec![[0.1, 0.2, 0.3]]).unwrap();
    let f = frostman_exponent(&one, &radii).unwrap();
    assert_eq!(f.s_hat, 0.0);
    assert!(f.degenerate);

    let c = generate_ifs(&IfsSpec::four_corner_thirds(), 6).unwrap();
    let radii: Vec<f64> = (1..=5).map(|k| 0.9 * 3f64.powi(-k)).collect();
    let f = frostman_exponent(&c, &radii).unwrap();
    assert!((f.s_hat - 1.26).abs() <= 0.08, "{}", f.s_hat);
}

#[test]
fn frostman_rejects_short_radius_range() {
    assert!(frostman_exponent(&segment(16), &[0.1, 0.2]).is_err());
}

#[test]
fn riesz_examples() {
    let two = WeightedPointCloud::uniform(1, vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
    for s in [0.25, 1.0, 2.0] {
        assert_abs_diff_eq!(riesz_energy(&two, s).unwrap(), 0.5, epsilon = 1e-15);
    }
    let one = WeightedPointCloud::uniform(1, vec![[0.3, 0.0, 0.0]]).unwrap();
    assert_eq!(riesz_energy(&one, 0.5).unwrap(), 0.0);

    // ∫∫ |x − y|^{-1/2} over [0,1]² = 8/3.
    let e = riesz_energy(&random_segment(2048, 5), 0.5).unwrap();
    assert!((e - 8.0 / 3.0).abs() <= 0.02 * 8.0 / 3.0, "{e}");
}

#[test]
fn riesz_matches_naive_sum() {
    let c = generate_ifs(&IfsSpec::tilted_sierpinski(), 5).unwrap();
    for s in [0.5, 1.0, 1.5] {
        let a = riesz_energy(&c, s).unwrap();
        let b = naive_energy(&c, s);
        assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
    }
}

#[test]
fn duplicate_points_are_reported() {
    let c = WeightedPointCloud::uniform(1, vec![[0.0; 3], [0.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
        .unwrap();
    assert_eq!(
        riesz_energy(&c, 1.0),
        Err(MeasureError::SingularPair { i: 1, j: 2 })
    );
}

#[test]
fn mass_bound_examples() {
    let c = random_segment(2048, 5);
    let b = mass_bound_check(&c, &[0.5, 0.0, 0.0], 0.5, 0.5).unwrap();
    assert_abs_diff_eq!(b.lhs, 1.0, epsilon = 1e-12);
    assert!((b.rhs - (8.0f64 / 3.0).sqrt()).abs() <= 0.02, "{}", b.rhs);
    assert!(b.ok);
    let b = mass_bound_check(&c, &[5.0, 0.0, 0.0], 0.1, 0.5).unwrap();
    assert_eq!(b.lhs, 0.0);
    assert!(b.ok);
}

#[test]
fn mass_bound_on_random_discs() {
    let cloud = generate_ifs(&IfsSpec::four_corner_thirds(), 6).unwrap();
    let fam = ProjectionFamily::bad_plane(DirectionCurve::special_full());
    let nu = cloud.pushforward(&fam, 0.83).unwrap();
    let s = 1.0;
    let energy = riesz_energy(&nu, s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 100 {
        let c = [rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8), 0.0];
        let r = rng.gen_range(0.02..0.5);
        let inside = nu
            .points()
            .iter()
            .filter(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() <= r)
            .count();
        if inside < 2 {
            continue;
        }
        let b = mass_bound_with_energy(&nu, energy, &c, r, s);
        assert!(b.ok, "disc {c:?} r={r}: {} > {}", b.lhs, b.rhs);
        checked += 1;
    }
}

#[test]
fn product_exponent_is_subadditive() {
    let a = generate_ifs(&IfsSpec::four_corner_thirds(), 3).unwrap();
    let seg = segment(64);
    let radii: Vec<f64> = (2..=5).map(|k| 2f64.powi(-k)).collect();
    let fa = frostman_exponent(&a, &radii).unwrap().s_hat;
    let fb = frostman_exponent(&seg, &radii).unwrap().s_hat;
    let prod = WeightedPointCloud::new(
        3,
        a.points()
            .iter()
            .flat_map(|p| seg.points().iter().map(move |q| [p[0], p[1], q[0] - 0.5]))
            .collect(),
        vec![1.0 / (a.len() * seg.len()) as f64; a.len() * seg.len()],
    )
    .unwrap();
    let fp = frostman_exponent(&prod, &radii).unwrap().s_hat;
    assert!(fp <= fa + fb + 0.1, "{fp} > {fa} + {fb}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pushforward_conserves_mass(theta in 0.0..std::f64::consts::TAU, kind in 0usize..3) {
        let cloud = generate_ifs(&IfsSpec::tilted_sierpinski(), 4).unwrap();
        let curve = DirectionCurve::special_full();
        let fam = [
            ProjectionFamily::line(curve.clone()),
            ProjectionFamily::plane(curve.clone()),
            ProjectionFamily::bad_plane(curve),
        ][kind].clone();
        let p = cloud.pushforward(&fam, theta).unwrap();
        prop_assert_eq!(p.masses(), cloud.masses());
        prop_assert!((p.total_mass() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn energy_increases_with_s(seed in 0u64..1000, s in 0.1..1.5f64, ds in 0.05..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Diameter ≤ 1 so every kernel term grows with s.
        let pts = (0..20)
            .map(|_| [rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5)])
            .collect();
        let c = WeightedPointCloud::uniform(3, pts).unwrap();
        prop_assert!(riesz_energy(&c, s).unwrap() <= riesz_energy(&c, s + ds).unwrap());
    }

    #[test]
    fn text_round_trip(seed in 0u64..1000, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
            .collect();
        let c = WeightedPointCloud::uniform(3, pts).unwrap();
        let back = WeightedPointCloud::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }
}
