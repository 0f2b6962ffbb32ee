//! Scenario runner: flat `key = value` configs in, versioned CSV out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conegeom::{default_patch, two_cones_cover, TwoConesParams};
use crate::covers::{box_dimension, PIGEONHOLE_C0};
use crate::geom3::{
    eval_curve, sublevel_measure, DirectionCurve, FamilyKind, Interval, ProjectionFamily, Vec3,
};
use crate::measure::{generate_ifs, IfsSpec};
use crate::pipeline::{tube_energy, TubeSystem};
use crate::threecones::{three_cones_cover, ThreeConesParams};
use crate::util::least_squares;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_MODULE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {msg}")]
    Validation { field: String, msg: String },
    #[error("{scenario}: {msg}")]
    Module { scenario: &'static str, msg: String },
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => EXIT_VALIDATION,
            _ => EXIT_MODULE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn invalid(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    CurveCheck,
    Sublevel,
    Dimsweep,
    TwoCones,
    ThreeCones,
    Pipeline,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::CurveCheck => "curve-check",
            Scenario::Sublevel => "sublevel",
            Scenario::Dimsweep => "dimsweep",
            Scenario::TwoCones => "twocones",
            Scenario::ThreeCones => "threecones",
            Scenario::Pipeline => "pipeline",
        }
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "curve-check" => Scenario::CurveCheck,
            "sublevel" => Scenario::Sublevel,
            "dimsweep" => Scenario::Dimsweep,
            "twocones" => Scenario::TwoCones,
            "threecones" => Scenario::ThreeCones,
            "pipeline" => Scenario::Pipeline,
            _ => return Err(invalid("scenario", format!("unknown scenario `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// `special` or `planar`.
    pub curve: String,
    pub domain: Option<(f64, f64)>,
    pub family: FamilyKind,
    /// `tilted-sierpinski`, `four-corner-thirds` or `cube-corners`.
    pub ifs: String,
    pub depth: u32,
    /// Dyadic exponents `k` of the ladder `δ = 2^-k`, strictly increasing.
    pub delta_k: Vec<i32>,
    pub eps: f64,
    pub tau: f64,
    pub c: f64,
    pub sigma: f64,
    pub s: f64,
    pub theta_samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub x: Vec3,
    pub p: Vec3,
    pub pairs: usize,
    pub k_min: i32,
    pub k_max: i32,
    pub dim_threshold: f64,
    pub slab_c: f64,
    pub cap_scale: f64,
    pub r_const: f64,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let tp = TwoConesParams::default();
        let tc = ThreeConesParams::default();
        let mut c = Self {
            scenario,
            curve: "special".into(),
            domain: None,
            family: FamilyKind::Line,
            ifs: "tilted-sierpinski".into(),
            depth: 8,
            delta_k: (6..=14).collect(),
            eps: 0.025,
            tau: 0.25,
            c: tc.c,
            sigma: 1.2,
            s: 1.0,
            theta_samples: 64,
            seed: 0,
            out: None,
            x: Vec3::new(1.0, 0.0, -1.0) * std::f64::consts::FRAC_1_SQRT_2,
            p: Vec3::new(-0.14, 0.686, -0.7),
            pairs: 20,
            k_min: 2,
            k_max: 7,
            dim_threshold: 0.45,
            slab_c: tp.slab_c,
            cap_scale: tp.cap_scale,
            r_const: tc.r_const,
        };
        match scenario {
            Scenario::CurveCheck => c.theta_samples = 10_000,
            Scenario::TwoCones => c.delta_k = vec![7, 8, 9, 10],
            Scenario::ThreeCones => c.delta_k = vec![8, 10],
            Scenario::Pipeline => {
                c.ifs = "four-corner-thirds".into();
                c.depth = 4;
                c.family = FamilyKind::Plane;
                c.delta_k = vec![4, 5, 6];
                c.theta_samples = 32;
            }
            _ => {}
        }
        c
    }

    /// Parse `key = value` lines; `#` starts a comment. `scenario` must be present.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(&format!("line {}", no + 1), "expected `key = value`"))?;
            pairs.push((no + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let scenario: Scenario = pairs
            .iter()
            .find(|(_, k, _)| k == "scenario")
            .map(|(_, _, v)| v.parse())
            .ok_or_else(|| invalid("scenario", "missing"))??;
        let mut cfg = Self::defaults(scenario);
        for (_, k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> CliResult<()> {
        match key {
            "scenario" => {}
            "curve" => self.curve = v.to_string(),
            "domain" => {
                let xs = parse_list::<f64>(key, v)?;
                if xs.len() != 2 {
                    return Err(invalid(key, "expected `lo, hi`"));
                }
                self.domain = Some((xs[0], xs[1]));
            }
            "family" => {
                self.family = FamilyKind::parse(v)
                    .ok_or_else(|| invalid(key, format!("unknown family `{v}`")))?
            }
            "ifs" => self.ifs = v.to_string(),
            "depth" => self.depth = parse_one(key, v)?,
            "delta_k" => self.delta_k = parse_list(key, v)?,
            "eps" => self.eps = parse_one(key, v)?,
            "tau" => self.tau = parse_one(key, v)?,
            "c" => self.c = parse_one(key, v)?,
            "sigma" => self.sigma = parse_one(key, v)?,
            "s" => self.s = parse_one(key, v)?,
            "theta_samples" => self.theta_samples = parse_one(key, v)?,
            "seed" => self.seed = parse_one(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "x" => self.x = parse_vec3(key, v)?,
            "p" => self.p = parse_vec3(key, v)?,
            "pairs" => self.pairs = parse_one(key, v)?,
            "k_min" => self.k_min = parse_one(key, v)?,
            "k_max" => self.k_max = parse_one(key, v)?,
            "dim_threshold" => self.dim_threshold = parse_one(key, v)?,
            "slab_c" => self.slab_c = parse_one(key, v)?,
            "cap_scale" => self.cap_scale = parse_one(key, v)?,
            "r_const" => self.r_const = parse_one(key, v)?,
            _ => return Err(invalid(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.delta_k.is_empty() {
            return Err(invalid("delta_k", "empty ladder"));
        }
        if self.delta_k.windows(2).any(|w| w[1] <= w[0]) || self.delta_k[0] < 1 {
            return Err(invalid(
                "delta_k",
                "exponents must be positive and strictly increasing",
            ));
        }
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(invalid("tau", format!("{} not in (0, 1/2)", self.tau)));
        }
        if !(self.c > 0.0 && self.c <= 0.25) {
            return Err(invalid("c", format!("{} not in (0, 1/4]", self.c)));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        let sigma_floor = if self.family == FamilyKind::Plane { 1.0 } else { 0.5 };
        if !(self.sigma > sigma_floor) {
            return Err(invalid(
                "sigma",
                format!("{} must exceed {sigma_floor} for the {} family", self.sigma, self.family.as_str()),
            ));
        }
        if !(self.s > 0.0 && self.s < 3.0) {
            return Err(invalid("s", format!("{} not in (0, 3)", self.s)));
        }
        if self.theta_samples == 0 {
            return Err(invalid("theta_samples", "must be positive"));
        }
        if self.k_max - self.k_min < 4 {
            return Err(invalid("k_max", "box counting needs k_max - k_min ≥ 4"));
        }
        if !["special", "planar"].contains(&self.curve.as_str()) {
            return Err(invalid("curve", format!("unknown curve `{}`", self.curve)));
        }
        if let Some((lo, hi)) = self.domain {
            if !(lo <= hi) {
                return Err(invalid("domain", "lo must not exceed hi"));
            }
        }
        self.ifs_spec()?;
        Ok(())
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.delta_k.iter().map(|&k| 2f64.powi(-k)).collect()
    }

    pub fn curve(&self) -> CliResult<DirectionCurve> {
        let (lo, hi) = self
            .domain
            .unwrap_or((-std::f64::consts::PI, std::f64::consts::PI));
        let dom = Interval::new(lo, hi).map_err(|e| invalid("domain", e.to_string()))?;
        Ok(match self.curve.as_str() {
            "special" => DirectionCurve::special(dom),
            _ => DirectionCurve::planar(dom),
        })
    }

    pub fn ifs_spec(&self) -> CliResult<IfsSpec> {
        Ok(match self.ifs.as_str() {
            "tilted-sierpinski" => IfsSpec::tilted_sierpinski(),
            "four-corner-thirds" => IfsSpec::four_corner_thirds(),
            "cube-corners" => IfsSpec::cube_corners(),
            other => return Err(invalid("ifs", format!("unknown IFS `{other}`"))),
        })
    }
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| invalid(key, format!("cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> CliResult<Vec<T>> {
    v.split(',').map(|s| parse_one(key, s.trim())).collect()
}

fn parse_vec3(key: &str, v: &str) -> CliResult<Vec3> {
    let xs = parse_list::<f64>(key, v)?;
    if xs.len() != 3 {
        return Err(invalid(key, "expected three comma-separated numbers"));
    }
    Ok(Vec3::new(xs[0], xs[1], xs[2]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub scenario: Scenario,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    fn new(scenario: Scenario, columns: &[&'static str], cfg: &ScenarioConfig) -> Self {
        Self {
            scenario,
            columns: columns.to_vec(),
            rows: Vec::new(),
            metadata: vec![
                ("seed".into(), cfg.seed.to_string()),
                ("version".into(), env!("CARGO_PKG_VERSION").into()),
            ],
        }
    }

    fn meta(&mut self, k: &str, v: impl ToString) {
        self.metadata.push((k.to_string(), v.to_string()));
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#schema=rproj.{}.v1", self.scenario.as_str());
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "#{k}={v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    /// Values of a numeric column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub dropped: usize,
}

/// Least squares of `log y` on `log x`, dropping points with `y = 0`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> CliResult<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(CliError::InsufficientData(format!(
            "{} x values for {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let inc = xs.windows(2).all(|w| w[1] > w[0]);
    let dec = xs.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) || xs.iter().any(|&x| !(x > 0.0)) {
        return Err(CliError::InsufficientData(
            "x values must be positive and strictly monotone".into(),
        ));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    if lx.len() < 3 {
        return Err(CliError::InsufficientData(format!(
            "{} usable points, need 3",
            lx.len()
        )));
    }
    let (slope, intercept, r2) = least_squares(&lx, &ly);
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        dropped: xs.len() - lx.len(),
    })
}

fn module_err(scenario: Scenario) -> impl Fn(String) -> CliError {
    move |msg| CliError::Module {
        scenario: scenario.as_str(),
        msg,
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Run one scenario on the current rayon pool.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::CurveCheck => curve_check(cfg),
        Scenario::Sublevel => sublevel(cfg),
        Scenario::Dimsweep => dimsweep(cfg),
        Scenario::TwoCones => twocones(cfg),
        Scenario::ThreeCones => threecones(cfg),
        Scenario::Pipeline => pipeline(cfg),
    }
}

fn curve_check(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    let err = module_err(cfg.scenario);
    let curve = cfg.curve()?;
    let mut t = ResultTable::new(cfg.scenario, &["theta", "det", "unit_dev"], cfg);
    t.meta("curve", curve.name());
    let mut margin = f64::INFINITY;
    for theta in curve.domain().grid(cfg.theta_samples) {
        let (g, dg, ddg) = eval_curve(&curve, theta).map_err(|e| err(e.to_string()))?;
        let det = Vec3::det(g, dg, ddg);
        margin = margin.min(det.abs());
        t.push(vec![fmt(theta), fmt(det), fmt((g.norm() - 1.0).abs())]);
    }
    t.meta("margin", fmt(margin));
    Ok(t)
}

fn sublevel(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    let err = module_err(cfg.scenario);
    let family = ProjectionFamily::new(cfg.family, cfg.curve()?);
    let mut t = ResultTable::new(cfg.scenario, &["delta", "length"], cfg);
    t.meta("family", cfg.family.as_str());
    t.meta("x", format!("{} {} {}", cfg.x.x, cfg.x.y, cfg.x.z));
    let deltas = cfg.deltas();
    let mut lengths = Vec::new();
    for &d in &deltas {
        let l = sublevel_measure(&family, cfg.x, d, cfg.theta_samples)
            .map_err(|e| err(e.to_string()))?;
        lengths.push(l);
        t.push(vec![fmt(d), fmt(l)]);
    }
    if let Ok(f) = fit_loglog_slope(&deltas, &lengths) {
        t.meta("fit_slope", fmt(f.slope));
        t.meta("fit_r2", fmt(f.r2));
    }
    Ok(t)
}

/// `n` samples `lo + i·|J|/n`, dropping the right endpoint of a closed period.
fn theta_samples(j: Interval, n: usize) -> Vec<f64> {
    (0..n).map(|i| j.lo + j.len() * i as f64 / n as f64).collect()
}

fn dimsweep(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    let err = module_err(cfg.scenario);
    let family = ProjectionFamily::new(cfg.family, cfg.curve()?);
    let cloud = generate_ifs(&cfg.ifs_spec()?, cfg.depth).map_err(|e| err(e.to_string()))?;
    let mut t = ResultTable::new(cfg.scenario, &["theta", "box_dim", "r2"], cfg);
    t.meta("family", cfg.family.as_str());
    t.meta("ifs", &cfg.ifs);
    t.meta("depth", cfg.depth);
    t.meta("similarity_dimension", fmt(cfg.ifs_spec()?.similarity_dimension()));
    t.meta("k_range", format!("{}..{}", cfg.k_min, cfg.k_max));
    let mut hits = 0usize;
    let thetas = theta_samples(family.curve().domain(), cfg.theta_samples);
    for &theta in &thetas {
        let proj = cloud
            .pushforward(&family, theta)
            .map_err(|e| err(e.to_string()))?;
        let bd = box_dimension(&proj, cfg.k_min, cfg.k_max).map_err(|e| err(e.to_string()))?;
        if bd.slope >= cfg.dim_threshold {
            hits += 1;
        }
        t.push(vec![fmt(theta), fmt(bd.slope), fmt(bd.fit_quality)]);
    }
    t.meta("dim_threshold", fmt(cfg.dim_threshold));
    t.meta("fraction_at_threshold", fmt(hits as f64 / thetas.len() as f64));
    Ok(t)
}

fn twocones(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    let err = module_err(cfg.scenario);
    let curve = DirectionCurve::special_full();
    let j = default_patch();
    let params = TwoConesParams {
        slab_c: cfg.slab_c,
        cap_scale: cfg.cap_scale,
    };
    let mut t = ResultTable::new(
        cfg.scenario,
        &["delta", "case", "balls", "slabs", "slab_width", "max_radius", "k_count"],
        cfg,
    );
    t.meta("p", format!("{} {} {}", cfg.p.x, cfg.p.y, cfg.p.z));
    t.meta("eps", fmt(cfg.eps));
    t.meta("tau", fmt(cfg.tau));
    t.meta("slab_c", fmt(params.slab_c));
    t.meta("cap_scale", fmt(params.cap_scale));
    let deltas = cfg.deltas();
    let mut counts = Vec::new();
    for &d in &deltas {
        let r = two_cones_cover(&curve, j, cfg.p, d, cfg.eps, cfg.tau, params)
            .map_err(|e| err(e.to_string()))?;
        let n = r.cover.len() + 2;
        counts.push(n as f64);
        t.push(vec![
            fmt(d),
            r.case.as_str().to_string(),
            n.to_string(),
            r.n_slabs.to_string(),
            fmt(r.slab_width),
            fmt(r.max_radius),
            fmt(r.k_count),
        ]);
    }
    if let Ok(f) = fit_loglog_slope(&deltas, &counts) {
        t.meta("count_exponent", fmt(0.0 - f.slope));
    }
    Ok(t)
}

/// Uniform sample of the closed unit ball.
pub fn random_in_ball<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        if v.norm() <= 1.0 {
            return v;
        }
    }
}

/// `count` pairs in `B(0,1)` with `min(|p|, |q|, |p − q|) ≥ floor`.
pub fn admissible_pairs(seed: u64, count: usize, floor: f64) -> Vec<(Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = random_in_ball(&mut rng);
        let q = random_in_ball(&mut rng);
        if p.norm().min(q.norm()).min((p - q).norm()) >= floor {
            out.push((p, q));
        }
    }
    out
}

fn threecones(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    let err = module_err(cfg.scenario);
    let params = ThreeConesParams {
        c: cfg.c,
        r_const: cfg.r_const,
        ..ThreeConesParams::default()
    };
    let mut t = ResultTable::new(
        cfg.scenario,
        &["delta", "pair", "px", "py", "pz", "qx", "qy", "qz", "branch", "lines", "radius"],
        cfg,
    );
    t.meta("c", fmt(params.c));
    t.meta("R", fmt(params.r_const));
    t.meta("collinear_tau", fmt(params.collinear_tau));
    let deltas = cfg.deltas();
    let floor = deltas[0].powf(params.c);
    let mut pairs = vec![(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0))];
    pairs.extend(admissible_pairs(cfg.seed, cfg.pairs, floor));
    for &d in &deltas {
        for (i, (p, q)) in pairs.iter().enumerate() {
            let r = three_cones_cover(*p, *q, d, params).map_err(|e| err(e.to_string()))?;
            t.push(vec![
                fmt(d),
                i.to_string(),
                fmt(p.x),
                fmt(p.y),
                fmt(p.z),
                fmt(q.x),
                fmt(q.y),
                fmt(q.z),
                r.branch.as_str().to_string(),
                r.lines.len().to_string(),
                fmt(r.radius),
            ]);
        }
    }
    Ok(t)
}

fn pipeline(cfg: &ScenarioConfig) -> CliResult<ResultTable> {
    let err = module_err(cfg.scenario);
    let family = ProjectionFamily::new(cfg.family, cfg.curve()?);
    let cloud = generate_ifs(&cfg.ifs_spec()?, cfg.depth).map_err(|e| err(e.to_string()))?;
    let j = family.curve().domain();
    let thetas = theta_samples(j, cfg.theta_samples);
    let weights = vec![j.len() / thetas.len() as f64; thetas.len()];
    let mut t = ResultTable::new(cfg.scenario, &["name", "lhs", "rhs", "delta", "fitted"], cfg);
    t.meta("family", cfg.family.as_str());
    t.meta("sigma", fmt(cfg.sigma));
    t.meta("c0", fmt(PIGEONHOLE_C0));
    let deltas = cfg.deltas();
    let mut energies = Vec::new();
    for &d in &deltas {
        let sys = TubeSystem::build(&cloud, &family, thetas.clone(), weights.clone(), d, cfg.sigma)
            .map_err(|e| err(e.to_string()))?;
        let e = tube_energy(&cloud, &sys).map_err(|e| err(e.to_string()))?;
        energies.push(e.theta_first);
        t.push(vec![
            "energy_identity".into(),
            fmt(e.theta_first),
            fmt(e.pair_first),
            fmt(d),
            String::new(),
        ]);
        for row in &e.chain {
            t.push(vec![
                row.name.into(),
                fmt(row.lhs),
                fmt(row.rhs),
                fmt(d),
                row.fitted.map(fmt).unwrap_or_default(),
            ]);
        }
    }
    if let Ok(f) = fit_loglog_slope(&deltas, &energies) {
        t.meta("energy_exponent", fmt(f.slope));
    }
    Ok(t)
}

#[derive(Debug, Parser)]
#[command(name = "rproj", version, about = "Restricted projection experiments")]
pub struct Args {
    /// Scenario config file (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; defaults to the config `out`, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub verbose: bool,
}

fn read_config(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

pub fn run(args: &Args) -> CliResult<ResultTable> {
    let mut cfg = ScenarioConfig::parse(&read_config(&args.config)?)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.threads == 0 {
        return Err(invalid("--threads", "must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| invalid("--threads", e.to_string()))?;
    if args.verbose {
        eprintln!("running {} on {} threads", cfg.scenario.as_str(), args.threads);
    }
    let table = pool.install(|| run_scenario(&cfg))?;
    let csv = table.to_csv();
    match &cfg.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?,
        None => print!("{csv}"),
    }
    if args.verbose {
        eprintln!("wrote {} rows", table.rows.len());
    }
    Ok(table)
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&args) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
