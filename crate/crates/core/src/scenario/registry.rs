use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{normalize, Params, ParamsExt, Scenario};
use crate::error::{Error, Result};
use crate::field::{CoefficientField, GridSpec, Point, ScalarField};
use crate::solver::{residual_norm, solve_dirichlet, BoundaryData, DirichletProblem, MaskedRegion, Region};

/// Registered scenario kinds.
pub const REGISTRY: &[&str] = &[
    "harmonic_poly",
    "product_pair",
    "leon_simon",
    "exp_family",
    "operator_pair_h",
    "neck",
    "halfplane_poisson",
    "random_harmonic",
    "runge_collapse",
];

/// Default grid spacing when neither the scenario nor the suite sets one.
pub const DEFAULT_H: f64 = 1.0 / 32.0;

/// Tolerance of the Dirichlet solves inside scenario builders.
const SOLVE_TOL: f64 = 1e-10;

/// Residual gate for sampled polynomials of degree ≥ 4, which the 5-point
/// stencil does not reproduce exactly (O(h²) truncation error).
const HIGH_DEGREE_GATE: f64 = 1e-4;

/// Builds a registered scenario. Parameters common to all kinds: `h`, `half`
/// (box half-width), `seed`, `normalize` (default true) and `residual_tol`.
pub fn build_scenario(name: &str, params: &Params) -> Result<Scenario> {
    build_scenario_with(name, params, None)
}

/// As [`build_scenario`], with `h_override` replacing the `h` parameter.
pub fn build_scenario_with(name: &str, params: &Params, h_override: Option<f64>) -> Result<Scenario> {
    let h = match h_override {
        Some(h) => h,
        None => params.f64_or("h", DEFAULT_H)?,
    };
    if !(h > 0.0) {
        return Err(Error::Config(format!("grid spacing h = {h} must be positive")));
    }
    let seed = params.usize_or("seed", 0)? as u64;
    let mut sc = match name {
        "harmonic_poly" => harmonic_poly(params, h)?,
        "product_pair" => product_pair(params, h)?,
        "leon_simon" => leon_simon(params, h)?,
        "exp_family" => exp_family(params, h)?,
        "operator_pair_h" => operator_pair(params, h)?,
        "neck" => neck(params, h)?,
        "halfplane_poisson" => halfplane_poisson(params, h)?,
        "random_harmonic" => random_harmonic(params, h, seed)?,
        "runge_collapse" => {
            return Err(Error::OutOfScope(
                "collapsing harmonic functions from Runge approximation have no bounded-frequency \
                 representative on a fixed grid; the construction is descriptive only"
                    .into(),
            ))
        }
        other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
    };
    sc.seed = seed;
    sc.params = params.clone();
    sc.params.insert("h".into(), toml::Value::Float(h));
    sc.params
        .insert("half".into(), toml::Value::Float(half_width(&sc.grid)));
    if let Some(t) = params.opt_f64("residual_tol")? {
        sc.residual_tol = t;
    }
    if params.bool_or("normalize", true)? {
        normalize(&mut sc)?;
    }
    Ok(sc)
}

fn half_width(g: &GridSpec) -> f64 {
    g.hi()[0]
}

fn cube(params: &Params, dim: usize, default_half: f64, h: f64) -> Result<GridSpec> {
    let half = params.f64_or("half", default_half)?;
    GridSpec::cube(dim, half, h).map_err(|e| Error::Config(e.to_string()))
}

fn dim_param(params: &Params, default: usize) -> Result<usize> {
    let d = params.usize_or("dim", default)?;
    if d != 2 && d != 3 {
        return Err(Error::Config(format!("dim must be 2 or 3, got {d}")));
    }
    Ok(d)
}

/// Analytic scenario skeleton with `A = I`.
fn analytic(kind: &str, label: String, grid: GridSpec, u: ScalarField) -> Result<Scenario> {
    let op = CoefficientField::identity(&grid);
    let residual_u = residual_norm(&u, &op)?;
    Ok(Scenario {
        kind: kind.into(),
        label,
        params: Params::new(),
        grid,
        family: vec![u.clone()],
        u,
        v: None,
        op_u: op,
        op_v: None,
        level: None,
        domain_point: None,
        slab: None,
        quotient: None,
        n0_declared: None,
        seed: 0,
        residual_tol: 1e-8,
        residual_u,
        residual_v: None,
        residual_family: Vec::new(),
        normalization: 1.0,
    })
}

/// `Re z^d` or `Im z^d` with `z = x + iy`, by binomial expansion.
fn poly(d: u32, imaginary: bool, p: &Point) -> f64 {
    let (x, y) = (p[0], p[1]);
    let mut re = 0.0;
    let mut im = 0.0;
    let mut binom = 1.0;
    for k in 0..=d {
        let term = binom * x.powi((d - k) as i32) * y.powi(k as i32);
        match k % 4 {
            0 => re += term,
            1 => im += term,
            2 => re -= term,
            _ => im -= term,
        }
        binom = binom * (d - k) as f64 / (k + 1) as f64;
    }
    if imaginary {
        im
    } else {
        re
    }
}

type PointFn = Box<dyn Fn(&Point) -> f64 + Sync>;

fn harmonic_poly(params: &Params, h: f64) -> Result<Scenario> {
    let d = params.usize_or("d", 2)?;
    if d == 0 || d > 12 {
        return Err(Error::Config(format!(
            "harmonic_poly degree must be in 1..=12, got {d}"
        )));
    }
    let part = params.get("part").map(|_| params.str_or("part", "re")).transpose()?;
    let dim = dim_param(params, 2)?;
    let grid = cube(params, dim, 4.25, h)?;
    let (name, f): (String, PointFn) = match (d, part) {
        (1, None) => ("x".into(), Box::new(|p: &Point| p[0])),
        (2, None) => ("xy".into(), Box::new(|p: &Point| p[0] * p[1])),
        (_, None) | (_, Some("re")) => (format!("Re z^{d}"), Box::new(move |p: &Point| poly(d as u32, false, p))),
        (_, Some("im")) => (format!("Im z^{d}"), Box::new(move |p: &Point| poly(d as u32, true, p))),
        (_, Some(other)) => return Err(Error::Config(format!("part must be 're' or 'im', got '{other}'"))),
    };
    let u = ScalarField::from_fn(&grid, name.clone(), |p| f(p))?;
    let mut sc = analytic("harmonic_poly", format!("harmonic_poly(d={d})"), grid.clone(), u)?;
    sc.n0_declared = Some(d as f64);
    if d >= 4 {
        sc.residual_tol = HIGH_DEGREE_GATE;
    }
    if let Some(k) = params.opt_f64("pair_factor")? {
        let v = sc.u.scaled(k).with_label(format!("{k}·{name}"));
        sc.residual_v = Some(sc.residual_u);
        sc.v = Some(v);
    }
    sc.domain_point = match params.point("domain_point")? {
        Some(p) => Some(p),
        None => Some(if d == 1 { [1.0, 0.0, 0.0] } else { [1.0, 1.0, 0.0] }),
    };
    Ok(sc)
}

fn product_pair(params: &Params, h: f64) -> Result<Scenario> {
    let grid = cube(params, 2, 8.25, h)?;
    let u = ScalarField::from_fn(&grid, "xy", |p| p[0] * p[1])?;
    let v = ScalarField::from_fn(&grid, "xy(x²-y²)", |p| p[0] * p[1] * (p[0] * p[0] - p[1] * p[1]))?;
    let mut sc = analytic("product_pair", "product_pair".into(), grid, u)?;
    sc.residual_v = Some(residual_norm(&v, &sc.op_u)?);
    sc.v = Some(v);
    sc.quotient = Some(|p| p[0] * p[0] - p[1] * p[1]);
    sc.n0_declared = Some(4.0);
    sc.domain_point = Some([1.0, 1.0, 0.0]);
    Ok(sc)
}

/// `u = xy + a·sin z` for `Δu − f''(z) ∂²_{xy}u = 0` with `f = a·sin`, written in
/// divergence form with the cross entry `−f''(z)/2`.
fn leon_simon(params: &Params, h: f64) -> Result<Scenario> {
    let a = params.f64_or("amp", 0.1)?;
    if !(a.abs() < 0.5) {
        return Err(Error::Config(format!(
            "leon_simon needs |f''| < 1/2, amplitude {a} is too large"
        )));
    }
    let grid = cube(params, 3, 2.25, h)?;
    let u = ScalarField::from_fn(&grid, format!("xy + {a} sin z"), |p| p[0] * p[1] + a * p[2].sin())?;
    let op = CoefficientField::from_fn(&grid, |p| {
        let c = a * p[2].sin() / 2.0;
        [[1.0, c, 0.0], [c, 1.0, 0.0], [0.0, 0.0, 1.0]]
    })?;
    let mut sc = analytic("leon_simon", format!("leon_simon(amp={a})"), grid, u)?;
    sc.residual_u = residual_norm(&sc.u, &op)?;
    sc.op_u = op;
    sc.residual_tol = 1e-3;
    sc.n0_declared = Some(2.0);
    sc.domain_point = Some([1.0, 1.0, 0.0]);
    Ok(sc)
}

fn exp_field(grid: &GridSpec, a: f64, b: f64) -> Result<ScalarField> {
    if ((a * a + b * b) - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "exp_family needs a² + b² = 1, got a = {a}, b = {b}"
        )));
    }
    ScalarField::from_fn(grid, format!("sin(z)e^({a}x+{b}y)"), |p| {
        p[2].sin() * (a * p[0] + b * p[1]).exp()
    })
}

/// `sin(z)·e^{ax+by}` with `a² + b² = 1`; the partner uses `(pa, pb)`.
fn exp_family(params: &Params, h: f64) -> Result<Scenario> {
    let a = params.f64_or("a", 1.0)?;
    let b = params.f64_or("b", 0.0)?;
    let pa = params.f64_or("pa", FRAC_1_SQRT_2)?;
    let pb = params.f64_or("pb", FRAC_1_SQRT_2)?;
    let grid = cube(params, 3, 4.25, h)?;
    let u = exp_field(&grid, a, b)?;
    let v = exp_field(&grid, pa, pb)?;
    let mut sc = analytic("exp_family", format!("exp_family(a={a},b={b})"), grid, u)?;
    sc.residual_v = Some(residual_norm(&v, &sc.op_u)?);
    sc.v = Some(v);
    // sampled transcendental fields: the residual is the O(h²) truncation error
    sc.residual_tol = 1e-2;
    sc.domain_point = Some([0.0, 0.0, 1.0]);
    Ok(sc)
}

/// `u = xy` with `A = I` and `v` solving `div((2 + tanh(x² − y²))∇v) = 0` with data `xy`.
fn operator_pair(params: &Params, h: f64) -> Result<Scenario> {
    let grid = cube(params, 2, 1.5, h)?;
    let u = ScalarField::from_fn(&grid, "xy", |p| p[0] * p[1])?;
    let op_v = CoefficientField::isotropic_from_fn(&grid, |p| 2.0 + (p[0] * p[0] - p[1] * p[1]).tanh())?;
    let rep = solve_dirichlet(
        &DirichletProblem {
            operator: op_v.clone(),
            region: Region::Box,
            boundary: BoundaryData::function(|p| p[0] * p[1]),
        },
        SOLVE_TOL,
    )?;
    let mut sc = analytic("operator_pair_h", "operator_pair_h".into(), grid, u)?;
    sc.v = Some(rep.solution.with_label("v_h"));
    sc.residual_v = Some(rep.residual_linf);
    sc.op_v = Some(op_v);
    sc.n0_declared = Some(2.0);
    sc.domain_point = Some([0.5, 0.5, 0.0]);
    Ok(sc)
}

/// Neck domain `{x² − y² > −ε, |x| < 1}`: `v_ε` is harmonic there with data 1
/// on `x = 1` and 0 elsewhere; `u = v_ε(−x, y)`.
fn neck(params: &Params, h: f64) -> Result<Scenario> {
    let eps = params.f64_or("eps", 0.1)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!(
            "neck width parameter eps = {eps} must lie in (0, 1)"
        )));
    }
    let grid = cube(params, 2, 1.25, h)?;
    let hyper = ScalarField::from_fn(&grid, format!("x²-y²+{eps}"), |p| p[0] * p[0] - p[1] * p[1] + eps)?;
    let level = ScalarField::from_fn(&grid, "neck level", |p| {
        (p[0] * p[0] - p[1] * p[1] + eps).min(1.0 - p[0].abs())
    })?;
    let interior = level.values().iter().map(|&l| l > 0.0).collect();
    let rep = solve_dirichlet(
        &DirichletProblem {
            operator: CoefficientField::identity(&grid),
            region: Region::Masked(MaskedRegion {
                interior,
                level: Some(level),
                clip: None,
            }),
            boundary: BoundaryData::function(|p| if p[0] >= 1.0 - 1e-12 { 1.0 } else { 0.0 }),
        },
        SOLVE_TOL,
    )?;
    let v = rep.solution.with_label("v_eps");
    let n = grid.counts()[0];
    let mirrored: Vec<f64> = (0..grid.node_count())
        .map(|i| {
            let c = grid.coords(i);
            v.at([n - 1 - c[0], c[1], c[2]])
        })
        .collect();
    let u = ScalarField::new(grid.clone(), mirrored, "v_eps(-x,y)")?;
    let op = CoefficientField::identity(&grid);
    Ok(Scenario {
        kind: "neck".into(),
        label: format!("neck(eps={eps})"),
        params: Params::new(),
        family: vec![u.clone()],
        u,
        v: Some(v),
        op_u: op,
        op_v: None,
        level: Some(hyper),
        domain_point: Some([0.0; 3]),
        slab: Some(1.0),
        quotient: None,
        n0_declared: None,
        seed: 0,
        residual_tol: 1e-8,
        residual_u: rep.residual_linf,
        residual_v: Some(rep.residual_linf),
        residual_family: Vec::new(),
        normalization: 1.0,
        grid,
    })
}

/// Smooth bump on `[lo, hi]`, zero outside.
fn bump(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo || x >= hi {
        0.0
    } else {
        (PI * (x - lo) / (hi - lo)).sin().powi(2)
    }
}

/// Upper half-plane `u = y` on a grid offset by `h/2` in `y` (the zero set runs
/// between node rows), with `v` the Poisson extension of a bump on `[4, 5]`.
fn halfplane_poisson(params: &Params, h: f64) -> Result<Scenario> {
    let half = params.f64_or("half", 5.25)?;
    let lo = params.f64_or("bump_lo", 4.0)?;
    let hi = params.f64_or("bump_hi", 5.0)?;
    let grid = GridSpec::from_box(2, &[-half, -0.5 - h / 2.0], &[half, half + h / 2.0], h)
        .map_err(|e| Error::Config(e.to_string()))?;
    let u = ScalarField::from_fn(&grid, "y", |p| p[1])?;
    let interior = (0..grid.node_count()).map(|i| grid.node_point(i)[1] > 0.0).collect();
    let rep = solve_dirichlet(
        &DirichletProblem {
            operator: CoefficientField::identity(&grid),
            region: Region::Masked(MaskedRegion {
                interior,
                level: Some(u.clone()),
                clip: None,
            }),
            boundary: BoundaryData::function(move |p| if p[1].abs() < 1e-12 { bump(p[0], lo, hi) } else { 0.0 }),
        },
        SOLVE_TOL,
    )?;
    let mut sc = analytic("halfplane_poisson", "halfplane_poisson".into(), grid, u)?;
    sc.v = Some(rep.solution.with_label("poisson bump"));
    sc.residual_v = Some(rep.residual_linf);
    sc.n0_declared = Some(1.0);
    sc.domain_point = Some([0.0, 1.0, 0.0]);
    Ok(sc)
}

/// Seeded combinations of `Re z^k`, `Im z^k`, `k = 1..=deg`, coefficients uniform in `[−1, 1]`.
fn random_harmonic(params: &Params, h: f64, seed: u64) -> Result<Scenario> {
    let deg = params.usize_or("deg", 4)?;
    let count = params.usize_or("count", 10)?;
    if deg == 0 || deg > 12 || count == 0 {
        return Err(Error::Config(format!(
            "random_harmonic needs 1 ≤ deg ≤ 12 and count ≥ 1, got {deg}, {count}"
        )));
    }
    let grid = cube(params, 2, 4.25, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = CoefficientField::identity(&grid);
    let mut family = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for m in 0..count {
        let coef: Vec<(f64, f64)> = (0..deg)
            .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
            .collect();
        let f = ScalarField::from_fn(&grid, format!("random_harmonic[{m}]"), |p| {
            coef.iter()
                .enumerate()
                .map(|(k, (a, b))| a * poly(k as u32 + 1, false, p) + b * poly(k as u32 + 1, true, p))
                .sum()
        })?;
        residuals.push(residual_norm(&f, &op)?);
        family.push(f);
    }
    let mut sc = analytic(
        "random_harmonic",
        format!("random_harmonic(deg={deg},seed={seed},count={count})"),
        grid,
        family[0].clone(),
    )?;
    sc.family = family;
    sc.residual_family = residuals;
    if deg >= 4 {
        sc.residual_tol = HIGH_DEGREE_GATE;
    }
    sc.n0_declared = Some(deg as f64);
    Ok(sc)
}

#[cfg(test)]
pub(crate) fn poly_for_tests(d: u32, imaginary: bool, p: &Point) -> f64 {
    poly(d, imaginary, p)
}
