//! Ball and sphere quadrature on sampled fields.

use crate::error::{Error, Result};
use crate::field::sphere::surface_rule;
use crate::field::{add_scaled, Ball, CoefficientField, GridSpec, Point, ScalarField, SymMat};
use crate::util::ordered_sum;

const GAUSS_OFFSET: f64 = 0.211_324_865_405_187_1; // (1 − 1/√3)/2
const COLUMNS_3D: usize = 4;
const SUBCELLS_2D: usize = 4;
const SUBCELLS_3D: usize = 2;

/// `∫_{x0}^{x1} sqrt(r² − t²) dt` antiderivative.
fn half_chord_integral(r: f64, t: f64) -> f64 {
    let t = t.clamp(-r, r);
    0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).asin())
}

/// Exact area of the disk of radius `r` at the origin intersected with `[x0,x1]×[y0,y1]`.
pub(crate) fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (a, b) = (x0.max(-r), x1.min(r));
    if a >= b || y0 >= y1 {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let s = (r * r - y * y).sqrt();
            cuts.extend([-s, s]);
        }
    }
    cuts.retain(|t| *t >= a && *t <= b);
    cuts.sort_by(f64::total_cmp);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (l, u) = (w[0], w[1]);
        if u <= l {
            continue;
        }
        let m = 0.5 * (l + u);
        let s = (r * r - m * m).max(0.0).sqrt();
        let top_const = y1 <= s;
        let bot_const = y0 >= -s;
        if y1.min(s) <= y0.max(-s) {
            continue;
        }
        let chord = half_chord_integral(r, u) - half_chord_integral(r, l);
        let top = if top_const { y1 * (u - l) } else { chord };
        let bot = if bot_const { y0 * (u - l) } else { -chord };
        area += top - bot;
    }
    area
}

/// Volume fraction of a cell (lower corner `lo`, side `h`) inside `ball`.
fn cell_fraction(dim: usize, lo: &Point, h: f64, ball: &Ball) -> f64 {
    let c = &ball.center;
    let r = ball.radius;
    if dim == 2 {
        return disk_rect_area(r, lo[0] - c[0], lo[0] + h - c[0], lo[1] - c[1], lo[1] + h - c[1]) / (h * h);
    }
    let step = h / COLUMNS_3D as f64;
    let z0 = lo[2] - c[2];
    let z1 = z0 + h;
    let mut vol = 0.0;
    for i in 0..COLUMNS_3D {
        let x = lo[0] + (i as f64 + 0.5) * step - c[0];
        for j in 0..COLUMNS_3D {
            let y = lo[1] + (j as f64 + 0.5) * step - c[1];
            let s2 = r * r - x * x - y * y;
            if s2 <= 0.0 {
                continue;
            }
            let s = s2.sqrt();
            vol += (z1.min(s) - z0.max(-s)).max(0.0);
        }
    }
    vol * step * step / (h * h * h)
}

fn check_inside(grid: &GridSpec, ball: &Ball) -> Result<()> {
    if !grid.contains_ball(ball) {
        return Err(Error::DegenerateBall {
            center: ball.center,
            radius: ball.radius,
            reason: "ball leaves the grid box".into(),
        });
    }
    Ok(())
}

/// `∫_{B} f(w, ∇w, A, x) dx` with `w` and `∇w` from the multilinear interpolant.
/// Cells are integrated with the tensor 2-point Gauss rule; cells cut by the
/// sphere are weighted by their volume fraction inside the ball.
pub fn ball_integral<F>(field: &ScalarField, operator: Option<&CoefficientField>, ball: &Ball, f: F) -> Result<f64>
where
    F: Fn(f64, &Point, &SymMat, &Point) -> f64 + Sync,
{
    let g = field.grid();
    check_inside(g, ball)?;
    if let Some(op) = operator {
        if op.grid() != g {
            return Err(Error::GridMismatch);
        }
    }
    let dim = g.dim();
    let h = g.spacing();
    let origin = g.origin();
    let cells = g.cell_counts();
    let mut lo = [0usize; 3];
    let mut n = [1usize; 3];
    for a in 0..dim {
        let l = (((ball.center[a] - ball.radius - origin[a]) / h).floor().max(0.0)) as usize;
        let u = ((((ball.center[a] + ball.radius - origin[a]) / h).ceil()) as usize).min(cells[a]);
        lo[a] = l.min(cells[a]);
        n[a] = u.saturating_sub(lo[a]);
    }
    let total = n[0] * n[1] * n[2];
    let identity = crate::field::IDENTITY;
    let gauss = [GAUSS_OFFSET, 1.0 - GAUSS_OFFSET];
    let npts = 1usize << dim;
    let vol = h.powi(dim as i32);
    let r2 = ball.radius * ball.radius;
    Ok(ordered_sum(total, |k| {
        let cc = [lo[0] + k / (n[1] * n[2]), lo[1] + (k / n[2]) % n[1], lo[2] + k % n[2]];
        let corner = g.point_at(cc);
        // nearest and farthest cell points from the center
        let mut near = 0.0;
        let mut far = 0.0;
        for a in 0..dim {
            let d0 = corner[a] - ball.center[a];
            let d1 = d0 + h;
            let nd = if d0 > 0.0 {
                d0
            } else if d1 < 0.0 {
                -d1
            } else {
                0.0
            };
            near += nd * nd;
            far += d0.abs().max(d1.abs()).powi(2);
        }
        if near >= r2 {
            return 0.0;
        }
        let eval = |fr: [f64; 3]| {
            let v = field.interpolate(cc, fr);
            let grad = field.cell_gradient(cc, fr);
            let m = match operator {
                Some(op) => op.interpolate_cell(cc, fr),
                None => identity,
            };
            f(v, &grad, &m, &add_scaled(&corner, h, &fr))
        };
        // tensor Gauss rule on a sub-box [o, o + w]^dim of the cell (local coordinates)
        let gauss_box = |o: [f64; 3], w: f64| {
            let mut s = 0.0;
            for q in 0..npts {
                let mut fr = [0.0; 3];
                for a in 0..dim {
                    fr[a] = o[a] + w * gauss[(q >> a) & 1];
                }
                s += eval(fr);
            }
            s / npts as f64
        };
        if far <= r2 {
            return gauss_box([0.0; 3], 1.0) * vol;
        }
        // cut cell: split into subcells; inner ones use the Gauss rule, cut ones
        // their volume fraction times the midpoint value
        let sub = if dim == 2 { SUBCELLS_2D } else { SUBCELLS_3D };
        let w = 1.0 / sub as f64;
        let hs = h * w;
        let mut total = 0.0;
        for k in 0..sub.pow(dim as u32) {
            let mut o = [0.0; 3];
            let mut rest = k;
            for x in o.iter_mut().take(dim) {
                *x = (rest % sub) as f64 * w;
                rest /= sub;
            }
            let slo = add_scaled(&corner, h, &o);
            let (mut snear, mut sfar) = (0.0, 0.0);
            for a in 0..dim {
                let d0 = slo[a] - ball.center[a];
                let d1 = d0 + hs;
                let nd = if d0 > 0.0 {
                    d0
                } else if d1 < 0.0 {
                    -d1
                } else {
                    0.0
                };
                snear += nd * nd;
                sfar += d0.abs().max(d1.abs()).powi(2);
            }
            if snear >= r2 {
                continue;
            }
            if sfar <= r2 {
                total += gauss_box(o, w);
            } else {
                let frac = cell_fraction(dim, &slo, hs, ball);
                if frac > 0.0 {
                    let mut mid = o;
                    for x in mid.iter_mut().take(dim) {
                        *x += 0.5 * w;
                    }
                    total += frac * eval(mid);
                }
            }
        }
        total * vol / sub.pow(dim as u32) as f64
    }))
}

/// `∫_{∂B} f(w(x), A(x), θ) dσ` with the default sphere rule, where `θ` is the
/// unit direction from the center.
pub fn sphere_integral<F>(field: &ScalarField, operator: Option<&CoefficientField>, ball: &Ball, f: F) -> Result<f64>
where
    F: Fn(f64, &SymMat, &Point) -> f64,
{
    let g = field.grid();
    check_inside(g, ball)?;
    let dim = g.dim();
    let mut s = 0.0;
    for (d, w) in surface_rule(dim) {
        let p = add_scaled(&ball.center, ball.radius, d);
        let (cell, frac) = g.locate(&p)?;
        let v = field.interpolate(cell, frac);
        let m = match operator {
            Some(op) => op.interpolate_cell(cell, frac),
            None => crate::field::IDENTITY,
        };
        s += w * f(v, &m, d);
    }
    Ok(s * ball.radius.powi(dim as i32 - 1))
}
