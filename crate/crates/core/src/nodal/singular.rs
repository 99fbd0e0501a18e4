use serde::Serialize;

use super::zero_set::ZeroSet;
use crate::error::Result;
use crate::field::{norm, Ball, Point, ScalarField};

/// Nodes where both `|w|` and `|∇w|` are small relative to their sup over the region.
#[derive(Clone, Debug, Serialize)]
pub struct SingularSet {
    pub points: Vec<Point>,
    pub nodes: Vec<usize>,
    /// `count · h^{n−2}`.
    pub measure_proxy: f64,
    pub eps_zero: f64,
    pub eps_grad: f64,
}

impl SingularSet {
    pub fn count(&self) -> usize {
        self.nodes.len()
    }
}

/// Singular-set proxy of `field` in `region` with thresholds `ε = 10h²`.
/// Only nodes within one cell diameter of the zero set are candidates.
pub fn singular_set(field: &ScalarField, zero_set: &ZeroSet, region: &Ball) -> Result<SingularSet> {
    let g = field.grid();
    let h = g.spacing();
    let eps = 10.0 * h * h;
    let nodes = g.nodes_in_ball(region);
    let grads: Vec<f64> = nodes
        .iter()
        .map(|&i| norm(&field.node_gradient(g.coords(i)).0))
        .collect();
    let sup_w = nodes.iter().map(|&i| field.value(i).abs()).fold(0.0, f64::max);
    let sup_g = grads.iter().copied().fold(0.0, f64::max);
    let diam = h * (g.dim() as f64).sqrt();
    let mut out = Vec::new();
    for (k, &i) in nodes.iter().enumerate() {
        if field.value(i).abs() < eps * sup_w && grads[k] < eps * sup_g && zero_set.distance(&g.node_point(i)) <= diam {
            out.push(i);
        }
    }
    Ok(SingularSet {
        points: out.iter().map(|&i| g.node_point(i)).collect(),
        measure_proxy: out.len() as f64 * h.powi(g.dim() as i32 - 2),
        nodes: out,
        eps_zero: eps,
        eps_grad: eps,
    })
}
