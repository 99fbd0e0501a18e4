//! Static kd-tree over facet centroids with exact facet distances at the leaves.

use super::zero_set::Facet;
use crate::field::Point;

const LEAF: usize = 8;
const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    lo: Point,
    hi: Point,
    start: usize,
    end: usize,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug, Default)]
pub struct FacetIndex {
    order: Vec<u32>,
    nodes: Vec<Node>,
    max_radius: f64,
}

fn box_distance(p: &Point, lo: &Point, hi: &Point) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        let d = if p[a] < lo[a] {
            lo[a] - p[a]
        } else if p[a] > hi[a] {
            p[a] - hi[a]
        } else {
            0.0
        };
        s += d * d;
    }
    s.sqrt()
}

impl FacetIndex {
    pub fn build(facets: &[Facet]) -> Self {
        let centroids: Vec<Point> = facets.iter().map(|f| f.centroid()).collect();
        let max_radius = facets.iter().map(|f| f.radius()).fold(0.0, f64::max);
        let mut order: Vec<u32> = (0..facets.len() as u32).collect();
        let mut nodes = Vec::new();
        if !facets.is_empty() {
            Self::split(&centroids, &mut order, 0, facets.len(), &mut nodes);
        }
        FacetIndex {
            order,
            nodes,
            max_radius,
        }
    }

    fn split(c: &[Point], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(c[i as usize][a]);
                hi[a] = hi[a].max(c[i as usize][a]);
            }
        }
        let id = nodes.len();
        nodes.push(Node {
            lo,
            hi,
            start,
            end,
            left: NONE,
            right: NONE,
        });
        if end - start > LEAF {
            let axis = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (start + end) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
                c[x as usize][axis].total_cmp(&c[y as usize][axis]).then(x.cmp(&y))
            });
            let l = Self::split(c, order, start, mid, nodes);
            let r = Self::split(c, order, mid, end, nodes);
            nodes[id].left = l;
            nodes[id].right = r;
        }
        id as u32
    }

    /// Largest facet radius; centroid distances are exact facet distances up to it.
    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// Nearest facet: `(distance, facet index)`; ties go to the lower index.
    pub fn nearest(&self, facets: &[Facet], p: &Point) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if box_distance(p, &node.lo, &node.hi) - self.max_radius > best.0 {
                continue;
            }
            if node.left == NONE {
                for &i in &self.order[node.start..node.end] {
                    let d = facets[i as usize].distance(p);
                    if d < best.0 || (d == best.0 && (i as usize) < best.1) {
                        best = (d, i as usize);
                    }
                }
                continue;
            }
            let (l, r) = (node.left, node.right);
            let dl = box_distance(p, &self.nodes[l as usize].lo, &self.nodes[l as usize].hi);
            let dr = box_distance(p, &self.nodes[r as usize].lo, &self.nodes[r as usize].hi);
            // push the farther child first so the nearer one is searched first
            if dl <= dr {
                stack.push(r);
                stack.push(l);
            } else {
                stack.push(l);
                stack.push(r);
            }
        }
        Some(best)
    }

    /// Facets at exact distance ≤ `r` from `p`, ascending by index.
    pub fn within(&self, facets: &[Facet], p: &Point, r: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .candidates(p, r + self.max_radius)
            .into_iter()
            .filter(|&i| facets[i].distance(p) <= r)
            .collect();
        out.sort_unstable();
        out
    }

    /// Facets whose centroid lies within distance `r` of `p` (any order).
    pub fn candidates(&self, p: &Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if box_distance(p, &node.lo, &node.hi) > r {
                continue;
            }
            if node.left == NONE {
                out.extend(self.order[node.start..node.end].iter().map(|&i| i as usize));
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_matches_brute_force() {
        // a polyline approximating a circle plus a stray segment
        let mut facets = Vec::new();
        let n = 200;
        for k in 0..n {
            let t0 = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let t1 = 2.0 * std::f64::consts::PI * (k + 1) as f64 / n as f64;
            facets.push(Facet {
                a: [t0.cos(), t0.sin(), 0.0],
                b: [t1.cos(), t1.sin(), 0.0],
                c: None,
                cell: k,
            });
        }
        facets.push(Facet {
            a: [3.0, -1.0, 0.0],
            b: [3.0, 1.0, 0.0],
            c: None,
            cell: n,
        });
        let idx = FacetIndex::build(&facets);
        for k in 0..97 {
            let p = [-3.0 + 0.07 * k as f64, 0.31 * ((k * 7) % 11) as f64 - 1.5, 0.0];
            let brute = facets
                .iter()
                .enumerate()
                .map(|(i, f)| (f.distance(&p), i))
                .fold((f64::INFINITY, 0), |b, x| if x.0 < b.0 { x } else { b });
            let (d, i) = idx.nearest(&facets, &p).unwrap();
            assert_eq!(d, brute.0);
            assert_eq!(i, brute.1);
            let w = idx.within(&facets, &p, d + 0.1);
            let wb: Vec<usize> = (0..facets.len())
                .filter(|&i| facets[i].distance(&p) <= d + 0.1)
                .collect();
            assert_eq!(w, wb);
        }
    }
}
