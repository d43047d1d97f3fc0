//! Exact branched transport on finite trees.
//!
//! Moving mass `m` over length `l` costs `m^alpha l`; on a tree the mass
//! carried by each edge is determined by the leaf masses (Kirchhoff), so
//! the cost is a finite sum that can be evaluated exactly. This module
//! is the ground truth the continuous solver is checked against: costs,
//! the landscape potential along root paths, and optimal Y-bifurcations.

use crate::{Error, Result};

/// Rooted tree embedded in the plane. Each non-root node has one parent;
/// masses sit at the nodes (leaves, for the classic irrigation setup).
#[derive(Debug, Clone)]
pub struct IrrigationTree {
    positions: Vec<[f64; 2]>,
    parents: Vec<Option<usize>>,
    masses: Vec<f64>,
    root: usize,
}

impl IrrigationTree {
    /// Builds and validates a tree. `parents[k]` is `None` exactly for
    /// the root; every node must reach the root without cycles and
    /// masses must be nonnegative.
    pub fn new(
        positions: Vec<[f64; 2]>,
        parents: Vec<Option<usize>>,
        masses: Vec<f64>,
    ) -> Result<Self> {
        let n = positions.len();
        if parents.len() != n || masses.len() != n {
            return Err(Error::MalformedTree("positions, parents and masses must align".into()));
        }
        let mut root = None;
        for (k, p) in parents.iter().enumerate() {
            match p {
                None => {
                    if root.replace(k).is_some() {
                        return Err(Error::MalformedTree("more than one root".into()));
                    }
                }
                Some(q) if *q >= n => {
                    return Err(Error::MalformedTree(format!("node {k} has parent {q} out of range")))
                }
                _ => {}
            }
        }
        let root = root.ok_or_else(|| Error::MalformedTree("no root".into()))?;
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::MalformedTree("masses must be nonnegative".into()));
        }
        // every node must reach the root in at most n hops
        for start in 0..n {
            let mut k = start;
            let mut hops = 0;
            while let Some(p) = parents[k] {
                k = p;
                hops += 1;
                if hops > n {
                    return Err(Error::MalformedTree(format!(
                        "cycle detected following parents from node {start}"
                    )));
                }
            }
            if k != root {
                return Err(Error::MalformedTree(format!("node {start} does not reach the root")));
            }
        }
        Ok(IrrigationTree { positions, parents, masses, root })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        self.positions[k]
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parents[k]
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.masses[k]
    }

    /// Nodes without children.
    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.len()];
        for p in self.parents.iter().flatten() {
            has_child[*p] = true;
        }
        (0..self.len()).filter(|&k| !has_child[k]).collect()
    }

    fn edge_length(&self, k: usize) -> f64 {
        let p = self.parents[k].expect("edge_length called on the root");
        let a = self.positions[k];
        let b = self.positions[p];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }
}

/// Per-edge multiplicity (carried mass) and length, indexed by the child
/// node of each edge; the root entry is unused and holds zeros.
#[derive(Debug, Clone)]
pub struct EdgeFlow {
    pub multiplicity: Vec<f64>,
    pub length: Vec<f64>,
}

/// Kirchhoff on trees: the mass on each edge is the total mass in the
/// subtree below it, accumulated in one pass from the leaves up.
pub fn tree_multiplicities(tree: &IrrigationTree) -> EdgeFlow {
    let n = tree.len();
    let mut theta = tree.masses.clone();

    // process children before parents: sort nodes by decreasing depth
    let mut depth = vec![0usize; n];
    for k in 0..n {
        let mut d = 0;
        let mut cur = k;
        while let Some(p) = tree.parents[cur] {
            d += 1;
            cur = p;
        }
        depth[k] = d;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| depth[b].cmp(&depth[a]));
    for &k in &order {
        if let Some(p) = tree.parents[k] {
            theta[p] += theta[k];
        }
    }

    let mut multiplicity = vec![0.0; n];
    let mut length = vec![0.0; n];
    for k in 0..n {
        if tree.parents[k].is_some() {
            multiplicity[k] = theta[k];
            length[k] = tree.edge_length(k);
        }
    }
    EdgeFlow { multiplicity, length }
}

/// Total cost `sum theta_e^alpha * l_e` over the edges.
pub fn gilbert_cost(tree: &IrrigationTree, alpha: f64) -> f64 {
    let flow = tree_multiplicities(tree);
    let mut total = 0.0;
    for k in 0..tree.len() {
        if tree.parents[k].is_some() && flow.length[k] > 0.0 {
            total += flow.multiplicity[k].powf(alpha) * flow.length[k];
        }
    }
    total
}

/// Landscape values `z(node) = sum over root-path edges of
/// theta^{alpha-1} * l`. `z(root) = 0`. A zero-mass edge of positive
/// length on the path makes the value infinite (`0^{alpha-1}` diverges
/// for `alpha < 1`); a zero-mass edge of zero length contributes nothing.
pub fn tree_landscape(tree: &IrrigationTree, alpha: f64) -> Vec<f64> {
    let n = tree.len();
    let flow = tree_multiplicities(tree);
    let mut weight = vec![0.0; n];
    for k in 0..n {
        if tree.parents[k].is_some() {
            weight[k] = if flow.multiplicity[k] > 0.0 {
                flow.multiplicity[k].powf(alpha - 1.0) * flow.length[k]
            } else if flow.length[k] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
    }

    // accumulate along root paths, shallow nodes first
    let mut z = vec![f64::NAN; n];
    z[tree.root] = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut depth = vec![0usize; n];
    for k in 0..n {
        let mut d = 0;
        let mut cur = k;
        while let Some(p) = tree.parents[cur] {
            d += 1;
            cur = p;
        }
        depth[k] = d;
    }
    order.sort_by(|&a, &b| depth[a].cmp(&depth[b]));
    for &k in &order {
        if let Some(p) = tree.parents[k] {
            z[k] = z[p] + weight[k];
        }
    }
    z
}

/// Optimal Y-bifurcation: source, two sinks with masses, and the branch
/// point minimizing the three-edge cost. The location is found by nested
/// ternary search over the bounding box of the terminals inflated by
/// 10% (the cost is convex in the branch point for fixed topology);
/// degenerate solutions at a terminal are allowed.
pub fn optimal_y(
    source: [f64; 2],
    sinks: [[f64; 2]; 2],
    masses: [f64; 2],
    alpha: f64,
) -> ([f64; 2], f64) {
    assert!(masses[0] > 0.0 && masses[1] > 0.0, "sink masses must be positive");
    let trunk = (masses[0] + masses[1]).powf(alpha);
    let branch0 = masses[0].powf(alpha);
    let branch1 = masses[1].powf(alpha);
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let cost = |b: [f64; 2]| {
        trunk * dist(b, source) + branch0 * dist(b, sinks[0]) + branch1 * dist(b, sinks[1])
    };

    let xs = [source[0], sinks[0][0], sinks[1][0]];
    let ys = [source[1], sinks[0][1], sinks[1][1]];
    let min3 = |v: [f64; 3]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max3 = |v: [f64; 3]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = |lo: f64, hi: f64| {
        let margin = 0.1 * (hi - lo).max(1e-12);
        (lo - margin, hi + margin)
    };
    let (x_lo, x_hi) = pad(min3(xs), max3(xs));
    let (y_lo, y_hi) = pad(min3(ys), max3(ys));

    const ITERS: usize = 200;
    let ternary = |mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        for _ in 0..ITERS {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    };

    let best_y_for = |x: f64| ternary(y_lo, y_hi, &|y| cost([x, y]));
    let x_star = ternary(x_lo, x_hi, &|x| cost([x, best_y_for(x)]));
    let y_star = best_y_for(x_star);
    let b = [x_star, y_star];
    (b, cost(b))
}
