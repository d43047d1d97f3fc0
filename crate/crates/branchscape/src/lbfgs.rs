//! Limited-memory BFGS metric: curvature-pair history and the two-loop
//! recursion applying the inverse metric `H^{-1}` to a vector.
//!
//! The history doubles as the definition of the twisted norm used by the
//! projection, so it is kept separate from the outer descent loop.

use std::collections::VecDeque;

/// Minimal vector-space interface the two-loop recursion needs.
pub trait LinearSpace: Clone {
    fn dot(&self, other: &Self) -> f64;
    /// `self += c * other`
    fn add_scaled(&mut self, c: f64, other: &Self);
    /// `self *= c`
    fn scale(&mut self, c: f64);
}

impl LinearSpace for Vec<f64> {
    fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    fn add_scaled(&mut self, c: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += c * b;
        }
    }

    fn scale(&mut self, c: f64) {
        for a in self.iter_mut() {
            *a *= c;
        }
    }
}

impl LinearSpace for crate::grid::StaggeredField {
    fn dot(&self, other: &Self) -> f64 {
        StaggeredField::dot(self, other)
    }

    fn add_scaled(&mut self, c: f64, other: &Self) {
        StaggeredField::add_scaled(self, c, other)
    }

    fn scale(&mut self, c: f64) {
        StaggeredField::scale(self, c)
    }
}

use crate::grid::StaggeredField;

/// Pairs with `y.z <= CURVATURE_EPS * |y| |z|` are discarded: on a
/// nonconvex objective the curvature can be nonpositive, which would
/// break the recursion.
pub const CURVATURE_EPS: f64 = 1e-10;

struct Pair<T> {
    /// Point difference `z = v_new - v_old`.
    z: T,
    /// Gradient difference `y = g_new - g_old`.
    y: T,
    /// `1 / (y . z)`.
    r: f64,
}

/// Ring buffer of at most `capacity` curvature pairs. Empty history is
/// the identity metric with unit scaling.
pub struct LbfgsHistory<T> {
    pairs: VecDeque<Pair<T>>,
    capacity: usize,
}

impl<T: LinearSpace> LbfgsHistory<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        LbfgsHistory { pairs: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Central scaling factor `(z_last . y_last) / (y_last . y_last)`;
    /// `1` for an empty history. This also serves as the cheap estimate
    /// of `|H^{-1}|` used to size the dual step.
    pub fn scaling(&self) -> f64 {
        match self.pairs.back() {
            Some(p) => p.z.dot(&p.y) / p.y.dot(&p.y),
            None => 1.0,
        }
    }

    /// Inserts the pair `(z, y) = (v_new - v_old, g_new - g_old)`,
    /// evicting the oldest when full. Returns false (and stores nothing)
    /// when the curvature `y.z` is too small.
    pub fn update(&mut self, z: T, y: T) -> bool {
        let yz = y.dot(&z);
        let bound = CURVATURE_EPS * y.dot(&y).sqrt() * z.dot(&z).sqrt();
        if !(yz > bound) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(Pair { z, y, r: 1.0 / yz });
        true
    }

    /// Two-loop recursion: returns `H^{-1} x`.
    pub fn multiply(&self, x: &T) -> T {
        let mut g = x.clone();
        if self.pairs.is_empty() {
            return g;
        }
        let mut s = vec![0.0; self.pairs.len()];
        for (k, pair) in self.pairs.iter().enumerate().rev() {
            let sk = pair.r * pair.z.dot(&g);
            g.add_scaled(-sk, &pair.y);
            s[k] = sk;
        }
        g.scale(self.scaling());
        for (k, pair) in self.pairs.iter().enumerate() {
            let t = pair.r * pair.y.dot(&g);
            g.add_scaled(s[k] - t, &pair.z);
        }
        g
    }
}

/// Convenience alias for the solver's field-valued history.
pub type FieldHistory = LbfgsHistory<StaggeredField>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_history_is_identity() {
        let hist: LbfgsHistory<Vec<f64>> = LbfgsHistory::new(5);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(hist.multiply(&x), x);
        assert_eq!(hist.scaling(), 1.0);
    }

    #[test]
    fn single_pair_matches_expanded_formula() {
        let mut hist = LbfgsHistory::new(3);
        let z = vec![1.0, 2.0, 0.5];
        let y = vec![0.5, 1.0, 1.0];
        assert!(hist.update(z.clone(), y.clone()));

        let x = vec![0.3, -0.7, 1.1];
        let got = hist.multiply(&x);

        // H^{-1} x = gamma (x - r (z.x) y) + [r (z.x) - r y.(gamma (x - r (z.x) y))] z
        let yz: f64 = y.dot(&z);
        let r = 1.0 / yz;
        let gamma = yz / y.dot(&y);
        let s = r * z.dot(&x);
        let mut mid = x.clone();
        mid.add_scaled(-s, &y);
        mid.scale(gamma);
        let t = r * y.dot(&mid);
        let mut expect = mid;
        expect.add_scaled(s - t, &z);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn degenerate_pairs_are_skipped() {
        let mut hist = LbfgsHistory::new(3);
        assert!(!hist.update(vec![0.0, 0.0], vec![1.0, 0.0])); // z = 0
        assert!(!hist.update(vec![1.0, 0.0], vec![-1.0, 0.0])); // y.z < 0
        assert!(hist.is_empty());
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut hist = LbfgsHistory::new(2);
        assert!(hist.update(vec![1.0, 0.0], vec![1.0, 0.0]));
        assert!(hist.update(vec![0.0, 1.0], vec![0.0, 2.0]));
        assert!(hist.update(vec![1.0, 1.0], vec![2.0, 1.0]));
        assert_eq!(hist.len(), 2);
        // newest pair drives the scaling: (z.y)/(y.y) = 3/5
        assert!((hist.scaling() - 3.0 / 5.0).abs() < 1e-15);
    }
}
