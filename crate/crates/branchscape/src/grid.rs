//! Staggered (MAC) discretization of the square `[-1,1]^2`.
//!
//! The domain is divided into `M x M` cells of width `h = 2/M`. Scalars
//! live at cell centers; the x-component of a vector field lives on
//! x-normal faces (vertical edges, `(M+1) x M` of them) and the
//! y-component on y-normal faces (`M x (M+1)`). Fields are stored flat,
//! second index contiguous.
//!
//! Sign and adjointness conventions:
//!
//! * `divergence` takes forward differences of face values into cells.
//! * `gradient` takes backward differences of cell values onto interior
//!   faces and leaves boundary faces at zero.
//!
//! With plain (unweighted) sums as inner products these two are exact
//! negative adjoints on fields whose boundary faces vanish:
//! `<grad U, V> + <U, div V> = 0`. The dual projection solver relies on
//! this identity holding to rounding accuracy, which is why no `h^2`
//! weight appears here; energies carry their own `h^2` factors.

/// Geometry of the uniform grid on `[-1,1]^2`: `M` cells per side of
/// width `h = 2/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    m: usize,
    h: f64,
}

impl GridGeometry {
    /// Grid with `m` cells per side. Panics if `m < 2`.
    pub fn new(m: usize) -> Self {
        assert!(m >= 2, "grid needs at least 2 cells per side, got {m}");
        GridGeometry { m, h: 2.0 / m as f64 }
    }

    /// Cells per side.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Cell width `2/M`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Center of cell `(i, j)`: `i` counts in x, `j` in y.
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            -1.0 + (i as f64 + 0.5) * self.h,
            -1.0 + (j as f64 + 0.5) * self.h,
        ]
    }
}

/// Scalar field at cell centers, `M x M`, index `(i, j) -> i*M + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let m = geometry.m();
        CellField { geometry, values: vec![0.0; m * m] }
    }

    /// Wrap existing values; panics unless `values.len() == M*M`.
    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Self {
        let m = geometry.m();
        assert_eq!(values.len(), m * m, "cell field needs M*M values");
        CellField { geometry, values }
    }

    #[inline]
    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.geometry.m() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let m = self.geometry.m();
        self.values[i * m + j] = v;
    }

    /// Plain (unweighted) inner product.
    pub fn dot(&self, other: &CellField) -> f64 {
        assert_eq!(self.geometry, other.geometry, "geometry mismatch");
        dot_slices(&self.values, &other.values)
    }

    /// Euclidean norm of the raw values.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Sum of all values (plain summation order).
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &CellField) {
        assert_eq!(self.geometry, other.geometry, "geometry mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    /// `self *= c`.
    pub fn scale(&mut self, c: f64) {
        for a in self.values.iter_mut() {
            *a *= c;
        }
    }

    /// Backward-difference gradient onto interior faces; boundary faces
    /// stay zero so that `gradient` is the exact negative adjoint of
    /// [`StaggeredField::divergence`] on the admissible space.
    pub fn gradient(&self) -> StaggeredField {
        let m = self.geometry.m();
        let h = self.geometry.h();
        let inv_h = 1.0 / h;
        let mut out = StaggeredField::zeros(self.geometry);
        // interior x-faces: i = 1..M-1 inclusive
        for i in 1..m {
            let row = i * m;
            let left = (i - 1) * m;
            for j in 0..m {
                out.vx[row + j] = (self.values[row + j] - self.values[left + j]) * inv_h;
            }
        }
        // interior y-faces: j = 1..M-1 inclusive
        for i in 0..m {
            let cells = i * m;
            let faces = i * (m + 1);
            for j in 1..m {
                out.vy[faces + j] = (self.values[cells + j] - self.values[cells + j - 1]) * inv_h;
            }
        }
        out
    }
}

/// Vector field at cell centers (the interpolated `V-hat`), two `M x M`
/// component grids.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVectorField {
    geometry: GridGeometry,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl CellVectorField {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.m() * geometry.m();
        CellVectorField { geometry, xs: vec![0.0; n], ys: vec![0.0; n] }
    }

    #[inline]
    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    /// Pointwise Euclidean magnitude, as a cell field.
    pub fn magnitude(&self) -> CellField {
        let values = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| (x * x + y * y).sqrt())
            .collect();
        CellField::from_values(self.geometry, values)
    }
}

/// Vector field on grid faces: `vx` is `(M+1) x M` (x-normal faces,
/// index `(i,j) -> i*M + j`), `vy` is `M x (M+1)` (`(i,j) -> i*(M+1)+j`).
///
/// Admissible fields have all boundary faces zero (`vx[0,.]`, `vx[M,.]`,
/// `vy[.,0]`, `vy[.,M]`), i.e. the field is parallel to the boundary.
/// Constructors produce admissible fields; raw mutable access can break
/// the invariant, and operations that need it say so.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField {
    geometry: GridGeometry,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl StaggeredField {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let m = geometry.m();
        StaggeredField {
            geometry,
            vx: vec![0.0; (m + 1) * m],
            vy: vec![0.0; m * (m + 1)],
        }
    }

    /// Wrap existing component arrays; panics on shape mismatch.
    pub fn from_components(geometry: GridGeometry, vx: Vec<f64>, vy: Vec<f64>) -> Self {
        let m = geometry.m();
        assert_eq!(vx.len(), (m + 1) * m, "vx needs (M+1)*M values");
        assert_eq!(vy.len(), m * (m + 1), "vy needs M*(M+1) values");
        StaggeredField { geometry, vx, vy }
    }

    #[inline]
    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    #[inline]
    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    #[inline]
    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    #[inline]
    pub fn vx_mut(&mut self) -> &mut [f64] {
        &mut self.vx
    }

    #[inline]
    pub fn vy_mut(&mut self) -> &mut [f64] {
        &mut self.vy
    }

    #[inline]
    pub fn vx_at(&self, i: usize, j: usize) -> f64 {
        self.vx[i * self.geometry.m() + j]
    }

    #[inline]
    pub fn vy_at(&self, i: usize, j: usize) -> f64 {
        self.vy[i * (self.geometry.m() + 1) + j]
    }

    #[inline]
    pub fn set_vx(&mut self, i: usize, j: usize, v: f64) {
        let m = self.geometry.m();
        self.vx[i * m + j] = v;
    }

    #[inline]
    pub fn set_vy(&mut self, i: usize, j: usize, v: f64) {
        let m = self.geometry.m();
        self.vy[i * (m + 1) + j] = v;
    }

    /// True if all four boundary face layers are exactly zero.
    pub fn boundary_is_zero(&self) -> bool {
        let m = self.geometry.m();
        let top = m * m; // first index of the i = M layer of vx
        self.vx[..m].iter().all(|&v| v == 0.0)
            && self.vx[top..].iter().all(|&v| v == 0.0)
            && (0..m).all(|i| self.vy[i * (m + 1)] == 0.0 && self.vy[i * (m + 1) + m] == 0.0)
    }

    /// Forces the boundary face layers to zero in place.
    pub fn zero_boundary(&mut self) {
        let m = self.geometry.m();
        for j in 0..m {
            self.vx[j] = 0.0;
            self.vx[m * m + j] = 0.0;
        }
        for i in 0..m {
            self.vy[i * (m + 1)] = 0.0;
            self.vy[i * (m + 1) + m] = 0.0;
        }
    }

    /// Forward-difference divergence into cells. Expects an admissible
    /// field (zero boundary faces), which makes the cell sum telescope
    /// to zero.
    pub fn divergence(&self) -> CellField {
        debug_assert!(self.boundary_is_zero(), "divergence expects zero boundary faces");
        let m = self.geometry.m();
        let inv_h = 1.0 / self.geometry.h();
        let mut out = CellField::zeros(self.geometry);
        for i in 0..m {
            let cells = i * m;
            let xs = i * m;
            let xs_next = (i + 1) * m;
            let ys = i * (m + 1);
            for j in 0..m {
                out.values[cells + j] = (self.vx[xs_next + j] - self.vx[xs + j]) * inv_h
                    + (self.vy[ys + j + 1] - self.vy[ys + j]) * inv_h;
            }
        }
        out
    }

    /// Two-point average of the face pairs bounding each cell.
    pub fn interpolate_to_centers(&self) -> CellVectorField {
        let m = self.geometry.m();
        let mut out = CellVectorField::zeros(self.geometry);
        for i in 0..m {
            let cells = i * m;
            let xs = i * m;
            let xs_next = (i + 1) * m;
            let ys = i * (m + 1);
            for j in 0..m {
                out.xs[cells + j] = 0.5 * (self.vx[xs + j] + self.vx[xs_next + j]);
                out.ys[cells + j] = 0.5 * (self.vy[ys + j] + self.vy[ys + j + 1]);
            }
        }
        out
    }

    /// Plain inner product over both components.
    pub fn dot(&self, other: &StaggeredField) -> f64 {
        assert_eq!(self.geometry, other.geometry, "geometry mismatch");
        dot_slices(&self.vx, &other.vx) + dot_slices(&self.vy, &other.vy)
    }

    /// Euclidean norm over both components.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &StaggeredField) {
        assert_eq!(self.geometry, other.geometry, "geometry mismatch");
        for (a, b) in self.vx.iter_mut().zip(&other.vx) {
            *a += c * b;
        }
        for (a, b) in self.vy.iter_mut().zip(&other.vy) {
            *a += c * b;
        }
    }

    /// `self *= c`.
    pub fn scale(&mut self, c: f64) {
        for a in self.vx.iter_mut() {
            *a *= c;
        }
        for a in self.vy.iter_mut() {
            *a *= c;
        }
    }
}

/// Sum of squared forward differences (divided by `h`) of one staggered
/// component of shape `n0 x n1`. Each of the two difference directions
/// runs over its complete valid range, so every consecutive pair of
/// entries is counted exactly once and the sum is invariant under the
/// dihedral symmetries of the grid. An affine component therefore
/// yields exactly one unit per difference taken along its slope.
pub fn face_gradient_energy(component: &[f64], n0: usize, n1: usize, h: f64) -> f64 {
    assert_eq!(component.len(), n0 * n1, "component shape mismatch");
    let inv_h2 = 1.0 / (h * h);
    let mut total = 0.0;
    for p in 0..n0 - 1 {
        let row = p * n1;
        let next = (p + 1) * n1;
        for q in 0..n1 {
            let d = component[next + q] - component[row + q];
            total += d * d * inv_h2;
        }
    }
    for p in 0..n0 {
        let row = p * n1;
        for q in 0..n1 - 1 {
            let d = component[row + q + 1] - component[row + q];
            total += d * d * inv_h2;
        }
    }
    total
}

#[inline]
fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compensated summation (Kahan with Neumaier's correction); used where
/// mass balances are checked against tolerances near machine precision.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_admissible(geom: GridGeometry, rng: &mut StdRng) -> StaggeredField {
        let mut v = StaggeredField::zeros(geom);
        let m = geom.m();
        for i in 1..m {
            for j in 0..m {
                v.set_vx(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        for i in 0..m {
            for j in 1..m {
                v.set_vy(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        v
    }

    fn random_cells(geom: GridGeometry, rng: &mut StdRng) -> CellField {
        let mut u = CellField::zeros(geom);
        for v in u.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        u
    }

    #[test]
    fn divergence_of_zero_field_is_zero() {
        let geom = GridGeometry::new(4);
        let div = StaggeredField::zeros(geom).divergence();
        assert!(div.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_single_face_splits_signs() {
        let geom = GridGeometry::new(2);
        let h = geom.h();
        let mut v = StaggeredField::zeros(geom);
        v.set_vx(1, 0, 1.0);
        let div = v.divergence();
        // face (1,0) is the right face of cell (0,0) and left face of (1,0)
        assert_eq!(div.get(0, 0), 1.0 / h);
        assert_eq!(div.get(1, 0), -1.0 / h);
        assert_eq!(div.get(0, 1), 0.0);
        assert_eq!(div.get(1, 1), 0.0);
    }

    #[test]
    fn divergence_sums_to_zero() {
        let mut rng = StdRng::seed_from_u64(7);
        let geom = GridGeometry::new(8);
        for _ in 0..20 {
            let v = random_admissible(geom, &mut rng);
            let total = v.divergence().sum();
            assert!(total.abs() <= 1e-12 * v.norm().max(1.0), "sum {total}");
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let geom = GridGeometry::new(5);
        let u = CellField::from_values(geom, vec![3.25; 25]);
        let g = u.gradient();
        assert!(g.vx().iter().all(|&v| v == 0.0));
        assert!(g.vy().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_affine_is_unit() {
        let geom = GridGeometry::new(6);
        let m = geom.m();
        let mut u = CellField::zeros(geom);
        for i in 0..m {
            for j in 0..m {
                u.set(i, j, geom.cell_center(i, j)[0]);
            }
        }
        let g = u.gradient();
        for i in 1..m {
            for j in 0..m {
                assert!((g.vx_at(i, j) - 1.0).abs() < 1e-13);
            }
        }
        assert!(g.vy().iter().all(|&v| v.abs() < 1e-13));
        assert!(g.boundary_is_zero());
    }

    #[test]
    fn gradient_divergence_adjointness() {
        let mut rng = StdRng::seed_from_u64(1);
        let geom = GridGeometry::new(8);
        for _ in 0..20 {
            let u = random_cells(geom, &mut rng);
            let v = random_admissible(geom, &mut rng);
            let lhs = u.gradient().dot(&v);
            let rhs = u.dot(&v.divergence());
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs + rhs).abs() <= 1e-12 * scale, "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn operators_are_linear() {
        let mut rng = StdRng::seed_from_u64(3);
        let geom = GridGeometry::new(6);
        let a = random_admissible(geom, &mut rng);
        let b = random_admissible(geom, &mut rng);
        let mut combo = a.clone();
        combo.scale(2.5);
        combo.add_scaled(-1.75, &b);

        let mut expect = a.divergence();
        expect.values_mut().iter_mut().for_each(|v| *v *= 2.5);
        expect.add_scaled(-1.75, &b.divergence());
        let got = combo.divergence();
        for (x, y) in got.values().iter().zip(expect.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_averages_face_pairs() {
        let geom = GridGeometry::new(2);
        let mut v = StaggeredField::zeros(geom);
        v.set_vx(0, 0, 0.0);
        v.set_vx(1, 0, 2.0);
        let hat = v.interpolate_to_centers();
        assert_eq!(hat.xs[0], 1.0);

        // constant component, boundary invariant deliberately ignored
        let m = geom.m();
        let c = 0.7;
        let vx = vec![c; (m + 1) * m];
        let vy = vec![0.0; m * (m + 1)];
        let v = StaggeredField::from_components(geom, vx, vy);
        let hat = v.interpolate_to_centers();
        assert!(hat.xs.iter().all(|&x| (x - c).abs() < 1e-15));
    }

    #[test]
    fn face_gradient_energy_on_constant_and_affine() {
        let geom = GridGeometry::new(4);
        let m = geom.m();
        let h = geom.h();
        assert_eq!(face_gradient_energy(&vec![1.0; (m + 1) * m], m + 1, m, h), 0.0);

        // vx = x-coordinate of its face: each x-direction difference is
        // h, y-direction differences vanish
        let mut vx = vec![0.0; (m + 1) * m];
        for i in 0..=m {
            for j in 0..m {
                vx[i * m + j] = -1.0 + i as f64 * h;
            }
        }
        let e = face_gradient_energy(&vx, m + 1, m, h);
        let x_diffs = (m * m) as f64;
        assert!((e - x_diffs).abs() < 1e-12, "e {e} expected {x_diffs}");
    }

    #[test]
    fn face_gradient_energy_matches_naive_resummation() {
        let mut rng = StdRng::seed_from_u64(11);
        let geom = GridGeometry::new(6);
        let m = geom.m();
        let h = geom.h();
        let vx: Vec<f64> = (0..(m + 1) * m).map(|_| rng.gen_range(-2.0..2.0)).collect();

        // independent re-summation over a nested representation
        let grid: Vec<Vec<f64>> = (0..m + 1).map(|i| vx[i * m..(i + 1) * m].to_vec()).collect();
        let mut naive = 0.0;
        for p in 0..=m {
            for q in 0..m {
                if p < m {
                    let d = (grid[p + 1][q] - grid[p][q]) / h;
                    naive += d * d;
                }
                if q + 1 < m {
                    let d = (grid[p][q + 1] - grid[p][q]) / h;
                    naive += d * d;
                }
            }
        }
        let got = face_gradient_energy(&vx, m + 1, m, h);
        assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn kahan_sum_handles_cancellation() {
        let vals = vec![1.0e16, 1.0, -1.0e16, 1.0];
        assert_eq!(kahan_sum(vals), 2.0);
    }
}
