//! Uniform torus grids and the sampled fields that live on them.
//!
//! Nodes are stored row-major with axis 1 fastest: node `(j1, j2, j3)` sits at
//! flat index `j1 + n*j2 + n*n*j3` and at coordinate `(j1, j2, j3) / n`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) || n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid { dim, n });
        }
        Ok(Self { dim, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^d`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Multi-index of a flat node index (unused axes are zero).
    #[inline]
    pub fn multi_index(&self, index: usize) -> [usize; 3] {
        let n = self.n;
        let mut j = [0usize; 3];
        let mut rest = index;
        for slot in j.iter_mut().take(self.dim) {
            *slot = rest % n;
            rest /= n;
        }
        j
    }

    #[inline]
    pub fn flat_index(&self, j: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            2 => j[0] + n * j[1],
            _ => j[0] + n * (j[1] + n * j[2]),
        }
    }

    /// Coordinate of a node in `[0,1)^d`.
    #[inline]
    pub fn coord(&self, index: usize) -> [f64; 3] {
        let j = self.multi_index(index);
        let h = self.spacing();
        [j[0] as f64 * h, j[1] as f64 * h, j[2] as f64 * h]
    }

    /// Signed wavenumber of FFT slot `j`; the Nyquist slot maps to `-n/2`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Wavevector of a flat spectral index.
    #[inline]
    pub fn mode(&self, index: usize) -> [i64; 3] {
        let j = self.multi_index(index);
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumber(j[a]);
        }
        k
    }

    /// Flat spectral index of wavevector `k` (components taken mod n).
    #[inline]
    pub fn mode_index(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let mut j = [0usize; 3];
        for a in 0..self.dim {
            j[a] = k[a].rem_euclid(n) as usize;
        }
        self.flat_index(j)
    }

    /// True if any component of `k` sits on the Nyquist slot.
    #[inline]
    pub fn touches_nyquist(&self, k: [i64; 3]) -> bool {
        let half = (self.n / 2) as i64;
        k[..self.dim].iter().any(|c| c.abs() == half)
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real samples on a torus grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Node average, which is the exact integral of the trigonometric interpolant.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(∫ f^2)^{1/2}` by node-average quadrature.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// `∫ f g` by node-average quadrature.
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.values.len() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Pointwise product (no dealiasing; see [`crate::spectral::dealiased_product`]).
    pub fn pointwise_mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scaled(&self, factor: f64) -> ScalarField {
        self.map(|v| v * factor)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Circular shift by whole grid steps along each axis.
    pub fn shifted(&self, steps: [i64; 3]) -> ScalarField {
        let g = self.grid;
        let n = g.n() as i64;
        let mut values = vec![0.0; g.len()];
        for (i, v) in self.values.iter().enumerate() {
            let j = g.multi_index(i);
            let mut t = [0usize; 3];
            for a in 0..g.dim() {
                t[a] = (j[a] as i64 + steps[a]).rem_euclid(n) as usize;
            }
            values[g.flat_index(t)] = *v;
        }
        ScalarField { grid: g, values }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scaled(rhs)
    }
}

/// Complex samples on a torus grid (wave functions, orbitals).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// `‖ψ‖_{L²}` by node-average quadrature.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn norm_sqr_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// `d` real components on a common grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Format("vector field without components".into()))?
            .grid();
        if components.len() != first.dim() {
            return Err(Error::Format(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                first.dim()
            )));
        }
        for c in &components {
            first.check_same(&c.grid())?;
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    /// Constant vector field (only the first `d` entries of `value` are used).
    pub fn constant(grid: GridSpec, value: [f64; 3]) -> Self {
        Self {
            components: (0..grid.dim())
                .map(|a| ScalarField::constant(grid, value[a]))
                .collect(),
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let samples: Vec<[f64; 3]> = (0..grid.len()).map(|i| f(grid.coord(i))).collect();
        let components = (0..grid.dim())
            .map(|a| ScalarField {
                grid,
                values: samples.iter().map(|s| s[a]).collect(),
            })
            .collect();
        Self { components }
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.components[0].grid()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn component(&self, a: usize) -> &ScalarField {
        &self.components[a]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Value at node `i`.
    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (a, c) in self.components.iter().enumerate() {
            v[a] = c.values()[i];
        }
        v
    }

    /// `max_x |v(x)|` with the Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid().len())
            .map(|i| self.at(i).iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> VectorField {
        VectorField {
            components: self.components.iter().map(|c| c.scaled(factor)).collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.grid().check_same(&other.grid())?;
        Ok(VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.grid().check_same(&other.grid())?;
        Ok(VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Componentwise product with a scalar field (no dealiasing).
    pub fn mul_scalar_field(&self, f: &ScalarField) -> Result<VectorField> {
        Ok(VectorField {
            components: self
                .components
                .iter()
                .map(|c| c.pointwise_mul(f))
                .collect::<Result<_>>()?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(GridSpec::new(2, 7).is_err());
        assert!(GridSpec::new(2, 6).is_err());
        assert!(GridSpec::new(1, 8).is_err());
        assert!(GridSpec::new(4, 8).is_err());
        assert!(GridSpec::new(3, 8).is_ok());
    }

    #[test]
    fn index_layout_is_axis_one_fastest() {
        let g = GridSpec::new(3, 8).unwrap();
        assert_eq!(g.flat_index([1, 0, 0]), 1);
        assert_eq!(g.flat_index([0, 1, 0]), 8);
        assert_eq!(g.flat_index([0, 0, 1]), 64);
        for i in [0, 5, 77, 511] {
            assert_eq!(g.flat_index(g.multi_index(i)), i);
        }
        assert_eq!(g.coord(9), [0.125, 0.125, 0.0]);
    }

    #[test]
    fn wavenumbers_wrap_with_nyquist_negative() {
        let g = GridSpec::new(2, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|j| g.wavenumber(j)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.mode_index([-1, 2, 0]), 7 + 8 * 2);
        assert!(g.touches_nyquist([4, 0, 0]));
    }

    #[test]
    fn shift_is_circular() {
        let g = GridSpec::new(2, 8).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let s = f.shifted([1, 0, 0]);
        assert_eq!(s.values()[1], f.values()[0]);
        assert_eq!(s.values()[0], f.values()[7]);
    }
}
