//! Physical-space field containers and the discrete inner product.
//!
//! Integrals over the unit torus are grid averages (volume 1); `inner`
//! is therefore exact for band-limited integrands.

use super::Grid;

/// Real scalar samples on the grid, x-fastest ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField {
            values: vec![value; grid.len()],
        }
    }

    /// Builds a field from a function of the physical coordinates in [0,1)^3.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let n = grid.n_per_dim();
        let h = grid.spacing();
        let mut values = Vec::with_capacity(grid.len());
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    values.push(f(ix as f64 * h, iy as f64 * h, iz as f64 * h));
                }
            }
        }
        ScalarField { values }
    }

    /// Wraps raw samples; the caller is responsible for the length
    /// matching the grid (n^3, x-fastest).
    pub fn from_values(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// L^2 norm with the unit-volume measure: sqrt(mean(f^2)).
    pub fn l2_norm(&self) -> f64 {
        inner(self, self).sqrt()
    }

    /// L^1 norm with the unit-volume measure: mean(|f|).
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn add_scaled(&mut self, other: &ScalarField, factor: f64) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn add_constant(&mut self, offset: f64) {
        for v in &mut self.values {
            *v += offset;
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.len(), other.len());
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.len(), other.len());
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// L^2 inner product <f, g> = mean(f*g) (domain volume is 1).
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / f.values.len() as f64
}

/// Three scalar components (u1, u2, u3) on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: [ScalarField; 3],
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            components: [
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
            ],
        }
    }

    pub fn new(c0: ScalarField, c1: ScalarField, c2: ScalarField) -> Self {
        debug_assert!(c0.len() == c1.len() && c1.len() == c2.len());
        VectorField {
            components: [c0, c1, c2],
        }
    }

    pub fn component(&self, j: usize) -> &ScalarField {
        &self.components[j]
    }

    pub fn component_mut(&mut self, j: usize) -> &mut ScalarField {
        &mut self.components[j]
    }

    pub fn components(&self) -> &[ScalarField; 3] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField; 3] {
        &mut self.components
    }

    /// L^2 norm over all three components.
    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| inner(c, c))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest pointwise |u_j|, used for the CFL estimate.
    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0f64, |m, c| m.max(c.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }

    pub fn add_scaled(&mut self, other: &VectorField, factor: f64) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.add_scaled(b, factor);
        }
    }
}
