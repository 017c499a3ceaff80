//! Fourier-space machinery on the unit torus [0,1]^3.
//!
//! The Fourier convention is integer wavenumbers k in [-n/2, n/2)^3 with
//! 2*pi factors carried by the differential multipliers: d/dx_j maps mode
//! k to 2*pi*i*k_j, the Laplacian to -4*pi^2*|k|^2, and the Gaussian
//! mollifier J_eta to exp(-eta*|k|^2) (no 2*pi in the mollifier exponent).
//!
//! Odd-derivative multipliers (gradient, divergence) zero the Nyquist
//! planes k_j = -n/2: a real field has no consistent odd-symmetric image
//! there, and the 2/3-rule dealiasing keeps dynamics well inside that
//! band anyway.

mod fft;
mod field;

pub use field::{inner, ScalarField, VectorField};

use crate::error::Error;
use fft::{give_buf, take_buf, Fft3};
use rustfft::num_complex::Complex;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Discretization of the unit torus: n points per dimension, cached FFT
/// plans, integer wavenumber table, and the 2/3-rule dealias mask.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    fft: Fft3,
    wavenumbers_1d: Vec<i64>,
    keep_1d: Vec<bool>,
}

impl Grid {
    /// Requires n even and >= 8; the grid is isotropic by construction.
    pub fn new(n: usize) -> Result<Self, Error> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::GridSize { n });
        }
        let wavenumbers_1d: Vec<i64> = (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as i64
                } else {
                    j as i64 - n as i64
                }
            })
            .collect();
        let keep_1d = wavenumbers_1d
            .iter()
            .map(|&k| 3 * k.unsigned_abs() as usize <= n)
            .collect();
        Ok(Grid {
            n,
            fft: Fft3::new(n),
            wavenumbers_1d,
            keep_1d,
        })
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of grid points / Fourier modes.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer wavenumber of the j-th index along one axis.
    pub fn wavenumber(&self, index: usize) -> i64 {
        self.wavenumbers_1d[index]
    }

    /// True iff the mode at (ix, iy, iz) survives the 2/3 rule.
    pub fn dealias_keep(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.keep_1d[ix] && self.keep_1d[iy] && self.keep_1d[iz]
    }

    /// Flat index of the mode with integer wavenumber k (components in
    /// [-n/2, n/2)).
    pub fn mode_index(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let wrap = |kj: i64| ((kj % n) + n) % n;
        (wrap(k[0]) + n * (wrap(k[1]) + n * wrap(k[2]))) as usize
    }
}

/// Forward transform to the full complex mode cube (unnormalized DFT).
pub fn to_modes(f: &ScalarField, grid: &Grid) -> Vec<Complex<f64>> {
    debug_assert_eq!(f.len(), grid.len());
    grid.fft.forward(f.values())
}

/// Inverse of [`to_modes`], including the 1/n^3 normalization.
pub fn from_modes(modes: Vec<Complex<f64>>, grid: &Grid) -> ScalarField {
    ScalarField::from_values(grid.fft.inverse(modes))
}

/// Applies a per-mode multiplier in spectral space.
fn apply_multiplier(
    f: &ScalarField,
    grid: &Grid,
    mul: impl Fn(i64, i64, i64) -> f64,
) -> ScalarField {
    let mut modes = to_modes(f, grid);
    scale_modes(&mut modes, grid, mul);
    from_modes(modes, grid)
}

fn scale_modes(
    modes: &mut [Complex<f64>],
    grid: &Grid,
    mul: impl Fn(i64, i64, i64) -> f64,
) {
    let n = grid.n;
    let mut idx = 0;
    for iz in 0..n {
        let kz = grid.wavenumbers_1d[iz];
        for iy in 0..n {
            let ky = grid.wavenumbers_1d[iy];
            for ix in 0..n {
                let kx = grid.wavenumbers_1d[ix];
                modes[idx] *= mul(kx, ky, kz);
                idx += 1;
            }
        }
    }
}

/// Derivative multiplier along one axis: 2*pi*i*k_j, zeroed on the
/// Nyquist plane.
fn derivative_modes(modes: &[Complex<f64>], grid: &Grid, axis: usize) -> Vec<Complex<f64>> {
    let n = grid.n;
    let nyquist = -(n as i64) / 2;
    let mut out = take_buf(modes.len());
    let mut idx = 0;
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let k = [
                    grid.wavenumbers_1d[ix],
                    grid.wavenumbers_1d[iy],
                    grid.wavenumbers_1d[iz],
                ][axis];
                if k != nyquist {
                    // i * (2 pi k) * z
                    let w = TWO_PI * k as f64;
                    let z = modes[idx];
                    out[idx] = Complex::new(-w * z.im, w * z.re);
                } else {
                    out[idx] = Complex::new(0.0, 0.0);
                }
                idx += 1;
            }
        }
    }
    out
}

/// Spectral gradient of the trigonometric interpolant.
pub fn gradient(f: &ScalarField, grid: &Grid) -> VectorField {
    let modes = to_modes(f, grid);
    let gx = from_modes(derivative_modes(&modes, grid, 0), grid);
    let gy = from_modes(derivative_modes(&modes, grid, 1), grid);
    let gz = from_modes(derivative_modes(&modes, grid, 2), grid);
    give_buf(modes);
    VectorField::new(gx, gy, gz)
}

/// Spectral divergence; exactly mean-free (the k=0 coefficient is zero).
pub fn divergence(v: &VectorField, grid: &Grid) -> ScalarField {
    let m0 = to_modes(v.component(0), grid);
    let mut acc = derivative_modes(&m0, grid, 0);
    give_buf(m0);
    for axis in 1..3 {
        let mj = to_modes(v.component(axis), grid);
        let part = derivative_modes(&mj, grid, axis);
        give_buf(mj);
        for (a, b) in acc.iter_mut().zip(&part) {
            *a += b;
        }
        give_buf(part);
    }
    from_modes(acc, grid)
}

/// Spectral Laplacian: multiplier -4*pi^2*|k|^2.
pub fn laplacian(f: &ScalarField, grid: &Grid) -> ScalarField {
    apply_multiplier(f, grid, |kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        -TWO_PI * TWO_PI * k2
    })
}

/// Gaussian mollifier J_eta: mode k scaled by exp(-eta*|k|^2). The k=0
/// multiplier is exactly 1, so the mean is preserved; eta = 0 is the
/// identity.
pub fn mollify(f: &ScalarField, eta: f64, grid: &Grid) -> ScalarField {
    assert!(eta >= 0.0, "mollification parameter must be nonnegative");
    if eta == 0.0 {
        return f.clone();
    }
    apply_multiplier(f, grid, |kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        (-eta * k2).exp()
    })
}

/// Componentwise mollification of a vector field.
pub fn mollify_vector(v: &VectorField, eta: f64, grid: &Grid) -> VectorField {
    if eta == 0.0 {
        return v.clone();
    }
    VectorField::new(
        mollify(v.component(0), eta, grid),
        mollify(v.component(1), eta, grid),
        mollify(v.component(2), eta, grid),
    )
}

/// 2/3-rule dealiasing: zeroes every mode with any |k_j| > n/3.
pub fn dealias(f: &ScalarField, grid: &Grid) -> ScalarField {
    let mut modes = to_modes(f, grid);
    dealias_modes(&mut modes, grid);
    from_modes(modes, grid)
}

/// Fused divergence + 2/3-rule mask: identical to
/// `dealias(divergence(v))` in one spectral pass per component.
pub(crate) fn divergence_masked(v: &VectorField, grid: &Grid) -> ScalarField {
    let m0 = to_modes(v.component(0), grid);
    let mut acc = derivative_modes(&m0, grid, 0);
    give_buf(m0);
    for axis in 1..3 {
        let mj = to_modes(v.component(axis), grid);
        let part = derivative_modes(&mj, grid, axis);
        give_buf(mj);
        for (a, b) in acc.iter_mut().zip(&part) {
            *a += b;
        }
        give_buf(part);
    }
    dealias_modes(&mut acc, grid);
    from_modes(acc, grid)
}

/// Fused electrostatics pipeline: solves
/// -epsilon*Laplacian(psi) = rho in the zero-mean gauge and returns
/// (psi, grad(J_eta J_eta psi)) from a single forward transform of rho.
/// Identical to composing `poisson_solve`, two `mollify` passes, and
/// `gradient`.
pub(crate) fn poisson_with_mollified_gradient(
    rho: &ScalarField,
    epsilon: f64,
    eta: f64,
    grid: &Grid,
) -> Result<(ScalarField, VectorField), Error> {
    let mean = rho.mean();
    let tol = poisson_mean_tol(rho);
    if mean.abs() > tol {
        return Err(Error::NonNeutralSource { mean, tol });
    }
    let mut psi_modes = to_modes(rho, grid);
    scale_modes(&mut psi_modes, grid, |kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / (epsilon * TWO_PI * TWO_PI * k2)
        }
    });
    let mut grads = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut d = derivative_modes(&psi_modes, grid, axis);
        if eta > 0.0 {
            scale_modes(&mut d, grid, |kx, ky, kz| {
                let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                (-2.0 * eta * k2).exp()
            });
        }
        grads.push(from_modes(d, grid));
    }
    let psi = from_modes(psi_modes, grid);
    let gz = grads.pop().expect("three components");
    let gy = grads.pop().expect("three components");
    let gx = grads.pop().expect("three components");
    Ok((psi, VectorField::new(gx, gy, gz)))
}

/// Mode-space workspace for assembling a projected force field with one
/// inverse transform per component: accumulate derivative fluxes and
/// direct forces, then apply mask + Leray projection + mean pinning in a
/// single pass.
pub(crate) struct ForceAssembly<'g> {
    grid: &'g Grid,
    components: [Vec<Complex<f64>>; 3],
}

impl<'g> ForceAssembly<'g> {
    pub(crate) fn new(grid: &'g Grid) -> Self {
        let zero = || {
            let mut b = take_buf(grid.len());
            for z in b.iter_mut() {
                *z = Complex::new(0.0, 0.0);
            }
            b
        };
        ForceAssembly {
            grid,
            components: [zero(), zero(), zero()],
        }
    }

    /// components[i] += sum_j d_j(flux_j), the divergence of a flux.
    pub(crate) fn add_flux_divergence(&mut self, component: usize, flux: &VectorField) {
        for axis in 0..3 {
            let m = to_modes(flux.component(axis), self.grid);
            let d = derivative_modes(&m, self.grid, axis);
            give_buf(m);
            for (a, b) in self.components[component].iter_mut().zip(&d) {
                *a += b;
            }
            give_buf(d);
        }
    }

    /// components[i] += factor * J_eta f.
    pub(crate) fn add_mollified(
        &mut self,
        component: usize,
        f: &ScalarField,
        eta: f64,
        factor: f64,
    ) {
        let mut m = to_modes(f, self.grid);
        scale_modes(&mut m, self.grid, |kx, ky, kz| {
            let k2 = (kx * kx + ky * ky + kz * kz) as f64;
            factor * (-eta * k2).exp()
        });
        for (a, b) in self.components[component].iter_mut().zip(&m) {
            *a += b;
        }
        give_buf(m);
    }

    /// Dealias, Leray-project, pin the k=0 mode to zero, and transform
    /// back. Matches `dealias` + `leray_project` + mean subtraction.
    pub(crate) fn project(self) -> VectorField {
        let grid = self.grid;
        let n = grid.n;
        let nyquist = -(n as i64) / 2;
        let mut vm = self.components;
        let mut idx = 0;
        for iz in 0..n {
            let kzi = grid.wavenumbers_1d[iz];
            for iy in 0..n {
                let kyi = grid.wavenumbers_1d[iy];
                for ix in 0..n {
                    let kxi = grid.wavenumbers_1d[ix];
                    let keep = grid.keep_1d[ix]
                        && grid.keep_1d[iy]
                        && grid.keep_1d[iz]
                        && kxi != nyquist
                        && kyi != nyquist
                        && kzi != nyquist;
                    if !keep || (kxi == 0 && kyi == 0 && kzi == 0) {
                        vm[0][idx] = Complex::new(0.0, 0.0);
                        vm[1][idx] = Complex::new(0.0, 0.0);
                        vm[2][idx] = Complex::new(0.0, 0.0);
                    } else {
                        let (kx, ky, kz) = (kxi as f64, kyi as f64, kzi as f64);
                        let k2 = kx * kx + ky * ky + kz * kz;
                        let dot = kx * vm[0][idx] + ky * vm[1][idx] + kz * vm[2][idx];
                        let s = dot / k2;
                        vm[0][idx] -= kx * s;
                        vm[1][idx] -= ky * s;
                        vm[2][idx] -= kz * s;
                    }
                    idx += 1;
                }
            }
        }
        let [m0, m1, m2] = vm;
        VectorField::new(
            from_modes(m0, grid),
            from_modes(m1, grid),
            from_modes(m2, grid),
        )
    }
}

fn dealias_modes(modes: &mut [Complex<f64>], grid: &Grid) {
    let n = grid.n;
    let mut idx = 0;
    for iz in 0..n {
        for iy in 0..n {
            let keep_yz = grid.keep_1d[iy] && grid.keep_1d[iz];
            for ix in 0..n {
                if !(keep_yz && grid.keep_1d[ix]) {
                    modes[idx] = Complex::new(0.0, 0.0);
                }
                idx += 1;
            }
        }
    }
}

/// Default mean tolerance for the Poisson compatibility check.
pub fn poisson_mean_tol(rho: &ScalarField) -> f64 {
    1e-10 * rho.l2_norm() + 1e-14
}

/// Solves -epsilon * Laplacian(psi) = rho in the zero-mean gauge.
///
/// Fails with [`Error::NonNeutralSource`] when |mean(rho)| exceeds the
/// compatibility tolerance: a non-neutral source has no periodic solution.
pub fn poisson_solve(rho: &ScalarField, epsilon: f64, grid: &Grid) -> Result<ScalarField, Error> {
    assert!(epsilon > 0.0, "permittivity must be positive");
    let mean = rho.mean();
    let tol = poisson_mean_tol(rho);
    if mean.abs() > tol {
        return Err(Error::NonNeutralSource { mean, tol });
    }
    let mut modes = to_modes(rho, grid);
    scale_modes(&mut modes, grid, |kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        if k2 == 0.0 {
            0.0
        } else {
            1.0 / (epsilon * TWO_PI * TWO_PI * k2)
        }
    });
    Ok(from_modes(modes, grid))
}

/// Leray projection P v = v - grad(inv_laplacian(div v)).
///
/// Annihilates gradient fields, leaves divergence-free fields unchanged,
/// and preserves the k=0 (mean) mode. Nyquist planes are zeroed: the
/// single stored bin there cannot keep Hermitian symmetry under the
/// off-diagonal projection entries, and masking them is what keeps P
/// idempotent on real data.
pub fn leray_project(v: &VectorField, grid: &Grid) -> VectorField {
    let n = grid.n;
    let nyquist = -(n as i64) / 2;
    let mut vm = [
        to_modes(v.component(0), grid),
        to_modes(v.component(1), grid),
        to_modes(v.component(2), grid),
    ];
    let mut idx = 0;
    for iz in 0..n {
        let kzi = grid.wavenumbers_1d[iz];
        for iy in 0..n {
            let kyi = grid.wavenumbers_1d[iy];
            for ix in 0..n {
                let kxi = grid.wavenumbers_1d[ix];
                if kxi == nyquist || kyi == nyquist || kzi == nyquist {
                    vm[0][idx] = Complex::new(0.0, 0.0);
                    vm[1][idx] = Complex::new(0.0, 0.0);
                    vm[2][idx] = Complex::new(0.0, 0.0);
                } else {
                    let (kx, ky, kz) = (kxi as f64, kyi as f64, kzi as f64);
                    let k2 = kx * kx + ky * ky + kz * kz;
                    if k2 > 0.0 {
                        let dot = kx * vm[0][idx] + ky * vm[1][idx] + kz * vm[2][idx];
                        let s = dot / k2;
                        vm[0][idx] -= kx * s;
                        vm[1][idx] -= ky * s;
                        vm[2][idx] -= kz * s;
                    }
                }
                idx += 1;
            }
        }
    }
    let [m0, m1, m2] = vm;
    VectorField::new(
        from_modes(m0, grid),
        from_modes(m1, grid),
        from_modes(m2, grid),
    )
}

/// Exact heat propagator: mode k scaled by exp(-coeff*4*pi^2*|k|^2*dt).
/// Preserves the mean and never increases the L^2 norm.
pub fn diffuse_exact(f: &ScalarField, coeff: f64, dt: f64, grid: &Grid) -> ScalarField {
    assert!(coeff > 0.0 && dt > 0.0, "diffusion coefficient and dt must be positive");
    apply_multiplier(f, grid, |kx, ky, kz| {
        let k2 = (kx * kx + ky * ky + kz * kz) as f64;
        (-coeff * TWO_PI * TWO_PI * k2 * dt).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const PI: f64 = std::f64::consts::PI;

    fn grid16() -> Grid {
        Grid::new(16).unwrap()
    }

    fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        let mut f = ScalarField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }

    /// Random field with no energy beyond the 2/3 band, so that composed
    /// derivative identities are exact.
    fn random_smooth_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        dealias(&random_field(grid, rng), grid)
    }

    fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_construction_rules() {
        assert!(Grid::new(16).is_ok());
        assert!(matches!(Grid::new(7), Err(Error::GridSize { .. })));
        assert!(matches!(Grid::new(6), Err(Error::GridSize { .. })));
        assert!(matches!(Grid::new(9), Err(Error::GridSize { .. })));
        let g = grid16();
        assert_eq!(g.len(), 16 * 16 * 16);
        assert_eq!(g.wavenumber(0), 0);
        assert_eq!(g.wavenumber(7), 7);
        assert_eq!(g.wavenumber(8), -8);
        assert_eq!(g.wavenumber(15), -1);
        // k=0 exists and is unmasked.
        assert!(g.dealias_keep(0, 0, 0));
    }

    #[test]
    fn round_trip_is_exact() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&g, &mut rng);
        let back = from_modes(to_modes(&f, &g), &g);
        assert!(max_abs_diff(&f, &back) <= 1e-13 * f.max_abs().max(1.0));
    }

    #[test]
    fn gradient_of_single_mode() {
        let g = grid16();
        let f = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
        let grad = gradient(&f, &g);
        let expect = ScalarField::from_fn(&g, |x, _, _| TWO_PI * (TWO_PI * x).cos());
        assert!(max_abs_diff(grad.component(0), &expect) < 1e-12);
        assert!(grad.component(1).max_abs() < 1e-13);
        assert!(grad.component(2).max_abs() < 1e-13);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid16();
        let f = ScalarField::constant(&g, 3.25);
        let grad = gradient(&f, &g);
        for j in 0..3 {
            assert!(grad.component(j).max_abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_components_have_zero_mean() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&g, &mut rng);
        let grad = gradient(&f, &g);
        for j in 0..3 {
            assert!(grad.component(j).mean().abs() <= 1e-13);
        }
    }

    #[test]
    fn divergence_examples() {
        let g = grid16();
        let v = VectorField::new(
            ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin()),
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
        );
        let d = divergence(&v, &g);
        let expect = ScalarField::from_fn(&g, |x, _, _| TWO_PI * (TWO_PI * x).cos());
        assert!(max_abs_diff(&d, &expect) < 1e-12);

        let c = VectorField::new(
            ScalarField::constant(&g, 1.0),
            ScalarField::constant(&g, -2.0),
            ScalarField::constant(&g, 0.5),
        );
        assert!(divergence(&c, &g).max_abs() < 1e-13);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_smooth_field(&g, &mut rng);
        let lhs = divergence(&gradient(&f, &g), &g);
        let rhs = laplacian(&f, &g);
        let scale = rhs.l2_norm();
        assert!(lhs.sub(&rhs).l2_norm() <= 1e-12 * scale);
    }

    #[test]
    fn laplacian_eigenfunctions() {
        let g = grid16();
        let f = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
        let lap = laplacian(&f, &g);
        let mut expect = f.clone();
        expect.scale(-4.0 * PI * PI);
        assert!(max_abs_diff(&lap, &expect) < 1e-10);

        assert!(laplacian(&ScalarField::constant(&g, 2.0), &g).max_abs() < 1e-12);

        let f2 = ScalarField::from_fn(&g, |x, y, _| (TWO_PI * x).sin() * (2.0 * TWO_PI * y).sin());
        let lap2 = laplacian(&f2, &g);
        let mut expect2 = f2.clone();
        expect2.scale(-20.0 * PI * PI);
        assert!(max_abs_diff(&lap2, &expect2) < 1e-9);
    }

    #[test]
    fn mollify_scales_single_mode() {
        let g = grid16();
        let f = ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.5 * (TWO_PI * x).sin());
        let m = mollify(&f, 0.1, &g);
        let factor = (-0.1f64).exp(); // 0.9048374180359595
        let expect =
            ScalarField::from_fn(&g, |x, _, _| 1.0 + 0.5 * factor * (TWO_PI * x).sin());
        assert!(max_abs_diff(&m, &expect) < 1e-13);
    }

    #[test]
    fn mollify_eta_zero_is_identity_and_mean_preserved() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field(&g, &mut rng);
        assert_eq!(mollify(&f, 0.0, &g), f);
        let m = mollify(&f, 0.3, &g);
        assert!((m.mean() - f.mean()).abs() <= 1e-14);
    }

    #[test]
    fn mollify_semigroup() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&g, &mut rng);
        let a = mollify(&mollify(&f, 0.07, &g), 0.13, &g);
        let b = mollify(&f, 0.2, &g);
        assert!(max_abs_diff(&a, &b) <= 1e-13);
    }

    #[test]
    fn mollify_is_self_adjoint() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let f = random_field(&g, &mut rng);
            let h = random_field(&g, &mut rng);
            let lhs = inner(&mollify(&f, 0.12, &g), &h);
            let rhs = inner(&f, &mollify(&h, 0.12, &g));
            assert!((lhs - rhs).abs() <= 1e-12 * f.l2_norm() * h.l2_norm());
        }
    }

    #[test]
    fn dealias_mask_boundaries() {
        let g = Grid::new(32).unwrap();
        // Build fields concentrated on a single mode and check survival.
        let keep = ScalarField::from_fn(&g, |x, _, _| (3.0 * TWO_PI * x).cos());
        let kept = dealias(&keep, &g);
        assert!(max_abs_diff(&kept, &keep) < 1e-13);

        let kill = ScalarField::from_fn(&g, |x, _, _| (12.0 * TWO_PI * x).cos());
        let killed = dealias(&kill, &g);
        assert!(killed.max_abs() < 1e-13);

        let c = ScalarField::constant(&g, 7.5);
        assert!(max_abs_diff(&dealias(&c, &g), &c) < 1e-13);

        // |k| = 10 is the last surviving mode at n=32 (3*10 <= 32 < 3*11).
        let edge = ScalarField::from_fn(&g, |x, _, _| (10.0 * TWO_PI * x).cos());
        assert!(max_abs_diff(&dealias(&edge, &g), &edge) < 1e-13);
        let over = ScalarField::from_fn(&g, |x, _, _| (11.0 * TWO_PI * x).cos());
        assert!(dealias(&over, &g).max_abs() < 1e-13);
    }

    #[test]
    fn fused_pipelines_match_composed_operations() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let v = VectorField::new(
            random_field(&g, &mut rng),
            random_field(&g, &mut rng),
            random_field(&g, &mut rng),
        );
        let fused = divergence_masked(&v, &g);
        let composed = dealias(&divergence(&v, &g), &g);
        assert!(max_abs_diff(&fused, &composed) <= 1e-12);

        let mut rho = random_field(&g, &mut rng);
        let m = rho.mean();
        rho.add_constant(-m);
        let eta = 0.07;
        let eps = 1.3;
        let (psi, grad_moll) = poisson_with_mollified_gradient(&rho, eps, eta, &g).unwrap();
        let psi_ref = poisson_solve(&rho, eps, &g).unwrap();
        assert!(max_abs_diff(&psi, &psi_ref) <= 1e-13);
        let grad_ref = gradient(&mollify(&mollify(&psi_ref, eta, &g), eta, &g), &g);
        for j in 0..3 {
            assert!(max_abs_diff(grad_moll.component(j), grad_ref.component(j)) <= 1e-12);
        }
    }

    #[test]
    fn force_assembly_matches_composed_projection() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let flux = VectorField::new(
            random_field(&g, &mut rng),
            random_field(&g, &mut rng),
            random_field(&g, &mut rng),
        );
        let direct = random_field(&g, &mut rng);
        let eta = 0.11;

        let mut asm = ForceAssembly::new(&g);
        asm.add_flux_divergence(0, &flux);
        asm.add_mollified(2, &direct, eta, -1.0);
        let fused = asm.project();

        let mut force = VectorField::zeros(&g);
        *force.component_mut(0) = divergence(&flux, &g);
        force.component_mut(2).add_scaled(&mollify(&direct, eta, &g), -1.0);
        let mut composed = leray_project(
            &VectorField::new(
                dealias(force.component(0), &g),
                dealias(force.component(1), &g),
                dealias(force.component(2), &g),
            ),
            &g,
        );
        for j in 0..3 {
            let m = composed.component(j).mean();
            composed.component_mut(j).add_constant(-m);
        }
        for j in 0..3 {
            assert!(max_abs_diff(fused.component(j), composed.component(j)) <= 1e-12);
        }
    }

    #[test]
    fn poisson_single_mode_and_residual() {
        let g = grid16();
        let rho = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
        let psi = poisson_solve(&rho, 1.0, &g).unwrap();
        let expect = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin() / (4.0 * PI * PI));
        assert!(max_abs_diff(&psi, &expect) < 1e-13);

        let zero = ScalarField::zeros(&g);
        assert!(poisson_solve(&zero, 1.0, &g).unwrap().max_abs() == 0.0);

        // Random mean-free source: apply -eps*Laplacian and recover rho.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut src = random_field(&g, &mut rng);
        let m = src.mean();
        src.add_constant(-m);
        let eps = 2.5;
        let sol = poisson_solve(&src, eps, &g).unwrap();
        let mut recovered = laplacian(&sol, &g);
        recovered.scale(-eps);
        assert!(recovered.sub(&src).l2_norm() <= 1e-12 * src.l2_norm());
    }

    #[test]
    fn poisson_rejects_non_neutral_source() {
        let g = grid16();
        let rho = ScalarField::constant(&g, 0.2);
        match poisson_solve(&rho, 1.0, &g) {
            Err(Error::NonNeutralSource { mean, .. }) => assert!((mean - 0.2).abs() < 1e-12),
            other => panic!("expected NonNeutralSource, got {other:?}"),
        }
    }

    #[test]
    fn leray_annihilates_gradients_and_keeps_solenoidal() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_smooth_field(&g, &mut rng);
        let grad = gradient(&f, &g);
        let projected = leray_project(&grad, &g);
        assert!(projected.l2_norm() <= 1e-12 * grad.l2_norm().max(1.0));

        let solenoidal = VectorField::new(
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
            ScalarField::from_fn(&g, |x, _, _| 0.1 * (TWO_PI * x).sin()),
        );
        let kept = leray_project(&solenoidal, &g);
        assert!(max_abs_diff(kept.component(2), solenoidal.component(2)) < 1e-13);

        // Buoyancy-like field along its own coordinate is a pure gradient.
        let grad_like = VectorField::new(
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
            ScalarField::from_fn(&g, |_, _, z| 0.1 * (TWO_PI * z).sin()),
        );
        let annihilated = leray_project(&grad_like, &g);
        assert!(annihilated.l2_norm() <= 1e-13);
    }

    #[test]
    fn leray_is_idempotent_and_divergence_free() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = VectorField::new(
            random_field(&g, &mut rng),
            random_field(&g, &mut rng),
            random_field(&g, &mut rng),
        );
        let p1 = leray_project(&v, &g);
        let p2 = leray_project(&p1, &g);
        let scale = v.l2_norm();
        let diff: f64 = (0..3)
            .map(|j| p1.component(j).sub(p2.component(j)).l2_norm())
            .sum();
        assert!(diff <= 1e-12 * scale);
        assert!(divergence(&p1, &g).l2_norm() <= 1e-12 * scale);
    }

    #[test]
    fn leray_preserves_mean_mode() {
        let g = grid16();
        let mut v = VectorField::zeros(&g);
        v.component_mut(0).add_constant(0.7);
        let p = leray_project(&v, &g);
        assert!((p.component(0).mean() - 0.7).abs() < 1e-13);
    }

    #[test]
    fn diffuse_exact_factors() {
        let g = grid16();
        let f = ScalarField::from_fn(&g, |x, _, _| (TWO_PI * x).sin());
        let d = diffuse_exact(&f, 0.1, 0.05, &g);
        let factor = 0.8208687174155399; // exp(-0.1*0.05*4*pi^2)
        let mut expect = f.clone();
        expect.scale(factor);
        assert!(max_abs_diff(&d, &expect) < 1e-13);

        let c = ScalarField::constant(&g, 4.2);
        assert!(max_abs_diff(&diffuse_exact(&c, 3.0, 10.0, &g), &c) < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let r = random_field(&g, &mut rng);
            assert!(diffuse_exact(&r, 0.7, 0.01, &g).l2_norm() <= r.l2_norm() * (1.0 + 1e-14));
        }
    }
}
