//! Cached 3-d complex FFT over the n x n x n periodic grid.
//!
//! Data layout is x-fastest: `idx = ix + n*(iy + n*iz)`. Strided axes are
//! handled by cache-oblivious transposes so every 1-d pass runs batched
//! over contiguous lines. Work buffers come from a thread-local pool and
//! rustfft runs with explicit scratch: the hot path performs no
//! allocations after warmup. The inverse applies the 1/n^3 normalization
//! so that `inverse(forward(f)) == f` up to rounding.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static POOL: RefCell<Vec<Vec<Complex<f64>>>> = const { RefCell::new(Vec::new()) };
}

/// Grabs a buffer of exactly `len` entries. Contents are unspecified;
/// callers must fully overwrite before reading.
pub(crate) fn take_buf(len: usize) -> Vec<Complex<f64>> {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        for i in 0..pool.len() {
            if pool[i].len() == len {
                return pool.swap_remove(i);
            }
        }
        vec![Complex::new(0.0, 0.0); len]
    })
}

pub(crate) fn give_buf(buf: Vec<Complex<f64>>) {
    POOL.with(|p| {
        let mut pool = p.borrow_mut();
        if pool.len() < 16 {
            pool.push(buf);
        }
    });
}

#[derive(Clone)]
pub(crate) struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Forward transform of real samples into the full complex mode cube.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf = take_buf(values.len());
        for (b, &v) in buf.iter_mut().zip(values) {
            *b = Complex::new(v, 0.0);
        }
        self.transform_axes(&mut buf, &self.forward);
        buf
    }

    /// Inverse transform back to physical space, discarding the O(eps)
    /// imaginary residue left by rounding. The mode buffer returns to the
    /// pool.
    pub(crate) fn inverse(&self, mut modes: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform_axes(&mut modes, &self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        let out = modes.iter().map(|c| c.re * scale).collect();
        give_buf(modes);
        out
    }

    fn transform_axes(&self, buf: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let n2 = n * n;
        debug_assert_eq!(buf.len(), n * n2);
        let mut scratch = take_buf(plan.get_inplace_scratch_len().max(1));

        // Axis x: lines are contiguous; rustfft batches over chunks of n.
        plan.process_with_scratch(buf, &mut scratch);

        // Axis y: transpose each z-slab in-plane, batch-transform the now
        // contiguous y-lines, transpose back.
        let mut plane = take_buf(n2);
        for slab in buf.chunks_exact_mut(n2) {
            transpose::transpose(slab, &mut plane, n, n);
            plan.process_with_scratch(&mut plane, &mut scratch);
            transpose::transpose(&plane, slab, n, n);
        }
        give_buf(plane);

        // Axis z: one full transpose makes z the fastest axis.
        let mut cube = take_buf(buf.len());
        transpose::transpose(buf, &mut cube, n2, n);
        plan.process_with_scratch(&mut cube, &mut scratch);
        transpose::transpose(&cube, buf, n, n2);
        give_buf(cube);
        give_buf(scratch);
    }
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}
