//! Multi-dimensional FFTs on the torus grid, built from 1D `rustfft` plans.
//!
//! Every axis is transformed by gathering its lines into a contiguous batch,
//! so the output for a given input does not depend on the number of threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Direction {
    /// `c(k) = n^{-d} Σ_j f(x_j) e^{-2πi k·x_j}`
    Forward,
    /// `f(x_j) = Σ_k c(k) e^{2πi k·x_j}`
    Inverse,
}

/// In-place transform of `data` laid out on `grid`.
pub(crate) fn transform_in_place(grid: GridSpec, data: &mut [Complex64], direction: Direction) {
    let n = grid.n();
    debug_assert_eq!(data.len(), grid.len());
    let p = plans(n);
    let fft = match direction {
        Direction::Forward => &p.forward,
        Direction::Inverse => &p.inverse,
    };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // axis 1 is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut lines = vec![Complex64::new(0.0, 0.0); data.len()];
    for axis in 1..grid.dim() {
        let stride = n.pow(axis as u32);
        let block = stride * n;
        // Each block is an n x stride matrix whose columns are the lines
        // along `axis`; transpose it so the lines become contiguous.
        for outer in (0..data.len()).step_by(block) {
            transpose(&data[outer..outer + block], &mut lines[outer..outer + block], n, stride);
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        for outer in (0..data.len()).step_by(block) {
            transpose(&lines[outer..outer + block], &mut data[outer..outer + block], stride, n);
        }
    }

    if direction == Direction::Forward {
        let scale = 1.0 / grid.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

const TILE: usize = 16;

/// `dst = srcᵀ` for a row-major `rows x cols` matrix, in cache-sized tiles.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_forward(grid: GridSpec, data: &[Complex64]) -> Vec<Complex64> {
        let len = grid.len();
        (0..len)
            .map(|ki| {
                let k = grid.mode(ki);
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, v) in data.iter().enumerate() {
                    let x = grid.coord(i);
                    let phase = -2.0 * PI * (0..grid.dim()).map(|a| k[a] as f64 * x[a]).sum::<f64>();
                    acc += v * Complex64::from_polar(1.0, phase);
                }
                acc / len as f64
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_2d_and_3d() {
        for dim in [2, 3] {
            let g = GridSpec::new(dim, 8).unwrap();
            let data: Vec<Complex64> = (0..g.len())
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let expected = naive_forward(g, &data);
            let mut got = data.clone();
            transform_in_place(g, &mut got, Direction::Forward);
            for (a, b) in got.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-13, "{a} vs {b}");
            }
            transform_in_place(g, &mut got, Direction::Inverse);
            for (a, b) in got.iter().zip(&data) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }
}
