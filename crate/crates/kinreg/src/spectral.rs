//! Axis-by-axis complex FFTs on flat row-major arrays.
//!
//! The dyadic frequency decomposition and the calibration fields need full
//! n-dimensional transforms, but only ever on modest grids, so the approach
//! is the simple one: transform each axis in turn, gathering strided lanes
//! into a contiguous scratch buffer.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub type C64 = Complex<f64>;

/// In-place n-dimensional FFT of row-major `data` with extents `shape`.
/// The forward transform is unnormalized; the inverse divides by the total
/// number of points, so `fft_nd(.., false)` then `fft_nd(.., true)` is the
/// identity up to rounding.
pub fn fft_nd(data: &mut [C64], shape: &[usize], inverse: bool) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total, "data length must match shape product");
    let mut planner = FftPlanner::<f64>::new();
    for ax in 0..shape.len() {
        let n = shape[ax];
        if n == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let inner: usize = shape[ax + 1..].iter().product();
        let outer: usize = shape[..ax].iter().product();
        let mut lane = vec![C64::new(0.0, 0.0); n];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for (k, slot) in lane.iter_mut().enumerate() {
                    *slot = data[base + k * inner];
                }
                fft.process(&mut lane);
                for (k, &v) in lane.iter().enumerate() {
                    data[base + k * inner] = v;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Signed integer wavenumber for bin `i` of an `n`-point transform:
/// `0, 1, …, n/2, -(n/2 - 1), …, -1` (the Nyquist bin counts as positive).
#[inline]
pub fn freq_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Euclidean length of the signed wavenumber at multi-index `idx`.
pub fn freq_radius(idx: &[usize], shape: &[usize]) -> f64 {
    idx.iter()
        .zip(shape)
        .map(|(&i, &n)| {
            let k = freq_index(i, n) as f64;
            k * k
        })
        .sum::<f64>()
        .sqrt()
}

/// Visit every multi-index of `shape` in row-major order together with its
/// flat offset.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for flat in 0..total {
        f(flat, &idx);
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}
