//! Dyadic Littlewood–Paley machinery: the radial partition of unity, the
//! diffusion cutoffs, the modified symbol, and discrete frequency-annulus
//! filters on periodic grids.
//!
//! Everything is built from one monotone profile `Φ` with `Φ = 1` on
//! `[0, 1]` and `Φ = 0` beyond `2`, realized as a piecewise-polynomial
//! smoothstep so that supports and the partition identity are exact rather
//! than asymptotic. The dyadic annulus profiles are
//!
//! ```text
//!     Ψ0(r) = Φ(r),      Ψ(r) = Φ(r) − Φ(2r)   (supported in (1/2, 2)),
//! ```
//!
//! and `Ψ0(|ξ|) + Σ_{J≥1} Ψ(2^{−J}|ξ|)` telescopes to `Φ(2^{−J_cap}|ξ|)`,
//! which equals 1 on the covered ball — in exact arithmetic and, because
//! scaling by powers of two is exact in binary floating point, in `f64` too.

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::spectral::{fft_nd, for_each_index, freq_radius, C64};

// ---------------------------------------------------------------------------
// Smooth profiles
// ---------------------------------------------------------------------------

/// Radial bump profile: 1 on `[0, 1]`, a descending smoothstep on `(1, 2)`,
/// 0 from 2 on. `order` N gives C^N smoothness at the seams (polynomial of
/// degree 2N+1 in between).
#[derive(Debug, Clone)]
pub struct SmoothBump {
    order: usize,
    /// Signed coefficients of the smoothstep factor polynomial, low degree
    /// first: S(x) = x^{N+1} Σ_k coeff[k] x^k.
    coeffs: Vec<f64>,
}

fn binomial(n: u64, k: u64) -> f64 {
    num_integer::binomial(n as u128, k as u128) as f64
}

impl SmoothBump {
    pub fn new(order: usize) -> Self {
        let n = order as u64;
        let coeffs = (0..=n)
            .map(|k| {
                let c = binomial(n + k, k) * binomial(2 * n + 1, n - k);
                if k % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        Self { order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The ascending smoothstep `S` on `[0, 1]`: `S(0) = 0`, `S(1) = 1`,
    /// with the first `order` derivatives vanishing at both ends.
    fn smoothstep(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let mut p = 0.0;
        for &c in self.coeffs.iter().rev() {
            p = p * x + c;
        }
        // Horner can land an ulp outside [0, 1] right at the seams.
        (p * x.powi(self.order as i32 + 1)).clamp(0.0, 1.0)
    }

    /// The profile `Φ(r)` for `r ≥ 0` (evaluated on `|r|`).
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            1.0 - self.smoothstep(r - 1.0)
        }
    }
}

// ---------------------------------------------------------------------------
// Dyadic partition of unity
// ---------------------------------------------------------------------------

/// The radial dyadic partition `Ψ0, Ψ_1, …, Ψ_{J_cap}` built from one
/// [`SmoothBump`] profile.
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    j_cap: usize,
    profile: SmoothBump,
}

/// Number of dyadic blocks needed so the partition covers every integer
/// wavenumber of a grid with the given extents: the smallest `J` with
/// `r_max ≤ 2^{J−1}`, where `r_max` is the Nyquist corner radius.
pub fn block_limit(shape: &[usize]) -> usize {
    let r_max = shape
        .iter()
        .map(|&n| {
            let h = n as f64 / 2.0;
            h * h
        })
        .sum::<f64>()
        .sqrt();
    let mut j = 1usize;
    while (r_max as f64) > 2f64.powi(j as i32 - 1) {
        j += 1;
    }
    j
}

impl DyadicPartition {
    pub fn new(j_cap: usize, order: usize) -> Result<Self> {
        if j_cap == 0 {
            return Err(Error::InvalidArgument(
                "dyadic partition needs at least one annulus block".to_string(),
            ));
        }
        if order == 0 {
            return Err(Error::InvalidArgument(
                "profile smoothness order must be at least 1".to_string(),
            ));
        }
        Ok(Self {
            j_cap,
            profile: SmoothBump::new(order),
        })
    }

    /// Partition for fields over `dimension` axes, with the profile order
    /// `dimension + 3` the multiplier estimates ask for.
    pub fn for_dimension(dimension: usize, j_cap: usize) -> Result<Self> {
        Self::new(j_cap, dimension + 3)
    }

    /// Partition sized to exactly reconstruct fields on the given grid.
    pub fn for_grid(shape: &[usize]) -> Self {
        Self::new(block_limit(shape), shape.len() + 3).expect("limits are ≥ 1 by construction")
    }

    pub fn j_cap(&self) -> usize {
        self.j_cap
    }

    pub fn profile(&self) -> &SmoothBump {
        &self.profile
    }

    /// `Ψ0(r) = Φ(r)`.
    pub fn psi0(&self, r: f64) -> f64 {
        self.profile.eval(r)
    }

    /// `Ψ(r) = Φ(r) − Φ(2r)`, supported in `(1/2, 2)`.
    pub fn psi(&self, r: f64) -> f64 {
        self.profile.eval(r) - self.profile.eval(2.0 * r)
    }

    /// Weight of block `j` (0 = low-pass) at radius `r`.
    pub fn block_weight(&self, j: usize, r: f64) -> f64 {
        debug_assert!(j <= self.j_cap);
        if j == 0 {
            self.psi0(r)
        } else {
            self.psi(r / 2f64.powi(j as i32))
        }
    }

    /// All block weights `[Ψ0(|ξ|), Ψ_1(|ξ|), …, Ψ_{J_cap}(|ξ|)]`. Within
    /// the covered ball `|ξ| ≤ 2^{J_cap−1}` they sum exactly to one; beyond
    /// it the partition would be incomplete, so that is an error.
    pub fn weights(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let limit = 2f64.powi(self.j_cap as i32 - 1);
        if r > limit {
            return Err(Error::OutOfRange {
                what: "frequency radius",
                value: r,
                limit,
            });
        }
        Ok((0..=self.j_cap).map(|j| self.block_weight(j, r)).collect())
    }
}

// ---------------------------------------------------------------------------
// Frequency-annulus filters
// ---------------------------------------------------------------------------

/// Apply the block-`j` annulus filter to a periodic gridded field: forward
/// FFT, multiply each mode by the block weight at its integer-wavenumber
/// radius, inverse FFT. Linear, and summing all blocks `0..=J_cap` of a
/// grid-sized partition reproduces the field.
pub fn lp_block_filter(field: &Field, partition: &DyadicPartition, j: usize) -> Result<Field> {
    check_block_index(field, partition, j)?;
    let spectrum = forward_spectrum(field);
    block_from_spectrum(&spectrum, field.shape(), partition, j)
}

/// All blocks `0..=J_cap` of `field`, sharing one forward transform.
pub fn lp_blocks(field: &Field, partition: &DyadicPartition) -> Result<Vec<Field>> {
    check_block_index(field, partition, partition.j_cap())?;
    let spectrum = forward_spectrum(field);
    (0..=partition.j_cap())
        .map(|j| block_from_spectrum(&spectrum, field.shape(), partition, j))
        .collect()
}

fn check_block_index(field: &Field, partition: &DyadicPartition, j: usize) -> Result<()> {
    if j > partition.j_cap() {
        return Err(Error::OutOfRange {
            what: "dyadic block index",
            value: j as f64,
            limit: partition.j_cap() as f64,
        });
    }
    // The partition must cover the grid's own frequencies, otherwise block
    // sums cannot reconstruct the field.
    let needed = block_limit(field.shape());
    if partition.j_cap() < needed {
        return Err(Error::InsufficientResolution {
            needed,
            got: partition.j_cap(),
        });
    }
    Ok(())
}

pub(crate) fn forward_spectrum(field: &Field) -> Vec<C64> {
    let mut data: Vec<C64> = field.data().iter().map(|&v| C64::new(v, 0.0)).collect();
    fft_nd(&mut data, field.shape(), false);
    data
}

pub(crate) fn block_from_spectrum(
    spectrum: &[C64],
    shape: &[usize],
    partition: &DyadicPartition,
    j: usize,
) -> Result<Field> {
    let mut filtered = vec![C64::new(0.0, 0.0); spectrum.len()];
    for_each_index(shape, |flat, idx| {
        let w = partition.block_weight(j, freq_radius(idx, shape));
        if w != 0.0 {
            filtered[flat] = spectrum[flat] * w;
        }
    });
    fft_nd(&mut filtered, shape, true);
    Field::from_vec(shape, filtered.into_iter().map(|c| c.re).collect())
}

// ---------------------------------------------------------------------------
// Diffusion cutoffs and the modified symbol
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffPreset {
    Stochastic,
    Deterministic,
}

/// The cutoff family `Φ_J(ξ, λ) = Φ(2^{εJ} ⟨a(λ)ξ̃′|ξ̃′⟩)` together with the
/// exponents `(r, ε)` that weight the modified symbol. Both presets satisfy
/// `r + ε = 1`; the stochastic one keeps the temporal roughness parameter
/// `ν < 1/2` via `r = 1 − 2ν/3`, `ε = 2ν/3`, while the noise-free setting
/// allows the more aggressive `r = 1/3`, `ε = 2/3`.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    profile: SmoothBump,
    pub preset: CutoffPreset,
    pub nu: f64,
    pub r: f64,
    pub epsilon: f64,
}

/// Profile smoothness used for cutoffs; `d + 3` for the largest supported
/// spatial dimension.
const CUTOFF_PROFILE_ORDER: usize = 5;

impl CutoffFamily {
    /// Stochastic preset; requires `0 < ν < 1/2`.
    pub fn stochastic(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "temporal roughness parameter must lie in (0, 1/2), got {nu}"
            )));
        }
        Ok(Self {
            profile: SmoothBump::new(CUTOFF_PROFILE_ORDER),
            preset: CutoffPreset::Stochastic,
            nu,
            r: 1.0 - 2.0 * nu / 3.0,
            epsilon: 2.0 * nu / 3.0,
        })
    }

    /// Deterministic preset: `r = 1/3`, `ε = 2/3` (the `ν → 1` limit of the
    /// stochastic formulas, admissible without a noise term).
    pub fn deterministic() -> Self {
        Self {
            profile: SmoothBump::new(CUTOFF_PROFILE_ORDER),
            preset: CutoffPreset::Deterministic,
            nu: 1.0,
            r: 1.0 / 3.0,
            epsilon: 2.0 / 3.0,
        }
    }

    /// The underlying profile `Φ`.
    pub fn phi(&self, x: f64) -> f64 {
        self.profile.eval(x)
    }

    /// `Φ_J(ξ, λ)`: evaluates the profile on `2^{εJ}` times the diffusion
    /// quadratic form in the *normalized* spatial frequency ξ̃′.
    pub fn phi_j(
        &self,
        model: &CoefficientModel,
        j: usize,
        xi: &[f64],
        lambda: f64,
    ) -> Result<f64> {
        let (_, _, parab) = self.normalized_parts(model, xi, lambda)?;
        Ok(self.phi(2f64.powf(self.epsilon * j as f64) * parab))
    }

    /// The modified symbol
    /// `L_J(ξ, λ) = (ξ0′ + ⟨f(λ)|ξ̃′⟩)²·Φ_J(ξ, λ) + ⟨a(λ)ξ̃′|ξ̃′⟩·|ξ|^{1−r}`
    /// with `ξ′ = ξ/|ξ|`. Nonnegative; requires `ξ ≠ 0` and `λ ∈ I`.
    pub fn modified_symbol(
        &self,
        model: &CoefficientModel,
        j: usize,
        xi: &[f64],
        lambda: f64,
    ) -> Result<f64> {
        let (norm, hyper, parab) = self.normalized_parts(model, xi, lambda)?;
        let phi_j = self.phi(2f64.powf(self.epsilon * j as f64) * parab);
        Ok(hyper * hyper * phi_j + parab * norm.powf(1.0 - self.r))
    }

    /// Validates inputs and returns `(|ξ|, ξ0′+⟨f|ξ̃′⟩, ⟨aξ̃′|ξ̃′⟩)`.
    fn normalized_parts(
        &self,
        model: &CoefficientModel,
        xi: &[f64],
        lambda: f64,
    ) -> Result<(f64, f64, f64)> {
        if xi.len() != model.dimension() + 1 {
            return Err(Error::DimensionMismatch {
                expected: model.dimension() + 1,
                got: xi.len(),
                context: "frequency vector (ξ0, ξ̃)",
            });
        }
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument(
                "modified symbol is undefined at ξ = 0".to_string(),
            ));
        }
        model.interval().check(lambda, "modified symbol evaluation")?;
        let unit: Vec<f64> = xi.iter().map(|v| v / norm).collect();
        let (hyper, parab) = model.symbol_parts(unit[0], &unit[1..], lambda);
        Ok((norm, hyper, parab))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smoothstep_satisfies_the_reflection_identity() {
        // Independent characterization: the order-N smoothstep is the unique
        // degree-2N+1 polynomial with S(x) + S(1−x) = 1 and flat ends.
        for order in [1usize, 3, 5, 6] {
            let b = SmoothBump::new(order);
            for k in 0..=40 {
                let x = k as f64 / 40.0;
                let s = b.smoothstep(x);
                assert!((0.0..=1.0).contains(&s));
                assert_abs_diff_eq!(s + b.smoothstep(1.0 - x), 1.0, epsilon = 1e-12);
            }
            // flat to first order at both seams of Φ
            let h = 1e-6;
            assert!((b.eval(1.0 + h) - 1.0).abs() < 1e-10);
            assert!(b.eval(2.0 - h).abs() < 1e-10);
        }
    }

    #[test]
    fn profile_is_monotone_with_exact_supports() {
        let b = SmoothBump::new(5);
        assert_eq!(b.eval(0.0), 1.0);
        assert_eq!(b.eval(1.0), 1.0);
        assert_eq!(b.eval(2.0), 0.0);
        assert_eq!(b.eval(7.5), 0.0);
        let mut prev = 1.0;
        for k in 0..=200 {
            let v = b.eval(k as f64 / 100.0);
            assert!(v <= prev + 1e-15, "not monotone at {k}");
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn partition_weights_sum_to_one_on_random_frequencies() {
        let p = DyadicPartition::for_dimension(2, 10).unwrap();
        let cap = 2f64.powi(9);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let dir: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            // bias radii toward the origin so the low-pass block gets exercised
            let radius = rng.gen_range(0.0..1.0f64).powi(2) * cap;
            let xi: Vec<f64> = dir.iter().map(|v| v / norm * radius).collect();
            let w = p.weights(&xi).unwrap();
            let sum: f64 = w.iter().sum();
            assert!(
                (sum - 1.0).abs() <= 1e-12,
                "partition sum {sum} at ξ = {xi:?}"
            );
            assert!(w.iter().all(|&v| (0.0..=1.0 + 1e-15).contains(&v)));
            let active = w[1..].iter().filter(|&&v| v != 0.0).count();
            assert!(active <= 3, "{active} annulus blocks active");
        }
    }

    #[test]
    fn partition_edge_cases() {
        let p = DyadicPartition::for_dimension(1, 8).unwrap();
        // ξ = 0: everything in the low-pass block
        let w = p.weights(&[0.0, 0.0]).unwrap();
        assert_eq!(w[0], 1.0);
        assert!(w[1..].iter().all(|&v| v == 0.0));
        // |ξ| = 2^J exactly: support within blocks J−1..J+1, summing to 1
        for j in 2..=6usize {
            let r = 2f64.powi(j as i32);
            let w = p.weights(&[r, 0.0]).unwrap();
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for (k, &v) in w.iter().enumerate() {
                if v != 0.0 {
                    assert!(
                        k + 1 >= j && k <= j + 1,
                        "block {k} active at radius 2^{j}"
                    );
                }
            }
        }
        // beyond the covered ball: range error
        assert!(matches!(
            p.weights(&[2f64.powi(7) + 1.0, 0.0]),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn filter_on_constant_field_is_pure_low_pass() {
        let f = Field::from_vec(&[16, 16], vec![3.25; 256]).unwrap();
        let p = DyadicPartition::for_grid(f.shape());
        let low = lp_block_filter(&f, &p, 0).unwrap();
        for (&a, &b) in low.data().iter().zip(f.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for j in 1..=p.j_cap() {
            let blk = lp_block_filter(&f, &p, j).unwrap();
            assert!(blk.max_abs() < 1e-12, "block {j} leaked {}", blk.max_abs());
        }
    }

    #[test]
    fn sinusoid_energy_is_confined_to_adjacent_blocks() {
        // wavenumber 3 lies strictly between 2^1 and 2^2, so only annuli
        // 1 and 2 can see it — and together they must reproduce it.
        let n = 32;
        let f = Field::from_fn(&[n], |idx| {
            (std::f64::consts::TAU * 3.0 * idx[0] as f64 / n as f64).sin()
        })
        .unwrap();
        let p = DyadicPartition::for_grid(f.shape());
        let blocks = lp_blocks(&f, &p).unwrap();
        let mut recon = vec![0.0; n];
        for (j, blk) in blocks.iter().enumerate() {
            let energy: f64 = blk.data().iter().map(|v| v * v).sum();
            if !(1..=2).contains(&j) {
                assert!(energy < 1e-20, "block {j} energy {energy}");
            }
            for (r, &v) in recon.iter_mut().zip(blk.data()) {
                *r += v;
            }
        }
        for (a, b) in recon.iter().zip(f.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn blocks_match_direct_transform_oracle_and_reconstruct() {
        // Oracle: an O(n²) direct DFT per block, entirely independent of the
        // FFT path, on a small 1-D field.
        let n = 24usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = Field::from_vec(&[n], (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let p = DyadicPartition::for_grid(f.shape());
        let tau = std::f64::consts::TAU;
        for j in 0..=p.j_cap() {
            let fast = lp_block_filter(&f, &p, j).unwrap();
            for x in 0..n {
                // direct evaluation of (1/n) Σ_k w(|k|) Σ_y u(y) e^{ik(x−y)2π/n}
                let mut acc = 0.0;
                for k in 0..n {
                    let kk = crate::spectral::freq_index(k, n) as f64;
                    let w = p.block_weight(j, kk.abs());
                    if w == 0.0 {
                        continue;
                    }
                    let (mut re, mut im) = (0.0, 0.0);
                    for (y, &u) in f.data().iter().enumerate() {
                        let ang = tau * k as f64 * (x as f64 - y as f64) / n as f64;
                        re += u * ang.cos();
                        im += u * ang.sin();
                    }
                    let _ = im; // imaginary parts cancel in the full k-sum
                    acc += w * re / n as f64;
                }
                assert_abs_diff_eq!(fast.data()[x], acc, epsilon = 1e-9);
            }
        }
        // near-orthogonality: no block exceeds the field's own L² norm
        let norm: f64 = f.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..=p.j_cap() {
            let blk = lp_block_filter(&f, &p, j).unwrap();
            let bn: f64 = blk.data().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(bn <= norm * (1.0 + 1e-12));
        }
    }

    #[test]
    fn random_field_reconstructs_from_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let shape = [12usize, 20];
        let f = Field::from_vec(
            &shape,
            (0..240).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let p = DyadicPartition::for_grid(&shape);
        let blocks = lp_blocks(&f, &p).unwrap();
        let mut recon = vec![0.0; f.len()];
        for blk in &blocks {
            for (r, &v) in recon.iter_mut().zip(blk.data()) {
                *r += v;
            }
        }
        let err = recon
            .iter()
            .zip(f.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-10, "reconstruction error {err}");
    }

    #[test]
    fn undersized_partition_is_rejected() {
        let f = Field::zeros(&[64]).unwrap();
        let p = DyadicPartition::for_dimension(1, 3).unwrap(); // covers radius 4 only
        assert!(matches!(
            lp_block_filter(&f, &p, 1),
            Err(Error::InsufficientResolution { .. })
        ));
        let good = DyadicPartition::for_grid(f.shape());
        assert!(matches!(
            lp_block_filter(&f, &good, good.j_cap() + 1),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn cutoff_presets_satisfy_the_parameter_identities() {
        let s = CutoffFamily::stochastic(0.45).unwrap();
        assert_abs_diff_eq!(s.r, 1.0 - 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s.epsilon, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s.r + s.epsilon, 1.0, epsilon = 1e-15);
        let d = CutoffFamily::deterministic();
        assert_abs_diff_eq!(d.r, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.epsilon, 2.0 / 3.0, epsilon = 1e-15);
        assert!(CutoffFamily::stochastic(0.5).is_err());
        assert!(CutoffFamily::stochastic(0.0).is_err());
    }

    #[test]
    fn modified_symbol_reduces_when_diffusion_vanishes() {
        // a ≡ 0 ⟹ Φ_J = Φ(0) = 1 and the parabolic term drops out, leaving
        // the squared hyperbolic part for every block.
        let m = CoefficientModel::burgers();
        let c = CutoffFamily::stochastic(0.45).unwrap();
        for j in [0usize, 2, 7] {
            let v = c.modified_symbol(&m, j, &[3.0, 4.0], 0.5).unwrap();
            // ξ′ = (0.6, 0.8); hyper = 0.6 + 0.5·0.8 = 1.0
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(c.phi_j(&m, j, &[3.0, 4.0], 0.5).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn cutoff_kills_the_hyperbolic_part_at_strong_diffusion() {
        // Pure x2-frequency at λ = 1: ⟨aξ̃′|ξ̃′⟩ = 1, so once 2^{εJ} > 2 the
        // cutoff vanishes and L_J = |ξ|^{1−r} exactly.
        let m = CoefficientModel::power_law(1, 1).unwrap();
        let c = CutoffFamily::deterministic();
        for j in 2..=6usize {
            let scale = 2f64.powi(j as i32);
            let v = c.modified_symbol(&m, j, &[0.0, 0.0, scale], 1.0).unwrap();
            assert_abs_diff_eq!(v, scale.powf(1.0 - c.r), epsilon = 1e-12);
            assert_eq!(c.phi_j(&m, j, &[0.0, 0.0, scale], 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn modified_symbol_matches_independent_evaluation() {
        // Dual-evaluation oracle: re-derive the formula from scratch at a
        // spot value and compare.
        let m = CoefficientModel::power_law(1, 1).unwrap();
        let c = CutoffFamily::deterministic();
        let (xi, lambda, j) = ([1.0f64, 1.0, 1.0], 0.5, 3usize);
        let got = c.modified_symbol(&m, j, &xi, lambda).unwrap();

        let norm = (3f64).sqrt();
        let unit = [1.0 / norm, 1.0 / norm, 1.0 / norm];
        let hyper = unit[0] + lambda * unit[1]; // f(λ) = (λ, 0)
        let parab = lambda.abs() * unit[2] * unit[2]; // a = diag(0, |λ|)
        let phi_arg = 2f64.powf(2.0 / 3.0 * j as f64) * parab;
        let phi = if phi_arg <= 1.0 {
            1.0
        } else if phi_arg >= 2.0 {
            0.0
        } else {
            // descending smoothstep of order 5 on (1, 2)
            let x: f64 = phi_arg - 1.0;
            let s = x.powi(6)
                * (462.0 - 1980.0 * x + 3465.0 * x.powi(2) - 3080.0 * x.powi(3)
                    + 1386.0 * x.powi(4)
                    - 252.0 * x.powi(5));
            1.0 - s
        };
        let expect = hyper * hyper * phi + parab * norm.powf(1.0 - 1.0 / 3.0);
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn modified_symbol_rejects_zero_frequency_and_escaped_states() {
        let m = CoefficientModel::burgers();
        let c = CutoffFamily::stochastic(0.3).unwrap();
        assert!(c.modified_symbol(&m, 1, &[0.0, 0.0], 0.5).is_err());
        assert!(matches!(
            c.modified_symbol(&m, 1, &[1.0, 1.0], 7.0),
            Err(Error::OutOfInterval { .. })
        ));
    }

    #[test]
    fn parabolic_part_scales_like_xi_to_one_minus_r() {
        // On a ray where the cutoff has already vanished, doubling |ξ|
        // multiplies L_J by exactly 2^{1−r}.
        let m = CoefficientModel::power_law(1, 1).unwrap();
        let c = CutoffFamily::stochastic(0.45).unwrap();
        let j = 8; // 2^{εJ}·0.9 ≫ 2 ⇒ Φ_J = 0
        let base = c.modified_symbol(&m, j, &[0.0, 0.0, 4.0], 0.9).unwrap();
        let doubled = c.modified_symbol(&m, j, &[0.0, 0.0, 8.0], 0.9).unwrap();
        assert_abs_diff_eq!(doubled / base, 2f64.powf(1.0 - c.r), epsilon = 1e-12);
    }

    #[test]
    fn dyadic_sum_of_modified_symbols_stays_above_half() {
        // Wherever the diffusion form exceeds the block-K cutoff threshold
        // and |ξ| sits in annulus K, the Ψ-weighted sum of the modified
        // symbols is bounded below by 4^{−ν} > 1/2: each active L_J keeps
        // its parabolic term, and the weights sum to one.
        let m = CoefficientModel::power_law(1, 1).unwrap();
        let nu = 0.45;
        let c = CutoffFamily::stochastic(nu).unwrap();
        let lambda: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 2..=5usize {
            let p = DyadicPartition::for_dimension(2, k + 3).unwrap();
            let threshold = 2f64.powf(-(2.0 / 3.0) * nu * (k as f64 + 1.0));
            for _ in 0..50 {
                // random direction with enough ξ2-weight, random annulus radius
                let raw = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.8..1.4),
                ];
                let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                let radius = rng.gen_range(2f64.powi(k as i32 - 1) * 1.01..2f64.powi(k as i32 + 1) * 0.99);
                let xi: Vec<f64> = raw.iter().map(|v| v / n * radius).collect();
                let unit: Vec<f64> = raw.iter().map(|v| v / n).collect();
                let parab = lambda.abs() * unit[2] * unit[2];
                if parab <= threshold {
                    continue; // hypothesis not met for this draw
                }
                let weights = p.weights(&xi).unwrap();
                let mut total = 0.0;
                for (j, &w) in weights.iter().enumerate().skip(1) {
                    if w > 0.0 {
                        total += w * c.modified_symbol(&m, j, &xi, lambda).unwrap();
                    }
                }
                let floor = 4f64.powf(-nu);
                assert!(floor > 0.5);
                assert!(
                    total >= floor - 1e-12,
                    "K = {k}: weighted sum {total} below {floor} at ξ = {xi:?}"
                );
            }
        }
    }
}
