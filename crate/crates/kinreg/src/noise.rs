//! Truncated cylindrical Wiener forcing: multiplicative noise coefficients
//! `b_ℓ(x, λ) = α_ℓ g_ℓ(x) ψ(λ)`, counter-based path sampling, pathwise
//! Itô integrals, and an audit of the structural bounds the analysis needs.
//!
//! The driving noise is `Σ_ℓ b_ℓ(x, u) dW_ℓ` with independent scalar Wiener
//! processes `W_ℓ`. Amplitudes default to `α_ℓ = 2^{−ℓ}` so the series is
//! square-summable with an explicit truncation tail; spatial profiles are
//! low Fourier modes on the periodic box scaled so that both the sup norm
//! and the gradient sup norm stay at or below one.

use crate::coeffs::Interval;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::numeric::{counter_key, standard_normal};
use crate::spectral::for_each_index;

/// State-dependence factor `ψ(λ)` of the noise coefficients. All variants
/// satisfy `|ψ| ≤ 1` and `|ψ′| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateProfile {
    /// `ψ(λ) = λ/√(1+λ²)`: bounded, bounded derivative, and `ψ(0) = 0` so
    /// the noise vanishes on the zero state.
    #[default]
    BoundedLinear,
    /// `ψ ≡ 1`: additive noise.
    Constant,
    /// `ψ ≡ 0`: switches the forcing off without changing the mode count.
    Zero,
}

impl StateProfile {
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Self::BoundedLinear => lambda / (1.0 + lambda * lambda).sqrt(),
            Self::Constant => 1.0,
            Self::Zero => 0.0,
        }
    }

    pub fn derivative(&self, lambda: f64) -> f64 {
        match self {
            Self::BoundedLinear => (1.0 + lambda * lambda).powf(-1.5),
            Self::Constant | Self::Zero => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BoundedLinear => "bounded_linear",
            Self::Constant => "constant",
            Self::Zero => "zero",
        }
    }
}

/// Spatial factor family `g_ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialProfileKind {
    /// Low Fourier modes in cos/sin pairs, ordered by wavenumber, scaled by
    /// `1/max(1, |κ|)` so that `‖g‖_∞ ≤ 1` and `‖∇g‖_∞ ≤ 1` both hold.
    #[default]
    Fourier,
    /// `g_ℓ ≡ 1` for every mode (spatially homogeneous forcing).
    Constant,
}

impl SpatialProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fourier => "fourier",
            Self::Constant => "constant",
        }
    }
}

fn amplitude_default(ell: usize) -> f64 {
    debug_assert!(ell >= 1);
    2f64.powi(-(ell as i32))
}

/// Canonical half-lattice of 2-D integer wavevectors, ordered by squared
/// length with lexicographic tie-breaking; each entry later expands into a
/// cos and a sin mode.
fn wavevectors_2d(count: usize) -> Vec<[i64; 2]> {
    let k_max = (count as f64).sqrt() as i64 + 3;
    let mut out = Vec::new();
    for k1 in 0..=k_max {
        for k2 in -k_max..=k_max {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            out.push([k1, k2]);
        }
    }
    out.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1], k[0], k[1]));
    out.truncate(count);
    out
}

/// The truncated noise model: mode count, amplitudes, spatial and state
/// profiles, and the base RNG seed.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    mode_count: usize,
    amplitudes: Vec<f64>,
    dyadic_amplitudes: bool,
    state: StateProfile,
    spatial: SpatialProfileKind,
    seed: u64,
}

impl NoiseModel {
    pub fn new(
        mode_count: usize,
        state: StateProfile,
        spatial: SpatialProfileKind,
        seed: u64,
    ) -> Self {
        Self {
            mode_count,
            amplitudes: (1..=mode_count).map(amplitude_default).collect(),
            dyadic_amplitudes: true,
            state,
            spatial,
            seed,
        }
    }

    /// Replace the dyadic default amplitudes; must supply one positive
    /// finite value per mode.
    pub fn with_amplitudes(mut self, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != self.mode_count {
            return Err(Error::DimensionMismatch {
                expected: self.mode_count,
                got: amplitudes.len(),
                context: "noise amplitudes",
            });
        }
        if let Some(bad) = amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "noise amplitudes must be positive and finite, got {bad}"
            )));
        }
        self.amplitudes = amplitudes;
        self.dyadic_amplitudes = false;
        Ok(self)
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> StateProfile {
        self.state
    }

    pub fn spatial(&self) -> SpatialProfileKind {
        self.spatial
    }

    /// `α_ℓ` for `ℓ ∈ 1..=L`.
    pub fn amplitude(&self, ell: usize) -> f64 {
        self.amplitudes[ell - 1]
    }

    /// Energy `Σ_{ℓ>L} α_ℓ²` of the discarded modes — `4^{−L}/3` for the
    /// dyadic default, unknown (`None`) once amplitudes were overridden.
    pub fn truncation_tail(&self) -> Option<f64> {
        self.dyadic_amplitudes
            .then(|| 4f64.powi(-(self.mode_count as i32)) / 3.0)
    }

    /// The spatial profile `g_ℓ(x)` on the box `[−X, X]^d` (`X` =
    /// `half_width`), for `ℓ ∈ 1..=L`.
    pub fn spatial_profile(&self, ell: usize, x: &[f64], half_width: f64) -> Result<f64> {
        if ell == 0 || ell > self.mode_count {
            return Err(Error::InvalidArgument(format!(
                "mode index {ell} outside 1..={}",
                self.mode_count
            )));
        }
        match self.spatial {
            SpatialProfileKind::Constant => Ok(1.0),
            SpatialProfileKind::Fourier => {
                let pair = (ell + 1) / 2;
                let use_cos = ell % 2 == 1;
                let kappa: Vec<f64> = match x.len() {
                    1 => vec![std::f64::consts::PI * pair as f64 / half_width],
                    2 => {
                        let kv = wavevectors_2d(pair)[pair - 1];
                        kv.iter()
                            .map(|&k| std::f64::consts::PI * k as f64 / half_width)
                            .collect()
                    }
                    d => {
                        return Err(Error::UnsupportedDimension {
                            d,
                            context: "noise spatial profiles",
                        })
                    }
                };
                let phase: f64 = kappa.iter().zip(x).map(|(k, xi)| k * xi).sum();
                let norm = kappa.iter().map(|k| k * k).sum::<f64>().sqrt().max(1.0);
                Ok(if use_cos { phase.cos() } else { phase.sin() } / norm)
            }
        }
    }

    /// The full coefficient `b_ℓ(x, λ) = α_ℓ g_ℓ(x) ψ(λ)`.
    pub fn coefficient(&self, ell: usize, x: &[f64], lambda: f64, half_width: f64) -> Result<f64> {
        Ok(self.amplitude(ell) * self.spatial_profile(ell, x, half_width)? * self.state.eval(lambda))
    }

    /// `B²(x, λ) = Σ_ℓ b_ℓ(x, λ)²` — the pointwise noise intensity.
    pub fn intensity(&self, x: &[f64], lambda: f64, half_width: f64) -> Result<f64> {
        let psi = self.state.eval(lambda);
        let mut total = 0.0;
        for ell in 1..=self.mode_count {
            let b = self.amplitude(ell) * self.spatial_profile(ell, x, half_width)? * psi;
            total += b * b;
        }
        Ok(total)
    }

    /// Sample every `g_ℓ` at the cell centers of a periodic grid.
    pub fn sample_basis(&self, shape: &[usize], half_width: f64) -> Result<SpatialBasis> {
        let d = shape.len();
        if !(1..=2).contains(&d) {
            return Err(Error::UnsupportedDimension {
                d,
                context: "noise spatial basis",
            });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        let cells: usize = shape.iter().product();
        let mut values = Vec::with_capacity(self.mode_count);
        for ell in 1..=self.mode_count {
            let mut row = vec![0.0; cells];
            let mut err = None;
            for_each_index(shape, |flat, idx| {
                if err.is_some() {
                    return;
                }
                let x: Vec<f64> = idx
                    .iter()
                    .zip(shape)
                    .map(|(&i, &n)| -half_width + (i as f64 + 0.5) * 2.0 * half_width / n as f64)
                    .collect();
                match self.spatial_profile(ell, &x, half_width) {
                    Ok(v) => row[flat] = v,
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            values.push(row);
        }
        Ok(SpatialBasis {
            shape: shape.to_vec(),
            half_width,
            values,
        })
    }
}

/// Gridded samples of the spatial profiles, one row per mode.
#[derive(Debug, Clone)]
pub struct SpatialBasis {
    shape: Vec<usize>,
    half_width: f64,
    values: Vec<Vec<f64>>,
}

impl SpatialBasis {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn mode_count(&self) -> usize {
        self.values.len()
    }

    /// Gridded values of `g_ℓ`.
    pub fn mode(&self, ell: usize) -> &[f64] {
        &self.values[ell - 1]
    }
}

/// One sampled Wiener path: per-mode, per-step increments
/// `ΔW_ℓ^m ~ N(0, Δt)`, independent across modes and steps. Increments are
/// pure functions of `(seed, path_id, mode, step)`, so ensembles can be
/// generated in any order and truncating the mode count does not reshuffle
/// the surviving modes.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    t0: f64,
    dt: f64,
    steps: usize,
    mode_count: usize,
    path_id: u64,
    seed: u64,
    /// Flat `[step][mode]`.
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn sample(nm: &NoiseModel, t0: f64, dt: f64, steps: usize, path_id: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let mode_count = nm.mode_count();
        let scale = dt.sqrt();
        let mut increments = Vec::with_capacity(steps * mode_count);
        for step in 0..steps {
            for ell in 1..=mode_count {
                let key = counter_key(&[nm.seed(), path_id, ell as u64, step as u64]);
                increments.push(scale * standard_normal(key));
            }
        }
        Ok(Self {
            t0,
            dt,
            steps,
            mode_count,
            path_id,
            seed: nm.seed(),
            increments,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    /// Grid times `t_0 … t_M` (M+1 values).
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|m| self.t0 + m as f64 * self.dt).collect()
    }

    /// `ΔW_ℓ^m` for step `m ∈ 0..M` and mode `ℓ ∈ 1..=L`.
    pub fn increment(&self, step: usize, ell: usize) -> f64 {
        self.increments[step * self.mode_count + ell - 1]
    }

    /// The sampled path `W_ℓ` at the grid times (starts at 0).
    pub fn cumulative(&self, ell: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps + 1);
        let mut acc = 0.0;
        out.push(acc);
        for step in 0..self.steps {
            acc += self.increment(step, ell);
            out.push(acc);
        }
        out
    }
}

/// The Euler–Maruyama forcing increment
/// `ψ(u(x)) · Σ_ℓ α_ℓ g_ℓ(x) ΔW_ℓ^m` on the grid of `basis`.
pub fn noise_increment(
    nm: &NoiseModel,
    basis: &SpatialBasis,
    path: &WienerPath,
    step: usize,
    u: &Field,
) -> Result<Field> {
    if u.shape() != basis.shape() {
        return Err(Error::ShapeMismatch {
            expected: basis.shape().to_vec(),
            got: u.shape().to_vec(),
        });
    }
    if path.mode_count() != nm.mode_count() || basis.mode_count() != nm.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: nm.mode_count(),
            got: path.mode_count().min(basis.mode_count()),
            context: "noise mode count",
        });
    }
    if step >= path.steps() {
        return Err(Error::OutOfRange {
            what: "time step index",
            value: step as f64,
            limit: path.steps().saturating_sub(1) as f64,
        });
    }
    // spatial part first: Σ_ℓ α_ℓ ΔW_ℓ g_ℓ(x)
    let mut spatial = vec![0.0; u.len()];
    for ell in 1..=nm.mode_count() {
        let w = nm.amplitude(ell) * path.increment(step, ell);
        if w == 0.0 {
            continue;
        }
        for (s, &g) in spatial.iter_mut().zip(basis.mode(ell)) {
            *s += w * g;
        }
    }
    let data = u
        .data()
        .iter()
        .zip(&spatial)
        .map(|(&uv, &s)| nm.state().eval(uv) * s)
        .collect();
    Field::from_vec(u.shape(), data)
}

/// Left-point Itô sum of a scalar integrand: returns the time series
/// `𝓘(t_m) = Σ_{j<m} Σ_ℓ Φ(j, ℓ) ΔW_ℓ^j` at the grid times `t_0 … t_M`.
/// The integrand is only ever evaluated at indices strictly before the
/// increment it multiplies, preserving adaptedness.
pub fn ito_integral_path(
    path: &WienerPath,
    mut phi: impl FnMut(usize, usize) -> f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.steps() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for step in 0..path.steps() {
        for ell in 1..=path.mode_count() {
            acc += phi(step, ell) * path.increment(step, ell);
        }
        out.push(acc);
    }
    out
}

/// Pathwise field-valued Itô integral of the model's own coefficients
/// against the states `u^0 … u^{M−1}`:
/// `𝓘(t_m)(x) = Σ_{j<m} Σ_ℓ b_ℓ(x, u^j(x)) ΔW_ℓ^j`.
pub fn ito_integral_fields(
    nm: &NoiseModel,
    basis: &SpatialBasis,
    path: &WienerPath,
    states: &[Field],
) -> Result<Vec<Field>> {
    if states.len() < path.steps() {
        return Err(Error::DimensionMismatch {
            expected: path.steps(),
            got: states.len(),
            context: "states for the Itô integrand",
        });
    }
    let mut out = Vec::with_capacity(path.steps() + 1);
    let mut acc = Field::zeros(basis.shape())?;
    out.push(acc.clone());
    for step in 0..path.steps() {
        let inc = noise_increment(nm, basis, path, step, &states[step])?;
        for (a, &v) in acc.data_mut().iter_mut().zip(inc.data()) {
            *a += v;
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// Measured suprema of the three structural noise bounds.
#[derive(Debug, Clone, Copy)]
pub struct NoiseAudit {
    /// `max_ℓ sup_{x,λ} (|b_ℓ(x,0)| + |∇_x b_ℓ| + |∂_λ b_ℓ|) / α_ℓ`; the
    /// profile normalizations guarantee ≤ 3.
    pub per_mode_ratio: f64,
    /// `sup B²(x,λ)/(1+λ²)`; ≤ 1 for every built-in profile.
    pub quadratic_growth: f64,
    /// `sup Σ_ℓ (∂_λ b_ℓ)²`; ≤ 1 for every built-in profile.
    pub derivative_sum: f64,
    /// Discarded-mode energy (dyadic amplitudes only).
    pub truncation_tail: Option<f64>,
    pub pass: bool,
}

/// Audit the noise bounds on a `grid^d × grid` sample of `(x, λ)`, with
/// gradients taken by central finite differences so the check does not
/// reuse the model's own calculus.
pub fn validate_noise(
    nm: &NoiseModel,
    d: usize,
    half_width: f64,
    grid: usize,
    states: &Interval,
) -> Result<NoiseAudit> {
    if !(1..=2).contains(&d) {
        return Err(Error::UnsupportedDimension {
            d,
            context: "noise audit",
        });
    }
    if grid < 4 {
        return Err(Error::InvalidArgument(format!(
            "noise audit needs at least 4 sample points per axis, got {grid}"
        )));
    }
    let h = 1e-5;
    let xs: Vec<f64> = (0..grid)
        .map(|i| -half_width + (i as f64 + 0.5) * 2.0 * half_width / grid as f64)
        .collect();
    let lambdas: Vec<f64> = states.grid_nodes(grid).collect();

    let mut points: Vec<Vec<f64>> = Vec::new();
    if d == 1 {
        points.extend(xs.iter().map(|&x| vec![x]));
    } else {
        for &x1 in &xs {
            for &x2 in &xs {
                points.push(vec![x1, x2]);
            }
        }
    }

    let mut per_mode_ratio: f64 = 0.0;
    let mut quadratic_growth: f64 = 0.0;
    let mut derivative_sum: f64 = 0.0;
    for x in &points {
        for &lambda in &lambdas {
            let mut b2 = 0.0;
            let mut db2 = 0.0;
            for ell in 1..=nm.mode_count() {
                let b = nm.coefficient(ell, x, lambda, half_width)?;
                b2 += b * b;
                let db = (nm.coefficient(ell, x, lambda + h, half_width)?
                    - nm.coefficient(ell, x, lambda - h, half_width)?)
                    / (2.0 * h);
                db2 += db * db;

                let mut grad = 0.0;
                for axis in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[axis] += h;
                    xm[axis] -= h;
                    let g = (nm.coefficient(ell, &xp, lambda, half_width)?
                        - nm.coefficient(ell, &xm, lambda, half_width)?)
                        / (2.0 * h);
                    grad += g * g;
                }
                let at_zero = nm.coefficient(ell, x, 0.0, half_width)?.abs();
                let ratio = (at_zero + grad.sqrt() + db.abs()) / nm.amplitude(ell);
                per_mode_ratio = per_mode_ratio.max(ratio);
            }
            quadratic_growth = quadratic_growth.max(b2 / (1.0 + lambda * lambda));
            derivative_sum = derivative_sum.max(db2);
        }
    }
    let slack = 1e-6;
    Ok(NoiseAudit {
        per_mode_ratio,
        quadratic_growth,
        derivative_sum,
        truncation_tail: nm.truncation_tail(),
        pass: per_mode_ratio <= 3.0 + slack
            && quadratic_growth <= 1.0 + slack
            && derivative_sum <= 1.0 + slack,
    })
}
