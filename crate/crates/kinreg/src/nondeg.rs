//! Non-degeneracy measurement and the closed-form regularity exponents.
//!
//! The regularity theory hinges on one quantitative property of the kinetic
//! symbol: how small the set of states `λ` can be on which the symbol stays
//! below a threshold `δ`, uniformly over unit frequencies. This module
//! measures those sublevel sets on a λ-grid, takes the supremum over a
//! deterministic sphere sample, fits the growth exponent `α` from the δ-sweep
//! on a log-log scale, and evaluates the exponent formulas
//!
//! ```text
//!     q* = (α + 2(d+4)) / (α + d + 4),     s* = α / (6α + 12(d+4)),
//! ```
//!
//! with `s*` doubled in the deterministic (noise-free) setting. Exact
//! rational arithmetic is available alongside the floating-point path so the
//! critical values can be checked without rounding.

use num_rational::Ratio;
use rayon::prelude::*;

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::numeric::{fit_line, mix64};

/// Which pointwise smallness condition defines the degenerate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymbolVariant {
    /// `|ξ0 + ⟨f|ξ̃⟩|² + ⟨aξ̃|ξ̃⟩ ≤ δ` — the symbol as stated.
    #[default]
    Squared,
    /// `|ξ0 + ⟨f|ξ̃⟩| + ⟨aξ̃|ξ̃⟩ ≤ δ` — unsquared hyperbolic part, an
    /// alternative normalization that shifts α for purely hyperbolic models.
    Mixed,
}

impl SymbolVariant {
    #[inline]
    fn apply(self, hyper: f64, parab: f64) -> f64 {
        match self {
            SymbolVariant::Squared => hyper * hyper + parab,
            SymbolVariant::Mixed => hyper.abs() + parab,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SymbolVariant::Squared => "squared",
            SymbolVariant::Mixed => "mixed",
        }
    }
}

/// Tuning for [`estimate_alpha`]; the defaults match the acceptance runs.
#[derive(Debug, Clone, Copy)]
pub struct AlphaOptions {
    pub sphere_samples: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    pub lambda_grid: usize,
    /// Rotates the deterministic sphere lattice; results are reproducible
    /// per seed.
    pub seed: u64,
    pub variant: SymbolVariant,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            sphere_samples: 256,
            delta_min: 1e-4,
            delta_max: 1e-1,
            delta_points: 12,
            lambda_grid: 4096,
            seed: 0,
            variant: SymbolVariant::Squared,
        }
    }
}

/// Result of the δ-sweep: per-δ suprema of the degenerate-set measure over
/// the sphere sample, and the fitted exponent when the data supports one.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyFit {
    /// Fitted exponent; `None` when every measure was zero or fewer than 4
    /// δ-points had positive measure.
    pub alpha: Option<f64>,
    pub r_squared: f64,
    pub delta_grid: Vec<f64>,
    pub sup_measures: Vec<f64>,
    pub sphere_samples: usize,
    pub lambda_grid: usize,
    /// True when the symbol never dropped below any δ — a uniformly
    /// non-degenerate model.
    pub degenerate_flag: bool,
    /// True when a fit was produced but its r² fell below 0.9.
    pub low_fit_quality: bool,
    /// Number of δ-points with positive supremum entering the fit.
    pub positive_points: usize,
}

impl DegeneracyFit {
    /// Machine-readable status for summaries: `ok`, `degenerate`,
    /// `too_few_points`, or `low_r2`.
    pub fn flag(&self) -> &'static str {
        if self.degenerate_flag {
            "degenerate"
        } else if self.alpha.is_none() {
            "too_few_points"
        } else if self.low_fit_quality {
            "low_r2"
        } else {
            "ok"
        }
    }
}

/// Lebesgue measure of `{λ ∈ I : symbol(ξ, λ) ≤ δ}` by midpoint counting on
/// a uniform grid of `lambda_grid` cells: the count times `|I| / lambda_grid`.
pub fn measure_degenerate_set(
    model: &CoefficientModel,
    xi: &[f64],
    delta: f64,
    lambda_grid: usize,
) -> Result<f64> {
    measure_degenerate_set_variant(model, xi, delta, lambda_grid, SymbolVariant::Squared)
}

/// As [`measure_degenerate_set`] with an explicit smallness condition.
pub fn measure_degenerate_set_variant(
    model: &CoefficientModel,
    xi: &[f64],
    delta: f64,
    lambda_grid: usize,
    variant: SymbolVariant,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold δ must be positive, got {delta}"
        )));
    }
    check_lambda_grid(lambda_grid)?;
    // Validates ξ (length, unit norm) once; the midpoint of I is always
    // inside the interval.
    let interval = model.interval();
    model.eval_symbol(xi, 0.5 * (interval.lo() + interval.hi()))?;
    let (xi0, xi_tilde) = (xi[0], &xi[1..]);
    let count = interval
        .grid_midpoints(lambda_grid)
        .filter(|&lambda| {
            let (h, p) = model.symbol_parts(xi0, xi_tilde, lambda);
            variant.apply(h, p) <= delta
        })
        .count();
    Ok(count as f64 * interval.length() / lambda_grid as f64)
}

fn check_lambda_grid(lambda_grid: usize) -> Result<()> {
    if lambda_grid < 256 {
        return Err(Error::InvalidArgument(format!(
            "λ-grid needs at least 256 cells to resolve small sets, got {lambda_grid}"
        )));
    }
    Ok(())
}

/// Deterministic quasi-uniform sample of the unit sphere in `R^ambient`
/// (ambient 2 or 3), rotated by `seed`, plus the `2·ambient` signed
/// coordinate axes. Every returned vector has unit norm to rounding.
pub fn sphere_points(ambient: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    // offset in [0, 1) rotating the lattice, fixed by the seed
    let offset = mix64(seed ^ 0x5bf0_3635_dcb2_9359) as f64 / (u64::MAX as f64 + 1.0);
    let mut points = Vec::with_capacity(count + 2 * ambient);
    match ambient {
        2 => {
            for i in 0..count {
                let theta = std::f64::consts::TAU * ((i as f64 + 0.5 + offset) / count as f64);
                points.push(vec![theta.cos(), theta.sin()]);
            }
        }
        3 => {
            // Fibonacci lattice: evenly spaced heights, golden-angle azimuth.
            let golden = (5f64.sqrt() - 1.0) / 2.0;
            for i in 0..count {
                let z = 1.0 - (2 * i + 1) as f64 / count as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = std::f64::consts::TAU * ((i as f64 * golden + offset) % 1.0);
                points.push(vec![r * phi.cos(), r * phi.sin(), z]);
            }
        }
        d => {
            return Err(Error::UnsupportedDimension {
                d,
                context: "sphere sampling covers ambient dimension 2 or 3",
            })
        }
    }
    for axis in 0..ambient {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; ambient];
            e[axis] = sign;
            points.push(e);
        }
    }
    Ok(points)
}

/// Sweep δ over a log-spaced grid, take per-δ suprema of the degenerate-set
/// measure over a sphere sample, and fit `log sup-measure ≈ α·log δ + c`.
///
/// The supremum runs over finitely many directions, so it approximates the
/// true supremum from below; the coordinate axes are always included. Sphere
/// points are evaluated independently in parallel and reduced by a
/// per-δ elementwise maximum.
pub fn estimate_alpha(model: &CoefficientModel, opts: &AlphaOptions) -> Result<DegeneracyFit> {
    if opts.sphere_samples < 64 {
        return Err(Error::InvalidArgument(format!(
            "sphere sample needs at least 64 points, got {}",
            opts.sphere_samples
        )));
    }
    if opts.delta_points < 6 {
        return Err(Error::InvalidArgument(format!(
            "δ-sweep needs at least 6 points, got {}",
            opts.delta_points
        )));
    }
    if !(opts.delta_min > 0.0 && opts.delta_min < opts.delta_max && opts.delta_max <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "δ-range must satisfy 0 < δ_min < δ_max ≤ 1, got [{}, {}]",
            opts.delta_min, opts.delta_max
        )));
    }
    check_lambda_grid(opts.lambda_grid)?;

    let p = opts.delta_points;
    let (ln_min, ln_max) = (opts.delta_min.ln(), opts.delta_max.ln());
    let deltas: Vec<f64> = (0..p)
        .map(|k| (ln_min + (ln_max - ln_min) * k as f64 / (p - 1) as f64).exp())
        .collect();

    let interval = model.interval();
    let points = sphere_points(model.dimension() + 1, opts.sphere_samples, opts.seed)?;
    // Validate one representative direction up front so shape errors surface
    // before the parallel fan-out.
    model.eval_symbol(&points[0], 0.5 * (interval.lo() + interval.hi()))?;

    let sup_counts: Vec<usize> = points
        .par_iter()
        .map(|xi| {
            let (xi0, xi_tilde) = (xi[0], &xi[1..]);
            let mut values: Vec<f64> = interval
                .grid_midpoints(opts.lambda_grid)
                .map(|lambda| {
                    let (h, pb) = model.symbol_parts(xi0, xi_tilde, lambda);
                    opts.variant.apply(h, pb)
                })
                .collect();
            values.sort_unstable_by(f64::total_cmp);
            deltas
                .iter()
                .map(|&delta| values.partition_point(|&v| v <= delta))
                .collect::<Vec<usize>>()
        })
        .reduce(
            || vec![0usize; p],
            |mut acc, counts| {
                for (a, c) in acc.iter_mut().zip(counts) {
                    *a = (*a).max(c);
                }
                acc
            },
        );

    let cell = interval.length() / opts.lambda_grid as f64;
    let sup_measures: Vec<f64> = sup_counts.iter().map(|&c| c as f64 * cell).collect();
    let degenerate_flag = sup_measures.iter().all(|&m| m == 0.0);

    let fit_points: Vec<(f64, f64)> = deltas
        .iter()
        .zip(&sup_measures)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&d, &m)| (d.ln(), m.ln()))
        .collect();
    let positive_points = fit_points.len();

    let (alpha, r_squared, low_fit_quality) = if positive_points >= 4 {
        match fit_line(&fit_points) {
            Some(fit) => (Some(fit.slope), fit.r_squared, fit.r_squared < 0.9),
            None => (None, 0.0, false),
        }
    } else {
        (None, 0.0, false)
    };

    Ok(DegeneracyFit {
        alpha,
        r_squared,
        delta_grid: deltas,
        sup_measures,
        sphere_samples: opts.sphere_samples,
        lambda_grid: opts.lambda_grid,
        degenerate_flag,
        low_fit_quality,
        positive_points,
    })
}

// ---------------------------------------------------------------------------
// Exponent formulas
// ---------------------------------------------------------------------------

/// The regularity exponents for a given non-degeneracy exponent `α` and
/// spatial dimension `d`. `s_star` is the base exponent of the stochastic
/// statement; [`ExponentPair::effective_s`] doubles it in the deterministic
/// setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPair {
    pub alpha: f64,
    pub d: usize,
    pub deterministic: bool,
    pub q_star: f64,
    pub s_star: f64,
}

impl ExponentPair {
    /// The smoothness exponent the verdicts compare against: `2·s*` in the
    /// deterministic setting, `s*` otherwise.
    pub fn effective_s(&self) -> f64 {
        if self.deterministic {
            2.0 * self.s_star
        } else {
            self.s_star
        }
    }
}

/// Evaluate `q*` and `s*` in floating point. Requires `α > 0`, `d ≥ 1`.
pub fn exponents(alpha: f64, d: usize, deterministic: bool) -> Result<ExponentPair> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "non-degeneracy exponent must be positive, got {alpha}"
        )));
    }
    if d == 0 {
        return Err(Error::UnsupportedDimension {
            d: 0,
            context: "exponent formulas need spatial dimension ≥ 1",
        });
    }
    let dp4 = (d + 4) as f64;
    Ok(ExponentPair {
        alpha,
        d,
        deterministic,
        q_star: (alpha + 2.0 * dp4) / (alpha + dp4),
        s_star: alpha / (6.0 * alpha + 12.0 * dp4),
    })
}

/// Exact-rational counterpart of [`ExponentPair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactExponents {
    pub alpha: Ratio<i64>,
    pub d: usize,
    pub deterministic: bool,
    pub q_star: Ratio<i64>,
    pub s_star: Ratio<i64>,
}

impl ExactExponents {
    pub fn effective_s(&self) -> Ratio<i64> {
        if self.deterministic {
            self.s_star * 2
        } else {
            self.s_star
        }
    }
}

/// Evaluate the exponent formulas in exact rational arithmetic.
pub fn exponents_exact(
    alpha: Ratio<i64>,
    d: usize,
    deterministic: bool,
) -> Result<ExactExponents> {
    if alpha <= Ratio::from_integer(0) {
        return Err(Error::InvalidArgument(format!(
            "non-degeneracy exponent must be positive, got {alpha}"
        )));
    }
    if d == 0 {
        return Err(Error::UnsupportedDimension {
            d: 0,
            context: "exponent formulas need spatial dimension ≥ 1",
        });
    }
    let dp4 = Ratio::from_integer((d + 4) as i64);
    Ok(ExactExponents {
        alpha,
        d,
        deterministic,
        q_star: (alpha + dp4 * 2) / (alpha + dp4),
        s_star: alpha / (alpha * 6 + dp4 * 12),
    })
}

/// Theoretical exponent of the power-law benchmark: `min{1/(2l), 1/n}`.
pub fn power_law_alpha(l: u32, n: u32) -> Ratio<i64> {
    Ratio::new(1, 2 * l as i64).min(Ratio::new(1, n as i64))
}
