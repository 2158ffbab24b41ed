//! Coefficient models for the degenerate convection–diffusion equation
//!
//! ```text
//!     ∂_t u + div_x 𝔣(u) = div_x( a(u) ∇_x u ) + forcing
//! ```
//!
//! A [`CoefficientModel`] bundles the flux derivative `f = 𝔣′`, the diffusion
//! matrix `a`, its positive-semidefinite square root `σ`, and the primitives
//! `𝔣(λ) = ∫_0^λ f`, `A(λ) = ∫_0^λ a`, `Σ(λ) = ∫_0^λ σ`, together with the
//! state interval `I` on which solutions are expected to live. Built-in
//! families cover the power-law benchmark, inviscid Burgers, isotropic heat
//! diffusion, and tabulated user models; [`validate_model`] checks the
//! structural requirements (symmetry, positive semidefiniteness, `σ·σ = a`,
//! primitive consistency) numerically.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, adaptive_simpson_split};

/// Tolerance below which a unit frequency vector is accepted.
const UNIT_TOL: f64 = 1e-12;
/// Eigenvalues above this (negative) threshold count as semidefinite.
const PSD_TOL: f64 = 1e-10;
/// Largest tolerated entry of `σ·σ − a` during validation.
const SQRT_TOL: f64 = 1e-8;
/// Largest tolerated relative mismatch between stored primitives and quadrature.
const PRIMITIVE_TOL: f64 = 1e-6;
/// Absolute tolerance handed to the adaptive quadrature oracle.
const QUAD_TOL: f64 = 1e-10;

/// `λ^p` for signed `λ` and integer `p ≥ 1`.
#[inline]
fn signed_pow(lambda: f64, p: u32) -> f64 {
    lambda.powi(p as i32)
}

/// `|λ|^p` for integer `p ≥ 1`.
#[inline]
fn abs_pow(lambda: f64, p: u32) -> f64 {
    lambda.abs().powi(p as i32)
}

/// `|λ|^{n/2}`, taking the exact integer-power path for even `n`.
#[inline]
fn abs_pow_half(lambda: f64, n: u32) -> f64 {
    if n % 2 == 0 {
        lambda.abs().powi((n / 2) as i32)
    } else {
        lambda.abs().powf(n as f64 / 2.0)
    }
}

// ---------------------------------------------------------------------------
// Symmetric matrices in dimension 1 and 2
// ---------------------------------------------------------------------------

/// A symmetric matrix in spatial dimension 1 or 2, stored as
/// `[m11, m12, m22]` (the tail unused for d = 1).
///
/// Two-by-two is the largest size the built-in models need, so eigenvalues
/// and the semidefinite square root are closed-form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    d: usize,
    m: [f64; 3],
}

impl SymMat {
    pub fn zero(d: usize) -> Self {
        debug_assert!(d == 1 || d == 2);
        Self { d, m: [0.0; 3] }
    }

    /// One-by-one matrix `[v]`.
    pub fn scalar(v: f64) -> Self {
        Self { d: 1, m: [v, 0.0, 0.0] }
    }

    /// Symmetric two-by-two matrix `[[m11, m12], [m12, m22]]`.
    pub fn sym2(m11: f64, m12: f64, m22: f64) -> Self {
        Self { d: 2, m: [m11, m12, m22] }
    }

    pub fn identity(d: usize) -> Self {
        match d {
            1 => Self::scalar(1.0),
            _ => Self::sym2(1.0, 0.0, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.d && j < self.d);
        match (i, j) {
            (0, 0) => self.m[0],
            (1, 1) => self.m[2],
            _ => self.m[1],
        }
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            d: self.d,
            m: [self.m[0] * t, self.m[1] * t, self.m[2] * t],
        }
    }

    /// Quadratic form `⟨M v | v⟩`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.d);
        if self.d == 1 {
            self.m[0] * v[0] * v[0]
        } else {
            self.m[0] * v[0] * v[0] + 2.0 * self.m[1] * v[0] * v[1] + self.m[2] * v[1] * v[1]
        }
    }

    /// `(λ_min, λ_max)` of the matrix.
    pub fn eigen_range(&self) -> (f64, f64) {
        if self.d == 1 {
            (self.m[0], self.m[0])
        } else {
            let mean = 0.5 * (self.m[0] + self.m[2]);
            let half = 0.5 * (self.m[0] - self.m[2]);
            let r = (half * half + self.m[1] * self.m[1]).sqrt();
            (mean - r, mean + r)
        }
    }

    /// Operator norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        let (lo, hi) = self.eigen_range();
        lo.abs().max(hi.abs())
    }

    /// Matrix product with itself (symmetric since the factor is).
    pub fn square(&self) -> Self {
        if self.d == 1 {
            Self::scalar(self.m[0] * self.m[0])
        } else {
            let [a, b, c] = self.m;
            Self::sym2(a * a + b * b, b * (a + c), b * b + c * c)
        }
    }

    /// Largest absolute entrywise difference from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    /// The semidefinite square root. Eigenvalues in `[−1e−10, 0)` are treated
    /// as rounding noise and clamped; anything more negative is an error.
    pub fn sqrt_psd(&self, lambda: f64) -> Result<Self> {
        let (min_eig, _) = self.eigen_range();
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite {
                lambda,
                eigenvalue: min_eig,
            });
        }
        Ok(self.sqrt_clamped())
    }

    /// Square root with negative eigenvalues clamped to zero. Total, used by
    /// validation so that a violating model still produces a full report.
    pub(crate) fn sqrt_clamped(&self) -> Self {
        if self.d == 1 {
            return Self::scalar(self.m[0].max(0.0).sqrt());
        }
        let [a, b, c] = self.m;
        if b == 0.0 {
            return Self::sym2(a.max(0.0).sqrt(), 0.0, c.max(0.0).sqrt());
        }
        let (lo, hi) = self.eigen_range();
        let p = hi.max(0.0).sqrt();
        let q = lo.max(0.0).sqrt();
        let theta = 0.5 * (2.0 * b).atan2(a - c);
        let (sin, cos) = theta.sin_cos();
        Self::sym2(
            p * cos * cos + q * sin * sin,
            (p - q) * sin * cos,
            p * sin * sin + q * cos * cos,
        )
    }

    /// Entries in row-major order, `d*d` of them.
    pub fn to_dense(&self) -> Vec<f64> {
        if self.d == 1 {
            vec![self.m[0]]
        } else {
            vec![self.m[0], self.m[1], self.m[1], self.m[2]]
        }
    }
}

// ---------------------------------------------------------------------------
// State interval
// ---------------------------------------------------------------------------

/// Closed interval `I = [lo, hi]` of admissible state values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "state interval needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `[−m, m]`.
    pub fn symmetric(m: f64) -> Result<Self> {
        Self::new(-m, m)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn check(&self, v: f64, context: &str) -> Result<()> {
        if !self.contains(v) {
            return Err(Error::OutOfInterval {
                value: v,
                lo: self.lo,
                hi: self.hi,
                context: context.to_string(),
            });
        }
        Ok(())
    }

    /// Midpoints of `n` equal cells covering the interval.
    pub fn grid_midpoints(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let h = self.length() / n as f64;
        let lo = self.lo;
        (0..n).map(move |k| lo + (k as f64 + 0.5) * h)
    }

    /// `n ≥ 2` nodes including both endpoints.
    pub fn grid_nodes(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        debug_assert!(n >= 2);
        let h = self.length() / (n - 1) as f64;
        let lo = self.lo;
        (0..n).map(move |k| lo + k as f64 * h)
    }
}

// ---------------------------------------------------------------------------
// Tabulated models
// ---------------------------------------------------------------------------

/// A user-supplied model given by samples of `f` and `a` on a strictly
/// increasing λ-grid, with linear interpolation in between and constant
/// extrapolation outside. Primitives are exact integrals of the interpolant
/// (`𝔣`, `A`) or cached cell-by-cell quadrature (`Σ`, whose integrand `σ` is
/// a matrix square root and not piecewise polynomial).
#[derive(Debug, Clone)]
pub struct TableModel {
    d: usize,
    knots: Vec<f64>,
    /// `flux[axis][knot]`
    flux: Vec<Vec<f64>>,
    /// Symmetric diffusion entries per knot: d=1 `[m11]`, d=2 `[m11, m12, m22]`.
    diff: Vec<Vec<f64>>,
    /// Primitives at knots, anchored so the value at λ = 0 is 0.
    flux_prim: Vec<Vec<f64>>,
    diff_prim: Vec<Vec<f64>>,
    sigma_prim: Vec<Vec<f64>>,
    label: String,
}

/// Linear interpolation of one channel with constant extrapolation.
fn interp_channel(knots: &[f64], vals: &[f64], lambda: f64) -> f64 {
    let n = knots.len();
    if lambda <= knots[0] {
        return vals[0];
    }
    if lambda >= knots[n - 1] {
        return vals[n - 1];
    }
    let hi = knots.partition_point(|&k| k < lambda).min(n - 1);
    let lo = hi - 1;
    let t = (lambda - knots[lo]) / (knots[hi] - knots[lo]);
    vals[lo] + t * (vals[hi] - vals[lo])
}

/// Exact `∫_{knots[cell]}^{λ} interp` for a λ inside cell `cell..cell+1`,
/// where interp is linear on the cell.
fn partial_linear_integral(knots: &[f64], vals: &[f64], cell: usize, lambda: f64) -> f64 {
    let t = lambda - knots[cell];
    let slope = (vals[cell + 1] - vals[cell]) / (knots[cell + 1] - knots[cell]);
    vals[cell] * t + 0.5 * slope * t * t
}

impl TableModel {
    /// Build from parallel arrays: per knot, the flux vector (length `d`) and
    /// the full row-major diffusion matrix (length `d*d`).
    pub fn from_rows(
        knots: Vec<f64>,
        flux_rows: Vec<Vec<f64>>,
        diff_rows: Vec<Vec<f64>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let label = label.into();
        let m = knots.len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "tabulated model '{label}' needs at least 2 rows, got {m}"
            )));
        }
        if flux_rows.len() != m || diff_rows.len() != m {
            return Err(Error::InvalidArgument(format!(
                "tabulated model '{label}': row counts disagree ({m} knots, {} flux, {} diffusion)",
                flux_rows.len(),
                diff_rows.len()
            )));
        }
        let d = flux_rows[0].len();
        if d == 0 || d > 2 {
            return Err(Error::UnsupportedDimension {
                d,
                context: "tabulated models support spatial dimension 1 or 2",
            });
        }
        for w in knots.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!(
                    "tabulated model '{label}': λ column must be strictly increasing \
                     ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let mut flux = vec![vec![0.0; m]; d];
        let sym_entries = if d == 1 { 1 } else { 3 };
        let mut diff = vec![vec![0.0; m]; sym_entries];
        for (k, (fr, ar)) in flux_rows.iter().zip(&diff_rows).enumerate() {
            if fr.len() != d || ar.len() != d * d {
                return Err(Error::InvalidArgument(format!(
                    "tabulated model '{label}': row {k} has {} flux and {} diffusion entries, \
                     expected {d} and {}",
                    fr.len(),
                    ar.len(),
                    d * d
                )));
            }
            if !knots[k].is_finite()
                || fr.iter().any(|v| !v.is_finite())
                || ar.iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidArgument(format!(
                    "tabulated model '{label}': row {k} contains a non-finite value"
                )));
            }
            for ax in 0..d {
                flux[ax][k] = fr[ax];
            }
            if d == 1 {
                diff[0][k] = ar[0];
            } else {
                if (ar[1] - ar[2]).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated model '{label}': row {k} diffusion matrix is not symmetric \
                         (a12 = {}, a21 = {})",
                        ar[1], ar[2]
                    )));
                }
                diff[0][k] = ar[0];
                diff[1][k] = 0.5 * (ar[1] + ar[2]);
                diff[2][k] = ar[3];
            }
        }

        let mut table = Self {
            d,
            flux_prim: vec![Vec::new(); flux.len()],
            diff_prim: vec![Vec::new(); diff.len()],
            sigma_prim: vec![Vec::new(); diff.len()],
            knots,
            flux,
            diff,
            label,
        };
        for ax in 0..table.flux.len() {
            table.flux_prim[ax] = table.linear_cumulative(&table.flux[ax]);
        }
        for e in 0..table.diff.len() {
            table.diff_prim[e] = table.linear_cumulative(&table.diff[e]);
        }
        for e in 0..table.diff.len() {
            table.sigma_prim[e] = table.sigma_cumulative(e);
        }
        Ok(table)
    }

    /// Load from CSV with columns `λ, f_1..f_d, a_11..a_dd` (3 columns for
    /// d = 1, 7 for d = 2). A non-numeric first row is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let bad = |message: String| Error::BadTable {
            path: path.to_path_buf(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut knots = Vec::new();
        let mut flux_rows = Vec::new();
        let mut diff_rows = Vec::new();
        let mut d: Option<usize> = None;
        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if row_idx == 0 => continue, // header row
                Err(_) => {
                    return Err(bad(format!("row {} contains a non-numeric field", row_idx + 1)))
                }
            };
            let dim = match values.len() {
                3 => 1,
                7 => 2,
                n => {
                    return Err(bad(format!(
                        "row {} has {n} columns; expected 3 (d=1: λ,f,a) or 7 (d=2: λ,f1,f2,a11,a12,a21,a22)",
                        row_idx + 1
                    )))
                }
            };
            if *d.get_or_insert(dim) != dim {
                return Err(bad(format!("row {} changes the column count", row_idx + 1)));
            }
            knots.push(values[0]);
            flux_rows.push(values[1..1 + dim].to_vec());
            diff_rows.push(values[1 + dim..].to_vec());
        }
        if knots.is_empty() {
            return Err(bad("no data rows".to_string()));
        }
        Self::from_rows(knots, flux_rows, diff_rows, path.display().to_string())
            .map_err(|e| match e {
                Error::InvalidArgument(message) => bad(message),
                other => other,
            })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// λ-range covered by the table; also the default state interval.
    pub fn knot_range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Cumulative integral of a piecewise-linear channel at the knots,
    /// anchored to vanish at λ = 0 (trapezoid sums are exact here).
    fn linear_cumulative(&self, vals: &[f64]) -> Vec<f64> {
        let m = self.knots.len();
        let mut cum = vec![0.0; m];
        for k in 1..m {
            let h = self.knots[k] - self.knots[k - 1];
            cum[k] = cum[k - 1] + 0.5 * (vals[k - 1] + vals[k]) * h;
        }
        let at_zero = Self::eval_linear_primitive(&self.knots, vals, &cum, 0.0);
        for c in &mut cum {
            *c -= at_zero;
        }
        cum
    }

    fn eval_linear_primitive(knots: &[f64], vals: &[f64], cum: &[f64], lambda: f64) -> f64 {
        let n = knots.len();
        if lambda <= knots[0] {
            // constant extrapolation below the table
            return cum[0] + vals[0] * (lambda - knots[0]);
        }
        if lambda >= knots[n - 1] {
            return cum[n - 1] + vals[n - 1] * (lambda - knots[n - 1]);
        }
        let hi = knots.partition_point(|&k| k < lambda).min(n - 1);
        let lo = hi - 1;
        cum[lo] + partial_linear_integral(knots, vals, lo, lambda)
    }

    /// Entry `e` of `σ(λ) = sqrt(a(λ))` with negative eigenvalues clamped.
    fn sigma_entry(&self, e: usize, lambda: f64) -> f64 {
        let s = self.diffusion(lambda).sqrt_clamped();
        if self.d == 1 {
            s.m[0]
        } else {
            s.m[e]
        }
    }

    /// Knot-anchored cumulative of a σ entry via per-cell quadrature.
    fn sigma_cumulative(&self, e: usize) -> Vec<f64> {
        let m = self.knots.len();
        let mut cum = vec![0.0; m];
        let f = |s: f64| self.sigma_entry(e, s);
        for k in 1..m {
            cum[k] = cum[k - 1] + adaptive_simpson(&f, self.knots[k - 1], self.knots[k], QUAD_TOL);
        }
        // anchor at λ = 0
        let at_zero = {
            let n = self.knots.len();
            if 0.0 <= self.knots[0] {
                cum[0] + adaptive_simpson(&f, self.knots[0], 0.0, QUAD_TOL)
            } else if 0.0 >= self.knots[n - 1] {
                cum[n - 1] + adaptive_simpson(&f, self.knots[n - 1], 0.0, QUAD_TOL)
            } else {
                let hi = self.knots.partition_point(|&k| k < 0.0).min(n - 1);
                cum[hi - 1] + adaptive_simpson(&f, self.knots[hi - 1], 0.0, QUAD_TOL)
            }
        };
        for c in &mut cum {
            *c -= at_zero;
        }
        cum
    }

    fn eval_sigma_primitive(&self, e: usize, lambda: f64) -> f64 {
        let n = self.knots.len();
        let f = |s: f64| self.sigma_entry(e, s);
        if lambda <= self.knots[0] {
            return self.sigma_prim[e][0] + f(self.knots[0]) * (lambda - self.knots[0]);
        }
        if lambda >= self.knots[n - 1] {
            return self.sigma_prim[e][n - 1] + f(self.knots[n - 1]) * (lambda - self.knots[n - 1]);
        }
        let hi = self.knots.partition_point(|&k| k < lambda).min(n - 1);
        let lo = hi - 1;
        self.sigma_prim[e][lo] + adaptive_simpson(&f, self.knots[lo], lambda, QUAD_TOL)
    }

    fn flux_at(&self, axis: usize, lambda: f64) -> f64 {
        interp_channel(&self.knots, &self.flux[axis], lambda)
    }

    fn diffusion(&self, lambda: f64) -> SymMat {
        if self.d == 1 {
            SymMat::scalar(interp_channel(&self.knots, &self.diff[0], lambda))
        } else {
            SymMat::sym2(
                interp_channel(&self.knots, &self.diff[0], lambda),
                interp_channel(&self.knots, &self.diff[1], lambda),
                interp_channel(&self.knots, &self.diff[2], lambda),
            )
        }
    }

    fn sym_from_channels(&self, per_entry: impl Fn(usize) -> f64) -> SymMat {
        if self.d == 1 {
            SymMat::scalar(per_entry(0))
        } else {
            SymMat::sym2(per_entry(0), per_entry(1), per_entry(2))
        }
    }
}

// ---------------------------------------------------------------------------
// The model type
// ---------------------------------------------------------------------------

/// The concrete benchmark family from the worked two-dimensional example:
/// flux `(λ^l, 0)` and diffusion `diag(0, |λ|^n)` after the linear change of
/// variables that decouples the axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerLawExample {
    pub l: u32,
    pub n: u32,
}

impl PowerLawExample {
    pub fn new(l: u32, n: u32) -> Result<Self> {
        if l == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "power-law exponents must be ≥ 1, got l = {l}, n = {n}"
            )));
        }
        Ok(Self { l, n })
    }

    pub fn model(self) -> CoefficientModel {
        CoefficientModel {
            family: Family::PowerLaw { l: self.l, n: self.n },
            d: 2,
            interval: Interval { lo: -1.0, hi: 1.0 },
        }
    }
}

#[derive(Debug, Clone)]
enum Family {
    PowerLaw { l: u32, n: u32 },
    Burgers,
    Heat { c: f64, d: usize },
    Table(TableModel),
}

/// Flux, diffusion, square root, and primitives of one equation instance.
///
/// All evaluations are pure functions of immutable data, so a model can be
/// shared freely across worker threads.
#[derive(Debug, Clone)]
pub struct CoefficientModel {
    family: Family,
    d: usize,
    interval: Interval,
}

impl CoefficientModel {
    /// The two-dimensional power-law benchmark; see [`PowerLawExample`].
    pub fn power_law(l: u32, n: u32) -> Result<Self> {
        Ok(PowerLawExample::new(l, n)?.model())
    }

    /// Inviscid Burgers in one dimension: `f(λ) = λ`, no diffusion.
    pub fn burgers() -> Self {
        Self {
            family: Family::Burgers,
            d: 1,
            interval: Interval { lo: -1.0, hi: 1.0 },
        }
    }

    /// Pure isotropic diffusion: `f ≡ 0`, `a = c·Id` in dimension `d`.
    pub fn heat(c: f64, d: usize) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "heat coefficient must be finite and ≥ 0, got {c}"
            )));
        }
        if d == 0 || d > 2 {
            return Err(Error::UnsupportedDimension {
                d,
                context: "built-in models support spatial dimension 1 or 2",
            });
        }
        Ok(Self {
            family: Family::Heat { c, d },
            d,
            interval: Interval { lo: -1.0, hi: 1.0 },
        })
    }

    /// Wrap a tabulated model; the state interval defaults to the λ-range of
    /// the table.
    pub fn from_table(table: TableModel) -> Self {
        let (lo, hi) = table.knot_range();
        let d = table.dimension();
        Self {
            family: Family::Table(table),
            d,
            interval: Interval { lo, hi },
        }
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        Ok(Self::from_table(TableModel::from_csv(path)?))
    }

    /// Replace the state interval `I`.
    pub fn with_interval(mut self, interval: Interval) -> Self {
        self.interval = interval;
        self
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Short identifier recorded in run metadata.
    pub fn tag(&self) -> String {
        let mut s = String::new();
        match &self.family {
            Family::PowerLaw { l, n } => write!(s, "powerlaw(l={l},n={n})").unwrap(),
            Family::Burgers => s.push_str("burgers"),
            Family::Heat { c, d } => write!(s, "heat(c={c},d={d})").unwrap(),
            Family::Table(t) => write!(s, "table({})", t.label).unwrap(),
        }
        s
    }

    /// Component `axis` of the flux derivative `f = 𝔣′`.
    pub fn flux_component(&self, axis: usize, lambda: f64) -> f64 {
        debug_assert!(axis < self.d);
        match &self.family {
            Family::PowerLaw { l, .. } => {
                if axis == 0 {
                    signed_pow(lambda, *l)
                } else {
                    0.0
                }
            }
            Family::Burgers => lambda,
            Family::Heat { .. } => 0.0,
            Family::Table(t) => t.flux_at(axis, lambda),
        }
    }

    /// Component `axis` of the flux `𝔣(λ) = ∫_0^λ f`.
    pub fn flux_primitive_component(&self, axis: usize, lambda: f64) -> f64 {
        debug_assert!(axis < self.d);
        match &self.family {
            Family::PowerLaw { l, .. } => {
                if axis == 0 {
                    signed_pow(lambda, l + 1) / (*l as f64 + 1.0)
                } else {
                    0.0
                }
            }
            Family::Burgers => 0.5 * lambda * lambda,
            Family::Heat { .. } => 0.0,
            Family::Table(t) => {
                TableModel::eval_linear_primitive(&t.knots, &t.flux[axis], &t.flux_prim[axis], lambda)
            }
        }
    }

    /// Diffusion matrix `a(λ)`.
    pub fn diffusion(&self, lambda: f64) -> SymMat {
        match &self.family {
            Family::PowerLaw { n, .. } => SymMat::sym2(0.0, 0.0, abs_pow(lambda, *n)),
            Family::Burgers => SymMat::scalar(0.0),
            Family::Heat { c, d } => SymMat::identity(*d).scale(*c),
            Family::Table(t) => t.diffusion(lambda),
        }
    }

    /// Square root `σ(λ)` with `σ·σ = a`. Fails if `a(λ)` is not positive
    /// semidefinite (only possible for tabulated models).
    pub fn sqrt_diffusion(&self, lambda: f64) -> Result<SymMat> {
        match &self.family {
            Family::PowerLaw { n, .. } => Ok(SymMat::sym2(0.0, 0.0, abs_pow_half(lambda, *n))),
            Family::Burgers => Ok(SymMat::scalar(0.0)),
            Family::Heat { c, d } => Ok(SymMat::identity(*d).scale(c.sqrt())),
            Family::Table(t) => t.diffusion(lambda).sqrt_psd(lambda),
        }
    }

    /// Primitive `A(λ) = ∫_0^λ a(s) ds`.
    pub fn diffusion_primitive(&self, lambda: f64) -> SymMat {
        match &self.family {
            Family::PowerLaw { n, .. } => {
                SymMat::sym2(0.0, 0.0, abs_pow(lambda, *n) * lambda / (*n as f64 + 1.0))
            }
            Family::Burgers => SymMat::scalar(0.0),
            Family::Heat { c, d } => SymMat::identity(*d).scale(c * lambda),
            Family::Table(t) => t.sym_from_channels(|e| {
                TableModel::eval_linear_primitive(&t.knots, &t.diff[e], &t.diff_prim[e], lambda)
            }),
        }
    }

    /// Primitive `Σ(λ) = ∫_0^λ σ(s) ds`.
    pub fn sigma_primitive(&self, lambda: f64) -> SymMat {
        match &self.family {
            Family::PowerLaw { n, .. } => SymMat::sym2(
                0.0,
                0.0,
                2.0 * abs_pow_half(lambda, *n) * lambda / (*n as f64 + 2.0),
            ),
            Family::Burgers => SymMat::scalar(0.0),
            Family::Heat { c, d } => SymMat::identity(*d).scale(c.sqrt() * lambda),
            Family::Table(t) => t.sym_from_channels(|e| t.eval_sigma_primitive(e, lambda)),
        }
    }

    /// Hyperbolic part `ξ0 + ⟨f(λ)|ξ̃⟩` (unsquared) and parabolic part
    /// `⟨a(λ)ξ̃|ξ̃⟩` without any validity checks; hot loops validate once
    /// up front and then call this.
    pub(crate) fn symbol_parts(&self, xi0: f64, xi_tilde: &[f64], lambda: f64) -> (f64, f64) {
        let mut hyper = xi0;
        for (ax, &x) in xi_tilde.iter().enumerate() {
            if x != 0.0 {
                hyper += self.flux_component(ax, lambda) * x;
            }
        }
        let parab = self.diffusion(lambda).quad_form(xi_tilde).max(0.0);
        (hyper, parab)
    }

    /// The kinetic symbol `|ξ0 + ⟨f(λ)|ξ̃⟩|² + ⟨a(λ)ξ̃|ξ̃⟩` for a unit
    /// frequency `ξ = (ξ0, ξ̃) ∈ R^{d+1}` and state `λ ∈ I`. Its small-δ
    /// sublevel sets in λ drive the whole regularity analysis.
    pub fn eval_symbol(&self, xi: &[f64], lambda: f64) -> Result<f64> {
        if xi.len() != self.d + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.d + 1,
                got: xi.len(),
                context: "frequency vector (ξ0, ξ̃)",
            });
        }
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { norm });
        }
        self.interval.check(lambda, "symbol evaluation")?;
        let (hyper, parab) = self.symbol_parts(xi[0], &xi[1..], lambda);
        Ok(hyper * hyper + parab)
    }

    /// Largest `|f_axis(λ)|` over `[lo, hi]` — the interface wave speed used
    /// by the CFL computation. Exact for the built-in monomials; for tables
    /// the maximum of the piecewise-linear interpolant sits at a knot or an
    /// endpoint of the range.
    pub fn max_abs_flux_deriv(&self, axis: usize, lo: f64, hi: f64) -> f64 {
        debug_assert!(axis < self.d && lo <= hi);
        let m = lo.abs().max(hi.abs());
        match &self.family {
            Family::PowerLaw { l, .. } => {
                if axis == 0 {
                    abs_pow(m, *l)
                } else {
                    0.0
                }
            }
            Family::Burgers => m,
            Family::Heat { .. } => 0.0,
            Family::Table(t) => {
                let mut best = t.flux_at(axis, lo).abs().max(t.flux_at(axis, hi).abs());
                for (k, &knot) in t.knots.iter().enumerate() {
                    if knot > lo && knot < hi {
                        best = best.max(t.flux[axis][k].abs());
                    }
                }
                best
            }
        }
    }

    /// λ-values where the coefficient functions may have kinks; quadrature
    /// oracles split their integration at these points.
    pub(crate) fn quadrature_breakpoints(&self) -> &[f64] {
        match &self.family {
            Family::Table(t) => &t.knots,
            _ => &[],
        }
    }

    /// Largest spectral norm of `a(λ)` over `[lo, hi]`, for the parabolic
    /// CFL restriction. The top eigenvalue is convex along a linear segment
    /// of matrices, so knots and range endpoints suffice for tables.
    pub fn max_spectral_diffusion(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        let m = lo.abs().max(hi.abs());
        match &self.family {
            Family::PowerLaw { n, .. } => abs_pow(m, *n),
            Family::Burgers => 0.0,
            Family::Heat { c, .. } => *c,
            Family::Table(t) => {
                let mut best = t
                    .diffusion(lo)
                    .spectral_norm()
                    .max(t.diffusion(hi).spectral_norm());
                for (k, &knot) in t.knots.iter().enumerate() {
                    if knot > lo && knot < hi {
                        let sm = t.sym_from_channels(|e| t.diff[e][k]);
                        best = best.max(sm.spectral_norm());
                    }
                }
                best
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Structural validation
// ---------------------------------------------------------------------------

/// Outcome of [`validate_model`]: worst observed violation of each structural
/// requirement over a λ-grid, and the combined verdict.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub grid_size: usize,
    /// Magnitude of the most negative eigenvalue of `a` seen (0 when clean).
    pub max_psd_violation: f64,
    /// Largest entry of `|σ·σ − a|` seen.
    pub max_sqrt_mismatch: f64,
    /// Largest primitive-vs-quadrature mismatch, relative to the largest
    /// value each primitive channel attains on the grid.
    pub max_primitive_mismatch: f64,
    pub pass: bool,
}

/// Check a model's structural requirements numerically on `grid_size` nodes
/// spanning the state interval: `a(λ)` symmetric positive semidefinite,
/// `σ·σ = a`, and the stored primitives `𝔣`, `A`, `Σ` consistent with
/// adaptive quadrature of `f`, `a`, `σ`. Violations are reported, not raised,
/// so a failing model still yields a full diagnosis.
pub fn validate_model(model: &CoefficientModel, grid_size: usize) -> Result<ValidationReport> {
    if grid_size < 16 {
        return Err(Error::InvalidArgument(format!(
            "validation grid must have at least 16 nodes, got {grid_size}"
        )));
    }
    let interval = model.interval();
    let nodes: Vec<f64> = interval.grid_nodes(grid_size).collect();
    let d = model.dimension();

    let mut max_psd: f64 = 0.0;
    let mut max_sqrt: f64 = 0.0;
    for &lambda in &nodes {
        let a = model.diffusion(lambda);
        let (min_eig, _) = a.eigen_range();
        max_psd = max_psd.max(-min_eig);
        // Use the clamped root so a PSD-violating model still produces the
        // sqrt diagnostic instead of an early error.
        let sigma = match &model.family {
            Family::Table(t) => t.diffusion(lambda).sqrt_clamped(),
            _ => model.sqrt_diffusion(lambda).expect("built-in roots are total"),
        };
        max_sqrt = max_sqrt.max(sigma.square().max_abs_diff(&a));
    }

    // Primitive channels: (analytic primitive, integrand) pairs, compared
    // against adaptive Simpson from 0 on every grid node.
    let mut channels: Vec<(Box<dyn Fn(f64) -> f64 + '_>, Box<dyn Fn(f64) -> f64 + '_>)> =
        Vec::new();
    for ax in 0..d {
        channels.push((
            Box::new(move |l| model.flux_primitive_component(ax, l)),
            Box::new(move |l| model.flux_component(ax, l)),
        ));
    }
    let sym_pairs: &[(usize, usize)] = if d == 1 { &[(0, 0)] } else { &[(0, 0), (0, 1), (1, 1)] };
    for &(i, j) in sym_pairs {
        channels.push((
            Box::new(move |l| model.diffusion_primitive(l).get(i, j)),
            Box::new(move |l| model.diffusion(l).get(i, j)),
        ));
        channels.push((
            Box::new(move |l| model.sigma_primitive(l).get(i, j)),
            Box::new(move |l| match &model.family {
                Family::Table(t) => t.diffusion(l).sqrt_clamped().get(i, j),
                _ => model.sqrt_diffusion(l).expect("built-in roots are total").get(i, j),
            }),
        ));
    }

    let breakpoints = model.quadrature_breakpoints();
    let mut max_prim: f64 = 0.0;
    for (primitive, integrand) in &channels {
        let mut max_diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &lambda in &nodes {
            let by_quadrature =
                adaptive_simpson_split(integrand, 0.0, lambda, breakpoints, QUAD_TOL);
            max_diff = max_diff.max((primitive(lambda) - by_quadrature).abs());
            scale = scale.max(by_quadrature.abs());
        }
        max_prim = max_prim.max(max_diff / scale.max(1e-12));
    }

    let pass = max_psd <= PSD_TOL && max_sqrt <= SQRT_TOL && max_prim <= PRIMITIVE_TOL;
    Ok(ValidationReport {
        grid_size,
        max_psd_violation: max_psd.max(0.0),
        max_sqrt_mismatch: max_sqrt,
        max_primitive_mismatch: max_prim,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Weight functions
// ---------------------------------------------------------------------------

/// The polynomial weight `w_N(x) = (1 + |x|²)^{−N}`, used to localize norms
/// on unbounded domains. Integrable over `R^d` precisely when `N > d/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFunction {
    pub exponent: f64,
    pub dimension: usize,
}

impl WeightFunction {
    pub fn new(exponent: f64, dimension: usize) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight exponent must be positive, got {exponent}"
            )));
        }
        if dimension == 0 {
            return Err(Error::UnsupportedDimension {
                d: 0,
                context: "weight functions need dimension ≥ 1",
            });
        }
        Ok(Self { exponent, dimension })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (1.0 + r2).powf(-self.exponent)
    }

    pub fn is_integrable(&self) -> bool {
        self.exponent > self.dimension as f64 / 2.0
    }

    /// The constant against which derivative ratios are audited.
    pub fn derivative_bound(&self) -> f64 {
        2.0 * self.exponent + 1.0
    }
}

/// Finite-difference audit of the weight bounds `|∂_i w| ≤ C·w` and
/// `|∂²_{ij} w| ≤ C·w` with `C = 2N + 1`, plus an integrability probe.
#[derive(Debug, Clone, Copy)]
pub struct WeightAudit {
    pub max_first_ratio: f64,
    pub max_second_ratio: f64,
    pub ratio_bound: f64,
    /// Relative growth of the discrete integral when the box doubles; small
    /// when the weight is integrable.
    pub tail_fraction: f64,
    pub pass: bool,
}

/// Sample `w` and its finite-difference derivatives on `grid` nodes per axis
/// over `[−half_width, half_width]^d`. The ratio bound `2N+1` is what the
/// audit asserts; it holds for the small exponents used in practice
/// (`N ≤ 2`), while larger `N` can exceed it on the second derivative — the
/// measured constant is reported either way.
pub fn validate_weight(w: &WeightFunction, grid: usize, half_width: f64) -> Result<WeightAudit> {
    if grid < 8 || !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight audit needs grid ≥ 8 and positive half-width, got {grid}, {half_width}"
        )));
    }
    let d = w.dimension;
    let shape = vec![grid; d];
    let step = 2.0 * half_width / (grid - 1) as f64;
    let h = 1e-4; // finite-difference offset, small against the O(1) scale of w
    let mut max_first: f64 = 0.0;
    let mut max_second: f64 = 0.0;
    crate::spectral::for_each_index(&shape, |_, idx| {
        let x: Vec<f64> = idx.iter().map(|&i| -half_width + i as f64 * step).collect();
        let w0 = w.eval(&x);
        let mut xp = x.clone();
        let mut xm = x.clone();
        for i in 0..d {
            xp.copy_from_slice(&x);
            xm.copy_from_slice(&x);
            xp[i] += h;
            xm[i] -= h;
            let first = (w.eval(&xp) - w.eval(&xm)) / (2.0 * h);
            max_first = max_first.max(first.abs() / w0);
            for j in 0..d {
                let second = if i == j {
                    (w.eval(&xp) - 2.0 * w0 + w.eval(&xm)) / (h * h)
                } else {
                    let mut xpp = x.clone();
                    let mut xpm = x.clone();
                    let mut xmp = x.clone();
                    let mut xmm = x.clone();
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    (w.eval(&xpp) - w.eval(&xpm) - w.eval(&xmp) + w.eval(&xmm)) / (4.0 * h * h)
                };
                max_second = max_second.max(second.abs() / w0);
            }
        }
    });

    // Integrability probe: discrete integral over the box vs the doubled box.
    let cell = step.powi(d as i32);
    let mut inner = 0.0;
    let mut outer = 0.0;
    let doubled = vec![2 * grid; d];
    crate::spectral::for_each_index(&doubled, |_, idx| {
        let x: Vec<f64> = idx
            .iter()
            .map(|&i| -2.0 * half_width + i as f64 * step)
            .collect();
        let v = w.eval(&x) * cell;
        outer += v;
        if x.iter().all(|&c| c.abs() <= half_width) {
            inner += v;
        }
    });
    let tail_fraction = (outer - inner) / outer.max(1e-300);

    let bound = w.derivative_bound();
    let pass = max_first <= bound
        && max_second <= bound
        && (!w.is_integrable() || tail_fraction < 0.05);
    Ok(WeightAudit {
        max_first_ratio: max_first,
        max_second_ratio: max_second,
        ratio_bound: bound,
        tail_fraction,
        pass,
    })
}

// ---------------------------------------------------------------------------
