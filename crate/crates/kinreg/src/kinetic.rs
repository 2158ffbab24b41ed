//! Kinetic χ-densities, velocity averages, and the parabolic dissipation
//! field.
//!
//! The kinetic reformulation replaces the scalar unknown `u(t,x)` by an
//! indicator-like density in an extra state variable λ,
//!
//! ```text
//!     χ(λ, u) = 1_{λ < u} − 1_{λ < 0}   ∈ {−1, 0, 1},
//! ```
//!
//! together with its one-sided companions `χ₊ = 1_{λ<u}` and `χ₋ = −1_{λ≥u}`.
//! Averaging a density against a weight ρ(λ) collapses it back to a function
//! of `(t, x)`; with ρ ≡ 1 the layer-cake identity recovers `u` itself. The
//! dissipation side of the theory is represented by its computable part: the
//! parabolic density `D = |σ(u)∇u|²` and the chain-rule vector field
//! `V = div Σ(u)`, where `Σ` is the primitive of `σ = a^{1/2}`.
//!
//! Densities are materialized on a uniform midpoint λ-grid, so every
//! indicator is evaluated exactly; the only quadrature error in a velocity
//! average comes from the single λ-cell straddling each jump.

use crate::coeffs::{CoefficientModel, Interval};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::numeric::{adaptive_simpson_split, neumaier_sum};
use crate::solver::SolutionField;

/// Which indicator density to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiVariant {
    /// `χ₊ = 1_{λ < u}`, values in {0, 1}.
    Plus,
    /// `χ₋ = −1_{λ ≥ u}`, values in {−1, 0}.
    Minus,
    /// `χ = 1_{λ<u} − 1_{λ<0}`, values in {−1, 0, 1}.
    Chi,
}

impl ChiVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ChiVariant::Plus => "plus",
            ChiVariant::Minus => "minus",
            ChiVariant::Chi => "chi",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "plus" => Ok(ChiVariant::Plus),
            "minus" => Ok(ChiVariant::Minus),
            "chi" => Ok(ChiVariant::Chi),
            other => Err(Error::InvalidArgument(format!(
                "unknown density variant {other:?}; expected plus, minus, or chi"
            ))),
        }
    }
}

#[inline]
fn indicator(variant: ChiVariant, lambda: f64, u: f64) -> i8 {
    match variant {
        ChiVariant::Plus => (lambda < u) as i8,
        ChiVariant::Minus => -((lambda >= u) as i8),
        ChiVariant::Chi => (lambda < u) as i8 - (lambda < 0.0) as i8,
    }
}

/// Built-in velocity-averaging weights for the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoKind {
    /// ρ ≡ 1: the layer-cake weight, averaging recovers `u`.
    One,
    /// ρ(λ) = 2λ, whose antiderivative is λ²: averaging recovers `u²`.
    Poly2,
    /// A C¹ bump `(1 − z²)²` scaled to vanish at both endpoints of the
    /// state interval.
    Bump,
}

impl RhoKind {
    pub fn name(&self) -> &'static str {
        match self {
            RhoKind::One => "one",
            RhoKind::Poly2 => "poly2",
            RhoKind::Bump => "bump",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "one" => Ok(RhoKind::One),
            "poly2" => Ok(RhoKind::Poly2),
            "bump" => Ok(RhoKind::Bump),
            other => Err(Error::InvalidArgument(format!(
                "unknown averaging weight {other:?}; expected one, poly2, or bump"
            ))),
        }
    }

    /// Evaluate the weight at λ for densities over `states`.
    pub fn eval(&self, states: &Interval, lambda: f64) -> f64 {
        match self {
            RhoKind::One => 1.0,
            RhoKind::Poly2 => 2.0 * lambda,
            RhoKind::Bump => {
                let z = (2.0 * lambda - (states.lo() + states.hi())) / states.length();
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - z * z;
                    w * w
                }
            }
        }
    }
}

/// An indicator density `h(t, x, λ)` sampled on the λ-midpoint grid over the
/// state interval, one value per (snapshot, cell, λ) triple.
///
/// Values are stored as `i8` with λ varying fastest, so a density over many
/// snapshots stays compact; a 64² grid with 33 snapshots and the default 256
/// λ-cells is ~35 MB.
#[derive(Debug, Clone)]
pub struct KineticDensity {
    interval: Interval,
    n_lambda: usize,
    variant: ChiVariant,
    snapshot_count: usize,
    spatial_shape: Vec<usize>,
    values: Vec<i8>,
}

/// Default λ-resolution used by the command line.
pub const DEFAULT_N_LAMBDA: usize = 256;

impl KineticDensity {
    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn n_lambda(&self) -> usize {
        self.n_lambda
    }

    pub fn variant(&self) -> ChiVariant {
        self.variant
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshot_count
    }

    pub fn spatial_shape(&self) -> &[usize] {
        &self.spatial_shape
    }

    fn cells(&self) -> usize {
        self.spatial_shape.iter().product()
    }

    /// Width of one λ-cell.
    pub fn delta_lambda(&self) -> f64 {
        self.interval.length() / self.n_lambda as f64
    }

    /// Midpoint of λ-cell `k`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.interval.lo() + (k as f64 + 0.5) * self.delta_lambda()
    }

    /// The λ-profile at one (snapshot, flat cell) pair.
    pub fn profile(&self, snapshot: usize, cell: usize) -> &[i8] {
        let base = (snapshot * self.cells() + cell) * self.n_lambda;
        &self.values[base..base + self.n_lambda]
    }
}

/// Build the indicator density of a solution on a uniform λ-midpoint grid.
///
/// Every snapshot value must lie inside `states`; an escaping value is
/// reported with the snapshot time and grid cell where it occurs. Indicators
/// are evaluated exactly at the λ-midpoints, so the density itself carries no
/// discretization error — only averaging against a weight does.
pub fn chi_density(
    u: &SolutionField,
    states: &Interval,
    n_lambda: usize,
    variant: ChiVariant,
) -> Result<KineticDensity> {
    if n_lambda < 2 {
        return Err(Error::InvalidArgument(format!(
            "state resolution must be at least 2 lambda cells, got {n_lambda}"
        )));
    }
    let spatial_shape = u.grid().shape().to_vec();
    let cells: usize = spatial_shape.iter().product();
    let snapshot_count = u.times().len();

    for (s, &t) in u.times().iter().enumerate() {
        let snap = u.snapshot(s);
        for (c, &v) in snap.data().iter().enumerate() {
            if !states.contains(v) {
                let idx = unravel(c, &spatial_shape);
                return Err(Error::OutOfInterval {
                    value: v,
                    lo: states.lo(),
                    hi: states.hi(),
                    context: format!("state at t={t}, snapshot {s}, cell {idx:?}"),
                });
            }
        }
    }

    let dl = states.length() / n_lambda as f64;
    let lambdas: Vec<f64> = (0..n_lambda)
        .map(|k| states.lo() + (k as f64 + 0.5) * dl)
        .collect();
    let mut values = Vec::with_capacity(snapshot_count * cells * n_lambda);
    for s in 0..snapshot_count {
        let snap = u.snapshot(s);
        for &v in snap.data() {
            for &lambda in &lambdas {
                values.push(indicator(variant, lambda, v));
            }
        }
    }
    Ok(KineticDensity {
        interval: states.clone(),
        n_lambda,
        variant,
        snapshot_count,
        spatial_shape,
        values,
    })
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; shape.len()];
    for ax in (0..shape.len()).rev() {
        idx[ax] = flat % shape[ax];
        flat /= shape[ax];
    }
    idx
}

/// Average a density against a weight: one spatial field per snapshot,
/// `h̄(t, x) = Σ_k h(t, x, λ_k) ρ(λ_k) Δλ`.
///
/// Midpoint quadrature is exact over λ-cells where the indicator is constant
/// and the weight linear, so for polynomial weights the error is of order
/// `Δλ` from the cells straddling the jumps at `λ = u` and `λ = 0`.
pub fn velocity_average(h: &KineticDensity, rho: impl Fn(f64) -> f64) -> Vec<Field> {
    let dl = h.delta_lambda();
    let weights: Vec<f64> = (0..h.n_lambda).map(|k| rho(h.lambda(k)) * dl).collect();
    let cells = h.cells();
    let mut out = Vec::with_capacity(h.snapshot_count);
    for s in 0..h.snapshot_count {
        let start = s * cells * h.n_lambda;
        let slab = &h.values[start..start + cells * h.n_lambda];
        let data: Vec<f64> = slab
            .chunks_exact(h.n_lambda)
            .map(|profile| {
                profile
                    .iter()
                    .zip(&weights)
                    .map(|(&v, &w)| v as f64 * w)
                    .sum()
            })
            .collect();
        out.push(
            Field::from_vec(&h.spatial_shape, data)
                .expect("density shape was validated at construction"),
        );
    }
    out
}

/// The computable part of the parabolic dissipation: the density
/// `D = ⟨a(u)∇u, ∇u⟩ = |σ(u)∇u|²` and the chain-rule vector field
/// `V = div Σ(u)`, both per snapshot.
#[derive(Debug, Clone)]
pub struct DissipationField {
    times: Vec<f64>,
    cell_volume: f64,
    density: Vec<Field>,
    divergence: Vec<Vec<Field>>,
}

impl DissipationField {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshot_count(&self) -> usize {
        self.times.len()
    }

    /// `D(t_s, ·) ≥ 0` for snapshot `s`.
    pub fn density(&self, snapshot: usize) -> &Field {
        &self.density[snapshot]
    }

    /// Components of `V(t_s, ·) = div Σ(u(t_s, ·))`.
    pub fn divergence(&self, snapshot: usize) -> &[Field] {
        &self.divergence[snapshot]
    }

    /// `∫ D dx` per snapshot.
    pub fn space_integrals(&self) -> Vec<f64> {
        self.density
            .iter()
            .map(|d| self.cell_volume * d.sum())
            .collect()
    }

    /// `∫∫ D dx dt` by the trapezoid rule over the stored snapshot times.
    pub fn time_integral(&self) -> f64 {
        let spatial = self.space_integrals();
        neumaier_sum(
            self.times
                .windows(2)
                .zip(spatial.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])),
        )
    }

    /// `(t, ∫D dx)` rows for the dissipation summary.
    pub fn summary_rows(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .copied()
            .zip(self.space_integrals())
            .collect()
    }
}

/// Second-order central difference of `field` along `axis` on the periodic
/// grid, divided by `2·dx`.
fn central_diff(field: &Field, axis: usize, dx: f64) -> Field {
    let shape = field.shape();
    let n = shape[axis];
    let stride = field.stride(axis);
    let data = field.data();
    let scale = 1.0 / (2.0 * dx);
    let mut out = vec![0.0; data.len()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let i = (flat / stride) % n;
        let next = if i + 1 == n {
            flat + stride - n * stride
        } else {
            flat + stride
        };
        let prev = if i == 0 {
            flat + (n - 1) * stride
        } else {
            flat - stride
        };
        *slot = (data[next] - data[prev]) * scale;
    }
    Field::from_vec(shape, out).expect("shape preserved by stencil")
}

/// Compute the dissipation density and the chain-rule divergence of a
/// solution. Gradients are second-order central differences on the periodic
/// grid; `D` is clamped at zero to absorb the last-ulp noise of the
/// positive-semidefinite quadratic form.
pub fn dissipation_field(
    u: &SolutionField,
    model: &CoefficientModel,
) -> Result<DissipationField> {
    let grid = u.grid();
    let d = grid.dimension();
    if model.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: model.dimension(),
            context: "dissipation model dimension",
        });
    }
    let dxs: Vec<f64> = (0..d).map(|a| grid.dx(a)).collect();

    let mut density = Vec::with_capacity(u.times().len());
    let mut divergence = Vec::with_capacity(u.times().len());
    for s in 0..u.times().len() {
        let snap = u.snapshot(s);
        let grads: Vec<Field> = (0..d).map(|a| central_diff(snap, a, dxs[a])).collect();

        let mut dd = vec![0.0; snap.len()];
        let mut g = vec![0.0; d];
        for (c, slot) in dd.iter_mut().enumerate() {
            for (a, grad) in grads.iter().enumerate() {
                g[a] = grad.data()[c];
            }
            *slot = model.diffusion(snap.data()[c]).quad_form(&g).max(0.0);
        }
        density.push(Field::from_vec(snap.shape(), dd).expect("snapshot shape"));

        // V_i = Σ_j ∂_j Σ_ij(u), differencing each primitive component field.
        let mut sigma_rows: Vec<Vec<f64>> = vec![vec![0.0; snap.len()]; d * d];
        for (c, &v) in snap.data().iter().enumerate() {
            let sp = model.sigma_primitive(v);
            for i in 0..d {
                for j in 0..d {
                    sigma_rows[i * d + j][c] = sp.get(i, j);
                }
            }
        }
        let mut comps = Vec::with_capacity(d);
        for i in 0..d {
            let mut vi = vec![0.0; snap.len()];
            for j in 0..d {
                let comp = Field::from_vec(snap.shape(), sigma_rows[i * d + j].clone())
                    .expect("snapshot shape");
                let deriv = central_diff(&comp, j, dxs[j]);
                for (slot, &dv) in vi.iter_mut().zip(deriv.data()) {
                    *slot += dv;
                }
            }
            comps.push(Field::from_vec(snap.shape(), vi).expect("snapshot shape"));
        }
        divergence.push(comps);
    }

    Ok(DissipationField {
        times: u.times().to_vec(),
        cell_volume: grid.cell_volume(),
        density,
        divergence,
    })
}

/// Per-snapshot L¹ defect of the discrete chain rule
/// `div Σ^ψ(u) = √ψ(u) · div Σ(u)`, where `Σ^ψ(λ) = ∫₀^λ √ψ σ dζ`.
///
/// Both sides are evaluated with the same central differences, so for smooth
/// `u` and continuous `ψ ≥ 0` the defect vanishes under grid refinement; at
/// fixed resolution it measures the commutation error of differencing with
/// the nonlinear change of variables.
pub fn chain_rule_defect(
    u: &SolutionField,
    model: &CoefficientModel,
    psi: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let grid = u.grid();
    let d = grid.dimension();
    if model.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: model.dimension(),
            context: "chain-rule model dimension",
        });
    }
    // Surface a non-factorable diffusion table before quadrature sees it.
    for lambda in model.interval().grid_nodes(65) {
        model.sqrt_diffusion(lambda)?;
    }
    let breakpoints = {
        let mut b = model.quadrature_breakpoints().to_vec();
        b.push(0.0);
        b
    };
    let sqrt_psi = |z: f64| psi(z).max(0.0).sqrt();
    let weighted_primitive = |i: usize, j: usize, lambda: f64| -> f64 {
        let f = |z: f64| {
            sqrt_psi(z)
                * model
                    .sqrt_diffusion(z)
                    .map(|m| m.get(i, j))
                    .unwrap_or(f64::NAN)
        };
        adaptive_simpson_split(&f, 0.0, lambda, &breakpoints, 1e-10)
    };

    let dxs: Vec<f64> = (0..d).map(|a| grid.dx(a)).collect();
    let base = dissipation_field(u, model)?;
    let mut defects = Vec::with_capacity(u.times().len());
    for s in 0..u.times().len() {
        let snap = u.snapshot(s);
        let mut l1 = 0.0;
        for i in 0..d {
            // div Σ^ψ(u) component i.
            let mut divw = vec![0.0; snap.len()];
            for j in 0..d {
                let comp = Field::from_vec(
                    snap.shape(),
                    snap.data()
                        .iter()
                        .map(|&v| weighted_primitive(i, j, v))
                        .collect(),
                )
                .expect("snapshot shape");
                let deriv = central_diff(&comp, j, dxs[j]);
                for (slot, &dv) in divw.iter_mut().zip(deriv.data()) {
                    *slot += dv;
                }
            }
            let vi = &base.divergence(s)[i];
            for (c, &left) in divw.iter().enumerate() {
                let right = sqrt_psi(snap.data()[c]) * vi.data()[c];
                l1 += (left - right).abs();
            }
        }
        let value = grid.cell_volume() * l1;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                step: s,
                context: "chain-rule defect".to_string(),
            });
        }
        defects.push(value);
    }
    Ok(defects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::TableModel;
    use crate::solver::{run, GridSpec, InitialData, RunOptions};

    fn constant_solution(value: f64, nx: &[usize]) -> SolutionField {
        let grid = GridSpec::new(nx, 1.0, 1.0, 0.4).unwrap();
        let snap = Field::from_vec(nx, vec![value; nx.iter().product()]).unwrap();
        SolutionField::from_parts(grid, vec![0.0], vec![snap], 0, None, "test").unwrap()
    }

    fn sine_solution(n: usize, amp: f64) -> SolutionField {
        let grid = GridSpec::new(&[n], 1.0, 1.0, 0.4).unwrap();
        let snap = Field::from_fn(&[n], |idx| {
            let x = -1.0 + (idx[0] as f64 + 0.5) * 2.0 / n as f64;
            amp * (std::f64::consts::PI * x).sin()
        })
        .unwrap();
        SolutionField::from_parts(grid, vec![0.0], vec![snap], 0, None, "test").unwrap()
    }

    #[test]
    fn chi_of_zero_state_vanishes() {
        let u = constant_solution(0.0, &[8, 8]);
        let states = Interval::symmetric(1.0).unwrap();
        let h = chi_density(&u, &states, 64, ChiVariant::Chi).unwrap();
        for c in 0..64 {
            assert!(h.profile(0, c).iter().all(|&v| v == 0));
        }
        // χ₊ of the zero state is the indicator of λ < 0, not zero.
        let hp = chi_density(&u, &states, 64, ChiVariant::Plus).unwrap();
        assert_eq!(hp.profile(0, 0).iter().map(|&v| v as i32).sum::<i32>(), 32);
    }

    #[test]
    fn layer_cake_for_constant_half() {
        let u = constant_solution(0.5, &[6]);
        let states = Interval::symmetric(1.0).unwrap();
        let h = chi_density(&u, &states, 400, ChiVariant::Chi).unwrap();
        let avg = velocity_average(&h, |_| 1.0);
        let dl = h.delta_lambda();
        assert!((dl - 0.005).abs() < 1e-15);
        for &v in avg[0].data() {
            assert!((v - 0.5).abs() <= 0.005, "layer cake gave {v}");
        }
    }

    #[test]
    fn plus_minus_sum_is_sign() {
        // sgn with the convention sgn(0) = −1, matching strict λ < u.
        let n = 16;
        let grid = GridSpec::new(&[n, n], 1.0, 1.0, 0.4).unwrap();
        let snap = Field::from_fn(&[n, n], |idx| {
            let x = -1.0 + (idx[0] as f64 + 0.5) * 2.0 / n as f64;
            let y = -1.0 + (idx[1] as f64 + 0.5) * 2.0 / n as f64;
            0.7 * (2.1 * x).sin() * (1.3 * y).cos()
        })
        .unwrap();
        let u = SolutionField::from_parts(grid, vec![0.0], vec![snap.clone()], 0, None, "test")
            .unwrap();
        let states = Interval::symmetric(1.0).unwrap();
        let hp = chi_density(&u, &states, 97, ChiVariant::Plus).unwrap();
        let hm = chi_density(&u, &states, 97, ChiVariant::Minus).unwrap();
        for c in 0..n * n {
            let v = snap.data()[c];
            for k in 0..97 {
                let lambda = hp.lambda(k);
                let sgn = if v - lambda > 0.0 { 1 } else { -1 };
                assert_eq!(hp.profile(0, c)[k] + hm.profile(0, c)[k], sgn);
            }
        }
    }

    #[test]
    fn plus_variant_is_monotone_staircase() {
        let u = sine_solution(24, 0.8);
        let states = Interval::symmetric(1.0).unwrap();
        let h = chi_density(&u, &states, 128, ChiVariant::Plus).unwrap();
        for c in 0..24 {
            let p = h.profile(0, c);
            assert!(p.windows(2).all(|w| w[0] >= w[1]), "not a staircase");
            assert!(p.iter().all(|&v| v == 0 || v == 1));
        }
    }

    #[test]
    fn layer_cake_recovers_state_to_one_cell() {
        let u = sine_solution(32, 0.8);
        let states = Interval::symmetric(1.0).unwrap();
        let h = chi_density(&u, &states, 512, ChiVariant::Chi).unwrap();
        let avg = velocity_average(&h, |_| 1.0);
        let dl = h.delta_lambda();
        for (c, &v) in u.snapshot(0).data().iter().enumerate() {
            assert!(
                (avg[0].data()[c] - v).abs() <= dl,
                "cell {c}: recovered {} vs {v}",
                avg[0].data()[c]
            );
        }
    }

    #[test]
    fn antiderivative_oracle_for_linear_weight() {
        // ∫ χ(λ,u) ρ(λ) dλ = R(u) − R(0) with R an antiderivative of ρ;
        // for ρ = 2λ that is u². Composite midpoint quadrature is exact for
        // linear integrands on full cells, so only the jump cells contribute.
        let u = sine_solution(32, 0.9);
        let states = Interval::symmetric(1.0).unwrap();
        let h = chi_density(&u, &states, 400, ChiVariant::Chi).unwrap();
        let avg = velocity_average(&h, |l| 2.0 * l);
        let dl = h.delta_lambda();
        for (c, &v) in u.snapshot(0).data().iter().enumerate() {
            assert!(
                (avg[0].data()[c] - v * v).abs() <= 2.5 * dl,
                "cell {c}: {} vs {}",
                avg[0].data()[c],
                v * v
            );
        }
    }

    #[test]
    fn disjoint_support_average_vanishes_exactly() {
        // Weight supported in (0, 1), states all ≤ 0: χ lives in [u, 0).
        let n = 20;
        let grid = GridSpec::new(&[n], 1.0, 1.0, 0.4).unwrap();
        let snap = Field::from_fn(&[n], |idx| {
            let x = -1.0 + (idx[0] as f64 + 0.5) * 2.0 / n as f64;
            -0.3 - 0.2 * (2.0 * x).sin().abs()
        })
        .unwrap();
        let u = SolutionField::from_parts(grid, vec![0.0], vec![snap], 0, None, "test").unwrap();
        let states = Interval::symmetric(1.0).unwrap();
        let h = chi_density(&u, &states, 256, ChiVariant::Chi).unwrap();
        let bump = |l: f64| {
            if l <= 0.0 || l >= 1.0 {
                0.0
            } else {
                let z = 2.0 * l - 1.0;
                (1.0 - z * z).powi(2)
            }
        };
        let avg = velocity_average(&h, bump);
        assert!(avg[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rho_kind_names_and_shapes() {
        let states = Interval::symmetric(1.0).unwrap();
        assert_eq!(RhoKind::from_name("poly2").unwrap(), RhoKind::Poly2);
        assert!(RhoKind::from_name("gauss").is_err());
        for kind in [RhoKind::One, RhoKind::Poly2, RhoKind::Bump] {
            assert_eq!(RhoKind::from_name(kind.name()).unwrap(), kind);
        }
        assert_eq!(RhoKind::One.eval(&states, 0.3), 1.0);
        assert_eq!(RhoKind::Poly2.eval(&states, 0.3), 0.6);
        assert_eq!(RhoKind::Bump.eval(&states, -1.0), 0.0);
        assert_eq!(RhoKind::Bump.eval(&states, 1.0), 0.0);
        assert_eq!(RhoKind::Bump.eval(&states, 0.0), 1.0);
        assert!(RhoKind::Bump.eval(&states, 0.5) > 0.0);
    }

    #[test]
    fn range_escape_reports_snapshot_and_cell() {
        let u = constant_solution(1.5, &[4, 4]);
        let states = Interval::symmetric(1.0).unwrap();
        let err = chi_density(&u, &states, 64, ChiVariant::Chi).unwrap_err();
        match err {
            Error::OutOfInterval { value, context, .. } => {
                assert_eq!(value, 1.5);
                assert!(context.contains("snapshot 0"), "context: {context}");
                assert!(context.contains("cell"), "context: {context}");
            }
            other => panic!("expected out-of-interval, got {other:?}"),
        }
    }

    #[test]
    fn dissipation_of_constant_state_vanishes() {
        let model = CoefficientModel::power_law(1, 1).unwrap();
        let u = constant_solution(0.25, &[12, 12]);
        let diss = dissipation_field(&u, &model).unwrap();
        assert_eq!(diss.density(0).max_abs(), 0.0);
        for comp in diss.divergence(0) {
            assert_eq!(comp.max_abs(), 0.0);
        }
        assert_eq!(diss.space_integrals()[0], 0.0);
    }

    #[test]
    fn heat_sine_dissipation_matches_cosine_squared() {
        // a ≡ 1, u = sin(πx) on [−1, 1]: D = |∇u|² = π² cos²(πx) up to the
        // second-order error of the central difference.
        let model = CoefficientModel::heat(1.0, 1).unwrap();
        let pi = std::f64::consts::PI;
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&n| {
                let u = sine_solution(n, 1.0);
                let diss = dissipation_field(&u, &model).unwrap();
                let mut worst = 0.0f64;
                for (c, &dv) in diss.density(0).data().iter().enumerate() {
                    let x = -1.0 + (c as f64 + 0.5) * 2.0 / n as f64;
                    let exact = (pi * (pi * x).cos()).powi(2);
                    worst = worst.max((dv - exact).abs());
                }
                worst
            })
            .collect();
        assert!(errs[0] < 0.05, "n=64 error {}", errs[0]);
        assert!(errs[1] < 0.3 * errs[0], "not second order: {errs:?}");
    }

    #[test]
    fn one_dimensional_density_matches_divergence_squared() {
        // Diagonal σ in d = 1: D = (σ(u) ∂u)² and V = ∂(Σ(u)) agree to
        // discretization error. The table diffusion vanishes at λ = 0, so σ
        // has a square-root kink there and refinement gains only first order
        // where u crosses zero; halving Δx must at least halve the L¹ gap.
        let knots: Vec<f64> = (0..=16).map(|k| -1.0 + k as f64 / 8.0).collect();
        let flux_rows = vec![vec![0.0]; knots.len()];
        let diff_rows: Vec<Vec<f64>> = knots.iter().map(|&l| vec![l * l]).collect();
        let table = TableModel::from_rows(knots, flux_rows, diff_rows, "quadratic-table").unwrap();
        let model = CoefficientModel::from_table(table);
        let gaps: Vec<f64> = [48usize, 96]
            .iter()
            .map(|&n| {
                let u = sine_solution(n, 0.9);
                let diss = dissipation_field(&u, &model).unwrap();
                let v = diss.divergence(0)[0].clone();
                let dvol = 2.0 / n as f64;
                let gap: f64 = diss
                    .density(0)
                    .data()
                    .iter()
                    .zip(v.data())
                    .map(|(&dd, &vv)| (dd - vv * vv).abs())
                    .sum();
                gap * dvol
            })
            .collect();
        assert!(gaps[1] < 0.51 * gaps[0], "gaps {gaps:?}");
        assert!(gaps[1] < 0.05, "residual gap too large: {}", gaps[1]);
    }

    #[test]
    fn energy_balance_bounds_total_dissipation() {
        // Deterministic run: the discrete entropy balance gives
        // ∫∫ D dx dt ≤ ½‖u₀‖₂² with room to spare (numerical viscosity only
        // adds dissipation on the left side of the inequality).
        let model = CoefficientModel::power_law(1, 1).unwrap();
        let grid = GridSpec::new(&[32, 32], 1.0, 0.1, 0.4).unwrap();
        let init = InitialData::Bump {
            amplitude: 0.5,
            radius: 0.8,
            offset: vec![0.0, 0.0],
        };
        let sol = run(&model, &grid, &init, None, &RunOptions::default()).unwrap();
        let diss = dissipation_field(&sol, &model).unwrap();
        for s in 0..diss.snapshot_count() {
            assert!(diss.density(s).min() >= 0.0);
        }
        let half_l2_sq = {
            let row = &sol.summary()[0];
            0.5 * row.l2 * row.l2
        };
        let total = diss.time_integral();
        assert!(total >= 0.0);
        assert!(
            total <= half_l2_sq + 1e-9,
            "dissipation {total} exceeds energy budget {half_l2_sq}"
        );
    }

    #[test]
    fn chain_rule_defect_shrinks_under_refinement() {
        // ψ(λ) = λ² on the state interval: Σ^ψ(λ) = ∫₀^λ |ζ| dζ for the heat
        // model, and the defect against √ψ(u)·V is pure discretization error.
        let model = CoefficientModel::heat(1.0, 1).unwrap();
        let psi = |l: f64| l * l;
        let coarse = chain_rule_defect(&sine_solution(64, 0.6), &model, psi).unwrap()[0];
        let fine = chain_rule_defect(&sine_solution(128, 0.6), &model, psi).unwrap()[0];
        assert!(fine < 0.5 * coarse, "defects: {coarse} → {fine}");
        assert!(fine < 0.01, "defect too large: {fine}");
    }

    #[test]
    fn dissipation_rejects_mismatched_dimension() {
        let model = CoefficientModel::heat(1.0, 2).unwrap();
        let u = constant_solution(0.0, &[16]);
        assert!(matches!(
            dissipation_field(&u, &model),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
