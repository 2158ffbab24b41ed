//! Single time steps: local Lax–Friedrichs convection, conservative central
//! diffusion of the primitive `A(u)`, and the Euler–Maruyama noise add-on.

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::noise::{noise_increment, NoiseModel, SpatialBasis, WienerPath};
use crate::spectral::for_each_index;

use super::GridSpec;

/// Verify the state is finite and inside the model's interval `I`; the
/// offending value and step index end up in the error.
pub(crate) fn check_state(model: &CoefficientModel, u: &Field, step: usize) -> Result<()> {
    if let Some(bad) = u.data().iter().find(|v| !v.is_finite()) {
        let _ = bad;
        return Err(Error::NonFinite {
            step,
            context: "solver state".to_string(),
        });
    }
    let i = model.interval();
    let (lo, hi) = (i.lo(), i.hi());
    let (umin, umax) = (u.min(), u.max());
    if umin < lo || umax > hi {
        let value = if umin < lo { umin } else { umax };
        return Err(Error::OutOfInterval {
            value,
            lo,
            hi,
            context: format!("solver state at step {step}"),
        });
    }
    Ok(())
}

fn check_cfl(model: &CoefficientModel, grid: &GridSpec, u: &Field, dt: f64, step: usize) -> Result<()> {
    let dt_max = grid.stable_dt(model, u.min(), u.max());
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::CflViolation { step, dt, dt_max });
    }
    Ok(())
}

/// Does the diffusion matrix carry off-diagonal entries anywhere on `I`?
/// Only tabulated models can; the built-in families are diagonal.
fn has_cross_diffusion(model: &CoefficientModel) -> bool {
    if model.dimension() < 2 {
        return false;
    }
    model
        .interval()
        .grid_nodes(17)
        .any(|lambda| model.diffusion(lambda).get(0, 1) != 0.0)
}

/// Accumulate `−(F_{i+1/2} − F_{i−1/2})/Δx + (G_{i+1/2} − G_{i−1/2})/Δx`
/// along one axis into `rhs`, with `F` the Rusanov flux of `𝔣` and
/// `G = ΔA(u)/Δx` the diffusive interface flux.
fn accumulate_axis(
    model: &CoefficientModel,
    grid: &GridSpec,
    u: &Field,
    axis: usize,
    rhs: &mut [f64],
) {
    let shape = u.shape();
    let n = shape[axis];
    let stride = u.stride(axis);
    let dx = grid.dx(axis);

    // per-cell values of the conserved flux 𝔣 and the diffusion primitive A
    let vals = u.data();
    let fvals: Vec<f64> = vals
        .iter()
        .map(|&v| model.flux_primitive_component(axis, v))
        .collect();
    let avals: Vec<f64> = vals
        .iter()
        .map(|&v| model.diffusion_primitive(v).get(axis, axis))
        .collect();

    for_each_index(shape, |flat, idx| {
        let up = if idx[axis] + 1 < n {
            flat + stride
        } else {
            flat - (n - 1) * stride
        };
        let (ul, ur) = (vals[flat], vals[up]);
        let speed = model.max_abs_flux_deriv(axis, ul.min(ur), ul.max(ur));
        let f_hat = 0.5 * (fvals[flat] + fvals[up]) - 0.5 * speed * (ur - ul);
        let g_hat = (avals[up] - avals[flat]) / dx;
        let net = (-f_hat + g_hat) / dx;
        rhs[flat] += net;
        rhs[up] -= net;
    });
}

/// Mixed second derivative `2·∂_1∂_2 A_{12}(u)` by centered cross
/// differences (tabulated anisotropic diffusions only). The four-point
/// stencil telescopes over the periodic grid, so mass stays conserved.
fn accumulate_cross(model: &CoefficientModel, grid: &GridSpec, u: &Field, rhs: &mut [f64]) {
    let shape = u.shape();
    let (n0, n1) = (shape[0], shape[1]);
    let a12: Vec<f64> = u
        .data()
        .iter()
        .map(|&v| model.diffusion_primitive(v).get(0, 1))
        .collect();
    let scale = 2.0 / (4.0 * grid.dx(0) * grid.dx(1));
    for i in 0..n0 {
        let ip = (i + 1) % n0;
        let im = (i + n0 - 1) % n0;
        for j in 0..n1 {
            let jp = (j + 1) % n1;
            let jm = (j + n1 - 1) % n1;
            rhs[i * n1 + j] += scale
                * (a12[ip * n1 + jp] - a12[ip * n1 + jm] - a12[im * n1 + jp]
                    + a12[im * n1 + jm]);
        }
    }
}

/// One explicit step of the deterministic scheme. Fails if the state has
/// left `I`, the step size violates the CFL limit for the state's current
/// range, or the update produced non-finite values.
pub fn step_deterministic(
    model: &CoefficientModel,
    grid: &GridSpec,
    u: &Field,
    dt: f64,
    step: usize,
) -> Result<Field> {
    check_state(model, u, step)?;
    check_cfl(model, grid, u, dt, step)?;
    let mut rhs = vec![0.0; u.len()];
    for axis in 0..grid.dimension() {
        accumulate_axis(model, grid, u, axis, &mut rhs);
    }
    if has_cross_diffusion(model) {
        accumulate_cross(model, grid, u, &mut rhs);
    }
    let data: Vec<f64> = u
        .data()
        .iter()
        .zip(&rhs)
        .map(|(&v, &r)| v + dt * r)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step,
            context: "deterministic update".to_string(),
        });
    }
    Field::from_vec(u.shape(), data)
}

/// Deterministic step followed by the Euler–Maruyama increment
/// `B(u^m)ΔW^m`, with the noise coefficients evaluated at the pre-step
/// state (left-point rule, preserving adaptedness).
#[allow(clippy::too_many_arguments)]
pub fn step_stochastic(
    model: &CoefficientModel,
    nm: &NoiseModel,
    basis: &SpatialBasis,
    path: &WienerPath,
    grid: &GridSpec,
    u: &Field,
    dt: f64,
    step: usize,
) -> Result<Field> {
    let inc = noise_increment(nm, basis, path, step, u)?;
    let mut next = step_deterministic(model, grid, u, dt, step)?;
    for (a, &b) in next.data_mut().iter_mut().zip(inc.data()) {
        *a += b;
    }
    if next.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step,
            context: "stochastic update".to_string(),
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::TableModel;
    use crate::noise::{SpatialProfileKind, StateProfile};
    use approx::assert_abs_diff_eq;

    #[test]
    fn oversized_steps_are_caught() {
        let model = CoefficientModel::burgers();
        let grid = GridSpec::new(&[32], 1.0, 0.1, 0.4).unwrap();
        let u = Field::from_fn(&[32], |idx| {
            0.9 * (std::f64::consts::PI * (idx[0] as f64 / 16.0 - 1.0)).sin()
        })
        .unwrap();
        let dt_max = grid.stable_dt(&model, u.min(), u.max());
        assert!(step_deterministic(&model, &grid, &u, dt_max * 0.9, 0).is_ok());
        let err = step_deterministic(&model, &grid, &u, dt_max * 10.0, 3).unwrap_err();
        match err {
            Error::CflViolation { step, dt, dt_max: lim } => {
                assert_eq!(step, 3);
                assert!(dt > lim);
            }
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_states_are_caught() {
        let model = CoefficientModel::heat(1.0, 1).unwrap();
        let grid = GridSpec::new(&[8], 1.0, 0.1, 0.4).unwrap();
        let mut data = vec![0.0; 8];
        data[5] = f64::NAN;
        let u = Field::from_vec(&[8], data).unwrap();
        assert!(matches!(
            step_deterministic(&model, &grid, &u, 1e-4, 2),
            Err(Error::NonFinite { step: 2, .. })
        ));
    }

    /// Constant-coefficient anisotropic table: a = [[1, 0.3], [0.3, 1]].
    fn cross_table() -> CoefficientModel {
        let knots = vec![-1.0, 1.0];
        let flux = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let diff = vec![vec![1.0, 0.3, 0.3, 1.0], vec![1.0, 0.3, 0.3, 1.0]];
        CoefficientModel::from_table(
            TableModel::from_rows(knots, flux, diff, "anisotropic").unwrap(),
        )
    }

    #[test]
    fn cross_diffusion_matches_the_manufactured_solution() {
        // u = sin(πx)sin(πy): div(a∇u) = Δu + 0.6·∂x∂y u,
        // i.e. −2π²·u + 0.6π²·cos(πx)cos(πy).
        let model = cross_table();
        assert!(super::has_cross_diffusion(&model));
        let grid = GridSpec::new(&[64, 64], 1.0, 0.01, 0.4).unwrap();
        let pi = std::f64::consts::PI;
        let u = Field::from_fn(&[64, 64], |idx| {
            let x = -1.0 + (idx[0] as f64 + 0.5) * grid.dx(0);
            let y = -1.0 + (idx[1] as f64 + 0.5) * grid.dx(1);
            0.5 * (pi * x).sin() * (pi * y).sin()
        })
        .unwrap();
        let dt = grid.stable_dt(&model, -1.0, 1.0) * 0.5;
        let next = step_deterministic(&model, &grid, &u, dt, 0).unwrap();
        let mut max_err: f64 = 0.0;
        for i in 0..64 {
            for j in 0..64 {
                let x = -1.0 + (i as f64 + 0.5) * grid.dx(0);
                let y = -1.0 + (j as f64 + 0.5) * grid.dx(1);
                let uv = 0.5 * (pi * x).sin() * (pi * y).sin();
                let exact_rhs =
                    -2.0 * pi * pi * uv + 0.6 * pi * pi * 0.5 * (pi * x).cos() * (pi * y).cos();
                let got_rhs = (next.data()[i * 64 + j] - u.data()[i * 64 + j]) / dt;
                max_err = max_err.max((got_rhs - exact_rhs).abs());
            }
        }
        // second-order stencils on a 64² grid: errors well below the O(1)
        // magnitude of the right-hand side
        assert!(max_err < 0.2, "max rhs error {max_err}");
        // and the four-point cross stencil must not create mass
        let m0: f64 = u.data().iter().sum();
        let m1: f64 = next.data().iter().sum();
        assert_abs_diff_eq!(m0 / 4096.0, m1 / 4096.0, epsilon = 1e-13);
    }

    #[test]
    fn stochastic_step_is_deterministic_step_plus_presampled_increment() {
        let model = CoefficientModel::heat(0.5, 1).unwrap();
        let grid = GridSpec::new(&[24], 1.0, 0.05, 0.4).unwrap();
        let nm = NoiseModel::new(4, StateProfile::BoundedLinear, SpatialProfileKind::Fourier, 9);
        let basis = nm.sample_basis(&[24], 1.0).unwrap();
        let ts = grid.time_stepping(&model).unwrap();
        let path = WienerPath::sample(&nm, 0.0, ts.dt, ts.steps, 2).unwrap();
        let u = Field::from_fn(&[24], |idx| 0.4 * (idx[0] as f64 * 0.3).sin()).unwrap();
        let got = step_stochastic(&model, &nm, &basis, &path, &grid, &u, ts.dt, 1).unwrap();
        let det = step_deterministic(&model, &grid, &u, ts.dt, 1).unwrap();
        let inc = noise_increment(&nm, &basis, &path, 1, &u).unwrap();
        for i in 0..24 {
            assert_eq!(got.data()[i], det.data()[i] + inc.data()[i]);
        }
    }
}
