//! Entropy-stable finite-volume solver for
//! `∂_t u + div 𝔣(u) = div(a(u)∇u) + B(u)Ẇ`
//! on a periodic box `[−X, X]^d`, `d ∈ {1, 2}`.
//!
//! The spatial discretization is a local Lax–Friedrichs (Rusanov) flux for
//! the convection and conservative central differencing of the diffusion
//! primitive `A(u) = ∫ a`; time stepping is explicit first order with a
//! combined hyperbolic/parabolic CFL restriction, plus an Euler–Maruyama
//! noise increment for stochastic paths (Lie splitting: deterministic
//! substep, then forcing sampled at the pre-step state).

mod init;
mod io;
mod stepping;

pub use init::InitialData;
pub use io::{read_snapshots, write_snapshots, write_summary_csv, SnapshotFile};
pub use stepping::{step_deterministic, step_stochastic};

pub(crate) use io::atomic_write;

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::noise::NoiseModel;
use crate::numeric::neumaier_sum;

/// Geometry and stepping limits of a periodic solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    d: usize,
    nx: Vec<usize>,
    half_width: f64,
    t_final: f64,
    cfl_factor: f64,
}

/// The derived time discretization: `steps` uniform steps of length `dt`
/// covering `[0, T]`, with `dt` at or below the CFL limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepping {
    pub dt: f64,
    pub steps: usize,
    /// The raw stability limit the step was derived from.
    pub dt_limit: f64,
}

impl GridSpec {
    pub fn new(
        nx: &[usize],
        half_width: f64,
        t_final: f64,
        cfl_factor: f64,
    ) -> Result<Self> {
        let d = nx.len();
        if !(1..=2).contains(&d) {
            return Err(Error::UnsupportedDimension {
                d,
                context: "solver grids",
            });
        }
        if let Some(&n) = nx.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 cells per axis for the stencils, got {n}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time horizon must be positive, got {t_final}"
            )));
        }
        if !(cfl_factor > 0.0 && cfl_factor <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "CFL factor must lie in (0, 0.5], got {cfl_factor}"
            )));
        }
        Ok(Self {
            d,
            nx: nx.to_vec(),
            half_width,
            t_final,
            cfl_factor,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> &[usize] {
        &self.nx
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn cfl_factor(&self) -> f64 {
        self.cfl_factor
    }

    pub fn dx(&self, axis: usize) -> f64 {
        2.0 * self.half_width / self.nx[axis] as f64
    }

    pub fn min_dx(&self) -> f64 {
        (0..self.d).map(|a| self.dx(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|a| self.dx(a)).product()
    }

    /// Cell-center coordinate of a multi-index.
    pub fn cell_center(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| -self.half_width + (i as f64 + 0.5) * self.dx(a))
            .collect()
    }

    /// Largest stable time step for states ranging over `[lo, hi]`:
    /// `cfl · min(Δx/|f|_max, Δx²/(2d·‖a‖_max))`, where `|f|` is the
    /// Euclidean norm of the characteristic speed vector. Falls back to
    /// `cfl·Δx` when both terms are inactive (trivial dynamics).
    pub fn stable_dt(&self, model: &CoefficientModel, lo: f64, hi: f64) -> f64 {
        let h = self.min_dx();
        let speed = (0..self.d)
            .map(|a| model.max_abs_flux_deriv(a, lo, hi).powi(2))
            .sum::<f64>()
            .sqrt();
        let diffusion = model.max_spectral_diffusion(lo, hi);
        let hyper = if speed > 0.0 { h / speed } else { f64::INFINITY };
        let parab = if diffusion > 0.0 {
            h * h / (2.0 * self.d as f64 * diffusion)
        } else {
            f64::INFINITY
        };
        let base = hyper.min(parab);
        self.cfl_factor * if base.is_finite() { base } else { h }
    }

    /// Uniform time discretization of `[0, T]` from the CFL limit over the
    /// model's whole state interval.
    pub fn time_stepping(&self, model: &CoefficientModel) -> Result<TimeStepping> {
        let i = model.interval();
        let dt_limit = self.stable_dt(model, i.lo(), i.hi());
        if !(dt_limit.is_finite() && dt_limit > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "degenerate CFL limit {dt_limit} for model {}",
                model.tag()
            )));
        }
        let steps = (self.t_final / dt_limit).ceil().max(1.0) as usize;
        Ok(TimeStepping {
            dt: self.t_final / steps as f64,
            steps,
            dt_limit,
        })
    }
}

/// One solved path: snapshots of `u` at selected times plus provenance.
#[derive(Debug, Clone)]
pub struct SolutionField {
    grid: GridSpec,
    times: Vec<f64>,
    snapshots: Vec<Field>,
    path_id: u64,
    noise_seed: Option<u64>,
    model_tag: String,
}

/// One row of the run summary: time plus the conserved/monitored scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub t: f64,
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    pub l2: f64,
}

impl SolutionField {
    /// Assemble a solution from already-materialized snapshots — the
    /// read-back path for stored runs and a constructor for synthetic
    /// fields in analysis code. Times must be strictly increasing and each
    /// snapshot must live on the grid.
    pub fn from_parts(
        grid: GridSpec,
        times: Vec<f64>,
        snapshots: Vec<Field>,
        path_id: u64,
        noise_seed: Option<u64>,
        model_tag: impl Into<String>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len().max(1),
                got: snapshots.len(),
                context: "snapshot times vs snapshots",
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "snapshot times must be strictly increasing".to_string(),
            ));
        }
        for snap in &snapshots {
            if snap.shape() != grid.shape() {
                return Err(Error::ShapeMismatch {
                    expected: grid.shape().to_vec(),
                    got: snap.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            grid,
            times,
            snapshots,
            path_id,
            noise_seed,
            model_tag: model_tag.into(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn snapshot(&self, k: usize) -> &Field {
        &self.snapshots[k]
    }

    pub fn final_snapshot(&self) -> &Field {
        self.snapshots.last().expect("runs store at least u0")
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    pub fn noise_seed(&self) -> Option<u64> {
        self.noise_seed
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    /// Physical mass, extrema, and L² norm per stored snapshot.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let vol = self.grid.cell_volume();
        self.times
            .iter()
            .zip(&self.snapshots)
            .map(|(&t, snap)| SummaryRow {
                t,
                mass: vol * neumaier_sum(snap.data().iter().copied()),
                min: snap.min(),
                max: snap.max(),
                l2: (vol * neumaier_sum(snap.data().iter().map(|v| v * v))).sqrt(),
            })
            .collect()
    }
}

/// Options for [`run`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Keep every `stride`-th step (plus the initial and final states);
    /// 0 selects a stride that yields roughly 32 snapshots.
    pub stride: usize,
    /// Identifier of the Wiener path for stochastic runs.
    pub path_id: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { stride: 0, path_id: 0 }
    }
}

/// Integrate one path from `t = 0` to `t = T`. Passing a noise model with a
/// positive mode count samples one Wiener path; otherwise the run is purely
/// deterministic and bit-reproducible (no RNG is touched at all).
pub fn run(
    model: &CoefficientModel,
    grid: &GridSpec,
    init: &InitialData,
    noise: Option<&NoiseModel>,
    opts: &RunOptions,
) -> Result<SolutionField> {
    if model.dimension() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: grid.dimension(),
            context: "model vs grid dimension",
        });
    }
    let mut u = init.materialize(grid)?;
    stepping::check_state(model, &u, 0)?;

    let ts = grid.time_stepping(model)?;
    let stride = if opts.stride == 0 {
        (ts.steps / 32).max(1)
    } else {
        opts.stride
    };

    let forcing = match noise {
        Some(nm) if nm.mode_count() > 0 => {
            let basis = nm.sample_basis(grid.shape(), grid.half_width())?;
            let path = crate::noise::WienerPath::sample(nm, 0.0, ts.dt, ts.steps, opts.path_id)?;
            Some((nm, basis, path))
        }
        _ => None,
    };

    let mut times = vec![0.0];
    let mut snapshots = vec![u.clone()];
    for m in 0..ts.steps {
        u = match &forcing {
            None => step_deterministic(model, grid, &u, ts.dt, m)?,
            Some((nm, basis, path)) => {
                step_stochastic(model, nm, basis, path, grid, &u, ts.dt, m)?
            }
        };
        let is_last = m + 1 == ts.steps;
        if (m + 1) % stride == 0 || is_last {
            times.push((m + 1) as f64 * ts.dt);
            snapshots.push(u.clone());
        }
    }
    stepping::check_state(model, &u, ts.steps)?;

    Ok(SolutionField {
        grid: grid.clone(),
        times,
        snapshots,
        path_id: opts.path_id,
        noise_seed: forcing.map(|(nm, _, _)| nm.seed()),
        model_tag: model.tag(),
    })
}
