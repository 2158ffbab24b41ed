//! Initial data families and their materialization on a grid.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::lpdecomp::SmoothBump;

use super::io::read_snapshots;
use super::GridSpec;

/// Built-in initial conditions. `File` restarts from the last snapshot of a
/// stored run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Two constant states separated by the hyperplane `x_axis = 0`.
    Riemann { left: f64, right: f64, axis: usize },
    /// Compactly supported smooth bump of the given `amplitude`: equal to
    /// the amplitude inside half the `radius` around `offset`, zero outside
    /// the full radius.
    Bump {
        amplitude: f64,
        radius: f64,
        offset: Vec<f64>,
    },
    /// Product of axis sinusoids `amplitude·Π sin(k_a π x_a / X)` over the
    /// axes with nonzero wavenumber.
    Sine {
        amplitude: f64,
        wavenumbers: Vec<i64>,
    },
    /// Load the final snapshot of a stored snapshot file.
    File { path: PathBuf },
}

impl InitialData {
    /// Evaluate the initial condition at every cell center.
    pub fn materialize(&self, grid: &GridSpec) -> Result<Field> {
        let d = grid.dimension();
        match self {
            Self::Riemann { left, right, axis } => {
                if *axis >= d {
                    return Err(Error::InvalidArgument(format!(
                        "Riemann axis {axis} out of range for dimension {d}"
                    )));
                }
                Field::from_fn(grid.shape(), |idx| {
                    if grid.cell_center(idx)[*axis] < 0.0 {
                        *left
                    } else {
                        *right
                    }
                })
            }
            Self::Bump {
                amplitude,
                radius,
                offset,
            } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "bump radius must be positive, got {radius}"
                    )));
                }
                if offset.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: offset.len(),
                        context: "bump center offset",
                    });
                }
                let profile = SmoothBump::new(5);
                Field::from_fn(grid.shape(), |idx| {
                    let x = grid.cell_center(idx);
                    let r = x
                        .iter()
                        .zip(offset)
                        .map(|(xi, oi)| (xi - oi).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    amplitude * profile.eval(2.0 * r / radius)
                })
            }
            Self::Sine {
                amplitude,
                wavenumbers,
            } => {
                if wavenumbers.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: wavenumbers.len(),
                        context: "sine wavenumbers",
                    });
                }
                let x_width = grid.half_width();
                Field::from_fn(grid.shape(), |idx| {
                    let x = grid.cell_center(idx);
                    wavenumbers
                        .iter()
                        .zip(&x)
                        .filter(|(&k, _)| k != 0)
                        .map(|(&k, xi)| (k as f64 * std::f64::consts::PI * xi / x_width).sin())
                        .product::<f64>()
                        * amplitude
                })
            }
            Self::File { path } => {
                let file = read_snapshots(path)?;
                let last = file.snapshots.last().ok_or_else(|| Error::BadSnapshot {
                    path: path.clone(),
                    message: "file contains no snapshots".to_string(),
                })?;
                if last.shape() != grid.shape() {
                    return Err(Error::ShapeMismatch {
                        expected: grid.shape().to_vec(),
                        got: last.shape().to_vec(),
                    });
                }
                Ok(last.clone())
            }
        }
    }
}
