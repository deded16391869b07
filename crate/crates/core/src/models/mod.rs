//! Spin models exposing `ln Z` and its first three parameter derivatives.
//!
//! Every model also describes its configuration space as sectors of equal
//! energy with multiplicities, which is what [`crate::thermo::thermal_state`]
//! normalises and what the brute-force [`oracle`] cross-checks.

mod all_to_all;
mod chain;
mod full_control;
pub mod oracle;
mod pyramid;
mod qubits;
mod star;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::tensor::Tensor3;

pub use all_to_all::{lnz_all_to_all, moments_all_to_all, AllToAll, Moments};
pub use chain::{lnz_chain, lnz_chain_extensive, ChainForm, IsingChain};
pub use full_control::{lnz_full_control, FullControl, Gauge};
pub use pyramid::PyramidSpec;
pub use qubits::Qubits;
pub use star::{lnz_star, Star};

/// `ln Z` with its gradient, Hessian and third-derivative tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub third: Tensor3,
}

impl Derivatives {
    pub fn from_jet<const N: usize>(j: &crate::jet::Jet<N>) -> Self {
        Derivatives {
            value: j.value,
            grad: DVector::from_row_slice(&j.grad),
            hess: DMatrix::from_fn(N, N, |a, b| 0.5 * (j.hess[a][b] + j.hess[b][a])),
            third: Tensor3::from(&j.third),
        }
    }
}

/// A set of configurations sharing one energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub label: String,
    pub log_multiplicity: f64,
    pub energy: f64,
}

pub trait Model: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    fn n_params(&self) -> usize;

    /// Number of spins, when the model describes a spin system.
    fn n_spins(&self) -> Option<usize>;

    fn ln_z(&self, point: &[f64], beta: f64) -> Result<f64>;

    /// Exact derivatives where available; five-point finite differences otherwise.
    fn derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        finite_difference_derivatives(self, point, beta)
    }

    /// Derivatives of a positive multiple of `ln Z`. The Christoffel symbols
    /// are invariant under such rescaling, so models whose geometry is
    /// extensive return a per-spin form here.
    fn intrinsic_derivatives(&self, point: &[f64], beta: f64) -> Result<Derivatives> {
        self.derivatives(point, beta)
    }

    /// Thermodynamic metric `g = d^2 ln Z` (with `tau_eq = 1`).
    fn metric(&self, point: &[f64], beta: f64) -> Result<DMatrix<f64>> {
        Ok(self.derivatives(point, beta)?.hess)
    }

    /// Energy sectors of the configuration space at `point`.
    fn config_space(&self, point: &[f64]) -> Result<Vec<Sector>>;
}

/// Finite-difference fallback for [`Model::derivatives`].
pub fn finite_difference_derivatives<M: Model + ?Sized>(model: &M, point: &[f64], beta: f64) -> Result<Derivatives> {
    expect_dim(point, model.n_params())?;
    let f = |x: &[f64]| model.ln_z(x, beta).unwrap_or(f64::NAN);
    let d = Derivatives {
        value: model.ln_z(point, beta)?,
        grad: fd::gradient(f, point),
        hess: fd::hessian(f, point),
        third: fd::third(f, point),
    };
    if !d.hess.iter().all(|x| x.is_finite()) || !d.third.as_slice().iter().all(|x| x.is_finite()) {
        return Err(Error::Domain("finite-difference stencil left the model domain".into()));
    }
    Ok(d)
}

pub(crate) fn expect_dim(point: &[f64], n: usize) -> Result<()> {
    if point.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: point.len() });
    }
    if let Some(x) = point.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite control parameter {x}")));
    }
    Ok(())
}

/// `ln C(n, k)` for `k = 0..=n`.
pub(crate) fn log_binomials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += ((n - k + 1) as f64).ln() - (k as f64).ln();
        out.push(acc);
    }
    // Exact symmetry guards against drift at large n.
    for k in 0..=n / 2 {
        out[n - k] = out[k];
    }
    out
}

/// JSON model description shared by the CLI and FFI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Independent qubits driven by a common field.
    #[serde(alias = "qubit", alias = "local")]
    Qubits {
        #[serde(rename = "N", default = "one")]
        n: usize,
    },
    AllToAll {
        #[serde(rename = "N")]
        n: usize,
    },
    Chain {
        #[serde(rename = "N")]
        n: usize,
        #[serde(default)]
        form: ChainForm,
    },
    Star {
        #[serde(rename = "N")]
        n: usize,
    },
    /// Either explicit level multiplicities, or `N` spins reduced by
    /// permutation symmetry to `N + 1` levels of multiplicity `C(N, k)`.
    FullControl {
        #[serde(rename = "N", default)]
        n: Option<usize>,
        #[serde(default)]
        multiplicities: Option<Vec<u64>>,
        #[serde(default)]
        gauge: Gauge,
    },
    Pyramid {
        layers: usize,
        aperture: usize,
        #[serde(default = "one")]
        base: usize,
        #[serde(rename = "D")]
        dimension: usize,
    },
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Pyramid { .. } => self.pyramid().map(|_| ()),
            _ => self.build().map(|_| ()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Model>> {
        Ok(match self {
            ModelSpec::Qubits { n } => Box::new(Qubits::try_new(*n)?),
            ModelSpec::AllToAll { n } => Box::new(AllToAll::new(*n)?),
            ModelSpec::Chain { n, form } => Box::new(IsingChain::new(*n, *form)?),
            ModelSpec::Star { n } => Box::new(Star::new(*n)?),
            ModelSpec::FullControl { n, multiplicities, gauge } => {
                let fc = match (n, multiplicities) {
                    (Some(n), None) => FullControl::permutation_reduced(*n)?,
                    (None, Some(m)) => FullControl::new(m.clone())?,
                    _ => {
                        return Err(Error::Config(
                            "full_control needs exactly one of \"N\" or \"multiplicities\"".into(),
                        ))
                    }
                };
                Box::new(fc.with_gauge(*gauge))
            }
            ModelSpec::Pyramid { .. } => {
                return Err(Error::Config(
                    "the pyramid model has no partition function here; it only provides step-protocol bounds".into(),
                ))
            }
        })
    }

    pub fn pyramid(&self) -> Result<PyramidSpec> {
        match self {
            ModelSpec::Pyramid { layers, aperture, base, dimension } => {
                PyramidSpec::new(*layers, *aperture, *base, *dimension)
            }
            _ => Err(Error::Config("not a pyramid specification".into())),
        }
    }
}
