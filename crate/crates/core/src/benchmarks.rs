//! The benchmark problems (Examples I-VI): coefficient closures, exact
//! solutions where known, and error norms.

use crate::error::HdgError;
use crate::hdg::{Coefficients, Diffusion, ScalarField, VectorField};
use crate::mesh::{Rect, StructuredMesh};
use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    /// Poisson with smooth manufactured solution.
    I,
    /// Heterogeneous permeability (seeded synthetic field).
    II,
    /// Pure transport with a curved shock.
    IiiShock,
    /// Pure transport with a smooth manufactured solution.
    IiiSmooth,
    /// Convection-diffusion, oscillatory convection of magnitude alpha.
    Iv,
    /// Recirculating convection with kappa-scaled diffusion.
    V,
    /// Circular-streamline convection of magnitude alpha.
    Vi,
}

impl FromStr for CaseId {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(CaseId::I),
            "II" | "2" => Ok(CaseId::II),
            "III-SHOCK" | "III" | "3" => Ok(CaseId::IiiShock),
            "III-SMOOTH" | "3-SMOOTH" => Ok(CaseId::IiiSmooth),
            "IV" | "4" => Ok(CaseId::Iv),
            "V" | "5" => Ok(CaseId::V),
            "VI" | "6" => Ok(CaseId::Vi),
            other => Err(HdgError::UnknownCase(other.to_string())),
        }
    }
}

impl std::fmt::Display for CaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::IiiShock => "III-shock",
            CaseId::IiiSmooth => "III-smooth",
            CaseId::Iv => "IV",
            CaseId::V => "V",
            CaseId::Vi => "VI",
        };
        f.write_str(s)
    }
}

/// Diffusion specification before a mesh is known.
#[derive(Clone)]
pub enum KappaSpec {
    Zero,
    Constant(f64),
    /// Spatial field, sampled at element centers.
    Field(ScalarField),
}

#[derive(Clone)]
pub struct BenchmarkCase {
    pub id: CaseId,
    pub domain: Rect,
    pub kappa: KappaSpec,
    pub beta: VectorField,
    pub forcing: ScalarField,
    /// Dirichlet data (elliptic) or inflow data (transport).
    pub dirichlet: ScalarField,
    pub parameter: Option<f64>,
    pub exact: Option<ScalarField>,
}

impl BenchmarkCase {
    /// Materialize the coefficient set on a concrete mesh.
    pub fn coefficients(&self, mesh: &StructuredMesh) -> Coefficients {
        let diffusion = match &self.kappa {
            KappaSpec::Zero => Diffusion::Zero,
            KappaSpec::Constant(k) => Diffusion::Constant(*k),
            KappaSpec::Field(f) => {
                let vals: Vec<f64> = (0..mesh.element_count())
                    .map(|e| {
                        let (x0, y0) = mesh.element_origin(e);
                        f(x0 + mesh.h / 2.0, y0 + mesh.h / 2.0)
                    })
                    .collect();
                Diffusion::PerElement(Arc::new(vals))
            }
        };
        Coefficients {
            diffusion,
            beta: self.beta.clone(),
            forcing: self.forcing.clone(),
            dirichlet: self.dirichlet.clone(),
        }
    }
}

/// The seeded substitute permeability of Example II: piecewise constant on a
/// 16x16 tiling of the unit square, `kappa = 10^(4b)` with
/// `b in {0, 1/4, 1/2, 3/4, 1}` drawn uniformly.
pub fn example_ii_field(seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tiles: Vec<f64> = (0..16 * 16)
        .map(|_| {
            let b = rng.gen_range(0..5) as f64 / 4.0;
            10f64.powf(4.0 * b)
        })
        .collect();
    Arc::new(move |x, y| {
        let i = ((x * 16.0).floor() as usize).min(15);
        let j = ((y * 16.0).floor() as usize).min(15);
        tiles[j * 16 + i]
    })
}

/// Build a benchmark case. `parameter` is alpha (IV, VI) or kappa (V); the
/// seed only matters for Example II.
pub fn make_case(id: CaseId, parameter: Option<f64>, seed: u64) -> Result<BenchmarkCase, HdgError> {
    let zero: ScalarField = Arc::new(|_, _| 0.0);
    let no_beta: VectorField = Arc::new(|_, _| (0.0, 0.0));
    let gd_oscillatory: ScalarField = Arc::new(|x, y| {
        (PI * x).sin() + (13.0 * PI * x).sin() + (PI * y).sin() + (13.0 * PI * y).sin()
    });
    let case = match id {
        CaseId::I => {
            let exact: ScalarField =
                Arc::new(|x, y| (PI * x).sin() * (PI * y).cos() / (PI * PI));
            BenchmarkCase {
                id,
                domain: Rect::UNIT,
                kappa: KappaSpec::Constant(1.0),
                beta: no_beta,
                forcing: Arc::new(|x, y| 2.0 * (PI * x).sin() * (PI * y).cos()),
                dirichlet: exact.clone(),
                parameter: None,
                exact: Some(exact),
            }
        }
        CaseId::II => BenchmarkCase {
            id,
            domain: Rect::UNIT,
            kappa: KappaSpec::Field(example_ii_field(seed)),
            beta: no_beta,
            forcing: Arc::new(|_, _| 1.0),
            dirichlet: zero,
            parameter: None,
            exact: None,
        },
        CaseId::IiiShock => BenchmarkCase {
            id,
            domain: Rect::square(2.0),
            kappa: KappaSpec::Zero,
            beta: Arc::new(|_, y| (1.0 + (PI * y / 2.0).sin(), 2.0)),
            forcing: zero,
            dirichlet: Arc::new(|x, y| {
                if x <= 0.0 {
                    1.0
                } else if y <= 0.0 && x <= 1.0 {
                    (PI * x).sin().powi(6)
                } else {
                    0.0
                }
            }),
            parameter: None,
            exact: None,
        },
        CaseId::IiiSmooth => {
            let exact: ScalarField = Arc::new(|x, y| (PI * x).sin() * (PI * y).cos() / PI);
            BenchmarkCase {
                id,
                domain: Rect::square(2.0),
                kappa: KappaSpec::Zero,
                beta: Arc::new(|_, y| (1.0 + (PI * y / 2.0).sin(), 2.0)),
                // beta is divergence-free, so f = div(beta u) = beta . grad u
                forcing: Arc::new(|x, y| {
                    (1.0 + (PI * y / 2.0).sin()) * (PI * x).cos() * (PI * y).cos()
                        - 2.0 * (PI * x).sin() * (PI * y).sin()
                }),
                dirichlet: exact.clone(),
                parameter: None,
                exact: Some(exact),
            }
        }
        CaseId::Iv => {
            let alpha = parameter.unwrap_or(10.0);
            BenchmarkCase {
                id,
                domain: Rect::UNIT,
                kappa: KappaSpec::Constant(1.0),
                beta: Arc::new(move |x, y| {
                    (-alpha * (4.0 * PI * y).cos(), -alpha * (4.0 * PI * x).cos())
                }),
                forcing: zero,
                dirichlet: Arc::new(|_, y| (2.0 * y).cos() * (1.0 - 2.0 * y)),
                parameter: Some(alpha),
                exact: None,
            }
        }
        CaseId::V => {
            let kappa = parameter.unwrap_or(1e-1);
            BenchmarkCase {
                id,
                domain: Rect::UNIT,
                kappa: KappaSpec::Constant(kappa),
                beta: Arc::new(|x, y| ((2.0 * y - 1.0) * (1.0 - x * x), 2.0 * x * y * (y - 1.0))),
                forcing: zero,
                dirichlet: gd_oscillatory,
                parameter: Some(kappa),
                exact: None,
            }
        }
        CaseId::Vi => {
            let alpha = parameter.unwrap_or(10.0);
            BenchmarkCase {
                id,
                domain: Rect::UNIT,
                kappa: KappaSpec::Constant(1.0),
                beta: Arc::new(move |x, y| {
                    (
                        4.0 * alpha * x * (x - 1.0) * (1.0 - 2.0 * y),
                        -4.0 * alpha * y * (y - 1.0) * (1.0 - 2.0 * x),
                    )
                }),
                forcing: zero,
                dirichlet: gd_oscillatory,
                parameter: Some(alpha),
                exact: None,
            }
        }
    };
    Ok(case)
}

/// `max |lambda_direct - lambda|`.
pub fn error_vs_direct(lambda: &DVector<f64>, lambda_direct: &DVector<f64>) -> f64 {
    (lambda - lambda_direct).amax()
}
