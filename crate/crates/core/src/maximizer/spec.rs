use serde::{Deserialize, Serialize};

use super::algorithm::{run, MaximizerConfig, Trajectory};
use crate::calculus::ScalarField;
use crate::error::{Error, Result};
use crate::group::{HLinearMap, HorizontalVector, Point};
use crate::metric::{self, Ball};

/// Starting function for a run, described in data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    /// `x -> lip <p(x), dir>`.
    Hlinear {
        lip: f64,
        dir: Vec<f64>,
    },
    /// `x -> lip (|p(x) + radius dir| - radius)`.
    Maximal {
        lip: f64,
        dir: Vec<f64>,
        radius: f64,
    },
    Min {
        of: Vec<FieldSpec>,
    },
    Max {
        of: Vec<FieldSpec>,
    },
}

impl FieldSpec {
    pub fn build(&self) -> Result<ScalarField> {
        Ok(match self {
            FieldSpec::Hlinear { lip, dir } => {
                ScalarField::hlinear(HLinearMap::new(*lip, HorizontalVector::new(dir.clone())?.normalized()?)?)
            }
            FieldSpec::Maximal { lip, dir, radius } => {
                ScalarField::maximal_at_origin(&HorizontalVector::new(dir.clone())?.normalized()?, *lip, *radius)
            }
            FieldSpec::Min { of } => ScalarField::min_of(of.iter().map(FieldSpec::build).collect::<Result<_>>()?),
            FieldSpec::Max { of } => ScalarField::max_of(of.iter().map(FieldSpec::build).collect::<Result<_>>()?),
        })
    }
}

/// Input of `hcalc maximize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizeSpec {
    pub schema_version: u32,
    pub f0: FieldSpec,
    pub x0: Point,
    pub e0: Vec<f64>,
    #[serde(default)]
    pub maximizer: MaximizerConfig,
    /// Pairs used to fit the Holder constant.
    #[serde(default = "default_constant_samples")]
    pub constant_samples: usize,
}

fn default_constant_samples() -> usize {
    1000
}

impl MaximizeSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MaximizeSpec = serde_json::from_str(text)?;
        if spec.schema_version != 1 {
            return Err(Error::Config(format!("schema version {} is not supported", spec.schema_version)));
        }
        Ok(spec)
    }

    pub fn run(&self) -> Result<Trajectory> {
        let f0 = self.f0.build()?;
        let n = self.x0.n();
        let e0 = HorizontalVector::new(self.e0.clone())?;
        if e0.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: e0.n() });
        }
        let region = Ball {
            center: self.x0.clone(),
            radius: 2.0 + self.maximizer.delta0,
        };
        let constants = metric::holder_fit(&region, self.constant_samples, self.maximizer.seed)?;
        let cover = self.maximizer.build_cover(n)?;
        run(&f0, &self.x0, &e0, &self.maximizer, &constants, &cover)
    }
}
