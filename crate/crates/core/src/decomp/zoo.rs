//! Unital positive maps used as test inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::prep::PositiveMapDescriptor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MapSpec {
    Identity {
        n: usize,
    },
    Transpose {
        n: usize,
    },
    /// `x ↦ (1-λ) x + λ Tr(x) 1/n`.
    Depolarizing {
        n: usize,
        lambda: f64,
    },
    /// `x ↦ (Tr(x) 1 - x) / (n-1)`.
    Reduction {
        n: usize,
    },
    /// Choi's indecomposable map on `M_3`, halved to be unital.
    Choi3,
}

impl MapSpec {
    pub fn label(&self) -> String {
        match self {
            MapSpec::Identity { n } => format!("identity({n})"),
            MapSpec::Transpose { n } => format!("transpose({n})"),
            MapSpec::Depolarizing { n, lambda } => format!("depolarizing({n},{lambda})"),
            MapSpec::Reduction { n } => format!("reduction({n})"),
            MapSpec::Choi3 => "choi3".into(),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            MapSpec::Identity { n }
            | MapSpec::Transpose { n }
            | MapSpec::Depolarizing { n, .. }
            | MapSpec::Reduction { n } => n,
            MapSpec::Choi3 => 3,
        }
    }

    /// Parses `name` plus optional numeric parameters.
    pub fn from_name(name: &str, n: Option<usize>, lambda: Option<f64>) -> Result<Self> {
        let need_n = || n.ok_or_else(|| Error::contract(format!("map '{name}' needs parameter n")));
        Ok(match name {
            "identity" => MapSpec::Identity { n: need_n()? },
            "transpose" => MapSpec::Transpose { n: need_n()? },
            "depolarizing" => MapSpec::Depolarizing {
                n: need_n()?,
                lambda: lambda
                    .ok_or_else(|| Error::contract("map 'depolarizing' needs parameter lambda"))?,
            },
            "reduction" => MapSpec::Reduction { n: need_n()? },
            "choi3" => MapSpec::Choi3,
            other => return Err(Error::UnknownMap(other.to_string())),
        })
    }

    /// The standard zoo at the given dimension (choi3 is always 3).
    pub fn family(n: usize) -> Vec<MapSpec> {
        vec![
            MapSpec::Identity { n },
            MapSpec::Transpose { n },
            MapSpec::Depolarizing { n, lambda: 0.5 },
            MapSpec::Reduction { n },
            MapSpec::Choi3,
        ]
    }
}

/// Choi's map `Φ(A) = [[a11+a33, -a12, -a13], [-a21, a22+a11, -a23], [-a31, -a32, a33+a22]]`.
pub fn choi_map_unnormalized(a: &ComplexMatrix) -> ComplexMatrix {
    let mut out = a.scale_real(-1.0);
    out[(0, 0)] = a[(0, 0)] + a[(2, 2)];
    out[(1, 1)] = a[(1, 1)] + a[(0, 0)];
    out[(2, 2)] = a[(2, 2)] + a[(1, 1)];
    out
}

pub fn zoo(spec: &MapSpec) -> Result<PositiveMapDescriptor> {
    let label = spec.label();
    match *spec {
        MapSpec::Identity { n } => {
            check_n(n, 1)?;
            PositiveMapDescriptor::from_fn(n, n, label, |x| x.clone())
        }
        MapSpec::Transpose { n } => {
            check_n(n, 1)?;
            PositiveMapDescriptor::from_fn(n, n, label, |x| x.transpose())
        }
        MapSpec::Depolarizing { n, lambda } => {
            check_n(n, 1)?;
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::contract(format!(
                    "depolarizing lambda {lambda} outside [0, 1]"
                )));
            }
            PositiveMapDescriptor::from_fn(n, n, label, |x| {
                let mix = ComplexMatrix::identity(n).scale(x.trace() * (lambda / n as f64));
                &x.scale_real(1.0 - lambda) + &mix
            })
        }
        MapSpec::Reduction { n } => {
            check_n(n, 2)?;
            let k = 1.0 / (n as f64 - 1.0);
            PositiveMapDescriptor::from_fn(n, n, label, |x| {
                (&ComplexMatrix::identity(n).scale(x.trace()) - x).scale(C64::new(k, 0.0))
            })
        }
        MapSpec::Choi3 => PositiveMapDescriptor::from_fn(3, 3, label, |x| {
            choi_map_unnormalized(x).scale_real(0.5)
        }),
    }
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::contract(format!(
            "map dimension {n} below minimum {min}"
        )));
    }
    Ok(())
}
