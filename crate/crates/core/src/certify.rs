//! Sampling-based checks of the analytic hypotheses on a speed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::SymmetricCone;
use crate::error::{Error, Result};
use crate::speed::{indexed_rng, random_symmetric, Speed};
use crate::symmetric::{self, Dual, SymmetricFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    OneHomogeneous,
    Monotone,
    Concave,
    Convex,
    InverseConcave,
}

impl Property {
    pub const ALL: [Property; 5] = [
        Property::OneHomogeneous,
        Property::Monotone,
        Property::Concave,
        Property::Convex,
        Property::InverseConcave,
    ];

    fn tolerance(self) -> f64 {
        match self {
            Property::OneHomogeneous => 1e-10,
            Property::Monotone => 0.0,
            _ => 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kappa: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<Vec<f64>>>,
}

/// Outcome of one certification run.
///
/// `worst_margin` is signed so that larger is better: the property holds on
/// the sample when `worst_margin >= -tolerance` (strictly `> 0` for monotonicity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub speed: String,
    pub cone: SymmetricCone,
    pub property: Property,
    pub samples: usize,
    pub seed: u64,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub witness: Option<Witness>,
}

fn matrix_rows(v: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect()
}

/// Margin and witness for one sample index.
fn sample_margin(
    speed: &Speed,
    domain: &SymmetricCone,
    property: Property,
    seed: u64,
    index: u64,
) -> Result<(f64, Witness)> {
    let n = speed.dim();
    let mut rng = indexed_rng(seed, index);
    let kappa = domain.sample_unit(&mut rng)?;
    let z = kappa.values();
    let f = speed.value(z);
    let witness = |v: Option<&nalgebra::DMatrix<f64>>| Witness {
        kappa: z.to_vec(),
        v: v.map(matrix_rows),
    };
    Ok(match property {
        Property::OneHomogeneous => {
            use rand::Rng;
            let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
            let scaled: Vec<f64> = z.iter().map(|v| v * lambda).collect();
            let residual = (speed.value(&scaled) - lambda * f).abs() / (lambda * f.abs());
            (-residual, witness(None))
        }
        Property::Monotone => {
            let g = speed.gradient(z);
            let min = g.iter().copied().fold(f64::INFINITY, f64::min);
            (min / f, witness(None))
        }
        Property::Concave | Property::Convex => {
            let v = random_symmetric(&mut rng, n);
            let form = symmetric::second_derivative_form(speed, z, &v)? / f;
            let margin = if property == Property::Concave { -form } else { form };
            (margin, witness(Some(&v)))
        }
        Property::InverseConcave => {
            let dual = Dual(speed);
            let w: Vec<f64> = z.iter().rev().map(|v| 1.0 / v).collect();
            let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w: Vec<f64> = w.iter().map(|v| v / wn).collect();
            let v = random_symmetric(&mut rng, n);
            let form = symmetric::second_derivative_form(&dual, &w, &v)? / dual.value(&w);
            (-form, witness(Some(&v)))
        }
    })
}

/// Checks `property` of `speed` at `samples` points drawn uniformly from the
/// unit-sphere slice of `cone`. Each sample has its own RNG stream, so the
/// report does not depend on thread scheduling.
pub fn certify(
    speed: &Speed,
    cone: &SymmetricCone,
    property: Property,
    samples: usize,
    seed: u64,
) -> Result<CertificationReport> {
    let domain = cone.intersect(&speed.cone().base())?;
    if property == Property::InverseConcave && !domain.is_positive() {
        return Err(Error::InvalidParameter(format!(
            "inverse concavity is tested on the positive cone, got {domain}"
        )));
    }
    let results: Vec<(f64, Witness)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| sample_margin(speed, &domain, property, seed, i))
        .collect::<Result<_>>()?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for (margin, w) in results {
        if margin < worst {
            worst = margin;
            witness = Some(w);
        }
    }
    let tolerance = property.tolerance();
    let passed = match property {
        Property::Monotone => worst > 0.0,
        _ => worst >= -tolerance,
    };
    Ok(CertificationReport {
        speed: speed.name(),
        cone: *cone,
        property,
        samples,
        seed,
        worst_margin: worst,
        tolerance,
        passed,
        witness: (!passed).then_some(witness).flatten(),
    })
}
