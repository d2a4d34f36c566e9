//! The component loss family `|P - A|^p * A^q`, its admissibility checks,
//! total loss over a prediction set, the share-based variant, and the
//! signed-loss bias measure.

use serde::Serialize;

use crate::error::{Error, Result};

/// One area's (actual, predicted) pair. Actuals are strictly positive,
/// predictions nonnegative; both are enforced at construction so every
/// downstream computation is total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    id: String,
    actual: f64,
    predicted: f64,
}

impl Observation {
    pub fn new(id: impl Into<String>, actual: f64, predicted: f64) -> Result<Self> {
        let id = id.into();
        if !actual.is_finite() || actual <= 0.0 {
            return Err(Error::Domain(format!(
                "observation {id}: actual must be a positive finite number, got {actual}"
            )));
        }
        if !predicted.is_finite() || predicted < 0.0 {
            return Err(Error::Domain(format!(
                "observation {id}: predicted must be a nonnegative finite number, got {predicted}"
            )));
        }
        Ok(Self {
            id,
            actual,
            predicted,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn actual(&self) -> f64 {
        self.actual
    }

    pub fn predicted(&self) -> f64 {
        self.predicted
    }

    /// Signed error P - A.
    pub fn error(&self) -> f64 {
        self.predicted - self.actual
    }

    /// Absolute error |P - A|.
    pub fn abs_error(&self) -> f64 {
        (self.predicted - self.actual).abs()
    }

    /// Absolute percentage error 100 * |P - A| / A.
    pub fn ape(&self) -> f64 {
        100.0 * self.abs_error() / self.actual
    }
}

/// Exponent pair (p, q) selecting a member of the loss family.
///
/// `p` must be positive; `q` may take any sign so that comparison metrics
/// such as RMSE (q = 0) are expressible. Whether the pair is admissible
/// (loss rises with the actual at a fixed relative error) is a separate
/// check, not a construction constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParams {
    p: f64,
    q: f64,
}

impl LossParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "loss exponent p must be positive and finite, got {p}"
            )));
        }
        if !q.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "loss exponent q must be finite, got {q}"
            )));
        }
        Ok(Self { p, q })
    }

    /// The Webster-Sainte-Lague parametrization, p = 2 and q = -1.
    pub fn webster() -> Self {
        Self { p: 2.0, q: -1.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sum_pq(&self) -> f64 {
        self.p + self.q
    }

    /// True when p + q > 0, i.e. loss at a fixed relative error strictly
    /// increases with the actual value.
    pub fn admissible(&self) -> bool {
        self.p + self.q > 0.0
    }

    /// True when q < 0, i.e. loss at a fixed absolute error strictly
    /// decreases with the actual value.
    pub fn decreasing_in_actual(&self) -> bool {
        self.q < 0.0
    }
}

/// A named vector of predictions aligned to one vector of actuals.
#[derive(Debug, Clone, Serialize)]
pub struct PredictionSet {
    name: String,
    observations: Vec<Observation>,
}

impl PredictionSet {
    pub fn new(name: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        let name = name.into();
        if observations.is_empty() {
            return Err(Error::Domain(format!(
                "prediction set {name}: must contain at least one observation"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for obs in &observations {
            if !seen.insert(obs.id()) {
                return Err(Error::Domain(format!(
                    "prediction set {name}: duplicate observation id {}",
                    obs.id()
                )));
            }
        }
        Ok(Self { name, observations })
    }

    /// Convenience constructor from parallel columns.
    pub fn from_columns(
        name: impl Into<String>,
        ids: &[String],
        actuals: &[f64],
        predicted: &[f64],
    ) -> Result<Self> {
        if ids.len() != actuals.len() || ids.len() != predicted.len() {
            return Err(Error::Misaligned(format!(
                "column lengths differ: {} ids, {} actuals, {} predictions",
                ids.len(),
                actuals.len(),
                predicted.len()
            )));
        }
        let observations = ids
            .iter()
            .zip(actuals.iter().zip(predicted.iter()))
            .map(|(id, (&a, &p))| Observation::new(id.clone(), a, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, observations)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn actuals(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.actual()).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.predicted()).collect()
    }
}

/// Loss from raw magnitudes: |P - A|^p * A^q given the absolute error.
/// Exactly 0 at zero error for any p > 0, sidestepping the 0^p evaluation.
pub(crate) fn loss_value(abs_error: f64, actual: f64, params: LossParams) -> f64 {
    if abs_error == 0.0 {
        return 0.0;
    }
    abs_error.powf(params.p) * actual.powf(params.q)
}

/// Component loss of one observation: |P - A|^p * A^q.
pub fn component_loss(obs: &Observation, params: LossParams) -> f64 {
    loss_value(obs.abs_error(), obs.actual(), params)
}

/// Total loss: the sum of component losses in observation order.
///
/// Summation is sequential in index order; any parallel reimplementation
/// must reduce in the same fixed order to keep totals bit-identical.
pub fn total_loss(set: &PredictionSet, params: LossParams) -> f64 {
    set.observations()
        .iter()
        .map(|obs| component_loss(obs, params))
        .sum()
}

/// The share-based loss: sum over i of (1/sum A) * (P_i/sum P - A_i/sum A)^2.
///
/// Invariant under any uniform positive rescaling of the predictions, and
/// zero exactly when predicted shares equal actual shares.
pub fn fellegi_loss(set: &PredictionSet) -> Result<f64> {
    Ok(fellegi_components(set)?.iter().sum())
}

/// Per-observation summands of the share-based loss, for reporting.
pub fn fellegi_components(set: &PredictionSet) -> Result<Vec<f64>> {
    let total_actual: f64 = set.observations().iter().map(|o| o.actual()).sum();
    let total_pred: f64 = set.observations().iter().map(|o| o.predicted()).sum();
    if total_pred <= 0.0 {
        return Err(Error::Domain(format!(
            "prediction set {}: share-based loss needs a positive prediction total, got {total_pred}",
            set.name()
        )));
    }
    Ok(set
        .observations()
        .iter()
        .map(|o| {
            let share_err = o.predicted() / total_pred - o.actual() / total_actual;
            share_err * share_err / total_actual
        })
        .collect())
}

/// Component loss carrying the sign of the error, for bias measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedLossRecord {
    pub id: String,
    pub signed_loss: f64,
    pub magnitude: f64,
}

/// Signed loss: component loss multiplied by sgn(P - A).
///
/// Positive for overprediction, negative for underprediction, zero at a
/// perfect prediction.
pub fn signed_loss(obs: &Observation, params: LossParams) -> SignedLossRecord {
    let magnitude = component_loss(obs, params);
    let signed = match obs.error() {
        e if e > 0.0 => magnitude,
        e if e < 0.0 => -magnitude,
        _ => 0.0,
    };
    SignedLossRecord {
        id: obs.id().to_string(),
        signed_loss: signed,
        magnitude,
    }
}

/// Signed losses sorted by signed loss descending, so the observations whose
/// overprediction contributes most sit on top and the heaviest
/// underpredictions at the bottom. Ties are ordered by id.
pub fn bias_ranking(set: &PredictionSet, params: LossParams) -> Vec<SignedLossRecord> {
    let mut records: Vec<SignedLossRecord> = set
        .observations()
        .iter()
        .map(|obs| signed_loss(obs, params))
        .collect();
    records.sort_by(|a, b| {
        b.signed_loss
            .total_cmp(&a.signed_loss)
            .then_with(|| a.id.cmp(&b.id))
    });
    records
}
