//! Comparison metrics and their loss-family interpretations: MAPE, MedAPE,
//! RMSE, RMSPE, the 90th-percentile APE, the apportionment-rule losses, and
//! the average-estimated-variance reading of the mean Webster loss. Also
//! hosts the built-in three-scenario demonstration table and the seeded
//! noise generator used to exercise the variance interpretation.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::{component_loss, total_loss, LossParams, Observation, PredictionSet};

/// Which axiom, if any, a metric breaks when read as a total loss function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityFlag {
    Admissible,
    /// Loss does not decrease in the actual at a fixed absolute error (q >= 0).
    ViolatesAssumption3,
    /// Loss does not increase in the actual at a fixed relative error (p + q <= 0).
    ViolatesProperty1,
    /// Not an additively separable sum of component losses.
    ViolatesVnm,
}

/// Flag for a (p, q) member of the loss family.
pub fn flag_for_params(params: LossParams) -> AdmissibilityFlag {
    if params.sum_pq() <= 0.0 {
        AdmissibilityFlag::ViolatesProperty1
    } else if params.q() >= 0.0 {
        AdmissibilityFlag::ViolatesAssumption3
    } else {
        AdmissibilityFlag::Admissible
    }
}

/// Side-by-side metric values for one prediction set.
///
/// `per_observation` carries, under the same key as the metric, the vector
/// of per-observation contributions; it is absent for the quantile metrics
/// (MedAPE, 90PE) and the max-ratio metrics (Jefferson, Adams), which have
/// no additive decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub set_name: String,
    pub metric_values: BTreeMap<String, f64>,
    pub per_observation: BTreeMap<String, Vec<f64>>,
    pub admissibility_flags: BTreeMap<String, AdmissibilityFlag>,
    pub notes: Vec<String>,
}

fn apes(set: &PredictionSet) -> Vec<f64> {
    set.observations().iter().map(|o| o.ape()).collect()
}

fn sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

fn median_of_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Mean absolute percentage error: 100 * mean of |P - A| / A.
pub fn mape(set: &PredictionSet) -> f64 {
    let a = apes(set);
    a.iter().sum::<f64>() / a.len() as f64
}

/// Median absolute percentage error; an even count averages the two
/// central order statistics.
pub fn medape(set: &PredictionSet) -> f64 {
    median_of_sorted(&sorted(apes(set)))
}

/// Root mean squared error.
pub fn rmse(set: &PredictionSet) -> f64 {
    let ss: f64 = set
        .observations()
        .iter()
        .map(|o| o.error() * o.error())
        .sum();
    (ss / set.len() as f64).sqrt()
}

/// Root mean squared percentage error: 100 * sqrt(mean of ((P - A)/A)^2).
pub fn rmspe(set: &PredictionSet) -> f64 {
    let ss: f64 = set
        .observations()
        .iter()
        .map(|o| {
            let rel = o.error() / o.actual();
            rel * rel
        })
        .sum();
    100.0 * (ss / set.len() as f64).sqrt()
}

/// 90th-percentile absolute percentage error, as the nearest-rank order
/// statistic at ceil(0.9 n), 1-based ascending. The rank is computed in
/// integer arithmetic so that exact multiples are not pushed up a rank by
/// the binary representation of 0.9.
pub fn p90_ape(set: &PredictionSet) -> f64 {
    let values = sorted(apes(set));
    let n = values.len();
    let rank = (9 * n).div_ceil(10).max(1);
    values[rank - 1]
}

/// Mean Webster-Sainte-Lague loss: total loss at (p=2, q=-1) over n.
pub fn mean_webster_loss(set: &PredictionSet) -> f64 {
    total_loss(set, LossParams::webster()) / set.len() as f64
}

/// Mean of (P - A)^2 / A. For predictions whose squared error is
/// proportional to the actual, this estimates the per-unit error variance;
/// it is the same number as [`mean_webster_loss`] under its variance
/// interpretation.
pub fn average_estimated_variance(set: &PredictionSet) -> f64 {
    mean_webster_loss(set)
}

/// Assumption clauses an apportionment rule's loss representation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    Assumption1,
    Assumption2,
    Assumption3,
    VonNeumannMorgenstern,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaggedMetric {
    pub value: f64,
    pub violations: Vec<Violation>,
}

/// The four non-Webster apportionment-rule statistics.
#[derive(Debug, Clone, Serialize)]
pub struct ApportionmentMetrics {
    /// Sum of |P - A|^p (q = 0).
    pub hamilton: TaggedMetric,
    /// Sum of (P - A)^2 / P (the q = -1 exponent applied to the prediction).
    pub hill: TaggedMetric,
    /// max P / A.
    pub jefferson: TaggedMetric,
    /// max A / P.
    pub adams: TaggedMetric,
}

/// Computes the Hamilton, Hill, Jefferson, and Adams statistics, each tagged
/// with the assumptions its loss representation violates. Hill and Adams
/// divide by predictions and reject sets containing a zero prediction.
pub fn apportionment_metrics(set: &PredictionSet, hamilton_p: f64) -> Result<ApportionmentMetrics> {
    if !hamilton_p.is_finite() || hamilton_p <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "hamilton exponent must be positive, got {hamilton_p}"
        )));
    }
    if let Some(o) = set.observations().iter().find(|o| o.predicted() == 0.0) {
        return Err(Error::Domain(format!(
            "observation {}: Hill and Adams statistics are undefined at a zero prediction",
            o.id()
        )));
    }

    let hamilton = set
        .observations()
        .iter()
        .map(|o| o.abs_error().powf(hamilton_p))
        .sum();
    let hill = set
        .observations()
        .iter()
        .map(|o| o.error() * o.error() / o.predicted())
        .sum();
    let jefferson = set
        .observations()
        .iter()
        .map(|o| o.predicted() / o.actual())
        .fold(f64::NEG_INFINITY, f64::max);
    let adams = set
        .observations()
        .iter()
        .map(|o| o.actual() / o.predicted())
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(ApportionmentMetrics {
        hamilton: TaggedMetric {
            value: hamilton,
            violations: vec![Violation::Assumption3],
        },
        hill: TaggedMetric {
            value: hill,
            violations: vec![Violation::Assumption3],
        },
        jefferson: TaggedMetric {
            value: jefferson,
            violations: vec![Violation::Assumption3, Violation::VonNeumannMorgenstern],
        },
        adams: TaggedMetric {
            value: adams,
            violations: vec![
                Violation::Assumption3,
                Violation::VonNeumannMorgenstern,
                Violation::Assumption1,
                Violation::Assumption2,
            ],
        },
    })
}

/// The small-area evaluation exponent q = ln(range)/25 - 1 for a given range
/// of actual values. Keeps q negative (and so the pair (1, q) inside the
/// axiom region) only for range < e^25, roughly 7.2e10.
pub fn bryan_q(range: f64) -> Result<f64> {
    if !range.is_finite() || range <= 0.0 {
        return Err(Error::Domain(format!(
            "range must be positive, got {range}"
        )));
    }
    Ok(range.ln() / 25.0 - 1.0)
}

/// Draws predictions P_i = max(0, A_i + e_i) with e_i normal, mean zero and
/// variance `variance_factor * A_i`. Deterministic for a given seed.
pub fn generate_noisy_predictions(
    actuals: &[f64],
    variance_factor: f64,
    seed: u64,
) -> Result<PredictionSet> {
    if actuals.is_empty() {
        return Err(Error::Domain("actuals must be nonempty".to_string()));
    }
    if !variance_factor.is_finite() || variance_factor < 0.0 {
        return Err(Error::Domain(format!(
            "variance factor must be nonnegative, got {variance_factor}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observations = actuals
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let predicted = if variance_factor == 0.0 {
                a
            } else {
                let noise = Normal::new(0.0, (variance_factor * a).sqrt())
                    .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
                (a + rng.sample(noise)).max(0.0)
            };
            Observation::new((i + 1).to_string(), a, predicted)
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::new("noisy", observations)
}

const P90_NOTE: &str = "90PE is the nearest-rank order statistic at ceil(0.9 n)";

/// Computes the full side-by-side report for one prediction set: total and
/// mean loss under the supplied exponents plus every comparison metric, with
/// per-metric admissibility flags. Hill and Adams are omitted (with a note)
/// when the set contains a zero prediction.
pub fn metric_report(set: &PredictionSet, params: LossParams) -> MetricReport {
    let mut values = BTreeMap::new();
    let mut per_obs = BTreeMap::new();
    let mut flags = BTreeMap::new();
    let mut notes = vec![P90_NOTE.to_string()];

    let n = set.len() as f64;
    let components: Vec<f64> = set
        .observations()
        .iter()
        .map(|o| component_loss(o, params))
        .collect();
    let total: f64 = components.iter().sum();
    let loss_flag = flag_for_params(params);

    values.insert("loss_total".to_string(), total);
    per_obs.insert("loss_total".to_string(), components.clone());
    flags.insert("loss_total".to_string(), loss_flag);

    values.insert("loss_mean".to_string(), total / n);
    per_obs.insert("loss_mean".to_string(), components);
    flags.insert("loss_mean".to_string(), loss_flag);

    let webster_components: Vec<f64> = set
        .observations()
        .iter()
        .map(|o| component_loss(o, LossParams::webster()))
        .collect();
    values.insert(
        "average_estimated_variance".to_string(),
        average_estimated_variance(set),
    );
    per_obs.insert("average_estimated_variance".to_string(), webster_components);
    flags.insert(
        "average_estimated_variance".to_string(),
        AdmissibilityFlag::Admissible,
    );

    let ape_values = apes(set);
    values.insert("mape".to_string(), mape(set));
    per_obs.insert("mape".to_string(), ape_values);
    flags.insert("mape".to_string(), AdmissibilityFlag::ViolatesProperty1);

    values.insert("medape".to_string(), medape(set));
    flags.insert("medape".to_string(), AdmissibilityFlag::ViolatesVnm);

    values.insert("rmse".to_string(), rmse(set));
    per_obs.insert(
        "rmse".to_string(),
        set.observations()
            .iter()
            .map(|o| o.error() * o.error())
            .collect(),
    );
    flags.insert("rmse".to_string(), AdmissibilityFlag::ViolatesAssumption3);

    values.insert("rmspe".to_string(), rmspe(set));
    per_obs.insert(
        "rmspe".to_string(),
        set.observations()
            .iter()
            .map(|o| {
                let rel = o.error() / o.actual();
                rel * rel
            })
            .collect(),
    );
    flags.insert("rmspe".to_string(), AdmissibilityFlag::ViolatesProperty1);

    values.insert("p90_ape".to_string(), p90_ape(set));
    flags.insert("p90_ape".to_string(), AdmissibilityFlag::ViolatesVnm);

    // the share-based loss needs a positive prediction total
    match crate::loss::fellegi_components(set) {
        Ok(fellegi_parts) => {
            values.insert("fellegi".to_string(), fellegi_parts.iter().sum());
            per_obs.insert("fellegi".to_string(), fellegi_parts);
            flags.insert("fellegi".to_string(), AdmissibilityFlag::Admissible);
        }
        Err(_) => notes.push("fellegi omitted: prediction total is zero".to_string()),
    }

    match apportionment_metrics(set, 1.0) {
        Ok(app) => {
            values.insert("hamilton".to_string(), app.hamilton.value);
            per_obs.insert(
                "hamilton".to_string(),
                set.observations().iter().map(|o| o.abs_error()).collect(),
            );
            flags.insert(
                "hamilton".to_string(),
                AdmissibilityFlag::ViolatesAssumption3,
            );
            values.insert("hill".to_string(), app.hill.value);
            per_obs.insert(
                "hill".to_string(),
                set.observations()
                    .iter()
                    .map(|o| o.error() * o.error() / o.predicted())
                    .collect(),
            );
            flags.insert("hill".to_string(), AdmissibilityFlag::ViolatesAssumption3);
            values.insert("jefferson".to_string(), app.jefferson.value);
            flags.insert("jefferson".to_string(), AdmissibilityFlag::ViolatesVnm);
            values.insert("adams".to_string(), app.adams.value);
            flags.insert("adams".to_string(), AdmissibilityFlag::ViolatesVnm);
        }
        Err(_) => {
            // Jefferson survives a zero prediction; Hamilton needs no division
            let hamilton: f64 = set.observations().iter().map(|o| o.abs_error()).sum();
            values.insert("hamilton".to_string(), hamilton);
            per_obs.insert(
                "hamilton".to_string(),
                set.observations().iter().map(|o| o.abs_error()).collect(),
            );
            flags.insert(
                "hamilton".to_string(),
                AdmissibilityFlag::ViolatesAssumption3,
            );
            let jefferson = set
                .observations()
                .iter()
                .map(|o| o.predicted() / o.actual())
                .fold(f64::NEG_INFINITY, f64::max);
            values.insert("jefferson".to_string(), jefferson);
            flags.insert("jefferson".to_string(), AdmissibilityFlag::ViolatesVnm);
            notes.push("hill and adams omitted: zero predictions present".to_string());
        }
    }

    MetricReport {
        set_name: set.name().to_string(),
        metric_values: values,
        per_observation: per_obs,
        admissibility_flags: flags,
        notes,
    }
}

/// A vector of actuals with named scenarios of absolute errors, each error
/// strictly smaller than its actual so predictions stay positive on both
/// sides.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioTable {
    actuals: Vec<f64>,
    scenarios: Vec<(String, Vec<f64>)>,
}

impl ScenarioTable {
    pub fn new(actuals: Vec<f64>, scenarios: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if actuals.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(Error::Domain("actuals must all be positive".to_string()));
        }
        for (name, eps) in &scenarios {
            if eps.len() != actuals.len() {
                return Err(Error::Misaligned(format!(
                    "scenario {name}: {} errors for {} actuals",
                    eps.len(),
                    actuals.len()
                )));
            }
            for (e, a) in eps.iter().zip(actuals.iter()) {
                if !e.is_finite() || *e < 0.0 || *e >= *a {
                    return Err(Error::Domain(format!(
                        "scenario {name}: errors must satisfy 0 <= e < actual, got e={e} at actual={a}"
                    )));
                }
            }
        }
        Ok(Self { actuals, scenarios })
    }

    pub fn actuals(&self) -> &[f64] {
        &self.actuals
    }

    pub fn scenarios(&self) -> &[(String, Vec<f64>)] {
        &self.scenarios
    }

    /// One prediction set per scenario, with every error applied upward
    /// (P = A + e).
    pub fn prediction_sets(&self) -> Vec<PredictionSet> {
        self.scenarios
            .iter()
            .map(|(name, eps)| {
                let observations = self
                    .actuals
                    .iter()
                    .zip(eps.iter())
                    .enumerate()
                    .map(|(i, (&a, &e))| {
                        Observation::new((i + 1).to_string(), a, a + e)
                            .expect("validated at construction")
                    })
                    .collect();
                PredictionSet::new(name.clone(), observations).expect("nonempty by construction")
            })
            .collect()
    }
}

/// The scenario table together with a full Webster-loss metric report per
/// scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Table1Demo {
    pub table: ScenarioTable,
    pub reports: Vec<MetricReport>,
}

/// The built-in six-area, three-scenario comparison of MAPE against the mean
/// Webster loss: scenario 1 holds every APE at 2%, scenario 2 halves all but
/// the smallest area's APE while that one quintuples, and scenario 3 trims
/// the mid-size APEs while the largest area worsens by half.
pub fn table1_demo() -> Table1Demo {
    let actuals = vec![100_000.0, 50_000.0, 10_000.0, 5_000.0, 1_000.0, 100.0];
    let scenarios = vec![
        (
            "Scenario 1".to_string(),
            vec![2000.0, 1000.0, 200.0, 100.0, 20.0, 2.0],
        ),
        (
            "Scenario 2".to_string(),
            vec![1000.0, 500.0, 100.0, 50.0, 10.0, 10.0],
        ),
        (
            "Scenario 3".to_string(),
            vec![3000.0, 850.0, 170.0, 85.0, 17.0, 2.0],
        ),
    ];
    let table = ScenarioTable::new(actuals, scenarios).expect("static data is valid");
    let reports = table
        .prediction_sets()
        .iter()
        .map(|set| metric_report(set, LossParams::webster()))
        .collect();
    Table1Demo { table, reports }
}
