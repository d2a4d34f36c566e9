//! Recovery of loss exponents from elicited preferences.
//!
//! A decision-maker scores the acceptability of (error, actual) pairs on a
//! 0..100 scale. Scores convert to losses via L = 100 - U, zero-acceptability
//! pairs are removed, fully-satisfied pairs are floored (or dropped), and the
//! exponents are estimated by ordinary least squares on
//! `log L = log a + p log eps + q log A + u`, followed by a specification
//! check on p + q.

use serde::Serialize;

use crate::error::{Error, Result};

/// One elicited triple: error size, actual value, and the stated
/// satisfaction in percentage points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElicitationSample {
    epsilon: f64,
    actual: f64,
    satisfaction: f64,
}

impl ElicitationSample {
    pub fn new(epsilon: f64, actual: f64, satisfaction: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::Domain(format!(
                "elicited error must be positive, got {epsilon}"
            )));
        }
        if !actual.is_finite() || actual <= 0.0 {
            return Err(Error::Domain(format!(
                "elicited actual must be positive, got {actual}"
            )));
        }
        if !satisfaction.is_finite() || !(0.0..=100.0).contains(&satisfaction) {
            return Err(Error::Domain(format!(
                "satisfaction must lie in [0, 100], got {satisfaction}"
            )));
        }
        Ok(Self {
            epsilon,
            actual,
            satisfaction,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn actual(&self) -> f64 {
        self.actual
    }

    pub fn satisfaction(&self) -> f64 {
        self.satisfaction
    }

    /// The loss implied by the satisfaction score: L = 100 - U.
    pub fn loss(&self) -> f64 {
        100.0 - self.satisfaction
    }
}

/// What to do with fully satisfied samples (U = 100, so log L diverges).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturatedPolicy {
    /// Keep the sample with its loss floored at delta.
    Floor,
    /// Remove the sample.
    Drop,
}

pub const DEFAULT_FLOOR_DELTA: f64 = 0.01;

/// A usable (eps, actual, loss) triple with loss strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossPoint {
    pub epsilon: f64,
    pub actual: f64,
    pub loss: f64,
}

/// The cleaned sample plus accounting for everything removed or floored.
#[derive(Debug, Clone, Serialize)]
pub struct CleanedSamples {
    pub points: Vec<LossPoint>,
    pub n_used: usize,
    pub n_dropped_zero_u: usize,
    pub n_floored: usize,
    pub n_dropped_saturated: usize,
}

/// Removes zero-acceptability samples, converts satisfaction to loss, and
/// applies the saturated-sample policy. Errors when fewer than three usable
/// points remain (three coefficients need three equations).
pub fn clean_samples(
    samples: &[ElicitationSample],
    floor_delta: f64,
    saturated: SaturatedPolicy,
) -> Result<CleanedSamples> {
    if !floor_delta.is_finite() || floor_delta <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "floor delta must be positive, got {floor_delta}"
        )));
    }

    let mut points = Vec::with_capacity(samples.len());
    let mut n_dropped_zero_u = 0;
    let mut n_floored = 0;
    let mut n_dropped_saturated = 0;
    for sample in samples {
        if sample.satisfaction == 0.0 {
            n_dropped_zero_u += 1;
            continue;
        }
        let loss = sample.loss();
        let loss = if loss == 0.0 {
            match saturated {
                SaturatedPolicy::Floor => {
                    n_floored += 1;
                    floor_delta
                }
                SaturatedPolicy::Drop => {
                    n_dropped_saturated += 1;
                    continue;
                }
            }
        } else {
            loss
        };
        points.push(LossPoint {
            epsilon: sample.epsilon,
            actual: sample.actual,
            loss,
        });
    }

    if points.is_empty() {
        return Err(Error::InsufficientData(
            "no usable samples after cleaning".to_string(),
        ));
    }
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} usable samples after cleaning; at least 3 are needed",
            points.len()
        )));
    }

    Ok(CleanedSamples {
        n_used: points.len(),
        points,
        n_dropped_zero_u,
        n_floored,
        n_dropped_saturated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardErrors {
    pub se_p: f64,
    pub se_q: f64,
    pub se_intercept: f64,
}

/// Ordinary least squares estimates of the loss exponents.
///
/// Standard errors come from the classical unbiased variance estimator and
/// are NaN when the fit is an exact interpolation (zero degrees of freedom).
#[derive(Debug, Clone, Serialize)]
pub struct RegressionFit {
    pub p_hat: f64,
    pub q_hat: f64,
    /// log of the scale constant; the constant itself carries no
    /// information about the exponents.
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub standard_errors: StandardErrors,
    pub n_used: usize,
    pub n_dropped_zero_u: usize,
    pub n_floored: usize,
    /// n * R-squared from regressing squared residuals on log actual;
    /// large values hint at heteroscedastic satisfaction noise.
    pub het_score: f64,
}

/// Relative pivot threshold for declaring the normal equations rank
/// deficient, measured against the largest diagonal entry.
const RANK_TOLERANCE: f64 = 1e-10;

/// Gauss-Jordan inversion of a symmetric 3x3 with partial pivoting.
/// Fails when a pivot falls below `RANK_TOLERANCE` times the largest
/// initial diagonal entry.
fn invert3(m: [[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let max_diag = m[0][0].abs().max(m[1][1].abs()).max(m[2][2].abs());
    let threshold = RANK_TOLERANCE * max_diag;

    // augmented [m | I]
    let mut a = [[0.0f64; 6]; 3];
    for (i, row) in m.iter().enumerate() {
        a[i][..3].copy_from_slice(row);
        a[i][3 + i] = 1.0;
    }

    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("nonempty range");
        if a[pivot_row][col].abs() <= threshold {
            return Err(Error::RankDeficient(
                "design matrix (1, log eps, log actual) has collinear columns; \
                 vary both the errors and the actuals across samples"
                    .to_string(),
            ));
        }
        a.swap(col, pivot_row);
        let pivot = a[col][col];
        for x in a[col].iter_mut() {
            *x /= pivot;
        }
        let pivot_row = a[col];
        for (row, entries) in a.iter_mut().enumerate() {
            if row != col {
                let factor = entries[col];
                for (x, p) in entries.iter_mut().zip(pivot_row.iter()) {
                    *x -= factor * p;
                }
            }
        }
    }

    let mut inv = [[0.0f64; 3]; 3];
    for i in 0..3 {
        inv[i].copy_from_slice(&a[i][3..]);
    }
    Ok(inv)
}

/// Fits `log L = intercept + p log eps + q log A` by least squares on the
/// normal equations.
pub fn fit_loss_params(cleaned: &CleanedSamples) -> Result<RegressionFit> {
    let n = cleaned.points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} samples cannot identify 3 coefficients"
        )));
    }

    let rows: Vec<[f64; 3]> = cleaned
        .points
        .iter()
        .map(|pt| [1.0, pt.epsilon.ln(), pt.actual.ln()])
        .collect();
    let y: Vec<f64> = cleaned.points.iter().map(|pt| pt.loss.ln()).collect();

    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (row, &yi) in rows.iter().zip(y.iter()) {
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * yi;
        }
    }

    let inv = invert3(xtx)?;
    let mut beta = [0.0f64; 3];
    for i in 0..3 {
        for j in 0..3 {
            beta[i] += inv[i][j] * xty[j];
        }
    }

    let residuals: Vec<f64> = rows
        .iter()
        .zip(y.iter())
        .map(|(row, &yi)| yi - (beta[0] + beta[1] * row[1] + beta[2] * row[2]))
        .collect();
    let rss: f64 = residuals.iter().map(|u| u * u).sum();
    let sigma2 = if n > 3 {
        rss / (n - 3) as f64
    } else {
        f64::NAN
    };

    Ok(RegressionFit {
        p_hat: beta[1],
        q_hat: beta[2],
        intercept: beta[0],
        standard_errors: StandardErrors {
            se_p: (sigma2 * inv[1][1]).sqrt(),
            se_q: (sigma2 * inv[2][2]).sqrt(),
            se_intercept: (sigma2 * inv[0][0]).sqrt(),
        },
        het_score: het_score(&rows, &residuals),
        residuals,
        n_used: cleaned.n_used,
        n_dropped_zero_u: cleaned.n_dropped_zero_u,
        n_floored: cleaned.n_floored,
    })
}

/// n * R-squared from the auxiliary regression of squared residuals on
/// log actual. Zero when either side has no variance.
fn het_score(rows: &[[f64; 3]], residuals: &[f64]) -> f64 {
    let n = rows.len() as f64;
    let z: Vec<f64> = residuals.iter().map(|u| u * u).collect();
    let a: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let mean_z = z.iter().sum::<f64>() / n;
    let mean_a = a.iter().sum::<f64>() / n;
    let var_z: f64 = z.iter().map(|v| (v - mean_z) * (v - mean_z)).sum();
    let var_a: f64 = a.iter().map(|v| (v - mean_a) * (v - mean_a)).sum();
    if var_z <= 0.0 || var_a <= 0.0 {
        return 0.0;
    }
    let cov: f64 = z
        .iter()
        .zip(a.iter())
        .map(|(&zi, &ai)| (zi - mean_z) * (ai - mean_a))
        .sum();
    let r2 = (cov * cov) / (var_z * var_a);
    n * r2
}

/// Critical value (chi-squared, 1 df, 5%) above which the heteroscedasticity
/// score is worth a note.
const HET_SCORE_CUTOFF: f64 = 3.84;

/// Post-fit verdicts on the estimated exponents.
#[derive(Debug, Clone, Serialize)]
pub struct SpecificationResult {
    /// p + q > 0: loss rises in the actual at a fixed relative error.
    pub property1_holds: bool,
    pub p_positive: bool,
    pub sum_pq: f64,
    pub diagnostics: Vec<String>,
}

/// Checks the fitted exponents against the axioms. A violation is a finding
/// about the preferences (or the functional form), not an error.
pub fn specification_test(fit: &RegressionFit) -> SpecificationResult {
    let sum_pq = fit.p_hat + fit.q_hat;
    let property1_holds = sum_pq > 0.0;
    let p_positive = fit.p_hat > 0.0;
    let mut diagnostics = Vec::new();
    if !property1_holds {
        diagnostics.push(
            "estimated p + q is nonpositive: either the log-linear form is misspecified \
             or the preferences do not rise in the actual at a fixed relative error"
                .to_string(),
        );
    }
    if !p_positive {
        diagnostics
            .push("estimated p is nonpositive: loss should increase in the error".to_string());
    }
    if fit.het_score > HET_SCORE_CUTOFF {
        diagnostics.push(format!(
            "heteroscedasticity score {:.2} (squared residuals on log actual) exceeds {HET_SCORE_CUTOFF}; \
             weighted regression may be warranted (advisory only)",
            fit.het_score
        ));
    }
    SpecificationResult {
        property1_holds,
        p_positive,
        sum_pq,
        diagnostics,
    }
}
