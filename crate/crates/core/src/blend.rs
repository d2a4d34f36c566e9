//! Total-loss-minimizing weighted averages of prediction sets.
//!
//! The weight simplex is scanned on a lattice of integer compositions, the
//! incumbent's neighborhood optionally re-gridded at ten times the density
//! until the spacing drops below 1e-4. Blends may be rescaled to control
//! totals before loss evaluation. Lattice evaluation runs in parallel; the
//! reduction (min by loss, ties to the lexicographically smallest weight
//! vector) is a total order, so results do not depend on thread schedule.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::{loss_value, LossParams, Observation, PredictionSet};

/// Spacing below which refinement stops.
const REFINE_FLOOR: f64 = 1e-4;

/// Blend weights summing to one. Nonnegative unless built through
/// [`WeightVector::new_unconstrained`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weights must be nonnegative and finite, got {w}"
            )));
        }
        Self::new_unconstrained(weights)
    }

    /// Accepts negative weights; only the sum-to-one constraint is checked.
    pub fn new_unconstrained(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("weights must be nonempty".to_string()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be finite".to_string()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weights must sum to 1 within 1e-12, got {sum}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// One control group: the ids it covers and the total their predictions
/// must sum to.
#[derive(Debug, Clone, Serialize)]
pub struct ControlGroup {
    pub name: String,
    pub ids: Vec<String>,
    pub total: f64,
}

/// A partition of observation ids into groups with prescribed totals.
#[derive(Debug, Clone, Serialize)]
pub struct ControlSpec {
    groups: Vec<ControlGroup>,
}

impl ControlSpec {
    pub fn new(groups: Vec<ControlGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidConfig(
                "control spec needs at least one group".to_string(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for group in &groups {
            if !group.total.is_finite() || group.total <= 0.0 {
                return Err(Error::Domain(format!(
                    "control group {}: total must be positive, got {}",
                    group.name, group.total
                )));
            }
            if group.ids.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "control group {}: no ids listed",
                    group.name
                )));
            }
            for id in &group.ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Domain(format!(
                        "id {id} appears in more than one control group"
                    )));
                }
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[ControlGroup] {
        &self.groups
    }

    /// Maps each group's ids to observation indices, requiring the groups to
    /// partition the set's ids exactly.
    fn resolve(&self, ids: &[String]) -> Result<Vec<(Vec<usize>, f64)>> {
        let positions: std::collections::HashMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut covered = vec![false; ids.len()];
        let mut resolved = Vec::with_capacity(self.groups.len());
        for group in &self.groups {
            let mut indices = Vec::with_capacity(group.ids.len());
            for id in &group.ids {
                let &i = positions.get(id.as_str()).ok_or_else(|| {
                    Error::Domain(format!(
                        "control group {}: id {id} is not in the prediction set",
                        group.name
                    ))
                })?;
                covered[i] = true;
                indices.push(i);
            }
            resolved.push((indices, group.total));
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::Domain(format!(
                "id {} is not covered by any control group",
                ids[i]
            )));
        }
        Ok(resolved)
    }
}

/// Grid search options.
#[derive(Debug, Clone, Serialize)]
pub struct GridSearchConfig {
    /// Lattice spacing on the simplex, in (0, 1].
    pub resolution: f64,
    /// Re-grid the incumbent's neighborhood at spacing/10 per stage until
    /// the spacing drops below 1e-4.
    pub refine: bool,
    /// Let weights range over [-1, 2] instead of [0, 1]; blends that turn
    /// any prediction negative are discarded.
    pub allow_negative_weights: bool,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            resolution: 0.01,
            refine: false,
            allow_negative_weights: false,
        }
    }
}

/// Outcome of the weight search.
#[derive(Debug, Clone, Serialize)]
pub struct BlendResult {
    pub best_weights: WeightVector,
    pub best_loss: f64,
    pub blended: PredictionSet,
    /// Finest lattice spacing evaluated.
    pub grid_resolution: f64,
    /// Number of loss evaluations across all stages.
    pub evaluations: usize,
}

/// Elementwise convex combination of aligned prediction sets.
pub fn blend_predictions(sets: &[PredictionSet], w: &WeightVector) -> Result<PredictionSet> {
    let aligned = align(sets)?;
    if w.len() != sets.len() {
        return Err(Error::InvalidConfig(format!(
            "{} weights for {} prediction sets",
            w.len(),
            sets.len()
        )));
    }
    let observations = (0..aligned.len())
        .map(|i| {
            let p = combine(&aligned.preds, w.weights(), i);
            if p < 0.0 {
                return Err(Error::Domain(format!(
                    "observation {}: blended prediction {p} is negative",
                    aligned.ids[i]
                )));
            }
            Observation::new(aligned.ids[i].clone(), aligned.actuals[i], p)
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::new("blend", observations)
}

/// Scales each control group's predictions proportionally so its sum hits
/// the group total.
pub fn rescale_to_controls(set: &PredictionSet, spec: &ControlSpec) -> Result<PredictionSet> {
    let ids: Vec<String> = set
        .observations()
        .iter()
        .map(|o| o.id().to_string())
        .collect();
    let resolved = spec.resolve(&ids)?;
    let mut predictions = set.predictions();
    apply_controls(&mut predictions, &resolved).map_err(|group| {
        Error::Domain(format!(
            "control group {group} sums to 0 but its control total is positive"
        ))
    })?;
    let observations = set
        .observations()
        .iter()
        .zip(predictions)
        .map(|(o, p)| Observation::new(o.id(), o.actual(), p))
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::new(set.name(), observations)
}

/// In-place proportional rescale; on a zero group sum returns the index of
/// the offending group.
fn apply_controls(predictions: &mut [f64], resolved: &[(Vec<usize>, f64)]) -> std::result::Result<(), usize> {
    for (g, (indices, total)) in resolved.iter().enumerate() {
        let sum: f64 = indices.iter().map(|&i| predictions[i]).sum();
        if sum <= 0.0 {
            return Err(g);
        }
        let factor = total / sum;
        for &i in indices {
            predictions[i] *= factor;
        }
    }
    Ok(())
}

fn combine(preds: &[Vec<f64>], weights: &[f64], i: usize) -> f64 {
    let mut acc = 0.0;
    for (w, column) in weights.iter().zip(preds.iter()) {
        acc += w * column[i];
    }
    acc
}

struct Aligned {
    ids: Vec<String>,
    actuals: Vec<f64>,
    preds: Vec<Vec<f64>>,
}

impl Aligned {
    fn len(&self) -> usize {
        self.ids.len()
    }
}

fn align(sets: &[PredictionSet]) -> Result<Aligned> {
    let first = sets
        .first()
        .ok_or_else(|| Error::InvalidConfig("no prediction sets given".to_string()))?;
    let ids: Vec<String> = first
        .observations()
        .iter()
        .map(|o| o.id().to_string())
        .collect();
    let actuals = first.actuals();
    for set in &sets[1..] {
        if set.len() != first.len() {
            return Err(Error::Misaligned(format!(
                "set {} has {} observations, set {} has {}",
                set.name(),
                set.len(),
                first.name(),
                first.len()
            )));
        }
        for (a, b) in first.observations().iter().zip(set.observations()) {
            if a.id() != b.id() {
                return Err(Error::Misaligned(format!(
                    "id {} in set {} does not match id {} in set {}",
                    b.id(),
                    set.name(),
                    a.id(),
                    first.name()
                )));
            }
            if a.actual() != b.actual() {
                return Err(Error::Misaligned(format!(
                    "id {}: actual {} in set {} differs from {} in set {}",
                    a.id(),
                    b.actual(),
                    set.name(),
                    a.actual(),
                    first.name()
                )));
            }
        }
    }
    let preds = sets.iter().map(|s| s.predictions()).collect();
    Ok(Aligned {
        ids,
        actuals,
        preds,
    })
}

/// Searches the weight lattice for the total-loss-minimizing blend.
///
/// The lattice at spacing 1/m holds every integer composition (c_1..c_k) of
/// m mapped to w_i = c_i/m, so all vertices are always evaluated. With
/// `refine`, the incumbent's +-spacing neighborhood is re-gridded at ten
/// times the density per stage until the spacing drops below 1e-4. Ties go
/// to the lexicographically smallest weight vector; the result is
/// independent of evaluation order and thread count.
pub fn grid_search_weights(
    sets: &[PredictionSet],
    params: LossParams,
    config: &GridSearchConfig,
    controls: Option<&ControlSpec>,
) -> Result<BlendResult> {
    let k = sets.len();
    if k < 2 {
        return Err(Error::InvalidConfig(format!(
            "weight search needs at least 2 prediction sets, got {k}"
        )));
    }
    if !config.resolution.is_finite() || config.resolution <= 0.0 || config.resolution > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "resolution must lie in (0, 1], got {}",
            config.resolution
        )));
    }

    let aligned = align(sets)?;
    let resolved = match controls {
        Some(spec) => Some(spec.resolve(&aligned.ids)?),
        None => None,
    };

    let eval = |c: &[i64], m: i64| -> Option<f64> {
        let weights: Vec<f64> = c.iter().map(|&ci| ci as f64 / m as f64).collect();
        let n = aligned.len();
        let mut blended = Vec::with_capacity(n);
        for i in 0..n {
            let p = combine(&aligned.preds, &weights, i);
            if p < 0.0 {
                return None;
            }
            blended.push(p);
        }
        if let Some(resolved) = &resolved {
            apply_controls(&mut blended, resolved).ok()?;
        }
        let mut loss = 0.0;
        for (p, &a) in blended.iter().zip(aligned.actuals.iter()) {
            loss += loss_value((p - a).abs(), a, params);
        }
        Some(loss)
    };

    let mut m = (1.0 / config.resolution).round() as i64;
    let (lo, hi) = global_bounds(k, m, config.allow_negative_weights);
    let (mut best, mut evaluations) = scan_lattice(k, m, &lo, &hi, &eval);

    if config.refine {
        while 1.0 / m as f64 >= REFINE_FLOOR {
            let m_next = m * 10;
            let (glo, ghi) = global_bounds(k, m_next, config.allow_negative_weights);
            let incumbent = &best
                .as_ref()
                .ok_or_else(|| {
                    Error::Domain(
                        "no feasible lattice point: every blend violated a constraint".to_string(),
                    )
                })?
                .1;
            let lo: Vec<i64> = incumbent
                .iter()
                .zip(glo.iter())
                .map(|(&c, &g)| (10 * c - 10).max(g))
                .collect();
            let hi: Vec<i64> = incumbent
                .iter()
                .zip(ghi.iter())
                .map(|(&c, &g)| (10 * c + 10).min(g))
                .collect();
            let (stage_best, stage_evals) = scan_lattice(k, m_next, &lo, &hi, &eval);
            evaluations += stage_evals;
            // the incumbent is inside the new box, so the stage minimum can
            // only improve on it (or tie at a lex-smaller point)
            best = stage_best;
            m = m_next;
        }
    }

    let (_, best_c) = best.ok_or_else(|| {
        Error::Domain("no feasible lattice point: every blend violated a constraint".to_string())
    })?;
    let weights: Vec<f64> = best_c.iter().map(|&ci| ci as f64 / m as f64).collect();
    let best_weights = if config.allow_negative_weights {
        WeightVector::new_unconstrained(weights)?
    } else {
        WeightVector::new(weights)?
    };

    let mut blended = blend_predictions(sets, &best_weights)?;
    if let Some(spec) = controls {
        blended = rescale_to_controls(&blended, spec)?;
    }
    let best_loss = crate::loss::total_loss(&blended, params);

    Ok(BlendResult {
        best_weights,
        best_loss,
        blended,
        grid_resolution: 1.0 / m as f64,
        evaluations,
    })
}

fn global_bounds(k: usize, m: i64, allow_negative: bool) -> (Vec<i64>, Vec<i64>) {
    if allow_negative {
        (vec![-m; k], vec![2 * m; k])
    } else {
        (vec![0; k], vec![m; k])
    }
}

type LatticeBest = Option<(f64, Vec<i64>)>;

/// Evaluates every bounded integer composition of m and returns the best
/// (loss, point) plus the evaluation count. Parallel over the first
/// coordinate; the reduction key (loss, then lexicographic point) is a
/// strict total order over distinct points, so the minimum is unique.
fn scan_lattice(
    k: usize,
    m: i64,
    lo: &[i64],
    hi: &[i64],
    eval: &(impl Fn(&[i64], i64) -> Option<f64> + Sync),
) -> (LatticeBest, usize) {
    // suffix sums of the bounds prune branches that cannot reach m
    let mut lo_suffix = vec![0i64; k + 1];
    let mut hi_suffix = vec![0i64; k + 1];
    for i in (0..k).rev() {
        lo_suffix[i] = lo_suffix[i + 1] + lo[i];
        hi_suffix[i] = hi_suffix[i + 1] + hi[i];
    }

    let first_lo = lo[0].max(m - hi_suffix[1]);
    let first_hi = hi[0].min(m - lo_suffix[1]);
    (first_lo..=first_hi)
        .collect::<Vec<i64>>()
        .par_iter()
        .map(|&c0| {
            let mut point = vec![0i64; k];
            point[0] = c0;
            let mut best: LatticeBest = None;
            let mut count = 0usize;
            descend(
                &mut point,
                1,
                m - c0,
                lo,
                hi,
                &lo_suffix,
                &hi_suffix,
                m,
                eval,
                &mut best,
                &mut count,
            );
            (best, count)
        })
        .reduce(
            || (None, 0),
            |(a, ca), (b, cb)| (better(a, b), ca + cb),
        )
}

#[allow(clippy::too_many_arguments)]
fn descend(
    point: &mut Vec<i64>,
    depth: usize,
    remaining: i64,
    lo: &[i64],
    hi: &[i64],
    lo_suffix: &[i64],
    hi_suffix: &[i64],
    m: i64,
    eval: &impl Fn(&[i64], i64) -> Option<f64>,
    best: &mut LatticeBest,
    count: &mut usize,
) {
    let k = point.len();
    if depth == k - 1 {
        if remaining >= lo[depth] && remaining <= hi[depth] {
            point[depth] = remaining;
            if let Some(loss) = eval(point, m) {
                *count += 1;
                let candidate = Some((loss, point.clone()));
                *best = better(best.take(), candidate);
            }
        }
        return;
    }
    let from = lo[depth].max(remaining - hi_suffix[depth + 1]);
    let to = hi[depth].min(remaining - lo_suffix[depth + 1]);
    for v in from..=to {
        point[depth] = v;
        descend(
            point,
            depth + 1,
            remaining - v,
            lo,
            hi,
            lo_suffix,
            hi_suffix,
            m,
            eval,
            best,
            count,
        );
    }
}

/// Min under (loss, lexicographic point); a strict total order over
/// distinct lattice points.
fn better(a: LatticeBest, b: LatticeBest) -> LatticeBest {
    match (a, b) {
        (None, b) => b,
        (a, None) => a,
        (Some(x), Some(y)) => {
            let keep_x = match x.0.total_cmp(&y.0) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => x.1 <= y.1,
            };
            if keep_x {
                Some(x)
            } else {
                Some(y)
            }
        }
    }
}
