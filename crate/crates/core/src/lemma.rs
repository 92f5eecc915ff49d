//! Decision procedure for decoherence of a finite trigonometric sum
//! `Σ_i f(x_i) e^{i x_i t}`: hypothesis checks on the point set (quasi-continuity
//! of class 1) and on the weights (membership in `L_1`), a recurrence-time
//! estimate, and the verdict. The verdict uses the hypotheses only; the sum
//! at half the recurrence time is reported as a diagnostic.

use std::f64::consts::TAU;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpinBathModel;
use crate::spectrum::{self, SpectralDecomposition};

/// Points `x_i` sorted ascending with nonnegative weights `f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidParameter("point set is empty".into()));
        }
        if !points.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("point set".into()));
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("points must be sorted ascending".into()));
        }
        Ok(Self { points, weights })
    }

    /// One point per merged spectral line, weighted by its aggregated mass.
    pub fn from_decomposition(dec: &SpectralDecomposition) -> Self {
        let (points, weights) = dec.lines().iter().map(|l| (l.omega, l.weight)).unzip();
        Self { points, weights }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcThresholds {
    /// Minimum number of points.
    pub n_min: usize,
    /// Upper bound on the gap coefficient of variation; `None` reports without gating.
    pub cv_max: Option<f64>,
    /// Upper bound on the sup-distance from the uniform CDF on `[min, max]`.
    pub ks_max: f64,
}

impl Default for QcThresholds {
    fn default() -> Self {
        Self {
            n_min: 64,
            cv_max: None,
            ks_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcDiagnostics {
    pub n_points: usize,
    /// Standard deviation over mean of consecutive gaps.
    pub gap_cv: f64,
    /// Kolmogorov–Smirnov distance of the point CDF from uniform on `[min, max]`.
    pub ks_stat: f64,
}

/// Quasi-continuity check: enough points, spread across their range.
pub fn check_quasi_continuous(
    set: &WeightedPointSet,
    thresholds: &QcThresholds,
) -> Result<(bool, QcDiagnostics)> {
    let x = set.points();
    let n = x.len();
    let (lo, hi) = (x[0], x[n - 1]);
    if n < 2 || hi == lo {
        return Err(Error::DegenerateSet(format!(
            "all {n} points coincide at {lo}"
        )));
    }
    let span = hi - lo;

    let mean_gap = span / (n - 1) as f64;
    let var = x
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0] - mean_gap;
            d * d
        })
        .sum::<f64>()
        / (n - 1) as f64;
    let gap_cv = var.sqrt() / mean_gap;

    let nf = n as f64;
    let ks_stat = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let cdf = ((xi - lo) / span).clamp(0.0, 1.0);
            ((i + 1) as f64 / nf - cdf).abs().max((cdf - i as f64 / nf).abs())
        })
        .fold(0.0, f64::max);

    let passes = n >= thresholds.n_min
        && thresholds.cv_max.is_none_or(|m| gap_cv <= m)
        && ks_stat <= thresholds.ks_max;
    Ok((
        passes,
        QcDiagnostics {
            n_points: n,
            gap_cv,
            ks_stat,
        },
    ))
}

/// Contiguous groups `X_k` of near-equal size over the sorted points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionScheme {
    pub g_groups: usize,
    pub p_per_group: usize,
    pub group_boundaries: Vec<Range<usize>>,
}

/// Splits the set into `g_groups` groups whose sizes differ by at most one,
/// larger groups first. `P = ⌈n/G⌉ − 1`.
pub fn make_partition(set: &WeightedPointSet, g_groups: usize) -> Result<PartitionScheme> {
    let n = set.len();
    if g_groups == 0 || g_groups > n {
        return Err(Error::InvalidParameter(format!(
            "number of groups must be in 1..={n}, got {g_groups}"
        )));
    }
    let (base, extra) = (n / g_groups, n % g_groups);
    let mut start = 0;
    let group_boundaries = (0..g_groups)
        .map(|k| {
            let size = base + usize::from(k < extra);
            let range = start..start + size;
            start += size;
            range
        })
        .collect();
    Ok(PartitionScheme {
        g_groups,
        p_per_group: n.div_ceil(g_groups) - 1,
        group_boundaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L1Thresholds {
    /// Bound on every weight.
    pub eps_global: f64,
    /// Bound on max − min weight inside each group.
    pub eps_group: f64,
}

impl Default for L1Thresholds {
    fn default() -> Self {
        Self {
            eps_global: 1e-3,
            eps_group: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Diagnostics {
    pub max_weight: f64,
    pub max_group_deviation: f64,
    pub worst_group: usize,
    /// Mean weight of each group, the representative `C_k`.
    pub group_constants: Vec<f64>,
}

/// Weight check: all weights small and roughly constant within each group.
pub fn check_l1(
    set: &WeightedPointSet,
    partition: &PartitionScheme,
    thresholds: &L1Thresholds,
) -> Result<(bool, L1Diagnostics)> {
    if partition.group_boundaries.last().map(|r| r.end) != Some(set.len()) {
        return Err(Error::InvalidParameter(
            "partition does not cover the point set".into(),
        ));
    }
    let w = set.weights();
    let max_weight = w.iter().copied().fold(0.0, f64::max);
    let mut max_group_deviation = 0.0;
    let mut worst_group = 0;
    let mut group_constants = Vec::with_capacity(partition.g_groups);
    for (k, range) in partition.group_boundaries.iter().enumerate() {
        let group = &w[range.clone()];
        let (lo, hi) = group
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if hi - lo > max_group_deviation {
            max_group_deviation = hi - lo;
            worst_group = k;
        }
        group_constants.push(group.iter().sum::<f64>() / group.len() as f64);
    }
    let passes = max_weight <= thresholds.eps_global && max_group_deviation <= thresholds.eps_group;
    Ok((
        passes,
        L1Diagnostics {
            max_weight,
            max_group_deviation,
            worst_group,
            group_constants,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumNormalization {
    /// Weights used as given (already normalized spectral weights).
    RawWeights,
    /// Weights divided by the number of points.
    DivideByN,
}

/// `Σ_i w_i e^{+i x_i t}`.
pub fn lemma_sum(set: &WeightedPointSet, t: f64, normalization: SumNormalization) -> Complex64 {
    let scale = match normalization {
        SumNormalization::RawWeights => 1.0,
        SumNormalization::DivideByN => 1.0 / set.len() as f64,
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (&x, &w) in set.points.iter().zip(&set.weights) {
        let (sin, cos) = (x * t).sin_cos();
        acc.re += scale * w * cos;
        acc.im += scale * w * sin;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RecurrenceTime {
    Finite(f64),
    EffectivelyInfinite,
}

impl RecurrenceTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            RecurrenceTime::Finite(t) => Some(t),
            RecurrenceTime::EffectivelyInfinite => None,
        }
    }
}

/// Distance of `y` from the nearest integer.
fn off_integer(y: f64) -> f64 {
    (y - y.round()).abs()
}

/// Smallest continued-fraction denominator `q ≤ q_max` with `q·y` within
/// `tolerance` of an integer.
fn rationalize(y: f64, q_max: u64, tolerance: f64) -> Option<u64> {
    let (mut h_prev, mut h) = (0.0f64, 1.0f64);
    let (mut k_prev, mut k) = (1u64, 0u64);
    let mut x = y;
    for _ in 0..64 {
        let a = x.floor();
        let h_next = a * h + h_prev;
        let k_next = (a as u64).checked_mul(k)?.checked_add(k_prev)?;
        if k_next > q_max {
            return None;
        }
        (h_prev, h) = (h, h_next);
        (k_prev, k) = (k, k_next);
        if off_integer(k as f64 * y) <= tolerance {
            return Some(k);
        }
        let frac = x - a;
        if frac <= 0.0 {
            return None;
        }
        x = 1.0 / frac;
    }
    None
}

/// Recurrence time `2π/Δ` for the common spacing `Δ` of the distinct points.
///
/// Consecutive differences are measured in units of the smallest one and
/// rationalized by continued fractions with denominators up to `q_max`. The
/// candidate `Δ` is accepted only if every difference is an integer multiple
/// of it to within `tolerance` cycles, i.e. every phase returns within
/// `2π·tolerance` at `t_P`. A set with one distinct point has no recurrence
/// structure and is reported as effectively infinite.
pub fn estimate_recurrence_time(points: &[f64], q_max: u64, tolerance: f64) -> Result<RecurrenceTime> {
    if q_max == 0 || !(tolerance > 0.0 && tolerance < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "recurrence search needs q_max >= 1 and 0 < tolerance < 0.5, got {q_max}, {tolerance}"
        )));
    }
    let mut distinct: Vec<f64> = points.to_vec();
    distinct.sort_unstable_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Ok(RecurrenceTime::EffectivelyInfinite);
    }
    let diffs: Vec<f64> = distinct.windows(2).map(|w| w[1] - w[0]).collect();
    let reference = diffs.iter().copied().fold(f64::INFINITY, f64::min);

    let mut denominator: u64 = 1;
    for &d in &diffs {
        let y = d / reference * denominator as f64;
        if off_integer(y) <= tolerance {
            continue;
        }
        let Some(q) = rationalize(y, q_max, tolerance) else {
            return Ok(RecurrenceTime::EffectivelyInfinite);
        };
        denominator = match denominator.checked_mul(q) {
            Some(l) if l <= q_max => l,
            _ => return Ok(RecurrenceTime::EffectivelyInfinite),
        };
    }

    let delta = reference / denominator as f64;
    let mut cycles = 0.0;
    for &d in &diffs {
        let m = d / delta;
        if off_integer(m) > tolerance || m.round() < 1.0 {
            return Ok(RecurrenceTime::EffectivelyInfinite);
        }
        cycles += m.round();
    }
    // spread rounding error over the whole span
    let delta = (distinct[distinct.len() - 1] - distinct[0]) / cycles;
    Ok(RecurrenceTime::Finite(TAU / delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Decoheres,
    NoVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HalfPeriodSum {
    Evaluated(f64),
    NotEvaluated,
}

/// Settings for [`decoherence_verdict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictConfig {
    /// Merge radius for coincident frequencies, relative to `max|g|`.
    pub omega_tolerance: f64,
    pub enumeration_cap: usize,
    pub qc: QcThresholds,
    pub l1: L1Thresholds,
    /// Number of groups; `None` uses `⌈√n⌉`.
    pub g_groups: Option<usize>,
    pub q_max: u64,
    /// Allowed phase slip at the recurrence, in cycles.
    pub recurrence_tolerance: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            omega_tolerance: 1e-12,
            enumeration_cap: spectrum::DEFAULT_ENUMERATION_CAP,
            qc: QcThresholds::default(),
            l1: L1Thresholds::default(),
            g_groups: None,
            q_max: 1_000_000,
            recurrence_tolerance: 1e-9,
        }
    }
}

/// Everything the verdict was based on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub n_spins: usize,
    pub n_points: usize,
    pub sum_of_weights: f64,
    pub max_multiplicity: u64,
    /// Set when some line aggregates more than one term.
    pub degenerate_lines: bool,
    pub quasi_continuous: bool,
    pub qc_gap_cv: f64,
    pub qc_ks_stat: f64,
    pub in_l1: bool,
    pub l1_max_weight: f64,
    pub l1_max_group_deviation: f64,
    pub l1_worst_group: usize,
    pub g_groups: usize,
    pub p_per_group: usize,
    pub recurrence_time: RecurrenceTime,
    pub lemma_sum_magnitude_at_half_tp: HalfPeriodSum,
    pub verdict: Verdict,
}

fn ceil_sqrt(n: usize) -> usize {
    let mut g = (n as f64).sqrt() as usize;
    while g * g < n {
        g += 1;
    }
    while g > 1 && (g - 1) * (g - 1) >= n {
        g -= 1;
    }
    g.max(1)
}

/// Runs the hypothesis checks on the merged spectrum of `r(t)`.
pub fn decoherence_verdict(model: &SpinBathModel, config: &VerdictConfig) -> Result<LemmaReport> {
    let dec = spectrum::spectral_decomposition_capped(
        model,
        config.omega_tolerance,
        config.enumeration_cap,
    )?;
    let sum_of_weights = dec.total_weight();
    let max_multiplicity = dec.max_multiplicity();
    let set = WeightedPointSet::from_decomposition(&dec);
    drop(dec);
    verdict_for_set(&set, model.n_spins(), sum_of_weights, max_multiplicity, config)
}

fn verdict_for_set(
    set: &WeightedPointSet,
    n_spins: usize,
    sum_of_weights: f64,
    max_multiplicity: u64,
    config: &VerdictConfig,
) -> Result<LemmaReport> {
    let n = set.len();
    let (quasi_continuous, qc) = check_quasi_continuous(set, &config.qc)?;
    let groups = config.g_groups.unwrap_or_else(|| ceil_sqrt(n)).min(n);
    let partition = make_partition(set, groups)?;
    let (in_l1, l1) = check_l1(set, &partition, &config.l1)?;
    let recurrence_time =
        estimate_recurrence_time(set.points(), config.q_max, config.recurrence_tolerance)?;
    let lemma_sum_magnitude_at_half_tp = match recurrence_time {
        RecurrenceTime::Finite(tp) => {
            HalfPeriodSum::Evaluated(lemma_sum(set, 0.5 * tp, SumNormalization::RawWeights).norm())
        }
        RecurrenceTime::EffectivelyInfinite => HalfPeriodSum::NotEvaluated,
    };
    let verdict = if quasi_continuous && in_l1 {
        Verdict::Decoheres
    } else {
        Verdict::NoVerdict
    };
    Ok(LemmaReport {
        n_spins,
        n_points: n,
        sum_of_weights,
        max_multiplicity,
        degenerate_lines: max_multiplicity > 1,
        quasi_continuous,
        qc_gap_cv: qc.gap_cv,
        qc_ks_stat: qc.ks_stat,
        in_l1,
        l1_max_weight: l1.max_weight,
        l1_max_group_deviation: l1.max_group_deviation,
        l1_worst_group: l1.worst_group,
        g_groups: partition.g_groups,
        p_per_group: partition.p_per_group,
        recurrence_time,
        lemma_sum_magnitude_at_half_tp,
        verdict,
    })
}
