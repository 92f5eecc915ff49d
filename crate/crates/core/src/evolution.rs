//! Closed-form dynamics: the dephasing factor `r(t)`, its bounds, the reduced
//! state of the central spin and expectation values, all `O(N)` per time.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{FullObservable, RelevantObservable, SpinBathModel};

/// Dephasing factor `r(t) = ⟨E_⇓(t)|E_⇑(t)⟩ = Π_i (|α_i|² e^{-i g_i t} + |β_i|² e^{i g_i t})`.
///
/// Each factor is evaluated as `cos(g t) + i (|β|² − |α|²) sin(g t)`, which
/// relies on the normalization invariant and makes `r(0) = 1` exact.
pub fn r_of_t(model: &SpinBathModel, t: f64) -> Complex64 {
    model.spins().iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
        let (sin, cos) = (s.coupling() * t).sin_cos();
        acc * Complex64::new(cos, (s.down_population() - s.up_population()) * sin)
    })
}

/// `|r(t)|²` from the real product `Π (|α|⁴ + |β|⁴ + 2|α|²|β|² cos 2gt)`.
///
/// Each factor is written as `1 − 2|α|²|β|² (1 − cos 2gt)`, equal to the
/// above when `|α|² + |β|² = 1`, so `t = 0` gives exactly one.
pub fn r_squared(model: &SpinBathModel, t: f64) -> f64 {
    model.spins().iter().fold(1.0, |acc, s| {
        let (p, q) = (s.up_population(), s.down_population());
        acc * (1.0 - 2.0 * p * q * (1.0 - (2.0 * s.coupling() * t).cos()))
    })
}

/// Envelope of `|r(t)|²`: `(Π (2|α_i|² − 1)², 1)`.
pub fn r_bounds(model: &SpinBathModel) -> (f64, f64) {
    let lower = model.spins().iter().fold(1.0, |acc, s| {
        let d = 2.0 * s.up_population() - 1.0;
        acc * d * d
    });
    (lower, 1.0)
}

/// `⟨O_S ⊗ I⟩ = |a|² s_⇑⇑ + |b|² s_⇓⇓ + 2 Re[a b* s_⇓⇑ r(t)]`.
pub fn expectation_relevant(model: &SpinBathModel, obs: &RelevantObservable, t: f64) -> f64 {
    let (a, b) = (model.a(), model.b());
    a.norm_sqr() * obs.s_uu
        + b.norm_sqr() * obs.s_dd
        + 2.0 * (a * b.conj() * obs.s_du * r_of_t(model, t)).re
}

/// Environment factors of a full product observable.
///
/// `up` and `down` are `⟨E_⇑|⊗O_i|E_⇑⟩` and `⟨E_⇓|⊗O_i|E_⇓⟩`; `cross` is
/// `⟨E_⇓|⊗O_i|E_⇑⟩`, which reduces to `r(t)` when every `O_i` is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentFactors {
    pub up: f64,
    pub down: f64,
    pub cross: Complex64,
}

pub fn environment_factors(
    model: &SpinBathModel,
    obs: &FullObservable,
    t: f64,
) -> Result<EnvironmentFactors> {
    obs.check_len(model.n_spins())?;
    let mut up = 1.0;
    let mut down = 1.0;
    let mut cross = Complex64::new(1.0, 0.0);
    for (s, e) in model.spins().iter().zip(&obs.env_parts) {
        let (p, q) = (s.up_population(), s.down_population());
        let diagonal = p * e.e_uu + q * e.e_dd;
        let coherence = s.alpha() * s.beta().conj() * e.e_du;
        let phase = Complex64::from_polar(1.0, s.coupling() * t);
        // the ⇑ branch carries e^{-igt} on the coherence, the ⇓ branch e^{+igt}
        up *= diagonal + 2.0 * (coherence * phase.conj()).re;
        down *= diagonal + 2.0 * (coherence * phase).re;
        cross *= p * e.e_uu * phase.conj() + q * e.e_dd * phase + 2.0 * coherence.re;
    }
    Ok(EnvironmentFactors { up, down, cross })
}

/// Expectation of `O_P ⊗ (⊗_i O_i)` in `|ψ(t)⟩`:
/// `|a|² s_⇑⇑ Γ_⇑ + |b|² s_⇓⇓ Γ_⇓ + 2 Re[a b* s_⇓⇑ Γ_1]`.
pub fn expectation_full(model: &SpinBathModel, obs: &FullObservable, t: f64) -> Result<f64> {
    let f = environment_factors(model, obs, t)?;
    let (a, b) = (model.a(), model.b());
    let sys = &obs.system_part;
    Ok(a.norm_sqr() * sys.s_uu * f.up
        + b.norm_sqr() * sys.s_dd * f.down
        + 2.0 * (a * b.conj() * sys.s_du * f.cross).re)
}

/// 2×2 reduced density matrix of the central spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub p_uu: f64,
    pub p_dd: f64,
    /// The `⟨⇑|ρ_S|⇓⟩` entry.
    pub coherence: Complex64,
}

impl ReducedState {
    /// `Tr(ρ_S O_S)`.
    pub fn expectation(&self, obs: &RelevantObservable) -> f64 {
        self.p_uu * obs.s_uu + self.p_dd * obs.s_dd + 2.0 * (self.coherence * obs.s_du).re
    }
}

/// Partial trace over the environment: coherence is `a b* r(t)`.
pub fn reduced_state(model: &SpinBathModel, t: f64) -> ReducedState {
    let (a, b) = (model.a(), model.b());
    ReducedState {
        p_uu: a.norm_sqr(),
        p_dd: b.norm_sqr(),
        coherence: a * b.conj() * r_of_t(model, t),
    }
}

/// Sampled dynamics on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub r_values: Vec<Complex64>,
    pub r_squared: Vec<f64>,
    pub expectation_values: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `steps` points from `t_start` to `t_end` inclusive. Point `k` is
/// `t_start + (t_end − t_start)·k/(steps − 1)` and the last point is `t_end`.
pub fn uniform_grid(t_start: f64, t_end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_start.is_finite() && t_end.is_finite()) || t_start >= t_end {
        return Err(Error::InvalidParameter(format!(
            "time grid needs finite t_start < t_end, got [{t_start}, {t_end}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "time grid needs at least 2 steps, got {steps}"
        )));
    }
    let span = t_end - t_start;
    let last = (steps - 1) as f64;
    let mut times: Vec<f64> = (0..steps)
        .map(|k| t_start + span * k as f64 / last)
        .collect();
    times[steps - 1] = t_end;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "time grid is too fine to be strictly increasing".into(),
        ));
    }
    Ok(times)
}

pub fn sample_series(
    model: &SpinBathModel,
    t_start: f64,
    t_end: f64,
    steps: usize,
    obs: Option<&RelevantObservable>,
) -> Result<TimeSeries> {
    let times = uniform_grid(t_start, t_end, steps)?;
    let r_values = times.iter().map(|&t| r_of_t(model, t)).collect();
    let r_sq = times.iter().map(|&t| r_squared(model, t)).collect();
    let expectation_values =
        obs.map(|o| times.iter().map(|&t| expectation_relevant(model, o, t)).collect());
    Ok(TimeSeries {
        times,
        r_values,
        r_squared: r_sq,
        expectation_values,
    })
}

/// Time average of `|r(t)|²` over `[t_start, t_end]` by the composite
/// trapezoidal rule on `steps` points.
pub fn time_average_r_squared(
    model: &SpinBathModel,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<f64> {
    let times = uniform_grid(t_start, t_end, steps)?;
    let values: Vec<f64> = times.iter().map(|&t| r_squared(model, t)).collect();
    Ok(trapezoid_mean(&values))
}

/// Mean of equally spaced samples under the trapezoidal rule.
pub(crate) fn trapezoid_mean(values: &[f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let interior: f64 = values[1..n - 1].iter().sum();
    (interior + 0.5 * (values[0] + values[n - 1])) / (n - 1) as f64
}
