//! Experiment runner behind the `spinbath` binary: config parsing, the
//! simulate / predict / compare / spectrum pipelines, the oracle gate and
//! artifact emission.
//!
//! Config documents are JSON:
//!
//! ```json
//! {
//!   "model": {"random": {"n": 20, "seed": 7,
//!                        "coupling": {"uniform_positive": {"g_max": 1.0}},
//!                        "phase": "zero", "population_range": [0.0, 1.0]}},
//!   "time_grid": {"t_start": 0.0, "t_end": 40.0, "steps": 2000},
//!   "observable": {"s_uu": 0.0, "s_dd": 0.0, "s_du": [1.0, 0.0]},
//!   "verdict": {"l1": {"eps_global": 1e-3}},
//!   "output": {"format": "csv", "path": "out.csv"}
//! }
//! ```
//!
//! `model` may instead be `{"inline": <model document>}`. Everything except
//! `model` is optional; the default grid is `[0, 20/ḡ]` with 2000 points.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{self, TimeSeries};
use crate::lemma::{self, LemmaReport, VerdictConfig, Verdict};
use crate::model::{
    FullObservable, ModelDocument, ObservableDocument, RandomModelSpec, RelevantObservable,
    SpinBathModel,
};
use crate::spectrum::{self, SpectralDecomposition};

/// Default number of grid points.
pub const DEFAULT_STEPS: usize = 2000;
/// Default grid length in units of `1/ḡ`.
pub const DEFAULT_SPAN_IN_COUPLING_TIMES: f64 = 20.0;
/// Absolute agreement required between closed form and state-vector oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: OutputFormat,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Inline(ModelDocument),
    Random(RandomModelSpec),
}

/// Raw experiment document, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<TimeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableDocument>,
    #[serde(default)]
    pub verdict: VerdictConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn parse_with_path<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    pub fn new(model: ModelSource) -> Self {
        Self {
            model,
            time_grid: None,
            observable: None,
            verdict: VerdictConfig::default(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_with_path(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Validates every field and builds the model. Errors name the field path.
    pub fn resolve(&self) -> Result<Experiment> {
        let model = match &self.model {
            ModelSource::Inline(doc) => doc.clone().into_model("model.inline")?,
            ModelSource::Random(spec) => spec
                .generate()
                .map_err(|e| Error::config("model.random", e.to_string()))?,
        };
        let grid = match self.time_grid {
            Some(grid) => {
                evolution::uniform_grid(grid.t_start, grid.t_end, grid.steps)
                    .map_err(|e| Error::config("time_grid", e.to_string()))?;
                grid
            }
            None => TimeGrid {
                t_start: 0.0,
                t_end: DEFAULT_SPAN_IN_COUPLING_TIMES / model.mean_abs_coupling(),
                steps: DEFAULT_STEPS,
            },
        };
        let observable = self
            .observable
            .map(|o| o.into_observable())
            .transpose()
            .map_err(|e| Error::config("observable", e.to_string()))?;
        Ok(Experiment {
            model,
            grid,
            observable,
            verdict: self.verdict,
            output: self.output.clone(),
        })
    }
}

/// Reads a standalone model document and validates it. Error paths are
/// relative to the document root.
pub fn load_model_document(path: &Path) -> Result<ModelDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelDocument = parse_with_path(&text)?;
    doc.clone().into_model("")?;
    Ok(doc)
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub model: SpinBathModel,
    pub grid: TimeGrid,
    pub observable: Option<RelevantObservable>,
    pub verdict: VerdictConfig,
    pub output: Option<OutputSpec>,
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn emit(output: Option<&OutputSpec>, contents: &str) -> Result<()> {
    if let Some(out) = output {
        write_atomic(&out.path, contents.as_bytes())?;
    }
    Ok(())
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SERIES_CSV_HEADER: &str = "t,re_r,im_r,r_sq,expectation";

/// One row per grid point; `expectation` is left empty without an observable.
pub fn series_to_csv(series: &TimeSeries) -> String {
    let mut out = String::with_capacity(100 * (series.len() + 1));
    out.push_str(SERIES_CSV_HEADER);
    out.push('\n');
    for k in 0..series.len() {
        let r = series.r_values[k];
        let _ = write!(
            out,
            "{},{},{},{},",
            sci(series.times[k]),
            sci(r.re),
            sci(r.im),
            sci(series.r_squared[k])
        );
        if let Some(e) = &series.expectation_values {
            out.push_str(&sci(e[k]));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    re_r: f64,
    im_r: f64,
    r_sq: f64,
    expectation: Option<f64>,
}

pub fn series_to_json(series: &TimeSeries) -> String {
    let rows: Vec<SeriesRow> = (0..series.len())
        .map(|k| SeriesRow {
            t: series.times[k],
            re_r: series.r_values[k].re,
            im_r: series.r_values[k].im,
            r_sq: series.r_squared[k],
            expectation: series.expectation_values.as_ref().map(|e| e[k]),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "samples": rows }))
        .expect("series serializes");
    text.push('\n');
    text
}

/// Samples `r(t)`, `|r(t)|²` and the optional observable on the grid and
/// writes the requested artifact.
pub fn run_simulate(exp: &Experiment) -> Result<TimeSeries> {
    let g = exp.grid;
    let series = evolution::sample_series(
        &exp.model,
        g.t_start,
        g.t_end,
        g.steps,
        exp.observable.as_ref(),
    )?;
    if let Some(out) = &exp.output {
        let text = match out.format {
            OutputFormat::Csv => series_to_csv(&series),
            OutputFormat::Json => series_to_json(&series),
        };
        write_atomic(&out.path, text.as_bytes())?;
    }
    Ok(series)
}

fn require_json(output: Option<&OutputSpec>, what: &str) -> Result<()> {
    match output {
        Some(OutputSpec {
            format: OutputFormat::Csv,
            ..
        }) => Err(Error::config(
            "output.format",
            format!("{what} reports are emitted as JSON only"),
        )),
        _ => Ok(()),
    }
}

pub fn report_to_json<T: Serialize>(report: &T) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

/// Full verdict pipeline; emits the report as JSON.
pub fn run_predict(exp: &Experiment) -> Result<LemmaReport> {
    require_json(exp.output.as_ref(), "predict")?;
    let report = lemma::decoherence_verdict(&exp.model, &exp.verdict)?;
    emit(exp.output.as_ref(), &report_to_json(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayStats {
    /// Trapezoidal mean of `|r|²` over the second half of the grid.
    pub time_averaged_r_sq: f64,
    pub averaging_window: [f64; 2],
    pub min_r_sq: f64,
    /// `Π (2|α_i|² − 1)²`.
    pub lower_bound: f64,
    /// Largest late-time average still consistent with a `Decoheres` verdict.
    pub consistency_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Agreement {
    Consistent,
    Tension(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub verdict: LemmaReport,
    pub decay_stats: DecayStats,
    pub agreement: Agreement,
}

/// `max(10·lower, 10·max_weight, 1e-4)`.
pub fn consistency_bound(lower_bound: f64, max_weight: f64) -> f64 {
    (10.0 * lower_bound).max(10.0 * max_weight).max(1e-4)
}

/// Runs simulation and prediction on the same model and checks that a
/// `Decoheres` verdict is matched by small late-time `|r|²`.
pub fn run_compare(exp: &Experiment) -> Result<ComparisonReport> {
    require_json(exp.output.as_ref(), "compare")?;
    let verdict = lemma::decoherence_verdict(&exp.model, &exp.verdict)?;
    let g = exp.grid;
    let times = evolution::uniform_grid(g.t_start, g.t_end, g.steps)?;
    let r_sq: Vec<f64> = times
        .iter()
        .map(|&t| evolution::r_squared(&exp.model, t))
        .collect();
    let half = (times.len() - 1) / 2;
    let time_averaged_r_sq = evolution::trapezoid_mean(&r_sq[half..]);
    let min_r_sq = r_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let (lower_bound, _) = evolution::r_bounds(&exp.model);
    let bound = consistency_bound(lower_bound, verdict.l1_max_weight);

    let agreement = match verdict.verdict {
        Verdict::Decoheres if time_averaged_r_sq > bound => Agreement::Tension(format!(
            "verdict is Decoheres but the late-time mean of |r|^2 is {time_averaged_r_sq:e}, \
             above the consistency bound {bound:e}"
        )),
        _ => Agreement::Consistent,
    };
    let report = ComparisonReport {
        verdict,
        decay_stats: DecayStats {
            time_averaged_r_sq,
            averaging_window: [times[half], times[times.len() - 1]],
            min_r_sq,
            lower_bound,
            consistency_bound: bound,
        },
        agreement,
    };
    emit(exp.output.as_ref(), &report_to_json(&report))?;
    Ok(report)
}

/// Dumps the merged spectrum as CSV.
pub fn run_spectrum(exp: &Experiment) -> Result<SpectralDecomposition> {
    if let Some(OutputSpec {
        format: OutputFormat::Json,
        ..
    }) = &exp.output
    {
        return Err(Error::config(
            "output.format",
            "spectrum is emitted as CSV only",
        ));
    }
    let dec = spectrum::spectral_decomposition_capped(
        &exp.model,
        exp.verdict.omega_tolerance,
        exp.verdict.enumeration_cap,
    )?;
    emit(exp.output.as_ref(), &dec.to_csv())?;
    Ok(dec)
}

/// Everything needed to replay a failing oracle case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleFailure {
    pub case: usize,
    pub case_seed: u64,
    pub t: f64,
    pub closed_form: f64,
    pub oracle: f64,
    pub model: ModelDocument,
    pub system_part: ObservableDocument,
    pub env_parts: Vec<ObservableDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub cases: usize,
    pub max_abs_error: f64,
    pub failure: Option<OracleFailure>,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Random case for the oracle gate: `N` uniform on `1..=n_max`, random
/// central and bath amplitudes with phases, signed couplings with
/// `0.05 ≤ |g| ≤ 2`, a random Hermitian product observable and `t ∈ [0, 50)`.
pub fn oracle_case(case_seed: u64, n_max: usize) -> (SpinBathModel, FullObservable, f64) {
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let n = rng.gen_range(1..=n_max);
    let pair = |rng: &mut ChaCha8Rng| {
        let p: f64 = rng.gen();
        (
            Complex64::from_polar(p.sqrt(), TAU * rng.gen::<f64>()),
            Complex64::from_polar((1.0 - p).sqrt(), TAU * rng.gen::<f64>()),
        )
    };
    let (a, b) = pair(&mut rng);
    let spins: Vec<_> = (0..n)
        .map(|_| {
            let (alpha, beta) = pair(&mut rng);
            let magnitude = rng.gen_range(0.05..=2.0);
            let g = if rng.gen::<bool>() { magnitude } else { -magnitude };
            (alpha, beta, g)
        })
        .collect();
    let model = SpinBathModel::new(a, b, &spins).expect("generated amplitudes are normalized");
    let obs = FullObservable::random(n, &mut rng);
    let t = rng.gen_range(0.0..50.0);
    (model, obs, t)
}

/// Compares the closed-form expectation with the state-vector oracle on
/// `cases` seeded random instances; stops at the first disagreement.
pub fn run_oracle_check(n_max: usize, cases: usize, seed: u64) -> Result<OracleSummary> {
    if n_max == 0 || n_max > spectrum::DEFAULT_ORACLE_CAP {
        return Err(Error::config(
            "n_max",
            format!(
                "must be between 1 and the oracle cap {}, got {n_max}",
                spectrum::DEFAULT_ORACLE_CAP
            ),
        ));
    }
    if cases == 0 {
        return Err(Error::config("cases", "must be at least 1"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut max_abs_error: f64 = 0.0;
    for case in 0..cases {
        let case_seed: u64 = master.gen();
        let (model, obs, t) = oracle_case(case_seed, n_max);
        let closed_form = evolution::expectation_full(&model, &obs, t)?;
        let oracle = spectrum::brute_force_expectation(&model, &obs, t)?;
        let err = (closed_form - oracle).abs();
        max_abs_error = max_abs_error.max(err);
        if err.is_nan() || err > ORACLE_TOLERANCE {
            let doc = |o: &crate::model::LocalObservable| ObservableDocument {
                s_uu: o.e_uu,
                s_dd: o.e_dd,
                s_du: [o.e_du.re, o.e_du.im],
            };
            return Ok(OracleSummary {
                cases: case + 1,
                max_abs_error,
                failure: Some(OracleFailure {
                    case,
                    case_seed,
                    t,
                    closed_form,
                    oracle,
                    model: model.to_document(),
                    system_part: obs.system_part.to_document(),
                    env_parts: obs.env_parts.iter().map(doc).collect(),
                }),
            });
        }
    }
    Ok(OracleSummary {
        cases,
        max_abs_error,
        failure: None,
    })
}
