//! Spin-bath state data: the central spin, its environment, observables and
//! the seeded random-instance generator.
//!
//! The composite state is the pure product
//! `(a|⇑⟩ + b|⇓⟩) ⊗ ⊗_i (alpha_i|↑⟩ + beta_i|↓⟩)` evolving under
//! `H = ½ σ_z^P ⊗ Σ_i g_i σ_z^i`. Time is dimensionless; `g` and `t` are
//! reciprocal units.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AmplitudeSite, Error, Result};

/// Allowed deviation of `|x|^2 + |y|^2` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

fn check_pair(x: Complex64, y: Complex64, site: AmplitudeSite) -> Result<()> {
    if !(x.re.is_finite() && x.im.is_finite() && y.re.is_finite() && y.im.is_finite()) {
        return Err(Error::NonFinite(format!("amplitudes of {site}")));
    }
    let residual = x.norm_sqr() + y.norm_sqr() - 1.0;
    if residual.abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Normalization { site, residual });
    }
    Ok(())
}

/// One spin of the environment with its amplitudes and coupling to the
/// central spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentSpin {
    alpha: Complex64,
    beta: Complex64,
    g: f64,
}

impl EnvironmentSpin {
    fn validated(alpha: Complex64, beta: Complex64, g: f64, index: usize) -> Result<Self> {
        check_pair(alpha, beta, AmplitudeSite::Environment(index))?;
        if !g.is_finite() || g == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "coupling of environment spin {index} must be finite and nonzero, got {g}"
            )));
        }
        Ok(Self { alpha, beta, g })
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    /// `|alpha|^2`, the up-population.
    pub fn up_population(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `|beta|^2`, the down-population.
    pub fn down_population(&self) -> f64 {
        self.beta.norm_sqr()
    }
}

/// A validated spin-bath initial state together with its couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBathModel {
    a: Complex64,
    b: Complex64,
    spins: Vec<EnvironmentSpin>,
}

impl SpinBathModel {
    /// Builds a model from the central amplitudes and `(alpha, beta, g)`
    /// triples, rejecting unnormalized pairs and zero couplings.
    pub fn new(a: Complex64, b: Complex64, spins: &[(Complex64, Complex64, f64)]) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::EmptyEnvironment);
        }
        check_pair(a, b, AmplitudeSite::Central)?;
        let spins = spins
            .iter()
            .enumerate()
            .map(|(i, &(alpha, beta, g))| EnvironmentSpin::validated(alpha, beta, g, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { a, b, spins })
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn spins(&self) -> &[EnvironmentSpin] {
        &self.spins
    }

    /// Number of environment spins `N`.
    pub fn n_spins(&self) -> usize {
        self.spins.len()
    }

    pub fn max_abs_coupling(&self) -> f64 {
        self.spins.iter().map(|s| s.g.abs()).fold(0.0, f64::max)
    }

    pub fn mean_abs_coupling(&self) -> f64 {
        self.spins.iter().map(|s| s.g.abs()).sum::<f64>() / self.spins.len() as f64
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            a: [self.a.re, self.a.im],
            b: [self.b.re, self.b.im],
            spins: self
                .spins
                .iter()
                .map(|s| SpinDocument {
                    alpha: [s.alpha.re, s.alpha.im],
                    beta: [s.beta.re, s.beta.im],
                    g: s.g,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    /// Parses and validates a model document. Errors carry the field path of
    /// the offending entry.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ModelDocument = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        doc.into_model("")
    }
}

/// Serialized form of a model: complex numbers are `[re, im]` pairs.
///
/// ```json
/// {"a": [0.7071, 0.0], "b": [0.7071, 0.0],
///  "spins": [{"alpha": [0.6, 0.0], "beta": [0.8, 0.0], "g": 2.0}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub spins: Vec<SpinDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinDocument {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub g: f64,
}

fn c(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

impl ModelDocument {
    /// Validates the document; `prefix` is prepended to error paths.
    pub fn into_model(self, prefix: &str) -> Result<SpinBathModel> {
        let join = |field: &str| {
            if prefix.is_empty() {
                field.to_string()
            } else {
                format!("{prefix}.{field}")
            }
        };
        let spins: Vec<_> = self
            .spins
            .iter()
            .map(|s| (c(s.alpha), c(s.beta), s.g))
            .collect();
        SpinBathModel::new(c(self.a), c(self.b), &spins).map_err(|e| {
            let path = match &e {
                Error::Normalization {
                    site: AmplitudeSite::Environment(i),
                    ..
                } => join(&format!("spins[{i}]")),
                Error::InvalidParameter(_) | Error::NonFinite(_) => {
                    match spins.iter().position(|&(al, be, g)| {
                        !(g.is_finite() && g != 0.0)
                            || ![al.re, al.im, be.re, be.im].iter().all(|x| x.is_finite())
                    }) {
                        Some(i) => join(&format!("spins[{i}]")),
                        None => join("a"),
                    }
                }
                Error::EmptyEnvironment => join("spins"),
                _ => join("a"),
            };
            Error::config(path, e.to_string())
        })
    }
}

/// How couplings are drawn by [`generate_random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingLaw {
    /// `g_i` uniform on `(0, g_max]`.
    UniformPositive { g_max: f64 },
    /// Every `g_i = g`.
    Equal { g: f64 },
}

impl Default for CouplingLaw {
    fn default() -> Self {
        CouplingLaw::UniformPositive { g_max: 1.0 }
    }
}

/// How amplitude phases are drawn by [`generate_random`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLaw {
    /// All amplitudes real and nonnegative.
    #[default]
    Zero,
    /// Independent phases uniform on `[0, 2π)` for `alpha_i`, `beta_i` and `b`.
    Uniform,
}

/// Full parameter set of the random generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomModelSpec {
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub coupling: CouplingLaw,
    #[serde(default)]
    pub phase: PhaseLaw,
    /// Range `[lo, hi]` for `|alpha_i|^2`; the default `[0, 1]` is the plain protocol.
    #[serde(default = "full_range")]
    pub population_range: [f64; 2],
}

fn full_range() -> [f64; 2] {
    [0.0, 1.0]
}

impl RandomModelSpec {
    pub fn new(n: usize, seed: u64, coupling: CouplingLaw, phase: PhaseLaw) -> Self {
        Self {
            n,
            seed,
            coupling,
            phase,
            population_range: full_range(),
        }
    }

    pub fn with_population_range(mut self, lo: f64, hi: f64) -> Self {
        self.population_range = [lo, hi];
        self
    }

    /// Draws the model.
    ///
    /// The stream is ChaCha8 seeded through `seed_from_u64`, and doubles are
    /// sampled as 53-bit uniforms on `[0, 1)`. Per spin, in order: `u` for
    /// `|alpha|^2 = lo + (hi - lo) u`, then (uniform phases only) the phases of
    /// `alpha` and `beta`, then `u'` for `g = g_max (1 - u')` when couplings are
    /// random. `|beta|^2 = 1 - |alpha|^2`. After the bath, the phase of `b` is
    /// drawn when phases are uniform; the central spin is otherwise
    /// `a = b = 1/√2`.
    pub fn generate(&self) -> Result<SpinBathModel> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        match self.coupling {
            CouplingLaw::UniformPositive { g_max } if !(g_max.is_finite() && g_max > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "g_max must be positive and finite, got {g_max}"
                )));
            }
            CouplingLaw::Equal { g } if !(g.is_finite() && g != 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "equal coupling must be finite and nonzero, got {g}"
                )));
            }
            _ => {}
        }
        let [lo, hi] = self.population_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "population range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 1"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut spins = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let p = lo + (hi - lo) * rng.gen::<f64>();
            let (phase_a, phase_b) = match self.phase {
                PhaseLaw::Zero => (0.0, 0.0),
                PhaseLaw::Uniform => (TAU * rng.gen::<f64>(), TAU * rng.gen::<f64>()),
            };
            let g = match self.coupling {
                CouplingLaw::UniformPositive { g_max } => g_max * (1.0 - rng.gen::<f64>()),
                CouplingLaw::Equal { g } => g,
            };
            let alpha = Complex64::from_polar(p.sqrt(), phase_a);
            let beta = Complex64::from_polar((1.0 - p).sqrt(), phase_b);
            spins.push((alpha, beta, g));
        }
        let phase_central = match self.phase {
            PhaseLaw::Zero => 0.0,
            PhaseLaw::Uniform => TAU * rng.gen::<f64>(),
        };
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let b = Complex64::from_polar(FRAC_1_SQRT_2, phase_central);
        SpinBathModel::new(a, b, &spins)
    }
}

/// Seeded random model following the populations-from-a-generator protocol.
pub fn generate_random(
    n: usize,
    seed: u64,
    coupling: CouplingLaw,
    phase: PhaseLaw,
) -> Result<SpinBathModel> {
    RandomModelSpec::new(n, seed, coupling, phase).generate()
}

/// Observable on the central spin alone, `O_S ⊗ I_E`.
///
/// `s_du` is the coefficient of `|⇓⟩⟨⇑|`; the `|⇑⟩⟨⇓|` entry is its conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelevantObservable {
    pub s_uu: f64,
    pub s_dd: f64,
    pub s_du: Complex64,
}

impl RelevantObservable {
    pub fn new(s_uu: f64, s_dd: f64, s_du: Complex64) -> Result<Self> {
        if ![s_uu, s_dd, s_du.re, s_du.im].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("relevant observable".into()));
        }
        Ok(Self { s_uu, s_dd, s_du })
    }

    pub fn identity() -> Self {
        Self {
            s_uu: 1.0,
            s_dd: 1.0,
            s_du: Complex64::new(0.0, 0.0),
        }
    }

    /// `σ_x` on the central spin.
    pub fn sigma_x() -> Self {
        Self {
            s_uu: 0.0,
            s_dd: 0.0,
            s_du: Complex64::new(1.0, 0.0),
        }
    }

    /// Entries uniform on `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut u = || 2.0 * rng.gen::<f64>() - 1.0;
        Self {
            s_uu: u(),
            s_dd: u(),
            s_du: Complex64::new(u(), u()),
        }
    }

    pub fn to_document(&self) -> ObservableDocument {
        ObservableDocument {
            s_uu: self.s_uu,
            s_dd: self.s_dd,
            s_du: [self.s_du.re, self.s_du.im],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableDocument {
    pub s_uu: f64,
    pub s_dd: f64,
    pub s_du: [f64; 2],
}

impl ObservableDocument {
    pub fn into_observable(self) -> Result<RelevantObservable> {
        RelevantObservable::new(self.s_uu, self.s_dd, c(self.s_du))
    }
}

/// Observable on a single environment spin. `e_du` multiplies `|↓⟩⟨↑|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservable {
    pub e_uu: f64,
    pub e_dd: f64,
    pub e_du: Complex64,
}

impl LocalObservable {
    pub fn new(e_uu: f64, e_dd: f64, e_du: Complex64) -> Result<Self> {
        if ![e_uu, e_dd, e_du.re, e_du.im].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("local observable".into()));
        }
        Ok(Self { e_uu, e_dd, e_du })
    }

    pub fn identity() -> Self {
        Self {
            e_uu: 1.0,
            e_dd: 1.0,
            e_du: Complex64::new(0.0, 0.0),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut u = || 2.0 * rng.gen::<f64>() - 1.0;
        Self {
            e_uu: u(),
            e_dd: u(),
            e_du: Complex64::new(u(), u()),
        }
    }
}

/// Product observable `O_P ⊗ O_1 ⊗ … ⊗ O_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullObservable {
    pub system_part: RelevantObservable,
    pub env_parts: Vec<LocalObservable>,
}

impl FullObservable {
    pub fn new(system_part: RelevantObservable, env_parts: Vec<LocalObservable>) -> Self {
        Self {
            system_part,
            env_parts,
        }
    }

    /// `O_S ⊗ I_E` written as a full observable on `n` environment spins.
    pub fn relevant(system_part: RelevantObservable, n: usize) -> Self {
        Self::new(system_part, vec![LocalObservable::identity(); n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let system_part = RelevantObservable::random(rng);
        let env_parts = (0..n).map(|_| LocalObservable::random(rng)).collect();
        Self::new(system_part, env_parts)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.env_parts.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.env_parts.len(),
            });
        }
        Ok(())
    }
}
