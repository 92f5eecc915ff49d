//! Discrete spectral structure of the dephasing factor.
//!
//! Expanding `Π_i (|α_i|² e^{-i g_i t} + |β_i|² e^{i g_i t})` gives `2^N`
//! terms indexed by `ν`. Binary digit `p_{ν,i}` of `ν` selects `α_i` (digit 1)
//! or `β_i` (digit 0); spin `N` (the last one) is the least significant digit.
//! Term `ν` has frequency `ω_ν = Σ_i (−1)^{p_{ν,i}} g_i` and weight
//! `f_d(ω_ν) = Π_i |γ_{ν,i}|²`, and `r(t) = Σ_ν f_d(ω_ν) e^{+i ω_ν t}`.
//!
//! Also here: the energy levels of the Hamiltonian and an independent
//! state-vector oracle for expectation values.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{FullObservable, SpinBathModel};

/// Largest `N` enumerated by default (`2^26` terms).
pub const DEFAULT_ENUMERATION_CAP: usize = 26;
/// Largest `N` accepted by the state-vector oracle by default.
pub const DEFAULT_ORACLE_CAP: usize = 12;

/// One frequency line after merging coincident terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub omega: f64,
    pub weight: f64,
    pub multiplicity: u64,
}

/// `r(t)` as a finite trigonometric sum over merged lines, sorted by `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    lines: Vec<SpectralLine>,
    n_spins: usize,
}

impl SpectralDecomposition {
    pub fn lines(&self) -> &[SpectralLine] {
        &self.lines
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn total_weight(&self) -> f64 {
        self.lines.iter().map(|l| l.weight).sum()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.lines.iter().map(|l| l.multiplicity).sum()
    }

    pub fn max_multiplicity(&self) -> u64 {
        self.lines.iter().map(|l| l.multiplicity).max().unwrap_or(0)
    }

    pub fn max_weight(&self) -> f64 {
        self.lines.iter().map(|l| l.weight).fold(0.0, f64::max)
    }

    /// CSV with header `omega,weight,multiplicity`, floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.lines.len() + 1));
        out.push_str("omega,weight,multiplicity\n");
        for l in &self.lines {
            out.push_str(&format!("{:.16e},{:.16e},{}\n", l.omega, l.weight, l.multiplicity));
        }
        out
    }
}

fn enumeration_bytes(n: usize) -> u128 {
    // raw (omega, weight) pairs plus the merged line table
    40u128 << n.min(120)
}

fn check_cap(n: usize, cap: usize, bytes: u128) -> Result<()> {
    if n > cap || n >= 63 {
        return Err(Error::CapExceeded { n, cap, bytes });
    }
    Ok(())
}

fn check_index(model: &SpinBathModel, nu: u64) -> Result<()> {
    let n = model.n_spins();
    if n < 64 && nu >= 1u64 << n {
        return Err(Error::IndexOutOfRange {
            index: nu,
            len: 1u64 << n,
        });
    }
    Ok(())
}

/// Digit `p_{ν,i}` for zero-based spin `i`.
fn digit(nu: u64, i: usize, n: usize) -> bool {
    let shift = n - 1 - i;
    shift < 64 && (nu >> shift) & 1 == 1
}

/// `ω_ν = Σ_i (−1)^{p_{ν,i}} g_i`.
pub fn omega_of_index(model: &SpinBathModel, nu: u64) -> Result<f64> {
    check_index(model, nu)?;
    let n = model.n_spins();
    Ok(model
        .spins()
        .iter()
        .enumerate()
        .map(|(i, s)| if digit(nu, i, n) { -s.coupling() } else { s.coupling() })
        .sum())
}

/// `f_d(ω_ν) = Π_i |γ_{ν,i}|²` with `γ = α` for digit 1 and `β` for digit 0.
pub fn weight_of_index(model: &SpinBathModel, nu: u64) -> Result<f64> {
    check_index(model, nu)?;
    let n = model.n_spins();
    Ok(model
        .spins()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if digit(nu, i, n) {
                s.up_population()
            } else {
                s.down_population()
            }
        })
        .product())
}

/// Largest term weight, `Π_i max(|α_i|², |β_i|²)`, without enumeration.
pub fn max_term_weight(model: &SpinBathModel) -> f64 {
    model
        .spins()
        .iter()
        .map(|s| s.up_population().max(s.down_population()))
        .product()
}

/// All `2^N` `(ω_ν, f_d)` pairs in increasing `ν`.
///
/// Built spin by spin: the table for the first `k` spins is extended by
/// appending digit 0 (`+g`, `|β|²`) and digit 1 (`−g`, `|α|²`) to each entry,
/// so every term is a chain of `N` products with no divisions.
pub fn enumerate_terms(model: &SpinBathModel, cap: usize) -> Result<Vec<(f64, f64)>> {
    let n = model.n_spins();
    check_cap(n, cap, 16u128 << n.min(120))?;
    let mut terms = Vec::with_capacity(1usize << n);
    terms.push((0.0, 1.0));
    for s in model.spins() {
        let (g, p, q) = (s.coupling(), s.up_population(), s.down_population());
        let len = terms.len();
        terms.resize(2 * len, (0.0, 0.0));
        // walk backwards so parents are read before being overwritten
        for j in (0..len).rev() {
            let (omega, weight) = terms[j];
            terms[2 * j] = (omega + g, weight * q);
            terms[2 * j + 1] = (omega - g, weight * p);
        }
    }
    Ok(terms)
}

/// Merges sorted `(omega, weight)` pairs whose neighbouring frequencies differ
/// by at most `radius`. A merged line sits at the mean of its members.
fn merge_sorted(terms: &[(f64, f64)], radius: f64) -> Vec<SpectralLine> {
    let mut lines: Vec<SpectralLine> = Vec::new();
    let mut omega_sum = 0.0;
    let mut last = f64::NEG_INFINITY;
    for &(omega, weight) in terms {
        match lines.last_mut() {
            Some(line) if omega - last <= radius => {
                line.weight += weight;
                line.multiplicity += 1;
                omega_sum += omega;
                line.omega = omega_sum / line.multiplicity as f64;
            }
            _ => {
                lines.push(SpectralLine {
                    omega,
                    weight,
                    multiplicity: 1,
                });
                omega_sum = omega;
            }
        }
        last = omega;
    }
    lines
}

/// Enumerates and merges the spectrum with the default cap.
///
/// Lines whose frequencies differ by at most `omega_tolerance · max|g|` are
/// merged (single linkage over the sorted frequencies).
pub fn spectral_decomposition(
    model: &SpinBathModel,
    omega_tolerance: f64,
) -> Result<SpectralDecomposition> {
    spectral_decomposition_capped(model, omega_tolerance, DEFAULT_ENUMERATION_CAP)
}

pub fn spectral_decomposition_capped(
    model: &SpinBathModel,
    omega_tolerance: f64,
    cap: usize,
) -> Result<SpectralDecomposition> {
    if !(omega_tolerance >= 0.0 && omega_tolerance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "omega tolerance must be finite and nonnegative, got {omega_tolerance}"
        )));
    }
    let n = model.n_spins();
    check_cap(n, cap, enumeration_bytes(n))?;
    let mut terms = enumerate_terms(model, cap)?;
    terms.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let lines = merge_sorted(&terms, omega_tolerance * model.max_abs_coupling());
    Ok(SpectralDecomposition { lines, n_spins: n })
}

/// `Σ_lines weight · e^{+i ω t}`.
pub fn r_from_spectrum(dec: &SpectralDecomposition, t: f64) -> Complex64 {
    dec.lines
        .iter()
        .map(|l| l.weight * Complex64::from_polar(1.0, l.omega * t))
        .sum()
}

/// An eigenvalue of the Hamiltonian with its degeneracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLevel {
    pub energy: f64,
    pub degeneracy: u64,
}

/// Eigenvalues of `H` over all `2^(N+1)` product basis states: the central
/// spin contributes the sign and the bath a signed coupling sum, so each
/// energy is `±½ ω_ν`. Levels within `merge_tolerance · max|g|` are merged.
pub fn hamiltonian_spectrum(model: &SpinBathModel, merge_tolerance: f64) -> Result<Vec<EnergyLevel>> {
    hamiltonian_spectrum_capped(model, merge_tolerance, DEFAULT_ENUMERATION_CAP)
}

pub fn hamiltonian_spectrum_capped(
    model: &SpinBathModel,
    merge_tolerance: f64,
    cap: usize,
) -> Result<Vec<EnergyLevel>> {
    if !(merge_tolerance >= 0.0 && merge_tolerance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "merge tolerance must be finite and nonnegative, got {merge_tolerance}"
        )));
    }
    let n = model.n_spins();
    check_cap(n, cap, 16u128 << n.min(120))?;
    let mut energies = Vec::with_capacity(2usize << n);
    for (omega, _) in enumerate_terms(model, cap)? {
        energies.push((0.5 * omega, 0.0));
        energies.push((-0.5 * omega, 0.0));
    }
    energies.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
    Ok(
        merge_sorted(&energies, merge_tolerance * model.max_abs_coupling())
            .into_iter()
            .map(|l| EnergyLevel {
                energy: l.omega,
                degeneracy: l.multiplicity,
            })
            .collect(),
    )
}

/// Degeneracy `2·n!/((n−l)! l!)` of the level `(n − 2l) g/2` for equal couplings.
pub fn degeneracy_count(n: u32, l: u32) -> Result<u128> {
    if n == 0 || l > n {
        return Err(Error::InvalidParameter(format!(
            "degeneracy count needs n >= 1 and 0 <= l <= n, got n = {n}, l = {l}"
        )));
    }
    let overflow = || Error::Overflow(format!("2·C({n}, {l})"));
    let l = l.min(n - l);
    let mut binom: u128 = 1;
    for k in 0..l {
        // binom = C(n, k), so binom·(n − k) is divisible by k + 1
        binom = binom.checked_mul(u128::from(n - k)).ok_or_else(overflow)? / u128::from(k + 1);
    }
    binom.checked_mul(2).ok_or_else(overflow)
}

/// Sum with pairwise splitting, independent of accumulation order at the
/// 1e-16·log2(n) level.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// `⟨ψ(t)|O|ψ(t)⟩` from the full `2^(N+1)` state vector with the default cap.
pub fn brute_force_expectation(model: &SpinBathModel, obs: &FullObservable, t: f64) -> Result<f64> {
    brute_force_expectation_capped(model, obs, t, DEFAULT_ORACLE_CAP)
}

/// State-vector oracle.
///
/// Basis index bit `N` is the central spin and bit `N − 1 − i` is bath spin
/// `i`; a set bit means spin down. Each basis energy is recomputed from the
/// Hamiltonian's diagonal by summing `½ s σ_i g_i` over bits, the evolved
/// amplitudes pick up `e^{-iEt}`, and the product observable is applied one
/// site at a time before the final inner product.
pub fn brute_force_expectation_capped(
    model: &SpinBathModel,
    obs: &FullObservable,
    t: f64,
    cap: usize,
) -> Result<f64> {
    let n = model.n_spins();
    check_cap(n, cap, 32u128 << (n + 1).min(120))?;
    obs.check_len(n)?;
    let dim = 1usize << (n + 1);
    let central_bit = 1usize << n;
    let bath_bit = |i: usize| 1usize << (n - 1 - i);

    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    for (x, amp) in psi.iter_mut().enumerate() {
        let central_down = x & central_bit != 0;
        let mut value = if central_down { model.b() } else { model.a() };
        let mut energy = 0.0;
        let s = if central_down { -0.5 } else { 0.5 };
        for (i, spin) in model.spins().iter().enumerate() {
            if x & bath_bit(i) != 0 {
                value *= spin.beta();
                energy -= s * spin.coupling();
            } else {
                value *= spin.alpha();
                energy += s * spin.coupling();
            }
        }
        *amp = value * Complex64::from_polar(1.0, -energy * t);
    }

    let mut o_psi = psi.clone();
    let sys = &obs.system_part;
    apply_local(&mut o_psi, central_bit, [sys.s_uu, sys.s_dd], sys.s_du);
    for (i, e) in obs.env_parts.iter().enumerate() {
        apply_local(&mut o_psi, bath_bit(i), [e.e_uu, e.e_dd], e.e_du);
    }

    let terms: Vec<f64> = psi
        .iter()
        .zip(&o_psi)
        .map(|(p, q)| (p.conj() * q).re)
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Applies the Hermitian 2×2 `[[d_uu, conj(d_du)], [d_du, d_dd]]` on the site
/// addressed by `bit`.
fn apply_local(v: &mut [Complex64], bit: usize, [d_uu, d_dd]: [f64; 2], d_du: Complex64) {
    let d_ud = d_du.conj();
    for x in 0..v.len() {
        if x & bit != 0 {
            continue;
        }
        let (up, down) = (v[x], v[x | bit]);
        v[x] = d_uu * up + d_ud * down;
        v[x | bit] = d_du * up + d_dd * down;
    }
}
