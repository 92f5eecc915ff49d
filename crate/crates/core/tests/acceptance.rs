//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use spinbath::evolution::{
    expectation_full, r_bounds, r_of_t, r_squared, time_average_r_squared, uniform_grid,
};
use spinbath::harness::oracle_case;
use spinbath::lemma::{
    decoherence_verdict, estimate_recurrence_time, RecurrenceTime, Verdict, VerdictConfig,
};
use spinbath::model::{CouplingLaw, PhaseLaw, RandomModelSpec};
use spinbath::spectrum::{
    brute_force_expectation, degeneracy_count, hamiltonian_spectrum, r_from_spectrum,
    spectral_decomposition,
};
use spinbath::SpinBathModel;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_model(n: usize, seed: u64, phase: PhaseLaw) -> SpinBathModel {
    RandomModelSpec::new(n, seed, CouplingLaw::default(), phase)
        .generate()
        .unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut master = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 100 {
        let seed: u64 = master.gen();
        let (model, obs, t) = oracle_case(seed, 10);
        if model.n_spins() < 2 {
            continue;
        }
        let a = expectation_full(&model, &obs, t).map_err(|e| e.to_string())?;
        let b = brute_force_expectation(&model, &obs, t).map_err(|e| e.to_string())?;
        let err = (a - b).abs();
        worst = worst.max(err);
        check(err <= 1e-10, || {
            format!("case seed {seed}: closed form {a:e} vs oracle {b:e}")
        })?;
        cases += 1;
    }
    Ok(format!("100 cases, N in 2..=10, max |error| {worst:.1e}"))
}

fn spectral_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n = 2 + (k * 14) / 19;
        let model = random_model(n, 200 + k as u64, PhaseLaw::Uniform);
        let dec = spectral_decomposition(&model, 1e-12).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let t = rng.gen_range(0.0..50.0);
            let err = (r_of_t(&model, t) - r_from_spectrum(&dec, t)).norm();
            worst = worst.max(err);
            check(err <= 1e-10, || format!("N={n} t={t}: error {err:e}"))?;
        }
    }
    Ok(format!("20 models, N in 2..=16, 2000 times, max error {worst:.1e}"))
}

fn weight_normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=16 {
        for phase in [PhaseLaw::Zero, PhaseLaw::Uniform] {
            let model = random_model(n, 300 + n as u64, phase);
            let total = spectral_decomposition(&model, 1e-12)
                .map_err(|e| e.to_string())?
                .total_weight();
            worst = worst.max((total - 1.0).abs());
            check((total - 1.0).abs() <= 1e-12, || {
                format!("N={n}: enumerated weights sum to {total}")
            })?;
        }
    }
    for n in [100, 1000, 10_000] {
        let model = random_model(n, 400 + n as u64, PhaseLaw::Uniform);
        // sum over 2^N terms factorizes into per-spin sums p + q
        let product: f64 = model
            .spins()
            .iter()
            .map(|s| s.up_population() + s.down_population())
            .product();
        let r0 = r_of_t(&model, 0.0);
        worst = worst.max((product - 1.0).abs()).max((r0 - 1.0).norm());
        check((product - 1.0).abs() <= 1e-12 && (r0 - 1.0).norm() <= 1e-12, || {
            format!("N={n}: per-spin product {product}, r(0) = {r0}")
        })?;
    }
    Ok(format!("N <= 16 enumerated, N up to 1e4 factorized, max deviation {worst:.1e}"))
}

fn bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..20u64 {
        let n = 1 + (k as usize % 20);
        let model = random_model(n, 500 + k, PhaseLaw::Uniform);
        let (lo, hi) = r_bounds(&model);
        for _ in 0..10_000 {
            let t = rng.gen_range(0.0..200.0);
            let r2 = r_squared(&model, t);
            check(lo - 1e-12 <= r2 && r2 <= hi + 1e-12, || {
                format!("N={n} t={t}: |r|^2 = {r2} outside [{lo}, {hi}]")
            })?;
        }
    }

    let g = 0.8;
    let mut worst_rel: f64 = 0.0;
    for k in 0..5u64 {
        let model = RandomModelSpec::new(8, 600 + k, CouplingLaw::Equal { g }, PhaseLaw::Uniform)
            .with_population_range(0.1, 0.9)
            .generate()
            .unwrap();
        let (lo, _) = r_bounds(&model);
        let tp = PI / g;
        let at_half = r_squared(&model, 0.5 * tp);
        check((at_half - lo).abs() <= 1e-12, || {
            format!("equal couplings: |r(t_P/2)|^2 = {at_half:e}, bound {lo:e}")
        })?;
        let grid = uniform_grid(0.0, tp, 10_001).map_err(|e| e.to_string())?;
        let min = grid
            .iter()
            .map(|&t| r_squared(&model, t))
            .fold(f64::INFINITY, f64::min);
        let rel = (min - lo) / lo;
        worst_rel = worst_rel.max(rel);
        check((0.0..=0.05).contains(&rel) || (min - lo).abs() <= 1e-12, || {
            format!("sampled minimum {min:e} is {rel:.3} above the bound {lo:e}")
        })?;
    }
    Ok(format!(
        "20 models x 1e4 times inside bounds; equal-coupling minimum within {:.1e} of bound",
        worst_rel
    ))
}

fn central_binomial(n: usize) -> f64 {
    (1..=n).map(|k| (2 * k - 1) as f64 / (2 * k) as f64).product()
}

fn equal_coupling_closed_form() -> Outcome {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let g = 1.3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_r: f64 = 0.0;
    let mut worst_avg: f64 = 0.0;
    for n in [1usize, 10, 100] {
        let model = SpinBathModel::new(h, h, &vec![(h, h, g); n]).unwrap();
        for _ in 0..100 {
            let t = rng.gen_range(0.0..50.0);
            let err = (r_of_t(&model, t) - (g * t).cos().powi(n as i32)).norm();
            worst_r = worst_r.max(err);
            check(err <= 1e-12, || format!("N={n} t={t}: error {err:e}"))?;
        }
        let avg = time_average_r_squared(&model, 0.0, PI / g, 20_001).map_err(|e| e.to_string())?;
        let expected = central_binomial(n);
        worst_avg = worst_avg.max((avg - expected).abs());
        check((avg - expected).abs() <= 1e-6, || {
            format!("N={n}: period average {avg} vs C(2N,N)/4^N = {expected}")
        })?;
    }
    Ok(format!(
        "r = cos^N(gt) within {worst_r:.1e}; period average within {worst_avg:.1e}"
    ))
}

fn binomial(n: u32, k: u32) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn degeneracy_bookkeeping() -> Outcome {
    for n in 1..=30u32 {
        let mut total: u128 = 0;
        for l in 0..=n {
            let d = degeneracy_count(n, l).map_err(|e| e.to_string())?;
            check(d == 2 * binomial(n, l), || format!("N={n} l={l}: {d}"))?;
            total += d;
        }
        check(total == 1u128 << (n + 1), || format!("N={n}: total {total}"))?;
    }
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let g = 0.9;
    for n in 1..=12usize {
        let model = SpinBathModel::new(h, h, &vec![(h, h, g); n]).unwrap();
        let levels = hamiltonian_spectrum(&model, 1e-12).map_err(|e| e.to_string())?;
        check(levels.len() == n + 1, || format!("N={n}: {} levels", levels.len()))?;
        for (i, level) in levels.iter().enumerate() {
            let l = n - i;
            let energy = (n as f64 - 2.0 * l as f64) * g / 2.0;
            let expected = 2 * binomial(n as u32, l as u32) as u64;
            check(
                (level.energy - energy).abs() <= 1e-12 && level.degeneracy == expected,
                || format!("N={n} l={l}: got {level:?}, want {energy} x{expected}"),
            )?;
        }
    }
    Ok("counts sum to 2^(N+1) for N <= 30; equal-g levels match 2 C(N,l) for N <= 12".into())
}

/// Weighted standard deviation of the frequencies, `Σ 4 p q g²`.
fn spectral_width(model: &SpinBathModel) -> f64 {
    model
        .spins()
        .iter()
        .map(|s| 4.0 * s.up_population() * s.down_population() * s.coupling().powi(2))
        .sum::<f64>()
        .sqrt()
}

fn verdict_behavior() -> Outcome {
    let config = VerdictConfig::default();
    for seed in 1..=20u64 {
        let model = RandomModelSpec::new(24, seed, CouplingLaw::default(), PhaseLaw::Uniform)
            .with_population_range(0.1, 0.9)
            .generate()
            .unwrap();
        let report = decoherence_verdict(&model, &config).map_err(|e| e.to_string())?;
        check(report.verdict == Verdict::Decoheres, || {
            format!("N=24 seed {seed}: {report:?}")
        })?;
        let sigma = spectral_width(&model);
        let late = time_average_r_squared(&model, 10.0 / sigma, 20.0 / sigma, 4001)
            .map_err(|e| e.to_string())?;
        let (lower, _) = r_bounds(&model);
        let bound = 10.0 * lower + 10.0 * report.l1_max_weight;
        check(late < bound, || {
            format!("N=24 seed {seed}: late |r|^2 average {late:e} above {bound:e}")
        })?;
    }
    for seed in 1..=20u64 {
        let n = 1 + (seed as usize - 1) % 5;
        let model = random_model(n, 700 + seed, PhaseLaw::Uniform);
        let report = decoherence_verdict(&model, &config).map_err(|e| e.to_string())?;
        check(report.verdict == Verdict::NoVerdict, || {
            format!("N={n} seed {seed}: {:?}", report.verdict)
        })?;
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..20 {
        let n = 6 + k % 15;
        let spins: Vec<_> = (0..n)
            .map(|_| {
                let g = rng.gen_range(0.05..1.0);
                if rng.gen::<bool>() {
                    (one, zero, g)
                } else {
                    (zero, one, g)
                }
            })
            .collect();
        let model = SpinBathModel::new(
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            &spins,
        )
        .unwrap();
        let report = decoherence_verdict(&model, &config).map_err(|e| e.to_string())?;
        check(report.verdict == Verdict::NoVerdict, || {
            format!("aligned N={n}: {:?}", report.verdict)
        })?;
    }
    Ok("20 x Decoheres at N=24, 20 x NoVerdict at N<=5, 20 x NoVerdict aligned".into())
}

fn recurrence() -> Outcome {
    let g = 0.7;
    for k in 0..5u64 {
        let model = RandomModelSpec::new(10, 800 + k, CouplingLaw::Equal { g }, PhaseLaw::Uniform)
            .generate()
            .unwrap();
        let report = decoherence_verdict(&model, &VerdictConfig::default())
            .map_err(|e| e.to_string())?;
        let tp = match report.recurrence_time {
            RecurrenceTime::Finite(tp) => tp,
            other => return Err(format!("equal couplings gave {other:?}")),
        };
        let rel = (tp - PI / g).abs() / (PI / g);
        check(rel <= 1e-12, || format!("t_P = {tp}, relative error {rel:e}"))?;
        let expected: f64 = model
            .spins()
            .iter()
            .map(|s| (2.0 * s.up_population() - 1.0).abs())
            .product();
        let got = r_of_t(&model, 0.5 * tp).norm();
        check((got - expected).abs() <= 1e-12, || {
            format!("|r(t_P/2)| = {got:e}, product {expected:e}")
        })?;
    }
    let points = [1.0, 2f64.sqrt(), PI];
    let t = estimate_recurrence_time(&points, 1_000_000, 1e-9).map_err(|e| e.to_string())?;
    check(t == RecurrenceTime::EffectivelyInfinite, || {
        format!("incommensurate set gave {t:?}")
    })?;
    Ok("t_P = pi/g, |r(t_P/2)| = prod|2p-1|, {1, sqrt 2, pi} effectively infinite".into())
}

fn spinbath() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinbath"))
}

fn sha256(path: &Path) -> Result<String, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn run_ok(cmd: &mut Command) -> Result<(), String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{:?}: {}", out.status, String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("experiment.json");
    std::fs::write(
        &config,
        r#"{"model": {"random": {"n": 20, "seed": 2024, "phase": "uniform"}},
            "observable": {"s_uu": 0.5, "s_dd": -0.5, "s_du": [0.3, -0.2]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut hashes = Vec::new();
    for (sub, ext) in [("simulate", "csv"), ("predict", "json")] {
        let mut pair = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{sub}-{run}.{ext}"));
            run_ok(spinbath().arg(sub).arg("--config").arg(&config).arg("--output").arg(&out))?;
            pair.push(sha256(&out)?);
        }
        check(pair[0] == pair[1], || format!("{sub}: {} != {}", pair[0], pair[1]))?;
        hashes.push(format!("{sub} {}", &pair[0][..12]));
    }
    Ok(format!("identical hashes: {}", hashes.join(", ")))
}

fn cli_contract() -> Outcome {
    let out = spinbath()
        .args(["oracle-check", "--n-max", "10", "--cases", "100", "--seed", "1"])
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.code() == Some(0), || {
        format!("oracle-check exited {:?}", out.status)
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = dir.path().join("corrupt.json");
    std::fs::write(
        &model,
        r#"{"a": [0.7071067811865476, 0.0], "b": [0.7071067811865476, 0.0],
            "spins": [{"alpha": [0.6, 0.0], "beta": [0.8, 0.0], "g": 1.0},
                      {"alpha": [0.6, 0.0], "beta": "0.8", "g": 0.5}]}"#,
    )
    .map_err(|e| e.to_string())?;
    let out = spinbath()
        .arg("simulate")
        .arg("--model")
        .arg(&model)
        .output()
        .map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    check(out.status.code() == Some(2), || {
        format!("corrupted model exited {:?}", out.status)
    })?;
    check(stderr.contains("spins[1].beta"), || {
        format!("no field path in: {stderr}")
    })?;
    Ok(format!("oracle-check exit 0; corrupted model exit 2 ({})", stderr.trim()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("spectral identity", spectral_identity),
        ("weight normalization", weight_normalization),
        ("bounds", bounds),
        ("equal-coupling closed form", equal_coupling_closed_form),
        ("degeneracy bookkeeping", degeneracy_bookkeeping),
        ("verdict behavior", verdict_behavior),
        ("recurrence", recurrence),
        ("determinism", determinism),
        ("CLI contract", cli_contract),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
