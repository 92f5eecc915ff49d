use num_complex::Complex64;
use spinbath::harness::{
    run_compare, run_predict, run_simulate, Agreement, ExperimentConfig, ModelSource, TimeGrid,
};
use spinbath::lemma::Verdict;
use spinbath::model::{CouplingLaw, PhaseLaw, RandomModelSpec};
use spinbath::SpinBathModel;

fn random(n: usize, seed: u64, coupling: CouplingLaw) -> ExperimentConfig {
    ExperimentConfig::new(ModelSource::Random(RandomModelSpec::new(
        n,
        seed,
        coupling,
        PhaseLaw::Uniform,
    )))
}

#[test]
fn predict_echoes_weight_sum() {
    let exp = random(20, 11, CouplingLaw::default()).resolve().unwrap();
    let report = run_predict(&exp).unwrap();
    assert!((report.sum_of_weights - 1.0).abs() <= 1e-12);
    assert_eq!(report.n_points, 1 << 20);
}

#[test]
fn compare_on_decohering_bath() {
    let spec = RandomModelSpec::new(24, 3, CouplingLaw::default(), PhaseLaw::Uniform)
        .with_population_range(0.1, 0.9);
    let exp = ExperimentConfig::new(ModelSource::Random(spec)).resolve().unwrap();
    let report = run_compare(&exp).unwrap();
    assert_eq!(report.verdict.verdict, Verdict::Decoheres);
    assert_eq!(report.agreement, Agreement::Consistent);
    assert!(report.decay_stats.min_r_sq >= report.decay_stats.lower_bound - 1e-12);
    assert!(report.decay_stats.time_averaged_r_sq <= report.decay_stats.consistency_bound);
}

#[test]
fn compare_on_aligned_bath() {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let spins: Vec<_> = (0..8).map(|i| (zero, one, 0.2 + 0.1 * i as f64)).collect();
    let model = SpinBathModel::new(h, h, &spins).unwrap();
    let exp = ExperimentConfig::new(ModelSource::Inline(model.to_document()))
        .resolve()
        .unwrap();
    let report = run_compare(&exp).unwrap();
    assert_eq!(report.verdict.verdict, Verdict::NoVerdict);
    assert_eq!(report.agreement, Agreement::Consistent);
    assert_eq!(report.decay_stats.min_r_sq, 1.0);
    assert_eq!(report.decay_stats.time_averaged_r_sq, 1.0);
}

#[test]
fn equal_couplings_decay_without_a_verdict() {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let model = SpinBathModel::new(h, h, &vec![(h, h, 1.0); 16]).unwrap();
    let mut cfg = ExperimentConfig::new(ModelSource::Inline(model.to_document()));
    cfg.time_grid = Some(TimeGrid {
        t_start: 0.0,
        t_end: 2.0 * std::f64::consts::PI,
        steps: 4001,
    });
    let report = run_compare(&cfg.resolve().unwrap()).unwrap();
    assert_eq!(report.verdict.verdict, Verdict::NoVerdict);
    assert!(!report.verdict.in_l1);
    assert_eq!(report.agreement, Agreement::Consistent);
    assert!(report.decay_stats.min_r_sq < 1e-20);
}

#[test]
fn simulate_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = random(20, 5, CouplingLaw::default());
    let mut bytes = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.csv"));
        cfg.output = Some(spinbath::harness::OutputSpec {
            format: spinbath::harness::OutputFormat::Csv,
            path: path.clone(),
        });
        run_simulate(&cfg.resolve().unwrap()).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2);
}

#[test]
fn emitted_floats_round_trip() {
    let exp = random(6, 8, CouplingLaw::default()).resolve().unwrap();
    let series = run_simulate(&exp).unwrap();
    let csv = spinbath::harness::series_to_csv(&series);
    for (k, line) in csv.lines().skip(1).enumerate().step_by(97) {
        let fields: Vec<f64> = line.split(',').take(4).map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], series.times[k]);
        assert_eq!(fields[1], series.r_values[k].re);
        assert_eq!(fields[2], series.r_values[k].im);
        assert_eq!(fields[3], series.r_squared[k]);
    }
}
