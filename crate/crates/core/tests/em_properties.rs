use gmmse::io::faithful;
use gmmse::linalg::Matrix;
use gmmse::mixture::{
    e_step, em_fit, loglik, select_model, ward_init, CovarianceFamily, DataMatrix, EmConfig,
    FitStatus, MixtureModel, ResponsibilityMatrix, WeightVector,
};
use gmmse::simulation::{builtin_spec, sample_dataset, sample_labeled};
use proptest::prelude::*;

/// Runs exactly `iters` EM iterations, so two runs can be compared step for step.
fn fixed_iterations(iters: usize) -> EmConfig {
    EmConfig {
        tol: -1.0,
        max_iter: iters,
        ..EmConfig::default()
    }
}

fn two_blobs() -> impl Strategy<Value = DataMatrix> {
    (
        prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 12..40),
        prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 12..40),
        -50.0..50.0f64,
    )
        .prop_map(|(a, b, offset)| {
            let rows: Vec<Vec<f64>> = a
                .into_iter()
                .map(|(x, y)| vec![x + offset, 0.5 * x + y])
                .chain(b.into_iter().map(|(x, y)| vec![x + offset + 7.0, y - 4.0]))
                .collect();
            DataMatrix::from_rows(&rows).unwrap()
        })
}

fn family() -> impl Strategy<Value = CovarianceFamily> {
    prop::sample::select(CovarianceFamily::ALL.to_vec())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn models_close(a: &MixtureModel, b: &MixtureModel, rel: f64) -> bool {
    a.weights
        .iter()
        .zip(&b.weights)
        .all(|(x, y)| close(*x, *y, rel))
        && a.means
            .iter()
            .flatten()
            .zip(b.means.iter().flatten())
            .all(|(x, y)| close(*x, *y, rel))
        && a.covariances.iter().zip(&b.covariances).all(|(x, y)| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .all(|(u, v)| close(*u, *v, rel))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unweighted_em_never_decreases_loglik(data in two_blobs(), family in family(), g in 1usize..=3) {
        let Some(init) = ward_init(&data, g) else { return Ok(()) };
        let fit = em_fit(&data, &init, family, &WeightVector::ones(data.n()), &EmConfig::default()).unwrap();
        for w in fit.loglik_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "loglik fell from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn responsibilities_are_distributions(data in two_blobs(), family in family()) {
        let init = ward_init(&data, 2).unwrap();
        let fit = em_fit(&data, &init, family, &WeightVector::ones(data.n()), &EmConfig::default()).unwrap();
        if let Some(z) = fit.responsibilities {
            for i in 0..z.n() {
                let row = z.row(i);
                prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn relabelling_the_start_relabels_the_fit(data in two_blobs(), family in family()) {
        let init = ward_init(&data, 3).unwrap();
        let perm = [2, 0, 1];
        let config = fixed_iterations(25);
        let ones = WeightVector::ones(data.n());
        let a = em_fit(&data, &init, family, &ones, &config).unwrap();
        let b = em_fit(&data, &init.permuted(&perm), family, &ones, &config).unwrap();
        prop_assert_eq!(a.status, b.status);
        if let (Some(ma), Some(mb)) = (&a.model, &b.model) {
            prop_assert!(models_close(&ma.permuted(&perm), mb, 1e-9));
            prop_assert!(close(a.loglik, b.loglik, 1e-10));
        }
    }

    #[test]
    fn translation_shifts_only_the_means(data in two_blobs(), family in family(), cx in -100.0..100.0f64, cy in -100.0..100.0f64) {
        let init = ward_init(&data, 2).unwrap();
        let config = fixed_iterations(25);
        let ones = WeightVector::ones(data.n());
        let a = em_fit(&data, &init, family, &ones, &config).unwrap();
        let b = em_fit(&data.translated(&[cx, cy]), &init, family, &ones, &config).unwrap();
        prop_assert_eq!(a.status, b.status);
        let (Some(ma), Some(mb)) = (&a.model, &b.model) else { return Ok(()) };
        for (x, y) in ma.weights.iter().zip(&mb.weights) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
        for (mx, my) in ma.means.iter().zip(&mb.means) {
            prop_assert!((mx[0] + cx - my[0]).abs() <= 1e-8 && (mx[1] + cy - my[1]).abs() <= 1e-8);
        }
        for (sx, sy) in ma.covariances.iter().zip(&mb.covariances) {
            for (u, v) in sx.as_slice().iter().zip(sy.as_slice()) {
                prop_assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0));
            }
        }
        let steps = |t: &[f64]| t.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>();
        for (da, db) in steps(&a.loglik_trace).iter().zip(steps(&b.loglik_trace)) {
            prop_assert!((da - db).abs() <= 1e-8);
        }
    }
}

#[test]
fn separated_clusters_recover_their_means() {
    // 1-D, N(-5, 1) and N(5, 1), 100 points each, started from the true labels
    let spec = gmmse::simulation::SimulationModelSpec {
        name: "sep1d".into(),
        tau_true: vec![0.5, 0.5],
        mu_true: vec![vec![-5.0], vec![5.0]],
        sigma_true: vec![Matrix::identity(1), Matrix::identity(1)],
        n: 200,
    };
    let (data, labels) = sample_labeled(&spec, 3);
    let init = ResponsibilityMatrix::from_labels(&labels, 2);
    let fit = em_fit(
        &data,
        &init,
        CovarianceFamily::FullVarying,
        &WeightVector::ones(200),
        &EmConfig::default(),
    )
    .unwrap();
    assert_eq!(fit.status, FitStatus::Converged);
    let model = fit.model.unwrap();
    for (k, truth) in [-5.0, 5.0].into_iter().enumerate() {
        let count = labels.iter().filter(|&&l| l == k).count() as f64;
        assert!((model.means[k][0] - truth).abs() < 3.0 / count.sqrt());
    }
}

#[test]
fn mle_dominates_the_true_parameters() {
    for seed in 0..10 {
        let spec = builtin_spec("M3").unwrap();
        let data = sample_dataset(&spec, seed);
        let truth = spec.true_model();
        let (z, true_ll) = e_step(&data, &truth).unwrap();
        let fit = em_fit(
            &data,
            &z,
            CovarianceFamily::FullVarying,
            &WeightVector::ones(data.n()),
            &EmConfig::default(),
        )
        .unwrap();
        assert!(
            fit.loglik >= true_ll,
            "seed {seed}: {} < {true_ll}",
            fit.loglik
        );
        assert!((loglik(&data, &truth).unwrap() - true_ll).abs() < 1e-9);
    }
}

#[test]
fn unit_weights_from_normalization_are_bit_identical() {
    let data = faithful();
    let init = ward_init(&data, 3).unwrap();
    let n = data.n();
    let plain = em_fit(
        &data,
        &init,
        CovarianceFamily::FullEqual,
        &WeightVector::ones(n),
        &EmConfig::default(),
    )
    .unwrap();
    let normalized = WeightVector::normalized(vec![3.0; n]).unwrap();
    assert!(normalized.is_unit());
    let weighted = em_fit(
        &data,
        &init,
        CovarianceFamily::FullEqual,
        &normalized,
        &EmConfig::default(),
    )
    .unwrap();
    assert_eq!(plain, weighted);
}

#[test]
fn faithful_selects_three_components_with_common_covariance() {
    let fit = select_model(
        &faithful(),
        1..=5,
        &CovarianceFamily::ALL,
        &EmConfig::default(),
    )
    .unwrap();
    let model = fit.model.unwrap();
    assert_eq!((model.g(), model.family), (3, CovarianceFamily::FullEqual));
    let mut tau = model.weights.clone();
    tau.sort_by(|a, b| b.total_cmp(a));
    for (t, p) in tau.iter().zip([0.46, 0.36, 0.18]) {
        assert!((t - p).abs() <= 0.02, "tau {tau:?}");
    }
    let mut eruption: Vec<f64> = model.means.iter().map(|m| m[0]).collect();
    eruption.sort_by(f64::total_cmp);
    for (e, p) in eruption.iter().zip([2.04, 3.81, 4.47]) {
        assert!((e - p).abs() <= 0.05, "eruption means {eruption:?}");
    }
}

#[test]
fn well_separated_pairs_select_two_unconstrained_components() {
    let spec = builtin_spec("M3").unwrap();
    let seeds = 100;
    let hits = (0..seeds)
        .filter(|&s| {
            let data = sample_dataset(&spec, 1000 + s);
            select_model(&data, 1..=4, &CovarianceFamily::ALL, &EmConfig::default())
                .ok()
                .and_then(|f| f.model)
                .is_some_and(|m| m.g() == 2 && m.family == CovarianceFamily::FullVarying)
        })
        .count();
    assert!(
        hits * 4 >= seeds as usize * 3,
        "only {hits}/{seeds} draws selected (2, VVV)"
    );
}
