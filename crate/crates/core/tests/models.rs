use coughscreen::eval::auc;
use coughscreen::models::{
    fit, hyperparameter_grid, Criterion, Family, Hyperparameters, MaxFeatures, ModelSpec, TrainedModel,
};
use coughscreen::{Error, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as f64;
        for j in 0..d {
            let shift = if j < 2 { 1.5 * (2.0 * label - 1.0) } else { 0.0 };
            data.push(shift + r.gen_range(-1.0..1.0));
        }
        y.push(label);
    }
    (Matrix::new(n, d, data).unwrap(), y)
}

fn small_specs() -> Vec<Hyperparameters> {
    vec![
        Hyperparameters::Lr { c: 1.0 },
        Hyperparameters::Mlp {
            alpha: 1e-4,
            widths: vec![64, 32, 16, 8, 4],
        },
        Hyperparameters::Rf {
            n_estimators: 30,
            max_features: MaxFeatures::Log2,
            max_depth: 4,
            criterion: Criterion::Gini,
            bootstrap: true,
        },
        Hyperparameters::Ab {
            n_estimators: 40,
            learning_rate: 1.0,
        },
    ]
}

#[test]
fn every_family_learns_shifted_blobs() {
    let (x, y) = blobs(160, 5, 1);
    let (xt, yt) = blobs(200, 5, 2);
    let pos: Vec<bool> = yt.iter().map(|&v| v == 1.0).collect();
    for hyper in small_specs() {
        let name = hyper.family().name();
        let m = fit(&ModelSpec::new(hyper, 3), &x, &y).unwrap();
        let p = m.predict_proba(&xt).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
        let a = auc(&p, &pos).unwrap();
        assert!(a > 0.9, "{name}: held-out AUC {a}");
    }
}

#[test]
fn fitting_is_seed_deterministic() {
    let (x, y) = blobs(80, 4, 5);
    for hyper in small_specs() {
        let a = fit(&ModelSpec::new(hyper.clone(), 9), &x, &y).unwrap().to_json().unwrap();
        let b = fit(&ModelSpec::new(hyper, 9), &x, &y).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn serialized_models_reload_bit_exact() {
    let (x, y) = blobs(100, 6, 7);
    let (probe, _) = blobs(300, 6, 8);
    for hyper in small_specs() {
        let m = fit(&ModelSpec::new(hyper, 1), &x, &y).unwrap();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        let a = m.predict_proba(&probe).unwrap();
        let b = back.predict_proba(&probe).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn wrong_width_is_a_layout_error() {
    let (x, y) = blobs(40, 3, 1);
    let m = fit(&ModelSpec::new(Hyperparameters::Lr { c: 1.0 }, 0), &x, &y).unwrap();
    let narrow = Matrix::zeros(2, 2);
    assert!(matches!(
        m.predict_proba(&narrow),
        Err(Error::Layout { expected: 3, actual: 2 })
    ));
}

#[test]
fn tampered_envelopes_are_rejected() {
    let (x, y) = blobs(40, 3, 1);
    let m = fit(&ModelSpec::new(Hyperparameters::Lr { c: 1.0 }, 0), &x, &y).unwrap();

    let mut env = m.to_envelope();
    env.version += 1;
    assert!(matches!(TrainedModel::from_envelope(&env), Err(Error::Schema(_))));

    let mut env = m.to_envelope();
    env.n_features = 7;
    assert!(TrainedModel::from_envelope(&env).is_err());

    let mut env = m.to_envelope();
    env.params.truncate(env.params.len() / 2);
    assert!(TrainedModel::from_envelope(&env).is_err());
}

#[test]
fn non_binary_labels_are_refused() {
    let (x, _) = blobs(10, 2, 1);
    let y = vec![0.5; 10];
    assert!(fit(&ModelSpec::new(Hyperparameters::Lr { c: 1.0 }, 0), &x, &y).is_err());
}

#[test]
fn default_grid_sizes() {
    let sizes: Vec<usize> = Family::ALL.iter().map(|&f| hyperparameter_grid(f).len()).collect();
    assert_eq!(sizes, [6, 18, 36, 25]);
}

#[test]
fn excluded_families_do_not_parse() {
    assert!("svm".parse::<Family>().is_err());
    assert!("cnn".parse::<Family>().is_err());
    assert_eq!("rf".parse::<Family>().unwrap(), Family::Rf);
}
