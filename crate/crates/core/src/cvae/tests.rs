use super::*;
use crate::linalg::symmetric_eigenvalues;

fn names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("c{i}")).collect()
}

fn random_psd(d: usize, seed: u64) -> Mat {
    let mut r = rng(seed);
    let a = Mat::from_vec(d, d, (0..d * d).map(|_| r.sample(StandardNormal)).collect()).unwrap();
    let mut c = a.matmul(&a.transpose()).unwrap();
    for i in 0..d {
        c[(i, i)] += 0.1;
    }
    c
}

fn data(n: usize, seed: u64) -> Mat {
    let mut r = rng(seed);
    let mut m = Mat::zeros(n, 3);
    for i in 0..n {
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        m[(i, 0)] = a;
        m[(i, 1)] = 0.7 * a + 0.5 * b;
        m[(i, 2)] = 2.0 * b;
    }
    m
}

#[test]
fn identity_packs_to_zeros() {
    assert_eq!(cov_to_vec(&Mat::identity(2)).unwrap(), vec![0.0, 0.0, 0.0]);
}

#[test]
fn packs_known_factor() {
    let v = cov_to_vec(&Mat::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap()).unwrap();
    let ln2 = core::f64::consts::LN_2;
    let expect = [ln2, 1.0, 0.5 * ln2];
    assert!(v.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12), "{v:?}");
}

#[test]
fn roundtrip_random_psd() {
    for s in 0..50 {
        let c = random_psd(1 + (s as usize % 5), s);
        let back = vec_to_cov(&cov_to_vec(&c).unwrap()).unwrap();
        let mut diff = back.clone();
        for (x, y) in diff.as_mut_slice().iter_mut().zip(c.as_slice()) {
            *x -= y;
        }
        assert!(diff.frobenius() < 1e-9);
    }
}

#[test]
fn arbitrary_vectors_decode_to_psd() {
    let mut r = rng(9);
    for _ in 0..200 {
        let v: Vec<f64> = (0..10).map(|_| 3.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let c = vec_to_cov(&v).unwrap();
        assert!(CovMatrix::check(&c).is_ok());
    }
}

#[test]
fn forward_rejects_indefinite() {
    assert!(cov_to_vec(&Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).is_err());
}

#[test]
fn constant_data_gives_jittered_zero() {
    let m = Mat::from_vec(20, 2, vec![3.0; 40]).unwrap();
    let set = build_training_set(&m, &[0, 1], &CvaeConfig { bootstrap_count: 4, ..CvaeConfig::default() }).unwrap();
    assert!(set.iter().all(|c| c.max_abs() <= 1e-8));
}

#[test]
fn bootstrap_is_deterministic() {
    let m = data(100, 1);
    let cfg = CvaeConfig { bootstrap_count: 2, ..CvaeConfig::default() };
    assert_eq!(build_training_set(&m, &[0, 1, 2], &cfg).unwrap(), build_training_set(&m, &[0, 1, 2], &cfg).unwrap());
}

#[test]
fn bootstrap_mean_tracks_full_covariance() {
    let m = data(2000, 2);
    let set = build_training_set(&m, &[0, 1, 2], &CvaeConfig::default()).unwrap();
    let full = estimate_cov(&m, &[0, 1, 2], names(3)).unwrap().matrix;
    let mut mean = Mat::zeros(3, 3);
    for c in &set {
        for (a, b) in mean.as_mut_slice().iter_mut().zip(c.as_slice()) {
            *a += b / set.len() as f64;
        }
    }
    assert!(mean.max_abs_diff(&full) <= 0.1 * full.max_abs());
}

#[test]
fn subsample_too_small() {
    let m = data(4, 3);
    assert!(build_training_set(&m, &[0, 1, 2], &CvaeConfig::default()).is_err());
}

fn degenerate_fit(beta: f64) -> (Mat, CvaeModel) {
    let sigma = Mat::from_rows(&[vec![2.0, 0.5, 0.1], vec![0.5, 1.0, -0.3], vec![0.1, -0.3, 0.8]]).unwrap();
    let set = vec![sigma.clone(); 64];
    let cfg = CvaeConfig { epochs: 1500, batch_size: 64, lr: 3e-3, lr_final_fraction: 0.2, beta, ..CvaeConfig::default() };
    let model = fit_cvae(&set, names(3), &[0.0, 1.0, 2.0, 1.0, 1.0, 1.0], &cfg).unwrap();
    (sigma, model)
}

#[test]
fn degenerate_set_converges() {
    let (sigma, model) = degenerate_fit(1.0);
    let (first, last) = (model.loss_trace[0], *model.loss_trace.last().unwrap());
    assert!(last < 1e-3 * first, "{first} -> {last}");
    assert!(!model.weak_convergence);
    for s in 0..20 {
        let c = model.sample_cov(s).unwrap();
        let mut diff = c.matrix.clone();
        for (x, y) in diff.as_mut_slice().iter_mut().zip(sigma.as_slice()) {
            *x -= y;
        }
        assert!(diff.frobenius() <= 0.25 * sigma.frobenius());
    }
}

#[test]
fn zero_beta_is_pure_reconstruction() {
    let (_, model) = degenerate_fit(0.0);
    assert!(model.loss_trace.iter().all(|l| l.is_finite() && *l >= 0.0));
}

#[test]
fn bootstrap_training_is_smoothly_monotone_and_reproducible() {
    let m = data(400, 4);
    let cfg = CvaeConfig { epochs: 200, ..CvaeConfig::default() };
    let set = build_training_set(&m, &[0, 1, 2], &cfg).unwrap();
    let cond = [0.0, 0.0, 0.0, 1.0, 1.0, 2.0];
    let a = fit_cvae(&set, names(3), &cond, &cfg).unwrap();
    let b = fit_cvae(&set, names(3), &cond, &cfg).unwrap();
    assert_eq!(a.loss_trace, b.loss_trace);
    let ma: Vec<f64> = a.loss_trace.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    let bumps: Vec<(usize, f64)> = ma.windows(2).enumerate().filter(|(_, w)| w[1] > w[0]).map(|(i, w)| (i, w[1] - w[0])).collect();
    assert!(bumps.is_empty(), "moving average rose at {bumps:?}");
}

#[test]
fn samples_are_valid_and_distinct() {
    let m = data(400, 5);
    let cfg = CvaeConfig { epochs: 50, ..CvaeConfig::default() };
    let set = build_training_set(&m, &[0, 1, 2], &cfg).unwrap();
    let model = fit_cvae(&set, names(3), &[0.0; 6], &cfg).unwrap();
    for s in 0..1000 {
        let c = model.sample_cov(s).unwrap();
        assert!(symmetric_eigenvalues(&c.matrix)[0] >= -1e-10);
    }
    assert_ne!(model.sample_cov(1).unwrap(), model.sample_cov(2).unwrap());
}
