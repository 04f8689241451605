//! Mean-reduced losses and their gradients.


use crate::linalg::Mat;

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

pub fn bce(p: &[f64], y: &[f64]) -> f64 {
    let n = p.len().max(1) as f64;
    p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
        })
        .sum::<f64>()
        / n
}

/// Binary cross-entropy on logits, numerically stable.
pub fn bce_with_logits(logits: &[f64], y: &[f64]) -> f64 {
    let n = logits.len().max(1) as f64;
    logits
        .iter()
        .zip(y)
        .map(|(&l, &y)| l.max(0.0) - l * y + libm::log1p(libm::exp(-l.abs())))
        .sum::<f64>()
        / n
}

/// ∂/∂logit of [`bce_with_logits`].
pub fn bce_with_logits_grad(logits: &[f64], y: &[f64]) -> Mat {
    let n = logits.len().max(1) as f64;
    let g = logits.iter().zip(y).map(|(&l, &y)| (super::sigmoid(l) - y) / n).collect();
    Mat::from_vec(logits.len(), 1, g).expect("length matches")
}

pub fn mse(a: &Mat, b: &Mat) -> f64 {
    let n = a.as_slice().len().max(1) as f64;
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// ∂/∂a of [`mse`].
pub fn mse_grad(a: &Mat, b: &Mat) -> Mat {
    let n = a.as_slice().len().max(1) as f64;
    let g = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| 2.0 * (x - y) / n).collect();
    Mat::from_vec(a.rows(), a.cols(), g).expect("shape matches")
}

/// KL divergence of `N(μ, exp(logvar))` from `N(0, I)`, summed over latent
/// dimensions and averaged over the batch (rows).
pub fn kl_std_normal(mu: &Mat, logvar: &Mat) -> f64 {
    let batch = mu.rows().max(1) as f64;
    mu.as_slice()
        .iter()
        .zip(logvar.as_slice())
        .map(|(&m, &lv)| 0.5 * (libm::exp(lv) + m * m - 1.0 - lv))
        .sum::<f64>()
        / batch
}

/// Gradients of [`kl_std_normal`] with respect to `μ` and `logvar`.
pub fn kl_std_normal_grad(mu: &Mat, logvar: &Mat) -> (Mat, Mat) {
    let batch = mu.rows().max(1) as f64;
    let gm = mu.as_slice().iter().map(|m| m / batch).collect();
    let gl = logvar.as_slice().iter().map(|lv| 0.5 * (libm::exp(*lv) - 1.0) / batch).collect();
    (
        Mat::from_vec(mu.rows(), mu.cols(), gm).expect("shape"),
        Mat::from_vec(logvar.rows(), logvar.cols(), gl).expect("shape"),
    )
}
