use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{EpochLoss, GanConfig, GanModel, HashSet64, OutputBlock, OutputLayout};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nnet::loss::{bce_with_logits, bce_with_logits_grad};
use crate::nnet::{Activation, Adam, AdamConfig, DenseNet, DenseNetSpec, LayerSpec};
use crate::preprocess::PreprocessPlan;
use crate::rng::{derive_seed, rng, tag, Rng};
use crate::table::Table;

/// Gumbel-softmax relaxation of every one-hot block; scalars pass through.
struct Relaxed {
    out: Mat,
}

fn relax(raw: &Mat, layout: &OutputLayout, tau: f64, r: &mut Rng) -> Relaxed {
    let mut out = raw.clone();
    for i in 0..raw.rows() {
        let row = out.row_mut(i);
        for b in &layout.blocks {
            if let OutputBlock::OneHot { offset, cardinality } = *b {
                let block = &mut row[offset..offset + cardinality];
                let mut max = f64::NEG_INFINITY;
                for v in block.iter_mut() {
                    let u: f64 = r.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
                    *v = (*v - libm::log(-libm::log(u))) / tau;
                    max = max.max(*v);
                }
                let mut sum = 0.0;
                for v in block.iter_mut() {
                    *v = libm::exp(*v - max);
                    sum += *v;
                }
                block.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }
    Relaxed { out }
}

/// Chain rule through [`relax`]: softmax Jacobian scaled by `1/τ`.
fn relax_backward(relaxed: &Relaxed, layout: &OutputLayout, tau: f64, grad: &Mat) -> Mat {
    let mut g = grad.clone();
    for i in 0..grad.rows() {
        let y = relaxed.out.row(i);
        let row = g.row_mut(i);
        for b in &layout.blocks {
            if let OutputBlock::OneHot { offset, cardinality } = *b {
                let ys = &y[offset..offset + cardinality];
                let gs = &mut row[offset..offset + cardinality];
                let dot: f64 = ys.iter().zip(gs.iter()).map(|(a, b)| a * b).sum();
                for (gk, yk) in gs.iter_mut().zip(ys) {
                    *gk = yk * (*gk - dot) / tau;
                }
            }
        }
    }
    g
}

fn hidden_layers(config: &GanConfig, dropout: f64) -> Vec<LayerSpec> {
    config.hidden.iter().map(|&w| LayerSpec::new(w, Activation::LeakyRelu(0.2)).with_dropout(dropout)).collect()
}

/// Groups of `pac` consecutive rows side by side.
fn pack(m: Mat, pac: usize) -> Mat {
    let (rows, cols) = (m.rows(), m.cols());
    Mat::from_vec(rows / pac, cols * pac, m.into_vec()).expect("rows divisible by pac")
}

fn unpack(m: Mat, pac: usize) -> Mat {
    let (rows, cols) = (m.rows(), m.cols());
    Mat::from_vec(rows * pac, cols / pac, m.into_vec()).expect("packed width")
}

fn noise(rows: usize, dim: usize, r: &mut Rng) -> Mat {
    Mat::from_vec(rows, dim, (0..rows * dim).map(|_| r.sample(rand_distr::StandardNormal)).collect()).expect("noise shape")
}

/// Trains generator and discriminator with alternating single steps.
///
/// Discriminator: BCE with real rows labelled `label_smoothing` and fakes 0,
/// scoring packs of `pac` rows at once.
/// Generator: non-saturating BCE of its fakes toward 1.
pub fn fit_gan(train: &Table, config: &GanConfig) -> Result<GanModel> {
    config.validate()?;
    let n = train.n_rows();
    if n < 2 * config.batch_size {
        return Err(Error::InvalidArgument(format!(
            "GAN training needs at least {} rows (2 × batch size), got {n}",
            2 * config.batch_size
        )));
    }
    let plan = PreprocessPlan::fit(train)?;
    let encoded = plan.encode(train)?.matrix;
    let layout = OutputLayout::fit(&plan, &encoded);
    let real = layout.expand(&encoded);
    let real_hashes = HashSet64::from_hashes(
        (0..encoded.rows()).map(|r| super::row_hash(&plan, encoded.row(r), config.filter_precision)).collect(),
    );

    let mut g_layers = hidden_layers(config, 0.0);
    g_layers.push(LayerSpec::new(layout.width, Activation::Identity));
    let mut generator = DenseNet::new(&DenseNetSpec {
        input: config.noise_dim,
        layers: g_layers,
        seed: derive_seed(config.seed, &[tag("gan.generator")]),
    })?;
    let mut d_layers = hidden_layers(config, config.dropout);
    d_layers.push(LayerSpec::new(1, Activation::Identity));
    let mut discriminator = DenseNet::new(&DenseNetSpec {
        input: layout.width * config.pac,
        layers: d_layers,
        seed: derive_seed(config.seed, &[tag("gan.discriminator")]),
    })?;
    let adam = |lr| AdamConfig { lr, beta1: 0.5, beta2: 0.9, eps: 1e-8 };
    let mut opt_g = Adam::new(&generator, adam(config.lr_generator));
    let mut opt_d = Adam::new(&discriminator, adam(config.lr_discriminator));

    let mut r = rng(derive_seed(config.seed, &[tag("gan.train")]));
    let (b, pac) = (config.batch_size, config.pac);
    let smooth = vec![config.label_smoothing; b / pac];
    let zeros = vec![0.0; b / pac];
    let ones = vec![1.0; b / pac];
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut r);
        let (mut d_sum, mut g_sum, mut steps) = (0.0, 0.0, 0usize);
        for chunk in order.chunks_exact(b) {
            // discriminator step
            let real_b = pack(real.select_rows(chunk), pac);
            let z = noise(b, config.noise_dim, &mut r);
            let fake = relax(&generator.predict(&z)?, &layout, config.tau, &mut r);
            let c_real = discriminator.forward(&real_b, Some(&mut r))?;
            let c_fake = discriminator.forward(&pack(fake.out, pac), Some(&mut r))?;
            let l_real = c_real.output().as_slice().to_vec();
            let l_fake = c_fake.output().as_slice().to_vec();
            let d_loss = bce_with_logits(&l_real, &smooth) + bce_with_logits(&l_fake, &zeros);
            let (mut gd, _) = discriminator.backward(&c_real, &bce_with_logits_grad(&l_real, &smooth))?;
            let (gd_fake, _) = discriminator.backward(&c_fake, &bce_with_logits_grad(&l_fake, &zeros))?;
            gd.add(&gd_fake);
            opt_d.step(&mut discriminator, &gd)?;

            // generator step
            let z = noise(b, config.noise_dim, &mut r);
            let c_gen = generator.forward(&z, None)?;
            let fake = relax(c_gen.output(), &layout, config.tau, &mut r);
            let c_disc = discriminator.forward(&pack(fake.out.clone(), pac), Some(&mut r))?;
            let logits = c_disc.output().as_slice().to_vec();
            let g_loss = bce_with_logits(&logits, &ones);
            let (_, d_fake) = discriminator.backward(&c_disc, &bce_with_logits_grad(&logits, &ones))?;
            let d_raw = relax_backward(&fake, &layout, config.tau, &unpack(d_fake, pac));
            let (gg, _) = generator.backward(&c_gen, &d_raw)?;
            opt_g.step(&mut generator, &gg)?;

            if !d_loss.is_finite() || !g_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            d_sum += d_loss;
            g_sum += g_loss;
            steps += 1;
        }
        let steps = steps.max(1) as f64;
        loss_trace.push(EpochLoss { discriminator: d_sum / steps, generator: g_sum / steps });
    }

    Ok(GanModel { config: config.clone(), generator, discriminator, plan, layout, real_hashes, loss_trace })
}

/// Fraction of packs of held-out real rows and of freshly generated rows
/// the discriminator classifies correctly (logit > 0 means "real"). Rows
/// beyond a whole number of packs are ignored.
pub fn discriminator_accuracy(model: &GanModel, real: &Table, n_fake: usize, seed: u64) -> Result<f64> {
    let pac = model.config.pac;
    let trim = |m: Mat| {
        let keep: Vec<usize> = (0..m.rows() / pac * pac).collect();
        pack(m.select_rows(&keep), pac)
    };
    let real_x = trim(model.layout.expand(&model.plan.encode(real)?.matrix));
    let mut r = rng(seed);
    let fake_x = trim(model.layout.expand(&model.sample_encoded(n_fake, &mut r)?));
    if real_x.rows() == 0 || fake_x.rows() == 0 {
        return Err(Error::InvalidArgument(format!("accuracy needs at least {pac} real and fake rows")));
    }
    let real_logits = model.discriminator.predict(&real_x)?;
    let fake_logits = model.discriminator.predict(&fake_x)?;
    let correct = real_logits.as_slice().iter().filter(|&&l| l > 0.0).count()
        + fake_logits.as_slice().iter().filter(|&&l| l <= 0.0).count();
    Ok(correct as f64 / (real_x.rows() + fake_x.rows()) as f64)
}
