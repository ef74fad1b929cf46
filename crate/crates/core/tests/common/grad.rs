//! Central finite-difference checks of every layer's backward pass.

use serpent_core::nn::ops::{self, Mode, RunningStats};
use serpent_core::nn::{ser_layer_specs, Model, ModelConfig, StepKey, Tensor};
use serpent_core::rng::SplitMix64;

use super::rel_err;

const H: f64 = 1e-5;

fn random_tensor(shape: &[usize], rng: &mut SplitMix64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data_mut().iter_mut().for_each(|x| *x = rng.next_gaussian());
    t
}

fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Max relative error between `analytic` and the central difference of
/// `loss` with respect to every entry of `param`.
fn compare(param: &mut Tensor, analytic: &Tensor, mut loss: impl FnMut(&Tensor) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..param.len() {
        let orig = param.data()[i];
        param.data_mut()[i] = orig + H;
        let up = loss(param);
        param.data_mut()[i] = orig - H;
        let down = loss(param);
        param.data_mut()[i] = orig;
        worst = worst.max(rel_err(analytic.data()[i], (up - down) / (2.0 * H)));
    }
    worst
}

pub fn conv1d() -> f64 {
    let mut rng = SplitMix64::new(11);
    let mut x = random_tensor(&[2, 6, 3], &mut rng);
    let mut w = random_tensor(&[3, 3, 4], &mut rng);
    let mut b = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[2, 6, 4], &mut rng);
    let g = ops::conv1d_backward(&r, &x, &w, true).unwrap();
    let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
    let e1 = compare(&mut x, g.input.as_ref().unwrap(), |x| project(&ops::conv1d_forward(x, &w0, &b0).unwrap(), &r));
    let e2 = compare(&mut w, &g.weight, |w| project(&ops::conv1d_forward(&x0, w, &b0).unwrap(), &r));
    let e3 = compare(&mut b, &g.bias, |b| project(&ops::conv1d_forward(&x0, &w0, b).unwrap(), &r));
    e1.max(e2).max(e3)
}

pub fn batchnorm() -> f64 {
    let mut rng = SplitMix64::new(12);
    let mut x = random_tensor(&[4, 3, 2], &mut rng);
    let mut gamma = random_tensor(&[2], &mut rng);
    let mut beta = random_tensor(&[2], &mut rng);
    let r = random_tensor(&[4, 3, 2], &mut rng);
    let fwd = |x: &Tensor, g: &Tensor, b: &Tensor| {
        let mut running = RunningStats::new(2);
        ops::batchnorm_forward(x, g, b, &mut running, Mode::Train, 0.99, 1e-3).unwrap()
    };
    let (_, cache) = fwd(&x, &gamma, &beta);
    let (dx, dg, db) = ops::batchnorm_backward(&r, &cache.unwrap(), &gamma).unwrap();
    let (x0, g0, b0) = (x.clone(), gamma.clone(), beta.clone());
    let e1 = compare(&mut x, &dx, |x| project(&fwd(x, &g0, &b0).0, &r));
    let e2 = compare(&mut gamma, &dg, |g| project(&fwd(&x0, g, &b0).0, &r));
    let e3 = compare(&mut beta, &db, |b| project(&fwd(&x0, &g0, b).0, &r));
    e1.max(e2).max(e3)
}

pub fn maxpool() -> f64 {
    let mut rng = SplitMix64::new(13);
    // distinct, well separated values so no window has a near tie
    let mut values: Vec<f64> = (0..36).map(|i| i as f64 * 0.1).collect();
    rng.shuffle(&mut values);
    let mut x = Tensor::new(vec![2, 9, 2], values).unwrap();
    let (y, argmax) = ops::maxpool1d(&x, 5, 2).unwrap();
    let r = random_tensor(y.shape(), &mut rng);
    let dx = ops::maxpool1d_backward(&r, &argmax, x.shape()).unwrap();
    compare(&mut x, &dx, |x| project(&ops::maxpool1d(x, 5, 2).unwrap().0, &r))
}

pub fn dense() -> f64 {
    let mut rng = SplitMix64::new(14);
    let mut x = random_tensor(&[3, 1, 5], &mut rng);
    let mut w = random_tensor(&[5, 4], &mut rng);
    let mut b = random_tensor(&[4], &mut rng);
    let r = random_tensor(&[3, 1, 4], &mut rng);
    let (dx, dw, db) = ops::dense_backward(&r, &x, &w).unwrap();
    let (x0, w0, b0) = (x.clone(), w.clone(), b.clone());
    let e1 = compare(&mut x, &dx, |x| project(&ops::dense_forward(x, &w0, &b0).unwrap(), &r));
    let e2 = compare(&mut w, &dw, |w| project(&ops::dense_forward(&x0, w, &b0).unwrap(), &r));
    let e3 = compare(&mut b, &db, |b| project(&ops::dense_forward(&x0, &w0, b).unwrap(), &r));
    e1.max(e2).max(e3)
}

pub fn relu() -> f64 {
    let mut rng = SplitMix64::new(15);
    let mut x = random_tensor(&[2, 5, 3], &mut rng);
    // keep clear of the kink at zero
    x.data_mut().iter_mut().for_each(|v| {
        if v.abs() < 1e-2 {
            *v += 0.1
        }
    });
    let r = random_tensor(x.shape(), &mut rng);
    let dx = ops::relu_backward(&r, &x).unwrap();
    compare(&mut x, &dx, |x| project(&ops::relu_forward(x), &r))
}

pub fn dropout() -> f64 {
    let mut rng = SplitMix64::new(16);
    let mut x = random_tensor(&[2, 4, 3], &mut rng);
    let mask = ops::dropout_mask(x.len(), 0.2, &mut rng);
    let r = random_tensor(x.shape(), &mut rng);
    let dx = ops::apply_mask(&r, &mask).unwrap();
    compare(&mut x, &dx, |x| project(&ops::apply_mask(x, &mask).unwrap(), &r))
}

pub fn softmax_cce() -> f64 {
    let mut rng = SplitMix64::new(17);
    let mut z = random_tensor(&[3, 1, 5], &mut rng);
    let mut y = Tensor::zeros(&[3, 1, 5]);
    for (i, c) in [1usize, 4, 0].iter().enumerate() {
        y.data_mut()[i * 5 + c] = 1.0;
    }
    let (_, fused) = ops::cce_loss(&ops::softmax(&z), &y).unwrap();
    let e1 = compare(&mut z.clone(), &fused, |z| ops::cce_loss(&ops::softmax(z), &y).unwrap().0);
    let r = random_tensor(z.shape(), &mut rng);
    let dz = ops::softmax_backward(&r, &ops::softmax(&z)).unwrap();
    let e2 = compare(&mut z, &dz, |z| project(&ops::softmax(z), &r));
    e1.max(e2)
}

/// Whole-network check on a narrow copy of the emotion CNN in train mode
/// with fixed dropout masks.
pub fn full_model() -> f64 {
    let cfg = ModelConfig { layers: ser_layer_specs(&[3, 3, 2, 2, 2, 2], 7), ..Default::default() };
    let mut model = Model::build(&cfg, 5).unwrap();
    let mut rng = SplitMix64::new(18);
    let x = random_tensor(&[4, 22, 1], &mut rng);
    let mut y = Tensor::zeros(&[4, 1, 7]);
    for (i, c) in [0usize, 3, 6, 2].iter().enumerate() {
        y.data_mut()[i * 7 + c] = 1.0;
    }
    let key = StepKey { seed: 1, epoch: 0, batch: 0 };
    let (p, caches) = model.forward(&x, Mode::Train, Some(key)).unwrap();
    let (_, g) = ops::cce_loss(&p, &y).unwrap();
    let grads = model.backward(&caches, g, true).unwrap();
    let n_params = grads.len();
    let mut worst: f64 = 0.0;
    #[allow(clippy::needless_range_loop)]
    for pi in 0..n_params {
        let mut param = model.params()[pi].clone();
        let analytic = grads[pi].clone();
        let err = compare(&mut param, &analytic, |candidate| {
            let mut m = model.clone();
            *m.params_mut()[pi] = candidate.clone();
            let (p, _) = m.forward(&x, Mode::Train, Some(key)).unwrap();
            ops::cce_loss(&p, &y).unwrap().0
        });
        worst = worst.max(err);
    }
    worst
}

pub fn all() -> Vec<(&'static str, f64)> {
    vec![
        ("conv1d", conv1d()),
        ("batchnorm", batchnorm()),
        ("maxpool1d", maxpool()),
        ("dense", dense()),
        ("relu", relu()),
        ("dropout", dropout()),
        ("softmax+cce", softmax_cce()),
        ("full model", full_model()),
    ]
}
