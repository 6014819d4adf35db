//! Shared oracles and fixtures for the integration tests and the acceptance
//! harness. Everything here is computed independently of the library's
//! backward passes.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use dermvgg::net::NetworkGraph;
use dermvgg::ops::{
    conv2d_backward, conv2d_forward, cross_entropy, dense_backward, dense_forward, maxpool2x2_backward,
    maxpool2x2_forward, relu_backward, relu_forward, softmax, softmax_backward, softmax_cross_entropy_grad, ConvParams,
    DenseParams,
};
use dermvgg::{ArchConfig, Mode, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, 1e-3)`; the floor keeps near-zero entries from
/// turning rounding noise into large relative errors.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_err(a, n)).fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

const H: f64 = 1e-6;

/// Max relative error of the conv backward (input, kernel, bias) for one seed.
pub fn conv_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, ci, co) = (rng.random_range(1..3), rng.random_range(1..4), rng.random_range(1..4));
    let (h, w) = (rng.random_range(3..7), rng.random_range(3..7));
    let xs = [n, ci, h, w];
    let ks = [co, ci, 3, 3];
    let x = uniform(&mut rng, xs.iter().product(), -1.0, 1.0);
    let k = uniform(&mut rng, ks.iter().product(), -1.0, 1.0);
    let b = uniform(&mut rng, co, -1.0, 1.0);
    let r = uniform(&mut rng, n * co * h * w, -1.0, 1.0);
    let loss = |x: &[f64], k: &[f64], b: &[f64]| {
        let p = ConvParams::new(t(&ks, k), t(&[co], b)).unwrap();
        dot(conv2d_forward(&t(&xs, x), &p).unwrap().data(), &r)
    };
    let p = ConvParams::new(t(&ks, &k), t(&[co], &b)).unwrap();
    let g = conv2d_backward(&t(&xs, &x), &p, &t(&[n, co, h, w], &r)).unwrap();
    let nx = numeric_grad(&x, H, |v| loss(v, &k, &b));
    let nk = numeric_grad(&k, H, |v| loss(&x, v, &b));
    let nb = numeric_grad(&b, H, |v| loss(&x, &k, v));
    max_rel_err(g.grad_x.data(), &nx)
        .max(max_rel_err(g.grad_kernel.data(), &nk))
        .max(max_rel_err(g.grad_bias.data(), &nb))
}

pub fn dense_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, i, o) = (rng.random_range(1..5), rng.random_range(1..9), rng.random_range(1..7));
    let x = uniform(&mut rng, n * i, -1.0, 1.0);
    let w = uniform(&mut rng, o * i, -1.0, 1.0);
    let b = uniform(&mut rng, o, -1.0, 1.0);
    let r = uniform(&mut rng, n * o, -1.0, 1.0);
    let loss = |x: &[f64], w: &[f64], b: &[f64]| {
        let p = DenseParams::new(t(&[o, i], w), t(&[o], b)).unwrap();
        dot(dense_forward(&t(&[n, i], x), &p).unwrap().data(), &r)
    };
    let p = DenseParams::new(t(&[o, i], &w), t(&[o], &b)).unwrap();
    let g = dense_backward(&t(&[n, i], &x), &p, &t(&[n, o], &r)).unwrap();
    max_rel_err(g.grad_x.data(), &numeric_grad(&x, H, |v| loss(v, &w, &b)))
        .max(max_rel_err(g.grad_weight.data(), &numeric_grad(&w, H, |v| loss(&x, v, &b))))
        .max(max_rel_err(g.grad_bias.data(), &numeric_grad(&b, H, |v| loss(&x, &w, v))))
}

/// Inputs stay at least 0.01 away from the kink at zero.
pub fn relu_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.random_range(1..40);
    let x: Vec<f64> =
        uniform(&mut rng, len, 0.01, 2.0).into_iter().map(|v| if rng.random_bool(0.5) { -v } else { v }).collect();
    let r = uniform(&mut rng, len, -1.0, 1.0);
    let g = relu_backward(&t(&[len], &x), &t(&[len], &r)).unwrap();
    let num = numeric_grad(&x, H, |v| dot(relu_forward(&t(&[len], v)).data(), &r));
    max_rel_err(g.data(), &num)
}

/// Window values are a shuffled ladder with spacing far above the step, so
/// the argmax never flips under perturbation.
pub fn maxpool_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (rng.random_range(1..3), rng.random_range(1..3));
    let (h, w) = (rng.random_range(2..8), rng.random_range(2..8));
    let len = n * c * h * w;
    let mut x: Vec<f64> = (0..len).map(|i| i as f64 * 0.01 - 1.0).collect();
    x.shuffle(&mut rng);
    let shape = [n, c, h, w];
    let (y, idx) = maxpool2x2_forward(&t(&shape, &x)).unwrap();
    let r = uniform(&mut rng, y.len(), -1.0, 1.0);
    let g = maxpool2x2_backward(&idx, &t(y.shape(), &r)).unwrap();
    let num = numeric_grad(&x, H, |v| dot(maxpool2x2_forward(&t(&shape, v)).unwrap().0.data(), &r));
    max_rel_err(g.data(), &num)
}

pub fn softmax_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (rng.random_range(1..5), rng.random_range(2..6));
    let z = uniform(&mut rng, n * c, -3.0, 3.0);
    let r = uniform(&mut rng, n * c, -1.0, 1.0);
    let p = softmax(&t(&[n, c], &z)).unwrap();
    let g = softmax_backward(&p, &t(&[n, c], &r)).unwrap();
    let num = numeric_grad(&z, H, |v| dot(softmax(&t(&[n, c], v)).unwrap().data(), &r));
    max_rel_err(g.data(), &num)
}

/// Softmax followed by the mean cross-entropy, differentiated with respect
/// to the logits.
pub fn softmax_ce_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (rng.random_range(1..5), rng.random_range(2..6));
    let z = uniform(&mut rng, n * c, -3.0, 3.0);
    let mut y = vec![0.0; n * c];
    for row in 0..n {
        y[row * c + rng.random_range(0..c)] = 1.0;
    }
    let yt = t(&[n, c], &y);
    let p = softmax(&t(&[n, c], &z)).unwrap();
    let g = softmax_cross_entropy_grad(&yt, &p).unwrap();
    let num = numeric_grad(&z, H, |v| cross_entropy(&yt, &softmax(&t(&[n, c], v)).unwrap()).unwrap());
    max_rel_err(g.data(), &num)
}

/// Whole-network check on the shrunken architecture in 64-bit mode, every
/// layer trainable, dropout active with a fixed mask. The step is kept small
/// because a larger one pushes some ReLU inputs across zero. Returns the max
/// relative error over `coords_per_tensor` sampled entries of each tensor.
pub fn network_check(seed: u64, coords_per_tensor: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = NetworkGraph::<f64>::build(ArchConfig::shrunken(3)).unwrap();
    graph.init_base(&mut rng);
    graph.init_head(&mut rng);
    for name in graph.tensor_names().into_iter().filter(|n| n.ends_with(".bias")) {
        for v in graph.tensor_mut(&name).unwrap().data_mut() {
            *v = rng.random_range(-0.1..0.1);
        }
    }
    graph.set_trainable(false);
    let n = 2;
    let x = Tensor::new(graph.input_shape(n).to_vec(), uniform(&mut rng, n * 3 * 32 * 32, 0.0, 1.0)).unwrap();
    let mut y = Tensor::<f64>::zeros([n, 3]);
    y.data_mut()[0] = 1.0;
    y.data_mut()[5] = 1.0;
    let mask_seed = rng.random::<u64>();

    let loss = |g: &NetworkGraph<f64>| {
        let p = g.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed)).unwrap();
        cross_entropy(&y, &p).unwrap()
    };
    let (p, tape) = graph.forward_recorded(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed)).unwrap();
    let grads = graph.backward_from_logits(&tape, &softmax_cross_entropy_grad(&y, &p).unwrap()).unwrap();
    assert_eq!(grads.len(), 32);

    let mut worst: f64 = 0.0;
    for (name, grad) in grads.iter() {
        let len = grad.len();
        let picks: Vec<usize> = if len <= coords_per_tensor {
            (0..len).collect()
        } else {
            (0..coords_per_tensor).map(|_| rng.random_range(0..len)).collect()
        };
        for i in picks {
            let mut probe = graph.clone();
            let orig = probe.tensor(name).unwrap().data()[i];
            let h = 1e-6;
            probe.tensor_mut(name).unwrap().data_mut()[i] = orig + h;
            let up = loss(&probe);
            probe.tensor_mut(name).unwrap().data_mut()[i] = orig - h;
            let down = loss(&probe);
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(grad.data()[i], numeric));
        }
    }
    worst
}

/// Solid-color class images with a little texture, `side`x`side` PNGs under
/// `root/{train,test}/<class>/`.
pub fn write_fixture(root: &Path, classes: &[&str], train_per: usize, test_per: usize, side: u32) {
    const COLORS: [[u8; 3]; 4] = [[200, 40, 40], [40, 200, 40], [40, 40, 200], [200, 200, 40]];
    for (split, per) in [("train", train_per), ("test", test_per)] {
        for (c, name) in classes.iter().enumerate() {
            let dir = root.join(split).join(name);
            fs::create_dir_all(&dir).unwrap();
            for i in 0..per {
                let [r, g, b] = COLORS[c % COLORS.len()];
                let img = image::RgbImage::from_fn(side, side, |x, y| {
                    let j = ((x * 7 + y * 13 + i as u32 * 5) % 16) as u8;
                    image::Rgb([r.saturating_add(j), g.saturating_add(j), b.saturating_add(j)])
                });
                img.save(dir.join(format!("img_{i:04}.png"))).unwrap();
            }
        }
    }
}

/// Eight random-noise images (four per class) for the overfit test.
pub fn overfit_batch(seed: u64, side: usize) -> (Tensor<f32>, Tensor<f32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x: Vec<f32> = (0..8 * 3 * side * side).map(|_| rng.random::<f32>()).collect();
    let mut y = vec![0.0f32; 16];
    for i in 0..8 {
        y[i * 2 + i % 2] = 1.0;
    }
    (Tensor::new([8, 3, side, side], x).unwrap(), Tensor::new([8, 2], y).unwrap())
}

/// Eval-mode accuracy and mean loss of `graph` on a batch.
pub fn eval_batch(graph: &NetworkGraph<f32>, x: &Tensor<f32>, y: &Tensor<f32>) -> (f64, f64) {
    let p = graph.forward(x, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let c = y.shape()[1];
    let correct = p
        .data()
        .chunks(c)
        .zip(y.data().chunks(c))
        .filter(|(p, y)| dermvgg::train::argmax(p) == dermvgg::train::argmax(y))
        .count();
    (correct as f64 / y.shape()[0] as f64, cross_entropy(y, &p).unwrap() as f64)
}

pub struct OverfitRun {
    /// First step after which eval-mode accuracy on the batch is 100%.
    pub solved_at: Option<usize>,
    /// Eval-mode loss before training and after each of the first steps.
    pub early_losses: Vec<f64>,
}

/// Full-batch Adam at the default learning rate on [`overfit_batch`] with the
/// shrunken network (head dropout `dropout_rate`), every layer trainable.
pub fn overfit_run(seed: u64, max_steps: usize, track: usize, dropout_rate: f64) -> OverfitRun {
    use dermvgg::train::{HyperParams, Trainer};
    let mut init = dermvgg::rng::stream(seed, dermvgg::rng::Stream::Init);
    let arch = ArchConfig { dropout_rate, ..ArchConfig::shrunken(2) };
    let mut graph = NetworkGraph::<f32>::build(arch).unwrap();
    graph.init_base(&mut init);
    graph.init_head(&mut init);
    graph.set_trainable(false);
    let (x, y) = overfit_batch(seed, 32);
    let mut trainer = Trainer::new(HyperParams { seed, ..HyperParams::default() }).unwrap();
    let mut early_losses = vec![eval_batch(&graph, &x, &y).1];
    let mut solved_at = None;
    for step in 1..=max_steps.max(track) {
        trainer.step(&mut graph, &x, &y).unwrap();
        let (acc, loss) = eval_batch(&graph, &x, &y);
        if step <= track {
            early_losses.push(loss);
        }
        if acc == 1.0 && step <= max_steps && solved_at.is_none() {
            solved_at = Some(step);
        }
        if solved_at.is_some() && step >= track {
            break;
        }
    }
    OverfitRun { solved_at, early_losses }
}
