//! Oracle procedures shared by the focused tests and the acceptance run.
//! Each returns the measured error so callers decide the tolerance.

use natadv::frontier::FrontierPoint;
use natadv::naturalness::{
    kl_logistic_optimum, ls_gan_optimum, mmd2, mmd2_naive, DiscLoss, Discriminator, GanConfig,
};
use natadv::nn::{GaussianPolicy, Mlp, Tape, Var};
use natadv::seed;
use ndarray::Array2;
use rand::Rng;

/// Probability tables in units of 1/200 so replicated batches match them
/// exactly.
pub const DIVERGENCE_CASES: &[(&[u32], &[u32])] = &[
    (&[120, 40, 20, 20], &[40, 60, 50, 50]),
    (&[30, 30, 30, 30, 80], &[70, 50, 40, 20, 20]),
    (&[10, 20, 30, 40, 50, 50], &[50, 50, 40, 30, 20, 10]),
    (
        &[25, 25, 25, 25, 25, 25, 25, 25],
        &[10, 20, 30, 40, 40, 30, 20, 10],
    ),
];

pub fn one_hot_rows(counts: &[u32]) -> Array2<f64> {
    let k = counts.len();
    let n: u32 = counts.iter().sum();
    let mut x = Array2::zeros((n as usize, k));
    let mut r = 0;
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            x[[r, i]] = 1.0;
            r += 1;
        }
    }
    x
}

/// Discriminator trained to convergence on one-hot outcomes.
pub fn train_discriminator(loss: DiscLoss, adv: &[u32], can: &[u32]) -> Discriminator {
    let cfg = GanConfig {
        hidden: vec![16],
        lr: 1e-2,
        batch_size: 10_000,
        ..GanConfig::default().plain()
    };
    let k = adv.len();
    let mut rng = seed::rng(7);
    let mut d = Discriminator::new(loss, k, vec![0.0; k], &cfg, &mut rng).unwrap();
    let (xa, xc) = (one_hot_rows(adv), one_hot_rows(can));
    for _ in 0..3000 {
        d.update(xa.view(), xc.view(), &mut rng).unwrap();
    }
    d
}

pub fn outcome_score(d: &Discriminator, k: usize, i: usize) -> f64 {
    let mut x = Array2::zeros((1, k));
    x[[0, i]] = 1.0;
    d.score_rows(x.view()).unwrap()[0]
}

pub fn prob(counts: &[u32], i: usize) -> f64 {
    counts[i] as f64 / counts.iter().sum::<u32>() as f64
}

/// Largest distance between trained scores and the closed-form optimum over
/// every case and outcome.
pub fn divergence_max_error(loss: DiscLoss) -> f64 {
    let cfg = GanConfig::default().plain();
    let mut worst: f64 = 0.0;
    for (adv, can) in DIVERGENCE_CASES {
        let d = train_discriminator(loss, adv, can);
        for i in 0..adv.len() {
            let (p, q) = (prob(adv, i), prob(can, i));
            let want = match loss {
                DiscLoss::LsGan => ls_gan_optimum(p, q, &cfg),
                DiscLoss::KlLogistic => kl_logistic_optimum(p, q, &cfg),
            };
            worst = worst.max((outcome_score(&d, adv.len(), i) - want).abs());
        }
    }
    worst
}

pub fn random_set(rng: &mut impl Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-2.0..2.0))
}

/// Largest gap between the fast MMD² and the naive double sum, and between
/// the singleton case and its closed form.
pub fn mmd_max_error() -> f64 {
    let mut rng = seed::rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let d = rng.gen_range(1..6);
        let a = {
            let n = rng.gen_range(2..40);
            random_set(&mut rng, n, d)
        };
        let b = {
            let n = rng.gen_range(2..40);
            random_set(&mut rng, n, d)
        };
        let sigma = rng.gen_range(0.3..3.0);
        for unbiased in [false, true] {
            let fast = mmd2(a.view(), b.view(), sigma, unbiased).unwrap();
            worst = worst.max((fast - mmd2_naive(a.view(), b.view(), sigma, unbiased)).abs());
        }
    }
    for sigma in [0.1, 0.5, 1.0, 3.0] {
        let x = Array2::from_shape_vec((1, 2), vec![0.2, -0.4]).unwrap();
        // ‖x − y‖² = 2σ²
        let y = Array2::from_shape_vec((1, 2), vec![0.2 + sigma * 2f64.sqrt(), -0.4]).unwrap();
        let v = mmd2(x.view(), y.view(), sigma, false).unwrap();
        worst = worst.max((v - (2.0 - 2.0 * (-1f64).exp())).abs());
    }
    worst
}

const H: f64 = 1e-5;
const GRAD_CASES: usize = 100;

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

fn random_sizes(rng: &mut impl Rng) -> Vec<usize> {
    let depth = rng.gen_range(1..=3);
    let mut s = vec![rng.gen_range(1..=4)];
    for _ in 0..depth {
        s.push(rng.gen_range(1..=5));
    }
    s.push(1);
    s
}

/// Scalar loss mixing the network output, softplus and a gradient penalty
/// built from the recorded input gradient.
fn mlp_loss(net: &Mlp, x: &Array2<f64>, tape: &mut Tape) -> (f64, Vec<Var>, Var) {
    let p = net.bind(tape);
    let xv = tape.leaf(x.clone());
    let trace = Mlp::apply(tape, &p, xv);
    let sp = tape.softplus(trace.output);
    let out = tape.mean(sp);
    let g = Mlp::input_gradient(tape, &p, &trace);
    let g2 = tape.square(g);
    let gp = tape.row_sum(g2);
    let gp = tape.mean(gp);
    let gp = tape.scale(gp, 0.3);
    let total = tape.add(out, gp);
    (tape.item(total), p, total)
}

/// Worst relative error of MLP parameter gradients against central
/// differences over random shapes and inputs.
pub fn mlp_gradient_error() -> f64 {
    let mut rng = seed::rng(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_CASES {
        let sizes = random_sizes(&mut rng);
        let mut net = Mlp::new(&sizes, 1.0, &mut rng).unwrap();
        for p in net.params_mut() {
            p.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        }
        let rows = rng.gen_range(1..=4);
        let x = Array2::from_shape_simple_fn((rows, sizes[0]), || rng.gen_range(-1.5..1.5));
        let value = |net: &Mlp| mlp_loss(net, &x, &mut Tape::new()).0;

        let mut tape = Tape::new();
        let (_, vars, root) = mlp_loss(&net, &x, &mut tape);
        let grads = tape.backward(root);
        for (k, &v) in vars.iter().enumerate() {
            let g = grads.wrt(v);
            for idx in 0..g.len() {
                let (r, c) = (idx / g.ncols(), idx % g.ncols());
                let orig = net.params()[k][[r, c]];
                net.params_mut()[k][[r, c]] = orig + H;
                let up = value(&net);
                net.params_mut()[k][[r, c]] = orig - H;
                let down = value(&net);
                net.params_mut()[k][[r, c]] = orig;
                worst = worst.max(rel_err(g[[r, c]], (up - down) / (2.0 * H)));
            }
        }
    }
    worst
}

/// Worst relative error of Gaussian log-probability gradients, mean network
/// and log-std alike.
pub fn policy_gradient_error() -> f64 {
    let mut rng = seed::rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..GRAD_CASES {
        let obs_dim = rng.gen_range(1..=4);
        let act_dim = rng.gen_range(1..=3);
        let mut pol =
            GaussianPolicy::new(obs_dim, act_dim, &[4], -0.3, (-5.0, 1.0), &mut rng).unwrap();
        for p in pol.params_mut() {
            p.mapv_inplace(|_| rng.gen_range(-0.9..0.9));
        }
        let obs = Array2::from_shape_simple_fn((3, obs_dim), || rng.gen_range(-1.0..1.0));
        let act = Array2::from_shape_simple_fn((3, act_dim), || rng.gen_range(-1.0..1.0));
        let eval = |pol: &GaussianPolicy| {
            let mut t = Tape::new();
            let vars = pol.bind(&mut t);
            let o = t.leaf(obs.clone());
            let a = t.leaf(act.clone());
            let (lp, _) = pol.record_log_prob(&mut t, &vars, o, a);
            let m = t.mean(lp);
            (t.item(m), t, vars, m)
        };
        let (_, tape, vars, root) = eval(&pol);
        let grads = tape.backward(root);
        let mut all: Vec<_> = vars.mean.clone();
        all.push(vars.log_std);
        for (k, v) in all.into_iter().enumerate() {
            let g = grads.wrt(v);
            for idx in 0..g.len() {
                let (r, c) = (idx / g.ncols(), idx % g.ncols());
                let orig = pol.params()[k][[r, c]];
                pol.params_mut()[k][[r, c]] = orig + H;
                let up = eval(&pol).0;
                pol.params_mut()[k][[r, c]] = orig - H;
                let down = eval(&pol).0;
                pol.params_mut()[k][[r, c]] = orig;
                worst = worst.max(rel_err(g[[r, c]], (up - down) / (2.0 * H)));
            }
        }
    }
    worst
}

/// (values, window, expected anchor indices), each traced by hand: for the
/// split after i, the lower anchor is the largest value among the `window`
/// entries ending at i (latest on ties), the upper anchor the smallest
/// among the `window` entries starting at i + 1 (earliest on ties), and the
/// first split with the largest upper minus lower wins.
pub fn largest_jump_traces() -> Vec<(Vec<f64>, usize, (usize, usize))> {
    vec![
        // Gaps 0.02, 0.58, 0.02.
        (vec![0.1, 0.12, 0.7, 0.72], 2, (1, 2)),
        // All gaps 0: first split.
        (vec![0.5, 0.5, 0.5], 1, (0, 1)),
        // Gaps -0.05, -0.55, 0.05: the dip at index 2 is never an anchor
        // of the winning split's upper side.
        (vec![0.1, 0.6, 0.05, 0.65], 2, (1, 3)),
        // Equal steps: first split.
        (vec![0.0, 0.25, 0.5, 0.75, 1.0], 1, (0, 1)),
        // Gaps 0, 0, 0.8.
        (vec![0.1, 0.1, 0.1, 0.9], 1, (2, 3)),
        // No smoothing: gaps 0.9, -0.8, 0.85, 0.05.
        (vec![0.0, 0.9, 0.1, 0.95, 1.0], 1, (0, 1)),
        // Smoothing: gaps 0.1 (0 to min(0.9, 0.1)), -0.8, 0.05, 0.05.
        (vec![0.0, 0.9, 0.1, 0.95, 1.0], 2, (0, 2)),
        // Decreasing: gaps -0.125, -0.375, -0.25, the first is the largest.
        (vec![1.0, 0.875, 0.5, 0.25], 1, (0, 1)),
        // Two equal jumps: the earlier one.
        (vec![0.1, 0.5, 0.5, 0.9], 1, (0, 1)),
        // Window longer than the list: gaps 0.1 and 0.5.
        (vec![0.2, 0.3, 0.8], 5, (1, 2)),
        // Plateaus inside windows: tightest bracket (1, 2), gap 0.6.
        (vec![0.3, 0.3, 0.9, 0.9], 2, (1, 2)),
    ]
}

/// O(n²) Pareto set as distinct (naturalness, adversarialness) pairs,
/// sorted by naturalness.
pub fn brute_force_pareto(points: &[FrontierPoint]) -> Vec<(f64, f64)> {
    let mut keep: Vec<(f64, f64)> = Vec::new();
    for p in points {
        let dominated = points.iter().any(|q| {
            q.naturalness >= p.naturalness
                && q.adversarialness >= p.adversarialness
                && (q.naturalness > p.naturalness || q.adversarialness > p.adversarialness)
        });
        let c = (p.naturalness, p.adversarialness);
        if !dominated && !keep.contains(&c) {
            keep.push(c);
        }
    }
    keep.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    keep
}
