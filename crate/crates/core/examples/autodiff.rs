//! Fits sin(x) with an MLP using the reverse-mode tape and Adam.
//!
//! cargo run --release --example autodiff

use natadv::nn::{AdamState, Mlp, Tape};
use natadv::seed;
use ndarray::Array2;

fn main() -> natadv::Result<()> {
    let mut rng = seed::rng(0);
    let mut net = Mlp::new(&[1, 32, 32, 1], 1.0, &mut rng)?;
    let x = Array2::from_shape_fn((64, 1), |(i, _)| -3.0 + 6.0 * i as f64 / 63.0);
    let y = x.mapv(f64::sin);
    let mut adam = AdamState::new(net.params(), 1e-2, 1e-8);
    for step in 0..=2000 {
        let mut tape = Tape::new();
        let p = net.bind(&mut tape);
        let xv = tape.leaf(x.clone());
        let yv = tape.leaf(y.clone());
        let out = Mlp::apply(&mut tape, &p, xv).output;
        let diff = tape.sub(out, yv);
        let sq = tape.square(diff);
        let loss = tape.mean(sq);
        if step % 400 == 0 {
            println!("step {step:4}  mse {:.6}", tape.item(loss));
        }
        let grads = tape.backward(loss);
        let g: Vec<Array2<f64>> = p.iter().map(|&v| grads.wrt(v)).collect();
        let mut params: Vec<&mut Array2<f64>> = net.params_mut().iter_mut().collect();
        adam.update(&mut params, &g)?;
    }
    for v in [-2.0, 0.0, 1.5] {
        println!(
            "f({v}) = {:.4}, sin = {:.4}",
            net.forward(&[v])?[0],
            f64::sin(v)
        );
    }
    Ok(())
}
