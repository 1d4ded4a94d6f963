//! The first-order Taylor (Newton-Schulz) inverse iteration and its
//! edge-network embedding: residuals square at every step, and the unfolded
//! network at the exact-Taylor parameters reproduces the iteration to
//! machine precision.
//!
//! Run with: cargo run --release --example taylor_inverse_residuals

use leoprec::linalg::{CMatrix, CVector};
use leoprec::rng::{rng_from_seed, standard_complex};
use leoprec::unfolded::{diag_inverse_init, taylor_step_exact, unfold_forward, UnfoldedParams};
use rand::Rng;

fn main() {
    let n = 16;
    let mut rng = rng_from_seed(3);
    let mut m = CMatrix::zeros(n, n);
    let mut wsum = 0.0;
    for _ in 0..n / 2 {
        let v = CVector::from_fn(n, |_| standard_complex(&mut rng)).normalized().unwrap();
        let w = rng.gen_range(0.5..1.5);
        wsum += w;
        m.add_outer_scaled(&v, w);
    }
    m.add_ridge(wsum * 1.5);

    let f0 = diag_inverse_init(&m).expect("diagonal invertible");
    let r0 = CMatrix::identity(n).sub(&f0.matmul(&m).unwrap()).spectral_norm(300);
    println!("contraction factor r = ||I - D^-1 M||_2 = {:.4}", r0);
    println!("\nlayer |  residual ||I - f M||_2  |  bound r^(2^l)");
    let mut f = f0.clone();
    for l in 1..=6 {
        f = taylor_step_exact(&f, &m).unwrap();
        let res = CMatrix::identity(n).sub(&f.matmul(&m).unwrap()).spectral_norm(300);
        println!("{:5} |  {:22.3e}  |  {:.3e}", l, res, r0.powi(1 << l));
    }

    let params = UnfoldedParams::taylor_embedding(6);
    let (net, _) = unfold_forward(&m, &params).expect("forward");
    let diff = net.sub(&f).frobenius_norm();
    println!("\nembedded network output vs iterated Taylor steps: |diff|_F = {:.3e}", diff);
}
