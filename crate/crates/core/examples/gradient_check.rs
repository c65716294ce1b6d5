// Checks reverse-mode gradients of a small complex shrinkage block against
// central finite differences.

use tomosar::diffengine::gradcheck::check_gradients;
use tomosar::diffengine::Tensor;
use tomosar::linalg::C64;

pub fn run_example() -> anyhow::Result<()> {
    let c = |re: f64, im: f64| C64::new(re, im);
    let w = Tensor::complex([3, 2], vec![c(0.5, -0.2), c(0.1, 0.9), c(-0.7, 0.3), c(0.4, 0.4), c(0.2, -1.1), c(0.8, 0.05)])?;
    let x = Tensor::complex([2, 2], vec![c(1.0, 0.5), c(-0.3, 0.8), c(0.6, -0.4), c(0.9, 0.2)])?;
    let theta = Tensor::real([1], vec![0.05])?;
    let target = Tensor::complex([3, 2], vec![c(0.2, 0.0); 6])?;

    // loss = ‖S_θ(W X) − t‖² + ‖S_θ(W X)‖₁
    let check = check_gradients(&[w, x, theta, target], 1e-6, |g, v| {
        let z = g.matmul(v[0], v[1])?;
        let y = g.soft_threshold(z, v[2])?;
        let fit = g.mse_loss(y, v[3])?;
        let l1 = g.l1_loss(y)?;
        g.add(fit, l1)
    })?;
    println!("{} partials, relative error {:.2e}", check.analytic.len(), check.rel_error);
    for (a, n) in check.analytic.iter().zip(&check.numeric).take(4) {
        println!("  analytic {a:+.8} numeric {n:+.8}");
    }
    assert!(check.rel_error < 1e-5);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
