//! Shared finite-difference gradient oracle.

use snsgan_core::Param;

pub const FD_STEP: f64 = 1e-5;

/// Central finite differences over every element of every parameter,
/// compared against the supplied analytic gradients. Returns the largest
/// combined relative error max(|a−f| − atol, 0) / max(|a|, |f|, 1).
pub fn max_grad_deviation(
    params: &[Param],
    analytic: &[Vec<f64>],
    mut eval_loss: impl FnMut() -> f64,
    rtol: f64,
    atol: f64,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for (param, grads) in params.iter().zip(analytic) {
        for idx in 0..param.numel() {
            let original = param.update(|data| {
                let v = data[idx];
                data[idx] = v + FD_STEP;
                v
            });
            let plus = eval_loss();
            param.update(|data| data[idx] = original - FD_STEP);
            let minus = eval_loss();
            param.update(|data| data[idx] = original);

            let fd = (plus - minus) / (2.0 * FD_STEP);
            let a = grads[idx];
            let err = (a - fd).abs();
            let denom = a.abs().max(fd.abs()).max(1.0);
            let rel = (err - atol).max(0.0) / denom;
            assert!(
                rel < rtol,
                "{}[{idx}]: analytic {a}, finite-diff {fd}, rel {rel:.3e} (rtol {rtol:.1e})",
                param.name()
            );
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

/// Zeroes grads, runs one backward via the closure, and returns the analytic
/// per-parameter gradients.
pub fn analytic_gradients(params: &[Param], mut run_backward: impl FnMut()) -> Vec<Vec<f64>> {
    for p in params {
        p.zero_grad();
    }
    run_backward();
    params.iter().map(|p| p.grad_clone()).collect()
}
