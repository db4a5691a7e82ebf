//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub fn ricker(u: f64) -> f64 {
    u * (-u * u).exp()
}

/// Classical RK4 for `u' = -μu + σu(t-τ) + εb(u(t-τ)) + g` with constant history,
/// delayed midpoints from cubic Hermite interpolation of the stored solution.
#[allow(clippy::too_many_arguments)]
pub fn scalar_oracle(
    mu: f64,
    sigma: f64,
    eps: f64,
    g: f64,
    tau: f64,
    u0: f64,
    t_end: f64,
    per_tau: usize,
) -> Vec<(f64, f64)> {
    let h = tau / per_tau as f64;
    let steps = (t_end / h).round() as usize;
    let mut ts = vec![0.0];
    let mut us = vec![u0];
    let mut ds: Vec<f64> = Vec::new();
    let delayed = |t: f64, us: &[f64], ds: &[f64]| -> f64 {
        let s = t - tau;
        if s <= 0.0 {
            return u0;
        }
        let k = ((s / h).floor() as usize).min(us.len() - 2);
        let th = (s - k as f64 * h) / h;
        let (y0, y1, d0, d1) = (us[k], us[k + 1], ds[k], ds[k + 1]);
        let h00 = 2.0 * th.powi(3) - 3.0 * th * th + 1.0;
        let h10 = th.powi(3) - 2.0 * th * th + th;
        let h01 = -2.0 * th.powi(3) + 3.0 * th * th;
        let h11 = th.powi(3) - th * th;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    };
    let rhs = |u: f64, ud: f64| -mu * u + sigma * ud + eps * ricker(ud) + g;
    for n in 0..steps {
        let t = n as f64 * h;
        let u = us[n];
        ds.push(rhs(u, delayed(t, &us, &ds)));
        let dm = delayed(t + 0.5 * h, &us, &ds);
        let d1 = delayed(t + h, &us, &ds);
        let k1 = ds[n];
        let k2 = rhs(u + 0.5 * h * k1, dm);
        let k3 = rhs(u + 0.5 * h * k2, dm);
        let k4 = rhs(u + h * k3, d1);
        us.push(u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        ts.push(t + h);
    }
    ts.into_iter().zip(us).collect()
}

/// Plain bisection for the real root of `λ + c − σe^{−λτ}` on `[lo, hi]`.
pub fn bisect_char_root(c: f64, sigma: f64, tau: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = |l: f64| l + c - sigma * (-l * tau).exp();
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
