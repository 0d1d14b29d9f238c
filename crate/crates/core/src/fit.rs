//! Least-squares slope fitting on log-log axes, used to measure algebraic
//! decay/growth exponents.

/// Ordinary least-squares slope of y against x.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Slope of log|y| vs log x over samples of `f` on [x_lo, x_hi]
/// (log-spaced, `n` points). All sampled values must be nonzero.
pub fn loglog_slope<F: Fn(f64) -> f64>(f: F, x_lo: f64, x_hi: f64, n: usize) -> f64 {
    let (lx, ly): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let x = x_lo * (x_hi / x_lo).powf(t);
            (x.ln(), f(x).abs().ln())
        })
        .unzip();
    ls_slope(&lx, &ly)
}
