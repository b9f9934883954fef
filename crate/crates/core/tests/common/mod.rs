//! Quadrature oracles shared by the integration tests.
#![allow(dead_code)]

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integrates over [a, b] split at the given kinks.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, kinks: &[f64], tol: f64) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(kinks.iter().copied().filter(|k| *k > a && *k < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| simpson(f, w[0], w[1], tol)).sum()
}

/// Density of a sum of Laplace variables with distinct scales, written from
/// the partial-fraction form `Σ_m β_m^{2M-3} e^{-|x|/β_m} / (2 Π_{n≠m} (β_m² - β_n²))`.
pub fn distinct_pole_pdf(x: f64, alpha: f64, betas: &[f64]) -> f64 {
    let m = betas.len() as i32;
    betas
        .iter()
        .map(|&bm| {
            let denom: f64 = betas
                .iter()
                .filter(|&&bn| bn != bm)
                .map(|bn| bm * bm - bn * bn)
                .product();
            bm.powi(2 * m - 3) * (-(x - alpha).abs() / bm).exp() / (2.0 * denom)
        })
        .sum()
}
