//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the library's numerical kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use num_complex::Complex64;

/// Gauss-Hermite nodes and weights for `∫ e^{-x²} f(x) dx`, by Newton
/// iteration on the normalized Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `log J - E[log Σ_j exp(|Z|² - |√ρ·H·(θ_0-θ_j) + Z|²)]` by a 2-D
/// Gauss-Hermite rule over `(Re H, Im H)` nested with another over
/// `(Re Z, Im Z)`.
pub fn capacity_quadrature(order: usize, rho: f64, nodes: usize) -> f64 {
    let (x, w) = gauss_hermite(nodes);
    // Each real coordinate is N(0, 1/2): density e^{-x²}/√π.
    let wn: Vec<f64> = w.iter().map(|w| w / std::f64::consts::PI.sqrt()).collect();
    let theta: Vec<Complex64> = (0..order)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / order as f64))
        .collect();
    let mut outer = 0.0;
    let mut terms = vec![0.0; order];
    for (a, wa) in x.iter().zip(&wn) {
        for (b, wb) in x.iter().zip(&wn) {
            let h = Complex64::new(*a, *b);
            let d: Vec<Complex64> = theta
                .iter()
                .map(|t| rho.sqrt() * h * (theta[0] - t))
                .collect();
            let mut inner = 0.0;
            for (c, wc) in x.iter().zip(&wn) {
                for (e, we) in x.iter().zip(&wn) {
                    let z = Complex64::new(*c, *e);
                    for (t, dj) in terms.iter_mut().zip(&d) {
                        *t = z.norm_sqr() - (dj + z).norm_sqr();
                    }
                    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
                    inner += wc * we * lse;
                }
            }
            outer += wa * wb * inner;
        }
    }
    (order as f64).ln() - outer
}

/// Capacities in nats from a separate polar-coordinate quadrature
/// (Gauss-Laguerre over |H|², Gauss-Hermite over Z), computed offline.
/// Rows: J = 2, 4, 8. Columns: ρ = 0.1, 0.5, 1, 2, 10.
pub const FROZEN_RHO: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
pub const FROZEN_CAPACITY: [(usize, [f64; 5]); 3] = [
    (
        2,
        [0.08473096, 0.27664643, 0.39212158, 0.49880117, 0.642252],
    ),
    (
        4,
        [0.09144277, 0.35125976, 0.55329287, 0.78424315, 1.197417],
    ),
    (
        8,
        [0.09147608, 0.35482805, 0.57054854, 0.84486110, 1.531957],
    ),
];

pub fn frozen_capacity(order: usize, rho: f64) -> f64 {
    let col = FROZEN_RHO
        .iter()
        .position(|&r| r == rho)
        .expect("tabulated rho");
    FROZEN_CAPACITY
        .iter()
        .find(|(j, _)| *j == order)
        .expect("tabulated J")
        .1[col]
}

/// `J0(x) = (1/π) ∫_0^π cos(x sin t) dt` by the trapezoid rule, which
/// converges geometrically for this periodic integrand.
pub fn bessel_j0_integral(x: f64) -> f64 {
    let n = 4000;
    let h = std::f64::consts::PI / n as f64;
    let mut s = 0.5 * (1.0 + (x * (std::f64::consts::PI).sin()).cos());
    for i in 1..n {
        s += (x * (i as f64 * h).sin()).cos();
    }
    s * h / std::f64::consts::PI
}

/// Gaussian elimination with partial pivoting on a dense complex system.
pub fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::default(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Wiener predictor for lags `lags` from correlation function `r`, with
/// observation noise variance `noise`: returns coefficients and `1 - rᴴc`.
pub fn wiener(r: impl Fn(i64) -> Complex64, lags: &[usize], noise: f64) -> (Vec<Complex64>, f64) {
    let a: Vec<Vec<Complex64>> = lags
        .iter()
        .enumerate()
        .map(|(i, &di)| {
            lags.iter()
                .enumerate()
                .map(|(j, &dj)| {
                    r(di as i64 - dj as i64)
                        + if i == j {
                            Complex64::new(noise, 0.0)
                        } else {
                            Complex64::default()
                        }
                })
                .collect()
        })
        .collect();
    let cross: Vec<Complex64> = lags.iter().map(|&d| r(d as i64)).collect();
    let c = dense_solve(a, cross.clone());
    let explained: f64 = cross.iter().zip(&c).map(|(r, c)| (r.conj() * c).re).sum();
    (c, 1.0 - explained)
}

pub fn ar1_correlation(alpha: f64) -> impl Fn(i64) -> Complex64 {
    move |lag| Complex64::new(alpha.powi(lag.unsigned_abs() as i32), 0.0)
}

/// Sample mean and unbiased variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var)
}
