#![allow(dead_code)]

use std::f64::consts::PI;

/// Gauss–Hermite nodes and weights for `int e^{-x^2} g(x) dx`, by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0_f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// `E[g(B_T)]` for a standard Brownian motion.
pub fn gaussian_expectation(g: impl Fn(f64) -> f64, horizon: f64) -> f64 {
    let (x, w) = gauss_hermite(80);
    let scale = (2.0 * horizon).sqrt();
    x.iter().zip(&w).map(|(xi, wi)| wi * g(scale * xi)).sum::<f64>() / PI.sqrt()
}

/// `gamma^{-1} ln E[exp(gamma h(B_T))]`, the value at `0` of the solution with
/// driver `gamma |z|^2 / 2`.
pub fn cole_hopf_value(h: impl Fn(f64) -> f64, gamma: f64, horizon: f64) -> f64 {
    gaussian_expectation(|x| (gamma * h(x)).exp(), horizon).ln() / gamma
}

pub fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
