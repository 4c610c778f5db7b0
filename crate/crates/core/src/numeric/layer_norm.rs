//! Layer normalization over a single vector, with an analytic backward pass.
//!
//! Variance is the biased (divide-by-k) estimate.

use crate::numeric::Matrix;

pub const LN_EPS: f64 = 1e-5;

/// Intermediates required by [`layer_norm_backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormCache {
    pub mean: f64,
    pub inv_std: f64,
    /// `(x - mean) * inv_std`
    pub normalized: Vec<f64>,
    gain: Vec<f64>,
}

pub fn layer_norm_forward(
    x: &[f64],
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> (Vec<f64>, LayerNormCache) {
    let k = x.len();
    assert!(k >= 1 && gain.len() == k && bias.len() == k);
    assert!(eps > 0.0);
    let n = k as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    let normalized: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y = normalized
        .iter()
        .zip(gain)
        .zip(bias)
        .map(|((z, g), b)| g * z + b)
        .collect();
    (
        y,
        LayerNormCache {
            mean,
            inv_std,
            normalized,
            gain: gain.to_vec(),
        },
    )
}

/// Returns `(dx, dgain, dbias)`.
pub fn layer_norm_backward(cache: &LayerNormCache, dy: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = dy.len();
    assert_eq!(k, cache.normalized.len());
    let n = k as f64;
    let dbias = dy.to_vec();
    let dgain: Vec<f64> = dy.iter().zip(&cache.normalized).map(|(d, z)| d * z).collect();
    let dz: Vec<f64> = dy.iter().zip(&cache.gain).map(|(d, g)| d * g).collect();
    let mean_dz = dz.iter().sum::<f64>() / n;
    let mean_dz_z = dz
        .iter()
        .zip(&cache.normalized)
        .map(|(d, z)| d * z)
        .sum::<f64>()
        / n;
    let dx = dz
        .iter()
        .zip(&cache.normalized)
        .map(|(d, z)| cache.inv_std * (d - mean_dz - z * mean_dz_z))
        .collect();
    (dx, dgain, dbias)
}

/// Normalizes every row of `x` independently with shared `gain`/`bias`.
pub fn layer_norm_rows(
    x: &Matrix,
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> (Matrix, Vec<LayerNormCache>) {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    let mut caches = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let (y, cache) = layer_norm_forward(x.row(r), gain, bias, eps);
        out.row_mut(r).copy_from_slice(&y);
        caches.push(cache);
    }
    (out, caches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    #[test]
    fn constant_input_maps_to_zero() {
        let (y, _) = layer_norm_forward(&[3.0; 5], &[1.0; 5], &[0.0; 5], LN_EPS);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_variance_input_is_preserved_as_eps_vanishes() {
        let (y, _) = layer_norm_forward(&[1.0, -1.0], &[1.0; 2], &[0.0; 2], 1e-300);
        assert_eq!(y, vec![1.0, -1.0]);
    }

    #[test]
    fn normalized_output_has_zero_mean_unit_variance() {
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let k = 16;
            let x: Vec<f64> = (0..k).map(|_| rng.normal(0.0, 1.0)).collect();
            let (y, _) = layer_norm_forward(&x, &vec![1.0; k], &vec![0.0; k], LN_EPS);
            let mean = y.iter().sum::<f64>() / k as f64;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
            assert!(mean.abs() < 1e-10);
            // eps shrinks the output variance to var/(var+eps), about 1 - 1e-5 for unit-scale x
            let x_mean = x.iter().sum::<f64>() / k as f64;
            let x_var = x.iter().map(|v| (v - x_mean).powi(2)).sum::<f64>() / k as f64;
            let expect = x_var / (x_var + LN_EPS);
            assert!((var - expect).abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4 * (1.0 / x_var).max(1.0));
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let (_, cache) = layer_norm_forward(&[0.3, -1.2, 2.0], &[1.5, 0.5, 1.0], &[0.0; 3], LN_EPS);
        let (dx, dg, db) = layer_norm_backward(&cache, &[0.0; 3]);
        assert!(dx.iter().chain(&dg).chain(&db).all(|v| *v == 0.0));
    }

    #[test]
    fn two_dimensional_hand_case() {
        // For k = 2, z = ±(x1 - x2) / sqrt((x1 - x2)^2 + 4 eps) identically, so
        // dz1/dx1 = 4 eps / ((x1-x2)^2 + 4 eps)^{3/2}, dz1/dx2 = -dz1/dx1.
        let (x1, x2, eps): (f64, f64, f64) = (2.0, 0.5, 0.1);
        let d = x1 - x2;
        let s = d * d + 4.0 * eps;
        let j = 4.0 * eps / s.powf(1.5);
        let (y, cache) = layer_norm_forward(&[x1, x2], &[1.0, 1.0], &[0.0, 0.0], eps);
        assert!((y[0] - d / s.sqrt()).abs() < 1e-15);
        assert!((y[1] + d / s.sqrt()).abs() < 1e-15);
        // dy = (1, 0) -> dx = (dz1/dx1, dz1/dx2)
        let (dx, dg, db) = layer_norm_backward(&cache, &[1.0, 0.0]);
        assert!((dx[0] - j).abs() < 1e-14, "{} vs {}", dx[0], j);
        assert!((dx[1] + j).abs() < 1e-14);
        assert!((dg[0] - y[0]).abs() < 1e-15);
        assert_eq!(dg[1], 0.0);
        assert_eq!(db, vec![1.0, 0.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(9);
        let k = 16;
        let h = 1e-5;
        for _ in 0..5 {
            let x: Vec<f64> = (0..k).map(|_| rng.normal(0.0, 1.0)).collect();
            let gain: Vec<f64> = (0..k).map(|_| rng.uniform(0.5, 1.5)).collect();
            let bias: Vec<f64> = (0..k).map(|_| rng.uniform(-0.5, 0.5)).collect();
            let w: Vec<f64> = (0..k).map(|_| rng.normal(0.0, 1.0)).collect();
            let objective = |x: &[f64], g: &[f64], b: &[f64]| -> f64 {
                let (y, _) = layer_norm_forward(x, g, b, LN_EPS);
                y.iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = layer_norm_forward(&x, &gain, &bias, LN_EPS);
            let (dx, dg, db) = layer_norm_backward(&cache, &w);

            let check = |an: f64, fd: f64| {
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-6, "analytic {an} vs fd {fd} (rel {rel})");
            };
            for i in 0..k {
                let mut p = x.clone();
                p[i] += h;
                let mut m = x.clone();
                m[i] -= h;
                check(dx[i], (objective(&p, &gain, &bias) - objective(&m, &gain, &bias)) / (2.0 * h));

                let mut p = gain.clone();
                p[i] += h;
                let mut m = gain.clone();
                m[i] -= h;
                check(dg[i], (objective(&x, &p, &bias) - objective(&x, &m, &bias)) / (2.0 * h));

                let mut p = bias.clone();
                p[i] += h;
                let mut m = bias.clone();
                m[i] -= h;
                check(db[i], (objective(&x, &gain, &p) - objective(&x, &gain, &m)) / (2.0 * h));
            }
        }
    }
}
