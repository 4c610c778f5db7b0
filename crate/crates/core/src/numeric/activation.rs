use crate::error::{Error, Result};
use crate::numeric::Matrix;

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Elementwise `max(0, x)`.
pub fn relu_forward(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    out.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
    out
}

/// Masks `dy` wherever `x <= 0`; the subgradient at exactly zero is 0.
pub fn relu_backward(x: &Matrix, dy: &Matrix) -> Result<Matrix> {
    if x.shape() != dy.shape() {
        return Err(Error::Shape {
            op: "relu_backward",
            left: x.shape(),
            right: dy.shape(),
        });
    }
    let mut dx = dy.clone();
    relu_mask_in_place(x.as_slice(), dx.as_mut_slice());
    Ok(dx)
}

/// Slice form of [`relu_backward`], overwriting `grad`.
#[inline]
pub fn relu_mask_in_place(pre: &[f64], grad: &mut [f64]) {
    for (g, &x) in grad.iter_mut().zip(pre) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Logistic function, using the branch that never exponentiates a positive number.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;

    #[test]
    fn relu_clamps_negatives() {
        let x = Matrix::row_vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu_forward(&x).as_slice(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_backward_at_zero_is_zero() {
        let x = Matrix::row_vector(vec![0.0, 1.0]);
        let dy = Matrix::row_vector(vec![5.0, 5.0]);
        assert_eq!(relu_backward(&x, &dy).unwrap().as_slice(), &[0.0, 5.0]);
    }

    #[test]
    fn relu_backward_rejects_shape_mismatch() {
        let x = Matrix::zeros(1, 2);
        let dy = Matrix::zeros(2, 1);
        assert!(relu_backward(&x, &dy).is_err());
    }

    #[test]
    fn relu_backward_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let n = 32;
        // keep inputs away from the kink
        let x: Vec<f64> = (0..n)
            .map(|_| {
                let v = rng.uniform(0.05, 1.0);
                if rng.uniform(0.0, 1.0) < 0.5 {
                    -v
                } else {
                    v
                }
            })
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let xm = Matrix::row_vector(x.clone());
        let dx = relu_backward(&xm, &Matrix::row_vector(w.clone())).unwrap();
        let objective = |x: &[f64]| -> f64 { x.iter().zip(&w).map(|(a, b)| relu(*a) * b).sum() };
        let h = 1e-5;
        for i in 0..n {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xn = x.clone();
            xn[i] -= h;
            let fd = (objective(&xp) - objective(&xn)) / (2.0 * h);
            let an = dx.as_slice()[i];
            let denom = an.abs().max(fd.abs()).max(1e-12);
            assert!((an - fd).abs() / denom < 1e-6 || (an == 0.0 && fd.abs() < 1e-12));
        }
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1000.0), 1.0);
        let lo = sigmoid(-1000.0);
        assert!(!lo.is_nan());
        assert_eq!(lo, 0.0);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
    }
}
