//! Closed-form ridge regression via Cholesky factorization.

use crate::error::{Error, Result};

/// Dense row-major design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "design {rows}x{cols} with {} entries",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged design rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// In-place Cholesky of a symmetric matrix; returns the lower factor.
fn cholesky(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tol = scale.max(1.0) * 1e-12;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= tol {
            return Err(Error::Singular(format!(
                "normal equations are not positive definite (pivot {j} = {d:.3e})"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(a)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    z
}

/// `w = (X^T X + lambda I)^-1 X^T y`, every column penalized.
pub fn train_ridge(x: &Design, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    train_ridge_with_unpenalized(x, y, lambda, &[])
}

/// Ridge solve where the listed columns (e.g. a bias) carry no penalty.
pub fn train_ridge_with_unpenalized(
    x: &Design,
    y: &[f64],
    lambda: f64,
    unpenalized: &[usize],
) -> Result<Vec<f64>> {
    if y.len() != x.rows {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} rows",
            y.len(),
            x.rows
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if x.data.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ridge inputs".into()));
    }
    let d = x.cols;
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for i in 0..x.rows {
        let row = x.row(i);
        for a in 0..d {
            rhs[a] += row[a] * y[i];
            for b in 0..=a {
                gram[a * d + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[b * d + a] = gram[a * d + b];
        }
        if !unpenalized.contains(&a) {
            gram[a * d + a] += lambda;
        }
    }
    let l = cholesky(gram, d)?;
    Ok(cholesky_solve(&l, d, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_design() {
        let y = [3.0, -1.0, 0.5, 7.0];
        let x = Design::identity(4);
        let w = train_ridge(&x, &y, 0.0).unwrap();
        for (a, b) in w.iter().zip(y) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = train_ridge(&x, &y, 1.0).unwrap();
        for (a, b) in w.iter().zip(y) {
            assert!((a - b / 2.0).abs() < 1e-12);
        }
        let w = train_ridge_with_unpenalized(&x, &y, 1.0, &[3]).unwrap();
        assert!((w[3] - 7.0).abs() < 1e-12);
        assert!((w[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_and_non_finite() {
        let x = Design::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        assert!(matches!(train_ridge(&x, &[1.0, 2.0, 3.0], 0.0), Err(Error::Singular(_))));
        assert!(train_ridge(&x, &[1.0, 2.0, 3.0], 0.1).is_ok());
        assert!(matches!(
            train_ridge(&x, &[1.0, f64::NAN, 3.0], 0.1),
            Err(Error::NonFinite(_))
        ));
        assert!(train_ridge(&x, &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn square_nonsingular_interpolates() {
        let x = Design::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]).unwrap();
        let y = [1.0, 2.0, 3.0];
        let w = train_ridge(&x, &y, 0.0).unwrap();
        for (p, t) in x.matvec(&w).iter().zip(y) {
            assert!((p - t).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_shrink_with_lambda() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin(), (t * 0.11).cos(), t / 30.0, ((t * 1.7).sin() * 3.0).tanh()]
            })
            .collect();
        let x = Design::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - r[1] + 0.5 * r[2] + 0.1).collect();
        let norms: Vec<f64> = [0.0, 0.1, 1.0, 10.0]
            .iter()
            .map(|&l| train_ridge(&x, &y, l).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        assert!(norms.windows(2).all(|p| p[1] < p[0]), "{norms:?}");
    }
}
