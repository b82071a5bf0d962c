//! Nonnegative least squares by the Lawson–Hanson active-set method.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `‖A x − b‖₂`.
    pub residual: f64,
    pub iterations: usize,
}

/// Minimizes `‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> NnlsSolution {
    let (m, n) = a.shape();
    assert_eq!(
        b.len(),
        m,
        "right-hand side length must match the row count"
    );
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())) * b.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale * (m.max(n) as f64);
    let max_outer = 3 * n + 10;
    let mut iterations = 0;

    while iterations < max_outer {
        let grad = a.tr_mul(&(b - a * &x));
        let candidate = (0..n)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(t) = candidate else { break };
        iterations += 1;
        passive[t] = true;

        let mut first_pass = true;
        loop {
            let z = solve_passive(a, b, &passive);
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            if first_pass && z[t] <= 0.0 {
                // The gradient test admitted `t` at rounding level only.
                passive[t] = false;
                return finish(a, b, x, iterations);
            }
            first_pass = false;
            let mut alpha = f64::INFINITY;
            let mut blocking = usize::MAX;
            for j in (0..n).filter(|&j| passive[j] && z[j] <= 0.0) {
                let ratio = x[j] / (x[j] - z[j]);
                if ratio < alpha {
                    alpha = ratio;
                    blocking = j;
                }
            }
            x += (z - &x) * alpha;
            x[blocking] = 0.0;
            for j in 0..n {
                if passive[j] && x[j] <= 0.0 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    finish(a, b, x, iterations)
}

fn finish(a: &DMatrix<f64>, b: &DVector<f64>, x: DVector<f64>, iterations: usize) -> NnlsSolution {
    let residual = (a * &x - b).norm();
    NnlsSolution {
        x,
        residual,
        iterations,
    }
}

/// Unconstrained least squares on the passive columns, zero elsewhere.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = a.select_columns(&cols);
    let z_sub = if cols.len() <= a.nrows() {
        let qr = sub.clone().qr();
        let rhs = qr.q().tr_mul(b);
        qr.r()
            .solve_upper_triangular(&rhs)
            .filter(|z| z.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| svd_solve(sub, b))
    } else {
        svd_solve(sub, b)
    };
    let mut z = DVector::zeros(passive.len());
    for (k, &j) in cols.iter().enumerate() {
        z[j] = z_sub[k];
    }
    z
}

fn svd_solve(sub: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = sub.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-15;
    svd.solve(b, cutoff).expect("both factors were requested")
}
