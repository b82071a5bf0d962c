//! Gauss rules used to discretize densities into atoms.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine map of a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| half * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule with `n` nodes on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Generalized Gauss–Laguerre rule for the weight `x^alpha e^{-x}` on
/// `[0, ∞)`, `alpha > -1`.
///
/// Golub–Welsch eigenvalues seed a Newton polish on the three-term recurrence;
/// weights come from the derivative formula in log space so that the tiny
/// weights of far nodes keep full relative accuracy.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Rule {
    assert!(n >= 1 && alpha > -1.0);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jacobi[(k, k)] = 2.0 * kf + 1.0 + alpha;
        if k + 1 < n {
            let off = ((kf + 1.0) * (kf + 1.0 + alpha)).sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    guesses.sort_by(f64::total_cmp);

    let log_norm = ln_gamma(alpha + n as f64) - ln_gamma(n as f64);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &guess in &guesses {
        let mut z = guess.max(f64::MIN_POSITIVE);
        for _ in 0..60 {
            let (p, _, dp) = laguerre_eval(n, alpha, z);
            let dz = p / dp;
            let next = z - dz;
            z = if next > 0.0 { next } else { 0.5 * z };
            if dz.abs() <= 1e-15 * z.max(1.0) {
                break;
            }
        }
        let (_, p_prev, dp) = laguerre_eval(n, alpha, z);
        // |w| = Γ(n+α) / (Γ(n) · n · |L_{n-1} · L_n'|)
        let denom = (n as f64) * p_prev * dp;
        nodes.push(z);
        weights.push((log_norm - denom.abs().ln()).exp());
    }
    Rule { nodes, weights }
}

/// `(L_n^α(x), L_{n-1}^α(x), d/dx L_n^α(x))`.
fn laguerre_eval(n: usize, alpha: f64, x: f64) -> (f64, f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = ((2.0 * jf + 1.0 + alpha - x) * p2 - (jf + alpha) * p3) / (jf + 1.0);
    }
    let nf = n as f64;
    let dp = (nf * p1 - (nf + alpha) * p2) / x;
    (p1, p2, dp)
}
