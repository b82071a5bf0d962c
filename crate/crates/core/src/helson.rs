//! Finite sections of the Helson matrix `M(w) = (w_{mn})_{m,n ≥ 1}` and
//! sufficient conditions for its boundedness on `ℓ²`.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmono::DirichletPair;
use crate::error::{Error, Result};
use crate::logmoment::MomentSequence;

/// The `N × N` section `entries[m-1][n-1] = w_{mn}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelsonTruncation {
    pub size: usize,
    pub entries: Vec<Vec<f64>>,
}

impl HelsonTruncation {
    /// Needs `w_1, …, w_{N²}`.
    pub fn build(w: &MomentSequence, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Invalid("size must be >= 1".into()));
        }
        if w.start() != 1 {
            return Err(Error::IndexOutOfRange {
                index: 1,
                start: w.start(),
                end: w.end(),
            });
        }
        let needed = (size as u64) * (size as u64);
        if w.end() < needed {
            return Err(Error::InsufficientData {
                needed,
                available: w.end(),
            });
        }
        let v = w.values();
        let entries = (1..=size)
            .map(|m| (1..=size).map(|n| v[m * n - 1]).collect())
            .collect();
        Ok(Self { size, entries })
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[m - 1][n - 1]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.entries[i][j])
    }

    /// Largest singular value by power iteration from a seeded random start,
    /// stopped once the estimate changes by less than `1e-10` relatively.
    pub fn operator_norm(&self, iters: usize, seed: u64) -> Result<f64> {
        if iters == 0 {
            return Err(Error::Invalid("iters must be >= 1".into()));
        }
        let m = self.to_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = DVector::from_fn(self.size, |_, _| 0.5 + rng.random::<f64>());
        v.normalize_mut();
        let mut estimate = 0.0;
        for _ in 0..iters {
            let mv = &m * &v;
            let next = mv.norm();
            if next == 0.0 {
                return Ok(0.0);
            }
            v = mv / next;
            let stalled = (next - estimate).abs() <= 1e-10 * next;
            estimate = next;
            if stalled {
                break;
            }
        }
        Ok(estimate)
    }
}

/// `(N, ‖M_N‖)` for each requested section size.
pub fn norm_table(
    w: &MomentSequence,
    sizes: &[usize],
    iters: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&n| {
            Ok((
                n,
                HelsonTruncation::build(w, n)?.operator_norm(iters, seed)?,
            ))
        })
        .collect()
}

pub fn norm_table_csv(table: &[(usize, f64)]) -> String {
    let mut out = String::from("N,norm\n");
    for (n, norm) in table {
        out.push_str(&format!("{n},{norm}\n"));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessCheck {
    pub passed: bool,
    pub violation: Option<u64>,
}

/// `w_n ≤ C / (√n log n)` for every stored `n ≥ 2`.
pub fn boundedness_criterion(w: &MomentSequence, c: f64) -> BoundednessCheck {
    let violation = w.iter().filter(|&(n, _)| n >= 2).find_map(|(n, v)| {
        let nf = n as f64;
        (v > c / (nf.sqrt() * nf.ln())).then_some(n)
    });
    BoundednessCheck {
        passed: violation.is_none(),
        violation,
    }
}

const CM_SCAN_POINTS: usize = 20_000;

/// `x f(x) ≤ C e^{-x/2}` for all `x ≥ 0`, where `f` is the generator of a
/// pair with `w_1 = f(0)`.
///
/// `x f(x) e^{x/2} = Σ w_i x e^{-(s_i - 1/2)x}` is unbounded as soon as an
/// atom sits at `s_i ≤ 1/2`. Otherwise every term decreases beyond
/// `1/(s_i - 1/2)`, so the supremum is attained on `[0, max_i 1/(s_i - 1/2)]`,
/// which is scanned densely.
pub fn cm_criterion(pair: &DirichletPair, c: f64) -> Result<bool> {
    if pair.sequence.start() != 1 {
        return Err(Error::Invalid(
            "the criterion needs a sequence starting at n = 1".into(),
        ));
    }
    if pair.atom != 0.0 {
        return Err(Error::Invalid(format!(
            "pair carries an atom {} at n = 1",
            pair.atom
        )));
    }
    let atoms = pair.rep_measure.atoms();
    if atoms.iter().any(|&(s, _)| s <= 0.5) {
        return Ok(false);
    }
    let Some(x_max) = atoms
        .iter()
        .map(|&(s, _)| 1.0 / (s - 0.5))
        .max_by(f64::total_cmp)
    else {
        return Ok(c >= 0.0);
    };
    let g = |x: f64| -> f64 {
        atoms
            .iter()
            .map(|&(s, w)| w * x * (-(s - 0.5) * x).exp())
            .sum()
    };
    let worst = (0..=CM_SCAN_POINTS)
        .map(|i| g(x_max * i as f64 / CM_SCAN_POINTS as f64))
        .fold(0.0f64, f64::max);
    Ok(worst <= c)
}
