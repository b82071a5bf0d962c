//! Real Dirichlet polynomials `q(s) = Σ a_n n^{-s}` restricted to `s ≥ 0`.
//!
//! Besides evaluation and algebra this module hosts the nonnegativity
//! certifier used everywhere a polynomial has to be proven `≥ 0` on
//! `[0, ∞)`: a tail cutoff derived from the leading (smallest-index)
//! coefficient, followed by an adaptive grid on `[0, S]` with first and
//! second order cell bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};

/// Default tolerance for [`certify_nonnegative`].
pub const DEFAULT_CERT_TOL: f64 = 1e-9;

/// Finite real combination of `n^{-s}`, stored sparsely by index.
///
/// Indices are `≥ 1` and no zero coefficient is ever stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolynomial", into = "RawPolynomial")]
pub struct DirichletPolynomial {
    coeffs: BTreeMap<u64, f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPolynomial {
    coeffs: BTreeMap<u64, f64>,
}

impl TryFrom<RawPolynomial> for DirichletPolynomial {
    type Error = Error;

    fn try_from(raw: RawPolynomial) -> Result<Self> {
        Self::new(raw.coeffs)
    }
}

impl From<DirichletPolynomial> for RawPolynomial {
    fn from(q: DirichletPolynomial) -> Self {
        RawPolynomial { coeffs: q.coeffs }
    }
}

impl DirichletPolynomial {
    /// Builds a polynomial from `(index, coefficient)` pairs. Repeated indices
    /// are summed; zero coefficients are dropped.
    pub fn new<I: IntoIterator<Item = (u64, f64)>>(terms: I) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (n, a) in terms {
            if n == 0 {
                return Err(Error::Invalid("Dirichlet index must be >= 1".into()));
            }
            require_finite("coefficient", a)?;
            *coeffs.entry(n).or_insert(0.0) += a;
        }
        coeffs.retain(|_, a| *a != 0.0);
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(1, c)
    }

    /// `a · n^{-s}`.
    pub fn monomial(n: u64, a: f64) -> Self {
        assert!(n >= 1, "Dirichlet index must be >= 1");
        let mut coeffs = BTreeMap::new();
        if a != 0.0 {
            coeffs.insert(n, a);
        }
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficient(&self, n: u64) -> f64 {
        self.coeffs.get(&n).copied().unwrap_or(0.0)
    }

    /// Terms in increasing index order.
    pub fn terms(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.coeffs.iter().map(|(&n, &a)| (n, a))
    }

    pub fn min_index(&self) -> Option<u64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_index(&self) -> Option<u64> {
        self.coeffs.keys().next_back().copied()
    }

    /// `Σ |a_n|`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|a| a.abs()).sum()
    }

    /// `q(s)` for `s ≥ 0`, summed in increasing index order.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain {
                name: "s",
                value: s,
                expected: "s >= 0",
            });
        }
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        self.terms()
            .map(|(n, a)| {
                if n == 1 {
                    a
                } else {
                    a * (-s * (n as f64).ln()).exp()
                }
            })
            .sum()
    }

    /// `lim_{s→∞} q(s)`, i.e. the coefficient of `1^{-s}`.
    pub fn limit_at_infinity(&self) -> f64 {
        self.coefficient(1)
    }

    /// Global Lipschitz constant on `[0, ∞)`: `Σ_{n≥2} |a_n| log n`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.local_derivative_bounds(0.0).0
    }

    /// Bounds on `|q'|` and `|q''|` over `[x, ∞)`.
    fn local_derivative_bounds(&self, x: f64) -> (f64, f64) {
        let mut first = 0.0;
        let mut second = 0.0;
        for (n, a) in self.terms().filter(|&(n, _)| n >= 2) {
            let ln = (n as f64).ln();
            let w = a.abs() * (-x * ln).exp();
            first += w * ln;
            second += w * ln * ln;
        }
        (first, second)
    }

    /// The function `q_p` on `[0, 1]` with `q = q_p ∘ ψ`, `ψ(s) = e^{-s}`.
    pub fn pullback(&self) -> Pullback {
        Pullback { poly: self.clone() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.terms().map(|(n, a)| (n, c * a))).expect("finite scaling")
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.terms().chain(other.terms())).expect("finite sum")
    }

    /// Product in `D[s]`: `n^{-s} · m^{-s} = (nm)^{-s}`, indices multiplied exactly.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for (n, a) in self.terms() {
            for (m, b) in other.terms() {
                let nm = n
                    .checked_mul(m)
                    .ok_or_else(|| Error::Invalid(format!("index product {n}*{m} overflows")))?;
                terms.push((nm, a * b));
            }
        }
        Self::new(terms)
    }

    pub fn square(&self) -> Result<Self> {
        self.mul(self)
    }

    /// Multiplication by `k^{-s}`.
    pub fn shifted(&self, k: u64) -> Result<Self> {
        self.mul(&Self::monomial(k, 1.0))
    }
}

/// `q_p(t) = Σ a_n t^{log n}` on `[0, 1]`, with `q_p(0) = lim_{s→∞} q(s)`.
#[derive(Clone, Debug)]
pub struct Pullback {
    poly: DirichletPolynomial,
}

impl Pullback {
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain {
                name: "t",
                value: t,
                expected: "0 <= t <= 1",
            });
        }
        if t == 0.0 {
            return Ok(self.poly.limit_at_infinity());
        }
        let lt = t.ln();
        Ok(self
            .poly
            .terms()
            .map(|(n, a)| {
                if n == 1 {
                    a
                } else {
                    a * ((n as f64).ln() * lt).exp()
                }
            })
            .sum())
    }
}

/// Proof that `q(s) ≥ margin ≥ -tol` on all of `[0, ∞)`.
///
/// On `[grid_max, ∞)` the sign is controlled by the coefficient at
/// `tail_sign_index`; on `[0, grid_max]` every grid cell carries a lower bound
/// from the Lipschitz or the curvature estimate, and `margin` is the smallest
/// of these (and of the tail floor).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub grid_max: f64,
    pub grid_step: f64,
    pub lipschitz_bound: f64,
    pub curvature_bound: f64,
    pub min_grid_value: f64,
    pub margin: f64,
    pub tail_sign_index: Option<u64>,
    pub cells: usize,
    pub min_cell_width: f64,
    pub tol: f64,
}

impl PositivityCertificate {
    pub fn is_valid(&self) -> bool {
        self.margin >= -self.tol
    }
}

/// A point where `q(s) < -tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureWitness {
    pub s: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Certification {
    Certified(PositivityCertificate),
    Witness(FailureWitness),
    /// Subdivision bottomed out on a cell whose lower bound stays below `-tol`
    /// while every sampled value is above it.
    Undecided {
        s: f64,
        lower_bound: f64,
    },
}

impl Certification {
    pub fn certificate(&self) -> Option<&PositivityCertificate> {
        match self {
            Certification::Certified(c) => Some(c),
            _ => None,
        }
    }
}

const MAX_BASE_CELLS: f64 = 2.0e6;
const MAX_DEPTH: u32 = 48;
const TAIL_SLACK: f64 = 1e-6;

/// Certifies `q(s) ≥ -tol` on `[0, ∞)` or finds a point where it fails.
pub fn certify_nonnegative(
    q: &DirichletPolynomial,
    grid_step: f64,
    tol: f64,
) -> Result<Certification> {
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(Error::Domain {
            name: "grid_step",
            value: grid_step,
            expected: "h > 0",
        });
    }
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::Domain {
            name: "tol",
            value: tol,
            expected: "tol >= 0",
        });
    }
    let (lipschitz, curvature) = q.local_derivative_bounds(0.0);
    let Some(m) = q.min_index() else {
        return Ok(Certification::Certified(PositivityCertificate {
            grid_max: 0.0,
            grid_step,
            lipschitz_bound: 0.0,
            curvature_bound: 0.0,
            min_grid_value: 0.0,
            margin: 0.0,
            tail_sign_index: None,
            cells: 0,
            min_cell_width: 0.0,
            tol,
        }));
    };
    let lead = q.coefficient(m);
    let rest: f64 = q.terms().skip(1).map(|(_, a)| a.abs()).sum();
    let next = q.terms().nth(1).map(|(n, _)| n);
    let eval_err = 8.0 * f64::EPSILON * q.l1_norm();

    let tail = TailBound {
        m,
        lead,
        rest,
        next,
    };
    let grid_max = match tail.cutoff(tol) {
        Some(s) => s,
        None => {
            let s = tail.negative_point(tol);
            let value = q.eval_unchecked(s);
            if value < -tol {
                return Ok(Certification::Witness(FailureWitness { s, value }));
            }
            // The analytic point was not negative enough; fall back to a scan.
            let mut best = FailureWitness { s, value };
            let mut x = 0.0;
            while x <= 4.0 * s.max(1.0) {
                let v = q.eval_unchecked(x);
                if v < best.value {
                    best = FailureWitness { s: x, value: v };
                }
                x += grid_step;
            }
            if best.value < -tol {
                return Ok(Certification::Witness(best));
            }
            return Ok(Certification::Undecided {
                s: best.s,
                lower_bound: best.value,
            });
        }
    };

    let cells = if grid_max == 0.0 {
        0
    } else {
        (grid_max / grid_step).ceil().clamp(1.0, MAX_BASE_CELLS) as usize
    };
    let step = if cells == 0 {
        grid_step
    } else {
        grid_max / cells as f64
    };
    let nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * step).collect();
    let values: Vec<f64> = nodes.iter().map(|&x| q.eval_unchecked(x)).collect();

    let (argmin, &min_grid_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid has at least one node");
    if min_grid_value < -tol {
        return Ok(Certification::Witness(FailureWitness {
            s: nodes[argmin],
            value: min_grid_value,
        }));
    }

    let mut margin = tail.floor(grid_max).min(min_grid_value - eval_err);
    let mut processed = 0usize;
    let mut min_width = if cells == 0 { 0.0 } else { step };
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::new();
    for i in 0..cells {
        stack.push((nodes[i], nodes[i + 1], values[i], values[i + 1], 0));
        while let Some((x0, x1, v0, v1, depth)) = stack.pop() {
            let width = x1 - x0;
            let (lip, curv) = q.local_derivative_bounds(x0);
            let first_order = 0.5 * (v0 + v1) - 0.5 * lip * width;
            let second_order = v0.min(v1) - 0.125 * curv * width * width;
            let lower = first_order.max(second_order) - eval_err;
            if lower >= -tol {
                processed += 1;
                margin = margin.min(lower);
                min_width = min_width.min(width);
                continue;
            }
            if depth >= MAX_DEPTH || width <= 1e-13 * (1.0 + x0) {
                return Ok(Certification::Undecided {
                    s: x0,
                    lower_bound: lower,
                });
            }
            let mid = 0.5 * (x0 + x1);
            let vm = q.eval_unchecked(mid);
            if vm < -tol {
                return Ok(Certification::Witness(FailureWitness { s: mid, value: vm }));
            }
            stack.push((mid, x1, vm, v1, depth + 1));
            stack.push((x0, mid, v0, vm, depth + 1));
        }
    }

    Ok(Certification::Certified(PositivityCertificate {
        grid_max,
        grid_step: step,
        lipschitz_bound: lipschitz,
        curvature_bound: curvature,
        min_grid_value,
        margin,
        tail_sign_index: Some(m),
        cells: processed,
        min_cell_width: min_width,
        tol,
    }))
}

/// `q(s) ≥ a_m m^{-s} − B m'^{-s}` with `m` the smallest index, `m'` the next
/// one and `B` the l1 norm of the remaining coefficients.
struct TailBound {
    m: u64,
    lead: f64,
    rest: f64,
    next: Option<u64>,
}

impl TailBound {
    fn ratio_log(&self) -> f64 {
        let next = self.next.expect("ratio needs a second term");
        (next as f64 / self.m as f64).ln()
    }

    /// Lower bound of `q` on `[x, ∞)`.
    fn floor(&self, x: f64) -> f64 {
        let m_pow = (-x * (self.m as f64).ln()).exp();
        let bracket = match self.next {
            Some(_) => self.lead - self.rest * (-x * self.ratio_log()).exp(),
            None => self.lead,
        };
        (m_pow * bracket).min(0.0)
    }

    /// Smallest convenient `S` with `floor(S) ≥ -tol`, if one exists.
    fn cutoff(&self, tol: f64) -> Option<f64> {
        if self.next.is_none() {
            // Single term: monotone in s, the worst value is at s = 0 or s = ∞.
            return if self.lead >= 0.0 || self.m >= 2 || self.lead >= -tol {
                Some(0.0)
            } else {
                None
            };
        }
        if self.lead > 0.0 {
            let s = (self.rest / (self.lead * (1.0 - TAIL_SLACK))).ln() / self.ratio_log();
            return Some(s.max(0.0));
        }
        let s = if self.m == 1 {
            let room = tol - self.lead.abs();
            if room <= 0.0 {
                return None;
            }
            (self.rest / room).ln() / (self.next.unwrap() as f64).ln()
        } else {
            if tol <= 0.0 {
                return None;
            }
            ((self.lead.abs() + self.rest) / tol).ln() / (self.m as f64).ln()
        };
        let s = s.max(0.0);
        // Guard against rounding in the closed form.
        Some(if self.floor(s) >= -tol {
            s
        } else {
            s * (1.0 + 1e-9) + 1e-9
        })
    }

    /// A point where `q` is provably negative when no cutoff exists.
    fn negative_point(&self, tol: f64) -> f64 {
        let Some(_) = self.next else { return 0.0 };
        let gap = if self.m == 1 {
            0.5 * (self.lead.abs() - tol)
        } else {
            0.5 * self.lead.abs()
        };
        if gap <= 0.0 || self.rest == 0.0 {
            return 0.0;
        }
        ((self.rest / gap).ln() / self.ratio_log()).max(0.0)
    }
}
