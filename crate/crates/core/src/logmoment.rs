//! Deciding whether a finite prefix `w_j, …, w_N` extends to a Hausdorff
//! log-moment sequence.
//!
//! Necessary conditions (monotonicity, positive semidefinite multiplicative
//! Hankel minors, completely monotone power subsequences) can reject;
//! a nonnegative least-squares fit of `c·[n = 1] + ∫ n^{-s} ν(ds)` can accept;
//! a certified nonnegative Dirichlet polynomial on which the functional
//! `L_w(n^{-s}) = w_n` is negative rejects as well. Anything else is
//! inconclusive: finitely many values never pin down an infinite sequence.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cmono::{check_grid, is_cm_sequence};
use crate::dirichlet::{
    certify_nonnegative, Certification, DirichletPolynomial, PositivityCertificate,
};
use crate::error::{require_finite, Error, Result};
use crate::fit::{default_grid, fit_minimal, FitGoal};
use crate::measure::{Domain, GridMeasure, Measure};

/// Relative slack of the monotonicity test.
pub const MONOTONE_REL_TOL: f64 = 1e-12;
/// Relative slack of the eigenvalue test, `λ_min ≥ -PSD_REL_TOL·‖M‖`.
pub const PSD_REL_TOL: f64 = 1e-10;
/// Relative slack of the finite-difference test.
pub const CM_REL_TOL: f64 = 1e-12;

/// The prefix `w_j, …, w_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct MomentSequence {
    start: u64,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    start: u64,
    values: Vec<f64>,
}

impl TryFrom<RawSequence> for MomentSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        MomentSequence::new(raw.start, raw.values)
    }
}

impl From<MomentSequence> for RawSequence {
    fn from(w: MomentSequence) -> Self {
        RawSequence {
            start: w.start,
            values: w.values,
        }
    }
}

impl MomentSequence {
    pub fn new(start: u64, values: Vec<f64>) -> Result<Self> {
        if start == 0 {
            return Err(Error::Invalid("start index must be >= 1".into()));
        }
        if values.is_empty() {
            return Err(Error::Invalid("sequence has no values".into()));
        }
        for &v in &values {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain {
                    name: "value",
                    value: v,
                    expected: "finite and >= 0",
                });
            }
        }
        Ok(Self { start, values })
    }

    pub fn from_fn(start: u64, end: u64, f: impl Fn(u64) -> f64) -> Result<Self> {
        if end < start {
            return Err(Error::Invalid(format!(
                "empty index range [{start}, {end}]"
            )));
        }
        Self::new(start, (start..=end).map(f).collect())
    }

    /// Log-moments of `mu` for `n = start..=end`.
    pub fn from_measure(mu: &Measure, start: u64, end: u64) -> Result<Self> {
        if end < start {
            return Err(Error::Invalid(format!(
                "empty index range [{start}, {end}]"
            )));
        }
        let values = (start..=end)
            .map(|n| mu.log_moment(n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(start, values)
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    /// Last stored index `N`.
    pub fn end(&self) -> u64 {
        self.start + self.values.len() as u64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> {
        self.start..=self.end()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.indices().zip(self.values.iter().copied())
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= self.start && n <= self.end()
    }

    pub fn get(&self, n: u64) -> Result<f64> {
        if self.contains(n) {
            Ok(self.values[(n - self.start) as usize])
        } else {
            Err(Error::IndexOutOfRange {
                index: n,
                start: self.start,
                end: self.end(),
            })
        }
    }

    fn at(&self, n: u64) -> f64 {
        self.values[(n - self.start) as usize]
    }
}

/// `L_w(q) = Σ a_n w_n`.
pub fn functional_value(w: &MomentSequence, q: &DirichletPolynomial) -> Result<f64> {
    q.terms().map(|(n, a)| Ok(a * w.get(n)?)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub passed: bool,
    /// First `n` with `w_n < w_{n+1}` beyond tolerance.
    pub violation: Option<u64>,
}

/// `w_n ≥ w_{n+1} - 1e-12·w_j` for every stored `n`.
pub fn monotone_bounded_check(w: &MomentSequence) -> MonotoneCheck {
    let slack = MONOTONE_REL_TOL * w.values[0];
    let violation = w
        .values
        .windows(2)
        .position(|p| p[0] < p[1] - slack)
        .map(|i| w.start + i as u64);
    MonotoneCheck {
        passed: violation.is_none(),
        violation,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    pub passed: bool,
    pub k: u64,
    pub indices: Vec<u64>,
    pub min_eigenvalue: f64,
    /// Unit eigenvector for `min_eigenvalue`, ordered like `indices`.
    pub eigenvector: Vec<f64>,
    pub determinant: f64,
}

/// Eigenvalue test of `M[p, q] = w_{k·p·q}` for `p, q ∈ indices`.
pub fn psd_check(w: &MomentSequence, k: u64, indices: &[u64]) -> Result<PsdCheck> {
    if k == 0 || indices.is_empty() || indices.contains(&0) {
        return Err(Error::Invalid("k and all indices must be >= 1".into()));
    }
    let size = indices.len();
    let mut m = DMatrix::zeros(size, size);
    for (a, &p) in indices.iter().enumerate() {
        for (b, &q) in indices.iter().enumerate() {
            let n = k
                .checked_mul(p)
                .and_then(|x| x.checked_mul(q))
                .ok_or_else(|| Error::Invalid("index product overflows".into()))?;
            m[(a, b)] = w.get(n)?;
        }
    }
    let determinant = m.determinant();
    let norm = m.iter().fold(0.0f64, |s, v| s.max(v.abs())) * size as f64;
    let eig = SymmetricEigen::new(m);
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty matrix");
    Ok(PsdCheck {
        passed: lmin >= -PSD_REL_TOL * norm,
        k,
        indices: indices.to_vec(),
        min_eigenvalue: lmin,
        eigenvector: eig.eigenvectors.column(imin).iter().copied().collect(),
        determinant,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCmCheck {
    pub passed: bool,
    pub k: u64,
    /// Indices `k^{m+1}` that were tested.
    pub indices: Vec<u64>,
    pub order: usize,
    /// `(order i, position)` into `indices`.
    pub violation: Option<(usize, usize)>,
}

/// Finite differences of `{w_{k^{m+1}}}` up to `max_order`, starting at the
/// first power that is stored.
pub fn power_subsequence_cm_check(
    w: &MomentSequence,
    k: u64,
    max_order: usize,
) -> Result<PowerCmCheck> {
    if k < 2 {
        return Err(Error::Invalid("k must be >= 2".into()));
    }
    let indices = stored_powers(w, k);
    if indices.len() < max_order + 1 {
        let needed = indices
            .first()
            .map_or(k, |&p| p.saturating_mul(k.saturating_pow(max_order as u32)));
        return Err(Error::InsufficientData {
            needed,
            available: w.end(),
        });
    }
    let values: Vec<f64> = indices.iter().map(|&n| w.at(n)).collect();
    let check = is_cm_sequence(&values, max_order)?;
    Ok(PowerCmCheck {
        passed: check.passed,
        k,
        indices,
        order: max_order,
        violation: check.violation,
    })
}

fn stored_powers(w: &MomentSequence, k: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = k;
    loop {
        if p > w.end() {
            break;
        }
        if p >= w.start {
            out.push(p);
        }
        match p.checked_mul(k) {
            Some(next) => p = next,
            None => break,
        }
    }
    out
}

/// `{w_{kn}}_{n ≥ 1}`, represented by `t^{log k} μ(dt)`.
pub fn shift_sequence(w: &MomentSequence, k: u64) -> Result<MomentSequence> {
    if k < w.start {
        return Err(Error::Invalid(format!(
            "shift k = {k} must be >= start index {}",
            w.start
        )));
    }
    let count = w.end() / k;
    if count == 0 {
        return Err(Error::InsufficientData {
            needed: k,
            available: w.end(),
        });
    }
    MomentSequence::from_fn(1, count, |n| w.at(k * n))
}

/// `w_n ≈ atom·[n = 1] + ∫ n^{-s} measure(ds)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub atom: f64,
    pub measure: GridMeasure,
    pub residual: f64,
}

impl Recovery {
    /// `L_w` is a moment functional on `[0, ∞)` iff there is no atom at
    /// infinity (`w_1 = ν([0, ∞))`), i.e. `μ({0}) = 0`.
    pub fn k_moment_check(&self, tol: f64) -> bool {
        self.atom <= tol
    }

    /// Representing measure on the unit interval (`ψ_*ν + atom·δ_0`).
    pub fn unit_interval_measure(&self) -> Result<GridMeasure> {
        let body = self.measure.pushforward_psi()?;
        GridMeasure::unit_interval(body.atoms().to_vec(), self.atom)
    }

    pub fn model(&self, n: u64) -> f64 {
        let body = self.measure.laplace_unchecked((n as f64).ln());
        if n == 1 {
            body + self.atom
        } else {
            body
        }
    }
}

pub fn k_moment_check(recovered: &Recovery, tol: f64) -> bool {
    recovered.k_moment_check(tol)
}

/// Nonnegative least squares for `(c, ν)` over the kernel `n^{-s}`, `s ∈
/// s_grid`; the `[n = 1]` column is used only when the sequence starts at 1.
/// Atoms may slide off the grid during refinement, and a solution without
/// the `[n = 1]` column is preferred when its residual is within `tol`.
pub fn recover_measure(w: &MomentSequence, s_grid: &[f64], tol: f64) -> Result<Recovery> {
    check_grid(s_grid)?;
    let indices: Vec<u64> = w.indices().collect();
    let fit = fit_minimal(
        &indices,
        &w.values,
        w.start == 1,
        s_grid,
        FitGoal::plain(tol),
    );
    Ok(Recovery {
        atom: fit.atom,
        measure: GridMeasure::half_line(fit.atoms)?,
        residual: fit.residual,
    })
}

/// A nonnegative Dirichlet polynomial on which `L_w` is negative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub q: DirichletPolynomial,
    pub positivity: PositivityCertificate,
    /// `L_w(q)`.
    pub value: f64,
}

impl DualCertificate {
    /// Re-runs the positivity proof and the functional evaluation.
    pub fn verify(&self, w: &MomentSequence, tol: f64) -> Result<bool> {
        let value = functional_value(w, &self.q)?;
        let cert = certify_nonnegative(&self.q, self.positivity.grid_step, 0.0)?;
        Ok(value < -tol && matches!(cert, Certification::Certified(c) if c.margin >= 0.0))
    }
}

/// Base step of the positivity proofs behind dual certificates.
pub const DUAL_CERT_STEP: f64 = 0.01;

/// Tries to turn `q` into a dual certificate: a small multiple of `j^{-s}`
/// is added so that `q` is strictly positive on compacts, then nonnegativity
/// is proved with zero tolerance and `L_w(q) < -tol` is checked.
pub fn try_dual_certificate(
    w: &MomentSequence,
    q: &DirichletPolynomial,
    tol: f64,
) -> Option<DualCertificate> {
    if q.is_zero() || q.terms().any(|(n, _)| !w.contains(n)) {
        return None;
    }
    let bump = 1e-9 * q.l1_norm();
    let q = q.add(&DirichletPolynomial::monomial(w.start, bump));
    let value = functional_value(w, &q).ok()?;
    if !(value < -tol) {
        return None;
    }
    match certify_nonnegative(&q, DUAL_CERT_STEP, 0.0).ok()? {
        Certification::Certified(positivity) if positivity.margin >= 0.0 => Some(DualCertificate {
            q,
            positivity,
            value,
        }),
        _ => None,
    }
}

/// Searches for a dual certificate using indices up to `index_cap`.
///
/// Candidates are tried in order: a monotonicity violation
/// `n^{-s} - (n+1)^{-s}`, the squares `k^{-s}(Σ v_p p^{-s})²` built from
/// negative eigenvectors of the multiplicative Hankel minors, the factors
/// `k^{-(m+1)s}(1 - k^{-s})^r` behind failing finite differences, and finally
/// the optimum of a linear program that minimizes `L_w(q)` over
/// `|a_n| ≤ 1` subject to `q ≥ δ·j^{-s}` on `s_grid`. Every candidate must
/// pass [`try_dual_certificate`].
pub fn dual_certificate_search(
    w: &MomentSequence,
    s_grid: &[f64],
    index_cap: u64,
    tol: f64,
) -> Result<Option<DualCertificate>> {
    check_grid(s_grid)?;
    if index_cap < w.start {
        return Err(Error::Invalid(format!(
            "index cap {index_cap} is below the start index {}",
            w.start
        )));
    }
    let cap = index_cap.min(w.end());
    let capped = MomentSequence::new(w.start, w.values[..(cap - w.start + 1) as usize].to_vec())?;

    if let Some(n) = monotone_bounded_check(&capped).violation {
        let q = DirichletPolynomial::new([(n, 1.0), (n + 1, -1.0)])?;
        if let Some(cert) = try_dual_certificate(w, &q, tol) {
            return Ok(Some(cert));
        }
    }
    for (k, indices) in psd_battery(&capped, PSD_BATTERY_SIZE) {
        let check = psd_check(&capped, k, &indices)?;
        if check.passed {
            continue;
        }
        if let Some(cert) = psd_candidate(w, &check, tol) {
            return Ok(Some(cert));
        }
    }
    for k in [2u64, 3] {
        if let Some(cert) = power_candidate(&capped, k, DEFAULT_MAX_ORDER, tol) {
            return Ok(Some(cert));
        }
    }
    lp_candidate(&capped, s_grid, tol)
}

fn psd_candidate(w: &MomentSequence, check: &PsdCheck, tol: f64) -> Option<DualCertificate> {
    let root = DirichletPolynomial::new(
        check
            .indices
            .iter()
            .copied()
            .zip(check.eigenvector.iter().copied()),
    )
    .ok()?;
    let q = root.square().ok()?.shifted(check.k).ok()?;
    try_dual_certificate(w, &q, tol)
}

fn power_candidate(
    w: &MomentSequence,
    k: u64,
    max_order: usize,
    tol: f64,
) -> Option<DualCertificate> {
    let available = stored_powers(w, k).len();
    if available < 2 {
        return None;
    }
    let check = power_subsequence_cm_check(w, k, max_order.min(available - 1)).ok()?;
    let (order, position) = check.violation?;
    let base = check.indices[position];
    // (1 - k^{-s})^order, expanded.
    let mut factor = DirichletPolynomial::constant(1.0);
    let step = DirichletPolynomial::new([(1, 1.0), (k, -1.0)]).ok()?;
    for _ in 0..order {
        factor = factor.mul(&step).ok()?;
    }
    let q = factor.shifted(base).ok()?;
    try_dual_certificate(w, &q, tol)
}

fn lp_candidate(w: &MomentSequence, s_grid: &[f64], tol: f64) -> Result<Option<DualCertificate>> {
    let indices: Vec<u64> = w.indices().collect();
    let j = w.start as f64;
    for delta in [1e-6, 1e-4, 1e-2] {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = indices
            .iter()
            .map(|&n| {
                let lower = if n == 1 { 0.0 } else { -1.0 };
                problem.add_var(w.at(n), (lower, 1.0))
            })
            .collect();
        for &s in s_grid {
            let row: Vec<_> = vars
                .iter()
                .zip(&indices)
                .map(|(&v, &n)| (v, (-s * (n as f64).ln()).exp()))
                .collect();
            problem.add_constraint(row, ComparisonOp::Ge, delta * (-s * j.ln()).exp());
        }
        let Ok(outcome) = problem.solve() else {
            continue;
        };
        let Some(solution) = outcome.solution() else {
            continue;
        };
        if !(solution.objective() < -tol) {
            continue;
        }
        let coeffs = vars
            .iter()
            .zip(&indices)
            .map(|(&v, &n)| (n, solution.var_value(v)))
            .filter(|&(_, a)| a.abs() > 1e-12);
        let q = DirichletPolynomial::new(coeffs)?;
        if let Some(cert) = try_dual_certificate(w, &q, tol) {
            return Ok(Some(cert));
        }
    }
    Ok(None)
}

const PSD_BATTERY_SIZE: usize = 6;
pub const DEFAULT_MAX_ORDER: usize = 8;

/// The `(k, F)` pairs examined, smallest matrices first: `F` runs over
/// contiguous blocks `{f, …, f + m - 1}` with `k·f² ≥ j` and `k·(f+m-1)² ≤ N`.
pub fn psd_battery(w: &MomentSequence, max_size: usize) -> Vec<(u64, Vec<u64>)> {
    let (j, n_max) = (w.start, w.end());
    let mut out = Vec::new();
    for size in 2..=max_size as u64 {
        for k in 1..=n_max {
            let mut f = 1;
            while k * f * f < j {
                f += 1;
            }
            if k * (f + size - 1) * (f + size - 1) > n_max {
                break;
            }
            while k * (f + size - 1) * (f + size - 1) <= n_max {
                out.push((k, (f..f + size).collect()));
                f += 1;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    Rejected,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Monotonicity { n: u64, w_n: f64, w_next: f64 },
    Psd(PsdCheck),
    CompleteMonotonicity(PowerCmCheck),
    Dual(DualCertificate),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub fit: f64,
    pub monotone_rel: f64,
    pub psd_rel: f64,
    pub cm_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub verdict: Verdict,
    pub recovered: Option<Recovery>,
    /// Residual of the recovery (0 when recovery was not attempted).
    pub residual: f64,
    pub rejection_evidence: Option<Evidence>,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipConfig {
    pub tol: f64,
    pub s_grid: Vec<f64>,
    pub max_order: usize,
    pub index_cap: u64,
    pub psd_max_size: usize,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            s_grid: default_s_grid(200, 50.0),
            max_order: DEFAULT_MAX_ORDER,
            index_cap: 16,
            psd_max_size: PSD_BATTERY_SIZE,
        }
    }
}

/// `{0} ∪ logspace(1e-4, grid_max, size)`.
pub fn default_s_grid(size: usize, grid_max: f64) -> Vec<f64> {
    default_grid(size, 1e-4, grid_max)
}

/// The full decision pipeline.
pub fn membership(w: &MomentSequence, config: &MembershipConfig) -> Result<MembershipReport> {
    require_finite("tol", config.tol)?;
    let tolerances = Tolerances {
        fit: config.tol,
        monotone_rel: MONOTONE_REL_TOL,
        psd_rel: PSD_REL_TOL,
        cm_rel: CM_REL_TOL,
    };
    let rejected = |evidence: Evidence| MembershipReport {
        verdict: Verdict::Rejected,
        recovered: None,
        residual: 0.0,
        rejection_evidence: Some(evidence),
        tolerances: tolerances.clone(),
    };

    if let Some(n) = monotone_bounded_check(w).violation {
        return Ok(rejected(Evidence::Monotonicity {
            n,
            w_n: w.at(n),
            w_next: w.at(n + 1),
        }));
    }
    for (k, indices) in psd_battery(w, config.psd_max_size) {
        let check = psd_check(w, k, &indices)?;
        if !check.passed {
            return Ok(rejected(Evidence::Psd(check)));
        }
    }
    for k in [2u64, 3] {
        let available = stored_powers(w, k).len();
        if available < 2 {
            continue;
        }
        let check = power_subsequence_cm_check(w, k, config.max_order.min(available - 1))?;
        if !check.passed {
            return Ok(rejected(Evidence::CompleteMonotonicity(check)));
        }
    }

    let recovered = recover_measure(w, &config.s_grid, config.tol)?;
    let residual = recovered.residual;
    if residual <= config.tol {
        return Ok(MembershipReport {
            verdict: Verdict::Member,
            recovered: Some(recovered),
            residual,
            rejection_evidence: None,
            tolerances,
        });
    }
    let cap = config.index_cap.max(w.start);
    if let Some(cert) = dual_certificate_search(w, &config.s_grid, cap, config.tol)? {
        return Ok(MembershipReport {
            verdict: Verdict::Rejected,
            recovered: Some(recovered),
            residual,
            rejection_evidence: Some(Evidence::Dual(cert)),
            tolerances,
        });
    }
    Ok(MembershipReport {
        verdict: Verdict::Inconclusive,
        recovered: Some(recovered),
        residual,
        rejection_evidence: None,
        tolerances,
    })
}

fn same_shape(w: &MomentSequence, v: &MomentSequence) -> Result<()> {
    if w.start != v.start || w.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "[{}, {}] vs [{}, {}]",
            w.start,
            w.end(),
            v.start,
            v.end()
        )));
    }
    Ok(())
}

/// `w + v`, represented by the sum of the measures.
pub fn cone_add(w: &MomentSequence, v: &MomentSequence) -> Result<MomentSequence> {
    same_shape(w, v)?;
    MomentSequence::new(
        w.start,
        w.values.iter().zip(&v.values).map(|(a, b)| a + b).collect(),
    )
}

/// `λ·w` for `λ ≥ 0`.
pub fn cone_scale(w: &MomentSequence, lambda: f64) -> Result<MomentSequence> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            expected: "finite and >= 0",
        });
    }
    MomentSequence::new(w.start, w.values.iter().map(|a| lambda * a).collect())
}

/// `w·v`, represented by the image of the product measure under `(x, y) ↦ xy`
/// (see [`GridMeasure::product_pushforward`]).
pub fn cone_product(w: &MomentSequence, v: &MomentSequence) -> Result<MomentSequence> {
    same_shape(w, v)?;
    MomentSequence::new(
        w.start,
        w.values.iter().zip(&v.values).map(|(a, b)| a * b).collect(),
    )
}

/// A representing measure is minimal iff it has no atom at 0.
pub fn minimality_check(mu: &GridMeasure) -> Result<bool> {
    if mu.domain() != Domain::UnitInterval {
        return Err(Error::WrongDomain {
            expected: "the unit interval",
        });
    }
    Ok(mu.atom_at_zero() == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureFamily;
    use approx::assert_relative_eq;

    fn seq(start: u64, values: &[f64]) -> MomentSequence {
        MomentSequence::new(start, values.to_vec()).unwrap()
    }

    fn harmonic(n_max: u64) -> MomentSequence {
        MomentSequence::from_fn(1, n_max, |n| 1.0 / n as f64).unwrap()
    }

    fn shifted_harmonic(n_max: u64) -> MomentSequence {
        MomentSequence::from_fn(1, n_max, |n| 1.0 / (n as f64 + 1.0)).unwrap()
    }

    #[test]
    fn functional_examples() {
        let w = seq(1, &[1.0, 0.5, 1.0 / 3.0]);
        assert_eq!(
            functional_value(&w, &DirichletPolynomial::monomial(1, 1.0)).unwrap(),
            1.0
        );
        let q = DirichletPolynomial::new([(2, 2.0), (3, -3.0)]).unwrap();
        assert!(functional_value(&w, &q).unwrap().abs() < 1e-15);
        assert_eq!(
            functional_value(&w, &DirichletPolynomial::zero()).unwrap(),
            0.0
        );
        assert!(matches!(
            functional_value(&w, &DirichletPolynomial::monomial(4, 1.0)),
            Err(Error::IndexOutOfRange { index: 4, .. })
        ));
        let w2 = seq(2, &[0.5, 0.25]);
        assert!(functional_value(&w2, &DirichletPolynomial::monomial(1, 1.0)).is_err());
    }

    #[test]
    fn monotone_examples() {
        let c = monotone_bounded_check(&seq(1, &[1.0, 0.5, 0.6]));
        assert_eq!(c.violation, Some(2));
        assert!(monotone_bounded_check(&seq(1, &[1.0, 1.0, 1.0])).passed);
        assert!(monotone_bounded_check(&harmonic(30)).passed);
    }

    #[test]
    fn psd_examples() {
        let w = harmonic(64);
        assert!(psd_check(&w, 1, &[1, 2]).unwrap().passed);
        assert!(psd_check(&w, 2, &[1, 2]).unwrap().passed);
        let bad = psd_check(&shifted_harmonic(64), 1, &[1, 2]).unwrap();
        assert!(!bad.passed);
        assert_relative_eq!(bad.determinant, -1.0 / 90.0, max_relative = 1e-12);
        assert!(psd_check(&harmonic(3), 1, &[1, 2]).is_err());
    }

    #[test]
    fn power_cm_examples() {
        let alpha: f64 = 0.6;
        let w = MomentSequence::from_fn(1, 1024, |n| (alpha.ln() * (n as f64).ln()).exp()).unwrap();
        assert!(power_subsequence_cm_check(&w, 2, 9).unwrap().passed);
        let pd = MomentSequence::from_fn(1, 16, |n| 1.0 / ((n as f64).ln() + 1.0)).unwrap();
        assert!(power_subsequence_cm_check(&pd, 2, 3).unwrap().passed);
        assert!(matches!(
            power_subsequence_cm_check(&pd, 2, 4),
            Err(Error::InsufficientData { .. })
        ));
        let mut vals: Vec<f64> = (1..=8).map(|n| 1.0 / n as f64).collect();
        vals[3] = 0.9;
        let c = power_subsequence_cm_check(&seq(1, &vals), 2, 1).unwrap();
        assert!(!c.passed);
        assert_eq!(c.violation, Some((1, 0)));
    }

    #[test]
    fn shift_examples() {
        let p = 1.5;
        let w = MomentSequence::from_fn(1, 60, |n| (n as f64).powf(-p)).unwrap();
        let s = shift_sequence(&w, 3).unwrap();
        assert_eq!(s.end(), 20);
        for (n, v) in s.iter() {
            assert_relative_eq!(v, 3f64.powf(-p) * (n as f64).powf(-p), max_relative = 1e-13);
        }
        assert_eq!(shift_sequence(&w, 1).unwrap(), w);
        let mu = GridMeasure::dirac(Domain::UnitInterval, (-1.0f64).exp(), 1.0).unwrap();
        let moments = MomentSequence::from_measure(&Measure::Grid(mu.clone()), 1, 20).unwrap();
        let shifted = shift_sequence(&moments, 2).unwrap();
        let tilted = Measure::Grid(mu.tilted(2).unwrap());
        for (n, v) in shifted.iter() {
            assert_relative_eq!(v, tilted.log_moment(n).unwrap(), max_relative = 1e-13);
        }
        assert!(shift_sequence(&seq(2, &[1.0, 0.5]), 1).is_err());
    }

    #[test]
    fn recovery_examples() {
        let grid = default_s_grid(200, 50.0);
        let w =
            MomentSequence::from_fn(1, 40, |n| if n == 1 { 2.0 } else { 1.0 / n as f64 }).unwrap();
        let r = recover_measure(&w, &grid, 1e-6).unwrap();
        assert!(r.residual < 1e-6);
        assert!((r.atom - 1.0).abs() < 1e-5);
        assert!(!r.k_moment_check(1e-6));

        let chi = MomentSequence::from_fn(1, 40, |n| if n == 1 { 1.0 } else { 0.0 }).unwrap();
        let r = recover_measure(&chi, &grid, 1e-6).unwrap();
        assert!(
            (r.atom - 1.0).abs() < 1e-9 && r.measure.total_mass() < 1e-9,
            "{r:?}"
        );
        assert!(!k_moment_check(&r, 1e-6));

        let mixed = MomentSequence::from_fn(1, 40, |n| 0.3 + 0.7 * (n as f64).powi(-2)).unwrap();
        let r = recover_measure(&mixed, &grid, 1e-6).unwrap();
        assert!(r.residual < 1e-6);
        assert!(r.atom < 1e-6);
        let near = |s0: f64| {
            r.measure
                .atoms()
                .iter()
                .filter(|a| (a.0 - s0).abs() < 0.05)
                .map(|a| a.1)
                .sum::<f64>()
        };
        assert!((near(0.0) - 0.3).abs() < 1e-4 && (near(2.0) - 0.7).abs() < 1e-3);

        let r = recover_measure(&harmonic(40), &grid, 1e-6).unwrap();
        assert!(r.k_moment_check(1e-6));
    }

    #[test]
    fn decomposition_identity() {
        let grid = default_s_grid(200, 50.0);
        let w = MomentSequence::from_fn(
            1,
            64,
            |n| if n == 1 { 1.5 } else { 0.0 } + 0.5 * (n as f64).powf(-0.7),
        )
        .unwrap();
        let r = recover_measure(&w, &grid, 1e-6).unwrap();
        assert!(r.residual <= 1e-6);
        assert!((r.atom - (w.values()[0] - r.measure.total_mass())).abs() <= 1e-5);
    }

    #[test]
    fn dual_examples() {
        let grid = default_s_grid(200, 50.0);
        let w = shifted_harmonic(64);
        let cert = dual_certificate_search(&w, &grid, 16, 1e-6)
            .unwrap()
            .expect("certificate");
        assert!(cert.value < -1e-6 && cert.positivity.margin >= 0.0);
        assert!(cert.verify(&w, 1e-6).unwrap());
        // Eigenvector oracle for the leading 2×2 minor.
        let m = nalgebra::Matrix2::new(0.5, 1.0 / 3.0, 1.0 / 3.0, 0.2);
        let lmin = m.symmetric_eigenvalues().min();
        assert_relative_eq!(cert.value, lmin, max_relative = 1e-6);

        assert!(dual_certificate_search(&harmonic(64), &grid, 16, 1e-6)
            .unwrap()
            .is_none());

        let mut vals: Vec<f64> = (1..=10).map(|n| 1.0 / n as f64).collect();
        vals[1] = 0.5;
        vals[2] = 0.6;
        let cert = dual_certificate_search(&seq(1, &vals), &grid, 10, 1e-6)
            .unwrap()
            .unwrap();
        assert!(cert.q.coefficient(2) > 0.0 && cert.q.coefficient(3) < 0.0);
        assert!((cert.value + 0.1).abs() < 1e-6);
    }

    #[test]
    fn membership_examples() {
        let config = MembershipConfig::default();
        let w = MomentSequence::from_fn(1, 64, |n| (n as f64).powi(-2)).unwrap();
        assert_eq!(membership(&w, &config).unwrap().verdict, Verdict::Member);

        let report = membership(&shifted_harmonic(64), &config).unwrap();
        assert_eq!(report.verdict, Verdict::Rejected);
        match report.rejection_evidence {
            Some(Evidence::Psd(ref c)) => {
                assert_eq!((c.k, c.indices.as_slice()), (1, &[1u64, 2][..]));
            }
            ref other => panic!("unexpected evidence {other:?}"),
        }

        let lg = MeasureFamily::log_gamma(-1.0).unwrap();
        let w = MomentSequence::from_fn(2, 64, |n| lg.closed_form(n).unwrap()).unwrap();
        let report = membership(&w, &config).unwrap();
        assert_eq!(report.verdict, Verdict::Member, "{report:?}");
        assert_eq!(report.recovered.unwrap().atom, 0.0);
    }

    #[test]
    fn cone_examples() {
        let a = harmonic(20);
        let b = MomentSequence::from_fn(1, 20, |n| (n as f64).powi(-2)).unwrap();
        let sum = cone_add(&a, &b).unwrap();
        assert_relative_eq!(sum.get(5).unwrap(), 0.2 + 0.04);
        let zero = cone_scale(&a, 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let prod = cone_product(&a, &b).unwrap();
        assert_relative_eq!(prod.get(4).unwrap(), 1.0 / 64.0);
        assert!(matches!(
            cone_add(&a, &harmonic(10)),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(cone_scale(&a, -1.0).is_err());
    }

    #[test]
    fn minimality_examples() {
        let e1 = GridMeasure::dirac(Domain::UnitInterval, (-1.0f64).exp(), 1.0).unwrap();
        assert!(minimality_check(&e1).unwrap());
        let d0 = GridMeasure::unit_interval(vec![], 1.0).unwrap();
        assert!(!minimality_check(&d0).unwrap());
        let mixed = GridMeasure::unit_interval(vec![((-1.0f64).exp(), 0.5)], 0.5).unwrap();
        assert!(!minimality_check(&mixed).unwrap());
    }

    #[test]
    fn sequence_json() {
        let w = seq(2, &[0.5, 0.25]);
        let text = serde_json::to_string(&w).unwrap();
        assert_eq!(text, r#"{"start":2,"values":[0.5,0.25]}"#);
        assert_eq!(serde_json::from_str::<MomentSequence>(&text).unwrap(), w);
        assert!(serde_json::from_str::<MomentSequence>(r#"{"start":1,"values":[-1.0]}"#).is_err());
        assert!(serde_json::from_str::<MomentSequence>(r#"{"start":0,"values":[1.0]}"#).is_err());
    }
}
