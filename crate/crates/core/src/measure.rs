//! Finitely supported measures on `[0, 1]` and `[0, ∞)`, the change of
//! variables `φ(t) = -log t` / `ψ(s) = e^{-s}` between them, and the three
//! closed-form families of log-moment sequences.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{require_finite, Error, Result};
use crate::quadrature::gauss_laguerre;

/// Atoms beyond this `s` would underflow `t = e^{-s}`.
const MAX_LOG_DEPTH: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[0, 1]`; locations of ordinary atoms lie in `(0, 1]` and the mass at
    /// `0` is kept separately.
    UnitInterval,
    /// `[0, ∞)`.
    HalfLine,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::UnitInterval => "the unit interval",
            Domain::HalfLine => "the half line",
        }
    }
}

/// A nonnegative measure with finitely many atoms.
///
/// Atoms are sorted by location, locations are distinct and weights are
/// positive. `atom_at_zero` is `μ({0})` for measures on the unit interval and
/// always `0` on the half line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct GridMeasure {
    domain: Domain,
    atoms: Vec<(f64, f64)>,
    atom_at_zero: f64,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    domain: Domain,
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    atom_at_zero: f64,
}

impl TryFrom<RawMeasure> for GridMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        GridMeasure::new(raw.domain, raw.atoms, raw.atom_at_zero)
    }
}

impl From<GridMeasure> for RawMeasure {
    fn from(m: GridMeasure) -> Self {
        RawMeasure {
            domain: m.domain,
            atoms: m.atoms,
            atom_at_zero: m.atom_at_zero,
        }
    }
}

impl GridMeasure {
    /// Validates, sorts and merges exactly coincident locations. On the unit
    /// interval an atom listed at location `0` is folded into `atom_at_zero`.
    pub fn new(domain: Domain, atoms: Vec<(f64, f64)>, atom_at_zero: f64) -> Result<Self> {
        check_weight(atom_at_zero)?;
        if domain == Domain::HalfLine && atom_at_zero != 0.0 {
            return Err(Error::Invalid(
                "atom_at_zero is only meaningful on the unit interval".into(),
            ));
        }
        let mut at_zero = atom_at_zero;
        let mut kept = Vec::with_capacity(atoms.len());
        for (loc, w) in atoms {
            require_finite("location", loc)?;
            check_weight(w)?;
            let ok = match domain {
                Domain::UnitInterval => (0.0..=1.0).contains(&loc),
                Domain::HalfLine => loc >= 0.0,
            };
            if !ok {
                return Err(Error::Domain {
                    name: "location",
                    value: loc,
                    expected: match domain {
                        Domain::UnitInterval => "0 <= t <= 1",
                        Domain::HalfLine => "s >= 0",
                    },
                });
            }
            if domain == Domain::UnitInterval && loc == 0.0 {
                at_zero += w;
            } else if w > 0.0 {
                kept.push((loc, w));
            }
        }
        Ok(Self {
            domain,
            atoms: merge_sorted(kept),
            atom_at_zero: at_zero,
        })
    }

    pub fn zero(domain: Domain) -> Self {
        Self {
            domain,
            atoms: Vec::new(),
            atom_at_zero: 0.0,
        }
    }

    pub fn dirac(domain: Domain, location: f64, mass: f64) -> Result<Self> {
        Self::new(domain, vec![(location, mass)], 0.0)
    }

    pub fn unit_interval(atoms: Vec<(f64, f64)>, atom_at_zero: f64) -> Result<Self> {
        Self::new(Domain::UnitInterval, atoms, atom_at_zero)
    }

    pub fn half_line(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(Domain::HalfLine, atoms, 0.0)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.atom_at_zero
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.atom_at_zero
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.atom_at_zero == 0.0
    }

    fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::WrongDomain {
                expected: domain.name(),
            })
        }
    }

    /// `∫ t^{log n} dμ`. The atom at `0` contributes only to `n = 1`.
    pub fn log_moment(&self, n: u64) -> Result<f64> {
        self.expect_domain(Domain::UnitInterval)?;
        if n == 0 {
            return Err(Error::Invalid("log-moment index must be >= 1".into()));
        }
        let ln_n = (n as f64).ln();
        let body: f64 = self
            .atoms
            .iter()
            .map(|&(t, w)| if n == 1 { w } else { w * (ln_n * t.ln()).exp() })
            .sum();
        Ok(if n == 1 {
            body + self.atom_at_zero
        } else {
            body
        })
    }

    /// Ordinary power moment `∫ x^k dμ` on the unit interval, with `0^0 = 1`.
    pub fn power_moment(&self, k: u32) -> Result<f64> {
        self.expect_domain(Domain::UnitInterval)?;
        let body: f64 = self.atoms.iter().map(|&(t, w)| w * t.powi(k as i32)).sum();
        Ok(if k == 0 {
            body + self.atom_at_zero
        } else {
            body
        })
    }

    /// `∫ e^{-λ s} dν` on the half line.
    pub fn laplace_moment(&self, lambda: f64) -> Result<f64> {
        self.expect_domain(Domain::HalfLine)?;
        Ok(self.laplace_unchecked(lambda))
    }

    pub(crate) fn laplace_unchecked(&self, lambda: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(s, w)| if s == 0.0 { w } else { w * (-lambda * s).exp() })
            .sum()
    }

    /// Push-forward by `φ(t) = -log t`; requires `μ({0}) = 0`.
    pub fn pushforward_phi(&self) -> Result<GridMeasure> {
        self.expect_domain(Domain::UnitInterval)?;
        if self.atom_at_zero != 0.0 {
            return Err(Error::AtomAtZero {
                mass: self.atom_at_zero,
            });
        }
        let atoms = self
            .atoms
            .iter()
            .map(|&(t, w)| ((-t.ln()).max(0.0), w))
            .collect();
        GridMeasure::half_line(atoms)
    }

    /// Push-forward by `ψ(s) = e^{-s}`.
    pub fn pushforward_psi(&self) -> Result<GridMeasure> {
        self.expect_domain(Domain::HalfLine)?;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for &(s, w) in &self.atoms {
            let t = (-s).exp();
            if t == 0.0 {
                return Err(Error::Domain {
                    name: "s",
                    value: s,
                    expected: "e^{-s} representable",
                });
            }
            atoms.push((t, w));
        }
        // ψ is decreasing; `new` re-sorts.
        GridMeasure::unit_interval(atoms, 0.0)
    }

    /// `μ̂(σ) = μ(σ \ {0})`.
    pub fn trivial_extension(&self) -> Result<GridMeasure> {
        self.expect_domain(Domain::UnitInterval)?;
        Ok(Self {
            domain: Domain::UnitInterval,
            atoms: self.atoms.clone(),
            atom_at_zero: 0.0,
        })
    }

    /// Push-forward of `μ ⊗ ν` by `(x, y) ↦ xy`; both factors must be free of
    /// mass at `0`.
    pub fn product_pushforward(&self, other: &GridMeasure) -> Result<GridMeasure> {
        self.expect_domain(Domain::UnitInterval)?;
        other.expect_domain(Domain::UnitInterval)?;
        for m in [self, other] {
            if m.atom_at_zero != 0.0 {
                return Err(Error::AtomAtZero {
                    mass: m.atom_at_zero,
                });
            }
        }
        let mut atoms = Vec::with_capacity(self.atoms.len() * other.atoms.len());
        for &(x, wx) in &self.atoms {
            for &(y, wy) in &other.atoms {
                atoms.push((x * y, wx * wy));
            }
        }
        GridMeasure::unit_interval(atoms, 0.0)
    }

    pub fn add(&self, other: &GridMeasure) -> Result<GridMeasure> {
        if self.domain != other.domain {
            return Err(Error::WrongDomain {
                expected: self.domain.name(),
            });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        GridMeasure::new(self.domain, atoms, self.atom_at_zero + other.atom_at_zero)
    }

    pub fn scale(&self, c: f64) -> Result<GridMeasure> {
        check_weight(c)?;
        let atoms = self.atoms.iter().map(|&(x, w)| (x, c * w)).collect();
        GridMeasure::new(self.domain, atoms, c * self.atom_at_zero)
    }

    /// `t^{log k} μ(dt)`: the representing measure of `{w_{kn}}_n`.
    pub fn tilted(&self, k: u64) -> Result<GridMeasure> {
        self.expect_domain(Domain::UnitInterval)?;
        if k == 0 {
            return Err(Error::Invalid("shift index must be >= 1".into()));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let ln_k = (k as f64).ln();
        let atoms = self
            .atoms
            .iter()
            .map(|&(t, w)| (t, w * (ln_k * t.ln()).exp()))
            .collect();
        GridMeasure::unit_interval(atoms, 0.0)
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "weight",
            value: w,
            expected: "finite and >= 0",
        })
    }
}

fn merge_sorted(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// The closed-form families of log-moment sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `(log n)^α`, `n ≥ 2`, `α < 0`; density `(-log t)^{-1-α} / (t Γ(-α))`.
    LogGamma { alpha: f64 },
    /// `1 / (log n + α)`, `α > 0`; density `t^{α-1}`.
    PowerDensity { alpha: f64 },
    /// `α^{log n}`, `α ∈ [0, 1]`; the point mass at `α`.
    PointMass { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureFamily {
    pub kind: FamilyKind,
    pub quadrature_nodes: usize,
}

pub const DEFAULT_FAMILY_NODES: usize = 64;

impl MeasureFamily {
    pub fn new(kind: FamilyKind, quadrature_nodes: usize) -> Result<Self> {
        match kind {
            FamilyKind::LogGamma { alpha } if !(alpha < 0.0) || !alpha.is_finite() => {
                return Err(Error::Domain {
                    name: "alpha",
                    value: alpha,
                    expected: "alpha < 0",
                })
            }
            FamilyKind::PowerDensity { alpha } if !(alpha > 0.0) || !alpha.is_finite() => {
                return Err(Error::Domain {
                    name: "alpha",
                    value: alpha,
                    expected: "alpha > 0",
                })
            }
            FamilyKind::PointMass { alpha } if !(0.0..=1.0).contains(&alpha) => {
                return Err(Error::Domain {
                    name: "alpha",
                    value: alpha,
                    expected: "0 <= alpha <= 1",
                })
            }
            _ => {}
        }
        if quadrature_nodes < 8 {
            return Err(Error::Domain {
                name: "quadrature_nodes",
                value: quadrature_nodes as f64,
                expected: ">= 8",
            });
        }
        Ok(Self {
            kind,
            quadrature_nodes,
        })
    }

    pub fn log_gamma(alpha: f64) -> Result<Self> {
        Self::new(FamilyKind::LogGamma { alpha }, DEFAULT_FAMILY_NODES)
    }

    pub fn power_density(alpha: f64) -> Result<Self> {
        Self::new(FamilyKind::PowerDensity { alpha }, DEFAULT_FAMILY_NODES)
    }

    pub fn point_mass(alpha: f64) -> Result<Self> {
        Self::new(FamilyKind::PointMass { alpha }, DEFAULT_FAMILY_NODES)
    }

    /// First index with a finite moment.
    pub fn start_index(&self) -> u64 {
        match self.kind {
            FamilyKind::LogGamma { .. } => 2,
            _ => 1,
        }
    }

    /// The moment formula of the family, without any discretization.
    pub fn closed_form(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Invalid("log-moment index must be >= 1".into()));
        }
        let ln_n = (n as f64).ln();
        match self.kind {
            FamilyKind::LogGamma { alpha } => {
                if n == 1 {
                    Err(Error::DivergentMoment { n })
                } else {
                    Ok(ln_n.powf(alpha))
                }
            }
            FamilyKind::PowerDensity { alpha } => Ok(1.0 / (ln_n + alpha)),
            FamilyKind::PointMass { alpha } => Ok(if n == 1 {
                1.0
            } else if alpha == 0.0 {
                0.0
            } else {
                (ln_n * alpha.ln()).exp()
            }),
        }
    }

    /// Log-moment of the discretized family.
    pub fn log_moment(&self, n: u64) -> Result<f64> {
        if n < self.start_index() {
            return Err(Error::DivergentMoment { n });
        }
        self.quadrature()?.log_moment(n)
    }

    /// Discretization into atoms on the unit interval.
    ///
    /// The densities are handled in the `s = -log t` picture, where both become
    /// Gauss–Laguerre weights: `t^{α-1} dt = e^{-αs} ds` and
    /// `(-log t)^{-1-α} dt / t = s^{-1-α} ds`. The latter has infinite mass, so
    /// its rule is built for `s^{-1-α} e^{-s log 2}` and re-weighted by
    /// `e^{s log 2}`; the result is exact in the limit for every `n ≥ 2`.
    pub fn quadrature(&self) -> Result<GridMeasure> {
        let nodes = self.quadrature_nodes;
        match self.kind {
            FamilyKind::PointMass { alpha } => {
                if alpha == 0.0 {
                    GridMeasure::unit_interval(Vec::new(), 1.0)
                } else {
                    GridMeasure::unit_interval(vec![(alpha, 1.0)], 0.0)
                }
            }
            FamilyKind::PowerDensity { alpha } => {
                let rule = gauss_laguerre(nodes, 0.0);
                let atoms = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| (x / alpha, w / alpha))
                    .filter(|&(s, w)| s < MAX_LOG_DEPTH && w > 0.0)
                    .map(|(s, w)| ((-s).exp(), w))
                    .collect();
                GridMeasure::unit_interval(atoms, 0.0)
            }
            FamilyKind::LogGamma { alpha } => {
                let a = -1.0 - alpha;
                let beta = std::f64::consts::LN_2;
                let rule = gauss_laguerre(nodes, a);
                let log_scale = -(a + 1.0) * beta.ln() - ln_gamma(-alpha);
                let atoms = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .filter(|&(&x, &w)| w > 0.0 && x / beta < MAX_LOG_DEPTH)
                    .map(|(&x, &w)| ((-x / beta).exp(), (w.ln() + x + log_scale).exp()))
                    .collect();
                GridMeasure::unit_interval(atoms, 0.0)
            }
        }
    }
}

/// A measure given either by atoms or by one of the closed-form families.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Grid(GridMeasure),
    Family(MeasureFamily),
}

impl Measure {
    pub fn log_moment(&self, n: u64) -> Result<f64> {
        match self {
            Measure::Grid(m) => m.log_moment(n),
            Measure::Family(f) => f.log_moment(n),
        }
    }
}
