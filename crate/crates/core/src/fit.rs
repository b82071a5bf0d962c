//! Fitting `w_n ≈ c·[n = 1] + Σ_k x_k n^{-s_k}` with `c, x_k ≥ 0`.
//!
//! A Lawson–Hanson solve on a fixed `s` grid, refined around its support,
//! gives a starting configuration; a variable-projection Levenberg–Marquardt
//! pass then lets the atoms slide off the grid, and a local search over the
//! number of atoms escapes configurations where neighbouring grid atoms
//! stand in for a single atom between them (or the reverse). Exponential sums
//! are strictly convex in `s`, so a point mass between two grid nodes cannot
//! be matched by any nonnegative combination of them to better than about
//! `1e-4` on typical data; sliding removes that floor.

use nalgebra::{DMatrix, DVector};

use crate::nnls::nnls;

#[derive(Clone, Debug)]
pub(crate) struct Fit {
    /// Weight of the `[n = 1]` column (always 0 when it was not offered).
    pub atom: f64,
    /// `(s, weight)`, sorted by `s`.
    pub atoms: Vec<(f64, f64)>,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    /// Norm of the row-weighted residual that the search minimizes.
    objective: f64,
}

/// How far below `tol` the search keeps refining, and whether rows are
/// weighted by the inverse magnitude of the data.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FitGoal {
    pub tol: f64,
    pub target: f64,
    pub relative: bool,
}

impl FitGoal {
    pub fn plain(tol: f64) -> Self {
        Self {
            tol,
            target: tol,
            relative: false,
        }
    }
}

/// The rows of one least-squares problem.
struct Problem<'a> {
    logs: Vec<f64>,
    values: &'a [f64],
    rows: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(indices: &[u64], values: &'a [f64], relative: bool) -> Self {
        let logs = indices.iter().map(|&n| (n as f64).ln()).collect();
        let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rows = values
            .iter()
            .map(|v| {
                if relative {
                    1.0 / v.abs().max(1e-12 * peak).max(f64::MIN_POSITIVE)
                } else {
                    1.0
                }
            })
            .collect();
        Self { logs, values, rows }
    }

    fn len(&self) -> usize {
        self.logs.len()
    }

    fn kernel(&self, s: f64, r: usize) -> f64 {
        (-s * self.logs[r]).exp()
    }

    /// Plain and weighted residual norms of `(atom, atoms)`.
    fn residuals(&self, atom: f64, atoms: &[(f64, f64)]) -> (f64, f64) {
        let (mut plain, mut weighted) = (0.0, 0.0);
        for r in 0..self.len() {
            let mut v = atoms
                .iter()
                .map(|&(s, w)| w * self.kernel(s, r))
                .sum::<f64>()
                - self.values[r];
            if r == 0 {
                v += atom;
            }
            plain += v * v;
            weighted += (v * self.rows[r]).powi(2);
        }
        (plain.sqrt(), weighted.sqrt())
    }

    fn fit(&self, atom: f64, atoms: Vec<(f64, f64)>) -> Fit {
        let (residual, objective) = self.residuals(atom, &atoms);
        Fit {
            atom,
            atoms,
            residual,
            objective,
        }
    }
}

/// Prefers a fit without the `[n = 1]` column: far-out mass and an atom at
/// `n = 1` are nearly indistinguishable on finite data, and the atom-free
/// reading is minimal. If the atom-free fit stops short of `goal.target`,
/// the fit with the column is also computed and the atom-free one is kept
/// when it meets `goal.tol` unless the column improves the fit decisively
/// (both often stall at the same rounding floor). A relatively weighted
/// search that misses `goal.tol` is repeated unweighted.
pub(crate) fn fit_minimal(
    indices: &[u64],
    values: &[f64],
    with_atom: bool,
    grid: &[f64],
    goal: FitGoal,
) -> Fit {
    let fit = fit_split(
        &Problem::new(indices, values, goal.relative),
        with_atom,
        grid,
        goal,
    );
    if goal.relative && fit.residual > goal.tol {
        let plain = fit_split(&Problem::new(indices, values, false), with_atom, grid, goal);
        if plain.residual < fit.residual {
            return plain;
        }
    }
    fit
}

fn fit_split(problem: &Problem, with_atom: bool, grid: &[f64], goal: FitGoal) -> Fit {
    if !with_atom {
        return fit_exponentials(problem, false, grid, goal.target);
    }
    // Far nodes would only fake the missing column.
    let near: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&s| 2f64.powf(-s) >= FAR_RATIO)
        .collect();
    let free = (!near.is_empty()).then(|| {
        fold_far_atoms(
            problem,
            fit_exponentials(problem, false, &near, goal.target),
            goal.target,
        )
    });
    if let Some(free) = free.clone().filter(|f| f.residual <= goal.target) {
        return free;
    }
    let with = fit_exponentials(problem, true, grid, goal.target);
    // The support found with the column is a second start for the fit without.
    let free = match free {
        Some(free) if free.objective > DECISIVE * with.objective && !with.atoms.is_empty() => {
            let seed = slide(problem, false, &with.atoms, goal.target);
            let again = fold_far_atoms(
                problem,
                reshape(problem, false, seed, goal.target),
                goal.target,
            );
            Some(if again.objective < free.objective {
                again
            } else {
                free
            })
        }
        other => other,
    };
    match free {
        Some(free) if free.residual <= goal.tol && free.objective <= DECISIVE * with.objective => {
            free
        }
        _ => with,
    }
}

/// Fits on `grid`, refines the grid around the support, slides the atoms off
/// it, and reshapes the support while the residual exceeds `target`.
fn fit_exponentials(problem: &Problem, with_atom: bool, grid: &[f64], target: f64) -> Fit {
    let mut nodes = grid.to_vec();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut first = fit_on_grid(problem, with_atom, &nodes);
    // Exchange rounds: bisect the cells next to every active node and
    // re-solve, so that the support can approach off-grid locations.
    let mut stalls = 0;
    for _ in 0..REFINE_ROUNDS {
        if first.residual <= target {
            break;
        }
        let added = bisect_around(&nodes, &first.atoms);
        if added.is_empty() {
            break;
        }
        nodes.extend(added);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let next = fit_on_grid(problem, with_atom, &nodes);
        stalls = if next.objective < 0.9 * first.objective {
            0
        } else {
            stalls + 1
        };
        if next.objective <= first.objective {
            first = next;
        }
        if stalls >= 3 {
            break;
        }
    }
    if first.residual <= target {
        return if with_atom {
            fold_far_atoms(problem, first, target)
        } else {
            first
        };
    }
    let mut best = first.clone();
    for seed in [first.atoms.clone(), cluster(&first.atoms, &nodes)] {
        if seed.len() + usize::from(with_atom) >= problem.len() {
            continue;
        }
        let refined = slide(problem, with_atom, &seed, target);
        if refined.objective < best.objective {
            best = refined;
        }
    }
    best = reshape(problem, with_atom, best, target);
    if with_atom {
        fold_far_atoms(problem, best, target)
    } else {
        best
    }
}

const REFINE_ROUNDS: usize = 40;
/// Factor by which the column must lower the objective to be used.
const DECISIVE: f64 = 10.0;
const RESHAPE_ROUNDS: usize = 24;

/// Local search over the number of atoms: merges two neighbours into their
/// barycenter (closest pair first) or splits one atom into two (heaviest
/// first), slides again, and keeps the first move that improves, until none
/// does or `target` is met.
fn reshape(problem: &Problem, with_atom: bool, mut best: Fit, target: f64) -> Fit {
    'rounds: for _ in 0..RESHAPE_ROUNDS {
        if best.residual <= target || best.atoms.is_empty() {
            break;
        }
        for seed in reshape_moves(&best.atoms) {
            if seed.len() + usize::from(with_atom) >= problem.len() {
                continue;
            }
            let candidate = slide(problem, with_atom, &seed, target);
            if candidate.objective < best.objective {
                best = candidate;
                continue 'rounds;
            }
        }
        break;
    }
    best
}

fn reshape_moves(atoms: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let mut pairs: Vec<usize> = (0..atoms.len().saturating_sub(1)).collect();
    let gap = |i: usize| (atoms[i + 1].0 - atoms[i].0) / (1.0 + atoms[i].0);
    pairs.sort_by(|&i, &j| gap(i).total_cmp(&gap(j)));
    let mut moves: Vec<Vec<(f64, f64)>> = pairs
        .into_iter()
        .map(|i| {
            let (a, b) = (atoms[i], atoms[i + 1]);
            let mass = a.1 + b.1;
            let mut seed = atoms.to_vec();
            seed[i] = ((a.0 * a.1 + b.0 * b.1) / mass, mass);
            seed.remove(i + 1);
            seed
        })
        .collect();
    let mut heavy: Vec<usize> = (0..atoms.len()).collect();
    heavy.sort_by(|&i, &j| atoms[j].1.total_cmp(&atoms[i].1));
    moves.extend(heavy.into_iter().map(|i| {
        let (s, w) = atoms[i];
        let delta = 0.05 * (1.0 + s);
        let mut seed = atoms.to_vec();
        seed[i] = ((s - delta).max(0.0), 0.5 * w);
        seed.insert(i + 1, (s + delta, 0.5 * w));
        seed
    }));
    moves
}

/// Midpoints between each active node and its neighbours in `nodes`.
fn bisect_around(nodes: &[f64], atoms: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for &(s, _) in atoms {
        let Ok(i) = nodes.binary_search_by(|x| x.total_cmp(&s)) else {
            continue;
        };
        for nb in [i.checked_sub(1), Some(i + 1)].into_iter().flatten() {
            if let Some(&t) = nodes.get(nb) {
                if (t - s).abs() > 1e-10 * (1.0 + s) {
                    out.push(0.5 * (s + t));
                }
            }
        }
    }
    out
}

/// Mass whose share of `w_2` is below this fraction of the total is
/// invisible behind the conditioning of the fit and is booked at `n = 1`.
const FAR_RATIO: f64 = 1e-9;

/// Atoms so far out that they are negligible on every row but the first are
/// indistinguishable from the `[n = 1]` column; book them there. Negligible
/// means below `FAR_RATIO` of the total mass or below `target` on `w_2`.
fn fold_far_atoms(problem: &Problem, fit: Fit, target: f64) -> Fit {
    let Some(&l2) = problem.logs.get(1) else {
        return fit;
    };
    let scale = fit.atoms.iter().map(|a| a.1).sum::<f64>() + fit.atom;
    let (far, near): (Vec<(f64, f64)>, Vec<_>) = fit
        .atoms
        .iter()
        .partition(|&(s, w)| w * (-s * l2).exp() < (FAR_RATIO * scale).max(target));
    if far.is_empty() {
        return fit;
    }
    let moved: f64 = far.iter().map(|a| a.1).sum();
    problem.fit(fit.atom + moved, near)
}

fn fit_on_grid(problem: &Problem, with_atom: bool, grid: &[f64]) -> Fit {
    let m = problem.len();
    let offset = usize::from(with_atom);
    let cols = grid.len() + offset;
    let mut a = DMatrix::zeros(m, cols);
    if with_atom {
        a[(0, 0)] = problem.rows[0];
    }
    for (i, &s) in grid.iter().enumerate() {
        for r in 0..m {
            a[(r, i + offset)] = problem.kernel(s, r) * problem.rows[r];
        }
    }
    let norms: Vec<f64> = (0..cols).map(|c| a.column(c).norm()).collect();
    for (c, &nrm) in norms.iter().enumerate() {
        if nrm > 0.0 {
            a.column_mut(c).scale_mut(1.0 / nrm);
        }
    }
    let b = DVector::from_fn(m, |r, _| problem.values[r] * problem.rows[r]);
    let sol = nnls(&a, &b);
    let weight = |c: usize| {
        if norms[c] > 0.0 {
            sol.x[c] / norms[c]
        } else {
            0.0
        }
    };
    let atom = if with_atom { weight(0) } else { 0.0 };
    let atoms = grid
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, weight(i + offset)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    problem.fit(atom, atoms)
}

/// Merges atoms sitting on consecutive grid nodes into their barycenter.
fn cluster(atoms: &[(f64, f64)], grid: &[f64]) -> Vec<(f64, f64)> {
    let position = |s: f64| grid.iter().position(|&g| g == s).unwrap_or(usize::MAX);
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for &(s, w) in atoms {
        let p = position(s);
        match out.last_mut() {
            Some(last) if p != usize::MAX && last.2 != usize::MAX && p == last.2 + 1 => {
                let total = last.1 + w;
                last.0 = (last.0 * last.1 + s * w) / total;
                last.1 = total;
                last.2 = p;
            }
            _ => out.push((s, w, p)),
        }
    }
    out.into_iter().map(|(s, w, _)| (s, w)).collect()
}

const SLIDE_ITERS: usize = 400;

/// Variable projection: Levenberg–Marquardt on the locations alone, with the
/// weights re-solved by NNLS at every trial point and the Jacobian in
/// Kaufman's form `P⊥ (∂A/∂s_k) x_k`. Stops once the residual is below
/// `target / 100`.
fn slide(problem: &Problem, with_atom: bool, seed: &[(f64, f64)], target: f64) -> Fit {
    let project = |locs: &[f64]| {
        let mut sorted = locs.to_vec();
        sorted.sort_by(f64::total_cmp);
        fit_on_grid(problem, with_atom, &sorted)
    };
    let seed_locs: Vec<f64> = seed.iter().map(|a| a.0).collect();
    let mut fit = project(&seed_locs);
    let goal = 0.01 * target;
    let mut lambda = 1e-3;
    let mut stalls = 0;
    for _ in 0..SLIDE_ITERS {
        if fit.residual <= goal || fit.atoms.is_empty() {
            break;
        }
        let locs: Vec<f64> = fit.atoms.iter().map(|a| a.0).collect();
        let (jac, r) = kaufman_jacobian(problem, &fit);
        // Damped steps from an SVD of the column-scaled Jacobian; the normal
        // equations would square a condition number that is already large.
        let norms: Vec<f64> = jac
            .column_iter()
            .map(|c| c.norm().max(f64::MIN_POSITIVE))
            .collect();
        let mut scaled = jac;
        for (c, &nrm) in norms.iter().enumerate() {
            scaled.column_mut(c).scale_mut(1.0 / nrm);
        }
        let svd = scaled.svd(true, true);
        let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let proj = u.tr_mul(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut coeffs = proj.clone();
            for (i, c) in coeffs.iter_mut().enumerate() {
                let sigma = svd.singular_values[i];
                *c *= -sigma / (sigma * sigma + lambda);
            }
            let mut step = v_t.tr_mul(&coeffs);
            for (d, &nrm) in step.iter_mut().zip(&norms) {
                *d /= nrm;
            }
            let trial_locs: Vec<f64> = locs
                .iter()
                .zip(step.iter())
                .map(|(s, d)| (s + d).max(0.0))
                .collect();
            let trial = project(&trial_locs);
            if trial.objective < fit.objective {
                let slow = trial.objective > fit.objective * (1.0 - 1e-8);
                stalls = if slow { stalls + 1 } else { 0 };
                fit = trial;
                lambda = (lambda / 3.0).max(1e-20);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted || stalls >= 10 {
            break;
        }
    }
    fit
}

/// Weighted residual and the Kaufman Jacobian of the projected weighted
/// residual with respect to the atom locations of `fit`.
fn kaufman_jacobian(problem: &Problem, fit: &Fit) -> (DMatrix<f64>, DVector<f64>) {
    let m = problem.len();
    let k = fit.atoms.len();
    let column = |s: f64| DVector::from_fn(m, |r, _| problem.kernel(s, r) * problem.rows[r]);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k + 1);
    if fit.atom > 0.0 {
        let mut e = DVector::zeros(m);
        e[0] = problem.rows[0];
        basis.push(e);
    }
    basis.extend(fit.atoms.iter().map(|a| column(a.0)));
    let q = DMatrix::from_columns(&basis).qr().q();
    let mut r = DVector::from_fn(m, |row, _| -problem.values[row] * problem.rows[row]);
    r[0] += fit.atom * problem.rows[0];
    let mut jac = DMatrix::zeros(m, k);
    for (c, &(s, w)) in fit.atoms.iter().enumerate() {
        let e = column(s);
        r.axpy(w, &e, 1.0);
        let d = DVector::from_fn(m, |row, _| -problem.logs[row] * w * e[row]);
        let projected = &d - &q * q.tr_mul(&d);
        jac.set_column(c, &projected);
    }
    (jac, r)
}

/// `{0} ∪ logspace(lo, hi, count)`.
pub(crate) fn default_grid(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut grid = Vec::with_capacity(count + 1);
    grid.push(0.0);
    let (a, b) = (lo.log10(), hi.log10());
    for i in 0..count {
        let t = if count == 1 {
            0.0
        } else {
            i as f64 / (count - 1) as f64
        };
        grid.push(10f64.powf(a + t * (b - a)));
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n_max: u64, f: impl Fn(u64) -> f64) -> (Vec<u64>, Vec<f64>) {
        let idx: Vec<u64> = (1..=n_max).collect();
        let vals = idx.iter().map(|&n| f(n)).collect();
        (idx, vals)
    }

    fn exact(tol: f64) -> FitGoal {
        FitGoal {
            tol,
            target: 0.0,
            relative: false,
        }
    }

    #[test]
    fn off_grid_point_mass_is_recovered() {
        let (idx, vals) = data(64, |n| 0.7 * (n as f64).powf(-1.2345));
        let grid = default_grid(200, 1e-4, 50.0);
        let fit = fit_minimal(&idx, &vals, true, &grid, exact(1e-8));
        assert!(fit.residual < 1e-8, "{}", fit.residual);
        let mass: f64 = fit.atoms.iter().map(|a| a.1).sum();
        assert!((mass - 0.7).abs() < 1e-6);
        assert!(fit.atom < 1e-8);
    }

    #[test]
    fn atom_column_only_touches_first_row() {
        let (idx, vals) = data(40, |n| if n == 1 { 1.0 } else { 0.0 });
        let fit = fit_minimal(
            &idx,
            &vals,
            true,
            &default_grid(50, 1e-4, 50.0),
            exact(1e-9),
        );
        assert!((fit.atom - 1.0).abs() < 1e-9, "{fit:?}");
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn relative_weighting_separates_the_first_value() {
        let (idx, vals) = data(64, |n| {
            let body = 0.6 * (n as f64).powf(-3.4) + 0.3 * (n as f64).powf(-4.3);
            if n == 1 {
                body + 0.7
            } else {
                body
            }
        });
        let goal = FitGoal {
            tol: 1e-6,
            target: 1e-14,
            relative: true,
        };
        let fit = fit_minimal(&idx, &vals, true, &default_grid(200, 1e-4, 50.0), goal);
        assert!((fit.atom - 0.7).abs() < 1e-7, "{fit:?}");
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid(200, 1e-4, 50.0);
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-4).abs() < 1e-18);
        assert!((g[200] - 50.0).abs() < 1e-12);
    }
}
