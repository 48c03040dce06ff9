//! Mass-shell scans and the bounds they satisfy.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{BosonDispersion, DispersionKind, ModelSpec};
use crate::spectral::{hellmann_feynman_gradient, second_derivative_bound, FiberSolver, GroundStateRecord, SecondDerivative, SpectralError};

#[derive(Clone, Debug, Serialize)]
pub struct ScanOptions {
    /// Central-difference step for the gradient.
    pub grad_step: f64,
    /// Outer step of the Richardson second difference.
    pub hess_step: f64,
    /// Number of smallest-|k| modes used for the small-k candidate of Δ_P.
    pub small_k_modes: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            grad_step: 1e-3,
            hess_step: 1e-2,
            small_k_modes: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaP {
    /// +∞ when P is outside I_0 on the grid.
    pub value: f64,
    pub grid_max: f64,
    pub grid_argmax: usize,
    /// max ω/(ω − k·∇E) over the smallest modes; the linearization of the
    /// denominator as k → 0.
    pub small_k: f64,
    pub in_i0: bool,
    /// E(P − k_i) − E(P) + ω(k_i) per mode.
    pub denominators: Vec<f64>,
    /// E(P − k_i) − E(P) per mode.
    pub shell_differences: Vec<f64>,
    /// Smallest C with E(P − k) − E(P) ≥ −C|k| on the grid.
    pub c_p: f64,
}

/// Δ_P on the grid. The continuum supremum also sees k → 0, where the ratio
/// tends to 1 for μ > 0 and to ω/(ω − k·∇E) along rays for small k; both
/// enter as candidates.
pub fn delta_p(solver: &FiberSolver, rec: &GroundStateRecord, grad: &[f64], mu: f64, small_k_modes: usize) -> DeltaP {
    let grid = &solver.space.grid;
    let om = BosonDispersion { mu };
    let mut denominators = Vec::with_capacity(grid.len());
    let mut diffs = Vec::with_capacity(grid.len());
    let mut c_p = 0.0f64;
    let e0 = solver.energy(&rec.momentum, mu);
    for i in 0..grid.len() {
        let k = grid.mode(i);
        let q: Vec<f64> = rec.momentum.iter().zip(k).map(|(a, b)| a - b).collect();
        let diff = solver.energy(&q, mu) - e0;
        c_p = c_p.max(-diff / grid.abs_k(i));
        diffs.push(diff);
        denominators.push(diff + om.omega(k));
    }
    let in_i0 = denominators.iter().all(|&d| d > 0.0);
    let (grid_argmax, grid_max) = denominators
        .iter()
        .enumerate()
        .map(|(i, d)| (i, om.omega(grid.mode(i)) / d))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid.abs_k(a).partial_cmp(&grid.abs_k(b)).unwrap().then(a.cmp(&b)));
    let small_k = order
        .iter()
        .take(small_k_modes)
        .map(|&i| {
            let k = grid.mode(i);
            let w = om.omega(k);
            let kq: f64 = k.iter().zip(grad).map(|(a, b)| a * b).sum();
            if w - kq > 0.0 {
                w / (w - kq)
            } else {
                f64::INFINITY
            }
        })
        .fold(if mu > 0.0 { 1.0 } else { 0.0 }, f64::max);
    let value = if in_i0 { grid_max.max(small_k) } else { f64::INFINITY };
    DeltaP {
        value,
        grid_max,
        grid_argmax,
        small_k,
        in_i0,
        denominators,
        shell_differences: diffs,
        c_p,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MassShellRow {
    pub momentum: Vec<f64>,
    pub energy: f64,
    pub grad_hf: Vec<f64>,
    pub grad_fd: Vec<f64>,
    pub hess_fd: Vec<f64>,
    pub second: Vec<SecondDerivative>,
    pub delta_p: DeltaP,
    pub gap: f64,
    pub residual: f64,
    pub converged: bool,
    pub in_b: bool,
    /// Set when the row could not be completed; the remaining fields are
    /// then partial.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MassShellTable {
    pub mu: f64,
    pub options: ScanOptions,
    pub energy_at_zero: f64,
    pub rows: Vec<MassShellRow>,
}

fn in_b(spec: &ModelSpec, p: &[f64]) -> bool {
    match spec.dispersion.kind {
        DispersionKind::Nonrelativistic => p.iter().map(|x| x * x).sum::<f64>().sqrt() < spec.dispersion.mass,
        DispersionKind::Semirelativistic => true,
    }
}

fn scan_row(solver: &FiberSolver, p: &[f64], mu: f64, opts: &ScanOptions) -> MassShellRow {
    let rec = solver.ground_state(p, mu);
    let spec = solver.spec_at(p, mu);
    let d = p.len();
    let mut row = MassShellRow {
        momentum: p.to_vec(),
        energy: rec.energy,
        grad_hf: vec![f64::NAN; d],
        grad_fd: vec![f64::NAN; d],
        hess_fd: vec![f64::NAN; d],
        second: Vec::new(),
        delta_p: DeltaP {
            value: f64::NAN,
            grid_max: f64::NAN,
            grid_argmax: 0,
            small_k: f64::NAN,
            in_i0: false,
            denominators: Vec::new(),
            shell_differences: Vec::new(),
            c_p: f64::NAN,
        },
        gap: rec.gap,
        residual: rec.residual,
        converged: rec.converged,
        in_b: in_b(&spec, p),
        error: None,
    };
    let run = |row: &mut MassShellRow| -> Result<(), SpectralError> {
        row.grad_hf = hellmann_feynman_gradient(&solver.space, &spec, &rec)?;
        for a in 0..d {
            let mut plus = p.to_vec();
            plus[a] += opts.grad_step;
            let mut minus = p.to_vec();
            minus[a] -= opts.grad_step;
            row.grad_fd[a] = (solver.energy(&plus, mu) - solver.energy(&minus, mu)) / (2.0 * opts.grad_step);
            let s = second_derivative_bound(solver, &rec, a, opts.hess_step)?;
            row.hess_fd[a] = s.fd_value;
            row.second.push(s);
        }
        row.delta_p = delta_p(solver, &rec, &row.grad_hf, mu, opts.small_k_modes);
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

/// One row per momentum, computed concurrently and returned in input order.
pub fn scan_mass_shell(solver: &FiberSolver, points: &[Vec<f64>], mu: f64, opts: &ScanOptions) -> MassShellTable {
    let d = solver.space.grid.dimension();
    let rows: Vec<MassShellRow> = points.par_iter().map(|p| scan_row(solver, p, mu, opts)).collect();
    MassShellTable {
        mu,
        options: opts.clone(),
        energy_at_zero: solver.ground_state(&vec![0.0; d], mu).energy,
        rows,
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Worst margin with its row index; +∞ over an empty set.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Margin {
    pub value: f64,
    pub at: Option<usize>,
}

impl Margin {
    fn new() -> Self {
        Self {
            value: f64::INFINITY,
            at: None,
        }
    }

    fn push(&mut self, v: f64, i: usize) {
        // NaN counts as a failure
        if v < self.value || v.is_nan() {
            self.value = if v.is_nan() { f64::NEG_INFINITY } else { v };
            self.at = Some(i);
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.value >= -tol
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    /// C_Θ2|P|² − E(P) midpoint convexity on consecutive triples.
    pub midpoint: Margin,
    /// 2C_Θ2 − (second difference of E).
    pub second_difference: Margin,
    /// E(P) − E(0).
    pub lower: Margin,
    /// C_Θ2|P|² − (E(P) − E(0)).
    pub upper: Margin,
    /// C_Θ2|P| − |∇E|, the literal statement.
    pub gradient_literal: Margin,
    /// 2C_Θ2|P| − |∇E|.
    pub gradient_relaxed: Margin,
    /// 1 − |∇E| on the region B.
    pub speed: Margin,
    /// 1e-6 − |HF − FD|.
    pub hf_vs_fd: Margin,
    /// Second-derivative bound minus the finite-difference value.
    pub second_derivative: Margin,
    /// Continuity proxy |E(P') − E(P)| ≤ (max|∇E| + 1)|P' − P|.
    pub continuity: Margin,
    /// E nondecreasing moving away from the scanned minimum.
    pub divergence: Margin,
    /// Rows whose spacing is uniform enough for the midpoint tests.
    pub uniform: bool,
}

/// Discrete convexity and the elementary bounds on a 1-d ray scan.
pub fn convexity_check(table: &MassShellTable, spec: &ModelSpec) -> ConvexityReport {
    let c2 = spec.dispersion.c_theta2();
    let rows: Vec<&MassShellRow> = table.rows.iter().collect();
    let g = |r: &MassShellRow| c2 * norm(&r.momentum).powi(2) - r.energy;
    let mut rep = ConvexityReport {
        midpoint: Margin::new(),
        second_difference: Margin::new(),
        lower: Margin::new(),
        upper: Margin::new(),
        gradient_literal: Margin::new(),
        gradient_relaxed: Margin::new(),
        speed: Margin::new(),
        hf_vs_fd: Margin::new(),
        second_derivative: Margin::new(),
        continuity: Margin::new(),
        divergence: Margin::new(),
        uniform: true,
    };
    for w in 1..rows.len().saturating_sub(1) {
        let (a, b, c) = (rows[w - 1], rows[w], rows[w + 1]);
        let h1: Vec<f64> = b.momentum.iter().zip(&a.momentum).map(|(x, y)| x - y).collect();
        let h2: Vec<f64> = c.momentum.iter().zip(&b.momentum).map(|(x, y)| x - y).collect();
        if h1.iter().zip(&h2).any(|(x, y)| (x - y).abs() > 1e-12) {
            rep.uniform = false;
            continue;
        }
        rep.midpoint.push(g(a) + g(c) - 2.0 * g(b), w);
        let h = norm(&h1);
        rep.second_difference.push(2.0 * c2 - (a.energy + c.energy - 2.0 * b.energy) / (h * h), w);
    }
    let lmax = rows
        .iter()
        .map(|r| norm(&r.grad_hf))
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max)
        + 1.0;
    for (i, r) in rows.iter().enumerate() {
        let p = norm(&r.momentum);
        let de = r.energy - table.energy_at_zero;
        rep.lower.push(de, i);
        rep.upper.push(c2 * p * p - de, i);
        let gn = norm(&r.grad_hf);
        if gn.is_finite() {
            rep.gradient_literal.push(c2 * p - gn, i);
            rep.gradient_relaxed.push(2.0 * c2 * p - gn, i);
            if r.in_b {
                rep.speed.push(1.0 - gn, i);
            }
            let diff = r.grad_hf.iter().zip(&r.grad_fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rep.hf_vs_fd.push(1e-6 - diff, i);
        }
        for s in &r.second {
            rep.second_derivative.push(s.margin(), i);
        }
        if i > 0 {
            let step: Vec<f64> = r.momentum.iter().zip(&rows[i - 1].momentum).map(|(x, y)| x - y).collect();
            rep.continuity.push(lmax * norm(&step) - (r.energy - rows[i - 1].energy).abs(), i);
        }
    }
    if let Some(argmin) = (0..rows.len()).min_by(|&a, &b| rows[a].energy.partial_cmp(&rows[b].energy).unwrap()) {
        for i in (argmin + 1)..rows.len() {
            rep.divergence.push(rows[i].energy - rows[i - 1].energy, i);
        }
        for i in (0..argmin).rev() {
            rep.divergence.push(rows[i].energy - rows[i + 1].energy, i);
        }
    }
    rep
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellBoundReport {
    /// Piecewise lower bound on E(P − k) − E(P), every row and mode.
    pub convex_lower_bound: Margin,
    /// (1 − 2C_ωC_Θ2|P|)^{-1} − Δ_P where |P| < (2C_ωC_Θ2)^{-1}.
    pub gap_bound: Margin,
    /// (1 − C_P C_ω)^{-1} − Δ_P for the semirelativistic kind where C_P C_ω < 1.
    pub sr_gap_bound: Margin,
    pub c_omega: f64,
    /// Rows with Δ_P finite.
    pub in_i0: Vec<bool>,
}

/// Bounds that need the per-mode shell differences of each row.
pub fn shell_bound_suite(table: &MassShellTable, solver: &FiberSolver) -> ShellBoundReport {
    let spec = &solver.spec;
    let grid = &solver.space.grid;
    let c2 = spec.dispersion.c_theta2();
    let c_omega = BosonDispersion { mu: table.mu }.c_omega(grid);
    let mut rep = ShellBoundReport {
        convex_lower_bound: Margin::new(),
        gap_bound: Margin::new(),
        sr_gap_bound: Margin::new(),
        c_omega,
        in_i0: table.rows.iter().map(|r| r.delta_p.in_i0).collect(),
    };
    for (i, r) in table.rows.iter().enumerate() {
        let p = norm(&r.momentum);
        for (j, diff) in r.delta_p.shell_differences.iter().enumerate() {
            let k = grid.abs_k(j);
            let bound = if k <= p { -2.0 * c2 * k * p } else { -c2 * p * p };
            rep.convex_lower_bound.push(diff - bound, i);
        }
        if r.delta_p.denominators.is_empty() {
            continue;
        }
        if 2.0 * c_omega * c2 * p < 1.0 {
            rep.gap_bound.push(1.0 / (1.0 - 2.0 * c_omega * c2 * p) - r.delta_p.value, i);
        }
        if spec.dispersion.kind == DispersionKind::Semirelativistic && r.delta_p.c_p * c_omega < 1.0 {
            rep.sr_gap_bound.push(1.0 / (1.0 - r.delta_p.c_p * c_omega) - r.delta_p.value, i);
        }
    }
    rep
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleReport {
    pub momentum: Vec<f64>,
    pub schedule: Vec<f64>,
    pub energies: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
    pub second_differences: Vec<f64>,
    /// E_{μ_j} − E_{μ_{j+1}} for the schedule sorted by decreasing μ.
    pub increments: Vec<f64>,
    pub strictly_increasing: bool,
    /// |∇E_{μ_j} − ∇E_{μ_{j+1}}|.
    pub gradient_steps: Vec<f64>,
    pub gradient_steps_decreasing: bool,
}

/// Behaviour of E_μ(P) and its derivatives along a decreasing mass schedule.
pub fn schedule_check(solver: &FiberSolver, p: &[f64], schedule: &[f64], step: f64, tol: f64) -> Result<ScheduleReport, SpectralError> {
    let mut mus = schedule.to_vec();
    mus.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let recs: Vec<_> = mus.par_iter().map(|&mu| solver.ground_state(p, mu)).collect();
    let mut gradients = Vec::new();
    let mut second_differences = Vec::new();
    for (rec, &mu) in recs.iter().zip(&mus) {
        gradients.push(hellmann_feynman_gradient(&solver.space, &solver.spec_at(p, mu), rec)?);
        let mut plus = p.to_vec();
        plus[0] += step;
        let mut minus = p.to_vec();
        minus[0] -= step;
        second_differences.push((solver.energy(&plus, mu) + solver.energy(&minus, mu) - 2.0 * rec.energy) / (step * step));
    }
    let energies: Vec<f64> = recs.iter().map(|r| r.energy).collect();
    let increments: Vec<f64> = energies.windows(2).map(|w| w[0] - w[1]).collect();
    let gradient_steps: Vec<f64> = gradients
        .windows(2)
        .map(|w| norm(&w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .collect();
    Ok(ScheduleReport {
        momentum: p.to_vec(),
        schedule: mus,
        strictly_increasing: increments.iter().all(|&d| d > tol),
        gradient_steps_decreasing: gradient_steps.windows(2).all(|w| w[1] <= w[0] + tol),
        energies,
        gradients,
        second_differences,
        increments,
        gradient_steps,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fock::ModeGrid;
    use crate::model::{FockSpace, FormFactor, ParticleDispersion};
    use crate::spectral::SolverOptions;

    fn solver(coupling: f64) -> FiberSolver {
        let grid = ModeGrid::build(1, 2.0, 6).unwrap();
        let space = Arc::new(FockSpace::new(grid, 3, 10_000).unwrap());
        let spec = ModelSpec {
            dispersion: ParticleDispersion::nonrelativistic(1.0),
            boson: BosonDispersion { mu: 0.2 },
            form_factor: FormFactor {
                coupling,
                alpha: 0.25,
                cutoff: 2.0,
            },
            momentum: vec![0.0],
        };
        FiberSolver::new(space, spec, SolverOptions::default()).unwrap()
    }

    fn ray() -> Vec<Vec<f64>> {
        (-3..=3).map(|j| vec![0.1 * j as f64]).collect()
    }

    #[test]
    fn free_shell_is_the_dispersion() {
        let s = solver(0.0);
        let t = scan_mass_shell(&s, &ray(), 0.2, &ScanOptions::default());
        for r in &t.rows {
            assert!((r.energy - r.momentum[0].powi(2) / 2.0).abs() < 1e-14);
            assert!((r.grad_hf[0] - r.momentum[0]).abs() < 1e-12);
            assert!(r.delta_p.in_i0);
        }
        let c = convexity_check(&t, &s.spec);
        assert!(c.midpoint.value.abs() < 1e-12);
        assert!(c.uniform);
    }

    #[test]
    fn coupled_shell_bounds() {
        let s = solver(0.5);
        let t = scan_mass_shell(&s, &ray(), 0.2, &ScanOptions::default());
        let c = convexity_check(&t, &s.spec);
        assert!(c.midpoint.holds(1e-8), "{c:?}");
        assert!(c.lower.holds(1e-10) && c.upper.holds(1e-10));
        assert!(c.hf_vs_fd.holds(0.0));
        assert!(c.second_derivative.holds(1e-8));
        let b = shell_bound_suite(&t, &s);
        assert!(b.convex_lower_bound.holds(1e-8), "{b:?}");
        assert!(b.gap_bound.holds(1e-10), "{b:?}");
    }

    #[test]
    fn energies_increase_with_mass() {
        let s = solver(0.5);
        let r = schedule_check(&s, &[0.3], &[0.1, 0.4, 0.2], 1e-2, 1e-12).unwrap();
        assert_eq!(r.schedule, vec![0.4, 0.2, 0.1]);
        assert!(r.strictly_increasing);
    }
}
