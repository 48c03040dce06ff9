use rayon::prelude::*;
use serde::Serialize;

use crate::fock::{number_expectation, sector_weights, weyl_apply_projected, OneBosonFunction};
use crate::linalg::{distance, dot, LinearOperator};
use crate::model::{assemble_transformed, dressing_function, DressingFunction, ModelError};
use crate::spectral::{ground_state, hellmann_feynman_gradient, FiberSolver, GroundStateRecord, SpectralError};

#[derive(Clone, Debug, Serialize)]
pub struct FlowOptions {
    /// Largest tolerated weight lost by the exact Weyl dressing W(g)ψ.
    pub max_leakage: f64,
    /// Keep ψ_μ and Φ_μ in the record.
    pub keep_states: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            max_leakage: 0.05,
            keep_states: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowStep {
    pub mu: f64,
    pub ground: GroundStateRecord,
    pub gradient: Vec<f64>,
    pub dressing: DressingFunction,
    /// Ground state of the dressed operator T(P, g_μ) on the truncated space.
    pub frame: GroundStateRecord,
    pub n_undressed: f64,
    pub n_dressed: f64,
    /// ⟨N⟩ of Π_N W(g)ψ, normalized.
    pub n_weyl: f64,
    /// ‖ψ‖² − ‖Π_N W(g)ψ‖².
    pub leakage: f64,
    pub leakage_flag: bool,
    /// ⟨Φ, T Φ⟩ − E for the normalized exact dressing Φ = Π_N W(g)ψ.
    pub energy_consistency: f64,
    /// Ground energy of T minus E.
    pub frame_energy_shift: f64,
    pub top_weight_frame: f64,
    pub sector_weights_frame: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DressedFlowRecord {
    pub momentum: Vec<f64>,
    pub schedule: Vec<f64>,
    pub steps: Vec<FlowStep>,
    /// ‖Φ_{μ_j} − Φ_{μ_k}‖, symmetric.
    pub dressed_distances: Vec<Vec<f64>>,
    /// ‖ψ_{μ_j} − ψ_{μ_k}‖, symmetric.
    pub undressed_distances: Vec<Vec<f64>>,
    /// ‖W(g_j)ψ_j − W(g_k)ψ_k‖ from leakage-free overlaps.
    pub weyl_distances: Vec<Vec<f64>>,
    #[serde(skip)]
    pub psi: Vec<Vec<f64>>,
    #[serde(skip)]
    pub phi: Vec<Vec<f64>>,
}

impl DressedFlowRecord {
    pub fn consecutive(m: &[Vec<f64>]) -> Vec<f64> {
        (1..m.len()).map(|j| m[j - 1][j]).collect()
    }

    pub fn n_undressed(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.n_undressed).collect()
    }

    pub fn n_dressed(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.n_dressed).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn step(solver: &FiberSolver, p: &[f64], mu: f64, opts: &FlowOptions) -> Result<(FlowStep, Vec<f64>, Vec<f64>), FlowError> {
    let space = &solver.space;
    let rec = solver.ground_state(p, mu);
    let spec = solver.spec_at(p, mu);
    let gradient = hellmann_feynman_gradient(space, &spec, &rec)?;
    let dressing = dressing_function(&space.grid, &spec, &gradient, mu)?;
    let t = assemble_transformed(space, &spec, &dressing.values)?;
    let frame = ground_state(&t, p, mu, &solver.opts);
    let (w, lost) = weyl_apply_projected(&space.basis, &space.grid, &dressing.values, &rec.psi);
    let wn = dot(&w, &w);
    let mut tw = vec![0.0; w.len()];
    t.apply(&w, &mut tw);
    let energy_consistency = dot(&w, &tw) / wn - rec.energy;
    let weights = sector_weights(&space.basis, &frame.psi);
    let s = FlowStep {
        mu,
        gradient,
        n_undressed: number_expectation(&space.basis, &rec.psi),
        n_dressed: number_expectation(&space.basis, &frame.psi),
        n_weyl: number_expectation(&space.basis, &w) / wn,
        leakage: lost,
        leakage_flag: lost > opts.max_leakage,
        energy_consistency,
        frame_energy_shift: frame.energy - rec.energy,
        top_weight_frame: weights[space.basis.cutoff()],
        sector_weights_frame: weights,
        dressing,
        ground: (*rec).clone(),
        frame: frame.clone(),
    };
    Ok((s, rec.psi.clone(), frame.psi))
}

fn symmetric(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Vec<Vec<f64>> {
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|k| if k > j { f(j, k) } else { 0.0 }).collect())
        .collect();
    (0..n)
        .map(|j| (0..n).map(|k| if k > j { upper[j][k] } else if k < j { upper[k][j] } else { 0.0 }).collect())
        .collect()
}

/// Mass flow of the ground state at fixed P and of its dressed frame.
///
/// The dressing at each mass is g_μ = f_{∇E_μ(P), μ} with the
/// Hellmann–Feynman gradient at that mass. The dressed state is taken as
/// the ground state of T(P, g_μ) compressed to the truncation: W(g_μ)ψ_μ
/// itself carries a coherent cloud that no fixed cutoff holds once ‖g_μ‖
/// grows, while T(P, g_μ) is unitarily equivalent to H(P) and its ground
/// state stays inside the truncation. W(g_μ)ψ_μ is evaluated exactly on the
/// low sectors for the leakage, overlap and energy diagnostics.
pub fn dressed_flow(solver: &FiberSolver, p: &[f64], schedule: &[f64], opts: &FlowOptions) -> Result<DressedFlowRecord, FlowError> {
    let mut mus = schedule.to_vec();
    mus.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let results: Result<Vec<_>, FlowError> = mus.par_iter().map(|&mu| step(solver, p, mu, opts)).collect();
    let results = results?;
    let mut steps = Vec::new();
    let mut psi = Vec::new();
    let mut phi = Vec::new();
    for (s, a, b) in results {
        steps.push(s);
        psi.push(a);
        phi.push(b);
    }
    let n = steps.len();
    let dressed_distances = symmetric(n, |j, k| distance(&phi[j], &phi[k]));
    let undressed_distances = symmetric(n, |j, k| distance(&psi[j], &psi[k]));
    let basis = &solver.space.basis;
    let grid = &solver.space.grid;
    let weyl_distances = symmetric(n, |j, k| {
        let diff: OneBosonFunction<f64> = steps[k].dressing.values.sub(&steps[j].dressing.values);
        let (wk, _) = weyl_apply_projected(basis, grid, &diff, &psi[k]);
        (2.0 - 2.0 * dot(&psi[j], &wk)).max(0.0).sqrt()
    });
    if !opts.keep_states {
        psi.clear();
        phi.clear();
    }
    Ok(DressedFlowRecord {
        momentum: p.to_vec(),
        schedule: mus,
        steps,
        dressed_distances,
        undressed_distances,
        weyl_distances,
        psi,
        phi,
    })
}

/// Relative spread (max − min)/mean of the last `count` entries.
pub fn relative_variation(values: &[f64], count: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(count)..];
    if tail.is_empty() {
        return 0.0;
    }
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    if mean == 0.0 {
        0.0
    } else {
        (max - min) / mean.abs()
    }
}

/// True when every consecutive entry is at most its predecessor plus `tol`.
pub fn nonincreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + tol)
}
