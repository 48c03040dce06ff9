use serde::Serialize;

use crate::fock::{annihilator_slices, sector_weights, FockBasis, ModeGrid};
use crate::infrared::DressedFlowRecord;
use crate::linalg::{distance, norm};
use crate::model::{BosonDispersion, ModelSpec};

#[derive(Clone, Debug, Serialize)]
pub struct ShiftEntry {
    /// Excluded ball radius 1/n.
    pub n: usize,
    pub axis: usize,
    pub steps: usize,
    /// Largest value over the schedule.
    pub value: f64,
    pub per_mu: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompactnessDiagnostics {
    /// ‖a(k_i)Φ_μ‖ per μ and mode.
    pub slice_norms: Vec<Vec<f64>>,
    /// Smallest C_μ with ‖a(k)Φ_μ‖ ≤ C_μ(1 + ω_μ^{-1/2})|v| per μ.
    pub majorant: Vec<f64>,
    /// The same fit for the undressed ψ_μ.
    pub majorant_undressed: Vec<f64>,
    pub majorant_max: f64,
    /// max |C_μ − mean|/mean.
    pub majorant_spread: f64,
    pub shifts: Vec<ShiftEntry>,
    /// True when the two-step shift dominates the one-step shift for every
    /// ball and axis.
    pub shift_monotone: bool,
    /// Largest n for which the ball B_{1/n} still contains a grid mode.
    pub effective_n: usize,
    /// Σ_{s ≥ s0} ‖Φ^(s)‖² per μ and s0.
    pub tails: Vec<Vec<f64>>,
    /// 10·C²‖(1 + ω^{-1/2})v‖²/(N − 1) per μ.
    pub tail_bounds: Vec<f64>,
    pub tail_holds: bool,
}

fn majorant(grid: &ModeGrid<f64>, slices: &[f64], v: &[f64], mu: f64) -> f64 {
    let om = BosonDispersion { mu };
    (0..grid.len())
        .map(|i| {
            if v[i] != 0.0 {
                slices[i] / ((1.0 + om.omega(grid.mode(i)).powf(-0.5)) * v[i].abs())
            } else if slices[i] > 1e-12 {
                // no finite constant covers a slice where v vanishes
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Diagnostics of the dressed flow: a square-integrable majorant of the
/// pointwise annihilators, translation continuity off small balls, and
/// uniform sector tails.
pub fn compactness_diagnostics(flow: &DressedFlowRecord, basis: &FockBasis, grid: &ModeGrid<f64>, spec: &ModelSpec) -> CompactnessDiagnostics {
    let v = spec.form_factor.on_grid(grid);
    let mut slice_norms = Vec::new();
    let mut all_slices = Vec::new();
    let mut maj = Vec::new();
    let mut maj_u = Vec::new();
    for (j, &mu) in flow.schedule.iter().enumerate() {
        let slices = annihilator_slices(basis, grid, &flow.phi[j]);
        let norms: Vec<f64> = slices.iter().map(|s| norm(s)).collect();
        maj.push(majorant(grid, &norms, v.values(), mu));
        let su: Vec<f64> = annihilator_slices(basis, grid, &flow.psi[j]).iter().map(|s| norm(s)).collect();
        maj_u.push(majorant(grid, &su, v.values(), mu));
        slice_norms.push(norms);
        all_slices.push(slices);
    }
    let mean = maj.iter().sum::<f64>() / maj.len().max(1) as f64;
    let spread = if mean > 0.0 {
        maj.iter().map(|c| (c - mean).abs() / mean).fold(0.0, f64::max)
    } else {
        0.0
    };
    let cmax = maj.iter().copied().fold(0.0, f64::max);

    let kmin = (0..grid.len()).map(|i| grid.abs_k(i)).fold(f64::INFINITY, f64::min);
    let effective_n = if kmin > 0.0 { (1.0 / kmin).floor() as usize } else { 0 };
    let mut shifts = Vec::new();
    let mut shift_monotone = true;
    let ns: Vec<usize> = [1usize, 2, 4].iter().copied().filter(|&n| n <= effective_n.max(1)).collect();
    for &n in &ns {
        let r = 1.0 / n as f64;
        for axis in 0..grid.dimension() {
            let mut pair = [0.0; 2];
            for (si, steps) in [1usize, 2].iter().enumerate() {
                let per_mu: Vec<f64> = all_slices
                    .iter()
                    .map(|slices| {
                        (0..grid.len())
                            .filter(|&i| grid.abs_k(i) > r)
                            .filter_map(|i| grid.shifted(i, axis, *steps as isize).map(|t| (i, t)))
                            .map(|(i, t)| grid.weight(i) * distance(&slices[t], &slices[i]).powi(2))
                            .sum()
                    })
                    .collect();
                let value = per_mu.iter().copied().fold(0.0, f64::max);
                pair[si] = value;
                shifts.push(ShiftEntry {
                    n,
                    axis,
                    steps: *steps,
                    value,
                    per_mu,
                });
            }
            if pair[0] > pair[1] {
                shift_monotone = false;
            }
        }
    }

    let nmax = basis.cutoff();
    let tails: Vec<Vec<f64>> = flow
        .phi
        .iter()
        .map(|phi| {
            let w = sector_weights(basis, phi);
            (0..=nmax).map(|s0| w[s0..].iter().sum()).collect()
        })
        .collect();
    let tail_bounds: Vec<f64> = flow
        .schedule
        .iter()
        .map(|&mu| {
            let om = BosonDispersion { mu };
            let weighted: f64 = (0..grid.len())
                .map(|i| grid.weight(i) * ((1.0 + om.omega(grid.mode(i)).powf(-0.5)) * v.values()[i]).powi(2))
                .sum();
            if nmax >= 2 {
                10.0 * cmax * cmax * weighted / (nmax - 1) as f64
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let tail_holds = nmax >= 2 && tails.iter().zip(&tail_bounds).all(|(t, b)| t[nmax - 1] < *b);
    CompactnessDiagnostics {
        slice_norms,
        majorant: maj,
        majorant_undressed: maj_u,
        majorant_max: cmax,
        majorant_spread: spread,
        shifts,
        shift_monotone,
        effective_n,
        tails,
        tail_bounds,
        tail_holds,
    }
}
