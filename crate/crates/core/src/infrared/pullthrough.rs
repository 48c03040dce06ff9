use rayon::prelude::*;
use serde::Serialize;

use crate::fock::{annihilator_slice, sector_weights, weyl_apply_projected, OneBosonFunction};
use crate::linalg::{dot, norm};
use crate::massshell::DeltaP;
use crate::model::BosonDispersion;
use crate::spectral::{FiberSolver, GroundStateRecord, SpectralError};

#[derive(Clone, Debug, Serialize)]
pub struct PullThroughMode {
    pub mode: usize,
    pub k: Vec<f64>,
    /// ‖Π_guard (a(k)ψ + v(k) R ψ)‖ with R built on one boson fewer.
    pub residual: f64,
    /// Same with the resolvent of the full truncation, guard-projected.
    pub naive_guarded: f64,
    /// Same with the resolvent of the full truncation, no guard.
    pub naive_unguarded: f64,
    /// ‖a(k)ψ‖
    pub slice_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PullThroughReport {
    pub momentum: Vec<f64>,
    pub mu: f64,
    /// Largest boson number kept by the guard projection; negative when the
    /// guard is empty.
    pub guard: isize,
    pub top_weight: f64,
    pub modes: Vec<PullThroughMode>,
    pub max_residual: f64,
}

impl PullThroughReport {
    pub fn guard_empty(&self) -> bool {
        self.guard < 0
    }
}

fn guard_norm(x: &[f64], keep: usize) -> f64 {
    x[..keep].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Pull-through residual per mode.
///
/// On the truncated space a_i H_N(P) = (H_{N−1}(P − k_i) + ω_i) a_i + √Δk v_i Π_{N−1}
/// holds exactly, so with the resolvent of H_{N−1}(P − k_i) the identity
/// a(k)ψ = −v(k)R(P,k)ψ has no truncation error; the guard projection onto
/// at most N − 2 bosons is applied on top. The naive variants use the
/// resolvent of H_N(P − k) and are recorded for comparison.
pub fn pull_through_residual(solver: &FiberSolver, rec: &GroundStateRecord) -> Result<PullThroughReport, SpectralError> {
    rec.require_simple()?;
    let space = &solver.space;
    let basis = &space.basis;
    let n = basis.cutoff() as isize;
    let guard = n - 2;
    let keep = basis.prefix_len(guard);
    let low = basis.prefix_len(n - 1);
    let v = solver.spec.form_factor.on_grid(&space.grid);
    let modes: Result<Vec<PullThroughMode>, SpectralError> = (0..space.grid.len())
        .into_par_iter()
        .map(|i| {
            let slice = annihilator_slice(basis, &space.grid, &rec.psi, i);
            let vk = v.values()[i];
            let exact = if n >= 1 {
                let r = solver.resolvent_apply(&rec.momentum, rec.mu, i, rec.energy, &rec.psi[..low], Some((n - 1) as usize))?;
                let mut d = slice[..low].to_vec();
                d.iter_mut().zip(&r.x).for_each(|(a, b)| *a += vk * b);
                guard_norm(&d, keep)
            } else {
                0.0
            };
            let r = solver.resolvent_apply(&rec.momentum, rec.mu, i, rec.energy, &rec.psi, None)?;
            let d: Vec<f64> = slice.iter().zip(&r.x).map(|(a, b)| a + vk * b).collect();
            Ok(PullThroughMode {
                mode: i,
                k: space.grid.mode(i).to_vec(),
                residual: exact,
                naive_guarded: guard_norm(&d, keep),
                naive_unguarded: guard_norm(&d, low),
                slice_norm: norm(&slice),
            })
        })
        .collect();
    let modes = modes?;
    let w = sector_weights(basis, &rec.psi);
    Ok(PullThroughReport {
        momentum: rec.momentum.clone(),
        mu: rec.mu,
        guard,
        top_weight: w[basis.cutoff()],
        max_residual: modes.iter().map(|m| m.residual).fold(0.0, f64::max),
        modes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DressedPullThroughReport {
    pub momentum: Vec<f64>,
    pub mu: f64,
    pub guard: isize,
    /// Per mode ‖Π_guard (a(k)W(g)ψ − W(g)(−v(k)Rψ + g(k)ψ))‖.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Dressed pull-through a(k)W(g)ψ = W(g)(−v(k)R(P,k) + g(k))ψ.
///
/// Both sides only need Π_N W(g) applied to vectors in the truncated space,
/// which the normal-ordered Weyl action evaluates exactly.
pub fn dressed_pull_through(solver: &FiberSolver, rec: &GroundStateRecord, g: &OneBosonFunction<f64>) -> Result<DressedPullThroughReport, SpectralError> {
    rec.require_simple()?;
    let space = &solver.space;
    let basis = &space.basis;
    let grid = &space.grid;
    let n = basis.cutoff() as isize;
    let guard = n - 2;
    let keep = basis.prefix_len(guard);
    let low = basis.prefix_len(n - 1);
    let v = solver.spec.form_factor.on_grid(grid);
    let (dressed, _) = weyl_apply_projected(basis, grid, g, &rec.psi);
    let residuals: Result<Vec<f64>, SpectralError> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if n < 1 {
                return Ok(0.0);
            }
            let lhs = annihilator_slice(basis, grid, &dressed, i);
            let r = solver.resolvent_apply(&rec.momentum, rec.mu, i, rec.energy, &rec.psi[..low], Some((n - 1) as usize))?;
            let mut inner: Vec<f64> = rec.psi.iter().map(|c| g.values()[i] * c).collect();
            inner[..low].iter_mut().zip(&r.x).for_each(|(a, b)| *a -= v.values()[i] * b);
            let (rhs, _) = weyl_apply_projected(basis, grid, g, &inner);
            let d: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            Ok(guard_norm(&d, keep))
        })
        .collect();
    let residuals = residuals?;
    Ok(DressedPullThroughReport {
        momentum: rec.momentum.clone(),
        mu: rec.mu,
        guard,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AprioriMode {
    pub mode: usize,
    pub abs_k: f64,
    /// Smallest eigenvalue of H(P − k) − E(P) + ω(k).
    pub lambda_min: f64,
    /// ‖R(P,k)‖ divided by Δ_P/ω(k).
    pub ratio: f64,
    /// ‖a(k)ψ‖ divided by Δ_P|v(k)|/ω(k); zero where v vanishes.
    pub slice_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AprioriReport {
    pub delta_p: f64,
    pub modes: Vec<AprioriMode>,
    pub max_ratio: f64,
    pub max_slice_ratio: f64,
    /// Mode with the largest ‖R‖ω; the infrared modes are expected here.
    pub argmax_resolvent: usize,
}

/// ‖R(P,k)‖ ≤ Δ_P/ω(k) and the slice bound that follows from it.
///
/// ‖R(P,k)‖ is the inverse of the smallest eigenvalue of the shifted fiber,
/// which is E(P − k) − E(P) + ω(k) with E(P − k) from its own ground-state
/// solve.
pub fn apriori_bound_check(solver: &FiberSolver, rec: &GroundStateRecord, dp: &DeltaP) -> AprioriReport {
    let grid = &solver.space.grid;
    let om = BosonDispersion { mu: rec.mu };
    let v = solver.spec.form_factor.on_grid(grid);
    let mut modes = Vec::new();
    for i in 0..grid.len() {
        let w = om.omega(grid.mode(i));
        let lambda_min = dp.denominators[i];
        let ratio = (1.0 / lambda_min) / (dp.value / w);
        let slice = annihilator_slice(&solver.space.basis, grid, &rec.psi, i);
        let bound = dp.value * v.values()[i].abs() / w;
        let slice_ratio = if bound > 0.0 { norm(&slice) / bound } else { norm(&slice) };
        modes.push(AprioriMode {
            mode: i,
            abs_k: grid.abs_k(i),
            lambda_min,
            ratio,
            slice_ratio,
        });
    }
    let argmax_resolvent = (0..modes.len())
        .max_by(|&a, &b| {
            let ra = om.omega(grid.mode(a)) / modes[a].lambda_min;
            let rb = om.omega(grid.mode(b)) / modes[b].lambda_min;
            ra.partial_cmp(&rb).unwrap().then(b.cmp(&a))
        })
        .unwrap_or(0);
    AprioriReport {
        delta_p: dp.value,
        max_ratio: modes.iter().map(|m| m.ratio).fold(0.0, f64::max),
        max_slice_ratio: modes.iter().map(|m| m.slice_ratio).fold(0.0, f64::max),
        argmax_resolvent,
        modes,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventApproxMode {
    pub mode: usize,
    pub omega: f64,
    /// ‖(R(P,k) − 1/(ω − k·∇E))ψ‖
    pub left: f64,
    /// ‖R(P,k)ψ‖
    pub undressed: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResolventApproxReport {
    pub mu: f64,
    pub modes: Vec<ResolventApproxMode>,
    /// Smallest C with left ≤ C(1 + ω^{-1/2}) on every mode.
    pub c_fit: f64,
    /// left·ω on the modes of smallest |k|, which should be small.
    pub infrared_products: Vec<f64>,
    pub precondition: bool,
}

/// Resolvent approximation by the free propagator 1/(ω − k·∇E) on ψ.
pub fn resolvent_approx_check(solver: &FiberSolver, rec: &GroundStateRecord, grad: &[f64]) -> Result<ResolventApproxReport, SpectralError> {
    let grid = &solver.space.grid;
    let om = BosonDispersion { mu: rec.mu };
    let c_omega = om.c_omega(grid);
    let gn = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    let precondition = gn * c_omega < 1.0;
    let modes: Result<Vec<ResolventApproxMode>, SpectralError> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let k = grid.mode(i);
            let w = om.omega(k);
            let kq: f64 = k.iter().zip(grad).map(|(a, b)| a * b).sum();
            let free = 1.0 / (w - kq);
            let r = solver.resolvent_apply(&rec.momentum, rec.mu, i, rec.energy, &rec.psi, None)?;
            let d: Vec<f64> = r.x.iter().zip(&rec.psi).map(|(a, b)| a - free * b).collect();
            Ok(ResolventApproxMode {
                mode: i,
                omega: w,
                left: norm(&d),
                undressed: norm(&r.x),
            })
        })
        .collect();
    let modes = modes?;
    let c_fit = modes.iter().map(|m| m.left / (1.0 + m.omega.powf(-0.5))).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid.abs_k(a).partial_cmp(&grid.abs_k(b)).unwrap().then(a.cmp(&b)));
    let infrared_products = order.iter().take(2).map(|&i| modes[i].left * modes[i].omega).collect();
    Ok(ResolventApproxReport {
        mu: rec.mu,
        modes,
        c_fit,
        infrared_products,
        precondition,
    })
}

/// ⟨x, Π_N W(f) y⟩ for x, y in the truncated space.
pub fn weyl_overlap(solver: &FiberSolver, f: &OneBosonFunction<f64>, x: &[f64], y: &[f64]) -> f64 {
    let (wy, _) = weyl_apply_projected(&solver.space.basis, &solver.space.grid, f, y);
    dot(x, &wy)
}
