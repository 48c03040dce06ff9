//! Ground states, resolvent solves and the derivative formulas of the mass
//! shell.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::fock::FockError;
use crate::linalg::{conjugate_gradient, dot, lanczos_lowest, CgOptions, CsrMatrix, LanczosOptions, LinearOperator, Shifted};
use crate::model::{hamiltonian_diagonal, interaction, with_interaction, BosonDispersion, FockSpace, FormFactor, ModelError, ModelSpec};

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("degenerate ground state (gap {0:.3e}); uniqueness based quantities are undefined")]
    Degenerate(f64),
    #[error("gap condition E(P-k) + omega(k) > E(P) fails at mode {mode}: lower bound {lower:.6e}")]
    Indefinite { mode: usize, lower: f64 },
    #[error("conjugate gradients stalled at relative residual {0:.3e}")]
    CgFailed(f64),
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub lanczos: LanczosOptions<f64>,
    pub cg: CgOptions<f64>,
    /// Gaps below this count as degenerate.
    pub degenerate_gap: f64,
    /// Relative residual target for energy-only solves. The eigenvalue error
    /// is quadratic in the residual, so this is far looser than the state
    /// tolerance.
    pub energy_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            lanczos: LanczosOptions::default(),
            cg: CgOptions::default(),
            degenerate_gap: 1e-10,
            energy_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateRecord {
    pub momentum: Vec<f64>,
    pub mu: f64,
    pub energy: f64,
    #[serde(skip)]
    pub psi: Vec<f64>,
    pub gap: f64,
    pub residual: f64,
    pub norm_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
}

impl GroundStateRecord {
    pub fn require_simple(&self) -> Result<(), SpectralError> {
        if self.degenerate {
            Err(SpectralError::Degenerate(self.gap))
        } else {
            Ok(())
        }
    }
}

/// Vacuum component nonnegative; if it vanishes, the first coefficient above
/// 1e-12 in basis order is made positive.
pub fn fix_sign(psi: &mut [f64]) {
    let pivot = if psi.first().map_or(false, |c| c.abs() >= 1e-12) {
        psi[0]
    } else {
        psi.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0)
    };
    if pivot < 0.0 {
        psi.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Lowest eigenpair with the sign convention of [`fix_sign`].
pub fn ground_state<A: LinearOperator<f64> + ?Sized>(
    op: &A,
    momentum: &[f64],
    mu: f64,
    opts: &SolverOptions,
) -> GroundStateRecord {
    let r = lanczos_lowest(op, None, &opts.lanczos);
    let mut psi = r.eigenvector;
    fix_sign(&mut psi);
    let gap = if r.eigenvalues.len() > 1 {
        r.eigenvalues[1] - r.eigenvalues[0]
    } else {
        f64::INFINITY
    };
    GroundStateRecord {
        momentum: momentum.to_vec(),
        mu,
        energy: r.rayleigh,
        psi,
        gap,
        residual: r.residual,
        norm_estimate: r.norm_estimate,
        iterations: r.iterations,
        converged: r.converged,
        degenerate: gap < opts.degenerate_gap,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SignPatternReport {
    pub holds: bool,
    pub skipped: bool,
    /// Basis index and coefficient of the worst violation.
    pub worst: Option<(usize, f64)>,
}

/// Checks that sector-n coefficients carry the sign (−1)^n and that states
/// occupying modes where v vanishes carry no weight.
pub fn sign_pattern_check(space: &FockSpace, rec: &GroundStateRecord, v: &FormFactor) -> SignPatternReport {
    if rec.degenerate {
        return SignPatternReport {
            holds: false,
            skipped: true,
            worst: None,
        };
    }
    let vanishes: Vec<bool> = (0..space.grid.len())
        .map(|i| v.value(space.grid.mode(i)) == 0.0)
        .collect();
    let mut worst: Option<(usize, f64)> = None;
    let record = |s: usize, c: f64, w: &mut Option<(usize, f64)>| {
        if w.map_or(true, |(_, b)| c.abs() > b.abs()) {
            *w = Some((s, c));
        }
    };
    for (s, &c) in rec.psi.iter().enumerate() {
        if c.abs() <= 1e-9 {
            continue;
        }
        let dead = space.basis.occupied(s).any(|(i, _)| vanishes[i]);
        let sign = if space.basis.total(s) % 2 == 0 { 1.0 } else { -1.0 };
        if dead || c * sign < 0.0 {
            record(s, c, &mut worst);
        }
    }
    SignPatternReport {
        holds: worst.is_none(),
        skipped: false,
        worst,
    }
}

/// ∂_iE = ⟨ψ, ∂_iΘ(P − P_f) ψ⟩ per axis.
pub fn hellmann_feynman_gradient(space: &FockSpace, spec: &ModelSpec, rec: &GroundStateRecord) -> Result<Vec<f64>, SpectralError> {
    rec.require_simple()?;
    let d = space.grid.dimension();
    Ok((0..d).map(|a| dot(&theta_derivative_diagonal(space, spec, a), &square(&rec.psi))).collect())
}

fn square(x: &[f64]) -> Vec<f64> {
    x.iter().map(|c| c * c).collect()
}

/// ∂_iΘ(P − P_f) as a diagonal.
pub fn theta_derivative_diagonal(space: &FockSpace, spec: &ModelSpec, axis: usize) -> Vec<f64> {
    let d = space.grid.dimension();
    let mut p = vec![0.0; d];
    (0..space.dim())
        .map(|s| {
            for (a, pa) in p.iter_mut().enumerate() {
                *pa = spec.momentum[a] - space.field_momentum()[a][s];
            }
            spec.dispersion.theta_derivative(&p, axis)
        })
        .collect()
}

struct CacheKey(Vec<u64>);

impl CacheKey {
    fn new(p: &[f64], mu: f64, cutoff: usize) -> Self {
        let mut k: Vec<u64> = p.iter().map(|x| canonical(*x)).collect();
        k.push(canonical(mu));
        k.push(cutoff as u64);
        Self(k)
    }
}

fn canonical(x: f64) -> u64 {
    // −0 and +0 describe the same fiber
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

/// Ground-state solver for one model at varying total momentum and boson
/// mass. φ(v) is assembled once; records are cached by (P, μ).
pub struct FiberSolver {
    pub space: Arc<FockSpace>,
    /// Template; momentum and boson mass are overridden per solve.
    pub spec: ModelSpec,
    pub opts: SolverOptions,
    phi_v: CsrMatrix<f64>,
    cache: Mutex<HashMap<Vec<u64>, Arc<GroundStateRecord>>>,
    energies: Mutex<HashMap<Vec<u64>, f64>>,
}

impl FiberSolver {
    pub fn new(space: Arc<FockSpace>, spec: ModelSpec, opts: SolverOptions) -> Result<Self, SpectralError> {
        spec.validate(&space.grid)?;
        let phi_v = interaction(&space, &spec);
        Ok(Self {
            space,
            spec,
            opts,
            phi_v,
            cache: Mutex::new(HashMap::new()),
            energies: Mutex::new(HashMap::new()),
        })
    }

    pub fn spec_at(&self, p: &[f64], mu: f64) -> ModelSpec {
        self.spec.with_momentum(p).with_mu(mu)
    }

    pub fn hamiltonian(&self, p: &[f64], mu: f64) -> CsrMatrix<f64> {
        with_interaction(&self.phi_v, &hamiltonian_diagonal(&self.space, &self.spec_at(p, mu)))
    }

    /// H(P) compressed to total boson number at most `n`, a leading block.
    pub fn hamiltonian_truncated(&self, p: &[f64], mu: f64, n: usize) -> CsrMatrix<f64> {
        let len = self.space.basis.prefix_len(n as isize);
        let h = self.hamiltonian(p, mu);
        h.block(0..len, 0..len)
    }

    pub fn ground_state(&self, p: &[f64], mu: f64) -> Arc<GroundStateRecord> {
        let key = CacheKey::new(p, mu, self.space.basis.cutoff()).0;
        if let Some(r) = self.cache.lock().unwrap().get(&key) {
            return r.clone();
        }
        let h = self.hamiltonian(p, mu);
        let rec = Arc::new(ground_state(&h, p, mu, &self.opts));
        self.cache.lock().unwrap().entry(key).or_insert(rec).clone()
    }

    /// Lowest eigenvalue only, from its own cache so that the value never
    /// depends on which full records happen to exist.
    pub fn energy(&self, p: &[f64], mu: f64) -> f64 {
        let key = CacheKey::new(p, mu, self.space.basis.cutoff()).0;
        if let Some(e) = self.energies.lock().unwrap().get(&key) {
            return *e;
        }
        let h = self.hamiltonian(p, mu);
        let opts = LanczosOptions {
            nev: 1,
            tol: self.opts.energy_tol,
            ..self.opts.lanczos.clone()
        };
        let e = lanczos_lowest(&h, None, &opts).rayleigh;
        *self.energies.lock().unwrap().entry(key).or_insert(e)
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// (H_n(P − k_i) − E_ref + ω(k_i))^{-1} x by Jacobi-preconditioned CG,
    /// with `n` the boson cutoff of the block (the full cutoff if `None`).
    ///
    /// Positive definiteness is certified before solving: by interlacing the
    /// smallest eigenvalue of any leading block is at least E(P − k_i), so the
    /// shifted operator is bounded below by E(P − k_i) − E_ref + ω(k_i).
    pub fn resolvent_apply(&self, p: &[f64], mu: f64, mode: usize, e_ref: f64, x: &[f64], n: Option<usize>) -> Result<ResolventSolve, SpectralError> {
        let k = self.space.grid.mode(mode);
        let shifted_p: Vec<f64> = p.iter().zip(k).map(|(a, b)| a - b).collect();
        let omega = BosonDispersion { mu }.omega(k);
        let lower = self.energy(&shifted_p, mu) - e_ref + omega;
        if !(lower > 0.0) {
            return Err(SpectralError::Indefinite { mode, lower });
        }
        let h = match n {
            Some(n) => self.hamiltonian_truncated(&shifted_p, mu, n),
            None => self.hamiltonian(&shifted_p, mu),
        };
        assert_eq!(h.nrows(), x.len());
        let op = Shifted { op: &h, shift: e_ref - omega };
        let inv: Vec<f64> = h.diagonal().iter().map(|d| 1.0 / (d - e_ref + omega)).collect();
        let r = conjugate_gradient(&op, x, &self.opts.cg, Some(&inv), None);
        if !r.converged {
            return Err(SpectralError::CgFailed(r.relative_residual));
        }
        Ok(ResolventSolve {
            x: r.x,
            lower_bound: lower,
            relative_residual: r.relative_residual,
            iterations: r.iterations,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ResolventSolve {
    pub x: Vec<f64>,
    /// Certified lower bound of the shifted operator.
    pub lower_bound: f64,
    pub relative_residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondDerivative {
    pub axis: usize,
    /// 2C_Θ2 − 2⟨r, (H − E)^{-1} r⟩
    pub bound: f64,
    /// Richardson-extrapolated central second difference.
    pub fd_value: f64,
    pub fd_step: f64,
    pub resolvent_term: f64,
    pub cg_residual: f64,
}

impl SecondDerivative {
    pub fn margin(&self) -> f64 {
        self.bound - self.fd_value
    }
}

/// Upper bound on ∂_i²E from second-order perturbation theory, together with
/// the finite-difference value it bounds.
pub fn second_derivative_bound(solver: &FiberSolver, rec: &GroundStateRecord, axis: usize, fd_step: f64) -> Result<SecondDerivative, SpectralError> {
    rec.require_simple()?;
    let space = &solver.space;
    let spec = solver.spec_at(&rec.momentum, rec.mu);
    let grad = hellmann_feynman_gradient(space, &spec, rec)?;
    let dtheta = theta_derivative_diagonal(space, &spec, axis);
    let r: Vec<f64> = rec.psi.iter().zip(&dtheta).map(|(c, t)| (t - grad[axis]) * c).collect();
    let h = solver.hamiltonian(&rec.momentum, rec.mu);
    let op = Shifted { op: &h, shift: rec.energy };
    let inv: Vec<f64> = h
        .diagonal()
        .iter()
        .map(|d| {
            let s = d - rec.energy;
            if s.abs() > 1e-3 {
                1.0 / s.abs()
            } else {
                1e3
            }
        })
        .collect();
    let sol = conjugate_gradient(&op, &r, &solver.opts.cg, Some(&inv), Some(&rec.psi));
    if !sol.converged {
        return Err(SpectralError::CgFailed(sol.relative_residual));
    }
    let term = dot(&r, &sol.x);
    // one estimator for all three energies, so their roundoff cancels
    let center = solver.energy(&rec.momentum, rec.mu);
    let second = |delta: f64| {
        let mut plus = rec.momentum.clone();
        plus[axis] += delta;
        let mut minus = rec.momentum.clone();
        minus[axis] -= delta;
        (solver.energy(&plus, rec.mu) - 2.0 * center + solver.energy(&minus, rec.mu)) / (delta * delta)
    };
    let fd_value = (4.0 * second(fd_step / 2.0) - second(fd_step)) / 3.0;
    Ok(SecondDerivative {
        axis,
        bound: 2.0 * spec.dispersion.c_theta2() - 2.0 * term,
        fd_value,
        fd_step,
        resolvent_term: term,
        cg_residual: sol.relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::ModeGrid;
    use crate::model::ParticleDispersion;

    fn spec(coupling: f64) -> ModelSpec {
        ModelSpec {
            dispersion: ParticleDispersion::nonrelativistic(1.0),
            boson: BosonDispersion { mu: 0.2 },
            form_factor: FormFactor {
                coupling,
                alpha: 0.25,
                cutoff: 2.0,
            },
            momentum: vec![0.3],
        }
    }

    fn solver(coupling: f64) -> FiberSolver {
        let grid = ModeGrid::build(1, 2.0, 6).unwrap();
        let space = Arc::new(FockSpace::new(grid, 3, 10_000).unwrap());
        FiberSolver::new(space, spec(coupling), SolverOptions::default()).unwrap()
    }

    #[test]
    fn free_fiber_has_vacuum_ground_state() {
        let s = solver(0.0);
        let r = s.ground_state(&[0.3], 0.2);
        assert!((r.energy - 0.045).abs() < 1e-14);
        assert!((r.psi[0] - 1.0).abs() < 1e-12);
        let g = hellmann_feynman_gradient(&s.space, &s.spec, &r).unwrap();
        assert!((g[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cache_is_keyed_by_fiber() {
        let s = solver(0.4);
        let a = s.ground_state(&[0.0], 0.2);
        let b = s.ground_state(&[-0.0], 0.2);
        assert!(Arc::ptr_eq(&a, &b));
        s.ground_state(&[0.0], 0.1);
        assert_eq!(s.cached(), 2);
    }

    #[test]
    fn sign_fix_rules() {
        let mut v = vec![-0.5, 0.1];
        fix_sign(&mut v);
        assert_eq!(v, vec![0.5, -0.1]);
        let mut w = vec![0.0, -1e-13, -0.3];
        fix_sign(&mut w);
        assert_eq!(w[2], 0.3);
    }

    #[test]
    fn resolvent_inverts_shifted_fiber() {
        let s = solver(0.5);
        let rec = s.ground_state(&[0.3], 0.2);
        let sol = s.resolvent_apply(&[0.3], 0.2, 1, rec.energy, &rec.psi, None).unwrap();
        let h = s.hamiltonian(&[0.3 - s.space.grid.mode(1)[0]], 0.2);
        let omega = BosonDispersion { mu: 0.2 }.omega(s.space.grid.mode(1));
        let mut y = h.apply(&sol.x);
        for (yi, xi) in y.iter_mut().zip(&sol.x) {
            *yi += (omega - rec.energy) * xi;
        }
        let err: f64 = y.iter().zip(&rec.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}
