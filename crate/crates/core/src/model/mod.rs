//! Dispersion relations, form factors and assembly of the fiber operators.

mod hamiltonian;
mod hypotheses;
mod transformed;

pub use hamiltonian::{assemble_hamiltonian, hamiltonian_diagonal, interaction, with_interaction};
pub use hypotheses::{check_hypotheses, HypothesisCheck, HypothesisReport};
pub use transformed::{assemble_transformed, Kinetic, TransformedOperator};

use serde::{Deserialize, Serialize};

use crate::fock::{field_momentum_diagonals, FockBasis, FockError, ModeGrid, OneBosonFunction};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("boson mass 0 with smallest grid energy {min_omega:.3e} below the shift tolerance {tol:.1e}")]
    MassUnderflow { min_omega: f64, tol: f64 },
    #[error("dressing momentum |Q| = {0} must be below 1")]
    QOutsideBall(f64),
    #[error("momentum has {got} components, the grid has dimension {want}")]
    Dimension { got: usize, want: usize },
    #[error("dense square root needs a basis of at most {limit} states, got {size}")]
    DenseLimit { size: usize, limit: usize },
    #[error("kinetic square is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("hypothesis H4 violated: need 2*alpha + d - 1 > 0, got alpha = {alpha}, d = {d}")]
    SquareIntegrability { alpha: f64, d: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispersionKind {
    #[serde(rename = "nr")]
    Nonrelativistic,
    #[serde(rename = "sr")]
    Semirelativistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleDispersion {
    pub kind: DispersionKind,
    pub mass: f64,
}

impl ParticleDispersion {
    pub fn nonrelativistic(mass: f64) -> Self {
        Self {
            kind: DispersionKind::Nonrelativistic,
            mass,
        }
    }

    pub fn semirelativistic(mass: f64) -> Self {
        Self {
            kind: DispersionKind::Semirelativistic,
            mass,
        }
    }

    pub fn inv_two_mass(&self) -> f64 {
        0.5 / self.mass
    }

    pub fn theta(&self, p: &[f64]) -> f64 {
        let p2: f64 = p.iter().map(|x| x * x).sum();
        match self.kind {
            DispersionKind::Nonrelativistic => p2 * self.inv_two_mass(),
            DispersionKind::Semirelativistic => (self.mass * self.mass + p2).sqrt(),
        }
    }

    /// ∂_axis Θ(p).
    pub fn theta_derivative(&self, p: &[f64], axis: usize) -> f64 {
        match self.kind {
            DispersionKind::Nonrelativistic => p[axis] / self.mass,
            DispersionKind::Semirelativistic => p[axis] / self.theta(p),
        }
    }

    /// Half the supremum of the Hessian norm of Θ.
    pub fn c_theta2(&self) -> f64 {
        self.inv_two_mass()
    }

    /// Constants in |∇Θ| ≤ C₁₁ + C₁₂ Θ.
    pub fn c_theta1(&self) -> (f64, f64) {
        match self.kind {
            DispersionKind::Nonrelativistic => (self.inv_two_mass(), 1.0),
            DispersionKind::Semirelativistic => (1.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BosonDispersion {
    pub mu: f64,
}

impl BosonDispersion {
    pub fn omega_abs(&self, r: f64) -> f64 {
        (r * r + self.mu * self.mu).sqrt()
    }

    pub fn omega(&self, k: &[f64]) -> f64 {
        (k.iter().map(|x| x * x).sum::<f64>() + self.mu * self.mu).sqrt()
    }

    pub fn on_grid(&self, grid: &ModeGrid<f64>) -> OneBosonFunction<f64> {
        grid.function(|k| self.omega(k))
    }

    /// max_k |k|/ω(k) over the grid.
    pub fn c_omega(&self, grid: &ModeGrid<f64>) -> f64 {
        (0..grid.len())
            .map(|i| grid.abs_k(i) / self.omega(grid.mode(i)))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormFactor {
    pub coupling: f64,
    pub alpha: f64,
    pub cutoff: f64,
}

impl FormFactor {
    pub fn value_abs(&self, r: f64) -> f64 {
        if r <= self.cutoff {
            self.coupling * r.powf(self.alpha)
        } else {
            0.0
        }
    }

    pub fn value(&self, k: &[f64]) -> f64 {
        self.value_abs(k.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    pub fn on_grid(&self, grid: &ModeGrid<f64>) -> OneBosonFunction<f64> {
        grid.function(|k| self.value(k))
    }

    /// ω^{-1/2} v ∈ L² near the origin.
    pub fn square_integrable(&self, d: usize) -> bool {
        2.0 * self.alpha + d as f64 - 1.0 > 0.0
    }

    /// ω^{-1} v ∉ L².
    pub fn infrared_critical(&self, d: usize) -> bool {
        2.0 * self.alpha + d as f64 - 2.0 <= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dispersion: ParticleDispersion,
    pub boson: BosonDispersion,
    pub form_factor: FormFactor,
    pub momentum: Vec<f64>,
}

impl ModelSpec {
    pub fn with_momentum(&self, p: &[f64]) -> Self {
        Self {
            momentum: p.to_vec(),
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self {
            boson: BosonDispersion { mu },
            ..self.clone()
        }
    }

    pub fn with_coupling(&self, coupling: f64) -> Self {
        let mut s = self.clone();
        s.form_factor.coupling = coupling;
        s
    }

    pub fn validate(&self, grid: &ModeGrid<f64>) -> Result<(), ModelError> {
        if self.momentum.len() != grid.dimension() {
            return Err(ModelError::Dimension {
                got: self.momentum.len(),
                want: grid.dimension(),
            });
        }
        if !self.form_factor.square_integrable(grid.dimension()) {
            return Err(ModelError::SquareIntegrability {
                alpha: self.form_factor.alpha,
                d: grid.dimension(),
            });
        }
        Ok(())
    }
}

/// Grid, truncated basis, and the diagonals shared by every operator.
#[derive(Clone, Debug)]
pub struct FockSpace {
    pub grid: ModeGrid<f64>,
    pub basis: FockBasis,
    /// Basis with cutoff one higher, needed for exact compressions of
    /// quadratic expressions in field operators.
    pub extended: Option<FockBasis>,
    pf: Vec<Vec<f64>>,
}

impl FockSpace {
    pub fn new(grid: ModeGrid<f64>, cutoff: usize, limit: usize) -> Result<Self, ModelError> {
        let basis = FockBasis::enumerate_with_limit(grid.len(), cutoff, limit)?;
        let pf = field_momentum_diagonals(&basis, &grid);
        Ok(Self {
            grid,
            basis,
            extended: None,
            pf,
        })
    }

    pub fn with_extension(mut self, limit: usize) -> Result<Self, ModelError> {
        self.extended = Some(FockBasis::enumerate_with_limit(
            self.grid.len(),
            self.basis.cutoff() + 1,
            limit,
        )?);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Field momentum diagonals, one per axis.
    pub fn field_momentum(&self) -> &[Vec<f64>] {
        &self.pf
    }

    /// Total mode momentum of state `s`.
    pub fn state_momentum(&self, s: usize) -> Vec<f64> {
        self.pf.iter().map(|d| d[s]).collect()
    }
}

/// f_{Q,μ} with its norms.
#[derive(Clone, Debug, Serialize)]
pub struct DressingFunction {
    pub q: Vec<f64>,
    pub mu: f64,
    pub values: OneBosonFunction<f64>,
    pub norm_w: f64,
    pub norm_sharp: f64,
    /// μ = 0: defined on the grid only because the origin is excluded.
    pub formal: bool,
}

/// ‖f‖_W with the model's boson dispersion and form factor. The coupling
/// term enters as |s(f, v)| so that ‖f − g‖_W is a distance.
pub fn norm_w(grid: &ModeGrid<f64>, spec: &ModelSpec, f: &OneBosonFunction<f64>) -> f64 {
    let weighted = |w: &dyn Fn(usize) -> f64| -> f64 {
        (0..grid.len())
            .map(|i| grid.weight(i) * (w(i) * f.values()[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let om = |i: usize| spec.boson.omega(grid.mode(i));
    let v = spec.form_factor.on_grid(grid);
    weighted(&om)
        + weighted(&|i| om(i).sqrt())
        + weighted(&|i| grid.abs_k(i))
        + weighted(&|i| grid.abs_k(i).sqrt())
        + grid.inner(f, &v).abs()
}

/// ‖f‖_# for the model's dispersion kind.
pub fn norm_sharp(grid: &ModeGrid<f64>, spec: &ModelSpec, f: &OneBosonFunction<f64>) -> f64 {
    let base = norm_w(grid, spec, f);
    match spec.dispersion.kind {
        DispersionKind::Nonrelativistic => base,
        DispersionKind::Semirelativistic => {
            let extra: f64 = (0..grid.len())
                .map(|i| {
                    let r = grid.abs_k(i);
                    grid.weight(i) * (r.powf(1.5).max(r * r) * f.values()[i]).powi(2)
                })
                .sum();
            base + extra.sqrt()
        }
    }
}

/// f_{Q,μ}(k) = v(k)/(ω_μ(k) − k·Q).
pub fn dressing_function(grid: &ModeGrid<f64>, spec: &ModelSpec, q: &[f64], mu: f64) -> Result<DressingFunction, ModelError> {
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(qn < 1.0) {
        return Err(ModelError::QOutsideBall(qn));
    }
    if q.len() != grid.dimension() {
        return Err(ModelError::Dimension {
            got: q.len(),
            want: grid.dimension(),
        });
    }
    let om = BosonDispersion { mu };
    let values = grid.function(|k| {
        let kq: f64 = k.iter().zip(q).map(|(a, b)| a * b).sum();
        spec.form_factor.value(k) / (om.omega(k) - kq)
    });
    Ok(DressingFunction {
        q: q.to_vec(),
        mu,
        norm_w: norm_w(grid, spec, &values),
        norm_sharp: norm_sharp(grid, spec, &values),
        values,
        formal: mu == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ModelSpec {
        ModelSpec {
            dispersion: ParticleDispersion::nonrelativistic(1.0),
            boson: BosonDispersion { mu: 0.3 },
            form_factor: FormFactor {
                coupling: 1.0,
                alpha: 0.0,
                cutoff: 10.0,
            },
            momentum: vec![0.0],
        }
    }

    #[test]
    fn dressing_arithmetic() {
        // k = 0.5, ω_μ(0.5) = √(0.25 + 0.11) = 0.6, v = 1, Q = 0.4 → 2.5
        let grid = ModeGrid::build(1, 1.0, 2).unwrap();
        let mu = 0.11f64.sqrt();
        let f = dressing_function(&grid, &spec(), &[0.4], mu).unwrap();
        let i = (0..2).find(|&i| grid.mode(i)[0] > 0.0).unwrap();
        assert!((f.values.values()[i] - 2.5).abs() < 1e-14);
        assert!(dressing_function(&grid, &spec(), &[1.0], mu).is_err());
    }

    #[test]
    fn dressing_at_zero_q_is_v_over_omega() {
        let grid = ModeGrid::build(1, 2.0, 8).unwrap();
        let s = spec();
        let f = dressing_function(&grid, &s, &[0.0], 0.2).unwrap();
        for i in 0..grid.len() {
            let want = s.form_factor.value(grid.mode(i)) / BosonDispersion { mu: 0.2 }.omega(grid.mode(i));
            assert!((f.values.values()[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn windows_and_flags() {
        let mut v = spec().form_factor;
        v.alpha = 0.25;
        assert!(v.square_integrable(1) && v.infrared_critical(1));
        v.alpha = 0.75;
        assert!(!v.infrared_critical(1));
        v.alpha = -0.1;
        assert!(!v.square_integrable(1));
    }
}
