use serde::Serialize;

use crate::fock::{ModeGrid, OneBosonFunction};
use crate::linalg::{conjugate_gradient, lanczos_extremes, lanczos_lowest, CgOptions, FnOperator, LanczosOptions, LinearOperator, Shifted};
use crate::model::{assemble_transformed, norm_sharp, norm_w, BosonDispersion, FockSpace, ModelError, ModelSpec, TransformedOperator};

/// A dressing-type function c·v(k)/(ω_ν(k) − k·Q), fixed independently of
/// the grid so that refinements compare the same continuum pair.
#[derive(Clone, Debug, Serialize)]
pub struct DressingShape {
    pub scale: f64,
    pub q: Vec<f64>,
    pub nu: f64,
}

impl DressingShape {
    pub fn sample(&self, grid: &ModeGrid<f64>, spec: &ModelSpec) -> OneBosonFunction<f64> {
        let om = BosonDispersion { mu: self.nu };
        grid.function(|k| {
            let kq: f64 = k.iter().zip(&self.q).map(|(a, b)| a * b).sum();
            self.scale * spec.form_factor.value(k) / (om.omega(k) - kq)
        })
    }
}

/// `count` deterministic pairs with ‖·‖_# close to `target` on a fine
/// reference quadrature. Parameters follow additive golden-ratio sequences.
pub fn lipschitz_pairs(spec: &ModelSpec, k_max: f64, count: usize, target: f64) -> Result<Vec<(DressingShape, DressingShape)>, ModelError> {
    let d = spec.momentum.len();
    let reference = ModeGrid::build(d, k_max, if d == 1 { 2048 } else { 64 })?;
    let phi = 0.618_033_988_749_894_9_f64;
    let frac = |x: f64| x - x.floor();
    let shape = |t: f64, s: f64| -> DressingShape {
        let mut q = vec![0.0; d];
        q[0] = 0.6 * (2.0 * frac(t) - 1.0);
        let nu = 0.1 + 0.4 * frac(t * 1.7 + 0.3);
        let mut sh = DressingShape { scale: 1.0, q, nu };
        let n = norm_sharp(&reference, spec, &sh.sample(&reference, spec));
        sh.scale = target * (0.55 + 0.45 * frac(s)) / n;
        sh
    };
    Ok((0..count)
        .map(|j| {
            let a = (j as f64 + 1.0) * phi;
            let b = (j as f64 + 1.0) * phi * phi;
            (shape(a, b), shape(a + 0.5 * phi, b + 0.25))
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzPair {
    pub norm_f: f64,
    pub norm_g: f64,
    pub distance_w: f64,
    pub resolvent_difference: f64,
    pub ratio: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub modes: usize,
    pub dimension: usize,
    pub shift: f64,
    pub pairs: Vec<LipschitzPair>,
    /// Smallest K with ‖R_f − R_g‖ ≤ K‖f − g‖_W over all pairs.
    pub k_fit: f64,
}

#[derive(Clone, Debug)]
pub struct LipschitzOptions {
    pub cg: CgOptions<f64>,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for LipschitzOptions {
    fn default() -> Self {
        Self {
            cg: CgOptions {
                rel_tol: 1e-9,
                max_iter: 5000,
            },
            rel_tol: 1e-5,
            max_iter: 60,
        }
    }
}

fn solve(t: &TransformedOperator, z: f64, x: &[f64], inv: &[f64], opts: &CgOptions<f64>) -> Vec<f64> {
    let op = Shifted { op: t, shift: z };
    conjugate_gradient(&op, x, opts, Some(inv), None).x
}

/// Resolvent differences ‖(T(P,f) − z)^{-1} − (T(P,g) − z)^{-1}‖ at a real
/// shift z one below the lowest ground energy of the pair family.
pub fn resolvent_lipschitz(space: &FockSpace, spec: &ModelSpec, pairs: &[(DressingShape, DressingShape)], opts: &LipschitzOptions) -> Result<LipschitzReport, ModelError> {
    let grid = &space.grid;
    let mut assembled = Vec::new();
    let mut e_min = f64::INFINITY;
    for (a, b) in pairs {
        let f = a.sample(grid, spec);
        let g = b.sample(grid, spec);
        let tf = assemble_transformed(space, spec, &f)?;
        let tg = assemble_transformed(space, spec, &g)?;
        for t in [&tf, &tg] {
            let lo = lanczos_lowest(
                t,
                None,
                &LanczosOptions {
                    nev: 1,
                    tol: 1e-10,
                    ..LanczosOptions::default()
                },
            );
            e_min = e_min.min(lo.rayleigh);
        }
        assembled.push((f, g, tf, tg));
    }
    let z = e_min - 1.0;
    let mut out = Vec::new();
    for (f, g, tf, tg) in &assembled {
        let inv_f: Vec<f64> = tf.diagonal().unwrap().iter().map(|d| 1.0 / (d - z).max(1e-3)).collect();
        let inv_g: Vec<f64> = tg.diagonal().unwrap().iter().map(|d| 1.0 / (d - z).max(1e-3)).collect();
        let diff = FnOperator {
            dim: tf.dim(),
            f: |x: &[f64], y: &mut [f64]| {
                let a = solve(tf, z, x, &inv_f, &opts.cg);
                let b = solve(tg, z, x, &inv_g, &opts.cg);
                for ((yi, ai), bi) in y.iter_mut().zip(&a).zip(&b) {
                    *yi = ai - bi;
                }
            },
        };
        let ext = lanczos_extremes(&diff, opts.rel_tol, opts.max_iter, 0x11b5);
        let norm = ext.min.abs().max(ext.max.abs());
        let dist = norm_w(grid, spec, &f.sub(g));
        out.push(LipschitzPair {
            norm_f: norm_sharp(grid, spec, f),
            norm_g: norm_sharp(grid, spec, g),
            distance_w: dist,
            resolvent_difference: norm,
            ratio: norm / dist,
            converged: ext.converged,
        });
    }
    Ok(LipschitzReport {
        modes: grid.len(),
        dimension: space.dim(),
        shift: z,
        k_fit: out.iter().map(|p| p.ratio).fold(0.0, f64::max),
        pairs: out,
    })
}
