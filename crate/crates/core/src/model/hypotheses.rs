use serde::Serialize;

use crate::fock::ModeGrid;
use crate::model::{BosonDispersion, DispersionKind, ModelSpec};

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    /// Worst sampled margin; nonnegative when the check holds.
    pub margin: f64,
    pub witness: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    /// Sampled constant in |ω_μ(k+p) − ω_μ(k)| ≤ C |ω(k+p) − ω(k)|.
    pub omegadiff_constant: f64,
    pub infrared_critical: bool,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, margin: f64, tol: f64, witness: String) -> HypothesisCheck {
    HypothesisCheck {
        name: name.into(),
        holds: margin >= -tol,
        margin,
        witness,
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const TOL: f64 = 1e-12;

/// Samples each standing assumption on the grid. Pair sums are evaluated
/// analytically rather than snapped back onto the grid.
pub fn check_hypotheses(grid: &ModeGrid<f64>, spec: &ModelSpec, schedule: &[f64]) -> HypothesisReport {
    let d = grid.dimension();
    let theta = &spec.dispersion;
    let mut checks = Vec::new();

    // H1: gradient and Hessian bounds, sampled along rays up to a large radius.
    let (c11, c12) = theta.c_theta1();
    let mut grad_margin = f64::INFINITY;
    let mut hess_margin = f64::INFINITY;
    let mut worst_p = 0.0;
    for j in 0..=400 {
        let r = -50.0 + 0.25 * j as f64;
        let mut p = vec![0.0; d];
        p[0] = r;
        let g: f64 = (0..d).map(|a| theta.theta_derivative(&p, a).powi(2)).sum::<f64>().sqrt();
        let m = c11 + c12 * theta.theta(&p) - g;
        if m < grad_margin {
            grad_margin = m;
            worst_p = r;
        }
        // largest Hessian eigenvalue, in closed form for both kinds
        let second = match theta.kind {
            DispersionKind::Nonrelativistic => 1.0 / theta.mass,
            DispersionKind::Semirelativistic => 1.0 / theta.theta(&p),
        };
        hess_margin = hess_margin.min(2.0 * theta.c_theta2() - second);
    }
    checks.push(check(
        "H1",
        grad_margin.min(hess_margin),
        TOL,
        format!("gradient margin {grad_margin:.3e} (worst at p={worst_p}), hessian margin {hess_margin:.3e}"),
    ));

    // H2: subadditivity and positivity of ω_μ on all grid pairs.
    let om = spec.boson;
    let mut sub_margin = f64::INFINITY;
    let mut pair = (0, 0);
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let s = add(grid.mode(i), grid.mode(j));
            let m = om.omega(grid.mode(i)) + om.omega(grid.mode(j)) - om.omega(&s);
            if m < sub_margin {
                sub_margin = m;
                pair = (i, j);
            }
        }
    }
    let min_omega = (0..grid.len()).map(|i| om.omega(grid.mode(i))).fold(f64::INFINITY, f64::min);
    checks.push(check(
        "H2",
        sub_margin.min(min_omega),
        TOL,
        format!("subadditivity margin {sub_margin:.3e} at pair {pair:?}, min omega {min_omega:.3e}"),
    ));

    // H3: Θ and ω grow without bound; sampled along a geometric ray.
    let mut grows = f64::INFINITY;
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for e in 0..8 {
        let mut p = vec![0.0; d];
        p[0] = 10f64.powi(e);
        let cur = (theta.theta(&p), om.omega(&p));
        grows = grows.min(cur.0 - prev.0).min(cur.1 - prev.1);
        prev = cur;
    }
    checks.push(check(
        "H3",
        if prev.0 > 1e6 && prev.1 > 1e6 { grows } else { -1.0 },
        0.0,
        format!("theta(1e7) = {:.3e}, omega(1e7) = {:.3e}", prev.0, prev.1),
    ));

    // H4: continuum window, plus the discrete weighted norm for information.
    let v = spec.form_factor.on_grid(grid);
    let weighted: f64 = (0..grid.len())
        .map(|i| grid.weight(i) * v.values()[i].powi(2) / om.omega(grid.mode(i)))
        .sum::<f64>()
        .sqrt();
    let window = 2.0 * spec.form_factor.alpha + d as f64 - 1.0;
    checks.push(check(
        "H4",
        window,
        0.0,
        format!("2 alpha + d - 1 = {window}, discrete norm of omega^-1/2 v = {weighted:.6e}"),
    ));
    if window == 0.0 {
        checks.last_mut().unwrap().holds = false;
    }

    // H5: strict decrease in μ over the schedule, subadditivity for each member
    // and the sampled omegadiff constant against the massless dispersion.
    let mut sorted: Vec<f64> = schedule.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut mono = f64::INFINITY;
    for w in sorted.windows(2) {
        for i in 0..grid.len() {
            let k = grid.mode(i);
            mono = mono.min(BosonDispersion { mu: w[0] }.omega(k) - BosonDispersion { mu: w[1] }.omega(k));
        }
    }
    let massless = BosonDispersion { mu: 0.0 };
    let mut c_diff = 0.0f64;
    let mut sub5 = f64::INFINITY;
    for &mu in &sorted {
        let wn = BosonDispersion { mu };
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let k = grid.mode(i);
                let s = add(k, grid.mode(j));
                sub5 = sub5.min(wn.omega(k) + wn.omega(grid.mode(j)) - wn.omega(&s));
                let base = (norm(&s) - massless.omega(k)).abs();
                let num = (wn.omega(&s) - wn.omega(k)).abs();
                if base > 1e-14 {
                    c_diff = c_diff.max(num / base);
                } else if num > 1e-14 {
                    c_diff = f64::INFINITY;
                }
            }
        }
    }
    let strict = if sorted.len() < 2 { 0.0 } else { mono };
    let h5_margin = strict.min(sub5).min(1.0 + TOL - c_diff);
    let mut h5 = check(
        "H5",
        h5_margin,
        TOL,
        format!("monotonicity margin {mono:.3e}, subadditivity margin {sub5:.3e}, omegadiff C = {c_diff:.15}"),
    );
    if sorted.len() >= 2 && !(mono > 0.0) {
        h5.holds = false;
    }
    checks.push(h5);

    HypothesisReport {
        checks,
        omegadiff_constant: c_diff,
        infrared_critical: spec.form_factor.infrared_critical(d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FormFactor, ParticleDispersion};

    fn spec(alpha: f64, sr: bool) -> ModelSpec {
        ModelSpec {
            dispersion: if sr {
                ParticleDispersion::semirelativistic(1.0)
            } else {
                ParticleDispersion::nonrelativistic(1.0)
            },
            boson: BosonDispersion { mu: 0.1 },
            form_factor: FormFactor {
                coupling: 0.5,
                alpha,
                cutoff: 4.0,
            },
            momentum: vec![0.0],
        }
    }

    #[test]
    fn default_models_satisfy_everything() {
        let grid = ModeGrid::build(1, 4.0, 16).unwrap();
        for sr in [false, true] {
            let r = check_hypotheses(&grid, &spec(0.25, sr), &[0.4, 0.2, 0.1, 0.05]);
            assert!(r.all_hold(), "{r:?}");
            assert!(r.omegadiff_constant <= 1.0 + 1e-12);
            assert!(r.infrared_critical);
        }
    }

    #[test]
    fn h4_window_is_reported() {
        let grid = ModeGrid::build(1, 4.0, 8).unwrap();
        let r = check_hypotheses(&grid, &spec(-0.2, false), &[0.2, 0.1]);
        assert!(!r.get("H4").unwrap().holds);
        assert!(r.get("H5").unwrap().holds);
    }

    #[test]
    fn repeated_mass_breaks_strict_decrease() {
        let grid = ModeGrid::build(1, 4.0, 8).unwrap();
        let r = check_hypotheses(&grid, &spec(0.25, false), &[0.2, 0.2]);
        assert!(!r.get("H5").unwrap().holds);
    }
}
