//! Convex majorants, envelope derivatives and the lower bound for functions
//! sandwiched below a parabola.

use serde::Serialize;

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConvexError {
    #[error("parabola requires c > 0 and a >= b^2/(2c^2); got a={a}, b={b}, c={c}")]
    InvalidParabola { a: f64, b: f64, c: f64 },
    #[error("parabola takes negative values (a < b^2/(2c)); the admissible set is empty")]
    NegativeParabola,
    #[error("resolution must be at least 64, got {0}")]
    Resolution(usize),
    #[error("sample grid must contain P = 0 and be uniformly spaced")]
    SampleGrid,
}

/// p(x) = (c/2)x² + bx + a.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Parabola<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> Parabola<T> {
    pub fn new(a: T, b: T, c: T) -> Result<Self, ConvexError> {
        let two = T::lit(2.0);
        if !(c > T::zero()) || !(a >= b * b / (two * c * c)) {
            return Err(ConvexError::InvalidParabola {
                a: a.to_f64_lossy(),
                b: b.to_f64_lossy(),
                c: c.to_f64_lossy(),
            });
        }
        Ok(Self { a, b, c })
    }

    pub fn eval(&self, x: T) -> T {
        self.c / T::lit(2.0) * x * x + self.b * x + self.a
    }

    pub fn derivative(&self, x: T) -> T {
        self.c * x + self.b
    }

    /// Whether p ≥ 0 on all of R, i.e. a ≥ b²/(2c).
    pub fn is_nonnegative(&self) -> bool {
        self.a >= self.b * self.b / (T::lit(2.0) * self.c)
    }
}

/// Closed form of sup{g(1) − g(0) : g convex, 0 ≤ g ≤ p}.
pub fn delta_p_closed_form<T: Scalar>(p: &Parabola<T>) -> T {
    let two = T::lit(2.0);
    if two * p.a >= p.c {
        (two * p.a * p.c).sqrt() + p.b
    } else {
        p.eval(T::one())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BruteForce<T> {
    /// Best value over tangent-line constructions.
    pub structured: T,
    /// Best value over convex hulls of a piecewise-linear minorant of p.
    pub generic: T,
    pub best: T,
}

fn golden_max<T: Scalar>(f: &impl Fn(T) -> T, mut lo: T, mut hi: T) -> (T, T) {
    let r = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= T::epsilon() * (T::one() + hi.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid search followed by golden-section refinement around the best cell.
fn grid_then_refine<T: Scalar>(f: impl Fn(T) -> T, lo: T, hi: T, n: usize) -> T {
    let step = (hi - lo) / T::from_count(n - 1);
    let mut best_i = 0;
    let mut best = T::neg_infinity();
    for i in 0..n {
        let v = f(lo + step * T::from_count(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let a = lo + step * T::from_count(best_i.saturating_sub(1));
    let b = (lo + step * T::from_count((best_i + 1).min(n - 1))).min(hi);
    let (_, refined) = golden_max(&f, a, b);
    best.max(refined)
}

/// Tangent construction: for a contact point t, g = max(0, tangent at t)
/// left of t and g = p right of t.
fn structured_value<T: Scalar>(p: &Parabola<T>, t: T) -> T {
    let tangent = |x: T| p.eval(t) + p.derivative(t) * (x - t);
    let g0 = tangent(T::zero()).max(T::zero());
    let one = T::one();
    let g1 = if t >= one { tangent(one).max(T::zero()) } else { p.eval(one) };
    g1 - g0
}

/// Upper envelope of the lines in `lines` (slope, intercept), sorted by
/// slope; returns the x-coordinates of the breakpoints and the line index
/// active on each piece.
fn upper_envelope<T: Scalar>(lines: &[(T, T)]) -> (Vec<T>, Vec<usize>) {
    let mut hull: Vec<usize> = Vec::new();
    let meet = |i: usize, j: usize| (lines[j].1 - lines[i].1) / (lines[i].0 - lines[j].0);
    for k in 0..lines.len() {
        if let Some(&last) = hull.last() {
            if lines[last].0 == lines[k].0 {
                if lines[last].1 >= lines[k].1 {
                    continue;
                }
                hull.pop();
            }
        }
        while hull.len() >= 2 {
            let i = hull[hull.len() - 2];
            let j = hull[hull.len() - 1];
            if meet(i, k) <= meet(i, j) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let breaks = hull.windows(2).map(|w| meet(w[0], w[1])).collect();
    (breaks, hull)
}

fn generic_search<T: Scalar>(p: &Parabola<T>, resolution: usize) -> T {
    let two = T::lit(2.0);
    let reach = (two * p.a / p.c).sqrt() + p.b.abs() / p.c;
    let span = two + two * reach.max(T::one());
    let n = resolution.max(64);
    let mut lines: Vec<(T, T)> = (0..n)
        .map(|j| {
            let x = -span + two * span * T::from_count(j) / T::from_count(n - 1);
            let s = p.derivative(x);
            (s, p.eval(x) - s * x)
        })
        .collect();
    lines.push((T::zero(), T::zero()));
    lines.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (breaks, active) = upper_envelope(&lines);
    let minorant = |x: T| {
        let piece = breaks.iter().take_while(|&&b| b < x).count();
        let (s, c) = lines[active[piece]];
        s * x + c
    };
    let vertices: Vec<(T, T)> = breaks.iter().map(|&x| (x, minorant(x))).collect();
    let at_one = minorant(T::one());
    let top = minorant(T::zero());
    let value = |y: T| {
        let mut g1 = at_one;
        for &(vx, vy) in &vertices {
            if vx >= T::one() {
                g1 = g1.min(y + (vy - y) / vx);
            }
        }
        g1 - y
    };
    grid_then_refine(value, T::zero(), top.max(T::zero()), n)
}

/// Brute-force maximum of g(1) − g(0) over explicit admissible g.
///
/// Every candidate is a genuine convex function with 0 ≤ g ≤ p, so the
/// result never exceeds the supremum.
pub fn delta_p_bruteforce<T: Scalar>(p: &Parabola<T>, resolution: usize) -> Result<BruteForce<T>, ConvexError> {
    if resolution < 64 {
        return Err(ConvexError::Resolution(resolution));
    }
    if !p.is_nonnegative() {
        return Err(ConvexError::NegativeParabola);
    }
    let reach = (T::lit(2.0) * p.a / p.c).sqrt() + p.b.abs() / p.c;
    let t_max = T::lit(4.0) * (reach + T::one());
    let structured = grid_then_refine(|t| structured_value(p, t), T::epsilon(), t_max, resolution)
        .max(p.eval(T::one()) - p.a);
    let generic = generic_search(p, resolution);
    Ok(BruteForce {
        structured,
        generic,
        best: structured.max(generic),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexDiffReport {
    pub minimum_at_origin: bool,
    pub dome_bound: bool,
    pub convexity: bool,
    pub hypotheses_hold: bool,
    /// Smallest F(P−k) − F(P) − bound over all sampled pairs; `None` when a
    /// hypothesis failed and the bound was not checked.
    pub worst_margin: Option<f64>,
    pub pairs_checked: usize,
    pub worst_hypothesis_margin: f64,
}

/// Lower bound for F(P − k) − F(P) on one-dimensional samples `(P, F(P))`.
///
/// Hypotheses checked on the samples: F(0) ≤ F(P), F(P) − F(0) ≤ (C/2)P²,
/// and discrete midpoint convexity of (C/2)P² − F.
pub fn convex_diff_lower_bound<T: Scalar>(samples: &[(T, T)], c: T, tol: T) -> Result<ConvexDiffReport, ConvexError> {
    let n = samples.len();
    let origin = samples.iter().position(|s| s.0 == T::zero()).ok_or(ConvexError::SampleGrid)?;
    if n >= 3 {
        let h = samples[1].0 - samples[0].0;
        let uniform = samples
            .windows(2)
            .all(|w| ((w[1].0 - w[0].0) - h).abs() <= T::lit(1e-9) * h.abs().max(T::one()));
        if !uniform || !(h > T::zero()) {
            return Err(ConvexError::SampleGrid);
        }
    }
    let half = c / T::lit(2.0);
    let f0 = samples[origin].1;
    let mut worst_h = T::infinity();
    let mut min_ok = true;
    let mut dome_ok = true;
    for &(p, f) in samples {
        let m1 = f - f0;
        let m2 = half * p * p - (f - f0);
        worst_h = worst_h.min(m1).min(m2);
        min_ok &= m1 >= -tol;
        dome_ok &= m2 >= -tol;
    }
    let g = |i: usize| half * samples[i].0 * samples[i].0 - samples[i].1;
    let mut conv_ok = true;
    for i in 1..n.saturating_sub(1) {
        let m = g(i - 1) + g(i + 1) - T::lit(2.0) * g(i);
        worst_h = worst_h.min(m);
        conv_ok &= m >= -tol;
    }
    let hypotheses_hold = min_ok && dome_ok && conv_ok;
    let mut worst = T::infinity();
    let mut pairs = 0;
    if hypotheses_hold {
        for &(p, fp) in samples {
            for &(q, fq) in samples {
                let k = p - q;
                let bound = if k.abs() <= p.abs() {
                    -c * k.abs() * p.abs() + half * k * k
                } else {
                    -half * p * p
                };
                worst = worst.min(fq - fp - bound);
                pairs += 1;
            }
        }
    }
    Ok(ConvexDiffReport {
        minimum_at_origin: min_ok,
        dome_bound: dome_ok,
        convexity: conv_ok,
        hypotheses_hold,
        worst_margin: hypotheses_hold.then(|| worst.to_f64_lossy()),
        pairs_checked: pairs,
        worst_hypothesis_margin: worst_h.to_f64_lossy(),
    })
}

/// Differentiable member of a family, given by value and derivative.
pub struct FamilyMember<'a, T> {
    pub value: Box<dyn Fn(T) -> T + Sync + 'a>,
    pub derivative: Box<dyn Fn(T) -> T + Sync + 'a>,
}

impl<'a, T> FamilyMember<'a, T> {
    pub fn new(value: impl Fn(T) -> T + Sync + 'a, derivative: impl Fn(T) -> T + Sync + 'a) -> Self {
        Self {
            value: Box::new(value),
            derivative: Box::new(derivative),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    /// Forward difference of g = inf_f f at a.
    pub right_derivative: f64,
    /// sup over members of f'(a).
    pub pointwise_sup: f64,
    /// (ε, sup over members and x ∈ [a, a+ε) of f'(x)).
    pub window_sups: Vec<(f64, f64)>,
    pub pointwise_holds: bool,
    pub windowed_holds: bool,
}

/// Compares the right derivative of the pointwise infimum with the supremum
/// of member derivatives on shrinking windows.
pub fn envelope_derivative_check<T: Scalar>(
    family: &[FamilyMember<'_, T>],
    a: T,
    windows: &[T],
    fd_step: T,
    tol: T,
) -> EnvelopeReport {
    let inf = |x: T| family.iter().map(|m| (m.value)(x)).fold(T::infinity(), |acc, v| acc.min(v));
    let right = (inf(a + fd_step) - inf(a)) / fd_step;
    let pointwise = family.iter().map(|m| (m.derivative)(a)).fold(T::neg_infinity(), |acc, v| acc.max(v));
    let samples = 257;
    let mut window_sups = Vec::new();
    for &eps in windows {
        let mut s = T::neg_infinity();
        for j in 0..samples {
            let x = a + eps * T::from_count(j) / T::from_count(samples);
            for m in family {
                s = s.max((m.derivative)(x));
            }
        }
        window_sups.push((eps.to_f64_lossy(), s.to_f64_lossy()));
    }
    let limit = window_sups.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    let r = right.to_f64_lossy();
    EnvelopeReport {
        right_derivative: r,
        pointwise_sup: pointwise.to_f64_lossy(),
        window_sups,
        pointwise_holds: r <= pointwise.to_f64_lossy() + tol.to_f64_lossy(),
        windowed_holds: r <= limit + tol.to_f64_lossy(),
    }
}

/// The family f_δ whose infimum is flat at 0 while every member has slope
/// −2 there.
pub fn counterexample_member(delta: f64) -> FamilyMember<'static, f64> {
    FamilyMember::new(
        move |x: f64| {
            if x <= -delta {
                2.0 * delta
            } else if x < 0.0 {
                -(x + delta).powi(2) / delta + 2.0 * delta
            } else if x < delta {
                (x - delta).powi(2) / delta
            } else {
                0.0
            }
        },
        move |x: f64| {
            if x <= -delta {
                0.0
            } else if x < 0.0 {
                -2.0 * (x + delta) / delta
            } else if x < delta {
                2.0 * (x - delta) / delta
            } else {
                0.0
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_branches() {
        let p = Parabola::<f64>::new(1.0, 0.0, 1.0).unwrap();
        assert!((delta_p_closed_form(&p) - 2f64.sqrt()).abs() < 1e-15);
        let p = Parabola::<f64>::new(0.1, 0.0, 1.0).unwrap();
        assert!((delta_p_closed_form(&p) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn branch_boundary_is_continuous() {
        for &(b, c) in &[(0.0, 1.0), (0.3, 2.0), (-0.2, 0.5)] {
            let a: f64 = c / 2.0;
            let left = (2.0 * a * c).sqrt() + b;
            let right = c / 2.0 + b + a;
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_parabolas_rejected() {
        assert!(Parabola::new(1.0, 0.0, 0.0).is_err());
        assert!(Parabola::new(0.01, 1.0, 1.0).is_err());
    }

    #[test]
    fn bruteforce_matches_first_instance() {
        let p = Parabola::<f64>::new(1.0, 0.0, 1.0).unwrap();
        let r = delta_p_bruteforce(&p, 4096).unwrap();
        assert!((r.best - 2f64.sqrt()).abs() < 1e-6, "{r:?}");
        assert!(r.best <= 2f64.sqrt() + 1e-9);
        assert!((r.generic - 2f64.sqrt()).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn bruteforce_matches_second_instance() {
        let p = Parabola::<f64>::new(0.1, 0.0, 1.0).unwrap();
        let r = delta_p_bruteforce(&p, 4096).unwrap();
        assert!((r.best - 0.6).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn diff_bound_on_parabola_saturates() {
        let c = 1.0;
        let samples: Vec<(f64, f64)> = (-10..=10).map(|i| {
            let p = i as f64 * 0.1;
            (p, c / 2.0 * p * p)
        }).collect();
        let r = convex_diff_lower_bound(&samples, c, 1e-12).unwrap();
        assert!(r.hypotheses_hold);
        assert!(r.worst_margin.unwrap().abs() < 1e-12);
    }

    #[test]
    fn diff_bound_flat_function() {
        let samples: Vec<(f64, f64)> = (-5..=5).map(|i| (i as f64 * 0.2, 0.0)).collect();
        let r = convex_diff_lower_bound(&samples, 1.0, 1e-12).unwrap();
        assert!(r.worst_margin.unwrap() >= 0.0);
    }

    #[test]
    fn diff_bound_rejects_bad_hypothesis() {
        let samples: Vec<(f64, f64)> = (-5..=5).map(|i| (i as f64 * 0.2, -(i as f64).abs())).collect();
        let r = convex_diff_lower_bound(&samples, 1.0, 1e-12).unwrap();
        assert!(!r.minimum_at_origin);
        assert!(r.worst_margin.is_none());
    }

    #[test]
    fn envelope_of_two_lines() {
        let fam = vec![FamilyMember::new(|x: f64| x, |_| 1.0), FamilyMember::new(|x: f64| 2.0 * x, |_| 2.0)];
        let r = envelope_derivative_check(&fam, 0.0, &[0.1], 1e-6, 1e-6);
        assert!((r.right_derivative - 1.0).abs() < 1e-9);
        assert!(r.pointwise_holds && r.windowed_holds);
    }
}
