use serde::Serialize;

use crate::fock::FockError;
use crate::scalar::Scalar;

/// Cell-centred momentum grid on `[-k_max, k_max]^d`.
///
/// Modes are ordered lexicographically by their per-axis cell index, the
/// last axis running fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeGrid<T> {
    dim: usize,
    per_axis: usize,
    k_max: T,
    spacing: T,
    modes: Vec<T>,
    weights: Vec<T>,
}

/// Real function on the mode set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneBosonFunction<T>(pub Vec<T>);

impl<T: Scalar> OneBosonFunction<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(usize, T) -> T) -> Self {
        Self(self.0.iter().enumerate().map(|(i, &v)| f(i, v)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self(self.0.iter().map(|&a| alpha * a).collect())
    }
}

impl<T: Scalar> ModeGrid<T> {
    pub fn build(d: usize, k_max: T, m: usize) -> Result<Self, FockError> {
        if d == 0 {
            return Err(FockError::InvalidGrid("dimension must be at least 1".into()));
        }
        if m == 0 || m % 2 == 1 {
            return Err(FockError::OddModeCount(m));
        }
        if !(k_max > T::zero()) || !k_max.is_finite() {
            return Err(FockError::InvalidGrid("k_max must be positive and finite".into()));
        }
        let total = m
            .checked_pow(d as u32)
            .ok_or_else(|| FockError::InvalidGrid("mode count overflows".into()))?;
        let h = T::lit(2.0) * k_max / T::from_count(m);
        let axis: Vec<T> = (0..m)
            .map(|j| -k_max + (T::from_count(j) + T::lit(0.5)) * h)
            .collect();
        let mut modes = Vec::with_capacity(total * d);
        for flat in 0..total {
            let mut rest = flat;
            let mut idx = vec![0usize; d];
            for a in (0..d).rev() {
                idx[a] = rest % m;
                rest /= m;
            }
            modes.extend(idx.iter().map(|&j| axis[j]));
        }
        let w = h.powi(d as i32);
        Ok(Self {
            dim: d,
            per_axis: m,
            k_max,
            spacing: h,
            modes,
            weights: vec![w; total],
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn k_max(&self) -> T {
        self.k_max
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mode(&self, i: usize) -> &[T] {
        &self.modes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn abs_k(&self, i: usize) -> T {
        self.mode(i).iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    fn axis_indices(&self, i: usize) -> Vec<usize> {
        let mut rest = i;
        let mut idx = vec![0usize; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = rest % self.per_axis;
            rest /= self.per_axis;
        }
        idx
    }

    fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.per_axis + j)
    }

    /// Index of the mode `-k_i`.
    pub fn negated(&self, i: usize) -> usize {
        let idx: Vec<usize> = self
            .axis_indices(i)
            .into_iter()
            .map(|j| self.per_axis - 1 - j)
            .collect();
        self.flatten(&idx)
    }

    /// Mode `k_i + steps·h·e_axis`, if it lies on the grid.
    pub fn shifted(&self, i: usize, axis: usize, steps: isize) -> Option<usize> {
        let mut idx = self.axis_indices(i);
        let j = idx[axis] as isize + steps;
        if j < 0 || j >= self.per_axis as isize {
            return None;
        }
        idx[axis] = j as usize;
        Some(self.flatten(&idx))
    }

    pub fn function(&self, f: impl Fn(&[T]) -> T) -> OneBosonFunction<T> {
        OneBosonFunction((0..self.len()).map(|i| f(self.mode(i))).collect())
    }

    /// Discrete pairing s(f, g) = Σ Δk_i f_i g_i.
    pub fn inner(&self, f: &OneBosonFunction<T>, g: &OneBosonFunction<T>) -> T {
        self.weights
            .iter()
            .zip(f.values().iter().zip(g.values()))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }

    pub fn norm(&self, f: &OneBosonFunction<T>) -> T {
        self.inner(f, f).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_cells() {
        let g = ModeGrid::<f64>::build(1, 1.0, 4).unwrap();
        let ks: Vec<f64> = (0..4).map(|i| g.mode(i)[0]).collect();
        assert_eq!(ks, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.weight(0), 0.5);
        let g = ModeGrid::<f64>::build(1, 2.0, 2).unwrap();
        assert_eq!((g.mode(0)[0], g.mode(1)[0], g.weight(0)), (-1.0, 1.0, 2.0));
    }

    #[test]
    fn two_dimensional_cells() {
        let g = ModeGrid::<f64>::build(2, 1.0, 2).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.weight(3), 1.0);
        for i in 0..4 {
            assert!(g.mode(i).iter().all(|x| x.abs() == 0.5));
        }
    }

    #[test]
    fn odd_count_rejected() {
        assert!(matches!(ModeGrid::<f64>::build(1, 1.0, 5), Err(FockError::OddModeCount(5))));
    }

    #[test]
    fn negation_and_shift() {
        let g = ModeGrid::<f64>::build(2, 2.0, 4).unwrap();
        for i in 0..g.len() {
            let j = g.negated(i);
            assert_eq!(g.mode(j)[0], -g.mode(i)[0]);
            assert_eq!(g.mode(j)[1], -g.mode(i)[1]);
        }
        let s = g.shifted(0, 1, 1).unwrap();
        assert_eq!(g.mode(s)[1] - g.mode(0)[1], g.spacing());
        assert!(g.shifted(0, 0, -1).is_none());
    }
}
