use std::collections::HashMap;
use std::ops::Range;

use crate::fock::FockError;

pub const DEFAULT_BASIS_LIMIT: usize = 200_000;

/// Occupation-number basis with total boson number at most `cutoff`.
///
/// States are ordered by total, then lexicographically as sorted lists of
/// occupied modes, so the basis for cutoff `N` is a prefix of the basis for
/// any larger cutoff on the same modes.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    cutoff: usize,
    occ: Vec<u8>,
    totals: Vec<u8>,
    sector_start: Vec<usize>,
    index: HashMap<Box<[u8]>, usize>,
}

/// Σ_{n ≤ N} C(M + n − 1, n), or `None` on overflow.
pub fn basis_size(modes: usize, cutoff: usize) -> Option<usize> {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for n in 0..=cutoff {
        if n > 0 {
            term = term.checked_mul((modes + n - 1) as u128)? / n as u128;
        }
        total = total.checked_add(term)?;
    }
    usize::try_from(total).ok()
}

impl FockBasis {
    pub fn enumerate(modes: usize, cutoff: usize) -> Result<Self, FockError> {
        Self::enumerate_with_limit(modes, cutoff, DEFAULT_BASIS_LIMIT)
    }

    pub fn enumerate_with_limit(modes: usize, cutoff: usize, limit: usize) -> Result<Self, FockError> {
        if cutoff > u8::MAX as usize {
            return Err(FockError::CutoffTooLarge(cutoff));
        }
        let size = basis_size(modes, cutoff).unwrap_or(usize::MAX);
        if size > limit {
            return Err(FockError::BasisTooLarge { size, limit });
        }
        let mut occ = Vec::with_capacity(size * modes);
        let mut totals = Vec::with_capacity(size);
        let mut sector_start = Vec::with_capacity(cutoff + 2);
        let mut list = Vec::with_capacity(cutoff);
        let mut counts = vec![0u8; modes];
        for n in 0..=cutoff {
            sector_start.push(totals.len());
            if n > 0 && modes == 0 {
                continue;
            }
            fill(n, 0, modes, &mut list, &mut |l: &[usize]| {
                counts.iter_mut().for_each(|c| *c = 0);
                for &i in l {
                    counts[i] += 1;
                }
                occ.extend_from_slice(&counts);
                totals.push(n as u8);
            });
        }
        sector_start.push(totals.len());
        let index = (0..totals.len())
            .map(|s| (Box::<[u8]>::from(&occ[s * modes..(s + 1) * modes]), s))
            .collect();
        Ok(Self {
            modes,
            cutoff,
            occ,
            totals,
            sector_start,
            index,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn occupation(&self, s: usize) -> &[u8] {
        &self.occ[s * self.modes..(s + 1) * self.modes]
    }

    pub fn total(&self, s: usize) -> usize {
        self.totals[s] as usize
    }

    pub fn index_of(&self, counts: &[u8]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// Rows holding the sector with exactly `n` bosons.
    pub fn sector(&self, n: usize) -> Range<usize> {
        if n > self.cutoff {
            return self.len()..self.len();
        }
        self.sector_start[n]..self.sector_start[n + 1]
    }

    /// Number of states with total at most `n` (a prefix of the basis).
    pub fn prefix_len(&self, n: isize) -> usize {
        if n < 0 {
            0
        } else if n as usize >= self.cutoff {
            self.len()
        } else {
            self.sector_start[n as usize + 1]
        }
    }

    /// Occupied modes of state `s` with their counts.
    pub fn occupied(&self, s: usize) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.occupation(s)
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
    }

    /// Rows of the states obtained by removing one boson from mode `i` of
    /// every state (None where `n_i = 0`), precomputed for hot loops.
    pub fn lowering_table(&self, i: usize) -> Vec<Option<usize>> {
        let mut buf = vec![0u8; self.modes];
        (0..self.len())
            .map(|s| {
                let o = self.occupation(s);
                if o[i] == 0 {
                    return None;
                }
                buf.copy_from_slice(o);
                buf[i] -= 1;
                self.index_of(&buf)
            })
            .collect()
    }

    /// Iterates (source row, target row, n_i) over all removals a_i.
    pub fn for_each_lowering(&self, mut f: impl FnMut(usize, usize, usize, u8)) {
        let mut buf = vec![0u8; self.modes];
        for s in 0..self.len() {
            let o = self.occupation(s);
            for i in 0..self.modes {
                if o[i] == 0 {
                    continue;
                }
                buf.copy_from_slice(o);
                buf[i] -= 1;
                let t = self.index_of(&buf).expect("lowered state lies in the basis");
                f(s, t, i, o[i]);
            }
        }
    }

    pub fn vacuum(&self) -> usize {
        0
    }
}

fn fill(n: usize, from: usize, modes: usize, list: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if list.len() == n {
        emit(list);
        return;
    }
    for i in from..modes {
        list.push(i);
        fill(n, i, modes, list, emit);
        list.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_modes_two_bosons() {
        let b = FockBasis::enumerate(2, 2).unwrap();
        let states: Vec<Vec<u8>> = (0..b.len()).map(|s| b.occupation(s).to_vec()).collect();
        assert_eq!(states, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn sizes() {
        assert_eq!(FockBasis::enumerate(1, 3).unwrap().len(), 4);
        assert_eq!(FockBasis::enumerate(4, 4).unwrap().len(), 70);
        assert_eq!(basis_size(16, 4), Some(4845));
        assert_eq!(basis_size(24, 4), Some(20475));
    }

    #[test]
    fn limit_enforced() {
        let e = FockBasis::enumerate_with_limit(16, 4, 1000).unwrap_err();
        assert!(matches!(e, FockError::BasisTooLarge { size: 4845, limit: 1000 }));
    }

    #[test]
    fn prefix_property() {
        let small = FockBasis::enumerate(5, 3).unwrap();
        let big = FockBasis::enumerate(5, 4).unwrap();
        for s in 0..small.len() {
            assert_eq!(small.occupation(s), big.occupation(s));
        }
        assert_eq!(big.prefix_len(3), small.len());
        assert_eq!(big.prefix_len(-1), 0);
    }
}
