//! File formats shared by the subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use nfl_core::fock::{FockBasis, ModeGrid};

/// 17 significant digits, enough to round-trip any f64.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records what it wrote.
pub struct OutDir {
    pub root: PathBuf,
    written: Vec<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl OutDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(bytes)?;
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Names, sizes and hashes of every file written so far, in write order.
    pub fn files(&self) -> Result<Vec<OutputFile>> {
        self.written
            .iter()
            .map(|p| {
                let bytes = fs::read(p)?;
                Ok(OutputFile {
                    path: p.file_name().unwrap().to_string_lossy().into_owned(),
                    bytes: bytes.len(),
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect()
    }
}

/// SHA-256 over the grid modes and the basis occupations in basis order.
pub fn basis_hash(grid: &ModeGrid<f64>, basis: &FockBasis) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((grid.dimension() as u64).to_le_bytes());
    h.update((grid.len() as u64).to_le_bytes());
    for i in 0..grid.len() {
        for &k in grid.mode(i) {
            h.update(k.to_le_bytes());
        }
        h.update(grid.weight(i).to_le_bytes());
    }
    h.update((basis.cutoff() as u64).to_le_bytes());
    h.update((basis.len() as u64).to_le_bytes());
    for s in 0..basis.len() {
        h.update(basis.occupation(s));
    }
    h.finalize().into()
}

pub const STATES_MAGIC: &[u8; 8] = b"NFLSTAT1";

/// Little-endian layout: magic, 32-byte basis hash, dimension (u64),
/// record count (u64), then per record μ followed by ψ and Φ (f64 each).
pub fn encode_states(hash: &[u8; 32], dim: usize, records: &[(f64, &[f64], &[f64])]) -> Vec<u8> {
    let mut out = Vec::with_capacity(56 + records.len() * (8 + 16 * dim));
    out.extend_from_slice(STATES_MAGIC);
    out.extend_from_slice(hash);
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for (mu, psi, phi) in records {
        out.extend_from_slice(&mu.to_le_bytes());
        for v in psi.iter().chain(phi.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub struct StateRecord {
    pub mu: f64,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

pub fn decode_states(bytes: &[u8]) -> Result<([u8; 32], Vec<StateRecord>)> {
    if bytes.len() < 56 || &bytes[..8] != STATES_MAGIC {
        bail!("not a state file");
    }
    let mut hash = [0u8; 32];
    hash.copy_from_slice(&bytes[8..40]);
    let u = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
    let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let dim = u(40);
    let count = u(48);
    if bytes.len() != 56 + count * 8 * (1 + 2 * dim) {
        bail!("state file length does not match its header");
    }
    let mut at = 56;
    let mut recs = Vec::with_capacity(count);
    for _ in 0..count {
        let mu = f(at);
        at += 8;
        let mut read = |n: usize| {
            let v: Vec<f64> = (0..n).map(|j| f(at + 8 * j)).collect();
            at += 8 * n;
            v
        };
        let psi = read(dim);
        let phi = read(dim);
        recs.push(StateRecord { mu, psi, phi });
    }
    Ok((hash, recs))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
        assert_eq!(float(f64::INFINITY), "inf");
    }

    #[test]
    fn states_round_trip() {
        let h = [7u8; 32];
        let psi = vec![1.0, -2.0];
        let phi = vec![0.5, 0.25];
        let bytes = encode_states(&h, 2, &[(0.4, &psi, &phi)]);
        let (hh, recs) = decode_states(&bytes).unwrap();
        assert_eq!(hh, h);
        assert_eq!(recs[0].mu, 0.4);
        assert_eq!(recs[0].psi, psi);
        assert_eq!(recs[0].phi, phi);
        assert!(decode_states(&bytes[..bytes.len() - 1]).is_err());
    }
}
