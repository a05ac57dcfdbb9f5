//! Transverse-field Ising chain with periodic boundaries.
//!
//! Configurations are stored as the low `L` bits of a `u64`. Bit `k` holds
//! spin `s_k` with the qubit convention `0 <-> +1` and `1 <-> -1`, so the
//! integer value of a configuration is also its index into full-basis
//! tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain the bit encoding supports. Full-basis modules cap lower,
/// see [`MAX_TABLE_SITES`].
pub const MAX_SITES: usize = 63;

/// Largest chain for which dense `2^L` tables are built.
pub const MAX_TABLE_SITES: usize = 26;

/// A computational-basis state of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpinConfig(pub u64);

impl SpinConfig {
    /// Index of this state in a dense `2^L` table.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn flip(self, site: usize) -> SpinConfig {
        SpinConfig(self.0 ^ (1u64 << site))
    }
}

impl From<u64> for SpinConfig {
    fn from(bits: u64) -> Self {
        SpinConfig(bits)
    }
}

/// `H = -J sum_k s^z_k s^z_{k+1} - Gamma sum_k s^x_k` on a ring of `L` sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfiModel {
    sites: usize,
    coupling: f64,
    field: f64,
}

impl TfiModel {
    pub fn new(sites: usize, coupling: f64, field: f64) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidModel(format!("L = {sites}, need L >= 2")));
        }
        if sites > MAX_SITES {
            return Err(Error::InvalidModel(format!(
                "L = {sites} exceeds the {MAX_SITES}-bit encoding"
            )));
        }
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(Error::InvalidModel(format!("J = {coupling}, need J > 0")));
        }
        if !(field.is_finite() && field >= 0.0) {
            return Err(Error::InvalidModel(format!("Gamma = {field}, need Gamma >= 0")));
        }
        Ok(TfiModel {
            sites,
            coupling,
            field,
        })
    }

    /// The critical chain, `J = Gamma = 1`.
    pub fn critical(sites: usize) -> Result<Self> {
        Self::new(sites, 1.0, 1.0)
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.sites
    }

    #[inline]
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    #[inline]
    pub fn field(&self) -> f64 {
        self.field
    }

    /// Number of basis states, `2^L`.
    #[inline]
    pub fn dim(&self) -> usize {
        1usize << self.sites
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        (1u64 << self.sites) - 1
    }

    pub fn check_state(&self, x: SpinConfig) -> Result<()> {
        if x.0 & !self.mask() != 0 {
            return Err(Error::StateOutOfRange {
                state: x.0,
                len: self.sites,
            });
        }
        Ok(())
    }

    /// Spin eigenvalue `s_k` of `x`, `+1` for a clear bit and `-1` for a set one.
    pub fn spin_value(&self, x: SpinConfig, site: usize) -> Result<i32> {
        if site >= self.sites {
            return Err(Error::SiteOutOfRange {
                site,
                len: self.sites,
            });
        }
        Ok(1 - 2 * ((x.0 >> site) & 1) as i32)
    }

    /// `x` cyclically shifted so that bit `k` of the result holds `s_{k+shift}`.
    #[inline]
    pub(crate) fn rotate(&self, x: u64, shift: usize) -> u64 {
        let shift = shift % self.sites;
        if shift == 0 {
            return x;
        }
        ((x >> shift) | (x << (self.sites - shift))) & self.mask()
    }

    /// `sum_k s_k s_{k+d mod L}` over all `L` bonds of range `d`.
    #[inline]
    pub fn bond_sum(&self, x: SpinConfig, range: usize) -> i64 {
        let anti = ((x.0 ^ self.rotate(x.0, range)) & self.mask()).count_ones() as i64;
        self.sites as i64 - 2 * anti
    }

    /// Diagonal matrix element `-J sum_k s_k s_{k+1}`.
    #[inline]
    pub fn diagonal_energy(&self, x: SpinConfig) -> f64 {
        -self.coupling * self.bond_sum(x, 1) as f64
    }

    /// Off-diagonal element between `x` and any single-flip neighbour.
    #[inline]
    pub fn flip_element(&self) -> f64 {
        -self.field
    }

    /// The `L + 1` states coupled to `x`: `x` itself first, then each
    /// single-spin flip in ascending site order. Zero-field elements are
    /// still emitted.
    pub fn connected(&self, x: SpinConfig) -> Connected<'_> {
        Connected {
            model: self,
            x,
            next: 0,
        }
    }

    pub fn connected_set(&self, x: SpinConfig) -> Vec<(SpinConfig, f64)> {
        self.connected(x).collect()
    }
}

/// Iterator over `(x', <x'|H|x>)`, see [`TfiModel::connected`].
#[derive(Debug, Clone)]
pub struct Connected<'a> {
    model: &'a TfiModel,
    x: SpinConfig,
    next: usize,
}

impl Iterator for Connected<'_> {
    type Item = (SpinConfig, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let item = match self.next {
            0 => (self.x, self.model.diagonal_energy(self.x)),
            n if n <= self.model.sites => (self.x.flip(n - 1), self.model.flip_element()),
            _ => return None,
        };
        self.next += 1;
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.model.sites + 1 - self.next.min(self.model.sites + 1);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Connected<'_> {}
