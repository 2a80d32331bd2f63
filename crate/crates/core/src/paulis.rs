//! Pauli-string bases, qubit locations and the wire permutations that move a
//! block from the leading wires onto an arbitrary location.
//!
//! Wire 0 is the most significant bit of a basis-state index, so the wire-0
//! factor of a Kronecker product is the leftmost one.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Result, SynthError};
use crate::numkit::{kron, ComplexMatrix, C64, I, ONE, ZERO};

pub const MAX_PAULI_QUBITS: usize = 4;

/// Ordered basis of the `4^m` Pauli strings on `m` qubits. Index `k` written
/// in base 4 (most significant digit first) spells the factors `I, X, Y, Z`
/// from wire 0 onwards, so index 0 is the identity.
#[derive(Debug)]
pub struct PauliBasis {
    m: usize,
    strings: Vec<ComplexMatrix>,
}

impl PauliBasis {
    pub fn num_qubits(&self) -> usize {
        self.m
    }

    pub fn strings(&self) -> &[ComplexMatrix] {
        &self.strings
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// Base-4 digits of string `k`, wire 0 first.
    pub fn digits(&self, k: usize) -> Vec<u8> {
        pauli_digits(k, self.m)
    }
}

pub fn pauli_digits(k: usize, m: usize) -> Vec<u8> {
    (0..m).map(|j| ((k >> (2 * (m - 1 - j))) & 3) as u8).collect()
}

/// The single-qubit Pauli matrix for digit 0..=3 (I, X, Y, Z).
pub fn single_pauli(digit: u8) -> ComplexMatrix {
    let rows = match digit {
        0 => [[ONE, ZERO], [ZERO, ONE]],
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, -I], [I, ZERO]],
        3 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("pauli digit out of range: {digit}"),
    };
    ComplexMatrix::from_fn(2, |i, j| rows[i][j])
}

static BASES: [OnceLock<PauliBasis>; MAX_PAULI_QUBITS] =
    [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];

/// Cached Pauli basis on `m` qubits, `1 <= m <= 4`.
pub fn pauli_basis(m: usize) -> Result<&'static PauliBasis> {
    if !(1..=MAX_PAULI_QUBITS).contains(&m) {
        return Err(SynthError::invalid(format!(
            "pauli basis size must be in 1..={MAX_PAULI_QUBITS}, got {m}"
        )));
    }
    Ok(BASES[m - 1].get_or_init(|| build_basis(m)))
}

fn build_basis(m: usize) -> PauliBasis {
    let strings = (0..1usize << (2 * m))
        .map(|k| {
            pauli_digits(k, m)
                .into_iter()
                .map(single_pauli)
                .reduce(|acc, f| kron(&acc, &f))
                .expect("m >= 1")
        })
        .collect();
    PauliBasis { m, strings }
}

/// A set of distinct qubits, kept in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location(Vec<usize>);

impl Location {
    pub fn new(mut qubits: Vec<usize>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(SynthError::invalid("location must not be empty"));
        }
        qubits.sort_unstable();
        if qubits.windows(2).any(|w| w[0] == w[1]) {
            return Err(SynthError::invalid(format!("location has repeated qubits: {qubits:?}")));
        }
        Ok(Location(qubits))
    }

    /// The leading wires `0..m`.
    pub fn leading(m: usize) -> Self {
        Location((0..m).collect())
    }

    pub fn qubits(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("non-empty location")
    }

    pub fn check_width(&self, n: usize) -> Result<()> {
        if self.max() >= n {
            return Err(SynthError::invalid(format!(
                "location {self} does not fit in {n} qubits"
            )));
        }
        Ok(())
    }

    /// Maps a location expressed in this location's local frame (wire `j`
    /// meaning `self[j]`) into the enclosing frame.
    pub fn compose(&self, inner: &Location) -> Result<Location> {
        inner.check_width(self.len())?;
        Location::new(inner.qubits().iter().map(|&j| self.0[j]).collect())
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, q) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{q}")?;
        }
        write!(f, ")")
    }
}

#[inline]
fn bit(index: usize, wire: usize, n: usize) -> usize {
    (index >> (n - 1 - wire)) & 1
}

/// Embeds an `m`-qubit operator into `n` qubits, acting on `loc[j]` with its
/// `j`-th factor and as the identity elsewhere.
pub fn map_pauli(loc: &Location, n: usize, s: &ComplexMatrix) -> Result<ComplexMatrix> {
    loc.check_width(n)?;
    let m = loc.len();
    if s.dim() != 1 << m {
        return Err(SynthError::invalid(format!(
            "operator of dim {} does not match a {m}-qubit location",
            s.dim()
        )));
    }
    let q = loc.qubits();
    let mut on_loc = 0usize;
    for &w in q {
        on_loc |= 1 << (n - 1 - w);
    }
    let local = |idx: usize| q.iter().fold(0, |acc, &w| (acc << 1) | bit(idx, w, n));
    let dim = 1 << n;
    Ok(ComplexMatrix::from_fn(dim, |r, c| {
        if (r & !on_loc) != (c & !on_loc) {
            ZERO
        } else {
            s[(local(r), local(c))]
        }
    }))
}

/// Index form of `P_Q`: `P_Q |x> = |perm[x]>`. In the source frame the block
/// sits on wires `0..m` and the remaining wires follow in ascending order.
pub fn permutation_indices(loc: &Location, n: usize) -> Result<Vec<usize>> {
    loc.check_width(n)?;
    let q = loc.qubits();
    let rest: Vec<usize> = (0..n).filter(|w| !q.contains(w)).collect();
    // destination wire of each source wire
    let dest: Vec<usize> = q.iter().chain(rest.iter()).copied().collect();
    Ok((0..1usize << n)
        .map(|x| (0..n).fold(0usize, |y, src| y | (bit(x, src, n) << (n - 1 - dest[src]))))
        .collect())
}

/// Dense 0/1 permutation matrix `P_Q` with
/// `P_Q (G ⊗ I) P_Qᵀ = G acting on loc`.
pub fn qubit_permutation(loc: &Location, n: usize) -> Result<ComplexMatrix> {
    let perm = permutation_indices(loc, n)?;
    let mut p = ComplexMatrix::zeros(1 << n);
    for (x, &y) in perm.iter().enumerate() {
        p[(y, x)] = ONE;
    }
    Ok(p)
}

/// Convenience: `i * sum_k alpha[k] * sigma_k`.
pub fn generator(basis: &PauliBasis, alpha: &[f64]) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(1 << basis.m);
    for (a, s) in alpha.iter().zip(&basis.strings) {
        if *a != 0.0 {
            h.add_scaled(C64::new(0.0, *a), s);
        }
    }
    h
}
