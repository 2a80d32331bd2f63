//! Analytic benchmark unitaries.

use std::f64::consts::PI;

use crate::error::{Result, SynthError};
use crate::numkit::{expm, kron, ComplexMatrix, C64, ONE, ZERO};
use crate::paulis::single_pauli;

fn permutation(dim: usize, f: impl Fn(usize) -> usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |i, j| if f(j) == i { ONE } else { ZERO })
}

/// Flips wire 2 when wires 0 and 1 are both set.
pub fn toffoli() -> ComplexMatrix {
    permutation(8, |x| if x & 0b110 == 0b110 { x ^ 1 } else { x })
}

/// Swaps wires 1 and 2 when wire 0 is set.
pub fn fredkin() -> ComplexMatrix {
    permutation(8, |x| match x {
        0b101 => 0b110,
        0b110 => 0b101,
        x => x,
    })
}

/// Quantum Fourier transform: entries `ω^{jk} / √d` with `ω = e^{2πi/d}`.
pub fn qft(n: usize) -> ComplexMatrix {
    let d = 1usize << n;
    let norm = 1.0 / (d as f64).sqrt();
    ComplexMatrix::from_fn(d, |j, k| {
        C64::from_polar(norm, 2.0 * PI * ((j * k) % d) as f64 / d as f64)
    })
}

/// Pauli `digit` on `wire` of an `n`-qubit register.
fn on_wire(digit: u8, wire: usize, n: usize) -> ComplexMatrix {
    (0..n).fold(ComplexMatrix::identity(1), |acc, w| {
        let f = if w == wire {
            single_pauli(digit)
        } else {
            ComplexMatrix::identity(2)
        };
        kron(&acc, &f)
    })
}

pub const TFIM_DT: f64 = 0.1;

/// Open-chain transverse-field Ising Hamiltonian `Σ Z_i Z_{i+1} + Σ X_i`.
pub fn tfim_hamiltonian(n: usize) -> ComplexMatrix {
    let d = 1 << n;
    let mut h = ComplexMatrix::zeros(d);
    for i in 0..n.saturating_sub(1) {
        h.add_scaled(ONE, &on_wire(3, i, n).matmul(&on_wire(3, i + 1, n)));
    }
    for i in 0..n {
        h.add_scaled(ONE, &on_wire(1, i, n));
    }
    h
}

/// `exp(-i H dt)^steps` for the chain above.
pub fn tfim(n: usize, steps: usize) -> Result<ComplexMatrix> {
    if n == 0 || steps == 0 {
        return Err(SynthError::invalid("tfim needs at least one qubit and one step"));
    }
    let step = expm(&tfim_hamiltonian(n).scale(C64::new(0.0, -TFIM_DT)))?;
    let mut u = step.clone();
    for _ in 1..steps {
        u = step.matmul(&u);
    }
    Ok(u)
}

/// CNOTs in a first-order Trotter circuit: two per ZZ term per step.
pub fn tfim_trotter_cnots(n: usize, steps: usize) -> usize {
    2 * n.saturating_sub(1) * steps
}

/// Looks up a target by its benchmark name, e.g. `toffoli` or `tfim-3-5`.
pub fn by_name(name: &str) -> Result<ComplexMatrix> {
    match name {
        "toffoli" => Ok(toffoli()),
        "fredkin" => Ok(fredkin()),
        "qft3" => Ok(qft(3)),
        "qft4" => Ok(qft(4)),
        _ => {
            let parts: Vec<&str> = name.split('-').collect();
            if let ["tfim", n, k] = parts.as_slice() {
                if let (Ok(n), Ok(k)) = (n.parse(), k.parse()) {
                    return tfim(n, k);
                }
            }
            Err(SynthError::invalid(format!("unknown benchmark target `{name}`")))
        }
    }
}
