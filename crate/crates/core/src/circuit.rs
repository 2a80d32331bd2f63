//! Native-gate circuit IR: U3 rotations and CNOTs over `n` wires.
//!
//! Wire 0 is the most significant bit of a basis-state index, and gates are
//! stored in application order.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Result, SynthError};
use crate::numkit::{ComplexMatrix, C64, ONE, ZERO};

/// Dense simulation is refused above this many wires.
pub const MAX_SIMULATED_QUBITS: usize = 10;

const DEGENERATE_TOL: f64 = 1e-12;

/// Wraps an angle into `(-π, π]`. Values already in range come back
/// unchanged.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// `[[cos(θ/2), -e^{iλ} sin(θ/2)], [e^{iφ} sin(θ/2), e^{i(λ+φ)} cos(θ/2)]]`.
pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    let mut m = ComplexMatrix::zeros(2);
    m[(0, 0)] = C64::new(c, 0.0);
    m[(0, 1)] = -C64::from_polar(s, lambda);
    m[(1, 0)] = C64::from_polar(s, phi);
    m[(1, 1)] = C64::from_polar(c, lambda + phi);
    m
}

/// A single-qubit rotation, kept in canonical form: `θ ∈ [0, π]` and
/// `φ, λ ∈ (-π, π]`. Canonicalization may change the global phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct U3 {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl U3 {
    pub fn new(theta: f64, phi: f64, lambda: f64) -> Self {
        let mut theta = wrap_angle(theta);
        let (mut phi, mut lambda) = (phi, lambda);
        if theta < 0.0 {
            theta = -theta;
            phi += PI;
            lambda += PI;
        }
        U3 {
            theta,
            phi: wrap_angle(phi),
            lambda: wrap_angle(lambda),
        }
    }

    pub fn identity() -> Self {
        U3::new(0.0, 0.0, 0.0)
    }

    pub fn matrix(&self) -> ComplexMatrix {
        u3_matrix(self.theta, self.phi, self.lambda)
    }

    /// ZYZ extraction: the U3 equal to `m` up to global phase.
    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        if m.dim() != 2 {
            return Err(SynthError::invalid(format!(
                "expected a 2x2 matrix, got dim {}",
                m.dim()
            )));
        }
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let cos_half = (a.norm() + d.norm()) / 2.0;
        let sin_half = (b.norm() + c.norm()) / 2.0;
        let theta = 2.0 * sin_half.atan2(cos_half);
        let (phi, lambda) = if sin_half <= DEGENERATE_TOL {
            ((d * a.conj()).arg(), 0.0)
        } else if cos_half <= DEGENERATE_TOL {
            ((c * (-b).conj()).arg(), 0.0)
        } else {
            let phase = a.arg();
            (c.arg() - phase, (-b).arg() - phase)
        };
        Ok(U3::new(theta, phi, lambda))
    }

    pub fn inverse(&self) -> Self {
        U3::new(-self.theta, -self.lambda, -self.phi)
    }
}

/// The U3 equivalent to applying `first` and then `second`.
pub fn merge_u3(first: &U3, second: &U3) -> U3 {
    U3::from_matrix(&second.matrix().matmul(&first.matrix())).expect("2x2 product")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    U3 { wire: usize, gate: U3 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn u3(wire: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Gate::U3 {
            wire,
            gate: U3::new(theta, phi, lambda),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn wires(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Gate::U3 { wire, .. } => (wire, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn relabel(&self, map: &[usize]) -> Gate {
        match *self {
            Gate::U3 { wire, gate } => Gate::U3 { wire: map[wire], gate },
            Gate::Cnot { control, target } => Gate::cnot(map[control], map[target]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

/// Circuits produced by a native backend. Same representation.
pub type NativeCircuit = Circuit;

impl Circuit {
    pub fn new(n: usize) -> Self {
        Circuit { n, gates: Vec::new() }
    }

    pub fn from_gates(n: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if let Some(w) = gate.wires().find(|&w| w >= self.n) {
            return Err(SynthError::invalid(format!(
                "wire {w} out of range for {} wires",
                self.n
            )));
        }
        if let Gate::Cnot { control, target } = gate {
            if control == target {
                return Err(SynthError::invalid(format!(
                    "cnot with control and target both on {control}"
                )));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    pub fn u3_count(&self) -> usize {
        self.gates.len() - self.cnot_count()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::qasm::emit_qasm(self))
    }
}

fn bit(n: usize, wire: usize) -> usize {
    1 << (n - 1 - wire)
}

/// Applies `gate` to every column of a `2^n x k` row-major buffer, which
/// covers both state vectors (`k = 1`) and full unitaries.
fn apply_gate(gate: &Gate, n: usize, data: &mut [C64], cols: usize) {
    let dim = 1 << n;
    match *gate {
        Gate::U3 { wire, gate } => {
            let m = gate.matrix();
            let (g00, g01, g10, g11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let mask = bit(n, wire);
            for r0 in (0..dim).filter(|r| r & mask == 0) {
                let r1 = r0 | mask;
                for c in 0..cols {
                    let (a, b) = (data[r0 * cols + c], data[r1 * cols + c]);
                    data[r0 * cols + c] = g00 * a + g01 * b;
                    data[r1 * cols + c] = g10 * a + g11 * b;
                }
            }
        }
        Gate::Cnot { control, target } => {
            let (cm, tm) = (bit(n, control), bit(n, target));
            for r0 in (0..dim).filter(|r| r & cm != 0 && r & tm == 0) {
                let r1 = r0 | tm;
                for c in 0..cols {
                    data.swap(r0 * cols + c, r1 * cols + c);
                }
            }
        }
    }
}

fn check_simulable(c: &Circuit) -> Result<()> {
    if c.n > MAX_SIMULATED_QUBITS {
        return Err(SynthError::ResourceLimit(format!(
            "dense simulation is capped at {MAX_SIMULATED_QUBITS} qubits, circuit has {}",
            c.n
        )));
    }
    Ok(())
}

pub fn circuit_to_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    check_simulable(c)?;
    let dim = 1 << c.n;
    let mut u = ComplexMatrix::identity(dim);
    for g in &c.gates {
        apply_gate(g, c.n, u.data_mut(), dim);
    }
    Ok(u)
}

pub fn simulate_state(c: &Circuit, state: &[C64]) -> Result<Vec<C64>> {
    check_simulable(c)?;
    if state.len() != 1 << c.n {
        return Err(SynthError::invalid(format!(
            "state of length {} does not match {} wires",
            state.len(),
            c.n
        )));
    }
    let mut v = state.to_vec();
    for g in &c.gates {
        apply_gate(g, c.n, &mut v, 1);
    }
    Ok(v)
}

/// The standard CNOT with wire 0 as control.
pub fn cnot_matrix() -> ComplexMatrix {
    ComplexMatrix::from_fn(4, |i, j| {
        let j = if j >= 2 { j ^ 1 } else { j };
        if i == j {
            ONE
        } else {
            ZERO
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub cnot_count: usize,
    pub u3_count: usize,
    pub depth: usize,
    pub parallelism: f64,
}

/// Gate counts, critical-path depth (two gates depend on each other iff
/// they share a wire) and average parallelism.
pub fn metrics(c: &Circuit) -> Metrics {
    let mut level = vec![0usize; c.n];
    let mut depth = 0;
    for g in &c.gates {
        let l = 1 + g.wires().map(|w| level[w]).max().unwrap_or(0);
        for w in g.wires() {
            level[w] = l;
        }
        depth = depth.max(l);
    }
    let (cnot_count, u3_count) = (c.cnot_count(), c.u3_count());
    let parallelism = if depth == 0 {
        0.0
    } else {
        (cnot_count + u3_count) as f64 / depth as f64
    };
    Metrics {
        cnot_count,
        u3_count,
        depth,
        parallelism,
    }
}
