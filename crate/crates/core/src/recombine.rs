//! Stitches per-block native circuits into one circuit and cleans up the
//! seams between them.

use crate::circuit::{merge_u3, Circuit, Gate, NativeCircuit, U3};
use crate::decomposer::BlockList;
use crate::error::{Result, SynthError};
use crate::gatemodel::distance;
use crate::numkit::ComplexMatrix;

#[derive(Clone, Copy, Debug)]
pub struct PeepholeOptions {
    /// U3 gates within this distance of the identity are removed. Set to a
    /// negative value to keep them all.
    pub identity_tolerance: f64,
}

impl Default for PeepholeOptions {
    fn default() -> Self {
        PeepholeOptions {
            identity_tolerance: 1e-13,
        }
    }
}

fn is_identity(g: &U3, tol: f64) -> bool {
    tol >= 0.0 && distance(&g.matrix(), &ComplexMatrix::identity(2)).is_ok_and(|d| d.value() <= tol)
}

/// Maps every subcircuit into the full register through its block's
/// location and concatenates them in block order.
pub fn concatenate(blocks: &BlockList, subcircuits: &[NativeCircuit]) -> Result<Circuit> {
    if blocks.blocks.len() != subcircuits.len() {
        return Err(SynthError::invalid(format!(
            "{} blocks but {} subcircuits",
            blocks.blocks.len(),
            subcircuits.len()
        )));
    }
    let mut out = Circuit::new(blocks.n);
    for (i, (block, sub)) in blocks.blocks.iter().zip(subcircuits).enumerate() {
        if sub.num_qubits() != block.location.len() {
            return Err(SynthError::invalid(format!(
                "subcircuit {i} has {} wires but its block spans {}",
                sub.num_qubits(),
                block.location
            )));
        }
        for g in sub.gates() {
            out.push(g.relabel(block.location.qubits()))?;
        }
    }
    Ok(out)
}

/// One left-to-right sweep. Each wire keeps a stack of the surviving gates
/// on it, so a removal exposes the gate before it to the next candidate.
fn sweep(c: &Circuit, opts: &PeepholeOptions) -> (Circuit, bool) {
    let n = c.num_qubits();
    let mut out: Vec<Option<Gate>> = Vec::with_capacity(c.len());
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut changed = false;
    for &g in c.gates() {
        match g {
            Gate::U3 { wire, gate } => {
                if let Some(&i) = stacks[wire].last() {
                    if let Some(Gate::U3 { gate: prev, .. }) = out[i] {
                        let merged = merge_u3(&prev, &gate);
                        changed = true;
                        if is_identity(&merged, opts.identity_tolerance) {
                            out[i] = None;
                            stacks[wire].pop();
                        } else {
                            out[i] = Some(Gate::U3 { wire, gate: merged });
                        }
                        continue;
                    }
                }
                if is_identity(&gate, opts.identity_tolerance) {
                    changed = true;
                    continue;
                }
                stacks[wire].push(out.len());
                out.push(Some(g));
            }
            Gate::Cnot { control, target } => {
                let (a, b) = (stacks[control].last(), stacks[target].last());
                if let (Some(&i), Some(&j)) = (a, b) {
                    if i == j && out[i] == Some(g) {
                        out[i] = None;
                        stacks[control].pop();
                        stacks[target].pop();
                        changed = true;
                        continue;
                    }
                }
                stacks[control].push(out.len());
                stacks[target].push(out.len());
                out.push(Some(g));
            }
        }
    }
    let gates = out.into_iter().flatten().collect();
    (Circuit::from_gates(n, gates).expect("wires unchanged"), changed)
}

/// Merges adjacent U3s on a wire and cancels back-to-back identical CNOTs,
/// repeating until nothing changes.
pub fn peephole(c: &Circuit, opts: &PeepholeOptions) -> Circuit {
    let (mut current, mut changed) = sweep(c, opts);
    while changed {
        (current, changed) = sweep(&current, opts);
    }
    current
}

pub fn recombine(blocks: &BlockList, subcircuits: &[NativeCircuit]) -> Result<Circuit> {
    recombine_with(blocks, subcircuits, &PeepholeOptions::default())
}

pub fn recombine_with(blocks: &BlockList, subcircuits: &[NativeCircuit], opts: &PeepholeOptions) -> Result<Circuit> {
    Ok(peephole(&concatenate(blocks, subcircuits)?, opts))
}
