//! Decompose, instantiate, recombine.
//!
//! The decomposer is stochastic and its block count decides most of the
//! CNOT count, so the pipeline can run several independently seeded
//! attempts and keep the cheapest circuit.

use rayon::prelude::*;

use crate::circuit::{circuit_to_unitary, Circuit};
use crate::decomposer::{decompose_hierarchical, BlockList, DecomposeConfig};
use crate::error::{Result, SynthError};
use crate::gatemodel::distance;
use crate::instantiate::{instantiate_blocks, NativeBackend};
use crate::numkit::ComplexMatrix;
use crate::recombine::recombine;
use crate::topology::Topology;

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub decompose: DecomposeConfig,
    pub native_threshold: f64,
    /// Independent decompositions to run. Attempt 0 uses the configured
    /// seed as is.
    pub attempts: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            decompose: DecomposeConfig::default(),
            native_threshold: 1e-8,
            attempts: 16,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutcome {
    pub circuit: Circuit,
    pub blocks: BlockList,
    /// Distance of the final circuit to the target.
    pub distance: f64,
    /// False when the decomposer ran out of layers and the circuit is a
    /// best effort.
    pub converged: bool,
}

/// Largest block width the backend accepts, capped by the block size.
fn native_size(backend: &dyn NativeBackend, block_size: usize) -> Result<usize> {
    (1..=block_size).rev().find(|&w| backend.supports(w)).ok_or_else(|| {
        SynthError::invalid(format!(
            "backend {} supports no block width up to {block_size}",
            backend.name()
        ))
    })
}

pub fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    if attempt == 0 {
        seed
    } else {
        seed.wrapping_add((attempt as u64).wrapping_mul(0xd1b5_4a32_d192_ed03))
    }
}

fn synthesize_once(
    target: &ComplexMatrix,
    topology: &Topology,
    opts: &SynthOptions,
    cfg: &DecomposeConfig,
    backend: &dyn NativeBackend,
) -> Result<SynthOutcome> {
    let native = native_size(backend, cfg.block_size)?;
    let (blocks, converged) = match decompose_hierarchical(target, topology, cfg, native) {
        Ok(b) => (b, true),
        Err(e) => match e.root() {
            SynthError::DepthLimit { best, .. } => ((**best).clone(), false),
            _ => return Err(e),
        },
    };
    let subcircuits = instantiate_blocks(&blocks, backend, opts.native_threshold, cfg.seed)?;
    let circuit = recombine(&blocks, &subcircuits)?;
    let distance = distance(&circuit_to_unitary(&circuit)?, target)?.value();
    Ok(SynthOutcome {
        circuit,
        blocks,
        distance,
        converged: converged && distance <= cfg.threshold,
    })
}

/// Ranks outcomes: within-threshold results first, then fewer CNOTs, fewer
/// U3s and lower distance.
fn rank(o: &SynthOutcome) -> (bool, usize, usize, f64) {
    if o.converged {
        (false, o.circuit.cnot_count(), o.circuit.u3_count(), o.distance)
    } else {
        (true, 0, 0, o.distance)
    }
}

pub fn synthesize(
    target: &ComplexMatrix,
    topology: &Topology,
    opts: &SynthOptions,
    backend: &dyn NativeBackend,
) -> Result<SynthOutcome> {
    if opts.attempts == 0 {
        return Err(SynthError::invalid("at least one attempt is needed"));
    }
    let outcomes: Vec<SynthOutcome> = (0..opts.attempts)
        .into_par_iter()
        .map(|a| {
            let mut cfg = opts.decompose.clone();
            cfg.seed = attempt_seed(cfg.seed, a);
            synthesize_once(target, topology, opts, &cfg, backend)
        })
        .collect::<Result<_>>()?;
    Ok(outcomes
        .into_iter()
        .reduce(|best, o| if rank(&o) < rank(&best) { o } else { best })
        .expect("at least one attempt"))
}
