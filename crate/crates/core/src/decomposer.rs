//! Layer-by-layer decomposition of a target unitary into generic blocks.
//!
//! Each layer appends one variable-location block to the current prefix of
//! fixed blocks and optimizes every parameter at once. The head block is
//! then pinned to its most probable location and re-optimized. If the pinned
//! layer lands farther from the target than the previous layer did, the
//! chosen location is dropped from the head's candidates and the layer is
//! retried.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SynthError};
use crate::gatemodel::{argmax, circuit_product, distance, gate_unitary, random_alpha, Ansatz, GateFunction};
use crate::numkit::{kron_identity, ComplexMatrix};
use crate::optimizer::{minimize, MinimizeOptions};
use crate::paulis::{permutation_indices, Location};
use crate::topology::Topology;

#[derive(Clone, Debug)]
pub struct DecomposeConfig {
    pub block_size: usize,
    /// Stop once the distance to the target is at most this.
    pub threshold: f64,
    pub max_layers: usize,
    pub restarts_per_layer: usize,
    /// A layer is a plateau when its distance exceeds the previous one by
    /// more than `max(plateau_slack * previous, plateau_floor)`.
    pub plateau_slack: f64,
    pub plateau_floor: f64,
    pub seed: u64,
    pub optimizer: MinimizeOptions,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            block_size: 2,
            threshold: 1e-3,
            max_layers: 24,
            restarts_per_layer: 1,
            plateau_slack: 1e-3,
            plateau_floor: 1e-6,
            seed: 0,
            optimizer: MinimizeOptions {
                max_iterations: 2000,
                ..MinimizeOptions::default()
            },
        }
    }
}

impl DecomposeConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(SynthError::invalid(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.block_size < 1 || self.block_size >= n {
            return Err(SynthError::invalid(format!(
                "block size {} must be below the circuit width {n}",
                self.block_size
            )));
        }
        if self.max_layers == 0 || self.restarts_per_layer == 0 {
            return Err(SynthError::invalid("max_layers and restarts must be positive"));
        }
        Ok(())
    }

    fn slack(&self, previous: f64) -> f64 {
        (self.plateau_slack * previous).max(self.plateau_floor)
    }
}

/// One decomposed block: an `m`-qubit unitary on a location.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedBlock {
    pub location: Location,
    pub unitary: ComplexMatrix,
}

impl PlacedBlock {
    /// The block's action on the full `n`-qubit register.
    pub fn embed(&self, n: usize) -> Result<ComplexMatrix> {
        embed_unitary(&self.unitary, &self.location, n)
    }
}

/// `P_Q (U ⊗ I) P_Qᵀ` for an arbitrary block unitary `U`.
pub fn embed_unitary(unitary: &ComplexMatrix, location: &Location, n: usize) -> Result<ComplexMatrix> {
    if unitary.dim() != 1 << location.len() {
        return Err(SynthError::invalid(format!(
            "unitary of dim {} does not match location {location}",
            unitary.dim()
        )));
    }
    let perm = permutation_indices(location, n)?;
    let k = kron_identity(unitary, 1 << (n - location.len()));
    let mut out = ComplexMatrix::zeros(1 << n);
    for (a, &pa) in perm.iter().enumerate() {
        for (b, &pb) in perm.iter().enumerate() {
            out[(pa, pb)] = k[(a, b)];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockList {
    pub n: usize,
    pub blocks: Vec<PlacedBlock>,
    pub achieved_distance: f64,
}

impl BlockList {
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        let mats = self
            .blocks
            .iter()
            .map(|b| b.embed(self.n))
            .collect::<Result<Vec<_>>>()?;
        circuit_product(&mats, self.n)
    }

    fn from_parts(n: usize, blocks: Vec<PlacedBlock>, target: &ComplexMatrix) -> Result<Self> {
        let mut list = BlockList {
            n,
            blocks,
            achieved_distance: 0.0,
        };
        list.achieved_distance = distance(&list.unitary()?, target)?.value();
        Ok(list)
    }
}

fn check_target(target: &ComplexMatrix, t: &Topology) -> Result<usize> {
    let n = t.num_qubits();
    if target.dim() != 1 << n {
        return Err(SynthError::invalid(format!(
            "target of dim {} does not match a {n}-qubit topology",
            target.dim()
        )));
    }
    if !crate::numkit::is_unitary(target, 1e-8) {
        return Err(SynthError::invalid("target is not unitary"));
    }
    Ok(n)
}

struct Attempt {
    distance: f64,
    location: Location,
    /// α of every prefix block followed by the head's.
    alphas: Vec<f64>,
}

fn rng_for(seed: u64, layer: usize, retry: usize, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((layer as u64) << 40) | ((retry as u64) << 20) | restart as u64);
    rng
}

struct LayerSearch<'a> {
    target: &'a ComplexMatrix,
    n: usize,
    m: usize,
    prefix: &'a [Location],
    prefix_alphas: &'a [f64],
    cfg: &'a DecomposeConfig,
}

impl LayerSearch<'_> {
    fn prefix_ansatz(&self) -> Result<Ansatz> {
        let mut ansatz = Ansatz::new(self.n, self.m)?;
        for loc in self.prefix {
            ansatz.push_fixed(loc.clone())?;
        }
        Ok(ansatz)
    }

    fn attempt(&self, candidates: &[Location], mut rng: ChaCha8Rng) -> Result<Attempt> {
        let mut relaxed = self.prefix_ansatz()?;
        relaxed.push_variable(candidates.to_vec())?;
        let mut x0 = self.prefix_alphas.to_vec();
        x0.extend(random_alpha(self.m, &mut rng));
        let alpha_len = x0.len();
        x0.extend(std::iter::repeat_n(0.0, candidates.len()));
        let opts = &self.cfg.optimizer;
        let soft = minimize(|x| relaxed.objective_and_gradient(x, self.target), &x0, opts)?;
        let head = argmax(&soft.x[alpha_len..]);
        let location = candidates[head].clone();

        let mut pinned = self.prefix_ansatz()?;
        pinned.push_fixed(location.clone())?;
        let hard = minimize(
            |x| pinned.objective_and_gradient(x, self.target),
            &soft.x[..alpha_len],
            opts,
        )?;
        let distance = pinned.distance(&hard.x, self.target)?.value();
        Ok(Attempt {
            distance,
            location,
            alphas: hard.x,
        })
    }

    /// Runs every restart for one candidate set and keeps the lowest
    /// distance, preferring the lowest restart index on ties.
    fn best_of_restarts(&self, candidates: &[Location], layer: usize, retry: usize) -> Result<Attempt> {
        let attempts: Vec<Attempt> = (0..self.cfg.restarts_per_layer)
            .into_par_iter()
            .map(|r| self.attempt(candidates, rng_for(self.cfg.seed, layer, retry, r)))
            .collect::<Result<_>>()?;
        Ok(attempts
            .into_iter()
            .reduce(|best, a| if a.distance < best.distance { a } else { best })
            .expect("at least one restart"))
    }
}

/// Decomposes `target` into blocks of `cfg.block_size` qubits placed on
/// locations allowed by `topology`.
pub fn decompose(target: &ComplexMatrix, topology: &Topology, cfg: &DecomposeConfig) -> Result<BlockList> {
    let n = check_target(target, topology)?;
    cfg.validate(n)?;
    let m = cfg.block_size;
    let all_locations = topology.locations(m)?;
    if all_locations.is_empty() {
        return Err(SynthError::invalid(format!(
            "topology {topology} admits no {m}-qubit locations"
        )));
    }

    let mut previous = distance(&ComplexMatrix::identity(1 << n), target)?.value();
    if previous <= cfg.threshold {
        return BlockList::from_parts(n, Vec::new(), target);
    }

    let mut prefix: Vec<Location> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    for layer in 0..cfg.max_layers {
        let search = LayerSearch {
            target,
            n,
            m,
            prefix: &prefix,
            prefix_alphas: &alphas,
            cfg,
        };
        // A head on the same qubits as the last block would merge into it.
        let mut candidates = all_locations.clone();
        if let Some(last) = prefix.last() {
            if candidates.len() > 1 {
                candidates.retain(|c| c != last);
            }
        }
        let mut best: Option<Attempt> = None;
        let mut retry = 0;
        let accepted = loop {
            let attempt = search.best_of_restarts(&candidates, layer, retry)?;
            retry += 1;
            if attempt.distance <= previous + cfg.slack(previous) {
                break attempt;
            }
            candidates.retain(|c| *c != attempt.location);
            if best.as_ref().is_none_or(|b| attempt.distance < b.distance) {
                best = Some(attempt);
            }
            if candidates.is_empty() {
                break best.take().expect("at least one attempt");
            }
        };

        prefix.push(accepted.location);
        alphas = accepted.alphas;
        previous = accepted.distance;
        if previous <= cfg.threshold {
            return materialize(target, n, m, &prefix, &alphas);
        }
    }
    let best = materialize(target, n, m, &prefix, &alphas)?;
    Err(SynthError::DepthLimit {
        max_layers: cfg.max_layers,
        best: Box::new(best),
    })
}

fn materialize(target: &ComplexMatrix, n: usize, m: usize, prefix: &[Location], alphas: &[f64]) -> Result<BlockList> {
    let len = 1 << (2 * m);
    let blocks = prefix
        .iter()
        .zip(alphas.chunks(len))
        .map(|(loc, a)| {
            Ok(PlacedBlock {
                location: loc.clone(),
                unitary: gate_unitary(&GateFunction::new(m, a.to_vec())?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BlockList::from_parts(n, blocks, target)
}

/// Decomposes recursively until every block spans at most `native_size`
/// qubits. Blocks wider than that are decomposed again, one qubit smaller
/// per level, treating their own qubits as fully connected.
pub fn decompose_hierarchical(
    target: &ComplexMatrix,
    topology: &Topology,
    cfg: &DecomposeConfig,
    native_size: usize,
) -> Result<BlockList> {
    let n = check_target(target, topology)?;
    if native_size == 0 || native_size > cfg.block_size {
        return Err(SynthError::invalid(format!(
            "native size {native_size} must be in 1..={}",
            cfg.block_size
        )));
    }
    if n <= native_size {
        let block = PlacedBlock {
            location: Location::leading(n),
            unitary: target.clone(),
        };
        return BlockList::from_parts(n, vec![block], target);
    }
    let mut level_cfg = cfg.clone();
    level_cfg.block_size = cfg.block_size.min(n - 1);
    let outer = decompose(target, topology, &level_cfg)?;
    if outer.blocks.iter().all(|b| b.location.len() <= native_size) {
        return Ok(outer);
    }

    let mut blocks = Vec::new();
    for (i, block) in outer.blocks.iter().enumerate() {
        let width = block.location.len();
        if width <= native_size {
            blocks.push(block.clone());
            continue;
        }
        let mut inner_cfg = cfg.clone();
        inner_cfg.block_size = (width - 1).max(native_size);
        inner_cfg.seed = cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64 + 1);
        let inner = decompose_hierarchical(&block.unitary, &Topology::all_to_all(width), &inner_cfg, native_size)
            .map_err(|e| e.context(format!("block {i} at {}", block.location)))?;
        for b in inner.blocks {
            blocks.push(PlacedBlock {
                location: block.location.compose(&b.location)?,
                unitary: b.unitary,
            });
        }
    }
    BlockList::from_parts(n, blocks, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gatemodel::{fixed_unitary, FixedBlock};
    use crate::numkit::{is_unitary, max_abs_diff};
    use rand::Rng;

    fn random_block(rng: &mut ChaCha8Rng, loc: &[usize], n: usize) -> ComplexMatrix {
        let alpha: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = FixedBlock::new(
            GateFunction::new(2, alpha).unwrap(),
            Location::new(loc.to_vec()).unwrap(),
            n,
        )
        .unwrap();
        fixed_unitary(&b).unwrap()
    }

    #[test]
    fn identity_needs_no_blocks() {
        let bl = decompose(
            &ComplexMatrix::identity(8),
            &Topology::linear(3),
            &DecomposeConfig::default(),
        )
        .unwrap();
        assert!(bl.blocks.is_empty());
        assert_eq!(bl.achieved_distance, 0.0);
    }

    #[test]
    fn single_realizable_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let target = random_block(&mut rng, &[1, 2], 3);
        let bl = decompose(&target, &Topology::all_to_all(3), &DecomposeConfig::default()).unwrap();
        assert_eq!(bl.blocks.len(), 1);
        assert_eq!(bl.blocks[0].location.qubits(), &[1, 2]);
        assert!(bl.achieved_distance <= 1e-8, "{}", bl.achieved_distance);
    }

    #[test]
    fn recomposition_is_self_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let a = random_block(&mut rng, &[0, 1], 3);
        let b = random_block(&mut rng, &[1, 2], 3);
        let target = b.matmul(&a);
        let t = Topology::linear(3);
        let bl = decompose(&target, &t, &DecomposeConfig::default()).unwrap();
        let valid = t.locations(2).unwrap();
        assert!(bl.blocks.iter().all(|b| valid.contains(&b.location)));
        assert!(bl.blocks.iter().all(|b| is_unitary(&b.unitary, 1e-8)));
        let recomposed = distance(&bl.unitary().unwrap(), &target).unwrap().value();
        assert_eq!(recomposed, bl.achieved_distance);
        assert!(bl.achieved_distance <= 1e-3);
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let target = random_block(&mut rng, &[0, 2], 3).matmul(&random_block(&mut rng, &[0, 1], 3));
        let cfg = DecomposeConfig {
            restarts_per_layer: 2,
            ..Default::default()
        };
        let a = decompose(&target, &Topology::all_to_all(3), &cfg).unwrap();
        let b = decompose(&target, &Topology::all_to_all(3), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn depth_limit_carries_best() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let target = random_block(&mut rng, &[0, 1], 3).matmul(&random_block(&mut rng, &[1, 2], 3));
        let cfg = DecomposeConfig {
            max_layers: 1,
            ..Default::default()
        };
        match decompose(&target, &Topology::linear(3), &cfg) {
            Err(SynthError::DepthLimit { best, max_layers }) => {
                assert_eq!(max_layers, 1);
                assert_eq!(best.blocks.len(), 1);
                assert!(best.achieved_distance > cfg.threshold);
            }
            other => panic!("expected depth limit, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = Topology::linear(3);
        let cfg = DecomposeConfig::default();
        assert!(decompose(&ComplexMatrix::identity(4), &t, &cfg).is_err());
        assert!(decompose(&ComplexMatrix::identity(8).scale_real(2.0), &t, &cfg).is_err());
        let wide = DecomposeConfig {
            block_size: 3,
            ..Default::default()
        };
        assert!(decompose(&ComplexMatrix::identity(8), &t, &wide).is_err());
        assert!(decompose_hierarchical(&ComplexMatrix::identity(8), &t, &cfg, 3).is_err());
    }

    #[test]
    fn hierarchy_without_recursion_matches_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let target = random_block(&mut rng, &[0, 2], 3);
        let cfg = DecomposeConfig::default();
        let flat = decompose(&target, &Topology::all_to_all(3), &cfg).unwrap();
        let hier = decompose_hierarchical(&target, &Topology::all_to_all(3), &cfg, 2).unwrap();
        assert_eq!(flat, hier);
    }

    #[test]
    fn embed_matches_fixed_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        let alpha: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = GateFunction::new(2, alpha).unwrap();
        let loc = Location::new(vec![0, 2]).unwrap();
        let via_embed = embed_unitary(&gate_unitary(&f).unwrap(), &loc, 3).unwrap();
        let via_block = fixed_unitary(&FixedBlock::new(f, loc, 3).unwrap()).unwrap();
        assert!(max_abs_diff(&via_embed, &via_block) < 1e-15);
    }
}
