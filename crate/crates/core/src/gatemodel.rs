//! Generic gate parameterizations and the synthesis objective.
//!
//! A block's function is `G(α) = exp(i α·σ)` over the `m`-qubit Pauli basis.
//! A fixed block places `G` on one location by conjugating `G ⊗ I` with a
//! wire permutation; a variable block multiplexes that permutation over a
//! candidate set, weighted by the softmax of its location logits.
//!
//! [`Ansatz`] evaluates the phase-tolerant distance and its exact gradient
//! for a whole sequence of blocks from a flat parameter vector. The layout
//! of that vector is every block's `α` in block order, followed by the
//! logits of every variable block in block order.

use std::fmt;

use rand::Rng;

use crate::error::{Result, SynthError};
use crate::numkit::{expm, expm_frechet, kron_identity, ComplexMatrix, C64, I};
use crate::paulis::{generator, pauli_basis, permutation_indices, Location};

#[derive(Clone, Debug, PartialEq)]
pub struct GateFunction {
    m: usize,
    alpha: Vec<f64>,
}

impl GateFunction {
    pub fn new(m: usize, alpha: Vec<f64>) -> Result<Self> {
        pauli_basis(m)?;
        if alpha.len() != 1 << (2 * m) {
            return Err(SynthError::invalid(format!(
                "a {m}-qubit gate function takes {} coefficients, got {}",
                1 << (2 * m),
                alpha.len()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(SynthError::invalid("gate function coefficients must be finite"));
        }
        Ok(GateFunction { m, alpha })
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::new(m, vec![0.0; 1 << (2 * m)])
    }

    /// Coefficients drawn i.i.d. from `[-0.1, 0.1]`.
    pub fn random_small<R: Rng>(m: usize, rng: &mut R) -> Result<Self> {
        Self::new(m, random_alpha(m, rng))
    }

    pub fn num_qubits(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

pub(crate) fn random_alpha<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..1usize << (2 * m)).map(|_| rng.gen_range(-0.1..=0.1)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedBlock {
    pub function: GateFunction,
    pub location: Location,
    pub n: usize,
}

impl FixedBlock {
    pub fn new(function: GateFunction, location: Location, n: usize) -> Result<Self> {
        if location.len() != function.m {
            return Err(SynthError::invalid(format!(
                "location {location} does not match a {}-qubit function",
                function.m
            )));
        }
        location.check_width(n)?;
        Ok(FixedBlock { function, location, n })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableBlock {
    pub function: GateFunction,
    pub candidates: Vec<Location>,
    pub logits: Vec<f64>,
    pub n: usize,
}

impl VariableBlock {
    pub fn new(function: GateFunction, candidates: Vec<Location>, logits: Vec<f64>, n: usize) -> Result<Self> {
        if candidates.is_empty() {
            return Err(SynthError::invalid("variable block needs at least one candidate"));
        }
        if logits.len() != candidates.len() {
            return Err(SynthError::invalid(format!(
                "{} logits for {} candidate locations",
                logits.len(),
                candidates.len()
            )));
        }
        for loc in &candidates {
            if loc.len() != function.m {
                return Err(SynthError::invalid(format!(
                    "candidate {loc} does not match a {}-qubit function",
                    function.m
                )));
            }
            loc.check_width(n)?;
        }
        Ok(VariableBlock {
            function,
            candidates,
            logits,
            n,
        })
    }

    /// Index of the most probable candidate (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.logits)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Fixed(FixedBlock),
    Variable(VariableBlock),
}

impl Block {
    pub fn width(&self) -> usize {
        match self {
            Block::Fixed(b) => b.n,
            Block::Variable(b) => b.n,
        }
    }

    pub fn unitary(&self) -> Result<ComplexMatrix> {
        match self {
            Block::Fixed(b) => fixed_unitary(b),
            Block::Variable(b) => variable_unitary(b),
        }
    }
}

/// Hilbert-Schmidt based distance in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Distance(f64);

impl Distance {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.0)
    }
}

pub fn gate_unitary(function: &GateFunction) -> Result<ComplexMatrix> {
    let basis = pauli_basis(function.m)?;
    expm(&generator(basis, &function.alpha))
}

fn conjugate_by_permutation(k: &ComplexMatrix, perm: &[usize]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(k.dim());
    for (a, &pa) in perm.iter().enumerate() {
        for (b, &pb) in perm.iter().enumerate() {
            out[(pa, pb)] = k[(a, b)];
        }
    }
    out
}

/// `P_Q (G ⊗ I) P_Qᵀ`.
pub fn fixed_unitary(block: &FixedBlock) -> Result<ComplexMatrix> {
    let g = gate_unitary(&block.function)?;
    let k = kron_identity(&g, 1 << (block.n - block.function.m));
    let perm = permutation_indices(&block.location, block.n)?;
    Ok(conjugate_by_permutation(&k, &perm))
}

fn permutation_mixture(perms: &[Vec<usize>], weights: &[f64], dim: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(dim);
    for (perm, &w) in perms.iter().zip(weights) {
        for (x, &y) in perm.iter().enumerate() {
            s[(y, x)] += C64::from(w);
        }
    }
    s
}

/// `(Σ s_Q P_Q)(G ⊗ I)(Σ s_Q P_Qᵀ)` with `s = softmax(logits)`. Not unitary
/// unless `s` is (numerically) one-hot.
pub fn variable_unitary(block: &VariableBlock) -> Result<ComplexMatrix> {
    let g = gate_unitary(&block.function)?;
    let k = kron_identity(&g, 1 << (block.n - block.function.m));
    let perms = block
        .candidates
        .iter()
        .map(|q| permutation_indices(q, block.n))
        .collect::<Result<Vec<_>>>()?;
    let s = permutation_mixture(&perms, &softmax(&block.logits), 1 << block.n);
    Ok(s.matmul(&k).matmul(&s.transpose()))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `M_{k-1} ⋯ M_1 M_0`: block 0 acts first.
pub fn circuit_product(blocks: &[ComplexMatrix], n: usize) -> Result<ComplexMatrix> {
    let dim = 1usize << n;
    let mut acc = ComplexMatrix::identity(dim);
    for (i, m) in blocks.iter().enumerate() {
        if m.dim() != dim {
            return Err(SynthError::invalid(format!(
                "block {i} has dim {}, expected {dim}",
                m.dim()
            )));
        }
        acc = m.matmul(&acc);
    }
    Ok(acc)
}

fn overlap(circuit: &ComplexMatrix, target: &ComplexMatrix) -> Result<C64> {
    if circuit.dim() != target.dim() {
        return Err(SynthError::invalid(format!(
            "dimension mismatch: {} vs {}",
            circuit.dim(),
            target.dim()
        )));
    }
    Ok(target.dagger().trace_of_product(circuit))
}

/// `1 - |Tr(U_T† U_C)| / d`. Insensitive to global phase.
pub fn distance(circuit: &ComplexMatrix, target: &ComplexMatrix) -> Result<Distance> {
    let t = overlap(circuit, target)?;
    Ok(Distance((1.0 - t.norm() / circuit.dim() as f64).clamp(0.0, 1.0)))
}

/// `1 - Re(Tr(U_T† U_C)) / d`. Phase sensitive, ranges over `[0, 2]`.
pub fn distance_frobenius(circuit: &ComplexMatrix, target: &ComplexMatrix) -> Result<f64> {
    let t = overlap(circuit, target)?;
    Ok(1.0 - t.re / circuit.dim() as f64)
}

#[derive(Clone, Debug)]
enum Slot {
    Fixed {
        location: Location,
        perm: Vec<usize>,
    },
    Variable {
        candidates: Vec<Location>,
        perms: Vec<Vec<usize>>,
    },
}

/// The structure of a block sequence with its parameters factored out.
#[derive(Clone, Debug)]
pub struct Ansatz {
    n: usize,
    m: usize,
    slots: Vec<Slot>,
}

impl Ansatz {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        pauli_basis(m)?;
        if m > n {
            return Err(SynthError::invalid(format!(
                "{m}-qubit blocks do not fit in {n} qubits"
            )));
        }
        Ok(Ansatz {
            n,
            m,
            slots: Vec::new(),
        })
    }

    pub fn push_fixed(&mut self, location: Location) -> Result<()> {
        self.check_location(&location)?;
        let perm = permutation_indices(&location, self.n)?;
        self.slots.push(Slot::Fixed { location, perm });
        Ok(())
    }

    pub fn push_variable(&mut self, candidates: Vec<Location>) -> Result<()> {
        if candidates.is_empty() {
            return Err(SynthError::invalid("variable block needs at least one candidate"));
        }
        let mut perms = Vec::with_capacity(candidates.len());
        for loc in &candidates {
            self.check_location(loc)?;
            perms.push(permutation_indices(loc, self.n)?);
        }
        self.slots.push(Slot::Variable { candidates, perms });
        Ok(())
    }

    fn check_location(&self, loc: &Location) -> Result<()> {
        if loc.len() != self.m {
            return Err(SynthError::invalid(format!(
                "location {loc} does not match block size {}",
                self.m
            )));
        }
        loc.check_width(self.n)
    }

    /// Builds the structure for `blocks` and returns it with the matching
    /// flat parameter vector.
    pub fn from_blocks(blocks: &[Block]) -> Result<(Self, Vec<f64>)> {
        let first = blocks.first().ok_or_else(|| SynthError::invalid("no blocks given"))?;
        let n = first.width();
        let m = match first {
            Block::Fixed(b) => b.function.m,
            Block::Variable(b) => b.function.m,
        };
        let mut ansatz = Ansatz::new(n, m)?;
        let mut alphas = Vec::new();
        let mut logits = Vec::new();
        for block in blocks {
            if block.width() != n {
                return Err(SynthError::invalid("blocks have different circuit widths"));
            }
            match block {
                Block::Fixed(b) => {
                    ansatz.push_fixed(b.location.clone())?;
                    alphas.extend_from_slice(b.function.alpha());
                }
                Block::Variable(b) => {
                    ansatz.push_variable(b.candidates.clone())?;
                    alphas.extend_from_slice(b.function.alpha());
                    logits.extend_from_slice(&b.logits);
                }
            }
        }
        alphas.extend(logits);
        Ok((ansatz, alphas))
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn num_blocks(&self) -> usize {
        self.slots.len()
    }

    fn alpha_len(&self) -> usize {
        1 << (2 * self.m)
    }

    pub fn num_params(&self) -> usize {
        self.slots.len() * self.alpha_len()
            + self
                .slots
                .iter()
                .map(|s| match s {
                    Slot::Fixed { .. } => 0,
                    Slot::Variable { candidates, .. } => candidates.len(),
                })
                .sum::<usize>()
    }

    /// Location of block `i` if it is fixed.
    pub fn fixed_location(&self, i: usize) -> Option<&Location> {
        match &self.slots[i] {
            Slot::Fixed { location, .. } => Some(location),
            Slot::Variable { .. } => None,
        }
    }

    pub fn candidates(&self, i: usize) -> Option<&[Location]> {
        match &self.slots[i] {
            Slot::Fixed { .. } => None,
            Slot::Variable { candidates, .. } => Some(candidates),
        }
    }

    /// Slice of `x` holding block `i`'s coefficients.
    pub fn alpha<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        let len = self.alpha_len();
        &x[i * len..(i + 1) * len]
    }

    /// Offsets into `x` of each variable block's logits, by block index.
    fn logit_offsets(&self) -> Vec<Option<usize>> {
        let mut next = self.slots.len() * self.alpha_len();
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Fixed { .. } => None,
                Slot::Variable { candidates, .. } => {
                    let at = next;
                    next += candidates.len();
                    Some(at)
                }
            })
            .collect()
    }

    pub fn logits<'a>(&self, x: &'a [f64], i: usize) -> Option<&'a [f64]> {
        let offset = self.logit_offsets()[i]?;
        let len = self.candidates(i)?.len();
        Some(&x[offset..offset + len])
    }

    /// Materializes the blocks described by `x`.
    pub fn blocks(&self, x: &[f64]) -> Result<Vec<Block>> {
        self.check_params(x)?;
        let offsets = self.logit_offsets();
        self.slots
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                let function = GateFunction::new(self.m, self.alpha(x, i).to_vec())?;
                Ok(match slot {
                    Slot::Fixed { location, .. } => Block::Fixed(FixedBlock::new(function, location.clone(), self.n)?),
                    Slot::Variable { candidates, .. } => {
                        let at = offsets[i].expect("variable slot");
                        let logits = x[at..at + candidates.len()].to_vec();
                        Block::Variable(VariableBlock::new(function, candidates.clone(), logits, self.n)?)
                    }
                })
            })
            .collect()
    }

    fn check_params(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_params() {
            return Err(SynthError::invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                x.len()
            )));
        }
        Ok(())
    }

    fn check_target(&self, target: &ComplexMatrix) -> Result<()> {
        if target.dim() != 1 << self.n {
            return Err(SynthError::invalid(format!(
                "target dim {} does not match a {}-qubit circuit",
                target.dim(),
                self.n
            )));
        }
        Ok(())
    }

    fn block_matrices(&self, x: &[f64]) -> Result<Vec<BlockState>> {
        let basis = pauli_basis(self.m)?;
        let pad = 1 << (self.n - self.m);
        let offsets = self.logit_offsets();
        self.slots
            .iter()
            .enumerate()
            .map(|(i, slot)| {
                let generator = generator(basis, self.alpha(x, i));
                let kron = kron_identity(&expm(&generator)?, pad);
                Ok(match slot {
                    Slot::Fixed { perm, .. } => BlockState {
                        full: conjugate_by_permutation(&kron, perm),
                        generator,
                        kron,
                        mixture: None,
                    },
                    Slot::Variable { perms, candidates } => {
                        let at = offsets[i].expect("variable slot");
                        let weights = softmax(&x[at..at + candidates.len()]);
                        let s = permutation_mixture(perms, &weights, 1 << self.n);
                        BlockState {
                            full: s.matmul(&kron).matmul(&s.transpose()),
                            generator,
                            kron,
                            mixture: Some((s, weights)),
                        }
                    }
                })
            })
            .collect()
    }

    /// Full unitary (or, with soft location weights, the relaxed operator)
    /// realized by `x`.
    pub fn unitary(&self, x: &[f64]) -> Result<ComplexMatrix> {
        self.check_params(x)?;
        let states = self.block_matrices(x)?;
        let mats: Vec<ComplexMatrix> = states.into_iter().map(|s| s.full).collect();
        circuit_product(&mats, self.n)
    }

    pub fn distance(&self, x: &[f64], target: &ComplexMatrix) -> Result<Distance> {
        self.check_target(target)?;
        distance(&self.unitary(x)?, target)
    }

    /// Phase-tolerant distance to `target` and its gradient with respect to
    /// `x`.
    pub fn objective_and_gradient(&self, x: &[f64], target: &ComplexMatrix) -> Result<(f64, Vec<f64>)> {
        self.check_params(x)?;
        self.check_target(target)?;
        let dim = 1usize << self.n;
        let d = dim as f64;
        let states = self.block_matrices(x)?;
        let k = states.len();

        // prefix[j] = M_{j-1}..M_0, suffix[j] = M_{k-1}..M_{j+1}
        let mut prefix = Vec::with_capacity(k + 1);
        prefix.push(ComplexMatrix::identity(dim));
        for s in &states {
            let next = s.full.matmul(prefix.last().expect("non-empty"));
            prefix.push(next);
        }
        let mut suffix = vec![ComplexMatrix::identity(dim); k];
        for j in (0..k.saturating_sub(1)).rev() {
            suffix[j] = suffix[j + 1].matmul(&states[j + 1].full);
        }

        let target_dag = target.dagger();
        let trace = target_dag.trace_of_product(&prefix[k]);
        let magnitude = trace.norm();
        let value = (1.0 - magnitude / d).max(0.0);
        let mut grad = vec![0.0; x.len()];
        if magnitude == 0.0 {
            // |Tr| is not differentiable at zero; use the zero subgradient.
            return Ok((value, grad));
        }
        let phase = trace.conj() / magnitude;
        let to_grad = |dt: C64| -(phase * dt).re / d;

        let basis = pauli_basis(self.m)?;
        let pad = 1usize << (self.n - self.m);
        let alpha_len = self.alpha_len();
        let offsets = self.logit_offsets();
        for (j, (slot, state)) in self.slots.iter().zip(&states).enumerate() {
            let env = prefix[j].matmul(&target_dag).matmul(&suffix[j]);
            let reduced = match (slot, &state.mixture) {
                (Slot::Fixed { perm, .. }, _) => ComplexMatrix::from_fn(dim, |a, b| env[(perm[a], perm[b])]),
                (Slot::Variable { .. }, Some((s, _))) => s.transpose().matmul(&env).matmul(s),
                (Slot::Variable { .. }, None) => unreachable!("variable slots carry a mixture"),
            };
            let partial = partial_trace_tail(&reduced, pad);
            // Tr(X L(A, iσ)) = Tr(L(A, X) iσ)
            let adjoint = expm_frechet(&state.generator, &partial)?;
            for (kk, sigma) in basis.strings().iter().enumerate() {
                let dt = I * adjoint.trace_of_product(sigma);
                grad[j * alpha_len + kk] = to_grad(dt);
            }

            if let (Slot::Variable { perms, .. }, Some((s, weights))) = (slot, &state.mixture) {
                let left = state.kron.matmul(&s.transpose()).matmul(&env);
                let right = env.matmul(s).matmul(&state.kron);
                let t_left: Vec<C64> = perms.iter().map(|p| (0..dim).map(|b| left[(b, p[b])]).sum()).collect();
                let t_right: Vec<C64> = perms.iter().map(|p| (0..dim).map(|b| right[(p[b], b)]).sum()).collect();
                let mean_left: C64 = weights.iter().zip(&t_left).map(|(w, t)| t * *w).sum();
                let mean_right: C64 = weights.iter().zip(&t_right).map(|(w, t)| t * *w).sum();
                let at = offsets[j].expect("variable slot");
                for q in 0..perms.len() {
                    let dt = (t_left[q] - mean_left + t_right[q] - mean_right) * weights[q];
                    grad[at + q] = to_grad(dt);
                }
            }
        }
        Ok((value, grad))
    }
}

struct BlockState {
    full: ComplexMatrix,
    generator: ComplexMatrix,
    kron: ComplexMatrix,
    mixture: Option<(ComplexMatrix, Vec<f64>)>,
}

/// Traces out the trailing `pad`-dimensional factor: `X[a][a'] = Σ_b R[a·pad+b][a'·pad+b]`.
fn partial_trace_tail(r: &ComplexMatrix, pad: usize) -> ComplexMatrix {
    let small = r.dim() / pad;
    ComplexMatrix::from_fn(small, |a, a2| (0..pad).map(|b| r[(a * pad + b, a2 * pad + b)]).sum())
}

/// Distance and gradient for an explicit block list. See [`Ansatz`] for the
/// parameter layout.
pub fn objective_and_gradient(blocks: &[Block], target: &ComplexMatrix) -> Result<(f64, Vec<f64>)> {
    if blocks.is_empty() {
        let n = target.dim().trailing_zeros() as usize;
        let d = distance(&ComplexMatrix::identity(1 << n), target)?;
        return Ok((d.value(), Vec::new()));
    }
    let (ansatz, x) = Ansatz::from_blocks(blocks)?;
    ansatz.objective_and_gradient(&x, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{is_unitary, kron, max_abs_diff, ONE, ZERO};
    use crate::paulis::{map_pauli, qubit_permutation};
    use itertools::Itertools;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn loc(q: &[usize]) -> Location {
        Location::new(q.to_vec()).unwrap()
    }

    fn random_alpha_wide<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
        (0..1usize << (2 * m)).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn gate_function_validation() {
        assert!(GateFunction::new(2, vec![0.0; 15]).is_err());
        assert!(GateFunction::new(1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(GateFunction::new(0, vec![]).is_err());
    }

    #[test]
    fn gate_unitary_closed_forms() {
        let g = gate_unitary(&GateFunction::identity(2).unwrap()).unwrap();
        assert!(max_abs_diff(&g, &ComplexMatrix::identity(4)) < 1e-15);

        let theta = 0.37;
        let g = gate_unitary(&GateFunction::new(1, vec![0.0, theta, 0.0, 0.0]).unwrap()).unwrap();
        let want = ComplexMatrix::from_fn(2, |i, j| {
            if i == j {
                C64::from(theta.cos())
            } else {
                I * theta.sin()
            }
        });
        assert!(max_abs_diff(&g, &want) < 1e-14);
    }

    #[test]
    fn gate_unitary_matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = pauli_basis(2).unwrap();
        for _ in 0..10 {
            let alpha = random_alpha_wide(2, &mut rng);
            let mut h = ComplexMatrix::zeros(4);
            for (s, &a) in basis.strings().iter().zip(&alpha) {
                h = &h + &s.scale(C64::new(0.0, a));
            }
            let want = crate::numkit::testutil::taylor_expm(&h, 60);
            let got = gate_unitary(&GateFunction::new(2, alpha).unwrap()).unwrap();
            assert!(max_abs_diff(&got, &want) < 1e-10);
            assert!(is_unitary(&got, 1e-10));
        }
    }

    #[test]
    fn fixed_unitary_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let zero = FixedBlock::new(GateFunction::identity(2).unwrap(), loc(&[0, 2]), 3).unwrap();
        assert!(max_abs_diff(&fixed_unitary(&zero).unwrap(), &ComplexMatrix::identity(8)) < 1e-15);

        let f = GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap();
        let b = FixedBlock::new(f.clone(), loc(&[0, 1]), 2).unwrap();
        assert_eq!(fixed_unitary(&b).unwrap(), gate_unitary(&f).unwrap());
    }

    #[test]
    fn fixed_unitary_matches_direct_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = pauli_basis(2).unwrap();
        for q in (0..3).combinations(2) {
            let location = loc(&q);
            for _ in 0..50 {
                let alpha = random_alpha_wide(2, &mut rng);
                let mut h = ComplexMatrix::zeros(8);
                for (a, s) in alpha.iter().zip(basis.strings()) {
                    h.add_scaled(C64::new(0.0, *a), &map_pauli(&location, 3, s).unwrap());
                }
                let direct = expm(&h).unwrap();
                let b = FixedBlock::new(GateFunction::new(2, alpha).unwrap(), location.clone(), 3).unwrap();
                let u = fixed_unitary(&b).unwrap();
                assert!(max_abs_diff(&u, &direct) <= 1e-10);
                assert!(is_unitary(&u, 1e-10));
            }
        }
    }

    #[test]
    fn variable_unitary_singleton_and_sharp_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap();
        let single = VariableBlock::new(f.clone(), vec![loc(&[1, 2])], vec![-3.7], 3).unwrap();
        let fixed = fixed_unitary(&FixedBlock::new(f.clone(), loc(&[1, 2]), 3).unwrap()).unwrap();
        assert!(max_abs_diff(&variable_unitary(&single).unwrap(), &fixed) < 1e-15);

        let cands = vec![loc(&[0, 1]), loc(&[0, 2]), loc(&[1, 2])];
        let sharp = VariableBlock::new(f.clone(), cands.clone(), vec![0.0, 40.0, 5.0], 3).unwrap();
        let at = fixed_unitary(&FixedBlock::new(f, loc(&[0, 2]), 3).unwrap()).unwrap();
        let v = variable_unitary(&sharp).unwrap();
        assert!(max_abs_diff(&v, &at) < 1e-10);
        assert!(is_unitary(&v, 1e-10));
    }

    #[test]
    fn variable_unitary_identity_function_uniform_weights() {
        // With G = I the operator is S Sᵀ, S = (P_01 + P_12)/2. P_01 is the
        // identity and P_12 sends wire0->1, wire1->2, wire2->0.
        let b = VariableBlock::new(
            GateFunction::identity(2).unwrap(),
            vec![loc(&[0, 1]), loc(&[1, 2])],
            vec![0.0, 0.0],
            3,
        )
        .unwrap();
        let v = variable_unitary(&b).unwrap();
        let p0 = qubit_permutation(&loc(&[0, 1]), 3).unwrap();
        let p1 = qubit_permutation(&loc(&[1, 2]), 3).unwrap();
        let s = (&p0 + &p1).scale_real(0.5);
        let oracle = s.matmul(&s.transpose());
        assert!(max_abs_diff(&v, &oracle) < 1e-15);
        // Frozen by hand: S Sᵀ = (2I + P + Pᵀ)/4 where P = P_12 cycles the
        // wires, so diagonal entries are 1 on the fixed points |000>,|111>
        // and 1/2 elsewhere.
        for i in 0..8 {
            let want = if i == 0 || i == 7 { 1.0 } else { 0.5 };
            assert!((v[(i, i)].re - want).abs() < 1e-15, "diag {i}");
        }
        assert!(!is_unitary(&v, 1e-3));
        // |001> (wire 2 set) -> P maps it to |100>, Pᵀ maps it to |010>.
        assert!((v[(4, 1)].re - 0.25).abs() < 1e-15);
        assert!((v[(2, 1)].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let s = softmax(&[1000.0, 0.0]);
        assert_eq!(s[0], 1.0);
        assert!(s[1] < 1e-300 && s[1] >= 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let l: Vec<f64> = (0..5).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let s = softmax(&l);
            assert!(s.iter().all(|&x| x > 0.0 && x < 1.0));
            assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn circuit_product_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert_eq!(circuit_product(&[], 2).unwrap(), ComplexMatrix::identity(4));
        let a = gate_unitary(&GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap()).unwrap();
        let b = gate_unitary(&GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap()).unwrap();
        assert_eq!(circuit_product(std::slice::from_ref(&a), 2).unwrap(), a);
        let ab = circuit_product(&[a.clone(), b.clone()], 2).unwrap();
        // apply A then B to each basis state
        for col in 0..4 {
            let mut e = vec![ZERO; 4];
            e[col] = ONE;
            let out = b.apply(&a.apply(&e));
            for row in 0..4 {
                assert!((ab[(row, col)] - out[row]).norm() < 1e-14);
            }
        }
        assert!(circuit_product(&[a], 3).is_err());
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = gate_unitary(&GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap()).unwrap();
        assert!(distance(&u, &u).unwrap().value() < 1e-15);
        let phased = u.scale(C64::from_polar(1.0, 1.234));
        assert!(distance(&u, &phased).unwrap().value() < 1e-15);
        assert!(distance(&phased, &u).unwrap().value() < 1e-15);
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(distance(&ComplexMatrix::identity(2), &x).unwrap().value(), 1.0);
        assert!(distance(&u, &ComplexMatrix::identity(2)).is_err());
    }

    #[test]
    fn frobenius_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = gate_unitary(&GateFunction::new(1, random_alpha_wide(1, &mut rng)).unwrap()).unwrap();
        assert!(distance_frobenius(&u, &u).unwrap().abs() < 1e-15);
        assert!((distance_frobenius(&u, &u.scale_real(-1.0)).unwrap() - 2.0).abs() < 1e-15);
        let i2 = ComplexMatrix::identity(2);
        let phased = i2.scale(C64::from_polar(1.0, PI / 2.0));
        assert!((distance_frobenius(&i2, &phased).unwrap() - 1.0).abs() < 1e-15);
        assert!(distance(&i2, &phased).unwrap().value() < 1e-15);
    }

    #[test]
    fn distance_zero_only_for_phase_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = gate_unitary(&GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap()).unwrap();
        let other = gate_unitary(&GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap()).unwrap();
        let d = distance(&u, &other).unwrap().value();
        assert!(d > 1e-3 && d <= 1.0);
    }

    #[test]
    fn stationary_at_exact_solution() {
        let block = Block::Fixed(FixedBlock::new(GateFunction::identity(2).unwrap(), loc(&[0, 1]), 2).unwrap());
        let (f, g) = objective_and_gradient(&[block], &ComplexMatrix::identity(4)).unwrap();
        assert!(f.abs() < 1e-15);
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn parameter_count() {
        let mut ansatz = Ansatz::new(4, 2).unwrap();
        ansatz
            .push_variable(vec![loc(&[0, 1]), loc(&[1, 2]), loc(&[2, 3])])
            .unwrap();
        assert_eq!(ansatz.num_params(), 16 + 3);
        ansatz.push_fixed(loc(&[0, 3])).unwrap();
        assert_eq!(ansatz.num_params(), 2 * 16 + 3);
        assert!(ansatz.push_fixed(loc(&[0, 1, 2])).is_err());
    }

    fn central_difference(ansatz: &Ansatz, x: &[f64], target: &ComplexMatrix, h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                let fp = ansatz.distance(&xp, target).unwrap().value();
                let fm = ansatz.distance(&xm, target).unwrap().value();
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let all = vec![loc(&[0, 1]), loc(&[0, 2]), loc(&[1, 2])];
        for trial in 0..6 {
            let mut ansatz = Ansatz::new(3, 2).unwrap();
            ansatz.push_fixed(all[trial % 3].clone()).unwrap();
            ansatz.push_variable(all.clone()).unwrap();
            ansatz.push_fixed(all[(trial + 1) % 3].clone()).unwrap();
            let x: Vec<f64> = (0..ansatz.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target = gate_unitary(&GateFunction::new(3, random_alpha_wide(3, &mut rng)).unwrap()).unwrap();
            let (_, g) = ansatz.objective_and_gradient(&x, &target).unwrap();
            let fd = central_difference(&ansatz, &x, &target, 1e-6);
            let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * scale, "trial {trial}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn block_roundtrip_through_ansatz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f1 = GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap();
        let f2 = GateFunction::new(2, random_alpha_wide(2, &mut rng)).unwrap();
        let blocks = vec![
            Block::Variable(VariableBlock::new(f1, vec![loc(&[0, 1]), loc(&[1, 2])], vec![0.3, -0.2], 3).unwrap()),
            Block::Fixed(FixedBlock::new(f2, loc(&[0, 2]), 3).unwrap()),
        ];
        let (ansatz, x) = Ansatz::from_blocks(&blocks).unwrap();
        assert_eq!(ansatz.blocks(&x).unwrap(), blocks);
        let mats: Vec<_> = blocks.iter().map(|b| b.unitary().unwrap()).collect();
        let direct = circuit_product(&mats, 3).unwrap();
        assert!(max_abs_diff(&direct, &ansatz.unitary(&x).unwrap()) < 1e-14);
        assert_eq!(ansatz.logits(&x, 0).unwrap(), &[0.3, -0.2]);
        assert!(ansatz.logits(&x, 1).is_none());
    }

    #[test]
    fn kron_padding_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = GateFunction::new(1, random_alpha_wide(1, &mut rng)).unwrap();
        let g = gate_unitary(&f).unwrap();
        let b = FixedBlock::new(f, loc(&[0]), 2).unwrap();
        assert_eq!(fixed_unitary(&b).unwrap(), kron(&g, &ComplexMatrix::identity(2)));
    }
}
