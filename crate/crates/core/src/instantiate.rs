//! Native backends that turn small block unitaries into U3/CNOT circuits,
//! and a registry that selects one by name.
//!
//! The default two-qubit backend searches CNOT templates of increasing
//! length, fitting the U3 angles numerically, and returns the first template
//! that reaches the requested distance.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use crate::circuit::u3_matrix;
use crate::circuit::{circuit_to_unitary, cnot_matrix, Circuit, Gate, NativeCircuit, U3};
use crate::decomposer::BlockList;
use crate::error::{Result, SynthError};
use crate::gatemodel::distance;
use crate::numkit::{is_unitary, kron, ComplexMatrix, C64};
use crate::optimizer::{minimize, MinimizeOptions};

pub const MAX_TEMPLATE_CNOTS: usize = 3;

/// Converts a `2^k`-dimensional unitary into native gates on `k` wires.
pub trait NativeBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn supports(&self, width: usize) -> bool;

    /// Must return a circuit within `threshold` of `unitary`. `seed` feeds
    /// any randomness so results are reproducible.
    fn synthesize(&self, unitary: &ComplexMatrix, threshold: f64, seed: u64) -> Result<NativeCircuit>;
}

#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<&'static str, Arc<dyn NativeBackend>>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            backends: BTreeMap::new(),
        }
    }

    /// Registry holding every built-in backend.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(TemplateBackend::default()));
        r.register(Arc::new(EulerBackend));
        r
    }

    /// Adds a backend, replacing any previous one with the same name.
    pub fn register(&mut self, backend: Arc<dyn NativeBackend>) {
        self.backends.insert(backend.name(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn NativeBackend>> {
        self.backends.get(name).cloned().ok_or_else(|| {
            SynthError::invalid(format!(
                "unknown backend `{name}` (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.backends.keys().copied().collect()
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn check_input(unitary: &ComplexMatrix, width: usize) -> Result<()> {
    if unitary.dim() != 1 << width {
        return Err(SynthError::invalid(format!(
            "expected a {width}-qubit unitary, got dim {}",
            unitary.dim()
        )));
    }
    if !is_unitary(unitary, 1e-8) {
        return Err(SynthError::invalid("block is not unitary"));
    }
    Ok(())
}

/// Single-qubit backend: one U3 from ZYZ angles.
pub struct EulerBackend;

impl NativeBackend for EulerBackend {
    fn name(&self) -> &'static str {
        "zyz1q"
    }

    fn supports(&self, width: usize) -> bool {
        width == 1
    }

    fn synthesize(&self, unitary: &ComplexMatrix, threshold: f64, _seed: u64) -> Result<NativeCircuit> {
        check_input(unitary, 1)?;
        let gate = U3::from_matrix(unitary)?;
        let c = Circuit::from_gates(1, vec![Gate::U3 { wire: 0, gate }])?;
        let d = distance(&gate.matrix(), unitary)?.value();
        if d > threshold {
            return Err(SynthError::SynthesisFailure(format!("ZYZ extraction missed by {d:e}")));
        }
        Ok(c)
    }
}

/// Two-qubit template search over 0 to 3 CNOTs. Single-qubit inputs are
/// handled by ZYZ extraction.
#[derive(Clone, Debug)]
pub struct TemplateBackend {
    pub restarts: usize,
    pub escalated_restarts: usize,
    pub optimizer: MinimizeOptions,
}

impl Default for TemplateBackend {
    fn default() -> Self {
        TemplateBackend {
            restarts: 8,
            escalated_restarts: 32,
            optimizer: MinimizeOptions::default(),
        }
    }
}

/// Result of fitting one template.
#[derive(Clone, Debug)]
pub struct TemplateFit {
    pub cnots: usize,
    pub angles: Vec<f64>,
    pub distance: f64,
}

/// `U3 ⊗ U3`, then `cnots` repetitions of `[CX(0→1), U3 ⊗ U3]`. Six angles
/// per layer, `(θ, φ, λ)` for wire 0 then wire 1.
pub fn template_circuit(cnots: usize, angles: &[f64]) -> Result<NativeCircuit> {
    if angles.len() != 6 * (cnots + 1) {
        return Err(SynthError::invalid(format!(
            "a {cnots}-CNOT template takes {} angles, got {}",
            6 * (cnots + 1),
            angles.len()
        )));
    }
    let mut c = Circuit::new(2);
    for (layer, a) in angles.chunks(6).enumerate() {
        if layer > 0 {
            c.push(Gate::cnot(0, 1))?;
        }
        c.push(Gate::u3(0, a[0], a[1], a[2]))?;
        c.push(Gate::u3(1, a[3], a[4], a[5]))?;
    }
    Ok(c)
}

/// Partial derivatives of the U3 matrix with respect to θ, φ and λ.
fn u3_partials(theta: f64, phi: f64, lambda: f64) -> [ComplexMatrix; 3] {
    let (s, c) = (theta / 2.0).sin_cos();
    let i = C64::new(0.0, 1.0);
    let e_l = C64::from_polar(1.0, lambda);
    let e_p = C64::from_polar(1.0, phi);
    let e_pl = C64::from_polar(1.0, phi + lambda);
    let mk = |a: C64, b: C64, c_: C64, d: C64| {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 0)] = a;
        m[(0, 1)] = b;
        m[(1, 0)] = c_;
        m[(1, 1)] = d;
        m
    };
    let z = C64::new(0.0, 0.0);
    [
        mk(
            C64::new(-s / 2.0, 0.0),
            -e_l * (c / 2.0),
            e_p * (c / 2.0),
            -e_pl * (s / 2.0),
        ),
        mk(z, z, i * e_p * s, i * e_pl * c),
        mk(z, -i * e_l * s, z, i * e_pl * c),
    ]
}

/// Δ of a template against `target`, with its gradient in the angles.
fn template_objective(cnots: usize, angles: &[f64], target: &ComplexMatrix) -> (f64, Vec<f64>) {
    let layers: Vec<(ComplexMatrix, ComplexMatrix)> = angles
        .chunks(6)
        .map(|a| (u3_matrix(a[0], a[1], a[2]), u3_matrix(a[3], a[4], a[5])))
        .collect();
    let cx = cnot_matrix();
    // Step j is layer j preceded by a CNOT for j > 0.
    let steps: Vec<ComplexMatrix> = layers
        .iter()
        .enumerate()
        .map(|(j, (a, b))| {
            let l = kron(a, b);
            if j > 0 {
                l.matmul(&cx)
            } else {
                l
            }
        })
        .collect();

    // suffix[j] = step_{k}...step_{j+1}; prefix[j] = step_{j-1}...step_0.
    let k = cnots + 1;
    let mut prefix = vec![ComplexMatrix::identity(4)];
    for s in &steps[..k - 1] {
        let next = s.matmul(prefix.last().unwrap());
        prefix.push(next);
    }
    let mut suffix = vec![ComplexMatrix::identity(4); k];
    for j in (0..k - 1).rev() {
        suffix[j] = suffix[j + 1].matmul(&steps[j + 1]);
    }
    let total = steps[k - 1].matmul(&prefix[k - 1]);
    let target_dag = target.dagger();
    let t = target_dag.trace_of_product(&total);
    let norm = t.norm();
    let f = 1.0 - norm / 4.0;
    let mut grad = vec![0.0; angles.len()];
    if norm == 0.0 {
        return (f, grad);
    }
    let w = t.conj() / norm;
    for j in 0..k {
        // T = Tr(L_j · M) with M = (CX if j>0) · prefix_j · U_T† · suffix_j.
        let mut m = prefix[j].matmul(&target_dag).matmul(&suffix[j]);
        if j > 0 {
            m = cx.matmul(&m);
        }
        let (a, b) = &layers[j];
        let ang = &angles[6 * j..6 * j + 6];
        for (p, da) in u3_partials(ang[0], ang[1], ang[2]).iter().enumerate() {
            let dt = kron(da, b).trace_of_product(&m);
            grad[6 * j + p] = -(w * dt).re / 4.0;
        }
        for (p, db) in u3_partials(ang[3], ang[4], ang[5]).iter().enumerate() {
            let dt = kron(a, db).trace_of_product(&m);
            grad[6 * j + 3 + p] = -(w * dt).re / 4.0;
        }
    }
    (f, grad)
}

impl TemplateBackend {
    fn template_seed(seed: u64, cnots: usize, restart: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((cnots as u64) << 32) | restart as u64);
        rng
    }

    /// Fits one template with restarts `first..last`, stopping early at
    /// the first fit within `threshold`. Returns the best fit seen.
    pub fn fit_template(
        &self,
        target: &ComplexMatrix,
        cnots: usize,
        threshold: f64,
        seed: u64,
        restarts: std::ops::Range<usize>,
    ) -> Result<Option<TemplateFit>> {
        let mut opts = self.optimizer.clone();
        // Stop as soon as the fit is good to well below the threshold.
        opts.target = Some(threshold * 1e-2);
        let mut best: Option<TemplateFit> = None;
        for r in restarts {
            let mut rng = Self::template_seed(seed, cnots, r);
            let x0: Vec<f64> = (0..6 * (cnots + 1)).map(|_| rng.gen_range(-PI..PI)).collect();
            let res = minimize(|x| Ok(template_objective(cnots, x, target)), &x0, &opts)?;
            let d = distance(&circuit_to_unitary(&template_circuit(cnots, &res.x)?)?, target)?.value();
            if best.as_ref().is_none_or(|b| d < b.distance) {
                best = Some(TemplateFit {
                    cnots,
                    angles: res.x,
                    distance: d,
                });
            }
            if d <= threshold {
                break;
            }
        }
        Ok(best)
    }

    fn search(
        &self,
        target: &ComplexMatrix,
        threshold: f64,
        seed: u64,
        restarts: std::ops::Range<usize>,
    ) -> Result<Option<TemplateFit>> {
        for cnots in 0..=MAX_TEMPLATE_CNOTS {
            if let Some(fit) = self.fit_template(target, cnots, threshold, seed, restarts.clone())? {
                if fit.distance <= threshold {
                    return Ok(Some(fit));
                }
            }
        }
        Ok(None)
    }
}

impl NativeBackend for TemplateBackend {
    fn name(&self) -> &'static str {
        "template2q"
    }

    fn supports(&self, width: usize) -> bool {
        width == 1 || width == 2
    }

    fn synthesize(&self, unitary: &ComplexMatrix, threshold: f64, seed: u64) -> Result<NativeCircuit> {
        if unitary.dim() == 2 {
            return EulerBackend.synthesize(unitary, threshold, seed);
        }
        check_input(unitary, 2)?;
        let fit = match self.search(unitary, threshold, seed, 0..self.restarts)? {
            Some(fit) => fit,
            None => self
                .search(unitary, threshold, seed, self.restarts..self.escalated_restarts)?
                .ok_or_else(|| {
                    SynthError::SynthesisFailure(format!(
                        "no template within {threshold:e} after {} restarts",
                        self.escalated_restarts
                    ))
                })?,
        };
        template_circuit(fit.cnots, &fit.angles)
    }
}

/// Seed for block `index`, derived from the run seed.
pub fn block_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Runs `backend` on every block in parallel. Output order follows the
/// block list.
pub fn instantiate_blocks(
    blocks: &BlockList,
    backend: &dyn NativeBackend,
    threshold: f64,
    seed: u64,
) -> Result<Vec<NativeCircuit>> {
    blocks
        .blocks
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let width = b.location.len();
            if !backend.supports(width) {
                return Err(SynthError::invalid(format!(
                    "backend {} cannot synthesize {width}-qubit block {i}",
                    backend.name()
                )));
            }
            backend
                .synthesize(&b.unitary, threshold, block_seed(seed, i))
                .map_err(|e| e.context(format!("block {i} at {}", b.location)))
        })
        .collect()
}

/// Convenience wrapper around [`TemplateBackend`] with default settings.
pub fn instantiate_2q(unitary: &ComplexMatrix, threshold: f64, seed: u64) -> Result<NativeCircuit> {
    TemplateBackend::default().synthesize(unitary, threshold, seed)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::numkit::testutil::random_matrix;

    /// Haar-random unitary via Gram-Schmidt on a complex Gaussian matrix.
    pub fn haar_unitary<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
        let g = random_matrix(rng, dim, 1.0);
        let mut cols: Vec<Vec<C64>> = (0..dim).map(|j| (0..dim).map(|i| g[(i, j)]).collect()).collect();
        for j in 0..dim {
            for k in 0..j {
                let proj: C64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (z, v) in tail[0].iter_mut().zip(&head[k]) {
                    *z -= proj * v;
                }
            }
            let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut cols[j] {
                *z /= norm;
            }
        }
        ComplexMatrix::from_fn(dim, |i, j| cols[j][i])
    }
}
