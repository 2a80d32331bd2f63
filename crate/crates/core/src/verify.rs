//! State-fidelity checks of a synthesized circuit against its target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SynthError};
use crate::numkit::{ComplexMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityStats {
    pub states: usize,
    pub min: f64,
    pub mean: f64,
}

/// A Haar-random pure state: a normalized complex Gaussian vector.
pub fn random_state<R: rand::Rng>(rng: &mut R, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// `|<U_T ψ | U_C ψ>|²` over every basis state plus `random_states`
/// Haar-random states drawn from `seed`.
pub fn state_fidelities(
    circuit: &ComplexMatrix,
    target: &ComplexMatrix,
    random_states: usize,
    seed: u64,
) -> Result<FidelityStats> {
    let d = target.dim();
    if circuit.dim() != d {
        return Err(SynthError::invalid(format!(
            "circuit of dim {} does not match target of dim {d}",
            circuit.dim()
        )));
    }
    let mut values = Vec::with_capacity(d + random_states);
    for j in 0..d {
        let t: Vec<C64> = (0..d).map(|i| target[(i, j)]).collect();
        let c: Vec<C64> = (0..d).map(|i| circuit[(i, j)]).collect();
        values.push(fidelity(&t, &c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_states {
        let psi = random_state(&mut rng, d);
        values.push(fidelity(&target.apply(&psi), &circuit.apply(&psi)));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(FidelityStats {
        states: values.len(),
        min,
        mean,
    })
}
