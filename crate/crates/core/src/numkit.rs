//! Dense complex linear algebra for the small matrices that show up in
//! synthesis: gate unitaries, Hermitian generators and wire permutations.
//!
//! Matrices are square and stored row-major. Everything here is a pure
//! function of its inputs.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Result, SynthError};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { dim, data }
    }

    /// Builds a matrix from row-major data. Fails unless the data is square
    /// and finite.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(SynthError::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        let m = ComplexMatrix { dim, data };
        if !m.is_finite() {
            return Err(SynthError::invalid("matrix has non-finite entries"));
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(SynthError::invalid("matrix rows must form a square"));
        }
        Self::from_vec(dim, rows.concat())
    }

    /// Real-valued convenience constructor, mostly for permutations and tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    /// `self += c * other`
    pub fn add_scaled(&mut self, c: C64, other: &ComplexMatrix) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix { dim: n, data: out }
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_of_product(&self, other: &ComplexMatrix) -> C64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.data[i * n + k] * other.data[k * n + i];
            }
        }
        acc
    }

    /// Entrywise max-norm.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (max column sum).
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|j| (0..n).map(|i| self.data[i * n + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        let n = self.dim;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Copies out the `size`-square block whose top-left corner is `(row, col)`.
    pub fn sub_block(&self, row: usize, col: usize, size: usize) -> ComplexMatrix {
        Self::from_fn(size, |i, j| self[(row + i, col + j)])
    }

    fn check_same_dim(&self, other: &ComplexMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(SynthError::invalid(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Largest entrywise difference between two matrices of equal size.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.dim, b.dim, "dimension mismatch");
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Kronecker product with the row-major block convention
/// `out[i*dB + k][j*dB + l] = a[i][j] * b[k][l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let db = b.dim;
    ComplexMatrix::from_fn(a.dim * db, |r, c| a[(r / db, c / db)] * b[(r % db, c % db)])
}

/// Kronecker product with an identity of dimension `id_dim` on the right.
pub fn kron_identity(a: &ComplexMatrix, id_dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.dim * id_dim);
    for i in 0..a.dim {
        for j in 0..a.dim {
            let v = a[(i, j)];
            if v == ZERO {
                continue;
            }
            for k in 0..id_dim {
                out[(i * id_dim + k, j * id_dim + k)] = v;
            }
        }
    }
    out
}

pub fn is_unitary(u: &ComplexMatrix, tol: f64) -> bool {
    let prod = u.matmul(&u.dagger());
    max_abs_diff(&prod, &ComplexMatrix::identity(u.dim)) <= tol
}

// Degree-13 Padé coefficients and the matching 1-norm bound.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by degree-13 Padé approximation with scaling and
/// squaring.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_finite() {
        return Err(SynthError::invalid("expm: non-finite input"));
    }
    let n = a.dim;
    let norm = a.one_norm();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = a.scale_real(0.5f64.powi(squarings as i32));

    let id = ComplexMatrix::identity(n);
    let a2 = scaled.matmul(&scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &PADE13;

    let mut inner_u = a6.scale_real(b[13]);
    inner_u.add_scaled(C64::from(b[11]), &a4);
    inner_u.add_scaled(C64::from(b[9]), &a2);
    let mut u = a6.matmul(&inner_u);
    u.add_scaled(C64::from(b[7]), &a6);
    u.add_scaled(C64::from(b[5]), &a4);
    u.add_scaled(C64::from(b[3]), &a2);
    u.add_scaled(C64::from(b[1]), &id);
    let u = scaled.matmul(&u);

    let mut inner_v = a6.scale_real(b[12]);
    inner_v.add_scaled(C64::from(b[10]), &a4);
    inner_v.add_scaled(C64::from(b[8]), &a2);
    let mut v = a6.matmul(&inner_v);
    v.add_scaled(C64::from(b[6]), &a6);
    v.add_scaled(C64::from(b[4]), &a4);
    v.add_scaled(C64::from(b[2]), &a2);
    v.add_scaled(C64::from(b[0]), &id);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p)?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}

/// Returns `(e^A, L(A, E))` where `L` is the Fréchet derivative of the
/// exponential at `A` in direction `E`. Both come out of one exponential of
/// the block matrix `[[A, E], [0, A]]`.
pub fn expm_and_frechet(a: &ComplexMatrix, e: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    a.check_same_dim(e)?;
    let n = a.dim;
    let mut big = ComplexMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = a[(i, j)];
            big[(i, j + n)] = e[(i, j)];
            big[(i + n, j + n)] = a[(i, j)];
        }
    }
    let exp_big = expm(&big)?;
    Ok((exp_big.sub_block(0, 0, n), exp_big.sub_block(0, n, n)))
}

pub fn expm_frechet(a: &ComplexMatrix, e: &ComplexMatrix) -> Result<ComplexMatrix> {
    expm_and_frechet(a, e).map(|(_, l)| l)
}

/// Solves `q X = p` by LU decomposition with partial pivoting.
fn solve(q: &ComplexMatrix, p: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = q.dim;
    let mut lu = q.clone();
    let mut rhs = p.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| lu[(x, col)].norm().total_cmp(&lu[(y, col)].norm()))
            .unwrap_or(col);
        if lu[(pivot, col)].norm() == 0.0 {
            return Err(SynthError::NumericalFailure {
                message: "singular Padé denominator".into(),
                last_x: Vec::new(),
            });
        }
        if pivot != col {
            for j in 0..n {
                lu.data.swap(pivot * n + j, col * n + j);
                rhs.data.swap(pivot * n + j, col * n + j);
            }
        }
        let inv = ONE / lu[(col, col)];
        for row in col + 1..n {
            let factor = lu[(row, col)] * inv;
            if factor == ZERO {
                continue;
            }
            for j in col..n {
                let v = lu[(col, j)];
                lu[(row, j)] -= factor * v;
            }
            for j in 0..n {
                let v = rhs[(col, j)];
                rhs[(row, j)] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = ONE / lu[(col, col)];
        for j in 0..n {
            let mut acc = rhs[(col, j)];
            for k in col + 1..n {
                acc -= lu[(col, k)] * rhs[(k, j)];
            }
            rhs[(col, j)] = acc * inv;
        }
    }
    Ok(rhs)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    pub fn random_matrix<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> ComplexMatrix {
        ComplexMatrix::from_fn(dim, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
        })
    }

    pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> ComplexMatrix {
        let m = random_matrix(rng, dim, scale);
        (&m + &m.dagger()).scale_real(0.5)
    }

    pub fn random_skew_hermitian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> ComplexMatrix {
        random_hermitian(rng, dim, scale).scale(I)
    }

    /// Truncated Taylor series, used only as an independent reference.
    pub fn taylor_expm(a: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let mut sum = ComplexMatrix::identity(a.dim());
        let mut term = ComplexMatrix::identity(a.dim());
        for k in 1..=terms {
            term = term.matmul(a).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&ComplexMatrix::zeros(4)).unwrap();
        assert!(max_abs_diff(&e, &ComplexMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn expm_of_i_pi_x_is_minus_identity() {
        let e = expm(&sigma_x().scale(I * PI)).unwrap();
        let expected = ComplexMatrix::identity(2).scale_real(-1.0);
        assert!(max_abs_diff(&e, &expected) < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_on_skew_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_skew_hermitian(&mut rng, 8, 0.5);
            let got = expm(&a).unwrap();
            let want = taylor_expm(&a, 40);
            assert!(max_abs_diff(&got, &want) < 1e-10);
            assert!(is_unitary(&got, 1e-12));
        }
    }

    #[test]
    fn expm_rejects_non_finite() {
        let mut a = ComplexMatrix::zeros(2);
        a[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(expm(&a), Err(SynthError::InvalidArgument(_))));
    }

    #[test]
    fn expm_inverse_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 3, 5, 8] {
            let a = random_matrix(&mut rng, dim, 1.0);
            let a = a.scale_real(10.0 / a.one_norm().max(1e-300) * 0.99);
            let prod = expm(&a).unwrap().matmul(&expm(&a.scale_real(-1.0)).unwrap());
            assert!(max_abs_diff(&prod, &ComplexMatrix::identity(dim)) < 1e-10, "dim {dim}");
        }
    }

    #[test]
    fn frechet_at_zero_is_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_matrix(&mut rng, 4, 1.0);
        let l = expm_frechet(&ComplexMatrix::zeros(4), &e).unwrap();
        assert!(max_abs_diff(&l, &e) < 1e-14);
    }

    #[test]
    fn frechet_commuting_diagonals() {
        let a = ComplexMatrix::from_fn(3, |i, j| if i == j { C64::new(0.3 * i as f64, -0.2) } else { ZERO });
        let e = ComplexMatrix::from_fn(3, |i, j| if i == j { C64::new(1.0 + i as f64, 0.5) } else { ZERO });
        let l = expm_frechet(&a, &e).unwrap();
        let want = e.matmul(&expm(&a).unwrap());
        assert!(max_abs_diff(&l, &want) < 1e-13);
    }

    fn finite_difference(a: &ComplexMatrix, e: &ComplexMatrix, h: f64) -> ComplexMatrix {
        let plus = expm(&(a + &e.scale_real(h))).unwrap();
        let minus = expm(&(a - &e.scale_real(h))).unwrap();
        (&plus - &minus).scale_real(0.5 / h)
    }

    #[test]
    fn frechet_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..100 {
            let dim = 2 + trial % 15;
            let a = random_skew_hermitian(&mut rng, dim, 0.7);
            let e = random_skew_hermitian(&mut rng, dim, 0.7);
            let l = expm_frechet(&a, &e).unwrap();
            let fd = finite_difference(&a, &e, 1e-6);
            let rel = max_abs_diff(&l, &fd) / l.max_norm();
            assert!(rel <= 1e-5, "trial {trial} dim {dim}: rel {rel}");
        }
    }

    #[test]
    fn frechet_dimension_mismatch() {
        let r = expm_frechet(&ComplexMatrix::zeros(2), &ComplexMatrix::zeros(3));
        assert!(matches!(r, Err(SynthError::InvalidArgument(_))));
    }

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
        let xx = kron(&sigma_x(), &sigma_x());
        let anti = ComplexMatrix::from_fn(4, |i, j| if i + j == 3 { ONE } else { ZERO });
        assert_eq!(xx, anti);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let [a, b, c, d] = [0; 4].map(|_| random_matrix(&mut rng, 2, 1.0));
            let lhs = kron(&a, &b).matmul(&kron(&c, &d));
            let rhs = kron(&a.matmul(&c), &b.matmul(&d));
            assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
        }
    }

    #[test]
    fn kron_is_associative_on_dyadic_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        use rand::Rng;
        let mut dyadic = |dim| {
            ComplexMatrix::from_fn(dim, |_, _| {
                C64::new(
                    rng.gen_range(-8i32..8) as f64 / 4.0,
                    rng.gen_range(-8i32..8) as f64 / 8.0,
                )
            })
        };
        let (a, b, c) = (dyadic(2), dyadic(3), dyadic(2));
        assert_eq!(kron(&kron(&a, &b), &c), kron(&a, &kron(&b, &c)));
    }

    #[test]
    fn kron_identity_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 4, 1.0);
        assert_eq!(kron_identity(&a, 2), kron(&a, &ComplexMatrix::identity(2)));
    }

    #[test]
    fn unitarity_predicate() {
        assert!(is_unitary(&ComplexMatrix::identity(8), 1e-12));
        assert!(!is_unitary(&ComplexMatrix::identity(2).scale_real(2.0), 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 6, 2.0);
            assert!(is_unitary(&expm(&h.scale(I)).unwrap(), 1e-10));
        }
    }

    #[test]
    fn from_vec_validates() {
        assert!(ComplexMatrix::from_vec(2, vec![ONE; 3]).is_err());
        assert!(ComplexMatrix::from_vec(1, vec![C64::new(f64::INFINITY, 0.0)]).is_err());
    }
}
