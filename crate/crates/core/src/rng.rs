//! Seeded random sampling.
//!
//! Every consumer draws from a ChaCha8 stream selected by `(seed, stream)`,
//! so two callers sharing a seed never share a stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{vec_norm, ComplexMatrix, HermitianMatrix, C64};

/// Stream identifiers. Kept stable so seeds stay reproducible across versions.
pub mod streams {
    pub const PURE_TENSOR_SAMPLER: u64 = 1;
    pub const TOMITA_COMMUTANT: u64 = 2;
    pub const REPRODUCTION: u64 = 3;
    pub const CERTIFICATE_RETRY: u64 = 4;
    pub const MODULAR_SUITE: u64 = 5;
    pub const CONTRACTIVITY: u64 = 6;
    pub const SIM_SETTINGS: u64 = 7;
}

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-random unit vector.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
        let norm = vec_norm(&v);
        if norm > 1e-300 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Ginibre matrix with i.i.d. complex normal entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Hermitian matrix `(G + G^†)/2` from a Ginibre draw.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    HermitianMatrix::new(ginibre(rng, n, n)).expect("square")
}

/// Random full-rank density matrix `G G^† / Tr(G G^†)`.
pub fn density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    density_of_rank(rng, n, n)
}

pub fn density_of_rank<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> HermitianMatrix {
    let g = ginibre(rng, n, rank);
    let m = g.matmul(&g.adjoint()).expect("shapes agree");
    let tr = m.trace().re;
    HermitianMatrix::new(m.scale_real(1.0 / tr)).expect("square")
}

/// Random effect `0 ≤ E ≤ 1`: a Hermitian matrix with spectrum drawn
/// uniformly from `[0, 1]` in a Haar-random basis.
pub fn effect<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let mut acc = HermitianMatrix::zeros(n);
    let basis = unitary(rng, n);
    for k in 0..n {
        let w: f64 = rng.random();
        let p = HermitianMatrix::projector(&basis.column(k));
        acc = acc.add(&p.scale(w)).expect("same dim");
    }
    acc
}

/// Haar-random unitary via Gram-Schmidt on a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ginibre(rng, n, n);
    let mut q = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = g.column(j);
        for k in 0..j {
            let qk = q.column(k);
            let proj: C64 = qk.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(&qk) {
                *vi -= proj * qi;
            }
        }
        let norm = vec_norm(&v);
        let v: Vec<C64> = v.into_iter().map(|z| z / norm).collect();
        q.set_column(j, &v);
    }
    q
}
