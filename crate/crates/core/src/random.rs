//! Seeded random matrices, states, unitaries and channels.
//!
//! Used by property sweeps and the randomized scenarios. All generators take
//! an explicit RNG so a seed fully determines the output.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channels::KrausChannel;
use crate::qmath::{c, ComplexMatrix, C64};
use crate::states::{
    correlation_norm, product_state, BipartiteState, DensityMatrix, PureStateVector,
};

pub type ScenarioRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ScenarioRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre(dim: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| gaussian(rng))
}

/// Matrix with independent complex Gaussian entries.
pub fn random_matrix(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_dmatrix(ginibre(dim, rng)).expect("finite gaussian entries")
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    random_matrix(dim, rng).hermitian_part()
}

/// Haar-distributed unitary from the phase-corrected QR of a Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let qr = ginibre(dim, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DVector::from_fn(dim, |i, _| {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        }
    });
    ComplexMatrix::from_dmatrix(q * DMatrix::from_diagonal(&phases)).expect("finite")
}

pub fn random_pure(dim: usize, rng: &mut impl Rng) -> PureStateVector {
    let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    PureStateVector::normalized(v).expect("nonzero gaussian vector")
}

/// Full-rank mixed state `G G† / Tr(G G†)`.
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = ginibre(dim, rng);
    let w = &g * g.adjoint();
    let tr = w.trace();
    let m = ComplexMatrix::from_dmatrix(w / tr)
        .expect("finite")
        .hermitian_part();
    DensityMatrix::new(m).expect("Wishart matrices are valid states")
}

/// Random joint state whose correlation norm is bounded away from zero.
pub fn random_correlated_state(dim_s: usize, dim_e: usize, rng: &mut impl Rng) -> BipartiteState {
    loop {
        let joint = random_density(dim_s * dim_e, rng);
        let state = BipartiteState::new(joint, dim_s, dim_e).expect("dimensions match");
        if correlation_norm(&state) > 1e-6 {
            return state;
        }
    }
}

pub fn random_product_state(dim_s: usize, dim_e: usize, rng: &mut impl Rng) -> BipartiteState {
    let s = random_density(dim_s, rng);
    let e = random_density(dim_e, rng);
    product_state(&s, &e)
}

/// Trace-preserving channel with `n_ops` Kraus operators, cut from a random
/// isometry of dimension `dim * n_ops`.
pub fn random_kraus_channel(dim: usize, n_ops: usize, rng: &mut impl Rng) -> KrausChannel {
    let u = random_unitary(dim * n_ops, rng);
    let ops = (0..n_ops)
        .map(|k| {
            let block = u.as_dmatrix().view((k * dim, 0), (dim, dim)).into_owned();
            ComplexMatrix::from_dmatrix(block).expect("finite")
        })
        .collect();
    KrausChannel::new(ops).expect("isometry blocks form a channel")
}
