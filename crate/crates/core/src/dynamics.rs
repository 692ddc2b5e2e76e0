//! Closed joint evolution of system and environment.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qmath::{c, matrix_exponential_unitary, tensor, ComplexMatrix, STRUCTURAL_TOL};
use crate::states::{BipartiteState, DensityMatrix};

/// Threshold on operator Schmidt coefficients for factorization detection.
pub const FACTORIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsSource {
    Unitary,
    Hamiltonian {
        hamiltonian: ComplexMatrix,
        duration: f64,
    },
}

/// A joint unitary, given directly or as `exp(-i H t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDynamics {
    unitary: ComplexMatrix,
    source: DynamicsSource,
}

impl JointDynamics {
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        if !u.is_unitary(STRUCTURAL_TOL) {
            return Err(Error::ContractViolation(
                "joint dynamics is not unitary".into(),
            ));
        }
        Ok(Self {
            unitary: u,
            source: DynamicsSource::Unitary,
        })
    }

    pub fn hamiltonian(hamiltonian: ComplexMatrix, duration: f64) -> Result<Self> {
        if !duration.is_finite() {
            return Err(Error::Domain(format!(
                "duration must be finite, got {duration}"
            )));
        }
        let u = matrix_exponential_unitary(&hamiltonian, duration)?;
        if !u.is_unitary(STRUCTURAL_TOL) {
            return Err(Error::ContractViolation(
                "exponentiated Hamiltonian is not unitary within tolerance".into(),
            ));
        }
        Ok(Self {
            unitary: u,
            source: DynamicsSource::Hamiltonian {
                hamiltonian,
                duration,
            },
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            unitary: ComplexMatrix::identity(dim),
            source: DynamicsSource::Unitary,
        }
    }

    /// `U_s ⊗ U_e`: no interaction between system and environment.
    pub fn factorized(u_s: &ComplexMatrix, u_e: &ComplexMatrix) -> Result<Self> {
        Self::unitary(tensor(u_s, u_e))
    }

    /// Controlled-NOT with the system as control.
    pub fn cnot() -> Self {
        Self::from_static(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ])
    }

    pub fn swap() -> Self {
        Self::from_static(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
    }

    pub fn iswap() -> Self {
        let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        let u = ComplexMatrix::from_rows(&[
            vec![o, z, z, z],
            vec![z, z, i, z],
            vec![z, i, z, z],
            vec![z, z, z, o],
        ])
        .expect("static");
        Self {
            unitary: u,
            source: DynamicsSource::Unitary,
        }
    }

    fn from_static(rows: &[&[f64]]) -> Self {
        Self {
            unitary: ComplexMatrix::from_real_rows(rows).expect("static"),
            source: DynamicsSource::Unitary,
        }
    }

    pub fn unitary_matrix(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn source(&self) -> &DynamicsSource {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }
}

/// `U ρ U†`
pub fn evolve(state: &BipartiteState, d: &JointDynamics) -> Result<BipartiteState> {
    let n = state.dim_s() * state.dim_e();
    if d.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            found: d.dim(),
        });
    }
    let out = state.joint().matrix().conjugate_by(&d.unitary);
    BipartiteState::from_matrix(out, state.dim_s(), state.dim_e())
}

/// Reduced system state after joint evolution.
pub fn system_output(state: &BipartiteState, d: &JointDynamics) -> Result<DensityMatrix> {
    Ok(evolve(state, d)?.reduce_system())
}

/// Operator Schmidt decomposition `U = Σ_r σ_r A_r ⊗ B_r`, with orthonormal
/// (Frobenius) factors and coefficients in descending order.
#[derive(Debug, Clone)]
pub struct OperatorSchmidt {
    pub coefficients: Vec<f64>,
    pub system_factors: Vec<ComplexMatrix>,
    pub environment_factors: Vec<ComplexMatrix>,
}

/// Rearranges `U[(i,k),(j,l)]` into `R[(i,j),(k,l)]`.
fn realign(u: &ComplexMatrix, dim_s: usize, dim_e: usize) -> DMatrix<crate::C64> {
    DMatrix::from_fn(dim_s * dim_s, dim_e * dim_e, |row, col| {
        let (i, j) = (row / dim_s, row % dim_s);
        let (k, l) = (col / dim_e, col % dim_e);
        u.get(i * dim_e + k, j * dim_e + l)
    })
}

pub fn operator_schmidt(u: &ComplexMatrix, dim_s: usize, dim_e: usize) -> Result<OperatorSchmidt> {
    if dim_s == 0 || dim_e == 0 || u.dim() != dim_s * dim_e {
        return Err(Error::Dimension {
            expected: dim_s * dim_e,
            found: u.dim(),
        });
    }
    let svd = realign(u, dim_s, dim_e).svd(true, true);
    let left = svd.u.expect("requested");
    let right = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut out = OperatorSchmidt {
        coefficients: Vec::new(),
        system_factors: Vec::new(),
        environment_factors: Vec::new(),
    };
    for r in order {
        out.coefficients.push(svd.singular_values[r]);
        let a = DMatrix::from_fn(dim_s, dim_s, |i, j| left[(i * dim_s + j, r)]);
        let b = DMatrix::from_fn(dim_e, dim_e, |k, l| right[(r, k * dim_e + l)]);
        out.system_factors.push(ComplexMatrix::from_dmatrix(a)?);
        out.environment_factors
            .push(ComplexMatrix::from_dmatrix(b)?);
    }
    Ok(out)
}

/// Whether the dynamics is `U_s ⊗ U_e` within [`FACTORIZATION_TOL`]: exactly
/// one operator Schmidt coefficient above threshold, and the leading term
/// reproduces `U`.
pub fn is_factorized(d: &JointDynamics, dim_s: usize, dim_e: usize) -> bool {
    let Ok(schmidt) = operator_schmidt(&d.unitary, dim_s, dim_e) else {
        return false;
    };
    let significant = schmidt
        .coefficients
        .iter()
        .filter(|&&s| s > FACTORIZATION_TOL)
        .count();
    if significant != 1 {
        return false;
    }
    let leading = tensor(&schmidt.system_factors[0], &schmidt.environment_factors[0])
        .scale_real(schmidt.coefficients[0]);
    leading.max_abs_diff(&d.unitary) <= FACTORIZATION_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::hermitian_eigen;
    use crate::random::{random_density, random_unitary, seeded_rng};
    use crate::states::{bell_phi_plus, product_state, pure_density, PureStateVector};
    use std::f64::consts::PI;

    fn proj(name: &str) -> DensityMatrix {
        pure_density(&PureStateVector::from_name(name).unwrap())
    }

    /// Singular values of the realigned matrix from the spectrum of R R†.
    fn schmidt_oracle(u: &ComplexMatrix) -> Vec<f64> {
        let mut r = vec![vec![c(0.0, 0.0); 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        r[i * 2 + j][k * 2 + l] = u.get(i * 2 + k, j * 2 + l);
                    }
                }
            }
        }
        let r = ComplexMatrix::from_rows(&r).unwrap();
        let gram = &r * &r.adjoint();
        let mut s: Vec<f64> = hermitian_eigen(&gram)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        s.reverse();
        s
    }

    fn exp_series(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let a = h.scale(c(0.0, -t));
        let mut term = ComplexMatrix::identity(h.dim());
        let mut sum = term.clone();
        for k in 1..40 {
            term = (&term * &a).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn identity_leaves_state() {
        let b = bell_phi_plus();
        assert_eq!(evolve(&b, &JointDynamics::identity(4)).unwrap(), b);
    }

    #[test]
    fn swap_exchanges_factors() {
        let s = product_state(&proj("z+"), &proj("z-"));
        let out = evolve(&s, &JointDynamics::swap()).unwrap();
        assert!(out.joint().matrix().approx_eq(
            product_state(&proj("z-"), &proj("z+")).joint().matrix(),
            1e-15
        ));
    }

    #[test]
    fn cnot_entangles_plus_zero() {
        let s = product_state(&proj("x+"), &proj("z+"));
        let out = evolve(&s, &JointDynamics::cnot()).unwrap();
        // CNOT (|00⟩+|10⟩)/√2 = (|00⟩+|11⟩)/√2
        assert!(out
            .joint()
            .matrix()
            .approx_eq(bell_phi_plus().joint().matrix(), 1e-15));
        let sys = system_output(&s, &JointDynamics::cnot()).unwrap();
        assert!(sys
            .matrix()
            .approx_eq(&ComplexMatrix::identity(2).scale_real(0.5), 1e-15));
    }

    #[test]
    fn factorized_output_ignores_environment() {
        let mut rng = seeded_rng(2);
        let us = random_unitary(2, &mut rng);
        let ue = random_unitary(3, &mut rng);
        let d = JointDynamics::factorized(&us, &ue).unwrap();
        let rho = random_density(2, &mut rng);
        for _ in 0..3 {
            let sigma = random_density(3, &mut rng);
            let out = system_output(&product_state(&rho, &sigma), &d).unwrap();
            assert!(out
                .matrix()
                .approx_eq(&rho.matrix().conjugate_by(&us), 1e-12));
        }
    }

    #[test]
    fn zz_dephasing_coherence() {
        let zz = tensor(&ComplexMatrix::pauli_z(), &ComplexMatrix::pauli_z());
        let s = product_state(&proj("x+"), &proj("x+"));
        for t in [0.0, PI / 8.0, PI / 4.0] {
            let d = JointDynamics::hamiltonian(zz.clone(), t).unwrap();
            assert!(d.unitary_matrix().max_abs_diff(&exp_series(&zz, t)) < 1e-12);
            let out = system_output(&s, &d).unwrap();
            let coherence = out.matrix().get(0, 1).norm();
            assert!(
                (coherence - (2.0 * t).cos().abs() / 2.0).abs() < 1e-12,
                "t={t}"
            );
        }
    }

    #[test]
    fn evolution_preserves_spectrum_and_trace() {
        let mut rng = seeded_rng(31);
        for _ in 0..20 {
            let rho = crate::random::random_correlated_state(2, 2, &mut rng);
            let d = JointDynamics::unitary(random_unitary(4, &mut rng)).unwrap();
            let out = evolve(&rho, &d).unwrap();
            let before = hermitian_eigen(rho.joint().matrix()).unwrap().eigenvalues;
            let after = hermitian_eigen(out.joint().matrix()).unwrap().eigenvalues;
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((out.joint().matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evolve_rejects_mismatched_dims() {
        assert!(matches!(
            evolve(&bell_phi_plus(), &JointDynamics::identity(6)),
            Err(Error::Dimension { .. })
        ));
        assert!(JointDynamics::unitary(ComplexMatrix::diag(&[1.0, 2.0])).is_err());
        let not_herm = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(JointDynamics::hamiltonian(not_herm, 1.0).is_err());
    }

    #[test]
    fn factorization_detection() {
        let xh = JointDynamics::factorized(&ComplexMatrix::pauli_x(), &ComplexMatrix::hadamard())
            .unwrap();
        assert!(is_factorized(&xh, 2, 2));

        let cnot = JointDynamics::cnot();
        let s = schmidt_oracle(cnot.unitary_matrix());
        assert!((s[0] - 2f64.sqrt()).abs() < 1e-10 && (s[1] - 2f64.sqrt()).abs() < 1e-10);
        assert!(s[2] < 1e-8);
        assert!(!is_factorized(&cnot, 2, 2));
        let ours = operator_schmidt(cnot.unitary_matrix(), 2, 2).unwrap();
        for (a, b) in ours.coefficients.iter().zip(&s) {
            assert!((a - b).abs() < 1e-10);
        }

        let zz = tensor(&ComplexMatrix::pauli_z(), &ComplexMatrix::pauli_z());
        let d = JointDynamics::hamiltonian(zz, PI / 4.0).unwrap();
        let s = schmidt_oracle(d.unitary_matrix());
        assert_eq!(s.iter().filter(|&&x| x > 1e-8).count(), 2);
        assert!(!is_factorized(&d, 2, 2));

        assert!(!is_factorized(&JointDynamics::swap(), 2, 2));
        assert!(!is_factorized(&JointDynamics::iswap(), 2, 2));
        assert!(JointDynamics::iswap().unitary_matrix().is_unitary(1e-15));
    }

    #[test]
    fn random_factorized_unitaries_are_detected() {
        let mut rng = seeded_rng(8);
        for _ in 0..20 {
            let d = JointDynamics::factorized(
                &random_unitary(2, &mut rng),
                &random_unitary(3, &mut rng),
            )
            .unwrap();
            assert!(is_factorized(&d, 2, 3));
            assert!(!is_factorized(&d, 3, 2));
        }
    }
}
