//! Density matrices, joint system-environment states and the distances used
//! to compare them.
//!
//! Physicality is checked at construction and never repaired: a matrix that
//! misses an invariant by more than the tolerance is rejected.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::qmath::{
    c, hermitian_eigen, partial_trace, tensor, trace_norm, ComplexMatrix, Keep, C64, STRUCTURAL_TOL,
};

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateVector {
    amplitudes: DVector<C64>,
}

impl PureStateVector {
    /// Fails unless the vector has unit norm within [`STRUCTURAL_TOL`].
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::ContractViolation("empty state vector".into()));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::ContractViolation("non-finite amplitude".into()));
        }
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::ContractViolation(format!(
                "state vector must have unit norm, got {norm}"
            )));
        }
        Ok(Self { amplitudes: v })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::ContractViolation(
                "cannot normalize a zero or non-finite vector".into(),
            ));
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect())
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut v = vec![c(0.0, 0.0); dim];
        v[k] = c(1.0, 0.0);
        Self {
            amplitudes: DVector::from_vec(v),
        }
    }

    pub fn z_plus() -> Self {
        Self::basis(2, 0)
    }

    pub fn z_minus() -> Self {
        Self::basis(2, 1)
    }

    pub fn x_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![c(s, 0.0), c(s, 0.0)]).expect("unit norm")
    }

    pub fn x_minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![c(s, 0.0), c(-s, 0.0)]).expect("unit norm")
    }

    pub fn y_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![c(s, 0.0), c(0.0, s)]).expect("unit norm")
    }

    pub fn y_minus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![c(s, 0.0), c(0.0, -s)]).expect("unit norm")
    }

    /// Named qubit Bloch states: `z+ z- x+ x- y+ y-` (aliases `0 1 + -`).
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "z+" | "0" => Self::z_plus(),
            "z-" | "1" => Self::z_minus(),
            "x+" | "+" => Self::x_plus(),
            "x-" | "-" => Self::x_minus(),
            "y+" => Self::y_plus(),
            "y-" => Self::y_minus(),
            _ => return None,
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, STRUCTURAL_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        let herm = matrix.hermiticity_deviation();
        if herm > tol {
            return Err(Error::ContractViolation(format!(
                "density matrix is not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - c(1.0, 0.0)).norm() > tol {
            return Err(Error::ContractViolation(format!(
                "density matrix trace is {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        let min = hermitian_eigen(&matrix)?.min_eigenvalue();
        if min < -tol {
            return Err(Error::ContractViolation(format!(
                "density matrix is not positive semidefinite (minimum eigenvalue {min:e})"
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix derived from valid states by a physical map.
    pub(crate) fn from_derived(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_hermitian(1e-8));
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix)
            .expect("density matrices are Hermitian")
            .min_eigenvalue()
    }
}

/// Joint state of a system (left factor) and its environment (right factor).
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    dim_s: usize,
    dim_e: usize,
    joint: DensityMatrix,
}

impl BipartiteState {
    pub fn new(joint: DensityMatrix, dim_s: usize, dim_e: usize) -> Result<Self> {
        if dim_s == 0 || dim_e == 0 || joint.dim() != dim_s * dim_e {
            return Err(Error::Dimension {
                expected: dim_s * dim_e,
                found: joint.dim(),
            });
        }
        Ok(Self {
            dim_s,
            dim_e,
            joint,
        })
    }

    pub fn from_matrix(m: ComplexMatrix, dim_s: usize, dim_e: usize) -> Result<Self> {
        Self::new(DensityMatrix::new(m)?, dim_s, dim_e)
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim_e(&self) -> usize {
        self.dim_e
    }

    pub fn joint(&self) -> &DensityMatrix {
        &self.joint
    }

    pub fn reduce_system(&self) -> DensityMatrix {
        self.reduce(Keep::System)
    }

    pub fn reduce_environment(&self) -> DensityMatrix {
        self.reduce(Keep::Environment)
    }

    fn reduce(&self, keep: Keep) -> DensityMatrix {
        let m = partial_trace(self.joint.matrix(), self.dim_s, self.dim_e, keep)
            .expect("dimensions checked at construction");
        DensityMatrix::from_derived(m)
    }
}

/// `|v⟩⟨v|`
pub fn pure_density(v: &PureStateVector) -> DensityMatrix {
    DensityMatrix::from_derived(ComplexMatrix::outer(v.amplitudes(), v.amplitudes()))
}

pub fn product_state(s: &DensityMatrix, e: &DensityMatrix) -> BipartiteState {
    BipartiteState {
        dim_s: s.dim(),
        dim_e: e.dim(),
        joint: DensityMatrix::from_derived(tensor(s.matrix(), e.matrix())),
    }
}

/// `|Φ+⟩⟨Φ+|` with `|Φ+⟩ = (|00⟩ + |11⟩)/√2`.
pub fn bell_phi_plus() -> BipartiteState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = PureStateVector::new(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)])
        .expect("unit norm");
    BipartiteState {
        dim_s: 2,
        dim_e: 2,
        joint: pure_density(&v),
    }
}

/// `p |Φ+⟩⟨Φ+| + (1 - p) I/4`
pub fn werner_family(p: f64) -> Result<BipartiteState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "werner parameter must lie in [0, 1], got {p}"
        )));
    }
    let bell = bell_phi_plus();
    let mixed = ComplexMatrix::identity(4).scale_real((1.0 - p) / 4.0);
    let m = &bell.joint.matrix.scale_real(p) + &mixed;
    BipartiteState::new(DensityMatrix::from_derived(m), 2, 2)
}

pub fn reduce_system(s: &BipartiteState) -> DensityMatrix {
    s.reduce_system()
}

pub fn reduce_environment(s: &BipartiteState) -> DensityMatrix {
    s.reduce_environment()
}

/// `½ ‖a − b‖₁`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(0.5 * trace_norm(&(a.matrix() - b.matrix()))?)
}

/// Frobenius norm of `ρ_SE − ρ_S ⊗ ρ_E`.
pub fn correlation_norm(s: &BipartiteState) -> f64 {
    let product = tensor(s.reduce_system().matrix(), s.reduce_environment().matrix());
    (s.joint.matrix() - &product).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{
        random_correlated_state, random_density, random_pure, random_unitary, seeded_rng,
    };
    use std::f64::consts::FRAC_1_SQRT_2;

    fn assert_valid(d: &DensityMatrix) {
        assert!(DensityMatrix::new(d.matrix().clone()).is_ok());
    }

    #[test]
    fn pure_density_basics() {
        let z = pure_density(&PureStateVector::z_plus());
        assert_eq!(z.matrix(), &ComplexMatrix::diag(&[1.0, 0.0]));
        let x = pure_density(&PureStateVector::x_plus());
        for i in 0..2 {
            for j in 0..2 {
                assert!((x.matrix().get(i, j) - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
        let mut rng = seeded_rng(4);
        let r = pure_density(&random_pure(3, &mut rng));
        assert!((r.matrix() * r.matrix()).max_abs_diff(r.matrix()) < 1e-12);
    }

    #[test]
    fn pure_state_rejects_unnormalized() {
        let err = PureStateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn density_matrix_rejects_unphysical() {
        let not_herm = ComplexMatrix::from_real_rows(&[&[0.5, 0.2], &[0.0, 0.5]]).unwrap();
        assert!(DensityMatrix::new(not_herm).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diag(&[0.6, 0.6])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diag(&[1.1, -0.1])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diag(&[1.0 + 5e-11, -5e-11])).is_ok());
    }

    #[test]
    fn product_state_layout_and_factors() {
        let s = DensityMatrix::maximally_mixed(2);
        let e = pure_density(&PureStateVector::z_plus());
        let p = product_state(&s, &e);
        assert_eq!(
            p.joint().matrix(),
            &ComplexMatrix::diag(&[0.5, 0.0, 0.5, 0.0])
        );

        let mut rng = seeded_rng(8);
        let (s, e) = (random_density(2, &mut rng), random_density(2, &mut rng));
        let p = product_state(&s, &e);
        assert!(p.reduce_system().matrix().approx_eq(s.matrix(), 1e-12));
        assert!(p.reduce_environment().matrix().approx_eq(e.matrix(), 1e-12));
        assert!(correlation_norm(&p) < 1e-12);
        assert_valid(p.joint());
    }

    #[test]
    fn bell_state_properties() {
        let b = bell_phi_plus();
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(b.reduce_environment().matrix().approx_eq(&half, 1e-12));
        assert!(b.reduce_system().matrix().approx_eq(&half, 1e-12));
        assert!((b.joint().matrix().get(0, 3) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((b.joint().purity() - 1.0).abs() < 1e-12);
        // ‖|Φ+⟩⟨Φ+| − I/4‖_F = √3/2
        assert!((correlation_norm(&b) - 3f64.sqrt() / 2.0).abs() < 1e-10);
        assert_valid(b.joint());
    }

    #[test]
    fn werner_endpoints_and_spectrum() {
        let w0 = werner_family(0.0).unwrap();
        assert!(w0
            .joint()
            .matrix()
            .approx_eq(&ComplexMatrix::identity(4).scale_real(0.25), 1e-15));
        let w1 = werner_family(1.0).unwrap();
        assert!(w1
            .joint()
            .matrix()
            .approx_eq(bell_phi_plus().joint().matrix(), 1e-15));
        // eigenvalues of p|Φ+⟩⟨Φ+| + (1-p)I/4 are (1-p)/4 (x3) and (1+3p)/4
        let w = werner_family(0.5).unwrap();
        assert!((w.joint().min_eigenvalue() - 0.125).abs() < 1e-12);
        assert!(matches!(werner_family(1.5), Err(Error::Domain(_))));
        assert!(werner_family(f64::NAN).is_err());
    }

    #[test]
    fn werner_correlation_grows_with_p() {
        let norms: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&p| correlation_norm(&werner_family(p).unwrap()))
            .collect();
        assert!(norms[0] < 1e-15);
        assert!(norms.windows(2).all(|w| w[0] < w[1]), "{norms:?}");
    }

    #[test]
    fn trace_distance_examples() {
        let z0 = pure_density(&PureStateVector::z_plus());
        let z1 = pure_density(&PureStateVector::z_minus());
        let xp = pure_density(&PureStateVector::x_plus());
        assert!(trace_distance(&z0, &z0).unwrap().abs() < 1e-15);
        assert!((trace_distance(&z0, &z1).unwrap() - 1.0).abs() < 1e-12);
        // difference [[1/2,-1/2],[-1/2,-1/2]] has eigenvalues ±1/√2
        let diff = z0.matrix() - xp.matrix();
        let eig = hermitian_eigen(&diff).unwrap();
        assert!((eig.eigenvalues[1] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((trace_distance(&z0, &xp).unwrap() - FRAC_1_SQRT_2).abs() < 1e-10);
        assert!(matches!(
            trace_distance(&z0, &DensityMatrix::maximally_mixed(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn trace_distance_metric_properties() {
        let mut rng = seeded_rng(21);
        for _ in 0..50 {
            let (a, b, cc) = (
                random_density(3, &mut rng),
                random_density(3, &mut rng),
                random_density(3, &mut rng),
            );
            let ab = trace_distance(&a, &b).unwrap();
            let bc = trace_distance(&b, &cc).unwrap();
            let ac = trace_distance(&a, &cc).unwrap();
            assert!(ac <= ab + bc + 1e-9);
            assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&ab));

            let u = random_unitary(3, &mut rng);
            let ua = DensityMatrix::new(a.matrix().conjugate_by(&u)).unwrap();
            let ub = DensityMatrix::new(b.matrix().conjugate_by(&u)).unwrap();
            assert!((trace_distance(&ua, &ub).unwrap() - ab).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_correlation_means_product() {
        let mut rng = seeded_rng(33);
        for _ in 0..20 {
            let p = product_state(&random_density(2, &mut rng), &random_density(3, &mut rng));
            assert!(correlation_norm(&p) < 1e-12);
            let prod = DensityMatrix::new(tensor(
                p.reduce_system().matrix(),
                p.reduce_environment().matrix(),
            ))
            .unwrap();
            assert!(trace_distance(p.joint(), &prod).unwrap() < 1e-9);
        }
        let s = random_correlated_state(2, 2, &mut rng);
        assert_valid(s.joint());
        assert_valid(&s.reduce_system());
    }

    #[test]
    fn bipartite_rejects_wrong_dims() {
        let d = DensityMatrix::maximally_mixed(4);
        assert!(matches!(
            BipartiteState::new(d, 2, 3),
            Err(Error::Dimension {
                expected: 6,
                found: 4
            })
        ));
    }
}
