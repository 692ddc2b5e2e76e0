//! Quantum operations in Kraus, superoperator and Choi form.
//!
//! Superoperators act on column-stacked operators, so the map `ρ ↦ A ρ B†`
//! has matrix `conj(B) ⊗ A`. The Choi matrix puts the input factor on the
//! left: `C = Σ_ij E_ij ⊗ Λ(E_ij)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qmath::{
    c, hermitian_eigen, partial_trace, tensor, unvectorize, vectorize, ComplexMatrix, Keep,
    CP_THRESHOLD, STRUCTURAL_TOL,
};
use crate::states::DensityMatrix;

/// Trace-nonincreasing operation given by Kraus operators of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators.first().ok_or_else(|| {
            Error::ContractViolation("Kraus channel needs at least one operator".into())
        })?;
        let dim = first.dim();
        if let Some(bad) = operators.iter().find(|k| k.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.dim(),
            });
        }
        let ch = Self { operators };
        let largest = hermitian_eigen(&ch.completeness())?.max_eigenvalue();
        if largest > 1.0 + STRUCTURAL_TOL {
            return Err(Error::ContractViolation(format!(
                "Kraus operators increase trace (largest eigenvalue of ΣK†K is {largest})"
            )));
        }
        Ok(ch)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![ComplexMatrix::identity(dim)],
        }
    }

    /// Conjugation by a unitary.
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        if !u.is_unitary(STRUCTURAL_TOL) {
            return Err(Error::ContractViolation("operator is not unitary".into()));
        }
        Ok(Self { operators: vec![u] })
    }

    /// Qubit depolarizing channel `{√(1−3p/4) I, √(p/4) X, √(p/4) Y, √(p/4) Z}`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "depolarizing strength must lie in [0, 1], got {p}"
            )));
        }
        let a = (1.0 - 0.75 * p).sqrt();
        let b = (p / 4.0).sqrt();
        Self::new(vec![
            ComplexMatrix::identity(2).scale_real(a),
            ComplexMatrix::pauli_x().scale_real(b),
            ComplexMatrix::pauli_y().scale_real(b),
            ComplexMatrix::pauli_z().scale_real(b),
        ])
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// `Σ K†K`
    pub fn completeness(&self) -> ComplexMatrix {
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(self.dim()), |acc, k| {
                &acc + &(&k.adjoint() * k)
            })
    }

    /// Frobenius distance of `Σ K†K` from the identity.
    pub fn completeness_deviation(&self) -> f64 {
        (&self.completeness() - &ComplexMatrix::identity(self.dim())).frobenius_norm()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.completeness_deviation() <= tol
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        apply_kraus(self, rho)
    }

    /// Applies a trace-preserving channel to a state.
    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if !self.is_trace_preserving(STRUCTURAL_TOL) {
            return Err(Error::ContractViolation(
                "channel must be trace-preserving to map states to states".into(),
            ));
        }
        DensityMatrix::new(self.apply(rho.matrix())?)
    }

    /// `K ⊗ I_e` for every Kraus operator: the channel acting on the system
    /// factor of a joint state, identity on the environment.
    pub fn on_system(&self, dim_e: usize) -> Self {
        let id = ComplexMatrix::identity(dim_e);
        Self {
            operators: self.operators.iter().map(|k| tensor(k, &id)).collect(),
        }
    }

    /// `I_s ⊗ K`: the channel acting on the environment factor only.
    pub fn on_environment(&self, dim_s: usize) -> Self {
        let id = ComplexMatrix::identity(dim_s);
        Self {
            operators: self.operators.iter().map(|k| tensor(&id, k)).collect(),
        }
    }
}

/// `Σ K ρ K†`
pub fn apply_kraus(channel: &KrausChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != channel.dim() {
        return Err(Error::Dimension {
            expected: channel.dim(),
            found: rho.dim(),
        });
    }
    Ok(channel
        .operators
        .iter()
        .fold(ComplexMatrix::zeros(rho.dim()), |acc, k| {
            &acc + &rho.conjugate_by(k)
        }))
}

/// Linear map on `dim × dim` operators as a `dim² × dim²` matrix on
/// column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: ComplexMatrix,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.dim() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: matrix.dim(),
            });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: ComplexMatrix::identity(dim * dim),
        }
    }

    /// `Σ conj(K) ⊗ K`
    pub fn from_kraus(channel: &KrausChannel) -> Self {
        let dim = channel.dim();
        let matrix = channel
            .operators()
            .iter()
            .fold(ComplexMatrix::zeros(dim * dim), |acc, k| {
                &acc + &tensor(&k.conjugate(), k)
            });
        Self { dim, matrix }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        if op.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: op.dim(),
            });
        }
        unvectorize(&(self.matrix.as_dmatrix() * vectorize(op)))
    }

    /// Largest Hermiticity deviation of the image of a Hermitian matrix
    /// basis; zero for Hermiticity-preserving maps.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let e = ComplexMatrix::unit(d, i, j);
                let sym = &e + &e.adjoint();
                let asym = (&e - &e.adjoint()).scale(c(0.0, 1.0));
                for h in [sym, asym] {
                    let out = self.apply(&h).expect("dimension matches");
                    worst = worst.max(out.hermiticity_deviation());
                }
            }
        }
        worst
    }
}

/// Builds the superoperator of a linear map from its action on the matrix units.
pub fn superop_from_action(
    apply: impl Fn(&ComplexMatrix) -> ComplexMatrix,
    dim: usize,
) -> SuperOperator {
    let n = dim * dim;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..dim {
        for i in 0..dim {
            let image = apply(&ComplexMatrix::unit(dim, i, j));
            assert_eq!(image.dim(), dim, "action must preserve operator dimension");
            m.set_column(j * dim + i, &vectorize(&image));
        }
    }
    SuperOperator {
        dim,
        matrix: ComplexMatrix::from_dmatrix(m).expect("finite images"),
    }
}

/// Choi matrix `Σ_ij E_ij ⊗ Λ(E_ij)` (input factor left, output factor right).
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

pub fn choi_from_superop(s: &SuperOperator) -> ChoiMatrix {
    let d = s.dim;
    let mut acc = ComplexMatrix::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let e = ComplexMatrix::unit(d, i, j);
            let image = s.apply(&e).expect("dimension matches");
            acc = &acc + &tensor(&e, &image);
        }
    }
    ChoiMatrix {
        dim: d,
        matrix: acc,
    }
}

/// Complete-positivity and trace-preservation verdict for a Choi matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpDiagnosis {
    pub min_eigenvalue: f64,
    pub is_cp: bool,
    /// Frobenius distance of the output-traced Choi matrix from the identity.
    pub tp_deviation: f64,
    pub hermiticity_deviation: f64,
}

pub fn cp_diagnosis(choi: &ChoiMatrix) -> CpDiagnosis {
    cp_diagnosis_with_threshold(choi, CP_THRESHOLD)
}

/// As [`cp_diagnosis`], counting the map as CP when the minimum eigenvalue is
/// at least `-threshold`. A Choi matrix that is not Hermitian within the
/// structural tolerance is never reported as CP; its spectrum is taken from
/// the Hermitian part and the deviation is reported alongside.
pub fn cp_diagnosis_with_threshold(choi: &ChoiMatrix, threshold: f64) -> CpDiagnosis {
    let hermiticity_deviation = choi.matrix.hermiticity_deviation();
    let min_eigenvalue = hermitian_eigen(&choi.matrix.hermitian_part())
        .expect("Hermitian part")
        .min_eigenvalue();
    let reduced = partial_trace(&choi.matrix, choi.dim, choi.dim, Keep::System)
        .expect("Choi matrix has dimension d²");
    let tp_deviation = (&reduced - &ComplexMatrix::identity(choi.dim)).frobenius_norm();
    CpDiagnosis {
        min_eigenvalue,
        is_cp: min_eigenvalue >= -threshold && hermiticity_deviation <= STRUCTURAL_TOL,
        tp_deviation,
        hermiticity_deviation,
    }
}
