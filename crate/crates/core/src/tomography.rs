//! Prepare → evolve → observe pipeline and linear-inversion process tomography.
//!
//! The reconstructed map is the unique linear `Λ` with `Λ(P_m) = output_m` on
//! an informationally complete input set. No positivity constraint is imposed,
//! so a negative Choi eigenvalue is a property of the data, never of the fit.

use nalgebra::DMatrix;

use crate::channels::{choi_from_superop, cp_diagnosis_with_threshold, SuperOperator};
use crate::dynamics::{evolve, JointDynamics};
use crate::error::{Error, Result};
use crate::preparations::PreparationProcedure;
use crate::qmath::{
    hermitian_eigen, unvectorize, vectorize, ComplexMatrix, C64, CP_THRESHOLD, STRUCTURAL_TOL,
};
use crate::states::{pure_density, BipartiteState, DensityMatrix, PureStateVector};

/// Smallest singular value an input set may have and still count as spanning.
pub const BASIS_RANK_TOL: f64 = 1e-8;

/// Input states spanning the system operator space.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyBasis {
    inputs: Vec<DensityMatrix>,
}

/// Columns are the vectorized operators.
fn stacked(ops: impl Iterator<Item = ComplexMatrix>) -> DMatrix<C64> {
    let cols: Vec<_> = ops.map(|m| vectorize(&m)).collect();
    DMatrix::from_columns(&cols)
}

/// Smallest of the `dim²` singular values of the stacked input matrix,
/// zero when there are fewer inputs than `dim²`.
fn smallest_singular_value(x: &DMatrix<C64>) -> f64 {
    if x.ncols() < x.nrows() {
        return 0.0;
    }
    let gram = ComplexMatrix::from_dmatrix(x * x.adjoint()).expect("finite");
    hermitian_eigen(&gram.hermitian_part())
        .expect("Gram matrices are Hermitian")
        .min_eigenvalue()
        .max(0.0)
        .sqrt()
}

impl TomographyBasis {
    pub fn new(inputs: Vec<DensityMatrix>) -> Result<Self> {
        let Some(first) = inputs.first() else {
            return Err(Error::DegenerateBasis {
                smallest_singular_value: 0.0,
            });
        };
        let dim = first.dim();
        if let Some(bad) = inputs.iter().find(|p| p.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.dim(),
            });
        }
        let sigma = smallest_singular_value(&stacked(inputs.iter().map(|p| p.matrix().clone())));
        if sigma <= BASIS_RANK_TOL {
            return Err(Error::DegenerateBasis {
                smallest_singular_value: sigma,
            });
        }
        Ok(Self { inputs })
    }

    /// `{|z,+⟩, |z,−⟩, |x,+⟩, |y,+⟩}`
    pub fn standard_qubit() -> Self {
        let states = [
            PureStateVector::z_plus(),
            PureStateVector::z_minus(),
            PureStateVector::x_plus(),
            PureStateVector::y_plus(),
        ];
        Self::new(states.iter().map(pure_density).collect()).expect("informationally complete")
    }

    pub fn inputs(&self) -> &[DensityMatrix] {
        &self.inputs
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    name: String,
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        let dev = matrix.hermiticity_deviation();
        if dev > STRUCTURAL_TOL {
            return Err(Error::ContractViolation(format!(
                "observable must be Hermitian (deviation {dev:e})"
            )));
        }
        Ok(Self {
            name: name.into(),
            matrix,
        })
    }

    /// Pauli observables `X`, `Y`, `Z`.
    pub fn pauli(name: &str) -> Option<Self> {
        let m = match name {
            "X" => ComplexMatrix::pauli_x(),
            "Y" => ComplexMatrix::pauli_y(),
            "Z" => ComplexMatrix::pauli_z(),
            _ => return None,
        };
        Some(Self {
            name: name.to_owned(),
            matrix: m,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `Tr[M ρ]`, real part.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        (&self.matrix * rho.matrix()).trace().re
    }
}

/// One run of the pipeline for input `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub input_label: usize,
    /// System state delivered by the preparation.
    pub prepared: DensityMatrix,
    /// Environment state right after preparation.
    pub environment: DensityMatrix,
    /// Reduced system state after the joint dynamics.
    pub output: DensityMatrix,
    pub probability: f64,
    /// `o_mn = Tr[M_n output_m]`, one per observable.
    pub expectations: Vec<f64>,
}

/// Prepares every basis input with `proc`, evolves the joint state and
/// records the reduced system output.
pub fn run_pipeline(
    rho_se: &BipartiteState,
    proc: &PreparationProcedure,
    d: &JointDynamics,
    basis: &TomographyBasis,
    observables: &[Observable],
) -> Result<Vec<ExperimentRecord>> {
    if proc.len() != basis.len() {
        return Err(Error::Dimension {
            expected: basis.len(),
            found: proc.len(),
        });
    }
    if basis.dim() != rho_se.dim_s() {
        return Err(Error::Dimension {
            expected: rho_se.dim_s(),
            found: basis.dim(),
        });
    }
    for (m, (got, want)) in proc.inputs().iter().zip(basis.inputs()).enumerate() {
        if got.dim() != want.dim() || got.matrix().max_abs_diff(want.matrix()) > STRUCTURAL_TOL {
            return Err(Error::ContractViolation(format!(
                "procedure input {m} does not match basis input {m}"
            )));
        }
    }
    if let Some(o) = observables
        .iter()
        .find(|o| o.matrix.dim() != rho_se.dim_s())
    {
        return Err(Error::Dimension {
            expected: rho_se.dim_s(),
            found: o.matrix.dim(),
        });
    }
    let mut records = run_procedure(rho_se, proc, d, observables)?;
    for (r, b) in records.iter_mut().zip(basis.inputs()) {
        r.prepared = b.clone();
    }
    Ok(records)
}

/// Runs every input of `proc` through the dynamics without a basis check.
pub fn run_procedure(
    rho_se: &BipartiteState,
    proc: &PreparationProcedure,
    d: &JointDynamics,
    observables: &[Observable],
) -> Result<Vec<ExperimentRecord>> {
    let inputs = proc.inputs();
    (0..proc.len())
        .map(|m| {
            let outcome = proc.prepare(rho_se, m)?;
            let output = evolve(&outcome.prepared, d)?.reduce_system();
            let expectations = observables.iter().map(|o| o.expectation(&output)).collect();
            Ok(ExperimentRecord {
                input_label: m,
                prepared: inputs[m].clone(),
                environment: outcome.environment_state(),
                output,
                probability: outcome.probability,
                expectations,
            })
        })
        .collect()
}

/// Linear inversion: the map sending each recorded input to its output.
/// Square systems are solved by LU; overcomplete input sets by least squares.
pub fn reconstruct_process(records: &[ExperimentRecord]) -> Result<SuperOperator> {
    let Some(first) = records.first() else {
        return Err(Error::DegenerateBasis {
            smallest_singular_value: 0.0,
        });
    };
    let dim = first.prepared.dim();
    if let Some(bad) = records
        .iter()
        .find(|r| r.prepared.dim() != dim || r.output.dim() != dim)
    {
        return Err(Error::Dimension {
            expected: dim,
            found: bad.prepared.dim().max(bad.output.dim()),
        });
    }
    let x = stacked(records.iter().map(|r| r.prepared.matrix().clone()));
    let y = stacked(records.iter().map(|r| r.output.matrix().clone()));
    let sigma = smallest_singular_value(&x);
    if sigma <= BASIS_RANK_TOL {
        return Err(Error::DegenerateBasis {
            smallest_singular_value: sigma,
        });
    }
    let n = dim * dim;
    let lambda = if x.ncols() == n {
        // Λ X = Y  ⇔  Xᵀ Λᵀ = Yᵀ
        let solved = x
            .transpose()
            .lu()
            .solve(&y.transpose())
            .ok_or(Error::DegenerateBasis {
                smallest_singular_value: sigma,
            })?;
        solved.transpose()
    } else {
        let svd = x.svd(true, true);
        let pinv = svd
            .pseudo_inverse(BASIS_RANK_TOL)
            .map_err(|e| Error::InvalidMatrix(e.to_string()))?;
        y * pinv
    };
    SuperOperator::from_matrix(dim, ComplexMatrix::from_dmatrix(lambda)?)
}

/// `max_m ‖Λ(P_m) − output_m‖_F`
pub fn linearity_residual(process: &SuperOperator, records: &[ExperimentRecord]) -> Result<f64> {
    records.iter().try_fold(0.0_f64, |worst, r| {
        let img = process.apply(r.prepared.matrix())?;
        Ok(worst.max((&img - r.output.matrix()).frobenius_norm()))
    })
}

/// Verdict on a reconstructed process map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessDiagnosis {
    pub process: SuperOperator,
    pub choi_min_eigenvalue: f64,
    pub is_cp: bool,
    pub tp_deviation: f64,
    pub linearity_residual: f64,
    pub choi_hermiticity_deviation: f64,
}

pub fn diagnose(process: &SuperOperator, records: &[ExperimentRecord]) -> Result<ProcessDiagnosis> {
    diagnose_with_threshold(process, records, CP_THRESHOLD)
}

pub fn diagnose_with_threshold(
    process: &SuperOperator,
    records: &[ExperimentRecord],
    cp_threshold: f64,
) -> Result<ProcessDiagnosis> {
    let cp = cp_diagnosis_with_threshold(&choi_from_superop(process), cp_threshold);
    Ok(ProcessDiagnosis {
        process: process.clone(),
        choi_min_eigenvalue: cp.min_eigenvalue,
        is_cp: cp.is_cp,
        tp_deviation: cp.tp_deviation,
        linearity_residual: linearity_residual(process, records)?,
        choi_hermiticity_deviation: cp.hermiticity_deviation,
    })
}

/// Applies `process` to an arbitrary operator given as a vector.
pub fn apply_vectorized(
    process: &SuperOperator,
    v: &nalgebra::DVector<C64>,
) -> Result<ComplexMatrix> {
    unvectorize(&(process.matrix().as_dmatrix() * v))
}
