//! Scenario configuration: the TOML schema and its resolution into domain
//! objects.
//!
//! Matrices are written as lists of rows of `[re, im]` pairs and vectors as
//! lists of `[re, im]` pairs. Every literal is checked against the invariants
//! of the type it becomes; problems are collected as [`Finding`]s naming the
//! offending field rather than failing on the first one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::dynamics::JointDynamics;
use crate::preparations::{
    rotation_between, MultiPin, PreparationProcedure, Projective, Stochastic,
};
use crate::qmath::{c, hermitian_eigen, ComplexMatrix, C64, CP_THRESHOLD, STRUCTURAL_TOL};
use crate::random::{
    random_correlated_state, random_product_state, random_unitary, seeded_rng, ScenarioRng,
};
use crate::states::{
    bell_phi_plus, product_state, pure_density, werner_family, BipartiteState, DensityMatrix,
    PureStateVector,
};
use crate::tomography::{Observable, TomographyBasis};

pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;
pub type VectorLiteral = Vec<[f64; 2]>;

pub fn matrix_from_literal(lit: &MatrixLiteral) -> Result<ComplexMatrix, String> {
    let rows: Vec<Vec<C64>> = lit
        .iter()
        .map(|r| r.iter().map(|&[re, im]| c(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn matrix_to_literal(m: &ComplexMatrix) -> MatrixLiteral {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn vector_from_literal(lit: &VectorLiteral) -> Vec<C64> {
    lit.iter().map(|&[re, im]| c(re, im)).collect()
}

/// Output format tag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// Human-readable summary.
    #[default]
    Table,
    /// Structured JSON report.
    Json,
    /// Comma-separated per-input table.
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Table => "txt",
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Physicality tolerance applied to literals on load.
    #[serde(default = "default_structural")]
    pub structural: f64,
    /// Minimum Choi eigenvalue still counted as completely positive.
    #[serde(default = "default_cp")]
    pub cp_threshold: f64,
}

fn default_structural() -> f64 {
    STRUCTURAL_TOL
}

fn default_cp() -> f64 {
    CP_THRESHOLD
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: STRUCTURAL_TOL,
            cp_threshold: CP_THRESHOLD,
        }
    }
}

/// Initial joint state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    /// `"bell_phi_plus"` or `"werner p=0.5"`.
    Named(String),
    Structured(StructuredState),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructuredState {
    BellPhiPlus,
    Werner {
        p: f64,
    },
    Product {
        system: FactorSpec,
        environment: FactorSpec,
    },
    Matrix {
        dim_s: usize,
        dim_e: usize,
        matrix: MatrixLiteral,
    },
    RandomCorrelated {
        #[serde(default = "two")]
        dim_s: usize,
        #[serde(default = "two")]
        dim_e: usize,
    },
    RandomProduct {
        #[serde(default = "two")]
        dim_s: usize,
        #[serde(default = "two")]
        dim_e: usize,
    },
}

fn two() -> usize {
    2
}

/// A single-factor state: a named qubit state (`"x+"`, `"mixed"`, ...), an
/// amplitude vector, or a density-matrix literal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorSpec {
    Named(String),
    Vector(VectorLiteral),
    Matrix(MatrixLiteral),
}

/// A pure input state: a named qubit state, an amplitude vector, or a rank-1
/// projector literal.
pub type InputSpec = FactorSpec;

/// A local operation: a named unitary (`"H"`, `"S*H"`, `"depolarizing p=1"`),
/// an explicit unitary, or explicit Kraus operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Unitary { unitary: MatrixLiteral },
    Kraus { kraus: Vec<MatrixLiteral> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DynamicsSpec {
    /// `"CNOT"`, `"SWAP"`, `"ISWAP"` or `"identity"`.
    Named(String),
    Structured(StructuredDynamics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructuredDynamics {
    Identity,
    Gate {
        name: String,
    },
    Unitary {
        matrix: MatrixLiteral,
    },
    Hamiltonian {
        matrix: MatrixLiteral,
        duration: f64,
    },
    Factorized {
        system: OperatorSpec,
        environment: OperatorSpec,
    },
    RandomUnitary,
    RandomFactorized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    /// `"standard"`: `{z+, z-, x+, y+}`.
    Named(String),
    States(Vec<InputSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Named(String),
    Matrix { name: String, matrix: MatrixLiteral },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcedureSpec {
    Projective {
        label: Option<String>,
        /// Defaults to the tomography basis.
        inputs: Option<Vec<InputSpec>>,
    },
    Stochastic {
        label: Option<String>,
        pin: InputSpec,
        inputs: Option<Vec<InputSpec>>,
        /// Defaults to unitaries rotating the pinned state onto each input.
        rotations: Option<Vec<OperatorSpec>>,
    },
    Multipin {
        label: Option<String>,
        inputs: Option<Vec<InputSpec>>,
        /// Defaults to the identity on the environment for every input.
        env_actions: Option<Vec<OperatorSpec>>,
    },
}

impl ProcedureSpec {
    pub fn label(&self, index: usize) -> String {
        let (label, kind) = match self {
            Self::Projective { label, .. } => (label, "projective"),
            Self::Stochastic { label, .. } => (label, "stochastic"),
            Self::Multipin { label, .. } => (label, "multipin"),
        };
        label.clone().unwrap_or_else(|| format!("{kind}-{index}"))
    }
}

/// A complete scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub initial_state: StateSpec,
    pub dynamics: DynamicsSpec,
    /// When present, every procedure is also run through process tomography.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisSpec>,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    pub procedures: Vec<ProcedureSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Drives the randomized state and dynamics kinds only.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: OutputFormat,
}

/// A validation problem attached to a config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedProcedure {
    pub label: String,
    pub procedure: PreparationProcedure,
}

/// A config turned into validated domain objects.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub state: BipartiteState,
    pub dynamics: JointDynamics,
    pub basis: Option<TomographyBasis>,
    pub observables: Vec<Observable>,
    pub procedures: Vec<ResolvedProcedure>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates the config and builds the domain objects, or returns every
    /// finding encountered.
    pub fn resolve(&self) -> Result<ResolvedScenario, Vec<Finding>> {
        Resolver::new(self).run()
    }

    /// Empty iff the config resolves.
    pub fn findings(&self) -> Vec<Finding> {
        self.resolve().err().unwrap_or_default()
    }
}

/// Single-qubit (or identity) unitary by name; `*` composes left to right as
/// a matrix product, so `"S*H"` is `S·H`.
pub fn named_unitary(name: &str, dim: usize) -> Result<ComplexMatrix, String> {
    let mut acc = ComplexMatrix::identity(dim);
    for part in name.split('*').map(str::trim) {
        let m = match part {
            "I" | "id" | "identity" => ComplexMatrix::identity(dim),
            _ if dim != 2 => {
                return Err(format!(
                    "named gate {part:?} is only defined for qubits, dimension is {dim}"
                ))
            }
            "X" => ComplexMatrix::pauli_x(),
            "Y" => ComplexMatrix::pauli_y(),
            "Z" => ComplexMatrix::pauli_z(),
            "H" => ComplexMatrix::hadamard(),
            "S" => ComplexMatrix::phase_s(),
            "SDG" => ComplexMatrix::phase_s().adjoint(),
            "T" => ComplexMatrix::from_rows(&[
                vec![c(1.0, 0.0), c(0.0, 0.0)],
                vec![
                    c(0.0, 0.0),
                    C64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
                ],
            ])
            .expect("static"),
            other => return Err(format!("unknown gate {other:?}")),
        };
        acc = &acc * &m;
    }
    Ok(acc)
}

/// Parses `"<word> p=<value>"`.
fn parse_parametrized(text: &str, word: &str) -> Option<Result<f64, String>> {
    let rest = text.trim().strip_prefix(word)?.trim();
    let value = rest.strip_prefix("p=").map(str::trim)?;
    Some(
        value
            .parse::<f64>()
            .map_err(|e| format!("bad parameter {value:?}: {e}")),
    )
}

struct Resolver<'a> {
    cfg: &'a ScenarioConfig,
    findings: Vec<Finding>,
    rng: ScenarioRng,
}

impl<'a> Resolver<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self {
            cfg,
            findings: Vec::new(),
            rng: seeded_rng(cfg.seed),
        }
    }

    fn fail(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            field: field.into(),
            message: message.into(),
        });
    }

    fn tol(&self) -> f64 {
        self.cfg.tolerances.structural
    }

    fn run(mut self) -> Result<ResolvedScenario, Vec<Finding>> {
        let t = self.cfg.tolerances;
        if !(t.structural.is_finite() && t.structural > 0.0) {
            self.fail("tolerances.structural", "must be a positive finite number");
        }
        if !(t.cp_threshold.is_finite() && t.cp_threshold >= 0.0) {
            self.fail(
                "tolerances.cp_threshold",
                "must be a nonnegative finite number",
            );
        }
        if self.cfg.procedures.is_empty() {
            self.fail("procedures", "at least one procedure is required");
        }

        let state = self.state();
        let dims = state.as_ref().map(|s| (s.dim_s(), s.dim_e()));
        let dynamics = self.dynamics(dims);
        let basis = self.basis(dims.map(|d| d.0));
        let observables = self.observables(dims.map(|d| d.0));
        let procedures = self.procedures(dims, basis.as_ref());

        match (state, dynamics) {
            (Some(state), Some(dynamics)) if self.findings.is_empty() => Ok(ResolvedScenario {
                state,
                dynamics,
                basis,
                observables,
                procedures,
            }),
            _ => Err(self.findings),
        }
    }

    fn density(&mut self, field: &str, m: ComplexMatrix) -> Option<DensityMatrix> {
        match DensityMatrix::with_tolerance(m, self.tol()) {
            Ok(d) => Some(d),
            Err(e) => {
                self.fail(field, e.to_string());
                None
            }
        }
    }

    fn state(&mut self) -> Option<BipartiteState> {
        let field = "initial_state";
        let structured = match &self.cfg.initial_state {
            StateSpec::Structured(s) => s.clone(),
            StateSpec::Named(name) => {
                if name.trim() == "bell_phi_plus" {
                    StructuredState::BellPhiPlus
                } else if let Some(p) = parse_parametrized(name, "werner") {
                    match p {
                        Ok(p) => StructuredState::Werner { p },
                        Err(e) => {
                            self.fail(field, e);
                            return None;
                        }
                    }
                } else {
                    self.fail(field, format!("unknown named state {name:?}"));
                    return None;
                }
            }
        };
        match structured {
            StructuredState::BellPhiPlus => Some(bell_phi_plus()),
            StructuredState::Werner { p } => match werner_family(p) {
                Ok(s) => Some(s),
                Err(e) => {
                    self.fail("initial_state.p", e.to_string());
                    None
                }
            },
            StructuredState::Product {
                system,
                environment,
            } => {
                let s = self.factor("initial_state.system", &system, None);
                let e = self.factor("initial_state.environment", &environment, None);
                Some(product_state(&s?, &e?))
            }
            StructuredState::Matrix {
                dim_s,
                dim_e,
                matrix,
            } => {
                let m = match matrix_from_literal(&matrix) {
                    Ok(m) => m,
                    Err(e) => {
                        self.fail("initial_state.matrix", e);
                        return None;
                    }
                };
                if dim_s == 0 || dim_e == 0 || m.dim() != dim_s * dim_e {
                    self.fail(
                        "initial_state.matrix",
                        format!(
                            "matrix dimension {} does not equal dim_s·dim_e = {}",
                            m.dim(),
                            dim_s * dim_e
                        ),
                    );
                    return None;
                }
                let joint = self.density("initial_state.matrix", m)?;
                Some(BipartiteState::new(joint, dim_s, dim_e).expect("dimensions checked"))
            }
            StructuredState::RandomCorrelated { dim_s, dim_e } => {
                if dim_s == 0 || dim_e == 0 {
                    self.fail(field, "dimensions must be positive");
                    return None;
                }
                Some(random_correlated_state(dim_s, dim_e, &mut self.rng))
            }
            StructuredState::RandomProduct { dim_s, dim_e } => {
                if dim_s == 0 || dim_e == 0 {
                    self.fail(field, "dimensions must be positive");
                    return None;
                }
                Some(random_product_state(dim_s, dim_e, &mut self.rng))
            }
        }
    }

    /// A state of one factor; `dim` constrains it when known.
    fn factor(
        &mut self,
        field: &str,
        spec: &FactorSpec,
        dim: Option<usize>,
    ) -> Option<DensityMatrix> {
        let out = match spec {
            FactorSpec::Named(name) if name == "mixed" => {
                Some(DensityMatrix::maximally_mixed(dim.unwrap_or(2)))
            }
            FactorSpec::Named(name) => match PureStateVector::from_name(name) {
                Some(v) => Some(pure_density(&v)),
                None => {
                    self.fail(field, format!("unknown named state {name:?}"));
                    None
                }
            },
            FactorSpec::Vector(lit) => match PureStateVector::new(vector_from_literal(lit)) {
                Ok(v) => Some(pure_density(&v)),
                Err(e) => {
                    self.fail(field, e.to_string());
                    None
                }
            },
            FactorSpec::Matrix(lit) => match matrix_from_literal(lit) {
                Ok(m) => self.density(field, m),
                Err(e) => {
                    self.fail(field, e);
                    None
                }
            },
        }?;
        if let Some(d) = dim {
            if out.dim() != d {
                self.fail(
                    field,
                    format!("state has dimension {}, expected {d}", out.dim()),
                );
                return None;
            }
        }
        Some(out)
    }

    /// A pure state, from a name, a vector, or a rank-1 projector literal.
    fn pure(
        &mut self,
        field: &str,
        spec: &InputSpec,
        dim: Option<usize>,
    ) -> Option<PureStateVector> {
        let rho = self.factor(field, spec, dim)?;
        let m = rho.matrix();
        if (m * m).max_abs_diff(m) > self.tol() {
            self.fail(field, "input state must be pure (a rank-1 projector)");
            return None;
        }
        let eig = hermitian_eigen(m).expect("density matrices are Hermitian");
        let top = eig.eigenvectors.dim() - 1;
        let amps = (0..m.dim()).map(|i| eig.eigenvectors.get(i, top)).collect();
        match PureStateVector::normalized(amps) {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(field, e.to_string());
                None
            }
        }
    }

    fn operator(&mut self, field: &str, spec: &OperatorSpec, dim: usize) -> Option<KrausChannel> {
        let built = match spec {
            OperatorSpec::Named(name) => match parse_parametrized(name, "depolarizing") {
                Some(Ok(p)) if dim == 2 => KrausChannel::depolarizing(p).map_err(|e| e.to_string()),
                Some(Ok(_)) => Err(format!(
                    "depolarizing channel is only defined for qubits, dimension is {dim}"
                )),
                Some(Err(e)) => Err(e),
                None => named_unitary(name, dim)
                    .and_then(|u| KrausChannel::unitary(u).map_err(|e| e.to_string())),
            },
            OperatorSpec::Unitary { unitary } => matrix_from_literal(unitary)
                .and_then(|u| KrausChannel::unitary(u).map_err(|e| e.to_string())),
            OperatorSpec::Kraus { kraus } => kraus
                .iter()
                .map(matrix_from_literal)
                .collect::<Result<Vec<_>, _>>()
                .and_then(|ops| KrausChannel::new(ops).map_err(|e| e.to_string())),
        };
        match built {
            Ok(ch) if ch.dim() != dim => {
                self.fail(
                    field,
                    format!("operation has dimension {}, expected {dim}", ch.dim()),
                );
                None
            }
            Ok(ch) => Some(ch),
            Err(e) => {
                self.fail(field, e);
                None
            }
        }
    }

    fn dynamics(&mut self, dims: Option<(usize, usize)>) -> Option<JointDynamics> {
        let field = "dynamics";
        let structured = match &self.cfg.dynamics {
            DynamicsSpec::Structured(s) => s.clone(),
            DynamicsSpec::Named(n) if n == "identity" => StructuredDynamics::Identity,
            DynamicsSpec::Named(n) => StructuredDynamics::Gate { name: n.clone() },
        };
        let built: Result<JointDynamics, String> = match structured {
            StructuredDynamics::Identity => {
                let (ds, de) = dims?;
                Ok(JointDynamics::identity(ds * de))
            }
            StructuredDynamics::Gate { name } => match name.to_ascii_uppercase().as_str() {
                "CNOT" => Ok(JointDynamics::cnot()),
                "SWAP" => Ok(JointDynamics::swap()),
                "ISWAP" => Ok(JointDynamics::iswap()),
                _ => Err(format!("unknown gate {name:?}")),
            },
            StructuredDynamics::Unitary { matrix } => matrix_from_literal(&matrix)
                .and_then(|u| JointDynamics::unitary(u).map_err(|e| e.to_string())),
            StructuredDynamics::Hamiltonian { matrix, duration } => matrix_from_literal(&matrix)
                .and_then(|h| JointDynamics::hamiltonian(h, duration).map_err(|e| e.to_string())),
            StructuredDynamics::Factorized {
                system,
                environment,
            } => {
                let (ds, de) = dims?;
                let us = self.operator("dynamics.system", &system, ds);
                let ue = self.operator("dynamics.environment", &environment, de);
                let (us, ue) = (us?, ue?);
                if us.operators().len() != 1 || ue.operators().len() != 1 {
                    Err("factorized dynamics needs unitary factors".to_string())
                } else {
                    JointDynamics::factorized(&us.operators()[0], &ue.operators()[0])
                        .map_err(|e| e.to_string())
                }
            }
            StructuredDynamics::RandomUnitary => {
                let (ds, de) = dims?;
                JointDynamics::unitary(random_unitary(ds * de, &mut self.rng))
                    .map_err(|e| e.to_string())
            }
            StructuredDynamics::RandomFactorized => {
                let (ds, de) = dims?;
                let us = random_unitary(ds, &mut self.rng);
                let ue = random_unitary(de, &mut self.rng);
                JointDynamics::factorized(&us, &ue).map_err(|e| e.to_string())
            }
        };
        match built {
            Ok(d) => {
                if let Some((ds, de)) = dims {
                    if d.dim() != ds * de {
                        self.fail(
                            field,
                            format!(
                                "dynamics acts on dimension {}, but the joint state has dimension {}",
                                d.dim(),
                                ds * de
                            ),
                        );
                        return None;
                    }
                }
                Some(d)
            }
            Err(e) => {
                self.fail(field, e);
                None
            }
        }
    }

    fn basis(&mut self, dim_s: Option<usize>) -> Option<TomographyBasis> {
        let spec = self.cfg.basis.clone()?;
        let states = match spec {
            BasisSpec::Named(n) if n == "standard" => {
                if dim_s.is_some_and(|d| d != 2) {
                    self.fail(
                        "basis",
                        "the standard basis is only defined for a qubit system",
                    );
                    return None;
                }
                return Some(TomographyBasis::standard_qubit());
            }
            BasisSpec::Named(n) => {
                self.fail("basis", format!("unknown basis {n:?}"));
                return None;
            }
            BasisSpec::States(states) => states,
        };
        let inputs: Vec<Option<DensityMatrix>> = states
            .iter()
            .enumerate()
            .map(|(i, s)| self.factor(&format!("basis[{i}]"), s, dim_s))
            .collect();
        let inputs: Option<Vec<DensityMatrix>> = inputs.into_iter().collect();
        match TomographyBasis::new(inputs?) {
            Ok(b) => Some(b),
            Err(e) => {
                self.fail("basis", e.to_string());
                None
            }
        }
    }

    fn observables(&mut self, dim_s: Option<usize>) -> Vec<Observable> {
        let specs = self.cfg.observables.clone();
        specs
            .iter()
            .enumerate()
            .filter_map(|(i, spec)| {
                let field = format!("observables[{i}]");
                let obs = match spec {
                    ObservableSpec::Named(n) => {
                        Observable::pauli(n).ok_or_else(|| format!("unknown observable {n:?}"))
                    }
                    ObservableSpec::Matrix { name, matrix } => matrix_from_literal(matrix)
                        .and_then(|m| Observable::new(name.clone(), m).map_err(|e| e.to_string())),
                };
                match obs {
                    Ok(o) if dim_s.is_some_and(|d| d != o.matrix().dim()) => {
                        self.fail(field, "observable dimension does not match the system");
                        None
                    }
                    Ok(o) => Some(o),
                    Err(e) => {
                        self.fail(field, e);
                        None
                    }
                }
            })
            .collect()
    }

    fn procedures(
        &mut self,
        dims: Option<(usize, usize)>,
        basis: Option<&TomographyBasis>,
    ) -> Vec<ResolvedProcedure> {
        let specs = self.cfg.procedures.clone();
        let mut out = Vec::new();
        for (i, spec) in specs.iter().enumerate() {
            let before = self.findings.len();
            let built = self.procedure(i, spec, dims, basis);
            if let (Some(p), Some(b)) = (&built, basis) {
                let inputs = p.inputs();
                let matches = inputs.len() == b.len()
                    && inputs.iter().zip(b.inputs()).all(|(x, y)| {
                        x.dim() == y.dim() && x.matrix().max_abs_diff(y.matrix()) <= self.tol()
                    });
                if !matches {
                    self.fail(
                        format!("procedures[{i}].inputs"),
                        "inputs must reproduce the tomography basis in order",
                    );
                }
            }
            if let Some(p) = built {
                if self.findings.len() == before {
                    out.push(ResolvedProcedure {
                        label: spec.label(i),
                        procedure: p,
                    });
                }
            }
        }
        let mut labels: Vec<&str> = out.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            let dup = w[0].to_owned();
            self.fail("procedures", format!("duplicate procedure label {dup:?}"));
        }
        out
    }

    fn inputs(
        &mut self,
        prefix: &str,
        explicit: &Option<Vec<InputSpec>>,
        dim_s: Option<usize>,
        basis: Option<&TomographyBasis>,
    ) -> Option<Vec<PureStateVector>> {
        match (explicit, basis) {
            (Some(list), _) => {
                let v: Vec<Option<PureStateVector>> = list
                    .iter()
                    .enumerate()
                    .map(|(m, s)| self.pure(&format!("{prefix}.inputs[{m}]"), s, dim_s))
                    .collect();
                v.into_iter().collect()
            }
            (None, Some(b)) => {
                let specs: Vec<InputSpec> = b
                    .inputs()
                    .iter()
                    .map(|d| FactorSpec::Matrix(matrix_to_literal(d.matrix())))
                    .collect();
                let v: Vec<Option<PureStateVector>> = specs
                    .iter()
                    .enumerate()
                    .map(|(m, s)| self.pure(&format!("basis[{m}]"), s, dim_s))
                    .collect();
                v.into_iter().collect()
            }
            (None, None) => None,
        }
    }

    fn procedure(
        &mut self,
        i: usize,
        spec: &ProcedureSpec,
        dims: Option<(usize, usize)>,
        basis: Option<&TomographyBasis>,
    ) -> Option<PreparationProcedure> {
        let prefix = format!("procedures[{i}]");
        let dim_s = dims.map(|d| d.0);
        let result = match spec {
            ProcedureSpec::Projective { inputs, .. } => {
                if inputs.is_none() && basis.is_none() {
                    self.fail(
                        format!("{prefix}.inputs"),
                        "required when no basis is given",
                    );
                    return None;
                }
                let states = self.inputs(&prefix, inputs, dim_s, basis)?;
                Projective::from_states(&states).map(PreparationProcedure::Projective)
            }
            ProcedureSpec::Stochastic {
                pin,
                inputs,
                rotations,
                ..
            } => {
                let pin = self.pure(&format!("{prefix}.pin"), pin, dim_s)?;
                let d = pin.dim();
                let targets = self.inputs(&prefix, inputs, Some(d), basis);
                match (rotations, targets) {
                    (None, None) => {
                        self.fail(
                            format!("{prefix}.rotations"),
                            "required when neither inputs nor a basis is given",
                        );
                        return None;
                    }
                    (None, Some(targets)) => {
                        Stochastic::rotating_to(pin, &targets).map(PreparationProcedure::Stochastic)
                    }
                    (Some(rots), targets) => {
                        let chans: Vec<Option<KrausChannel>> = rots
                            .iter()
                            .enumerate()
                            .map(|(m, r)| self.operator(&format!("{prefix}.rotations[{m}]"), r, d))
                            .collect();
                        let chans: Vec<KrausChannel> = chans.into_iter().collect::<Option<_>>()?;
                        match targets {
                            Some(t) => {
                                let dens: Vec<DensityMatrix> = t.iter().map(pure_density).collect();
                                Stochastic::with_targets(pin, chans, &dens)
                            }
                            None => Stochastic::new(pin, chans),
                        }
                        .map(PreparationProcedure::Stochastic)
                    }
                }
            }
            ProcedureSpec::Multipin {
                inputs,
                env_actions,
                ..
            } => {
                if inputs.is_none() && basis.is_none() {
                    self.fail(
                        format!("{prefix}.inputs"),
                        "required when no basis is given",
                    );
                    return None;
                }
                let pins = self.inputs(&prefix, inputs, dim_s, basis)?;
                let de = dims.map(|d| d.1).unwrap_or(2);
                let actions: Vec<KrausChannel> = match env_actions {
                    None => vec![KrausChannel::identity(de); pins.len()],
                    Some(list) if list.len() != pins.len() => {
                        self.fail(
                            format!("{prefix}.env_actions"),
                            format!("{} actions given for {} inputs", list.len(), pins.len()),
                        );
                        return None;
                    }
                    Some(list) => {
                        let v: Vec<Option<KrausChannel>> = list
                            .iter()
                            .enumerate()
                            .map(|(m, a)| {
                                self.operator(&format!("{prefix}.env_actions[{m}]"), a, de)
                            })
                            .collect();
                        v.into_iter().collect::<Option<_>>()?
                    }
                };
                MultiPin::new(pins.into_iter().zip(actions).collect())
                    .map(PreparationProcedure::MultiPin)
            }
        };
        match result {
            Ok(p) => Some(p),
            Err(e) => {
                self.fail(prefix, e.to_string());
                None
            }
        }
    }
}

/// Rotation helper re-exported for config authors who need explicit unitaries.
pub fn rotation_literal(from: &PureStateVector, to: &PureStateVector) -> Option<MatrixLiteral> {
    rotation_between(from, to)
        .ok()
        .map(|u| matrix_to_literal(&u))
}
