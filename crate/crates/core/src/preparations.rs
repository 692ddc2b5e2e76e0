//! Preparation procedures acting on the system factor of a joint state.
//!
//! Three procedures are modelled:
//!
//! * **Projective**: project the system onto a rank-1 `P_m` and keep the
//!   successful branch, renormalized by its probability `a_m`. The environment
//!   is conditioned through whatever correlations the joint state carries.
//! * **Stochastic**: pin the system to a fixed `|Φ⟩` (trace and replace), then
//!   rotate it with a local trace-preserving `Ω_m`. The environment is left in
//!   the same reduced state for every input.
//! * **Multi-pin**: a separate pin per input, each with its own direct action
//!   `Q_m` on the environment.
//!
//! Every procedure acts as `A_m ⊗ I` (or `Θ_m ⊗ Q_m`) on the joint state.

use nalgebra::{DMatrix, DVector};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::qmath::{c, tensor, ComplexMatrix, C64, STRUCTURAL_TOL};
use crate::states::{pure_density, trace_distance, BipartiteState, DensityMatrix, PureStateVector};

/// Success probabilities at or below this are treated as a preparation that never happens.
pub const IMPOSSIBLE_PREPARATION_THRESHOLD: f64 = 1e-12;

/// Result of preparing input `input_label` from a joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationOutcome {
    pub prepared: BipartiteState,
    pub probability: f64,
    pub input_label: usize,
}

impl PreparationOutcome {
    pub fn system_state(&self) -> DensityMatrix {
        self.prepared.reduce_system()
    }

    pub fn environment_state(&self) -> DensityMatrix {
        self.prepared.reduce_environment()
    }

    fn labelled(mut self, m: usize) -> Self {
        self.input_label = m;
        self
    }
}

fn check_rank_one_projector(p: &DensityMatrix) -> Result<()> {
    let m = p.matrix();
    let idem = (m * m).max_abs_diff(m);
    if idem > STRUCTURAL_TOL {
        return Err(Error::ContractViolation(format!(
            "preparation projector must be a rank-1 projector (P² deviates from P by {idem:e})"
        )));
    }
    Ok(())
}

fn check_system_dim(state: &BipartiteState, dim: usize) -> Result<()> {
    if dim != state.dim_s() {
        return Err(Error::Dimension {
            expected: state.dim_s(),
            found: dim,
        });
    }
    Ok(())
}

fn check_trace_preserving(ch: &KrausChannel, what: &str) -> Result<()> {
    let dev = ch.completeness_deviation();
    if dev > STRUCTURAL_TOL {
        return Err(Error::ContractViolation(format!(
            "{what} must be trace-preserving (‖ΣK†K − I‖ = {dev:e})"
        )));
    }
    Ok(())
}

/// `(P ⊗ I) ρ (P ⊗ I) / a` with `a = Tr[(P ⊗ I) ρ]`.
pub fn prepare_projective(
    rho_se: &BipartiteState,
    p_m: &DensityMatrix,
) -> Result<PreparationOutcome> {
    check_system_dim(rho_se, p_m.dim())?;
    check_rank_one_projector(p_m)?;
    let lifted = tensor(p_m.matrix(), &ComplexMatrix::identity(rho_se.dim_e()));
    let probability = (&lifted * rho_se.joint().matrix()).trace().re;
    if probability <= IMPOSSIBLE_PREPARATION_THRESHOLD {
        return Err(Error::ImpossiblePreparation {
            label: 0,
            probability,
        });
    }
    let branch = rho_se.joint().matrix().conjugate_by(&lifted);
    let prepared = BipartiteState::from_matrix(
        branch.scale_real(1.0 / probability),
        rho_se.dim_s(),
        rho_se.dim_e(),
    )?;
    Ok(PreparationOutcome {
        prepared,
        probability,
        input_label: 0,
    })
}

/// Pin map: `|Φ⟩⟨Φ| ⊗ Tr_S ρ`.
pub fn prepare_pin(rho_se: &BipartiteState, phi: &PureStateVector) -> Result<PreparationOutcome> {
    check_system_dim(rho_se, phi.dim())?;
    let joint = tensor(
        pure_density(phi).matrix(),
        rho_se.reduce_environment().matrix(),
    );
    Ok(PreparationOutcome {
        prepared: BipartiteState::from_matrix(joint, rho_se.dim_s(), rho_se.dim_e())?,
        probability: 1.0,
        input_label: 0,
    })
}

/// Pin to `|Φ⟩`, then apply the local operation `Ω_m ⊗ I`.
pub fn prepare_stochastic(
    rho_se: &BipartiteState,
    phi: &PureStateVector,
    omega_m: &KrausChannel,
) -> Result<PreparationOutcome> {
    check_system_dim(rho_se, omega_m.dim())?;
    check_trace_preserving(omega_m, "local rotation")?;
    let pinned = prepare_pin(rho_se, phi)?;
    let joint = omega_m
        .on_system(rho_se.dim_e())
        .apply(pinned.prepared.joint().matrix())?;
    Ok(PreparationOutcome {
        prepared: BipartiteState::from_matrix(joint, rho_se.dim_s(), rho_se.dim_e())?,
        probability: 1.0,
        input_label: 0,
    })
}

/// Pin to `|Φ_m⟩` while `Q_m` acts directly on the environment.
pub fn prepare_multipin(
    rho_se: &BipartiteState,
    pin_m: &PureStateVector,
    q_m: &KrausChannel,
) -> Result<PreparationOutcome> {
    if q_m.dim() != rho_se.dim_e() {
        return Err(Error::Dimension {
            expected: rho_se.dim_e(),
            found: q_m.dim(),
        });
    }
    check_trace_preserving(q_m, "environment action")?;
    let pinned = prepare_pin(rho_se, pin_m)?;
    let joint = q_m
        .on_environment(rho_se.dim_s())
        .apply(pinned.prepared.joint().matrix())?;
    Ok(PreparationOutcome {
        prepared: BipartiteState::from_matrix(joint, rho_se.dim_s(), rho_se.dim_e())?,
        probability: 1.0,
        input_label: 0,
    })
}

/// Largest pairwise trace distance between post-preparation environment
/// states. Zero means the environment does not depend on the input.
pub fn environment_dependence(outcomes: &[PreparationOutcome]) -> Result<f64> {
    if outcomes.len() < 2 {
        return Err(Error::Domain(format!(
            "environment dependence needs at least 2 outcomes, got {}",
            outcomes.len()
        )));
    }
    let envs: Vec<DensityMatrix> = outcomes.iter().map(|o| o.environment_state()).collect();
    let mut worst: f64 = 0.0;
    for (i, a) in envs.iter().enumerate() {
        for b in &envs[i + 1..] {
            worst = worst.max(trace_distance(a, b)?);
        }
    }
    Ok(worst)
}

/// Unitary whose first column is `v`, completed by Gram-Schmidt over the
/// computational basis.
fn unitary_with_first_column(v: &PureStateVector) -> DMatrix<C64> {
    let d = v.dim();
    let mut cols: Vec<DVector<C64>> = vec![v.amplitudes().clone()];
    for k in 0..d {
        if cols.len() == d {
            break;
        }
        let mut w = DVector::from_fn(d, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
        for u in &cols {
            let overlap = u.dotc(&w);
            w -= u * overlap;
        }
        let n = w.norm();
        if n > 1e-8 {
            cols.push(w / c(n, 0.0));
        }
    }
    DMatrix::from_columns(&cols)
}

/// A unitary taking `from` to `to`.
pub fn rotation_between(from: &PureStateVector, to: &PureStateVector) -> Result<ComplexMatrix> {
    if from.dim() != to.dim() {
        return Err(Error::Dimension {
            expected: from.dim(),
            found: to.dim(),
        });
    }
    let u = unitary_with_first_column(to) * unitary_with_first_column(from).adjoint();
    ComplexMatrix::from_dmatrix(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projective {
    projectors: Vec<DensityMatrix>,
}

impl Projective {
    pub fn new(projectors: Vec<DensityMatrix>) -> Result<Self> {
        nonempty(&projectors)?;
        same_dims(projectors.iter().map(|p| p.dim()))?;
        projectors.iter().try_for_each(check_rank_one_projector)?;
        Ok(Self { projectors })
    }

    pub fn from_states(states: &[PureStateVector]) -> Result<Self> {
        Self::new(states.iter().map(pure_density).collect())
    }

    pub fn projectors(&self) -> &[DensityMatrix] {
        &self.projectors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stochastic {
    pin_target: PureStateVector,
    rotations: Vec<KrausChannel>,
}

impl Stochastic {
    pub fn new(pin_target: PureStateVector, rotations: Vec<KrausChannel>) -> Result<Self> {
        nonempty(&rotations)?;
        for r in &rotations {
            if r.dim() != pin_target.dim() {
                return Err(Error::Dimension {
                    expected: pin_target.dim(),
                    found: r.dim(),
                });
            }
            check_trace_preserving(r, "local rotation")?;
        }
        Ok(Self {
            pin_target,
            rotations,
        })
    }

    /// Like [`Stochastic::new`], additionally checking that each rotation
    /// takes the pinned state to the declared input state.
    pub fn with_targets(
        pin_target: PureStateVector,
        rotations: Vec<KrausChannel>,
        targets: &[DensityMatrix],
    ) -> Result<Self> {
        let s = Self::new(pin_target, rotations)?;
        if targets.len() != s.rotations.len() {
            return Err(Error::Dimension {
                expected: s.rotations.len(),
                found: targets.len(),
            });
        }
        for (m, (got, want)) in s.inputs().iter().zip(targets).enumerate() {
            let dev = got.matrix().max_abs_diff(want.matrix());
            if want.dim() != got.dim() || dev > STRUCTURAL_TOL {
                return Err(Error::ContractViolation(format!(
                    "rotation {m} does not take the pinned state to its declared input (deviation {dev:e})"
                )));
            }
        }
        Ok(s)
    }

    /// One unitary rotation per target, each taking `pin_target` to the target.
    pub fn rotating_to(pin_target: PureStateVector, targets: &[PureStateVector]) -> Result<Self> {
        let rotations = targets
            .iter()
            .map(|t| KrausChannel::unitary(rotation_between(&pin_target, t)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pin_target, rotations)
    }

    pub fn pin_target(&self) -> &PureStateVector {
        &self.pin_target
    }

    pub fn rotations(&self) -> &[KrausChannel] {
        &self.rotations
    }

    fn inputs(&self) -> Vec<DensityMatrix> {
        let pinned = pure_density(&self.pin_target);
        self.rotations
            .iter()
            .map(|r| {
                r.apply_state(&pinned)
                    .expect("rotations are trace-preserving")
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPin {
    pins: Vec<(PureStateVector, KrausChannel)>,
}

impl MultiPin {
    pub fn new(pins: Vec<(PureStateVector, KrausChannel)>) -> Result<Self> {
        nonempty(&pins)?;
        same_dims(pins.iter().map(|(p, _)| p.dim()))?;
        same_dims(pins.iter().map(|(_, q)| q.dim()))?;
        for (_, q) in &pins {
            check_trace_preserving(q, "environment action")?;
        }
        Ok(Self { pins })
    }

    pub fn pins(&self) -> &[(PureStateVector, KrausChannel)] {
        &self.pins
    }
}

fn nonempty<T>(items: &[T]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::ContractViolation(
            "a procedure needs at least one input".into(),
        ));
    }
    Ok(())
}

fn same_dims(mut dims: impl Iterator<Item = usize>) -> Result<()> {
    if let Some(first) = dims.next() {
        if let Some(bad) = dims.find(|&d| d != first) {
            return Err(Error::Dimension {
                expected: first,
                found: bad,
            });
        }
    }
    Ok(())
}

/// One of the three preparation procedures, providing one input per label `m`.
#[derive(Debug, Clone, PartialEq)]
pub enum PreparationProcedure {
    Projective(Projective),
    Stochastic(Stochastic),
    MultiPin(MultiPin),
}

impl PreparationProcedure {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Projective(_) => "projective",
            Self::Stochastic(_) => "stochastic",
            Self::MultiPin(_) => "multipin",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Projective(p) => p.projectors.len(),
            Self::Stochastic(s) => s.rotations.len(),
            Self::MultiPin(mp) => mp.pins.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn system_dim(&self) -> usize {
        match self {
            Self::Projective(p) => p.projectors[0].dim(),
            Self::Stochastic(s) => s.pin_target.dim(),
            Self::MultiPin(mp) => mp.pins[0].0.dim(),
        }
    }

    /// Environment dimension the procedure is tied to, if any.
    pub fn environment_dim(&self) -> Option<usize> {
        match self {
            Self::MultiPin(mp) => Some(mp.pins[0].1.dim()),
            _ => None,
        }
    }

    /// The system input state delivered for each label.
    pub fn inputs(&self) -> Vec<DensityMatrix> {
        match self {
            Self::Projective(p) => p.projectors.clone(),
            Self::Stochastic(s) => s.inputs(),
            Self::MultiPin(mp) => mp.pins.iter().map(|(p, _)| pure_density(p)).collect(),
        }
    }

    pub fn prepare(&self, rho_se: &BipartiteState, m: usize) -> Result<PreparationOutcome> {
        if m >= self.len() {
            return Err(Error::Domain(format!(
                "input label {m} out of range for a procedure with {} inputs",
                self.len()
            )));
        }
        let outcome = match self {
            Self::Projective(p) => prepare_projective(rho_se, &p.projectors[m]),
            Self::Stochastic(s) => prepare_stochastic(rho_se, &s.pin_target, &s.rotations[m]),
            Self::MultiPin(mp) => prepare_multipin(rho_se, &mp.pins[m].0, &mp.pins[m].1),
        };
        match outcome {
            Ok(o) => Ok(o.labelled(m)),
            Err(Error::ImpossiblePreparation { probability, .. }) => {
                Err(Error::ImpossiblePreparation {
                    label: m,
                    probability,
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn prepare_all(&self, rho_se: &BipartiteState) -> Result<Vec<PreparationOutcome>> {
        (0..self.len()).map(|m| self.prepare(rho_se, m)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::partial_trace;
    use crate::qmath::Keep;
    use crate::random::{random_correlated_state, random_density, random_pure, seeded_rng};
    use crate::states::{bell_phi_plus, correlation_norm, product_state, werner_family};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn proj(name: &str) -> DensityMatrix {
        pure_density(&PureStateVector::from_name(name).unwrap())
    }

    /// Explicit 4×4 evaluation of (P⊗I) ρ (P⊗I), its trace and environment block.
    fn projective_oracle(rho: &ComplexMatrix, p: &ComplexMatrix) -> (f64, ComplexMatrix) {
        let mut lifted = vec![vec![c(0.0, 0.0); 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    lifted[i * 2 + k][j * 2 + k] = p.get(i, j);
                }
            }
        }
        let mut branch = vec![vec![c(0.0, 0.0); 4]; 4];
        for r in 0..4 {
            for s in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        branch[r][s] += lifted[r][a] * rho.get(a, b) * lifted[b][s];
                    }
                }
            }
        }
        let prob: f64 = (0..4).map(|k| branch[k][k].re).sum();
        let mut env = vec![vec![c(0.0, 0.0); 2]; 2];
        for k in 0..2 {
            for l in 0..2 {
                env[k][l] = (branch[k][l] + branch[2 + k][2 + l]) / prob;
            }
        }
        (prob, ComplexMatrix::from_rows(&env).unwrap())
    }

    #[test]
    fn projective_on_product_leaves_environment() {
        let mut rng = seeded_rng(5);
        let s = random_density(2, &mut rng);
        let e = random_density(2, &mut rng);
        let rho = product_state(&s, &e);
        let out = prepare_projective(&rho, &proj("y+")).unwrap();
        let expected = tensor(proj("y+").matrix(), e.matrix());
        assert!(out.prepared.joint().matrix().approx_eq(&expected, 1e-12));
    }

    #[test]
    fn projective_on_bell_conditions_environment() {
        let bell = bell_phi_plus();
        let x = prepare_projective(&bell, &proj("x+")).unwrap();
        let (px, ex) = projective_oracle(bell.joint().matrix(), proj("x+").matrix());
        assert!((x.probability - 0.5).abs() < 1e-12);
        assert!((px - 0.5).abs() < 1e-12);
        assert!(x.environment_state().matrix().approx_eq(&ex, 1e-12));
        assert!(ex.approx_eq(proj("x+").matrix(), 1e-12));

        let y = prepare_projective(&bell, &proj("y+")).unwrap();
        let (py, ey) = projective_oracle(bell.joint().matrix(), proj("y+").matrix());
        assert!((y.probability - 0.5).abs() < 1e-12 && (py - 0.5).abs() < 1e-12);
        assert!(ey.approx_eq(proj("y-").matrix(), 1e-12));
        assert!(y.environment_state().matrix().approx_eq(&ey, 1e-12));

        let d = trace_distance(&x.environment_state(), &y.environment_state()).unwrap();
        assert!((d - FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((environment_dependence(&[x, y]).unwrap() - FRAC_1_SQRT_2).abs() < 1e-10);
    }

    #[test]
    fn projective_errors() {
        let rho = product_state(&proj("z+"), &proj("z+"));
        let err = prepare_projective(&rho, &proj("z-")).unwrap_err();
        assert!(matches!(err, Error::ImpossiblePreparation { .. }));
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            prepare_projective(&rho, &mixed),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            prepare_projective(&rho, &DensityMatrix::maximally_mixed(3)),
            Err(Error::Dimension { .. })
        ));
        let p = PreparationProcedure::Projective(
            Projective::new(vec![proj("z+"), proj("z-")]).unwrap(),
        );
        assert!(matches!(
            p.prepare(&rho, 1),
            Err(Error::ImpossiblePreparation { label: 1, .. })
        ));
        assert!(Projective::new(vec![mixed]).is_err());
    }

    #[test]
    fn projective_reduces_to_projector_for_random_states() {
        let mut rng = seeded_rng(77);
        for _ in 0..50 {
            let rho = random_correlated_state(2, 3, &mut rng);
            let p = pure_density(&random_pure(2, &mut rng));
            let out = prepare_projective(&rho, &p).unwrap();
            assert!(out.system_state().matrix().approx_eq(p.matrix(), 1e-10));
        }
    }

    #[test]
    fn projective_probabilities_sum_to_one() {
        let mut rng = seeded_rng(78);
        let rho = random_correlated_state(2, 2, &mut rng);
        for pair in [["z+", "z-"], ["x+", "x-"], ["y+", "y-"]] {
            let total: f64 = pair
                .iter()
                .map(|n| prepare_projective(&rho, &proj(n)).unwrap().probability)
                .sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pin_map_examples() {
        let bell = bell_phi_plus();
        let out = prepare_pin(&bell, &PureStateVector::z_plus()).unwrap();
        let expected = tensor(
            proj("z+").matrix(),
            &ComplexMatrix::identity(2).scale_real(0.5),
        );
        assert!(out.prepared.joint().matrix().approx_eq(&expected, 1e-12));
        assert_eq!(out.probability, 1.0);

        let mut rng = seeded_rng(3);
        let (r, s) = (random_density(2, &mut rng), random_density(2, &mut rng));
        let phi = random_pure(2, &mut rng);
        let out = prepare_pin(&product_state(&r, &s), &phi).unwrap();
        let expected = tensor(pure_density(&phi).matrix(), s.matrix());
        assert!(out.prepared.joint().matrix().approx_eq(&expected, 1e-12));
    }

    #[test]
    fn pin_environment_independent_of_target() {
        let w = werner_family(0.7).unwrap();
        let oracle = partial_trace(w.joint().matrix(), 2, 2, Keep::Environment).unwrap();
        assert!(oracle.approx_eq(&ComplexMatrix::identity(2).scale_real(0.5), 1e-12));
        for name in ["x+", "z-", "y+"] {
            let out = prepare_pin(&w, &PureStateVector::from_name(name).unwrap()).unwrap();
            assert!(out.environment_state().matrix().approx_eq(&oracle, 1e-12));
            assert!(correlation_norm(&out.prepared) < 1e-12);
        }
    }

    #[test]
    fn stochastic_examples() {
        let bell = bell_phi_plus();
        let z0 = PureStateVector::z_plus();
        let id = prepare_stochastic(&bell, &z0, &KrausChannel::identity(2)).unwrap();
        assert_eq!(id, prepare_pin(&bell, &z0).unwrap());

        let h = KrausChannel::unitary(ComplexMatrix::hadamard()).unwrap();
        let out = prepare_stochastic(&bell, &z0, &h).unwrap();
        let expected = tensor(
            proj("x+").matrix(),
            &ComplexMatrix::identity(2).scale_real(0.5),
        );
        assert!(out.prepared.joint().matrix().approx_eq(&expected, 1e-12));

        let lossy = KrausChannel::new(vec![ComplexMatrix::diag(&[1.0, 0.0])]).unwrap();
        assert!(matches!(
            prepare_stochastic(&bell, &z0, &lossy),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn stochastic_standard_inputs_share_environment() {
        let w = werner_family(0.9).unwrap();
        let sh = &ComplexMatrix::phase_s() * &ComplexMatrix::hadamard();
        let rotations = [
            ComplexMatrix::identity(2),
            ComplexMatrix::pauli_x(),
            ComplexMatrix::hadamard(),
            sh,
        ]
        .into_iter()
        .map(|u| KrausChannel::unitary(u).unwrap())
        .collect();
        let targets: Vec<_> = ["z+", "z-", "x+", "y+"].iter().map(|n| proj(n)).collect();
        let proc = PreparationProcedure::Stochastic(
            Stochastic::with_targets(PureStateVector::z_plus(), rotations, &targets).unwrap(),
        );
        let outs = proc.prepare_all(&w).unwrap();
        let oracle = partial_trace(w.joint().matrix(), 2, 2, Keep::Environment).unwrap();
        for o in &outs {
            assert!(o.environment_state().matrix().approx_eq(&oracle, 1e-12));
        }
        assert!(environment_dependence(&outs).unwrap() < 1e-12);
    }

    #[test]
    fn stochastic_target_mismatch_is_rejected() {
        let rotations = vec![KrausChannel::unitary(ComplexMatrix::hadamard()).unwrap()];
        let err = Stochastic::with_targets(PureStateVector::z_plus(), rotations, &[proj("y+")]);
        assert!(matches!(err, Err(Error::ContractViolation(_))));
    }

    #[test]
    fn rotation_between_hits_target() {
        let mut rng = seeded_rng(10);
        for _ in 0..20 {
            let (a, b) = (random_pure(3, &mut rng), random_pure(3, &mut rng));
            let u = rotation_between(&a, &b).unwrap();
            assert!(u.is_unitary(1e-10));
            let img = pure_density(&a).matrix().conjugate_by(&u);
            assert!(img.approx_eq(pure_density(&b).matrix(), 1e-10));
        }
    }

    #[test]
    fn multipin_examples() {
        let bell = bell_phi_plus();
        let phi = PureStateVector::y_plus();
        let same = prepare_multipin(&bell, &phi, &KrausChannel::identity(2)).unwrap();
        assert_eq!(same, prepare_pin(&bell, &phi).unwrap());

        let rho = product_state(&proj("x+"), &proj("z+"));
        let x = KrausChannel::unitary(ComplexMatrix::pauli_x()).unwrap();
        let a =
            prepare_multipin(&rho, &PureStateVector::z_plus(), &KrausChannel::identity(2)).unwrap();
        let b = prepare_multipin(&rho, &PureStateVector::z_minus(), &x).unwrap();
        assert!(a
            .environment_state()
            .matrix()
            .approx_eq(proj("z+").matrix(), 1e-12));
        assert!(b
            .environment_state()
            .matrix()
            .approx_eq(proj("z-").matrix(), 1e-12));
        assert!((environment_dependence(&[a, b]).unwrap() - 1.0).abs() < 1e-10);

        let w = werner_family(0.5).unwrap();
        let dep = KrausChannel::depolarizing(1.0).unwrap();
        let out = prepare_multipin(&w, &PureStateVector::z_plus(), &dep).unwrap();
        assert!(out
            .environment_state()
            .matrix()
            .approx_eq(&ComplexMatrix::identity(2).scale_real(0.5), 1e-12));

        assert!(matches!(
            prepare_multipin(&w, &phi, &KrausChannel::identity(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn environment_dependence_needs_two() {
        let out = prepare_pin(&bell_phi_plus(), &PureStateVector::z_plus()).unwrap();
        assert!(matches!(
            environment_dependence(&[out]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn projective_on_products_is_environment_neutral() {
        let mut rng = seeded_rng(90);
        let proc = PreparationProcedure::Projective(
            Projective::from_states(
                &["z+", "z-", "x+", "y+"].map(|n| PureStateVector::from_name(n).unwrap()),
            )
            .unwrap(),
        );
        for _ in 0..20 {
            let rho = product_state(&random_density(2, &mut rng), &random_density(2, &mut rng));
            let outs = proc.prepare_all(&rho).unwrap();
            assert!(environment_dependence(&outs).unwrap() < 1e-12);
        }
    }
}
