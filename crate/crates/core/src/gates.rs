//! The operation zoo: rotations, controlled-phase gates, measurement-reset
//! instruments, the 16 single-qubit basis operations and the 257-element
//! two-qubit decomposition basis.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pauli::{pauli_matrix, CMatrix, Pauli, PauliString};
use crate::ptm::{ptm_of_kraus, ptm_of_unitary, vectorize_state, PtmMap, PtmObservable, PtmState, VALIDATION_TOL};

/// An ideal unitary gate.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    /// `P_theta = exp(-i theta/2 P)`.
    Rotation { axis: Pauli, angle: f64 },
    /// `C_phi = diag(1, 1, 1, e^{i phi})`, control on the first qubit.
    ControlledPhase { phi: f64 },
    PauliGate(PauliString),
    Identity { n_qubits: usize },
}

fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl GateSpec {
    pub fn rotation(axis: Pauli, angle: f64) -> Self {
        GateSpec::Rotation { axis, angle }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            GateSpec::Rotation { .. } => 1,
            GateSpec::ControlledPhase { .. } => 2,
            GateSpec::PauliGate(p) => p.n_qubits(),
            GateSpec::Identity { n_qubits } => *n_qubits,
        }
    }

    pub fn unitary(&self) -> CMatrix {
        match self {
            GateSpec::Rotation { axis, angle } => {
                CMatrix::identity(2, 2) * cplx((angle / 2.0).cos(), 0.0)
                    - axis.matrix() * cplx(0.0, (angle / 2.0).sin())
            }
            GateSpec::ControlledPhase { phi } => {
                let mut m = CMatrix::identity(4, 4);
                m[(3, 3)] = Complex64::from_polar(1.0, *phi);
                m
            }
            GateSpec::PauliGate(p) => pauli_matrix(p),
            GateSpec::Identity { n_qubits } => {
                let d = 1 << n_qubits;
                CMatrix::identity(d, d)
            }
        }
    }

    pub fn ptm(&self) -> PtmMap {
        match self {
            GateSpec::Identity { n_qubits } => PtmMap::identity(*n_qubits),
            GateSpec::PauliGate(p) => pauli_gate_ptm(p),
            _ => ptm_of_unitary(&self.unitary()).expect("gate matrices are unitary"),
        }
    }

    /// Whether this is a non-trivial single-qubit gate (subject to single-qubit noise).
    pub fn is_single_qubit(&self) -> bool {
        self.n_qubits() == 1 && !matches!(self, GateSpec::Identity { .. })
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateSpec::Rotation { axis, angle } => write!(f, "{axis}_{}", angle_label(*angle)),
            GateSpec::ControlledPhase { phi } => write!(f, "C_{}", angle_label(*phi)),
            GateSpec::PauliGate(p) => write!(f, "{p}"),
            GateSpec::Identity { .. } => write!(f, "I"),
        }
    }
}

fn angle_label(angle: f64) -> String {
    let ratio = angle / PI;
    for (num, text) in [
        (1.0, "pi"),
        (-1.0, "-pi"),
        (0.5, "pi/2"),
        (-0.5, "-pi/2"),
        (0.25, "pi/4"),
        (0.75, "3pi/4"),
        (0.0, "0"),
    ] {
        if (ratio - num).abs() < 1e-12 {
            return text.to_string();
        }
    }
    format!("{angle:.6}")
}

/// Diagonal +-1 PTM of a Pauli gate: `sigma_i` is kept or negated depending on commutation.
pub fn pauli_gate_ptm(p: &PauliString) -> PtmMap {
    let diag: Vec<f64> = PauliString::basis(p.n_qubits())
        .iter()
        .map(|s| {
            let anticommuting = s
                .letters()
                .iter()
                .zip(p.letters())
                .filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b)
                .count();
            if anticommuting % 2 == 0 { 1.0 } else { -1.0 }
        })
        .collect();
    PtmMap::diagonal(p.n_qubits(), &diag).expect("dimension matches")
}

/// A normalized single-qubit pure state used as a reset target.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetTarget {
    pub label: String,
    amplitudes: [Complex64; 2],
}

impl ResetTarget {
    pub fn new(label: impl Into<String>, a0: Complex64, a1: Complex64) -> Result<Self> {
        let norm = a0.norm_sqr() + a1.norm_sqr();
        if (norm - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::validation(format!("reset target has norm^2 {norm}, expected 1")));
        }
        Ok(ResetTarget { label: label.into(), amplitudes: [a0, a1] })
    }

    fn table(label: &str, a0: Complex64, a1: Complex64) -> Self {
        ResetTarget { label: label.to_string(), amplitudes: [a0, a1] }
    }

    pub fn zero() -> Self {
        Self::table("|0>", cplx(1.0, 0.0), cplx(0.0, 0.0))
    }

    pub fn one() -> Self {
        Self::table("|1>", cplx(0.0, 0.0), cplx(1.0, 0.0))
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::table("|0+1>", cplx(h, 0.0), cplx(h, 0.0))
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::table("|0-1>", cplx(h, 0.0), cplx(-h, 0.0))
    }

    pub fn plus_i() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::table("|0+i1>", cplx(h, 0.0), cplx(0.0, h))
    }

    pub fn minus_i() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::table("|0-i1>", cplx(h, 0.0), cplx(0.0, -h))
    }

    pub fn density_matrix(&self) -> CMatrix {
        let v = CMatrix::from_column_slice(2, 1, &self.amplitudes);
        &v * v.adjoint()
    }

    pub fn ptm_state(&self) -> PtmState {
        vectorize_state(&self.density_matrix()).expect("normalized pure state")
    }
}

/// Mid-circuit measurement of `P` (outcomes 0/1 for the projector `(I+P)/2`)
/// followed by a reset to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureResetSpec {
    pub axis: Pauli,
    pub target: ResetTarget,
}

impl MeasureResetSpec {
    pub fn new(axis: Pauli, target: ResetTarget) -> Result<Self> {
        if axis == Pauli::I {
            return Err(Error::validation("measure-reset axis must be X, Y or Z"));
        }
        Ok(MeasureResetSpec { axis, target })
    }

    fn projector(&self, sign: f64) -> CMatrix {
        (Pauli::I.matrix() + self.axis.matrix() * cplx(sign, 0.0)) * cplx(0.5, 0.0)
    }

    /// Ideal instrument: outcome 1 for the `+1` eigenspace, 0 for the `-1` one.
    pub fn instrument(&self) -> Instrument {
        let reset = reset_map(&self.target);
        let branch = |sign: f64| {
            let proj = ptm_of_kraus(&[self.projector(sign)]).expect("projector is a contraction");
            reset.compose(&proj).expect("single-qubit maps")
        };
        Instrument { branches: vec![(0.0, branch(-1.0)), (1.0, branch(1.0))] }
    }
}

impl fmt::Display for MeasureResetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M_(I+{})/2,R_{}", self.axis, self.target.label)
    }
}

/// Replace-with-`psi` channel `rho -> Tr(rho) |psi><psi|`.
fn reset_map(target: &ResetTarget) -> PtmMap {
    PtmMap::outer(&target.ptm_state(), &PtmObservable::pauli(&PauliString::identity(1)))
        .expect("single-qubit vectors")
}

/// Outcome-labelled completely positive branches that sum to a TP map.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    pub branches: Vec<(f64, PtmMap)>,
}

impl Instrument {
    pub fn new(branches: Vec<(f64, PtmMap)>) -> Result<Self> {
        let inst = Instrument { branches };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .branches
            .first()
            .ok_or_else(|| Error::validation("instrument has no branches"))?;
        let mut total = PtmMap::zeros(first.1.n_qubits());
        for (_, b) in &self.branches {
            if !b.is_completely_positive(VALIDATION_TOL) {
                return Err(Error::validation("instrument branch is not completely positive"));
            }
            total = total.add(b)?;
        }
        if !total.is_trace_preserving(VALIDATION_TOL) {
            return Err(Error::validation("instrument branches do not sum to a TP map"));
        }
        Ok(())
    }

    /// `sum_k value_k * branch_k`, the map seen by an outcome-weighted estimator.
    pub fn effective_map(&self) -> PtmMap {
        let n = self.branches[0].1.n_qubits();
        self.branches
            .iter()
            .fold(PtmMap::zeros(n), |acc, (v, b)| acc.add(&b.scaled(*v)).expect("same size"))
    }

    /// Joint instrument on two registers; outcome values multiply.
    pub fn tensor(&self, other: &Instrument) -> Instrument {
        let branches = self
            .branches
            .iter()
            .flat_map(|(va, a)| other.branches.iter().map(move |(vb, b)| (va * vb, a.tensor(b))))
            .collect();
        Instrument { branches }
    }
}

/// One Pauli-frame choice of a twirled gate: `recovery . gate . input`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwirlPair {
    pub probability: f64,
    pub input: PauliString,
    pub recovery: PauliString,
}

/// Element of an executable recipe. Qubit indices are local to the op's register.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Gate { gate: GateSpec, qubits: Vec<usize> },
    MeasureReset { spec: MeasureResetSpec, qubit: usize },
    /// Controlled-phase gate sandwiched by a randomly drawn Pauli pair.
    TwirledGate { gate: GateSpec, pairs: Vec<TwirlPair> },
}

impl Step {
    fn shift(&self, offset: usize) -> Step {
        match self {
            Step::Gate { gate, qubits } => Step::Gate {
                gate: gate.clone(),
                qubits: qubits.iter().map(|q| q + offset).collect(),
            },
            Step::MeasureReset { spec, qubit } => Step::MeasureReset { spec: spec.clone(), qubit: qubit + offset },
            Step::TwirledGate { .. } => self.clone(),
        }
    }
}

/// A basis operation: its ideal (possibly trace-decreasing) PTM and how to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveOp {
    pub number: usize,
    pub label: String,
    pub ptm: PtmMap,
    pub realization: Vec<Step>,
}

impl EffectiveOp {
    pub fn n_qubits(&self) -> usize {
        self.ptm.n_qubits()
    }

    /// Gate-only op.
    pub fn from_gates(number: usize, gates: Vec<GateSpec>) -> Result<Self> {
        let first = gates.first().ok_or_else(|| Error::validation("empty gate sequence"))?;
        let n = first.n_qubits();
        let mut ptm = PtmMap::identity(n);
        for g in &gates {
            ptm = g.ptm().compose(&ptm)?;
        }
        let label = gates.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",");
        let realization = gates
            .into_iter()
            .map(|gate| {
                let qubits = (0..gate.n_qubits()).collect();
                Step::Gate { gate, qubits }
            })
            .collect();
        Ok(EffectiveOp { number, label, ptm, realization })
    }

    /// Ideal PTM reconstructed from the recipe by outcome-weighting instrument branches.
    pub fn realized_ptm(&self) -> Result<PtmMap> {
        let n = self.n_qubits();
        let mut acc = PtmMap::identity(n);
        for step in &self.realization {
            let m = match step {
                Step::Gate { gate, qubits } => embed_gate(&gate.ptm(), qubits, n)?,
                Step::MeasureReset { spec, qubit } => spec.instrument().effective_map().embed(n, *qubit)?,
                Step::TwirledGate { gate, pairs } => twirled_ptm(&gate.ptm(), pairs, pauli_gate_ptm)?,
            };
            acc = m.compose(&acc)?;
        }
        Ok(acc)
    }
}

/// `sum p [recovery] G [input]` with a caller-supplied PTM for each Pauli layer.
pub fn twirled_ptm(
    gate: &PtmMap,
    pairs: &[TwirlPair],
    pauli_layer: impl Fn(&PauliString) -> PtmMap,
) -> Result<PtmMap> {
    let mut acc = PtmMap::zeros(gate.n_qubits());
    for pair in pairs {
        let term = pauli_layer(&pair.recovery).compose(&gate.compose(&pauli_layer(&pair.input))?)?;
        acc = acc.add(&term.scaled(pair.probability))?;
    }
    Ok(acc)
}

pub(crate) fn embed_gate(ptm: &PtmMap, qubits: &[usize], n_qubits: usize) -> Result<PtmMap> {
    match (ptm.n_qubits(), qubits) {
        (k, _) if k == n_qubits && qubits.iter().enumerate().all(|(i, &q)| i == q) => Ok(ptm.clone()),
        (1, [q]) => ptm.embed(n_qubits, *q),
        _ => Err(Error::validation(format!(
            "cannot place a {}-qubit gate on qubits {qubits:?} of {n_qubits}",
            ptm.n_qubits()
        ))),
    }
}

/// Measure `axis` and reset to `psi`; effective PTM `|psi>> <<(I+P)/2|`.
pub fn measure_reset_map(axis: Pauli, psi: ResetTarget) -> Result<EffectiveOp> {
    let spec = MeasureResetSpec::new(axis, psi)?;
    let effect = PtmObservable::from_vector(
        1,
        DVector::from_fn(4, |i, _| match i {
            0 => 0.5,
            i if i == axis.index() => 0.5,
            _ => 0.0,
        }),
    );
    let ptm = PtmMap::outer(&spec.target.ptm_state(), &effect)?;
    Ok(EffectiveOp {
        number: 0,
        label: spec.to_string(),
        ptm,
        realization: vec![Step::MeasureReset { spec, qubit: 0 }],
    })
}

/// Single-qubit basis operations 1-16, composites applied left to right.
pub fn basis_operations_1q() -> Vec<EffectiveOp> {
    use Pauli::{X, Y, Z};
    let r = GateSpec::rotation;
    let gate_seqs: Vec<Vec<GateSpec>> = vec![
        vec![GateSpec::Identity { n_qubits: 1 }],
        vec![r(X, PI)],
        vec![r(Y, PI)],
        vec![r(Z, PI)],
        vec![r(X, PI / 2.0)],
        vec![r(Y, PI / 2.0)],
        vec![r(Z, PI / 2.0)],
        vec![r(X, PI), r(Z, PI / 2.0)],
        vec![r(X, PI), r(Y, -PI / 2.0)],
        vec![r(Y, PI), r(X, PI / 2.0)],
    ];
    let resets = [
        (X, ResetTarget::plus()),
        (X, ResetTarget::minus()),
        (Y, ResetTarget::plus_i()),
        (Y, ResetTarget::minus_i()),
        (Z, ResetTarget::zero()),
        (Z, ResetTarget::one()),
    ];
    let mut ops: Vec<EffectiveOp> = gate_seqs
        .into_iter()
        .enumerate()
        .map(|(i, seq)| EffectiveOp::from_gates(i + 1, seq).expect("fixed table"))
        .collect();
    for (k, (axis, target)) in resets.into_iter().enumerate() {
        let mut op = measure_reset_map(axis, target).expect("fixed table");
        op.number = 11 + k;
        ops.push(op);
    }
    ops
}

/// Tensor product of two single-qubit ops, first acting on qubit 0.
pub fn tensor_ops(number: usize, a: &EffectiveOp, b: &EffectiveOp) -> EffectiveOp {
    let mut realization: Vec<Step> = a.realization.clone();
    realization.extend(b.realization.iter().map(|s| s.shift(1)));
    EffectiveOp {
        number,
        label: format!("{} | {}", a.label, b.label),
        ptm: a.ptm.tensor(&b.ptm),
        realization,
    }
}

/// The 257-element two-qubit basis: pair `(i, j)` sits at `16 (i-1) + j`, and
/// `twirled_gate` is appended as number 257.
pub fn basis_operations_2q(twirled_gate: EffectiveOp) -> Result<Vec<EffectiveOp>> {
    if twirled_gate.n_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: twirled_gate.n_qubits() });
    }
    let single = basis_operations_1q();
    let mut ops = Vec::with_capacity(257);
    for a in &single {
        for b in &single {
            ops.push(tensor_ops(16 * (a.number - 1) + b.number, a, b));
        }
    }
    let mut last = twirled_gate;
    last.number = 257;
    ops.push(last);
    Ok(ops)
}

/// Preparation labels, in the column order of the preparation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Prep {
    Zero,
    One,
    Plus,
    MinusI,
}

impl Prep {
    pub const ALL: [Prep; 4] = [Prep::Zero, Prep::One, Prep::Plus, Prep::MinusI];

    pub fn target(self) -> ResetTarget {
        match self {
            Prep::Zero => ResetTarget::zero(),
            Prep::One => ResetTarget::one(),
            Prep::Plus => ResetTarget::plus(),
            Prep::MinusI => ResetTarget::minus_i(),
        }
    }

    pub fn ptm_state(self) -> PtmState {
        self.target().ptm_state()
    }
}

/// The four ideal preparations `|0>, |1>, |0+1>, |0-i1>`.
pub fn preparation_states_1q() -> [PtmState; 4] {
    Prep::ALL.map(Prep::ptm_state)
}

/// Columns are the ideal preparations of `preparation_states_1q`, tensored `n` times.
pub fn preparation_matrix(n_qubits: usize) -> DMatrix<f64> {
    let states = preparation_states_1q();
    let mut a = DMatrix::zeros(4, 4);
    for (j, s) in states.iter().enumerate() {
        a.set_column(j, s.entries());
    }
    (1..n_qubits).fold(a.clone(), |acc, _| acc.kronecker(&a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ptm::PtmObservable;

    fn rank(vectors: &[DVector<f64>]) -> usize {
        let m = DMatrix::from_columns(vectors);
        let svd = m.svd(false, false);
        let smax = svd.singular_values.max();
        svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count()
    }

    #[test]
    fn controlled_phase_limits() {
        let c0 = GateSpec::ControlledPhase { phi: 0.0 }.ptm();
        assert!(c0.max_abs_diff(&PtmMap::identity(2)) < 1e-12);
        let cz = {
            let mut m = CMatrix::identity(4, 4);
            m[(3, 3)] = cplx(-1.0, 0.0);
            ptm_of_unitary(&m).unwrap()
        };
        assert!(GateSpec::ControlledPhase { phi: PI }.ptm().max_abs_diff(&cz) < 1e-12);
        for phi in [0.3, PI / 2.0, 2.0] {
            let a = GateSpec::ControlledPhase { phi }.ptm();
            let b = GateSpec::ControlledPhase { phi: -phi }.ptm();
            assert!(a.compose(&b).unwrap().max_abs_diff(&PtmMap::identity(2)) < 1e-12);
            assert!(a.is_orthogonal(1e-12));
        }
    }

    #[test]
    fn pauli_gate_ptm_matches_unitary_construction() {
        for p in PauliString::basis(2) {
            let direct = pauli_gate_ptm(&p);
            let via_unitary = ptm_of_unitary(&pauli_matrix(&p)).unwrap();
            assert!(direct.max_abs_diff(&via_unitary) < 1e-12, "{p}");
        }
    }

    #[test]
    fn measure_reset_examples() {
        let op = measure_reset_map(Pauli::Z, ResetTarget::zero()).unwrap();
        let col = PtmState::from_entries(1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let row = PtmObservable::from_entries(1, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(op.ptm.max_abs_diff(&PtmMap::outer(&col, &row).unwrap()) < 1e-12);

        let op = measure_reset_map(Pauli::X, ResetTarget::plus()).unwrap();
        let plus = ResetTarget::plus().ptm_state();
        let out = op.ptm.apply(&plus).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-12);
        assert!((out.entries() - plus.entries()).amax() < 1e-12);

        let op = measure_reset_map(Pauli::Z, ResetTarget::one()).unwrap();
        let mixed = PtmState::from_entries(1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = op.ptm.apply(&mixed).unwrap();
        let expected = ResetTarget::one().ptm_state().entries() * 0.5;
        assert!((out.entries() - expected).amax() < 1e-12);

        let bad = ResetTarget::new("bad", cplx(1.0, 0.0), cplx(1.0, 0.0));
        assert!(matches!(bad, Err(Error::Validation(_))));
    }

    #[test]
    fn instruments_are_valid_and_match_effective_ptm() {
        for op in basis_operations_1q().iter().skip(10) {
            let Step::MeasureReset { spec, .. } = &op.realization[0] else { panic!() };
            let inst = spec.instrument();
            inst.validate().unwrap();
            assert!(inst.effective_map().max_abs_diff(&op.ptm) < 1e-12);
            assert_eq!(op.ptm.matrix().rank(1e-10), 1);
        }
    }

    #[test]
    fn table_of_single_qubit_ops() {
        let ops = basis_operations_1q();
        assert_eq!(ops.len(), 16);
        assert_eq!(ops[0].ptm, PtmMap::identity(1));
        for op in &ops[..10] {
            assert!(op.ptm.is_orthogonal(1e-12), "op {}", op.number);
        }
        let expected9 = GateSpec::rotation(Pauli::Y, -PI / 2.0)
            .ptm()
            .compose(&GateSpec::rotation(Pauli::X, PI).ptm())
            .unwrap();
        assert!(ops[8].ptm.max_abs_diff(&expected9) < 1e-12);
        for op in &ops {
            assert!(op.realized_ptm().unwrap().max_abs_diff(&op.ptm) < 1e-12);
        }
        let vecs: Vec<_> = ops.iter().map(|o| o.ptm.vectorize()).collect();
        assert_eq!(rank(&vecs), 16);
    }

    fn twirled_ideal(phi: f64) -> EffectiveOp {
        let gate = GateSpec::ControlledPhase { phi };
        EffectiveOp {
            number: 257,
            label: gate.to_string(),
            ptm: gate.ptm(),
            realization: vec![Step::Gate { gate, qubits: vec![0, 1] }],
        }
    }

    #[test]
    fn two_qubit_basis_layout_and_rank() {
        let ops = basis_operations_2q(twirled_ideal(PI)).unwrap();
        assert_eq!(ops.len(), 257);
        assert_eq!(ops[0].ptm, PtmMap::identity(2));
        let single = basis_operations_1q();
        let op = &ops[16 * 14 + 14];
        assert_eq!(op.number, 16 * 14 + 15);
        assert!(op.ptm.max_abs_diff(&single[14].ptm.tensor(&single[14].ptm)) < 1e-15);
        assert_eq!(op.ptm.matrix().rank(1e-10), 1);
        for op in ops.iter().step_by(37) {
            assert!(op.realized_ptm().unwrap().max_abs_diff(&op.ptm) < 1e-12);
        }
        let vecs: Vec<_> = ops.iter().map(|o| o.ptm.vectorize()).collect();
        assert_eq!(rank(&vecs), 256);
        assert!(basis_operations_2q(basis_operations_1q().remove(0)).is_err());
    }

    #[test]
    fn preparation_matrix_matches_table() {
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, 1.0, 1.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            1.0, -1.0, 0.0, 0.0,
        ]);
        let a = preparation_matrix(1);
        assert!((&a - &expected).amax() < 1e-12);
        assert!((a.determinant() - 2.0).abs() < 1e-12);
        assert_eq!(preparation_matrix(2).nrows(), 16);
    }
}
