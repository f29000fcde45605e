//! Repetition-code circuit construction and exact state-vector simulation.
//!
//! A distance-`d` code occupies a line of `2d - 1` qubits (code and ancilla
//! qubits alternating) plus one reference qubit `s` that stores the same bit
//! value without any encoding. Noise is coherent: partial rotations about the
//! X axis, with the angle fixed by the state the qubit was prepared in.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Hard limit on register size for exact simulation.
pub const MAX_QUBITS: usize = 20;

/// Role of a line position in the code layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Code(usize),
    Ancilla(usize),
    Reference,
}

/// Geometry of a distance-`d` repetition code on a line of qubits.
///
/// Positions `0..2d-2` alternate `code(0), ancilla(0), code(1), ...`,
/// ending in `code(d-1)` at position `2d-2`. Position `2d-1` is the
/// reference qubit `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeLayout {
    d: usize,
}

impl CodeLayout {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "code distance must be at least 2, got {d}"
            )));
        }
        Ok(CodeLayout { d })
    }

    pub fn distance(&self) -> usize {
        self.d
    }

    /// Total register size: `2d - 1` line qubits plus qubit `s`.
    pub fn n_total(&self) -> usize {
        2 * self.d
    }

    pub fn role(&self, position: usize) -> Role {
        debug_assert!(position < self.n_total());
        if position == 2 * self.d - 1 {
            Role::Reference
        } else if position % 2 == 0 {
            Role::Code(position / 2)
        } else {
            Role::Ancilla(position / 2)
        }
    }

    /// Line position of code qubit `i`.
    pub fn code_position(&self, i: usize) -> usize {
        debug_assert!(i < self.d);
        2 * i
    }

    /// Line position of ancilla qubit `i`.
    pub fn ancilla_position(&self, i: usize) -> usize {
        debug_assert!(i < self.d - 1);
        2 * i + 1
    }

    pub fn reference_position(&self) -> usize {
        2 * self.d - 1
    }

    pub fn code_positions(&self) -> impl Iterator<Item = usize> {
        (0..self.d).map(|i| 2 * i)
    }

    pub fn ancilla_positions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.d - 1).map(|i| 2 * i + 1)
    }

    /// The noiseless measurement outcome for encoded value `encoded`:
    /// code qubits and `s` read the encoded bit, ancillas read 0.
    pub fn ideal_codeword(&self, encoded: bool) -> String {
        (0..self.n_total())
            .map(|pos| match self.role(pos) {
                Role::Code(_) | Role::Reference => {
                    if encoded {
                        '1'
                    } else {
                        '0'
                    }
                }
                Role::Ancilla(_) => '0',
            })
            .collect()
    }
}

/// Where in the circuit noise rotations are inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InjectionPoint {
    AfterEncoding,
    BetweenCnotLayers,
    BeforeMeasurement,
}

impl InjectionPoint {
    pub const ALL: [InjectionPoint; 3] = [
        InjectionPoint::AfterEncoding,
        InjectionPoint::BetweenCnotLayers,
        InjectionPoint::BeforeMeasurement,
    ];
}

impl std::str::FromStr for InjectionPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "after_encoding" => Ok(InjectionPoint::AfterEncoding),
            "between_cnot_layers" => Ok(InjectionPoint::BetweenCnotLayers),
            "before_measurement" => Ok(InjectionPoint::BeforeMeasurement),
            other => Err(Error::InvalidArgument(format!(
                "unknown injection point '{other}'"
            ))),
        }
    }
}

/// Coherent noise model: one X-rotation angle per prepared state, applied to
/// every qubit at each scheduled injection point. A qubit's angle is fixed by
/// its state at the encoding step; ancillas always start in |0> and so always
/// rotate by `theta_zero`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub theta_zero: f64,
    pub theta_one: f64,
    pub injection_points: BTreeSet<InjectionPoint>,
}

impl NoiseModel {
    /// Angles pi/20 for prepared |0>, pi/10 for prepared |1>, noise at all
    /// three injection points. These reproduce the bias of the real device.
    pub fn default_biased() -> Self {
        NoiseModel {
            theta_zero: PI / 20.0,
            theta_one: PI / 10.0,
            injection_points: InjectionPoint::ALL.iter().copied().collect(),
        }
    }

    pub fn noiseless() -> Self {
        NoiseModel {
            theta_zero: 0.0,
            theta_one: 0.0,
            injection_points: BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, theta) in [("theta_zero", self.theta_zero), ("theta_one", self.theta_one)] {
            if !(0.0..=PI).contains(&theta) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, pi], got {theta}"
                )));
            }
        }
        Ok(())
    }
}

/// A single gate in the circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X(usize),
    Rx(usize, f64),
    Cnot { control: usize, target: usize },
    MeasureAll,
}

/// An ordered gate list over a register of `n_qubits`, ending in a single
/// terminal measurement of all qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl GateSequence {
    fn validate(&self) -> Result<()> {
        match self.gates.last() {
            Some(Gate::MeasureAll) => {}
            _ => {
                return Err(Error::MalformedSequence(
                    "sequence must end in MEASURE_ALL".into(),
                ))
            }
        }
        for (i, gate) in self.gates.iter().enumerate() {
            match *gate {
                Gate::X(q) | Gate::Rx(q, _) => {
                    if q >= self.n_qubits {
                        return Err(Error::MalformedSequence(format!(
                            "qubit index {q} out of range at gate {i}"
                        )));
                    }
                }
                Gate::Cnot { control, target } => {
                    if control == target {
                        return Err(Error::MalformedSequence(format!(
                            "CNOT control equals target at gate {i}"
                        )));
                    }
                    if control >= self.n_qubits || target >= self.n_qubits {
                        return Err(Error::MalformedSequence(format!(
                            "qubit index out of range at gate {i}"
                        )));
                    }
                }
                Gate::MeasureAll => {
                    if i + 1 != self.gates.len() {
                        return Err(Error::MalformedSequence(
                            "MEASURE_ALL must be the final gate".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds the full circuit for one encoded bit value:
/// encoding X gates, scheduled noise rounds, the two CNOT layers and a
/// terminal measurement.
pub fn build_circuit(layout: &CodeLayout, encoded: bool, noise: &NoiseModel) -> Result<GateSequence> {
    noise.validate()?;
    let d = layout.distance();
    let n = layout.n_total();
    let mut gates = Vec::new();

    // Encoding: X on every code qubit and on s when storing 1.
    if encoded {
        for pos in layout.code_positions() {
            gates.push(Gate::X(pos));
        }
        gates.push(Gate::X(layout.reference_position()));
    }

    // A qubit's noise angle is fixed by its prepared state.
    let angle_for = |pos: usize| -> f64 {
        match layout.role(pos) {
            Role::Code(_) | Role::Reference if encoded => noise.theta_one,
            _ => noise.theta_zero,
        }
    };
    let noise_round = |gates: &mut Vec<Gate>, point: InjectionPoint| {
        if noise.injection_points.contains(&point) {
            for pos in 0..n {
                gates.push(Gate::Rx(pos, angle_for(pos)));
            }
        }
    };

    noise_round(&mut gates, InjectionPoint::AfterEncoding);

    // Layer A: each ancilla targeted by its left neighbour.
    for i in 0..d - 1 {
        gates.push(Gate::Cnot {
            control: layout.code_position(i),
            target: layout.ancilla_position(i),
        });
    }

    noise_round(&mut gates, InjectionPoint::BetweenCnotLayers);

    // Layer B: each ancilla targeted by its right neighbour.
    for i in 0..d - 1 {
        gates.push(Gate::Cnot {
            control: layout.code_position(i + 1),
            target: layout.ancilla_position(i),
        });
    }

    noise_round(&mut gates, InjectionPoint::BeforeMeasurement);
    gates.push(Gate::MeasureAll);

    Ok(GateSequence {
        n_qubits: n,
        gates,
    })
}

/// Dense state vector over `n` qubits. Qubit `q` corresponds to bit `q` of
/// the amplitude index, so the outcome string character at index `i` is the
/// measured value of qubit `i`.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub n: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// All-zeros computational basis state.
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::ResourceGuard {
                needed: n,
                limit: MAX_QUBITS,
            });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amplitudes })
    }

    pub fn apply_x(&mut self, q: usize) {
        let mask = 1usize << q;
        for idx in 0..self.amplitudes.len() {
            if idx & mask == 0 {
                self.amplitudes.swap(idx, idx | mask);
            }
        }
    }

    pub fn apply_rx(&mut self, q: usize, theta: f64) {
        let c = Complex64::new((theta / 2.0).cos(), 0.0);
        let s = Complex64::new(0.0, -(theta / 2.0).sin());
        let mask = 1usize << q;
        for idx in 0..self.amplitudes.len() {
            if idx & mask == 0 {
                let a0 = self.amplitudes[idx];
                let a1 = self.amplitudes[idx | mask];
                self.amplitudes[idx] = c * a0 + s * a1;
                self.amplitudes[idx | mask] = s * a0 + c * a1;
            }
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for idx in 0..self.amplitudes.len() {
            if idx & cmask != 0 && idx & tmask == 0 {
                self.amplitudes.swap(idx, idx | tmask);
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule probability of every basis outcome.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Exact outcome distribution of a gate sequence: index `idx` holds the
/// probability of the outcome whose character `i` is bit `i` of `idx`.
pub fn simulate_exact(seq: &GateSequence) -> Result<Vec<f64>> {
    seq.validate()?;
    let mut state = StateVector::zero(seq.n_qubits)?;
    for gate in &seq.gates {
        match *gate {
            Gate::X(q) => state.apply_x(q),
            Gate::Rx(q, theta) => state.apply_rx(q, theta),
            Gate::Cnot { control, target } => state.apply_cnot(control, target),
            Gate::MeasureAll => {}
        }
    }
    let probs = state.probabilities();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Numerical(format!(
            "state norm drifted to {total} during simulation"
        )));
    }
    Ok(probs)
}

/// Renders an outcome index as a bit string: character `i` is the outcome of
/// line position `i`, with qubit `s` last.
pub fn outcome_string(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Draws one outcome index from a probability vector.
pub fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let mut u: f64 = rng.gen();
    for (idx, &p) in probs.iter().enumerate() {
        u -= p;
        if u <= 0.0 {
            return idx;
        }
    }
    probs.len() - 1
}

/// One measurement shot, deterministic for a fixed seed.
pub fn sample_outcome(seq: &GateSequence, rng_seed: u64) -> Result<String> {
    let probs = simulate_exact(seq)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(outcome_string(sample_index(&probs, &mut rng), seq.n_qubits))
}
