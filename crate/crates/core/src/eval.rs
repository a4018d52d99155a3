//! Small-step evaluation of programs over a state vector.
//!
//! A [`Configuration`] holds the kernel stack, the measurement stack, the
//! quantum state, and the qubit-position map. Exactly one of four rules
//! fires per step, selected by the head instruction of the top kernel
//! frame:
//!
//! * **StartKernel** — a nested kernel allocates a fresh qubit in |0> and
//!   pushes its body.
//! * **QuantumGate** — the lifted unitary is applied at the targets'
//!   positions.
//! * **EndDone** / **EndContinue** — an exhausted body measures the top
//!   qubit, drops it, pushes the outcome bit, and invokes the kernel's
//!   callback; a returned kernel continues execution in place.
//!
//! Evaluation is deterministic given a seed. Shots draw per-shot seeds from
//! the base seed so that multi-threaded shot execution cannot change
//! results.

use std::collections::{BTreeMap, VecDeque};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::gates::{GateSet, GateSetError};
use crate::ir::{self, CallbackRef, Instruction, Kernel, Program, QubitId};
use crate::runtime::{CallbackRegistry, MeasurementStack, Runtime, RuntimeError};
use crate::state::{StateError, StateVector};

/// Default step budget guarding unbounded callback recursion.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

#[derive(Clone, PartialEq, Debug, Error)]
pub enum EvalError {
    #[error("program targets gate set `{program}` but `{provided}` was supplied")]
    GateSetMismatch { program: String, provided: String },
    #[error(transparent)]
    GateSet(#[from] GateSetError),
    #[error("qubit `{0}` is not live")]
    UnboundQubit(String),
    #[error("qubit `{0}` is already allocated")]
    DuplicateQubit(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("step budget of {0} exceeded")]
    StepBudgetExceeded(u64),
    #[error("step on a final configuration")]
    AlreadyFinal,
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("bad noise model: {0}")]
    BadNoise(String),
}

/// Independent single-qubit Pauli noise after each gate, plus an optional
/// bit flip applied to each qubit immediately before its measurement.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct NoiseModel {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    pub p_mx: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), EvalError> {
        let probs = [self.p_x, self.p_y, self.p_z, self.p_mx];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(EvalError::BadNoise(
                "probabilities must lie in [0, 1]".to_string(),
            ));
        }
        if self.p_x + self.p_y + self.p_z > 1.0 {
            return Err(EvalError::BadNoise(
                "p_x + p_y + p_z must not exceed 1".to_string(),
            ));
        }
        Ok(())
    }

    fn has_gate_noise(&self) -> bool {
        self.p_x + self.p_y + self.p_z > 0.0
    }
}

/// Execution options shared by [`run`], [`run_shots`], and [`trace`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub noise: Option<NoiseModel>,
    pub max_steps: u64,
    /// Worker threads for [`run_shots`]; 1 keeps everything on the caller.
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            noise: None,
            max_steps: DEFAULT_MAX_STEPS,
            threads: 1,
        }
    }
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        RunOptions {
            seed,
            ..Default::default()
        }
    }
}

/// Source of uniform samples in [0, 1). Abstracted so tests can couple the
/// randomness of two runs.
pub trait UniformSource {
    fn next_unit(&mut self) -> f64;
}

impl<T: UniformSource + ?Sized> UniformSource for &mut T {
    fn next_unit(&mut self) -> f64 {
        (**self).next_unit()
    }
}

/// The default source: ChaCha12 drawing 53-bit uniforms.
pub struct ChaChaSource(ChaCha12Rng);

impl ChaChaSource {
    pub fn seeded(seed: u64) -> Self {
        ChaChaSource(ChaCha12Rng::seed_from_u64(seed))
    }
}

impl UniformSource for ChaChaSource {
    fn next_unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for shot `index` of a run seeded with `seed`.
pub fn shot_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

/// Which semantics rule a step fired.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rule {
    StartKernel,
    QuantumGate,
    EndDone,
    EndContinue,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::StartKernel => "StartKernel",
            Rule::QuantumGate => "QuantumGate",
            Rule::EndDone => "EndDone",
            Rule::EndContinue => "EndContinue",
        }
    }
}

/// Snapshot of one step. `mstack` and `qubits` reflect the post-step
/// configuration (head-first); `mstack_at_measure` additionally captures
/// the stack right after the measurement push, before the callback ran.
#[derive(Clone, PartialEq, Debug)]
pub struct StepRecord {
    pub rule: Rule,
    pub mstack: Vec<bool>,
    pub mstack_at_measure: Option<Vec<bool>>,
    pub qubits: Vec<QubitId>,
    pub callback: Option<String>,
    pub bit: Option<bool>,
    pub gate: Option<String>,
}

impl StepRecord {
    /// One JSON line with the fields `rule`, `mstack`, `qubits`,
    /// `callback`, `bit`.
    pub fn to_json_line(&self) -> String {
        let bits: String = self
            .mstack
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect();
        serde_json::json!({
            "rule": self.rule.name(),
            "mstack": bits,
            "qubits": self.qubits.iter().map(|q| q.name().to_string()).collect::<Vec<_>>(),
            "callback": self.callback,
            "bit": self.bit.map(|b| b as u8),
        })
        .to_string()
    }
}

struct Frame {
    rest: VecDeque<Instruction>,
    callback: CallbackRef,
}

impl Frame {
    fn from_kernel(kernel: &Kernel) -> Self {
        Frame {
            rest: kernel.body.iter().cloned().collect(),
            callback: kernel.callback.clone(),
        }
    }
}

/// Evaluator state: kernel stack, measurement stack, state vector, and
/// qubit-position map. Kernel-stack depth always equals the number of live
/// qubits, and the most recently allocated qubit sits at position `n - 1`.
pub struct Configuration {
    frames: Vec<Frame>,
    mstack: MeasurementStack,
    state: StateVector,
    qmap: Vec<(QubitId, usize)>,
}

impl Configuration {
    pub fn kernel_depth(&self) -> usize {
        self.frames.len()
    }

    pub fn mstack(&self) -> &MeasurementStack {
        &self.mstack
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Live qubits, most recently allocated first.
    pub fn qubits_head_first(&self) -> Vec<QubitId> {
        self.qmap.iter().rev().map(|(q, _)| q.clone()).collect()
    }

    /// The qubit-position map in allocation order (head last).
    pub fn qubit_positions(&self) -> &[(QubitId, usize)] {
        &self.qmap
    }

    pub fn qubit_count(&self) -> usize {
        self.qmap.len()
    }

    pub fn is_final(&self) -> bool {
        self.frames.is_empty()
    }

    fn position_of(&self, q: &QubitId) -> Option<usize> {
        self.qmap.iter().find(|(id, _)| id == q).map(|(_, p)| *p)
    }
}

/// The initial configuration for a program: one frame holding the root
/// kernel's body and callback, an empty measurement stack, the state |0>,
/// and the root qubit at position 0.
pub fn initial_config(program: &Program) -> Configuration {
    let mut state = StateVector::new();
    state.push_qubit();
    Configuration {
        frames: vec![Frame::from_kernel(&program.kernel)],
        mstack: MeasurementStack::new(),
        state,
        qmap: vec![(program.kernel.qubit.clone(), 0)],
    }
}

/// Drives one program run step by step.
pub struct Evaluator<'a> {
    gates: &'a GateSet,
    runtime: Runtime,
    noise: Option<NoiseModel>,
    rng: Box<dyn UniformSource + 'a>,
    config: Configuration,
    steps_taken: u64,
    max_steps: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        program: &Program,
        gates: &'a GateSet,
        registry: &CallbackRegistry,
        options: &RunOptions,
    ) -> Result<Self, EvalError> {
        Self::with_rng(
            program,
            gates,
            registry,
            options,
            Box::new(ChaChaSource::seeded(options.seed)),
        )
    }

    /// Like [`Evaluator::new`] but with a caller-supplied sample source.
    pub fn with_rng(
        program: &Program,
        gates: &'a GateSet,
        registry: &CallbackRegistry,
        options: &RunOptions,
        rng: Box<dyn UniformSource + 'a>,
    ) -> Result<Self, EvalError> {
        if program.gateset != gates.name {
            return Err(EvalError::GateSetMismatch {
                program: program.gateset.clone(),
                provided: gates.name.clone(),
            });
        }
        if let Some(noise) = &options.noise {
            noise.validate()?;
        }
        ir::reset_anonymous_ids();
        Ok(Evaluator {
            gates,
            runtime: registry.instantiate(),
            noise: options.noise,
            rng,
            config: initial_config(program),
            steps_taken: 0,
            max_steps: options.max_steps,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn is_final(&self) -> bool {
        self.config.is_final()
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Applies exactly one semantics rule.
    pub fn step(&mut self) -> Result<StepRecord, EvalError> {
        if self.config.is_final() {
            return Err(EvalError::AlreadyFinal);
        }
        if self.steps_taken >= self.max_steps {
            return Err(EvalError::StepBudgetExceeded(self.max_steps));
        }
        self.steps_taken += 1;

        let head = self
            .config
            .frames
            .last_mut()
            .expect("non-final configuration has a frame")
            .rest
            .pop_front();
        match head {
            Some(Instruction::Kernel(k)) => self.start_kernel(k),
            Some(Instruction::Gate(g)) => self.quantum_gate(g),
            None => self.end_of_kernel(),
        }
    }

    fn record(&self, rule: Rule) -> StepRecord {
        StepRecord {
            rule,
            mstack: self.config.mstack.bits_head_first(),
            mstack_at_measure: None,
            qubits: self.config.qubits_head_first(),
            callback: None,
            bit: None,
            gate: None,
        }
    }

    fn allocate(&mut self, kernel: &Kernel) -> Result<(), EvalError> {
        if self.config.position_of(&kernel.qubit).is_some() {
            return Err(EvalError::DuplicateQubit(kernel.qubit.name().to_string()));
        }
        self.config.state.push_qubit();
        let pos = self.config.state.qubit_count() - 1;
        self.config.qmap.push((kernel.qubit.clone(), pos));
        self.config.frames.push(Frame::from_kernel(kernel));
        Ok(())
    }

    fn start_kernel(&mut self, kernel: Kernel) -> Result<StepRecord, EvalError> {
        self.allocate(&kernel)?;
        Ok(self.record(Rule::StartKernel))
    }

    fn quantum_gate(&mut self, gate: crate::ir::GateApplication) -> Result<StepRecord, EvalError> {
        let def = self
            .gates
            .get(&gate.gate)
            .ok_or_else(|| GateSetError::UnknownGate {
                gateset: self.gates.name.clone(),
                gate: gate.gate.clone(),
            })?;
        let params: Vec<f64> = gate.params.iter().map(|p| p.value()).collect();
        let unitary = def.unitary(&params)?;
        let mut positions = Vec::with_capacity(gate.targets.len());
        for t in &gate.targets {
            positions.push(
                self.config
                    .position_of(t)
                    .ok_or_else(|| EvalError::UnboundQubit(t.name().to_string()))?,
            );
        }
        self.config.state.apply(&unitary, &positions)?;
        if let Some(noise) = self.noise {
            if noise.has_gate_noise() {
                self.apply_gate_noise(&positions, noise)?;
            }
        }
        let mut record = self.record(Rule::QuantumGate);
        record.gate = Some(gate.gate.clone());
        Ok(record)
    }

    fn apply_gate_noise(
        &mut self,
        positions: &[usize],
        noise: NoiseModel,
    ) -> Result<(), EvalError> {
        for &p in positions {
            let u = self.rng.next_unit();
            let m = if u < noise.p_x {
                Some(crate::gates::mat_x())
            } else if u < noise.p_x + noise.p_y {
                Some(crate::gates::mat_y())
            } else if u < noise.p_x + noise.p_y + noise.p_z {
                Some(crate::gates::mat_z())
            } else {
                None
            };
            if let Some(m) = m {
                self.config.state.apply(&m, &[p])?;
            }
        }
        Ok(())
    }

    fn end_of_kernel(&mut self) -> Result<StepRecord, EvalError> {
        let n = self.config.state.qubit_count();
        let (head_qubit, head_pos) = self.config.qmap.last().cloned().ok_or_else(|| {
            EvalError::InvariantViolation("no live qubit at end of kernel".into())
        })?;
        if head_pos != n - 1 {
            return Err(EvalError::InvariantViolation(format!(
                "qubit map head `{head_qubit}` at position {head_pos}, expected {}",
                n - 1
            )));
        }
        if let Some(noise) = self.noise {
            if noise.p_mx > 0.0 && self.rng.next_unit() < noise.p_mx {
                self.config.state.apply(&crate::gates::mat_x(), &[n - 1])?;
            }
        }
        let p1 = self.config.state.prob_one_top()?;
        let bit = self.rng.next_unit() < p1;
        self.config.state.collapse_drop_top(bit)?;
        self.config.qmap.pop();
        self.config.mstack.push(bit);
        let at_measure = self.config.mstack.bits_head_first();

        let frame = self
            .config
            .frames
            .pop()
            .expect("non-final configuration has a frame");
        let returned = self
            .runtime
            .invoke(&frame.callback, &mut self.config.mstack)?;
        let rule = match returned {
            Some(kernel) => {
                self.allocate(&kernel)?;
                Rule::EndContinue
            }
            None => Rule::EndDone,
        };
        let mut record = self.record(rule);
        record.mstack_at_measure = Some(at_measure);
        record.callback = Some(frame.callback.name.clone());
        record.bit = Some(bit);
        Ok(record)
    }

    /// Steps to a final configuration and returns the measurement stack,
    /// head-first.
    pub fn run_to_end(&mut self) -> Result<Vec<bool>, EvalError> {
        while !self.config.is_final() {
            self.step()?;
        }
        Ok(self.config.mstack.bits_head_first())
    }
}

/// Runs a program to completion. The result is the final measurement
/// stack, head (most recent bit) first. Deterministic given the seed.
pub fn run(
    program: &Program,
    gates: &GateSet,
    registry: &CallbackRegistry,
    options: &RunOptions,
) -> Result<Vec<bool>, EvalError> {
    Evaluator::new(program, gates, registry, options)?.run_to_end()
}

/// Runs a program and records every step.
pub fn trace(
    program: &Program,
    gates: &GateSet,
    registry: &CallbackRegistry,
    options: &RunOptions,
) -> Result<Vec<StepRecord>, EvalError> {
    let mut ev = Evaluator::new(program, gates, registry, options)?;
    let mut records = Vec::new();
    while !ev.is_final() {
        records.push(ev.step()?);
    }
    Ok(records)
}

/// Counts per output bitstring (measurement stack rendered head-first).
pub type Histogram = BTreeMap<String, u64>;

/// Runs `shots` independent shots. Shot `i` is seeded from
/// `(options.seed, i)`, so results do not depend on `options.threads`.
pub fn run_shots(
    program: &Program,
    gates: &GateSet,
    registry: &CallbackRegistry,
    shots: u64,
    options: &RunOptions,
) -> Result<Histogram, EvalError> {
    let shot = |index: u64| -> Result<String, EvalError> {
        let opts = RunOptions {
            seed: shot_seed(options.seed, index),
            ..options.clone()
        };
        let bits = run(program, gates, registry, &opts)?;
        Ok(bits.iter().map(|b| if *b { '1' } else { '0' }).collect())
    };

    if options.threads <= 1 {
        let mut histogram = Histogram::new();
        for i in 0..shots {
            *histogram.entry(shot(i)?).or_insert(0) += 1;
        }
        return Ok(histogram);
    }

    let workers = options.threads.min(shots.max(1) as usize);
    let chunk = shots.div_ceil(workers as u64);
    let results: Vec<Result<Histogram, EvalError>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers as u64 {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(shots);
            let shot = &shot;
            handles.push(scope.spawn(move || {
                let mut local = Histogram::new();
                for i in lo..hi {
                    *local.entry(shot(i)?).or_insert(0) += 1;
                }
                Ok(local)
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut histogram = Histogram::new();
    for r in results {
        for (k, v) in r? {
            *histogram.entry(k).or_insert(0) += v;
        }
    }
    Ok(histogram)
}
