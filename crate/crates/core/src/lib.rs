//! A compositional compiler and emulator for quantum kernel programs.
//!
//! Programs are trees of kernels: allocate one qubit, run gates and nested
//! kernels, measure, hand the bit to a named classical callback. All
//! classical logic lives behind those callbacks, so compiler passes
//! transform programs without ever looking at classical control flow.
//! Error correction and ISA translation are both ordinary passes, and a
//! wrapping mechanism adapts callbacks automatically: decoders restore the
//! measurement stack before the original callback runs, and any kernel the
//! callback returns is compiled through the same pipeline.
//!
//! The pieces:
//!
//! * [`ir`] — the kernel AST plus validation, free-qubit analysis, and
//!   renaming.
//! * [`text`] — parser and serializer for the `.qk` concrete syntax.
//! * [`gates`] — built-in gate sets, unitary construction, and
//!   equivalence up to global phase.
//! * [`runtime`] — the measurement stack and the callback registry.
//! * [`state`] — a state vector held as a product of sparse factors.
//! * [`eval`] — the four-rule small-step evaluator, shot execution, and
//!   tracing.
//! * [`compile`] — the pass framework and callback wrapping.
//! * [`passes`] — the six built-in passes.
//!
//! ```
//! use qk_core::{builtin_callbacks, builtin_gateset, parse, run_shots, RunOptions};
//!
//! let source = "\
//! @gateset cliffords
//! allocate q1:
//!   allocate q2:
//!     h q2
//!     cx q2 q1
//!   measure done
//! measure repeat_until_zero
//! ";
//! let program = parse(source).unwrap().resolve(None).unwrap();
//! let gates = builtin_gateset(&program.gateset).unwrap();
//! let hist = run_shots(&program, &gates, &builtin_callbacks(), 256, &RunOptions::seeded(7)).unwrap();
//! // Every outcome is a 0 followed by one 1 per restart.
//! assert!(hist.keys().all(|k| k.starts_with('0') && k[1..].chars().all(|c| c == '1')));
//! ```

pub mod compile;
pub mod eval;
pub mod gates;
pub mod ir;
pub mod passes;
pub mod runtime;
pub mod state;
pub mod text;

pub use compile::{CompileError, DecodeFn, ExpansionCtx, Handler, Pass, Pipeline, QubitExpansion};
pub use eval::{
    initial_config, run, run_shots, trace, ChaChaSource, Configuration, EvalError, Evaluator,
    Histogram, NoiseModel, Rule, RunOptions, StepRecord, UniformSource,
};
pub use gates::{
    builtin_gateset, equivalent_up_to_phase, unitary_of, GateDefinition, GateSet, GateSetError,
    Matrix,
};
pub use ir::{
    callback_ids, free_qubits, rename_qubits, validate, CallbackArg, CallbackRef, Diagnostic,
    GateApplication, Instruction, Kernel, Param, Program, QubitId, RenameError,
};
pub use runtime::{
    bell_kernel, builtin_callbacks, CallbackFactory, CallbackFn, CallbackRegistry,
    MeasurementStack, Runtime, RuntimeError,
};
pub use state::{StateError, StateVector};
pub use text::{
    parse, parse_kernel, serialize, serialize_kernel, ParseError, SourceProgram, Style,
};

// The guide in book/ doubles as a test suite: every Rust snippet in its
// chapters compiles and runs under `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/gatesets.md")]
    mod gatesets {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/callbacks.md")]
    mod callbacks {}
    #[doc = include_str!("../../../book/src/compilation.md")]
    mod compilation {}
    #[doc = include_str!("../../../book/src/error_correction.md")]
    mod error_correction {}
}
