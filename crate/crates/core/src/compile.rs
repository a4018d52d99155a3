//! The compiler pass framework: per-gate handlers, qubit expansion, and
//! callback wrapping.
//!
//! A [`Pass`] maps programs from a source gate set to a target gate set.
//! Gate translation is handler-driven: one [`Handler`] per source gate,
//! free to emit gates or whole sub-kernels in the target set. Encoding
//! passes additionally declare a [`QubitExpansion`] that turns each logical
//! qubit into `width` physical qubits, and a [`DecodeFn`] that restores the
//! measurement stack by popping the physical bits and pushing the decoded
//! logical bit.
//!
//! The part that makes passes compose is callback wrapping: compiling a
//! program rewires every callback reference to a wrapped callback that
//! first runs the pass's decoder, then the original callback, and finally
//! compiles any kernel the original returned through this same pass.
//! Chaining passes nests the wrappers, so at run time decoders fire
//! outside-in (last pass first) while returned kernels are compiled
//! inside-out (first pass first). No pass knows about any other.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::ir::{CallbackRef, GateApplication, Instruction, Kernel, Program, QubitId};
use crate::runtime::{CallbackFactory, CallbackRegistry, MeasurementStack, RuntimeError};

#[derive(Clone, PartialEq, Debug, Error)]
pub enum CompileError {
    #[error("pass `{pass}` has no handler for gate `{gate}`")]
    MissingHandler { pass: String, gate: String },
    #[error("pass `{pass}` compiles from `{expected}` but the program is in `{found}`")]
    SourceMismatch {
        pass: String,
        expected: String,
        found: String,
    },
    #[error(
        "cannot chain `{left}` (target `{left_target}`) into `{right}` (source `{right_source}`)"
    )]
    ChainMismatch {
        left: String,
        left_target: String,
        right: String,
        right_source: String,
    },
    #[error("wrapped callback name `{0}` is already registered")]
    NameCollision(String),
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
}

/// Context handed to handlers: maps a logical qubit id to its physical
/// replicas under the pass's expansion (`q` -> `[q.0 .. q.(n-1)]`, or just
/// `[q]` for width-1 passes).
#[derive(Clone, Copy, Debug)]
pub struct ExpansionCtx {
    width: usize,
}

impl ExpansionCtx {
    pub fn new(width: usize) -> Self {
        assert!(width >= 1, "expansion width must be positive");
        ExpansionCtx { width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn physical(&self, q: &QubitId) -> Vec<QubitId> {
        if self.width == 1 {
            vec![q.clone()]
        } else {
            (0..self.width).map(|i| q.expanded(i)).collect()
        }
    }
}

/// Translates one source gate into target-set instructions.
pub type Handler = Arc<dyn Fn(&GateApplication, &ExpansionCtx) -> Vec<Instruction> + Send + Sync>;

/// Restores the measurement stack after a measurement-structure change:
/// pops this pass's physical bits, pushes the decoded logical bit.
pub type DecodeFn = Arc<dyn Fn(&mut MeasurementStack) -> Result<(), RuntimeError> + Send + Sync>;

/// Per-logical-qubit instructions emitted right after the innermost
/// physical allocation (the encoding circuit).
pub type PrologueFn = Arc<dyn Fn(&[QubitId]) -> Vec<Instruction> + Send + Sync>;

/// Per-physical-qubit instructions emitted at the end of that physical
/// kernel, immediately before its measurement (basis change).
pub type EpilogueFn = Arc<dyn Fn(&QubitId) -> Vec<Instruction> + Send + Sync>;

/// How a pass expands logical qubits into physical ones.
#[derive(Clone)]
pub struct QubitExpansion {
    width: usize,
    prologue: PrologueFn,
    epilogue: EpilogueFn,
}

impl QubitExpansion {
    /// Width 1, empty prologue and epilogue: an ISA translation pass.
    pub fn identity() -> Self {
        QubitExpansion {
            width: 1,
            prologue: Arc::new(|_| Vec::new()),
            epilogue: Arc::new(|_| Vec::new()),
        }
    }

    pub fn new(width: usize, prologue: PrologueFn, epilogue: EpilogueFn) -> Self {
        assert!(width >= 1, "expansion width must be positive");
        QubitExpansion {
            width,
            prologue,
            epilogue,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

impl fmt::Debug for QubitExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QubitExpansion(width={})", self.width)
    }
}

/// A compiler pass: source and target gate sets, one handler per source
/// gate, a qubit expansion, and a decoder.
#[derive(Clone)]
pub struct Pass {
    name: String,
    source: String,
    target: String,
    handlers: BTreeMap<String, Handler>,
    expansion: QubitExpansion,
    decode: DecodeFn,
}

impl Pass {
    pub fn new(
        name: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
        handlers: BTreeMap<String, Handler>,
        expansion: QubitExpansion,
        decode: DecodeFn,
    ) -> Self {
        Pass {
            name: name.into(),
            source: source.into(),
            target: target.into(),
            handlers,
            expansion,
            decode,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn width(&self) -> usize {
        self.expansion.width
    }

    pub fn expansion(&self) -> &QubitExpansion {
        &self.expansion
    }

    pub fn handlers(&self) -> &BTreeMap<String, Handler> {
        &self.handlers
    }

    pub fn decode_fn(&self) -> DecodeFn {
        self.decode.clone()
    }

    /// Runs this pass's decoder on a measurement stack.
    pub fn decode(&self, mstack: &mut MeasurementStack) -> Result<(), RuntimeError> {
        (self.decode)(mstack)
    }

    /// The registered name of the wrapped form of callback `original`.
    pub fn wrapped_name(&self, original: &str) -> String {
        format!("{}.{}", self.name, original)
    }

    /// Compiles one kernel.
    ///
    /// Each source kernel becomes `width` nested physical kernels, `q.0`
    /// outermost through `q.(width-1)` innermost, so that `q.0`'s bit is on
    /// top of the stack when the wrapped callback decodes. The prologue
    /// lands right after the innermost allocation, the compiled body inside
    /// the innermost kernel, and the epilogue at each physical kernel's
    /// end. Compiler-introduced physical kernels get plain `done`; the
    /// source kernel's own callback is rewired to its wrapped name on the
    /// outermost physical kernel, with its arguments untouched (a returned
    /// kernel still names logical qubits and is compiled, which re-expands
    /// them).
    pub fn compile_kernel(&self, kernel: &Kernel) -> Result<Kernel, CompileError> {
        let ctx = ExpansionCtx {
            width: self.expansion.width,
        };
        let phys = ctx.physical(&kernel.qubit);
        let mut inner = (self.expansion.prologue)(&phys);
        for inst in &kernel.body {
            match inst {
                Instruction::Gate(g) => {
                    let handler =
                        self.handlers
                            .get(&g.gate)
                            .ok_or_else(|| CompileError::MissingHandler {
                                pass: self.name.clone(),
                                gate: g.gate.clone(),
                            })?;
                    inner.extend(handler(g, &ctx));
                }
                Instruction::Kernel(k) => inner.push(Instruction::Kernel(self.compile_kernel(k)?)),
            }
        }
        let wrapped = CallbackRef::new(
            self.wrapped_name(&kernel.callback.name),
            kernel.callback.args.clone(),
        );
        let last = phys.len() - 1;
        let mut body = inner;
        body.extend((self.expansion.epilogue)(&phys[last]));
        let mut out = Kernel::new(
            phys[last].clone(),
            body,
            if last == 0 {
                wrapped.clone()
            } else {
                CallbackRef::done()
            },
        );
        for i in (0..last).rev() {
            let mut body = vec![Instruction::Kernel(out)];
            body.extend((self.expansion.epilogue)(&phys[i]));
            out = Kernel::new(
                phys[i].clone(),
                body,
                if i == 0 {
                    wrapped.clone()
                } else {
                    CallbackRef::done()
                },
            );
        }
        Ok(out)
    }

    /// Wraps the named callbacks from `registry`, returning the new
    /// registrations keyed by wrapped name.
    pub fn wrap_callback_ids(
        &self,
        ids: &BTreeSet<String>,
        registry: &CallbackRegistry,
    ) -> Result<BTreeMap<String, CallbackFactory>, CompileError> {
        let mut out = BTreeMap::new();
        for id in ids {
            let Some(factory) = registry.get(id) else {
                // Unregistered names fail at invoke time, exactly as they
                // would have in the source program.
                continue;
            };
            out.insert(self.wrapped_name(id), self.wrap_factory(factory.clone()));
        }
        Ok(out)
    }

    /// Wraps one callback factory exactly as compilation would: run this
    /// pass's decoder, run the inner callback, compile any kernel it
    /// returned through this pass. This is also how a wrapped name from a
    /// previously compiled program can be rebuilt at load time.
    pub fn wrap(&self, inner: CallbackFactory) -> CallbackFactory {
        self.wrap_factory(inner)
    }

    fn wrap_factory(&self, inner: CallbackFactory) -> CallbackFactory {
        let pass = self.clone();
        Arc::new(move || {
            let mut original = inner();
            let pass = pass.clone();
            Box::new(move |mstack, args| {
                pass.decode(mstack)?;
                match original(mstack, args)? {
                    Some(kernel) => Ok(Some(
                        pass.compile_kernel(&kernel)
                            .map_err(|e| RuntimeError::Compile(Box::new(e)))?,
                    )),
                    None => Ok(None),
                }
            })
        })
    }

    /// Wraps every callback in `registry` (including `done`: a logical
    /// measurement still needs decoding even when its callback does
    /// nothing). The result also contains a plain `done` for the physical
    /// kernels this pass introduces.
    pub fn wrap_callbacks(
        &self,
        registry: &CallbackRegistry,
    ) -> Result<CallbackRegistry, CompileError> {
        let ids: BTreeSet<String> = registry.names().map(str::to_string).collect();
        let wrapped = self.wrap_callback_ids(&ids, registry)?;
        let mut out = CallbackRegistry::new();
        for (name, factory) in wrapped {
            if !out.try_register(name.clone(), factory) {
                return Err(CompileError::NameCollision(name));
            }
        }
        Ok(out)
    }

    /// Compiles a whole program: the kernel tree through the handlers and
    /// expansion, the callback set through wrapping. The input program is
    /// untouched.
    pub fn compile(
        &self,
        program: &Program,
        callbacks: &CallbackRegistry,
    ) -> Result<(Program, CallbackRegistry), CompileError> {
        if program.gateset != self.source {
            return Err(CompileError::SourceMismatch {
                pass: self.name.clone(),
                expected: self.source.clone(),
                found: program.gateset.clone(),
            });
        }
        let kernel = self.compile_kernel(&program.kernel)?;
        let callbacks = self.wrap_callbacks(callbacks)?;
        Ok((Program::new(self.target.clone(), kernel), callbacks))
    }
}

impl fmt::Debug for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Pass({}: {} -> {}, width {})",
            self.name, self.source, self.target, self.expansion.width
        )
    }
}

/// An ordered chain of passes. Compilation folds left to right; callback
/// wrappers nest so decoders run outside-in and returned-kernel compilation
/// runs inside-out.
#[derive(Clone, Debug)]
pub struct Pipeline {
    passes: Vec<Pass>,
}

impl Pipeline {
    /// Builds a pipeline, checking that adjacent gate sets line up. An
    /// empty list is the identity pipeline.
    pub fn new(passes: Vec<Pass>) -> Result<Self, CompileError> {
        for pair in passes.windows(2) {
            if pair[0].target() != pair[1].source() {
                return Err(CompileError::ChainMismatch {
                    left: pair[0].name().to_string(),
                    left_target: pair[0].target().to_string(),
                    right: pair[1].name().to_string(),
                    right_source: pair[1].source().to_string(),
                });
            }
        }
        Ok(Pipeline { passes })
    }

    pub fn passes(&self) -> &[Pass] {
        &self.passes
    }

    pub fn is_empty(&self) -> bool {
        self.passes.is_empty()
    }

    pub fn compile(
        &self,
        program: &Program,
        callbacks: &CallbackRegistry,
    ) -> Result<(Program, CallbackRegistry), CompileError> {
        let mut program = program.clone();
        let mut callbacks = callbacks.clone();
        for pass in &self.passes {
            (program, callbacks) = pass.compile(&program, &callbacks)?;
        }
        Ok((program, callbacks))
    }
}
