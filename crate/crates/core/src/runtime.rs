//! The classical side: measurement stack, callback registry, and the
//! built-in callbacks.
//!
//! Callbacks are opaque host functions. The IR stores only a name and bound
//! constants; a [`CallbackRegistry`] maps names to factories, and each run
//! instantiates fresh callback instances from those factories so per-run
//! callback state is never shared between runs.
//!
//! A callback sees exactly two channels: it may mutate the measurement
//! stack, and it may return a kernel to execute next. Nothing else.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::compile::CompileError;
use crate::ir::{CallbackArg, CallbackRef, GateApplication, Instruction, Kernel, DONE};

/// LIFO stack of classical measurement bits. The head is the most recent
/// bit; it is the only classical state callbacks can observe.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MeasurementStack {
    bits: Vec<bool>,
}

impl MeasurementStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a stack from bits listed head-first.
    pub fn from_bits_head_first(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut v: Vec<bool> = bits.into_iter().collect();
        v.reverse();
        MeasurementStack { bits: v }
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn pop(&mut self) -> Result<bool, RuntimeError> {
        self.bits.pop().ok_or(RuntimeError::EmptyStack)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bits head-first (most recent first).
    pub fn bits_head_first(&self) -> Vec<bool> {
        self.bits.iter().rev().copied().collect()
    }

    /// Renders the stack head-first, e.g. `011`.
    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .rev()
            .map(|b| if *b { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for MeasurementStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

#[derive(Clone, PartialEq, Debug, Error)]
pub enum RuntimeError {
    #[error("pop on an empty measurement stack")]
    EmptyStack,
    #[error("unknown callback `{0}`")]
    UnknownCallback(String),
    #[error("callback `{callback}` expects {expected}")]
    BadCallbackArg { callback: String, expected: String },
    #[error("compiling a callback-returned kernel failed: {0}")]
    Compile(#[from] Box<CompileError>),
    #[error("callback failed: {0}")]
    Custom(String),
}

/// One callback instance: mutates the stack, optionally returns a kernel.
pub type CallbackFn =
    Box<dyn FnMut(&mut MeasurementStack, &[CallbackArg]) -> Result<Option<Kernel>, RuntimeError>>;

/// Produces a fresh callback instance per run.
pub type CallbackFactory = Arc<dyn Fn() -> CallbackFn + Send + Sync>;

/// Maps callback names to factories. Immutable once a run starts; `done`
/// is always present.
#[derive(Clone)]
pub struct CallbackRegistry {
    factories: BTreeMap<String, CallbackFactory>,
}

impl Default for CallbackRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl CallbackRegistry {
    /// An empty registry containing only `done`.
    pub fn new() -> Self {
        let mut r = CallbackRegistry {
            factories: BTreeMap::new(),
        };
        r.register_fn(DONE, |_, _| Ok(None));
        r
    }

    /// Registers a factory, replacing any previous entry of the same name.
    pub fn register(&mut self, name: impl Into<String>, factory: CallbackFactory) {
        self.factories.insert(name.into(), factory);
    }

    /// Registers a factory; fails instead of replacing.
    pub(crate) fn try_register(
        &mut self,
        name: impl Into<String>,
        factory: CallbackFactory,
    ) -> bool {
        let name = name.into();
        if self.factories.contains_key(&name) {
            return false;
        }
        self.factories.insert(name, factory);
        true
    }

    /// Convenience for stateless callbacks: the closure is shared by every
    /// instance.
    pub fn register_fn(
        &mut self,
        name: impl Into<String>,
        f: impl Fn(&mut MeasurementStack, &[CallbackArg]) -> Result<Option<Kernel>, RuntimeError>
            + Send
            + Sync
            + 'static,
    ) {
        let f = Arc::new(f);
        self.register(
            name,
            Arc::new(move || {
                let f = f.clone();
                Box::new(move |ms, args| f(ms, args))
            }),
        );
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&CallbackFactory> {
        self.factories.get(name)
    }

    pub fn len(&self) -> usize {
        self.factories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factories.is_empty()
    }

    /// Instantiates every factory for one run.
    pub fn instantiate(&self) -> Runtime {
        Runtime {
            instances: self
                .factories
                .iter()
                .map(|(name, factory)| (name.clone(), factory()))
                .collect(),
        }
    }
}

impl fmt::Debug for CallbackRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

/// Per-run callback instances.
pub struct Runtime {
    instances: BTreeMap<String, CallbackFn>,
}

impl Runtime {
    /// Invokes the callback referenced by `cb` with its bound arguments.
    pub fn invoke(
        &mut self,
        cb: &CallbackRef,
        mstack: &mut MeasurementStack,
    ) -> Result<Option<Kernel>, RuntimeError> {
        let f = self
            .instances
            .get_mut(&cb.name)
            .ok_or_else(|| RuntimeError::UnknownCallback(cb.name.clone()))?;
        f(mstack, &cb.args)
    }
}

/// The repeat-until-success kernel: prepare a Bell pair, measure the inner
/// qubit with `done`, measure the outer with `repeat_until_zero`.
pub fn bell_kernel() -> Kernel {
    Kernel::new(
        "q1",
        [Instruction::Kernel(Kernel::new(
            "q2",
            [
                GateApplication::new("h", [], ["q2"]).into(),
                GateApplication::new("cx", [], ["q2", "q1"]).into(),
            ],
            CallbackRef::done(),
        ))],
        CallbackRef::new("repeat_until_zero", []),
    )
}

/// The built-in callbacks:
///
/// * `done` — no-op.
/// * `repeat_until_zero` — pops one bit; on 1 returns [`bell_kernel`],
///   on 0 returns nothing.
/// * `fix(q)` — returns an anonymous kernel applying `flip` to `q`.
pub fn builtin_callbacks() -> CallbackRegistry {
    let mut r = CallbackRegistry::new();
    r.register_fn("repeat_until_zero", |ms, _| {
        if ms.pop()? {
            Ok(Some(bell_kernel()))
        } else {
            Ok(None)
        }
    });
    r.register_fn("fix", |_, args| {
        let [CallbackArg::Qubit(q)] = args else {
            return Err(RuntimeError::BadCallbackArg {
                callback: "fix".to_string(),
                expected: "one qubit argument".to_string(),
            });
        };
        Ok(Some(Kernel::anonymous([GateApplication::new(
            "flip",
            [],
            [q.clone()],
        )
        .into()])))
    });
    r
}
