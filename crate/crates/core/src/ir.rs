//! The kernel AST.
//!
//! A program is a tree of [`Kernel`]s. Each kernel allocates exactly one
//! qubit, runs a body of instructions (gates or nested kernels), then
//! measures its qubit and hands the outcome to a named classical callback.
//! The IR carries no classical expressions at all: every classical decision
//! lives behind a [`CallbackRef`], which stores only a name and a list of
//! constant arguments.
//!
//! Values in this module are immutable after construction and cheap to
//! clone; all operations here are pure.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::gates::GateSet;

/// Tolerance used when comparing gate parameters for structural equality.
pub const PARAM_EQ_TOL: f64 = 1e-12;

/// Name of the built-in no-op callback.
pub const DONE: &str = "done";

/// Prefix reserved for compiler-generated qubit names (anonymous kernels).
pub const ANON_PREFIX: &str = "_a";

/// A qubit identifier: a non-empty token with no whitespace or colon.
/// Dots are permitted and are used by the physical-qubit naming scheme.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitId(String);

impl QubitId {
    pub fn new(name: impl Into<String>) -> Self {
        QubitId(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// The physical name of replica `index`: `q` becomes `q.index`.
    pub fn expanded(&self, index: usize) -> QubitId {
        QubitId(format!("{}.{}", self.0, index))
    }

    /// Token rules shared by qubit ids, gate names and callback names.
    pub fn is_valid_token(s: &str) -> bool {
        !s.is_empty()
            && s.chars()
                .all(|c| !c.is_whitespace() && !matches!(c, ':' | ';' | ',' | '(' | ')' | '#'))
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QubitId({})", self.0)
    }
}

impl From<&str> for QubitId {
    fn from(s: &str) -> Self {
        QubitId::new(s)
    }
}

impl From<String> for QubitId {
    fn from(s: String) -> Self {
        QubitId::new(s)
    }
}

/// A real gate parameter.
///
/// The original source spelling is kept alongside the parsed value so that
/// serialization round-trips byte-for-byte; values constructed in code are
/// rendered with the shortest representation that reparses exactly.
/// Equality compares values within [`PARAM_EQ_TOL`].
#[derive(Clone)]
pub struct Param {
    value: f64,
    text: Option<String>,
}

impl Param {
    pub fn new(value: f64) -> Self {
        Param { value, text: None }
    }

    pub fn with_text(value: f64, text: impl Into<String>) -> Self {
        Param {
            value,
            text: Some(text.into()),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn render(&self) -> String {
        match &self.text {
            Some(t) => t.clone(),
            None => format!("{}", self.value),
        }
    }
}

impl PartialEq for Param {
    fn eq(&self, other: &Self) -> bool {
        (self.value - other.value).abs() <= PARAM_EQ_TOL
    }
}

impl fmt::Debug for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Param({})", self.render())
    }
}

impl From<f64> for Param {
    fn from(value: f64) -> Self {
        Param::new(value)
    }
}

/// A gate applied to one or more target qubits.
///
/// The first target is the most significant qubit of the gate's local basis
/// ordering, so `cx a b` treats `a` as the control.
#[derive(Clone, PartialEq, Debug)]
pub struct GateApplication {
    pub gate: String,
    pub params: Vec<Param>,
    pub targets: Vec<QubitId>,
}

impl GateApplication {
    pub fn new<Q: Into<QubitId>>(
        gate: impl Into<String>,
        params: impl IntoIterator<Item = Param>,
        targets: impl IntoIterator<Item = Q>,
    ) -> Self {
        GateApplication {
            gate: gate.into(),
            params: params.into_iter().collect(),
            targets: targets.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for GateApplication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.gate)?;
        if !self.params.is_empty() {
            let rendered: Vec<String> = self.params.iter().map(Param::render).collect();
            write!(f, "({})", rendered.join(", "))?;
        }
        for t in &self.targets {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

/// A constant argument bound to a callback in the IR: either a qubit
/// identifier or a numeric literal.
#[derive(Clone, PartialEq, Debug)]
pub enum CallbackArg {
    Qubit(QubitId),
    Num(Param),
}

impl fmt::Display for CallbackArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallbackArg::Qubit(q) => write!(f, "{q}"),
            CallbackArg::Num(p) => f.write_str(&p.render()),
        }
    }
}

/// A reference to a classical callback by name, with its bound constants.
#[derive(Clone, PartialEq, Debug)]
pub struct CallbackRef {
    pub name: String,
    pub args: Vec<CallbackArg>,
}

impl CallbackRef {
    pub fn new(name: impl Into<String>, args: impl IntoIterator<Item = CallbackArg>) -> Self {
        CallbackRef {
            name: name.into(),
            args: args.into_iter().collect(),
        }
    }

    /// The no-op `done` callback.
    pub fn done() -> Self {
        CallbackRef {
            name: DONE.to_string(),
            args: Vec::new(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.name == DONE && self.args.is_empty()
    }
}

impl fmt::Display for CallbackRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            let rendered: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", rendered.join(", "))?;
        }
        Ok(())
    }
}

/// One entry of a kernel body: a gate or a nested kernel.
#[derive(Clone, PartialEq, Debug)]
pub enum Instruction {
    Gate(GateApplication),
    Kernel(Kernel),
}

impl From<GateApplication> for Instruction {
    fn from(g: GateApplication) -> Self {
        Instruction::Gate(g)
    }
}

impl From<Kernel> for Instruction {
    fn from(k: Kernel) -> Self {
        Instruction::Kernel(k)
    }
}

/// The fundamental program unit: allocate one qubit, run a body, measure
/// the qubit, invoke a callback.
#[derive(Clone, PartialEq, Debug)]
pub struct Kernel {
    pub qubit: QubitId,
    pub body: Vec<Instruction>,
    pub callback: CallbackRef,
}

thread_local! {
    static ANON_COUNTER: Cell<u64> = const { Cell::new(0) };
}

/// Resets the anonymous-qubit counter. Called at the start of every run so
/// that identical seeds yield identical traces.
pub(crate) fn reset_anonymous_ids() {
    ANON_COUNTER.with(|c| c.set(0));
}

fn fresh_anonymous_id() -> QubitId {
    ANON_COUNTER.with(|c| {
        let n = c.get();
        c.set(n + 1);
        QubitId::new(format!("{ANON_PREFIX}{n}"))
    })
}

impl Kernel {
    pub fn new(
        qubit: impl Into<QubitId>,
        body: impl IntoIterator<Item = Instruction>,
        callback: CallbackRef,
    ) -> Self {
        Kernel {
            qubit: qubit.into(),
            body: body.into_iter().collect(),
            callback,
        }
    }

    /// A kernel with a compiler-generated fresh qubit id (prefix `_a`) and
    /// the `done` callback. This is the construction shorthand used by
    /// callbacks that return correction kernels: they care about the gates,
    /// not about the kernel's own qubit.
    ///
    /// Generated ids are unique within a run; the counter behind them is
    /// reset whenever an evaluator starts.
    pub fn anonymous(body: impl IntoIterator<Item = Instruction>) -> Self {
        Kernel {
            qubit: fresh_anonymous_id(),
            body: body.into_iter().collect(),
            callback: CallbackRef::done(),
        }
    }

    /// Concrete-syntax rendering, one gate per line.
    pub fn pretty(&self) -> String {
        crate::text::serialize_kernel(self, crate::text::Style::Lines)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

/// A kernel paired with the name of the gate set it is written against.
#[derive(Clone, PartialEq, Debug)]
pub struct Program {
    pub gateset: String,
    pub kernel: Kernel,
}

impl Program {
    pub fn new(gateset: impl Into<String>, kernel: Kernel) -> Self {
        Program {
            gateset: gateset.into(),
            kernel,
        }
    }
}

/// A validation finding: a path into the AST plus a message.
#[derive(Clone, PartialEq, Debug)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks a program against a gate set.
///
/// Returns an empty list exactly when every structural invariant holds: no
/// qubit shadows an enclosing allocation, every gate target is in scope,
/// every gate exists in the set with matching arity and parameter count,
/// targets are pairwise distinct, and `done` carries no arguments.
pub fn validate(program: &Program, gates: &GateSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if program.gateset != gates.name {
        out.push(Diagnostic {
            path: String::new(),
            message: format!(
                "program names gate set `{}` but was validated against `{}`",
                program.gateset, gates.name
            ),
        });
    }
    let mut bound: Vec<QubitId> = Vec::new();
    validate_kernel(&program.kernel, gates, &mut bound, "", &mut out);
    out
}

fn validate_kernel(
    kernel: &Kernel,
    gates: &GateSet,
    bound: &mut Vec<QubitId>,
    path: &str,
    out: &mut Vec<Diagnostic>,
) {
    let here = if path.is_empty() {
        kernel.qubit.name().to_string()
    } else {
        format!("{path}/{}", kernel.qubit)
    };
    if !QubitId::is_valid_token(kernel.qubit.name()) {
        out.push(Diagnostic {
            path: here.clone(),
            message: format!("invalid qubit name `{}`", kernel.qubit),
        });
    }
    if bound.contains(&kernel.qubit) {
        out.push(Diagnostic {
            path: here.clone(),
            message: format!("qubit `{}` shadows an enclosing allocation", kernel.qubit),
        });
    }
    bound.push(kernel.qubit.clone());
    for (i, inst) in kernel.body.iter().enumerate() {
        let at = format!("{here}/{i}");
        match inst {
            Instruction::Gate(g) => validate_gate(g, gates, bound, &at, out),
            Instruction::Kernel(k) => validate_kernel(k, gates, bound, &here, out),
        }
    }
    if kernel.callback.name == DONE && !kernel.callback.args.is_empty() {
        out.push(Diagnostic {
            path: here.clone(),
            message: "`done` takes no arguments".to_string(),
        });
    }
    bound.pop();
}

fn validate_gate(
    g: &GateApplication,
    gates: &GateSet,
    bound: &[QubitId],
    path: &str,
    out: &mut Vec<Diagnostic>,
) {
    let mut diag = |message: String| {
        out.push(Diagnostic {
            path: path.to_string(),
            message,
        })
    };
    match gates.get(&g.gate) {
        None => diag(format!(
            "unknown gate `{}` in gate set `{}`",
            g.gate, gates.name
        )),
        Some(def) => {
            if def.arity != g.targets.len() {
                diag(format!(
                    "gate `{}` expects {} target(s), found {}",
                    g.gate,
                    def.arity,
                    g.targets.len()
                ));
            }
            if def.param_count != g.params.len() {
                diag(format!(
                    "gate `{}` expects {} parameter(s), found {}",
                    g.gate,
                    def.param_count,
                    g.params.len()
                ));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for t in &g.targets {
        if !seen.insert(t.clone()) {
            diag(format!("duplicate target `{t}` in gate `{}`", g.gate));
        }
        if !bound.contains(t) {
            diag(format!("qubit `{t}` is not in scope"));
        }
    }
}

/// The qubit ids used by gates in the tree but bound by no kernel in it.
pub fn free_qubits(kernel: &Kernel) -> BTreeSet<QubitId> {
    let mut bound = BTreeSet::new();
    let mut used = BTreeSet::new();
    collect_qubits(kernel, &mut bound, &mut used);
    used.difference(&bound).cloned().collect()
}

fn collect_qubits(kernel: &Kernel, bound: &mut BTreeSet<QubitId>, used: &mut BTreeSet<QubitId>) {
    bound.insert(kernel.qubit.clone());
    for inst in &kernel.body {
        match inst {
            Instruction::Gate(g) => used.extend(g.targets.iter().cloned()),
            Instruction::Kernel(k) => collect_qubits(k, bound, used),
        }
    }
}

/// All callback names referenced anywhere in the tree.
pub fn callback_ids(kernel: &Kernel) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_callbacks(kernel, &mut out);
    out
}

fn collect_callbacks(kernel: &Kernel, out: &mut BTreeSet<String>) {
    out.insert(kernel.callback.name.clone());
    for inst in &kernel.body {
        if let Instruction::Kernel(k) = inst {
            collect_callbacks(k, out);
        }
    }
}

#[derive(Clone, PartialEq, Debug, Error)]
pub enum RenameError {
    #[error("renaming maps both `{first}` and `{second}` to `{to}`")]
    Collision {
        first: QubitId,
        second: QubitId,
        to: QubitId,
    },
}

/// Replaces qubit ids throughout a kernel: bound occurrences, gate targets,
/// and qubit-valued callback arguments. Ids outside the map are untouched.
///
/// The map must be injective on the ids it actually touches; a collision is
/// reported as an error. Preserving the no-shadowing invariant is the
/// caller's responsibility.
pub fn rename_qubits(
    kernel: &Kernel,
    map: &BTreeMap<QubitId, QubitId>,
) -> Result<Kernel, RenameError> {
    // Injectivity over the ids present in this tree.
    let mut present = BTreeSet::new();
    let mut used = BTreeSet::new();
    collect_qubits(kernel, &mut present, &mut used);
    present.extend(used);
    collect_callback_qubits(kernel, &mut present);
    let mut image: BTreeMap<&QubitId, &QubitId> = BTreeMap::new();
    for q in present.iter().filter(|q| map.contains_key(*q)) {
        let to = &map[q];
        if let Some(prev) = image.insert(to, q) {
            return Err(RenameError::Collision {
                first: prev.clone(),
                second: q.clone(),
                to: to.clone(),
            });
        }
    }
    Ok(rename_in(kernel, map))
}

fn collect_callback_qubits(kernel: &Kernel, out: &mut BTreeSet<QubitId>) {
    for arg in &kernel.callback.args {
        if let CallbackArg::Qubit(q) = arg {
            out.insert(q.clone());
        }
    }
    for inst in &kernel.body {
        if let Instruction::Kernel(k) = inst {
            collect_callback_qubits(k, out);
        }
    }
}

fn rename_in(kernel: &Kernel, map: &BTreeMap<QubitId, QubitId>) -> Kernel {
    let sub = |q: &QubitId| map.get(q).cloned().unwrap_or_else(|| q.clone());
    Kernel {
        qubit: sub(&kernel.qubit),
        body: kernel
            .body
            .iter()
            .map(|inst| match inst {
                Instruction::Gate(g) => Instruction::Gate(GateApplication {
                    gate: g.gate.clone(),
                    params: g.params.clone(),
                    targets: g.targets.iter().map(&sub).collect(),
                }),
                Instruction::Kernel(k) => Instruction::Kernel(rename_in(k, map)),
            })
            .collect(),
        callback: CallbackRef {
            name: kernel.callback.name.clone(),
            args: kernel
                .callback
                .args
                .iter()
                .map(|a| match a {
                    CallbackArg::Qubit(q) => CallbackArg::Qubit(sub(q)),
                    CallbackArg::Num(p) => CallbackArg::Num(p.clone()),
                })
                .collect(),
        },
    }
}
