//! The built-in compiler passes.
//!
//! | name            | source    | target       | width | decode        |
//! |-----------------|-----------|--------------|-------|---------------|
//! | `toy2cliffords` | toy       | cliffords    | 1     | no-op         |
//! | `rep3bit`       | cliffords | cliffords    | 3     | majority vote |
//! | `rep3phase`     | cliffords | cliffords    | 3     | majority vote |
//! | `steane`        | cliffords | cliffords    | 7     | syndrome + parity |
//! | `h2`            | cliffords | trapped-ion  | 1     | no-op         |
//! | `na`            | cliffords | neutral-atom | 1     | no-op         |
//!
//! Encoding passes keep the Cliffords gate set, so they chain freely:
//! `rep3bit,rep3phase` concatenates into a nine-qubit code, `rep3bit,rep3bit`
//! doubles the repetition distance, and a hardware pass can follow any
//! stack of encodings.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::compile::{CompileError, ExpansionCtx, Handler, Pass, Pipeline, QubitExpansion};
use crate::ir::{GateApplication, Instruction};

mod native;
mod rep3;
mod steane;

pub use native::{cliffords_to_neutral_atom, cliffords_to_trapped_ion};
pub use rep3::{rep3_bit, rep3_phase};
pub use steane::{steane, DecoderTable};

pub(crate) const CLIFFORD_GATES: [&str; 7] = ["x", "y", "z", "s", "h", "cx", "cz"];

/// Applies the gate replica-by-replica: replica `i` of every target. Width
/// 1 leaves the gate untouched; for multi-qubit gates this is the pairwise
/// transversal form (`cx a b` becomes `cx a.i b.i` for each `i`).
pub(crate) fn transversal(g: &GateApplication, ctx: &ExpansionCtx) -> Vec<Instruction> {
    let phys: Vec<Vec<crate::ir::QubitId>> = g.targets.iter().map(|t| ctx.physical(t)).collect();
    (0..ctx.width())
        .map(|i| {
            Instruction::Gate(GateApplication {
                gate: g.gate.clone(),
                params: g.params.clone(),
                targets: phys.iter().map(|p| p[i].clone()).collect(),
            })
        })
        .collect()
}

pub(crate) fn transversal_handler() -> Handler {
    Arc::new(transversal)
}

/// Toy to Cliffords ISA translation: `flip` to `x`, `mix` to `h`,
/// `entangle` to `cx`.
pub fn toy_to_cliffords() -> Pass {
    let rename = |to: &'static str| -> Handler {
        Arc::new(move |g: &GateApplication, _: &ExpansionCtx| {
            vec![Instruction::Gate(GateApplication {
                gate: to.to_string(),
                params: g.params.clone(),
                targets: g.targets.clone(),
            })]
        })
    };
    let mut handlers: BTreeMap<String, Handler> = BTreeMap::new();
    handlers.insert("flip".into(), rename("x"));
    handlers.insert("mix".into(), rename("h"));
    handlers.insert("entangle".into(), rename("cx"));
    Pass::new(
        "toy2cliffords",
        "toy",
        "cliffords",
        handlers,
        QubitExpansion::identity(),
        Arc::new(|_| Ok(())),
    )
}

/// Looks up a pass by its registered name.
pub fn by_name(name: &str) -> Option<Pass> {
    match name {
        "toy2cliffords" => Some(toy_to_cliffords()),
        "rep3bit" => Some(rep3_bit()),
        "rep3phase" => Some(rep3_phase()),
        "steane" => Some(steane()),
        "h2" => Some(cliffords_to_trapped_ion()),
        "na" => Some(cliffords_to_neutral_atom()),
        _ => None,
    }
}

/// Parses a comma-separated pipeline description such as
/// `"toy2cliffords,rep3bit,rep3phase,h2"`. Whitespace around names is
/// ignored; the empty string is the identity pipeline.
pub fn parse_pipeline(spec: &str) -> Result<Pipeline, CompileError> {
    let mut passes = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        passes.push(by_name(name).ok_or_else(|| CompileError::UnknownPass(name.to_string()))?);
    }
    Pipeline::new(passes)
}

/// Rebuilds the callback a wrapped name denotes, so previously compiled
/// programs can run without their original pipeline object.
///
/// Names registered as-is win; otherwise leading dot-separated segments
/// that name built-in passes are peeled and re-applied as wrappers, so
/// `h2.rep3bit.done` becomes the h2-wrapped rep3bit-wrapped `done`.
/// Returns `None` when the name bottoms out on an unregistered callback
/// or a segment that is not a pass.
pub fn resolve_wrapped(
    name: &str,
    registry: &crate::runtime::CallbackRegistry,
) -> Option<crate::runtime::CallbackFactory> {
    if let Some(factory) = registry.get(name) {
        return Some(factory.clone());
    }
    let (head, rest) = name.split_once('.')?;
    let pass = by_name(head)?;
    Some(pass.wrap(resolve_wrapped(rest, registry)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{CallbackRef, Kernel};

    fn apply_handler(pass: &Pass, g: GateApplication) -> Vec<Instruction> {
        let kernel = Kernel::new("probe", [Instruction::Gate(g)], CallbackRef::done());
        // Run the gate through compile_kernel and strip the wrapper kernels.
        let mut k = pass.compile_kernel(&kernel).unwrap();
        while k.body.len() == 1 {
            if let Instruction::Kernel(inner) = &k.body[0] {
                k = inner.clone();
            } else {
                break;
            }
        }
        k.body
    }

    #[test]
    fn toy_handlers_rename_gates() {
        let pass = toy_to_cliffords();
        let cases = [
            (GateApplication::new("flip", [], ["q"]), "x q"),
            (GateApplication::new("mix", [], ["q"]), "h q"),
            (GateApplication::new("entangle", [], ["a", "b"]), "cx a b"),
        ];
        for (g, expected) in cases {
            let out = apply_handler(&pass, g);
            assert_eq!(out.len(), 1);
            let Instruction::Gate(g) = &out[0] else {
                panic!()
            };
            assert_eq!(g.to_string(), expected);
        }
    }

    #[test]
    fn transversal_is_pairwise_for_two_qubit_gates() {
        let ctx = ExpansionCtx::new(3);
        let out = transversal(&GateApplication::new("cx", [], ["q2", "q1"]), &ctx);
        let rendered: Vec<String> = out
            .iter()
            .map(|i| match i {
                Instruction::Gate(g) => g.to_string(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            rendered,
            vec!["cx q2.0 q1.0", "cx q2.1 q1.1", "cx q2.2 q1.2"]
        );
    }

    #[test]
    fn pipeline_parsing() {
        assert!(parse_pipeline("").unwrap().is_empty());
        let p = parse_pipeline("toy2cliffords, rep3bit,rep3phase,h2").unwrap();
        assert_eq!(p.passes().len(), 4);
        assert!(matches!(
            parse_pipeline("nope"),
            Err(CompileError::UnknownPass(_))
        ));
        assert!(matches!(
            parse_pipeline("rep3bit,toy2cliffords"),
            Err(CompileError::ChainMismatch { .. })
        ));
    }

    #[test]
    fn resolve_wrapped_rebuilds_decoder_chains() {
        use crate::runtime::{builtin_callbacks, MeasurementStack};

        let registry = builtin_callbacks();
        // One layer: majority-decode three bits, then `done`.
        let factory = resolve_wrapped("rep3bit.done", &registry).unwrap();
        let mut cb = factory();
        let mut ms = MeasurementStack::from_bits_head_first([true, true, false, true]);
        assert!(cb(&mut ms, &[]).unwrap().is_none());
        assert_eq!(ms.bits_head_first(), vec![true, true]);

        // Two layers: the outer decode folds this block's three raw bits
        // into one, the inner decode folds that with the two sibling
        // blocks' already-decoded bits.
        let factory = resolve_wrapped("rep3phase.rep3bit.done", &registry).unwrap();
        let mut cb = factory();
        let mut ms = MeasurementStack::from_bits_head_first([true; 5]);
        assert!(cb(&mut ms, &[]).unwrap().is_none());
        assert_eq!(ms.bits_head_first(), vec![true]);

        // Registered names pass through; unknown heads fail.
        assert!(resolve_wrapped("done", &registry).is_some());
        assert!(resolve_wrapped("nope.done", &registry).is_none());
        assert!(resolve_wrapped("rep3bit.nope", &registry).is_none());
    }

    #[test]
    fn every_builtin_pass_covers_its_source_set() {
        for name in [
            "toy2cliffords",
            "rep3bit",
            "rep3phase",
            "steane",
            "h2",
            "na",
        ] {
            let pass = by_name(name).unwrap();
            let source = crate::gates::builtin_gateset(pass.source()).unwrap();
            for gate in source.gate_names() {
                assert!(
                    pass.handlers().contains_key(gate),
                    "{name} is missing a handler for {gate}"
                );
            }
        }
    }
}
