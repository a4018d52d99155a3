//! The two three-qubit repetition codes.
//!
//! `rep3bit` protects against X errors: |0> encodes as |000>, gates go
//! transversal, and the decoder majority-votes the three physical bits.
//! Fresh qubits already start in |0>, so the encoding circuit is empty.
//!
//! `rep3phase` protects against Z errors by working in the X basis:
//! the prologue puts each fresh physical qubit in |+>, each physical
//! kernel ends with an `h` so measurement reads the X basis, and every
//! handler is the Hadamard conjugate of the bit-flip handler.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::compile::{DecodeFn, ExpansionCtx, Handler, Pass, QubitExpansion};
use crate::ir::{GateApplication, Instruction, QubitId};
use crate::runtime::MeasurementStack;

use super::{transversal, transversal_handler, CLIFFORD_GATES};

fn majority_decode() -> DecodeFn {
    Arc::new(|mstack: &mut MeasurementStack| {
        let m0 = mstack.pop()?;
        let m1 = mstack.pop()?;
        let m2 = mstack.pop()?;
        let ones = m0 as u8 + m1 as u8 + m2 as u8;
        mstack.push(ones >= 2);
        Ok(())
    })
}

/// The bit-flip repetition code pass (`rep3bit`).
pub fn rep3_bit() -> Pass {
    let mut handlers: BTreeMap<String, Handler> = BTreeMap::new();
    for gate in CLIFFORD_GATES {
        handlers.insert(gate.to_string(), transversal_handler());
    }
    Pass::new(
        "rep3bit",
        "cliffords",
        "cliffords",
        handlers,
        QubitExpansion::new(3, Arc::new(|_| Vec::new()), Arc::new(|_| Vec::new())),
        majority_decode(),
    )
}

fn h_on(qubits: &[QubitId]) -> Vec<Instruction> {
    qubits
        .iter()
        .map(|q| Instruction::Gate(GateApplication::new("h", [], [q.clone()])))
        .collect()
}

/// The phase-flip repetition code pass (`rep3phase`).
pub fn rep3_phase() -> Pass {
    let conjugated: Handler = Arc::new(|g: &GateApplication, ctx: &ExpansionCtx| {
        let involved: Vec<QubitId> = g.targets.iter().flat_map(|t| ctx.physical(t)).collect();
        let mut out = h_on(&involved);
        out.extend(transversal(g, ctx));
        out.extend(h_on(&involved));
        out
    });
    let mut handlers: BTreeMap<String, Handler> = BTreeMap::new();
    for gate in CLIFFORD_GATES {
        handlers.insert(gate.to_string(), conjugated.clone());
    }
    Pass::new(
        "rep3phase",
        "cliffords",
        "cliffords",
        handlers,
        QubitExpansion::new(
            3,
            Arc::new(|phys: &[QubitId]| h_on(phys)),
            Arc::new(|q: &QubitId| h_on(std::slice::from_ref(q))),
        ),
        majority_decode(),
    )
}
