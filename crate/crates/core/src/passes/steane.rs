//! The seven-qubit Steane code pass.
//!
//! Physical qubit `q.j` carries column `j + 1` of the Hamming parity-check
//! matrix, so a syndrome, read as a binary number, points directly at the
//! flipped qubit. The logical |0> is the uniform superposition of the
//! even-weight Hamming codewords; the prologue prepares it from |0...0>
//! with three Hadamards and nine CNOTs. Logical readout is the overall
//! parity of the seven measured bits after syndrome correction.
//!
//! Gate handlers: `x`, `y`, `z`, `h` act transversally, `cx` and `cz`
//! pairwise transversally, and logical `s` is the transversal `z; s`
//! (that is, S-dagger on every physical qubit).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::compile::{DecodeFn, ExpansionCtx, Handler, Pass, QubitExpansion};
use crate::ir::{GateApplication, Instruction, QubitId};
use crate::runtime::MeasurementStack;

use super::{transversal_handler, CLIFFORD_GATES};

/// Number of physical qubits per logical qubit.
pub const WIDTH: usize = 7;

/// The Hamming(7,4) parity checks and the syndrome-to-position lookup.
/// Row `r` of the check matrix has a 1 in column `j` exactly when bit `r`
/// of `j + 1` is set.
#[derive(Clone, Debug)]
pub struct DecoderTable {
    rows: [u8; 3],
    lookup: [Option<usize>; 8],
}

impl Default for DecoderTable {
    fn default() -> Self {
        Self::new()
    }
}

impl DecoderTable {
    pub fn new() -> Self {
        let mut rows = [0u8; 3];
        for (r, row) in rows.iter_mut().enumerate() {
            for j in 0..WIDTH {
                if (j + 1) >> r & 1 == 1 {
                    *row |= 1 << j;
                }
            }
        }
        let mut lookup = [None; 8];
        for (s, entry) in lookup.iter_mut().enumerate().skip(1) {
            *entry = Some(s - 1);
        }
        DecoderTable { rows, lookup }
    }

    pub fn check_rows(&self) -> [u8; 3] {
        self.rows
    }

    /// Syndrome of a 7-bit pattern (bit `j` of the input is qubit `q.j`).
    pub fn syndrome(&self, bits: u8) -> usize {
        let mut s = 0;
        for (r, row) in self.rows.iter().enumerate() {
            if ((bits & row).count_ones() & 1) == 1 {
                s |= 1 << r;
            }
        }
        s
    }

    /// Flips the single bit the syndrome points at, if any.
    pub fn correct(&self, bits: u8) -> u8 {
        match self.lookup[self.syndrome(bits)] {
            Some(j) => bits ^ (1 << j),
            None => bits,
        }
    }

    /// Overall parity after correction: the logical readout.
    pub fn decode(&self, bits: u8) -> bool {
        self.correct(bits).count_ones() & 1 == 1
    }
}

fn syndrome_decode() -> DecodeFn {
    let table = DecoderTable::new();
    Arc::new(move |mstack: &mut MeasurementStack| {
        let mut bits = 0u8;
        // First pop is q.0's bit.
        for j in 0..WIDTH {
            if mstack.pop()? {
                bits |= 1 << j;
            }
        }
        mstack.push(table.decode(bits));
        Ok(())
    })
}

/// The |0_L> preparation circuit. The three generator rows of the check
/// matrix have pivots at qubits 0, 1, and 3; each pivot goes to |+> and
/// fans out to the other positions of its row.
fn encoding_circuit(phys: &[QubitId]) -> Vec<Instruction> {
    let h = |j: usize| Instruction::Gate(GateApplication::new("h", [], [phys[j].clone()]));
    let cx = |c: usize, t: usize| {
        Instruction::Gate(GateApplication::new(
            "cx",
            [],
            [phys[c].clone(), phys[t].clone()],
        ))
    };
    vec![
        h(0),
        h(1),
        h(3),
        // row 1010101, pivot 0
        cx(0, 2),
        cx(0, 4),
        cx(0, 6),
        // row 0110011, pivot 1
        cx(1, 2),
        cx(1, 5),
        cx(1, 6),
        // row 0001111, pivot 3
        cx(3, 4),
        cx(3, 5),
        cx(3, 6),
    ]
}

/// The Steane code pass (`steane`).
pub fn steane() -> Pass {
    let s_handler: Handler = Arc::new(|g: &GateApplication, ctx: &ExpansionCtx| {
        g.targets
            .iter()
            .flat_map(|t| ctx.physical(t))
            .flat_map(|q| {
                [
                    Instruction::Gate(GateApplication::new("z", [], [q.clone()])),
                    Instruction::Gate(GateApplication::new("s", [], [q])),
                ]
            })
            .collect()
    });
    let mut handlers: BTreeMap<String, Handler> = BTreeMap::new();
    for gate in CLIFFORD_GATES {
        handlers.insert(gate.to_string(), transversal_handler());
    }
    handlers.insert("s".to_string(), s_handler);
    Pass::new(
        "steane",
        "cliffords",
        "cliffords",
        handlers,
        QubitExpansion::new(
            WIDTH,
            Arc::new(|phys: &[QubitId]| encoding_circuit(phys)),
            Arc::new(|_| Vec::new()),
        ),
        syndrome_decode(),
    )
}
