//! Hardware-targeting ISA passes: Cliffords to the trapped-ion set
//! (`u1`, `rz`, `zz`) and to the neutral-atom set (`rz`, `sx`, `cz`).
//!
//! Every decomposition here equals its source gate up to global phase;
//! the unitary-oracle tests check each one by multiplying the matrices
//! out. Width 1, so no decoding and no qubit renaming.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::compile::{ExpansionCtx, Handler, Pass, QubitExpansion};
use crate::ir::{GateApplication, Instruction, Param, QubitId};

fn g1(name: &str, params: &[f64], target: &QubitId) -> Instruction {
    Instruction::Gate(GateApplication::new(
        name,
        params.iter().map(|p| Param::new(*p)),
        [target.clone()],
    ))
}

fn g2(name: &str, a: &QubitId, b: &QubitId) -> Instruction {
    Instruction::Gate(GateApplication::new(name, [], [a.clone(), b.clone()]))
}

fn fixed_handler(
    f: impl Fn(&GateApplication) -> Vec<Instruction> + Send + Sync + 'static,
) -> Handler {
    Arc::new(move |g: &GateApplication, _: &ExpansionCtx| f(g))
}

/// `h` on the trapped-ion set: a half-turn about X-Y followed by `rz(pi)`.
fn ion_h(q: &QubitId) -> Vec<Instruction> {
    vec![g1("u1", &[FRAC_PI_2, -FRAC_PI_2], q), g1("rz", &[PI], q)]
}

/// `cz` on the trapped-ion set: the `zz` interaction plus a `-pi/2` z
/// rotation on each qubit.
fn ion_cz(a: &QubitId, b: &QubitId) -> Vec<Instruction> {
    vec![
        g2("zz", a, b),
        g1("rz", &[-FRAC_PI_2], a),
        g1("rz", &[-FRAC_PI_2], b),
    ]
}

/// The Cliffords-to-trapped-ion pass (`h2`).
pub fn cliffords_to_trapped_ion() -> Pass {
    let mut handlers: BTreeMap<String, Handler> = BTreeMap::new();
    handlers.insert(
        "x".into(),
        fixed_handler(|g| vec![g1("u1", &[PI, 0.0], &g.targets[0])]),
    );
    handlers.insert(
        "y".into(),
        fixed_handler(|g| vec![g1("u1", &[PI, FRAC_PI_2], &g.targets[0])]),
    );
    handlers.insert(
        "z".into(),
        fixed_handler(|g| vec![g1("rz", &[PI], &g.targets[0])]),
    );
    handlers.insert(
        "s".into(),
        fixed_handler(|g| vec![g1("rz", &[FRAC_PI_2], &g.targets[0])]),
    );
    handlers.insert("h".into(), fixed_handler(|g| ion_h(&g.targets[0])));
    handlers.insert(
        "cx".into(),
        fixed_handler(|g| {
            // Conjugate cz by h on the target.
            let (c, t) = (&g.targets[0], &g.targets[1]);
            let mut out = ion_h(t);
            out.extend(ion_cz(c, t));
            out.extend(ion_h(t));
            out
        }),
    );
    handlers.insert(
        "cz".into(),
        fixed_handler(|g| ion_cz(&g.targets[0], &g.targets[1])),
    );
    Pass::new(
        "h2",
        "cliffords",
        "trapped-ion",
        handlers,
        QubitExpansion::identity(),
        Arc::new(|_| Ok(())),
    )
}

/// `h` on the neutral-atom set: `rz(pi/2) sx rz(pi/2)`.
fn atom_h(q: &QubitId) -> Vec<Instruction> {
    vec![
        g1("rz", &[FRAC_PI_2], q),
        g1("sx", &[], q),
        g1("rz", &[FRAC_PI_2], q),
    ]
}

/// The Cliffords-to-neutral-atom pass (`na`).
pub fn cliffords_to_neutral_atom() -> Pass {
    let mut handlers: BTreeMap<String, Handler> = BTreeMap::new();
    handlers.insert(
        "x".into(),
        fixed_handler(|g| {
            let q = &g.targets[0];
            vec![g1("sx", &[], q), g1("sx", &[], q)]
        }),
    );
    handlers.insert(
        "y".into(),
        fixed_handler(|g| {
            let q = &g.targets[0];
            vec![g1("rz", &[PI], q), g1("sx", &[], q), g1("sx", &[], q)]
        }),
    );
    handlers.insert(
        "z".into(),
        fixed_handler(|g| vec![g1("rz", &[PI], &g.targets[0])]),
    );
    handlers.insert(
        "s".into(),
        fixed_handler(|g| vec![g1("rz", &[FRAC_PI_2], &g.targets[0])]),
    );
    handlers.insert("h".into(), fixed_handler(|g| atom_h(&g.targets[0])));
    handlers.insert(
        "cx".into(),
        fixed_handler(|g| {
            let (c, t) = (&g.targets[0], &g.targets[1]);
            let mut out = atom_h(t);
            out.push(g2("cz", c, t));
            out.extend(atom_h(t));
            out
        }),
    );
    handlers.insert(
        "cz".into(),
        fixed_handler(|g| vec![g2("cz", &g.targets[0], &g.targets[1])]),
    );
    Pass::new(
        "na",
        "cliffords",
        "neutral-atom",
        handlers,
        QubitExpansion::identity(),
        Arc::new(|_| Ok(())),
    )
}
