//! Shared test oracles. Everything here is computed independently of the
//! library's evaluation path: gates are lifted by explicit Kronecker
//! products with a basis permutation (or a direct dense gather/scatter),
//! and encoded states are enumerated from the code's generator rows.

#![allow(dead_code)]

use num_complex::Complex64;

use qk_core::{
    ChaChaSource, GateApplication, Instruction, Kernel, Matrix, Program, QubitId, UniformSource,
};

/// Builds the full `2^n x 2^n` operator applying `u` at `positions`
/// (`positions[0]` = most significant gate bit) as `P^dagger (u (x) I) P`,
/// where `P` permutes the gate qubits to the top slots.
pub fn lifted_operator(u: &Matrix, positions: &[usize], n: usize) -> Matrix {
    let k = positions.len();
    let dim = 1usize << n;
    let mut big = u.clone();
    for _ in 0..(n - k) {
        big = big.kron(&Matrix::identity(2));
    }
    // Slot order, most significant first: gate targets, then the remaining
    // positions in descending order.
    let mut slots: Vec<usize> = positions.to_vec();
    let mut rest: Vec<usize> = (0..n).filter(|p| !positions.contains(p)).collect();
    rest.sort_unstable_by(|a, b| b.cmp(a));
    slots.extend(rest);
    let mut perm = Matrix::zeros(dim);
    for g in 0..dim {
        let mut p = 0usize;
        for (slot, &pos) in slots.iter().enumerate() {
            if g >> pos & 1 == 1 {
                p |= 1 << (n - 1 - slot);
            }
        }
        perm.set(p, g, Complex64::new(1.0, 0.0));
    }
    perm.dagger().matmul(&big).matmul(&perm)
}

/// Matrix-free dense application of `u` at `positions` on a `2^n` vector.
pub fn dense_apply(state: &mut Vec<Complex64>, u: &Matrix, positions: &[usize]) {
    let k = positions.len();
    let mut out = vec![Complex64::default(); state.len()];
    for (idx, amp) in state.iter().enumerate() {
        if *amp == Complex64::default() {
            continue;
        }
        let mut lcol = 0usize;
        for (j, &p) in positions.iter().enumerate() {
            if idx >> p & 1 == 1 {
                lcol |= 1 << (k - 1 - j);
            }
        }
        for lrow in 0..(1usize << k) {
            let m = u.get(lrow, lcol);
            if m == Complex64::default() {
                continue;
            }
            let mut row = idx;
            for (j, &p) in positions.iter().enumerate() {
                row &= !(1 << p);
                if lrow >> (k - 1 - j) & 1 == 1 {
                    row |= 1 << p;
                }
            }
            out[row] += m * amp;
        }
    }
    *state = out;
}

/// Applies a list of gate instructions to a dense vector using the oracle
/// applier. `position_of` maps qubit names to positions.
pub fn dense_apply_gates(
    state: &mut Vec<Complex64>,
    gates: &[Instruction],
    gateset: &qk_core::GateSet,
    position_of: &dyn Fn(&QubitId) -> usize,
) {
    for inst in gates {
        let Instruction::Gate(g) = inst else {
            panic!("oracle applier handles flat gate lists only");
        };
        let params: Vec<f64> = g.params.iter().map(|p| p.value()).collect();
        let u = qk_core::unitary_of(gateset, &g.gate, &params).unwrap();
        let positions: Vec<usize> = g.targets.iter().map(position_of).collect();
        dense_apply(state, &u, &positions);
    }
}

pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// 1 - |<a|b>| for normalized vectors: 0 iff equal up to global phase.
pub fn phase_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    1.0 - inner_product(a, b).norm()
}

/// The sixteen 7-bit Hamming codewords (bit `j` of a word = qubit `q.j`),
/// enumerated from the generator rows; row `r` has a one at `j` when bit
/// `r` of `j + 1` is set.
pub fn hamming_codewords() -> Vec<u8> {
    let mut rows = [0u8; 3];
    for j in 0..7 {
        for (r, row) in rows.iter_mut().enumerate() {
            if (j + 1) >> r & 1 == 1 {
                *row |= 1 << j;
            }
        }
    }
    let even: Vec<u8> = (0..8u8)
        .map(|k| {
            (0..3)
                .filter(|r| k >> r & 1 == 1)
                .fold(0, |acc, r| acc ^ rows[r])
        })
        .collect();
    let mut all = even.clone();
    all.extend(even.iter().map(|c| c ^ 0b111_1111));
    all.sort_unstable();
    all
}

/// Dense 128-vector of the encoded basis state |b_L> of the seven-qubit
/// code: the uniform superposition of even-weight codewords, shifted by
/// the all-ones word for b = 1.
pub fn steane_logical(b: bool) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); 128];
    let amp = Complex64::new(1.0 / (8.0f64).sqrt(), 0.0);
    for c in hamming_codewords() {
        let word = if b { c ^ 0b111_1111 } else { c };
        if word.count_ones() % 2 == (b as u32) {
            out[word as usize] = amp;
        }
    }
    out
}

/// Tensor product of dense vectors; `a` supplies the most significant bits.
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); a.len() * b.len()];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Total variation distance between two empirical distributions given as
/// count maps.
pub fn tvd(a: &qk_core::Histogram, b: &qk_core::Histogram) -> f64 {
    let na: f64 = a.values().sum::<u64>() as f64;
    let nb: f64 = b.values().sum::<u64>() as f64;
    let keys: std::collections::BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| {
            let pa = a.get(k).copied().unwrap_or(0) as f64 / na;
            let pb = b.get(k).copied().unwrap_or(0) as f64 / nb;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

/// Three binomial standard deviations for probability `p` over `n` trials.
pub fn three_sigma(p: f64, n: u64) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// The multi-qubit test program: three nested qubits, a mix on the middle
/// one, an entangling gate, and a conditional `fix(q1)` callback.
pub fn fullstack_program() -> Program {
    let q3 = Kernel::new(
        "q3",
        [
            GateApplication::new("mix", [], ["q2"]).into(),
            GateApplication::new("entangle", [], ["q2", "q3"]).into(),
        ],
        qk_core::CallbackRef::done(),
    );
    let q2 = Kernel::new(
        "q2",
        [Instruction::Kernel(q3)],
        qk_core::CallbackRef::new("fix", [qk_core::CallbackArg::Qubit(QubitId::new("q1"))]),
    );
    Program::new(
        "toy",
        Kernel::new(
            "q1",
            [Instruction::Kernel(q2)],
            qk_core::CallbackRef::done(),
        ),
    )
}

/// Deterministic generator of small well-formed Cliffords programs:
/// nesting depth at most 4, at most 6 qubits, `done` callbacks.
pub struct ProgramGen {
    rng: ChaChaSource,
    next_qubit: usize,
}

impl ProgramGen {
    pub fn new(seed: u64) -> Self {
        ProgramGen {
            rng: ChaChaSource::seeded(seed),
            next_qubit: 0,
        }
    }

    fn choose(&mut self, n: usize) -> usize {
        (self.rng.next_unit() * n as f64) as usize % n
    }

    pub fn program(&mut self) -> Program {
        self.next_qubit = 0;
        let mut budget = 5; // nested kernels beyond the root
        let root = self.kernel(&mut Vec::new(), &mut budget, 1);
        Program::new("cliffords", root)
    }

    fn fresh(&mut self) -> QubitId {
        let q = QubitId::new(format!("r{}", self.next_qubit));
        self.next_qubit += 1;
        q
    }

    fn kernel(&mut self, scope: &mut Vec<QubitId>, budget: &mut usize, depth: usize) -> Kernel {
        let qubit = self.fresh();
        scope.push(qubit.clone());
        let mut body = Vec::new();
        let items = self.choose(4);
        for _ in 0..items {
            let nest = depth < 4 && *budget > 0 && self.choose(3) == 0;
            if nest {
                *budget -= 1;
                let k = self.kernel(scope, budget, depth + 1);
                body.push(Instruction::Kernel(k));
            } else {
                body.push(Instruction::Gate(self.gate(scope)));
            }
        }
        scope.pop();
        Kernel::new(qubit, body, qk_core::CallbackRef::done())
    }

    fn gate(&mut self, scope: &[QubitId]) -> GateApplication {
        let two_qubit_ok = scope.len() >= 2;
        let names: &[&str] = if two_qubit_ok {
            &["x", "y", "z", "s", "h", "cx", "cz"]
        } else {
            &["x", "y", "z", "s", "h"]
        };
        let name = names[self.choose(names.len())];
        let arity = if name == "cx" || name == "cz" { 2 } else { 1 };
        let mut targets = Vec::new();
        while targets.len() < arity {
            let q = scope[self.choose(scope.len())].clone();
            if !targets.contains(&q) {
                targets.push(q);
            }
        }
        GateApplication::new(name, [], targets)
    }
}

/// Records every sample it hands out.
pub struct RecordingSource {
    inner: ChaChaSource,
    pub log: Vec<f64>,
}

impl RecordingSource {
    pub fn seeded(seed: u64) -> Self {
        RecordingSource {
            inner: ChaChaSource::seeded(seed),
            log: Vec::new(),
        }
    }
}

impl UniformSource for RecordingSource {
    fn next_unit(&mut self) -> f64 {
        let u = self.inner.next_unit();
        self.log.push(u);
        u
    }
}

/// Replays a recorded sample stream with each value repeated `times`.
pub struct RepeatingSource {
    values: Vec<f64>,
    times: usize,
    cursor: usize,
}

impl RepeatingSource {
    pub fn new(values: Vec<f64>, times: usize) -> Self {
        RepeatingSource {
            values,
            times,
            cursor: 0,
        }
    }
}

impl UniformSource for RepeatingSource {
    fn next_unit(&mut self) -> f64 {
        let u = self.values[self.cursor / self.times];
        self.cursor += 1;
        u
    }
}

/// All gates in a kernel tree, in document order.
pub fn all_gates(kernel: &Kernel) -> Vec<GateApplication> {
    let mut out = Vec::new();
    fn walk(k: &Kernel, out: &mut Vec<GateApplication>) {
        for inst in &k.body {
            match inst {
                Instruction::Gate(g) => out.push(g.clone()),
                Instruction::Kernel(sub) => walk(sub, out),
            }
        }
    }
    walk(kernel, &mut out);
    out
}

/// Kernel allocation order (outermost first) of a fully nested tree.
pub fn allocation_order(kernel: &Kernel) -> Vec<QubitId> {
    let mut out = Vec::new();
    fn walk(k: &Kernel, out: &mut Vec<QubitId>) {
        out.push(k.qubit.clone());
        for inst in &k.body {
            if let Instruction::Kernel(sub) = inst {
                walk(sub, out);
            }
        }
    }
    walk(kernel, &mut out);
    out
}
