//! Dense-semantics state vector over a factored sparse representation.
//!
//! Logically a [`StateVector`] is a complex vector of length `2^n`:
//! position 0 is the least significant bit of the amplitude index, and a
//! newly allocated qubit is appended as the most significant bit. That is
//! exactly what [`StateVector::amplitudes`] returns.
//!
//! Internally the state is held as a tensor product of factors, one per
//! entangled cluster of qubits, with each factor a sparse map from basis
//! index to amplitude. Gates that span factors merge them; measuring the
//! top qubit collapses only its own factor. Programs whose entanglement
//! stays in small clusters therefore evaluate in time proportional to the
//! cluster size rather than `2^n`, which is what makes deeply concatenated
//! error-correction encodings affordable to emulate.
//!
//! All iteration is over ordered maps, so amplitude arithmetic happens in
//! a fixed order and runs are bit-for-bit reproducible.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::gates::Matrix;

/// Amplitudes below this magnitude are dropped when rebuilding a factor.
const AMP_CUTOFF: f64 = 1e-15;

#[derive(Clone, PartialEq, Debug, Error)]
pub enum StateError {
    #[error("qubit position {0} out of range (state has {1} qubits)")]
    PositionOutOfRange(usize, usize),
    #[error("duplicate qubit position {0} in gate application")]
    DuplicatePosition(usize),
    #[error("gate matrix is {got}x{got} but {targets} target(s) need {need}x{need}")]
    DimensionMismatch {
        got: usize,
        targets: usize,
        need: usize,
    },
    #[error("only the most significant qubit can be measured (asked {0}, top is {1})")]
    NotTopQubit(usize, usize),
    #[error("state has no qubits to measure")]
    Empty,
}

#[derive(Clone, Debug)]
struct Factor {
    /// Global qubit positions covered by this factor, ascending. Local bit
    /// `k` of an amplitude index corresponds to `positions[k]`.
    positions: Vec<usize>,
    amps: BTreeMap<u64, Complex64>,
}

impl Factor {
    fn singleton(position: usize) -> Self {
        Factor {
            positions: vec![position],
            amps: BTreeMap::from([(0, Complex64::new(1.0, 0.0))]),
        }
    }

    fn local_bit(&self, position: usize) -> usize {
        self.positions
            .binary_search(&position)
            .expect("position not in factor")
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Tensor product; positions stay sorted, amplitudes multiply.
    fn merge(&self, other: &Factor) -> Factor {
        let mut positions: Vec<usize> = self
            .positions
            .iter()
            .chain(&other.positions)
            .copied()
            .collect();
        positions.sort_unstable();
        let mut amps = BTreeMap::new();
        for (&ia, &aa) in &self.amps {
            for (&ib, &ab) in &other.amps {
                let mut idx = 0u64;
                for (k, &p) in positions.iter().enumerate() {
                    let bit = match self.positions.binary_search(&p) {
                        Ok(j) => (ia >> j) & 1,
                        Err(_) => (ib >> other.local_bit(p)) & 1,
                    };
                    idx |= bit << k;
                }
                amps.insert(idx, aa * ab);
            }
        }
        Factor { positions, amps }
    }
}

/// See the module docs. `n` qubits, norm 1 within 1e-9 at step boundaries.
#[derive(Clone, Debug, Default)]
pub struct StateVector {
    n: usize,
    factors: Vec<Factor>,
}

impl StateVector {
    /// A state with no qubits (the scalar 1).
    pub fn new() -> Self {
        Self::default()
    }

    /// `n` qubits all in |0>.
    pub fn zeros(n: usize) -> Self {
        let mut s = Self::new();
        for _ in 0..n {
            s.push_qubit();
        }
        s
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    /// Appends one fresh qubit in |0> as the new most significant position.
    pub fn push_qubit(&mut self) {
        self.factors.push(Factor::singleton(self.n));
        self.n += 1;
    }

    /// Applies `u` at `positions`; `positions[0]` is the most significant
    /// bit of the gate's local ordering, matching gate-target order.
    pub fn apply(&mut self, u: &Matrix, positions: &[usize]) -> Result<(), StateError> {
        let k = positions.len();
        if u.dim() != (1 << k) {
            return Err(StateError::DimensionMismatch {
                got: u.dim(),
                targets: k,
                need: 1 << k,
            });
        }
        for (i, &p) in positions.iter().enumerate() {
            if p >= self.n {
                return Err(StateError::PositionOutOfRange(p, self.n));
            }
            if positions[..i].contains(&p) {
                return Err(StateError::DuplicatePosition(p));
            }
        }
        let f = self.merge_covering(positions);
        let factor = &mut self.factors[f];
        // Local bit of each gate target inside the (merged) factor.
        let local: Vec<usize> = positions.iter().map(|&p| factor.local_bit(p)).collect();
        let mut spectators: BTreeMap<u64, Vec<Complex64>> = BTreeMap::new();
        let dim = 1usize << k;
        let mut clear_mask = 0u64;
        for &lb in &local {
            clear_mask |= 1 << lb;
        }
        for (&idx, &amp) in &factor.amps {
            // positions[0] = most significant local gate bit.
            let mut gate_index = 0usize;
            for (j, &lb) in local.iter().enumerate() {
                if (idx >> lb) & 1 == 1 {
                    gate_index |= 1 << (k - 1 - j);
                }
            }
            let base = idx & !clear_mask;
            spectators
                .entry(base)
                .or_insert_with(|| vec![Complex64::default(); dim])[gate_index] += amp;
        }
        let mut amps = BTreeMap::new();
        for (base, column) in spectators {
            for row in 0..dim {
                let mut out = Complex64::default();
                for (col, &a) in column.iter().enumerate() {
                    if a != Complex64::default() {
                        out += u.get(row, col) * a;
                    }
                }
                if out.norm_sqr() > AMP_CUTOFF * AMP_CUTOFF {
                    let mut idx = base;
                    for (j, &lb) in local.iter().enumerate() {
                        if (row >> (k - 1 - j)) & 1 == 1 {
                            idx |= 1 << lb;
                        }
                    }
                    amps.insert(idx, out);
                }
            }
        }
        factor.amps = amps;
        Ok(())
    }

    /// The probability of measuring 1 at the most significant position.
    pub fn prob_one_top(&self) -> Result<f64, StateError> {
        if self.n == 0 {
            return Err(StateError::Empty);
        }
        let top = self.n - 1;
        let f = self
            .factors
            .iter()
            .find(|f| f.positions.contains(&top))
            .expect("top qubit has a factor");
        let lb = f.local_bit(top);
        let p1: f64 = f
            .amps
            .iter()
            .filter(|(idx, _)| (*idx >> lb) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        // The factor is kept normalized, but guard against drift.
        Ok((p1 / f.norm_sqr()).clamp(0.0, 1.0))
    }

    /// Collapses the most significant qubit to `outcome`, renormalizes, and
    /// removes the qubit from the state (`n` decreases by one).
    pub fn collapse_drop_top(&mut self, outcome: bool) -> Result<(), StateError> {
        if self.n == 0 {
            return Err(StateError::Empty);
        }
        let top = self.n - 1;
        let fi = self
            .factors
            .iter()
            .position(|f| f.positions.contains(&top))
            .expect("top qubit has a factor");
        let factor = &mut self.factors[fi];
        let lb = factor.local_bit(top);
        let want = outcome as u64;
        let mut kept = BTreeMap::new();
        let mut mass = 0.0;
        let low_mask = (1u64 << lb) - 1;
        for (&idx, &amp) in &factor.amps {
            if (idx >> lb) & 1 == want {
                let squeezed = (idx & low_mask) | ((idx >> (lb + 1)) << lb);
                kept.insert(squeezed, amp);
                mass += amp.norm_sqr();
            }
        }
        debug_assert!(mass > 0.0, "collapse onto a zero-probability branch");
        let scale = Complex64::new(1.0 / mass.sqrt(), 0.0);
        factor.amps = kept.into_iter().map(|(i, a)| (i, a * scale)).collect();
        factor.positions.remove(lb);
        if factor.positions.is_empty() {
            self.factors.remove(fi);
        }
        self.n -= 1;
        Ok(())
    }

    /// Squared norm of the full state (product over factors).
    pub fn norm_sqr(&self) -> f64 {
        self.factors.iter().map(Factor::norm_sqr).product()
    }

    /// Largest deviation of any factor's squared norm from 1. Zero factors
    /// (no qubits) give 0.
    pub fn max_norm_deviation(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| (f.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Materializes the dense amplitude vector of length `2^n`. Intended
    /// for oracles, tests, and small states; panics above 24 qubits.
    pub fn amplitudes(&self) -> Vec<Complex64> {
        assert!(self.n <= 24, "amplitudes() is for small states");
        let mut dense = vec![Complex64::new(1.0, 0.0)];
        let mut covered: Vec<usize> = Vec::new();
        for f in &self.factors {
            let mut next = vec![Complex64::default(); dense.len() << f.positions.len()];
            let mut merged: Vec<usize> = covered.iter().chain(&f.positions).copied().collect();
            merged.sort_unstable();
            for (done_idx, amp) in dense.iter().enumerate() {
                if *amp == Complex64::default() {
                    continue;
                }
                for (&fidx, &famp) in &f.amps {
                    let mut idx = 0usize;
                    for (k, &p) in merged.iter().enumerate() {
                        let bit = match covered.binary_search(&p) {
                            Ok(j) => (done_idx >> j) & 1,
                            Err(_) => {
                                let j = f.positions.binary_search(&p).unwrap();
                                ((fidx >> j) & 1) as usize
                            }
                        };
                        idx |= bit << k;
                    }
                    next[idx] = amp * famp;
                }
            }
            dense = next;
            covered = merged;
        }
        // `covered` is now 0..n, so indices already follow global ordering.
        debug_assert_eq!(dense.len(), 1 << self.n);
        dense
    }

    fn merge_covering(&mut self, positions: &[usize]) -> usize {
        let mut hit: Vec<usize> = self
            .factors
            .iter()
            .enumerate()
            .filter(|(_, f)| positions.iter().any(|p| f.positions.contains(p)))
            .map(|(i, _)| i)
            .collect();
        debug_assert!(!hit.is_empty());
        if hit.len() == 1 {
            return hit[0];
        }
        let mut merged = self.factors[hit[0]].clone();
        for &i in &hit[1..] {
            merged = merged.merge(&self.factors[i]);
        }
        // Remove from the back so earlier indices stay valid.
        hit.sort_unstable();
        for &i in hit.iter().rev() {
            self.factors.remove(i);
        }
        self.factors.push(merged);
        self.factors.len() - 1
    }
}
