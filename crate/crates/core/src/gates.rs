//! Gate sets, unitary construction, and phase-insensitive equivalence.
//!
//! A [`GateSet`] is a named collection of [`GateDefinition`]s. Fixed gates
//! carry their unitary directly; parameterized gates carry a factory that
//! builds the matrix from a parameter list. Four sets ship built in:
//!
//! * `toy` — `flip`, `mix`, `entangle`; a pedagogical set whose matrices
//!   equal `x`, `h`, `cx` exactly.
//! * `cliffords` — `x`, `y`, `z`, `s`, `h`, `cx`, `cz`; the standard
//!   intermediate set compiler passes are written against.
//! * `trapped-ion` — `u1(theta, phi)`, `rz(lambda)`, `zz`.
//! * `neutral-atom` — `rz(lambda)`, `sx`, `cz`.
//!
//! Matrix conventions: row-major, and the first target qubit of a gate is
//! the most significant bit of the gate's local basis ordering (so the
//! `cx` matrix treats its first target as the control).

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

/// Tolerance within which every gate matrix must be unitary.
pub const UNITARY_TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// A small dense complex matrix, row-major. Gate matrices here are at most
/// 4x4; oracle tests build modest products and Kronecker lifts on top.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![Complex64::default(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, cr(1.0));
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let dim = rows.len();
        let mut m = Matrix::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (col, v) in row.iter().enumerate() {
                m.set(r, col, *v);
            }
        }
        m
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Matrix::zeros(entries.len());
        for (i, v) in entries.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let mut out = Matrix::zeros(self.dim);
        for r in 0..self.dim {
            for k in 0..self.dim {
                let a = self.get(r, k);
                if a == Complex64::default() {
                    continue;
                }
                for col in 0..self.dim {
                    let v = out.get(r, col) + a * rhs.get(k, col);
                    out.set(r, col, v);
                }
            }
        }
        out
    }

    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let dim = self.dim * rhs.dim;
        let mut out = Matrix::zeros(dim);
        for ar in 0..self.dim {
            for ac in 0..self.dim {
                let a = self.get(ar, ac);
                for br in 0..rhs.dim {
                    for bc in 0..rhs.dim {
                        out.set(ar * rhs.dim + br, ac * rhs.dim + bc, a * rhs.get(br, bc));
                    }
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        for r in 0..self.dim {
            for col in 0..self.dim {
                out.set(col, r, self.get(r, col).conj());
            }
        }
        out
    }

    pub fn scaled(&self, z: Complex64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * z).collect(),
        }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.dagger()
            .matmul(self)
            .max_abs_diff(&Matrix::identity(self.dim))
            <= tol
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|col| {
                    let v = self.get(r, col);
                    format!("{:.4}{:+.4}i", v.re, v.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Debug, Error)]
pub enum GateSetError {
    #[error("unknown gate set `{0}`")]
    UnknownGateSet(String),
    #[error("unknown gate `{gate}` in gate set `{gateset}`")]
    UnknownGate { gateset: String, gate: String },
    #[error("gate `{gate}` expects {expected} parameter(s), got {got}")]
    ParamArity {
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("bad gate set definition: {0}")]
    BadDefinition(String),
}

type Factory = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

#[derive(Clone)]
enum GateKind {
    Fixed(Matrix),
    Factory(Factory),
}

/// A named unitary (or parameterized unitary factory) with a target count.
#[derive(Clone)]
pub struct GateDefinition {
    pub name: String,
    pub arity: usize,
    pub param_count: usize,
    kind: GateKind,
}

impl GateDefinition {
    /// A fixed gate. The matrix must be `2^arity` on a side and unitary.
    pub fn fixed(name: impl Into<String>, arity: usize, matrix: Matrix) -> Self {
        assert_eq!(matrix.dim(), 1 << arity, "matrix size must be 2^arity");
        debug_assert!(matrix.is_unitary(UNITARY_TOL));
        GateDefinition {
            name: name.into(),
            arity,
            param_count: 0,
            kind: GateKind::Fixed(matrix),
        }
    }

    /// A parameterized gate backed by a matrix factory.
    pub fn parameterized(
        name: impl Into<String>,
        arity: usize,
        param_count: usize,
        factory: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        GateDefinition {
            name: name.into(),
            arity,
            param_count,
            kind: GateKind::Factory(Arc::new(factory)),
        }
    }

    /// The gate's unitary for the given parameters.
    pub fn unitary(&self, params: &[f64]) -> Result<Matrix, GateSetError> {
        if params.len() != self.param_count {
            return Err(GateSetError::ParamArity {
                gate: self.name.clone(),
                expected: self.param_count,
                got: params.len(),
            });
        }
        Ok(match &self.kind {
            GateKind::Fixed(m) => m.clone(),
            GateKind::Factory(f) => f(params),
        })
    }
}

impl fmt::Debug for GateDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "GateDefinition({}/{} params={})",
            self.name, self.arity, self.param_count
        )
    }
}

/// A named collection of gate definitions.
#[derive(Clone, Debug)]
pub struct GateSet {
    pub name: String,
    defs: BTreeMap<String, GateDefinition>,
}

impl GateSet {
    pub fn new(name: impl Into<String>) -> Self {
        GateSet {
            name: name.into(),
            defs: BTreeMap::new(),
        }
    }

    /// Adds a definition. `done` is reserved for the default callback and
    /// cannot name a gate.
    pub fn insert(&mut self, def: GateDefinition) {
        assert_ne!(def.name, crate::ir::DONE, "`done` is not a gate name");
        self.defs.insert(def.name.clone(), def);
    }

    pub fn get(&self, gate: &str) -> Option<&GateDefinition> {
        self.defs.get(gate)
    }

    pub fn contains(&self, gate: &str) -> bool {
        self.defs.contains_key(gate)
    }

    pub fn gate_names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Loads a gate set from its JSON description:
    ///
    /// ```json
    /// {"name": "custom", "gates": [
    ///     {"name": "x", "arity": 1, "params": 0,
    ///      "matrix": [[[0,0],[1,0]], [[1,0],[0,0]]]},
    ///     {"name": "rz", "arity": 1, "params": 1, "factory": "rz"}
    /// ]}
    /// ```
    ///
    /// Matrix entries are `[re, im]` pairs. Factories are limited to the
    /// built-in ids `u1`, `rz`, and `zz`.
    pub fn from_json(text: &str) -> Result<GateSet, GateSetError> {
        let file: GateSetFile =
            serde_json::from_str(text).map_err(|e| GateSetError::BadDefinition(e.to_string()))?;
        let mut set = GateSet::new(file.name);
        for g in file.gates {
            let def = match (g.matrix, g.factory) {
                (Some(rows), None) => {
                    let dim = 1usize << g.arity;
                    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                        return Err(GateSetError::BadDefinition(format!(
                            "gate `{}`: matrix must be {dim}x{dim}",
                            g.name
                        )));
                    }
                    if g.params != 0 {
                        return Err(GateSetError::BadDefinition(format!(
                            "gate `{}`: fixed matrices take no parameters",
                            g.name
                        )));
                    }
                    let m = Matrix::from_rows(
                        &rows
                            .iter()
                            .map(|r| r.iter().map(|[re, im]| c(*re, *im)).collect())
                            .collect::<Vec<_>>(),
                    );
                    if !m.is_unitary(UNITARY_TOL) {
                        return Err(GateSetError::BadDefinition(format!(
                            "gate `{}`: matrix is not unitary",
                            g.name
                        )));
                    }
                    GateDefinition::fixed(g.name, g.arity, m)
                }
                (None, Some(factory)) => match factory.as_str() {
                    "u1" => GateDefinition::parameterized(g.name, 1, 2, |p| mat_u1(p[0], p[1])),
                    "rz" => GateDefinition::parameterized(g.name, 1, 1, |p| mat_rz(p[0])),
                    "zz" => GateDefinition::fixed(g.name, 2, mat_zz()),
                    other => {
                        return Err(GateSetError::BadDefinition(format!(
                            "unknown factory `{other}` (expected u1, rz, or zz)"
                        )))
                    }
                },
                _ => {
                    return Err(GateSetError::BadDefinition(format!(
                        "gate `{}`: exactly one of `matrix` or `factory` is required",
                        g.name
                    )))
                }
            };
            set.insert(def);
        }
        Ok(set)
    }
}

#[derive(Deserialize)]
struct GateSetFile {
    name: String,
    gates: Vec<GateFileEntry>,
}

#[derive(Deserialize)]
struct GateFileEntry {
    name: String,
    arity: usize,
    #[serde(default)]
    params: usize,
    #[serde(default)]
    matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    factory: Option<String>,
}

pub fn mat_x() -> Matrix {
    Matrix::from_rows(&[vec![cr(0.0), cr(1.0)], vec![cr(1.0), cr(0.0)]])
}

pub fn mat_y() -> Matrix {
    Matrix::from_rows(&[vec![cr(0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), cr(0.0)]])
}

pub fn mat_z() -> Matrix {
    Matrix::diagonal(&[cr(1.0), cr(-1.0)])
}

pub fn mat_s() -> Matrix {
    Matrix::diagonal(&[cr(1.0), c(0.0, 1.0)])
}

pub fn mat_h() -> Matrix {
    let r2 = FRAC_1_SQRT_2;
    Matrix::from_rows(&[vec![cr(r2), cr(r2)], vec![cr(r2), cr(-r2)]])
}

pub fn mat_cx() -> Matrix {
    Matrix::from_rows(&[
        vec![cr(1.0), cr(0.0), cr(0.0), cr(0.0)],
        vec![cr(0.0), cr(1.0), cr(0.0), cr(0.0)],
        vec![cr(0.0), cr(0.0), cr(0.0), cr(1.0)],
        vec![cr(0.0), cr(0.0), cr(1.0), cr(0.0)],
    ])
}

pub fn mat_cz() -> Matrix {
    Matrix::diagonal(&[cr(1.0), cr(1.0), cr(1.0), cr(-1.0)])
}

/// `sx = (1/2) [[1+i, 1-i], [1-i, 1+i]]`; `sx . sx = x` exactly.
pub fn mat_sx() -> Matrix {
    Matrix::from_rows(&[
        vec![c(0.5, 0.5), c(0.5, -0.5)],
        vec![c(0.5, -0.5), c(0.5, 0.5)],
    ])
}

/// `u1(theta, phi)`: rotation by `theta` about the Bloch axis
/// `cos(phi) X + sin(phi) Y`. `u1(pi, 0)` equals `x` up to global phase.
pub fn mat_u1(theta: f64, phi: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    Matrix::from_rows(&[
        vec![cr(co), c(0.0, -1.0) * c(phi.cos(), -phi.sin()) * cr(s)],
        vec![c(0.0, -1.0) * c(phi.cos(), phi.sin()) * cr(s), cr(co)],
    ])
}

/// `rz(lambda) = diag(e^{-i lambda/2}, e^{i lambda/2})`.
pub fn mat_rz(lambda: f64) -> Matrix {
    let half = lambda / 2.0;
    Matrix::diagonal(&[c(half.cos(), -half.sin()), c(half.cos(), half.sin())])
}

/// `zz = exp(-i (pi/4) Z (x) Z)`.
pub fn mat_zz() -> Matrix {
    let p = c(FRAC_PI_4.cos(), -FRAC_PI_4.sin());
    let m = c(FRAC_PI_4.cos(), FRAC_PI_4.sin());
    Matrix::diagonal(&[p, m, m, p])
}

fn toy() -> GateSet {
    // Matrices chosen equal to the Clifford images, so translation is
    // semantics-preserving by construction.
    let mut set = GateSet::new("toy");
    set.insert(GateDefinition::fixed("flip", 1, mat_x()));
    set.insert(GateDefinition::fixed("mix", 1, mat_h()));
    set.insert(GateDefinition::fixed("entangle", 2, mat_cx()));
    set
}

fn cliffords() -> GateSet {
    let mut set = GateSet::new("cliffords");
    set.insert(GateDefinition::fixed("x", 1, mat_x()));
    set.insert(GateDefinition::fixed("y", 1, mat_y()));
    set.insert(GateDefinition::fixed("z", 1, mat_z()));
    set.insert(GateDefinition::fixed("s", 1, mat_s()));
    set.insert(GateDefinition::fixed("h", 1, mat_h()));
    set.insert(GateDefinition::fixed("cx", 2, mat_cx()));
    set.insert(GateDefinition::fixed("cz", 2, mat_cz()));
    set
}

fn trapped_ion() -> GateSet {
    let mut set = GateSet::new("trapped-ion");
    set.insert(GateDefinition::parameterized("u1", 1, 2, |p| {
        mat_u1(p[0], p[1])
    }));
    set.insert(GateDefinition::parameterized("rz", 1, 1, |p| mat_rz(p[0])));
    set.insert(GateDefinition::fixed("zz", 2, mat_zz()));
    set
}

fn neutral_atom() -> GateSet {
    let mut set = GateSet::new("neutral-atom");
    set.insert(GateDefinition::parameterized("rz", 1, 1, |p| mat_rz(p[0])));
    set.insert(GateDefinition::fixed("sx", 1, mat_sx()));
    set.insert(GateDefinition::fixed("cz", 2, mat_cz()));
    set
}

/// Returns a built-in gate set: `toy`, `cliffords`, `trapped-ion`, or
/// `neutral-atom`.
pub fn builtin_gateset(name: &str) -> Result<GateSet, GateSetError> {
    match name {
        "toy" => Ok(toy()),
        "cliffords" => Ok(cliffords()),
        "trapped-ion" => Ok(trapped_ion()),
        "neutral-atom" => Ok(neutral_atom()),
        other => Err(GateSetError::UnknownGateSet(other.to_string())),
    }
}

/// The unitary of `gate` in `set`, for the given parameters.
pub fn unitary_of(set: &GateSet, gate: &str, params: &[f64]) -> Result<Matrix, GateSetError> {
    let def = set.get(gate).ok_or_else(|| GateSetError::UnknownGate {
        gateset: set.name.clone(),
        gate: gate.to_string(),
    })?;
    def.unitary(params)
}

/// True iff `u = e^{i a} v` for some phase, within `tol` in the entrywise
/// max norm. The candidate phase is read off the largest-magnitude entry
/// of `v`.
pub fn equivalent_up_to_phase(u: &Matrix, v: &Matrix, tol: f64) -> Result<bool, GateSetError> {
    if u.dim() != v.dim() {
        return Err(GateSetError::DimensionMismatch(u.dim(), v.dim()));
    }
    let mut best = (0usize, 0usize);
    let mut best_norm = -1.0f64;
    for r in 0..v.dim() {
        for col in 0..v.dim() {
            let n = v.get(r, col).norm();
            if n > best_norm {
                best_norm = n;
                best = (r, col);
            }
        }
    }
    if best_norm == 0.0 {
        return Ok(u.max_abs_diff(v) <= tol);
    }
    let ratio = u.get(best.0, best.1) / v.get(best.0, best.1);
    if ratio.norm() == 0.0 {
        return Ok(false);
    }
    let phase = ratio / ratio.norm();
    Ok(u.max_abs_diff(&v.scaled(phase)) <= tol)
}
