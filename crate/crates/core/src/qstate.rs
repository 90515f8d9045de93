//! Two-qubit density operators and their Bloch-tensor analysis.
//!
//! A two-qubit state is kept as a validated 4×4 complex matrix in the
//! computational basis |00⟩,|01⟩,|10⟩,|11⟩. The Bloch view decomposes it as
//!
//! ρ = ¼ (𝕀⊗𝕀 + a·σ⊗𝕀 + 𝕀⊗b·σ + Σᵢⱼ rᵢⱼ σᵢ⊗σⱼ)
//!
//! with local Bloch vectors `a`, `b` and the 3×3 real correlation tensor `R`.
//! Every security criterion in this crate consumes the singular values of `R`
//! only, so no local-unitary synthesis is performed anywhere.

use nalgebra::{Matrix3, Matrix4, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hermiticity / unit-trace tolerance for state validation.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Smallest eigenvalue may dip this far below zero before a state is rejected.
pub const PSD_TOL: f64 = 1e-10;

type C = Complex64;
type CMat4 = Matrix4<Complex64>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// The three Pauli matrices σ₁=X, σ₂=Y, σ₃=Z.
pub fn pauli(i: usize) -> nalgebra::Matrix2<Complex64> {
    match i {
        0 => nalgebra::Matrix2::new(c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)),
        1 => nalgebra::Matrix2::new(c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)),
        2 => nalgebra::Matrix2::new(c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)),
        _ => panic!("pauli index out of range"),
    }
}

/// σ projected on a real 3-vector: n·σ.
pub fn pauli_dot(n: &Vector3<f64>) -> nalgebra::Matrix2<Complex64> {
    let mut m = nalgebra::Matrix2::zeros();
    for i in 0..3 {
        m += pauli(i) * c(n[i], 0.);
    }
    m
}

/// Bloch-form view of a two-qubit state: local vectors and correlation tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochForm {
    /// Bloch vector of party A (the qubit kept by the hub).
    pub a: Vector3<f64>,
    /// Bloch vector of party B (the transmitted qubit).
    pub b: Vector3<f64>,
    /// Correlation tensor, row index = party A axis, column = party B axis.
    pub r: Matrix3<f64>,
}

impl BlochForm {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, r: Matrix3<f64>) -> Result<Self> {
        let form = BlochForm { a, b, r };
        form.validate()?;
        Ok(form)
    }

    /// Zero vectors and tensor: the maximally mixed state.
    pub fn zero() -> Self {
        BlochForm {
            a: Vector3::zeros(),
            b: Vector3::zeros(),
            r: Matrix3::zeros(),
        }
    }

    /// a = b = 0 and a diagonal correlation tensor.
    pub fn diagonal(t: [f64; 3]) -> Self {
        BlochForm {
            a: Vector3::zeros(),
            b: Vector3::zeros(),
            r: Matrix3::from_diagonal(&Vector3::new(t[0], t[1], t[2])),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.a.norm() > 1.0 + PSD_TOL || self.b.norm() > 1.0 + PSD_TOL {
            return Err(Error::InvalidState(format!(
                "local Bloch vector norm exceeds 1: |a|={:.6}, |b|={:.6}",
                self.a.norm(),
                self.b.norm()
            )));
        }
        for v in self.r.iter() {
            if v.abs() > 1.0 + PSD_TOL {
                return Err(Error::InvalidState(format!(
                    "correlation tensor entry {v} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Ordered nonnegative singular values of a correlation tensor, t₁ ≥ t₂ ≥ t₃.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularTriple {
    t: [f64; 3],
}

impl SingularTriple {
    /// Sorts descending; entries are clamped into [0, 1] within numerical slack.
    pub fn new(mut t: [f64; 3]) -> Result<Self> {
        for v in t.iter_mut() {
            if *v < -PSD_TOL || *v > 1.0 + 1e-9 {
                return Err(Error::InvalidState(format!(
                    "singular value {v} outside [0, 1]"
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        t.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Ok(SingularTriple { t })
    }

    pub fn t1(&self) -> f64 {
        self.t[0]
    }
    pub fn t2(&self) -> f64 {
        self.t[1]
    }
    pub fn t3(&self) -> f64 {
        self.t[2]
    }
    pub fn as_array(&self) -> [f64; 3] {
        self.t
    }
}

/// A validated two-qubit density operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    matrix: CMat4,
}

impl TwoQubitState {
    /// Validates Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(matrix: CMat4) -> Result<Self> {
        let herm_defect = (matrix - matrix.adjoint()).norm();
        if herm_defect > 16.0 * HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {herm_defect:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 16.0 * HERMITICITY_TOL || tr.im.abs() > 16.0 * HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        // Symmetrize before the eigenvalue check so roundoff in the input
        // cannot masquerade as non-positivity.
        let sym = (matrix + matrix.adjoint()) * c(0.5, 0.0);
        let eigs = sym.symmetric_eigenvalues();
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(TwoQubitState { matrix: sym })
    }

    pub fn matrix(&self) -> &CMat4 {
        &self.matrix
    }

    /// Tr(ρ²).
    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    /// Smallest eigenvalue, exposed for validation tests.
    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds ρ = ¼(𝕀⊗𝕀 + a·σ⊗𝕀 + 𝕀⊗b·σ + Σ rᵢⱼ σᵢ⊗σⱼ) and validates it.
pub fn from_bloch(bloch: &BlochForm) -> Result<TwoQubitState> {
    bloch.validate()?;
    let id2 = nalgebra::Matrix2::<Complex64>::identity();
    let mut m = CMat4::identity();
    m += kron2(&pauli_dot(&bloch.a), &id2);
    m += kron2(&id2, &pauli_dot(&bloch.b));
    for i in 0..3 {
        for j in 0..3 {
            if bloch.r[(i, j)] != 0.0 {
                m += kron2(&pauli(i), &pauli(j)) * c(bloch.r[(i, j)], 0.);
            }
        }
    }
    TwoQubitState::new(m * c(0.25, 0.))
}

/// Reads the Bloch parameters back off a state: rᵢⱼ = Tr[ρ σᵢ⊗σⱼ].
pub fn to_bloch(state: &TwoQubitState) -> BlochForm {
    let id2 = nalgebra::Matrix2::<Complex64>::identity();
    let rho = state.matrix();
    let mut a = Vector3::zeros();
    let mut b = Vector3::zeros();
    let mut r = Matrix3::zeros();
    for i in 0..3 {
        a[i] = (rho * kron2(&pauli(i), &id2)).trace().re;
        b[i] = (rho * kron2(&id2, &pauli(i))).trace().re;
        for j in 0..3 {
            r[(i, j)] = (rho * kron2(&pauli(i), &pauli(j))).trace().re;
        }
    }
    BlochForm { a, b, r }
}

/// Singular values of a 3×3 real matrix, sorted descending.
pub fn singular_values(r: &Matrix3<f64>) -> Result<SingularTriple> {
    let svd = r.svd(false, false);
    let s = svd.singular_values;
    SingularTriple::new([s[0], s[1], s[2]])
}

/// Full SVD of a correlation tensor with columns sorted by descending
/// singular value: T = U · diag(s) · Vᵀ.
///
/// The orthogonal factors let measurement axes be conjugated onto the
/// principal frame (u ↦ U·u on the hub side, u ↦ V·u on the transmitted side)
/// so that correlations along nominal axes read off diag(s) directly.
pub fn sorted_svd(r: &Matrix3<f64>) -> (Matrix3<f64>, [f64; 3], Matrix3<f64>) {
    let svd = r.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());
    let mut us = Matrix3::zeros();
    let mut vs = Matrix3::zeros();
    let mut ss = [0.0; 3];
    for (k, &i) in order.iter().enumerate() {
        us.set_column(k, &u.column(i));
        vs.set_column(k, &vt.row(i).transpose());
        ss[k] = s[i];
    }
    (us, ss, vs)
}

/// Werner state v·|Ψ⁻⟩⟨Ψ⁻| + (1−v)·𝕀/4 with correlation tensor diag(−v,−v,−v).
pub fn werner(v: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidState(format!(
            "werner visibility {v} outside [0, 1]"
        )));
    }
    from_bloch(&BlochForm::diagonal([-v, -v, -v]))
}

/// |Φ⁺⟩⟨Φ⁺| with |Φ⁺⟩ = (|00⟩+|11⟩)/√2; correlation tensor diag(1,−1,1).
pub fn phi_plus() -> TwoQubitState {
    from_bloch(&BlochForm::diagonal([1.0, -1.0, 1.0])).expect("phi_plus is physical")
}

/// Which side a one-sided channel acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// One-sided depolarizing channel with probability `p`: the correlation
/// tensor and the chosen side's Bloch vector scale by (1−p).
pub fn depolarize(state: &TwoQubitState, p: f64, side: Side) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidState(format!(
            "depolarizing probability {p} outside [0, 1]"
        )));
    }
    let mut bloch = to_bloch(state);
    match side {
        Side::A => bloch.a *= 1.0 - p,
        Side::B => bloch.b *= 1.0 - p,
    }
    bloch.r *= 1.0 - p;
    from_bloch(&bloch)
}

/// Kronecker product of two 2×2 complex matrices.
pub fn kron2(
    a: &nalgebra::Matrix2<Complex64>,
    b: &nalgebra::Matrix2<Complex64>,
) -> CMat4 {
    let mut out = CMat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// JSON descriptor accepted everywhere a state is an input.
///
/// Exactly one of: `{"matrix": [[{"re","im"};4];4]}`, `{"bloch": {"a","b","R"}}`,
/// `{"werner": v}` or `{"diag": [t1,t2,t3]}` (a=b=0, R=diag; rejected if
/// unphysical).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateDescriptor {
    Matrix([[MatrixEntry; 4]; 4]),
    Bloch(BlochDescriptor),
    Werner(f64),
    Diag([f64; 3]),
}

/// A complex matrix entry `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub re: f64,
    pub im: f64,
}

/// Bloch parameters as plain arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochDescriptor {
    pub a: [f64; 3],
    pub b: [f64; 3],
    #[serde(rename = "R")]
    pub r: [[f64; 3]; 3],
}

impl StateDescriptor {
    /// Builds and validates the described state.
    pub fn realize(&self) -> Result<TwoQubitState> {
        match self {
            StateDescriptor::Matrix(rows) => {
                let mut m = CMat4::zeros();
                for (i, row) in rows.iter().enumerate() {
                    for (j, e) in row.iter().enumerate() {
                        m[(i, j)] = c(e.re, e.im);
                    }
                }
                TwoQubitState::new(m)
            }
            StateDescriptor::Bloch(d) => {
                let r = Matrix3::from_fn(|i, j| d.r[i][j]);
                from_bloch(&BlochForm::new(
                    Vector3::from_column_slice(&d.a),
                    Vector3::from_column_slice(&d.b),
                    r,
                )?)
            }
            StateDescriptor::Werner(v) => werner(*v),
            StateDescriptor::Diag(t) => from_bloch(&BlochForm::diagonal(*t)),
        }
    }

    /// Parses a descriptor from a JSON string.
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Descriptor(e.to_string()))
    }
}
