//! Measurement bases and exact joint statistics for the 3-star network.
//!
//! The hub measures its three qubits (one per source) in the tripartite GHZ
//! basis; each edge party measures a single qubit along one of two Bloch
//! axes. Statistics are computed exactly from the Born rule; Monte-Carlo
//! sampling is layered on top of the exact distribution rather than
//! simulated shot-by-shot at the amplitude level.
//!
//! GHZ label convention: the vector (|0 q₂ q₃⟩ + (−1)ˢ |1 q̄₂ q̄₃⟩)/√2 carries
//! the label (a₁₁, a₁₂, a₁₃) = (s, q₂, q₃). The basis constructor accepts a
//! relabeling permutation so optimizers may search alternatives.

use nalgebra::{Matrix2, SMatrix, SVector, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{pauli_dot, TwoQubitState};

type C = Complex64;
type CMat2 = Matrix2<Complex64>;
type CVec8 = SVector<Complex64, 8>;
type CMat8 = SMatrix<Complex64, 8, 8>;

/// A single-qubit projective measurement along a Bloch axis.
///
/// Outcome labels map eigenvalue +1 → bit 0 and −1 → bit 1 unless
/// `invert_labels` is set (used to absorb a negative correlation sign into
/// one party's labeling so that "identical outcomes" is the correlated
/// event).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitBasis {
    axis: [f64; 3],
    #[serde(default)]
    invert_labels: bool,
}

impl QubitBasis {
    pub fn new(axis: Vector3<f64>) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidBasis(format!(
                "measurement axis has norm {:.12}, expected 1",
                axis.norm()
            )));
        }
        Ok(QubitBasis {
            axis: [axis[0], axis[1], axis[2]],
            invert_labels: false,
        })
    }

    /// Axis from spherical angles (θ from +z, φ around z).
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        QubitBasis {
            axis: [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ],
            invert_labels: false,
        }
    }

    pub fn x() -> Self {
        Self::from_angles(std::f64::consts::FRAC_PI_2, 0.0)
    }
    pub fn y() -> Self {
        Self::from_angles(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
    }
    pub fn z() -> Self {
        QubitBasis {
            axis: [0.0, 0.0, 1.0],
            invert_labels: false,
        }
    }

    pub fn with_inverted_labels(mut self, invert: bool) -> Self {
        self.invert_labels = invert;
        self
    }

    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from_column_slice(&self.axis)
    }

    pub fn inverted(&self) -> bool {
        self.invert_labels
    }

    /// Projector onto the eigenspace labeled by `bit`.
    pub fn projector(&self, bit: u8) -> CMat2 {
        let mut sign = if bit == 0 { 1.0 } else { -1.0 };
        if self.invert_labels {
            sign = -sign;
        }
        (CMat2::identity() + pauli_dot(&self.axis()) * C::new(sign, 0.0)) * C::new(0.5, 0.0)
    }
}

/// A pair of mutually unbiased qubit bases (orthogonal Bloch axes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MubCollection {
    pub first: QubitBasis,
    pub second: QubitBasis,
}

impl MubCollection {
    pub fn new(first: QubitBasis, second: QubitBasis) -> Result<Self> {
        let dot = first.axis().dot(&second.axis());
        if dot.abs() > 1e-10 {
            return Err(Error::InvalidBasis(format!(
                "bases are not mutually unbiased: axis dot product {dot:.3e}"
            )));
        }
        Ok(MubCollection { first, second })
    }

    /// The z/x pair.
    pub fn zx() -> Self {
        MubCollection {
            first: QubitBasis::z(),
            second: QubitBasis::x(),
        }
    }

    /// The x/y pair: along the two leading principal axes of a sorted
    /// correlation-tensor frame.
    pub fn principal() -> Self {
        MubCollection {
            first: QubitBasis::x(),
            second: QubitBasis::y(),
        }
    }

    pub fn basis(&self, j: usize) -> &QubitBasis {
        match j {
            0 => &self.first,
            1 => &self.second,
            _ => panic!("MUB index out of range"),
        }
    }
}

/// The tripartite GHZ basis: 8 orthonormal vectors indexed by a 3-bit label.
#[derive(Clone, Debug)]
pub struct GhzBasis {
    vectors: [CVec8; 8],
}

fn canonical_ghz_vector(label: usize) -> CVec8 {
    let s = (label >> 2) & 1;
    let q2 = (label >> 1) & 1;
    let q3 = label & 1;
    let mut v = CVec8::zeros();
    let amp = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let first = (q2 << 1) | q3; // |0 q2 q3⟩
    let second = 4 | ((q2 ^ 1) << 1) | (q3 ^ 1); // |1 q̄2 q̄3⟩
    v[first] = amp;
    v[second] = if s == 0 { amp } else { -amp };
    v
}

/// Builds the GHZ basis under a label permutation (`labeling[l]` is the
/// canonical label whose vector is assigned to label `l`). Identity gives
/// the convention documented at module level.
pub fn ghz_basis(labeling: &[usize; 8]) -> Result<GhzBasis> {
    let mut seen = [false; 8];
    for &l in labeling {
        if l >= 8 || seen[l] {
            return Err(Error::InvalidBasis(
                "labeling is not a bijection on {0,1}^3".into(),
            ));
        }
        seen[l] = true;
    }
    let vectors = std::array::from_fn(|l| canonical_ghz_vector(labeling[l]));
    Ok(GhzBasis { vectors })
}

impl Default for GhzBasis {
    fn default() -> Self {
        ghz_basis(&[0, 1, 2, 3, 4, 5, 6, 7]).unwrap()
    }
}

impl GhzBasis {
    /// Basis vector for a 3-bit label ā₁ = (a₁₁,a₁₂,a₁₃), index 4a₁₁+2a₁₂+a₁₃.
    pub fn vector(&self, label: usize) -> &CVec8 {
        &self.vectors[label]
    }

    /// Σ_ā |g_ā⟩⟨g_ā|, for completeness checks.
    pub fn projector_sum(&self) -> CMat8 {
        let mut m = CMat8::zeros();
        for v in &self.vectors {
            m += v * v.adjoint();
        }
        m
    }
}

/// The exact behavior p(ā₁,a₂,a₃,a₄|x₂,x₃,x₄): 8 settings × 64 outcomes.
///
/// Setting index: 4x₂+2x₃+x₄. Outcome index: 8·(4a₁₁+2a₁₂+a₁₃) + 4a₂+2a₃+a₄.
#[derive(Clone, Debug)]
pub struct TrilocalStatistics {
    p: [[f64; 64]; 8],
}

impl TrilocalStatistics {
    pub fn prob(&self, setting: usize, outcome: usize) -> f64 {
        self.p[setting][outcome]
    }

    pub fn setting_index(x: [u8; 3]) -> usize {
        (x[0] as usize) * 4 + (x[1] as usize) * 2 + x[2] as usize
    }

    pub fn outcome_index(hub: [u8; 3], edge: [u8; 3]) -> usize {
        let a1 = (hub[0] as usize) * 4 + (hub[1] as usize) * 2 + hub[2] as usize;
        let a = (edge[0] as usize) * 4 + (edge[1] as usize) * 2 + edge[2] as usize;
        a1 * 8 + a
    }

    /// Largest violation of nonnegativity, normalization and no-signalling.
    pub fn invariant_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..8 {
            let mut sum = 0.0;
            for o in 0..64 {
                worst = worst.max(-self.p[s][o]);
                sum += self.p[s][o];
            }
            worst = worst.max((sum - 1.0).abs());
        }
        // Marginal over a_{i+1} must not depend on x_{i+1}.
        for party in 0..3 {
            let bit = 1usize << (2 - party); // weight of x_{party} in the setting index
            let obit = 1usize << (2 - party); // weight of a_{party} in the edge index
            for s in 0..8 {
                if s & bit != 0 {
                    continue;
                }
                let s1 = s | bit;
                for rest in 0..64 {
                    if rest & obit != 0 {
                        continue;
                    }
                    let m0 = self.p[s][rest] + self.p[s][rest | obit];
                    let m1 = self.p[s1][rest] + self.p[s1][rest | obit];
                    worst = worst.max((m0 - m1).abs());
                }
            }
        }
        worst
    }

    /// Draws one outcome index for the given setting.
    pub fn sample<R: Rng>(&self, setting: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for o in 0..64 {
            acc += self.p[setting][o];
            if u < acc {
                return o;
            }
        }
        63
    }
}

/// Partial projection of a two-qubit state onto an edge outcome:
/// X[h',h] = ⟨h'|⊗⟨Π| ρ |h⟩⊗|Π⟩ as a 2×2 operator on the hub qubit.
fn conditional_hub_operator(rho: &TwoQubitState, projector: &CMat2) -> CMat2 {
    let m = rho.matrix();
    let mut x = CMat2::zeros();
    for hp in 0..2 {
        for h in 0..2 {
            let mut acc = C::new(0.0, 0.0);
            for ep in 0..2 {
                for e in 0..2 {
                    acc += m[(2 * hp + ep, 2 * h + e)] * projector[(e, ep)];
                }
            }
            x[(hp, h)] = acc;
        }
    }
    x
}

/// Exact Born statistics of the 3-star network.
///
/// Source `i` links the hub's i-th qubit with edge party i+1; the hub's three
/// qubits are measured jointly in the given GHZ basis while edge party i+1
/// uses `edge[i][x_{i+1}]`.
pub fn trilocal_statistics(
    states: [&TwoQubitState; 3],
    edge: &[[QubitBasis; 2]; 3],
    ghz: &GhzBasis,
) -> TrilocalStatistics {
    // All twelve conditional hub operators, indexed [link][basis][outcome].
    let mut cond = [[[CMat2::zeros(); 2]; 2]; 3];
    for (k, state) in states.iter().enumerate() {
        for j in 0..2 {
            for a in 0..2u8 {
                cond[k][j][a as usize] =
                    conditional_hub_operator(state, &edge[k][j].projector(a));
            }
        }
    }

    let mut p = [[0.0f64; 64]; 8];
    for setting in 0..8 {
        let x = [(setting >> 2) & 1, (setting >> 1) & 1, setting & 1];
        for edge_out in 0..8usize {
            let a = [(edge_out >> 2) & 1, (edge_out >> 1) & 1, edge_out & 1];
            let x1 = &cond[0][x[0]][a[0]];
            let x2 = &cond[1][x[1]][a[1]];
            let x3 = &cond[2][x[2]][a[2]];
            // B = X₁ ⊗ X₂ ⊗ X₃ on the hub space.
            let mut b = CMat8::zeros();
            for h1 in 0..2 {
                for h2 in 0..2 {
                    for h3 in 0..2 {
                        for g1 in 0..2 {
                            for g2 in 0..2 {
                                for g3 in 0..2 {
                                    b[(4 * h1 + 2 * h2 + h3, 4 * g1 + 2 * g2 + g3)] =
                                        x1[(h1, g1)] * x2[(h2, g2)] * x3[(h3, g3)];
                                }
                            }
                        }
                    }
                }
            }
            for label in 0..8 {
                let g = ghz.vector(label);
                let val = (g.adjoint() * b * g)[(0, 0)].re;
                p[setting][label * 8 + edge_out] = val.max(0.0);
            }
        }
    }
    TrilocalStatistics { p }
}

/// Bipartite behavior p(a,b|x,y) for a two-qubit state, indexed [x][y][a][b].
#[derive(Clone, Debug)]
pub struct BipartiteBehavior {
    pub p: [[[[f64; 2]; 2]; 2]; 2],
}

impl BipartiteBehavior {
    /// Correlator E(x,y) = Σ (−1)^{a+b} p(a,b|x,y).
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let q = &self.p[x][y];
        q[0][0] - q[0][1] - q[1][0] + q[1][1]
    }

    /// Largest violation of normalization and no-signalling.
    pub fn invariant_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let mut sum = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        worst = worst.max(-self.p[x][y][a][b]);
                        sum += self.p[x][y][a][b];
                    }
                }
                worst = worst.max((sum - 1.0).abs());
            }
        }
        for a in 0..2 {
            for x in 0..2 {
                let m0 = self.p[x][0][a][0] + self.p[x][0][a][1];
                let m1 = self.p[x][1][a][0] + self.p[x][1][a][1];
                worst = worst.max((m0 - m1).abs());
            }
            for y in 0..2 {
                let m0 = self.p[0][y][0][a] + self.p[0][y][1][a];
                let m1 = self.p[1][y][0][a] + self.p[1][y][1][a];
                worst = worst.max((m0 - m1).abs());
            }
        }
        worst
    }

    /// Draws one (a, b) pair for the given settings.
    pub fn sample<R: Rng>(&self, x: usize, y: usize, rng: &mut R) -> (u8, u8) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                acc += self.p[x][y][a][b];
                if u < acc {
                    return (a as u8, b as u8);
                }
            }
        }
        (1, 1)
    }
}

/// Born probabilities p(a,b|x,y) = Tr[ρ (Π^A_a ⊗ Π^B_b)].
pub fn bipartite_statistics(
    rho: &TwoQubitState,
    bases_a: &[QubitBasis; 2],
    bases_b: &[QubitBasis; 2],
) -> BipartiteBehavior {
    let m = rho.matrix();
    let mut p = [[[[0.0; 2]; 2]; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let pa = bases_a[x].projector(a);
                    let pb = bases_b[y].projector(b);
                    let op = crate::qstate::kron2(&pa, &pb);
                    p[x][y][a as usize][b as usize] = (m * op).trace().re.max(0.0);
                }
            }
        }
    }
    BipartiteBehavior { p }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{from_bloch, phi_plus, to_bloch, werner, BlochForm};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> TwoQubitState {
        // Ginibre construction: ρ = GG†/Tr(GG†).
        let g = nalgebra::Matrix4::<Complex64>::from_fn(|_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let m = g * g.adjoint();
        let tr = m.trace();
        TwoQubitState::new(m * Complex64::new(1.0 / tr.re, 0.0)).unwrap()
    }

    fn random_basis(rng: &mut ChaCha8Rng) -> QubitBasis {
        QubitBasis::from_angles(
            rng.gen::<f64>() * std::f64::consts::PI,
            rng.gen::<f64>() * std::f64::consts::TAU,
        )
    }

    /// Dense-matrix oracle: full 64-dimensional Born rule with an explicit
    /// qubit permutation, independent of the contracted implementation.
    fn dense_trilocal_statistics(
        states: [&TwoQubitState; 3],
        edge: &[[QubitBasis; 2]; 3],
        ghz: &GhzBasis,
    ) -> Vec<Vec<f64>> {
        let kron = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| -> DMatrix<Complex64> {
            let (ar, ac) = a.shape();
            let (br, bc) = b.shape();
            DMatrix::from_fn(ar * br, ac * bc, |i, j| {
                a[(i / br, j / bc)] * b[(i % br, j % bc)]
            })
        };
        let dm = |m: &nalgebra::Matrix4<Complex64>| {
            DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
        };
        let rho_src = kron(&kron(&dm(states[0].matrix()), &dm(states[1].matrix())),
                           &dm(states[2].matrix()));
        // Measurement-order qubits (h1,h2,h3,e2,e3,e4) live at source-order
        // positions (0,2,4,1,3,5).
        let src_pos = [0usize, 2, 4, 1, 3, 5];
        let perm = |meas_idx: usize| -> usize {
            let mut s = 0usize;
            for (mq, &sq) in src_pos.iter().enumerate() {
                let bit = (meas_idx >> (5 - mq)) & 1;
                s |= bit << (5 - sq);
            }
            s
        };
        let rho_meas =
            DMatrix::from_fn(64, 64, |i, j| rho_src[(perm(i), perm(j))]);
        let mut out = vec![vec![0.0; 64]; 8];
        for setting in 0..8 {
            let x = [(setting >> 2) & 1, (setting >> 1) & 1, setting & 1];
            for label in 0..8usize {
                let g = ghz.vector(label);
                let pg = DMatrix::from_fn(8, 8, |i, j| g[i] * g[j].conj());
                for eo in 0..8usize {
                    let a = [(eo >> 2) & 1, (eo >> 1) & 1, eo & 1];
                    let mut proj = pg.clone();
                    for k in 0..3 {
                        let pk = edge[k][x[k]].projector(a[k] as u8);
                        proj = kron(&proj, &DMatrix::from_fn(2, 2, |i, j| pk[(i, j)]));
                    }
                    let mut tr = Complex64::new(0.0, 0.0);
                    for i in 0..64 {
                        for j in 0..64 {
                            tr += rho_meas[(i, j)] * proj[(j, i)];
                        }
                    }
                    out[setting][label * 8 + eo] = tr.re;
                }
            }
        }
        out
    }

    #[test]
    fn ghz_basis_is_orthonormal_and_complete() {
        let ghz = GhzBasis::default();
        for i in 0..8 {
            for j in 0..8 {
                let ip = (ghz.vector(i).adjoint() * ghz.vector(j))[(0, 0)];
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-12 && ip.im.abs() < 1e-12);
            }
        }
        assert!((ghz.projector_sum() - CMat8::identity()).norm() < 1e-12);
    }

    #[test]
    fn ghz_default_label_zero_vector() {
        let ghz = GhzBasis::default();
        let v = ghz.vector(0);
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].re - amp).abs() < 1e-15 && (v[7].re - amp).abs() < 1e-15);
    }

    #[test]
    fn ghz_rejects_non_bijection() {
        assert!(ghz_basis(&[0, 0, 2, 3, 4, 5, 6, 7]).is_err());
    }

    #[test]
    fn maximally_mixed_inputs_give_uniform_statistics() {
        let mixed = from_bloch(&BlochForm::zero()).unwrap();
        let edge = std::array::from_fn(|_| [QubitBasis::z(), QubitBasis::x()]);
        let stats =
            trilocal_statistics([&mixed, &mixed, &mixed], &edge, &GhzBasis::default());
        for s in 0..8 {
            for o in 0..64 {
                assert!((stats.prob(s, o) - 1.0 / 64.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn statistics_match_dense_oracle_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..4 {
            let r1 = random_state(&mut rng);
            let r2 = random_state(&mut rng);
            let r3 = random_state(&mut rng);
            let edge: [[QubitBasis; 2]; 3] =
                std::array::from_fn(|_| [random_basis(&mut rng), random_basis(&mut rng)]);
            let ghz = GhzBasis::default();
            let fast = trilocal_statistics([&r1, &r2, &r3], &edge, &ghz);
            let dense = dense_trilocal_statistics([&r1, &r2, &r3], &edge, &ghz);
            for s in 0..8 {
                for o in 0..64 {
                    assert!(
                        (fast.prob(s, o) - dense[s][o]).abs() < 1e-12,
                        "mismatch at setting {s}, outcome {o}"
                    );
                }
            }
            assert!(fast.invariant_defect() < 1e-10);
        }
    }

    #[test]
    fn edge_marginals_depend_only_on_own_link() {
        // Source independence: replacing the other two states leaves an edge
        // party's conditional marginal unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kept = random_state(&mut rng);
        let edge: [[QubitBasis; 2]; 3] =
            std::array::from_fn(|_| [random_basis(&mut rng), random_basis(&mut rng)]);
        let ghz = GhzBasis::default();
        let marginal = |stats: &TrilocalStatistics, setting: usize| -> [f64; 2] {
            let mut m = [0.0; 2];
            for o in 0..64 {
                m[(o >> 2) & 1] += stats.prob(setting, o);
            }
            m
        };
        let s1 = {
            let a = random_state(&mut rng);
            let b = random_state(&mut rng);
            trilocal_statistics([&kept, &a, &b], &edge, &ghz)
        };
        let s2 = {
            let a = random_state(&mut rng);
            let b = random_state(&mut rng);
            trilocal_statistics([&kept, &a, &b], &edge, &ghz)
        };
        for setting in 0..8 {
            let m1 = marginal(&s1, setting);
            let m2 = marginal(&s2, setting);
            assert!((m1[0] - m2[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn hub_correlators_factorize_across_sources() {
        // ⟨M⁽ⁱ⁾ ⊗ B₂B₃B₄⟩ computed from the joint statistics must equal the
        // product of per-source two-qubit expectations for the hub Pauli
        // factors X⊗X⊗X, Y⊗Y⊗X, Y⊗X⊗Y, X⊗Y⊗Y implied by the classical
        // post-processing.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let states = [
            random_state(&mut rng),
            random_state(&mut rng),
            random_state(&mut rng),
        ];
        let edge: [[QubitBasis; 2]; 3] =
            std::array::from_fn(|_| [random_basis(&mut rng), random_basis(&mut rng)]);
        let ghz = GhzBasis::default();
        let stats =
            trilocal_statistics([&states[0], &states[1], &states[2]], &edge, &ghz);
        let hub_axes: [[usize; 3]; 4] = [[0, 0, 0], [1, 1, 0], [1, 0, 1], [0, 1, 1]]; // 0=x,1=y
        let post = |i: usize, hub: [u8; 3]| -> u8 {
            match i {
                0 => hub[0],
                1 => hub[0] ^ hub[1] ^ 1,
                2 => hub[0] ^ hub[2] ^ 1,
                _ => hub[0] ^ hub[1] ^ hub[2] ^ 1,
            }
        };
        for setting in 0..8usize {
            let x = [(setting >> 2) & 1, (setting >> 1) & 1, setting & 1];
            for (i, axes) in hub_axes.iter().enumerate() {
                let mut joint = 0.0;
                for o in 0..64usize {
                    let hub = [(o >> 5) as u8 & 1, (o >> 4) as u8 & 1, (o >> 3) as u8 & 1];
                    let parity = post(i, hub) ^ ((o >> 2) as u8 & 1) ^ ((o >> 1) as u8 & 1)
                        ^ (o as u8 & 1);
                    let sign = if parity == 0 { 1.0 } else { -1.0 };
                    joint += sign * stats.prob(setting, o);
                }
                let mut product = 1.0;
                for k in 0..3 {
                    let r = to_bloch(&states[k]).r;
                    let hub_axis: Vector3<f64> = if axes[k] == 0 {
                        Vector3::x()
                    } else {
                        Vector3::y()
                    };
                    let v = edge[k][x[k]].axis();
                    let mut e: f64 = (hub_axis.transpose() * r * v)[(0, 0)];
                    if edge[k][x[k]].inverted() {
                        e = -e;
                    }
                    product *= e;
                }
                assert!(
                    (joint - product).abs() < 1e-10,
                    "correlator {i} at setting {setting}: joint {joint} vs product {product}"
                );
            }
        }
    }

    #[test]
    fn swapping_sources_permutes_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r1 = random_state(&mut rng);
        let r2 = random_state(&mut rng);
        let r3 = random_state(&mut rng);
        let e1 = [random_basis(&mut rng), random_basis(&mut rng)];
        let e2 = [random_basis(&mut rng), random_basis(&mut rng)];
        let e3 = [random_basis(&mut rng), random_basis(&mut rng)];
        let ghz = GhzBasis::default();
        let base = trilocal_statistics(
            [&r1, &r2, &r3],
            &[e1.clone(), e2.clone(), e3.clone()],
            &ghz,
        );
        let swapped = trilocal_statistics([&r1, &r3, &r2], &[e1, e3, e2], &ghz);
        // Swapping sources 2 and 3 exchanges (x₃,a₃)↔(x₄,a₄) and the GHZ
        // label bits q₂↔q₃.
        for s in 0..8usize {
            let x = [(s >> 2) & 1, (s >> 1) & 1, s & 1];
            let s_sw = TrilocalStatistics::setting_index([x[0] as u8, x[2] as u8, x[1] as u8]);
            for o in 0..64usize {
                let hub = [(o >> 5) as u8 & 1, (o >> 4) as u8 & 1, (o >> 3) as u8 & 1];
                let a = [(o >> 2) as u8 & 1, (o >> 1) as u8 & 1, o as u8 & 1];
                let o_sw = TrilocalStatistics::outcome_index(
                    [hub[0], hub[2], hub[1]],
                    [a[0], a[2], a[1]],
                );
                assert!((base.prob(s, o) - swapped.prob(s_sw, o_sw)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bipartite_statistics_basics() {
        let mixed = from_bloch(&BlochForm::zero()).unwrap();
        let zz = [QubitBasis::z(), QubitBasis::x()];
        let b = bipartite_statistics(&mixed, &zz, &zz);
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for bb in 0..2 {
                        assert!((b.p[x][y][a][bb] - 0.25).abs() < 1e-12);
                    }
                }
            }
        }
        // |Φ⁺⟩ measured z/z is perfectly correlated.
        let b = bipartite_statistics(&phi_plus(), &zz, &zz);
        assert!((b.p[0][0][0][0] - 0.5).abs() < 1e-12);
        assert!((b.p[0][0][1][1] - 0.5).abs() < 1e-12);
        assert!(b.p[0][0][0][1].abs() < 1e-12);
        assert!(b.invariant_defect() < 1e-12);
    }

    #[test]
    fn werner_zz_mismatch_rate() {
        // Closed form: matched-axis mismatch probability is (1 − u·Tu)/2.
        // Werner(v) has u·Tu = −v along z for both-parties-z, so the
        // anticorrelated event dominates; with one party's labels flipped the
        // mismatch probability becomes (1 − v)/2.
        let v = 0.8;
        let w = werner(v).unwrap();
        let flip = [
            QubitBasis::z().with_inverted_labels(true),
            QubitBasis::x().with_inverted_labels(true),
        ];
        let plain = [QubitBasis::z(), QubitBasis::x()];
        let b = bipartite_statistics(&w, &plain, &flip);
        let mismatch = b.p[0][0][0][1] + b.p[0][0][1][0];
        assert!((mismatch - (1.0 - v) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_statistically_sound() {
        let mixed = from_bloch(&BlochForm::zero()).unwrap();
        let edge = std::array::from_fn(|_| [QubitBasis::z(), QubitBasis::x()]);
        let stats =
            trilocal_statistics([&mixed, &mixed, &mixed], &edge, &GhzBasis::default());

        let draws = 100_000usize;
        let mut counts = [0usize; 64];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..draws {
            counts[stats.sample(3, &mut rng)] += 1;
        }
        let p = 1.0 / 64.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (o, &cnt) in counts.iter().enumerate() {
            let dev = (cnt as f64 - draws as f64 * p).abs();
            assert!(dev < 5.0 * sigma, "outcome {o} deviates {dev:.1} > 5σ");
        }

        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let mut rng_b = ChaCha8Rng::seed_from_u64(5);
        let seq_a: Vec<usize> = (0..50).map(|_| stats.sample(1, &mut rng_a)).collect();
        let seq_b: Vec<usize> = (0..50).map(|_| stats.sample(1, &mut rng_b)).collect();
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn degenerate_distribution_sampling() {
        // |00⟩⟨00| measured along z on both sides: the (0,0) outcome is certain.
        let bloch = BlochForm {
            a: Vector3::new(0., 0., 1.),
            b: Vector3::new(0., 0., 1.),
            r: nalgebra::Matrix3::from_diagonal(&Vector3::new(0., 0., 1.)),
        };
        let rho = from_bloch(&bloch).unwrap();
        let zz = [QubitBasis::z(), QubitBasis::z().with_inverted_labels(false)];
        let b = bipartite_statistics(&rho, &zz, &zz);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            assert_eq!(b.sample(0, 0, &mut rng), (0, 0));
        }
    }
}
