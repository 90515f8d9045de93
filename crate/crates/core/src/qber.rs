//! Exact and closed-form quantum bit error rates.
//!
//! A sifted round errs when the hub's outcome disagrees with at least one
//! edge party. Averaged over the 2³ equally likely MUB combinations this is
//!
//! 𝐐 = 1 − (1/2⁶) Σ_{j₁,j₂,j₃} Πᵢ (1 + ⟨correlation along basis jᵢ of link i⟩)
//!
//! Measurement axes are conjugated by the orthogonal SVD factors of each
//! link's correlation tensor (hub side by U, transmitted side by V), which
//! absorbs signs and makes "identical outcomes" the correlated event without
//! synthesizing any local unitary.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::measurement::{MubCollection, QubitBasis};
use crate::qstate::{kron2, sorted_svd, to_bloch, SingularTriple, TwoQubitState};

/// Per-link collections of two mutually unbiased bases (nominal axes, taken
/// in the sorted principal frame of each link's correlation tensor).
#[derive(Clone, Debug)]
pub struct MubAssignment {
    pub links: [MubCollection; 3],
}

impl MubAssignment {
    /// x/y nominal axes on every link: the two leading principal directions.
    pub fn principal() -> Self {
        MubAssignment {
            links: std::array::from_fn(|_| MubCollection::principal()),
        }
    }

    /// z/x nominal axes on every link.
    pub fn zx() -> Self {
        MubAssignment {
            links: std::array::from_fn(|_| MubCollection::zx()),
        }
    }
}

/// Physical measurement axes of one link after conjugation onto the
/// principal frame: the hub measures along U·u, the edge party along V·u.
#[derive(Clone, Debug)]
pub struct ConjugatedLink {
    pub hub: [QubitBasis; 2],
    pub edge: [QubitBasis; 2],
}

/// Conjugates a link's nominal MUB axes by the SVD factors of the declared
/// state's correlation tensor.
pub fn conjugate_link(declared: &TwoQubitState, mubs: &MubCollection) -> Result<ConjugatedLink> {
    let (u, _, v) = sorted_svd(&to_bloch(declared).r);
    let make = |m: &Matrix3<f64>, basis: &QubitBasis| -> Result<QubitBasis> {
        QubitBasis::new(m * basis.axis())
    };
    Ok(ConjugatedLink {
        hub: [make(&u, mubs.basis(0))?, make(&u, mubs.basis(1))?],
        edge: [make(&v, mubs.basis(0))?, make(&v, mubs.basis(1))?],
    })
}

/// Q = ¼(2 − u₁·Tu₁ − u₂·Tu₂) for one link measured in two MUBs with Bloch
/// axes u₁, u₂.
pub fn bipartite_qber(t: &Matrix3<f64>, u1: &Vector3<f64>, u2: &Vector3<f64>) -> f64 {
    0.25 * (2.0 - (u1.transpose() * t * u1)[(0, 0)] - (u2.transpose() * t * u2)[(0, 0)])
}

/// Correlation c = (U·u)ᵀ T (V·u) = uᵀ diag(σ) u along a nominal axis.
fn link_correlations(state: &TwoQubitState, mubs: &MubCollection) -> [f64; 2] {
    let (_, s, _) = sorted_svd(&to_bloch(state).r);
    let sigma = Matrix3::from_diagonal(&Vector3::new(s[0], s[1], s[2]));
    std::array::from_fn(|j| {
        let u = mubs.basis(j).axis();
        (u.transpose() * sigma * u)[(0, 0)]
    })
}

/// Exact protocol QBER in the correlation-tensor form.
pub fn qber_exact(
    states: [&TwoQubitState; 3],
    mubs: &MubAssignment,
) -> f64 {
    let c: Vec<[f64; 2]> = states
        .iter()
        .zip(mubs.links.iter())
        .map(|(s, m)| link_correlations(s, m))
        .collect();
    let mut total = 0.0;
    for j in 0..8usize {
        let mut prod = 1.0;
        for (i, ci) in c.iter().enumerate() {
            prod *= 1.0 + ci[(j >> i) & 1];
        }
        total += prod;
    }
    1.0 - total / 64.0
}

/// Exact protocol QBER computed from Born probabilities of the conjugated
/// projectors — an independent route used to cross-check `qber_exact`.
pub fn qber_exact_born(
    states: [&TwoQubitState; 3],
    mubs: &MubAssignment,
) -> Result<f64> {
    let mut match_prob = [[0.0f64; 2]; 3];
    for (i, state) in states.iter().enumerate() {
        let link = conjugate_link(state, &mubs.links[i])?;
        for j in 0..2 {
            let mut m = 0.0;
            for outcome in 0..2u8 {
                let op = kron2(
                    &link.hub[j].projector(outcome),
                    &link.edge[j].projector(outcome),
                );
                m += (state.matrix() * op).trace().re;
            }
            match_prob[i][j] = m;
        }
    }
    let mut q = 0.0;
    for j in 0..8usize {
        let mut prod = 1.0;
        for (i, mp) in match_prob.iter().enumerate() {
            prod *= mp[(j >> i) & 1];
        }
        q += 1.0 - prod;
    }
    Ok(q / 8.0)
}

/// Minimum of the exact QBER over MUB assignments:
/// 𝐐' = 1 − Πᵢ(2 + tᵢ,₁ + tᵢ,₂)/2⁶.
pub fn qber_min_over_mubs(triples: &[SingularTriple; 3]) -> f64 {
    1.0 - triples
        .iter()
        .map(|t| 2.0 + t.t1() + t.t2())
        .product::<f64>()
        / 64.0
}

/// Identical-state specialization 𝐐' = 1 − (2 + t₁ + t₂)³/2⁶.
pub fn qber_identical(t1: f64, t2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t1) || !(0.0..=t1).contains(&t2) {
        return Err(Error::InvalidState(format!(
            "singular values ({t1}, {t2}) must satisfy 0 ≤ t2 ≤ t1 ≤ 1"
        )));
    }
    let f = 2.0 + t1 + t2;
    Ok(1.0 - f * f * f / 64.0)
}

/// Σ_{j₁,j₂,j₃} Πᵢ(1+tᵢ,ⱼᵢ), the expanded sum behind the second criterion.
pub fn mub_sum_expansion(t: &[[f64; 2]; 3]) -> f64 {
    let mut total = 0.0;
    for j in 0..8usize {
        let mut prod = 1.0;
        for (i, ti) in t.iter().enumerate() {
            prod *= 1.0 + ti[(j >> i) & 1];
        }
        total += prod;
    }
    total
}

/// Πᵢ(2 + tᵢ,₁ + tᵢ,₂), the factorized form of the same sum.
pub fn mub_product_form(t: &[[f64; 2]; 3]) -> f64 {
    t.iter().map(|ti| 2.0 + ti[0] + ti[1]).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{from_bloch, phi_plus, werner, BlochForm};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthonormal_pair(rng: &mut ChaCha8Rng) -> (Vector3<f64>, Vector3<f64>) {
        loop {
            let u = Vector3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            )
            .normalize();
            let w = Vector3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            let v = w - u * u.dot(&w);
            if v.norm() > 1e-3 {
                return (u, v.normalize());
            }
        }
    }

    #[test]
    fn bipartite_qber_examples() {
        let id = Matrix3::identity();
        assert_abs_diff_eq!(
            bipartite_qber(&id, &Vector3::z(), &Vector3::x()),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            bipartite_qber(&Matrix3::zeros(), &Vector3::z(), &Vector3::x()),
            0.5,
            epsilon = 1e-12
        );
        let t = Matrix3::from_diagonal(&Vector3::new(0.9, 0.9, 0.9));
        assert_abs_diff_eq!(
            bipartite_qber(&t, &Vector3::z(), &Vector3::x()),
            0.05,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bipartite_qber_bound_for_orthogonal_mubs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let d: [f64; 3] = std::array::from_fn(|_| rng.gen::<f64>());
            let t = Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2]));
            let mut s = d;
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let (u1, u2) = random_orthonormal_pair(&mut rng);
            let q = bipartite_qber(&t, &u1, &u2);
            assert!(q >= 0.25 * (2.0 - s[0] - s[1]) - 1e-12);
        }
    }

    #[test]
    fn qber_exact_perfect_correlations() {
        let p = phi_plus();
        let q = qber_exact([&p, &p, &p], &MubAssignment::zx());
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn qber_exact_maximally_mixed() {
        let m = from_bloch(&BlochForm::zero()).unwrap();
        let q = qber_exact([&m, &m, &m], &MubAssignment::zx());
        assert_abs_diff_eq!(q, 0.875, epsilon = 1e-12);
    }

    #[test]
    fn qber_exact_werner_09() {
        let w = werner(0.9).unwrap();
        let q = qber_exact([&w, &w, &w], &MubAssignment::principal());
        assert_abs_diff_eq!(q, 0.142625, epsilon = 1e-12);
    }

    #[test]
    fn born_route_agrees_with_tensor_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..25 {
            let states: Vec<TwoQubitState> = (0..3)
                .map(|_| {
                    let g = nalgebra::Matrix4::<num_complex::Complex64>::from_fn(|_, _| {
                        num_complex::Complex64::new(
                            rng.gen::<f64>() - 0.5,
                            rng.gen::<f64>() - 0.5,
                        )
                    });
                    let m = g * g.adjoint();
                    let tr = m.trace();
                    TwoQubitState::new(m * num_complex::Complex64::new(1.0 / tr.re, 0.0))
                        .unwrap()
                })
                .collect();
            let links: Vec<MubCollection> = (0..3)
                .map(|_| {
                    let (u1, u2) = random_orthonormal_pair(&mut rng);
                    MubCollection::new(
                        QubitBasis::new(u1).unwrap(),
                        QubitBasis::new(u2).unwrap(),
                    )
                    .unwrap()
                })
                .collect();
            let mubs = MubAssignment {
                links: [links[0].clone(), links[1].clone(), links[2].clone()],
            };
            let tensor = qber_exact([&states[0], &states[1], &states[2]], &mubs);
            let born = qber_exact_born([&states[0], &states[1], &states[2]], &mubs).unwrap();
            assert!(
                (tensor - born).abs() < 1e-10,
                "routes disagree: {tensor} vs {born}"
            );
            assert!((0.0..=1.0 + 1e-12).contains(&tensor));
        }
    }

    #[test]
    fn qber_min_examples() {
        let one = SingularTriple::new([1.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(qber_min_over_mubs(&[one, one, one]), 0.0, epsilon = 1e-12);

        let t1 = SingularTriple::new([0.95, 0.91, 0.9]).unwrap();
        let t2 = SingularTriple::new([0.95, 0.88, 0.85]).unwrap();
        let t3 = SingularTriple::new([0.96, 0.85, 0.82]).unwrap();
        let q = qber_min_over_mubs(&[t1, t2, t3]);
        assert_abs_diff_eq!(q, 1.0 - 3.86 * 3.83 * 3.81 / 64.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.119902, epsilon = 1e-6);

        let c = 2.0f64.powf(-1.0 / 6.0);
        let t = SingularTriple::new([c, c, 0.0]).unwrap();
        assert_abs_diff_eq!(qber_min_over_mubs(&[t, t, t]), 0.154887, epsilon = 1e-5);
    }

    #[test]
    fn qber_identical_examples() {
        assert_abs_diff_eq!(qber_identical(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        let c = 2.0f64.powf(-1.0 / 6.0);
        assert_abs_diff_eq!(qber_identical(c, c).unwrap(), 0.154887, epsilon = 1e-5);
        assert_abs_diff_eq!(
            qber_identical(0.9, 0.9).unwrap(),
            1.0 - 3.8f64.powi(3) / 64.0,
            epsilon = 1e-12
        );
        assert!(qber_identical(0.5, 0.9).is_err());
    }

    #[test]
    fn factorization_identity_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..500 {
            let t: [[f64; 2]; 3] =
                std::array::from_fn(|_| std::array::from_fn(|_| rng.gen::<f64>()));
            let sum = mub_sum_expansion(&t);
            let prod = mub_product_form(&t);
            assert!(
                (sum - prod).abs() <= 1e-12 * prod.abs().max(1.0),
                "{sum} vs {prod}"
            );
        }
    }

    #[test]
    fn qber_min_is_monotone_nonincreasing() {
        let base = [
            SingularTriple::new([0.9, 0.8, 0.1]).unwrap(),
            SingularTriple::new([0.85, 0.7, 0.0]).unwrap(),
            SingularTriple::new([0.8, 0.6, 0.2]).unwrap(),
        ];
        let q0 = qber_min_over_mubs(&base);
        for i in 0..3 {
            for j in 0..2 {
                let mut bumped = base;
                let mut t = bumped[i].as_array();
                t[j] += 0.05;
                bumped[i] = SingularTriple::new(t).unwrap();
                assert!(qber_min_over_mubs(&bumped) <= q0 + 1e-12);
            }
        }
    }

    #[test]
    fn qber_min_lower_bounds_exact_on_diagonal_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut checked = 0;
        while checked < 50 {
            let states: Vec<Option<TwoQubitState>> = (0..3)
                .map(|_| {
                    let d: [f64; 3] = std::array::from_fn(|_| rng.gen::<f64>() * 2.0 - 1.0);
                    from_bloch(&BlochForm::diagonal(d)).ok()
                })
                .collect();
            if states.iter().any(|s| s.is_none()) {
                continue;
            }
            let states: Vec<TwoQubitState> = states.into_iter().flatten().collect();
            let triples: Vec<SingularTriple> = states
                .iter()
                .map(|s| {
                    crate::qstate::singular_values(&crate::qstate::to_bloch(s).r).unwrap()
                })
                .collect();
            let links: Vec<MubCollection> = (0..3)
                .map(|_| {
                    let (u1, u2) = random_orthonormal_pair(&mut rng);
                    MubCollection::new(
                        QubitBasis::new(u1).unwrap(),
                        QubitBasis::new(u2).unwrap(),
                    )
                    .unwrap()
                })
                .collect();
            let mubs = MubAssignment {
                links: [links[0].clone(), links[1].clone(), links[2].clone()],
            };
            let exact = qber_exact([&states[0], &states[1], &states[2]], &mubs);
            let min = qber_min_over_mubs(&[triples[0], triples[1], triples[2]]);
            assert!(min <= exact + 1e-9, "min {min} exceeds exact {exact}");
            checked += 1;
        }
    }
}
