//! The trilocal full-network-nonlocality inequality and the Bell-CHSH
//! witness, with numeric optimization of measurement settings.
//!
//! The inequality reads ½ Σᵢ |Jᵢ|^{1/3} ≤ 2^{1/3}. Each correlator Jᵢ
//! averages the hub's classically post-processed GHZ output against the edge
//! outputs with a setting-dependent sign (−1)^{gᵢ}:
//!
//! ã₁⁽¹⁾ = a₁₁              g₁ = 0
//! ã₁⁽²⁾ = a₁₁⊕a₁₂⊕1        g₂ = x₂+x₃
//! ã₁⁽³⁾ = a₁₁⊕a₁₃⊕1        g₃ = x₂+x₄
//! ã₁⁽⁴⁾ = a₁₁⊕a₁₂⊕a₁₃⊕1    g₄ = x₃+x₄
//!
//! For diagonal-tensor sources the quantum maximum over edge settings is
//! √((Πᵢ tᵢ,₁)^{2/3} + (Πᵢ tᵢ,₂)^{2/3}), taken over the two largest singular
//! values of each correlation tensor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    bipartite_statistics, trilocal_statistics, BipartiteBehavior, GhzBasis, QubitBasis,
    TrilocalStatistics,
};
use crate::qstate::{SingularTriple, TwoQubitState};

/// Classical (trilocal) bound 2^{1/3} of the inequality.
pub const TRILOCAL_BOUND: f64 = 1.2599210498948732;
/// Classical bound of the Bell-CHSH inequality.
pub const CHSH_BOUND: f64 = 2.0;

/// The four signed correlators of the trilocal inequality.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CorrelatorSet {
    j: [f64; 4],
}

impl CorrelatorSet {
    pub fn new(j: [f64; 4]) -> Result<Self> {
        for v in j {
            if v.abs() > 1.0 + 1e-10 {
                return Err(Error::InvalidState(format!(
                    "correlator {v} outside [-1, 1]"
                )));
            }
        }
        Ok(CorrelatorSet { j })
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.j
    }

    /// S = ½ Σ |Jᵢ|^{1/3}.
    pub fn value(&self) -> f64 {
         0.5 * self.j.iter().map(|v| v.abs().cbrt()).sum::<f64>()
    }
}

/// Post-processed hub bit for correlator `i` (0-based) from ā₁.
pub fn postprocess_hub_bit(i: usize, hub: [u8; 3]) -> u8 {
    match i {
        0 => hub[0],
        1 => hub[0] ^ hub[1] ^ 1,
        2 => hub[0] ^ hub[2] ^ 1,
        3 => hub[0] ^ hub[1] ^ hub[2] ^ 1,
        _ => panic!("correlator index out of range"),
    }
}

/// Setting-sign exponent gᵢ(x₂,x₃,x₄).
pub fn setting_sign_exponent(i: usize, x: [u8; 3]) -> u8 {
    match i {
        0 => 0,
        1 => x[0] + x[1],
        2 => x[0] + x[2],
        3 => x[1] + x[2],
        _ => panic!("correlator index out of range"),
    }
}

/// Extracts J₁..J₄ from a behavior by signed averaging over the 8 settings
/// and 64 outcomes.
pub fn correlators(stats: &TrilocalStatistics) -> CorrelatorSet {
    let mut j = [0.0f64; 4];
    for setting in 0..8usize {
        let x = [
            ((setting >> 2) & 1) as u8,
            ((setting >> 1) & 1) as u8,
            (setting & 1) as u8,
        ];
        for outcome in 0..64usize {
            let p = stats.prob(setting, outcome);
            if p == 0.0 {
                continue;
            }
            let hub = [
                ((outcome >> 5) & 1) as u8,
                ((outcome >> 4) & 1) as u8,
                ((outcome >> 3) & 1) as u8,
            ];
            let edge_parity =
                ((outcome >> 2) & 1) as u8 ^ ((outcome >> 1) & 1) as u8 ^ (outcome & 1) as u8;
            for (i, ji) in j.iter_mut().enumerate() {
                let parity =
                    postprocess_hub_bit(i, hub) ^ edge_parity ^ (setting_sign_exponent(i, x) & 1);
                let sign = if parity == 0 { 1.0 } else { -1.0 };
                *ji += sign * p;
            }
        }
    }
    for ji in j.iter_mut() {
        *ji /= 8.0;
    }
    CorrelatorSet::new(j).expect("correlators of a normalized behavior are bounded")
}

/// S = ½ Σ |Jᵢ|^{1/3} of a behavior; violation of trilocality iff S > 2^{1/3}.
pub fn trilocal_value(stats: &TrilocalStatistics) -> f64 {
    correlators(stats).value()
}

/// Quantum maximum √((Π tᵢ,₁)^{2/3} + (Π tᵢ,₂)^{2/3}) over edge settings for
/// diagonal-tensor sources; the witness flags full network nonlocality when
/// it exceeds 2^{1/3}.
pub fn analytic_bound(triples: &[SingularTriple; 3]) -> f64 {
    let p1: f64 = triples.iter().map(|t| t.t1()).product();
    let p2: f64 = triples.iter().map(|t| t.t2()).product();
    ((p1 * p1).cbrt() + (p2 * p2).cbrt()).sqrt()
}

/// Horodecki quantity t₁² + t₂²; the state is Bell-CHSH nonlocal iff > 1.
pub fn chsh_horodecki(triple: &SingularTriple) -> f64 {
    triple.t1() * triple.t1() + triple.t2() * triple.t2()
}

/// CHSH combination E(0,0)+E(0,1)+E(1,0)−E(1,1) of a bipartite behavior.
pub fn chsh_value(behavior: &BipartiteBehavior) -> f64 {
    behavior.correlator(0, 0) + behavior.correlator(0, 1) + behavior.correlator(1, 0)
        - behavior.correlator(1, 1)
}

/// Edge-measurement settings: two Bloch axes per edge party.
#[derive(Clone, Debug)]
pub struct EdgeSettings {
    pub bases: [[QubitBasis; 2]; 3],
}

/// Settings for a bipartite CHSH test: two axes per party.
#[derive(Clone, Debug)]
pub struct ChshSettings {
    pub hub: [QubitBasis; 2],
    pub edge: [QubitBasis; 2],
}

/// Controls for the coordinate-ascent setting optimizers.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 20,
            tolerance: 1e-9,
            seed: 0x5eed,
        }
    }
}

fn ascend<F: Fn(&[f64]) -> f64>(f: &F, x: &mut [f64], tolerance: f64) -> f64 {
    let mut fx = f(x);
    let mut step = 0.4;
    while step > tolerance {
        let mut improved = false;
        for i in 0..x.len() {
            for delta in [step, -step] {
                let old = x[i];
                x[i] = old + delta;
                let fy = f(x);
                if fy > fx {
                    fx = fy;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    fx
}

fn bases_from_angles(angles: &[f64]) -> [[QubitBasis; 2]; 3] {
    std::array::from_fn(|k| {
        std::array::from_fn(|j| {
            QubitBasis::from_angles(angles[4 * k + 2 * j], angles[4 * k + 2 * j + 1])
        })
    })
}

/// Maximizes the trilocal value over edge Bloch axes by coordinate ascent on
/// spherical angles with seeded restarts. The first restart starts from the
/// planar ±π/4 family that is optimal for maximally entangled sources.
pub fn optimize_trilocal(
    states: [&TwoQubitState; 3],
    ghz: &GhzBasis,
    config: &OptimizerConfig,
) -> (EdgeSettings, f64) {
    let objective = |angles: &[f64]| -> f64 {
        let bases = bases_from_angles(angles);
        trilocal_value(&trilocal_statistics(states, &bases, ghz))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best_angles = vec![0.0; 12];
    let mut best = f64::NEG_INFINITY;
    for restart in 0..config.restarts.max(1) {
        let mut angles: Vec<f64> = if restart == 0 {
            (0..12)
                .map(|i| {
                    if i % 2 == 0 {
                        std::f64::consts::FRAC_PI_2
                    } else if (i / 2) % 2 == 0 {
                        std::f64::consts::FRAC_PI_4
                    } else {
                        -std::f64::consts::FRAC_PI_4
                    }
                })
                .collect()
        } else {
            (0..12)
                .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
                .collect()
        };
        let val = ascend(&objective, &mut angles, config.tolerance);
        if val > best {
            best = val;
            best_angles = angles;
        }
    }
    (
        EdgeSettings {
            bases: bases_from_angles(&best_angles),
        },
        best,
    )
}

/// Maximizes the CHSH value of a two-qubit state over both parties' axes.
/// The maximum equals 2√(t₁²+t₂²) up to optimizer tolerance.
pub fn optimize_chsh(state: &TwoQubitState, config: &OptimizerConfig) -> (ChshSettings, f64) {
    let objective = |angles: &[f64]| -> f64 {
        let hub = [
            QubitBasis::from_angles(angles[0], angles[1]),
            QubitBasis::from_angles(angles[2], angles[3]),
        ];
        let edge = [
            QubitBasis::from_angles(angles[4], angles[5]),
            QubitBasis::from_angles(angles[6], angles[7]),
        ];
        chsh_value(&bipartite_statistics(state, &hub, &edge)).abs()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xc45);
    let mut best_angles = vec![0.0; 8];
    let mut best = f64::NEG_INFINITY;
    for restart in 0..config.restarts.max(1) {
        let mut angles: Vec<f64> = if restart == 0 {
            // z/x for one side, diagonal pair for the other.
            vec![
                0.0,
                0.0,
                std::f64::consts::FRAC_PI_2,
                0.0,
                std::f64::consts::FRAC_PI_4,
                0.0,
                3.0 * std::f64::consts::FRAC_PI_4,
                0.0,
            ]
        } else {
            (0..8)
                .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
                .collect()
        };
        let val = ascend(&objective, &mut angles, config.tolerance);
        if val > best {
            best = val;
            best_angles = angles;
        }
    }
    (
        ChshSettings {
            hub: [
                QubitBasis::from_angles(best_angles[0], best_angles[1]),
                QubitBasis::from_angles(best_angles[2], best_angles[3]),
            ],
            edge: [
                QubitBasis::from_angles(best_angles[4], best_angles[5]),
                QubitBasis::from_angles(best_angles[6], best_angles[7]),
            ],
        },
        best,
    )
}
