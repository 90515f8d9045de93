//! Witness strategies behind a common trait, registered by name.
//!
//! The two protocol variants differ only in how the broadcast rounds are
//! judged: detection of full network nonlocality through the trilocal
//! inequality, or pairwise Bell-CHSH violation on every link. Each variant
//! supplies its classical bound, its setting planner, its security checks
//! and its critical QBER; the simulation engine and the CLI select one at
//! runtime by name.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measurement::{bipartite_statistics, trilocal_statistics, GhzBasis};
use crate::protocol::Estimate;
use crate::qstate::{SingularTriple, TwoQubitState};
use crate::security::{
    first_check_chsh, first_check_trilocal, second_check_chsh, second_check_trilocal,
    CheckResult, ProtocolKind, ThresholdKind,
};
use crate::trilocal::{
    chsh_value, optimize_chsh, optimize_trilocal, postprocess_hub_bit, setting_sign_exponent,
    ChshSettings, EdgeSettings, OptimizerConfig, CHSH_BOUND, TRILOCAL_BOUND,
};

/// One protocol variant: witness, checks, thresholds.
pub trait ProtocolStrategy: Sync {
    /// Registry key.
    fn name(&self) -> &'static str;
    fn kind(&self) -> ProtocolKind;
    /// Classical bound the witness must strictly exceed.
    fn witness_bound(&self) -> f64;
    /// Optimizes witness settings for the declared states.
    fn plan(
        &self,
        declared: [&TwoQubitState; 3],
        optimizer: &OptimizerConfig,
    ) -> Box<dyn WitnessPlan>;
    fn threshold_kind(&self, identical: bool) -> ThresholdKind;
    fn first_check(&self, triples: &[SingularTriple; 3]) -> CheckResult;
    fn second_check(&self, triples: &[SingularTriple; 3], identical: bool)
        -> Result<CheckResult>;
}

/// Witness settings frozen for one run.
pub trait WitnessPlan {
    /// Exact witness value on the states actually distributed.
    fn exact(&self, actual: [&TwoQubitState; 3]) -> f64;
    /// Monte-Carlo witness estimate from `rounds` sampled broadcast rounds.
    fn sampled(
        &self,
        actual: [&TwoQubitState; 3],
        rounds: usize,
        rng: &mut ChaCha8Rng,
    ) -> Estimate;
}

/// Security through the trilocal full-network-nonlocality inequality.
pub struct TrilocalStrategy;

/// Security through Bell-CHSH violation on each of the three links.
pub struct ChshStrategy;

static TRILOCAL_STRATEGY: TrilocalStrategy = TrilocalStrategy;
static CHSH_STRATEGY: ChshStrategy = ChshStrategy;

/// All registered strategies.
pub fn strategy_registry() -> [&'static dyn ProtocolStrategy; 2] {
    [&TRILOCAL_STRATEGY, &CHSH_STRATEGY]
}

/// Finds a strategy by its registry key.
pub fn lookup_strategy(name: &str) -> Option<&'static dyn ProtocolStrategy> {
    strategy_registry().into_iter().find(|s| s.name() == name)
}

struct TrilocalPlan {
    settings: EdgeSettings,
    ghz: GhzBasis,
}

impl WitnessPlan for TrilocalPlan {
    fn exact(&self, actual: [&TwoQubitState; 3]) -> f64 {
        crate::trilocal::trilocal_value(&trilocal_statistics(
            actual,
            &self.settings.bases,
            &self.ghz,
        ))
    }

    fn sampled(
        &self,
        actual: [&TwoQubitState; 3],
        rounds: usize,
        rng: &mut ChaCha8Rng,
    ) -> Estimate {
        let stats = trilocal_statistics(actual, &self.settings.bases, &self.ghz);
        let mut sums = [[0.0f64; 8]; 4];
        let mut counts = [0usize; 8];
        for _ in 0..rounds {
            let setting = rng.gen_range(0..8usize);
            let outcome = stats.sample(setting, rng);
            counts[setting] += 1;
            let hub = [
                ((outcome >> 5) & 1) as u8,
                ((outcome >> 4) & 1) as u8,
                ((outcome >> 3) & 1) as u8,
            ];
            let edge_parity =
                ((outcome >> 2) & 1) as u8 ^ ((outcome >> 1) & 1) as u8 ^ (outcome & 1) as u8;
            for (i, sums_i) in sums.iter_mut().enumerate() {
                let parity = postprocess_hub_bit(i, hub) ^ edge_parity;
                sums_i[setting] += if parity == 0 { 1.0 } else { -1.0 };
            }
        }
        let mut value = 0.0;
        let mut variance = 0.0;
        for i in 0..4 {
            let mut j = 0.0;
            let mut var_j = 0.0;
            for setting in 0..8usize {
                let n = counts[setting].max(1) as f64;
                let e = sums[i][setting] / n;
                let x = [
                    ((setting >> 2) & 1) as u8,
                    ((setting >> 1) & 1) as u8,
                    (setting & 1) as u8,
                ];
                let sign = if setting_sign_exponent(i, x) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                j += sign * e;
                var_j += (1.0 - e * e).max(0.0) / n;
            }
            j /= 8.0;
            var_j /= 64.0;
            value += 0.5 * j.abs().cbrt();
            // Delta method: d(½|J|^{1/3})/dJ = |J|^{-2/3}/6, floored away
            // from the non-differentiable point at 0.
            let slope = j.abs().max(1e-3).powf(-2.0 / 3.0) / 6.0;
            variance += slope * slope * var_j;
        }
        Estimate {
            value,
            std_err: variance.sqrt(),
        }
    }
}

impl ProtocolStrategy for TrilocalStrategy {
    fn name(&self) -> &'static str {
        "trilocal"
    }

    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Trilocal
    }

    fn witness_bound(&self) -> f64 {
        TRILOCAL_BOUND
    }

    fn plan(
        &self,
        declared: [&TwoQubitState; 3],
        optimizer: &OptimizerConfig,
    ) -> Box<dyn WitnessPlan> {
        let ghz = GhzBasis::default();
        let (settings, _) = optimize_trilocal(declared, &ghz, optimizer);
        Box::new(TrilocalPlan { settings, ghz })
    }

    fn threshold_kind(&self, identical: bool) -> ThresholdKind {
        if identical {
            ThresholdKind::TrilocalIdentical
        } else {
            ThresholdKind::TrilocalGeneral
        }
    }

    fn first_check(&self, triples: &[SingularTriple; 3]) -> CheckResult {
        first_check_trilocal(triples)
    }

    fn second_check(
        &self,
        triples: &[SingularTriple; 3],
        identical: bool,
    ) -> Result<CheckResult> {
        second_check_trilocal(triples, identical)
    }
}

struct ChshLinkPlan {
    settings: ChshSettings,
    /// Sign of the optimal CHSH combination for the declared state.
    sign: f64,
}

struct ChshPlan {
    links: [ChshLinkPlan; 3],
}

impl WitnessPlan for ChshPlan {
    fn exact(&self, actual: [&TwoQubitState; 3]) -> f64 {
        (0..3)
            .map(|i| {
                let b = bipartite_statistics(
                    actual[i],
                    &self.links[i].settings.hub,
                    &self.links[i].settings.edge,
                );
                self.links[i].sign * chsh_value(&b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn sampled(
        &self,
        actual: [&TwoQubitState; 3],
        rounds: usize,
        rng: &mut ChaCha8Rng,
    ) -> Estimate {
        let behaviors: Vec<_> = (0..3)
            .map(|i| {
                bipartite_statistics(
                    actual[i],
                    &self.links[i].settings.hub,
                    &self.links[i].settings.edge,
                )
            })
            .collect();
        let mut sums = [[[0.0f64; 2]; 2]; 3];
        let mut counts = [[[0usize; 2]; 2]; 3];
        for r in 0..rounds {
            let link = r % 3;
            let x = rng.gen_range(0..2usize);
            let y = rng.gen_range(0..2usize);
            let (a, b) = behaviors[link].sample(x, y, rng);
            counts[link][x][y] += 1;
            sums[link][x][y] += if a == b { 1.0 } else { -1.0 };
        }
        let mut worst = Estimate {
            value: f64::INFINITY,
            std_err: 0.0,
        };
        for link in 0..3 {
            let mut s = 0.0;
            let mut var = 0.0;
            for x in 0..2 {
                for y in 0..2 {
                    let n = counts[link][x][y].max(1) as f64;
                    let e = sums[link][x][y] / n;
                    let sign = if x == 1 && y == 1 { -1.0 } else { 1.0 };
                    s += sign * e;
                    var += (1.0 - e * e).max(0.0) / n;
                }
            }
            s *= self.links[link].sign;
            let se = var.sqrt();
            if s - 2.0 * se < worst.value - 2.0 * worst.std_err {
                worst = Estimate {
                    value: s,
                    std_err: se,
                };
            }
        }
        worst
    }
}

impl ProtocolStrategy for ChshStrategy {
    fn name(&self) -> &'static str {
        "chsh"
    }

    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Chsh
    }

    fn witness_bound(&self) -> f64 {
        CHSH_BOUND
    }

    fn plan(
        &self,
        declared: [&TwoQubitState; 3],
        optimizer: &OptimizerConfig,
    ) -> Box<dyn WitnessPlan> {
        let links = std::array::from_fn(|i| {
            let (settings, _) = optimize_chsh(declared[i], optimizer);
            let b = bipartite_statistics(declared[i], &settings.hub, &settings.edge);
            let raw = chsh_value(&b);
            ChshLinkPlan {
                settings,
                sign: if raw >= 0.0 { 1.0 } else { -1.0 },
            }
        });
        Box::new(ChshPlan { links })
    }

    fn threshold_kind(&self, identical: bool) -> ThresholdKind {
        if identical {
            ThresholdKind::ChshCount(3)
        } else {
            ThresholdKind::ChshCount(1)
        }
    }

    fn first_check(&self, triples: &[SingularTriple; 3]) -> CheckResult {
        let c = first_check_chsh(triples);
        let binding = c
            .per_link
            .iter()
            .cloned()
            .min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap())
            .unwrap();
        CheckResult {
            pass: c.pass,
            ..binding
        }
    }

    fn second_check(
        &self,
        triples: &[SingularTriple; 3],
        identical: bool,
    ) -> Result<CheckResult> {
        second_check_chsh(triples, identical)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{phi_plus, werner};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn registry_resolves_both_strategies() {
        assert_eq!(strategy_registry().len(), 2);
        assert!(lookup_strategy("trilocal").is_some());
        assert!(lookup_strategy("chsh").is_some());
        assert!(lookup_strategy("bilocal").is_none());
        assert_eq!(lookup_strategy("trilocal").unwrap().kind(), ProtocolKind::Trilocal);
    }

    #[test]
    fn trilocal_plan_exact_and_sampled_agree() {
        let p = phi_plus();
        let strategy = lookup_strategy("trilocal").unwrap();
        let optimizer = OptimizerConfig {
            restarts: 3,
            ..OptimizerConfig::default()
        };
        let plan = strategy.plan([&p, &p, &p], &optimizer);
        let exact = plan.exact([&p, &p, &p]);
        assert_abs_diff_eq!(exact, std::f64::consts::SQRT_2, epsilon = 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let est = plan.sampled([&p, &p, &p], 100_000, &mut rng);
        assert!((est.value - exact).abs() < 4.0 * est.std_err.max(1e-3));
        assert!(est.value > strategy.witness_bound() + 5.0 * est.std_err);
    }

    #[test]
    fn chsh_plan_reports_binding_link() {
        let strong = phi_plus();
        let weak = werner(0.5).unwrap();
        let strategy = lookup_strategy("chsh").unwrap();
        let optimizer = OptimizerConfig {
            restarts: 4,
            ..OptimizerConfig::default()
        };
        let plan = strategy.plan([&strong, &strong, &weak], &optimizer);
        let exact = plan.exact([&strong, &strong, &weak]);
        // Weakest link: Werner(0.5) has maximal CHSH 2√2·0.5 ≈ 1.414 < 2.
        assert_abs_diff_eq!(exact, std::f64::consts::SQRT_2, epsilon = 1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let est = plan.sampled([&strong, &strong, &weak], 90_000, &mut rng);
        assert!(est.value < 2.0);
    }

    #[test]
    fn threshold_kinds_follow_identity_flag() {
        let t = lookup_strategy("trilocal").unwrap();
        assert_eq!(t.threshold_kind(true), ThresholdKind::TrilocalIdentical);
        assert_eq!(t.threshold_kind(false), ThresholdKind::TrilocalGeneral);
        let c = lookup_strategy("chsh").unwrap();
        assert_eq!(c.threshold_kind(true), ThresholdKind::ChshCount(3));
        assert_eq!(c.threshold_kind(false), ThresholdKind::ChshCount(1));
    }
}
