//! End-to-end Monte-Carlo simulation of both four-party protocols through
//! raw-key generation.
//!
//! A run realizes the declared states, applies channel noise and the
//! optional eavesdropper, tests the witness (trilocal inequality or per-link
//! Bell-CHSH, selected by name through the strategy registry), sifts bases,
//! estimates the QBER against the applicable critical value, and emits the
//! raw keys. Error correction and privacy amplification are out of scope.
//!
//! Witness settings are the optimizer's output for the declared states
//! (after the declared noise channel, before any tampering); thresholds use
//! the identical-state forms when the config declares identical states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{MubCollection, QubitBasis};
use crate::qber::{conjugate_link, ConjugatedLink, MubAssignment};
use crate::qstate::{
    depolarize, kron2, singular_values, to_bloch, Side, SingularTriple, StateDescriptor,
    TwoQubitState,
};
use crate::security::Threshold;
use crate::strategy::{lookup_strategy, ProtocolStrategy};
use crate::trilocal::OptimizerConfig;

/// Protocol variant selector; resolves to a registered strategy by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "N4_Trilocal")]
    Trilocal,
    #[serde(rename = "N4_Chsh")]
    Chsh,
}

impl Variant {
    pub fn strategy_name(&self) -> &'static str {
        match self {
            Variant::Trilocal => "trilocal",
            Variant::Chsh => "chsh",
        }
    }

    pub fn strategy(&self) -> &'static dyn ProtocolStrategy {
        lookup_strategy(self.strategy_name()).expect("built-in strategy is registered")
    }
}

/// Eavesdropper model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EveStrategy {
    InterceptResendRandomMub,
}

/// Which links Eve intercepts (1-based, subset of {1,2,3}) and how.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EveConfig {
    pub links: Vec<u8>,
    pub strategy: EveStrategy,
}

/// Nominal MUB axes per link.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum MubSpec {
    /// x/y nominal axes: the two leading principal directions.
    Principal,
    /// z/x nominal axes.
    Zx,
    /// Explicit per-link axis pairs.
    Axes([[[f64; 3]; 2]; 3]),
}

impl MubSpec {
    pub fn assignment(&self) -> Result<MubAssignment> {
        match self {
            MubSpec::Principal => Ok(MubAssignment::principal()),
            MubSpec::Zx => Ok(MubAssignment::zx()),
            MubSpec::Axes(axes) => {
                let mut links = Vec::new();
                for pair in axes {
                    links.push(MubCollection::new(
                        QubitBasis::new(nalgebra::Vector3::from_column_slice(&pair[0]))?,
                        QubitBasis::new(nalgebra::Vector3::from_column_slice(&pair[1]))?,
                    )?);
                }
                Ok(MubAssignment {
                    links: [links[0].clone(), links[1].clone(), links[2].clone()],
                })
            }
        }
    }
}

fn default_fraction() -> f64 {
    0.5
}

/// Full description of a simulated run. Mirrors the JSON config schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub variant: Variant,
    /// One descriptor (implies three identical states) or three.
    pub states: Vec<StateDescriptor>,
    /// Per-link depolarizing probability on the transmitted qubit
    /// (one value is replicated to all links).
    #[serde(default)]
    pub noise: Option<Vec<f64>>,
    #[serde(default)]
    pub eve: Option<EveConfig>,
    /// Total rounds n.
    pub rounds: usize,
    /// Fraction (n−n₁)/n of rounds spent on the witness test.
    #[serde(default = "default_fraction")]
    pub witness_fraction: f64,
    #[serde(default)]
    pub mubs: Option<MubSpec>,
    pub seed: u64,
    /// Estimate the witness from sampled rounds instead of exact statistics.
    #[serde(default)]
    pub sampled_witness: bool,
    /// Continue through sifting even if the witness test fails.
    #[serde(default)]
    pub force_continue: bool,
    /// Override the witness-settings optimizer restart count.
    #[serde(default)]
    pub optimizer_restarts: Option<usize>,
}

/// A value with its standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Where a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortStage {
    None,
    WitnessTest,
    QberTest,
}

/// Outputs of a simulated run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub abort_stage: AbortStage,
    pub witness: Estimate,
    /// Classical bound the witness must exceed (2^{1/3}, or 2 per link).
    pub witness_bound: f64,
    pub qber: Option<Estimate>,
    pub qber_threshold: Threshold,
    /// Sifted length n₂.
    pub sifted_length: usize,
    /// Sifting rounds n₁.
    pub sifting_rounds: usize,
    /// Hub key: n₂ blocks of 3 bits, space-separated.
    pub hub_key: String,
    /// One bit string of length n₂ per edge party.
    pub edge_keys: [String; 3],
}

/// Intercept-resend channel: Eve measures the transmitted qubit in a basis
/// drawn uniformly from the link's pair and forwards the eigenstate. The
/// average channel dephases the B side along each axis with weight ½.
pub fn eve_channel(
    state: &TwoQubitState,
    strategy: EveStrategy,
    edge_bases: &[QubitBasis; 2],
) -> TwoQubitState {
    match strategy {
        EveStrategy::InterceptResendRandomMub => {
            let id = nalgebra::Matrix2::<num_complex::Complex64>::identity();
            let mut out = nalgebra::Matrix4::<num_complex::Complex64>::zeros();
            for basis in edge_bases {
                for outcome in 0..2u8 {
                    let k = kron2(&id, &basis.projector(outcome));
                    out += k * state.matrix() * k * num_complex::Complex64::new(0.5, 0.0);
                }
            }
            TwoQubitState::new(out).expect("intercept-resend output is CPTP")
        }
    }
}

/// Fraction of sifted rounds in which the hub block disagrees with at least
/// one edge bit, with its binomial standard error.
pub fn estimate_qber(hub_blocks: &[[u8; 3]], edge_keys: [&[u8]; 3]) -> Result<Estimate> {
    let n = hub_blocks.len();
    for (link, key) in edge_keys.iter().enumerate() {
        if key.len() != n {
            return Err(Error::LengthMismatch {
                hub: n,
                link: link + 1,
                edge: key.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::InsufficientStatistics(0));
    }
    let mut errors = 0usize;
    for (m, block) in hub_blocks.iter().enumerate() {
        if (0..3).any(|i| block[i] != edge_keys[i][m]) {
            errors += 1;
        }
    }
    let q = errors as f64 / n as f64;
    Ok(Estimate {
        value: q,
        std_err: (q * (1.0 - q) / n as f64).sqrt(),
    })
}

struct PreparedRun {
    declared: [TwoQubitState; 3],
    actual: [TwoQubitState; 3],
    declared_triples: [SingularTriple; 3],
    identical: bool,
    links: [ConjugatedLink; 3],
}

fn prepare(config: &ProtocolConfig) -> Result<PreparedRun> {
    if config.rounds < 1000 {
        return Err(Error::Config(format!(
            "rounds {} below the statistical minimum of 1000",
            config.rounds
        )));
    }
    if !(config.witness_fraction > 0.0 && config.witness_fraction < 1.0) {
        return Err(Error::Config(format!(
            "witness fraction {} outside (0, 1)",
            config.witness_fraction
        )));
    }
    let descriptors: Vec<StateDescriptor> = match config.states.len() {
        1 => vec![config.states[0].clone(); 3],
        3 => config.states.clone(),
        k => {
            return Err(Error::Config(format!(
                "expected 1 or 3 state descriptors, got {k}"
            )))
        }
    };
    let identical =
        descriptors[0] == descriptors[1] && descriptors[1] == descriptors[2];

    let noise: Vec<f64> = match &config.noise {
        None => vec![0.0; 3],
        Some(v) if v.len() == 1 => vec![v[0]; 3],
        Some(v) if v.len() == 3 => v.clone(),
        Some(v) => {
            return Err(Error::Config(format!(
                "expected 1 or 3 noise entries, got {}",
                v.len()
            )))
        }
    };

    let mut declared = Vec::new();
    for (desc, p) in descriptors.iter().zip(&noise) {
        let state = desc.realize()?;
        declared.push(if *p > 0.0 {
            depolarize(&state, *p, Side::B)?
        } else {
            state
        });
    }

    let mubs = config
        .mubs
        .clone()
        .unwrap_or(MubSpec::Principal)
        .assignment()?;
    let links: Vec<ConjugatedLink> = declared
        .iter()
        .zip(mubs.links.iter())
        .map(|(s, m)| conjugate_link(s, m))
        .collect::<Result<_>>()?;

    let mut actual = declared.clone();
    if let Some(eve) = &config.eve {
        for &link in &eve.links {
            if !(1..=3).contains(&link) {
                return Err(Error::Config(format!("eve link {link} outside 1..=3")));
            }
            let i = link as usize - 1;
            actual[i] = eve_channel(&actual[i], eve.strategy, &links[i].edge);
        }
    }

    let declared_triples: Vec<SingularTriple> = declared
        .iter()
        .map(|s| singular_values(&to_bloch(s).r))
        .collect::<Result<_>>()?;

    Ok(PreparedRun {
        declared: [
            declared[0].clone(),
            declared[1].clone(),
            declared[2].clone(),
        ],
        actual: [actual[0].clone(), actual[1].clone(), actual[2].clone()],
        declared_triples: [
            declared_triples[0],
            declared_triples[1],
            declared_triples[2],
        ],
        identical,
        links: [links[0].clone(), links[1].clone(), links[2].clone()],
    })
}

/// Runs the configured protocol end to end. Identical config and seed give
/// an identical result.
pub fn run(config: &ProtocolConfig) -> Result<RunResult> {
    let prep = prepare(config)?;
    let strategy = config.variant.strategy();
    let threshold = crate::security::threshold(strategy.threshold_kind(prep.identical))?;

    let optimizer = OptimizerConfig {
        restarts: config.optimizer_restarts.unwrap_or(20),
        seed: config.seed ^ 0x9e3779b97f4a7c15,
        ..OptimizerConfig::default()
    };
    let declared_refs = [&prep.declared[0], &prep.declared[1], &prep.declared[2]];
    let actual_refs = [&prep.actual[0], &prep.actual[1], &prep.actual[2]];
    let plan = strategy.plan(declared_refs, &optimizer);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let witness_rounds = ((config.rounds as f64) * config.witness_fraction).round() as usize;
    let sifting_rounds = config.rounds - witness_rounds;

    let witness = if config.sampled_witness {
        plan.sampled(actual_refs, witness_rounds, &mut rng)
    } else {
        Estimate {
            value: plan.exact(actual_refs),
            std_err: 0.0,
        }
    };
    let witness_bound = strategy.witness_bound();
    let witness_pass = witness.value > witness_bound + 2.0 * witness.std_err;

    if !witness_pass && !config.force_continue {
        return Ok(RunResult {
            abort_stage: AbortStage::WitnessTest,
            witness,
            witness_bound,
            qber: None,
            qber_threshold: threshold,
            sifted_length: 0,
            sifting_rounds,
            hub_key: String::new(),
            edge_keys: Default::default(),
        });
    }

    // Sifting: per round and link both parties draw a basis; the round is
    // kept only when all three links matched. Outcomes are then drawn from
    // the actual states measured along the conjugated axes.
    let mut outcome_tables = [[[0.0f64; 4]; 2]; 3];
    for (i, table) in outcome_tables.iter_mut().enumerate() {
        let m = prep.actual[i].matrix();
        for j in 0..2 {
            for hub_bit in 0..2u8 {
                for edge_bit in 0..2u8 {
                    let op = kron2(
                        &prep.links[i].hub[j].projector(hub_bit),
                        &prep.links[i].edge[j].projector(edge_bit),
                    );
                    table[j][(hub_bit * 2 + edge_bit) as usize] =
                        (m * op).trace().re.max(0.0);
                }
            }
        }
    }

    let mut hub_blocks: Vec<[u8; 3]> = Vec::new();
    let mut edge_bits: [Vec<u8>; 3] = Default::default();
    for _ in 0..sifting_rounds {
        let mut matched = [usize::MAX; 3];
        let mut all = true;
        for link in matched.iter_mut() {
            let hub_choice = rng.gen_range(0..2usize);
            let edge_choice = rng.gen_range(0..2usize);
            if hub_choice == edge_choice {
                *link = hub_choice;
            } else {
                all = false;
            }
        }
        if !all {
            continue;
        }
        let mut block = [0u8; 3];
        for link in 0..3 {
            let table = &outcome_tables[link][matched[link]];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut outcome = 3usize;
            for (o, p) in table.iter().enumerate() {
                acc += p;
                if u < acc {
                    outcome = o;
                    break;
                }
            }
            block[link] = (outcome >> 1) as u8;
            edge_bits[link].push((outcome & 1) as u8);
        }
        hub_blocks.push(block);
    }

    let sifted_length = hub_blocks.len();
    if sifted_length < 100 {
        return Err(Error::InsufficientStatistics(sifted_length));
    }
    let qber = estimate_qber(
        &hub_blocks,
        [&edge_bits[0], &edge_bits[1], &edge_bits[2]],
    )?;
    let qber_pass = qber.value < threshold.value;

    let hub_key = hub_blocks
        .iter()
        .map(|b| format!("{}{}{}", b[0], b[1], b[2]))
        .collect::<Vec<_>>()
        .join(" ");
    let edge_keys: [String; 3] = std::array::from_fn(|i| {
        edge_bits[i].iter().map(|b| char::from(b'0' + b)).collect()
    });

    let abort_stage = if !witness_pass {
        AbortStage::WitnessTest
    } else if !qber_pass {
        AbortStage::QberTest
    } else {
        AbortStage::None
    };

    Ok(RunResult {
        abort_stage,
        witness,
        witness_bound,
        qber: Some(qber),
        qber_threshold: threshold,
        sifted_length,
        sifting_rounds,
        hub_key,
        edge_keys,
    })
}
