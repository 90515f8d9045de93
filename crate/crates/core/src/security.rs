//! Security criteria and thresholds of both protocols.
//!
//! Every criterion is a strict inequality on the two largest singular values
//! of the three link correlation tensors; equality fails. Margins are
//! reported in the raw units of each inequality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::SingularTriple;

/// 2^{2/3}, the non-violation bound of the first trilocal criterion.
pub fn fnn_first_bound() -> f64 {
    2.0f64.powf(2.0 / 3.0)
}

/// 2^{5/6}, the identical-states second-criterion line for the FNN protocol.
pub fn trilocal_line() -> f64 {
    2.0f64.powf(5.0 / 6.0)
}

/// 16(3+(2^{2/3}−1)^{3/2}), the general second-criterion bound (FNN protocol).
pub fn trilocal_second_bound() -> f64 {
    16.0 * (3.0 + (2.0f64.powf(2.0 / 3.0) - 1.0).powf(1.5))
}

/// 16√2(1+√2), the general second-criterion bound (CHSH protocol).
pub fn chsh_second_bound() -> f64 {
    16.0 * std::f64::consts::SQRT_2 * (1.0 + std::f64::consts::SQRT_2)
}

/// √2, the identical-states second-criterion line for the CHSH protocol.
pub fn chsh_line() -> f64 {
    std::f64::consts::SQRT_2
}

/// 2^{4/3}(3+(2^{2/3}−1)^{3/2})^{1/3} − 2, the upper edge of the
/// misclassification band.
pub fn misclassification_upper() -> f64 {
    2.0f64.powf(4.0 / 3.0) * (3.0 + (2.0f64.powf(2.0 / 3.0) - 1.0).powf(1.5)).powf(1.0 / 3.0)
        - 2.0
}

/// Which QBER threshold applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdKind {
    /// FNN protocol, three identical states.
    TrilocalIdentical,
    /// FNN protocol, states not all identical.
    TrilocalGeneral,
    /// CHSH protocol with `c` pairs not observing a violation.
    ChshCount(u8),
}

impl std::fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThresholdKind::TrilocalIdentical => write!(f, "trilocal-identical"),
            ThresholdKind::TrilocalGeneral => write!(f, "trilocal-general"),
            ThresholdKind::ChshCount(c) => write!(f, "chsh-count-{c}"),
        }
    }
}

/// A critical QBER value.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Threshold {
    pub kind: ThresholdKind,
    pub value: f64,
}

/// Closed-form critical QBER for a threshold kind.
pub fn threshold(kind: ThresholdKind) -> Result<Threshold> {
    let value = match kind {
        ThresholdKind::TrilocalIdentical => {
            1.0 - std::f64::consts::SQRT_2 * (1.0 + 2.0f64.powf(1.0 / 6.0)).powi(3) / 16.0
        }
        ThresholdKind::TrilocalGeneral => {
            1.0 - (3.0 + (2.0f64.powf(2.0 / 3.0) - 1.0).powf(1.5)) / 4.0
        }
        ThresholdKind::ChshCount(c) => {
            if !(1..=3).contains(&c) {
                return Err(Error::Config(format!(
                    "chsh threshold count {c} outside 1..=3"
                )));
            }
            let r = (1.0 + std::f64::consts::SQRT_2) / (2.0 * std::f64::consts::SQRT_2);
            1.0 - r.powi(c as i32)
        }
    };
    debug_assert!(value > 0.0 && value < 0.5);
    Ok(Threshold { kind, value })
}

/// Outcome of a single criterion check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub pass: bool,
    /// Left-hand side of the criterion inequality.
    pub lhs: f64,
    /// The bound the LHS is compared against.
    pub bound: f64,
    /// lhs − bound.
    pub margin: f64,
}

fn check(lhs: f64, bound: f64) -> CheckResult {
    CheckResult {
        pass: lhs > bound,
        lhs,
        bound,
        margin: lhs - bound,
    }
}

/// First FNN criterion: Π(tᵢ,₁)^{2/3} + Π(tᵢ,₂)^{2/3} > 2^{2/3}.
pub fn first_check_trilocal(triples: &[SingularTriple; 3]) -> CheckResult {
    let p1: f64 = triples.iter().map(|t| t.t1()).product();
    let p2: f64 = triples.iter().map(|t| t.t2()).product();
    check((p1 * p1).cbrt() + (p2 * p2).cbrt(), fnn_first_bound())
}

fn triples_identical(triples: &[SingularTriple; 3]) -> bool {
    let a = triples[0].as_array();
    triples.iter().all(|t| {
        let b = t.as_array();
        (0..3).all(|i| (a[i] - b[i]).abs() <= 1e-12)
    })
}

/// Second FNN criterion. General form: Π(2+tᵢ,₁+tᵢ,₂) > 16(3+(2^{2/3}−1)^{3/2});
/// identical form: t₁+t₂ > 2^{5/6}.
pub fn second_check_trilocal(
    triples: &[SingularTriple; 3],
    identical: bool,
) -> Result<CheckResult> {
    if identical {
        if !triples_identical(triples) {
            return Err(Error::IdenticalFlagMismatch);
        }
        Ok(check(triples[0].t1() + triples[0].t2(), trilocal_line()))
    } else {
        let prod: f64 = triples.iter().map(|t| 2.0 + t.t1() + t.t2()).product();
        Ok(check(prod, trilocal_second_bound()))
    }
}

/// Per-link Horodecki checks tᵢ,₁²+tᵢ,₂² > 1; the protocol passes only if
/// every link does.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ChshFirstCheck {
    pub per_link: [CheckResult; 3],
    pub pass: bool,
}

pub fn first_check_chsh(triples: &[SingularTriple; 3]) -> ChshFirstCheck {
    let per_link = std::array::from_fn(|i| {
        let t = &triples[i];
        check(t.t1() * t.t1() + t.t2() * t.t2(), 1.0)
    });
    ChshFirstCheck {
        per_link,
        pass: per_link.iter().all(|c: &CheckResult| c.pass),
    }
}

/// Second CHSH criterion. General: Π(2+tᵢ,₁+tᵢ,₂) > 16√2(1+√2);
/// identical: t₁+t₂ > √2.
pub fn second_check_chsh(triples: &[SingularTriple; 3], identical: bool) -> Result<CheckResult> {
    if identical {
        if !triples_identical(triples) {
            return Err(Error::IdenticalFlagMismatch);
        }
        Ok(check(triples[0].t1() + triples[0].t2(), chsh_line()))
    } else {
        let prod: f64 = triples.iter().map(|t| 2.0 + t.t1() + t.t2()).product();
        Ok(check(prod, chsh_second_bound()))
    }
}

/// Which protocol family a classification refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    Trilocal,
    Chsh,
}

/// Utility classes of a two-qubit state for a protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Fails the first check of the FNN protocol (trilocal state).
    Trilocal,
    /// FNN but below the second-criterion line: detectable yet unusable.
    FnnNotUseful,
    /// Fails the per-link Horodecki criterion.
    ChshLocal,
    /// Bell-CHSH nonlocal but below the CHSH second-criterion line.
    ChshNotUseful,
    /// Passes both checks of the chosen protocol.
    Useful,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Classification::Trilocal => "trilocal",
            Classification::FnnNotUseful => "fnn-not-useful",
            Classification::ChshLocal => "chsh-local",
            Classification::ChshNotUseful => "chsh-not-useful",
            Classification::Useful => "useful",
        };
        write!(f, "{s}")
    }
}

/// Classifies an identical-states plane point (t₁, t₂) for a protocol.
pub fn classify(t1: f64, t2: f64, protocol: ProtocolKind) -> Classification {
    match protocol {
        ProtocolKind::Trilocal => {
            if t1 * t1 + t2 * t2 <= fnn_first_bound() {
                Classification::Trilocal
            } else if t1 + t2 <= trilocal_line() {
                Classification::FnnNotUseful
            } else {
                Classification::Useful
            }
        }
        ProtocolKind::Chsh => {
            if t1 * t1 + t2 * t2 <= 1.0 {
                Classification::ChshLocal
            } else if t1 + t2 <= chsh_line() {
                Classification::ChshNotUseful
            } else {
                Classification::Useful
            }
        }
    }
}

/// True where an identical-states point passes the identical second
/// criterion but would be rejected under the general one: FNN holds,
/// 2^{5/6} < t₁+t₂ ≤ 2^{4/3}(3+(2^{2/3}−1)^{3/2})^{1/3} − 2.
pub fn misclassification_region(t1: f64, t2: f64) -> bool {
    let sum = t1 + t2;
    t1 * t1 + t2 * t2 > fnn_first_bound()
        && sum > trilocal_line()
        && sum <= misclassification_upper()
}

/// Side-by-side evaluation of all four checks for one triple of states.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolComparison {
    pub trilocal_first: CheckResult,
    pub chsh_first: ChshFirstCheck,
    pub trilocal_second: CheckResult,
    pub chsh_second: CheckResult,
    /// Identical-form second checks, present when the triples coincide.
    pub trilocal_second_identical: Option<CheckResult>,
    pub chsh_second_identical: Option<CheckResult>,
}

impl ProtocolComparison {
    /// Both first checks reject (the CHSH failure carries over).
    pub fn both_first_checks_fail(&self) -> bool {
        !self.chsh_first.pass && !self.trilocal_first.pass
    }

    /// CHSH-nonlocal on every link yet no detectable full network
    /// nonlocality: the FNN first check is strictly more demanding.
    pub fn first_check_separation(&self) -> bool {
        self.chsh_first.pass && !self.trilocal_first.pass
    }

    /// Passes the CHSH second check but fails the FNN second check.
    pub fn second_check_separation(&self) -> bool {
        match (&self.chsh_second_identical, &self.trilocal_second_identical) {
            (Some(c), Some(t)) => c.pass && !t.pass,
            _ => self.chsh_second.pass && !self.trilocal_second.pass,
        }
    }
}

pub fn compare_protocols(triples: &[SingularTriple; 3]) -> ProtocolComparison {
    let identical = triples_identical(triples);
    ProtocolComparison {
        trilocal_first: first_check_trilocal(triples),
        chsh_first: first_check_chsh(triples),
        trilocal_second: second_check_trilocal(triples, false).unwrap(),
        chsh_second: second_check_chsh(triples, false).unwrap(),
        trilocal_second_identical: identical
            .then(|| second_check_trilocal(triples, true).unwrap()),
        chsh_second_identical: identical.then(|| second_check_chsh(triples, true).unwrap()),
    }
}

/// Full two-step security report for one protocol run or characterization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecurityReport {
    pub protocol: ProtocolKind,
    /// Name of the applied first criterion.
    pub first_criterion: String,
    pub first: CheckResult,
    /// Name of the applied second criterion.
    pub second_criterion: String,
    pub second: CheckResult,
    pub threshold: Threshold,
    pub classification: Classification,
}

/// Evaluates both checks of a protocol and derives the classification:
/// first check fails → local class; second fails → not-useful class;
/// both pass → `Useful`.
pub fn security_report(
    triples: &[SingularTriple; 3],
    protocol: ProtocolKind,
    identical: bool,
) -> Result<SecurityReport> {
    let (first, first_criterion) = match protocol {
        ProtocolKind::Trilocal => (first_check_trilocal(triples), "C_N,1 (trilocal)".into()),
        ProtocolKind::Chsh => {
            let c = first_check_chsh(triples);
            // Report the weakest link as the binding first check.
            let binding = c
                .per_link
                .iter()
                .cloned()
                .min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap())
                .unwrap();
            (
                CheckResult {
                    pass: c.pass,
                    ..binding
                },
                "C_N,1 (chsh, all links)".into(),
            )
        }
    };
    let (second, second_criterion, kind) = match (protocol, identical) {
        (ProtocolKind::Trilocal, true) => (
            second_check_trilocal(triples, true)?,
            "C'_N,2 (trilocal, identical)".to_string(),
            ThresholdKind::TrilocalIdentical,
        ),
        (ProtocolKind::Trilocal, false) => (
            second_check_trilocal(triples, false)?,
            "C_N,2 (trilocal, general)".to_string(),
            ThresholdKind::TrilocalGeneral,
        ),
        (ProtocolKind::Chsh, true) => (
            second_check_chsh(triples, true)?,
            "C'_N,2 (chsh, identical)".to_string(),
            ThresholdKind::ChshCount(3),
        ),
        (ProtocolKind::Chsh, false) => (
            second_check_chsh(triples, false)?,
            "C_N,2 (chsh, general)".to_string(),
            ThresholdKind::ChshCount(1),
        ),
    };
    let classification = if !first.pass {
        match protocol {
            ProtocolKind::Trilocal => Classification::Trilocal,
            ProtocolKind::Chsh => Classification::ChshLocal,
        }
    } else if !second.pass {
        match protocol {
            ProtocolKind::Trilocal => Classification::FnnNotUseful,
            ProtocolKind::Chsh => Classification::ChshNotUseful,
        }
    } else {
        Classification::Useful
    };
    Ok(SecurityReport {
        protocol,
        first_criterion,
        first,
        second_criterion,
        second,
        threshold: threshold(kind)?,
        classification,
    })
}
