//! Subcommand implementations: characterize, verify-thresholds, simulate,
//! bound.

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use fnn_qkd_core::oracle::{self, ThresholdRow};
use fnn_qkd_core::protocol::{self, ProtocolConfig, Variant};
use fnn_qkd_core::qstate::{singular_values, to_bloch, SingularTriple, StateDescriptor};
use fnn_qkd_core::security::{
    compare_protocols, security_report, ProtocolComparison, ProtocolKind, SecurityReport,
};
use fnn_qkd_core::trilocal::{analytic_bound, TRILOCAL_BOUND};

use crate::{BoundArgs, CharacterizeArgs, Cli, SimulateArgs};

/// Parses a state argument: inline JSON or `@path`.
pub fn parse_state(arg: &str) -> Result<StateDescriptor> {
    let text = if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path).with_context(|| format!("reading state file {path}"))?
    } else {
        arg.to_string()
    };
    StateDescriptor::from_json(&text).context("parsing state descriptor")
}

/// Resolves one-or-three state arguments to three descriptors plus the
/// identical flag.
pub fn resolve_states(args: &[String]) -> Result<(Vec<StateDescriptor>, bool)> {
    let descriptors: Vec<StateDescriptor> =
        args.iter().map(|s| parse_state(s)).collect::<Result<_>>()?;
    match descriptors.len() {
        1 => Ok((vec![descriptors[0].clone(); 3], true)),
        3 => {
            let identical =
                descriptors[0] == descriptors[1] && descriptors[1] == descriptors[2];
            Ok((descriptors, identical))
        }
        n => bail!("expected 1 or 3 --state arguments, got {n}"),
    }
}

pub fn triples_of(descriptors: &[StateDescriptor]) -> Result<[SingularTriple; 3]> {
    let mut triples = Vec::new();
    for d in descriptors {
        let state = d.realize()?;
        triples.push(singular_values(&to_bloch(&state).r)?);
    }
    Ok([triples[0], triples[1], triples[2]])
}

#[derive(Serialize)]
struct CharacterizeOutput {
    singular_triples: [[f64; 3]; 3],
    identical: bool,
    comparison: ProtocolComparison,
    trilocal: SecurityReport,
    chsh: SecurityReport,
    /// Second-criterion LHS/bound with the fixed Π(2+tᵢ,₁) part removed,
    /// the form the non-identical worked examples are quoted in.
    expanded_second_lhs: f64,
    expanded_second_bound: f64,
}

pub fn characterize(cli: &Cli, args: &CharacterizeArgs) -> Result<ExitCode> {
    let (descriptors, identical) = resolve_states(&args.states)?;
    let triples = triples_of(&descriptors)?;
    let comparison = compare_protocols(&triples);
    let trilocal = security_report(&triples, ProtocolKind::Trilocal, identical)?;
    let chsh = security_report(&triples, ProtocolKind::Chsh, identical)?;

    let fixed: f64 = triples.iter().map(|t| 2.0 + t.t1()).product();
    let general = &comparison.trilocal_second;
    let expanded_lhs = general.lhs - fixed;
    let expanded_bound = general.bound - fixed;

    let chosen = match args.protocol.as_str() {
        "trilocal" => &trilocal,
        "chsh" => &chsh,
        other => bail!("unknown protocol {other:?} (expected trilocal or chsh)"),
    };

    if cli.json {
        let out = CharacterizeOutput {
            singular_triples: std::array::from_fn(|i| triples[i].as_array()),
            identical,
            comparison: comparison.clone(),
            trilocal: trilocal.clone(),
            chsh: chsh.clone(),
            expanded_second_lhs: expanded_lhs,
            expanded_second_bound: expanded_bound,
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        for (i, t) in triples.iter().enumerate() {
            let a = t.as_array();
            println!(
                "link {}: singular values ({:.6}, {:.6}, {:.6})",
                i + 1,
                a[0],
                a[1],
                a[2]
            );
        }
        println!("states declared identical: {identical}");
        let fmt = |c: &fnn_qkd_core::security::CheckResult| {
            format!(
                "lhs {:.6} vs bound {:.6}, margin {:+.6} -> {}",
                c.lhs,
                c.bound,
                c.margin,
                if c.pass { "pass" } else { "fail" }
            )
        };
        println!("trilocal first check:  {}", fmt(&comparison.trilocal_first));
        println!("trilocal second check: {}", fmt(&trilocal.second));
        if !identical {
            println!(
                "  expanded form: lhs {expanded_lhs:.4} vs bound {expanded_bound:.4}"
            );
        }
        for (i, link) in comparison.chsh_first.per_link.iter().enumerate() {
            println!("chsh first check link {}: {}", i + 1, fmt(link));
        }
        println!("chsh second check:     {}", fmt(&chsh.second));
        println!(
            "trilocal protocol: classification {}, threshold {} = {:.6}",
            trilocal.classification, trilocal.threshold.kind, trilocal.threshold.value
        );
        println!(
            "chsh protocol:     classification {}, threshold {} = {:.6}",
            chsh.classification, chsh.threshold.kind, chsh.threshold.value
        );
    }

    Ok(if chosen.classification == fnn_qkd_core::security::Classification::Useful {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct ThresholdTable<'a> {
    grid_step_2d: f64,
    grid_step_6d: f64,
    tolerance: f64,
    rows: &'a [ThresholdRow],
}

pub fn verify_thresholds(cli: &Cli) -> Result<ExitCode> {
    let (step_2d, step_6d, tolerance) = match cli.grid_step {
        Some(step) => {
            if !(step > 0.0 && step <= 0.1) {
                bail!("grid step {step} outside (0, 0.1]");
            }
            (step, step, (step / 10.0).max(oracle::DEFAULT_TOLERANCE))
        }
        None => (
            oracle::DEFAULT_STEP_2D,
            oracle::DEFAULT_STEP_6D,
            oracle::DEFAULT_TOLERANCE,
        ),
    };
    match oracle::verify_thresholds(step_2d, step_6d, tolerance) {
        Ok(rows) => {
            if cli.json {
                let table = ThresholdTable {
                    grid_step_2d: step_2d,
                    grid_step_6d: step_6d,
                    tolerance,
                    rows: &rows,
                };
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                println!("{:<22} {:>10} {:>10} {:>10}", "kind", "analytic", "numeric", "|delta|");
                for row in &rows {
                    println!(
                        "{:<22} {:>10.6} {:>10.6} {:>10.2e}",
                        row.kind.to_string(),
                        row.analytic,
                        row.numeric,
                        row.delta
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(fnn_qkd_core::Error::VerificationFailure {
            kind,
            analytic,
            numeric,
        }) => {
            eprintln!(
                "threshold verification failed for {kind}: analytic {analytic:.6} vs numeric {numeric:.6}"
            );
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut config: ProtocolConfig =
        serde_json::from_str(&text).context("parsing protocol config")?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if args.sampled {
        config.sampled_witness = true;
    }
    if args.force_continue {
        config.force_continue = true;
    }
    if let Some(variant) = &args.variant {
        config.variant = match variant.as_str() {
            "trilocal" => Variant::Trilocal,
            "chsh" => Variant::Chsh,
            other => bail!("unknown variant {other:?} (expected trilocal or chsh)"),
        };
    }

    let result = protocol::run(&config)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&result)?);
    } else {
        println!(
            "variant {} | witness {:.5} ± {:.5} vs bound {:.5}",
            config.variant.strategy_name(),
            result.witness.value,
            result.witness.std_err,
            result.witness_bound
        );
        match &result.qber {
            Some(q) => println!(
                "qber {:.5} ± {:.5} vs threshold {} = {:.5} | sifted {} of {} rounds",
                q.value,
                q.std_err,
                result.qber_threshold.kind,
                result.qber_threshold.value,
                result.sifted_length,
                result.sifting_rounds
            ),
            None => println!("qber: not estimated (aborted before sifting)"),
        }
        println!("abort stage: {:?}", result.abort_stage);
    }
    if let Some(path) = &cli.out {
        std::fs::write(path, serde_json::to_string_pretty(&result)?)
            .with_context(|| format!("writing result to {}", path.display()))?;
    }
    Ok(match result.abort_stage {
        protocol::AbortStage::None => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    })
}

#[derive(Serialize)]
struct BoundOutput {
    singular_triples: [[f64; 3]; 3],
    bound: f64,
    classical_bound: f64,
    violation: bool,
}

pub fn bound(cli: &Cli, args: &BoundArgs) -> Result<ExitCode> {
    let (descriptors, _) = resolve_states(&args.states)?;
    let triples = triples_of(&descriptors)?;
    let b = analytic_bound(&triples);
    let violation = b > TRILOCAL_BOUND;
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&BoundOutput {
                singular_triples: std::array::from_fn(|i| triples[i].as_array()),
                bound: b,
                classical_bound: TRILOCAL_BOUND,
                violation,
            })?
        );
    } else {
        println!(
            "quantum maximum {b:.6} vs trilocal bound {TRILOCAL_BOUND:.6} -> {}",
            if violation { "violation (fully network nonlocal)" } else { "no violation" }
        );
    }
    Ok(if violation {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
