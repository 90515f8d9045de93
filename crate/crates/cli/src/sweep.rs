//! Region sweeps over state families, emitted as CSV for replotting.
//!
//! Every row carries the grid coordinates, each criterion margin and the
//! classification labels, enough to regenerate the characterization figures.
//! Rows follow lexicographic grid order regardless of execution order.

use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use fnn_qkd_core::qstate::SingularTriple;
use fnn_qkd_core::security::{
    classify, compare_protocols, misclassification_region, ProtocolKind,
};

use crate::{Cli, SweepArgs};

/// Schema marker for sweep output.
pub const SWEEP_HEADER: &str = "# fnn-qkd-lab sweep v1";

/// Largest two fixed singular values per link of the non-identical worked
/// families.
fn family_leading(family: &str) -> Option<[f64; 3]> {
    match family {
        "ext1" => Some([0.95, 0.95, 0.96]),
        "ext2" => Some([0.92, 0.91, 0.93]),
        "ext3" => Some([0.92, 0.94, 0.95]),
        "ext4" => Some([0.92, 0.91, 0.94]),
        _ => None,
    }
}

fn grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut k = 0usize;
    loop {
        let x = min + k as f64 * step;
        if x > max + 1e-12 {
            break;
        }
        v.push(x.min(max));
        k += 1;
    }
    v
}

pub fn run_sweep(cli: &Cli, args: &SweepArgs) -> Result<ExitCode> {
    let mut out: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    if !(args.min >= 0.0 && args.max <= 1.0 && args.min <= args.max) {
        bail!("sweep range [{}, {}] outside [0, 1]", args.min, args.max);
    }

    writeln!(out, "{SWEEP_HEADER}")?;
    match args.family.as_str() {
        "identical-plane" => {
            let step = args.step.unwrap_or(0.01);
            if step <= 0.0 {
                bail!("step must be positive");
            }
            writeln!(
                out,
                "t1,t2,fnn_first_margin,trilocal_second_margin,chsh_first_margin,chsh_second_margin,trilocal_class,chsh_class,misclassified"
            )?;
            for t1 in grid(args.min, args.max, step) {
                for t2 in grid(args.min, args.max.min(t1), step) {
                    let fnn = t1 * t1 + t2 * t2 - fnn_qkd_core::security::fnn_first_bound();
                    let tri2 = t1 + t2 - fnn_qkd_core::security::trilocal_line();
                    let chsh1 = t1 * t1 + t2 * t2 - 1.0;
                    let chsh2 = t1 + t2 - fnn_qkd_core::security::chsh_line();
                    writeln!(
                        out,
                        "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
                        t1,
                        t2,
                        fnn,
                        tri2,
                        chsh1,
                        chsh2,
                        classify(t1, t2, ProtocolKind::Trilocal),
                        classify(t1, t2, ProtocolKind::Chsh),
                        misclassification_region(t1, t2)
                    )?;
                }
            }
        }
        family => {
            let leading = match family_leading(family) {
                Some(l) => l,
                None => bail!(
                    "unknown family {family:?} (expected identical-plane, ext1..ext4)"
                ),
            };
            let step = args.step.unwrap_or(0.05);
            if step <= 0.0 {
                bail!("step must be positive");
            }
            writeln!(
                out,
                "t12,t22,t32,fnn_first_margin,trilocal_second_margin,chsh_first_min_margin,chsh_second_margin,chsh_first_pass,trilocal_first_pass,chsh_second_pass,trilocal_second_pass"
            )?;
            let axes: Vec<Vec<f64>> = leading
                .iter()
                .map(|&t1| grid(args.min, args.max.min(t1), step))
                .collect();
            for &t12 in &axes[0] {
                for &t22 in &axes[1] {
                    for &t32 in &axes[2] {
                        let triples = [
                            SingularTriple::new([leading[0], t12, 0.0]).unwrap(),
                            SingularTriple::new([leading[1], t22, 0.0]).unwrap(),
                            SingularTriple::new([leading[2], t32, 0.0]).unwrap(),
                        ];
                        let cmp = compare_protocols(&triples);
                        let chsh_min = cmp
                            .chsh_first
                            .per_link
                            .iter()
                            .map(|c| c.margin)
                            .fold(f64::INFINITY, f64::min);
                        writeln!(
                            out,
                            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
                            t12,
                            t22,
                            t32,
                            cmp.trilocal_first.margin,
                            cmp.trilocal_second.margin,
                            chsh_min,
                            cmp.chsh_second.margin,
                            cmp.chsh_first.pass,
                            cmp.trilocal_first.pass,
                            cmp.chsh_second.pass,
                            cmp.trilocal_second.pass
                        )?;
                    }
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
