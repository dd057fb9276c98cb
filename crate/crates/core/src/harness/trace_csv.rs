use std::io::{Read, Write};
use std::path::Path;

use super::run::{comparator_loss, Realization, RoundTrace};
use crate::error::{BanditError, Result};
use crate::lifted::ContextId;

pub const CSV_HEADER: [&str; 8] = [
    "t",
    "context_id",
    "action_index",
    "realized_loss",
    "expected_loss",
    "cum_expected_loss",
    "cum_comparator_loss",
    "cum_regret",
];

/// `x` with 17 significant digits, in `%.17g` style.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn io_err(e: impl std::fmt::Display) -> BanditError {
    BanditError::Config(e.to_string())
}

pub fn emit_csv<W: Write>(traces: &[RoundTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for r in traces {
        w.write_record([
            r.t.to_string(),
            r.context_id.to_string(),
            r.action_index.to_string(),
            format_g17(r.realized_loss),
            format_g17(r.expected_loss),
            format_g17(r.cum_expected_loss),
            format_g17(r.cum_comparator_loss),
            format_g17(r.cum_regret),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn write_csv(traces: &[RoundTrace], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    emit_csv(traces, std::io::BufWriter::new(f))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RoundTrace>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(io_err)?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(BanditError::Config(format!(
            "unexpected trace header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| BanditError::Config(format!("line {line}: {e}")))?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k)
                .ok_or_else(|| BanditError::Config(format!("line {line}: missing field {}", CSV_HEADER[k])))
        };
        let num = |k: usize| -> Result<f64> {
            field(k)?
                .parse::<f64>()
                .map_err(|e| BanditError::Config(format!("line {line}, field {}: {e}", CSV_HEADER[k])))
        };
        let int = |k: usize| -> Result<u64> {
            field(k)?
                .parse::<u64>()
                .map_err(|e| BanditError::Config(format!("line {line}, field {}: {e}", CSV_HEADER[k])))
        };
        let id = u64::from_str_radix(field(1)?, 16)
            .map_err(|e| BanditError::Config(format!("line {line}, field context_id: {e}")))?;
        out.push(RoundTrace {
            t: int(0)?,
            context_id: ContextId(id),
            action_index: int(2)? as usize,
            realized_loss: num(3)?,
            expected_loss: num(4)?,
            cum_expected_loss: num(5)?,
            cum_comparator_loss: num(6)?,
            cum_regret: num(7)?,
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<RoundTrace>> {
    let f = std::fs::File::open(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    read_csv(std::io::BufReader::new(f))
}

/// Regret recomputed from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rounds: usize,
    pub learner_loss: f64,
    pub comparator_loss: f64,
    pub regret: f64,
    /// Largest disagreement between recomputed and recorded cumulative columns.
    pub max_column_error: f64,
    /// Whether the comparator came from a regenerated environment rather
    /// than the trace's own column.
    pub independent_comparator: bool,
}

/// Re-sum the expected losses of a trace. With the realized environment the
/// comparator is recomputed from scratch; otherwise the trace's final
/// comparator column is used.
pub fn oracle(traces: &[RoundTrace], env: Option<&Realization>) -> Result<OracleReport> {
    let mut cum = 0.0;
    let mut err: f64 = 0.0;
    for (i, r) in traces.iter().enumerate() {
        if r.t != i as u64 + 1 {
            return Err(BanditError::Config(format!("trace row {} has t = {}", i + 1, r.t)));
        }
        cum += r.expected_loss;
        err = err.max((cum - r.cum_expected_loss).abs());
        err = err.max((r.cum_expected_loss - r.cum_comparator_loss - r.cum_regret).abs());
    }
    let (comparator, independent) = match env {
        Some(env) => {
            if env.contexts.len() != traces.len() {
                return Err(BanditError::LengthMismatch {
                    left: traces.len(),
                    right: env.contexts.len(),
                });
            }
            for (r, (s, l)) in traces.iter().zip(env.contexts.iter().zip(&env.losses)) {
                if s.id() != r.context_id {
                    return Err(BanditError::Config(format!(
                        "round {}: trace context {} differs from regenerated {}",
                        r.t,
                        r.context_id,
                        s.id()
                    )));
                }
                let e = l.get(r.action_index).ok_or_else(|| {
                    BanditError::InvalidAction(format!("round {}: action index {}", r.t, r.action_index))
                })?;
                err = err.max((e - r.expected_loss).abs());
            }
            let c = comparator_loss(&env.contexts, &env.losses)?;
            if let Some(last) = traces.last() {
                err = err.max((c - last.cum_comparator_loss).abs());
            }
            (c, true)
        }
        None => (traces.last().map_or(0.0, |r| r.cum_comparator_loss), false),
    };
    Ok(OracleReport {
        rounds: traces.len(),
        learner_loss: cum,
        comparator_loss: comparator,
        regret: cum - comparator,
        max_column_error: err,
        independent_comparator: independent,
    })
}
