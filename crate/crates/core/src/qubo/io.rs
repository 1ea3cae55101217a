//! Text interchange with external samplers.
//!
//! Model files start with `#vars K` and `#offset V` (plus `#lambda1`/`#lambda2`
//! comments), followed by one term per line: `k k c` for a linear coefficient,
//! `k k2 c` with `k < k2` for a quadratic one. Sample files hold one assignment
//! per line, written either as a single 0/1 string or as `K` separate bits,
//! optionally followed by the stated energy.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{QuboError, QuboModel, SampleRecord, SampleSet, SampleSource};
use crate::scalar::Scalar;

fn io_err(path: &Path, source: std::io::Error) -> QuboError {
    QuboError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_qubo<T: Scalar, W: Write>(m: &QuboModel<T>, mut out: W) -> std::io::Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "#vars {}", m.num_vars());
    let _ = writeln!(text, "#offset {}", m.offset());
    let _ = writeln!(text, "#lambda1 {}", m.lambda1());
    let _ = writeln!(text, "#lambda2 {}", m.lambda2());
    for (k, &c) in m.linear().iter().enumerate() {
        if c != T::zero() {
            let _ = writeln!(text, "{k} {k} {c}");
        }
    }
    for &(a, b, c) in m.quadratic() {
        let _ = writeln!(text, "{a} {b} {c}");
    }
    out.write_all(text.as_bytes())
}

pub fn export_qubo<T: Scalar>(m: &QuboModel<T>, path: impl AsRef<Path>) -> Result<(), QuboError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_qubo(m, std::io::BufWriter::new(file)).map_err(|e| io_err(path, e))
}

fn parse_num<T: Scalar>(tok: &str, line: usize) -> Result<T, QuboError> {
    tok.parse::<T>().map_err(|_| QuboError::Malformed {
        line,
        message: format!("bad number {tok:?}"),
    })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, QuboError> {
    tok.parse().map_err(|_| QuboError::Malformed {
        line,
        message: format!("bad index {tok:?}"),
    })
}

/// Parses a model file back into a model.
pub fn read_qubo_str<T: Scalar>(text: &str) -> Result<QuboModel<T>, QuboError> {
    let mut vars = None;
    let mut offset = T::zero();
    let mut lambda1 = None;
    let mut lambda2 = None;
    let mut linear: Vec<(usize, T)> = Vec::new();
    let mut quad = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("vars"), Some(v)) => vars = Some(parse_usize(v, line_no)?),
                (Some("offset"), Some(v)) => offset = parse_num(v, line_no)?,
                (Some("lambda1"), Some(v)) => lambda1 = Some(parse_num(v, line_no)?),
                (Some("lambda2"), Some(v)) => lambda2 = Some(parse_num(v, line_no)?),
                _ => {}
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(QuboError::Malformed {
                line: line_no,
                message: "expected `k k2 coefficient`".into(),
            });
        }
        let a = parse_usize(toks[0], line_no)?;
        let b = parse_usize(toks[1], line_no)?;
        let c: T = parse_num(toks[2], line_no)?;
        if a == b {
            linear.push((a, c));
        } else {
            quad.push((a, b, c));
        }
    }
    let vars = vars.ok_or(QuboError::Malformed {
        line: 0,
        message: "missing #vars header".into(),
    })?;
    let m = (vars as f64).sqrt().round() as usize;
    if m * m != vars {
        return Err(QuboError::Malformed {
            line: 0,
            message: format!("{vars} is not a square variable count"),
        });
    }
    let mut lin = vec![T::zero(); vars];
    for (k, c) in linear {
        if k >= vars {
            return Err(QuboError::Malformed {
                line: 0,
                message: format!("variable {k} out of range"),
            });
        }
        lin[k] += c;
    }
    QuboModel::from_parts(
        m + 1,
        lambda1.unwrap_or_else(T::zero),
        lambda2.unwrap_or_else(T::zero),
        lin,
        quad,
        offset,
    )
}

pub fn read_qubo<T: Scalar>(path: impl AsRef<Path>) -> Result<QuboModel<T>, QuboError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    read_qubo_str(&text)
}

fn bits_string(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b == 0 { '0' } else { '1' })
        .collect()
}

/// One line per record and multiplicity: `bits energy`.
pub fn write_samples<T: Scalar>(
    set: &SampleSet<T>,
    path: impl AsRef<Path>,
) -> Result<(), QuboError> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in &set.records {
        for _ in 0..r.multiplicity.max(1) {
            let _ = writeln!(text, "{} {}", bits_string(&r.bits), r.energy);
        }
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn parse_bits(tok: &str, line: usize) -> Result<Vec<u8>, QuboError> {
    tok.chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(QuboError::Malformed {
                line,
                message: format!("non-binary character {ch:?}"),
            }),
        })
        .collect()
}

/// Reads assignments for `m`; energies are recomputed and stated values checked.
pub fn read_samples_str<T: Scalar>(
    m: &QuboModel<T>,
    text: &str,
) -> Result<SampleSet<T>, QuboError> {
    let k = m.num_vars();
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        // models always have at least 4 variables, so a 1-char first token means separate bits
        let (bits, stated) = if toks[0].len() > 1 {
            if toks.len() > 2 {
                return Err(QuboError::Malformed {
                    line: line_no,
                    message: "trailing tokens after energy".into(),
                });
            }
            (parse_bits(toks[0], line_no)?, toks.get(1).copied())
        } else if toks.len() == k || toks.len() == k + 1 {
            let mut bits = Vec::with_capacity(k);
            for t in &toks[..k] {
                let b = parse_bits(t, line_no)?;
                if b.len() != 1 {
                    return Err(QuboError::Malformed {
                        line: line_no,
                        message: format!("expected a single bit, got {t:?}"),
                    });
                }
                bits.push(b[0]);
            }
            (bits, toks.get(k).copied())
        } else {
            return Err(QuboError::LengthMismatch {
                expected: k,
                found: toks.len(),
            });
        };
        if bits.len() != k {
            return Err(QuboError::LengthMismatch {
                expected: k,
                found: bits.len(),
            });
        }
        let energy = m.energy_unchecked(&bits);
        let mut mismatch = false;
        if let Some(s) = stated {
            let claimed: f64 = s.parse().map_err(|_| QuboError::Malformed {
                line: line_no,
                message: format!("bad energy {s:?}"),
            })?;
            let e = energy.as_f64();
            if (claimed - e).abs() > 1e-6 * e.abs().max(1.0) {
                log::warn!("line {line_no}: stated energy {claimed} differs from recomputed {e}");
                mismatch = true;
            }
        }
        records.push(SampleRecord {
            bits,
            energy,
            multiplicity: 1,
            energy_mismatch: mismatch,
        });
    }
    Ok(SampleSet {
        records,
        source: SampleSource::External,
    })
}

pub fn import_samples<T: Scalar>(
    m: &QuboModel<T>,
    path: impl AsRef<Path>,
) -> Result<SampleSet<T>, QuboError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    read_samples_str(m, &text)
}
