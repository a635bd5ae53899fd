//! Problem data model: bounded mixed-integer feasibility instances
//! `{ x : A x <= b, lb <= x <= ub, x_i integral for masked i }`, their random
//! generator, feasibility checking, partial rounding, and a bit-exact text
//! file format.
//!
//! All instance data is integral (`i64`); floating point enters only when an
//! instance is handed to the LP layer. That keeps file round-trips and
//! witness checks exact.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lp::DenseMatrix;
use crate::{FEAS_TOL, INT_TOL};

/// File format version written and accepted by [`MipInstance::save`] / [`load`].
pub const FORMAT_VERSION: u32 = 1;
/// Whole-instance resamples tolerated before the generator gives up.
const REJECTION_CAP: usize = 10_000;
/// Box bound applied to every variable of a generated instance.
pub const BOX_BOUND: i64 = 20;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error("gave up after {attempts} resamples without hitting a negative rhs component")]
    RejectionLimitExceeded { attempts: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },
}

/// Which variables carry integrality: all of them, or a proper subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Ip,
    Mip,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Ip => "ip",
            Kind::Mip => "mip",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ip" => Ok(Kind::Ip),
            "mip" => Ok(Kind::Mip),
            other => Err(format!("unknown kind `{other}` (expected `ip` or `mip`)")),
        }
    }
}

/// A bounded feasibility instance with exact integer data.
///
/// `witness`, when present, is an integral point known to satisfy every row
/// and the box; the generator always stores one, hand-written files may omit
/// it with a `-` marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MipInstance {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    /// Row-major `m x n` constraint matrix.
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    pub c: Vec<i64>,
    pub int_mask: Vec<bool>,
    pub lower_bound: i64,
    pub upper_bound: i64,
    pub seed: u64,
    pub witness: Option<Vec<i64>>,
}

/// Outcome of [`MipInstance::check`]: how far a point is from feasibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// Sum of positive parts of `A x - b`.
    pub constraint_violation: f64,
    /// Largest distance of a masked coordinate to its nearest integer.
    pub integrality_violation: f64,
    pub feasible: bool,
}

impl MipInstance {
    /// Validate every structural invariant; called by the generator and loader.
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.n == 0 || self.m == 0 {
            return Err(InstanceError::Invalid("n and m must be at least 1".into()));
        }
        if self.a.len() != self.m * self.n {
            return Err(InstanceError::Invalid(format!(
                "matrix has {} entries for {}x{}",
                self.a.len(),
                self.m,
                self.n
            )));
        }
        if self.b.len() != self.m {
            return Err(InstanceError::Invalid("rhs length != m".into()));
        }
        if self.c.len() != self.n || self.int_mask.len() != self.n {
            return Err(InstanceError::Invalid(
                "objective or mask length != n".into(),
            ));
        }
        if self.lower_bound >= self.upper_bound {
            return Err(InstanceError::Invalid(
                "lower bound must be below upper bound".into(),
            ));
        }
        if !self.int_mask.iter().any(|&f| f) {
            return Err(InstanceError::Invalid(
                "at least one variable must be integral".into(),
            ));
        }
        if self.kind == Kind::Ip && !self.int_mask.iter().all(|&f| f) {
            return Err(InstanceError::Invalid(
                "kind ip requires an all-ones mask".into(),
            ));
        }
        if !self.b.iter().any(|&bi| bi < 0) {
            return Err(InstanceError::Invalid(
                "no strictly negative rhs component; the origin must be excluded".into(),
            ));
        }
        if self.a.iter().any(|&v| v.abs() > 10) {
            return Err(InstanceError::Invalid(
                "matrix entry outside [-10, 10]".into(),
            ));
        }
        if let Some(w) = &self.witness {
            if w.len() != self.n {
                return Err(InstanceError::Invalid("witness length != n".into()));
            }
            if w.iter()
                .any(|&v| v < self.lower_bound || v > self.upper_bound)
            {
                return Err(InstanceError::Invalid("witness outside the box".into()));
            }
            for i in 0..self.m {
                let lhs: i64 = (0..self.n).map(|j| self.a[i * self.n + j] * w[j]).sum();
                if lhs > self.b[i] {
                    return Err(InstanceError::Invalid(format!(
                        "witness violates row {i}: {lhs} > {}",
                        self.b[i]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn a_at(&self, i: usize, j: usize) -> i64 {
        self.a[i * self.n + j]
    }

    /// Constraint matrix as dense floats for the LP layer.
    pub fn a_f64(&self) -> DenseMatrix {
        DenseMatrix::new(self.m, self.n, self.a.iter().map(|&v| v as f64).collect())
    }

    pub fn b_f64(&self) -> Vec<f64> {
        self.b.iter().map(|&v| v as f64).collect()
    }

    pub fn c_f64(&self) -> Vec<f64> {
        self.c.iter().map(|&v| v as f64).collect()
    }

    pub fn lower_vec(&self) -> Vec<f64> {
        vec![self.lower_bound as f64; self.n]
    }

    pub fn upper_vec(&self) -> Vec<f64> {
        vec![self.upper_bound as f64; self.n]
    }

    /// Exact feasibility measurement for an arbitrary real point.
    pub fn check(&self, x: &[f64]) -> Result<FeasibilityReport, InstanceError> {
        if x.len() != self.n {
            return Err(InstanceError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut constraint_violation = 0.0;
        for i in 0..self.m {
            let lhs: f64 = (0..self.n)
                .map(|j| self.a[i * self.n + j] as f64 * x[j])
                .sum();
            constraint_violation += (lhs - self.b[i] as f64).max(0.0);
        }
        let mut integrality_violation = 0.0f64;
        for (j, &masked) in self.int_mask.iter().enumerate() {
            if masked {
                integrality_violation = integrality_violation.max((x[j] - x[j].round()).abs());
            }
        }
        Ok(FeasibilityReport {
            constraint_violation,
            integrality_violation,
            feasible: constraint_violation <= FEAS_TOL && integrality_violation <= INT_TOL,
        })
    }

    /// Render in the canonical text format (see module docs of [`save`]).
    pub fn to_text(&self) -> String {
        use fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "version {FORMAT_VERSION}");
        let _ = writeln!(s, "kind {}", self.kind);
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "m {}", self.m);
        let _ = writeln!(s, "A");
        for i in 0..self.m {
            let row: Vec<String> = (0..self.n)
                .map(|j| self.a[i * self.n + j].to_string())
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "b {}", join_ints(&self.b));
        let _ = writeln!(s, "c {}", join_ints(&self.c));
        let mask: Vec<String> = self
            .int_mask
            .iter()
            .map(|&f| if f { "1" } else { "0" }.to_string())
            .collect();
        let _ = writeln!(s, "int_mask {}", mask.join(" "));
        let _ = writeln!(s, "lb {}", self.lower_bound);
        let _ = writeln!(s, "ub {}", self.upper_bound);
        let _ = writeln!(s, "seed {}", self.seed);
        match &self.witness {
            Some(w) => {
                let _ = writeln!(s, "witness {}", join_ints(w));
            }
            None => {
                let _ = writeln!(s, "witness -");
            }
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Parse the canonical text format, then validate invariants.
    pub fn from_text(text: &str) -> Result<Self, InstanceError> {
        let mut cursor = LineCursor::new(text);
        let version: u32 = cursor.scalar("version")?;
        if version != FORMAT_VERSION {
            return Err(InstanceError::VersionMismatch {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let kind: Kind = cursor.scalar("kind")?;
        let n: usize = cursor.scalar("n")?;
        let m: usize = cursor.scalar("m")?;

        let line = cursor.next_line("A")?;
        if line.content != "A" {
            return Err(InstanceError::Parse {
                line: line.number,
                message: format!("expected field `A`, found `{}`", line.content),
            });
        }
        let mut a = Vec::with_capacity(m * n);
        for _ in 0..m {
            let row = cursor.next_line("A row")?;
            let vals = parse_ints(row.content, row.number)?;
            if vals.len() != n {
                return Err(InstanceError::Parse {
                    line: row.number,
                    message: format!("matrix row has {} entries, expected {n}", vals.len()),
                });
            }
            a.extend(vals);
        }

        let b = cursor.int_vector("b", m)?;
        let c = cursor.int_vector("c", n)?;
        let (mask_line, mask_ints) = cursor.int_vector_at("int_mask", n)?;
        let mut int_mask = Vec::with_capacity(n);
        for (j, v) in mask_ints.iter().enumerate() {
            match v {
                0 => int_mask.push(false),
                1 => int_mask.push(true),
                other => {
                    return Err(InstanceError::Parse {
                        line: mask_line,
                        message: format!("int_mask entry {j} is {other}, expected 0 or 1"),
                    })
                }
            }
        }
        let lower_bound: i64 = cursor.scalar("lb")?;
        let upper_bound: i64 = cursor.scalar("ub")?;
        let seed: u64 = cursor.scalar("seed")?;

        let wline = cursor.next_line("witness")?;
        let rest = wline
            .content
            .strip_prefix("witness")
            .ok_or_else(|| InstanceError::Parse {
                line: wline.number,
                message: format!("expected field `witness`, found `{}`", wline.content),
            })?
            .trim();
        let witness = if rest == "-" {
            None
        } else {
            let w = parse_ints(rest, wline.number)?;
            if w.len() != n {
                return Err(InstanceError::Parse {
                    line: wline.number,
                    message: format!("witness has {} entries, expected {n}", w.len()),
                });
            }
            Some(w)
        };

        let inst = MipInstance {
            kind,
            n,
            m,
            a,
            b,
            c,
            int_mask,
            lower_bound,
            upper_bound,
            seed,
            witness,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Round masked coordinates to the nearest integer (ties away from zero),
/// leaving the rest untouched.
pub fn round_partial(x: &[f64], int_mask: &[bool]) -> Vec<f64> {
    assert_eq!(x.len(), int_mask.len(), "mask length mismatch");
    x.iter()
        .zip(int_mask)
        .map(|(&v, &masked)| if masked { v.round() } else { v })
        .collect()
}

/// Draw a random instance: matrix entries uniform on `[-10, 10]`, a planted
/// interior point `xi` uniform on `[1, 10]` per coordinate, slacks uniform on
/// `[1, 10]` per row so `b = A xi + eps`, objective uniform on `[-10, 10]`.
/// The whole draw is rejected and repeated until some `b_i < 0`, which keeps
/// the origin outside the region; `xi` is stored as the feasibility witness.
pub fn generate(seed: u64, n: usize, m: usize, kind: Kind) -> Result<MipInstance, InstanceError> {
    generate_with_rejection_cap(seed, n, m, kind, REJECTION_CAP)
}

/// [`generate`] with an explicit resample budget (exposed for tests).
#[doc(hidden)]
pub fn generate_with_rejection_cap(
    seed: u64,
    n: usize,
    m: usize,
    kind: Kind,
    cap: usize,
) -> Result<MipInstance, InstanceError> {
    if n == 0 || m == 0 {
        return Err(InstanceError::BadParams(
            "n and m must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cap {
        let a: Vec<i64> = (0..m * n).map(|_| rng.gen_range(-10..=10)).collect();
        let xi: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=10)).collect();
        let eps: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=10)).collect();
        let b: Vec<i64> = (0..m)
            .map(|i| (0..n).map(|j| a[i * n + j] * xi[j]).sum::<i64>() + eps[i])
            .collect();
        let c: Vec<i64> = (0..n).map(|_| rng.gen_range(-10..=10)).collect();
        let int_mask: Vec<bool> = match kind {
            Kind::Ip => vec![true; n],
            Kind::Mip => loop {
                let mask: Vec<bool> = (0..n).map(|_| rng.gen_range(0..=1) == 1).collect();
                if mask.iter().any(|&f| f) {
                    break mask;
                }
            },
        };

        if b.iter().any(|&bi| bi < 0) {
            let inst = MipInstance {
                kind,
                n,
                m,
                a,
                b,
                c,
                int_mask,
                lower_bound: -BOX_BOUND,
                upper_bound: BOX_BOUND,
                seed,
                witness: Some(xi),
            };
            inst.validate()?;
            return Ok(inst);
        }
    }
    Err(InstanceError::RejectionLimitExceeded { attempts: cap })
}

fn join_ints(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_ints(s: &str, line: usize) -> Result<Vec<i64>, InstanceError> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse().map_err(|_| InstanceError::Parse {
                line,
                message: format!("`{tok}` is not an integer"),
            })
        })
        .collect()
}

struct NumberedLine<'a> {
    number: usize,
    content: &'a str,
}

/// Line-oriented reader that tracks line numbers for diagnostics.
struct LineCursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineCursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
        }
    }

    fn next_line(&mut self, expecting: &str) -> Result<NumberedLine<'a>, InstanceError> {
        for (idx, raw) in self.lines.by_ref() {
            let content = raw.trim();
            if !content.is_empty() {
                return Ok(NumberedLine {
                    number: idx + 1,
                    content,
                });
            }
        }
        Err(InstanceError::Parse {
            line: 0,
            message: format!("missing field `{expecting}` (file ended early)"),
        })
    }

    fn field_rest(&mut self, name: &str) -> Result<(usize, &'a str), InstanceError> {
        let line = self.next_line(name)?;
        match line.content.strip_prefix(name) {
            Some(rest) if rest.starts_with(char::is_whitespace) || rest.is_empty() => {
                Ok((line.number, rest.trim()))
            }
            _ => Err(InstanceError::Parse {
                line: line.number,
                message: format!("expected field `{name}`, found `{}`", line.content),
            }),
        }
    }

    fn scalar<T: std::str::FromStr>(&mut self, name: &str) -> Result<T, InstanceError> {
        let (number, rest) = self.field_rest(name)?;
        rest.parse().map_err(|_| InstanceError::Parse {
            line: number,
            message: format!("bad value `{rest}` for field `{name}`"),
        })
    }

    fn int_vector(&mut self, name: &str, expected: usize) -> Result<Vec<i64>, InstanceError> {
        self.int_vector_at(name, expected).map(|(_, v)| v)
    }

    fn int_vector_at(
        &mut self,
        name: &str,
        expected: usize,
    ) -> Result<(usize, Vec<i64>), InstanceError> {
        let (number, rest) = self.field_rest(name)?;
        let vals = parse_ints(rest, number)?;
        if vals.len() != expected {
            return Err(InstanceError::Parse {
                line: number,
                message: format!(
                    "field `{name}` has {} entries, expected {expected}",
                    vals.len()
                ),
            });
        }
        Ok((number, vals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_is_deterministic() {
        let a = generate(7, 5, 6, Kind::Ip).unwrap();
        let b = generate(7, 5, 6, Kind::Ip).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn generated_instance_satisfies_invariants() {
        for seed in 0..50 {
            let inst = generate(seed, 5, 6, Kind::Mip).unwrap();
            inst.validate().unwrap();
            assert!(inst.b.iter().any(|&bi| bi < 0));
            let w = inst.witness.as_ref().unwrap();
            let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
            let report = inst.check(&wf).unwrap();
            assert!(report.feasible, "witness must be feasible: {report:?}");
        }
    }

    #[test]
    fn rejection_cap_zero_errors() {
        let err = generate_with_rejection_cap(1, 2, 2, Kind::Ip, 0).unwrap_err();
        assert!(matches!(
            err,
            InstanceError::RejectionLimitExceeded { attempts: 0 }
        ));
    }

    #[test]
    fn check_counts_single_row_violation() {
        // One row x1 <= -1 violated by exactly 2.5 at x1 = 1.5; second row slack.
        let inst = MipInstance {
            kind: Kind::Ip,
            n: 1,
            m: 2,
            a: vec![1, -1],
            b: vec![-1, 10],
            c: vec![0],
            int_mask: vec![true],
            lower_bound: -20,
            upper_bound: 20,
            seed: 0,
            witness: None,
        };
        let r = inst.check(&[1.5]).unwrap();
        assert!((r.constraint_violation - 2.5).abs() < 1e-12);
        assert!((r.integrality_violation - 0.5).abs() < 1e-12);
        assert!(!r.feasible);
    }

    #[test]
    fn rounding_follows_tie_rule() {
        assert_eq!(round_partial(&[1.4, 2.6], &[true, true]), vec![1.0, 3.0]);
        assert_eq!(round_partial(&[1.5, -1.5], &[true, true]), vec![2.0, -2.0]);
        assert_eq!(round_partial(&[1.7, 2.3], &[true, false]), vec![2.0, 2.3]);
    }

    #[test]
    fn rounding_is_idempotent() {
        let mask = [true, false, true];
        let once = round_partial(&[0.6, 0.6, -3.5], &mask);
        assert_eq!(round_partial(&once, &mask), once);
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        let inst = generate(42, 5, 6, Kind::Mip).unwrap();
        let text = inst.to_text();
        let back = MipInstance::from_text(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn missing_mask_field_is_named() {
        let inst = generate(3, 2, 2, Kind::Ip).unwrap();
        let text: String = inst
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("int_mask"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = MipInstance::from_text(&text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("int_mask"),
            "error should name the field: {msg}"
        );
    }

    #[test]
    fn version_mismatch_rejected() {
        let inst = generate(3, 2, 2, Kind::Ip).unwrap();
        let text = inst.to_text().replacen("version 1", "version 99", 1);
        let err = MipInstance::from_text(&text).unwrap_err();
        assert!(matches!(
            err,
            InstanceError::VersionMismatch { found: 99, .. }
        ));
    }

    #[test]
    fn infeasible_witness_rejected() {
        let inst = MipInstance {
            kind: Kind::Ip,
            n: 1,
            m: 1,
            a: vec![1],
            b: vec![-1],
            c: vec![0],
            int_mask: vec![true],
            lower_bound: -20,
            upper_bound: 20,
            seed: 0,
            witness: Some(vec![5]),
        };
        assert!(matches!(inst.validate(), Err(InstanceError::Invalid(_))));
    }
}
