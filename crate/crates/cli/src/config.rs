//! Run configuration: flat `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [model]
//! matrix = 0 1 0, 0 0 1, 1 1 0
//! roof = 1
//!
//! [run]
//! seed = 7
//! ```
//!
//! `#` and `;` start comment lines. Unknown sections or keys are errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anosov_core::{Error, QuadratureSpec, Result};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelSection,
    pub seed: u64,
    pub algebra: AlgebraSection,
    pub rates: RatesSection,
    pub solver: SolverSection,
    pub quadrature: QuadratureSection,
    pub obstruction: ObstructionSection,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSection {
    pub matrix: Vec<Vec<i64>>,
    pub roof: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgebraSection {
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatesSection {
    pub samples: usize,
    pub tol: f64,
    pub t_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSection {
    pub tol: f64,
    pub check_tol: f64,
    pub oracle_sites: usize,
    pub manufactured_sites: usize,
    pub residual_sites: usize,
    pub horizon_cap: f64,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureSection {
    pub points: usize,
    pub shifts: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionSection {
    pub max_period: u32,
    pub tol: f64,
    /// Largest `D^m` for which rational points are enumerated by brute force.
    pub brute_force_limit: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSection { matrix: vec![vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]], roof: 1.0 },
            seed: 20_240_611,
            algebra: AlgebraSection { trials: 1000 },
            rates: RatesSection { samples: 100, tol: 0.01, t_max: 40.0 },
            solver: SolverSection {
                tol: 1e-8,
                check_tol: 1e-6,
                oracle_sites: 50,
                manufactured_sites: 100,
                residual_sites: 10,
                horizon_cap: 600.0,
                degree: 2,
            },
            quadrature: QuadratureSection { points: 65537, shifts: 8, pairs: 20 },
            obstruction: ObstructionSection { max_period: 4, tol: 1e-10, brute_force_limit: 20_000_000 },
            output_dir: PathBuf::from("anosov-out"),
        }
    }
}

impl RunConfig {
    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec::lattice(self.quadrature.points, self.seed, self.quadrature.shifts)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = lex(text)?;
        let mut cfg = RunConfig::default();
        for ((section, key), e) in &entries {
            let v = e.value.as_str();
            match (section.as_str(), key.as_str()) {
                ("model", "matrix") => cfg.model.matrix = parse_matrix(e)?,
                ("model", "roof") => cfg.model.roof = num(e, v)?,
                ("run", "seed") => cfg.seed = num(e, v)?,
                ("algebra", "trials") => cfg.algebra.trials = num(e, v)?,
                ("rates", "samples") => cfg.rates.samples = num(e, v)?,
                ("rates", "tol") => cfg.rates.tol = num(e, v)?,
                ("rates", "t_max") => cfg.rates.t_max = num(e, v)?,
                ("solver", "tol") => cfg.solver.tol = num(e, v)?,
                ("solver", "check_tol") => cfg.solver.check_tol = num(e, v)?,
                ("solver", "oracle_sites") => cfg.solver.oracle_sites = num(e, v)?,
                ("solver", "manufactured_sites") => cfg.solver.manufactured_sites = num(e, v)?,
                ("solver", "residual_sites") => cfg.solver.residual_sites = num(e, v)?,
                ("solver", "horizon_cap") => cfg.solver.horizon_cap = num(e, v)?,
                ("solver", "degree") => cfg.solver.degree = num(e, v)?,
                ("quadrature", "points") => cfg.quadrature.points = num(e, v)?,
                ("quadrature", "shifts") => cfg.quadrature.shifts = num(e, v)?,
                ("quadrature", "pairs") => cfg.quadrature.pairs = num(e, v)?,
                ("obstruction", "max_period") => cfg.obstruction.max_period = num(e, v)?,
                ("obstruction", "tol") => cfg.obstruction.tol = num(e, v)?,
                ("obstruction", "brute_force_limit") => cfg.obstruction.brute_force_limit = num(e, v)?,
                ("output", "dir") => cfg.output_dir = PathBuf::from(v),
                _ => {
                    return Err(Error::Parse {
                        line: e.line,
                        column: e.key_column,
                        message: format!("unknown key `{key}` in section [{section}]"),
                    })
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

struct Entry {
    value: String,
    line: usize,
    key_column: usize,
    value_column: usize,
}

fn lex(text: &str) -> Result<BTreeMap<(String, String), Entry>> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let indent = raw.len() - raw.trim_start().len();
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(Error::Parse {
                line,
                column: indent + body.len() + 1,
                message: "section header missing `]`".into(),
            })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse { line, column: indent + 2, message: format!("bad section name `{name}`") });
            }
            section = Some(name.to_string());
            continue;
        }
        let eq = body.find('=').ok_or(Error::Parse { line, column: indent + 1, message: "expected `key = value`".into() })?;
        let key = body[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Parse { line, column: indent + 1, message: format!("bad key `{key}`") });
        }
        let sec = section.clone().ok_or(Error::Parse {
            line,
            column: indent + 1,
            message: format!("key `{key}` appears before any section header"),
        })?;
        let after = &body[eq + 1..];
        let value = after.trim();
        let value_column = indent + eq + 2 + (after.len() - after.trim_start().len());
        let entry = Entry { value: value.to_string(), line, key_column: indent + 1, value_column };
        if out.insert((sec.clone(), key.to_string()), entry).is_some() {
            return Err(Error::Parse { line, column: indent + 1, message: format!("duplicate key `{key}` in [{sec}]") });
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(e: &Entry, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line: e.line,
        column: e.value_column,
        message: format!("cannot parse `{v}` as {}", std::any::type_name::<T>()),
    })
}

fn parse_matrix(e: &Entry) -> Result<Vec<Vec<i64>>> {
    let mut rows = Vec::new();
    let mut offset = 0;
    for chunk in e.value.split(',') {
        let mut row = Vec::new();
        let mut pos = offset;
        for tok in chunk.split_whitespace() {
            let at = chunk[pos - offset..].find(tok).map_or(pos, |d| pos + d);
            row.push(tok.parse().map_err(|_| Error::Parse {
                line: e.line,
                column: e.value_column + at,
                message: format!("matrix entry `{tok}` is not an integer"),
            })?);
            pos = at + tok.len();
        }
        rows.push(row);
        offset += chunk.len() + 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# nothing\n\n; still nothing\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn full_file() {
        let text = "[model]\nmatrix = 2 1 0 0, 1 1 0 0, 0 0 1 -1, 0 0 -1 2\nroof = 1\n\n[run]\nseed = 9\n[quadrature]\n  points = 4099\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.model.matrix[3], vec![0, 0, -1, 2]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.quadrature.points, 4099);
        assert_eq!(cfg.quadrature_spec().points, 4099);
    }

    fn parse_err(text: &str) -> (usize, usize, String) {
        match RunConfig::parse(text) {
            Err(Error::Parse { line, column, message }) => (line, column, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse_err("[run\n").0, 1);
        let (l, c, _) = parse_err("[run]\nseed = x1\n");
        assert_eq!((l, c), (2, 8));
        let (l, c, m) = parse_err("[run]\n  colour = red\n");
        assert_eq!((l, c), (2, 3));
        assert!(m.contains("unknown key"));
        let (l, c, _) = parse_err("seed = 1\n");
        assert_eq!((l, c), (1, 1));
        let (l, c, _) = parse_err("[model]\nmatrix = 0 1 0, 0 q 1, 1 1 0\n");
        assert_eq!((l, c), (2, 19));
        let (l, _, m) = parse_err("[run]\nseed = 1\nseed = 2\n");
        assert_eq!(l, 3);
        assert!(m.contains("duplicate"));
        assert_eq!(parse_err("[run]\njust words\n").0, 2);
    }
}
