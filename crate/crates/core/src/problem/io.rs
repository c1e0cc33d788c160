//! JSON problem files.
//!
//! A file carries the explicit data `n`, `m`, `mu`, `F` (`F₀..Fₙ` as
//! row-major upper triangles), `G`, `h` and `T`, plus the generator family
//! with its raw coefficients. Loading rebuilds the instance from the family
//! and checks that the explicit fields agree with it bit for bit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GeneratedFamily, ProblemError, SiplogProblem};
use crate::symmat::SymMat;

pub const FORMAT: &str = "siplog-problem/1";

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("problem has no generator family and cannot be serialized")]
    NotSerializable,
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported format `{0}` (expected `{FORMAT}`)")]
    Format(String),
    #[error("field `{0}` does not match the data regenerated from `family`")]
    Mismatch(&'static str),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub format: String,
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    #[serde(rename = "F")]
    pub f: Vec<SymMat>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    #[serde(rename = "T")]
    pub t: [f64; 2],
    pub family: GeneratedFamily,
}

impl ProblemFile {
    pub fn from_problem(problem: &SiplogProblem) -> Result<Self, ProblemFileError> {
        let family = problem
            .family()
            .cloned()
            .ok_or(ProblemFileError::NotSerializable)?;
        let map = problem.map();
        let mut f = vec![map.constant().clone()];
        f.extend(map.coefficients().iter().cloned());
        let g = problem
            .eq_matrix()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        let t = problem.index_set();
        Ok(Self {
            format: FORMAT.to_string(),
            n: problem.dim(),
            m: problem.order(),
            mu: problem.mu(),
            f,
            g,
            h: problem.eq_rhs().iter().copied().collect(),
            t: [t.t_min(), t.t_max()],
            family,
        })
    }

    pub fn into_problem(self) -> Result<SiplogProblem, ProblemFileError> {
        if self.format != FORMAT {
            return Err(ProblemFileError::Format(self.format));
        }
        let problem = self.family.build(self.mu)?;
        if problem.dim() != self.n {
            return Err(ProblemFileError::Mismatch("n"));
        }
        if problem.order() != self.m {
            return Err(ProblemFileError::Mismatch("m"));
        }
        let map = problem.map();
        let same_f = self.f.len() == self.n + 1
            && &self.f[0] == map.constant()
            && self.f[1..] == *map.coefficients();
        if !same_f {
            return Err(ProblemFileError::Mismatch("F"));
        }
        let rows = self.g.len();
        if self.g.iter().any(|r| r.len() != self.n) {
            return Err(ProblemFileError::Mismatch("G"));
        }
        let g = DMatrix::from_fn(rows, self.n, |i, j| self.g[i][j]);
        if &g != problem.eq_matrix() {
            return Err(ProblemFileError::Mismatch("G"));
        }
        if self.h.as_slice() != problem.eq_rhs().as_slice() {
            return Err(ProblemFileError::Mismatch("h"));
        }
        let t = problem.index_set();
        if self.t != [t.t_min(), t.t_max()] {
            return Err(ProblemFileError::Mismatch("T"));
        }
        Ok(problem)
    }
}

pub fn to_json(problem: &SiplogProblem) -> Result<String, ProblemFileError> {
    let file = ProblemFile::from_problem(problem)?;
    Ok(serde_json::to_string_pretty(&file).expect("problem file serializes"))
}

pub fn from_json(text: &str) -> Result<SiplogProblem, ProblemFileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile =
        serde_path_to_error::deserialize(de).map_err(|e| ProblemFileError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    file.into_problem()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{gen_lsiplog, gen_nsiplog};

    #[test]
    fn roundtrip_is_bit_exact() {
        for p in [
            gen_lsiplog(3, 1e-5, 9, 5).unwrap(),
            gen_nsiplog(3, 1e-3, 5).unwrap(),
        ] {
            let text = to_json(&p).unwrap();
            let q = from_json(&text).unwrap();
            assert_eq!(p.family(), q.family());
            assert_eq!(p.mu().to_bits(), q.mu().to_bits());
            assert_eq!(to_json(&q).unwrap(), text);
        }
    }

    #[test]
    fn nsiplog_file_has_kappa_and_omega() {
        let text = to_json(&gen_nsiplog(2, 1.0, 0).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["family"]["kind"], "nsiplog");
        assert_eq!(v["family"]["kappa"], 0.01);
        assert_eq!(v["family"]["omega"], 0.01);
    }

    #[test]
    fn parse_error_names_field() {
        let text = to_json(&gen_nsiplog(2, 1.0, 0).unwrap()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["mu"] = serde_json::Value::String("one".into());
        let err = from_json(&v.to_string()).unwrap_err();
        match err {
            ProblemFileError::Parse { path, .. } => assert_eq!(path, "mu"),
            other => panic!("unexpected {other}"),
        }
        v["mu"] = serde_json::json!(1.0);
        v["h"] = serde_json::json!([3.0]);
        assert!(matches!(
            from_json(&v.to_string()).unwrap_err(),
            ProblemFileError::Mismatch("h")
        ));
    }

    #[test]
    fn custom_problem_is_not_serializable() {
        let p = gen_nsiplog(2, 1.0, 0).unwrap().without_constraints();
        assert!(matches!(
            to_json(&p),
            Err(ProblemFileError::NotSerializable)
        ));
    }
}
