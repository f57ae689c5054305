//! Dataset files: a one-line header `model d m T seed`, then `T` whitespace-
//! separated observation rows of width `m`, then optionally `T` latent state
//! rows of width `d`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ssm::{ObservationPath, StatePath};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub model_id: String,
    pub d: usize,
    pub m: usize,
    pub t_len: usize,
    pub seed: u64,
    pub observations: ObservationPath,
    pub states: Option<StatePath>,
}

impl Dataset {
    pub fn new(
        model_id: impl Into<String>,
        seed: u64,
        observations: ObservationPath,
        states: Option<StatePath>,
    ) -> Result<Self> {
        let t_len = observations.len();
        let m = observations.dim();
        let d = match &states {
            Some(s) => {
                if s.len() != t_len {
                    return Err(Error::invalid("states and observations must share T"));
                }
                s.dim()
            }
            None => m,
        };
        Ok(Dataset {
            model_id: model_id.into(),
            d,
            m,
            t_len,
            seed,
            observations,
            states,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "{} {} {} {} {}",
            self.model_id, self.d, self.m, self.t_len, self.seed
        )
        .expect("string write");
        for row in self.observations.rows() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", vals.join(" ")).expect("string write");
        }
        if let Some(states) = &self.states {
            for s in states.states() {
                let vals: Vec<String> = s.iter().map(|v| format!("{v:.17e}")).collect();
                writeln!(out, "{}", vals.join(" ")).expect("string write");
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let malformed = |reason: &str| Error::MalformedFile {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| malformed("empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(malformed("header must be: model d m T seed"));
        }
        let model_id = fields[0].to_string();
        let d: usize = fields[1].parse().map_err(|_| malformed("bad d"))?;
        let m: usize = fields[2].parse().map_err(|_| malformed("bad m"))?;
        let t_len: usize = fields[3].parse().map_err(|_| malformed("bad T"))?;
        let seed: u64 = fields[4].parse().map_err(|_| malformed("bad seed"))?;

        let parse_row = |line: &str, width: usize| -> Result<DVector<f64>> {
            let vals = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| malformed("non-numeric value"))?;
            if vals.len() != width {
                return Err(malformed("row width mismatch"));
            }
            Ok(DVector::from_vec(vals))
        };

        let mut obs = Vec::with_capacity(t_len);
        for _ in 0..t_len {
            let line = lines.next().ok_or_else(|| malformed("missing observation rows"))?;
            obs.push(parse_row(line, m)?);
        }
        let rest: Vec<&str> = lines.collect();
        let states = match rest.len() {
            0 => None,
            n if n == t_len => {
                let mut states = Vec::with_capacity(t_len);
                for line in rest {
                    states.push(parse_row(line, d)?);
                }
                Some(StatePath::new(states)?)
            }
            _ => return Err(malformed("trailing rows are not a full state block")),
        };
        let observations = ObservationPath::new(obs)?;
        Dataset::new(model_id, seed, observations, states)
    }
}
