//! Uniformly sampled finite state sequences and their CSV form.

use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("a trace needs at least one state")]
    Empty,
    #[error("state dimension must be at least 1")]
    ZeroDimension,
    #[error("state {index} has dimension {found}, expected {expected}")]
    RaggedStates {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sampling period must be positive and finite, got {0}")]
    BadPeriod(f64),
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A finite sequence of `d`-dimensional states sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    data: Vec<f64>,
    dim: usize,
    dt: f64,
}

impl Trace {
    pub fn new(states: Vec<Vec<f64>>, dt: f64) -> Result<Self, TraceError> {
        let dim = states.first().ok_or(TraceError::Empty)?.len();
        if let Some((index, s)) = states.iter().enumerate().find(|(_, s)| s.len() != dim) {
            return Err(TraceError::RaggedStates {
                index,
                expected: dim,
                found: s.len(),
            });
        }
        Self::from_flat(states.concat(), dim, dt)
    }

    /// Builds a trace from row-major state data.
    pub fn from_flat(data: Vec<f64>, dim: usize, dt: f64) -> Result<Self, TraceError> {
        if dim == 0 {
            return Err(TraceError::ZeroDimension);
        }
        if data.is_empty() {
            return Err(TraceError::Empty);
        }
        if !data.len().is_multiple_of(dim) {
            return Err(TraceError::RaggedStates {
                index: data.len() / dim,
                expected: dim,
                found: data.len() % dim,
            });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TraceError::BadPeriod(dt));
        }
        Ok(Self { data, dim, dt })
    }

    /// One-dimensional trace, mostly for tests.
    pub fn scalar(values: &[f64], dt: f64) -> Result<Self, TraceError> {
        Self::from_flat(values.to_vec(), 1, dt)
    }

    /// Number of states (`T + 1`).
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Writes `t,x0,...,x{d-1}` rows with 17 significant digits, enough to
    /// reproduce every value exactly when read back.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.dim).map(|i| format!("x{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (k, s) in self.states().enumerate() {
            write!(w, "{:.16e}", k as f64 * self.dt)?;
            for v in s {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Trace::write_csv`]. The sampling period
    /// is recovered from the first two time stamps and must be uniform.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(TraceError::Empty)??;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let bad_header =
            cols.len() < 2 || cols[0] != "t" || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("x{i}"));
        if bad_header {
            return Err(TraceError::Csv {
                line: 1,
                reason: format!("expected header `t,x0,...`, got `{header}`"),
            });
        }
        let dim = cols.len() - 1;
        let mut times = Vec::new();
        let mut data = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(TraceError::Csv {
                    line: lineno,
                    reason: format!("expected {} fields, got {}", dim + 1, fields.len()),
                });
            }
            let mut parsed = fields.iter().map(|f| {
                f.parse::<f64>().map_err(|e| TraceError::Csv {
                    line: lineno,
                    reason: format!("`{f}`: {e}"),
                })
            });
            times.push(parsed.next().unwrap()?);
            for v in parsed {
                data.push(v?);
            }
        }
        let dt = match times.len() {
            0 => return Err(TraceError::Empty),
            1 => 1.0,
            _ => times[1] - times[0],
        };
        for (k, t) in times.iter().enumerate() {
            let expected = k as f64 * dt;
            if (t - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(TraceError::Csv {
                    line: k + 2,
                    reason: format!("non-uniform sampling: t = {t}, expected {expected}"),
                });
            }
        }
        Self::from_flat(data, dim, dt)
    }
}
