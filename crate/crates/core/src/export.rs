//! CSV files for learning curves and shape parameters.
//!
//! Values are written with 17 significant digits so a file read back gives
//! the same `f64`.

use std::io::{BufRead, Write};

use crate::optimizer::UpdateRecord;
use crate::trace::TraceError;

pub const LEARNING_CURVE_HEADER: &str = "update,mean_cost,min_cost,mean_robustness";
pub const PARAMETERS_HEADER: &str = "theta";

/// One row per update. `mean_robustness` is left empty when the objective
/// does not report one.
pub fn write_learning_curve<W: Write>(history: &[UpdateRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LEARNING_CURVE_HEADER}")?;
    for r in history {
        write!(w, "{},{:.16e},{:.16e},", r.update, r.mean_cost, r.min_cost)?;
        match r.mean_robustness {
            Some(v) => writeln!(w, "{v:.16e}")?,
            None => writeln!(w)?,
        }
    }
    Ok(())
}

/// A `theta` header and one value per line, in stacked order.
pub fn write_parameters<W: Write>(theta: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{PARAMETERS_HEADER}")?;
    for v in theta {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn read_parameters<R: BufRead>(r: R) -> Result<Vec<f64>, TraceError> {
    let mut lines = r.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == PARAMETERS_HEADER => {}
        other => {
            return Err(TraceError::Csv {
                line: 1,
                reason: format!(
                    "expected header `{PARAMETERS_HEADER}`, found {:?}",
                    other.unwrap_or_default()
                ),
            })
        }
    }
    let mut theta = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let v: f64 = field.parse().map_err(|e| TraceError::Csv {
            line: i + 2,
            reason: format!("`{field}`: {e}"),
        })?;
        if !v.is_finite() {
            return Err(TraceError::Csv {
                line: i + 2,
                reason: format!("non-finite value {v}"),
            });
        }
        theta.push(v);
    }
    Ok(theta)
}
