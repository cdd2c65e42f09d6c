use std::io::{self, Write};

/// Metrics of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `max(‖Mᵀ⊛x^k‖, spread)`.
    pub residual: f64,
    /// `max_{i,j} ‖x_i^k − x_j^k‖`.
    pub spread: f64,
    /// `‖z^{k+1} − z^k‖`.
    pub step_norm: f64,
    /// `l_k²`.
    pub l2: f64,
    /// `ξ_k`.
    pub xi: f64,
    /// `ξ_k l_k²`, the budget for the next deviation pair.
    pub budget: f64,
    /// Cost of the deviation pair actually chosen.
    pub budget_used: f64,
    pub resolvent_calls: usize,
    pub forward_calls: usize,
    /// `‖x_n^k − x*‖` when a reference point was supplied.
    pub dist_to_ref: Option<f64>,
}

/// Per-iteration history of a solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
}

pub const CSV_HEADER: &str = "k,residual,spread,l2,budget_used,resolvent_calls,forward_calls,dist_to_ref";

fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Writes the CSV export; floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k,
                sig17(r.residual),
                sig17(r.spread),
                sig17(r.l2),
                sig17(r.budget_used),
                r.resolvent_calls,
                r.forward_calls,
                r.dist_to_ref.map(sig17).unwrap_or_default()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let t = Trajectory {
            records: vec![IterationRecord {
                k: 0,
                residual: 0.1,
                spread: 1.0 / 3.0,
                step_norm: 0.0,
                l2: 0.0,
                xi: 0.9,
                budget: 0.0,
                budget_used: 0.0,
                resolvent_calls: 3,
                forward_calls: 2,
                dist_to_ref: None,
            }],
        };
        let text = t.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        assert_eq!(row[2], "3.3333333333333331e-1");
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[7], "");
    }
}
