//! Tabular evaluation reports: every cell carries a mean, a standard
//! error, and the sample count behind it. CSV files are the authoritative
//! output format.

use std::fs;
use std::path::Path;

use crate::CliError;

/// One aggregated report cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Cell {
    /// Aggregate independent samples; SE = sample-stddev / sqrt(count).
    pub fn from_samples(samples: &[f64]) -> Cell {
        let n = samples.len();
        assert!(n > 0, "report cell needs at least one sample");
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var =
                samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        };
        Cell { mean, se, count: n }
    }

    /// Paper-style `mean ± SE` formatting.
    pub fn display(&self) -> String {
        format!("{:.3} ± {:.3} (n={})", self.mean, self.se, self.count)
    }

    /// Combined standard error of the difference of two independent cells.
    pub fn combined_se(&self, other: &Cell) -> f64 {
        (self.se * self.se + other.se * other.se).sqrt()
    }
}

/// Deterministic shortest-round-trip float formatting for CSV fields.
pub fn fmt_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{:.1}", x)
    } else {
        x.to_string()
    }
}

/// Write a CSV file from a header and row iterator.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// Two-sided sign test p-value for paired comparisons: probability of a
/// split at least this extreme under a fair coin, ties dropped.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.max(losses);
    // P(X >= k) for X ~ Binomial(n, 1/2), doubled and capped at 1.
    let mut tail = 0.0;
    for i in k..=n {
        tail += binom(n, i);
    }
    (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
}

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
