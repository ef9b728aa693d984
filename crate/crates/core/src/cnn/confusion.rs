use std::fmt::Write as _;

use crate::error::{invalid, Result};

/// Actual-by-predicted counts; rows are actual classes, columns predicted,
/// both 1-based in the public API.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(invalid(format!(
                "{} counts for a {classes}x{classes} confusion matrix",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, actual: usize, predicted: usize) -> Result<()> {
        for (what, v) in [("actual", actual), ("predicted", predicted)] {
            if v == 0 || v > self.classes {
                return Err(invalid(format!("{what} label {v} outside 1..={}", self.classes)));
            }
        }
        self.counts[(actual - 1) * self.classes + predicted - 1] += 1;
        Ok(())
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[(actual - 1) * self.classes + predicted - 1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.counts[i * self.classes + i]).sum()
    }

    /// `trace / total`, in `[0, 1]`; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }

    /// CSV with a header row of predicted classes and one row per actual class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("actual\\predicted");
        for c in 1..=self.classes {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for a in 1..=self.classes {
            let _ = write!(s, "{a}");
            for p in 1..=self.classes {
                let _ = write!(s, ",{}", self.get(a, p));
            }
            s.push('\n');
        }
        s
    }
}
