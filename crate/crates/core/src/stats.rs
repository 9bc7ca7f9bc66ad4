//! Small descriptive-statistics helpers shared by the metrics and the
//! synthetic-oracle evaluation.

use alloc::vec;
use alloc::vec::Vec;

/// Linear-interpolation percentile (`p` in `[0, 100]`) of an ascending slice:
/// rank `p/100 · (n − 1)` between the two neighbouring order statistics.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    percentile_sorted(&sorted(values), p)
}

pub fn median(values: &[f64]) -> Option<f64> {
    percentile(values, 50.0)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation (divides by `n`).
pub fn population_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(libm::sqrt(var))
}

/// Bin of `value` among ascending `edges`: half-open `[lo, hi)` bins with
/// the last one closed. `None` outside the covered range.
pub fn bin_index(value: f64, edges: &[f64]) -> Option<usize> {
    if edges.len() < 2 || !(value >= edges[0]) || value > edges[edges.len() - 1] {
        return None;
    }
    let last = edges.len() - 2;
    // first edge strictly greater than value
    let upper = edges.partition_point(|e| *e <= value);
    Some((upper.max(1) - 1).min(last))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn with_edges(values: &[f64], edges: &[f64]) -> Self {
        let mut counts = vec![0; edges.len().saturating_sub(1)];
        for v in values {
            if let Some(i) = bin_index(*v, edges) {
                counts[i] += 1;
            }
        }
        Self {
            edges: edges.to_vec(),
            counts,
        }
    }

    /// `bins` equal-width bins spanning the data, so every finite value is
    /// counted exactly once.
    pub fn uniform(values: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() || bins == 0 {
            return Self {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        edges[bins] = hi;
        Self::with_edges(&finite, &edges)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&v, 100.0), Some(4.0));
        assert_eq!(percentile(&v, 50.0), Some(2.5));
        assert!((percentile(&v, 25.0).unwrap() - 1.75).abs() < 1e-15);
        assert_eq!(percentile(&[7.0], 95.0), Some(7.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn population_std_of_constant_is_zero() {
        assert_eq!(population_std(&[2.5; 10]), Some(0.0));
        assert_eq!(population_std(&[1.0, 3.0]), Some(1.0));
        assert_eq!(population_std(&[]), None);
    }

    #[test]
    fn bins_are_half_open_with_closed_last() {
        let edges = [0.0, 5.0, 10.0, 20.0];
        assert_eq!(bin_index(0.0, &edges), Some(0));
        assert_eq!(bin_index(4.999, &edges), Some(0));
        assert_eq!(bin_index(5.0, &edges), Some(1));
        assert_eq!(bin_index(20.0, &edges), Some(2));
        assert_eq!(bin_index(20.1, &edges), None);
        assert_eq!(bin_index(-0.1, &edges), None);
        assert_eq!(bin_index(f64::NAN, &edges), None);
    }

    #[test]
    fn uniform_histogram_counts_everything() {
        let v: Vec<f64> = (0..101).map(|i| i as f64 / 10.0).collect();
        let h = Histogram::uniform(&v, 7);
        assert_eq!(h.total(), 101);
        assert_eq!(h.edges.len(), 8);
        let h = Histogram::uniform(&[3.0, 3.0], 4);
        assert_eq!(h.total(), 2);
    }
}
