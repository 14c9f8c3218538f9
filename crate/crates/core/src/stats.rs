//! Descriptive statistics and fixed-width histograms for latency samples.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Describe {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1); 0 for a single sample.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl Describe {
    pub fn of(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Some(Self {
            count: n,
            mean,
            median,
            stddev: var.sqrt(),
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

/// One-way latency summary, with a flag for clock skew between hosts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    #[serde(flatten)]
    pub describe: Describe,
    pub negative_fraction: f64,
    /// More than 1 % of samples were negative: the two clocks disagree.
    pub clock_suspect: bool,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let describe = Describe::of(samples)?;
        let negative = samples.iter().filter(|&&x| x < 0.0).count();
        let negative_fraction = negative as f64 / samples.len() as f64;
        Some(Self {
            describe,
            negative_fraction,
            clock_suspect: negative_fraction > 0.01,
        })
    }
}

/// Histogram with bins `[k·width, (k+1)·width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub width: f64,
    /// Lower edge of the first bin.
    pub start: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn of(samples: &[f64], width: f64) -> Option<Self> {
        if samples.is_empty() || !(width > 0.0) {
            return None;
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / width).floor() as i64;
        let last = (hi / width).floor() as i64;
        let mut counts = vec![0u64; (last - first + 1) as usize];
        for &x in samples {
            let k = (x / width).floor() as i64 - first;
            counts[k as usize] += 1;
        }
        Some(Self {
            width,
            start: first as f64 * width,
            counts,
        })
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let lo = self.start + i as f64 * self.width;
            (lo, lo + self.width, c)
        })
    }

    /// Most populated bin as `(lower, upper)`; ties go to the lower bin.
    pub fn mode_bin(&self) -> (f64, f64) {
        let (i, _) = self
            .counts
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &c)| if c > best.1 { (i, c) } else { best });
        let lo = self.start + i as f64 * self.width;
        (lo, lo + self.width)
    }
}
