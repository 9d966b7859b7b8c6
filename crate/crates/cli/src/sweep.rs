//! Sweeps over ring sizes with a fitted growth exponent.

use anyhow::{bail, Result};
use copulse::stats::{bootstrap_slope_ci, loglog_slope, median};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::protocols::{Protocol, RunReport};

/// Sizes below this are reported but left out of the fit.
pub const MIN_FIT_N: usize = 8;
/// Fewest sizes a fit is attempted with.
pub const MIN_FIT_POINTS: usize = 4;
/// Allowed excess of the fitted slope over the expected exponent.
pub const SLOPE_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub seeds: usize,
    pub min: u64,
    pub median: u64,
    pub max: u64,
    pub pass_rate: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub protocol: Protocol,
    pub rows: Vec<SweepRow>,
    pub slope: f64,
    pub ci95: (f64, f64),
    pub expected_exponent: Option<f64>,
}

impl SweepRow {
    pub fn from_runs(n: usize, runs: &[RunReport]) -> Self {
        let mut pulses: Vec<u64> = runs.iter().filter(|r| r.failure.is_none()).map(|r| r.total_pulses).collect();
        let passed = pulses.len();
        let med = median(&mut pulses).unwrap_or(0);
        SweepRow {
            n,
            seeds: runs.len(),
            min: pulses.first().copied().unwrap_or(0),
            median: med,
            max: pulses.last().copied().unwrap_or(0),
            pass_rate: passed as f64 / runs.len().max(1) as f64,
            failures: runs.iter().filter_map(|r| r.failure.as_ref().map(|f| format!("seed {}: {f}", r.seed))).collect(),
        }
    }
}

impl SweepReport {
    pub fn fit(protocol: Protocol, rows: Vec<SweepRow>, expected_exponent: Option<f64>) -> Result<Self> {
        let points: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.n >= MIN_FIT_N && r.median > 0).map(|r| (r.n as f64, r.median as f64)).collect();
        if points.len() < MIN_FIT_POINTS {
            bail!("insufficient data: {} sizes with n >= {MIN_FIT_N}, need {MIN_FIT_POINTS}", points.len());
        }
        let slope = loglog_slope(&points).expect("distinct sizes");
        let ci95 = bootstrap_slope_ci(&points, 1000, 0.95, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_or((slope, slope));
        Ok(SweepReport { protocol, rows, slope, ci95, expected_exponent })
    }

    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass_rate == 1.0)
    }

    pub fn slope_ok(&self) -> bool {
        self.expected_exponent.is_none_or(|e| self.slope <= e + SLOPE_TOLERANCE)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:>6} {:>6} {:>12} {:>12} {:>12} {:>7}\n", "n", "seeds", "min", "median", "max", "pass");
        for r in &self.rows {
            s += &format!("{:>6} {:>6} {:>12} {:>12} {:>12} {:>6.1}%\n", r.n, r.seeds, r.min, r.median, r.max, 100.0 * r.pass_rate);
        }
        s += &format!("slope {:.3} (95% CI {:.3}..{:.3}, n >= {MIN_FIT_N})", self.slope, self.ci95.0, self.ci95.1);
        if let Some(e) = self.expected_exponent {
            s += &format!(", expected <= {:.2} + {SLOPE_TOLERANCE}", e);
        }
        s
    }
}

/// Sizes from `a..b` (doubling), `a..b:s` (step `s`) or a comma list.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    if let Some((a, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (b, Some(s.trim().parse::<usize>()?)),
            None => (rest, None),
        };
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a == 0 || a > b || step == Some(0) {
            bail!("bad size range `{text}`");
        }
        let mut out = vec![a];
        loop {
            let last = *out.last().expect("non-empty");
            let next = step.map_or(last * 2, |s| last + s);
            if next > b {
                break;
            }
            out.push(next);
        }
        Ok(out)
    } else {
        text.split(',').map(|x| Ok(x.trim().parse()?)).collect()
    }
}

/// Seeds from `a..b` (inclusive) or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("bad seed range `{text}`");
        }
        Ok((a..=b).collect())
    } else {
        text.split(',').map(|x| Ok(x.trim().parse()?)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, median: u64) -> SweepRow {
        SweepRow { n, seeds: 1, min: median, median, max: median, pass_rate: 1.0, failures: vec![] }
    }

    #[test]
    fn size_ranges() {
        assert_eq!(parse_sizes("16..128").unwrap(), vec![16, 32, 64, 128]);
        assert_eq!(parse_sizes("2..9:3").unwrap(), vec![2, 5, 8]);
        assert_eq!(parse_sizes("4, 8,12").unwrap(), vec![4, 8, 12]);
        assert!(parse_sizes("9..3").is_err());
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("7,9").unwrap(), vec![7, 9]);
    }

    #[test]
    fn linear_fit_and_tolerance() {
        let rows = [4, 8, 16, 32, 64].iter().map(|&n| row(n, 3 * n as u64)).collect();
        let r = SweepReport::fit(Protocol::ComputeOr, rows, Some(0.9)).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-9);
        assert!(r.slope_ok());
        let rows = [8, 16, 32, 64].iter().map(|&n| row(n, (n * n) as u64)).collect();
        assert!(!SweepReport::fit(Protocol::NaiveCount, rows, Some(1.5)).unwrap().slope_ok());
    }

    #[test]
    fn too_few_sizes() {
        let rows = [2, 4, 8, 16, 32].iter().map(|&n| row(n, n as u64)).collect();
        assert!(SweepReport::fit(Protocol::ComputeOr, rows, None).is_err());
    }
}
