//! Fusing N observation maps into one.
//!
//! Two batch rules: threshold the per-cell observation mean at `C`
//! (inclusive, so a mean exactly at `C` fuses to obstacle), or pick the
//! per-cell maximum-likelihood hypothesis. Both depend only on the
//! per-cell count of 1-observations.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{FusedMap, ObservationMap};

/// Per-cell mean of `n` fused observations; every value times `n` is an
/// integer count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    n: u32,
}

impl MeanMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Number of observations behind each mean.
    pub fn n(&self) -> u32 {
        self.n
    }
}

fn per_cell_counts(observations: &[ObservationMap]) -> Result<(usize, usize, Vec<u32>)> {
    let first = observations.first().ok_or(Error::EmptyInput)?;
    let (w, h) = (first.width(), first.height());
    let mut counts = alloc::vec![0u32; w * h];
    for (index, map) in observations.iter().enumerate() {
        if map.width() != w || map.height() != h {
            return Err(Error::DimensionMismatch {
                expected: (h, w),
                got: (map.height(), map.width()),
            });
        }
        for (count, &cell) in counts.iter_mut().zip(map.cells()) {
            match cell {
                -1 => return Err(Error::IncompleteObservation { index }),
                1 => *count += 1,
                _ => {}
            }
        }
    }
    Ok((w, h, counts))
}

/// Arithmetic mean of the observations at every cell.
pub fn mean_map(observations: &[ObservationMap]) -> Result<MeanMap> {
    let (width, height, counts) = per_cell_counts(observations)?;
    let n = observations.len() as u32;
    let values = counts.iter().map(|&k| k as f64 / n as f64).collect();
    Ok(MeanMap { width, height, values, n })
}

/// Threshold rule: obstacle wherever the mean reaches `c`.
pub fn fuse_threshold(mean: &MeanMap, c: f64) -> Result<FusedMap> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Parameter("threshold must lie in (0,1)"));
    }
    let cells = mean.values.iter().map(|&v| u8::from(v >= c)).collect();
    FusedMap::new(mean.width, mean.height, cells)
}

/// Decision of the likelihood comparison for each possible count
/// `k = 0..=n`: `true` where the obstacle hypothesis wins (ties included).
fn ml_decision_table(p: f64, q: f64, n: u32) -> Vec<bool> {
    let ln_p = libm::log(p);
    let ln_1mp = libm::log(1.0 - p);
    let ln_q = libm::log(q);
    let ln_1mq = libm::log(1.0 - q);
    (0..=n)
        .map(|k| {
            let k = k as f64;
            let miss = (n as f64) - k;
            let obstacle = k * ln_p + miss * ln_1mp;
            let free = miss * ln_q + k * ln_1mq;
            obstacle >= free
        })
        .collect()
}

/// Maximum-likelihood rule: a cell with `k` of `n` rounds reading `1` is
/// an obstacle when `p^k (1-p)^(n-k) >= q^(n-k) (1-q)^k`, evaluated in
/// log space. Ties fuse to obstacle.
pub fn fuse_max_likelihood(observations: &[ObservationMap], p: f64, q: f64) -> Result<FusedMap> {
    if !(p > 0.0 && p < 1.0) || !(q > 0.0 && q < 1.0) {
        return Err(Error::Parameter("p and q must lie in (0,1)"));
    }
    let (width, height, counts) = per_cell_counts(observations)?;
    let table = ml_decision_table(p, q, observations.len() as u32);
    let cells = counts.iter().map(|&k| u8::from(table[k as usize])).collect();
    FusedMap::new(width, height, cells)
}

/// Smallest count `k` at which the maximum-likelihood rule outputs
/// obstacle; `n+1` when it never does. For `p + q > 1` the log-likelihood
/// difference is increasing in `k`, so the ML rule is exactly "count at
/// least `k*`".
pub fn ml_count_threshold(p: f64, q: f64, n: u32) -> Result<u32> {
    if !(p > 0.0 && p < 1.0) || !(q > 0.0 && q < 1.0) {
        return Err(Error::Parameter("p and q must lie in (0,1)"));
    }
    if n == 0 {
        return Err(Error::Parameter("round count must be at least 1"));
    }
    let table = ml_decision_table(p, q, n);
    Ok(table
        .iter()
        .position(|&one| one)
        .map(|k| k as u32)
        .unwrap_or(n + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_observation_map;

    fn obs(text: &str) -> ObservationMap {
        parse_observation_map(text).unwrap()
    }

    #[test]
    fn mean_of_identical_maps() {
        let maps = alloc::vec![obs("11\n11\n"); 3];
        let mean = mean_map(&maps).unwrap();
        assert_eq!(mean.n(), 3);
        assert!(mean.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mean_counts_ones() {
        let maps = alloc::vec![obs("1\n"), obs("0\n"), obs("1\n")];
        let mean = mean_map(&maps).unwrap();
        assert!((mean.value(0, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mean_of_single_map() {
        let mean = mean_map(&[obs("10\n")]).unwrap();
        assert_eq!(mean.n(), 1);
        assert_eq!(mean.values(), &[1.0, 0.0]);
    }

    #[test]
    fn mean_rejects_bad_input() {
        assert_eq!(mean_map(&[]), Err(Error::EmptyInput));
        assert!(matches!(
            mean_map(&[obs("10\n"), obs("1\n0\n")]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            mean_map(&[obs("10\n"), obs(".0\n")]),
            Err(Error::IncompleteObservation { index: 1 })
        );
    }

    #[test]
    fn threshold_tie_fuses_to_obstacle() {
        let maps = alloc::vec![
            obs("1\n"), obs("1\n"), obs("1\n"), obs("0\n"),
            obs("0\n"), obs("0\n"), obs("0\n"), obs("0\n"),
            obs("0\n"), obs("0\n"),
        ];
        let mean = mean_map(&maps).unwrap();
        assert_eq!(mean.value(0, 0), 0.3);
        assert_eq!(fuse_threshold(&mean, 0.3).unwrap().get(0, 0), 1);
    }

    #[test]
    fn threshold_strictly_below_is_free() {
        // Build the mean directly rather than a million maps.
        let mean = MeanMap {
            width: 1,
            height: 1,
            values: alloc::vec![0.299999],
            n: 1_000_000,
        };
        assert_eq!(fuse_threshold(&mean, 0.3).unwrap().get(0, 0), 0);
    }

    #[test]
    fn threshold_all_zero_stays_zero() {
        let maps = alloc::vec![obs("00\n00\n"); 4];
        let mean = mean_map(&maps).unwrap();
        for c in [0.1, 0.5, 0.9] {
            assert!(fuse_threshold(&mean, c).unwrap().cells().iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn threshold_rejects_out_of_range() {
        let mean = mean_map(&[obs("0\n")]).unwrap();
        assert!(fuse_threshold(&mean, 0.0).is_err());
        assert!(fuse_threshold(&mean, 1.0).is_err());
    }

    #[test]
    fn ml_symmetric_majority() {
        // p = q = 0.9, n = 5: obstacle wherever at least 3 rounds said 1.
        for k in 0u32..=5 {
            let maps: Vec<ObservationMap> = (0..5)
                .map(|i| if i < k { obs("1\n") } else { obs("0\n") })
                .collect();
            let fused = fuse_max_likelihood(&maps, 0.9, 0.9).unwrap();
            assert_eq!(fused.get(0, 0), u8::from(k >= 3), "k={k}");
        }
        assert_eq!(ml_count_threshold(0.9, 0.9, 5).unwrap(), 3);
    }

    #[test]
    fn ml_asymmetric_example() {
        // p=0.95, q=0.8, n=4: brute force puts the switch at k=3
        // (k=2 gives 2.256e-3 < 2.56e-2).
        for k in 0u32..=4 {
            let maps: Vec<ObservationMap> = (0..4)
                .map(|i| if i < k { obs("1\n") } else { obs("0\n") })
                .collect();
            let fused = fuse_max_likelihood(&maps, 0.95, 0.8).unwrap();
            assert_eq!(fused.get(0, 0), u8::from(k >= 3), "k={k}");
        }
        assert_eq!(ml_count_threshold(0.95, 0.8, 4).unwrap(), 3);
    }

    #[test]
    fn ml_single_round_symmetric_is_identity() {
        let fused = fuse_max_likelihood(&[obs("10\n")], 0.9, 0.9).unwrap();
        assert_eq!(fused.cells(), &[1, 0]);
    }

    #[test]
    fn ml_symmetric_closed_form_threshold() {
        // p = q: ceil((n+1)/2) for odd n, n/2 for even n (tie goes to 1).
        for n in 1..=20u32 {
            let expected = if n % 2 == 1 { (n + 1) / 2 } else { n / 2 };
            for p in [0.55, 0.7, 0.9, 0.99] {
                assert_eq!(ml_count_threshold(p, p, n).unwrap(), expected, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn ml_rejects_bad_parameters() {
        assert!(ml_count_threshold(0.0, 0.9, 3).is_err());
        assert!(ml_count_threshold(0.9, 1.0, 3).is_err());
        assert!(ml_count_threshold(0.9, 0.9, 0).is_err());
        assert!(fuse_max_likelihood(&[obs("1\n")], 1.0, 0.9).is_err());
    }
}
