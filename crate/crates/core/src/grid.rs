//! Occupancy-grid data types, cell classification, and map serialization.
//!
//! Maps are row-major with zero-based `(row, col)` coordinates. The text
//! format is one character per cell (`'1'` obstacle, `'0'` free, `'.'`
//! unknown in observation maps), one row per line, LF endings, trailing
//! newline.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sensor::Neighborhood;

/// The fixed true environment: `1` = obstacle, `0` = free.
///
/// Entries are constants; the map is never mutated after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMap {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

/// A single exploration's output: `-1` unknown, `0` free, `1` obstacle.
///
/// Before an exploration every entry is `-1`; a finished exploration
/// contains no `-1` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMap {
    width: usize,
    height: usize,
    cells: Vec<i8>,
}

/// The fused output map: `1` = obstacle, `0` = free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusedMap {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

/// The three statistical regimes a cell can be in.
///
/// `FreeInM` cells are free cells inside some obstacle's neighborhood;
/// they are the only cells subject to false positives. Free cells outside
/// every neighborhood are confirmed surely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Obstacle,
    FreeInM,
    FreeOutsideM,
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Parameter("map dimensions must be positive"));
    }
    if len != width * height {
        return Err(Error::DimensionMismatch {
            expected: (height, width),
            got: (len / width.max(1), width),
        });
    }
    Ok(())
}

impl GroundTruthMap {
    pub fn new(width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        check_dims(width, height, cells.len())?;
        if cells.iter().any(|&v| v > 1) {
            return Err(Error::Parameter("ground-truth cells must be 0 or 1"));
        }
        Ok(Self { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn is_obstacle(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == 1
    }

    /// Row-major iterator over obstacle coordinates.
    pub fn obstacles(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(i, _)| (i / width, i % width))
    }

    pub fn to_text(&self) -> String {
        serialize_cells(self.width, self.height, self.cells.iter().map(|&v| v as i8))
    }

    pub fn to_pgm(&self) -> String {
        pgm_from_cells(self.width, self.height, self.cells.iter().map(|&v| v as i8))
    }
}

impl ObservationMap {
    pub fn new(width: usize, height: usize, cells: Vec<i8>) -> Result<Self> {
        check_dims(width, height, cells.len())?;
        if cells.iter().any(|&v| !(-1..=1).contains(&v)) {
            return Err(Error::Parameter("observation cells must be -1, 0, or 1"));
        }
        Ok(Self { width, height, cells })
    }

    /// A fresh pre-exploration map: every entry unknown (`-1`).
    pub fn unknown(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter("map dimensions must be positive"));
        }
        Ok(Self {
            width,
            height,
            cells: vec![-1; width * height],
        })
    }

    /// An all-zero post-exploration map, ready for observed hits.
    pub(crate) fn zeroed(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[i8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.cells[row * self.width + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: i8) {
        self.cells[row * self.width + col] = value;
    }

    /// True once no cell is unknown.
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|&v| v != -1)
    }

    pub fn to_text(&self) -> String {
        serialize_cells(self.width, self.height, self.cells.iter().copied())
    }

    pub fn to_pgm(&self) -> String {
        pgm_from_cells(self.width, self.height, self.cells.iter().copied())
    }
}

impl FusedMap {
    pub fn new(width: usize, height: usize, cells: Vec<u8>) -> Result<Self> {
        check_dims(width, height, cells.len())?;
        if cells.iter().any(|&v| v > 1) {
            return Err(Error::Parameter("fused cells must be 0 or 1"));
        }
        Ok(Self { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    pub fn to_text(&self) -> String {
        serialize_cells(self.width, self.height, self.cells.iter().map(|&v| v as i8))
    }

    pub fn to_pgm(&self) -> String {
        pgm_from_cells(self.width, self.height, self.cells.iter().map(|&v| v as i8))
    }
}

fn parse_cells(text: &str, allow_unknown: bool) -> Result<(usize, usize, Vec<i8>)> {
    let mut width = 0;
    let mut rows = 0;
    let mut cells = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let mut row_len = 0;
        for (col, ch) in line.chars().enumerate() {
            let value = match ch {
                '0' => 0,
                '1' => 1,
                '.' if allow_unknown => -1,
                _ => return Err(Error::IllegalChar { ch, row, col }),
            };
            cells.push(value);
            row_len += 1;
        }
        if row == 0 {
            width = row_len;
            if width == 0 {
                return Err(Error::EmptyMapText);
            }
        } else if row_len != width {
            return Err(Error::RaggedRow { row });
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyMapText);
    }
    Ok((width, rows, cells))
}

fn serialize_cells(width: usize, height: usize, cells: impl Iterator<Item = i8>) -> String {
    let mut out = String::with_capacity((width + 1) * height);
    for (i, v) in cells.enumerate() {
        out.push(match v {
            -1 => '.',
            0 => '0',
            _ => '1',
        });
        if (i + 1) % width == 0 {
            out.push('\n');
        }
    }
    out
}

/// Parse a ground-truth (or fused) map: rows of `'0'`/`'1'`.
pub fn parse_map(text: &str) -> Result<GroundTruthMap> {
    let (width, height, cells) = parse_cells(text, false)?;
    GroundTruthMap::new(width, height, cells.into_iter().map(|v| v as u8).collect())
}

/// Parse an observation map: rows of `'0'`/`'1'`/`'.'` (`'.'` = unknown).
pub fn parse_observation_map(text: &str) -> Result<ObservationMap> {
    let (width, height, cells) = parse_cells(text, true)?;
    ObservationMap::new(width, height, cells)
}

/// PGM (P2) export: free 255 (white), obstacle 0 (black), unknown 128 (gray).
fn pgm_from_cells(width: usize, height: usize, cells: impl Iterator<Item = i8>) -> String {
    let mut out = String::with_capacity(width * height * 4 + 16);
    out.push_str("P2\n");
    out.push_str(&alloc::format!("{width} {height}\n255\n"));
    for (i, v) in cells.enumerate() {
        out.push_str(match v {
            -1 => "128",
            0 => "255",
            _ => "0",
        });
        out.push(if (i + 1) % width == 0 { '\n' } else { ' ' });
    }
    out
}

/// Label every cell of `truth` with its [`CellClass`].
///
/// A free cell is `FreeInM` when it lies in the neighborhood of at least
/// one obstacle. Neighborhood offsets falling outside the grid are ignored
/// (clipped, not wrapped).
pub fn classify_cells(truth: &GroundTruthMap, nh: &Neighborhood) -> Vec<CellClass> {
    let (w, h) = (truth.width(), truth.height());
    let mut in_m = vec![false; w * h];
    for (row, col) in truth.obstacles() {
        for &(dy, dx) in nh.offsets() {
            let r = row as i64 + dy as i64;
            let c = col as i64 + dx as i64;
            if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                in_m[r as usize * w + c as usize] = true;
            }
        }
    }
    truth
        .cells()
        .iter()
        .zip(in_m)
        .map(|(&v, m)| {
            if v == 1 {
                CellClass::Obstacle
            } else if m {
                CellClass::FreeInM
            } else {
                CellClass::FreeOutsideM
            }
        })
        .collect()
}

/// Correct/total counts for one cell class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

/// Per-class agreement between a fused map and the ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub obstacle: Tally,
    pub free_in_m: Tally,
    pub free_outside_m: Tally,
}

impl ClassReport {
    pub fn tally(&self, class: CellClass) -> Tally {
        match class {
            CellClass::Obstacle => self.obstacle,
            CellClass::FreeInM => self.free_in_m,
            CellClass::FreeOutsideM => self.free_outside_m,
        }
    }

    pub fn grand_total(&self) -> u64 {
        self.obstacle.total + self.free_in_m.total + self.free_outside_m.total
    }
}

/// Count cells where `fused` agrees with `truth`, grouped by class.
pub fn accuracy_report(
    fused: &FusedMap,
    truth: &GroundTruthMap,
    classes: &[CellClass],
) -> Result<ClassReport> {
    if fused.width() != truth.width()
        || fused.height() != truth.height()
        || classes.len() != truth.cells().len()
    {
        return Err(Error::DimensionMismatch {
            expected: (truth.height(), truth.width()),
            got: (fused.height(), fused.width()),
        });
    }
    let mut report = ClassReport::default();
    for ((&f, &t), &class) in fused.cells().iter().zip(truth.cells()).zip(classes) {
        let tally = match class {
            CellClass::Obstacle => &mut report.obstacle,
            CellClass::FreeInM => &mut report.free_in_m,
            CellClass::FreeOutsideM => &mut report.free_outside_m,
        };
        tally.total += 1;
        if f == t {
            tally.correct += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::Neighborhood;

    #[test]
    fn parse_simple_map() {
        let m = parse_map("10\n01\n").unwrap();
        assert_eq!((m.width(), m.height()), (2, 2));
        assert_eq!(m.cells(), &[1, 0, 0, 1]);
    }

    #[test]
    fn parse_smallest_map() {
        let m = parse_map("1\n").unwrap();
        assert_eq!((m.width(), m.height()), (1, 1));
        assert_eq!(m.cells(), &[1]);
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        assert_eq!(parse_map("10\n0\n"), Err(Error::RaggedRow { row: 1 }));
    }

    #[test]
    fn parse_rejects_illegal_char() {
        assert_eq!(
            parse_map("10\n0x\n"),
            Err(Error::IllegalChar { ch: 'x', row: 1, col: 1 })
        );
        // '.' is only legal in observation maps
        assert!(matches!(parse_map("1.\n"), Err(Error::IllegalChar { .. })));
        assert!(parse_observation_map("1.\n").is_ok());
    }

    #[test]
    fn parse_rejects_empty_input() {
        assert_eq!(parse_map(""), Err(Error::EmptyMapText));
        assert_eq!(parse_map("\n"), Err(Error::EmptyMapText));
    }

    #[test]
    fn serialize_round_trips() {
        let m = parse_map("10\n01\n").unwrap();
        assert_eq!(m.to_text(), "10\n01\n");
        let one = GroundTruthMap::new(1, 1, vec![0]).unwrap();
        assert_eq!(one.to_text(), "0\n");
    }

    #[test]
    fn observation_serializes_unknown_as_dot() {
        let m = ObservationMap::new(2, 1, vec![-1, 1]).unwrap();
        assert_eq!(m.to_text(), ".1\n");
        assert_eq!(parse_observation_map(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn unknown_map_is_all_minus_one() {
        let m = ObservationMap::unknown(3, 2).unwrap();
        assert!(m.cells().iter().all(|&v| v == -1));
        assert!(!m.is_complete());
    }

    #[test]
    fn classify_single_center_obstacle() {
        let truth = parse_map("000\n010\n000\n").unwrap();
        let classes = classify_cells(&truth, &Neighborhood::square3());
        assert_eq!(classes[4], CellClass::Obstacle);
        for (i, &c) in classes.iter().enumerate() {
            if i != 4 {
                assert_eq!(c, CellClass::FreeInM);
            }
        }
    }

    #[test]
    fn classify_clips_at_boundaries() {
        let truth = parse_map("10000\n00000\n00000\n00000\n00000\n").unwrap();
        let classes = classify_cells(&truth, &Neighborhood::square3());
        assert_eq!(classes[0], CellClass::Obstacle);
        for (r, c) in [(0usize, 1usize), (1, 0), (1, 1)] {
            assert_eq!(classes[r * 5 + c], CellClass::FreeInM);
        }
        let in_m = 1 + 3;
        let outside = classes
            .iter()
            .filter(|&&c| c == CellClass::FreeOutsideM)
            .count();
        assert_eq!(outside, 25 - in_m);
    }

    #[test]
    fn classify_all_free() {
        let truth = parse_map("000\n000\n").unwrap();
        let classes = classify_cells(&truth, &Neighborhood::square3());
        assert!(classes.iter().all(|&c| c == CellClass::FreeOutsideM));
    }

    #[test]
    fn accuracy_identity_and_complement() {
        let truth = parse_map("10\n00\n").unwrap();
        let classes = classify_cells(&truth, &Neighborhood::square3());
        let same = FusedMap::new(2, 2, truth.cells().to_vec()).unwrap();
        let report = accuracy_report(&same, &truth, &classes).unwrap();
        assert_eq!(report.obstacle, Tally { correct: 1, total: 1 });
        assert_eq!(report.free_in_m, Tally { correct: 3, total: 3 });
        assert_eq!(report.grand_total(), 4);

        let flipped: Vec<u8> = truth.cells().iter().map(|&v| 1 - v).collect();
        let complement = FusedMap::new(2, 2, flipped).unwrap();
        let report = accuracy_report(&complement, &truth, &classes).unwrap();
        assert_eq!(report.obstacle.correct, 0);
        assert_eq!(report.free_in_m.correct, 0);
    }

    #[test]
    fn accuracy_counts_per_class() {
        let truth = parse_map("10\n00\n").unwrap();
        let classes = classify_cells(&truth, &Neighborhood::square3());
        let fused = FusedMap::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        let report = accuracy_report(&fused, &truth, &classes).unwrap();
        assert_eq!(report.obstacle, Tally { correct: 1, total: 1 });
        assert_eq!(report.free_in_m, Tally { correct: 2, total: 3 });
        assert_eq!(report.free_outside_m, Tally { correct: 0, total: 0 });
    }

    #[test]
    fn accuracy_rejects_dimension_mismatch() {
        let truth = parse_map("10\n00\n").unwrap();
        let classes = classify_cells(&truth, &Neighborhood::square3());
        let fused = FusedMap::new(1, 1, vec![1]).unwrap();
        assert!(matches!(
            accuracy_report(&fused, &truth, &classes),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pgm_uses_three_levels_only() {
        let m = ObservationMap::new(2, 2, vec![1, 0, -1, 0]).unwrap();
        assert_eq!(m.to_pgm(), "P2\n2 2\n255\n0 255\n128 255\n");
    }
}
