//! The detection-error model.
//!
//! An obstacle is read as `1` with probability `p`; the missing mass `1-p`
//! scatters as a false positive into the obstacle's neighborhood `NH`
//! according to an error distribution `DE`. Free cells near obstacles
//! therefore read `1` with a position-dependent probability `1-q(x,y)`;
//! `q_floor` computes the worst-case floor `q'` used for planning.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::GroundTruthMap;

/// `(dy, dx)` offset from a neighborhood's center.
pub type Offset = (i32, i32);

/// How per-obstacle error contributions at a shared free cell combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QMode {
    /// Sum of contributions, clamped to 1. Matches the closed-form line
    /// analysis and upper-bounds the product form.
    Additive,
    /// `1 - prod(1 - e_o)`: obstacles scatter independently. This is the
    /// law the generative simulator actually follows.
    IndependentProduct,
}

/// What is known about the obstacle layout before exploring.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternKnowledge {
    /// No information at all: plan with `q' = p`.
    Nothing,
    /// Obstacles form lines at least 3 cells apart, so their 3x3
    /// neighborhoods never overlap.
    SeparatedLines,
    /// The exact layout is available; `q'` is minimized over its cells.
    ExplicitMap(GroundTruthMap),
}

/// A finite set of offsets centered on an obstacle, always containing
/// `(0,0)`. Offsets reaching past the map boundary are clipped by the
/// consumers, never wrapped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    offsets: Vec<Offset>,
}

impl Neighborhood {
    /// Offsets must be distinct and include the center `(0,0)`.
    pub fn new(mut offsets: Vec<Offset>) -> Result<Self> {
        offsets.sort_unstable();
        if offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parameter("neighborhood offsets must be distinct"));
        }
        if !offsets.contains(&(0, 0)) {
            return Err(Error::Parameter("neighborhood must contain the center (0,0)"));
        }
        Ok(Self { offsets })
    }

    /// The 3x3 square, the worked case throughout.
    pub fn square3() -> Self {
        let mut offsets = Vec::with_capacity(9);
        for dy in -1..=1 {
            for dx in -1..=1 {
                offsets.push((dy, dx));
            }
        }
        Self { offsets }
    }

    /// Offset count, center included. Never zero.
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    /// All offsets in sorted order, center included.
    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    /// Offsets excluding the center.
    pub fn off_center(&self) -> impl Iterator<Item = Offset> + '_ {
        self.offsets.iter().copied().filter(|&o| o != (0, 0))
    }

    pub fn is_square3(&self) -> bool {
        self.offsets == Self::square3().offsets
    }
}

/// Distribution of a single obstacle detection over its neighborhood:
/// mass `p` at the center (a correct read), the rest scattered across the
/// off-center offsets (a false positive landing on a neighbor).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDistribution {
    center_mass: f64,
    off_center: Vec<(Offset, f64)>,
    off_total: f64,
}

const MASS_TOLERANCE: f64 = 1e-12;

impl ErrorDistribution {
    /// Masses must be non-negative, the center mass in `(0,1)`, and the
    /// total within `1e-12` of 1.
    pub fn new(center_mass: f64, mut off_center: Vec<(Offset, f64)>) -> Result<Self> {
        if !(center_mass > 0.0 && center_mass < 1.0) {
            return Err(Error::Parameter("center mass must lie in (0,1)"));
        }
        off_center.sort_unstable_by_key(|&(o, _)| o);
        if off_center.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parameter("duplicate off-center offset"));
        }
        if off_center.iter().any(|&(o, m)| o == (0, 0) || !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::Parameter(
                "off-center masses must be non-negative and exclude (0,0)",
            ));
        }
        let off_total: f64 = off_center.iter().map(|&(_, m)| m).sum();
        if libm::fabs(center_mass + off_total - 1.0) > MASS_TOLERANCE {
            return Err(Error::Parameter("error-distribution masses must sum to 1"));
        }
        Ok(Self { center_mass, off_center, off_total })
    }

    /// The uniform distribution over `nh`: mass `p` at the center, the
    /// remaining `1-p` shared equally by the other offsets.
    pub fn uniform(p: f64, nh: &Neighborhood) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Parameter("detection probability p must lie in (0,1)"));
        }
        if nh.len() < 2 {
            return Err(Error::Parameter(
                "neighborhood needs at least one off-center cell to scatter to",
            ));
        }
        let share = (1.0 - p) / (nh.len() - 1) as f64;
        let off_center: Vec<(Offset, f64)> = nh.off_center().map(|o| (o, share)).collect();
        Self::new(p, off_center)
    }

    /// Detection probability at the center.
    pub fn p(&self) -> f64 {
        self.center_mass
    }

    pub fn off_center(&self) -> &[(Offset, f64)] {
        &self.off_center
    }

    pub fn mass_at(&self, offset: Offset) -> Option<f64> {
        self.off_center
            .iter()
            .find(|&&(o, _)| o == offset)
            .map(|&(_, m)| m)
    }

    /// True when every off-center mass equals `(1-p)/(n-1)` within the
    /// construction tolerance.
    pub fn is_uniform(&self) -> bool {
        let share = self.off_total / self.off_center.len() as f64;
        self.off_center
            .iter()
            .all(|&(_, m)| libm::fabs(m - share) <= MASS_TOLERANCE)
    }

    /// Sample an off-center offset from the normalized scatter masses.
    /// `u` must be uniform on [0,1).
    pub(crate) fn sample_off_center(&self, u: f64) -> Offset {
        let target = u * self.off_total;
        let mut acc = 0.0;
        for &(offset, mass) in &self.off_center {
            acc += mass;
            if target < acc {
                return offset;
            }
        }
        self.off_center[self.off_center.len() - 1].0
    }

    /// The neighborhood implied by this distribution (center + offsets).
    pub fn neighborhood(&self) -> Neighborhood {
        let mut offsets: Vec<Offset> = self.off_center.iter().map(|&(o, _)| o).collect();
        offsets.push((0, 0));
        offsets.sort_unstable();
        Neighborhood { offsets }
    }
}

/// Full sensor description: neighborhood, error distribution, and the
/// combination mode used when several obstacles cover one free cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    nh: Neighborhood,
    de: ErrorDistribution,
    qmode: QMode,
}

impl SensorModel {
    pub fn new(nh: Neighborhood, de: ErrorDistribution, qmode: QMode) -> Result<Self> {
        let implied = de.neighborhood();
        if implied.offsets() != nh.offsets() {
            return Err(Error::Parameter(
                "error distribution offsets must match the neighborhood",
            ));
        }
        Ok(Self { nh, de, qmode })
    }

    /// Uniform error sharing over `nh`.
    pub fn uniform(p: f64, nh: Neighborhood, qmode: QMode) -> Result<Self> {
        let de = ErrorDistribution::uniform(p, &nh)?;
        Ok(Self { nh, de, qmode })
    }

    pub fn p(&self) -> f64 {
        self.de.p()
    }

    pub fn nh(&self) -> &Neighborhood {
        &self.nh
    }

    pub fn de(&self) -> &ErrorDistribution {
        &self.de
    }

    pub fn qmode(&self) -> QMode {
        self.qmode
    }
}

/// Scatter masses reaching `cell` from surrounding obstacles.
fn incoming_masses<'a>(
    truth: &'a GroundTruthMap,
    de: &'a ErrorDistribution,
    cell: (usize, usize),
) -> impl Iterator<Item = f64> + 'a {
    de.off_center().iter().filter_map(move |&((dy, dx), mass)| {
        let source_r = cell.0 as i64 - dy as i64;
        let source_c = cell.1 as i64 - dx as i64;
        if source_r >= 0
            && source_c >= 0
            && (source_r as usize) < truth.height()
            && (source_c as usize) < truth.width()
            && truth.is_obstacle(source_r as usize, source_c as usize)
        {
            Some(mass)
        } else {
            None
        }
    })
}

/// Number of obstacles whose neighborhood covers `cell`.
pub fn coverage_count(truth: &GroundTruthMap, nh: &Neighborhood, cell: (usize, usize)) -> usize {
    nh.off_center()
        .filter(|&(dy, dx)| {
            let source_r = cell.0 as i64 - dy as i64;
            let source_c = cell.1 as i64 - dx as i64;
            source_r >= 0
                && source_c >= 0
                && (source_r as usize) < truth.height()
                && (source_c as usize) < truth.width()
                && truth.is_obstacle(source_r as usize, source_c as usize)
        })
        .count()
}

/// Probability `1-q(x,y)` that a single exploration reads the free cell
/// as `1`. Zero for cells outside every obstacle neighborhood.
pub fn false_positive_prob(
    truth: &GroundTruthMap,
    de: &ErrorDistribution,
    cell: (usize, usize),
    mode: QMode,
) -> Result<f64> {
    if truth.is_obstacle(cell.0, cell.1) {
        return Err(Error::Domain("q(x,y) is defined only on free cells"));
    }
    let fp = match mode {
        QMode::Additive => {
            let sum: f64 = incoming_masses(truth, de, cell).sum();
            if sum > 1.0 {
                1.0
            } else {
                sum
            }
        }
        QMode::IndependentProduct => {
            let survive: f64 = incoming_masses(truth, de, cell).map(|e| 1.0 - e).product();
            1.0 - survive
        }
    };
    Ok(fp)
}

/// Worst-case `q' = min q(x,y)` over all obstacle patterns compatible
/// with `knowledge`.
pub fn q_floor(de: &ErrorDistribution, knowledge: &PatternKnowledge, mode: QMode) -> Result<f64> {
    match knowledge {
        PatternKnowledge::Nothing => Ok(de.p()),
        PatternKnowledge::SeparatedLines => {
            if !de.neighborhood().is_square3() {
                return Err(Error::UnsupportedPattern(
                    "the separated-lines closed form is known only for a 3x3 neighborhood",
                ));
            }
            if !de.is_uniform() {
                return Err(Error::UnsupportedPattern(
                    "the separated-lines closed form assumes uniform error sharing",
                ));
            }
            // Worst cell sits beside a line interior and is covered by the
            // three adjacent line cells, each contributing (1-p)/8.
            let share = (1.0 - de.p()) / 8.0;
            Ok(match mode {
                QMode::Additive => 1.0 - 3.0 * share,
                QMode::IndependentProduct => {
                    let s = 1.0 - share;
                    s * s * s
                }
            })
        }
        PatternKnowledge::ExplicitMap(truth) => {
            let nh = de.neighborhood();
            let mut floor: f64 = 1.0;
            for row in 0..truth.height() {
                for col in 0..truth.width() {
                    if truth.is_obstacle(row, col) {
                        continue;
                    }
                    if coverage_count(truth, &nh, (row, col)) == 0 {
                        continue;
                    }
                    let q = 1.0 - false_positive_prob(truth, de, (row, col), mode)?;
                    if q < floor {
                        floor = q;
                    }
                }
            }
            Ok(floor)
        }
    }
}
