//! Augmented bus-pair variables and their alignment matrices.
//!
//! A pair of adjacent buses (leading `i−1`, following `i`) on a route with
//! `n` links is described by the augmented vector
//!
//! ```text
//! x = [ℓ_{i,1..n} | ℓ_{i−1,1..n} | h_{i,1..n}] ∈ ℝ^{3n}
//! ```
//!
//! where `h_{i,j}` is the arrival gap (following minus leading) at stop `j`.
//! Everything known about a pair is a linear system `Gx = r`: one row per
//! observed link or ragged sum, one per observed headway, and the headway
//! identities `h_{j+1} − h_j − ℓ_{i,j} + ℓ_{i−1,j} = 0`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{RowReducer, RowStatus};

/// Largest contradiction (seconds) tolerated between observations and the
/// headway identities.
pub const CONSISTENCY_TOL: f64 = 1e-6;

/// A route with `n ≥ 2` links and `n + 1` named stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSpec {
    route_id: String,
    stop_names: Vec<String>,
}

impl RouteSpec {
    pub fn new(route_id: impl Into<String>, stop_names: Vec<String>) -> Result<Self> {
        if stop_names.len() < 3 {
            return Err(Error::InvalidParams("a route needs at least 2 links".to_string()));
        }
        Ok(RouteSpec { route_id: route_id.into(), stop_names })
    }

    /// A route with generated stop labels `S1..S{n+1}`.
    pub fn with_links(route_id: impl Into<String>, n_links: usize) -> Result<Self> {
        RouteSpec::new(route_id, (1..=n_links + 1).map(|i| format!("S{i}")).collect())
    }

    pub fn route_id(&self) -> &str {
        &self.route_id
    }

    pub fn n_links(&self) -> usize {
        self.stop_names.len() - 1
    }

    pub fn stop_names(&self) -> &[String] {
        &self.stop_names
    }

    /// Dimension of the augmented variable, `3n`.
    pub fn augmented_dim(&self) -> usize {
        3 * self.n_links()
    }
}

/// State of one link in a bus's series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkSlot {
    Observed(f64),
    Missing,
    /// Member of the ragged group with this index.
    Ragged(usize),
}

/// A known total over the contiguous links `start .. start + len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaggedGroup {
    pub start: usize,
    pub len: usize,
    pub total: f64,
}

/// Link travel times of one bus, with missing entries and ragged sums.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTimeSeries {
    bus_id: String,
    dispatch_time: i64,
    entries: Vec<LinkSlot>,
    groups: Vec<RaggedGroup>,
}

impl LinkTimeSeries {
    pub fn new(
        bus_id: impl Into<String>,
        dispatch_time: i64,
        entries: Vec<LinkSlot>,
        groups: Vec<RaggedGroup>,
    ) -> Result<Self> {
        for (j, slot) in entries.iter().enumerate() {
            match slot {
                LinkSlot::Observed(v) if !(v.is_finite() && *v > 0.0) => {
                    return Err(Error::InvalidSeries(format!("link {} has non-positive duration {v}", j + 1)));
                }
                LinkSlot::Ragged(g) if *g >= groups.len() => {
                    return Err(Error::InvalidSeries(format!("link {} references unknown group {g}", j + 1)));
                }
                _ => {}
            }
        }
        for (gi, g) in groups.iter().enumerate() {
            if g.len < 2 || g.start + g.len > entries.len() {
                return Err(Error::InvalidSeries(format!("ragged group {gi} has invalid extent")));
            }
            if !(g.total.is_finite() && g.total > 0.0) {
                return Err(Error::InvalidSeries(format!("ragged group {gi} has non-positive total")));
            }
            if entries.iter().enumerate().any(|(j, s)| {
                let inside = j >= g.start && j < g.start + g.len;
                inside != (*s == LinkSlot::Ragged(gi))
            }) {
                return Err(Error::InvalidSeries(format!("ragged group {gi} is not contiguous")));
            }
        }
        Ok(LinkTimeSeries { bus_id: bus_id.into(), dispatch_time, entries, groups })
    }

    /// All links observed.
    pub fn observed(bus_id: impl Into<String>, dispatch_time: i64, links: &[f64]) -> Result<Self> {
        LinkTimeSeries::new(bus_id, dispatch_time, links.iter().map(|v| LinkSlot::Observed(*v)).collect(), Vec::new())
    }

    pub fn bus_id(&self) -> &str {
        &self.bus_id
    }

    pub fn dispatch_time(&self) -> i64 {
        self.dispatch_time
    }

    pub fn entries(&self) -> &[LinkSlot] {
        &self.entries
    }

    pub fn groups(&self) -> &[RaggedGroup] {
        &self.groups
    }

    pub fn n_links(&self) -> usize {
        self.entries.len()
    }

    /// Number of links the bus has passed: one past the last non-missing slot.
    pub fn progress(&self) -> usize {
        self.entries.iter().rposition(|s| *s != LinkSlot::Missing).map_or(0, |j| j + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|s| *s == LinkSlot::Missing)
    }

    /// Value of link `j` when directly observed.
    pub fn value(&self, j: usize) -> Option<f64> {
        match self.entries.get(j) {
            Some(LinkSlot::Observed(v)) => Some(*v),
            _ => None,
        }
    }
}

/// Headways at stops `1..n` (the last stop is never recorded). Values are
/// signed: a negative headway means the following bus overtook.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadwaySeries {
    entries: Vec<Option<f64>>,
}

impl HeadwaySeries {
    pub fn new(entries: Vec<Option<f64>>) -> Result<Self> {
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite headway".to_string()));
        }
        Ok(HeadwaySeries { entries })
    }

    pub fn missing(n: usize) -> Self {
        HeadwaySeries { entries: vec![None; n] }
    }

    pub fn entries(&self) -> &[Option<f64>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Provenance of one row of an alignment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    FollowingLink,
    LeadingLink,
    Headway,
    Constraint,
    /// Forecast-time pseudo-observation of a leading bus's upcoming link.
    Pseudo,
}

impl RowKind {
    fn priority(self) -> u8 {
        match self {
            RowKind::FollowingLink | RowKind::LeadingLink | RowKind::Headway => 0,
            RowKind::Constraint => 1,
            RowKind::Pseudo => 2,
        }
    }
}

/// Which block of the augmented vector a coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Following,
    Leading,
    Headway,
}

/// Block and 0-based within-block index of augmented coordinate `c`.
pub fn coordinate_block(n: usize, c: usize) -> (Block, usize) {
    match c / n {
        0 => (Block::Following, c),
        1 => (Block::Leading, c - n),
        _ => (Block::Headway, c - 2 * n),
    }
}

/// Human-readable label for augmented coordinate `c` (1-based indices).
pub fn coordinate_label(n: usize, c: usize) -> String {
    match coordinate_block(n, c) {
        (Block::Following, j) => format!("following_link_{}", j + 1),
        (Block::Leading, j) => format!("leading_link_{}", j + 1),
        (Block::Headway, j) => format!("headway_{}", j + 1),
    }
}

/// One bus pair's constraint system `Gx = r` on the augmented variable.
#[derive(Debug, Clone, PartialEq)]
pub struct BusPairObservation {
    pub pair_id: String,
    /// 1-based period index.
    pub period: usize,
    pub leading_bus_id: String,
    pub following_bus_id: String,
    pub n_links: usize,
    /// Augmented coordinates represented by the columns of `g`.
    pub coords: Vec<usize>,
    pub g: DMatrix<f64>,
    pub r: DVector<f64>,
    pub kinds: Vec<RowKind>,
}

impl BusPairObservation {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn rows(&self) -> usize {
        self.g.nrows()
    }

    /// Augmented coordinates pinned by a single-entry observation row, with
    /// their observed values. Ragged rows are not included.
    pub fn direct_observations(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.g.nrows() {
            if self.kinds[i] == RowKind::Constraint || self.kinds[i] == RowKind::Pseudo {
                continue;
            }
            let nz: Vec<usize> = (0..self.g.ncols()).filter(|&j| self.g[(i, j)] != 0.0).collect();
            if nz.len() == 1 && self.g[(i, nz[0])] == 1.0 {
                out.push((self.coords[nz[0]], self.r[i]));
            }
        }
        out
    }
}

/// Row of the headway identity at link `j` (1-based, `1 ≤ j ≤ n − 1`):
/// `−1` at `ℓ_{i,j}`, `+1` at `ℓ_{i−1,j}`, `−1` at `h_{i,j}`, `+1` at `h_{i,j+1}`.
pub fn headway_constraint_row(j: usize, n: usize) -> Result<Vec<f64>> {
    if j == 0 || j >= n {
        return Err(Error::IndexOutOfRange { index: j, valid: "1 <= j <= n - 1" });
    }
    let mut row = vec![0.0; 3 * n];
    row[j - 1] = -1.0;
    row[n + j - 1] = 1.0;
    row[2 * n + j - 1] = -1.0;
    row[2 * n + j] = 1.0;
    Ok(row)
}

pub(crate) struct RawRow {
    pub kind: RowKind,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

pub(crate) fn link_rows(series: &LinkTimeSeries, offset: usize, dim: usize, kind: RowKind, out: &mut Vec<RawRow>) {
    let mut emitted = vec![false; series.groups.len()];
    for (j, slot) in series.entries.iter().enumerate() {
        match slot {
            LinkSlot::Observed(v) => {
                let mut coeffs = vec![0.0; dim];
                coeffs[offset + j] = 1.0;
                out.push(RawRow { kind, coeffs, rhs: *v });
            }
            LinkSlot::Ragged(g) if !emitted[*g] => {
                emitted[*g] = true;
                let grp = series.groups[*g];
                let mut coeffs = vec![0.0; dim];
                for k in grp.start..grp.start + grp.len {
                    coeffs[offset + k] = 1.0;
                }
                out.push(RawRow { kind, coeffs, rhs: grp.total });
            }
            _ => {}
        }
    }
}

pub(crate) fn headway_rows(headways: &HeadwaySeries, n: usize, out: &mut Vec<RawRow>) {
    for (j, h) in headways.entries.iter().enumerate() {
        if let Some(v) = h {
            let mut coeffs = vec![0.0; 3 * n];
            coeffs[2 * n + j] = 1.0;
            out.push(RawRow { kind: RowKind::Headway, coeffs, rhs: *v });
        }
    }
}

pub(crate) fn constraint_rows(n: usize, out: &mut Vec<RawRow>) {
    for j in 1..n {
        let coeffs = headway_constraint_row(j, n).expect("j within range");
        out.push(RawRow { kind: RowKind::Constraint, coeffs, rhs: 0.0 });
    }
}

/// Keeps a maximal independent subset of `rows`, offering observation rows
/// first, then headway identities, then pseudo-observations. Kept rows are
/// returned in their original order.
pub(crate) fn reduce_rows(rows: Vec<RawRow>, dim: usize) -> Result<ReducedRows> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| rows[i].kind.priority());
    let mut reducer = RowReducer::new(dim);
    let mut keep = vec![false; rows.len()];
    for &i in &order {
        match reducer.offer(&rows[i].coeffs, rows[i].rhs) {
            RowStatus::Independent => keep[i] = true,
            RowStatus::Dependent { residual } => {
                if rows[i].kind != RowKind::Pseudo && residual.abs() > CONSISTENCY_TOL {
                    return Err(Error::InconsistentObservation { row: i, residual });
                }
            }
        }
    }
    let kept: Vec<usize> = (0..rows.len()).filter(|&i| keep[i]).collect();
    Ok(ReducedRows {
        g: DMatrix::from_fn(kept.len(), dim, |i, j| rows[kept[i]].coeffs[j]),
        r: DVector::from_fn(kept.len(), |i, _| rows[kept[i]].rhs),
        kinds: kept.iter().map(|&i| rows[i].kind).collect(),
        kept,
    })
}

pub(crate) struct ReducedRows {
    pub g: DMatrix<f64>,
    pub r: DVector<f64>,
    pub kinds: Vec<RowKind>,
    /// Original index of each kept row.
    pub kept: Vec<usize>,
}

/// Builds the alignment matrix and recording vector of one bus pair.
///
/// Rows are laid out as following-bus links, leading-bus links, observed
/// headways, then headway identities; identities implied by the
/// observations are dropped so that `G` has full row rank.
pub fn build_augmented_pair(
    pair_id: impl Into<String>,
    leading: &LinkTimeSeries,
    following: &LinkTimeSeries,
    headways: &HeadwaySeries,
    period: usize,
) -> Result<BusPairObservation> {
    let n = following.n_links();
    if leading.n_links() != n {
        return Err(Error::LengthMismatch { left: leading.n_links(), right: n });
    }
    if headways.len() != n {
        return Err(Error::LengthMismatch { left: headways.len(), right: n });
    }
    if n < 2 {
        return Err(Error::InvalidParams("a route needs at least 2 links".to_string()));
    }
    let dim = 3 * n;
    let mut rows = Vec::new();
    link_rows(following, 0, dim, RowKind::FollowingLink, &mut rows);
    link_rows(leading, n, dim, RowKind::LeadingLink, &mut rows);
    headway_rows(headways, n, &mut rows);
    if rows.is_empty() {
        return Err(Error::EmptyObservation);
    }
    constraint_rows(n, &mut rows);
    let ReducedRows { g, r, kinds, .. } = reduce_rows(rows, dim)?;
    Ok(BusPairObservation {
        pair_id: pair_id.into(),
        period,
        leading_bus_id: leading.bus_id().to_string(),
        following_bus_id: following.bus_id().to_string(),
        n_links: n,
        coords: (0..dim).collect(),
        g,
        r,
        kinds,
    })
}

/// Structural diagnostics for an alignment matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub rows: usize,
    pub rank: usize,
    /// Rows that are neither an observation pattern nor a headway identity.
    pub sign_violations: Vec<usize>,
    /// Link-observation rows whose recorded duration is not positive.
    pub negative_durations: Vec<usize>,
    /// Identity rows with a nonzero right-hand side.
    pub nonzero_constraint_rhs: Vec<usize>,
}

impl ValidationReport {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.rows
    }

    pub fn is_valid(&self) -> bool {
        !self.rank_deficient()
            && self.sign_violations.is_empty()
            && self.negative_durations.is_empty()
            && self.nonzero_constraint_rhs.is_empty()
    }
}

enum RowShape {
    Link,
    Headway,
    Constraint,
    Invalid,
}

fn classify_row(row: &[f64], n: usize) -> RowShape {
    for j in 1..n {
        let pattern = headway_constraint_row(j, n).expect("j within range");
        if pattern.iter().zip(row).all(|(a, b)| a == b) || pattern.iter().zip(row).all(|(a, b)| *a == -*b) {
            return RowShape::Constraint;
        }
    }
    let ones: Vec<usize> = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
    if ones.is_empty() || ones.iter().any(|&i| row[i] != 1.0) {
        return RowShape::Invalid;
    }
    let first = ones[0];
    let last = *ones.last().expect("nonempty");
    let contiguous = last - first + 1 == ones.len();
    let same_block = first / n == last / n;
    if !(contiguous && same_block) {
        return RowShape::Invalid;
    }
    if first / n == 2 {
        if ones.len() == 1 { RowShape::Headway } else { RowShape::Invalid }
    } else {
        RowShape::Link
    }
}

/// Checks rank, sign patterns, and recorded durations of a pair's system.
/// Only meaningful on the unstandardized `{−1, 0, 1}` encoding.
pub fn validate_pair(obs: &BusPairObservation) -> ValidationReport {
    let n = obs.n_links;
    let mut report = ValidationReport {
        rows: obs.g.nrows(),
        rank: crate::linalg::rank(&obs.g),
        ..Default::default()
    };
    let full = obs.coords.len() == 3 * n && obs.coords.iter().enumerate().all(|(i, c)| i == *c);
    for i in 0..obs.g.nrows() {
        let mut row = vec![0.0; 3 * n];
        for (j, c) in obs.coords.iter().enumerate() {
            row[*c] = obs.g[(i, j)];
        }
        match classify_row(&row, n) {
            RowShape::Invalid => report.sign_violations.push(i),
            RowShape::Constraint if !full => report.sign_violations.push(i),
            RowShape::Constraint => {
                if obs.r[i].abs() > CONSISTENCY_TOL {
                    report.nonzero_constraint_rhs.push(i);
                }
            }
            RowShape::Link => {
                if !(obs.r[i] > 0.0) {
                    report.negative_durations.push(i);
                }
            }
            RowShape::Headway => {}
        }
    }
    report
}

/// All pairs of a route, grouped into daily periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub route: RouteSpec,
    pub periods: usize,
    pub pairs: Vec<BusPairObservation>,
    pub period_config: crate::trajectory::PeriodConfig,
}

impl Dataset {
    pub fn new(
        route: RouteSpec,
        period_config: crate::trajectory::PeriodConfig,
        pairs: Vec<BusPairObservation>,
    ) -> Result<Self> {
        let periods = period_config.count;
        for p in &pairs {
            if p.n_links != route.n_links() {
                return Err(Error::LengthMismatch { left: p.n_links, right: route.n_links() });
            }
            if p.period == 0 || p.period > periods {
                return Err(Error::IndexOutOfRange { index: p.period, valid: "1 <= period <= T" });
            }
        }
        Ok(Dataset { route, periods, pairs, period_config })
    }

    /// Number of pairs in each period (index 0 is period 1).
    pub fn period_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.periods];
        for p in &self.pairs {
            counts[p.period - 1] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Alignment matrix of a 4-link pair where the following bus misses its
    /// arrival at stop 3, with identity rows in this crate's sign convention.
    pub(crate) fn figure_one_matrix() -> DMatrix<f64> {
        let n = 4;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let unit = |c: usize| {
            let mut r = vec![0.0; 12];
            r[c] = 1.0;
            r
        };
        rows.push(unit(0));
        let mut ragged = vec![0.0; 12];
        ragged[1] = 1.0;
        ragged[2] = 1.0;
        rows.push(ragged);
        rows.push(unit(3));
        for c in 4..8 {
            rows.push(unit(c));
        }
        rows.push(unit(8));
        for j in 1..n {
            rows.push(headway_constraint_row(j, n).unwrap());
        }
        DMatrix::from_fn(11, 12, |i, j| rows[i][j])
    }

    fn figure_one_pair() -> BusPairObservation {
        // Leading arrivals 0, 100, 220, 330, 460; following 300, 410, ?, 650, 790.
        let leading = LinkTimeSeries::observed("lead", 0, &[100.0, 120.0, 110.0, 130.0]).unwrap();
        let following = LinkTimeSeries::new(
            "follow",
            300,
            vec![LinkSlot::Observed(110.0), LinkSlot::Ragged(0), LinkSlot::Ragged(0), LinkSlot::Observed(140.0)],
            vec![RaggedGroup { start: 1, len: 2, total: 240.0 }],
        )
        .unwrap();
        let headways = HeadwaySeries::new(vec![Some(300.0), Some(310.0), None, Some(320.0)]).unwrap();
        build_augmented_pair("p", &leading, &following, &headways, 1).unwrap()
    }

    #[test]
    fn constraint_row_examples() {
        assert_eq!(headway_constraint_row(1, 2).unwrap(), vec![-1.0, 0.0, 1.0, 0.0, -1.0, 1.0]);
        assert!(matches!(headway_constraint_row(2, 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(headway_constraint_row(0, 2), Err(Error::IndexOutOfRange { .. })));
        // Leading arrivals (0, 50, 120), following (30, 90, 170).
        let x = [60.0, 80.0, 50.0, 70.0, 30.0, 40.0];
        let row = headway_constraint_row(1, 2).unwrap();
        let v: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn figure_one_pair_spans_the_same_hyperplane() {
        let obs = figure_one_pair();
        assert_eq!(obs.g.nrows(), 11);
        assert_eq!(crate::linalg::rank(&obs.g), 11);
        // Same row space as the reference matrix: stacking adds no rank.
        let reference = figure_one_matrix();
        let stacked = DMatrix::from_fn(22, 12, |i, j| if i < 11 { obs.g[(i, j)] } else { reference[(i - 11, j)] });
        assert_eq!(crate::linalg::rank(&stacked), 11);
        // The true x satisfies both systems.
        let x = DVector::from_vec(vec![
            110.0, 120.0, 120.0, 140.0, 100.0, 120.0, 110.0, 130.0, 300.0, 310.0, 310.0, 320.0,
        ]);
        assert!(crate::linalg::residual_inf(&obs.g, &x, &obs.r) < 1e-9);
        let r_ref = DVector::from_vec(vec![110.0, 240.0, 140.0, 100.0, 120.0, 110.0, 130.0, 300.0, 0.0, 0.0, 0.0]);
        assert!(crate::linalg::residual_inf(&reference, &x, &r_ref) < 1e-9);
        assert_eq!(obs.kinds.iter().filter(|k| **k == RowKind::Constraint).count(), 1);
    }

    #[test]
    fn fully_observed_pair_reduces_to_identity() {
        let leading = LinkTimeSeries::observed("a", 0, &[50.0, 70.0]).unwrap();
        let following = LinkTimeSeries::observed("b", 30, &[60.0, 80.0]).unwrap();
        let headways = HeadwaySeries::new(vec![Some(30.0), Some(40.0)]).unwrap();
        let obs = build_augmented_pair("p", &leading, &following, &headways, 1).unwrap();
        assert_eq!(obs.g, DMatrix::identity(6, 6));
        assert_eq!(obs.r.as_slice(), &[60.0, 80.0, 50.0, 70.0, 30.0, 40.0]);
    }

    fn brute_rank(g: &DMatrix<f64>) -> usize {
        // Independent oracle: exact elimination over integers (fraction-free).
        let mut m: Vec<Vec<i64>> = (0..g.nrows()).map(|i| (0..g.ncols()).map(|j| g[(i, j)] as i64).collect()).collect();
        let mut rank = 0;
        for col in 0..g.ncols() {
            let Some(p) = (rank..m.len()).find(|&i| m[i][col] != 0) else { continue };
            m.swap(rank, p);
            for i in 0..m.len() {
                if i != rank && m[i][col] != 0 {
                    let (a, b) = (m[rank][col], m[i][col]);
                    for j in 0..g.ncols() {
                        m[i][j] = a * m[i][j] - b * m[rank][j];
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn missing_headway_is_determined_by_identity() {
        let leading = LinkTimeSeries::observed("a", 0, &[50.0, 70.0]).unwrap();
        let following = LinkTimeSeries::observed("b", 30, &[60.0, 80.0]).unwrap();
        let headways = HeadwaySeries::new(vec![Some(30.0), None]).unwrap();
        let obs = build_augmented_pair("p", &leading, &following, &headways, 1).unwrap();
        assert_eq!(obs.g.nrows(), 6);
        assert_eq!(brute_rank(&obs.g), 6);
        assert_eq!(obs.kinds.last(), Some(&RowKind::Constraint));
        let x = obs.g.clone().lu().solve(&obs.r).unwrap();
        assert!((x[5] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_observations_rejected() {
        let leading = LinkTimeSeries::observed("a", 0, &[50.0, 70.0]).unwrap();
        let following = LinkTimeSeries::observed("b", 30, &[60.0, 80.0]).unwrap();
        let headways = HeadwaySeries::new(vec![Some(30.0), Some(45.0)]).unwrap();
        let err = build_augmented_pair("p", &leading, &following, &headways, 1).unwrap_err();
        assert!(matches!(err, Error::InconsistentObservation { .. }));
    }

    #[test]
    fn empty_pair_rejected() {
        let none = LinkTimeSeries::new("a", 0, vec![LinkSlot::Missing; 3], vec![]).unwrap();
        let err = build_augmented_pair("p", &none, &none, &HeadwaySeries::missing(3), 1).unwrap_err();
        assert_eq!(err, Error::EmptyObservation);
    }

    #[test]
    fn construction_is_deterministic() {
        assert_eq!(figure_one_pair(), figure_one_pair());
    }

    #[test]
    fn validates_reference_matrix_and_defects() {
        let g = figure_one_matrix();
        let mut r = DVector::from_vec(vec![110.0, 240.0, 140.0, 100.0, 120.0, 110.0, 130.0, 300.0, 0.0, 0.0, 0.0]);
        let mut obs = figure_one_pair();
        obs.g = g.clone();
        obs.r = r.clone();
        let report = validate_pair(&obs);
        assert!(report.is_valid(), "{report:?}");
        assert_eq!(report.rank, 11);

        let dup = DMatrix::from_fn(12, 12, |i, j| if i < 11 { g[(i, j)] } else { g[(0, j)] });
        obs.g = dup;
        obs.r = DVector::from_fn(12, |i, _| if i < 11 { r[i] } else { r[0] });
        let report = validate_pair(&obs);
        assert!(report.rank_deficient());

        obs.g = g;
        r[3] = -5.0;
        obs.r = r;
        let report = validate_pair(&obs);
        assert_eq!(report.negative_durations, vec![3]);
    }

    #[test]
    fn series_validation() {
        assert!(LinkTimeSeries::observed("a", 0, &[10.0, -1.0]).is_err());
        let bad_group = LinkTimeSeries::new(
            "a",
            0,
            vec![LinkSlot::Ragged(0), LinkSlot::Observed(3.0), LinkSlot::Ragged(0)],
            vec![RaggedGroup { start: 0, len: 3, total: 9.0 }],
        );
        assert!(bad_group.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn identity_rows_vanish_on_consistent_pairs(
                n in 2usize..8,
                seed in proptest::collection::vec(1.0f64..500.0, 16),
                gap in -100.0f64..600.0,
            ) {
                let lead: Vec<f64> = seed[..n].to_vec();
                let follow: Vec<f64> = seed[8..8 + n].to_vec();
                let mut h = vec![gap];
                for j in 0..n - 1 {
                    h.push(h[j] + follow[j] - lead[j]);
                }
                let mut x = follow.clone();
                x.extend(&lead);
                x.extend(&h);
                for j in 1..n {
                    let row = headway_constraint_row(j, n).unwrap();
                    let v: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                    prop_assert!(v.abs() < 1e-9);
                }
                let l = LinkTimeSeries::observed("l", 0, &lead).unwrap();
                let f = LinkTimeSeries::observed("f", 0, &follow).unwrap();
                let hs = HeadwaySeries::new(h.iter().map(|v| Some(*v)).collect()).unwrap();
                let obs = build_augmented_pair("p", &l, &f, &hs, 1).unwrap();
                prop_assert_eq!(obs.g.nrows(), 3 * n);
                prop_assert_eq!(crate::linalg::rank(&obs.g), 3 * n);
            }

            #[test]
            fn identity_rows_are_independent(n in 2usize..12) {
                let rows: Vec<Vec<f64>> = (1..n).map(|j| headway_constraint_row(j, n).unwrap()).collect();
                let g = DMatrix::from_fn(n - 1, 3 * n, |i, j| rows[i][j]);
                prop_assert_eq!(crate::linalg::rank(&g), n - 1);
            }
        }
    }
}
