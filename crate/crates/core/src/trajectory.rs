//! Per-trip arrival trajectories, link series derivation, and pairing.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pair::{build_augmented_pair, Dataset, HeadwaySeries, LinkSlot, LinkTimeSeries, RaggedGroup, RouteSpec};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Arrival times (seconds since the epoch, local clock) at each of the
/// `n + 1` stops of a route for one trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub vehicle_id: String,
    pub trip_id: String,
    arrivals: Vec<Option<i64>>,
}

impl Trajectory {
    /// Fails unless the observed arrivals strictly increase.
    pub fn new(vehicle_id: impl Into<String>, trip_id: impl Into<String>, arrivals: Vec<Option<i64>>) -> Result<Self> {
        let mut last = None;
        for (j, a) in arrivals.iter().enumerate() {
            if let Some(t) = a {
                if last.is_some_and(|l| *t <= l) {
                    return Err(Error::InvalidSeries(alloc::format!("arrival at stop {} is not after the previous one", j + 1)));
                }
                last = Some(*t);
            }
        }
        Ok(Trajectory { vehicle_id: vehicle_id.into(), trip_id: trip_id.into(), arrivals })
    }

    /// Clears every arrival that is not strictly after the last kept one and
    /// returns the 0-based stop indices that were cleared.
    pub fn sanitized(
        vehicle_id: impl Into<String>,
        trip_id: impl Into<String>,
        mut arrivals: Vec<Option<i64>>,
    ) -> (Self, Vec<usize>) {
        let mut cleared = Vec::new();
        let mut last: Option<i64> = None;
        for (j, a) in arrivals.iter_mut().enumerate() {
            if let Some(t) = *a {
                if last.is_some_and(|l| t <= l) {
                    *a = None;
                    cleared.push(j);
                } else {
                    last = Some(t);
                }
            }
        }
        (Trajectory { vehicle_id: vehicle_id.into(), trip_id: trip_id.into(), arrivals }, cleared)
    }

    pub fn arrivals(&self) -> &[Option<i64>] {
        &self.arrivals
    }

    pub fn n_links(&self) -> usize {
        self.arrivals.len().saturating_sub(1)
    }

    /// First observed arrival, used as the dispatch time.
    pub fn dispatch_time(&self) -> Option<i64> {
        self.arrivals.iter().flatten().next().copied()
    }

    /// Day index (days since the epoch) of the dispatch time.
    pub fn service_day(&self) -> Option<i64> {
        self.dispatch_time().map(|t| t.div_euclid(SECONDS_PER_DAY))
    }

    pub fn observed_count(&self) -> usize {
        self.arrivals.iter().flatten().count()
    }
}

fn link_series(traj: &Trajectory) -> LinkTimeSeries {
    let n = traj.n_links();
    let mut entries = vec![LinkSlot::Missing; n];
    let mut groups = Vec::new();
    let observed: Vec<(usize, i64)> =
        traj.arrivals.iter().enumerate().filter_map(|(j, a)| a.map(|t| (j, t))).collect();
    for w in observed.windows(2) {
        let ((s, ts), (e, te)) = (w[0], w[1]);
        let total = (te - ts) as f64;
        if e - s == 1 {
            entries[s] = LinkSlot::Observed(total);
        } else {
            let g = groups.len();
            groups.push(RaggedGroup { start: s, len: e - s, total });
            for slot in &mut entries[s..e] {
                *slot = LinkSlot::Ragged(g);
            }
        }
    }
    LinkTimeSeries::new(traj.vehicle_id.clone(), traj.dispatch_time().unwrap_or(0), entries, groups)
        .expect("strictly increasing arrivals give positive durations")
}

/// Link travel times between consecutive observed stops. Spans over
/// unobserved interior stops become ragged groups; links before the first
/// or after the last observed stop are missing.
pub fn derive_link_series(traj: &Trajectory) -> Result<LinkTimeSeries> {
    if traj.observed_count() < 2 {
        return Err(Error::TooSparse);
    }
    Ok(link_series(traj))
}

/// Like [`derive_link_series`] but accepts a bus observed at fewer than two
/// stops, as happens for a bus in progress.
pub fn prefix_link_series(traj: &Trajectory) -> LinkTimeSeries {
    link_series(traj)
}

/// Signed headways (following minus leading) at stops `1..n`.
pub fn headways(leading: &Trajectory, following: &Trajectory) -> Result<HeadwaySeries> {
    if leading.arrivals.len() != following.arrivals.len() {
        return Err(Error::LengthMismatch { left: leading.arrivals.len(), right: following.arrivals.len() });
    }
    let n = following.n_links();
    HeadwaySeries::new(
        (0..n)
            .map(|j| match (leading.arrivals[j], following.arrivals[j]) {
                (Some(a), Some(b)) => Some((b - a) as f64),
                _ => None,
            })
            .collect(),
    )
}

/// An adjacent pair of trips on the same service day.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentPair {
    pub leading: usize,
    pub following: usize,
    pub headways: HeadwaySeries,
    /// Some observed headway is negative.
    pub overtaking: bool,
}

/// Pairs consecutive trips of each service day in dispatch order. The input
/// must already be sorted by dispatch time; trips with no observed arrival
/// are skipped.
pub fn pair_adjacent(trajs: &[Trajectory]) -> Result<Vec<AdjacentPair>> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, t) in trajs.iter().enumerate() {
        let Some(day) = t.service_day() else { continue };
        if let Some(p) = prev {
            let lead = &trajs[p];
            if lead.dispatch_time() > t.dispatch_time() {
                return Err(Error::InvalidSeries("trajectories are not sorted by dispatch time".into()));
            }
            if lead.service_day() == Some(day) {
                let h = headways(lead, t)?;
                let overtaking = h.entries().iter().flatten().any(|v| *v < 0.0);
                out.push(AdjacentPair { leading: p, following: i, headways: h, overtaking });
            }
        }
        prev = Some(i);
    }
    Ok(out)
}

/// Division of the service day into `count` consecutive periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodConfig {
    /// Seconds after midnight at which period 1 starts.
    pub day_start: u32,
    /// Length of each period in minutes.
    pub period_minutes: u32,
    pub count: usize,
}

impl PeriodConfig {
    pub fn new(day_start: u32, period_minutes: u32, count: usize) -> Result<Self> {
        if period_minutes == 0 || count == 0 || day_start as i64 >= SECONDS_PER_DAY {
            return Err(Error::InvalidParams("period configuration needs positive length and count".into()));
        }
        Ok(PeriodConfig { day_start, period_minutes, count })
    }

    /// Start (seconds after midnight) of 1-based period `t`.
    pub fn period_start(&self, t: usize) -> i64 {
        self.day_start as i64 + (t as i64 - 1) * self.period_minutes as i64 * 60
    }
}

/// 1-based period containing a dispatch time. Dispatches after the last
/// period belong to the last one; dispatches before the first are rejected.
pub fn assign_period(dispatch_time: i64, cfg: &PeriodConfig) -> Result<usize> {
    let tod = dispatch_time.rem_euclid(SECONDS_PER_DAY);
    let offset = tod - cfg.day_start as i64;
    if offset < 0 {
        return Err(Error::OutOfWindow);
    }
    let t = 1 + (offset / (cfg.period_minutes as i64 * 60)) as usize;
    Ok(t.min(cfg.count))
}

/// A pair that could not be turned into an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPair {
    pub pair_id: String,
    pub reason: Error,
}

/// Result of turning trajectories into a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBuild {
    pub dataset: Dataset,
    pub skipped: Vec<SkippedPair>,
    /// Pairs with a negative observed headway.
    pub overtaking: Vec<String>,
}

/// Identifier of the pair formed by two trips.
pub fn pair_id(leading: &Trajectory, following: &Trajectory) -> String {
    alloc::format!("{}>{}", leading.trip_id, following.trip_id)
}

/// Orders trajectories by dispatch time (ties by trip id) and drops those
/// with no observed arrival.
pub fn sort_by_dispatch(trajs: &mut Vec<Trajectory>) {
    trajs.retain(|t| t.dispatch_time().is_some());
    trajs.sort_by(|a, b| a.dispatch_time().cmp(&b.dispatch_time()).then_with(|| a.trip_id.cmp(&b.trip_id)));
}

/// Pairs adjacent trips, assigns periods by the following trip's dispatch,
/// and builds each pair's constraint system.
pub fn build_dataset(route: &RouteSpec, cfg: &PeriodConfig, mut trajs: Vec<Trajectory>) -> Result<DatasetBuild> {
    if let Some(t) = trajs.iter().find(|t| t.arrivals.len() != route.n_links() + 1) {
        return Err(Error::LengthMismatch { left: t.arrivals.len(), right: route.n_links() + 1 });
    }
    sort_by_dispatch(&mut trajs);
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    let mut overtaking = Vec::new();
    for adj in pair_adjacent(&trajs)? {
        let (lead, follow) = (&trajs[adj.leading], &trajs[adj.following]);
        let id = pair_id(lead, follow);
        let built = assign_period(follow.dispatch_time().expect("sorted trips have arrivals"), cfg).and_then(|t| {
            build_augmented_pair(id.clone(), &prefix_link_series(lead), &prefix_link_series(follow), &adj.headways, t)
        });
        match built {
            Ok(mut obs) => {
                obs.leading_bus_id = lead.vehicle_id.clone();
                obs.following_bus_id = follow.vehicle_id.clone();
                if adj.overtaking {
                    overtaking.push(id);
                }
                pairs.push(obs);
            }
            Err(reason) => skipped.push(SkippedPair { pair_id: id, reason }),
        }
    }
    Ok(DatasetBuild { dataset: Dataset::new(route.clone(), *cfg, pairs)?, skipped, overtaking })
}
