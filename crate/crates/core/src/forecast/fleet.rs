use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::predictive::{forecast_pair, PredictiveDistribution, Target};
use super::system::{build_forecast_constraints, ForecastOptions, ForecastQuery, LeadingForecast};
use crate::error::{Error, Result};
use crate::inference::PosteriorSamples;
use crate::rng::RngState;
use crate::trajectory::{headways, prefix_link_series, Trajectory};

/// One bus being tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct BusState {
    pub bus_id: String,
    /// Arrival timestamps at stops `1..=n+1` seen so far.
    pub arrivals: Vec<Option<i64>>,
    pub period: usize,
    pub leader: Option<String>,
    pub follower: Option<String>,
    pub forecast: Option<PredictiveDistribution>,
    order: u64,
}

impl BusState {
    fn last_stop(&self) -> Option<usize> {
        self.arrivals.iter().rposition(Option::is_some)
    }

    /// Arrived at the last stop.
    pub fn finished(&self) -> bool {
        self.arrivals.last().is_some_and(Option::is_some)
    }

    fn trajectory(&self) -> Trajectory {
        Trajectory::new(self.bus_id.clone(), self.bus_id.clone(), self.arrivals.clone())
            .expect("prefixes only grow in time")
    }
}

/// Buses on one route with their latest forecasts. A new arrival refreshes
/// the bus that reported it and then every follower down the chain.
#[derive(Debug, Clone)]
pub struct FleetState {
    n_links: usize,
    buses: BTreeMap<String, BusState>,
    pub clock: i64,
    options: ForecastOptions,
    rng: RngState,
    round: u64,
    next_order: u64,
}

impl FleetState {
    pub fn new(n_links: usize, options: ForecastOptions, rng: RngState) -> Self {
        FleetState { n_links, buses: BTreeMap::new(), clock: i64::MIN, options, rng, round: 0, next_order: 0 }
    }

    pub fn bus(&self, bus_id: &str) -> Option<&BusState> {
        self.buses.get(bus_id)
    }

    pub fn buses(&self) -> impl Iterator<Item = &BusState> {
        self.buses.values()
    }

    pub fn forecast(&self, bus_id: &str) -> Option<&PredictiveDistribution> {
        self.buses.get(bus_id).and_then(|b| b.forecast.as_ref())
    }

    /// Registers a bus behind `leader` (which must have no follower yet).
    pub fn add_bus(&mut self, bus_id: &str, leader: Option<&str>, period: usize) -> Result<()> {
        if let Some(l) = leader {
            let lb = self.buses.get(l).ok_or_else(|| Error::UnknownBus(l.to_string()))?;
            if lb.follower.is_some() {
                return Err(Error::InvalidParams(alloc::format!("bus {l} already has a follower")));
            }
        }
        if self.buses.contains_key(bus_id) {
            return Err(Error::InvalidParams(alloc::format!("bus {bus_id} already tracked")));
        }
        if let Some(l) = leader {
            self.buses.get_mut(l).expect("checked").follower = Some(bus_id.to_string());
        }
        self.buses.insert(
            bus_id.to_string(),
            BusState {
                bus_id: bus_id.to_string(),
                arrivals: vec![None; self.n_links + 1],
                period,
                leader: leader.map(str::to_string),
                follower: None,
                forecast: None,
                order: self.next_order,
            },
        );
        self.next_order += 1;
        Ok(())
    }

    /// Records an arrival at 0-based `stop` and refreshes affected
    /// forecasts. Returns the buses that were re-forecast, in order.
    pub fn observe(&mut self, posterior: &PosteriorSamples, bus_id: &str, stop: usize, time: i64) -> Result<Vec<String>> {
        if !self.record(bus_id, stop, time)? {
            return Ok(Vec::new());
        }
        self.round += 1;
        self.cascade(posterior, bus_id)
    }

    /// Records an arrival without forecasting. Returns false when the bus
    /// had already finished and the event was ignored.
    pub fn record(&mut self, bus_id: &str, stop: usize, time: i64) -> Result<bool> {
        let bus = self.buses.get_mut(bus_id).ok_or_else(|| Error::UnknownBus(bus_id.to_string()))?;
        if bus.finished() {
            return Ok(false);
        }
        if stop > self.n_links {
            return Err(Error::IndexOutOfRange { index: stop, valid: "0 <= stop <= n" });
        }
        let prev = bus.last_stop();
        let prev_time = prev.and_then(|s| bus.arrivals[s]);
        if prev.is_some_and(|s| stop <= s) || prev_time.is_some_and(|t| time <= t) {
            return Err(Error::InvalidSeries(alloc::format!("arrival of {bus_id} does not extend its prefix")));
        }
        bus.arrivals[stop] = Some(time);
        self.clock = self.clock.max(time);
        Ok(true)
    }

    fn cascade(&mut self, posterior: &PosteriorSamples, start: &str) -> Result<Vec<String>> {
        let mut touched = Vec::new();
        let mut current = Some(start.to_string());
        while let Some(id) = current {
            let bus = &self.buses[&id];
            let next = bus.follower.clone();
            if !bus.finished() && bus.last_stop().is_some() {
                let f = self.forecast_bus(posterior, &id)?;
                self.buses.get_mut(&id).expect("present").forecast = Some(f);
                touched.push(id);
            } else if bus.finished() {
                self.buses.get_mut(&id).expect("present").forecast = None;
            }
            current = next;
        }
        Ok(touched)
    }

    /// Re-forecasts every chain from its head.
    pub fn refresh_all(&mut self, posterior: &PosteriorSamples) -> Result<Vec<String>> {
        self.round += 1;
        let mut heads: Vec<(u64, String)> =
            self.buses.values().filter(|b| b.leader.is_none()).map(|b| (b.order, b.bus_id.clone())).collect();
        heads.sort();
        let mut touched = Vec::new();
        for (_, h) in heads {
            touched.extend(self.cascade(posterior, &h)?);
        }
        Ok(touched)
    }

    /// The query the fleet would build for a bus right now.
    pub fn query_for(&self, bus_id: &str) -> Result<ForecastQuery> {
        let bus = self.buses.get(bus_id).ok_or_else(|| Error::UnknownBus(bus_id.to_string()))?;
        let traj = bus.trajectory();
        let following = prefix_link_series(&traj);
        let Some(leader) = bus.leader.as_ref().map(|l| &self.buses[l]) else {
            return Ok(ForecastQuery::first_bus(bus_id, bus.period, following));
        };
        let lt = leader.trajectory();
        let leading_forecast = leader.forecast.as_ref().map(|f| {
            let links: Vec<usize> = f.targets.iter().filter_map(|t| if let Target::Link(j) = t { Some(*j) } else { None }).collect();
            LeadingForecast { links, samples: f.samples.clone() }
        });
        Ok(ForecastQuery {
            pair_id: alloc::format!("{}>{}", leader.bus_id, bus_id),
            period: bus.period,
            following,
            leading: Some(prefix_link_series(&lt)),
            headways: headways(&lt, &traj)?,
            leading_forecast,
        })
    }

    fn forecast_bus(&self, posterior: &PosteriorSamples, bus_id: &str) -> Result<PredictiveDistribution> {
        let query = self.query_for(bus_id)?;
        let system = build_forecast_constraints(&query, posterior.fit_config.variant, &self.options)?;
        let order = self.buses[bus_id].order;
        forecast_pair(posterior, &system, self.rng.substream2(self.round, order))
    }
}
