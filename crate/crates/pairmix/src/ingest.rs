//! AVL events to trajectories, plus the per-link coverage report.

use std::collections::HashMap;
use std::io::Write;

use pairmix_core::pair::LinkSlot;
use pairmix_core::trajectory::{build_dataset, prefix_link_series, DatasetBuild};
use pairmix_core::{PeriodConfig, RouteSpec, Trajectory};

use crate::avl::{AdFlag, AvlEvent};
use crate::config::RouteConfig;
use crate::error::{CliError, Context, Result};

/// A repeated arrival report for a stop; the first one was kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Duplicate {
    pub trip_id: String,
    pub stop_id: String,
    pub kept: i64,
    pub dropped: i64,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub trajectories: Vec<Trajectory>,
    pub duplicates: Vec<Duplicate>,
    /// (trip, 0-based stop) arrivals cleared for going back in time.
    pub non_monotone: Vec<(String, usize)>,
    pub other_route: usize,
    pub departures: usize,
}

/// One trajectory per trip in order of first appearance; first arrival
/// report per stop wins.
pub fn extract_trajectories(events: &[AvlEvent], route: &RouteConfig) -> Result<Extraction> {
    let stop_index: HashMap<&str, usize> =
        route.route.stop_names().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let slots = route.route.n_links() + 1;
    let mut out = Extraction::default();
    let mut trips: Vec<(String, String, Vec<Option<i64>>)> = Vec::new();
    let mut by_trip: HashMap<String, usize> = HashMap::new();
    for ev in events {
        if ev.route_id != route.route.route_id() || ev.direction_id != route.direction {
            out.other_route += 1;
            continue;
        }
        if ev.ad_flag == AdFlag::Departure {
            out.departures += 1;
            continue;
        }
        let &j = stop_index
            .get(ev.stop_id.as_str())
            .ok_or_else(|| CliError::UnknownStop { stop: ev.stop_id.clone(), trip: ev.trip_id.clone() })?;
        let idx = *by_trip.entry(ev.trip_id.clone()).or_insert_with(|| {
            trips.push((ev.vehicle_id.clone(), ev.trip_id.clone(), vec![None; slots]));
            trips.len() - 1
        });
        let slot = &mut trips[idx].2[j];
        match *slot {
            Some(kept) => out.duplicates.push(Duplicate {
                trip_id: ev.trip_id.clone(),
                stop_id: ev.stop_id.clone(),
                kept,
                dropped: ev.ad_time,
            }),
            None => *slot = Some(ev.ad_time),
        }
    }
    for (vehicle, trip, arrivals) in trips {
        let (t, cleared) = Trajectory::sanitized(vehicle, trip.clone(), arrivals);
        out.non_monotone.extend(cleared.into_iter().map(|j| (trip.clone(), j)));
        out.trajectories.push(t);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkCoverage {
    pub observed: usize,
    pub missing: usize,
    pub ragged: usize,
}

/// Data overview written next to an ingested dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub links: Vec<LinkCoverage>,
    pub trips: usize,
    pub pairs: usize,
    pub skipped_pairs: usize,
    pub overtaking_pairs: usize,
    pub duplicates: usize,
    pub non_monotone: usize,
    pub rejects: usize,
    pub other_route: usize,
}

pub fn link_coverage(n_links: usize, trajs: &[Trajectory]) -> Vec<LinkCoverage> {
    let mut cov = vec![LinkCoverage::default(); n_links];
    for t in trajs {
        for (c, slot) in cov.iter_mut().zip(prefix_link_series(t).entries()) {
            match slot {
                LinkSlot::Observed(_) => c.observed += 1,
                LinkSlot::Missing => c.missing += 1,
                LinkSlot::Ragged(_) => c.ragged += 1,
            }
        }
    }
    cov
}

impl IngestReport {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in [
            ("trips", self.trips),
            ("pairs", self.pairs),
            ("skipped_pairs", self.skipped_pairs),
            ("overtaking_pairs", self.overtaking_pairs),
            ("duplicate_arrivals", self.duplicates),
            ("non_monotone_arrivals", self.non_monotone),
            ("rejected_rows", self.rejects),
            ("other_route_rows", self.other_route),
        ] {
            writeln!(out, "# {k} = {v}")?;
        }
        writeln!(out, "link\tobserved\tmissing\tragged")?;
        for (j, c) in self.links.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", j + 1, c.observed, c.missing, c.ragged)?;
        }
        Ok(())
    }
}

pub struct Ingested {
    pub trajectories: Vec<Trajectory>,
    pub build: DatasetBuild,
    pub report: IngestReport,
    pub extraction: Extraction,
}

/// Trajectories, dataset and report from parsed events.
pub fn ingest_events(events: &[AvlEvent], rejects: usize, route: &RouteConfig, periods: &PeriodConfig) -> Result<Ingested> {
    let extraction = extract_trajectories(events, route)?;
    let mut trajectories = extraction.trajectories.clone();
    pairmix_core::trajectory::sort_by_dispatch(&mut trajectories);
    let build = dataset_from(&route.route, periods, &trajectories)?;
    let report = IngestReport {
        links: link_coverage(route.route.n_links(), &trajectories),
        trips: trajectories.len(),
        pairs: build.dataset.pairs.len(),
        skipped_pairs: build.skipped.len(),
        overtaking_pairs: build.overtaking.len(),
        duplicates: extraction.duplicates.len(),
        non_monotone: extraction.non_monotone.len(),
        rejects,
        other_route: extraction.other_route,
    };
    Ok(Ingested { trajectories, build, report, extraction })
}

pub fn dataset_from(route: &RouteSpec, periods: &PeriodConfig, trajs: &[Trajectory]) -> Result<DatasetBuild> {
    build_dataset(route, periods, trajs.to_vec()).context(|| "building bus pairs".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avl::{parse_avl, Schema};
    use crate::config::KeyValues;

    fn route() -> RouteConfig {
        RouteConfig::from_kv(&mut KeyValues::parse("route_id = 60\nstops = A,B,C,D,E\n", "t").unwrap()).unwrap()
    }

    fn ev(trip: &str, stop: &str, flag: AdFlag, t: i64) -> AvlEvent {
        AvlEvent {
            record_id: String::new(),
            vehicle_id: format!("V{trip}"),
            trip_id: trip.into(),
            route_id: "60".into(),
            route_name: String::new(),
            direction_id: "0".into(),
            stop_id: stop.into(),
            stop_name: String::new(),
            ad_flag: flag,
            ad_time: t,
        }
    }

    fn full(trip: &str, t0: i64) -> Vec<AvlEvent> {
        ["A", "B", "C", "D", "E"].iter().enumerate().map(|(j, s)| ev(trip, s, AdFlag::Arrival, t0 + 100 * j as i64)).collect()
    }

    #[test]
    fn complete_trip_has_no_gaps() {
        let x = extract_trajectories(&full("T1", 21_600), &route()).unwrap();
        assert_eq!(x.trajectories.len(), 1);
        assert_eq!(x.trajectories[0].observed_count(), 5);
    }

    #[test]
    fn absent_stop_becomes_missing_slot() {
        let mut e = full("T1", 21_600);
        e.remove(2);
        let x = extract_trajectories(&e, &route()).unwrap();
        assert_eq!(x.trajectories[0].arrivals()[2], None);
        assert_eq!(x.trajectories[0].observed_count(), 4);
    }

    #[test]
    fn first_duplicate_wins() {
        let mut e = full("T1", 21_600);
        e.insert(2, ev("T1", "B", AdFlag::Arrival, 21_720));
        let x = extract_trajectories(&e, &route()).unwrap();
        assert_eq!(x.trajectories[0].arrivals()[1], Some(21_700));
        assert_eq!(x.duplicates, vec![Duplicate { trip_id: "T1".into(), stop_id: "B".into(), kept: 21_700, dropped: 21_720 }]);
    }

    #[test]
    fn departures_other_routes_and_backwards_times() {
        let mut e = full("T1", 21_600);
        e.push(ev("T1", "A", AdFlag::Departure, 21_610));
        let mut other = ev("T9", "A", AdFlag::Arrival, 0);
        other.direction_id = "1".into();
        e.push(other);
        e[3].ad_time = 21_650;
        let x = extract_trajectories(&e, &route()).unwrap();
        assert_eq!((x.departures, x.other_route), (1, 1));
        assert_eq!(x.non_monotone, vec![("T1".to_string(), 3)]);
        assert_eq!(x.trajectories[0].arrivals()[3], None);
    }

    #[test]
    fn unknown_stop_is_an_error() {
        let e = vec![ev("T1", "Z", AdFlag::Arrival, 0)];
        let err = extract_trajectories(&e, &route()).unwrap_err();
        assert!(matches!(err, CliError::UnknownStop { .. }));
    }

    // Hand-built fixture: trip 1 complete, trip 2 misses C (ragged 2..3),
    // trip 3 misses A and E (links 1 and 4 missing).
    #[test]
    fn report_counts_match_fixture() {
        let mut e = full("T1", 21_600);
        let mut t2 = full("T2", 21_900);
        t2.remove(2);
        let mut t3 = full("T3", 22_200);
        t3.remove(4);
        t3.remove(0);
        e.extend(t2);
        e.extend(t3);
        let periods = PeriodConfig::new(6 * 3600, 60, 1).unwrap();
        let got = ingest_events(&e, 0, &route(), &periods).unwrap();
        let c = |o, m, r| LinkCoverage { observed: o, missing: m, ragged: r };
        assert_eq!(got.report.links, vec![c(2, 1, 0), c(2, 0, 1), c(2, 0, 1), c(2, 1, 0)]);
        assert_eq!((got.report.trips, got.report.pairs), (3, 2));
        let mut buf = Vec::new();
        got.report.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("link\tobserved\tmissing\tragged\n1\t2\t1\t0\n"));
    }

    #[test]
    fn parsed_file_end_to_end() {
        let text = "ID,OBUID,TRIP_ID,ROUTE_ID,ROUTESUB_ID,ROUTE_STA_ID,AD_FLAG,AD_TIME\n\
                    1,V1,T1,60,0,A,1,\"20161202, 06:00:00\"\n2,V1,T1,60,0,B,1,\"20161202, 06:02:00\"\n";
        let p = parse_avl(text.as_bytes(), &Schema::default()).unwrap();
        let x = extract_trajectories(&p.events, &route()).unwrap();
        let a = x.trajectories[0].arrivals();
        assert_eq!(a[1].unwrap() - a[0].unwrap(), 120);
    }
}
