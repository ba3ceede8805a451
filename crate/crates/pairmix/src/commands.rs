//! The five command verbs. Each takes already-parsed arguments and returns
//! a short summary for the terminal.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use pairmix_core::forecast::{trip_time_distribution, FleetState, PredictiveDistribution, QUANTILE_LEVELS};
use pairmix_core::inference::gibbs_fit_with_progress;
use pairmix_core::pair::coordinate_label;
use pairmix_core::synth::{generate_dataset, GroundTruth};
use pairmix_core::trajectory::{assign_period, prefix_link_series, sort_by_dispatch, SECONDS_PER_DAY};
use pairmix_core::{RngState, Trajectory};

use crate::artifact::{atomic_write, create_dir, read_posterior, write_posterior, DatasetFile};
use crate::avl::{parse_avl, parse_time, write_avl, write_rejects, AdFlag, AvlEvent, Schema};
use crate::config::{
    parse_horizons, periods_from_kv, periods_to_text, sim_from_kv, FitSettings, ForecastSettings, KeyValues, RouteConfig,
};
use crate::error::{CliError, Context, Result};
use crate::evaluate::{evaluate, rows_tsv, test_cases, EvalRow};
use crate::ingest::{dataset_from, extract_trajectories, ingest_events};
use crate::interpret::interpret;

/// Options shared by every verb.
#[derive(Debug, Clone, Default)]
pub struct Global {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub verbose: bool,
}

impl Global {
    fn settings(&self) -> Result<KeyValues> {
        match &self.config {
            Some(p) => KeyValues::load(p),
            None => Ok(KeyValues::default()),
        }
    }

    /// The requested seed, or one derived from the clock.
    fn seed(&self) -> (u64, &'static str) {
        match self.seed {
            Some(s) => (s, "cli"),
            None => {
                let nanos = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_nanos() as u64);
                (nanos ^ u64::from(std::process::id()).rotate_left(32), "auto")
            }
        }
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose {
            eprintln!("{}", msg());
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

fn load_avl(path: &Path) -> Result<crate::avl::ParsedAvl> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_avl(f, &Schema::default())
}

pub fn cmd_ingest(g: &Global, avl: &Path, route: &Path, periods: &Path, out: &Path) -> Result<String> {
    let mut rkv = KeyValues::load(route)?;
    let route = RouteConfig::from_kv(&mut rkv)?;
    rkv.finish()?;
    let mut pkv = KeyValues::load(periods)?;
    let periods = periods_from_kv(&mut pkv)?;
    pkv.finish()?;
    g.settings()?.finish()?;
    let parsed = load_avl(avl)?;
    let got = ingest_events(&parsed.events, parsed.rejects.len(), &route, &periods)?;
    create_dir(out)?;
    let ds = DatasetFile { route, periods, trajectories: got.trajectories };
    write_text(&out.join("dataset.tsv"), &ds.to_text())?;
    let mut report = Vec::new();
    got.report.write(&mut report).expect("writing to memory");
    atomic_write(&out.join("report.tsv"), &report)?;
    let mut rejects = Vec::new();
    write_rejects(&mut rejects, &parsed.rejects).expect("writing to memory");
    atomic_write(&out.join("rejects.tsv"), &rejects)?;
    let mut pairs = String::from("pair_id\tperiod\trows\tstatus\n");
    for p in &got.build.dataset.pairs {
        let status = if got.build.overtaking.contains(&p.pair_id) { "overtaking" } else { "ok" };
        let _ = writeln!(pairs, "{}\t{}\t{}\t{status}", p.pair_id, p.period, p.rows());
    }
    for s in &got.build.skipped {
        let _ = writeln!(pairs, "{}\t\t\tskipped: {}", s.pair_id, s.reason);
    }
    for d in &got.extraction.duplicates {
        g.log(|| format!("duplicate arrival for trip {} at stop {} ignored", d.trip_id, d.stop_id));
    }
    write_text(&out.join("pairs.tsv"), &pairs)?;
    Ok(format!(
        "ingested {} trips, {} pairs ({} skipped), {} rejected rows",
        got.report.trips, got.report.pairs, got.report.skipped_pairs, got.report.rejects
    ))
}

pub fn cmd_fit(g: &Global, dataset: &Path, out: &Path) -> Result<String> {
    let mut kv = g.settings()?;
    let settings = FitSettings::from_kv(&mut kv)?;
    kv.finish()?;
    let ds = DatasetFile::load(dataset)?;
    let (seed, source) = g.seed();
    let cfg = settings.fit_config(ds.route.route.n_links(), seed)?;
    let build = dataset_from(&ds.route.route, &ds.periods, &ds.trajectories)?;
    let total = cfg.d1 + cfg.d2;
    let step = (total / 10).max(1);
    let mut progress = |i: usize, _: usize| {
        if i % step == 0 {
            g.log(|| format!("iteration {i}/{total}"));
        }
    };
    let post = gibbs_fit_with_progress(&build.dataset, &cfg, RngState::new(seed), &mut progress)
        .context(|| format!("fitting {}", dataset.display()))?;
    let meta = write_posterior(out, &post, &ds.route.direction, source, build.dataset.pairs.len())?;
    let it = interpret(&post);
    write_text(&out.join("weights.tsv"), &it.weights_tsv())?;
    write_text(&out.join("means.tsv"), &it.means_tsv())?;
    write_text(&out.join("correlations.tsv"), &it.correlations_tsv())?;
    Ok(format!(
        "fitted model {} with K={} on {} pairs; {} draws stored (seed {seed}, config {})",
        cfg.variant,
        cfg.k,
        build.dataset.pairs.len(),
        cfg.d2,
        &meta.config_hash[..12]
    ))
}

fn forecast_rows(out: &mut String, bus: &Trajectory, pred: &PredictiveDistribution, period: usize) {
    for (i, label) in pred.labels().iter().enumerate() {
        let s = &pred.summary[i];
        let _ = write!(out, "{}\t{}\t{}\t{period}\t{label}\t{}\t{}", bus.trip_id, bus.vehicle_id, pred.pair_id, s.mean, s.sd);
        for q in s.quantiles {
            let _ = write!(out, "\t{q}");
        }
        let _ = writeln!(out, "\t{}", s.negative_fraction);
    }
}

fn forecast_header() -> String {
    let mut h = String::from("trip_id\tvehicle_id\tpair_id\tperiod\ttarget\tmean\tsd");
    for p in QUANTILE_LEVELS {
        let _ = write!(h, "\tq{:02}", (p * 100.0).round() as u32);
    }
    h.push_str("\tnegative_fraction\n");
    h
}

/// Forecasts every bus still on the route at `clock` from the arrivals
/// reported up to then.
pub fn cmd_forecast(g: &Global, posterior: &Path, observations: &Path, clock: &str, out: &Path) -> Result<String> {
    let mut kv = g.settings()?;
    let settings = ForecastSettings::from_kv(&mut kv)?;
    kv.finish()?;
    let clock = parse_time(clock).ok_or_else(|| CliError::config(format!("bad clock time {clock:?}")))?;
    let art = read_posterior(posterior)?;
    let post = &art.posterior;
    let route = RouteConfig { route: post.route.clone(), direction: art.direction.clone() };
    let parsed = load_avl(observations)?;
    let events: Vec<AvlEvent> = parsed.events.into_iter().filter(|e| e.ad_time <= clock).collect();
    let mut trajs = extract_trajectories(&events, &route)?.trajectories;
    sort_by_dispatch(&mut trajs);
    let (seed, source) = g.seed();
    let n = post.route.n_links();
    let mut fleet = FleetState::new(n, settings.options, RngState::new(seed));
    let mut notes = String::from("trip_id\tnote\n");
    let mut tracked: Vec<(usize, Trajectory)> = Vec::new();
    let mut previous: Option<(i64, String)> = None;
    for t in &trajs {
        let day = t.dispatch_time().expect("sorted trips have arrivals").div_euclid(SECONDS_PER_DAY);
        let Ok(period) = assign_period(t.dispatch_time().expect("dispatch"), &post.period_config) else {
            let _ = writeln!(notes, "{}\tdispatched before the service window; not forecast", t.trip_id);
            continue;
        };
        let leader = previous.as_ref().filter(|(d, _)| *d == day).map(|(_, id)| id.as_str());
        fleet.add_bus(&t.trip_id, leader, period).context(|| format!("tracking {}", t.trip_id))?;
        for (stop, a) in t.arrivals().iter().enumerate() {
            if let Some(a) = a {
                fleet.record(&t.trip_id, stop, *a).context(|| format!("tracking {}", t.trip_id))?;
            }
        }
        previous = Some((day, t.trip_id.clone()));
        tracked.push((period, t.clone()));
    }
    fleet.refresh_all(post).context(|| "forecasting".into())?;
    let mut table = format!("# clock = {}\n# seed = {seed} ({source})\n", crate::avl::format_time(clock));
    table.push_str(&forecast_header());
    let mut samples = String::from("trip_id\ttarget\tdraw\tseconds\n");
    let mut forecast_count = 0;
    for (period, t) in &tracked {
        let bus = fleet.bus(&t.trip_id).expect("tracked");
        if bus.finished() {
            let _ = writeln!(notes, "{}\ttrip complete; excluded", t.trip_id);
            continue;
        }
        let Some(pred) = &bus.forecast else { continue };
        forecast_count += 1;
        forecast_rows(&mut table, t, pred, *period);
        let series = prefix_link_series(t);
        let j1 = series.progress() + 1;
        if j1 <= n {
            let trip = trip_time_distribution(pred, j1, n + 1, &series).context(|| pred.pair_id.clone())?;
            forecast_rows(&mut table, t, &trip, *period);
        }
        if settings.write_samples {
            for (i, label) in pred.labels().iter().enumerate() {
                for (rho, v) in pred.target_samples(i).iter().enumerate() {
                    let _ = writeln!(samples, "{}\t{label}\t{rho}\t{v}", t.trip_id);
                }
            }
        }
    }
    create_dir(out)?;
    write_text(&out.join("forecast.tsv"), &table)?;
    write_text(&out.join("notes.tsv"), &notes)?;
    if settings.write_samples {
        write_text(&out.join("samples.tsv"), &samples)?;
    }
    Ok(format!("forecast {forecast_count} buses at {}", crate::avl::format_time(clock)))
}

pub fn cmd_evaluate(g: &Global, posteriors: &[PathBuf], test: &Path, horizons: Option<&str>, out: &Path) -> Result<String> {
    let mut kv = g.settings()?;
    let settings = ForecastSettings::from_kv(&mut kv)?;
    let from_config = kv.take("horizons");
    kv.finish()?;
    let horizons = parse_horizons(horizons.or(from_config.as_deref()).unwrap_or("25%,50%,75%"))?;
    let ds = DatasetFile::load(test)?;
    let cases = test_cases(&ds.trajectories, &ds.periods)?;
    let (seed, _) = g.seed();
    let mut rows: Vec<EvalRow> = Vec::new();
    for p in posteriors {
        let art = read_posterior(p)?;
        if art.posterior.route != ds.route.route {
            return Err(CliError::config(format!("{} was fitted on a different route", p.display())));
        }
        g.log(|| format!("evaluating {} on {} pairs", p.display(), cases.len()));
        rows.extend(evaluate(&art.posterior, &cases, &horizons, &settings.options, RngState::new(seed))?);
    }
    rows.sort_by_key(|r| r.level != "link");
    write_text(out, &rows_tsv(&rows))?;
    Ok(format!("scored {} test pairs with {} posterior(s)", cases.len(), posteriors.len()))
}

fn truth_tsv(n: usize, truth: &[pairmix_core::synth::TruthRecord]) -> String {
    let mut s = String::from("pair_id\tperiod\tcomponent");
    for c in 0..3 * n {
        s.push('\t');
        s.push_str(&coordinate_label(n, c));
    }
    s.push('\n');
    for t in truth {
        let _ = write!(s, "{}\t{}\t{}", t.pair_id, t.period, t.component + 1);
        for v in &t.x {
            let _ = write!(s, "\t{v}");
        }
        s.push('\n');
    }
    s
}

/// AVL rows for trajectories: an arrival and a departure per reported stop,
/// in time order.
pub fn trajectories_to_events(route: &RouteConfig, trajs: &[Trajectory]) -> Vec<AvlEvent> {
    let mut events = Vec::new();
    for t in trajs {
        for (j, a) in t.arrivals().iter().enumerate() {
            let Some(a) = *a else { continue };
            let stop = &route.route.stop_names()[j];
            for flag in [AdFlag::Arrival, AdFlag::Departure] {
                events.push(AvlEvent {
                    record_id: String::new(),
                    vehicle_id: t.vehicle_id.clone(),
                    trip_id: t.trip_id.clone(),
                    route_id: route.route.route_id().to_string(),
                    route_name: String::new(),
                    direction_id: route.direction.clone(),
                    stop_id: stop.clone(),
                    stop_name: stop.clone(),
                    ad_flag: flag,
                    ad_time: a,
                });
            }
        }
    }
    events.sort_by_key(|e| e.ad_time);
    for (i, e) in events.iter_mut().enumerate() {
        e.record_id = (i + 1).to_string();
    }
    events
}

pub fn cmd_simulate(g: &Global, out: &Path) -> Result<String> {
    let mut kv = g.settings()?;
    let mut spec = sim_from_kv(&mut kv)?;
    kv.finish()?;
    let (seed, _) = g.seed();
    spec.seed = seed;
    let gt = GroundTruth::structured(&spec).map_err(|e| CliError::config(e.to_string()))?;
    let data = generate_dataset(&gt).context(|| "simulating".into())?;
    let route = RouteConfig { route: gt.route.clone(), direction: "0".into() };
    let events = trajectories_to_events(&route, &data.trajectories);
    let mut avl = Vec::new();
    write_avl(&mut avl, &events).map_err(|e| CliError::io(&out.join("avl.csv"), e.into()))?;
    create_dir(out)?;
    atomic_write(&out.join("avl.csv"), &avl)?;
    write_text(&out.join("truth.tsv"), &truth_tsv(gt.route.n_links(), &data.truth))?;
    write_text(&out.join("route.conf"), &route.to_text())?;
    write_text(&out.join("periods.conf"), &periods_to_text(&gt.period_config))?;
    Ok(format!("simulated {} trips and {} pairs (seed {seed})", data.trajectories.len(), data.truth.len()))
}
