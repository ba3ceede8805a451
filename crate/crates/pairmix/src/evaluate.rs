//! Held-out scoring of fitted posteriors. Each test pair is replayed up to
//! the moment the following bus reaches the horizon stop; the leading bus
//! shows whatever it had reported by then.

use std::fmt::Write as _;

use pairmix_core::forecast::{
    build_forecast_constraints, forecast_pair, trip_time_distribution, ForecastOptions, ForecastQuery, LeadingForecast,
    PredictiveDistribution, Target,
};
use pairmix_core::inference::{ModelVariant, PosteriorSamples};
use pairmix_core::metrics::{crps_from_samples, log_score, mape, rmse};
use pairmix_core::trajectory::{assign_period, headways, pair_adjacent, prefix_link_series, sort_by_dispatch};
use pairmix_core::{PeriodConfig, RngState, Trajectory};
use rayon::prelude::*;

use crate::config::Horizon;
use crate::error::{CliError, Context, Result};

/// A fully observed adjacent pair from the test data.
#[derive(Debug, Clone)]
pub struct TestCase {
    pub pair_id: String,
    pub period: usize,
    pub leading_period: usize,
    pub leading: Trajectory,
    pub following: Trajectory,
}

pub fn test_cases(trajs: &[Trajectory], periods: &PeriodConfig) -> Result<Vec<TestCase>> {
    let mut sorted = trajs.to_vec();
    sort_by_dispatch(&mut sorted);
    let adj = pair_adjacent(&sorted).context(|| "pairing test trips".into())?;
    let complete = |t: &Trajectory| t.observed_count() == t.arrivals().len();
    let mut out = Vec::new();
    for a in adj {
        let (l, f) = (&sorted[a.leading], &sorted[a.following]);
        if !complete(l) || !complete(f) {
            continue;
        }
        let Ok(period) = assign_period(f.dispatch_time().expect("complete"), periods) else { continue };
        let leading_period = assign_period(l.dispatch_time().expect("complete"), periods).unwrap_or(1);
        out.push(TestCase {
            pair_id: pairmix_core::trajectory::pair_id(l, f),
            period,
            leading_period,
            leading: l.clone(),
            following: f.clone(),
        });
    }
    Ok(out)
}

fn truncate(t: &Trajectory, keep: impl Fn(usize, i64) -> bool) -> Trajectory {
    let arr = t.arrivals().iter().enumerate().map(|(j, a)| a.filter(|&v| keep(j, v))).collect();
    Trajectory::new(t.vehicle_id.clone(), t.trip_id.clone(), arr).expect("subset of an increasing sequence")
}

fn link_truths(t: &Trajectory) -> Vec<f64> {
    t.arrivals().windows(2).map(|w| (w[1].unwrap() - w[0].unwrap()) as f64).collect()
}

/// Per-target scores for one pair at one horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseScores {
    pub truths: Vec<f64>,
    pub means: Vec<f64>,
    pub crps: Vec<f64>,
    pub log_density: Vec<f64>,
}

impl CaseScores {
    fn push(&mut self, pred: &PredictiveDistribution, idx: usize, y: f64) -> Result<()> {
        let s = pred.target_samples(idx);
        self.truths.push(y);
        self.means.push(pred.summary[idx].mean);
        self.crps.push(crps_from_samples(&s, y).context(|| format!("scoring {}", pred.pair_id))?);
        self.log_density.push(log_score(&pred.marginal(idx), y).log_density);
        Ok(())
    }

    fn extend(&mut self, o: CaseScores) {
        self.truths.extend(o.truths);
        self.means.extend(o.means);
        self.crps.extend(o.crps);
        self.log_density.extend(o.log_density);
    }
}

/// Forecast of one pair with `q` following links observed. Returns link
/// and trip scores.
pub fn score_case(
    post: &PosteriorSamples,
    case: &TestCase,
    q: usize,
    options: &ForecastOptions,
    rng: RngState,
) -> Result<(CaseScores, CaseScores)> {
    let n = post.route.n_links();
    if q >= n {
        return Ok(Default::default());
    }
    let clock = case.following.arrivals()[q].expect("complete");
    let follow = truncate(&case.following, |j, _| j <= q);
    let lead = truncate(&case.leading, |_, t| t <= clock);
    let lead_series = prefix_link_series(&lead);
    let variant = post.fit_config.variant;
    let leading_forecast = if variant != ModelVariant::A && lead_series.progress() < n {
        let q0 = ForecastQuery::first_bus(case.leading.trip_id.clone(), case.leading_period, lead_series.clone());
        let sys = build_forecast_constraints(&q0, variant, options).context(|| format!("leading bus of {}", case.pair_id))?;
        let pred = forecast_pair(post, &sys, rng.substream(1)).context(|| format!("leading bus of {}", case.pair_id))?;
        let links = pred.targets.iter().filter_map(|t| if let Target::Link(j) = t { Some(*j) } else { None }).collect();
        Some(LeadingForecast { links, samples: pred.samples })
    } else {
        None
    };
    let following = prefix_link_series(&follow);
    let query = ForecastQuery {
        pair_id: case.pair_id.clone(),
        period: case.period,
        following: following.clone(),
        leading: Some(lead_series),
        headways: headways(&lead, &follow).context(|| case.pair_id.clone())?,
        leading_forecast,
    };
    let sys = build_forecast_constraints(&query, variant, options).context(|| case.pair_id.clone())?;
    let pred = forecast_pair(post, &sys, rng.substream(2)).context(|| case.pair_id.clone())?;
    let truths = link_truths(&case.following);
    let mut links = CaseScores::default();
    for (idx, t) in pred.targets.iter().enumerate() {
        if let Target::Link(j) = t {
            links.push(&pred, idx, truths[*j])?;
        }
    }
    let trip = trip_time_distribution(&pred, q + 1, n + 1, &following).context(|| case.pair_id.clone())?;
    let mut trips = CaseScores::default();
    trips.push(&trip, 0, truths[q..].iter().sum())?;
    Ok((links, trips))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub level: &'static str,
    pub model: ModelVariant,
    pub k: usize,
    pub horizon: String,
    pub observed_links: usize,
    pub targets: usize,
    pub rmse: f64,
    pub mape: f64,
    pub crps: f64,
    pub avg_log_density: f64,
}

fn aggregate(level: &'static str, post: &PosteriorSamples, h: &Horizon, q: usize, s: &CaseScores) -> Result<EvalRow> {
    let (rmse, mape, crps, ld) = if s.truths.is_empty() {
        (0.0, 0.0, 0.0, f64::NAN)
    } else {
        let m = s.truths.len() as f64;
        (
            rmse(&s.truths, &s.means).context(|| "rmse".into())?,
            mape(&s.truths, &s.means).context(|| "mape".into())?,
            s.crps.iter().sum::<f64>() / m,
            s.log_density.iter().sum::<f64>() / m,
        )
    };
    Ok(EvalRow {
        level,
        model: post.fit_config.variant,
        k: post.k(),
        horizon: h.to_string(),
        observed_links: q,
        targets: s.truths.len(),
        rmse,
        mape,
        crps,
        avg_log_density: ld,
    })
}

/// Scores one posterior at every horizon. Rows come out link level first.
pub fn evaluate(
    post: &PosteriorSamples,
    cases: &[TestCase],
    horizons: &[Horizon],
    options: &ForecastOptions,
    rng: RngState,
) -> Result<Vec<EvalRow>> {
    if cases.is_empty() {
        return Err(CliError::config("test set has no fully observed adjacent pairs"));
    }
    let n = post.route.n_links();
    let mut link_rows = Vec::new();
    let mut trip_rows = Vec::new();
    for (hi, h) in horizons.iter().enumerate() {
        let q = h.links(n)?;
        let scored: Vec<(CaseScores, CaseScores)> = cases
            .par_iter()
            .enumerate()
            .map(|(ci, c)| score_case(post, c, q, options, rng.substream2(hi as u64, ci as u64)))
            .collect::<Result<_>>()?;
        let (mut links, mut trips) = (CaseScores::default(), CaseScores::default());
        for (l, t) in scored {
            links.extend(l);
            trips.extend(t);
        }
        link_rows.push(aggregate("link", post, h, q, &links)?);
        trip_rows.push(aggregate("trip", post, h, q, &trips)?);
    }
    link_rows.extend(trip_rows);
    Ok(link_rows)
}

pub const EVAL_HEADER: &str = "level\tmodel\tK\thorizon\tobserved_links\ttargets\trmse\tmape\tcrps\tavg_log_density\n";

pub fn rows_tsv(rows: &[EvalRow]) -> String {
    let mut s = String::from(EVAL_HEADER);
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.level, r.model, r.k, r.horizon, r.observed_links, r.targets, r.rmse, r.mape, r.crps, r.avg_log_density
        );
    }
    s
}
