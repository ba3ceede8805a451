//! Flat `key = value` configuration files. Every loader consumes the keys it
//! knows and the file is rejected if anything is left over.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use pairmix_core::forecast::{ForecastOptions, LeadingMode};
use pairmix_core::inference::{FitConfig, ModelVariant};
use pairmix_core::stats::NiwParams;
use pairmix_core::synth::{Assignment, StructuredSpec};
use pairmix_core::{PeriodConfig, RouteSpec};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::config(format!("{source}:{}: expected key = value", i + 1)));
            };
            let key = k.trim().to_string();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                return Err(CliError::config(format!("{source}:{}: duplicate key {key}", i + 1)));
            }
        }
        Ok(KeyValues { source: source.to_string(), entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub fn take_parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some((line, v)) = self.entries.remove(key) else {
            return Ok(None);
        };
        v.parse()
            .map(Some)
            .map_err(|e| CliError::config(format!("{}:{line}: bad value for {key}: {e}", self.source)))
    }

    fn or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take_parsed(key)?.unwrap_or(default))
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| CliError::config(format!("{}: missing required key {key}", self.source)))
    }

    /// Fails on any key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(CliError::config(format!("{}:{line}: unknown key {k}", self.source))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteConfig {
    pub route: RouteSpec,
    pub direction: String,
}

impl RouteConfig {
    /// Keys: `route_id`, `direction` (default 0), `stops` (comma separated ids).
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let route_id = kv.required("route_id")?;
        let direction = kv.take("direction").unwrap_or_else(|| "0".into());
        let stops: Vec<String> = kv.required("stops")?.split(',').map(|s| s.trim().to_string()).collect();
        if stops.iter().any(String::is_empty) {
            return Err(CliError::config("stops contains an empty id"));
        }
        let route = RouteSpec::new(route_id, stops).map_err(|e| CliError::config(e.to_string()))?;
        Ok(RouteConfig { route, direction })
    }

    pub fn to_text(&self) -> String {
        format!(
            "route_id = {}\ndirection = {}\nstops = {}\n",
            self.route.route_id(),
            self.direction,
            self.route.stop_names().join(",")
        )
    }
}

fn parse_clock(s: &str) -> Result<u32> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Option<Vec<u32>> = parts.iter().map(|p| p.parse().ok()).collect();
    match nums.as_deref() {
        Some([h, m]) if *h < 24 && *m < 60 => Ok(h * 3600 + m * 60),
        Some([h, m, s]) if *h < 24 && *m < 60 && *s < 60 => Ok(h * 3600 + m * 60 + s),
        _ => Err(CliError::config(format!("bad time of day {s:?}, expected HH:MM"))),
    }
}

fn format_clock(secs: u32) -> String {
    let (h, m, s) = (secs / 3600, secs / 60 % 60, secs % 60);
    if s == 0 {
        format!("{h:02}:{m:02}")
    } else {
        format!("{h:02}:{m:02}:{s:02}")
    }
}

/// Keys: `day_start` (HH:MM), `period_minutes`, `periods`.
pub fn periods_from_kv(kv: &mut KeyValues) -> Result<PeriodConfig> {
    let start = parse_clock(&kv.required("day_start")?)?;
    let minutes: u32 = kv.take_parsed("period_minutes")?.ok_or_else(|| CliError::config("missing period_minutes"))?;
    let count: usize = kv.take_parsed("periods")?.ok_or_else(|| CliError::config("missing periods"))?;
    PeriodConfig::new(start, minutes, count).map_err(|e| CliError::config(e.to_string()))
}

pub fn periods_to_text(p: &PeriodConfig) -> String {
    format!("day_start = {}\nperiod_minutes = {}\nperiods = {}\n", format_clock(p.day_start), p.period_minutes, p.count)
}

/// Keys for `fit`: `k`, `variant`, `burn_in`, `draws`, `alpha`, `lambda0`, `nu0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub k: usize,
    pub variant: ModelVariant,
    pub burn_in: usize,
    pub draws: usize,
    pub alpha: f64,
    pub lambda0: f64,
    pub nu0: Option<f64>,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { k: 2, variant: ModelVariant::C, burn_in: 9000, draws: 1000, alpha: 0.2, lambda0: 10.0, nu0: None }
    }
}

impl FitSettings {
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let d = FitSettings::default();
        Ok(FitSettings {
            k: kv.or("k", d.k)?,
            variant: kv.or("variant", d.variant)?,
            burn_in: kv.or("burn_in", d.burn_in)?,
            draws: kv.or("draws", d.draws)?,
            alpha: kv.or("alpha", d.alpha)?,
            lambda0: kv.or("lambda0", d.lambda0)?,
            nu0: kv.take_parsed("nu0")?,
        })
    }

    pub fn fit_config(&self, n_links: usize, seed: u64) -> Result<FitConfig> {
        let dim = self.variant.dim(n_links);
        let mut niw = NiwParams::standard(dim);
        niw.lambda0 = self.lambda0;
        if let Some(nu) = self.nu0 {
            niw.nu0 = nu;
        }
        let cfg = FitConfig {
            k: self.k,
            alpha: vec![self.alpha; self.k],
            niw,
            d1: self.burn_in,
            d2: self.draws,
            seed,
            variant: self.variant,
        };
        cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(cfg)
    }
}

/// Keys for `forecast` and `evaluate`: `leading_mode` (per_sample | mean),
/// `allow_missing_leading`, `write_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForecastSettings {
    pub options: ForecastOptions,
    pub write_samples: bool,
}

impl ForecastSettings {
    pub fn from_kv(kv: &mut KeyValues) -> Result<Self> {
        let leading = match kv.take("leading_mode").as_deref() {
            None | Some("per_sample") => LeadingMode::PerSample,
            Some("mean") => LeadingMode::Mean,
            Some(other) => return Err(CliError::config(format!("unknown leading_mode {other:?}"))),
        };
        Ok(ForecastSettings {
            options: ForecastOptions { leading, allow_missing_leading: kv.or("allow_missing_leading", false)? },
            write_samples: kv.or("write_samples", false)?,
        })
    }
}

/// One requested horizon: a link count or a share of the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Links(usize),
    Percent(f64),
}

impl Horizon {
    /// Observed link count on an `n`-link route. `n` itself is allowed and
    /// leaves nothing to forecast.
    pub fn links(&self, n: usize) -> Result<usize> {
        let q = match *self {
            Horizon::Links(q) => q,
            Horizon::Percent(p) => (p / 100.0 * n as f64).round() as usize,
        };
        if q == 0 || q > n {
            return Err(CliError::config(format!("horizon {self} gives {q} observed links on a {n}-link route")));
        }
        Ok(q)
    }
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Horizon::Links(q) => write!(f, "{q}"),
            Horizon::Percent(p) => write!(f, "{p}%"),
        }
    }
}

pub fn parse_horizons(s: &str) -> Result<Vec<Horizon>> {
    s.split(',')
        .map(|h| {
            let h = h.trim();
            let bad = || CliError::config(format!("bad horizon {h:?}"));
            match h.strip_suffix('%') {
                Some(p) => p.parse().ok().filter(|p: &f64| *p > 0.0 && *p < 100.0).map(Horizon::Percent).ok_or_else(bad),
                None => h.parse().map(Horizon::Links).map_err(|_| bad()),
            }
        })
        .collect()
}

/// Keys for `simulate`; see [`StructuredSpec`] for meanings. The seed comes
/// from the command line.
pub fn sim_from_kv(kv: &mut KeyValues) -> Result<StructuredSpec> {
    let d = StructuredSpec::default();
    let assignment = match kv.take("assignment").as_deref() {
        None | Some("categorical") => Assignment::Categorical,
        Some("stratified") => Assignment::Stratified,
        Some(other) => return Err(CliError::config(format!("unknown assignment {other:?}"))),
    };
    Ok(StructuredSpec {
        n_links: kv.or("n_links", d.n_links)?,
        k: kv.or("k", d.k)?,
        periods: kv.or("periods", d.periods)?,
        pairs_per_period: kv.or("pairs_per_period", d.pairs_per_period)?,
        link_mean: kv.or("link_mean", d.link_mean)?,
        link_sd: kv.or("link_sd", d.link_sd)?,
        separation: kv.or("separation", d.separation)?,
        cross_corr: kv.or("cross_corr", d.cross_corr)?,
        within_corr: kv.or("within_corr", d.within_corr)?,
        headway_mean: kv.or("headway_mean", d.headway_mean)?,
        headway_sd: kv.or("headway_sd", d.headway_sd)?,
        missing_rate: kv.or("missing_rate", d.missing_rate)?,
        ragged_rate: kv.or("ragged_rate", d.ragged_rate)?,
        chain_length: kv.or("chain_length", d.chain_length)?,
        assignment,
        seed: d.seed,
    })
}

pub fn sim_to_text(s: &StructuredSpec) -> String {
    let mut out = String::new();
    let assignment = match s.assignment {
        Assignment::Categorical => "categorical",
        Assignment::Stratified => "stratified",
    };
    let _ = write!(
        out,
        "n_links = {}\nk = {}\nperiods = {}\npairs_per_period = {}\nlink_mean = {}\nlink_sd = {}\n\
         separation = {}\ncross_corr = {}\nwithin_corr = {}\nheadway_mean = {}\nheadway_sd = {}\n\
         missing_rate = {}\nragged_rate = {}\nchain_length = {}\nassignment = {assignment}\n",
        s.n_links,
        s.k,
        s.periods,
        s.pairs_per_period,
        s.link_mean,
        s.link_sd,
        s.separation,
        s.cross_corr,
        s.within_corr,
        s.headway_mean,
        s.headway_sd,
        s.missing_rate,
        s.ragged_rate,
        s.chain_length
    );
    out
}
