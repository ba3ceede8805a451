//! On-disk formats: dataset tables, posterior directories and binary
//! matrices. Every file is written to a temporary name and renamed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use pairmix_core::inference::{FitConfig, MixtureParams, ModelVariant, PosteriorSamples, Standardizer};
use pairmix_core::stats::{GaussianComponent, NiwParams};
use pairmix_core::{PeriodConfig, Trajectory};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{periods_from_kv, periods_to_text, KeyValues, RouteConfig};
use crate::error::{CliError, Context, Result};

pub const MATRIX_MAGIC: [u8; 8] = *b"PMXF64\0\x01";
pub const POSTERIOR_FORMAT: &str = "pairmix-posterior/1";

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| CliError::config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Row-major matrix behind a 16-byte header: magic, `u32` rows, `u32` cols,
/// all little-endian.
pub fn encode_matrix(rows: usize, cols: usize, data: &[f64]) -> Vec<u8> {
    assert_eq!(rows * cols, data.len());
    let mut out = Vec::with_capacity(16 + 8 * data.len());
    out.extend_from_slice(&MATRIX_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], what: &str) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |m: &str| CliError::Schema(format!("{what}: {m}"));
    if bytes.len() < 16 || bytes[..8] != MATRIX_MAGIC {
        return Err(bad("not a matrix file"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(bad("length does not match header"));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((rows, cols, data))
}

fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_matrix(&bytes, &path.display().to_string())
}

pub fn pack_lower(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unpack_lower(d: usize, packed: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut it = packed.iter();
    for i in 0..d {
        for j in 0..=i {
            let v = *it.next().expect("packed length checked by caller");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Trajectories with the route and period layout in a comment header.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub route: RouteConfig,
    pub periods: PeriodConfig,
    pub trajectories: Vec<Trajectory>,
}

impl DatasetFile {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# pairmix dataset\n");
        for line in self.route.to_text().lines().chain(periods_to_text(&self.periods).lines()) {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s.push_str("vehicle_id\ttrip_id");
        for stop in self.route.route.stop_names() {
            s.push('\t');
            s.push_str(stop);
        }
        s.push('\n');
        for t in &self.trajectories {
            s.push_str(&t.vehicle_id);
            s.push('\t');
            s.push_str(&t.trip_id);
            for a in t.arrivals() {
                s.push('\t');
                if let Some(a) = a {
                    s.push_str(&a.to_string());
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| CliError::Schema(format!("{source}:{line}: {m}"));
        let mut lines = text.lines().enumerate().peekable();
        if lines.next().map(|(_, l)| l) != Some("# pairmix dataset") {
            return Err(bad(1, "not a dataset file"));
        }
        let mut header = String::new();
        while let Some((_, l)) = lines.next_if(|(_, l)| l.starts_with('#')) {
            header.push_str(l.trim_start_matches('#'));
            header.push('\n');
        }
        let mut kv = KeyValues::parse(&header, source)?;
        let route = RouteConfig::from_kv(&mut kv)?;
        let periods = periods_from_kv(&mut kv)?;
        kv.finish()?;
        let slots = route.route.n_links() + 1;
        match lines.next() {
            Some((_, cols)) if cols.split('\t').count() == slots + 2 => {}
            Some((i, _)) => return Err(bad(i + 1, "column header does not match the route")),
            None => return Err(bad(1, "missing column header")),
        }
        let mut trajectories = Vec::new();
        for (i, l) in lines {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != slots + 2 {
                return Err(bad(i + 1, "wrong number of fields"));
            }
            let arrivals = f[2..]
                .iter()
                .map(|v| if v.is_empty() { Ok(None) } else { v.parse().map(Some) })
                .collect::<std::result::Result<Vec<Option<i64>>, _>>()
                .map_err(|_| bad(i + 1, "bad timestamp"))?;
            let t = Trajectory::new(f[0], f[1], arrivals).map_err(|e| bad(i + 1, &e.to_string()))?;
            trajectories.push(t);
        }
        Ok(DatasetFile { route, periods, trajectories })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwMeta {
    pub mu0: Vec<f64>,
    pub lambda0: f64,
    /// Row-major.
    pub psi0: Vec<f64>,
    pub nu0: f64,
}

/// Everything that determines a fit, hashed into `config_hash`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub route_id: String,
    pub direction: String,
    pub stops: Vec<String>,
    pub day_start: u32,
    pub period_minutes: u32,
    pub periods: usize,
    pub variant: String,
    pub k: usize,
    pub d1: usize,
    pub d2: usize,
    pub seed: u64,
    pub alpha: Vec<f64>,
    pub niw: NiwMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerMeta {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMeta {
    pub format: String,
    pub config: FitMeta,
    pub config_hash: String,
    /// `cli` when `--seed` was given, `auto` otherwise.
    pub seed_source: String,
    pub dim: usize,
    pub standardizer: StandardizerMeta,
    pub dataset_pairs: usize,
    pub files: Vec<String>,
}

pub fn config_hash(cfg: &FitMeta) -> String {
    let json = serde_json::to_vec(cfg).expect("plain data serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

fn fit_meta(post: &PosteriorSamples, direction: &str) -> FitMeta {
    let c = &post.fit_config;
    FitMeta {
        route_id: post.route.route_id().to_string(),
        direction: direction.to_string(),
        stops: post.route.stop_names().to_vec(),
        day_start: post.period_config.day_start,
        period_minutes: post.period_config.period_minutes,
        periods: post.period_config.count,
        variant: c.variant.to_string(),
        k: c.k,
        d1: c.d1,
        d2: c.d2,
        seed: c.seed,
        alpha: c.alpha.clone(),
        niw: NiwMeta {
            mu0: c.niw.mu0.iter().copied().collect(),
            lambda0: c.niw.lambda0,
            psi0: c.niw.psi0.transpose().iter().copied().collect(),
            nu0: c.niw.nu0,
        },
    }
}

const PIS_FILE: &str = "pis.f64";
const MUS_FILE: &str = "mus.f64";
const SIGMAS_FILE: &str = "sigmas.f64";

/// A fitted posterior as loaded from disk.
#[derive(Debug, Clone)]
pub struct PosteriorArtifact {
    pub posterior: PosteriorSamples,
    pub meta: PosteriorMeta,
    pub direction: String,
}

pub fn write_posterior(
    dir: &Path,
    post: &PosteriorSamples,
    direction: &str,
    seed_source: &str,
    dataset_pairs: usize,
) -> Result<PosteriorMeta> {
    create_dir(dir)?;
    let config = fit_meta(post, direction);
    let (k, t, dim) = (post.k(), post.periods(), post.coords().len());
    let d2 = post.draws.len();
    let mut pis = Vec::with_capacity(d2 * t * k);
    let mut mus = Vec::with_capacity(d2 * k * dim);
    let mut sigmas = Vec::with_capacity(d2 * k * dim * (dim + 1) / 2);
    for d in &post.draws {
        pis.extend(d.pis.iter().flatten());
        for c in &d.components {
            mus.extend(c.mu().iter());
            sigmas.extend(pack_lower(c.sigma()));
        }
    }
    atomic_write(&dir.join(PIS_FILE), &encode_matrix(d2, t * k, &pis))?;
    atomic_write(&dir.join(MUS_FILE), &encode_matrix(d2 * k, dim, &mus))?;
    atomic_write(&dir.join(SIGMAS_FILE), &encode_matrix(d2 * k, dim * (dim + 1) / 2, &sigmas))?;
    let meta = PosteriorMeta {
        format: POSTERIOR_FORMAT.into(),
        config_hash: config_hash(&config),
        config,
        seed_source: seed_source.into(),
        dim,
        standardizer: StandardizerMeta {
            means: post.standardizer.means().iter().copied().collect(),
            sds: post.standardizer.sds().iter().copied().collect(),
        },
        dataset_pairs,
        files: vec![PIS_FILE.into(), MUS_FILE.into(), SIGMAS_FILE.into()],
    };
    let mut json = serde_json::to_vec_pretty(&meta).expect("plain data serializes");
    json.push(b'\n');
    atomic_write(&dir.join("meta.json"), &json)?;
    Ok(meta)
}

pub fn read_posterior(dir: &Path) -> Result<PosteriorArtifact> {
    let meta_path: PathBuf = dir.join("meta.json");
    let meta: PosteriorMeta = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|e| CliError::Schema(format!("{}: {e}", meta_path.display())))?;
    let bad = |m: String| CliError::Schema(format!("{}: {m}", dir.display()));
    if meta.format != POSTERIOR_FORMAT {
        return Err(bad(format!("unsupported format {:?}", meta.format)));
    }
    if config_hash(&meta.config) != meta.config_hash {
        return Err(bad("config hash does not match metadata".into()));
    }
    let c = &meta.config;
    let variant: ModelVariant = c.variant.parse().map_err(|e: pairmix_core::Error| bad(e.to_string()))?;
    let route = pairmix_core::RouteSpec::new(c.route_id.clone(), c.stops.clone()).map_err(|e| bad(e.to_string()))?;
    let period_config = PeriodConfig::new(c.day_start, c.period_minutes, c.periods).map_err(|e| bad(e.to_string()))?;
    let dim = variant.dim(route.n_links());
    if dim != meta.dim || c.niw.mu0.len() != dim || c.niw.psi0.len() != dim * dim {
        return Err(bad("dimension does not match variant".into()));
    }
    let (k, t) = (c.k, c.periods);
    let (pr, pc, pis) = read_matrix(&dir.join(PIS_FILE))?;
    let (mr, mc, mus) = read_matrix(&dir.join(MUS_FILE))?;
    let (sr, sc, sigmas) = read_matrix(&dir.join(SIGMAS_FILE))?;
    let d2 = pr;
    if d2 != c.d2 || pc != t * k || mr != d2 * k || mc != dim || sr != d2 * k || sc != dim * (dim + 1) / 2 {
        return Err(bad("matrix shapes do not match metadata".into()));
    }
    let mut draws = Vec::with_capacity(d2);
    for rho in 0..d2 {
        let row = &pis[rho * t * k..(rho + 1) * t * k];
        let pis = row.chunks(k).map(<[f64]>::to_vec).collect();
        let components = (0..k)
            .map(|j| {
                let i = rho * k + j;
                let mu = DVector::from_column_slice(&mus[i * mc..(i + 1) * mc]);
                let sigma = unpack_lower(dim, &sigmas[i * sc..(i + 1) * sc]);
                GaussianComponent::new(mu, sigma)
            })
            .collect::<pairmix_core::Result<Vec<_>>>()
            .context(|| format!("loading draw {rho}"))?;
        draws.push(MixtureParams { pis, components });
    }
    let standardizer = Standardizer::new(
        DVector::from_vec(meta.standardizer.means.clone()),
        DVector::from_vec(meta.standardizer.sds.clone()),
    )
    .map_err(|e| bad(e.to_string()))?;
    let niw = NiwParams {
        mu0: DVector::from_vec(c.niw.mu0.clone()),
        lambda0: c.niw.lambda0,
        psi0: DMatrix::from_row_slice(dim, dim, &c.niw.psi0),
        nu0: c.niw.nu0,
    };
    let fit_config = FitConfig { k, alpha: c.alpha.clone(), niw, d1: c.d1, d2: c.d2, seed: c.seed, variant };
    let direction = c.direction.clone();
    let posterior = PosteriorSamples { draws, standardizer, fit_config, route, period_config };
    Ok(PosteriorArtifact { posterior, meta, direction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pairmix_core::RouteSpec;

    #[test]
    fn matrix_header_layout() {
        let b = encode_matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, -0.5]);
        assert_eq!(b.len(), 16 + 48);
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..16], &3u32.to_le_bytes());
        assert_eq!(&b[16..24], &1.0f64.to_le_bytes());
        let (r, c, d) = decode_matrix(&b, "m").unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(d[5], -0.5);
        assert!(decode_matrix(&b[..40], "m").is_err());
    }

    #[test]
    fn packed_lower_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 2.0, 1.0, 5.0, 3.0, 2.0, 3.0, 6.0]);
        let p = pack_lower(&m);
        assert_eq!(p, vec![4.0, 1.0, 5.0, 2.0, 3.0, 6.0]);
        assert_eq!(unpack_lower(3, &p), m);
    }

    #[test]
    fn dataset_text_round_trip() {
        let route = RouteConfig { route: RouteSpec::with_links("R", 2).unwrap(), direction: "1".into() };
        let d = DatasetFile {
            route,
            periods: PeriodConfig::new(21_600, 30, 4).unwrap(),
            trajectories: vec![
                Trajectory::new("V1", "T1", vec![Some(100), None, Some(400)]).unwrap(),
                Trajectory::new("V2", "T2", vec![None, Some(700), Some(900)]).unwrap(),
            ],
        };
        let text = d.to_text();
        assert_eq!(DatasetFile::parse(&text, "d").unwrap(), d);
        assert!(DatasetFile::parse(&text.replace("\t400", "\tx"), "d").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
