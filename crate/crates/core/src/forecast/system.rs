use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::inference::{ModelVariant, Standardizer};
use crate::linalg::select_cols;
use crate::pair::{constraint_rows, headway_rows, link_rows, reduce_rows, HeadwaySeries, ReducedRows, LinkSlot, LinkTimeSeries, RawRow, RowKind};

/// Predictive draws for the upcoming links of a leading bus, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadingForecast {
    /// 0-based link indices covered by the columns of `samples`.
    pub links: Vec<usize>,
    /// One row per draw.
    pub samples: DMatrix<f64>,
}

impl LeadingForecast {
    fn column(&self, link: usize) -> Option<usize> {
        self.links.iter().position(|l| *l == link)
    }
}

/// What is known about a bus pair at forecast time.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastQuery {
    pub pair_id: String,
    /// 1-based period of the following bus's dispatch.
    pub period: usize,
    /// Observed prefix of the bus being forecast.
    pub following: LinkTimeSeries,
    /// Observed prefix of its leading bus, absent for the first bus of a day.
    pub leading: Option<LinkTimeSeries>,
    pub headways: HeadwaySeries,
    pub leading_forecast: Option<LeadingForecast>,
}

impl ForecastQuery {
    /// A bus with no leading bus.
    pub fn first_bus(pair_id: impl Into<String>, period: usize, following: LinkTimeSeries) -> Self {
        let n = following.n_links();
        ForecastQuery {
            pair_id: pair_id.into(),
            period,
            following,
            leading: None,
            headways: HeadwaySeries::missing(n),
            leading_forecast: None,
        }
    }

    /// Observed link count of the following bus.
    pub fn q(&self) -> usize {
        self.following.progress()
    }

    /// Observed link count of the leading bus.
    pub fn p(&self) -> usize {
        self.leading.as_ref().map_or(0, |l| l.progress())
    }
}

/// How the leading bus's upcoming links enter the recording vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeadingMode {
    /// Draw ρ of the follower conditions on draw ρ of the leading forecast.
    #[default]
    PerSample,
    /// Every draw conditions on the leading forecast's mean.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ForecastOptions {
    pub leading: LeadingMode,
    /// Drop the leading bus's upcoming links instead of failing when no
    /// leading forecast is supplied.
    pub allow_missing_leading: bool,
}

/// Raw-scale forecast system with pseudo-observation slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSystem {
    pub pair_id: String,
    pub period: usize,
    pub n_links: usize,
    /// Augmented coordinates of the model variant.
    pub coords: Vec<usize>,
    /// Columns follow `coords`.
    pub g: DMatrix<f64>,
    /// Right-hand side with pseudo rows at their first-draw (or mean) value.
    pub r: DVector<f64>,
    pub kinds: Vec<RowKind>,
    /// `(row, column of the pseudo sample matrix)` for each kept pseudo row.
    pseudo_rows: Vec<(usize, usize)>,
    /// Draws of the pseudo-observed values, one row per draw.
    pseudo_samples: Option<DMatrix<f64>>,
    /// Variant columns that are forecast targets.
    pub target_columns: Vec<usize>,
}

impl ForecastSystem {
    /// Number of distinct pseudo-observation draws.
    pub fn pseudo_draws(&self) -> usize {
        self.pseudo_samples.as_ref().map_or(0, |s| s.nrows())
    }

    /// Raw right-hand side used for draw `rho`.
    pub fn rhs_for_draw(&self, rho: usize) -> DVector<f64> {
        let mut r = self.r.clone();
        if let Some(s) = &self.pseudo_samples {
            let row = rho % s.nrows();
            for &(i, c) in &self.pseudo_rows {
                r[i] = s[(row, c)];
            }
        }
        r
    }

    /// Standardized `(G̃, r̃)` for draw `rho`.
    pub fn standardized(&self, s: &Standardizer, rho: usize) -> (DMatrix<f64>, DVector<f64>) {
        s.transform_system(&self.g, &self.rhs_for_draw(rho), &self.coords)
    }

    /// Augmented coordinates of the targets.
    pub fn target_coords(&self) -> Vec<usize> {
        self.target_columns.iter().map(|&c| self.coords[c]).collect()
    }
}

/// Forecast targets: following-bus links not directly observed.
fn target_links(series: &LinkTimeSeries) -> Vec<usize> {
    (0..series.n_links()).filter(|&j| !matches!(series.entries()[j], LinkSlot::Observed(_))).collect()
}

/// Builds the rows for a forecast. Real observations go first, identities
/// second, and pseudo-observations of the leading bus's upcoming links
/// last. Pseudo rows implied by the others are dropped.
pub fn build_forecast_constraints(
    query: &ForecastQuery,
    variant: ModelVariant,
    options: &ForecastOptions,
) -> Result<ForecastSystem> {
    let n = query.following.n_links();
    if query.q() >= n {
        return Err(Error::NothingToForecast);
    }
    if query.headways.len() != n {
        return Err(Error::LengthMismatch { left: query.headways.len(), right: n });
    }
    let dim = 3 * n;
    let mut rows: Vec<RawRow> = Vec::new();
    link_rows(&query.following, 0, dim, RowKind::FollowingLink, &mut rows);
    let mut pseudo_values: Option<DMatrix<f64>> = None;
    let mut pseudo_links: Vec<usize> = Vec::new();
    if let Some(leading) = query.leading.as_ref().filter(|_| variant != ModelVariant::A) {
        if leading.n_links() != n {
            return Err(Error::LengthMismatch { left: leading.n_links(), right: n });
        }
        link_rows(leading, n, dim, RowKind::LeadingLink, &mut rows);
        if variant == ModelVariant::C {
            headway_rows(&query.headways, n, &mut rows);
            constraint_rows(n, &mut rows);
        }
        let upcoming: Vec<usize> = (leading.progress()..n).collect();
        if !upcoming.is_empty() {
            match &query.leading_forecast {
                Some(lf) => {
                    let mut cols = Vec::new();
                    for &j in &upcoming {
                        match lf.column(j) {
                            Some(c) => cols.push(c),
                            None if options.allow_missing_leading => continue,
                            None => return Err(Error::MissingLeadingForecast),
                        }
                        pseudo_links.push(j);
                    }
                    if lf.samples.nrows() == 0 {
                        return Err(Error::MissingLeadingForecast);
                    }
                    let mut vals = select_cols(&lf.samples, &cols);
                    if options.leading == LeadingMode::Mean {
                        vals = DMatrix::from_fn(1, cols.len(), |_, c| vals.column(c).mean());
                    }
                    pseudo_values = Some(vals);
                }
                None if options.allow_missing_leading => {}
                None => return Err(Error::MissingLeadingForecast),
            }
        }
    } else if variant == ModelVariant::C {
        // Headways without a leading series still carry the identities.
        if query.headways.entries().iter().any(Option::is_some) {
            headway_rows(&query.headways, n, &mut rows);
            constraint_rows(n, &mut rows);
        }
    }
    let first_pseudo = rows.len();
    for (c, &j) in pseudo_links.iter().enumerate() {
        let mut coeffs = vec![0.0; dim];
        coeffs[n + j] = 1.0;
        let v = pseudo_values.as_ref().map_or(0.0, |s| s[(0, c)]);
        rows.push(RawRow { kind: RowKind::Pseudo, coeffs, rhs: v });
    }
    let tags: Vec<Option<usize>> = (0..rows.len()).map(|i| i.checked_sub(first_pseudo)).collect();
    let coords = variant.coords(n);
    let has_rows = !rows.is_empty();
    let reduced = if has_rows {
        reduce_rows(rows, dim)?
    } else {
        ReducedRows { g: DMatrix::zeros(0, dim), r: DVector::zeros(0), kinds: Vec::new(), kept: Vec::new() }
    };
    let ReducedRows { g: g_full, r, kinds, kept } = reduced;
    let g = select_cols(&g_full, &coords);
    let pseudo_rows: Vec<(usize, usize)> =
        kept.iter().enumerate().filter_map(|(row, orig)| tags[*orig].map(|c| (row, c))).collect();
    let targets = target_links(&query.following);
    Ok(ForecastSystem {
        pair_id: query.pair_id.clone(),
        period: query.period,
        n_links: n,
        coords,
        g,
        r,
        kinds,
        pseudo_rows,
        pseudo_samples: pseudo_values,
        target_columns: targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lead_done() -> LinkTimeSeries {
        LinkTimeSeries::observed("lead", 0, &[100.0, 120.0, 110.0, 130.0]).unwrap()
    }

    fn follow_prefix(q: usize) -> LinkTimeSeries {
        let vals = [110.0, 120.0, 120.0, 140.0];
        let entries = (0..4).map(|j| if j < q { LinkSlot::Observed(vals[j]) } else { LinkSlot::Missing }).collect();
        LinkTimeSeries::new("follow", 300, entries, vec![]).unwrap()
    }

    #[test]
    fn first_bus_conditions_on_own_links() {
        let q = ForecastQuery::first_bus("p", 1, follow_prefix(2));
        let sys = build_forecast_constraints(&q, ModelVariant::C, &ForecastOptions::default()).unwrap();
        assert_eq!(sys.g.nrows(), 2);
        assert!(sys.kinds.iter().all(|k| *k == RowKind::FollowingLink));
        assert_eq!(sys.target_columns, vec![2, 3]);
        assert_eq!(sys.g.ncols(), 12);
    }

    #[test]
    fn finished_trip_has_nothing_to_forecast() {
        let q = ForecastQuery::first_bus("p", 1, follow_prefix(4));
        assert_eq!(
            build_forecast_constraints(&q, ModelVariant::C, &ForecastOptions::default()).unwrap_err(),
            Error::NothingToForecast
        );
    }

    #[test]
    fn finished_leader_with_three_headways() {
        // Following bus at stop 3: two links and headways at stops 1..3.
        let q = ForecastQuery {
            pair_id: "p".into(),
            period: 1,
            following: follow_prefix(2),
            leading: Some(lead_done()),
            headways: HeadwaySeries::new(vec![Some(300.0), Some(310.0), Some(310.0), None]).unwrap(),
            leading_forecast: None,
        };
        let sys = build_forecast_constraints(&q, ModelVariant::C, &ForecastOptions::default()).unwrap();
        let obs = sys.kinds.iter().filter(|k| **k != RowKind::Constraint).count();
        assert_eq!(obs, 2 + 4 + 3);
        // The identities at links 1 and 2 are implied; link 3's is kept.
        assert_eq!(sys.kinds.iter().filter(|k| **k == RowKind::Constraint).count(), 1);
        assert_eq!(crate::linalg::rank(&sys.g), sys.g.nrows());
    }

    #[test]
    fn leader_in_progress_needs_its_forecast() {
        let lead = LinkTimeSeries::new(
            "lead",
            0,
            vec![LinkSlot::Observed(100.0), LinkSlot::Observed(120.0), LinkSlot::Missing, LinkSlot::Missing],
            vec![],
        )
        .unwrap();
        let mut q = ForecastQuery {
            pair_id: "p".into(),
            period: 1,
            following: follow_prefix(1),
            leading: Some(lead),
            headways: HeadwaySeries::new(vec![Some(300.0), Some(310.0), None, None]).unwrap(),
            leading_forecast: None,
        };
        let opts = ForecastOptions::default();
        assert_eq!(build_forecast_constraints(&q, ModelVariant::C, &opts).unwrap_err(), Error::MissingLeadingForecast);
        // Variant A never looks at the leader.
        assert!(build_forecast_constraints(&q, ModelVariant::A, &opts).is_ok());
        let lenient = ForecastOptions { allow_missing_leading: true, ..opts };
        assert!(build_forecast_constraints(&q, ModelVariant::C, &lenient).is_ok());

        q.leading_forecast = Some(LeadingForecast {
            links: vec![2, 3],
            samples: DMatrix::from_row_slice(2, 2, &[111.0, 131.0, 109.0, 129.0]),
        });
        let sys = build_forecast_constraints(&q, ModelVariant::C, &opts).unwrap();
        assert_eq!(sys.pseudo_draws(), 2);
        assert_eq!(sys.kinds.iter().filter(|k| **k == RowKind::Pseudo).count(), 2);
        let r0 = sys.rhs_for_draw(0);
        let r1 = sys.rhs_for_draw(1);
        let r2 = sys.rhs_for_draw(2);
        assert_eq!(r0, r2);
        assert_ne!(r0, r1);
        let mean = build_forecast_constraints(&q, ModelVariant::C, &ForecastOptions { leading: LeadingMode::Mean, ..opts })
            .unwrap();
        let rm = mean.rhs_for_draw(1);
        let pseudo_sum: f64 = rm.iter().zip(&mean.kinds).filter(|(_, k)| **k == RowKind::Pseudo).map(|(v, _)| v).sum();
        assert!((pseudo_sum - 240.0).abs() < 1e-12);
    }

    #[test]
    fn variant_b_drops_headways() {
        let q = ForecastQuery {
            pair_id: "p".into(),
            period: 1,
            following: follow_prefix(2),
            leading: Some(lead_done()),
            headways: HeadwaySeries::new(vec![Some(300.0), Some(310.0), Some(310.0), None]).unwrap(),
            leading_forecast: None,
        };
        let sys = build_forecast_constraints(&q, ModelVariant::B, &ForecastOptions::default()).unwrap();
        assert_eq!(sys.g.nrows(), 6);
        assert_eq!(sys.g.ncols(), 8);
    }
}
