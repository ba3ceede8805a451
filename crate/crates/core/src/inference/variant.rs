use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;
use crate::linalg::{select_cols, select_rows};
use crate::pair::{BusPairObservation, RowKind};

/// Which parts of the pair the model conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ModelVariant {
    /// Following bus's own links only.
    A,
    /// Both buses' links, no headways.
    B,
    /// Full pair with headways and identities.
    #[default]
    C,
}

impl ModelVariant {
    /// Augmented coordinates the variant models.
    pub fn coords(self, n: usize) -> Vec<usize> {
        match self {
            ModelVariant::A => (0..n).collect(),
            ModelVariant::B => (0..2 * n).collect(),
            ModelVariant::C => (0..3 * n).collect(),
        }
    }

    pub fn dim(self, n: usize) -> usize {
        match self {
            ModelVariant::A => n,
            ModelVariant::B => 2 * n,
            ModelVariant::C => 3 * n,
        }
    }

    fn keeps(self, kind: RowKind) -> bool {
        match self {
            ModelVariant::A => kind == RowKind::FollowingLink,
            ModelVariant::B => matches!(kind, RowKind::FollowingLink | RowKind::LeadingLink),
            ModelVariant::C => true,
        }
    }

    pub const ALL: [ModelVariant; 3] = [ModelVariant::A, ModelVariant::B, ModelVariant::C];
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::A => "A",
            ModelVariant::B => "B",
            ModelVariant::C => "C",
        })
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "A" | "a" => Ok(ModelVariant::A),
            "B" | "b" => Ok(ModelVariant::B),
            "C" | "c" => Ok(ModelVariant::C),
            _ => Err(Error::InvalidParams(alloc::format!("unknown model variant {s:?}"))),
        }
    }
}

/// Restricts a full pair to the rows and columns a variant uses. Kept rows
/// stay independent because they only touch the kept columns.
pub fn variant_projection(obs: &BusPairObservation, variant: ModelVariant) -> BusPairObservation {
    if variant == ModelVariant::C {
        return obs.clone();
    }
    let cols = variant.coords(obs.n_links);
    let rows: Vec<usize> = (0..obs.rows()).filter(|&i| variant.keeps(obs.kinds[i])).collect();
    let g = select_cols(&select_rows(&obs.g, &rows), &cols);
    BusPairObservation {
        coords: cols.iter().map(|&c| obs.coords[c]).collect(),
        g,
        r: nalgebra::DVector::from_fn(rows.len(), |i, _| obs.r[rows[i]]),
        kinds: rows.iter().map(|&i| obs.kinds[i]).collect(),
        ..obs.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::pair::{build_augmented_pair, HeadwaySeries, LinkSlot, LinkTimeSeries, RaggedGroup};

    fn ragged_case() -> BusPairObservation {
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
    fn full_variant_is_identity() {
        let p = ragged_case();
        assert_eq!(variant_projection(&p, ModelVariant::C), p);
    }

    #[test]
    fn own_links_only() {
        let a = variant_projection(&ragged_case(), ModelVariant::A);
        assert_eq!(a.dim(), 4);
        assert_eq!(a.rows(), 3);
        assert!(a.kinds.iter().all(|k| *k == RowKind::FollowingLink));
        assert_eq!(a.r.as_slice(), &[110.0, 240.0, 140.0]);
        assert_eq!(crate::linalg::rank(&a.g), 3);
    }

    #[test]
    fn pair_links_without_headways() {
        let b = variant_projection(&ragged_case(), ModelVariant::B);
        assert_eq!(b.dim(), 8);
        assert_eq!(b.rows(), 7);
        assert!(b.r.iter().all(|v| *v != 0.0));
    }

    #[test]
    fn parses_names() {
        assert_eq!("B".parse::<ModelVariant>().unwrap(), ModelVariant::B);
        assert!("D".parse::<ModelVariant>().is_err());
    }
}
