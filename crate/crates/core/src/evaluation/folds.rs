use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train on calendar years `train_start..=train_end`, test on `test_year`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldDef {
    pub train_start: i32,
    pub train_end: i32,
    pub test_year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub folds: Vec<FoldDef>,
}

impl Default for FoldSpec {
    fn default() -> Self {
        Self::expanding(2022, &[2023, 2024, 2025])
    }
}

impl FoldSpec {
    /// Expanding folds anchored at `first_year`, each training on every year
    /// before its test year.
    pub fn expanding(first_year: i32, test_years: &[i32]) -> Self {
        Self {
            folds: test_years
                .iter()
                .map(|&t| FoldDef {
                    train_start: first_year,
                    train_end: t - 1,
                    test_year: t,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.folds.is_empty() {
            return bad("fold spec is empty".into());
        }
        for (i, f) in self.folds.iter().enumerate() {
            if f.train_start > f.train_end {
                return bad(format!("fold {}: train range {}..={} is empty", i + 1, f.train_start, f.train_end));
            }
            if f.test_year <= f.train_end {
                return bad(format!(
                    "fold {}: test year {} is not after train range ending {}",
                    i + 1,
                    f.test_year,
                    f.train_end
                ));
            }
            if i > 0 {
                let p = self.folds[i - 1];
                if f.train_start > p.train_start || f.train_end < p.train_end {
                    return bad(format!("fold {}: train range does not contain fold {}'s", i + 1, i));
                }
                if f.test_year <= p.test_year {
                    return bad(format!("fold {}: test years must be strictly increasing", i + 1));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub def: FoldDef,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions row indices by calendar year of `dates` according to `spec`.
pub fn make_folds(dates: &[NaiveDate], spec: &FoldSpec) -> Result<Vec<Fold>> {
    spec.validate()?;
    spec.folds
        .iter()
        .enumerate()
        .map(|(i, def)| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (r, d) in dates.iter().enumerate() {
                let y = d.year();
                if (def.train_start..=def.train_end).contains(&y) {
                    train.push(r);
                } else if y == def.test_year {
                    test.push(r);
                }
            }
            if train.is_empty() || test.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "fold {} ({}-{} -> {}) has {} train and {} test rows",
                    i + 1,
                    def.train_start,
                    def.train_end,
                    def.test_year,
                    train.len(),
                    test.len()
                )));
            }
            Ok(Fold { def: *def, train, test })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calendar(counts: &[(i32, usize)]) -> Vec<NaiveDate> {
        counts
            .iter()
            .flat_map(|&(y, n)| {
                let start = NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
                (0..n).map(move |k| start + chrono::Duration::days(k as i64))
            })
            .collect()
    }

    #[test]
    fn default_spec_matches_year_counts() {
        let dates = calendar(&[(2022, 251), (2023, 257), (2024, 249), (2025, 187)]);
        assert_eq!(dates.len(), 944);
        let folds = make_folds(&dates, &FoldSpec::default()).unwrap();
        let sizes: Vec<_> = folds.iter().map(|f| (f.train.len(), f.test.len())).collect();
        assert_eq!(sizes, vec![(251, 257), (508, 249), (757, 187)]);
        let mut union = folds[0].train.clone();
        union.extend(&folds[0].test);
        assert_eq!(folds[1].train, union);
    }

    #[test]
    fn invalid_specs() {
        let overlap = FoldSpec {
            folds: vec![FoldDef {
                train_start: 2022,
                train_end: 2023,
                test_year: 2023,
            }],
        };
        assert!(overlap.validate().is_err());
        let shrinking = FoldSpec {
            folds: vec![
                FoldDef { train_start: 2022, train_end: 2023, test_year: 2024 },
                FoldDef { train_start: 2023, train_end: 2024, test_year: 2025 },
            ],
        };
        assert!(shrinking.validate().is_err());
        assert!(FoldSpec { folds: vec![] }.validate().is_err());
    }

    #[test]
    fn empty_test_year_is_an_error() {
        let dates = calendar(&[(2022, 10), (2023, 10)]);
        assert!(make_folds(&dates, &FoldSpec::default()).is_err());
        assert_eq!(make_folds(&dates, &FoldSpec::expanding(2022, &[2023])).unwrap().len(), 1);
    }
}
