//! Adapter for the public ProPublica `compas-scores-two-years.csv` file.
//!
//! Raw-column mapping:
//!
//! | table column        | source                                         | kind    |
//! |---------------------|------------------------------------------------|---------|
//! | `days_in_jail`      | `c_jail_out - c_jail_in`, in fractional days    | numeric |
//! | `age`               | `age`                                          | numeric |
//! | `sex`               | `sex` (`Male` = 1, `Female` = 0)                | binary  |
//! | `decile_score`      | first `decile_score` column                    | numeric |
//! | `priors_count`      | first `priors_count` column                    | numeric |
//! | `days_from_compas`  | `c_days_from_compas`                           | numeric |
//! | `v_decile_score`    | `v_decile_score`                               | numeric |
//! | `race`              | `race` (`African-American` = 1, `Caucasian` = 0) | binary |
//! | `two_year_recid`    | `two_year_recid` (target)                      | binary  |
//!
//! Only African-American and Caucasian rows are kept. Rows missing any source
//! field (mostly absent jail dates) are dropped.

use std::fs::File;
use std::path::Path;

use chrono::NaiveDateTime;

use super::{ColumnKind, ColumnSpec, Table};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FEATURES: [&str; 7] = [
    "days_in_jail",
    "age",
    "sex",
    "decile_score",
    "priors_count",
    "days_from_compas",
    "v_decile_score",
];
pub const PROTECTED: &str = "race";
pub const TARGET: &str = "two_year_recid";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompasLoadStats {
    /// African-American and Caucasian rows in the file.
    pub two_group_rows: usize,
    pub african_american: usize,
    pub caucasian: usize,
    pub dropped_missing: usize,
}

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").ok()
}

pub fn load(path: &Path) -> Result<Table> {
    load_with_stats(path).map(|(t, _)| t)
}

pub fn load_with_stats(path: &Path) -> Result<(Table, CompasLoadStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers()?.clone();
    let pos = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let race = pos("race")?;
    let jail_in = pos("c_jail_in")?;
    let jail_out = pos("c_jail_out")?;
    let sex = pos("sex")?;
    let numeric = [
        pos("age")?,
        pos("decile_score")?,
        pos("priors_count")?,
        pos("c_days_from_compas")?,
        pos("v_decile_score")?,
    ];
    let target = pos(TARGET)?;

    let mut stats = CompasLoadStats::default();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let z = match &rec[race] {
            "African-American" => 1.0,
            "Caucasian" => 0.0,
            _ => continue,
        };
        stats.two_group_rows += 1;
        let row = (|| {
            let days = parse_time(&rec[jail_out])? - parse_time(&rec[jail_in])?;
            let days = days.num_seconds() as f64 / 86_400.0;
            let sex = match &rec[sex] {
                "Male" => 1.0,
                "Female" => 0.0,
                _ => return None,
            };
            let mut v = [0.0; 5];
            for (slot, &p) in v.iter_mut().zip(&numeric) {
                *slot = rec[p].trim().parse::<f64>().ok()?;
            }
            let y = match rec[target].trim() {
                "0" => 0.0,
                "1" => 1.0,
                _ => return None,
            };
            Some([days, v[0], sex, v[1], v[2], v[3], v[4], z, y])
        })();
        match row {
            Some(r) => {
                if z == 1.0 {
                    stats.african_american += 1;
                } else {
                    stats.caucasian += 1;
                }
                data.extend_from_slice(&r);
            }
            None => stats.dropped_missing += 1,
        }
    }
    if data.is_empty() {
        return Err(Error::Empty(format!(
            "{} has no usable African-American or Caucasian rows",
            path.display()
        )));
    }
    let mut columns: Vec<ColumnSpec> = FEATURES
        .iter()
        .map(|&n| {
            let kind = if n == "sex" {
                ColumnKind::Binary
            } else {
                ColumnKind::Numeric
            };
            ColumnSpec::new(n, kind)
        })
        .collect();
    columns.push(ColumnSpec::new(PROTECTED, ColumnKind::Binary));
    columns.push(ColumnSpec::new(TARGET, ColumnKind::Binary));
    let n = data.len() / columns.len();
    let values = Matrix::new(n, columns.len(), data)?;
    let table = Table::new(columns, values, Some(TARGET.to_string()))?;
    Ok((table, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn maps_columns_and_drops_incomplete_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let mut f = File::create(&p).unwrap();
        writeln!(f, "id,sex,age,race,decile_score,priors_count,c_jail_in,c_jail_out,c_days_from_compas,v_decile_score,priors_count,two_year_recid").unwrap();
        writeln!(f, "1,Male,30,African-American,5,2,2013-01-01 00:00:00,2013-01-03 12:00:00,1,3,99,1").unwrap();
        writeln!(f, "2,Female,45,Caucasian,2,0,2013-02-01 00:00:00,2013-02-01 06:00:00,0,1,99,0").unwrap();
        writeln!(f, "3,Male,22,Hispanic,4,1,2013-02-01 00:00:00,2013-02-02 00:00:00,0,1,99,0").unwrap();
        writeln!(f, "4,Male,22,Caucasian,4,1,,,0,1,99,0").unwrap();
        drop(f);
        let (t, s) = load_with_stats(&p).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(s.two_group_rows, 3);
        assert_eq!(s.dropped_missing, 1);
        assert_eq!(t.column("days_in_jail").unwrap(), vec![2.5, 0.25]);
        assert_eq!(t.column("sex").unwrap(), vec![1.0, 0.0]);
        assert_eq!(t.column("priors_count").unwrap(), vec![2.0, 0.0]);
        assert_eq!(t.column("race").unwrap(), vec![1.0, 0.0]);
        assert_eq!(t.target(), Some(TARGET));
    }
}
