//! CSV encoding of sweep rows. Floats use Rust's shortest round-trip
//! formatting so that reading a file back reproduces every value exactly.

use std::io::Write;
use std::path::Path;

use crate::dynamics::{Environment, Memory, Topology};
use crate::error::{Error, Result};
use crate::states::Family;

use super::config::CSV_COLUMNS;
use super::SweepRow;

fn field(row: &SweepRow, column: &str) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    match column {
        "state" => row.state.name().to_string(),
        "p" => opt(row.p),
        "bath_topology" => row.environment.topology.name().to_string(),
        "memory" => row.environment.memory.name().to_string(),
        "gamma0_t" => row.gamma0_t.to_string(),
        "e_abc" => row.e_abc.to_string(),
        "e_ab" => row.e_ab.to_string(),
        "e_ac" => row.e_ac.to_string(),
        "e_bc" => opt(row.e_bc),
        "d" => row.d.to_string(),
        "signed_d" => row.signed_d.to_string(),
        "gap_abc" => row.gap_abc.to_string(),
        "gap_ab" => row.gap_ab.to_string(),
        "gap_ac" => row.gap_ac.to_string(),
        "converged" => row.converged.to_string(),
        other => unreachable!("column '{other}' rejected by config validation"),
    }
}

/// Writes `rows` with the selected columns, in schema order.
pub fn write_csv_to<W: Write>(out: W, rows: &[SweepRow], columns: &[String]) -> Result<()> {
    let selected: Vec<&str> = CSV_COLUMNS
        .iter()
        .copied()
        .filter(|c| columns.iter().any(|s| s == c))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&selected).map_err(csv_err)?;
    for row in rows {
        w.write_record(selected.iter().map(|c| field(row, c)))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every column of the schema to `path`.
pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let all: Vec<String> = CSV_COLUMNS.iter().map(|c| c.to_string()).collect();
    write_csv_to(file, rows, &all)
}

/// Reads a file written with the full schema.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Io(format!("{}: missing column '{name}'", path.display())))
    };
    let cols: Vec<usize> = CSV_COLUMNS.iter().map(|c| index(c)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (n, record) in r.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = n + 2;
        let get = |k: usize| record.get(cols[k]).unwrap_or("");
        let bad = |what: &str, v: &str| Error::Io(format!("{}:{line}: bad {what} '{v}'", path.display()));
        let num = |k: usize| get(k).parse::<f64>().map_err(|_| bad(CSV_COLUMNS[k], get(k)));
        let opt = |k: usize| -> Result<Option<f64>> {
            if get(k).is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let topology = match get(2) {
            "local" => Topology::Local,
            "common" => Topology::Common,
            v => return Err(bad("bath_topology", v)),
        };
        let memory = match get(3) {
            "markov" => Memory::Markov,
            "nonmarkov" => Memory::NonMarkov,
            v => return Err(bad("memory", v)),
        };
        rows.push(SweepRow {
            state: get(0).parse::<Family>().map_err(|_| bad("state", get(0)))?,
            p: opt(1)?,
            environment: Environment::new(topology, memory),
            gamma0_t: num(4)?,
            e_abc: num(5)?,
            e_ab: num(6)?,
            e_ac: num(7)?,
            e_bc: opt(8)?,
            d: num(9)?,
            signed_d: num(10)?,
            gap_abc: num(11)?,
            gap_ab: num(12)?,
            gap_ac: num(13)?,
            converged: match get(14) {
                "true" => true,
                "false" => false,
                v => return Err(bad("converged", v)),
            },
        });
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(d: f64) -> SweepRow {
        SweepRow {
            state: Family::WernerW,
            p: Some(0.1),
            environment: Environment::COMMON_NON_MARKOV,
            gamma0_t: 2.0 / 49.0,
            e_abc: 0.1 + d,
            e_ab: 1.0 / 3.0,
            e_ac: 1e-17,
            e_bc: None,
            d,
            signed_d: -d,
            gap_abc: 3.2e-7,
            gap_ab: 0.0,
            gap_ac: 0.0,
            converged: false,
        }
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        let all: Vec<String> = CSV_COLUMNS.iter().map(|c| c.to_string()).collect();
        write_csv_to(&mut buf, &[row(0.5)], &all).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "state,p,bath_topology,memory,gamma0_t,e_abc,e_ab,e_ac,e_bc,d,signed_d,gap_abc,gap_ab,gap_ac,converged"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "WernerW");
        assert_eq!(fields[2], "common");
        assert_eq!(fields[3], "nonmarkov");
        assert_eq!(fields[8], "");
        assert_eq!(fields[14], "false");
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut rows = vec![row(0.123456789012345678), row(7e-300)];
        rows[1].p = None;
        rows[1].state = Family::Ghz;
        rows[1].e_bc = Some(std::f64::consts::PI);
        write_csv(&path, &rows).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn column_subset_keeps_schema_order() {
        let mut buf = Vec::new();
        let cols = vec!["d".to_string(), "state".to_string()];
        write_csv_to(&mut buf, &[row(0.5)], &cols).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("state,d\n"));
    }
}
