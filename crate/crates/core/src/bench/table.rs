//! Long-format result rows and their CSV form.
//!
//! Floats are written with 17 significant digits so a parse round-trips
//! exactly. `+inf` PSNR is written as `inf`; a column that does not apply to
//! a row (no stationary point, rate rows) is left empty.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fidelity::FidelityKind;

pub const COLUMNS: [&str; 12] = [
    "experiment",
    "seed",
    "image",
    "fidelity",
    "solver",
    "param",
    "iteration",
    "psnr_gt",
    "psnr_star",
    "objective",
    "l1_norm",
    "distance_to_star",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub image: String,
    pub fidelity: FidelityKind,
    pub solver: String,
    pub param: f64,
    pub iteration: usize,
    pub psnr_gt: Option<f64>,
    pub psnr_star: Option<f64>,
    pub objective: Option<f64>,
    pub l1_norm: Option<f64>,
    pub distance_to_star: Option<f64>,
}

impl ResultRow {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.seed.cmp(&other.seed))
            .then(self.image.cmp(&other.image))
            .then(self.fidelity.cmp(&other.fidelity))
            .then(self.solver.cmp(&other.solver))
            .then(self.param.total_cmp(&other.param))
            .then(self.iteration.cmp(&other.iteration))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ResultRow>) {
        self.rows.extend(rows);
    }

    /// Sorts by `(experiment, seed, image, fidelity, solver, param, iteration)`.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| a.cmp_key(b));
    }

    /// Writes the sorted table as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut sorted: Vec<&ResultRow> = self.rows.iter().collect();
        sorted.sort_by(|a, b| a.cmp_key(b));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COLUMNS)?;
        for r in sorted {
            w.write_record([
                r.experiment.clone(),
                r.seed.to_string(),
                r.image.clone(),
                r.fidelity.to_string(),
                r.solver.clone(),
                fmt_float(r.param),
                r.iteration.to_string(),
                fmt_opt(r.psnr_gt),
                fmt_opt(r.psnr_star),
                fmt_opt(r.objective),
                fmt_opt(r.l1_norm),
                fmt_opt(r.distance_to_star),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers()?.clone();
        if header.iter().ne(COLUMNS) {
            return Err(Error::Config(format!("unexpected CSV header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let int = |i: usize| -> Result<u64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad integer {:?} in {}", &rec[i], COLUMNS[i])))
            };
            let opt = |i: usize| parse_opt(&rec[i], COLUMNS[i]);
            rows.push(ResultRow {
                experiment: rec[0].to_string(),
                seed: int(1)?,
                image: rec[2].to_string(),
                fidelity: rec[3].parse()?,
                solver: rec[4].to_string(),
                param: parse_opt(&rec[5], COLUMNS[5])?
                    .ok_or_else(|| Error::Config("empty param cell".into()))?,
                iteration: int(6)? as usize,
                psnr_gt: opt(7)?,
                psnr_star: opt(8)?,
                objective: opt(9)?,
                l1_norm: opt(10)?,
                distance_to_star: opt(11)?,
            });
        }
        Ok(Self { rows })
    }
}

/// Writes `table` to `path`, creating parent directories.
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    table.write_csv(std::io::BufWriter::new(file))
}

pub fn fmt_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn parse_opt(s: &str, column: &str) -> Result<Option<f64>> {
    match s {
        "" => Ok(None),
        "inf" => Ok(Some(f64::INFINITY)),
        "-inf" => Ok(Some(f64::NEG_INFINITY)),
        _ => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad number {s:?} in {column}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, fidelity: FidelityKind, param: f64, iteration: usize) -> ResultRow {
        ResultRow {
            experiment: "e".into(),
            seed,
            image: "synthetic".into(),
            fidelity,
            solver: "pgd".into(),
            param,
            iteration,
            psnr_gt: Some(1.0 / 3.0),
            psnr_star: None,
            objective: Some(std::f64::consts::PI * 1e-300),
            l1_norm: Some(123456.789),
            distance_to_star: None,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let s = ResultTable::default().to_csv_string().unwrap();
        assert_eq!(s, format!("{}\n", COLUMNS.join(",")));
    }

    #[test]
    fn inf_sentinel() {
        let mut r = row(0, FidelityKind::Bp, 1.0, 0);
        r.psnr_gt = Some(f64::INFINITY);
        let s = ResultTable { rows: vec![r] }.to_csv_string().unwrap();
        let line = s.lines().nth(1).unwrap();
        assert_eq!(line.split(',').nth(7), Some("inf"));
    }

    #[test]
    fn round_trip_is_exact_and_sorted() {
        let mut t = ResultTable::default();
        t.extend([
            row(2, FidelityKind::Ls, 0.5, 3),
            row(1, FidelityKind::Bp, 1.5, 0),
            row(1, FidelityKind::Ls, 1.5, 10),
            row(1, FidelityKind::Ls, 1.5, 2),
            row(1, FidelityKind::Ls, 0.1 + 0.2, 2),
        ]);
        let s = t.to_csv_string().unwrap();
        let back = ResultTable::read_csv(s.as_bytes()).unwrap();
        let mut sorted = t.clone();
        sorted.sort();
        assert_eq!(back, sorted);
        let order: Vec<(u64, usize)> = back.rows.iter().map(|r| (r.seed, r.iteration)).collect();
        assert_eq!(order, vec![(1, 2), (1, 2), (1, 10), (1, 0), (2, 3)]);
        assert_eq!(back.rows[0].param, 0.1 + 0.2);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(ResultTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
