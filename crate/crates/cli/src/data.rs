//! Dataset CSV: `index,z1..zk,x1..xd,xplus1..xplusd`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use ssl_genlab::experiments::fmt17;
use ssl_genlab::PairedDataset;

use crate::config::{CliError, CliResult};

pub fn header(k: usize, d: usize) -> Vec<String> {
    let mut h = vec!["index".to_string()];
    h.extend((1..=k).map(|j| format!("z{j}")));
    h.extend((1..=d).map(|j| format!("x{j}")));
    h.extend((1..=d).map(|j| format!("xplus{j}")));
    h
}

pub fn to_csv(data: &PairedDataset) -> String {
    let (k, d) = (data.k(), data.d());
    let mut out = header(k, d).join(",");
    out.push('\n');
    for i in 0..data.n() {
        let _ = write!(out, "{i}");
        for m in [&data.z, &data.x, &data.x_plus] {
            for j in 0..m.ncols() {
                let _ = write!(out, ",{}", fmt17(m[(i, j)]));
            }
        }
        out.push('\n');
    }
    out
}

pub fn read_csv(path: &Path) -> CliResult<PairedDataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(file).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv<R: std::io::Read>(reader: R) -> CliResult<PairedDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::config(format!("line 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let k = names.iter().filter(|c| c.starts_with('z')).count();
    let d = names.len().saturating_sub(1 + k) / 2;
    if d == 0 || names != header(k, d) {
        return Err(CliError::config(
            "line 1: expected header index,z1..zk,x1..xd,xplus1..xplusd",
        ));
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::config(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for (field, name) in rec.iter().zip(&names).skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::config(format!("line {line}: column {name}: not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(CliError::config(format!("line {line}: column {name}: non-finite value")));
            }
            rows.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::config("no data rows"));
    }
    let all = DMatrix::from_row_slice(n, k + 2 * d, &rows);
    let z = all.columns(0, k).into_owned();
    let x = all.columns(k, d).into_owned();
    let x_plus = all.columns(k + d, d).into_owned();
    Ok(PairedDataset::from_arrays(z, x, x_plus)?)
}
