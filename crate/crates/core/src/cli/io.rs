//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! that reading a file back reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::samplers::{Chain, SamplerKind};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Shape(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes rows to `path` in one go, after the header.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// `chain, draw, <parameters…>`, one row per draw.
pub fn write_chains_csv(path: &Path, chains: &[Chain]) -> Result<()> {
    let names = chains.first().map(|c| c.param_names.clone()).unwrap_or_default();
    let mut header = vec!["chain", "draw"];
    header.extend(names.iter().map(String::as_str));
    let rows = chains.iter().enumerate().flat_map(|(c, chain)| {
        chain.draws.iter().enumerate().map(move |(d, row)| {
            let mut out = vec![c.to_string(), d.to_string()];
            out.extend(row.iter().map(|x| fmt_f64(*x)));
            out
        })
    });
    write_csv(path, &header, rows)
}

/// Reads a file written by [`write_chains_csv`]. Only the draws are stored
/// in the file; sampler bookkeeping on the returned chains is left empty.
pub fn read_chains_csv(path: &Path) -> Result<Vec<Chain>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 3 || &header[0] != "chain" || &header[1] != "draw" {
        return Err(Error::Shape(format!(
            "{}: expected header `chain,draw,<parameters>`",
            path.display()
        )));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let mut by_chain: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::Shape(format!("{}: row {}: {what}", path.display(), line + 2));
        let chain: usize = record[0].trim().parse().map_err(|_| bad("chain index is not an integer"))?;
        let draw: usize = record[1].trim().parse().map_err(|_| bad("draw index is not an integer"))?;
        let values = record
            .iter()
            .skip(2)
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(&format!("`{v}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        let draws = by_chain.entry(chain).or_default();
        if draw != draws.len() {
            return Err(bad("draw indices must count up from 0 within each chain"));
        }
        draws.push(values);
    }
    if by_chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if by_chain.keys().copied().ne(0..by_chain.len()) {
        return Err(Error::Shape(format!("{}: chain indices must be 0..n", path.display())));
    }
    Ok(by_chain
        .into_iter()
        .map(|(i, draws)| Chain {
            n_proposed: draws.len(),
            draws,
            param_names: names.clone(),
            sampler: SamplerKind::Hmc,
            acceptance_rate: f64::NAN,
            n_accepted: 0,
            divergence_count: 0,
            seed: 0,
            stream: i as u64,
            thinning_applied: 1,
        })
        .collect())
}
