use std::io::{BufRead, Write};

use super::SampledPath;
use crate::error::{input, Error, Result};

/// Writes `t,value,absorbed` rows with 17 significant digits.
pub fn write_csv<W: Write>(path: &SampledPath, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,value,absorbed")?;
    for i in 0..path.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{}",
            path.times()[i],
            path.values()[i],
            path.is_absorbed(i) as u8
        )?;
    }
    Ok(())
}

/// Reads the format produced by [`write_csv`].
pub fn read_csv<R: BufRead>(reader: R) -> Result<SampledPath> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty csv".into()))?
        .map_err(|e| Error::Input(e.to_string()))?;
    if header.trim() != "t,value,absorbed" {
        return input(format!("unexpected header {header:?}"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut absorbed_from = None;
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Input(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = k + 2;
        let mut cols = line.split(',');
        let mut next = |name: &str| {
            cols.next()
                .ok_or_else(|| Error::Input(format!("line {row}: missing {name}")))
                .map(str::trim)
        };
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Input(format!("line {row}: {e}")))
        };
        let t = parse(next("t")?)?;
        let v = parse(next("value")?)?;
        let flag = next("absorbed")?;
        match flag {
            "0" => {
                if absorbed_from.is_some() {
                    return input(format!("line {row}: path leaves the cemetery"));
                }
            }
            "1" => {
                absorbed_from.get_or_insert(times.len());
            }
            other => return input(format!("line {row}: absorbed flag {other:?}")),
        }
        times.push(t);
        values.push(v);
    }
    SampledPath::with_absorption(times, values, absorbed_from)
}
