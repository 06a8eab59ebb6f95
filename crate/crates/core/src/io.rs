//! CSV file formats (item banks, panels, single response sets, trait
//! distributions) and the `--dist` flag syntax.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grm::{ItemBank, ItemParams};
use crate::panel::{PanelRecord, ResponsePanel, ResponseSet};
use crate::population::LatentDistribution;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn reader(text: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text)
}

fn parse_num<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("row {line}: cannot parse {what} `{field}`")))
}

fn csv_err(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse(format!("row {line}: {err}"))
}

fn check_header(headers: &csv::StringRecord, expected: &[&str], what: &str) -> Result<()> {
    let got: Vec<&str> = headers.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(Error::Parse(format!(
            "row 1: {what} header must start with `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Parse an item bank from `item_id,a,b1,...,bM` CSV. Items may have fewer
/// thresholds than there are columns by leaving trailing fields blank.
pub fn parse_bank_csv(text: &str) -> Result<ItemBank> {
    if text.trim().is_empty() {
        return Err(Error::Parse("bank file is empty".into()));
    }
    let mut rdr = reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    check_header(&headers, &["item_id", "a", "b1"], "bank")?;
    for (j, h) in headers.iter().enumerate().skip(2) {
        if h != format!("b{}", j - 1) {
            return Err(Error::Parse(format!("row 1: expected column `b{}`, got `{h}`", j - 1)));
        }
    }
    let mut items = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        if rec.len() > headers.len() {
            return Err(Error::Parse(format!("row {line}: more fields than header columns")));
        }
        let id = rec.get(0).unwrap_or("");
        if id.is_empty() {
            return Err(Error::Parse(format!("row {line}: missing item_id")));
        }
        let a: f64 = parse_num(rec.get(1).unwrap_or(""), "discrimination", line)?;
        let fields: Vec<&str> = rec.iter().skip(2).collect();
        let used = fields.iter().rposition(|f| !f.is_empty()).map_or(0, |p| p + 1);
        let thresholds = fields[..used]
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Err(Error::Parse(format!(
                        "row {line}: blank threshold before the last threshold of item `{id}`"
                    )))
                } else {
                    parse_num(f, "threshold", line)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let item = ItemParams::new(id, a, thresholds).map_err(|e| Error::InvalidBank(format!("row {line}: {e}")))?;
        items.push(item);
    }
    ItemBank::new(items)
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<ItemBank> {
    parse_bank_csv(&read_text(path)?)
}

pub fn write_bank_csv<W: Write>(bank: &ItemBank, mut out: W) -> Result<()> {
    let width = bank.items().iter().map(ItemParams::max_level).max().unwrap_or(1);
    let mut header = vec!["item_id".to_string(), "a".to_string()];
    header.extend((1..=width).map(|m| format!("b{m}")));
    writeln!(out, "{}", header.join(","))?;
    for item in bank.items() {
        let mut row = vec![item.id().to_string(), fmt_f64(item.a())];
        row.extend(item.thresholds().iter().map(|&b| fmt_f64(b)));
        row.resize(width + 2, String::new());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn bank_to_csv(bank: &ItemBank) -> String {
    let mut buf = Vec::new();
    write_bank_csv(bank, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ASCII output")
}

/// Parse a `subject_id,time_years,item_id,level` panel. Validation against
/// a bank is separate ([`ResponsePanel::validate`]).
pub fn parse_panel_csv(text: &str) -> Result<ResponsePanel> {
    if text.trim().is_empty() {
        return Err(Error::Parse("panel file is empty".into()));
    }
    let mut rdr = reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    check_header(&headers, &["subject_id", "time_years", "item_id", "level"], "panel")?;
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!(
                "row {line}: expected 4 fields, got {}",
                rec.len()
            )));
        }
        records.push(PanelRecord {
            subject_id: rec[0].to_string(),
            time_years: parse_num(&rec[1], "time_years", line)?,
            item_id: rec[2].to_string(),
            level: parse_num(&rec[3], "level", line)?,
        });
    }
    Ok(ResponsePanel::new(records))
}

pub fn load_panel(path: impl AsRef<Path>) -> Result<ResponsePanel> {
    parse_panel_csv(&read_text(path)?)
}

pub fn write_panel_csv<W: Write>(panel: &ResponsePanel, mut out: W) -> Result<()> {
    writeln!(out, "subject_id,time_years,item_id,level")?;
    for r in &panel.records {
        writeln!(
            out,
            "{},{},{},{}",
            r.subject_id,
            fmt_f64(r.time_years),
            r.item_id,
            r.level
        )?;
    }
    Ok(())
}

pub fn panel_to_csv(panel: &ResponsePanel) -> String {
    let mut buf = Vec::new();
    write_panel_csv(panel, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("UTF-8 ids")
}

/// Parse a single response set from `item_id,level` CSV. A header-only file
/// is an empty set.
pub fn parse_responses_csv(text: &str) -> Result<ResponseSet> {
    let mut rdr = reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    check_header(&headers, &["item_id", "level"], "responses")?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("row {line}: expected 2 fields")));
        }
        out.push((rec[0].to_string(), parse_num(&rec[1], "level", line)?));
    }
    Ok(ResponseSet::new(out))
}

/// Trait values, one per line; an optional non-numeric first line is
/// treated as a header.
pub fn parse_sample(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if row == 0 => continue,
            Err(_) => return Err(Error::Parse(format!("row {}: cannot parse `{field}`", row + 1))),
        }
    }
    Ok(values)
}

/// `theta,weight` CSV with a header row.
pub fn parse_grid(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    check_header(&headers, &["theta", "weight"], "grid")?;
    let (mut nodes, mut weights) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        nodes.push(parse_num(rec.get(0).unwrap_or(""), "theta", line)?);
        weights.push(parse_num(rec.get(1).unwrap_or(""), "weight", line)?);
    }
    Ok((nodes, weights))
}

/// Parse a `--dist` flag: `normal:MEAN,SD`, `sample:PATH` or `grid:PATH`.
pub fn parse_distribution(spec: &str) -> Result<LatentDistribution> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("distribution `{spec}` must look like kind:args")))?;
    let dist = match kind {
        "normal" => {
            let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("normal distribution needs MEAN,SD, got `{arg}`")));
            }
            LatentDistribution::Normal {
                mean: parse_num(parts[0], "mean", 0)?,
                sd: parse_num(parts[1], "sd", 0)?,
            }
        }
        "sample" => LatentDistribution::EmpiricalSample {
            values: parse_sample(&read_text(arg)?)?,
        },
        "grid" => {
            let (nodes, weights) = parse_grid(&read_text(arg)?)?;
            LatentDistribution::ExplicitGrid { nodes, weights }
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown distribution kind `{other}` (normal|sample|grid)"
            )))
        }
    };
    dist.validate()?;
    Ok(dist)
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(s)
}
