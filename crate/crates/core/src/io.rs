//! Dataset CSV and group TSV formats.
//!
//! A dataset file has a header row; the response column is named `y`, an
//! optional `delta` column (0/1) holds event indicators, and every other
//! column is a covariate in the shared order. The group file has one
//! `covariate_name<TAB>group_id` line per covariate, with positive integer
//! group ids. Parsing is strict: ragged rows, non-numeric cells and unknown
//! or duplicate names are errors.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ShapeBuilder};

use crate::data::{DatasetBundle, GroupStructure};
use crate::error::{Error, Result};

/// A parsed dataset together with its covariate names.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub bundle: DatasetBundle,
    pub names: Vec<String>,
}

pub fn read_dataset(path: &Path) -> Result<NamedDataset> {
    let file = File::open(path)?;
    parse_dataset(file, &path.display().to_string())
}

pub fn parse_dataset<R: Read>(reader: R, source: &str) -> Result<NamedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(source, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.first().map(String::as_str) != Some("y") {
        return Err(Error::parse(source, "first column must be named 'y'"));
    }
    let has_delta = headers.get(1).map(String::as_str) == Some("delta");
    let first_cov = if has_delta { 2 } else { 1 };
    let names: Vec<String> = headers[first_cov..].to_vec();
    if names.is_empty() {
        return Err(Error::parse(source, "no covariate columns"));
    }
    let mut seen = BTreeSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(Error::parse(source, format!("duplicate column '{name}'")));
        }
    }
    let p = names.len();
    let mut y = Vec::new();
    let mut delta = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::parse(source, e.to_string()))?;
        let line = row + 2;
        let cell = |i: usize| -> Result<f64> {
            let raw = &record[i];
            raw.parse::<f64>().map_err(|_| {
                Error::parse(source, format!("line {line}, column {}: '{raw}' is not a number", i + 1))
            })
        };
        y.push(cell(0)?);
        if has_delta {
            match &record[1] {
                "1" | "1.0" => delta.push(true),
                "0" | "0.0" => delta.push(false),
                other => {
                    return Err(Error::parse(
                        source,
                        format!("line {line}: event indicator must be 0 or 1, got '{other}'"),
                    ))
                }
            }
        }
        for i in first_cov..first_cov + p {
            values.push(cell(i)?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::parse(source, "no data rows"));
    }
    let rows = Array2::from_shape_vec((n, p), values)
        .map_err(|e| Error::parse(source, e.to_string()))?;
    let mut x = Array2::<f64>::zeros((n, p).f());
    x.assign(&rows);
    let bundle = DatasetBundle::new(x, y, has_delta.then_some(delta))?;
    Ok(NamedDataset { bundle, names })
}

pub fn write_dataset(path: &Path, bundle: &DatasetBundle, names: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    format_dataset(&mut out, bundle, names)?;
    out.flush()?;
    Ok(())
}

/// Writes a dataset with shortest round-trip float formatting, so reading
/// the file back reproduces every value exactly.
pub fn format_dataset<W: Write>(out: &mut W, bundle: &DatasetBundle, names: &[String]) -> Result<()> {
    let mut header = vec!["y".to_string()];
    if bundle.delta.is_some() {
        header.push("delta".into());
    }
    header.extend(names.iter().cloned());
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..bundle.n() {
        line.clear();
        line.push_str(&bundle.y[i].to_string());
        if let Some(d) = &bundle.delta {
            line.push_str(if d[i] { ",1" } else { ",0" });
        }
        for v in bundle.x.row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Group structure plus the original group ids, in dense index order.
#[derive(Debug, Clone)]
pub struct NamedGroups {
    pub groups: GroupStructure,
    pub labels: Vec<u64>,
}

pub fn read_groups(path: &Path, names: &[String]) -> Result<NamedGroups> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_groups(&text, names, &path.display().to_string())
}

pub fn parse_groups(text: &str, names: &[String], source: &str) -> Result<NamedGroups> {
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut raw: Vec<Option<u64>> = vec![None; names.len()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                source,
                format!("line {}: expected 'name<TAB>group_id'", lineno + 1),
            ));
        }
        let (name, gid) = (fields[0].trim(), fields[1].trim());
        let gid: u64 = gid
            .parse()
            .ok()
            .filter(|&g| g >= 1)
            .ok_or_else(|| Error::parse(source, format!("line {}: bad group id '{gid}'", lineno + 1)))?;
        let &j = index.get(name).ok_or_else(|| {
            Error::InvalidGroups(format!("group file names unknown covariate '{name}'"))
        })?;
        if raw[j].replace(gid).is_some() {
            return Err(Error::InvalidGroups(format!("covariate '{name}' listed twice")));
        }
    }
    if let Some(j) = raw.iter().position(Option::is_none) {
        return Err(Error::InvalidGroups(format!(
            "covariate '{}' has no group",
            names[j]
        )));
    }
    let raw: Vec<u64> = raw.into_iter().map(|g| g.unwrap_or_default()).collect();
    let labels: Vec<u64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let assignment = raw
        .iter()
        .map(|g| labels.binary_search(g).unwrap_or_default())
        .collect();
    Ok(NamedGroups {
        groups: GroupStructure::new(assignment)?,
        labels,
    })
}

pub fn write_groups(path: &Path, groups: &GroupStructure, names: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (j, name) in names.iter().enumerate() {
        writeln!(out, "{}\t{}", name, groups.group_of(j) + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// Default covariate names `x1..xp`.
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lr_and_aft() {
        let lr = parse_dataset("y,a,b\n1.5,0,1\n-2,3,4e-1\n".as_bytes(), "t").unwrap();
        assert_eq!(lr.names, vec!["a", "b"]);
        assert_eq!(lr.bundle.y, vec![1.5, -2.0]);
        assert_eq!(lr.bundle.x[[1, 1]], 0.4);
        assert!(lr.bundle.delta.is_none());

        let aft = parse_dataset("y,delta,a\n1,1,0\n2,0,1\n".as_bytes(), "t").unwrap();
        assert_eq!(aft.bundle.delta, Some(vec![true, false]));
    }

    #[test]
    fn rejects_ragged_and_non_numeric() {
        assert!(parse_dataset("y,a\n1,2\n3\n".as_bytes(), "t").is_err());
        assert!(parse_dataset("y,a\n1,abc\n".as_bytes(), "t").is_err());
        assert!(parse_dataset("y,delta,a\n1,2,0\n".as_bytes(), "t").is_err());
        assert!(parse_dataset("a,y\n1,2\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn group_file_parsing() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let g = parse_groups("a\t7\nb\t2\nc\t7\n", &names, "g").unwrap();
        assert_eq!(g.labels, vec![2, 7]);
        assert_eq!(g.groups.assignment(), &[1, 0, 1]);
        assert!(parse_groups("a\t1\nb\t1\n", &names, "g").is_err());
        assert!(parse_groups("a\t1\nb\t1\nc\t1\nd\t1\n", &names, "g").is_err());
        assert!(parse_groups("a\t1\nb\tx\nc\t1\n", &names, "g").is_err());
        assert!(parse_groups("a\t1\na\t1\nb\t1\nc\t1\n", &names, "g").is_err());
    }
}
