//! Edge-list and CSV table reading and writing.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{NetcohError, Result};
use crate::graph::Graph;

/// One parsed edge-list line with the endpoint tokens as written.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEdge {
    pub u: String,
    pub v: String,
    pub w: f64,
}

/// Parses `u v [w]` lines separated by tabs, commas or spaces. Blank lines and
/// lines starting with `#` are skipped; a missing weight is 1.
pub fn parse_edge_list(reader: impl BufRead) -> Result<Vec<RawEdge>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let err = |msg: String| NetcohError::Parse { line: i + 1, msg };
        let w = match fields.len() {
            2 => 1.0,
            3 => fields[2]
                .parse::<f64>()
                .map_err(|_| err(format!("bad weight '{}'", fields[2])))?,
            k => return Err(err(format!("expected 2 or 3 fields, found {k}"))),
        };
        out.push(RawEdge {
            u: fields[0].to_string(),
            v: fields[1].to_string(),
            w,
        });
    }
    Ok(out)
}

pub fn read_edge_list(path: &Path) -> Result<Vec<RawEdge>> {
    let f = std::fs::File::open(path)?;
    parse_edge_list(std::io::BufReader::new(f))
}

/// Builds a graph on `n` nodes. Endpoints are looked up in `ids` when given,
/// and otherwise parsed as integer node ids.
pub fn build_graph(
    n: usize,
    edges: &[RawEdge],
    ids: Option<&HashMap<String, usize>>,
) -> Result<Graph> {
    let lookup = |tok: &str| -> Result<usize> {
        match ids {
            Some(map) => map
                .get(tok)
                .copied()
                .ok_or_else(|| NetcohError::InvalidInput(format!("unknown node label '{tok}'"))),
            None => tok.parse::<usize>().map_err(|_| {
                NetcohError::InvalidInput(format!("node id '{tok}' is not a nonnegative integer"))
            }),
        }
    };
    let rows = edges
        .iter()
        .map(|e| Ok((lookup(&e.u)?, lookup(&e.v)?, e.w)))
        .collect::<Result<Vec<_>>>()?;
    Graph::from_edges(n, rows)
}

/// Writes `u<TAB>v<TAB>w` lines, with node names from `labels` when given.
pub fn write_edge_list(g: &Graph, labels: Option<&[String]>, mut out: impl Write) -> Result<()> {
    for e in g.edges() {
        match labels {
            Some(l) => writeln!(out, "{}\t{}\t{:e}", l[e.u], l[e.v], e.w)?,
            None => writeln!(out, "{}\t{}\t{:e}", e.u, e.v, e.w)?,
        }
    }
    Ok(())
}

/// A CSV file with a header row, kept as strings.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader(r: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|rec| Ok(rec?.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Self { headers, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| NetcohError::InvalidInput(format!("column '{name}' not found")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>> {
        let j = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[j].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| NetcohError::Parse {
                        line: i + 2,
                        msg: format!("column '{name}': '{}' is not a finite number", r[j]),
                    })
            })
            .collect()
    }

    /// Event indicators: `1`/`0` or `true`/`false`.
    pub fn boolean(&self, name: &str) -> Result<Vec<bool>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r[j].to_ascii_lowercase().as_str() {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                other => Err(NetcohError::Parse {
                    line: i + 2,
                    msg: format!("column '{name}': '{other}' is not 0/1"),
                }),
            })
            .collect()
    }

    /// Matrix of the named numeric columns, one row per table row.
    pub fn matrix(&self, names: &[String]) -> Result<DMatrix<f64>> {
        let cols = names
            .iter()
            .map(|c| self.numeric(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(self.len(), cols.len(), |i, j| cols[j][i]))
    }

    /// All columns except `exclude`, in file order.
    pub fn other_columns(&self, exclude: &[&str]) -> Vec<String> {
        self.headers
            .iter()
            .filter(|h| !exclude.contains(&h.as_str()))
            .cloned()
            .collect()
    }
}
