use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use netcoh::glm::cox::SurvivalData;
use netcoh::io::{build_graph, read_edge_list, RawEdge, Table};
use netcoh::model_selection::Response;
use netcoh::{Family, Graph, NetcohError, Result};

use crate::args::DataArgs;

/// Node labels of a table: the id column if present, otherwise row numbers.
pub struct Nodes {
    pub labels: Vec<String>,
    pub column: Option<String>,
    /// Label lookup; `None` when endpoints are plain row numbers.
    pub index: Option<HashMap<String, usize>>,
}

impl Nodes {
    pub fn from_table(t: &Table, id_column: Option<&str>) -> Result<Self> {
        let column = match id_column {
            Some(c) => Some(c.to_string()),
            None if t.has("id") => Some("id".to_string()),
            None => None,
        };
        match &column {
            Some(c) => {
                let labels = t.strings(c)?;
                let index = label_index(&labels)?;
                Ok(Self {
                    labels,
                    column,
                    index: Some(index),
                })
            }
            None => Ok(Self {
                labels: (0..t.len()).map(|i| i.to_string()).collect(),
                column: None,
                index: None,
            }),
        }
    }
}

pub fn label_index(labels: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(labels.len());
    for (i, l) in labels.iter().enumerate() {
        if index.insert(l.clone(), i).is_some() {
            return Err(NetcohError::InvalidInput(format!(
                "duplicate node label '{l}'"
            )));
        }
    }
    Ok(index)
}

/// Everything a fitting command needs.
pub struct Problem {
    pub nodes: Nodes,
    pub graph: Graph,
    pub x: DMatrix<f64>,
    pub covariates: Vec<String>,
    pub response: Response,
}

pub fn load_problem(a: &DataArgs, family: Family) -> Result<Problem> {
    let table = Table::read(&a.data)?;
    if table.is_empty() {
        return Err(NetcohError::InvalidInput("data file has no rows".into()));
    }
    let nodes = Nodes::from_table(&table, a.id_column.as_deref())?;
    let response = match family {
        Family::Linear => Response::Continuous(table.numeric(&a.response)?),
        Family::Logistic => Response::Binary(table.numeric(&a.response)?),
        Family::Cox => Response::Survival(SurvivalData::new(
            table.numeric(&a.time_column)?,
            table.boolean(&a.event_column)?,
        )?),
    };
    let covariates = match &a.covariates {
        Some(c) => c.clone(),
        None => {
            let mut skip: Vec<&str> = match family {
                Family::Cox => vec![&a.time_column, &a.event_column],
                _ => vec![&a.response],
            };
            if let Some(c) = &nodes.column {
                skip.push(c);
            }
            table.other_columns(&skip)
        }
    };
    let x = table.matrix(&covariates)?;
    let edges = read_edge_list(&a.edges)?;
    let graph = build_graph(table.len(), &edges, nodes.index.as_ref())?;
    Ok(Problem {
        nodes,
        graph,
        x,
        covariates,
        response,
    })
}

/// Graph from a bare edge list. Integer endpoints are used as ids; otherwise
/// labels are numbered in order of first appearance.
pub fn load_edge_list(path: &Path, nodes: Option<usize>) -> Result<(Graph, Option<Vec<String>>)> {
    let edges = read_edge_list(path)?;
    let numeric = edges
        .iter()
        .all(|e| e.u.parse::<usize>().is_ok() && e.v.parse::<usize>().is_ok());
    if numeric {
        let max = edges
            .iter()
            .map(|e| {
                e.u.parse::<usize>()
                    .unwrap()
                    .max(e.v.parse::<usize>().unwrap())
                    + 1
            })
            .max()
            .unwrap_or(0);
        let n = nodes.unwrap_or(max);
        return Ok((build_graph(n, &edges, None)?, None));
    }
    let labels = first_appearance(&edges);
    if let Some(n) = nodes {
        if n != labels.len() {
            return Err(NetcohError::InvalidInput(format!(
                "--nodes {n} differs from the {} labels in the edge list",
                labels.len()
            )));
        }
    }
    let index = label_index(&labels)?;
    Ok((
        build_graph(labels.len(), &edges, Some(&index))?,
        Some(labels),
    ))
}

fn first_appearance(edges: &[RawEdge]) -> Vec<String> {
    let mut seen = HashMap::new();
    let mut labels = Vec::new();
    for e in edges {
        for t in [&e.u, &e.v] {
            if !seen.contains_key(t) {
                seen.insert(t.clone(), labels.len());
                labels.push(t.clone());
            }
        }
    }
    labels
}
