//! Input files and their parsing.
//!
//! Edge files are CSV with header `parent,child`; a row with an empty child
//! declares an isolated node. P-value files are CSV `node,p`; intersection
//! mode reads `node,item` annotations and `item,p` item p-values. Nodes get
//! dense ids in order of first appearance in the edge file.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use focusfdr::{Dag, Error as CoreError, PValues};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: node {node:?} does not appear in the graph")]
    UnknownNodeInPvalues {
        path: PathBuf,
        line: u64,
        node: String,
    },
    #[error("no p-value for node {node:?}")]
    MissingPvalue { node: String },
    #[error("{path}:{line}: second p-value for node {node:?}")]
    DuplicatePvalue {
        path: PathBuf,
        line: u64,
        node: String,
    },
    #[error("edge set contains a directed cycle through node {node:?}")]
    Cycle { node: String },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A graph read from an edge file, with node names indexed by dense id.
#[derive(Debug, Clone)]
pub struct NamedDag {
    pub dag: Dag,
    pub names: Vec<String>,
    pub index: HashMap<String, usize>,
}

impl NamedDag {
    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }
}

fn open(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn check_header(
    reader: &mut csv::Reader<impl Read>,
    path: &Path,
    expected: [&str; 2],
) -> CliResult<()> {
    let header = reader
        .headers()
        .map_err(|e| CliError::parse(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(CliError::parse(
            path,
            1,
            format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

/// Reads every data row as two fields, reporting the 1-based file line.
fn rows(path: &Path, expected: [&str; 2]) -> CliResult<Vec<(u64, String, String)>> {
    let mut reader = open(path)?;
    check_header(&mut reader, path, expected)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(CliError::parse(
                path,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        out.push((line, record[0].to_string(), record[1].to_string()));
    }
    Ok(out)
}

pub fn read_dag(path: &Path) -> CliResult<NamedDag> {
    let mut names = Vec::new();
    let mut index = HashMap::new();
    let mut intern = |name: &str| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let mut edges = Vec::new();
    let mut seen = HashMap::new();
    for (line, parent, child) in rows(path, ["parent", "child"])? {
        if parent.is_empty() {
            return Err(CliError::parse(path, line, "empty parent name"));
        }
        let a = intern(&parent);
        if child.is_empty() {
            continue;
        }
        if parent == child {
            return Err(CliError::parse(
                path,
                line,
                format!("self-loop on {parent:?}"),
            ));
        }
        let b = intern(&child);
        if let Some(first) = seen.insert((a, b), line) {
            return Err(CliError::parse(
                path,
                line,
                format!("duplicate edge {parent} -> {child} (first on line {first})"),
            ));
        }
        edges.push((a, b));
    }
    if names.is_empty() {
        return Err(CliError::parse(path, 1, "no nodes"));
    }
    let dag = Dag::new(names.len(), &edges).map_err(|e| match e {
        CoreError::CycleDetected { node } => CliError::Cycle {
            node: names[node].clone(),
        },
        other => other.into(),
    })?;
    Ok(NamedDag { dag, names, index })
}

fn parse_p(path: &Path, line: u64, text: &str) -> CliResult<f64> {
    let p: f64 = text
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("cannot parse p-value {text:?}")))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::parse(
            path,
            line,
            format!("p-value {p} outside [0, 1]"),
        ));
    }
    Ok(p)
}

/// Reads `node,p`; every graph node must get exactly one p-value.
pub fn read_pvalues(path: &Path, graph: &NamedDag) -> CliResult<PValues> {
    let mut values: Vec<Option<f64>> = vec![None; graph.names.len()];
    for (line, node, text) in rows(path, ["node", "p"])? {
        let id = *graph
            .index
            .get(&node)
            .ok_or_else(|| CliError::UnknownNodeInPvalues {
                path: path.to_path_buf(),
                line,
                node: node.clone(),
            })?;
        if values[id].is_some() {
            return Err(CliError::DuplicatePvalue {
                path: path.to_path_buf(),
                line,
                node,
            });
        }
        values[id] = Some(parse_p(path, line, &text)?);
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(id, v)| {
            v.ok_or_else(|| CliError::MissingPvalue {
                node: graph.names[id].clone(),
            })
        })
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(PValues::new(values)?)
}

/// Item annotations and item p-values for intersection mode.
#[derive(Debug, Clone)]
pub struct Items {
    pub annotations: Vec<Vec<usize>>,
    pub pvalues: PValues,
}

pub fn read_items(
    annotation_path: &Path,
    pvalue_path: &Path,
    graph: &NamedDag,
) -> CliResult<Items> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut pvals = Vec::new();
    for (line, item, text) in rows(pvalue_path, ["item", "p"])? {
        if index.contains_key(&item) {
            return Err(CliError::parse(
                pvalue_path,
                line,
                format!("second p-value for item {item:?}"),
            ));
        }
        index.insert(item, pvals.len());
        pvals.push(parse_p(pvalue_path, line, &text)?);
    }
    let mut annotations = vec![Vec::new(); graph.names.len()];
    for (line, node, item) in rows(annotation_path, ["node", "item"])? {
        let id = *graph.index.get(&node).ok_or_else(|| {
            CliError::parse(annotation_path, line, format!("unknown node {node:?}"))
        })?;
        let j = *index.get(&item).ok_or_else(|| {
            CliError::parse(
                annotation_path,
                line,
                format!("item {item:?} has no p-value"),
            )
        })?;
        annotations[id].push(j);
    }
    for a in &mut annotations {
        a.sort_unstable();
        a.dedup();
    }
    Ok(Items {
        annotations,
        pvalues: PValues::new(pvals)?,
    })
}

/// Writes an edge file with 1-based numeric node names.
pub fn write_edges(dag: &Dag, out: impl std::io::Write) -> CliResult<()> {
    let mut writer = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Output(e.to_string());
    writer.write_record(["parent", "child"]).map_err(err)?;
    for (a, b) in dag.edges() {
        writer
            .write_record([(a + 1).to_string(), (b + 1).to_string()])
            .map_err(err)?;
    }
    for v in 0..dag.len() {
        if dag.parents(v).is_empty() && dag.children(v).is_empty() {
            writer
                .write_record([(v + 1).to_string(), String::new()])
                .map_err(err)?;
        }
    }
    writer.flush().map_err(|e| CliError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_chain_with_isolated_node() {
        let f = temp("parent,child\na,b\nb,c\nz,\n");
        let g = read_dag(f.path()).unwrap();
        assert_eq!(g.names, vec!["a", "b", "c", "z"]);
        assert_eq!(g.dag.edge_count(), 2);
        assert!(g.dag.children(3).is_empty());
    }

    #[test]
    fn reports_line_numbers() {
        let f = temp("parent,child\na,b\na,b\n");
        match read_dag(f.path()).unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        let f = temp("from,to\na,b\n");
        assert!(matches!(
            read_dag(f.path()),
            Err(CliError::Parse { line: 1, .. })
        ));
        let f = temp("parent,child\na,b\nb,a\n");
        assert!(matches!(read_dag(f.path()), Err(CliError::Cycle { .. })));
    }

    #[test]
    fn pvalue_errors() {
        let g = read_dag(temp("parent,child\na,b\n").path()).unwrap();
        assert!(matches!(
            read_pvalues(temp("node,p\na,0.1\n").path(), &g),
            Err(CliError::MissingPvalue { node }) if node == "b"
        ));
        assert!(matches!(
            read_pvalues(temp("node,p\na,0.1\nb,0.2\nq,0.3\n").path(), &g),
            Err(CliError::UnknownNodeInPvalues { line: 4, .. })
        ));
        assert!(matches!(
            read_pvalues(temp("node,p\na,0.1\nb,1.2\n").path(), &g),
            Err(CliError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            read_pvalues(temp("node,p\na,0.1\na,0.2\n").path(), &g),
            Err(CliError::DuplicatePvalue { line: 3, .. })
        ));
        let p = read_pvalues(temp("node,p\nb,0.2\na,0.1\n").path(), &g).unwrap();
        assert_eq!(p.as_slice(), &[0.1, 0.2]);
    }

    #[test]
    fn items_round_trip() {
        let g = read_dag(temp("parent,child\nA,B\n").path()).unwrap();
        let items = read_items(
            temp("node,item\nA,x\nA,y\nB,y\n").path(),
            temp("item,p\nx,0.5\ny,0.01\n").path(),
            &g,
        )
        .unwrap();
        assert_eq!(items.annotations, vec![vec![0, 1], vec![1]]);
    }

    #[test]
    fn edge_export_reads_back() {
        let dag = Dag::new(4, &[(0, 1), (1, 2)]).unwrap();
        let mut buf = Vec::new();
        write_edges(&dag, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "parent,child\n1,2\n2,3\n4,\n");
        let g = read_dag(temp(&text).path()).unwrap();
        assert_eq!(g.dag.len(), 4);
        assert_eq!(g.dag.edge_count(), 2);
    }
}
