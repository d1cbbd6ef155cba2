//! Plain-text dataset directory: `graph.txt`, `features.txt`, `labels.txt`
//! and `split.txt`.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so save/load round-trips are exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::data::{Dataset, Labels, Split};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use crate::scalar::Scalar;

pub const GRAPH_FILE: &str = "graph.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const SPLIT_FILE: &str = "split.txt";

/// Line-oriented reader that tags errors with the file and 1-based line.
struct Lines<'a> {
    path: &'a Path,
    iter: std::str::Lines<'a>,
    /// Number of lines consumed so far.
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Lines {
            path,
            iter: text.lines(),
            line: 0,
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Next line as `(line_number, tokens)`.
    fn next_tokens(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.line += 1;
        match self.iter.next() {
            Some(l) => Ok((self.line, l.split_whitespace().collect())),
            None => Err(self.err(self.line, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn expect_end(&mut self) -> Result<()> {
        for l in self.iter.by_ref() {
            self.line += 1;
            if !l.trim().is_empty() {
                return Err(self.err(self.line, "unexpected extra line"));
            }
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, tok: &str, what: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(line, format!("invalid {what} {tok:?}")))
    }

    fn header(&mut self, names: [&str; 2]) -> Result<(usize, usize)> {
        let (line, toks) = self.next_tokens("header")?;
        if toks.len() != 2 {
            return Err(self.err(line, format!("header must be `{} {}`", names[0], names[1])));
        }
        Ok((self.parse(line, toks[0], names[0])?, self.parse(line, toks[1], names[1])?))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_graph<F: Scalar>(path: &Path, text: &str, self_loops: bool) -> Result<Graph<F>> {
    let mut lines = Lines::new(path, text);
    let (num_nodes, num_edges) = lines.header(["num_nodes", "num_edges"])?;
    let mut edges = Vec::with_capacity(num_edges);
    for k in 0..num_edges {
        let (line, toks) = lines
            .next_tokens("an edge")
            .map_err(|_| lines.err(lines.line, format!("header promises {num_edges} edges, found {k}")))?;
        if toks.len() != 2 {
            return Err(lines.err(line, "edge line must be `u v`"));
        }
        let u: usize = lines.parse(line, toks[0], "node id")?;
        let v: usize = lines.parse(line, toks[1], "node id")?;
        if u >= v {
            return Err(lines.err(line, format!("edge ({u}, {v}) must satisfy u < v")));
        }
        if v >= num_nodes {
            return Err(lines.err(line, format!("node id {v} out of range for {num_nodes} nodes")));
        }
        if edges.last().is_some_and(|&prev| prev >= (u, v)) {
            return Err(lines.err(line, "edges must be strictly ascending"));
        }
        edges.push((u, v));
    }
    if let Err(Error::Parse { line, .. }) = lines.expect_end() {
        return Err(lines.err(line, format!("more edges than the {num_edges} in the header")));
    }
    build_graph(&edges, num_nodes, self_loops)
}

pub fn format_graph<F: Scalar>(g: &Graph<F>) -> String {
    let edges: Vec<_> = g.edges().iter().filter(|(u, v)| u != v).collect();
    let mut s = format!("{} {}\n", g.num_nodes(), edges.len());
    for (u, v) in edges {
        writeln!(s, "{u} {v}").unwrap();
    }
    s
}

pub fn parse_features<F: Scalar>(path: &Path, text: &str) -> Result<Array2<F>> {
    let mut lines = Lines::new(path, text);
    let (n, f) = lines.header(["num_nodes", "feature_dim"])?;
    let mut data = Vec::with_capacity(n * f);
    for _ in 0..n {
        let (line, toks) = lines.next_tokens("a feature row")?;
        if toks.len() != f {
            return Err(lines.err(line, format!("expected {f} values, found {}", toks.len())));
        }
        for t in toks {
            data.push(lines.parse::<F>(line, t, "float")?);
        }
    }
    lines.expect_end()?;
    Ok(Array2::from_shape_vec((n, f), data).expect("row lengths checked"))
}

fn join<T: std::fmt::Display>(s: &mut String, items: impl IntoIterator<Item = T>) {
    let mut first = true;
    for x in items {
        if !first {
            s.push(' ');
        }
        first = false;
        write!(s, "{x}").unwrap();
    }
    s.push('\n');
}

pub fn format_features<F: Scalar>(x: &Array2<F>) -> String {
    let mut s = format!("{} {}\n", x.nrows(), x.ncols());
    for row in x.rows() {
        join(&mut s, row.iter());
    }
    s
}

pub fn parse_labels(path: &Path, text: &str, num_nodes: usize) -> Result<Labels> {
    let mut lines = Lines::new(path, text);
    let (line, toks) = lines.next_tokens("header")?;
    if toks.len() != 2 {
        return Err(lines.err(line, "header must be `mode num_classes`"));
    }
    let k: usize = lines.parse(line, toks[1], "class count")?;
    let labels = match toks[0] {
        "single" => {
            let mut classes = Vec::with_capacity(num_nodes);
            for _ in 0..num_nodes {
                let (line, toks) = lines.next_tokens("a class id")?;
                if toks.len() != 1 {
                    return Err(lines.err(line, format!("single-label row needs one class id, found {} values", toks.len())));
                }
                let c: usize = lines.parse(line, toks[0], "class id")?;
                if c >= k {
                    return Err(lines.err(line, format!("class id {c} >= num_classes {k}")));
                }
                classes.push(c);
            }
            Labels::single(classes, k)?
        }
        "multi" => {
            let mut data = Vec::with_capacity(num_nodes * k);
            for _ in 0..num_nodes {
                let (line, toks) = lines.next_tokens("a label vector")?;
                if toks.len() != k {
                    return Err(lines.err(line, format!("multi-label row needs {k} values, found {}", toks.len())));
                }
                for t in toks {
                    match t {
                        "0" => data.push(0),
                        "1" => data.push(1),
                        _ => return Err(lines.err(line, format!("multi-label entry {t:?} is not 0 or 1"))),
                    }
                }
            }
            Labels::multi(Array2::from_shape_vec((num_nodes, k), data).expect("row lengths checked"))?
        }
        other => return Err(lines.err(line, format!("unknown label mode {other:?}"))),
    };
    lines.expect_end()?;
    Ok(labels)
}

pub fn format_labels(labels: &Labels) -> String {
    let mut s = format!("{} {}\n", labels.mode().as_str(), labels.num_classes());
    match labels {
        Labels::Single { classes, .. } => {
            for c in classes {
                writeln!(s, "{c}").unwrap();
            }
        }
        Labels::Multi(m) => {
            for row in m.rows() {
                join(&mut s, row.iter());
            }
        }
    }
    s
}

pub fn parse_split(path: &Path, text: &str, num_nodes: usize) -> Result<Vec<Split>> {
    let mut lines = Lines::new(path, text);
    let mut split = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        let (line, toks) = lines.next_tokens("a split tag")?;
        let tag = match toks.as_slice() {
            [t] => lines.parse::<u8>(line, t, "split tag")?,
            _ => return Err(lines.err(line, "split line must hold one tag")),
        };
        split.push(Split::from_tag(tag).ok_or_else(|| lines.err(line, format!("split tag {tag} not in {{0, 1, 2}}")))?);
    }
    lines.expect_end()?;
    Ok(split)
}

pub fn format_split(split: &[Split]) -> String {
    let mut s = String::with_capacity(2 * split.len());
    for t in split {
        writeln!(s, "{}", t.tag()).unwrap();
    }
    s
}

/// Reads a dataset directory. `self_loops` is forwarded to graph
/// construction.
pub fn load_dataset<F: Scalar>(dir: &Path, self_loops: bool) -> Result<Dataset<F>> {
    let path = |name: &str| -> PathBuf { dir.join(name) };
    let gp = path(GRAPH_FILE);
    let graph = parse_graph(&gp, &read(&gp)?, self_loops)?;
    let fp = path(FEATURES_FILE);
    let features = parse_features(&fp, &read(&fp)?)?;
    let n = graph.num_nodes();
    if features.nrows() != n {
        return Err(Error::Inconsistent(format!(
            "{} declares {} feature rows, graph has {n} nodes",
            fp.display(),
            features.nrows()
        )));
    }
    let lp = path(LABELS_FILE);
    let labels = parse_labels(&lp, &read(&lp)?, n)?;
    let sp = path(SPLIT_FILE);
    let split = parse_split(&sp, &read(&sp)?, n)?;
    Dataset::new(graph, features, labels, split)
}

pub fn save_dataset<F: Scalar>(ds: &Dataset<F>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(GRAPH_FILE), &format_graph(&ds.graph))?;
    write(&dir.join(FEATURES_FILE), &format_features(&ds.features))?;
    write(&dir.join(LABELS_FILE), &format_labels(&ds.labels))?;
    write(&dir.join(SPLIT_FILE), &format_split(&ds.split))
}
