//! Binary artifacts: subgraph caches, coefficient caches and training
//! checkpoints.
//!
//! Layout: magic `SGCN`, format version (u16), artifact kind (u8), the
//! 64-bit hash of the graph the artifact belongs to, then the payload.
//! Integers are little-endian u64 and reals little-endian f64 whatever the
//! in-memory scalar type.

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use ndarray::Array2;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::gcn::{AdamState, Head, LogEntry, Model, TrainState};
use crate::graph::{Graph, Subgraph};
use crate::norm::{CoeffSource, Counters, NormCoeffs};
use crate::rng::StreamRng;
use crate::sampler::{SamplerConfig, SamplerKind};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"SGCN";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Kind {
    Subgraphs = 1,
    Coeffs = 2,
    Checkpoint = 3,
}

/// 64-bit FNV-1a over the node count, the self-loop flag and the CSR arrays.
pub fn graph_hash<F: Scalar>(g: &Graph<F>) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&(g.num_nodes() as u64).to_le_bytes());
    h.write(&[g.has_self_loops() as u8]);
    for &x in g.row_offsets().iter().chain(g.col_indices()) {
        h.write(&(x as u64).to_le_bytes());
    }
    h.finish()
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn header(kind: Kind, hash: u64) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        w.buf.extend_from_slice(&VERSION.to_le_bytes());
        w.u8(kind as u8);
        w.u64(hash);
        w
    }

    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }

    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    fn usizes(&mut self, xs: &[usize]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.u64(x as u64);
        }
    }

    fn u64s(&mut self, xs: &[u64]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.u64(x);
        }
    }

    fn reals<F: Scalar>(&mut self, xs: impl ExactSizeIterator<Item = F>) {
        self.u64(xs.len() as u64);
        for x in xs {
            self.f64(x.as_f64());
        }
    }

    fn matrix<F: Scalar>(&mut self, m: &Array2<F>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        for &x in m.iter() {
            self.f64(x.as_f64());
        }
    }

    fn sampler(&mut self, cfg: &SamplerConfig) {
        let (tag, a, b) = match cfg.kind {
            SamplerKind::Node { n } => (0, n, 0),
            SamplerKind::Edge { m } => (1, m, 0),
            SamplerKind::EdgeIndependent { m } => (2, m, 0),
            SamplerKind::RandomWalk { r, h } => (3, r, h),
            SamplerKind::MultiWalk { n, r } => (4, n, r),
            SamplerKind::Full => (5, 0, 0),
        };
        self.u8(tag);
        self.u64(a as u64);
        self.u64(b as u64);
        self.u64(cfg.seed);
        self.u8(cfg.induce as u8);
    }

    fn save(self, path: &Path) -> Result<()> {
        fs::write(path, self.buf).map_err(|e| Error::io(path, e))
    }
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            msg: msg.into(),
        }
    }

    fn open(path: &'a Path, buf: &'a [u8], kind: Kind, expected_hash: u64) -> Result<Self> {
        let mut r = Reader { path, buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.err("bad magic bytes"));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let k = r.u8()?;
        if k != kind as u8 {
            return Err(r.err(format!("artifact kind {k}, expected {}", kind as u8)));
        }
        let found = r.u64()?;
        if found != expected_hash {
            return Err(Error::GraphHashMismatch {
                expected: expected_hash,
                found,
            });
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err("truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(self.err(format!("invalid flag byte {b}"))),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| self.err("integer overflows usize"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Length prefix, checked against the bytes left so corrupt lengths
    /// fail before allocating.
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(self.err("length exceeds file size"));
        }
        Ok(n)
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }

    fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    fn reals<F: Scalar>(&mut self) -> Result<Vec<F>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64().map(F::of)).collect()
    }

    fn matrix<F: Scalar>(&mut self) -> Result<Array2<F>> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let n = rows.checked_mul(cols).ok_or_else(|| self.err("matrix too large"))?;
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(self.err("length exceeds file size"));
        }
        let data = (0..n).map(|_| self.f64().map(F::of)).collect::<Result<Vec<F>>>()?;
        Ok(Array2::from_shape_vec((rows, cols), data).expect("length checked"))
    }

    fn sampler(&mut self) -> Result<SamplerConfig> {
        let tag = self.u8()?;
        let a = self.usize()?;
        let b = self.usize()?;
        let kind = match tag {
            0 => SamplerKind::Node { n: a },
            1 => SamplerKind::Edge { m: a },
            2 => SamplerKind::EdgeIndependent { m: a },
            3 => SamplerKind::RandomWalk { r: a, h: b },
            4 => SamplerKind::MultiWalk { n: a, r: b },
            5 => SamplerKind::Full,
            t => return Err(self.err(format!("unknown sampler tag {t}"))),
        };
        let seed = self.u64()?;
        let induce = self.bool()?;
        Ok(SamplerConfig { kind, seed, induce })
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn save_subgraphs<F: Scalar>(path: &Path, g: &Graph<F>, cfg: &SamplerConfig, subgraphs: &[Subgraph]) -> Result<()> {
    let mut w = Writer::header(Kind::Subgraphs, graph_hash(g));
    w.sampler(cfg);
    w.u64(subgraphs.len() as u64);
    for s in subgraphs {
        w.usizes(s.nodes());
        w.usizes(s.row_offsets());
        w.usizes(s.col_indices());
        w.usizes(s.arc_origin());
        w.u64s(&s.multiplicity().iter().map(|&m| m as u64).collect::<Vec<_>>());
    }
    w.save(path)
}

pub fn load_subgraphs<F: Scalar>(path: &Path, g: &Graph<F>) -> Result<(SamplerConfig, Vec<Subgraph>)> {
    let buf = read(path)?;
    let mut r = Reader::open(path, &buf, Kind::Subgraphs, graph_hash(g))?;
    let cfg = r.sampler()?;
    let count = r.len(40)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let nodes = r.usizes()?;
        let row_offsets = r.usizes()?;
        let col_indices = r.usizes()?;
        let arc_origin = r.usizes()?;
        let multiplicity = r
            .u64s()?
            .into_iter()
            .map(|m| u32::try_from(m).map_err(|_| r.err("multiplicity overflows u32")))
            .collect::<Result<Vec<_>>>()?;
        if nodes.iter().any(|&v| v >= g.num_nodes()) || arc_origin.iter().any(|&a| a >= g.num_arcs()) {
            return Err(r.err("subgraph refers to nodes or arcs outside the graph"));
        }
        let s = Subgraph::from_parts(nodes, row_offsets, col_indices, arc_origin, multiplicity)
            .map_err(|e| r.err(e.to_string()))?;
        out.push(s);
    }
    r.finish()?;
    Ok((cfg, out))
}

/// Header of a coefficient cache: the sampler that produced it and `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoeffCacheInfo {
    pub sampler: SamplerConfig,
    pub presample: u64,
}

pub fn save_coeffs<F: Scalar>(path: &Path, g: &Graph<F>, info: &CoeffCacheInfo, coeffs: &NormCoeffs<F>) -> Result<()> {
    let mut w = Writer::header(Kind::Coeffs, graph_hash(g));
    w.sampler(&info.sampler);
    w.u64(info.presample);
    w.u8(match coeffs.source() {
        CoeffSource::Empirical => 0,
        CoeffSource::Analytic => 1,
    });
    w.reals(coeffs.alphas().iter().copied());
    w.reals(coeffs.lambdas().iter().copied());
    w.usizes(&coeffs.observed().iter().map(|&b| b as usize).collect::<Vec<_>>());
    match coeffs.counters() {
        None => w.u8(0),
        Some(c) => {
            w.u8(1);
            w.u64s(&c.node);
            w.u64s(&c.edge);
            w.u64(c.subgraphs);
        }
    }
    w.save(path)
}

/// Loads a coefficient cache, refusing it if it was built for a different
/// graph.
pub fn load_coeffs<F: Scalar>(path: &Path, g: &Graph<F>) -> Result<(CoeffCacheInfo, NormCoeffs<F>)> {
    let buf = read(path)?;
    let mut r = Reader::open(path, &buf, Kind::Coeffs, graph_hash(g))?;
    let info = CoeffCacheInfo {
        sampler: r.sampler()?,
        presample: r.u64()?,
    };
    let source = match r.u8()? {
        0 => CoeffSource::Empirical,
        1 => CoeffSource::Analytic,
        t => return Err(r.err(format!("unknown coefficient source {t}"))),
    };
    let alpha = r.reals()?;
    let lambda = r.reals()?;
    let observed = r
        .usizes()?
        .into_iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(r.err("invalid observed flag")),
        })
        .collect::<Result<Vec<_>>>()?;
    let counters = match r.bool()? {
        false => None,
        true => Some(Counters {
            node: r.u64s()?,
            edge: r.u64s()?,
            subgraphs: r.u64()?,
        }),
    };
    r.finish()?;
    let coeffs =
        NormCoeffs::from_parts(alpha, lambda, observed, counters, source).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    coeffs.check_graph(g)?;
    Ok((info, coeffs))
}

fn write_weights<F: Scalar>(w: &mut Writer, ms: &[Array2<F>]) {
    w.u64(ms.len() as u64);
    for m in ms {
        w.matrix(m);
    }
}

fn read_weights<F: Scalar>(r: &mut Reader<'_>) -> Result<Vec<Array2<F>>> {
    let n = r.len(16)?;
    (0..n).map(|_| r.matrix()).collect()
}

fn read_model<F: Scalar>(r: &mut Reader<'_>, head: Head) -> Result<Model<F>> {
    let weights = read_weights(r)?;
    Model::from_weights(weights, head).map_err(|e| r.err(e.to_string()))
}

/// Writes the complete training state: model, optimizer moments, dropout
/// RNG position, iteration counter, best model and metric log.
pub fn save_checkpoint<F: Scalar>(path: &Path, g: &Graph<F>, state: &TrainState<F>) -> Result<()> {
    let mut w = Writer::header(Kind::Checkpoint, graph_hash(g));
    w.u8(F::WIDTH);
    w.u8(match state.model.head() {
        Head::Softmax => 0,
        Head::Sigmoid => 1,
    });
    w.usizes(&state.model.dims());
    write_weights(&mut w, state.model.weights());
    write_weights(&mut w, &state.adam.m);
    write_weights(&mut w, &state.adam.v);
    w.u64(state.adam.step);
    w.buf.extend_from_slice(&state.dropout_rng.get_seed());
    w.u64(state.dropout_rng.get_stream());
    w.buf.extend_from_slice(&state.dropout_rng.get_word_pos().to_le_bytes());
    w.u64(state.iteration);
    match &state.best {
        None => w.u8(0),
        Some((f1, m)) => {
            w.u8(1);
            w.f64(*f1);
            write_weights(&mut w, m.weights());
        }
    }
    w.u64(state.log.len() as u64);
    for e in &state.log {
        w.u64(e.iteration);
        w.f64(e.loss);
        w.f64(e.val_f1);
    }
    w.f64(state.pending.0);
    w.u64(state.pending.1);
    w.u64(state.skipped);
    w.save(path)
}

pub fn load_checkpoint<F: Scalar>(path: &Path, g: &Graph<F>) -> Result<TrainState<F>> {
    let buf = read(path)?;
    let mut r = Reader::open(path, &buf, Kind::Checkpoint, graph_hash(g))?;
    let width = r.u8()?;
    if width != F::WIDTH {
        return Err(r.err(format!("checkpoint holds {}-byte reals, loader expects {}", width, F::WIDTH)));
    }
    let head = match r.u8()? {
        0 => Head::Softmax,
        1 => Head::Sigmoid,
        t => return Err(r.err(format!("unknown head {t}"))),
    };
    let dims = r.usizes()?;
    let model = read_model::<F>(&mut r, head)?;
    if model.dims() != dims {
        return Err(r.err("stored dims disagree with weight shapes"));
    }
    let m = read_weights(&mut r)?;
    let v = read_weights(&mut r)?;
    let step = r.u64()?;
    let shapes = |xs: &[Array2<F>]| xs.iter().map(|x| x.dim()).collect::<Vec<_>>();
    if shapes(&m) != shapes(model.weights()) || shapes(&v) != shapes(model.weights()) {
        return Err(r.err("optimizer state does not match the model"));
    }
    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
    let mut dropout_rng = StreamRng::from_seed(seed);
    dropout_rng.set_stream(stream);
    dropout_rng.set_word_pos(word_pos);
    let iteration = r.u64()?;
    let best = match r.bool()? {
        false => None,
        true => {
            let f1 = r.f64()?;
            Some((f1, read_model(&mut r, head)?))
        }
    };
    let n = r.len(24)?;
    let log = (0..n)
        .map(|_| {
            Ok(LogEntry {
                iteration: r.u64()?,
                loss: r.f64()?,
                val_f1: r.f64()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pending = (r.f64()?, r.u64()?);
    let skipped = r.u64()?;
    r.finish()?;
    Ok(TrainState {
        model,
        adam: AdamState { m, v, step },
        iteration,
        dropout_rng,
        best,
        log,
        pending,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::norm::{analytic_coeffs_edge, estimate_coeffs};

    fn graph() -> Graph<f64> {
        build_graph(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4)], 5, false).unwrap()
    }

    #[test]
    fn hash_depends_on_structure_and_loops() {
        let g = graph();
        assert_eq!(graph_hash(&g), graph_hash(&graph()));
        let loops: Graph<f64> = build_graph(g.edges(), 5, true).unwrap();
        assert_ne!(graph_hash(&g), graph_hash(&loops));
        let other: Graph<f64> = build_graph(&[(0, 1)], 5, false).unwrap();
        assert_ne!(graph_hash(&g), graph_hash(&other));
    }

    #[test]
    fn subgraph_cache_round_trip() {
        let g = graph();
        let cfg = SamplerConfig::new(SamplerKind::RandomWalk { r: 2, h: 2 }, 3);
        let (_, subs) = estimate_coeffs(&g, cfg, 25, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        save_subgraphs(&p, &g, &cfg, &subs).unwrap();
        let (c2, s2) = load_subgraphs(&p, &g).unwrap();
        assert_eq!((c2, s2), (cfg, subs.clone()));
        let bytes = fs::read(&p).unwrap();
        save_subgraphs(&p, &g, &cfg, &subs).unwrap();
        assert_eq!(fs::read(&p).unwrap(), bytes);
    }

    #[test]
    fn coefficient_cache_round_trip_and_hash_guard() {
        let g = graph();
        let cfg = SamplerConfig::new(SamplerKind::Edge { m: 3 }, 1);
        let (coeffs, _) = estimate_coeffs(&g, cfg, 40, 1).unwrap();
        let info = CoeffCacheInfo { sampler: cfg, presample: 40 };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        save_coeffs(&p, &g, &info, &coeffs).unwrap();
        let (i2, c2) = load_coeffs(&p, &g).unwrap();
        assert_eq!(i2, info);
        assert_eq!(c2, coeffs);

        let analytic = analytic_coeffs_edge(&g, 2).unwrap();
        save_coeffs(&p, &g, &info, &analytic).unwrap();
        assert_eq!(load_coeffs(&p, &g).unwrap().1, analytic);

        let other: Graph<f64> = build_graph(&[(0, 1), (1, 2), (2, 3), (3, 4)], 5, false).unwrap();
        assert!(matches!(load_coeffs(&p, &other), Err(Error::GraphHashMismatch { .. })));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = graph();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        fs::write(&p, b"NOPE").unwrap();
        assert!(matches!(load_subgraphs(&p, &g), Err(Error::Format { .. })));
        let cfg = SamplerConfig::new(SamplerKind::Full, 0);
        save_subgraphs(&p, &g, &cfg, &[]).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.push(0);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_subgraphs(&p, &g), Err(Error::Format { .. })));
        bytes.truncate(10);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_subgraphs(&p, &g), Err(Error::Format { .. })));
        assert!(matches!(load_coeffs(&dir.path().join("missing"), &g), Err(Error::Io { .. })));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let g = graph();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        save_subgraphs(&p, &g, &SamplerConfig::new(SamplerKind::Full, 0), &[]).unwrap();
        assert!(matches!(load_coeffs(&p, &g), Err(Error::Format { .. })));
    }
}
