//! Vietoris–Rips persistent homology in dimensions 0 and 1.
//!
//! Filtration values follow the diameter convention: a simplex enters at
//! the length of its longest edge. H0 comes from a union-find sweep over
//! the sorted edges; H1 from a Z/2 reduction over triangles generated on
//! demand. Triangles are ordered by their longest edge in edge order and
//! then by the opposite vertex.

mod union_find;

pub use union_find::UnionFind;

use std::cmp::Ordering;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub length: f64,
}

/// Edges of the Rips complex up to `max_length`, sorted by
/// `(length, i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RipsFiltration {
    pub edges: Vec<Edge>,
    pub point_count: usize,
    pub max_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub dim: u8,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
}

impl PersistencePair {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }

    fn order(&self, other: &Self) -> Ordering {
        self.dim
            .cmp(&other.dim)
            .then(self.birth.total_cmp(&other.birth))
            .then(self.death.total_cmp(&other.death))
    }
}

/// Birth–death pairs sorted by `(dim, birth, death)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PersistenceDiagram {
    pairs: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    pub fn from_pairs(mut pairs: Vec<PersistencePair>) -> Self {
        pairs.sort_by(PersistencePair::order);
        PersistenceDiagram { pairs }
    }

    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    pub fn in_dim(&self, dim: u8) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    /// Finite pairs of one dimension.
    pub fn finite(&self, dim: u8) -> Vec<PersistencePair> {
        self.in_dim(dim)
            .filter(|p| p.is_finite())
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `dim,birth,death` rows; essential classes have death `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,birth,death\n");
        for p in &self.pairs {
            let death = if p.death.is_finite() {
                p.death.to_string()
            } else {
                "inf".to_string()
            };
            out.push_str(&format!("{},{},{}\n", p.dim, p.birth, death));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.trim() == "dim,birth,death" => {}
            _ => {
                return Err(Error::parse(
                    "row 0",
                    "diagram header must be dim,birth,death",
                ))
            }
        }
        for (i, line) in lines.enumerate() {
            let row = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(format!("row {row}"), "expected 3 fields"));
            }
            let bad = |c: usize| Error::parse(format!("row {row}, column {c}"), "not a number");
            let dim: u8 = fields[0].parse().map_err(|_| bad(1))?;
            let birth: f64 = fields[1].parse().map_err(|_| bad(2))?;
            let death: f64 = match fields[2] {
                "inf" => f64::INFINITY,
                f => f.parse().map_err(|_| bad(3))?,
            };
            pairs.push(PersistencePair { dim, birth, death });
        }
        Ok(PersistenceDiagram::from_pairs(pairs))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// All pairwise Euclidean distances between the rows of `points` that do
/// not exceed `max_length` (default: no limit, i.e. the cloud diameter).
pub fn build_filtration(points: &DMatrix<f64>, max_length: Option<f64>) -> Result<RipsFiltration> {
    let (w, n) = points.shape();
    if w < 1 || n < 1 {
        return Err(Error::Data(format!("point cloud is {w} x {n}")));
    }
    if w > u32::MAX as usize / 2 {
        return Err(Error::Data(format!("{w} points exceed the supported size")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("point cloud has non-finite coordinates".into()));
    }
    if let Some(limit) = max_length {
        if limit.is_nan() || limit < 0.0 {
            return Err(Error::Config(format!(
                "max filtration length {limit} is invalid"
            )));
        }
    }
    let limit = max_length.unwrap_or(f64::INFINITY);

    let mut edges = Vec::with_capacity(w * (w - 1) / 2);
    for i in 0..w {
        for j in i + 1..w {
            let mut sq = 0.0;
            for c in 0..n {
                let d = points[(i, c)] - points[(j, c)];
                sq += d * d;
            }
            let length = sq.sqrt();
            if length <= limit {
                edges.push(Edge {
                    i: i as u32,
                    j: j as u32,
                    length,
                });
            }
        }
    }
    edges.sort_by(|a, b| {
        a.length
            .total_cmp(&b.length)
            .then(a.i.cmp(&b.i))
            .then(a.j.cmp(&b.j))
    });
    let max_length = match max_length {
        Some(l) => l,
        None => edges.last().map_or(0.0, |e| e.length),
    };
    Ok(RipsFiltration {
        edges,
        point_count: w,
        max_length,
    })
}

const NO_EDGE: u32 = u32::MAX;

/// XOR of two sorted lists.
fn symmetric_difference<T: Ord + Copy>(a: &[T], b: &[T], out: &mut Vec<T>) {
    out.clear();
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            Ordering::Equal => {
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
}

/// Dense edge lookup plus triangle keys. A triangle is keyed by
/// `longest_edge * W + opposite_vertex`, which orders triangles by
/// diameter with deterministic ties.
struct EdgeTable {
    w: usize,
    index: Vec<u32>,
}

impl EdgeTable {
    fn new(w: usize, edges: &[Edge]) -> Self {
        let mut index = vec![NO_EDGE; w * w];
        for (e, edge) in edges.iter().enumerate() {
            let (i, j) = (edge.i as usize, edge.j as usize);
            index[i * w + j] = e as u32;
            index[j * w + i] = e as u32;
        }
        EdgeTable { w, index }
    }

    /// Sorted keys of the triangles having edge `f = (i, j)` as a face.
    fn coboundary(&self, f: u32, i: usize, j: usize, out: &mut Vec<u64>) {
        out.clear();
        let w = self.w;
        for k in 0..w {
            let a = self.index[i * w + k];
            let b = self.index[j * w + k];
            if a == NO_EDGE || b == NO_EDGE || k == i || k == j {
                continue;
            }
            let (top, opposite) = if f > a && f > b {
                (f, k)
            } else if a > b {
                (a, j)
            } else {
                (b, i)
            };
            out.push(top as u64 * w as u64 + opposite as u64);
        }
        out.sort_unstable();
    }

    fn longest_edge(&self, key: u64) -> usize {
        (key / self.w as u64) as usize
    }
}

/// A coboundary column held as a sum of edge coboundaries, merged
/// lazily through a heap so entries past the pivot are never touched.
struct WorkingColumn {
    sources: Vec<Vec<u64>>,
    heap: BinaryHeap<Reverse<(u64, usize, usize)>>,
}

impl WorkingColumn {
    fn new() -> Self {
        WorkingColumn {
            sources: Vec::new(),
            heap: BinaryHeap::new(),
        }
    }

    fn clear(&mut self) {
        self.sources.clear();
        self.heap.clear();
    }

    fn add(&mut self, table: &EdgeTable, edges: &[Edge], f: u32) {
        let edge = edges[f as usize];
        let mut keys = Vec::new();
        table.coboundary(f, edge.i as usize, edge.j as usize, &mut keys);
        if let Some(&first) = keys.first() {
            self.heap.push(Reverse((first, self.sources.len(), 0)));
            self.sources.push(keys);
        }
    }

    fn pop(&mut self) -> Option<u64> {
        let Reverse((key, src, pos)) = self.heap.pop()?;
        if let Some(&next) = self.sources[src].get(pos + 1) {
            self.heap.push(Reverse((next, src, pos + 1)));
        }
        Some(key)
    }

    /// Smallest key with odd multiplicity. Cancelled pairs below it are
    /// discarded; the pivot itself stays in the column.
    fn pivot(&mut self) -> Option<u64> {
        while let Some(key) = self.pop() {
            let mut count = 1;
            while matches!(self.heap.peek(), Some(Reverse((k, _, _))) if *k == key) {
                self.pop();
                count += 1;
            }
            if count % 2 == 1 {
                self.heap.push(Reverse((key, self.sources.len(), 0)));
                self.sources.push(vec![key]);
                return Some(key);
            }
        }
        None
    }
}

/// Persistence pairs of dimensions 0 and 1 with zero-persistence pairs
/// dropped.
///
/// H1 is read off the coboundary matrix (edges against triangles), which
/// yields the same pairs as reducing the triangle boundary matrix but
/// needs one column per edge instead of one per triangle. Columns run in
/// reverse filtration order; edges that merge components are cleared.
pub fn persistence(filt: &RipsFiltration) -> PersistenceDiagram {
    let w = filt.point_count;
    let edges = &filt.edges;
    let mut pairs = Vec::new();
    if w == 0 {
        return PersistenceDiagram::default();
    }

    let mut uf = UnionFind::new(w);
    let mut positive = vec![false; edges.len()];
    let mut components = w;
    for (e, edge) in edges.iter().enumerate() {
        if uf.union(edge.i, edge.j) {
            components -= 1;
            if edge.length > 0.0 {
                pairs.push(PersistencePair {
                    dim: 0,
                    birth: 0.0,
                    death: edge.length,
                });
            }
        } else {
            positive[e] = true;
        }
    }
    for _ in 0..components {
        pairs.push(PersistencePair {
            dim: 0,
            birth: 0.0,
            death: f64::INFINITY,
        });
    }

    let table = EdgeTable::new(w, edges);
    // pivot triangle -> edges whose coboundaries sum to the reduced column
    let mut pivots: HashMap<u64, Vec<u32>> = HashMap::new();
    let mut column = WorkingColumn::new();
    let mut combination: Vec<u32> = Vec::new();
    let mut scratch = Vec::new();
    for f in (0..edges.len()).rev() {
        if !positive[f] {
            continue;
        }
        let edge = edges[f];
        column.clear();
        column.add(&table, edges, f as u32);
        combination.clear();
        combination.push(f as u32);
        loop {
            let Some(low) = column.pivot() else {
                pairs.push(PersistencePair {
                    dim: 1,
                    birth: edge.length,
                    death: f64::INFINITY,
                });
                break;
            };
            match pivots.get(&low) {
                Some(other) => {
                    for &g in other {
                        column.add(&table, edges, g);
                    }
                    symmetric_difference(&combination, other, &mut scratch);
                    std::mem::swap(&mut combination, &mut scratch);
                }
                None => {
                    let death = edges[table.longest_edge(low)].length;
                    if death > edge.length {
                        pairs.push(PersistencePair {
                            dim: 1,
                            birth: edge.length,
                            death,
                        });
                    }
                    pivots.insert(low, combination.clone());
                    break;
                }
            }
        }
    }
    PersistenceDiagram::from_pairs(pairs)
}

/// Filtration and persistence of a point cloud in one call.
pub fn rips_persistence(
    points: &DMatrix<f64>,
    max_length: Option<f64>,
) -> Result<PersistenceDiagram> {
    Ok(persistence(&build_filtration(points, max_length)?))
}
