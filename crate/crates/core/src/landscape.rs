//! Exact persistence landscapes.
//!
//! λ_k(t) is the k-th largest of the tent functions max(0, min(t − b, d − t))
//! over the finite pairs of one dimension. Levels are built with the
//! sorted-pairs sweep, so every vertex is exact; essential pairs are
//! ignored.

use std::path::Path;

use crate::homology::PersistenceDiagram;
use crate::{Error, Result};

pub const DEFAULT_LEVELS: usize = 2;

/// Compactly supported piecewise-linear function given by its vertices,
/// sorted by `t`; zero outside the first and last vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiecewiseLinear {
    vertices: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let v = &self.vertices;
        if v.is_empty() || t < v[0].0 || t > v[v.len() - 1].0 {
            return 0.0;
        }
        // first vertex strictly right of t
        let k = v.partition_point(|&(x, _)| x <= t);
        if k == 0 {
            return v[0].1;
        }
        if k == v.len() {
            return v[k - 1].1;
        }
        let (t0, y0) = v[k - 1];
        let (t1, y1) = v[k];
        if t1 == t0 {
            return y0.max(y1);
        }
        y0 + (y1 - y0) * (t - t0) / (t1 - t0)
    }

    fn push(&mut self, t: f64, value: f64) {
        if self.vertices.last() != Some(&(t, value)) {
            self.vertices.push((t, value));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceLandscape {
    pub dimension: u8,
    /// `levels[k - 1]` is λ_k.
    pub levels: Vec<PiecewiseLinear>,
}

impl PersistenceLandscape {
    /// λ_k for `k ≥ 1`; `None` past the last nonzero level.
    pub fn level(&self, k: usize) -> Option<&PiecewiseLinear> {
        k.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn eval(&self, k: usize, t: f64) -> f64 {
        self.level(k).map_or(0.0, |l| l.eval(t))
    }

    /// `level,t,value` rows, levels numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,t,value\n");
        for (i, level) in self.levels.iter().enumerate() {
            for &(t, v) in level.vertices() {
                out.push_str(&format!("{},{},{}\n", i + 1, t, v));
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn sorted_pairs(diagram: &PersistenceDiagram, dimension: u8) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = diagram
        .in_dim(dimension)
        .filter(|p| p.is_finite() && p.death > p.birth)
        .map(|p| (p.birth, p.death))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pairs
}

fn tent_peak(b: f64, d: f64) -> (f64, f64) {
    ((b + d) / 2.0, (d - b) / 2.0)
}

pub fn build_landscape(
    diagram: &PersistenceDiagram,
    dimension: u8,
    max_levels: usize,
) -> PersistenceLandscape {
    let mut pending = sorted_pairs(diagram, dimension);
    let mut levels = Vec::new();

    while !pending.is_empty() && levels.len() < max_levels {
        let mut level = PiecewiseLinear::default();
        let (b, mut d) = pending.remove(0);
        level.push(b, 0.0);
        let (t, v) = tent_peak(b, d);
        level.push(t, v);
        // pairs before `start` are dominated for the rest of this level
        let mut start = 0;
        loop {
            let Some(offset) = pending[start..].iter().position(|&(_, dd)| dd > d) else {
                level.push(d, 0.0);
                break;
            };
            let i = start + offset;
            let (nb, nd) = pending.remove(i);
            start = i;
            if nb > d {
                level.push(d, 0.0);
            }
            if nb >= d {
                level.push(nb, 0.0);
            } else {
                // crossing point; the lower part of the tent moves down a level
                level.push((nb + d) / 2.0, (d - nb) / 2.0);
                let key = (nb, d);
                let at = start
                    + pending[start..]
                        .partition_point(|&(pb, pd)| pb < key.0 || (pb == key.0 && pd >= key.1));
                pending.insert(at, key);
            }
            let (t, v) = tent_peak(nb, nd);
            level.push(t, v);
            d = nd;
        }
        levels.push(level);
    }
    PersistenceLandscape { dimension, levels }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LandscapeNorms {
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
    /// Leftmost point where `sup` is attained.
    pub argmax: f64,
}

/// Norms of λ_level; all zero when the level is absent.
pub fn landscape_norms(ls: &PersistenceLandscape, level: usize) -> LandscapeNorms {
    let Some(f) = ls.level(level) else {
        return LandscapeNorms::default();
    };
    let mut norms = LandscapeNorms::default();
    let mut l2_sq = 0.0;
    for w in f.vertices().windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        let dt = t1 - t0;
        norms.l1 += 0.5 * (v0 + v1) * dt;
        l2_sq += dt * (v0 * v0 + v0 * v1 + v1 * v1) / 3.0;
    }
    norms.l2 = l2_sq.sqrt();
    for &(t, v) in f.vertices() {
        if v > norms.sup {
            norms.sup = v;
            norms.argmax = t;
        }
    }
    norms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homology::PersistencePair;

    fn diagram(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_pairs(
            pairs
                .iter()
                .map(|&(birth, death)| PersistencePair {
                    dim: 1,
                    birth,
                    death,
                })
                .collect(),
        )
    }

    #[test]
    fn single_tent() {
        let ls = build_landscape(&diagram(&[(0.0, 2.0)]), 1, 2);
        assert_eq!(ls.levels.len(), 1);
        assert_eq!(
            ls.levels[0].vertices(),
            &[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]
        );
        assert!(ls.level(2).is_none());
        let n = landscape_norms(&ls, 1);
        assert_eq!((n.l1, n.sup, n.argmax), (1.0, 1.0, 1.0));
        assert!((n.l2 - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn overlapping_tents() {
        let ls = build_landscape(&diagram(&[(0.0, 2.0), (1.0, 3.0)]), 1, 5);
        assert_eq!(
            ls.levels[0].vertices(),
            &[(0.0, 0.0), (1.0, 1.0), (1.5, 0.5), (2.0, 1.0), (3.0, 0.0)]
        );
        assert_eq!(
            ls.levels[1].vertices(),
            &[(1.0, 0.0), (1.5, 0.5), (2.0, 0.0)]
        );
        let n = landscape_norms(&ls, 2);
        assert_eq!((n.l1, n.sup, n.argmax), (0.25, 0.5, 1.5));
        // λ₁ peaks twice at height 1; the left one counts
        assert_eq!(landscape_norms(&ls, 1).argmax, 1.0);
    }

    #[test]
    fn disjoint_tents_share_a_level() {
        let ls = build_landscape(&diagram(&[(0.0, 1.0), (2.0, 4.0)]), 1, 2);
        assert_eq!(ls.levels.len(), 1);
        assert_eq!(
            ls.levels[0].vertices(),
            &[
                (0.0, 0.0),
                (0.5, 0.5),
                (1.0, 0.0),
                (2.0, 0.0),
                (3.0, 1.0),
                (4.0, 0.0)
            ]
        );
        assert_eq!(ls.eval(1, 1.5), 0.0);
    }

    #[test]
    fn empty_and_absent_levels() {
        let ls = build_landscape(&PersistenceDiagram::default(), 0, 2);
        assert!(ls.levels.is_empty());
        assert_eq!(landscape_norms(&ls, 1), LandscapeNorms::default());
        let ls = build_landscape(&diagram(&[(0.0, 2.0)]), 1, 2);
        assert_eq!(landscape_norms(&ls, 5), LandscapeNorms::default());
    }

    #[test]
    fn essential_pairs_and_other_dimensions_ignored() {
        let mut pairs = vec![PersistencePair {
            dim: 1,
            birth: 1.0,
            death: f64::INFINITY,
        }];
        pairs.push(PersistencePair {
            dim: 0,
            birth: 0.0,
            death: 3.0,
        });
        let d = PersistenceDiagram::from_pairs(pairs);
        assert!(build_landscape(&d, 1, 2).levels.is_empty());
        assert_eq!(build_landscape(&d, 0, 2).levels.len(), 1);
    }

    #[test]
    fn max_levels_caps_output() {
        let ls = build_landscape(&diagram(&[(0.0, 4.0), (0.5, 3.5), (1.0, 3.0)]), 1, 2);
        assert_eq!(ls.levels.len(), 2);
        assert_eq!(ls.eval(2, 2.0), 1.5);
    }

    #[test]
    fn identical_pairs_stack() {
        let ls = build_landscape(&diagram(&[(0.0, 2.0), (0.0, 2.0)]), 1, 3);
        assert_eq!(ls.levels.len(), 2);
        assert_eq!(ls.levels[0], ls.levels[1]);
    }

    #[test]
    fn csv_layout() {
        let ls = build_landscape(&diagram(&[(0.0, 2.0), (1.0, 3.0)]), 1, 2);
        let csv = ls.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,t,value");
        assert_eq!(lines[1], "1,0,0");
        assert_eq!(lines[6], "2,1,0");
        assert_eq!(lines.len(), 9);
    }
}
