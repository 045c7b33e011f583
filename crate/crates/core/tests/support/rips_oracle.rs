//! Naive persistence: every simplex of the full Rips complex up to
//! dimension 2, one dense boundary matrix, textbook left-to-right reduction.

use nalgebra::DMatrix;

pub fn naive_persistence(points: &DMatrix<f64>) -> Vec<(u8, f64, f64)> {
    let w = points.nrows();
    let dist = |a: usize, b: usize| (points.row(a) - points.row(b)).norm();

    // (value, dim, vertices)
    let mut simplices: Vec<(f64, usize, Vec<usize>)> = Vec::new();
    for a in 0..w {
        simplices.push((0.0, 0, vec![a]));
    }
    for a in 0..w {
        for b in a + 1..w {
            simplices.push((dist(a, b), 1, vec![a, b]));
        }
    }
    for a in 0..w {
        for b in a + 1..w {
            for c in b + 1..w {
                let v = dist(a, b).max(dist(a, c)).max(dist(b, c));
                simplices.push((v, 2, vec![a, b, c]));
            }
        }
    }
    simplices.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let position = |verts: &[usize]| {
        simplices
            .iter()
            .position(|s| s.2 == verts)
            .expect("face present")
    };
    let s = simplices.len();
    let mut matrix = vec![vec![false; s]; s];
    for (j, (_, dim, verts)) in simplices.iter().enumerate() {
        if *dim == 0 {
            continue;
        }
        for skip in 0..verts.len() {
            let face: Vec<usize> = verts
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &v)| v)
                .collect();
            matrix[j][position(&face)] = true;
        }
    }

    let low = |col: &[bool]| col.iter().rposition(|&x| x);
    let mut low_owner: Vec<Option<usize>> = vec![None; s];
    for j in 0..s {
        while let Some(l) = low(&matrix[j]) {
            match low_owner[l] {
                Some(k) => {
                    let other = matrix[k].clone();
                    for (x, y) in matrix[j].iter_mut().zip(other) {
                        *x ^= y;
                    }
                }
                None => {
                    low_owner[l] = Some(j);
                    break;
                }
            }
        }
    }

    let mut pairs = Vec::new();
    for i in 0..s {
        let (birth, dim, _) = &simplices[i];
        if *dim > 1 || low(&matrix[i]).is_some() {
            continue;
        }
        let death = match low_owner[i] {
            Some(j) => simplices[j].0,
            None => f64::INFINITY,
        };
        if death > *birth {
            pairs.push((*dim as u8, *birth, death));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    pairs
}

pub fn same_pairs(a: &[(u8, f64, f64)], b: &[(u8, f64, f64)], tol: f64) -> bool {
    let close = |x: f64, y: f64| (x.is_infinite() && x == y) || (x - y).abs() <= tol;
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(p, q)| p.0 == q.0 && close(p.1, q.1) && close(p.2, q.2))
}
