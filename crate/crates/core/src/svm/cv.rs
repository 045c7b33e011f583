use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, fit_scaler, train_scaled, EvalReport, Kernel, TrainOptions};
use crate::io::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub kernel: Kernel,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: GridCell,
    /// In grid order.
    pub cells: Vec<CellResult>,
}

fn class_indices(y: &[Label]) -> Result<[Vec<usize>; 2]> {
    let mut classes = [Vec::new(), Vec::new()];
    for (i, l) in y.iter().enumerate() {
        match l {
            Label::Background => classes[0].push(i),
            Label::Ied => classes[1].push(i),
            Label::Unlabeled => return Err(Error::Config(format!("sample {i} is unlabeled"))),
        }
    }
    Ok(classes)
}

/// Held-out index sets of `k` stratified folds. Each class is shuffled
/// and dealt round-robin, continuing where the previous class stopped.
pub fn stratified_folds(y: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let classes = class_indices(y)?;
    for (name, members) in ["BACKGROUND", "IED"].iter().zip(&classes) {
        if members.len() < k {
            return Err(Error::Config(format!(
                "class {name} has {} samples, fewer than {k} folds",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in classes {
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified `(train, eval)` index split; each class sends
/// `round(n · eval_fraction)` samples to evaluation.
pub fn stratified_split(
    y: &[Label],
    eval_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Config(format!(
            "evaluation fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for mut members in class_indices(y)? {
        members.shuffle(&mut rng);
        let n = members.len();
        let mut take = (n as f64 * eval_fraction).round() as usize;
        if n > 1 {
            take = take.clamp(1, n - 1);
        }
        eval.extend_from_slice(&members[..take.min(n)]);
        train.extend_from_slice(&members[take.min(n)..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    Ok((train, eval))
}

/// `1 / (d · v)`, where v is the mean column variance after scaling and d
/// the feature count; `1 / d` when every column is constant.
pub fn scale_gamma(x: &DMatrix<f64>) -> Result<f64> {
    let scaled = fit_scaler(x)?.apply(x);
    let (s, d) = scaled.shape();
    let mean_var = scaled
        .column_iter()
        .map(|c| {
            let m = c.sum() / s as f64;
            c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s as f64
        })
        .sum::<f64>()
        / d as f64;
    Ok(if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    })
}

/// C ∈ {0.1, 1, 10, 100} crossed with LINEAR and RBF for
/// γ ∈ {[`scale_gamma`], 0.01, 0.1}.
pub fn default_grid(x: &DMatrix<f64>) -> Result<Vec<GridCell>> {
    let kernels = [
        Kernel::Linear,
        Kernel::Rbf {
            gamma: scale_gamma(x)?,
        },
        Kernel::Rbf { gamma: 0.01 },
        Kernel::Rbf { gamma: 0.1 },
    ];
    let mut grid = Vec::new();
    for c in [0.1, 1.0, 10.0, 100.0] {
        for kernel in kernels {
            grid.push(GridCell { kernel, c });
        }
    }
    Ok(grid)
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
}

/// Orders cells by preference when mean accuracies tie.
fn tie_rank(a: &GridCell, b: &GridCell) -> std::cmp::Ordering {
    let kernel_key = |k: &Kernel| match *k {
        Kernel::Linear => (0, 0.0),
        Kernel::Rbf { gamma } => (1, gamma),
    };
    let (ka, kb) = (kernel_key(&a.kernel), kernel_key(&b.kernel));
    a.c.total_cmp(&b.c)
        .then(ka.0.cmp(&kb.0))
        .then(ka.1.total_cmp(&kb.1))
}

/// Grid search with stratified k-fold cross-validation. The scaler is
/// refit on the training part of every fold. Folds and kernels train in
/// parallel; results do not depend on scheduling.
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &[Label],
    grid: &[GridCell],
    folds: usize,
    seed: u64,
    opts: &TrainOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    for cell in grid {
        check_training_set(x, y, cell.c)?;
    }
    let fold_sets = stratified_folds(y, folds, seed)?;

    let mut kernels: Vec<Kernel> = Vec::new();
    for cell in grid {
        if !kernels.contains(&cell.kernel) {
            kernels.push(cell.kernel);
        }
    }
    let jobs: Vec<(usize, usize)> = (0..folds)
        .flat_map(|f| (0..kernels.len()).map(move |k| (f, k)))
        .collect();

    // (fold, cell index, accuracy, converged)
    let outcomes: Vec<Vec<(usize, usize, f64, bool)>> = jobs
        .par_iter()
        .map(|&(f, k)| -> Result<Vec<(usize, usize, f64, bool)>> {
            let held = &fold_sets[f];
            let train_idx: Vec<usize> = (0..y.len())
                .filter(|i| held.binary_search(i).is_err())
                .collect();
            let x_train = rows(x, &train_idx);
            let y_train: Vec<Label> = train_idx.iter().map(|&i| y[i]).collect();
            let signs = super::sign_labels(&y_train)?;
            if !(signs.contains(&1.0) && signs.contains(&-1.0)) {
                return Err(Error::Config(format!(
                    "fold {f} training part lacks a class"
                )));
            }
            let scaler = fit_scaler(&x_train)?;
            let scaled = scaler.apply(&x_train);
            let gram = kernels[k].matrix(&scaled);
            let x_test = rows(x, held);
            let y_test: Vec<Label> = held.iter().map(|&i| y[i]).collect();
            let mut out = Vec::new();
            for (ci, cell) in grid
                .iter()
                .enumerate()
                .filter(|(_, c)| c.kernel == kernels[k])
            {
                let model = train_scaled(
                    &scaled,
                    &signs,
                    &gram,
                    cell.kernel,
                    cell.c,
                    scaler.clone(),
                    opts,
                );
                let report = EvalReport::from_predictions(&y_test, &model.predict(&x_test)?)?;
                out.push((f, ci, report.accuracy, model.converged));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut per_cell = vec![vec![0.0; folds]; grid.len()];
    let mut converged = vec![true; grid.len()];
    for (f, ci, acc, ok) in outcomes.into_iter().flatten() {
        per_cell[ci][f] = acc;
        converged[ci] &= ok;
    }
    let cells: Vec<CellResult> = grid
        .iter()
        .zip(per_cell)
        .zip(converged)
        .map(|((&cell, fold_accuracies), all_converged)| CellResult {
            cell,
            mean_accuracy: fold_accuracies.iter().sum::<f64>() / folds as f64,
            fold_accuracies,
            all_converged,
        })
        .collect();
    let best = cells
        .iter()
        .max_by(|a, b| {
            a.mean_accuracy
                .total_cmp(&b.mean_accuracy)
                .then_with(|| tie_rank(&b.cell, &a.cell))
        })
        .expect("nonempty grid")
        .cell;
    Ok(CvResult { best, cells })
}
