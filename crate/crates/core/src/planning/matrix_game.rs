//! Zero-sum matrix game solver via linear programming.
//!
//! The game `max_x min_y x^T M y` is shifted so all entries are positive and
//! solved through the standard packing LP `max Σz s.t. M z ≤ 1, z ≥ 0`,
//! whose slack basis is immediately feasible. The optimal column strategy
//! comes from the primal solution and the row strategy from the duals read
//! off the final tableau. Bland's rule keeps the pivoting finite.

use crate::scalar::{real, Real};

/// Solution of a matrix game for the row maximizer.
#[derive(Debug, Clone)]
pub struct MatrixGameSolution<R> {
    pub value: R,
    pub row_strategy: Vec<R>,
    pub col_strategy: Vec<R>,
}

/// Minimax value and optimal mixed row strategy of `m` (row player
/// maximizes, column player minimizes).
pub fn matrix_game_solve<R: Real>(m: &[Vec<R>]) -> (R, Vec<R>) {
    let sol = matrix_game_solve_full(m);
    (sol.value, sol.row_strategy)
}

/// Full solution with both players' optimal mixed strategies.
pub fn matrix_game_solve_full<R: Real>(m: &[Vec<R>]) -> MatrixGameSolution<R> {
    let rows = m.len();
    let cols = m[0].len();
    assert!(rows > 0 && cols > 0, "matrix game must be non-empty");

    // Pure best responses suffice when either side has a single action.
    if rows == 1 {
        let (c, value) = argmin(&m[0]);
        let mut col_strategy = vec![R::zero(); cols];
        col_strategy[c] = R::one();
        return MatrixGameSolution {
            value,
            row_strategy: vec![R::one()],
            col_strategy,
        };
    }
    if cols == 1 {
        let column: Vec<R> = m.iter().map(|r| r[0]).collect();
        let (r, value) = argmax(&column);
        let mut row_strategy = vec![R::zero(); rows];
        row_strategy[r] = R::one();
        return MatrixGameSolution {
            value,
            row_strategy,
            col_strategy: vec![R::one()],
        };
    }

    // Shift all entries to at least one so the game value is positive.
    let min_entry = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(R::infinity(), |a, &b| if b < a { b } else { a });
    let shift = R::one() - min_entry;

    // Tableau for: max Σ_c z_c  s.t.  Σ_c (M[r][c]+shift) z_c ≤ 1.
    // Columns: z variables, then slacks, then the right-hand side.
    let width = cols + rows + 1;
    let mut tab: Vec<Vec<R>> = (0..rows)
        .map(|r| {
            let mut row = vec![R::zero(); width];
            for c in 0..cols {
                row[c] = m[r][c] + shift;
            }
            row[cols + r] = R::one();
            row[width - 1] = R::one();
            row
        })
        .collect();
    // Objective row holds reduced costs (for a max problem we pivot while
    // any is positive).
    let mut obj = vec![R::zero(); width];
    for c in 0..cols {
        obj[c] = R::one();
    }
    let mut basis: Vec<usize> = (0..rows).map(|r| cols + r).collect();

    let eps = R::epsilon() * real::<R>(1e4);
    let max_pivots = 200 * (rows + cols).max(16);
    for _ in 0..max_pivots {
        // Bland's rule: smallest-index column with positive reduced cost.
        let Some(enter) = (0..cols + rows).find(|&c| obj[c] > eps) else {
            break;
        };
        // Ratio test; ties resolved toward the smallest basis index.
        let mut leave: Option<usize> = None;
        let mut best = R::infinity();
        for r in 0..rows {
            if tab[r][enter] > eps {
                let ratio = tab[r][width - 1] / tab[r][enter];
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        ratio < best - eps || (ratio < best + eps && basis[r] < basis[cur])
                    }
                };
                if better {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(leave) = leave else {
            break; // unbounded cannot happen with positive entries
        };
        pivot(&mut tab, &mut obj, leave, enter);
        basis[leave] = enter;
    }

    // Primal solution (column strategy, unnormalized).
    let mut z = vec![R::zero(); cols];
    for (r, &b) in basis.iter().enumerate() {
        if b < cols {
            z[b] = tab[r][width - 1];
        }
    }
    // Duals from the slack reduced costs (row strategy, unnormalized).
    let y: Vec<R> = (0..rows).map(|r| -obj[cols + r]).collect();

    let total: R = z.iter().copied().sum();
    let value = R::one() / total - shift;
    let norm = |v: Vec<R>| -> Vec<R> {
        let s: R = v.iter().copied().sum();
        v.into_iter().map(|x| (x / s).max(R::zero())).collect()
    };
    MatrixGameSolution {
        value,
        row_strategy: norm(y),
        col_strategy: norm(z),
    }
}

fn pivot<R: Real>(tab: &mut [Vec<R>], obj: &mut [R], leave: usize, enter: usize) {
    let width = obj.len();
    let inv = R::one() / tab[leave][enter];
    for c in 0..width {
        tab[leave][c] = tab[leave][c] * inv;
    }
    for r in 0..tab.len() {
        if r != leave {
            let factor = tab[r][enter];
            if factor != R::zero() {
                for c in 0..width {
                    tab[r][c] = tab[r][c] - factor * tab[leave][c];
                }
            }
        }
    }
    let factor = obj[enter];
    if factor != R::zero() {
        for c in 0..width {
            obj[c] = obj[c] - factor * tab[leave][c];
        }
    }
}

fn argmin<R: Real>(xs: &[R]) -> (usize, R) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

fn argmax<R: Real>(xs: &[R]) -> (usize, R) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}
