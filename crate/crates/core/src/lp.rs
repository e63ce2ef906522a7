//! Minimal phase-1 simplex used for linear feasibility questions
//! (core membership fallback). Dense tableau, Bland's rule.

/// Finds `x >= 0` with `A_ge x >= b_ge` and `A_eq x == b_eq`, or `None` if the
/// system is infeasible (within `tol`).
pub fn feasible_point(
    a_ge: &[Vec<f64>],
    b_ge: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
    tol: f64,
) -> Option<Vec<f64>> {
    let n = a_ge
        .first()
        .or_else(|| a_eq.first())
        .map(|r| r.len())
        .unwrap_or(0);
    let m = a_ge.len() + a_eq.len();
    if m == 0 {
        return Some(vec![0.0; n]);
    }

    // Columns: n structural, a_ge.len() surplus, m artificial.
    let n_surplus = a_ge.len();
    let cols = n + n_surplus + m;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (k, (a, &b)) in a_ge.iter().zip(b_ge).enumerate() {
        let mut row = vec![0.0; cols];
        row[..n].copy_from_slice(a);
        row[n + k] = -1.0;
        rows.push(row);
        rhs.push(b);
    }
    for (a, &b) in a_eq.iter().zip(b_eq) {
        let mut row = vec![0.0; cols];
        row[..n].copy_from_slice(a);
        rows.push(row);
        rhs.push(b);
    }
    // Make all rhs nonnegative, then attach artificials as the initial basis.
    for i in 0..m {
        if rhs[i] < 0.0 {
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
            rhs[i] = -rhs[i];
        }
        rows[i][n + n_surplus + i] = 1.0;
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n + n_surplus + i).collect();

    // Phase-1 objective: minimise the sum of artificials.
    let mut obj = vec![0.0; cols];
    let mut obj_val = 0.0;
    for i in 0..m {
        for j in 0..cols {
            obj[j] -= rows[i][j];
        }
        obj_val -= rhs[i];
    }
    for j in (n + n_surplus)..cols {
        obj[j] = 0.0;
    }

    let max_iter = 50 * (m + cols);
    for _ in 0..max_iter {
        // Bland: entering column = lowest index with negative reduced cost.
        let Some(pivot_col) = (0..cols).find(|&j| obj[j] < -tol) else {
            break;
        };
        let mut pivot_row: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if rows[i][pivot_col] > tol {
                let ratio = rhs[i] / rows[i][pivot_col];
                if ratio < best - tol || (ratio < best + tol && basis[i] < basis[pivot_row.unwrap_or(i)])
                {
                    best = ratio;
                    pivot_row = Some(i);
                }
            }
        }
        let Some(pr) = pivot_row else {
            break; // unbounded phase-1 cannot happen, bail defensively
        };
        let pivot = rows[pr][pivot_col];
        for v in rows[pr].iter_mut() {
            *v /= pivot;
        }
        rhs[pr] /= pivot;
        for i in 0..m {
            if i != pr && rows[i][pivot_col].abs() > 0.0 {
                let f = rows[i][pivot_col];
                for j in 0..cols {
                    rows[i][j] -= f * rows[pr][j];
                }
                rhs[i] -= f * rhs[pr];
            }
        }
        let f = obj[pivot_col];
        if f.abs() > 0.0 {
            for j in 0..cols {
                obj[j] -= f * rows[pr][j];
            }
            obj_val -= f * rhs[pr];
        }
        basis[pr] = pivot_col;
    }

    if obj_val < -tol {
        return None; // artificials could not be driven to zero
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = rhs[i];
        }
    }
    Some(x)
}
