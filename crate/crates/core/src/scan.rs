//! The rank/magnitude scan shared by the matrix and symbol pseudometrics.
//!
//! Both `p_hat` (over singular values) and `p_m_hat` (over symbol samples)
//! reduce to the same computation on a non-increasing list of non-negative
//! reals `v_1 >= ... >= v_N`:
//!
//! ```text
//! min(1, min_{i=1..N} { (i-1)/N + v_i })
//! ```
//!
//! The cap is the virtual term `i = N + 1` with `v_{N+1} = 0`. Keeping a single
//! implementation makes the two pseudometrics agree bit-for-bit whenever they
//! are fed the same multiset.

/// Evaluates the capped scan on values already sorted non-increasing.
pub(crate) fn capped_scan(sorted_desc: &[f64]) -> f64 {
    debug_assert!(sorted_desc.windows(2).all(|w| w[0] >= w[1]));
    let len = sorted_desc.len() as f64;
    let mut best = 1.0_f64;
    for (i, &v) in sorted_desc.iter().enumerate() {
        let fraction = i as f64 / len;
        if fraction >= best {
            // every later term is at least `fraction`
            break;
        }
        let term = fraction + v;
        if term < best {
            best = term;
        }
    }
    best
}

/// Sorts non-increasing with a total order (inputs are finite).
pub(crate) fn sort_desc(values: &mut [f64]) {
    values.sort_unstable_by(|a, b| b.total_cmp(a));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mut best = 1.0_f64;
        for (i, &x) in v.iter().enumerate() {
            best = best.min(i as f64 / n + x);
        }
        best
    }

    #[test]
    fn early_exit_matches_full_scan() {
        let cases: Vec<Vec<f64>> = vec![
            vec![5.0, 0.0, 0.0, 0.0],
            vec![0.9, 0.8, 0.7, 0.1],
            vec![3.0, 3.0, 0.0, 0.0],
            vec![0.5; 10],
            vec![0.0],
            vec![7.0],
        ];
        for v in cases {
            assert_eq!(capped_scan(&v), brute(&v), "{v:?}");
        }
    }

    #[test]
    fn worked_values() {
        assert_eq!(capped_scan(&[5.0, 0.0, 0.0, 0.0]), 0.25);
        assert_eq!(capped_scan(&[5.0, 5.0, 5.0, 5.0]), 1.0);
        assert_eq!(capped_scan(&[3.0, 3.0, 0.0, 0.0]), 0.5);
        assert_eq!(capped_scan(&[0.0; 4]), 0.0);
    }
}
