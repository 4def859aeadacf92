use super::linalg::RealMatrix;

/// Average ranks (1-based) of a slice; tied values share the mean of the
/// ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Replaces every column by its average ranks.
pub fn rank_transform(columns: &RealMatrix) -> RealMatrix {
    let ranked: Vec<Vec<f64>> = (0..columns.cols())
        .map(|j| average_ranks(&columns.column(j)))
        .collect();
    RealMatrix::from_columns(&ranked).expect("ranks of a valid matrix are a valid matrix")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_and_tied_ranks() {
        assert_eq!(average_ranks(&[3.1, 1.0, 2.5]), vec![3.0, 1.0, 2.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 1.0]), vec![2.5, 2.5, 1.0]);
        assert_eq!(average_ranks(&[2.0, 2.0, 2.0, 2.0]), vec![2.5; 4]);
        assert_eq!(average_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn matrix_columns_ranked_independently() {
        let m = RealMatrix::from_rows(&[vec![1.0, 9.0], vec![3.0, 7.0], vec![2.0, 8.0]]).unwrap();
        let r = rank_transform(&m);
        assert_eq!(r.column(0), vec![1.0, 3.0, 2.0]);
        assert_eq!(r.column(1), vec![3.0, 1.0, 2.0]);
    }
}
