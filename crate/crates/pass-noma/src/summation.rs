//! Pairwise summation for probability averages whose terms span many orders
//! of magnitude.

pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        3 => (values[0] + values[1]) + values[2],
        4 => (values[0] + values[1]) + (values[2] + values[3]),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_sequential_on_small_inputs() {
        let v = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert!((pairwise_sum(&v) - 1.5).abs() < 1e-15);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[2.5]), 2.5);
    }

    #[test]
    fn stable_across_magnitudes() {
        // 1 followed by many tiny terms; sequential summation in this order
        // loses them, pairwise keeps them.
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-18, 1 << 16));
        let s = pairwise_sum(&v);
        assert!((s - (1.0 + 65536.0 * 1e-18)).abs() < 1e-16);
    }
}
