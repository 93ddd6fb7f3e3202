//! Pool-adjacent-violators projection onto the nonincreasing cone.

/// Projects `y` onto `{x : x[0] >= x[1] >= ... }` in the Euclidean norm.
pub fn project_decreasing(y: &[f64]) -> Vec<f64> {
    // blocks of (sum, count), merged while the later mean exceeds the earlier
    let mut sums: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        sums.push(v);
        counts.push(1);
        while sums.len() > 1 {
            let k = sums.len() - 1;
            if sums[k] / counts[k] as f64 > sums[k - 1] / counts[k - 1] as f64 {
                sums[k - 1] += sums[k];
                counts[k - 1] += counts[k];
                sums.pop();
                counts.pop();
            } else {
                break;
            }
        }
    }
    let mut x = Vec::with_capacity(y.len());
    for (s, c) in sums.iter().zip(&counts) {
        let mean = s / *c as f64;
        x.extend(std::iter::repeat_n(mean, *c));
    }
    x
}
