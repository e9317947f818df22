//! Non-decreasing least-squares fits (pool adjacent violators).

/// Replaces `values` with its non-decreasing least-squares fit, equal weights.
pub fn pava_in_place(values: &mut [f64]) {
    if values.len() < 2 || values.windows(2).all(|w| w[0] <= w[1]) {
        return;
    }
    // Blocks as (sum, count), merged while their means decrease.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 > s1 / n1 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (sum, n) in blocks {
        let mean = sum / n as f64;
        values[i..i + n].fill(mean);
        i += n;
    }
}

/// Running maximum, making `values` non-decreasing from the left.
pub fn running_max_in_place(values: &mut [f64]) {
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
}
