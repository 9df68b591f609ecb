//! Exact Euclidean distance transform (Felzenszwalb–Huttenlocher lower
//! envelope of parabolas, applied per column then per row).

/// Squared Euclidean distance from every pixel to the nearest `true` pixel of
/// `seeds` (row-major, `width × height`). Pixels are at +∞ when there is no
/// seed at all.
pub fn squared_edt(width: usize, height: usize, seeds: &[bool]) -> Vec<f64> {
    assert_eq!(seeds.len(), width * height);
    let mut grid: Vec<f64> = seeds
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let mut f = vec![0.0; width.max(height)];
    let mut out = vec![0.0; width.max(height)];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        transform_1d(&f[..height], &mut out[..height]);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        transform_1d(&f[..width], &mut out[..width]);
        row.copy_from_slice(&out[..width]);
    }
    grid
}

fn transform_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        d.fill(f64::INFINITY);
        return;
    }
    // Vertices of the lower envelope and the boundaries between them.
    let mut v = Vec::with_capacity(finite.len());
    let mut z: Vec<f64> = Vec::with_capacity(finite.len() + 1);
    let intersect = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for &q in &finite {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = intersect(q, p);
                    if s <= z[z.len() - 1] {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            continue;
                        }
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    z.push(f64::INFINITY);
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(width: usize, height: usize, seeds: &[bool]) -> Vec<f64> {
        let pts: Vec<(f64, f64)> = (0..seeds.len())
            .filter(|&i| seeds[i])
            .map(|i| ((i % width) as f64, (i / width) as f64))
            .collect();
        (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                pts.iter()
                    .map(|(a, b)| (x - a).powi(2) + (y - b).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn empty_seeds_are_infinite() {
        assert!(squared_edt(3, 2, &[false; 6]).iter().all(|d| d.is_infinite()));
    }

    proptest! {
        #[test]
        fn matches_brute_force(w in 1usize..12, h in 1usize..12, bits in proptest::collection::vec(proptest::bool::weighted(0.15), 144)) {
            let seeds = &bits[..w * h];
            prop_assert_eq!(squared_edt(w, h, seeds), brute(w, h, seeds));
        }
    }
}
