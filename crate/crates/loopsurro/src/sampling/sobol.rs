//! Sobol low-discrepancy sequence for up to 32 dimensions.
//!
//! Direction numbers follow the usual Joe–Kuo style tabulation: one row per
//! dimension with the primitive polynomial degree `s`, the interior
//! coefficient bits `a`, and the first `s` odd initial values `m`. Dimension
//! one is the van der Corput sequence in base 2. Points are generated in Gray
//! code order with 32 output bits.

pub const MAX_DIMENSIONS: usize = 32;

/// (degree, coefficient bits, initial m values) for dimensions 2..=32.
const DIRECTION_TABLE: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 1, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 1, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 1, 5, 5, 19, 61, 37]),
    (7, 21, &[1, 1, 3, 3, 25, 7, 35]),
    (7, 28, &[1, 1, 5, 15, 13, 9, 49]),
    (7, 31, &[1, 1, 1, 15, 3, 13, 9]),
    (7, 32, &[1, 3, 3, 3, 25, 17, 57]),
    (7, 37, &[1, 1, 3, 15, 29, 15, 41]),
    (7, 41, &[1, 3, 1, 9, 5, 21, 119]),
    (7, 42, &[1, 1, 3, 5, 33, 3, 117]),
];

const BITS: u32 = 32;

/// Direction vectors for one dimension, 32 entries.
fn direction_vectors(dim: usize) -> [u32; BITS as usize] {
    let mut v = [0u32; BITS as usize];
    if dim == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k as u32);
        }
        return v;
    }
    let (degree, coeffs, m_init) = DIRECTION_TABLE[dim - 1];
    let s = degree as usize;
    let mut m = vec![0u32; BITS as usize];
    m[..s].copy_from_slice(m_init);
    for k in s..BITS as usize {
        let mut value = m[k - s] ^ (m[k - s] << degree);
        for i in 1..s {
            if (coeffs >> (s - 1 - i)) & 1 == 1 {
                value ^= m[k - i] << i;
            }
        }
        m[k] = value;
    }
    for k in 0..BITS as usize {
        v[k] = m[k] << (BITS - 1 - k as u32);
    }
    v
}

/// Generates `n` points of the `dim`-dimensional sequence in the unit cube,
/// skipping the first `skip` points. Each point is written consecutively into
/// `out` (dimension-major within a point).
pub fn sobol_unit_points(dim: usize, n: usize, skip: usize, out: &mut Vec<f64>) {
    assert!(dim >= 1 && dim <= MAX_DIMENSIONS);
    let vectors: Vec<[u32; BITS as usize]> = (0..dim).map(direction_vectors).collect();
    let mut state = vec![0u32; dim];
    let scale = 1.0 / (1u64 << BITS) as f64;
    out.reserve(dim * n);

    // Point 0 is the all-zeros corner; successive points flip one direction
    // vector chosen by the lowest zero bit of the index.
    let total = skip + n;
    for i in 0..total {
        if i >= skip {
            for d in 0..dim {
                out.push(state[d] as f64 * scale);
            }
        }
        if i + 1 < total {
            let bit = (i as u64 + 1).trailing_zeros() as usize;
            for d in 0..dim {
                state[d] ^= vectors[d][bit];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(dim: usize, n: usize, skip: usize) -> Vec<Vec<f64>> {
        let mut flat = Vec::new();
        sobol_unit_points(dim, n, skip, &mut flat);
        flat.chunks(dim).map(|c| c.to_vec()).collect()
    }

    #[test]
    fn first_points_match_the_classic_sequence() {
        let pts = points(2, 8, 0);
        assert_eq!(pts[0], vec![0.0, 0.0]);
        assert_eq!(pts[1], vec![0.5, 0.5]);
        assert_eq!(pts[2], vec![0.75, 0.25]);
        assert_eq!(pts[3], vec![0.25, 0.75]);
        assert_eq!(pts[4], vec![0.375, 0.375]);
        assert_eq!(pts[5], vec![0.875, 0.875]);
        assert_eq!(pts[6], vec![0.625, 0.125]);
        assert_eq!(pts[7], vec![0.125, 0.625]);
    }

    #[test]
    fn skip_matches_offset_generation() {
        let all = points(5, 40, 0);
        let tail = points(5, 30, 10);
        assert_eq!(&all[10..], &tail[..]);
    }

    #[test]
    fn points_stay_in_unit_cube_for_high_dimensions() {
        for dim in [1, 2, 16, 32] {
            for p in points(dim, 500, 1) {
                assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn one_dimensional_prefix_is_balanced() {
        // Any 2^k prefix of the van der Corput sequence puts exactly one
        // point in each dyadic interval.
        let pts = points(1, 64, 0);
        let mut bins = [0usize; 64];
        for p in &pts {
            bins[(p[0] * 64.0) as usize] += 1;
        }
        assert!(bins.iter().all(|&b| b == 1));
    }
}
