use crate::channel::ChannelSet;
use crate::CMat;

/// Feature length for K users, N antennas and L² elements.
pub fn feature_dim(users: usize, antennas: usize, elements: usize) -> usize {
    2 * (users * antennas + users * elements + elements * antennas)
}

/// Real feature vector of a channel realization.
///
/// Blocks appear in the order `h_direct`, `g_ris`, `h_rb`. Each block is the
/// row-major real parts followed by the row-major imaginary parts.
pub fn flatten_features(ch: &ChannelSet) -> Vec<f64> {
    let mut out = Vec::with_capacity(feature_dim(
        ch.num_ues(),
        ch.num_antennas(),
        ch.ris_elements(),
    ));
    for m in [&ch.h_direct, &ch.g_ris, &ch.h_rb] {
        push_block(&mut out, m);
    }
    out
}

fn push_block(out: &mut Vec<f64>, m: &CMat) {
    for r in 0..m.nrows() {
        out.extend((0..m.ncols()).map(|c| m[(r, c)].re));
    }
    for r in 0..m.nrows() {
        out.extend((0..m.ncols()).map(|c| m[(r, c)].im));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::testutil::random_instance;
    use crate::C64;
    use nalgebra::DMatrix;

    fn zero_set(k: usize, n: usize, l2: usize) -> ChannelSet {
        ChannelSet {
            h_direct: DMatrix::zeros(k, n),
            g_ris: DMatrix::zeros(k, l2),
            h_rb: DMatrix::zeros(l2, n),
            direct_links: vec![Default::default(); k],
            ris_links: vec![Default::default(); k],
        }
    }

    #[test]
    fn dimension() {
        assert_eq!(feature_dim(3, 4, 400), 5624);
        assert_eq!(flatten_features(&zero_set(3, 4, 400)).len(), 5624);
        assert!(flatten_features(&zero_set(2, 2, 4))
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn real_channels_have_zero_imaginary_halves() {
        let (mut ch, _) = random_instance(4, 2, 3, 2);
        for m in [&mut ch.h_direct, &mut ch.g_ris, &mut ch.h_rb] {
            m.apply(|z| *z = C64::new(z.re, 0.0));
        }
        let f = flatten_features(&ch);
        let mut offset = 0;
        for len in [2 * 3, 2 * 4, 4 * 3] {
            assert!(f[offset..offset + len].iter().all(|&v| v != 0.0));
            assert!(f[offset + len..offset + 2 * len].iter().all(|&v| v == 0.0));
            offset += 2 * len;
        }
    }

    #[test]
    fn ordering_is_row_major() {
        let mut ch = zero_set(2, 2, 1);
        ch.h_direct[(0, 1)] = C64::new(1.0, 2.0);
        ch.h_direct[(1, 0)] = C64::new(3.0, 4.0);
        ch.h_rb[(0, 1)] = C64::new(5.0, 6.0);
        let f = flatten_features(&ch);
        assert_eq!(&f[..8], &[0.0, 1.0, 3.0, 0.0, 0.0, 2.0, 4.0, 0.0]);
        assert_eq!(&f[12..], &[0.0, 5.0, 0.0, 6.0]);
    }
}
