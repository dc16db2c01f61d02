//! Deterministic seed derivation.
//!
//! Every stochastic task derives its generator from a root seed plus the
//! task's coordinates, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with task coordinates into a new seed.
pub fn derive_seed(root: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(root), |acc, &c| splitmix64(acc ^ splitmix64(c.wrapping_add(0xA24B_AED4_963E_E407))))
}

pub fn rng_from(root: u64, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(root, coords))
}

/// Standard normal draw converted to the working scalar type.
#[inline]
pub fn std_normal<T: crate::Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
    T::lit(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derived_streams_are_distinct_and_stable() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[]), derive_seed(8, &[]));
        let a = rng_from(3, &[0]).next_u64();
        let b = rng_from(3, &[0]).next_u64();
        assert_eq!(a, b);
    }
}
