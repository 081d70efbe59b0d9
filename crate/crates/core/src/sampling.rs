//! Deterministic random sampling helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::group::{norm, HorizontalVector, Point};

/// Generator derived from a master seed and a stream label, so independent
/// consumers never share a stream.
pub fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h.rotate_left(17))
}

/// Uniform random unit vector in `R^dim`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let l = norm(&v);
        if l > 1e-12 {
            return v.into_iter().map(|x| x / l).collect();
        }
    }
}

pub fn unit_horizontal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HorizontalVector {
    HorizontalVector::raw(unit_vector(rng, 2 * n))
}

/// Uniform point of the box `[-h, h]^{2n} x [-v, v]`.
pub fn box_point<R: Rng + ?Sized>(rng: &mut R, n: usize, h: f64, v: f64) -> Point {
    let horiz = (0..2 * n).map(|_| rng.gen_range(-h..=h)).collect();
    Point::raw(horiz, rng.gen_range(-v..=v))
}
