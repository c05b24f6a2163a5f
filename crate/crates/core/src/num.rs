//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable for means, posteriors and regret.
///
/// Implemented for `f32` and `f64`. The sampling hooks live on the trait
/// because `rand_distr` bounds (`StandardNormal: Distribution<F>` and
/// friends) do not propagate through supertrait where-clauses.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Uniform draw on `[0, 1)`.
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from `Normal(0, 1)`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from `Beta(a, b)`; both shape parameters must be positive.
    fn beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self {
                Beta::new(a, b)
                    .expect("beta shape parameters must be positive")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_of<T: Real>(n: usize, mut f: impl FnMut() -> T) -> f64 {
        (0..n).map(|_| f().to_f64_lossy()).sum::<f64>() / n as f64
    }

    #[test]
    fn beta_mean_matches_shape_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = mean_of(20_000, || f64::beta(2.0, 6.0, &mut rng));
        assert!((m - 0.25).abs() < 0.01, "{m}");
        let m32 = mean_of(20_000, || f32::beta(6.0, 2.0, &mut rng));
        assert!((m32 - 0.75).abs() < 0.01, "{m32}");
    }

    #[test]
    fn uniform_stays_in_half_open_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let u = f64::uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
