use nalgebra::{Complex, RealField};
use num_traits::{FloatConst, FromPrimitive};

/// Real scalar type the exterior algebra and the twisted complex are generic over.
pub trait Real: RealField + Copy + FloatConst + FromPrimitive + Send + Sync {
    /// Tolerance for identities that hold exactly in exact arithmetic.
    fn identity_tolerance() -> Self;
    /// Relative threshold below which a Laplacian eigenvalue counts as zero.
    fn kernel_tolerance() -> Self;
}

impl Real for f64 {
    fn identity_tolerance() -> f64 {
        1e-12
    }
    fn kernel_tolerance() -> f64 {
        1e-9
    }
}

impl Real for f32 {
    fn identity_tolerance() -> f32 {
        5e-5
    }
    fn kernel_tolerance() -> f32 {
        1e-4
    }
}

pub type Cx<T> = Complex<T>;

#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite f64")
}

#[inline]
pub fn cx<T: Real>(re: f64, im: f64) -> Cx<T> {
    Complex::new(real(re), real(im))
}

#[inline]
pub fn from_real<T: Real>(x: T) -> Cx<T> {
    Complex::new(x, T::zero())
}

/// `i^k` for any integer `k`.
pub fn i_pow<T: Real>(k: i64) -> Cx<T> {
    match k.rem_euclid(4) {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// `(-1)^k`.
#[inline]
pub fn parity_sign(k: usize) -> i32 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn to_f64<T: Real>(x: T) -> f64 {
    nalgebra::try_convert::<T, f64>(x).unwrap_or(f64::NAN)
}

/// Modulus and argument for `Complex<T>` without a `num_traits::Float` bound.
pub trait CxOps<T> {
    fn norm(&self) -> T;
    fn arg(&self) -> T;
}

impl<T: Real> CxOps<T> for Complex<T> {
    #[inline]
    fn norm(&self) -> T {
        nalgebra::ComplexField::modulus(*self)
    }
    #[inline]
    fn arg(&self) -> T {
        nalgebra::ComplexField::argument(*self)
    }
}
