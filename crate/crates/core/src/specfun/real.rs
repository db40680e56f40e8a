//! Scalar abstraction shared by the double-precision and the multi-limb
//! evaluation paths of the closed-form ASER.
//!
//! The closed forms are alternating sums whose terms are many orders of
//! magnitude larger than the result at high SNR, so the engine is written
//! once against [`Real`] and instantiated with `f64` or with a fixed-width
//! binary float [`Fx`] carrying `64 * L` mantissa bits.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Send
    + Sync
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Mantissa width in bits.
    const BITS: u32;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn from_u64(n: u64) -> Self;
    fn from_u128(n: u128) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn is_zero(self) -> bool;
    fn is_negative(self) -> bool;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
    fn pi() -> Self;
    fn mul_u64(self, k: u64) -> Self;
    fn div_u64(self, k: u64) -> Self;
    /// Multiplies by `2^e`.
    fn ldexp(self, e: i64) -> Self;
    /// `log2 |x|`, finite even when the value is outside the `f64` range.
    fn log2_abs(self) -> f64;

    fn from_i64(n: i64) -> Self {
        let v = Self::from_u64(n.unsigned_abs());
        if n < 0 {
            -v
        } else {
            v
        }
    }

    fn recip(self) -> Self {
        Self::one() / self
    }
}

impl Real for f64 {
    const BITS: u32 = 53;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn from_u128(n: u128) -> Self {
        n as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
    fn is_negative(self) -> bool {
        self < 0.0
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn mul_u64(self, k: u64) -> Self {
        self * k as f64
    }
    fn div_u64(self, k: u64) -> Self {
        self / k as f64
    }
    fn ldexp(self, e: i64) -> Self {
        ldexp_f64(self, e)
    }
    fn log2_abs(self) -> f64 {
        f64::abs(self).log2()
    }
}

/// `x * 2^e` without intermediate overflow of the power.
pub fn ldexp_f64(mut x: f64, mut e: i64) -> f64 {
    const STEP: i64 = 1000;
    let big = 2f64.powi(STEP as i32);
    let small = 2f64.powi(-STEP as i32);
    while e > STEP {
        x *= big;
        e -= STEP;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -STEP {
        x *= small;
        e += STEP;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

const MAXL: usize = 16;

// pi/4 and ln 2 as 1024-bit fractions in [1/2, 1), most significant limb first.
const PI_LIMBS: [u64; MAXL] = [
    0xc90fdaa22168c234, 0xc4c6628b80dc1cd1, 0x29024e088a67cc74, 0x020bbea63b139b22,
    0x514a08798e3404dd, 0xef9519b3cd3a431b, 0x302b0a6df25f1437, 0x4fe1356d6d51c245,
    0xe485b576625e7ec6, 0xf44c42e9a637ed6b, 0x0bff5cb6f406b7ed, 0xee386bfb5a899fa5,
    0xae9f24117c4b1fe6, 0x49286651ece45b3d, 0xc2007cb8a163bf05, 0x98da48361c55d39a,
];
const LN2_LIMBS: [u64; MAXL] = [
    0xb17217f7d1cf79ab, 0xc9e3b39803f2f6af, 0x40f343267298b62d, 0x8a0d175b8baafa2b,
    0xe7b876206debac98, 0x559552fb4afa1b10, 0xed2eae35c1382144, 0x27573b291169b825,
    0x3e96ca16224ae8c5, 0x1acbda11317c387e, 0xb9ea9bc3b136603b, 0x256fa0ec7657f74b,
    0x72ce87b19d6548ca, 0xf5dfa6bd38303248, 0x655fa1872f20e3a2, 0xda2d97c50f3fd5c6,
];

const ZERO_EXP: i64 = i64::MIN / 4;

/// Binary floating-point number with a `64 * L`-bit mantissa.
///
/// The value is `±0.m × 2^exp` where `m` is little-endian and normalized so
/// the top bit of `m[L-1]` is set; zero has an all-zero mantissa. Operations
/// truncate rather than round, which costs at most a couple of ulps per
/// operation and is accounted for by the callers' error budgets.
#[derive(Clone, Copy)]
pub struct Fx<const L: usize> {
    neg: bool,
    exp: i64,
    m: [u64; L],
}

impl<const L: usize> Fx<L> {
    const ZERO: Self = Fx { neg: false, exp: ZERO_EXP, m: [0; L] };

    fn from_const(limbs: &[u64; MAXL], exp: i64) -> Self {
        let mut m = [0u64; L];
        for (k, limb) in m.iter_mut().rev().enumerate() {
            *limb = limbs[k];
        }
        Fx { neg: false, exp, m }
    }

    /// Builds a normalized value from a little-endian fraction `buf` of any
    /// length (`value = 0.buf × 2^exp`).
    fn normalize(buf: &[u64], exp: i64, neg: bool) -> Self {
        let h = match buf.iter().rposition(|&w| w != 0) {
            Some(h) => h,
            None => return Self::ZERO,
        };
        let lz = buf[h].leading_zeros();
        let shift = (buf.len() - 1 - h) as i64 * 64 + lz as i64;
        let get = |idx: isize| -> u64 {
            if idx < 0 {
                0
            } else {
                buf[idx as usize]
            }
        };
        let mut m = [0u64; L];
        for t in 0..L {
            let src = h as isize - t as isize;
            let hi = get(src);
            m[L - 1 - t] = if lz == 0 {
                hi
            } else {
                (hi << lz) | (get(src - 1) >> (64 - lz))
            };
        }
        Fx { neg, exp: exp - shift, m }
    }

    fn cmp_mag(a: &Self, b: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (a.is_zero(), b.is_zero()) {
            (true, true) => return Equal,
            (true, false) => return Less,
            (false, true) => return Greater,
            _ => {}
        }
        if a.exp != b.exp {
            return a.exp.cmp(&b.exp);
        }
        for k in (0..L).rev() {
            if a.m[k] != b.m[k] {
                return a.m[k].cmp(&b.m[k]);
            }
        }
        Equal
    }

    fn add_signed(a: Self, b: Self) -> Self {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return b;
        }
        let (x, y) = if Self::cmp_mag(&a, &b) == std::cmp::Ordering::Less {
            (b, a)
        } else {
            (a, b)
        };
        let d = (x.exp - y.exp) as u64;
        if d >= 64 * (L as u64 + 1) {
            return x;
        }
        // x and y as (L+1)-limb fractions with one guard limb at index 0.
        let mut xb = [0u64; MAXL + 1];
        let mut yb = [0u64; MAXL + 1];
        xb[1..=L].copy_from_slice(&x.m);
        let q = (d / 64) as usize;
        let r = (d % 64) as u32;
        let ysrc = |idx: usize| -> u64 {
            if idx == 0 || idx > L {
                0
            } else {
                y.m[idx - 1]
            }
        };
        for k in 0..=L {
            let lo = ysrc(k + q);
            yb[k] = if r == 0 {
                lo
            } else {
                (lo >> r) | (ysrc(k + q + 1) << (64 - r))
            };
        }
        if x.neg == y.neg {
            let mut carry = 0u64;
            for k in 0..=L {
                let (s1, c1) = xb[k].overflowing_add(yb[k]);
                let (s2, c2) = s1.overflowing_add(carry);
                xb[k] = s2;
                carry = (c1 as u64) + (c2 as u64);
            }
            if carry != 0 {
                xb[L + 1] = carry;
                Self::normalize(&xb[..L + 2], x.exp + 64, x.neg)
            } else {
                Self::normalize(&xb[..L + 1], x.exp, x.neg)
            }
        } else {
            let mut borrow = 0u64;
            for k in 0..=L {
                let (s1, b1) = xb[k].overflowing_sub(yb[k]);
                let (s2, b2) = s1.overflowing_sub(borrow);
                xb[k] = s2;
                borrow = (b1 as u64) + (b2 as u64);
            }
            Self::normalize(&xb[..L + 1], x.exp, x.neg)
        }
    }

    fn mul_impl(a: Self, b: Self) -> Self {
        if a.is_zero() || b.is_zero() {
            return Self::ZERO;
        }
        // Partial products below limb L-2 cannot reach the kept limbs except
        // through carries worth far less than one ulp.
        let mut prod = [0u64; 2 * MAXL];
        for i in 0..L {
            let mut carry = 0u64;
            let jstart = L.saturating_sub(2).saturating_sub(i);
            let ai = a.m[i] as u128;
            for j in jstart..L {
                let t = ai * b.m[j] as u128 + prod[i + j] as u128 + carry as u128;
                prod[i + j] = t as u64;
                carry = (t >> 64) as u64;
            }
            prod[i + L] = carry;
        }
        Self::normalize(&prod[L - 1..2 * L], a.exp + b.exp, a.neg ^ b.neg)
    }

    fn newton_iters() -> usize {
        let mut bits = 48usize;
        let mut n = 0;
        while bits < 64 * L + 8 {
            bits *= 2;
            n += 1;
        }
        n
    }

    fn recip_impl(self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        let e = self.exp;
        let f = Fx { neg: false, exp: 0, m: self.m };
        let mut y = Self::from_f64(1.0 / f.to_f64());
        let one = Self::one();
        for _ in 0..Self::newton_iters() {
            y = y + y * (one - f * y);
        }
        y.neg = self.neg;
        y.ldexp(-e)
    }

    fn top_f64(&self) -> f64 {
        let low = if L > 1 { self.m[L - 2] } else { 0 };
        self.m[L - 1] as f64 + low as f64 / 18446744073709551616.0
    }
}

impl<const L: usize> fmt::Debug for Fx<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let l2 = self.log2_abs();
        let e10 = (l2 * std::f64::consts::LOG10_2).floor();
        let mant = 10f64.powf(l2 * std::f64::consts::LOG10_2 - e10);
        write!(f, "{}{:.15}e{}", if self.neg { "-" } else { "" }, mant, e10 as i64)
    }
}

impl<const L: usize> Add for Fx<L> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::add_signed(self, rhs)
    }
}

impl<const L: usize> Sub for Fx<L> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::add_signed(self, -rhs)
    }
}

impl<const L: usize> Mul for Fx<L> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::mul_impl(self, rhs)
    }
}

impl<const L: usize> Div for Fx<L> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let r = rhs.recip_impl();
        let q = self * r;
        q + r * (self - rhs * q)
    }
}

impl<const L: usize> Neg for Fx<L> {
    type Output = Self;
    fn neg(mut self) -> Self {
        if !self.is_zero() {
            self.neg = !self.neg;
        }
        self
    }
}

impl<const L: usize> AddAssign for Fx<L> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const L: usize> SubAssign for Fx<L> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const L: usize> MulAssign for Fx<L> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const L: usize> Real for Fx<L> {
    const BITS: u32 = 64 * L as u32;

    fn zero() -> Self {
        Self::ZERO
    }

    fn one() -> Self {
        let mut m = [0u64; L];
        m[L - 1] = 1 << 63;
        Fx { neg: false, exp: 1, m }
    }

    fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "non-finite value {x}");
        if x == 0.0 {
            return Self::ZERO;
        }
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let eb = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if eb == 0 { (frac, -1074) } else { (frac | (1 << 52), eb - 1075) };
        let lz = mant.leading_zeros() as i64;
        let mut m = [0u64; L];
        m[L - 1] = mant << lz;
        Fx { neg, exp: e - lz + 64, m }
    }

    fn from_u64(n: u64) -> Self {
        Self::normalize(&[n], 64, false)
    }

    fn from_u128(n: u128) -> Self {
        Self::normalize(&[n as u64, (n >> 64) as u64], 128, false)
    }

    fn to_f64(self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let v = ldexp_f64(self.top_f64(), self.exp - 64);
        if self.neg {
            -v
        } else {
            v
        }
    }

    fn abs(mut self) -> Self {
        self.neg = false;
        self
    }

    fn is_zero(self) -> bool {
        self.m[L - 1] == 0
    }

    fn is_negative(self) -> bool {
        self.neg
    }

    fn sqrt(self) -> Self {
        assert!(!self.neg, "square root of a negative value");
        if self.is_zero() {
            return self;
        }
        let k = self.exp.div_euclid(2);
        let x = Fx { neg: false, exp: self.exp - 2 * k, m: self.m };
        let mut y = Self::from_f64(1.0 / x.to_f64().sqrt());
        let one = Self::one();
        for _ in 0..Self::newton_iters() {
            y = y + (y * (one - x * y * y)).ldexp(-1);
        }
        let s = x * y;
        (s + ((x - s * s) * y).ldexp(-1)).ldexp(k)
    }

    fn ln(self) -> Self {
        assert!(!self.neg && !self.is_zero(), "logarithm of a non-positive value");
        let mut e = self.exp;
        let mut f = Fx { neg: false, exp: 0, m: self.m };
        if f.to_f64() < std::f64::consts::FRAC_1_SQRT_2 {
            f = f.ldexp(1);
            e -= 1;
        }
        let one = Self::one();
        let t = (f - one) / (f + one);
        let t2 = t * t;
        let mut sum = t;
        let mut pow = t;
        let mut k = 1u64;
        loop {
            pow *= t2;
            let term = pow.div_u64(2 * k + 1);
            if term.is_zero() || term.exp < sum.exp - 64 * L as i64 - 4 {
                break;
            }
            sum += term;
            k += 1;
        }
        let ln2 = Self::from_const(&LN2_LIMBS, 0);
        sum.ldexp(1) + ln2 * Self::from_i64(e)
    }

    fn pi() -> Self {
        Self::from_const(&PI_LIMBS, 2)
    }

    fn mul_u64(self, k: u64) -> Self {
        if k == 0 || self.is_zero() {
            return Self::ZERO;
        }
        let mut buf = [0u64; MAXL + 1];
        let mut carry = 0u64;
        for i in 0..L {
            let t = self.m[i] as u128 * k as u128 + carry as u128;
            buf[i] = t as u64;
            carry = (t >> 64) as u64;
        }
        buf[L] = carry;
        Self::normalize(&buf[..L + 1], self.exp + 64, self.neg)
    }

    fn div_u64(self, k: u64) -> Self {
        assert!(k != 0, "division by zero");
        if self.is_zero() {
            return self;
        }
        let mut buf = [0u64; MAXL + 1];
        let mut rem: u128 = 0;
        for i in (0..L).rev() {
            let cur = (rem << 64) | self.m[i] as u128;
            buf[i + 1] = (cur / k as u128) as u64;
            rem = cur % k as u128;
        }
        buf[0] = ((rem << 64) / k as u128) as u64;
        Self::normalize(&buf[..L + 1], self.exp, self.neg)
    }

    fn ldexp(mut self, e: i64) -> Self {
        if !self.is_zero() {
            self.exp += e;
        }
        self
    }

    fn log2_abs(self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        (self.top_f64() / 18446744073709551616.0).log2() + self.exp as f64
    }

    fn recip(self) -> Self {
        self.recip_impl()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type F4 = Fx<4>;

    fn close(a: F4, b: F4, bits: i64) -> bool {
        let d = (a - b).abs();
        d.is_zero() || d.log2_abs() < b.log2_abs() - bits as f64
    }

    #[test]
    fn roundtrip_f64() {
        for &x in &[1.0, -2.5, 1e-300, 3.7e250, 0.1, 5e-324] {
            assert_eq!(F4::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn arithmetic_identities() {
        let a = F4::from_f64(0.1);
        let b = F4::from_f64(7.25);
        let q = a / b;
        assert!(close(q * b, a, 250));
        let s = b.sqrt();
        assert!(close(s * s, b, 250));
        assert!(close((a + b) - b, a, 240));
        assert!(close(F4::from_u64(3).div_u64(3), F4::one(), 255));
        assert!(close(F4::from_u64(1u64 << 40).mul_u64(12345), F4::from_f64(12345.0 * 2f64.powi(40)), 255));
    }

    #[test]
    fn ln_matches_series_identities() {
        let two = F4::from_u64(2);
        let ln2 = two.ln();
        assert!(close(ln2, F4::from_const(&LN2_LIMBS, 0), 250));
        let x = F4::from_f64(123.456);
        let y = F4::from_f64(0.0078125);
        assert!(close((x * y).ln(), x.ln() + y.ln(), 240));
        assert!((x.ln().to_f64() - 123.456f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn pi_matches_machin() {
        // pi = 16 atan(1/5) - 4 atan(1/239)
        fn atan_inv(n: u64) -> F4 {
            let x = F4::one().div_u64(n);
            let x2 = x * x;
            let mut pow = x;
            let mut sum = x;
            for k in 1..200u64 {
                pow = -(pow * x2);
                sum += pow.div_u64(2 * k + 1);
            }
            sum
        }
        let pi = atan_inv(5).mul_u64(16) - atan_inv(239).mul_u64(4);
        assert!(close(pi, F4::pi(), 250));
    }

    #[test]
    fn cancellation_keeps_guard_bits() {
        let one = F4::one();
        let eps = one.ldexp(-200);
        let d = (one + eps) - one;
        assert!(close(d, eps, 50));
    }
}
