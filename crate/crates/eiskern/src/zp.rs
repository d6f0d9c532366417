//! Arithmetic modulo a prime power p^k.
//!
//! All residues are stored as `u128` values in `[0, p^k)`. A `PrimePow`
//! context carries the modulus; elements themselves are plain integers so
//! that vectors and matrices stay cheap to copy.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimePow {
    pub p: u64,
    pub k: u32,
    pub modulus: u128,
}

impl PrimePow {
    pub fn new(p: u64, k: u32) -> Self {
        assert!(k > 0, "precision must be positive");
        let mut modulus: u128 = 1;
        for _ in 0..k {
            modulus = modulus
                .checked_mul(p as u128)
                .expect("modulus overflows u128");
        }
        // products of two residues must fit in u128
        assert!(modulus < (1u128 << 63), "modulus too large for exact products");
        PrimePow { p, k, modulus }
    }

    /// The same prime at a different precision.
    pub fn with_k(&self, k: u32) -> Self {
        PrimePow::new(self.p, k)
    }

    pub fn reduce(&self, x: u128) -> u128 {
        x % self.modulus
    }

    pub fn reduce_i64(&self, x: i64) -> u128 {
        let m = self.modulus as i128;
        let r = (x as i128) % m;
        if r < 0 { (r + m) as u128 } else { r as u128 }
    }

    pub fn add(&self, a: u128, b: u128) -> u128 {
        (a + b) % self.modulus
    }

    pub fn sub(&self, a: u128, b: u128) -> u128 {
        (a + self.modulus - b % self.modulus) % self.modulus
    }

    pub fn neg(&self, a: u128) -> u128 {
        if a == 0 { 0 } else { self.modulus - a }
    }

    pub fn mul(&self, a: u128, b: u128) -> u128 {
        (a * b) % self.modulus
    }

    pub fn pow(&self, mut a: u128, mut e: u128) -> u128 {
        let mut acc: u128 = 1 % self.modulus;
        a %= self.modulus;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// p-adic valuation of x, capped at k (val(0) == k).
    pub fn val(&self, x: u128) -> u32 {
        if x % self.modulus == 0 {
            return self.k;
        }
        let mut x = x % self.modulus;
        let mut v = 0;
        while x % self.p as u128 == 0 {
            x /= self.p as u128;
            v += 1;
        }
        v
    }

    pub fn pk(&self, j: u32) -> u128 {
        assert!(j <= self.k);
        let mut m: u128 = 1;
        for _ in 0..j {
            m *= self.p as u128;
        }
        m
    }

    /// Exact division by p^j. Panics if x is not divisible.
    /// The result is well defined modulo p^(k-j); the representative
    /// returned is the plain integer quotient.
    pub fn div_pow(&self, x: u128, j: u32) -> u128 {
        let pj = self.pk(j);
        let x = x % self.modulus;
        assert!(x % pj == 0, "inexact division by p^{j}");
        x / pj
    }

    /// Inverse of a unit mod p^k.
    pub fn inv_unit(&self, x: u128) -> u128 {
        let x = x % self.modulus;
        assert!(x % self.p as u128 != 0, "not a unit");
        // extended Euclid on signed 256-bit is unnecessary: modulus < 2^63
        let (mut r0, mut r1) = (self.modulus as i128, x as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            let r = r0 - q * r1;
            r0 = r1;
            r1 = r;
            let t = t0 - q * t1;
            t0 = t1;
            t1 = t;
        }
        assert!(r0 == 1 || r0 == -1);
        let mut t = t0 * r0.signum();
        t %= self.modulus as i128;
        if t < 0 {
            t += self.modulus as i128;
        }
        t as u128
    }

    /// Unit part of x: x / p^val(x). Zero maps to zero.
    pub fn unit_part(&self, x: u128) -> u128 {
        let v = self.val(x);
        if v >= self.k {
            0
        } else {
            self.div_pow(x, v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let c = PrimePow::new(3, 9);
        for x in 1..200u128 {
            if x % 3 == 0 {
                continue;
            }
            let y = c.inv_unit(x);
            assert_eq!(c.mul(x, y), 1);
        }
    }

    #[test]
    fn valuation_and_division() {
        let c = PrimePow::new(5, 6);
        assert_eq!(c.val(0), 6);
        assert_eq!(c.val(50), 2);
        assert_eq!(c.div_pow(50, 2), 2);
        assert_eq!(c.unit_part(375), 3);
    }
}
