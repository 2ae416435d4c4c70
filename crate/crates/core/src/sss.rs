//! Shamir secret sharing over a prime field GF(q).
//!
//! A dealer hides a secret as the constant term of a random polynomial of
//! degree `t-1` and hands party `i` the evaluation at `x = i`. Any `t` shares
//! determine the polynomial (and hence the secret) by Lagrange interpolation
//! at 0; fewer than `t` reveal nothing. Share values are plain field elements,
//! so sums of shares reconstruct to sums of secrets — the property the
//! trusted-party-free adder builds on.
//!
//! The modulus must be an odd-sized prime below 2^61 so every intermediate
//! product fits comfortably in `u128` and share sums fit the quantum
//! accumulator's supported widths.

use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// Largest supported modulus is the Mersenne prime 2^61 - 1.
const MAX_MODULUS: u64 = 1 << 61;

fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the fixed witness set decides primality for
/// every `u64`.
fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let r = (n - 1).trailing_zeros();
    let d = (n - 1) >> r;
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The prime field GF(q) with the modular arithmetic the sharing scheme needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    /// Builds GF(q), verifying `q` is prime and below 2^61.
    pub fn new(q: u64) -> Result<Self> {
        if q >= MAX_MODULUS {
            return Err(Error::FieldTooLarge(q));
        }
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(Self { q })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Checks that `v` is a canonical element (already reduced).
    pub fn element(&self, v: u64) -> Result<u64> {
        if v < self.q {
            Ok(v)
        } else {
            Err(Error::NotAFieldElement { value: v, modulus: self.q })
        }
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.q
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.q - b % self.q) % self.q
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.q)
    }

    /// Multiplicative inverse via Fermat's little theorem; 0 has none.
    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.q;
        if a == 0 {
            return Err(Error::NotAFieldElement { value: 0, modulus: self.q });
        }
        Ok(pow_mod(a, self.q - 2, self.q))
    }

    /// Uniform element of [1, q-1] (never zero).
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        debug_assert!(self.q >= 2);
        rng.gen_range(1..self.q)
    }
}

/// One party's share: the polynomial's value `y` at the public point `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Share {
    pub x: u64,
    pub y: u64,
}

/// A dealer's polynomial `g(x) = secret + c_1 x + … + c_{t-1} x^{t-1}` over
/// GF(q).
#[derive(Clone, Debug)]
pub struct SecretPolynomial {
    field: PrimeField,
    /// `coeffs[k]` multiplies `x^k`; `coeffs[0]` is the secret.
    coeffs: Vec<u64>,
}

impl SecretPolynomial {
    /// Draws a random degree-`threshold - 1` polynomial hiding `secret`. The
    /// non-constant coefficients are uniform on [1, q-1]: a zero leading
    /// coefficient would silently lower the effective threshold.
    pub fn generate<R: Rng + ?Sized>(
        field: PrimeField,
        secret: u64,
        threshold: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if threshold == 0 {
            return Err(Error::InvalidConfig("threshold must be at least 1".into()));
        }
        let secret = field.element(secret)?;
        let mut coeffs = Vec::with_capacity(threshold);
        coeffs.push(secret);
        for _ in 1..threshold {
            coeffs.push(field.random_nonzero(rng));
        }
        Ok(Self { field, coeffs })
    }

    /// Builds the polynomial with explicit coefficients (constant term first).
    pub fn from_coefficients(field: PrimeField, coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("a polynomial needs at least one coefficient".into()));
        }
        for &c in &coeffs {
            field.element(c)?;
        }
        Ok(Self { field, coeffs })
    }

    pub fn threshold(&self) -> usize {
        self.coeffs.len()
    }

    pub fn secret(&self) -> u64 {
        self.coeffs[0]
    }

    /// Horner evaluation of the polynomial at `x`.
    pub fn eval(&self, x: u64) -> u64 {
        let x = x % self.field.q;
        self.coeffs
            .iter()
            .rev()
            .fold(0u64, |acc, &c| self.field.add(self.field.mul(acc, x), c))
    }

    /// Shares for parties 1..=m at the public points x = 1, …, m. The points
    /// must be distinct nonzero field elements, so `m ≤ q - 1`.
    pub fn shares(&self, m: usize) -> Result<Vec<Share>> {
        if m == 0 {
            return Err(Error::InvalidConfig("at least one share is required".into()));
        }
        if m as u64 > self.field.q - 1 {
            return Err(Error::InvalidConfig(alloc::format!(
                "{m} distinct nonzero points do not exist in GF({})",
                self.field.q
            )));
        }
        Ok((1..=m as u64).map(|x| Share { x, y: self.eval(x) }).collect())
    }
}

/// Recovers the constant term by Lagrange interpolation at 0, using every
/// share passed in. The caller is responsible for supplying at least
/// `threshold` shares; the points must be distinct, nonzero, and reduced.
pub fn reconstruct(field: &PrimeField, shares: &[Share]) -> Result<u64> {
    if shares.is_empty() {
        return Err(Error::NoShares);
    }
    for (i, s) in shares.iter().enumerate() {
        if s.x == 0 || s.x >= field.q {
            return Err(Error::BadSharePoint(s.x));
        }
        field.element(s.y)?;
        if shares[..i].iter().any(|o| o.x == s.x) {
            return Err(Error::BadSharePoint(s.x));
        }
    }
    let mut secret = 0u64;
    for si in shares {
        // ℓ_i(0) = Π_{j≠i} x_j / (x_j - x_i)
        let mut num = 1u64;
        let mut den = 1u64;
        for sj in shares {
            if sj.x == si.x {
                continue;
            }
            num = field.mul(num, sj.x);
            den = field.mul(den, field.sub(sj.x, si.x));
        }
        let weight = field.mul(num, field.inv(den)?);
        secret = field.add(secret, field.mul(si.y, weight));
    }
    Ok(secret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    const MERSENNE_61: u64 = (1 << 61) - 1;

    #[test]
    fn primality_is_decided_correctly() {
        for q in [2u64, 3, 5, 7, 11, 13, 101, 7919, MERSENNE_61] {
            assert!(is_prime(q), "{q} is prime");
        }
        for q in [0u64, 1, 4, 9, 15, 91, 561, 6601, (1 << 61) - 3] {
            assert!(!is_prime(q), "{q} is composite");
        }
    }

    #[test]
    fn field_construction_validates() {
        assert!(PrimeField::new(11).is_ok());
        assert!(PrimeField::new(MERSENNE_61).is_ok());
        assert!(matches!(PrimeField::new(12), Err(Error::NotPrime(12))));
        assert!(matches!(PrimeField::new(1 << 61), Err(Error::FieldTooLarge(_))));
        assert!(matches!(PrimeField::new(u64::MAX), Err(Error::FieldTooLarge(_))));
    }

    #[test]
    fn hand_worked_example() {
        // g(x) = 5 + 3x over GF(13): shares (1,8), (2,11); both recover 5.
        let field = PrimeField::new(13).unwrap();
        let poly = SecretPolynomial::from_coefficients(field, alloc::vec![5, 3]).unwrap();
        let shares = poly.shares(2).unwrap();
        assert_eq!(shares, alloc::vec![Share { x: 1, y: 8 }, Share { x: 2, y: 11 }]);
        assert_eq!(reconstruct(&field, &shares).unwrap(), 5);
    }

    #[test]
    fn roundtrip_over_random_polynomials() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for q in [5u64, 11, 101, 65_537, MERSENNE_61] {
            let field = PrimeField::new(q).unwrap();
            for _ in 0..40 {
                let secret = rng.gen_range(0..q);
                let threshold = rng.gen_range(1..=3usize);
                let m = threshold + rng.gen_range(0..=1usize);
                if m as u64 > q - 1 {
                    continue;
                }
                let poly = SecretPolynomial::generate(field, secret, threshold, &mut rng).unwrap();
                let shares = poly.shares(m).unwrap();
                assert_eq!(reconstruct(&field, &shares).unwrap(), secret);
                // Any threshold-sized subset also recovers it.
                assert_eq!(reconstruct(&field, &shares[m - threshold..]).unwrap(), secret);
            }
        }
    }

    #[test]
    fn shares_are_additively_homomorphic() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let field = PrimeField::new(101).unwrap();
        for _ in 0..25 {
            let (s1, s2) = (rng.gen_range(0..101), rng.gen_range(0..101));
            let p1 = SecretPolynomial::generate(field, s1, 3, &mut rng).unwrap();
            let p2 = SecretPolynomial::generate(field, s2, 3, &mut rng).unwrap();
            let sum_shares: Vec<Share> = p1
                .shares(4)
                .unwrap()
                .iter()
                .zip(p2.shares(4).unwrap())
                .map(|(a, b)| Share { x: a.x, y: field.add(a.y, b.y) })
                .collect();
            assert_eq!(reconstruct(&field, &sum_shares).unwrap(), field.add(s1, s2));
        }
    }

    #[test]
    fn binary_field_forces_unit_coefficients() {
        // In GF(2) the only nonzero coefficient is 1, so generation is
        // deterministic: g(x) = secret + x.
        let field = PrimeField::new(2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let poly = SecretPolynomial::generate(field, 1, 2, &mut rng).unwrap();
        assert_eq!(poly.eval(0), 1);
        assert_eq!(poly.eval(1), 0);
        // Two distinct nonzero points do not exist in GF(2).
        assert!(poly.shares(2).is_err());
    }

    #[test]
    fn reconstruct_rejects_bad_inputs() {
        let field = PrimeField::new(13).unwrap();
        assert!(matches!(reconstruct(&field, &[]), Err(Error::NoShares)));
        let zero_point = [Share { x: 0, y: 5 }];
        assert!(matches!(reconstruct(&field, &zero_point), Err(Error::BadSharePoint(0))));
        let duplicate = [Share { x: 2, y: 5 }, Share { x: 2, y: 6 }];
        assert!(matches!(reconstruct(&field, &duplicate), Err(Error::BadSharePoint(2))));
        let out_of_field = [Share { x: 1, y: 13 }];
        assert!(matches!(
            reconstruct(&field, &out_of_field),
            Err(Error::NotAFieldElement { value: 13, modulus: 13 })
        ));
        let out_of_range_x = [Share { x: 13, y: 1 }];
        assert!(matches!(reconstruct(&field, &out_of_range_x), Err(Error::BadSharePoint(13))));
    }

    #[test]
    fn perturbed_share_changes_the_secret() {
        let field = PrimeField::new(101).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let poly = SecretPolynomial::generate(field, 42, 2, &mut rng).unwrap();
        let mut shares = poly.shares(2).unwrap();
        shares[1].y = field.add(shares[1].y, 1);
        assert_ne!(reconstruct(&field, &shares).unwrap(), 42);
    }

    #[test]
    fn generated_coefficients_are_nonzero() {
        let field = PrimeField::new(5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let poly = SecretPolynomial::generate(field, 0, 4, &mut rng).unwrap();
            for &c in &poly.coeffs[1..] {
                assert_ne!(c, 0);
            }
        }
    }

    #[test]
    fn large_field_roundtrip() {
        let field = PrimeField::new(MERSENNE_61).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let secret = MERSENNE_61 - 2;
        let poly = SecretPolynomial::generate(field, secret, 3, &mut rng).unwrap();
        let shares = poly.shares(5).unwrap();
        assert_eq!(reconstruct(&field, &shares).unwrap(), secret);
    }
}
