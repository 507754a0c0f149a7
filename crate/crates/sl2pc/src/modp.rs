//! Arithmetic modulo 62-bit primes in Montgomery form, and dense rank.

/// Three primes just below 2^62, all ≡ 1 (mod 4) so that √−1 exists.
pub const PRIMES: [u64; 3] = [4611686018427387817, 4611686018427387761, 4611686018427387737];

#[derive(Clone, Copy, Debug)]
pub struct Modulus {
    pub p: u64,
    n_prime: u64,
    r2: u64,
}

impl Modulus {
    pub fn new(p: u64) -> Self {
        assert!(p % 2 == 1 && p < (1 << 62), "modulus must be odd and below 2^62");
        // Newton iteration for -p^{-1} mod 2^64
        let mut inv: u64 = 1;
        for _ in 0..7 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r = ((1u128 << 64) % p as u128) as u64;
        let r2 = ((r as u128 * r as u128) % p as u128) as u64;
        Modulus { p, n_prime: inv.wrapping_neg(), r2 }
    }

    #[inline]
    fn redc(&self, t: u128) -> u64 {
        let m = (t as u64).wrapping_mul(self.n_prime);
        let u = ((t + m as u128 * self.p as u128) >> 64) as u64;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.redc(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    /// Standard residue to Montgomery form.
    pub fn to_mont(&self, a: u64) -> u64 {
        self.mul(a % self.p, self.r2)
    }

    pub fn from_mont(&self, a: u64) -> u64 {
        self.redc(a as u128)
    }

    pub fn one(&self) -> u64 {
        self.to_mont(1)
    }

    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(a != 0, "inverse of zero");
        self.pow(a, self.p - 2)
    }

    /// Montgomery image of a signed big integer.
    pub fn from_bigint(&self, n: &num_bigint::BigInt) -> u64 {
        use num_bigint::Sign;
        let (sign, mag) = n.to_u64_digits();
        let mut acc = 0u64;
        let base = ((1u128 << 64) % self.p as u128) as u64;
        for d in mag.iter().rev() {
            acc = ((acc as u128 * base as u128 + (*d % self.p) as u128) % self.p as u128) as u64;
        }
        let m = self.to_mont(acc);
        if sign == Sign::Minus {
            self.neg(m)
        } else {
            m
        }
    }

    pub fn from_rational(&self, q: &num_rational::BigRational) -> Option<u64> {
        let d = self.from_bigint(q.denom());
        if d == 0 {
            return None;
        }
        Some(self.mul(self.from_bigint(q.numer()), self.inv(d)))
    }

    /// A square root of −1 (Montgomery form); needs p ≡ 1 (mod 4).
    pub fn sqrt_minus_one(&self) -> u64 {
        assert_eq!(self.p % 4, 1);
        let minus_one = self.neg(self.one());
        for c in 2u64.. {
            let cm = self.to_mont(c);
            // Euler criterion: non-residue iff c^((p-1)/2) = -1
            if self.pow(cm, (self.p - 1) / 2) == minus_one {
                return self.pow(cm, (self.p - 1) / 4);
            }
        }
        unreachable!()
    }
}

/// Rank of a dense row-major matrix with Montgomery entries. The matrix is
/// consumed as scratch space.
pub fn dense_rank(m: &Modulus, rows: usize, cols: usize, a: &mut [u64]) -> usize {
    assert_eq!(a.len(), rows * cols);
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let piv = match (rank..rows).find(|&r| a[r * cols + col] != 0) {
            Some(r) => r,
            None => continue,
        };
        if piv != rank {
            for c in col..cols {
                a.swap(piv * cols + c, rank * cols + c);
            }
        }
        let inv = m.inv(a[rank * cols + col]);
        for c in col..cols {
            a[rank * cols + c] = m.mul(a[rank * cols + c], inv);
        }
        let (head, tail) = a.split_at_mut((rank + 1) * cols);
        let prow = &head[rank * cols..];
        for r in 0..rows - rank - 1 {
            let row = &mut tail[r * cols..(r + 1) * cols];
            let f = row[col];
            if f == 0 {
                continue;
            }
            for c in col..cols {
                if prow[c] != 0 {
                    row[c] = m.sub(row[c], m.mul(f, prow[c]));
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_prime(n: u64) -> bool {
        // deterministic Miller–Rabin bases for 64-bit integers
        let m = Modulus::new(n);
        let d0 = n - 1;
        let s = d0.trailing_zeros();
        let d = d0 >> s;
        let one = m.one();
        let minus_one = m.neg(one);
        'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
            let mut x = m.pow(m.to_mont(a), d);
            if x == one || x == minus_one {
                continue;
            }
            for _ in 1..s {
                x = m.mul(x, x);
                if x == minus_one {
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    #[test]
    fn primes_are_prime_and_one_mod_four() {
        for p in PRIMES {
            assert!(is_prime(p));
            assert_eq!(p % 4, 1);
            assert!(p > 1 << 61);
        }
        assert!(!is_prime(PRIMES[0] - 2));
    }

    #[test]
    fn montgomery_round_trip_and_sqrt() {
        for p in PRIMES {
            let m = Modulus::new(p);
            let a = m.to_mont(123456789);
            let b = m.to_mont(987654321);
            let prod = (123456789u128 * 987654321u128 % p as u128) as u64;
            assert_eq!(m.from_mont(m.mul(a, b)), prod);
            assert_eq!(m.mul(a, m.inv(a)), m.one());
            let i = m.sqrt_minus_one();
            assert_eq!(m.mul(i, i), m.neg(m.one()));
            let minus_seven = num_bigint::BigInt::from(-7);
            assert_eq!(m.add(m.from_bigint(&minus_seven), m.to_mont(7)), 0);
        }
    }

    #[test]
    fn rank_small() {
        let m = Modulus::new(PRIMES[0]);
        let v = |x: i64| m.from_bigint(&num_bigint::BigInt::from(x));
        let mut a = vec![v(1), v(2), v(3), v(2), v(4), v(6), v(0), v(1), v(1)];
        assert_eq!(dense_rank(&m, 3, 3, &mut a), 2);
    }
}
