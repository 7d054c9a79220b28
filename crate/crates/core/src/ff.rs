//! Exact arithmetic in small finite fields `F_q`, `q = p^e <= 2^16`.
//!
//! Elements are stored by their canonical encoding: the coefficient vector of
//! the residue polynomial read as a little-endian base-`p` integer in
//! `[0, q-1]`. For prime fields this is just the residue. Multiplication and
//! inversion go through discrete log / antilog tables built once per field,
//! so every operation is a handful of integer instructions regardless of `q`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest supported field order.
pub const MAX_ORDER: u64 = 1 << 16;
/// Largest supported extension degree (`2^16` needs `e = 16`).
pub const MAX_DEGREE: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("characteristic {0} is not prime")]
    NotPrime(u64),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("field order {p}^{e} is not supported (q must be at most 2^16, e at most {MAX_DEGREE})")]
    UnsupportedSize { p: u64, e: u32 },
    #[error("modulus must be monic of degree {expected} with coefficients below {p}")]
    MalformedModulus { expected: u32, p: u32 },
    #[error("modulus is reducible over F_{0}")]
    ReducibleModulus(u32),
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("value {value} is not a field element of F_{q}")]
    OutOfRange { value: u64, q: u32 },
}

/// Canonical representative of a field element, valid only together with the
/// [`Field`] it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Elem(u16);

impl Elem {
    pub const ZERO: Elem = Elem(0);
    pub const ONE: Elem = Elem(1);

    /// The base-`p` integer encoding.
    #[inline]
    pub fn value(self) -> u32 {
        self.0 as u32
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug)]
pub struct FieldCtx {
    p: u32,
    e: u32,
    q: u32,
    /// Monic modulus, little-endian, length `e + 1`. `[0, 1]` for prime fields.
    modulus: Vec<u32>,
    /// `log[a]` for `a != 0`.
    log: Vec<u16>,
    /// `exp[i] = g^i` for `i < 2(q-1)`, doubled so products need no reduction.
    exp: Vec<u16>,
    neg_one: Elem,
}

/// Shared handle to a validated field description.
#[derive(Clone)]
pub struct Field(Arc<FieldCtx>);

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({self})")
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.e == 1 {
            write!(f, "F_{}", self.0.p)
        } else {
            write!(f, "GF({}^{})", self.0.p, self.0.e)
        }
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.p == other.0.p && self.0.e == other.0.e && self.0.modulus == other.0.modulus)
    }
}

impl Eq for Field {}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Dense polynomial helpers over `F_p`, little-endian coefficient vectors.
mod poly {
    pub fn trim(a: &mut Vec<u32>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    /// Remainder of `a` modulo the monic polynomial `m`.
    pub fn rem_monic(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        let mut r: Vec<u32> = a.to_vec();
        trim(&mut r);
        let dm = m.len() - 1;
        while r.len() > dm {
            let lead = *r.last().unwrap() as u64;
            let shift = r.len() - 1 - dm;
            for (i, &c) in m.iter().enumerate() {
                let sub = (lead * c as u64) % p as u64;
                r[shift + i] = ((r[shift + i] as u64 + p as u64 - sub) % p as u64) as u32;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mul_mod(a: &[u32], b: &[u32], m: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut prod = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        let prod: Vec<u32> = prod.into_iter().map(|c| c as u32).collect();
        rem_monic(&prod, m, p)
    }
}

fn to_digits(mut v: u32, p: u32, e: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(e as usize);
    for _ in 0..e {
        out.push(v % p);
        v /= p;
    }
    out
}

fn from_digits(d: &[u32], p: u32) -> u32 {
    d.iter().rev().fold(0u32, |acc, &c| acc * p + c)
}

/// Irreducibility by exhaustive search for a monic factor of degree at most `e/2`.
pub fn is_irreducible(modulus: &[u32], p: u32) -> bool {
    let e = modulus.len() - 1;
    if e <= 1 {
        return e == 1;
    }
    if modulus[0] == 0 {
        return false;
    }
    for d in 1..=e / 2 {
        let count = (p as u64).pow(d as u32);
        for t in 0..count {
            let mut f = to_digits(t as u32, p, d as u32);
            f.push(1);
            if poly::rem_monic(modulus, &f, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// The built-in modulus for `(p, e)`: the monic irreducible of degree `e` whose
/// lower coefficients have the smallest base-`p` encoding.
pub fn default_modulus(p: u32, e: u32) -> Option<Vec<u32>> {
    if e == 1 {
        return Some(vec![0, 1]);
    }
    let count = (p as u64).checked_pow(e)?;
    (1..count).find_map(|t| {
        let mut m = to_digits(t as u32, p, e);
        m.push(1);
        is_irreducible(&m, p).then_some(m)
    })
}

impl Field {
    /// Validated `F_{p^e}`. `modulus` is little-endian and monic (`c0, c1, ..., 1`);
    /// when absent for `e > 1` the built-in default is used.
    pub fn new(p: u64, e: u32, modulus: Option<&[u32]>) -> Result<Field, FieldError> {
        if e == 0 {
            return Err(FieldError::ZeroDegree);
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let q = match p.checked_pow(e) {
            Some(q) if q <= MAX_ORDER && e <= MAX_DEGREE => q,
            _ => return Err(FieldError::UnsupportedSize { p, e }),
        };
        let p = p as u32;
        let modulus = if e == 1 {
            vec![0, 1]
        } else {
            match modulus {
                Some(m) => {
                    if m.len() != e as usize + 1 || m[e as usize] != 1 || m.iter().any(|&c| c >= p) {
                        return Err(FieldError::MalformedModulus { expected: e, p });
                    }
                    if !is_irreducible(m, p) {
                        return Err(FieldError::ReducibleModulus(p));
                    }
                    m.to_vec()
                }
                None => default_modulus(p, e).expect("an irreducible polynomial exists for every degree"),
            }
        };
        Ok(Field(Arc::new(FieldCtx::build(p, e, q as u32, modulus))))
    }

    pub fn prime(p: u64) -> Result<Field, FieldError> {
        Field::new(p, 1, None)
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.0.p
    }

    #[inline]
    pub fn e(&self) -> u32 {
        self.0.e
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.0.q
    }

    pub fn modulus(&self) -> &[u32] {
        &self.0.modulus
    }

    pub fn elem(&self, value: u64) -> Result<Elem, FieldError> {
        if value < self.0.q as u64 {
            Ok(Elem(value as u16))
        } else {
            Err(FieldError::OutOfRange { value, q: self.0.q })
        }
    }

    /// The element `v mod p` of the prime subfield.
    pub fn from_int(&self, v: i64) -> Elem {
        Elem(v.rem_euclid(self.0.p as i64) as u16)
    }

    pub fn element(&self, value: u64) -> Result<FieldElement, FieldError> {
        Ok(FieldElement { field: self.clone(), elem: self.elem(value)? })
    }

    pub fn wrap(&self, elem: Elem) -> FieldElement {
        FieldElement { field: self.clone(), elem }
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        (0..self.0.q).map(|v| Elem(v as u16))
    }

    pub fn nonzero(&self) -> impl Iterator<Item = Elem> {
        (1..self.0.q).map(|v| Elem(v as u16))
    }

    pub fn neg_one(&self) -> Elem {
        self.0.neg_one
    }

    /// `{1, -1}` in increasing encoding order; a single element in characteristic 2.
    pub fn signs(&self) -> Vec<Elem> {
        if self.0.neg_one == Elem::ONE {
            vec![Elem::ONE]
        } else {
            vec![Elem::ONE, self.0.neg_one]
        }
    }

    pub fn digits(&self, a: Elem) -> Vec<u32> {
        to_digits(a.value(), self.0.p, self.0.e)
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let c = &*self.0;
        if c.e == 1 {
            let s = a.0 as u32 + b.0 as u32;
            Elem(if s >= c.p { s - c.p } else { s } as u16)
        } else if c.p == 2 {
            Elem(a.0 ^ b.0)
        } else {
            let (mut x, mut y) = (a.0 as u32, b.0 as u32);
            let (mut out, mut place) = (0u32, 1u32);
            while x > 0 || y > 0 {
                let d = (x % c.p + y % c.p) % c.p;
                out += d * place;
                place *= c.p;
                x /= c.p;
                y /= c.p;
            }
            Elem(out as u16)
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        let c = &*self.0;
        if a.0 == 0 || c.p == 2 {
            a
        } else if c.e == 1 {
            Elem((c.p - a.0 as u32) as u16)
        } else {
            let (mut x, mut out, mut place) = (a.0 as u32, 0u32, 1u32);
            while x > 0 {
                let d = (c.p - x % c.p) % c.p;
                out += d * place;
                place *= c.p;
                x /= c.p;
            }
            Elem(out as u16)
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a.0 == 0 || b.0 == 0 {
            return Elem::ZERO;
        }
        let c = &*self.0;
        if c.e == 1 {
            Elem(((a.0 as u32 * b.0 as u32) % c.p) as u16)
        } else {
            Elem(c.exp[c.log[a.0 as usize] as usize + c.log[b.0 as usize] as usize])
        }
    }

    pub fn inv(&self, a: Elem) -> Result<Elem, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let c = &*self.0;
        let order = c.q as usize - 1;
        Ok(Elem(c.exp[(order - c.log[a.0 as usize] as usize) % order]))
    }

    pub fn div(&self, a: Elem, b: Elem) -> Result<Elem, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Elem, mut k: u64) -> Elem {
        let mut base = a;
        let mut acc = Elem::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    /// `a = 1` or `a = -1`; in characteristic 2 only `1`.
    #[inline]
    pub fn is_sign(&self, a: Elem) -> bool {
        a == Elem::ONE || a == self.0.neg_one
    }
}

impl FieldCtx {
    fn build(p: u32, e: u32, q: u32, modulus: Vec<u32>) -> FieldCtx {
        let slow_mul = |a: u32, b: u32| -> u32 {
            if e == 1 {
                ((a as u64 * b as u64) % p as u64) as u32
            } else {
                let r = poly::mul_mod(&to_digits(a, p, e), &to_digits(b, p, e), &modulus, p);
                let mut d = r;
                d.resize(e as usize, 0);
                from_digits(&d, p)
            }
        };
        let slow_pow = |a: u32, mut k: u64| -> u32 {
            let (mut base, mut acc) = (a, 1u32);
            while k > 0 {
                if k & 1 == 1 {
                    acc = slow_mul(acc, base);
                }
                base = slow_mul(base, base);
                k >>= 1;
            }
            acc
        };
        let order = q as u64 - 1;
        let factors = prime_factors(order);
        let generator = (1..q)
            .find(|&g| factors.iter().all(|&r| slow_pow(g, order / r) != 1) && (q > 2 || g == 1))
            .expect("the multiplicative group of a finite field is cyclic");
        let mut exp = vec![0u16; 2 * order.max(1) as usize];
        let mut log = vec![0u16; q as usize];
        let mut x = 1u32;
        for i in 0..order as usize {
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x = slow_mul(x, generator);
        }
        for i in order as usize..exp.len() {
            exp[i] = exp[i - order as usize];
        }
        let neg_one = Elem(if p == 2 { 1 } else { (p - 1) as u16 });
        FieldCtx { p, e, q, modulus, log, exp, neg_one }
    }
}

/// A field element bundled with its field, for mixed-field-checked arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement {
    field: Field,
    elem: Elem,
}

impl FieldElement {
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn elem(&self) -> Elem {
        self.elem
    }

    pub fn value(&self) -> u32 {
        self.elem.value()
    }

    fn same_field(&self, other: &FieldElement) -> Result<(), FieldError> {
        if self.field == other.field {
            Ok(())
        } else {
            Err(FieldError::FieldMismatch)
        }
    }

    pub fn add(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(other)?;
        Ok(self.field.wrap(self.field.add(self.elem, other.elem)))
    }

    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(other)?;
        Ok(self.field.wrap(self.field.sub(self.elem, other.elem)))
    }

    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_field(other)?;
        Ok(self.field.wrap(self.field.mul(self.elem, other.elem)))
    }

    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        Ok(self.field.wrap(self.field.inv(self.elem)?))
    }

    pub fn neg(&self) -> FieldElement {
        self.field.wrap(self.field.neg(self.elem))
    }

    pub fn is_sign(&self) -> bool {
        self.field.is_sign(self.elem)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.elem)
    }
}
