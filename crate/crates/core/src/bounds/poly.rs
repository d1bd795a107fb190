use std::fmt;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = Ratio<i128>;

/// Polynomial in one variable with rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Q) -> Self {
        Poly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Coefficient of `x^k`.
    pub fn coeff(&self, k: usize) -> Q {
        self.coeffs.get(k).copied().unwrap_or_else(Q::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval_exact(&self, x: i64) -> Q {
        let x = Q::from_integer(x as i128);
        self.coeffs.iter().rev().fold(Q::zero(), |acc, &c| acc * x + c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + to_f64(c))
    }

    pub fn scale(&self, k: Q) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + other.coeff(i)).collect())
    }

    fn mul_linear(&self, root: Q) -> Poly {
        // (x - root) * self
        let mut out = vec![Q::zero(); self.coeffs.len() + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i + 1] += c;
            out[i] -= c * root;
        }
        Poly::new(out)
    }

    /// Newton-form interpolation through `(xs[i], ys[i])`.
    pub fn interpolate(xs: &[i64], ys: &[Q]) -> Poly {
        assert_eq!(xs.len(), ys.len());
        let n = xs.len();
        let xq: Vec<Q> = xs.iter().map(|&x| Q::from_integer(x as i128)).collect();
        let mut dd: Vec<Q> = ys.to_vec();
        for level in 1..n {
            for i in (level..n).rev() {
                dd[i] = (dd[i] - dd[i - 1]) / (xq[i] - xq[i - level]);
            }
        }
        let mut result = Poly::zero();
        let mut basis = Poly::constant(Q::one());
        for i in 0..n {
            result = result.add(&basis.scale(dd[i]));
            basis = basis.mul_linear(xq[i]);
        }
        result
    }

    /// Writes the polynomial over a common denominator, e.g. `(2N^3 - 6N^2 + 4N)/3`.
    /// Returns `(numerator text, denominator)`.
    pub fn numerator_form(&self, var: &str) -> (String, i128) {
        let denom = self.coeffs.iter().fold(1i128, |acc, c| lcm(acc, *c.denom()));
        let mut parts: Vec<String> = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let num = (c * Q::from_integer(denom)).to_integer();
            let mag = num.abs();
            let body = match (k, mag) {
                (0, m) => m.to_string(),
                (1, 1) => var.to_string(),
                (1, m) => format!("{m}{var}"),
                (k, 1) => format!("{var}^{k}"),
                (k, m) => format!("{m}{var}^{k}"),
            };
            let sign = if num < 0 { "-" } else { "+" };
            if parts.is_empty() {
                parts.push(if num < 0 { format!("-{body}") } else { body });
            } else {
                parts.push(format!("{sign} {body}"));
            }
        }
        if parts.is_empty() {
            return ("0".into(), 1);
        }
        (parts.join(" "), denom)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (num, den) = self.numerator_form("N");
        if den == 1 {
            write!(f, "{num}")
        } else {
            write!(f, "({num})/{den}")
        }
    }
}

pub fn to_f64(q: &Q) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    a / gcd(a, b) * b
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// returned only when it matches to within `tol` relative.
pub fn rationalize(x: f64, max_den: i128, tol: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x.abs();
    for _ in 0..40 {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x.abs()).abs() <= tol * x.abs().max(1e-300) {
            let q = Q::new(h1, k1);
            return Some(if x < 0.0 { -q } else { q });
        }
        let frac = r - r.floor();
        if frac < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}
