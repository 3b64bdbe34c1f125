//! Evaluation of alternating hypergeometric-type sums in trigonometric
//! powers, exactly in the dyadic values of `sin γ` and `cos γ`, or in log
//! space with compensated summation.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::float::FloatCore;
use num_traits::{ToPrimitive, Zero};

/// Largest sum length evaluated exactly by default.
pub const EXACT_LIMIT: u64 = 512;

/// Absolute error budget of the log-space path before it defers to exact
/// arithmetic.
const LOG_SPACE_BUDGET: f64 = 1e-12;

fn decode(x: f64) -> (BigUint, i64) {
    let (m, e, _) = FloatCore::integer_decode(x);
    (BigUint::from(m), e as i64)
}

/// A sum `Σ_{i=0}^{len-1} t_i` with
/// `t_0 = sign · sin^{s0}γ · cos^{c0}γ · coef0` and
/// `t_{i+1}/t_i = -tan²γ · num(i)/den(i)`.
pub(crate) struct TrigSeries<F: Fn(u64) -> (u128, u128)> {
    pub gamma: f64,
    pub negative_first: bool,
    pub sin_pow: u64,
    pub cos_pow: u64,
    pub coef0: u128,
    pub len: u64,
    pub ratio: F,
}

impl<F: Fn(u64) -> (u128, u128)> TrigSeries<F> {
    pub fn eval(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        if self.len <= EXACT_LIMIT {
            return self.exact();
        }
        match self.log_space() {
            Some(v) => v,
            None => self.exact(),
        }
    }

    pub fn exact(&self) -> f64 {
        if self.len == 0 {
            return 0.0;
        }
        let (s, c) = self.gamma.sin_cos();
        if s == 0.0 {
            return if self.sin_pow == 0 { self.first_f64(s, c) } else { 0.0 };
        }
        let (ms, es) = decode(s);
        let (mc, ec) = decode(c);
        let (ms2, mc2) = (&ms * &ms, &mc * &mc);
        let shift = 2 * (es - ec);
        // nested Horner: acc = 1 + r_i · acc, held as a/d
        let mut a = BigInt::from(1);
        let mut d = BigUint::from(1u32);
        for i in (0..self.len - 1).rev() {
            let (pn, pd) = (self.ratio)(i);
            let mut num = &ms2 * BigUint::from(pn);
            let mut den = &mc2 * BigUint::from(pd);
            if shift >= 0 {
                num <<= shift as usize;
            } else {
                den <<= (-shift) as usize;
            }
            a = BigInt::from_biguint(Sign::Plus, &d * &den) - BigInt::from_biguint(Sign::Plus, num) * a;
            d *= den;
        }
        let first = ms.pow(self.sin_pow as u32) * mc.pow(self.cos_pow as u32) * BigUint::from(self.coef0);
        let e0 = es * self.sin_pow as i64 + ec * self.cos_pow as i64;
        let (sign, a) = a.into_parts();
        if a.is_zero() {
            return 0.0;
        }
        let q = first * a;
        let offset = q.bits() as i64 - d.bits() as i64 - 64;
        let scaled = if offset >= 0 { q >> offset as usize } else { q << (-offset) as usize };
        let quotient = (scaled / d).to_f64().unwrap_or(f64::INFINITY);
        let value = scale(quotient, offset + e0);
        let negative = (sign == Sign::Minus) != self.negative_first;
        if negative { -value } else { value }
    }

    fn first_f64(&self, s: f64, c: f64) -> f64 {
        let v = s.powi(self.sin_pow as i32) * c.powi(self.cos_pow as i32) * self.coef0 as f64;
        if self.negative_first { -v } else { v }
    }

    /// Log-space term recurrence with Neumaier summation; `None` when the
    /// cancellation error bound exceeds the budget.
    pub fn log_space(&self) -> Option<f64> {
        let (s, c) = self.gamma.sin_cos();
        if s == 0.0 {
            return Some(if self.sin_pow == 0 { self.first_f64(s, c) } else { 0.0 });
        }
        let lt2 = 2.0 * (s / c).ln();
        let mut logs = Vec::with_capacity(self.len as usize);
        let mut l = self.sin_pow as f64 * s.ln() + self.cos_pow as f64 * c.ln() + (self.coef0 as f64).ln();
        let mut lerr = f64::EPSILON * (2.0 * l.abs() + 1.0);
        logs.push((l, lerr));
        for i in 0..self.len - 1 {
            let (pn, pd) = (self.ratio)(i);
            if pn == 0 {
                break;
            }
            let (a, b) = ((pn as f64).ln(), (pd as f64).ln());
            l += lt2 + a - b;
            lerr += f64::EPSILON * (lt2.abs() + a + b + l.abs());
            logs.push((l, lerr));
        }
        let top = logs.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let (mut sum, mut comp, mut bound) = (0.0f64, 0.0f64, 0.0f64);
        for (i, &(l, e)) in logs.iter().enumerate() {
            let mag = (l - top).exp();
            let t = if (i % 2 == 1) != self.negative_first { -mag } else { mag };
            bound += mag * (e + 2.0 * f64::EPSILON);
            let next = sum + t;
            comp += if sum.abs() >= t.abs() { (sum - next) + t } else { (t - next) + sum };
            sum = next;
        }
        let factor = top.exp();
        let bound = bound * factor;
        (bound <= LOG_SPACE_BUDGET).then_some((sum + comp) * factor)
    }
}

/// `x · 2^e` without intermediate overflow.
fn scale(x: f64, e: i64) -> f64 {
    let mut v = x;
    let mut e = e;
    while e > 1000 {
        v = libm::scalbn(v, 1000);
        e -= 1000;
    }
    while e < -1000 {
        v = libm::scalbn(v, -1000);
        e += 1000;
    }
    libm::scalbn(v, e as i32)
}

/// Exact `Σ ± coef · sin^a γ · cos^b γ` over arbitrary terms.
pub(crate) fn exact_term_sum(gamma: f64, terms: &[(bool, BigUint, u64, u64)]) -> f64 {
    let (s, c) = gamma.sin_cos();
    let (ms, es) = decode(s);
    let (mc, ec) = decode(c);
    let live: Vec<_> = terms.iter().filter(|t| !t.1.is_zero() && !(s == 0.0 && t.2 > 0)).collect();
    if live.is_empty() {
        return 0.0;
    }
    let exps: Vec<i64> = live.iter().map(|t| es * t.2 as i64 + ec * t.3 as i64).collect();
    let emin = *exps.iter().min().unwrap();
    let mut total = BigInt::zero();
    for (t, &e) in live.iter().zip(&exps) {
        let mag = (ms.pow(t.2 as u32) * mc.pow(t.3 as u32) * &t.1) << (e - emin) as usize;
        let v = BigInt::from_biguint(Sign::Plus, mag);
        if t.0 { total -= v } else { total += v }
    }
    let (sign, mag) = total.into_parts();
    if mag.is_zero() {
        return 0.0;
    }
    let offset = (mag.bits() as i64 - 64).max(0);
    let top = (mag >> offset as usize).to_f64().unwrap();
    let v = scale(top, offset + emin);
    if sign == Sign::Minus { -v } else { v }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_series(n: u64, gamma: f64) -> TrigSeries<impl Fn(u64) -> (u128, u128)> {
        // Σ_k (-1)^k C(n,k) sin^{2k} cos^{2(n-k)} = cos(2γ)^n
        TrigSeries {
            gamma,
            negative_first: false,
            sin_pow: 0,
            cos_pow: 2 * n,
            coef0: 1,
            len: n + 1,
            ratio: move |k| ((n - k) as u128, (k + 1) as u128),
        }
    }

    #[test]
    fn horner_matches_direct_exact_sum() {
        for &(n, g) in &[(1u64, 0.3), (7, 0.7), (40, std::f64::consts::FRAC_PI_4 - 0.01), (300, 0.05)] {
            let v = binom_series(n, g).exact();
            let terms: Vec<_> = (0..=n)
                .map(|k| (k % 2 == 1, crate::pathcomb::binomial(n, k as i64), 2 * k, 2 * (n - k)))
                .collect();
            let expect = exact_term_sum(g, &terms);
            assert!((v - expect).abs() <= 4.0 * f64::EPSILON * expect.abs(), "n={n}: {v} vs {expect}");
        }
        for &(n, g) in &[(3u64, 0.3f64), (9, 0.7)] {
            let expect = (2.0 * g).cos().powi(n as i32);
            assert!((binom_series(n, g).exact() - expect).abs() < 1e-13 * expect.abs());
        }
    }

    #[test]
    fn log_space_agrees_when_benign_and_refuses_cancellation() {
        let s = binom_series(2000, 1e-3);
        let l = s.log_space().unwrap();
        assert!((l - s.exact()).abs() < 1e-13);
        assert!(binom_series(2000, 0.5).log_space().is_none());
    }

    #[test]
    fn term_sum_is_exact() {
        let g = 0.4f64;
        let (s, c) = g.sin_cos();
        let terms = vec![(false, BigUint::from(3u32), 2, 1), (true, BigUint::from(1u32), 0, 3)];
        let v = exact_term_sum(g, &terms);
        assert!((v - (3.0 * s * s * c - c * c * c)).abs() < 1e-15);
    }
}
