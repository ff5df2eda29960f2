//! Compromise probability of a k-of-n custodian quorum.
//!
//! With each custodian independently compromised with probability p, the
//! quorum falls iff the number of compromised custodians X ~ Binomial(n, p)
//! reaches k, so the model's compromise probability is the upper tail
//! P(X >= k). Independence across custodians is an explicit modeling
//! assumption; correlated compromise is out of scope.
//!
//! The tail is summed directly (all terms positive, no cancellation):
//! exact u128 binomial coefficients up to n = 120 (the largest n whose
//! intermediate products stay inside u128), a log-factorial route above
//! that, Kahan compensation either way.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProbabilityError {
    #[error("quorum must satisfy 1 <= k <= n (got k={k}, n={n})")]
    BadQuorum { k: u64, n: u64 },
    #[error("probability must lie in [0, 1] (got {0})")]
    BadProbability(f64),
}

/// P(X >= k) for X ~ Binomial(n, p).
pub fn hack_probability(n: u64, k: u64, p: f64) -> Result<f64, ProbabilityError> {
    if k == 0 || k > n {
        return Err(ProbabilityError::BadQuorum { k, n });
    }
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(ProbabilityError::BadProbability(p));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let q = 1.0 - p;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    for i in k..=n {
        let term = if n <= EXACT_LIMIT {
            binomial_u128(n, i) as f64 * powi(p, i) * powi(q, n - i)
        } else {
            let ln_term = ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * q.ln();
            ln_term.exp()
        };
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok(sum.min(1.0))
}

fn powi(base: f64, exp: u64) -> f64 {
    base.powi(exp.min(i32::MAX as u64) as i32)
}

/// Largest n for which every intermediate product in `binomial_u128`
/// stays inside u128.
const EXACT_LIMIT: u64 = 120;

/// Exact C(n, k) in u128; valid for n <= EXACT_LIMIT.
fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Multiply before dividing; the intermediate stays exact because
        // acc * (n - i) is always divisible by (i + 1) at this point.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// ln C(n, k) via a compensated ln-factorial sum. Only used for
/// n > EXACT_LIMIT, where Monte-Carlo-level accuracy suffices.
fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 2..=n {
        let y = (i as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_compromise_probability() {
        for n in 1..=8 {
            for k in 1..=n {
                assert_eq!(hack_probability(n, k, 0.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn certain_compromise_probability() {
        assert_eq!(hack_probability(5, 3, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn three_custodians_two_quorum_half() {
        // Enumerating all 2^3 compromise patterns: 4 of 8 have >= 2
        // compromised, so the tail is exactly 0.5.
        let p = hack_probability(3, 2, 0.5).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singleton_equals_p() {
        let p = hack_probability(1, 1, 0.3).unwrap();
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn matches_exhaustive_enumeration_small_n() {
        // Brute force over all 2^n compromise patterns.
        for n in 1..=10u64 {
            for k in 1..=n {
                for &p in &[0.1, 0.37, 0.5, 0.9] {
                    let expect: f64 = (0..(1u32 << n))
                        .map(|mask| {
                            let c = mask.count_ones() as u64;
                            if c >= k {
                                powi(p, c) * powi(1.0 - p, n - c)
                            } else {
                                0.0
                            }
                        })
                        .sum();
                    let got = hack_probability(n, k, p).unwrap();
                    let rel = (got - expect).abs() / expect.max(f64::MIN_POSITIVE);
                    assert!(rel < 1e-12, "n={n} k={k} p={p}: {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn domain_violations_rejected() {
        assert!(hack_probability(5, 0, 0.5).is_err());
        assert!(hack_probability(5, 6, 0.5).is_err());
        assert!(hack_probability(5, 3, -0.1).is_err());
        assert!(hack_probability(5, 3, 1.1).is_err());
        assert!(hack_probability(5, 3, f64::NAN).is_err());
    }

    #[test]
    fn monotone_in_p_and_antitone_in_k() {
        for n in [3u64, 7, 20] {
            for k in 1..=n {
                let mut prev = 0.0;
                for step in 0..=10 {
                    let p = step as f64 / 10.0;
                    let v = hack_probability(n, k, p).unwrap();
                    assert!(v >= prev - 1e-15, "p-monotonicity n={n} k={k} p={p}");
                    prev = v;
                }
            }
            for &p in &[0.2, 0.5, 0.8] {
                let mut prev = 1.0;
                for k in 1..=n {
                    let v = hack_probability(n, k, p).unwrap();
                    assert!(v <= prev + 1e-15, "k-antitonicity n={n} k={k} p={p}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn log_route_agrees_with_exact_route() {
        // The large-n code path, applied at n = EXACT_LIMIT where the exact
        // u128 route is available for comparison.
        let n = EXACT_LIMIT;
        for &(k, p) in &[(60u64, 0.3), (80, 0.4), (40, 0.5), (100, 0.9)] {
            let exact = hack_probability(n, k, p).unwrap();
            let q = 1.0 - p;
            let logged: f64 = (k..=n)
                .map(|i| {
                    (ln_choose(n, i) + (i as f64) * p.ln() + ((n - i) as f64) * q.ln()).exp()
                })
                .sum();
            let rel = (exact - logged).abs() / exact;
            assert!(rel < 1e-10, "k={k} p={p}: {exact} vs {logged}");
        }
    }
}
