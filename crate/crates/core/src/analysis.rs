//! Closed-form diagnostics around a computed bound.

use crate::quantum::{noise_term, ObjectiveBreakdown};

/// Noise tolerance of a design: bound as a function of the average error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseReport {
    /// Noiseless numerator.
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub eps_max: f64,
}

impl NoiseReport {
    pub fn from_breakdown(breakdown: &ObjectiveBreakdown) -> Self {
        let n = breakdown.n();
        Self {
            a: breakdown.noiseless_numerator(),
            b: breakdown.denominator_b,
            n,
            eps_max: eps_max(breakdown, n),
        }
    }

    /// `(A + (3/2)n(n−1)ε̄)/B`
    pub fn bound_at(&self, eps_bar: f64) -> f64 {
        (self.a + noise_term(self.n, eps_bar)) / self.b
    }
}

/// Largest average error that keeps the bound below one:
/// `2(B − A)/(3n² − 3n)` with `A` the noiseless numerator, clamped at zero.
pub fn eps_max(breakdown: &ObjectiveBreakdown, n: usize) -> f64 {
    eps_max_from_parts(breakdown.noiseless_numerator(), breakdown.denominator_b, n)
}

pub fn eps_max_from_parts(a: f64, b: f64, n: usize) -> f64 {
    let pairs3 = (3 * n * n - 3 * n) as f64;
    if b > a && pairs3 > 0.0 {
        2.0 * (b - a) / pairs3
    } else {
        0.0
    }
}

/// Convex-relaxation floor: `(1 + (3/2)n(n−1)ε̄)/n`, attained by `ρ_i = ρ_c`
/// with the bilinear numerator terms dropped.
pub fn lower_bound(n: usize, eps_bar: f64) -> f64 {
    (1.0 + noise_term(n, eps_bar)) / n as f64
}

/// `bound ≥ lower_bound(n, ε̄) − 1e-9`; a violation means a solver bug.
pub fn lower_bound_check(breakdown: &ObjectiveBreakdown) -> bool {
    breakdown.bound >= lower_bound(breakdown.n(), breakdown.eps_bar) - 1e-9
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiteratureBound {
    pub name: &'static str,
    pub value: f64,
    /// `true` for `k₀ < value`, `false` for `k₀ ≤ value`.
    pub strict: bool,
    pub applicability: &'static str,
}

fn is_prime_power(d: usize) -> bool {
    if d < 2 {
        return false;
    }
    let p = (2..=d).find(|p| d.is_multiple_of(*p)).unwrap_or(d);
    let mut rest = d;
    while rest.is_multiple_of(p) {
        rest /= p;
    }
    rest == 1
}

/// Published reference bounds that apply to `(d, n)`; formulas outside
/// their validity range are omitted.
pub fn literature_bounds(d: usize, n: usize) -> Vec<LiteratureBound> {
    let mut out = Vec::new();
    if d >= 4 && is_prime_power(d) && n == d * d {
        out.push(LiteratureBound {
            name: "bclm_prime_power",
            value: 2.0 / d as f64,
            strict: true,
            applicability: "d >= 4 a prime power, n = d^2",
        });
    }
    if d >= 4 && !is_prime_power(d) {
        out.push(LiteratureBound {
            name: "bclm_general",
            value: 4.0 / (d as f64 - 1.0),
            strict: true,
            applicability: "d >= 4 not a prime power",
        });
    }
    if d == 3 && n == 9 {
        out.push(LiteratureBound {
            name: "bclm_approximate",
            value: 0.95,
            strict: false,
            applicability: "d = 3, n = 9",
        });
    }
    if d >= 3 && d < usize::BITS as usize && n == 1usize << (d - 1) {
        out.push(LiteratureBound {
            name: "hadamard",
            value: 4.0 * d as f64 / 2f64.powi(d as i32),
            strict: true,
            applicability: "d >= 3, n = 2^(d-1)",
        });
    }
    if d >= 4 && n >= 1 {
        out.push(LiteratureBound {
            name: "branciard",
            value: 8.0 / (n as f64).powf((d as f64 - 3.0) / (d as f64 - 2.0)),
            strict: false,
            applicability: "d >= 4",
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn breakdown(a: f64, b: f64, n: usize, eps_bar: f64) -> ObjectiveBreakdown {
        let numerator_a = a + noise_term(n, eps_bar);
        ObjectiveBreakdown {
            numerator_a,
            denominator_b: b,
            bound: numerator_a / b,
            antidist: vec![],
            overlaps: vec![b / n as f64; n],
            eps_bar,
        }
    }

    #[test]
    fn eps_max_examples() {
        let e = eps_max(&breakdown(1.2018, 1.5003, 3, 0.0), 3);
        assert!((e - 0.0332).abs() < 5e-5, "{e}");
        assert_eq!(eps_max(&breakdown(1.3, 1.3, 3, 0.0), 3), 0.0);
        assert_eq!(eps_max(&breakdown(1.4, 1.3, 3, 0.0), 3), 0.0);
    }

    #[test]
    fn eps_max_restores_unit_bound() {
        let report = NoiseReport::from_breakdown(&breakdown(1.2018, 1.5003, 3, 0.001));
        assert!((report.bound_at(0.0) - 1.2018 / 1.5003).abs() < 1e-12);
        assert!((report.bound_at(report.eps_max) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_examples() {
        assert!((lower_bound(3, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((lower_bound(10, 0.0) - 0.1).abs() < 1e-15);
        assert!((lower_bound(10, 0.0015) - 0.120_25).abs() < 1e-12);
        for n in 2..20 {
            assert!(lower_bound(n + 1, 0.0) < lower_bound(n, 0.0));
            assert!(lower_bound(n, 0.002) > lower_bound(n, 0.001));
        }
    }

    #[test]
    fn lower_bound_check_flags_impossible_bounds() {
        assert!(!lower_bound_check(&breakdown(0.6, 3.0, 3, 0.0)));
        assert!(lower_bound_check(&breakdown(1.2018, 1.5003, 3, 0.0)));
    }

    #[test]
    fn literature_values() {
        let find = |d, n, name| literature_bounds(d, n).into_iter().find(|b| b.name == name).map(|b| b.value);
        assert_eq!(find(4, 16, "bclm_prime_power"), Some(0.5));
        assert_eq!(find(4, 15, "bclm_prime_power"), None);
        assert_eq!(find(5, 16, "hadamard"), Some(0.625));
        assert_eq!(find(3, 9, "bclm_approximate"), Some(0.95));
        assert_eq!(find(6, 10, "bclm_general"), Some(0.8));
        assert_eq!(find(3, 10, "branciard"), None);
        assert!((find(4, 16, "branciard").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn prime_powers() {
        let pp: Vec<usize> = (2..20).filter(|&d| is_prime_power(d)).collect();
        assert_eq!(pp, vec![2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19]);
    }
}
