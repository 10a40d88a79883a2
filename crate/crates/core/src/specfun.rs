//! Modified Bessel functions I₀, I₁, modified Struve functions L₀, L₁ and the
//! hyperbolic helpers used by the spectral-diffusion kernels.
//!
//! Evaluation regimes:
//!
//! | quantity            | low range            | middle range             | high range                   |
//! |---------------------|----------------------|--------------------------|------------------------------|
//! | I₀, I₁              | power series, ≤ 20   |                          | Hankel expansion of e^(−x)·I |
//! | L₀, L₁              | power series, ≤ 30   |                          | I(x) − [I(x) − L(x)]         |
//! | I − L differences   | subtraction, ≤ 8     | quadrature table, ≤ 25   | asymptotic expansion         |
//! | I₁L₀ − I₀L₁ kernel  | direct products, ≤ 8 | I₀·(I₁−L₁) − I₁·(I₀−L₀)  | same, asymptotic differences |
//!
//! In the middle range the differences come from the integral representations
//! I₀ − L₀ = (2/π)∫₀^{π/2} e^(−x sin φ) dφ and
//! I₁ − L₁ = (2x/π)∫₀^{π/2} cos²φ e^(−x sin φ) dφ, integrated once with
//! Gauss–Legendre panels and stored as Chebyshev expansions.
//!
//! All series have strictly positive terms, so they are summed without
//! cancellation. The unscaled Bessel and Struve values overflow past
//! x ≈ 709; the `_scaled` variants stay finite for any argument.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Power series is used for I₀/I₁ up to this argument.
pub const BESSEL_SERIES_MAX: f64 = 20.0;
/// Power series is used for L₀/L₁ up to this argument.
pub const STRUVE_SERIES_MAX: f64 = 30.0;
/// Below this argument I − L and the kernel are formed by direct subtraction.
pub const DIFFERENCE_DIRECT_MAX: f64 = 8.0;
/// Above this argument I − L is taken from its asymptotic expansion.
pub const DIFFERENCE_ASYMPTOTIC_MIN: f64 = 25.0;

const CHEB_DEGREE: usize = 48;
const GL_ORDER: usize = 24;

const SERIES_EPS: f64 = 1e-17;
const MAX_SERIES_TERMS: usize = 500;

fn check_arg(func: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::domain(func, format!("argument must be finite, got {x}")));
    }
    if x < 0.0 {
        return Err(Error::domain(func, format!("argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Σ (x²/4)^k / (k! (k+ν)!) for ν ∈ {0, 1}, without the (x/2)^ν prefactor.
fn bessel_series(x: f64, nu: u32) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_SERIES_TERMS {
        let k = k as f64;
        term *= q / (k * (k + nu as f64));
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    sum
}

/// e^(−x)·I_ν(x)·√(2πx) from the Hankel expansion, valid for large x.
fn bessel_hankel(x: f64, nu: u32) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() {
            break;
        }
    }
    sum
}

pub(crate) fn i0_scaled_raw(x: f64) -> f64 {
    if x <= BESSEL_SERIES_MAX {
        bessel_series(x, 0) * (-x).exp()
    } else {
        bessel_hankel(x, 0) / (2.0 * PI * x).sqrt()
    }
}

pub(crate) fn i1_scaled_raw(x: f64) -> f64 {
    if x <= BESSEL_SERIES_MAX {
        0.5 * x * bessel_series(x, 1) * (-x).exp()
    } else {
        bessel_hankel(x, 1) / (2.0 * PI * x).sqrt()
    }
}

fn i0_raw(x: f64) -> f64 {
    if x <= BESSEL_SERIES_MAX {
        bessel_series(x, 0)
    } else {
        unscale(i0_scaled_raw(x), x)
    }
}

fn i1_raw(x: f64) -> f64 {
    if x <= BESSEL_SERIES_MAX {
        0.5 * x * bessel_series(x, 1)
    } else {
        unscale(i1_scaled_raw(x), x)
    }
}

// Splits e^x to postpone overflow until the product itself overflows.
fn unscale(scaled: f64, x: f64) -> f64 {
    let half = (0.5 * x).exp();
    scaled * half * half
}

/// L₀ series: Σ (x/2)^(2k+1) / Γ(k+3/2)².
fn struve_l0_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let q = h * h;
    // (x/2) / Γ(3/2)² = (x/2)·4/π
    let mut term = h * 4.0 / PI;
    let mut sum = term;
    for k in 0..MAX_SERIES_TERMS {
        let a = k as f64 + 1.5;
        term *= q / (a * a);
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    sum
}

/// L₁ series: Σ (x/2)^(2k+2) / (Γ(k+3/2) Γ(k+5/2)).
fn struve_l1_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let q = h * h;
    // (x/2)² / (Γ(3/2) Γ(5/2)) = (x/2)²·8/(3π)
    let mut term = q * 8.0 / (3.0 * PI);
    let mut sum = term;
    for k in 0..MAX_SERIES_TERMS {
        let k = k as f64;
        term *= q / ((k + 2.5) * (k + 1.5));
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    sum
}

/// Asymptotic I₀ − L₀ = (2/(πx)) Σ [(2k−1)!!]² / x^(2k).
fn i0_minus_l0_asymptotic(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd * inv2;
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
    }
    2.0 / (PI * x) * sum
}

/// Asymptotic I₁ − L₁ = (2/π) [1 − Σ_{k≥1} (2k−3)!!(2k−1)!! / x^(2k)].
fn i1_minus_l1_asymptotic(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    // term_k / term_{k-1} = (2k−3)(2k−1)/x², with term_1 = −1/x²
    let mut term = -inv2;
    let mut sum = 1.0 + term;
    for k in 2..80 {
        let next = term * ((2 * k - 3) * (2 * k - 1)) as f64 * inv2;
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() {
            break;
        }
    }
    2.0 / PI * sum
}

/// Gauss–Legendre nodes and weights on [−1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// (I₀ − L₀, I₁ − L₁) by panel quadrature of the integral representations.
fn differences_by_quadrature(x: f64, gl: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    const BREAKS: [f64; 9] = [0.0, 0.01, 0.03, 0.06, 0.12, 0.25, 0.5, 1.0, PI / 2.0];
    let (nodes, weights) = gl;
    let (mut d0, mut d1) = (0.0, 0.0);
    for pair in BREAKS.windows(2) {
        let half = 0.5 * (pair[1] - pair[0]);
        let mid = 0.5 * (pair[1] + pair[0]);
        for (z, w) in nodes.iter().zip(weights) {
            let phi = mid + half * z;
            let e = (-x * phi.sin()).exp() * w * half;
            let c = phi.cos();
            d0 += e;
            d1 += c * c * e;
        }
    }
    (2.0 / PI * d0, 2.0 * x / PI * d1)
}

struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    fn fit(lo: f64, hi: f64, samples: &[f64]) -> Self {
        let n = samples.len();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, f)| f * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                2.0 * s / n as f64
            })
            .collect();
        Chebyshev { lo, hi, coeffs }
    }

    fn nodes(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |k| {
            let t = (PI * (k as f64 + 0.5) / n as f64).cos();
            0.5 * (hi + lo) + 0.5 * (hi - lo) * t
        })
    }

    // Clenshaw recurrence
    fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + 0.5 * self.coeffs[0]
    }
}

struct DifferenceTable {
    d0: Chebyshev,
    d1: Chebyshev,
}

fn difference_table() -> &'static DifferenceTable {
    static TABLE: OnceLock<DifferenceTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let gl = gauss_legendre(GL_ORDER);
        let (lo, hi) = (DIFFERENCE_DIRECT_MAX, DIFFERENCE_ASYMPTOTIC_MIN);
        let (s0, s1): (Vec<f64>, Vec<f64>) = Chebyshev::nodes(lo, hi, CHEB_DEGREE)
            .map(|x| differences_by_quadrature(x, &gl))
            .unzip();
        DifferenceTable {
            d0: Chebyshev::fit(lo, hi, &s0),
            d1: Chebyshev::fit(lo, hi, &s1),
        }
    })
}

fn i0_minus_l0_raw(x: f64) -> f64 {
    if x > DIFFERENCE_ASYMPTOTIC_MIN {
        i0_minus_l0_asymptotic(x)
    } else if x > DIFFERENCE_DIRECT_MAX {
        difference_table().d0.eval(x)
    } else {
        bessel_series(x, 0) - struve_l0_series(x)
    }
}

fn i1_minus_l1_raw(x: f64) -> f64 {
    if x > DIFFERENCE_ASYMPTOTIC_MIN {
        i1_minus_l1_asymptotic(x)
    } else if x > DIFFERENCE_DIRECT_MAX {
        difference_table().d1.eval(x)
    } else {
        0.5 * x * bessel_series(x, 1) - struve_l1_series(x)
    }
}

/// e^(−x)·[I₁(x)L₀(x) − I₀(x)L₁(x)], for x ≥ 0. No argument checks.
pub(crate) fn kernel_scaled_raw(x: f64) -> f64 {
    if x <= DIFFERENCE_DIRECT_MAX {
        i1_scaled_raw(x) * struve_l0_series(x) - i0_scaled_raw(x) * struve_l1_series(x)
    } else {
        i0_scaled_raw(x) * i1_minus_l1_raw(x) - i1_scaled_raw(x) * i0_minus_l0_raw(x)
    }
}

/// Modified Bessel function of the first kind, order zero.
///
/// Relative error below 1e-10 on [0, 700]. Returns `+inf` once the true
/// value exceeds the `f64` range; use [`bessel_i0_scaled`] there.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_arg("bessel_i0", x)?;
    Ok(i0_raw(x))
}

/// Modified Bessel function of the first kind, order one.
pub fn bessel_i1(x: f64) -> Result<f64> {
    check_arg("bessel_i1", x)?;
    Ok(i1_raw(x))
}

/// e^(−x)·I₀(x), finite for every x ≥ 0.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_arg("bessel_i0_scaled", x)?;
    Ok(i0_scaled_raw(x))
}

/// e^(−x)·I₁(x), finite for every x ≥ 0.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    check_arg("bessel_i1_scaled", x)?;
    Ok(i1_scaled_raw(x))
}

/// Modified Struve function L₀.
pub fn struve_l0(x: f64) -> Result<f64> {
    check_arg("struve_l0", x)?;
    if x <= STRUVE_SERIES_MAX {
        Ok(struve_l0_series(x))
    } else {
        Ok(i0_raw(x) - i0_minus_l0_asymptotic(x))
    }
}

/// Modified Struve function L₁.
pub fn struve_l1(x: f64) -> Result<f64> {
    check_arg("struve_l1", x)?;
    if x <= STRUVE_SERIES_MAX {
        Ok(struve_l1_series(x))
    } else {
        Ok(i1_raw(x) - i1_minus_l1_asymptotic(x))
    }
}

/// I₀(x) − L₀(x). Tends to 2/(πx) for large x.
///
pub fn i0_minus_l0(x: f64) -> Result<f64> {
    check_arg("i0_minus_l0", x)?;
    Ok(i0_minus_l0_raw(x))
}

/// I₁(x) − L₁(x). Tends to 2/π for large x.
pub fn i1_minus_l1(x: f64) -> Result<f64> {
    check_arg("i1_minus_l1", x)?;
    Ok(i1_minus_l1_raw(x))
}

/// The combination K(x) = I₁(x)L₀(x) − I₀(x)L₁(x) scaled by e^(−x).
///
/// K(x) ≈ x²/(3π) near zero and grows like (2/π)·I₀(x) for large x.
pub fn bessel_struve_kernel_scaled(x: f64) -> Result<f64> {
    check_arg("bessel_struve_kernel_scaled", x)?;
    Ok(kernel_scaled_raw(x))
}

/// sech²(x) = 1/cosh²(x), evaluated without overflow.
pub fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// coth(x), evaluated without overflow or loss of precision near zero.
pub fn coth(x: f64) -> Result<f64> {
    if x == 0.0 || x.is_nan() {
        return Err(Error::domain("coth", format!("argument must be nonzero, got {x}")));
    }
    let a = x.abs();
    let e = (-2.0 * a).exp();
    let value = (1.0 + e) / -(-2.0 * a).exp_m1();
    Ok(value.copysign(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Naive factorial-based series, deliberately independent of the
    // recurrence used by the implementation.
    fn gamma_half_integer(twice: u32) -> f64 {
        // Γ(n/2) for odd n
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while 2.0 * a < twice as f64 {
            g *= a;
            a += 1.0;
        }
        g
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn oracle_i(nu: u32, x: f64) -> f64 {
        (0..60)
            .map(|k| (x / 2.0).powi((2 * k + nu) as i32) / (factorial(k) * factorial(k + nu)))
            .sum()
    }

    fn oracle_l(nu: u32, x: f64) -> f64 {
        (0..60)
            .map(|k| {
                (x / 2.0).powi((2 * k + 1 + nu) as i32)
                    / (gamma_half_integer(2 * k + 3) * gamma_half_integer(2 * k + 3 + 2 * nu))
            })
            .sum()
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
        for x in [1.0, 2.0] {
            assert!(rel(bessel_i0(x).unwrap(), oracle_i(0, x)) < 1e-13);
            assert!(rel(bessel_i1(x).unwrap(), oracle_i(1, x)) < 1e-13);
        }
        assert!((bessel_i0(1.0).unwrap() - 1.2660658).abs() < 1e-7);
        assert!((bessel_i0(2.0).unwrap() - 2.2795853).abs() < 1e-7);
        assert!((bessel_i1(1.0).unwrap() - 0.5651591).abs() < 1e-7);
        assert!((bessel_i1(2.0).unwrap() - 1.5906369).abs() < 1e-7);
    }

    #[test]
    fn bessel_reference_values() {
        // 30-digit reference values
        let table = [
            (0.5, 1.063_483_370_741_323_5, 0.257_894_305_390_896_3),
            (5.0, 27.239_871_823_604_447, 24.335_642_142_450_527),
            (10.0, 2_815.716_628_466_254_5, 2_670.988_303_701_254_7),
            (20.0, 43_558_282.559_553_53, 42_454_973.385_127_77),
            (25.0, 5_774_560_606.466_31, 5_657_865_129.878_701),
            (50.0, 2.932_553_783_849_336_3e20, 2.903_078_590_103_557e20),
            (100.0, 1.073_751_707_131_073_8e42, 1.068_369_390_338_162_5e42),
            (300.0, 4.475_847_367_935_052e128, 4.468_381_385_036_955e128),
            (700.0, 1.529_593_347_671_873_7e302, 1.528_500_390_233_900_7e302),
        ];
        for (x, i0, i1) in table {
            assert!(rel(bessel_i0(x).unwrap(), i0) < 1e-10, "I0({x})");
            assert!(rel(bessel_i1(x).unwrap(), i1) < 1e-10, "I1({x})");
        }
    }

    #[test]
    fn struve_examples() {
        assert_eq!(struve_l0(0.0).unwrap(), 0.0);
        assert_eq!(struve_l1(0.0).unwrap(), 0.0);
        assert!(rel(struve_l0(1.0).unwrap(), oracle_l(0, 1.0)) < 1e-13);
        assert!(rel(struve_l1(2.0).unwrap(), oracle_l(1, 2.0)) < 1e-13);
        assert!((struve_l0(1.0).unwrap() - 0.7102432).abs() < 1e-7);
        assert!((struve_l1(2.0).unwrap() - 1.1027598).abs() < 1e-7);
    }

    #[test]
    fn struve_reference_values() {
        let table = [
            (0.5, 0.327_240_699_394_180_8, 0.053_942_182_623_522_66),
            (5.0, 27.105_917_126_558_147, 23.728_215_780_408_28),
            (10.0, 2_815.652_249_374_594_8, 2_670.358_285_208_483),
            (20.0, 43_558_282.527_641_05, 42_454_972.750_111_98),
            (30.0, 781_672_297_823.956_2, 768_532_038_938.321),
            (40.0, 1.489_477_479_341_99e16, 1.470_739_616_325_935_2e16),
            (50.0, 2.932_553_783_849_336_3e20, 2.903_078_590_103_557e20),
        ];
        for (x, l0, l1) in table {
            assert!(rel(struve_l0(x).unwrap(), l0) < 1e-8, "L0({x})");
            assert!(rel(struve_l1(x).unwrap(), l1) < 1e-8, "L1({x})");
        }
    }

    #[test]
    fn differences_match_reference() {
        let table = [
            (25.0, 0.025_506_146_883_504_74, 0.635_596_166_773_594_6),
            (50.0, 0.012_737_506_927_242_585, 0.636_364_817_021_336_1),
            (100.0, 0.006_366_834_917_845_447, 0.636_556_091_263_002_6),
            (1000.0, 0.000_636_620_408_993_083_4, 0.636_619_135_745_899_1),
        ];
        for (x, d0, d1) in table {
            assert!(rel(i0_minus_l0(x).unwrap(), d0) < 1e-10, "D0({x})");
            assert!(rel(i1_minus_l1(x).unwrap(), d1) < 1e-10, "D1({x})");
        }
        let middle = [
            (10.0, 0.064_379_091_659_615_92, 0.630_018_492_771_685),
            (12.0, 0.053_449_421_441_089_58, 0.632_093_152_749_097_6),
            (17.0, 0.037_582_274_342_808_67, 0.634_392_686_323_920_9),
            (20.0, 0.031_912_486_554_480_39, 0.635_015_790_732_577_7),
        ];
        for (x, d0, d1) in middle {
            assert!(rel(i0_minus_l0(x).unwrap(), d0) < 1e-10, "D0({x})");
            assert!(rel(i1_minus_l1(x).unwrap(), d1) < 1e-10, "D1({x})");
        }
    }

    #[test]
    fn kernel_reference_values() {
        let table = [
            (1e-3, 1.059_972_530_829_641_5e-7),
            (1e-2, 1.050_483_378_246_290_8e-5),
            (0.1, 9.607_825_795_727_652e-4),
            (1.0, 0.042_049_266_650_878_92),
            (5.0, 0.089_522_672_747_010_43),
            (17.0, 0.058_295_067_902_709_003),
            (20.0, 0.054_219_374_604_902_67),
            (40.0, 0.039_263_918_205_748_58),
        ];
        for (x, k) in table {
            assert!(rel(bessel_struve_kernel_scaled(x).unwrap(), k) < 1e-8, "K({x})");
        }
    }

    #[test]
    fn differences_continuous_across_regimes() {
        for switch in [DIFFERENCE_DIRECT_MAX, DIFFERENCE_ASYMPTOTIC_MIN] {
            let (lo, hi) = (switch * (1.0 - 1e-12), switch * (1.0 + 1e-12));
            assert!(rel(i0_minus_l0(lo).unwrap(), i0_minus_l0(hi).unwrap()) < 1e-10);
            assert!(rel(i1_minus_l1(lo).unwrap(), i1_minus_l1(hi).unwrap()) < 1e-10);
            let (klo, khi) = (
                bessel_struve_kernel_scaled(lo).unwrap(),
                bessel_struve_kernel_scaled(hi).unwrap(),
            );
            assert!(rel(klo, khi) < 1e-9, "kernel jump at {switch}");
        }
    }

    #[test]
    fn kernel_small_argument_limit() {
        for x in [1e-6, 1e-4, 1e-3, 1e-2] {
            let k = bessel_struve_kernel_scaled(x).unwrap() * x.exp();
            let ratio = k / (x * x / (3.0 * PI));
            assert!((ratio - 1.0).abs() < 0.01, "x={x} ratio={ratio}");
        }
    }

    #[test]
    fn kernel_positive() {
        let mut x = 1e-6;
        while x < 5e3 {
            assert!(bessel_struve_kernel_scaled(x).unwrap() > 0.0, "x={x}");
            x *= 1.37;
        }
    }

    #[test]
    fn derivative_of_i0_is_i1() {
        for i in 1..=300 {
            let x = i as f64 * 0.1;
            let h = 1e-5 * x.max(1.0);
            let fd = (bessel_i0(x + h).unwrap() - bessel_i0(x - h).unwrap()) / (2.0 * h);
            assert!(rel(fd, bessel_i1(x).unwrap()) < 1e-6, "x={x}");
        }
    }

    #[test]
    fn scaled_variants_are_continuous_at_switch() {
        let below = bessel_i0_scaled(BESSEL_SERIES_MAX).unwrap();
        let above = bessel_i0_scaled(BESSEL_SERIES_MAX * (1.0 + 1e-12)).unwrap();
        assert!(rel(above, below) < 1e-12);
        let below = bessel_i1_scaled(BESSEL_SERIES_MAX).unwrap();
        let above = bessel_i1_scaled(BESSEL_SERIES_MAX * (1.0 + 1e-12)).unwrap();
        assert!(rel(above, below) < 1e-12);
        assert!(bessel_i0_scaled(1e6).unwrap().is_finite());
        assert!(bessel_i0(800.0).unwrap().is_infinite());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bessel_i0(-1.0).is_err());
        assert!(bessel_i1(f64::NAN).is_err());
        assert!(struve_l0(f64::INFINITY).is_err());
        assert!(struve_l1(-0.5).is_err());
        assert!(coth(0.0).is_err());
    }

    #[test]
    fn hyperbolic_helpers() {
        assert_eq!(sech2(0.0), 1.0);
        assert!((sech2(1.0) - 0.419_974_341_614_026_1).abs() < 1e-15);
        assert!((coth(1.0).unwrap() - 1.313_035_285_499_331_3).abs() < 1e-15);
        assert_eq!(coth(50.0).unwrap(), 1.0);
        assert!((coth(1e-8).unwrap() - 1e8).abs() / 1e8 < 1e-12);
        assert_eq!(coth(-2.0).unwrap(), -coth(2.0).unwrap());
        assert!(sech2(1e4).is_finite() && coth(1e4).unwrap() == 1.0);
        for i in 1..200 {
            let x = i as f64 * 0.1;
            let s = sech2(x);
            assert!(s > 0.0 && s < 1.0);
            assert!(coth(x).unwrap() > 1.0 || x > 18.0);
        }
    }

    #[test]
    fn deterministic() {
        let a = bessel_struve_kernel_scaled(3.3).unwrap();
        let b = bessel_struve_kernel_scaled(3.3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
