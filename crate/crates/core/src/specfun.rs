//! Special functions and the gamma prior.
//!
//! | function | method |
//! |---|---|
//! | [`log_gamma`] | Lanczos (g = 7) above 2.5, zeta series near the zero at 2, recurrence below |
//! | [`reg_inc_beta`] | Lentz continued fraction with the usual symmetry switch |
//! | [`reg_lower_gamma`] / [`reg_upper_gamma`] | power series below `a + 1`, continued fraction above |
//!
//! Everything here takes and returns `f64`. Argument checks return
//! [`Error::Domain`]; the `ln_gamma` style helpers without a `Result` are for
//! hot loops whose arguments are already validated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 20_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

// zeta(k) - 1 for k = 2, 3, ...
const ZETA_MINUS_ONE: [f64; 38] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    0.000_994_575_127_818_085_3,
    0.000_494_188_604_119_464_6,
    0.000_246_086_553_308_048_3,
    0.000_122_713_347_578_489_1,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_840e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_330e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
    4.656_629_065_033_784e-10,
    2.328_311_833_676_505e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_701e-11,
    2.910_385_044_497_100e-11,
    1.455_192_189_104_198e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651e-12,
    1.818_989_650_307_066e-12,
];

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "log_gamma needs a finite x > 0, got {x}"
        )));
    }
    Ok(ln_gamma(x))
}

/// Unchecked [`log_gamma`].
pub(crate) fn ln_gamma(x: f64) -> f64 {
    // the zeros at 1 and 2 get their own series so the relative error stays small
    if (0.75..=1.25).contains(&x) {
        return zeta_series(x - 1.0, 1.0, -EULER_GAMMA);
    }
    if x < 1.5 {
        return ln_gamma(x + 1.0) - x.ln();
    }
    if x <= 2.5 {
        return zeta_series(x - 2.0, 0.0, 1.0 - EULER_GAMMA);
    }
    let z = x - 1.0;
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + s.ln()
}

/// `linear z + sum_{k>=2} (zeta(k) - 1 + offset) (-z)^k / k`
fn zeta_series(z: f64, offset: f64, linear: f64) -> f64 {
    let mut sum = 0.0;
    let mut zk = -z;
    for (i, c) in ZETA_MINUS_ONE.iter().enumerate() {
        zk *= -z;
        let term = (c + offset) * zk / (i + 2) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    linear * z + sum
}

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Density of the gamma distribution with the given shape and rate.
pub fn gamma_pdf(x: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || x.is_nan() {
        return Err(Error::Domain(format!(
            "gamma_pdf needs shape > 0 and rate > 0, got shape {shape}, rate {rate}"
        )));
    }
    Ok(gamma_pdf_unchecked(x, shape, rate))
}

pub(crate) fn gamma_pdf_unchecked(x: f64, shape: f64, rate: f64) -> f64 {
    if x < 0.0 || x.is_infinite() {
        return 0.0;
    }
    if x == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => rate,
            _ => 0.0,
        };
    }
    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)).exp()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "reg_inc_beta needs a, b > 0 and x in [0, 1], got x {x}, a {a}, b {b}"
        )));
    }
    inc_beta_xy(x, 1.0 - x, a, b, ln_beta(a, b))
}

/// `I_x(a, b)` with `y = 1 - x` supplied separately so callers that know `y`
/// more accurately than `1 - x` do not lose it.
pub(crate) fn inc_beta_xy(x: f64, y: f64, a: f64, b: f64, ln_b: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if y <= 0.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_b;
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(y, b, a)? / b)
    }
}

fn clamp_tiny(v: f64) -> f64 {
    if v.abs() < CF_TINY {
        CF_TINY
    } else {
        v
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 / clamp_tiny(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp_tiny(1.0 + aa * d);
        c = clamp_tiny(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp_tiny(1.0 + aa * d);
        c = clamp_tiny(1.0 + aa / c);
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge (a {a}, b {b}, x {x})"
    )))
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    let (p, q) = inc_gamma_pq(a, x)?;
    Ok(if p <= 0.5 { p } else { 1.0 - q })
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn reg_upper_gamma(a: f64, x: f64) -> Result<f64> {
    let (p, q) = inc_gamma_pq(a, x)?;
    Ok(if q <= 0.5 { q } else { 1.0 - p })
}

/// Returns (P, Q). Only one of them is computed directly; the other is its complement.
fn inc_gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!(
            "incomplete gamma needs a > 0 and x >= 0, got a {a}, x {x}"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..CF_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * CF_EPS {
                let p = sum * ln_front.exp();
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::Domain(format!(
            "incomplete gamma series did not converge (a {a}, x {x})"
        )))
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / CF_TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=CF_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = 1.0 / clamp_tiny(an * d + b);
            c = clamp_tiny(b + an / c);
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < CF_EPS {
                let q = ln_front.exp() * h;
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::Domain(format!(
            "incomplete gamma fraction did not converge (a {a}, x {x})"
        )))
    }
}

/// Gamma prior on the failure rate, parameterised by shape and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior shape and rate must be positive and finite, got ({shape}, {rate})"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn pdf(&self, lambda: f64) -> f64 {
        gamma_pdf_unchecked(lambda, self.shape, self.rate)
    }

    /// `E[lambda^p]`, finite for `p > -shape`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        prior_moment(p, self)
    }

    /// Upper `alpha` quantile of the marginal lifetime `X`, i.e. the `t` with
    /// `P(X > t) = (b / (b + t))^a = alpha`.
    pub fn lifetime_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(self.rate * ((-alpha.ln() / self.shape).exp() - 1.0))
    }
}

/// `E[lambda^p] = Gamma(a + p) / (Gamma(a) b^p)` under the prior.
pub fn prior_moment(p: f64, prior: &GammaPrior) -> Result<f64> {
    if !(p > -prior.shape) {
        return Err(Error::Domain(format!(
            "prior moment of order {p} diverges for shape {}",
            prior.shape
        )));
    }
    Ok((ln_gamma(prior.shape + p) - ln_gamma(prior.shape) - p * prior.rate.ln()).exp())
}

/// Exact binomial coefficient; panics on overflow, which needs n well above 100.
pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn log_gamma_reference_points() {
        // 40-digit values at the exact binary arguments
        let cases = [
            (7.5, 7.534_364_236_758_733),
            (0.5, 0.572_364_942_924_700_1),
            (1e-3, 6.907_178_885_383_853),
            (3.2, 0.885_404_827_154_909_1),
            (1.000_001, -5.772_148_423_874_147e-7),
            (1e6, 1.281_550_456_914_761_2e7),
        ];
        for (x, want) in cases {
            let got = log_gamma(x).unwrap();
            assert!(rel(got, want) < 1e-12, "x {x}: {got} vs {want}");
        }
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-17);
    }

    #[test]
    fn log_gamma_recurrence_7_5() {
        let mut prod: f64 = 1.0;
        let mut t = 0.5;
        while t < 7.5 {
            prod *= t;
            t += 1.0;
        }
        let want = prod.ln() + std::f64::consts::PI.sqrt().ln();
        assert!(rel(log_gamma(7.5).unwrap(), want) < 1e-13);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn gamma_pdf_point() {
        // 0.8^2.5 e^{-0.8} / Gamma(2.5)
        let want = 0.8f64.powf(2.5) * (-0.8f64).exp() / 1.329_340_388_179_137;
        assert!(rel(gamma_pdf(1.0, 2.5, 0.8).unwrap(), want) < 1e-13);
        assert_eq!(gamma_pdf(-1.0, 2.5, 0.8).unwrap(), 0.0);
        assert!(gamma_pdf(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn inc_beta_closed_forms() {
        let want = 1.0 - 0.7f64.powf(2.7);
        assert!((reg_inc_beta(0.3, 1.0, 2.7).unwrap() - want).abs() < 1e-14);
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        // I_x(2, 2) = 3x^2 - 2x^3
        for x in [0.1, 0.45, 0.9] {
            let want = 3.0 * x * x - 2.0 * x * x * x;
            assert!((reg_inc_beta(x, 2.0, 2.0).unwrap() - want).abs() < 1e-14);
        }
        assert!(reg_inc_beta(1.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn inc_gamma_integer_shape() {
        // P(3, x) = 1 - e^{-x}(1 + x + x^2/2)
        for x in [0.2f64, 2.0, 4.0, 15.0] {
            let want = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0);
            assert!((reg_lower_gamma(3.0, x).unwrap() - want).abs() < 1e-14);
            assert!((reg_upper_gamma(3.0, x).unwrap() - (1.0 - want)).abs() < 1e-14);
        }
    }

    #[test]
    fn prior_moment_matches_mean_and_second_moment() {
        let prior = GammaPrior::new(2.5, 0.8).unwrap();
        assert!(rel(prior.moment(1.0).unwrap(), 3.125) < 1e-14);
        assert!(rel(prior.moment(2.0).unwrap(), 2.5 * 3.5 / 0.64) < 1e-14);
        assert_eq!(prior.moment(0.0).unwrap(), 1.0);
        assert!(prior.moment(-2.5).is_err());
    }

    #[test]
    fn lifetime_quantile_inverts_survival() {
        let prior = GammaPrior::new(2.5, 0.8).unwrap();
        let t = prior.lifetime_quantile(0.01).unwrap();
        assert!((t - 4.247_65).abs() < 1e-4);
        assert!(((0.8 / (0.8 + t)).powf(2.5) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn binomials_exact() {
        assert_eq!(binomial(30, 15), 155_117_520);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
