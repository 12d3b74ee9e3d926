//! Random streams, log-domain helpers and the handful of densities the
//! models need.
//!
//! Weights are carried as natural logs everywhere. Normalization goes through
//! [`log_sum_exp`], so a particle system whose log-weights all sit near −10⁶
//! normalizes exactly as well as one near zero.

use libm::erfc;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A reproducible random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8, whose 64-bit stream selector gives independent
/// sub-streams for the same seed; replication `r` of an experiment simply
/// uses `stream_id = r`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream sharing this seed, offset into a separate id range.
    ///
    /// Used when one logical run needs an auxiliary stream (data shuffling,
    /// evaluation sweeps) that must not perturb the main draw sequence.
    pub fn derive(&self, tag: u64) -> Self {
        let id = self
            .stream_id
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(tag.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03));
        Self::new(self.seed, id)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn std_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `log Σ exp(v_i)`, exact under translation of `v`.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::arg("log_sum_exp of an empty vector"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Log-scale importance weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogWeights(pub Vec<f64>);

impl LogWeights {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn normalize(&self) -> Result<Vec<f64>> {
        normalize_log_weights(&self.0)
    }

    /// `log((1/S) Σ_i exp(w_i))`, the per-step evidence increment.
    pub fn log_mean(&self) -> Result<f64> {
        Ok(log_sum_exp(&self.0)? - (self.0.len() as f64).ln())
    }
}

impl From<Vec<f64>> for LogWeights {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Exponentiates and normalizes log-weights into a probability vector.
pub fn normalize_log_weights(w: &[f64]) -> Result<Vec<f64>> {
    if w.iter().any(|x| x.is_nan()) {
        return Err(Error::arg("NaN log-weight"));
    }
    let lse = log_sum_exp(w)?;
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights { step: None });
    }
    if lse == f64::INFINITY {
        return Err(Error::arg("infinite log-weight"));
    }
    let mut p: Vec<f64> = w.iter().map(|&x| (x - lse).exp()).collect();
    // Second pass removes the last ulp-level drift of the sum.
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Effective sample size `1 / Σ p_i²` of a probability vector.
pub fn effective_sample_size(p: &[f64]) -> f64 {
    1.0 / p.iter().map(|x| x * x).sum::<f64>()
}

/// Draws an index with probability `p[j]` from one uniform and a cumulative scan.
pub fn categorical_sample(p: &[f64], rng: &mut RngStream) -> Result<usize> {
    validate_probabilities(p)?;
    let u = rng.uniform();
    Ok(scan_cumulative(p, u))
}

fn validate_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::arg("categorical over an empty vector"));
    }
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::arg(
            "categorical probabilities must be finite and non-negative",
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!(
            "categorical probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Repeated categorical draws from one distribution: cumulative sums are
/// built once and every draw is a binary search. Each draw consumes one
/// uniform and returns exactly what [`categorical_sample`] would for it.
#[derive(Clone, Debug)]
pub struct CategoricalTable {
    cum: Vec<f64>,
    fallback: usize,
}

impl CategoricalTable {
    pub fn new(p: &[f64]) -> Result<Self> {
        validate_probabilities(p)?;
        let mut acc = 0.0;
        let cum = p
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        let fallback = p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1);
        Ok(Self { cum, fallback })
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let j = self.cum.partition_point(|&c| c <= u);
        if j < self.cum.len() {
            j
        } else {
            self.fallback
        }
    }
}

pub(crate) fn scan_cumulative(p: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (j, &pj) in p.iter().enumerate() {
        cum += pj;
        if u < cum {
            return j;
        }
    }
    // Rounding left u above the final cumulative sum.
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Gaussian log-density parameterized by standard deviation.
pub fn normal_log_pdf(z: f64, mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::arg(format!("normal sd must be positive, got {sd}")));
    }
    let r = (z - mean) / sd;
    Ok(-0.5 * r * r - sd.ln() - LN_SQRT_2PI)
}

/// Gaussian log-density parameterized by variance; caller guarantees `var > 0`.
#[inline]
pub(crate) fn gaussian_log_density(z: f64, mean: f64, var: f64) -> f64 {
    let d = z - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// `log Φ(x)` for the standard normal CDF.
///
/// Uses `erfc` on the side where Φ is small so no cancellation occurs, and a
/// ten-term asymptotic series once `erfc` would approach underflow.
pub fn std_normal_log_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x >= 0.0 {
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x >= -5.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Φ(x) = φ(x) R(−x) with the Mills ratio R as a continued fraction,
        // R(t) = 1 / (t + 1 / (t + 2 / (t + 3 / (t + …)))), evaluated by Lentz.
        let t = -x;
        let tiny = 1e-300;
        let mut f = t;
        let mut c = t;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64;
            d = t + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            c = t + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        -0.5 * x * x - LN_SQRT_2PI - f.ln()
    }
}

/// Log-density of the skew-normal with location `xi`, scale `omega`, shape `alpha`.
pub fn skew_normal_log_pdf(z: f64, xi: f64, omega: f64, alpha: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::arg(format!(
            "skew-normal scale must be positive, got {omega}"
        )));
    }
    let r = (z - xi) / omega;
    Ok(
        std::f64::consts::LN_2 - omega.ln() - 0.5 * r * r - LN_SQRT_2PI
            + std_normal_log_cdf(alpha * r),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_examples() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = log_sum_exp(&[-1000.0; 3]).unwrap();
        assert!((v - (-1000.0 + 3f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]).unwrap(), 0.0);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY; 2]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_log_weights(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = normalize_log_weights(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(matches!(
            normalize_log_weights(&[f64::NEG_INFINITY; 2]),
            Err(Error::DegenerateWeights { .. })
        ));
        let p = normalize_log_weights(&[-1e6, -1e6 + 1.0]).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn categorical_edge_cases() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            assert_eq!(categorical_sample(&[1.0, 0.0], &mut rng).unwrap(), 0);
        }
        assert!(categorical_sample(&[-0.5, 1.5], &mut rng).is_err());
        let a = categorical_sample(&[0.5, 0.5], &mut RngStream::new(7, 3)).unwrap();
        let b = categorical_sample(&[0.5, 0.5], &mut RngStream::new(7, 3)).unwrap();
        assert_eq!(a, b);
        // boundary: u exactly on a cumulative edge goes to the next bucket,
        // a zero-mass bucket is never selected
        assert_eq!(scan_cumulative(&[0.5, 0.0, 0.5], 0.5), 2);
        assert_eq!(scan_cumulative(&[0.5, 0.5, 0.0], 1.0), 1);
    }

    #[test]
    fn categorical_frequency() {
        let mut rng = RngStream::new(11, 0);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| categorical_sample(&[0.25, 0.75], &mut rng).unwrap() == 1)
            .count();
        let f = ones as f64 / n as f64;
        assert!((0.74..=0.76).contains(&f), "{f}");
    }

    #[test]
    fn normal_density_examples() {
        assert!((normal_log_pdf(0.0, 0.0, 1.0).unwrap() + 0.918_938_5).abs() < 1e-7);
        assert!((normal_log_pdf(1.0, 0.0, 1.0).unwrap() + 1.418_938_5).abs() < 1e-7);
        assert!(normal_log_pdf(0.0, 0.0, 0.0).is_err());
        assert!(normal_log_pdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn table_matches_linear_scan() {
        let p = [0.0, 0.25, 0.0, 0.5, 0.25, 0.0];
        let table = CategoricalTable::new(&p).unwrap();
        let (mut a, mut b) = (RngStream::new(8, 1), RngStream::new(8, 1));
        for _ in 0..10_000 {
            assert_eq!(
                table.sample(&mut a),
                categorical_sample(&p, &mut b).unwrap()
            );
        }
        for u in [0.0, 0.25, 0.2499999, 0.75, 0.9999999999] {
            let j = table.cum.partition_point(|&c| c <= u);
            assert_eq!(j, scan_cumulative(&p, u));
        }
        assert!(CategoricalTable::new(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn log_cdf_reference_values() {
        // 50-digit mpmath references
        let cases = [
            (0.0, -std::f64::consts::LN_2),
            (-10.0, -53.231_285_150_512_47),
            (2.0, -0.023_012_909_328_963_488),
            (-5.0, -15.064_998_393_988_726),
            (-20.0, -203.917_155_371_097_26),
            (-30.0, -454.321_243_956_343_2),
            (-40.0, -804.608_442_013_753_8),
            (8.0, -6.220_960_574_271_786e-16),
        ];
        for (x, want) in cases {
            let got = std_normal_log_cdf(x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "x={x}: got {got}, want {want}"
            );
        }
        // log Φ(38) ≈ −2.885e-316 is subnormal but representable
        let far = std_normal_log_cdf(38.0);
        assert!(far < 0.0 && far > -3e-316, "{far}");
        assert_eq!(std_normal_log_cdf(f64::INFINITY), 0.0);
        assert_eq!(std_normal_log_cdf(f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn log_cdf_is_monotone_across_branches() {
        let mut prev = f64::NEG_INFINITY;
        let mut x = -60.0;
        while x < 10.0 {
            let v = std_normal_log_cdf(x);
            assert!(v >= prev, "not monotone at {x}");
            prev = v;
            x += 0.001;
        }
    }

    #[test]
    fn cdf_complement_sums_to_one() {
        let mut x = -8.0;
        while x <= 8.0 {
            let s = std_normal_log_cdf(x).exp() + std_normal_log_cdf(-x).exp();
            assert!((s - 1.0).abs() < 1e-12, "{x}: {s}");
            x += 0.01;
        }
    }

    #[test]
    fn skew_normal_closed_form_point() {
        let v = skew_normal_log_pdf(0.5, 0.5, 2.0, 5.0).unwrap();
        assert!((v + 1.612_085_713_764_618).abs() < 1e-14);
        assert!(skew_normal_log_pdf(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn skew_normal_integrates_to_one() {
        // composite Simpson on [ξ−10ω, ξ+10ω]
        let (xi, omega, alpha) = (0.5, 2.0, 5.0);
        let (a, b) = (xi - 10.0 * omega, xi + 10.0 * omega);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |z: f64| skew_normal_log_pdf(z, xi, omega, alpha).unwrap().exp();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        let total = s * h / 3.0;
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }
}
