//! Marčenko-Pastur eigenvalue law for correlation matrices of `L x N`
//! independent series with aspect ratio `Q = L / N`.
//!
//! The cumulative distribution is obtained by adaptive quadrature after the
//! substitution `λ = c - r cos θ` (with `c`, `r` the centre and half-width of
//! the support), which removes the square-root edge behaviour and leaves a
//! smooth integrand on `[0, π]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameters of the Marčenko-Pastur law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MpParams<T = f64> {
    q: T,
    sigma2: T,
}

impl<T: Real> MpParams<T> {
    pub fn new(q: T, sigma2: T) -> Result<Self> {
        if !(q > T::zero()) || !q.is_finite() {
            return Err(Error::Domain(format!("aspect ratio must be positive, got {q}")));
        }
        if !(sigma2 > T::zero()) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("variance scale must be positive, got {sigma2}")));
        }
        Ok(Self { q, sigma2 })
    }

    /// Standardized returns (`σ² = 1`).
    pub fn standard(q: T) -> Result<Self> {
        Self::new(q, T::one())
    }

    /// `Q = L / N` with unit variance scale.
    pub fn from_shape(observations: usize, assets: usize) -> Result<Self> {
        if assets == 0 {
            return Err(Error::Domain("no assets".into()));
        }
        Self::standard(T::count(observations) / T::count(assets))
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    /// Support edges `λ± = σ²(1 + 1/Q ± 2√(1/Q))`.
    pub fn bounds(&self) -> (T, T) {
        let inv = self.q.recip();
        let two = T::lit(2.0);
        let lower = self.sigma2 * (T::one() + inv - two * inv.sqrt());
        let upper = self.sigma2 * (T::one() + inv + two * inv.sqrt());
        (lower.max(T::zero()), upper)
    }

    /// Probability mass sitting at `λ = 0` when `Q < 1`.
    fn atom(&self) -> T {
        (T::one() - self.q).max(T::zero())
    }

    /// Density `ρ(λ) = Q / (2πσ²) · √((λ₊ - λ)(λ - λ₋)) / λ` on the support,
    /// zero elsewhere (edges included).
    pub fn density(&self, lambda: T) -> T {
        let (lo, hi) = self.bounds();
        if !(lambda > lo && lambda < hi) {
            return T::zero();
        }
        let k = self.q / (T::lit(2.0) * T::PI() * self.sigma2);
        k * ((hi - lambda) * (lambda - lo)).sqrt() / lambda
    }

    fn centre_radius(&self) -> (T, T) {
        let inv = self.q.recip();
        (
            self.sigma2 * (T::one() + inv),
            T::lit(2.0) * self.sigma2 * inv.sqrt(),
        )
    }

    // integrand of the cdf in θ; smooth on [0, π]
    fn theta_integrand(&self, theta: T) -> T {
        let (c, r) = self.centre_radius();
        let k = self.q / (T::lit(2.0) * T::PI() * self.sigma2);
        let half = (theta * T::lit(0.5)).sin();
        let one_minus_cos = T::lit(2.0) * half * half;
        let one_plus_cos = T::lit(2.0) - one_minus_cos;
        let gap = c - r;
        if gap <= T::zero() {
            // Q = 1: λ₋ = 0 and the 1/λ factor cancels one (1 - cos θ)
            return k * r * one_plus_cos;
        }
        k * r * r * one_minus_cos * one_plus_cos / (gap + r * one_minus_cos)
    }

    fn theta_of(&self, lambda: T) -> T {
        let (c, r) = self.centre_radius();
        ((c - lambda) / r).max(-T::one()).min(T::one()).acos()
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, lambda: T) -> T {
        let (lo, hi) = self.bounds();
        let atom = self.atom();
        if lambda < T::zero() || (lambda < lo) {
            return if lambda >= T::zero() { atom } else { T::zero() };
        }
        if lambda >= hi {
            return T::one();
        }
        let theta = self.theta_of(lambda);
        let tol = T::tol(1e-10, 64.0);
        let mass = adaptive_simpson(|t| self.theta_integrand(t), T::zero(), theta, tol);
        (atom + mass).max(T::zero()).min(T::one())
    }

    /// Inverse of [`cdf`](Self::cdf) by bisection on `λ`.
    pub fn quantile(&self, u: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::Domain(format!("quantile level {u} outside (0, 1)")));
        }
        let (lo, hi) = self.bounds();
        if u <= self.atom() {
            return Ok(T::zero());
        }
        Ok(self.bisect(u, lo, hi, self.cdf(lo)))
    }

    // bisection on [a, b] where cdf(a) = fa <= u; uses incremental integrals
    fn bisect(&self, u: T, mut a: T, mut b: T, mut fa: T) -> T {
        let tol = T::tol(1e-12, 16.0);
        let qtol = T::tol(1e-10, 64.0) * T::lit(1e-2);
        let mut ta = self.theta_of(a);
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let m = (a + b) * T::lit(0.5);
            let tm = self.theta_of(m);
            let fm = fa + adaptive_simpson(|t| self.theta_integrand(t), ta, tm, qtol);
            if fm < u {
                a = m;
                fa = fm;
                ta = tm;
            } else {
                b = m;
            }
        }
        (a + b) * T::lit(0.5)
    }

    /// Quantiles for many levels at once. Levels are processed in sorted
    /// order so each bisection starts from the previous answer; the output
    /// follows the input order.
    pub fn quantiles(&self, levels: &[T]) -> Result<Vec<T>> {
        let mut order: Vec<usize> = (0..levels.len()).collect();
        for &u in levels {
            if !(u > T::zero() && u < T::one()) {
                return Err(Error::Domain(format!("quantile level {u} outside (0, 1)")));
            }
        }
        order.sort_by(|&i, &j| levels[i].partial_cmp(&levels[j]).expect("finite levels"));
        let (lo, hi) = self.bounds();
        let atom = self.atom();
        let mut out = vec![T::zero(); levels.len()];
        let (mut a, mut fa) = (lo, self.cdf(lo));
        for i in order {
            let u = levels[i];
            if u <= atom {
                continue;
            }
            let x = self.bisect(u, a, hi, fa);
            out[i] = x;
            // keep a bracket point strictly below the answer
            let next = x - T::tol(1e-12, 16.0);
            if next > a {
                let tol = T::tol(1e-10, 64.0) * T::lit(1e-2);
                let (ta, tn) = (self.theta_of(a), self.theta_of(next));
                fa = fa + adaptive_simpson(|t| self.theta_integrand(t), ta, tn, tol);
                a = next;
            }
        }
        Ok(out)
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub(crate) fn adaptive_simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    if !(b > a) {
        return T::zero();
    }
    let m = (a + b) * T::lit(0.5);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let m = (a + b) * T::lit(0.5);
    let lm = (a + m) * T::lit(0.5);
    let rm = (m + b) * T::lit(0.5);
    let (flm, frm) = (f(lm), f(rm));
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    let half = tol * T::lit(0.5);
    simpson_step(f, a, m, fa, flm, fm, left, half, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, half, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    // composite midpoint rule directly in λ with a √-edge-aware grid:
    // λ = lo + (hi - lo) * s², s in (0,1) near the lower edge and symmetric
    // near the upper edge, independent of the θ substitution used above.
    fn direct_mass(p: &MpParams, upto: f64) -> f64 {
        let (lo, hi) = p.bounds();
        let upto = upto.min(hi);
        let mid = 0.5 * (lo + hi);
        let n = 400_000;
        let mut total = 0.0;
        // lower half: λ = lo + (mid - lo) s², dλ = 2 (mid - lo) s ds
        let end = if upto < mid { ((upto - lo) / (mid - lo)).sqrt() } else { 1.0 };
        for k in 0..n {
            let s = end * (k as f64 + 0.5) / n as f64;
            let lam = lo + (mid - lo) * s * s;
            total += p.density(lam) * 2.0 * (mid - lo) * s * end / n as f64;
        }
        if upto > mid {
            // upper half: λ = hi - (hi - mid) s², integrate s from s(upto) to 1
            let start = ((hi - upto) / (hi - mid)).sqrt();
            for k in 0..n {
                let s = start + (1.0 - start) * (k as f64 + 0.5) / n as f64;
                let lam = hi - (hi - mid) * s * s;
                total += p.density(lam) * 2.0 * (hi - mid) * s * (1.0 - start) / n as f64;
            }
        }
        total
    }

    #[test]
    fn bounds_examples() {
        let p = MpParams::<f64>::standard(4.0).unwrap();
        let (lo, hi) = p.bounds();
        assert!((lo - 0.25).abs() < 1e-12 && (hi - 2.25).abs() < 1e-12);

        let p = MpParams::<f64>::standard(248.0 / 61.0).unwrap();
        let (lo, hi) = p.bounds();
        assert!((lo - 0.254).abs() < 5e-4, "{lo}");
        assert!((hi - 2.238).abs() < 5e-4, "{hi}");

        let (lo, hi) = MpParams::<f64>::standard(1.0).unwrap().bounds();
        assert_eq!((lo, hi), (0.0, 4.0));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(MpParams::<f64>::new(0.0, 1.0).is_err());
        assert!(MpParams::<f64>::new(2.0, -1.0).is_err());
        assert!(MpParams::<f64>::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn density_vanishes_outside_and_at_edges() {
        let p = MpParams::<f64>::standard(4.06).unwrap();
        let (lo, hi) = p.bounds();
        assert_eq!(p.density(lo), 0.0);
        assert_eq!(p.density(hi), 0.0);
        assert_eq!(p.density(-1.0), 0.0);
        assert_eq!(p.density(10.0), 0.0);
        assert!(p.density(1.0) > 0.0);
    }

    #[test]
    fn density_integrates_to_one_against_direct_rule() {
        for q in [1.1, 2.0, 4.06, 10.0] {
            let p = MpParams::<f64>::standard(q).unwrap();
            let m = direct_mass(&p, f64::INFINITY);
            assert!((m - 1.0).abs() < 1e-6, "q={q} mass={m}");
            assert!((p.cdf(p.bounds().1) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn cdf_matches_direct_rule_mid_support() {
        let p = MpParams::<f64>::standard(4.0).unwrap();
        for x in [0.4, 0.8, 1.0, 1.7, 2.1] {
            let d = direct_mass(&p, x);
            assert!((p.cdf(x) - d).abs() < 1e-7, "x={x}: {} vs {d}", p.cdf(x));
        }
    }

    #[test]
    fn median_for_q4() {
        let p = MpParams::<f64>::standard(4.0).unwrap();
        let m = p.quantile(0.5).unwrap();
        assert!((p.cdf(m) - 0.5).abs() < 1e-8);
        assert!((direct_mass(&p, m) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn quantile_round_trip_and_domain() {
        let p = MpParams::<f64>::standard(3.0).unwrap();
        for x in [0.3, 0.7, 1.2, 2.0] {
            let back = p.quantile(p.cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-6);
        }
        assert!(p.quantile(0.0).is_err());
        assert!(p.quantile(1.0).is_err());
        assert!(p.quantile(1.5).is_err());
    }

    #[test]
    fn batched_quantiles_match_single() {
        let p = MpParams::<f64>::standard(2.5).unwrap();
        let levels = [0.9, 0.1, 0.5, 0.33, 0.999, 0.001];
        let many = p.quantiles(&levels).unwrap();
        for (u, q) in levels.iter().zip(&many) {
            assert!((p.quantile(*u).unwrap() - q).abs() < 1e-9);
        }
    }

    #[test]
    fn below_one_aspect_ratio_has_atom_at_zero() {
        let p = MpParams::<f64>::standard(0.5).unwrap();
        assert!((p.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((p.cdf(p.bounds().0 + 1e-12) - 0.5).abs() < 1e-6);
        assert!((direct_mass(&p, f64::INFINITY) - 0.5).abs() < 1e-6);
        assert_eq!(p.quantile(0.25).unwrap(), 0.0);
    }
}
