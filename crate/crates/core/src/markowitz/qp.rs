//! Minimum-variance portfolios under a budget constraint, an optional
//! return constraint and box bounds, by a primal active-set method.
//!
//! The Hessian only needs to be positive semidefinite. Each subproblem is
//! solved in a null-space basis built by variable reduction, and the reduced
//! system is factored with a pivoted Cholesky that tolerates rank loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_solve, Matrix};
use crate::scalar::Real;

/// Uniform box bounds on every weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WeightBounds<T = f64> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> Default for WeightBounds<T> {
    fn default() -> Self {
        Self::no_short()
    }
}

impl<T: Real> WeightBounds<T> {
    /// `lower` must be finite; `upper` may be `+inf`.
    pub fn new(lower: T, upper: T) -> Result<Self> {
        if !lower.is_finite() || upper.is_nan() || lower > upper {
            return Err(Error::Domain(format!("invalid weight bounds [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    /// `[0, 1]`.
    pub fn no_short() -> Self {
        Self {
            lower: T::zero(),
            upper: T::one(),
        }
    }

    /// `[-1, 2]`.
    pub fn short_allowed() -> Self {
        Self {
            lower: -T::one(),
            upper: T::lit(2.0),
        }
    }

    /// Whether a fully invested portfolio of `n` assets exists.
    pub fn admits(&self, n: usize) -> bool {
        let n = T::count(n);
        n * self.lower <= T::one() && n * self.upper >= T::one()
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyUniverse);
        }
        if !self.admits(n) {
            return Err(Error::Domain(format!(
                "bounds [{}, {}] cannot hold a budget of one over {n} assets",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Result of one quadratic program.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T = f64> {
    pub weights: Vec<T>,
    /// `wᵀ H w`.
    pub variance: T,
    pub iterations: usize,
    /// Largest violation of stationarity on the free variables or of the
    /// multiplier sign on variables held at a bound, relative to the larger
    /// of the gradient scale and the largest Hessian diagonal entry.
    pub kkt_residual: T,
}

/// Attainable portfolio returns under the bounds, with the portfolios that
/// attain them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnRange<T = f64> {
    pub low: T,
    pub high: T,
    pub argmin: Vec<T>,
    pub argmax: Vec<T>,
}

/// Extreme attainable returns: fill the highest (lowest) means first.
pub fn return_range<T: Real>(means: &[T], bounds: &WeightBounds<T>) -> Result<ReturnRange<T>> {
    bounds.check(means.len())?;
    let argmax = greedy(means, bounds, true);
    let argmin = greedy(means, bounds, false);
    Ok(ReturnRange {
        low: dot(&argmin, means),
        high: dot(&argmax, means),
        argmin,
        argmax,
    })
}

fn greedy<T: Real>(means: &[T], bounds: &WeightBounds<T>, descending: bool) -> Vec<T> {
    let n = means.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let c = means[a].partial_cmp(&means[b]).expect("finite means");
        if descending {
            c.reverse()
        } else {
            c
        }
    });
    let mut w = vec![bounds.lower; n];
    let mut budget = T::one() - T::count(n) * bounds.lower;
    for i in order {
        if !(budget > T::zero()) {
            break;
        }
        let room = bounds.upper - bounds.lower;
        if room >= budget {
            w[i] = bounds.lower + budget;
            budget = T::zero();
        } else {
            w[i] = bounds.upper;
            budget = budget - room;
        }
    }
    w
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Minimizes `wᵀ H w` subject to `Σw = 1`, `meansᵀw = target` (when given)
/// and the bounds.
pub fn minimize_variance<T: Real>(
    h: &Matrix<T>,
    means: &[T],
    target: Option<T>,
    bounds: &WeightBounds<T>,
) -> Result<QpSolution<T>> {
    let n = means.len();
    if !h.is_square() || h.rows() != n {
        return Err(Error::Dimension(format!("{}x{} Hessian for {n} assets", h.rows(), h.cols())));
    }
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::Domain("mean returns must be finite".into()));
    }
    bounds.check(n)?;
    let lo = vec![bounds.lower; n];
    let hi = vec![bounds.upper; n];
    let ones = vec![T::one(); n];

    let Some(target) = target else {
        let w0 = vec![T::one() / T::count(n); n];
        return ActiveSet::new(h, vec![ones], vec![T::one()], lo, hi, vec![false; n]).run(w0);
    };

    let range = return_range(means, bounds)?;
    let mscale = max_abs(means).max(T::min_positive_value());
    let ttol = T::tol(1e-12, 64.0) * mscale;
    if !target.is_finite() || target < range.low - ttol || target > range.high + ttol {
        return Err(Error::Infeasible {
            target: target.as_f64(),
            low: range.low.as_f64(),
            high: range.high.as_f64(),
        });
    }
    let target = target.max(range.low).min(range.high);

    if range.high - range.low <= ttol {
        // every feasible portfolio earns the same return
        let w0 = range.argmax.clone();
        return ActiveSet::new(h, vec![ones], vec![T::one()], lo, hi, vec![false; n]).run(w0);
    }

    let tie = T::tol(1e-14, 16.0) * mscale;
    for (edge, extreme, high_side) in [(range.high, &range.argmax, true), (range.low, &range.argmin, false)] {
        if (target - edge).abs() <= ttol {
            return solve_on_face(h, means, extreme, bounds, high_side, tie);
        }
    }

    // the return row is centred and scaled so that it is well conditioned
    // against the budget row; the feasible set is unchanged
    let centre = means.iter().copied().sum::<T>() / T::count(n);
    let spread = means.iter().fold(T::zero(), |m, &x| m.max((x - centre).abs()));
    let key: Vec<T> = means.iter().map(|&x| (x - centre) / spread).collect();
    let key_target = (target - centre) / spread;

    let alpha = (target - range.low) / (range.high - range.low);
    let w0: Vec<T> = range
        .argmin
        .iter()
        .zip(&range.argmax)
        .map(|(&a, &b)| if a == b { a } else { a + alpha * (b - a) })
        .collect();
    ActiveSet::new(h, vec![ones, key], vec![T::one(), key_target], lo, hi, vec![false; n]).run(w0)
}

// At an extreme return every asset strictly better (worse) than the marginal
// one is pinned; only assets tied with the marginal mean can trade off.
fn solve_on_face<T: Real>(
    h: &Matrix<T>,
    means: &[T],
    extreme: &[T],
    bounds: &WeightBounds<T>,
    high_side: bool,
    tie: T,
) -> Result<QpSolution<T>> {
    let n = means.len();
    let interior: Vec<usize> = (0..n).filter(|&i| extreme[i] > bounds.lower && extreme[i] < bounds.upper).collect();
    let marginal = match interior.first() {
        Some(&i) => means[i],
        None => {
            // budget exhausted exactly at a bound: the marginal asset is the
            // last one filled
            let filled = (0..n).filter(|&i| extreme[i] > bounds.lower);
            let pick = if high_side {
                filled.min_by(|&a, &b| means[a].partial_cmp(&means[b]).expect("finite"))
            } else {
                filled.max_by(|&a, &b| means[a].partial_cmp(&means[b]).expect("finite"))
            };
            pick.map(|i| means[i]).unwrap_or(means[0])
        }
    };
    let pinned: Vec<bool> = means.iter().map(|&m| (m - marginal).abs() > tie).collect();
    let free_budget = T::one()
        - (0..n).filter(|&i| pinned[i]).map(|i| extreme[i]).sum::<T>();
    let row: Vec<T> = pinned.iter().map(|&p| if p { T::zero() } else { T::one() }).collect();
    ActiveSet::new(
        h,
        vec![row],
        vec![free_budget],
        vec![bounds.lower; n],
        vec![bounds.upper; n],
        pinned,
    )
    .run(extreme.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Free,
    Lower,
    Upper,
    Pinned,
}

struct ActiveSet<'a, T> {
    h: &'a Matrix<T>,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    lo: Vec<T>,
    hi: Vec<T>,
    state: Vec<State>,
}

impl<'a, T: Real> ActiveSet<'a, T> {
    fn new(h: &'a Matrix<T>, rows: Vec<Vec<T>>, rhs: Vec<T>, lo: Vec<T>, hi: Vec<T>, pinned: Vec<bool>) -> Self {
        let state = pinned.iter().map(|&p| if p { State::Pinned } else { State::Free }).collect();
        Self {
            h,
            rows,
            rhs,
            lo,
            hi,
            state,
        }
    }

    fn n(&self) -> usize {
        self.lo.len()
    }

    fn free(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.state[i] == State::Free).collect()
    }

    // Basis columns among the free set with an invertible constraint block.
    fn basis(&self, free: &[usize]) -> Option<Vec<usize>> {
        match self.rows.len() {
            1 => free.iter().copied().find(|&i| self.rows[0][i] != T::zero()).map(|i| vec![i]),
            _ => {
                let key = &self.rows[1];
                let lo = free.iter().copied().min_by(|&a, &b| key[a].partial_cmp(&key[b]).expect("finite"))?;
                let hi = free.iter().copied().max_by(|&a, &b| key[a].partial_cmp(&key[b]).expect("finite"))?;
                (key[hi] > key[lo]).then(|| vec![lo, hi])
            }
        }
    }

    // `z_B` such that `A_B z_B = -a_s` for a nonbasic column `s`.
    fn basic_part(&self, basis: &[usize], s: usize) -> Vec<T> {
        if basis.len() == 1 {
            let b = basis[0];
            return vec![-self.rows[0][s] / self.rows[0][b]];
        }
        let (p, q) = (basis[0], basis[1]);
        let (a, b, c, d) = (self.rows[0][p], self.rows[0][q], self.rows[1][p], self.rows[1][q]);
        let det = a * d - b * c;
        let (r0, r1) = (-self.rows[0][s], -self.rows[1][s]);
        vec![(d * r0 - b * r1) / det, (a * r1 - c * r0) / det]
    }

    // Puts enough variables in play that the free block has full row rank.
    fn ensure_rank(&mut self) {
        if self.basis(&self.free()).is_some() {
            return;
        }
        let movable: Vec<usize> = (0..self.n()).filter(|&i| self.state[i] != State::Pinned).collect();
        if self.rows.len() == 1 {
            if let Some(&i) = movable.first() {
                self.state[i] = State::Free;
            }
            return;
        }
        let key = self.rows[1].clone();
        let cmp = |a: &usize, b: &usize| key[*a].partial_cmp(&key[*b]).expect("finite");
        if let Some(&i) = movable.iter().min_by(|a, b| cmp(a, b)) {
            self.state[i] = State::Free;
        }
        if let Some(&i) = movable.iter().max_by(|a, b| cmp(a, b)) {
            self.state[i] = State::Free;
        }
    }

    fn run(mut self, mut w: Vec<T>) -> Result<QpSolution<T>> {
        let n = self.n();
        for i in 0..n {
            if self.state[i] == State::Pinned {
                continue;
            }
            if w[i] <= self.lo[i] {
                w[i] = self.lo[i];
                self.state[i] = State::Lower;
            } else if w[i] >= self.hi[i] {
                w[i] = self.hi[i];
                self.state[i] = State::Upper;
            }
        }
        self.ensure_rank();

        let hscale = self.h.diagonal().into_iter().fold(T::zero(), T::max);
        let rank_tol = T::tol(1e-11, 1e5);
        let step_tol = T::tol(1e-13, 256.0);
        let cap = 50 * n + 100;
        let mut at_optimum = false;
        let mut iterations = 0;
        // a variable released and blocked again without progress is not
        // released a second time until some step makes progress
        let mut last_released: Option<usize> = None;
        let mut stuck = vec![false; n];
        loop {
            iterations += 1;
            if iterations > cap {
                return Err(Error::Numeric(format!("active set did not settle in {cap} iterations")));
            }
            let free = self.free();
            let g = self.h.mul_vec(&w);
            let Some(basis) = self.basis(&free) else {
                // nothing can move
                break;
            };

            if !at_optimum {
                let p = self.newton_step(&free, &basis, &g, rank_tol);
                let pmax = max_abs(&p);
                if pmax > step_tol * (T::one() + max_abs(&w)) {
                    let noise = T::epsilon() * T::lit(16.0) * pmax;
                    let mut alpha = T::one();
                    let mut block: Option<(usize, State)> = None;
                    for &i in &free {
                        let (limit, side) = if p[i] < -noise {
                            (((self.lo[i] - w[i]) / p[i]).max(T::zero()), State::Lower)
                        } else if p[i] > noise && self.hi[i].is_finite() {
                            (((self.hi[i] - w[i]) / p[i]).max(T::zero()), State::Upper)
                        } else {
                            continue;
                        };
                        if limit < alpha {
                            alpha = limit;
                            block = Some((i, side));
                        }
                    }
                    for &i in &free {
                        w[i] = w[i] + alpha * p[i];
                    }
                    if alpha > T::zero() {
                        stuck.iter_mut().for_each(|s| *s = false);
                    }
                    match block {
                        Some((i, side)) => {
                            if alpha == T::zero() && last_released == Some(i) {
                                stuck[i] = true;
                            }
                            w[i] = if side == State::Lower { self.lo[i] } else { self.hi[i] };
                            self.state[i] = side;
                        }
                        None => at_optimum = true,
                    }
                    continue;
                }
            }

            let nu = self.multipliers(&free, &g);
            let zscale = self.dual_scale(&g, &nu).max(hscale);
            let ztol = T::tol(1e-10, 1e3) * zscale;
            let mut release: Option<(usize, T)> = None;
            for i in 0..n {
                let z = g[i] + self.column_dot(i, &nu);
                let violation = match self.state[i] {
                    _ if stuck[i] => continue,
                    State::Lower => -z,
                    State::Upper => z,
                    _ => continue,
                };
                if violation > ztol && release.is_none_or(|(_, v)| violation > v) {
                    release = Some((i, violation));
                }
            }
            match release {
                Some((i, _)) => {
                    last_released = Some(i);
                    self.state[i] = State::Free;
                    at_optimum = false;
                }
                None => break,
            }
        }

        self.polish(&mut w);
        let g = self.h.mul_vec(&w);
        let free = self.free();
        let nu = self.multipliers(&free, &g);
        let zscale = self.dual_scale(&g, &nu).max(hscale);
        let kkt_residual = if zscale > T::zero() {
            (0..n)
                .map(|i| {
                    let z = g[i] + self.column_dot(i, &nu);
                    match self.state[i] {
                        State::Free => z.abs(),
                        State::Lower => (-z).max(T::zero()),
                        State::Upper => z.max(T::zero()),
                        State::Pinned => T::zero(),
                    }
                })
                .fold(T::zero(), T::max)
                / zscale
        } else {
            T::zero()
        };
        Ok(QpSolution {
            variance: self.h.quadratic_form(&w),
            weights: w,
            iterations,
            kkt_residual,
        })
    }

    fn column_dot(&self, i: usize, nu: &[T]) -> T {
        self.rows.iter().zip(nu).map(|(r, &v)| r[i] * v).sum()
    }

    fn dual_scale(&self, g: &[T], nu: &[T]) -> T {
        let mut s = max_abs(g);
        for (r, &v) in self.rows.iter().zip(nu) {
            s = s.max(v.abs() * max_abs(r));
        }
        s
    }

    // Least-squares equality multipliers on the free set:
    // minimize |g_F + A_Fᵀ ν|.
    fn multipliers(&self, free: &[usize], g: &[T]) -> Vec<T> {
        let m = self.rows.len();
        let mut gram = Matrix::zeros(m, m);
        let mut rhs = vec![T::zero(); m];
        for &i in free {
            for r in 0..m {
                rhs[r] = rhs[r] - self.rows[r][i] * g[i];
                for c in 0..m {
                    gram[(r, c)] = gram[(r, c)] + self.rows[r][i] * self.rows[c][i];
                }
            }
        }
        psd_solve(&gram, &rhs, T::tol(1e-14, 64.0))
    }

    fn newton_step(&self, free: &[usize], basis: &[usize], g: &[T], rank_tol: T) -> Vec<T> {
        let n = self.n();
        let nonbasic: Vec<usize> = free.iter().copied().filter(|i| !basis.contains(i)).collect();
        let mut p = vec![T::zero(); n];
        let k = nonbasic.len();
        if k == 0 {
            return p;
        }
        let zb: Vec<Vec<T>> = nonbasic.iter().map(|&s| self.basic_part(basis, s)).collect();
        // H Z restricted to free rows, column by column
        let hz: Vec<Vec<T>> = (0..k)
            .map(|c| {
                let s = nonbasic[c];
                let mut col = vec![T::zero(); n];
                for &i in free {
                    let mut v = self.h[(i, s)];
                    for (b, &bi) in basis.iter().enumerate() {
                        v = v + zb[c][b] * self.h[(i, bi)];
                    }
                    col[i] = v;
                }
                col
            })
            .collect();
        let mut m = Matrix::zeros(k, k);
        for c in 0..k {
            for d in c..k {
                let mut v = hz[d][nonbasic[c]];
                for (b, &bi) in basis.iter().enumerate() {
                    v = v + zb[c][b] * hz[d][bi];
                }
                m[(c, d)] = v;
                m[(d, c)] = v;
            }
        }
        let neg_grad: Vec<T> = (0..k)
            .map(|c| {
                let mut v = g[nonbasic[c]];
                for (b, &bi) in basis.iter().enumerate() {
                    v = v + zb[c][b] * g[bi];
                }
                -v
            })
            .collect();
        let y = psd_solve(&m, &neg_grad, rank_tol);
        for c in 0..k {
            p[nonbasic[c]] = y[c];
            for (b, &bi) in basis.iter().enumerate() {
                p[bi] = p[bi] + zb[c][b] * y[c];
            }
        }
        p
    }

    // Removes rounding drift from the equality constraints by moving the
    // basis variables, as long as that keeps them inside their bounds.
    fn polish(&self, w: &mut [T]) {
        let free = self.free();
        let Some(basis) = self.basis(&free) else {
            return;
        };
        let resid: Vec<T> = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, &b)| b - dot(r, w))
            .collect();
        let delta: Vec<T> = if basis.len() == 1 {
            vec![resid[0] / self.rows[0][basis[0]]]
        } else {
            let (p, q) = (basis[0], basis[1]);
            let (a, b, c, d) = (self.rows[0][p], self.rows[0][q], self.rows[1][p], self.rows[1][q]);
            let det = a * d - b * c;
            vec![(d * resid[0] - b * resid[1]) / det, (a * resid[1] - c * resid[0]) / det]
        };
        let fits = basis
            .iter()
            .zip(&delta)
            .all(|(&i, &dv)| w[i] + dv >= self.lo[i] && w[i] + dv <= self.hi[i]);
        if fits {
            for (&i, &dv) in basis.iter().zip(&delta) {
                w[i] = w[i] + dv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> Matrix<f64> {
        Matrix::from_diagonal(d)
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let b = WeightBounds::new(0.0, f64::INFINITY).unwrap();
        let s = minimize_variance(&diag(&[1.0, 1.0]), &[0.0, 0.02], Some(0.01), &b).unwrap();
        assert!((s.weights[0] - 0.5).abs() < 1e-12 && (s.weights[1] - 0.5).abs() < 1e-12);
        assert!((s.variance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_variance_gmv() {
        let b = WeightBounds::no_short();
        let s = minimize_variance(&diag(&[1.0, 4.0]), &[0.01, 0.02], None, &b).unwrap();
        assert!((s.weights[0] - 0.8).abs() < 1e-12, "{:?}", s.weights);
        assert!((s.variance - 0.8).abs() < 1e-12);
        let t = dot(&s.weights, &[0.01, 0.02]);
        let s2 = minimize_variance(&diag(&[1.0, 4.0]), &[0.01, 0.02], Some(t), &b).unwrap();
        assert!((s2.weights[0] - 0.8).abs() < 1e-9);
    }

    #[test]
    fn infeasible_target_carries_interval() {
        let b = WeightBounds::no_short();
        let err = minimize_variance(&diag(&[1.0, 1.0]), &[0.01, 0.03], Some(0.05), &b).unwrap_err();
        assert_eq!(
            err,
            Error::Infeasible {
                target: 0.05,
                low: 0.01,
                high: 0.03
            }
        );
    }

    #[test]
    fn top_of_range_is_single_asset() {
        let b = WeightBounds::new(0.0, f64::INFINITY).unwrap();
        let s = minimize_variance(&diag(&[1.0, 2.0]), &[0.01, 0.03], Some(0.03), &b).unwrap();
        assert_eq!(s.weights, vec![0.0, 1.0]);
    }

    #[test]
    fn tied_top_assets_share_the_face() {
        let b = WeightBounds::no_short();
        let s = minimize_variance(&diag(&[1.0, 1.0, 1.0]), &[0.01, 0.03, 0.03], Some(0.03), &b).unwrap();
        assert!((s.weights[1] - 0.5).abs() < 1e-12 && s.weights[0] == 0.0);
    }

    #[test]
    fn singular_hessian_reaches_zero_variance() {
        // two perfectly correlated assets with equal volatility
        let h = Matrix::<f64>::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let b = WeightBounds::short_allowed();
        let s = minimize_variance(&h, &[0.0, 0.01, 0.02], Some(0.005), &b).unwrap();
        let x = s.weights[0] + s.weights[1];
        // x on the correlated pair, 1 - x on the third asset
        assert!((s.variance - (x * x + (1.0 - x) * (1.0 - x))).abs() < 1e-12);
        assert!(s.variance <= 0.5 + 1e-12);
    }

    #[test]
    fn bounds_validation() {
        assert!(WeightBounds::new(0.5, 0.1).is_err());
        assert!(WeightBounds::new(f64::NEG_INFINITY, 1.0).is_err());
        assert!(!WeightBounds::new(0.0, 0.2).unwrap().admits(4));
        assert!(WeightBounds::new(0.0, 0.25).unwrap().admits(4));
    }
}
