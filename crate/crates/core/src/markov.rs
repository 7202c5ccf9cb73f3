//! Finite ergodic Markov chains: stationary distributions, detailed balance,
//! time reversal, convex mixtures and mixing-error curves.
//!
//! Matrices are row stochastic: `m[(i, j)]` is the probability of moving to
//! `j` from `i`. Ergodicity is never checked structurally; a chain that does
//! not converge under power iteration or the direct solve is reported as
//! [`Error::NonConvergence`].

use std::fmt::Write as _;
use std::ops::Index;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on row sums and entry bounds.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Below this, a stationary mass is treated as zero when dividing by it.
pub const ZERO_MASS: f64 = 1e-15;
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Square row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    m: DMatrix<f64>,
}

impl StochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        for (i, row) in m.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !sum.is_finite()
                || (sum - 1.0).abs() > STOCHASTIC_TOL
                || min < -STOCHASTIC_TOL
                || max > 1.0 + STOCHASTIC_TOL
            {
                return Err(Error::NotStochastic { row: i, sum, min });
            }
        }
        Ok(StochasticMatrix { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        StochasticMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    /// Matrix with every row equal to `mu` (the limit of `P^k`).
    pub fn limit(mu: &StationaryDistribution) -> Self {
        let n = mu.len();
        StochasticMatrix {
            m: DMatrix::from_fn(n, n, |_, j| mu[j]),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.m.row(i).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }

    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), v.len())?;
        let out = &self.m * DVector::from_column_slice(v);
        Ok(out.as_slice().to_vec())
    }

    /// `M^k` by repeated squaring.
    pub fn power(&self, k: usize) -> StochasticMatrix {
        let mut result = DMatrix::identity(self.n(), self.n());
        let mut base = self.m.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        StochasticMatrix { m: result }
    }

    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        (&self.m - &other.m).amax()
    }

    /// Plain-text form: `n` on the first line, then `n` rows of `n`
    /// whitespace-separated values with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n());
        for row in self.m.row_iter() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = numbered_lines(text);
        Self::read_block(&mut lines)
    }

    /// Reads one matrix block from an iterator of `(line_number, content)`
    /// with comments and blanks already removed.
    pub(crate) fn read_block<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (ln, first) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "missing matrix dimension"))?;
        let n: usize = first
            .trim()
            .parse()
            .map_err(|_| Error::parse(ln, format!("expected state count, got {first:?}")))?;
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(ln + r + 1, "truncated matrix"))?;
            let row = parse_floats(ln, line)?;
            if row.len() != n {
                return Err(Error::parse(
                    ln,
                    format!("expected {n} entries, found {}", row.len()),
                ));
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

impl Index<(usize, usize)> for StochasticMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.m[idx]
    }
}

/// Probability vector `mu` with `mu M = mu` for its source chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > STOCHASTIC_TOL
        {
            return Err(Error::InvalidParameter(format!(
                "not a probability vector (sum {sum})"
            )));
        }
        Ok(StationaryDistribution { probs })
    }

    pub fn uniform(n: usize) -> Self {
        StationaryDistribution {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// `|| mu M - mu ||_1`.
    pub fn residual(&self, m: &StochasticMatrix) -> f64 {
        left_residual(&self.probs, m.as_matrix())
    }

    pub fn l1_distance(&self, other: &StationaryDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

impl Index<usize> for StationaryDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

fn left_mul(mu: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    let n = mu.len();
    (0..n)
        .map(|j| (0..n).map(|i| mu[i] * m[(i, j)]).sum())
        .collect()
}

fn left_residual(mu: &[f64], m: &DMatrix<f64>) -> f64 {
    left_mul(mu, m)
        .iter()
        .zip(mu)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// Stationary distribution by power iteration, with a direct solve of
/// `(M^T - I) mu = 0, sum(mu) = 1` when iteration stalls above `tol`.
pub fn stationary_distribution(
    m: &StochasticMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<StationaryDistribution> {
    match power_iteration(m, tol, max_iters) {
        Ok(mu) => Ok(mu),
        Err(Error::NonConvergence {
            residual,
            iterations,
        }) => direct_solve(m, tol).map_err(|_| Error::NonConvergence {
            residual,
            iterations,
        }),
        Err(e) => Err(e),
    }
}

/// [`stationary_distribution`] with the default tolerance and budget.
pub fn stationary(m: &StochasticMatrix) -> Result<StationaryDistribution> {
    stationary_distribution(m, DEFAULT_STATIONARY_TOL, DEFAULT_MAX_ITERS)
}

/// Power iteration only; exposed so tests can check it against the direct
/// solve independently.
pub fn power_iteration(
    m: &StochasticMatrix,
    tol: f64,
    max_iters: usize,
) -> Result<StationaryDistribution> {
    let n = m.n();
    let mat = m.as_matrix();
    let mut mu = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for it in 0..max_iters {
        let mut next = left_mul(&mu, mat);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        residual = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if residual < best {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
        }
        // Keep polishing past `tol` until rounding noise is reached, so
        // quantities that divide by mu stay accurate.
        if residual <= tol && (residual <= 1e-16 || since_best >= 8 || it + 1 == max_iters) {
            let residual = left_residual(&mu, mat);
            if residual <= tol {
                return Ok(StationaryDistribution { probs: mu });
            }
        }
    }
    Err(Error::NonConvergence {
        residual,
        iterations: max_iters,
    })
}

/// Direct linear solve for the stationary distribution.
pub fn direct_solve(m: &StochasticMatrix, tol: f64) -> Result<StationaryDistribution> {
    let n = m.n();
    let mut a = m.as_matrix().transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    let mut probs: Vec<f64> = x.iter().map(|&p| if p < 0.0 && p > -1e-13 { 0.0 } else { p }).collect();
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::SingularSystem);
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    let residual = left_residual(&probs, m.as_matrix());
    if residual > tol {
        return Err(Error::NonConvergence {
            residual,
            iterations: 0,
        });
    }
    Ok(StationaryDistribution { probs })
}

/// Time-reversed chain: `rev[i][j] = mu_j m[j][i] / mu_i`.
pub fn reversal(m: &StochasticMatrix, mu: &StationaryDistribution) -> Result<StochasticMatrix> {
    check_dim(m.n(), mu.len())?;
    if let Some((state, &mass)) = mu.as_slice().iter().enumerate().find(|(_, &p)| p <= ZERO_MASS) {
        return Err(Error::ZeroMass { state, mass });
    }
    let mat = m.as_matrix();
    StochasticMatrix::new(DMatrix::from_fn(m.n(), m.n(), |i, j| {
        mu[j] * mat[(j, i)] / mu[i]
    }))
}

/// Detailed balance: `|mu_i m_ij - mu_j m_ji| <= tol` for every pair.
pub fn is_reversible(m: &StochasticMatrix, mu: &StationaryDistribution, tol: f64) -> bool {
    let n = m.n();
    if mu.len() != n {
        return false;
    }
    (0..n).all(|i| (i + 1..n).all(|j| (mu[i] * m[(i, j)] - mu[j] * m[(j, i)]).abs() <= tol))
}

/// `(1 - beta) p + beta p_rev`.
pub fn mix(p: &StochasticMatrix, p_rev: &StochasticMatrix, beta: f64) -> Result<StochasticMatrix> {
    check_dim(p.n(), p_rev.n())?;
    check_unit(beta, "beta")?;
    if beta == 0.0 {
        return Ok(p.clone());
    }
    if beta == 1.0 {
        return Ok(p_rev.clone());
    }
    StochasticMatrix::new(p.as_matrix() * (1.0 - beta) + p_rev.as_matrix() * beta)
}

/// Distance of one matrix power from the limit matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingError {
    /// Power of the chain, starting at 1.
    pub iteration: usize,
    pub max_abs: f64,
    pub frobenius: f64,
}

/// Element `k` is the distance between `m^(k+1)` and the limit matrix whose
/// rows all equal `mu`.
pub fn mixing_error_curve(
    m: &StochasticMatrix,
    mu: &StationaryDistribution,
    iters: usize,
) -> Result<Vec<MixingError>> {
    check_dim(m.n(), mu.len())?;
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    let limit = StochasticMatrix::limit(mu).into_matrix();
    let mut power = m.as_matrix().clone();
    let mut out = Vec::with_capacity(iters);
    for k in 1..=iters {
        let diff = &power - &limit;
        out.push(MixingError {
            iteration: k,
            max_abs: diff.amax(),
            frobenius: diff.norm(),
        });
        if k < iters {
            power = &power * m.as_matrix();
        }
    }
    Ok(out)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

pub(crate) fn check_unit(x: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {x} outside [0, 1]")))
    }
}

pub(crate) fn parse_floats(line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("bad number {tok:?}")))
        })
        .collect()
}

/// Lines with 1-based numbers, `#` comments stripped, blanks skipped.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_state() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn noisy_cycle() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[
            vec![0.1, 0.9, 0.0],
            vec![0.0, 0.1, 0.9],
            vec![0.9, 0.0, 0.1],
        ])
        .unwrap()
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(matches!(
            StochasticMatrix::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]),
            Err(Error::NotStochastic { row: 0, .. })
        ));
        assert!(StochasticMatrix::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::from_rows(&[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn two_state_stationary() {
        let mu = stationary(&two_state()).unwrap();
        assert_abs_diff_eq!(mu[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 1.0 / 3.0, epsilon = 1e-12);
        let direct = direct_solve(&two_state(), 1e-12).unwrap();
        assert!(mu.l1_distance(&direct) < 1e-12);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let m = StochasticMatrix::from_rows(&[
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let mu = stationary(&m).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(mu[i], 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn noisy_cycle_uniform_and_not_reversible() {
        let p = noisy_cycle();
        let mu = stationary(&p).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(mu[i], 1.0 / 3.0, epsilon = 1e-12);
        }
        assert!(!is_reversible(&p, &mu, 1e-9));
        let rev = reversal(&p, &mu).unwrap();
        let expected = StochasticMatrix::from_rows(&[
            vec![0.1, 0.0, 0.9],
            vec![0.9, 0.1, 0.0],
            vec![0.0, 0.9, 0.1],
        ])
        .unwrap();
        assert!(rev.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn periodic_chain_falls_back_to_direct_solve() {
        // Period two; iterates from the uniform start oscillate forever.
        let bounce = StochasticMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(power_iteration(&bounce, 1e-12, 1000).is_err());
        let mu = stationary_distribution(&bounce, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(mu[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn transient_state_blocks_reversal() {
        let transient = StochasticMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let mu = stationary(&transient).unwrap();
        assert_abs_diff_eq!(mu[0], 0.0, epsilon = 1e-12);
        assert!(matches!(
            reversal(&transient, &mu),
            Err(Error::ZeroMass { state: 0, .. })
        ));
    }

    #[test]
    fn non_ergodic_chain_reports_non_convergence() {
        // Two closed classes: the stationary distribution is not unique.
        // The periodic class keeps power iteration from settling and the
        // direct system is singular.
        let split = StochasticMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            stationary_distribution(&split, 1e-12, 2000),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn two_state_chain_is_its_own_reversal() {
        let p = two_state();
        let mu = stationary(&p).unwrap();
        assert!(is_reversible(&p, &mu, 1e-12));
        assert!(reversal(&p, &mu).unwrap().max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let p = noisy_cycle();
        let mu = stationary(&p).unwrap();
        let rev = reversal(&p, &mu).unwrap();
        assert_eq!(mix(&p, &rev, 0.0).unwrap(), p);
        assert_eq!(mix(&p, &rev, 1.0).unwrap(), rev);
        let half = mix(&p, &rev, 0.5).unwrap();
        let expected = StochasticMatrix::from_rows(&[
            vec![0.1, 0.45, 0.45],
            vec![0.45, 0.1, 0.45],
            vec![0.45, 0.45, 0.1],
        ])
        .unwrap();
        assert!(half.max_abs_diff(&expected) < 1e-12);
        assert!(stationary(&half).unwrap().l1_distance(&mu) < 1e-10);
        assert!(matches!(
            mix(&p, &two_state(), 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(mix(&p, &rev, 1.5).is_err());
    }

    #[test]
    fn mixing_curve_two_state() {
        let p = two_state();
        let mu = stationary(&p).unwrap();
        let curve = mixing_error_curve(&p, &mu, 3).unwrap();
        // P - P^inf = [[7/30, -7/30], [-7/15, 7/15]]; the largest entry sits
        // in the second row.
        assert_abs_diff_eq!(curve[0].max_abs, 2.0 * (0.9 - 2.0 / 3.0), epsilon = 1e-12);
        // Second eigenvalue 0.7 scales the deviation each step.
        assert_abs_diff_eq!(curve[1].max_abs, 0.7 * curve[0].max_abs, epsilon = 1e-12);
        assert!(mixing_error_curve(&p, &mu, 0).is_err());
    }

    #[test]
    fn mixing_curve_of_limit_is_zero() {
        let mu = StationaryDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let lim = StochasticMatrix::limit(&mu);
        for e in mixing_error_curve(&lim, &mu, 5).unwrap() {
            assert!(e.max_abs < 1e-15 && e.frobenius < 1e-15);
        }
    }

    #[test]
    fn power_matches_repeated_product() {
        let p = noisy_cycle();
        let mut acc = StochasticMatrix::identity(3);
        for _ in 0..7 {
            acc = StochasticMatrix {
                m: acc.as_matrix() * p.as_matrix(),
            };
        }
        assert!(p.power(7).max_abs_diff(&acc) < 1e-14);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let p = noisy_cycle();
        let mu = stationary(&p).unwrap();
        let rev = mix(&p, &reversal(&p, &mu).unwrap(), 0.3).unwrap();
        let back = StochasticMatrix::from_text(&rev.to_text()).unwrap();
        assert_eq!(back, rev);
    }

    #[test]
    fn text_parse_errors() {
        assert!(matches!(
            StochasticMatrix::from_text("2\n0.5 0.5\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            StochasticMatrix::from_text("2\n0.5 0.5\n1 x\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
