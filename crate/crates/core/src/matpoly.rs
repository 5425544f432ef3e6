//! Matrix polytopes of corner models.
//!
//! A corner set `S = {Θ_1, …, Θ_N}`, `Θ_i = [A_i B_i]`, describes the
//! parametric uncertainty of the plant as `co(S)`. This module enumerates
//! corner sets from entrywise bounds, certifies that blended input matrices
//! keep full column rank, and refines `S` into a set whose every corner
//! admits exact matching gains `A_i + B_i K_i = A_r`, `B_i L_i = B_r`.

use subsets::combinations;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::linalg::{self, complement_projector, pinv, sigma_min};
use crate::lp::{hull_system, in_convex_hull, max_min_weight};

/// Numerical tolerances shared by the polytope routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub matching: f64,
    pub rank: f64,
    pub dedupe: f64,
    pub hurwitz: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            matching: 1e-8,
            rank: 1e-9,
            dedupe: 1e-8,
            hurwitz: 1e-9,
        }
    }
}

/// A state/input matrix pair `Θ = [A B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let (n, m) = (a.nrows(), b.ncols());
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows, A has {}",
                b.nrows(),
                n
            )));
        }
        if n == 0 || m == 0 || m > n {
            return Err(Error::Dimension(format!(
                "need 1 <= m <= n, got n = {n}, m = {m}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `[A B]` as one `n × (n+m)` matrix.
    pub fn theta(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut t = DMatrix::zeros(n, n + m);
        t.view_mut((0, 0), (n, n)).copy_from(&self.a);
        t.view_mut((0, n), (n, m)).copy_from(&self.b);
        t
    }

    pub fn from_theta(theta: &DMatrix<f64>, n: usize) -> Result<Self> {
        if theta.nrows() != n || theta.ncols() <= n {
            return Err(Error::Dimension("theta must be n x (n+m)".into()));
        }
        let m = theta.ncols() - n;
        Self::new(
            theta.view((0, 0), (n, n)).into_owned(),
            theta.view((0, n), (n, m)).into_owned(),
        )
    }

    /// Column-major `vec(Θ)`.
    pub fn vectorized(&self) -> DVector<f64> {
        let t = self.theta();
        DVector::from_column_slice(t.as_slice())
    }

    pub fn distance(&self, other: &SystemMatrices) -> f64 {
        (self.theta() - other.theta()).norm()
    }
}

/// Reference model `(A_r, B_r)` with Hurwitz `A_r` and full-rank `B_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingTarget {
    a_r: DMatrix<f64>,
    b_r: DMatrix<f64>,
}

impl MatchingTarget {
    pub fn new(a_r: DMatrix<f64>, b_r: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerances(a_r, b_r, &Tolerances::default())
    }

    pub fn with_tolerances(a_r: DMatrix<f64>, b_r: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let sys = SystemMatrices::new(a_r, b_r)?;
        let abscissa = linalg::spectral_abscissa(sys.a())?;
        if abscissa >= -tol.hurwitz {
            return Err(Error::NotHurwitz { abscissa });
        }
        if linalg::rank(sys.b(), 1e-12) < sys.m() {
            return Err(Error::InvalidConfig(
                "reference input matrix B_r must have full column rank".into(),
            ));
        }
        Ok(Self {
            a_r: sys.a,
            b_r: sys.b,
        })
    }

    pub fn a_r(&self) -> &DMatrix<f64> {
        &self.a_r
    }

    pub fn b_r(&self) -> &DMatrix<f64> {
        &self.b_r
    }

    pub fn n(&self) -> usize {
        self.a_r.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_r.ncols()
    }
}

/// Ordered list of `N ≥ 2` corner models with identical dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerSet {
    corners: Vec<SystemMatrices>,
}

impl CornerSet {
    pub fn new(corners: Vec<SystemMatrices>) -> Result<Self> {
        if corners.len() < 2 {
            return Err(Error::DegeneratePolytope {
                corners: corners.len(),
            });
        }
        let (n, m) = (corners[0].n(), corners[0].m());
        if let Some(i) = corners.iter().position(|c| c.n() != n || c.m() != m) {
            return Err(Error::Dimension(format!(
                "corner {i} is {}x{}, expected n = {n}, m = {m}",
                corners[i].n(),
                corners[i].m()
            )));
        }
        Ok(Self { corners })
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn n(&self) -> usize {
        self.corners[0].n()
    }

    pub fn m(&self) -> usize {
        self.corners[0].m()
    }

    pub fn corners(&self) -> &[SystemMatrices] {
        &self.corners
    }

    pub fn get(&self, i: usize) -> &SystemMatrices {
        &self.corners[i]
    }

    /// `Σ w_i A_i` and `Σ w_i B_i`.
    pub fn combine(&self, w: &[f64]) -> SystemMatrices {
        assert_eq!(w.len(), self.len(), "weight length must equal corner count");
        let mut a = DMatrix::zeros(self.n(), self.n());
        let mut b = DMatrix::zeros(self.n(), self.m());
        for (wi, c) in w.iter().zip(&self.corners) {
            a += c.a() * *wi;
            b += c.b() * *wi;
        }
        SystemMatrices { a, b }
    }

    /// `Σ w_i B_i` only.
    pub fn combine_b(&self, w: &[f64]) -> DMatrix<f64> {
        assert_eq!(w.len(), self.len(), "weight length must equal corner count");
        let mut b = DMatrix::zeros(self.n(), self.m());
        for (wi, c) in w.iter().zip(&self.corners) {
            b += c.b() * *wi;
        }
        b
    }
}

/// Entrywise bounds `A_min ≤ A ≤ A_max`, `B_min ≤ B ≤ B_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryBounds {
    pub a_min: DMatrix<f64>,
    pub a_max: DMatrix<f64>,
    pub b_min: DMatrix<f64>,
    pub b_max: DMatrix<f64>,
}

impl EntryBounds {
    pub fn new(
        a_min: DMatrix<f64>,
        a_max: DMatrix<f64>,
        b_min: DMatrix<f64>,
        b_max: DMatrix<f64>,
    ) -> Result<Self> {
        SystemMatrices::new(a_min.clone(), b_min.clone())?;
        if a_max.shape() != a_min.shape() || b_max.shape() != b_min.shape() {
            return Err(Error::Dimension("min and max bounds differ in shape".into()));
        }
        let bad = a_min.iter().zip(a_max.iter()).any(|(lo, hi)| lo > hi)
            || b_min.iter().zip(b_max.iter()).any(|(lo, hi)| lo > hi);
        if bad {
            return Err(Error::InvalidConfig(
                "entry bounds must satisfy min <= max".into(),
            ));
        }
        Ok(Self {
            a_min,
            a_max,
            b_min,
            b_max,
        })
    }
}

/// Matching gains `(K, L)` for one corner.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPair {
    pub k: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

/// Convex weights: non-negative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(DVector<f64>);

impl WeightVector {
    pub const SUM_TOL: f64 = 1e-12;
    pub const NEG_TOL: f64 = 1e-12;

    pub fn new(w: DVector<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Dimension("empty weight vector".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidConfig(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        if w.iter().any(|&x| !(x >= -Self::NEG_TOL)) {
            return Err(Error::InvalidConfig("weights must be non-negative".into()));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0 / n as f64))
    }

    /// Clamp slightly negative entries to zero and renormalize.
    fn cleaned(mut w: DVector<f64>) -> Self {
        w.iter_mut().for_each(|x| *x = x.max(0.0));
        let s: f64 = w.iter().sum();
        w /= s;
        Self(w)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankVerdict {
    /// Exact LP certificate (single-input case).
    VerifiedExact,
    /// No violation found among vertices, edge midpoints and this many
    /// random convex combinations.
    VerifiedSampled(usize),
    /// A convex combination with rank-deficient `Σ w_i B_i`.
    Violated(WeightVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub verdict: RankVerdict,
    /// Smallest `σ_min(Σ w_i B_i)` seen over the deterministic and sampled
    /// combinations (`NaN` for the exact LP route).
    pub min_sigma: f64,
}

impl RankReport {
    pub fn is_verified(&self) -> bool {
        !matches!(self.verdict, RankVerdict::Violated(_))
    }
}

/// `true` iff every eigenvalue of `a` has real part `< −tol`.
pub fn hurwitz_check(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(linalg::spectral_abscissa(a)? < -tol)
}

/// Enumerate all entrywise min/max corner matrices.
///
/// Entries with `min == max` do not double the count. Corners are listed in
/// reflected-Gray-code order over the free entries (row-major, `A` before
/// `B`, first free entry most significant), so consecutive corners differ
/// in exactly one entry.
pub fn enumerate_corner_set(bounds: &EntryBounds, cap: usize) -> Result<CornerSet> {
    let n = bounds.a_min.nrows();
    let m = bounds.b_min.ncols();
    // (is_b, row, col)
    let mut free = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if bounds.a_min[(i, j)] < bounds.a_max[(i, j)] {
                free.push((false, i, j));
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            if bounds.b_min[(i, j)] < bounds.b_max[(i, j)] {
                free.push((true, i, j));
            }
        }
    }
    let k = free.len();
    if k >= usize::BITS as usize - 1 || (1usize << k) > cap {
        return Err(Error::Capacity {
            count: format!("2^{k}"),
            cap,
        });
    }
    let count = 1usize << k;
    let mut corners = Vec::with_capacity(count);
    for idx in 0..count {
        let gray = idx ^ (idx >> 1);
        let mut a = bounds.a_min.clone();
        let mut b = bounds.b_min.clone();
        for (pos, &(is_b, i, j)) in free.iter().enumerate() {
            let bit = (gray >> (k - 1 - pos)) & 1 == 1;
            if bit {
                if is_b {
                    b[(i, j)] = bounds.b_max[(i, j)];
                } else {
                    a[(i, j)] = bounds.a_max[(i, j)];
                }
            }
        }
        corners.push(SystemMatrices { a, b });
    }
    CornerSet::new(corners)
}

/// Certify that every convex combination of the `B_i` has full column rank.
pub fn verify_rank_condition(
    cs: &CornerSet,
    sample_count: usize,
    seed: u64,
    tol_rank: f64,
) -> Result<RankReport> {
    let n_corners = cs.len();
    if cs.m() == 1 {
        // Σ w_i b_i = 0 with w in the simplex is an LP feasibility question.
        let points: Vec<DVector<f64>> = cs
            .corners()
            .iter()
            .map(|c| DVector::from_column_slice(c.b().as_slice()))
            .collect();
        let zero = DVector::zeros(cs.n());
        let verdict = match in_convex_hull(&points, &zero, 1e-10)? {
            Some(w) => RankVerdict::Violated(WeightVector::cleaned(w)),
            None => RankVerdict::VerifiedExact,
        };
        return Ok(RankReport {
            verdict,
            min_sigma: f64::NAN,
        });
    }

    let mut min_sigma = f64::INFINITY;
    let mut check = |w: DVector<f64>| -> Option<WeightVector> {
        let s = sigma_min(&cs.combine_b(w.as_slice()));
        min_sigma = min_sigma.min(s);
        (s <= tol_rank).then(|| WeightVector::cleaned(w))
    };

    for i in 0..n_corners {
        let mut w = DVector::zeros(n_corners);
        w[i] = 1.0;
        if let Some(v) = check(w) {
            return Ok(violated(v, min_sigma));
        }
    }
    for i in 0..n_corners {
        for j in (i + 1)..n_corners {
            let mut w = DVector::zeros(n_corners);
            w[i] = 0.5;
            w[j] = 0.5;
            if let Some(v) = check(w) {
                return Ok(violated(v, min_sigma));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        // Dirichlet(1, …, 1) via normalized unit exponentials.
        let e: Vec<f64> = (0..n_corners).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = e.iter().sum();
        let w = DVector::from_iterator(n_corners, e.iter().map(|x| x / s));
        if let Some(v) = check(w) {
            return Ok(violated(v, min_sigma));
        }
    }
    Ok(RankReport {
        verdict: RankVerdict::VerifiedSampled(sample_count),
        min_sigma,
    })
}

fn violated(w: WeightVector, min_sigma: f64) -> RankReport {
    RankReport {
        verdict: RankVerdict::Violated(w),
        min_sigma,
    }
}

/// Residuals `(ρ_B, ρ_A)` of the range conditions `P⊥ B = 0`,
/// `P⊥ (A_r − A) = 0` with `P⊥ = I − B_r B_r†`.
pub fn matching_residual(theta: &SystemMatrices, target: &MatchingTarget) -> (f64, f64) {
    let p = complement_projector(target.b_r());
    let rho_b = (&p * theta.b()).norm();
    let rho_a = (&p * (target.a_r() - theta.a())).norm();
    (rho_b, rho_a)
}

/// Least-squares matching gains `K = B†(A_r − A)`, `L = B†B_r`.
pub fn compute_gains(corner: &SystemMatrices, target: &MatchingTarget, tol_match: f64) -> Result<GainPair> {
    if corner.n() != target.n() || corner.m() != target.m() {
        return Err(Error::Dimension(
            "corner and reference model dimensions differ".into(),
        ));
    }
    let bp = pinv(corner.b());
    let k = &bp * (target.a_r() - corner.a());
    let l = &bp * target.b_r();
    let res_k = (corner.a() + corner.b() * &k - target.a_r()).norm();
    let res_l = (corner.b() * &l - target.b_r()).norm();
    let residual = res_k.max(res_l);
    if !(residual <= tol_match) {
        return Err(Error::MatchingInfeasible { residual });
    }
    Ok(GainPair { k, l })
}

/// Gains for every corner, naming the first corner that fails.
pub fn compute_corner_gains(cs: &CornerSet, target: &MatchingTarget, tol_match: f64) -> Result<Vec<GainPair>> {
    cs.corners()
        .iter()
        .enumerate()
        .map(|(index, c)| {
            compute_gains(c, target, tol_match).map_err(|e| match e {
                Error::MatchingInfeasible { residual } => Error::CornerNotMatching { index, residual },
                other => other,
            })
        })
        .collect()
}

/// Output of [`refine_matching_polytope`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub corners: CornerSet,
    /// Weights over the *original* corners reproducing each refined corner.
    pub witnesses: Vec<WeightVector>,
}

/// Intersect `co(S)` with the matching set and return the vertices of the
/// intersection as a new corner set.
///
/// In weight space the intersection is `F = {w ≥ 0, Σw = 1, M w = c}`.
/// Vertices of `F` are found by exhaustive basic-solution search; their
/// images `Θ(w)` are deduplicated and points that are convex combinations
/// of the remaining ones are pruned, leaving the extreme points of
/// `co(S) ∩ T`.
pub fn refine_matching_polytope(cs: &CornerSet, target: &MatchingTarget, tol: &Tolerances) -> Result<Refinement> {
    let (n, m) = (cs.n(), cs.m());
    if target.n() != n || target.m() != m {
        return Err(Error::Dimension(
            "corner set and reference model dimensions differ".into(),
        ));
    }
    let n_corners = cs.len();
    let p = complement_projector(target.b_r());
    let pa_r = &p * target.a_r();

    // One row per entry of P⊥B (rhs 0) and of P⊥A (rhs P⊥A_r), plus Σw = 1.
    let rows = n * m + n * n + 1;
    let mut g = DMatrix::zeros(rows, n_corners);
    let mut h = DVector::zeros(rows);
    for (j, c) in cs.corners().iter().enumerate() {
        let pb = &p * c.b();
        let pa = &p * c.a();
        for (r, v) in pb.iter().chain(pa.iter()).enumerate() {
            g[(r, j)] = *v;
        }
        g[(rows - 1, j)] = 1.0;
    }
    for (r, v) in pa_r.iter().enumerate() {
        h[n * m + r] = *v;
    }
    h[rows - 1] = 1.0;

    let (g_ind, h_ind) = linalg::independent_rows(&g, &h, 1e-12).ok_or_else(|| {
        Error::AssumptionViolated(
            "matching constraints are inconsistent over the affine hull of the corners".into(),
        )
    })?;
    let r = g_ind.nrows();

    let mut vertices: Vec<DVector<f64>> = Vec::new();
    if r <= n_corners {
        for basis in combinations(n_corners, r) {
            let sub = DMatrix::from_fn(r, r, |i, k| g_ind[(i, basis[k])]);
            let lu = sub.clone().lu();
            let Some(xb) = lu.solve(&h_ind) else { continue };
            if linalg::sigma_min(&sub) <= 1e-12 * sub.amax().max(1.0) {
                continue;
            }
            if xb.iter().any(|&x| x < -1e-10 || !x.is_finite()) {
                continue;
            }
            let mut w = DVector::zeros(n_corners);
            for (k, &col) in basis.iter().enumerate() {
                w[col] = xb[k];
            }
            if (&g_ind * &w - &h_ind).amax() > 1e-9 * (1.0 + h_ind.amax()) {
                continue;
            }
            if vertices.iter().all(|v| (v - &w).amax() > tol.dedupe) {
                vertices.push(w);
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::AssumptionViolated(
            "no point of the corner polytope satisfies the matching conditions".into(),
        ));
    }

    // Map to matrices and merge duplicates.
    let mut images: Vec<(SystemMatrices, WeightVector)> = Vec::new();
    for w in vertices {
        let wv = WeightVector::cleaned(w);
        let theta = cs.combine(wv.as_slice());
        if images.iter().all(|(t, _)| t.distance(&theta) > tol.dedupe) {
            images.push((theta, wv));
        }
    }

    // Drop images that are convex combinations of the others.
    let mut keep = vec![true; images.len()];
    for i in 0..images.len() {
        let others: Vec<DVector<f64>> = images
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && keep[j])
            .map(|(_, (t, _))| t.vectorized())
            .collect();
        if others.is_empty() {
            continue;
        }
        if in_convex_hull(&others, &images[i].0.vectorized(), tol.dedupe)?.is_some() {
            keep[i] = false;
        }
    }
    let (corners, witnesses): (Vec<_>, Vec<_>) = images
        .into_iter()
        .zip(keep)
        .filter_map(|(img, k)| k.then_some(img))
        .unzip();

    if corners.len() < 2 {
        return Err(Error::DegeneratePolytope {
            corners: corners.len(),
        });
    }
    for c in &corners {
        let (rb, ra) = matching_residual(c, target);
        if rb.max(ra) > tol.matching {
            return Err(Error::AssumptionViolated(format!(
                "refined corner misses the matching set by {:.3e}",
                rb.max(ra)
            )));
        }
        compute_gains(c, target, tol.matching)?;
    }
    Ok(Refinement {
        corners: CornerSet::new(corners)?,
        witnesses,
    })
}

/// Relative-interior margin of `theta` in `co(cs)` with its optimal weights.
#[derive(Debug, Clone)]
pub struct InteriorMargin {
    pub margin: f64,
    pub weights: DVector<f64>,
}

/// Maximize `ε` subject to `Σ w_i Θ_i = θ`, `Σ w_i = 1`, `w_i ≥ ε`.
pub fn relative_interior_margin(theta: &SystemMatrices, cs: &CornerSet) -> Result<InteriorMargin> {
    if theta.n() != cs.n() || theta.m() != cs.m() {
        return Err(Error::Dimension("theta and corner set dimensions differ".into()));
    }
    let points: Vec<DVector<f64>> = cs.corners().iter().map(|c| c.vectorized()).collect();
    let (g, h) = hull_system(&points, &theta.vectorized());
    let r = max_min_weight(&g, &h, 1e-9)?;
    Ok(InteriorMargin {
        margin: r.margin,
        weights: r.weights,
    })
}

mod subsets {
    /// All `k`-subsets of `0..n` in lexicographic order.
    pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
        let mut idx: Vec<usize> = (0..k).collect();
        let mut done = k > n;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = idx.clone();
            // advance
            let mut i = k;
            loop {
                if i == 0 {
                    done = true;
                    break;
                }
                i -= 1;
                if idx[i] < n - k + i {
                    idx[i] += 1;
                    for j in (i + 1)..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
            Some(out)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn segment_target() -> MatchingTarget {
        MatchingTarget::new(-DMatrix::identity(2, 2), col(&[10.0, 10.0])).unwrap()
    }

    fn segment_corners() -> CornerSet {
        let a = -DMatrix::identity(2, 2);
        let bounds = EntryBounds::new(a.clone(), a, col(&[1.0, 1.0]), col(&[4.0, 5.0])).unwrap();
        enumerate_corner_set(&bounds, 4096).unwrap()
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).count(), 10);
        assert_eq!(combinations(4, 0).count(), 1);
        assert_eq!(combinations(2, 3).count(), 0);
    }

    #[test]
    fn hurwitz_examples() {
        let a_r = m(3, 3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 1.0, -1.0]);
        assert!(hurwitz_check(&a_r, 1e-9).unwrap());
        assert!(!hurwitz_check(&m(1, 1, &[0.0]), 1e-9).unwrap());
        assert!(!hurwitz_check(&m(2, 2, &[0.0, 1.0, -1.0, 0.0]), 1e-9).unwrap());
        assert!(matches!(
            hurwitz_check(&m(2, 1, &[1.0, 2.0]), 1e-9),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn scalar_bounds_give_four_corners() {
        let bounds = EntryBounds::new(
            m(1, 1, &[-2.0]),
            m(1, 1, &[-1.0]),
            m(1, 1, &[1.0]),
            m(1, 1, &[2.0]),
        )
        .unwrap();
        let cs = enumerate_corner_set(&bounds, 4096).unwrap();
        let mut got: Vec<(f64, f64)> = cs
            .corners()
            .iter()
            .map(|c| (c.a()[(0, 0)], c.b()[(0, 0)]))
            .collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(got, vec![(-2.0, 1.0), (-2.0, 2.0), (-1.0, 1.0), (-1.0, 2.0)]);
    }

    #[test]
    fn input_bounds_enumerate_in_gray_order() {
        let cs = segment_corners();
        let bs: Vec<Vec<f64>> = cs.corners().iter().map(|c| c.b().iter().copied().collect()).collect();
        assert_eq!(
            bs,
            vec![vec![1.0, 1.0], vec![1.0, 5.0], vec![4.0, 5.0], vec![4.0, 1.0]]
        );
    }

    #[test]
    fn fixed_bounds_are_degenerate() {
        let a = m(1, 1, &[-1.0]);
        let b = m(1, 1, &[1.0]);
        let bounds = EntryBounds::new(a.clone(), a, b.clone(), b).unwrap();
        assert!(matches!(
            enumerate_corner_set(&bounds, 4096),
            Err(Error::DegeneratePolytope { corners: 1 })
        ));
    }

    #[test]
    fn enumeration_respects_cap() {
        let bounds = EntryBounds::new(
            DMatrix::zeros(3, 3),
            DMatrix::from_element(3, 3, 1.0),
            DMatrix::zeros(3, 2),
            DMatrix::from_element(3, 2, 1.0),
        )
        .unwrap();
        let err = enumerate_corner_set(&bounds, 4096).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(err.to_string().contains("explicit corner list"));
    }

    #[test]
    fn rank_exact_for_segment_example() {
        let r = verify_rank_condition(&segment_corners(), 0, 0, 1e-9).unwrap();
        assert_eq!(r.verdict, RankVerdict::VerifiedExact);
    }

    #[test]
    fn rank_violation_at_midpoint() {
        let a = DMatrix::zeros(2, 2);
        let cs = CornerSet::new(vec![
            SystemMatrices::new(a.clone(), col(&[1.0, 0.0])).unwrap(),
            SystemMatrices::new(a, col(&[-1.0, 0.0])).unwrap(),
        ])
        .unwrap();
        let r = verify_rank_condition(&cs, 0, 0, 1e-9).unwrap();
        match r.verdict {
            RankVerdict::Violated(w) => {
                assert!((w.as_slice()[0] - 0.5).abs() < 1e-9);
                assert!((w.as_slice()[1] - 0.5).abs() < 1e-9);
            }
            v => panic!("expected violation, got {v:?}"),
        }
    }

    #[test]
    fn rank_sampled_detects_two_input_collapse() {
        let a = DMatrix::zeros(2, 2);
        let cs = CornerSet::new(vec![
            SystemMatrices::new(a.clone(), DMatrix::identity(2, 2)).unwrap(),
            SystemMatrices::new(a, -DMatrix::identity(2, 2)).unwrap(),
        ])
        .unwrap();
        let r = verify_rank_condition(&cs, 10, 1, 1e-9).unwrap();
        assert!(matches!(r.verdict, RankVerdict::Violated(_)));
    }

    #[test]
    fn gains_for_segment_corners() {
        let t = segment_target();
        let a = -DMatrix::identity(2, 2);
        let g1 = compute_gains(&SystemMatrices::new(a.clone(), col(&[1.0, 1.0])).unwrap(), &t, 1e-8).unwrap();
        assert!((g1.l[(0, 0)] - 10.0).abs() < 1e-12);
        let g2 = compute_gains(&SystemMatrices::new(a.clone(), col(&[4.5, 4.5])).unwrap(), &t, 1e-8).unwrap();
        assert!((g2.l[(0, 0)] - 20.0 / 9.0).abs() < 1e-12);
        let g3 = compute_gains(&SystemMatrices::new(a.clone(), col(&[1.0, 5.0])).unwrap(), &t, 1e-8);
        assert!(matches!(g3, Err(Error::MatchingInfeasible { .. })));
    }

    #[test]
    fn gains_at_target_are_trivial() {
        let t = segment_target();
        let g = compute_gains(&SystemMatrices::new(t.a_r().clone(), t.b_r().clone()).unwrap(), &t, 1e-8).unwrap();
        assert!(g.k.amax() < 1e-12);
        assert!((g.l[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let t = segment_target();
        let (rb, ra) = matching_residual(&SystemMatrices::new(t.a_r().clone(), t.b_r().clone()).unwrap(), &t);
        assert!(rb < 1e-12 && ra < 1e-12);
        let (rb, _) = matching_residual(&SystemMatrices::new(t.a_r().clone(), col(&[1.0, 5.0])).unwrap(), &t);
        assert!((rb - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let (rb, ra) = matching_residual(&SystemMatrices::new(t.a_r().clone(), col(&[4.5, 4.5])).unwrap(), &t);
        assert!(rb < 1e-12 && ra < 1e-12);
    }

    #[test]
    fn refine_segment_example() {
        let r = refine_matching_polytope(&segment_corners(), &segment_target(), &Tolerances::default()).unwrap();
        let mut ends: Vec<f64> = r.corners.corners().iter().map(|c| c.b()[(0, 0)]).collect();
        ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ends.len(), 2);
        assert!((ends[0] - 1.0).abs() < 1e-9);
        assert!((ends[1] - 4.0).abs() < 1e-9);
        for c in r.corners.corners() {
            assert!((c.b()[(0, 0)] - c.b()[(1, 0)]).abs() < 1e-9);
        }
    }

    #[test]
    fn refine_keeps_matching_set() {
        let t = segment_target();
        let a = -DMatrix::identity(2, 2);
        let cs = CornerSet::new(vec![
            SystemMatrices::new(a.clone(), col(&[1.0, 1.0])).unwrap(),
            SystemMatrices::new(a.clone(), col(&[3.0, 3.0])).unwrap(),
        ])
        .unwrap();
        let r = refine_matching_polytope(&cs, &t, &Tolerances::default()).unwrap();
        assert_eq!(r.corners.len(), 2);
        for c in cs.corners() {
            assert!(r.corners.corners().iter().any(|d| d.distance(c) < 1e-9));
        }
    }

    #[test]
    fn refine_reports_empty_intersection() {
        let t = segment_target();
        let a = -DMatrix::identity(2, 2);
        let cs = CornerSet::new(vec![
            SystemMatrices::new(a.clone(), col(&[1.0, 2.0])).unwrap(),
            SystemMatrices::new(a, col(&[2.0, 3.0])).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            refine_matching_polytope(&cs, &t, &Tolerances::default()),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn refine_single_point_is_degenerate() {
        let t = segment_target();
        let a = -DMatrix::identity(2, 2);
        let cs = CornerSet::new(vec![
            SystemMatrices::new(a.clone(), col(&[1.0, 0.0])).unwrap(),
            SystemMatrices::new(a, col(&[0.0, 1.0])).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            refine_matching_polytope(&cs, &t, &Tolerances::default()),
            Err(Error::DegeneratePolytope { corners: 1 })
        ));
    }

    #[test]
    fn margin_examples() {
        let cs = segment_corners();
        let v = relative_interior_margin(cs.get(0), &cs).unwrap();
        assert!(v.margin.abs() < 1e-9);
        let avg = cs.combine(&[0.25; 4]);
        assert!(relative_interior_margin(&avg, &cs).unwrap().margin >= 0.25 - 1e-9);
        let off = SystemMatrices::new(DMatrix::zeros(2, 2), col(&[1.0, 1.0])).unwrap();
        assert!(matches!(
            relative_interior_margin(&off, &cs),
            Err(Error::NotInHull { .. })
        ));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(DVector::from_vec(vec![0.5, 0.5])).is_ok());
        assert!(WeightVector::new(DVector::from_vec(vec![0.6, 0.5])).is_err());
        assert!(WeightVector::new(DVector::from_vec(vec![1.5, -0.5])).is_err());
    }
}
