//! Infeasible primal-dual path-following with Nesterov–Todd scaling and a
//! Mehrotra predictor-corrector, on real symmetric blocks.
//!
//! Internally the program is kept in minimization form
//! `min ⟨Cm, X⟩ s.t. 𝒜(X) = b, X ⪰ 0` with `Cm = −C`, dual
//! `max ⟨b, y⟩ s.t. 𝒜*(y) + S = Cm`. Reported duals are negated back.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Field, Result, SdpError, SdpProblem, SdpSolution, SdpStatus};
use crate::matlin::CMatrix;

type Mat = DMatrix<f64>;
type Vector = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Target for `|primal − dual| ≤ gap_target · (1 + |primal|)`.
    pub gap_target: f64,
    pub max_iters: usize,
    /// Relative primal/dual infeasibility accepted at termination.
    pub feas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_target: 1e-8, max_iters: 200, feas_tol: 1e-9 }
    }
}

type Entries = Vec<(usize, usize, f64)>;
/// Constraint index with its entries on one block.
type Term = (usize, Entries);

struct RealProgram {
    sizes: Vec<usize>,
    cost: Vec<Mat>,
    /// Per block, the constraints touching it with their entries.
    by_block: Vec<Vec<(usize, Entries)>>,
    /// Blocks whose every term is `I_k ⊗ F_i`.
    kron: Vec<Option<KronBlock>>,
    b: Vector,
    embedded: bool,
}

/// Largest `F` size for which the `nb² × nb²` contraction table is built.
const KRON_MAX_BASE: usize = 48;

struct KronBlock {
    k: usize,
    nb: usize,
    /// Constraint index and the entries of `F_i`.
    terms: Vec<(usize, Entries)>,
}

impl RealProgram {
    fn from_problem(prob: &SdpProblem) -> Self {
        let embedded = prob.field() == Field::Complex;
        let factor = if embedded { 2 } else { 1 };
        let sizes: Vec<usize> = prob.blocks().iter().map(|&n| factor * n).collect();
        let cost = prob
            .objective()
            .iter()
            .map(|c| if embedded { embed(c).scale(-0.5) } else { c.map(|z| -z.re) })
            .collect();
        let mut by_block: Vec<Vec<(usize, Entries)>> = vec![Vec::new(); sizes.len()];
        let mut kron_terms: Vec<Option<(usize, Vec<Term>)>> = vec![Some((0, Vec::new())); sizes.len()];
        for (i, terms) in prob.constraints().iter().enumerate() {
            for t in terms {
                let n = prob.blocks()[t.block];
                let (k, base) = t.matrix.kron_factor();
                let slot = &mut kron_terms[t.block];
                let fits = |s: &(usize, Vec<Term>)| {
                    !embedded && k > 1 && (s.0 == 0 || s.0 == k) && s.1.last().is_none_or(|l| l.0 != i)
                };
                if slot.as_ref().is_some_and(fits) {
                    let s = slot.as_mut().expect("checked");
                    s.0 = k;
                    s.1.push((i, base.iter().map(|&(r, c, v)| (r, c, v.re)).collect()));
                } else {
                    *slot = None;
                }
                let mut entries = Entries::new();
                for &(r, c, v) in t.matrix.entries() {
                    if embedded {
                        push_embedded(&mut entries, n, r, c, v);
                    } else {
                        entries.push((r, c, v.re));
                    }
                }
                let slot = &mut by_block[t.block];
                match slot.iter_mut().find(|(ci, _)| *ci == i) {
                    Some((_, existing)) => existing.extend(entries),
                    None => slot.push((i, entries)),
                }
            }
        }
        let kron = kron_terms
            .into_iter()
            .zip(prob.blocks())
            .map(|(t, &n)| {
                t.filter(|(k, terms)| *k > 1 && !terms.is_empty() && n / k <= KRON_MAX_BASE)
                    .map(|(k, terms)| KronBlock { k, nb: n / k, terms })
            })
            .collect();
        Self { sizes, cost, by_block, kron, b: Vector::from_column_slice(prob.rhs()), embedded }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[Mat]) -> Vector {
        let mut out = Vector::zeros(self.m());
        for (k, list) in self.by_block.iter().enumerate() {
            for (i, entries) in list {
                out[*i] += entries.iter().map(|&(r, c, v)| v * x[k][(r, c)]).sum::<f64>();
            }
        }
        out
    }

    fn adjoint(&self, y: &Vector) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.sizes.iter().map(|&n| Mat::zeros(n, n)).collect();
        for (k, list) in self.by_block.iter().enumerate() {
            for (i, entries) in list {
                for &(r, c, v) in entries {
                    out[k][(r, c)] += v * y[*i];
                }
            }
        }
        out
    }

    /// Schur complement `M_ij = Σ_k ⟨A_i^k, W_k A_j^k W_k⟩`.
    fn schur(&self, scalings: &[Scaling]) -> Mat {
        let m = self.m();
        let mut schur = Mat::zeros(m, m);
        for (k, list) in self.by_block.iter().enumerate() {
            let n = self.sizes[k];
            let w = &scalings[k].w;
            if let Some(kb) = &self.kron[k] {
                kron_schur(kb, w, &mut schur);
                continue;
            }
            let products: Vec<Option<Mat>> = list
                .iter()
                .map(|(_, e)| (e.len() > 2 * n).then(|| w * dense(n, e) * w))
                .collect();
            for (p, (i, ei)) in list.iter().enumerate() {
                for (q, (j, ej)) in list.iter().enumerate().skip(p) {
                    let v = if let Some(prod) = &products[q] {
                        contract(ei, prod)
                    } else if let Some(prod) = &products[p] {
                        contract(ej, prod)
                    } else {
                        let mut acc = 0.0;
                        for &(a, b, va) in ei {
                            for &(c, d, vc) in ej {
                                acc += va * vc * w[(b, c)] * w[(d, a)];
                            }
                        }
                        acc
                    };
                    schur[(*i, *j)] += v;
                    if i != j {
                        schur[(*j, *i)] += v;
                    }
                }
            }
        }
        schur
    }
}

/// Schur entries of a block with terms `I_k ⊗ F_i`:
/// `⟨I⊗F_i, W (I⊗F_j) W⟩ = Σ F_i[r,c] F_j[r',c'] G[(c,r'),(r,c')]` with
/// `G = U Uᵀ` and `U[(x,y),(a,a')] = W[(a,x),(a',y)]`.
fn kron_schur(kb: &KronBlock, w: &Mat, schur: &mut Mat) {
    let (k, nb) = (kb.k, kb.nb);
    let u = Mat::from_fn(nb * nb, k * k, |row, col| w[((col / k) * nb + row / nb, (col % k) * nb + row % nb)]);
    let g = kernels::mul_nt(&u, &u);
    for (p, (i, ei)) in kb.terms.iter().enumerate() {
        for (j, ej) in kb.terms.iter().skip(p) {
            let mut acc = 0.0;
            for &(r, c, v) in ei {
                for &(r2, c2, v2) in ej {
                    acc += v * v2 * g[(c * nb + r2, r * nb + c2)];
                }
            }
            schur[(*i, *j)] += acc;
            if i != j {
                schur[(*j, *i)] += acc;
            }
        }
    }
}

fn push_embedded(entries: &mut Entries, n: usize, r: usize, c: usize, v: Complex64) {
    entries.push((r, c, 0.5 * v.re));
    entries.push((n + r, n + c, 0.5 * v.re));
    if v.im != 0.0 {
        entries.push((r, n + c, -0.5 * v.im));
        entries.push((n + r, c, 0.5 * v.im));
    }
}

/// `H ↦ [[Re H, −Im H], [Im H, Re H]]`
fn embed(h: &CMatrix) -> Mat {
    let n = h.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`embed`] composed with the projection onto embedded matrices.
fn unembed(y: &Mat) -> CMatrix {
    let n = y.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            0.5 * (y[(i, j)] + y[(n + i, n + j)]),
            0.5 * (y[(n + i, j)] - y[(i, n + j)]),
        )
    })
}

fn dense(n: usize, entries: &Entries) -> Mat {
    let mut out = Mat::zeros(n, n);
    for &(r, c, v) in entries {
        out[(r, c)] += v;
    }
    out
}

fn contract(entries: &Entries, m: &Mat) -> f64 {
    entries.iter().map(|&(r, c, v)| v * m[(r, c)]).sum()
}

fn sym(m: Mat) -> Mat {
    (&m + m.transpose()) * 0.5
}

fn dot(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[Mat]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Dense kernels on nalgebra storage, computed by faer (column-major views,
/// sequential).
mod kernels {
    use faer::linalg::matmul::matmul;
    use faer::{Accum, MatMut, MatRef, Par, Side};

    use super::{Mat, Vector};

    fn view(m: &Mat) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
    }

    fn product(rows: usize, cols: usize, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat {
        let mut out = Mat::zeros(rows, cols);
        let dst = MatMut::from_column_major_slice_mut(out.as_mut_slice(), rows, cols);
        matmul(dst, Accum::Replace, lhs, rhs, 1.0, Par::Seq);
        out
    }

    pub fn mul(a: &Mat, b: &Mat) -> Mat {
        product(a.nrows(), b.ncols(), view(a), view(b))
    }

    /// `A Bᵀ`
    pub fn mul_nt(a: &Mat, b: &Mat) -> Mat {
        product(a.nrows(), b.nrows(), view(a), view(b).transpose())
    }

    /// `G M Gᵀ`
    pub fn congruence(g: &Mat, m: &Mat) -> Mat {
        mul_nt(&mul(g, m), g)
    }

    /// `Gᵀ M G`
    pub fn congruence_t(g: &Mat, m: &Mat) -> Mat {
        let gt_m = product(g.ncols(), m.ncols(), view(g).transpose(), view(m));
        mul(&gt_m, g)
    }

    /// Lower Cholesky factor.
    pub fn cholesky(a: &Mat) -> Option<Mat> {
        let llt = view(a).llt(Side::Lower).ok()?;
        let l = llt.L();
        Some(Mat::from_fn(a.nrows(), a.ncols(), |i, j| l[(i, j)]))
    }

    /// Ascending eigenvalues and eigenvectors of a symmetric matrix.
    pub fn eigh(a: &Mat) -> Option<(Vector, Mat)> {
        let e = view(a).self_adjoint_eigen(Side::Lower).ok()?;
        let n = a.nrows();
        let (u, s) = (e.U(), e.S().column_vector());
        Some((Vector::from_fn(n, |i, _| s[i]), Mat::from_fn(n, n, |i, j| u[(i, j)])))
    }

    /// Cholesky factorization kept for repeated solves.
    pub struct Factored(faer::linalg::solvers::Llt<f64>);

    impl Factored {
        pub fn new(a: &Mat) -> Option<Self> {
            view(a).llt(Side::Lower).ok().map(Factored)
        }

        pub fn solve(&self, b: &Vector) -> Vector {
            use faer::linalg::solvers::Solve;
            let mut x = b.clone();
            let n = x.len();
            self.0.solve_in_place(MatMut::from_column_major_slice_mut(x.as_mut_slice(), n, 1));
            x
        }
    }

    pub fn lambda_min(a: &Mat) -> Option<f64> {
        let values = view(a).self_adjoint_eigenvalues(Side::Lower).ok()?;
        Some(values.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// NT scaling of one block: `W = G Gᵀ` with `W S W = X` and
/// `G⁻¹ X G⁻ᵀ = Gᵀ S G = diag(d)`.
struct Scaling {
    g: Mat,
    d: Vector,
    w: Mat,
}

/// Any square factor with `X = L Lᵀ`; Cholesky when it succeeds.
fn factor(x: &Mat) -> Option<Mat> {
    if let Some(l) = kernels::cholesky(x) {
        return Some(l);
    }
    let (values, vectors) = kernels::eigh(x)?;
    if values.iter().any(|&v| v <= 0.0) {
        return None;
    }
    Some(Mat::from_fn(x.nrows(), x.ncols(), |i, j| vectors[(i, j)] * values[j].sqrt()))
}

fn nt_scaling(x: &Mat, s: &Mat) -> Option<Scaling> {
    let n = x.nrows();
    let l = factor(x)?;
    let t = sym(kernels::congruence_t(&l, s));
    let (values, v) = kernels::eigh(&t)?;
    if values.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lv = kernels::mul(&l, &v);
    let g = Mat::from_fn(n, n, |i, j| lv[(i, j)] / values[j].powf(0.25));
    let d = values.map(f64::sqrt);
    let w = sym(kernels::mul_nt(&g, &g));
    Some(Scaling { g, d, w })
}

/// Largest `α` with `diag(d) + α·Δ ⪰ 0` for a direction `Δ` in scaled space.
fn max_step(d: &Vector, delta: &Mat) -> f64 {
    let n = d.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let q = Mat::from_fn(n, n, |i, j| delta[(i, j)] / (d[i] * d[j]).sqrt());
    let lmin = kernels::lambda_min(&sym(q)).unwrap_or(f64::NEG_INFINITY);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Search direction, with `ΔX` and `ΔS` also mapped to scaled space
/// (`G⁻¹ ΔX G⁻ᵀ` and `Gᵀ ΔS G`).
struct Direction {
    dy: Vector,
    ds: Vec<Mat>,
    dxt: Vec<Mat>,
    dst: Vec<Mat>,
}

struct Newton<'a> {
    prog: &'a RealProgram,
    scalings: &'a [Scaling],
    chol: kernels::Factored,
    rp: &'a Vector,
    rd: &'a [Mat],
    w_rd_w: Vec<Mat>,
}

impl Newton<'_> {
    /// Solves the NT system `ΔX + W ΔS W = rc`; `rc_scaled` is `G⁻¹ rc G⁻ᵀ`.
    fn direction(&self, rc: &[Mat], rc_scaled: &[Mat]) -> Direction {
        let mut h = self.rp.clone();
        let rc_minus: Vec<Mat> = rc.iter().zip(&self.w_rd_w).map(|(a, b)| a - b).collect();
        h -= self.prog.apply(&rc_minus);
        let dy = self.chol.solve(&h);
        let aty = self.prog.adjoint(&dy);
        let ds: Vec<Mat> = self.rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
        let dst: Vec<Mat> = ds.iter().zip(self.scalings).map(|(ds, sc)| sym(kernels::congruence_t(&sc.g, ds))).collect();
        let dxt = rc_scaled.iter().zip(&dst).map(|(r, t)| r - t).collect();
        Direction { dy, ds, dxt, dst }
    }

    fn step_bounds(&self, dir: &Direction) -> (f64, f64) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for ((sc, dxt), dst) in self.scalings.iter().zip(&dir.dxt).zip(&dir.dst) {
            ap = ap.min(max_step(&sc.d, dxt));
            ad = ad.min(max_step(&sc.d, dst));
        }
        (ap, ad)
    }
}

fn factor_schur(m: Mat, iteration: usize) -> Result<kernels::Factored> {
    let scale = m.diagonal().iter().copied().fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..6 {
        let mut trial = m.clone();
        for i in 0..trial.nrows() {
            trial[(i, i)] += reg;
        }
        if let Some(chol) = kernels::Factored::new(&trial) {
            return Ok(chol);
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    Err(SdpError::NumericalBreakdown {
        iteration,
        reason: "Schur complement is not positive definite".into(),
    })
}

pub(super) fn solve(prob: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let prog = RealProgram::from_problem(prob);
    let nb = prog.sizes.len();
    let total: usize = prog.sizes.iter().sum();
    let b_norm = prog.b.norm();
    let c_norm = frob(&prog.cost);

    let mut x: Vec<Mat> = Vec::with_capacity(nb);
    let mut s: Vec<Mat> = Vec::with_capacity(nb);
    for (k, &n) in prog.sizes.iter().enumerate() {
        let nf = n as f64;
        let mut ratio: f64 = 1.0;
        let mut a_norm: f64 = 0.0;
        for (i, e) in &prog.by_block[k] {
            let fro = e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
            ratio = ratio.max((1.0 + prog.b[*i].abs()) / (1.0 + fro));
            a_norm = a_norm.max(fro);
        }
        let xi = 10f64.max(nf.sqrt()).max(nf.sqrt() * ratio);
        let eta = 10f64.max(nf.sqrt()).max(a_norm).max(prog.cost[k].norm());
        x.push(Mat::identity(n, n) * xi);
        s.push(Mat::identity(n, n) * eta);
    }
    let mut y = Vector::zeros(prog.m());

    let mut iterations = 0;
    let status = loop {
        let rp = &prog.b - prog.apply(&x);
        let aty = prog.adjoint(&y);
        let rd: Vec<Mat> =
            prog.cost.iter().zip(&aty).zip(&s).map(|((c, a), s)| c - a - s).collect();
        // Objective values in maximization form.
        let primal = -dot(&prog.cost, &x);
        let dual = -prog.b.dot(&y);
        let xs = dot(&x, &s);
        let mu = xs / total.max(1) as f64;
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = frob(&rd) / (1.0 + c_norm);
        let scale = 1.0 + primal.abs();

        if (primal - dual).abs() <= opts.gap_target * scale
            && xs <= opts.gap_target * scale
            && pinf <= opts.feas_tol
            && dinf <= opts.feas_tol
        {
            break SdpStatus::Optimal;
        }
        if iterations >= opts.max_iters {
            break SdpStatus::MaxIters;
        }
        if frob(&x) > 1e12 * (1.0 + b_norm) || y.norm() > 1e12 * (1.0 + c_norm) {
            break SdpStatus::InfeasibleDetected;
        }
        iterations += 1;

        let scalings: Vec<Scaling> = x
            .iter()
            .zip(&s)
            .map(|(x, s)| nt_scaling(x, s))
            .collect::<Option<_>>()
            .ok_or_else(|| SdpError::NumericalBreakdown {
                iteration: iterations,
                reason: "iterate left the positive definite cone".into(),
            })?;
        let chol = factor_schur(prog.schur(&scalings), iterations)?;
        let w_rd_w = scalings.iter().zip(&rd).map(|(sc, r)| sym(kernels::congruence(&sc.w, r))).collect();
        let newton = Newton { prog: &prog, scalings: &scalings, chol, rp: &rp, rd: &rd, w_rd_w };
        let d_mats: Vec<Mat> = scalings.iter().map(|sc| Mat::from_diagonal(&sc.d)).collect();

        // Predictor: affine-scaling direction, `rc = −X` (scaled: `−diag(d)`).
        let neg_x: Vec<Mat> = x.iter().map(|x| -x).collect();
        let neg_d: Vec<Mat> = d_mats.iter().map(|d| -d).collect();
        let predictor = newton.direction(&neg_x, &neg_d);
        let (ap, ad) = newton.step_bounds(&predictor);
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        // ⟨X, S⟩ is invariant under the scaling pair, so this is computed in scaled space.
        let xs_aff: f64 = d_mats
            .iter()
            .zip(&predictor.dxt)
            .zip(&predictor.dst)
            .map(|((d, dx), ds)| (d + dx * ap).dot(&(d + ds * ad)))
            .sum();
        let sigma = (xs_aff / xs).clamp(0.0, 1.0).powi(3);

        // Corrector: centering plus the second-order term in scaled space.
        let rc_scaled: Vec<Mat> = scalings
            .iter()
            .zip(predictor.dxt.iter().zip(&predictor.dst))
            .map(|(sc, (dxt, dst))| {
                let n = sc.d.len();
                let cross = sym(kernels::mul(dxt, dst));
                Mat::from_fn(n, n, |i, j| {
                    let mut t = -cross[(i, j)];
                    if i == j {
                        t += sigma * mu - sc.d[i] * sc.d[i];
                    }
                    2.0 * t / (sc.d[i] + sc.d[j])
                })
            })
            .collect();
        let rc: Vec<Mat> = scalings.iter().zip(&rc_scaled).map(|(sc, r)| kernels::congruence(&sc.g, r)).collect();
        let corrector = newton.direction(&rc, &rc_scaled);
        let (ap_max, ad_max) = newton.step_bounds(&corrector);
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            return Err(SdpError::NumericalBreakdown {
                iteration: iterations,
                reason: "step lengths collapsed".into(),
            });
        }
        for (k, (x, s)) in x.iter_mut().zip(s.iter_mut()).enumerate() {
            let dx = kernels::congruence(&scalings[k].g, &corrector.dxt[k]);
            *x = sym(&*x + dx * ap);
            *s = sym(&*s + &corrector.ds[k] * ad);
        }
        y += &corrector.dy * ad;
    };

    let y_out: Vec<f64> = y.iter().map(|v| -v).collect();
    let (x_out, s_out): (Vec<CMatrix>, Vec<CMatrix>) = if prog.embedded {
        (x.iter().map(unembed).collect(), s.iter().map(|s| unembed(s).scale(2.0)).collect())
    } else {
        (
            x.iter().map(|m| m.map(|v| Complex64::new(v, 0.0))).collect(),
            s.iter().map(|m| m.map(|v| Complex64::new(v, 0.0))).collect(),
        )
    };
    let primal_value = prob.objective_value(&x_out);
    let dual_value: f64 = prob.rhs().iter().zip(&y_out).map(|(b, y)| b * y).sum();
    let ax = prob.apply(&x_out);
    let primal_residual = ax.iter().zip(prob.rhs()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let dual_residual = prob
        .dual_slack(&y_out)
        .iter()
        .zip(&s_out)
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        .sqrt();
    Ok(SdpSolution {
        x: x_out,
        y: y_out,
        s: s_out,
        primal_value,
        dual_value,
        gap: dual_value - primal_value,
        primal_residual,
        dual_residual,
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::c;

    #[test]
    fn embedding_round_trip() {
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, -0.25), c(0.5, 0.25), c(-2.0, 0.0)]);
        let e = embed(&h);
        assert_eq!(e, e.transpose());
        assert_eq!(unembed(&e), h);
    }

    #[test]
    fn nt_scaling_identities() {
        let x = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let s = Mat::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 3.0]);
        let sc = nt_scaling(&x, &s).unwrap();
        assert!((&sc.w * &s * &sc.w - &x).amax() < 1e-12);
        let g_inv = sc.g.clone().try_inverse().unwrap();
        let dx = &g_inv * &x * g_inv.transpose();
        let ds = sc.g.transpose() * &s * &sc.g;
        assert!((dx - Mat::from_diagonal(&sc.d)).amax() < 1e-12);
        assert!((ds - Mat::from_diagonal(&sc.d)).amax() < 1e-12);
    }

    #[test]
    fn kron_schur_matches_entrywise_assembly() {
        use crate::sdp::{hermitian_basis, BlockTerm, SparseHermitian};
        let (k, nb) = (3, 2);
        let basis = hermitian_basis(nb, Field::Real);
        let build = |structured: bool| {
            let mut builder = SdpProblem::builder(Field::Real, vec![k * nb]);
            for f in &basis {
                let a = f.kron_identity(k);
                let a = if structured { a } else { SparseHermitian::from_dense(&a.to_dense()) };
                builder.push_constraint(vec![BlockTerm { block: 0, matrix: a }], 1.0);
            }
            RealProgram::from_problem(&builder.build().unwrap())
        };
        let (fast, plain) = (build(true), build(false));
        assert!(fast.kron[0].is_some() && plain.kron[0].is_none());
        let n = k * nb;
        let r = Mat::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let w = &r * r.transpose() + Mat::identity(n, n);
        let sc = vec![Scaling { g: Mat::identity(n, n), d: Vector::from_element(n, 1.0), w }];
        assert!((fast.schur(&sc) - plain.schur(&sc)).amax() < 1e-10);
    }
}
