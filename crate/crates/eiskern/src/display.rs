//! Displays in matrix normal form over the truncated Witt vectors of a
//! finite field, with O_F-action: duality, the modification functor,
//! Lubin-Tate displays and their dagger duals, and trace compatibility.
//!
//! A display lives on P = W^h with Q = I e_1 + .. + I e_d + W e_{d+1} +
//! .. + W e_h. We carry two representations: a normal form (structure
//! matrix) and a "raw" form that stores a residue basis of Q/IP together
//! with the Frobenius images, which is what the functors naturally
//! produce.

use std::collections::BTreeSet;

use crate::algebra::{AlgHom, Algebra, Elem};
use crate::eisenstein::{self, EisensteinError};
use crate::latmodel::{amat_adjugate, amat_det, amat_mul, AMat};
use crate::linalg::{self, Mat};
use crate::tower::{
    make_field_tower, pi_val_div, split, tower_automorphism, FieldTower, SplittingData,
    TowerError,
};
use crate::zp::PrimePow;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DisplayError {
    #[error("display axiom violated: {0}")]
    AxiomViolation(String),
    #[error("linear solve failed or is not unique: {0}")]
    SolveFails(String),
    #[error("filtration is not strict")]
    NotStrict,
    #[error("frobenius images do not generate")]
    GenerationFails,
    #[error("theta element invalid: {0}")]
    ThetaInvalid(String),
    #[error(transparent)]
    Eisenstein(#[from] EisensteinError),
    #[error(transparent)]
    Tower(#[from] TowerError),
}

type DResult<T> = Result<T, DisplayError>;

/// Arithmetic context: W = W_O(F_q) truncated at a fixed length, with its
/// Frobenius. Built as an unramified extension so that the sigma-twists
/// are honest ring automorphisms at storage precision.
#[derive(Clone, Debug)]
pub struct DispCtx {
    pub w: Algebra,
    pub sigma: AlgHom,
    pub sigma_inv: AlgHom,
    pub f_res: usize,
}

impl DispCtx {
    /// `len` is the Witt length (working precision); `tower_m` is the
    /// precision the underlying unramified tower is built at, which
    /// controls how much storage slack is available for divided
    /// Frobenius evaluations.
    pub fn new(p: u64, f_res: usize, len: u32, tower_m: u32) -> DResult<DispCtx> {
        assert!(tower_m >= len);
        let wt = make_field_tower(p, f_res, 1, &[], tower_m)?;
        let sigma = tower_automorphism(&wt, 1 % f_res)?;
        let sigma_inv = tower_automorphism(&wt, (f_res - 1) % f_res)?;
        let w = wt.alg.at_work_precision(len);
        Ok(DispCtx {
            w,
            sigma,
            sigma_inv,
            f_res,
        })
    }

    pub fn rw(&self) -> usize {
        self.w.rank
    }

    pub fn s(&self, x: &Elem) -> Elem {
        self.sigma.apply(x, &self.w.ctx_store())
    }

    pub fn s_inv(&self, x: &Elem) -> Elem {
        self.sigma_inv.apply(x, &self.w.ctx_store())
    }

    /// Divided Frobenius on I = pW: sigma-dot(x) = sigma(x/p).
    pub fn sdot(&self, x: &Elem) -> Elem {
        self.s(&self.w.div_pow(x, 1))
    }
}

// ---- rows of W-elements ----------------------------------------------

pub fn wrow_zero(w: &Algebra, n: usize) -> Vec<Elem> {
    vec![w.zero(); n]
}

pub fn wrow_std(w: &Algebra, n: usize, i: usize) -> Vec<Elem> {
    let mut r = wrow_zero(w, n);
    r[i] = w.one.clone();
    r
}

pub fn wrow_add(w: &Algebra, x: &[Elem], y: &[Elem]) -> Vec<Elem> {
    x.iter().zip(y).map(|(a, b)| w.add(a, b)).collect()
}

pub fn wrow_sub(w: &Algebra, x: &[Elem], y: &[Elem]) -> Vec<Elem> {
    x.iter().zip(y).map(|(a, b)| w.sub(a, b)).collect()
}

pub fn wrow_scale(w: &Algebra, s: &Elem, x: &[Elem]) -> Vec<Elem> {
    x.iter().map(|a| w.mul(s, a)).collect()
}

pub fn wrow_smul(w: &Algebra, s: u128, x: &[Elem]) -> Vec<Elem> {
    x.iter().map(|a| w.scalar_mul(s, a)).collect()
}

pub fn wrow_map(ctx: &DispCtx, hom: &AlgHom, x: &[Elem]) -> Vec<Elem> {
    let cs = ctx.w.ctx_store();
    x.iter().map(|a| hom.apply(a, &cs)).collect()
}

/// x . M with rows-as-images convention: result = sum_i x_i M[i].
pub fn apply_amat(w: &Algebra, x: &[Elem], m: &AMat) -> Vec<Elem> {
    let cols = m[0].len();
    let mut out = wrow_zero(w, cols);
    for (i, xi) in x.iter().enumerate() {
        if xi.iter().all(|&c| c == 0) {
            continue;
        }
        out = wrow_add(w, &out, &wrow_scale(w, xi, &m[i]));
    }
    out
}

pub fn amat_transpose(m: &AMat) -> AMat {
    let r = m.len();
    let c = m[0].len();
    (0..c).map(|j| (0..r).map(|i| m[i][j].clone()).collect()).collect()
}

pub fn amat_identity(w: &Algebra, n: usize) -> AMat {
    (0..n).map(|i| wrow_std(w, n, i)).collect()
}

pub fn amat_add(w: &Algebra, x: &AMat, y: &AMat) -> AMat {
    x.iter().zip(y).map(|(a, b)| wrow_add(w, a, b)).collect()
}

pub fn amat_sub(w: &Algebra, x: &AMat, y: &AMat) -> AMat {
    x.iter().zip(y).map(|(a, b)| wrow_sub(w, a, b)).collect()
}

pub fn amat_scale(w: &Algebra, s: &Elem, x: &AMat) -> AMat {
    x.iter().map(|r| wrow_scale(w, s, r)).collect()
}

pub fn amat_eq(w: &Algebra, x: &AMat, y: &AMat, c: &PrimePow) -> bool {
    x.iter().zip(y).all(|(a, b)| wrow_eq(w, a, b, c))
}

pub fn wrow_eq(_w: &Algebra, x: &[Elem], y: &[Elem], c: &PrimePow) -> bool {
    x.iter()
        .zip(y)
        .all(|(a, b)| a.iter().zip(b).all(|(&u, &v)| u % c.modulus == v % c.modulus))
}

/// Solve x . m = b at the highest precision that admits a solution,
/// never below `lo`. Functor outputs are exact only up to a small
/// storage-tail defect that grows by one per divided-Frobenius layer, so
/// solve targets can be inconsistent in the last few storage digits.
fn solve_descending(
    m: &Mat,
    b: &[u128],
    p: u64,
    hi: u32,
    lo: u32,
) -> Option<Vec<u128>> {
    let mut k = hi;
    loop {
        let c = PrimePow::new(p, k);
        let bb: Vec<u128> = b.iter().map(|&x| x % c.modulus).collect();
        if let Some(s) = linalg::solve_left(&m.reduce(&c), &bb, &c) {
            return Some(s);
        }
        if k == lo {
            return None;
        }
        k -= 1;
    }
}

fn amat_inverse(w: &Algebra, x: &AMat) -> DResult<AMat> {
    let det = amat_det(w, x);
    let inv = w
        .inverse(&det)
        .map_err(|_| DisplayError::SolveFails("matrix determinant is not a unit".into()))?;
    let adj = amat_adjugate(w, x);
    Ok(amat_scale(w, &inv, &adj))
}

// ---- flat coordinates -------------------------------------------------

pub fn flat_row(w: &Algebra, x: &[Elem], c: &PrimePow) -> Vec<u128> {
    let mut out = Vec::with_capacity(x.len() * w.rank);
    for e in x {
        for i in 0..w.rank {
            out.push(e[i] % c.modulus);
        }
    }
    out
}

pub fn unflat_row(w: &Algebra, v: &[u128]) -> Vec<Elem> {
    v.chunks(w.rank).map(|ch| ch.to_vec()).collect()
}

/// Howell basis of the R-span (R = residue field of W, via the W-basis
/// acting by multiplication) of the residues of the given rows, mod p.
pub fn rspan_flat(w: &Algebra, rows: &[Vec<Elem>], cp: &PrimePow) -> Mat {
    let n = if rows.is_empty() { 0 } else { rows[0].len() };
    let mut m = Mat::zero(0, n * w.rank);
    for r in rows {
        for t in 0..w.rank {
            let sc = wrow_scale(w, &w.basis_elem(t), r);
            m.push_row(&flat_row(w, &sc, cp));
        }
    }
    linalg::howell(&m, cp)
}

/// Greedy selection of rows whose residues form an R-basis of the R-span
/// of all candidate residues.
pub fn r_basis_rows(w: &Algebra, cand: &[Vec<Elem>], cp: &PrimePow) -> Vec<Vec<Elem>> {
    let n = if cand.is_empty() { 0 } else { cand[0].len() };
    let mut acc = Mat::zero(0, n * w.rank);
    let mut kept = Vec::new();
    for r in cand {
        let f = flat_row(w, r, cp);
        if linalg::contains_vector(&acc, &f, cp) {
            continue;
        }
        kept.push(r.clone());
        for t in 0..w.rank {
            let sc = wrow_scale(w, &w.basis_elem(t), r);
            acc.push_row(&flat_row(w, &sc, cp));
        }
        acc = linalg::howell(&acc, cp);
    }
    kept
}

// ---- raw displays -----------------------------------------------------

/// A display presented by generators: an R-basis of Q/IP (lifted to W
/// rows), the divided-Frobenius images of those generators, and the full
/// Frobenius on the standard basis. Optional O_F-action as one matrix per
/// O_F-basis element.
#[derive(Clone, Debug)]
pub struct RawDisplay {
    pub h: usize,
    pub q_gens: AMat,
    pub fdot_q: AMat,
    pub f_basis: AMat,
    pub iota: Vec<AMat>,
}

impl RawDisplay {
    pub fn dim(&self) -> usize {
        self.h - self.q_gens.len()
    }
}

/// Normal form: Q = I e_1 + .. + I e_d + W e_{d+1} + .. + W e_h, and the
/// structure matrix phi stores (as rows) F e_1, .., F e_d, Fdot e_{d+1},
/// .., Fdot e_h.
#[derive(Clone, Debug)]
pub struct Display {
    pub h: usize,
    pub d: usize,
    pub phi: AMat,
    pub iota: Vec<AMat>,
}

impl Display {
    pub fn new(ctx: &DispCtx, h: usize, d: usize, phi: AMat, iota: Vec<AMat>) -> DResult<Display> {
        let det = amat_det(&ctx.w, &phi);
        if !ctx.w.is_unit(&det) {
            return Err(DisplayError::GenerationFails);
        }
        Ok(Display { h, d, phi, iota })
    }

    pub fn to_raw(&self, ctx: &DispCtx) -> RawDisplay {
        let w = &ctx.w;
        let k = self.h - self.d;
        let q_gens: AMat = (0..k).map(|j| wrow_std(w, self.h, self.d + j)).collect();
        let fdot_q: AMat = (0..k).map(|j| self.phi[self.d + j].clone()).collect();
        let mut f_basis = Vec::with_capacity(self.h);
        for i in 0..self.d {
            f_basis.push(self.phi[i].clone());
        }
        for j in self.d..self.h {
            f_basis.push(wrow_smul(w, ctx.w.p as u128, &self.phi[j]));
        }
        RawDisplay {
            h: self.h,
            q_gens,
            fdot_q,
            f_basis,
            iota: self.iota.clone(),
        }
    }
}

/// F on an arbitrary element (sigma-linear extension from the basis).
pub fn f_eval(ctx: &DispCtx, raw: &RawDisplay, x: &[Elem]) -> Vec<Elem> {
    let w = &ctx.w;
    let mut out = wrow_zero(w, raw.h);
    for i in 0..raw.h {
        out = wrow_add(w, &out, &wrow_scale(w, &ctx.s(&x[i]), &raw.f_basis[i]));
    }
    out
}

fn q_solve_matrix(ctx: &DispCtx, raw: &RawDisplay, cp: &PrimePow) -> Mat {
    let w = &ctx.w;
    let mut m = Mat::zero(0, raw.h * w.rank);
    for g in &raw.q_gens {
        for t in 0..w.rank {
            let sc = wrow_scale(w, &w.basis_elem(t), g);
            m.push_row(&flat_row(w, &sc, cp));
        }
    }
    m
}

/// Decompose x in Q as sum of R-multiples of the q-generators plus a
/// remainder in I P. Returns None when the residue of x is not in Q/IP.
pub fn q_coords(ctx: &DispCtx, raw: &RawDisplay, x: &[Elem]) -> Option<(Vec<Elem>, Vec<Elem>)> {
    let w = &ctx.w;
    let cp = PrimePow::new(w.p, 1);
    let k = raw.q_gens.len();
    let target = flat_row(w, x, &cp);
    let coeffs = if k == 0 {
        if target.iter().any(|&c| c != 0) {
            return None;
        }
        Vec::new()
    } else {
        let m = q_solve_matrix(ctx, raw, &cp);
        linalg::solve_left(&m, &target, &cp)?
    };
    let mut c_lift = Vec::with_capacity(k);
    for kk in 0..k {
        let mut e = w.zero();
        for t in 0..w.rank {
            e[t] = coeffs[kk * w.rank + t];
        }
        c_lift.push(e);
    }
    let mut xi = x.to_vec();
    for kk in 0..k {
        xi = wrow_sub(w, &xi, &wrow_scale(w, &c_lift[kk], &raw.q_gens[kk]));
    }
    Some((c_lift, xi))
}

/// Divided Frobenius on Q.
pub fn fdot_eval(ctx: &DispCtx, raw: &RawDisplay, x: &[Elem]) -> DResult<Vec<Elem>> {
    let w = &ctx.w;
    let (c, xi) = q_coords(ctx, raw, x)
        .ok_or_else(|| DisplayError::AxiomViolation("element not in Q".into()))?;
    let mut out = wrow_zero(w, raw.h);
    for (k, ck) in c.iter().enumerate() {
        out = wrow_add(w, &out, &wrow_scale(w, &ctx.s(ck), &raw.fdot_q[k]));
    }
    for i in 0..raw.h {
        out = wrow_add(w, &out, &wrow_scale(w, &ctx.sdot(&xi[i]), &raw.f_basis[i]));
    }
    Ok(out)
}

/// Full flat span of Q at working precision (q-generators plus I P).
pub fn q_span(ctx: &DispCtx, raw: &RawDisplay, c: &PrimePow) -> Mat {
    let w = &ctx.w;
    let mut rows = Vec::new();
    for g in &raw.q_gens {
        for t in 0..w.rank {
            rows.push(wrow_scale(w, &w.basis_elem(t), g));
        }
    }
    for i in 0..raw.h {
        for t in 0..w.rank {
            rows.push(wrow_smul(
                w,
                w.p as u128,
                &wrow_scale(w, &w.basis_elem(t), &wrow_std(w, raw.h, i)),
            ));
        }
    }
    let mut m = Mat::zero(0, raw.h * w.rank);
    for r in rows {
        m.push_row(&flat_row(w, &r, c));
    }
    linalg::howell(&m, c)
}

/// Check the display axioms on the raw data: the q-generators are an
/// R-basis of their span, F and Fdot are compatible on the overlap of
/// I P with the generator span, and the Frobenius images generate P.
pub fn validate(ctx: &DispCtx, raw: &RawDisplay) -> DResult<()> {
    let w = &ctx.w;
    let cw = w.ctx_work();
    let cp = PrimePow::new(w.p, 1);
    let indep = r_basis_rows(w, &raw.q_gens, &cp);
    if indep.len() != raw.q_gens.len() {
        return Err(DisplayError::AxiomViolation(
            "q-generators are not residue-independent".into(),
        ));
    }
    for (k, g) in raw.q_gens.iter().enumerate() {
        let lhs = f_eval(ctx, raw, g);
        let rhs = wrow_smul(w, w.p as u128, &raw.fdot_q[k]);
        if !wrow_eq(w, &lhs, &rhs, &cw) {
            return Err(DisplayError::AxiomViolation(format!(
                "F(g_{k}) != p Fdot(g_{k})"
            )));
        }
    }
    let mut gens = Mat::zero(0, raw.h * w.rank);
    for r in raw.fdot_q.iter().chain(raw.f_basis.iter()) {
        for t in 0..w.rank {
            let sc = wrow_scale(w, &w.basis_elem(t), r);
            gens.push_row(&flat_row(w, &sc, &cw));
        }
    }
    let hform = linalg::howell(&gens, &cw);
    let full = (raw.h * w.rank) as u64 * cw.k as u64;
    if linalg::span_log_size(&hform, &cw) != full {
        return Err(DisplayError::GenerationFails);
    }
    Ok(())
}

/// Check that the stored matrices define an action of the given algebra
/// commuting with F and Fdot.
pub fn validate_action(ctx: &DispCtx, raw: &RawDisplay, alg: &Algebra) -> DResult<()> {
    let w = &ctx.w;
    let cw = w.ctx_work();
    if raw.iota.len() != alg.rank {
        return Err(DisplayError::AxiomViolation("action rank mismatch".into()));
    }
    let cs = alg.ctx_store();
    for a in 0..alg.rank {
        for b in 0..alg.rank {
            let prod = alg.mul(&alg.basis_elem(a), &alg.basis_elem(b));
            let mut want = vec![wrow_zero(w, raw.h); raw.h];
            for c in 0..alg.rank {
                let coef = prod[c] % cs.modulus;
                if coef == 0 {
                    continue;
                }
                for i in 0..raw.h {
                    want[i] = wrow_add(w, &want[i], &wrow_smul(w, coef, &raw.iota[c][i]));
                }
            }
            let got = amat_mul(w, &raw.iota[a], &raw.iota[b]);
            if !amat_eq(w, &got, &want, &cw) {
                return Err(DisplayError::AxiomViolation(format!(
                    "iota({a}) iota({b}) is not iota of the product"
                )));
            }
        }
    }
    for m in &raw.iota {
        for g in &raw.q_gens {
            let img = apply_amat(w, g, m);
            let lhs = fdot_eval(ctx, raw, &img)?;
            let rhs = apply_amat(w, &fdot_eval(ctx, raw, g)?, m);
            if !wrow_eq(w, &lhs, &rhs, &cw) {
                return Err(DisplayError::AxiomViolation(
                    "action does not commute with Fdot".into(),
                ));
            }
        }
        for i in 0..raw.h {
            let lhs = f_eval(ctx, raw, &m[i]);
            let rhs = apply_amat(w, &raw.f_basis[i], m);
            if !wrow_eq(w, &lhs, &rhs, &cw) {
                return Err(DisplayError::AxiomViolation(
                    "action does not commute with F".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Recompute the F-matrix from the divided Frobenius data: F(e_i) =
/// Fdot(p e_i). In normal form this is the identity p-scaling on the
/// second block; the function re-checks the compatibility axiom.
pub fn complete_frobenius(ctx: &DispCtx, disp: &Display) -> DResult<AMat> {
    let raw = disp.to_raw(ctx);
    validate(ctx, &raw)?;
    Ok(raw.f_basis)
}

// ---- normalization ----------------------------------------------------

/// Convert a raw display to normal form. Returns the display together
/// with the change-of-basis matrix U whose rows are the new basis in the
/// old coordinates.
pub fn normalize(ctx: &DispCtx, raw: &RawDisplay) -> DResult<(Display, AMat)> {
    let w = &ctx.w;
    let cp = PrimePow::new(w.p, 1);
    let k = raw.q_gens.len();
    let d = raw.h - k;
    let mut acc = rspan_flat(w, &raw.q_gens, &cp);
    let mut comp = Vec::new();
    for i in 0..raw.h {
        if comp.len() == d {
            break;
        }
        let e = wrow_std(w, raw.h, i);
        let f = flat_row(w, &e, &cp);
        if !linalg::contains_vector(&acc, &f, &cp) {
            comp.push(e.clone());
            for t in 0..w.rank {
                let sc = wrow_scale(w, &w.basis_elem(t), &e);
                acc.push_row(&flat_row(w, &sc, &cp));
            }
            acc = linalg::howell(&acc, &cp);
        }
    }
    if comp.len() != d {
        return Err(DisplayError::SolveFails(
            "no standard-basis complement for the Hodge filtration".into(),
        ));
    }
    let mut u: AMat = comp;
    u.extend(raw.q_gens.iter().cloned());
    let uinv = amat_inverse(w, &u)?;
    let mut phi = Vec::with_capacity(raw.h);
    for i in 0..d {
        phi.push(apply_amat(w, &f_eval(ctx, raw, &u[i]), &uinv));
    }
    for j in 0..k {
        phi.push(apply_amat(w, &raw.fdot_q[j], &uinv));
    }
    let iota = raw
        .iota
        .iter()
        .map(|m| amat_mul(w, &u, &amat_mul(w, m, &uinv)))
        .collect();
    let disp = Display::new(ctx, raw.h, d, phi, iota)?;
    Ok((disp, u))
}

// ---- duality ----------------------------------------------------------

/// The dual display on P^v = Hom_W(P, W), from the pairing identity
/// (Fdot^v l)(Fdot x) = sigma-dot(l(x)). `conj` optionally twists the
/// O_F-action by an O-coordinate matrix of the conjugation (hermitian
/// duals); rows of `conj` are the conjugates of the O_F-basis.
pub fn dualize_raw(
    ctx: &DispCtx,
    raw: &RawDisplay,
    conj: Option<&Vec<Vec<u128>>>,
) -> DResult<RawDisplay> {
    let w = &ctx.w;
    let cs = w.ctx_store();
    let cw = w.ctx_work();
    let cp = PrimePow::new(w.p, 1);
    let h = raw.h;
    let k = raw.q_gens.len();
    let rw = w.rank;

    // residue-orthogonal complement of Q/IP: functionals v with
    // sum_i v_i g_i = 0 in R for every generator
    let dual_gens: Vec<Vec<Elem>> = if k == 0 {
        (0..h).map(|i| wrow_std(w, h, i)).collect()
    } else {
        let mut m = Mat::zero(0, k * rw);
        for i in 0..h {
            for t in 0..rw {
                let mut row = Vec::with_capacity(k * rw);
                for g in &raw.q_gens {
                    let val = w.mul(&w.basis_elem(t), &g[i]);
                    for s in 0..rw {
                        row.push(val[s] % cp.modulus);
                    }
                }
                m.push_row(&row);
            }
        }
        let ker = linalg::left_kernel(&m, &cp);
        let cand: Vec<Vec<Elem>> = (0..ker.rows)
            .map(|r| unflat_row(w, &ker.row_vec(r)))
            .filter(|v| v.iter().any(|e| e.iter().any(|&c| c != 0)))
            .collect();
        r_basis_rows(w, &cand, &cp)
    };
    if dual_gens.len() != h - k {
        return Err(DisplayError::SolveFails(format!(
            "dual Hodge rank {} instead of {}",
            dual_gens.len(),
            h - k
        )));
    }

    // generator list for the solve: Fdot images of (g_j; p e_i)
    let gmat: Vec<&Vec<Elem>> = raw.fdot_q.iter().chain(raw.f_basis.iter()).collect();
    let ncols = (k + h) * rw;
    let mut msolve = Mat::zero(0, ncols);
    for i in 0..h {
        for t in 0..rw {
            let bt = w.basis_elem(t);
            let mut row = Vec::with_capacity(ncols);
            for gj in &gmat {
                let val = w.mul(&bt, &gj[i]);
                for s in 0..rw {
                    row.push(val[s] % cs.modulus);
                }
            }
            msolve.push_row(&row);
        }
    }
    // uniqueness of the solve at working precision
    let ker = linalg::left_kernel(&msolve.reduce(&cw), &cw);
    for r in 0..ker.rows {
        if ker.row_vec(r).iter().any(|&c| c % cw.modulus != 0) {
            return Err(DisplayError::SolveFails("dual Frobenius not unique".into()));
        }
    }

    let solve = |rhs: &[Elem]| -> DResult<Vec<Elem>> {
        let mut flat = Vec::with_capacity(ncols);
        for v in rhs {
            for s in 0..rw {
                flat.push(v[s] % cs.modulus);
            }
        }
        let sol = solve_descending(&msolve, &flat, w.p, w.m_store - 1, w.m_work)
            .ok_or_else(|| DisplayError::SolveFails("dual Frobenius solve".into()))?;
        Ok(unflat_row(w, &sol))
    };

    let mut fdot_dual = Vec::with_capacity(dual_gens.len());
    for l in &dual_gens {
        let mut rhs = Vec::with_capacity(k + h);
        for g in &raw.q_gens {
            let mut val = w.zero();
            for i in 0..h {
                val = w.add(&val, &w.mul(&l[i], &g[i]));
            }
            rhs.push(ctx.sdot(&val));
        }
        for i in 0..h {
            rhs.push(ctx.s(&l[i]));
        }
        fdot_dual.push(solve(&rhs)?);
    }
    let mut f_dual = Vec::with_capacity(h);
    for i in 0..h {
        let mut rhs = Vec::with_capacity(k + h);
        for g in &raw.q_gens {
            rhs.push(ctx.s(&g[i]));
        }
        for j in 0..h {
            let val = if i == j {
                w.scalar_mul(w.p as u128, &w.one)
            } else {
                w.zero()
            };
            rhs.push(val);
        }
        f_dual.push(solve(&rhs)?);
    }

    let iota_dual: Vec<AMat> = match conj {
        None => raw.iota.iter().map(amat_transpose).collect(),
        Some(cmat) => {
            let n = raw.iota.len();
            (0..n)
                .map(|a| {
                    let mut acc = vec![wrow_zero(w, h); h];
                    for c in 0..n {
                        let coef = cmat[a][c] % cs.modulus;
                        if coef == 0 {
                            continue;
                        }
                        for i in 0..h {
                            acc[i] =
                                wrow_add(w, &acc[i], &wrow_smul(w, coef, &raw.iota[c][i]));
                        }
                    }
                    amat_transpose(&acc)
                })
                .collect()
        }
    };

    Ok(RawDisplay {
        h,
        q_gens: dual_gens,
        fdot_q: fdot_dual,
        f_basis: f_dual,
        iota: iota_dual,
    })
}

/// Direct check of the duality pairing identity on all generator pairs.
pub fn check_dual_pairing(
    ctx: &DispCtx,
    d: &RawDisplay,
    dv: &RawDisplay,
    mc: &PrimePow,
) -> DResult<bool> {
    let w = &ctx.w;
    let mut xs: Vec<Vec<Elem>> = d.q_gens.clone();
    for i in 0..d.h {
        xs.push(wrow_smul(w, w.p as u128, &wrow_std(w, d.h, i)));
    }
    let mut ls: Vec<Vec<Elem>> = dv.q_gens.clone();
    for i in 0..dv.h {
        ls.push(wrow_smul(w, w.p as u128, &wrow_std(w, dv.h, i)));
    }
    for l in &ls {
        let fl = fdot_eval(ctx, dv, l)?;
        for x in &xs {
            let fx = fdot_eval(ctx, d, x)?;
            let mut lhs = w.zero();
            for i in 0..d.h {
                lhs = w.add(&lhs, &w.mul(&fl[i], &fx[i]));
            }
            let mut pair = w.zero();
            for i in 0..d.h {
                pair = w.add(&pair, &w.mul(&l[i], &x[i]));
            }
            let rhs = ctx.sdot(&pair);
            if !wrow_eq(w, &[lhs], &[rhs], mc) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---- modification -----------------------------------------------------

/// Modification by a lifted idempotent-style multiplier: Q_0 = ker(E : P
/// -> P/Q), Fdot_0(x) = Fdot(x E), F_0(x) = Fdot(p x E).
pub fn modify_raw(ctx: &DispCtx, raw: &RawDisplay, es: &AMat) -> DResult<RawDisplay> {
    let w = &ctx.w;
    let cp = PrimePow::new(w.p, 1);
    let h = raw.h;
    let rw = w.rank;
    let mut flat_es = Mat::zero(0, h * rw);
    for i in 0..h {
        for t in 0..rw {
            let sc = wrow_scale(w, &w.basis_elem(t), &es[i]);
            flat_es.push_row(&flat_row(w, &sc, &cp));
        }
    }
    let qspan = rspan_flat(w, &raw.q_gens, &cp);
    let pre = linalg::preimage(&flat_es, &qspan, &cp);
    let cand: Vec<Vec<Elem>> = (0..pre.rows)
        .map(|r| unflat_row(w, &pre.row_vec(r)))
        .filter(|v| v.iter().any(|e| e.iter().any(|&c| c != 0)))
        .collect();
    let q0 = r_basis_rows(w, &cand, &cp);
    let mut fdot0 = Vec::with_capacity(q0.len());
    for g in &q0 {
        fdot0.push(fdot_eval(ctx, raw, &apply_amat(w, g, es))?);
    }
    let mut f0 = Vec::with_capacity(h);
    for i in 0..h {
        let pei = wrow_smul(w, w.p as u128, &es[i]);
        f0.push(fdot_eval(ctx, raw, &pei)?);
    }
    let out = RawDisplay {
        h,
        q_gens: q0,
        fdot_q: fdot0,
        f_basis: f0,
        iota: raw.iota.clone(),
    };
    validate(ctx, &out)?;
    Ok(out)
}

// ---- scenarios: O_F with a chosen splitting ---------------------------

/// A field F/K together with the Witt context of a residue extension
/// splitting F, the Teichmuller lifts of the embeddings' images of the
/// distinguished generator, and the tensor algebra O_F (x) W.
pub struct DisplayScenario {
    pub tower: FieldTower,
    pub split: SplittingData,
    pub ctx: DispCtx,
    pub f_alg: Algebra,
    pub tw: Algebra,
    pub roots_teich: Vec<Elem>,
    pub zeta: Vec<u128>,
    pub deg: usize,
}

impl DisplayScenario {
    pub fn new(p: u64, f: usize, e: usize, eis: &[(usize, i64)], len: u32) -> DResult<DisplayScenario> {
        let deg = e * f;
        let tower_m = len + deg as u32 + 6;
        let tower = make_field_tower(p, f, e, eis, tower_m)?;
        let sp = split(&tower)?;
        let ctx = DispCtx::new(p, sp.omega_f, len, tower_m)?;
        let f_alg = tower.alg.at_work_precision(len);
        let tw = Algebra::tensor(&f_alg, &ctx.w, "OF(x)W");
        let cp = PrimePow::new(p, 1);
        let mut roots_teich = Vec::with_capacity(sp.roots.len());
        for r in &sp.roots {
            let mut res = ctx.w.zero();
            for i in 0..sp.omega_unram_rank {
                res[i] = r[i] % cp.modulus;
            }
            roots_teich.push(ctx.w.teichmuller(&res, sp.omega_f as u32));
        }
        let zeta = tower.zeta.clone();
        Ok(DisplayScenario {
            tower,
            split: sp,
            ctx,
            f_alg,
            tw,
            roots_teich,
            zeta,
            deg,
        })
    }

    /// zeta (x) 1 in O_F (x) W.
    pub fn zeta_t(&self) -> Elem {
        let z: Elem = self.zeta.clone();
        self.f_alg.tensor_left(&z, &self.ctx.w)
    }

    /// 1 (x) [phi_j(zeta)] in O_F (x) W.
    pub fn root_t(&self, j: usize) -> Elem {
        self.f_alg.tensor_right(&self.roots_teich[j], &self.ctx.w)
    }

    /// Eisenstein multiplier prod_{phi in s} (zeta (x) 1 - 1 (x)
    /// [phi(zeta)]) as an element of O_F (x) W.
    pub fn es_elem(&self, s: &BTreeSet<usize>) -> Elem {
        let mut acc = self.tw.one.clone();
        let z = self.zeta_t();
        for &j in s {
            let factor = self.tw.sub(&z, &self.root_t(j));
            acc = self.tw.mul(&acc, &factor);
        }
        acc
    }

    /// W-block matrix (deg x deg) of multiplication by a tensor element
    /// on O_F (x) W viewed as W^deg.
    pub fn w_block(&self, t: &Elem) -> AMat {
        let w = &self.ctx.w;
        let rw = w.rank;
        let mut out = vec![vec![w.zero(); self.deg]; self.deg];
        for a in 0..self.deg {
            let ba = self.tw.basis_elem(a * rw);
            let prod = self.tw.mul(t, &ba);
            for a2 in 0..self.deg {
                out[a][a2] = prod[a2 * rw..(a2 + 1) * rw].to_vec();
            }
        }
        out
    }

    /// Block-diagonal regular action of O_F on (O_F (x) W)^n.
    pub fn regular_iota(&self, n: usize) -> Vec<AMat> {
        let w = &self.ctx.w;
        let h = n * self.deg;
        let mut out = Vec::with_capacity(self.deg);
        for a in 0..self.deg {
            let fa = self.f_alg.basis_elem(a);
            let blk = self.w_block(&self.f_alg.tensor_left(&fa, w));
            let mut m = vec![wrow_zero(w, h); h];
            for c in 0..n {
                for i in 0..self.deg {
                    for j in 0..self.deg {
                        m[c * self.deg + i][c * self.deg + j] = blk[i][j].clone();
                    }
                }
            }
            out.push(m);
        }
        out
    }

    /// iota(zeta) from a full set of action matrices.
    pub fn iota_elem(&self, iota: &[AMat], coords: &[u128]) -> AMat {
        let w = &self.ctx.w;
        let cs = self.tower.ctx_store();
        let h = iota[0].len();
        let mut acc = vec![wrow_zero(w, h); h];
        for (a, m) in iota.iter().enumerate() {
            let coef = coords[a] % cs.modulus;
            if coef == 0 {
                continue;
            }
            for i in 0..h {
                acc[i] = wrow_add(w, &acc[i], &wrow_smul(w, coef, &m[i]));
            }
        }
        acc
    }

    /// The modification matrix for a subset of embeddings, built from a
    /// given O_F-action.
    pub fn es_matrix(&self, iota: &[AMat], s: &BTreeSet<usize>) -> AMat {
        let w = &self.ctx.w;
        let h = iota[0].len();
        let iz = self.iota_elem(iota, &self.zeta);
        let mut acc = amat_identity(w, h);
        for &j in s {
            let scaled = amat_scale(w, &self.roots_teich[j], &amat_identity(w, h));
            let factor = amat_sub(w, &iz, &scaled);
            acc = amat_mul(w, &acc, &factor);
        }
        acc
    }

    /// Hodge strictness of a raw display with respect to (A, B): J_B Mbar
    /// inside Qbar inside J_A Mbar, all as residue spans.
    pub fn check_strict(
        &self,
        raw: &RawDisplay,
        a: &BTreeSet<usize>,
        b: &BTreeSet<usize>,
    ) -> DResult<()> {
        let w = &self.ctx.w;
        let cp = PrimePow::new(w.p, 1);
        let ea = self.es_matrix(&raw.iota, a);
        let eb = self.es_matrix(&raw.iota, b);
        let qbar = rspan_flat(w, &raw.q_gens, &cp);
        let span_of = |m: &AMat| rspan_flat(w, m, &cp);
        let ja = span_of(&ea);
        let jb = span_of(&eb);
        if !linalg::span_contained(&jb, &qbar, &cp) || !linalg::span_contained(&qbar, &ja, &cp)
        {
            return Err(DisplayError::NotStrict);
        }
        Ok(())
    }

    /// Per-factor data of the Eisenstein multiplier over O_F (x) W: for
    /// each local factor, the number of embeddings of S landing in it and
    /// the valuation of the projected multiplier. The factor of each
    /// embedding is located independently by a valuation probe and cross-
    /// checked against the residue classes of the splitting.
    pub fn factor_valuations(&self, s: &BTreeSet<usize>) -> DResult<Vec<(usize, u32)>> {
        let tw = &self.tw;
        let idems = self
            .tw
            .idempotents()
            .map_err(|e| DisplayError::SolveFails(format!("idempotents: {e:?}")))?;
        let pi_t = self
            .f_alg
            .tensor_left(&self.tower.pi.clone(), &self.ctx.w);
        let z = self.zeta_t();
        let es = self.es_elem(s);
        let cap = (self.deg as u32 + 2) * self.tw.m_work;
        let mut out = Vec::new();
        for e in &idems {
            let (fac, basis) = tw.factor(e);
            let pi_f = tw.project_to_factor(&pi_t, e, &basis);
            // embeddings landing in this factor
            let mut in_factor = Vec::new();
            for j in 0..self.roots_teich.len() {
                let diff = tw.sub(&z, &self.root_t(j));
                let d_f = tw.project_to_factor(&diff, e, &basis);
                let (v, _) = pi_val_div(&fac, &pi_f, &d_f, cap);
                if v >= 1 {
                    in_factor.push(j);
                }
            }
            // cross-check: the embeddings in one factor form one residue
            // class of the splitting
            let classes: BTreeSet<usize> = in_factor
                .iter()
                .map(|&j| self.split.residue_class[j])
                .collect();
            if classes.len() > 1 {
                return Err(DisplayError::SolveFails(
                    "factor mixes residue classes".into(),
                ));
            }
            let count = in_factor.iter().filter(|j| s.contains(j)).count();
            let es_f = tw.project_to_factor(&es, e, &basis);
            let (v, _) = pi_val_div(&fac, &pi_f, &es_f, cap);
            out.push((count, v));
        }
        Ok(out)
    }
}

// ---- random strict displays -------------------------------------------

/// Build a random (A,B)-strict display on (O_F (x) W)^n with the regular
/// O_F-action. The Verschiebung matrix is U1 D U2 with random unit
/// matrices U's and D diagonal with Eisenstein-multiplier entries for
/// random sets between A and B, which makes every Frobenius value exactly
/// computable.
pub fn random_strict_raw<R: Rng>(
    sc: &DisplayScenario,
    n: usize,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
    rng: &mut R,
) -> DResult<(RawDisplay, Vec<BTreeSet<usize>>)> {
    let w = &sc.ctx.w;
    let tw = &sc.tw;
    let cs = tw.ctx_store();
    let h = n * sc.deg;
    let rw = w.rank;
    let extra: Vec<usize> = b.difference(a).cloned().collect();
    let mut sets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut s = a.clone();
        for &j in &extra {
            if rng.gen_bool(0.5) {
                s.insert(j);
            }
        }
        sets.push(s);
    }
    let rand_unit_mat = |rng: &mut R| -> AMat {
        loop {
            let m: AMat = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            (0..tw.rank)
                                .map(|_| rng.gen_range(0..cs.modulus))
                                .collect::<Elem>()
                        })
                        .collect()
                })
                .collect();
            if tw.is_unit(&amat_det(tw, &m)) {
                return m;
            }
        }
    };
    let u1 = rand_unit_mat(rng);
    let u2 = rand_unit_mat(rng);
    let diag: Vec<Elem> = sets.iter().map(|s| sc.es_elem(s)).collect();
    let mut dmat = vec![vec![tw.zero(); n]; n];
    for i in 0..n {
        dmat[i][i] = diag[i].clone();
    }
    let gv = amat_mul(tw, &u1, &amat_mul(tw, &dmat, &u2));

    // p Gv^{-1} in closed form: the product over all embeddings is p
    // times a unit, so p / es(S) = es(S^c) u0^{-1} exactly.
    let all: BTreeSet<usize> = (0..sc.roots_teich.len()).collect();
    let t_all = sc.es_elem(&all);
    let u0 = tw.div_pow(&t_all, 1);
    if !tw.is_unit(&u0) {
        return Err(DisplayError::ThetaInvalid(
            "full Eisenstein product is not p times a unit".into(),
        ));
    }
    let u0_inv = tw
        .inverse(&u0)
        .map_err(|_| DisplayError::SolveFails("unit inversion".into()))?;
    let mut pdinv = vec![vec![tw.zero(); n]; n];
    for (i, s) in sets.iter().enumerate() {
        let comp: BTreeSet<usize> = all.difference(s).cloned().collect();
        pdinv[i][i] = tw.mul(&sc.es_elem(&comp), &u0_inv);
    }
    let u1i = amat_inverse(tw, &u1)?;
    let u2i = amat_inverse(tw, &u2)?;
    let pgvinv = amat_mul(tw, &u2i, &amat_mul(tw, &pdinv, &u1i));

    // expand an n x n tensor matrix into an h x h W-matrix
    let expand = |m: &AMat| -> AMat {
        let mut out = vec![wrow_zero(w, h); h];
        for ci in 0..n {
            for cj in 0..n {
                let blk = sc.w_block(&m[ci][cj]);
                for i in 0..sc.deg {
                    for j in 0..sc.deg {
                        out[ci * sc.deg + i][cj * sc.deg + j] = blk[i][j].clone();
                    }
                }
            }
        }
        out
    };
    let pgvinv_w = expand(&pgvinv);
    let mut f_basis = Vec::with_capacity(h);
    for i in 0..h {
        f_basis.push(wrow_map(&sc.ctx, &sc.ctx.sigma, &pgvinv_w[i]));
    }

    // q-generators: y Gv for elementary y, with Fdot(y Gv) = sigma(y)
    let cp = PrimePow::new(w.p, 1);
    let mut cand = Vec::new();
    for c in 0..n {
        for a_ix in 0..sc.deg {
            for t in 0..rw {
                let rho = w.teichmuller(&w.basis_elem(t), sc.split.omega_f as u32);
                let mut y_t = vec![tw.zero(); n];
                let mut ten = tw.zero();
                for s in 0..rw {
                    ten[a_ix * rw + s] = rho[s];
                }
                y_t[c] = ten;
                let r_t: Vec<Elem> = {
                    let mut row = vec![tw.zero(); n];
                    for cj in 0..n {
                        let mut accv = tw.zero();
                        for ck in 0..n {
                            accv = tw.add(&accv, &tw.mul(&y_t[ck], &gv[ck][cj]));
                        }
                        row[cj] = accv;
                    }
                    let mut wr = wrow_zero(w, h);
                    for cj in 0..n {
                        for a2 in 0..sc.deg {
                            wr[cj * sc.deg + a2] = row[cj][a2 * rw..(a2 + 1) * rw].to_vec();
                        }
                    }
                    wr
                };
                let mut fv = wrow_zero(w, h);
                fv[c * sc.deg + a_ix] = sc.ctx.s(&rho);
                cand.push((r_t, fv));
            }
        }
    }
    let rows: Vec<Vec<Elem>> = cand.iter().map(|(r, _)| r.clone()).collect();
    let kept = r_basis_rows(w, &rows, &cp);
    let mut q_gens = Vec::new();
    let mut fdot_q = Vec::new();
    for kr in &kept {
        let pos = rows.iter().position(|r| std::ptr::eq(r, kr) || r == kr).unwrap();
        q_gens.push(cand[pos].0.clone());
        fdot_q.push(cand[pos].1.clone());
    }

    let iota = sc.regular_iota(n);
    let raw = RawDisplay {
        h,
        q_gens,
        fdot_q,
        f_basis,
        iota,
    };
    validate(&sc.ctx, &raw)?;
    sc.check_strict(&raw, a, b)?;
    Ok((raw, sets))
}

// ---- quasi-inverse roundtrip (duality vs modification) -----------------

/// Literal roundtrip check: modifying, dualizing, modifying by the same
/// set again and comparing against the plain dual. Returns the verdict
/// with a witness description on failure.
pub fn verify_412(
    sc: &DisplayScenario,
    raw: &RawDisplay,
    s: &BTreeSet<usize>,
    mc: &PrimePow,
) -> DResult<(bool, String)> {
    let ctx = &sc.ctx;
    let w = &ctx.w;
    let es = sc.es_matrix(&raw.iota, s);
    let d0 = modify_raw(ctx, raw, &es)?;
    let d0v = dualize_raw(ctx, &d0, None)?;
    let es_dual = sc.es_matrix(&d0v.iota, s);
    let d00 = modify_raw(ctx, &d0v, &es_dual)?;
    let dv = dualize_raw(ctx, raw, None)?;

    let qa = q_span(ctx, &d00, mc);
    let qb = q_span(ctx, &dv, mc);
    if !linalg::span_contained(&qa, &qb, mc) || !linalg::span_contained(&qb, &qa, mc) {
        return Ok((false, "roundtrip Hodge filtration differs".into()));
    }
    for (ix, l) in d00.q_gens.iter().enumerate() {
        let lhs = fdot_eval(ctx, &d00, l)?;
        let rhs = fdot_eval(ctx, &dv, l)?;
        if !wrow_eq(w, &lhs, &rhs, mc) {
            return Ok((false, format!("Fdot differs on roundtrip generator {ix}")));
        }
    }
    for i in 0..raw.h {
        if !wrow_eq(w, &d00.f_basis[i], &dv.f_basis[i], mc) {
            return Ok((false, format!("F differs on basis vector {i}")));
        }
    }
    Ok((true, String::new()))
}

// ---- Lubin-Tate displays ----------------------------------------------

/// Lubin-Tate data for a subfield F_0 = fixed field of the conjugation,
/// with theta = e_A * conj(e_A) descended to O_{F0} (x) W, and the
/// resulting display (formal when theta is a J-multiplier, etale when
/// theta itself lies in O_{F0} (x) I).
pub struct LubinTate {
    pub f0_alg: Algebra,
    pub t0w: Algebra,
    pub h_l: usize,
    pub theta: Elem,
    pub etale: bool,
    pub q_gens: AMat,
    pub fdot_q: AMat,
    pub f_basis: AMat,
    /// residues of the F0-basis in R (for the J-functional)
    pub res0: Vec<Elem>,
    /// trace form values tr_{F0/K}(b_a)
    pub tr0: Vec<u128>,
    /// images of the F0-basis inside O_F (x) W
    pub m0_basis: Vec<Elem>,
    /// coordinates of the F0-basis images inside O_F (scalars)
    pub emb0: Vec<Vec<u128>>,
}

impl LubinTate {
    /// J-functional residue: x in W^{h_l} maps to sum res0_a * res(x_a).
    fn j_matrix(&self, ctx: &DispCtx) -> Mat {
        let w = &ctx.w;
        let cp = PrimePow::new(w.p, 1);
        let rw = w.rank;
        let mut m = Mat::zero(0, rw);
        for a in 0..self.h_l {
            for t in 0..rw {
                let val = w.mul(&w.basis_elem(t), &self.res0[a]);
                m.push_row(&flat_row(w, &[val], &cp));
            }
        }
        m
    }

    /// Divided alpha: x with theta * x in O_{F0} (x) I, value the
    /// slice-wise divided Frobenius of theta * x.
    pub fn alphadot(&self, ctx: &DispCtx, x: &[Elem]) -> DResult<Vec<Elem>> {
        let z = self.t0w_mul(ctx, &self.theta, x);
        let mut out = Vec::with_capacity(self.h_l);
        for v in &z {
            if v.iter().any(|&c| c % ctx.w.p as u128 != 0) {
                return Err(DisplayError::ThetaInvalid(
                    "theta * x is not in O_{F0} (x) I".into(),
                ));
            }
            out.push(ctx.sdot(v));
        }
        Ok(out)
    }

    /// alpha-dot(p x) = sigma applied slice-wise to theta * x.
    pub fn alphadot_p(&self, ctx: &DispCtx, x: &[Elem]) -> Vec<Elem> {
        let z = self.t0w_mul(ctx, &self.theta, x);
        z.iter().map(|v| ctx.s(v)).collect()
    }

    /// Multiplication of a W-row (element of O_{F0} (x) W) by a tensor
    /// element.
    pub fn t0w_mul(&self, ctx: &DispCtx, t: &Elem, x: &[Elem]) -> Vec<Elem> {
        let rw = ctx.w.rank;
        let mut xt = self.t0w.zero();
        for a in 0..self.h_l {
            for s in 0..rw {
                xt[a * rw + s] = x[a][s];
            }
        }
        let prod = self.t0w.mul(t, &xt);
        (0..self.h_l).map(|a| prod[a * rw..(a + 1) * rw].to_vec()).collect()
    }

    pub fn as_raw(&self) -> RawDisplay {
        RawDisplay {
            h: self.h_l,
            q_gens: self.q_gens.clone(),
            fdot_q: self.fdot_q.clone(),
            f_basis: self.f_basis.clone(),
            iota: Vec::new(),
        }
    }

    /// Block matrices (over W) of the O_{F0}-action on W^{h_l}.
    pub fn iota0_blocks(&self, ctx: &DispCtx) -> Vec<AMat> {
        let w = &ctx.w;
        let rw = w.rank;
        let mut out = Vec::with_capacity(self.h_l);
        for a in 0..self.h_l {
            let ba = self.t0w.basis_elem(a * rw);
            let mut m = vec![wrow_zero(w, self.h_l); self.h_l];
            for i in 0..self.h_l {
                let prod = self.t0w.mul(&ba, &self.t0w.basis_elem(i * rw));
                for j in 0..self.h_l {
                    m[i][j] = prod[j * rw..(j + 1) * rw].to_vec();
                }
            }
            out.push(m);
        }
        out
    }
}

/// Build the Lubin-Tate display for the degree-f0 unramified subfield of
/// an unramified F, from the embedding set A (paired with its conjugate
/// under the order-2 subfield automorphism).
pub fn lubin_tate(
    sc: &DisplayScenario,
    f0_deg: usize,
    a_set: &BTreeSet<usize>,
) -> DResult<LubinTate> {
    let ctx = &sc.ctx;
    let w = &ctx.w;
    let tw = &sc.tw;
    let cs = tw.ctx_store();
    let cw = w.ctx_work();
    let cp = PrimePow::new(w.p, 1);
    let rw = w.rank;
    if sc.tower.e != 1 {
        return Err(DisplayError::ThetaInvalid(
            "Lubin-Tate descent implemented for unramified F only".into(),
        ));
    }
    let f = sc.tower.f;
    let tower_m = sc.tower.m;
    let f0_tower = make_field_tower(w.p, f0_deg, 1, &[], tower_m)?;
    let f0_alg = f0_tower.alg.at_work_precision(w.m_work);
    let t0w = Algebra::tensor(&f0_alg, w, "OF0(x)W");
    let h_l = f0_deg;
    let cst = sc.tower.ctx_store();
    let emb = eisenstein::embed_subtower(&f0_tower, &sc.tower)?;
    let mut emb0 = Vec::with_capacity(h_l);
    let mut m0_basis = Vec::with_capacity(h_l);
    let mut res0 = Vec::with_capacity(h_l);
    for a in 0..h_l {
        let img = emb.apply(&f0_tower.alg.basis_elem(a), &cst);
        emb0.push(img.clone());
        m0_basis.push(sc.f_alg.tensor_left(&img, w));
        // residue of the image: F unramified, so O_F coordinates are also
        // W coordinates at the residue level
        let mut r = w.zero();
        for i in 0..f {
            r[i] = img[i] % cp.modulus;
        }
        res0.push(w.teichmuller(&r, sc.split.omega_f as u32));
    }

    // theta = e_A * (tau (x) id)(e_A), tau the order-2 automorphism over F0
    let theta_t;
    if a_set.is_empty() {
        theta_t = tw.one.clone();
    } else {
        if f != 2 * f0_deg {
            return Err(DisplayError::ThetaInvalid("subfield index must be 2".into()));
        }
        let tau = tower_automorphism(&sc.tower, f0_deg)?;
        let tau_t = eisenstein::tensor_hom_left(&tau, &sc.f_alg, w);
        let ea = sc.es_elem(a_set);
        theta_t = tw.mul(&ea, &tau_t.apply(&ea, &cs));
        // conjugation invariance
        let back = tau_t.apply(&theta_t, &cs);
        if !theta_t
            .iter()
            .zip(&back)
            .all(|(&x, &y)| x % cw.modulus == y % cw.modulus)
        {
            return Err(DisplayError::ThetaInvalid(
                "theta is not conjugation invariant".into(),
            ));
        }
    }
    // descend to O_{F0} (x) W
    let mut emb_mat = Mat::zero(0, sc.deg * rw);
    for a in 0..h_l {
        for t in 0..rw {
            let elem = tw.mul(&m0_basis[a], &sc.f_alg.tensor_right(&w.basis_elem(t), w));
            let flat: Vec<u128> = (0..sc.deg * rw).map(|i| elem[i] % cs.modulus).collect();
            emb_mat.push_row(&flat);
        }
    }
    let theta_flat: Vec<u128> = (0..sc.deg * rw).map(|i| theta_t[i] % cs.modulus).collect();
    let sol = linalg::solve_left(&emb_mat, &theta_flat, &cs).ok_or_else(|| {
        DisplayError::ThetaInvalid("theta does not descend to the subfield".into())
    })?;
    let mut theta = t0w.zero();
    for a in 0..h_l {
        for t in 0..rw {
            theta[a * rw + t] = sol[a * rw + t];
        }
    }

    let etale = theta.iter().all(|&c| c % w.p as u128 == 0);

    let lt_partial = LubinTate {
        f0_alg: f0_alg.clone(),
        t0w: t0w.clone(),
        h_l,
        theta: theta.clone(),
        etale,
        q_gens: Vec::new(),
        fdot_q: Vec::new(),
        f_basis: Vec::new(),
        res0: res0.clone(),
        tr0: Vec::new(),
        m0_basis: m0_basis.clone(),
        emb0: emb0.clone(),
    };

    // q-generators of J (kernel of the residue functional), or all of P
    // in the etale case
    let (q_gens, fdot_q): (AMat, AMat) = if etale {
        let q: AMat = (0..h_l).map(|i| wrow_std(w, h_l, i)).collect();
        let mut fd = Vec::with_capacity(h_l);
        for g in &q {
            fd.push(lt_partial.alphadot(ctx, g)?);
        }
        (q, fd)
    } else {
        let jm = lt_partial.j_matrix(ctx);
        let ker = linalg::left_kernel(&jm, &cp);
        let cand: Vec<Vec<Elem>> = (0..ker.rows)
            .map(|r| unflat_row(w, &ker.row_vec(r)))
            .filter(|v| v.iter().any(|e| e.iter().any(|&c| c != 0)))
            .collect();
        let q = r_basis_rows(w, &cand, &cp);
        if q.len() != h_l - 1 {
            return Err(DisplayError::ThetaInvalid(format!(
                "J residue rank {} instead of {}",
                q.len(),
                h_l - 1
            )));
        }
        let mut fd = Vec::with_capacity(q.len());
        for g in &q {
            fd.push(lt_partial.alphadot(ctx, g)?);
        }
        (q, fd)
    };
    let mut f_basis = Vec::with_capacity(h_l);
    for i in 0..h_l {
        f_basis.push(lt_partial.alphadot_p(ctx, &wrow_std(w, h_l, i)));
    }
    let mut tr0 = Vec::with_capacity(h_l);
    for a in 0..h_l {
        tr0.push(eisenstein::algebra_trace(&f0_alg, &f0_alg.basis_elem(a)));
    }

    let lt = LubinTate {
        q_gens,
        fdot_q,
        f_basis,
        tr0,
        ..lt_partial
    };
    let raw = lt.as_raw();
    validate(ctx, &raw)?;
    // the alpha-dot images of J must generate over the O_{F0}-action
    let blocks = lt.iota0_blocks(ctx);
    let mut gens = Vec::new();
    for g in &lt.fdot_q {
        for blk in &blocks {
            gens.push(apply_amat(w, g, blk));
        }
        gens.push(g.clone());
    }
    for fb in &lt.f_basis {
        gens.push(fb.clone());
    }
    let mut m = Mat::zero(0, h_l * rw);
    for r in &gens {
        for t in 0..rw {
            m.push_row(&flat_row(w, &wrow_scale(w, &w.basis_elem(t), r), &cw));
        }
    }
    let hf = linalg::howell(&m, &cw);
    if linalg::span_log_size(&hf, &cw) != (h_l * rw) as u64 * cw.k as u64 {
        return Err(DisplayError::GenerationFails);
    }
    Ok(lt)
}

// ---- dagger duals ------------------------------------------------------

/// The dagger dual of a display with O_{F0}-action, with respect to a
/// Lubin-Tate display of the subfield: linear forms P -> O_{F0} (x) W
/// commuting with the subfield action, with the Frobenius solved from
/// (Fdot-dagger l)(Fdot x) = alpha-dot(l(x)).
pub struct DaggerData {
    /// W-basis of the module of O_{F0}-linear forms, as h x h_l matrices
    pub ell_basis: Vec<AMat>,
    /// the dagger display presented in ell-basis coordinates
    pub raw: RawDisplay,
}

pub fn dagger_raw(
    sc: &DisplayScenario,
    raw: &RawDisplay,
    iota0: &[AMat],
    lt: &LubinTate,
) -> DResult<DaggerData> {
    let ctx = &sc.ctx;
    let w = &ctx.w;
    let cs = w.ctx_store();
    let cw = w.ctx_work();
    let cp = PrimePow::new(w.p, 1);
    let h = raw.h;
    let hl = lt.h_l;
    let rw = w.rank;
    let nflat = h * hl * rw;
    let blocks = lt.iota0_blocks(ctx);

    // basis of the Hom-module: flat kernel of the commutation conditions
    let flat_of_mat = |m: &AMat, c: &PrimePow| -> Vec<u128> {
        let mut out = Vec::with_capacity(nflat);
        for row in m {
            for e in row {
                for s in 0..rw {
                    out.push(e[s] % c.modulus);
                }
            }
        }
        out
    };
    let unflat_mat = |v: &[u128]| -> AMat {
        let mut m = Vec::with_capacity(h);
        for i in 0..h {
            let mut row = Vec::with_capacity(hl);
            for j in 0..hl {
                let base = (i * hl + j) * rw;
                row.push(v[base..base + rw].to_vec());
            }
            m.push(row);
        }
        m
    };
    let ker = if hl == 1 {
        Mat::identity(nflat)
    } else {
        let mut cond = Mat::zero(0, nflat * (hl - 1));
        for i in 0..h {
            for j in 0..hl {
                for t in 0..rw {
                    let mut lmat = vec![vec![w.zero(); hl]; h];
                    lmat[i][j] = w.basis_elem(t);
                    let mut row = Vec::with_capacity(nflat * (hl - 1));
                    for a0 in 1..hl {
                        let left = amat_mul(w, &iota0[a0], &lmat);
                        let right = amat_mul(w, &lmat, &blocks[a0]);
                        let diff = amat_sub(w, &left, &right);
                        row.extend(flat_of_mat(&diff, &cs));
                    }
                    cond.push_row(&row);
                }
            }
        }
        linalg::left_kernel(&cond, &cs)
    };
    // extract a W-basis of the kernel module
    let cr = crate::rmod::CoeffRing::over_self(
        &w.clone(),
        h * hl,
        &w.from_int(w.p as i64),
        ctx.f_res as u64,
    );
    let mut span = Mat::zero(0, nflat);
    for r in 0..ker.rows {
        let v = ker.row_vec(r);
        if v.iter().any(|&c| c % cw.modulus != 0) {
            span.push_row(&v.iter().map(|&c| c % cw.modulus).collect::<Vec<_>>());
        }
    }
    let span = cr.r_span(&span);
    let empty = Mat::zero(0, nflat);
    let basis_flat = cr
        .quotient_basis(&span, &empty)
        .ok_or_else(|| DisplayError::SolveFails("Hom module is not free".into()))?;
    if basis_flat.len() != h {
        return Err(DisplayError::SolveFails(format!(
            "Hom module rank {} instead of {}",
            basis_flat.len(),
            h
        )));
    }
    // lift the mod-p^{m} basis back to storage precision through the kernel
    let mut ell_basis: Vec<AMat> = Vec::with_capacity(h);
    for b in &basis_flat {
        let sol = linalg::solve_left(&ker.reduce(&cw), b, &cw)
            .ok_or_else(|| DisplayError::SolveFails("basis lift".into()))?;
        let mut lift = vec![0u128; nflat];
        for (r, &c) in sol.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let kr = ker.row_vec(r);
            for (i, &kv) in kr.iter().enumerate() {
                lift[i] = cs.add(lift[i], cs.mul(c, kv));
            }
        }
        ell_basis.push(unflat_mat(&lift));
    }

    let apply_ell = |x: &[Elem], l: &AMat| -> Vec<Elem> {
        let mut out = vec![w.zero(); hl];
        for i in 0..h {
            for j in 0..hl {
                out[j] = w.add(&out[j], &w.mul(&x[i], &l[i][j]));
            }
        }
        out
    };

    // Q-dagger: forms sending the q-generators into Q_L
    let k = raw.q_gens.len();
    let q_dag: AMat = if lt.etale {
        (0..h).map(|i| wrow_std(w, h, i)).collect()
    } else {
        let jspan = {
            let jm = lt.j_matrix(ctx);
            // span of residues of J inside R^{h_l}: kernel lift rows
            let ker_j = linalg::left_kernel(&jm, &cp);
            linalg::howell(&ker_j, &cp)
        };
        // block diagonal acceptable span over all q-generators
        let blocksz = hl * rw;
        let mut accept = Mat::zero(0, k * blocksz);
        for kk in 0..k {
            for r in 0..jspan.rows {
                let mut row = vec![0u128; k * blocksz];
                let jr = jspan.row_vec(r);
                row[kk * blocksz..(kk + 1) * blocksz].copy_from_slice(&jr);
                accept.push_row(&row);
            }
        }
        let accept = linalg::howell(&accept, &cp);
        let mut map = Mat::zero(0, k * blocksz);
        for s in 0..h {
            for t in 0..rw {
                let lmat = &ell_basis[s];
                let mut row = Vec::with_capacity(k * blocksz);
                for g in &raw.q_gens {
                    let val = apply_ell(g, lmat);
                    let val = val
                        .iter()
                        .map(|v| w.mul(&w.basis_elem(t), v))
                        .collect::<Vec<_>>();
                    row.extend(flat_row(w, &val, &cp));
                }
                map.push_row(&row);
            }
        }
        let pre = linalg::preimage(&map, &accept, &cp);
        let cand: Vec<Vec<Elem>> = (0..pre.rows)
            .map(|r| unflat_row(w, &pre.row_vec(r)))
            .filter(|v| v.iter().any(|e| e.iter().any(|&c| c != 0)))
            .collect();
        r_basis_rows(w, &cand, &cp)
    };

    // solve matrix against the generator images of the source display
    let gmat: Vec<Vec<Elem>> = raw
        .fdot_q
        .iter()
        .cloned()
        .chain(raw.f_basis.iter().cloned())
        .collect();
    let ncols = gmat.len() * hl * rw;
    let mut msolve = Mat::zero(0, ncols);
    for s in 0..h {
        for t in 0..rw {
            let bt = w.basis_elem(t);
            let mut row = Vec::with_capacity(ncols);
            for gj in &gmat {
                let val = apply_ell(gj, &ell_basis[s]);
                let val: Vec<Elem> = val.iter().map(|v| w.mul(&bt, v)).collect();
                row.extend(flat_row(w, &val, &cs));
            }
            msolve.push_row(&row);
        }
    }
    let kers = linalg::left_kernel(&msolve.reduce(&cw), &cw);
    for r in 0..kers.rows {
        if kers.row_vec(r).iter().any(|&c| c % cw.modulus != 0) {
            return Err(DisplayError::SolveFails(
                "dagger Frobenius not unique".into(),
            ));
        }
    }
    let solve = |rhs: &[Vec<Elem>]| -> DResult<Vec<Elem>> {
        let mut flat = Vec::with_capacity(ncols);
        for block in rhs {
            flat.extend(flat_row(w, block, &cs));
        }
        let sol = solve_descending(&msolve, &flat, w.p, w.m_store - 1, w.m_work)
            .ok_or_else(|| DisplayError::SolveFails("dagger Frobenius solve".into()))?;
        Ok(unflat_row(w, &sol))
    };

    let ell_of = |coords: &[Elem]| -> AMat {
        let mut acc = vec![vec![w.zero(); hl]; h];
        for (s, c) in coords.iter().enumerate() {
            if c.iter().all(|&x| x == 0) {
                continue;
            }
            for i in 0..h {
                for j in 0..hl {
                    acc[i][j] = w.add(&acc[i][j], &w.mul(c, &ell_basis[s][i][j]));
                }
            }
        }
        acc
    };

    let mut fdot_dag = Vec::with_capacity(q_dag.len());
    for lc in &q_dag {
        let lmat = ell_of(lc);
        let mut rhs = Vec::with_capacity(gmat.len());
        for g in &raw.q_gens {
            rhs.push(lt.alphadot(ctx, &apply_ell(g, &lmat))?);
        }
        for i in 0..h {
            rhs.push(lt.alphadot_p(ctx, &apply_ell(&wrow_std(w, h, i), &lmat)));
        }
        fdot_dag.push(solve(&rhs)?);
    }
    let mut f_dag = Vec::with_capacity(h);
    for s in 0..h {
        let lmat = &ell_basis[s];
        let mut rhs = Vec::with_capacity(gmat.len());
        for g in &raw.q_gens {
            rhs.push(lt.alphadot_p(ctx, &apply_ell(g, lmat)));
        }
        for i in 0..h {
            let z = apply_ell(&wrow_std(w, h, i), lmat);
            let v = lt.alphadot_p(ctx, &z);
            rhs.push(v.iter().map(|e| w.scalar_mul(w.p as u128, e)).collect());
        }
        f_dag.push(solve(&rhs)?);
    }

    let dag = RawDisplay {
        h,
        q_gens: q_dag,
        fdot_q: fdot_dag,
        f_basis: f_dag,
        iota: Vec::new(),
    };
    Ok(DaggerData {
        ell_basis,
        raw: dag,
    })
}

/// tr composed with a form: coordinates of the W-functional x maps to
/// tr_{F0/K}(l(x)) on the standard basis.
pub fn trace_row(ctx: &DispCtx, lt: &LubinTate, lmat: &AMat) -> Vec<Elem> {
    let w = &ctx.w;
    let h = lmat.len();
    let mut out = Vec::with_capacity(h);
    for i in 0..h {
        let mut acc = w.zero();
        for a in 0..lt.h_l {
            acc = w.add(&acc, &w.scalar_mul(lt.tr0[a], &lmat[i][a]));
        }
        out.push(acc);
    }
    out
}

/// Trace-duality check: (a) tr of the dagger Hodge filtration of the
/// modified display equals the Hodge filtration of the modified hermitian
/// dual; (b) tr intertwines the two divided Frobenii on the dagger
/// Q-generators.
pub fn verify_trace_duality(
    sc: &DisplayScenario,
    raw: &RawDisplay,
    iota0: &[AMat],
    lt: &LubinTate,
    a_set: &BTreeSet<usize>,
    conj: &Vec<Vec<u128>>,
    mc: &PrimePow,
) -> DResult<(bool, String)> {
    let ctx = &sc.ctx;
    let w = &ctx.w;
    let es = sc.es_matrix(&raw.iota, a_set);
    let d0 = modify_raw(ctx, raw, &es)?;
    let dag = dagger_raw(sc, &d0, iota0, lt)?;
    let dv = dualize_raw(ctx, raw, Some(conj))?;
    let es_d = sc.es_matrix(&dv.iota, a_set);
    let d0v = modify_raw(ctx, &dv, &es_d)?;

    let ell_of = |coords: &[Elem]| -> AMat {
        let h = raw.h;
        let hl = lt.h_l;
        let mut acc = vec![vec![w.zero(); hl]; h];
        for (s, c) in coords.iter().enumerate() {
            if c.iter().all(|&x| x == 0) {
                continue;
            }
            for i in 0..h {
                for j in 0..hl {
                    acc[i][j] = w.add(&acc[i][j], &w.mul(c, &dag.ell_basis[s][i][j]));
                }
            }
        }
        acc
    };

    // (a): Howell span equality of the traced dagger filtration and the
    // dual filtration
    let mut lhs_rows: Vec<Vec<Elem>> = Vec::new();
    for lc in &dag.raw.q_gens {
        lhs_rows.push(trace_row(ctx, lt, &ell_of(lc)));
    }
    for lb in &dag.ell_basis {
        lhs_rows.push(wrow_smul(w, w.p as u128, &trace_row(ctx, lt, lb)));
    }
    let mut lhs_span = Mat::zero(0, raw.h * w.rank);
    for r in &lhs_rows {
        for t in 0..w.rank {
            lhs_span.push_row(&flat_row(w, &wrow_scale(w, &w.basis_elem(t), r), mc));
        }
    }
    let lhs_span = linalg::howell(&lhs_span, mc);
    let rhs_span = q_span(ctx, &d0v, mc);
    if !linalg::span_contained(&lhs_span, &rhs_span, mc)
        || !linalg::span_contained(&rhs_span, &lhs_span, mc)
    {
        return Ok((false, "traced dagger filtration differs from dual".into()));
    }

    // (b): tr(Fdot-dagger(l)) = Fdot-dual(tr(l)) on the dagger generators
    for (ix, lc) in dag.raw.q_gens.iter().enumerate() {
        let fd = fdot_eval(ctx, &dag.raw, lc)?;
        let lhs = trace_row(ctx, lt, &ell_of(&fd));
        let tl = trace_row(ctx, lt, &ell_of(lc));
        let rhs = fdot_eval(ctx, &d0v, &tl)?;
        if !wrow_eq(w, &lhs, &rhs, mc) {
            return Ok((false, format!("trace duality fails on generator {ix}")));
        }
    }
    Ok((true, String::new()))
}

// ---- nilpotency --------------------------------------------------------

/// Residue Verschiebung as a mod-p matrix on the flat coordinates of
/// P/pP, with the sigma-twist folded in.
fn residue_v_matrix(ctx: &DispCtx, raw: &RawDisplay) -> DResult<Mat> {
    let w = &ctx.w;
    let cp = PrimePow::new(w.p, 1);
    let h = raw.h;
    let rw = w.rank;
    let k = raw.q_gens.len();
    // express e_i through the Frobenius generators mod p
    let gmat: Vec<Vec<Elem>> = raw
        .fdot_q
        .iter()
        .cloned()
        .chain(raw.f_basis.iter().cloned())
        .collect();
    let mut m = Mat::zero(0, h * rw);
    for g in &gmat {
        for t in 0..rw {
            m.push_row(&flat_row(w, &wrow_scale(w, &w.basis_elem(t), g), &cp));
        }
    }
    let mut vmat = Mat::zero(0, h * rw);
    for i in 0..h {
        for t in 0..rw {
            let target = {
                let e = wrow_scale(w, &w.basis_elem(t), &wrow_std(w, h, i));
                flat_row(w, &e, &cp)
            };
            let sol = linalg::solve_left(&m, &target, &cp).ok_or_else(|| {
                DisplayError::GenerationFails
            })?;
            // V(b_t e_i) = sum_j sigma^{-1}(c_j) x_j, and only the
            // q-generator part survives mod p
            let mut acc = wrow_zero(w, h);
            for j in 0..k {
                let mut c = w.zero();
                for s in 0..rw {
                    c[s] = sol[j * rw + s];
                }
                acc = wrow_add(w, &acc, &wrow_scale(w, &ctx.s_inv(&c), &raw.q_gens[j]));
            }
            vmat.push_row(&flat_row(w, &acc, &cp));
        }
    }
    Ok(vmat)
}

/// Topological nilpotency of V on the residue fibre.
pub fn v_nilpotent(ctx: &DispCtx, raw: &RawDisplay) -> DResult<bool> {
    let w = &ctx.w;
    let cp = PrimePow::new(w.p, 1);
    let vm = residue_v_matrix(ctx, raw)?;
    let n = raw.h * w.rank;
    let mut acc = Mat::identity(n);
    for _ in 0..n {
        acc = acc.mul(&vm, &cp);
        if acc.is_zero(&cp) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Nilpotency in the two-sided sense: V nilpotent on the display and on
/// its dual.
pub fn is_nilpotent(ctx: &DispCtx, raw: &RawDisplay) -> DResult<bool> {
    if !v_nilpotent(ctx, raw)? {
        return Ok(false);
    }
    let mut plain = raw.clone();
    plain.iota = Vec::new();
    let dv = dualize_raw(ctx, &plain, None)?;
    v_nilpotent(ctx, &dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn conj_coords(sc: &DisplayScenario, k: usize) -> Vec<Vec<u128>> {
        let tau = tower_automorphism(&sc.tower, k).unwrap();
        let cs = sc.tower.ctx_store();
        (0..sc.deg)
            .map(|a| tau.apply(&sc.tower.alg.basis_elem(a), &cs))
            .collect()
    }

    #[test]
    fn multiplicative_and_etale_duality() {
        let ctx = DispCtx::new(3, 1, 3, 8).unwrap();
        let w = ctx.w.clone();
        let cw = w.ctx_work();
        let d = Display::new(&ctx, 1, 1, vec![vec![w.one.clone()]], Vec::new())
            .unwrap()
            .to_raw(&ctx);
        validate(&ctx, &d).unwrap();
        let dv = dualize_raw(&ctx, &d, None).unwrap();
        validate(&ctx, &dv).unwrap();
        assert_eq!(dv.dim(), 0);
        assert!(wrow_eq(&w, &dv.fdot_q[0], &[w.one.clone()], &cw));
        assert!(check_dual_pairing(&ctx, &d, &dv, &cw).unwrap());
        assert!(v_nilpotent(&ctx, &d).unwrap());
        assert!(!v_nilpotent(&ctx, &dv).unwrap());
        assert!(!is_nilpotent(&ctx, &d).unwrap());
        assert!(!is_nilpotent(&ctx, &dv).unwrap());
    }

    #[test]
    fn isoclinic_height_two_is_binilpotent() {
        let ctx = DispCtx::new(3, 2, 3, 8).unwrap();
        let w = ctx.w.clone();
        let phi = vec![wrow_std(&w, 2, 1), wrow_std(&w, 2, 0)];
        let d = Display::new(&ctx, 2, 1, phi, Vec::new())
            .unwrap()
            .to_raw(&ctx);
        validate(&ctx, &d).unwrap();
        assert!(v_nilpotent(&ctx, &d).unwrap());
        assert!(is_nilpotent(&ctx, &d).unwrap());
        let etale = Display::new(&ctx, 2, 0, amat_identity(&w, 2), Vec::new())
            .unwrap()
            .to_raw(&ctx);
        assert!(!v_nilpotent(&ctx, &etale).unwrap());
    }

    #[test]
    fn double_dual_is_identity_on_random_displays() {
        let ctx = DispCtx::new(3, 2, 3, 9).unwrap();
        let w = ctx.w.clone();
        let cs = w.ctx_store();
        let cw = w.ctx_work();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for h in 2..=3usize {
            for d in 0..=h {
                let phi = loop {
                    let m: AMat = (0..h)
                        .map(|_| {
                            (0..h)
                                .map(|_| {
                                    (0..w.rank)
                                        .map(|_| rng.gen_range(0..cs.modulus))
                                        .collect::<Elem>()
                                })
                                .collect()
                        })
                        .collect();
                    if w.is_unit(&amat_det(&w, &m)) {
                        break m;
                    }
                };
                let raw = Display::new(&ctx, h, d, phi, Vec::new())
                    .unwrap()
                    .to_raw(&ctx);
                validate(&ctx, &raw).unwrap();
                let dv = dualize_raw(&ctx, &raw, None).unwrap();
                validate(&ctx, &dv).unwrap();
                assert_eq!(dv.dim(), h - d);
                assert!(check_dual_pairing(&ctx, &raw, &dv, &cw).unwrap());
                let ddv = dualize_raw(&ctx, &dv, None).unwrap();
                let qa = q_span(&ctx, &raw, &cw);
                let qb = q_span(&ctx, &ddv, &cw);
                assert!(linalg::span_contained(&qa, &qb, &cw));
                assert!(linalg::span_contained(&qb, &qa, &cw));
                for g in &raw.q_gens {
                    let a = fdot_eval(&ctx, &raw, g).unwrap();
                    let b = fdot_eval(&ctx, &ddv, g).unwrap();
                    assert!(wrow_eq(&w, &a, &b, &cw));
                }
                for i in 0..h {
                    assert!(wrow_eq(&w, &raw.f_basis[i], &ddv.f_basis[i], &cw));
                }
            }
        }
    }

    #[test]
    fn mutated_dual_fails_the_pairing_check() {
        let ctx = DispCtx::new(3, 2, 3, 8).unwrap();
        let w = ctx.w.clone();
        let cw = w.ctx_work();
        let phi = vec![wrow_std(&w, 2, 1), wrow_std(&w, 2, 0)];
        let raw = Display::new(&ctx, 2, 1, phi, Vec::new())
            .unwrap()
            .to_raw(&ctx);
        let mut dv = dualize_raw(&ctx, &raw, None).unwrap();
        dv.fdot_q[0][0][0] = cw.add(dv.fdot_q[0][0][0] % cw.modulus, 1);
        assert!(!check_dual_pairing(&ctx, &raw, &dv, &cw).unwrap());
    }

    #[test]
    fn random_strict_display_over_unramified_quadratic() {
        let sc = DisplayScenario::new(3, 2, 1, &[], 3).unwrap();
        let ctx = &sc.ctx;
        let cw = ctx.w.ctx_work();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: BTreeSet<usize> = [0usize].into_iter().collect();
        let b: BTreeSet<usize> = [0usize, 1].into_iter().collect();
        let (raw, _) = random_strict_raw(&sc, 2, &a, &b, &mut rng).unwrap();
        validate(ctx, &raw).unwrap();
        validate_action(ctx, &raw, &sc.f_alg).unwrap();
        sc.check_strict(&raw, &a, &b).unwrap();

        // S = empty set is the identity modification
        let id = amat_identity(&ctx.w, raw.h);
        let d0 = modify_raw(ctx, &raw, &id).unwrap();
        let qa = q_span(ctx, &raw, &cw);
        let qb = q_span(ctx, &d0, &cw);
        assert!(linalg::span_contained(&qa, &qb, &cw));
        assert!(linalg::span_contained(&qb, &qa, &cw));
        for g in &raw.q_gens {
            let x = fdot_eval(ctx, &raw, g).unwrap();
            let y = fdot_eval(ctx, &d0, g).unwrap();
            assert!(wrow_eq(&ctx.w, &x, &y, &cw));
        }

        // modification by A preserves height and is a display again
        let es = sc.es_matrix(&raw.iota, &a);
        let da = modify_raw(ctx, &raw, &es).unwrap();
        validate(ctx, &da).unwrap();

        // quasi-inverse roundtrip against the plain dual
        let mc = PrimePow::new(3, 2);
        let (ok, wit) = verify_412(&sc, &raw, &a, &mc).unwrap();
        assert!(ok, "{wit}");
    }

    #[test]
    fn factor_valuations_match_embedding_counts() {
        let sc = DisplayScenario::new(3, 2, 1, &[], 3).unwrap();
        let s: BTreeSet<usize> = [0usize].into_iter().collect();
        let vals = sc.factor_valuations(&s).unwrap();
        assert_eq!(vals.len(), 2);
        for (count, v) in vals {
            assert_eq!(count as u32, v);
        }
        let sc2 = DisplayScenario::new(3, 1, 2, &[(0, -3), (2, 1)], 3).unwrap();
        let s2: BTreeSet<usize> = [0usize, 1].into_iter().collect();
        for (count, v) in sc2.factor_valuations(&s2).unwrap() {
            assert_eq!(count as u32, v);
        }
    }

    #[test]
    fn degenerate_lubin_tate_is_multiplicative() {
        let sc = DisplayScenario::new(3, 2, 1, &[], 3).unwrap();
        let lt = lubin_tate(&sc, 1, &BTreeSet::new()).unwrap();
        assert!(!lt.etale);
        assert_eq!(lt.h_l, 1);
        assert!(lt.q_gens.is_empty());
        let cw = sc.ctx.w.ctx_work();
        assert!(wrow_eq(&sc.ctx.w, &lt.f_basis[0], &[sc.ctx.w.one.clone()], &cw));
        assert!(v_nilpotent(&sc.ctx, &lt.as_raw()).unwrap());
    }

    #[test]
    fn trace_duality_etale_case() {
        // F unramified quadratic, F0 = K, Hom = A + conj(A)
        let sc = DisplayScenario::new(3, 2, 1, &[], 3).unwrap();
        let ctx = &sc.ctx;
        let a: BTreeSet<usize> = [0usize].into_iter().collect();
        let lt = lubin_tate(&sc, 1, &a).unwrap();
        assert!(lt.etale);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (raw, _) = random_strict_raw(&sc, 1, &a, &a, &mut rng).unwrap();
        let iota0: Vec<AMat> = lt
            .emb0
            .iter()
            .map(|c| sc.iota_elem(&raw.iota, c))
            .collect();
        let conj = conj_coords(&sc, 1);
        let mc = PrimePow::new(3, 2);
        let (ok, wit) = verify_trace_duality(&sc, &raw, &iota0, &lt, &a, &conj, &mc).unwrap();
        assert!(ok, "{wit}");
        let _ = ctx;
    }

    #[test]
    fn trace_duality_hermitian_case() {
        // F unramified quartic, F0 its quadratic subfield, A one
        // embedding outside {phi0, conj(phi0)}
        let sc = DisplayScenario::new(3, 4, 1, &[], 3).unwrap();
        let cs = sc.tower.ctx_store();
        // identity embedding: fixes zeta
        let j0 = (0..4)
            .position(|j| {
                let cw = sc.tw.ctx_work();
                let _ = &cs;
                sc.split.roots[j]
                    .iter()
                    .zip(&sc.tower.zeta)
                    .all(|(&x, &y)| x % cw.modulus == y % cw.modulus)
            })
            .unwrap();
        let tau = tower_automorphism(&sc.tower, 2).unwrap();
        let perm = crate::tower::embedding_precompose_perm(&sc.tower, &sc.split, &tau).unwrap();
        let j0bar = perm[j0];
        let phi = (0..4).find(|j| *j != j0 && *j != j0bar).unwrap();
        let a: BTreeSet<usize> = [phi].into_iter().collect();
        let b: BTreeSet<usize> = [phi, j0, j0bar].into_iter().collect();
        let lt = lubin_tate(&sc, 2, &a).unwrap();
        assert!(!lt.etale);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (raw, _) = random_strict_raw(&sc, 1, &a, &b, &mut rng).unwrap();
        let iota0: Vec<AMat> = lt
            .emb0
            .iter()
            .map(|c| sc.iota_elem(&raw.iota, c))
            .collect();
        let conj = conj_coords(&sc, 2);
        let mc = PrimePow::new(3, 2);
        let (ok, wit) = verify_trace_duality(&sc, &raw, &iota0, &lt, &a, &conj, &mc).unwrap();
        assert!(ok, "{wit}");
    }
}
