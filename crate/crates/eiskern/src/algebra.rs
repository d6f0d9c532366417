//! Finite commutative algebras over O = Z_p, truncated at a working
//! precision m and stored at a higher precision so that flat-lift
//! arithmetic (Witt ghost components, exact divisions) has headroom.
//!
//! An `Algebra` is free as a module over Z/p^m_store with a structure-
//! constant table that is the reduction of a torsion-free O-algebra; the
//! ring the callers reason about is the further quotient modulo
//! p^m_work. Elements are plain coordinate vectors.

use crate::linalg::{self, Mat};
use crate::poly::{self, Poly};
use crate::zp::PrimePow;

pub type Elem = Vec<u128>;

#[derive(Clone, Debug)]
pub struct Algebra {
    pub p: u64,
    pub m_work: u32,
    pub m_store: u32,
    pub rank: usize,
    /// (i * rank + j) * rank + l -> coefficient of b_l in b_i b_j
    pub table: Vec<u128>,
    pub one: Elem,
    pub name: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AlgebraError {
    #[error("element is not a unit")]
    NotUnit,
    #[error("idempotent lifting failed to converge")]
    LiftInsufficient,
    #[error("division failed: {0}")]
    DivisionFails(String),
    #[error("subring is not multiplicatively closed")]
    DescentFails,
}

impl Algebra {
    pub fn ctx_store(&self) -> PrimePow {
        PrimePow::new(self.p, self.m_store)
    }

    pub fn ctx_work(&self) -> PrimePow {
        PrimePow::new(self.p, self.m_work)
    }

    /// The base ring O/p^m_work itself.
    pub fn base(p: u64, m_work: u32, m_store: u32) -> Algebra {
        Algebra {
            p,
            m_work,
            m_store,
            rank: 1,
            table: vec![1],
            one: vec![1],
            name: format!("Z/{p}^{m_work}"),
        }
    }

    pub fn zero(&self) -> Elem {
        vec![0; self.rank]
    }

    pub fn from_int(&self, x: i64) -> Elem {
        let c = self.ctx_store();
        let s = c.reduce_i64(x);
        self.one.iter().map(|&o| c.mul(o, s)).collect()
    }

    pub fn basis_elem(&self, i: usize) -> Elem {
        let mut e = self.zero();
        e[i] = 1;
        e
    }

    pub fn add(&self, x: &Elem, y: &Elem) -> Elem {
        let c = self.ctx_store();
        x.iter().zip(y).map(|(&a, &b)| c.add(a, b)).collect()
    }

    pub fn sub(&self, x: &Elem, y: &Elem) -> Elem {
        let c = self.ctx_store();
        x.iter().zip(y).map(|(&a, &b)| c.sub(a, b)).collect()
    }

    pub fn neg(&self, x: &Elem) -> Elem {
        let c = self.ctx_store();
        x.iter().map(|&a| c.neg(a)).collect()
    }

    pub fn scalar_mul(&self, s: u128, x: &Elem) -> Elem {
        let c = self.ctx_store();
        x.iter().map(|&a| c.mul(a, s)).collect()
    }

    pub fn mul(&self, x: &Elem, y: &Elem) -> Elem {
        let c = self.ctx_store();
        let r = self.rank;
        let mut out = vec![0u128; r];
        for i in 0..r {
            let xi = x[i];
            if xi == 0 {
                continue;
            }
            for j in 0..r {
                let yj = y[j];
                if yj == 0 {
                    continue;
                }
                let s = c.mul(xi, yj);
                if s == 0 {
                    continue;
                }
                let base = (i * r + j) * r;
                for l in 0..r {
                    let t = self.table[base + l];
                    if t != 0 {
                        out[l] = c.add(out[l], c.mul(s, t));
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, x: &Elem, e: u64) -> Elem {
        let mut acc = self.one.clone();
        let mut b = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &b);
            }
            b = self.mul(&b, &b);
            e >>= 1;
        }
        acc
    }

    /// Matrix of multiplication by x: row i = coordinates of b_i * x.
    pub fn mult_mat(&self, x: &Elem) -> Mat {
        let mut m = Mat::zero(self.rank, self.rank);
        for i in 0..self.rank {
            let row = self.mul(&self.basis_elem(i), x);
            for j in 0..self.rank {
                m[(i, j)] = row[j];
            }
        }
        m
    }

    pub fn eq_work(&self, x: &Elem, y: &Elem) -> bool {
        let c = self.ctx_work();
        x.iter().zip(y).all(|(&a, &b)| a % c.modulus == b % c.modulus)
    }

    pub fn is_zero_work(&self, x: &Elem) -> bool {
        let c = self.ctx_work();
        x.iter().all(|&a| a % c.modulus == 0)
    }

    pub fn reduce_work(&self, x: &Elem) -> Elem {
        let c = self.ctx_work();
        x.iter().map(|&a| a % c.modulus).collect()
    }

    /// A unit iff multiplication by x is invertible modulo p.
    pub fn is_unit(&self, x: &Elem) -> bool {
        let cp = PrimePow::new(self.p, 1);
        let m = self.mult_mat(x).reduce(&cp);
        let h = linalg::howell(&m, &cp);
        h.rows == self.rank
    }

    pub fn inverse(&self, x: &Elem) -> Result<Elem, AlgebraError> {
        let c = self.ctx_store();
        let m = self.mult_mat(x);
        linalg::solve_left(&m, &self.one, &c).ok_or(AlgebraError::NotUnit)
    }

    /// Divide y by x (solve u x = y); the quotient may be non-unique when
    /// x is a zero divisor, any solution is returned.
    pub fn divide(&self, y: &Elem, x: &Elem) -> Result<Elem, AlgebraError> {
        let c = self.ctx_store();
        let m = self.mult_mat(x);
        linalg::solve_left(&m, y, &c)
            .ok_or_else(|| AlgebraError::DivisionFails("no exact quotient".into()))
    }

    /// Teichmuller representative: the limit of x^(q^j) for q = p^f_exp.
    /// Converges whenever the residue of x lies in a subfield with q
    /// elements of the residue ring.
    pub fn teichmuller(&self, x: &Elem, f_exp: u32) -> Elem {
        let q = (self.p as u64).pow(f_exp);
        let mut y = x.clone();
        for _ in 0..(self.m_store + 2) {
            y = self.pow(&y, q);
        }
        y
    }

    /// p-adic valuation of an element: min over coordinates.
    pub fn elem_val(&self, x: &Elem) -> u32 {
        let c = self.ctx_store();
        x.iter().map(|&a| c.val(a)).min().unwrap_or(c.k)
    }

    /// Exact division of every coordinate by p^j.
    pub fn div_pow(&self, x: &Elem, j: u32) -> Elem {
        let c = self.ctx_store();
        x.iter().map(|&a| c.div_pow(a, j)).collect()
    }

    // ----- constructions -----

    /// Quotient extension base[x]/(f) for a monic f with coefficients in
    /// the base algebra (constant first). Basis ordering: b_i x^j at index
    /// j * base.rank + i.
    pub fn quotient_extension(base: &Algebra, f: &[Elem], name: &str) -> Algebra {
        let c = base.ctx_store();
        let d = f.len() - 1;
        assert!(d >= 1);
        assert!(base.eq_work(&f[d], &base.one), "extension polynomial must be monic");
        let rank = base.rank * d;
        // powers of x up to 2d-2, as coordinate vectors in the extension
        let mut xpow: Vec<Vec<Elem>> = Vec::new(); // xpow[t][j] = base-coefficient of x^j
        for t in 0..(2 * d - 1) {
            if t < d {
                let mut v = vec![base.zero(); d];
                v[t] = base.one.clone();
                xpow.push(v);
            } else {
                // x^t = x * x^(t-1), then reduce the x^d term via
                // x^d = -(f_0 + ... + f_{d-1} x^{d-1})
                let prev = &xpow[t - 1];
                let mut v = vec![base.zero(); d + 1];
                for j in 0..d {
                    v[j + 1] = prev[j].clone();
                }
                let top = v[d].clone();
                let mut w = vec![base.zero(); d];
                for j in 0..d {
                    w[j] = base.sub(&v[j], &base.mul(&top, &f[j]));
                }
                xpow.push(w);
            }
        }
        let mut table = vec![0u128; rank * rank * rank];
        for j1 in 0..d {
            for i1 in 0..base.rank {
                for j2 in 0..d {
                    for i2 in 0..base.rank {
                        let prod_base = base.mul(&base.basis_elem(i1), &base.basis_elem(i2));
                        let red = &xpow[j1 + j2];
                        let a = j1 * base.rank + i1;
                        let b = j2 * base.rank + i2;
                        for j3 in 0..d {
                            let coef = base.mul(&prod_base, &red[j3]);
                            for i3 in 0..base.rank {
                                table[(a * rank + b) * rank + j3 * base.rank + i3] =
                                    c.reduce(coef[i3]);
                            }
                        }
                    }
                }
            }
        }
        let mut one = vec![0u128; rank];
        for i in 0..base.rank {
            one[i] = base.one[i];
        }
        Algebra {
            p: base.p,
            m_work: base.m_work,
            m_store: base.m_store,
            rank,
            table,
            one,
            name: name.to_string(),
        }
    }

    /// The class of x in a quotient extension built by
    /// `quotient_extension` over this algebra's base.
    pub fn extension_generator(&self, base_rank: usize) -> Elem {
        let mut e = self.zero();
        e[base_rank] = 1; // x^1 * b_0 requires b_0-coefficient of one; see below
        e
    }

    /// Embedding of the base algebra into a quotient extension.
    pub fn embed_base(&self, v: &Elem, base_rank: usize) -> Elem {
        let mut e = self.zero();
        e[..base_rank].copy_from_slice(v);
        e
    }

    /// Unramified extension of degree f over O at the given precisions.
    pub fn unramified(p: u64, f: usize, m_work: u32, m_store: u32) -> Algebra {
        let base = Algebra::base(p, m_work, m_store);
        if f == 1 {
            return base;
        }
        let h = poly::find_irreducible(p, f);
        let coeffs: Vec<Elem> = h.iter().map(|&x| vec![x]).collect();
        Algebra::quotient_extension(&base, &coeffs, &format!("W(F_{p}^{f})"))
    }

    /// Tensor product over O. Basis index: ia * b.rank + ib.
    pub fn tensor(a: &Algebra, b: &Algebra, name: &str) -> Algebra {
        assert_eq!(a.p, b.p);
        assert_eq!(a.m_work, b.m_work);
        assert_eq!(a.m_store, b.m_store);
        let c = a.ctx_store();
        let rank = a.rank * b.rank;
        let mut table = vec![0u128; rank * rank * rank];
        for ia in 0..a.rank {
            for ib in 0..b.rank {
                let i = ia * b.rank + ib;
                for ja in 0..a.rank {
                    for jb in 0..b.rank {
                        let j = ja * b.rank + jb;
                        let base = (i * rank + j) * rank;
                        for la in 0..a.rank {
                            let ta = a.table[(ia * a.rank + ja) * a.rank + la];
                            if ta == 0 {
                                continue;
                            }
                            for lb in 0..b.rank {
                                let tb = b.table[(ib * b.rank + jb) * b.rank + lb];
                                if tb != 0 {
                                    table[base + la * b.rank + lb] = c.mul(ta, tb);
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut one = vec![0u128; rank];
        for ia in 0..a.rank {
            for ib in 0..b.rank {
                one[ia * b.rank + ib] = c.mul(a.one[ia], b.one[ib]);
            }
        }
        Algebra {
            p: a.p,
            m_work: a.m_work,
            m_store: a.m_store,
            rank,
            table,
            one,
            name: name.to_string(),
        }
    }

    /// x tensor 1 inside a tensor product with this layout.
    pub fn tensor_left(&self, x: &Elem, right: &Algebra) -> Elem {
        let c = self.ctx_store();
        let mut out = vec![0u128; self.rank * right.rank];
        for ia in 0..self.rank {
            for ib in 0..right.rank {
                out[ia * right.rank + ib] = c.mul(x[ia], right.one[ib]);
            }
        }
        out
    }

    /// 1 tensor y inside a tensor product with this layout (self = left).
    pub fn tensor_right(&self, y: &Elem, right: &Algebra) -> Elem {
        let c = self.ctx_store();
        let mut out = vec![0u128; self.rank * right.rank];
        for ia in 0..self.rank {
            for ib in 0..right.rank {
                out[ia * right.rank + ib] = c.mul(self.one[ia], y[ib]);
            }
        }
        out
    }

    /// Same algebra truncated to a lower working precision.
    pub fn at_work_precision(&self, m_work: u32) -> Algebra {
        assert!(m_work <= self.m_store);
        let mut a = self.clone();
        a.m_work = m_work;
        a
    }

    // ----- idempotents -----

    /// Primitive idempotents at storage precision. Deterministic order.
    pub fn idempotents(&self) -> Result<Vec<Elem>, AlgebraError> {
        let cp = PrimePow::new(self.p, 1);
        let full = SubAlg {
            basis: linalg::howell(&Mat::identity(self.rank), &cp),
            unit: self.one.iter().map(|&x| x % cp.modulus).collect(),
        };
        let mut atoms = Vec::new();
        self.split_mod_p(full, &mut atoms)?;
        // lift each idempotent from mod p to storage precision
        let c = self.ctx_store();
        let mut out = Vec::new();
        for e0 in atoms {
            let mut e = e0.clone();
            let mut ok = false;
            for _ in 0..(2 * self.m_store + 8) {
                // e <- 3 e^2 - 2 e^3
                let e2 = self.mul(&e, &e);
                let e3 = self.mul(&e2, &e);
                e = self.sub(&self.scalar_mul(3, &e2), &self.scalar_mul(2, &e3));
                let diff = self.sub(&self.mul(&e, &e), &e);
                if diff.iter().all(|&x| x % c.modulus == 0) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return Err(AlgebraError::LiftInsufficient);
            }
            out.push(e);
        }
        // verify orthogonal decomposition of 1
        let mut sum = self.zero();
        for e in &out {
            sum = self.add(&sum, e);
        }
        if !self
            .sub(&sum, &self.one)
            .iter()
            .all(|&x| x % c.modulus == 0)
        {
            return Err(AlgebraError::LiftInsufficient);
        }
        for i in 0..out.len() {
            for j in 0..out.len() {
                if i != j && !self.mul(&out[i], &out[j]).iter().all(|&x| x % c.modulus == 0) {
                    return Err(AlgebraError::LiftInsufficient);
                }
            }
        }
        Ok(out)
    }

    fn split_mod_p(&self, sub: SubAlg, atoms: &mut Vec<Elem>) -> Result<(), AlgebraError> {
        let cp = PrimePow::new(self.p, 1);
        let dim = sub.basis.rows;
        // coordinates of ambient vectors in the subalgebra basis
        let coords = |v: &Elem| -> Vec<u128> {
            linalg::solve_left(&sub.basis, &v.iter().map(|&x| x % cp.modulus).collect::<Vec<_>>(), &cp)
                .expect("vector must lie in subalgebra")
        };
        // Frobenius matrix on the subalgebra
        let mut frob = Mat::zero(dim, dim);
        for i in 0..dim {
            let b = sub.basis.row_vec(i);
            let bp = self.pow(&b, self.p as u64);
            let co = coords(&bp);
            for j in 0..dim {
                frob[(i, j)] = co[j];
            }
        }
        // nilradical = kernel of a high Frobenius power
        let mut fpow = Mat::identity(dim);
        for _ in 0..dim.max(1) {
            fpow = fpow.mul(&frob, &cp);
        }
        let nil = linalg::left_kernel(&fpow, &cp);
        // Berlekamp-style fixed space modulo the nilradical
        let fminus = frob.sub(&Mat::identity(dim), &cp);
        let fixed = linalg::preimage(&fminus, &nil, &cp);
        let n_factors = fixed.rows - nil.rows;
        if n_factors <= 1 {
            atoms.push(sub.unit.clone());
            return Ok(());
        }
        // find a splitting element: fixed mod nil, not scalar
        let unit_coords = coords(&sub.unit);
        let mut scalar_span = nil.clone();
        scalar_span.push_row(&unit_coords);
        let scalar_span = linalg::howell(&scalar_span, &cp);
        let mut splitter: Option<Vec<u128>> = None;
        for i in 0..fixed.rows {
            if !linalg::contains_vector(&scalar_span, fixed.row(i), &cp) {
                splitter = Some(fixed.row_vec(i));
                break;
            }
        }
        let bco = splitter.expect("berlekamp space larger than scalars");
        // ambient element
        let b = Mat::from_rows(vec![bco], dim).mul(&sub.basis, &cp).row_vec(0);
        // minimal polynomial of mult-by-b on the subalgebra (Krylov)
        let mut krylov = Mat::zero(0, dim);
        krylov.push_row(&coords(&sub.unit));
        let mut cur = sub.unit.clone();
        let minpoly: Poly;
        loop {
            cur = self.mul(&cur, &b);
            let co = coords(&self.reduce_mod_p(&cur));
            // is co dependent on previous rows?
            let h = linalg::howell(&krylov, &cp);
            if linalg::contains_vector(&h, &co, &cp) {
                let sol = linalg::solve_left(&krylov, &co, &cp).unwrap();
                let mut mp: Poly = sol.iter().map(|&x| cp.neg(x)).collect();
                mp.push(1);
                minpoly = mp;
                break;
            }
            krylov.push_row(&co);
        }
        // roots of the (split) minimal polynomial
        let mut root = None;
        for cand in 0..self.p as u128 {
            if poly::poly_eval(&minpoly, cand, &cp) == 0 {
                root = Some(cand);
                break;
            }
        }
        let r0 = root.expect("split minimal polynomial has a root in F_p");
        // g = (T - r0)^mult, h = minpoly / g
        let lin = vec![cp.neg(r0), 1];
        let mut g = vec![1u128];
        let mut rest = minpoly.clone();
        loop {
            let (q, r) = poly::poly_divmod(&rest, &lin, &cp);
            if poly::poly_is_zero(&r) {
                g = poly::poly_mul(&g, &lin, &cp);
                rest = q;
            } else {
                break;
            }
        }
        let (d, _u, v) = poly::poly_ext_gcd(&g, &rest, &cp);
        assert_eq!(poly::poly_deg(&d), 0, "primary factors must be coprime");
        // idempotent e = (v * rest)(b), scaled by gcd normalizer
        let vh = poly::poly_scale(&poly::poly_mul(&v, &rest, &cp), cp.inv_unit(d[0]), &cp);
        let mut e = self.zero();
        let mut bpow = sub.unit.clone();
        for (_i, &cf) in vh.iter().enumerate() {
            e = self.add(&e, &self.scalar_mul(cf, &bpow));
            bpow = self.mul(&bpow, &b);
        }
        let e = self.reduce_mod_p(&e);
        // split into e * sub and (1 - e) * sub
        let one_minus_e = self.reduce_mod_p(&self.sub(&sub.unit, &e));
        for idem in [e, one_minus_e] {
            let mut rows = Mat::zero(0, self.rank);
            for i in 0..dim {
                let bi = sub.basis.row_vec(i);
                rows.push_row(&self.reduce_mod_p(&self.mul(&bi, &idem)));
            }
            let basis = linalg::howell(&rows, &cp);
            self.split_mod_p(
                SubAlg {
                    basis,
                    unit: idem,
                },
                atoms,
            )?;
        }
        Ok(())
    }

    fn reduce_mod_p(&self, x: &Elem) -> Elem {
        let p = self.p as u128;
        x.iter().map(|&a| a % p).collect()
    }

    /// The factor algebra e*A for an idempotent e at storage precision.
    /// Returns the factor together with its basis (rows = ambient
    /// coordinates of the factor basis).
    pub fn factor(&self, e: &Elem) -> (Algebra, Mat) {
        let c = self.ctx_store();
        let mut rows = Mat::zero(0, self.rank);
        for i in 0..self.rank {
            rows.push_row(&self.mul(&self.basis_elem(i), e));
        }
        let basis = linalg::howell(&rows, &c);
        // a factor cut out by an idempotent is a direct summand, so the
        // Howell basis has unit pivots
        for &(_, v) in linalg::pivots(&basis, &c).iter() {
            assert_eq!(v, 0, "idempotent factor must be a module summand");
        }
        let rank = basis.rows;
        let coords = |v: &Elem| -> Vec<u128> {
            linalg::solve_left(&basis, v, &c).expect("element of factor")
        };
        let mut table = vec![0u128; rank * rank * rank];
        for i in 0..rank {
            for j in 0..rank {
                let prod = self.mul(&basis.row_vec(i), &basis.row_vec(j));
                let co = coords(&prod);
                for l in 0..rank {
                    table[(i * rank + j) * rank + l] = co[l];
                }
            }
        }
        let one = coords(e);
        (
            Algebra {
                p: self.p,
                m_work: self.m_work,
                m_store: self.m_store,
                rank,
                table,
                one,
                name: format!("{}*e", self.name),
            },
            basis,
        )
    }

    /// Express an ambient element in factor coordinates (after projecting
    /// with the idempotent).
    pub fn project_to_factor(&self, x: &Elem, e: &Elem, basis: &Mat) -> Elem {
        let c = self.ctx_store();
        let xe = self.mul(x, e);
        linalg::solve_left(basis, &xe, &c).expect("projection lies in factor")
    }
}

struct SubAlg {
    basis: Mat,
    unit: Elem,
}

/// A linear map between algebras (rows = images of source basis vectors).
#[derive(Clone, Debug)]
pub struct AlgHom {
    pub mat: Mat,
}

impl AlgHom {
    pub fn apply(&self, x: &Elem, c: &PrimePow) -> Elem {
        Mat::from_rows(vec![x.clone()], self.mat.rows)
            .mul(&self.mat, c)
            .row_vec(0)
    }

    pub fn compose(&self, then: &AlgHom, c: &PrimePow) -> AlgHom {
        AlgHom {
            mat: self.mat.mul(&then.mat, c),
        }
    }

    /// Verify multiplicativity and unitality at working precision.
    pub fn is_hom(&self, src: &Algebra, dst: &Algebra) -> bool {
        let c = src.ctx_store();
        if !dst.eq_work(&self.apply(&src.one, &c), &dst.one) {
            return false;
        }
        for i in 0..src.rank {
            for j in 0..src.rank {
                let lhs = self.apply(&src.mul(&src.basis_elem(i), &src.basis_elem(j)), &c);
                let rhs = dst.mul(
                    &self.apply(&src.basis_elem(i), &c),
                    &self.apply(&src.basis_elem(j), &c),
                );
                if !dst.eq_work(&lhs, &rhs) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unramified_extension_is_a_field_at_residue_level() {
        let a = Algebra::unramified(3, 2, 6, 9);
        assert_eq!(a.rank, 2);
        // every nonzero residue element is a unit
        for x0 in 0..3u128 {
            for x1 in 0..3u128 {
                if x0 == 0 && x1 == 0 {
                    continue;
                }
                assert!(a.is_unit(&vec![x0, x1]));
            }
        }
        // inverse round trip
        let x = vec![2u128, 5u128];
        let xi = a.inverse(&x).unwrap();
        assert!(a.eq_work(&a.mul(&x, &xi), &a.one));
    }

    #[test]
    fn teichmuller_lift_is_a_root_of_unity() {
        let a = Algebra::unramified(3, 2, 6, 9);
        let u = a.basis_elem(1);
        let t = a.teichmuller(&u, 2);
        // t^(q-1) = 1 for q = 9
        let c = a.ctx_store();
        let t8 = a.pow(&t, 8);
        assert!(t8.iter().zip(&a.one).all(|(&x, &y)| x % c.modulus == y % c.modulus));
        // t reduces to u mod p
        assert_eq!(t[0] % 3, u[0] % 3);
        assert_eq!(t[1] % 3, u[1] % 3);
    }

    #[test]
    fn split_tensor_has_idempotents_matching_galois_orbits() {
        // O_F tensor O_F for F unramified quadratic over Q_3 splits into
        // two factors (the two embeddings are individually rational)
        let f = Algebra::unramified(3, 2, 6, 9);
        let t = Algebra::tensor(&f, &f, "F(x)F");
        let es = t.idempotents().unwrap();
        assert_eq!(es.len(), 2);
        let (fac, _) = t.factor(&es[0]);
        assert_eq!(fac.rank, 2);
    }

    #[test]
    fn local_algebra_is_not_split() {
        // Z/3^9[x]/(x^2 - 3) is local: a single idempotent
        let base = Algebra::base(3, 6, 9);
        let eis = vec![base.from_int(-3), base.zero(), base.one.clone()];
        let a = Algebra::quotient_extension(&base, &eis, "Q3(sqrt3)");
        let es = a.idempotents().unwrap();
        assert_eq!(es.len(), 1);
        assert!(a.eq_work(&es[0], &a.one));
        // x is a non-unit non-zero element
        let x = a.basis_elem(1);
        assert!(!a.is_unit(&x));
        assert!(!a.is_zero_work(&x));
    }

    #[test]
    fn dual_numbers_idempotents() {
        // F_9[eps]/(eps^2): local with residue field F_9
        let u = Algebra::unramified(3, 2, 1, 4);
        let eps_sq = vec![u.zero(), u.zero(), u.one.clone()];
        let a = Algebra::quotient_extension(&u, &eps_sq, "F9[eps]");
        let es = a.idempotents().unwrap();
        assert_eq!(es.len(), 1);
    }
}
