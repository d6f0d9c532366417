//! Finitely generated modules over a finite chain ring R, presented inside
//! a free module T^n for an R-algebra T (typically T = O_F (x) R). All
//! data lives in flat Z/p^k coordinates; module operations go through
//! Howell forms.

use crate::algebra::{Algebra, Elem};
use crate::linalg::{self, Mat};
use crate::zp::PrimePow;

/// A coefficient setting: the ambient algebra T acting on T^n, together
/// with the image of a chain ring R -> T for relative (R-linear) notions.
#[derive(Clone, Debug)]
pub struct CoeffRing {
    pub t: Algebra,
    pub n: usize,
    /// images in T of an O_K-module basis of R
    pub r_basis: Vec<Elem>,
    /// generators of the maximal ideal of R, as elements of T
    pub m_ideal: Vec<Elem>,
    /// log_p |R|
    pub r_log: u64,
    /// log_p of the residue field of R
    pub res_log: u64,
    /// work modulus context for flat coordinates
    pub ctx: PrimePow,
}

impl CoeffRing {
    /// R acting on itself: T = R, r_basis = algebra basis.
    pub fn over_self(r: &Algebra, n: usize, pi: &Elem, res_log: u64) -> CoeffRing {
        let r_basis = (0..r.rank).map(|i| r.basis_elem(i)).collect();
        let mut m_ideal = vec![r.from_int(r.p as i64)];
        if !r.is_zero_work(pi) && !r.is_unit(pi) {
            m_ideal.push(pi.clone());
        }
        CoeffRing {
            t: r.clone(),
            n,
            r_basis,
            m_ideal,
            r_log: r.rank as u64 * r.m_work as u64,
            res_log,
            ctx: r.ctx_work(),
        }
    }

    /// T = A (x) R where the tensor was built as `Algebra::tensor(a, r)`
    /// (index ia * r.rank + ib). R sits as 1 (x) R.
    pub fn tensor_right(t: &Algebra, a: &Algebra, r: &Algebra, n: usize, pi_r: &Elem, res_log: u64) -> CoeffRing {
        assert_eq!(t.rank, a.rank * r.rank);
        let embed = |x: &Elem| -> Elem {
            let mut v = t.zero();
            for (ib, &c) in x.iter().enumerate() {
                // 1 (x) b_ib: a-part index 0
                v[ib] += c;
            }
            let one_a = &a.one;
            let mut w = t.zero();
            for ia in 0..a.rank {
                if one_a[ia] == 0 {
                    continue;
                }
                for ib in 0..r.rank {
                    w[ia * r.rank + ib] =
                        t.ctx_store().add(w[ia * r.rank + ib], t.ctx_store().mul(one_a[ia], x[ib]));
                }
            }
            w
        };
        let r_basis = (0..r.rank).map(|i| embed(&r.basis_elem(i))).collect();
        let mut m_ideal = vec![t.from_int(t.p as i64)];
        if !r.is_zero_work(pi_r) && !r.is_unit(pi_r) {
            m_ideal.push(embed(pi_r));
        }
        CoeffRing {
            t: t.clone(),
            n,
            r_basis,
            m_ideal,
            r_log: r.rank as u64 * r.m_work as u64,
            res_log,
            ctx: t.ctx_work(),
        }
    }

    pub fn zdim(&self) -> usize {
        self.n * self.t.rank
    }

    /// Componentwise multiplication of a module vector by an algebra
    /// element.
    pub fn act(&self, a: &Elem, v: &[u128]) -> Vec<u128> {
        let rk = self.t.rank;
        let mut out = vec![0u128; self.zdim()];
        for c in 0..self.n {
            let comp: Elem = v[c * rk..(c + 1) * rk].to_vec();
            let prod = self.t.mul(&comp, a);
            for (i, &x) in prod.iter().enumerate() {
                out[c * rk + i] = x % self.ctx.modulus;
            }
        }
        out
    }

    /// A T-linear endomorphism given by a matrix (phi_{ij}) in T acting as
    /// (v_1..v_n) |-> (sum_i v_i phi_{i1}, ...).
    pub fn act_matrix(&self, phi: &[Vec<Elem>], v: &[u128]) -> Vec<u128> {
        let rk = self.t.rank;
        let mut out = vec![0u128; self.zdim()];
        for j in 0..self.n {
            let mut acc = self.t.zero();
            for i in 0..self.n {
                let comp: Elem = v[i * rk..(i + 1) * rk].to_vec();
                let prod = self.t.mul(&comp, &phi[i][j]);
                acc = self.t.add(&acc, &prod);
            }
            for (ix, &x) in acc.iter().enumerate() {
                out[j * rk + ix] = x % self.ctx.modulus;
            }
        }
        out
    }

    /// Howell basis of the T-module span of the given Z-generators.
    pub fn t_span(&self, gens: &Mat) -> Mat {
        let mut rows = Mat::zero(0, self.zdim());
        for g in 0..gens.rows {
            let v = gens.row_vec(g);
            for i in 0..self.t.rank {
                rows.push_row(&self.act(&self.t.basis_elem(i), &v));
            }
        }
        linalg::howell(&rows, &self.ctx)
    }

    /// Howell basis of the R-module span.
    pub fn r_span(&self, gens: &Mat) -> Mat {
        let mut rows = Mat::zero(0, self.zdim());
        for g in 0..gens.rows {
            let v = gens.row_vec(g);
            for b in &self.r_basis {
                rows.push_row(&self.act(b, &v));
            }
        }
        linalg::howell(&rows, &self.ctx)
    }

    /// Full ambient module T^n as a Howell basis.
    pub fn full_module(&self) -> Mat {
        Mat::identity(self.zdim())
    }

    pub fn sum(&self, a: &Mat, b: &Mat) -> Mat {
        linalg::howell(&a.clone().vcat(b), &self.ctx)
    }

    /// Stability of span(sub) under multiplication by a.
    pub fn is_stable(&self, sub: &Mat, a: &Elem) -> bool {
        let h = linalg::howell(sub, &self.ctx);
        (0..sub.rows).all(|i| linalg::contains_vector(&h, &self.act(a, &sub.row_vec(i)), &self.ctx))
    }

    /// log_p |M / (F + m_R M)| / res_log: the minimal number of generators
    /// of M/F over R (Nakayama), for F given by Howell rows inside the
    /// module spanned by `ambient` rows.
    pub fn min_generators(&self, ambient: &Mat, f: &Mat) -> u64 {
        let mut rows = f.clone();
        for i in 0..ambient.rows {
            let v = ambient.row_vec(i);
            for m in &self.m_ideal {
                rows.push_row(&self.act(m, &v));
            }
        }
        let big = linalg::howell(&rows, &self.ctx);
        let amb = linalg::howell(ambient, &self.ctx);
        let quo = linalg::span_log_size(&amb, &self.ctx) - linalg::span_log_size(&big, &self.ctx);
        assert!(quo % self.res_log == 0);
        quo / self.res_log
    }

    /// Whether M/F is R-free, and of what rank; M = span(ambient).
    pub fn quotient_free_rank(&self, ambient: &Mat, f: &Mat) -> Option<u64> {
        let amb = self.r_span(ambient);
        let fh = self.r_span(f);
        if !linalg::span_contained(&fh, &amb, &self.ctx) {
            return None;
        }
        let g = self.min_generators(ambient, &fh);
        let quo = linalg::span_log_size(&amb, &self.ctx) - linalg::span_log_size(&fh, &self.ctx);
        if quo == g * self.r_log {
            Some(g)
        } else {
            None
        }
    }

    /// Whether span(f) is an R-module direct summand of span(ambient):
    /// the quotient is free.
    pub fn is_r_summand(&self, ambient: &Mat, f: &Mat) -> bool {
        self.quotient_free_rank(ambient, f).is_some()
    }

    /// Whether span(f) itself is R-free of the given rank.
    pub fn is_r_free(&self, f: &Mat) -> Option<u64> {
        let fh = self.r_span(f);
        let zero = Mat::zero(0, self.zdim());
        let g = self.min_generators(&fh, &zero);
        if linalg::span_log_size(&fh, &self.ctx) == g * self.r_log {
            Some(g)
        } else {
            None
        }
    }

    /// Vectors in span(ambient) whose classes form an R-basis of the free
    /// quotient span(ambient)/span(f). Greedy over the ambient rows, then
    /// over R-multiples if needed.
    pub fn quotient_basis(&self, ambient: &Mat, f: &Mat) -> Option<Vec<Vec<u128>>> {
        let g = self.quotient_free_rank(ambient, f)?;
        let mut rows = f.clone();
        for i in 0..ambient.rows {
            let v = ambient.row_vec(i);
            for m in &self.m_ideal {
                rows.push_row(&self.act(m, &v));
            }
        }
        let mut cur = linalg::howell(&rows, &self.ctx);
        let mut basis = Vec::new();
        'outer: for i in 0..ambient.rows {
            if basis.len() as u64 == g {
                break;
            }
            for b in &self.r_basis {
                let v = self.act(b, &ambient.row_vec(i));
                if !linalg::contains_vector(&cur, &v, &self.ctx) {
                    basis.push(v.clone());
                    let mut nxt = cur;
                    for rb in &self.r_basis {
                        nxt.push_row(&self.act(rb, &v));
                    }
                    cur = linalg::howell(&nxt, &self.ctx);
                    continue 'outer;
                }
            }
        }
        if basis.len() as u64 != g {
            return None;
        }
        // verify: F + R-span(basis) = ambient with sizes adding up
        let mut all = f.clone();
        for b in &basis {
            all.push_row(b);
        }
        let total = self.sum(&self.r_span(&Mat::from_rows(basis.clone(), self.zdim())), &linalg::howell(f, &self.ctx));
        let _ = all;
        let amb = linalg::howell(ambient, &self.ctx);
        if linalg::span_log_size(&total, &self.ctx) != linalg::span_log_size(&amb, &self.ctx)
            || !linalg::span_contained(&total, &amb, &self.ctx)
        {
            return None;
        }
        Some(basis)
    }

    /// R-coordinates of w modulo span(f) with respect to a quotient basis:
    /// returns one coefficient per basis vector, as an element of R
    /// (coordinates along r_basis).
    pub fn quotient_coords(&self, f: &Mat, basis: &[Vec<u128>], w: &[u128]) -> Option<Vec<Vec<u128>>> {
        // solve x * [r_i b_j rows; f rows] = w
        let mut stack = Mat::zero(0, self.zdim());
        for b in basis {
            for r in &self.r_basis {
                stack.push_row(&self.act(r, b));
            }
        }
        let nb = basis.len();
        let nr = self.r_basis.len();
        let stack = stack.vcat(f);
        let x = linalg::solve_left(&stack, w, &self.ctx)?;
        let mut out = Vec::new();
        for j in 0..nb {
            let mut coef = vec![0u128; nr];
            for (i, co) in coef.iter_mut().enumerate() {
                *co = x[j * nr + i];
            }
            out.push(coef);
        }
        Some(out)
    }
}

/// Iterator over all R-submodules of R^big_n that are free direct summands
/// of rank k, in reduced echelon form with unit pivots. `r` is the chain
/// ring; entries are enumerated over all of R. Yields each submodule as a
/// k x (big_n * r.rank) matrix of Z-coordinate rows (one row per R-row).
pub fn enumerate_free_summands(
    r: &Algebra,
    big_n: usize,
    k: usize,
) -> impl Iterator<Item = Mat> + '_ {
    let relems: Vec<Elem> = r_elements(r);
    let pivot_sets = combinations(big_n, k);
    let rk = r.rank;
    pivot_sets.into_iter().flat_map(move |piv| {
        // free positions: (row t, column j) with j > piv[t], j not a pivot
        let mut free: Vec<(usize, usize)> = Vec::new();
        for (t, &jt) in piv.iter().enumerate() {
            for j in (jt + 1)..big_n {
                if !piv.contains(&j) {
                    free.push((t, j));
                }
            }
        }
        let nf = free.len();
        let ne = relems.len();
        let total: u64 = (ne as u64).checked_pow(nf as u32).expect("enumeration fits");
        let piv = piv.clone();
        let free = free.clone();
        let relems = relems.clone();
        (0..total).map(move |code| {
            let mut mat = Mat::zero(k, big_n * rk);
            for (t, &jt) in piv.iter().enumerate() {
                for (i, &c) in r.one.iter().enumerate() {
                    mat[(t, jt * rk + i)] = c % r.ctx_work().modulus;
                }
            }
            let mut c = code;
            for &(t, j) in &free {
                let e = &relems[(c % ne as u64) as usize];
                c /= ne as u64;
                for (i, &x) in e.iter().enumerate() {
                    mat[(t, j * rk + i)] = x;
                }
            }
            mat
        })
    })
}

/// All elements of a finite chain ring algebra at work precision.
pub fn r_elements(r: &Algebra) -> Vec<Elem> {
    let md = r.ctx_work().modulus;
    let mut out = Vec::new();
    let mut cur = vec![0u128; r.rank];
    loop {
        out.push(cur.clone());
        let mut i = 0;
        loop {
            if i == r.rank {
                return out;
            }
            cur[i] += 1;
            if cur[i] < md {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::store_precision;

    fn f9() -> Algebra {
        Algebra::unramified(3, 2, 1, store_precision(1))
    }

    #[test]
    fn summand_enumeration_count_matches_gaussian_binomial() {
        let r = f9();
        // lines in F_9^4: (9^4 - 1)/(9 - 1) = 820
        let cnt = enumerate_free_summands(&r, 4, 1).count();
        assert_eq!(cnt, 820);
        // planes in F_9^4: gaussian binomial [4 choose 2]_9 = 7462
        let cnt2 = enumerate_free_summands(&r, 4, 2).count();
        assert_eq!(cnt2, 7462);
    }

    #[test]
    fn enumerated_summands_are_distinct_and_free() {
        let r = f9();
        let pi = r.zero();
        let cr = CoeffRing::over_self(&r, 2, &pi, 2);
        let mut seen = std::collections::BTreeSet::new();
        for m in enumerate_free_summands(&r, 2, 1) {
            let h = cr.r_span(&m);
            assert_eq!(cr.is_r_free(&m), Some(1));
            assert!(cr.is_r_summand(&cr.full_module(), &h));
            assert!(seen.insert(format!("{:?}", h)));
        }
        assert_eq!(seen.len(), 10); // (81-1)/8
    }

    #[test]
    fn summand_tests_over_a_chain_ring() {
        // R = Z/9: diag(1, 3) span is not a summand of R^2, diag(1, 1) is
        let r = Algebra::base(3, 2, store_precision(2));
        let pi = r.zero();
        let cr = CoeffRing::over_self(&r, 2, &pi, 1);
        let amb = cr.full_module();
        let not_summand = Mat::from_rows(vec![vec![1, 0], vec![0, 3]], 2);
        assert!(!cr.is_r_summand(&amb, &not_summand));
        let summand = Mat::from_rows(vec![vec![1, 2]], 2);
        assert!(cr.is_r_summand(&amb, &linalg::howell(&cr.r_span(&summand), &cr.ctx)));
        // quotient basis for the line case
        let f = cr.r_span(&summand);
        let basis = cr.quotient_basis(&amb, &f).unwrap();
        assert_eq!(basis.len(), 1);
        // coordinates: basis vector itself has coefficient 1
        let coords = cr.quotient_coords(&f, &basis, &basis[0]).unwrap();
        assert_eq!(coords[0], r.one);
    }

    #[test]
    fn tensor_coefficients_respect_the_r_structure() {
        // T = W(F_9)/3 (x) Z/3 realized as F_9 tensor F_3
        let a = Algebra::unramified(3, 2, 1, store_precision(1));
        let b = Algebra::base(3, 1, store_precision(1));
        let t = Algebra::tensor(&a, &b, "F9xF3");
        let pi = b.zero();
        let cr = CoeffRing::tensor_right(&t, &a, &b, 1, &pi, 1);
        // T as an R = F_3 module is free of rank 2
        let amb = cr.full_module();
        assert_eq!(cr.quotient_free_rank(&amb, &Mat::zero(0, cr.zdim())), Some(2));
        // the span of 1 is R-free of rank 1 but not a T-module
        let one_row = Mat::from_rows(vec![t.one.clone()], t.rank);
        let f = cr.r_span(&one_row);
        assert_eq!(cr.is_r_free(&f), Some(1));
        assert!(!cr.is_stable(&f, &t.basis_elem(1)));
    }
}
