//! Truncated p-typical Witt vectors over finite O-algebras, computed in
//! ghost coordinates on a flat lift. Components are stored with extra
//! precision slack so the exact divisions by p^n in the ghost inversion
//! stay meaningful down to working precision.

use crate::algebra::{AlgHom, Algebra, Elem};
use crate::linalg::{self, Mat};
use crate::rmod::r_elements;
use crate::zp::PrimePow;

/// A Witt vector of fixed length: components in an algebra R.
pub type WittVec = Vec<Elem>;

#[derive(Clone, Debug)]
pub struct WittCtx {
    pub alg: Algebra,
    pub len: usize,
    /// modulus exponent of the flat ghost embedding
    pub m_top: u32,
}

impl WittCtx {
    pub fn new(alg: &Algebra, len: usize) -> WittCtx {
        assert!(len >= 1);
        assert!(
            alg.m_store >= alg.m_work + (len as u32 - 1),
            "insufficient storage slack for ghost arithmetic"
        );
        WittCtx {
            alg: alg.clone(),
            len,
            m_top: alg.m_work + len as u32 - 1,
        }
    }

    pub fn zero(&self) -> WittVec {
        vec![self.alg.zero(); self.len]
    }

    pub fn one(&self) -> WittVec {
        let mut w = self.zero();
        w[0] = self.alg.one.clone();
        w
    }

    pub fn teichmuller(&self, x: &Elem) -> WittVec {
        let mut w = self.zero();
        w[0] = x.clone();
        w
    }

    /// Ghost components g_n = sum_{i<=n} p^i x_i^{p^(n-i)}, at storage
    /// precision.
    pub fn ghost(&self, w: &WittVec) -> Vec<Elem> {
        let a = &self.alg;
        let c = a.ctx_store();
        let p = a.p as u64;
        let mut g = Vec::with_capacity(self.len);
        for n in 0..self.len {
            let mut acc = a.zero();
            for (i, x) in w.iter().enumerate().take(n + 1) {
                let pw = a.pow(x, p.pow((n - i) as u32));
                let scale = c.pow(a.p as u128, i as u128);
                acc = a.add(&acc, &a.scalar_mul(scale, &pw));
            }
            g.push(acc);
        }
        g
    }

    /// Invert the ghost map by successive exact divisions by p^n.
    pub fn unghost(&self, g: &[Elem]) -> WittVec {
        let a = &self.alg;
        let c = a.ctx_store();
        let p = a.p as u64;
        let mut w: WittVec = Vec::with_capacity(g.len());
        for n in 0..g.len() {
            let mut num = g[n].clone();
            for (i, x) in w.iter().enumerate().take(n) {
                let pw = a.pow(x, p.pow((n - i) as u32));
                let scale = c.pow(a.p as u128, i as u128);
                num = a.sub(&num, &a.scalar_mul(scale, &pw));
            }
            let comp: Elem = num.iter().map(|&t| c.div_pow(t, n as u32)).collect();
            w.push(comp);
        }
        w
    }

    pub fn add(&self, x: &WittVec, y: &WittVec) -> WittVec {
        let gx = self.ghost(x);
        let gy = self.ghost(y);
        let g: Vec<Elem> = gx
            .iter()
            .zip(gy.iter())
            .map(|(a, b)| self.alg.add(a, b))
            .collect();
        self.unghost(&g)
    }

    pub fn neg(&self, x: &WittVec) -> WittVec {
        let g: Vec<Elem> = self.ghost(x).iter().map(|a| self.alg.neg(a)).collect();
        self.unghost(&g)
    }

    pub fn sub(&self, x: &WittVec, y: &WittVec) -> WittVec {
        self.add(x, &self.neg(y))
    }

    pub fn mul(&self, x: &WittVec, y: &WittVec) -> WittVec {
        let gx = self.ghost(x);
        let gy = self.ghost(y);
        let g: Vec<Elem> = gx
            .iter()
            .zip(gy.iter())
            .map(|(a, b)| self.alg.mul(a, b))
            .collect();
        self.unghost(&g)
    }

    /// Multiplication by an integer (p included).
    pub fn int_mul(&self, k: i64, x: &WittVec) -> WittVec {
        let kk = self.alg.ctx_store().reduce_i64(k);
        let g: Vec<Elem> = self
            .ghost(x)
            .iter()
            .map(|a| self.alg.scalar_mul(kk, a))
            .collect();
        self.unghost(&g)
    }

    /// Verschiebung: shift components right.
    pub fn versch(&self, x: &WittVec) -> WittVec {
        let mut w = self.zero();
        for i in 0..self.len - 1 {
            w[i + 1] = x[i].clone();
        }
        w
    }

    /// Frobenius with its honest length drop: W_n -> W_{n-1}.
    pub fn frobenius_short(&self, x: &WittVec) -> WittVec {
        let g = self.ghost(x);
        self.unghost(&g[1..])
    }

    /// Frobenius at fixed length; well defined exactly when the component
    /// ring is killed by p (a perfect-residue-field situation), where the
    /// missing top ghost component is determined mod p^len.
    pub fn frobenius(&self, x: &WittVec) -> WittVec {
        assert!(
            self.alg.m_work == 1,
            "fixed-length Frobenius needs a component ring killed by p"
        );
        let a = &self.alg;
        let c = a.ctx_store();
        let p = a.p as u64;
        let mut g = Vec::with_capacity(self.len);
        for n in 1..=self.len {
            let mut acc = a.zero();
            for (i, comp) in x.iter().enumerate().take((n + 1).min(self.len)) {
                let pw = a.pow(comp, p.pow((n - i) as u32));
                let scale = c.pow(a.p as u128, i as u128);
                acc = a.add(&acc, &a.scalar_mul(scale, &pw));
            }
            g.push(acc);
        }
        self.unghost(&g)
    }

    pub fn eq(&self, x: &WittVec, y: &WittVec) -> bool {
        x.iter().zip(y.iter()).all(|(a, b)| self.alg.eq_work(a, b))
    }

    pub fn is_zero(&self, x: &WittVec) -> bool {
        x.iter().all(|a| self.alg.is_zero_work(a))
    }

    /// Apply a componentwise ring map (e.g. a quotient or an
    /// automorphism of R).
    pub fn map(&self, hom: &AlgHom, x: &WittVec) -> WittVec {
        let c = self.alg.ctx_store();
        x.iter().map(|a| hom.apply(a, &c)).collect()
    }

    // ----- flat additive embedding -----

    pub fn flat_ctx(&self) -> PrimePow {
        PrimePow::new(self.alg.p, self.m_top)
    }

    pub fn flat_dim(&self, h: usize) -> usize {
        h * self.len * self.alg.rank
    }

    /// Additive embedding of W_len(R)^h into (Z/p^m_top)^(h len rank):
    /// ghost slot n is scaled by p^(m_top - m_work - n), so that slot n is
    /// faithful mod p^(m_work + n).
    pub fn flatten(&self, v: &[WittVec]) -> Vec<u128> {
        let c = self.flat_ctx();
        let rank = self.alg.rank;
        let mut out = vec![0u128; self.flat_dim(v.len())];
        for (h, w) in v.iter().enumerate() {
            let g = self.ghost(w);
            for n in 0..self.len {
                let scale = c.pow(self.alg.p as u128, (self.m_top - self.alg.m_work) as u128 - n as u128);
                for t in 0..rank {
                    out[(h * self.len + n) * rank + t] = c.mul(scale, g[n][t]);
                }
            }
        }
        out
    }

    /// Recover Witt components from a flat vector in the image subgroup.
    pub fn unflatten(&self, v: &[u128], h: usize) -> Vec<WittVec> {
        let c = self.flat_ctx();
        let rank = self.alg.rank;
        let mut out = Vec::with_capacity(h);
        for hh in 0..h {
            let mut g: Vec<Elem> = Vec::with_capacity(self.len);
            for n in 0..self.len {
                let shift = (self.m_top - self.alg.m_work) as u32 - n as u32;
                let comp: Elem = (0..rank)
                    .map(|t| c.div_pow(v[(hh * self.len + n) * rank + t], shift))
                    .collect();
                g.push(comp);
            }
            out.push(self.unghost(&g));
        }
        out
    }

    /// Howell basis (in flat coordinates) of the W(R)-module generated by
    /// the given vectors of Witt vectors: the Z-span of V^n([x]) g over all
    /// n < len and x in R. Only for small component rings.
    pub fn module_span(&self, gens: &[Vec<WittVec>]) -> Mat {
        let c = self.flat_ctx();
        let elems = r_elements(&self.alg);
        let mut rows = Mat::zero(0, if gens.is_empty() { 0 } else { self.flat_dim(gens[0].len()) });
        for g in gens {
            for x in &elems {
                let mut scalar = self.teichmuller(x);
                for _ in 0..self.len {
                    let prod: Vec<WittVec> = g.iter().map(|w| self.mul(&scalar, w)).collect();
                    rows.push_row(&self.flatten(&prod));
                    scalar = self.versch(&scalar);
                }
            }
        }
        linalg::howell(&rows, &c)
    }

    /// Z-span (flat Howell basis) of a list of module vectors.
    pub fn z_span(&self, gens: &[Vec<WittVec>]) -> Mat {
        let c = self.flat_ctx();
        let mut rows = Mat::zero(0, if gens.is_empty() { 0 } else { self.flat_dim(gens[0].len()) });
        for g in gens {
            rows.push_row(&self.flatten(g));
        }
        linalg::howell(&rows, &c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::store_precision;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_elem(a: &Algebra, rng: &mut ChaCha8Rng) -> Elem {
        (0..a.rank)
            .map(|_| rng.gen_range(0..a.ctx_store().modulus as u64) as u128)
            .collect()
    }

    fn random_witt(c: &WittCtx, rng: &mut ChaCha8Rng) -> WittVec {
        (0..c.len).map(|_| random_elem(&c.alg, rng)).collect()
    }

    #[test]
    fn ghost_unghost_round_trip() {
        let a = Algebra::base(3, 6, store_precision(6));
        let c = WittCtx::new(&a, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let w = random_witt(&c, &mut rng);
            let back = c.unghost(&c.ghost(&w));
            assert!(c.eq(&w, &back));
        }
    }

    #[test]
    fn ring_axioms_via_ghost_over_zp6() {
        let a = Algebra::base(3, 6, store_precision(6));
        let c = WittCtx::new(&a, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = random_witt(&c, &mut rng);
            let y = random_witt(&c, &mut rng);
            let z = random_witt(&c, &mut rng);
            let lhs = c.mul(&x, &c.add(&y, &z));
            let rhs = c.add(&c.mul(&x, &y), &c.mul(&x, &z));
            assert!(c.eq(&lhs, &rhs));
            assert!(c.eq(&c.mul(&x, &c.one()), &x));
            assert!(c.eq(&c.add(&x, &c.neg(&x)), &c.zero()));
        }
    }

    #[test]
    fn witt_identities_over_residue_field() {
        let a = Algebra::unramified(3, 2, 1, store_precision(6));
        let c = WittCtx::new(&a, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let x = random_witt(&c, &mut rng);
            let y = random_witt(&c, &mut rng);
            // sigma o V = p
            let sv = c.frobenius(&c.versch(&x));
            assert!(c.eq(&sv, &c.int_mul(3, &x)));
            // projection formula x V(y) = V(sigma(x) y)
            let lhs = c.mul(&x, &c.versch(&y));
            let rhs = c.versch(&c.mul(&c.frobenius(&x), &y));
            assert!(c.eq(&lhs, &rhs));
            // Teichmuller multiplicativity
            let u = random_elem(&a, &mut rng);
            let v = random_elem(&a, &mut rng);
            let t = c.mul(&c.teichmuller(&u), &c.teichmuller(&v));
            assert!(c.eq(&t, &c.teichmuller(&a.mul(&u, &v))));
        }
    }

    #[test]
    fn fixed_length_frobenius_agrees_with_short_frobenius() {
        let a = Algebra::unramified(3, 2, 1, store_precision(6));
        let c = WittCtx::new(&a, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let x = random_witt(&c, &mut rng);
            let long = c.frobenius(&x);
            let short = c.frobenius_short(&x);
            for i in 0..c.len - 1 {
                assert!(a.eq_work(&long[i], &short[i]));
            }
        }
    }

    #[test]
    fn flatten_is_additive_and_faithful() {
        let a = Algebra::unramified(3, 2, 1, store_precision(6));
        let c = WittCtx::new(&a, 3);
        let fc = c.flat_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let x = random_witt(&c, &mut rng);
            let y = random_witt(&c, &mut rng);
            let fx = c.flatten(&[x.clone()]);
            let fy = c.flatten(&[y.clone()]);
            let fsum: Vec<u128> = fx
                .iter()
                .zip(fy.iter())
                .map(|(&u, &v)| fc.add(u, v))
                .collect();
            assert_eq!(fsum, c.flatten(&[c.add(&x, &y)]));
            // round trip through unflatten
            let back = c.unflatten(&fx, 1);
            assert!(c.eq(&back[0], &x));
        }
    }

    #[test]
    fn module_span_of_unit_vector_is_everything() {
        let a = Algebra::unramified(3, 2, 1, store_precision(6));
        let c = WittCtx::new(&a, 3);
        let span = c.module_span(&[vec![c.one()]]);
        // |W_3(F_9)| = 9^3
        assert_eq!(linalg::span_log_size(&span, &c.flat_ctx()), 6);
        // V W has index q^1
        let vspan = c.module_span(&[vec![c.versch(&c.one())]]);
        assert_eq!(linalg::span_log_size(&vspan, &c.flat_ctx()), 4);
    }
}
