//! Dense univariate polynomials with coefficients in Z/p^k, plus the small
//! amount of F_p polynomial arithmetic needed for idempotent splitting.

use crate::linalg::Mat;
use crate::zp::PrimePow;

pub type Poly = Vec<u128>; // coefficient of T^i at index i

pub fn poly_trim(f: &mut Poly) {
    while f.len() > 1 && *f.last().unwrap() == 0 {
        f.pop();
    }
}

pub fn poly_add(f: &Poly, g: &Poly, c: &PrimePow) -> Poly {
    let n = f.len().max(g.len());
    let mut h = vec![0u128; n];
    for i in 0..n {
        let a = f.get(i).copied().unwrap_or(0);
        let b = g.get(i).copied().unwrap_or(0);
        h[i] = c.add(a, b);
    }
    poly_trim(&mut h);
    h
}

pub fn poly_scale(f: &Poly, s: u128, c: &PrimePow) -> Poly {
    let mut h: Poly = f.iter().map(|&x| c.mul(x, s)).collect();
    poly_trim(&mut h);
    h
}

pub fn poly_mul(f: &Poly, g: &Poly, c: &PrimePow) -> Poly {
    let mut h = vec![0u128; f.len() + g.len() - 1];
    for (i, &a) in f.iter().enumerate() {
        if a == 0 {
            continue;
        }
        for (j, &b) in g.iter().enumerate() {
            h[i + j] = c.add(h[i + j], c.mul(a, b));
        }
    }
    poly_trim(&mut h);
    h
}

pub fn poly_eval(f: &Poly, x: u128, c: &PrimePow) -> u128 {
    let mut acc = 0u128;
    for &a in f.iter().rev() {
        acc = c.add(c.mul(acc, x), a);
    }
    acc
}

pub fn poly_deg(f: &Poly) -> usize {
    let mut d = f.len();
    while d > 1 && f[d - 1] == 0 {
        d -= 1;
    }
    d - 1
}

pub fn poly_is_zero(f: &Poly) -> bool {
    f.iter().all(|&x| x == 0)
}

/// Division with remainder by a polynomial with unit leading coefficient.
pub fn poly_divmod(f: &Poly, g: &Poly, c: &PrimePow) -> (Poly, Poly) {
    let dg = poly_deg(g);
    let lead = g[dg];
    assert!(c.val(lead) == 0, "division by non-monic-unit polynomial");
    let inv = c.inv_unit(lead);
    let mut r: Poly = f.iter().map(|&x| x % c.modulus).collect();
    poly_trim(&mut r);
    let mut q = vec![0u128; f.len().saturating_sub(dg).max(1)];
    while !poly_is_zero(&r) && poly_deg(&r) >= dg {
        let dr = poly_deg(&r);
        let coef = c.mul(r[dr], inv);
        q[dr - dg] = c.add(q[dr - dg], coef);
        for i in 0..=dg {
            r[dr - dg + i] = c.sub(r[dr - dg + i], c.mul(coef, g[i]));
        }
        poly_trim(&mut r);
        if poly_deg(&r) == 0 && r[0] == 0 {
            break;
        }
    }
    poly_trim(&mut q);
    (q, r)
}

/// Extended gcd over F_p (the context must have k == 1): returns (g, u, v)
/// with u f + v g0 = g, g monic.
pub fn poly_ext_gcd(f: &Poly, g0: &Poly, c: &PrimePow) -> (Poly, Poly, Poly) {
    assert_eq!(c.k, 1);
    let (mut r0, mut r1) = (f.clone(), g0.clone());
    let (mut s0, mut s1) = (vec![1u128], vec![0u128]);
    let (mut t0, mut t1) = (vec![0u128], vec![1u128]);
    poly_trim(&mut r0);
    poly_trim(&mut r1);
    while !poly_is_zero(&r1) {
        let (q, r) = poly_divmod(&r0, &r1, c);
        let sn = poly_add(&s0, &poly_scale(&poly_mul(&q, &s1, c), c.neg(1), c), c);
        let tn = poly_add(&t0, &poly_scale(&poly_mul(&q, &t1, c), c.neg(1), c), c);
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = sn;
        t0 = t1;
        t1 = tn;
    }
    // normalize to monic
    let lead = r0[poly_deg(&r0)];
    let inv = c.inv_unit(lead);
    (
        poly_scale(&r0, inv, c),
        poly_scale(&s0, inv, c),
        poly_scale(&t0, inv, c),
    )
}

/// Is f irreducible over F_p? Trial division by all monic polynomials of
/// degree at most deg(f)/2. Fine for the tiny degrees used here.
pub fn poly_irreducible_fp(f: &Poly, c: &PrimePow) -> bool {
    assert_eq!(c.k, 1);
    let d = poly_deg(f);
    if d == 0 {
        return false;
    }
    let p = c.p as u128;
    for dd in 1..=d / 2 {
        // enumerate monic polys of degree dd
        let count = p.pow(dd as u32);
        for code in 0..count {
            let mut g = vec![0u128; dd + 1];
            let mut t = code;
            for i in 0..dd {
                g[i] = t % p;
                t /= p;
            }
            g[dd] = 1;
            let (_, r) = poly_divmod(f, &g, c);
            if poly_is_zero(&r) {
                return false;
            }
        }
    }
    true
}

/// First monic irreducible polynomial of degree f over F_p in
/// lexicographic order of the coefficient encoding (deterministic).
pub fn find_irreducible(p: u64, f: usize) -> Poly {
    let c = PrimePow::new(p, 1);
    let pp = p as u128;
    let count = pp.pow(f as u32);
    for code in 0..count {
        let mut g = vec![0u128; f + 1];
        let mut t = code;
        for i in 0..f {
            g[i] = t % pp;
            t /= pp;
        }
        g[f] = 1;
        if poly_irreducible_fp(&g, &c) {
            return g;
        }
    }
    unreachable!("irreducible polynomial of degree {f} over F_{p} exists");
}

/// Characteristic polynomial of a square matrix over Z/p^k, computed by
/// cofactor expansion of det(T I - M) over the polynomial ring (no
/// divisions; exponential in the size, fine for ranks <= 8).
pub fn charpoly(m: &Mat, c: &PrimePow) -> Poly {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    assert!(n <= 12, "charpoly by expansion only for small matrices");
    // entries of T I - M as linear polynomials
    let entry = |i: usize, j: usize| -> Poly {
        if i == j {
            vec![c.neg(m[(i, j)]), 1]
        } else {
            vec![c.neg(m[(i, j)]), 0]
        }
    };
    // determinant by recursion over rows with memoized column subsets
    let mut memo: std::collections::HashMap<u32, Poly> = std::collections::HashMap::new();
    fn det_rec(
        row: usize,
        used: u32,
        n: usize,
        entry: &dyn Fn(usize, usize) -> Poly,
        memo: &mut std::collections::HashMap<u32, Poly>,
        c: &PrimePow,
    ) -> Poly {
        if row == n {
            return vec![1u128];
        }
        if let Some(p) = memo.get(&used) {
            return p.clone();
        }
        let mut acc = vec![0u128];
        let mut sign_flip = 0usize;
        for j in 0..n {
            if used & (1 << j) != 0 {
                continue;
            }
            let e = entry(row, j);
            if !poly_is_zero(&e) {
                let sub = det_rec(row + 1, used | (1 << j), n, entry, memo, c);
                let mut term = poly_mul(&e, &sub, c);
                if sign_flip % 2 == 1 {
                    term = poly_scale(&term, c.neg(1), c);
                }
                acc = poly_add(&acc, &term, c);
            }
            sign_flip += 1;
        }
        memo.insert(used, acc.clone());
        acc
    }
    det_rec(0, 0, n, &entry, &mut memo, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divmod_and_gcd() {
        let c = PrimePow::new(3, 1);
        let f = vec![2, 0, 1]; // T^2 + 2 = (T-1)(T+1) over F_3
        let g = vec![2, 1]; // T + 2 = T - 1
        let (q, r) = poly_divmod(&f, &g, &c);
        assert!(poly_is_zero(&r));
        assert_eq!(q, vec![1, 1]);
        let (d, u, v) = poly_ext_gcd(&f, &vec![1, 1], &c);
        assert_eq!(d, vec![1, 1]);
        let lhs = poly_add(&poly_mul(&u, &f, &c), &poly_mul(&v, &vec![1, 1], &c), &c);
        assert_eq!(lhs, d);
    }

    #[test]
    fn irreducibility_over_f3() {
        let c = PrimePow::new(3, 1);
        assert!(poly_irreducible_fp(&vec![1, 0, 1], &c)); // T^2 + 1
        assert!(!poly_irreducible_fp(&vec![2, 0, 1], &c)); // T^2 - 1
        let h = find_irreducible(3, 2);
        assert!(poly_irreducible_fp(&h, &c));
    }

    #[test]
    fn charpoly_of_companion_matrix() {
        let c = PrimePow::new(3, 4);
        // companion matrix of T^3 - 2T - 5 (mod 81)
        let m = Mat::from_rows(
            vec![vec![0, 1, 0], vec![0, 0, 1], vec![5, 2, 0]],
            3,
        );
        let f = charpoly(&m, &c);
        assert_eq!(f, vec![c.neg(5), c.neg(2), 0, 1]);
    }
}
