//! Local-field towers F/K (K = Q_p) at finite precision: an unramified
//! layer of residue degree f, then a tame Eisenstein layer of degree e.
//! `split` produces a tame splitting closure containing all roots of the
//! characteristic polynomial of the distinguished generator, along with
//! the Galois permutation action on those roots.

use crate::algebra::{AlgHom, Algebra, Elem};
use crate::linalg::{self, Mat};
use crate::poly::{self, Poly};
use crate::zp::PrimePow;

#[derive(Debug, thiserror::Error)]
pub enum TowerError {
    #[error("polynomial does not have the Eisenstein shape: {0}")]
    NotEisenstein(String),
    #[error("distinguished generator does not span the tower")]
    GeneratorFails,
    #[error("wild ramification without seed roots is unsupported")]
    WildUnsupported,
    #[error("roots collide within working precision")]
    RootsCollide,
    #[error("descent check failed: {0}")]
    DescentFails(String),
}

/// Storage slack on top of the working precision, used for flat-lift
/// (ghost) arithmetic downstream.
pub fn store_precision(m: u32) -> u32 {
    m + m.div_ceil(2)
}

#[derive(Clone, Debug)]
pub struct FieldTower {
    pub p: u64,
    pub f: usize,
    pub e: usize,
    pub m: u32,
    /// O_F at storage precision (work precision m).
    pub alg: Algebra,
    /// Rank of the unramified sublayer inside `alg` (basis elements with
    /// x-degree zero occupy the first `f` coordinates).
    pub unram_rank: usize,
    pub mu: Elem,
    pub pi: Elem,
    pub zeta: Elem,
    /// rows = coordinates of zeta^j for j < ef.
    pub zeta_powers: Mat,
    pub char_poly: Poly,
    /// Dense Eisenstein coefficients over O_K (c_0..c_e), empty iff e == 1.
    pub eis_coeffs: Vec<i64>,
}

impl FieldTower {
    pub fn degree(&self) -> usize {
        self.e * self.f
    }

    pub fn ctx_store(&self) -> PrimePow {
        self.alg.ctx_store()
    }

    /// Coefficients of v in the zeta-power basis.
    pub fn zeta_coords(&self, v: &Elem) -> Vec<u128> {
        linalg::solve_left(&self.zeta_powers, v, &self.ctx_store())
            .expect("zeta powers span the tower")
    }
}

pub fn make_field_tower(
    p: u64,
    f: usize,
    e: usize,
    eis: &[(usize, i64)],
    m: u32,
) -> Result<FieldTower, TowerError> {
    assert!(p > 2, "p must be an odd prime");
    assert!(f >= 1 && e >= 1 && m >= 2);
    let m_store = store_precision(m);
    let unram = Algebra::unramified(p, f, m, m_store);
    // validate / densify the Eisenstein polynomial
    let mut coeffs = vec![0i64; if e > 1 { e + 1 } else { 0 }];
    if e > 1 {
        for &(d, c) in eis {
            if d > e {
                return Err(TowerError::NotEisenstein(format!(
                    "coefficient at degree {d} beyond e = {e}"
                )));
            }
            coeffs[d] = c;
        }
        if coeffs[e] != 1 {
            return Err(TowerError::NotEisenstein("not monic".into()));
        }
        let val = |c: i64| -> u32 {
            if c == 0 {
                return u32::MAX;
            }
            let mut c = c.unsigned_abs();
            let mut v = 0;
            while c % p as u64 == 0 {
                c /= p as u64;
                v += 1;
            }
            v
        };
        if val(coeffs[0]) != 1 {
            return Err(TowerError::NotEisenstein(
                "constant term is not pi times a unit".into(),
            ));
        }
        for c in coeffs.iter().take(e).skip(1) {
            if val(*c) == 0 {
                return Err(TowerError::NotEisenstein(
                    "middle coefficient is a unit".into(),
                ));
            }
        }
    } else if !eis.is_empty() {
        return Err(TowerError::NotEisenstein(
            "unramified tower takes no Eisenstein polynomial".into(),
        ));
    }
    let alg = if e > 1 {
        let cs: Vec<Elem> = coeffs.iter().map(|&c| unram.from_int(c)).collect();
        Algebra::quotient_extension(&unram, &cs, &format!("F(p={p},f={f},e={e})"))
    } else {
        unram.clone()
    };
    // mu: Teichmuller representative of the residue-field generator
    let mu = if f == 1 {
        alg.one.clone()
    } else {
        alg.teichmuller(&alg.basis_elem(1), f as u32)
    };
    let pi = if e > 1 {
        alg.basis_elem(unram.rank)
    } else {
        alg.from_int(p as i64)
    };
    let zeta = alg.add(&mu, &pi);
    // spanning check for the zeta-power basis
    let deg = e * f;
    let mut zp = Mat::zero(0, alg.rank);
    let mut cur = alg.one.clone();
    for _ in 0..deg {
        zp.push_row(&cur);
        cur = alg.mul(&cur, &zeta);
    }
    let cw = alg.ctx_work();
    let h = linalg::howell(&zp.reduce(&cw), &cw);
    if h.rows != alg.rank || linalg::pivots(&h, &cw).iter().any(|&(_, v)| v != 0) {
        return Err(TowerError::GeneratorFails);
    }
    let char_poly = poly::charpoly(&alg.mult_mat(&zeta), &alg.ctx_store());
    Ok(FieldTower {
        p,
        f,
        e,
        m,
        alg,
        unram_rank: unram.rank,
        mu,
        pi,
        zeta,
        zeta_powers: zp,
        char_poly,
        eis_coeffs: coeffs,
    })
}

#[derive(Clone, Debug)]
pub struct SplittingData {
    pub omega: Algebra,
    pub pi_omega: Elem,
    /// Rank of the unramified layer of omega.
    pub omega_unram_rank: usize,
    pub omega_f: usize,
    pub roots: Vec<Elem>,
    /// residue class (index into distinct residue roots) of each root
    pub residue_class: Vec<usize>,
    pub autos: Vec<AlgHom>,
    /// autos[i] maps roots[j] to roots[root_perm[i][j]]
    pub root_perm: Vec<Vec<usize>>,
    /// embeddings[j]: O_F -> Omega sending zeta to roots[j]
    pub embeddings: Vec<AlgHom>,
    /// pi-adic valuations of pairwise root differences (precision ledger)
    pub separability_budget: u32,
}

impl SplittingData {
    /// Index of the identity automorphism.
    pub fn identity_auto(&self) -> usize {
        self.root_perm
            .iter()
            .position(|p| p.iter().enumerate().all(|(i, &j)| i == j))
            .expect("identity permutation present")
    }

    /// Stabilizer of a subset of root indices.
    pub fn stabilizer(&self, set: &std::collections::BTreeSet<usize>) -> Vec<usize> {
        (0..self.autos.len())
            .filter(|&a| {
                set.iter().all(|&i| set.contains(&self.root_perm[a][i]))
            })
            .collect()
    }
}

/// pi-adic valuation of an element of a local tower algebra, together with
/// the quotient by that pi-power. Capped at `cap`.
pub fn pi_val_div(alg: &Algebra, pi: &Elem, x: &Elem, cap: u32) -> (u32, Elem) {
    let c = alg.ctx_store();
    let mut cur = x.clone();
    let mut v = 0;
    if cur.iter().all(|&t| t % c.modulus == 0) {
        return (cap, alg.zero());
    }
    let m = alg.mult_mat(pi);
    while v < cap {
        match linalg::solve_left(&m, &cur, &c) {
            Some(q) => {
                // accept only if the quotient re-multiplies exactly (it
                // does, by construction of solve) and is not spurious
                if q.iter().all(|&t| t % c.modulus == 0) {
                    break;
                }
                cur = q;
                v += 1;
            }
            None => break,
        }
    }
    (v, cur)
}

/// Residue coordinates of an element of a tower algebra: the unramified
/// block mod p.
fn residue_vec(x: &Elem, unram_rank: usize, p: u64) -> Vec<u128> {
    x[..unram_rank].iter().map(|&a| a % p as u128).collect()
}

/// Evaluate a scalar polynomial at an algebra element.
fn eval_scalar_poly(alg: &Algebra, f: &Poly, x: &Elem) -> Elem {
    let mut acc = alg.zero();
    for &c in f.iter().rev() {
        acc = alg.mul(&acc, x);
        acc = alg.add(&acc, &alg.scalar_mul(c, &alg.one));
    }
    acc
}

/// Evaluate a polynomial with algebra coefficients.
fn eval_alg_poly(alg: &Algebra, f: &[Elem], x: &Elem) -> Elem {
    let mut acc = alg.zero();
    for c in f.iter().rev() {
        acc = alg.mul(&acc, x);
        acc = alg.add(&acc, c);
    }
    acc
}

/// Roots of a polynomial with scalar (O_K) coefficients in a local tower
/// algebra, via residue enumeration plus tame shifted Hensel lifting.
/// `unram_rank` and `pi` describe the tower structure of `alg`.
fn tower_roots(
    alg: &Algebra,
    unram_rank: usize,
    omega_f: usize,
    pi: &Elem,
    e_omega: usize,
    f_poly: &Poly,
    expected: usize,
) -> Result<(Vec<Elem>, Vec<usize>), TowerError> {
    let c = alg.ctx_store();
    let p = alg.p;
    let mut roots: Vec<Elem> = Vec::new();
    let mut classes: Vec<usize> = Vec::new();
    // enumerate residue-field elements in the unramified block
    let count = (p as u64).pow(omega_f as u32);
    let mut class_id = 0usize;
    for code in 0..count {
        let mut r0 = alg.zero();
        let mut t = code;
        for i in 0..omega_f {
            r0[i] = (t % p as u64) as u128;
            t /= p as u64;
        }
        // evaluate mod p
        let val = eval_scalar_poly(alg, f_poly, &r0);
        if !residue_vec(&val, unram_rank, p).iter().all(|&x| x == 0)
            || !val.iter().all(|&x| x % p as u128 == 0)
        {
            continue;
        }
        // residue root found: Teichmuller starting point
        let tez = alg.teichmuller(&r0, omega_f as u32);
        if e_omega == 1 {
            // simple Hensel on the polynomial itself
            let fd = poly_derivative(f_poly, &c);
            let mut s = tez.clone();
            // seed: any lift with the right residue; Newton needs f'(s) unit
            for _ in 0..(alg.m_store + 2) {
                let fs = eval_scalar_poly(alg, f_poly, &s);
                let fds = eval_scalar_poly(alg, &fd, &s);
                let inv = alg.inverse(&fds).map_err(|_| TowerError::RootsCollide)?;
                s = alg.sub(&s, &alg.mul(&fs, &inv));
            }
            let check = eval_scalar_poly(alg, f_poly, &s);
            if !alg.is_zero_work(&check) {
                return Err(TowerError::RootsCollide);
            }
            roots.push(s);
            classes.push(class_id);
        } else {
            // shifted polynomial G(y) = f(te + pi y), coefficients in alg
            let deg = f_poly.len() - 1;
            // Taylor shift: compute f(te + T) by Horner in (te + T)
            let mut shifted: Vec<Elem> = vec![alg.zero(); deg + 1];
            for &cf in f_poly.iter().rev() {
                // shifted <- shifted * (te + T) + cf
                let mut next = vec![alg.zero(); deg + 1];
                for j in 0..deg {
                    next[j + 1] = shifted[j].clone();
                }
                for j in 0..=deg {
                    let t1 = alg.mul(&shifted[j], &tez);
                    next[j] = alg.add(&next[j], &t1);
                }
                next[0] = alg.add(&next[0], &alg.scalar_mul(cf, &alg.one));
                shifted = next;
            }
            // substitute T = pi y
            let mut pipow = alg.one.clone();
            for coef in shifted.iter_mut() {
                *coef = alg.mul(coef, &pipow);
                pipow = alg.mul(&pipow, pi);
            }
            // divide by the minimal pi-valuation
            let cap = alg.m_store * e_omega as u32;
            let vals: Vec<u32> = shifted
                .iter()
                .map(|x| pi_val_div(alg, pi, x, cap).0)
                .collect();
            let vmin = *vals.iter().min().unwrap();
            let reduced: Vec<Elem> = shifted
                .iter()
                .map(|x| {
                    let mut y = x.clone();
                    for _ in 0..vmin {
                        y = linalg::solve_left(&alg.mult_mat(pi), &y, &c)
                            .expect("exact pi division");
                    }
                    y
                })
                .collect();
            // residue polynomial over the residue field: find simple roots
            let rcount = (p as u64).pow(omega_f as u32);
            for ycode in 0..rcount {
                let mut y0 = alg.zero();
                let mut t = ycode;
                for i in 0..omega_f {
                    y0[i] = (t % p as u64) as u128;
                    t /= p as u64;
                }
                let v = eval_alg_poly(alg, &reduced, &y0);
                let vres_zero = v.iter().all(|&x| x % p as u128 == 0)
                    && pi_val_div(alg, pi, &v, 1).0 >= 1;
                if !vres_zero {
                    continue;
                }
                // Newton on the reduced polynomial (tame: derivative unit)
                let dred = alg_poly_derivative(alg, &reduced);
                let dv = eval_alg_poly(alg, &dred, &y0);
                if !alg.is_unit(&dv) {
                    return Err(TowerError::RootsCollide);
                }
                let mut y = y0.clone();
                for _ in 0..(alg.m_store + 2) {
                    let fy = eval_alg_poly(alg, &reduced, &y);
                    let dy = eval_alg_poly(alg, &dred, &y);
                    let inv = alg.inverse(&dy).map_err(|_| TowerError::RootsCollide)?;
                    y = alg.sub(&y, &alg.mul(&fy, &inv));
                }
                let root = alg.add(&tez, &alg.mul(pi, &y));
                let check = eval_scalar_poly(alg, f_poly, &root);
                if !alg.is_zero_work(&check) {
                    return Err(TowerError::RootsCollide);
                }
                roots.push(root);
                classes.push(class_id);
            }
        }
        class_id += 1;
    }
    if roots.len() != expected {
        return Err(TowerError::WildUnsupported);
    }
    // pairwise separation
    for i in 0..roots.len() {
        for j in 0..i {
            let d = alg.sub(&roots[i], &roots[j]);
            if alg.is_zero_work(&d) {
                return Err(TowerError::RootsCollide);
            }
        }
    }
    Ok((roots, classes))
}

fn poly_derivative(f: &Poly, c: &PrimePow) -> Poly {
    if f.len() <= 1 {
        return vec![0];
    }
    (1..f.len()).map(|i| c.mul(f[i], i as u128)).collect()
}

fn alg_poly_derivative(alg: &Algebra, f: &[Elem]) -> Vec<Elem> {
    if f.len() <= 1 {
        return vec![alg.zero()];
    }
    (1..f.len())
        .map(|i| alg.scalar_mul(i as u128, &f[i]))
        .collect()
}

fn mult_order(p: u64, e: usize) -> usize {
    if e == 1 {
        return 1;
    }
    assert!(p % e as u64 != 0);
    let mut acc = p % e as u64;
    let mut o = 1usize;
    while acc != 1 {
        acc = acc * (p % e as u64) % e as u64;
        o += 1;
    }
    o
}

fn lcm(a: usize, b: usize) -> usize {
    let gcd = |mut x: usize, mut y: usize| {
        while y != 0 {
            let t = x % y;
            x = y;
            y = t;
        }
        x
    };
    a / gcd(a, b) * b
}

pub fn split(tower: &FieldTower) -> Result<SplittingData, TowerError> {
    let p = tower.p;
    if tower.e > 1 && p % tower.e as u64 == 0 {
        return Err(TowerError::WildUnsupported);
    }
    let ord = mult_order(p, tower.e);
    let omega_f = lcm(tower.f, ord);
    let m_store = tower.alg.m_store;
    let omega_ur = Algebra::unramified(p, omega_f, tower.m, m_store);
    let (omega, pi_omega, omega_unram_rank) = if tower.e > 1 {
        let cs: Vec<Elem> = tower.eis_coeffs.iter().map(|&c| omega_ur.from_int(c)).collect();
        let om = Algebra::quotient_extension(&omega_ur, &cs, "Omega");
        let pi = om.basis_elem(omega_ur.rank);
        (om, pi, omega_ur.rank)
    } else {
        let pi = omega_ur.from_int(p as i64);
        (omega_ur.clone(), pi, omega_ur.rank)
    };
    // roots of the characteristic polynomial of zeta
    let (roots, residue_class) = tower_roots(
        &omega,
        omega_unram_rank,
        omega_f,
        &pi_omega,
        tower.e,
        &tower.char_poly,
        tower.degree(),
    )?;
    // separability budget: sum of pi-valuations of pairwise differences
    let cap = omega.m_store * tower.e as u32;
    let mut budget = 0u32;
    for i in 0..roots.len() {
        for j in 0..i {
            let d = omega.sub(&roots[i], &roots[j]);
            budget += pi_val_div(&omega, &pi_omega, &d, cap).0;
        }
    }
    // automorphisms: u |-> root of its defining polynomial, x |-> root of
    // the Eisenstein polynomial
    let h_poly = unram_min_poly(p, omega_f);
    let (u_roots, _) = tower_roots(
        &omega,
        omega_unram_rank,
        omega_f,
        &pi_omega,
        1, // residue-simple
        &h_poly,
        omega_f,
    )?;
    let x_roots: Vec<Elem> = if tower.e > 1 {
        let eis_poly: Poly = tower
            .eis_coeffs
            .iter()
            .map(|&c| omega.ctx_store().reduce_i64(c))
            .collect();
        let (r, _) = tower_roots(
            &omega,
            omega_unram_rank,
            omega_f,
            &pi_omega,
            tower.e,
            &eis_poly,
            tower.e,
        )?;
        r
    } else {
        vec![omega.from_int(p as i64)]
    };
    let cs = omega.ctx_store();
    let mut autos = Vec::new();
    for ur in &u_roots {
        for xr in &x_roots {
            // basis u^i x^j |-> ur^i xr^j
            let mut mat = Mat::zero(omega.rank, omega.rank);
            let e_deg = if tower.e > 1 { tower.e } else { 1 };
            let mut xp = omega.one.clone();
            for j in 0..e_deg {
                let mut up = xp.clone();
                for i in 0..omega_f {
                    let row = j * omega_unram_rank + i;
                    for (col, &v) in up.iter().enumerate() {
                        mat[(row, col)] = v;
                    }
                    up = omega.mul(&up, ur);
                }
                xp = omega.mul(&xp, xr);
            }
            let hom = AlgHom { mat };
            if !hom.is_hom(&omega, &omega) {
                return Err(TowerError::DescentFails(
                    "automorphism candidate is not a ring map".into(),
                ));
            }
            autos.push(hom);
        }
    }
    // permutation action on the roots
    let mut root_perm = Vec::new();
    for a in &autos {
        let mut perm = Vec::new();
        for r in &roots {
            let img = a.apply(r, &cs);
            let pos = roots
                .iter()
                .position(|s| omega.eq_work(s, &img))
                .ok_or(TowerError::DescentFails(
                    "automorphism does not permute the roots".into(),
                ))?;
            perm.push(pos);
        }
        // injectivity
        let mut seen = vec![false; perm.len()];
        for &t in &perm {
            if seen[t] {
                return Err(TowerError::RootsCollide);
            }
            seen[t] = true;
        }
        root_perm.push(perm);
    }
    // embeddings F -> Omega via the zeta-power basis
    let mut embeddings = Vec::new();
    for r in &roots {
        let mut root_pow = Mat::zero(0, omega.rank);
        let mut cur = omega.one.clone();
        for _ in 0..tower.degree() {
            root_pow.push_row(&cur);
            cur = omega.mul(&cur, r);
        }
        // v |-> zeta_coords(v) * root_pow
        let mut mat = Mat::zero(tower.alg.rank, omega.rank);
        for i in 0..tower.alg.rank {
            let co = tower.zeta_coords(&tower.alg.basis_elem(i));
            let img = Mat::from_rows(vec![co], tower.degree()).mul(&root_pow, &cs);
            for jx in 0..omega.rank {
                mat[(i, jx)] = img[(0, jx)];
            }
        }
        let hom = AlgHom { mat };
        if !hom.is_hom(&tower.alg, &omega) {
            return Err(TowerError::DescentFails("embedding is not a ring map".into()));
        }
        embeddings.push(hom);
    }
    Ok(SplittingData {
        omega,
        pi_omega,
        omega_unram_rank,
        omega_f,
        roots,
        residue_class,
        autos,
        root_perm,
        embeddings,
        separability_budget: budget,
    })
}

/// The defining polynomial of the unramified layer (as chosen by
/// `Algebra::unramified`), re-derived deterministically.
fn unram_min_poly(p: u64, f: usize) -> Poly {
    if f == 1 {
        // u = 1 satisfies T - 1
        return vec![PrimePow::new(p, 1).neg(1), 1];
    }
    poly::find_irreducible(p, f)
}

/// Automorphism of the tower itself that raises the Teichmuller layer to
/// the q0 = p^k power and fixes the ramified generator. Requires the
/// Eisenstein coefficients to live in O_K (always true here).
pub fn tower_automorphism(tower: &FieldTower, k: usize) -> Result<AlgHom, TowerError> {
    let alg = &tower.alg;
    let cs = alg.ctx_store();
    // image of u: Hensel root of the defining polynomial with residue u^(p^k)
    let h = unram_min_poly(tower.p, tower.f);
    let seed = alg.pow(&alg.basis_elem(if tower.f > 1 { 1 } else { 0 }),
        (tower.p as u64).pow(k as u32));
    let hd = poly_derivative(&h, &cs);
    let mut s = seed;
    if tower.f > 1 {
        for _ in 0..(alg.m_store + 2) {
            let hs = eval_scalar_poly(alg, &h, &s);
            let hds = eval_scalar_poly(alg, &hd, &s);
            let inv = alg.inverse(&hds).map_err(|_| TowerError::RootsCollide)?;
            s = alg.sub(&s, &alg.mul(&hs, &inv));
        }
    } else {
        s = alg.one.clone();
    }
    let e_deg = if tower.e > 1 { tower.e } else { 1 };
    let mut mat = Mat::zero(alg.rank, alg.rank);
    let mut xp = alg.one.clone();
    for j in 0..e_deg {
        let mut up = xp.clone();
        for i in 0..tower.f {
            let row = j * tower.unram_rank + i;
            for (col, &v) in up.iter().enumerate() {
                mat[(row, col)] = v;
            }
            up = alg.mul(&up, &s);
        }
        if tower.e > 1 {
            xp = alg.mul(&xp, &tower.pi);
        }
    }
    let hom = AlgHom { mat };
    if !hom.is_hom(alg, alg) {
        return Err(TowerError::DescentFails("tower automorphism".into()));
    }
    Ok(hom)
}

/// Permutation of embeddings induced by precomposition with a tower
/// automorphism: embedding j goes to the embedding equal to
/// embeddings[j] after tau.
pub fn embedding_precompose_perm(
    tower: &FieldTower,
    split: &SplittingData,
    tau: &AlgHom,
) -> Result<Vec<usize>, TowerError> {
    let cs = tower.ctx_store();
    let mut perm = Vec::new();
    for j in 0..split.embeddings.len() {
        let composed = tau.compose(&split.embeddings[j], &cs);
        let img = composed.apply(&tower.zeta, &cs);
        let pos = split
            .roots
            .iter()
            .position(|r| split.omega.eq_work(r, &img))
            .ok_or(TowerError::DescentFails("conjugate embedding not found".into()))?;
        perm.push(pos);
    }
    Ok(perm)
}

/// The subring of Omega fixed by a set of automorphisms, as an algebra
/// with its inclusion map.
pub fn fixed_subring(
    split: &SplittingData,
    auto_indices: &[usize],
) -> Result<(Algebra, AlgHom), TowerError> {
    let omega = &split.omega;
    let cs = omega.ctx_store();
    let mut stacked = Mat::zero(0, omega.rank * auto_indices.len());
    for i in 0..omega.rank {
        let mut row = Vec::new();
        for &a in auto_indices {
            let sig = split.autos[a].apply(&omega.basis_elem(i), &cs);
            for j in 0..omega.rank {
                row.push(cs.sub(sig[j], if i == j { 1 } else { 0 }));
            }
        }
        stacked.push_row(&row);
    }
    let basis = linalg::left_kernel(&stacked, &cs);
    // must be a module summand with unit pivots
    if linalg::pivots(&basis, &cs).iter().any(|&(_, v)| v != 0) {
        return Err(TowerError::DescentFails("fixed subring is not a summand".into()));
    }
    let rank = basis.rows;
    // multiplicative closure and table
    let coords = |v: &Elem| -> Option<Vec<u128>> { linalg::solve_left(&basis, v, &cs) };
    let mut table = vec![0u128; rank * rank * rank];
    for i in 0..rank {
        for j in 0..rank {
            let prod = omega.mul(&basis.row_vec(i), &basis.row_vec(j));
            let co = coords(&prod)
                .ok_or(TowerError::DescentFails("fixed set not closed".into()))?;
            for l in 0..rank {
                table[(i * rank + j) * rank + l] = co[l];
            }
        }
    }
    let one = coords(&omega.one)
        .ok_or(TowerError::DescentFails("unit not fixed".into()))?;
    let sub = Algebra {
        p: omega.p,
        m_work: omega.m_work,
        m_store: omega.m_store,
        rank,
        table,
        one,
        name: "fixed subring".into(),
    };
    Ok((sub, AlgHom { mat: basis }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_field_tower() {
        let t = make_field_tower(3, 1, 1, &[], 6).unwrap();
        assert_eq!(t.alg.rank, 1);
        // zeta = 1 + 3
        assert!(t.alg.eq_work(&t.zeta, &t.alg.from_int(4)));
        let s = split(&t).unwrap();
        assert_eq!(s.roots.len(), 1);
        assert_eq!(s.autos.len(), 1);
    }

    #[test]
    fn unramified_quadratic_roots_are_frobenius_conjugates() {
        let t = make_field_tower(3, 2, 1, &[], 6).unwrap();
        let s = split(&t).unwrap();
        assert_eq!(s.roots.len(), 2);
        assert_eq!(s.autos.len(), 2);
        // the two roots are mu-conjugates shifted by p: their difference
        // is a unit (distinct residues)
        let d = s.omega.sub(&s.roots[0], &s.roots[1]);
        assert!(s.omega.is_unit(&d));
        // the nontrivial automorphism swaps them
        let id = s.identity_auto();
        let other = 1 - id;
        assert_eq!(s.root_perm[other], vec![1, 0]);
        // embedding check: root = phi(zeta) and P(root) = 0
        for e in &s.embeddings {
            assert!(e.is_hom(&t.alg, &s.omega));
        }
    }

    #[test]
    fn ramified_quadratic_q3_roots_are_plus_minus_pi() {
        let t = make_field_tower(3, 1, 2, &[(0, -3), (2, 1)], 6).unwrap();
        let s = split(&t).unwrap();
        assert_eq!(s.roots.len(), 2);
        // roots over residue class 0: both reduce to mu = 1; roots are
        // 1 + pi and 1 - pi
        let sum = s.omega.add(&s.roots[0], &s.roots[1]);
        assert!(s.omega.eq_work(&sum, &s.omega.from_int(2)));
        assert_eq!(s.residue_class, vec![0, 0]);
        assert_eq!(s.autos.len(), 2);
    }

    #[test]
    fn tame_cubic_over_q5_has_six_element_splitting_group() {
        let t = make_field_tower(5, 1, 3, &[(0, -5), (3, 1)], 6).unwrap();
        let s = split(&t).unwrap();
        assert_eq!(s.roots.len(), 3);
        // Omega = unramified quadratic (cube roots of unity) + cubic Kummer
        assert_eq!(s.omega_f, 2);
        assert_eq!(s.autos.len(), 6);
    }

    #[test]
    fn wild_tower_is_rejected() {
        let t = make_field_tower(3, 1, 3, &[(0, -3), (3, 1)], 6).unwrap();
        assert!(matches!(split(&t), Err(TowerError::WildUnsupported)));
    }

    #[test]
    fn not_eisenstein_shapes_are_rejected() {
        assert!(matches!(
            make_field_tower(3, 1, 2, &[(0, -1), (2, 1)], 6),
            Err(TowerError::NotEisenstein(_))
        ));
        assert!(matches!(
            make_field_tower(3, 1, 2, &[(0, -9), (2, 1)], 6),
            Err(TowerError::NotEisenstein(_))
        ));
        assert!(matches!(
            make_field_tower(3, 1, 2, &[(0, -3), (1, 1), (2, 1)], 6),
            Err(TowerError::NotEisenstein(_))
        ));
    }

    #[test]
    fn mixed_tower_splits_with_galois_action() {
        // F = Q_9(sqrt(3)): f = 2, e = 2
        let t = make_field_tower(3, 2, 2, &[(0, -3), (2, 1)], 6).unwrap();
        let s = split(&t).unwrap();
        assert_eq!(s.roots.len(), 4);
        assert_eq!(s.autos.len(), 4);
        // four distinct residue/ramified combinations: 2 residue classes
        let max_class = s.residue_class.iter().max().unwrap();
        assert_eq!(*max_class, 1);
    }

    #[test]
    fn unramified_quartic_fixed_subring_is_quadratic() {
        let t = make_field_tower(3, 4, 1, &[], 4).unwrap();
        let s = split(&t).unwrap();
        assert_eq!(s.roots.len(), 4);
        assert_eq!(s.autos.len(), 4);
        // pick the subgroup generated by the square of a generator
        // (order-2 subgroup); its fixed ring has rank 2
        let id = s.identity_auto();
        // find an automorphism of order 4
        let mut gen = None;
        for a in 0..4 {
            let p1 = &s.root_perm[a];
            let mut p2 = vec![0; 4];
            for i in 0..4 {
                p2[i] = p1[p1[i]];
            }
            if p2.iter().enumerate().any(|(i, &j)| i != j) && a != id {
                gen = Some(a);
                break;
            }
        }
        let g = gen.expect("order-4 generator exists");
        let cs = s.omega.ctx_store();
        let g2 = s.autos[g].compose(&s.autos[g], &cs);
        let g2_idx = (0..4)
            .find(|&b| {
                (0..s.omega.rank).all(|i| {
                    s.omega.eq_work(
                        &s.autos[b].apply(&s.omega.basis_elem(i), &cs),
                        &g2.apply(&s.omega.basis_elem(i), &cs),
                    )
                })
            })
            .unwrap();
        let (sub, inc) = fixed_subring(&s, &[id, g2_idx]).unwrap();
        assert_eq!(sub.rank, 2);
        assert!(inc.is_hom(&sub, &s.omega));
    }

    #[test]
    fn conjugation_on_unramified_quadratic_is_an_involution() {
        let t = make_field_tower(3, 2, 1, &[], 6).unwrap();
        let tau = tower_automorphism(&t, 1).unwrap();
        let cs = t.ctx_store();
        let twice = tau.compose(&tau, &cs);
        for i in 0..t.alg.rank {
            let b = t.alg.basis_elem(i);
            assert!(t.alg.eq_work(&twice.apply(&b, &cs), &b));
        }
        // tau moves mu
        assert!(!t.alg.eq_work(&tau.apply(&t.mu, &cs), &t.mu));
    }
}
