//! Batch driver: scenario files in, per-suite verification checks out,
//! with JSON/Markdown reports. Everything below a fixed (scenario, seed)
//! pair is deterministic; wall-clock data lives only in the report meta.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::Algebra;
use crate::btpair::{bt_points, make_pairing, solve_torsion, BtCtx, NilAlgebra, Pt};
use crate::display::{
    amat_identity, check_dual_pairing, dualize_raw, lubin_tate, modify_raw, random_strict_raw,
    validate, validate_action, verify_412, verify_trace_duality, DisplayScenario,
};
use crate::eisenstein::{
    check_strict, eisenstein_ideal, modify_filtration, EisensteinError, EmbeddingSet,
    ModifyDirection, Setting, StrictFiltration, Strictness, TestRing,
};
use crate::latmodel::{
    compare_models, dual_lattice, enumerate_model, enumerate_model_reversed, AMat, Flavor, Lattice,
    LatticeChain, ModelCtx, UnitaryData,
};
use crate::linalg::Mat;
use crate::orbital::{
    act, closed_form_n1, derived_orbital, fmat_det, fmat_mul, orbital_integral, p_pow,
    smallest_nonresidue, transfer_factor, val_det, FMat, Fx, Rq, SymDatum, TestFn,
};
use crate::rmod::enumerate_free_summands;
use crate::tower::{make_field_tower, split, store_precision, tower_automorphism};
use crate::witt::WittCtx;
use crate::zp::PrimePow;

pub const KNOWN_SUITES: &[&str] = &[
    "eisenstein",
    "modification",
    "latmodel",
    "witt",
    "display",
    "btpair",
    "orbital",
];

fn d_one() -> usize {
    1
}
fn d_precision() -> u32 {
    6
}
fn d_witt_length() -> usize {
    3
}
fn d_cap() -> u64 {
    1_000_000
}
fn d_filtration() -> usize {
    500
}
fn d_witt_samples() -> usize {
    1000
}
fn d_display_samples() -> usize {
    50
}
fn d_mutation() -> usize {
    100
}
fn d_torsion() -> usize {
    100
}
fn d_covariance() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub p: u64,
    /// residue degree of the tower
    pub f: usize,
    /// ramification degree of the tower
    pub e: usize,
    /// extra Eisenstein coefficients for ramified towers, (degree, coeff)
    #[serde(default)]
    pub poly: Vec<(usize, i64)>,
    /// embedding subsets driving strictness and modification
    #[serde(default)]
    pub a: Vec<usize>,
    #[serde(default)]
    pub b: Vec<usize>,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default = "d_one")]
    pub n: usize,
    #[serde(default = "d_precision")]
    pub precision: u32,
    #[serde(default = "d_witt_length")]
    pub witt_length: usize,
    pub suites: Vec<String>,
    #[serde(default = "d_cap")]
    pub cap: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_filtration")]
    pub filtration_samples: usize,
    #[serde(default = "d_witt_samples")]
    pub witt_samples: usize,
    #[serde(default = "d_display_samples")]
    pub display_samples: usize,
    #[serde(default = "d_mutation")]
    pub mutation_samples: usize,
    #[serde(default = "d_torsion")]
    pub torsion_samples: usize,
    #[serde(default = "d_covariance")]
    pub covariance_samples: usize,
    /// deliberately corrupt one display matrix before checking (harness demo)
    #[serde(default)]
    pub tamper: bool,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Scenario, String> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| e.to_string())?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), String> {
        let deg = self.f * self.e;
        if self.p < 2 || (2..self.p).any(|d| self.p % d == 0) {
            return Err(format!("p = {} is not prime", self.p));
        }
        if self.f == 0 || self.e == 0 || deg == 0 {
            return Err("tower degrees must be positive".into());
        }
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        if self.cap == 0 {
            return Err("cap must be positive".into());
        }
        if self.precision == 0 || self.witt_length < 2 {
            return Err("precision must be positive and witt_length at least 2".into());
        }
        for set in [&self.a, &self.b, &self.s] {
            if set.iter().any(|&j| j >= deg) {
                return Err(format!("embedding index out of range 0..{deg}"));
            }
        }
        let a: BTreeSet<usize> = self.a.iter().cloned().collect();
        let b: BTreeSet<usize> = self.b_set();
        if !a.is_subset(&b) {
            return Err("A must be contained in B".into());
        }
        for s in &self.suites {
            if !KNOWN_SUITES.contains(&s.as_str()) {
                return Err(format!("unknown suite \"{s}\""));
            }
        }
        Ok(())
    }

    fn a_set(&self) -> BTreeSet<usize> {
        self.a.iter().cloned().collect()
    }

    /// B defaults to the full embedding set.
    fn b_set(&self) -> BTreeSet<usize> {
        if self.b.is_empty() {
            (0..self.f * self.e).collect()
        } else {
            self.b.iter().cloned().collect()
        }
    }

    fn s_set(&self) -> BTreeSet<usize> {
        if self.s.is_empty() {
            self.a_set()
        } else {
            self.s.iter().cloned().collect()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

pub fn pass(name: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: "pass".into(),
        witness: None,
        reason: None,
    }
}

pub fn fail(name: &str, witness: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: "fail".into(),
        witness: Some(witness),
        reason: None,
    }
}

pub fn skipped(name: &str, reason: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: "skipped".into(),
        witness: None,
        reason: Some(reason),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBody {
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

impl ReportBody {
    fn tally(scenario: &str, seed: u64, checks: Vec<CheckResult>) -> ReportBody {
        let passed = checks.iter().filter(|c| c.status == "pass").count();
        let failed = checks.iter().filter(|c| c.status == "fail").count();
        let skip = checks.iter().filter(|c| c.status == "skipped").count();
        ReportBody {
            scenario: scenario.into(),
            seed,
            checks,
            passed,
            failed,
            skipped: skip,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub timestamp_unix_ms: u128,
    pub elapsed_ms: Vec<(String, u128)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub bodies: Vec<ReportBody>,
    pub meta: ReportMeta,
}

impl Report {
    /// Deterministic part only: identical scenarios and seed give
    /// byte-identical output.
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.bodies).expect("report serialization")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for b in &self.bodies {
            let _ = writeln!(out, "## {}\n", b.scenario);
            let _ = writeln!(
                out,
                "seed {} — {} passed, {} failed, {} skipped\n",
                b.seed, b.passed, b.failed, b.skipped
            );
            let _ = writeln!(out, "| check | status | detail |");
            let _ = writeln!(out, "|---|---|---|");
            for c in &b.checks {
                let detail = c
                    .witness
                    .as_deref()
                    .or(c.reason.as_deref())
                    .unwrap_or("")
                    .replace('\n', " ")
                    .replace('|', "\\|");
                let _ = writeln!(out, "| {} | {} | {} |", c.name, c.status, detail);
            }
            out.push('\n');
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.bodies.iter().all(|b| b.failed == 0)
    }
}

fn suite_rng(seed: u64, suite: &str) -> ChaCha8Rng {
    // stable per-suite stream, independent of suite execution order
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in suite.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Run every requested suite of one scenario. Deterministic.
pub fn run_scenario(scn: &Scenario) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    for suite in &scn.suites {
        let mut rng = suite_rng(scn.seed, suite);
        let mut batch = match suite.as_str() {
            "eisenstein" => suite_eisenstein(scn, &mut rng),
            "modification" => suite_modification(scn),
            "latmodel" => suite_latmodel(scn),
            "witt" => suite_witt(scn, &mut rng),
            "display" => suite_display(scn, &mut rng),
            "btpair" => suite_btpair(scn, &mut rng),
            "orbital" => suite_orbital(scn, &mut rng),
            _ => vec![skipped(suite, "unknown suite".into())],
        };
        checks.append(&mut batch);
    }
    checks
}

// ---- eisenstein suite -----------------------------------------------------

fn eis_setting(scn: &Scenario) -> Result<Setting, String> {
    let t = make_field_tower(scn.p, scn.f, scn.e, &scn.poly, scn.precision + 2)
        .map_err(|e| format!("tower: {e:?}"))?;
    let s = split(&t).map_err(|e| format!("splitting: {e:?}"))?;
    let ring = TestRing::precision(&s, scn.precision);
    Ok(Setting::new(t, s, ring))
}

fn suite_eisenstein(scn: &Scenario, rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let st = match eis_setting(scn) {
        Ok(st) => st,
        Err(e) => return vec![fail("eisenstein-setup", e)],
    };
    let deg = st.split.roots.len();
    let mut checks = Vec::new();

    // ideal certificates and annihilation over every embedding subset
    let mut cert_fail = None;
    let mut ann_fail = None;
    for mask in 0u32..(1 << deg) {
        let idx: Vec<usize> = (0..deg).filter(|j| mask >> j & 1 == 1).collect();
        let a = EmbeddingSet::new(&st.split, &idx);
        let comp = a.complement(&st.split);
        if let Err(e) = eisenstein_ideal(&st, &a) {
            cert_fail.get_or_insert(format!("A = {idx:?}: {e}"));
        }
        let prod = st.tensor.mul(&st.eis_elem(&a), &st.eis_elem(&comp));
        if !st.tensor.is_zero_work(&prod) {
            ann_fail.get_or_insert(format!("A = {idx:?}: e_A e_Ac = {prod:?}"));
        }
    }
    checks.push(match cert_fail {
        None => pass("eisenstein-ideal-certificates"),
        Some(w) => fail("eisenstein-ideal-certificates", w),
    });
    checks.push(match ann_fail {
        None => pass("eisenstein-annihilation"),
        Some(w) => fail("eisenstein-annihilation", w),
    });

    // agreement of the two strictness criteria on random filtrations
    let a = EmbeddingSet::new(&st.split, &scn.a);
    let b_idx: Vec<usize> = scn.b_set().into_iter().collect();
    let b = EmbeddingSet::new(&st.split, &b_idx);
    let between: Vec<usize> = b.set.difference(&a.set).cloned().collect();
    let cr = st.coeff_ring(scn.n);
    let zd = cr.zdim();
    let m = cr.ctx.modulus;
    let full = cr.full_module();
    let mut ok = 0usize;
    let mut attempts = 0usize;
    let mut verdict = pass("eisenstein-strictness-agreement");
    while ok < scn.filtration_samples && attempts < scn.filtration_samples * 40 {
        attempts += 1;
        let mode = attempts % 3;
        let rows = match mode {
            0 => {
                let mut s_idx = scn.a.clone();
                for &j in &between {
                    if rng.gen_bool(0.5) {
                        s_idx.push(j);
                    }
                }
                let e_s = st.eis_elem(&EmbeddingSet::new(&st.split, &s_idx));
                st.ideal_times(&cr, &e_s, &full)
            }
            _ => {
                let k = rng.gen_range(0..=scn.n + 1);
                let mut rows = Mat::zero(0, zd);
                for _ in 0..k {
                    let v: Vec<u128> = (0..zd).map(|_| rng.gen_range(0..m)).collect();
                    rows.push_row(&v);
                }
                if mode == 2 {
                    let mut s_idx = scn.a.clone();
                    for &j in &between {
                        if rng.gen_bool(0.5) {
                            s_idx.push(j);
                        }
                    }
                    let e_s = st.eis_elem(&EmbeddingSet::new(&st.split, &s_idx));
                    cr.sum(&rows, &st.ideal_times(&cr, &e_s, &full))
                } else {
                    cr.t_span(&rows)
                }
            }
        };
        match check_strict(&st, scn.n, &a, &b, &rows) {
            Ok(_) => ok += 1,
            Err(EisensteinError::NotSummand) => {}
            Err(e) => {
                verdict = fail("eisenstein-strictness-agreement", e.to_string());
                break;
            }
        }
    }
    if verdict.status == "pass" && ok < scn.filtration_samples {
        verdict = fail(
            "eisenstein-strictness-agreement",
            format!("only {ok} usable filtrations in {attempts} attempts"),
        );
    }
    checks.push(verdict);
    checks
}

// ---- modification bijection (exhaustive, residue ring) ---------------------

fn suite_modification(scn: &Scenario) -> Vec<CheckResult> {
    let name = "modification-bijection";
    let t = match make_field_tower(scn.p, scn.f, scn.e, &scn.poly, scn.precision + 2) {
        Ok(t) => t,
        Err(e) => return vec![fail(name, format!("tower: {e:?}"))],
    };
    let sp = match split(&t) {
        Ok(s) => s,
        Err(e) => return vec![fail(name, format!("splitting: {e:?}"))],
    };
    let ring = TestRing::residue(&sp);
    let st = Setting::new(t, sp, ring);
    let n = scn.n;
    let cr = st.coeff_ring(n);
    let a = EmbeddingSet::new(&st.split, &scn.a);
    let b_idx: Vec<usize> = scn.b_set().into_iter().collect();
    let b = EmbeddingSet::new(&st.split, &b_idx);
    let s_idx: Vec<usize> = scn.s_set().into_iter().collect();
    let s_set = EmbeddingSet::new(&st.split, &s_idx);
    if !s_set.set.is_subset(&a.set) {
        return vec![fail(name, "S must be contained in A".into())];
    }
    let a2 = a.minus(&s_set, &st.split);
    let b2 = b.minus(&s_set, &st.split);

    let r = &st.ring.alg;
    let big_n = cr.zdim() / r.rank;
    let mut strict_ab: Vec<StrictFiltration> = Vec::new();
    let mut strict_a2b2: Vec<Mat> = Vec::new();
    let mut examined: u64 = 0;
    for k in 0..=big_n {
        for m in enumerate_free_summands(r, big_n, k) {
            examined += 1;
            if examined > scn.cap {
                return vec![fail(name, format!("cap {} exhausted", scn.cap))];
            }
            let span = cr.r_span(&m);
            if !cr.is_stable(&span, &st.zeta_t) {
                continue;
            }
            if let Ok(Strictness::Strict { d }) = check_strict(&st, n, &a, &b, &span) {
                strict_ab.push(StrictFiltration {
                    n,
                    a: a.clone(),
                    b: b.clone(),
                    basis: span.clone(),
                    d,
                });
            }
            if let Ok(Strictness::Strict { .. }) = check_strict(&st, n, &a2, &b2, &span) {
                strict_a2b2.push(span);
            }
        }
    }
    if strict_ab.is_empty() {
        return vec![fail(name, "no strict filtrations found".into())];
    }
    if strict_ab.len() != strict_a2b2.len() {
        return vec![fail(
            name,
            format!(
                "counts differ: {} strict for (A,B) vs {} for (A-S,B-S)",
                strict_ab.len(),
                strict_a2b2.len()
            ),
        )];
    }
    let mut seen: Vec<Mat> = Vec::new();
    for filt in &strict_ab {
        let image = match modify_filtration(&st, filt, &s_set, ModifyDirection::Forward) {
            Ok(f) => f,
            Err(e) => return vec![fail(name, format!("forward modification: {e}"))],
        };
        if !strict_a2b2.contains(&image.basis) {
            return vec![fail(
                name,
                format!("image is not (A-S,B-S)-strict:\n{:?}", image.basis),
            )];
        }
        if seen.contains(&image.basis) {
            return vec![fail(name, "modification is not injective".into())];
        }
        let back = match modify_filtration(&st, &image, &s_set, ModifyDirection::Backward) {
            Ok(f) => f,
            Err(e) => return vec![fail(name, format!("backward modification: {e}"))],
        };
        if back.basis != filt.basis {
            return vec![fail(name, "round trip is not the identity".into())];
        }
        seen.push(image.basis);
    }
    vec![pass(name)]
}

// ---- local model suite ------------------------------------------------------

fn standard_ctx(scn: &Scenario, flavor: Flavor, n: usize, d: usize) -> Result<ModelCtx, String> {
    let t = make_field_tower(scn.p, scn.f, scn.e, &scn.poly, 6).map_err(|e| format!("{e:?}"))?;
    let s = split(&t).map_err(|e| format!("{e:?}"))?;
    let ring = TestRing::residue(&s);
    let setting = Setting::new(t.clone(), s, ring);
    let phi0 = identity_embedding(&setting)?;
    let a: Vec<usize> = (0..setting.split.roots.len())
        .filter(|&j| j != phi0)
        .collect();
    let mut members = vec![Lattice::standard(&t, n)];
    for i in 1..n {
        let mut li = Lattice::standard(&t, n);
        for j in 0..i {
            li.basis[j][j] = t.alg.mul(&li.basis[j][j], &t.pi);
        }
        members.push(li);
    }
    let chain = LatticeChain::new(&t, members).map_err(|e| format!("{e:?}"))?;
    let a_used: Vec<usize> = if flavor.is_absolute() { a } else { vec![] };
    ModelCtx::new(setting, flavor, n, d, &a_used, phi0, chain, None).map_err(|e| format!("{e:?}"))
}

fn identity_embedding(setting: &Setting) -> Result<usize, String> {
    (0..setting.split.roots.len())
        .find(|&j| {
            setting
                .split
                .omega
                .eq_work(&setting.split.roots[j], &setting.tower.zeta)
        })
        .ok_or_else(|| "identity embedding not found".into())
}

fn unitary_ctx(
    scn: &Scenario,
    flavor: Flavor,
    gram_diag: &[i64],
    dual_first: bool,
) -> Result<ModelCtx, String> {
    let t = make_field_tower(scn.p, scn.f, scn.e, &scn.poly, 6).map_err(|e| format!("{e:?}"))?;
    let s = split(&t).map_err(|e| format!("{e:?}"))?;
    let tau = tower_automorphism(&t, 1).map_err(|e| format!("{e:?}"))?;
    let ring = TestRing::residue(&s);
    let setting = Setting::new(t.clone(), s, ring);
    let phi0 = identity_embedding(&setting)?;
    let n = gram_diag.len();
    let mut gram: AMat = vec![vec![t.alg.zero(); n]; n];
    for (i, &g) in gram_diag.iter().enumerate() {
        gram[i][i] = t.alg.from_int(g);
    }
    let lat = Lattice::standard(&t, n);
    let members = if dual_first {
        let dual = dual_lattice(&t, &tau, &gram, &lat).map_err(|e| format!("{e:?}"))?;
        vec![dual, lat]
    } else {
        vec![lat]
    };
    let chain = LatticeChain::new(&t, members).map_err(|e| format!("{e:?}"))?;
    // the conjugate pair of the identity embedding never enters A
    let perm = crate::tower::embedding_precompose_perm(&t, &setting.split, &tau)
        .map_err(|e| format!("{e:?}"))?;
    let phi0_bar = perm[phi0];
    let a: Vec<usize> = (0..setting.split.roots.len())
        .filter(|&j| j != phi0 && j != phi0_bar)
        .collect();
    let a_used: Vec<usize> = if flavor.is_absolute() { a } else { vec![] };
    let u = UnitaryData {
        tau,
        gram,
        r: 1,
        s: n - 1,
    };
    ModelCtx::new(setting, flavor, n, 0, &a_used, phi0, chain, Some(u))
        .map_err(|e| format!("{e:?}"))
}

fn bijection_check(scn: &Scenario, name: &str, n: usize, d: usize) -> CheckResult {
    let run = || -> Result<(), String> {
        let abs_ctx = standard_ctx(scn, Flavor::AbsoluteStandard, n, d)?;
        let rel_ctx = standard_ctx(scn, Flavor::RelativeStandard, n, d)?;
        let abs_pts = enumerate_model(&abs_ctx, scn.cap).map_err(|e| format!("{e:?}"))?;
        let rel_pts = enumerate_model(&rel_ctx, scn.cap).map_err(|e| format!("{e:?}"))?;
        if abs_pts.is_empty() {
            return Err("empty absolute model".into());
        }
        let matching =
            compare_models(&abs_ctx, &rel_ctx, &abs_pts, &rel_pts).map_err(|e| format!("{e:?}"))?;
        if matching.len() != abs_pts.len() {
            return Err("incomplete matching".into());
        }
        Ok(())
    };
    match run() {
        Ok(()) => pass(name),
        Err(w) => fail(name, w),
    }
}

fn suite_latmodel(scn: &Scenario) -> Vec<CheckResult> {
    if scn.f != 2 || scn.e != 1 {
        return KNOWN_LATMODEL_CHECKS
            .iter()
            .map(|n| skipped(n, "requires an unramified quadratic tower".into()))
            .collect();
    }
    let mut checks = Vec::new();
    checks.push(bijection_check(scn, "latmodel-bijection-n2-d1", 2, 1));
    checks.push(bijection_check(scn, "latmodel-bijection-n3-d1", 3, 1));

    let banal = || -> Result<(), String> {
        for (n, d) in [(2usize, 0usize), (2, 2), (3, 0)] {
            let ctx = standard_ctx(scn, Flavor::AbsoluteStandard, n, d)?;
            let pts = enumerate_model(&ctx, scn.cap).map_err(|e| format!("{e:?}"))?;
            if pts.len() != 1 {
                return Err(format!("(n,d) = ({n},{d}): {} points, expected 1", pts.len()));
            }
        }
        Ok(())
    };
    checks.push(match banal() {
        Ok(()) => pass("latmodel-banal-singletons"),
        Err(w) => fail("latmodel-banal-singletons", w),
    });

    for (tag, gram, dual_first) in [
        ("latmodel-naive-unitary-t0", vec![1i64, 1], false),
        ("latmodel-naive-unitary-t1", vec![1i64, scn.p as i64], true),
    ] {
        let run = || -> Result<(), String> {
            let rel = unitary_ctx(scn, Flavor::NaiveUnitaryRelative, &gram, dual_first)?;
            let abs = unitary_ctx(scn, Flavor::NaiveUnitaryAbsolute, &gram, dual_first)?;
            let rel_pts = enumerate_model(&rel, scn.cap).map_err(|e| format!("{e:?}"))?;
            let rel_rev = enumerate_model_reversed(&rel, scn.cap).map_err(|e| format!("{e:?}"))?;
            let s1: BTreeSet<String> = rel_pts.iter().map(|p| format!("{p:?}")).collect();
            let s2: BTreeSet<String> = rel_rev.iter().map(|p| format!("{p:?}")).collect();
            if s1 != s2 {
                return Err("filter-order dependence in the enumeration".into());
            }
            if rel_pts.is_empty() {
                return Err("empty naive unitary model".into());
            }
            let abs_pts = enumerate_model(&abs, scn.cap).map_err(|e| format!("{e:?}"))?;
            let matching =
                compare_models(&abs, &rel, &abs_pts, &rel_pts).map_err(|e| format!("{e:?}"))?;
            if matching.len() != rel_pts.len() {
                return Err("incomplete matching".into());
            }
            Ok(())
        };
        checks.push(match run() {
            Ok(()) => pass(tag),
            Err(w) => fail(tag, w),
        });
    }
    checks
}

const KNOWN_LATMODEL_CHECKS: &[&str] = &[
    "latmodel-bijection-n2-d1",
    "latmodel-bijection-n3-d1",
    "latmodel-banal-singletons",
    "latmodel-naive-unitary-t0",
    "latmodel-naive-unitary-t1",
];

// ---- witt suite -------------------------------------------------------------

fn suite_witt(scn: &Scenario, rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let m = scn.precision;
    let algebras = [
        ("base", Algebra::base(scn.p, m, store_precision(m))),
        (
            "residue-quadratic",
            Algebra::unramified(scn.p, 2, 1, store_precision(m)),
        ),
    ];
    let mut checks = Vec::new();
    for (tag, alg) in algebras {
        let c = WittCtx::new(&alg, scn.witt_length);
        let c_short = WittCtx::new(&alg, scn.witt_length - 1);
        let random_witt = |rng: &mut ChaCha8Rng| -> Vec<Vec<u128>> {
            (0..c.len)
                .map(|_| {
                    (0..alg.rank)
                        .map(|_| rng.gen_range(0..alg.ctx_store().modulus))
                        .collect()
                })
                .collect()
        };
        let mut wit = None;
        for i in 0..scn.witt_samples {
            let x = random_witt(rng);
            let y = random_witt(rng);
            // ghost coordinates are a ring homomorphism
            let gx = c.ghost(&x);
            let gy = c.ghost(&y);
            let gs = c.ghost(&c.add(&x, &y));
            let gp = c.ghost(&c.mul(&x, &y));
            for t in 0..c.len {
                if !alg.eq_work(&gs[t], &alg.add(&gx[t], &gy[t]))
                    || !alg.eq_work(&gp[t], &alg.mul(&gx[t], &gy[t]))
                {
                    wit.get_or_insert(format!("sample {i}: ghost is not a homomorphism"));
                }
            }
            // sigma o V = pi, at the honest shortened length
            let sv = c.frobenius_short(&c.versch(&x));
            let px = c.int_mul(scn.p as i64, &x);
            if sv
                .iter()
                .zip(px.iter())
                .any(|(u, v)| !alg.eq_work(u, v))
            {
                wit.get_or_insert(format!("sample {i}: sigma V != pi"));
            }
            // projection formula x V(y) = V(sigma(x) y); the right side is
            // computed one length short, where sigma(x) lives
            let lhs = c.mul(&x, &c.versch(&y));
            let sx = c.frobenius_short(&x);
            let y_short: Vec<Vec<u128>> = y[..c.len - 1].to_vec();
            let prod = c_short.mul(&sx, &y_short);
            let mut rhs = vec![alg.zero()];
            rhs.extend(prod);
            if lhs
                .iter()
                .zip(rhs.iter())
                .any(|(u, v)| !alg.eq_work(u, v))
            {
                wit.get_or_insert(format!("sample {i}: projection formula fails"));
            }
            // Teichmuller multiplicativity
            let a0: Vec<u128> = (0..alg.rank)
                .map(|_| rng.gen_range(0..alg.ctx_store().modulus))
                .collect();
            let b0: Vec<u128> = (0..alg.rank)
                .map(|_| rng.gen_range(0..alg.ctx_store().modulus))
                .collect();
            let tm = c.mul(&c.teichmuller(&a0), &c.teichmuller(&b0));
            if !c.eq(&tm, &c.teichmuller(&alg.mul(&a0, &b0))) {
                wit.get_or_insert(format!("sample {i}: Teichmuller lift not multiplicative"));
            }
            if wit.is_some() {
                break;
            }
        }
        let name = format!("witt-identities-{tag}");
        checks.push(match wit {
            None => pass(&name),
            Some(w) => fail(&name, w),
        });
    }
    checks
}

// ---- display suite ----------------------------------------------------------

fn suite_display(scn: &Scenario, rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let sc = match DisplayScenario::new(scn.p, scn.f, scn.e, &scn.poly, scn.witt_length as u32) {
        Ok(sc) => sc,
        Err(e) => return vec![fail("display-setup", format!("{e:?}"))],
    };
    let deg = sc.deg;
    let a = scn.a_set();
    let b = scn.b_set();
    let s_set = scn.s_set();
    let mc = PrimePow::new(scn.p, 2);
    let cw = sc.ctx.w.ctx_work();
    let nmax = (4 / deg).max(1);
    let mut checks = Vec::new();

    let mut axiom_wit = None;
    let mut modif_wit = None;
    let mut dual_wit = None;
    let mut v412_wit = None;
    let mut last_raw = None;
    for i in 0..scn.display_samples {
        let n = 1 + i % nmax;
        let raw = match random_strict_raw(&sc, n, &a, &b, rng) {
            Ok((raw, _)) => raw,
            Err(e) => {
                axiom_wit.get_or_insert(format!("sample {i}: generation failed: {e:?}"));
                break;
            }
        };
        if let Err(e) = validate(&sc.ctx, &raw) {
            axiom_wit.get_or_insert(format!("sample {i}: {e:?}"));
        }
        if let Err(e) = validate_action(&sc.ctx, &raw, &sc.f_alg) {
            axiom_wit.get_or_insert(format!("sample {i}: action: {e:?}"));
        }
        if let Err(e) = sc.check_strict(&raw, &a, &b) {
            axiom_wit.get_or_insert(format!("sample {i}: strictness: {e:?}"));
        }
        // the identity matrix is the empty modification; e_S is the real one
        let id = amat_identity(&sc.ctx.w, raw.h);
        match modify_raw(&sc.ctx, &raw, &id) {
            Ok(d0) => {
                if let Err(e) = validate(&sc.ctx, &d0) {
                    modif_wit.get_or_insert(format!("sample {i}: identity image: {e:?}"));
                }
            }
            Err(e) => {
                modif_wit.get_or_insert(format!("sample {i}: identity modification: {e:?}"));
            }
        }
        let es = sc.es_matrix(&raw.iota, &s_set);
        match modify_raw(&sc.ctx, &raw, &es) {
            Ok(dm) => {
                if let Err(e) = validate(&sc.ctx, &dm) {
                    modif_wit.get_or_insert(format!("sample {i}: e_S image: {e:?}"));
                }
                if dm.h != raw.h {
                    modif_wit.get_or_insert(format!("sample {i}: height changed"));
                }
            }
            Err(e) => {
                modif_wit.get_or_insert(format!("sample {i}: e_S modification: {e:?}"));
            }
        }
        match dualize_raw(&sc.ctx, &raw, None) {
            Ok(mut dv) => {
                if scn.tamper && i == 0 {
                    dv.fdot_q[0][0][0] = cw.add(dv.fdot_q[0][0][0] % cw.modulus, 1);
                }
                match check_dual_pairing(&sc.ctx, &raw, &dv, &cw) {
                    Ok(true) => {}
                    Ok(false) => {
                        dual_wit.get_or_insert(format!(
                            "sample {i}: pairing identity fails on fdot_q[0][0]"
                        ));
                    }
                    Err(e) => {
                        dual_wit.get_or_insert(format!("sample {i}: pairing check: {e:?}"));
                    }
                }
            }
            Err(e) => {
                dual_wit.get_or_insert(format!("sample {i}: dualization: {e:?}"));
            }
        }
        if i % 5 == 0 {
            match verify_412(&sc, &raw, &s_set, &mc) {
                Ok((true, _)) => {}
                Ok((false, w)) => {
                    v412_wit.get_or_insert(format!("sample {i}: {w}"));
                }
                Err(e) => {
                    v412_wit.get_or_insert(format!("sample {i}: {e:?}"));
                }
            }
        }
        last_raw = Some(raw);
    }
    checks.push(match axiom_wit {
        None => pass("display-axioms-and-strictness"),
        Some(w) => fail("display-axioms-and-strictness", w),
    });
    checks.push(match modif_wit {
        None => pass("display-modification"),
        Some(w) => fail("display-modification", w),
    });
    checks.push(match dual_wit {
        None => pass("display-dual-pairing"),
        Some(w) => fail("display-dual-pairing", w),
    });
    checks.push(match v412_wit {
        None => pass("display-double-modification-duality"),
        Some(w) => fail("display-double-modification-duality", w),
    });

    checks.push(lubin_tate_check(scn, &sc, &a, rng));
    checks.push(trace_duality_check(scn, &sc, rng));

    let fv = || -> Result<(), String> {
        let vals = sc.factor_valuations(&s_set).map_err(|e| format!("{e:?}"))?;
        for (count, v) in vals {
            if count as u32 != v {
                return Err(format!("factor has {count} embeddings but valuation {v}"));
            }
        }
        Ok(())
    };
    checks.push(match fv() {
        Ok(()) => pass("display-factor-valuations"),
        Err(w) => fail("display-factor-valuations", w),
    });

    // every single-entry perturbation of the dual structure matrix must be
    // caught by the pairing identity
    let mutation = || -> Result<(), String> {
        let raw = last_raw.ok_or("no display available")?;
        let dv = dualize_raw(&sc.ctx, &raw, None).map_err(|e| format!("{e:?}"))?;
        if dv.fdot_q.is_empty() {
            return Err("dual has no structure rows".into());
        }
        for k in 0..scn.mutation_samples {
            let mut bad = dv.clone();
            let i = rng.gen_range(0..bad.fdot_q.len());
            let j = rng.gen_range(0..bad.fdot_q[i].len());
            let v = rng.gen_range(0..bad.fdot_q[i][j].len());
            let delta = rng.gen_range(1..scn.p) as u128;
            bad.fdot_q[i][j][v] = cw.add(bad.fdot_q[i][j][v] % cw.modulus, delta);
            let caught = !check_dual_pairing(&sc.ctx, &raw, &bad, &cw)
                .map_err(|e| format!("{e:?}"))?
                || validate(&sc.ctx, &bad).is_err();
            if !caught {
                return Err(format!(
                    "mutation {k} at fdot_q[{i}][{j}] slot {v} (+{delta}) went undetected"
                ));
            }
        }
        Ok(())
    };
    checks.push(match mutation() {
        Ok(()) => pass("display-mutation-detection"),
        Err(w) => fail("display-mutation-detection", w),
    });
    checks
}

fn lubin_tate_check(
    scn: &Scenario,
    sc: &DisplayScenario,
    a: &BTreeSet<usize>,
    _rng: &mut ChaCha8Rng,
) -> CheckResult {
    let name = "display-lubin-tate";
    if scn.e != 1 {
        return skipped(name, "descent implemented for unramified towers only".into());
    }
    let run = || -> Result<(), String> {
        let lt = lubin_tate(sc, 1, &BTreeSet::new()).map_err(|e| format!("{e:?}"))?;
        let raw = lt.as_raw();
        validate(&sc.ctx, &raw).map_err(|e| format!("degenerate: {e:?}"))?;
        if !crate::display::v_nilpotent(&sc.ctx, &raw).map_err(|e| format!("{e:?}"))? {
            return Err("degenerate Lubin-Tate display is not V-nilpotent".into());
        }
        if !a.is_empty() {
            let lt2 = lubin_tate(sc, 1, a).map_err(|e| format!("{e:?}"))?;
            let raw2 = lt2.as_raw();
            validate(&sc.ctx, &raw2).map_err(|e| format!("modified: {e:?}"))?;
        }
        Ok(())
    };
    match run() {
        Ok(()) => pass(name),
        Err(w) => fail(name, w),
    }
}

fn conj_coords(sc: &DisplayScenario, k: usize) -> Result<Vec<Vec<u128>>, String> {
    let tau = tower_automorphism(&sc.tower, k).map_err(|e| format!("{e:?}"))?;
    let cs = sc.tower.ctx_store();
    Ok((0..sc.deg)
        .map(|a| tau.apply(&sc.tower.alg.basis_elem(a), &cs))
        .collect())
}

fn trace_duality_check(scn: &Scenario, sc: &DisplayScenario, rng: &mut ChaCha8Rng) -> CheckResult {
    let name = "display-trace-duality";
    if scn.e != 1 || (scn.f != 2 && scn.f != 4) {
        return skipped(name, "needs an unramified tower of degree 2 or 4".into());
    }
    let mut run = || -> Result<(), String> {
        let cs = sc.tower.ctx_store();
        let cw = sc.tw.ctx_work();
        let _ = &cs;
        let j0 = (0..sc.deg)
            .position(|j| {
                sc.split.roots[j]
                    .iter()
                    .zip(&sc.tower.zeta)
                    .all(|(&x, &y)| x % cw.modulus == y % cw.modulus)
            })
            .ok_or("identity embedding not found")?;
        let (f0_deg, a_set, b_set) = if scn.f == 2 {
            let other = (0..sc.deg).find(|&j| j != j0).unwrap();
            let a: BTreeSet<usize> = [other].into_iter().collect();
            (1usize, a.clone(), a)
        } else {
            let tau = tower_automorphism(&sc.tower, 2).map_err(|e| format!("{e:?}"))?;
            let perm = crate::tower::embedding_precompose_perm(&sc.tower, &sc.split, &tau)
                .map_err(|e| format!("{e:?}"))?;
            let j0bar = perm[j0];
            let phi = (0..sc.deg)
                .find(|j| *j != j0 && *j != j0bar)
                .ok_or("no embedding outside the fixed pair")?;
            let a: BTreeSet<usize> = [phi].into_iter().collect();
            let b: BTreeSet<usize> = [phi, j0, j0bar].into_iter().collect();
            (2usize, a, b)
        };
        let lt = lubin_tate(sc, f0_deg, &a_set).map_err(|e| format!("{e:?}"))?;
        let (raw, _) = random_strict_raw(sc, 1, &a_set, &b_set, rng).map_err(|e| format!("{e:?}"))?;
        let iota0: Vec<AMat> = lt.emb0.iter().map(|c| sc.iota_elem(&raw.iota, c)).collect();
        let conj = conj_coords(sc, f0_deg)?;
        let mc = PrimePow::new(scn.p, 2);
        let (ok, wit) = verify_trace_duality(sc, &raw, &iota0, &lt, &a_set, &conj, &mc)
            .map_err(|e| format!("{e:?}"))?;
        if !ok {
            return Err(wit);
        }
        Ok(())
    };
    match run() {
        Ok(()) => pass(name),
        Err(w) => fail(name, w),
    }
}

// ---- BT pairing suite ---------------------------------------------------------

fn iso_display(ctx: &BtCtx) -> crate::display::Display {
    let w = &ctx.disp.w;
    let phi = vec![
        crate::display::wrow_std(w, 2, 1),
        crate::display::wrow_std(w, 2, 0),
    ];
    crate::display::Display::new(&ctx.disp, 2, 1, phi, Vec::new()).expect("isoclinic display")
}

fn random_pt(ctx: &BtCtx, rng: &mut ChaCha8Rng, h: usize) -> Pt {
    (0..h)
        .map(|_| {
            (0..ctx.lw)
                .map(|_| (0..ctx.nd()).map(|_| rng.gen_range(0..ctx.p) as u128).collect())
                .collect()
        })
        .collect()
}

fn sample_pi_torsion(
    ctx: &BtCtx,
    rng: &mut ChaCha8Rng,
    d: &crate::display::Display,
) -> Result<Pt, String> {
    for _ in 0..800 {
        let x = random_pt(ctx, rng, d.h);
        if ctx.solve_fminus_id(d, &ctx.pt_pmul(&x, 1)).is_ok() {
            return Ok(x);
        }
    }
    Err("no pi-torsion point found in 800 samples".into())
}

fn fminus_id_of(ctx: &BtCtx, d: &crate::display::Display, z: &Pt) -> Result<Pt, String> {
    let fz = ctx.fdot_hat(d, z).map_err(|e| format!("{e}"))?;
    Ok(ctx.pt_sub(&fz, z))
}

fn suite_btpair(scn: &Scenario, rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let f = scn.f.min(2).max(1);
    let mut checks = Vec::new();

    // torsion identities and the evaluation square over nil-class <= 3
    let mut torsion = || -> Result<(), String> {
        for nil in [NilAlgebra::dual_numbers(f), NilAlgebra::truncated(f, 3)] {
            let class = nil.class;
            let ctx = BtCtx::new(scn.p, nil, 6, 3).map_err(|e| format!("{e}"))?;
            let d = iso_display(&ctx);
            let pr = make_pairing(&ctx, &d).map_err(|e| format!("{e}"))?;
            let per_alg = scn.torsion_samples.div_ceil(2).max(1);
            for i in 0..per_alg {
                let x = random_pt(&ctx, rng, d.h);
                let tp = solve_torsion(&ctx, &d, &x, 1).map_err(|e| format!("{e}"))?;
                let lhs = fminus_id_of(&ctx, &d, &tp.y)?;
                if !ctx.pt_eq_prefix(&lhs, &ctx.pt_pmul(&x, 1), ctx.lw) {
                    return Err(format!("class {class}, sample {i}: torsion solve is wrong"));
                }
                let l = sample_pi_torsion(&ctx, rng, &pr.dual)?;
                let xt = sample_pi_torsion(&ctx, rng, &pr.disp)?;
                // independence of the chosen lifting on both arguments
                let base = ctx.pairing(&pr, &l, &xt, 1).map_err(|e| format!("{e}"))?;
                let mut z = random_pt(&ctx, rng, d.h);
                for row in z.iter_mut().take(d.d) {
                    row[0] = ctx.nzero();
                }
                let z_im = fminus_id_of(&ctx, &d, &z)?;
                let x2 = ctx.pt_add(&xt, &z_im);
                let shifted = ctx.pairing(&pr, &l, &x2, 1).map_err(|e| format!("{e}"))?;
                if shifted != base {
                    return Err(format!("class {class}, sample {i}: pairing not well defined"));
                }
                // bilinearity in the first argument
                let l2 = sample_pi_torsion(&ctx, rng, &pr.dual)?;
                let both = ctx
                    .pairing(&pr, &ctx.pt_add(&l, &l2), &xt, 1)
                    .map_err(|e| format!("{e}"))?;
                let split_sum = ctx
                    .lt_add(&base, &ctx.pairing(&pr, &l2, &xt, 1).map_err(|e| format!("{e}"))?)
                    .map_err(|e| format!("{e}"))?;
                if both != split_sum {
                    return Err(format!("class {class}, sample {i}: pairing not additive"));
                }
                // evaluation square commutes
                let (sq_l, sq_r) = ctx
                    .eval_square(&pr, &l, &xt, 1)
                    .map_err(|e| format!("{e}"))?;
                if sq_l != sq_r {
                    return Err(format!("class {class}, sample {i}: evaluation square broken"));
                }
                // order compatibility
                let up = ctx.pairing(&pr, &l, &xt, 2).map_err(|e| format!("{e}"))?;
                let down = ctx
                    .pairing(&pr, &l, &ctx.pt_pmul(&xt, 1), 1)
                    .map_err(|e| format!("{e}"))?;
                if up != down {
                    return Err(format!("class {class}, sample {i}: order compatibility fails"));
                }
            }
        }
        Ok(())
    };
    checks.push(match torsion() {
        Ok(()) => pass("btpair-torsion-identities"),
        Err(w) => fail("btpair-torsion-identities", w),
    });

    // tangent space: over the dual numbers the point group has order q^d
    let tangent = || -> Result<(), String> {
        let ctx = BtCtx::new(scn.p, NilAlgebra::dual_numbers(f), 4, 2).map_err(|e| format!("{e}"))?;
        let d = iso_display(&ctx);
        let pts = bt_points(&ctx, &d).map_err(|e| format!("{e}"))?;
        let expect = (f * d.d) as u64;
        if pts.order_log_p != expect {
            return Err(format!(
                "log_p |BT| = {}, expected {expect}",
                pts.order_log_p
            ));
        }
        let ctx0 = BtCtx::new(scn.p, NilAlgebra::zero(f), 4, 2).map_err(|e| format!("{e}"))?;
        let d0 = iso_display(&ctx0);
        if bt_points(&ctx0, &d0).map_err(|e| format!("{e}"))?.order_log_p != 0 {
            return Err("nonzero group over the zero algebra".into());
        }
        Ok(())
    };
    checks.push(match tangent() {
        Ok(()) => pass("btpair-tangent-space"),
        Err(w) => fail("btpair-tangent-space", w),
    });
    checks
}

// ---- orbital suite --------------------------------------------------------------

fn n1_datum(p: u64, a: i64, b: i64) -> Result<SymDatum, String> {
    SymDatum::new(
        1,
        p,
        0,
        vec![vec![Fx::one()]],
        vec![p_pow(p, a)],
        vec![p_pow(p, b)],
    )
    .map_err(|e| format!("{e}"))
}

fn gamma_from(c: i128, x: &FMat) -> Option<FMat> {
    let xbar: FMat = x
        .iter()
        .map(|row| row.iter().map(|e| e.conj()).collect())
        .collect();
    let det = fmat_det(c, &xbar);
    let nm = det.mul(&det.conj(), c).a;
    if nm == Rq::from_integer(0) {
        return None;
    }
    let adj: FMat = vec![
        vec![xbar[1][1].clone(), xbar[0][1].neg()],
        vec![xbar[1][0].neg(), xbar[0][0].clone()],
    ];
    let inv: FMat = adj
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| {
                    let t = e.mul(&det.conj(), c);
                    Fx {
                        a: t.a / nm,
                        b: t.b / nm,
                    }
                })
                .collect()
        })
        .collect();
    Some(fmat_mul(c, x, &inv))
}

fn random_datum(rng: &mut ChaCha8Rng, p: u64, t: usize) -> SymDatum {
    let c = smallest_nonresidue(p);
    loop {
        let x: FMat = (0..2)
            .map(|_| {
                (0..2)
                    .map(|_| Fx {
                        a: Rq::from_integer(rng.gen_range(-3..=3)),
                        b: Rq::from_integer(rng.gen_range(-2..=2)),
                    })
                    .collect()
            })
            .collect();
        if fmat_det(c, &x).is_zero() {
            continue;
        }
        let gamma = match gamma_from(c, &x) {
            Some(g) => g,
            None => continue,
        };
        let u1 = vec![
            Rq::from_integer(rng.gen_range(-3..=3)),
            Rq::from_integer(rng.gen_range(-3..=3)),
        ];
        let u2 = vec![
            Rq::from_integer(rng.gen_range(-3..=3)),
            Rq::from_integer(rng.gen_range(-3..=3)),
        ];
        if let Ok(d) = SymDatum::new(2, p, t, gamma, u1, u2) {
            return d;
        }
    }
}

fn suite_orbital(scn: &Scenario, rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let p = scn.p;
    let mut checks = Vec::new();

    let closed = || -> Result<(), String> {
        for a in 0..=4i64 {
            for b in 0..=4i64 {
                let d = n1_datum(p, a, b)?;
                let omega = transfer_factor(&d).map_err(|e| format!("{e}"))?;
                if omega != 1 && omega != -1 {
                    return Err(format!("(a,b)=({a},{b}): omega = {omega}"));
                }
                let got = orbital_integral(&d, TestFn::Lattice).map_err(|e| format!("{e}"))?;
                let want = closed_form_n1(a, b);
                if got != want {
                    return Err(format!(
                        "(a,b)=({a},{b}): enumeration {:?} != closed form {:?}",
                        got.terms, want.terms
                    ));
                }
            }
        }
        Ok(())
    };
    checks.push(match closed() {
        Ok(()) => pass("orbital-closed-form-n1"),
        Err(w) => fail("orbital-closed-form-n1", w),
    });

    let vanishing = || -> Result<(), String> {
        for a in 0..=4i64 {
            for b in 0..=4i64 {
                if (a + b) % 2 == 0 {
                    continue;
                }
                let d = n1_datum(p, a, b)?;
                let orb = orbital_integral(&d, TestFn::Lattice).map_err(|e| format!("{e}"))?;
                if orb.at_zero() != 0 {
                    return Err(format!(
                        "(a,b)=({a},{b}): odd invariant but Orb(0) = {}",
                        orb.at_zero()
                    ));
                }
            }
        }
        Ok(())
    };
    checks.push(match vanishing() {
        Ok(()) => pass("orbital-matched-vanishing-n1"),
        Err(w) => fail("orbital-matched-vanishing-n1", w),
    });

    let mut covariance = || -> Result<(), String> {
        let pr = Rq::from_integer(p as i128);
        let one = Rq::from_integer(1);
        let zero = Rq::from_integer(0);
        for trial in 0..scn.covariance_samples {
            let t = trial % 2;
            let d = random_datum(rng, p, t);
            let h: Vec<Vec<Rq>> = match trial % 3 {
                0 => vec![vec![pr, zero], vec![zero, one]],
                1 => vec![vec![one, one], vec![zero, pr]],
                _ => vec![vec![zero, one], vec![pr, pr]],
            };
            let dd = act(&d, &h).map_err(|e| format!("{e}"))?;
            let v = val_det(p, &h).ok_or("singular h")?;
            let omega = transfer_factor(&d).map_err(|e| format!("{e}"))?;
            if omega != 1 && omega != -1 {
                return Err(format!("trial {trial}: omega = {omega}"));
            }
            let base = orbital_integral(&d, TestFn::Lattice).map_err(|e| format!("{e}"))?;
            let moved = orbital_integral(&dd, TestFn::Lattice).map_err(|e| format!("{e}"))?;
            if moved != base.shift(v) {
                return Err(format!(
                    "trial {trial}: Orb(h.d) {:?} != q^(s val det h) Orb(d) {:?}",
                    moved.terms,
                    base.shift(v).terms
                ));
            }
        }
        Ok(())
    };
    checks.push(match covariance() {
        Ok(()) => pass("orbital-covariance-n2"),
        Err(w) => fail("orbital-covariance-n2", w),
    });
    checks
}

// ---- census and datum wrappers ---------------------------------------------------

pub fn parse_flavor(s: &str) -> Option<Flavor> {
    match s {
        "relative-standard" => Some(Flavor::RelativeStandard),
        "absolute-standard" => Some(Flavor::AbsoluteStandard),
        "naive-unitary-relative" => Some(Flavor::NaiveUnitaryRelative),
        "naive-unitary-absolute" => Some(Flavor::NaiveUnitaryAbsolute),
        _ => None,
    }
}

/// One census line per (n, d): flavor, n, d, point count.
pub fn census_csv(scn: &Scenario, flavor: Flavor, n: usize, d: usize) -> Result<String, String> {
    let ctx = match flavor {
        Flavor::RelativeStandard | Flavor::AbsoluteStandard => standard_ctx(scn, flavor, n, d)?,
        Flavor::NaiveUnitaryRelative | Flavor::NaiveUnitaryAbsolute => {
            let mut gram = vec![1i64; n];
            if d > 0 {
                gram[n - 1] = scn.p as i64;
            }
            unitary_ctx(scn, flavor, &gram, d > 0)?
        }
    };
    let pts = enumerate_model(&ctx, scn.cap).map_err(|e| format!("{e:?}"))?;
    let tag = match flavor {
        Flavor::RelativeStandard => "relative-standard",
        Flavor::AbsoluteStandard => "absolute-standard",
        Flavor::NaiveUnitaryRelative => "naive-unitary-relative",
        Flavor::NaiveUnitaryAbsolute => "naive-unitary-absolute",
    };
    Ok(format!(
        "flavor,n,d,count\n{tag},{n},{d},{}\n",
        pts.len()
    ))
}

/// Datum JSON in, orbital result JSON out.
pub fn orbital_result(datum_json: &str, dual: bool) -> Result<serde_json::Value, String> {
    let d = SymDatum::from_json(datum_json).map_err(|e| format!("{e}"))?;
    let f = if dual {
        TestFn::DualLattice
    } else {
        TestFn::Lattice
    };
    let omega = transfer_factor(&d).map_err(|e| format!("{e}"))?;
    let poly = orbital_integral(&d, f).map_err(|e| format!("{e}"))?;
    Ok(serde_json::json!({
        "omega": omega,
        "orbital": poly.to_json(),
        "derived_over_logq": derived_orbital(&poly).to_string(),
    }))
}

// ---- driver ------------------------------------------------------------------------

pub struct RunFlags {
    pub precision: Option<u32>,
    pub witt_length: Option<usize>,
    pub suites: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub cap: Option<u64>,
    pub jobs: usize,
}

impl Default for RunFlags {
    fn default() -> RunFlags {
        RunFlags {
            precision: None,
            witt_length: None,
            suites: None,
            seed: None,
            cap: None,
            jobs: 1,
        }
    }
}

pub fn apply_flags(scn: &mut Scenario, flags: &RunFlags) {
    if let Some(m) = flags.precision {
        scn.precision = m;
    }
    if let Some(l) = flags.witt_length {
        scn.witt_length = l;
    }
    if let Some(s) = &flags.suites {
        scn.suites = s.clone();
    }
    if let Some(s) = flags.seed {
        scn.seed = s;
    }
    if let Some(c) = flags.cap {
        scn.cap = c;
    }
}

/// Run a list of scenarios, optionally in parallel; bodies come back in
/// input order regardless of scheduling.
pub fn run_all(scenarios: &[Scenario], jobs: usize) -> Report {
    let start = std::time::Instant::now();
    let bodies: Vec<ReportBody> = if jobs <= 1 || scenarios.len() <= 1 {
        scenarios
            .iter()
            .map(|s| ReportBody::tally(&s.name, s.seed, run_scenario(s)))
            .collect()
    } else {
        let mut out = Vec::with_capacity(scenarios.len());
        for chunk in scenarios.chunks(jobs) {
            let mut batch: Vec<ReportBody> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|s| {
                        scope.spawn(move || ReportBody::tally(&s.name, s.seed, run_scenario(s)))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker"))
                    .collect()
            });
            out.append(&mut batch);
        }
        out
    };
    let elapsed = start.elapsed().as_millis();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    Report {
        bodies,
        meta: ReportMeta {
            timestamp_unix_ms: timestamp,
            elapsed_ms: vec![("total".into(), elapsed)],
        },
    }
}
