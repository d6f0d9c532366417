#[test]
fn t412_variants() {
    use eiskern::display::*;
    use eiskern::zp::PrimePow;
    use std::collections::BTreeSet;
    use rand::SeedableRng;
    let sc = DisplayScenario::new(3, 2, 1, &[], 6).unwrap();
    let mc = PrimePow::new(3, 2);
    for (n, aset, bset) in [(1usize, vec![0usize], vec![0usize]),
                            (1, vec![0], vec![0,1]),
                            (2, vec![0], vec![0,1])] {
        let a: BTreeSet<usize> = aset.iter().cloned().collect();
        let b: BTreeSet<usize> = bset.iter().cloned().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (raw, _) = random_strict_raw(&sc, n, &a, &b, &mut rng).unwrap();
        println!("n={n} a={aset:?} b={bset:?} h={} qgens={}", raw.h, raw.q_gens.len());
        let r = std::panic::catch_unwind(|| verify_412(&sc, &raw, &a, &mc));
        match r {
            Ok(Ok((ok, wit))) => println!("  -> ok={ok} wit={wit}"),
            Ok(Err(e)) => println!("  -> err {e:?}"),
            Err(_) => println!("  -> PANIC"),
        }
    }
}
