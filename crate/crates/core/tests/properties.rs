use ide_core::ea::{mutate, MutationScope};
use ide_core::fitness::{
    quantize_generation, run_single_elimination, tournament1_fitness, tournament2_fitness, Comparison,
    EvaluationOracle, PseudoUser, QuantizerConfig, Tournament1Scoring, Tournament2Config,
};
use ide_core::genotype::{BitGenome, GenotypeCodec};
use ide_core::landscape::{standard_model, GaussianMixture, SearchDomain, STANDARD_DIMS};
use ide_core::stats::{sign_test, wilcoxon_signed_rank, Alternative};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn levels_strategy() -> impl Strategy<Value = u32> {
    2u32..=10
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100_000))]

    /// Extremes map to the end levels, order is kept, and dyadic affine
    /// maps (exact in floating point) change nothing.
    #[test]
    fn quantizer_laws(
        raw in prop::collection::vec(-1_000_000i64..1_000_000, 1..40),
        levels in levels_strategy(),
        scale_exp in -8i32..8,
        shift in -1_000_000i64..1_000_000,
    ) {
        let values: Vec<f64> = raw.iter().map(|v| *v as f64).collect();
        let config = QuantizerConfig { levels };
        let q = quantize_generation(&values, config);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (v, l) in values.iter().zip(&q) {
            prop_assert!((1..=levels).contains(l));
            if min == max {
                prop_assert_eq!(*l, levels);
            } else if *v == min {
                prop_assert_eq!(*l, 1);
            } else if *v == max {
                prop_assert_eq!(*l, levels);
            }
        }
        for i in 0..values.len() {
            for j in 0..values.len() {
                if values[i] <= values[j] {
                    prop_assert!(q[i] <= q[j]);
                }
            }
        }
        let a = 2f64.powi(scale_exp);
        let moved: Vec<f64> = values.iter().map(|v| a * v + shift as f64).collect();
        prop_assert_eq!(quantize_generation(&moved, config), q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    /// General affine maps agree except for values within rounding distance
    /// of a bin boundary.
    #[test]
    fn quantizer_general_affine(
        values in prop::collection::vec(-100.0f64..100.0, 2..30),
        levels in levels_strategy(),
        a in 0.01f64..100.0,
        b in -1000.0f64..1000.0,
    ) {
        let config = QuantizerConfig { levels };
        let q = quantize_generation(&values, config);
        let moved: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let q2 = quantize_generation(&moved, config);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(max > min);
        for i in 0..values.len() {
            let t = (values[i] - min) / (max - min) * f64::from(levels);
            if (t - t.round()).abs() > 1e-9 {
                prop_assert_eq!(q[i], q2[i]);
            }
        }
    }

    #[test]
    fn decode_is_monotone_per_gene(dim in 1usize..6, gene in 0usize..6, u in 0u32..4095) {
        let gene = gene % dim;
        let codec = GenotypeCodec::new(SearchDomain::standard(dim), 12).unwrap();
        let genome_for = |v: u32| {
            let mut bits = vec![false; 12 * dim];
            for b in 0..12 {
                bits[gene * 12 + b] = (v >> (11 - b)) & 1 == 1;
            }
            BitGenome::new(bits, 12).unwrap()
        };
        let lo = codec.decode(&genome_for(u)).unwrap();
        let hi = codec.decode(&genome_for(u + 1)).unwrap();
        prop_assert!(hi[gene] > lo[gene]);
    }

    #[test]
    fn encode_inverts_decode(
        bits in prop::collection::vec(any::<bool>(), 36),
        gray in any::<bool>(),
    ) {
        let codec = GenotypeCodec::new(SearchDomain::standard(3), 12).unwrap().with_gray(gray);
        let g = BitGenome::new(bits, 12).unwrap();
        let x = codec.decode(&g).unwrap();
        prop_assert_eq!(codec.encode(&x).unwrap(), g);
    }

    #[test]
    fn encode_is_within_half_a_step(point in prop::collection::vec(-5.0f64..=5.0, 5)) {
        let codec = GenotypeCodec::new(SearchDomain::standard(5), 12).unwrap();
        let back = codec.decode(&codec.encode(&point).unwrap()).unwrap();
        for j in 0..5 {
            prop_assert!((back[j] - point[j]).abs() <= codec.step(j) / 2.0 + 1e-12);
        }
    }

    #[test]
    fn landscape_is_bounded_on_the_domain(
        d in prop::sample::select(STANDARD_DIMS.to_vec()),
        seed in any::<u64>(),
    ) {
        let model = standard_model(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..=5.0)).collect();
        let f = model.evaluate(&x).unwrap();
        prop_assert!(f > 0.0);
        prop_assert!(f <= model.height_sum());
    }

    #[test]
    fn landscape_ignores_component_order(
        d in prop::sample::select(STANDARD_DIMS.to_vec()),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        x in prop::collection::vec(-5.0f64..5.0, 10),
    ) {
        let model = standard_model(d).unwrap();
        let permuted = GaussianMixture::new(
            perm.iter().map(|i| model.heights()[*i]).collect(),
            perm.iter().map(|i| model.centers()[*i].clone()).collect(),
            perm.iter().map(|i| model.deviations()[*i].clone()).collect(),
        ).unwrap();
        let a = model.evaluate(&x[..d]).unwrap();
        let b = permuted.evaluate(&x[..d]).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
    }

    #[test]
    fn pseudo_user_is_antisymmetric_and_consistent(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        reference in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..10),
    ) {
        let model = standard_model(3).unwrap();
        let mut exact = PseudoUser::exact(&model);
        let mut quantized = PseudoUser::quantized(&model, QuantizerConfig::default());
        quantized.begin_generation(0, &reference).unwrap();
        for judge in [&mut exact, &mut quantized] {
            let (ab, mab) = judge.compare_with_magnitude(&a, &b).unwrap();
            let (ba, mba) = judge.compare_with_magnitude(&b, &a).unwrap();
            prop_assert_eq!(ab, ba.reversed());
            prop_assert_eq!(mab, mba);
            prop_assert!(mab >= 0.0);
            prop_assert_eq!(judge.compare(&a, &a).unwrap(), Comparison::Tie);
        }
        let (q, m) = quantized.compare_with_magnitude(&a, &b).unwrap();
        prop_assert!(m <= 4.0 && m.fract() == 0.0);
        if q != Comparison::Tie {
            prop_assert_eq!(q, exact.compare(&a, &b).unwrap());
        }
    }

    #[test]
    fn brackets_assign_consistent_fitness(log_n in 1u32..8, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let ids: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut outcomes = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let bracket = run_single_elimination(&ids, &mut rng, |_, _| {
            let c = [Comparison::AWins, Comparison::BWins, Comparison::Tie][outcomes.gen_range(0..3)];
            let m = if c == Comparison::Tie { 0.0 } else { f64::from(outcomes.gen_range(0..5u32)) };
            Ok((c, Some(m)))
        }).unwrap();
        prop_assert_eq!(bracket.game_count(), n - 1);

        let t1 = tournament1_fitness(&bracket, Tournament1Scoring::GamesPlayed);
        prop_assert_eq!(t1.values().sum::<f64>(), 2.0 * (n - 1) as f64);

        let config = Tournament2Config::default();
        let t2 = tournament2_fitness(&bracket, &config).unwrap();
        prop_assert_eq!(t2[&bracket.champion()], config.champion_fitness);
        for g in bracket.games() {
            prop_assert!(t2[&g.winner] >= t2[&g.loser()]);
            prop_assert!(t2[&g.winner] <= config.champion_fitness);
        }
    }

    #[test]
    fn tests_ignore_monotone_transforms(
        x in prop::collection::vec(-10.0f64..10.0, 8..40),
        y in prop::collection::vec(-10.0f64..10.0, 8..40),
    ) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let g = |v: &f64| v.powi(3) + 2.0 * v;
        let (gx, gy): (Vec<f64>, Vec<f64>) = (x.iter().map(g).collect(), y.iter().map(g).collect());
        for alt in [Alternative::Greater, Alternative::Less] {
            let p = sign_test(x, y, alt, 0.05).unwrap().p_value;
            let q = sign_test(&gx, &gy, alt, 0.05).unwrap().p_value;
            prop_assert_eq!(p, q);
        }
        // ranks of |x − y| are not preserved by transforms, so the signed-rank
        // test is only invariant under a common shift and positive scaling
        let (sx, sy): (Vec<f64>, Vec<f64>) =
            (x.iter().map(|v| 4.0 * v + 3.0).collect(), y.iter().map(|v| 4.0 * v + 3.0).collect());
        let p = wilcoxon_signed_rank(x, y, Alternative::Greater, 0.05).map(|o| o.p_value).ok();
        let q = wilcoxon_signed_rank(&sx, &sy, Alternative::Greater, 0.05).map(|o| o.p_value).ok();
        if let (Some(p), Some(q)) = (p, q) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in STANDARD_DIMS {
        let model = standard_model(d).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let g = model.gradient(&x).unwrap();
            for j in 0..d {
                let h = 1e-5;
                let (mut up, mut down) = (x.clone(), x.clone());
                up[j] += h;
                down[j] -= h;
                let fd = (model.evaluate(&up).unwrap() - model.evaluate(&down).unwrap()) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6, "d={d} j={j} fd={fd} g={}", g[j]);
            }
        }
    }
}

/// Flip positions of per-bit mutation are uniform (chi-square, 35 degrees of
/// freedom, critical value 66.62 at the 0.001 level) and the flip rate
/// matches.
#[test]
fn mutation_flips_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 40_000;
    let mut counts = [0u64; 36];
    let base = BitGenome::new(vec![false; 36], 12).unwrap();
    for _ in 0..trials {
        let mut g = base.clone();
        mutate(&mut g, 0.05, MutationScope::PerBit, &mut rng);
        for (c, b) in counts.iter_mut().zip(g.bits()) {
            *c += u64::from(*b);
        }
    }
    let total: u64 = counts.iter().sum();
    let rate = total as f64 / (36.0 * trials as f64);
    assert!((rate - 0.05).abs() < 0.002, "rate {rate}");
    let expected = total as f64 / 36.0;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 66.62, "chi2 {chi2}");

    let mut counts = [0u64; 36];
    let mut mutated = 0;
    for _ in 0..trials {
        let mut g = base.clone();
        mutate(&mut g, 0.5, MutationScope::PerGenome, &mut rng);
        let flips: usize = g.bits().iter().filter(|b| **b).count();
        assert!(flips <= 1);
        mutated += flips;
        for (c, b) in counts.iter_mut().zip(g.bits()) {
            *c += u64::from(*b);
        }
    }
    assert!((mutated as f64 / trials as f64 - 0.5).abs() < 0.02);
    let expected = mutated as f64 / 36.0;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 66.62, "chi2 {chi2}");
}
