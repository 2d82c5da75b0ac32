//! Checks against independently written reference computations.

use ide_core::fitness::{run_single_elimination, tournament1_fitness, Comparison, Tournament1Scoring};
use ide_core::landscape::{standard_model, STANDARD_DIMS};
use ide_core::stats::{sign_test, wilcoxon_signed_rank, Alternative};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The benchmark mixture written out longhand, as a product of per-axis
/// factors rather than the exponential of a sum.
fn reference_value(x: &[f64]) -> f64 {
    let a = [3.1, 3.4, 4.1, 3.0];
    let sigma = [1.5, 2.0, 1.0, 2.0];
    let mu = [
        [-1.0, 1.5, -2.0, -2.5, -1.0, 1.5, -2.0, -2.5, -1.0, 1.5],
        [0.0, -2.0, 3.0, 1.0, 0.0, -2.0, 3.0, 1.0, 0.0, -2.0],
        [-2.5, -2.0, 1.5, 3.5, -2.5, -2.0, 1.5, 3.5, -2.5, -2.0],
        [-2.0, 1.0, -1.0, 3.0, -2.0, 1.0, -1.0, 3.0, -2.0, 1.0],
    ];
    let mut total = 0.0;
    for i in 0..4 {
        let mut term = a[i];
        for (j, xj) in x.iter().enumerate() {
            let z = (xj - mu[i][j]) / sigma[i];
            term *= (-0.5 * z * z).exp();
        }
        total += term;
    }
    total
}

#[test]
fn landscape_matches_longhand_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in STANDARD_DIMS {
        let model = standard_model(d).unwrap();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..=5.0)).collect();
            let got = model.evaluate(&x).unwrap();
            let want = reference_value(&x);
            assert!(((got - want) / want).abs() <= 1e-12, "d={d} x={x:?} {got} vs {want}");
        }
    }
    assert!(standard_model(3).unwrap().evaluate(&[-2.5, -2.0, 1.5]).unwrap() >= 4.1);
}

/// P(at least k of n fair coins land heads), by listing all 2^n outcomes.
fn brute_sign_tail(n: usize, k: usize) -> f64 {
    let hits = (0u32..1 << n).filter(|m| m.count_ones() as usize >= k).count();
    hits as f64 / f64::from(1u32 << n)
}

/// Signed-rank p-value by enumerating all 2^n sign assignments of the
/// observed (tie-averaged) ranks.
fn brute_wilcoxon(d: &[f64], alternative: Alternative) -> f64 {
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let equal = abs.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = (0..n).filter(|i| d[*i] > 0.0).map(|i| ranks[i]).sum();
    let mut hits = 0u32;
    for mask in 0u32..1 << n {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let extreme = match alternative {
            Alternative::Greater => w >= observed,
            Alternative::Less => w <= observed,
        };
        hits += u32::from(extreme);
    }
    f64::from(hits) / f64::from(1u32 << n)
}

#[test]
fn sign_test_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let n = rng.gen_range(1..=10);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
        let kept = x.iter().zip(&y).filter(|(a, b)| a != b).count();
        let positive = x.iter().zip(&y).filter(|(a, b)| a > b).count();
        for alt in [Alternative::Greater, Alternative::Less] {
            match sign_test(&x, &y, alt, 0.05) {
                Ok(o) => {
                    let k = if alt == Alternative::Greater { positive } else { kept - positive };
                    let want = brute_sign_tail(kept, k);
                    assert!((o.p_value - want).abs() <= 1e-12, "{x:?} {y:?} {alt:?}");
                    assert_eq!(o.n, kept);
                }
                Err(_) => assert_eq!(kept, 0),
            }
        }
    }
}

#[test]
fn wilcoxon_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..500 {
        let n = rng.gen_range(6..=10);
        // coarse values force tied magnitudes in many rounds
        let coarse = round % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if coarse {
                rng.gen_range(-4..=4) as f64
            } else {
                rng.gen_range(-4.0..4.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
        for alt in [Alternative::Greater, Alternative::Less] {
            match wilcoxon_signed_rank(&x, &y, alt, 0.05) {
                Ok(o) => {
                    let want = brute_wilcoxon(&d, alt);
                    assert!((o.p_value - want).abs() <= 1e-12, "{d:?} {alt:?} {} {want}", o.p_value);
                }
                Err(_) => assert!(d.len() < 6),
            }
        }
    }
}

/// Games played by each entrant of a bracket decided by a fixed pattern,
/// computed from the bracket's shape alone: an entrant that first loses in
/// round r played r games; the champion played log2(N).
fn forced_multiset(n: usize) -> Vec<f64> {
    let rounds = n.trailing_zeros() as usize;
    let mut out = vec![rounds as f64];
    for r in 1..=rounds {
        out.extend(std::iter::repeat(r as f64).take(n >> r));
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn tournament1_multiset_for_every_outcome_pattern() {
    for n in [2usize, 4, 8] {
        let games = n - 1;
        for pattern in 0u32..1 << games {
            for tie_pattern in [0u32, pattern ^ 0b101] {
                let ids: Vec<usize> = (0..n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(u64::from(pattern));
                let mut game = 0;
                let bracket = run_single_elimination(&ids, &mut rng, |_, _| {
                    let c = if tie_pattern >> game & 1 == 1 {
                        Comparison::Tie
                    } else if pattern >> game & 1 == 1 {
                        Comparison::AWins
                    } else {
                        Comparison::BWins
                    };
                    game += 1;
                    Ok((c, None))
                })
                .unwrap();
                assert_eq!(bracket.game_count(), games);
                let mut got: Vec<f64> =
                    tournament1_fitness(&bracket, Tournament1Scoring::GamesPlayed).into_values().collect();
                got.sort_by(f64::total_cmp);
                assert_eq!(got, forced_multiset(n), "n={n} pattern={pattern:b}");
            }
        }
    }
    for n in [16usize, 128] {
        let ids: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut coin = ChaCha8Rng::seed_from_u64(7);
        let bracket = run_single_elimination(&ids, &mut rng, |_, _| {
            Ok((if coin.gen_bool(0.5) { Comparison::AWins } else { Comparison::BWins }, None))
        })
        .unwrap();
        assert_eq!(bracket.game_count(), n - 1);
        let mut got: Vec<f64> =
            tournament1_fitness(&bracket, Tournament1Scoring::GamesPlayed).into_values().collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, forced_multiset(n));
    }
}
