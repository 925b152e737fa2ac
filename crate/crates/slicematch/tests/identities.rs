//! Cross-module identities: metric structure of the 1D distance, the
//! compatible-map semigroup, optimality of induced couplings, and the
//! empirical descent trend of A2 schedules.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slicematch::matching::SliceMatchingMap;
use slicematch::oracle;
use slicematch::ot1d::w2_1d;
use slicematch::scheme::{self, Diagnostics, Schedule};
use slicematch::slicing::{dot, DirectionSampler};
use slicematch::DiscreteMeasure;

fn random_uniform(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DiscreteMeasure {
    let pts: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
        .collect();
    DiscreteMeasure::from_points(&pts, None).unwrap()
}

fn measure_1d(positions: &[f64], weights: &[f64]) -> DiscreteMeasure {
    let pts: Vec<Vec<f64>> = positions.iter().map(|&x| vec![x]).collect();
    DiscreteMeasure::from_points(&pts, Some(weights)).unwrap()
}

#[test]
fn w2_1d_triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let (ma, mb, mc) = (
            rng.gen_range(2..=10),
            rng.gen_range(2..=10),
            rng.gen_range(2..=10),
        );
        let a = random_uniform(&mut rng, ma, 1);
        let b = random_uniform(&mut rng, mb, 1);
        let c = random_uniform(&mut rng, mc, 1);
        let ab = w2_1d(&a, &b).unwrap();
        let bc = w2_1d(&b, &c).unwrap();
        let ac = w2_1d(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-10, "{ac} > {ab} + {bc}");
    }
}

#[test]
fn composed_maps_stay_compatible() {
    // maps built on the same frame compose to another compatible map: the
    // composed images stay monotone along matched columns and untouched
    // along unmatched ones
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let n = 2 + trial % 2;
        let j = 1 + trial % n;
        let src = random_uniform(&mut rng, 10, n);
        let mid = random_uniform(&mut rng, 10, n);
        let tgt = random_uniform(&mut rng, 10, n);
        let frame = DirectionSampler::haar(trial as u64)
            .sample_haar(n)
            .unwrap();
        let first = SliceMatchingMap::build(&src, &mid, &frame, j).unwrap();
        let pushed = first.pushforward_matched();
        let second = SliceMatchingMap::build(&pushed, &tgt, &frame, j).unwrap();
        let composed: Vec<Vec<f64>> = (0..src.len())
            .map(|a| second.apply(&first.apply_atom(a)).unwrap())
            .collect();
        for i in 0..n {
            let theta = frame.column(i);
            let before: Vec<f64> = src.points().map(|p| dot(p, theta)).collect();
            let after: Vec<f64> = composed.iter().map(|y| dot(y, theta)).collect();
            let mut order: Vec<usize> = (0..before.len()).collect();
            order.sort_by(|&a, &b| before[a].partial_cmp(&before[b]).unwrap());
            if i < j {
                for w in order.windows(2) {
                    assert!(
                        after[w[0]] <= after[w[1]] + 1e-9,
                        "trial {trial}: inversion along matched column {i}"
                    );
                }
            } else {
                for (b, a) in before.iter().zip(&after) {
                    assert!((a - b).abs() <= 1e-9, "trial {trial}: column {i} moved");
                }
            }
        }
    }
}

#[test]
fn matched_pushforward_is_optimally_coupled() {
    // the displacement cost of the map's induced coupling upper-bounds the
    // exact W₂², with equality because the induced coupling is monotone in
    // every frame coordinate
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30 {
        let n = 2 + trial % 2;
        let j = 1 + trial % n;
        let m = rng.gen_range(3..=8);
        let src = random_uniform(&mut rng, m, n);
        let tgt = random_uniform(&mut rng, m, n);
        let frame = DirectionSampler::haar(100 + trial as u64)
            .sample_haar(n)
            .unwrap();
        let map = SliceMatchingMap::build(&src, &tgt, &frame, j).unwrap();
        let pushed = map.pushforward_matched();
        let displacement: f64 = (0..m)
            .map(|a| {
                let x = src.point(a);
                let y = pushed.point(a);
                src.weight(a)
                    * x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
            })
            .sum();
        let (w2, _) = oracle::w2_exact(&src, &pushed).unwrap();
        assert!(w2 * w2 <= displacement + 1e-10);
        assert!(
            (w2 * w2 - displacement).abs() <= 1e-10 * displacement.max(1e-12),
            "trial {trial}: {} vs {displacement}",
            w2 * w2
        );
    }
}

#[test]
fn a2_schedule_descends_in_windowed_minimum() {
    // translation run: the minimum of the SW₂ series over a trailing window
    // of 20 iterations never increases (trend check, not per-step descent)
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let src = random_uniform(&mut rng, 128, 2);
    let tgt = src.translate(&[1.0, 1.0]).unwrap();
    let traj = scheme::run(
        &src,
        &tgt,
        1,
        &Schedule::log_over_k(),
        &mut DirectionSampler::haar(61),
        200,
        &Diagnostics {
            sw2_directions: 128,
            sw2_seed: 62,
            retain_measures: false,
        },
    )
    .unwrap();
    let series: Vec<f64> = std::iter::once(traj.initial_sw2.unwrap().value)
        .chain(traj.steps.iter().map(|s| s.sw2.unwrap().value))
        .collect();
    let window = 20;
    let windowed_min = |k: usize| -> f64 {
        series[k.saturating_sub(window - 1)..=k]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    for k in 1..series.len() {
        assert!(
            windowed_min(k) <= windowed_min(k - 1) + 1e-15,
            "windowed minimum increased at k={k}"
        );
    }
    // the run also has to actually descend
    assert!(*series.last().unwrap() <= 0.05 * series[0]);
}

#[test]
fn trajectory_csv_round_trips_through_rerun() {
    // identical seeds and config give a bit-identical trajectory CSV
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let src = random_uniform(&mut rng, 32, 2);
    let tgt = random_uniform(&mut rng, 32, 2);
    let go = || {
        scheme::run(
            &src,
            &tgt,
            2,
            &Schedule::inverse_k(),
            &mut DirectionSampler::haar(91),
            25,
            &Diagnostics {
                sw2_directions: 200,
                sw2_seed: 92,
                retain_measures: false,
            },
        )
        .unwrap()
        .to_csv()
    };
    assert_eq!(go(), go());
}

proptest! {
    #[test]
    fn prop_w2_symmetric_and_translation(
        xs in prop::collection::vec(-100.0f64..100.0, 1..12),
        ys in prop::collection::vec(-100.0f64..100.0, 1..12),
        shift in -50.0f64..50.0,
    ) {
        let a = DiscreteMeasure::from_points(
            &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), None).unwrap();
        let b = DiscreteMeasure::from_points(
            &ys.iter().map(|&y| vec![y]).collect::<Vec<_>>(), None).unwrap();
        let ab = w2_1d(&a, &b).unwrap();
        let ba = w2_1d(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        let shifted = w2_1d(&a, &a.translate(&[shift]).unwrap()).unwrap();
        prop_assert!((shifted - shift.abs()).abs() <= 1e-12 * shift.abs().max(1.0));
    }

    #[test]
    fn prop_pushforward_preserves_mass(
        xs in prop::collection::vec(-10.0f64..10.0, 1..20),
        ws in prop::collection::vec(0.01f64..5.0, 20),
        scale in -3.0f64..3.0,
    ) {
        let m = measure_1d(&xs, &ws[..xs.len()]);
        let before: f64 = m.weights().iter().sum();
        let pushed = m.pushforward(|p| vec![scale * p[0]]).unwrap();
        let after: f64 = pushed.weights().iter().sum();
        prop_assert_eq!(before, after);
        prop_assert_eq!(pushed.len(), m.len());
    }

    #[test]
    fn prop_cdf_quantile_galois(
        xs in prop::collection::vec(-10.0f64..10.0, 1..12),
        ws in prop::collection::vec(0.01f64..5.0, 12),
        q in 0.0001f64..1.0,
    ) {
        // F(F^{-1}(q)) >= q and F^{-1} picks the smallest such position
        let m = measure_1d(&xs, &ws[..xs.len()]);
        let t = slicematch::ot1d::transport_map_1d(&m, &m).unwrap();
        let z = t.source().quantile(q).unwrap();
        prop_assert!(t.source().cdf(z) >= q);
        for (i, p) in m.points().enumerate() {
            if p[0] < z {
                prop_assert!(t.source().cdf(m.point(i)[0]) < q);
            }
        }
    }

    #[test]
    fn prop_transport_monotone(
        xs in prop::collection::vec(-10.0f64..10.0, 2..12),
        ys in prop::collection::vec(-10.0f64..10.0, 2..12),
    ) {
        let a = DiscreteMeasure::from_points(
            &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), None).unwrap();
        let b = DiscreteMeasure::from_points(
            &ys.iter().map(|&y| vec![y]).collect::<Vec<_>>(), None).unwrap();
        let t = slicematch::ot1d::transport_map_1d(&a, &b).unwrap();
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
        for w in idx.windows(2) {
            prop_assert!(t.atom_image(w[0]) <= t.atom_image(w[1]));
        }
    }
}
