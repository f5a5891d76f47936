mod common;

use proptest::prelude::*;
use tvdd::decomposition::{split_nonoverlapping, split_overlapping};
use tvdd::grid::{divergence, energy, gradient, total_variation};
use tvdd::{DualField, GridShape, MaskOperator, MeasurementOperator, PartialFourierOperator, Signal};

fn shape_strategy() -> impl Strategy<Value = GridShape> {
    prop_oneof![
        (2usize..20).prop_map(|n| GridShape::d1(n).unwrap()),
        (2usize..8, 2usize..8).prop_map(|(r, c)| GridShape::d2(r, c).unwrap()),
        (2usize..5, 2usize..5, 2usize..4).prop_map(|(a, b, c)| GridShape::new(vec![a, b, c]).unwrap()),
    ]
}

fn signal_on(shape: GridShape) -> impl Strategy<Value = Signal> {
    prop::collection::vec(-1.0f64..1.0, shape.len()).prop_map(move |v| Signal::new(shape.clone(), v).unwrap())
}

fn shaped_signal() -> impl Strategy<Value = Signal> {
    shape_strategy().prop_flat_map(signal_on)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_matches_difference_matrix(u in shaped_signal()) {
        let reference = common::tv_reference(u.shape(), u.values());
        prop_assert!((total_variation(&u) - reference).abs() <= 1e-12 * (1.0 + reference));
    }

    #[test]
    fn tv_ignores_constant_shifts(u in shaped_signal(), c in -5.0f64..5.0) {
        let shifted = u.add(&Signal::constant(u.shape(), c));
        prop_assert!((total_variation(&shifted) - total_variation(&u)).abs() <= 1e-10);
    }

    #[test]
    fn tv_is_absolutely_homogeneous(u in shaped_signal(), s in -4.0f64..4.0) {
        let lhs = total_variation(&u.scaled(s));
        prop_assert!((lhs - s.abs() * total_variation(&u)).abs() <= 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn divergence_is_negative_adjoint(
        (u, raw) in shape_strategy().prop_flat_map(|s| {
            let n = s.len() * s.ndim();
            (signal_on(s), prop::collection::vec(-1.0f64..1.0, n))
        })
    ) {
        let shape = u.shape().clone();
        let comps = raw.chunks(shape.len()).map(|c| c.to_vec()).collect();
        let p = DualField::with_boundary_zeroed(shape, comps).unwrap();
        let gap = gradient(&u).dot(&p) + u.dot(&divergence(&p).unwrap());
        prop_assert!(gap.abs() <= 1e-12 * (1.0 + u.norm() * p.norm()));
    }

    #[test]
    fn energy_is_convex(
        (u, w, keep) in (2usize..7, 2usize..7).prop_flat_map(|(r, c)| {
            let s = GridShape::d2(r, c).unwrap();
            (signal_on(s.clone()), signal_on(s), prop::collection::vec(any::<bool>(), r * c))
        }),
        t in 0.0f64..1.0,
    ) {
        let mut keep = keep;
        keep[0] = true;
        let op = MaskOperator::from_mask(u.shape().clone(), &keep, 0.9).unwrap();
        let g: Vec<f64> = (0..op.range_dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let e = |x: &Signal| energy(x, &op, &g, 0.1).unwrap();
        let mid = u.scaled(1.0 - t).add(&w.scaled(t));
        prop_assert!(e(&mid) <= (1.0 - t) * e(&u) + t * e(&w) + 1e-10);
    }

    #[test]
    fn operators_are_adjoint(
        (u, keep) in (2usize..9, 2usize..9).prop_flat_map(|(r, c)| {
            let s = GridShape::d2(r, c).unwrap();
            (signal_on(s), prop::collection::vec(any::<bool>(), r * c))
        }),
        seed in 0u64..1000,
    ) {
        let shape = u.shape().clone();
        let mask = MaskOperator::from_mask(shape.clone(), &keep, 0.7).unwrap();
        let n = shape.len();
        let freqs: Vec<usize> = (0..n).filter(|k| !(k * 7 + seed as usize).is_multiple_of(3)).collect();
        let fourier = PartialFourierOperator::new(shape, freqs, 0.5).unwrap();
        let ops: [&dyn MeasurementOperator; 2] = [&mask, &fourier];
        for op in ops {
            let y: Vec<f64> = (0..op.range_dim()).map(|i| ((i as u64 + seed) as f64 * 0.61).cos()).collect();
            let lhs: f64 = op.apply(&u).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs = u.dot(&op.adjoint(&y));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn nonoverlapping_split_partitions_the_grid(
        shape in shape_strategy(),
        axis_pick in 0usize..3,
        parts_pick in 0usize..4,
    ) {
        let axis = axis_pick % shape.ndim();
        let parts = 2 + parts_pick % (shape.dims()[axis] - 1);
        let dec = split_nonoverlapping(&shape, axis, parts).unwrap();
        prop_assert_eq!(dec.len(), parts);
        let mut count = vec![0usize; shape.len()];
        for j in 0..parts {
            prop_assert!(dec.boundary(j).is_empty());
            for i in dec.subdomain(j) {
                count[i] += 1;
            }
        }
        prop_assert!(count.iter().all(|&c| c == 1));
    }

    #[test]
    fn overlapping_split_weights_form_partition_of_unity(
        n in 6usize..40,
        cols in 1usize..4,
        parts in 2usize..4,
        overlap in 1usize..6,
    ) {
        let shape = GridShape::d2(n, cols).unwrap();
        let Ok(dec) = split_overlapping(&shape, 0, parts, overlap) else {
            return Ok(());
        };
        let mut covered = vec![0usize; shape.len()];
        let mut total = vec![0.0; shape.len()];
        for j in 0..parts {
            let w = dec.weight(j).values();
            for i in 0..shape.len() {
                prop_assert!((0.0..=1.0).contains(&w[i]));
                if w[i] > 0.0 {
                    prop_assert!(dec.contains(j, i));
                }
                if dec.on_boundary(j, i) {
                    prop_assert_eq!(w[i], 0.0);
                }
                total[i] += w[i];
            }
            for i in dec.subdomain(j) {
                covered[i] += 1;
            }
            let free = dec.free_mask(j);
            for (i, &f) in free.iter().enumerate() {
                prop_assert_eq!(f, dec.contains(j, i) && !dec.on_boundary(j, i));
            }
        }
        prop_assert!(total.iter().all(|t| (t - 1.0).abs() < 1e-12));
        prop_assert!(covered.iter().all(|&c| c >= 1));
    }
}
