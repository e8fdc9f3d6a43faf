use proptest::prelude::*;

use rwrs_core::diagnostics::build_blocks;
use rwrs_core::exceedance::{count_in_box, ExceedanceBox, Point, PointPattern, ValueInterval};

fn pattern(raw: &[(f64, f64)]) -> PointPattern {
    PointPattern {
        n: raw.len() as u64,
        m_n: raw.len() as u64,
        points: raw.iter().map(|&(t, v)| Point { t, v }).collect(),
    }
}

proptest! {
    #[test]
    fn blocks_partition_the_sites(
        mut sites in prop::collection::btree_set(-10_000i64..10_000, 1..400),
        k_n in 2u64..40,
        ell in 0u64..10,
    ) {
        let sites: Vec<i64> = std::mem::take(&mut sites).into_iter().collect();
        let s = build_blocks(&sites, k_n, ell).unwrap();
        let flat: Vec<i64> = s.blocks.iter().flatten().copied().collect();
        prop_assert_eq!(&flat, &sites);
        prop_assert_eq!(s.blocks.len() as u64, s.big_k);
        for (b, st) in s.blocks.iter().zip(&s.stripes) {
            prop_assert!(b.len() as u64 <= s.r_n);
            if st.is_empty() {
                prop_assert!(ell == 0 || (b.len() as u64) < ell);
            } else {
                prop_assert_eq!(st.as_slice(), &b[b.len() - ell as usize..]);
            }
        }
    }

    #[test]
    fn box_counts_add_over_time_splits(
        raw in prop::collection::vec((0.0f64..1.0, -3.0f64..6.0), 0..200),
        cut in 0.0f64..1.0,
        x in 0.1f64..3.0,
    ) {
        let p = pattern(&raw);
        let whole = ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(x, None)]).unwrap();
        let left = ExceedanceBox::new((0.0, cut), vec![ValueInterval(x, None)]).unwrap();
        let right = ExceedanceBox::new((cut, 1.0), vec![ValueInterval(x, None)]).unwrap();
        prop_assert_eq!(count_in_box(&p, &whole), count_in_box(&p, &left) + count_in_box(&p, &right));
    }

    #[test]
    fn box_counts_add_over_value_splits(
        raw in prop::collection::vec((0.0f64..1.0, -3.0f64..6.0), 0..200),
        lo in 0.1f64..2.0,
        gap in 0.01f64..3.0,
    ) {
        let p = pattern(&raw);
        let mid = lo + gap;
        let whole = ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(lo, None)]).unwrap();
        let lower = ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(lo, Some(mid))]).unwrap();
        let upper = ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(mid, None)]).unwrap();
        let union = ExceedanceBox::new((0.0, 1.0), vec![ValueInterval(lo, Some(mid)), ValueInterval(mid, None)]).unwrap();
        let c = count_in_box(&p, &whole);
        prop_assert_eq!(c, count_in_box(&p, &lower) + count_in_box(&p, &upper));
        prop_assert_eq!(c, count_in_box(&p, &union));
    }
}
