use proptest::prelude::*;
use stl_grid_miner::trace::{parse_csv, CsvSchema, Extremum};
use stl_grid_miner::Trace;

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..96)
}

proptest! {
    #[test]
    fn integral_is_additive(v in values(), a in -5.0..100.0f64, m in 0.0..1.0f64, w in 0.0..60.0f64) {
        let t = Trace::new(v).unwrap();
        let b = a + w;
        let mid = a + m * w;
        let whole = t.window_integral(a, b).unwrap();
        let parts = t.window_integral(a, mid).unwrap() + t.window_integral(mid, b).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + whole.abs()));
    }

    #[test]
    fn integral_is_linear(v in values(), alpha in -3.0..3.0f64, a in 0.0..48.0f64, w in 0.0..48.0f64) {
        let t = Trace::new(v).unwrap();
        let scaled = t.scaled(alpha).unwrap();
        let lhs = scaled.window_integral(a, a + w).unwrap();
        let rhs = alpha * t.window_integral(a, a + w).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn integral_bounded_by_extrema(v in values(), a in 0.0..48.0f64, w in 0.01..48.0f64) {
        let t = Trace::new(v).unwrap();
        let (a, b) = (a.min(t.horizon() - 0.005), a + w);
        let len = b.min(t.horizon()) - a;
        let lo = t.window_min_max(a, b, Extremum::Min).unwrap();
        let hi = t.window_min_max(a, b, Extremum::Max).unwrap();
        let i = t.window_integral(a, b).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!(i >= lo * len - 1e-9 && i <= hi * len + 1e-9);
    }

    #[test]
    fn integral_over_domain_is_sum(v in values()) {
        let t = Trace::new(v.clone()).unwrap();
        let sum: f64 = v.iter().sum();
        prop_assert!((t.window_integral(0.0, t.horizon()).unwrap() - sum).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trips_values(v in prop::collection::vec(-1e6..1e6f64, 1..200)) {
        let mut text = String::from("value\n");
        for x in &v {
            text.push_str(&format!("{x}\n"));
        }
        let ds = parse_csv(&text, &CsvSchema::default()).unwrap();
        let joined: Vec<f64> = ds.traces().iter().flat_map(|t| t.values().to_vec()).collect();
        prop_assert_eq!(joined, v);
    }
}

#[test]
fn tail_sum_matches_direct_summation() {
    let day = stl_grid_miner::attack::EveningPeakDay::default().trace();
    let direct: f64 = day.values()[24..48].iter().sum();
    assert!((day.window_integral(24.0, 48.0).unwrap() - direct).abs() < 1e-12);
}
