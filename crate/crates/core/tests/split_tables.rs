use gridfuse::eval::splits::{format_tenths, split_statistics, SplitAssignment, SplitTable};

/// `(class, share of total, distribution in first subset, distribution in
/// second subset)` as printed, 1 decimal.
type Row = (usize, &'static str, &'static str, &'static str);

const TRAIN_TEST: [Row; 11] = [
    (0, "25.1", "0.7", "0.5"),
    (1, "30.7", "0.4", "0.4"),
    (2, "33.3", "0.1", "0.1"),
    (3, "21.9", "0.0", "0.0"),
    (4, "32.8", "16.5", "17.9"),
    (5, "32.7", "4.6", "5.0"),
    (6, "28.5", "68.4", "60.7"),
    (7, "42.5", "8.0", "13.1"),
    (8, "49.5", "0.8", "1.7"),
    (9, "40.5", "0.1", "0.2"),
    (10, "25.2", "0.4", "0.3"),
];

const TRAIN_VAL: [Row; 11] = [
    (0, "24.8", "0.7", "0.7"),
    (1, "20.5", "0.4", "0.4"),
    (2, "24.4", "0.1", "0.1"),
    (3, "23.8", "0.0", "0.0"),
    (4, "42.3", "12.4", "29.7"),
    (5, "44.4", "3.4", "8.7"),
    (6, "16.1", "74.9", "47.0"),
    (7, "35.1", "6.8", "11.9"),
    (8, "21.1", "0.8", "0.7"),
    (9, "82.8", "0.0", "0.4"),
    (10, "23.4", "0.4", "0.4"),
];

fn check(table: &SplitTable, second: &str, rows: &[Row], total: &str) {
    let a = 0;
    let b = table.subset_index(second).unwrap();
    assert_eq!(format_tenths(table.share_tenths(b, None).unwrap()), total);
    for &(class, share, dist_a, dist_b) in rows {
        assert_eq!(format_tenths(table.share_tenths(b, Some(class)).unwrap()), share, "class {class} share");
        assert_eq!(format_tenths(table.distribution_tenths(a, class).unwrap()), dist_a, "class {class} first");
        assert_eq!(format_tenths(table.distribution_tenths(b, class).unwrap()), dist_b, "class {class} second");
    }
}

fn hundredths(num: u64, den: u64) -> f64 {
    (10_000.0 * num as f64 / den as f64).round() / 100.0
}

#[test]
fn train_test_table_rows() {
    let t = SplitTable::from_csv(include_str!("fixtures/split_counts_train_test.csv")).unwrap();
    assert_eq!(t.subset_total(0), 1_689_540_705);
    assert_eq!(t.subset_total(1), 759_222_245);
    assert_eq!(t.class_total(6), 1_616_429_697);
    check(&t, "test", &TRAIN_TEST, "31.0");
    // The smallest class is printed with two decimals.
    assert_eq!(hundredths(t.count(0, 3), t.subset_total(0)), 0.05);
    assert_eq!(hundredths(t.count(1, 3), t.subset_total(1)), 0.03);
}

#[test]
fn train_val_table_rows() {
    let t = SplitTable::from_csv(include_str!("fixtures/split_counts_train_val.csv")).unwrap();
    assert_eq!(t.grand_total(), 1_689_540_705);
    assert_eq!(t.subset_total(1), 397_077_528);
    check(&t, "val", &TRAIN_VAL, "23.5");
    assert_eq!(hundredths(t.count(0, 9), t.subset_total(0)), 0.02);
    assert_eq!(hundredths(t.count(1, 3), t.subset_total(1)), 0.05);
}

#[test]
fn csv_round_trip_and_render() {
    let text = include_str!("fixtures/split_counts_train_test.csv");
    let t = SplitTable::from_csv(text).unwrap();
    assert_eq!(SplitTable::from_csv(&t.to_csv()).unwrap(), t);
    let rendered = t.render();
    assert!(rendered.contains("31.0"), "{rendered}");
    assert!(rendered.contains("42.5"), "{rendered}");
}

#[test]
fn toy_zones_match_hand_count() {
    let assignment = SplitAssignment::parse("za train\nzb test\nzc train\n").unwrap();
    let za = [0u8, 0, 1, 255, 2];
    let zb = [1u8, 1, 1, 2];
    let zc = [2u8, 255];
    let t = split_statistics(
        [("za", &za[..]), ("zb", &zb[..]), ("zc", &zc[..])],
        &assignment,
        3,
    )
    .unwrap();
    let train = t.subset_index("train").unwrap();
    let test = t.subset_index("test").unwrap();
    assert_eq!((0..3).map(|c| t.count(train, c)).collect::<Vec<_>>(), [2, 1, 2]);
    assert_eq!((0..3).map(|c| t.count(test, c)).collect::<Vec<_>>(), [0, 3, 1]);
    // 4 of 9 counted labels are in test: 44.4 %; class 1 is 3 of 4: 75.0 %.
    assert_eq!(format_tenths(t.share_tenths(test, None).unwrap()), "44.4");
    assert_eq!(format_tenths(t.share_tenths(test, Some(1)).unwrap()), "75.0");
    assert!(split_statistics([("zz", &za[..])], &assignment, 3).is_err());
    assert!(split_statistics([("za", &[3u8][..])], &assignment, 3).is_err());
}

#[test]
fn bundled_assignment_merge() {
    let a = SplitAssignment::bundled();
    assert_eq!(a.zones_in("train").len(), 21);
    assert_eq!(a.zones_in("val").len(), 6);
    assert_eq!(a.zones_in("test").len(), 9);
    let merged = a.merged("val", "train");
    assert_eq!(merged.zones_in("train").len(), 27);
    assert!(merged.zones_in("val").is_empty());
}
