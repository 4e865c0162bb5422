//! Published hit counts: the word example and the painting example.
//!
//! Pinned values were computed independently with the natural log in
//! double precision (`(max(ln a, ln b) − ln ab) / (ln Υ − min(ln a, ln b))`).

use ncdkit::ngd::{ngd, ngd_from_counts, HitCountProvider, NgdError, NgdValue};

const HORSE: u64 = 156_000_000;
const RIDER: u64 = 62_200_000;
const MOLECULE: u64 = 45_600_000;
const HORSE_RIDER: u64 = 2_660_000;
const HORSE_MOLECULE: u64 = 1_520_000;

const A: u64 = 446_000;
const B: u64 = 278_000;
const C: u64 = 1_310_000;
const AB: u64 = 13_700;
const AC: u64 = 888;
const BC: u64 = 603;

const TOTALS: [u64; 3] = [2_000_000_000, 8_000_000_000, 50_000_000_000];
const TOL: f64 = 1e-9;

fn value(lx: u64, ly: u64, lxy: u64, total: u64) -> f64 {
    match ngd_from_counts(lx, ly, lxy, total).unwrap() {
        (NgdValue::Finite(v), false) => v,
        other => panic!("{other:?}"),
    }
}

#[test]
fn word_fixture_pinned_at_8e9() {
    let hr = value(HORSE, RIDER, HORSE_RIDER, 8_000_000_000);
    let hm = value(HORSE, MOLECULE, HORSE_MOLECULE, 8_000_000_000);
    assert!((hr - 0.8383081093811153).abs() <= TOL, "{hr}");
    assert!((hm - 0.8962428033452673).abs() <= TOL, "{hm}");
    assert!(hr < hm);
}

#[test]
fn painting_fixture_pinned_at_8e9() {
    let ab = value(A, B, AB, 8_000_000_000);
    let ac = value(A, C, AC, 8_000_000_000);
    let bc = value(B, C, BC, 8_000_000_000);
    assert!((ab - 0.3392238084026804).abs() <= TOL, "{ab}");
    assert!((ac - 0.7449555120862432).abs() <= TOL, "{ac}");
    assert!((bc - 0.74835617055318).abs() <= TOL, "{bc}");
    assert!(ab < ac && ab < bc);
}

#[test]
fn orderings_hold_across_index_sizes() {
    let pinned = [
        (1.1731664619547204, 1.2248484822515715, 0.39217529060142226, 0.8677773502533642, 0.8651715810927789),
        (0.8383081093811153, 0.8962428033452673, 0.3392238084026804, 0.7449555120862432, 0.74835617055318),
        (0.6086518540080302, 0.661604472179173, 0.28784696861768005, 0.6275420378882947, 0.6350145532366659),
    ];
    for (total, want) in TOTALS.into_iter().zip(pinned) {
        let got = (
            value(HORSE, RIDER, HORSE_RIDER, total),
            value(HORSE, MOLECULE, HORSE_MOLECULE, total),
            value(A, B, AB, total),
            value(A, C, AC, total),
            value(B, C, BC, total),
        );
        for (g, w) in [(got.0, want.0), (got.1, want.1), (got.2, want.2), (got.3, want.3), (got.4, want.4)] {
            assert!((g - w).abs() <= TOL, "Υ={total}: {g} vs {w}");
        }
        assert!(got.0 < got.1, "Υ={total}");
        assert!(got.2 < got.3 && got.2 < got.4, "Υ={total}");
    }
}

/// Serves the published counts as a provider.
struct Table(u64);

impl HitCountProvider for Table {
    fn id(&self) -> &str {
        "table"
    }
    fn lambda(&self, terms: &[String]) -> Result<u64, NgdError> {
        let mut t: Vec<&str> = terms.iter().map(String::as_str).collect();
        t.sort();
        Ok(match t.as_slice() {
            ["horse"] => HORSE,
            ["rider"] => RIDER,
            ["molecule"] => MOLECULE,
            ["horse", "rider"] => HORSE_RIDER,
            ["horse", "molecule"] => HORSE_MOLECULE,
            _ => 0,
        })
    }
    fn total(&self) -> Result<u64, NgdError> {
        Ok(self.0)
    }
}

#[test]
fn provider_path_matches_formula() {
    let r = ngd("horse", "rider", &Table(8_000_000_000)).unwrap();
    assert_eq!(r.value, NgdValue::Finite(value(HORSE, RIDER, HORSE_RIDER, 8_000_000_000)));
    assert_eq!(format!("{}", r.value), "0.838308");
    let none = ngd("rider", "molecule", &Table(8_000_000_000)).unwrap();
    assert_eq!(none.value, NgdValue::Infinite);
    assert!(matches!(
        ngd("horse", "rider", &Table(100_000_000)),
        Err(NgdError::DegenerateTotal { .. })
    ));
}
