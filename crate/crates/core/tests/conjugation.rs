use iterfunc::conjugation::{conj_explog_fn, conj_explog_fn_back, conj_negation, normalize_exponents};
use iterfunc::funcrep::{Extension, GridFunction, Interval};
use proptest::prelude::*;

fn pl_map(slopes: &[f64], interval: Interval) -> GridFunction {
    let n = slopes.len() + 1;
    let total: f64 = slopes.iter().sum();
    let h = interval.width() / slopes.len() as f64;
    let mut ys = vec![interval.lo];
    for s in slopes {
        let last = ys[ys.len() - 1];
        ys.push(last + s / total * slopes.len() as f64 * h);
    }
    ys[n - 1] = interval.hi;
    GridFunction::new(interval.linspace(n), ys, Extension::ClampToEndpointValues).unwrap()
}

proptest! {
    #[test]
    fn explog_round_trip(slopes in prop::collection::vec(0.2f64..5.0, 2..30), c in 0.1f64..3.0, w in 0.5f64..4.0) {
        let j = Interval::new(c, c * (1.0 + w)).unwrap();
        let f = pl_map(&slopes, j.ln().unwrap());
        let back = conj_explog_fn(&conj_explog_fn_back(&f).unwrap()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn negation_is_an_involution(slopes in prop::collection::vec(0.2f64..5.0, 2..30)) {
        let g = pl_map(&slopes, Interval::new(0.5, 3.0).unwrap());
        let twice = conj_negation(&conj_negation(&g, &[2.0, 1.0]).unwrap(), &[2.0, 1.0]).unwrap();
        for x in Interval::new(0.5, 3.0).unwrap().linspace(41) {
            prop_assert!((twice.eval(x).unwrap() - g.eval(x).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_exponents_sum_to_one(alpha in prop::collection::vec(0.01f64..10.0, 1..6)) {
        let (n, sum) = normalize_exponents(&alpha).unwrap();
        prop_assert!((n.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!((sum - alpha.iter().sum::<f64>()).abs() <= 1e-12);
    }
}

#[test]
fn negation_rejects_bad_parity() {
    let g = GridFunction::identity(Interval::new(1.0, 2.0).unwrap());
    assert!(conj_negation(&g, &[1.0, 1.0]).is_err());
    assert!(conj_negation(&g, &[0.5, 0.5]).is_err());
    assert!(conj_negation(&g, &[2.0, 1.0]).is_ok());
}
