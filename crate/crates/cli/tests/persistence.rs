use std::sync::Arc;

use bayescal::io::{read_chain_csv, write_chain_csv};
use bayescal_core::sampler::ChainMeta;
use bayescal_core::{Chain, SamplerOptions};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

prop_compose! {
    fn arb_chain()(
        dim in 1usize..5,
        len in 0usize..120,
        id in 0usize..64,
        seed in any::<u64>(),
        rate in 0.0f64..=1.0,
    )(
        names in prop::collection::vec("[A-Za-z][A-Za-z0-9 ,()>_\"-]{0,12}", dim),
        values in prop::collection::vec(finite(), dim * len),
        lp in prop::collection::vec(finite(), len),
        gof in prop::collection::vec(0.0f64..1e12, len),
        acc in prop::collection::vec(any::<bool>(), len),
        id in Just(id), seed in Just(seed), rate in Just(rate), dim in Just(dim), len in Just(len),
    ) -> Chain {
        let meta = ChainMeta {
            chain_id: id,
            seed,
            model_id: "prop".into(),
            options: SamplerOptions::new(10 * len as u64 + 10, 5, 1).unwrap(),
            acceptance_rate: rate,
        };
        let names: Arc<[String]> = names.into();
        let mut c = Chain::new(meta, names);
        for i in 0..len {
            c.push(i as u64 * 3 + 7, &values[i * dim..(i + 1) * dim], lp[i], gof[i], acc[i]);
        }
        c
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_csv_round_trip_is_bit_exact(chain in arb_chain()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("chain.csv");
        write_chain_csv(&chain, &p).unwrap();
        let back = read_chain_csv(&p).unwrap();
        prop_assert_eq!(&back, &chain);
        for i in 0..chain.len() {
            for (a, b) in back.state(i).iter().zip(chain.state(i)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn thousand_state_round_trip() {
    let meta = ChainMeta {
        chain_id: 3,
        seed: 9,
        model_id: "sis".into(),
        options: SamplerOptions::with_defaults(12_500).unwrap(),
        acceptance_rate: 0.21,
    };
    let names: Arc<[String]> = vec!["c".into(), "p".into(), "d".into()].into();
    let mut c = Chain::new(meta, names);
    for i in 0..1000u64 {
        let x = i as f64;
        c.push(
            2500 + 10 * (i + 1),
            &[9.0 + (x * 0.1).sin(), 0.06 + 1e-17 * x, 1.0 / 3.0 + x],
            -x.sqrt(),
            x / 3.0,
            i % 2 == 0,
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("chain_3.csv");
    write_chain_csv(&c, &p).unwrap();
    assert_eq!(read_chain_csv(&p).unwrap(), c);
}

#[test]
fn seventeen_significant_digits() {
    assert_eq!(bayescal::io::fmt_f64(0.1), "1.0000000000000001e-1");
    for x in [
        f64::MIN_POSITIVE,
        f64::MAX,
        1.0 / 3.0,
        -2.5e-310,
        std::f64::consts::PI,
    ] {
        assert_eq!(
            bayescal::io::fmt_f64(x).parse::<f64>().unwrap().to_bits(),
            x.to_bits()
        );
    }
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("chain_0.csv");
    let header = "chain_id,iteration,a,log_posterior,gof,accepted\n";
    let cases = [
        ("0,1,0.5,-1.0,2.0\n", "line 2"),
        ("0,1,0.5,-1.0,2.0,1\n0,2,abc,-1.0,2.0,1\n", "line 3"),
        ("0,1,0.5,-1.0,2.0,yes\n", "line 2"),
        ("0,1,0.5,-1.0,2.0,1\n1,2,0.5,-1.0,2.0,1\n", "line 3"),
    ];
    for (body, line) in cases {
        std::fs::write(&p, format!("{header}{body}")).unwrap();
        let msg = read_chain_csv(&p).unwrap_err().to_string();
        assert!(msg.contains(line), "{body:?}: {msg}");
    }
}
