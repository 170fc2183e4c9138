use ctipon::pon::DbaMode;
use ctipon::ran::{TrafficKind, UeTrafficProfile};
use ctipon::sim::SimTime;
use ctipon_harness::scenario::{load_scenario, ScenarioConfig, UeSpec};
use proptest::prelude::*;

#[test]
fn every_shipped_scenario_loads() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = load_scenario(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
        assert!(cfg.validate().is_empty());
        names.push(cfg.name);
    }
    names.sort();
    assert_eq!(
        names,
        ["cbr-8mbps", "default", "minimal", "saturated", "zero-traffic"]
    );
}

#[test]
fn default_file_matches_built_in_defaults() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.toml");
    assert_eq!(load_scenario(&path).unwrap(), ScenarioConfig::default());
}

fn traffic() -> impl Strategy<Value = UeTrafficProfile> {
    let kind = prop_oneof![
        Just(TrafficKind::ConstantRate),
        (1u64..50_000, 0u64..50_000, any::<bool>()).prop_map(|(on, off, exponential)| {
            TrafficKind::OnOff {
                on: SimTime::from_micros(on),
                off: SimTime::from_micros(off),
                exponential,
            }
        }),
        (1.0f64..120.0, 1u32..60, 1.0f64..10.0, 0.0f64..1.0).prop_map(|(fps, gop, r, s)| {
            TrafficKind::VideoLike {
                fps,
                gop,
                i_frame_ratio: r,
                size_sigma: s,
            }
        }),
    ];
    (kind, 0.0f64..1e9, 0.0f64..4.0).prop_map(|(kind, mean_rate, scale)| UeTrafficProfile {
        kind,
        mean_rate,
        scale,
    })
}

proptest! {
    #[test]
    fn toml_round_trip_preserves_everything(
        seed in any::<u64>(),
        ms in 1u64..10_000,
        sr in any::<bool>(),
        fiber in 0.0f64..40.0,
        mcs in 0..ctipon::ran::MCS_TABLE.len() as u8,
        t in traffic(),
        name in "[a-z][a-z0-9-]{0,15}",
    ) {
        let mut cfg = ScenarioConfig {
            name,
            seed,
            duration: SimTime::from_millis(ms),
            mode: if sr { DbaMode::Sr } else { DbaMode::Cti },
            ..ScenarioConfig::default()
        };
        cfg.onus[1].fiber_km = fiber;
        cfg.ues.push(UeSpec { ue_id: 7, onu: 1, tcont: 2, mcs, traffic: t });
        prop_assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
        let text = cfg.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
