use ssa_sic::experiments::{flatness_report, sweep, McOverrides, SweepSpec, SweptParameter};
use ssa_sic::sim::{run_campaign, DecodeRule, SystemConfig};
use ssa_sic::{solve_model, ChannelParams, SicModel};

fn params() -> ChannelParams {
    ChannelParams::new(1.0, 1.0, 4.0).unwrap()
}

#[test]
fn threshold_rule_decodes_nearly_everyone_below_target() {
    let model = solve_model(SicModel::Perfect, params()).unwrap();
    let cfg = SystemConfig::for_model(&model, 256, 1, 40, DecodeRule::Threshold { gamma_dec: 0.8 }, 11);
    let stats = run_campaign(&cfg, &model).unwrap();
    assert!(stats.mean_decoded_fraction >= 0.95, "{}", stats.mean_decoded_fraction);
}

#[test]
fn threshold_rule_fails_above_target() {
    let model = solve_model(SicModel::Perfect, params()).unwrap();
    let cfg = SystemConfig::for_model(&model, 64, 1, 40, DecodeRule::Threshold { gamma_dec: 1.5 }, 11);
    let stats = run_campaign(&cfg, &model).unwrap();
    assert!(stats.mean_decoded_fraction < 0.1, "{}", stats.mean_decoded_fraction);
}

#[test]
fn small_mc_sweep_tracks_target() {
    let spec = SweepSpec {
        parameter: SweptParameter::Alpha,
        grid: vec![0.0, 0.5],
        fixed: params(),
        mc: Some(McOverrides {
            spreading_factor: 64,
            packet_len: 2,
            slots: 60,
            ..McOverrides::default()
        }),
    };
    for r in sweep(&spec).unwrap() {
        let mc = r.mc.unwrap();
        assert!((mc.mean_snir - 1.0).abs() < 0.1, "{r:?}");
        assert_eq!(mc.decoded_fraction, 1.0);
    }
}

#[test]
fn flatness_report_for_constant_residual() {
    let model = solve_model(SicModel::ConstantResidual { epsilon: 0.5 }, params()).unwrap();
    let cfg = SystemConfig::for_model(&model, 128, 2, 100, DecodeRule::Genie, 5);
    let rep = flatness_report(&model, &cfg).unwrap();
    assert_eq!(rep.rows.len(), 20);
    assert!(rep.max_abs_snir_deviation < 0.05, "{}", rep.max_abs_snir_deviation);
    let csv = rep.to_csv_string();
    assert_eq!(csv.lines().count(), 22);
}
