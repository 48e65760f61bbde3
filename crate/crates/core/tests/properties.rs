use dmim3d::constellation::{SubblockBits, System, SystemConfig};
use dmim3d::detectors::{Detector, LlrDetector, MlDetector};
use dmim3d::phy::{simulate_block, snr_to_n0};
use dmim3d::seed::stream_rng;
use dmim3d::transd3d::{decode, initial_params, one_hot, read_params, write_params, NetDims};
use proptest::prelude::*;

fn system_strategy() -> impl Strategy<Value = SystemConfig> {
    (2usize..=8, prop::sample::select(vec![2usize, 4]))
        .prop_flat_map(|(n, s)| (Just(n), 1..n, Just(s)))
        .prop_filter_map("needs at least one index bit", |(n, k, s)| {
            SystemConfig::new(n, k, s, s).ok()
        })
}

proptest! {
    #[test]
    fn modulation_and_labels_invert(cfg in system_strategy(), seed in any::<u64>()) {
        let sys = System::new(cfg).unwrap();
        let bits = SubblockBits::random(&mut stream_rng(seed, 0, 0), &cfg);
        prop_assert_eq!(&sys.decode(&sys.encode(&bits).unwrap()).unwrap(), &bits);
        let label = one_hot(&sys.symbols_of(&bits).unwrap(), &cfg);
        prop_assert_eq!(&decode(&label, &sys), &bits);
    }

    #[test]
    fn detectors_return_legal_subblocks(seed in any::<u64>(), snr in -5.0f64..40.0) {
        let sys = System::new(SystemConfig::scenario2()).unwrap();
        let n0 = snr_to_n0(snr);
        let tr = simulate_block(&sys, n0, &mut stream_rng(seed, 1, 0));
        for det in [&MlDetector::new(&sys).unwrap() as &dyn Detector, &LlrDetector::new(&sys)] {
            let bits = det.detect(&tr.rx, &tr.channel, n0);
            prop_assert_eq!(bits.to_flat().len(), sys.config.p);
            prop_assert!(sys.encode(&bits).is_ok());
        }
    }

    #[test]
    fn weights_round_trip(seed in any::<u64>(), d_model in 1usize..6, d_mlp in 1usize..9, scenario2 in any::<bool>()) {
        let cfg = if scenario2 { SystemConfig::scenario2() } else { SystemConfig::scenario1() };
        let dims = NetDims::new(cfg, 2 * d_model, 2, d_mlp).unwrap();
        let p = initial_params(seed, dims);
        prop_assert_eq!(read_params(&write_params(&p)).unwrap(), p);
    }
}
