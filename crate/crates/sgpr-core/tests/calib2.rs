//! Temporary probe (run with --ignored); deleted before release.

use sgpr_core::dictionary_learning::{self as dl, LearnConfig};
use sgpr_core::signal_model::{self, AcquisitionSpec, PulseSpec};

#[test]
#[ignore]
fn cbwlsu_freeze_probe() {
    let pulse = PulseSpec::default();
    let acq = AcquisitionSpec {
        noise_std: 0.02,
        ..AcquisitionSpec::default()
    };
    let classes = signal_model::default_classes();
    let counts = [463usize, 168, 167, 128];
    let ds = signal_model::generate_dataset(&pulse, &classes, &counts, &acq, 7).unwrap();
    let config = LearnConfig {
        seed: 7,
        ..LearnConfig::default()
    };
    let t0 = std::time::Instant::now();
    let _ = dl::cbwlsu(ds.data.view(), &config).unwrap();
    println!("cbwlsu frozen run: {:.1}s", t0.elapsed().as_secs_f64());
}
