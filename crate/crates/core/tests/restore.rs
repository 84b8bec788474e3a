use std::time::Duration;

use adaptive_restore::features::extract_features;
use adaptive_restore::imaging::{decode, encode_ppm, Image};
use adaptive_restore::restore::*;
use adaptive_restore::synth::{apply_degradation, scene, DegradationKind};
use proptest::prelude::*;

#[test]
fn denoising_leaves_constant_image() {
    let img = Image::filled(20, 20, [0.37, 0.5, 0.81]).unwrap();
    let out = restore(DegradationKind::Denoising, &img, &RestorerRegistry::default()).unwrap();
    let max = img.samples().iter().zip(out.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(max < 1e-6);
}

#[test]
fn super_resolution_doubles() {
    let img = scene::generate(64, 64, 1);
    let out = restore(DegradationKind::SuperResolution, &img, &RestorerRegistry::default()).unwrap();
    assert_eq!(out.dims(), (128, 128));
}

#[test]
fn other_kinds_keep_dimensions() {
    let img = scene::generate(40, 24, 2);
    let reg = RestorerRegistry::default();
    for kind in DegradationKind::ALL.into_iter().filter(|k| *k != DegradationKind::SuperResolution) {
        assert_eq!(restore(kind, &img, &reg).unwrap().dims(), (40, 24), "{kind}");
    }
}

#[test]
fn oversize_upscale_rejected() {
    let img = Image::filled(2049, 1, [0.5; 3]).unwrap();
    assert_eq!(
        restore(DegradationKind::SuperResolution, &img, &RestorerRegistry::default()),
        Err(RestoreError::OversizeForUpscale { width: 2049, height: 1 })
    );
}

#[test]
fn outdoor_dehaze_raises_contrast() {
    let clean = scene::generate(128, 128, 11);
    let foggy = apply_degradation(&clean, DegradationKind::DehazingOutdoor, 0.7, 3);
    let out = restore(DegradationKind::DehazingOutdoor, &foggy, &RestorerRegistry::default()).unwrap();
    assert!(extract_features(&out).unwrap()[5] > extract_features(&foggy).unwrap()[5]);
}

#[test]
fn template_needs_both_placeholders() {
    for bad in ["cp {in} out.ppm", "true", "convert {out}"] {
        assert!(matches!(
            RestorerRegistry::default().set_external(DegradationKind::Denoising, bad),
            Err(RestoreError::TemplateInvalid(_))
        ));
    }
}

#[test]
fn identity_hook_round_trips_through_8_bit() {
    let img = scene::generate(24, 16, 5);
    let reg = RestorerRegistry::default().set_external(DegradationKind::Deraining, "cp {in} {out}").unwrap();
    let (out, warning) = reg.restore_reporting(DegradationKind::Deraining, &img).unwrap();
    assert!(warning.is_none());
    assert_eq!(out, decode(&encode_ppm(&img)).unwrap());
}

#[test]
fn failing_hook_falls_back() {
    let img = scene::generate(24, 16, 6);
    let reg = RestorerRegistry::default().set_external(DegradationKind::Enhancement, "exit 3 # {in} {out}").unwrap();
    let (out, warning) = reg.restore_reporting(DegradationKind::Enhancement, &img).unwrap();
    assert!(warning.unwrap().contains("exited"));
    assert_eq!(out, reg.builtin(DegradationKind::Enhancement, &img).unwrap());
}

#[test]
fn slow_hook_times_out_and_falls_back() {
    let img = scene::generate(24, 16, 7);
    let reg = RestorerRegistry::default()
        .set_external_with_timeout(DegradationKind::Deblurring, "sleep 5; cp {in} {out}", Duration::from_millis(200))
        .unwrap();
    let start = std::time::Instant::now();
    let (out, warning) = reg.restore_reporting(DegradationKind::Deblurring, &img).unwrap();
    assert!(start.elapsed() < Duration::from_secs(3));
    assert!(warning.unwrap().contains("timed out"));
    assert_eq!(out, reg.builtin(DegradationKind::Deblurring, &img).unwrap());
}

#[test]
fn params_deserialize_by_kind_key() {
    let p: RestorerParams = toml::from_str("[deblurring]\namount = 1.2\n[dehazing_indoor]\nomega = 0.8\n").unwrap();
    assert_eq!(p.deblurring.amount, 1.2);
    assert_eq!(p.deblurring.sigma, 1.5);
    assert_eq!(p.dehazing_indoor.omega, 0.8);
    assert_eq!(p.dehazing_indoor.airlight, Some(0.85));
    assert_eq!(p.dehazing_outdoor.airlight, None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn applying_twice_stays_in_range(seed in 0u64..10_000, k in 0usize..7) {
        let kind = DegradationKind::from_index(k).unwrap();
        let reg = RestorerRegistry::default();
        let img = scene::generate(24, 20, seed);
        let twice = restore(kind, &restore(kind, &img, &reg).unwrap(), &reg).unwrap();
        prop_assert!(twice.samples().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
