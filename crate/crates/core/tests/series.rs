use gliaskel::metrics::evaluate;
use gliaskel::phantom::{generate_series, PhantomSpec};
use gliaskel::temporal::{frame_objective, run_series, MorphConfig, SeriesOptions};
use gliaskel::Volume3;

fn noisy(seed: u64, noise: f64, motion: f64, frames: usize) -> Vec<gliaskel::phantom::Phantom> {
    let spec = PhantomSpec {
        seed,
        noise_sigma: noise,
        motion_amplitude: motion,
        ..PhantomSpec::default()
    };
    generate_series(&spec, frames).unwrap()
}

/// Faint positive noise everywhere must not weaken the move charges: on
/// static noisy frames the skeleton settles after the first morph instead of
/// drifting a little further every frame.
#[test]
fn static_noisy_frames_do_not_drift() {
    let series = noisy(1, 0.05, 0.0, 5);
    let frames: Vec<Volume3> = series.iter().map(|p| p.image.clone()).collect();
    let out = run_series(
        &frames,
        &series[0].mask,
        &MorphConfig::default(),
        &SeriesOptions::default(),
    )
    .unwrap();
    for t in 2..out.len() {
        assert_eq!(out[t].skeleton, out[1].skeleton, "frame {t} moved");
    }
    for (t, f) in out.iter().enumerate() {
        let r = evaluate(&f.skeleton, &series[t].skeleton, 2.0).unwrap();
        assert_eq!(r.weighted_accuracy_normalized, 1.0, "frame {t}");
    }
}

#[test]
fn moving_noisy_series_keeps_matching() {
    let series = noisy(2, 0.05, 2.0, 5);
    let frames: Vec<Volume3> = series.iter().map(|p| p.image.clone()).collect();
    let out = run_series(
        &frames,
        &series[0].mask,
        &MorphConfig::default(),
        &SeriesOptions::default(),
    )
    .unwrap();
    for (t, f) in out.iter().enumerate() {
        let r = evaluate(&f.skeleton, &series[t].skeleton, 2.0).unwrap();
        assert_eq!(r.weighted_accuracy_normalized, 1.0, "frame {t}");
    }
}

#[test]
fn map_maximum_ignores_faint_background() {
    let clean = noisy(3, 0.0, 0.0, 1);
    let dirty = noisy(3, 0.1, 0.0, 1);
    let opts = SeriesOptions::default();
    let a = frame_objective(&clean[0].image, &opts).unwrap();
    let b = frame_objective(&dirty[0].image, &opts).unwrap();
    let (ma, mb) = (a.max_value(), b.max_value());
    assert!((ma - mb).abs() < 0.05 * ma, "{ma} vs {mb}");
    // the positive mean, by contrast, is dominated by the background count
    assert!(b.x_avg < 0.2 * a.x_avg);
}
