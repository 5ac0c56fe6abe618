use std::f64::consts::TAU;

use antijam_core::array::UpaGeometry;
use antijam_core::impairments::{
    cosine_similarity, impaired_pattern, quantize_phase, realized_weights, resolution, sample_errors,
    select_codes_cosine, select_codes_naive, ChannelErrors, ImpairmentModel, PhaseMap, Similarity,
};
use antijam_core::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn quantization_error_is_within_half_step() {
    for bits in 3..=8 {
        let d = resolution(bits);
        let levels = 1u32 << bits;
        let fine = (0..200_000).map(|i| -2.0 * TAU + 4.0 * TAU * i as f64 / 200_000.0);
        let edges = (0..2 * levels).map(|k| k as f64 * d / 2.0);
        for phi in fine.chain(edges) {
            let (code, err) = quantize_phase(phi, bits).unwrap();
            assert!(code < levels);
            assert!(err.abs() <= d / 2.0 + 1e-12, "bits {bits} phi {phi} err {err}");
            let back = code as f64 * d + err;
            assert!((Complex64::cis(back) - Complex64::cis(phi)).norm() < 1e-9);
        }
    }
}

fn random_ideal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::cis(rng.random_range(-3.2..3.2)))
}

#[test]
fn cosine_selection_never_loses_to_rounding() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let geom = UpaGeometry::new(10, 100).unwrap();
    let bits = 6;
    let model = ImpairmentModel {
        errors: ChannelErrors::zero(&geom),
        bits: Some(bits),
        phase_map: Some(PhaseMap::synthetic(geom.channels(), bits, resolution(bits), 7).unwrap()),
    };
    let ideal = random_ideal(&mut rng, 10, 100);
    let chosen = realized_weights(&select_codes_cosine(&ideal, &model).unwrap(), &model).unwrap();
    let naive = realized_weights(&select_codes_naive(&ideal, bits).unwrap(), &model).unwrap();
    for c in 0..geom.channels() {
        let (m, n) = (c / 100, c % 100);
        let score = |w: &DMatrix<Complex64>| (ideal[(m, n)].conj() * w[(m, n)]).re;
        assert!(score(&chosen) >= score(&naive) - 1e-15, "channel {c}");
    }
    let flat = |w: &DMatrix<Complex64>| w.iter().copied().collect::<Vec<_>>();
    assert!(
        cosine_similarity(&flat(&ideal), &flat(&chosen)).unwrap()
            >= cosine_similarity(&flat(&ideal), &flat(&naive)).unwrap()
    );
}

fn cut(step: f64) -> Vec<(f64, f64)> {
    let n = (180.0 / step) as usize;
    (0..=n).map(|i| (-90.0 + i as f64 * step, 0.0)).collect()
}

#[test]
fn zero_impairment_gives_identical_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let geom = UpaGeometry::new(4, 8).unwrap();
    let ideal = random_ideal(&mut rng, 4, 8);
    let p = impaired_pattern(&ideal, &ImpairmentModel::ideal(&geom), &geom, &cut(1.0), Similarity::RealPart).unwrap();
    assert_eq!(p.ideal, p.uncorrected);
    assert_eq!(p.ideal, p.compensated);
}

#[test]
fn quantization_only_error_is_bounded_by_array_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let geom = UpaGeometry::new(8, 16).unwrap();
    let bits = 6;
    let model = ImpairmentModel {
        errors: ChannelErrors::zero(&geom),
        bits: Some(bits),
        phase_map: None,
    };
    let ideal = random_ideal(&mut rng, 8, 16);
    let bound: f64 = ideal.iter().map(|w| w.norm()).sum::<f64>() * resolution(bits) / 2.0;
    let p = impaired_pattern(&ideal, &model, &geom, &cut(0.5), Similarity::RealPart).unwrap();
    for (a, b) in p.ideal.iter().zip(&p.uncorrected) {
        assert!((a - b).norm() <= bound);
    }
}

#[test]
fn sampled_errors_are_seeded() {
    let geom = UpaGeometry::new(8, 16).unwrap();
    let a = sample_errors(&geom, 0.1, 0.3, 4).unwrap();
    assert_eq!(a, sample_errors(&geom, 0.1, 0.3, 4).unwrap());
    assert_ne!(a, sample_errors(&geom, 0.1, 0.3, 5).unwrap());
}
