use antijam_core::array::{local_angle, steering_vector, UlaGeometry};
use antijam_core::linalg::CVec;
use antijam_core::metrics::{composite_pattern, los_channel, per_ap_steering, sinr, sum_rate};
use antijam_core::Complex64;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn composite_pattern_matches_dense_block_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let l = rng.random_range(1..6);
        let n = rng.random_range(2..12);
        let geom = UlaGeometry::half_wavelength(n).unwrap();
        let orient: Vec<f64> = (0..l).map(|_| rng.random_range(-10.0..10.0)).collect();
        let angles: Vec<f64> = (0..15).map(|_| rng.random_range(-80.0..80.0)).collect();
        let analog: Vec<CVec> = (0..l)
            .map(|_| (0..n).map(|_| Complex64::cis(rng.random_range(-3.2..3.2))).collect())
            .collect();
        let w_bb: CVec = (0..l)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let steering = per_ap_steering(&geom, &orient, &angles).unwrap();
        let fast = composite_pattern(&w_bb, &analog, &steering).unwrap();
        let mut w_rf = DMatrix::<Complex64>::zeros(l * n, l);
        for (j, w) in analog.iter().enumerate() {
            for (i, z) in w.iter().enumerate() {
                w_rf[(j * n + i, j)] = *z;
            }
        }
        let wb = DMatrix::from_column_slice(l, 1, &w_bb);
        for (k, &theta) in angles.iter().enumerate() {
            let mut a = DMatrix::<Complex64>::zeros(l * n, 1);
            for (j, &o) in orient.iter().enumerate() {
                for (i, z) in steering_vector(&geom, local_angle(theta, o)).unwrap().iter().enumerate() {
                    a[(j * n + i, 0)] = *z;
                }
            }
            let dense = (wb.adjoint() * w_rf.adjoint() * a)[(0, 0)];
            assert!((dense - fast[k]).norm() <= 1e-10 * (1.0 + dense.norm()));
        }
    }
}

proptest! {
    #[test]
    fn sum_rate_is_monotone(base in prop::collection::vec(0.0f64..100.0, 1..8), idx in 0usize..8, bump in 0.0f64..10.0) {
        let i = idx % base.len();
        let mut more = base.clone();
        more[i] += bump;
        prop_assert!(sum_rate(&more).unwrap() >= sum_rate(&base).unwrap());
    }
}

#[test]
fn jammer_in_thirty_db_null_costs_little_sinr() {
    let n = 8;
    let geom = UlaGeometry::half_wavelength(n).unwrap();
    let analog: Vec<CVec> = vec![steering_vector(&geom, 0.0).unwrap()];
    let w_bb = vec![Complex64::new(1.0, 0.0)];
    let orient = [0.0];
    let gain_db = |theta: f64| {
        let r = composite_pattern(&w_bb, &analog, &per_ap_steering(&geom, &orient, &[theta]).unwrap()).unwrap();
        20.0 * (r[0].norm() / n as f64).log10()
    };
    // the first pattern zero sits at asin(2 / n); walk back toward broadside to -30 dB
    let zero = (2.0 / n as f64).asin().to_degrees();
    let (mut lo, mut hi) = (0.5 * zero, zero);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gain_db(mid) > -30.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let jam_angle = hi;
    assert!(gain_db(jam_angle) <= -30.0);
    let user = los_channel(&geom, &orient, 0.0, &[1.0]).unwrap();
    let jammer = los_channel(&geom, &orient, jam_angle, &[10f64.powf(0.5)]).unwrap();
    let clean = sinr(&w_bb, &analog, &user, &[], 1.0).unwrap();
    let jammed = sinr(&w_bb, &analog, &user, &[jammer], 1.0).unwrap();
    let loss_db = 10.0 * (clean / jammed).log10();
    assert!(loss_db <= 0.5, "loss {loss_db} dB");
}

#[test]
fn more_aps_raise_sum_rate_on_los_channels() {
    let geom = UlaGeometry::half_wavelength(16).unwrap();
    let users = [0.0, 20.0];
    let mut last = 0.0;
    for l in 2..=10 {
        let orient = vec![0.0; l];
        let gains = vec![1.0; l];
        let rates: Vec<f64> = users
            .iter()
            .map(|&t| {
                let analog: Vec<CVec> = vec![steering_vector(&geom, t).unwrap(); l];
                let w_bb: CVec = vec![Complex64::new(1.0, 0.0); l];
                let h = los_channel(&geom, &orient, t, &gains).unwrap();
                sinr(&w_bb, &analog, &h, &[], 1.0).unwrap()
            })
            .collect();
        let r = sum_rate(&rates).unwrap();
        assert!(r > last, "L={l}: {r} <= {last}");
        last = r;
    }
}
