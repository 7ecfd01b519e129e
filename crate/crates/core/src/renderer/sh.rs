//! Second-order real spherical harmonics lighting.

use nalgebra::Vector3;

use crate::scene_sampler::SH_COEFFICIENTS;

const Y00: f64 = 0.282_094_791_773_878_14; // 1 / (2 sqrt(pi))
const Y1: f64 = 0.488_602_511_902_919_9; // sqrt(3 / 4pi)
const Y2_XY: f64 = 1.092_548_430_592_079_2; // sqrt(15 / 4pi)
const Y2_Z2: f64 = 0.315_391_565_252_520_05; // sqrt(5 / 16pi)
const Y2_X2Y2: f64 = 0.546_274_215_296_039_6; // sqrt(15 / 16pi)

/// Basis values at a unit direction, ordered
/// `Y00; y, z, x; xy, yz, 3z²−1, xz, x²−y²`.
pub fn sh_basis(n: &Vector3<f64>) -> [f64; SH_COEFFICIENTS] {
    let (x, y, z) = (n.x, n.y, n.z);
    [
        Y00,
        Y1 * y,
        Y1 * z,
        Y1 * x,
        Y2_XY * x * y,
        Y2_XY * y * z,
        Y2_Z2 * (3.0 * z * z - 1.0),
        Y2_XY * x * z,
        Y2_X2Y2 * (x * x - y * y),
    ]
}

/// Unclamped irradiance for a world-space unit normal.
pub fn irradiance(n: &Vector3<f64>, coeffs: &[f64; SH_COEFFICIENTS]) -> f64 {
    sh_basis(n).iter().zip(coeffs).map(|(y, c)| y * c).sum()
}

/// Linear shaded color: albedo scaled by the clamped irradiance.
pub fn shade_sh(
    normal_world: &Vector3<f64>,
    albedo: [f64; 3],
    coeffs: &[f64; SH_COEFFICIENTS],
) -> [f64; 3] {
    let e = irradiance(normal_world, coeffs).max(0.0);
    albedo.map(|a| a * e)
}

pub fn to_u8(value: f64) -> u8 {
    (255.0 * value).round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    #[test]
    fn constants_match_closed_forms() {
        assert!((Y00 - 0.5 / PI.sqrt()).abs() < 1e-15);
        assert!((Y1 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((Y2_XY - (15.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((Y2_Z2 - (5.0 / (16.0 * PI)).sqrt()).abs() < 1e-15);
        assert!((Y2_X2Y2 - (15.0 / (16.0 * PI)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ambient_only_is_uniform() {
        let mut c = [0.0; 9];
        c[0] = 1.0;
        for n in [
            Vector3::x(),
            -Vector3::y(),
            Vector3::new(1.0, 2.0, -2.0) / 3.0,
        ] {
            assert!((irradiance(&n, &c) - 0.2821).abs() < 1e-4);
            let rgb = shade_sh(&n, [1.0; 3], &c);
            assert!(rgb.iter().all(|v| (v - 0.282_094_79).abs() < 1e-8));
        }
    }

    #[test]
    fn black_albedo_stays_black() {
        let c = [0.7; 9];
        let rgb = shade_sh(&Vector3::y(), [0.0; 3], &c);
        assert_eq!(rgb.map(to_u8), [0, 0, 0]);
    }

    #[test]
    fn vertical_band_one_is_odd() {
        let mut c = [0.0; 9];
        c[crate::scene_sampler::VERTICAL_SH_INDEX] = 0.6;
        let n = Vector3::new(0.3, 0.8, -0.52).normalize();
        let flipped = Vector3::new(n.x, -n.y, n.z);
        assert!((irradiance(&n, &c) + irradiance(&flipped, &c)).abs() < 1e-15);
        assert!(irradiance(&n, &c) > 0.0);
    }

    #[test]
    fn quantization_rounds_and_clamps() {
        assert_eq!(to_u8(-0.2), 0);
        assert_eq!(to_u8(2.0), 255);
        assert_eq!(to_u8(0.5), 128);
        assert_eq!(to_u8(0.2821), 72);
    }

    #[test]
    fn monte_carlo_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let mut gram = [[0.0f64; 9]; 9];
        for _ in 0..n {
            let v = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
            .normalize();
            let y = sh_basis(&v);
            for i in 0..9 {
                for j in i..9 {
                    gram[i][j] += y[i] * y[j];
                }
            }
        }
        let scale = 4.0 * PI / n as f64;
        for i in 0..9 {
            for j in i..9 {
                let expected = if i == j { 1.0 } else { 0.0 };
                let got = gram[i][j] * scale;
                assert!((got - expected).abs() <= 5e-3, "<Y{i},Y{j}> = {got}");
            }
        }
    }
}
