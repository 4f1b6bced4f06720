use crate::scalar::Real;

/// Reference power used by [`intensity_db`].
pub const INTENSITY_REF: f64 = 2e-5;
/// Mean-square floor applied before taking the logarithm in [`intensity_db`].
pub const INTENSITY_FLOOR: f64 = 1e-12;

/// Mean of `(x[n] w[n])^2` over the windowed frame.
pub fn frame_energy<T: Real>(windowed: &[T]) -> T {
    if windowed.is_empty() {
        return T::zero();
    }
    windowed.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(windowed.len())
}

/// Fraction of adjacent sample pairs whose sign differs, with `sgn(0) = +1`.
/// Taken on the raw slice; the count is divided by the frame length.
pub fn zero_crossing_rate<T: Real>(raw: &[T]) -> T {
    if raw.len() < 2 {
        return T::zero();
    }
    let crossings = raw
        .windows(2)
        .filter(|w| (w[0] >= T::zero()) != (w[1] >= T::zero()))
        .count();
    T::from_usize_lossy(crossings) / T::from_usize_lossy(raw.len())
}

/// `10 log10(mean((x w)^2) / 2e-5)` with the mean square floored at 1e-12.
pub fn intensity_db<T: Real>(windowed: &[T]) -> T {
    let ms = frame_energy(windowed).max(T::lit(INTENSITY_FLOOR));
    T::lit(10.0) * (ms / T::lit(INTENSITY_REF)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_examples() {
        assert_eq!(frame_energy(&[0.0f64; 8]), 0.0);
        assert_eq!(frame_energy(&[2.0f64, 2.0, 2.0]), 4.0);
        assert_eq!(frame_energy(&[1.0f64, -1.0, 1.0]), 1.0);
    }

    #[test]
    fn zcr_examples() {
        assert_eq!(zero_crossing_rate(&[0.3f64; 10]), 0.0);
        assert_eq!(zero_crossing_rate(&[1.0f64, -1.0, 1.0, -1.0]), 0.75);
        assert_eq!(zero_crossing_rate(&[1.0f64, 1.0, -1.0, -1.0]), 0.25);
        // sgn(0) = +1: silence and 0 -> positive are not crossings
        assert_eq!(zero_crossing_rate(&[0.0f64, 0.0, 1.0, 0.0]), 0.0);
        assert_eq!(zero_crossing_rate(&[0.0f64, -1.0]), 0.5);
    }

    #[test]
    fn intensity_examples() {
        // mean square 2e-5 -> log argument 1
        let x = [2e-5f64.sqrt(); 4];
        assert!(intensity_db(&x).abs() < 1e-9);
        let x = [2e-4f64.sqrt(); 4];
        assert!((intensity_db(&x) - 10.0).abs() < 1e-9);
        let floor = 10.0 * (1e-12f64 / 2e-5).log10();
        assert!((intensity_db(&[0.0f64; 4]) - floor).abs() < 1e-12);
        assert!((floor + 73.0103).abs() < 1e-4);
    }
}
