use super::{IndexInterval, TauJet};

/// Number of grid intervals used to seed the global maximization over `T`.
pub const GRID_INTERVALS: usize = 100;

const NEWTON_STEPS: usize = 30;
const NEWTON_TOL: f64 = 1e-12;

/// Maximizes a smooth scalar function over `interval`.
///
/// The function is sampled on `GRID_INTERVALS + 1` uniform points; the best
/// sample seeds a projected Newton iteration on the derivative. Newton steps
/// are only taken where the function is locally concave and are clipped to one
/// grid spacing. Returns `(τ*, value)`; the value is never below the best grid
/// value.
pub fn maximize_on_interval(interval: IndexInterval, jet: impl Fn(f64) -> TauJet) -> (f64, f64) {
    let h = (interval.t_max() - interval.t_min()) / GRID_INTERVALS as f64;
    let mut best = (interval.t_min(), f64::NEG_INFINITY);
    for tau in interval.grid(GRID_INTERVALS) {
        let v = jet(tau).value;
        if v > best.1 {
            best = (tau, v);
        }
    }

    let mut tau = best.0;
    for _ in 0..NEWTON_STEPS {
        let j = jet(tau);
        if j.value > best.1 {
            best = (tau, j.value);
        }
        if !(j.d2 < 0.0) {
            break;
        }
        let step = (-j.d1 / j.d2).clamp(-h, h);
        let next = interval.clamp(tau + step);
        let moved = (next - tau).abs();
        tau = next;
        if moved <= NEWTON_TOL {
            break;
        }
    }
    let v = jet(tau).value;
    if v > best.1 {
        best = (tau, v);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit() -> IndexInterval {
        IndexInterval::unit()
    }

    #[test]
    fn concave_parabola_vertex() {
        let (tau, v) = maximize_on_interval(unit(), |t| TauJet {
            value: t * (1.0 - t) - 0.3,
            d1: 1.0 - 2.0 * t,
            d2: -2.0,
        });
        assert!((tau - 0.5).abs() <= 1e-12);
        assert!((v + 0.05).abs() <= 1e-14);
    }

    #[test]
    fn off_grid_vertex_is_refined() {
        let c = 0.123456789;
        let (tau, v) = maximize_on_interval(unit(), |t| TauJet {
            value: -(t - c).powi(2),
            d1: -2.0 * (t - c),
            d2: -2.0,
        });
        assert!((tau - c).abs() <= 1e-12);
        assert!(v.abs() <= 1e-20);
    }

    #[test]
    fn flat_function() {
        let (tau, v) = maximize_on_interval(unit(), |_| TauJet {
            value: -1.0,
            d1: 0.0,
            d2: 0.0,
        });
        assert_eq!(v, -1.0);
        assert!((0.0..=1.0).contains(&tau));
    }

    #[test]
    fn sine_peak() {
        let w = 9.0 * PI;
        let (tau, v) = maximize_on_interval(unit(), |t| TauJet {
            value: (w * t).sin(),
            d1: w * (w * t).cos(),
            d2: -w * w * (w * t).sin(),
        });
        assert!((v - 1.0).abs() <= 1e-10);
        assert!(tau > 0.0 && tau < 1.0);
    }

    #[test]
    fn boundary_maximum() {
        let (tau, v) = maximize_on_interval(unit(), |t| TauJet {
            value: t - 2.0,
            d1: 1.0,
            d2: 0.0,
        });
        assert_eq!(tau, 1.0);
        assert_eq!(v, -1.0);
    }

    proptest::proptest! {
        #[test]
        fn never_worse_than_grid(a in -5.0f64..5.0, b in -5.0f64..5.0, c in 1.0f64..30.0) {
            let f = |t: f64| a * (c * t).sin() + b * t * t;
            let (_, v) = maximize_on_interval(unit(), |t| TauJet {
                value: f(t),
                d1: a * c * (c * t).cos() + 2.0 * b * t,
                d2: -a * c * c * (c * t).sin() + 2.0 * b,
            });
            let grid_best = unit().grid(GRID_INTERVALS).map(f).fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(v >= grid_best);
        }
    }
}
