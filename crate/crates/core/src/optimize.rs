//! One-dimensional maximization of unimodal functions.

/// 1/φ where φ is the golden ratio.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub argmax: f64,
    pub value: f64,
    /// Width of the final bracket.
    pub bracket: f64,
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Iterates until the bracket is no wider than `tol`, then returns the best
/// point seen, including the bracket ends. The interior points are reused
/// so that each iteration costs one evaluation.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Maximum
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo < hi && tol > 0.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;

    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
    }

    let (mut argmax, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    for end in [a, b] {
        let fe = f(end);
        evaluations += 1;
        if fe > value {
            argmax = end;
            value = fe;
        }
    }
    Maximum {
        argmax,
        value,
        bracket: b - a,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum_of_parabola() {
        let m = golden_section_max(|x| -(x + 1.3) * (x + 1.3) + 2.0, -32.0, -1e-4, 1e-6);
        assert!((m.argmax + 1.3).abs() < 1e-6);
        assert!((m.value - 2.0).abs() < 1e-12);
        assert!(m.bracket <= 1e-6);
    }

    #[test]
    fn boundary_maximum_is_found() {
        let m = golden_section_max(|x| x, -5.0, -1.0, 1e-8);
        assert_eq!(m.argmax, -1.0);
        let m = golden_section_max(|x| -x, -5.0, -1.0, 1e-8);
        assert_eq!(m.argmax, -5.0);
    }

    #[test]
    fn evaluation_count_is_logarithmic() {
        let m = golden_section_max(|x| -(x * x), -32.0, 1.0, 1e-6);
        // log(33e6) / log(phi) ≈ 36 iterations.
        assert!(m.evaluations < 45, "{}", m.evaluations);
    }
}
