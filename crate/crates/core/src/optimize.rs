//! One-dimensional bracket minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Debug)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    /// Best value seen after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once
/// the bracket is narrower than `xtol`.
pub fn golden_section_min<F>(mut f: F, a: f64, b: f64, xtol: f64) -> GoldenResult
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let (mut best_x, mut best) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let mut trace = vec![best];

    while hi - lo > xtol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
            if f1 < best {
                best = f1;
                best_x = x1;
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
            if f2 < best {
                best = f2;
                best_x = x2;
            }
        }
        trace.push(best);
        if trace.len() > 500 {
            break;
        }
    }
    GoldenResult {
        x: best_x,
        value: best,
        trace,
    }
}
