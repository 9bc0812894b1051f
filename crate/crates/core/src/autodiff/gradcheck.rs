use super::{Tape, Var};

/// Finite-difference stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FdScheme {
    /// `(f(x+h) − f(x−h)) / 2h`
    #[default]
    Central,
    /// Fourth-order five-point central stencil.
    Central4,
    /// Polynomial extrapolation of central differences over shrinking step
    /// sequences (Ridders), started at `h`, `h/10` and `h/100`; the estimate
    /// with the smallest internal error bound wins. Resolves gradients that
    /// are tiny relative to the function value, where a single stencil
    /// drowns in rounding error.
    Ridders,
}

impl FdScheme {
    pub fn derivative(self, mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        match self {
            FdScheme::Central => (f(x + h) - f(x - h)) / (2.0 * h),
            FdScheme::Central4 => {
                (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
            }
            FdScheme::Ridders => {
                let mut best = (f64::NAN, f64::INFINITY);
                for h0 in [h, h / 10.0, h / 100.0] {
                    let (d, err) = ridders(&mut f, x, h0);
                    if err < best.1 || best.0.is_nan() {
                        best = (d, err);
                    }
                }
                best.0
            }
        }
    }
}

/// Derivative estimate and its error bound.
fn ridders(f: &mut impl FnMut(f64) -> f64, x: f64, h: f64) -> (f64, f64) {
    const SHRINK: f64 = FdScheme::RIDDERS_SHRINK;
    const TABLE: usize = FdScheme::RIDDERS_TABLE;
    const SAFE: f64 = 2.0;
    let shrink2 = SHRINK * SHRINK;
    let mut a = [[0.0f64; TABLE]; TABLE];
    let mut hh = h;
    a[0][0] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..TABLE {
        hh /= SHRINK;
        a[0][i] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
        let mut fac = shrink2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= shrink2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= SAFE * err {
            break;
        }
    }
    (best, err)
}

impl FdScheme {
    const RIDDERS_SHRINK: f64 = 1.4;
    const RIDDERS_TABLE: usize = 10;

    /// Smallest step the stencil evaluates when started at `h`; rounding
    /// error of the estimate scales with `ε·|f| / smallest_step`.
    pub fn smallest_step(self, h: f64) -> f64 {
        match self {
            FdScheme::Central | FdScheme::Central4 => h,
            FdScheme::Ridders => h / 100.0 / Self::RIDDERS_SHRINK.powi(Self::RIDDERS_TABLE as i32 - 1),
        }
    }
}

/// One compared coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub tol: f64,
    /// Absolute agreement accepted below the finite-difference rounding
    /// floor.
    pub atol: f64,
    pub checked: usize,
    /// Coordinates whose gradient magnitude exceeds `atol / tol`, i.e.
    /// where the relative test is actually decided by the oracle.
    pub resolved: usize,
    pub failures: Vec<Coordinate>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|a − b| / max(|a|, |b|, 1e-8)`
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Checks the tape gradient of `f` at `point` against central differences.
///
/// `f` receives the point as a `(1, n)` leaf and must return a scalar.
pub fn gradcheck<F>(mut f: F, point: &[f64], h: f64, tol: f64) -> GradcheckReport
where
    F: FnMut(&mut Tape<f64>, Var) -> Var,
{
    assert!(h > 0.0, "step must be positive");
    let n = point.len();
    let mut tape = Tape::new();
    let x = tape.leaf(point.to_vec(), 1, n);
    let y = f(&mut tape, x);
    let analytic = tape.backward(y).wrt(x);
    let mut eval = |p: &[f64]| {
        let mut t = Tape::new();
        let x = t.constant(p.to_vec(), 1, n);
        let y = f(&mut t, x);
        t.scalar_value(y)
    };
    let coords: Vec<usize> = (0..n).collect();
    gradcheck_coords(&mut eval, &analytic, point, &coords, h, tol, 0.0, FdScheme::Central)
}

/// Compares `grad[i]` against a finite difference of `eval` for each `i`
/// in `coords`. A coordinate passes when its relative error is below `tol`
/// or the absolute difference is at most `atol`.
#[allow(clippy::too_many_arguments)]
pub fn gradcheck_coords(
    mut eval: impl FnMut(&[f64]) -> f64,
    grad: &[f64],
    point: &[f64],
    coords: &[usize],
    h: f64,
    tol: f64,
    atol: f64,
    scheme: FdScheme,
) -> GradcheckReport {
    assert!(h > 0.0, "step must be positive");
    let mut work = point.to_vec();
    let mut report = GradcheckReport {
        tol,
        atol,
        ..Default::default()
    };
    for &i in coords {
        let x0 = point[i];
        let numeric = scheme.derivative(
            |x| {
                work[i] = x;
                eval(&work)
            },
            x0,
            h,
        );
        work[i] = x0;
        let e = rel_err(grad[i], numeric);
        report.checked += 1;
        if grad[i].abs().max(numeric.abs()) * tol > atol {
            report.resolved += 1;
        }
        report.max_rel_err = if e.is_nan() {
            f64::INFINITY
        } else {
            report.max_rel_err.max(e)
        };
        if !(e < tol || (grad[i] - numeric).abs() <= atol) {
            report.failures.push(Coordinate {
                index: i,
                analytic: grad[i],
                numeric,
                rel_err: e,
            });
        }
    }
    report
}
