use std::collections::VecDeque;

/// Limited-memory BFGS with a strong-Wolfe line search.
#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once `|∇f| ≤ gtol`.
    pub gtol: f64,
    /// Stop when an accepted step lowers `f` by less than `ftol · max(|f|, 1)`.
    pub ftol: f64,
    /// Curvature constant of the strong Wolfe conditions; small values approach an exact line search.
    pub curvature: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 12, max_iters: 500, gtol: 1e-10, ftol: 0.0, curvature: 0.1 }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub reason: &'static str,
}

const C1: f64 = 1e-4;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn along(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

struct Counted<'a, E> {
    f: &'a mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    calls: usize,
}

impl<E> Counted<'_, E> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), E> {
        self.calls += 1;
        (self.f)(x)
    }
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept inside
/// the central 80% of the bracket.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    let w = hi - lo;
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let guess = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        f64::NAN
    };
    if guess.is_finite() {
        guess.clamp(lo + 0.1 * w, hi - 0.1 * w)
    } else {
        0.5 * (lo + hi)
    }
}

struct Point {
    a: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

fn line_search<E>(
    fun: &mut Counted<'_, E>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
    c2: f64,
) -> Result<Option<Point>, E> {
    let probe = |fun: &mut Counted<'_, E>, a: f64| -> Result<Point, E> {
        let (f, g) = fun.eval(&along(x, a, d))?;
        let slope = dot(&g, d);
        Ok(Point { a, f, g, slope })
    };
    let sufficient = |p: &Point| p.f.is_finite() && p.f <= f0 + C1 * p.a * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -c2 * slope0;

    let mut prev = Point { a: 0.0, f: f0, g: Vec::new(), slope: slope0 };
    let mut a = alpha0;
    let mut bracket = None;
    for i in 0..40 {
        let p = probe(fun, a)?;
        if !sufficient(&p) || (i > 0 && p.f >= prev.f) {
            bracket = Some((prev, p));
            break;
        }
        if curvature(&p) {
            return Ok(Some(p));
        }
        if p.slope >= 0.0 {
            bracket = Some((p, prev));
            break;
        }
        a *= 2.0;
        prev = p;
    }
    let Some((mut lo, mut hi)) = bracket else { return Ok(None) };
    for _ in 0..40 {
        let a = if hi.f.is_finite() {
            cubic_step(lo.a, lo.f, lo.slope, hi.a, hi.f, hi.slope)
        } else {
            0.5 * (lo.a + hi.a)
        };
        if (hi.a - lo.a).abs() <= 1e-16 * lo.a.abs().max(hi.a.abs()) {
            break;
        }
        let p = probe(fun, a)?;
        if !sufficient(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Some(p));
            }
            if p.slope * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
    // best point with sufficient decrease, if any
    Ok(if lo.a > 0.0 { Some(lo) } else { None })
}

/// Minimizes `f` starting from `x0`; `f` returns the value and the gradient.
pub fn minimize<E>(
    mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    x0: Vec<f64>,
    opts: &LbfgsOptions,
) -> Result<LbfgsOutcome, E> {
    let mut fun = Counted { f: &mut f, calls: 0 };
    let mut x = x0;
    let (mut fx, mut g) = fun.eval(&x)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let outcome = |x, f, g: &[f64], it, calls, converged, reason| LbfgsOutcome {
        x,
        f,
        grad_norm: norm(g),
        iterations: it,
        evaluations: calls,
        converged,
        reason,
    };
    for it in 0..opts.max_iters {
        let gn = norm(&g);
        if gn <= opts.gtol {
            return Ok(outcome(x, fx, &g, it, fun.calls, true, "gradient"));
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(d, y)| *d -= a * y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(d, s)| *d += (a - b) * s);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let alpha0 = if history.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let Some(p) = line_search(&mut fun, &x, fx, slope, &d, alpha0, opts.curvature)? else {
            return Ok(outcome(x, fx, &g, it, fun.calls, false, "line search failed"));
        };
        let x_new = along(&x, p.a, &d);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - p.f;
        x = x_new;
        fx = p.f;
        g = p.g;
        if decrease <= opts.ftol * fx.abs().max(1.0) {
            let gn = norm(&g);
            return Ok(outcome(x, fx, &g, it + 1, fun.calls, gn <= opts.gtol, "stalled"));
        }
    }
    let converged = norm(&g) <= opts.gtol;
    Ok(outcome(x, fx, &g, opts.max_iters, fun.calls, converged, "iteration limit"))
}
