//! Derivative-free optimizers.
//!
//! Two methods are provided:
//!
//! * [`optimize_local`], a linear-model trust-region descent: it keeps a
//!   simplex of `d+1` evaluated points, interpolates a linear model of the
//!   objective, and steps the incumbent against the model gradient with an
//!   adaptive trust radius.  Each iteration spends at most one objective
//!   call, so iteration budgets equal evaluation budgets.
//! * [`optimize_direct`], the classic dividing-rectangles global search on a
//!   box: potentially-optimal rectangles (lower convex hull over
//!   (diameter, value)) are trisected along their longest sides, after which
//!   the local method polishes the best center.
//!
//! Both are fully deterministic for a deterministic objective; a stochastic
//! objective yields deterministic traces for a fixed RNG seed upstream.

use crate::error::Error;

/// One objective evaluation in an optimization trace.
#[derive(Clone, Debug)]
pub struct TracePoint {
    pub theta: Vec<f64>,
    pub value: f64,
    /// Monotone best-so-far value.
    pub best_value: f64,
}

/// Result of an optimization run.
#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub trace: Vec<TracePoint>,
}

struct Recorder<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    trace: Vec<TracePoint>,
    best_theta: Vec<f64>,
    best_value: f64,
}

impl<'a> Recorder<'a> {
    fn new(f: &'a mut dyn FnMut(&[f64]) -> f64) -> Self {
        Recorder { f, trace: Vec::new(), best_theta: Vec::new(), best_value: f64::INFINITY }
    }

    fn eval(&mut self, theta: &[f64]) -> Result<f64, Error> {
        let v = (self.f)(theta);
        if v.is_nan() {
            return Err(Error::Optimization(format!("objective returned NaN at {theta:?}")));
        }
        if v < self.best_value {
            self.best_value = v;
            self.best_theta = theta.to_vec();
        }
        self.trace.push(TracePoint {
            theta: theta.to_vec(),
            value: v,
            best_value: self.best_value,
        });
        Ok(v)
    }

    fn finish(self) -> OptimizeResult {
        OptimizeResult { theta: self.best_theta, value: self.best_value, trace: self.trace }
    }
}

/// Linear-model trust-region descent from `theta0` with an evaluation
/// budget of `max_iters` objective calls.
pub fn optimize_local(
    f: &mut dyn FnMut(&[f64]) -> f64,
    theta0: &[f64],
    max_iters: usize,
) -> Result<OptimizeResult, Error> {
    if max_iters == 0 {
        return Err(Error::Config("optimizer needs at least one iteration".into()));
    }
    let mut rec = Recorder::new(f);
    run_local(&mut rec, theta0, max_iters)?;
    Ok(rec.finish())
}

fn run_local(rec: &mut Recorder, theta0: &[f64], max_iters: usize) -> Result<(), Error> {
    let d = theta0.len();
    let rho0 = 0.5;
    let mut rho = rho0;
    let mut budget = max_iters;
    let spend = |rec: &mut Recorder, x: &[f64], budget: &mut usize| -> Result<Option<f64>, Error> {
        if *budget == 0 {
            return Ok(None);
        }
        *budget -= 1;
        rec.eval(x).map(Some)
    };

    // Initial simplex: θ0 and one step along each coordinate.
    let mut points: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    match spend(rec, theta0, &mut budget)? {
        Some(v) => points.push((theta0.to_vec(), v)),
        None => return Ok(()),
    }
    for i in 0..d {
        let mut x = theta0.to_vec();
        x[i] += rho;
        match spend(rec, &x, &mut budget)? {
            Some(v) => points.push((x, v)),
            None => return Ok(()),
        }
    }

    let mut refresh_axis = 0usize;
    while budget > 0 {
        let best_idx = (0..points.len())
            .min_by(|&a, &b| points[a].1.partial_cmp(&points[b].1).unwrap())
            .unwrap();
        let (best_x, best_v) = (points[best_idx].0.clone(), points[best_idx].1);

        // Interpolated linear model: (x_i - x_b) · g = f_i - f_b.
        let gradient = if d == 0 {
            None
        } else {
            let others: Vec<usize> = (0..points.len()).filter(|&i| i != best_idx).collect();
            let a = nalgebra::DMatrix::from_fn(d, d, |r, c| points[others[r]].0[c] - best_x[c]);
            let b = nalgebra::DVector::from_fn(d, |r, _| points[others[r]].1 - best_v);
            a.lu().solve(&b).filter(|g| g.norm() > 1e-14)
        };

        let candidate = match &gradient {
            Some(g) => {
                let norm = g.norm();
                let mut x = best_x.clone();
                for i in 0..d {
                    x[i] -= rho * g[i] / norm;
                }
                x
            }
            None => {
                // Degenerate geometry: refresh the simplex along an axis.
                let mut x = best_x.clone();
                x[refresh_axis % d] += rho;
                refresh_axis += 1;
                x
            }
        };
        let value = match spend(rec, &candidate, &mut budget)? {
            Some(v) => v,
            None => break,
        };
        if value < best_v {
            rho = (rho * 1.3).min(rho0);
        } else {
            rho = (rho * 0.7).max(1e-9);
        }
        // Keep the simplex fresh: drop the point farthest from the best.
        let far = (0..points.len())
            .filter(|&i| i != best_idx)
            .max_by(|&a, &b| {
                let da: f64 = points[a].0.iter().zip(&best_x).map(|(p, q)| (p - q).powi(2)).sum();
                let db: f64 = points[b].0.iter().zip(&best_x).map(|(p, q)| (p - q).powi(2)).sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap_or(best_idx);
        points[far] = (candidate, value);
    }
    Ok(())
}

/// One hyper-rectangle of the DIRECT partition, in unit-cube coordinates.
struct Rect {
    center: Vec<f64>,
    /// Number of trisections per dimension (side length `3^-level`).
    levels: Vec<u32>,
    value: f64,
}

impl Rect {
    fn diameter(&self) -> f64 {
        self.levels.iter().map(|&l| 3f64.powi(-(l as i32)).powi(2)).sum::<f64>().sqrt() / 2.0
    }
}

/// Dividing-rectangles global search over `bounds` for `global_iters`
/// selection rounds, followed by the local method (`local_iters` calls)
/// from the best point found.
pub fn optimize_direct(
    f: &mut dyn FnMut(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    global_iters: usize,
    local_iters: usize,
) -> Result<OptimizeResult, Error> {
    let d = bounds.len();
    if d == 0 || bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::Config("DIRECT needs finite, nonempty box bounds".into()));
    }
    let denorm = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(bounds).map(|(&x, &(lo, hi))| lo + x * (hi - lo)).collect()
    };
    let mut rec = Recorder::new(f);

    let c0 = vec![0.5; d];
    let v0 = rec.eval(&denorm(&c0))?;
    let mut rects = vec![Rect { center: c0, levels: vec![0; d], value: v0 }];

    for _ in 0..global_iters {
        for ri in potentially_optimal(&rects, rec.best_value) {
            split_rect(&mut rects, ri, &mut rec, &denorm)?;
        }
    }

    let start = rec.best_theta.clone();
    if local_iters > 0 {
        run_local(&mut rec, &start, local_iters)?;
    }
    Ok(rec.finish())
}

/// Indices of potentially-optimal rectangles: per diameter class the best
/// value, filtered to the lower-right convex hull of (diameter, value) that
/// can improve on the incumbent by ε.
fn potentially_optimal(rects: &[Rect], best: f64) -> Vec<usize> {
    const EPS: f64 = 1e-4;
    // Best rectangle per diameter (quantized to avoid float dust).
    let mut classes: Vec<(f64, usize)> = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        let dia = r.diameter();
        match classes.iter_mut().find(|(cd, _)| (*cd - dia).abs() < 1e-12) {
            Some((_, bi)) => {
                if r.value < rects[*bi].value {
                    *bi = i;
                }
            }
            None => classes.push((dia, i)),
        }
    }
    classes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Pareto filter: a class survives unless a larger class has an equal or
    // better value (such rectangles dominate it for every trade-off K).
    let mut chosen: Vec<usize> = Vec::new();
    for (ci, &(_, i)) in classes.iter().enumerate() {
        let dominated =
            classes[ci + 1..].iter().any(|&(_, j)| rects[j].value <= rects[i].value);
        if dominated {
            continue;
        }
        // ε-improvement filter (largest class always kept for coverage).
        let is_largest = ci + 1 == classes.len();
        if is_largest || rects[i].value - rects[i].diameter() <= best - EPS * best.abs().max(1e-8)
        {
            chosen.push(i);
        }
    }
    if chosen.is_empty() {
        chosen.push(classes.last().unwrap().1);
    }
    chosen
}

/// Trisect rectangle `ri` along all of its longest sides, best dimension
/// first.
fn split_rect(
    rects: &mut Vec<Rect>,
    ri: usize,
    rec: &mut Recorder,
    denorm: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<(), Error> {
    let min_level = *rects[ri].levels.iter().min().unwrap();
    let dims: Vec<usize> =
        (0..rects[ri].levels.len()).filter(|&i| rects[ri].levels[i] == min_level).collect();
    let delta = 3f64.powi(-(min_level as i32)) / 3.0;
    // Probe both offsets along each longest dimension.
    let mut probes: Vec<(usize, f64, Vec<f64>, f64, Vec<f64>)> = Vec::new();
    for &dim in &dims {
        let mut lo = rects[ri].center.clone();
        lo[dim] -= delta;
        let mut hi = rects[ri].center.clone();
        hi[dim] += delta;
        let flo = rec.eval(&denorm(&lo))?;
        let fhi = rec.eval(&denorm(&hi))?;
        probes.push((dim, flo, lo, fhi, hi));
    }
    // Trisect in order of the most promising dimension.
    probes.sort_by(|a, b| a.1.min(a.3).partial_cmp(&b.1.min(b.3)).unwrap());
    for (dim, flo, lo, fhi, hi) in probes {
        rects[ri].levels[dim] += 1;
        let levels = rects[ri].levels.clone();
        rects.push(Rect { center: lo, levels: levels.clone(), value: flo });
        rects.push(Rect { center: hi, levels, value: fhi });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn local_minimizes_quadratic() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2);
        let r = optimize_local(&mut f, &[0.0], 50).unwrap();
        assert!((r.theta[0] - 0.3).abs() < 1e-3, "{}", r.theta[0]);
        assert_eq!(r.trace.len(), 50);
        // Monotone best-so-far.
        for w in r.trace.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
    }

    #[test]
    fn local_minimizes_multidimensional_quadratic() {
        let target = [1.2, -0.7, 0.4];
        let mut f = |x: &[f64]| -> f64 {
            x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum()
        };
        let r = optimize_local(&mut f, &[0.0; 3], 120).unwrap();
        for (a, b) in r.theta.iter().zip(&target) {
            assert!((a - b).abs() < 1e-2, "{:?}", r.theta);
        }
    }

    #[test]
    fn local_tolerates_noise() {
        let mut passes = 0;
        for seed in 0..50 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut f =
                |x: &[f64]| (x[0] - 0.3).powi(2) + 1e-3 * rng.random_range(-1.0..1.0);
            let r = optimize_local(&mut f, &[1.0], 60).unwrap();
            if (r.theta[0] - 0.3).abs() < 0.05 {
                passes += 1;
            }
        }
        assert!(passes >= 45, "only {passes}/50 noisy runs converged");
    }

    #[test]
    fn local_rejects_nan() {
        let mut f = |_: &[f64]| f64::NAN;
        assert!(optimize_local(&mut f, &[0.0], 10).is_err());
    }

    #[test]
    fn local_is_deterministic() {
        let run = || {
            let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.1).powi(4);
            optimize_local(&mut f, &[1.0, 1.0], 40).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.trace.len(), b.trace.len());
        for (p, q) in a.trace.iter().zip(&b.trace) {
            assert_eq!(p.theta, q.theta);
            assert_eq!(p.value, q.value);
        }
    }

    #[test]
    fn direct_finds_quadratic_minimum() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2);
        let r = optimize_direct(&mut f, &[(0.0, 1.0)], 50, 50).unwrap();
        assert!((r.theta[0] - 0.3).abs() < 1e-3, "{}", r.theta[0]);
    }

    #[test]
    fn direct_finds_rastrigin_global_minimum() {
        let rastrigin = |x: f64| x * x + 10.0 * (1.0 - (2.0 * std::f64::consts::PI * x).cos());
        let mut f = |x: &[f64]| rastrigin(x[0]);
        let r = optimize_direct(&mut f, &[(-2.0, 2.0)], 50, 50).unwrap();
        assert!(r.value < 1e-2, "{}", r.value);
        // Asymmetric bounds so the first center is not the optimum.
        let r = optimize_direct(&mut f, &[(-2.3, 1.7)], 50, 50).unwrap();
        assert!(r.value < 1e-2, "{}", r.value);
    }

    #[test]
    fn direct_first_center_is_box_midpoint() {
        let mut seen = Vec::new();
        let mut f = |x: &[f64]| {
            seen.push(x.to_vec());
            x.iter().map(|v| v * v).sum()
        };
        let pi = std::f64::consts::PI;
        optimize_direct(&mut f, &[(-pi, pi), (-pi, pi)], 1, 0).unwrap();
        assert!(seen[0].iter().all(|&v| v.abs() < 1e-12), "{:?}", seen[0]);
    }

    #[test]
    fn direct_rejects_bad_bounds() {
        let mut f = |x: &[f64]| x[0];
        assert!(optimize_direct(&mut f, &[(1.0, 1.0)], 10, 10).is_err());
        assert!(optimize_direct(&mut f, &[], 10, 10).is_err());
    }
}
