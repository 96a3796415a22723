//! Limited-memory BFGS with box constraints.
//!
//! Each iteration finds the generalized Cauchy point of the compact quasi-Newton
//! model along the projected steepest-descent path, minimizes the model over
//! the variables left free there (direct primal method, truncated back into
//! the box), and runs a strong-Wolfe line search toward that point.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsbConfig {
    /// Number of correction pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Cap on objective evaluations, line-search trials included.
    pub max_evaluations: usize,
    /// Stop when the sup-norm of the projected gradient drops below this.
    pub pg_tolerance: f64,
    /// Stop when `(f_k − f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` drops below this.
    pub rel_decrease_tolerance: f64,
    /// Sufficient-decrease constant of the line search.
    pub c1: f64,
    /// Curvature constant of the line search.
    pub c2: f64,
    pub max_line_search_evals: usize,
}

impl Default for LbfgsbConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 1000,
            max_evaluations: 5000,
            pg_tolerance: 1e-8,
            rel_decrease_tolerance: 1e-12,
            c1: 1e-3,
            c2: 0.9,
            max_line_search_evals: 20,
        }
    }
}

impl LbfgsbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::Config("L-BFGS-B memory must be at least 1".into()));
        }
        if !(self.pg_tolerance > 0.0 && self.rel_decrease_tolerance > 0.0) {
            return Err(Error::Config("L-BFGS-B tolerances must be positive".into()));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config("line search needs 0 < c1 < c2 < 1".into()));
        }
        Ok(())
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsbStatus {
    ProjectedGradient,
    RelativeDecrease,
    MaxIterations,
    MaxEvaluations,
    /// No acceptable step even from a fresh memory; the last iterate is returned.
    LineSearchFailure,
}

impl LbfgsbStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LbfgsbStatus::ProjectedGradient => "projected-gradient",
            LbfgsbStatus::RelativeDecrease => "relative-decrease",
            LbfgsbStatus::MaxIterations => "max-iterations",
            LbfgsbStatus::MaxEvaluations => "max-evaluations",
            LbfgsbStatus::LineSearchFailure => "line-search-failure",
        }
    }

    pub fn converged(self) -> bool {
        matches!(self, LbfgsbStatus::ProjectedGradient | LbfgsbStatus::RelativeDecrease)
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsbResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsbStatus,
}

/// Box `[lower_i, upper_i]`; infinite entries leave a side open.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn lower(n: usize, lo: f64) -> Self {
        Self {
            lower: vec![lo; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(l).min(u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((v, l), u)| *l <= *v && *v <= *u)
    }

    /// `‖P(x − g) − x‖_∞`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((&xi, &gi), (&l, &u))| ((xi - gi).max(l).min(u) - xi).abs())
            .fold(0.0, f64::max)
    }

    fn validate(&self, x: &[f64]) -> Result<()> {
        if self.lower.len() != x.len() || self.upper.len() != x.len() {
            return Err(Error::ParamLength {
                got: self.lower.len(),
                expected: x.len(),
            });
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("lower bound exceeds upper bound".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a x = b` in place (`a` row-major `n × n`) by Gaussian elimination
/// with partial pivoting. Returns `None` if `a` is numerically singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

/// Compact limited-memory representation `B = θI − W M Wᵀ`, `W = [Y θS]`.
struct Memory {
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    theta: f64,
    /// `M`, row-major `2k × 2k`.
    mid: Vec<f64>,
    cap: usize,
}

impl Memory {
    fn new(cap: usize) -> Self {
        Self {
            s: VecDeque::new(),
            y: VecDeque::new(),
            theta: 1.0,
            mid: Vec::new(),
            cap,
        }
    }

    fn k(&self) -> usize {
        self.s.len()
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.theta = 1.0;
        self.mid.clear();
    }

    /// Adds a pair and refreshes `M`; declines pairs with too little curvature.
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if !(sy > f64::EPSILON * yy) {
            return false;
        }
        if self.s.len() == self.cap {
            self.s.pop_front();
            self.y.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        self.theta = yy / sy;
        if !self.rebuild() {
            self.clear();
            return false;
        }
        true
    }

    fn rebuild(&mut self) -> bool {
        let k = self.k();
        let n2 = 2 * k;
        // K = [[−D, Lᵀ], [L, θ SᵀS]], then M = K⁻¹ column by column.
        let mut kmat = vec![0.0; n2 * n2];
        for i in 0..k {
            for j in 0..k {
                let sy = dot(&self.s[i], &self.y[j]);
                if i == j {
                    kmat[i * n2 + j] = -sy;
                } else if i > j {
                    kmat[(k + i) * n2 + j] = sy;
                    kmat[j * n2 + k + i] = sy;
                }
                kmat[(k + i) * n2 + k + j] = self.theta * dot(&self.s[i], &self.s[j]);
            }
        }
        let mut mid = vec![0.0; n2 * n2];
        for c in 0..n2 {
            let mut a = kmat.clone();
            let mut e = vec![0.0; n2];
            e[c] = 1.0;
            if solve_dense(&mut a, &mut e, n2).is_none() {
                return false;
            }
            for r in 0..n2 {
                mid[r * n2 + c] = e[r];
            }
        }
        self.mid = mid;
        true
    }

    /// Row `i` of `W`.
    fn w_row(&self, i: usize, out: &mut [f64]) {
        let k = self.k();
        for j in 0..k {
            out[j] = self.y[j][i];
            out[k + j] = self.theta * self.s[j][i];
        }
    }

    /// `Wᵀ v`.
    fn wt_times(&self, v: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut out = vec![0.0; 2 * k];
        for j in 0..k {
            out[j] = dot(&self.y[j], v);
            out[k + j] = self.theta * dot(&self.s[j], v);
        }
        out
    }

    fn m_times(&self, v: &[f64]) -> Vec<f64> {
        let n2 = v.len();
        (0..n2).map(|r| dot(&self.mid[r * n2..(r + 1) * n2], v)).collect()
    }
}

/// Generalized Cauchy point. Returns `x^c` and `c = Wᵀ(x^c − x)`.
fn cauchy_point(x: &[f64], g: &[f64], bounds: &Bounds, mem: &Memory) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let k2 = 2 * mem.k();
    let theta = mem.theta;
    let mut xc = x.to_vec();
    let mut d = vec![0.0; n];
    let mut breaks: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let t = if g[i] < 0.0 {
            (x[i] - bounds.upper[i]) / g[i]
        } else if g[i] > 0.0 {
            (x[i] - bounds.lower[i]) / g[i]
        } else {
            f64::INFINITY
        };
        if t > 0.0 {
            d[i] = -g[i];
            if t.is_finite() {
                breaks.push((t, i));
            }
        }
    }
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut p = mem.wt_times(&d);
    let mut c = vec![0.0; k2];
    let mut fp = -dot(&d, &d);
    if fp >= 0.0 {
        return (xc, c);
    }
    let mp = mem.m_times(&p);
    let fpp_orig = -theta * fp - dot(&p, &mp);
    let mut fpp = fpp_orig;
    let mut dt_min = -fp / fpp;
    let mut t_old = 0.0;
    let mut wb = vec![0.0; k2];
    let mut next = 0;
    while next < breaks.len() {
        let (t, b) = breaks[next];
        let dt = t - t_old;
        if dt_min < dt {
            break;
        }
        next += 1;
        xc[b] = if d[b] > 0.0 { bounds.upper[b] } else { bounds.lower[b] };
        let zb = xc[b] - x[b];
        for (ci, pi) in c.iter_mut().zip(&p) {
            *ci += dt * pi;
        }
        let gb = g[b];
        mem.w_row(b, &mut wb);
        let mwb = mem.m_times(&wb);
        fp += dt * fpp + gb * gb + theta * gb * zb - gb * dot(&mwb, &c);
        fpp += -theta * gb * gb - 2.0 * gb * dot(&mwb, &p) - gb * gb * dot(&mwb, &wb);
        fpp = fpp.max(f64::EPSILON * fpp_orig);
        for (pi, wi) in p.iter_mut().zip(&wb) {
            *pi += gb * wi;
        }
        d[b] = 0.0;
        t_old = t;
        if fp >= 0.0 {
            dt_min = 0.0;
            break;
        }
        dt_min = -fp / fpp;
    }
    let dt_min = dt_min.max(0.0);
    let t_final = t_old + dt_min;
    for i in 0..n {
        if d[i] != 0.0 {
            xc[i] = (x[i] + t_final * d[i]).max(bounds.lower[i]).min(bounds.upper[i]);
        }
    }
    for (ci, pi) in c.iter_mut().zip(&p) {
        *ci += dt_min * pi;
    }
    (xc, c)
}

/// Minimizes the quadratic model over the variables free at `x^c`, then
/// truncates the step at the box. Returns the target point `x̄`.
fn subspace_min(x: &[f64], g: &[f64], bounds: &Bounds, mem: &Memory, xc: &[f64], c: &[f64]) -> Vec<f64> {
    let n = x.len();
    let free: Vec<usize> = (0..n)
        .filter(|&i| xc[i] > bounds.lower[i] && xc[i] < bounds.upper[i])
        .collect();
    if free.is_empty() {
        return xc.to_vec();
    }
    let theta = mem.theta;
    let k2 = 2 * mem.k();
    let mc = if k2 > 0 { mem.m_times(c) } else { Vec::new() };
    let mut wrow = vec![0.0; k2];
    // r = Zᵀ(g + θ(x^c − x) − W M c)
    let mut r = Vec::with_capacity(free.len());
    for &i in &free {
        mem.w_row(i, &mut wrow);
        r.push(g[i] + theta * (xc[i] - x[i]) - dot(&wrow, &mc));
    }
    let mut du: Vec<f64> = r.iter().map(|v| -v / theta).collect();
    if k2 > 0 {
        // v = M WᵀZ r;  N = I − (1/θ) M WᵀZ ZᵀW;  v ← N⁻¹ v
        let mut wtzr = vec![0.0; k2];
        let mut wtzzw = vec![0.0; k2 * k2];
        for (fi, &i) in free.iter().enumerate() {
            mem.w_row(i, &mut wrow);
            for a in 0..k2 {
                wtzr[a] += wrow[a] * r[fi];
                for b in 0..k2 {
                    wtzzw[a * k2 + b] += wrow[a] * wrow[b];
                }
            }
        }
        let mut v = mem.m_times(&wtzr);
        let mut nmat = vec![0.0; k2 * k2];
        for a in 0..k2 {
            for b in 0..k2 {
                let mut s = 0.0;
                for q in 0..k2 {
                    s += mem.mid[a * k2 + q] * wtzzw[q * k2 + b];
                }
                nmat[a * k2 + b] = if a == b { 1.0 } else { 0.0 } - s / theta;
            }
        }
        if solve_dense(&mut nmat, &mut v, k2).is_some() {
            for (fi, &i) in free.iter().enumerate() {
                mem.w_row(i, &mut wrow);
                du[fi] -= dot(&wrow, &v) / (theta * theta);
            }
        }
    }
    let mut alpha: f64 = 1.0;
    for (fi, &i) in free.iter().enumerate() {
        let step = du[fi];
        if step > 0.0 && bounds.upper[i].is_finite() {
            alpha = alpha.min((bounds.upper[i] - xc[i]) / step);
        } else if step < 0.0 && bounds.lower[i].is_finite() {
            alpha = alpha.min((bounds.lower[i] - xc[i]) / step);
        }
    }
    let alpha = alpha.max(0.0);
    let mut xbar = xc.to_vec();
    for (fi, &i) in free.iter().enumerate() {
        xbar[i] = (xc[i] + alpha * du[fi]).max(bounds.lower[i]).min(bounds.upper[i]);
    }
    xbar
}

struct Trial {
    alpha: f64,
    f: f64,
    dphi: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// safeguarded into the middle of the interval; bisection otherwise.
fn interpolate(a: &Trial, b: &Trial) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha { (a.alpha, b.alpha) } else { (b.alpha, a.alpha) };
    let d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.dphi * b.dphi;
    let mid = 0.5 * (lo + hi);
    if disc < 0.0 || !disc.is_finite() {
        return mid;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.dphi - a.dphi + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
    let margin = 0.1 * (hi - lo);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

enum SearchOutcome {
    Accepted(Trial),
    Failed,
}

struct LineSearch<'a, F> {
    fun: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    bounds: &'a Bounds,
    f0: f64,
    dphi0: f64,
    c1: f64,
    c2: f64,
    evals_left: usize,
    evaluations: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        let mut x: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + alpha * di).collect();
        self.bounds.project(&mut x);
        let (f, g) = (self.fun)(&x)?;
        self.evals_left = self.evals_left.saturating_sub(1);
        self.evaluations += 1;
        let dphi = dot(&g, self.d);
        Ok(Trial { alpha, f, dphi, x, g })
    }

    fn armijo(&self, t: &Trial) -> bool {
        t.f.is_finite() && t.f <= self.f0 + self.c1 * t.alpha * self.dphi0
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.dphi.abs() <= -self.c2 * self.dphi0
    }

    fn run(&mut self, alpha0: f64, alpha_max: f64) -> Result<SearchOutcome> {
        let mut prev = Trial {
            alpha: 0.0,
            f: self.f0,
            dphi: self.dphi0,
            x: self.x.to_vec(),
            g: Vec::new(),
        };
        let mut alpha = alpha0.min(alpha_max);
        let mut first = true;
        while self.evals_left > 0 {
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Ok(SearchOutcome::Accepted(cur));
            }
            if cur.dphi >= 0.0 {
                return self.zoom(cur, prev);
            }
            if alpha >= alpha_max {
                // Still descending at the edge of the box.
                return Ok(SearchOutcome::Accepted(cur));
            }
            first = false;
            alpha = (4.0 * alpha).min(alpha_max);
            prev = cur;
        }
        Ok(if prev.alpha > 0.0 {
            SearchOutcome::Accepted(prev)
        } else {
            SearchOutcome::Failed
        })
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Result<SearchOutcome> {
        while self.evals_left > 0 {
            let alpha = interpolate(&lo, &hi);
            if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1e-300) {
                break;
            }
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(SearchOutcome::Accepted(cur));
                }
                if cur.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
        // Out of budget: settle for sufficient decrease alone.
        Ok(if lo.alpha > 0.0 {
            SearchOutcome::Accepted(lo)
        } else {
            SearchOutcome::Failed
        })
    }
}

/// Largest `α` with `x + α d` inside the box.
fn max_feasible_step(x: &[f64], d: &[f64], bounds: &Bounds) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..x.len() {
        if d[i] > 0.0 && bounds.upper[i].is_finite() {
            alpha = alpha.min((bounds.upper[i] - x[i]) / d[i]);
        } else if d[i] < 0.0 && bounds.lower[i].is_finite() {
            alpha = alpha.min((bounds.lower[i] - x[i]) / d[i]);
        }
    }
    alpha.clamp(0.0, 1e10)
}

/// Minimizes `fun` over the box starting from `x0` (projected into the box).
/// `fun` returns the value and gradient; `observe(iteration, f, x)` is called
/// for the starting point and after every accepted step.
pub fn minimize<F, O>(cfg: &LbfgsbConfig, x0: Vec<f64>, bounds: &Bounds, mut fun: F, mut observe: O) -> Result<LbfgsbResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    O: FnMut(usize, f64, &[f64]),
{
    cfg.validate()?;
    bounds.validate(&x0)?;
    let mut x = x0;
    bounds.project(&mut x);
    let (mut f, mut g) = fun(&x)?;
    if g.len() != x.len() {
        return Err(Error::ParamLength {
            got: g.len(),
            expected: x.len(),
        });
    }
    let mut evaluations = 1;
    observe(0, f, &x);
    let mut mem = Memory::new(cfg.memory);
    let mut iter = 0;
    let finish = |x, f, g, iter, evaluations, status| {
        Ok(LbfgsbResult {
            x,
            f,
            g,
            iterations: iter,
            evaluations,
            status,
        })
    };

    loop {
        if bounds.projected_gradient_norm(&x, &g) < cfg.pg_tolerance {
            return finish(x, f, g, iter, evaluations, LbfgsbStatus::ProjectedGradient);
        }
        if iter >= cfg.max_iterations {
            return finish(x, f, g, iter, evaluations, LbfgsbStatus::MaxIterations);
        }
        if evaluations >= cfg.max_evaluations {
            return finish(x, f, g, iter, evaluations, LbfgsbStatus::MaxEvaluations);
        }

        let (xc, c) = cauchy_point(&x, &g, bounds, &mem);
        let xbar = subspace_min(&x, &g, bounds, &mem, &xc, &c);
        let d: Vec<f64> = xbar.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dphi0 = dot(&g, &d);
        if !(dphi0 < 0.0) {
            if mem.k() == 0 {
                // Only reachable through rounding when the gradient is tiny.
                return finish(x, f, g, iter, evaluations, LbfgsbStatus::ProjectedGradient);
            }
            log::debug!("L-BFGS-B: not a descent direction, resetting memory");
            mem.clear();
            continue;
        }

        let alpha_max = max_feasible_step(&x, &d, bounds);
        let alpha0 = if mem.k() == 0 {
            (1.0 / dot(&d, &d).sqrt()).min(alpha_max).min(1.0)
        } else {
            1.0f64.min(alpha_max)
        };
        let outcome = {
            let mut ls = LineSearch {
                fun: &mut fun,
                x: &x,
                d: &d,
                bounds,
                f0: f,
                dphi0,
                c1: cfg.c1,
                c2: cfg.c2,
                evals_left: cfg
                    .max_line_search_evals
                    .min(cfg.max_evaluations.saturating_sub(evaluations))
                    .max(1),
                evaluations: 0,
            };
            let out = ls.run(alpha0, alpha_max)?;
            evaluations += ls.evaluations;
            out
        };
        let trial = match outcome {
            SearchOutcome::Accepted(t) => t,
            SearchOutcome::Failed => {
                if mem.k() > 0 {
                    log::debug!("L-BFGS-B: line search failed, resetting memory");
                    mem.clear();
                    continue;
                }
                return finish(x, f, g, iter, evaluations, LbfgsbStatus::LineSearchFailure);
            }
        };

        iter += 1;
        let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = f;
        x = trial.x;
        f = trial.f;
        g = trial.g;
        observe(iter, f, &x);
        mem.push(s, y);

        if (f_old - f) <= cfg.rel_decrease_tolerance * f_old.abs().max(f.abs()).max(1.0) {
            return finish(x, f, g, iter, evaluations, LbfgsbStatus::RelativeDecrease);
        }
    }
}
