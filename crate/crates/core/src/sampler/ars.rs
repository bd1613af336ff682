//! Derivative-free adaptive rejection sampling for log-concave densities.
//!
//! The envelope is built from secant chords between evaluated abscissae:
//! inside an interval the upper hull is the lower of the two neighbouring
//! chords extended inward, outside the extreme points it is the nearest
//! chord extended outward, and the chord between two points serves as the
//! squeeze. Rejected proposals are added to the point set, tightening the
//! envelope. No derivatives of the target are required.

use rand::Rng;

/// Tuning knobs for one ARS draw.
pub(crate) struct ArsOptions {
    /// Number of starting abscissae (at least 3).
    pub init_points: usize,
    /// Budget of target evaluations before giving up.
    pub max_evals: usize,
    /// Initial spacing of the starting abscissae around the current point.
    pub spread: f64,
}

/// Why a draw could not be produced; the caller falls back to a
/// Metropolis step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ArsFailure {
    /// The evaluation budget was exhausted while building or refining.
    BudgetExhausted,
    /// An evaluated point lay above the envelope: the target is not
    /// log-concave to within tolerance.
    NotLogConcave,
    /// The envelope mass vanished or turned non-finite.
    DegenerateEnvelope,
}

struct Evaluator<'a, F> {
    f: &'a mut F,
    used: usize,
    budget: usize,
}

impl<'a, F: FnMut(f64) -> f64> Evaluator<'a, F> {
    fn eval(&mut self, x: f64) -> Option<f64> {
        if self.used >= self.budget {
            return None;
        }
        self.used += 1;
        Some((self.f)(x))
    }
}

/// One linear piece of the upper hull on `(a, b)`: `u(x) = value_at_a + slope * (x - a)`.
#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    slope: f64,
    value_at_a: f64,
    log_weight: f64,
}

impl Segment {
    fn new(a: f64, b: f64, slope: f64, value_at_a: f64) -> Self {
        let log_weight = log_exp_integral(a, b, slope, value_at_a);
        Segment { a, b, slope, value_at_a, log_weight }
    }

    fn value_at(&self, x: f64) -> f64 {
        if self.a.is_finite() {
            self.value_at_a + self.slope * (x - self.a)
        } else {
            // anchor at b for the left-infinite piece
            self.value_at_a + self.slope * (x - self.b)
        }
    }
}

/// `log integral_a^b exp(v + m (x - anchor)) dx` where the anchor is `a`
/// when finite, else `b` (see [`Segment::value_at`]).
fn log_exp_integral(a: f64, b: f64, m: f64, v: f64) -> f64 {
    if a.is_infinite() {
        // left tail, requires m > 0; value v is at b
        return if m > 0.0 { v - m.ln() } else { f64::INFINITY };
    }
    if b.is_infinite() {
        return if m < 0.0 { v - (-m).ln() } else { f64::INFINITY };
    }
    let len = b - a;
    if len <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let t = m * len;
    if t.abs() < 1e-10 {
        v + len.ln() + (0.5 * t).ln_1p()
    } else if t > 0.0 {
        // v + t + log((1 - e^-t)/m)
        v + t + (-(-t).exp()).ln_1p() - m.ln()
    } else {
        v + (-(t).exp_m1()).ln() - (-m).ln()
    }
}

/// Inverse CDF within a segment for uniform `w` in (0, 1).
fn sample_within(seg: &Segment, w: f64) -> f64 {
    let (a, b, m) = (seg.a, seg.b, seg.slope);
    if a.is_infinite() {
        return b + w.ln() / m;
    }
    if b.is_infinite() {
        return a + (1.0 - w).ln() / m;
    }
    let len = b - a;
    let t = m * len;
    if t.abs() < 1e-10 {
        a + w * len
    } else if t > 0.0 {
        // from the right end: x = b + log(w + (1-w) e^-t) / m
        b + (w + (1.0 - w) * (-t).exp()).ln() / m
    } else {
        a + (w * t.exp_m1()).ln_1p() / m
    }
}

struct Envelope {
    points: Vec<(f64, f64)>, // sorted by x, finite log-density values
    lo: f64,
    hi: f64,
    segments: Vec<Segment>,
}

impl Envelope {
    fn rebuild(&mut self) -> Result<(), ArsFailure> {
        let pts = &self.points;
        let n = pts.len();
        debug_assert!(n >= 3);
        let chord = |i: usize| -> f64 {
            (pts[i + 1].1 - pts[i].1) / (pts[i + 1].0 - pts[i].0)
        };
        let mut segments = Vec::with_capacity(2 * n);
        // left of the first point
        if self.lo < pts[0].0 {
            let m = chord(0);
            if self.lo.is_infinite() {
                segments.push(Segment::new(self.lo, pts[0].0, m, pts[0].1));
            } else {
                let v = pts[0].1 + m * (self.lo - pts[0].0);
                segments.push(Segment::new(self.lo, pts[0].0, m, v));
            }
        }
        for i in 0..n - 1 {
            let (xa, ha) = pts[i];
            let (xb, hb) = pts[i + 1];
            let left = if i >= 1 { Some(chord(i - 1)) } else { None };
            let right = if i + 2 < n { Some(chord(i + 1)) } else { None };
            match (left, right) {
                (Some(ml), Some(mr)) => {
                    // lines through (xa, ha) slope ml and (xb, hb) slope mr
                    if ml - mr > 1e-12 * (1.0 + ml.abs() + mr.abs()) {
                        let cross = (hb - ha + ml * xa - mr * xb) / (ml - mr);
                        let cross = cross.clamp(xa, xb);
                        segments.push(Segment::new(xa, cross, ml, ha));
                        segments.push(Segment::new(cross, xb, mr, hb + mr * (cross - xb)));
                    } else {
                        // effectively collinear: the chord itself bounds
                        let mc = (hb - ha) / (xb - xa);
                        segments.push(Segment::new(xa, xb, mc, ha));
                    }
                }
                (None, Some(mr)) => {
                    segments.push(Segment::new(xa, xb, mr, hb + mr * (xa - xb)));
                }
                (Some(ml), None) => {
                    segments.push(Segment::new(xa, xb, ml, ha));
                }
                (None, None) => unreachable!("envelope requires at least 3 points"),
            }
        }
        // right of the last point
        if self.hi > pts[n - 1].0 {
            let m = chord(n - 2);
            segments.push(Segment::new(pts[n - 1].0, self.hi, m, pts[n - 1].1));
        }
        if segments.iter().any(|s| s.log_weight.is_infinite() && s.log_weight > 0.0) {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        self.segments = segments;
        Ok(())
    }

    /// Draws a point from the piecewise-exponential envelope along with the
    /// envelope ordinate at that point.
    fn sample<R: Rng>(&self, rng: &mut R) -> Result<(f64, f64), ArsFailure> {
        let max = self
            .segments
            .iter()
            .map(|s| s.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        let weights: Vec<f64> = self.segments.iter().map(|s| (s.log_weight - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        let mut target = rng.random::<f64>() * total;
        let mut idx = self.segments.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                idx = i;
                break;
            }
            target -= w;
        }
        let seg = &self.segments[idx];
        let mut w: f64 = rng.random();
        if w <= 0.0 {
            w = f64::MIN_POSITIVE;
        }
        let mut x = sample_within(seg, w);
        if !x.is_finite() {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        if seg.a.is_finite() {
            x = x.max(seg.a);
        }
        if seg.b.is_finite() {
            x = x.min(seg.b);
        }
        Ok((x, seg.value_at(x)))
    }

    /// Lower squeeze: the chord between the bracketing points, `-inf`
    /// outside the evaluated range.
    fn squeeze(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x < pts[0].0 || x > pts[pts.len() - 1].0 {
            return f64::NEG_INFINITY;
        }
        let idx = pts.partition_point(|p| p.0 < x);
        if idx == 0 {
            return pts[0].1;
        }
        if idx >= pts.len() {
            return pts[pts.len() - 1].1;
        }
        let (xa, ha) = pts[idx - 1];
        let (xb, hb) = pts[idx];
        ha + (hb - ha) * (x - xa) / (xb - xa)
    }

    fn insert(&mut self, x: f64, h: f64) {
        const MAX_POINTS: usize = 48;
        if self.points.len() >= MAX_POINTS {
            return;
        }
        let idx = self.points.partition_point(|p| p.0 < x);
        if idx > 0 && self.points[idx - 1].0 == x {
            return;
        }
        if idx < self.points.len() && self.points[idx].0 == x {
            return;
        }
        self.points.insert(idx, (x, h));
    }
}

/// Evaluates the target at `x` (clamped inside the support) and records the
/// point, walking toward the anchor while the log-density underflows.
fn seed_point<F: FnMut(f64) -> f64>(
    points: &mut Vec<(f64, f64)>,
    ev: &mut Evaluator<F>,
    mut x: f64,
    lo: f64,
    hi: f64,
    anchor: f64,
) -> Result<(), ArsFailure> {
    if lo.is_finite() {
        x = x.max(lo + 1e-9 * (1.0 + lo.abs()));
    }
    if hi.is_finite() {
        x = x.min(hi - 1e-9 * (1.0 + hi.abs()));
    }
    for _ in 0..24 {
        let h = ev.eval(x).ok_or(ArsFailure::BudgetExhausted)?;
        if h.is_finite() {
            if points.iter().all(|p| p.0 != x) {
                let idx = points.partition_point(|p| p.0 < x);
                points.insert(idx, (x, h));
            }
            return Ok(());
        }
        x = 0.5 * (x + anchor);
        if (x - anchor).abs() < 1e-14 * (1.0 + anchor.abs()) {
            return Ok(());
        }
    }
    Ok(())
}

/// Draws one sample from a log-concave density known up to a constant.
///
/// `support` may be half-infinite or bounded; `start` must be an interior
/// point with finite log-density (the current Markov chain state).
pub(crate) fn sample_log_concave<F, R>(
    log_density: &mut F,
    support: (f64, f64),
    start: f64,
    opts: &ArsOptions,
    rng: &mut R,
) -> Result<f64, ArsFailure>
where
    F: FnMut(f64) -> f64,
    R: Rng,
{
    let (mut lo, mut hi) = support;
    debug_assert!(lo < hi);
    let mut ev = Evaluator { f: log_density, used: 0, budget: opts.max_evals };

    // interior anchor
    let mut anchor = start;
    if lo.is_finite() {
        let margin = 1e-9 * (1.0 + lo.abs());
        anchor = anchor.max(lo + margin);
    }
    if hi.is_finite() {
        let margin = 1e-9 * (1.0 + hi.abs());
        anchor = anchor.min(hi - margin);
    }

    let spread = opts.spread.max(1e-12);
    let n0 = opts.init_points.max(3);
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(n0 + 8);

    let half = (n0 - 1) / 2;
    for off in 0..n0 {
        let x = anchor + spread * (off as f64 - half as f64);
        seed_point(&mut points, &mut ev, x, lo, hi, anchor)?;
    }
    // make sure we have at least 3 distinct points
    let mut widen = spread;
    while points.len() < 3 {
        widen *= 2.0;
        if widen > 1e12 {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        seed_point(&mut points, &mut ev, anchor - widen, lo, hi, anchor)?;
        seed_point(&mut points, &mut ev, anchor + widen, lo, hi, anchor)?;
        if ev.used >= ev.budget {
            return Err(ArsFailure::BudgetExhausted);
        }
    }

    // unbounded tails need bracketing slopes
    let mut step = spread.max(1e-6);
    while lo.is_infinite() {
        let slope = {
            let (x0, h0) = points[0];
            let (x1, h1) = points[1];
            (h1 - h0) / (x1 - x0)
        };
        if slope > 0.0 {
            break;
        }
        step *= 2.0;
        if step > 1e15 {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        let candidate = points[0].0 - step;
        let h = ev.eval(candidate).ok_or(ArsFailure::BudgetExhausted)?;
        if h.is_finite() {
            points.insert(0, (candidate, h));
        } else {
            lo = candidate; // negligible mass below; truncate
        }
    }
    let mut step = spread.max(1e-6);
    while hi.is_infinite() {
        let n = points.len();
        let slope = {
            let (x0, h0) = points[n - 2];
            let (x1, h1) = points[n - 1];
            (h1 - h0) / (x1 - x0)
        };
        if slope < 0.0 {
            break;
        }
        step *= 2.0;
        if step > 1e15 {
            return Err(ArsFailure::DegenerateEnvelope);
        }
        let candidate = points[n - 1].0 + step;
        let h = ev.eval(candidate).ok_or(ArsFailure::BudgetExhausted)?;
        if h.is_finite() {
            points.push((candidate, h));
        } else {
            hi = candidate;
        }
    }

    // normalize ordinates so envelope exponentials stay in range
    let peak = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    for p in &mut points {
        p.1 -= peak;
    }

    let mut env = Envelope { points, lo, hi, segments: Vec::new() };
    env.rebuild()?;

    loop {
        let (x, upper) = env.sample(rng)?;
        let w: f64 = rng.random();
        let log_w = w.max(f64::MIN_POSITIVE).ln();
        if log_w <= env.squeeze(x) - upper {
            return Ok(x);
        }
        let h = match ev.eval(x) {
            Some(h) => h - peak,
            None => return Err(ArsFailure::BudgetExhausted),
        };
        if h > upper + 1e-7 * (1.0 + upper.abs()) {
            return Err(ArsFailure::NotLogConcave);
        }
        let accept = log_w <= h - upper;
        if h.is_finite() {
            env.insert(x, h);
            env.rebuild()?;
        }
        if accept {
            return Ok(x);
        }
    }
}
