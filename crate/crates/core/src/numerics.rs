//! Quadrature, phase unwrapping and small statistics helpers.

use std::f64::consts::PI;

use crate::C64;

/// Composite Simpson rule on a uniform grid with spacing `h`.
///
/// An odd number of intervals is handled with Simpson's 3/8 rule on the last
/// three. One interval falls back to the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let (even_end, tail) = if n.is_multiple_of(2) { (n, None) } else { (n - 3, Some(n - 3)) };
            let mut s = 0.0;
            if even_end > 0 {
                s += values[0] + values[even_end];
                for (k, v) in values.iter().enumerate().take(even_end).skip(1) {
                    s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                s *= h / 3.0;
            }
            if let Some(k) = tail {
                s += 3.0 * h / 8.0
                    * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
            }
            s
        }
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI {
        y + 2.0 * PI
    } else if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Slack above zero tolerated before a phase is folded down by 2 pi.
pub const BRANCH_SLACK: f64 = 1e-9;

/// Representative of `x` modulo 2 pi on the branch `(-2 pi, 0]`, the range of
/// minus half a Bloch-sphere solid angle. Values within [`BRANCH_SLACK`] of
/// the upper end stay near zero instead of jumping to `-2 pi`.
pub fn canonical_phase(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).ceil();
    if y <= -2.0 * PI + BRANCH_SLACK {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Continuous argument of a sequence of complex numbers.
#[derive(Clone, Debug)]
pub struct PhaseTracker {
    last: Option<f64>,
    total: f64,
}

impl PhaseTracker {
    /// Starts tracking at a known absolute phase.
    pub fn starting_at(phase: f64) -> Self {
        Self {
            last: Some(wrap_to_pi(phase)),
            total: phase,
        }
    }

    /// Feeds the next value; returns the increment applied.
    pub fn push(&mut self, z: C64) -> f64 {
        let a = z.arg();
        let inc = match self.last {
            None => {
                self.total = a;
                0.0
            }
            Some(prev) => {
                let d = wrap_to_pi(a - prev);
                self.total += d;
                d
            }
        };
        self.last = Some(a);
        inc
    }

    pub fn phase(&self) -> f64 {
        self.total
    }
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Running first and second moments of a complex sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexMoments {
    re: CompensatedSum,
    im: CompensatedSum,
    sq: CompensatedSum,
    n: usize,
}

impl ComplexMoments {
    pub fn push(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
        self.sq.add(z.norm_sqr());
        self.n += 1;
    }

    pub fn merge(&mut self, other: &ComplexMoments) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
        self.sq.merge(&other.sq);
        self.n += other.n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> C64 {
        let n = self.n.max(1) as f64;
        C64::new(self.re.value() / n, self.im.value() / n)
    }

    /// Standard error of the mean, `sqrt((E|z|^2 - |E z|^2) / (n - 1) / n)`
    /// with the unbiased variance. Zero for fewer than two samples.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = (self.sq.value() / n - self.mean().norm_sqr()).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}
