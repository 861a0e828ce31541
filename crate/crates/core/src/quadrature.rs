//! Globally adaptive Gauss–Kronrod quadrature (7-point Gauss, 15-point Kronrod).
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate meets `max(abs, rel * |value|)` or the interval budget is
//! spent. Local error estimates use the QUADPACK rescaling heuristic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-9,
            rel: 1e-8,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
    pub converged: bool,
    target: f64,
}

impl Estimate {
    /// Turns a non-converged estimate into a numeric-accuracy error.
    pub fn require(self, what: &str) -> Result<Estimate> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NumericAccuracy {
                what: what.to_string(),
                achieved: self.abs_error,
                target: self.target,
            })
        }
    }
}

/// One 15-point Kronrod panel: (kronrod value, error estimate, |f| integral).
pub fn kronrod_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err, res_abs)
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    integrate_panels(f, &[a, b], tol)
}

/// Adaptive integration over the union of consecutive intervals given by
/// `breakpoints`, which act as the initial partition (put known
/// singularities or oscillation nodes there).
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Estimate {
    assert!(breakpoints.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::with_capacity(breakpoints.len() * 2);
    let mut finished: Vec<Panel> = Vec::new();
    let mut value = 0.0;
    let mut err = 0.0;
    for w in breakpoints.windows(2) {
        let (v, e, _) = kronrod_panel(&mut f, w[0], w[1]);
        value += v;
        err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    let mut count = heap.len();
    loop {
        let target = tol.target(value);
        if !(value.is_finite() && err.is_finite()) {
            break;
        }
        if err <= target || count >= tol.max_intervals.max(breakpoints.len() - 1) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e3 * f64::EPSILON * mid.abs()
        {
            // Cannot subdivide further at machine resolution.
            finished.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1, _) = kronrod_panel(&mut f, worst.a, mid);
        let (v2, e2, _) = kronrod_panel(&mut f, mid, worst.b);
        value += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        count += 1;
    }
    // Re-sum in positional order so the result does not depend on the
    // accumulated rounding of the running totals.
    let mut all: Vec<Panel> = heap.into_vec();
    all.extend(finished);
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = all.iter().map(|p| p.value).sum();
    let err: f64 = all.iter().map(|p| p.err).sum();
    let target = tol.target(value);
    Estimate {
        value,
        abs_error: err,
        intervals: all.len(),
        converged: value.is_finite() && err <= target,
        target,
    }
}

/// Integrates over `[a, ∞)` through the map `x = a + s / (1 - s)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    tol: Tolerance,
) -> Estimate {
    integrate(
        |s| {
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}
