//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature for small
//! vector-valued integrands.
//!
//! The error estimate per panel follows QUADPACK's rescaling of the
//! Gauss/Kronrod difference. Errors of the components are combined in the
//! Euclidean norm, so a complex integrand is integrated as `[re, im]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [-1, 1]; odd indices are the Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_932_299_894,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Result of one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    /// Estimated absolute error (Euclidean norm over components).
    pub abs_error: f64,
    /// Number of panels in the final partition.
    pub panels: usize,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on panel width; `None` for no cap. Used to keep each panel
    /// within half a period of an oscillatory factor.
    pub max_panel_width: Option<f64>,
    /// Bisections allowed beyond the initial partition.
    pub max_subdivisions: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_panel_width: None,
            max_subdivisions: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Panel<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Panel<N> {}

impl<const N: usize> PartialOrd for Panel<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Panel<N> {
    // Largest error first; ties broken by position for a deterministic order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rescale_error(diff: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = diff.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let floor = 50.0 * f64::EPSILON * res_abs;
        if floor > err {
            err = floor;
        }
    }
    err
}

/// Single 21-point Kronrod panel with its embedded 10-point Gauss estimate.
fn kronrod21<const N: usize, F>(f: &F, a: f64, b: f64) -> Panel<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut gauss = [0.0; N];
    let mut kronrod = [0.0; N];
    let mut res_abs = [0.0; N];
    let mut lo = [[0.0; N]; 10];
    let mut hi = [[0.0; N]; 10];

    for c in 0..N {
        kronrod[c] = fc[c] * WGK[10];
        res_abs[c] = (fc[c] * WGK[10]).abs();
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for c in 0..N {
            let sum = f1[c] + f2[c];
            kronrod[c] += WGK[j] * sum;
            res_abs[c] += WGK[j] * (f1[c].abs() + f2[c].abs());
            if j % 2 == 1 {
                gauss[c] += WG[j / 2] * sum;
            }
        }
        lo[j] = f1;
        hi[j] = f2;
    }

    let mut err2 = 0.0;
    let mut value = [0.0; N];
    for c in 0..N {
        let mean = 0.5 * kronrod[c];
        let mut res_asc = WGK[10] * (fc[c] - mean).abs();
        for j in 0..10 {
            res_asc += WGK[j] * ((lo[j][c] - mean).abs() + (hi[j][c] - mean).abs());
        }
        let width = half.abs();
        let e = rescale_error(
            (kronrod[c] - gauss[c]) * half,
            res_abs[c] * width,
            res_asc * width,
        );
        err2 += e * e;
        value[c] = kronrod[c] * half;
    }

    Panel {
        a,
        b,
        value,
        error: err2.sqrt(),
    }
}

fn norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates `f` over `[a, b]` until the summed error estimate is below
/// `max(abs_tol, rel_tol · |I|)`.
pub fn integrate<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration limits must be finite: [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Integral {
            value: [0.0; N],
            abs_error: 0.0,
            panels: 0,
        });
    }

    let n_initial = match settings.max_panel_width {
        Some(w) if w > 0.0 => ((b - a).abs() / w).ceil().max(1.0) as usize,
        _ => 1,
    };
    let step = (b - a) / n_initial as f64;

    let mut heap = BinaryHeap::with_capacity(n_initial + settings.max_subdivisions + 1);
    let mut total = [0.0; N];
    let mut total_err = 0.0;
    for i in 0..n_initial {
        let lo = a + step * i as f64;
        let hi = if i + 1 == n_initial {
            b
        } else {
            a + step * (i + 1) as f64
        };
        let p = kronrod21(&f, lo, hi);
        for (t, v) in total.iter_mut().zip(p.value) {
            *t += v;
        }
        total_err += p.error;
        heap.push(p);
    }

    let target = |total: &[f64; N]| settings.abs_tol.max(settings.rel_tol * norm(total));
    let mut subdivisions = 0;
    while total_err > target(&total) {
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Quadrature {
                requested: target(&total),
                achieved: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("partition is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // panel cannot be split further in floating point
            return Err(Error::Quadrature {
                requested: target(&total),
                achieved: total_err,
                subdivisions,
            });
        }
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        for (c, t) in total.iter_mut().enumerate() {
            *t += left.value[c] + right.value[c] - worst.value[c];
        }
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }

    // Re-sum from the final partition to avoid drift from incremental updates.
    let mut value = [0.0; N];
    let mut abs_error = 0.0;
    let mut panels: Vec<Panel<N>> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    for p in &panels {
        for (v, pv) in value.iter_mut().zip(p.value) {
            *v += pv;
        }
        abs_error += p.error;
    }
    Ok(Integral {
        value,
        abs_error,
        panels: panels.len(),
    })
}
