//! Globally adaptive 7/15-point Gauss-Kronrod integration over a finite
//! interval that starts from a fixed partition into panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// Kronrod nodes on [0, 1] (symmetric), Kronrod weights, Gauss weights for
// the even-indexed nodes.
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

struct ByError(usize, f64);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.1 == other.1
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        self.1.total_cmp(&other.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Integrates `f` over `[lo, hi]`, starting from `initial_panels` equal
/// panels and bisecting the worst panel until the summed error estimate is
/// at most `tol` or `max_panels` is reached.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    initial_panels: usize,
    tol: f64,
    max_panels: usize,
) -> Integral {
    let n0 = initial_panels.max(1);
    let width = (hi - lo) / n0 as f64;
    let mut panels: Vec<Panel> = (0..n0)
        .map(|i| {
            let a = lo + width * i as f64;
            let b = if i + 1 == n0 { hi } else { lo + width * (i + 1) as f64 };
            gk15(&f, a, b)
        })
        .collect();
    let mut heap: BinaryHeap<ByError> = panels
        .iter()
        .enumerate()
        .map(|(i, p)| ByError(i, p.error))
        .collect();
    let mut total_error: f64 = panels.iter().map(|p| p.error).sum();
    let mut since_resum = 0usize;

    while total_error > tol && panels.len() < max_panels {
        let Some(ByError(i, _)) = heap.pop() else { break };
        let p = panels[i];
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // cannot split further in floating point
            continue;
        }
        let left = gk15(&f, p.lo, mid);
        let right = gk15(&f, mid, p.hi);
        total_error += left.error + right.error - p.error;
        panels[i] = left;
        heap.push(ByError(i, left.error));
        panels.push(right);
        heap.push(ByError(panels.len() - 1, right.error));
        since_resum += 1;
        if since_resum == 1024 {
            total_error = panels.iter().map(|p| p.error).sum();
            since_resum = 0;
        }
    }
    total_error = panels.iter().map(|p| p.error).sum();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
    Integral {
        value: pairwise_sum(&values),
        error: total_error,
        converged: total_error <= tol,
    }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}
