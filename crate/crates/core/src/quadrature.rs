//! Adaptive Gauss–Kronrod (7/15) integration of vector-valued integrands.

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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone)]
pub struct Integral {
    pub values: Vec<f64>,
    /// Sum over accepted panels of the max-component `|K15 - G7|`.
    pub error: f64,
}

/// Integrates `f: R -> R^dim` over `[a, b]` to absolute tolerance `tol`.
///
/// `f(x, out)` writes the integrand components into `out`. The interval is
/// first cut into `panels` equal pieces, then bisected until each piece's
/// Kronrod/Gauss discrepancy is within its length-weighted share of `tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, dim: usize, panels: usize, tol: f64) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]),
{
    let mut values = vec![0.0; dim];
    let mut error = 0.0;
    let width = b - a;
    let mut scratch = Scratch::new(dim);
    let mut stack: Vec<(f64, f64, u32)> = (0..panels.max(1))
        .rev()
        .map(|i| {
            let lo = a + width * i as f64 / panels as f64;
            let hi = a + width * (i + 1) as f64 / panels as f64;
            (lo, hi, 0)
        })
        .collect();

    while let Some((lo, hi, depth)) = stack.pop() {
        let err = scratch.kronrod(&f, lo, hi);
        let budget = tol * (hi - lo) / width;
        if err <= budget || depth >= MAX_DEPTH {
            for (v, k) in values.iter_mut().zip(&scratch.kronrod) {
                *v += k;
            }
            error += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }

    if error > tol {
        return Err(Error::Quadrature {
            achieved: error,
            target: tol,
        });
    }
    Ok(Integral { values, error })
}

struct Scratch {
    fx: Vec<f64>,
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            fx: vec![0.0; dim],
            kronrod: vec![0.0; dim],
            gauss: vec![0.0; dim],
        }
    }

    fn kronrod<F: Fn(f64, &mut [f64])>(&mut self, f: &F, lo: f64, hi: f64) -> f64 {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.kronrod.iter_mut().for_each(|x| *x = 0.0);
        self.gauss.iter_mut().for_each(|x| *x = 0.0);

        f(center, &mut self.fx);
        for i in 0..self.fx.len() {
            self.kronrod[i] += WGK[7] * self.fx[i];
            self.gauss[i] += WG[3] * self.fx[i];
        }
        for (j, (&x, &wk)) in XGK.iter().zip(&WGK).take(7).enumerate() {
            for sign in [-1.0, 1.0] {
                f(center + sign * half * x, &mut self.fx);
                for i in 0..self.fx.len() {
                    self.kronrod[i] += wk * self.fx[i];
                    if j % 2 == 1 {
                        self.gauss[i] += WG[j / 2] * self.fx[i];
                    }
                }
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..self.fx.len() {
            self.kronrod[i] *= half;
            self.gauss[i] *= half;
            err = err.max((self.kronrod[i] - self.gauss[i]).abs());
        }
        err
    }
}
