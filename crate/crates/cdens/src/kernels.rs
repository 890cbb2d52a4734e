//! Compactly supported second-order kernels and the product kernel.
//!
//! All kernels live on [-1, 1], are symmetric, and integrate to one. Moments
//! of the form `∫ u^j K(u) du` over (possibly truncated) windows are computed
//! by Gauss-Legendre quadrature, which is exact here because every kernel is
//! piecewise polynomial; these moments drive the plug-in bandwidth constants,
//! including their boundary-truncated variants.

#![allow(clippy::excessive_precision)] // quadrature tables keep the published digits

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family shared by both estimation stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Epanechnikov,
    Uniform,
    Triangular,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Uniform => "uniform",
            KernelFamily::Triangular => "triangular",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelFamily::Epanechnikov),
            "uniform" => Ok(KernelFamily::Uniform),
            "triangular" => Ok(KernelFamily::Triangular),
            other => Err(Error::InvalidConfig(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Evaluate the kernel at `u`. Zero outside [-1, 1]; the endpoint is evaluated
/// as written, so the uniform kernel keeps mass at |u| = 1.
pub fn kernel_value(family: KernelFamily, u: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    match family {
        KernelFamily::Epanechnikov => 0.75 * (1.0 - u * u),
        KernelFamily::Uniform => 0.5,
        KernelFamily::Triangular => 1.0 - u.abs(),
    }
}

/// Product kernel with bandwidth scaling: `∏_k K(u_k / h) / h`.
pub fn product_kernel(family: KernelFamily, u: &[f64], h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "bandwidth must be > 0, got {h}"
        )));
    }
    let mut out = 1.0;
    for &uk in u {
        let k = kernel_value(family, uk / h) / h;
        if k == 0.0 {
            return Ok(0.0);
        }
        out *= k;
    }
    Ok(out)
}

// 16-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree
// up to 31, which covers every kernel moment used in this crate.
const GL_NODES: [f64; 8] = [
    0.095_012_509_837_637_440_185,
    0.281_603_550_779_258_913_23,
    0.458_016_777_657_227_386_34,
    0.617_876_244_402_643_748_45,
    0.755_404_408_355_003_033_895,
    0.865_631_202_387_831_743_88,
    0.944_575_023_073_232_576_08,
    0.989_400_934_991_649_932_6,
];
const GL_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_496_285,
    0.182_603_415_044_923_588_867,
    0.169_156_519_395_002_538_189,
    0.149_595_988_816_576_732_081,
    0.124_628_971_255_533_872_052,
    0.095_158_511_682_492_784_81,
    0.062_253_523_938_647_892_863,
    0.027_152_459_411_754_094_852,
];

/// 16-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub(crate) fn gl16<F: Fn(f64) -> f64>(a: f64, b: f64, f: &F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        let t = half * GL_NODES[i];
        acc += GL_WEIGHTS[i] * (f(mid - t) + f(mid + t));
    }
    acc * half
}

/// `∫ u^j K(u) du` over `[lo, hi] ∩ [-1, 1]`, split at zero so the
/// triangular kernel's kink is handled exactly.
pub fn kernel_moment(family: KernelFamily, j: usize, lo: f64, hi: f64) -> f64 {
    let a = lo.max(-1.0);
    let b = hi.min(1.0);
    if b <= a {
        return 0.0;
    }
    let f = |u: f64| u.powi(j as i32) * kernel_value(family, u);
    if a < 0.0 && b > 0.0 {
        gl16(a, 0.0, &f) + gl16(0.0, b, &f)
    } else {
        gl16(a, b, &f)
    }
}

/// `∫ u^j K(u)^2 du` over the truncated window (used in tests and checks).
pub fn kernel_square_moment(family: KernelFamily, j: usize, lo: f64, hi: f64) -> f64 {
    let a = lo.max(-1.0);
    let b = hi.min(1.0);
    if b <= a {
        return 0.0;
    }
    let f = |u: f64| {
        let k = kernel_value(family, u);
        u.powi(j as i32) * k * k
    };
    if a < 0.0 && b > 0.0 {
        gl16(a, 0.0, &f) + gl16(0.0, b, &f)
    } else {
        gl16(a, b, &f)
    }
}
