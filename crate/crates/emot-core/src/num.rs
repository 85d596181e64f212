// Float helpers routed through libm so the crate stays no_std.

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn powf(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        libm::pow(x, p)
    }
}

/// |a - b|^p
#[inline]
pub(crate) fn dist_p(a: f64, b: f64, p: f64) -> f64 {
    powf(abs(a - b), p)
}
