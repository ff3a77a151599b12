//! Offline conditioning of logged signals: zero-phase Butterworth low-pass
//! filtering and numerical differentiation.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sampled multi-channel signal; one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub channels: DMatrix<f64>,
    pub rate: f64,
}

/// Allowed deviation of any step from the mean step before resampling.
const MAX_JITTER: f64 = 0.01;

impl TimeSeries {
    /// Validates timestamps and resamples onto a uniform grid (linear
    /// interpolation) when the step jitter exceeds 1%.
    pub fn new(t: Vec<f64>, channels: DMatrix<f64>) -> Result<Self> {
        if t.len() != channels.nrows() {
            return Err(Error::dim("time stamps", channels.nrows(), t.len()));
        }
        if t.len() < 2 {
            return Err(Error::Signal("need at least two samples".into()));
        }
        if channels.iter().any(|x| !x.is_finite()) || t.iter().any(|x| !x.is_finite()) {
            return Err(Error::Signal("non-finite sample".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Signal("timestamps must be strictly increasing".into()));
        }
        let n = t.len();
        let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
        let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= MAX_JITTER * dt);
        if uniform {
            return Ok(Self {
                t,
                channels,
                rate: 1.0 / dt,
            });
        }
        let grid: Vec<f64> = (0..n).map(|k| t[0] + dt * k as f64).collect();
        let mut out = DMatrix::zeros(n, channels.ncols());
        let mut seg = 0;
        for (k, &tk) in grid.iter().enumerate() {
            while seg + 2 < n && t[seg + 1] < tk {
                seg += 1;
            }
            let w = ((tk - t[seg]) / (t[seg + 1] - t[seg])).clamp(0.0, 1.0);
            for c in 0..channels.ncols() {
                out[(k, c)] = channels[(seg, c)] * (1.0 - w) + channels[(seg + 1, c)] * w;
            }
        }
        Ok(Self {
            t: grid,
            channels: out,
            rate: 1.0 / dt,
        })
    }

    pub fn uniform(rate: f64, t0: f64, channels: DMatrix<f64>) -> Self {
        let t = (0..channels.nrows()).map(|k| t0 + k as f64 / rate).collect();
        Self { t, channels, rate }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Low-pass settings used by the conditioning stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 5,
            cutoff_hz: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 3],
}

impl Section {
    /// Direct-form-II-transposed state giving a steady output for constant input `x0`.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let s2 = (self.b[2] - self.a[2]) * x0;
        let s1 = (self.b[1] - self.a[1]) * x0 + s2;
        [s1, s2]
    }

    fn run(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let [mut s1, mut s2] = self.steady_state(first);
        let Section { b, a } = *self;
        for xi in x.iter_mut() {
            let input = *xi;
            let y = b[0] * input + s1;
            s1 = b[1] * input - a[1] * y + s2;
            s2 = b[2] * input - a[2] * y;
            *xi = y;
        }
    }
}

/// Digital Butterworth low-pass as cascaded second-order sections, designed by
/// the bilinear transform with frequency prewarping. Every section has unit
/// DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    sections: Vec<Section>,
    pub order: usize,
    pub cutoff_hz: f64,
    pub rate: f64,
}

impl Butterworth {
    pub fn design(order: usize, cutoff_hz: f64, rate: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Signal("filter order must be at least 1".into()));
        }
        if !(cutoff_hz > 0.0) {
            return Err(Error::Signal("cutoff must be positive".into()));
        }
        if cutoff_hz >= rate / 2.0 {
            return Err(Error::Signal(format!(
                "cutoff {cutoff_hz} Hz is at or above the Nyquist frequency {} Hz",
                rate / 2.0
            )));
        }
        let fs2 = 2.0 * rate;
        let warped = fs2 * (std::f64::consts::PI * cutoff_hz / rate).tan();
        let bilinear = |s: Complex<f64>| (Complex::new(fs2, 0.0) + s) / (Complex::new(fs2, 0.0) - s);
        let mut sections = Vec::new();
        for k in 0..order / 2 {
            let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let s = Complex::from_polar(warped, theta);
            let z = bilinear(s);
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            let g = (1.0 + a1 + a2) / 4.0;
            sections.push(Section {
                b: [g, 2.0 * g, g],
                a: [1.0, a1, a2],
            });
        }
        if order % 2 == 1 {
            let z = bilinear(Complex::new(-warped, 0.0)).re;
            let a1 = -z;
            let g = (1.0 + a1) / 2.0;
            sections.push(Section {
                b: [g, g, 0.0],
                a: [1.0, a1, 0.0],
            });
        }
        Ok(Self {
            sections,
            order,
            cutoff_hz,
            rate,
        })
    }

    /// Magnitude response at `f` Hz.
    pub fn gain(&self, f: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f / self.rate;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = Complex::new(s.b[0], 0.0) + z1 * s.b[1] + z2 * s.b[2];
                let den = Complex::new(s.a[0], 0.0) + z1 * s.a[1] + z2 * s.a[2];
                (num / den).norm()
            })
            .product()
    }

    /// Causal single pass, initialized at steady state for the first sample.
    pub fn filter(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Edge padding length on each side.
    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Forward-backward filtering with odd-reflection padding of
    /// [`Butterworth::pad_len`] samples at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        let pad = self.pad_len();
        if n <= pad {
            return Err(Error::Signal(format!(
                "series too short: {n} samples, need more than {pad}"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
        self.filter(&mut ext);
        ext.reverse();
        self.filter(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Zero-phase low-pass of every channel.
pub fn butterworth_zero_phase(x: &TimeSeries, order: usize, cutoff_hz: f64) -> Result<TimeSeries> {
    let filt = Butterworth::design(order, cutoff_hz, x.rate)?;
    let mut out = x.channels.clone();
    for c in 0..out.ncols() {
        let col: Vec<f64> = x.channels.column(c).iter().copied().collect();
        let y = filt.filtfilt(&col)?;
        out.set_column(c, &nalgebra::DVector::from_vec(y));
    }
    Ok(TimeSeries {
        t: x.t.clone(),
        channels: out,
        rate: x.rate,
    })
}

/// Central differences with second-order one-sided endpoints.
pub fn differentiate(x: &TimeSeries) -> Result<TimeSeries> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Signal("need at least three samples to differentiate".into()));
    }
    let h = 1.0 / x.rate;
    let c = &x.channels;
    let mut d = DMatrix::zeros(n, c.ncols());
    for j in 0..c.ncols() {
        d[(0, j)] = (-3.0 * c[(0, j)] + 4.0 * c[(1, j)] - c[(2, j)]) / (2.0 * h);
        for i in 1..n - 1 {
            d[(i, j)] = (c[(i + 1, j)] - c[(i - 1, j)]) / (2.0 * h);
        }
        d[(n - 1, j)] = (3.0 * c[(n - 1, j)] - 4.0 * c[(n - 2, j)] + c[(n - 3, j)]) / (2.0 * h);
    }
    Ok(TimeSeries {
        t: x.t.clone(),
        channels: d,
        rate: x.rate,
    })
}

/// Differentiates `v` and, when `filter` is given, low-passes the result with
/// the same zero-phase filter.
pub fn estimate_acceleration(v: &TimeSeries, filter: Option<FilterSpec>) -> Result<TimeSeries> {
    let d = differentiate(v)?;
    match filter {
        Some(f) => butterworth_zero_phase(&d, f.order, f.cutoff_hz),
        None => Ok(d),
    }
}
