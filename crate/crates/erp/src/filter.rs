//! Butterworth design as second-order sections and forward-backward filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ErpError, Result};
use crate::exec::Execution;
use crate::recording::Recording;

/// One biquad, `[b0, b1, b2, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + self.b[1] * zi + self.b[2] * zi * zi;
        let den = 1.0 + self.a[0] * zi + self.a[1] * zi * zi;
        num / den
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Steady state of the transposed direct form for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z1 = self.b[2] - self.a[1] * g;
        [self.b[1] - self.a[0] * g + z1, z1]
    }
}

/// Edge extension used before forward-backward filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Point reflection about the end sample (`2·x[0] − x[i]`).
    #[default]
    Odd,
    /// Mirror reflection (`x[i]`).
    Even,
    /// Repeat the end sample. Suits short, baseline-corrected epochs, where
    /// a reflection would fold the response back into the window.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub sample_rate: f64,
    pub order: usize,
    /// Lower edge in Hz, 0 for a pure low-pass.
    pub lo: f64,
    pub hi: f64,
    pub sections: Vec<Section>,
    max_pole_radius: f64,
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = 2.0 * fs;
    (k + s) / (k - s)
}

impl Butterworth {
    /// Designs a low-pass (`lo == 0`) or band-pass filter of the given order.
    pub fn design(order: usize, lo: f64, hi: f64, sample_rate: f64) -> Result<Butterworth> {
        if order == 0 {
            return Err(ErpError::InvalidOrder);
        }
        let nyquist = sample_rate / 2.0;
        if !(sample_rate > 0.0 && lo >= 0.0 && lo < hi && hi < nyquist) || !(lo.is_finite() && hi.is_finite()) {
            return Err(ErpError::InvalidBand { lo, hi, sample_rate });
        }

        // Analog prototype poles, left half plane, unit cutoff.
        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let m = 2.0 * k as f64 - (order as f64 - 1.0);
                -Complex64::from_polar(1.0, PI * m / (2.0 * order as f64))
            })
            .collect();

        let w_hi = prewarp(hi, sample_rate);
        let (analog, reference): (Vec<Complex64>, f64) = if lo == 0.0 {
            (proto.iter().map(|p| p * w_hi).collect(), 0.0)
        } else {
            let w_lo = prewarp(lo, sample_rate);
            let w0 = (w_lo * w_hi).sqrt();
            let bw = w_hi - w_lo;
            let mut poles = Vec::with_capacity(2 * order);
            for p in &proto {
                let half = p * bw / 2.0;
                let root = (half * half - w0 * w0).sqrt();
                poles.push(half + root);
                poles.push(half - root);
            }
            (poles, 2.0 * (w0 / (2.0 * sample_rate)).atan())
        };

        let digital: Vec<Complex64> = analog.iter().map(|&s| bilinear(s, sample_rate)).collect();
        let max_pole_radius = digital.iter().map(|p| p.norm()).fold(0.0, f64::max);

        // Pair each upper-half-plane pole with its conjugate; real poles stand alone.
        let mut complex: Vec<Complex64> = digital.iter().copied().filter(|p| p.im > 1e-12).collect();
        let mut real: Vec<f64> = digital.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
        complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
        real.sort_by(f64::total_cmp);

        let bandpass = lo > 0.0;
        let mut sections = Vec::new();
        for p in complex {
            let b = if bandpass { [1.0, 0.0, -1.0] } else { [1.0, 2.0, 1.0] };
            sections.push(Section {
                b,
                a: [-2.0 * p.re, p.norm_sqr()],
            });
        }
        for pair in real.chunks(2) {
            let section = match *pair {
                [p] => Section {
                    b: if bandpass { [1.0, -1.0, 0.0] } else { [1.0, 1.0, 0.0] },
                    a: [-p, 0.0],
                },
                [p, q] => Section {
                    b: if bandpass { [1.0, 0.0, -1.0] } else { [1.0, 2.0, 1.0] },
                    a: [-(p + q), p * q],
                },
                _ => unreachable!(),
            };
            sections.push(section);
        }

        // Unit gain at DC (low-pass) or at the digital band centre.
        let z_ref = Complex64::from_polar(1.0, reference);
        for s in &mut sections {
            let g = s.response(z_ref).norm();
            for b in &mut s.b {
                *b /= g;
            }
        }
        let total: Complex64 = sections.iter().map(|s| s.response(z_ref)).product();
        if total.re < 0.0 {
            for b in &mut sections[0].b {
                *b = -*b;
            }
        }

        Ok(Butterworth {
            sample_rate,
            order,
            lo,
            hi,
            sections,
            max_pole_radius,
        })
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * f / self.sample_rate);
        self.sections.iter().map(|s| s.response(z)).product()
    }

    /// Samples for the slowest pole's impulse response to decay to 1%.
    pub fn settle_samples(&self) -> usize {
        let r = self.max_pole_radius;
        if r <= 0.0 {
            return 1;
        }
        ((0.01f64).ln() / r.ln()).ceil().max(1.0) as usize
    }

    /// Edge padding used by [`Butterworth::filtfilt`] for a signal of length `n`.
    pub fn pad_len(&self, n: usize) -> usize {
        (3 * self.settle_samples()).min(n.saturating_sub(1))
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let zero = vec![[0.0; 2]; self.sections.len()];
        self.run(&mut y, &zero);
        y
    }

    fn run(&self, y: &mut [f64], init: &[[f64; 2]]) {
        for (s, z0) in self.sections.iter().zip(init) {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let [mut z1, mut z2] = *z0;
            for v in y.iter_mut() {
                let x = *v;
                let out = b0 * x + z1;
                z1 = b1 * x - a1 * out + z2;
                z2 = b2 * x - a2 * out;
                *v = out;
            }
        }
    }

    /// Per-section states for a step of height 1 through the whole cascade.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z1, z2] = s.step_state();
                let st = [z1 * scale, z2 * scale];
                scale *= s.dc_gain();
                st
            })
            .collect()
    }

    /// Forward-backward filtering with odd-reflection padding and
    /// step-response initial conditions at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        self.filtfilt_with(x, Padding::Odd)
    }

    pub fn filtfilt_with(&self, x: &[f64], padding: Padding) -> Vec<f64> {
        self.filtfilt_padded(x, padding, self.pad_len(x.len()))
    }

    /// As [`Butterworth::filtfilt_with`] with an explicit pad length (capped at `n − 1`).
    pub fn filtfilt_padded(&self, x: &[f64], padding: Padding, pad: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = pad.min(n - 1);
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        match padding {
            Padding::Odd => {
                ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
                ext.extend_from_slice(x);
                ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
            }
            Padding::Even => {
                ext.extend((1..=pad).rev().map(|i| x[i]));
                ext.extend_from_slice(x);
                ext.extend((1..=pad).map(|i| x[n - 1 - i]));
            }
            Padding::Constant => {
                ext.extend(std::iter::repeat_n(first, pad));
                ext.extend_from_slice(x);
                ext.extend(std::iter::repeat_n(last, pad));
            }
        }

        let zi = self.step_states();
        let scaled = |v: f64| zi.iter().map(|[a, b]| [a * v, b * v]).collect::<Vec<_>>();

        let init = scaled(ext[0]);
        self.run(&mut ext, &init);
        ext.reverse();
        let init = scaled(ext[0]);
        self.run(&mut ext, &init);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase Butterworth filtering of every channel.
pub fn bandpass_zero_phase(rec: &Recording, lo: f64, hi: f64, order: usize, exec: Execution) -> Result<Recording> {
    let filter = Butterworth::design(order, lo, hi, rec.sample_rate)?;
    let data = exec.map(&rec.data, |ch| filter.filtfilt(ch));
    Ok(Recording { data, ..rec.clone() })
}
