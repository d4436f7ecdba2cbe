//! Dense descriptor matching with subpixel refinement.
//!
//! A query descriptor is compared against every pixel of a target
//! descriptor map. The integer argmax of the resulting response map is
//! refined by evaluating a bicubic interpolant of the response on a
//! `1/refine_factor` grid over the 5x5 neighbourhood of the argmax.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Per-pixel unit-norm descriptors, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl DescriptorMap {
    /// Wraps raw data. Descriptors are expected to be unit-norm already;
    /// see [`DescriptorMap::normalized`] otherwise.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        if channels == 0 {
            return Err(Error::InvalidConfig("descriptor maps need at least one channel".into()));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Same as [`DescriptorMap::new`] but rescales each pixel's descriptor to unit length.
    pub fn normalized(width: usize, height: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        if channels > 0 {
            for px in data.chunks_mut(channels) {
                let n = px.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
                if n > 0.0 {
                    px.iter_mut().for_each(|x| *x = (*x as f64 / n) as f32);
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn descriptor(&self, u: usize, v: usize) -> &[f32] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Similarity scores of one query against every target pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ResponseMap {
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    /// Integer argmax; ties go to the lowest `v`, then the lowest `u`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &r) in self.values.iter().enumerate() {
            if r > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Bicubic (Catmull-Rom) interpolation with edge replication. Exact at pixel centers.
    pub fn sample_bicubic(&self, u: f64, v: f64) -> f64 {
        let u0 = u.floor();
        let v0 = v.floor();
        let wu = cubic_weights(u - u0);
        let wv = cubic_weights(v - v0);
        let (iu, iv) = (u0 as i64, v0 as i64);
        let mut acc = 0.0;
        for (j, wy) in wv.iter().enumerate() {
            if *wy == 0.0 {
                continue;
            }
            let y = (iv - 1 + j as i64).clamp(0, self.height as i64 - 1) as usize;
            let mut row = 0.0;
            for (i, wx) in wu.iter().enumerate() {
                if *wx == 0.0 {
                    continue;
                }
                let x = (iu - 1 + i as i64).clamp(0, self.width as i64 - 1) as usize;
                row += wx * self.at(x, y);
            }
            acc += wy * row;
        }
        acc
    }
}

fn cubic_weights(t: f64) -> [f64; 4] {
    // Keys kernel with a = -1/2, evaluated at offsets 1+t, t, 1-t, 2-t
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Dot product of `query` with every descriptor of `target`.
pub fn compute_response(query: &[f32], target: &DescriptorMap) -> Result<ResponseMap> {
    if query.len() != target.channels {
        return Err(Error::ChannelMismatch { expected: target.channels, found: query.len() });
    }
    let values = target
        .data
        .chunks_exact(target.channels)
        .map(|d| d.iter().zip(query).map(|(&a, &b)| a as f64 * b as f64).sum())
        .collect();
    Ok(ResponseMap { width: target.width, height: target.height, values })
}

/// Result of a subpixel match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubpixelMatch {
    pub pixel: Vec2,
    pub score: f64,
    /// Integer argmax the refinement started from.
    pub coarse: (usize, usize),
}

pub const DEFAULT_REFINE_FACTOR: u32 = 4;

/// Matches the descriptor at `query_pixel` (nearest pixel center) of
/// `source` into `target`.
pub fn match_subpixel(query_pixel: &Vec2, source: &DescriptorMap, target: &DescriptorMap, refine_factor: u32) -> Result<SubpixelMatch> {
    if source.channels != target.channels {
        return Err(Error::ChannelMismatch { expected: source.channels, found: target.channels });
    }
    if refine_factor == 0 {
        return Err(Error::InvalidConfig("refine factor must be at least 1".into()));
    }
    let (u, v) = (query_pixel.x.round(), query_pixel.y.round());
    if !(u >= 0.0 && v >= 0.0 && u < source.width as f64 && v < source.height as f64) {
        return Err(Error::OutOfBounds);
    }
    let query = source.descriptor(u as usize, v as usize);
    let response = compute_response(query, target)?;
    Ok(refine_peak(&response, refine_factor))
}

/// Maximizes the bicubic interpolant over the 5x5 window around the
/// integer argmax. Candidates outside the image are skipped; ties go to
/// the lowest `v`, then the lowest `u`.
pub fn refine_peak(response: &ResponseMap, refine_factor: u32) -> SubpixelMatch {
    let (au, av) = response.argmax();
    let rf = refine_factor as i64;
    let step = 1.0 / refine_factor as f64;
    let max_u = (response.width - 1) as f64;
    let max_v = (response.height - 1) as f64;
    let mut best = Vec2::new(au as f64, av as f64);
    let mut best_score = response.at(au, av);
    for j in -2 * rf..=2 * rf {
        let v = av as f64 + j as f64 * step;
        if v < 0.0 || v > max_v {
            continue;
        }
        for i in -2 * rf..=2 * rf {
            let u = au as f64 + i as f64 * step;
            if u < 0.0 || u > max_u {
                continue;
            }
            let s = response.sample_bicubic(u, v);
            let earlier = v < best.y || (v == best.y && u < best.x);
            if s > best_score || (s == best_score && earlier) {
                best_score = s;
                best = Vec2::new(u, v);
            }
        }
    }
    SubpixelMatch { pixel: best, score: best_score, coarse: (au, av) }
}

/// Anything that can produce a descriptor for a continuous image location.
pub trait DescriptorSource {
    fn channels(&self) -> usize;

    /// Writes the (not necessarily normalized) descriptor at `(u, v)` into `out`.
    fn describe(&self, u: f64, v: f64, out: &mut [f64]);

    /// Samples the source at every pixel center and unit-normalizes.
    fn render(&self, width: usize, height: usize) -> DescriptorMap {
        let c = self.channels();
        let mut buf = alloc::vec![0.0; c];
        let mut data = Vec::with_capacity(width * height * c);
        for v in 0..height {
            for u in 0..width {
                self.describe(u as f64, v as f64, &mut buf);
                let n = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
                data.extend(buf.iter().map(|x| (x / n) as f32));
            }
        }
        DescriptorMap { width, height, channels: c, data }
    }
}

/// Smooth trigonometric descriptor field: channel `c` at `(u, v)` is
/// `cos(a_c (u - du) + b_c (v - dv) + phi_c)`. Shifting `(du, dv)` moves
/// the whole field, which gives an exact correspondence oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDescriptor {
    pub freq_u: Vec<f64>,
    pub freq_v: Vec<f64>,
    pub phase: Vec<f64>,
    pub shift: Vec2,
}

impl AnalyticDescriptor {
    /// Field with `channels` channels whose frequencies and phases are drawn from `seed`.
    pub fn seeded(channels: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut freq_u = Vec::with_capacity(channels);
        let mut freq_v = Vec::with_capacity(channels);
        let mut phase = Vec::with_capacity(channels);
        for _ in 0..channels {
            let mag: f64 = rng.random_range(0.1..0.3);
            let ang: f64 = rng.random_range(0.0..core::f64::consts::TAU);
            freq_u.push(mag * ang.cos());
            freq_v.push(mag * ang.sin());
            phase.push(rng.random_range(0.0..core::f64::consts::TAU));
        }
        Self { freq_u, freq_v, phase, shift: Vec2::zeros() }
    }

    /// The same field translated by `shift` pixels.
    pub fn shifted(&self, shift: Vec2) -> Self {
        Self { shift: self.shift + shift, ..self.clone() }
    }
}

impl DescriptorSource for AnalyticDescriptor {
    fn channels(&self) -> usize {
        self.phase.len()
    }

    fn describe(&self, u: f64, v: f64, out: &mut [f64]) {
        let (x, y) = (u - self.shift.x, v - self.shift.y);
        for (c, o) in out.iter_mut().enumerate() {
            *o = (self.freq_u[c] * x + self.freq_v[c] * y + self.phase[c]).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(width: usize, height: usize) -> DescriptorMap {
        let c = width * height;
        let mut data = alloc::vec![0.0f32; c * c];
        for i in 0..c {
            data[i * c + i] = 1.0;
        }
        DescriptorMap::new(width, height, c, data).unwrap()
    }

    #[test]
    fn orthogonal_descriptors_give_delta_response() {
        let m = one_hot(4, 3);
        let q = m.descriptor(2, 1).to_vec();
        let r = compute_response(&q, &m).unwrap();
        for v in 0..3 {
            for u in 0..4 {
                let expected = if (u, v) == (2, 1) { 1.0 } else { 0.0 };
                assert_eq!(r.at(u, v), expected);
            }
        }
        assert_eq!(r.argmax(), (2, 1));
    }

    #[test]
    fn orthogonal_query_gives_zero_map() {
        let m = DescriptorMap::new(3, 2, 2, [1.0f32, 0.0].repeat(6)).unwrap();
        let r = compute_response(&[0.0, 1.0], &m).unwrap();
        assert!(r.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn channel_mismatch() {
        let m = one_hot(2, 2);
        assert_eq!(compute_response(&[1.0, 0.0], &m), Err(Error::ChannelMismatch { expected: 4, found: 2 }));
        let other = DescriptorMap::new(2, 2, 1, alloc::vec![1.0; 4]).unwrap();
        assert!(matches!(match_subpixel(&Vec2::zeros(), &m, &other, 4), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn out_of_bounds_query() {
        let m = one_hot(2, 2);
        assert_eq!(match_subpixel(&Vec2::new(2.0, 0.0), &m, &m, 4), Err(Error::OutOfBounds));
        assert_eq!(match_subpixel(&Vec2::new(0.0, -0.7), &m, &m, 4), Err(Error::OutOfBounds));
    }

    #[test]
    fn argmax_tie_breaks_low_v_then_u() {
        let r = ResponseMap { width: 3, height: 2, values: alloc::vec![0.0, 0.5, 0.5, 0.5, 0.0, 0.0] };
        assert_eq!(r.argmax(), (1, 0));
    }

    #[test]
    fn bicubic_is_exact_at_samples_and_reproduces_quadratics() {
        let (w, h) = (9, 7);
        let f = |u: f64, v: f64| 0.3 * u * u - 0.2 * u * v + 0.1 * v * v + u - 2.0;
        let values = (0..h).flat_map(|v| (0..w).map(move |u| f(u as f64, v as f64))).collect();
        let r = ResponseMap { width: w, height: h, values };
        assert_eq!(r.sample_bicubic(3.0, 4.0), f(3.0, 4.0));
        for &(u, v) in &[(3.25, 2.5), (4.75, 3.125), (2.5, 2.5)] {
            assert!((r.sample_bicubic(u, v) - f(u, v)).abs() < 1e-12, "{u} {v}");
        }
    }

    #[test]
    fn refine_factor_one_returns_integer_argmax() {
        let field = AnalyticDescriptor::seeded(24, 5);
        let src = field.render(40, 30);
        let dst = field.shifted(Vec2::new(1.4, 0.6)).render(40, 30);
        let m = match_subpixel(&Vec2::new(20.0, 15.0), &src, &dst, 1).unwrap();
        let resp = compute_response(src.descriptor(20, 15), &dst).unwrap();
        let (u, v) = resp.argmax();
        assert_eq!(m.pixel, Vec2::new(u as f64, v as f64));
        assert_eq!(m.score, resp.at(u, v));
    }
}
