//! Oriented band-pass filter bank and FFT-based circular convolution.
//!
//! The bank consists of complex filters indexed by scale ν and orientation μ.
//! Each filter is a plane wave with wave vector
//! `k = k_max / spacing^ν · (cos φ_μ, sin φ_μ)`, `φ_μ = π μ / orientations`,
//! under a Gaussian envelope of width `sigma / ‖k‖`, with an overall gain of
//! `‖k‖² / sigma²`. A constant is subtracted from the oscillation so that the
//! sampled filter sums to zero exactly: it responds to structure, not to mean
//! brightness. The zero-mean constant is computed from the sampled grid
//! itself (the ratio `Σ env·cos(k·z) / Σ env`), which keeps the sum at zero
//! for any window size, including small ones where the closed-form
//! `exp(-sigma²/2)` limit is off by a few percent.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub type Complex64 = Complex<f64>;

/// Filter bank geometry and frequency layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborParams {
    /// Number of scales ν = 0..scales. More scales → lower frequencies.
    pub scales: usize,
    /// Number of orientations μ = 0..orientations, spread over half a turn.
    pub orientations: usize,
    /// Peak spatial frequency (radians per pixel) at scale 0.
    pub k_max: f64,
    /// Frequency ratio between adjacent scales; must exceed 1.
    pub spacing: f64,
    /// Envelope width parameter; larger values mean more visible wave cycles.
    pub sigma: f64,
    /// Square support side length in pixels; odd so the center is a sample.
    pub window: usize,
}

impl Default for GaborParams {
    fn default() -> Self {
        GaborParams {
            scales: 5,
            orientations: 8,
            k_max: std::f64::consts::FRAC_PI_2,
            spacing: std::f64::consts::SQRT_2,
            sigma: 2.0 * std::f64::consts::PI,
            window: 33,
        }
    }
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::Filter { reason });
        if self.scales == 0 || self.orientations == 0 {
            return fail(format!(
                "need at least one scale and one orientation, got {}x{}",
                self.scales, self.orientations
            ));
        }
        if !(self.k_max > 0.0 && self.k_max.is_finite()) {
            return fail(format!("k_max must be positive and finite, got {}", self.k_max));
        }
        if !(self.spacing > 1.0 && self.spacing.is_finite()) {
            return fail(format!("spacing must exceed 1, got {}", self.spacing));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be positive and finite, got {}", self.sigma));
        }
        if self.window < 3 || self.window % 2 == 0 {
            return fail(format!("window must be odd and >= 3, got {}", self.window));
        }
        Ok(())
    }

    /// Wave vector for one (scale, orientation) pair.
    pub fn wave_vector(&self, scale: usize, orientation: usize) -> (f64, f64) {
        let k_mag = self.k_max / self.spacing.powi(scale as i32);
        let phi = std::f64::consts::PI * orientation as f64 / self.orientations as f64;
        (k_mag * phi.cos(), k_mag * phi.sin())
    }
}

/// One sampled complex filter, `window`×`window`, row-major, centered.
#[derive(Debug, Clone)]
pub struct GaborKernel {
    pub scale: usize,
    pub orientation: usize,
    pub window: usize,
    pub grid: Vec<Complex64>,
}

/// Samples a single filter on its support grid.
pub fn make_kernel(params: &GaborParams, scale: usize, orientation: usize) -> Result<GaborKernel> {
    params.validate()?;
    if scale >= params.scales || orientation >= params.orientations {
        return Err(Error::Filter {
            reason: format!(
                "filter index ({scale}, {orientation}) out of range for a {}x{} bank",
                params.scales, params.orientations
            ),
        });
    }
    let (kx, ky) = params.wave_vector(scale, orientation);
    let k2 = kx * kx + ky * ky;
    let s2 = params.sigma * params.sigma;
    let gain = k2 / s2;
    let half = (params.window / 2) as isize;
    let n = params.window * params.window;

    let mut env = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for dy in -half..=half {
        for dx in -half..=half {
            let r2 = (dx * dx + dy * dy) as f64;
            env.push((-k2 * r2 / (2.0 * s2)).exp());
            arg.push(kx * dx as f64 + ky * dy as f64);
        }
    }
    // Zero-mean constant for this sampled grid. The imaginary part needs no
    // correction: Σ env·sin vanishes by the grid's point symmetry.
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += env[i] * arg[i].cos();
        den += env[i];
    }
    let dc = num / den;

    let grid = (0..n)
        .map(|i| Complex64::new(gain * env[i] * (arg[i].cos() - dc), gain * env[i] * arg[i].sin()))
        .collect();
    Ok(GaborKernel {
        scale,
        orientation,
        window: params.window,
        grid,
    })
}

/// Samples the whole bank, scale-major: (0,0), (0,1), ..., (1,0), ...
pub fn make_bank(params: &GaborParams) -> Result<Vec<GaborKernel>> {
    params.validate()?;
    let mut bank = Vec::with_capacity(params.scales * params.orientations);
    for scale in 0..params.scales {
        for orientation in 0..params.orientations {
            bank.push(make_kernel(params, scale, orientation)?);
        }
    }
    Ok(bank)
}

/// Complex response of one filter over a full image.
#[derive(Debug, Clone)]
pub struct ResponseField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<Complex64>,
}

/// Pointwise modulus of a response field.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Converts a response field to its modulus image.
pub fn magnitude(field: &ResponseField) -> MagnitudeImage {
    MagnitudeImage {
        width: field.width,
        height: field.height,
        values: field.values.iter().map(|c| c.norm()).collect(),
    }
}

/// Cached 1-D FFT plans for one image geometry, applied row-wise then
/// column-wise. The inverse is normalized by `1 / (width·height)`.
#[derive(Clone)]
struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(width: usize, height: usize) -> Fft2 {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, values: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(values.len(), self.width * self.height);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for r in values.chunks_exact_mut(self.width) {
            row.process(r);
        }
        let mut column = vec![Complex64::default(); self.height];
        for x in 0..self.width {
            for y in 0..self.height {
                column[y] = values[y * self.width + x];
            }
            col.process(&mut column);
            for y in 0..self.height {
                values[y * self.width + x] = column[y];
            }
        }
        if inverse {
            let scale = 1.0 / (self.width * self.height) as f64;
            for v in values.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// Embeds a centered kernel into a `width`×`height` grid with its center at
/// lattice position (0, 0), wrapping negative offsets around the edges. This
/// is the layout whose spectrum multiplies to a centered circular
/// convolution.
fn embed_kernel(kernel: &GaborKernel, width: usize, height: usize) -> Vec<Complex64> {
    let mut padded = vec![Complex64::default(); width * height];
    let half = (kernel.window / 2) as isize;
    for dy in -half..=half {
        for dx in -half..=half {
            let src = ((dy + half) as usize) * kernel.window + (dx + half) as usize;
            let x = dx.rem_euclid(width as isize) as usize;
            let y = dy.rem_euclid(height as isize) as usize;
            padded[y * width + x] = kernel.grid[src];
        }
    }
    padded
}

fn check_window_fits(window: usize, width: usize, height: usize) -> Result<()> {
    if window > width || window > height {
        return Err(Error::Filter {
            reason: format!("image {width}x{height} is smaller than the {window}x{window} filter window"),
        });
    }
    Ok(())
}

/// Circular convolution of an image with one filter, computed in the
/// frequency domain. The image must be at least as large as the window.
///
/// The result at (x, y) equals `Σ_d g(d) · I((x - d_x) mod W, (y - d_y) mod H)`
/// with `d` ranging over the centered window.
pub fn convolve_fft(image: &GrayImage, kernel: &GaborKernel) -> Result<ResponseField> {
    let (w, h) = (image.width(), image.height());
    check_window_fits(kernel.window, w, h)?;
    let fft = Fft2::new(w, h);
    let mut img: Vec<Complex64> = image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.transform(&mut img, false);
    let mut ker = embed_kernel(kernel, w, h);
    fft.transform(&mut ker, false);
    for (a, b) in img.iter_mut().zip(&ker) {
        *a *= b;
    }
    fft.transform(&mut img, true);
    Ok(ResponseField {
        width: w,
        height: h,
        values: img,
    })
}

/// A filter bank bound to a fixed image geometry: FFT plans and all kernel
/// spectra are computed once, so repeated application over a dataset only
/// pays for the per-image transforms.
pub struct GaborTransform {
    width: usize,
    height: usize,
    bank_len: usize,
    spectra: Vec<Vec<Complex64>>,
    fft: Fft2,
}

impl GaborTransform {
    pub fn new(params: &GaborParams, width: usize, height: usize) -> Result<GaborTransform> {
        params.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::Filter {
                reason: format!("image geometry must be positive, got {width}x{height}"),
            });
        }
        check_window_fits(params.window, width, height)?;
        let fft = Fft2::new(width, height);
        let bank = make_bank(params)?;
        let spectra = bank
            .iter()
            .map(|k| {
                let mut padded = embed_kernel(k, width, height);
                fft.transform(&mut padded, false);
                padded
            })
            .collect::<Vec<_>>();
        Ok(GaborTransform {
            width,
            height,
            bank_len: bank.len(),
            spectra,
            fft,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of filters in the bank.
    pub fn len(&self) -> usize {
        self.bank_len
    }

    pub fn is_empty(&self) -> bool {
        self.bank_len == 0
    }

    /// Applies every filter and returns the modulus images in bank order.
    /// The filters are processed in parallel.
    pub fn apply(&self, image: &GrayImage) -> Result<Vec<MagnitudeImage>> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::Filter {
                reason: format!(
                    "image is {}x{} but the transform was built for {}x{}",
                    image.width(),
                    image.height(),
                    self.width,
                    self.height
                ),
            });
        }
        let mut img: Vec<Complex64> = image.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.transform(&mut img, false);
        let out = self
            .spectra
            .par_iter()
            .map(|spectrum| {
                let mut prod: Vec<Complex64> =
                    img.iter().zip(spectrum).map(|(a, b)| a * b).collect();
                self.fft.transform(&mut prod, true);
                MagnitudeImage {
                    width: self.width,
                    height: self.height,
                    values: prod.iter().map(|c| c.norm()).collect(),
                }
            })
            .collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn small_params(window: usize) -> GaborParams {
        GaborParams {
            window,
            ..GaborParams::default()
        }
    }

    /// Reference implementation: direct spatial-domain circular convolution.
    fn convolve_direct(image: &GrayImage, kernel: &GaborKernel) -> Vec<Complex64> {
        let (w, h) = (image.width() as isize, image.height() as isize);
        let half = (kernel.window / 2) as isize;
        let mut out = vec![Complex64::default(); (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut acc = Complex64::default();
                for dy in -half..=half {
                    for dx in -half..=half {
                        let g = kernel.grid
                            [((dy + half) * kernel.window as isize + dx + half) as usize];
                        let sx = (x - dx).rem_euclid(w) as usize;
                        let sy = (y - dy).rem_euclid(h) as usize;
                        acc += g * image.get(sx, sy);
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| rng.random_range(0.0..=255.0)).collect();
        GrayImage::new(w, h, data).unwrap()
    }

    #[test]
    fn bank_has_scales_times_orientations_filters_in_order() {
        let bank = make_bank(&GaborParams::default()).unwrap();
        assert_eq!(bank.len(), 40);
        assert_eq!((bank[0].scale, bank[0].orientation), (0, 0));
        assert_eq!((bank[7].scale, bank[7].orientation), (0, 7));
        assert_eq!((bank[8].scale, bank[8].orientation), (1, 0));
        assert_eq!((bank[39].scale, bank[39].orientation), (4, 7));
        assert!(bank.iter().all(|k| k.grid.len() == 33 * 33));
    }

    #[test]
    fn wave_vectors_follow_the_geometric_and_angular_layout() {
        let p = GaborParams::default();
        for scale in 0..p.scales - 1 {
            let (ax, ay) = p.wave_vector(scale, 0);
            let (bx, by) = p.wave_vector(scale + 1, 0);
            let ratio = (ax * ax + ay * ay).sqrt() / (bx * bx + by * by).sqrt();
            assert!((ratio - p.spacing).abs() < 1e-12);
        }
        let (kx, ky) = p.wave_vector(0, 0);
        assert!((kx - p.k_max).abs() < 1e-12 && ky.abs() < 1e-12);
        let (kx, ky) = p.wave_vector(0, 4); // φ = π/2
        assert!(kx.abs() < 1e-12 && (ky - p.k_max).abs() < 1e-12);
    }

    #[test]
    fn every_filter_sums_to_zero() {
        for k in make_bank(&GaborParams::default()).unwrap() {
            let sum: Complex64 = k.grid.iter().sum();
            let mass: f64 = k.grid.iter().map(|c| c.norm()).sum();
            assert!(
                sum.norm() <= 1e-6 * mass,
                "filter ({}, {}): |sum| = {:e}, mass = {:e}",
                k.scale,
                k.orientation,
                sum.norm(),
                mass
            );
        }
    }

    #[test]
    fn zero_mean_holds_even_for_tiny_windows() {
        for window in [3, 5, 9, 17] {
            for k in make_bank(&small_params(window)).unwrap() {
                let sum: Complex64 = k.grid.iter().sum();
                let mass: f64 = k.grid.iter().map(|c| c.norm()).sum();
                assert!(sum.norm() <= 1e-6 * mass, "window {window}");
            }
        }
    }

    #[test]
    fn flat_image_response_is_negligible() {
        let img = GrayImage::new(16, 16, vec![200.0; 256]).unwrap();
        let kernel = make_kernel(&small_params(9), 0, 3).unwrap();
        let resp = convolve_fft(&img, &kernel).unwrap();
        let peak = resp.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mass: f64 = kernel.grid.iter().map(|c| c.norm()).sum();
        assert!(peak <= 1e-9 * 200.0 * mass, "peak {peak:e}");
    }

    #[test]
    fn params_validation_rejects_bad_values() {
        let p = GaborParams::default();
        assert!(GaborParams { window: 4, ..p.clone() }.validate().is_err());
        assert!(GaborParams { window: 1, ..p.clone() }.validate().is_err());
        assert!(GaborParams { spacing: 1.0, ..p.clone() }.validate().is_err());
        assert!(GaborParams { sigma: 0.0, ..p.clone() }.validate().is_err());
        assert!(GaborParams { k_max: f64::INFINITY, ..p.clone() }.validate().is_err());
        assert!(GaborParams { scales: 0, ..p.clone() }.validate().is_err());
        assert!(make_kernel(&p, 5, 0).is_err());
    }

    #[test]
    fn impulse_image_reproduces_the_filter_around_the_impulse() {
        let (w, h) = (16, 16);
        let mut data = vec![0.0; w * h];
        data[5 * w + 6] = 255.0; // impulse at (6, 5)
        let img = GrayImage::new(w, h, data).unwrap();
        let kernel = make_kernel(&small_params(9), 1, 2).unwrap();
        let resp = convolve_fft(&img, &kernel).unwrap();
        let peak = kernel.grid.iter().map(|c| c.norm()).fold(0.0, f64::max) * 255.0;
        let half = 4isize;
        for dy in -half..=half {
            for dx in -half..=half {
                let expected =
                    kernel.grid[((dy + half) * 9 + dx + half) as usize] * 255.0;
                let x = (6 + dx).rem_euclid(w as isize) as usize;
                let y = (5 + dy).rem_euclid(h as isize) as usize;
                let got = resp.values[y * w + x];
                assert!((got - expected).norm() <= 1e-10 * peak);
            }
        }
    }

    #[test]
    fn fft_convolution_matches_direct_convolution() {
        let img = random_image(16, 12, 77);
        for (scale, orientation) in [(0, 0), (1, 3), (4, 7)] {
            let kernel = make_kernel(&small_params(9), scale, orientation).unwrap();
            let fft = convolve_fft(&img, &kernel).unwrap();
            let direct = convolve_direct(&img, &kernel);
            let scale_ref = direct.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in fft.values.iter().zip(&direct) {
                assert!((a - b).norm() <= 1e-10 * scale_ref);
            }
        }
    }

    #[test]
    fn orientation_zero_prefers_vertical_edges() {
        // μ=0 puts the wave vector along +x, so intensity changes across x
        // (vertical stripes) excite it more than changes across y.
        let (w, h) = (32, 32);
        let vertical: Vec<f64> = (0..w * h)
            .map(|i| if (i % w) % 8 < 4 { 0.0 } else { 255.0 })
            .collect();
        let horizontal: Vec<f64> = (0..w * h)
            .map(|i| if (i / w) % 8 < 4 { 0.0 } else { 255.0 })
            .collect();
        let kernel = make_kernel(&small_params(17), 2, 0).unwrap();
        let energy = |data: Vec<f64>| -> f64 {
            let img = GrayImage::new(w, h, data).unwrap();
            let resp = convolve_fft(&img, &kernel).unwrap();
            resp.values.iter().map(|c| c.norm_sqr()).sum()
        };
        assert!(energy(vertical) > 10.0 * energy(horizontal));
    }

    #[test]
    fn magnitude_is_the_complex_modulus() {
        let field = ResponseField {
            width: 2,
            height: 1,
            values: vec![Complex64::new(3.0, 4.0), Complex64::new(-1.0, 0.0)],
        };
        assert_eq!(magnitude(&field).values, vec![5.0, 1.0]);
    }

    #[test]
    fn transform_matches_per_kernel_convolution_bitwise() {
        let params = small_params(9);
        let img = random_image(16, 16, 3);
        let transform = GaborTransform::new(&params, 16, 16).unwrap();
        let mags = transform.apply(&img).unwrap();
        assert_eq!(mags.len(), 40);
        let bank = make_bank(&params).unwrap();
        for (m, k) in mags.iter().zip(&bank) {
            let reference = magnitude(&convolve_fft(&img, k).unwrap());
            assert_eq!(m.values, reference.values, "filter ({}, {})", k.scale, k.orientation);
        }
    }

    #[test]
    fn transform_rejects_mismatched_geometry_and_small_images() {
        let params = small_params(9);
        let transform = GaborTransform::new(&params, 16, 16).unwrap();
        let img = random_image(8, 8, 1);
        assert!(transform.apply(&img).is_err());
        assert!(GaborTransform::new(&params, 8, 8).is_err());
        let kernel = make_kernel(&params, 0, 0).unwrap();
        assert!(convolve_fft(&img, &kernel).is_err());
    }
}
