//! Interaction kernels and the truncated convolution `(J∗φ)(x) = ∫_Ω J(x−y)φ(y) dy`.
//!
//! A [`Kernel`] stores `J` and `∇J` on the difference lattice `x − Ω`
//! (`2n − 1` points per axis, centered at `z = 0`). Convolutions are lattice
//! quadrature sums evaluated with zero-padded FFTs; [`Kernel::convolve_direct`]
//! evaluates the same sum directly and serves as the reference path.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Domain, Field};

/// `z ↦ (J(z), ∇J(z))`.
type ProfileFn = dyn Fn(&[f64]) -> (f64, Vec<f64>);

/// Gaussians are cut off beyond this many standard deviations.
pub const GAUSSIAN_CUTOFF: f64 = 10.0;

/// Analytic or tabulated kernel description, as found in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `amplitude · (2πσ²)^{-d/2} exp(−|z|²/2σ²)`, so `amplitude` is the mass on ℝ^d.
    Gaussian { sigma: f64, amplitude: f64 },
    /// `c · (1 − |z|²/r₀²)²` on `|z| < r₀`, normalized to mass `amplitude`.
    CompactBump { r0: f64, amplitude: f64 },
    /// Flat little-endian f64 samples on the difference lattice; the sidecar
    /// `<path>.json` (or `meta`) holds `{shape, spacing}`.
    Tabulated {
        path: PathBuf,
        #[serde(default)]
        meta: Option<PathBuf>,
    },
}

/// How the convolution treats the outside of Ω.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionMode {
    /// Zero extension outside Ω.
    #[default]
    Truncated,
    /// Wrap-around sum; only valid on periodic domains.
    Periodic,
}

/// Sidecar of a tabulated kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedMeta {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
}

/// Multi-dimensional complex FFT built from per-axis rustfft plans.
#[derive(Clone)]
struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Unnormalized transform in place.
    fn process(&self, data: &mut [Complex64], inverse: bool) {
        let total = data.len();
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        for axis in 0..self.shape.len() {
            let plan = if inverse {
                &self.inverse[axis]
            } else {
                &self.forward[axis]
            };
            let n = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            if stride == 1 {
                plan.process(data);
                continue;
            }
            // gather lines along `axis` into contiguous rows
            let block = n * stride;
            let mut row = 0;
            for o in 0..total / block {
                for inner in 0..stride {
                    let base = o * block + inner;
                    for i in 0..n {
                        lines[row * n + i] = data[base + i * stride];
                    }
                    row += 1;
                }
            }
            plan.process(&mut lines);
            let mut row = 0;
            for o in 0..total / block {
                for inner in 0..stride {
                    let base = o * block + inner;
                    for i in 0..n {
                        data[base + i * stride] = lines[row * n + i];
                    }
                    row += 1;
                }
            }
        }
    }
}

impl std::fmt::Debug for NdFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdFft").field("shape", &self.shape).finish()
    }
}

/// A sampled symmetric interaction kernel bound to one domain lattice.
#[derive(Debug)]
pub struct Kernel {
    domain: Domain,
    shape: Vec<usize>,
    samples: Vec<f64>,
    grad_samples: Vec<Vec<f64>>,
    l1_j: f64,
    l1_grad_j: f64,
    m1: f64,
    mode: ConvolutionMode,
    fft: NdFft,
    spectrum: Vec<Complex64>,
    grad_spectra: Vec<Vec<Complex64>>,
    self_interaction: OnceLock<Field>,
}

fn difference_shape(domain: &Domain) -> Vec<usize> {
    domain.cells().iter().map(|&n| 2 * n - 1).collect()
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    (0..shape.len()).map(|a| shape[a + 1..].iter().product()).collect()
}

/// Offsets (in lattice units) of the difference-lattice entry `idx`.
fn offsets(idx: usize, cells: &[usize]) -> Vec<i64> {
    let mut rem = idx;
    let mut out = vec![0i64; cells.len()];
    for a in (0..cells.len()).rev() {
        let m = 2 * cells[a] - 1;
        out[a] = (rem % m) as i64 - (cells[a] as i64 - 1);
        rem /= m;
    }
    out
}

/// Index of the entry at `−z`.
fn mirror_index(idx: usize, shape: &[usize]) -> usize {
    let strides = row_major_strides(shape);
    let mut rem = idx;
    let mut out = 0;
    for a in 0..shape.len() {
        let i = rem / strides[a];
        rem %= strides[a];
        out += (shape[a] - 1 - i) * strides[a];
    }
    out
}

/// Smallest multiple of the finest spacing that covers the box diameter.
fn covering_radius(domain: &Domain) -> f64 {
    let hmin = domain.spacings().into_iter().fold(f64::INFINITY, f64::min);
    let k = (domain.diameter() / hmin * (1.0 - 1e-12)).ceil();
    k * hmin
}

/// Midpoint-rule `L¹(B_{M₁})` norms of `J` and `|∇J|` for analytic kernels.
fn ball_norms(domain: &Domain, m1: f64, j: &ProfileFn) -> (f64, f64) {
    let h = domain.spacings();
    let vol = domain.cell_volume();
    let reach: Vec<i64> = h.iter().map(|&hi| (m1 / hi).floor() as i64).collect();
    let dim = h.len();
    let mut idx = vec![0i64; dim];
    let mut l1 = 0.0;
    let mut l1g = 0.0;
    let mut z = vec![0.0; dim];
    // iterate over the bounding box of the ball
    let counts: Vec<i64> = reach.iter().map(|r| 2 * r + 1).collect();
    let total: i64 = counts.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        for a in (0..dim).rev() {
            idx[a] = rem % counts[a] - reach[a];
            rem /= counts[a];
            z[a] = idx[a] as f64 * h[a];
        }
        let r2: f64 = z.iter().map(|v| v * v).sum();
        if r2 > m1 * m1 * (1.0 + 1e-12) {
            continue;
        }
        let (v, g) = j(&z);
        l1 += v.abs();
        l1g += g.iter().map(|c| c * c).sum::<f64>().sqrt();
    }
    (l1 * vol, l1g * vol)
}

impl Kernel {
    /// Samples an analytic kernel or loads a tabulated one for `domain`.
    pub fn build(spec: &KernelSpec, domain: &Domain, mode: ConvolutionMode) -> Result<Self> {
        match spec {
            KernelSpec::Gaussian { sigma, amplitude } => {
                let (sigma, amp) = (*sigma, *amplitude);
                if !(sigma > 0.0 && amp > 0.0 && sigma.is_finite() && amp.is_finite()) {
                    return Err(Error::Validation(
                        "gaussian kernel needs sigma > 0 and amplitude > 0".into(),
                    ));
                }
                let d = domain.dim() as f64;
                let norm = amp * (2.0 * std::f64::consts::PI * sigma * sigma).powf(-d / 2.0);
                let cut2 = (GAUSSIAN_CUTOFF * sigma).powi(2);
                let f = move |z: &[f64]| {
                    let r2: f64 = z.iter().map(|v| v * v).sum();
                    if r2 > cut2 {
                        return (0.0, vec![0.0; z.len()]);
                    }
                    let v = norm * (-r2 / (2.0 * sigma * sigma)).exp();
                    (v, z.iter().map(|zi| -zi / (sigma * sigma) * v).collect())
                };
                Self::from_analytic(domain, mode, &f)
            }
            KernelSpec::CompactBump { r0, amplitude } => {
                let (r0, amp) = (*r0, *amplitude);
                if !(r0 > 0.0 && amp > 0.0 && r0.is_finite() && amp.is_finite()) {
                    return Err(Error::Validation(
                        "compact_bump kernel needs r0 > 0 and amplitude > 0".into(),
                    ));
                }
                let peak = amp / bump_mass(domain.dim(), r0);
                let f = move |z: &[f64]| {
                    let r2: f64 = z.iter().map(|v| v * v).sum();
                    let u = 1.0 - r2 / (r0 * r0);
                    if u <= 0.0 {
                        return (0.0, vec![0.0; z.len()]);
                    }
                    // ∇(1 − r²/r₀²)² = −4u z / r₀²
                    let g = z.iter().map(|zi| -4.0 * peak * u * zi / (r0 * r0)).collect();
                    (peak * u * u, g)
                };
                Self::from_analytic(domain, mode, &f)
            }
            KernelSpec::Tabulated { path, meta } => {
                let meta_path = meta.clone().unwrap_or_else(|| path.with_extension("json"));
                let (meta, samples) = read_tabulated(path, &meta_path)?;
                let spacing = domain.spacings();
                if meta.shape != difference_shape(domain) {
                    return Err(Error::Validation(format!(
                        "tabulated kernel shape {:?} does not match difference lattice {:?}",
                        meta.shape,
                        difference_shape(domain)
                    )));
                }
                if meta
                    .spacing
                    .iter()
                    .zip(&spacing)
                    .any(|(a, b)| (a - b).abs() > 1e-12 * b)
                    || meta.spacing.len() != spacing.len()
                {
                    return Err(Error::Validation(format!(
                        "tabulated kernel spacing {:?} does not match domain spacing {spacing:?}",
                        meta.spacing
                    )));
                }
                Self::from_samples(domain, mode, samples)
            }
        }
    }

    fn from_analytic(
        domain: &Domain,
        mode: ConvolutionMode,
        f: &ProfileFn,
    ) -> Result<Self> {
        let shape = difference_shape(domain);
        let total: usize = shape.iter().product();
        let h = domain.spacings();
        let dim = domain.dim();
        let mut samples = vec![0.0; total];
        let mut grads = vec![vec![0.0; total]; dim];
        for idx in 0..total {
            let z: Vec<f64> = offsets(idx, domain.cells())
                .iter()
                .zip(&h)
                .map(|(&k, &hi)| k as f64 * hi)
                .collect();
            let (v, g) = f(&z);
            samples[idx] = v;
            for a in 0..dim {
                grads[a][idx] = g[a];
            }
        }
        // enforce J(z) = J(−z) and ∇J(z) = −∇J(−z) bit-exactly
        for idx in 0..total {
            let m = mirror_index(idx, &shape);
            if m < idx {
                continue;
            }
            let s = 0.5 * (samples[idx] + samples[m]);
            samples[idx] = s;
            samples[m] = s;
            for g in grads.iter_mut() {
                let v = 0.5 * (g[idx] - g[m]);
                g[idx] = v;
                g[m] = -v;
            }
        }
        let m1 = covering_radius(domain);
        let (l1_j, l1_grad_j) = ball_norms(domain, m1, f);
        Self::assemble(domain, mode, shape, samples, grads, l1_j, l1_grad_j, m1)
    }

    /// Builds a kernel from raw samples on the difference lattice (row-major,
    /// `2n_i − 1` per axis). `∇J` is obtained by central differences.
    pub fn from_samples(domain: &Domain, mode: ConvolutionMode, samples: Vec<f64>) -> Result<Self> {
        let shape = difference_shape(domain);
        let total: usize = shape.iter().product();
        if samples.len() != total {
            return Err(Error::Validation(format!(
                "kernel has {} samples, difference lattice needs {total}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("kernel sample {bad} is not finite")));
        }
        for idx in 0..total {
            let m = mirror_index(idx, &shape);
            if samples[idx] != samples[m] {
                return Err(Error::Validation(format!(
                    "kernel is not symmetric at offset {:?}",
                    offsets(idx, domain.cells())
                )));
            }
        }
        let strides = row_major_strides(&shape);
        let h = domain.spacings();
        let mut grads = vec![vec![0.0; total]; domain.dim()];
        for (a, g) in grads.iter_mut().enumerate() {
            let m = shape[a];
            for idx in 0..total {
                let i = (idx / strides[a]) % m;
                let (lo, hi, w) = if i == 0 {
                    (idx, idx + strides[a], h[a])
                } else if i == m - 1 {
                    (idx - strides[a], idx, h[a])
                } else {
                    (idx - strides[a], idx + strides[a], 2.0 * h[a])
                };
                g[idx] = (samples[hi] - samples[lo]) / w;
            }
        }
        let vol = domain.cell_volume();
        let m1 = covering_radius(domain);
        let l1_j = samples.iter().map(|v| v.abs()).sum::<f64>() * vol;
        let l1_grad_j = (0..total)
            .map(|i| grads.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt())
            .sum::<f64>()
            * vol;
        Self::assemble(domain, mode, shape, samples, grads, l1_j, l1_grad_j, m1)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        domain: &Domain,
        mode: ConvolutionMode,
        shape: Vec<usize>,
        samples: Vec<f64>,
        grads: Vec<Vec<f64>>,
        l1_j: f64,
        l1_grad_j: f64,
        m1: f64,
    ) -> Result<Self> {
        if mode == ConvolutionMode::Periodic && domain.boundary() != BoundaryMode::Periodic {
            return Err(Error::Validation(
                "periodic convolution requires a periodic domain".into(),
            ));
        }
        if !(l1_j.is_finite() && l1_grad_j.is_finite()) {
            return Err(Error::Validation("kernel norms are not finite".into()));
        }
        let fft_shape: Vec<usize> = match mode {
            ConvolutionMode::Truncated => domain.cells().iter().map(|&n| 2 * n).collect(),
            ConvolutionMode::Periodic => domain.cells().to_vec(),
        };
        let fft = NdFft::new(&fft_shape);
        let spectrum = Self::spectrum_of(domain, &fft, &samples);
        let grad_spectra = grads
            .iter()
            .map(|g| Self::spectrum_of(domain, &fft, g))
            .collect();
        Ok(Self {
            domain: domain.clone(),
            shape,
            samples,
            grad_samples: grads,
            l1_j,
            l1_grad_j,
            m1,
            mode,
            fft,
            spectrum,
            grad_spectra,
            self_interaction: OnceLock::new(),
        })
    }

    /// Places the difference-lattice samples on the FFT grid (wrapped
    /// indices) and transforms them.
    fn spectrum_of(domain: &Domain, fft: &NdFft, values: &[f64]) -> Vec<Complex64> {
        let cells = domain.cells();
        let fstrides = row_major_strides(&fft.shape);
        let mut buf = vec![Complex64::new(0.0, 0.0); fft.len()];
        for (idx, &v) in values.iter().enumerate() {
            let off = offsets(idx, cells);
            let mut pos = 0;
            for a in 0..cells.len() {
                let p = fft.shape[a] as i64;
                pos += (off[a].rem_euclid(p)) as usize * fstrides[a];
            }
            // periodic mode folds both images of a residue together
            buf[pos].re += v;
        }
        fft.process(&mut buf, false);
        buf
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn mode(&self) -> ConvolutionMode {
        self.mode
    }

    /// Shape of the difference lattice.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grad_samples(&self) -> &[Vec<f64>] {
        &self.grad_samples
    }

    /// `‖J‖_{L¹(B_{M₁})}`.
    pub fn l1_j(&self) -> f64 {
        self.l1_j
    }

    /// `‖∇J‖_{L¹(B_{M₁})}`.
    pub fn l1_grad_j(&self) -> f64 {
        self.l1_grad_j
    }

    /// Radius `M₁` with `x − Ω ⊂ B_{M₁}` for every `x ∈ Ω`.
    pub fn m1(&self) -> f64 {
        self.m1
    }

    /// `J` at lattice offset `k` (in cells), zero outside the sampled range.
    pub fn value_at(&self, k: &[i64]) -> f64 {
        let cells = self.domain.cells();
        let mut idx = 0usize;
        for a in 0..cells.len() {
            let i = k[a] + cells[a] as i64 - 1;
            if i < 0 || i >= self.shape[a] as i64 {
                return 0.0;
            }
            idx = idx * self.shape[a] + i as usize;
        }
        self.samples[idx]
    }

    fn check_domain(&self, phi: &Field) -> Result<()> {
        if !self.domain.same_lattice(phi.domain()) {
            return Err(Error::Validation(
                "field lattice does not match the kernel's domain".into(),
            ));
        }
        Ok(())
    }

    fn apply_spectrum(&self, spectrum: &[Complex64], phi: &Field) -> Field {
        let cells = self.domain.cells();
        let fstrides = row_major_strides(&self.fft.shape);
        let n = self.domain.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        let embed = |idx: usize| -> usize {
            let mut rem = idx;
            let mut pos = 0;
            for a in (0..cells.len()).rev() {
                pos += (rem % cells[a]) * fstrides[a];
                rem /= cells[a];
            }
            pos
        };
        for (i, &v) in phi.values().iter().enumerate() {
            buf[embed(i)].re = v;
        }
        self.fft.process(&mut buf, false);
        for (b, s) in buf.iter_mut().zip(spectrum) {
            *b *= s;
        }
        self.fft.process(&mut buf, true);
        let scale = self.domain.cell_volume() / self.fft.len() as f64;
        let values = (0..n).map(|i| buf[embed(i)].re * scale).collect();
        Field::new(self.domain.clone().with_boundary(phi.domain().boundary()), values)
            .expect("lattice checked")
    }

    /// `(J∗φ)` at the cell centers.
    pub fn convolve(&self, phi: &Field) -> Result<Field> {
        self.check_domain(phi)?;
        Ok(self.apply_spectrum(&self.spectrum, phi))
    }

    /// Component-wise `(∇J∗φ)`.
    pub fn grad_convolve(&self, phi: &Field) -> Result<Vec<Field>> {
        self.check_domain(phi)?;
        Ok(self
            .grad_spectra
            .iter()
            .map(|s| self.apply_spectrum(s, phi))
            .collect())
    }

    /// Direct `O(N²)` evaluation of the lattice quadrature sum for `J`
    /// (`axis = None`) or `∂_axis J`.
    pub fn convolve_direct(&self, phi: &Field, axis: Option<usize>) -> Result<Field> {
        self.check_domain(phi)?;
        let d = &self.domain;
        let cells = d.cells();
        let vals = match axis {
            None => &self.samples,
            Some(a) => &self.grad_samples[a],
        };
        let n = d.len();
        let multis: Vec<Vec<usize>> = (0..n).map(|i| d.multi_index(i)).collect();
        let mut out = vec![0.0; n];
        for (x, mx) in multis.iter().enumerate() {
            let mut acc = 0.0;
            for (y, my) in multis.iter().enumerate() {
                let w = phi.values()[y];
                if w == 0.0 {
                    continue;
                }
                match self.mode {
                    ConvolutionMode::Truncated => {
                        let mut idx = 0usize;
                        for a in 0..cells.len() {
                            let k = mx[a] + cells[a] - 1 - my[a];
                            idx = idx * self.shape[a] + k;
                        }
                        acc += vals[idx] * w;
                    }
                    ConvolutionMode::Periodic => {
                        // sum the two images z and z ∓ n of each residue
                        let mut kv = 0.0;
                        let dim = cells.len();
                        for image in 0..(1usize << dim) {
                            let mut idx = 0usize;
                            let mut ok = true;
                            for a in 0..dim {
                                let r = (mx[a] as i64 - my[a] as i64).rem_euclid(cells[a] as i64);
                                let wrapped = image >> a & 1 == 1;
                                if wrapped && r == 0 {
                                    ok = false;
                                    break;
                                }
                                let z = if wrapped { r - cells[a] as i64 } else { r };
                                idx = idx * self.shape[a] + (z + cells[a] as i64 - 1) as usize;
                            }
                            if ok {
                                kv += vals[idx];
                            }
                        }
                        acc += kv * w;
                    }
                }
            }
            out[x] = acc * d.cell_volume();
        }
        Field::new(d.clone().with_boundary(phi.domain().boundary()), out)
    }

    /// `a(x) = (J∗1)(x)`, computed once and cached.
    pub fn self_interaction(&self) -> &Field {
        self.self_interaction.get_or_init(|| {
            self.apply_spectrum(&self.spectrum, &Field::constant(&self.domain, 1.0))
        })
    }
}

/// Largest lattice size on which [`check_bounds`] also compares FFT and
/// direct sums.
pub const DIRECT_CHECK_MAX_CELLS: usize = 64;

/// Outcome of [`check_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckReport {
    pub n_fields: usize,
    pub l1_j: f64,
    pub l1_grad_j: f64,
    pub m1: f64,
    /// Largest `sup|J∗φ|` over the sampled fields.
    pub max_conv: f64,
    /// Largest `sup|∇J∗φ|` (Euclidean magnitude).
    pub max_grad_conv: f64,
    pub conv_ok: bool,
    pub grad_ok: bool,
    /// Largest `‖fft − direct‖_∞ / ‖direct‖_∞`, when the lattice is small enough.
    pub fft_rel_error: Option<f64>,
    pub fft_ok: bool,
}

impl KernelCheckReport {
    pub fn all(&self) -> bool {
        self.conv_ok && self.grad_ok && self.fft_ok
    }
}

/// Samples `n_fields` uniform random fields with `‖φ‖_∞ ≤ 1` and checks
/// `sup|J∗φ| ≤ ‖J‖_{L¹}` and `sup|∇J∗φ| ≤ ‖∇J‖_{L¹}`; on lattices with at
/// most [`DIRECT_CHECK_MAX_CELLS`] cells per axis the FFT path is compared
/// with [`Kernel::convolve_direct`] to `1e-12` relative.
pub fn check_bounds(kernel: &Kernel, n_fields: usize, seed: u64) -> Result<KernelCheckReport> {
    use rand::{Rng, SeedableRng};
    if n_fields == 0 {
        return Err(Error::Validation("n_fields must be >= 1".into()));
    }
    let domain = kernel.domain();
    let compare = domain.cells().iter().all(|&n| n <= DIRECT_CHECK_MAX_CELLS);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_conv: f64 = 0.0;
    let mut max_grad: f64 = 0.0;
    let mut rel: f64 = 0.0;
    for _ in 0..n_fields {
        let values = (0..domain.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let phi = Field::new(domain.clone(), values)?;
        let conv = kernel.convolve(&phi)?;
        max_conv = max_conv.max(conv.sup_abs());
        let grad = kernel.grad_convolve(&phi)?;
        if let Some(m) = crate::grid::magnitude(&grad) {
            max_grad = max_grad.max(m.sup_abs());
        }
        if compare {
            let pairs = std::iter::once((conv, None))
                .chain(grad.into_iter().enumerate().map(|(a, g)| (g, Some(a))));
            for (fast, axis) in pairs {
                let direct = kernel.convolve_direct(&phi, axis)?;
                let scale = direct.sup_abs();
                let diff = fast.zip_map(&direct, |a, b| a - b).sup_abs();
                if scale > 0.0 {
                    rel = rel.max(diff / scale);
                } else if diff > 0.0 {
                    rel = f64::INFINITY;
                }
            }
        }
    }
    // FFT round-off may push an exactly attained bound up by a few ulps
    let slack = 1.0 + 1e-12;
    Ok(KernelCheckReport {
        n_fields,
        l1_j: kernel.l1_j(),
        l1_grad_j: kernel.l1_grad_j(),
        m1: kernel.m1(),
        max_conv,
        max_grad_conv: max_grad,
        conv_ok: max_conv <= kernel.l1_j() * slack,
        grad_ok: max_grad <= kernel.l1_grad_j() * slack,
        fft_rel_error: compare.then_some(rel),
        fft_ok: !compare || rel <= 1e-12,
    })
}

/// Mass of `(1 − |z|²/r₀²)²` over the `d`-ball of radius `r₀`.
pub fn bump_mass(dim: usize, r0: f64) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 16.0 / 15.0 * r0,
        2 => PI / 3.0 * r0 * r0,
        _ => 32.0 * PI / 105.0 * r0.powi(3),
    }
}

fn read_tabulated(path: &Path, meta_path: &Path) -> Result<(TabulatedMeta, Vec<f64>)> {
    let meta: TabulatedMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)?;
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Validation(format!(
            "{} is not a whole number of f64 values",
            path.display()
        )));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let expected: usize = meta.shape.iter().product();
    if samples.len() != expected {
        return Err(Error::Validation(format!(
            "tabulated kernel has {} samples, shape {:?} needs {expected}",
            samples.len(),
            meta.shape
        )));
    }
    Ok((meta, samples))
}

/// Writes samples and sidecar in the tabulated kernel format.
pub fn write_tabulated(path: &Path, meta: &TabulatedMeta, samples: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for v in samples {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(path.with_extension("json"), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}
