//! Foggy faces: the face region is replaced by the membrane (discrete harmonic)
//! interpolant of the pixels around it.

use thiserror::Error;

use crate::facepatch::FaceDetection;
use crate::imagecore::{resize, FeatureGroup, ImageBuffer, ImageError, LandmarkSet};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum FoggyError {
    #[error("{method:?} solve stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { method: SolveMethod, iterations: usize, residual: f64 },
    #[error("region was built for a {expected:?} image, got {actual:?}")]
    RegionShape { expected: (usize, usize), actual: (usize, usize) },
    #[error("tolerance must be positive and max iterations at least 1")]
    Config,
    #[error("singular system")]
    Singular,
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Unknown region `interior` and its Dirichlet ring `boundary`.
#[derive(Debug, Clone, PartialEq)]
pub struct FogRegion {
    width: usize,
    height: usize,
    interior: Vec<(usize, usize)>,
    boundary: Vec<(usize, usize)>,
}

impl FogRegion {
    /// Builds from a membership mask (row-major, `width * height`). Pixels on
    /// the image border are dropped from the interior so every interior pixel
    /// keeps its four neighbors inside the image.
    pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), width * height, "mask size");
        let inside = |x: usize, y: usize| {
            x > 0 && y > 0 && x + 1 < width && y + 1 < height && mask[y * width + x]
        };
        let mut interior = Vec::new();
        let mut ring = vec![false; width * height];
        for y in 0..height {
            for x in 0..width {
                if !inside(x, y) {
                    continue;
                }
                interior.push((x, y));
                for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                    if !inside(nx, ny) {
                        ring[ny * width + nx] = true;
                    }
                }
            }
        }
        let boundary = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&(x, y)| ring[y * width + x])
            .collect();
        Self { width, height, interior, boundary }
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, interior: Vec::new(), boundary: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major ordered interior pixels.
    pub fn interior(&self) -> &[(usize, usize)] {
        &self.interior
    }

    pub fn boundary(&self) -> &[(usize, usize)] {
        &self.boundary
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.width * self.height];
        for &(x, y) in &self.interior {
            m[y * self.width + x] = true;
        }
        m
    }
}

/// Rasterizes the convex hull of `points` by pixel centers (closed hull,
/// scanline fill). Degenerate hulls give an empty mask.
pub fn rasterize_hull<T: Real>(points: &[(T, T)], width: usize, height: usize) -> Vec<bool> {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.as_f64(), y.as_f64())).collect();
    let hull = convex_hull(&pts);
    let mut mask = vec![false; width * height];
    if hull.len() < 3 {
        return mask;
    }
    const EPS: f64 = 1e-9;
    for py in 0..height {
        let yc = py as f64 + 0.5;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..hull.len() {
            let (x1, y1) = hull[i];
            let (x2, y2) = hull[(i + 1) % hull.len()];
            let (ymin, ymax) = (y1.min(y2), y1.max(y2));
            if yc < ymin - EPS || yc > ymax + EPS {
                continue;
            }
            if (y2 - y1).abs() < EPS {
                lo = lo.min(x1.min(x2));
                hi = hi.max(x1.max(x2));
            } else {
                let x = x1 + (yc - y1) * (x2 - x1) / (y2 - y1);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            continue;
        }
        let first = ((lo - 0.5 - EPS).ceil().max(0.0)) as usize;
        let last = (hi - 0.5 + EPS).floor();
        if last < 0.0 {
            continue;
        }
        let last = (last as usize).min(width.saturating_sub(1));
        for px in first..=last {
            mask[py * width + px] = true;
        }
    }
    mask
}

/// Counter-clockwise hull (Andrew's monotone chain) without collinear points.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite landmarks"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Fog region from the convex hull of the face-outline landmarks.
pub fn region_from_landmarks<T: Real>(lm: &LandmarkSet<T>, img_w: usize, img_h: usize) -> FogRegion {
    let mask = rasterize_hull(&lm.group(FeatureGroup::FaceOutline), img_w, img_h);
    FogRegion::from_mask(img_w, img_h, &mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DirectDense,
    GaussSeidel,
    ConjugateGradient,
}

impl std::str::FromStr for SolveMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" | "direct-dense" => Ok(SolveMethod::DirectDense),
            "gs" | "gauss-seidel" => Ok(SolveMethod::GaussSeidel),
            "cg" | "conjugate-gradient" => Ok(SolveMethod::ConjugateGradient),
            other => Err(format!("unknown solve method {other:?} (cg, gs, dense)")),
        }
    }
}

impl SolveMethod {
    pub fn token(self) -> &'static str {
        match self {
            SolveMethod::DirectDense => "dense",
            SolveMethod::GaussSeidel => "gs",
            SolveMethod::ConjugateGradient => "cg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneSolveConfig<T> {
    pub method: SolveMethod,
    /// Bound on the max-norm residual of the assembled system.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for MembraneSolveConfig<T> {
    fn default() -> Self {
        Self { method: SolveMethod::ConjugateGradient, tolerance: T::lit(1e-6), max_iterations: 50_000 }
    }
}

/// Sparse 5-point system over the interior: `4 f_p - sum(interior neighbors) = sum(boundary neighbors)`.
struct LaplaceSystem {
    /// Interior neighbor indices per unknown (at most 4).
    neighbors: Vec<Vec<usize>>,
    /// Boundary neighbor pixels per unknown.
    boundary: Vec<Vec<(usize, usize)>>,
}

impl LaplaceSystem {
    fn new(region: &FogRegion) -> Self {
        let w = region.width;
        let mut index = vec![usize::MAX; w * region.height];
        for (i, &(x, y)) in region.interior.iter().enumerate() {
            index[y * w + x] = i;
        }
        let mut neighbors = Vec::with_capacity(region.interior.len());
        let mut boundary = Vec::with_capacity(region.interior.len());
        for &(x, y) in &region.interior {
            let (mut inner, mut ring) = (Vec::with_capacity(4), Vec::new());
            for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                match index[ny * w + nx] {
                    usize::MAX => ring.push((nx, ny)),
                    j => inner.push(j),
                }
            }
            neighbors.push(inner);
            boundary.push(ring);
        }
        Self { neighbors, boundary }
    }

    fn len(&self) -> usize {
        self.neighbors.len()
    }

    fn apply<T: Real>(&self, x: &[T], out: &mut [T]) {
        let four = T::lit(4.0);
        for (i, nb) in self.neighbors.iter().enumerate() {
            let mut acc = four * x[i];
            for &j in nb {
                acc -= x[j];
            }
            out[i] = acc;
        }
    }

    fn residual_max<T: Real>(&self, x: &[T], b: &[T]) -> T {
        let mut ax = vec![T::zero(); x.len()];
        self.apply(x, &mut ax);
        ax.iter().zip(b).map(|(&a, &bb)| (bb - a).abs()).fold(T::zero(), T::max)
    }

    /// Right-hand side for one channel: sum of boundary neighbor values.
    fn rhs<T: Real>(&self, img: &ImageBuffer<T>, c: usize) -> Vec<T> {
        self.boundary
            .iter()
            .map(|ring| ring.iter().map(|&(x, y)| img.get(x, y, c)).sum())
            .collect()
    }
}

/// Replaces the region interior with the harmonic interpolant of its boundary,
/// independently per channel. Pixels outside the interior are untouched.
pub fn solve_membrane<T: Real>(
    img: &ImageBuffer<T>,
    region: &FogRegion,
    cfg: &MembraneSolveConfig<T>,
) -> Result<ImageBuffer<T>, FoggyError> {
    if (region.width, region.height) != (img.width(), img.height()) {
        return Err(FoggyError::RegionShape {
            expected: (region.width, region.height),
            actual: (img.width(), img.height()),
        });
    }
    if !(cfg.tolerance > T::zero()) || cfg.max_iterations == 0 {
        return Err(FoggyError::Config);
    }
    let mut out = img.clone();
    if region.is_empty() {
        return Ok(out);
    }
    let system = LaplaceSystem::new(region);
    for c in 0..img.channels() {
        let b = system.rhs(img, c);
        let x = match cfg.method {
            SolveMethod::DirectDense => dense_solve(&system, &b)?,
            SolveMethod::GaussSeidel => gauss_seidel(&system, &b, cfg)?,
            SolveMethod::ConjugateGradient => conjugate_gradient(&system, &b, cfg)?,
        };
        for (&(px, py), &v) in region.interior.iter().zip(&x) {
            out.set(px, py, c, v);
        }
    }
    Ok(out)
}

/// Starting guess: mean of the right-hand side scaled back to pixel units.
fn initial_guess<T: Real>(b: &[T], system: &LaplaceSystem) -> Vec<T> {
    let (mut sum, mut count) = (T::zero(), 0usize);
    for (bi, nb) in b.iter().zip(&system.neighbors) {
        let k = 4 - nb.len();
        if k > 0 {
            sum += *bi;
            count += k;
        }
    }
    let fill = if count > 0 { sum / T::from_usize_lossy(count) } else { T::zero() };
    vec![fill; b.len()]
}

fn gauss_seidel<T: Real>(system: &LaplaceSystem, b: &[T], cfg: &MembraneSolveConfig<T>) -> Result<Vec<T>, FoggyError> {
    let mut x = initial_guess(b, system);
    let quarter = T::lit(0.25);
    let mut residual = system.residual_max(&x, b);
    for it in 0..cfg.max_iterations {
        if residual <= cfg.tolerance {
            return Ok(x);
        }
        for i in 0..system.len() {
            let mut acc = b[i];
            for &j in &system.neighbors[i] {
                acc += x[j];
            }
            x[i] = acc * quarter;
        }
        if it % 8 == 7 || it + 1 == cfg.max_iterations {
            residual = system.residual_max(&x, b);
        }
    }
    residual = system.residual_max(&x, b);
    if residual <= cfg.tolerance {
        return Ok(x);
    }
    Err(FoggyError::NotConverged {
        method: SolveMethod::GaussSeidel,
        iterations: cfg.max_iterations,
        residual: residual.as_f64(),
    })
}

fn conjugate_gradient<T: Real>(
    system: &LaplaceSystem,
    b: &[T],
    cfg: &MembraneSolveConfig<T>,
) -> Result<Vec<T>, FoggyError> {
    let n = system.len();
    let mut x = initial_guess(b, system);
    let mut ax = vec![T::zero(); n];
    system.apply(&x, &mut ax);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &a)| bi - a).collect();
    let mut p = r.clone();
    let mut ap = vec![T::zero(); n];
    let dot = |u: &[T], v: &[T]| u.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>();
    let mut rr = dot(&r, &r);
    for _ in 0..cfg.max_iterations {
        if r.iter().fold(T::zero(), |m, v| m.max(v.abs())) <= cfg.tolerance {
            // guard against drift of the recursive residual
            if system.residual_max(&x, b) <= cfg.tolerance {
                return Ok(x);
            }
            system.apply(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
        }
        system.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let residual = system.residual_max(&x, b);
    if residual <= cfg.tolerance {
        return Ok(x);
    }
    Err(FoggyError::NotConverged {
        method: SolveMethod::ConjugateGradient,
        iterations: cfg.max_iterations,
        residual: residual.as_f64(),
    })
}

/// Gaussian elimination with partial pivoting on the assembled dense matrix.
fn dense_solve<T: Real>(system: &LaplaceSystem, b: &[T]) -> Result<Vec<T>, FoggyError> {
    let n = system.len();
    let mut a = vec![T::zero(); n * n];
    for (i, nb) in system.neighbors.iter().enumerate() {
        a[i * n + i] = T::lit(4.0);
        for &j in nb {
            a[i * n + j] -= T::one();
        }
    }
    crate::linalg::solve_dense(&mut a, b.to_vec(), n).ok_or(FoggyError::Singular)
}

/// Membrane in-fill of the face-outline hull, then a resize to `out x out`.
pub fn foggy_face<T: Real>(
    img: &ImageBuffer<T>,
    det: &FaceDetection<T>,
    cfg: &MembraneSolveConfig<T>,
    out: usize,
) -> Result<ImageBuffer<T>, FoggyError> {
    let filled = fog_in_place(img, det.landmarks(), cfg)?;
    Ok(resize(&filled, out, out)?)
}

/// Membrane in-fill at the original resolution.
pub fn fog_in_place<T: Real>(
    img: &ImageBuffer<T>,
    lm: &LandmarkSet<T>,
    cfg: &MembraneSolveConfig<T>,
) -> Result<ImageBuffer<T>, FoggyError> {
    let region = region_from_landmarks(lm, img.width(), img.height());
    solve_membrane(img, &region, cfg)
}
