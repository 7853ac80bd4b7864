//! Kernel models with evaluable f, metric tensors, feature maps, the psi
//! transform and closed-form geodesic oracles, plus a discretized
//! path-length oracle.
//!
//! Kernels come from a built-in catalog (loadable from JSON): the cosine grid
//! kernel, a radial exponential, linear and polynomial inner-product kernels
//! on the unit sphere, additive cosine kernels on boxes, and a 1-D
//! exponential-product kernel. Each carries a structural variant (translation
//! invariant, radial, inner product, additive) driving the closed-form
//! geodesic, and, where available, a finite-rank feature map phi with
//! f(x, y) = <phi(x), phi(y)>. Feature maps are exact for the cosine and
//! inner-product families and rank-truncated (to a configured tolerance) for
//! the exponential families.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::dense_symmetric_eigen_desc;
use crate::error::{Error, Result};
use crate::matrix::{MatrixKind, SimilarityMatrix};
use crate::points::PointCloud;
use crate::rng::{stream_rng, Seed, StreamDomain};

const DOMAIN_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;
const TRUNCATION_TARGET: f64 = 1e-10;

/// Where the latent positions live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Product of closed intervals.
    Box(Vec<(f64, f64)>),
    /// Unit sphere in R^dim.
    Sphere { dim: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box(iv) => iv.len(),
            Domain::Sphere { dim } => *dim,
        }
    }

    /// Membership with tolerance 1e-9, so grid endpoints on the boundary pass.
    pub fn contains(&self, z: &[f64]) -> bool {
        if z.len() != self.dim() {
            return false;
        }
        match self {
            Domain::Box(iv) => z
                .iter()
                .zip(iv)
                .all(|(v, (lo, hi))| *v >= lo - DOMAIN_TOL && *v <= hi + DOMAIN_TOL),
            Domain::Sphere { .. } => {
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm - 1.0).abs() <= DOMAIN_TOL
            }
        }
    }

    fn check(&self, z: &[f64], what: &str) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "{what} {z:?} is outside the kernel domain {self:?}"
            )))
        }
    }
}

/// 1-D positive-definite kernel components for the additive family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component1D {
    /// f(x, y) = cos(x - y); mixed second derivative on the diagonal is 1.
    Cosine,
    /// f(x, y) = exp(x y); mixed second derivative on the diagonal is
    /// (1 + t^2) exp(t^2), so psi is genuinely nonlinear.
    ExpProduct,
}

impl Component1D {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Component1D::Cosine => (x - y).cos(),
            Component1D::ExpProduct => (x * y).exp(),
        }
    }

    /// d^2 f / dx dy evaluated at (t, t).
    fn diag_second(&self, t: f64) -> f64 {
        match self {
            Component1D::Cosine => 1.0,
            Component1D::ExpProduct => (1.0 + t * t) * (t * t).exp(),
        }
    }
}

#[derive(Debug, Clone)]
enum TiProfile {
    /// g(u) = (cos u_1 + cos u_2 + 2) / 4 on R^2.
    CosineGrid,
}

impl TiProfile {
    fn eval(&self, u: &[f64]) -> f64 {
        match self {
            TiProfile::CosineGrid => (u[0].cos() + u[1].cos() + 2.0) / 4.0,
        }
    }
}

#[derive(Debug, Clone)]
enum RadialProfile {
    /// h(s) = exp(-s), so f(x, y) = exp(-||x - y||^2).
    ExpDecay,
}

impl RadialProfile {
    fn eval(&self, s: f64) -> f64 {
        match self {
            RadialProfile::ExpDecay => (-s).exp(),
        }
    }

    fn h_prime_at_0(&self) -> f64 {
        match self {
            RadialProfile::ExpDecay => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
enum InnerProfile {
    /// g(t) = t.
    Linear,
    /// g(t) = sum_k `coeffs[k]` t^k with nonnegative coefficients.
    Polynomial(Vec<f64>),
}

impl InnerProfile {
    fn eval(&self, t: f64) -> f64 {
        match self {
            InnerProfile::Linear => t,
            InnerProfile::Polynomial(a) => {
                let mut acc = 0.0;
                for &c in a.iter().rev() {
                    acc = acc * t + c;
                }
                acc
            }
        }
    }

    fn g_prime_at_1(&self) -> f64 {
        match self {
            InnerProfile::Linear => 1.0,
            InnerProfile::Polynomial(a) => a
                .iter()
                .enumerate()
                .map(|(k, c)| k as f64 * c)
                .sum(),
        }
    }

    fn g_second_at_1(&self) -> f64 {
        match self {
            InnerProfile::Linear => 0.0,
            InnerProfile::Polynomial(a) => a
                .iter()
                .enumerate()
                .map(|(k, c)| (k * k.saturating_sub(1)) as f64 * c)
                .sum(),
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    TranslationInvariant {
        profile: TiProfile,
        /// -Hessian of g at the origin (row-major d x d); finite-differenced
        /// from g when absent.
        neg_hessian_at_origin: Option<Vec<f64>>,
    },
    RadialTi {
        profile: RadialProfile,
    },
    InnerProduct {
        profile: InnerProfile,
    },
    Additive {
        parts: Vec<(f64, Component1D)>,
        constant: f64,
    },
    /// Defined solely by the feature map; metric tensors come from finite
    /// differences and there is no closed-form geodesic.
    FiniteRankOnly,
}

#[derive(Debug, Clone)]
struct PolyTerm {
    exponents: Vec<u32>,
    coeff: f64,
}

#[derive(Debug, Clone)]
enum Map1D {
    /// x -> (cos x, sin x); exact for the cosine component.
    CosSin,
    /// x -> (x^k / sqrt(k!))_{k=0..order}; truncation of exp(x y).
    ExpSeries { coeff: Vec<f64> },
}

impl Map1D {
    fn dim(&self) -> usize {
        match self {
            Map1D::CosSin => 2,
            Map1D::ExpSeries { coeff } => coeff.len(),
        }
    }

    fn write(&self, x: f64, out: &mut Vec<f64>, scale: f64) {
        match self {
            Map1D::CosSin => {
                out.push(scale * x.cos());
                out.push(scale * x.sin());
            }
            Map1D::ExpSeries { coeff } => {
                let mut pow = 1.0;
                for &c in coeff {
                    out.push(scale * c * pow);
                    pow *= x;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum FeatureMap {
    /// phi(z) = z; exact for the linear inner product.
    Identity { dim: usize },
    /// Monomial expansion of a polynomial inner-product kernel; exact.
    PolySphere { terms: Vec<PolyTerm> },
    /// Tensor-product truncation of exp(-||x - y||^2).
    RadialExpTensor { dim: usize, coeff: Vec<f64> },
    /// Concatenation of per-coordinate maps scaled by sqrt(alpha_i), plus a
    /// sqrt(constant) component when the constant term is positive.
    Additive { parts: Vec<(f64, Map1D)>, constant: f64 },
}

impl FeatureMap {
    fn dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::PolySphere { terms } => terms.len(),
            FeatureMap::RadialExpTensor { dim, coeff } => coeff.len().pow(*dim as u32),
            FeatureMap::Additive { parts, constant } => {
                parts.iter().map(|(_, m)| m.dim()).sum::<usize>()
                    + usize::from(*constant > 0.0)
            }
        }
    }

    fn is_exact(&self) -> bool {
        match self {
            FeatureMap::Identity { .. } | FeatureMap::PolySphere { .. } => true,
            FeatureMap::RadialExpTensor { .. } => false,
            FeatureMap::Additive { parts, .. } => {
                parts.iter().all(|(_, m)| matches!(m, Map1D::CosSin))
            }
        }
    }

    /// Unscaled (rho = 1) feature vector.
    fn eval_base(&self, z: &[f64]) -> Vec<f64> {
        match self {
            FeatureMap::Identity { .. } => z.to_vec(),
            FeatureMap::PolySphere { terms } => terms
                .iter()
                .map(|t| {
                    let mono: f64 = t
                        .exponents
                        .iter()
                        .zip(z)
                        .map(|(&e, &x)| x.powi(e as i32))
                        .product();
                    t.coeff * mono
                })
                .collect(),
            FeatureMap::RadialExpTensor { dim, coeff } => {
                let order = coeff.len();
                // Per-coordinate basis u_k(x) = exp(-x^2) sqrt(2^k/k!) x^k.
                let mut per = Vec::with_capacity(*dim);
                for &x in z {
                    let damp = (-x * x).exp();
                    let mut col = Vec::with_capacity(order);
                    let mut pow = 1.0;
                    for &c in coeff {
                        col.push(damp * c * pow);
                        pow *= x;
                    }
                    per.push(col);
                }
                // Tensor product, odometer over (k_1, ..., k_d).
                let total = order.pow(*dim as u32);
                let mut out = Vec::with_capacity(total);
                let mut ks = vec![0usize; *dim];
                for _ in 0..total {
                    out.push(ks.iter().zip(&per).map(|(&k, col)| col[k]).product());
                    for slot in (0..*dim).rev() {
                        ks[slot] += 1;
                        if ks[slot] < order {
                            break;
                        }
                        ks[slot] = 0;
                    }
                }
                out
            }
            FeatureMap::Additive { parts, constant } => {
                let mut out = Vec::with_capacity(self.dim());
                for ((alpha, map), &x) in parts.iter().zip(z) {
                    map.write(x, &mut out, alpha.sqrt());
                }
                if *constant > 0.0 {
                    out.push(constant.sqrt());
                }
                out
            }
        }
    }
}

/// A kernel from the built-in catalog: structure, domain, sparsity factor and
/// (when available) a finite-rank feature map.
#[derive(Debug, Clone)]
pub struct KernelModel {
    shape: Shape,
    domain: Domain,
    rho: f64,
    feature: Option<FeatureMap>,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Validation(format!("sparsity rho = {rho} outside [0, 1]")));
    }
    Ok(())
}

/// Smallest series order whose tail is below the truncation target, given the
/// ratio argument r of sum_k r^k / k!.
fn series_order(r: f64) -> Result<usize> {
    let mut term = 1.0f64;
    for k in 1..=60 {
        term *= r / k as f64;
        if r / (k + 1) as f64 >= 1.0 {
            continue;
        }
        let tail = term * (r / (k + 1) as f64) / (1.0 - r / (k + 2) as f64);
        if tail <= TRUNCATION_TARGET {
            return Ok(k);
        }
    }
    Err(Error::Validation(format!(
        "domain too wide for a rank truncation of the exponential series (argument {r})"
    )))
}

impl KernelModel {
    /// The simulated-experiment kernel: f(x, y) =
    /// rho (cos(x1 - y1) + cos(x2 - y2) + 2) / 4 on the box
    /// [-pi + 0.25, pi - 0.25]^2. Finite rank 5.
    pub fn cosine_grid(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let half = std::f64::consts::PI - 0.25;
        Ok(KernelModel {
            shape: Shape::TranslationInvariant {
                profile: TiProfile::CosineGrid,
                neg_hessian_at_origin: Some(vec![0.25, 0.0, 0.0, 0.25]),
            },
            domain: Domain::Box(vec![(-half, half), (-half, half)]),
            rho,
            feature: Some(FeatureMap::Additive {
                parts: vec![(0.25, Map1D::CosSin), (0.25, Map1D::CosSin)],
                constant: 0.5,
            }),
        })
    }

    /// Radial kernel f(x, y) = rho exp(-||x - y||^2) on [-half_width,
    /// half_width]^dim, with a rank-truncated tensor feature map.
    pub fn radial_exp(rho: f64, half_width: f64, dim: usize) -> Result<Self> {
        check_rho(rho)?;
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Validation(format!("half_width {half_width} must be positive")));
        }
        if dim == 0 {
            return Err(Error::Validation("dimension must be >= 1".into()));
        }
        let order = series_order(2.0 * half_width * half_width)?;
        let mut coeff = Vec::with_capacity(order + 1);
        let mut c = 1.0f64;
        coeff.push(c);
        for k in 1..=order {
            c *= (2.0 / k as f64).sqrt();
            coeff.push(c);
        }
        Ok(KernelModel {
            shape: Shape::RadialTi {
                profile: RadialProfile::ExpDecay,
            },
            domain: Domain::Box(vec![(-half_width, half_width); dim]),
            rho,
            feature: Some(FeatureMap::RadialExpTensor { dim, coeff }),
        })
    }

    /// f(x, y) = rho <x, y> on the unit sphere.
    pub fn linear_inner_product(rho: f64, dim: usize) -> Result<Self> {
        check_rho(rho)?;
        if dim == 0 {
            return Err(Error::Validation("dimension must be >= 1".into()));
        }
        Ok(KernelModel {
            shape: Shape::InnerProduct {
                profile: InnerProfile::Linear,
            },
            domain: Domain::Sphere { dim },
            rho,
            feature: Some(FeatureMap::Identity { dim }),
        })
    }

    /// f(x, y) = rho sum_k `coeffs[k]` <x, y>^k on the unit sphere, with
    /// nonnegative coefficients and g'(1) > 0.
    pub fn polynomial_inner_product(rho: f64, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_rho(rho)?;
        if dim == 0 {
            return Err(Error::Validation("dimension must be >= 1".into()));
        }
        if coeffs.is_empty() || coeffs.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::Validation(
                "polynomial coefficients must be nonnegative and finite".into(),
            ));
        }
        let profile = InnerProfile::Polynomial(coeffs.clone());
        if profile.g_prime_at_1() <= 0.0 {
            return Err(Error::Assumption(
                "inner-product kernel needs g'(1) > 0".into(),
            ));
        }
        let mut terms = Vec::new();
        for (k, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            push_monomial_terms(&mut terms, a, k as u32, dim);
        }
        Ok(KernelModel {
            shape: Shape::InnerProduct { profile },
            domain: Domain::Sphere { dim },
            rho,
            feature: Some(FeatureMap::PolySphere { terms }),
        })
    }

    /// f(x, y) = rho (sum_i `alphas[i]` cos(x_i - y_i) + constant) on a box.
    pub fn additive_cosine(
        rho: f64,
        alphas: Vec<f64>,
        constant: f64,
        intervals: Vec<(f64, f64)>,
    ) -> Result<Self> {
        check_rho(rho)?;
        if alphas.is_empty() || alphas.len() != intervals.len() {
            return Err(Error::Validation(
                "need one weight per interval, at least one coordinate".into(),
            ));
        }
        if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::Validation("weights must be positive".into()));
        }
        if !(constant >= 0.0) || !constant.is_finite() {
            return Err(Error::Validation("constant term must be >= 0".into()));
        }
        check_intervals(&intervals)?;
        Ok(KernelModel {
            shape: Shape::Additive {
                parts: alphas.iter().map(|&a| (a, Component1D::Cosine)).collect(),
                constant,
            },
            domain: Domain::Box(intervals),
            rho,
            feature: Some(FeatureMap::Additive {
                parts: alphas.iter().map(|&a| (a, Map1D::CosSin)).collect(),
                constant,
            }),
        })
    }

    /// 1-D additive kernel f(x, y) = rho alpha exp(x y) on an interval; its
    /// psi transform is strictly nonlinear.
    pub fn exp_product(rho: f64, alpha: f64, interval: (f64, f64)) -> Result<Self> {
        check_rho(rho)?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Validation("alpha must be positive".into()));
        }
        check_intervals(std::slice::from_ref(&interval))?;
        let bound = interval.0.abs().max(interval.1.abs());
        let order = series_order(bound * bound)?;
        let mut coeff = Vec::with_capacity(order + 1);
        let mut c = 1.0f64;
        coeff.push(c);
        for k in 1..=order {
            c /= (k as f64).sqrt();
            coeff.push(c);
        }
        Ok(KernelModel {
            shape: Shape::Additive {
                parts: vec![(alpha, Component1D::ExpProduct)],
                constant: 0.0,
            },
            domain: Domain::Box(vec![interval]),
            rho,
            feature: Some(FeatureMap::Additive {
                parts: vec![(alpha, Map1D::ExpSeries { coeff })],
                constant: 0.0,
            }),
        })
    }

    /// Builds a kernel from a JSON-loadable specification.
    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::CosineGrid { rho } => Self::cosine_grid(*rho),
            KernelSpec::RadialExp {
                rho,
                half_width,
                dim,
            } => Self::radial_exp(*rho, *half_width, *dim),
            KernelSpec::LinearInnerProduct { rho, dim } => Self::linear_inner_product(*rho, *dim),
            KernelSpec::PolynomialInnerProduct { rho, dim, coeffs } => {
                Self::polynomial_inner_product(*rho, *dim, coeffs.clone())
            }
            KernelSpec::AdditiveCosine {
                rho,
                alphas,
                constant,
                intervals,
            } => Self::additive_cosine(*rho, alphas.clone(), *constant, intervals.clone()),
            KernelSpec::ExpProduct {
                rho,
                alpha,
                interval,
            } => Self::exp_product(*rho, *alpha, *interval),
        }
    }

    pub fn catalog_names() -> &'static [&'static str] {
        &[
            "cosine-grid",
            "radial-exp",
            "linear-inner-product",
            "polynomial-inner-product",
            "additive-cosine",
            "exp-product",
        ]
    }

    /// The same kernel with its structural variant forgotten: metric tensors
    /// fall back to finite differences of the feature map, and the
    /// closed-form geodesic becomes unavailable.
    pub fn as_finite_rank(&self) -> Result<Self> {
        if self.feature.is_none() {
            return Err(Error::Validation(
                "kernel has no finite-rank feature map".into(),
            ));
        }
        Ok(KernelModel {
            shape: Shape::FiniteRankOnly,
            domain: self.domain.clone(),
            rho: self.rho,
            feature: self.feature.clone(),
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn latent_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.feature.as_ref().map(|f| f.dim())
    }

    /// Whether the feature map reproduces f exactly (rather than to the
    /// truncation target).
    pub fn feature_map_is_exact(&self) -> Option<bool> {
        self.feature.as_ref().map(|f| f.is_exact())
    }

    pub fn has_closed_form_geodesic(&self) -> bool {
        !matches!(self.shape, Shape::FiniteRankOnly)
    }

    /// f(x, y), including the sparsity factor rho.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.latent_dim();
        assert_eq!(x.len(), d, "x has wrong dimension");
        assert_eq!(y.len(), d, "y has wrong dimension");
        let base = match &self.shape {
            Shape::TranslationInvariant { profile, .. } => {
                let u: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                profile.eval(&u)
            }
            Shape::RadialTi { profile } => {
                let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                profile.eval(s)
            }
            Shape::InnerProduct { profile } => {
                let t: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                profile.eval(t)
            }
            Shape::Additive { parts, constant } => {
                parts
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|((alpha, c), (a, b))| alpha * c.eval(*a, *b))
                    .sum::<f64>()
                    + constant
            }
            Shape::FiniteRankOnly => {
                let f = self.feature.as_ref().expect("finite-rank kernel has a feature map");
                let (px, py) = (f.eval_base(x), f.eval_base(y));
                return self.rho * px.iter().zip(&py).map(|(a, b)| a * b).sum::<f64>();
            }
        };
        self.rho * base
    }
}

fn check_intervals(intervals: &[(f64, f64)]) -> Result<()> {
    for &(lo, hi) in intervals {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Validation(format!(
                "invalid interval [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Appends the monomial feature components of a_k <x, y>^k over R^dim.
fn push_monomial_terms(terms: &mut Vec<PolyTerm>, a: f64, degree: u32, dim: usize) {
    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }
    fn recurse(
        terms: &mut Vec<PolyTerm>,
        a: f64,
        degree: u32,
        exps: &mut Vec<u32>,
        slot: usize,
        left: u32,
        dim: usize,
    ) {
        if slot + 1 == dim {
            exps.push(left);
            let multinom =
                factorial(degree) / exps.iter().map(|&e| factorial(e)).product::<f64>();
            terms.push(PolyTerm {
                exponents: exps.clone(),
                coeff: (a * multinom).sqrt(),
            });
            exps.pop();
            return;
        }
        for e in 0..=left {
            exps.push(e);
            recurse(terms, a, degree, exps, slot + 1, left - e, dim);
            exps.pop();
        }
    }
    let mut exps = Vec::with_capacity(dim);
    recurse(terms, a, degree, &mut exps, 0, degree, dim);
}

/// JSON-facing kernel specification: variant tag, parameters, domain, rho.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    CosineGrid {
        #[serde(default = "default_rho")]
        rho: f64,
    },
    RadialExp {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    LinearInnerProduct {
        #[serde(default = "default_rho")]
        rho: f64,
        dim: usize,
    },
    PolynomialInnerProduct {
        #[serde(default = "default_rho")]
        rho: f64,
        dim: usize,
        coeffs: Vec<f64>,
    },
    AdditiveCosine {
        #[serde(default = "default_rho")]
        rho: f64,
        alphas: Vec<f64>,
        #[serde(default)]
        constant: f64,
        intervals: Vec<(f64, f64)>,
    },
    ExpProduct {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_rho")]
        alpha: f64,
        interval: (f64, f64),
    },
}

fn default_rho() -> f64 {
    1.0
}

fn default_half_width() -> f64 {
    1.0
}

fn default_dim() -> usize {
    2
}

impl KernelSpec {
    pub fn rho(&self) -> f64 {
        match self {
            KernelSpec::CosineGrid { rho }
            | KernelSpec::RadialExp { rho, .. }
            | KernelSpec::LinearInnerProduct { rho, .. }
            | KernelSpec::PolynomialInnerProduct { rho, .. }
            | KernelSpec::AdditiveCosine { rho, .. }
            | KernelSpec::ExpProduct { rho, .. } => *rho,
        }
    }
}

/// The Riemannian metric at z: `H_z[i][j]` = d^2 f / dx_i dy_j at (z, z).
#[derive(Debug, Clone)]
pub struct MetricTensor {
    pub z: Vec<f64>,
    /// Row-major d x d symmetric positive-definite matrix.
    pub h: Vec<f64>,
}

impl MetricTensor {
    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// <delta, H delta>.
    pub fn quadratic_form(&self, delta: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += delta[i] * self.h[i * d + j] * delta[j];
            }
        }
        acc
    }
}

/// The metric tensor H_z, analytic per variant, finite-differenced for pure
/// finite-rank kernels. Positive-definiteness is asserted: a degenerate
/// metric breaks the path-length correspondence the oracles rely on.
pub fn metric_tensor(k: &KernelModel, z: &[f64]) -> Result<MetricTensor> {
    k.domain.check(z, "point")?;
    let d = k.latent_dim();
    let mut h = match &k.shape {
        Shape::TranslationInvariant {
            profile,
            neg_hessian_at_origin,
        } => match neg_hessian_at_origin {
            Some(m) => m.clone(),
            None => fd_neg_hessian_at_origin(profile, d),
        },
        Shape::RadialTi { profile } => {
            let s = -2.0 * profile.h_prime_at_0();
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                m[i * d + i] = s;
            }
            m
        }
        Shape::InnerProduct { profile } => {
            let gp = profile.g_prime_at_1();
            let gpp = profile.g_second_at_1();
            let mut m = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    m[i * d + j] = gpp * z[i] * z[j];
                }
                m[i * d + i] += gp;
            }
            m
        }
        Shape::Additive { parts, .. } => {
            let mut m = vec![0.0; d * d];
            for (i, (alpha, c)) in parts.iter().enumerate() {
                m[i * d + i] = alpha * c.diag_second(z[i]);
            }
            m
        }
        Shape::FiniteRankOnly => {
            let f = k
                .feature
                .as_ref()
                .ok_or_else(|| Error::Validation("finite-rank kernel lacks a feature map".into()))?;
            // Jacobian by central differences; H = J^T J, already scaled by
            // rho through the map scaling below (handled separately).
            let jac = fd_jacobian(f, z, d);
            let p = jac.len() / d;
            let mut m = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    let mut acc = 0.0;
                    for r in 0..p {
                        acc += jac[r * d + a] * jac[r * d + b];
                    }
                    m[a * d + b] = acc;
                }
            }
            // eval_base is unscaled; fold rho in here once.
            for v in &mut m {
                *v *= k.rho;
            }
            let mt = finish_metric(z, m, d)?;
            return Ok(mt);
        }
    };
    for v in &mut h {
        *v *= k.rho;
    }
    finish_metric(z, h, d)
}

fn finish_metric(z: &[f64], mut h: Vec<f64>, d: usize) -> Result<MetricTensor> {
    // Symmetrize to kill asymmetric rounding noise before the PD check.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (h[i * d + j] + h[j * d + i]);
            h[i * d + j] = avg;
            h[j * d + i] = avg;
        }
    }
    let (vals, _) = dense_symmetric_eigen_desc(d, &h);
    let min = vals[d - 1];
    if min <= 0.0 {
        return Err(Error::Assumption(format!(
            "metric tensor at {z:?} is not positive definite: minimum eigenvalue {min:.3e}"
        )));
    }
    Ok(MetricTensor { z: z.to_vec(), h })
}

fn fd_neg_hessian_at_origin(profile: &TiProfile, d: usize) -> Vec<f64> {
    let h = FD_STEP;
    let at = |u: &[f64]| profile.eval(u);
    let mut m = vec![0.0; d * d];
    let mut u = vec![0.0; d];
    for i in 0..d {
        // Diagonal: -(g(h e_i) - 2 g(0) + g(-h e_i)) / h^2.
        u.fill(0.0);
        u[i] = h;
        let plus = at(&u);
        u[i] = -h;
        let minus = at(&u);
        u[i] = 0.0;
        let center = at(&u);
        m[i * d + i] = -(plus - 2.0 * center + minus) / (h * h);
        for j in (i + 1)..d {
            u.fill(0.0);
            u[i] = h;
            u[j] = h;
            let pp = at(&u);
            u[j] = -h;
            let pm = at(&u);
            u[i] = -h;
            let mm = at(&u);
            u[j] = h;
            let mp = at(&u);
            let v = -(pp - pm - mp + mm) / (4.0 * h * h);
            m[i * d + j] = v;
            m[j * d + i] = v;
        }
    }
    m
}

/// Central-difference Jacobian of the unscaled feature map, p x d row-major.
fn fd_jacobian(f: &FeatureMap, z: &[f64], d: usize) -> Vec<f64> {
    let p = f.dim();
    let mut jac = vec![0.0; p * d];
    let mut probe = z.to_vec();
    for c in 0..d {
        probe[c] = z[c] + FD_STEP;
        let plus = f.eval_base(&probe);
        probe[c] = z[c] - FD_STEP;
        let minus = f.eval_base(&probe);
        probe[c] = z[c];
        for r in 0..p {
            jac[r * d + c] = (plus[r] - minus[r]) / (2.0 * FD_STEP);
        }
    }
    jac
}

/// Closed-form geodesic distance between latent positions, per variant.
pub fn geodesic_oracle(k: &KernelModel, zi: &[f64], zj: &[f64]) -> Result<f64> {
    k.domain.check(zi, "endpoint")?;
    k.domain.check(zj, "endpoint")?;
    match &k.shape {
        Shape::TranslationInvariant { .. } => {
            // ||G^T (zi - zj)|| with G G^T = H; H is constant in z.
            let h = metric_tensor(k, zi)?;
            let delta: Vec<f64> = zi.iter().zip(zj).map(|(a, b)| a - b).collect();
            Ok(h.quadratic_form(&delta).sqrt())
        }
        Shape::RadialTi { profile } => {
            let s = (-2.0 * profile.h_prime_at_0() * k.rho).sqrt();
            let dist: f64 = zi
                .iter()
                .zip(zj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok(s * dist)
        }
        Shape::InnerProduct { profile } => {
            let gp = profile.g_prime_at_1() * k.rho;
            if gp <= 0.0 {
                return Err(Error::Assumption("g'(1) must be positive".into()));
            }
            let dot: f64 = zi.iter().zip(zj).map(|(a, b)| a * b).sum();
            Ok(gp.sqrt() * dot.clamp(-1.0, 1.0).acos())
        }
        Shape::Additive { .. } => {
            let a = psi_transform(k, zi)?;
            let b = psi_transform(k, zj)?;
            Ok(a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt())
        }
        Shape::FiniteRankOnly => Err(Error::Validation(
            "no closed-form geodesic for a pure finite-rank kernel; use path_length_oracle".into(),
        )),
    }
}

/// Coordinatewise monotone transform under which additive-kernel geodesics
/// become Euclidean: psi_i(z) = sqrt(rho alpha_i) *
/// integral from the interval's lower end to z of sqrt(d2 f_i(t, t)) dt.
pub fn psi_transform(k: &KernelModel, z: &[f64]) -> Result<Vec<f64>> {
    k.domain.check(z, "point")?;
    let Shape::Additive { parts, .. } = &k.shape else {
        return Err(Error::Validation(
            "psi transform requires an additive kernel".into(),
        ));
    };
    let Domain::Box(intervals) = &k.domain else {
        return Err(Error::Validation("additive kernels live on boxes".into()));
    };
    let mut out = Vec::with_capacity(parts.len());
    for (i, ((alpha, comp), (lo, _))) in parts.iter().zip(intervals).enumerate() {
        let weight = k.rho * alpha;
        let integrand = |t: f64| -> Result<f64> {
            let d2 = weight * comp.diag_second(t);
            if d2 <= 0.0 {
                return Err(Error::Assumption(format!(
                    "mixed second derivative of component {i} is not strictly positive at {t}"
                )));
            }
            Ok(d2.sqrt())
        };
        out.push(adaptive_simpson(&integrand, *lo, z[i], 1e-10)?);
    }
    Ok(out)
}

/// Adaptive Simpson quadrature to absolute tolerance, capped at 1e6 integrand
/// evaluations.
fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        // Still probe the hypothesis at the point.
        f(a)?;
        return Ok(0.0);
    }
    let mut evals = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        if evals > 1_000_000 {
            return Err(Error::Convergence(
                "quadrature exceeded 1e6 evaluations".into(),
            ));
        }
        f(x)
    };
    struct Frame {
        a: f64,
        b: f64,
        fa: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    let fa = eval(a)?;
    let fb = eval(b)?;
    let m0 = 0.5 * (a + b);
    let fm = eval(m0)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut stack = vec![Frame {
        a,
        b,
        fa,
        fb,
        fm,
        whole,
        tol,
        depth: 0,
    }];
    let mut total = 0.0;
    while let Some(fr) = stack.pop() {
        let m = 0.5 * (fr.a + fr.b);
        let lm = 0.5 * (fr.a + m);
        let rm = 0.5 * (m + fr.b);
        let flm = eval(lm)?;
        let frm = eval(rm)?;
        let left = (m - fr.a) / 6.0 * (fr.fa + 4.0 * flm + fr.fm);
        let right = (fr.b - m) / 6.0 * (fr.fm + 4.0 * frm + fr.fb);
        let delta = left + right - fr.whole;
        if delta.abs() <= 15.0 * fr.tol || fr.depth >= 48 {
            total += left + right + delta / 15.0;
        } else {
            stack.push(Frame {
                a: fr.a,
                b: m,
                fa: fr.fa,
                fb: fr.fm,
                fm: flm,
                whole: left,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
            stack.push(Frame {
                a: m,
                b: fr.b,
                fa: fr.fm,
                fb: fr.fb,
                fm: frm,
                whole: right,
                tol: 0.5 * fr.tol,
                depth: fr.depth + 1,
            });
        }
    }
    Ok(total)
}

/// The finite-rank feature vector phi(z) with <phi(x), phi(y)> = f(x, y).
pub fn feature_map(k: &KernelModel, z: &[f64]) -> Result<Vec<f64>> {
    k.domain.check(z, "point")?;
    let f = k.feature.as_ref().ok_or_else(|| {
        Error::Validation("kernel has no finite-rank feature map".into())
    })?;
    let scale = k.rho.sqrt();
    Ok(f.eval_base(z).into_iter().map(|v| scale * v).collect())
}

/// Discretized path lengths: the feature-space chord sum
/// sum_k ||phi(z_k) - phi(z_{k-1})|| and the Riemannian sum
/// sum_k <dz_k, H_{z_{k-1}} dz_k>^(1/2).
pub fn path_length_oracle(k: &KernelModel, path: &PointCloud) -> Result<(f64, f64)> {
    if path.n() < 2 {
        return Err(Error::Validation(format!(
            "a path needs at least 2 points, got {}",
            path.n()
        )));
    }
    if path.dim() != k.latent_dim() {
        return Err(Error::Dimension(format!(
            "path dimension {} does not match latent dimension {}",
            path.dim(),
            k.latent_dim()
        )));
    }
    for i in 0..path.n() {
        k.domain.check(path.row(i), "path point")?;
    }
    if k.feature.is_none() {
        return Err(Error::Validation(
            "path-length oracle needs a finite-rank feature map".into(),
        ));
    }

    // H is constant for the translation-invariant families.
    let constant_h = match &k.shape {
        Shape::TranslationInvariant { .. } | Shape::RadialTi { .. } => {
            Some(metric_tensor(k, path.row(0))?)
        }
        _ => None,
    };

    let mut feature_length = 0.0;
    let mut riemannian_length = 0.0;
    let mut prev_phi = feature_map(k, path.row(0))?;
    for i in 1..path.n() {
        let cur_phi = feature_map(k, path.row(i))?;
        feature_length += cur_phi
            .iter()
            .zip(&prev_phi)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let delta: Vec<f64> = path
            .row(i)
            .iter()
            .zip(path.row(i - 1))
            .map(|(a, b)| a - b)
            .collect();
        let q = match &constant_h {
            Some(h) => h.quadratic_form(&delta),
            None => metric_tensor(k, path.row(i - 1))?.quadratic_form(&delta),
        };
        riemannian_length += q.max(0.0).sqrt();
        prev_phi = cur_phi;
    }
    Ok((feature_length, riemannian_length))
}

/// Deterministic, equally spaced grid over a box, including the endpoints.
/// 1-D boxes take any n >= 1; 2-D boxes need a perfect square.
pub fn sample_latent_grid(domain: &Domain, n: usize) -> Result<PointCloud> {
    let Domain::Box(intervals) = domain else {
        return Err(Error::Validation("grids are defined on boxes".into()));
    };
    if n == 0 {
        return Err(Error::Validation("grid needs at least one point".into()));
    }
    match intervals.len() {
        1 => {
            let (lo, hi) = intervals[0];
            let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
            let coords: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
            PointCloud::new(n, 1, coords)
        }
        2 => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                let nearest = side.max(1) * side.max(1);
                return Err(Error::Validation(format!(
                    "n = {n} is not a perfect square for a 2-D grid; nearest valid n is {nearest}"
                )));
            }
            let (lo0, hi0) = intervals[0];
            let (lo1, hi1) = intervals[1];
            let step0 = if side > 1 { (hi0 - lo0) / (side - 1) as f64 } else { 0.0 };
            let step1 = if side > 1 { (hi1 - lo1) / (side - 1) as f64 } else { 0.0 };
            let mut coords = Vec::with_capacity(2 * n);
            for iy in 0..side {
                for ix in 0..side {
                    coords.push(lo0 + step0 * ix as f64);
                    coords.push(lo1 + step1 * iy as f64);
                }
            }
            PointCloud::new(n, 2, coords)
        }
        d => Err(Error::Validation(format!(
            "grids are supported for 1- and 2-D boxes, not dimension {d}"
        ))),
    }
}

/// Samples an undirected simple graph: upper-triangle entries are independent
/// Bernoulli(f(z_i, z_j)) draws, the matrix is symmetric with zero diagonal,
/// and output is bit-reproducible under the seed regardless of thread count.
pub fn sample_adjacency(k: &KernelModel, z: &PointCloud, seed: Seed) -> Result<SimilarityMatrix> {
    let n = z.n();
    if z.dim() != k.latent_dim() {
        return Err(Error::Dimension(format!(
            "points have dimension {}, kernel expects {}",
            z.dim(),
            k.latent_dim()
        )));
    }
    for i in 0..n {
        k.domain.check(z.row(i), "latent position")?;
    }
    let rows: Vec<Vec<(u32, u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in (i + 1)..n {
                let p = k.eval(z.row(i), z.row(j));
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Validation(format!(
                        "kernel value {p} at pair ({i}, {j}) is not a probability"
                    )));
                }
                let mut rng = stream_rng(seed, StreamDomain::AdjacencyPair, (i * n + j) as u64);
                if rng.random::<f64>() < p {
                    out.push((i as u32, j as u32, 1.0));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let entries: Vec<(u32, u32, f64)> = rows.into_iter().flatten().collect();
    SimilarityMatrix::sparse_upper(n, entries, MatrixKind::Adjacency)
}

/// The noiseless matrix A with `A[i][j]` = f(z_i, z_j), including the diagonal.
pub fn kernel_matrix(k: &KernelModel, z: &PointCloud) -> Result<SimilarityMatrix> {
    let n = z.n();
    if z.dim() != k.latent_dim() {
        return Err(Error::Dimension(format!(
            "points have dimension {}, kernel expects {}",
            z.dim(),
            k.latent_dim()
        )));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = k.eval(z.row(i), z.row(j));
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix::dense(n, values, MatrixKind::Generic)
}
