//! Closed-form large-dimension predictions.
//!
//! * the limiting law of the centered-and-scaled mode-2 Gram matrix, given
//!   through a cubic equation on its Stieltjes transform;
//! * the semicircle law (mode-3 Gram) and the Marchenko–Pastur law
//!   (weighted-mean oracle);
//! * spike locations and eigenvector alignments for the three estimators,
//!   the detectability threshold in `(ρ_T, β_M)`;
//! * the clustering accuracy `Φ(√(ζ/(1−ζ)))`.
//!
//! All quantities are evaluated at finite dimensions (no limit is taken
//! in `ρ_T`, `c_ℓ`, `ϱ` or `ς²`).

use std::f64::consts::PI;

pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::MultiViewParams;
use crate::stats;

/// Number of grid points used for law quadrature.
pub const LAW_GRID_POINTS: usize = 4001;
/// Default imaginary offset for Stieltjes inversion.
pub const DEFAULT_ETA: f64 = 1e-6;
/// Density level below which a point counts as outside the bulk.
pub const EDGE_FLOOR: f64 = 1e-4;

const POLISH_STEPS: usize = 8;
const CONTINUATION_STEPS: usize = 400;

/// Dimension ratios `c_ℓ = n_ℓ / n_T`, all in `(0, 1)` and summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeRatios {
    c1: f64,
    c2: f64,
    c3: f64,
}

impl ShapeRatios {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let inside = [c1, c2, c3]
            .iter()
            .all(|c| c.is_finite() && *c > 0.0 && *c < 1.0);
        if !inside || (c1 + c2 + c3 - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!(
                "shape ratios ({c1}, {c2}, {c3}) must lie in (0,1) and sum to 1"
            )));
        }
        Ok(ShapeRatios { c1, c2, c3 })
    }

    pub fn from_dims(dims: [usize; 3]) -> Self {
        let total = (dims[0] + dims[1] + dims[2]) as f64;
        ShapeRatios {
            c1: dims[0] as f64 / total,
            c2: dims[1] as f64 / total,
            c3: dims[2] as f64 / total,
        }
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// `c1/(1−c3)`, i.e. `n1/(n1+n2)`.
    pub fn matrix_share1(&self) -> f64 {
        self.c1 / (1.0 - self.c3)
    }

    /// `c2/(1−c3)`, i.e. `n2/(n1+n2)`.
    pub fn matrix_share2(&self) -> f64 {
        self.c2 / (1.0 - self.c3)
    }
}

// ---------------------------------------------------------------------------
// polynomial roots

fn horner(coef: &[C64; 4], m: C64) -> (C64, C64) {
    let mut p = coef[0];
    let mut dp = C64::new(0.0, 0.0);
    for &c in &coef[1..] {
        dp = dp * m + p;
        p = p * m + c;
    }
    (p, dp)
}

fn polish(coef: &[C64; 4], mut m: C64) -> C64 {
    let (mut p, mut dp) = horner(coef, m);
    let mut r = p.norm();
    for _ in 0..POLISH_STEPS {
        if r == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let next = m - p / dp;
        let (pn, dpn) = horner(coef, next);
        if !(pn.norm() < r) {
            break;
        }
        m = next;
        p = pn;
        dp = dpn;
        r = pn.norm();
    }
    m
}

fn quadratic_roots(b: C64, c: C64, d: C64) -> Vec<C64> {
    if b.norm() == 0.0 {
        return if c.norm() == 0.0 { vec![] } else { vec![-d / c] };
    }
    let mut sq = (c * c - 4.0 * b * d).sqrt();
    if (c.conj() * sq).re < 0.0 {
        sq = -sq;
    }
    let q = -0.5 * (c + sq);
    if q.norm() == 0.0 {
        return vec![C64::new(0.0, 0.0); 2];
    }
    vec![q / b, d / q]
}

fn cardano(a: C64, b: C64, c: C64, d: C64) -> Vec<C64> {
    let bb = b / a;
    let cc = c / a;
    let dd = d / a;
    let shift = -bb / 3.0;
    let p = cc - bb * bb / 3.0;
    let q = 2.0 * bb * bb * bb / 27.0 - bb * cc / 3.0 + dd;
    let sq = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let (u1, u2) = (-q / 2.0 + sq, -q / 2.0 - sq);
    let u3 = if u1.norm() >= u2.norm() { u1 } else { u2 };
    if u3.norm() == 0.0 {
        return vec![shift; 3];
    }
    let u = u3.powf(1.0 / 3.0);
    let omega = C64::new(-0.5, 0.75f64.sqrt());
    let mut rot = C64::new(1.0, 0.0);
    (0..3)
        .map(|_| {
            let uk = u * rot;
            rot *= omega;
            uk - p / (3.0 * uk) + shift
        })
        .collect()
}

/// All roots of `a m³ + b m² + c m + d`, Newton-polished.
///
/// When the leading coefficient is negligible the two moderate roots come
/// from the quadratic part and the large one from the sum of roots.
pub fn cubic_roots(coef: [C64; 4]) -> Vec<C64> {
    let [a, b, c, d] = coef;
    let scale = b.norm().max(c.norm()).max(d.norm());
    let raw = if a.norm() == 0.0 {
        quadratic_roots(b, c, d)
    } else if a.norm() <= 1e-5 * scale {
        let mut r = quadratic_roots(b, c, d);
        if r.len() == 2 {
            let large = -b / a - r[0] - r[1];
            r.push(large);
            r
        } else {
            cardano(a, b, c, d)
        }
    } else {
        cardano(a, b, c, d)
    };
    raw.into_iter().map(|m| polish(&coef, m)).collect()
}

// ---------------------------------------------------------------------------
// mode-2 limiting law

/// Cubic `a m³ + (1 + a s) m² + (s + d) m + 1 = 0` satisfied by the Stieltjes
/// transform of the mode-2 limiting law, with `a = ρ c2/(1−c3)` and
/// `d = ρ (c2 − c1)/(1−c3)`.
///
/// Equivalently `s = −1/m − m + κ/(1 + a m)` with `κ = ρ c1/(1−c3)`.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesCubic {
    rho: f64,
    ratios: ShapeRatios,
    a: f64,
    kappa: f64,
}

impl StieltjesCubic {
    pub fn new(rho: f64, ratios: ShapeRatios) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::arg(format!("rho_T must be finite and >= 0, got {rho}")));
        }
        Ok(StieltjesCubic {
            rho,
            ratios,
            a: rho * ratios.matrix_share2(),
            kappa: rho * ratios.matrix_share1(),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn ratios(&self) -> ShapeRatios {
        self.ratios
    }

    /// Mean of the law.
    pub fn mean(&self) -> f64 {
        self.kappa
    }

    /// Variance of the law.
    pub fn variance(&self) -> f64 {
        1.0 + self.kappa * self.a
    }

    pub fn coefficients(&self, s: C64) -> [C64; 4] {
        let one = C64::new(1.0, 0.0);
        [
            C64::new(self.a, 0.0),
            one + self.a * s,
            s + (self.a - self.kappa),
            one,
        ]
    }

    pub fn residual(&self, m: C64, s: C64) -> C64 {
        horner(&self.coefficients(s), m).0
    }

    pub fn roots(&self, s: C64) -> Vec<C64> {
        cubic_roots(self.coefficients(s))
    }

    /// The inverse map `m ↦ s`.
    pub fn inverse(&self, m: C64) -> C64 {
        -1.0 / m - m + self.kappa / (1.0 + self.a * m)
    }

    /// `s'(m)·m²` on the real axis; lies in `(0, 1]` for the true branch
    /// outside the support.
    fn slope_ratio(&self, m: f64) -> f64 {
        let q = 1.0 + self.a * m;
        1.0 - m * m + self.kappa * self.a * m * m / (q * q)
    }

    /// Discriminant of the cubic at real `t`; negative inside the bulk.
    pub fn discriminant(&self, t: f64) -> f64 {
        let a = self.a;
        let b = 1.0 + a * t;
        let c = t + self.a - self.kappa;
        let d = 1.0;
        18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3)
            - 27.0 * a * a * d * d
    }

    fn check_residual(&self, m: C64, s: C64) -> Result<C64> {
        let r = self.residual(m, s).norm();
        let bound = 1e-12 * (1.0 + s.norm().powi(3));
        if r < bound && m.re.is_finite() && m.im.is_finite() {
            Ok(m)
        } else {
            Err(Error::Numeric(format!(
                "cubic residual {r:e} at s = {s} exceeds {bound:e}"
            )))
        }
    }

    /// Stieltjes transform off the real axis: the root with
    /// `Im m · Im s > 0`. Ties are resolved by `|m|² ≤ Im m / Im s`, which
    /// every Stieltjes transform of a probability measure satisfies, and
    /// failing that by continuation from far up the imaginary direction.
    pub fn select(&self, s: C64) -> Result<C64> {
        if s.im == 0.0 {
            return Err(Error::arg("select needs Im s != 0"));
        }
        let sign = s.im.signum();
        let cands: Vec<C64> = self
            .roots(s)
            .into_iter()
            .filter(|m| m.im * sign > 0.0)
            .collect();
        let m = match cands.len() {
            0 => {
                return Err(Error::Numeric(format!(
                    "no root with the required sign of Im at s = {s}"
                )))
            }
            1 => cands[0],
            _ => {
                let bounded: Vec<C64> = cands
                    .iter()
                    .copied()
                    .filter(|m| m.norm_sqr() * s.im.abs() <= m.im.abs() * (1.0 + 1e-9))
                    .collect();
                if bounded.len() == 1 {
                    bounded[0]
                } else {
                    self.continue_vertically(s)
                }
            }
        };
        self.check_residual(m, s)
    }

    fn continue_vertically(&self, s: C64) -> C64 {
        let sign = s.im.signum();
        let top = 10.0 * (1.0 + s.norm());
        let start = C64::new(s.re, sign * top);
        let guess = -1.0 / start;
        let mut m = nearest(&self.roots(start), guess);
        for k in 1..=CONTINUATION_STEPS {
            let t = k as f64 / CONTINUATION_STEPS as f64;
            let im = top * (s.im.abs() / top).powf(t);
            m = nearest(&self.roots(C64::new(s.re, sign * im)), m);
        }
        m
    }

    /// Real Stieltjes transform at `t` outside `[lower, upper]`, tracked
    /// from `±10(1 + |edge|)` along the branch `m ~ −1/t`.
    pub fn real_branch(&self, t: f64, edges: (f64, f64)) -> Result<f64> {
        let (lower, upper) = edges;
        let (edge, dir) = if t > upper {
            (upper, 1.0)
        } else if t < lower {
            (lower, -1.0)
        } else {
            return Err(Error::Domain(format!(
                "s = {t} lies inside the bulk [{lower}, {upper}]"
            )));
        };
        let far = dir * 10.0 * (1.0 + edge.abs());
        let d_end = (t - edge).abs();
        let d_start = (far - edge).abs().max(d_end);
        let t_start = edge + dir * d_start;

        let start_roots = self.roots(C64::new(t_start, 0.0));
        let admissible: Vec<C64> = start_roots
            .iter()
            .copied()
            .filter(|m| m.im.abs() <= 1e-9 * (1.0 + m.norm()))
            .filter(|m| {
                let r = self.slope_ratio(m.re);
                r > 0.0 && r <= 1.0 + 1e-9
            })
            .collect();
        let guess = C64::new(-1.0 / t_start, 0.0);
        let mut m = if admissible.is_empty() {
            nearest(&start_roots, guess)
        } else {
            nearest(&admissible, guess)
        };
        if d_start > d_end {
            for k in 1..=CONTINUATION_STEPS {
                let f = k as f64 / CONTINUATION_STEPS as f64;
                let d = d_start * (d_end / d_start).powf(f);
                let tk = if k == CONTINUATION_STEPS { t } else { edge + dir * d };
                m = nearest(&self.roots(C64::new(tk, 0.0)), m);
            }
        }
        let m = C64::new(m.re, 0.0);
        self.check_residual(m, C64::new(t, 0.0)).map(|m| m.re)
    }

    /// Stieltjes transform anywhere off the support.
    pub fn stieltjes(&self, s: C64) -> Result<C64> {
        if s.im != 0.0 {
            return self.select(s);
        }
        let edges = self.bulk_edges()?;
        self.real_branch(s.re, edges).map(|m| C64::new(m, 0.0))
    }

    /// `(1/π) Im m(t + iη)`.
    pub fn density(&self, t: f64, eta: f64) -> Result<f64> {
        Ok(self.select(C64::new(t, eta))?.im / PI)
    }

    /// Outer edges of the support.
    ///
    /// Located by scanning the density at `η = 1e−6` and bisecting on the
    /// floor crossing, then refined to the nearby sign change of the cubic's
    /// discriminant (where the selected root becomes real).
    pub fn bulk_edges(&self) -> Result<(f64, f64)> {
        if self.rho == 0.0 {
            return Ok((-2.0, 2.0));
        }
        let centre = self.mean();
        let mut half = 3.0 * self.variance().sqrt() + 1.0;
        for _ in 0..40 {
            let grid = uniform_grid(centre - half, centre + half, LAW_GRID_POINTS);
            let dens = grid
                .iter()
                .map(|&t| self.density(t, DEFAULT_ETA))
                .collect::<Result<Vec<f64>>>()?;
            let h = grid[1] - grid[0];
            let mass = stats::simpson(&dens, h);
            let last = dens.len() - 1;
            if dens[0] < EDGE_FLOOR && dens[last] < EDGE_FLOOR && mass > 0.99 {
                let first_in = dens.iter().position(|&d| d >= EDGE_FLOOR);
                let last_in = dens.iter().rposition(|&d| d >= EDGE_FLOOR);
                let (i, j) = match (first_in, last_in) {
                    (Some(i), Some(j)) => (i, j),
                    _ => break,
                };
                let lo = self.floor_crossing(grid[i - 1], grid[i])?;
                let hi = self.floor_crossing(grid[j + 1], grid[j])?;
                return Ok((self.refine_edge(lo, h), self.refine_edge(hi, h)));
            }
            half *= 2.0;
        }
        Err(Error::Numeric(format!(
            "could not bracket the bulk for rho_T = {}",
            self.rho
        )))
    }

    /// Bisection between `outside` (density below floor) and `inside`.
    fn floor_crossing(&self, mut outside: f64, mut inside: f64) -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (outside + inside);
            if self.density(mid, DEFAULT_ETA)? >= EDGE_FLOOR {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (outside + inside))
    }

    fn refine_edge(&self, e: f64, h: f64) -> f64 {
        let samples = 129;
        let lo = e - 4.0 * h;
        let step = 8.0 * h / (samples - 1) as f64;
        let pts: Vec<(f64, f64)> = (0..samples)
            .map(|k| {
                let t = lo + k as f64 * step;
                (t, self.discriminant(t))
            })
            .collect();
        let bracket = pts
            .windows(2)
            .filter(|w| w[0].1.signum() != w[1].1.signum())
            .min_by(|a, b| {
                let da = (0.5 * (a[0].0 + a[1].0) - e).abs();
                let db = (0.5 * (b[0].0 + b[1].0) - e).abs();
                da.total_cmp(&db)
            });
        let Some(w) = bracket else { return e };
        let (mut x0, mut f0, mut x1) = (w[0].0, w[0].1, w[1].0);
        for _ in 0..100 {
            let mid = 0.5 * (x0 + x1);
            if mid == x0 || mid == x1 {
                break;
            }
            let fm = self.discriminant(mid);
            if fm.signum() == f0.signum() {
                x0 = mid;
                f0 = fm;
            } else {
                x1 = mid;
            }
        }
        0.5 * (x0 + x1)
    }
}

fn nearest(roots: &[C64], target: C64) -> C64 {
    roots
        .iter()
        .copied()
        .min_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()))
        .expect("cubic has at least one root")
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + k as f64 * h).collect()
}

/// Stieltjes transform of the mode-2 limiting law at `s`.
///
/// Off the real axis the root with `Im m · Im s > 0` is returned; real `s`
/// outside the bulk gets the real branch continuous with `−1/s`; real `s`
/// inside the bulk is a domain error.
pub fn stieltjes_mode2(s: C64, rho_t: f64, c: ShapeRatios) -> Result<C64> {
    StieltjesCubic::new(rho_t, c)?.stieltjes(s)
}

pub fn cubic_bulk_edges(rho_t: f64, c: ShapeRatios) -> Result<(f64, f64)> {
    StieltjesCubic::new(rho_t, c)?.bulk_edges()
}

// ---------------------------------------------------------------------------
// laws

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Semicircle,
    MarchenkoPastur,
    Cubic,
}

/// A limiting spectral law sampled on a grid, with an optional atom at 0.
#[derive(Debug, Clone)]
pub struct Law {
    kind: LawKind,
    edges: (f64, f64),
    atom: f64,
    grid: Vec<f64>,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Law {
    fn build(kind: LawKind, edges: (f64, f64), atom: f64, grid: Vec<f64>, density: Vec<f64>) -> Law {
        let mut cumulative = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 1..grid.len() {
            acc += 0.5 * (grid[k] - grid[k - 1]) * (density[k] + density[k - 1]);
            cumulative.push(acc);
        }
        Law {
            kind,
            edges,
            atom,
            grid,
            density,
            cumulative,
        }
    }

    /// The quadrature grid `[e− − 0.5, e+ + 0.5]` with [`LAW_GRID_POINTS`] points.
    pub fn quadrature_grid(edges: (f64, f64)) -> Vec<f64> {
        uniform_grid(edges.0 - 0.5, edges.1 + 0.5, LAW_GRID_POINTS)
    }

    pub fn semicircle() -> Law {
        let edges = (-2.0, 2.0);
        let grid = Self::quadrature_grid(edges);
        let density = grid.iter().map(|&x| semicircle(x)).collect();
        Law::build(LawKind::Semicircle, edges, 0.0, grid, density)
    }

    pub fn marchenko_pastur(c: ShapeRatios) -> Law {
        let edges = mp_edges(c);
        let grid = Self::quadrature_grid(edges);
        let density = grid.iter().map(|&x| mp_density(x, c)).collect();
        Law::build(LawKind::MarchenkoPastur, edges, mp_atom(c), grid, density)
    }

    /// Mode-2 law on its default quadrature grid.
    pub fn cubic(rho_t: f64, c: ShapeRatios, eta: f64) -> Result<Law> {
        let edges = cubic_bulk_edges(rho_t, c)?;
        lsd_density_mode2(&Self::quadrature_grid(edges), rho_t, c, eta)
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn edges(&self) -> (f64, f64) {
        self.edges
    }

    /// Point mass at 0.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Total mass: Simpson on a uniform grid (trapezoid otherwise) plus the atom.
    pub fn mass(&self) -> f64 {
        let n = self.grid.len();
        if n < 2 {
            return self.atom;
        }
        let h = self.grid[1] - self.grid[0];
        let uniform = self
            .grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
        let body = if uniform {
            stats::simpson(&self.density, h)
        } else {
            self.cumulative[n - 1]
        };
        body + self.atom
    }

    /// Linear interpolation of the sampled density; 0 off the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        self.interpolate(&self.density, x, 0.0, 0.0)
    }

    /// CDF by cumulative trapezoid, plus the atom for `x ≥ 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        let last = *self.cumulative.last().unwrap_or(&0.0);
        let body = self.interpolate(&self.cumulative, x, 0.0, last);
        let atom = if x >= 0.0 { self.atom } else { 0.0 };
        (body + atom).clamp(0.0, 1.0)
    }

    fn interpolate(&self, ys: &[f64], x: f64, below: f64, above: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x < g[0] {
            return below;
        }
        if x >= g[g.len() - 1] {
            return above;
        }
        let k = g.partition_point(|&v| v <= x).max(1);
        let (x0, x1) = (g[k - 1], g[k]);
        let w = (x - x0) / (x1 - x0);
        ys[k - 1] * (1.0 - w) + ys[k] * w
    }
}

/// Mode-2 law sampled on `grid`: `(1/π) Im m(t + iη)`.
pub fn lsd_density_mode2(grid: &[f64], rho_t: f64, c: ShapeRatios, eta: f64) -> Result<Law> {
    if !(eta > 0.0) {
        return Err(Error::arg(format!("eta must be positive, got {eta}")));
    }
    let cubic = StieltjesCubic::new(rho_t, c)?;
    let edges = cubic.bulk_edges()?;
    let density = grid
        .iter()
        .map(|&t| cubic.density(t, eta))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Law::build(LawKind::Cubic, edges, 0.0, grid.to_vec(), density))
}

/// Semicircle density `√([4 − x²]⁺)/(2π)`.
pub fn semicircle(x: f64) -> f64 {
    (4.0 - x * x).max(0.0).sqrt() / (2.0 * PI)
}

/// Marchenko–Pastur edges `(√c1' ∓ √c2')²` with `c_ℓ' = c_ℓ/(1−c3)`.
pub fn mp_edges(c: ShapeRatios) -> (f64, f64) {
    let (a, b) = (c.matrix_share1().sqrt(), c.matrix_share2().sqrt());
    ((a - b).powi(2), (a + b).powi(2))
}

/// Point mass at 0, `[1 − c1/c2]⁺`.
pub fn mp_atom(c: ShapeRatios) -> f64 {
    (1.0 - c.c1() / c.c2()).max(0.0)
}

/// Absolutely continuous part of the Marchenko–Pastur law.
pub fn mp_density(x: f64, c: ShapeRatios) -> f64 {
    let (lo, hi) = mp_edges(c);
    if x <= lo || x >= hi || x <= 0.0 {
        return 0.0;
    }
    ((x - lo) * (hi - x)).sqrt() / (2.0 * PI * c.matrix_share2() * x)
}

// ---------------------------------------------------------------------------
// spikes

/// Predicted isolated eigenvalue and eigenvector alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikePrediction {
    pub location: f64,
    /// `max(ζ, 0)`.
    pub alignment: f64,
    pub detectable: bool,
}

impl SpikePrediction {
    fn from_signed(location: f64, zeta: f64) -> Self {
        SpikePrediction {
            location,
            alignment: zeta.max(0.0),
            detectable: zeta > 0.0,
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive, got {v}")))
    }
}

/// Spike location of the centered-and-scaled mode-2 Gram matrix.
pub fn mode2_spike_location(rho_t: f64, beta_m: f64, c: ShapeRatios) -> f64 {
    let (s1, s2) = (c.matrix_share1(), c.matrix_share2());
    let b2 = beta_m * beta_m;
    rho_t / b2 * (s1 + b2) * (s2 + b2) + 1.0 / (rho_t * (s2 + b2))
}

/// Signed alignment `ζ` of the mode-2 estimator; negative below threshold.
pub fn mode2_alignment_signed(rho_t: f64, beta_m: f64, c: ShapeRatios) -> f64 {
    let (s1, s2) = (c.matrix_share1(), c.matrix_share2());
    let b2 = beta_m * beta_m;
    let t = b2 / (rho_t * (s2 + b2));
    1.0 - (t * t + s2 * (s1 + b2)) / (b2 * (s2 + b2))
}

pub fn spike2(rho_t: f64, beta_m: f64, c: ShapeRatios) -> Result<SpikePrediction> {
    require_positive("rho_T", rho_t)?;
    require_positive("beta_M", beta_m)?;
    Ok(SpikePrediction::from_signed(
        mode2_spike_location(rho_t, beta_m, c),
        mode2_alignment_signed(rho_t, beta_m, c),
    ))
}

/// Smallest `β_M` for which some `ρ_T` makes the mode-2 spike detectable,
/// `(c1 c2)^{1/4}/(1−c3)^{1/2}`.
pub fn phase_transition_asymptote(c: ShapeRatios) -> f64 {
    (c.matrix_share1() * c.matrix_share2()).powf(0.25)
}

/// The `ρ_T` at which the mode-2 alignment crosses zero.
pub fn phase_transition_rho(beta_m: f64, c: ShapeRatios) -> Result<f64> {
    require_positive("beta_M", beta_m)?;
    let (s1, s2) = (c.matrix_share1(), c.matrix_share2());
    let b2 = beta_m * beta_m;
    let gap = b2 * b2 - s1 * s2;
    if gap <= 0.0 {
        return Err(Error::Domain(format!(
            "beta_M = {beta_m} is at or below the asymptote {}; no rho_T gives a spike",
            phase_transition_asymptote(c)
        )));
    }
    Ok(b2 / ((s2 + b2) * gap.sqrt()))
}

/// Spike of `(1/ς²) T̄ᵀT̄` for the weighted-mean oracle.
pub fn spike_oracle(beta_t: f64, beta_m: f64, c: ShapeRatios, varsigma2: f64) -> Result<SpikePrediction> {
    require_positive("beta_T", beta_t)?;
    require_positive("beta_M", beta_m)?;
    require_positive("varsigma^2", varsigma2)?;
    let x = beta_t * beta_t * beta_m * beta_m / varsigma2;
    let (s1, s2) = (c.matrix_share1(), c.matrix_share2());
    let location = (x + s1) * (x + s2) / x;
    if x * x <= s1 * s2 {
        return Ok(SpikePrediction {
            location,
            alignment: 0.0,
            detectable: false,
        });
    }
    let zeta = 1.0 - s2 * (x + s1) / (x * (x + s2));
    Ok(SpikePrediction::from_signed(location, zeta))
}

/// Spike of the centered-and-scaled mode-3 Gram matrix.
pub fn spike3(varrho: f64) -> Result<SpikePrediction> {
    require_positive("varrho", varrho)?;
    let zeta = if varrho > 1.0 { 1.0 - 1.0 / (varrho * varrho) } else { 0.0 };
    Ok(SpikePrediction {
        location: varrho + 1.0 / varrho,
        alignment: zeta,
        detectable: varrho > 1.0,
    })
}

// ---------------------------------------------------------------------------
// clustering

/// `Φ(√(ζ/(1−ζ)))`, together with a flag set when `ζ < 0` had to be clamped.
pub fn accuracy_from_alignment_flagged(zeta: f64) -> (f64, bool) {
    if zeta >= 1.0 {
        return (1.0, false);
    }
    if zeta < 0.0 {
        return (0.5, true);
    }
    (stats::normal_cdf((zeta / (1.0 - zeta)).sqrt()), false)
}

/// Asymptotic clustering accuracy for an estimator with alignment `ζ`.
pub fn accuracy_from_alignment(zeta: f64) -> f64 {
    let (acc, clamped) = accuracy_from_alignment_flagged(zeta);
    if clamped {
        log::warn!("negative alignment {zeta} clamped to 0");
    }
    acc
}

/// Signed alignment of the unfolding estimator in the multi-view model.
pub fn multiview_zeta(p: &MultiViewParams) -> Result<f64> {
    let (mu, h) = (p.mu_norm(), p.h_norm());
    require_positive("|mu|", mu)?;
    require_positive("|h|", h)?;
    Ok(mode2_alignment_signed(p.rho(), mu, p.ratios()))
}

/// Alignment of the weighted-mean oracle in the multi-view model.
pub fn multiview_oracle_alignment(p: &MultiViewParams) -> Result<f64> {
    let h = p.h_norm();
    let [pp, n, m] = p.dims();
    let varsigma2 = h * h + (pp + n) as f64 / (pp + n + m) as f64;
    Ok(spike_oracle(h, p.mu_norm(), p.ratios(), varsigma2)?.alignment)
}
