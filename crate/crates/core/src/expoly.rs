//! Exponential polynomials `f(t) = Σ_λ Σ_k c_{λ,k} t^k/k! · e^{-iλt}` and their
//! causal convolutions.
//!
//! Coefficients are stored in the divided-power basis `t^k/k!`. In that basis
//! equal-pole convolution is a shifted discrete convolution and the
//! distinct-pole partial-fraction formulas only involve binomials.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Result, WalkSumError};

/// Poles closer than `POLE_MERGE_REL · max(1, max|λ|)` are merged.
pub const POLE_MERGE_REL: f64 = 1e-9;

/// Time horizon (μs) over which a merged pole must stay accurate.
pub const MERGE_HORIZON: f64 = 100.0;

const MERGE_TRUNCATION: f64 = 1e-17;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn pole_tolerance(max_pole_magnitude: f64) -> f64 {
    POLE_MERGE_REL * max_pole_magnitude.max(1.0)
}

const BINOM_ROWS: usize = 1030;

fn binomial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; BINOM_ROWS * (BINOM_ROWS + 1) / 2];
        for n in 0..BINOM_ROWS {
            let row = n * (n + 1) / 2;
            t[row] = 1.0;
            t[row + n] = 1.0;
            if n >= 2 {
                let prev = (n - 1) * n / 2;
                for k in 1..n {
                    t[row + k] = t[prev + k - 1] + t[prev + k];
                }
            }
        }
        t
    })
}

/// Binomial coefficient as a float.
pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n < BINOM_ROWS {
        return binomial_table()[n * (n + 1) / 2 + k];
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Operation counters accumulated by convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    /// Pole-pair convolutions performed.
    pub convolutions: u64,
    /// Complex multiply-adds spent on coefficients.
    pub flops: u64,
}

impl OpCount {
    pub fn absorb(&mut self, other: OpCount) {
        self.convolutions += other.convolutions;
        self.flops += other.flops;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpPoly {
    poles: Vec<C64>,
    starts: Vec<u32>,
    coeffs: Vec<C64>,
}

impl Default for ExpPoly {
    fn default() -> Self {
        Self::zero()
    }
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly {
            poles: Vec::new(),
            starts: vec![0],
            coeffs: Vec::new(),
        }
    }

    /// `c · e^{-iλt}`.
    pub fn exponential(pole: C64, c: C64) -> Self {
        if c == ZERO {
            return Self::zero();
        }
        ExpPoly {
            poles: vec![pole],
            starts: vec![0, 1],
            coeffs: vec![c],
        }
    }

    pub fn constant(c: C64) -> Self {
        Self::exponential(ZERO, c)
    }

    /// Builds from `(pole, divided-power coefficients)` pairs, merging
    /// poles within `tol`.
    pub fn from_terms<'a, I>(terms: I, tol: f64) -> Self
    where
        I: IntoIterator<Item = (C64, &'a [C64])>,
    {
        let mut b = ExpPolyBuilder::new();
        for (pole, c) in terms {
            b.push(pole, c, C64::new(1.0, 0.0));
        }
        b.finish(tol)
    }

    pub fn is_zero(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn num_poles(&self) -> usize {
        self.poles.len()
    }

    pub fn num_coeffs(&self) -> usize {
        self.coeffs.len()
    }

    /// Highest polynomial degree over all poles, `None` for the zero function.
    pub fn degree(&self) -> Option<usize> {
        self.terms().map(|(_, c)| c.len() - 1).max()
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    /// Iterates `(pole, coefficients)` in ascending pole order.
    pub fn terms(&self) -> impl Iterator<Item = (C64, &[C64])> + '_ {
        self.poles.iter().enumerate().map(move |(i, &p)| {
            let a = self.starts[i] as usize;
            let b = self.starts[i + 1] as usize;
            (p, &self.coeffs[a..b])
        })
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, t: f64) -> C64 {
        let mut total = ZERO;
        for (pole, c) in self.terms() {
            total += horner(c, t) * (C64::new(0.0, -t) * pole).exp();
        }
        total
    }

    pub fn max_abs_on(&self, times: &[f64]) -> f64 {
        times.iter().map(|&t| self.eval(t).norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        if s == ZERO {
            return Self::zero();
        }
        ExpPoly {
            poles: self.poles.clone(),
            starts: self.starts.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &ExpPoly, tol: f64) -> Self {
        let mut b = ExpPolyBuilder::new();
        b.push_poly(self, C64::new(1.0, 0.0));
        b.push_poly(other, C64::new(1.0, 0.0));
        b.finish(tol)
    }

    /// Complex conjugate as a function of real `t`.
    pub fn conj(&self) -> Self {
        let mut b = ExpPolyBuilder::new();
        for (p, c) in self.terms() {
            let cc: Vec<C64> = c.iter().map(|x| x.conj()).collect();
            b.push(-p.conj(), &cc, C64::new(1.0, 0.0));
        }
        b.finish(0.0)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ExpPoly, tol: f64) -> Self {
        let mut b = ExpPolyBuilder::new();
        let mut scratch = Vec::new();
        for (pa, ca) in self.terms() {
            for (pb, cb) in other.terms() {
                scratch.clear();
                scratch.resize(ca.len() + cb.len() - 1, ZERO);
                for (i, &x) in ca.iter().enumerate() {
                    for (j, &y) in cb.iter().enumerate() {
                        scratch[i + j] += x * y * binom(i + j, i);
                    }
                }
                b.push(pa + pb, &scratch, C64::new(1.0, 0.0));
            }
        }
        b.finish(tol)
    }

    /// Causal convolution `∫_0^t f(t-s) g(s) ds`.
    pub fn conv(&self, other: &ExpPoly, tol: f64, ops: &mut OpCount) -> Self {
        let mut b = ExpPolyBuilder::new();
        conv_into(self, other, C64::new(1.0, 0.0), tol, &mut b, ops);
        b.finish(tol)
    }
}

fn horner(c: &[C64], t: f64) -> C64 {
    let mut acc = ZERO;
    for k in (0..c.len()).rev() {
        acc = c[k] + acc * (t / (k + 1) as f64);
    }
    acc
}

/// Adds `scale · (f ⊛ g)` to a builder.
pub fn conv_into(
    f: &ExpPoly,
    g: &ExpPoly,
    scale: C64,
    tol: f64,
    out: &mut ExpPolyBuilder,
    ops: &mut OpCount,
) {
    let mut buf_a: Vec<C64> = Vec::new();
    let mut buf_b: Vec<C64> = Vec::new();
    let mut u: Vec<C64> = Vec::new();
    for (pa, ca) in f.terms() {
        for (pb, cb) in g.terms() {
            ops.convolutions += 1;
            let delta = pa - pb;
            if delta.norm() <= tol {
                // Same pole after merging: shift g onto f's pole first.
                let shifted;
                let cb = if delta == ZERO {
                    cb
                } else {
                    shifted = shift_pole(cb, pb - pa);
                    &shifted[..]
                };
                buf_a.clear();
                buf_a.resize(ca.len() + cb.len(), ZERO);
                for (m, &x) in ca.iter().enumerate() {
                    for (n, &y) in cb.iter().enumerate() {
                        buf_a[m + n + 1] += x * y;
                    }
                }
                ops.flops += (ca.len() * cb.len()) as u64;
                out.push(pa, &buf_a, scale);
                continue;
            }
            // Laplace variables p = -iα, q = -iβ; D = p - q.
            let d = C64::new(0.0, -1.0) * delta;
            let dinv = d.inv();
            let mdinv = -dinv;
            if ca.len() == 1 || cb.len() == 1 {
                // One side is a pure exponential: both pole blocks follow
                // first-order recurrences.
                let (short_pole, s0, long_pole, long, sign) = if ca.len() == 1 {
                    (pa, ca[0], pb, cb, -1.0)
                } else {
                    (pb, cb[0], pa, ca, 1.0)
                };
                buf_b.clear();
                buf_b.resize(long.len(), ZERO);
                let mut next = ZERO;
                for k in (0..long.len()).rev() {
                    let c = if sign < 0.0 {
                        (next - s0 * long[k]) * dinv
                    } else {
                        (s0 * long[k] - next) * dinv
                    };
                    buf_b[k] = c;
                    next = c;
                }
                // Single coefficient on the short side's pole.
                let mut acc = ZERO;
                let step = if sign < 0.0 { dinv } else { mdinv };
                let mut pw = step;
                for &x in long {
                    acc += x * pw;
                    pw *= step;
                }
                ops.flops += 2 * long.len() as u64;
                out.push(short_pole, &[acc * s0], scale);
                out.push(long_pole, &buf_b, scale);
                continue;
            }
            // Coefficients on pole α: c_k = Σ_s (-1)^s v_s a_{k+s},
            // v_s = Σ_n b_n C(n+s, s) D^{-(n+1+s)}.
            let da = ca.len();
            let db = cb.len();
            u.clear();
            u.resize(da, ZERO);
            let mut pow_n = dinv;
            for (n, &bn) in cb.iter().enumerate() {
                if n > 0 {
                    pow_n *= dinv;
                }
                if bn == ZERO {
                    continue;
                }
                let mut pw = pow_n;
                for (s, us) in u.iter_mut().enumerate() {
                    if s > 0 {
                        pw *= dinv;
                    }
                    *us += bn * pw * binom(n + s, s);
                }
            }
            buf_a.clear();
            buf_a.resize(da, ZERO);
            for k in 0..da {
                let mut acc = ZERO;
                for s in 0..(da - k) {
                    let term = u[s] * ca[k + s];
                    if s % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                buf_a[k] = acc;
            }
            // Coefficients on pole β: c_k = Σ_s (-1)^s w_s b_{k+s},
            // w_s = Σ_m a_m C(m+s, s) (-D)^{-(m+1+s)}.
            u.clear();
            u.resize(db, ZERO);
            let mut pow_m = mdinv;
            for (m, &am) in ca.iter().enumerate() {
                if m > 0 {
                    pow_m *= mdinv;
                }
                if am == ZERO {
                    continue;
                }
                let mut pw = pow_m;
                for (s, us) in u.iter_mut().enumerate() {
                    if s > 0 {
                        pw *= mdinv;
                    }
                    *us += am * pw * binom(m + s, s);
                }
            }
            buf_b.clear();
            buf_b.resize(db, ZERO);
            for k in 0..db {
                let mut acc = ZERO;
                for s in 0..(db - k) {
                    let term = u[s] * cb[k + s];
                    if s % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                buf_b[k] = acc;
            }
            ops.flops += (2 * da * db + da * da + db * db) as u64;
            out.push(pa, &buf_a, scale);
            out.push(pb, &buf_b, scale);
        }
    }
}

/// Re-expresses `q(t)·e^{-i(λ+δ)t}` on pole `λ`, i.e. multiplies the
/// coefficients by a truncated series of `e^{-iδt}`.
fn shift_pole(c: &[C64], delta: C64) -> Vec<C64> {
    let x = delta.norm() * MERGE_HORIZON;
    if x < MERGE_TRUNCATION {
        return c.to_vec();
    }
    // Smallest M with x^M/M! below the truncation level.
    let mut terms = 1usize;
    let mut mag = 1.0f64;
    while mag >= MERGE_TRUNCATION && terms < 64 {
        mag *= x / terms as f64;
        terms += 1;
    }
    let mut out = vec![ZERO; c.len() + terms - 1];
    let step = C64::new(0.0, -1.0) * delta;
    for (a, &ca) in c.iter().enumerate() {
        if ca == ZERO {
            continue;
        }
        let mut pw = C64::new(1.0, 0.0);
        for m in 0..terms {
            out[a + m] += ca * pw * binom(a + m, a);
            pw *= step;
        }
    }
    out
}

/// Accumulates unnormalized terms and normalizes them on `finish`.
#[derive(Default)]
pub struct ExpPolyBuilder {
    items: Vec<(C64, u32, u32)>,
    buf: Vec<C64>,
}

impl ExpPolyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pole: C64, coeffs: &[C64], scale: C64) {
        if coeffs.is_empty() || scale == ZERO {
            return;
        }
        let start = self.buf.len() as u32;
        self.buf.extend(coeffs.iter().map(|c| c * scale));
        self.items.push((pole, start, coeffs.len() as u32));
    }

    pub fn push_poly(&mut self, p: &ExpPoly, scale: C64) {
        for (pole, c) in p.terms() {
            self.push(pole, c, scale);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn finish(mut self, tol: f64) -> ExpPoly {
        self.items.sort_by(|a, b| {
            a.0.re
                .total_cmp(&b.0.re)
                .then(a.0.im.total_cmp(&b.0.im))
        });
        let mut out = ExpPoly::zero();
        let mut acc: Vec<C64> = Vec::new();
        let mut i = 0;
        while i < self.items.len() {
            let rep = self.items[i].0;
            acc.clear();
            let mut j = i;
            while j < self.items.len() && (self.items[j].0 - rep).norm() <= tol {
                let (pole, s, l) = self.items[j];
                let c = &self.buf[s as usize..(s + l) as usize];
                if pole == rep {
                    add_into(&mut acc, c);
                } else {
                    add_into(&mut acc, &shift_pole(c, pole - rep));
                }
                j += 1;
            }
            while acc.last() == Some(&ZERO) {
                acc.pop();
            }
            if !acc.is_empty() {
                out.poles.push(rep);
                out.coeffs.extend_from_slice(&acc);
                out.starts.push(out.coeffs.len() as u32);
            }
            i = j;
        }
        out
    }
}

fn add_into(acc: &mut Vec<C64>, c: &[C64]) {
    if acc.len() < c.len() {
        acc.resize(c.len(), ZERO);
    }
    for (a, &x) in acc.iter_mut().zip(c) {
        *a += x;
    }
}

/// Dense matrix of exponential polynomials, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<ExpPoly>,
}

impl ExpMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExpMatrix {
            rows,
            cols,
            entries: vec![ExpPoly::zero(); rows * cols],
        }
    }

    pub fn from_constant(m: &DMatrix<C64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                out.entries[r * out.cols + c] = ExpPoly::constant(m[(r, c)]);
            }
        }
        out
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<ExpPoly>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        ExpMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &ExpPoly {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: ExpPoly) {
        self.entries[r * self.cols + c] = p;
    }

    pub fn entries(&self) -> &[ExpPoly] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(ExpPoly::is_zero)
    }

    pub fn eval(&self, t: f64) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c).eval(t))
    }

    pub fn max_abs_on(&self, times: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_abs_on(times))
            .fold(0.0, f64::max)
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.entries
            .iter()
            .map(ExpPoly::max_pole_magnitude)
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &ExpMatrix, tol: f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b, tol))
            .collect();
        ExpMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ExpMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.scale(s)).collect(),
        }
    }

    /// `C · self` for a constant matrix `C`.
    pub fn left_mul(&self, m: &DMatrix<C64>, tol: f64) -> Self {
        assert_eq!(m.ncols(), self.rows);
        let mut out = Self::zeros(m.nrows(), self.cols);
        for r in 0..m.nrows() {
            for c in 0..self.cols {
                let mut b = ExpPolyBuilder::new();
                for k in 0..self.rows {
                    b.push_poly(self.get(k, c), m[(r, k)]);
                }
                out.set(r, c, b.finish(tol));
            }
        }
        out
    }

    /// `self · C` for a constant matrix `C`.
    pub fn mul_const(&self, m: &DMatrix<C64>, tol: f64) -> Self {
        assert_eq!(m.nrows(), self.cols);
        let mut out = Self::zeros(self.rows, m.ncols());
        for r in 0..self.rows {
            for c in 0..m.ncols() {
                let mut b = ExpPolyBuilder::new();
                for k in 0..self.cols {
                    b.push_poly(self.get(r, k), m[(k, c)]);
                }
                out.set(r, c, b.finish(tol));
            }
        }
        out
    }

    /// Matrix product with convolution in place of multiplication.
    pub fn conv(&self, other: &ExpMatrix, tol: f64, ops: &mut OpCount) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut b = ExpPolyBuilder::new();
                for k in 0..self.cols {
                    conv_into(
                        self.get(r, k),
                        other.get(k, c),
                        C64::new(1.0, 0.0),
                        tol,
                        &mut b,
                        ops,
                    );
                }
                out.set(r, c, b.finish(tol));
            }
        }
        out
    }
}

/// `exp(-i(H + offset·I)t)` for a Hermitian 2×2 `H`, as an [`ExpMatrix`].
pub fn expm2(h: &Matrix2<C64>, offset: f64, tol: f64) -> Result<ExpMatrix> {
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let deviation = (h[(0, 1)] - h[(1, 0)].conj())
        .norm()
        .max(h[(0, 0)].im.abs())
        .max(h[(1, 1)].im.abs());
    if deviation > 1e-12 * scale.max(f64::MIN_POSITIVE) && deviation > 0.0 {
        return Err(WalkSumError::NotHermitian { deviation });
    }
    let a = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bx = h[(0, 1)].re;
    let by = -h[(0, 1)].im;
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let r = (bx * bx + by * by + bz * bz).sqrt();
    let mut entries = Vec::with_capacity(4);
    if r == 0.0 {
        let p = ExpPoly::exponential(C64::new(a + offset, 0.0), C64::new(1.0, 0.0));
        entries.push(p.clone());
        entries.push(ExpPoly::zero());
        entries.push(ExpPoly::zero());
        entries.push(p);
        return Ok(ExpMatrix::from_entries(2, 2, entries));
    }
    let (nx, ny, nz) = (bx / r, by / r, bz / r);
    // Projector onto the +r eigenvector: (I + n·σ)/2.
    let plus = [
        C64::new(0.5 * (1.0 + nz), 0.0),
        C64::new(0.5 * nx, -0.5 * ny),
        C64::new(0.5 * nx, 0.5 * ny),
        C64::new(0.5 * (1.0 - nz), 0.0),
    ];
    let ident = [
        C64::new(1.0, 0.0),
        ZERO,
        ZERO,
        C64::new(1.0, 0.0),
    ];
    let e_plus = C64::new(a + r + offset, 0.0);
    let e_minus = C64::new(a - r + offset, 0.0);
    for k in 0..4 {
        let minus = ident[k] - plus[k];
        let mut b = ExpPolyBuilder::new();
        b.push(e_plus, &[plus[k]], C64::new(1.0, 0.0));
        b.push(e_minus, &[minus], C64::new(1.0, 0.0));
        entries.push(b.finish(tol));
    }
    Ok(ExpMatrix::from_entries(2, 2, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn binomials_match_pascal() {
        assert_eq!(binom(5, 2), 10.0);
        assert_eq!(binom(0, 0), 1.0);
        assert_eq!(binom(3, 4), 0.0);
        let big = binom(1100, 3);
        assert!((big - 1100.0 * 1099.0 * 1098.0 / 6.0).abs() / big < 1e-14);
    }

    #[test]
    fn divided_power_evaluation() {
        // 1 + 2t + 3t²/2 at t = 2 → 1 + 4 + 6 = 11.
        let p = ExpPoly::from_terms([(ZERO, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)][..])], 0.0);
        assert!((p.eval(2.0) - c(11.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn distinct_exponentials_convolve_in_closed_form() {
        let l1 = 0.7;
        let l2 = -1.3;
        let f = ExpPoly::exponential(c(l1, 0.0), c(1.0, 0.0));
        let g = ExpPoly::exponential(c(l2, 0.0), c(1.0, 0.0));
        let h = f.conv(&g, 1e-9, &mut OpCount::default());
        for &t in &[0.0, 0.3, 1.7, 4.0] {
            let want = ((c(0.0, -l2 * t)).exp() - (c(0.0, -l1 * t)).exp()) / c(0.0, l1 - l2);
            assert!((h.eval(t) - want).norm() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn equal_pole_convolution_raises_degree() {
        let f = ExpPoly::exponential(c(0.4, 0.0), c(1.0, 0.0));
        let h = f.conv(&f, 1e-9, &mut OpCount::default());
        assert_eq!(h.num_poles(), 1);
        assert_eq!(h.degree(), Some(1));
        let t = 2.5;
        let want = c(t, 0.0) * c(0.0, -0.4 * t).exp();
        assert!((h.eval(t) - want).norm() < 1e-14);
    }

    #[test]
    fn near_poles_merge_with_correction() {
        let d = 1e-12;
        let p = ExpPoly::from_terms(
            [
                (c(1.0, 0.0), &[c(1.0, 0.0)][..]),
                (c(1.0 + d, 0.0), &[c(1.0, 0.0)][..]),
            ],
            1e-9,
        );
        assert_eq!(p.num_poles(), 1);
        for &t in &[0.0, 10.0, 80.0] {
            let want = c(0.0, -t).exp() + c(0.0, -(1.0 + d) * t).exp();
            assert!((p.eval(t) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn cancelling_terms_vanish() {
        let f = ExpPoly::exponential(c(2.0, 0.0), c(1.5, -0.5));
        let z = f.add(&f.scale(c(-1.0, 0.0)), 1e-9);
        assert!(z.is_zero());
    }

    #[test]
    fn conjugate_and_product() {
        let f = ExpPoly::from_terms([(c(0.3, 0.0), &[c(1.0, 2.0), c(0.5, 0.0)][..])], 0.0);
        let g = f.mul(&f.conj(), 1e-9);
        for &t in &[0.0, 1.0, 3.0] {
            assert!((g.eval(t) - c(f.eval(t).norm_sqr(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn expm2_rabi_poles() {
        let (om, de) = (2.0, 0.7);
        let h = Matrix2::new(ZERO, c(-om / 2.0, 0.0), c(-om / 2.0, 0.0), c(de, 0.0));
        let u = expm2(&h, 0.0, 1e-9).unwrap();
        let chi = (om * om + de * de).sqrt();
        let mut poles: Vec<f64> = u.get(0, 0).poles().iter().map(|p| p.re).collect();
        poles.sort_by(f64::total_cmp);
        assert!((poles[0] - (de - chi) / 2.0).abs() < 1e-14);
        assert!((poles[1] - (de + chi) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn expm2_rejects_non_hermitian() {
        let h = Matrix2::new(ZERO, c(1.0, 0.0), c(2.0, 0.0), ZERO);
        assert!(matches!(
            expm2(&h, 0.0, 1e-9),
            Err(WalkSumError::NotHermitian { .. })
        ));
    }
}
