//! Joint density operator stored as photon-number blocks in a displaced frame.
//!
//! The joint state is `rho = sum |n><n'| (x) rho_{nn'}` and every mechanical
//! block is kept as `sigma_{nn'} = D(kn)^dag rho_{nn'} D(kn')` with real
//! displacements `D`. In this frame the closed dynamics are diagonal in the
//! Fock basis: `sigma_{jl}` rotates with `-i omega (j - l) + i omega k^2 (n^2 - n'^2)`.
//! Mechanical damping acts through the shifted operators `b + kn`, and photon
//! loss couples block `(n+1, n'+1)` to `(n, n')` through `D(k) sigma D(k)^T`.
//!
//! Only blocks with `n >= n'` are stored, grouped into chains of constant
//! `n - n'`; the remaining blocks follow by Hermiticity. All generator terms
//! preserve `n - n'`, so the first three chains already determine the field
//! quadrature variance.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::series::FieldMoments;

use super::density::DensityOperator;
use super::fock::{coherent_amplitudes, coherent_amplitudes_complex, displacement_ladder, thermal_weights};
use super::{check_time, top_count, MechanicalInit, Truncation};

/// Which chains of constant `n - n'` to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSet {
    /// `n - n' in {0, 1, 2}`: enough for quadrature moments.
    Moments,
    /// Every chain: the full reduced field state is available.
    Full,
}

/// Entries below this magnitude in a block with no live feeder are dropped.
const PRUNE_THRESHOLD: f64 = 1e-25;
/// Photon numbers with `|c_n|^2` below this are never populated.
const WEIGHT_CUTOFF: f64 = 1e-32;

#[derive(Debug, Clone, Copy)]
struct BlockInfo {
    delta: usize,
    /// Row photon number `n = n' + delta`.
    n: usize,
    /// Column photon number `n'`.
    n2: usize,
    offset: usize,
    /// Block `(n + 1, n' + 1)` that feeds this one under photon loss.
    next: Option<usize>,
}

/// A real banded matrix with per-row column bounds.
#[derive(Debug, Clone)]
struct Banded {
    d: usize,
    data: Vec<f64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl Banded {
    fn new(m: &DMatrix<f64>, tol: f64) -> Self {
        let d = m.nrows();
        let mut data = vec![0.0; d * d];
        let mut lo = vec![0; d];
        let mut hi = vec![0; d];
        for r in 0..d {
            let mut first = None;
            let mut last = 0;
            for c in 0..d {
                let x = m[(r, c)];
                data[r * d + c] = x;
                if x.abs() > tol {
                    first.get_or_insert(c);
                    last = c;
                }
            }
            lo[r] = first.unwrap_or(0);
            hi[r] = if first.is_some() { last + 1 } else { 0 };
        }
        Banded { d, data, lo, hi }
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.d + c]
    }
}

/// Joint state of field and oscillator in block form.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub np: usize,
    pub nm: usize,
    pub t: f64,
    pub chain_set: ChainSet,
    k: f64,
    omega: f64,
    d: usize,
    blocks: Vec<BlockInfo>,
    data: Vec<Complex64>,
    active: Vec<bool>,
}

impl BlockState {
    /// Coherent field `|alpha>` and the requested oscillator state.
    pub fn initial(
        params: &PhysicalParams,
        np: usize,
        nm: usize,
        mech: MechanicalInit,
        chain_set: ChainSet,
    ) -> Result<BlockState> {
        params.validate()?;
        if np < 2 || nm < 2 {
            return Err(Error::param("truncation", "need Np >= 2 and Nm >= 2"));
        }
        let d = nm + 1;
        let c = coherent_amplitudes(params.alpha, np);
        let top = (0..=np).rev().find(|&n| c[n] * c[n] >= WEIGHT_CUTOFF).unwrap_or(0);
        let max_delta = match chain_set {
            ChainSet::Moments => 2,
            ChainSet::Full => np,
        };

        let mut blocks = Vec::new();
        let mut offset = 0;
        for delta in 0..=max_delta {
            let start = blocks.len();
            for n2 in 0..=np.saturating_sub(delta) {
                let n = n2 + delta;
                if n > top {
                    break;
                }
                blocks.push(BlockInfo {
                    delta,
                    n,
                    n2,
                    offset,
                    next: None,
                });
                offset += d * d;
            }
            let end = blocks.len();
            for i in start..end.saturating_sub(1) {
                blocks[i].next = Some(i + 1);
            }
        }

        // Initial oscillator columns W_n with sigma_{nn'} = c_n c_n' W_n W_n'^dag.
        let ladder = displacement_ladder(-params.k, top, d);
        let cols: Vec<Vec<Complex64>> = match mech {
            MechanicalInit::Vacuum => vec![unit(d, 0)],
            MechanicalInit::Coherent(beta) => {
                vec![coherent_amplitudes_complex(beta, nm)]
            }
            MechanicalInit::Thermal(nbar) => {
                let w = thermal_weights(nbar)?;
                if w.len() > d {
                    return Err(Error::Truncation {
                        tail_mass: w[d..].iter().sum(),
                        threshold: 0.0,
                        context: format!("thermal state needs {} phonon levels, Nm = {nm}", w.len()),
                    });
                }
                w.iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let mut v = unit(d, j);
                        v[j] = Complex64::new(p.sqrt(), 0.0);
                        v
                    })
                    .collect()
            }
        };
        let disp: Vec<Vec<Vec<Complex64>>> = (0..=top)
            .map(|n| {
                let dm = &ladder[n];
                cols.iter()
                    .map(|v| {
                        (0..d)
                            .map(|r| (0..d).map(|q| v[q] * dm[(r, q)]).sum())
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let mut data = vec![Complex64::new(0.0, 0.0); offset];
        for b in &blocks {
            let scale = c[b.n] * c[b.n2];
            let x = &mut data[b.offset..b.offset + d * d];
            for (wa, wb) in disp[b.n].iter().zip(&disp[b.n2]) {
                for j in 0..d {
                    let aj = wa[j] * scale;
                    if aj == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for l in 0..d {
                        x[j * d + l] += aj * wb[l].conj();
                    }
                }
            }
        }
        let active = vec![true; blocks.len()];
        Ok(BlockState {
            np,
            nm,
            t: 0.0,
            chain_set,
            k: params.k,
            omega: params.omega,
            d,
            blocks,
            data,
            active,
        })
    }

    fn block(&self, i: usize) -> &[Complex64] {
        let o = self.blocks[i].offset;
        &self.data[o..o + self.d * self.d]
    }

    fn chain(&self, delta: usize) -> impl Iterator<Item = (usize, &BlockInfo)> {
        self.blocks.iter().enumerate().filter(move |(_, b)| b.delta == delta)
    }

    /// Total trace of the joint state.
    pub fn trace(&self) -> f64 {
        let d = self.d;
        self.chain(0)
            .map(|(i, _)| {
                let x = self.block(i);
                (0..d).map(|j| x[j * d + j].re).sum::<f64>()
            })
            .sum()
    }

    /// Population in the top 10% of photon numbers and of displaced-frame phonon numbers.
    pub fn tail_mass(&self) -> (f64, f64) {
        let d = self.d;
        let f0 = self.np + 1 - top_count(self.np + 1);
        let m0 = d - top_count(d);
        let mut field = 0.0;
        let mut mech = 0.0;
        for (i, b) in self.chain(0) {
            let x = self.block(i);
            let tr: f64 = (0..d).map(|j| x[j * d + j].re).sum();
            if b.n >= f0 {
                field += tr;
            }
            mech += (m0..d).map(|j| x[j * d + j].re).sum::<f64>();
        }
        (field, mech)
    }

    /// `Tr(sigma D)` for a block and a real matrix.
    fn trace_with(&self, i: usize, dm: &DMatrix<f64>) -> Complex64 {
        let d = self.d;
        let x = self.block(i);
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..d {
            for l in 0..d {
                s += x[j * d + l] * dm[(l, j)];
            }
        }
        s
    }

    /// Quadrature moments of the reduced field.
    pub fn field_moments(&self) -> FieldMoments {
        let ladder = displacement_ladder(self.k, 2, self.d);
        let mut m = FieldMoments::default();
        for (i, b) in self.blocks.iter().enumerate() {
            if !self.active[i] {
                continue;
            }
            match b.delta {
                0 => m.mean_n += b.n as f64 * self.trace_with(i, &ladder[0]).re,
                1 => m.mean_a += self.trace_with(i, &ladder[1]) * (b.n as f64).sqrt(),
                2 => m.mean_a2 += self.trace_with(i, &ladder[2]) * ((b.n * (b.n - 1)) as f64).sqrt(),
                _ => {}
            }
        }
        m
    }

    /// Reduced field density operator; requires [`ChainSet::Full`].
    pub fn field_density(&self) -> Result<DensityOperator> {
        if self.chain_set != ChainSet::Full {
            return Err(Error::param("chain_set", "reduced field state needs every chain"));
        }
        let dim = self.np + 1;
        let ladder = displacement_ladder(self.k, self.np, self.d);
        let mut rho = DMatrix::zeros(dim, dim);
        for (i, b) in self.blocks.iter().enumerate() {
            if !self.active[i] {
                continue;
            }
            let z = self.trace_with(i, &ladder[b.delta]);
            rho[(b.n, b.n2)] = z;
            if b.delta > 0 {
                rho[(b.n2, b.n)] = z.conj();
            }
        }
        DensityOperator::new(vec![dim], rho)
    }

    /// Mean phonon number in the laboratory frame.
    pub fn mechanical_number(&self) -> f64 {
        let d = self.d;
        let mut s = 0.0;
        for (i, b) in self.chain(0) {
            let x = self.block(i);
            let u = self.k * b.n as f64;
            let mut tr = 0.0;
            let mut nn = 0.0;
            let mut pos = 0.0;
            for j in 0..d {
                tr += x[j * d + j].re;
                nn += j as f64 * x[j * d + j].re;
                if j > 0 {
                    pos += 2.0 * (x[j * d + j - 1] * (j as f64).sqrt()).re;
                }
            }
            s += nn + u * pos + u * u * tr;
        }
        s
    }

    /// Exact closed evolution by `dt` (no dissipation): pure phases.
    pub fn advance_closed(&mut self, dt: f64) -> Result<()> {
        check_time(dt)?;
        let d = self.d;
        let w = self.omega;
        let k2 = self.k * self.k;
        for b in &self.blocks {
            let x = &mut self.data[b.offset..b.offset + d * d];
            let nn = (b.n * b.n) as f64 - (b.n2 * b.n2) as f64;
            let s = Complex64::from_polar(1.0, w * k2 * nn * dt);
            let f: Vec<Complex64> = (0..d).map(|j| Complex64::from_polar(1.0, -w * j as f64 * dt)).collect();
            for j in 0..d {
                let fj = s * f[j];
                for l in 0..d {
                    x[j * d + l] *= fj * f[l].conj();
                }
            }
        }
        self.t += dt;
        Ok(())
    }
}

fn unit(d: usize, j: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); d];
    v[j] = Complex64::new(1.0, 0.0);
    v
}

/// Lindblad generator split into an elementwise-diagonal part (handled
/// exactly by an integrating factor) and the remaining couplings.
struct Generator {
    d: usize,
    omega: f64,
    k: f64,
    gd: f64,
    gu: f64,
    kappa: f64,
    sq: Vec<f64>,
    dk: Banded,
}

impl Generator {
    fn new(params: &PhysicalParams, d: usize) -> Self {
        let dk = displacement_ladder(params.k, 1, d).pop().expect("ladder has two entries");
        Generator {
            d,
            omega: params.omega,
            k: params.k,
            gd: params.gamma_m * (params.nbar_bath + 1.0),
            gu: params.gamma_m * params.nbar_bath,
            kappa: params.kappa,
            sq: (0..=d).map(|j| (j as f64).sqrt()).collect(),
            dk: Banded::new(&dk, 1e-18),
        }
    }

    /// Integrating factor of the closed dynamics over `h` as (row factors,
    /// column factors, block scalar). It leaves every diagonal entry of a
    /// diagonal block untouched, so the scheme conserves the trace exactly.
    fn factors(&self, b: &BlockInfo, h: f64) -> (Vec<Complex64>, Vec<Complex64>, Complex64) {
        let f: Vec<Complex64> = (0..self.d).map(|j| Complex64::from_polar(1.0, -self.omega * j as f64 * h)).collect();
        let g: Vec<Complex64> = f.iter().map(|z| z.conj()).collect();
        let (n, n2) = (b.n as f64, b.n2 as f64);
        let s = Complex64::from_polar(1.0, self.omega * self.k * self.k * (n * n - n2 * n2) * h);
        (f, g, s)
    }

    /// Largest decay rate of a block, used to bound the step.
    fn block_rate(&self, n: usize, n2: usize, top_phonon: usize) -> f64 {
        let gsum = self.gd + self.gu;
        let u = self.k * n.max(n2) as f64;
        let m = top_phonon as f64 + 1.0;
        0.5 * self.kappa * (n + n2 + 2) as f64 + gsum * (m + 1.0 + 2.0 * u * m.sqrt() + u * u)
    }

    /// Dissipative generator terms of block `b` given the whole state.
    fn apply(&self, b: &BlockInfo, x: &[Complex64], feed: Option<&[Complex64]>, out: &mut [Complex64], tmp: &mut [Complex64]) {
        let d = self.d;
        let sq = &self.sq;
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        if self.gd > 0.0 || self.gu > 0.0 {
            let (gd, gu) = (self.gd, self.gu);
            let u = self.k * b.n as f64;
            let v = self.k * b.n2 as f64;
            let c_bx = gd * (v - 0.5 * u) - gu * 0.5 * u;
            let c_bdx = -gd * 0.5 * u + gu * (v - 0.5 * u);
            let c_xbd = gd * (u - 0.5 * v) - gu * 0.5 * v;
            let c_xb = -gd * 0.5 * v + gu * (u - 0.5 * v);
            let gsum = gd + gu;
            let base = -gu - 0.5 * gsum * (u - v) * (u - v);
            for j in 0..d {
                for l in 0..d {
                    let mut acc = x[j * d + l] * (base - 0.5 * gsum * (j + l) as f64);
                    if j + 1 < d {
                        acc += x[(j + 1) * d + l] * (c_bx * sq[j + 1]);
                        if l + 1 < d {
                            acc += x[(j + 1) * d + l + 1] * (gd * sq[j + 1] * sq[l + 1]);
                        }
                    }
                    if j > 0 {
                        acc += x[(j - 1) * d + l] * (c_bdx * sq[j]);
                        if l > 0 {
                            acc += x[(j - 1) * d + l - 1] * (gu * sq[j] * sq[l]);
                        }
                    }
                    if l + 1 < d {
                        acc += x[j * d + l + 1] * (c_xbd * sq[l + 1]);
                    }
                    if l > 0 {
                        acc += x[j * d + l - 1] * (c_xb * sq[l]);
                    }
                    out[j * d + l] = acc;
                }
            }
        }
        if self.kappa > 0.0 {
            let loss = -0.5 * self.kappa * (b.n + b.n2) as f64;
            for (o, z) in out.iter_mut().zip(x) {
                *o += z * loss;
            }
        }
        if let (Some(y), true) = (feed, self.kappa > 0.0) {
            let rate = self.kappa * (((b.n + 1) * (b.n2 + 1)) as f64).sqrt();
            let dk = &self.dk;
            // tmp = y D^T
            for j in 0..d {
                for l in 0..d {
                    let mut s = Complex64::new(0.0, 0.0);
                    for m in dk.lo[l]..dk.hi[l] {
                        s += y[j * d + m] * dk.get(l, m);
                    }
                    tmp[j * d + l] = s;
                }
            }
            // out += rate D tmp
            for j in 0..d {
                for m in dk.lo[j]..dk.hi[j] {
                    let c = dk.get(j, m) * rate;
                    let row = &tmp[m * d..(m + 1) * d];
                    let o = &mut out[j * d..(j + 1) * d];
                    for l in 0..d {
                        o[l] += row[l] * c;
                    }
                }
            }
        }
    }
}

/// Fixed-step integrating-factor RK4 integrator for one [`BlockState`].
pub(crate) struct Integrator {
    gen: Generator,
    scratch: Vec<Vec<Complex64>>,
}

impl Integrator {
    pub(crate) fn new(params: &PhysicalParams, state: &BlockState) -> Self {
        let n = state.data.len();
        Integrator {
            gen: Generator::new(params, state.d),
            scratch: vec![vec![Complex64::new(0.0, 0.0); n]; 7],
        }
    }

    /// True when the generator has no dissipative part.
    pub(crate) fn is_closed(&self) -> bool {
        self.gen.gd == 0.0 && self.gen.gu == 0.0 && self.gen.kappa == 0.0
    }

    fn rhs(&self, state: &BlockState, y: &[Complex64], out: &mut [Complex64]) {
        let dd = state.d * state.d;
        let mut tmp = vec![Complex64::new(0.0, 0.0); dd];
        for (i, b) in state.blocks.iter().enumerate() {
            let o = b.offset;
            if !state.active[i] {
                out[o..o + dd].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                continue;
            }
            let feed = b.next.filter(|&nx| state.active[nx]).map(|nx| {
                let on = state.blocks[nx].offset;
                &y[on..on + dd]
            });
            self.gen.apply(b, &y[o..o + dd], feed, &mut out[o..o + dd], &mut tmp);
        }
    }

    /// Elementwise integrating factor over `h` for the whole state.
    fn factor_table(&self, state: &BlockState, h: f64, table: &mut [Complex64]) {
        let d = state.d;
        for b in &state.blocks {
            let (f, g, s) = self.gen.factors(b, h);
            let x = &mut table[b.offset..b.offset + d * d];
            for j in 0..d {
                let fj = f[j] * s;
                for l in 0..d {
                    x[j * d + l] = fj * g[l];
                }
            }
        }
    }

    /// Step bound `(accuracy, stability)`: the fastest rate among blocks
    /// carrying weight above `1e-12` and among all live blocks.
    pub(crate) fn rates(&self, state: &BlockState) -> (f64, f64) {
        let d = state.d;
        let mut n_eff = 0;
        let mut m_eff = 0;
        for (i, b) in state.chain(0) {
            if !state.active[i] {
                continue;
            }
            let x = state.block(i);
            let tr: f64 = (0..d).map(|j| x[j * d + j].re).sum();
            if tr >= 1e-12 {
                n_eff = n_eff.max(b.n);
                if let Some(j) = (0..d).rev().find(|&j| x[j * d + j].re >= 1e-12) {
                    m_eff = m_eff.max(j);
                }
            }
        }
        let n_top = state
            .blocks
            .iter()
            .zip(&state.active)
            .filter(|(_, &a)| a)
            .map(|(b, _)| b.n)
            .max()
            .unwrap_or(0);
        (self.gen.block_rate(n_eff, n_eff, m_eff), self.gen.block_rate(n_top, n_top, d - 1))
    }

    /// Advance by `steps` Lawson RK4 steps of size `h`.
    pub(crate) fn advance(&mut self, state: &mut BlockState, h: f64, steps: usize) {
        let mut sc = std::mem::take(&mut self.scratch);
        let [e, k1, k2, k3, k4, a, y] = &mut sc[..] else {
            unreachable!("seven scratch buffers")
        };
        self.factor_table(state, 0.5 * h, e);
        let mul = |x: &mut [Complex64]| x.iter_mut().zip(e.iter()).for_each(|(z, f)| *z *= f);
        for _ in 0..steps {
            self.rhs(state, &state.data, k1);
            mul(k1);
            a.copy_from_slice(&state.data);
            mul(a);
            for ((yi, ai), ki) in y.iter_mut().zip(a.iter()).zip(k1.iter()) {
                *yi = ai + ki * (0.5 * h);
            }
            self.rhs(state, y, k2);
            for ((yi, ai), ki) in y.iter_mut().zip(a.iter()).zip(k2.iter()) {
                *yi = ai + ki * (0.5 * h);
            }
            self.rhs(state, y, k3);
            mul(a);
            for (x, z) in k2.iter_mut().zip(k3.iter()) {
                *x += z;
            }
            mul(k2);
            mul(k3);
            for ((yi, ai), ki) in y.iter_mut().zip(a.iter()).zip(k3.iter()) {
                *yi = ai + ki * h;
            }
            self.rhs(state, y, k4);
            mul(k1);
            for i in 0..state.data.len() {
                state.data[i] = a[i] + (k1[i] + k2[i] * 2.0 + k4[i]) * (h / 6.0);
            }
            state.t += h;
        }
        self.scratch = sc;
    }
}

impl BlockState {
    /// Drop blocks whose entries are negligible and that no longer receive
    /// population from above.
    pub(crate) fn prune(&mut self) {
        let dd = self.d * self.d;
        for i in (0..self.blocks.len()).rev() {
            if !self.active[i] {
                continue;
            }
            let fed = self.blocks[i].next.is_some_and(|nx| self.active[nx]);
            if fed {
                continue;
            }
            let o = self.blocks[i].offset;
            let small = self.data[o..o + dd].iter().all(|z| z.norm() < PRUNE_THRESHOLD);
            if small {
                self.active[i] = false;
                self.data[o..o + dd].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            }
        }
    }

    pub fn active_blocks(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub(crate) fn check_truncation(&self, trunc: &Truncation) -> Result<()> {
        let (f, m) = self.tail_mass();
        trunc.check(f.max(m), "block density operator")
    }
}
