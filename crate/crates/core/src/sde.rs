//! Monte Carlo integration of the abundance and patch-fraction SDEs.
//!
//! Replicate `r` draws its normals from a ChaCha8 stream selected by
//! `(seed, r)`, and replicate results are reduced in index order, so
//! estimates do not depend on the number of worker threads.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{GrowthEstimate, Method};
use crate::linalg::{self, expm, Matrix};
use crate::model::{validate_dispersal, DispersalMatrix, Landscape, PatchDistribution};
use crate::scalar::Scalar;

/// Largest per-step projection shift tolerated by the fraction scheme.
pub const MAX_PROJECTION_SHIFT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Euler–Maruyama on log abundances, dispersal applied by its exact
    /// propagator over each step.
    #[default]
    LogAbundance,
    /// Euler–Maruyama on the patch fractions with clip-and-renormalize
    /// projection.
    Fraction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub burn_in: T,
    pub replicates: usize,
    /// Batch-means segments per replicate.
    pub segments: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Worker threads; `None` uses the global rayon pool. Never affects
    /// results.
    pub threads: Option<usize>,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            horizon: T::lit(2000.0),
            burn_in: T::lit(100.0),
            replicates: 16,
            segments: 20,
            seed: 0,
            scheme: Scheme::LogAbundance,
            threads: None,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.burn_in >= T::zero()) || !(self.burn_in < self.horizon) || !self.horizon.is_finite() {
            return bad("need 0 <= burn_in < horizon");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.segments == 0 {
            return bad("segments must be at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        let (_, measured) = self.step_counts();
        if measured < self.segments {
            return bad("fewer measured steps than segments");
        }
        Ok(())
    }

    /// `(burn-in steps, measured steps)`.
    pub fn step_counts(&self) -> (usize, usize) {
        let total = (self.horizon / self.dt).round().to_usize().unwrap_or(0);
        let burn = (self.burn_in / self.dt).round().to_usize().unwrap_or(0).min(total);
        (burn, total - burn)
    }

    fn segment_bounds(&self) -> Vec<usize> {
        let (_, m) = self.step_counts();
        (0..=self.segments).map(|k| k * m / self.segments).collect()
    }

    fn run<R: Send>(&self, job: impl Fn(usize) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
        let go = || (0..self.replicates).into_par_iter().map(&job).collect();
        match self.threads {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
                .install(go),
            None => go(),
        }
    }
}

/// The movement generator `D` used by a simulation, possibly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Dispersal<T> {
    d: Matrix<T>,
    pi: Option<PatchDistribution<T>>,
}

impl<T: Scalar> Dispersal<T> {
    /// No movement between `n` patches.
    pub fn none(n: usize) -> Self {
        Self {
            d: Matrix::zeros(n, n),
            pi: None,
        }
    }

    /// `D = δ Q`; `δ = 0` gives no movement.
    pub fn scaled(q: &DispersalMatrix<T>, delta: T) -> Result<Self> {
        if !(delta >= T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("dispersal scale {delta} must be >= 0")));
        }
        if delta == T::zero() {
            return Ok(Self::none(q.n()));
        }
        Ok(Self {
            d: q.scaled(delta),
            pi: Some(q.pi().clone()),
        })
    }

    /// Arbitrary generator (nonnegative off-diagonals, zero row sums);
    /// need not be irreducible.
    pub fn from_generator(d: Matrix<T>) -> Result<Self> {
        match validate_dispersal(d.clone()) {
            Ok(q) => Ok(Self {
                d: q.q().clone(),
                pi: Some(q.pi().clone()),
            }),
            Err(Error::Reducible { .. }) => Ok(Self { d, pi: None }),
            Err(e) => Err(e),
        }
    }

    pub fn generator(&self) -> &Matrix<T> {
        &self.d
    }

    pub fn is_none(&self) -> bool {
        self.d.max_abs() == T::zero()
    }

    pub fn stationary(&self) -> Option<&PatchDistribution<T>> {
        self.pi.as_ref()
    }

    fn initial(&self) -> Vec<T> {
        match &self.pi {
            Some(pi) => pi.as_slice().to_vec(),
            None => PatchDistribution::uniform(self.d.nrows()).into_vec(),
        }
    }
}

fn check_dims<T: Scalar>(landscape: &Landscape<T>, d: &Dispersal<T>) -> Result<()> {
    if d.d.nrows() != landscape.n() {
        return Err(Error::DimensionMismatch(format!(
            "landscape has {} patches, dispersal has {}",
            landscape.n(),
            d.d.nrows()
        )));
    }
    Ok(())
}

/// One replicate's integrator state.
struct Stepper<'a, T> {
    landscape: &'a Landscape<T>,
    scheme: Scheme,
    dt: T,
    sqrt_dt: T,
    /// `exp(D dt)`, only for the log scheme with movement.
    propagator: Option<Matrix<T>>,
    generator: &'a Matrix<T>,
    drift: Vec<T>,
    rng: ChaCha8Rng,
    h: Vec<T>,
    offset: T,
    y: Vec<T>,
    log_s: T,
    time: T,
    z: Vec<T>,
    de: Vec<T>,
    x: Vec<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    fn new(landscape: &'a Landscape<T>, d: &'a Dispersal<T>, cfg: &SimConfig<T>, replicate: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(replicate as u64);
        let n = landscape.n();
        let y = d.initial();
        let drift = match cfg.scheme {
            Scheme::LogAbundance => landscape.isolated_rates(),
            Scheme::Fraction => landscape.mu().to_vec(),
        };
        let propagator = match cfg.scheme {
            Scheme::LogAbundance if !d.is_none() => Some(expm(&d.d.scale(cfg.dt))),
            _ => None,
        };
        Self {
            landscape,
            scheme: cfg.scheme,
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            propagator,
            generator: &d.d,
            drift,
            rng,
            h: y.iter().map(|v| v.ln()).collect(),
            offset: T::zero(),
            y,
            log_s: T::zero(),
            time: T::zero(),
            z: vec![T::zero(); n],
            de: vec![T::zero(); n],
            x: vec![T::zero(); n],
        }
    }

    fn draw_noise(&mut self) {
        for z in &mut self.z {
            let v: f64 = StandardNormal.sample(&mut self.rng);
            *z = T::lit(v);
        }
        let l = self.landscape.noise_factor();
        for i in 0..self.z.len() {
            let row = &l.row(i)[..=i];
            self.de[i] = linalg::dot(row, &self.z[..=i]) * self.sqrt_dt;
        }
    }

    fn step(&mut self) -> Result<()> {
        self.draw_noise();
        match self.scheme {
            Scheme::LogAbundance => self.step_log(),
            Scheme::Fraction => self.step_fraction()?,
        }
        self.time += self.dt;
        if !self.log_s.is_finite() {
            return Err(Error::NonFinite(format!("log total abundance at t = {}", self.time)));
        }
        Ok(())
    }

    fn step_log(&mut self) {
        let n = self.h.len();
        for i in 0..n {
            self.h[i] += self.drift[i] * self.dt + self.de[i];
        }
        let m = self.h.iter().copied().fold(T::neg_infinity(), T::max);
        for i in 0..n {
            self.x[i] = (self.h[i] - m).exp();
        }
        self.offset += m;
        if let Some(p) = &self.propagator {
            let moved = p.tr_mul_vec(&self.x);
            self.x.copy_from_slice(&moved);
            for i in 0..n {
                self.h[i] = self.x[i].ln();
            }
        } else {
            for h in &mut self.h {
                *h -= m;
            }
        }
        let s: T = self.x.iter().copied().sum();
        self.log_s = self.offset + s.ln();
        for i in 0..n {
            self.y[i] = self.x[i] / s;
        }
    }

    fn step_fraction(&mut self) -> Result<()> {
        let n = self.y.len();
        let sigma = self.landscape.sigma();
        let sy = sigma.mul_vec(&self.y);
        let mean_g = linalg::dot(&self.drift, &self.y) - linalg::dot(&self.y, &sy);
        let y_de = linalg::dot(&self.y, &self.de);
        let flow = self.generator.tr_mul_vec(&self.y);
        self.log_s += (linalg::dot(&self.drift, &self.y) - linalg::dot(&self.y, &sy) / T::lit(2.0))
            * self.dt
            + y_de;
        for i in 0..n {
            let g = self.drift[i] - sy[i];
            self.x[i] = self.y[i]
                + (self.y[i] * (g - mean_g) + flow[i]) * self.dt
                + self.y[i] * (self.de[i] - y_de);
        }
        let s: T = self.x.iter().map(|&v| v.max(T::zero())).sum();
        if !(s > T::zero()) {
            return Err(Error::StepTooLarge {
                time: self.time.as_f64(),
                shift: f64::INFINITY,
            });
        }
        let mut shift = T::zero();
        for i in 0..n {
            let p = self.x[i].max(T::zero()) / s;
            shift = shift.max((p - self.x[i]).abs());
            self.y[i] = p;
        }
        if shift > T::lit(MAX_PROJECTION_SHIFT) {
            return Err(Error::StepTooLarge {
                time: self.time.as_f64(),
                shift: shift.as_f64(),
            });
        }
        Ok(())
    }
}

/// Sampled trajectory of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath<T> {
    pub times: Vec<T>,
    pub log_s: Vec<T>,
    pub y: Vec<Vec<T>>,
}

impl<T: Scalar> SamplePath<T> {
    /// CSV with header `t,logS,y1,...,yn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.y.first().map_or(0, Vec::len);
        let mut header = String::from("t,logS");
        for i in 1..=n {
            header.push_str(&format!(",y{i}"));
        }
        writeln!(w, "{header}")?;
        for ((t, ls), y) in self.times.iter().zip(&self.log_s).zip(&self.y) {
            write!(w, "{t},{ls}")?;
            for v in y {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrates replicate `replicate` over the full horizon, keeping every
/// `stride`-th state (including the initial one).
pub fn simulate_path<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
    replicate: usize,
    stride: usize,
) -> Result<SamplePath<T>> {
    cfg.validate()?;
    check_dims(landscape, d)?;
    let stride = stride.max(1);
    let (burn, measured) = cfg.step_counts();
    let mut st = Stepper::new(landscape, d, cfg, replicate);
    let mut path = SamplePath {
        times: vec![st.time],
        log_s: vec![st.log_s],
        y: vec![st.y.clone()],
    };
    for k in 1..=burn + measured {
        st.step()?;
        if k % stride == 0 {
            path.times.push(st.time);
            path.log_s.push(st.log_s);
            path.y.push(st.y.clone());
        }
    }
    Ok(path)
}

/// Path of the log-abundance scheme, regardless of `cfg.scheme`.
pub fn simulate_log_abundances<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
    stride: usize,
) -> Result<SamplePath<T>> {
    let cfg = SimConfig {
        scheme: Scheme::LogAbundance,
        ..cfg.clone()
    };
    simulate_path(landscape, d, &cfg, 0, stride)
}

/// Path of the fraction scheme, regardless of `cfg.scheme`.
pub fn simulate_fractions<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
    stride: usize,
) -> Result<SamplePath<T>> {
    let cfg = SimConfig {
        scheme: Scheme::Fraction,
        ..cfg.clone()
    };
    simulate_path(landscape, d, &cfg, 0, stride)
}

/// Per-segment batch of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub duration: T,
    pub log_s_increment: T,
    /// Time-average of `Y` over the segment.
    pub mean: Vec<T>,
    /// Time-average of `Y Y^T` (empty when not requested).
    pub second: Option<Matrix<T>>,
}

impl<T: Scalar> Batch<T> {
    pub fn slope(&self) -> T {
        self.log_s_increment / self.duration
    }
}

/// Batches of every replicate, in replicate then segment order.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationRecord<T> {
    pub replicates: Vec<Vec<Batch<T>>>,
}

impl<T: Scalar> SimulationRecord<T> {
    pub fn batches(&self) -> impl Iterator<Item = &Batch<T>> {
        self.replicates.iter().flatten()
    }

    /// Replicate-averaged slope of `log S` after burn-in, with a
    /// batch-means standard error over all segments.
    pub fn chi_estimate(&self) -> GrowthEstimate<T> {
        let per_rep: Vec<T> = self
            .replicates
            .iter()
            .map(|bs| {
                let inc: T = bs.iter().map(|b| b.log_s_increment).sum();
                let dur: T = bs.iter().map(|b| b.duration).sum();
                inc / dur
            })
            .collect();
        let slopes: Vec<T> = self.batches().map(Batch::slope).collect();
        GrowthEstimate {
            chi: mean(&per_rep),
            std_error: std_error(&slopes),
            method: Method::McLogS,
            segments: slopes.len(),
        }
    }

    pub fn moments(&self) -> OccupationMoments<T> {
        let batches: Vec<&Batch<T>> = self.batches().collect();
        let n = batches.first().map_or(0, |b| b.mean.len());
        let total: T = batches.iter().map(|b| b.duration).sum();
        let mut m = vec![T::zero(); n];
        let mut second = batches[0].second.as_ref().map(|_| Matrix::zeros(n, n));
        for b in &batches {
            let w = b.duration / total;
            for i in 0..n {
                m[i] += w * b.mean[i];
            }
            if let (Some(acc), Some(s)) = (second.as_mut(), b.second.as_ref()) {
                *acc = acc.add(&s.scale(w));
            }
        }
        OccupationMoments {
            mean: m,
            second,
            sample_time: total,
            batches: batches.into_iter().cloned().collect(),
        }
    }
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::count(xs.len())
}

/// `sd(xs) / sqrt(len)`; zero for fewer than two values.
pub fn std_error<T: Scalar>(xs: &[T]) -> T {
    let k = xs.len();
    if k < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::count(k - 1);
    (var / T::count(k)).sqrt()
}

fn run_replicate<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
    replicate: usize,
    want_second: bool,
) -> Result<Vec<Batch<T>>> {
    let n = landscape.n();
    let (burn, _) = cfg.step_counts();
    let bounds = cfg.segment_bounds();
    let mut st = Stepper::new(landscape, d, cfg, replicate);
    for _ in 0..burn {
        st.step()?;
    }
    let mut out = Vec::with_capacity(cfg.segments);
    for w in bounds.windows(2) {
        let steps = w[1] - w[0];
        let start = st.log_s;
        let mut sum_y = vec![T::zero(); n];
        let mut sum_yy = want_second.then(|| vec![T::zero(); n * n]);
        for _ in 0..steps {
            st.step()?;
            for i in 0..n {
                sum_y[i] += st.y[i];
            }
            if let Some(acc) = sum_yy.as_mut() {
                for i in 0..n {
                    let yi = st.y[i];
                    for j in i..n {
                        acc[i * n + j] += yi * st.y[j];
                    }
                }
            }
        }
        let k = T::count(steps);
        out.push(Batch {
            duration: k * cfg.dt,
            log_s_increment: st.log_s - start,
            mean: sum_y.into_iter().map(|v| v / k).collect(),
            second: sum_yy.map(|acc| {
                Matrix::from_fn(n, n, |i, j| {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    acc[a * n + b] / k
                })
            }),
        });
    }
    Ok(out)
}

/// Runs all replicates and keeps per-segment batches. Second moments are
/// accumulated only when `want_second` is set.
pub fn simulate_record<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
    want_second: bool,
) -> Result<SimulationRecord<T>> {
    cfg.validate()?;
    check_dims(landscape, d)?;
    let replicates = cfg.run(|r| run_replicate(landscape, d, cfg, r, want_second))?;
    Ok(SimulationRecord { replicates })
}

pub fn estimate_chi_mc<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
) -> Result<GrowthEstimate<T>> {
    Ok(simulate_record(landscape, d, cfg, false)?.chi_estimate())
}

/// Time averages of `Y` and `Y Y^T` after burn-in, pooled over replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationMoments<T> {
    pub mean: Vec<T>,
    pub second: Option<Matrix<T>>,
    pub sample_time: T,
    pub batches: Vec<Batch<T>>,
}

impl<T: Scalar> OccupationMoments<T> {
    /// Batch-means standard error of each entry of `mean`.
    pub fn mean_std_error(&self) -> Vec<T> {
        (0..self.mean.len())
            .map(|i| std_error(&self.batches.iter().map(|b| b.mean[i]).collect::<Vec<_>>()))
            .collect()
    }

    /// Batch means and standard error of `E[Y_i Y_j]`.
    pub fn second_entry(&self, i: usize, j: usize) -> Option<(T, T)> {
        let s = self.second.as_ref()?;
        let vals: Vec<T> = self
            .batches
            .iter()
            .filter_map(|b| b.second.as_ref().map(|m| m[(i, j)]))
            .collect();
        Some((s[(i, j)], std_error(&vals)))
    }
}

pub fn occupation_moments<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
) -> Result<OccupationMoments<T>> {
    if d.is_none() && landscape.n() > 1 {
        return Err(Error::DegenerateNoDispersal);
    }
    Ok(simulate_record(landscape, d, cfg, true)?.moments())
}

/// `μ^T E[Y] − ½ Tr(E[Y Y^T] Σ)`, with a standard error from the same
/// plug-in applied to each batch.
pub fn chi_from_moments<T: Scalar>(
    landscape: &Landscape<T>,
    moments: &OccupationMoments<T>,
) -> Result<GrowthEstimate<T>> {
    let plug = |m: &[T], s: &Matrix<T>| -> T {
        let sigma = landscape.sigma();
        let tr: T = (0..m.len())
            .flat_map(|i| (0..m.len()).map(move |j| (i, j)))
            .map(|(i, j)| s[(i, j)] * sigma[(j, i)])
            .sum();
        linalg::dot(landscape.mu(), m) - tr / T::lit(2.0)
    };
    let second = moments
        .second
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("moments were recorded without E[YY^T]".into()))?;
    if second.nrows() != landscape.n() {
        return Err(Error::DimensionMismatch("moments do not match landscape".into()));
    }
    let per_batch: Vec<T> = moments
        .batches
        .iter()
        .filter_map(|b| b.second.as_ref().map(|s| plug(&b.mean, s)))
        .collect();
    Ok(GrowthEstimate {
        chi: plug(&moments.mean, second),
        std_error: std_error(&per_batch),
        method: Method::McMoments,
        segments: per_batch.len(),
    })
}

/// Both estimators from the same simulated paths.
pub fn paired_estimates<T: Scalar>(
    landscape: &Landscape<T>,
    d: &Dispersal<T>,
    cfg: &SimConfig<T>,
) -> Result<(GrowthEstimate<T>, GrowthEstimate<T>, OccupationMoments<T>)> {
    let rec = simulate_record(landscape, d, cfg, true)?;
    let moments = rec.moments();
    let from_moments = chi_from_moments(landscape, &moments)?;
    Ok((rec.chi_estimate(), from_moments, moments))
}
