//! The weak Euler scheme: time grids, frozen-coefficient steps in the four
//! stability regimes, and batch simulation.
//!
//! A step is split into drawing the driving noise over a window and applying
//! it with coefficients frozen at the left end. Noise drawn on a fine grid can
//! be summed into coarser windows, which couples all step sizes of a ladder
//! on the same randomness.

use crate::error::{Error, Result};
use crate::levy::LevySampler;
use crate::linalg;
use crate::model::{Model, ModelSpec};
use crate::rng::RngStream;
use crate::stable::{
    default_cut_eps, isotropic_unchecked, scale_to_paper_intensity, AlphaRegime, AnisotropicSampler,
    SmallJumps, SphereFunction, StableLaw,
};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Partition `0 = t_0 < ... < t_n = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    delta: f64,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "a time grid needs at least two nodes starting at 0".into(),
            ));
        }
        let mut delta: f64 = 0.0;
        for w in nodes.windows(2) {
            let h = w[1] - w[0];
            if !(h > 0.0) {
                return Err(Error::InvalidParameter("grid nodes must increase".into()));
            }
            delta = delta.max(h);
        }
        Ok(Self { nodes, delta })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Largest step.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().expect("non-empty grid")
    }

    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }
}

/// `t_i = i T / n`.
pub fn uniform_grid(horizon: f64, n: usize) -> Result<TimeGrid> {
    if n == 0 {
        return Err(Error::InvalidParameter("a grid needs n >= 1 steps".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain {
            name: "horizon",
            value: horizon,
            range: "(0, inf)",
        });
    }
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * horizon / n as f64).collect();
    nodes[n] = horizon;
    TimeGrid::from_nodes(nodes)
}

/// Tuning of the jump samplers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EulerOptions {
    /// Truncation radius of the stable jumps; `dt^{1/alpha}` of the finest
    /// step when absent.
    pub cut_eps: Option<f64>,
    pub small_jumps: SmallJumps,
    /// Use the truncated sampler even where exact sampling is available.
    pub force_truncated: bool,
}

#[derive(Debug, Clone)]
enum StableRoute {
    None,
    /// `h` constant: the jumps of a window sum to `(K dt)^{1/alpha}` times a
    /// unit isotropic draw, then scaled by `h c(y)`.
    Exact { h: f64, k: f64 },
    Truncated(Box<AnisotropicSampler>),
}

/// Driving noise accumulated over a time window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepNoise {
    pub dt: f64,
    /// Brownian increment.
    pub brownian: Vec<f64>,
    /// Increment of the driver with Levy measure `dy / |y|^{d+alpha}` (exact route).
    pub stable: Vec<f64>,
    /// Raw jumps `y` above the cut, `d` values each (truncated route).
    pub raw_jumps: Vec<f64>,
    /// Standard Brownian increment feeding the small-jump replacement.
    pub small_gauss: Vec<f64>,
    /// Sums of `g(v)` over Levy marks outside and inside `U1`.
    pub levy_large: f64,
    pub levy_small: f64,
}

impl StepNoise {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dt: 0.0,
            brownian: vec![0.0; dim],
            stable: vec![0.0; dim],
            raw_jumps: Vec::new(),
            small_gauss: vec![0.0; dim],
            levy_large: 0.0,
            levy_small: 0.0,
        }
    }

    pub fn clear(&mut self) {
        self.dt = 0.0;
        self.brownian.iter_mut().for_each(|v| *v = 0.0);
        self.stable.iter_mut().for_each(|v| *v = 0.0);
        self.small_gauss.iter_mut().for_each(|v| *v = 0.0);
        self.raw_jumps.clear();
        self.levy_large = 0.0;
        self.levy_small = 0.0;
    }

    /// Adds the noise of an adjacent window.
    pub fn absorb(&mut self, other: &StepNoise) {
        self.dt += other.dt;
        for (a, b) in self.brownian.iter_mut().zip(&other.brownian) {
            *a += b;
        }
        for (a, b) in self.stable.iter_mut().zip(&other.stable) {
            *a += b;
        }
        for (a, b) in self.small_gauss.iter_mut().zip(&other.small_gauss) {
            *a += b;
        }
        self.raw_jumps.extend_from_slice(&other.raw_jumps);
        self.levy_large += other.levy_large;
        self.levy_small += other.levy_small;
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    mat: Vec<f64>,
    vec: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            mat: vec![0.0; dim * dim],
            vec: vec![0.0; dim],
        }
    }
}

/// A model prepared for stepping.
#[derive(Debug, Clone)]
pub struct EulerScheme {
    model: Model,
    route: StableRoute,
}

impl EulerScheme {
    /// `base_dt` is the finest step that will be drawn; it sets the default
    /// truncation radius of the stable jumps.
    pub fn new(model: Model, base_dt: f64, options: EulerOptions) -> Result<Self> {
        if !(base_dt > 0.0) {
            return Err(Error::Domain {
                name: "dt",
                value: base_dt,
                range: "(0, inf)",
            });
        }
        let spec = model.spec();
        let alpha = spec.alpha;
        let route = if alpha == 2.0 {
            StableRoute::None
        } else {
            match (&spec.h_alpha, options.force_truncated) {
                (SphereFunction::Constant { value }, false) => StableRoute::Exact {
                    h: *value,
                    k: scale_to_paper_intensity(alpha, spec.dim)?,
                },
                _ => {
                    let cut = options.cut_eps.unwrap_or_else(|| default_cut_eps(base_dt, alpha));
                    let mut law = StableLaw::isotropic(alpha, spec.dim, cut);
                    law.small_jumps = options.small_jumps;
                    StableRoute::Truncated(Box::new(AnisotropicSampler::new(
                        law,
                        spec.h_alpha.clone(),
                    )?))
                }
            }
        };
        Ok(Self { model, route })
    }

    pub fn from_spec(spec: &ModelSpec, base_dt: f64) -> Result<Self> {
        Self::new(Model::new(spec.clone())?, base_dt, EulerOptions::default())
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Whether the stable jumps are drawn exactly (no truncation).
    pub fn is_exact(&self) -> bool {
        !matches!(self.route, StableRoute::Truncated(_))
    }

    /// Draws the noise of a window of length `dt` into `noise`.
    pub fn draw(&self, dt: f64, rng: &mut RngStream, noise: &mut StepNoise) -> Result<()> {
        noise.clear();
        noise.dt = dt;
        let spec = self.model.spec();
        let regime = self.model.regime();
        if regime == AlphaRegime::Gaussian {
            let s = dt.sqrt();
            for v in noise.brownian.iter_mut() {
                *v = s * rng.normal();
            }
        }
        match &self.route {
            StableRoute::None => {}
            StableRoute::Exact { k, .. } => {
                isotropic_unchecked(spec.alpha, rng, &mut noise.stable);
                let s = (k * dt).powf(1.0 / spec.alpha);
                noise.stable.iter_mut().for_each(|v| *v *= s);
            }
            StableRoute::Truncated(sampler) => {
                sampler.draw_raw(dt, regime, rng, &mut noise.raw_jumps)?;
                if sampler.law().small_jumps == SmallJumps::Gaussian {
                    let s = dt.sqrt();
                    for v in noise.small_gauss.iter_mut() {
                        *v = s * rng.normal();
                    }
                }
            }
        }
        if let Some(levy) = self.model.levy() {
            noise.levy_large = levy.draw_large_g(dt, rng);
            noise.levy_small = levy.draw_small_g(dt, rng);
        }
        Ok(())
    }

    /// `out = y + increment` with all coefficients frozen at `y`. Returns
    /// false if the new state is not finite.
    pub fn apply(&self, y: &[f64], noise: &StepNoise, ws: &mut Workspace, out: &mut [f64]) -> bool {
        let spec = self.model.spec();
        let regime = self.model.regime();
        let dt = noise.dt;
        out.copy_from_slice(y);
        if regime != AlphaRegime::Sub1 {
            spec.drift.eval_into(y, &mut ws.vec);
            out.iter_mut().zip(&ws.vec).for_each(|(o, a)| *o += a * dt);
        }
        if regime == AlphaRegime::Gaussian {
            spec.diffusion.eval_into(y, &mut ws.mat);
            linalg::mat_vec_add(&ws.mat, &noise.brownian, out);
        }
        match &self.route {
            StableRoute::None => {}
            StableRoute::Exact { h, .. } => {
                spec.jump_scale.eval_into(y, &mut ws.mat);
                linalg::mat_vec(&ws.mat, &noise.stable, &mut ws.vec);
                out.iter_mut().zip(&ws.vec).for_each(|(o, v)| *o += h * v);
            }
            StableRoute::Truncated(sampler) => {
                spec.jump_scale.eval_into(y, &mut ws.mat);
                sampler.map_jumps(&noise.raw_jumps, &ws.mat, out);
                let comp = sampler.compensator(&ws.mat, dt, regime);
                out.iter_mut().zip(&comp).for_each(|(o, c)| *o += c);
                if sampler.law().small_jumps == SmallJumps::Gaussian {
                    let l = sampler.small_jump_factor(&ws.mat, regime);
                    linalg::mat_vec_add(&l, &noise.small_gauss, out);
                }
            }
        }
        if let Some(levy) = self.model.levy() {
            let s = noise.levy_large + noise.levy_small + levy.small_drift_g(regime) * dt;
            levy.component().direction.eval_into(y, &mut ws.vec);
            out.iter_mut().zip(&ws.vec).for_each(|(o, c)| *o += c * s);
        }
        out.iter().all(|v| v.is_finite())
    }

    /// One Euler step of length `dt` from `y`.
    pub fn step(&self, y: &[f64], dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut noise = StepNoise::zeros(d);
        let mut ws = Workspace::new(d);
        let mut out = vec![0.0; d];
        self.draw(dt, rng, &mut noise)?;
        if !self.apply(y, &noise, &mut ws, &mut out) {
            return Err(Error::NonFinite {
                step: 0,
                stream: rng.stream_id(),
            });
        }
        Ok(out)
    }

    fn simulate_path(&self, grid: &TimeGrid, rng: &mut RngStream, states: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let mut noise = StepNoise::zeros(d);
        let mut ws = Workspace::new(d);
        states[..d].copy_from_slice(&self.model.spec().x0);
        for i in 0..grid.n_steps() {
            self.draw(grid.step(i), rng, &mut noise)?;
            let (done, rest) = states.split_at_mut((i + 1) * d);
            if !self.apply(&done[i * d..], &noise, &mut ws, &mut rest[..d]) {
                return Err(Error::NonFinite {
                    step: i,
                    stream: rng.stream_id(),
                });
            }
        }
        Ok(())
    }

    /// Simulates `n_paths` paths on `grid`; path `p` uses stream `p`.
    pub fn simulate_batch(&self, grid: &TimeGrid, n_paths: usize, master_seed: u64) -> Result<PathBatch> {
        if n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
        }
        let d = self.dim();
        let stride = grid.nodes().len() * d;
        let mut states = vec![0.0; n_paths * stride];
        let results: Vec<Result<()>> = states
            .par_chunks_mut(stride)
            .enumerate()
            .map(|(p, chunk)| {
                let mut rng = RngStream::new(master_seed, p as u64);
                self.simulate_path(grid, &mut rng, chunk)
            })
            .collect();
        results.into_iter().collect::<Result<Vec<()>>>()?;
        Ok(PathBatch {
            dim: d,
            grid: grid.clone(),
            master_seed,
            first_stream: 0,
            states,
        })
    }

    /// Terminal values `f(Y_T)` for every rung of a ladder, all rungs driven by
    /// the same noise drawn on the finest grid. Returns one vector per rung,
    /// indexed by path.
    ///
    /// Every entry of `steps` must divide the largest one.
    pub fn simulate_coupled<F>(
        &self,
        horizon: f64,
        steps: &[usize],
        n_paths: usize,
        master_seed: u64,
        f: F,
    ) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n_fine = *steps.iter().max().ok_or_else(|| Error::InvalidParameter("empty ladder".into()))?;
        if steps.iter().any(|&n| n == 0 || n_fine % n != 0) {
            return Err(Error::InvalidParameter(format!(
                "every rung must divide the finest step count {n_fine}: {steps:?}"
            )));
        }
        if n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
        }
        let d = self.dim();
        let fine_dt = horizon / n_fine as f64;
        let ratios: Vec<usize> = steps.iter().map(|n| n_fine / n).collect();
        let x0 = self.model.spec().x0.clone();
        let per_path: Vec<Result<Vec<f64>>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = RngStream::new(master_seed, p as u64);
                let mut fine = StepNoise::zeros(d);
                let mut acc: Vec<StepNoise> = steps.iter().map(|_| StepNoise::zeros(d)).collect();
                let mut state: Vec<Vec<f64>> = steps.iter().map(|_| x0.clone()).collect();
                let mut next = vec![0.0; d];
                let mut ws = Workspace::new(d);
                for j in 0..n_fine {
                    self.draw(fine_dt, &mut rng, &mut fine)?;
                    for l in 0..steps.len() {
                        let noise = if ratios[l] == 1 {
                            &fine
                        } else {
                            acc[l].absorb(&fine);
                            if (j + 1) % ratios[l] != 0 {
                                continue;
                            }
                            &acc[l]
                        };
                        if !self.apply(&state[l], noise, &mut ws, &mut next) {
                            return Err(Error::NonFinite {
                                step: j / ratios[l],
                                stream: p as u64,
                            });
                        }
                        state[l].copy_from_slice(&next);
                        if ratios[l] != 1 {
                            acc[l].clear();
                        }
                    }
                }
                Ok(state.iter().map(|s| f(s)).collect())
            })
            .collect();
        let mut out = vec![Vec::with_capacity(n_paths); steps.len()];
        for r in per_path {
            for (l, v) in r?.into_iter().enumerate() {
                out[l].push(v);
            }
        }
        Ok(out)
    }
}

/// One Euler step of `spec` with the default samplers for step `dt`.
pub fn euler_step(spec: &ModelSpec, y: &[f64], dt: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt <= spec.horizon) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            range: "(0, horizon]",
        });
    }
    EulerScheme::from_spec(spec, dt)?.step(y, dt, rng)
}

/// Simulates `n_paths` Euler paths of `spec` on `grid`.
pub fn simulate_batch(spec: &ModelSpec, grid: &TimeGrid, n_paths: usize, master_seed: u64) -> Result<PathBatch> {
    EulerScheme::from_spec(spec, grid.delta())?.simulate_batch(grid, n_paths, master_seed)
}

/// Runs `f` on a dedicated pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Simulated grid-point states of many paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    dim: usize,
    grid: TimeGrid,
    master_seed: u64,
    first_stream: u64,
    /// `n_paths x n_nodes x dim`, path-major.
    states: Vec<f64>,
}

const BATCH_MAGIC: &[u8; 8] = b"SWEPB\0\0\x01";

impl PathBatch {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Stream id of path `p`.
    pub fn stream_id(&self, p: usize) -> u64 {
        self.first_stream + p as u64
    }

    pub fn n_paths(&self) -> usize {
        self.states.len() / (self.grid.nodes().len() * self.dim)
    }

    pub fn state(&self, path: usize, node: usize) -> &[f64] {
        let n = self.grid.nodes().len();
        let start = (path * n + node) * self.dim;
        &self.states[start..start + self.dim]
    }

    pub fn terminal(&self, path: usize) -> &[f64] {
        self.state(path, self.grid.n_steps())
    }

    /// Little-endian layout: magic, dim (u32), reserved (u32), n_paths,
    /// n_nodes, master_seed, first_stream (u64 each), the nodes, then the
    /// states path by path.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BATCH_MAGIC)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        w.write_u32::<LittleEndian>(0)?;
        w.write_u64::<LittleEndian>(self.n_paths() as u64)?;
        w.write_u64::<LittleEndian>(self.grid.nodes().len() as u64)?;
        w.write_u64::<LittleEndian>(self.master_seed)?;
        w.write_u64::<LittleEndian>(self.first_stream)?;
        for t in self.grid.nodes() {
            w.write_f64::<LittleEndian>(*t)?;
        }
        for v in &self.states {
            w.write_f64::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BATCH_MAGIC {
            return Err(Error::Format("not a path batch file".into()));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let _reserved = r.read_u32::<LittleEndian>()?;
        let n_paths = r.read_u64::<LittleEndian>()? as usize;
        let n_nodes = r.read_u64::<LittleEndian>()? as usize;
        let master_seed = r.read_u64::<LittleEndian>()?;
        let first_stream = r.read_u64::<LittleEndian>()?;
        if dim == 0 || n_nodes < 2 {
            return Err(Error::Format(format!("bad header: dim {dim}, nodes {n_nodes}")));
        }
        let mut nodes = vec![0.0; n_nodes];
        r.read_f64_into::<LittleEndian>(&mut nodes)?;
        let len = n_paths
            .checked_mul(n_nodes)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::Format("state count overflows".into()))?;
        let mut states = vec![0.0; len];
        r.read_f64_into::<LittleEndian>(&mut states)?;
        Ok(Self {
            dim,
            grid: TimeGrid::from_nodes(nodes)?,
            master_seed,
            first_stream,
            states,
        })
    }

    /// CSV of the terminal states: `path,x1,...,xd`.
    pub fn write_terminal_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        for p in 0..self.n_paths() {
            let mut row = vec![self.stream_id(p).to_string()];
            row.extend(self.terminal(p).iter().map(|v| format!("{v:e}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Sampler for the Levy component of a model, exposed for diagnostics.
pub fn levy_sampler(scheme: &EulerScheme) -> Option<&LevySampler> {
    scheme.model.levy()
}
