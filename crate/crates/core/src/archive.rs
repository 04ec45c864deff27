//! Posterior draws plus run metadata, and their binary file format.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "DJLARCH\0" | version u32
//! dims: nodes, layers, attrs, times, shared_rank, layer_rank (u64 each)
//! config block | time grid | node ids | run_info | monitors
//! draw count u64, then per draw: chain u32, μ, η, ζ, ξ, α, [ξ_attr], σ², β pairs
//! ```
//!
//! Wall-clock time is kept in memory only, so reruns with one seed write
//! identical bytes.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{KernelParams, TimeGrid};
use crate::model::{Dims, Family, FamilyParams, Latents, ModelConfig};

const MAGIC: &[u8; 8] = b"DJLARCH\0";
pub const ARCHIVE_VERSION: u32 = 1;

/// Run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub seed: u64,
    /// Sweeps executed per chain, burn-in included.
    pub sweeps: usize,
    pub chains: usize,
    /// Not persisted.
    pub wall_seconds: f64,
}

/// Effective sample size of one monitored scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorStat {
    pub name: String,
    pub ess: f64,
    pub draws: usize,
}

/// Ordered post-burn-in draws (ω excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorArchive {
    pub config: ModelConfig,
    pub grid: TimeGrid,
    pub dims: Dims,
    pub draws: Vec<Latents>,
    /// Chain of origin per draw.
    pub chain_labels: Vec<u32>,
    /// External node ids by dense index; empty when unknown.
    pub node_ids: Vec<String>,
    pub run_info: RunInfo,
    pub monitors: Vec<MonitorStat>,
}

impl PosteriorArchive {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn is_joint(&self) -> bool {
        self.config.joint_mode
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        self.write_to(&mut bytes);
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        f.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        PosteriorArchive::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out);
        out
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        let w = &mut Writer(out);
        w.bytes(MAGIC);
        w.u32(ARCHIVE_VERSION);
        let d = &self.dims;
        for v in [d.nodes, d.layers, d.attrs, d.times, d.shared_rank, d.layer_rank] {
            w.usize(v);
        }

        let c = &self.config;
        w.usize(c.shared_rank);
        w.usize(c.layer_rank);
        w.usize(c.depth);
        w.usize(c.hyper_grid.len());
        for &(b, g) in &c.hyper_grid {
            w.f64(b);
            w.f64(g);
        }
        w.f64(c.initial_beta.0);
        w.f64(c.initial_beta.1);
        w.f64(c.a_sigma);
        w.f64(c.b_sigma);
        w.f64(c.jitter);
        w.usize(c.burn_in);
        w.usize(c.keep);
        w.usize(c.thin);
        w.u64(c.seed);
        w.u8(c.joint_mode as u8);

        w.usize(self.grid.len());
        for &t in self.grid.times() {
            w.f64(t);
        }
        w.usize(self.node_ids.len());
        for id in &self.node_ids {
            w.string(id);
        }
        w.u64(self.run_info.seed);
        w.usize(self.run_info.sweeps);
        w.usize(self.run_info.chains);
        w.usize(self.monitors.len());
        for m in &self.monitors {
            w.string(&m.name);
            w.f64(m.ess);
            w.usize(m.draws);
        }

        w.usize(self.draws.len());
        for (draw, &chain) in self.draws.iter().zip(&self.chain_labels) {
            w.u32(chain);
            for f in Family::ALL {
                if let Some(v) = draw.family(f) {
                    v.iter().for_each(|x| w.f64(*x));
                }
            }
            draw.sigma2.iter().for_each(|x| w.f64(*x));
            for f in Family::ALL {
                if let Some(p) = draw.betas.get(f) {
                    w.f64(p.sigma_bias_sq);
                    w.f64(p.sigma_weight_sq);
                }
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let r = &mut Reader { bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            return Err(Error::Version("not an archive (bad magic bytes)".into()));
        }
        let version = r.u32()?;
        if version != ARCHIVE_VERSION {
            return Err(Error::Version(format!(
                "archive version {version}, expected {ARCHIVE_VERSION}"
            )));
        }
        let dims = Dims {
            nodes: r.usize()?,
            layers: r.usize()?,
            attrs: r.usize()?,
            times: r.usize()?,
            shared_rank: r.usize()?,
            layer_rank: r.usize()?,
        };

        let shared_rank = r.usize()?;
        let layer_rank = r.usize()?;
        let depth = r.usize()?;
        let n_grid = r.count(16)?;
        let mut hyper_grid = Vec::with_capacity(n_grid);
        for _ in 0..n_grid {
            hyper_grid.push((r.f64()?, r.f64()?));
        }
        let config = ModelConfig {
            shared_rank,
            layer_rank,
            depth,
            hyper_grid,
            initial_beta: (r.f64()?, r.f64()?),
            a_sigma: r.f64()?,
            b_sigma: r.f64()?,
            jitter: r.f64()?,
            burn_in: r.usize()?,
            keep: r.usize()?,
            thin: r.usize()?,
            seed: r.u64()?,
            joint_mode: r.u8()? != 0,
        };

        let n_times = r.count(8)?;
        let mut times = Vec::with_capacity(n_times);
        for _ in 0..n_times {
            times.push(r.f64()?);
        }
        let grid = TimeGrid::new(times).map_err(|e| Error::Version(format!("bad time grid: {e}")))?;
        if grid.len() != dims.times {
            return Err(Error::Version("grid length disagrees with dimension block".into()));
        }
        let n_ids = r.count(8)?;
        let mut node_ids = Vec::with_capacity(n_ids);
        for _ in 0..n_ids {
            node_ids.push(r.string()?);
        }
        let run_info = RunInfo {
            seed: r.u64()?,
            sweeps: r.usize()?,
            chains: r.usize()?,
            wall_seconds: 0.0,
        };
        let n_mon = r.count(24)?;
        let mut monitors = Vec::with_capacity(n_mon);
        for _ in 0..n_mon {
            monitors.push(MonitorStat {
                name: r.string()?,
                ess: r.f64()?,
                draws: r.usize()?,
            });
        }

        let n_draws = r.count(4)?;
        let mut draws = Vec::with_capacity(n_draws);
        let mut chain_labels = Vec::with_capacity(n_draws);
        let placeholder = KernelParams {
            sigma_bias_sq: 1.0,
            sigma_weight_sq: 1.0,
            depth,
        };
        for _ in 0..n_draws {
            chain_labels.push(r.u32()?);
            let mut lat = Latents::zeros(dims, config.joint_mode, placeholder);
            for f in Family::ALL {
                if let Some(v) = lat.family_mut(f) {
                    for x in v.iter_mut() {
                        *x = r.f64()?;
                    }
                }
            }
            for x in lat.sigma2.iter_mut() {
                *x = r.f64()?;
            }
            let mut betas: FamilyParams = lat.betas;
            for f in Family::ALL {
                if betas.get(f).is_some() {
                    let p = KernelParams {
                        sigma_bias_sq: r.f64()?,
                        sigma_weight_sq: r.f64()?,
                        depth,
                    };
                    betas.set(f, p);
                }
            }
            lat.betas = betas;
            draws.push(lat);
        }
        if r.pos != bytes.len() {
            return Err(Error::Version(format!(
                "{} trailing bytes after the last draw",
                bytes.len() - r.pos
            )));
        }
        Ok(PosteriorArchive {
            config,
            grid,
            dims,
            draws,
            chain_labels,
            node_ids,
            run_info,
            monitors,
        })
    }
}

struct Writer<'a>(&'a mut Vec<u8>);

impl Writer<'_> {
    fn bytes(&mut self, b: &[u8]) {
        self.0.write_all(b).expect("writing to a Vec cannot fail");
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn string(&mut self, s: &str) {
        self.usize(s.len());
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Version(format!("archive truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Version("size field overflows".into()))
    }
    /// Element count whose elements take at least `min_bytes` each; guards
    /// allocations against corrupt headers.
    fn count(&mut self, min_bytes: usize) -> Result<usize> {
        let n = self.usize()?;
        let remaining = self.bytes.len() - self.pos;
        if n.saturating_mul(min_bytes) > remaining {
            return Err(Error::Version(format!("count {n} exceeds remaining archive size")));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Version("node id is not valid UTF-8".into()))
    }
}
