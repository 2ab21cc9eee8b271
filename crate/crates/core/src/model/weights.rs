//! Named-tensor weight container.
//!
//! File layout: a UTF-8 text manifest terminated by the line `end`, followed
//! by the little-endian `f32` payload of every tensor in manifest order.
//!
//! ```text
//! CABINSEP-WEIGHTS 1
//! fingerprint zones=4;n_full_sub=1;...
//! seed 7
//! tensor enc.spec.conv1.weight f32 8,8,3,3
//! ...
//! end
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};

const MAGIC: &str = "CABINSEP-WEIGHTS 1";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl WeightTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::WeightShape(format!(
                "shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// How a parameter is drawn by [`init_random`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    Uniform {
        fan_in: usize,
    },
    Ones,
    Zeros,
}

#[derive(Debug, Clone)]
pub(crate) struct ParamSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    tensors: BTreeMap<String, WeightTensor>,
    fingerprint: String,
    seed: Option<u64>,
}

impl ModelWeights {
    pub fn new(fingerprint: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            tensors: BTreeMap::new(),
            fingerprint: fingerprint.into(),
            seed,
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn insert(&mut self, path: impl Into<String>, t: WeightTensor) {
        self.tensors.insert(path.into(), t);
    }

    pub fn get(&self, path: &str) -> Result<&WeightTensor> {
        self.tensors
            .get(path)
            .ok_or_else(|| Error::WeightShape(format!("missing tensor {path}")))
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut WeightTensor> {
        self.tensors.get_mut(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &WeightTensor)> {
        self.tensors.iter()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.values().map(WeightTensor::len).sum()
    }

    /// Every layer required by `cfg` present with exactly its shape, no extras.
    pub fn check_against(&self, cfg: &ModelConfig) -> Result<()> {
        if self.fingerprint != cfg.fingerprint() {
            return Err(Error::WeightShape(format!(
                "weights built for [{}], config is [{}]",
                self.fingerprint,
                cfg.fingerprint()
            )));
        }
        let specs = super::param_specs(cfg);
        for spec in &specs {
            let t = self.get(&spec.path)?;
            if t.shape != spec.shape {
                return Err(Error::WeightShape(format!(
                    "{} has shape {:?}, expected {:?}",
                    spec.path, t.shape, spec.shape
                )));
            }
        }
        if self.tensors.len() != specs.len() {
            let extra: Vec<_> = self
                .tensors
                .keys()
                .filter(|k| !specs.iter().any(|s| &s.path == *k))
                .collect();
            return Err(Error::WeightShape(format!("unexpected tensors {extra:?}")));
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut header = String::new();
        header.push_str(MAGIC);
        header.push('\n');
        header.push_str(&format!("fingerprint {}\n", self.fingerprint));
        match self.seed {
            Some(s) => header.push_str(&format!("seed {s}\n")),
            None => header.push_str("seed none\n"),
        }
        for (path, t) in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            header.push_str(&format!("tensor {path} f32 {}\n", dims.join(",")));
        }
        header.push_str("end\n");
        w.write_all(header.as_bytes())?;
        for t in self.tensors.values() {
            let mut buf = Vec::with_capacity(t.data.len() * 4);
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        let mut next_line = |r: &mut BufReader<_>| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::WeightShape("truncated weight header".into()));
            }
            Ok(line.trim_end_matches('\n').to_string())
        };
        if next_line(&mut r)? != MAGIC {
            return Err(Error::WeightShape("not a weight container".into()));
        }
        let fp = next_line(&mut r)?;
        let fingerprint = fp
            .strip_prefix("fingerprint ")
            .ok_or_else(|| Error::WeightShape("missing fingerprint line".into()))?
            .to_string();
        let seed_line = next_line(&mut r)?;
        let seed = match seed_line.strip_prefix("seed ") {
            Some("none") => None,
            Some(s) => Some(s.parse().map_err(|_| Error::WeightShape(format!("bad seed {s:?}")))?),
            None => return Err(Error::WeightShape("missing seed line".into())),
        };
        let mut entries = Vec::new();
        loop {
            let l = next_line(&mut r)?;
            if l == "end" {
                break;
            }
            let parts: Vec<&str> = l.split(' ').collect();
            if parts.len() != 4 || parts[0] != "tensor" || parts[2] != "f32" {
                return Err(Error::WeightShape(format!("bad manifest line {l:?}")));
            }
            let shape = parts[3]
                .split(',')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::WeightShape(format!("bad shape in {l:?}")))?;
            entries.push((parts[1].to_string(), shape));
        }
        let mut out = Self::new(fingerprint, seed);
        for (path, shape) in entries {
            let n: usize = shape.iter().product();
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes)
                .map_err(|_| Error::WeightShape(format!("payload truncated in {path}")))?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            out.insert(path, WeightTensor { shape, data });
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::WeightShape(format!("{} trailing payload bytes", rest.len())));
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// Deterministic fan-in-scaled uniform weights for `cfg`.
pub fn init_random(cfg: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ModelWeights::new(cfg.fingerprint(), Some(seed));
    for spec in super::param_specs(cfg) {
        let n: usize = spec.shape.iter().product();
        let data = match spec.init {
            Init::Uniform { fan_in } => {
                let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            }
            Init::Ones => vec![1.0; n],
            Init::Zeros => vec![0.0; n],
        };
        w.insert(
            spec.path,
            WeightTensor {
                shape: spec.shape,
                data,
            },
        );
    }
    Ok(w)
}

/// All-zero weights with the right shapes (layer norms at unit gain).
pub fn init_zeros(cfg: &ModelConfig) -> Result<ModelWeights> {
    cfg.validate()?;
    let mut w = ModelWeights::new(cfg.fingerprint(), None);
    for spec in super::param_specs(cfg) {
        let mut t = WeightTensor::zeros(spec.shape);
        if spec.init == Init::Ones {
            t.data.fill(1.0);
        }
        w.insert(spec.path, t);
    }
    Ok(w)
}
