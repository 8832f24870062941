use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SGA1";

/// Index of a [`Parameter`] inside its [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub gradient: Tensor,
}

/// A named collection of trainable tensors with gradient slots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Argument(format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.params.len());
        let gradient = Tensor::zeros(value.shape());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            value,
            gradient,
        });
        Ok(id)
    }

    /// Glorot-uniform initialised matrix: `U(-s, s)` with
    /// `s = sqrt(6 / (fan_in + fan_out))`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        rng: &mut R,
    ) -> Result<ParamId> {
        let value = glorot_uniform(shape, rng);
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn add_ones(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.add(name, Tensor::full(shape, 1.0))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar coordinates.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn gradient(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].gradient
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Parameters in name order (the serialisation order).
    pub fn iter_by_name(&self) -> impl Iterator<Item = &Parameter> {
        self.by_name.values().map(move |id| &self.params[id.0])
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.gradient.data_mut().fill(0.0);
        }
    }

    /// Overwrites every value with the same-named value in `other`. Names and
    /// shapes must match exactly.
    pub fn assign_from(&mut self, other: &ParamSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Config(format!(
                "parameter count mismatch: expected {}, file has {}",
                self.len(),
                other.len()
            )));
        }
        for p in &mut self.params {
            let src = other
                .id(&p.name)
                .map(|id| other.value(id))
                .ok_or_else(|| Error::Config(format!("missing parameter `{}`", p.name)))?;
            if src.shape() != p.value.shape() {
                return Err(Error::Config(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    p.name,
                    src.shape(),
                    p.value.shape()
                )));
            }
            p.value = src.clone();
        }
        Ok(())
    }

    /// Writes the `SGA1` binary format: magic, then for each parameter in name
    /// order: `u32` name length, name bytes, `u32` rank, `u64` dims, and the
    /// little-endian `f64` payload. All integers are little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for p in self.iter_by_name() {
            let name = p.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            let shape = p.value.shape();
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for &d in shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in p.value.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<ParamSet> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ParamSet> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected SGA1".into()));
        }
        let mut set = ParamSet::new();
        while cur.pos < bytes.len() {
            let name_len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
                .to_owned();
            let rank = cur.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u64()? as usize);
            }
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("shape overflow for `{name}`")))?;
            let mut data = Vec::with_capacity(count.min(bytes.len() / 8));
            for _ in 0..count {
                data.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
            }
            let value = Tensor::new(shape, data)
                .map_err(|e| Error::Format(format!("parameter `{name}`: {e}")))?;
            set.add(name, value)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(set)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn glorot_uniform<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let (fan_out, fan_in) = match shape {
        [] => (1, 1),
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => (shape[0], shape[1..].iter().product()),
    };
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-s..s)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}
