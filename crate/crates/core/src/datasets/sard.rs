//! The SARD container.
//!
//! All integers little-endian.
//!
//! ```text
//! "SARD" | version u8 | kind u8 (1 dataset, 2 checkpoint)
//! dataset:    task u8 | classes u16 | P u32 | count u32
//!             | n_train u32 | n_val u32 | n_test u32 | split indices u32…
//!             | count × (label u8 | P² f32)
//! checkpoint: records u32 | records × (name_len u16 | name | dtype u8
//!             | ndim u8 | dims u32… | data)
//! ```
//! Checkpoint dtypes: 1 = f32, 2 = f64, 3 = u64.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{LabeledDataset, Sample, Splits, Task};
use crate::cnn::{Group, Hyper, ModelParams};
use crate::error::{Error, Result};

pub const SARD_MAGIC: &[u8; 4] = b"SARD";
pub const SARD_VERSION: u8 = 1;
const KIND_DATASET: u8 = 1;
const KIND_CHECKPOINT: u8 = 2;
const DTYPE_F32: u8 = 1;
const DTYPE_F64: u8 = 2;
const DTYPE_U64: u8 = 3;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn u32_of(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| fmt_err(format!("{what} {n} does not fit in 32 bits")))
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| fmt_err("unexpected end of data"))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn vec(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut v = Vec::new();
        (&mut self.inner)
            .take(n as u64)
            .read_to_end(&mut v)
            .map_err(|e| fmt_err(e.to_string()))?;
        if v.len() != n {
            return Err(fmt_err("unexpected end of data"));
        }
        Ok(v)
    }

    fn indices(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| Ok(self.u32()? as usize)).collect()
    }

    fn header(&mut self, kind: u8) -> Result<()> {
        if &self.bytes::<4>()? != SARD_MAGIC {
            return Err(fmt_err("bad magic, not a SARD file"));
        }
        let version = self.u8()?;
        if version != SARD_VERSION {
            return Err(fmt_err(format!("unsupported version {version}")));
        }
        let k = self.u8()?;
        if k != kind {
            return Err(fmt_err(format!("expected container kind {kind}, found {k}")));
        }
        Ok(())
    }

    fn expect_end(&mut self) -> Result<()> {
        let mut extra = [0u8; 1];
        match self.inner.read(&mut extra) {
            Ok(0) => Ok(()),
            _ => Err(fmt_err("trailing bytes after container")),
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    fmt_err(format!("write failed: {e}"))
}

/// Serializes a dataset. Provenance is not stored.
pub fn write_dataset<W: Write>(w: &mut W, d: &LabeledDataset) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(SARD_MAGIC);
    buf.extend_from_slice(&[SARD_VERSION, KIND_DATASET, d.task().id()]);
    buf.extend_from_slice(&(d.class_count() as u16).to_le_bytes());
    buf.extend_from_slice(&u32_of(d.input_size(), "input size")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(d.len(), "sample count")?.to_le_bytes());
    let s = d.splits();
    for part in [&s.train, &s.validation, &s.test] {
        buf.extend_from_slice(&(part.len() as u32).to_le_bytes());
    }
    for &i in s.train.iter().chain(&s.validation).chain(&s.test) {
        buf.extend_from_slice(&(i as u32).to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)?;
    let mut row = Vec::with_capacity(1 + 4 * d.input_size() * d.input_size());
    for sample in d.samples() {
        row.clear();
        row.push(sample.label);
        for v in &sample.input {
            row.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&row).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<LabeledDataset> {
    let mut r = Reader { inner: r };
    r.header(KIND_DATASET)?;
    let task = Task::from_id(r.u8()?)?;
    let classes = r.u16()? as usize;
    let size = r.u32()? as usize;
    let count = r.u32()? as usize;
    let (nt, nv, ns) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    if nt + nv + ns != count {
        return Err(fmt_err(format!("split sizes {nt}+{nv}+{ns} do not add up to {count}")));
    }
    let splits = Splits {
        train: r.indices(nt)?,
        validation: r.indices(nv)?,
        test: r.indices(ns)?,
    };
    let px = size.checked_mul(size).ok_or_else(|| fmt_err("input size overflows"))?;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let label = r.u8()?;
        let raw = r.vec(4 * px)?;
        let input = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        samples.push(Sample {
            input,
            label,
            provenance: None,
        });
    }
    r.expect_end()?;
    LabeledDataset::with_splits(task, classes, size, samples, splits)
        .map_err(|e| fmt_err(format!("invalid dataset contents: {e}")))
}

pub fn save_dataset(path: &Path, d: &LabeledDataset) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_dataset(&mut w, d)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(f)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

enum Data {
    F64(Vec<f64>),
    U64(Vec<u64>),
}

struct Record {
    name: String,
    dims: Vec<u32>,
    data: Data,
}

fn record_bytes(rec: &Record, out: &mut Vec<u8>) -> Result<()> {
    let name = rec.name.as_bytes();
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name);
    out.push(match rec.data {
        Data::F64(_) => DTYPE_F64,
        Data::U64(_) => DTYPE_U64,
    });
    out.push(rec.dims.len() as u8);
    for d in &rec.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    match &rec.data {
        Data::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Data::U64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    Ok(())
}

fn group_dims(g: Group, h: &Hyper) -> Vec<u32> {
    let d = |v: usize| v as u32;
    match g {
        Group::ConvWeights => vec![d(h.filters), d(h.filter_size), d(h.filter_size)],
        Group::ConvBias | Group::BnScale | Group::BnOffset => vec![d(h.filters)],
        Group::FcWeights => vec![d(h.classes), d(h.fc_inputs())],
        Group::FcBias => vec![d(h.classes)],
    }
}

/// Serializes every parameter group, the hyperparameters and the batch-norm
/// running statistics as named records.
pub fn write_checkpoint<W: Write>(w: &mut W, p: &ModelParams) -> Result<()> {
    let h = p.hyper();
    let k = h.filters as u32;
    let mut records = vec![
        Record {
            name: "hyper".into(),
            dims: vec![4],
            data: Data::U64(vec![
                h.input_size as u64,
                h.filter_size as u64,
                h.filters as u64,
                h.classes as u64,
            ]),
        },
        Record {
            name: "bn.eps".into(),
            dims: vec![1],
            data: Data::F64(vec![h.bn_eps]),
        },
    ];
    for g in Group::ALL {
        records.push(Record {
            name: g.name().into(),
            dims: group_dims(g, h),
            data: Data::F64(p.group(g).to_vec()),
        });
    }
    records.push(Record {
        name: "bn.running_mean".into(),
        dims: vec![k],
        data: Data::F64(p.running_mean().to_vec()),
    });
    records.push(Record {
        name: "bn.running_var".into(),
        dims: vec![k],
        data: Data::F64(p.running_var().to_vec()),
    });
    records.push(Record {
        name: "bn.stats_updates".into(),
        dims: vec![1],
        data: Data::U64(vec![p.stats_updates()]),
    });

    let mut buf = Vec::new();
    buf.extend_from_slice(SARD_MAGIC);
    buf.extend_from_slice(&[SARD_VERSION, KIND_CHECKPOINT]);
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in &records {
        record_bytes(r, &mut buf)?;
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<ModelParams> {
    let mut r = Reader { inner: r };
    r.header(KIND_CHECKPOINT)?;
    let n = r.u32()? as usize;
    let mut records: Vec<Record> = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let len = r.u16()? as usize;
        let name = String::from_utf8(r.vec(len)?).map_err(|_| fmt_err("record name is not UTF-8"))?;
        let dtype = r.u8()?;
        let ndim = r.u8()? as usize;
        let dims: Vec<u32> = (0..ndim).map(|_| r.u32()).collect::<Result<_>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| fmt_err(format!("record {name} is too large")))?;
        let data = match dtype {
            DTYPE_F64 => Data::F64(
                r.vec(8 * count)?
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DTYPE_F32 => Data::F64(
                r.vec(4 * count)?
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect(),
            ),
            DTYPE_U64 => Data::U64(
                r.vec(8 * count)?
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            other => return Err(fmt_err(format!("record {name} has unknown dtype {other}"))),
        };
        records.push(Record { name, dims, data });
    }
    r.expect_end()?;

    let find = |name: &str| {
        records
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| fmt_err(format!("checkpoint lacks record {name}")))
    };
    let floats = |name: &str| -> Result<Vec<f64>> {
        match &find(name)?.data {
            Data::F64(v) => Ok(v.clone()),
            Data::U64(_) => Err(fmt_err(format!("record {name} should hold floats"))),
        }
    };
    let ints = |name: &str| -> Result<Vec<u64>> {
        match &find(name)?.data {
            Data::U64(v) => Ok(v.clone()),
            Data::F64(_) => Err(fmt_err(format!("record {name} should hold integers"))),
        }
    };

    let hv = ints("hyper")?;
    if hv.len() != 4 {
        return Err(fmt_err("hyper record must hold 4 values"));
    }
    let mut hyper = Hyper::new(hv[0] as usize, hv[1] as usize, hv[2] as usize, hv[3] as usize)
        .map_err(|e| fmt_err(format!("invalid hyperparameters: {e}")))?;
    let eps = floats("bn.eps")?;
    hyper.bn_eps = *eps.first().ok_or_else(|| fmt_err("empty bn.eps record"))?;
    for g in Group::ALL {
        if find(g.name())?.dims != group_dims(g, &hyper) {
            return Err(fmt_err(format!("record {} has the wrong dimensions", g.name())));
        }
    }
    let groups = Group::ALL.map(|g| floats(g.name()));
    let [a, b, c, d, e, f] = groups;
    let updates = ints("bn.stats_updates")?;
    ModelParams::from_parts(
        hyper,
        [a?, b?, c?, d?, e?, f?],
        floats("bn.running_mean")?,
        floats("bn.running_var")?,
        *updates
            .first()
            .ok_or_else(|| fmt_err("empty bn.stats_updates record"))?,
    )
    .map_err(|e| fmt_err(format!("inconsistent checkpoint: {e}")))
}

pub fn save_checkpoint(path: &Path, p: &ModelParams) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, p)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f)).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}
