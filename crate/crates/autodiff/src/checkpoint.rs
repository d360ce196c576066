//! Flat binary checkpoint format.
//!
//! ```text
//! "HYTL"            4 bytes magic
//! version           u32 LE
//! repeated until EOF:
//!   name length     u16 LE
//!   name            UTF-8 bytes
//!   rank            u8
//!   dims            u32 LE each
//!   payload         f64 LE, product(dims) values
//! ```

use std::io::{self, Read, Write};

use crate::{AutodiffError, ParamStore, Result, Shape};

pub const MAGIC: &[u8; 4] = b"HYTL";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

fn io_err(e: io::Error) -> AutodiffError {
    AutodiffError::Checkpoint(e.to_string())
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    for r in records {
        let name = r.name.as_bytes();
        let len =
            u16::try_from(name.len()).map_err(|_| AutodiffError::Checkpoint(format!("name too long: {}", r.name)))?;
        if r.dims.len() > Shape::MAX_RANK {
            return Err(AutodiffError::Checkpoint(format!("rank too large: {}", r.name)));
        }
        if r.dims.iter().product::<usize>() != r.data.len() {
            return Err(AutodiffError::Checkpoint(format!(
                "payload length mismatch: {}",
                r.name
            )));
        }
        w.write_all(&len.to_le_bytes()).map_err(io_err)?;
        w.write_all(name).map_err(io_err)?;
        w.write_all(&[r.dims.len() as u8]).map_err(io_err)?;
        for &d in &r.dims {
            let d = u32::try_from(d).map_err(|_| AutodiffError::Checkpoint(format!("dim too large: {}", r.name)))?;
            w.write_all(&d.to_le_bytes()).map_err(io_err)?;
        }
        for v in &r.data {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_records<R: Read>(mut r: R) -> Result<Vec<Record>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(io_err)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(AutodiffError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.array()?);
    if version != VERSION {
        return Err(AutodiffError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut out = Vec::new();
    while cur.pos < buf.len() {
        let len = u16::from_le_bytes(cur.array()?) as usize;
        let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|e| AutodiffError::Checkpoint(e.to_string()))?;
        let rank = cur.take(1)?[0] as usize;
        if rank > Shape::MAX_RANK {
            return Err(AutodiffError::Checkpoint(format!("rank {rank} in {name}")));
        }
        let dims: Vec<usize> = (0..rank)
            .map(|_| cur.array().map(|b| u32::from_le_bytes(b) as usize))
            .collect::<Result<_>>()?;
        let n: usize = dims.iter().product();
        let data = (0..n)
            .map(|_| cur.array().map(f64::from_le_bytes))
            .collect::<Result<_>>()?;
        out.push(Record { name, dims, data });
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(AutodiffError::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

impl ParamStore {
    /// One record per parameter, names prefixed with `prefix/`.
    pub fn to_records(&self, prefix: &str) -> Vec<Record> {
        self.ids()
            .map(|id| Record {
                name: format!("{prefix}/{}", self.name(id)),
                dims: self.shape(id).dims().to_vec(),
                data: self.value(id).to_vec(),
            })
            .collect()
    }

    /// Overwrites values from records named `prefix/<param>`. Every
    /// parameter must be present with a matching shape.
    pub fn load_records(&mut self, prefix: &str, records: &[Record]) -> Result<()> {
        for id in self.ids().collect::<Vec<_>>() {
            let full = format!("{prefix}/{}", self.name(id));
            let rec = records
                .iter()
                .find(|r| r.name == full)
                .ok_or_else(|| AutodiffError::Checkpoint(format!("missing parameter {full}")))?;
            if rec.dims != self.shape(id).dims() {
                return Err(AutodiffError::Checkpoint(format!(
                    "shape mismatch for {full}: {:?} vs {}",
                    rec.dims,
                    self.shape(id)
                )));
            }
            self.value_mut(id).copy_from_slice(&rec.data);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let rec = Record {
            name: "w".into(),
            dims: vec![2],
            data: vec![1.0, -2.0],
        };
        let mut buf = Vec::new();
        write_records(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let mut expected = b"HYTL".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u16.to_le_bytes());
        expected.push(b'w');
        expected.push(1);
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f64.to_le_bytes());
        expected.extend((-2.0f64).to_le_bytes());
        assert_eq!(buf, expected);
        assert_eq!(read_records(&buf[..]).unwrap(), vec![rec]);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_records(&b"NOPE\x01\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        let rec = Record {
            name: "abc".into(),
            dims: vec![1, 3],
            data: vec![0.5; 3],
        };
        write_records(&mut buf, &[rec]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_records(&buf[..]).is_err());
    }

    #[test]
    fn store_round_trip() {
        let mut store = ParamStore::new();
        store.add("l0.w", &[2, 3], (0..6).map(f64::from).collect());
        store.add("l0.b", &[3], vec![0.1, 0.2, 0.3]);
        let mut buf = Vec::new();
        write_records(&mut buf, &store.to_records("critic")).unwrap();
        let recs = read_records(&buf[..]).unwrap();
        let mut other = ParamStore::new();
        other.add("l0.w", &[2, 3], vec![0.0; 6]);
        other.add("l0.b", &[3], vec![0.0; 3]);
        other.load_records("critic", &recs).unwrap();
        assert_eq!(other.sq_distance(&store), 0.0);
        assert!(other.load_records("actor", &recs).is_err());
    }
}
