use std::io::{BufRead, Read, Write};

use super::index::{for_each_in_box, MultiIndex};
use crate::error::{arg, Error, Result};

const MAGIC: &[u8; 8] = b"SLLNFLD1";

/// Which generator produced a field. The numeric code is what the binary
/// header stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorId {
    Unspecified,
    Zero,
    IidStable,
    IidGaussian,
    Orthogonal,
    QuasiStationary,
    LfssIncrements,
    LfssSheet,
    Constant,
}

impl GeneratorId {
    pub fn code(self) -> u64 {
        match self {
            GeneratorId::Unspecified => 0,
            GeneratorId::Zero => 1,
            GeneratorId::IidStable => 2,
            GeneratorId::IidGaussian => 3,
            GeneratorId::Orthogonal => 4,
            GeneratorId::QuasiStationary => 5,
            GeneratorId::LfssIncrements => 6,
            GeneratorId::LfssSheet => 7,
            GeneratorId::Constant => 8,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        Some(match code {
            0 => GeneratorId::Unspecified,
            1 => GeneratorId::Zero,
            2 => GeneratorId::IidStable,
            3 => GeneratorId::IidGaussian,
            4 => GeneratorId::Orthogonal,
            5 => GeneratorId::QuasiStationary,
            6 => GeneratorId::LfssIncrements,
            7 => GeneratorId::LfssSheet,
            8 => GeneratorId::Constant,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorId::Unspecified => "unspecified",
            GeneratorId::Zero => "zero",
            GeneratorId::IidStable => "iid-stable",
            GeneratorId::IidGaussian => "iid-gaussian",
            GeneratorId::Orthogonal => "orthogonal",
            GeneratorId::QuasiStationary => "quasi-stationary",
            GeneratorId::LfssIncrements => "lfss-increments",
            GeneratorId::LfssSheet => "lfss-sheet",
            GeneratorId::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldMeta {
    pub generator: GeneratorId,
    pub seed: u64,
}

impl Default for FieldMeta {
    fn default() -> Self {
        Self {
            generator: GeneratorId::Unspecified,
            seed: 0,
        }
    }
}

/// Values `ξ(k)` for `k` in the box `[offset, offset + shape)`, stored
/// row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    shape: Vec<usize>,
    offset: Vec<u64>,
    values: Vec<f64>,
    meta: FieldMeta,
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl LatticeField {
    pub fn new(shape: Vec<usize>, offset: Vec<u64>, values: Vec<f64>, meta: FieldMeta) -> Result<Self> {
        if shape.is_empty() {
            return arg("field must have dimension at least 1");
        }
        if offset.len() != shape.len() {
            return Err(Error::Dimension {
                expected: shape.len(),
                got: offset.len(),
            });
        }
        let n = checked_len(&shape)?;
        if values.len() != n {
            return arg(format!("expected {n} values for shape {shape:?}, got {}", values.len()));
        }
        Ok(Self {
            shape,
            offset,
            values,
            meta,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = checked_len(shape)?;
        Self::new(
            shape.to_vec(),
            vec![0; shape.len()],
            vec![0.0; n],
            FieldMeta {
                generator: GeneratorId::Zero,
                seed: 0,
            },
        )
    }

    /// Field at offset 0 with `ξ(k) = f(k)`.
    pub fn from_fn<F: FnMut(&[u64]) -> f64>(shape: &[usize], meta: FieldMeta, mut f: F) -> Result<Self> {
        let n = checked_len(shape)?;
        let mut values = Vec::with_capacity(n);
        if n > 0 {
            let hi: Vec<u64> = shape.iter().map(|&s| s as u64 - 1).collect();
            for_each_in_box(&vec![0; shape.len()], &hi, |k| values.push(f(k)));
        }
        Self::new(shape.to_vec(), vec![0; shape.len()], values, meta)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn offset(&self) -> &[u64] {
        &self.offset
    }

    pub fn meta(&self) -> FieldMeta {
        self.meta
    }

    pub fn set_meta(&mut self, meta: FieldMeta) {
        self.meta = meta;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Flat position of lattice point `k`, or `None` outside the box.
    pub fn position(&self, k: &[u64]) -> Option<usize> {
        if k.len() != self.dim() {
            return None;
        }
        let mut pos = 0usize;
        for i in 0..self.dim() {
            let rel = k[i].checked_sub(self.offset[i])? as usize;
            if rel >= self.shape[i] {
                return None;
            }
            pos = pos * self.shape[i] + rel;
        }
        Some(pos)
    }

    pub fn value_at(&self, k: &[u64]) -> Option<f64> {
        self.position(k).map(|p| self.values[p])
    }

    pub fn get(&self, k: &MultiIndex) -> Result<f64> {
        if k.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: k.dim(),
            });
        }
        self.check_point(k.coords())?;
        Ok(self.values[self.position(k.coords()).expect("checked")])
    }

    /// Range error naming the first axis where `k` leaves the box.
    pub(crate) fn check_point(&self, k: &[u64]) -> Result<()> {
        for (axis, &c) in k.iter().enumerate() {
            let lo = self.offset[axis];
            let hi = lo + self.shape[axis] as u64;
            if c < lo || c >= hi {
                return Err(Error::Range {
                    axis,
                    value: c as i64,
                    lo: lo as i64,
                    hi: hi as i64 - 1,
                });
            }
        }
        Ok(())
    }

    /// Writes the binary layout: magic, `d`, shape, offset, generator code,
    /// seed (all little-endian `u64`), then row-major little-endian `f64`s.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for &s in &self.shape {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for &o in &self.offset {
            w.write_all(&o.to_le_bytes())?;
        }
        w.write_all(&self.meta.generator.code().to_le_bytes())?;
        w.write_all(&self.meta.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut next = || -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let d = next()? as usize;
        if d == 0 || d > 64 {
            return Err(Error::Format(format!("implausible dimension {d}")));
        }
        let shape: Vec<usize> = (0..d).map(|_| next().map(|v| v as usize)).collect::<Result<_>>()?;
        let offset: Vec<u64> = (0..d).map(|_| next()).collect::<Result<_>>()?;
        let code = next()?;
        let generator = GeneratorId::from_code(code)
            .ok_or_else(|| Error::Format(format!("unknown generator code {code}")))?;
        let seed = next()?;
        let n = checked_len(&shape)?;
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(shape, offset, values, FieldMeta { generator, seed })
    }

    /// CSV dump with header `k1,…,kd,value`, one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("k{i}")).collect();
        writeln!(w, "{},value", header.join(","))?;
        if self.is_empty() {
            return Ok(());
        }
        let hi: Vec<u64> = self
            .offset
            .iter()
            .zip(&self.shape)
            .map(|(&o, &s)| o + s as u64 - 1)
            .collect();
        let mut vals = self.values.iter();
        let mut err = Ok(());
        for_each_in_box(&self.offset, &hi, |k| {
            if err.is_err() {
                return;
            }
            let v = vals.next().expect("value per point");
            let coords: Vec<String> = k.iter().map(u64::to_string).collect();
            err = writeln!(w, "{},{:e}", coords.join(","), v);
        });
        err?;
        Ok(())
    }

    /// Reads back the CSV dump; the points must cover a full box.
    pub fn read_csv<R: BufRead>(r: R, meta: FieldMeta) -> Result<Self> {
        let mut rows: Vec<(Vec<u64>, f64)> = Vec::new();
        let mut d = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("line {}: cannot parse {line:?}", lineno + 1));
            let (val, coords) = parts.split_last().ok_or_else(bad)?;
            let coords: Vec<u64> = coords
                .iter()
                .map(|c| c.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            let val: f64 = val.trim().parse().map_err(|_| bad())?;
            if *d.get_or_insert(coords.len()) != coords.len() || coords.is_empty() {
                return Err(bad());
            }
            rows.push((coords, val));
        }
        let d = d.ok_or_else(|| Error::Format("empty csv".into()))?;
        let lo: Vec<u64> = (0..d).map(|i| rows.iter().map(|r| r.0[i]).min().unwrap_or(0)).collect();
        let hi: Vec<u64> = (0..d).map(|i| rows.iter().map(|r| r.0[i]).max().unwrap_or(0)).collect();
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
        let n = checked_len(&shape)?;
        if rows.len() != n {
            return Err(Error::Format(format!("{} rows do not fill a box of {n} points", rows.len())));
        }
        let mut f = Self::new(shape, lo, vec![0.0; n], meta)?;
        for (k, v) in rows {
            let p = f.position(&k).expect("inside bounding box");
            f.values[p] = v;
        }
        Ok(f)
    }
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .ok_or_else(|| Error::Argument(format!("shape {shape:?} overflows")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LatticeField {
        LatticeField::from_fn(
            &[3, 4],
            FieldMeta {
                generator: GeneratorId::Constant,
                seed: 99,
            },
            |k| (k[0] * 10 + k[1]) as f64 - 7.25,
        )
        .unwrap()
    }

    #[test]
    fn row_major_layout() {
        let f = sample();
        assert_eq!(f.value_at(&[2, 1]), Some(21.0 - 7.25));
        assert_eq!(f.values()[2 * 4 + 1], 21.0 - 7.25);
        assert_eq!(f.value_at(&[3, 0]), None);
        assert_eq!(strides(&[3, 4, 5]), vec![20, 5, 1]);
    }

    #[test]
    fn range_error_names_axis() {
        let f = sample();
        match f.get(&MultiIndex::from_slice(&[1, 9])) {
            Err(Error::Range { axis: 1, value: 9, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"SLLNFLD1");
        assert_eq!(buf.len(), 8 + 8 + 2 * 8 + 2 * 8 + 8 + 8 + 12 * 8);
        let g = LatticeField::read_binary(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_round_trip() {
        let mut f = sample();
        f.offset = vec![2, 5];
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k1,k2,value\n2,5,"));
        let g = LatticeField::read_csv(buf.as_slice(), f.meta()).unwrap();
        assert_eq!(f, g);
    }
}
