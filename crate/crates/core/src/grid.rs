//! Binary exchange format for rotation-coefficient and solution grids.
//!
//! All values are little-endian.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FPBG"
//! 4       4     version, u32 = 1
//! 8       4     kind, u32: 0 = rotation stencil, 1 = solution
//! 12      4     N, u32
//! 16      4     m, u32 (number of s nodes)
//! 20      8     s_min, f64
//! 28      8     s_max, f64
//! 36      8     stencil step h, f64 (0 for solution grids)
//! 44      4     P, u32 (number of u points)
//! 48      ...   P points, each N complex numbers
//! ...     ...   data, complex numbers
//! ```
//!
//! A complex number is two f64 values, real part first. The s nodes are
//! uniform: `s_a = s_min + a·(s_max − s_min)/(m − 1)`.
//!
//! Rotation stencil data is `β_ij(s_a, u_p)` in row-major order `[p][a][i][j]`,
//! with diagonal entries zero. Point 0 is the base point `u`; for each axis `k`
//! the next four points are `u + t·h·e_k` for `t = −2, −1, 1, 2`, so
//! `P = 1 + 4N`.
//!
//! Solution data is `K_ij(s_a, s_b, u_p)` in order `[p][a][b][i][j]`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

pub const MAGIC: &[u8; 4] = b"FPBG";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    RotationStencil,
    Solution,
}

impl GridKind {
    fn code(self) -> u32 {
        match self {
            GridKind::RotationStencil => 0,
            GridKind::Solution => 1,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(GridKind::RotationStencil),
            1 => Ok(GridKind::Solution),
            k => Err(Error::Input(format!("unknown grid kind {k}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub kind: GridKind,
    pub n: usize,
    pub m: usize,
    pub s_min: f64,
    pub s_max: f64,
    pub step: f64,
    pub points: Vec<Vec<C>>,
    pub data: Vec<C>,
}

/// Base point followed by `u + t·h·e_k`, `t ∈ {−2, −1, 1, 2}`, for each axis.
pub fn stencil_points(u: &[C], h: f64) -> Vec<Vec<C>> {
    let mut out = vec![u.to_vec()];
    for k in 0..u.len() {
        for t in [-2.0, -1.0, 1.0, 2.0] {
            let mut p = u.to_vec();
            p[k] += t * h;
            out.push(p);
        }
    }
    out
}

impl Grid {
    pub fn s_node(&self, a: usize) -> f64 {
        if self.m == 1 {
            self.s_min
        } else {
            self.s_min + a as f64 * (self.s_max - self.s_min) / (self.m - 1) as f64
        }
    }

    fn block(&self) -> usize {
        match self.kind {
            GridKind::RotationStencil => self.m * self.n * self.n,
            GridKind::Solution => self.m * self.m * self.n * self.n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Input("grid dimensions must be positive".into()));
        }
        if !(self.s_min.is_finite() && self.s_max.is_finite() && self.s_min <= self.s_max) {
            return Err(Error::Input("grid s-range is invalid".into()));
        }
        if self.points.iter().any(|p| p.len() != self.n) {
            return Err(Error::Input("grid point has wrong dimension".into()));
        }
        if self.kind == GridKind::RotationStencil && self.points.len() != 1 + 4 * self.n {
            return Err(Error::Input(format!(
                "rotation stencil needs {} points, found {}",
                1 + 4 * self.n,
                self.points.len()
            )));
        }
        if self.data.len() != self.points.len() * self.block() {
            return Err(Error::Input("grid data length does not match header".into()));
        }
        Ok(())
    }

    /// `β_ij(s_a, u_p)` of a rotation stencil.
    pub fn beta(&self, p: usize, a: usize, i: usize, j: usize) -> C {
        let n = self.n;
        self.data[((p * self.m + a) * n + i) * n + j]
    }

    /// `K_ij(s_a, s_b)` of a solution grid.
    pub fn kernel(&self, p: usize, a: usize, b: usize, i: usize, j: usize) -> C {
        let n = self.n;
        self.data[(((p * self.m + a) * self.m + b) * n + i) * n + j]
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        let mut buf = Vec::with_capacity(48 + 16 * (self.data.len() + self.points.len() * self.n));
        buf.extend_from_slice(MAGIC);
        for v in [VERSION, self.kind.code(), self.n as u32, self.m as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.s_min, self.s_max, self.step] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.points.len() as u32).to_le_bytes());
        for z in self.points.iter().flatten().chain(&self.data) {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Grid> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Input("not a grid file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Input(format!("unsupported grid version {version}")));
        }
        let kind = GridKind::from_code(cur.u32()?)?;
        let n = cur.u32()? as usize;
        let m = cur.u32()? as usize;
        let s_min = cur.f64()?;
        let s_max = cur.f64()?;
        let step = cur.f64()?;
        let count = cur.u32()? as usize;
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            points.push((0..n).map(|_| cur.complex()).collect::<Result<Vec<_>>>()?);
        }
        let rest = (bytes.len() - cur.pos) / 16;
        let data = (0..rest).map(|_| cur.complex()).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Input("trailing bytes in grid file".into()));
        }
        let g = Grid {
            kind,
            n,
            m,
            s_min,
            s_max,
            step,
            points,
            data,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Grid> {
        Grid::read_from(&mut std::fs::File::open(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, k: usize) -> Result<&[u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::Input("grid file is truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn complex(&mut self) -> Result<C> {
        Ok(C::new(self.f64()?, self.f64()?))
    }
}
