//! Versioned on-disk formats: PCA bases and SVM models (little-endian binary),
//! labeled datasets (CSV) and session checkpoints (binary container).

use std::io::{BufRead, Read, Write};

use crate::active::ConvergenceState;
use crate::device::{Behavior, DeviceKind};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, PatchSpec, PcaBasis};
use crate::geometry::{Point3, Pose2};
use crate::svm::{Label, LabeledDataset, SvmModel};
use crate::trainer::{BehaviorState, Session};

pub const FORMAT_VERSION: u32 = 1;
const PCA_MAGIC: &[u8; 8] = b"MLPCABAS";
const SVM_MAGIC: &[u8; 8] = b"MLSVMMOD";
const SESSION_MAGIC: &[u8; 8] = b"MLSESSN\0";
const DATASET_HEADER: &str = "# manip-learn dataset v1 behavior=";

struct Writer<W: Write> {
    w: W,
}

impl<W: Write> Writer<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b)?;
        Ok(())
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn usize(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        v.iter().try_for_each(|x| self.f64(*x))
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }
    fn point(&mut self, p: &Point3) -> Result<()> {
        self.f64s(&[p.x, p.y, p.z])
    }
}

struct Reader<R: Read> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    /// Length field, bounded to guard against corrupt headers.
    fn len(&mut self, max: usize) -> Result<usize> {
        let n = self.u64()?;
        if n > max as u64 {
            return Err(Error::Format(format!("length {n} exceeds {max}")));
        }
        Ok(n as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        if n > 1 << 16 {
            return Err(Error::Format("string too long".into()));
        }
        let mut b = vec![0u8; n];
        self.r.read_exact(&mut b)?;
        String::from_utf8(b).map_err(|_| Error::Format("invalid utf-8".into()))
    }
    fn point(&mut self) -> Result<Point3> {
        Ok(Point3::new(self.f64()?, self.f64()?, self.f64()?))
    }
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if &self.array::<8>()? != magic {
            return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }
}

const MAX_DIM: usize = 1 << 24;

/// PCA basis file: header, patch layout, eigenvalues, mean, row-major basis.
pub fn write_pca<W: Write>(w: W, pca: &PcaBasis, spec: &PatchSpec) -> Result<()> {
    let mut w = Writer { w };
    w.bytes(PCA_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.str(&pca.tag)?;
    w.usize(pca.dim())?;
    w.usize(pca.out_dims())?;
    w.usize(pca.rank())?;
    w.u32(spec.widths.len() as u32)?;
    for &width in &spec.widths {
        w.u32(width as u32)?;
    }
    w.u32(spec.target as u32)?;
    // channel layout: interleaved RGB, scales ordered small to large
    w.u8(1)?;
    w.u8(1)?;
    w.f64(pca.total_variance())?;
    w.f64s(pca.eigenvalues())?;
    w.f64s(pca.mean())?;
    w.f64s(pca.basis())
}

pub fn read_pca<R: Read>(r: R) -> Result<(PcaBasis, PatchSpec)> {
    let mut r = Reader { r };
    r.header(PCA_MAGIC)?;
    let tag = r.str()?;
    let dim = r.len(MAX_DIM)?;
    let out_dims = r.len(MAX_DIM)?;
    let rank = r.len(out_dims)?;
    if dim.checked_mul(rank).is_none_or(|n| n > MAX_DIM * 64) {
        return Err(Error::Format("basis too large".into()));
    }
    let nw = r.u32()? as usize;
    if nw > 64 {
        return Err(Error::Format("too many patch widths".into()));
    }
    let widths = (0..nw).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let target = r.u32()? as usize;
    if r.u8()? != 1 || r.u8()? != 1 {
        return Err(Error::Format("unsupported patch layout".into()));
    }
    let spec = PatchSpec { widths, target };
    if spec.raw_len() != dim {
        return Err(Error::Format("patch layout does not match dimension".into()));
    }
    let total = r.f64()?;
    let eig = r.f64s(rank)?;
    let mean = r.f64s(dim)?;
    let basis = r.f64s(dim * rank)?;
    Ok((PcaBasis::from_parts(tag, dim, out_dims, rank, mean, basis, eig, total)?, spec))
}

/// SVM model file: header, parameters, then per support vector its
/// coefficient and values.
pub fn write_model<W: Write>(w: W, m: &SvmModel) -> Result<()> {
    let mut w = Writer { w };
    w.bytes(SVM_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.f64s(&[m.gamma, m.c_pos, m.c_neg])?;
    w.usize(m.dim)?;
    w.usize(m.support.len())?;
    w.f64(m.bias)?;
    w.f64(m.objective)?;
    for (sv, c) in m.support.iter().zip(&m.coef) {
        w.f64(*c)?;
        w.f64s(sv)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<SvmModel> {
    let mut r = Reader { r };
    r.header(SVM_MAGIC)?;
    let (gamma, c_pos, c_neg) = (r.f64()?, r.f64()?, r.f64()?);
    let dim = r.len(MAX_DIM)?;
    let n = r.len(1 << 20)?;
    let bias = r.f64()?;
    let objective = r.f64()?;
    let mut support = Vec::with_capacity(n);
    let mut coef = Vec::with_capacity(n);
    for _ in 0..n {
        coef.push(r.f64()?);
        support.push(r.f64s(dim)?);
    }
    Ok(SvmModel { gamma, c_pos, c_neg, dim, support, coef, bias, objective })
}

/// Dataset CSV: a comment line naming the behavior, a header, then
/// `label,x,y,z,f0,...` rows.
pub fn write_dataset<W: Write>(mut w: W, data: &LabeledDataset) -> Result<()> {
    writeln!(w, "{DATASET_HEADER}{}", data.tag)?;
    let dim = data.examples.first().map_or(0, |e| e.features.values.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_owned(), "x".into(), "y".into(), "z".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    out.write_record(&header)?;
    for e in &data.examples {
        let label = if e.label == Label::Positive { "1" } else { "-1" };
        let p = e.features.point;
        let mut row = vec![label.to_owned(), p.x.to_string(), p.y.to_string(), p.z.to_string()];
        row.extend(e.features.values.iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Read a dataset CSV. Source pixels are not stored and come back as (0, 0).
pub fn read_dataset<R: BufRead>(mut r: R) -> Result<LabeledDataset> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    let tag = first
        .trim_end()
        .strip_prefix(DATASET_HEADER)
        .ok_or_else(|| Error::Format("missing dataset header line".into()))?;
    let mut data = LabeledDataset::new(tag);
    let mut rows = csv::Reader::from_reader(r);
    let dim = rows.headers()?.len().checked_sub(4).ok_or_else(|| Error::Format("short header".into()))?;
    for rec in rows.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Format("short row".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("column {i}: {e}")))
        };
        let label = rec
            .get(0)
            .and_then(|s| s.parse::<i64>().ok())
            .and_then(Label::from_sign)
            .ok_or_else(|| Error::Format("label must be 1 or -1".into()))?;
        let point = Point3::new(num(1)?, num(2)?, num(3)?);
        let values = (0..dim).map(|i| num(4 + i)).collect::<Result<Vec<_>>>()?;
        data.push(FeatureVector { values, point, pixel: (0, 0) }, label);
    }
    Ok(data)
}

fn kind_code(kind: DeviceKind) -> u8 {
    match kind {
        DeviceKind::WallSwitch => 0,
        DeviceKind::Rocker => 1,
        DeviceKind::Drawer => 2,
    }
}

/// Session checkpoint bundling datasets, models, bases and poses.
pub fn write_session<W: Write>(w: W, s: &Session) -> Result<()> {
    let mut w = Writer { w };
    w.bytes(SESSION_MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u8(kind_code(s.kind))?;
    w.point(&s.seed_point)?;
    w.f64s(&[s.nominal.x, s.nominal.y, s.nominal.heading])?;
    w.usize(s.poses.len())?;
    for p in &s.poses {
        w.f64s(&[p.x, p.y, p.heading])?;
    }
    for b in &s.behaviors {
        w.u8(b.behavior.index() as u8)?;
        w.point(&b.center)?;
        w.usize(b.convergence.budget)?;
        w.usize(b.convergence.labels_this_visit)?;
        w.usize(b.convergence.converged.len())?;
        for c in &b.convergence.converged {
            w.u8(u8::from(*c))?;
        }
        w.str(&b.data.tag)?;
        w.usize(b.data.len())?;
        for e in &b.data.examples {
            w.u8(u8::from(e.label == Label::Positive))?;
            w.point(&e.features.point)?;
            w.u32(e.features.pixel.0)?;
            w.u32(e.features.pixel.1)?;
            w.usize(e.features.values.len())?;
            w.f64s(&e.features.values)?;
        }
        let mut buf = Vec::new();
        write_model(&mut buf, &b.model)?;
        w.usize(buf.len())?;
        w.bytes(&buf)?;
        buf.clear();
        write_pca(&mut buf, &b.pca, &PatchSpec::default())?;
        w.usize(buf.len())?;
        w.bytes(&buf)?;
    }
    Ok(())
}

pub fn read_session<R: Read>(r: R) -> Result<Session> {
    let mut r = Reader { r };
    r.header(SESSION_MAGIC)?;
    let kind = match r.u8()? {
        0 => DeviceKind::WallSwitch,
        1 => DeviceKind::Rocker,
        2 => DeviceKind::Drawer,
        k => return Err(Error::Format(format!("unknown device kind {k}"))),
    };
    let seed_point = r.point()?;
    let nominal = Pose2 { x: r.f64()?, y: r.f64()?, heading: r.f64()? };
    let n = r.len(1 << 16)?;
    let poses = (0..n)
        .map(|_| Ok(Pose2 { x: r.f64()?, y: r.f64()?, heading: r.f64()? }))
        .collect::<Result<Vec<_>>>()?;
    let mut states = Vec::with_capacity(2);
    for expect in Behavior::BOTH {
        if r.u8()? as usize != expect.index() {
            return Err(Error::Format("behavior order".into()));
        }
        let center = r.point()?;
        let budget = r.len(1 << 20)?;
        let labels_this_visit = r.len(budget)?;
        let np = r.len(1 << 16)?;
        let converged = (0..np).map(|_| r.u8().map(|b| b != 0)).collect::<Result<Vec<_>>>()?;
        let mut data = LabeledDataset::new(r.str()?);
        let ne = r.len(1 << 24)?;
        for _ in 0..ne {
            let label = Label::from_success(r.u8()? != 0);
            let point = r.point()?;
            let pixel = (r.u32()?, r.u32()?);
            let dim = r.len(MAX_DIM)?;
            let values = r.f64s(dim)?;
            data.push(FeatureVector { values, point, pixel }, label);
        }
        let len = r.len(1 << 32)?;
        let model = read_model((&mut r.r).take(len as u64))?;
        let len = r.len(1 << 34)?;
        let (pca, _) = read_pca((&mut r.r).take(len as u64))?;
        states.push(BehaviorState {
            behavior: expect,
            pca,
            data,
            model,
            center,
            convergence: ConvergenceState { converged, labels_this_visit, budget },
        });
    }
    let [forward, reverse]: [BehaviorState; 2] = states.try_into().expect("two behaviors");
    Ok(Session { kind, seed_point, nominal, poses, behaviors: [forward, reverse] })
}
