//! Model files.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "GCFOREST"
//! 8       2     format major (u16 LE)
//! 10      2     format minor (u16 LE)
//! 12      8     payload length in bytes (u64 LE)
//! 20      32    SHA-256 of the payload
//! 52      ...   payload
//! ```
//!
//! See `docs/model-format.md` for the payload layout.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cascade::{CascadeModel, Level};
use crate::dataset::{load_features_csv, Matrix};
use crate::error::{Error, Result};
use crate::forest::{Forest, ForestConfig};
use crate::model::GcModel;
use crate::scanning::{Geometry, GrainTransformer};
use crate::tree::{Tree, LEAF};

pub const MAGIC: &[u8; 8] = b"GCFOREST";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;
const HEADER_LEN: usize = 8 + 2 + 2 + 8 + 32;

const TAG_INTERNAL: u8 = 0;
const TAG_LEAF: u8 = 1;

// Writes go to a Vec<u8>, which cannot fail.
type W = Vec<u8>;

fn put_str(w: &mut W, s: &str) {
    w.write_u64::<LE>(s.len() as u64).unwrap();
    w.extend_from_slice(s.as_bytes());
}

fn put_json<T: Serialize>(w: &mut W, v: &T) {
    put_str(w, &serde_json::to_string(v).expect("config types serialize"));
}

fn put_tree(w: &mut W, t: &Tree) {
    w.write_u32::<LE>(t.nodes.len() as u32).unwrap();
    for n in &t.nodes {
        if n.feature == LEAF {
            let entries = t.leaf_entries(n.child as usize);
            w.write_u8(TAG_LEAF).unwrap();
            w.write_u32::<LE>(entries.len() as u32).unwrap();
            for &(c, k) in entries {
                w.write_u32::<LE>(c).unwrap();
                w.write_u32::<LE>(k).unwrap();
            }
        } else {
            w.write_u8(TAG_INTERNAL).unwrap();
            w.write_u32::<LE>(n.feature).unwrap();
            w.write_f64::<LE>(n.threshold).unwrap();
            w.write_u32::<LE>(n.child).unwrap();
        }
    }
}

fn put_forest(w: &mut W, f: &Forest) {
    put_json(w, &f.config);
    w.write_u64::<LE>(f.n_features as u64).unwrap();
    w.write_u32::<LE>(f.n_classes as u32).unwrap();
    w.write_u32::<LE>(f.trees.len() as u32).unwrap();
    f.trees.iter().for_each(|t| put_tree(w, t));
}

fn put_forests(w: &mut W, forests: &[Forest]) {
    w.write_u32::<LE>(forests.len() as u32).unwrap();
    forests.iter().for_each(|f| put_forest(w, f));
}

/// Serialize a model to bytes (header + payload).
pub fn to_bytes(m: &GcModel) -> Vec<u8> {
    let mut p = W::new();
    put_json(&mut p, &m.config);
    put_json(&mut p, &m.classes);
    p.write_u64::<LE>(m.n_features as u64).unwrap();
    match m.panel_shape {
        Some((h, w)) => {
            p.write_u8(1).unwrap();
            p.write_u64::<LE>(h as u64).unwrap();
            p.write_u64::<LE>(w as u64).unwrap();
        }
        None => p.write_u8(0).unwrap(),
    }
    p.write_u32::<LE>(m.transformers.len() as u32).unwrap();
    for t in &m.transformers {
        put_forests(&mut p, &t.forests);
    }
    let c = &m.cascade;
    put_json(&mut p, &c.plan);
    put_json(&mut p, &c.termination);
    p.write_u32::<LE>(c.levels.len() as u32).unwrap();
    for level in &c.levels {
        p.write_u64::<LE>(level.input_dim as u64).unwrap();
        put_forests(&mut p, &level.forests);
    }

    let mut out = Vec::with_capacity(HEADER_LEN + p.len());
    out.extend_from_slice(MAGIC);
    out.write_u16::<LE>(FORMAT_MAJOR).unwrap();
    out.write_u16::<LE>(FORMAT_MINOR).unwrap();
    out.write_u64::<LE>(p.len() as u64).unwrap();
    out.extend_from_slice(&Sha256::digest(&p));
    out.extend_from_slice(&p);
    out
}

struct Reader<'a>(Cursor<&'a [u8]>);

fn corrupt(e: impl std::fmt::Display) -> Error {
    Error::Corrupt(e.to_string())
}

impl Reader<'_> {
    fn u8(&mut self) -> Result<u8> {
        self.0.read_u8().map_err(corrupt)
    }
    fn u32(&mut self) -> Result<u32> {
        self.0.read_u32::<LE>().map_err(corrupt)
    }
    fn u64(&mut self) -> Result<u64> {
        self.0.read_u64::<LE>().map_err(corrupt)
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(corrupt)
    }
    fn f64(&mut self) -> Result<f64> {
        self.0.read_f64::<LE>().map_err(corrupt)
    }

    /// A length that must fit in what is left of the payload, assuming each
    /// element takes at least `min_bytes`.
    fn len(&mut self, raw: u64, min_bytes: u64) -> Result<usize> {
        let left = self.0.get_ref().len() as u64 - self.0.position();
        if raw.saturating_mul(min_bytes) > left {
            return Err(corrupt(format!("length {raw} exceeds remaining payload")));
        }
        Ok(raw as usize)
    }

    fn string(&mut self) -> Result<String> {
        let raw = self.u64()?;
        let n = self.len(raw, 1)?;
        let mut buf = vec![0; n];
        self.0.read_exact(&mut buf).map_err(corrupt)?;
        String::from_utf8(buf).map_err(corrupt)
    }

    fn json<T: DeserializeOwned>(&mut self) -> Result<T> {
        serde_json::from_str(&self.string()?).map_err(corrupt)
    }

    fn tree(&mut self, n_features: usize, n_classes: usize) -> Result<Tree> {
        let raw = self.u32()? as u64;
        let n_nodes = self.len(raw, 5)?;
        let mut t = Tree::empty(n_features, n_classes);
        for _ in 0..n_nodes {
            match self.u8()? {
                TAG_LEAF => {
                    let raw = self.u32()? as u64;
                    let n = self.len(raw, 8)?;
                    let entries = (0..n)
                        .map(|_| Ok((self.u32()?, self.u32()?)))
                        .collect::<Result<Vec<_>>>()?;
                    t.push_raw_leaf(&entries);
                }
                TAG_INTERNAL => {
                    let feature = self.u32()?;
                    let threshold = self.f64()?;
                    let right = self.u32()?;
                    t.push_raw_internal(feature, threshold, right);
                }
                tag => return Err(corrupt(format!("unknown node tag {tag}"))),
            }
        }
        t.validate().map_err(corrupt)?;
        Ok(t)
    }

    fn forest(&mut self) -> Result<Forest> {
        let config: ForestConfig = self.json()?;
        let n_features = self.usize()?;
        let n_classes = self.u32()? as usize;
        let raw = self.u32()? as u64;
        let n_trees = self.len(raw, 4)?;
        let trees = (0..n_trees)
            .map(|_| self.tree(n_features, n_classes))
            .collect::<Result<Vec<_>>>()?;
        Forest::from_trees(trees, config).map_err(corrupt)
    }

    fn forests(&mut self) -> Result<Vec<Forest>> {
        let raw = self.u32()? as u64;
        let n = self.len(raw, 8)?;
        (0..n).map(|_| self.forest()).collect()
    }
}

/// Parse a model from bytes produced by [`to_bytes`].
pub fn from_bytes(bytes: &[u8]) -> Result<GcModel> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(corrupt("not a model file (bad magic or truncated header)"));
    }
    let mut h = Cursor::new(&bytes[8..HEADER_LEN]);
    let major = h.read_u16::<LE>().map_err(corrupt)?;
    let minor = h.read_u16::<LE>().map_err(corrupt)?;
    if major != FORMAT_MAJOR {
        return Err(Error::VersionMismatch {
            found_major: major,
            found_minor: minor,
            supported_major: FORMAT_MAJOR,
            supported_minor: FORMAT_MINOR,
        });
    }
    let len = h.read_u64::<LE>().map_err(corrupt)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len || Sha256::digest(payload)[..] != bytes[20..HEADER_LEN] {
        return Err(Error::Checksum);
    }

    let mut r = Reader(Cursor::new(payload));
    let config: crate::model::GcConfig = r.json()?;
    let classes: Vec<String> = r.json()?;
    let n_features = r.usize()?;
    let panel_shape = match r.u8()? {
        0 => None,
        1 => Some((r.usize()?, r.usize()?)),
        t => return Err(corrupt(format!("bad panel flag {t}"))),
    };
    let n_transformers = r.u32()? as usize;
    if n_transformers != config.grains.len() {
        return Err(corrupt("grain count disagrees with config"));
    }
    let mut transformers = Vec::with_capacity(n_transformers);
    for g in &config.grains {
        let geometry = Geometry::for_window(g.window, n_features, panel_shape)?;
        transformers.push(GrainTransformer::from_parts(g.clone(), geometry, r.forests()?, classes.len())?);
    }
    let plan = r.json()?;
    let termination = r.json()?;
    let raw = r.u32()? as u64;
    let n_levels = r.len(raw, 12)?;
    let mut levels = Vec::with_capacity(n_levels);
    for _ in 0..n_levels {
        let input_dim = r.usize()?;
        levels.push(Level::from_forests(r.forests()?, input_dim, classes.len())?);
    }
    if r.0.position() != payload.len() as u64 {
        return Err(corrupt("trailing bytes after payload"));
    }
    let cascade = CascadeModel::from_parts(levels, termination, plan, classes.len())?;
    Ok(GcModel {
        config,
        classes,
        n_features,
        panel_shape,
        transformers,
        cascade,
    })
}

pub fn save(m: &GcModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&to_bytes(m)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<GcModel> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// `<model>.probe.csv` next to a model file.
pub fn probe_path(model_path: impl AsRef<Path>) -> PathBuf {
    let mut s = model_path.as_ref().as_os_str().to_owned();
    s.push(".probe.csv");
    PathBuf::from(s)
}

/// Write probe inputs and the model's mean class vectors for them. Numbers
/// use Rust's shortest round-trip formatting, so they parse back exactly.
pub fn write_probe(m: &GcModel, probe: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let pred = m.predict_batch(probe)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let header: Vec<String> = (0..probe.n_cols())
        .map(|j| format!("x{j}"))
        .chain((0..m.n_classes()).map(|c| format!("p{c}")))
        .collect();
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    for i in 0..probe.n_rows() {
        let rec: Vec<String> = probe
            .row(i)
            .iter()
            .chain(pred.probs.row(i))
            .map(|v| format!("{v:?}"))
            .collect();
        w.write_record(&rec).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Save a model plus its probe file; returns the probe path.
pub fn save_with_probe(m: &GcModel, path: impl AsRef<Path>, probe: &Matrix) -> Result<PathBuf> {
    save(m, path.as_ref())?;
    let p = probe_path(path);
    write_probe(m, probe, &p)?;
    Ok(p)
}

/// Rows of a probe file whose recomputed vectors are not bit-identical.
pub fn verify_probe(m: &GcModel, path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let all = load_features_csv(path, None)?;
    let d = m.n_features();
    let c = m.n_classes();
    if all.n_cols() != d + c {
        return Err(Error::DimensionMismatch {
            expected: d + c,
            found: all.n_cols(),
        });
    }
    let inputs = Matrix::from_rows(&all.rows().map(|r| r[..d].to_vec()).collect::<Vec<_>>())?;
    let pred = m.predict_batch(&inputs)?;
    Ok((0..all.n_rows())
        .filter(|&i| {
            let want = &all.row(i)[d..];
            pred.probs.row(i).iter().zip(want).any(|(a, b)| a.to_bits() != b.to_bits())
        })
        .collect())
}
